"""Smoke test for the dyadic_spectra extension module.

Build first:
    cargo build -p dyadic-spectra-py --release
    cp target/release/libdyadic_spectra.so python/dyadic_spectra.so
"""

import json
import os
import sys
from fractions import Fraction

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import dyadic_spectra as ds


def main():
    print("dyadic_spectra", ds.__version__)

    mu = ds.Measure.from_spec(json.dumps({"type": "cantor", "depth": 12}))
    assert Fraction(mu.total_mass()) == 1
    assert len(mu) == 2 ** 6, len(mu)
    assert sum(Fraction(w) for _, w in mu.level_masses(5)) == 1

    dirac = ds.Measure.from_atoms(12, [(0, "1/1")])
    conv = mu.convolve(dirac)
    assert conv.atoms() == mu.atoms()
    assert abs(dirac.fourier(17) - 1) < 1e-15
    # the finer operand is coarsened to the common resolution
    coarse = mu.convolve(ds.Measure.from_atoms(8, [(0, "1/1")]))
    assert coarse.resolution == 8 and Fraction(coarse.total_mass()) == 1

    est = ds.c_beta(mu, "1/2", 12)
    assert Fraction(est["value"]) == 1

    river = ds.mountain_river(
        ds.Measure.from_spec(json.dumps({"type": "random_class", "resolution": 16, "beta": "1/2", "k": 16}), seed=3),
        "1/2",
        16,
    )
    assert river["identity_holds"]

    report = ds.witness(ds.Measure.from_spec(json.dumps({"type": "cantor", "depth": 20})), "1/2")
    assert not report["vacuous"]
    assert all(c["verdict"] != "fail" for c in report["checks"])
    assert report["witness"]["achieved_f64"] >= report["bound"]

    l1, integral, sup = ds.hn_norms(3, "1/64")
    assert Fraction(l1) == Fraction(1, 2) - Fraction(1, 64) ** 2 * 2 ** 7
    assert Fraction(integral) == 0
    assert Fraction(sup) <= 8

    assert ds.riesz_coefficient(4, 3 + 9) == "1/4"
    assert Fraction(ds.riesz_coefficient(4, 2)) == 0

    groups = ds.walsh_groups(mu, 8)
    assert [len(g) for g in groups] == [2 ** (n - 1) for n in range(1, 9)]
    assert len(ds.haar_coeffs(mu, 4)) == 16

    assert ds.lorentz_norm([3.0, -5.0, 1.0], 2) == 8.0

    code, out, err = ds.run_cli(["riesz", "--kmax", "3", "--level-set", "0.25"])
    assert code == 0, err
    assert json.loads(out)["passed"]
    code, _, err = ds.run_cli(["bogus"])
    assert code == 2 and json.loads(err)["error"]["kind"] == "usage"

    try:
        ds.Measure.from_spec('{"type": "dirac", "position": "1/3", "resolution": 4}')
    except ValueError:
        pass
    else:
        raise AssertionError("off-grid dirac accepted")

    print("smoke test passed")


if __name__ == "__main__":
    main()
