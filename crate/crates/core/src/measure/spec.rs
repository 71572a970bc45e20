//! JSON measure specifications, e.g. `{"type": "cantor", "depth": 24}`.

use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::*;
use crate::rational::parse_rational;

/// A rational written either as a JSON number or as a string (`"3/4"`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RationalText {
    Int(i64),
    Float(f64),
    Text(String),
}

impl RationalText {
    pub fn to_rational(&self) -> Result<Rational> {
        match self {
            RationalText::Int(n) => Ok(rational::int(*n)),
            // Go through the shortest decimal form so 0.1 means 1/10.
            RationalText::Float(x) => parse_rational(&format!("{x}")),
            RationalText::Text(s) => parse_rational(s),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CantorPattern {
    Named(String),
    Masks(Vec<ChildMask>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeasureSpec {
    Dirac {
        position: RationalText,
        resolution: u32,
    },
    Uniform {
        resolution: u32,
    },
    Sparse {
        resolution: u32,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cells: Option<Vec<u64>>,
        /// Use the square cells `j²`, `j ≤ √K`, instead of an explicit list.
        #[serde(default)]
        squares: bool,
    },
    /// Explicit signed weights `[[cell, "num/den"], ...]`.
    Atoms {
        resolution: u32,
        atoms: Vec<(u64, RationalText)>,
    },
    Cantor {
        depth: u32,
        #[serde(default = "default_pattern")]
        pattern: CantorPattern,
    },
    Riesz {
        kmax: u32,
        resolution: u32,
    },
    Liouville {
        resolution: u32,
        levels: Vec<(u64, u32)>,
    },
    ConvolvePower {
        base: Box<MeasureSpec>,
        power: u32,
    },
    /// Seeded random member of `M(β, k)`.
    RandomClass {
        resolution: u32,
        beta: RationalText,
        k: u32,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
}

fn default_pattern() -> CantorPattern {
    CantorPattern::Named("alternating".into())
}

impl CantorPattern {
    pub fn masks(&self) -> Result<Vec<ChildMask>> {
        match self {
            CantorPattern::Masks(m) => Ok(m.clone()),
            CantorPattern::Named(name) => match name.as_str() {
                "alternating" => Ok(alternating_pattern()),
                "both" => Ok(vec![ChildMask::Both]),
                "left" => Ok(vec![ChildMask::Left]),
                "right" => Ok(vec![ChildMask::Right]),
                other => Err(Error::invalid(format!("unknown cantor pattern `{other}`"))),
            },
        }
    }
}

impl MeasureSpec {
    /// Parses a spec from JSON text.
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::invalid(format!("bad measure spec: {e}")))
    }

    /// Builds the measure. `seed` is used by random specs without their own.
    pub fn build(&self, seed: Option<u64>) -> Result<DyadicMeasure> {
        match self {
            MeasureSpec::Dirac {
                position,
                resolution,
            } => make_dirac(&position.to_rational()?, *resolution),
            MeasureSpec::Uniform { resolution } => make_uniform(*resolution),
            MeasureSpec::Sparse {
                resolution,
                cells,
                squares,
            } => {
                let support: BTreeSet<u64> = match (cells, squares) {
                    (Some(_), true) => {
                        return Err(Error::invalid("sparse spec: give either `cells` or `squares`"))
                    }
                    (Some(c), false) => c.iter().copied().collect(),
                    (None, true) => square_cells(*resolution),
                    (None, false) => {
                        return Err(Error::invalid("sparse spec needs `cells` or `squares: true`"))
                    }
                };
                make_sparse(&support, *resolution)
            }
            MeasureSpec::Atoms { resolution, atoms } => {
                let parsed = atoms
                    .iter()
                    .map(|(j, w)| Ok((*j, w.to_rational()?)))
                    .collect::<Result<Vec<_>>>()?;
                DyadicMeasure::from_atoms(*resolution, parsed)
            }
            MeasureSpec::Cantor { depth, pattern } => make_cantor(&pattern.masks()?, *depth),
            MeasureSpec::Riesz { kmax, resolution } => make_riesz_sampled(*kmax, *resolution),
            MeasureSpec::Liouville { resolution, levels } => {
                make_liouville_truncation(levels, *resolution)
            }
            MeasureSpec::ConvolvePower { base, power } => base.build(seed)?.convolve_power(*power),
            MeasureSpec::RandomClass {
                resolution,
                beta,
                k,
                seed: own,
            } => {
                let mut rng = ChaCha8Rng::seed_from_u64(own.or(seed).unwrap_or(0));
                random_class_member(&mut rng, *resolution, &beta.to_rational()?, *k)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{frac, int};

    #[test]
    fn parses_every_type() {
        let cases = [
            r#"{"type":"dirac","position":"1/2","resolution":3}"#,
            r#"{"type":"uniform","resolution":4}"#,
            r#"{"type":"sparse","resolution":16,"squares":true}"#,
            r#"{"type":"sparse","resolution":4,"cells":[1,3]}"#,
            r#"{"type":"atoms","resolution":1,"atoms":[[0,"1"],[1,"-1"]]}"#,
            r#"{"type":"cantor","depth":6}"#,
            r#"{"type":"cantor","depth":4,"pattern":["both","right"]}"#,
            r#"{"type":"riesz","kmax":2,"resolution":12}"#,
            r#"{"type":"liouville","resolution":10,"levels":[[5,1]]}"#,
            r#"{"type":"convolve_power","base":{"type":"sparse","resolution":8,"cells":[0,3]},"power":2}"#,
            r#"{"type":"random_class","resolution":12,"beta":0.5,"k":10,"seed":3}"#,
        ];
        for text in cases {
            let spec = MeasureSpec::from_json(text).unwrap();
            let mu = spec.build(None).unwrap();
            assert!(!mu.is_zero(), "{text}");
            let again = MeasureSpec::from_json(&serde_json::to_string(&spec).unwrap()).unwrap();
            assert_eq!(again, spec);
        }
    }

    #[test]
    fn decimal_numbers_are_exact() {
        assert_eq!(RationalText::Float(0.1).to_rational().unwrap(), frac(1, 10));
        assert_eq!(RationalText::Int(-2).to_rational().unwrap(), int(-2));
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(MeasureSpec::from_json(r#"{"type":"blob"}"#).is_err());
        assert!(MeasureSpec::from_json(r#"{"type":"uniform","resolution":4,"x":1}"#).is_err());
        let s = MeasureSpec::from_json(r#"{"type":"sparse","resolution":4}"#).unwrap();
        assert!(s.build(None).is_err());
        let s = MeasureSpec::from_json(r#"{"type":"dirac","position":"1/3","resolution":4}"#).unwrap();
        assert!(matches!(s.build(None), Err(Error::OffGrid { .. })));
    }
}
