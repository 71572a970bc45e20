//! The two-plateau test function `h_n`, exact step-function convolutions,
//! the witness pipeline for the lower bound on `‖h_n ∗ μ‖₁`, and the band
//! decomposition of `ĥ_n`.

mod band;
mod hn;
mod witness;
mod step;

pub use band::{
    band_high_edge, band_low_edge, band_norm_experiment, band_report, band_tail_energies, default_band_epsilon,
    derivative_fourier, hn_derivative_measure, hn_fourier, BandEnergies, BandNormReport, BandProjection, BandReport,
    SupportCheck, DEFAULT_TAIL_TERMS,
};
pub use hn::{convolve_hn, make_hn, Orientation, TestFunctionHn, MAX_LEVEL};
pub use witness::{choose_epsilon, witness_pipeline, theoretical_bound, WitnessInputs, WitnessReport, Witness};
pub use step::StepFunction;
