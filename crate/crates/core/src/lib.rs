//! Singular measures on the circle at finite dyadic resolution.
//!
//! Measures are atomic on the `2^-K` grid with exact rational weights. On top
//! of that the crate provides the dyadic martingale and its turbulence
//! combinatorics, the `h_n` test functions and their convolution lower bound,
//! Fourier–Stieltjes and Riesz-product spectra, and Walsh–Haar statistics.

pub mod error;
pub mod fourier;
pub mod ledger;
pub mod martingale;
pub mod measure;
pub mod parallel;
pub mod rational;
pub mod testfn;
pub mod walsh;

pub mod cli;

pub use error::{Error, Result};
pub use measure::DyadicMeasure;
pub use rational::Rational;
