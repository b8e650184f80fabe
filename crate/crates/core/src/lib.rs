//! Copula-based Markov chains: fold algebra of bivariate copulas, chain
//! sampling, ψ-type mixing bounds, and a robust kernel estimator of the
//! marginal mean with its Monte Carlo study.

pub mod copula;
pub mod error;
pub mod experiment;
pub mod mixing;
pub mod normal;
pub mod quadrature;
pub mod rng;
pub mod robust;
pub mod root;
pub mod sampler;

pub use copula::{CopulaSpec, Family, Rect};
pub use error::{Error, Result};
