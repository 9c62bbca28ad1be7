//! Correlation kernels of Pólya ensembles of positive definite matrices and
//! their expansions at the hard edge.
//!
//! The crate is organised bottom-up:
//!
//! * [`specfun`] — log-gamma, hypergeometric series, Bessel `J_a`, Gauss–Legendre.
//! * [`mellin`] — Mellin transforms as gamma-factor products, inverted either on a
//!   vertical contour or by residue summation.
//! * [`polya`] — the biorthogonal pair `p_n`, `q_n` and the kernel `K_N` of a
//!   Pólya ensemble, built from its Mellin transform alone.
//! * [`ensembles`] — constructors for Laguerre products, Laguerre
//!   Muttalib–Borodin, products with inverses and the Jacobi unitary ensemble.
//! * [`hardedge`] — limit kernels, predicted `1/N` corrections and convergence fits.
//! * [`moments`] — spectral moments and Fuss–Catalan limits.
//! * [`gapprob`] — Jacobi β-ensemble gap probabilities at the hard edge.

use serde::{Deserialize, Serialize};

pub mod error;
pub mod ensembles;
pub mod gapprob;
pub mod hardedge;
pub mod mellin;
pub mod moments;
pub mod polya;
pub mod specfun;

pub use error::{Error, Result};

/// Working precision for series accumulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    #[default]
    Double,
    /// Double-double (about 32 significant digits) accumulation.
    Extended,
}
