//! Hard-edge limits, predicted `1/N` corrections and convergence-order fits.

mod finite;
mod fit;
mod limit;

pub use finite::*;
pub use fit::*;
pub use limit::*;
