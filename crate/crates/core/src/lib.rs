pub mod config;
pub mod cplx;
pub mod error;
pub mod interp;
pub mod mellin;
pub mod model;
pub mod monodromy;
pub mod qseries;
pub mod selftest;
pub mod stab;
pub mod sum;

pub use cplx::{c, C64};
pub use error::{Error, Result};
pub use model::{Chamber, FixedPoint, Monomial, Params, VirtualCharacter};
pub use qseries::{QFunctionConfig, QSeries};
pub use stab::StabSpec;
