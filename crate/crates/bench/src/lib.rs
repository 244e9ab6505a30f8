//! Shared fixtures for the benchmarks.

use num_complex::Complex64 as C64;
use vertexlab_core::config::default_params;
use vertexlab_core::{Chamber, FixedPoint, Params, StabSpec};

pub fn params(k: usize, n: usize) -> Params {
    default_params(k, n).validate().expect("built-in point is admissible")
}

/// Fixed generic evaluation point with `k` coordinates.
pub fn point(k: usize) -> Vec<C64> {
    [C64::new(0.83, 0.4), C64::new(-0.5, 0.9), C64::new(0.2, -1.1)][..k].to_vec()
}

pub fn spec(k: usize, n: usize, chamber: Chamber) -> StabSpec {
    let p = params(k, n);
    StabSpec::new(FixedPoint::all(k, n).remove(0), chamber, p).expect("valid spec")
}
