//! Reference implementations and scenario runners shared by the test suites.
//!
//! Nothing here calls into the batched kernels it is used to check: the
//! dynamics oracle is written against nalgebra, the collision oracle is an
//! all-pairs scan, and the allocation inverse uses the row orthogonality of `G`.

pub mod alloc;
pub mod checks;
pub mod collision;
pub mod random;
pub mod scalar;
pub mod scenarios;
pub mod wire;

/// `|a − b| ≤ tol · max(|a|, |b|, 1)`.
pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

/// Largest `|a − b| / max(|a|, |b|, 1)` over paired components.
pub fn max_rel_err(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1.0))
        .fold(0.0, f64::max)
}
