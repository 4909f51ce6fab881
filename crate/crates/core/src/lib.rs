//! Higher-order finite element integration on triangular prisms.
//!
//! The crate computes element stiffness matrices for linear elastostatics with
//! prism elements of order 1 to 7, and emulates four data-parallel kernel
//! organizations (register vs shared-memory accumulation, device-computed vs
//! precomputed Jacobians) on a configurable virtual device. A host-side planner
//! derives work-group sizes, matrix partitioning and batch sizes from device
//! limits, and sequential wide-precision integrators act as correctness oracles.
//!
//! Module map:
//! - [`quadrature`], [`shapes`]: reference prism rules and basis tabulation
//! - [`geometry`], [`mesh`]: element mapping, Jacobians, box-mesh fixtures
//! - [`coefficients`]: coefficient tensors and isotropic elasticity
//! - [`integrate`]: sequential reference integrators
//! - [`planner`]: device profiles and execution plans
//! - [`kernels`]: the kernel emulator
//! - [`harness`]: verification suites and benchmark reports behind the CLI

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod block;
pub mod coefficients;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod integrate;
pub mod kernels;
pub mod mesh;
pub mod planner;
pub mod quadrature;
pub mod shapes;

pub use error::{Error, Result};

/// Highest supported approximation order.
pub const MAX_ORDER: usize = 7;

/// Number of equations of the elasticity model problem.
pub const ELASTICITY_EQS: usize = 3;

/// Shape functions of the order-`p` prism: `(p + 1)^2 (p + 2) / 2`.
pub const fn n_shape(p: usize) -> usize {
    (p + 1) * (p + 1) * (p + 2) / 2
}

/// Quadrature points of the order-`p` prism rule.
pub const fn n_quad(p: usize) -> usize {
    const TRI: [usize; 7] = [3, 6, 12, 16, 25, 33, 42];
    TRI[p - 1] * (p + 1)
}

pub fn check_order(p: usize) -> Result<()> {
    if (1..=MAX_ORDER).contains(&p) {
        Ok(())
    } else {
        Err(Error::OrderOutOfRange(p))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizing_table() {
        let nsh: Vec<_> = (1..=7).map(n_shape).collect();
        let nq: Vec<_> = (1..=7).map(n_quad).collect();
        assert_eq!(nsh, [6, 18, 40, 75, 126, 196, 288]);
        assert_eq!(nq, [6, 18, 48, 80, 150, 231, 336]);
    }
}
