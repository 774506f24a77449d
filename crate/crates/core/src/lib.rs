//! Numerical laboratory for equilibrium potentials and Bergman kernels of
//! Hermitian line bundles on toric models and on the affine chart of the
//! projective line.
//!
//! * [`geometry`]: lattice polytopes, weights, grids, finite differences.
//! * [`hilbert`]: weighted Hilbert spaces of sections, Gram matrices and
//!   orthonormalisation, Bergman function and kernel.
//! * [`envelope`]: the equilibrium potential by biconjugation, convex hulls
//!   and a projected SOR obstacle solver; contact sets; regularity probes.
//! * [`mongeampere`]: Monge-Ampere density ratios, equilibrium measures and
//!   volume tables.
//! * [`asymptotics`]: convergence, decay, metric, expansion, off-diagonal
//!   and capacity reports over lists of levels `k`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod envelope;
pub mod error;
pub mod geometry;
pub mod hilbert;
pub mod mongeampere;
pub mod numeric;

pub use error::{Error, Result};
pub use geometry::{
    eval_weight, hessian_field, lattice_points, lattice_volume, Bump, Domain, GridField,
    LatticePolytope, MaskField, WeightSpec,
};
pub use hilbert::{BergmanModel, HilbertSpaceSpec};
