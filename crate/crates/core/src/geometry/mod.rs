//! Polytopes, weights, grids and finite-difference operators.

mod grid;
mod hessian;
mod polytope;
mod weight;

pub use grid::{eval_weight, Domain, GridField, MaskField};
pub use hessian::{hessian_field, HessianField};
pub(crate) use hessian::{box_second_2d, line_first};
pub use polytope::{lattice_points, lattice_volume, Exponent, LatticePolytope};
pub use weight::{Bump, ToricPotential, Weight, WeightSpec};

/// Half-width `V` of the toric integration box: `V0 + ln(k N / tol)`.
///
/// The toric integrands decay like `exp(-|v|)` once `|v|` exceeds the
/// offset `V0`, so truncating at `V` bounds the tail mass by `tol` per basis
/// element. `V0` is the bump extent plus the log of the number of lattice
/// points of the polytope.
pub fn truncation_half_width(weight: &WeightSpec, k: u32, dim_h: usize, tol: f64) -> f64 {
    let n_points = weight
        .polytope()
        .map(|p| lattice_points(p, 1).map(|v| v.len()).unwrap_or(1))
        .unwrap_or(2);
    let v0 = weight.bump_extent() + (n_points as f64).ln();
    v0 + ((k.max(1) as f64) * (dim_h.max(1) as f64) / tol).ln()
}
