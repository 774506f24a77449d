//! The equilibrium potential `phi_e`: the largest minorant of `phi` that is
//! convex with gradient in `P` (toric models) or subharmonic (the chart).

mod legendre;
mod regularity;
mod sor;
mod toric;

pub use legendre::{convex_envelope_1d, legendre_conjugate, legendre_transform_1d, lower_hull};
pub use regularity::{regularity_probe, RegularityLevel, RegularityReport};
pub use sor::{
    chart_boundary_data, radial_envelope, radial_oracle, sor_envelope, Dirichlet, SorParams,
};
pub use toric::{toric_equilibrium, EnvelopeParams};

use crate::error::Result;
use crate::geometry::{hessian_field, GridField, MaskField};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvelopeMethod {
    Biconjugate,
    ConvexHull,
    Sor,
}

impl EnvelopeMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            EnvelopeMethod::Biconjugate => "biconjugate",
            EnvelopeMethod::ConvexHull => "convex-hull",
            EnvelopeMethod::Sor => "sor",
        }
    }
}

#[derive(Debug, Clone)]
pub struct EnvelopeResult {
    pub phi_e: GridField,
    /// The contact set `D = {phi - phi_e <= eps_d}`.
    pub contact: MaskField,
    pub method: EnvelopeMethod,
    /// Largest complementarity violation.
    pub residual: f64,
    pub iterations: usize,
    pub eps_d: f64,
    /// Largest update every 100 sweeps (SOR only).
    pub history: Vec<f64>,
    /// Width of the boundary-data sandwich (SOR with non-invariant weights).
    pub boundary_gap: f64,
}

/// `{phi - phi_e <= eps_d}`.
pub fn contact_set(phi: &GridField, phi_e: &GridField, eps_d: f64) -> Result<MaskField> {
    phi.check_same_domain(phi_e)?;
    let mask = phi
        .values()
        .iter()
        .zip(phi_e.values())
        .map(|(a, b)| a - b <= eps_d)
        .collect();
    MaskField::new(phi.domain().clone(), mask)
}

/// Default contact threshold `10 max(residual, h^2 kappa / 100)` with
/// `kappa` the largest trusted second difference of `phi` (per axis on
/// boxes, the `(s, theta)` Laplacian on polar grids).
pub fn default_eps_d(phi: &GridField, residual: f64) -> Result<f64> {
    let kappa = curvature_scale(phi)?;
    let h = phi.domain().max_spacing();
    Ok(10.0 * residual.max(0.01 * h * h * kappa))
}

pub(crate) fn curvature_scale(phi: &GridField) -> Result<f64> {
    let hf = hessian_field(phi)?;
    let mut kappa: f64 = 0.0;
    match hf.eig_min {
        // 2-D boxes: bound by the per-axis second differences
        Some(_) => {
            let d = phi.domain();
            for i in 0..d.len() {
                if hf.trusted[i] {
                    let (a, b, _) = crate::geometry::box_second_2d(phi.values(), d, i);
                    kappa = kappa.max(a.abs()).max(b.abs());
                }
            }
        }
        None => {
            for (i, &t) in hf.trusted.iter().enumerate() {
                if t {
                    kappa = kappa.max(hf.second.get(i).abs());
                }
            }
        }
    }
    Ok(kappa)
}

impl EnvelopeResult {
    pub(crate) fn assemble(
        phi: &GridField,
        phi_e: GridField,
        method: EnvelopeMethod,
        residual: f64,
        iterations: usize,
        eps_d: Option<f64>,
    ) -> Result<Self> {
        let eps_d = match eps_d {
            Some(e) => e,
            None => default_eps_d(phi, residual)?,
        };
        let contact = contact_set(phi, &phi_e, eps_d)?;
        Ok(Self {
            phi_e,
            contact,
            method,
            residual,
            iterations,
            eps_d,
            history: Vec::new(),
            boundary_gap: 0.0,
        })
    }
}
