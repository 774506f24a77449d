//! Monge-Ampere densities relative to a reference potential, equilibrium
//! measures and volume tables.
//!
//! Densities are ratios of finite-difference Hessians (`u''`, `det Hess u`
//! or the `(s, theta)` Laplacian) in shared coordinates. Masses are grid
//! sums of the reference Hessian over trusted nodes, so that in one
//! dimension the total mass of `phi''` is exactly the change of the
//! discrete slope across the grid.

use std::f64::consts::PI;

use crate::envelope::EnvelopeResult;
use crate::error::{Error, Result};
use crate::geometry::{hessian_field, Domain, GridField, HessianField, MaskField};

/// Relative tolerance for the derivative-matching check on the contact set.
pub const MATCH_TOL: f64 = 0.05;

/// Second differences smaller than this times `max(1, |u|) / h^2` are
/// rounding noise in the samples of `u`.
pub const ROUNDING_FLOOR: f64 = 16.0 * f64::EPSILON;

/// Largest curvature of the reference at `i` (`u''` in one dimension and
/// on polar grids, the largest Hessian eigenvalue on 2-D boxes) and the
/// rounding noise it must exceed.
fn curvature(hr: &HessianField, reference: &GridField, i: usize) -> (f64, f64) {
    let d = reference.domain();
    let h = d.spacing();
    let h = if d.dim() == 1 { h[0] } else { h[0].min(h[1]) };
    let noise = ROUNDING_FLOOR * reference.get(i).abs().max(1.0) / (h * h);
    let c = match &hr.eig_max {
        Some(e) => e.get(i),
        None => hr.second.get(i),
    };
    (c, noise)
}

/// Node-wise `det Hess u / det Hess reference` (`u'' / reference''` in one
/// dimension, Laplacian ratio on polar grids). Negative values are kept.
/// Nodes where the reference curvature or its determinant is lost in
/// rounding or truncation get ratio zero; a resolved concave reference at
/// an interior node is an error.
pub fn ma_ratio(u: &GridField, reference: &GridField) -> Result<GridField> {
    u.check_same_domain(reference)?;
    let hu = hessian_field(u)?;
    let hr = hessian_field(reference)?;
    let mut out = Vec::with_capacity(u.len());
    for i in 0..u.len() {
        let (c, noise) = curvature(&hr, reference, i);
        if c < -noise && hr.trusted[i] {
            return Err(Error::DegenerateReference(i));
        }
        let r = hr.second.get(i);
        if c <= noise || !(r > 0.0) {
            out.push(0.0);
            continue;
        }
        out.push(hu.second.get(i) / r);
    }
    GridField::new(u.domain().clone(), out)
}

/// Measure of each node under the reference Monge-Ampere measure: the
/// reference Hessian times the cell volume on trusted nodes, zero on the
/// boundary and where the curvature is lost in rounding. Polar grids are normalised to the unit-mass Fubini-Study
/// measure (`Delta_{s,theta} ln(1 + r^2)` integrates to `4 pi`).
pub fn reference_weights(reference: &GridField) -> Result<Vec<f64>> {
    let hr = hessian_field(reference)?;
    let d = reference.domain();
    let cell = match d {
        Domain::Polar { .. } => d.cell_volume() / (4.0 * PI),
        Domain::VBox { .. } => d.cell_volume(),
    };
    Ok((0..d.len())
        .map(|i| {
            let (c, noise) = curvature(&hr, reference, i);
            if hr.trusted[i] && c > noise {
                hr.second.get(i).max(0.0) * cell
            } else {
                0.0
            }
        })
        .collect())
}

#[derive(Debug, Clone)]
pub struct EquilibriumMeasure {
    /// Density with respect to the reference measure.
    pub density: GridField,
    pub mass: f64,
    /// Mass of the positive part of `MA(phi_e)` off the contact set.
    pub off_contact_mass: f64,
    /// Mass removed by clamping negative densities on the contact set.
    pub clamped_mass: f64,
    /// `L1` distance between the masked densities of `phi` and `phi_e`.
    pub identity_l1: f64,
    /// Fraction of interior contact nodes where the two densities differ
    /// by more than [`MATCH_TOL`] relative.
    pub mismatch_fraction: f64,
    /// Smallest Hessian eigenvalue of `phi` (`phi''`, or the Laplacian on
    /// polar grids) over contact nodes two steps inside the contact set.
    pub contact_eig_min: f64,
}

/// `1_D max(MA(phi) / MA(reference), 0)` with its mass and the diagnostics
/// that compare it against the Monge-Ampere measure of `phi_e`. Nodes of
/// `D` next to its complement count with half weight in the masses.
pub fn equilibrium_measure(
    env: &EnvelopeResult,
    phi: &GridField,
    reference: &GridField,
) -> Result<EquilibriumMeasure> {
    phi.check_same_domain(&env.phi_e)?;
    let ratio_phi = ma_ratio(phi, reference)?;
    let ratio_env = ma_ratio(&env.phi_e, reference)?;
    let w = reference_weights(reference)?;
    let mask = env.contact.values();
    let inner = env.contact.interior(1);
    let deep = env.contact.interior(2);
    let hphi = hessian_field(phi)?;
    let eig = hphi.eig_min.as_ref().unwrap_or(&hphi.second);

    let mut density = vec![0.0; phi.len()];
    let (mut mass, mut off, mut clamped, mut l1) = (0.0, 0.0, 0.0, 0.0);
    let (mut checked, mut mismatched) = (0usize, 0usize);
    let mut eig_min = f64::INFINITY;
    for i in 0..phi.len() {
        let rp = ratio_phi.get(i);
        let re = ratio_env.get(i);
        if mask[i] {
            // trapezoid weight on the edge of the contact set
            let wi = if inner[i] { w[i] } else { 0.5 * w[i] };
            density[i] = rp.max(0.0);
            mass += density[i] * wi;
            clamped += (-rp).max(0.0) * wi;
            l1 += (rp - re).abs() * wi;
            if inner[i] && w[i] > 0.0 {
                checked += 1;
                if (rp - re).abs() > MATCH_TOL * rp.abs().max(1e-300) {
                    mismatched += 1;
                }
            }
            if deep[i] && hphi.trusted[i] {
                eig_min = eig_min.min(eig.get(i));
            }
        } else {
            off += re.max(0.0) * w[i];
        }
    }
    Ok(EquilibriumMeasure {
        density: GridField::new(phi.domain().clone(), density)?,
        mass,
        off_contact_mass: off,
        clamped_mass: clamped,
        identity_l1: l1,
        mismatch_fraction: if checked == 0 {
            0.0
        } else {
            mismatched as f64 / checked as f64
        },
        contact_eig_min: eig_min,
    })
}

/// `int f dmu` for a node-wise density against the reference measure.
pub fn integrate(density: &GridField, reference: &GridField) -> Result<f64> {
    density.check_same_domain(reference)?;
    let w = reference_weights(reference)?;
    Ok(density.values().iter().zip(&w).map(|(a, b)| a * b).sum())
}

/// Mask of nodes carrying reference mass.
pub fn trusted_mask(reference: &GridField) -> Result<MaskField> {
    let w = reference_weights(reference)?;
    MaskField::new(reference.domain().clone(), w.iter().map(|x| *x > 0.0).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct VolumeRow {
    pub k: u32,
    pub dim: usize,
    /// `k^{-n} dim`.
    pub normalized: f64,
    /// `k^{-n} dim - mass`.
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VolumeReport {
    pub rows: Vec<VolumeRow>,
    pub mass: f64,
    /// Euclidean volume of the polytope (toric models).
    pub lattice_volume: Option<f64>,
    /// `|mass - vol| / vol`.
    pub mass_error: Option<f64>,
    /// Gap strictly decreasing over the last three levels.
    pub monotone_tail: bool,
    pub pass: bool,
}

/// Compares `k^{-n} dim H_k` with the equilibrium mass and the polytope
/// volume. `dims` are `(k, dim)` pairs in increasing `k`.
pub fn volume_report(
    n: usize,
    dims: &[(u32, usize)],
    mass: f64,
    lattice_volume: Option<f64>,
) -> Result<VolumeReport> {
    if dims.is_empty() {
        return Err(Error::InvalidArgument("volume table needs at least one level".into()));
    }
    if dims.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(Error::InvalidArgument("levels must increase".into()));
    }
    let rows: Vec<VolumeRow> = dims
        .iter()
        .map(|&(k, dim)| {
            let normalized = dim as f64 / (k as f64).powi(n as i32);
            VolumeRow {
                k,
                dim,
                normalized,
                gap: normalized - mass,
            }
        })
        .collect();
    let tail = &rows[rows.len().saturating_sub(3)..];
    let monotone_tail = tail.windows(2).all(|w| w[1].gap < w[0].gap);
    let mass_error = lattice_volume.map(|v| (mass - v).abs() / v);
    let pass = monotone_tail && mass_error.is_none_or(|e| e <= 0.01);
    Ok(VolumeReport {
        rows,
        mass,
        lattice_volume,
        mass_error,
        monotone_tail,
        pass,
    })
}
