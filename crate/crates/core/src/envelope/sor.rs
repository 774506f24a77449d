use rayon::prelude::*;

use super::toric::{toric_equilibrium, EnvelopeParams};
use super::{EnvelopeMethod, EnvelopeResult};
use crate::error::{Error, Result};
use crate::geometry::{Domain, GridField, LatticePolytope, WeightSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct SorParams {
    /// Over-relaxation factor in `(0, 2)`.
    pub omega: f64,
    /// Stop once a sweep moves no node by more than `tol_rel max(1, |phi|_inf)`.
    pub tol_rel: f64,
    pub max_sweeps: usize,
    pub eps_d: Option<f64>,
}

impl Default for SorParams {
    fn default() -> Self {
        Self {
            omega: 1.5,
            tol_rel: 1e-10,
            max_sweeps: 1_000_000,
            eps_d: None,
        }
    }
}

/// Dirichlet data on the inner and outer circles of a polar grid, one value
/// per angle.
#[derive(Debug, Clone, PartialEq)]
pub struct Dirichlet {
    pub inner: Vec<f64>,
    pub outer: Vec<f64>,
    /// Uncertainty of the data (zero when exact).
    pub gap: f64,
}

fn polar_shape(domain: &Domain) -> Result<(usize, usize, f64, f64)> {
    match domain {
        Domain::Polar {
            n_radial, n_theta, ..
        } => {
            let [ds, dt] = domain.spacing();
            Ok((*n_radial, *n_theta, ds, dt))
        }
        _ => Err(Error::WrongDomainKind {
            weight: "chart envelope",
            domain: domain.kind_name(),
        }),
    }
}

/// Projected red-black SOR for the discrete obstacle problem
/// `psi <= phi`, `Delta_{s,theta} psi >= 0`, with equality off contact.
pub fn sor_envelope(phi: &GridField, data: &Dirichlet, params: &SorParams) -> Result<EnvelopeResult> {
    let d = phi.domain();
    let (nr, nt, ds, dt) = polar_shape(d)?;
    if nt % 2 != 0 {
        return Err(Error::InvalidArgument(format!(
            "red-black ordering needs an even number of angles, got {nt}"
        )));
    }
    if data.inner.len() != nt || data.outer.len() != nt {
        return Err(Error::DomainMismatch(format!(
            "boundary data has {} / {} values for {nt} angles",
            data.inner.len(),
            data.outer.len()
        )));
    }
    if !(params.omega > 0.0 && params.omega < 2.0) {
        return Err(Error::InvalidArgument(format!(
            "relaxation factor {} outside (0, 2)",
            params.omega
        )));
    }
    let obstacle = phi.values();
    let mut psi = obstacle.to_vec();
    for j in 0..nt {
        for (i0, val) in [(0, data.inner[j]), (nr - 1, data.outer[j])] {
            let idx = i0 * nt + j;
            if val > obstacle[idx] + 1e-12 * obstacle[idx].abs().max(1.0) {
                return Err(Error::BoundaryAboveObstacle(idx));
            }
            psi[idx] = val.min(obstacle[idx]);
        }
    }

    let a = dt * dt / (2.0 * (ds * ds + dt * dt));
    let b = ds * ds / (2.0 * (ds * ds + dt * dt));
    let avg = |p: &[f64], ir: usize, it: usize| {
        let up = (it + 1) % nt;
        let dn = (it + nt - 1) % nt;
        a * (p[(ir - 1) * nt + it] + p[(ir + 1) * nt + it])
            + b * (p[ir * nt + up] + p[ir * nt + dn])
    };
    let tol = params.tol_rel * phi.max_abs().max(1.0);
    let omega = params.omega;
    let mut history = Vec::new();
    let mut sweeps = 0;
    let mut last = f64::INFINITY;
    while sweeps < params.max_sweeps {
        let mut change: f64 = 0.0;
        for colour in 0..2 {
            let read = psi.clone();
            let c = psi[nt..(nr - 1) * nt]
                .par_chunks_mut(nt)
                .enumerate()
                .map(|(row, out)| {
                    let ir = row + 1;
                    let mut m: f64 = 0.0;
                    for it in ((ir + colour) % 2..nt).step_by(2) {
                        let idx = ir * nt + it;
                        let old = read[idx];
                        let new = (old + omega * (avg(&read, ir, it) - old)).min(obstacle[idx]);
                        m = m.max((new - old).abs());
                        out[it] = new;
                    }
                    m
                })
                .reduce(|| 0.0, f64::max);
            change = change.max(c);
        }
        sweeps += 1;
        last = change;
        if sweeps % 100 == 0 {
            history.push(change);
        }
        if change <= tol {
            break;
        }
    }
    if last > tol {
        return Err(Error::NotConverged {
            iterations: sweeps,
            last_update: last,
            history,
        });
    }

    let mut residual: f64 = 0.0;
    for ir in 1..nr - 1 {
        for it in 0..nt {
            let idx = ir * nt + it;
            let p = psi[idx];
            let av = avg(&psi, ir, it);
            residual = residual
                .max(p - av)
                .max((av - p).min(obstacle[idx] - p).abs());
        }
    }
    let phi_e = GridField::new(d.clone(), psi)?;
    let mut out = EnvelopeResult::assemble(phi, phi_e, EnvelopeMethod::Sor, residual, sweeps, params.eps_d)?;
    out.history = history;
    out.boundary_gap = data.gap;
    Ok(out)
}

/// Envelope of a radial profile `f(r)` over the whole plane: the largest
/// function convex in `s = ln r` with slope in `[0, 2]` lying below
/// `f(e^s)`. Returned at `s_min + i ds` for `i < n`, computed on a grid in
/// `v = 2 s` refined `refine` times and padded to `|v| >= 16`.
pub fn radial_envelope<F>(f: F, s_min: f64, ds: f64, n: usize, refine: usize) -> Result<Vec<f64>>
where
    F: Fn(f64) -> f64 + Sync,
{
    if n < 2 || !(ds > 0.0) || refine == 0 {
        return Err(Error::InvalidArgument("radial grid needs n >= 2, ds > 0, refine >= 1".into()));
    }
    let hv = 2.0 * ds / refine as f64;
    let v_first = 2.0 * s_min;
    let v_last = v_first + 2.0 * ds * (n - 1) as f64;
    let below = ((v_first - (-18.0f64).min(v_first - 2.0)) / hv).ceil() as usize;
    let above = ((18.0f64.max(v_last + 2.0) - v_last) / hv).ceil() as usize;
    let count = below + refine * (n - 1) + above + 1;
    let lo = v_first - below as f64 * hv;
    let hi = lo + (count - 1) as f64 * hv;
    let dom = Domain::v_box_axes(1, [lo, 0.0], [hi, 0.0], [count, 1])?;
    let u = GridField::from_fn(dom, |j| f((0.5 * (lo + j as f64 * hv)).exp()))?;
    let unit = LatticePolytope::segment(0, 1)?;
    let res = toric_equilibrium(&u, &unit, &EnvelopeParams::default())?;
    Ok((0..n).map(|i| res.phi_e.get(below + refine * i)).collect())
}

/// The exact envelope of a rotation-invariant chart weight, by the radial
/// reduction, broadcast over the angles of a polar grid.
pub fn radial_oracle(weight: &WeightSpec, domain: &Domain) -> Result<GridField> {
    let (nr, nt, ds, _) = polar_shape(domain)?;
    if weight.is_toric() || !weight.is_circle_invariant() {
        return Err(Error::InvalidArgument(format!(
            "the radial oracle needs a rotation-invariant chart weight, got {}",
            weight.kind_name()
        )));
    }
    let w = weight.build();
    let s_min = domain.coords(0)[0];
    let radial = radial_envelope(|r| w.value([r, 0.0]), s_min, ds, nr, 4)?;
    let values = (0..nr * nt).map(|i| radial[i / nt]).collect();
    GridField::new(domain.clone(), values)
}

/// Boundary values for [`sor_envelope`]. Rotation-invariant weights get the
/// radial envelope; otherwise the midpoint of the envelopes of the
/// rotation-invariant lower and upper bounds of the weight, capped by the
/// weight, with their largest spread on the two circles reported as `gap`.
pub fn chart_boundary_data(weight: &WeightSpec, domain: &Domain) -> Result<Dirichlet> {
    let (nr, nt, ds, _) = polar_shape(domain)?;
    if weight.is_toric() {
        return Err(Error::WrongDomainKind {
            weight: weight.kind_name(),
            domain: domain.kind_name(),
        });
    }
    let w = weight.build();
    let s_min = domain.coords(0)[0];
    if weight.is_circle_invariant() {
        let rad = radial_envelope(|r| w.value([r, 0.0]), s_min, ds, nr, 4)?;
        return Ok(Dirichlet {
            inner: vec![rad[0]; nt],
            outer: vec![rad[nr - 1]; nt],
            gap: 0.0,
        });
    }
    let lo = radial_envelope(|r| w.radial_sandwich(r).0, s_min, ds, nr, 4)?;
    let hi = radial_envelope(|r| w.radial_sandwich(r).1, s_min, ds, nr, 4)?;
    let mut gap: f64 = 0.0;
    let mut ring = |ir: usize| {
        gap = gap.max(hi[ir] - lo[ir]);
        let mid = 0.5 * (lo[ir] + hi[ir]);
        (0..nt)
            .map(|it| mid.min(w.value(domain.point(ir * nt + it))))
            .collect::<Vec<f64>>()
    };
    let inner = ring(0);
    let outer = ring(nr - 1);
    Ok(Dirichlet { inner, outer, gap })
}
