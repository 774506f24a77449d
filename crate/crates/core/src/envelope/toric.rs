use super::legendre::{legendre_transform_1d, lower_hull};
use super::{EnvelopeMethod, EnvelopeResult};
use crate::error::{Error, Result};
use crate::geometry::{line_first, Domain, GridField, LatticePolytope};

#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeParams {
    /// Dual points per primal slope step `diam(P) / (nodes - 1)`.
    pub dual_factor: f64,
    /// Allowed distance of box-edge gradients from the polytope boundary;
    /// `None` means `0.01 diam(P)`.
    pub slope_tol: Option<f64>,
    /// Contact threshold; `None` uses [`super::default_eps_d`].
    pub eps_d: Option<f64>,
}

impl Default for EnvelopeParams {
    fn default() -> Self {
        Self {
            dual_factor: 4.0,
            slope_tol: None,
            eps_d: None,
        }
    }
}

/// `phi_e = max_{p in P} <p, v> - u*(p)` on the nodes of a `v`-box.
///
/// In one dimension the dual grid is uniform with spacing `1/m` and
/// augmented by the hull slopes of the samples, which makes the result the
/// exact slope-constrained lower hull. In two dimensions the transforms are
/// taken axis by axis on the lattice `(Z/m)^2 cap P`.
pub fn toric_equilibrium(
    u: &GridField,
    polytope: &LatticePolytope,
    params: &EnvelopeParams,
) -> Result<EnvelopeResult> {
    let d = u.domain();
    match d {
        Domain::VBox { dim, .. } if *dim == polytope.dim() => {}
        Domain::VBox { .. } => {
            return Err(Error::DomainMismatch(format!(
                "{}-dimensional polytope on a {}-dimensional box",
                polytope.dim(),
                d.dim()
            )))
        }
        _ => {
            return Err(Error::WrongDomainKind {
                weight: "toric envelope",
                domain: d.kind_name(),
            })
        }
    }
    let [n0, n1] = d.counts();
    let found = if d.dim() == 2 { n0.min(n1) } else { n0 };
    if found < 3 {
        return Err(Error::GridTooSmall { needed: 3, found });
    }
    if !(params.dual_factor >= 1.0) {
        return Err(Error::InvalidArgument("dual_factor must be at least 1".into()));
    }
    let diam = polytope.diameter();
    let tol = params.slope_tol.unwrap_or(0.01 * diam);
    check_box_slopes(u, polytope, tol)?;

    let n_max = n0.max(n1);
    let m = (params.dual_factor * (n_max - 1) as f64 / diam).ceil().max(1.0) as i64;
    let values = if d.dim() == 1 {
        envelope_1d(u, polytope, m)?
    } else {
        envelope_2d(u, polytope, m)
    };
    let phi_e = GridField::new(d.clone(), values)?;
    let residual = phi_e
        .values()
        .iter()
        .zip(u.values())
        .map(|(e, p)| (e - p).max(0.0))
        .fold(0.0, f64::max);
    EnvelopeResult::assemble(u, phi_e, EnvelopeMethod::Biconjugate, residual, 0, params.eps_d)
}

fn check_box_slopes(u: &GridField, polytope: &LatticePolytope, tol: f64) -> Result<()> {
    let d = u.domain();
    let vals = u.values();
    let [n0, n1] = d.counts();
    let [h0, h1] = d.spacing();
    if d.dim() == 1 {
        let (lo, hi) = polytope.bounding_box();
        let left = line_first(|j| vals[j], 0, n0, h0);
        let right = line_first(|j| vals[j], n0 - 1, n0, h0);
        if left - lo[0] as f64 > tol {
            return Err(Error::BoxTooNarrow(format!(
                "slope {left:.6} at the left edge exceeds {} by more than {tol:.3e}",
                lo[0]
            )));
        }
        if hi[0] as f64 - right > tol {
            return Err(Error::BoxTooNarrow(format!(
                "slope {right:.6} at the right edge is below {} by more than {tol:.3e}",
                hi[0]
            )));
        }
        return Ok(());
    }
    for i in 0..d.len() {
        if !d.is_boundary(i) {
            continue;
        }
        let (i0, i1) = d.split_index(i);
        let g = [
            line_first(|j| vals[j * n1 + i1], i0, n0, h0),
            line_first(|j| vals[i0 * n1 + j], i1, n1, h1),
        ];
        let depth = polytope.signed_boundary_distance(g);
        if depth > tol {
            let v = d.coords(i);
            return Err(Error::BoxTooNarrow(format!(
                "gradient ({:.4}, {:.4}) at v = ({:.3}, {:.3}) lies {depth:.3e} inside the polytope",
                g[0], g[1], v[0], v[1]
            )));
        }
    }
    Ok(())
}

fn envelope_1d(u: &GridField, polytope: &LatticePolytope, m: i64) -> Result<Vec<f64>> {
    let d = u.domain();
    let vs: Vec<f64> = (0..d.len()).map(|i| d.coords(i)[0]).collect();
    let ys = u.values();
    let (lo, hi) = polytope.bounding_box();
    let (a, b) = (lo[0] as f64, hi[0] as f64);
    let mut ps: Vec<f64> = (m * lo[0]..=m * hi[0]).map(|i| i as f64 / m as f64).collect();
    let hull = lower_hull(&vs, ys)?;
    for w in hull.windows(2) {
        let s = (ys[w[1]] - ys[w[0]]) / (vs[w[1]] - vs[w[0]]);
        if s > a && s < b {
            ps.push(s);
        }
    }
    ps.sort_by(f64::total_cmp);
    ps.dedup();
    let conj = legendre_transform_1d(&vs, ys, &ps);
    Ok(legendre_transform_1d(&ps, &conj, &vs))
}

fn envelope_2d(u: &GridField, polytope: &LatticePolytope, m: i64) -> Vec<f64> {
    let d = u.domain();
    let [n0, n1] = d.counts();
    let v0: Vec<f64> = (0..n0).map(|i| d.coords(d.index(i, 0))[0]).collect();
    let v1: Vec<f64> = (0..n1).map(|j| d.coords(d.index(0, j))[1]).collect();
    let (lo, hi) = polytope.bounding_box();
    let q0: Vec<i64> = (m * lo[0]..=m * hi[0]).collect();
    let q1: Vec<i64> = (m * lo[1]..=m * hi[1]).collect();
    let p0: Vec<f64> = q0.iter().map(|&i| i as f64 / m as f64).collect();
    let p1: Vec<f64> = q1.iter().map(|&j| j as f64 / m as f64).collect();
    let (m0, m1) = (p0.len(), p1.len());
    let vals = u.values();

    // g[i0][j] = max_{v1} p1_j v1 - u(v0_i0, v1)
    let g: Vec<Vec<f64>> = (0..n0)
        .map(|i0| legendre_transform_1d(&v1, &vals[i0 * n1..(i0 + 1) * n1], &p1))
        .collect();
    // u*(p0_i, p1_j) = max_{v0} p0_i v0 + g[.][j], +inf outside P
    let mut conj = vec![f64::INFINITY; m0 * m1];
    for j in 0..m1 {
        let col: Vec<f64> = (0..n0).map(|i0| -g[i0][j]).collect();
        let t = legendre_transform_1d(&v0, &col, &p0);
        for i in 0..m0 {
            if polytope.dilate_contains([q0[i], q1[j]], m) {
                conj[i * m1 + j] = t[i];
            }
        }
    }
    // h[i][i1] = max_{p1} p1 v1 - u*(p0_i, p1)
    let h: Vec<Vec<f64>> = (0..m0)
        .map(|i| legendre_transform_1d(&p1, &conj[i * m1..(i + 1) * m1], &v1))
        .collect();
    // phi_e(v0, v1) = max_{p0} p0 v0 + h[.][i1]
    let mut out = vec![0.0; n0 * n1];
    for i1 in 0..n1 {
        let col: Vec<f64> = (0..m0).map(|i| -h[i][i1]).collect();
        let t = legendre_transform_1d(&p0, &col, &v0);
        for i0 in 0..n0 {
            out[i0 * n1 + i1] = t[i0];
        }
    }
    out
}
