use crate::error::{Error, Result};
use crate::geometry::{Domain, GridField};

#[derive(Debug, Clone, PartialEq)]
pub struct RegularityLevel {
    pub h: f64,
    /// Largest interior `|second difference|` over the axes.
    pub second_max: f64,
    /// Largest difference quotient of the centred first differences.
    pub lipschitz: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegularityReport {
    pub levels: Vec<RegularityLevel>,
    /// Largest second difference of the weight on the finest level.
    pub phi_second_max: f64,
    pub second_ratio: f64,
    pub lipschitz_ratio: f64,
    pub pass: bool,
}

/// Ratio of the largest to the smallest entry.
fn spread(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let hi = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    let lo = xs.fold(f64::INFINITY, f64::min);
    if hi == 0.0 {
        1.0
    } else {
        hi / lo
    }
}

/// Axis lines of a grid: `(axis, stride, length, spacing, periodic)`.
fn axes(d: &Domain) -> Vec<(usize, usize, usize, f64, bool)> {
    let [n0, n1] = d.counts();
    let [h0, h1] = d.spacing();
    let mut out = vec![(0, n1, n0, h0, false)];
    if d.dim() == 2 {
        out.push((1, 1, n1, h1, matches!(d, Domain::Polar { .. })));
    }
    out
}

/// `(max |u''|, max |(u'_{j+1} - u'_{j-1}) / 2h|)` over nodes at least two
/// steps from any non-periodic edge.
fn measure(u: &GridField) -> (f64, f64) {
    let d = u.domain();
    let v = u.values();
    let [n0, n1] = d.counts();
    let mut second: f64 = 0.0;
    let mut lip: f64 = 0.0;
    for (axis, stride, n, h, periodic) in axes(d) {
        for i in 0..d.len() {
            let (i0, i1) = d.split_index(i);
            let pos = if axis == 1 { i1 } else { i0 };
            let base = i - pos * stride;
            let at = |k: isize| -> Option<f64> {
                let j = pos as isize + k;
                let j = if periodic {
                    j.rem_euclid(n as isize)
                } else if j < 0 || j >= n as isize {
                    return None;
                } else {
                    j
                };
                Some(v[base + j as usize * stride])
            };
            let two_d_edge = d.dim() == 2
                && !matches!(d, Domain::Polar { .. })
                && (i0 < 2 || i0 + 2 >= n0 || i1 < 2 || i1 + 2 >= n1);
            let polar_edge = matches!(d, Domain::Polar { .. }) && (i0 < 2 || i0 + 2 >= n0);
            if two_d_edge || polar_edge {
                continue;
            }
            if let (Some(m2), Some(m1), Some(c), Some(p1), Some(p2)) =
                (at(-2), at(-1), at(0), at(1), at(2))
            {
                second = second.max(((m1 - 2.0 * c + p1) / (h * h)).abs());
                let g_up = (p2 - c) / (2.0 * h);
                let g_dn = (c - m2) / (2.0 * h);
                lip = lip.max(((g_up - g_dn) / (2.0 * h)).abs());
            }
        }
    }
    (second, lip)
}

/// Checks that second differences of the envelope stay bounded under grid
/// refinement. `levels` holds `(phi, phi_e)` on successively refined grids
/// (coarsest first). The probe passes when both measures vary by at most a
/// factor `1.2` across levels and the second differences stay below those
/// of `phi` plus `tol`.
pub fn regularity_probe(levels: &[(&GridField, &GridField)], tol: f64) -> Result<RegularityReport> {
    if levels.len() < 2 {
        return Err(Error::InvalidArgument("the probe needs at least two grid levels".into()));
    }
    let mut out = Vec::with_capacity(levels.len());
    for (phi, phi_e) in levels {
        phi.check_same_domain(phi_e)?;
        let [n0, n1] = phi.domain().counts();
        let short = if phi.domain().dim() == 2 { n0.min(n1) } else { n0 };
        if short < 5 {
            return Err(Error::GridTooSmall { needed: 5, found: short });
        }
        let (second_max, lipschitz) = measure(phi_e);
        out.push(RegularityLevel {
            h: phi.domain().max_spacing(),
            second_max,
            lipschitz,
        });
    }
    let phi_second_max = measure(levels[levels.len() - 1].0).0;
    let second_ratio = spread(out.iter().map(|l| l.second_max));
    let lipschitz_ratio = spread(out.iter().map(|l| l.lipschitz));
    let worst = out.iter().map(|l| l.second_max).fold(0.0, f64::max);
    let pass = second_ratio <= 1.2 && lipschitz_ratio <= 1.2 && worst <= phi_second_max + tol;
    Ok(RegularityReport {
        levels: out,
        phi_second_max,
        second_ratio,
        lipschitz_ratio,
        pass,
    })
}
