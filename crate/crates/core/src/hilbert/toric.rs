use rayon::prelude::*;

use super::quadrature::{breakpoints, Rule1d};
use super::{Gram, GramEntries, HilbertSpaceSpec, QuadratureReport};
use crate::error::{Error, Result};
use crate::geometry::{Exponent, ToricPotential, Weight};
use crate::numeric::log_sum_exp_iter;

pub(crate) fn dot(a: &Exponent, x: [f64; 2]) -> f64 {
    a[0] as f64 * x[0] + a[1] as f64 * x[1]
}

/// Quadrature nodes in `v` with `ln` of the reference measure weight and
/// the weight value at each node.
struct Nodes {
    points: Vec<[f64; 2]>,
    ln_measure: Vec<f64>,
    phi: Vec<f64>,
}

/// Panels widen geometrically (up to 16x) once `|v|` passes the bump
/// extent, where the integrands are dominated by their exponential tails.
fn axis_rule(weight: &Weight, axis: usize, v: f64, panel: f64) -> Rule1d {
    let extra = weight.spec().bumps().iter().flat_map(|b| {
        let c = b.center[axis];
        [c - b.radius, c, c + b.radius]
    });
    let v0 = weight.spec().bump_extent() + 3.0;
    Rule1d::graded(&breakpoints(-v, v, extra), panel, |x| {
        (0.5 * (x.abs() - v0)).exp().clamp(1.0, 16.0)
    })
}

fn nodes(weight: &Weight, v: f64, panel: f64) -> Nodes {
    if weight.dim() == 2 {
        return moment_nodes(weight, (1.0 / panel).ceil() as usize);
    }
    let r0 = axis_rule(weight, 0, v, panel);
    let pts: Vec<[f64; 2]> = r0.nodes.iter().map(|x| [*x, 0.0]).collect();
    let (ln_measure, phi): (Vec<f64>, Vec<f64>) = pts
        .par_iter()
        .zip(r0.weights.par_iter())
        .map(|(p, w)| (w.ln() + weight.reference_density(*p).ln(), weight.value(*p)))
        .unzip();
    Nodes {
        points: pts,
        ln_measure,
        phi,
    }
}

/// Solves `grad phi_P(v) = t` by damped Newton iteration.
fn inverse_moment(pot: &ToricPotential, t: [f64; 2]) -> [f64; 2] {
    let mut v = [0.0, 0.0];
    let f = |v: [f64; 2]| pot.value(v) - t[0] * v[0] - t[1] * v[1];
    let mut fv = f(v);
    for _ in 0..500 {
        let g = pot.gradient(v);
        let g = [g[0] - t[0], g[1] - t[1]];
        let h = pot.hessian(v);
        let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
        let step = [
            (h[1][1] * g[0] - h[0][1] * g[1]) / det,
            (h[0][0] * g[1] - h[1][0] * g[0]) / det,
        ];
        let decrement = g[0] * step[0] + g[1] * step[1];
        if !(decrement > 1e-26) {
            break;
        }
        if decrement < 1e-6 {
            v = [v[0] - step[0], v[1] - step[1]];
            fv = f(v);
            continue;
        }
        let mut a = 1.0;
        while a > 1e-10 {
            let trial = [v[0] - a * step[0], v[1] - a * step[1]];
            let ft = f(trial);
            if ft <= fv - 0.25 * a * decrement {
                v = trial;
                fv = ft;
                break;
            }
            a *= 0.5;
        }
        if a <= 1e-10 {
            break;
        }
    }
    v
}

/// Nodes for `n = 2`: the moment map `v -> grad phi_P(v)` pushes
/// `det Hess phi_P dv` forward to Lebesgue measure on `P`, so the rule is a
/// collapsed Gauss-Legendre rule on a fan triangulation of `P` with `p x p`
/// panels per triangle, mapped back through the inverse moment map.
fn moment_nodes(weight: &Weight, p: usize) -> Nodes {
    let poly = weight.spec().polytope().expect("toric weight");
    let pot = ToricPotential::new(poly);
    let vs: Vec<[f64; 2]> = poly.vertices().iter().map(|a| [a[0] as f64, a[1] as f64]).collect();
    let base = Rule1d::composite(&[0.0, 1.0], 1.0 / p as f64);
    let mut ts = Vec::new();
    let mut lw = Vec::new();
    for i in 1..vs.len() - 1 {
        let (a, b, c) = (vs[0], vs[i], vs[i + 1]);
        let e1 = [b[0] - a[0], b[1] - a[1]];
        let e2 = [c[0] - b[0], c[1] - b[1]];
        let jac = (e1[0] * e2[1] - e1[1] * e2[0]).abs();
        for (u, wu) in base.nodes.iter().zip(&base.weights) {
            for (s, ws) in base.nodes.iter().zip(&base.weights) {
                ts.push([
                    a[0] + u * (e1[0] + s * e2[0]),
                    a[1] + u * (e1[1] + s * e2[1]),
                ]);
                lw.push((wu * ws * u * jac).ln());
            }
        }
    }
    let (points, phi): (Vec<[f64; 2]>, Vec<f64>) = ts
        .par_iter()
        .map(|t| {
            let v = inverse_moment(&pot, *t);
            (v, weight.value(v))
        })
        .unzip();
    Nodes {
        points,
        ln_measure: lw,
        phi,
    }
}

fn log_gram_on(spec: &HilbertSpaceSpec, n: &Nodes) -> Vec<f64> {
    let k = spec.k as f64;
    let base: Vec<f64> = n
        .ln_measure
        .iter()
        .zip(&n.phi)
        .map(|(m, p)| m - k * p)
        .collect();
    spec.basis
        .par_iter()
        .map(|a| {
            log_sum_exp_iter(
                n.points
                    .iter()
                    .zip(&base)
                    .map(|(p, b)| b + dot(a, *p)),
            )
        })
        .collect()
}

fn max_rel_change(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            if x == y {
                0.0
            } else {
                (x - y).exp_m1().abs()
            }
        })
        .fold(0.0, f64::max)
}

pub(crate) fn gram(spec: &HilbertSpaceSpec) -> Result<Gram> {
    let weight = spec.weight.build();
    let q = &spec.quadrature;
    let v = spec.half_width();
    if !(v > 0.0) {
        return Err(Error::InvalidArgument("toric half-width must be positive".into()));
    }
    let mut panel = q.panel_width.unwrap_or(1.0);
    let mut prev = log_gram_on(spec, &nodes(&weight, v, panel));
    let mut achieved = f64::INFINITY;
    for d in 1..=q.max_doublings {
        panel *= 0.5;
        let n = nodes(&weight, v, panel);
        let cur = log_gram_on(spec, &n);
        achieved = max_rel_change(&cur, &prev);
        if achieved <= q.tol {
            let measure_mass = n.ln_measure.iter().map(|l| l.exp()).sum();
            return Ok(Gram {
                entries: GramEntries::LogDiagonal(cur),
                quadrature: QuadratureReport {
                    achieved,
                    doublings: d,
                    panel_width: panel,
                    half_width: if spec.weight.dim() == 1 { v } else { 0.0 },
                    n_theta: 0,
                    nodes: n.points.len(),
                    measure_mass,
                },
            });
        }
        prev = cur;
    }
    Err(Error::QuadratureNotConverged {
        achieved,
        requested: q.tol,
    })
}

/// `ln G_alpha` under the rule with half the converged panel width.
pub(crate) fn refined_log_gram(spec: &HilbertSpaceSpec, q: &QuadratureReport) -> Result<Vec<f64>> {
    let weight = spec.weight.build();
    Ok(log_gram_on(spec, &nodes(&weight, q.half_width, 0.5 * q.panel_width)))
}

pub(crate) fn log_bergman(
    spec: &HilbertSpaceSpec,
    weight: &Weight,
    log_gram: &[f64],
    x: [f64; 2],
) -> f64 {
    if spec.basis.is_empty() {
        return f64::NEG_INFINITY;
    }
    let s = log_sum_exp_iter(spec.basis.iter().zip(log_gram).map(|(a, g)| dot(a, x) - g));
    s - spec.k as f64 * weight.value(x)
}

pub(crate) fn log_kernel_norm(
    spec: &HilbertSpaceSpec,
    weight: &Weight,
    log_gram: &[f64],
    x: [f64; 2],
    y: [f64; 2],
) -> f64 {
    if spec.basis.is_empty() {
        return f64::NEG_INFINITY;
    }
    let mid = [0.5 * (x[0] + y[0]), 0.5 * (x[1] + y[1])];
    let s = log_sum_exp_iter(spec.basis.iter().zip(log_gram).map(|(a, g)| dot(a, mid) - g));
    let k = spec.k as f64;
    2.0 * s - k * weight.value(x) - k * weight.value(y)
}

/// `|int |K(x, y)|^2 dmu(y) / B_k(x) - 1|` with the torus average done
/// exactly and the `v`-integral on the refined rule.
pub(crate) fn reproducing_defect(
    spec: &HilbertSpaceSpec,
    log_gram: &[f64],
    fine: &[f64],
    x: [f64; 2],
) -> f64 {
    if spec.basis.is_empty() {
        return 0.0;
    }
    let terms = || spec.basis.iter().zip(log_gram).map(|(a, g)| (dot(a, x), *g));
    let num = log_sum_exp_iter(terms().zip(fine).map(|((d, g), f)| d - 2.0 * g + f));
    let den = log_sum_exp_iter(terms().map(|(d, g)| d - g));
    (num - den).exp_m1().abs()
}
