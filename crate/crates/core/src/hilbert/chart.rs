use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use super::quadrature::{breakpoints, Rule1d};
use super::{BergmanModel, Gram, GramEntries, HilbertSpaceSpec, QuadratureReport};
use crate::error::{Error, Result};
use crate::geometry::{Exponent, Weight};
use crate::numeric::ln_beta_int;

/// `1 / sqrt(Beta(j + 1, k - j + 1))`, the inverse Fubini-Study norms.
pub(crate) fn fs_prescale(k: u32, basis: &[Exponent]) -> Vec<f64> {
    basis
        .iter()
        .map(|a| {
            let j = a[0] as u64;
            (-0.5 * ln_beta_int(j + 1, k as u64 - j + 1)).exp()
        })
        .collect()
}

fn t_of_r(r: f64) -> f64 {
    let r2 = r * r;
    r2 / (1.0 + r2)
}

fn radial_rule(weight: &Weight, panel: f64) -> Rule1d {
    let extra = weight.spec().bumps().iter().flat_map(|b| {
        let c = b.center[0].hypot(b.center[1]);
        [t_of_r((c - b.radius).max(0.0)), t_of_r(c), t_of_r(c + b.radius)]
    });
    Rule1d::composite(&breakpoints(0.0, 1.0, extra), panel)
}

fn zeta(t: f64, theta: f64) -> [f64; 2] {
    let r = (t / (1.0 - t)).sqrt();
    [r * theta.cos(), r * theta.sin()]
}

fn bump_sum(weight: &Weight, z: [f64; 2]) -> f64 {
    weight.spec().bumps().iter().map(|b| b.value(z, 2)).sum()
}

fn gram_on(spec: &HilbertSpaceSpec, weight: &Weight, panel: f64, n_theta: usize) -> (DMatrix<Complex64>, usize) {
    let rule = radial_rule(weight, panel);
    let theta = Rule1d::periodic(n_theta);
    let n = spec.basis.len();
    let k = spec.k as f64;
    let rings: Vec<DMatrix<Complex64>> = rule
        .nodes
        .par_iter()
        .zip(rule.weights.par_iter())
        .map(|(&t, &wt)| {
            let (lt, l1t) = (t.ln(), (-t).ln_1p());
            let mut a = DMatrix::<Complex64>::zeros(n_theta, n);
            for (m, (&th, &wth)) in theta.nodes.iter().zip(&theta.weights).enumerate() {
                let chi = bump_sum(weight, zeta(t, th));
                let lw = (wt * wth).ln();
                for (c, e) in spec.basis.iter().enumerate() {
                    let j = e[0] as f64;
                    let mag = (0.5 * (j * lt + (k - j) * l1t - k * chi + lw)).exp();
                    a[(m, c)] = Complex64::from_polar(mag, j * th);
                }
            }
            a.transpose() * a.conjugate()
        })
        .collect();
    let mut g = DMatrix::<Complex64>::zeros(n, n);
    for r in &rings {
        g += r;
    }
    ((&g + g.adjoint()) * Complex64::new(0.5, 0.0), rule.len() * n_theta)
}

fn max_scaled_diff(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    let n = a.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let s = (a[(i, i)].re * a[(j, j)].re).sqrt();
            worst = worst.max((a[(i, j)] - b[(i, j)]).norm() / s);
        }
    }
    worst
}

pub(crate) fn gram(spec: &HilbertSpaceSpec) -> Result<Gram> {
    let weight = spec.weight.build();
    let q = &spec.quadrature;
    let mut panel = q.panel_width.unwrap_or(0.125);
    let mut n_theta = spec.n_theta();
    let (mut g, _) = gram_on(spec, &weight, panel, n_theta);
    let mut achieved = f64::INFINITY;
    for d in 1..=q.max_doublings {
        let (gr, _) = gram_on(spec, &weight, 0.5 * panel, n_theta);
        let (ga, _) = gram_on(spec, &weight, panel, 2 * n_theta);
        let er = max_scaled_diff(&gr, &g);
        let ea = max_scaled_diff(&ga, &g);
        achieved = er.max(ea);
        if achieved <= q.tol {
            let nodes = radial_rule(&weight, panel).len() * n_theta;
            return Ok(Gram {
                entries: GramEntries::Dense(g),
                quadrature: QuadratureReport {
                    achieved,
                    doublings: d - 1,
                    panel_width: panel,
                    half_width: 0.0,
                    n_theta,
                    nodes,
                    measure_mass: 1.0,
                },
            });
        }
        if er > q.tol {
            panel *= 0.5;
        }
        if ea > q.tol {
            n_theta *= 2;
        }
        g = gram_on(spec, &weight, panel, n_theta).0;
    }
    Err(Error::QuadratureNotConverged {
        achieved,
        requested: q.tol,
    })
}

/// Prescaled monomials `D_j zeta^j` at `x` as `(u, m)` with values `u * exp(m)`.
pub(crate) fn raw_values(basis: &[Exponent], prescale: &[f64], x: [f64; 2]) -> (DVector<Complex64>, f64) {
    let r = x[0].hypot(x[1]);
    let th = x[1].atan2(x[0]);
    let lr = r.ln();
    let logs: Vec<f64> = basis
        .iter()
        .zip(prescale)
        .map(|(e, d)| if e[0] == 0 { d.ln() } else { d.ln() + e[0] as f64 * lr })
        .collect();
    let m = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let u = DVector::from_iterator(
        basis.len(),
        basis
            .iter()
            .zip(&logs)
            .map(|(e, l)| Complex64::from_polar((l - m).exp(), e[0] as f64 * th)),
    );
    (u, if m.is_finite() { m } else { 0.0 })
}

/// Nodes and weights of the rule one step finer than the converged one.
fn refined_nodes(model: &BergmanModel) -> (Rule1d, Rule1d) {
    let q = model.quadrature();
    (
        radial_rule(model.weight(), 0.5 * q.panel_width),
        Rule1d::periodic(2 * q.n_theta),
    )
}

pub(crate) fn refined_mass(model: &BergmanModel) -> Result<f64> {
    let (rad, th) = refined_nodes(model);
    let rings: Vec<f64> = rad
        .nodes
        .par_iter()
        .zip(rad.weights.par_iter())
        .map(|(&t, &wt)| {
            th.nodes
                .iter()
                .zip(&th.weights)
                .map(|(&a, &wa)| wt * wa * model.bergman_at(zeta(t, a)))
                .sum::<f64>()
        })
        .collect();
    Ok(rings.iter().sum())
}

pub(crate) fn reproducing_residual(model: &BergmanModel, points: &[[f64; 2]]) -> Result<f64> {
    let (rad, th) = refined_nodes(model);
    let xs: Vec<(Vec<Complex64>, f64)> = points
        .iter()
        .map(|&x| {
            let (v, _) = model.weighted_sections(x);
            let n2: f64 = v.iter().map(|c| c.norm_sqr()).sum();
            (v, n2)
        })
        .collect();
    let rings: Vec<Vec<f64>> = rad
        .nodes
        .par_iter()
        .zip(rad.weights.par_iter())
        .map(|(&t, &wt)| {
            let mut acc = vec![0.0; xs.len()];
            for (&a, &wa) in th.nodes.iter().zip(&th.weights) {
                let (vy, sy) = model.weighted_sections(zeta(t, a));
                let scale = wt * wa * (2.0 * sy).exp();
                for (p, (vx, _)) in xs.iter().enumerate() {
                    let kxy: Complex64 = vx.iter().zip(&vy).map(|(a, b)| a * b.conj()).sum();
                    acc[p] += scale * kxy.norm_sqr();
                }
            }
            acc
        })
        .collect();
    let mut worst: f64 = 0.0;
    for (p, (_, n2)) in xs.iter().enumerate() {
        if *n2 == 0.0 {
            continue;
        }
        let integral: f64 = rings.iter().map(|r| r[p]).sum();
        worst = worst.max((integral / n2 - 1.0).abs());
    }
    Ok(worst)
}

/// `int f psi psi^H e^{-k phi} dvol` over the refined rule, summed ring by ring.
pub(crate) fn moment_matrix<F>(model: &BergmanModel, f: F) -> DMatrix<Complex64>
where
    F: Fn([f64; 2]) -> f64 + Sync,
{
    let (rad, th) = refined_nodes(model);
    let n = model.dimension();
    let rings: Vec<DMatrix<Complex64>> = rad
        .nodes
        .par_iter()
        .zip(rad.weights.par_iter())
        .map(|(&t, &wt)| {
            let mut acc = DMatrix::<Complex64>::zeros(n, n);
            for (&a, &wa) in th.nodes.iter().zip(&th.weights) {
                let z = zeta(t, a);
                let fz = f(z);
                if fz == 0.0 {
                    continue;
                }
                let (v, s) = model.weighted_sections(z);
                let w = wt * wa * fz * (2.0 * s).exp();
                let col = DVector::from_vec(v);
                acc += (&col * col.adjoint()) * Complex64::new(w, 0.0);
            }
            acc
        })
        .collect();
    rings
        .into_iter()
        .fold(DMatrix::zeros(n, n), |acc, r| acc + r)
}
