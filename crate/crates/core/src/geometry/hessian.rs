//! Finite-difference second derivatives on grids.
//!
//! Interior nodes use centred differences. Boundary nodes use second-order
//! one-sided stencils but are flagged untrusted so that downstream probes can
//! ignore them.

use super::grid::{Domain, GridField};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct HessianField {
    /// `u''` in one dimension, `det Hess u` on 2-D boxes, and the Laplacian
    /// in `(s, theta)` on polar grids.
    pub second: GridField,
    /// Smallest Hessian eigenvalue (2-D boxes only).
    pub eig_min: Option<GridField>,
    /// Largest Hessian eigenvalue (2-D boxes only).
    pub eig_max: Option<GridField>,
    pub trusted: Vec<bool>,
}

/// Second difference along one line of samples with spacing `h`.
/// Returns the value at position `j` of a line of length `n`, reading
/// samples through `at`.
pub(crate) fn line_second<F: Fn(usize) -> f64>(at: F, j: usize, n: usize, h: f64) -> f64 {
    let h2 = h * h;
    if j > 0 && j + 1 < n {
        (at(j - 1) - 2.0 * at(j) + at(j + 1)) / h2
    } else if n >= 4 {
        // 2u0 - 5u1 + 4u2 - u3, mirrored at the far end
        if j == 0 {
            (2.0 * at(0) - 5.0 * at(1) + 4.0 * at(2) - at(3)) / h2
        } else {
            (2.0 * at(n - 1) - 5.0 * at(n - 2) + 4.0 * at(n - 3) - at(n - 4)) / h2
        }
    } else if j == 0 {
        (at(0) - 2.0 * at(1) + at(2)) / h2
    } else {
        (at(n - 3) - 2.0 * at(n - 2) + at(n - 1)) / h2
    }
}

/// First difference at position `j` (centred inside, one-sided at the ends).
pub(crate) fn line_first<F: Fn(usize) -> f64>(at: F, j: usize, n: usize, h: f64) -> f64 {
    if j > 0 && j + 1 < n {
        (at(j + 1) - at(j - 1)) / (2.0 * h)
    } else if j == 0 {
        (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * h)
    } else {
        (3.0 * at(n - 1) - 4.0 * at(n - 2) + at(n - 3)) / (2.0 * h)
    }
}

/// Second differences along every axis of a 2-D box plus the mixed term.
/// Returns `(d00, d11, d01)` at node `i`.
pub(crate) fn box_second_2d(u: &[f64], domain: &Domain, i: usize) -> (f64, f64, f64) {
    let [n0, n1] = domain.counts();
    let [h0, h1] = domain.spacing();
    let (i0, i1) = domain.split_index(i);
    let d00 = line_second(|j| u[j * n1 + i1], i0, n0, h0);
    let d11 = line_second(|j| u[i0 * n1 + j], i1, n1, h1);
    // mixed derivative: difference of first differences, one-sided at edges
    let d01 = line_first(
        |j| line_first(|l| u[j * n1 + l], i1, n1, h1),
        i0,
        n0,
        h0,
    );
    (d00, d11, d01)
}

pub fn hessian_field(u: &GridField) -> Result<HessianField> {
    let domain = u.domain().clone();
    let [n0, n1] = domain.counts();
    let needs_two = matches!(domain, Domain::VBox { dim: 2, .. });
    let found = if needs_two { n0.min(n1) } else { n0 };
    if found < 3 {
        return Err(Error::GridTooSmall { needed: 3, found });
    }
    let vals = u.values();
    let trusted: Vec<bool> = (0..domain.len()).map(|i| !domain.is_boundary(i)).collect();

    match &domain {
        Domain::VBox { dim: 1, spacing, .. } => {
            let h = spacing[0];
            let second = GridField::from_fn(domain.clone(), |i| line_second(|j| vals[j], i, n0, h))?;
            Ok(HessianField {
                second,
                eig_min: None,
                eig_max: None,
                trusted,
            })
        }
        Domain::VBox { .. } => {
            let parts: Vec<(f64, f64, f64)> =
                (0..domain.len()).map(|i| box_second_2d(vals, &domain, i)).collect();
            let det = parts.iter().map(|(a, b, c)| a * b - c * c).collect();
            let (lo, hi): (Vec<f64>, Vec<f64>) = parts
                .iter()
                .map(|(a, b, c)| {
                    let tr = a + b;
                    let disc = ((a - b) * (a - b) + 4.0 * c * c).sqrt();
                    (0.5 * (tr - disc), 0.5 * (tr + disc))
                })
                .unzip();
            Ok(HessianField {
                second: GridField::new(domain.clone(), det)?,
                eig_min: Some(GridField::new(domain.clone(), lo)?),
                eig_max: Some(GridField::new(domain, hi)?),
                trusted,
            })
        }
        Domain::Polar { .. } => {
            let [ds, dt] = domain.spacing();
            let second = GridField::from_fn(domain.clone(), |i| {
                let (ir, it) = domain.split_index(i);
                let radial = line_second(|j| vals[j * n1 + it], ir, n0, ds);
                let prev = vals[ir * n1 + (it + n1 - 1) % n1];
                let next = vals[ir * n1 + (it + 1) % n1];
                radial + (prev - 2.0 * vals[i] + next) / (dt * dt)
            })?;
            Ok(HessianField {
                second,
                eig_min: None,
                eig_max: None,
                trusted,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{eval_weight, LatticePolytope, WeightSpec};

    fn field_1d(h: f64, f: impl Fn(f64) -> f64 + Sync) -> GridField {
        let d = Domain::v_box(1, 2.0, h).unwrap();
        let dc = d.clone();
        GridField::from_fn(d, move |i| f(dc.coords(i)[0])).unwrap()
    }

    #[test]
    fn quadratic_is_exact() {
        let hf = hessian_field(&field_1d(0.1, |v| 0.5 * v * v)).unwrap();
        for (i, &t) in hf.trusted.iter().enumerate() {
            if t {
                assert!((hf.second.get(i) - 1.0).abs() < 1e-10);
            }
        }
        assert!(!hf.trusted[0]);
    }

    #[test]
    fn cubic_is_exact_everywhere() {
        let hf = hessian_field(&field_1d(0.1, |v| v * v * v - v)).unwrap();
        let d = hf.second.domain().clone();
        for i in 0..d.len() {
            let v = d.coords(i)[0];
            assert!((hf.second.get(i) - 6.0 * v).abs() < 1e-9);
        }
    }

    #[test]
    fn second_order_convergence() {
        // the cubic case above is exact, so use v^4 + sin v to see the h^2 rate
        let err = |h: f64| {
            let hf = hessian_field(&field_1d(h, |v| v.powi(4) + v.sin())).unwrap();
            let d = hf.second.domain().clone();
            (0..d.len())
                .map(|i| {
                    let v = d.coords(i)[0];
                    (hf.second.get(i) - (12.0 * v * v - v.sin())).abs()
                })
                .fold(0.0, f64::max)
        };
        let (e1, e2, e3) = (err(0.1), err(0.05), err(0.025));
        assert!(e1 / e2 >= 3.5, "{e1} {e2}");
        assert!(e2 / e3 >= 3.5, "{e2} {e3}");
    }

    #[test]
    fn affine_2d_has_zero_hessian() {
        let d = Domain::v_box(2, 1.0, 0.25).unwrap();
        let dc = d.clone();
        let u = GridField::from_fn(d, move |i| {
            let v = dc.coords(i);
            0.3 * v[0] - 1.7 * v[1] + 2.0
        })
        .unwrap();
        let hf = hessian_field(&u).unwrap();
        assert!(hf.second.max_abs() < 1e-10);
        assert!(hf.eig_min.unwrap().max_abs() < 1e-10);
    }

    #[test]
    fn quadratic_form_2d() {
        let d = Domain::v_box(2, 1.0, 0.25).unwrap();
        let dc = d.clone();
        // u = v0^2 + v0 v1 + 2 v1^2, Hessian [[2, 1], [1, 4]]
        let u = GridField::from_fn(d, move |i| {
            let v = dc.coords(i);
            v[0] * v[0] + v[0] * v[1] + 2.0 * v[1] * v[1]
        })
        .unwrap();
        let hf = hessian_field(&u).unwrap();
        let eig = 3.0 - 2f64.sqrt();
        for i in 0..u.len() {
            assert!((hf.second.get(i) - 7.0).abs() < 1e-9);
            assert!((hf.eig_min.as_ref().unwrap().get(i) - eig).abs() < 1e-9);
        }
    }

    #[test]
    fn toric_potential_second_derivative() {
        let toric = WeightSpec::ToricPotential(LatticePolytope::segment(0, 1).unwrap());
        let u = eval_weight(&toric, &Domain::v_box(1, 1.0, 1e-3).unwrap()).unwrap();
        let hf = hessian_field(&u).unwrap();
        assert!((hf.second.get(1000) - 0.25).abs() < 1e-6);
    }

    #[test]
    fn polar_laplacian_of_harmonic_and_fs() {
        // ln|zeta| = s is harmonic; ln(1 + r^2) has conformal Laplacian 4 r^2/(1+r^2)^2
        let d = Domain::polar(0.5, 2.0, 81, 64).unwrap();
        let harmonic = GridField::from_fn(d.clone(), |i| d.coords(i)[0]).unwrap();
        let hf = hessian_field(&harmonic).unwrap();
        assert!(hf.second.max_abs() < 1e-9);
        let fs = eval_weight(&WeightSpec::FsChart, &d).unwrap();
        let hf = hessian_field(&fs).unwrap();
        for i in 0..d.len() {
            if hf.trusted[i] {
                let r = d.coords(i)[0].exp();
                let exact = 4.0 * r * r / ((1.0 + r * r) * (1.0 + r * r));
                assert!((hf.second.get(i) - exact).abs() < 1e-4);
            }
        }
    }

    #[test]
    fn too_small_grid() {
        let d = Domain::v_box_axes(1, [0.0, 0.0], [1.0, 0.0], [2, 1]).unwrap();
        let u = GridField::new(d, vec![0.0, 1.0]).unwrap();
        assert_eq!(
            hessian_field(&u).unwrap_err(),
            Error::GridTooSmall { needed: 3, found: 2 }
        );
    }
}
