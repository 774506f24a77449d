use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{Domain, GridField};

fn check_increasing(xs: &[f64]) -> Result<()> {
    for i in 1..xs.len() {
        if xs[i] == xs[i - 1] {
            return Err(Error::DuplicateAbscissa(i));
        }
        if !(xs[i] > xs[i - 1]) {
            return Err(Error::NotIncreasing(i));
        }
    }
    Ok(())
}

/// Indices of the lower convex hull of `(xs[i], ys[i])`, left to right.
/// Collinear interior points are dropped; both end points are always kept.
pub fn lower_hull(xs: &[f64], ys: &[f64]) -> Result<Vec<usize>> {
    if xs.len() != ys.len() {
        return Err(Error::InvalidArgument("abscissae and values differ in length".into()));
    }
    check_increasing(xs)?;
    let mut hull: Vec<usize> = Vec::with_capacity(xs.len());
    for i in 0..xs.len() {
        while hull.len() >= 2 {
            let a = hull[hull.len() - 2];
            let b = hull[hull.len() - 1];
            // drop b unless it lies strictly below the chord a -> i
            let cross = (xs[b] - xs[a]) * (ys[i] - ys[a]) - (ys[b] - ys[a]) * (xs[i] - xs[a]);
            if cross <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(i);
    }
    Ok(hull)
}

/// The lower convex envelope of the samples, evaluated at every abscissa.
pub fn convex_envelope_1d(xs: &[f64], ys: &[f64]) -> Result<Vec<f64>> {
    let hull = lower_hull(xs, ys)?;
    let mut out = Vec::with_capacity(xs.len());
    let mut seg = 0;
    for (i, &x) in xs.iter().enumerate() {
        while seg + 1 < hull.len() && hull[seg + 1] < i {
            seg += 1;
        }
        if hull.len() == 1 || hull[seg] == i {
            out.push(ys[i]);
            continue;
        }
        let (a, b) = (hull[seg], hull[seg + 1]);
        let t = (x - xs[a]) / (xs[b] - xs[a]);
        out.push(ys[a] + t * (ys[b] - ys[a]));
    }
    Ok(out)
}

/// `max_i p x_i - y_i` for every `p` in the ascending list `ps`.
///
/// Entries with non-finite `y` are ignored; the result is `-inf` when none
/// remain. Linear time: the maximiser walks the lower hull of the samples.
pub fn legendre_transform_1d(xs: &[f64], ys: &[f64], ps: &[f64]) -> Vec<f64> {
    let (fx, fy): (Vec<f64>, Vec<f64>) = xs
        .iter()
        .zip(ys)
        .filter(|(_, y)| y.is_finite())
        .map(|(x, y)| (*x, *y))
        .unzip();
    if fx.is_empty() {
        return vec![f64::NEG_INFINITY; ps.len()];
    }
    let hull = lower_hull(&fx, &fy).expect("abscissae must be strictly increasing");
    let mut j = 0;
    ps.iter()
        .map(|&p| {
            let val = |h: usize| p * fx[hull[h]] - fy[hull[h]];
            while j + 1 < hull.len() && val(j + 1) >= val(j) {
                j += 1;
            }
            val(j)
        })
        .collect()
}

/// `u*(p) = max over nodes of <p, v> - u(v)` at each dual point, by direct
/// maximisation over every node.
pub fn legendre_conjugate(u: &GridField, dual: &[[f64; 2]]) -> Result<Vec<f64>> {
    let d = u.domain();
    if !matches!(d, Domain::VBox { .. }) {
        return Err(Error::WrongDomainKind {
            weight: "Legendre transform",
            domain: d.kind_name(),
        });
    }
    let pts: Vec<[f64; 2]> = (0..d.len()).map(|i| d.coords(i)).collect();
    let vals = u.values();
    Ok(dual
        .par_iter()
        .map(|p| {
            pts.iter()
                .zip(vals)
                .map(|(v, y)| p[0] * v[0] + p[1] * v[1] - y)
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hull_of_convex_samples_keeps_everything() {
        let xs: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x * x).collect();
        assert_eq!(lower_hull(&xs, &ys).unwrap().len(), 10);
        assert_eq!(convex_envelope_1d(&xs, &ys).unwrap(), ys);
    }

    #[test]
    fn collinear_points_are_dropped() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys = [0.0, 1.0, 2.0, 3.0];
        assert_eq!(lower_hull(&xs, &ys).unwrap(), vec![0, 3]);
    }

    #[test]
    fn two_points_give_the_chord() {
        let e = convex_envelope_1d(&[0.0, 2.0], &[1.0, 3.0]).unwrap();
        assert_eq!(e, vec![1.0, 3.0]);
    }

    #[test]
    fn bad_abscissae() {
        assert_eq!(lower_hull(&[0.0, 1.0, 1.0], &[0.0; 3]), Err(Error::DuplicateAbscissa(2)));
        assert_eq!(lower_hull(&[0.0, 2.0, 1.0], &[0.0; 3]), Err(Error::NotIncreasing(2)));
    }

    #[test]
    fn transform_matches_brute_force() {
        let xs: Vec<f64> = (0..40).map(|i| -2.0 + 0.1 * i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| (x * 3.0).sin() + x * x).collect();
        let ps: Vec<f64> = (0..25).map(|i| -4.0 + 0.33 * i as f64).collect();
        let fast = legendre_transform_1d(&xs, &ys, &ps);
        for (p, f) in ps.iter().zip(&fast) {
            let brute = xs
                .iter()
                .zip(&ys)
                .map(|(x, y)| p * x - y)
                .fold(f64::NEG_INFINITY, f64::max);
            assert!((f - brute).abs() < 1e-14);
        }
    }

    #[test]
    fn transform_skips_infinite_values() {
        let out = legendre_transform_1d(&[0.0, 1.0], &[f64::INFINITY, 2.0], &[0.5]);
        assert_eq!(out, vec![-1.5]);
        let none = legendre_transform_1d(&[0.0], &[f64::INFINITY], &[0.5]);
        assert_eq!(none, vec![f64::NEG_INFINITY]);
    }
}
