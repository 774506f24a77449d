use std::num::NonZeroUsize;
use std::sync::OnceLock;

use gauss_quad::legendre::GaussLegendre;

/// Gauss-Legendre order used on every panel.
pub const PANEL_ORDER: usize = 16;

fn reference_rule() -> &'static [(f64, f64)] {
    static RULE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    RULE.get_or_init(|| {
        let gl = GaussLegendre::new(NonZeroUsize::new(PANEL_ORDER).unwrap());
        let mut pairs = gl.as_node_weight_pairs().to_vec();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        pairs
    })
}

/// A one-dimensional quadrature rule.
#[derive(Debug, Clone, PartialEq)]
pub struct Rule1d {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule1d {
    /// Composite Gauss-Legendre rule on `[breaks[0], breaks[last]]`. Every
    /// interval between consecutive breakpoints is split into equal panels
    /// no wider than `panel_width`; breakpoints are never straddled.
    pub fn composite(breaks: &[f64], panel_width: f64) -> Self {
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for seg in breaks.windows(2) {
            let (a, b) = (seg[0], seg[1]);
            if !(b > a) {
                continue;
            }
            let panels = ((b - a) / panel_width).ceil().max(1.0) as usize;
            let w = (b - a) / panels as f64;
            for p in 0..panels {
                let lo = a + p as f64 * w;
                let half = 0.5 * w;
                let mid = lo + half;
                for &(x, wt) in reference_rule() {
                    nodes.push(mid + half * x);
                    weights.push(half * wt);
                }
            }
        }
        Self { nodes, weights }
    }

    /// Composite rule whose panel width near `x` is `panel_width * grade(x)`.
    /// Panels in each segment are stretched uniformly to end on the next
    /// breakpoint. `grade` must be at least one.
    pub fn graded<G: Fn(f64) -> f64>(breaks: &[f64], panel_width: f64, grade: G) -> Self {
        let mut edges = Vec::new();
        for seg in breaks.windows(2) {
            let (a, b) = (seg[0], seg[1]);
            if !(b > a) {
                continue;
            }
            let mut local = vec![a];
            let mut x = a;
            while x < b - 1e-12 * (b - a) {
                let probe = panel_width * grade(x);
                // use the smallest grade the panel can reach
                let near = if x < 0.0 { (x + probe).min(0.0) } else { x };
                x += panel_width * grade(near).max(1.0);
                local.push(x);
            }
            let stretch = (b - a) / (x - a);
            edges.extend(local.iter().skip(if edges.is_empty() { 0 } else { 1 }).map(|e| a + (e - a) * stretch));
        }
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for p in edges.windows(2) {
            let half = 0.5 * (p[1] - p[0]);
            let mid = p[0] + half;
            for &(x, wt) in reference_rule() {
                nodes.push(mid + half * x);
                weights.push(half * wt);
            }
        }
        Self { nodes, weights }
    }

    /// Periodic trapezoid rule on `[0, 2 pi)` with `n` nodes, weights summing to one.
    pub fn periodic(n: usize) -> Self {
        let h = std::f64::consts::TAU / n as f64;
        Self {
            nodes: (0..n).map(|j| j as f64 * h).collect(),
            weights: vec![1.0 / n as f64; n],
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Sorted, deduplicated breakpoints on `[lo, hi]` including both ends and
/// every extra point strictly inside.
pub fn breakpoints(lo: f64, hi: f64, extra: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let mut b: Vec<f64> = extra.into_iter().filter(|&x| x > lo && x < hi).collect();
    b.push(lo);
    b.push(hi);
    b.sort_by(f64::total_cmp);
    b.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    b
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_polynomials_exactly() {
        let r = Rule1d::composite(&[-1.0, 0.3, 2.0], 0.5);
        let s: f64 = r.nodes.iter().zip(&r.weights).map(|(x, w)| w * x.powi(7)).sum();
        let exact = (2f64.powi(8) - 1.0) / 8.0;
        assert!((s - exact).abs() < 1e-12);
    }

    #[test]
    fn smooth_integrand_on_panels() {
        let r = Rule1d::composite(&[0.0, std::f64::consts::PI], 0.4);
        let s: f64 = r.nodes.iter().zip(&r.weights).map(|(x, w)| w * x.sin()).sum();
        assert!((s - 2.0).abs() < 1e-14);
    }

    #[test]
    fn graded_rule_hits_breaks_and_integrates() {
        let r = Rule1d::graded(&[-30.0, -1.0, 0.0, 2.0, 30.0], 0.25, |x: f64| (x.abs() / 4.0).exp().min(16.0));
        let s: f64 = r.nodes.iter().zip(&r.weights).map(|(x, w)| w * (-x.abs()).exp()).sum();
        assert!((s - 2.0 * (1.0 - (-30f64).exp())).abs() < 1e-12);
        assert!(r.len() < Rule1d::composite(&[-30.0, 30.0], 0.25).len() / 3);
    }

    #[test]
    fn periodic_rule_is_exact_for_low_modes() {
        let r = Rule1d::periodic(12);
        let s: f64 = r.nodes.iter().zip(&r.weights).map(|(x, w)| w * (5.0 * x).cos().powi(2)).sum();
        assert!((s - 0.5).abs() < 1e-15);
    }

    #[test]
    fn breakpoints_are_clipped_and_sorted() {
        assert_eq!(breakpoints(-2.0, 2.0, [1.0, -3.0, 0.0, 1.0]), vec![-2.0, 0.0, 1.0, 2.0]);
    }
}
