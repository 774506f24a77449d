//! Weights (metrics) on the model line bundles.
//!
//! Toric weights are functions of the logarithmic coordinates `v`; chart
//! weights are functions of the affine coordinate `zeta = x + i y` on the
//! standard chart of the projective line. Both are stored as a reference
//! potential plus a list of compactly supported bumps.

use super::polytope::{lattice_points, Exponent, LatticePolytope};
use crate::error::{Error, Result};

/// `amplitude * (1 - (r/radius)^2)^smoothness` for `r < radius`, zero outside.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bump {
    pub center: [f64; 2],
    pub radius: f64,
    pub amplitude: f64,
    pub smoothness: f64,
}

impl Bump {
    pub fn new(center: [f64; 2], radius: f64, amplitude: f64, smoothness: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidArgument(format!("bump radius must be positive, got {radius}")));
        }
        if !(smoothness >= 3.0) {
            return Err(Error::InvalidArgument(format!(
                "bump smoothness exponent must be at least 3, got {smoothness}"
            )));
        }
        if !amplitude.is_finite() || !center.iter().all(|c| c.is_finite()) {
            return Err(Error::InvalidArgument("bump parameters must be finite".into()));
        }
        Ok(Self {
            center,
            radius,
            amplitude,
            smoothness,
        })
    }

    /// One-dimensional bump centred at `c`.
    pub fn on_line(c: f64, radius: f64, amplitude: f64, smoothness: f64) -> Result<Self> {
        Self::new([c, 0.0], radius, amplitude, smoothness)
    }

    fn offset(&self, x: [f64; 2], dim: usize) -> [f64; 2] {
        if dim == 1 {
            [x[0] - self.center[0], 0.0]
        } else {
            [x[0] - self.center[0], x[1] - self.center[1]]
        }
    }

    fn q(&self, d: [f64; 2]) -> f64 {
        1.0 - (d[0] * d[0] + d[1] * d[1]) / (self.radius * self.radius)
    }

    pub fn value(&self, x: [f64; 2], dim: usize) -> f64 {
        let q = self.q(self.offset(x, dim));
        if q <= 0.0 {
            0.0
        } else {
            self.amplitude * q.powf(self.smoothness)
        }
    }

    /// Value of the profile at distance `r` from the centre.
    pub fn profile(&self, r: f64) -> f64 {
        let q = 1.0 - (r / self.radius).powi(2);
        if q <= 0.0 {
            0.0
        } else {
            self.amplitude * q.powf(self.smoothness)
        }
    }

    pub fn gradient(&self, x: [f64; 2], dim: usize) -> [f64; 2] {
        let d = self.offset(x, dim);
        let q = self.q(d);
        if q <= 0.0 {
            return [0.0, 0.0];
        }
        let s = self.smoothness;
        let c = -2.0 * self.amplitude * s * q.powf(s - 1.0) / (self.radius * self.radius);
        [c * d[0], c * d[1]]
    }

    pub fn hessian(&self, x: [f64; 2], dim: usize) -> [[f64; 2]; 2] {
        let d = self.offset(x, dim);
        let q = self.q(d);
        if q <= 0.0 {
            return [[0.0; 2]; 2];
        }
        let s = self.smoothness;
        let r2 = self.radius * self.radius;
        let a = self.amplitude;
        let outer = 4.0 * a * s * (s - 1.0) * q.powf(s - 2.0) / (r2 * r2);
        let iso = -2.0 * a * s * q.powf(s - 1.0) / r2;
        let mut h = [
            [outer * d[0] * d[0] + iso, outer * d[0] * d[1]],
            [outer * d[0] * d[1], outer * d[1] * d[1] + iso],
        ];
        if dim == 1 {
            h[0][1] = 0.0;
            h[1][0] = 0.0;
            h[1][1] = 0.0;
        }
        h
    }

    /// Largest distance from the origin reached by the support.
    pub fn extent(&self, dim: usize) -> f64 {
        let c = if dim == 1 {
            self.center[0].abs()
        } else {
            self.center[0].hypot(self.center[1])
        };
        c + self.radius
    }
}

/// The toric potential `ln sum_{alpha in P cap Z^n} exp(<alpha, v>)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ToricPotential {
    dim: usize,
    points: Vec<Exponent>,
}

/// Softmax weights, mean, and log-sum-exp of `<alpha, v>` over the points.
struct Moments {
    weights: Vec<f64>,
    mean: [f64; 2],
    lse: f64,
}

impl ToricPotential {
    pub fn new(polytope: &LatticePolytope) -> Self {
        Self {
            dim: polytope.dim(),
            points: lattice_points(polytope, 1).expect("k = 1 is valid"),
        }
    }

    pub fn points(&self) -> &[Exponent] {
        &self.points
    }

    fn moments(&self, v: [f64; 2]) -> Moments {
        let logits: Vec<f64> = self
            .points
            .iter()
            .map(|a| a[0] as f64 * v[0] + a[1] as f64 * v[1])
            .collect();
        let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut weights: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        let mut mean = [0.0; 2];
        for (w, a) in weights.iter().zip(&self.points) {
            mean[0] += w * a[0] as f64;
            mean[1] += w * a[1] as f64;
        }
        Moments {
            weights,
            mean,
            lse: m + total.ln(),
        }
    }

    pub fn value(&self, v: [f64; 2]) -> f64 {
        self.moments(v).lse
    }

    pub fn gradient(&self, v: [f64; 2]) -> [f64; 2] {
        self.moments(v).mean
    }

    pub fn hessian(&self, v: [f64; 2]) -> [[f64; 2]; 2] {
        let m = self.moments(v);
        let mut h = [[0.0; 2]; 2];
        for (w, a) in m.weights.iter().zip(&self.points) {
            let d = [a[0] as f64 - m.mean[0], a[1] as f64 - m.mean[1]];
            for i in 0..2 {
                for j in 0..2 {
                    h[i][j] += w * d[i] * d[j];
                }
            }
        }
        if self.dim == 1 {
            h[0][0] = self.det_hessian_from(&m.weights);
            h[0][1] = 0.0;
            h[1][0] = 0.0;
            h[1][1] = 0.0;
        }
        h
    }

    /// Determinant of the Hessian (the second derivative when `n = 1`).
    ///
    /// Written as a sum of non-negative terms over pairs (n = 1) or triples
    /// (n = 2) of lattice points with exact integer differences, so it keeps
    /// full relative accuracy far out in the tails where the covariance is
    /// exponentially small.
    pub fn det_hessian(&self, v: [f64; 2]) -> f64 {
        self.det_hessian_from(&self.moments(v).weights)
    }

    fn det_hessian_from(&self, w: &[f64]) -> f64 {
        let p = &self.points;
        let mut acc = 0.0;
        if self.dim == 1 {
            for i in 0..p.len() {
                for j in 0..i {
                    let d = (p[i][0] - p[j][0]) as f64;
                    acc += w[i] * w[j] * d * d;
                }
            }
            return acc;
        }
        // det Cov = (1/6) sum_{a,b,c} w_a w_b w_c ((b - a) x (c - a))^2
        for a in 0..p.len() {
            for b in 0..p.len() {
                if b == a {
                    continue;
                }
                for c in 0..b {
                    if c == a {
                        continue;
                    }
                    let x = (p[b][0] - p[a][0]) * (p[c][1] - p[a][1])
                        - (p[b][1] - p[a][1]) * (p[c][0] - p[a][0]);
                    if x != 0 {
                        let x = x as f64;
                        acc += w[a] * w[b] * w[c] * x * x;
                    }
                }
            }
        }
        acc / 3.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum WeightSpec {
    ToricPotential(LatticePolytope),
    PerturbedToric {
        polytope: LatticePolytope,
        bumps: Vec<Bump>,
    },
    FsChart,
    PerturbedChart {
        bumps: Vec<Bump>,
    },
}

/// A weight ready for pointwise evaluation.
#[derive(Debug, Clone)]
pub struct Weight {
    spec: WeightSpec,
    toric: Option<ToricPotential>,
}

impl WeightSpec {
    pub fn kind_name(&self) -> &'static str {
        match self {
            WeightSpec::ToricPotential(_) => "toric",
            WeightSpec::PerturbedToric { .. } => "perturbed toric",
            WeightSpec::FsChart => "Fubini-Study chart",
            WeightSpec::PerturbedChart { .. } => "perturbed chart",
        }
    }

    pub fn is_toric(&self) -> bool {
        matches!(
            self,
            WeightSpec::ToricPotential(_) | WeightSpec::PerturbedToric { .. }
        )
    }

    pub fn polytope(&self) -> Option<&LatticePolytope> {
        match self {
            WeightSpec::ToricPotential(p) | WeightSpec::PerturbedToric { polytope: p, .. } => {
                Some(p)
            }
            _ => None,
        }
    }

    pub fn bumps(&self) -> &[Bump] {
        match self {
            WeightSpec::PerturbedToric { bumps, .. } | WeightSpec::PerturbedChart { bumps } => {
                bumps
            }
            _ => &[],
        }
    }

    /// Number of real coordinates the weight is a function of.
    pub fn dim(&self) -> usize {
        self.polytope().map_or(2, LatticePolytope::dim)
    }

    /// The same weight with every bump removed.
    pub fn unperturbed(&self) -> WeightSpec {
        match self {
            WeightSpec::ToricPotential(p) | WeightSpec::PerturbedToric { polytope: p, .. } => {
                WeightSpec::ToricPotential(p.clone())
            }
            _ => WeightSpec::FsChart,
        }
    }

    /// Constant `C` in `|phi - phi_ref| <= C`: the sum of absolute amplitudes.
    pub fn growth_constant(&self) -> f64 {
        self.bumps().iter().map(|b| b.amplitude.abs()).sum()
    }

    /// Largest distance from the origin reached by any bump support.
    pub fn bump_extent(&self) -> f64 {
        let d = self.dim();
        self.bumps()
            .iter()
            .map(|b| b.extent(d))
            .fold(0.0, f64::max)
    }

    /// Chart weights invariant under rotation of the chart coordinate.
    pub fn is_circle_invariant(&self) -> bool {
        !self.is_toric()
            && self
                .bumps()
                .iter()
                .all(|b| b.center[0] == 0.0 && b.center[1] == 0.0)
    }

    pub fn build(&self) -> Weight {
        Weight {
            toric: self.polytope().map(ToricPotential::new),
            spec: self.clone(),
        }
    }
}

impl Weight {
    pub fn spec(&self) -> &WeightSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.spec.dim()
    }

    /// The unperturbed potential (`phi_Delta` or the Fubini-Study weight).
    pub fn reference_value(&self, x: [f64; 2]) -> f64 {
        match &self.toric {
            Some(t) => t.value(x),
            None => (x[0] * x[0] + x[1] * x[1]).ln_1p(),
        }
    }

    pub fn value(&self, x: [f64; 2]) -> f64 {
        let d = self.dim();
        self.reference_value(x) + self.spec.bumps().iter().map(|b| b.value(x, d)).sum::<f64>()
    }

    pub fn gradient(&self, x: [f64; 2]) -> [f64; 2] {
        let d = self.dim();
        let mut g = match &self.toric {
            Some(t) => t.gradient(x),
            None => {
                let s = 1.0 + x[0] * x[0] + x[1] * x[1];
                [2.0 * x[0] / s, 2.0 * x[1] / s]
            }
        };
        for b in self.spec.bumps() {
            let bg = b.gradient(x, d);
            g[0] += bg[0];
            g[1] += bg[1];
        }
        g
    }

    /// Euclidean Hessian in the weight's own coordinates.
    pub fn hessian(&self, x: [f64; 2]) -> [[f64; 2]; 2] {
        let d = self.dim();
        let mut h = match &self.toric {
            Some(t) => t.hessian(x),
            None => {
                let s = 1.0 + x[0] * x[0] + x[1] * x[1];
                let s2 = s * s;
                [
                    [2.0 / s - 4.0 * x[0] * x[0] / s2, -4.0 * x[0] * x[1] / s2],
                    [-4.0 * x[0] * x[1] / s2, 2.0 / s - 4.0 * x[1] * x[1] / s2],
                ]
            }
        };
        for b in self.spec.bumps() {
            let bh = b.hessian(x, d);
            for i in 0..2 {
                for j in 0..2 {
                    h[i][j] += bh[i][j];
                }
            }
        }
        h
    }

    /// Euclidean Laplacian (chart weights) or trace of the Hessian.
    pub fn laplacian(&self, x: [f64; 2]) -> f64 {
        let h = self.hessian(x);
        h[0][0] + h[1][1]
    }

    /// Determinant of the reference Hessian (toric) or the reference
    /// Laplacian (chart), evaluated stably.
    pub fn reference_density(&self, x: [f64; 2]) -> f64 {
        match &self.toric {
            Some(t) => t.det_hessian(x),
            None => {
                let s = 1.0 + x[0] * x[0] + x[1] * x[1];
                4.0 / (s * s)
            }
        }
    }

    /// Rotation-invariant bounds `(lo, hi)` of a chart weight on the circle of
    /// radius `r`: the Fubini-Study value plus the per-bump extremes over the
    /// circle.
    pub fn radial_sandwich(&self, r: f64) -> (f64, f64) {
        let base = (r * r).ln_1p();
        let mut lo = base;
        let mut hi = base;
        for b in self.spec.bumps() {
            let c = b.center[0].hypot(b.center[1]);
            let near = b.profile((r - c).abs());
            let far = b.profile(r + c);
            lo += near.min(far);
            hi += near.max(far);
        }
        (lo, hi)
    }
}
