//! Integral polytopes in dimension one and two.
//!
//! A polytope is stored as its hull vertices (counter-clockwise in the plane)
//! together with integer facet inequalities `<a, x> <= b`. Membership of a
//! lattice point in the dilate `k * P` is decided in exact integer
//! arithmetic, so enumeration never depends on rounding.

use crate::error::{Error, Result};

/// Integer exponent vector. In dimension one the second slot is zero.
pub type Exponent = [i64; 2];

#[derive(Debug, Clone, PartialEq)]
pub struct LatticePolytope {
    dim: usize,
    vertices: Vec<Exponent>,
    /// Facets as `(normal, offset)` with `<normal, x> <= offset` inside.
    facets: Vec<(Exponent, i64)>,
}

fn cross(o: Exponent, a: Exponent, b: Exponent) -> i64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

impl LatticePolytope {
    /// Builds the convex hull of the given integer points. All points must
    /// share one dimension, which must be 1 or 2.
    pub fn new(points: &[Vec<i64>]) -> Result<Self> {
        let dim = points
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::InvalidPolytope("no vertices".into()))?;
        if !(1..=2).contains(&dim) {
            return Err(Error::InvalidPolytope(format!(
                "dimension {dim} is not supported (only 1 and 2)"
            )));
        }
        if points.iter().any(|p| p.len() != dim) {
            return Err(Error::InvalidPolytope("vertices of mixed dimension".into()));
        }
        let pts: Vec<Exponent> = points
            .iter()
            .map(|p| [p[0], if dim == 2 { p[1] } else { 0 }])
            .collect();
        if dim == 1 {
            let lo = pts.iter().map(|p| p[0]).min().unwrap();
            let hi = pts.iter().map(|p| p[0]).max().unwrap();
            if lo == hi {
                return Err(Error::NotFullDimensional);
            }
            return Ok(Self {
                dim,
                vertices: vec![[lo, 0], [hi, 0]],
                facets: vec![([1, 0], hi), ([-1, 0], -lo)],
            });
        }

        let mut sorted = pts;
        sorted.sort_unstable();
        sorted.dedup();
        // Andrew's monotone chain, collinear points dropped.
        let mut hull: Vec<Exponent> = Vec::with_capacity(2 * sorted.len());
        for &p in sorted.iter() {
            while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0 {
                hull.pop();
            }
            hull.push(p);
        }
        let lower_len = hull.len() + 1;
        for &p in sorted.iter().rev().skip(1) {
            while hull.len() >= lower_len
                && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0
            {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
        if hull.len() < 3 {
            return Err(Error::NotFullDimensional);
        }
        let facets = (0..hull.len())
            .map(|i| {
                let p = hull[i];
                let q = hull[(i + 1) % hull.len()];
                let normal = [q[1] - p[1], p[0] - q[0]];
                (normal, normal[0] * p[0] + normal[1] * p[1])
            })
            .collect();
        Ok(Self {
            dim,
            vertices: hull,
            facets,
        })
    }

    pub fn segment(lo: i64, hi: i64) -> Result<Self> {
        Self::new(&[vec![lo], vec![hi]])
    }

    pub fn unit_simplex() -> Self {
        Self::new(&[vec![0, 0], vec![1, 0], vec![0, 1]]).expect("unit simplex")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vertices(&self) -> &[Exponent] {
        &self.vertices
    }

    /// Exact membership of the lattice point `alpha` in `k * P`.
    pub fn dilate_contains(&self, alpha: Exponent, k: i64) -> bool {
        self.facets
            .iter()
            .all(|(a, b)| a[0] * alpha[0] + a[1] * alpha[1] <= k * b)
    }

    /// Membership of a real point, with absolute slack `tol` on each facet.
    pub fn contains(&self, p: [f64; 2], tol: f64) -> bool {
        self.signed_boundary_distance(p) >= -tol
    }

    /// Euclidean distance to the boundary, positive inside and negative outside.
    pub fn signed_boundary_distance(&self, p: [f64; 2]) -> f64 {
        self.facets
            .iter()
            .map(|(a, b)| {
                let a0 = a[0] as f64;
                let a1 = a[1] as f64;
                (*b as f64 - a0 * p[0] - a1 * p[1]) / (a0 * a0 + a1 * a1).sqrt()
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn barycenter(&self) -> [f64; 2] {
        let n = self.vertices.len() as f64;
        let sx: i64 = self.vertices.iter().map(|v| v[0]).sum();
        let sy: i64 = self.vertices.iter().map(|v| v[1]).sum();
        [sx as f64 / n, sy as f64 / n]
    }

    /// Largest distance between two vertices.
    pub fn diameter(&self) -> f64 {
        let mut best = 0.0_f64;
        for a in &self.vertices {
            for b in &self.vertices {
                let dx = (a[0] - b[0]) as f64;
                let dy = (a[1] - b[1]) as f64;
                best = best.max((dx * dx + dy * dy).sqrt());
            }
        }
        best
    }

    /// Integer bounding box `(lo, hi)` of the vertices.
    pub fn bounding_box(&self) -> (Exponent, Exponent) {
        let mut lo = self.vertices[0];
        let mut hi = self.vertices[0];
        for v in &self.vertices {
            for c in 0..2 {
                lo[c] = lo[c].min(v[c]);
                hi[c] = hi[c].max(v[c]);
            }
        }
        (lo, hi)
    }

    /// Returns `P` dilated by the positive integer `m`.
    pub fn scaled(&self, m: i64) -> Self {
        Self {
            dim: self.dim,
            vertices: self.vertices.iter().map(|v| [v[0] * m, v[1] * m]).collect(),
            facets: self.facets.iter().map(|(a, b)| (*a, b * m)).collect(),
        }
    }
}

/// The points of `k * P` with integer coordinates, in lexicographic order.
pub fn lattice_points(polytope: &LatticePolytope, k: i64) -> Result<Vec<Exponent>> {
    if k < 1 {
        return Err(Error::InvalidArgument(format!("k must be at least 1, got {k}")));
    }
    let (lo, hi) = polytope.bounding_box();
    let mut out = Vec::new();
    let (y_lo, y_hi) = if polytope.dim == 2 {
        (k * lo[1], k * hi[1])
    } else {
        (0, 0)
    };
    for x in k * lo[0]..=k * hi[0] {
        for y in y_lo..=y_hi {
            let alpha = [x, y];
            if polytope.dilate_contains(alpha, k) {
                out.push(alpha);
            }
        }
    }
    Ok(out)
}

/// Euclidean volume: length in dimension one, shoelace area in dimension two.
pub fn lattice_volume(polytope: &LatticePolytope) -> f64 {
    let v = &polytope.vertices;
    if polytope.dim == 1 {
        return (v[1][0] - v[0][0]) as f64;
    }
    let twice_area: i64 = (0..v.len())
        .map(|i| {
            let p = v[i];
            let q = v[(i + 1) % v.len()];
            p[0] * q[1] - q[0] * p[1]
        })
        .sum();
    twice_area.abs() as f64 / 2.0
}
