use rayon::prelude::*;

use super::weight::WeightSpec;
use crate::error::{Error, Result};

/// Node layout of a [`GridField`].
///
/// `VBox` is a uniform tensor grid in the toric log coordinates `v`.
/// `Polar` covers an annulus of the chart: radial nodes uniform in
/// `s = ln |zeta|` and `n_theta` equispaced angles (periodic).
#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    VBox {
        dim: usize,
        lo: [f64; 2],
        spacing: [f64; 2],
        counts: [usize; 2],
    },
    Polar {
        s_min: f64,
        ds: f64,
        n_radial: usize,
        n_theta: usize,
    },
}

impl Domain {
    /// The box `[-v_max, v_max]^dim` with spacing as close to `h` as the
    /// node count allows (the box edges are always nodes).
    pub fn v_box(dim: usize, v_max: f64, h: f64) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(Error::InvalidArgument(format!("grid dimension {dim} not in {{1, 2}}")));
        }
        if !(v_max > 0.0 && h > 0.0) {
            return Err(Error::InvalidArgument("box half-width and spacing must be positive".into()));
        }
        let n = ((2.0 * v_max / h).round() as usize).max(2) + 1;
        Self::v_box_axes(dim, [-v_max; 2], [v_max; 2], [n, if dim == 2 { n } else { 1 }])
    }

    pub fn v_box_axes(dim: usize, lo: [f64; 2], hi: [f64; 2], counts: [usize; 2]) -> Result<Self> {
        let mut spacing = [0.0; 2];
        let mut counts = counts;
        for a in 0..dim {
            if counts[a] < 2 || !(hi[a] > lo[a]) {
                return Err(Error::InvalidArgument("degenerate box axis".into()));
            }
            spacing[a] = (hi[a] - lo[a]) / (counts[a] - 1) as f64;
        }
        if dim == 1 {
            counts[1] = 1;
        }
        Ok(Domain::VBox {
            dim,
            lo: [lo[0], if dim == 2 { lo[1] } else { 0.0 }],
            spacing,
            counts,
        })
    }

    pub fn polar(r_min: f64, r_max: f64, n_radial: usize, n_theta: usize) -> Result<Self> {
        if !(r_min > 0.0 && r_max > r_min) || n_radial < 3 || n_theta < 4 {
            return Err(Error::InvalidArgument(
                "polar grid needs 0 < r_min < r_max, n_radial >= 3, n_theta >= 4".into(),
            ));
        }
        let s_min = r_min.ln();
        let ds = (r_max.ln() - s_min) / (n_radial - 1) as f64;
        Ok(Domain::Polar {
            s_min,
            ds,
            n_radial,
            n_theta,
        })
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Domain::VBox { .. } => "v-box",
            Domain::Polar { .. } => "polar chart",
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Domain::VBox { counts, .. } => counts[0] * counts[1],
            Domain::Polar {
                n_radial, n_theta, ..
            } => n_radial * n_theta,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of real coordinates of a node.
    pub fn dim(&self) -> usize {
        match self {
            Domain::VBox { dim, .. } => *dim,
            Domain::Polar { .. } => 2,
        }
    }

    /// Node counts per axis (radial first for polar grids).
    pub fn counts(&self) -> [usize; 2] {
        match self {
            Domain::VBox { counts, .. } => *counts,
            Domain::Polar {
                n_radial, n_theta, ..
            } => [*n_radial, *n_theta],
        }
    }

    /// Spacing per axis (`ds`, `dtheta` for polar grids).
    pub fn spacing(&self) -> [f64; 2] {
        match self {
            Domain::VBox { spacing, .. } => *spacing,
            Domain::Polar { ds, n_theta, .. } => [*ds, std::f64::consts::TAU / *n_theta as f64],
        }
    }

    /// Largest spacing over the axes in use.
    pub fn max_spacing(&self) -> f64 {
        let h = self.spacing();
        if self.dim() == 1 {
            h[0]
        } else {
            h[0].max(h[1])
        }
    }

    pub fn index(&self, i0: usize, i1: usize) -> usize {
        i0 * self.counts()[1] + i1
    }

    pub fn split_index(&self, i: usize) -> (usize, usize) {
        let n1 = self.counts()[1];
        (i / n1, i % n1)
    }

    /// Grid coordinates of node `i`: `v` for boxes, `(s, theta)` for polar grids.
    pub fn coords(&self, i: usize) -> [f64; 2] {
        let (i0, i1) = self.split_index(i);
        match self {
            Domain::VBox { lo, spacing, .. } => [
                lo[0] + i0 as f64 * spacing[0],
                lo[1] + i1 as f64 * spacing[1],
            ],
            Domain::Polar { s_min, ds, .. } => {
                [s_min + i0 as f64 * ds, i1 as f64 * self.spacing()[1]]
            }
        }
    }

    /// Point at which weights are evaluated: `v` for boxes, `zeta = (x, y)`
    /// for polar grids.
    pub fn point(&self, i: usize) -> [f64; 2] {
        let c = self.coords(i);
        match self {
            Domain::VBox { .. } => c,
            Domain::Polar { .. } => {
                let r = c[0].exp();
                [r * c[1].cos(), r * c[1].sin()]
            }
        }
    }

    /// Volume of the cell owned by each node (box measure `dv` or `ds dtheta`).
    pub fn cell_volume(&self) -> f64 {
        let h = self.spacing();
        if self.dim() == 1 {
            h[0]
        } else {
            h[0] * h[1]
        }
    }

    /// Nodes on the outermost layer along non-periodic axes.
    pub fn is_boundary(&self, i: usize) -> bool {
        let (i0, i1) = self.split_index(i);
        let [n0, n1] = self.counts();
        let edge0 = i0 == 0 || i0 + 1 == n0;
        match self {
            Domain::VBox { dim: 2, .. } => edge0 || i1 == 0 || i1 + 1 == n1,
            _ => edge0,
        }
    }

    /// Nodes whose box coordinates lie in the central `fraction` of every axis.
    pub fn central_window(&self, fraction: f64) -> Vec<bool> {
        let [n0, n1] = self.counts();
        (0..self.len())
            .map(|i| {
                let (i0, i1) = self.split_index(i);
                let inside = |j: usize, n: usize| {
                    let t = j as f64 / (n - 1).max(1) as f64;
                    (t - 0.5).abs() <= 0.5 * fraction + 1e-12
                };
                match self {
                    Domain::VBox { dim: 2, .. } => inside(i0, n0) && inside(i1, n1),
                    _ => inside(i0, n0),
                }
            })
            .collect()
    }
}

/// Real values aligned with the nodes of a [`Domain`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    domain: Domain,
    values: Vec<f64>,
}

impl GridField {
    pub fn new(domain: Domain, values: Vec<f64>) -> Result<Self> {
        if values.len() != domain.len() {
            return Err(Error::DomainMismatch(format!(
                "{} values for {} nodes",
                values.len(),
                domain.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite value at node {i}")));
        }
        Ok(Self { domain, values })
    }

    /// Evaluates `f` at every node; `f` receives the node index.
    pub fn from_fn<F>(domain: Domain, f: F) -> Result<Self>
    where
        F: Fn(usize) -> f64 + Sync,
    {
        let values = (0..domain.len()).into_par_iter().map(&f).collect();
        Self::new(domain, values)
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn check_same_domain(&self, other: &GridField) -> Result<()> {
        if self.domain != other.domain {
            return Err(Error::DomainMismatch(format!(
                "{} grid with {} nodes vs {} grid with {} nodes",
                self.domain.kind_name(),
                self.domain.len(),
                other.domain.kind_name(),
                other.domain.len()
            )));
        }
        Ok(())
    }

    pub fn zip_with<F>(&self, other: &GridField, f: F) -> Result<GridField>
    where
        F: Fn(f64, f64) -> f64,
    {
        self.check_same_domain(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        GridField::new(self.domain.clone(), values)
    }

    pub fn map<F>(&self, f: F) -> Result<GridField>
    where
        F: Fn(f64) -> f64,
    {
        GridField::new(self.domain.clone(), self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn sub(&self, other: &GridField) -> Result<GridField> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, c: f64) -> GridField {
        GridField {
            domain: self.domain.clone(),
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Values along the row of constant first index (for a 2-D layout).
    pub fn row(&self, i0: usize) -> &[f64] {
        let n1 = self.domain.counts()[1];
        &self.values[i0 * n1..(i0 + 1) * n1]
    }
}

/// Boolean values aligned with the nodes of a [`Domain`].
#[derive(Debug, Clone, PartialEq)]
pub struct MaskField {
    domain: Domain,
    values: Vec<bool>,
}

impl MaskField {
    pub fn new(domain: Domain, values: Vec<bool>) -> Result<Self> {
        if values.len() != domain.len() {
            return Err(Error::DomainMismatch(format!(
                "{} mask entries for {} nodes",
                values.len(),
                domain.len()
            )));
        }
        Ok(Self { domain, values })
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn values(&self) -> &[bool] {
        &self.values
    }

    pub fn get(&self, i: usize) -> bool {
        self.values[i]
    }

    pub fn count(&self) -> usize {
        self.values.iter().filter(|&&b| b).count()
    }

    pub fn all(&self) -> bool {
        self.values.iter().all(|&b| b)
    }

    /// Nodes of the mask at grid distance at least `margin` (in nodes, along
    /// every axis) from any node outside the mask.
    pub fn interior(&self, margin: usize) -> Vec<bool> {
        let [n0, n1] = self.domain.counts();
        let periodic = matches!(self.domain, Domain::Polar { .. });
        let two_d = self.domain.dim() == 2;
        (0..self.values.len())
            .map(|i| {
                if !self.values[i] {
                    return false;
                }
                let (i0, i1) = self.domain.split_index(i);
                let m = margin as isize;
                for d0 in -m..=m {
                    let j0 = i0 as isize + d0;
                    if j0 < 0 || j0 >= n0 as isize {
                        continue;
                    }
                    let span = if two_d { m } else { 0 };
                    for d1 in -span..=span {
                        let mut j1 = i1 as isize + d1;
                        if periodic {
                            j1 = j1.rem_euclid(n1 as isize);
                        } else if j1 < 0 || j1 >= n1 as isize {
                            continue;
                        }
                        if !self.values[j0 as usize * n1 + j1 as usize] {
                            return false;
                        }
                    }
                }
                true
            })
            .collect()
    }
}

/// Node-wise values of a weight. Toric weights need a box of matching
/// dimension; chart weights need a polar grid.
pub fn eval_weight(weight: &WeightSpec, domain: &Domain) -> Result<GridField> {
    match (weight.is_toric(), domain) {
        (true, Domain::VBox { dim, .. }) if *dim == weight.dim() => {}
        (true, Domain::VBox { .. }) => {
            return Err(Error::DomainMismatch(format!(
                "{}-dimensional weight on a {}-dimensional box",
                weight.dim(),
                domain.dim()
            )))
        }
        (false, Domain::Polar { .. }) => {}
        _ => {
            return Err(Error::WrongDomainKind {
                weight: weight.kind_name(),
                domain: domain.kind_name(),
            })
        }
    }
    let w = weight.build();
    GridField::from_fn(domain.clone(), |i| w.value(domain.point(i)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Bump, LatticePolytope};

    #[test]
    fn box_layout() {
        let d = Domain::v_box(1, 2.0, 0.5).unwrap();
        assert_eq!(d.len(), 9);
        assert_eq!(d.coords(0)[0], -2.0);
        assert_eq!(d.coords(8)[0], 2.0);
        assert!(d.is_boundary(0) && d.is_boundary(8) && !d.is_boundary(4));

        let d2 = Domain::v_box(2, 1.0, 0.5).unwrap();
        assert_eq!(d2.counts(), [5, 5]);
        assert_eq!(d2.coords(d2.index(1, 3)), [-0.5, 0.5]);
        assert!(d2.is_boundary(d2.index(0, 2)) && d2.is_boundary(d2.index(2, 4)));
        assert!(!d2.is_boundary(d2.index(2, 2)));
    }

    #[test]
    fn polar_layout() {
        let d = Domain::polar(0.5, 2.0, 5, 8).unwrap();
        let p = d.point(d.index(4, 2));
        assert!((p[0]).abs() < 1e-15 && (p[1] - 2.0).abs() < 1e-14);
        assert!(d.is_boundary(d.index(0, 3)) && !d.is_boundary(d.index(2, 0)));
    }

    #[test]
    fn weights_on_domains() {
        let fs = eval_weight(&WeightSpec::FsChart, &Domain::polar(0.5, 2.0, 5, 8).unwrap()).unwrap();
        // the radial node at r = 1 (s = 0 is node 2 of [-ln 2, ln 2])
        let i = fs.domain().index(2, 5);
        assert!((fs.get(i) - 2f64.ln()).abs() < 1e-14);

        let toric = WeightSpec::ToricPotential(LatticePolytope::segment(0, 1).unwrap());
        let f = eval_weight(&toric, &Domain::v_box(1, 1.0, 0.5).unwrap()).unwrap();
        assert!((f.get(2) - 2f64.ln()).abs() < 1e-15);

        let err = eval_weight(&toric, &Domain::polar(0.5, 2.0, 5, 8).unwrap());
        assert!(matches!(err, Err(Error::WrongDomainKind { .. })));
        let err = eval_weight(&WeightSpec::FsChart, &Domain::v_box(1, 1.0, 0.5).unwrap());
        assert!(matches!(err, Err(Error::WrongDomainKind { .. })));
        let err = eval_weight(&toric, &Domain::v_box(2, 1.0, 0.5).unwrap());
        assert!(matches!(err, Err(Error::DomainMismatch(_))));
    }

    #[test]
    fn perturbed_toric_matches_outside_support() {
        let p = LatticePolytope::segment(-1, 1).unwrap();
        let spec = WeightSpec::PerturbedToric {
            polytope: p.clone(),
            bumps: vec![Bump::on_line(0.0, 1.0, 0.4, 3.0).unwrap()],
        };
        let d = Domain::v_box(1, 4.0, 0.25).unwrap();
        let a = eval_weight(&spec, &d).unwrap();
        let b = eval_weight(&WeightSpec::ToricPotential(p), &d).unwrap();
        for i in 0..d.len() {
            if d.coords(i)[0].abs() >= 1.0 {
                assert_eq!(a.get(i), b.get(i));
            } else {
                assert!(a.get(i) > b.get(i));
            }
        }
        let at3 = d.len() - 5;
        assert_eq!(d.coords(at3)[0], 3.0);
        assert_eq!(a.get(at3), ((-3f64).exp() + 1.0 + 3f64.exp()).ln());
    }

    #[test]
    fn combining_fields_checks_domains() {
        let a = GridField::from_fn(Domain::v_box(1, 1.0, 0.5).unwrap(), |i| i as f64).unwrap();
        let b = GridField::from_fn(Domain::v_box(1, 1.0, 0.25).unwrap(), |i| i as f64).unwrap();
        assert!(matches!(a.sub(&b), Err(Error::DomainMismatch(_))));
        assert_eq!(a.sub(&a).unwrap().max_abs(), 0.0);
        assert!(GridField::new(a.domain().clone(), vec![f64::NAN; 5]).is_err());
    }

    #[test]
    fn mask_interior() {
        let d = Domain::v_box(1, 1.0, 0.25).unwrap();
        let m = MaskField::new(d, vec![true, true, true, false, false, true, true, true, true]).unwrap();
        assert_eq!(
            m.interior(1),
            vec![true, true, false, false, false, false, true, true, true]
        );
    }
}
