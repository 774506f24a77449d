//! Weighted Hilbert spaces of sections, their Gram matrices, and the
//! Bergman function and kernel.
//!
//! Toric models use the monomials `z^alpha`, `alpha in k P`, against the
//! measure `det Hess phi_P(v) dv` (torus-averaged, so the Gram matrix is
//! diagonal and kept in log form). Chart models use `zeta^j`, `j = 0..=k`,
//! against the unit-mass Fubini-Study area measure.

mod chart;
mod factor;
mod quadrature;
mod toric;

use num_complex::Complex64;

pub use factor::{orthonormalize, FactorMethod, Factorization, DISCARD_RATIO, MAX_CONDITION};
pub use quadrature::{breakpoints, Rule1d, PANEL_ORDER};

use crate::error::{Error, Result};
use crate::geometry::{lattice_points, Domain, Exponent, GridField, Weight, WeightSpec};
use nalgebra::DMatrix;

/// Quadrature controls for Gram assembly.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureParams {
    /// Relative agreement required between successive panel doublings.
    pub tol: f64,
    /// Starting panel width in the integration variable (`v` for toric
    /// models, `t = r^2 / (1 + r^2)` for the chart). `None` picks 1 resp. 1/8.
    pub panel_width: Option<f64>,
    pub max_doublings: u32,
    /// Toric box half-width; `None` uses the truncation formula.
    pub half_width: Option<f64>,
    /// Tail mass allowed by the truncation formula.
    pub truncation_tol: f64,
    /// Angular nodes on the chart; `None` means `4k + 16`.
    pub n_theta: Option<usize>,
}

impl Default for QuadratureParams {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            panel_width: None,
            max_doublings: 12,
            half_width: None,
            truncation_tol: 1e-10,
            n_theta: None,
        }
    }
}

/// The space `H(X, L^k)` with its basis, weight and quadrature.
#[derive(Debug, Clone, PartialEq)]
pub struct HilbertSpaceSpec {
    pub k: u32,
    pub basis: Vec<Exponent>,
    pub weight: WeightSpec,
    pub quadrature: QuadratureParams,
}

impl HilbertSpaceSpec {
    /// Full monomial basis: `kP cap Z^n` for toric weights, `0..=k` on the chart.
    pub fn new(weight: WeightSpec, k: u32) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidArgument("level k must be at least 1".into()));
        }
        let basis = match weight.polytope() {
            Some(p) => lattice_points(p, k as i64)?,
            None => (0..=k as i64).map(|j| [j, 0]).collect(),
        };
        Ok(Self {
            k,
            basis,
            weight,
            quadrature: QuadratureParams::default(),
        })
    }

    pub fn with_quadrature(mut self, q: QuadratureParams) -> Self {
        self.quadrature = q;
        self
    }

    /// Replaces the basis, e.g. by a subspace or the empty list.
    pub fn with_basis(mut self, basis: Vec<Exponent>) -> Self {
        self.basis = basis;
        self
    }

    /// Toric box half-width actually used.
    pub fn half_width(&self) -> f64 {
        self.quadrature.half_width.unwrap_or_else(|| {
            crate::geometry::truncation_half_width(
                &self.weight,
                self.k,
                self.basis.len(),
                self.quadrature.truncation_tol,
            )
        })
    }

    /// Angular node count used on the chart.
    pub fn n_theta(&self) -> usize {
        self.quadrature.n_theta.unwrap_or(4 * self.k as usize + 16)
    }

    fn check(&self) -> Result<()> {
        let q = &self.quadrature;
        if !(q.tol > 0.0) || !(q.truncation_tol > 0.0) {
            return Err(Error::InvalidArgument("quadrature tolerances must be positive".into()));
        }
        if let Some(w) = q.panel_width {
            if !(w > 0.0) {
                return Err(Error::InvalidArgument("panel width must be positive".into()));
            }
        }
        if let Some(p) = self.weight.polytope() {
            for a in &self.basis {
                if !p.dilate_contains(*a, self.k as i64) {
                    return Err(Error::InvalidArgument(format!(
                        "exponent {a:?} is not in the dilated polytope"
                    )));
                }
            }
        } else {
            if let Some(a) = self.basis.iter().find(|a| a[0] < 0 || a[0] > self.k as i64 || a[1] != 0) {
                return Err(Error::InvalidArgument(format!(
                    "chart exponent {a:?} outside 0..={}",
                    self.k
                )));
            }
            let need = 4 * self.k as usize + 16;
            if self.n_theta() < need {
                return Err(Error::InvalidArgument(format!(
                    "n_theta = {} is below 4k + 16 = {need}",
                    self.n_theta()
                )));
            }
        }
        Ok(())
    }
}

/// Basis cardinality.
pub fn dimension(spec: &HilbertSpaceSpec) -> usize {
    spec.basis.len()
}

/// Final state of the doubling loop.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureReport {
    /// Largest relative change at the last doubling.
    pub achieved: f64,
    pub doublings: u32,
    pub panel_width: f64,
    /// Box half-width for `n = 1` toric models; zero otherwise.
    pub half_width: f64,
    pub n_theta: usize,
    pub nodes: usize,
    /// Total mass of the reference measure under the final rule.
    pub measure_mass: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum GramEntries {
    /// `ln G_alpha` of a diagonal Gram matrix.
    LogDiagonal(Vec<f64>),
    Dense(DMatrix<Complex64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gram {
    pub entries: GramEntries,
    pub quadrature: QuadratureReport,
}

impl Gram {
    pub fn dim(&self) -> usize {
        match &self.entries {
            GramEntries::LogDiagonal(d) => d.len(),
            GramEntries::Dense(m) => m.nrows(),
        }
    }

    /// Entry `(i, j)`; diagonal toric entries are exponentiated (and may underflow).
    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        match &self.entries {
            GramEntries::LogDiagonal(d) if i == j => Complex64::new(d[i].exp(), 0.0),
            GramEntries::LogDiagonal(_) => Complex64::new(0.0, 0.0),
            GramEntries::Dense(m) => m[(i, j)],
        }
    }
}

/// Gram matrix of the basis in the level-`k` weighted norm.
pub fn gram_matrix(spec: &HilbertSpaceSpec) -> Result<Gram> {
    spec.check()?;
    if spec.weight.is_toric() {
        toric::gram(spec)
    } else {
        chart::gram(spec)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Conditioning {
    pub method: FactorMethod,
    pub condition: f64,
    pub discarded: usize,
}

#[derive(Debug, Clone)]
enum Model {
    Toric {
        log_gram: Vec<f64>,
    },
    Chart {
        factor: Factorization,
        gram: DMatrix<Complex64>,
    },
}

/// A factorised Hilbert space at level `k`, ready for evaluation.
#[derive(Debug, Clone)]
pub struct BergmanModel {
    spec: HilbertSpaceSpec,
    weight: Weight,
    quadrature: QuadratureReport,
    model: Model,
}

/// Result of comparing `int B_k dvol` with the dimension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassIdentity {
    pub integral: f64,
    pub dim: usize,
    pub rel_error: f64,
}

impl BergmanModel {
    /// Assembles and factorises. Chart bases are prescaled by the inverse
    /// square roots of their Fubini-Study norms.
    pub fn build(spec: HilbertSpaceSpec) -> Result<Self> {
        let prescale = if spec.weight.is_toric() {
            None
        } else {
            Some(chart::fs_prescale(spec.k, &spec.basis))
        };
        Self::build_with_prescale(spec, prescale)
    }

    /// As [`BergmanModel::build`] with explicit per-basis prescale factors
    /// (ignored for diagonal toric Gram matrices beyond validation).
    pub fn build_with_prescale(spec: HilbertSpaceSpec, prescale: Option<Vec<f64>>) -> Result<Self> {
        let gram = gram_matrix(&spec)?;
        let n = gram.dim();
        let prescale = prescale.unwrap_or_else(|| vec![1.0; n]);
        if prescale.len() != n || prescale.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
            return Err(Error::InvalidArgument(
                "prescale must have one positive entry per basis element".into(),
            ));
        }
        let weight = spec.weight.build();
        let model = match gram.entries {
            GramEntries::LogDiagonal(log_gram) => {
                if let Some(i) = log_gram.iter().position(|g| !g.is_finite()) {
                    return Err(Error::GramNotPositiveDefinite(format!(
                        "diagonal entry {i} is not positive"
                    )));
                }
                Model::Toric { log_gram }
            }
            GramEntries::Dense(g) => Model::Chart {
                factor: orthonormalize(&g, &prescale)?,
                gram: g,
            },
        };
        Ok(Self {
            spec,
            weight,
            quadrature: gram.quadrature,
            model,
        })
    }

    pub fn spec(&self) -> &HilbertSpaceSpec {
        &self.spec
    }

    pub fn k(&self) -> u32 {
        self.spec.k
    }

    pub fn dimension(&self) -> usize {
        self.spec.basis.len()
    }

    pub fn weight(&self) -> &Weight {
        &self.weight
    }

    pub fn is_toric(&self) -> bool {
        matches!(self.model, Model::Toric { .. })
    }

    pub fn quadrature(&self) -> &QuadratureReport {
        &self.quadrature
    }

    /// `ln G_alpha` for toric models.
    pub fn log_gram_diagonal(&self) -> Option<&[f64]> {
        match &self.model {
            Model::Toric { log_gram } => Some(log_gram),
            Model::Chart { .. } => None,
        }
    }

    /// Dense Gram matrix for chart models.
    pub fn dense_gram(&self) -> Option<&DMatrix<Complex64>> {
        match &self.model {
            Model::Chart { gram, .. } => Some(gram),
            Model::Toric { .. } => None,
        }
    }

    pub fn factorization(&self) -> Option<&Factorization> {
        match &self.model {
            Model::Chart { factor, .. } => Some(factor),
            Model::Toric { .. } => None,
        }
    }

    pub fn conditioning(&self) -> Conditioning {
        match &self.model {
            Model::Toric { log_gram } => {
                let hi = log_gram.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let lo = log_gram.iter().cloned().fold(f64::INFINITY, f64::min);
                Conditioning {
                    method: FactorMethod::Diagonal,
                    condition: if log_gram.is_empty() { 1.0 } else { (hi - lo).exp() },
                    discarded: 0,
                }
            }
            Model::Chart { factor, .. } => Conditioning {
                method: factor.method,
                condition: factor.condition,
                discarded: factor.discarded,
            },
        }
    }

    fn check_point(&self, x: [f64; 2]) -> Result<()> {
        if x.iter().all(|c| c.is_finite()) {
            Ok(())
        } else {
            Err(Error::InvalidArgument("evaluation point must be finite".into()))
        }
    }

    /// Orthonormal sections at `x` times `exp(-k phi(x) / 2)`, returned as
    /// `(values, log_scale)` with the true values `values * exp(log_scale)`.
    /// Toric sections are taken at torus angle zero.
    pub fn weighted_sections(&self, x: [f64; 2]) -> (Vec<Complex64>, f64) {
        let k = self.spec.k as f64;
        match &self.model {
            Model::Toric { log_gram } => {
                let logs: Vec<f64> = self
                    .spec
                    .basis
                    .iter()
                    .zip(log_gram)
                    .map(|(a, g)| 0.5 * (toric::dot(a, x) - g))
                    .collect();
                let m = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                if m == f64::NEG_INFINITY {
                    return (vec![Complex64::new(0.0, 0.0); logs.len()], 0.0);
                }
                let vals = logs.iter().map(|l| Complex64::new((l - m).exp(), 0.0)).collect();
                (vals, m - 0.5 * k * self.weight.value(x))
            }
            Model::Chart { factor, .. } => {
                let (u, m) = chart::raw_values(&self.spec.basis, &factor.prescale, x);
                let psi = &factor.whitening * u;
                (psi.iter().cloned().collect(), m - 0.5 * k * self.weight.value(x))
            }
        }
    }

    /// `ln B_k(x)`; `-inf` for an empty basis.
    pub fn log_bergman_at(&self, x: [f64; 2]) -> f64 {
        match &self.model {
            Model::Toric { log_gram } => toric::log_bergman(&self.spec, &self.weight, log_gram, x),
            Model::Chart { .. } => {
                let (v, s) = self.weighted_sections(x);
                let sq: f64 = v.iter().map(|c| c.norm_sqr()).sum();
                if sq > 0.0 {
                    sq.ln() + 2.0 * s
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }

    pub fn bergman_at(&self, x: [f64; 2]) -> f64 {
        self.log_bergman_at(x).exp()
    }

    /// `ln |K_k(x, y)|^2_{k phi}`.
    pub fn log_kernel_norm(&self, x: [f64; 2], y: [f64; 2]) -> f64 {
        match &self.model {
            Model::Toric { log_gram } => {
                toric::log_kernel_norm(&self.spec, &self.weight, log_gram, x, y)
            }
            Model::Chart { .. } => {
                let (vx, sx) = self.weighted_sections(x);
                let (vy, sy) = self.weighted_sections(y);
                let k: Complex64 = vx.iter().zip(&vy).map(|(a, b)| a * b.conj()).sum();
                let n = k.norm_sqr();
                if n > 0.0 {
                    n.ln() + 2.0 * (sx + sy)
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }

    /// `int B_k dvol` under a rule one doubling finer than assembly.
    pub fn mass_identity(&self) -> Result<MassIdentity> {
        let dim = self.dimension();
        let integral = match &self.model {
            Model::Toric { log_gram } => {
                let fine = toric::refined_log_gram(&self.spec, &self.quadrature)?;
                fine.iter().zip(log_gram).map(|(f, g)| (f - g).exp()).sum()
            }
            Model::Chart { .. } => chart::refined_mass(self)?,
        };
        let rel_error = if dim == 0 {
            integral.abs()
        } else {
            (integral - dim as f64).abs() / dim as f64
        };
        Ok(MassIdentity {
            integral,
            dim,
            rel_error,
        })
    }

    /// `A^f = int f psi psi^H |.|^2_{k phi} dvol` in the orthonormal basis
    /// (chart models only). `A^1` is the identity.
    pub fn moment_matrix<F>(&self, f: F) -> Result<DMatrix<Complex64>>
    where
        F: Fn([f64; 2]) -> f64 + Sync,
    {
        match &self.model {
            Model::Chart { .. } => Ok(chart::moment_matrix(self, f)),
            Model::Toric { .. } => Err(Error::WrongDomainKind {
                weight: self.spec.weight.kind_name(),
                domain: "polar chart",
            }),
        }
    }

    /// Largest relative defect of `int |K(x, y)|^2 dvol(y) = B_k(x)` over
    /// `points`, with the `y`-integral taken on the refined rule.
    pub fn reproducing_residual(&self, points: &[[f64; 2]]) -> Result<f64> {
        for &x in points {
            self.check_point(x)?;
        }
        match &self.model {
            Model::Toric { log_gram } => {
                let fine = toric::refined_log_gram(&self.spec, &self.quadrature)?;
                Ok(points
                    .iter()
                    .map(|&x| toric::reproducing_defect(&self.spec, log_gram, &fine, x))
                    .fold(0.0, f64::max))
            }
            Model::Chart { .. } => chart::reproducing_residual(self, points),
        }
    }
}

fn check_domain(model: &BergmanModel, domain: &Domain) -> Result<()> {
    match (model.is_toric(), domain) {
        (true, Domain::VBox { dim, .. }) if *dim == model.weight.dim() => Ok(()),
        (true, Domain::VBox { .. }) => Err(Error::DomainMismatch(format!(
            "{}-dimensional model on a {}-dimensional box",
            model.weight.dim(),
            domain.dim()
        ))),
        (false, Domain::Polar { .. }) => Ok(()),
        _ => Err(Error::WrongDomainKind {
            weight: model.spec.weight.kind_name(),
            domain: domain.kind_name(),
        }),
    }
}

/// `ln B_k` at every node.
pub fn log_bergman_function(model: &BergmanModel, domain: &Domain) -> Result<Vec<f64>> {
    use rayon::prelude::*;
    check_domain(model, domain)?;
    Ok((0..domain.len())
        .into_par_iter()
        .map(|i| model.log_bergman_at(domain.point(i)))
        .collect())
}

/// `B_k` at every node.
pub fn bergman_function(model: &BergmanModel, domain: &Domain) -> Result<GridField> {
    let logs = log_bergman_function(model, domain)?;
    GridField::new(domain.clone(), logs.into_iter().map(f64::exp).collect())
}

/// `|K_k(x, y)|^2_{k phi}`.
pub fn bergman_kernel_norm(model: &BergmanModel, x: [f64; 2], y: [f64; 2]) -> Result<f64> {
    model.check_point(x)?;
    model.check_point(y)?;
    Ok(model.log_kernel_norm(x, y).exp())
}
