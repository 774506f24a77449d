//! Quantitative reports over lists of levels `k`: convergence of the
//! Bergman function to the equilibrium density, exponential decay off the
//! contact set, Bergman metrics and volume forms, the first expansion
//! coefficient, off-diagonal concentration and the capacity limit.

mod expansion;

pub use expansion::{
    offdiag_concentration, tchebishev_estimate, tzc_fit, OffDiagReport, TchebishevReport,
    TchebishevRow, TestBump, TzcPair, TzcReport,
};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{Domain, GridField};
use crate::hilbert::{log_bergman_function, BergmanModel};
use crate::mongeampere::reference_weights;

/// Nodes with `k (phi - phi_e)` beyond this are left out of decay fits.
pub const UNDERFLOW_EXPONENT: f64 = 700.0;

#[derive(Debug, Clone)]
pub struct BergmanLevel {
    pub k: u32,
    pub dim: usize,
    pub log_b: GridField,
}

impl BergmanLevel {
    /// `ln(k^{-n} B_k)` at node `i`.
    pub fn log_density(&self, n: usize, i: usize) -> f64 {
        self.log_b.get(i) - n as f64 * (self.k as f64).ln()
    }
}

/// `ln B_k` on a common grid for several levels.
#[derive(Debug, Clone)]
pub struct BergmanSeries {
    /// Complex dimension.
    pub n: usize,
    pub levels: Vec<BergmanLevel>,
}

impl BergmanSeries {
    /// Evaluates every model on `domain`; models must share one weight and
    /// be listed in increasing `k`.
    pub fn evaluate(models: &[BergmanModel], domain: &Domain) -> Result<Self> {
        if models.is_empty() {
            return Err(Error::InvalidArgument("no levels given".into()));
        }
        let first = models[0].spec();
        for (i, m) in models.iter().enumerate() {
            if m.spec().weight != first.weight {
                return Err(Error::InvalidArgument(format!("level {i} uses a different weight")));
            }
            if i > 0 && m.k() <= models[i - 1].k() {
                return Err(Error::InvalidArgument("levels must increase".into()));
            }
        }
        let n = if models[0].is_toric() {
            first.weight.dim()
        } else {
            1
        };
        let levels = models
            .par_iter()
            .map(|m| {
                let logs = log_bergman_function(m, domain)?;
                Ok(BergmanLevel {
                    k: m.k(),
                    dim: m.dimension(),
                    log_b: GridField::new(domain.clone(), logs)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { n, levels })
    }

    pub fn domain(&self) -> &Domain {
        self.levels[0].log_b.domain()
    }

    pub fn level(&self, k: u32) -> Option<&BergmanLevel> {
        self.levels.iter().find(|l| l.k == k)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub k: u32,
    /// `int |k^{-n} B_k - target| dmu`.
    pub l1_error: f64,
    /// `int (k^{-n} B_k - target) dmu`.
    pub signed_gap: f64,
    /// Largest `k^{-n} B_k / target` where `target >= 1e-3 max target`.
    pub sup_ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    pub l1_decreasing: bool,
    /// `sup_ratio - 1` non-increasing in `k`.
    pub morse_nonincreasing: bool,
}

/// Distance of `k^{-n} B_k` from an equilibrium density under the reference
/// measure of `reference`.
pub fn convergence_table(
    series: &BergmanSeries,
    target: &GridField,
    reference: &GridField,
) -> Result<ConvergenceTable> {
    series.levels[0].log_b.check_same_domain(target)?;
    target.check_same_domain(reference)?;
    let w = reference_weights(reference)?;
    let t = target.values();
    let floor = 1e-3 * target.max();
    let rows: Vec<ConvergenceRow> = series
        .levels
        .par_iter()
        .map(|lvl| {
            let (mut l1, mut signed) = (0.0, 0.0);
            let mut sup = f64::NEG_INFINITY;
            for i in 0..t.len() {
                if w[i] == 0.0 {
                    continue;
                }
                let b = lvl.log_density(series.n, i).exp();
                l1 += (b - t[i]).abs() * w[i];
                signed += (b - t[i]) * w[i];
                if t[i] >= floor && t[i] > 0.0 {
                    sup = sup.max(b / t[i]);
                }
            }
            ConvergenceRow {
                k: lvl.k,
                l1_error: l1,
                signed_gap: signed,
                sup_ratio: sup,
            }
        })
        .collect();
    let l1_decreasing = rows.windows(2).all(|w| w[1].l1_error < w[0].l1_error);
    let morse_nonincreasing = rows.windows(2).all(|w| w[1].sup_ratio <= w[0].sup_ratio);
    Ok(ConvergenceTable {
        rows,
        l1_decreasing,
        morse_nonincreasing,
    })
}

#[derive(Debug, Clone)]
pub struct DecayLevel {
    pub k: u32,
    /// `-(1/k) ln(k^{-n} B_k)`.
    pub profile: GridField,
    /// Extremes of `profile - (phi - phi_e)` over the window.
    pub bracket_min: f64,
    pub bracket_max: f64,
    /// Window nodes left out because `k (phi - phi_e)` exceeds the
    /// underflow exponent.
    pub excluded: usize,
}

#[derive(Debug, Clone)]
pub struct DecayReport {
    pub levels: Vec<DecayLevel>,
    /// Smallest `C` with `-C/k <= profile - (phi - phi_e) <= (n ln k + C)/k`
    /// on every level.
    pub fitted_c: f64,
}

/// Decay profile of `B_k` against the envelope defect `phi - phi_e`, over
/// `window` (all nodes when `None`).
pub fn decay_profile(
    series: &BergmanSeries,
    phi: &GridField,
    phi_e: &GridField,
    window: Option<&[bool]>,
) -> Result<DecayReport> {
    phi.check_same_domain(phi_e)?;
    series.levels[0].log_b.check_same_domain(phi)?;
    let defect = phi.sub(phi_e)?;
    let n = series.n as f64;
    let inside = |i: usize| window.is_none_or(|w| w[i]);
    let mut fitted_c: f64 = 0.0;
    let mut levels = Vec::with_capacity(series.levels.len());
    for lvl in &series.levels {
        let k = lvl.k as f64;
        let profile = GridField::from_fn(phi.domain().clone(), |i| {
            -lvl.log_density(series.n, i) / k
        })?;
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        let mut excluded = 0;
        for i in 0..phi.len() {
            if !inside(i) {
                continue;
            }
            if k * defect.get(i) > UNDERFLOW_EXPONENT {
                excluded += 1;
                continue;
            }
            let b = profile.get(i) - defect.get(i);
            lo = lo.min(b);
            hi = hi.max(b);
            fitted_c = fitted_c.max(-k * b).max(k * b - n * k.ln());
        }
        levels.push(DecayLevel {
            k: lvl.k,
            profile,
            bracket_min: lo,
            bracket_max: hi,
            excluded,
        });
    }
    Ok(DecayReport { levels, fitted_c })
}

/// `(1/k) ln K_k(x, x) = phi + (1/k) ln B_k` in the fixed trivialisation.
pub fn bergman_metric_field(level: &BergmanLevel, phi: &GridField) -> Result<GridField> {
    level.log_b.check_same_domain(phi)?;
    let k = level.k as f64;
    level.log_b.zip_with(phi, |lb, p| p + lb / k)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub k: u32,
    /// Largest `|metric - phi_e|` on the window.
    pub sup_distance: f64,
    /// `(2 n ln k + C) / k`.
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub rows: Vec<MetricRow>,
    /// Fitted on the smallest level.
    pub fitted_c: f64,
    pub pass: bool,
}

/// Uniform distance of the Bergman metrics to `phi_e` on the central
/// `window_fraction` of the grid, gated by `(2 n ln k + C)/k` with `C`
/// fitted on the first level.
pub fn metric_report(
    series: &BergmanSeries,
    phi: &GridField,
    phi_e: &GridField,
    window_fraction: f64,
) -> Result<MetricReport> {
    phi.check_same_domain(phi_e)?;
    let window = phi.domain().central_window(window_fraction);
    let n = series.n as f64;
    let mut dists = Vec::with_capacity(series.levels.len());
    for lvl in &series.levels {
        let field = bergman_metric_field(lvl, phi)?;
        let d = (0..phi.len())
            .filter(|&i| window[i])
            .map(|i| (field.get(i) - phi_e.get(i)).abs())
            .fold(0.0, f64::max);
        dists.push(d);
    }
    let k0 = series.levels[0].k as f64;
    let fitted_c = k0 * dists[0] - 2.0 * n * k0.ln();
    let rows: Vec<MetricRow> = series
        .levels
        .iter()
        .zip(&dists)
        .map(|(lvl, &d)| {
            let k = lvl.k as f64;
            MetricRow {
                k: lvl.k,
                sup_distance: d,
                bound: (2.0 * n * k.ln() + fitted_c) / k,
            }
        })
        .collect();
    let pass = rows
        .iter()
        .all(|r| r.sup_distance <= r.bound + 1e-12 * r.bound.abs().max(1.0));
    Ok(MetricReport {
        rows,
        fitted_c,
        pass,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct VolumeDistance {
    pub k: u32,
    /// Largest gap between the slope distribution functions.
    pub distance: f64,
    /// Total slope range of the Bergman metric.
    pub mass: f64,
    /// Total slope range of `phi_e`.
    pub limit_mass: f64,
}

fn running_slopes(values: &[f64], h: f64) -> Vec<f64> {
    let mut best = f64::NEG_INFINITY;
    values
        .windows(2)
        .map(|w| {
            best = best.max((w[1] - w[0]) / h);
            best
        })
        .collect()
}

/// Weak distance between the Bergman volume form at level `k` and the
/// equilibrium measure on a 1-D box: the sup distance between the running
/// maxima of the forward slopes of the Bergman metric and of `phi_e`.
pub fn bergman_volume_distance(
    level: &BergmanLevel,
    phi: &GridField,
    phi_e: &GridField,
) -> Result<VolumeDistance> {
    phi.check_same_domain(phi_e)?;
    let d = phi.domain();
    if !matches!(d, Domain::VBox { dim: 1, .. }) {
        return Err(Error::WrongDomainKind {
            weight: "volume-form distance",
            domain: d.kind_name(),
        });
    }
    let h = d.spacing()[0];
    let field = bergman_metric_field(level, phi)?;
    let fk = running_slopes(field.values(), h);
    let fi = running_slopes(phi_e.values(), h);
    let distance = fk
        .iter()
        .zip(&fi)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let span = |f: &[f64]| f[f.len() - 1] - f[0];
    Ok(VolumeDistance {
        k: level.k,
        distance,
        mass: span(&fk),
        limit_mass: span(&fi),
    })
}
