//! Experiment configuration: parsing, defaulting and the normalised echo.

use std::fmt;
use std::path::Path;

use plurikit_core::envelope::{EnvelopeParams, SorParams};
use plurikit_core::geometry::truncation_half_width;
use plurikit_core::hilbert::QuadratureParams;
use plurikit_core::{lattice_points, Bump, LatticePolytope, WeightSpec};
use serde::{Deserialize, Serialize};

/// Contact threshold rule used when `tolerances.eps_d` is absent.
pub const EPS_D_RULE: &str = "10 * max(residual, 0.01 * h^2 * kappa), kappa = max |phi''|";

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    /// Dotted path of the offending key.
    pub key: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error at `{}`: {}", self.key, self.message)
    }
}

impl std::error::Error for ConfigError {}

fn bad(key: impl Into<String>, message: impl Into<String>) -> ConfigError {
    ConfigError {
        key: key.into(),
        message: message.into(),
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    weight: RawWeight,
    k: Vec<i64>,
    #[serde(default)]
    grid: RawGrid,
    #[serde(default)]
    tolerances: RawTolerances,
    #[serde(default)]
    gates: RawGates,
    #[serde(default)]
    offdiag: RawOffdiag,
    workers: Option<i64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWeight {
    kind: String,
    polytope: Option<Vec<Vec<i64>>>,
    #[serde(default)]
    bumps: Vec<BumpConfig>,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct BumpConfig {
    pub center: Vec<f64>,
    pub radius: f64,
    pub amplitude: f64,
    pub smoothness: f64,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    h: Option<f64>,
    v_max: Option<f64>,
    r_min: Option<f64>,
    r_max: Option<f64>,
    n_radial: Option<i64>,
    n_theta: Option<i64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTolerances {
    quadrature: Option<f64>,
    truncation: Option<f64>,
    tol_sor: Option<f64>,
    omega: Option<f64>,
    max_sweeps: Option<i64>,
    eps_d: Option<f64>,
    dual_factor: Option<f64>,
    convexity: Option<f64>,
    regularity: Option<f64>,
    tzc_margin: Option<f64>,
    tzc_clearance: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGates {
    l1_max: Option<f64>,
    check_k: Option<i64>,
    mass_rel: Option<f64>,
    off_contact: Option<f64>,
    decay_rel: Option<f64>,
    metric_window: Option<f64>,
    volume_distance: Option<f64>,
    tchebishev_rel: Option<f64>,
    tzc_spread: Option<f64>,
    mass_identity: Option<f64>,
    reproducing: Option<f64>,
    offdiag_disjoint: Option<f64>,
    offdiag_on_d: Option<f64>,
    regularity_ratio: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOffdiag {
    f: Option<TestFunction>,
    g: Option<TestFunction>,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct TestFunction {
    pub center: [f64; 2],
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightConfig {
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub polytope: Option<Vec<Vec<i64>>>,
    pub bumps: Vec<BumpConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridConfig {
    /// Toric box spacing.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v_max: Option<f64>,
    /// Box half-width given by the truncation formula at the largest level.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v_formula: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_radial: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_theta: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Tolerances {
    pub quadrature: f64,
    pub truncation: f64,
    pub tol_sor: f64,
    pub omega: f64,
    pub max_sweeps: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps_d: Option<f64>,
    pub eps_d_rule: String,
    pub dual_factor: f64,
    pub convexity: f64,
    pub regularity: f64,
    pub tzc_margin: f64,
    /// Distance the fit window keeps from the complement of the contact set.
    pub tzc_clearance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Gates {
    pub l1_max: f64,
    /// Level at which the single-level gates are read.
    pub check_k: u32,
    pub mass_rel: f64,
    pub off_contact: f64,
    pub decay_rel: f64,
    pub metric_window: f64,
    pub volume_distance: f64,
    pub tchebishev_rel: f64,
    pub tzc_spread: f64,
    pub mass_identity: f64,
    pub reproducing: f64,
    pub offdiag_disjoint: f64,
    pub offdiag_on_d: f64,
    pub regularity_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OffdiagConfig {
    pub f: TestFunction,
    pub g: TestFunction,
}

/// Fully defaulted configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Config {
    pub weight: WeightConfig,
    pub k: Vec<u32>,
    pub workers: usize,
    pub grid: GridConfig,
    pub tolerances: Tolerances,
    pub gates: Gates,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub offdiag: Option<OffdiagConfig>,
    pub warnings: Vec<String>,
    #[serde(skip)]
    pub spec: WeightSpec,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| bad("<file>", format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| {
            let msg = e.message().to_string();
            let key = e
                .span()
                .map(|s| key_at(text, s.start))
                .unwrap_or_else(|| "<root>".into());
            bad(key, msg)
        })?;
        resolve(raw)
    }

    pub fn is_toric(&self) -> bool {
        self.spec.is_toric()
    }

    pub fn dim(&self) -> usize {
        self.spec.dim()
    }

    pub fn max_k(&self) -> u32 {
        *self.k.last().expect("k is never empty")
    }

    pub fn polytope(&self) -> Option<&LatticePolytope> {
        self.spec.polytope()
    }

    pub fn quadrature(&self) -> QuadratureParams {
        QuadratureParams {
            tol: self.tolerances.quadrature,
            truncation_tol: self.tolerances.truncation,
            ..QuadratureParams::default()
        }
    }

    pub fn envelope_params(&self) -> EnvelopeParams {
        EnvelopeParams {
            dual_factor: self.tolerances.dual_factor,
            eps_d: self.tolerances.eps_d,
            ..EnvelopeParams::default()
        }
    }

    pub fn sor_params(&self) -> SorParams {
        SorParams {
            omega: self.tolerances.omega,
            tol_rel: self.tolerances.tol_sor,
            max_sweeps: self.tolerances.max_sweeps,
            eps_d: self.tolerances.eps_d,
        }
    }

    /// The normalised echo as TOML.
    pub fn echo(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }
}

/// Best-effort name of the key whose value starts near `offset`.
fn key_at(text: &str, offset: usize) -> String {
    let line_start = text[..offset.min(text.len())].rfind('\n').map_or(0, |p| p + 1);
    let line = text[line_start..].lines().next().unwrap_or("");
    let mut section = String::new();
    for l in text[..line_start].lines() {
        let t = l.trim();
        if t.starts_with('[') {
            section = t.trim_matches(|c| c == '[' || c == ']').to_string();
        }
    }
    let key = line.split('=').next().unwrap_or("").trim();
    match (section.is_empty(), key.is_empty() || key.starts_with('[')) {
        (_, true) if !section.is_empty() => section,
        (_, true) => "<root>".into(),
        (true, false) => key.into(),
        (false, false) => format!("{section}.{key}"),
    }
}

fn positive(key: &str, v: Option<f64>, default: f64) -> Result<f64, ConfigError> {
    let x = v.unwrap_or(default);
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(bad(key, format!("must be a positive number, got {x}")))
    }
}

fn count(key: &str, v: Option<i64>, default: usize, min: usize) -> Result<usize, ConfigError> {
    match v {
        None => Ok(default),
        Some(n) if n >= min as i64 => Ok(n as usize),
        Some(n) => Err(bad(key, format!("must be an integer of at least {min}, got {n}"))),
    }
}

fn build_bump(i: usize, b: &BumpConfig, dim: usize) -> Result<Bump, ConfigError> {
    let key = format!("weight.bumps[{i}]");
    if b.center.len() != dim {
        return Err(bad(
            format!("{key}.center"),
            format!("needs {dim} coordinate(s), got {}", b.center.len()),
        ));
    }
    let c = [b.center[0], b.center.get(1).copied().unwrap_or(0.0)];
    Bump::new(c, b.radius, b.amplitude, b.smoothness).map_err(|e| bad(key, e.to_string()))
}

fn resolve(raw: RawConfig) -> Result<Config, ConfigError> {
    let mut warnings = Vec::new();

    let w = &raw.weight;
    let toric = match w.kind.as_str() {
        "toric" | "perturbed_toric" => true,
        "fs_chart" | "perturbed_chart" => false,
        other => {
            return Err(bad(
                "weight.kind",
                format!(
                    "unknown kind `{other}` (expected toric, perturbed_toric, fs_chart or perturbed_chart)"
                ),
            ))
        }
    };
    let perturbed = w.kind.starts_with("perturbed");
    if !perturbed && !w.bumps.is_empty() {
        return Err(bad("weight.bumps", format!("kind `{}` takes no bumps", w.kind)));
    }
    if perturbed && w.bumps.is_empty() {
        return Err(bad("weight.bumps", "a perturbed weight needs at least one bump"));
    }
    let polytope = if toric {
        let verts = w
            .polytope
            .as_ref()
            .ok_or_else(|| bad("weight.polytope", "toric weights need polytope vertices"))?;
        Some(LatticePolytope::new(verts).map_err(|e| bad("weight.polytope", e.to_string()))?)
    } else {
        if w.polytope.is_some() {
            return Err(bad("weight.polytope", "chart weights take no polytope"));
        }
        None
    };
    let dim = polytope.as_ref().map_or(2, LatticePolytope::dim);
    let bumps = w
        .bumps
        .iter()
        .enumerate()
        .map(|(i, b)| build_bump(i, b, dim))
        .collect::<Result<Vec<_>, _>>()?;
    let spec = match (&polytope, perturbed) {
        (Some(p), false) => WeightSpec::ToricPotential(p.clone()),
        (Some(p), true) => WeightSpec::PerturbedToric {
            polytope: p.clone(),
            bumps: bumps.clone(),
        },
        (None, false) => WeightSpec::FsChart,
        (None, true) => WeightSpec::PerturbedChart {
            bumps: bumps.clone(),
        },
    };

    if raw.k.is_empty() {
        return Err(bad("k", "needs at least one level"));
    }
    let mut ks = Vec::with_capacity(raw.k.len());
    for &k in &raw.k {
        if k < 1 || k > u32::MAX as i64 {
            return Err(bad("k", format!("levels must be positive integers, got {k}")));
        }
        ks.push(k as u32);
    }
    if ks.windows(2).any(|p| p[1] <= p[0]) {
        return Err(bad("k", "levels must be strictly increasing"));
    }
    let max_k = *ks.last().unwrap();

    let t = &raw.tolerances;
    let tolerances = Tolerances {
        quadrature: positive("tolerances.quadrature", t.quadrature, 1e-10)?,
        truncation: positive("tolerances.truncation", t.truncation, 1e-10)?,
        tol_sor: positive("tolerances.tol_sor", t.tol_sor, 1e-10)?,
        omega: {
            let o = t.omega.unwrap_or(1.5);
            if !(o > 0.0 && o < 2.0) {
                return Err(bad("tolerances.omega", format!("must lie in (0, 2), got {o}")));
            }
            o
        },
        max_sweeps: count("tolerances.max_sweeps", t.max_sweeps, 1_000_000, 1)?,
        eps_d: match t.eps_d {
            None => None,
            Some(e) => Some(positive("tolerances.eps_d", Some(e), 1.0)?),
        },
        eps_d_rule: match t.eps_d {
            None => EPS_D_RULE.into(),
            Some(_) => "fixed".into(),
        },
        dual_factor: {
            let f = t.dual_factor.unwrap_or(4.0);
            if !(f >= 1.0 && f.is_finite()) {
                return Err(bad("tolerances.dual_factor", format!("must be at least 1, got {f}")));
            }
            f
        },
        convexity: positive("tolerances.convexity", t.convexity, 1e-6)?,
        regularity: positive("tolerances.regularity", t.regularity, 1e-6)?,
        tzc_margin: positive("tolerances.tzc_margin", t.tzc_margin, 0.05)?,
        tzc_clearance: positive("tolerances.tzc_clearance", t.tzc_clearance, 1.5)?,
    };

    let g = &raw.grid;
    let grid = if let Some(p) = &polytope {
        for (key, v) in [("grid.r_min", g.r_min), ("grid.r_max", g.r_max)] {
            if v.is_some() {
                return Err(bad(key, "polar keys apply to chart weights only"));
            }
        }
        if g.n_radial.is_some() || g.n_theta.is_some() {
            return Err(bad("grid.n_radial", "polar keys apply to chart weights only"));
        }
        let h = positive("grid.h", g.h, if dim == 1 { 0.01 } else { 0.1 })?;
        let dim_top = lattice_points(p, max_k as i64)
            .map_err(|e| bad("weight.polytope", e.to_string()))?
            .len();
        let v_formula = truncation_half_width(&spec, max_k, dim_top, tolerances.truncation);
        let v_max = positive("grid.v_max", g.v_max, v_formula)?;
        if v_max < 2.0 * h {
            return Err(bad("grid.v_max", format!("box half-width {v_max} is below two steps")));
        }
        for (i, b) in bumps.iter().enumerate() {
            if b.extent(dim) > v_max {
                warnings.push(format!(
                    "weight.bumps[{i}] reaches {:.6} beyond the box edge {v_max}",
                    b.extent(dim)
                ));
            }
        }
        GridConfig {
            h: Some(h),
            v_max: Some(v_max),
            v_formula: Some(v_formula),
            r_min: None,
            r_max: None,
            n_radial: None,
            n_theta: None,
        }
    } else {
        if g.h.is_some() || g.v_max.is_some() {
            return Err(bad("grid.h", "box keys apply to toric weights only"));
        }
        let r_min = positive("grid.r_min", g.r_min, 0.02)?;
        let r_max = positive("grid.r_max", g.r_max, 50.0)?;
        if r_max <= r_min {
            return Err(bad("grid.r_max", format!("must exceed r_min = {r_min}")));
        }
        let n_theta = count("grid.n_theta", g.n_theta, 96, 4)?;
        if n_theta % 2 != 0 {
            return Err(bad("grid.n_theta", format!("must be even, got {n_theta}")));
        }
        let n_radial = count("grid.n_radial", g.n_radial, 96, 5)?;
        for (i, b) in bumps.iter().enumerate() {
            if b.extent(2) > 0.5 * r_max {
                warnings.push(format!(
                    "weight.bumps[{i}] reaches {:.6}, beyond half the outer radius {r_max}",
                    b.extent(2)
                ));
            }
        }
        GridConfig {
            h: None,
            v_max: None,
            v_formula: None,
            r_min: Some(r_min),
            r_max: Some(r_max),
            n_radial: Some(n_radial),
            n_theta: Some(n_theta),
        }
    };

    let gr = &raw.gates;
    let check_k = match gr.check_k {
        None if ks.contains(&512) => 512,
        None => max_k,
        Some(k) if k >= 1 && ks.contains(&(k as u32)) => k as u32,
        Some(k) => return Err(bad("gates.check_k", format!("level {k} is not in `k`"))),
    };
    let gates = Gates {
        l1_max: positive("gates.l1_max", gr.l1_max, 0.1)?,
        check_k,
        mass_rel: positive("gates.mass_rel", gr.mass_rel, 0.01)?,
        off_contact: positive("gates.off_contact", gr.off_contact, 0.01)?,
        decay_rel: positive("gates.decay_rel", gr.decay_rel, 0.05)?,
        metric_window: {
            let f = gr.metric_window.unwrap_or(0.6);
            if !(f > 0.0 && f <= 1.0) {
                return Err(bad("gates.metric_window", format!("must lie in (0, 1], got {f}")));
            }
            f
        },
        volume_distance: positive("gates.volume_distance", gr.volume_distance, 0.02)?,
        tchebishev_rel: positive("gates.tchebishev_rel", gr.tchebishev_rel, 0.05)?,
        tzc_spread: positive("gates.tzc_spread", gr.tzc_spread, 0.1)?,
        mass_identity: positive("gates.mass_identity", gr.mass_identity, 1e-6)?,
        reproducing: positive("gates.reproducing", gr.reproducing, 1e-6)?,
        offdiag_disjoint: positive("gates.offdiag_disjoint", gr.offdiag_disjoint, 0.05)?,
        offdiag_on_d: positive("gates.offdiag_on_d", gr.offdiag_on_d, 0.1)?,
        regularity_ratio: positive("gates.regularity_ratio", gr.regularity_ratio, 1.2)?,
    };

    let offdiag = if toric {
        if raw.offdiag.f.is_some() || raw.offdiag.g.is_some() {
            return Err(bad("offdiag", "test functions apply to chart weights only"));
        }
        None
    } else {
        let check = |key: &str, t: TestFunction| -> Result<TestFunction, ConfigError> {
            if t.radius > 0.0 && t.radius.is_finite() && t.center.iter().all(|c| c.is_finite()) {
                Ok(t)
            } else {
                Err(bad(key, "needs a finite centre and a positive radius"))
            }
        };
        Some(OffdiagConfig {
            f: check(
                "offdiag.f",
                raw.offdiag.f.unwrap_or(TestFunction {
                    center: [0.0, 0.0],
                    radius: 0.9,
                }),
            )?,
            g: check(
                "offdiag.g",
                raw.offdiag.g.unwrap_or(TestFunction {
                    center: [-3.0, 0.0],
                    radius: 1.5,
                }),
            )?,
        })
    };

    let workers = count("workers", raw.workers, 1, 1)?;

    Ok(Config {
        weight: WeightConfig {
            kind: w.kind.clone(),
            polytope: w.polytope.clone(),
            bumps: w.bumps.clone(),
        },
        k: ks,
        workers,
        grid,
        tolerances,
        gates,
        offdiag,
        warnings,
        spec,
    })
}
