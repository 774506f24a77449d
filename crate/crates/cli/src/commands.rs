//! The seven experiment commands.

use plurikit_core::asymptotics::{
    bergman_volume_distance, convergence_table, decay_profile, metric_report, offdiag_concentration,
    tchebishev_estimate, tzc_fit, BergmanSeries, TestBump,
};
use plurikit_core::envelope::{
    chart_boundary_data, convex_envelope_1d, radial_oracle, regularity_probe, sor_envelope,
    toric_equilibrium, EnvelopeResult,
};
use plurikit_core::hilbert::bergman_function;
use plurikit_core::mongeampere::{equilibrium_measure, ma_ratio, volume_report, EquilibriumMeasure};
use plurikit_core::numeric::ln_beta_int;
use plurikit_core::{
    eval_weight, hessian_field, lattice_points, lattice_volume, BergmanModel, Domain, GridField, HilbertSpaceSpec,
    WeightSpec,
};
use rayon::prelude::*;

use crate::config::{Config, ConfigError, TestFunction};
use crate::output::{num, Gate, Outcome, Table};
use crate::{Clock, RunError, Stage};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Envelope,
    Bergman,
    Converge,
    Volume,
    Expansion,
    Capacity,
    Offdiag,
}

impl Command {
    pub const ALL: [Command; 7] = [
        Command::Envelope,
        Command::Bergman,
        Command::Converge,
        Command::Volume,
        Command::Expansion,
        Command::Capacity,
        Command::Offdiag,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Command::Envelope => "envelope",
            Command::Bergman => "bergman",
            Command::Converge => "converge",
            Command::Volume => "volume",
            Command::Expansion => "expansion",
            Command::Capacity => "capacity",
            Command::Offdiag => "offdiag",
        }
    }
}

pub fn run_command(command: Command, cfg: &Config, clock: &mut Clock) -> Result<Outcome, RunError> {
    match command {
        Command::Envelope => envelope(cfg, clock),
        Command::Bergman => bergman(cfg, clock),
        Command::Converge => converge(cfg, clock),
        Command::Volume => volume(cfg, clock),
        Command::Expansion => expansion(cfg, clock),
        Command::Capacity => capacity(cfg, clock),
        Command::Offdiag => offdiag(cfg, clock),
    }
}

/// Weight, reference potential, envelope and equilibrium measure on the
/// configured grid.
pub struct Pipeline {
    pub phi: GridField,
    pub reference: GridField,
    pub env: EnvelopeResult,
    pub eq: EquilibriumMeasure,
}

impl Pipeline {
    pub fn domain(&self) -> &Domain {
        self.phi.domain()
    }
}

fn toric_domain(cfg: &Config, h: f64) -> Result<Domain, RunError> {
    Domain::v_box(cfg.dim(), cfg.grid.v_max.expect("toric grid"), h).at("grid")
}

fn chart_domain(cfg: &Config) -> Result<Domain, RunError> {
    let g = &cfg.grid;
    Domain::polar(
        g.r_min.expect("chart grid"),
        g.r_max.expect("chart grid"),
        g.n_radial.expect("chart grid"),
        g.n_theta.expect("chart grid"),
    )
    .at("grid")
}

fn toric_pipeline(cfg: &Config, h: f64, clock: &mut Clock) -> Result<Pipeline, RunError> {
    let p = cfg.polytope().expect("toric config");
    let d = toric_domain(cfg, h)?;
    let phi = eval_weight(&cfg.spec, &d).at("weight")?;
    let reference = eval_weight(&WeightSpec::ToricPotential(p.clone()), &d).at("weight")?;
    let env = clock
        .time("envelope", || toric_equilibrium(&phi, p, &cfg.envelope_params()))
        .at("envelope")?;
    let eq = clock
        .time("equilibrium", || equilibrium_measure(&env, &phi, &reference))
        .at("equilibrium")?;
    Ok(Pipeline {
        phi,
        reference,
        env,
        eq,
    })
}

fn chart_pipeline(cfg: &Config, clock: &mut Clock) -> Result<Pipeline, RunError> {
    let d = chart_domain(cfg)?;
    let phi = eval_weight(&cfg.spec, &d).at("weight")?;
    let reference = eval_weight(&WeightSpec::FsChart, &d).at("weight")?;
    let data = clock
        .time("boundary", || chart_boundary_data(&cfg.spec, &d))
        .at("boundary")?;
    let env = clock
        .time("envelope", || sor_envelope(&phi, &data, &cfg.sor_params()))
        .at("envelope")?;
    let eq = clock
        .time("equilibrium", || equilibrium_measure(&env, &phi, &reference))
        .at("equilibrium")?;
    Ok(Pipeline {
        phi,
        reference,
        env,
        eq,
    })
}

pub fn pipeline(cfg: &Config, clock: &mut Clock) -> Result<Pipeline, RunError> {
    if cfg.is_toric() {
        toric_pipeline(cfg, cfg.grid.h.expect("toric grid"), clock)
    } else {
        chart_pipeline(cfg, clock)
    }
}

/// One model per level, built concurrently and returned in level order.
pub fn models(cfg: &Config, clock: &mut Clock) -> Result<Vec<BergmanModel>, RunError> {
    clock
        .time("models", || {
            cfg.k
                .par_iter()
                .map(|&k| {
                    let spec = HilbertSpaceSpec::new(cfg.spec.clone(), k)?.with_quadrature(cfg.quadrature());
                    BergmanModel::build(spec)
                })
                .collect::<plurikit_core::Result<Vec<_>>>()
        })
        .at("models")
}

fn series(models: &[BergmanModel], d: &Domain, clock: &mut Clock) -> Result<BergmanSeries, RunError> {
    clock
        .time("bergman", || BergmanSeries::evaluate(models, d))
        .at("bergman")
}

/// Mass of the equilibrium measure predicted by the weight class.
fn expected_mass(cfg: &Config) -> f64 {
    cfg.polytope().map_or(1.0, lattice_volume)
}

fn is_fs_segment(cfg: &Config) -> bool {
    match &cfg.spec {
        WeightSpec::ToricPotential(p) if p.dim() == 1 => {
            let (lo, hi) = p.bounding_box();
            lo[0] == 0 && hi[0] == 1
        }
        _ => false,
    }
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn coords_columns(d: &Domain) -> Vec<&'static str> {
    match (d, d.dim()) {
        (Domain::Polar { .. }, _) => vec!["x", "y"],
        (_, 1) => vec!["v"],
        _ => vec!["v1", "v2"],
    }
}

fn coords_row(d: &Domain, i: usize) -> Vec<String> {
    let p = d.point(i);
    match (d, d.dim()) {
        (Domain::Polar { .. }, _) => vec![num(p[0]), num(p[1])],
        (_, 1) => vec![num(p[0])],
        _ => vec![num(p[0]), num(p[1])],
    }
}

fn minorant_gate(p: &Pipeline) -> Gate {
    let excess = p.env.phi_e.sub(&p.phi).map(|f| f.max()).unwrap_or(f64::INFINITY);
    let scale = p.phi.max_abs().max(1.0);
    Gate::at_most("envelope_minorant", excess.max(0.0), 1e-9 * scale)
}

fn measure_gates(cfg: &Config, p: &Pipeline) -> Result<Vec<Gate>, RunError> {
    let eq = &p.eq;
    let mut gates = vec![Gate::at_most(
        "off_contact_mass",
        eq.off_contact_mass,
        cfg.gates.off_contact * eq.mass,
    )];
    // finite-difference Hessians of convex functions are only convex up to
    // h^2 times the curvature scale in two dimensions
    let hess = hessian_field(&p.phi).at("hessian")?;
    let curv = hess.eig_max.as_ref().unwrap_or(&hess.second);
    let kappa = (0..p.phi.len())
        .filter(|&i| hess.trusted[i])
        .map(|i| curv.get(i).abs())
        .fold(0.0, f64::max);
    let h = p.domain().max_spacing();
    let allowance = if p.domain().dim() == 2 { h * h * kappa } else { 0.0 };
    // no node lies two steps inside a contact set made of slivers
    let eig = if eq.contact_eig_min.is_finite() { eq.contact_eig_min } else { 0.0 };
    gates.push(Gate::at_least(
        "contact_eig_min",
        eig,
        -(cfg.tolerances.convexity + allowance),
    ));
    Ok(gates)
}

fn diagnostics(p: &Pipeline) -> Table {
    let mut t = Table::new("diagnostics", 1, &["quantity", "value"]);
    let env = &p.env;
    let eq = &p.eq;
    let rows = [
        ("nodes", p.phi.len() as f64),
        ("contact_nodes", env.contact.count() as f64),
        ("iterations", env.iterations as f64),
        ("residual", env.residual),
        ("eps_d", env.eps_d),
        ("boundary_gap", env.boundary_gap),
        ("mass", eq.mass),
        ("off_contact_mass", eq.off_contact_mass),
        ("clamped_mass", eq.clamped_mass),
        ("identity_l1", eq.identity_l1),
        ("mismatch_fraction", eq.mismatch_fraction),
        ("contact_eig_min", eq.contact_eig_min),
    ];
    t.push(vec!["method".into(), env.method.as_str().into()]);
    for (name, v) in rows {
        t.push(vec![name.into(), num(v)]);
    }
    t
}

fn envelope(cfg: &Config, clock: &mut Clock) -> Result<Outcome, RunError> {
    let mut out = Outcome::default();
    let p = pipeline(cfg, clock)?;
    let d = p.domain().clone();

    let mut cols = coords_columns(&d);
    cols.extend(["phi", "phi_e", "contact", "density"]);
    let mut t = Table::new("envelope", 1, &cols);
    for i in 0..d.len() {
        let mut row = coords_row(&d, i);
        row.extend([
            num(p.phi.get(i)),
            num(p.env.phi_e.get(i)),
            (p.env.contact.get(i) as u8).to_string(),
            num(p.eq.density.get(i)),
        ]);
        t.push(row);
    }
    out.tables.push(t);
    out.tables.push(diagnostics(&p));
    out.gates.push(minorant_gate(&p));

    if let Some(poly) = cfg.polytope() {
        let h = d.max_spacing();
        let bound = 2.0 * h * poly.diameter();
        if d.dim() == 1 {
            let xs: Vec<f64> = (0..d.len()).map(|i| d.point(i)[0]).collect();
            let hull = convex_envelope_1d(&xs, p.phi.values()).at("hull oracle")?;
            out.gates.push(Gate::at_most(
                "hull_oracle",
                sup_diff(&hull, p.env.phi_e.values()),
                bound,
            ));
        }
        let twice = clock
            .time("idempotence", || toric_equilibrium(&p.env.phi_e, poly, &cfg.envelope_params()))
            .at("idempotence")?;
        out.gates.push(Gate::at_most(
            "idempotence",
            sup_diff(twice.phi_e.values(), p.env.phi_e.values()),
            bound,
        ));
        out.gates.extend(measure_gates(cfg, &p)?);

        let h0 = cfg.grid.h.expect("toric grid");
        let fine = clock.time("regularity", || -> Result<Vec<(GridField, GridField)>, RunError> {
            [h0 / 2.0, h0 / 4.0]
                .iter()
                .map(|&h| {
                    let d = toric_domain(cfg, h)?;
                    let phi = eval_weight(&cfg.spec, &d).at("regularity")?;
                    let env = toric_equilibrium(&phi, poly, &cfg.envelope_params()).at("regularity")?;
                    Ok((phi, env.phi_e))
                })
                .collect()
        })?;
        let levels: Vec<(&GridField, &GridField)> = std::iter::once((&p.phi, &p.env.phi_e))
            .chain(fine.iter().map(|(a, b)| (a, b)))
            .collect();
        let reg = regularity_probe(&levels, cfg.tolerances.regularity).at("regularity")?;
        let mut t = Table::new("regularity", 1, &["h", "second_max", "lipschitz"]);
        for l in &reg.levels {
            t.push(vec![num(l.h), num(l.second_max), num(l.lipschitz)]);
        }
        out.tables.push(t);
        let worst = reg.levels.iter().map(|l| l.second_max).fold(0.0, f64::max);
        let ratio = reg.second_ratio.max(reg.lipschitz_ratio);
        out.gates.push(Gate::check(
            "regularity",
            ratio <= cfg.gates.regularity_ratio
                && worst <= cfg.gates.regularity_ratio * reg.phi_second_max + cfg.tolerances.regularity,
            format!(
                "ratio={} threshold={} second_max={} phi_second_max={}",
                num(ratio),
                num(cfg.gates.regularity_ratio),
                num(worst),
                num(reg.phi_second_max)
            ),
        ));
    } else {
        if cfg.spec.is_circle_invariant() {
            let oracle = radial_oracle(&cfg.spec, &d).at("radial oracle")?;
            let h = d.max_spacing();
            out.gates.push(Gate::at_most(
                "radial_oracle",
                sup_diff(oracle.values(), p.env.phi_e.values()),
                10.0 * h * h,
            ));
        } else {
            out.notes.push(format!(
                "boundary data from the rotation-invariant sandwich, spread {}",
                num(p.env.boundary_gap)
            ));
        }
        out.gates.extend(measure_gates(cfg, &p)?);
    }
    Ok(out)
}

fn bergman(cfg: &Config, clock: &mut Clock) -> Result<Outcome, RunError> {
    let mut out = Outcome::default();
    let ms = models(cfg, clock)?;
    let mass = clock
        .time("mass identity", || {
            ms.par_iter().map(|m| m.mass_identity()).collect::<plurikit_core::Result<Vec<_>>>()
        })
        .at("mass identity")?;
    let mut t = Table::new(
        "bergman",
        1,
        &[
            "k",
            "dim",
            "integral",
            "rel_error",
            "method",
            "condition",
            "discarded",
            "quadrature_achieved",
            "doublings",
            "half_width",
        ],
    );
    for (m, mi) in ms.iter().zip(&mass) {
        let c = m.conditioning();
        let q = m.quadrature();
        t.push(vec![
            m.k().to_string(),
            m.dimension().to_string(),
            num(mi.integral),
            num(mi.rel_error),
            c.method.as_str().into(),
            num(c.condition),
            c.discarded.to_string(),
            num(q.achieved),
            q.doublings.to_string(),
            num(q.half_width),
        ]);
    }
    out.tables.push(t);
    let worst = mass.iter().map(|m| m.rel_error).fold(0.0, f64::max);
    out.gates.push(Gate::at_most("mass_identity", worst, cfg.gates.mass_identity));

    let d = if cfg.is_toric() {
        toric_domain(cfg, cfg.grid.h.expect("toric grid"))?
    } else {
        chart_domain(cfg)?
    };
    if d.dim() == 1 || !cfg.is_toric() {
        let fields = clock
            .time("bergman function", || {
                ms.par_iter()
                    .map(|m| bergman_function(m, &d))
                    .collect::<plurikit_core::Result<Vec<_>>>()
            })
            .at("bergman function")?;
        let mut cols = vec!["k"];
        cols.extend(coords_columns(&d));
        cols.push("bergman");
        let mut t = Table::new("bergman_function", 1, &cols);
        for (m, f) in ms.iter().zip(&fields) {
            for i in 0..d.len() {
                let mut row = vec![m.k().to_string()];
                row.extend(coords_row(&d, i));
                row.push(num(f.get(i)));
                t.push(row);
            }
        }
        out.tables.push(t);

        if is_fs_segment(cfg) {
            let mut gram: f64 = 0.0;
            for m in &ms {
                let lg = m.log_gram_diagonal().expect("toric Gram is diagonal");
                for (a, l) in m.spec().basis.iter().zip(lg) {
                    let exact = ln_beta_int(a[0] as u64 + 1, (m.k() as i64 - a[0]) as u64 + 1);
                    gram = gram.max((l - exact).exp_m1().abs());
                }
            }
            out.gates.push(Gate::at_most("fs_gram_beta", gram, 1e-8));
            let mut flat: f64 = 0.0;
            for (m, f) in ms.iter().zip(&fields) {
                let k1 = m.k() as f64 + 1.0;
                flat = flat.max(f.values().iter().map(|b| (b / k1 - 1.0).abs()).fold(0.0, f64::max));
            }
            out.gates.push(Gate::at_most("fs_bergman_constant", flat, 1e-6));
        }
    } else {
        out.notes.push("Bergman functions are not tabulated on 2-D boxes".into());
    }

    if !cfg.is_toric() {
        let points = [[0.0, 0.0], [0.5, 0.3], [2.0, -1.0], [-3.0, 4.0]];
        let res = clock
            .time("reproducing", || {
                ms.par_iter()
                    .map(|m| m.reproducing_residual(&points))
                    .collect::<plurikit_core::Result<Vec<_>>>()
            })
            .at("reproducing")?;
        let mut t = Table::new("reproducing", 1, &["k", "residual"]);
        for (m, r) in ms.iter().zip(&res) {
            t.push(vec![m.k().to_string(), num(*r)]);
        }
        out.tables.push(t);
        out.gates.push(Gate::at_most(
            "reproducing_residual",
            res.iter().copied().fold(0.0, f64::max),
            cfg.gates.reproducing,
        ));
    }
    Ok(out)
}

/// Middle node of the widest run of non-contact nodes away from the box
/// edges (1-D grids).
fn bridge_midpoint(p: &Pipeline) -> Option<usize> {
    let c = p.env.contact.values();
    let mut best: Option<(usize, usize)> = None;
    let mut i = 0;
    while i < c.len() {
        if c[i] {
            i += 1;
            continue;
        }
        let start = i;
        while i < c.len() && !c[i] {
            i += 1;
        }
        if start > 0 && i < c.len() && best.is_none_or(|(s, e)| i - start > e - s) {
            best = Some((start, i));
        }
    }
    best.map(|(s, e)| (s + e - 1) / 2)
}

fn converge(cfg: &Config, clock: &mut Clock) -> Result<Outcome, RunError> {
    let mut out = Outcome::default();
    let p = pipeline(cfg, clock)?;
    let ms = models(cfg, clock)?;
    let s = series(&ms, p.domain(), clock)?;

    let table = convergence_table(&s, &p.eq.density, &p.reference).at("convergence")?;
    let mut t = Table::new("convergence", 1, &["k", "l1_error", "signed_gap", "sup_ratio"]);
    for r in &table.rows {
        t.push(vec![r.k.to_string(), num(r.l1_error), num(r.signed_gap), num(r.sup_ratio)]);
    }
    out.tables.push(t);
    let ck = cfg.gates.check_k;
    let at = table.rows.iter().find(|r| r.k == ck).expect("check_k is a level");
    if table.rows.len() > 1 {
        out.gates.push(Gate::check(
            "l1_decreasing",
            table.l1_decreasing,
            format!("levels={}", table.rows.len()),
        ));
        out.gates.push(Gate::check(
            "morse_nonincreasing",
            table.morse_nonincreasing,
            format!("last_sup_ratio={}", num(table.rows.last().unwrap().sup_ratio)),
        ));
    }
    out.gates.push(Gate::at_most(&format!("l1_error_k{ck}"), at.l1_error, cfg.gates.l1_max));
    let target = expected_mass(cfg);
    out.gates.push(Gate::at_most(
        "equilibrium_mass",
        (p.eq.mass - target).abs() / target,
        cfg.gates.mass_rel,
    ));

    let decay = clock
        .time("decay", || decay_profile(&s, &p.phi, &p.env.phi_e, None))
        .at("decay")?;
    let mid = if p.domain().dim() == 1 && cfg.is_toric() {
        bridge_midpoint(&p)
    } else {
        None
    };
    let mut t = Table::new(
        "decay",
        1,
        &["k", "bracket_min", "bracket_max", "excluded", "mid_profile", "mid_defect"],
    );
    for l in &decay.levels {
        let (mp, md) = match mid {
            Some(i) => (num(l.profile.get(i)), num(p.phi.get(i) - p.env.phi_e.get(i))),
            None => (String::new(), String::new()),
        };
        t.push(vec![
            l.k.to_string(),
            num(l.bracket_min),
            num(l.bracket_max),
            l.excluded.to_string(),
            mp,
            md,
        ]);
    }
    out.tables.push(t);
    out.notes.push(format!("decay fitted C = {}", num(decay.fitted_c)));
    if let Some(i) = mid {
        let l = decay.levels.iter().find(|l| l.k == ck).expect("check_k is a level");
        let defect = p.phi.get(i) - p.env.phi_e.get(i);
        out.gates.push(Gate::at_most(
            &format!("decay_midpoint_k{ck}"),
            (l.profile.get(i) - defect).abs() / defect,
            cfg.gates.decay_rel,
        ));
    }

    let metric = metric_report(&s, &p.phi, &p.env.phi_e, cfg.gates.metric_window).at("metric")?;
    let mut t = Table::new("metric", 1, &["k", "sup_distance", "bound"]);
    for r in &metric.rows {
        t.push(vec![r.k.to_string(), num(r.sup_distance), num(r.bound)]);
    }
    out.tables.push(t);
    out.gates.push(Gate::check(
        "metric_bound",
        metric.pass,
        format!("fitted_c={}", num(metric.fitted_c)),
    ));
    Ok(out)
}

fn volume(cfg: &Config, clock: &mut Clock) -> Result<Outcome, RunError> {
    let mut out = Outcome::default();
    let p = pipeline(cfg, clock)?;
    let dims: Vec<(u32, usize)> = match cfg.polytope() {
        Some(poly) => cfg
            .k
            .iter()
            .map(|&k| Ok((k, lattice_points(poly, k as i64)?.len())))
            .collect::<plurikit_core::Result<_>>()
            .at("dimensions")?,
        None => cfg.k.iter().map(|&k| (k, k as usize + 1)).collect(),
    };
    let vol = expected_mass(cfg);
    // the chart is the projective line, of complex dimension one
    let n = if cfg.is_toric() { cfg.dim() } else { 1 };
    let rep = volume_report(n, &dims, p.eq.mass, Some(vol)).at("volume")?;
    let mut t = Table::new("volume", 1, &["k", "dim", "normalized", "gap"]);
    for r in &rep.rows {
        t.push(vec![r.k.to_string(), r.dim.to_string(), num(r.normalized), num(r.gap)]);
    }
    out.tables.push(t);
    let mut t = Table::new("volume_mass", 1, &["vol_lattice", "eq_mass", "rel_error"]);
    let err = rep.mass_error.unwrap_or(0.0);
    t.push(vec![num(vol), num(rep.mass), num(err)]);
    out.tables.push(t);
    out.gates.push(Gate::at_most("equilibrium_mass", err, cfg.gates.mass_rel));
    if rep.rows.len() > 1 {
        out.gates.push(Gate::check(
            "dimension_gap_decreasing",
            rep.monotone_tail,
            format!("last_gap={}", num(rep.rows.last().unwrap().gap)),
        ));
    }

    if cfg.is_toric() && cfg.dim() == 1 {
        let ms = models(cfg, clock)?;
        let s = series(&ms, p.domain(), clock)?;
        let dist = clock
            .time("volume distance", || {
                s.levels
                    .iter()
                    .map(|l| bergman_volume_distance(l, &p.phi, &p.env.phi_e))
                    .collect::<plurikit_core::Result<Vec<_>>>()
            })
            .at("volume distance")?;
        let mut t = Table::new("volume_distance", 1, &["k", "distance", "mass", "limit_mass"]);
        for d in &dist {
            t.push(vec![d.k.to_string(), num(d.distance), num(d.mass), num(d.limit_mass)]);
        }
        out.tables.push(t);
        let last = dist.last().expect("at least one level");
        out.gates.push(Gate::at_most(
            &format!("volume_distance_k{}", last.k),
            last.distance,
            cfg.gates.volume_distance,
        ));
    }
    Ok(out)
}

fn expansion(cfg: &Config, clock: &mut Clock) -> Result<Outcome, RunError> {
    let mut out = Outcome::default();
    let p = pipeline(cfg, clock)?;
    let ms = models(cfg, clock)?;
    let s = series(&ms, p.domain(), clock)?;
    let rho = ma_ratio(&p.phi, &p.reference).at("expansion")?;
    let central = p.domain().central_window(cfg.gates.metric_window);
    let steps = (cfg.tolerances.tzc_clearance / p.domain().max_spacing()).ceil() as usize;
    let deep = p.env.contact.interior(steps.max(2));
    let margin = cfg.tolerances.tzc_margin;
    let window: Vec<bool> = (0..rho.len())
        .map(|i| central[i] && deep[i] && rho.get(i) > margin)
        .collect();
    let fit = clock
        .time("expansion", || tzc_fit(&s, &rho, &p.env.contact, &window, margin))
        .at("expansion")?;
    let mut t = Table::new("expansion", 1, &["k", "mean", "min", "max"]);
    for pair in &fit.pairs {
        let lo = pair.b_hat.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = pair.b_hat.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        t.push(vec![pair.k.to_string(), num(pair.mean), num(lo), num(hi)]);
    }
    out.tables.push(t);
    let d = p.domain();
    let mut cols = vec!["k"];
    cols.extend(coords_columns(d));
    cols.extend(["rho", "b_hat"]);
    let mut t = Table::new("expansion_nodes", 1, &cols);
    for pair in &fit.pairs {
        for (&i, b) in fit.nodes.iter().zip(&pair.b_hat) {
            let mut row = vec![pair.k.to_string()];
            row.extend(coords_row(d, i));
            row.extend([num(rho.get(i)), num(*b)]);
            t.push(row);
        }
    }
    out.tables.push(t);
    out.notes.push(format!("b1 = {} over {} window nodes", num(fit.b1), fit.nodes.len()));
    out.gates.push(Gate::at_most("tzc_spread", fit.spread, cfg.gates.tzc_spread));
    if is_fs_segment(cfg) {
        let worst = fit
            .pairs
            .iter()
            .flat_map(|p| p.b_hat.iter())
            .map(|b| (b - 1.0).abs())
            .fold(0.0, f64::max);
        out.gates.push(Gate::at_most("fs_b1_exact", worst, 1e-8));
    }
    Ok(out)
}

fn capacity(cfg: &Config, clock: &mut Clock) -> Result<Outcome, RunError> {
    if !cfg.is_toric() {
        return Err(ConfigError {
            key: "weight.kind".into(),
            message: format!("`capacity` needs a toric weight, got `{}`", cfg.weight.kind),
        }
        .into());
    }
    let mut out = Outcome::default();
    let p = pipeline(cfg, clock)?;
    let ms = models(cfg, clock)?;
    let s = series(&ms, p.domain(), clock)?;
    let rep = tchebishev_estimate(&s, &p.phi, &p.env.phi_e).at("capacity")?;
    let mut t = Table::new("capacity", 1, &["k", "estimate", "target", "rel_gap"]);
    for r in &rep.rows {
        t.push(vec![r.k.to_string(), num(r.estimate), num(rep.target), num(r.rel_gap)]);
    }
    out.tables.push(t);
    if let Some(x) = rep.extrapolated {
        out.notes.push(format!("extrapolated limit {}", num(x)));
    }
    if rep.sign_discrepancy {
        out.notes.push(format!(
            "target exp(-sup(phi - phi_e)) = {} differs from exp(-sup(phi_e - phi)) = {}",
            num(rep.target),
            num(rep.printed_form)
        ));
    }
    let last = rep.rows.last().expect("at least one level");
    out.gates.push(Gate::at_most(
        &format!("tchebishev_k{}", last.k),
        last.rel_gap,
        cfg.gates.tchebishev_rel,
    ));
    Ok(out)
}

fn bump(t: &TestFunction) -> TestBump {
    TestBump {
        center: t.center,
        radius: t.radius,
    }
}

fn offdiag(cfg: &Config, clock: &mut Clock) -> Result<Outcome, RunError> {
    let Some(od) = &cfg.offdiag else {
        return Err(ConfigError {
            key: "weight.kind".into(),
            message: format!("`offdiag` needs a chart weight, got `{}`", cfg.weight.kind),
        }
        .into());
    };
    let mut out = Outcome::default();
    let p = chart_pipeline(cfg, clock)?;
    let ms = models(cfg, clock)?;
    let (f, g) = (bump(&od.f), bump(&od.g));
    let d = p.domain();
    let inside = (0..d.len()).all(|i| f.value(d.point(i)) == 0.0 || p.env.contact.get(i));
    out.gates.push(Gate::check(
        "f_supported_in_contact",
        inside,
        format!("center=[{}, {}] radius={}", num(f.center[0]), num(f.center[1]), num(f.radius)),
    ));
    let points = [f.center, g.center, [0.5, 0.3], [2.0, -1.0]];
    let rows = clock
        .time("offdiag", || {
            ms.par_iter()
                .map(|m| {
                    let r = m.reproducing_residual(&points)?;
                    let apart = offdiag_concentration(m, &f, &g, &p.eq.density, &p.reference)?;
                    let on = offdiag_concentration(m, &f, &f, &p.eq.density, &p.reference)?;
                    Ok((m.k(), r, apart, on))
                })
                .collect::<plurikit_core::Result<Vec<_>>>()
        })
        .at("offdiag")?;
    let mut t = Table::new(
        "offdiag",
        1,
        &[
            "k",
            "reproducing",
            "disjoint_value",
            "disjoint_target",
            "on_d_value",
            "on_d_target",
            "on_d_rel",
        ],
    );
    for (k, r, apart, on) in &rows {
        t.push(vec![
            k.to_string(),
            num(*r),
            num(apart.value),
            num(apart.target),
            num(on.value),
            num(on.target),
            num((on.value - on.target).abs() / on.target),
        ]);
    }
    out.tables.push(t);
    let worst = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    out.gates.push(Gate::at_most("reproducing_residual", worst, cfg.gates.reproducing));
    let (k, _, apart, on) = rows.last().expect("at least one level");
    out.gates.push(Gate::at_most(
        &format!("offdiag_disjoint_k{k}"),
        apart.value,
        cfg.gates.offdiag_disjoint,
    ));
    out.gates.push(Gate::at_most(
        &format!("offdiag_on_d_k{k}"),
        (on.value - on.target).abs() / on.target,
        cfg.gates.offdiag_on_d,
    ));
    out.notes.push(format!("equilibrium mass {}", num(p.eq.mass)));
    Ok(out)
}
