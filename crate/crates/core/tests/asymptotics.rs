use plurikit_core::asymptotics::{
    bergman_metric_field, bergman_volume_distance, convergence_table, decay_profile,
    metric_report, offdiag_concentration, tchebishev_estimate, tzc_fit, BergmanSeries, TestBump,
};
use plurikit_core::envelope::{toric_equilibrium, EnvelopeParams};
use plurikit_core::geometry::{eval_weight, Bump, Domain, GridField, LatticePolytope, WeightSpec};
use plurikit_core::mongeampere::{equilibrium_measure, ma_ratio};
use plurikit_core::{BergmanModel, Error, HilbertSpaceSpec};
use proptest::prelude::*;

fn models(w: &WeightSpec, ks: &[u32]) -> Vec<BergmanModel> {
    ks.iter()
        .map(|&k| BergmanModel::build(HilbertSpaceSpec::new(w.clone(), k).unwrap()).unwrap())
        .collect()
}

fn fs() -> WeightSpec {
    WeightSpec::ToricPotential(LatticePolytope::segment(0, 1).unwrap())
}

fn double_well() -> WeightSpec {
    WeightSpec::PerturbedToric {
        polytope: LatticePolytope::segment(-1, 1).unwrap(),
        bumps: vec![Bump::on_line(0.0, 2.5, 0.4, 16.0).unwrap()],
    }
}

struct Setup {
    series: BergmanSeries,
    phi: GridField,
    reference: GridField,
    phi_e: GridField,
    contact: plurikit_core::geometry::MaskField,
    density: GridField,
}

fn setup(w: &WeightSpec, ks: &[u32], v: f64, h: f64) -> Setup {
    let p = w.polytope().unwrap();
    let d = Domain::v_box(1, v, h).unwrap();
    let phi = eval_weight(w, &d).unwrap();
    let reference = eval_weight(&WeightSpec::ToricPotential(p.clone()), &d).unwrap();
    let env = toric_equilibrium(&phi, p, &EnvelopeParams::default()).unwrap();
    let eq = equilibrium_measure(&env, &phi, &reference).unwrap();
    Setup {
        series: BergmanSeries::evaluate(&models(w, ks), &d).unwrap(),
        phi,
        reference,
        phi_e: env.phi_e,
        contact: env.contact,
        density: eq.density,
    }
}

#[test]
fn fubini_study_convergence_is_exact() {
    let ks = [2u32, 4, 8, 16, 32];
    let s = setup(&fs(), &ks, 14.0, 0.01);
    let t = convergence_table(&s.series, &s.density, &s.reference).unwrap();
    let mass: f64 = plurikit_core::mongeampere::integrate(&s.density, &s.reference).unwrap();
    for row in &t.rows {
        let k = row.k as f64;
        assert!((row.l1_error - mass / k).abs() < 1e-9, "{row:?}");
        assert!((row.sup_ratio - (k + 1.0) / k).abs() < 1e-9);
    }
    assert!(t.l1_decreasing && t.morse_nonincreasing);
}

#[test]
fn fubini_study_expansion_is_exact() {
    let ks = [2u32, 4, 8, 16, 32, 64];
    let s = setup(&fs(), &ks, 12.0, 0.05);
    let rho = ma_ratio(&s.phi, &s.reference).unwrap();
    let window = s.phi.domain().central_window(0.6);
    let r = tzc_fit(&s.series, &rho, &s.contact, &window, 0.0).unwrap();
    assert_eq!(r.pairs.len(), 5);
    for pair in &r.pairs {
        assert!(pair.b_hat.iter().all(|b| (b - 1.0).abs() < 1e-8), "k = {}", pair.k);
    }
    assert!((r.b1 - 1.0).abs() < 1e-8 && r.spread < 1e-8);
}

#[test]
fn expansion_window_must_avoid_the_contact_boundary() {
    let s = setup(&double_well(), &[16, 32], 10.0, 0.05);
    let rho = ma_ratio(&s.phi, &s.reference).unwrap();
    let centre = s.phi.len() / 2;
    let mut window = vec![false; s.phi.len()];
    window[centre] = true;
    assert_eq!(
        tzc_fit(&s.series, &rho, &s.contact, &window, 0.0).unwrap_err(),
        Error::WindowTouchesBoundary(centre)
    );
    let s = setup(&fs(), &[16, 32], 10.0, 0.05);
    let rho = ma_ratio(&s.phi, &s.reference).unwrap();
    let window = s.phi.domain().central_window(0.2);
    assert!(tzc_fit(&s.series, &rho, &s.contact, &window, 10.0).is_err());
    let s = setup(&fs(), &[16, 24], 10.0, 0.05);
    assert!(tzc_fit(&s.series, &rho, &s.contact, &window, 0.0).is_err());
}

#[test]
fn fubini_study_decay_and_metric() {
    let ks = [4u32, 16, 64, 256];
    let s = setup(&fs(), &ks, 12.0, 0.05);
    let decay = decay_profile(&s.series, &s.phi, &s.phi_e, None).unwrap();
    for lvl in &decay.levels {
        let k = lvl.k as f64;
        let expected = -((k + 1.0) / k).ln() / k;
        assert!((lvl.bracket_min - expected).abs() < 1e-6 * (1.0 + expected.abs()));
        assert!(lvl.bracket_max <= ((k + 1.0).ln()) / k);
        assert_eq!(lvl.excluded, 0);
    }
    for lvl in &s.series.levels {
        let field = bergman_metric_field(lvl, &s.phi).unwrap();
        let k = lvl.k as f64;
        let gap = field.sub(&s.phi_e).unwrap();
        assert!(gap.values().iter().all(|g| (g - (k + 1.0).ln() / k).abs() < 1e-6));
    }
    let m = metric_report(&s.series, &s.phi, &s.phi_e, 0.6).unwrap();
    assert!(m.pass, "{m:?}");
}

#[test]
fn fubini_study_volume_forms_converge() {
    let ks = [8u32, 32, 128, 512];
    let s = setup(&fs(), &ks, 14.0, 0.01);
    let dist: Vec<f64> = s
        .series
        .levels
        .iter()
        .map(|l| bergman_volume_distance(l, &s.phi, &s.phi_e).unwrap().distance)
        .collect();
    // the metrics differ from phi by constants, so the slopes coincide
    assert!(dist.iter().all(|d| *d < 1e-9), "{dist:?}");
    let last = bergman_volume_distance(&s.series.levels[3], &s.phi, &s.phi_e).unwrap();
    assert!((last.limit_mass - 1.0).abs() < 1e-3);
    assert!((last.mass - last.limit_mass).abs() < 1e-9);
}

#[test]
fn fubini_study_capacity_is_one() {
    let s = setup(&fs(), &[8, 16, 32, 64], 12.0, 0.05);
    let t = tchebishev_estimate(&s.series, &s.phi, &s.phi_e).unwrap();
    assert!((t.target - 1.0).abs() < 1e-12);
    assert!(!t.sign_discrepancy);
    for row in &t.rows {
        let k = row.k as f64;
        assert!((row.estimate - (k + 1.0).powf(1.0 / k)).abs() < 1e-9);
    }
    let flat = WeightSpec::PerturbedToric {
        polytope: LatticePolytope::segment(0, 1).unwrap(),
        bumps: vec![Bump::on_line(0.0, 1.0, 0.0, 4.0).unwrap()],
    };
    let z = setup(&flat, &[8, 16, 32, 64], 12.0, 0.05);
    let tz = tchebishev_estimate(&z.series, &z.phi, &z.phi_e).unwrap();
    for (a, b) in t.rows.iter().zip(&tz.rows) {
        assert!((a.estimate - b.estimate).abs() < 1e-12);
    }
}

#[test]
fn double_well_capacity_reports_the_sign_question() {
    let s = setup(&double_well(), &[64, 128], 8.0, 0.02);
    let t = tchebishev_estimate(&s.series, &s.phi, &s.phi_e).unwrap();
    assert!(t.sign_discrepancy);
    assert!((t.printed_form - 1.0).abs() < 1e-12);
    assert!(t.target < 1.0);
    assert!(t.rows[1].rel_gap < t.rows[0].rel_gap);
}

#[test]
fn chart_offdiagonal_with_constant_functions() {
    let k = 6;
    let m = BergmanModel::build(HilbertSpaceSpec::new(WeightSpec::FsChart, k).unwrap()).unwrap();
    let d = Domain::polar(0.02, 50.0, 41, 32).unwrap();
    let reference = eval_weight(&WeightSpec::FsChart, &d).unwrap();
    let one = GridField::from_fn(d.clone(), |_| 1.0).unwrap();
    let whole = TestBump {
        center: [0.0, 0.0],
        radius: 1e6,
    };
    let r = offdiag_concentration(&m, &whole, &whole, &one, &reference).unwrap();
    assert!((r.value - (k as f64 + 1.0) / k as f64).abs() < 1e-6, "{r:?}");
    assert!((r.target - 1.0).abs() < 0.02, "{r:?}");

    let f = TestBump {
        center: [-0.8, 0.0],
        radius: 0.4,
    };
    let g = TestBump {
        center: [0.8, 0.0],
        radius: 0.4,
    };
    let apart = offdiag_concentration(&m, &f, &g, &one, &reference).unwrap();
    let close = offdiag_concentration(&m, &f, &f, &one, &reference).unwrap();
    assert!(apart.target == 0.0 && apart.value < close.value);
}

#[test]
fn series_rejects_mixed_inputs() {
    let d = Domain::v_box(1, 6.0, 0.1).unwrap();
    let mut ms = models(&fs(), &[4, 8]);
    assert!(BergmanSeries::evaluate(&[ms[1].clone(), ms[0].clone()], &d).is_err());
    ms.push(models(&double_well(), &[16]).remove(0));
    assert!(BergmanSeries::evaluate(&ms, &d).is_err());
    assert!(BergmanSeries::evaluate(&[], &d).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn l1_error_bounds_the_signed_gap(amp in 0.0f64..0.6, c in -0.8f64..0.8, k in 4u32..40) {
        let w = WeightSpec::PerturbedToric {
            polytope: LatticePolytope::segment(-1, 1).unwrap(),
            bumps: vec![Bump::on_line(c, 1.5, amp, 6.0).unwrap()],
        };
        let s = setup(&w, &[k, 2 * k], 10.0, 0.05);
        let t = convergence_table(&s.series, &s.density, &s.reference).unwrap();
        for row in &t.rows {
            prop_assert!(row.l1_error >= row.signed_gap.abs() - 1e-12);
        }
    }
}
