use plurikit_core::envelope::{
    chart_boundary_data, contact_set, convex_envelope_1d, legendre_conjugate, radial_oracle,
    regularity_probe, sor_envelope, toric_equilibrium, Dirichlet, EnvelopeParams, SorParams,
};
use plurikit_core::geometry::{eval_weight, Bump, Domain, GridField, LatticePolytope, WeightSpec};
use plurikit_core::Error;
use proptest::prelude::*;

fn segment(lo: i64, hi: i64) -> LatticePolytope {
    LatticePolytope::segment(lo, hi).unwrap()
}

fn double_well(amplitude: f64) -> WeightSpec {
    WeightSpec::PerturbedToric {
        polytope: segment(-1, 1),
        bumps: vec![Bump::on_line(0.0, 2.5, amplitude, 16.0).unwrap()],
    }
}

fn lopsided() -> WeightSpec {
    WeightSpec::PerturbedToric {
        polytope: segment(-2, 1),
        bumps: vec![
            Bump::on_line(-1.0, 1.5, 0.8, 6.0).unwrap(),
            Bump::on_line(2.0, 1.0, 0.5, 4.0).unwrap(),
        ],
    }
}

fn params() -> EnvelopeParams {
    EnvelopeParams::default()
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn toric_env(w: &WeightSpec, v: f64, h: f64) -> (GridField, GridField) {
    let p = w.polytope().unwrap();
    let d = Domain::v_box(p.dim(), v, h).unwrap();
    let phi = eval_weight(w, &d).unwrap();
    let env = toric_equilibrium(&phi, p, &params()).unwrap();
    (phi, env.phi_e)
}

#[test]
fn conjugate_examples() {
    let d = Domain::v_box(1, 3.0, 0.001).unwrap();
    let q = GridField::from_fn(d.clone(), |i| 0.5 * d.coords(i)[0].powi(2)).unwrap();
    let c = legendre_conjugate(&q, &[[1.0, 0.0]]).unwrap();
    assert!((c[0] - 0.5).abs() < 1e-3);

    let aff = GridField::from_fn(d.clone(), |i| 0.25 * d.coords(i)[0] + 0.7).unwrap();
    assert!((legendre_conjugate(&aff, &[[0.25, 0.0]]).unwrap()[0] + 0.7).abs() < 1e-15);

    let fs = eval_weight(&WeightSpec::ToricPotential(segment(0, 1)), &d).unwrap();
    let c = legendre_conjugate(&fs, &[[0.5, 0.0]]).unwrap();
    assert!((c[0] + 2f64.ln()).abs() < 1e-12);

    let polar = Domain::polar(0.1, 1.0, 3, 4).unwrap();
    let chart = eval_weight(&WeightSpec::FsChart, &polar).unwrap();
    assert!(legendre_conjugate(&chart, &[[0.0, 0.0]]).is_err());
}

#[test]
fn hull_examples() {
    let xs: Vec<f64> = (0..=600).map(|i| -3.0 + 0.01 * i as f64).collect();
    let ys: Vec<f64> = xs.iter().map(|x| ((x - 1.0) * (x - 1.0)).min((x + 1.0) * (x + 1.0))).collect();
    let env = convex_envelope_1d(&xs, &ys).unwrap();
    for (i, x) in xs.iter().enumerate() {
        let expected = if x.abs() >= 1.0 { ys[i] } else { 0.0 };
        assert!((env[i] - expected).abs() < 1e-12, "x = {x}");
    }
    assert_eq!(convex_envelope_1d(&[0.0, 1.0, 1.0], &[0.0; 3]), Err(Error::DuplicateAbscissa(2)));
}

#[test]
fn convex_weights_are_their_own_envelope() {
    let w = WeightSpec::ToricPotential(segment(0, 1));
    let h = 0.05;
    let (phi, phi_e) = toric_env(&w, 12.0, h);
    assert!(sup_diff(phi.values(), phi_e.values()) <= 2.0 * h);
    let env = toric_equilibrium(&phi, &segment(0, 1), &params()).unwrap();
    assert!(env.contact.all());
    assert_eq!(env.iterations, 0);
}

#[test]
fn biconjugate_matches_the_hull_oracle() {
    let h = 0.02;
    for w in [WeightSpec::ToricPotential(segment(0, 1)), double_well(0.4), lopsided()] {
        let (phi, phi_e) = toric_env(&w, 14.0, h);
        let d = phi.domain();
        let xs: Vec<f64> = (0..d.len()).map(|i| d.coords(i)[0]).collect();
        let hull = convex_envelope_1d(&xs, phi.values()).unwrap();
        let diam = w.polytope().unwrap().diameter();
        assert!(sup_diff(&hull, phi_e.values()) <= 2.0 * h * diam, "{}", w.kind_name());
        assert!(phi_e.values().iter().zip(phi.values()).all(|(e, p)| *e <= p + 1e-12));
    }
}

#[test]
fn bridge_is_the_only_non_contact_region() {
    let h = 0.01;
    let w = double_well(0.4);
    let p = segment(-1, 1);
    let d = Domain::v_box(1, 10.0, h).unwrap();
    let phi = eval_weight(&w, &d).unwrap();
    let env = toric_equilibrium(&phi, &p, &params()).unwrap();
    let xs: Vec<f64> = (0..d.len()).map(|i| d.coords(i)[0]).collect();
    let hull = convex_envelope_1d(&xs, phi.values()).unwrap();
    let exact: Vec<bool> = hull.iter().zip(phi.values()).map(|(e, p)| p - e <= 1e-12).collect();

    let gap = |m: &[bool]| {
        let lo = m.iter().position(|c| !c).unwrap();
        let hi = m.iter().rposition(|c| !c).unwrap();
        assert!(m[lo..=hi].iter().all(|c| !c), "non-contact set must be one interval");
        (lo, hi)
    };
    let (lo, hi) = gap(env.contact.values());
    let (elo, ehi) = gap(&exact);
    assert!(lo.abs_diff(elo) <= 1 && hi.abs_diff(ehi) <= 1);
    assert!(xs[lo] < 0.0 && xs[hi] > 0.0);
    // affine across the bridge
    let slope = (env.phi_e.get(hi) - env.phi_e.get(lo)) / (xs[hi] - xs[lo]);
    for i in lo..=hi {
        let lin = env.phi_e.get(lo) + slope * (xs[i] - xs[lo]);
        assert!((env.phi_e.get(i) - lin).abs() < 1e-10);
    }
}

#[test]
fn contact_set_examples() {
    let (phi, phi_e) = toric_env(&double_well(0.4), 10.0, 0.05);
    assert!(contact_set(&phi, &phi, 0.0).unwrap().all());
    assert!(contact_set(&phi, &phi_e, f64::INFINITY).unwrap().all());
    assert!(!contact_set(&phi, &phi_e, 1e-6).unwrap().all());
}

#[test]
fn idempotence() {
    for (w, h) in [(double_well(0.4), 0.02), (lopsided(), 0.02)] {
        let p = w.polytope().unwrap();
        let (_, once) = toric_env(&w, 14.0, h);
        let twice = toric_equilibrium(&once, p, &params()).unwrap().phi_e;
        assert!(sup_diff(once.values(), twice.values()) <= 2.0 * h * p.diameter());
    }
}

#[test]
fn homogeneity_in_one_dimension() {
    let w = double_well(0.4);
    let p = segment(-1, 1);
    let d = Domain::v_box(1, 12.0, 0.02).unwrap();
    let phi = eval_weight(&w, &d).unwrap();
    let base = toric_equilibrium(&phi, &p, &params()).unwrap().phi_e;
    for m in [2i64, 3] {
        let scaled = toric_equilibrium(&phi.scale(m as f64), &p.scaled(m), &params())
            .unwrap()
            .phi_e;
        let scale = phi.max_abs() * m as f64;
        let err = sup_diff(scaled.values(), base.scale(m as f64).values());
        assert!(err <= 1e-8 * scale, "m = {m}: {err}");
    }
}

fn simplex_bump() -> WeightSpec {
    WeightSpec::PerturbedToric {
        polytope: LatticePolytope::unit_simplex(),
        bumps: vec![Bump::new([0.0, 0.0], 1.5, 0.6, 6.0).unwrap()],
    }
}

#[test]
fn two_dimensional_envelopes() {
    let h = 0.1;
    let p = LatticePolytope::unit_simplex();
    let plain = WeightSpec::ToricPotential(p.clone());
    let (phi, phi_e) = toric_env(&plain, 9.0, h);
    assert!(sup_diff(phi.values(), phi_e.values()) <= 2.0 * h * p.diameter());

    let (phi, phi_e) = toric_env(&simplex_bump(), 9.0, h);
    assert!(phi_e.values().iter().zip(phi.values()).all(|(e, u)| *e <= u + 1e-12));
    let gap = phi.sub(&phi_e).unwrap();
    let d = phi.domain();
    let centre = d.index(d.counts()[0] / 2, d.counts()[1] / 2);
    assert!(gap.get(centre) > 0.1);
    let [n0, n1] = d.counts();
    let v = phi_e.values();
    for i0 in 1..n0 - 1 {
        for i1 in 1..n1 - 1 {
            let c = v[i0 * n1 + i1];
            assert!(v[(i0 - 1) * n1 + i1] - 2.0 * c + v[(i0 + 1) * n1 + i1] >= -1e-9);
            assert!(v[i0 * n1 + i1 - 1] - 2.0 * c + v[i0 * n1 + i1 + 1] >= -1e-9);
        }
    }

    let p2 = p.scaled(2);
    let doubled = toric_equilibrium(&phi.scale(2.0), &p2, &params()).unwrap().phi_e;
    assert!(sup_diff(doubled.values(), phi_e.scale(2.0).values()) <= 2.0 * h * p2.diameter());
}

#[test]
fn narrow_box_is_reported() {
    let d = Domain::v_box(1, 1.0, 0.05).unwrap();
    let phi = eval_weight(&WeightSpec::ToricPotential(segment(0, 1)), &d).unwrap();
    let err = toric_equilibrium(&phi, &segment(0, 1), &params()).unwrap_err();
    assert!(matches!(err, Error::BoxTooNarrow(_)));
    assert!(err.to_string().contains("widen"));

    let d2 = Domain::v_box(2, 1.0, 0.1).unwrap();
    let phi2 = eval_weight(&simplex_bump(), &d2).unwrap();
    let err = toric_equilibrium(&phi2, &LatticePolytope::unit_simplex(), &params());
    assert!(matches!(err, Err(Error::BoxTooNarrow(_))));
}

fn chart_bump(amplitude: f64) -> WeightSpec {
    WeightSpec::PerturbedChart {
        bumps: vec![Bump::new([0.0, 0.0], 1.0, amplitude, 4.0).unwrap()],
    }
}

#[test]
fn subharmonic_weight_is_its_own_envelope() {
    let d = Domain::polar(0.05, 5.0, 41, 32).unwrap();
    let phi = eval_weight(&WeightSpec::FsChart, &d).unwrap();
    let data = chart_boundary_data(&WeightSpec::FsChart, &d).unwrap();
    let env = sor_envelope(&phi, &data, &SorParams::default()).unwrap();
    assert!(env.contact.all());
    assert!(sup_diff(env.phi_e.values(), phi.values()) < 1e-12);
}

#[test]
fn sor_matches_the_radial_oracle() {
    let w = chart_bump(0.6);
    for (nr, nt) in [(41, 32), (81, 64)] {
        let d = Domain::polar(0.05, 5.0, nr, nt).unwrap();
        let phi = eval_weight(&w, &d).unwrap();
        let data = chart_boundary_data(&w, &d).unwrap();
        let env = sor_envelope(&phi, &data, &SorParams::default()).unwrap();
        let oracle = radial_oracle(&w, &d).unwrap();
        let h = d.max_spacing();
        assert!(sup_diff(env.phi_e.values(), oracle.values()) <= 10.0 * h * h);
        assert!(!env.contact.all());
        assert!(env.residual < 1e-8);
        assert_eq!(env.boundary_gap, 0.0);
    }
}

#[test]
fn sor_is_harmonic_off_contact() {
    let w = chart_bump(0.6);
    let d = Domain::polar(0.05, 5.0, 61, 48).unwrap();
    let phi = eval_weight(&w, &d).unwrap();
    let env = sor_envelope(&phi, &chart_boundary_data(&w, &d).unwrap(), &SorParams::default()).unwrap();
    let [nr, nt] = d.counts();
    let [ds, dt] = d.spacing();
    let v = env.phi_e.values();
    let mut off = 0;
    for ir in 1..nr - 1 {
        for it in 0..nt {
            let i = ir * nt + it;
            let lap = (v[i - nt] - 2.0 * v[i] + v[i + nt]) / (ds * ds)
                + (v[ir * nt + (it + 1) % nt] - 2.0 * v[i] + v[ir * nt + (it + nt - 1) % nt]) / (dt * dt);
            assert!(lap >= -1e-6);
            if phi.get(i) - v[i] > 1e-6 {
                off += 1;
                assert!(lap.abs() < 1e-6);
            }
        }
    }
    assert!(off > 0);
}

#[test]
fn lowering_the_boundary_lowers_the_envelope_by_at_most_the_shift() {
    let w = chart_bump(0.6);
    let d = Domain::polar(0.05, 5.0, 41, 32).unwrap();
    let phi = eval_weight(&w, &d).unwrap();
    let data = chart_boundary_data(&w, &d).unwrap();
    let base = sor_envelope(&phi, &data, &SorParams::default()).unwrap();
    let c = 0.3;
    let lowered = Dirichlet {
        inner: data.inner.iter().map(|x| x - c).collect(),
        outer: data.outer.iter().map(|x| x - c).collect(),
        gap: 0.0,
    };
    let low = sor_envelope(&phi, &lowered, &SorParams::default()).unwrap();
    for (a, b) in base.phi_e.values().iter().zip(low.phi_e.values()) {
        assert!(b <= &(a + 1e-9) && *b >= a - c - 1e-9);
    }
}

#[test]
fn off_centre_bumps_use_the_sandwich() {
    let w = WeightSpec::PerturbedChart {
        bumps: vec![Bump::new([0.4, 0.2], 0.8, 0.6, 4.0).unwrap()],
    };
    let d = Domain::polar(0.05, 5.0, 41, 32).unwrap();
    let phi = eval_weight(&w, &d).unwrap();
    let data = chart_boundary_data(&w, &d).unwrap();
    assert!(data.gap > 0.0 && data.gap <= w.growth_constant());
    let env = sor_envelope(&phi, &data, &SorParams::default()).unwrap();
    assert_eq!(env.boundary_gap, data.gap);
    assert!(env.phi_e.values().iter().zip(phi.values()).all(|(e, p)| *e <= p + 1e-12));
    assert!(matches!(radial_oracle(&w, &d), Err(Error::InvalidArgument(_))));
}

#[test]
fn sor_errors() {
    let w = chart_bump(0.6);
    let d = Domain::polar(0.05, 5.0, 41, 32).unwrap();
    let phi = eval_weight(&w, &d).unwrap();
    let data = chart_boundary_data(&w, &d).unwrap();
    let quick = SorParams {
        max_sweeps: 3,
        ..SorParams::default()
    };
    assert!(matches!(sor_envelope(&phi, &data, &quick), Err(Error::NotConverged { .. })));

    let high = Dirichlet {
        inner: data.inner.iter().map(|x| x + 1.0).collect(),
        ..data.clone()
    };
    assert!(matches!(
        sor_envelope(&phi, &high, &SorParams::default()),
        Err(Error::BoundaryAboveObstacle(_))
    ));

    let odd = Domain::polar(0.05, 5.0, 41, 31).unwrap();
    let phi_odd = eval_weight(&w, &odd).unwrap();
    let data_odd = chart_boundary_data(&w, &odd).unwrap();
    assert!(sor_envelope(&phi_odd, &data_odd, &SorParams::default()).is_err());
}

#[test]
fn regularity_on_the_double_well_and_a_plane_case() {
    let run = |w: &WeightSpec, v: f64, hs: [f64; 3]| {
        let levels: Vec<(GridField, GridField)> = hs.iter().map(|&h| toric_env(w, v, h)).collect();
        let refs: Vec<(&GridField, &GridField)> = levels.iter().map(|(a, b)| (a, b)).collect();
        regularity_probe(&refs, 1e-6).unwrap()
    };
    let r = run(&double_well(0.4), 10.0, [0.04, 0.02, 0.01]);
    assert!(r.pass, "{r:?}");
    let r2 = run(&simplex_bump(), 5.0, [0.025, 0.0125, 0.00625]);
    assert!(r2.pass, "{r2:?}");
}

#[test]
fn kinked_input_fails_the_probe() {
    let levels: Vec<(GridField, GridField)> = [0.04, 0.02, 0.01]
        .iter()
        .map(|&h| {
            let d = Domain::v_box(1, 2.0, h).unwrap();
            let phi = GridField::from_fn(d.clone(), |i| d.coords(i)[0].powi(2) + 1.0).unwrap();
            let kink = GridField::from_fn(d.clone(), |i| 0.5 * d.coords(i)[0].abs()).unwrap();
            (phi, kink)
        })
        .collect();
    let refs: Vec<(&GridField, &GridField)> = levels.iter().map(|(a, b)| (a, b)).collect();
    let r = regularity_probe(&refs, 1e-6).unwrap();
    assert!(!r.pass);
    assert!(r.second_ratio > 3.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn envelope_is_monotone(a1 in 0.0f64..0.8, extra in 0.0f64..0.5, c in -1.5f64..1.5) {
        let p = segment(-1, 1);
        let d = Domain::v_box(1, 10.0, 0.05).unwrap();
        let w1 = double_well(a1);
        let w2 = WeightSpec::PerturbedToric {
            polytope: p.clone(),
            bumps: vec![
                Bump::on_line(0.0, 2.5, a1, 16.0).unwrap(),
                Bump::on_line(c, 1.0, extra, 4.0).unwrap(),
            ],
        };
        let e1 = toric_equilibrium(&eval_weight(&w1, &d).unwrap(), &p, &params()).unwrap();
        let e2 = toric_equilibrium(&eval_weight(&w2, &d).unwrap(), &p, &params()).unwrap();
        for (x, y) in e1.phi_e.values().iter().zip(e2.phi_e.values()) {
            prop_assert!(*x <= y + 1e-12);
        }
    }

    #[test]
    fn envelope_is_a_convex_minorant(a in -0.5f64..1.0, c in -2.0f64..2.0, r in 0.5f64..3.0) {
        let p = segment(-1, 2);
        let w = WeightSpec::PerturbedToric {
            polytope: p.clone(),
            bumps: vec![Bump::on_line(c, r, a, 5.0).unwrap()],
        };
        let d = Domain::v_box(1, 12.0, 0.05).unwrap();
        let phi = eval_weight(&w, &d).unwrap();
        let e = toric_equilibrium(&phi, &p, &params()).unwrap();
        let v = e.phi_e.values();
        for i in 1..v.len() - 1 {
            prop_assert!(v[i - 1] - 2.0 * v[i] + v[i + 1] >= -1e-12);
            prop_assert!(v[i] <= phi.get(i) + 1e-12);
        }
        let h = d.spacing()[0];
        let first = (v[1] - v[0]) / h;
        let last = (v[v.len() - 1] - v[v.len() - 2]) / h;
        prop_assert!(first >= -1.0 - 1e-9 && last <= 2.0 + 1e-9);
    }
}
