use plurikit_bench::{chart_bump, double_well, simplex_bump};
use plurikit_core::geometry::{eval_weight, Domain};
use proptest::prelude::*;

#[test]
fn fixtures_have_the_expected_shape() {
    assert_eq!(double_well().dim(), 1);
    assert_eq!(simplex_bump().dim(), 2);
    assert!(chart_bump().polytope().is_none());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn fixtures_are_finite_on_their_grids(h in 0.05f64..0.5, v in 2.0f64..20.0) {
        for w in [double_well(), simplex_bump()] {
            let d = Domain::v_box(w.dim(), v, h).unwrap();
            prop_assert!(eval_weight(&w, &d).unwrap().values().iter().all(|x| x.is_finite()));
        }
        let d = Domain::polar(0.02, v, 9, 8).unwrap();
        prop_assert!(eval_weight(&chart_bump(), &d).unwrap().values().iter().all(|x| x.is_finite()));
    }
}
