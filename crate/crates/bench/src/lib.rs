//! Fixtures shared by the benchmarks.

use plurikit_core::geometry::{Bump, LatticePolytope, WeightSpec};

pub fn double_well() -> WeightSpec {
    WeightSpec::PerturbedToric {
        polytope: LatticePolytope::segment(-1, 1).unwrap(),
        bumps: vec![Bump::on_line(0.0, 2.5, 0.4, 16.0).unwrap()],
    }
}

pub fn simplex_bump() -> WeightSpec {
    WeightSpec::PerturbedToric {
        polytope: LatticePolytope::unit_simplex(),
        bumps: vec![Bump::new([0.0, 0.0], 1.5, 0.6, 6.0).unwrap()],
    }
}

pub fn chart_bump() -> WeightSpec {
    WeightSpec::PerturbedChart {
        bumps: vec![Bump::new([2.5, 0.0], 1.5, 0.6, 4.0).unwrap()],
    }
}
