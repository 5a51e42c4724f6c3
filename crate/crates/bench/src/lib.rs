//! Shared fixture builders for the benchmark targets.

use robust_merton::market::{
    ConfidenceSet, DiscreteLevyMeasure, JumpAtom, LevyTriplet, MarketSpec, TimeGrid, Utility,
};
use robust_merton::{DMatrix, DVector};

pub fn triplet_1d(b: f64, sigma2: f64, atoms: &[(f64, f64)]) -> LevyTriplet {
    let measure = DiscreteLevyMeasure::new(
        1,
        atoms
            .iter()
            .map(|(z, w)| JumpAtom {
                location: DVector::from_vec(vec![*z]),
                intensity: *w,
            })
            .collect(),
    )
    .unwrap();
    LevyTriplet::new(
        DVector::from_vec(vec![b]),
        DMatrix::from_vec(1, 1, vec![sigma2]),
        measure,
    )
    .unwrap()
}

pub fn drift_hull() -> ConfidenceSet {
    ConfidenceSet::new(
        vec![
            triplet_1d(0.05, 0.04, &[(-0.1, 0.5)]),
            triplet_1d(0.10, 0.04, &[(0.2, 0.8)]),
        ],
        2.0,
    )
    .unwrap()
}

pub fn merton_log_spec(step: f64) -> MarketSpec {
    let set = ConfidenceSet::new(vec![triplet_1d(0.08, 0.04, &[(-0.1, 0.5)])], 2.0).unwrap();
    MarketSpec::new(
        TimeGrid::uniform(1.0, step).unwrap(),
        vec![set],
        Utility::LogCrra,
        1.0,
        2.0,
    )
    .unwrap()
}
