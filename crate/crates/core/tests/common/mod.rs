#![allow(dead_code)]

use adalvr::problems::synthetic::{self, LeastSquaresSpec, LogisticSpec};
use adalvr::{FiniteSumProblem, ProblemKind};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    adalvr::rng::seeded(seed)
}

pub fn logistic(n_samples: usize, features: usize, classes: usize, batch: usize, seed: u64) -> FiniteSumProblem {
    let data = synthetic::logistic(&LogisticSpec {
        n_samples,
        n_features: features,
        n_classes: classes,
        seed,
        ..Default::default()
    })
    .unwrap()
    .data;
    FiniteSumProblem::logistic(data, batch).unwrap()
}

pub fn least_squares(n_samples: usize, features: usize, batch: usize, seed: u64) -> FiniteSumProblem {
    let data = synthetic::least_squares(&LeastSquaresSpec {
        n_samples,
        n_features: features,
        seed,
        ..Default::default()
    })
    .unwrap()
    .data;
    FiniteSumProblem::least_squares(data, batch).unwrap()
}

/// A problem with `n` components (batch 1) and dimension `d`. Logistic
/// problems use five classes, so `d` must be a multiple of 5.
pub fn with_shape(kind: ProblemKind, n: usize, d: usize, seed: u64) -> FiniteSumProblem {
    match kind {
        ProblemKind::LeastSquares => least_squares(n, d, 1, seed),
        ProblemKind::MultinomialLogistic => logistic(n, d / 5, 5, 1, seed),
    }
}

pub fn point(rng: &mut impl Rng, d: usize, scale: f64) -> Vec<f64> {
    (0..d).map(|_| rng.gen_range(-scale..scale)).collect()
}
