use std::fmt;
use std::str::FromStr;

use adalvr::{EstimatorKind, ScalingKind};

use crate::error::BenchError;

/// An (estimator, scaling) pair addressed by a short id such as `adasaga-diag`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Algorithm {
    pub estimator: EstimatorKind,
    pub scaling: ScalingKind,
}

const TABLE: &[(&str, EstimatorKind, ScalingKind)] = &[
    ("sgd", EstimatorKind::Sgd, ScalingKind::Identity),
    ("gd", EstimatorKind::FullBatch, ScalingKind::Identity),
    ("saga", EstimatorKind::Saga, ScalingKind::Identity),
    ("lsvrg", EstimatorKind::Lsvrg, ScalingKind::Identity),
    ("adagrad-norm", EstimatorKind::Sgd, ScalingKind::AdaGradNorm),
    ("adagrad-diag", EstimatorKind::Sgd, ScalingKind::AdaGradDiag),
    ("adasaga-norm", EstimatorKind::Saga, ScalingKind::AdaGradNorm),
    ("adasaga-diag", EstimatorKind::Saga, ScalingKind::AdaGradDiag),
    ("adalsvrg-norm", EstimatorKind::Lsvrg, ScalingKind::AdaGradNorm),
    ("adalsvrg-diag", EstimatorKind::Lsvrg, ScalingKind::AdaGradDiag),
    ("rmsprop", EstimatorKind::Sgd, ScalingKind::RmsProp),
    ("rmsprop-saga", EstimatorKind::Saga, ScalingKind::RmsProp),
    ("rmsprop-lsvrg", EstimatorKind::Lsvrg, ScalingKind::RmsProp),
    ("adam", EstimatorKind::Sgd, ScalingKind::Adam),
    ("adam-saga", EstimatorKind::Saga, ScalingKind::Adam),
    ("adam-lsvrg", EstimatorKind::Lsvrg, ScalingKind::Adam),
];

impl Algorithm {
    pub const fn new(estimator: EstimatorKind, scaling: ScalingKind) -> Self {
        Self { estimator, scaling }
    }

    pub fn all() -> Vec<Algorithm> {
        TABLE.iter().map(|(_, e, s)| Algorithm::new(*e, *s)).collect()
    }

    /// The four adaptive variance-reduced variants.
    pub fn adalvr() -> Vec<Algorithm> {
        ["adasaga-norm", "adasaga-diag", "adalsvrg-norm", "adalsvrg-diag"]
            .iter()
            .map(|s| s.parse().expect("table id"))
            .collect()
    }

    pub fn id(&self) -> &'static str {
        TABLE
            .iter()
            .find(|(_, e, s)| *e == self.estimator && *s == self.scaling)
            .map(|(id, _, _)| *id)
            .unwrap_or("custom")
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Algorithm {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.trim().to_ascii_lowercase();
        TABLE
            .iter()
            .find(|(id, _, _)| *id == key)
            .map(|(_, e, sc)| Algorithm::new(*e, *sc))
            .ok_or_else(|| {
                let known: Vec<&str> = TABLE.iter().map(|t| t.0).collect();
                BenchError::Config(format!("unknown algorithm {s:?} (known: {})", known.join(", ")))
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_round_trip() {
        for a in Algorithm::all() {
            assert_eq!(a.id().parse::<Algorithm>().unwrap(), a);
        }
        assert_eq!(Algorithm::all().len(), 16);
    }

    #[test]
    fn parse_is_case_insensitive_and_rejects_unknown() {
        let a: Algorithm = " AdaSAGA-Diag ".parse().unwrap();
        assert_eq!(a.estimator, EstimatorKind::Saga);
        assert_eq!(a.scaling, ScalingKind::AdaGradDiag);
        assert!("adamw".parse::<Algorithm>().is_err());
    }
}
