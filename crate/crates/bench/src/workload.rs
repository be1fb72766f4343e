//! Turning dataset flags into a training problem and a held-out split.

use std::path::PathBuf;

use adalvr::optimizer::{reference_solution, Reference};
use adalvr::problems::synthetic::{self, LeastSquaresSpec, LogisticSpec};
use adalvr::problems::{load_dataset, minmax_scale, train_test_split, CsvOptions, LabelKind};
use adalvr::{linalg, Dataset, Domain, FiniteSumProblem, ProblemKind};

use crate::error::{BenchError, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    Synthetic,
    File(PathBuf),
}

impl std::str::FromStr for Source {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(if s == "synthetic" { Source::Synthetic } else { Source::File(PathBuf::from(s)) })
    }
}

pub fn parse_problem(s: &str) -> Result<ProblemKind> {
    match s {
        "logistic" => Ok(ProblemKind::MultinomialLogistic),
        "ls" | "least-squares" => Ok(ProblemKind::LeastSquares),
        _ => Err(BenchError::Config(format!("unknown problem {s:?} (logistic or ls)"))),
    }
}

#[derive(Debug, Clone)]
pub struct WorkloadSpec {
    pub source: Source,
    pub problem: ProblemKind,
    pub batch: usize,
    /// Keep only the first rows of a file dataset.
    pub rows: Option<usize>,
    pub has_header: bool,
    /// Fraction used for training; `1.0` disables the held-out split.
    pub train_fraction: f64,
    pub data_seed: u64,
    pub samples: usize,
    pub features: usize,
    pub classes: usize,
}

impl Default for WorkloadSpec {
    fn default() -> Self {
        Self {
            source: Source::Synthetic,
            problem: ProblemKind::MultinomialLogistic,
            batch: 10,
            rows: None,
            has_header: false,
            train_fraction: 0.8,
            data_seed: 0,
            samples: 2000,
            features: 20,
            classes: 5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Workload {
    pub train: FiniteSumProblem,
    pub test: Option<Dataset>,
}

impl Workload {
    /// Held-out data when the problem is a classification.
    pub fn eval_set(&self) -> Option<&Dataset> {
        match self.train.kind() {
            ProblemKind::MultinomialLogistic => self.test.as_ref(),
            ProblemKind::LeastSquares => None,
        }
    }
}

impl WorkloadSpec {
    fn dataset(&self) -> Result<Dataset> {
        match &self.source {
            Source::Synthetic => Ok(match self.problem {
                ProblemKind::MultinomialLogistic => {
                    synthetic::logistic(&LogisticSpec {
                        n_samples: self.samples,
                        n_features: self.features,
                        n_classes: self.classes,
                        seed: self.data_seed,
                        ..Default::default()
                    })?
                    .data
                }
                ProblemKind::LeastSquares => {
                    synthetic::least_squares(&LeastSquaresSpec {
                        n_samples: self.samples,
                        n_features: self.features,
                        seed: self.data_seed,
                        ..Default::default()
                    })?
                    .data
                }
            }),
            Source::File(path) => {
                let labels = match self.problem {
                    ProblemKind::MultinomialLogistic => LabelKind::Class,
                    ProblemKind::LeastSquares => LabelKind::Target,
                };
                let mut data = load_dataset(
                    path,
                    CsvOptions {
                        has_header: self.has_header,
                        labels,
                    },
                )?;
                if let Some(r) = self.rows {
                    data = data.head(r)?;
                }
                if labels == LabelKind::Class {
                    data = data.compact_classes();
                }
                Ok(minmax_scale(&data))
            }
        }
    }

    pub fn build(&self) -> Result<Workload> {
        let data = self.dataset()?;
        let (train, test) = if self.train_fraction >= 1.0 {
            (data, None)
        } else {
            let (a, b) = train_test_split(&data, self.train_fraction, self.data_seed)?;
            (a, Some(b))
        };
        Ok(Workload {
            train: FiniteSumProblem::new(self.problem, train, self.batch)?,
            test,
        })
    }
}

pub const REFERENCE_TOLERANCE: f64 = 1e-9;

pub fn reference(problem: &FiniteSumProblem) -> Result<Reference> {
    Ok(reference_solution(problem, REFERENCE_TOLERANCE)?)
}

/// Box centered at `x1`; without an explicit half-width it is
/// `10 ||x1 - x*|| + 1`, which contains `x*`.
pub fn verification_box(x1: &[f64], x_star: Option<&[f64]>, half_width: Option<f64>) -> Result<Domain> {
    let hw = match (half_width, x_star) {
        (Some(h), _) => h,
        (None, Some(xs)) => 10.0 * linalg::dist_sq(x1, xs).sqrt() + 1.0,
        (None, None) => {
            return Err(BenchError::Config("box half-width needs a reference solution".into()));
        }
    };
    Ok(Domain::centered_box(x1, hw)?)
}
