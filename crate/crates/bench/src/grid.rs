//! Hyperparameter sweeps over `(algorithm, L̃, seed)` cells.

use rayon::prelude::*;

use adalvr::scaling::Discounts;
use adalvr::{Dataset, Domain, Error, FiniteSumProblem, OptimizerConfig, Solver};

use crate::algorithms::Algorithm;
use crate::error::{BenchError, Result};
use crate::metrics;
use crate::output::ResultRow;

/// The L̃ values of the reference sweep.
pub const DEFAULT_LTILDES: [f64; 6] = [0.001, 0.01, 0.1, 1.0, 10.0, 100.0];

#[derive(Debug, Clone)]
pub struct GridSpec {
    pub algorithms: Vec<Algorithm>,
    /// Every algorithm runs with `eta = 1 / L̃`.
    pub ltildes: Vec<f64>,
    /// Budget in passes over the `n` components.
    pub epochs: f64,
    pub seeds: Vec<u64>,
    /// Gradient evaluations between rows; `None` means one row per epoch.
    pub stride: Option<u64>,
    pub p: Option<f64>,
    /// Projection domain; `None` runs unconstrained.
    pub domain: Option<Domain>,
    pub discounts: Discounts,
    /// Worker threads; 0 lets rayon decide.
    pub workers: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            algorithms: Algorithm::all(),
            ltildes: DEFAULT_LTILDES.to_vec(),
            epochs: 10.0,
            seeds: vec![0],
            stride: None,
            p: None,
            domain: None,
            discounts: Discounts::default(),
            workers: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub algorithm: Algorithm,
    pub ltilde: f64,
    pub seed: u64,
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.algorithms.is_empty() || self.ltildes.is_empty() || self.seeds.is_empty() {
            return Err(BenchError::Config("algorithm, L̃ and seed lists must be nonempty".into()));
        }
        if let Some(bad) = self.ltildes.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
            return Err(BenchError::Config(format!("L̃ = {bad} must be positive")));
        }
        if !(self.epochs > 0.0 && self.epochs.is_finite()) {
            return Err(BenchError::Config(format!("epochs = {} must be positive", self.epochs)));
        }
        if self.stride == Some(0) {
            return Err(BenchError::Config("stride must be at least one gradient".into()));
        }
        self.discounts.validate()?;
        Ok(())
    }

    /// Cells in output order: algorithm, then L̃, then seed.
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for &algorithm in &self.algorithms {
            for &ltilde in &self.ltildes {
                for &seed in &self.seeds {
                    out.push(Cell { algorithm, ltilde, seed });
                }
            }
        }
        out
    }

    /// `(budget, stride)` in gradient evaluations for `n` components.
    pub fn budget(&self, n: usize) -> (u64, u64) {
        let budget = ((self.epochs * n as f64) - 1e-9).ceil().max(1.0) as u64;
        (budget, self.stride.unwrap_or(n as u64).min(budget))
    }

    pub fn config(&self, cell: &Cell) -> OptimizerConfig {
        let mut cfg = OptimizerConfig::new(
            cell.algorithm.estimator,
            cell.algorithm.scaling,
            1.0 / cell.ltilde,
            usize::MAX,
        )
        .with_seed(cell.seed);
        cfg.p = self.p;
        cfg.discounts = self.discounts;
        if let Some(d) = &self.domain {
            cfg = cfg.projected(d.clone());
        }
        cfg
    }
}

/// Runs one cell until the gradient budget is spent. Rows are taken at
/// gradient counts `stride, 2 stride, ..., budget`; a step that crosses
/// several thresholds yields one row per threshold. A non-finite state ends
/// the cell with a single diverged row.
pub fn run_cell(
    spec: &GridSpec,
    cell: &Cell,
    problem: &FiniteSumProblem,
    eval: Option<&Dataset>,
) -> Result<Vec<ResultRow>> {
    let n = problem.n_components();
    let (budget, stride) = spec.budget(n);
    let x1 = vec![0.0; problem.dim()];
    let mut solver = Solver::new(problem, spec.config(cell), &x1)?;
    let row = |gradients: u64, objective: f64, accuracy: Option<f64>, diverged: bool| ResultRow {
        algorithm: cell.algorithm.id().to_string(),
        ltilde: cell.ltilde,
        seed: cell.seed,
        gradients,
        epoch: gradients as f64 / n as f64,
        train_objective: objective,
        balanced_accuracy: accuracy,
        diverged,
    };
    let mut rows = Vec::new();
    let mut threshold = stride;
    loop {
        let count = solver.gradient_count();
        if count >= threshold {
            let objective = problem.value(solver.iterate())?;
            if !objective.is_finite() {
                rows.push(row(count, f64::INFINITY, None, true));
                return Ok(rows);
            }
            let accuracy = match eval {
                Some(d) => Some(metrics::score(problem, solver.iterate(), d)?),
                None => None,
            };
            while count >= threshold {
                rows.push(row(count, objective, accuracy, false));
                if threshold == budget {
                    return Ok(rows);
                }
                threshold = (threshold + stride).min(budget);
            }
        }
        match solver.step() {
            Ok(()) => {}
            Err(Error::NonFinite(_)) => {
                rows.push(row(solver.gradient_count(), f64::INFINITY, None, true));
                return Ok(rows);
            }
            Err(e) => return Err(e.into()),
        }
    }
}

/// Every cell of the grid, in canonical order regardless of scheduling.
pub fn run_grid(spec: &GridSpec, problem: &FiniteSumProblem, eval: Option<&Dataset>) -> Result<Vec<ResultRow>> {
    spec.validate()?;
    let cells = spec.cells();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(spec.workers).build()?;
    let per_cell: Vec<Vec<ResultRow>> = pool.install(|| {
        cells
            .par_iter()
            .map(|c| run_cell(spec, c, problem, eval))
            .collect::<Result<_>>()
    })?;
    Ok(per_cell.into_iter().flatten().collect())
}

/// Final non-diverged objective of each cell, `+inf` for diverged cells.
pub fn final_objectives(rows: &[ResultRow]) -> Vec<(String, f64, u64, f64)> {
    let mut out: Vec<(String, f64, u64, f64)> = Vec::new();
    for r in rows {
        let value = if r.diverged { f64::INFINITY } else { r.train_objective };
        match out.last_mut() {
            Some(last) if last.0 == r.algorithm && last.1 == r.ltilde && last.2 == r.seed => last.3 = value,
            _ => out.push((r.algorithm.clone(), r.ltilde, r.seed, value)),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use adalvr::problems::synthetic::{self, LogisticSpec};

    fn small() -> FiniteSumProblem {
        let data = synthetic::logistic(&LogisticSpec {
            n_samples: 60,
            n_features: 3,
            n_classes: 3,
            seed: 1,
            ..Default::default()
        })
        .unwrap()
        .data;
        FiniteSumProblem::logistic(data, 5).unwrap()
    }

    #[test]
    fn row_count_per_cell() {
        let p = small();
        let spec = GridSpec {
            algorithms: vec!["saga".parse().unwrap(), "adasaga-diag".parse().unwrap()],
            ltildes: vec![0.1, 1.0, 10.0],
            epochs: 2.5,
            stride: Some(7),
            ..Default::default()
        };
        let rows = run_grid(&spec, &p, Some(p.data())).unwrap();
        // n = 12, budget 30, ceil(30 / 7) = 5 rows per cell
        let cells = final_objectives(&rows);
        assert_eq!(cells.len(), 6);
        for chunk in rows.chunks(5) {
            assert!(chunk.iter().all(|r| r.algorithm == chunk[0].algorithm && r.ltilde == chunk[0].ltilde));
            assert!(chunk.windows(2).all(|w| w[0].gradients <= w[1].gradients));
            assert!(chunk[4].gradients >= 30);
        }
        assert_eq!(rows.len(), 30);
    }

    #[test]
    fn diverging_cell_emits_one_flagged_row() {
        // Logistic gradients are bounded, so blowup needs a quadratic loss.
        let data = synthetic::least_squares(&synthetic::LeastSquaresSpec {
            n_samples: 20,
            n_features: 3,
            ..Default::default()
        })
        .unwrap()
        .data;
        let p = FiniteSumProblem::least_squares(data, 2).unwrap();
        let spec = GridSpec {
            algorithms: vec!["gd".parse().unwrap()],
            ltildes: vec![1e-3],
            epochs: 2000.0,
            ..Default::default()
        };
        let rows = run_grid(&spec, &p, None).unwrap();
        let last = rows.last().unwrap();
        assert!(last.diverged && last.balanced_accuracy.is_none());
        assert_eq!(rows.iter().filter(|r| r.diverged).count(), 1);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let p = small();
        for spec in [
            GridSpec { ltildes: vec![], ..Default::default() },
            GridSpec { ltildes: vec![-1.0], ..Default::default() },
            GridSpec { epochs: 0.0, ..Default::default() },
            GridSpec { stride: Some(0), ..Default::default() },
        ] {
            assert!(run_grid(&spec, &p, None).is_err());
        }
    }
}
