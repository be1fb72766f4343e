//! Stochastic gradient estimators over a [`FiniteSumProblem`].
//!
//! SAGA keeps one stored component gradient per component plus their running
//! mean; L-SVRG keeps an anchor point with its full gradient and refreshes it
//! with probability `p` per step. Every estimator counts the fresh component
//! gradients it evaluates.

use crate::error::{check_len, Error, Result};
use crate::linalg::{self, CompensatedVec, KahanSum};
use crate::problems::FiniteSumProblem;
use crate::rng::SampleStream;

/// Largest `n` for which the enumeration diagnostics run.
pub const MAX_ENUMERATION: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EstimatorKind {
    Sgd,
    FullBatch,
    Saga,
    Lsvrg,
}

impl EstimatorKind {
    pub fn is_variance_reduced(self) -> bool {
        matches!(self, EstimatorKind::Saga | EstimatorKind::Lsvrg)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct EstimatorOptions {
    /// L-SVRG refresh probability; `None` means `1/n`.
    pub p: Option<f64>,
    pub seed: u64,
    /// Keep the SAGA memory points alongside their gradients (diagnostics).
    pub retain_points: bool,
}

#[derive(Debug, Clone)]
struct SagaMemory {
    /// Row `i` holds `∇f_i` at the point last visited for component `i`.
    table: Vec<f64>,
    mean: CompensatedVec,
    points: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone)]
struct Anchor {
    point: Vec<f64>,
    grad: Vec<f64>,
    p: f64,
}

#[derive(Debug, Clone)]
enum Memory {
    Stateless,
    Saga(SagaMemory),
    Lsvrg(Anchor),
}

/// Second-moment diagnostics of an estimator at a fixed state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceReport {
    /// `E ||g - ∇f(x)||^2`
    pub variance: f64,
    /// `E ||g||^2`
    pub second_moment: f64,
}

#[derive(Debug, Clone)]
pub struct Estimator<'p> {
    problem: &'p FiniteSumProblem,
    kind: EstimatorKind,
    memory: Memory,
    stream: SampleStream,
    gradient_count: u64,
    refreshes: u64,
    last_index: Option<usize>,
    last_refresh: Option<bool>,
}

/// Resolves the refresh probability, defaulting to `1/n`.
pub fn refresh_probability(p: Option<f64>, n: usize) -> Result<f64> {
    let p = p.unwrap_or(1.0 / n as f64);
    // p = 1 (always refresh) is admitted so that n = 1 keeps the 1/n default.
    if p > 0.0 && p <= 1.0 {
        Ok(p)
    } else {
        Err(Error::invalid(format!("refresh probability {p} outside (0, 1]")))
    }
}

impl<'p> Estimator<'p> {
    /// Initializes the memory at `x1`: SAGA fills its table with `∇f_i(x1)`
    /// and L-SVRG anchors at `x1`, each costing `n` gradients.
    pub fn new(
        kind: EstimatorKind,
        problem: &'p FiniteSumProblem,
        x1: &[f64],
        opts: EstimatorOptions,
    ) -> Result<Self> {
        check_len(problem.dim(), x1.len())?;
        let n = problem.n_components();
        let d = problem.dim();
        let mut gradient_count = 0;
        let memory = match kind {
            EstimatorKind::Sgd | EstimatorKind::FullBatch => Memory::Stateless,
            EstimatorKind::Saga => {
                let mut table = vec![0.0; n * d];
                let mut mean = CompensatedVec::from_values(vec![0.0; d]);
                for (i, row) in table.chunks_mut(d).enumerate() {
                    problem.component_grad_into(i, x1, row)?;
                    mean.add_scaled(1.0 / n as f64, row);
                }
                gradient_count += n as u64;
                let points = opts.retain_points.then(|| vec![x1.to_vec(); n]);
                Memory::Saga(SagaMemory {
                    table,
                    mean: CompensatedVec::from_values(mean.to_vec()),
                    points,
                })
            }
            EstimatorKind::Lsvrg => {
                let p = refresh_probability(opts.p, n)?;
                let grad = problem.full_grad(x1)?;
                gradient_count += n as u64;
                Memory::Lsvrg(Anchor {
                    point: x1.to_vec(),
                    grad,
                    p,
                })
            }
        };
        Ok(Self {
            problem,
            kind,
            memory,
            stream: SampleStream::new(opts.seed),
            gradient_count,
            refreshes: 0,
            last_index: None,
            last_refresh: None,
        })
    }

    pub fn kind(&self) -> EstimatorKind {
        self.kind
    }

    pub fn problem(&self) -> &'p FiniteSumProblem {
        self.problem
    }

    /// Cumulative fresh component-gradient evaluations.
    pub fn gradient_count(&self) -> u64 {
        self.gradient_count
    }

    /// Number of L-SVRG anchor refreshes so far.
    pub fn refresh_count(&self) -> u64 {
        self.refreshes
    }

    pub fn last_index(&self) -> Option<usize> {
        self.last_index
    }

    pub fn last_refresh(&self) -> Option<bool> {
        self.last_refresh
    }

    /// The estimate that index `i` would produce at `x`, without touching the
    /// memory or the counters.
    pub fn estimate_for(&self, i: usize, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.problem.dim()];
        match &self.memory {
            Memory::Stateless => match self.kind {
                EstimatorKind::FullBatch => return self.problem.full_grad(x),
                _ => self.problem.component_grad_into(i, x, &mut out)?,
            },
            Memory::Saga(m) => {
                self.problem.component_grad_into(i, x, &mut out)?;
                let d = out.len();
                let row = &m.table[i * d..(i + 1) * d];
                for (j, o) in out.iter_mut().enumerate() {
                    *o = *o - row[j] + m.mean.get(j);
                }
            }
            Memory::Lsvrg(a) => {
                self.problem.component_grad_into(i, x, &mut out)?;
                let at_anchor = self.problem.component_grad(i, &a.point)?;
                for ((o, h), full) in out.iter_mut().zip(&at_anchor).zip(&a.grad) {
                    *o = *o - h + full;
                }
            }
        }
        Ok(out)
    }

    /// Draws the next estimate at `x` and updates the memory.
    pub fn estimate(&mut self, x: &[f64]) -> Result<Vec<f64>> {
        let problem = self.problem;
        check_len(problem.dim(), x.len())?;
        let n = problem.n_components();
        if self.kind == EstimatorKind::FullBatch {
            self.gradient_count += n as u64;
            return problem.full_grad(x);
        }
        let i = self.stream.index(n);
        self.last_index = Some(i);
        let d = problem.dim();
        let mut fresh = vec![0.0; d];
        problem.component_grad_into(i, x, &mut fresh)?;
        self.gradient_count += 1;

        let g = match &mut self.memory {
            Memory::Stateless => fresh,
            Memory::Saga(m) => {
                let row = &mut m.table[i * d..(i + 1) * d];
                let g: Vec<f64> = (0..d).map(|j| fresh[j] - row[j] + m.mean.get(j)).collect();
                let delta = linalg::sub(&fresh, row);
                m.mean.add_scaled(1.0 / n as f64, &delta);
                row.copy_from_slice(&fresh);
                if let Some(points) = &mut m.points {
                    points[i].copy_from_slice(x);
                }
                g
            }
            Memory::Lsvrg(a) => {
                let at_anchor = problem.component_grad(i, &a.point)?;
                self.gradient_count += 1;
                let g: Vec<f64> = (0..d).map(|j| fresh[j] - at_anchor[j] + a.grad[j]).collect();
                let refresh = self.stream.bernoulli(a.p);
                self.last_refresh = Some(refresh);
                if refresh {
                    a.point.copy_from_slice(x);
                    a.grad = problem.full_grad(x)?;
                    self.gradient_count += n as u64;
                    self.refreshes += 1;
                }
                g
            }
        };
        Ok(g)
    }

    fn enumeration_guard(&self) -> Result<usize> {
        let n = self.problem.n_components();
        if n > MAX_ENUMERATION {
            Err(Error::Capacity {
                n,
                limit: MAX_ENUMERATION,
            })
        } else {
            Ok(n)
        }
    }

    /// Mean of [`estimate_for`](Self::estimate_for) over all `n` equally
    /// likely indices.
    pub fn exact_expectation(&self, x: &[f64]) -> Result<Vec<f64>> {
        let n = self.enumeration_guard()?;
        let d = self.problem.dim();
        let mut acc = CompensatedVec::from_values(vec![0.0; d]);
        for i in 0..n {
            acc.add_scaled(1.0, &self.estimate_for(i, x)?);
        }
        Ok(acc.to_vec().into_iter().map(|v| v / n as f64).collect())
    }

    /// Exact second moments by enumeration over the sampled index.
    pub fn variance(&self, x: &[f64]) -> Result<VarianceReport> {
        let n = self.enumeration_guard()?;
        let full = self.problem.full_grad(x)?;
        let mut var = KahanSum::new();
        let mut second = KahanSum::new();
        for i in 0..n {
            let g = self.estimate_for(i, x)?;
            var.add(linalg::dist_sq(&g, &full));
            second.add(linalg::norm_sq(&g));
        }
        Ok(VarianceReport {
            variance: var.value() / n as f64,
            second_moment: second.value() / n as f64,
        })
    }

    /// `∇f_i(y_i)` for the memory point `y_i` of component `i`: the SAGA table
    /// row or the gradient at the L-SVRG anchor. `None` without memory.
    pub fn memory_gradient(&self, i: usize) -> Result<Option<Vec<f64>>> {
        let d = self.problem.dim();
        match &self.memory {
            Memory::Stateless => Ok(None),
            Memory::Saga(m) => {
                if i >= self.problem.n_components() {
                    return Err(Error::IndexOutOfRange {
                        index: i,
                        len: self.problem.n_components(),
                    });
                }
                Ok(Some(m.table[i * d..(i + 1) * d].to_vec()))
            }
            Memory::Lsvrg(a) => self.problem.component_grad(i, &a.point).map(Some),
        }
    }

    /// The memory point of component `i` (SAGA needs `retain_points`).
    pub fn memory_point(&self, i: usize) -> Option<&[f64]> {
        match &self.memory {
            Memory::Stateless => None,
            Memory::Saga(m) => m.points.as_ref().map(|p| p[i].as_slice()),
            Memory::Lsvrg(a) => Some(&a.point),
        }
    }

    /// Probability that a given component's memory moves to the current
    /// iterate in one step: `1/n` for SAGA, `p` for L-SVRG.
    pub fn memory_update_probability(&self) -> Option<f64> {
        match &self.memory {
            Memory::Stateless => None,
            Memory::Saga(_) => Some(1.0 / self.problem.n_components() as f64),
            Memory::Lsvrg(a) => Some(a.p),
        }
    }

    pub fn saga_mean(&self) -> Option<Vec<f64>> {
        match &self.memory {
            Memory::Saga(m) => Some(m.mean.to_vec()),
            _ => None,
        }
    }

    /// Mean of the SAGA table rows recomputed from scratch.
    pub fn saga_table_mean(&self) -> Option<Vec<f64>> {
        let Memory::Saga(m) = &self.memory else {
            return None;
        };
        let d = self.problem.dim();
        let n = self.problem.n_components() as f64;
        let mut acc = CompensatedVec::from_values(vec![0.0; d]);
        for row in m.table.chunks(d) {
            acc.add_scaled(1.0, row);
        }
        Some(acc.to_vec().into_iter().map(|v| v / n).collect())
    }

    pub fn anchor(&self) -> Option<(&[f64], &[f64])> {
        match &self.memory {
            Memory::Lsvrg(a) => Some((&a.point, &a.grad)),
            _ => None,
        }
    }
}
