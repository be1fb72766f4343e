//! Finite-sum objectives `f(x) = (1/n) sum_i f_i(x)` and their data.
//!
//! Samples are grouped into fixed mini-batches when the problem is built; each
//! group is one component `f_i` (the mean loss over its samples). The
//! multinomial-logistic parameter is a class-major `K x p` matrix flattened
//! row by row, so `d = K * p`. No regularization term is added.

mod dataset;
pub mod synthetic;

pub use dataset::{
    load_dataset, minmax_scale, read_csv, split_indices, train_test_split, CsvOptions, Dataset,
    LabelKind, Labels,
};

use crate::error::{check_len, Error, Result};
use crate::linalg::{self, CompensatedVec, KahanSum};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProblemKind {
    MultinomialLogistic,
    LeastSquares,
}

#[derive(Debug, Clone)]
pub struct FiniteSumProblem {
    kind: ProblemKind,
    data: Dataset,
    /// Component `i` owns samples `offsets[i]..offsets[i + 1]`.
    offsets: Vec<usize>,
    n_classes: usize,
    dim: usize,
    smoothness: f64,
}

impl FiniteSumProblem {
    /// Builds the objective, assigning consecutive samples to components of
    /// `batch_size` samples each (the last one may be smaller).
    pub fn new(kind: ProblemKind, data: Dataset, batch_size: usize) -> Result<Self> {
        if batch_size == 0 {
            return Err(Error::invalid("batch size must be at least 1"));
        }
        let n_classes = match (kind, data.labels()) {
            (ProblemKind::MultinomialLogistic, Labels::Classes { n_classes, .. }) => {
                if *n_classes == 0 {
                    return Err(Error::invalid("logistic problem needs at least one class"));
                }
                *n_classes
            }
            (ProblemKind::LeastSquares, Labels::Targets(_)) => 1,
            (ProblemKind::MultinomialLogistic, _) => {
                return Err(Error::invalid("logistic problem needs class labels"))
            }
            (ProblemKind::LeastSquares, _) => {
                return Err(Error::invalid("least-squares problem needs real targets"))
            }
        };
        let n = data.n_samples();
        let mut offsets: Vec<usize> = (0..n).step_by(batch_size).collect();
        offsets.push(n);
        let dim = n_classes * data.n_features();
        let mut problem = Self {
            kind,
            data,
            offsets,
            n_classes,
            dim,
            smoothness: 0.0,
        };
        problem.smoothness = problem.compute_smoothness();
        Ok(problem)
    }

    pub fn logistic(data: Dataset, batch_size: usize) -> Result<Self> {
        Self::new(ProblemKind::MultinomialLogistic, data, batch_size)
    }

    pub fn least_squares(data: Dataset, batch_size: usize) -> Result<Self> {
        Self::new(ProblemKind::LeastSquares, data, batch_size)
    }

    pub fn kind(&self) -> ProblemKind {
        self.kind
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    /// Number of components `n` (mini-batch groups).
    pub fn n_components(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `K` for logistic problems, 1 for least squares.
    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    /// Sample indices owned by component `i`.
    pub fn component_samples(&self, i: usize) -> std::ops::Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }

    /// Upper bound `L̂` on the smoothness constant of every component.
    ///
    /// Least squares: the batch mean of `|a|^2` bounds the largest eigenvalue
    /// of the batch Hessian. Logistic: the softmax Hessian has spectral norm at
    /// most 1/2, so `|a|^2 / 2` per sample. Both are maximized over components.
    pub fn smoothness_upper_bound(&self) -> f64 {
        self.smoothness
    }

    fn compute_smoothness(&self) -> f64 {
        let factor = match self.kind {
            ProblemKind::LeastSquares => 1.0,
            ProblemKind::MultinomialLogistic => 0.5,
        };
        (0..self.n_components())
            .map(|i| {
                let r = self.component_samples(i);
                let len = r.len() as f64;
                let total: f64 = r.map(|s| linalg::norm_sq(self.data.row(s))).sum();
                factor * total / len
            })
            .fold(0.0, f64::max)
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i < self.n_components() {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange {
                index: i,
                len: self.n_components(),
            })
        }
    }

    /// Class logits `z_k = <x_k, a>` for one feature row.
    pub fn logits_into(&self, x: &[f64], a: &[f64], out: &mut [f64]) {
        let p = a.len();
        for (k, z) in out.iter_mut().enumerate() {
            *z = linalg::dot(&x[k * p..(k + 1) * p], a);
        }
    }

    fn sample_loss(&self, s: usize, x: &[f64], logits: &mut [f64]) -> f64 {
        let a = self.data.row(s);
        match self.kind {
            ProblemKind::LeastSquares => {
                let r = linalg::dot(x, a) - self.data.target(s).unwrap_or_default();
                0.5 * r * r
            }
            ProblemKind::MultinomialLogistic => {
                self.logits_into(x, a, logits);
                let y = self.data.class(s).unwrap_or_default();
                log_sum_exp(logits) - logits[y]
            }
        }
    }

    /// Adds `weight * grad loss_s(x)` to `out`.
    fn add_sample_grad(&self, s: usize, x: &[f64], weight: f64, logits: &mut [f64], out: &mut [f64]) {
        let a = self.data.row(s);
        match self.kind {
            ProblemKind::LeastSquares => {
                let r = linalg::dot(x, a) - self.data.target(s).unwrap_or_default();
                linalg::axpy(weight * r, a, out);
            }
            ProblemKind::MultinomialLogistic => {
                let p = a.len();
                self.logits_into(x, a, logits);
                let lse = log_sum_exp(logits);
                let y = self.data.class(s).unwrap_or_default();
                for (k, z) in logits.iter().enumerate() {
                    let mut coef = (z - lse).exp();
                    if k == y {
                        coef -= 1.0;
                    }
                    linalg::axpy(weight * coef, a, &mut out[k * p..(k + 1) * p]);
                }
            }
        }
    }

    pub fn component_value(&self, i: usize, x: &[f64]) -> Result<f64> {
        self.check_index(i)?;
        check_len(self.dim, x.len())?;
        Ok(self.component_value_unchecked(i, x, &mut vec![0.0; self.n_classes]))
    }

    fn component_value_unchecked(&self, i: usize, x: &[f64], logits: &mut [f64]) -> f64 {
        let r = self.component_samples(i);
        let len = r.len() as f64;
        let total: KahanSum = r.map(|s| self.sample_loss(s, x, logits)).collect();
        total.value() / len
    }

    /// `f(x)`, the mean of the component values.
    pub fn value(&self, x: &[f64]) -> Result<f64> {
        check_len(self.dim, x.len())?;
        let mut logits = vec![0.0; self.n_classes];
        let n = self.n_components();
        let total: KahanSum = (0..n)
            .map(|i| self.component_value_unchecked(i, x, &mut logits))
            .collect();
        Ok(total.value() / n as f64)
    }

    /// Writes `∇f_i(x)` into `out`.
    pub fn component_grad_into(&self, i: usize, x: &[f64], out: &mut [f64]) -> Result<()> {
        self.check_index(i)?;
        check_len(self.dim, x.len())?;
        check_len(self.dim, out.len())?;
        out.fill(0.0);
        let r = self.component_samples(i);
        let w = 1.0 / r.len() as f64;
        let mut logits = vec![0.0; self.n_classes];
        for s in r {
            self.add_sample_grad(s, x, w, &mut logits, out);
        }
        Ok(())
    }

    pub fn component_grad(&self, i: usize, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim];
        self.component_grad_into(i, x, &mut out)?;
        Ok(out)
    }

    /// `∇f(x)`: the mean of all `n` component gradients.
    pub fn full_grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.dim, x.len())?;
        let n = self.n_components();
        let mut acc = CompensatedVec::from_values(vec![0.0; self.dim]);
        let mut gi = vec![0.0; self.dim];
        for i in 0..n {
            self.component_grad_into(i, x, &mut gi)?;
            acc.add_scaled(1.0, &gi);
        }
        let mut out = acc.to_vec();
        for v in &mut out {
            *v /= n as f64;
        }
        Ok(out)
    }

    /// `D_{f_i}(y, x) = f_i(y) - f_i(x) - <∇f_i(x), y - x>`.
    pub fn bregman_divergence(&self, i: usize, y: &[f64], x: &[f64]) -> Result<f64> {
        check_len(self.dim, y.len())?;
        let gx = self.component_grad(i, x)?;
        let diff = linalg::sub(y, x);
        Ok(self.component_value(i, y)? - self.component_value(i, x)? - linalg::dot(&gx, &diff))
    }
}

pub(crate) fn log_sum_exp(z: &[f64]) -> f64 {
    let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}
