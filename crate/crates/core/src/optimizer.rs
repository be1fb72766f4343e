//! The adaptive loopless variance-reduced driver.
//!
//! Each step samples an index, forms the estimate `g_t`, updates the estimator
//! memory, folds `g_t` into the preconditioner and takes the (optionally
//! projected) step `x_{t+1} = Π(x_t - eta * A_t^+ g_t)`. The output is the
//! running average of `x_1..x_T`.

use crate::error::{check_len, Error, Result};
use crate::estimators::{Estimator, EstimatorKind, EstimatorOptions};
use crate::linalg;
use crate::problems::{FiniteSumProblem, ProblemKind};
use crate::scaling::{Discounts, Domain, Metric, ScalingKind, ScalingState};

#[derive(Debug, Clone)]
pub struct OptimizerConfig {
    pub estimator: EstimatorKind,
    pub scaling: ScalingKind,
    pub eta: f64,
    /// L-SVRG refresh probability; `None` means `1/n`.
    pub p: Option<f64>,
    /// Number of iterates `T` (so `T - 1` update steps).
    pub iterations: usize,
    pub seed: u64,
    pub domain: Domain,
    pub project: bool,
    /// A checkpoint is recorded at `t = 1, 1 + stride, ...` and at `t = T`.
    pub checkpoint_stride: usize,
    /// Keep every iterate, estimate and preconditioner (lemma checks).
    pub record_history: bool,
    pub discounts: Discounts,
}

impl OptimizerConfig {
    pub fn new(estimator: EstimatorKind, scaling: ScalingKind, eta: f64, iterations: usize) -> Self {
        Self {
            estimator,
            scaling,
            eta,
            p: None,
            iterations,
            seed: 0,
            domain: Domain::Unconstrained,
            project: false,
            checkpoint_stride: 1,
            record_history: false,
            discounts: Discounts::default(),
        }
    }

    /// Enables projection onto `domain`.
    pub fn projected(mut self, domain: Domain) -> Self {
        self.domain = domain;
        self.project = true;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_history(mut self) -> Self {
        self.record_history = true;
        self
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.checkpoint_stride = stride;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::invalid("iteration count must be at least 1"));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::invalid(format!("eta = {} must be positive", self.eta)));
        }
        if self.checkpoint_stride == 0 {
            return Err(Error::invalid("checkpoint stride must be at least 1"));
        }
        if let Some(p) = self.p {
            if !(p > 0.0 && p <= 1.0) {
                return Err(Error::invalid(format!("p = {p} outside (0, 1]")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    /// Iterate index `t` (1-based).
    pub t: usize,
    pub gradients: u64,
    /// `f(x_t)`
    pub objective: f64,
    /// `f(x̄_t)`
    pub average_objective: f64,
    /// `||g_{t-1}||^2`, the estimate that produced `x_t`.
    pub grad_norm_sq: Option<f64>,
    /// `Tr(A_{t-1})`
    pub preconditioner_trace: f64,
}

/// Full per-step record. `iterates[k]` and `objectives[k]` belong to
/// `x_{k+1}`; `estimates[k]`, `roots[k]`, `indices[k]` and `refreshes[k]` to
/// step `k + 1`, i.e. `g_{k+1}` and `A_{k+1}`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct History {
    pub iterates: Vec<Vec<f64>>,
    pub objectives: Vec<f64>,
    pub estimates: Vec<Vec<f64>>,
    /// Empty for the identity scaling.
    pub roots: Vec<Metric>,
    pub indices: Vec<Option<usize>>,
    pub refreshes: Vec<Option<bool>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub estimator: EstimatorKind,
    pub scaling: ScalingKind,
    pub dim: usize,
    pub n_components: usize,
    pub eta: f64,
    /// Number of iterates produced (`T` for a completed run).
    pub iterations: usize,
    pub checkpoints: Vec<Checkpoint>,
    pub history: Option<History>,
    /// `x̄_T`
    pub average: Vec<f64>,
    pub last_iterate: Vec<f64>,
    pub gradient_count: u64,
    pub refresh_count: u64,
}

impl RunTrace {
    pub fn alpha(&self) -> Option<f64> {
        self.scaling.alpha(self.dim)
    }

    pub fn final_checkpoint(&self) -> Option<&Checkpoint> {
        self.checkpoints.last()
    }
}

/// Step-by-step driver; [`run`] is the batch entry point.
#[derive(Debug, Clone)]
pub struct Solver<'p> {
    config: OptimizerConfig,
    problem: &'p FiniteSumProblem,
    estimator: Estimator<'p>,
    scaling: ScalingState,
    x: Vec<f64>,
    average: Vec<f64>,
    t: usize,
    last_grad_sq: Option<f64>,
    history: Option<History>,
}

impl<'p> Solver<'p> {
    /// Initializes at `x1`, projected into the domain when projection is on.
    pub fn new(problem: &'p FiniteSumProblem, config: OptimizerConfig, x1: &[f64]) -> Result<Self> {
        config.validate()?;
        check_len(problem.dim(), x1.len())?;
        if !linalg::all_finite(x1) {
            return Err(Error::NonFinite("initial point"));
        }
        if let Domain::Box { lower, .. } = &config.domain {
            check_len(problem.dim(), lower.len())?;
        }
        let mut x = x1.to_vec();
        if config.project {
            config.domain.project_in_place(&mut x);
        }
        let estimator = Estimator::new(
            config.estimator,
            problem,
            &x,
            EstimatorOptions {
                p: config.p,
                seed: config.seed,
                retain_points: false,
            },
        )?;
        let scaling = ScalingState::new(config.scaling, problem.dim(), config.eta, config.discounts)?;
        let history = if config.record_history {
            Some(History {
                iterates: vec![x.clone()],
                objectives: vec![problem.value(&x)?],
                ..Default::default()
            })
        } else {
            None
        };
        Ok(Self {
            average: x.clone(),
            x,
            config,
            problem,
            estimator,
            scaling,
            t: 1,
            last_grad_sq: None,
            history,
        })
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn iterate(&self) -> &[f64] {
        &self.x
    }

    pub fn average(&self) -> &[f64] {
        &self.average
    }

    pub fn gradient_count(&self) -> u64 {
        self.estimator.gradient_count()
    }

    pub fn estimator(&self) -> &Estimator<'p> {
        &self.estimator
    }

    pub fn scaling(&self) -> &ScalingState {
        &self.scaling
    }

    pub fn config(&self) -> &OptimizerConfig {
        &self.config
    }

    /// One update `x_t -> x_{t+1}`. A non-finite estimate or iterate is
    /// reported as [`Error::NonFinite`].
    pub fn step(&mut self) -> Result<()> {
        let g = self.estimator.estimate(&self.x)?;
        if !linalg::all_finite(&g) {
            return Err(Error::NonFinite("gradient estimate"));
        }
        self.scaling.step(&mut self.x, &g)?;
        if self.config.project {
            self.config.domain.project_in_place(&mut self.x);
        }
        if !linalg::all_finite(&self.x) {
            return Err(Error::NonFinite("iterate"));
        }
        self.t += 1;
        let w = 1.0 / self.t as f64;
        for (a, xi) in self.average.iter_mut().zip(&self.x) {
            *a += (xi - *a) * w;
        }
        self.last_grad_sq = Some(linalg::norm_sq(&g));
        if let Some(h) = &mut self.history {
            h.iterates.push(self.x.clone());
            h.objectives.push(self.problem.value(&self.x)?);
            if let Some(root) = self.scaling.root() {
                h.roots.push(root);
            }
            h.estimates.push(g);
            h.indices.push(self.estimator.last_index());
            h.refreshes.push(self.estimator.last_refresh());
        }
        Ok(())
    }

    /// Evaluates `f(x_t)` and `f(x̄_t)`.
    pub fn checkpoint(&self) -> Result<Checkpoint> {
        Ok(Checkpoint {
            t: self.t,
            gradients: self.gradient_count(),
            objective: self.problem.value(&self.x)?,
            average_objective: self.problem.value(&self.average)?,
            grad_norm_sq: self.last_grad_sq,
            preconditioner_trace: self.scaling.root_trace(),
        })
    }

    pub fn into_trace(self, checkpoints: Vec<Checkpoint>) -> RunTrace {
        RunTrace {
            estimator: self.config.estimator,
            scaling: self.config.scaling,
            dim: self.problem.dim(),
            n_components: self.problem.n_components(),
            eta: self.config.eta,
            iterations: self.t,
            checkpoints,
            history: self.history,
            average: self.average,
            last_iterate: self.x,
            gradient_count: self.estimator.gradient_count(),
            refresh_count: self.estimator.refresh_count(),
        }
    }
}

fn checkpoint_finite(c: &Checkpoint) -> bool {
    c.objective.is_finite() && c.average_objective.is_finite()
}

/// Runs `T - 1` steps from `x1` and records checkpoints.
///
/// A non-finite iterate or objective ends the run with [`Error::Diverged`],
/// whose trace stops at the last finite checkpoint.
pub fn run(config: &OptimizerConfig, problem: &FiniteSumProblem, x1: &[f64]) -> Result<RunTrace> {
    let mut solver = Solver::new(problem, config.clone(), x1)?;
    let stride = config.checkpoint_stride;
    let first = solver.checkpoint()?;
    if !checkpoint_finite(&first) {
        return Err(Error::Diverged {
            iteration: 1,
            trace: Box::new(solver.into_trace(Vec::new())),
        });
    }
    let mut checkpoints = vec![first];
    for _ in 1..config.iterations {
        match solver.step() {
            Ok(()) => {}
            Err(Error::NonFinite(_)) => {
                let iteration = solver.t() + 1;
                return Err(Error::Diverged {
                    iteration,
                    trace: Box::new(solver.into_trace(checkpoints)),
                });
            }
            Err(e) => return Err(e),
        }
        let t = solver.t();
        if (t - 1) % stride == 0 || t == config.iterations {
            let c = solver.checkpoint()?;
            if !checkpoint_finite(&c) {
                return Err(Error::Diverged {
                    iteration: t,
                    trace: Box::new(solver.into_trace(checkpoints)),
                });
            }
            checkpoints.push(c);
        }
    }
    Ok(solver.into_trace(checkpoints))
}

/// High-accuracy minimizer used to measure suboptimality.
#[derive(Debug, Clone, PartialEq)]
pub struct Reference {
    pub x: Vec<f64>,
    pub value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
}

pub const DEFAULT_REFERENCE_ITERATIONS: usize = 200_000;

/// [`reference_solution_with`] with the default iteration cap.
pub fn reference_solution(problem: &FiniteSumProblem, tol: f64) -> Result<Reference> {
    reference_solution_with(problem, tol, DEFAULT_REFERENCE_ITERATIONS)
}

/// Minimizes `f` until `||∇f|| <= tol`.
///
/// Least squares first tries the normal equations; otherwise (or when that
/// solve is not accurate enough) full-batch gradient descent with
/// Barzilai-Borwein trial steps and backtracking runs from the best point
/// found. Separable logistic data has no minimizer and ends in
/// [`Error::NotConverged`].
pub fn reference_solution_with(problem: &FiniteSumProblem, tol: f64, max_iter: usize) -> Result<Reference> {
    if !(tol > 0.0) {
        return Err(Error::invalid("tolerance must be positive"));
    }
    let mut x = vec![0.0; problem.dim()];
    if problem.kind() == ProblemKind::LeastSquares {
        if let Some(sol) = normal_equations(problem) {
            x = sol;
        }
    }
    let mut g = problem.full_grad(&x)?;
    let mut fx = problem.value(&x)?;
    let lip = problem.smoothness_upper_bound().max(f64::MIN_POSITIVE);
    let mut step = 1.0 / lip;
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;

    for iter in 0..=max_iter {
        let gnorm = linalg::norm(&g);
        if gnorm <= tol {
            return Ok(Reference {
                x,
                value: fx,
                grad_norm: gnorm,
                iterations: iter,
            });
        }
        if iter == max_iter {
            return Err(Error::NotConverged {
                iterations: iter,
                grad_norm: gnorm,
            });
        }
        if let Some((px, pg)) = &prev {
            let s = linalg::sub(&x, px);
            let y = linalg::sub(&g, pg);
            let sy = linalg::dot(&s, &y);
            if sy > 0.0 {
                step = (linalg::norm_sq(&s) / sy).clamp(1e-3 / lip, 1e6 / lip);
            }
        }
        let gsq = gnorm * gnorm;
        // Slack of a few ulps of f so that steps near the optimum are not
        // rejected on rounding noise alone.
        let slack = 8.0 * f64::EPSILON * (1.0 + fx.abs());
        let mut accepted = None;
        while step * gsq > 0.0 && step > 1e-30 {
            let mut cand = x.clone();
            linalg::axpy(-step, &g, &mut cand);
            let fc = problem.value(&cand)?;
            if fc <= fx - 1e-4 * step * gsq + slack {
                accepted = Some((cand, fc));
                break;
            }
            step *= 0.5;
        }
        let Some((cand, fc)) = accepted else {
            return Err(Error::NotConverged {
                iterations: iter,
                grad_norm: gnorm,
            });
        };
        let gc = problem.full_grad(&cand)?;
        prev = Some((std::mem::replace(&mut x, cand), std::mem::replace(&mut g, gc)));
        fx = fc;
    }
    unreachable!("loop returns by max_iter")
}

/// Solves `H x = r` for the weighted least-squares normal equations by
/// Cholesky; `None` if `H` is not numerically positive definite.
fn normal_equations(problem: &FiniteSumProblem) -> Option<Vec<f64>> {
    let d = problem.dim();
    let data = problem.data();
    let n = problem.n_components() as f64;
    let mut h = vec![0.0; d * d];
    let mut r = vec![0.0; d];
    for i in 0..problem.n_components() {
        let samples = problem.component_samples(i);
        let w = 1.0 / (n * samples.len() as f64);
        for s in samples {
            let a = data.row(s);
            let b = data.target(s)?;
            for j in 0..d {
                r[j] += w * b * a[j];
                for k in 0..=j {
                    h[j * d + k] += w * a[j] * a[k];
                }
            }
        }
    }
    // In-place lower Cholesky factor.
    for j in 0..d {
        let mut diag = h[j * d + j];
        for k in 0..j {
            diag -= h[j * d + k] * h[j * d + k];
        }
        if !(diag > 1e-12 * (1.0 + h[j * d + j].abs())) {
            return None;
        }
        let ljj = diag.sqrt();
        h[j * d + j] = ljj;
        for i in j + 1..d {
            let mut v = h[i * d + j];
            for k in 0..j {
                v -= h[i * d + k] * h[j * d + k];
            }
            h[i * d + j] = v / ljj;
        }
    }
    let mut y = r;
    for i in 0..d {
        for k in 0..i {
            y[i] -= h[i * d + k] * y[k];
        }
        y[i] /= h[i * d + i];
    }
    for i in (0..d).rev() {
        for k in i + 1..d {
            y[i] -= h[k * d + i] * y[k];
        }
        y[i] /= h[i * d + i];
    }
    Some(y)
}

/// Power-law fit `gap ≈ C * t^slope`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub constant: f64,
    pub r_squared: f64,
    pub points: usize,
}

/// Least-squares fit of `log gap` against `log t`. Points with a
/// nonpositive or non-finite gap are skipped.
pub fn fit_power_law(ts: &[f64], gaps: &[f64]) -> Result<RateFit> {
    let pts: Vec<(f64, f64)> = ts
        .iter()
        .zip(gaps)
        .filter(|(t, g)| **t > 0.0 && **g > 0.0 && g.is_finite())
        .map(|(t, g)| (t.ln(), g.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::Analysis(format!(
            "{} usable points for a rate fit",
            pts.len()
        )));
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(Error::Analysis("rate fit needs distinct t values".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy > 0.0 { (sxy * sxy) / (sxx * syy) } else { 1.0 };
    Ok(RateFit {
        slope,
        constant: intercept.exp(),
        r_squared,
        points: pts.len(),
    })
}

/// Fits the decay of the mean gap `f(x̄_t) - f*` over the tail half of the
/// checkpoints shared by `traces`.
pub fn rate_fit(traces: &[RunTrace], f_star: f64) -> Result<RateFit> {
    let Some(first) = traces.first() else {
        return Err(Error::Analysis("no traces".into()));
    };
    let ts: Vec<usize> = first.checkpoints.iter().map(|c| c.t).collect();
    for tr in traces {
        if tr.checkpoints.len() != ts.len() || tr.checkpoints.iter().zip(&ts).any(|(c, t)| c.t != *t) {
            return Err(Error::Analysis("traces have different checkpoints".into()));
        }
    }
    let m = traces.len() as f64;
    let tail = ts.len() / 2;
    let (tt, gaps): (Vec<f64>, Vec<f64>) = (tail..ts.len())
        .map(|k| {
            let mean = traces
                .iter()
                .map(|tr| tr.checkpoints[k].average_objective - f_star)
                .sum::<f64>()
                / m;
            (ts[k] as f64, mean)
        })
        .unzip();
    fit_power_law(&tt, &gaps)
}
