//! Executable checks of the inequalities behind the convergence analysis.
//!
//! Each check evaluates both sides on recorded data and returns a
//! [`LemmaReport`]; a report passes when `rhs - lhs >= -tol * (1 + |rhs|)`.
//! Sums are compensated so the tolerance reflects the inequality rather than
//! rounding drift.

use std::fmt;

use crate::error::{check_len, Error, Result};
use crate::estimators::Estimator;
use crate::linalg::{self, KahanSum};
use crate::optimizer::{History, RunTrace};
use crate::problems::FiniteSumProblem;
use crate::scaling::{mahalanobis_norm_sq, Domain, Metric};

pub const DEFAULT_TOLERANCE: f64 = 1e-9;
pub const UNBIASEDNESS_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Lemma {
    /// `Σ<g_t, x_t - x> <= α(η + D²/2η) sqrt(Σ||g_t||²)`
    Regret,
    /// `Σ ||g_t||²_{A_t^+} <= 2 Tr(A_T)`
    TraceSum,
    /// `Tr(A_T) <= α sqrt(Σ||g_t||²)`
    TraceNorm,
    /// `Σ ||x_t - x||²_{A_t - A_{t-1}} <= D² Tr(A_T)`
    WeightedDistance,
    /// `||∇f(x)||² <= 2L (f(x) - f*)`
    GradSuboptimality,
    /// `E_i ||∇f_i(x) - ∇f_i(x*)||² <= 2L (f(x) - f*)`
    ComponentGradSuboptimality,
    /// `E||g||² <= 2E||∇f_i(x) - ∇f_i(x*)||² + 2E||∇f_i(y_i) - ∇f_i(x*)||²`
    VarianceDecomposition,
    /// Memory term bounded by the expected drop of the Bregman potential.
    MemoryBregman,
    /// `E[g] = ∇f(x)` (lhs is the max coordinate deviation).
    Unbiasedness,
    /// `A (A^+ g) = g` (lhs is the max relative residual).
    PseudoInverse,
    /// Monte-Carlo check of the telescoping bound on `Σ||g_t||²`.
    Telescoping,
    /// Monte-Carlo check of the `O(1/T)` suboptimality bound.
    RateBound,
    /// Stored average equals the mean of the recorded iterates.
    AverageIterate,
}

impl fmt::Display for Lemma {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Lemma::Regret => "regret",
            Lemma::TraceSum => "trace_sum",
            Lemma::TraceNorm => "trace_norm",
            Lemma::WeightedDistance => "weighted_distance",
            Lemma::GradSuboptimality => "grad_suboptimality",
            Lemma::ComponentGradSuboptimality => "component_grad_suboptimality",
            Lemma::VarianceDecomposition => "variance_decomposition",
            Lemma::MemoryBregman => "memory_bregman",
            Lemma::Unbiasedness => "unbiasedness",
            Lemma::PseudoInverse => "pseudo_inverse",
            Lemma::Telescoping => "telescoping",
            Lemma::RateBound => "rate_bound",
            Lemma::AverageIterate => "average_iterate",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LemmaReport {
    pub lemma: Lemma,
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs - lhs`
    pub slack: f64,
    pub pass: bool,
    pub context: String,
}

impl LemmaReport {
    pub fn new(lemma: Lemma, lhs: f64, rhs: f64, tol: f64, context: impl Into<String>) -> Self {
        let slack = rhs - lhs;
        let pass = slack >= -tol * (1.0 + rhs.abs());
        Self {
            lemma,
            lhs,
            rhs,
            slack,
            pass,
            context: context.into(),
        }
    }
}

impl fmt::Display for LemmaReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] {}: lhs={:.6e} rhs={:.6e} slack={:.3e} ({})",
            if self.pass { "PASS" } else { "FAIL" },
            self.lemma,
            self.lhs,
            self.rhs,
            self.slack,
            self.context
        )
    }
}

fn context(trace: &RunTrace) -> String {
    format!(
        "{:?}/{:?} d={} n={} t=1..{}",
        trace.estimator, trace.scaling, trace.dim, trace.n_components, trace.iterations
    )
}

/// History plus the AdaGrad factor `α`; other scalings have no such bounds.
fn adagrad_history(trace: &RunTrace) -> Result<(&History, f64)> {
    let alpha = trace
        .alpha()
        .ok_or_else(|| Error::Unsupported(format!("no regret bound for {:?}", trace.scaling)))?;
    let h = trace.history.as_ref().ok_or(Error::MissingInput("recorded history"))?;
    if h.roots.len() != h.estimates.len() || h.iterates.len() < h.estimates.len() {
        return Err(Error::MissingInput("consistent history lengths"));
    }
    Ok((h, alpha))
}

fn finite_diameter(domain: &Domain) -> Result<f64> {
    let d = domain.diameter();
    if d.is_finite() {
        Ok(d)
    } else {
        Err(Error::invalid("bound needs a bounded domain"))
    }
}

fn grad_sq_sum(h: &History) -> f64 {
    linalg::compensated_sum(h.estimates.iter().map(|g| linalg::norm_sq(g)))
}

/// Regret inequality over the recorded steps `t = 1..T-1`.
pub fn check_regret_bound(trace: &RunTrace, domain: &Domain, eta: f64, x_ref: &[f64]) -> Result<LemmaReport> {
    let (h, alpha) = adagrad_history(trace)?;
    check_len(trace.dim, x_ref.len())?;
    let d = finite_diameter(domain)?;
    let lhs = linalg::compensated_sum(
        h.estimates
            .iter()
            .zip(&h.iterates)
            .map(|(g, x)| linalg::dot(g, &linalg::sub(x, x_ref))),
    );
    let rhs = alpha * (eta + d * d / (2.0 * eta)) * grad_sq_sum(h).sqrt();
    Ok(LemmaReport::new(Lemma::Regret, lhs, rhs, DEFAULT_TOLERANCE, context(trace)))
}

/// The two trace inequalities, in the order (sum bound, trace bound).
pub fn check_trace_bounds(trace: &RunTrace) -> Result<(LemmaReport, LemmaReport)> {
    let (h, alpha) = adagrad_history(trace)?;
    let weighted = linalg::compensated_sum(
        h.estimates
            .iter()
            .zip(&h.roots)
            .map(|(g, a)| linalg::dot(g, &a.pinv_apply(g))),
    );
    let tr_last = h.roots.last().map_or(0.0, Metric::trace);
    let ctx = context(trace);
    Ok((
        LemmaReport::new(Lemma::TraceSum, weighted, 2.0 * tr_last, DEFAULT_TOLERANCE, ctx.clone()),
        LemmaReport::new(Lemma::TraceNorm, tr_last, alpha * grad_sq_sum(h).sqrt(), DEFAULT_TOLERANCE, ctx),
    ))
}

/// Weighted distance inequality with `A_0 = 0`.
pub fn check_weighted_distance(trace: &RunTrace, domain: &Domain, x_ref: &[f64]) -> Result<LemmaReport> {
    let (h, _) = adagrad_history(trace)?;
    check_len(trace.dim, x_ref.len())?;
    let d = finite_diameter(domain)?;
    let mut lhs = KahanSum::new();
    let mut prev: Option<&Metric> = None;
    for (a, x) in h.roots.iter().zip(&h.iterates) {
        let inc = match prev {
            None => a.clone(),
            Some(p) => a.difference(p)?,
        };
        lhs.add(mahalanobis_norm_sq(&inc, &linalg::sub(x, x_ref)));
        prev = Some(a);
    }
    let tr_last = h.roots.last().map_or(0.0, Metric::trace);
    Ok(LemmaReport::new(
        Lemma::WeightedDistance,
        lhs.value(),
        d * d * tr_last,
        DEFAULT_TOLERANCE,
        context(trace),
    ))
}

/// `||∇f(x)||² <= 2L̂ (f(x) - f*)`; the squared form of the gradient bound.
pub fn check_grad_subopt(problem: &FiniteSumProblem, x: &[f64], f_star: f64) -> Result<LemmaReport> {
    let lhs = linalg::norm_sq(&problem.full_grad(x)?);
    let rhs = 2.0 * problem.smoothness_upper_bound() * (problem.value(x)? - f_star);
    Ok(LemmaReport::new(
        Lemma::GradSuboptimality,
        lhs,
        rhs,
        DEFAULT_TOLERANCE,
        format!("d={}", problem.dim()),
    ))
}

/// `(1/n) Σ ||∇f_i(x) - ∇f_i(x*)||² <= 2L̂ (f(x) - f*)`.
pub fn check_component_grad_subopt(
    problem: &FiniteSumProblem,
    x: &[f64],
    x_star: &[f64],
    f_star: f64,
) -> Result<LemmaReport> {
    let n = problem.n_components();
    let mut acc = KahanSum::new();
    for i in 0..n {
        let a = problem.component_grad(i, x)?;
        let b = problem.component_grad(i, x_star)?;
        acc.add(linalg::dist_sq(&a, &b));
    }
    let rhs = 2.0 * problem.smoothness_upper_bound() * (problem.value(x)? - f_star);
    Ok(LemmaReport::new(
        Lemma::ComponentGradSuboptimality,
        acc.value() / n as f64,
        rhs,
        DEFAULT_TOLERANCE,
        format!("n={n}"),
    ))
}

/// Second moment of a memory-based estimate against its decomposition at
/// `x*`, by enumeration over the sampled index.
pub fn check_variance_decomposition(est: &Estimator<'_>, x: &[f64], x_star: &[f64]) -> Result<LemmaReport> {
    let problem = est.problem();
    let n = problem.n_components();
    let second = est.variance(x)?.second_moment;
    let mut fresh = KahanSum::new();
    let mut stale = KahanSum::new();
    for i in 0..n {
        let gs = problem.component_grad(i, x_star)?;
        let gx = problem.component_grad(i, x)?;
        let gy = est
            .memory_gradient(i)?
            .ok_or_else(|| Error::Unsupported(format!("{:?} keeps no memory", est.kind())))?;
        fresh.add(linalg::dist_sq(&gx, &gs));
        stale.add(linalg::dist_sq(&gy, &gs));
    }
    let rhs = 2.0 * (fresh.value() + stale.value()) / n as f64;
    Ok(LemmaReport::new(
        Lemma::VarianceDecomposition,
        second,
        rhs,
        DEFAULT_TOLERANCE,
        format!("{:?} n={n}", est.kind()),
    ))
}

/// Memory term of the estimator against the one-step change of the Bregman
/// potential `Σ_i D_{f_i}(y_i, x*)`:
///
/// `(1/2L̂) E_i ||∇f_i(y_i) - ∇f_i(x*)||² <= f(x) - f* + Φ - E[Φ']`
///
/// where each memory point moves to `x` with the estimator's update
/// probability. The inequality is stated for probability `1/n`.
pub fn check_memory_bregman(est: &Estimator<'_>, x: &[f64], x_star: &[f64], f_star: f64) -> Result<LemmaReport> {
    let problem = est.problem();
    let n = problem.n_components();
    let q = est
        .memory_update_probability()
        .ok_or_else(|| Error::Unsupported(format!("{:?} keeps no memory", est.kind())))?;
    let mut memory_term = KahanSum::new();
    let mut phi = KahanSum::new();
    let mut at_x = KahanSum::new();
    for i in 0..n {
        let y = est.memory_point(i).ok_or(Error::MissingInput("retained memory points"))?;
        let gy = problem.component_grad(i, y)?;
        let gs = problem.component_grad(i, x_star)?;
        memory_term.add(linalg::dist_sq(&gy, &gs));
        phi.add(problem.bregman_divergence(i, y, x_star)?);
        at_x.add(problem.bregman_divergence(i, x, x_star)?);
    }
    let lhs = memory_term.value() / (2.0 * problem.smoothness_upper_bound() * n as f64);
    let phi = phi.value();
    let expected_next = q * at_x.value() + (1.0 - q) * phi;
    let rhs = problem.value(x)? - f_star + phi - expected_next;
    Ok(LemmaReport::new(
        Lemma::MemoryBregman,
        lhs,
        rhs,
        DEFAULT_TOLERANCE,
        format!("{:?} n={n} q={q}", est.kind()),
    ))
}

/// Largest coordinate gap between the enumerated expectation and `∇f(x)`.
pub fn check_unbiasedness(est: &Estimator<'_>, x: &[f64]) -> Result<LemmaReport> {
    let mean = est.exact_expectation(x)?;
    let full = est.problem().full_grad(x)?;
    let dev = mean
        .iter()
        .zip(&full)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(LemmaReport::new(
        Lemma::Unbiasedness,
        dev,
        0.0,
        UNBIASEDNESS_TOLERANCE,
        format!("{:?}", est.kind()),
    ))
}

/// `A (A^+ g) = g` measured as the max residual relative to `max|g|`.
pub fn check_pseudo_inverse(root: &Metric, g: &[f64]) -> LemmaReport {
    let back = root.apply(&root.pinv_apply(g));
    let scale = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let resid = back
        .iter()
        .zip(g)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let rel = if scale > 0.0 { resid / scale } else { resid };
    LemmaReport::new(Lemma::PseudoInverse, rel, 0.0, UNBIASEDNESS_TOLERANCE, "")
}

/// Stored `x̄_T` against the recomputed mean of the recorded iterates.
pub fn check_average(trace: &RunTrace) -> Result<LemmaReport> {
    let h = trace.history.as_ref().ok_or(Error::MissingInput("recorded history"))?;
    let m = h.iterates.len() as f64;
    let dev = (0..trace.dim)
        .map(|j| {
            let mean = linalg::compensated_sum(h.iterates.iter().map(|x| x[j])) / m;
            (mean - trace.average[j]).abs()
        })
        .fold(0.0, f64::max);
    Ok(LemmaReport::new(Lemma::AverageIterate, dev, 0.0, 1e-10, context(trace)))
}

/// Largest root bound of `x² <= a (x + b)`: every such `x` is at most
/// `a + sqrt(a b)`.
pub fn quad_root_bound(a: f64, b: f64) -> Result<f64> {
    if !(a >= 0.0 && b >= 0.0) {
        return Err(Error::invalid(format!("quad_root_bound needs a, b >= 0 (got {a}, {b})")));
    }
    Ok(a + (a * b).sqrt())
}

/// Sample mean and standard error of the mean.
pub fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let m = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = linalg::compensated_sum(values.iter().copied()) / m;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
    (mean, (var / m).sqrt())
}

/// `Σ_t ||g_t||²` and `Σ_t (f(x_t) - f*)` over the recorded steps.
pub fn telescoping_terms(trace: &RunTrace, f_star: f64) -> Result<(f64, f64)> {
    let h = trace.history.as_ref().ok_or(Error::MissingInput("recorded history"))?;
    let steps = h.estimates.len();
    let grads = grad_sq_sum(h);
    let gaps = linalg::compensated_sum(h.objectives[..steps].iter().map(|f| f - f_star));
    Ok((grads, gaps))
}

/// Monte-Carlo check of
/// `E Σ||g_t||² <= 8L̂ E Σ(f(x_t) - f*) + 4L̂ n Δ₁`
/// from per-run `(Σ||g_t||², Σ(f(x_t) - f*))` pairs. The per-run difference
/// of the two random sides must have mean at most `4L̂nΔ₁` plus
/// `sigmas` standard errors.
pub fn check_telescoping(
    per_run: &[(f64, f64)],
    smoothness: f64,
    n: usize,
    delta1: f64,
    sigmas: f64,
) -> LemmaReport {
    let diffs: Vec<f64> = per_run.iter().map(|(g, f)| g - 8.0 * smoothness * f).collect();
    let (mean_diff, se) = mean_and_stderr(&diffs);
    let (mean_g, _) = mean_and_stderr(&per_run.iter().map(|r| r.0).collect::<Vec<_>>());
    let fixed = 4.0 * smoothness * n as f64 * delta1;
    let rhs = mean_g - mean_diff + fixed + sigmas * se;
    LemmaReport::new(
        Lemma::Telescoping,
        mean_g,
        rhs,
        DEFAULT_TOLERANCE,
        format!("runs={} se={se:.3e}", per_run.len()),
    )
}

/// `[α(η + D²/2η) sqrt(4L n Δ₁) + 8Lα²(η + D²/2η)²] / T`.
pub fn rate_bound(alpha: f64, eta: f64, diameter: f64, smoothness: f64, n: usize, delta1: f64, t: usize) -> f64 {
    let c = alpha * (eta + diameter * diameter / (2.0 * eta));
    (c * (4.0 * smoothness * n as f64 * delta1).sqrt() + 8.0 * smoothness * c * c) / t as f64
}

/// Mean final gap over seeds against [`rate_bound`] plus `sigmas` standard
/// errors.
pub fn check_rate_bound(gaps: &[f64], bound: f64, sigmas: f64) -> LemmaReport {
    let (mean, se) = mean_and_stderr(gaps);
    LemmaReport::new(
        Lemma::RateBound,
        mean,
        bound + sigmas * se,
        DEFAULT_TOLERANCE,
        format!("runs={} se={se:.3e} bound={bound:.6e}", gaps.len()),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::{EstimatorKind, EstimatorOptions};
    use crate::problems::{Dataset, Labels};
    use crate::scaling::ScalingKind;

    fn bare_trace(scaling: ScalingKind, dim: usize, history: History) -> RunTrace {
        let iterations = history.iterates.len();
        RunTrace {
            estimator: EstimatorKind::Saga,
            scaling,
            dim,
            n_components: 1,
            eta: 1.0,
            iterations,
            checkpoints: vec![],
            average: history.iterates[0].clone(),
            last_iterate: history.iterates[iterations - 1].clone(),
            history: Some(history),
            gradient_count: 0,
            refresh_count: 0,
        }
    }

    #[test]
    fn zero_gradient_single_step_is_tight() {
        let h = History {
            iterates: vec![vec![0.5], vec![0.5]],
            objectives: vec![0.0, 0.0],
            estimates: vec![vec![0.0]],
            roots: vec![Metric::Scalar(0.0)],
            indices: vec![Some(0)],
            refreshes: vec![None],
        };
        let tr = bare_trace(ScalingKind::AdaGradNorm, 1, h);
        let dom = Domain::boxed(vec![0.0], vec![1.0]).unwrap();
        let r = check_regret_bound(&tr, &dom, 1.0, &[0.2]).unwrap();
        assert_eq!((r.lhs, r.rhs), (0.0, 0.0));
        assert!(r.pass);
    }

    #[test]
    fn first_step_trace_identities() {
        // Scalar: g^T A_1^+ g = A_1 with A_1 = ||g||.
        let g = vec![3.0, 4.0];
        let h = History {
            iterates: vec![vec![0.0, 0.0], vec![0.1, 0.1]],
            objectives: vec![0.0; 2],
            estimates: vec![g.clone()],
            roots: vec![Metric::Scalar(5.0)],
            indices: vec![Some(0)],
            refreshes: vec![None],
        };
        let (sum, norm) = check_trace_bounds(&bare_trace(ScalingKind::AdaGradNorm, 2, h)).unwrap();
        assert!((sum.lhs - 5.0).abs() < 1e-15 && sum.rhs == 10.0 && sum.pass);
        assert!((norm.lhs - norm.rhs).abs() < 1e-15 && norm.pass);

        // Diagonal with one nonzero coordinate: Tr(A_1) = |g| vs sqrt(d) |g|.
        let h = History {
            iterates: vec![vec![0.0; 4], vec![0.0; 4]],
            objectives: vec![0.0; 2],
            estimates: vec![vec![0.0, -2.0, 0.0, 0.0]],
            roots: vec![Metric::Diagonal(vec![0.0, 2.0, 0.0, 0.0])],
            indices: vec![Some(0)],
            refreshes: vec![None],
        };
        let (sum, norm) = check_trace_bounds(&bare_trace(ScalingKind::AdaGradDiag, 4, h)).unwrap();
        assert_eq!(sum.lhs, 2.0);
        assert_eq!(norm.lhs, 2.0);
        assert_eq!(norm.rhs, 4.0);
        assert!(norm.pass && sum.pass);
    }

    #[test]
    fn stationary_trace_has_zero_weighted_distance() {
        let x = vec![0.3, 0.7];
        let h = History {
            iterates: vec![x.clone(); 4],
            objectives: vec![0.0; 4],
            estimates: vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![2.0, 2.0]],
            roots: vec![
                Metric::Diagonal(vec![1.0, 0.0]),
                Metric::Diagonal(vec![1.0, 1.0]),
                Metric::Diagonal(vec![5f64.sqrt(), 5f64.sqrt()]),
            ],
            indices: vec![None; 3],
            refreshes: vec![None; 3],
        };
        let tr = bare_trace(ScalingKind::AdaGradDiag, 2, h);
        let dom = Domain::boxed(vec![0.0; 2], vec![1.0; 2]).unwrap();
        let r = check_weighted_distance(&tr, &dom, &x).unwrap();
        assert_eq!(r.lhs, 0.0);
        assert!(r.pass);
    }

    #[test]
    fn missing_history_is_an_input_error() {
        let mut tr = bare_trace(
            ScalingKind::AdaGradNorm,
            1,
            History {
                iterates: vec![vec![0.0]],
                ..Default::default()
            },
        );
        tr.history = None;
        assert!(matches!(check_trace_bounds(&tr), Err(Error::MissingInput(_))));
        tr.scaling = ScalingKind::Adam;
        assert!(matches!(check_trace_bounds(&tr), Err(Error::Unsupported(_))));
    }

    #[test]
    fn grad_subopt_is_tight_on_two_point_least_squares() {
        let data = Dataset::new(vec![1.0, 1.0], 1, Labels::Targets(vec![0.0, 2.0])).unwrap();
        let p = FiniteSumProblem::least_squares(data, 1).unwrap();
        let r = check_grad_subopt(&p, &[0.0], 0.5).unwrap();
        assert_eq!((r.lhs, r.rhs), (1.0, 1.0));
        assert!(r.pass);
        let r = check_grad_subopt(&p, &[1.0], 0.5).unwrap();
        assert!(r.pass && r.lhs == 0.0);
    }

    #[test]
    fn quad_root_examples() {
        assert_eq!(quad_root_bound(1.0, 0.0).unwrap(), 1.0);
        assert_eq!(quad_root_bound(0.0, 5.0).unwrap(), 0.0);
        assert!(quad_root_bound(-1.0, 0.0).is_err());
        assert!(quad_root_bound(1.0, f64::NAN).is_err());
    }

    #[test]
    fn variance_decomposition_needs_memory() {
        let data = Dataset::new(vec![1.0, 1.0], 1, Labels::Targets(vec![0.0, 2.0])).unwrap();
        let p = FiniteSumProblem::least_squares(data, 1).unwrap();
        let e = Estimator::new(EstimatorKind::Sgd, &p, &[0.0], EstimatorOptions::default()).unwrap();
        assert!(matches!(
            check_variance_decomposition(&e, &[0.0], &[1.0]),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn stderr_of_constant_sample_is_zero() {
        assert_eq!(mean_and_stderr(&[2.0, 2.0, 2.0]), (2.0, 0.0));
        let (m, se) = mean_and_stderr(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((se - 1.0).abs() < 1e-15);
    }
}
