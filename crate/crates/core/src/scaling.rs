//! Adaptive preconditioners and the feasible set.
//!
//! `G_t` accumulates squared estimates; the step divides by `A_t = G_t^{1/2}`
//! through its Moore-Penrose pseudo-inverse, so a zero entry of `A_t` yields a
//! zero step on that coordinate. There is no epsilon floor.

use crate::error::{check_len, Error, Result};
use crate::linalg;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScalingKind {
    /// Plain step `x - eta * g` (non-adaptive baselines).
    Identity,
    AdaGradNorm,
    AdaGradDiag,
    RmsProp,
    Adam,
}

impl ScalingKind {
    /// True for the two accumulating (AdaGrad) variants.
    pub fn is_adagrad(self) -> bool {
        matches!(self, ScalingKind::AdaGradNorm | ScalingKind::AdaGradDiag)
    }

    /// Dimension factor of the regret bound: 1 for the norm variant, `sqrt(d)`
    /// for the diagonal one.
    pub fn alpha(self, dim: usize) -> Option<f64> {
        match self {
            ScalingKind::AdaGradNorm => Some(1.0),
            ScalingKind::AdaGradDiag => Some((dim as f64).sqrt()),
            _ => None,
        }
    }
}

/// A positive semidefinite scalar (`c * I`) or diagonal matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum Metric {
    Scalar(f64),
    Diagonal(Vec<f64>),
}

impl Metric {
    pub fn zeros_like(&self) -> Metric {
        match self {
            Metric::Scalar(_) => Metric::Scalar(0.0),
            Metric::Diagonal(v) => Metric::Diagonal(vec![0.0; v.len()]),
        }
    }

    /// Entrywise square root.
    pub fn sqrt(&self) -> Metric {
        match self {
            Metric::Scalar(s) => Metric::Scalar(s.sqrt()),
            Metric::Diagonal(v) => Metric::Diagonal(v.iter().map(|x| x.sqrt()).collect()),
        }
    }

    /// Trace, treating the scalar form as a 1x1 matrix.
    pub fn trace(&self) -> f64 {
        match self {
            Metric::Scalar(s) => *s,
            Metric::Diagonal(v) => linalg::compensated_sum(v.iter().copied()),
        }
    }

    /// `A v`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        match self {
            Metric::Scalar(s) => v.iter().map(|x| s * x).collect(),
            Metric::Diagonal(d) => d.iter().zip(v).map(|(a, x)| a * x).collect(),
        }
    }

    /// `A^+ v` with the Moore-Penrose convention `0^+ = 0`.
    pub fn pinv_apply(&self, v: &[f64]) -> Vec<f64> {
        let inv = |a: f64| if a > 0.0 { 1.0 / a } else { 0.0 };
        match self {
            Metric::Scalar(s) => {
                let r = inv(*s);
                v.iter().map(|x| r * x).collect()
            }
            Metric::Diagonal(d) => d.iter().zip(v).map(|(a, x)| inv(*a) * x).collect(),
        }
    }

    /// `A - B` for metrics of the same shape.
    pub fn difference(&self, other: &Metric) -> Result<Metric> {
        match (self, other) {
            (Metric::Scalar(a), Metric::Scalar(b)) => Ok(Metric::Scalar(a - b)),
            (Metric::Diagonal(a), Metric::Diagonal(b)) => {
                check_len(a.len(), b.len())?;
                Ok(Metric::Diagonal(linalg::sub(a, b)))
            }
            _ => Err(Error::invalid("metric shapes differ")),
        }
    }

    pub fn min_entry(&self) -> f64 {
        match self {
            Metric::Scalar(s) => *s,
            Metric::Diagonal(v) => v.iter().cloned().fold(f64::INFINITY, f64::min),
        }
    }
}

/// `<v, A v>`.
pub fn mahalanobis_norm_sq(a: &Metric, v: &[f64]) -> f64 {
    match a {
        Metric::Scalar(s) => s * linalg::norm_sq(v),
        Metric::Diagonal(d) => d.iter().zip(v).map(|(a, x)| a * x * x).sum(),
    }
}

/// Hyperparameters of the discounted variants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Discounts {
    /// RMSprop weight on the newest squared estimate.
    pub gamma: f64,
    pub beta1: f64,
    pub beta2: f64,
}

impl Default for Discounts {
    fn default() -> Self {
        Self {
            gamma: 0.9,
            beta1: 0.9,
            beta2: 0.999,
        }
    }
}

impl Discounts {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("gamma", self.gamma), ("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::invalid(format!("{name} = {v} outside (0, 1)")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ScalingState {
    kind: ScalingKind,
    eta: f64,
    discounts: Discounts,
    /// `G_t`; absent for the identity scaling.
    accumulator: Option<Metric>,
    momentum: Option<Vec<f64>>,
    steps: u64,
}

impl ScalingState {
    pub fn new(kind: ScalingKind, dim: usize, eta: f64, discounts: Discounts) -> Result<Self> {
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::invalid(format!("eta = {eta} must be positive and finite")));
        }
        if matches!(kind, ScalingKind::RmsProp | ScalingKind::Adam) {
            discounts.validate()?;
        }
        let accumulator = match kind {
            ScalingKind::Identity => None,
            ScalingKind::AdaGradNorm => Some(Metric::Scalar(0.0)),
            _ => Some(Metric::Diagonal(vec![0.0; dim])),
        };
        let momentum = (kind == ScalingKind::Adam).then(|| vec![0.0; dim]);
        Ok(Self {
            kind,
            eta,
            discounts,
            accumulator,
            momentum,
            steps: 0,
        })
    }

    pub fn kind(&self) -> ScalingKind {
        self.kind
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn accumulator(&self) -> Option<&Metric> {
        self.accumulator.as_ref()
    }

    pub fn momentum(&self) -> Option<&[f64]> {
        self.momentum.as_deref()
    }

    /// `A_t = G_t^{1/2}`, or `None` for the identity scaling.
    pub fn root(&self) -> Option<Metric> {
        self.accumulator.as_ref().map(Metric::sqrt)
    }

    /// `Tr(A_t)`; zero for the identity scaling.
    pub fn root_trace(&self) -> f64 {
        self.root().map_or(0.0, |a| a.trace())
    }

    /// Folds the estimate `g` into `G_t` (and `m_t` for Adam).
    pub fn accumulate(&mut self, g: &[f64]) -> Result<()> {
        if !linalg::all_finite(g) {
            return Err(Error::NonFinite("gradient estimate"));
        }
        let Discounts { gamma, beta1, beta2 } = self.discounts;
        match (&mut self.accumulator, self.kind) {
            (None, _) => {}
            (Some(Metric::Scalar(acc)), _) => *acc += linalg::norm_sq(g),
            (Some(Metric::Diagonal(acc)), kind) => {
                check_len(acc.len(), g.len())?;
                for (a, gi) in acc.iter_mut().zip(g) {
                    let sq = gi * gi;
                    *a = match kind {
                        ScalingKind::RmsProp => gamma * sq + (1.0 - gamma) * *a,
                        ScalingKind::Adam => beta2 * *a + (1.0 - beta2) * sq,
                        _ => *a + sq,
                    };
                }
            }
        }
        if let Some(m) = &mut self.momentum {
            for (mi, gi) in m.iter_mut().zip(g) {
                *mi = beta1 * *mi + (1.0 - beta1) * gi;
            }
        }
        self.steps += 1;
        Ok(())
    }

    /// `A_t^+ g` (Adam uses its momentum in place of `g`). Call after
    /// [`accumulate`](Self::accumulate) for the current estimate.
    pub fn precondition(&self, g: &[f64]) -> Vec<f64> {
        let v = self.momentum.as_deref().unwrap_or(g);
        match self.root() {
            None => v.to_vec(),
            Some(a) => a.pinv_apply(v),
        }
    }

    /// Accumulates `g` and moves `x` by `-eta * A_t^+ g` (no projection).
    pub fn step(&mut self, x: &mut [f64], g: &[f64]) -> Result<()> {
        check_len(x.len(), g.len())?;
        self.accumulate(g)?;
        let dir = self.precondition(g);
        linalg::axpy(-self.eta, &dir, x);
        Ok(())
    }
}

/// Feasible set: all of `R^d` or an axis-aligned box.
#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    Unconstrained,
    Box { lower: Vec<f64>, upper: Vec<f64> },
}

impl Domain {
    pub fn boxed(lower: Vec<f64>, upper: Vec<f64>) -> Result<Domain> {
        check_len(lower.len(), upper.len())?;
        if lower.iter().zip(&upper).any(|(l, u)| !(l <= u) || !l.is_finite() || !u.is_finite()) {
            return Err(Error::invalid("box needs finite bounds with lower <= upper"));
        }
        Ok(Domain::Box { lower, upper })
    }

    /// Cube of half-width `half_width` around `center`.
    pub fn centered_box(center: &[f64], half_width: f64) -> Result<Domain> {
        if !(half_width >= 0.0) {
            return Err(Error::invalid("negative half-width"));
        }
        Domain::boxed(
            center.iter().map(|c| c - half_width).collect(),
            center.iter().map(|c| c + half_width).collect(),
        )
    }

    /// Euclidean diameter; infinite when unconstrained.
    pub fn diameter(&self) -> f64 {
        match self {
            Domain::Unconstrained => f64::INFINITY,
            Domain::Box { lower, upper } => linalg::dist_sq(upper, lower).sqrt(),
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Domain::Unconstrained => true,
            Domain::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .all(|(v, (l, u))| l <= v && v <= u),
        }
    }

    /// In-place projection: componentwise clipping.
    pub fn project_in_place(&self, x: &mut [f64]) {
        if let Domain::Box { lower, upper } = self {
            for (v, (l, u)) in x.iter_mut().zip(lower.iter().zip(upper)) {
                *v = v.clamp(*l, *u);
            }
        }
    }
}

/// Projection in the `A_t`-norm. For scalar or diagonal `A_t` the problem
/// separates by coordinate and clipping is exact; coordinates where `A_t` is
/// zero are clipped as well.
pub fn project(x: &[f64], domain: &Domain, _state: &ScalingState) -> Vec<f64> {
    let mut out = x.to_vec();
    domain.project_in_place(&mut out);
    out
}
