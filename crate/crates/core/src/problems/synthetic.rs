//! Seeded synthetic datasets with a planted parameter.

use rand::Rng;
use rand_distr::StandardNormal;

use super::dataset::{Dataset, Labels};
use crate::error::{Error, Result};
use crate::rng;

/// Multinomial data: features `a_j ~ N(0, scale_j^2)`, planted weights with
/// logit standard deviation about `signal`, labels drawn from the softmax of
/// the planted logits. Larger `signal` means cleaner labels.
#[derive(Debug, Clone)]
pub struct LogisticSpec {
    pub n_samples: usize,
    pub n_features: usize,
    pub n_classes: usize,
    pub signal: f64,
    /// Per-feature scale factors (conditioning control). `None` means all ones.
    pub feature_scales: Option<Vec<f64>>,
    pub seed: u64,
}

impl Default for LogisticSpec {
    fn default() -> Self {
        Self {
            n_samples: 2000,
            n_features: 20,
            n_classes: 5,
            signal: 3.0,
            feature_scales: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LeastSquaresSpec {
    pub n_samples: usize,
    pub n_features: usize,
    pub noise: f64,
    pub feature_scales: Option<Vec<f64>>,
    pub seed: u64,
}

impl Default for LeastSquaresSpec {
    fn default() -> Self {
        Self {
            n_samples: 2000,
            n_features: 20,
            noise: 0.1,
            feature_scales: None,
            seed: 0,
        }
    }
}

/// A generated dataset together with the parameter that produced it, laid out
/// like the problem's parameter vector (class-major for logistic).
#[derive(Debug, Clone)]
pub struct Planted {
    pub data: Dataset,
    pub parameter: Vec<f64>,
}

fn scales(spec: &Option<Vec<f64>>, p: usize) -> Result<Vec<f64>> {
    match spec {
        None => Ok(vec![1.0; p]),
        Some(s) if s.len() == p && s.iter().all(|v| v.is_finite()) => Ok(s.clone()),
        Some(s) => Err(Error::invalid(format!(
            "{} feature scales for {p} features",
            s.len()
        ))),
    }
}

fn gaussian_features(rng: &mut impl Rng, n: usize, scales: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(n * scales.len());
    for _ in 0..n {
        for s in scales {
            let z: f64 = rng.sample(StandardNormal);
            out.push(s * z);
        }
    }
    out
}

pub fn logistic(spec: &LogisticSpec) -> Result<Planted> {
    let (n, p, k) = (spec.n_samples, spec.n_features, spec.n_classes);
    if n == 0 || p == 0 || k < 2 {
        return Err(Error::invalid("logistic data needs samples, features and >= 2 classes"));
    }
    let scales = scales(&spec.feature_scales, p)?;
    let mut rng = rng::seeded(spec.seed);
    let features = gaussian_features(&mut rng, n, &scales);

    // Normalize so each logit has standard deviation ~ signal.
    let ref_norm = scales.iter().map(|s| s * s).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    let w_scale = spec.signal / ref_norm;
    let parameter: Vec<f64> = (0..k * p)
        .map(|_| w_scale * rng.sample::<f64, _>(StandardNormal))
        .collect();

    let mut logits = vec![0.0; k];
    let mut labels = Vec::with_capacity(n);
    for row in features.chunks(p) {
        for (c, z) in logits.iter_mut().enumerate() {
            *z = parameter[c * p..(c + 1) * p].iter().zip(row).map(|(w, a)| w * a).sum();
        }
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let total: f64 = logits.iter().map(|z| (z - max).exp()).sum();
        let mut u = rng.gen::<f64>() * total;
        let mut label = k - 1;
        for (c, z) in logits.iter().enumerate() {
            let w = (z - max).exp();
            if u < w {
                label = c;
                break;
            }
            u -= w;
        }
        labels.push(label);
    }
    let data = Dataset::new(
        features,
        p,
        Labels::Classes {
            values: labels,
            n_classes: k,
        },
    )?;
    Ok(Planted { data, parameter })
}

pub fn least_squares(spec: &LeastSquaresSpec) -> Result<Planted> {
    let (n, p) = (spec.n_samples, spec.n_features);
    if n == 0 || p == 0 {
        return Err(Error::invalid("least-squares data needs samples and features"));
    }
    let scales = scales(&spec.feature_scales, p)?;
    let mut rng = rng::seeded(spec.seed);
    let features = gaussian_features(&mut rng, n, &scales);
    let parameter: Vec<f64> = (0..p).map(|_| rng.sample(StandardNormal)).collect();
    let targets = features
        .chunks(p)
        .map(|row| {
            let clean: f64 = row.iter().zip(&parameter).map(|(a, w)| a * w).sum();
            clean + spec.noise * rng.sample::<f64, _>(StandardNormal)
        })
        .collect();
    let data = Dataset::new(features, p, Labels::Targets(targets))?;
    Ok(Planted { data, parameter })
}
