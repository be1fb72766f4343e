use adalvr::{Dataset, Error, FiniteSumProblem, ProblemKind};

use crate::error::{BenchError, Result};

/// Mean per-class recall over the classes that occur in `labels`.
pub fn balanced_accuracy(predictions: &[usize], labels: &[usize], n_classes: usize) -> Result<f64> {
    if predictions.is_empty() || predictions.len() != labels.len() {
        return Err(BenchError::Config(format!(
            "balanced accuracy needs equal nonempty inputs (got {} and {})",
            predictions.len(),
            labels.len()
        )));
    }
    let mut hits = vec![0usize; n_classes];
    let mut totals = vec![0usize; n_classes];
    for (&p, &y) in predictions.iter().zip(labels) {
        if y >= n_classes {
            return Err(Error::IndexOutOfRange { index: y, len: n_classes }.into());
        }
        totals[y] += 1;
        if p == y {
            hits[y] += 1;
        }
    }
    let (sum, present) = hits
        .iter()
        .zip(&totals)
        .filter(|(_, &t)| t > 0)
        .fold((0.0, 0usize), |(s, c), (&h, &t)| (s + h as f64 / t as f64, c + 1));
    Ok(sum / present as f64)
}

/// Argmax of the class logits for every row of `data`; ties go to the
/// lowest class index.
pub fn predict(problem: &FiniteSumProblem, x: &[f64], data: &Dataset) -> Result<Vec<usize>> {
    if problem.kind() != ProblemKind::MultinomialLogistic {
        return Err(Error::Unsupported("prediction needs a classification problem".into()).into());
    }
    if data.n_features() * problem.n_classes() != problem.dim() {
        return Err(Error::DimensionMismatch {
            expected: problem.dim() / problem.n_classes(),
            got: data.n_features(),
        }
        .into());
    }
    adalvr::error::check_len(problem.dim(), x.len())?;
    let mut logits = vec![0.0; problem.n_classes()];
    Ok((0..data.n_samples())
        .map(|s| {
            problem.logits_into(x, data.row(s), &mut logits);
            let mut best = 0;
            for (k, z) in logits.iter().enumerate() {
                if *z > logits[best] {
                    best = k;
                }
            }
            best
        })
        .collect())
}

/// Balanced accuracy of `x` on a labelled dataset.
pub fn score(problem: &FiniteSumProblem, x: &[f64], data: &Dataset) -> Result<f64> {
    let pred = predict(problem, x, data)?;
    let labels: Vec<usize> = (0..data.n_samples())
        .map(|s| data.class(s).ok_or(Error::MissingInput("class labels")))
        .collect::<adalvr::Result<_>>()?;
    balanced_accuracy(&pred, &labels, problem.n_classes())
}
