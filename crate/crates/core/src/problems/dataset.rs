use std::fs::File;
use std::io::Read;
use std::path::Path;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng;

/// Targets attached to each sample.
#[derive(Debug, Clone, PartialEq)]
pub enum Labels {
    /// Class indices in `0..n_classes`.
    Classes { values: Vec<usize>, n_classes: usize },
    /// Real-valued regression targets.
    Targets(Vec<f64>),
}

impl Labels {
    pub fn len(&self) -> usize {
        match self {
            Labels::Classes { values, .. } => values.len(),
            Labels::Targets(t) => t.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn select(&self, idx: &[usize]) -> Labels {
        match self {
            Labels::Classes { values, n_classes } => Labels::Classes {
                values: idx.iter().map(|&i| values[i]).collect(),
                n_classes: *n_classes,
            },
            Labels::Targets(t) => Labels::Targets(idx.iter().map(|&i| t[i]).collect()),
        }
    }
}

/// How the last CSV column is interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelKind {
    Class,
    Target,
}

#[derive(Debug, Clone, Copy)]
pub struct CsvOptions {
    pub has_header: bool,
    pub labels: LabelKind,
}

/// Dense row-major samples with one label per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    n_samples: usize,
    n_features: usize,
    labels: Labels,
}

impl Dataset {
    pub fn new(features: Vec<f64>, n_features: usize, labels: Labels) -> Result<Self> {
        if n_features == 0 {
            return Err(Error::invalid("dataset needs at least one feature"));
        }
        if !features.len().is_multiple_of(n_features) {
            return Err(Error::invalid(format!(
                "{} feature values do not form rows of width {n_features}",
                features.len()
            )));
        }
        let n_samples = features.len() / n_features;
        if n_samples == 0 {
            return Err(Error::invalid("dataset needs at least one sample"));
        }
        if labels.len() != n_samples {
            return Err(Error::DimensionMismatch {
                expected: n_samples,
                got: labels.len(),
            });
        }
        if !features.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("dataset features"));
        }
        match &labels {
            Labels::Classes { values, n_classes } => {
                if let Some(bad) = values.iter().find(|&&c| c >= *n_classes) {
                    return Err(Error::invalid(format!(
                        "class label {bad} outside 0..{n_classes}"
                    )));
                }
            }
            Labels::Targets(t) => {
                if !t.iter().all(|v| v.is_finite()) {
                    return Err(Error::NonFinite("regression targets"));
                }
            }
        }
        Ok(Self {
            features,
            n_samples,
            n_features,
            labels,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    /// Number of classes, or `None` for regression targets.
    pub fn n_classes(&self) -> Option<usize> {
        match &self.labels {
            Labels::Classes { n_classes, .. } => Some(*n_classes),
            Labels::Targets(_) => None,
        }
    }

    pub fn labels(&self) -> &Labels {
        &self.labels
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn class(&self, i: usize) -> Option<usize> {
        match &self.labels {
            Labels::Classes { values, .. } => Some(values[i]),
            Labels::Targets(_) => None,
        }
    }

    pub fn target(&self, i: usize) -> Option<f64> {
        match &self.labels {
            Labels::Targets(t) => Some(t[i]),
            Labels::Classes { .. } => None,
        }
    }

    /// Rows in the given order (indices may repeat).
    pub fn select(&self, idx: &[usize]) -> Result<Dataset> {
        if let Some(&bad) = idx.iter().find(|&&i| i >= self.n_samples) {
            return Err(Error::IndexOutOfRange {
                index: bad,
                len: self.n_samples,
            });
        }
        let mut features = Vec::with_capacity(idx.len() * self.n_features);
        for &i in idx {
            features.extend_from_slice(self.row(i));
        }
        Dataset::new(features, self.n_features, self.labels.select(idx))
    }

    /// The first `rows` samples (all of them if fewer).
    pub fn head(&self, rows: usize) -> Result<Dataset> {
        let idx: Vec<usize> = (0..rows.min(self.n_samples)).collect();
        self.select(&idx)
    }

    /// Relabels classes to `0..k` in increasing order of the observed labels,
    /// dropping classes that never occur.
    pub fn compact_classes(&self) -> Dataset {
        let Labels::Classes { values, n_classes } = &self.labels else {
            return self.clone();
        };
        let mut seen = vec![false; *n_classes];
        for &c in values {
            seen[c] = true;
        }
        let mut map = vec![0; *n_classes];
        let mut k = 0;
        for (c, s) in seen.iter().enumerate() {
            if *s {
                map[c] = k;
                k += 1;
            }
        }
        Dataset {
            features: self.features.clone(),
            n_samples: self.n_samples,
            n_features: self.n_features,
            labels: Labels::Classes {
                values: values.iter().map(|&c| map[c]).collect(),
                n_classes: k,
            },
        }
    }
}

/// Parses a comma-separated numeric table whose last column is the label.
pub fn read_csv<R: Read>(reader: R, opts: CsvOptions) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(opts.has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let mut width: Option<usize> = None;
    let mut features = Vec::new();
    let mut classes = Vec::new();
    let mut targets = Vec::new();
    let mut record = csv::StringRecord::new();

    loop {
        let more = rdr.read_record(&mut record).map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            Error::Format {
                line,
                msg: e.to_string(),
            }
        })?;
        if !more {
            break;
        }
        let line = record.position().map_or(0, |p| p.line());
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        if record.len() < 2 {
            return Err(Error::Format {
                line,
                msg: "need at least one feature column and a label column".into(),
            });
        }
        match width {
            None => width = Some(record.len()),
            Some(w) if w != record.len() => {
                return Err(Error::Format {
                    line,
                    msg: format!("expected {w} columns, found {}", record.len()),
                })
            }
            _ => {}
        }
        let last = record.len() - 1;
        for (col, cell) in record.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| Error::Format {
                line,
                msg: format!("row {line}, column {}: '{cell}' is not a number", col + 1),
            })?;
            if !v.is_finite() {
                return Err(Error::Format {
                    line,
                    msg: format!("row {line}, column {}: non-finite value", col + 1),
                });
            }
            if col < last {
                features.push(v);
                continue;
            }
            match opts.labels {
                LabelKind::Target => targets.push(v),
                LabelKind::Class => {
                    if v < 0.0 || v.fract() != 0.0 {
                        return Err(Error::Format {
                            line,
                            msg: format!("row {line}: class label '{cell}' is not a nonnegative integer"),
                        });
                    }
                    classes.push(v as usize);
                }
            }
        }
    }

    let Some(width) = width else {
        return Err(Error::Format {
            line: 1,
            msg: "no data rows".into(),
        });
    };
    let labels = match opts.labels {
        LabelKind::Target => Labels::Targets(targets),
        LabelKind::Class => {
            let n_classes = classes.iter().max().map_or(0, |m| m + 1);
            Labels::Classes {
                values: classes,
                n_classes,
            }
        }
    };
    Dataset::new(features, width - 1, labels)
}

pub fn load_dataset(path: impl AsRef<Path>, opts: CsvOptions) -> Result<Dataset> {
    let file = File::open(path)?;
    read_csv(file, opts)
}

/// Maps every feature column affinely onto `[0, 1]`. Constant columns map to 0.
pub fn minmax_scale(data: &Dataset) -> Dataset {
    let p = data.n_features;
    let mut lo = vec![f64::INFINITY; p];
    let mut hi = vec![f64::NEG_INFINITY; p];
    for i in 0..data.n_samples {
        for (j, &v) in data.row(i).iter().enumerate() {
            lo[j] = lo[j].min(v);
            hi[j] = hi[j].max(v);
        }
    }
    let mut features = data.features.clone();
    for row in features.chunks_mut(p) {
        for (j, v) in row.iter_mut().enumerate() {
            let range = hi[j] - lo[j];
            *v = if range > 0.0 {
                ((*v - lo[j]) / range).clamp(0.0, 1.0)
            } else {
                0.0
            };
        }
    }
    Dataset {
        features,
        ..data.clone()
    }
}

/// Seeded shuffled partition of `0..n` into `ceil(fraction * n)` training
/// indices and the remainder.
pub fn split_indices(n: usize, train_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "train fraction {train_fraction} outside (0, 1)"
        )));
    }
    // Guard against 0.8 * 10 landing a hair above 8.
    let n_train = ((train_fraction * n as f64) - 1e-9).ceil().max(0.0) as usize;
    if n_train == 0 || n_train >= n {
        return Err(Error::invalid(format!(
            "fraction {train_fraction} of {n} samples leaves an empty side"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng::seeded(seed));
    let test = idx.split_off(n_train);
    Ok((idx, test))
}

pub fn train_test_split(data: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    let (train, test) = split_indices(data.n_samples, train_fraction, seed)?;
    Ok((data.select(&train)?, data.select(&test)?))
}
