//! Small dense-vector helpers shared by the solvers.

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm_sq(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    norm_sq(a).sqrt()
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn all_finite(a: &[f64]) -> bool {
    a.iter().all(|v| v.is_finite())
}

/// Neumaier-compensated scalar accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for KahanSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = KahanSum::new();
        for v in iter {
            s.add(v);
        }
        s
    }
}

/// Compensated sum of a stream of values.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().collect::<KahanSum>().value()
}

/// A vector whose entries carry Neumaier compensation terms, used for long
/// running sums that must stay coherent with a recomputed reference.
#[derive(Debug, Clone)]
pub struct CompensatedVec {
    sum: Vec<f64>,
    comp: Vec<f64>,
}

impl CompensatedVec {
    pub fn from_values(values: Vec<f64>) -> Self {
        let comp = vec![0.0; values.len()];
        Self { sum: values, comp }
    }

    pub fn len(&self) -> usize {
        self.sum.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sum.is_empty()
    }

    /// `self += alpha * x`, entrywise compensated.
    pub fn add_scaled(&mut self, alpha: f64, x: &[f64]) {
        for ((s, c), xi) in self.sum.iter_mut().zip(self.comp.iter_mut()).zip(x) {
            let v = alpha * xi;
            let t = *s + v;
            if s.abs() >= v.abs() {
                *c += (*s - t) + v;
            } else {
                *c += (v - t) + *s;
            }
            *s = t;
        }
    }

    pub fn get(&self, j: usize) -> f64 {
        self.sum[j] + self.comp[j]
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.sum.iter().zip(&self.comp).map(|(s, c)| s + c).collect()
    }
}
