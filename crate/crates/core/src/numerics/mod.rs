//! Dense linear algebra, seeded randomness and stable elementary functions.

mod matrix;
mod rng;

pub use matrix::{dot, Matrix};
pub use rng::SeededRng;

use crate::error::{Error, Result};

/// Softmax with max-subtraction so large inputs do not overflow.
pub fn softmax_stable(v: &[f64]) -> Result<Vec<f64>> {
    if v.is_empty() {
        return Err(Error::InvalidArgument("softmax of empty vector".into()));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument("softmax input not finite".into()));
    }
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = v.iter().map(|x| (x - max).exp()).collect();
    let total: f64 = out.iter().sum();
    out.iter_mut().for_each(|x| *x /= total);
    Ok(out)
}

#[inline]
pub fn leaky_relu(x: f64, slope: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        slope * x
    }
}

/// Subgradient of LeakyReLU; the kink at 0 takes the negative-side slope.
#[inline]
pub fn leaky_relu_grad(x: f64, slope: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        slope
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n − 1 denominator); 0 for fewer than two values.
pub fn sample_sd(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Per-column centring and scaling learned on one matrix and reusable on
/// another (e.g. fitted on training rows, applied to held-out rows).
#[derive(Clone, Debug, PartialEq)]
pub struct Standardizer {
    pub means: Vec<f64>,
    /// Population sd; 0 marks a constant column, which maps to all zeros.
    pub sds: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &Matrix) -> Self {
        let n = x.rows() as f64;
        let means: Vec<f64> = x.col_sums().iter().map(|s| s / n).collect();
        let mut ss = vec![0.0; x.cols()];
        for r in 0..x.rows() {
            for ((acc, v), m) in ss.iter_mut().zip(x.row(r)).zip(&means) {
                *acc += (v - m).powi(2);
            }
        }
        let sds = ss.iter().map(|s| (s / n).sqrt()).collect();
        Standardizer { means, sds }
    }

    pub fn apply(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.means.len() {
            return Err(Error::Dimension(format!(
                "standardizer fitted on {} columns applied to {}",
                self.means.len(),
                x.cols()
            )));
        }
        Ok(Matrix::from_fn(x.rows(), x.cols(), |r, c| {
            if self.sds[c] > 0.0 {
                (x[(r, c)] - self.means[c]) / self.sds[c]
            } else {
                0.0
            }
        }))
    }
}

/// Columns scaled to mean 0 and mean square 1, with the fitted transform.
pub fn standardize_columns(x: &Matrix) -> (Matrix, Standardizer) {
    let s = Standardizer::fit(x);
    let z = s.apply(x).expect("standardizer fitted on the same matrix");
    (z, s)
}

/// `n` log-spaced values from `hi` down to `lo`, both inclusive.
pub fn log_space_desc(hi: f64, lo: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![hi];
    }
    let (lh, ll) = (hi.ln(), lo.ln());
    (0..n)
        .map(|i| (lh + (ll - lh) * i as f64 / (n - 1) as f64).exp())
        .collect()
}
