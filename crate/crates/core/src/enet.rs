//! Elastic-net regression by cyclic coordinate descent.
//!
//! Minimizes
//!
//! ```text
//! (1/2n)‖y − b₀ − Xβ‖² + λ [ α‖β‖₁ + (1 − α)‖β‖₂² ]
//! ```
//!
//! Note the ridge part is `(1 − α)‖β‖₂²`, not the `(1 − α)/2` used by most
//! solvers, so the coordinate update divides by `1 + 2λ(1 − α)`:
//!
//! ```text
//! β_j ← S(ρ_j, λα) / (1 + 2λ(1 − α)),   ρ_j = (1/n) x_jᵀ(r + x_j β_j)
//! ```
//!
//! Columns of `X` must be standardized (mean 0, mean square 1); all-zero
//! columns are accepted and keep a zero coefficient.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{dot, log_space_desc, standardize_columns, Matrix, SeededRng};

const STANDARDIZATION_TOL: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct ElasticNetProblem {
    /// Column-major copy of X: row `j` of this matrix is feature `j`.
    xt: Matrix,
    y: Vec<f64>,
    pub alpha: f64,
    pub lambda: f64,
}

impl ElasticNetProblem {
    pub fn new(x: &Matrix, y: &[f64], alpha: f64, lambda: f64) -> Result<Self> {
        if x.rows() != y.len() {
            return Err(Error::Dimension(format!(
                "design has {} rows, response has {} entries",
                x.rows(),
                y.len()
            )));
        }
        if x.rows() == 0 {
            return Err(Error::InvalidArgument("elastic net needs at least one sample".into()));
        }
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidArgument(format!("alpha must lie in [0, 1], got {alpha}")));
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!("lambda must be >= 0, got {lambda}")));
        }
        if !x.is_finite() || y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("elastic-net inputs contain non-finite values".into()));
        }
        let xt = x.transpose();
        let n = x.rows() as f64;
        for j in 0..xt.rows() {
            let col = xt.row(j);
            let mean = col.iter().sum::<f64>() / n;
            let ms = dot(col, col) / n;
            let zero = col.iter().all(|v| *v == 0.0);
            if !zero && (mean.abs() > STANDARDIZATION_TOL || (ms - 1.0).abs() > STANDARDIZATION_TOL) {
                return Err(Error::Data(format!(
                    "column {j} is not standardized (mean {mean:.3e}, mean square {ms:.6})"
                )));
            }
        }
        Ok(ElasticNetProblem {
            xt,
            y: y.to_vec(),
            alpha,
            lambda,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.y.len()
    }

    pub fn n_features(&self) -> usize {
        self.xt.rows()
    }

    pub fn with_lambda(&self, lambda: f64) -> Self {
        ElasticNetProblem {
            lambda,
            ..self.clone()
        }
    }

    /// Column `j` of X.
    pub fn column(&self, j: usize) -> &[f64] {
        self.xt.row(j)
    }

    pub fn response(&self) -> &[f64] {
        &self.y
    }

    /// Residual `y − b₀ − Xβ`.
    pub fn residual(&self, beta: &[f64], intercept: f64) -> Vec<f64> {
        let mut r: Vec<f64> = self.y.iter().map(|v| v - intercept).collect();
        for (j, &b) in beta.iter().enumerate() {
            if b != 0.0 {
                for (ri, x) in r.iter_mut().zip(self.xt.row(j)) {
                    *ri -= b * x;
                }
            }
        }
        r
    }

    /// Direct evaluation of the penalized objective.
    pub fn objective(&self, beta: &[f64], intercept: f64) -> f64 {
        let r = self.residual(beta, intercept);
        self.objective_from_residual(&r, beta)
    }

    fn objective_from_residual(&self, r: &[f64], beta: &[f64]) -> f64 {
        let n = self.y.len() as f64;
        let l1: f64 = beta.iter().map(|b| b.abs()).sum();
        let l2: f64 = beta.iter().map(|b| b * b).sum();
        dot(r, r) / (2.0 * n) + self.lambda * (self.alpha * l1 + (1.0 - self.alpha) * l2)
    }

    /// Smallest λ at which the α > 0 solution is identically zero:
    /// `max_j |x_jᵀ(y − ȳ)| / (n·α)`.
    pub fn lambda_max(&self) -> f64 {
        let n = self.y.len() as f64;
        let ybar = self.y.iter().sum::<f64>() / n;
        let centred: Vec<f64> = self.y.iter().map(|v| v - ybar).collect();
        let max = (0..self.n_features())
            .map(|j| dot(self.xt.row(j), &centred).abs())
            .fold(0.0, f64::max);
        max / (n * self.alpha.max(1e-3))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElasticNetFit {
    pub beta: Vec<f64>,
    pub intercept: f64,
    /// Coordinate sweeps performed (full and active-set).
    pub n_iter: usize,
    pub converged: bool,
    pub objective: f64,
    /// Objective after each sweep.
    pub trace: Vec<f64>,
}

impl ElasticNetFit {
    pub fn support(&self) -> Vec<usize> {
        (0..self.beta.len()).filter(|&j| self.beta[j] != 0.0).collect()
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        Ok(x.matvec(&self.beta)?
            .into_iter()
            .map(|v| v + self.intercept)
            .collect())
    }
}

#[inline]
pub fn soft_threshold(z: f64, gamma: f64) -> f64 {
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

pub fn enet_fit(prob: &ElasticNetProblem, tol: f64, max_iter: usize) -> Result<ElasticNetFit> {
    enet_fit_from(prob, &vec![0.0; prob.n_features()], tol, max_iter)
}

/// Coordinate descent started from `beta0`. Full sweeps alternate with
/// sweeps over the current support; convergence is declared only after a
/// full sweep whose largest coefficient change is below `tol`.
pub fn enet_fit_from(prob: &ElasticNetProblem, beta0: &[f64], tol: f64, max_iter: usize) -> Result<ElasticNetFit> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tol must be positive, got {tol}")));
    }
    if beta0.len() != prob.n_features() {
        return Err(Error::Dimension(format!(
            "warm start has {} coefficients for {} features",
            beta0.len(),
            prob.n_features()
        )));
    }
    let n = prob.n_samples() as f64;
    let intercept = prob.y.iter().sum::<f64>() / n;
    let mut beta = beta0.to_vec();
    let mut r = prob.residual(&beta, intercept);
    let col_ms: Vec<f64> = (0..prob.n_features())
        .map(|j| dot(prob.xt.row(j), prob.xt.row(j)) / n)
        .collect();
    let l1 = prob.lambda * prob.alpha;
    let l2 = 2.0 * prob.lambda * (1.0 - prob.alpha);

    let update = |j: usize, beta: &mut [f64], r: &mut [f64]| -> f64 {
        let denom = col_ms[j] + l2;
        if col_ms[j] == 0.0 || denom == 0.0 {
            return 0.0;
        }
        let x = prob.xt.row(j);
        let old = beta[j];
        let rho = dot(x, r) / n + col_ms[j] * old;
        let new = soft_threshold(rho, l1) / denom;
        let delta = new - old;
        if delta != 0.0 {
            for (ri, xi) in r.iter_mut().zip(x) {
                *ri -= delta * xi;
            }
            beta[j] = new;
        }
        delta.abs()
    };

    let mut trace = Vec::new();
    let mut n_iter = 0;
    let mut converged = false;
    let all: Vec<usize> = (0..prob.n_features()).collect();
    while n_iter < max_iter {
        let full_change = all.iter().map(|&j| update(j, &mut beta, &mut r)).fold(0.0, f64::max);
        n_iter += 1;
        trace.push(prob.objective_from_residual(&r, &beta));
        if full_change < tol {
            converged = true;
            break;
        }
        let active: Vec<usize> = all.iter().copied().filter(|&j| beta[j] != 0.0).collect();
        while n_iter < max_iter {
            let change = active.iter().map(|&j| update(j, &mut beta, &mut r)).fold(0.0, f64::max);
            n_iter += 1;
            trace.push(prob.objective_from_residual(&r, &beta));
            if change < tol {
                break;
            }
        }
    }
    let objective = prob.objective(&beta, intercept);
    Ok(ElasticNetFit {
        beta,
        intercept,
        n_iter,
        converged,
        objective,
        trace,
    })
}

/// Warm-started fits along a strictly descending λ sequence.
pub fn enet_path(
    template: &ElasticNetProblem,
    lambdas: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<Vec<ElasticNetFit>> {
    if lambdas.is_empty() {
        return Err(Error::InvalidArgument("empty lambda path".into()));
    }
    if lambdas.iter().any(|l| !(*l > 0.0)) || lambdas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidArgument(
            "lambda path must be positive and strictly descending".into(),
        ));
    }
    let mut fits: Vec<ElasticNetFit> = Vec::with_capacity(lambdas.len());
    let mut warm = vec![0.0; template.n_features()];
    for &lambda in lambdas {
        let fit = enet_fit_from(&template.with_lambda(lambda), &warm, tol, max_iter)?;
        warm.clone_from(&fit.beta);
        fits.push(fit);
    }
    Ok(fits)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnetHyper {
    pub alpha: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub n_lambdas: usize,
    /// Orders of magnitude spanned by the λ grid below λ_max.
    pub lambda_decades: f64,
    pub cv_folds: usize,
}

impl Default for EnetHyper {
    fn default() -> Self {
        EnetHyper {
            alpha: 0.5,
            tol: 1e-7,
            max_iter: 10_000,
            n_lambdas: 50,
            lambda_decades: 4.0,
            cv_folds: 5,
        }
    }
}

impl EnetHyper {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::config("enet.alpha", "must lie in [0, 1]"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::config("enet.tol", "must be positive"));
        }
        if self.max_iter == 0 {
            return Err(Error::config("enet.max_iter", "must be at least 1"));
        }
        if self.n_lambdas == 0 {
            return Err(Error::config("enet.n_lambdas", "must be at least 1"));
        }
        if !(self.lambda_decades > 0.0) {
            return Err(Error::config("enet.lambda_decades", "must be positive"));
        }
        if self.cv_folds < 2 {
            return Err(Error::config("enet.cv_folds", "must be at least 2"));
        }
        Ok(())
    }
}

/// Fold id per sample; with a binary response each class is dealt
/// round-robin across folds after shuffling.
pub fn stratified_folds(y: &[f64], k: usize, rng: &mut SeededRng) -> Vec<usize> {
    let mut folds = vec![0; y.len()];
    let binary = y.iter().all(|v| *v == 0.0 || *v == 1.0);
    let groups: Vec<Vec<usize>> = if binary {
        [0.0, 1.0]
            .iter()
            .map(|c| (0..y.len()).filter(|&i| y[i] == *c).collect())
            .collect()
    } else {
        vec![(0..y.len()).collect()]
    };
    let mut offset = 0;
    for mut g in groups {
        rng.shuffle(&mut g);
        for (pos, &i) in g.iter().enumerate() {
            folds[i] = (pos + offset) % k;
        }
        offset += g.len();
    }
    folds
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub lambdas: Vec<f64>,
    /// Mean held-out squared error per λ.
    pub cv_error: Vec<f64>,
    pub best_lambda: f64,
}

/// K-fold cross-validated squared error over a log-spaced λ grid from
/// λ_max down `lambda_decades` orders of magnitude. Each fold standardizes
/// its training rows and applies the same transform to its held-out rows.
pub fn cross_validate(x: &Matrix, y: &[f64], hyper: &EnetHyper, rng: &SeededRng) -> Result<CvResult> {
    hyper.validate()?;
    let (xs, _) = standardize_columns(x);
    let full = ElasticNetProblem::new(&xs, y, hyper.alpha, 1.0)?;
    let lambda_max = full.lambda_max();
    if !(lambda_max > 0.0) {
        return Ok(CvResult {
            lambdas: vec![1.0],
            cv_error: vec![0.0],
            best_lambda: 1.0,
        });
    }
    let lambdas = log_space_desc(
        lambda_max,
        lambda_max * 10f64.powf(-hyper.lambda_decades),
        hyper.n_lambdas,
    );
    let folds = stratified_folds(y, hyper.cv_folds, &mut rng.split("cv-folds"));

    let fold_errors = |k: usize| -> Result<Vec<f64>> {
        let train: Vec<usize> = (0..y.len()).filter(|&i| folds[i] != k).collect();
        let test: Vec<usize> = (0..y.len()).filter(|&i| folds[i] == k).collect();
        let (xtr, scaler) = standardize_columns(&x.select_rows(&train));
        let xte = scaler.apply(&x.select_rows(&test))?;
        let ytr: Vec<f64> = train.iter().map(|&i| y[i]).collect();
        let prob = ElasticNetProblem::new(&xtr, &ytr, hyper.alpha, lambdas[0])?;
        let path = enet_path(&prob, &lambdas, hyper.tol, hyper.max_iter)?;
        path.iter()
            .map(|fit| {
                let pred = fit.predict(&xte)?;
                Ok(pred
                    .iter()
                    .zip(&test)
                    .map(|(p, &i)| (p - y[i]).powi(2))
                    .sum::<f64>())
            })
            .collect()
    };

    #[cfg(feature = "parallel")]
    let per_fold: Vec<Vec<f64>> = {
        use rayon::prelude::*;
        (0..hyper.cv_folds)
            .into_par_iter()
            .map(fold_errors)
            .collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let per_fold: Vec<Vec<f64>> = (0..hyper.cv_folds).map(fold_errors).collect::<Result<_>>()?;

    let n = y.len() as f64;
    let cv_error: Vec<f64> = (0..lambdas.len())
        .map(|l| per_fold.iter().map(|f| f[l]).sum::<f64>() / n)
        .collect();
    let best = cv_error
        .iter()
        .enumerate()
        .fold(0, |best, (i, e)| if *e < cv_error[best] { i } else { best });
    Ok(CvResult {
        best_lambda: lambdas[best],
        lambdas,
        cv_error,
    })
}
