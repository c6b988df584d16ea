//! Permutation p-values and Storey q-values.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{Matrix, SeededRng};

pub const DEFAULT_THRESHOLDS: [f64; 3] = [0.01, 0.05, 0.1];
pub const DEFAULT_PI0_LAMBDA: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PValueMethod {
    /// Monte Carlo label permutations with add-one smoothing.
    Permutation,
    /// Every distinct relabelling enumerated.
    ExactPermutation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PValueSet {
    pub features: Vec<String>,
    pub p: Vec<f64>,
    pub method: PValueMethod,
}

impl PValueSet {
    pub fn new(features: Vec<String>, p: Vec<f64>, method: PValueMethod) -> Result<Self> {
        if features.len() != p.len() {
            return Err(Error::Dimension(format!(
                "{} feature ids for {} p-values",
                features.len(),
                p.len()
            )));
        }
        if let Some(bad) = p.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Data(format!("p-value {bad} outside [0, 1]")));
        }
        Ok(PValueSet { features, p, method })
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }
}

/// Difference of class means (class 1 minus class 0) for one feature column.
pub fn mean_difference(values: &[f64], labels: &[u8]) -> f64 {
    let (mut s1, mut n1, mut s0, mut n0) = (0.0, 0usize, 0.0, 0usize);
    for (v, &l) in values.iter().zip(labels) {
        if l == 1 {
            s1 += v;
            n1 += 1;
        } else {
            s0 += v;
            n0 += 1;
        }
    }
    s1 / n1 as f64 - s0 / n0 as f64
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Calls `f` with every 0/1 labelling of `n` samples having `k` ones.
fn for_each_labelling(n: usize, k: usize, mut f: impl FnMut(&[u8])) {
    let mut idx: Vec<usize> = (0..k).collect();
    let mut labels = vec![0u8; n];
    loop {
        labels.iter_mut().for_each(|l| *l = 0);
        for &i in &idx {
            labels[i] = 1;
        }
        f(&labels);
        // advance to the next combination in lexicographic order
        let mut pos = k;
        while pos > 0 && idx[pos - 1] == n - k + pos - 1 {
            pos -= 1;
        }
        if pos == 0 {
            return;
        }
        idx[pos - 1] += 1;
        for q in pos..k {
            idx[q] = idx[q - 1] + 1;
        }
    }
}

#[inline]
fn at_least(stat: f64, observed: f64) -> bool {
    stat.abs() >= observed.abs() - 1e-10 * observed.abs().max(1.0)
}

/// Per-column permutation p-values for the absolute mean difference.
///
/// With `B` permutations, `p = (1 + #{b : |T_b| ≥ |T_obs|}) / (B + 1)`. When
/// the number of distinct class assignments does not exceed `B + 1` every
/// assignment is enumerated instead, giving the exact p-value.
pub fn perm_pvalues(
    x: &Matrix,
    labels: &[u8],
    features: Vec<String>,
    b: usize,
    rng: &SeededRng,
) -> Result<PValueSet> {
    if x.rows() != labels.len() {
        return Err(Error::Dimension(format!(
            "{} samples but {} labels",
            x.rows(),
            labels.len()
        )));
    }
    if features.len() != x.cols() {
        return Err(Error::Dimension(format!(
            "{} feature ids for {} columns",
            features.len(),
            x.cols()
        )));
    }
    if b < 99 {
        return Err(Error::InvalidArgument(format!("at least 99 permutations required, got {b}")));
    }
    let n = labels.len();
    let n1 = labels.iter().filter(|&&l| l == 1).count();
    if n1 == 0 || n1 == n {
        return Err(Error::Data("permutation test needs both classes present".into()));
    }
    let xt = x.transpose();
    let observed: Vec<f64> = (0..x.cols()).map(|j| mean_difference(xt.row(j), labels)).collect();

    let total = binomial(n, n1);
    if total <= (b as u128) + 1 {
        let mut hits = vec![0u64; x.cols()];
        for_each_labelling(n, n1, |perm| {
            for (j, h) in hits.iter_mut().enumerate() {
                if at_least(mean_difference(xt.row(j), perm), observed[j]) {
                    *h += 1;
                }
            }
        });
        let p = hits.iter().map(|&h| h as f64 / total as f64).collect();
        return PValueSet::new(features, p, PValueMethod::ExactPermutation);
    }

    let count_for = |perm_idx: usize| -> Vec<u32> {
        let mut perm = labels.to_vec();
        rng.split_indexed("perm", perm_idx as u64).shuffle(&mut perm);
        (0..x.cols())
            .map(|j| u32::from(at_least(mean_difference(xt.row(j), &perm), observed[j])))
            .collect()
    };
    let add = |mut a: Vec<u32>, b: Vec<u32>| {
        a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        a
    };
    #[cfg(feature = "parallel")]
    let hits: Vec<u32> = {
        use rayon::prelude::*;
        (0..b)
            .into_par_iter()
            .map(count_for)
            .reduce(|| vec![0; x.cols()], add)
    };
    #[cfg(not(feature = "parallel"))]
    let hits: Vec<u32> = (0..b).map(count_for).fold(vec![0; x.cols()], add);

    let p = hits.iter().map(|&h| (1.0 + h as f64) / (b as f64 + 1.0)).collect();
    PValueSet::new(features, p, PValueMethod::Permutation)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QValueTable {
    pub features: Vec<String>,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub pi0: f64,
    pub thresholds: Vec<f64>,
    /// `significant[i][t]`: `q[i] < thresholds[t]`.
    pub significant: Vec<Vec<bool>>,
}

/// π0 = #{p > λ} / (m (1 − λ)), capped at 1 and floored at 1/m.
pub fn estimate_pi0(p: &[f64], lambda: f64) -> Result<f64> {
    if p.is_empty() {
        return Err(Error::InvalidArgument("no p-values".into()));
    }
    if !(0.0..1.0).contains(&lambda) {
        return Err(Error::InvalidArgument(format!("pi0 lambda must lie in [0, 1), got {lambda}")));
    }
    let m = p.len() as f64;
    let above = p.iter().filter(|&&v| v > lambda).count() as f64;
    Ok((above / (m * (1.0 - lambda))).min(1.0).max(1.0 / m))
}

/// Storey q-values with π0 estimated at `lambda`.
pub fn storey_qvalues(pvals: &PValueSet, lambda: f64, thresholds: &[f64]) -> Result<QValueTable> {
    let pi0 = estimate_pi0(&pvals.p, lambda)?;
    qvalues_with_pi0(pvals, pi0, thresholds)
}

/// q_(i) = min over k ≥ i of π0 · m · p_(k) / k over the p-values sorted
/// ascending, clamped to 1. The infimum over thresholds t ≥ p_i is attained
/// at observed p-values since the rejection count is a step function.
pub fn qvalues_with_pi0(pvals: &PValueSet, pi0: f64, thresholds: &[f64]) -> Result<QValueTable> {
    if pvals.is_empty() {
        return Err(Error::InvalidArgument("no p-values".into()));
    }
    if !(pi0 > 0.0 && pi0 <= 1.0) {
        return Err(Error::InvalidArgument(format!("pi0 must lie in (0, 1], got {pi0}")));
    }
    let m = pvals.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| pvals.p[a].total_cmp(&pvals.p[b]).then(a.cmp(&b)));
    let mut q = vec![0.0; m];
    let mut running = f64::INFINITY;
    for rank in (1..=m).rev() {
        let i = order[rank - 1];
        let candidate = pi0 * pvals.p[i] * m as f64 / rank as f64;
        running = running.min(candidate);
        q[i] = running.min(1.0);
    }
    let significant = q
        .iter()
        .map(|&qi| thresholds.iter().map(|&t| qi < t).collect())
        .collect();
    Ok(QValueTable {
        features: pvals.features.clone(),
        p: pvals.p.clone(),
        q,
        pi0,
        thresholds: thresholds.to_vec(),
        significant,
    })
}

impl QValueTable {
    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    /// Number of features with `q < threshold`.
    pub fn discoveries(&self, threshold: f64) -> usize {
        self.q.iter().filter(|&&q| q < threshold).count()
    }

    /// CSV with header `feature,p,q,sig_<t>...`, preceded by `#` comment
    /// lines and a `# pi0=` line. Rows are sorted by q, then p, then id.
    pub fn to_csv(&self, comments: &[String]) -> String {
        let mut out = String::new();
        for c in comments {
            let _ = writeln!(out, "# {c}");
        }
        let _ = writeln!(out, "# pi0={}", self.pi0);
        out.push_str("feature,p,q");
        for t in &self.thresholds {
            let _ = write!(out, ",sig_{}", threshold_label(*t));
        }
        out.push('\n');
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&a, &b| {
            self.q[a]
                .total_cmp(&self.q[b])
                .then(self.p[a].total_cmp(&self.p[b]))
                .then(self.features[a].cmp(&self.features[b]))
        });
        for i in order {
            let _ = write!(out, "{},{},{}", self.features[i], self.p[i], self.q[i]);
            for s in &self.significant[i] {
                let _ = write!(out, ",{}", u8::from(*s));
            }
            out.push('\n');
        }
        out
    }
}

/// `0.01` → `0.01`, `0.1` → `0.10`: at least two decimals.
pub fn threshold_label(t: f64) -> String {
    let s = format!("{t}");
    match s.split_once('.') {
        Some((_, frac)) if frac.len() >= 2 => s,
        Some((_, frac)) => format!("{s}{}", "0".repeat(2 - frac.len())),
        None => format!("{s}.00"),
    }
}
