//! Agreement and error statistics over valid (truth, prediction) pairs.
//! Callers drop NA predictions beforehand.

use serde::Serialize;

use super::MetricsError;

/// Slack for the `within k` comparisons so that e.g. `|15.3 - 5.3| <= 10`
/// holds despite binary rounding.
pub const TOLERANCE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BinaryMetrics {
    pub accuracy: f64,
    /// `None` when the truth has no positives.
    pub sensitivity: Option<f64>,
    /// `None` when the truth has no negatives.
    pub specificity: Option<f64>,
    pub cohen_kappa: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CountMetrics {
    pub mae: f64,
    pub bias: f64,
    pub exact: f64,
    pub within1: f64,
    pub within2: f64,
    /// `None` when either side has zero variance.
    pub pearson_r: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContinuousMetrics {
    pub mae: f64,
    pub bias: f64,
    /// Over pairs with positive truth only; `None` if there are none.
    pub mape: Option<f64>,
    pub within10m: f64,
    pub pearson_r: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OrdinalMetrics {
    pub exact: f64,
    pub within1class: f64,
    pub mae_class: f64,
    pub weighted_kappa_linear: f64,
}

fn check_pairs<T>(truth: &[T], pred: &[T]) -> Result<usize, MetricsError> {
    if truth.len() != pred.len() {
        return Err(MetricsError::LengthMismatch {
            truth: truth.len(),
            pred: pred.len(),
        });
    }
    if truth.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    Ok(truth.len())
}

/// Chance-corrected agreement; zero when chance agreement is already total.
fn kappa(p_observed: f64, p_expected: f64) -> f64 {
    if (1.0 - p_expected).abs() < 1e-12 {
        0.0
    } else {
        (p_observed - p_expected) / (1.0 - p_expected)
    }
}

pub fn binary_metrics(truth: &[bool], pred: &[bool]) -> Result<BinaryMetrics, MetricsError> {
    let n = check_pairs(truth, pred)? as f64;
    let (mut tp, mut fn_, mut fp, mut tn) = (0usize, 0usize, 0usize, 0usize);
    for (&t, &p) in truth.iter().zip(pred) {
        match (t, p) {
            (true, true) => tp += 1,
            (true, false) => fn_ += 1,
            (false, true) => fp += 1,
            (false, false) => tn += 1,
        }
    }
    let ratio = |a: usize, b: usize| (b > 0).then(|| a as f64 / b as f64);
    let accuracy = (tp + tn) as f64 / n;
    let truth_pos = (tp + fn_) as f64 / n;
    let pred_pos = (tp + fp) as f64 / n;
    let p_expected = truth_pos * pred_pos + (1.0 - truth_pos) * (1.0 - pred_pos);
    Ok(BinaryMetrics {
        accuracy,
        sensitivity: ratio(tp, tp + fn_),
        specificity: ratio(tn, tn + fp),
        cohen_kappa: kappa(accuracy, p_expected),
    })
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    sum / n as f64
}

/// Pearson correlation; `None` when either side is constant.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let mx = mean(x.iter().copied());
    let my = mean(y.iter().copied());
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

fn within(truth: &[f64], pred: &[f64], k: f64) -> f64 {
    mean(
        truth
            .iter()
            .zip(pred)
            .map(|(t, p)| f64::from(u8::from((p - t).abs() <= k + TOLERANCE_EPS))),
    )
}

pub fn count_metrics(truth: &[f64], pred: &[f64]) -> Result<CountMetrics, MetricsError> {
    check_pairs(truth, pred)?;
    let errs = || truth.iter().zip(pred).map(|(t, p)| p - t);
    Ok(CountMetrics {
        mae: mean(errs().map(f64::abs)),
        bias: mean(errs()),
        exact: mean(errs().map(|e| f64::from(u8::from(e == 0.0)))),
        within1: within(truth, pred, 1.0),
        within2: within(truth, pred, 2.0),
        pearson_r: pearson(truth, pred),
    })
}

pub fn continuous_metrics(truth: &[f64], pred: &[f64]) -> Result<ContinuousMetrics, MetricsError> {
    check_pairs(truth, pred)?;
    let errs = || truth.iter().zip(pred).map(|(t, p)| p - t);
    let pct: Vec<f64> = truth
        .iter()
        .zip(pred)
        .filter(|(t, _)| **t > 0.0)
        .map(|(t, p)| (p - t).abs() / t * 100.0)
        .collect();
    Ok(ContinuousMetrics {
        mae: mean(errs().map(f64::abs)),
        bias: mean(errs()),
        mape: (!pct.is_empty()).then(|| mean(pct.iter().copied())),
        within10m: within(truth, pred, 10.0),
        pearson_r: pearson(truth, pred),
    })
}

/// Ordinal agreement for classes `1..=classes`, with linear weights
/// `1 - |i - j| / (classes - 1)` for the weighted kappa.
pub fn ordinal_metrics(truth: &[u32], pred: &[u32], classes: u32) -> Result<OrdinalMetrics, MetricsError> {
    let n = check_pairs(truth, pred)?;
    if classes < 2 {
        return Err(MetricsError::InvalidClasses(classes));
    }
    let k = classes as usize;
    if let Some(&bad) = truth.iter().chain(pred).find(|&&c| c < 1 || c > classes) {
        return Err(MetricsError::ClassOutOfRange { class: bad, classes });
    }
    let mut confusion = vec![vec![0usize; k]; k];
    for (&t, &p) in truth.iter().zip(pred) {
        confusion[t as usize - 1][p as usize - 1] += 1;
    }
    let nf = n as f64;
    let rows: Vec<f64> = confusion.iter().map(|r| r.iter().sum::<usize>() as f64 / nf).collect();
    let cols: Vec<f64> = (0..k)
        .map(|j| confusion.iter().map(|r| r[j]).sum::<usize>() as f64 / nf)
        .collect();
    let weight = |i: usize, j: usize| 1.0 - i.abs_diff(j) as f64 / (k - 1) as f64;
    let (mut p_obs, mut p_exp) = (0.0, 0.0);
    for i in 0..k {
        for j in 0..k {
            p_obs += weight(i, j) * confusion[i][j] as f64 / nf;
            p_exp += weight(i, j) * rows[i] * cols[j];
        }
    }
    let diffs = || truth.iter().zip(pred).map(|(&t, &p)| t.abs_diff(p));
    Ok(OrdinalMetrics {
        exact: diffs().filter(|&d| d == 0).count() as f64 / nf,
        within1class: diffs().filter(|&d| d <= 1).count() as f64 / nf,
        mae_class: diffs().map(f64::from).sum::<f64>() / nf,
        weighted_kappa_linear: kappa(p_obs, p_exp),
    })
}
