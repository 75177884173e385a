//! Second, deliberately different implementations of the agreement and error
//! statistics, written from the textbook formulas.

pub struct Binary {
    pub accuracy: f64,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub kappa: f64,
}

/// Confusion-table form: kappa = 2(TP*TN - FN*FP) / ((TP+FP)(FP+TN) + (TP+FN)(FN+TN)).
pub fn binary(truth: &[bool], pred: &[bool]) -> Binary {
    let count = |t: bool, p: bool| truth.iter().zip(pred).filter(|&(&a, &b)| a == t && b == p).count() as f64;
    let (tp, fn_, fp, tn) = (count(true, true), count(true, false), count(false, true), count(false, false));
    let n = tp + fn_ + fp + tn;
    let denom = (tp + fp) * (fp + tn) + (tp + fn_) * (fn_ + tn);
    Binary {
        accuracy: (tp + tn) / n,
        sensitivity: (tp + fn_ > 0.0).then(|| tp / (tp + fn_)),
        specificity: (tn + fp > 0.0).then(|| tn / (tn + fp)),
        kappa: if denom == 0.0 { 0.0 } else { 2.0 * (tp * tn - fn_ * fp) / denom },
    }
}

/// Raw-sum form of Pearson's r; `None` when either series is constant.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let constant = |v: &[f64]| v.iter().all(|a| *a == v[0]);
    if x.len() < 2 || constant(x) || constant(y) {
        return None;
    }
    let n = x.len() as f64;
    let sx: f64 = x.iter().sum();
    let sy: f64 = y.iter().sum();
    let sxx: f64 = x.iter().map(|a| a * a).sum();
    let syy: f64 = y.iter().map(|a| a * a).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    Some((n * sxy - sx * sy) / ((n * sxx - sx * sx).sqrt() * (n * syy - sy * sy).sqrt()))
}

pub struct Errors {
    pub mae: f64,
    pub bias: f64,
    pub exact: f64,
    pub within1: f64,
    pub within2: f64,
    pub within10: f64,
    pub mape: Option<f64>,
    pub r: Option<f64>,
}

pub fn errors(truth: &[f64], pred: &[f64]) -> Errors {
    let n = truth.len() as f64;
    let mut e = Errors {
        mae: 0.0,
        bias: 0.0,
        exact: 0.0,
        within1: 0.0,
        within2: 0.0,
        within10: 0.0,
        mape: None,
        r: pearson(truth, pred),
    };
    let (mut pct_sum, mut pct_n) = (0.0, 0usize);
    for i in 0..truth.len() {
        let d = pred[i] - truth[i];
        e.mae += d.abs() / n;
        e.bias += d / n;
        // Integer-valued fixtures compare exactly; fractional ones get a
        // tolerance well below their 0.1 resolution.
        let close = |k: f64| d.abs() <= k + 1e-6;
        e.exact += f64::from(u8::from(d == 0.0)) / n;
        e.within1 += f64::from(u8::from(close(1.0))) / n;
        e.within2 += f64::from(u8::from(close(2.0))) / n;
        e.within10 += f64::from(u8::from(close(10.0))) / n;
        if truth[i] > 0.0 {
            pct_sum += 100.0 * d.abs() / truth[i];
            pct_n += 1;
        }
    }
    if pct_n > 0 {
        e.mape = Some(pct_sum / pct_n as f64);
    }
    e
}

pub struct Ordinal {
    pub exact: f64,
    pub within1: f64,
    pub mae: f64,
    pub kappa_w: f64,
}

/// Disagreement-weight form: kappa_w = 1 - sum(w*O) / sum(w*E), with
/// w = |i-j| / (K-1) and E the outer product of the marginals.
pub fn ordinal(truth: &[u32], pred: &[u32], classes: u32) -> Ordinal {
    let n = truth.len() as f64;
    let k = classes as usize;
    let mut observed = vec![vec![0.0; k]; k];
    for (&t, &p) in truth.iter().zip(pred) {
        observed[(t - 1) as usize][(p - 1) as usize] += 1.0;
    }
    let row: Vec<f64> = (0..k).map(|i| observed[i].iter().sum()).collect();
    let col: Vec<f64> = (0..k).map(|j| (0..k).map(|i| observed[i][j]).sum()).collect();
    let (mut wo, mut we) = (0.0, 0.0);
    for i in 0..k {
        for j in 0..k {
            let w = (i as f64 - j as f64).abs() / (k as f64 - 1.0);
            wo += w * observed[i][j];
            we += w * row[i] * col[j] / n;
        }
    }
    let diffs: Vec<f64> = truth.iter().zip(pred).map(|(&t, &p)| (f64::from(t) - f64::from(p)).abs()).collect();
    Ordinal {
        exact: diffs.iter().filter(|d| **d == 0.0).count() as f64 / n,
        within1: diffs.iter().filter(|d| **d <= 1.0).count() as f64 / n,
        mae: diffs.iter().sum::<f64>() / n,
        kappa_w: if we.abs() < 1e-12 { 0.0 } else { 1.0 - wo / we },
    }
}

/// Consensus by counting: the most frequent non-NA value wins when it holds
/// a strict majority of all runs, NA runs included in the denominator.
pub fn mode_vote(values: &[Option<u8>]) -> (bool, f64) {
    let best = (0..=u8::MAX)
        .map(|v| values.iter().filter(|x| **x == Some(v)).count())
        .max()
        .unwrap_or(0);
    let ratio = best as f64 / values.len() as f64;
    (ratio > 0.5, ratio)
}
