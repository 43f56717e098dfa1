//! Regression and classification metrics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check_pair(y_true: &[f64], y_pred: &[f64]) -> Result<()> {
    if y_true.len() != y_pred.len() {
        return Err(Error::invalid(
            "y_pred",
            format!("length {} differs from y_true length {}", y_pred.len(), y_true.len()),
        ));
    }
    if y_true.is_empty() {
        return Err(Error::Empty("metric over zero samples".into()));
    }
    Ok(())
}

pub fn mse(y_true: &[f64], y_pred: &[f64]) -> Result<f64> {
    check_pair(y_true, y_pred)?;
    let s: f64 = y_true.iter().zip(y_pred).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(s / y_true.len() as f64)
}

pub fn mae(y_true: &[f64], y_pred: &[f64]) -> Result<f64> {
    check_pair(y_true, y_pred)?;
    let s: f64 = y_true.iter().zip(y_pred).map(|(a, b)| (a - b).abs()).sum();
    Ok(s / y_true.len() as f64)
}

/// Coefficient of determination `1 − SS_res / SS_tot`.
pub fn r2(y_true: &[f64], y_pred: &[f64]) -> Result<f64> {
    check_pair(y_true, y_pred)?;
    if y_true.len() < 2 {
        return Err(Error::Undefined("R² needs at least two samples".into()));
    }
    let mean = y_true.iter().sum::<f64>() / y_true.len() as f64;
    let ss_tot: f64 = y_true.iter().map(|v| (v - mean) * (v - mean)).sum();
    if ss_tot == 0.0 {
        return Err(Error::Undefined("R² of a constant target has zero variance".into()));
    }
    let ss_res: f64 = y_true.iter().zip(y_pred).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

/// Per-column metrics of a vector-valued regression.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionMetrics {
    pub mse: f64,
    pub mae: f64,
    pub r2: f64,
}

pub fn regression_metrics(y_true: &[f64], y_pred: &[f64]) -> Result<RegressionMetrics> {
    Ok(RegressionMetrics {
        mse: mse(y_true, y_pred)?,
        mae: mae(y_true, y_pred)?,
        r2: r2(y_true, y_pred)?,
    })
}

/// Metrics of vector targets, averaged uniformly over columns (R²) and over all
/// entries (MSE, MAE).
pub fn multi_regression_metrics<R: AsRef<[f64]>>(y_true: &[R], y_pred: &[R]) -> Result<RegressionMetrics> {
    if y_true.len() != y_pred.len() || y_true.is_empty() {
        return Err(Error::Empty("multi-output metric needs equal, non-empty inputs".into()));
    }
    let width = y_true[0].as_ref().len();
    let mut r2_sum = 0.0;
    let mut flat_t = Vec::with_capacity(width * y_true.len());
    let mut flat_p = Vec::with_capacity(width * y_true.len());
    for c in 0..width {
        let t: Vec<f64> = y_true.iter().map(|r| r.as_ref()[c]).collect();
        let p: Vec<f64> = y_pred.iter().map(|r| r.as_ref()[c]).collect();
        r2_sum += r2(&t, &p)?;
        flat_t.extend(t);
        flat_p.extend(p);
    }
    Ok(RegressionMetrics {
        mse: mse(&flat_t, &flat_p)?,
        mae: mae(&flat_t, &flat_p)?,
        r2: r2_sum / width as f64,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub per_class: Vec<ClassMetrics>,
    pub accuracy: f64,
    pub macro_avg: ClassMetrics,
    pub weighted_avg: ClassMetrics,
    /// `confusion[t][p]` counts samples of true class `t` predicted as `p`.
    pub confusion: Vec<Vec<usize>>,
    pub n_samples: usize,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn classification_report(
    true_labels: &[usize],
    pred_labels: &[usize],
    n_classes: usize,
) -> Result<ClassificationReport> {
    if true_labels.is_empty() {
        return Err(Error::Empty("classification report over zero samples".into()));
    }
    if true_labels.len() != pred_labels.len() {
        return Err(Error::invalid("pred_labels", "length differs from true_labels"));
    }
    let mut confusion = vec![vec![0usize; n_classes]; n_classes];
    for (&t, &p) in true_labels.iter().zip(pred_labels) {
        if t >= n_classes || p >= n_classes {
            return Err(Error::invalid("labels", format!("label outside [0, {n_classes})")));
        }
        confusion[t][p] += 1;
    }
    let n = true_labels.len();
    let per_class: Vec<ClassMetrics> = (0..n_classes)
        .map(|c| {
            let tp = confusion[c][c];
            let predicted: usize = (0..n_classes).map(|t| confusion[t][c]).sum();
            let support: usize = confusion[c].iter().sum();
            let precision = ratio(tp, predicted);
            let recall = ratio(tp, support);
            let f1 = if precision + recall > 0.0 {
                2.0 * precision * recall / (precision + recall)
            } else {
                0.0
            };
            ClassMetrics {
                precision,
                recall,
                f1,
                support,
            }
        })
        .collect();
    let correct: usize = (0..n_classes).map(|c| confusion[c][c]).sum();
    let k = n_classes as f64;
    let macro_avg = ClassMetrics {
        precision: per_class.iter().map(|m| m.precision).sum::<f64>() / k,
        recall: per_class.iter().map(|m| m.recall).sum::<f64>() / k,
        f1: per_class.iter().map(|m| m.f1).sum::<f64>() / k,
        support: n,
    };
    let w = |f: fn(&ClassMetrics) -> f64| {
        per_class.iter().map(|m| f(m) * m.support as f64).sum::<f64>() / n as f64
    };
    let weighted_avg = ClassMetrics {
        precision: w(|m| m.precision),
        recall: w(|m| m.recall),
        f1: w(|m| m.f1),
        support: n,
    };
    Ok(ClassificationReport {
        per_class,
        accuracy: ratio(correct, n),
        macro_avg,
        weighted_avg,
        confusion,
        n_samples: n,
    })
}
