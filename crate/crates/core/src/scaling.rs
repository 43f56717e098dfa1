//! Per-feature Min–Max scaling.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Maps each feature affinely onto `[0, 1]` using the fitted column range.
///
/// Features whose range collapses (`max == min`) are flagged degenerate and mapped
/// to the constant 0; inverting such a feature returns the fitted constant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinMaxScaler {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl MinMaxScaler {
    pub fn fit<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let first = rows
            .first()
            .ok_or_else(|| Error::Empty("cannot fit a scaler on zero rows".into()))?;
        let width = first.as_ref().len();
        let mut min = vec![f64::INFINITY; width];
        let mut max = vec![f64::NEG_INFINITY; width];
        for (r, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != width {
                return Err(Error::invalid(
                    format!("row {r}"),
                    format!("width {} differs from {width}", row.len()),
                ));
            }
            for (c, &v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::invalid(format!("row {r}, column {c}"), "non-finite entry"));
                }
                min[c] = min[c].min(v);
                max[c] = max[c].max(v);
            }
        }
        Ok(Self { min, max })
    }

    pub fn width(&self) -> usize {
        self.min.len()
    }

    pub fn is_degenerate(&self, feature: usize) -> bool {
        self.max[feature] <= self.min[feature]
    }

    pub fn degenerate_features(&self) -> Vec<usize> {
        (0..self.width()).filter(|&i| self.is_degenerate(i)).collect()
    }

    /// Slope and offset of the forward map for one feature: `z = a·v + b`.
    pub fn affine(&self, feature: usize) -> (f64, f64) {
        if self.is_degenerate(feature) {
            (0.0, 0.0)
        } else {
            let a = 1.0 / (self.max[feature] - self.min[feature]);
            (a, -self.min[feature] * a)
        }
    }

    pub fn transform_value(&self, feature: usize, v: f64) -> f64 {
        if self.is_degenerate(feature) {
            0.0
        } else {
            (v - self.min[feature]) / (self.max[feature] - self.min[feature])
        }
    }

    pub fn inverse_value(&self, feature: usize, z: f64) -> f64 {
        if self.is_degenerate(feature) {
            self.min[feature]
        } else {
            self.min[feature] + z * (self.max[feature] - self.min[feature])
        }
    }

    pub fn transform(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .enumerate()
            .map(|(i, &v)| self.transform_value(i, v))
            .collect()
    }

    pub fn inverse_transform(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .enumerate()
            .map(|(i, &z)| self.inverse_value(i, z))
            .collect()
    }
}

/// Fits a scaler and returns it together with the scaled rows.
pub fn minmax_fit_transform<R: AsRef<[f64]>>(rows: &[R]) -> Result<(MinMaxScaler, Vec<Vec<f64>>)> {
    let scaler = MinMaxScaler::fit(rows)?;
    let scaled = rows.iter().map(|r| scaler.transform(r.as_ref())).collect();
    Ok((scaler, scaled))
}
