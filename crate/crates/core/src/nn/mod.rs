//! A small feed-forward network framework: dense, activation, batchnorm and
//! dropout layers, reverse-mode gradients, Adam and the training loop.

pub mod layer;
pub mod model;
pub mod optim;
pub mod train;

use ndarray::Array2;

use crate::error::{Error, Result};
pub use layer::{Layer, Mode};
pub use model::{Network, Sequential, TrainingMeta};
pub use optim::{Adam, EarlyStopping, PlateauScheduler};
pub use train::{train, EpochRecord, History, Objective, TrainPolicy};

/// Power of two nearest to `√n`; an exact tie goes to the smaller power.
pub fn batch_size_rule(n: usize) -> usize {
    let root = (n.max(1) as f64).sqrt();
    let mut lo = 1usize;
    while ((lo * 2) as f64) <= root {
        lo *= 2;
    }
    let hi = lo * 2;
    if root - lo as f64 <= hi as f64 - root {
        lo
    } else {
        hi
    }
}

/// Stacks equal-width rows into a batch matrix.
pub fn to_matrix<R: AsRef<[f64]>>(rows: &[R]) -> Result<Array2<f64>> {
    let width = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
    let mut flat = Vec::with_capacity(rows.len() * width);
    for r in rows {
        let r = r.as_ref();
        if r.len() != width {
            return Err(Error::invalid("rows", "ragged rows"));
        }
        flat.extend_from_slice(r);
    }
    Array2::from_shape_vec((rows.len(), width), flat).map_err(|e| Error::invalid("rows", e.to_string()))
}

/// `w_mse · MSE + w_mae · MAE` averaged over every output entry.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MixedRegression {
    pub w_mse: f64,
    pub w_mae: f64,
}

impl Objective for MixedRegression {
    fn loss_grad(&self, out: &Array2<f64>, targets: &Array2<f64>, _inputs: &Array2<f64>) -> Result<(f64, Array2<f64>)> {
        if out.dim() != targets.dim() {
            return Err(Error::invalid("targets", format!("{:?} vs outputs {:?}", targets.dim(), out.dim())));
        }
        let n = out.len() as f64;
        let diff = out - targets;
        let loss = (self.w_mse * diff.mapv(|d| d * d).sum() + self.w_mae * diff.mapv(f64::abs).sum()) / n;
        let grad = diff.mapv(|d| (2.0 * self.w_mse * d + self.w_mae * sign(d)) / n);
        Ok((loss, grad))
    }
}

pub(crate) fn sign(d: f64) -> f64 {
    if d > 0.0 {
        1.0
    } else if d < 0.0 {
        -1.0
    } else {
        0.0
    }
}
