//! Layer kinds with their forward and reverse passes.

use ndarray::{Array1, Array2, Axis};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Layer {
    Dense {
        /// `inputs × outputs`, so a batch maps as `X·W + b`.
        weight: Array2<f64>,
        bias: Array1<f64>,
    },
    Relu,
    Sigmoid,
    Softmax,
    BatchNorm {
        gamma: Array1<f64>,
        beta: Array1<f64>,
        running_mean: Array1<f64>,
        running_var: Array1<f64>,
        momentum: f64,
        eps: f64,
    },
    Dropout {
        p: f64,
    },
}

/// What a layer keeps from its forward pass for the reverse pass.
#[derive(Clone, Debug)]
pub enum Cache {
    Input(Array2<f64>),
    Output(Array2<f64>),
    Norm {
        xhat: Array2<f64>,
        inv_std: Array1<f64>,
        batch_mean: Array1<f64>,
        batch_var: Array1<f64>,
    },
    Scale(Array1<f64>),
    Mask(Array2<f64>),
    None,
}

impl Layer {
    /// He-uniform weights, zero bias.
    pub fn dense(inputs: usize, outputs: usize, rng: &mut Rng) -> Self {
        let bound = (6.0 / inputs as f64).sqrt();
        let weight = Array2::from_shape_fn((inputs, outputs), |_| rng.random_range(-bound..bound));
        Layer::Dense {
            weight,
            bias: Array1::zeros(outputs),
        }
    }

    pub fn batch_norm(width: usize) -> Self {
        Layer::BatchNorm {
            gamma: Array1::ones(width),
            beta: Array1::zeros(width),
            running_mean: Array1::zeros(width),
            running_var: Array1::ones(width),
            momentum: 0.1,
            eps: 1e-5,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Layer::Dense { .. } => "dense",
            Layer::Relu => "relu",
            Layer::Sigmoid => "sigmoid",
            Layer::Softmax => "softmax",
            Layer::BatchNorm { .. } => "batchnorm",
            Layer::Dropout { .. } => "dropout",
        }
    }

    /// Input width the layer insists on, if any.
    pub fn input_width(&self) -> Option<usize> {
        match self {
            Layer::Dense { weight, .. } => Some(weight.nrows()),
            Layer::BatchNorm { gamma, .. } => Some(gamma.len()),
            _ => None,
        }
    }

    pub fn output_width(&self, input: usize) -> usize {
        match self {
            Layer::Dense { weight, .. } => weight.ncols(),
            _ => input,
        }
    }

    pub fn n_params(&self) -> usize {
        match self {
            Layer::Dense { weight, bias } => weight.len() + bias.len(),
            Layer::BatchNorm { gamma, beta, .. } => gamma.len() + beta.len(),
            _ => 0,
        }
    }

    /// Trainable parameters as flat slices, in a fixed order.
    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        match self {
            Layer::Dense { weight, bias } => vec![
                weight.as_slice_mut().expect("standard layout"),
                bias.as_slice_mut().expect("standard layout"),
            ],
            Layer::BatchNorm { gamma, beta, .. } => vec![
                gamma.as_slice_mut().expect("standard layout"),
                beta.as_slice_mut().expect("standard layout"),
            ],
            _ => Vec::new(),
        }
    }

    pub fn params(&self) -> Vec<&[f64]> {
        match self {
            Layer::Dense { weight, bias } => vec![
                weight.as_slice().expect("standard layout"),
                bias.as_slice().expect("standard layout"),
            ],
            Layer::BatchNorm { gamma, beta, .. } => vec![
                gamma.as_slice().expect("standard layout"),
                beta.as_slice().expect("standard layout"),
            ],
            _ => Vec::new(),
        }
    }

    pub fn forward(&self, index: usize, x: &Array2<f64>, mode: Mode, rng: &mut Rng) -> Result<(Array2<f64>, Cache)> {
        if let Some(w) = self.input_width() {
            if x.ncols() != w {
                return Err(Error::Shape {
                    layer: index,
                    expected: w,
                    got: x.ncols(),
                });
            }
        }
        Ok(match self {
            Layer::Dense { weight, bias } => (x.dot(weight) + bias, Cache::Input(x.clone())),
            Layer::Relu => (x.mapv(|v| v.max(0.0)), Cache::Input(x.clone())),
            Layer::Sigmoid => {
                let y = x.mapv(sigmoid);
                (y.clone(), Cache::Output(y))
            }
            Layer::Softmax => {
                let mut y = x.clone();
                for mut row in y.rows_mut() {
                    let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
                    row.mapv_inplace(|v| (v - m).exp());
                    let s = row.sum();
                    row /= s;
                }
                (y.clone(), Cache::Output(y))
            }
            Layer::BatchNorm {
                gamma,
                beta,
                running_mean,
                running_var,
                eps,
                ..
            } => match mode {
                Mode::Train => {
                    let n = x.nrows() as f64;
                    let mean = x.mean_axis(Axis(0)).expect("non-empty batch");
                    let centered = x - &mean;
                    let var = centered.mapv(|v| v * v).sum_axis(Axis(0)) / n;
                    let inv_std = var.mapv(|v| 1.0 / (v + eps).sqrt());
                    let xhat = &centered * &inv_std;
                    let y = &xhat * gamma + beta;
                    (
                        y,
                        Cache::Norm {
                            xhat,
                            inv_std,
                            batch_mean: mean,
                            batch_var: var,
                        },
                    )
                }
                Mode::Eval => {
                    let scale = running_var.mapv(|v| 1.0 / (v + eps).sqrt()) * gamma;
                    let y = (x - running_mean) * &scale + beta;
                    (y, Cache::Scale(scale))
                }
            },
            Layer::Dropout { p } => match mode {
                Mode::Train if *p > 0.0 => {
                    let keep = 1.0 - p;
                    let mask = Array2::from_shape_fn(x.raw_dim(), |_| {
                        if rng.random::<f64>() < keep {
                            1.0 / keep
                        } else {
                            0.0
                        }
                    });
                    (x * &mask, Cache::Mask(mask))
                }
                _ => (x.clone(), Cache::None),
            },
        })
    }

    /// Reverse pass. Parameter gradients are added into `grads` (same order
    /// as [`Layer::params_mut`]); returns the gradient with respect to the input.
    pub fn backward(&self, cache: &Cache, dy: &Array2<f64>, grads: Option<&mut [&mut [f64]]>) -> Result<Array2<f64>> {
        let missing = || Error::Contract(format!("{} layer has no forward cache", self.name()));
        Ok(match (self, cache) {
            (Layer::Dense { weight, .. }, Cache::Input(x)) => {
                if let Some(g) = grads {
                    let dw = x.t().dot(dy);
                    let db = dy.sum_axis(Axis(0));
                    add_into(g[0], dw.as_slice().expect("standard layout"));
                    add_into(g[1], db.as_slice().expect("standard layout"));
                }
                dy.dot(&weight.t())
            }
            (Layer::Relu, Cache::Input(x)) => {
                let mut dx = dy.clone();
                dx.zip_mut_with(x, |d, &v| {
                    if v <= 0.0 {
                        *d = 0.0
                    }
                });
                dx
            }
            (Layer::Sigmoid, Cache::Output(y)) => dy * &y.mapv(|v| v * (1.0 - v)),
            (Layer::Softmax, Cache::Output(y)) => {
                let dot = (dy * y).sum_axis(Axis(1)).insert_axis(Axis(1));
                y * &(dy - &dot)
            }
            (Layer::BatchNorm { gamma, .. }, Cache::Norm { xhat, inv_std, .. }) => {
                let n = dy.nrows() as f64;
                if let Some(g) = grads {
                    let dgamma = (dy * xhat).sum_axis(Axis(0));
                    let dbeta = dy.sum_axis(Axis(0));
                    add_into(g[0], dgamma.as_slice().expect("standard layout"));
                    add_into(g[1], dbeta.as_slice().expect("standard layout"));
                }
                let dxhat = dy * gamma;
                let s1 = dxhat.sum_axis(Axis(0));
                let s2 = (&dxhat * xhat).sum_axis(Axis(0));
                let inner = dxhat * n - &s1 - &(xhat * &s2);
                inner * &(inv_std / n)
            }
            (Layer::BatchNorm { .. }, Cache::Scale(scale)) => {
                // Eval mode only backpropagates to the input (frozen networks).
                if grads.is_some() {
                    return Err(Error::Contract("eval-mode batchnorm has no parameter gradient".into()));
                }
                dy * scale
            }
            (Layer::Dropout { .. }, Cache::Mask(mask)) => dy * mask,
            (Layer::Dropout { .. }, Cache::None) => dy.clone(),
            _ => return Err(missing()),
        })
    }

    /// Folds the batch statistics of a training pass into the running estimates.
    pub fn commit(&mut self, cache: &Cache, batch: usize) {
        if let (
            Layer::BatchNorm {
                running_mean,
                running_var,
                momentum,
                ..
            },
            Cache::Norm {
                batch_mean, batch_var, ..
            },
        ) = (self, cache)
        {
            let m = *momentum;
            let unbiased = if batch > 1 {
                batch as f64 / (batch - 1) as f64
            } else {
                1.0
            };
            running_mean.zip_mut_with(batch_mean, |r, &b| *r = (1.0 - m) * *r + m * b);
            running_var.zip_mut_with(batch_var, |r, &b| *r = (1.0 - m) * *r + m * b * unbiased);
        }
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

pub fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}
