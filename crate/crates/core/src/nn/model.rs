use std::path::Path;

use ndarray::{concatenate, s, Array2, Axis};
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::layer::{Cache, Layer, Mode};
use crate::rng::Rng;
use crate::scaling::MinMaxScaler;

pub const MODEL_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Sequential {
    pub layers: Vec<Layer>,
}

impl Sequential {
    pub fn new(layers: Vec<Layer>) -> Self {
        Self { layers }
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(Layer::n_params).sum()
    }

    fn forward(&self, first_index: usize, x: &Array2<f64>, mode: Mode, rng: &mut Rng) -> Result<(Array2<f64>, Vec<Cache>)> {
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut h = x.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            let (y, c) = layer.forward(first_index + i, &h, mode, rng)?;
            caches.push(c);
            h = y;
        }
        Ok((h, caches))
    }

    /// `grads` is this block's slice of the flat gradient vector.
    fn backward(&self, caches: &[Cache], dy: Array2<f64>, mut grads: Option<&mut [f64]>) -> Result<Array2<f64>> {
        if caches.len() != self.layers.len() {
            return Err(Error::Contract("forward cache does not match the network".into()));
        }
        let mut offsets = Vec::with_capacity(self.layers.len());
        let mut o = 0;
        for l in &self.layers {
            offsets.push(o);
            o += l.n_params();
        }
        let mut d = dy;
        for (i, layer) in self.layers.iter().enumerate().rev() {
            d = match grads.as_deref_mut() {
                Some(g) if layer.n_params() > 0 => {
                    let block = &mut g[offsets[i]..offsets[i] + layer.n_params()];
                    let mut parts = split_like(block, &layer.params());
                    layer.backward(&caches[i], &d, Some(&mut parts))?
                }
                _ => layer.backward(&caches[i], &d, None)?,
            };
        }
        Ok(d)
    }
}

/// Splits `flat` into consecutive pieces with the lengths of `shape`.
fn split_like<'a>(mut flat: &'a mut [f64], shape: &[&[f64]]) -> Vec<&'a mut [f64]> {
    let mut out = Vec::with_capacity(shape.len());
    for s in shape {
        let (head, tail) = flat.split_at_mut(s.len());
        out.push(head);
        flat = tail;
    }
    out
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub seed: u64,
    pub final_epoch: usize,
    pub best_epoch: usize,
    pub best_val_loss: f64,
}

/// Shared trunk followed by one or more heads whose outputs are concatenated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Network {
    pub schema_version: u32,
    pub input_width: usize,
    pub trunk: Sequential,
    pub heads: Vec<Sequential>,
    pub input_scaler: Option<MinMaxScaler>,
    pub output_scaler: Option<MinMaxScaler>,
    pub meta: TrainingMeta,
}

pub struct NetCache {
    trunk: Vec<Cache>,
    heads: Vec<Vec<Cache>>,
    head_widths: Vec<usize>,
    batch: usize,
}

impl Network {
    pub fn new(input_width: usize, trunk: Sequential, heads: Vec<Sequential>) -> Result<Self> {
        let net = Self {
            schema_version: MODEL_SCHEMA_VERSION,
            input_width,
            trunk,
            heads,
            input_scaler: None,
            output_scaler: None,
            meta: TrainingMeta::default(),
        };
        net.head_widths()?;
        Ok(net)
    }

    /// Width of each head's output; fails on inconsistent layer sizes.
    pub fn head_widths(&self) -> Result<Vec<usize>> {
        let walk = |seq: &Sequential, first: usize, mut w: usize| -> Result<usize> {
            for (i, l) in seq.layers.iter().enumerate() {
                if let Some(want) = l.input_width() {
                    if want != w {
                        return Err(Error::Shape {
                            layer: first + i,
                            expected: want,
                            got: w,
                        });
                    }
                }
                w = l.output_width(w);
            }
            Ok(w)
        };
        let trunk_out = walk(&self.trunk, 0, self.input_width)?;
        let mut first = self.trunk.layers.len();
        let mut out = Vec::new();
        if self.heads.is_empty() {
            return Err(Error::invalid("heads", "a network needs at least one head"));
        }
        for h in &self.heads {
            out.push(walk(h, first, trunk_out)?);
            first += h.layers.len();
        }
        Ok(out)
    }

    pub fn output_width(&self) -> usize {
        self.head_widths().map(|w| w.iter().sum()).unwrap_or(0)
    }

    pub fn n_params(&self) -> usize {
        self.trunk.n_params() + self.heads.iter().map(Sequential::n_params).sum::<usize>()
    }

    fn layers(&self) -> impl Iterator<Item = &Layer> {
        self.trunk.layers.iter().chain(self.heads.iter().flat_map(|h| h.layers.iter()))
    }

    fn layers_mut(&mut self) -> impl Iterator<Item = &mut Layer> {
        self.trunk
            .layers
            .iter_mut()
            .chain(self.heads.iter_mut().flat_map(|h| h.layers.iter_mut()))
    }

    /// All trainable parameters, trunk first, in layer order.
    pub fn params_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for l in self.layers() {
            for p in l.params() {
                out.extend_from_slice(p);
            }
        }
        out
    }

    pub fn set_params_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.n_params() {
            return Err(Error::invalid("params", format!("expected {} values, got {}", self.n_params(), flat.len())));
        }
        let mut o = 0;
        for l in self.layers_mut() {
            for p in l.params_mut() {
                p.copy_from_slice(&flat[o..o + p.len()]);
                o += p.len();
            }
        }
        Ok(())
    }

    /// Applies `f(param, offset)` to every parameter slice in flat order.
    pub fn visit_params_mut(&mut self, mut f: impl FnMut(&mut [f64], usize)) {
        let mut o = 0;
        for l in self.layers_mut() {
            for p in l.params_mut() {
                let n = p.len();
                f(p, o);
                o += n;
            }
        }
    }

    pub fn forward(&self, x: &Array2<f64>, mode: Mode, rng: &mut Rng) -> Result<(Array2<f64>, NetCache)> {
        if x.ncols() != self.input_width {
            return Err(Error::Shape {
                layer: 0,
                expected: self.input_width,
                got: x.ncols(),
            });
        }
        let (h, trunk) = self.trunk.forward(0, x, mode, rng)?;
        let mut first = self.trunk.layers.len();
        let mut outs = Vec::with_capacity(self.heads.len());
        let mut heads = Vec::with_capacity(self.heads.len());
        let mut head_widths = Vec::with_capacity(self.heads.len());
        for head in &self.heads {
            let (y, c) = head.forward(first, &h, mode, rng)?;
            first += head.layers.len();
            head_widths.push(y.ncols());
            outs.push(y);
            heads.push(c);
        }
        let views: Vec<_> = outs.iter().map(|o| o.view()).collect();
        let y = concatenate(Axis(1), &views).expect("heads share the batch size");
        Ok((
            y,
            NetCache {
                trunk,
                heads,
                head_widths,
                batch: x.nrows(),
            },
        ))
    }

    /// Eval-mode forward pass.
    pub fn predict(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        let mut rng = Rng::seed_from_u64(0);
        self.forward(x, Mode::Eval, &mut rng).map(|(y, _)| y)
    }

    /// Reverse pass from the output gradient. Returns the flat parameter
    /// gradient (when requested) and the input gradient.
    pub fn backward(&self, cache: &NetCache, dy: &Array2<f64>, param_grads: bool) -> Result<(Option<Vec<f64>>, Array2<f64>)> {
        let mut grads = param_grads.then(|| vec![0.0; self.n_params()]);
        let trunk_n = self.trunk.n_params();
        let mut dh: Option<Array2<f64>> = None;
        let mut col = 0;
        let mut off = trunk_n;
        for (i, head) in self.heads.iter().enumerate() {
            let w = cache.head_widths[i];
            let slice = dy.slice(s![.., col..col + w]).to_owned();
            col += w;
            let n = head.n_params();
            let g = grads.as_mut().map(|g| &mut g[off..off + n]);
            let d = head.backward(&cache.heads[i], slice, g)?;
            off += n;
            dh = Some(match dh {
                Some(acc) => acc + d,
                None => d,
            });
        }
        let dh = dh.ok_or_else(|| Error::Contract("network without heads".into()))?;
        let g = grads.as_mut().map(|g| &mut g[..trunk_n]);
        let dx = self.trunk.backward(&cache.trunk, dh, g)?;
        Ok((grads, dx))
    }

    /// Folds batchnorm statistics from a training pass into the running estimates.
    pub fn commit(&mut self, cache: &NetCache) {
        let batch = cache.batch;
        for (l, c) in self.trunk.layers.iter_mut().zip(&cache.trunk) {
            l.commit(c, batch);
        }
        for (h, hc) in self.heads.iter_mut().zip(&cache.heads) {
            for (l, c) in h.layers.iter_mut().zip(hc) {
                l.commit(c, batch);
            }
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Serde(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let net: Self = serde_json::from_str(text).map_err(|e| Error::Serde(e.to_string()))?;
        if net.schema_version != MODEL_SCHEMA_VERSION {
            return Err(Error::Serde(format!(
                "model schema_version {} is not supported (expected {MODEL_SCHEMA_VERSION})",
                net.schema_version
            )));
        }
        net.head_widths()?;
        Ok(net)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Serde(m) => Error::Serde(format!("{}: {m}", path.display())),
            other => other,
        })
    }
}
