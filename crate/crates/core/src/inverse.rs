//! Multi-head inverse network: cup chemistry in, recipe out, trained against a
//! frozen surrogate for cycle consistency.
//!
//! Output columns: 4 blend fractions (softmax), scaled temperature (sigmoid),
//! scaled pressure (sigmoid), 3 granulometry probabilities (softmax).

use std::fmt::Write as _;

use ndarray::{s, Array2};
use serde::{Deserialize, Serialize};

use crate::datagen::Dataset;
use crate::error::{Error, Result};
use crate::metrics::{classification_report, multi_regression_metrics, regression_metrics, ClassificationReport, RegressionMetrics};
use crate::nn::{self, Layer, Mode, Network, Objective, Sequential, TrainPolicy};
use crate::rng::stage_rng;
use crate::scaling::MinMaxScaler;
use crate::surrogate::train_val;
use crate::tsv::format_float;
use crate::types::{Chemistry, Granulometry, LabeledSample, Recipe, N_FRACTIONS, N_RECIPE_FEATURES, N_SPECIES};

const N_GRAN: usize = 3;
const TEMP: usize = N_FRACTIONS;
const PRESS: usize = N_FRACTIONS + 1;
const GRAN: usize = N_FRACTIONS + 2;
/// Width of the concatenated head outputs.
pub const N_OUTPUTS: usize = GRAN + N_GRAN;
const CHEM: usize = N_OUTPUTS;
/// Width of a training target row: the output layout followed by the
/// surrogate-scaled chemistry used by the reconstruction term.
pub const N_TARGETS: usize = N_OUTPUTS + N_SPECIES;

/// Probabilities below this are clamped inside the cross-entropy.
pub const PROB_CLAMP: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TaskWeights {
    pub distrib: f64,
    pub temp: f64,
    pub press: f64,
    pub gran: f64,
}

impl Default for TaskWeights {
    fn default() -> Self {
        Self {
            distrib: 1.0,
            temp: 1.0,
            press: 0.25,
            gran: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InverseSpec {
    pub hidden: [usize; 3],
    pub dropout: f64,
    pub weights: TaskWeights,
    /// Weight on temperature overestimates.
    pub alpha: f64,
    pub lambda_s: f64,
    /// Weight of the cycle-consistency term.
    pub beta: f64,
}

impl Default for InverseSpec {
    fn default() -> Self {
        Self {
            hidden: [256, 128, 64],
            dropout: 0.15,
            weights: TaskWeights::default(),
            alpha: 1.5,
            lambda_s: 1e-3,
            beta: 3.0,
        }
    }
}

impl InverseSpec {
    pub fn validate(&self) -> Result<()> {
        if self.hidden.contains(&0) {
            return Err(Error::invalid("hidden", "layer widths must be positive"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::invalid("dropout", "must lie in [0, 1)"));
        }
        let w = self.weights;
        for (name, v) in [
            ("weights.distrib", w.distrib),
            ("weights.temp", w.temp),
            ("weights.press", w.press),
            ("weights.gran", w.gran),
            ("alpha", self.alpha),
            ("lambda_s", self.lambda_s),
            ("beta", self.beta),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(name, "must be finite and non-negative"));
            }
        }
        Ok(())
    }

    pub fn build(&self, seed: u64) -> Result<Network> {
        self.validate()?;
        let mut rng = stage_rng(seed, "inverse-init");
        let [h1, h2, h3] = self.hidden;
        let trunk = Sequential::new(vec![
            Layer::dense(N_SPECIES, h1, &mut rng),
            Layer::Relu,
            Layer::batch_norm(h1),
            Layer::Dropout { p: self.dropout },
            Layer::dense(h1, h2, &mut rng),
            Layer::Relu,
            Layer::dense(h2, h3, &mut rng),
            Layer::Relu,
        ]);
        let heads = vec![
            Sequential::new(vec![Layer::dense(h3, N_FRACTIONS, &mut rng), Layer::Softmax]),
            Sequential::new(vec![Layer::dense(h3, 1, &mut rng), Layer::Sigmoid]),
            Sequential::new(vec![Layer::dense(h3, 1, &mut rng), Layer::Sigmoid]),
            Sequential::new(vec![Layer::dense(h3, N_GRAN, &mut rng), Layer::Softmax]),
        ];
        Network::new(N_SPECIES, trunk, heads)
    }
}

/// `0.8‖ŷ − y‖₂² + 0.2‖ŷ − y‖₁ + λ_s‖ŷ‖₁` for one fraction vector.
pub fn loss_distrib(y: &[f64], y_hat: &[f64], lambda_s: f64) -> f64 {
    let mut sq = 0.0;
    let mut abs = 0.0;
    let mut l1 = 0.0;
    for (a, b) in y.iter().zip(y_hat) {
        let d = b - a;
        sq += d * d;
        abs += d.abs();
        l1 += b.abs();
    }
    0.8 * sq + 0.2 * abs + lambda_s * l1
}

/// Asymmetric temperature loss: overestimates are weighted by `alpha`.
pub fn loss_temp(y: f64, y_hat: f64, alpha: f64) -> f64 {
    let d = y_hat - y;
    let w = if y_hat > y { alpha } else { 1.0 };
    w * (0.7 * d * d + 0.3 * d.abs())
}

pub fn loss_press(y: &[f64], y_hat: &[f64]) -> f64 {
    y.iter().zip(y_hat).map(|(a, b)| (b - a) * (b - a)).sum::<f64>() / y.len().max(1) as f64
}

/// Cross-entropy of one-hot `y` against probabilities `p`.
pub fn loss_gran(y: &[f64], p: &[f64]) -> f64 {
    -y.iter().zip(p).map(|(t, q)| t * q.max(PROB_CLAMP).ln()).sum::<f64>()
}

/// Affine map from inverse outputs to surrogate inputs. Temperature and
/// pressure are de-scaled by the inverse's scaler and re-scaled by the
/// surrogate's; the granulometry code enters as its expectation under the
/// predicted class probabilities.
#[derive(Clone, Debug)]
pub(crate) struct Bridge {
    /// `N_RECIPE_FEATURES × N_OUTPUTS`.
    m: Array2<f64>,
    c: Vec<f64>,
}

impl Bridge {
    pub(crate) fn new(inverse_out: &MinMaxScaler, surrogate_in: &MinMaxScaler) -> Result<Self> {
        if inverse_out.width() != N_RECIPE_FEATURES || surrogate_in.width() != N_RECIPE_FEATURES {
            return Err(Error::Contract("recipe scalers must have width 7".into()));
        }
        let mut m = Array2::zeros((N_RECIPE_FEATURES, N_OUTPUTS));
        let mut c = vec![0.0; N_RECIPE_FEATURES];
        for (feature, col) in [(0, TEMP), (1, PRESS)] {
            let (a, b) = surrogate_in.affine(feature);
            let lo = inverse_out.min[feature];
            let range = if inverse_out.is_degenerate(feature) {
                0.0
            } else {
                inverse_out.max[feature] - lo
            };
            m[[feature, col]] = a * range;
            c[feature] = a * lo + b;
        }
        let (a, b) = surrogate_in.affine(2);
        for k in 0..N_GRAN {
            m[[2, GRAN + k]] = a * k as f64;
        }
        c[2] = b;
        for i in 0..N_FRACTIONS {
            let (a, b) = surrogate_in.affine(3 + i);
            m[[3 + i, i]] = a;
            c[3 + i] = b;
        }
        Ok(Self { m, c })
    }

    pub(crate) fn apply(&self, out: &Array2<f64>) -> Array2<f64> {
        let mut z = out.dot(&self.m.t());
        for mut row in z.rows_mut() {
            for (v, c) in row.iter_mut().zip(&self.c) {
                *v += c;
            }
        }
        z
    }

    pub(crate) fn pull_back(&self, dz: &Array2<f64>) -> Array2<f64> {
        dz.dot(&self.m)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SurrogateMode {
    Frozen,
    Trainable,
}

/// Breakdown of the total loss over a batch (each term already averaged).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossParts {
    pub distrib: f64,
    pub temp: f64,
    pub press: f64,
    pub gran: f64,
    pub recon: f64,
    pub total: f64,
}

/// The multi-task objective plus `β · mean ‖f̂(g(y)) − y‖²` through a frozen surrogate.
pub struct InverseObjective<'a> {
    pub spec: InverseSpec,
    surrogate: &'a Network,
    mode: SurrogateMode,
    bridge: Bridge,
}

impl<'a> InverseObjective<'a> {
    pub fn new(spec: &InverseSpec, surrogate: &'a Network, mode: SurrogateMode, inverse_out: &MinMaxScaler) -> Result<Self> {
        spec.validate()?;
        let si = surrogate
            .input_scaler
            .as_ref()
            .ok_or_else(|| Error::Contract("surrogate model has no input scaler".into()))?;
        if surrogate.input_width != N_RECIPE_FEATURES || surrogate.output_width() != N_SPECIES {
            return Err(Error::Contract("surrogate must map 7 recipe features to 8 species".into()));
        }
        Ok(Self {
            spec: spec.clone(),
            surrogate,
            mode,
            bridge: Bridge::new(inverse_out, si)?,
        })
    }

    /// Surrogate inputs implied by a batch of inverse outputs.
    pub fn surrogate_inputs(&self, out: &Array2<f64>) -> Array2<f64> {
        self.bridge.apply(out)
    }

    pub fn parts(&self, out: &Array2<f64>, targets: &Array2<f64>) -> Result<LossParts> {
        self.evaluate(out, targets, false).map(|(p, _)| p)
    }

    fn evaluate(&self, out: &Array2<f64>, targets: &Array2<f64>, want_grad: bool) -> Result<(LossParts, Array2<f64>)> {
        if self.mode != SurrogateMode::Frozen {
            return Err(Error::Contract("the cycle-consistency surrogate must be frozen".into()));
        }
        if out.ncols() != N_OUTPUTS || targets.ncols() != N_TARGETS || out.nrows() != targets.nrows() {
            return Err(Error::invalid(
                "targets",
                format!("outputs {:?} and targets {:?} do not match the inverse layout", out.dim(), targets.dim()),
            ));
        }
        let spec = &self.spec;
        let w = spec.weights;
        let b = out.nrows() as f64;
        let mut parts = LossParts::default();
        let mut grad = Array2::zeros(out.dim());
        for (r, (o, t)) in out.rows().into_iter().zip(targets.rows()).enumerate() {
            let (o, t) = (o.to_vec(), t.to_vec());
            parts.distrib += loss_distrib(&t[..N_FRACTIONS], &o[..N_FRACTIONS], spec.lambda_s);
            parts.temp += loss_temp(t[TEMP], o[TEMP], spec.alpha);
            parts.press += (o[PRESS] - t[PRESS]).powi(2);
            parts.gran += loss_gran(&t[GRAN..N_OUTPUTS], &o[GRAN..N_OUTPUTS]);
            if want_grad {
                for i in 0..N_FRACTIONS {
                    let d = o[i] - t[i];
                    grad[[r, i]] = w.distrib * (1.6 * d + 0.2 * nn::sign(d) + spec.lambda_s * nn::sign(o[i])) / b;
                }
                let d = o[TEMP] - t[TEMP];
                let wt = if o[TEMP] > t[TEMP] { spec.alpha } else { 1.0 };
                grad[[r, TEMP]] = w.temp * wt * (1.4 * d + 0.3 * nn::sign(d)) / b;
                grad[[r, PRESS]] = w.press * 2.0 * (o[PRESS] - t[PRESS]) / b;
                for k in GRAN..N_OUTPUTS {
                    if o[k] > PROB_CLAMP {
                        grad[[r, k]] = -w.gran * t[k] / o[k] / b;
                    }
                }
            }
        }
        parts.distrib /= b;
        parts.temp /= b;
        parts.press /= b;
        parts.gran /= b;
        if spec.beta > 0.0 {
            let z = self.bridge.apply(out);
            let mut rng = stage_rng(0, "frozen-surrogate");
            let (pred, cache) = self.surrogate.forward(&z, Mode::Eval, &mut rng)?;
            let resid = &pred - &targets.slice(s![.., CHEM..N_TARGETS]);
            parts.recon = resid.mapv(|v| v * v).sum() / b;
            if want_grad {
                let dpred = resid.mapv(|v| 2.0 * spec.beta * v / b);
                let (_, dz) = self.surrogate.backward(&cache, &dpred, false)?;
                grad += &self.bridge.pull_back(&dz);
            }
        }
        parts.total = w.distrib * parts.distrib
            + w.temp * parts.temp
            + w.press * parts.press
            + w.gran * parts.gran
            + spec.beta * parts.recon;
        Ok((parts, grad))
    }
}

impl Objective for InverseObjective<'_> {
    fn loss_grad(&self, out: &Array2<f64>, targets: &Array2<f64>, _inputs: &Array2<f64>) -> Result<(f64, Array2<f64>)> {
        self.evaluate(out, targets, true).map(|(p, g)| (p.total, g))
    }

    fn loss(&self, out: &Array2<f64>, targets: &Array2<f64>, _inputs: &Array2<f64>) -> Result<f64> {
        self.evaluate(out, targets, false).map(|(p, _)| p.total)
    }
}

/// Scaled chemistry inputs and full target rows for a set of samples.
pub fn inverse_matrices(
    samples: &[LabeledSample],
    inverse_in: &MinMaxScaler,
    inverse_out: &MinMaxScaler,
    surrogate_out: &MinMaxScaler,
) -> Result<(Array2<f64>, Array2<f64>)> {
    let mut x = Vec::with_capacity(samples.len());
    let mut y = Vec::with_capacity(samples.len());
    for s in samples {
        x.push(inverse_in.transform(&s.chemistry.0));
        let mut t = vec![0.0; N_TARGETS];
        t[..N_FRACTIONS].copy_from_slice(&s.recipe.fractions);
        t[TEMP] = inverse_out.transform_value(0, s.recipe.temperature);
        t[PRESS] = inverse_out.transform_value(1, s.recipe.pressure);
        t[GRAN + s.recipe.granulometry.code()] = 1.0;
        t[CHEM..].copy_from_slice(&surrogate_out.transform(&s.chemistry.0));
        y.push(t);
    }
    Ok((nn::to_matrix(&x)?, nn::to_matrix(&y)?))
}

fn surrogate_scalers(net: &Network) -> Result<(&MinMaxScaler, &MinMaxScaler)> {
    match (&net.input_scaler, &net.output_scaler) {
        (Some(i), Some(o)) => Ok((i, o)),
        _ => Err(Error::Contract("surrogate model lacks fitted scalers".into())),
    }
}

fn inverse_scalers(net: &Network) -> Result<(&MinMaxScaler, &MinMaxScaler)> {
    match (&net.input_scaler, &net.output_scaler) {
        (Some(i), Some(o)) if i.width() == N_SPECIES && o.width() == N_RECIPE_FEATURES => Ok((i, o)),
        _ => Err(Error::Contract("inverse model lacks fitted scalers of widths 8 and 7".into())),
    }
}

/// Trains the inverse network against `surrogate`, which is only read. Fails
/// with a contract error if the surrogate changed during training.
pub fn train_inverse(ds: &Dataset, spec: &InverseSpec, policy: &TrainPolicy, surrogate: &Network) -> Result<(Network, nn::History)> {
    let (train, val) = train_val(ds)?;
    let (_, sur_out) = surrogate_scalers(surrogate)?;
    let before = surrogate.params_flat();
    let chem: Vec<[f64; N_SPECIES]> = train.iter().map(|s| s.chemistry.0).collect();
    let feats: Vec<[f64; N_RECIPE_FEATURES]> = train.iter().map(|s| s.recipe.features()).collect();
    let inv_in = MinMaxScaler::fit(&chem)?;
    let inv_out = MinMaxScaler::fit(&feats)?;
    let (tx, ty) = inverse_matrices(&train, &inv_in, &inv_out, sur_out)?;
    let (vx, vy) = inverse_matrices(&val, &inv_in, &inv_out, sur_out)?;
    let objective = InverseObjective::new(spec, surrogate, SurrogateMode::Frozen, &inv_out)?;
    let mut net = spec.build(policy.seed)?;
    let history = nn::train(&mut net, (&tx, &ty), (&vx, &vy), policy, &objective)?;
    if surrogate.params_flat().iter().zip(&before).any(|(a, b)| a.to_bits() != b.to_bits()) {
        return Err(Error::Contract("surrogate parameters changed during inverse training".into()));
    }
    net.input_scaler = Some(inv_in);
    net.output_scaler = Some(inv_out);
    Ok((net, history))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Inversion {
    pub recipe: Recipe,
    pub granulometry_probs: [f64; N_GRAN],
    /// `‖f̂(g(y)) − y‖₂` in the surrogate's scaled chemistry space.
    pub residual: Option<f64>,
    /// Species whose target value lies outside the inverse's fitted range.
    pub out_of_range: Vec<usize>,
}

/// Recovers recipes for a batch of target chemistries. With a surrogate the
/// round-trip residual is reported too.
pub fn invert(model: &Network, surrogate: Option<&Network>, targets: &[Chemistry]) -> Result<Vec<Inversion>> {
    let (inv_in, inv_out) = inverse_scalers(model)?;
    let rows: Vec<Vec<f64>> = targets.iter().map(|c| inv_in.transform(&c.0)).collect();
    if rows.is_empty() {
        return Ok(Vec::new());
    }
    let out = model.predict(&nn::to_matrix(&rows)?)?;
    let residuals = match surrogate {
        Some(sur) => {
            let (si, so) = surrogate_scalers(sur)?;
            let bridge = Bridge::new(inv_out, si)?;
            let pred = sur.predict(&bridge.apply(&out))?;
            let res: Vec<f64> = pred
                .rows()
                .into_iter()
                .zip(targets)
                .map(|(p, c)| {
                    let y = so.transform(&c.0);
                    p.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
                })
                .collect();
            Some(res)
        }
        None => None,
    };
    let mut results = Vec::with_capacity(targets.len());
    for (i, (o, c)) in out.rows().into_iter().zip(targets).enumerate() {
        let frac: [f64; N_FRACTIONS] = std::array::from_fn(|k| o[k].max(0.0));
        let sum: f64 = frac.iter().sum();
        let fractions = frac.map(|f| f / sum);
        let probs: [f64; N_GRAN] = std::array::from_fn(|k| o[GRAN + k]);
        let class = (0..N_GRAN).fold(0, |best, k| if probs[k] > probs[best] { k } else { best });
        let recipe = Recipe::new(
            inv_out.inverse_value(0, o[TEMP]),
            inv_out.inverse_value(1, o[PRESS]),
            Granulometry::from_code(class)?,
            fractions,
        )?;
        let out_of_range = (0..N_SPECIES)
            .filter(|&k| c.0[k] < inv_in.min[k] || c.0[k] > inv_in.max[k])
            .collect();
        results.push(Inversion {
            recipe,
            granulometry_probs: probs,
            residual: residuals.as_ref().map(|r| r[i]),
            out_of_range,
        });
    }
    Ok(results)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InverseReport {
    pub temperature: RegressionMetrics,
    /// Column-averaged R² over the four fractions.
    pub distribution: RegressionMetrics,
    /// Pressure is constant in the data, so these numbers carry no information.
    pub pressure_mse: f64,
    pub pressure_mae: f64,
    pub granulometry: ClassificationReport,
    pub truth: Vec<Recipe>,
    pub predicted: Vec<Recipe>,
    pub residuals: Option<Vec<f64>>,
}

impl InverseReport {
    pub fn temperature_abs_errors(&self) -> Vec<f64> {
        self.truth
            .iter()
            .zip(&self.predicted)
            .map(|(t, p)| (t.temperature - p.temperature).abs())
            .collect()
    }

    /// ℓ∞ distance between true and predicted fraction vectors, per sample.
    pub fn fraction_linf_errors(&self) -> Vec<f64> {
        self.truth
            .iter()
            .zip(&self.predicted)
            .map(|(t, p)| (0..N_FRACTIONS).map(|k| (t.fractions[k] - p.fractions[k]).abs()).fold(0.0, f64::max))
            .collect()
    }

    pub fn summary_tsv(&self) -> String {
        let mut s = String::from("metric\tvalue\n");
        let mut row = |k: &str, v: f64| {
            let _ = writeln!(s, "{k}\t{}", format_float(v));
        };
        row("temperature_mse", self.temperature.mse);
        row("temperature_mae", self.temperature.mae);
        row("temperature_r2", self.temperature.r2);
        row("distribution_mse", self.distribution.mse);
        row("distribution_mae", self.distribution.mae);
        row("distribution_r2", self.distribution.r2);
        row("pressure_mse", self.pressure_mse);
        row("pressure_mae", self.pressure_mae);
        row("granulometry_accuracy", self.granulometry.accuracy);
        for (g, m) in Granulometry::ALL.iter().zip(&self.granulometry.per_class) {
            row(&format!("granulometry_{g}_precision"), m.precision);
            row(&format!("granulometry_{g}_recall"), m.recall);
            row(&format!("granulometry_{g}_f1"), m.f1);
        }
        s
    }

    pub fn temperature_tsv(&self) -> String {
        let mut s = String::from("T_true\tT_pred\n");
        for (t, p) in self.truth.iter().zip(&self.predicted) {
            let _ = writeln!(s, "{}\t{}", format_float(t.temperature), format_float(p.temperature));
        }
        s
    }

    pub fn fraction_tsv(&self, k: usize) -> String {
        let tag = crate::types::FRACTION_TAGS[k];
        let mut s = format!("{tag}_true\t{tag}_pred\n");
        for (t, p) in self.truth.iter().zip(&self.predicted) {
            let _ = writeln!(s, "{}\t{}", format_float(t.fractions[k]), format_float(p.fractions[k]));
        }
        s
    }

    /// Rows are true classes, columns predicted classes.
    pub fn confusion_tsv(&self) -> String {
        let mut s = String::from("true\\pred\tG\tO\tF\n");
        for (g, row) in Granulometry::ALL.iter().zip(&self.granulometry.confusion) {
            let cells: Vec<String> = row.iter().map(usize::to_string).collect();
            let _ = writeln!(s, "{g}\t{}", cells.join("\t"));
        }
        s
    }
}

pub fn eval_inverse(model: &Network, surrogate: Option<&Network>, samples: &[LabeledSample]) -> Result<InverseReport> {
    if samples.is_empty() {
        return Err(Error::Empty("inverse evaluation on an empty split".into()));
    }
    let targets: Vec<Chemistry> = samples.iter().map(|s| s.chemistry).collect();
    let inv = invert(model, surrogate, &targets)?;
    let truth: Vec<Recipe> = samples.iter().map(|s| s.recipe).collect();
    let predicted: Vec<Recipe> = inv.iter().map(|i| i.recipe).collect();
    let t_true: Vec<f64> = truth.iter().map(|r| r.temperature).collect();
    let t_pred: Vec<f64> = predicted.iter().map(|r| r.temperature).collect();
    let f_true: Vec<[f64; N_FRACTIONS]> = truth.iter().map(|r| r.fractions).collect();
    let f_pred: Vec<[f64; N_FRACTIONS]> = predicted.iter().map(|r| r.fractions).collect();
    let p_true: Vec<f64> = truth.iter().map(|r| r.pressure).collect();
    let p_pred: Vec<f64> = predicted.iter().map(|r| r.pressure).collect();
    let g_true: Vec<usize> = truth.iter().map(|r| r.granulometry.code()).collect();
    let g_pred: Vec<usize> = predicted.iter().map(|r| r.granulometry.code()).collect();
    Ok(InverseReport {
        temperature: regression_metrics(&t_true, &t_pred)?,
        distribution: multi_regression_metrics(&f_true, &f_pred)?,
        pressure_mse: crate::metrics::mse(&p_true, &p_pred)?,
        pressure_mae: crate::metrics::mae(&p_true, &p_pred)?,
        granulometry: classification_report(&g_true, &g_pred, N_GRAN)?,
        truth,
        predicted,
        residuals: surrogate.map(|_| inv.iter().map(|i| i.residual.unwrap_or(f64::NAN)).collect()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distrib_examples() {
        let e = [1.0, 0.0, 0.0, 0.0];
        assert!((loss_distrib(&e, &e, 1e-3) - 1e-3).abs() < 1e-15);
        assert!((loss_distrib(&e, &[0.0, 1.0, 0.0, 0.0], 1e-3) - 2.001).abs() < 1e-12);
    }

    #[test]
    fn temp_examples() {
        assert!((loss_temp(90.0, 91.0, 1.5) - 1.5).abs() < 1e-12);
        assert!((loss_temp(90.0, 89.0, 1.5) - 1.0).abs() < 1e-12);
        assert_eq!(loss_temp(90.0, 90.0, 1.5), 0.0);
    }

    #[test]
    fn gran_examples() {
        assert_eq!(loss_gran(&[0.0, 1.0, 0.0], &[0.0, 1.0, 0.0]), 0.0);
        let u = 1.0 / 3.0;
        assert!((loss_gran(&[0.0, 0.0, 1.0], &[u, u, u]) - 3f64.ln()).abs() < 1e-12);
        assert!(loss_gran(&[1.0, 0.0, 0.0], &[0.0, 0.5, 0.5]).is_finite());
        assert_eq!(loss_press(&[9.0], &[9.0]), 0.0);
    }
}
