//! The differentiable surrogate of the forward operator: recipe features in,
//! cup chemistry out.

use std::fmt::Write as _;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::datagen::Dataset;
use crate::error::{Error, Result};
use crate::metrics::{regression_metrics, RegressionMetrics};
use crate::nn::{self, Layer, MixedRegression, Network, Sequential, TrainPolicy};
use crate::rng::stage_rng;
use crate::scaling::MinMaxScaler;
use crate::tsv::format_float;
use crate::types::{
    Chemistry, LabeledSample, Recipe, Split, N_RECIPE_FEATURES, N_SPECIES, SPECIES, SPECIES_TAGS,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SurrogateSpec {
    /// Widths of the three hidden dense layers.
    pub hidden: [usize; 3],
    pub dropout: f64,
    pub w_mse: f64,
    pub w_mae: f64,
}

impl Default for SurrogateSpec {
    fn default() -> Self {
        Self {
            hidden: [128, 128, 64],
            dropout: 0.1,
            w_mse: 0.8,
            w_mae: 0.2,
        }
    }
}

impl SurrogateSpec {
    pub fn validate(&self) -> Result<()> {
        if self.hidden.contains(&0) {
            return Err(Error::invalid("hidden", "layer widths must be positive"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::invalid("dropout", "must lie in [0, 1)"));
        }
        if self.w_mse < 0.0 || self.w_mae < 0.0 || (self.w_mse + self.w_mae - 1.0).abs() > 1e-12 {
            return Err(Error::invalid("w_mse", "loss weights must be non-negative and sum to 1"));
        }
        Ok(())
    }

    pub fn objective(&self) -> MixedRegression {
        MixedRegression {
            w_mse: self.w_mse,
            w_mae: self.w_mae,
        }
    }

    /// Untrained network without scalers.
    pub fn build(&self, seed: u64) -> Result<Network> {
        self.validate()?;
        let mut rng = stage_rng(seed, "surrogate-init");
        let [h1, h2, h3] = self.hidden;
        let trunk = Sequential::new(vec![
            Layer::dense(N_RECIPE_FEATURES, h1, &mut rng),
            Layer::Relu,
            Layer::batch_norm(h1),
            Layer::Dropout { p: self.dropout },
            Layer::dense(h1, h2, &mut rng),
            Layer::Relu,
            Layer::dense(h2, h3, &mut rng),
            Layer::Relu,
        ]);
        let head = Sequential::new(vec![Layer::dense(h3, N_SPECIES, &mut rng)]);
        Network::new(N_RECIPE_FEATURES, trunk, vec![head])
    }
}

fn feature_rows(samples: &[LabeledSample]) -> Vec<[f64; N_RECIPE_FEATURES]> {
    samples.iter().map(|s| s.recipe.features()).collect()
}

fn chemistry_rows(samples: &[LabeledSample]) -> Vec<[f64; N_SPECIES]> {
    samples.iter().map(|s| s.chemistry.0).collect()
}

fn scaled_matrix<R: AsRef<[f64]>>(scaler: &MinMaxScaler, rows: &[R]) -> Result<Array2<f64>> {
    let scaled: Vec<Vec<f64>> = rows.iter().map(|r| scaler.transform(r.as_ref())).collect();
    nn::to_matrix(&scaled)
}

fn scalers(net: &Network) -> Result<(&MinMaxScaler, &MinMaxScaler)> {
    match (&net.input_scaler, &net.output_scaler) {
        (Some(i), Some(o)) if i.width() == N_RECIPE_FEATURES && o.width() == N_SPECIES => Ok((i, o)),
        _ => Err(Error::Contract("surrogate model lacks fitted scalers of widths 7 and 8".into())),
    }
}

/// Train and validation splits of a labelled dataset, both non-empty.
pub(crate) fn train_val(ds: &Dataset) -> Result<(Vec<LabeledSample>, Vec<LabeledSample>)> {
    let train = ds.in_split(Split::Train);
    let val = ds.in_split(Split::Val);
    if train.is_empty() || val.is_empty() {
        return Err(Error::Empty("dataset has no train/val split labels; run `split` first".into()));
    }
    Ok((train, val))
}

/// Fits scalers on the training split and trains a fresh network. The returned
/// model carries both scalers.
pub fn train_surrogate(ds: &Dataset, spec: &SurrogateSpec, policy: &TrainPolicy) -> Result<(Network, nn::History)> {
    let (train, val) = train_val(ds)?;
    let in_scaler = MinMaxScaler::fit(&feature_rows(&train))?;
    let out_scaler = MinMaxScaler::fit(&chemistry_rows(&train))?;
    let tx = scaled_matrix(&in_scaler, &feature_rows(&train))?;
    let ty = scaled_matrix(&out_scaler, &chemistry_rows(&train))?;
    let vx = scaled_matrix(&in_scaler, &feature_rows(&val))?;
    let vy = scaled_matrix(&out_scaler, &chemistry_rows(&val))?;
    let mut net = spec.build(policy.seed)?;
    let history = nn::train(&mut net, (&tx, &ty), (&vx, &vy), policy, &spec.objective())?;
    net.input_scaler = Some(in_scaler);
    net.output_scaler = Some(out_scaler);
    Ok((net, history))
}

/// De-scaled chemistry predictions, one row per recipe.
pub fn predict(net: &Network, recipes: &[Recipe]) -> Result<Vec<[f64; N_SPECIES]>> {
    let (si, so) = scalers(net)?;
    let rows: Vec<_> = recipes.iter().map(Recipe::features).collect();
    let out = net.predict(&scaled_matrix(si, &rows)?)?;
    Ok(out
        .rows()
        .into_iter()
        .map(|r| {
            let v = so.inverse_transform(&r.to_vec());
            std::array::from_fn(|i| v[i])
        })
        .collect())
}

pub fn predict_one(net: &Network, recipe: &Recipe) -> Result<Chemistry> {
    Ok(Chemistry(predict(net, std::slice::from_ref(recipe))?[0]))
}

/// Jacobian of the scaled output with respect to the scaled input at `x`,
/// by backpropagation (8 × 7).
pub fn input_jacobian(net: &Network, x: &[f64]) -> Result<Array2<f64>> {
    let m = net.output_width();
    let xb = Array2::from_shape_fn((m, x.len()), |(_, j)| x[j]);
    let mut rng = stage_rng(0, "jacobian");
    let (_, cache) = net.forward(&xb, nn::Mode::Eval, &mut rng)?;
    let (_, dx) = net.backward(&cache, &Array2::eye(m), false)?;
    Ok(dx)
}

/// Scaled-space residual `‖f̂(x) − y‖₂` of each sample.
pub fn residuals(net: &Network, samples: &[LabeledSample]) -> Result<Vec<f64>> {
    let (si, so) = scalers(net)?;
    let pred = net.predict(&scaled_matrix(si, &feature_rows(samples))?)?;
    let truth = scaled_matrix(so, &chemistry_rows(samples))?;
    Ok((&pred - &truth)
        .rows()
        .into_iter()
        .map(|r| r.dot(&r).sqrt())
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurrogateReport {
    /// Metrics in canonical species order, in physical units.
    pub per_species: Vec<RegressionMetrics>,
    pub truth: Vec<[f64; N_SPECIES]>,
    pub predicted: Vec<[f64; N_SPECIES]>,
}

impl SurrogateReport {
    pub fn min_r2(&self) -> f64 {
        self.per_species.iter().map(|m| m.r2).fold(f64::INFINITY, f64::min)
    }

    pub fn metrics_tsv(&self) -> String {
        let mut s = String::from("species\tmse\tmae\tr2\n");
        for (sp, m) in SPECIES.iter().zip(&self.per_species) {
            let _ = writeln!(s, "{}\t{}\t{}\t{}", sp.tag(), format_float(m.mse), format_float(m.mae), format_float(m.r2));
        }
        s
    }

    /// One row per sample: `caf_true caf_pred chl_true ...`.
    pub fn pairs_tsv(&self) -> String {
        let header: Vec<String> = SPECIES_TAGS
            .iter()
            .flat_map(|t| [format!("{t}_true"), format!("{t}_pred")])
            .collect();
        let mut s = header.join("\t");
        s.push('\n');
        for (t, p) in self.truth.iter().zip(&self.predicted) {
            let cells: Vec<String> = (0..N_SPECIES)
                .flat_map(|i| [format_float(t[i]), format_float(p[i])])
                .collect();
            s.push_str(&cells.join("\t"));
            s.push('\n');
        }
        s
    }
}

pub fn eval_surrogate(net: &Network, samples: &[LabeledSample]) -> Result<SurrogateReport> {
    if samples.is_empty() {
        return Err(Error::Empty("surrogate evaluation on an empty split".into()));
    }
    let recipes: Vec<Recipe> = samples.iter().map(|s| s.recipe).collect();
    let predicted = predict(net, &recipes)?;
    let truth = chemistry_rows(samples);
    let per_species = (0..N_SPECIES)
        .map(|i| {
            let t: Vec<f64> = truth.iter().map(|r| r[i]).collect();
            let p: Vec<f64> = predicted.iter().map(|r| r[i]).collect();
            regression_metrics(&t, &p)
        })
        .collect::<Result<_>>()?;
    Ok(SurrogateReport {
        per_species,
        truth,
        predicted,
    })
}

/// Share of (granulometry, composition) cells in which the surrogate orders
/// caffeine at the hottest and coldest grid temperatures the same way as the
/// data does. Cells lacking either temperature are skipped.
pub fn caffeine_trend_agreement(net: &Network, ds: &Dataset) -> Result<f64> {
    let (t_lo, t_hi) = ds.samples.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| {
        (lo.min(s.recipe.temperature), hi.max(s.recipe.temperature))
    });
    let key = |r: &Recipe| (r.granulometry, r.fractions.map(f64::to_bits));
    let mut pairs = Vec::new();
    for cold in ds.samples.iter().filter(|s| s.recipe.temperature == t_lo) {
        if let Some(hot) = ds
            .samples
            .iter()
            .find(|s| s.recipe.temperature == t_hi && key(&s.recipe) == key(&cold.recipe))
        {
            pairs.push((cold, hot));
        }
    }
    if pairs.is_empty() {
        return Err(Error::Empty("no cells with both extreme temperatures".into()));
    }
    let recipes: Vec<Recipe> = pairs.iter().flat_map(|(c, h)| [c.recipe, h.recipe]).collect();
    let pred = predict(net, &recipes)?;
    let caf = crate::types::Species::Caffeine.index();
    let agree = pairs
        .iter()
        .enumerate()
        .filter(|(i, (c, h))| {
            let sim = h.chemistry.0[caf] >= c.chemistry.0[caf];
            let sur = pred[2 * i + 1][caf] >= pred[2 * i][caf];
            sim == sur
        })
        .count();
    Ok(agree as f64 / pairs.len() as f64)
}

/// Scaled features of a recipe under the surrogate's input scaler.
pub fn scale_recipe(net: &Network, recipe: &Recipe) -> Result<Array1<f64>> {
    let (si, _) = scalers(net)?;
    Ok(Array1::from(si.transform(&recipe.features())))
}
