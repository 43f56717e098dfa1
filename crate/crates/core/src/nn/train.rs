use std::fmt::Write as _;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::layer::Mode;
use crate::nn::model::Network;
use crate::nn::optim::{Adam, EarlyStopping, PlateauScheduler};
use crate::nn::batch_size_rule;
use crate::rng::stage_rng;
use crate::tsv::format_float;

/// A training loss over network outputs. `inputs` is the batch fed to the
/// network, for objectives that need it (cycle consistency).
pub trait Objective {
    /// Batch loss and its gradient with respect to the outputs.
    fn loss_grad(&self, out: &Array2<f64>, targets: &Array2<f64>, inputs: &Array2<f64>) -> Result<(f64, Array2<f64>)>;

    fn loss(&self, out: &Array2<f64>, targets: &Array2<f64>, inputs: &Array2<f64>) -> Result<f64> {
        self.loss_grad(out, targets, inputs).map(|(l, _)| l)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainPolicy {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub plateau_patience: usize,
    pub plateau_factor: f64,
    pub early_patience: usize,
    pub min_delta: f64,
    pub max_epochs: usize,
    /// Fixed batch size; `None` applies [`batch_size_rule`] to the training set.
    pub batch_size: Option<usize>,
    pub seed: u64,
}

impl Default for TrainPolicy {
    fn default() -> Self {
        Self {
            lr: 5e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            plateau_patience: 150,
            plateau_factor: 0.98,
            early_patience: 300,
            min_delta: 1e-4,
            max_epochs: 5000,
            batch_size: None,
            seed: 0,
        }
    }
}

impl TrainPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0) {
            return Err(Error::invalid("lr", "must be positive"));
        }
        if !(self.plateau_factor > 0.0 && self.plateau_factor < 1.0) {
            return Err(Error::invalid("plateau_factor", "must lie in (0, 1)"));
        }
        if self.plateau_patience < 1 || self.early_patience < 1 {
            return Err(Error::invalid("patience", "must be at least 1"));
        }
        if self.max_epochs < 1 || self.batch_size == Some(0) {
            return Err(Error::invalid("max_epochs", "epochs and batch size must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub lr: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub stopped_early: bool,
}

impl History {
    pub fn to_tsv(&self) -> String {
        let mut s = String::from("epoch\ttrain_loss\tval_loss\tlr\n");
        for e in &self.epochs {
            let _ = writeln!(
                s,
                "{}\t{}\t{}\t{}",
                e.epoch,
                format_float(e.train_loss),
                format_float(e.val_loss),
                format_float(e.lr)
            );
        }
        s
    }
}

/// One forward/backward pass and its loss, without touching the parameters.
pub fn batch_gradient(
    net: &Network,
    x: &Array2<f64>,
    y: &Array2<f64>,
    obj: &dyn Objective,
    mode: Mode,
    rng: &mut crate::rng::Rng,
) -> Result<(f64, Vec<f64>, crate::nn::model::NetCache)> {
    let (out, cache) = net.forward(x, mode, rng)?;
    let (loss, dout) = obj.loss_grad(&out, y, x)?;
    let (grads, _) = net.backward(&cache, &dout, true)?;
    Ok((loss, grads.expect("requested"), cache))
}

/// Mini-batch Adam with plateau scheduling and early stopping on the
/// validation loss. The network ends up holding the best-validation weights.
pub fn train(
    net: &mut Network,
    train: (&Array2<f64>, &Array2<f64>),
    val: (&Array2<f64>, &Array2<f64>),
    policy: &TrainPolicy,
    obj: &dyn Objective,
) -> Result<History> {
    policy.validate()?;
    let (tx, ty) = train;
    let (vx, vy) = val;
    let n = tx.nrows();
    if n == 0 || vx.nrows() == 0 {
        return Err(Error::Empty("training and validation sets must be non-empty".into()));
    }
    if ty.nrows() != n || vy.nrows() != vx.nrows() {
        return Err(Error::invalid("targets", "row counts of inputs and targets differ"));
    }
    let batch = policy.batch_size.unwrap_or_else(|| batch_size_rule(n));
    let mut rng = stage_rng(policy.seed, "train");
    let mut adam = Adam::new(net.n_params(), policy.lr, policy.beta1, policy.beta2, policy.eps);
    let mut plateau = PlateauScheduler::new(policy.plateau_patience, policy.plateau_factor);
    let mut stopper = EarlyStopping::new(policy.early_patience, policy.min_delta);
    let mut order: Vec<usize> = (0..n).collect();
    let mut best = net.clone();
    let mut history = History {
        best_val_loss: f64::INFINITY,
        ..History::default()
    };
    for epoch in 1..=policy.max_epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(batch) {
            let bx = tx.select(Axis(0), chunk);
            let by = ty.select(Axis(0), chunk);
            let (loss, grads, cache) = batch_gradient(net, &bx, &by, obj, Mode::Train, &mut rng)?;
            if !loss.is_finite() || grads.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFiniteLoss { epoch });
            }
            net.commit(&cache);
            adam.step(net, &grads);
            total += loss * chunk.len() as f64;
        }
        let train_loss = total / n as f64;
        let val_out = net.predict(vx)?;
        let val_loss = obj.loss(&val_out, vy, vx)?;
        if !val_loss.is_finite() {
            return Err(Error::NonFiniteLoss { epoch });
        }
        history.epochs.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
            lr: adam.lr,
        });
        if val_loss < history.best_val_loss {
            history.best_val_loss = val_loss;
            history.best_epoch = epoch;
            best.clone_from(net);
        }
        adam.lr = plateau.observe(val_loss, adam.lr);
        if stopper.observe(val_loss) {
            history.stopped_early = true;
            break;
        }
    }
    let final_epoch = history.epochs.len();
    *net = best;
    net.meta.seed = policy.seed;
    net.meta.final_epoch = final_epoch;
    net.meta.best_epoch = history.best_epoch;
    net.meta.best_val_loss = history.best_val_loss;
    Ok(history)
}
