//! Model fitting: MAPE loss over labeled records, hand-rolled Adam on the
//! analytic gradients, and a finite-difference check of the whole backward
//! pass.
//!
//! Every retrain starts from fresh seeded initialization (no warm starts)
//! and refits the input normalization on its own training split, so a
//! weights version is a self-contained function of (records, config).

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::features::{micro_graph, zscore_fit, HeteroGraph, LabeledRecord};
use crate::sim::derive_seed;
use crate::vtwin::linalg::Matrix;
use crate::vtwin::{
    accumulate_gradients, forward, init_weights, ModelWeights, ParamSet,
};

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// Floor for the relative-error denominator: labels smaller than this are
/// clamped (and counted) instead of blowing the loss up.
pub const MAPE_DELTA: f64 = 1e-6;

/// Share of records held out for validation reporting. Validation never
/// influences the fit; it is logged so retrain quality is observable.
const VAL_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { lr: 0.001, epochs: 50, batch_size: 32, seed: 0 }
    }
}

/// Optimizer steps a [`train`] call over `records` examples will take:
/// minibatches per epoch after the validation split, times epochs. Callers
/// use this to equalize optimization effort across differently sized sets.
pub fn planned_steps(records: usize, cfg: &TrainConfig) -> usize {
    let val = (records as f64 * VAL_FRACTION) as usize;
    (records - val).div_ceil(cfg.batch_size.max(1)) * cfg.epochs
}

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("need at least {min} labeled examples, got {got}")]
    TooFewExamples { got: usize, min: usize },
    #[error("bad training config: {0}")]
    BadConfig(&'static str),
    #[error("training diverged in epoch {epoch}: non-finite loss")]
    Diverged { epoch: usize, weights: Box<ModelWeights> },
    #[error(transparent)]
    Model(#[from] crate::vtwin::ModelError),
    #[error(transparent)]
    Features(#[from] crate::features::FeatureError),
    #[error("{labels} labels vs {predictions} predictions")]
    LengthMismatch { labels: usize, predictions: usize },
    #[error("cannot evaluate an empty set")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mape {
    /// Mean absolute percentage error, in percent.
    pub value: f64,
    /// Labels whose magnitude hit the [`MAPE_DELTA`] floor.
    pub clamped: usize,
}

pub fn mape(labels: &[f64], predictions: &[f64]) -> Result<Mape, TrainError> {
    if labels.len() != predictions.len() {
        return Err(TrainError::LengthMismatch {
            labels: labels.len(),
            predictions: predictions.len(),
        });
    }
    if labels.is_empty() {
        return Err(TrainError::Empty);
    }
    let mut clamped = 0;
    let mut sum = 0.0;
    for (y, p) in labels.iter().zip(predictions) {
        let mut denom = y.abs();
        if denom < MAPE_DELTA {
            denom = MAPE_DELTA;
            clamped += 1;
        }
        sum += (y - p).abs() / denom;
    }
    Ok(Mape { value: 100.0 * sum / labels.len() as f64, clamped })
}

/// d(MAPE)/d(prediction) for one example in a batch of `batch` examples.
fn mape_grad(y: f64, p: f64, batch: f64) -> f64 {
    let denom = y.abs().max(MAPE_DELTA);
    let sign = if p > y {
        1.0
    } else if p < y {
        -1.0
    } else {
        0.0
    };
    100.0 * sign / denom / batch
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    /// Training MAPE per epoch as seen during the pass (parameters move
    /// between batches). Always `epochs` long.
    pub train_mape: Vec<f64>,
    /// Validation MAPE per epoch; empty when the split has no holdout row.
    pub val_mape: Vec<f64>,
    pub train_examples: usize,
    pub val_examples: usize,
    /// Records whose label magnitude is below [`MAPE_DELTA`].
    pub clamped_labels: usize,
}

struct Adam {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: u64,
}

impl Adam {
    fn new(shape_of: &ParamSet) -> Adam {
        let m: Vec<Vec<f64>> =
            shape_of.tensors().iter().map(|t| vec![0.0; t.len()]).collect();
        Adam { v: m.clone(), m, t: 0 }
    }

    fn step(&mut self, params: [&mut Matrix; 34], grads: &ParamSet, lr: f64) {
        self.t += 1;
        let bc1 = 1.0 - ADAM_BETA1.powi(self.t as i32);
        let bc2 = 1.0 - ADAM_BETA2.powi(self.t as i32);
        for (((p, g), m), v) in params
            .into_iter()
            .zip(grads.tensors())
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
        {
            let pd = p.data_mut();
            for (i, &gi) in g.data().iter().enumerate() {
                m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * gi;
                v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * gi * gi;
                let mhat = m[i] / bc1;
                let vhat = v[i] / bc2;
                pd[i] -= lr * mhat / (vhat.sqrt() + ADAM_EPS);
            }
        }
    }
}

const SHUFFLE_TAG: u64 = 0x7472_6169;

fn params_finite(w: &ModelWeights) -> bool {
    w.params.tensors().iter().all(|t| t.data().iter().all(|v| v.is_finite()))
}

/// Fits a fresh model on `records`: fresh seeded initialization, version
/// `base.version + 1`, normalization refitted on the 90% training split,
/// MAPE minimized with Adam over shuffled minibatches. With zero epochs the
/// result is the untouched initialization (plus fitted stats and the
/// version bump).
pub fn train(
    base: &ModelWeights,
    records: &[LabeledRecord],
    cfg: &TrainConfig,
) -> Result<(ModelWeights, TrainReport), TrainError> {
    if !cfg.lr.is_finite() || cfg.lr <= 0.0 {
        return Err(TrainError::BadConfig("learning rate must be positive"));
    }
    if cfg.batch_size == 0 {
        return Err(TrainError::BadConfig("batch size must be nonzero"));
    }
    let n = records.len();
    let val_count = (n as f64 * VAL_FRACTION) as usize;
    let train_count = n - val_count;
    if train_count < 2 {
        return Err(TrainError::TooFewExamples { got: n, min: 2 });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, SHUFFLE_TAG));
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng);
    let (val_idx, train_idx) = idx.split_at(val_count);
    let train_recs: Vec<LabeledRecord> =
        train_idx.iter().map(|&i| records[i].clone()).collect();

    let mut w = init_weights(cfg.seed, base.dims)?;
    w.version = base.version + 1;
    w.stats = zscore_fit(&train_recs)?;

    let graphs: Vec<HeteroGraph> = train_recs.iter().map(micro_graph).collect();
    let ys: Vec<f64> = train_recs.iter().map(|r| r.y).collect();
    let val_graphs: Vec<HeteroGraph> =
        val_idx.iter().map(|&i| micro_graph(&records[i])).collect();
    let val_ys: Vec<f64> = val_idx.iter().map(|&i| records[i].y).collect();
    let clamped_labels =
        records.iter().filter(|r| r.y.abs() < MAPE_DELTA).count();

    let mut adam = Adam::new(&w.params);
    let mut train_hist = Vec::with_capacity(cfg.epochs);
    let mut val_hist = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..train_count).collect();
    let mut last_finite = w.clone();

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let b = batch.len() as f64;
            let mut grads = ParamSet::zeros(&w.dims);
            let mut batch_loss = 0.0;
            for &i in batch {
                let (cache, yhat) = forward(&graphs[i], &w)?;
                let p = yhat[0];
                let denom = ys[i].abs().max(MAPE_DELTA);
                batch_loss += 100.0 * (ys[i] - p).abs() / denom;
                let d = [mape_grad(ys[i], p, b)];
                accumulate_gradients(&graphs[i], &w, &cache, &d, &mut grads);
            }
            batch_loss /= b;
            if !batch_loss.is_finite() {
                return Err(TrainError::Diverged {
                    epoch,
                    weights: Box::new(last_finite),
                });
            }
            last_finite.clone_from(&w);
            epoch_sum += batch_loss * b;
            adam.step(w.params.tensors_mut(), &grads, cfg.lr);
            // a non-finite loss is not the only way to blow up: NaN
            // activations pass through relu as zeros, which can keep the
            // loss finite while the parameters rot, so check them too
            if !params_finite(&w) {
                return Err(TrainError::Diverged {
                    epoch,
                    weights: Box::new(last_finite),
                });
            }
        }
        train_hist.push(epoch_sum / train_count as f64);
        if !val_ys.is_empty() {
            let mut preds = Vec::with_capacity(val_ys.len());
            for g in &val_graphs {
                preds.push(forward(g, &w)?.1[0]);
            }
            val_hist.push(mape(&val_ys, &preds)?.value);
        }
    }

    Ok((
        w,
        TrainReport {
            train_mape: train_hist,
            val_mape: val_hist,
            train_examples: train_count,
            val_examples: val_count,
            clamped_labels,
        },
    ))
}

#[derive(Debug, Clone, Copy)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    /// Flat canonical index of the worst parameter.
    pub worst_param: usize,
    pub checked: usize,
}

/// Relative-error denominator floor, per unit of loss. A central difference
/// (L(t+h) - L(t-h)) / 2h carries rounding noise of roughly eps * |L| / h,
/// so gradient components much smaller than that are below what the
/// quotient can resolve and their relative error is meaningless. Flooring
/// the denominator at 1e-6 * |L| keeps such components from failing the
/// check spuriously while staying orders of magnitude below any real
/// gradient: a formula bug shows up at the scale of the gradients
/// themselves, far above this.
const GRAD_CHECK_FLOOR_PER_LOSS: f64 = 1e-6;
const GRAD_CHECK_FLOOR: f64 = 1e-8;

/// Steps for [`gradient_check`], each parameter scored by the one that
/// agrees best. No single step serves every parameter: rounding noise in
/// the quotient shrinks as the step grows, while a kink from |.| or a ReLU
/// sitting inside the probed interval demands a smaller step to stay on one
/// side of it. Wherever the loss is locally smooth the quotient converges
/// to the true derivative as the step shrinks, so a backward-pass bug (a
/// bias that does not vanish with the step) fails every rung.
const GRAD_CHECK_STEPS: [f64; 3] = [1e-4, 1e-5, 1e-6];

fn mape_loss(
    graph: &HeteroGraph,
    w: &ModelWeights,
    labels: &[f64],
) -> Result<f64, TrainError> {
    let (_, yhat) = forward(graph, w)?;
    Ok(mape(labels, &yhat)?.value)
}

/// Analytic flat gradient at the current weights plus the relative-error
/// denominator floor for this evaluation point.
fn analytic_grad_and_floor(
    w: &ModelWeights,
    graph: &HeteroGraph,
    labels: &[f64],
) -> Result<(Vec<f64>, f64), TrainError> {
    let (cache, yhat) = forward(graph, w)?;
    if labels.len() != yhat.len() {
        return Err(TrainError::LengthMismatch {
            labels: labels.len(),
            predictions: yhat.len(),
        });
    }
    let b = labels.len() as f64;
    let d_yhat: Vec<f64> =
        labels.iter().zip(&yhat).map(|(&y, &p)| mape_grad(y, p, b)).collect();
    let mut grads = ParamSet::zeros(&w.dims);
    accumulate_gradients(graph, w, &cache, &d_yhat, &mut grads);
    let analytic: Vec<f64> =
        grads.tensors().iter().flat_map(|t| t.data().iter().copied()).collect();
    let loss = mape(labels, &yhat)?.value;
    Ok((analytic, GRAD_CHECK_FLOOR.max(GRAD_CHECK_FLOOR_PER_LOSS * loss.abs())))
}

fn central_diff(
    graph: &HeteroGraph,
    wp: &mut ModelWeights,
    labels: &[f64],
    idx: usize,
    theta: f64,
    h: f64,
) -> Result<f64, TrainError> {
    wp.set_param(idx, theta + h);
    let up = mape_loss(graph, wp, labels)?;
    wp.set_param(idx, theta - h);
    let down = mape_loss(graph, wp, labels)?;
    wp.set_param(idx, theta);
    Ok((up - down) / (2.0 * h))
}

/// Central-difference check of the analytic MAPE gradient at the given
/// flat parameter indices, with a single fixed step.
pub(crate) fn gradient_check_at(
    w: &ModelWeights,
    graph: &HeteroGraph,
    labels: &[f64],
    indices: &[usize],
    h: f64,
) -> Result<GradCheckReport, TrainError> {
    let (analytic, floor) = analytic_grad_and_floor(w, graph, labels)?;
    let mut wp = w.clone();
    let mut worst = 0.0f64;
    let mut worst_param = 0;
    for &idx in indices {
        let fd = central_diff(graph, &mut wp, labels, idx, w.get_param(idx), h)?;
        let a = analytic[idx];
        let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(floor);
        if rel > worst {
            worst = rel;
            worst_param = idx;
        }
    }
    Ok(GradCheckReport { max_rel_err: worst, worst_param, checked: indices.len() })
}

/// Finite-difference validation of the backward pass on `samples` randomly
/// chosen parameters. Each parameter is scored by the best-agreeing step of
/// [`GRAD_CHECK_STEPS`]; the largest such error is returned.
pub fn gradient_check(
    w: &ModelWeights,
    graph: &HeteroGraph,
    labels: &[f64],
    samples: usize,
    seed: u64,
) -> Result<GradCheckReport, TrainError> {
    let mut idx: Vec<usize> = (0..w.param_count()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    idx.shuffle(&mut rng);
    idx.truncate(samples.max(1));

    let (analytic, floor) = analytic_grad_and_floor(w, graph, labels)?;
    let mut wp = w.clone();
    let mut worst = 0.0f64;
    let mut worst_param = 0;
    for &i in &idx {
        let theta = w.get_param(i);
        let a = analytic[i];
        let mut best = f64::INFINITY;
        for &h in &GRAD_CHECK_STEPS {
            let fd = central_diff(graph, &mut wp, labels, i, theta, h)?;
            let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(floor);
            best = best.min(rel);
        }
        if best > worst {
            worst = best;
            worst_param = i;
        }
    }
    Ok(GradCheckReport { max_rel_err: worst, worst_param, checked: idx.len() })
}
