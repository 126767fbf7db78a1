//! Message-passing delay model over the flow-link hypergraph.
//!
//! Flows and links get embedded into fixed-width state vectors, exchange
//! messages for a fixed number of iterations (a GRU scans each flow's path;
//! links aggregate their flows' updated states with scaled dot-product
//! attention and fold the aggregate into their own GRU), and a readout head
//! maps final link states to non-negative per-link occupancies. A flow's
//! predicted mean delay is the sum of occupancy over capacity along its
//! path, with capacity taken in Mbit/s.
//!
//! Everything is hand-rolled f64: forward passes cache the intermediate
//! activations the analytic backward pass needs, and both are deterministic
//! for fixed inputs (attention neighborhoods are summed in a canonical
//! order, so relabeling flows permutes outputs bitwise).

pub(crate) mod linalg;

mod backward;
mod forward;
mod io;

pub(crate) use backward::accumulate_gradients;
pub use forward::{
    attention_weights, embed, link_occupancies, message_pass, predict_delay, EmbeddingState,
};
pub(crate) use forward::forward;
pub use io::{load_weights, save_weights, weights_from_bytes, weights_to_bytes, WeightsIoError};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::features::{FlowFeatures, LinkFeatures, ZScoreStats};
use linalg::Matrix;

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("invalid model dimensions: {0}")]
    BadDims(&'static str),
    #[error(transparent)]
    Graph(#[from] crate::features::FeatureError),
    #[error("embedding state does not match the graph and model dimensions")]
    StateMismatch,
}

/// Width and depth settings. The defaults are what every shipped scenario
/// uses; they are parameters mostly so tests can shrink the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelDims {
    /// Flow state width m.
    pub flow_dim: usize,
    /// Link state width n.
    pub link_dim: usize,
    /// Message-passing iterations K.
    pub iterations: usize,
    /// Hidden width of both embedding MLPs.
    pub embed_hidden: usize,
    pub readout_hidden1: usize,
    pub readout_hidden2: usize,
    /// Width of the attention query/key projections.
    pub attn_dim: usize,
}

impl Default for ModelDims {
    fn default() -> Self {
        ModelDims {
            flow_dim: 16,
            link_dim: 16,
            iterations: 12,
            embed_hidden: 32,
            readout_hidden1: 32,
            readout_hidden2: 16,
            attn_dim: 16,
        }
    }
}

impl ModelDims {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.flow_dim == 0
            || self.link_dim == 0
            || self.embed_hidden == 0
            || self.readout_hidden1 == 0
            || self.readout_hidden2 == 0
            || self.attn_dim == 0
        {
            return Err(ModelError::BadDims("all widths must be nonzero"));
        }
        Ok(())
    }
}

/// One-hidden-layer MLP (ReLU hidden, linear output).
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Mlp2 {
    pub w1: Matrix,
    pub b1: Matrix,
    pub w2: Matrix,
    pub b2: Matrix,
}

/// Two-hidden-layer MLP with a single output neuron (softplus applied by
/// the readout).
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Mlp3 {
    pub w1: Matrix,
    pub b1: Matrix,
    pub w2: Matrix,
    pub b2: Matrix,
    pub w3: Matrix,
    pub b3: Matrix,
}

/// Gated recurrent unit:
///   z = sigma(Wz x + Uz h + bz)
///   r = sigma(Wr x + Ur h + br)
///   c = tanh(Wh x + Uh (r*h) + bh)
///   h' = (1-z)*h + z*c
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct GruCell {
    pub wz: Matrix,
    pub uz: Matrix,
    pub bz: Matrix,
    pub wr: Matrix,
    pub ur: Matrix,
    pub br: Matrix,
    pub wh: Matrix,
    pub uh: Matrix,
    pub bh: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Attention {
    pub wq: Matrix,
    pub wk: Matrix,
}

/// Every trainable tensor, in the fixed canonical order used by
/// initialization, serialization, Adam state, and flat parameter indexing.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct ParamSet {
    pub flow_embed: Mlp2,
    pub link_embed: Mlp2,
    pub flow_gru: GruCell,
    pub link_gru: GruCell,
    pub attn: Attention,
    pub readout: Mlp3,
}

pub(crate) const TENSOR_COUNT: usize = 34;

fn mlp2_zeros(in_dim: usize, hidden: usize, out: usize) -> Mlp2 {
    Mlp2 {
        w1: Matrix::zeros(hidden, in_dim),
        b1: Matrix::zeros(hidden, 1),
        w2: Matrix::zeros(out, hidden),
        b2: Matrix::zeros(out, 1),
    }
}

fn gru_zeros(input: usize, hidden: usize) -> GruCell {
    GruCell {
        wz: Matrix::zeros(hidden, input),
        uz: Matrix::zeros(hidden, hidden),
        bz: Matrix::zeros(hidden, 1),
        wr: Matrix::zeros(hidden, input),
        ur: Matrix::zeros(hidden, hidden),
        br: Matrix::zeros(hidden, 1),
        wh: Matrix::zeros(hidden, input),
        uh: Matrix::zeros(hidden, hidden),
        bh: Matrix::zeros(hidden, 1),
    }
}

impl ParamSet {
    pub(crate) fn zeros(d: &ModelDims) -> ParamSet {
        ParamSet {
            flow_embed: mlp2_zeros(FlowFeatures::DIM, d.embed_hidden, d.flow_dim),
            link_embed: mlp2_zeros(LinkFeatures::DIM, d.embed_hidden, d.link_dim),
            flow_gru: gru_zeros(d.link_dim, d.flow_dim),
            link_gru: gru_zeros(d.flow_dim, d.link_dim),
            attn: Attention {
                wq: Matrix::zeros(d.attn_dim, d.link_dim),
                wk: Matrix::zeros(d.attn_dim, d.flow_dim),
            },
            readout: Mlp3 {
                w1: Matrix::zeros(d.readout_hidden1, d.link_dim),
                b1: Matrix::zeros(d.readout_hidden1, 1),
                w2: Matrix::zeros(d.readout_hidden2, d.readout_hidden1),
                b2: Matrix::zeros(d.readout_hidden2, 1),
                w3: Matrix::zeros(1, d.readout_hidden2),
                b3: Matrix::zeros(1, 1),
            },
        }
    }

    pub(crate) fn tensors(&self) -> [&Matrix; TENSOR_COUNT] {
        [
            &self.flow_embed.w1,
            &self.flow_embed.b1,
            &self.flow_embed.w2,
            &self.flow_embed.b2,
            &self.link_embed.w1,
            &self.link_embed.b1,
            &self.link_embed.w2,
            &self.link_embed.b2,
            &self.flow_gru.wz,
            &self.flow_gru.uz,
            &self.flow_gru.bz,
            &self.flow_gru.wr,
            &self.flow_gru.ur,
            &self.flow_gru.br,
            &self.flow_gru.wh,
            &self.flow_gru.uh,
            &self.flow_gru.bh,
            &self.link_gru.wz,
            &self.link_gru.uz,
            &self.link_gru.bz,
            &self.link_gru.wr,
            &self.link_gru.ur,
            &self.link_gru.br,
            &self.link_gru.wh,
            &self.link_gru.uh,
            &self.link_gru.bh,
            &self.attn.wq,
            &self.attn.wk,
            &self.readout.w1,
            &self.readout.b1,
            &self.readout.w2,
            &self.readout.b2,
            &self.readout.w3,
            &self.readout.b3,
        ]
    }

    pub(crate) fn tensors_mut(&mut self) -> [&mut Matrix; TENSOR_COUNT] {
        [
            &mut self.flow_embed.w1,
            &mut self.flow_embed.b1,
            &mut self.flow_embed.w2,
            &mut self.flow_embed.b2,
            &mut self.link_embed.w1,
            &mut self.link_embed.b1,
            &mut self.link_embed.w2,
            &mut self.link_embed.b2,
            &mut self.flow_gru.wz,
            &mut self.flow_gru.uz,
            &mut self.flow_gru.bz,
            &mut self.flow_gru.wr,
            &mut self.flow_gru.ur,
            &mut self.flow_gru.br,
            &mut self.flow_gru.wh,
            &mut self.flow_gru.uh,
            &mut self.flow_gru.bh,
            &mut self.link_gru.wz,
            &mut self.link_gru.uz,
            &mut self.link_gru.bz,
            &mut self.link_gru.wr,
            &mut self.link_gru.ur,
            &mut self.link_gru.br,
            &mut self.link_gru.wh,
            &mut self.link_gru.uh,
            &mut self.link_gru.bh,
            &mut self.attn.wq,
            &mut self.attn.wk,
            &mut self.readout.w1,
            &mut self.readout.b1,
            &mut self.readout.w2,
            &mut self.readout.b2,
            &mut self.readout.w3,
            &mut self.readout.b3,
        ]
    }

    pub(crate) fn param_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }
}

/// A complete, versioned model: trainable parameters plus the input
/// normalization statistics the parameters were fitted against.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelWeights {
    pub version: u64,
    pub dims: ModelDims,
    pub stats: ZScoreStats,
    pub(crate) params: ParamSet,
}

impl ModelWeights {
    pub fn param_count(&self) -> usize {
        self.params.param_count()
    }

    /// Flat parameter read in canonical tensor order (used by the
    /// finite-difference gradient check).
    pub fn get_param(&self, mut idx: usize) -> f64 {
        for t in self.params.tensors() {
            if idx < t.len() {
                return t.data()[idx];
            }
            idx -= t.len();
        }
        panic!("parameter index out of range");
    }

    pub fn set_param(&mut self, mut idx: usize, v: f64) {
        for t in self.params.tensors_mut() {
            if idx < t.len() {
                t.data_mut()[idx] = v;
                return;
            }
            idx -= t.len();
        }
        panic!("parameter index out of range");
    }
}

fn glorot(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    // fan_in = cols, fan_out = rows for every weight matrix in this model
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    let mut m = Matrix::zeros(rows, cols);
    for v in m.data_mut() {
        *v = rng.random_range(-limit..=limit);
    }
    m
}

/// Fresh Glorot-uniform weights (biases zero) drawn from a ChaCha8 stream
/// seeded with `seed`, filling tensors in canonical order so the result is
/// fully determined by (seed, dims). Version 0, identity normalization.
pub fn init_weights(seed: u64, dims: ModelDims) -> Result<ModelWeights, ModelError> {
    dims.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = ParamSet::zeros(&dims);
    // The zeros layout fixes every shape; overwrite the weight matrices
    // (everything that is not a column bias) with Glorot draws.
    let fill = |m: &mut Matrix, rng: &mut ChaCha8Rng| {
        *m = glorot(rng, m.rows(), m.cols());
    };
    fill(&mut params.flow_embed.w1, &mut rng);
    fill(&mut params.flow_embed.w2, &mut rng);
    fill(&mut params.link_embed.w1, &mut rng);
    fill(&mut params.link_embed.w2, &mut rng);
    for gru in [&mut params.flow_gru, &mut params.link_gru] {
        fill(&mut gru.wz, &mut rng);
        fill(&mut gru.uz, &mut rng);
        fill(&mut gru.wr, &mut rng);
        fill(&mut gru.ur, &mut rng);
        fill(&mut gru.wh, &mut rng);
        fill(&mut gru.uh, &mut rng);
    }
    fill(&mut params.attn.wq, &mut rng);
    fill(&mut params.attn.wk, &mut rng);
    fill(&mut params.readout.w1, &mut rng);
    fill(&mut params.readout.w2, &mut rng);
    fill(&mut params.readout.w3, &mut rng);
    Ok(ModelWeights {
        version: 0,
        dims,
        stats: ZScoreStats::identity(),
        params,
    })
}
