//! The learned query filter.
//!
//! Each candidate is turned into a `d_model` vector (projected box/score/category
//! features plus its rank embedding), the candidates attend to each other through
//! one single-head self-attention layer with a residual connection, and a small
//! feed-forward head maps every candidate to a keep probability. The filter is
//! supervised with focal loss against greedy-matching labels, and at inference
//! it only rescales scores: `final = score * keep_probability`.

mod checkpoint;
mod model;
mod train;

pub use checkpoint::{read_checkpoint, write_checkpoint, CHECKPOINT_MAGIC};
pub use model::{
    filter_backward, filter_forward, focal_loss, focal_loss_grad_logit, score_candidates,
    ForwardCache,
};
pub use train::{train_filter, TrainOutcome};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::assignment::Detection;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::ranking::RankEmbedding;

/// Categories with a dedicated one-hot slot; larger ids share an overflow slot.
pub const CATEGORY_SLOTS: usize = 8;
/// `[cx, cy, w, h, score]`, one-hot category, overflow slot.
pub const RAW_FEATURES: usize = 5 + CATEGORY_SLOTS + 1;

pub const PROB_CLAMP: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterConfig {
    pub conf_threshold: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    pub d_model: usize,
    pub hidden: usize,
    pub embed_dim: usize,
    pub max_rank: usize,
    /// When false the rank embedding is zero and never trained.
    pub rank_feature: bool,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            conf_threshold: 0.1,
            alpha: 0.25,
            gamma: 2.0,
            learning_rate: 0.5,
            epochs: 60,
            seed: 0,
            d_model: 32,
            hidden: 32,
            embed_dim: 32,
            max_rank: 300,
            rank_feature: true,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(0.0..=1.0).contains(&self.conf_threshold) {
            return bad(format!(
                "filter.conf_threshold must lie in [0, 1], got {}",
                self.conf_threshold
            ));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("filter.alpha must lie in (0, 1), got {}", self.alpha));
        }
        if self.gamma < 0.0 || !self.gamma.is_finite() {
            return bad(format!("filter.gamma must be >= 0, got {}", self.gamma));
        }
        if self.learning_rate <= 0.0 || !self.learning_rate.is_finite() {
            return bad(format!(
                "filter.learning_rate must be positive, got {}",
                self.learning_rate
            ));
        }
        if self.d_model == 0 || self.hidden == 0 || self.embed_dim == 0 || self.max_rank == 0 {
            return bad("filter dimensions must all be positive".into());
        }
        Ok(())
    }

    pub fn dims(&self) -> FilterDims {
        FilterDims {
            d_model: self.d_model,
            hidden: self.hidden,
            embed_dim: self.embed_dim,
            max_rank: self.max_rank,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FilterDims {
    pub d_model: usize,
    pub hidden: usize,
    pub embed_dim: usize,
    pub max_rank: usize,
}

impl std::fmt::Display for FilterDims {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "d_model={} hidden={} embed_dim={} max_rank={}",
            self.d_model, self.hidden, self.embed_dim, self.max_rank
        )
    }
}

/// Weights of the query filter. Also used as the gradient container.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterParams {
    /// `RAW_FEATURES x d_model`
    pub input_proj: Matrix,
    pub rank: RankEmbedding,
    pub wq: Matrix,
    pub wk: Matrix,
    pub wv: Matrix,
    pub wo: Matrix,
    /// `d_model x hidden`
    pub w1: Matrix,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

impl FilterParams {
    pub fn zeros(dims: FilterDims) -> Self {
        let d = dims.d_model;
        Self {
            input_proj: Matrix::zeros(RAW_FEATURES, d),
            rank: RankEmbedding::zeros(dims.max_rank, dims.embed_dim),
            wq: Matrix::zeros(d, d),
            wk: Matrix::zeros(d, d),
            wv: Matrix::zeros(d, d),
            wo: Matrix::zeros(d, d),
            w1: Matrix::zeros(d, dims.hidden),
            b1: vec![0.0; dims.hidden],
            w2: vec![0.0; dims.hidden],
            b2: 0.0,
        }
    }

    /// Seeded Glorot-uniform initialization; the rank table is uniform on
    /// `[-0.05, 0.05]`, or zero when the rank feature is disabled.
    pub fn init(cfg: &FilterConfig) -> Self {
        let dims = cfg.dims();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut p = Self::zeros(dims);
        let glorot = |m: &mut Matrix, rng: &mut ChaCha8Rng| {
            let limit = (6.0 / (m.rows() + m.cols()) as f64).sqrt();
            for v in m.as_mut_slice() {
                *v = rng.random_range(-limit..=limit);
            }
        };
        glorot(&mut p.input_proj, &mut rng);
        for m in [&mut p.wq, &mut p.wk, &mut p.wv, &mut p.wo, &mut p.w1] {
            glorot(m, &mut rng);
        }
        let limit = (6.0 / (dims.hidden + 1) as f64).sqrt();
        for v in &mut p.w2 {
            *v = rng.random_range(-limit..=limit);
        }
        if cfg.rank_feature {
            p.rank = RankEmbedding::random(dims.max_rank, dims.embed_dim, &mut rng);
        }
        p
    }

    pub fn dims(&self) -> FilterDims {
        FilterDims {
            d_model: self.wq.rows(),
            hidden: self.b1.len(),
            embed_dim: self.rank.embed_dim(),
            max_rank: self.rank.max_rank(),
        }
    }

    /// Checks that every tensor agrees with the model width and hidden size.
    pub fn check_consistent(&self) -> Result<()> {
        let dims = self.dims();
        let d = dims.d_model;
        let h = dims.hidden;
        let expect = [
            ("input_proj", self.input_proj.shape(), (RAW_FEATURES, d)),
            ("wq", self.wq.shape(), (d, d)),
            ("wk", self.wk.shape(), (d, d)),
            ("wv", self.wv.shape(), (d, d)),
            ("wo", self.wo.shape(), (d, d)),
            ("w1", self.w1.shape(), (d, h)),
            ("w2", (1, self.w2.len()), (1, h)),
        ];
        for (name, found, expected) in expect {
            if found != expected {
                return Err(Error::DimensionMismatch {
                    context: format!("filter tensor {name}"),
                    expected: format!("{}x{}", expected.0, expected.1),
                    found: format!("{}x{}", found.0, found.1),
                });
            }
        }
        if !self.all_finite() {
            return Err(Error::Invariant("filter parameters contain non-finite values".into()));
        }
        Ok(())
    }

    /// Fails with both shapes when the weights do not fit `cfg`.
    pub fn check_matches(&self, cfg: &FilterConfig) -> Result<()> {
        if self.dims() != cfg.dims() {
            return Err(Error::DimensionMismatch {
                context: "checkpoint vs filter config".into(),
                expected: cfg.dims().to_string(),
                found: self.dims().to_string(),
            });
        }
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|(_, v)| v.iter().all(|x| x.is_finite()))
    }

    /// Flat views of every tensor in a fixed order.
    pub fn tensors(&self) -> Vec<(&'static str, &[f64])> {
        vec![
            ("input_proj", self.input_proj.as_slice()),
            ("rank_embedding", self.rank.table().as_slice()),
            ("wq", self.wq.as_slice()),
            ("wk", self.wk.as_slice()),
            ("wv", self.wv.as_slice()),
            ("wo", self.wo.as_slice()),
            ("w1", self.w1.as_slice()),
            ("b1", &self.b1),
            ("w2", &self.w2),
            ("b2", std::slice::from_ref(&self.b2)),
        ]
    }

    pub fn tensors_mut(&mut self) -> Vec<(&'static str, &mut [f64])> {
        vec![
            ("input_proj", self.input_proj.as_mut_slice()),
            ("rank_embedding", self.rank.table_mut().as_mut_slice()),
            ("wq", self.wq.as_mut_slice()),
            ("wk", self.wk.as_mut_slice()),
            ("wv", self.wv.as_mut_slice()),
            ("wo", self.wo.as_mut_slice()),
            ("w1", self.w1.as_mut_slice()),
            ("b1", &mut self.b1),
            ("w2", &mut self.w2),
            ("b2", std::slice::from_mut(&mut self.b2)),
        ]
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|(_, v)| v.len()).sum()
    }
}

/// Unprojected candidate features: `[cx, cy, w, h, score, one-hot category]`.
pub fn raw_features(det: &Detection) -> [f64; RAW_FEATURES] {
    let mut f = [0.0; RAW_FEATURES];
    f[0] = det.bbox.cx;
    f[1] = det.bbox.cy;
    f[2] = det.bbox.w;
    f[3] = det.bbox.h;
    f[4] = det.score;
    let slot = (det.category as usize).min(CATEGORY_SLOTS);
    f[5 + slot] = 1.0;
    f
}

/// Raw features and ranks of a candidate pool.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateBatch {
    /// `n x RAW_FEATURES`
    pub raw: Matrix,
    pub ranks: Vec<usize>,
}

impl CandidateBatch {
    pub fn new(dets: &[Detection], ranks: &[usize]) -> Self {
        assert_eq!(dets.len(), ranks.len(), "one rank per detection");
        let mut raw = Matrix::zeros(dets.len(), RAW_FEATURES);
        for (i, d) in dets.iter().enumerate() {
            raw.row_mut(i).copy_from_slice(&raw_features(d));
        }
        Self {
            raw,
            ranks: ranks.to_vec(),
        }
    }

    pub fn len(&self) -> usize {
        self.ranks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranks.is_empty()
    }
}

/// Model-width feature of one candidate: projected raw features plus its rank
/// embedding, zero-padded or truncated to `d_model`.
pub fn featurize(det: &Detection, rank: usize, params: &FilterParams) -> Vec<f64> {
    let raw = raw_features(det);
    let d = params.input_proj.cols();
    let mut out = vec![0.0; d];
    for (k, &x) in raw.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        for (o, w) in out.iter_mut().zip(params.input_proj.row(k)) {
            *o += x * w;
        }
    }
    for (o, e) in out.iter_mut().zip(params.rank.embed(rank)) {
        *o += e;
    }
    out
}

/// `n x d_model` feature matrix of a batch.
pub fn feature_matrix(batch: &CandidateBatch, params: &FilterParams) -> Matrix {
    let mut x = batch.raw.matmul(&params.input_proj);
    for (i, &rank) in batch.ranks.iter().enumerate() {
        for (o, e) in x.row_mut(i).iter_mut().zip(params.rank.embed(rank)) {
            *o += e;
        }
    }
    x
}

/// Applies the score gap: each candidate's score is multiplied by its keep
/// probability and survives iff the product exceeds `conf_threshold`.
pub fn apply_score_gap(dets: &[Detection], keep_probs: &[f64], conf_threshold: f64) -> Vec<Detection> {
    assert_eq!(dets.len(), keep_probs.len(), "one probability per detection");
    dets.iter()
        .zip(keep_probs)
        .filter_map(|(d, &p)| {
            let score = d.score * p;
            (score > conf_threshold).then_some(Detection { score, ..*d })
        })
        .collect()
}

/// Runs the filter on a candidate pool and applies the score gap.
pub fn apply_filter(
    params: &FilterParams,
    pool: &[Detection],
    ranks: &[usize],
    cfg: &FilterConfig,
) -> Vec<Detection> {
    if pool.is_empty() {
        return Vec::new();
    }
    let probs = score_candidates(params, &CandidateBatch::new(pool, ranks));
    apply_score_gap(pool, &probs, cfg.conf_threshold)
}
