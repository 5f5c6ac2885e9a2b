//! Confidence ranks and the learned rank-embedding table.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;

/// Rank of every score: 0 for the highest, ties broken by the smaller index.
///
/// `out[i]` is the rank of `scores[i]`.
pub fn rank_indices(scores: &[f64]) -> Vec<usize> {
    let order = score_order(scores);
    let mut ranks = vec![0; scores.len()];
    for (rank, &i) in order.iter().enumerate() {
        ranks[i] = rank;
    }
    ranks
}

/// Indices sorted by descending score, index ascending among ties.
pub fn score_order(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order
}

/// Lookup table mapping a confidence rank to a learned vector. Ranks beyond the
/// table share its last row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankEmbedding {
    table: Matrix,
}

impl RankEmbedding {
    pub fn zeros(max_rank: usize, embed_dim: usize) -> Self {
        assert!(max_rank > 0 && embed_dim > 0, "empty rank embedding");
        Self {
            table: Matrix::zeros(max_rank, embed_dim),
        }
    }

    /// Uniform initialization on `[-0.05, 0.05]`.
    pub fn random(max_rank: usize, embed_dim: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut emb = Self::zeros(max_rank, embed_dim);
        for v in emb.table.as_mut_slice() {
            *v = rng.random_range(-0.05..=0.05);
        }
        emb
    }

    pub fn from_table(table: Matrix) -> Self {
        assert!(table.rows() > 0 && table.cols() > 0, "empty rank embedding");
        Self { table }
    }

    pub fn max_rank(&self) -> usize {
        self.table.rows()
    }

    pub fn embed_dim(&self) -> usize {
        self.table.cols()
    }

    /// Table row used for `rank`.
    #[inline]
    pub fn row_index(&self, rank: usize) -> usize {
        rank.min(self.max_rank() - 1)
    }

    pub fn embed(&self, rank: usize) -> &[f64] {
        self.table.row(self.row_index(rank))
    }

    pub fn table(&self) -> &Matrix {
        &self.table
    }

    pub fn table_mut(&mut self) -> &mut Matrix {
        &mut self.table
    }
}
