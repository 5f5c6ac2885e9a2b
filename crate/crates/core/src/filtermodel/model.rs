use super::{feature_matrix, CandidateBatch, FilterConfig, FilterParams, PROB_CLAMP};
use crate::matrix::{dot, Matrix};

/// Intermediate activations of one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub x: Matrix,
    pub q: Matrix,
    pub k: Matrix,
    pub v: Matrix,
    /// Row-softmaxed attention weights, `n x n`.
    pub attn: Matrix,
    pub z: Matrix,
    /// `x + z * wo`
    pub h: Matrix,
    /// `tanh(h * w1 + b1)`
    pub g: Matrix,
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn forward_cached(params: &FilterParams, x: Matrix) -> ForwardCache {
    let n = x.rows();
    let d = x.cols();
    let scale = 1.0 / (d as f64).sqrt();
    let q = x.matmul(&params.wq);
    let k = x.matmul(&params.wk);
    let v = x.matmul(&params.wv);
    let mut attn = q.matmul_t(&k);
    for i in 0..n {
        let row = attn.row_mut(i);
        let mut max = f64::NEG_INFINITY;
        for s in row.iter_mut() {
            *s *= scale;
            max = max.max(*s);
        }
        let mut sum = 0.0;
        for s in row.iter_mut() {
            *s = (*s - max).exp();
            sum += *s;
        }
        for s in row.iter_mut() {
            *s /= sum;
        }
    }
    let z = attn.matmul(&v);
    let mut h = z.matmul(&params.wo);
    h.add_assign(&x);
    let mut g = h.matmul(&params.w1);
    for i in 0..n {
        for (a, b) in g.row_mut(i).iter_mut().zip(&params.b1) {
            *a = (*a + b).tanh();
        }
    }
    let logits: Vec<f64> = (0..n).map(|i| dot(g.row(i), &params.w2) + params.b2).collect();
    let probs = logits.iter().map(|&l| sigmoid(l)).collect();
    ForwardCache {
        x,
        q,
        k,
        v,
        attn,
        z,
        h,
        g,
        logits,
        probs,
    }
}

/// Keep probabilities for an `n x d_model` feature matrix.
pub fn filter_forward(params: &FilterParams, features: &Matrix) -> Vec<f64> {
    forward_cached(params, features.clone()).probs
}

/// Featurizes a batch and returns its keep probabilities.
pub fn score_candidates(params: &FilterParams, batch: &CandidateBatch) -> Vec<f64> {
    if batch.is_empty() {
        return Vec::new();
    }
    forward_cached(params, feature_matrix(batch, params)).probs
}

/// Focal loss of a keep probability against a binary label.
pub fn focal_loss(p: f64, positive: bool, alpha: f64, gamma: f64) -> f64 {
    let p = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
    if positive {
        -alpha * (1.0 - p).powf(gamma) * p.ln()
    } else {
        -(1.0 - alpha) * p.powf(gamma) * (1.0 - p).ln()
    }
}

/// Derivative of [`focal_loss`] with respect to the logit behind `p`.
pub fn focal_loss_grad_logit(p: f64, positive: bool, alpha: f64, gamma: f64) -> f64 {
    if !(PROB_CLAMP..=1.0 - PROB_CLAMP).contains(&p) {
        return 0.0;
    }
    let q = 1.0 - p;
    if positive {
        alpha * (gamma * p * q.powf(gamma) * p.ln() - q.powf(gamma + 1.0))
    } else {
        (1.0 - alpha) * (p.powf(gamma + 1.0) - gamma * p.powf(gamma) * q * q.ln())
    }
}

/// Mean focal loss over a batch and its gradient with respect to every
/// parameter, including the input projection and the rank table.
pub fn filter_backward(
    params: &FilterParams,
    batch: &CandidateBatch,
    labels: &[f64],
    cfg: &FilterConfig,
) -> (f64, FilterParams) {
    assert_eq!(batch.len(), labels.len(), "one label per candidate");
    let mut grad = FilterParams::zeros(params.dims());
    let n = batch.len();
    if n == 0 {
        return (0.0, grad);
    }
    let cache = forward_cached(params, feature_matrix(batch, params));
    let d = cache.x.cols();
    let inv_n = 1.0 / n as f64;

    let mut loss = 0.0;
    let mut dlogit = vec![0.0; n];
    for i in 0..n {
        let positive = labels[i] > 0.5;
        loss += focal_loss(cache.probs[i], positive, cfg.alpha, cfg.gamma);
        dlogit[i] = focal_loss_grad_logit(cache.probs[i], positive, cfg.alpha, cfg.gamma) * inv_n;
    }
    loss *= inv_n;

    // head
    let hidden = params.b1.len();
    grad.b2 = dlogit.iter().sum();
    let mut dpre = Matrix::zeros(n, hidden);
    for i in 0..n {
        let g_row = cache.g.row(i);
        for (j, (&gij, &w2j)) in g_row.iter().zip(&params.w2).enumerate() {
            grad.w2[j] += gij * dlogit[i];
            dpre.set(i, j, dlogit[i] * w2j * (1.0 - gij * gij));
        }
    }
    for i in 0..n {
        for (b, &x) in grad.b1.iter_mut().zip(dpre.row(i)) {
            *b += x;
        }
    }
    grad.w1 = cache.h.t_matmul(&dpre);
    let dh = dpre.matmul_t(&params.w1);

    // residual + attention
    let mut dx = dh.clone();
    grad.wo = cache.z.t_matmul(&dh);
    let dz = dh.matmul_t(&params.wo);
    let da = dz.matmul_t(&cache.v);
    let dv = cache.attn.t_matmul(&dz);
    let scale = 1.0 / (d as f64).sqrt();
    let mut ds = Matrix::zeros(n, n);
    for i in 0..n {
        let a = cache.attn.row(i);
        let g = da.row(i);
        let inner = dot(a, g);
        for (o, (&aij, &gij)) in ds.row_mut(i).iter_mut().zip(a.iter().zip(g)) {
            *o = aij * (gij - inner) * scale;
        }
    }
    let dq = ds.matmul(&cache.k);
    let dk = ds.t_matmul(&cache.q);
    grad.wq = cache.x.t_matmul(&dq);
    grad.wk = cache.x.t_matmul(&dk);
    grad.wv = cache.x.t_matmul(&dv);
    dx.add_assign(&dq.matmul_t(&params.wq));
    dx.add_assign(&dk.matmul_t(&params.wk));
    dx.add_assign(&dv.matmul_t(&params.wv));

    // features
    grad.input_proj = batch.raw.t_matmul(&dx);
    let width = params.rank.embed_dim().min(d);
    for (i, &rank) in batch.ranks.iter().enumerate() {
        let row = params.rank.row_index(rank);
        let target = &mut grad.rank.table_mut().row_mut(row)[..width];
        for (t, &g) in target.iter_mut().zip(&dx.row(i)[..width]) {
            *t += g;
        }
    }
    (loss, grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assignment::Detection;
    use crate::filtermodel::{FilterDims, RAW_FEATURES};
    use crate::geometry::BoundingBox;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dims(d: usize, h: usize) -> FilterDims {
        FilterDims {
            d_model: d,
            hidden: h,
            embed_dim: d,
            max_rank: 10,
        }
    }

    #[test]
    fn zero_params_give_one_half() {
        let p = FilterParams::zeros(dims(4, 3));
        let x = Matrix::from_fn(5, 4, |i, j| (i * 4 + j) as f64 * 0.1);
        assert!(filter_forward(&p, &x).iter().all(|&v| v == 0.5));
    }

    #[test]
    fn single_candidate_hand_evaluation() {
        // d = 1, h = 1: attention over one element is the identity weight.
        let mut p = FilterParams::zeros(dims(1, 1));
        p.wq.set(0, 0, 0.3);
        p.wk.set(0, 0, -0.7);
        p.wv.set(0, 0, 2.0);
        p.wo.set(0, 0, 0.5);
        p.w1.set(0, 0, 1.5);
        p.b1[0] = -0.2;
        p.w2[0] = 3.0;
        p.b2 = 0.1;
        let x = 0.4;
        let h = x + 0.5 * (2.0 * x);
        let g = (1.5 * h - 0.2_f64).tanh();
        let expected = 1.0 / (1.0 + (-(3.0 * g + 0.1_f64)).exp());
        let got = filter_forward(&p, &Matrix::from_vec(1, 1, vec![x]))[0];
        assert!((got - expected).abs() < 1e-15, "{got} vs {expected}");
    }

    #[test]
    fn permutation_equivariance() {
        let cfg = FilterConfig {
            d_model: 6,
            hidden: 5,
            embed_dim: 6,
            max_rank: 10,
            seed: 3,
            ..Default::default()
        };
        let p = FilterParams::init(&cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = Matrix::from_fn(7, 6, |_, _| rng.random_range(-1.0..1.0));
        let perm = [3usize, 0, 6, 2, 5, 1, 4];
        let xp = Matrix::from_fn(7, 6, |i, j| x.get(perm[i], j));
        let a = filter_forward(&p, &x);
        let b = filter_forward(&p, &xp);
        for (i, &pi) in perm.iter().enumerate() {
            assert!((b[i] - a[pi]).abs() < 1e-12);
        }
    }

    #[test]
    fn focal_loss_values() {
        let l = focal_loss(0.5, true, 0.25, 2.0);
        assert!((l - 0.25 * 0.25 * std::f64::consts::LN_2).abs() < 1e-15);
        assert!((l - 0.043322).abs() < 1e-6);
        assert!(focal_loss(1.0 - 1e-9, true, 0.25, 2.0) < 1e-12);
        for p in [0.1, 0.4, 0.8] {
            let ce_pos = -(p as f64).ln();
            let ce_neg = -(1.0 - p as f64).ln();
            assert!((focal_loss(p, true, 0.5, 0.0) - 0.5 * ce_pos).abs() < 1e-15);
            assert!((focal_loss(p, false, 0.5, 0.0) - 0.5 * ce_neg).abs() < 1e-15);
        }
    }

    #[test]
    fn focal_loss_grad_matches_difference_quotient() {
        for &(z, positive, gamma) in &[(0.3, true, 2.0), (-1.2, false, 2.0), (2.0, false, 0.0), (-0.5, true, 1.5)] {
            let f = |z: f64| focal_loss(sigmoid(z), positive, 0.25, gamma);
            let h = 1e-6;
            let fd = (f(z + h) - f(z - h)) / (2.0 * h);
            let an = focal_loss_grad_logit(sigmoid(z), positive, 0.25, gamma);
            assert!((fd - an).abs() < 1e-8, "{fd} vs {an}");
        }
    }

    #[test]
    fn negatives_at_one_half_push_bias_up() {
        let p = FilterParams::zeros(dims(3, 2));
        let det = Detection::new(BoundingBox::new(0.5, 0.5, 0.1, 0.1), 0.5, 0);
        let batch = CandidateBatch::new(&[det; 4], &[0, 1, 2, 3]);
        let (loss, grad) = filter_backward(&p, &batch, &[0.0; 4], &FilterConfig::default());
        assert!(loss > 0.0);
        // positive gradient: descent lowers the logit
        assert!(grad.b2 > 0.0);
        let expected = focal_loss_grad_logit(0.5, false, 0.25, 2.0);
        assert!((grad.b2 - expected).abs() < 1e-15);
    }

    #[test]
    fn duplicated_batch_keeps_mean_gradient() {
        let cfg = FilterConfig {
            d_model: 4,
            hidden: 3,
            embed_dim: 4,
            max_rank: 8,
            seed: 1,
            ..Default::default()
        };
        let p = FilterParams::init(&cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let dets: Vec<Detection> = (0..3)
            .map(|_| {
                Detection::new(
                    BoundingBox::new(rng.random(), rng.random(), 0.1, 0.2),
                    rng.random(),
                    rng.random_range(0..3),
                )
            })
            .collect();
        // each candidate attends only to itself when the batch is split, so
        // compare single-candidate batches against their doubled version
        for d in &dets {
            let single = CandidateBatch::new(&[*d], &[2]);
            let double = CandidateBatch::new(&[*d, *d], &[2, 2]);
            let (l1, g1) = filter_backward(&p, &single, &[1.0], &cfg);
            let (l2, g2) = filter_backward(&p, &double, &[1.0, 1.0], &cfg);
            assert!((l1 - l2).abs() < 1e-14);
            for ((_, a), (_, b)) in g1.tensors().iter().zip(g2.tensors()) {
                for (x, y) in a.iter().zip(b) {
                    assert!((x - y).abs() < 1e-12);
                }
            }
        }
        assert_eq!(RAW_FEATURES, 14);
    }
}
