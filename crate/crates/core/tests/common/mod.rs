//! Independent reference implementations used only by tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rankfilter::filtermodel::{filter_backward, CandidateBatch, FilterConfig, FilterParams};
use rankfilter::{BoundingBox, Detection, Matrix};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Minimum total over every injective map from the smaller side to the larger,
/// ties broken by the lexicographically smallest row-sorted pair list.
/// Totals are accumulated in row order.
pub fn brute_force_assignment(cost: &Matrix) -> (f64, Vec<(usize, usize)>) {
    let (rows, cols) = cost.shape();
    if rows == 0 || cols == 0 {
        return (0.0, Vec::new());
    }
    let mut best: Option<(f64, Vec<(usize, usize)>)> = None;
    let transpose = rows > cols;
    let (small, large) = if transpose { (cols, rows) } else { (rows, cols) };
    let mut choice = vec![0usize; small];
    let mut used = vec![false; large];
    fn rec(
        depth: usize,
        small: usize,
        large: usize,
        choice: &mut Vec<usize>,
        used: &mut Vec<bool>,
        visit: &mut dyn FnMut(&[usize]),
    ) {
        if depth == small {
            visit(choice);
            return;
        }
        for j in 0..large {
            if !used[j] {
                used[j] = true;
                choice[depth] = j;
                rec(depth + 1, small, large, choice, used, visit);
                used[j] = false;
            }
        }
    }
    let mut visit = |choice: &[usize]| {
        let mut pairs: Vec<(usize, usize)> = choice
            .iter()
            .enumerate()
            .map(|(s, &l)| if transpose { (l, s) } else { (s, l) })
            .collect();
        pairs.sort();
        let total: f64 = pairs.iter().map(|&(r, c)| cost.get(r, c)).sum();
        let better = match &best {
            None => true,
            Some((bt, bp)) => total < *bt || (total == *bt && pairs < *bp),
        };
        if better {
            best = Some((total, pairs));
        }
    };
    rec(0, small, large, &mut choice, &mut used, &mut visit);
    best.unwrap()
}

/// IoU estimated by counting the centers of a `grid x grid` lattice on the
/// unit square that fall inside each box.
pub fn raster_iou(a: &BoundingBox, b: &BoundingBox, grid: usize) -> f64 {
    let [ax1, ay1, ax2, ay2] = a.corners();
    let [bx1, by1, bx2, by2] = b.corners();
    let mut inter = 0u64;
    let mut union = 0u64;
    for i in 0..grid {
        let y = (i as f64 + 0.5) / grid as f64;
        let in_ay = y >= ay1 && y <= ay2;
        let in_by = y >= by1 && y <= by2;
        if !in_ay && !in_by {
            continue;
        }
        for j in 0..grid {
            let x = (j as f64 + 0.5) / grid as f64;
            let ina = in_ay && x >= ax1 && x <= ax2;
            let inb = in_by && x >= bx1 && x <= bx2;
            if ina && inb {
                inter += 1;
            }
            if ina || inb {
                union += 1;
            }
        }
    }
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// 101-point interpolated AP computed straight from the definition: at each
/// recall level take the best precision over every prefix reaching it.
pub fn ap_reference(flags: &[bool], n_gt: usize) -> f64 {
    if n_gt == 0 {
        return if flags.is_empty() { 1.0 } else { 0.0 };
    }
    let mut points = Vec::new();
    let mut tp = 0usize;
    for (i, &f) in flags.iter().enumerate() {
        tp += usize::from(f);
        points.push((tp as f64 / n_gt as f64, tp as f64 / (i + 1) as f64));
    }
    let mut sum = 0.0;
    for step in 0..=100 {
        let r = step as f64 / 100.0;
        let p = points
            .iter()
            .filter(|(rec, _)| *rec >= r)
            .map(|(_, p)| *p)
            .fold(0.0, f64::max);
        sum += p;
    }
    sum / 101.0
}

pub fn random_box(rng: &mut ChaCha8Rng) -> BoundingBox {
    let w = rng.random_range(0.02..0.4);
    let h = rng.random_range(0.02..0.4);
    BoundingBox::new(
        rng.random_range(w / 2.0..1.0 - w / 2.0),
        rng.random_range(h / 2.0..1.0 - h / 2.0),
        w,
        h,
    )
}

pub fn random_detection(rng: &mut ChaCha8Rng, categories: u32) -> Detection {
    Detection::new(random_box(rng), rng.random_range(0.0..1.0), rng.random_range(0..categories))
}

/// A random filter instance with every parameter non-zero, plus a batch and
/// labels. Ranks may exceed the table to exercise clamping.
pub fn random_filter_instance(
    seed: u64,
    n: usize,
    d: usize,
) -> (FilterParams, CandidateBatch, Vec<f64>, FilterConfig) {
    let mut r = rng(seed);
    let hidden = r.random_range(1..=d.max(2));
    let embed_dim = r.random_range(1..=d + 2);
    let max_rank = r.random_range(1..=n + 2);
    let cfg = FilterConfig {
        d_model: d,
        hidden,
        embed_dim,
        max_rank,
        seed,
        alpha: r.random_range(0.1..0.9),
        gamma: [0.0, 1.0, 2.0, 2.5][r.random_range(0..4)],
        ..Default::default()
    };
    let mut params = FilterParams::init(&cfg);
    for (_, t) in params.tensors_mut() {
        for v in t.iter_mut() {
            *v += r.random_range(-0.3..0.3);
        }
    }
    let dets: Vec<Detection> = (0..n).map(|_| random_detection(&mut r, 10)).collect();
    let ranks: Vec<usize> = (0..n).map(|_| r.random_range(0..n + 3)).collect();
    let labels: Vec<f64> = (0..n).map(|_| f64::from(r.random_bool(0.4) as u8)).collect();
    (params, CandidateBatch::new(&dets, &ranks), labels, cfg)
}

/// Largest relative deviation between analytic and central-difference
/// gradients over every parameter. Relative error uses
/// `|a - n| / max(|a|, |n|, floor)`.
pub fn gradient_check(
    params: &FilterParams,
    batch: &CandidateBatch,
    labels: &[f64],
    cfg: &FilterConfig,
    step: f64,
    floor: f64,
) -> (f64, String) {
    let (_, analytic) = filter_backward(params, batch, labels, cfg);
    let loss_at = |p: &FilterParams| filter_backward(p, batch, labels, cfg).0;
    let mut worst = (0.0f64, String::new());
    let mut probe = params.clone();
    let names: Vec<(&'static str, usize)> =
        params.tensors().iter().map(|(n, t)| (*n, t.len())).collect();
    let analytic_flat: Vec<Vec<f64>> = analytic.tensors().iter().map(|(_, t)| t.to_vec()).collect();
    for (ti, (name, len)) in names.iter().enumerate() {
        for k in 0..*len {
            let orig = probe.tensors()[ti].1[k];
            probe.tensors_mut()[ti].1[k] = orig + step;
            let up = loss_at(&probe);
            probe.tensors_mut()[ti].1[k] = orig - step;
            let down = loss_at(&probe);
            probe.tensors_mut()[ti].1[k] = orig;
            let numeric = (up - down) / (2.0 * step);
            let a = analytic_flat[ti][k];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(floor);
            if rel > worst.0 {
                worst = (rel, format!("{name}[{k}]: analytic {a:e}, numeric {numeric:e}"));
            }
        }
    }
    worst
}
