use super::{filter_backward, CandidateBatch, FilterConfig, FilterParams};
use crate::assignment::{Detection, LabelAssignment};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: FilterParams,
    /// Mean per-scene loss of every epoch, measured before each scene's update.
    pub loss_trace: Vec<f64>,
}

/// Fits the filter by plain gradient descent, one full-batch step per scene and
/// `cfg.epochs` passes over the dataset in order.
///
/// Each element pairs a candidate pool with its greedy-matching labels; the
/// labels carry the ranks fed to the rank embedding.
pub fn train_filter(
    dataset: &[(Vec<Detection>, LabelAssignment)],
    cfg: &FilterConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if dataset.iter().all(|(pool, _)| pool.is_empty()) {
        return Err(Error::EmptyDataset);
    }
    let mut batches = Vec::with_capacity(dataset.len());
    for (scene, (pool, labels)) in dataset.iter().enumerate() {
        if labels.len() != pool.len() {
            return Err(Error::DimensionMismatch {
                context: format!("training scene {scene} labels"),
                expected: format!("{} labels", pool.len()),
                found: format!("{} labels", labels.len()),
            });
        }
        if pool.is_empty() {
            continue;
        }
        let ranks: Vec<usize> = labels.records.iter().map(|r| r.rank).collect();
        batches.push((CandidateBatch::new(pool, &ranks), labels.targets()));
    }

    let mut params = FilterParams::init(cfg);
    let mut loss_trace = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        let mut total = 0.0;
        for (batch, targets) in &batches {
            let (loss, grad) = filter_backward(&params, batch, targets, cfg);
            total += loss;
            step(&mut params, &grad, cfg);
        }
        let mean = total / batches.len() as f64;
        if !mean.is_finite() {
            return Err(Error::Invariant(format!(
                "training diverged (mean loss {mean}); lower filter.learning_rate"
            )));
        }
        loss_trace.push(mean);
    }
    Ok(TrainOutcome { params, loss_trace })
}

fn step(params: &mut FilterParams, grad: &FilterParams, cfg: &FilterConfig) {
    let lr = cfg.learning_rate;
    for ((name, p), (_, g)) in params.tensors_mut().into_iter().zip(grad.tensors()) {
        if name == "rank_embedding" && !cfg.rank_feature {
            continue;
        }
        for (a, b) in p.iter_mut().zip(g) {
            *a -= lr * b;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assignment::{greedy_match, GreedyMatchConfig, GroundTruth};
    use crate::geometry::BoundingBox;
    use crate::ranking::rank_indices;

    fn small_cfg() -> FilterConfig {
        FilterConfig {
            d_model: 8,
            hidden: 8,
            embed_dim: 8,
            max_rank: 16,
            epochs: 500,
            learning_rate: 1.0,
            seed: 4,
            ..Default::default()
        }
    }

    fn separable_scene() -> (Vec<Detection>, LabelAssignment) {
        // two far-apart objects, each with one good and one poor candidate
        let gts = [
            GroundTruth::new(BoundingBox::new(0.2, 0.3, 0.2, 0.2), 0),
            GroundTruth::new(BoundingBox::new(0.75, 0.7, 0.2, 0.2), 1),
        ];
        let pool = vec![
            Detection::new(gts[0].bbox, 0.9, 0),
            Detection::new(BoundingBox::new(0.3, 0.3, 0.1, 0.1), 0.3, 0),
            Detection::new(gts[1].bbox, 0.8, 1),
            Detection::new(BoundingBox::new(0.85, 0.8, 0.1, 0.1), 0.2, 1),
        ];
        let scores: Vec<f64> = pool.iter().map(|d| d.score).collect();
        let labels = greedy_match(&pool, &gts, &rank_indices(&scores), &GreedyMatchConfig::default()).unwrap();
        assert_eq!(labels.kept_indices(), vec![0, 2]);
        (pool, labels)
    }

    #[test]
    fn converges_on_separable_scene() {
        let out = train_filter(&[separable_scene()], &small_cfg()).unwrap();
        let last = *out.loss_trace.last().unwrap();
        assert!(last < 0.01, "final loss {last}");
    }

    #[test]
    fn deterministic_given_seed() {
        let cfg = FilterConfig {
            epochs: 20,
            ..small_cfg()
        };
        let a = train_filter(&[separable_scene()], &cfg).unwrap();
        let b = train_filter(&[separable_scene()], &cfg).unwrap();
        assert_eq!(a.params, b.params);
        assert_eq!(
            a.loss_trace.iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
            b.loss_trace.iter().map(|x| x.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn frozen_rank_embedding_stays_zero() {
        let cfg = FilterConfig {
            epochs: 5,
            rank_feature: false,
            ..small_cfg()
        };
        let out = train_filter(&[separable_scene()], &cfg).unwrap();
        assert!(out.params.rank.table().as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn empty_dataset_rejected() {
        assert!(matches!(
            train_filter(&[], &small_cfg()),
            Err(Error::EmptyDataset)
        ));
        assert!(matches!(
            train_filter(&[(Vec::new(), LabelAssignment::default())], &small_cfg()),
            Err(Error::EmptyDataset)
        ));
    }
}
