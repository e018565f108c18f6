//! Non-learned baselines: uniform random scores and popularity-rank scores.

use super::{ModelKind, ModelParams, TrainStats, TrainedModel};
use crate::analysis::EpochTrace;
use crate::data::{Dataset, RatingScale, TrainConfig};
use crate::error::{Error, Result};
use crate::metrics::Evaluator;
use crate::rng::{cell_uniform, derive_seed};

pub(crate) fn random_score(seed: u64, user: usize, item: usize, scale: RatingScale) -> f64 {
    scale.min + (scale.max - scale.min) * cell_uniform(seed, user as u64, item as u64)
}

/// Placements have nothing to train; the single evaluation is repeated so
/// the curves line up with the trained models.
fn constant_trace(model: &TrainedModel, eval: Option<&Evaluator>) -> EpochTrace {
    let (mae, dme) = eval.map_or((None, None), |e| e.epoch_point(model));
    let mut trace = EpochTrace::new(model.kind.name());
    for _ in 0..model.config.epochs {
        trace.push(None, mae, dme);
    }
    trace
}

fn placement(
    kind: ModelKind,
    params: ModelParams,
    train: &Dataset,
    config: &TrainConfig,
    eval: Option<&Evaluator>,
) -> TrainedModel {
    let mut model = TrainedModel {
        kind,
        params,
        config: config.clone(),
        trace: EpochTrace::new(kind.name()),
        aux: None,
        scale: train.scale(),
        n_users: train.n_users(),
        n_items: train.n_items(),
        stats: TrainStats::default(),
    };
    model.trace = constant_trace(&model, eval);
    model
}

/// Each cell gets its own uniform draw on `[r_min, r_max]`, derived by
/// hashing `(seed, user, item)`, so repeated queries agree.
pub fn fit_random_placement(
    train: &Dataset,
    config: &TrainConfig,
    eval: Option<&Evaluator>,
) -> Result<TrainedModel> {
    config.validate()?;
    let seed = derive_seed(config.seed, "random-placement");
    Ok(placement(
        ModelKind::RandomPlacement,
        ModelParams::RandomPlacement { seed },
        train,
        config,
        eval,
    ))
}

/// Scores item `j` as `r_min + (r_max - r_min) / rank(j)` where rank 1 is
/// the most-interacted item in `train` (ties by ascending index).
pub fn fit_zipf_placement(
    train: &Dataset,
    config: &TrainConfig,
    eval: Option<&Evaluator>,
) -> Result<TrainedModel> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyDataset("training split is empty".into()));
    }
    let counts = train.item_counts();
    let mut order: Vec<usize> = (0..counts.len()).collect();
    order.sort_by(|&a, &b| counts[b].cmp(&counts[a]).then(a.cmp(&b)));
    let mut rank = vec![0usize; counts.len()];
    for (pos, &item) in order.iter().enumerate() {
        rank[item] = pos + 1;
    }
    Ok(placement(
        ModelKind::ZipfPlacement,
        ModelParams::ZipfPlacement { rank },
        train,
        config,
        eval,
    ))
}
