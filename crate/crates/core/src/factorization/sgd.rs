use rand::seq::SliceRandom;

use super::{FactorSet, ModelKind, ModelParams, Scorer, TrainStats, TrainedModel};
use crate::analysis::EpochTrace;
use crate::data::{Dataset, Interaction, RatingScale, TrainConfig};
use crate::error::{Error, Result};
use crate::metrics::Evaluator;
use crate::rng::{derive_seed, seeded_rng, SeededRng};

/// Per-sample SGD over one parameter set.
pub(crate) trait SgdModel {
    fn step(&mut self, x: &Interaction, lr: f64);

    fn sample_loss(&self, x: &Interaction) -> f64;

    fn scorer(&self) -> Scorer<'_>;

    fn factors(&self) -> &FactorSet;
}

/// State every trainable model carries through SGD.
pub(crate) struct SgdState {
    pub kind: ModelKind,
    pub params: ModelParams,
    pub scale: RatingScale,
    pub config: TrainConfig,
    pub stats: TrainStats,
    /// Stream for row re-draws after initialization.
    pub rng: SeededRng,
}

impl SgdState {
    pub fn new(
        kind: ModelKind,
        factors: FactorSet,
        train: &Dataset,
        config: &TrainConfig,
        rng: SeededRng,
    ) -> Self {
        Self {
            kind,
            params: ModelParams::Factors(factors),
            scale: train.scale(),
            config: config.clone(),
            stats: TrainStats::default(),
            rng,
        }
    }

    pub fn factors(&self) -> &FactorSet {
        match &self.params {
            ModelParams::Factors(f) => f,
            _ => unreachable!("SGD state always holds factors"),
        }
    }

    pub fn factors_mut(&mut self) -> &mut FactorSet {
        match &mut self.params {
            ModelParams::Factors(f) => f,
            _ => unreachable!("SGD state always holds factors"),
        }
    }

    pub fn scorer<'a>(&'a self, aux: Option<&'a FactorSet>, n_items: usize) -> Scorer<'a> {
        Scorer {
            kind: self.kind,
            params: &self.params,
            aux,
            scale: self.scale,
            clamp: self.config.clamp_predictions,
            eps: self.config.grad_guard_eps,
            n_items,
        }
    }
}

impl SgdState {
    pub fn finish(
        self,
        trace: EpochTrace,
        aux: Option<TrainedModel>,
        train: &Dataset,
    ) -> TrainedModel {
        TrainedModel {
            kind: self.kind,
            params: self.params,
            config: self.config,
            trace,
            aux: aux.map(Box::new),
            scale: self.scale,
            n_users: train.n_users(),
            n_items: train.n_items(),
            stats: self.stats,
        }
    }
}

pub(crate) fn check_shape(f: &FactorSet, train: &Dataset, config: &TrainConfig) -> Result<()> {
    let ok =
        |m: &super::FactorMatrix, rows: usize| m.rows() == rows && m.cols() == config.latent_dim;
    if !ok(&f.user, train.n_users()) || !ok(&f.item, train.n_items()) {
        return Err(Error::InvalidInput(format!(
            "initial factors must be {}x{k} and {}x{k}",
            train.n_users(),
            train.n_items(),
            k = config.latent_dim
        )));
    }
    Ok(())
}

pub(crate) fn init_rng(config: &TrainConfig) -> SeededRng {
    seeded_rng(derive_seed(config.seed, "init"))
}

pub(crate) fn redraw_rng(config: &TrainConfig) -> SeededRng {
    seeded_rng(derive_seed(config.seed, "redraw"))
}

/// Runs `config.epochs` shuffled passes. After each pass the mean training
/// loss is recorded and, when `eval` is given, test MAE and DME.
pub(crate) fn run_epochs<M: SgdModel>(
    model: &mut M,
    train: &Dataset,
    config: &TrainConfig,
    eval: Option<&Evaluator>,
    stage: &'static str,
) -> Result<EpochTrace> {
    if train.is_empty() {
        return Err(Error::EmptyDataset("training split is empty".into()));
    }
    let label = model.scorer().kind.name();
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut rng = seeded_rng(derive_seed(config.seed, "visit-order"));
    let mut trace = EpochTrace::new(label);
    let data = train.interactions();
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        for &k in &order {
            model.step(&data[k], config.learning_rate);
        }
        let loss = full_loss(model, train);
        if !loss.is_finite() || !model.factors().is_finite() {
            return Err(Error::Divergence {
                model: label.to_owned(),
                stage,
                epoch,
                loss,
            });
        }
        let (mae, dme) = match eval {
            Some(e) => e.epoch_point(&model.scorer()),
            None => (None, None),
        };
        trace.push(Some(loss), mae, dme);
    }
    Ok(trace)
}

/// Mean per-sample loss over `data`.
pub(crate) fn full_loss<M: SgdModel>(model: &M, data: &Dataset) -> f64 {
    let sum: f64 = data
        .interactions()
        .iter()
        .map(|x| model.sample_loss(x))
        .sum();
    sum / data.len() as f64
}
