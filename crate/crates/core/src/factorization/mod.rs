//! The recommender models and their shared prediction interface.
//!
//! | kind | prediction |
//! |------|------------|
//! | `classic-mf` | `U_i · V_j` on the raw scale |
//! | `cosine-mf` | `r_max · cos(U_i, V_j)` |
//! | `linfac` | as `cosine-mf`, every row kept on the hyperplane `alpha · x = 0` |
//! | `paramat` | `r_max · sqrt((a² + b²)(1 + r̂²))`, `a = U_i·V_j`, `b = W_i·P_j`, `r̂` from an internal cosine model |
//! | `random` | seeded uniform draw on `[r_min, r_max]` per cell |
//! | `zipf-placement` | `r_min + (r_max - r_min) / popularity_rank(j)` |

mod classic;
mod cosine;
mod matrix;
mod paramat;
mod placement;
mod sgd;

use std::fmt;

use rand::Rng;

pub use classic::{
    fit_classic_mf, fit_classic_mf_from, sample_gradient as classic_gradient,
    sample_loss as classic_loss,
};
pub use cosine::{
    cosine_gradient, cosine_loss, fit_cosine_mf, fit_cosine_mf_from, fit_linfac, fit_linfac_from,
    project_onto_hyperplane, random_unit_vector,
};
pub use matrix::{dot, norm, FactorMatrix};
pub use paramat::{
    fit_paramat, paramat_gradient, paramat_loss, paramat_surface_distance, ParamatGradient,
};
pub use placement::{fit_random_placement, fit_zipf_placement};

use crate::analysis::EpochTrace;
use crate::data::{Dataset, RatingScale, TrainConfig};
use crate::error::{Error, Result};
use crate::metrics::Evaluator;
use crate::rng::seeded_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModelKind {
    ClassicMf,
    CosineMf,
    LinFac,
    ParaMat,
    RandomPlacement,
    ZipfPlacement,
}

impl ModelKind {
    pub const ALL: [ModelKind; 6] = [
        ModelKind::ClassicMf,
        ModelKind::CosineMf,
        ModelKind::LinFac,
        ModelKind::ParaMat,
        ModelKind::RandomPlacement,
        ModelKind::ZipfPlacement,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::ClassicMf => "classic-mf",
            ModelKind::CosineMf => "cosine-mf",
            ModelKind::LinFac => "linfac",
            ModelKind::ParaMat => "paramat",
            ModelKind::RandomPlacement => "random",
            ModelKind::ZipfPlacement => "zipf-placement",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }

    pub fn is_trainable(self) -> bool {
        !matches!(self, ModelKind::RandomPlacement | ModelKind::ZipfPlacement)
    }

    /// Trains this kind of model. `eval`, when given, fills the per-epoch
    /// MAE/DME curves.
    pub fn fit(
        self,
        train: &Dataset,
        config: &TrainConfig,
        eval: Option<&Evaluator>,
    ) -> Result<TrainedModel> {
        match self {
            ModelKind::ClassicMf => fit_classic_mf(train, config, eval),
            ModelKind::CosineMf => fit_cosine_mf(train, config, eval),
            ModelKind::LinFac => fit_linfac(train, config, eval),
            ModelKind::ParaMat => fit_paramat(train, config, eval),
            ModelKind::RandomPlacement => fit_random_placement(train, config, eval),
            ModelKind::ZipfPlacement => fit_zipf_placement(train, config, eval),
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Learned embeddings. `user_aux`/`item_aux` are ParaMat's second pair
/// (W, P); `alpha` is LinFac's hyperplane normal.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorSet {
    pub user: FactorMatrix,
    pub item: FactorMatrix,
    pub user_aux: Option<FactorMatrix>,
    pub item_aux: Option<FactorMatrix>,
    pub alpha: Option<Vec<f64>>,
}

impl FactorSet {
    pub fn new(user: FactorMatrix, item: FactorMatrix) -> Self {
        Self {
            user,
            item,
            user_aux: None,
            item_aux: None,
            alpha: None,
        }
    }

    pub fn latent_dim(&self) -> usize {
        self.user.cols()
    }

    pub fn is_finite(&self) -> bool {
        self.user.is_finite()
            && self.item.is_finite()
            && self.user_aux.as_ref().is_none_or(FactorMatrix::is_finite)
            && self.item_aux.as_ref().is_none_or(FactorMatrix::is_finite)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelParams {
    Factors(FactorSet),
    RandomPlacement {
        seed: u64,
    },
    /// 1-based popularity rank per item.
    ZipfPlacement {
        rank: Vec<usize>,
    },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TrainStats {
    /// Rows redrawn because their norm collapsed below the guard.
    pub reinitialized_rows: usize,
    /// ClassicMF steps whose gradient was clipped.
    pub clipped_steps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub kind: ModelKind,
    pub params: ModelParams,
    pub config: TrainConfig,
    pub trace: EpochTrace,
    /// ParaMat's stage-one cosine model.
    pub aux: Option<Box<TrainedModel>>,
    pub scale: RatingScale,
    pub n_users: usize,
    pub n_items: usize,
    pub stats: TrainStats,
}

impl TrainedModel {
    pub fn factors(&self) -> Option<&FactorSet> {
        match &self.params {
            ModelParams::Factors(f) => Some(f),
            _ => None,
        }
    }

    pub(crate) fn scorer(&self) -> Scorer<'_> {
        Scorer {
            kind: self.kind,
            params: &self.params,
            aux: self.aux.as_ref().and_then(|a| a.factors()),
            scale: self.scale,
            clamp: self.config.clamp_predictions,
            eps: self.config.grad_guard_eps,
            n_items: self.n_items,
        }
    }
}

/// Anything that can score `(user, item)` cells.
pub trait Predictor: Sync {
    /// Unclamped model output on the raw rating scale. Indices must be in
    /// range.
    fn score(&self, user: usize, item: usize) -> f64;

    fn scale(&self) -> RatingScale;

    fn clamps(&self) -> bool;

    fn n_items(&self) -> usize;

    fn rating(&self, user: usize, item: usize) -> f64 {
        let s = self.score(user, item);
        if self.clamps() {
            self.scale().clamp(s)
        } else {
            s
        }
    }
}

impl Predictor for TrainedModel {
    fn score(&self, user: usize, item: usize) -> f64 {
        self.scorer().score(user, item)
    }

    fn scale(&self) -> RatingScale {
        self.scale
    }

    fn clamps(&self) -> bool {
        self.config.clamp_predictions
    }

    fn n_items(&self) -> usize {
        self.n_items
    }
}

/// Borrowed view used both by finished models and mid-training evaluation.
#[derive(Clone, Copy)]
pub(crate) struct Scorer<'a> {
    pub kind: ModelKind,
    pub params: &'a ModelParams,
    pub aux: Option<&'a FactorSet>,
    pub scale: RatingScale,
    pub clamp: bool,
    pub eps: f64,
    pub n_items: usize,
}

impl Predictor for Scorer<'_> {
    fn score(&self, user: usize, item: usize) -> f64 {
        let (min, max) = (self.scale.min, self.scale.max);
        match (self.kind, self.params) {
            (_, ModelParams::RandomPlacement { seed }) => {
                placement::random_score(*seed, user, item, self.scale)
            }
            (_, ModelParams::ZipfPlacement { rank }) => min + (max - min) / rank[item] as f64,
            (ModelKind::ClassicMf, ModelParams::Factors(f)) => {
                dot(f.user.row(user), f.item.row(item))
            }
            (ModelKind::CosineMf | ModelKind::LinFac, ModelParams::Factors(f)) => {
                max * cosine_guarded(f.user.row(user), f.item.row(item), self.eps)
            }
            (ModelKind::ParaMat, ModelParams::Factors(f)) => {
                let a = dot(f.user.row(user), f.item.row(item));
                let b = match (&f.user_aux, &f.item_aux) {
                    (Some(w), Some(p)) => dot(w.row(user), p.row(item)),
                    _ => 0.0,
                };
                let r_hat = self.aux.map_or(0.0, |aux| {
                    cosine_guarded(aux.user.row(user), aux.item.row(item), self.eps).clamp(0.0, 1.0)
                });
                max * paramat_surface_distance(a, b, r_hat)
            }
            (kind, _) => unreachable!("{kind} has no factor parameters"),
        }
    }

    fn scale(&self) -> RatingScale {
        self.scale
    }

    fn clamps(&self) -> bool {
        self.clamp
    }

    fn n_items(&self) -> usize {
        self.n_items
    }
}

/// `u·v / (|u| |v|)`, clamped to `[-1, 1]`.
pub fn cosine_similarity(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::InvalidInput(format!(
            "length mismatch {} vs {}",
            u.len(),
            v.len()
        )));
    }
    let (nu, nv) = (norm(u), norm(v));
    for n in [nu, nv] {
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::DegenerateVector { norm: n });
        }
    }
    Ok((dot(u, v) / (nu * nv)).clamp(-1.0, 1.0))
}

#[inline]
pub(crate) fn cosine_guarded(u: &[f64], v: &[f64], eps: f64) -> f64 {
    let denom = (norm(u) * norm(v)).max(eps);
    (dot(u, v) / denom).clamp(-1.0, 1.0)
}

/// Checked prediction on the raw rating scale, clamped when the model's
/// config asks for it.
pub fn predict(model: &TrainedModel, user: usize, item: usize) -> Result<f64> {
    if user >= model.n_users {
        return Err(Error::Lookup {
            what: "user",
            index: user,
            size: model.n_users,
        });
    }
    if item >= model.n_items {
        return Err(Error::Lookup {
            what: "item",
            index: item,
            size: model.n_items,
        });
    }
    Ok(model.rating(user, item))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Colinearity {
    pub fraction: f64,
    /// Pairs actually compared.
    pub evaluated: usize,
    /// Pairs skipped because a row had zero norm.
    pub skipped: usize,
}

/// Default number of sampled pairs for [`colinearity_diagnostic`].
pub const COLINEARITY_PAIR_CAP: usize = 100_000;

/// Fraction of user/item pairs whose factor rows have
/// `|cos| >= threshold`. When there are more than `cap` pairs a seeded
/// uniform sample of `cap` pairs is used.
pub fn colinearity_diagnostic(
    model: &TrainedModel,
    threshold: f64,
    cap: usize,
    seed: u64,
) -> Result<Colinearity> {
    let f = model
        .factors()
        .ok_or_else(|| Error::InvalidInput(format!("{} has no factor rows", model.kind)))?;
    colinearity_of_factors(&f.user, &f.item, threshold, cap, seed)
}

pub fn colinearity_of_factors(
    users: &FactorMatrix,
    items: &FactorMatrix,
    threshold: f64,
    cap: usize,
    seed: u64,
) -> Result<Colinearity> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::InvalidInput(format!(
            "threshold {threshold} not in (0, 1)"
        )));
    }
    let total = users.rows() * items.rows();
    if total == 0 || cap == 0 {
        return Err(Error::InvalidInput("no pairs to examine".into()));
    }
    let pairs: Vec<usize> = if total <= cap {
        (0..total).collect()
    } else {
        let mut rng = seeded_rng(seed);
        (0..cap).map(|_| rng.random_range(0..total)).collect()
    };
    let (mut hits, mut evaluated, mut skipped) = (0usize, 0usize, 0usize);
    for cell in pairs {
        let (u, i) = (cell / items.rows(), cell % items.rows());
        match cosine_similarity(users.row(u), items.row(i)) {
            Ok(c) => {
                evaluated += 1;
                if c.abs() >= threshold {
                    hits += 1;
                }
            }
            Err(_) => skipped += 1,
        }
    }
    let fraction = if evaluated == 0 {
        0.0
    } else {
        hits as f64 / evaluated as f64
    };
    Ok(Colinearity {
        fraction,
        evaluated,
        skipped,
    })
}
