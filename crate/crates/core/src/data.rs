//! Ratings data, splits and training configuration.

use std::collections::HashSet;
use std::sync::Arc;

use indexmap::IndexSet;
use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng::seeded_rng;

/// One observed rating. Indices are dense and 0-based.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interaction {
    pub user: usize,
    pub item: usize,
    pub rating: f64,
}

/// Original-ID to dense-index mapping. The position of an ID in the set is
/// its dense index.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IdMap {
    ids: IndexSet<String>,
}

impl IdMap {
    pub fn new() -> Self {
        Self::default()
    }

    /// `0..n` mapped to themselves, used by generated datasets.
    pub fn identity(n: usize) -> Self {
        Self {
            ids: (0..n).map(|i| i.to_string()).collect(),
        }
    }

    /// Returns the dense index for `id`, allocating the next one if unseen.
    pub fn intern(&mut self, id: &str) -> usize {
        match self.ids.get_index_of(id) {
            Some(idx) => idx,
            None => self.ids.insert_full(id.to_owned()).0,
        }
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.ids.get_index_of(id)
    }

    pub fn original(&self, index: usize) -> Option<&str> {
        self.ids.get_index(index).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IdMaps {
    pub users: IdMap,
    pub items: IdMap,
}

/// Sparse rating matrix plus its rating scale.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    interactions: Vec<Interaction>,
    n_users: usize,
    n_items: usize,
    r_min: f64,
    r_max: f64,
    id_maps: Arc<IdMaps>,
}

impl Dataset {
    /// Builds a dataset, checking index bounds, the rating scale and
    /// uniqueness of `(user, item)` pairs.
    pub fn new(
        interactions: Vec<Interaction>,
        id_maps: IdMaps,
        r_min: f64,
        r_max: f64,
    ) -> Result<Self> {
        let n_users = id_maps.users.len();
        let n_items = id_maps.items.len();
        check_scale(r_min, r_max)?;
        let mut seen = HashSet::with_capacity(interactions.len());
        for x in &interactions {
            if x.user >= n_users || x.item >= n_items {
                return Err(Error::InvalidInput(format!(
                    "interaction ({}, {}) outside {n_users}x{n_items}",
                    x.user, x.item
                )));
            }
            if !x.rating.is_finite() || x.rating < r_min || x.rating > r_max {
                return Err(Error::InvalidInput(format!(
                    "rating {} outside [{r_min}, {r_max}]",
                    x.rating
                )));
            }
            if !seen.insert((x.user, x.item)) {
                return Err(Error::InvalidInput(format!(
                    "duplicate pair ({}, {})",
                    x.user, x.item
                )));
            }
        }
        Ok(Self {
            interactions,
            n_users,
            n_items,
            r_min,
            r_max,
            id_maps: Arc::new(id_maps),
        })
    }

    /// Builds a dataset whose scale is the observed rating range.
    pub fn from_observed(interactions: Vec<Interaction>, id_maps: IdMaps) -> Result<Self> {
        if interactions.is_empty() {
            return Err(Error::EmptyDataset("no interactions".into()));
        }
        let (lo, hi) = interactions
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
                (lo.min(x.rating), hi.max(x.rating))
            });
        Self::new(interactions, id_maps, lo, hi)
    }

    /// Same interactions on an explicit rating scale.
    pub fn with_scale(&self, r_min: f64, r_max: f64) -> Result<Self> {
        check_scale(r_min, r_max)?;
        if let Some(x) = self
            .interactions
            .iter()
            .find(|x| x.rating < r_min || x.rating > r_max)
        {
            return Err(Error::InvalidInput(format!(
                "rating {} outside overridden scale [{r_min}, {r_max}]",
                x.rating
            )));
        }
        Ok(Self {
            r_min,
            r_max,
            ..self.clone()
        })
    }

    fn sibling(&self, interactions: Vec<Interaction>) -> Self {
        Self {
            interactions,
            n_users: self.n_users,
            n_items: self.n_items,
            r_min: self.r_min,
            r_max: self.r_max,
            id_maps: Arc::clone(&self.id_maps),
        }
    }

    pub fn interactions(&self) -> &[Interaction] {
        &self.interactions
    }

    pub fn len(&self) -> usize {
        self.interactions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.interactions.is_empty()
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn r_min(&self) -> f64 {
        self.r_min
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn scale(&self) -> RatingScale {
        RatingScale {
            min: self.r_min,
            max: self.r_max,
        }
    }

    pub fn id_maps(&self) -> &IdMaps {
        &self.id_maps
    }

    /// Interaction count per item.
    pub fn item_counts(&self) -> Vec<u64> {
        let mut counts = vec![0u64; self.n_items];
        for x in &self.interactions {
            counts[x.item] += 1;
        }
        counts
    }

    /// Items rated by each user, ascending.
    pub fn items_by_user(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_users];
        for x in &self.interactions {
            out[x.user].push(x.item);
        }
        for items in &mut out {
            items.sort_unstable();
        }
        out
    }
}

fn check_scale(r_min: f64, r_max: f64) -> Result<()> {
    if !(r_min.is_finite() && r_max.is_finite() && r_max > 0.0 && r_max >= r_min && r_min >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "rating scale [{r_min}, {r_max}] must satisfy r_max > 0 and r_max >= r_min >= 0"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatingScale {
    pub min: f64,
    pub max: f64,
}

impl RatingScale {
    pub fn clamp(&self, r: f64) -> f64 {
        r.clamp(self.min, self.max)
    }
}

/// Maps a raw rating onto `[0, 1]` by dividing by the scale maximum.
pub fn normalize_rating(r: f64, dataset: &Dataset) -> Result<f64> {
    normalize_with_max(r, dataset.r_max())
}

pub(crate) fn normalize_with_max(r: f64, r_max: f64) -> Result<f64> {
    if !r.is_finite() {
        return Err(Error::InvalidInput(format!("rating {r} is not finite")));
    }
    if !(r_max.is_finite() && r_max > 0.0) {
        return Err(Error::InvalidInput(format!(
            "r_max {r_max} must be positive"
        )));
    }
    Ok(r / r_max)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub test_fraction: f64,
    pub seed: u64,
}

/// Uniform random hold-out split. Both halves keep the parent's order,
/// dimensions, scale and ID maps.
pub fn train_test_split(dataset: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset)> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset("cannot split an empty dataset".into()));
    }
    if !(spec.test_fraction > 0.0 && spec.test_fraction < 1.0) {
        return Err(Error::InvalidSplit(format!(
            "test_fraction {} not in (0, 1)",
            spec.test_fraction
        )));
    }
    let n = dataset.len();
    let n_test = (spec.test_fraction * n as f64).round() as usize;
    if n_test == 0 || n_test == n {
        return Err(Error::InvalidSplit(format!(
            "{n} interactions at test_fraction {} leaves an empty half",
            spec.test_fraction
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seeded_rng(spec.seed));
    let mut is_test = vec![false; n];
    for &i in &order[..n_test] {
        is_test[i] = true;
    }
    let (mut train, mut test) = (Vec::with_capacity(n - n_test), Vec::with_capacity(n_test));
    for (x, t) in dataset.interactions.iter().zip(is_test) {
        if t {
            test.push(*x);
        } else {
            train.push(*x);
        }
    }
    Ok((dataset.sibling(train), dataset.sibling(test)))
}

/// SGD hyperparameters shared by every trainable model.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub latent_dim: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    /// Half-width of the uniform initialization interval.
    pub init_scale: f64,
    /// Floor for every norm and denominator.
    pub grad_guard_eps: f64,
    pub clamp_predictions: bool,
    /// L2 weight. The published losses have no penalty, so this stays 0
    /// unless explicitly configured.
    pub regularization: f64,
    /// Per-sample gradient norm cap for the unnormalized model.
    pub grad_clip: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            latent_dim: 10,
            learning_rate: 0.01,
            epochs: 30,
            seed: 42,
            init_scale: 0.1,
            grad_guard_eps: 1e-12,
            clamp_predictions: true,
            regularization: 0.0,
            grad_clip: 10.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidInput(format!("train config: {what}")));
        if self.latent_dim < 1 {
            return bad("latent_dim must be >= 1");
        }
        if self.epochs < 1 {
            return bad("epochs must be >= 1");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning_rate must be finite and > 0");
        }
        if !(self.init_scale.is_finite() && self.init_scale > 0.0) {
            return bad("init_scale must be finite and > 0");
        }
        if !(self.grad_guard_eps.is_finite() && self.grad_guard_eps > 0.0) {
            return bad("grad_guard_eps must be finite and > 0");
        }
        if !(self.regularization.is_finite() && self.regularization >= 0.0) {
            return bad("regularization must be finite and >= 0");
        }
        if !(self.grad_clip.is_finite() && self.grad_clip > 0.0) {
            return bad("grad_clip must be finite and > 0");
        }
        Ok(())
    }
}
