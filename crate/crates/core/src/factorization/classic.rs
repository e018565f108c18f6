//! Unnormalized matrix factorization on the raw rating scale.

use super::matrix::{dot, FactorMatrix};
use super::sgd::{check_shape, init_rng, redraw_rng, run_epochs, SgdModel, SgdState};
use super::{FactorSet, ModelKind, Scorer, TrainedModel};
use crate::data::{Dataset, Interaction, TrainConfig};
use crate::error::{Error, Result};
use crate::metrics::Evaluator;

/// `(rating - u·v)²`
pub fn sample_loss(u: &[f64], v: &[f64], rating: f64) -> f64 {
    let e = rating - dot(u, v);
    e * e
}

/// Gradient of [`sample_loss`] with respect to `u` and `v`, before clipping.
pub fn sample_gradient(u: &[f64], v: &[f64], rating: f64) -> (Vec<f64>, Vec<f64>) {
    let e = rating - dot(u, v);
    let gu = v.iter().map(|vk| -2.0 * e * vk).collect();
    let gv = u.iter().map(|uk| -2.0 * e * uk).collect();
    (gu, gv)
}

struct ClassicMf {
    state: SgdState,
    n_items: usize,
    gu: Vec<f64>,
    gv: Vec<f64>,
}

impl SgdModel for ClassicMf {
    fn step(&mut self, x: &Interaction, lr: f64) {
        let reg = self.state.config.regularization;
        let clip = self.state.config.grad_clip;
        let f = self.state.factors_mut();
        let (u, v) = (f.user.row(x.user), f.item.row(x.item));
        let e = x.rating - dot(u, v);
        let mut sq = 0.0;
        for k in 0..u.len() {
            self.gu[k] = -2.0 * e * v[k] + 2.0 * reg * u[k];
            self.gv[k] = -2.0 * e * u[k] + 2.0 * reg * v[k];
            sq += self.gu[k] * self.gu[k] + self.gv[k] * self.gv[k];
        }
        let norm = sq.sqrt();
        let mut rate = lr;
        if norm > clip {
            rate *= clip / norm;
            self.state.stats.clipped_steps += 1;
        }
        let f = self.state.factors_mut();
        for (uk, g) in f.user.row_mut(x.user).iter_mut().zip(&self.gu) {
            *uk -= rate * g;
        }
        for (vk, g) in f.item.row_mut(x.item).iter_mut().zip(&self.gv) {
            *vk -= rate * g;
        }
    }

    fn sample_loss(&self, x: &Interaction) -> f64 {
        let f = self.state.factors();
        sample_loss(f.user.row(x.user), f.item.row(x.item), x.rating)
    }

    fn scorer(&self) -> Scorer<'_> {
        self.state.scorer(None, self.n_items)
    }

    fn factors(&self) -> &FactorSet {
        self.state.factors()
    }
}

pub fn fit_classic_mf(
    train: &Dataset,
    config: &TrainConfig,
    eval: Option<&Evaluator>,
) -> Result<TrainedModel> {
    config.validate()?;
    let mut rng = init_rng(config);
    let (k, eps) = (config.latent_dim, config.grad_guard_eps);
    let user = FactorMatrix::random(train.n_users(), k, config.init_scale, eps, &mut rng);
    let item = FactorMatrix::random(train.n_items(), k, config.init_scale, eps, &mut rng);
    fit_classic_mf_from(train, config, eval, FactorSet::new(user, item))
}

/// Trains from caller-supplied initial factors.
pub fn fit_classic_mf_from(
    train: &Dataset,
    config: &TrainConfig,
    eval: Option<&Evaluator>,
    init: FactorSet,
) -> Result<TrainedModel> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyDataset("training split is empty".into()));
    }
    check_shape(&init, train, config)?;
    let k = config.latent_dim;
    let mut model = ClassicMf {
        state: SgdState::new(
            ModelKind::ClassicMf,
            init,
            train,
            config,
            redraw_rng(config),
        ),
        n_items: train.n_items(),
        gu: vec![0.0; k],
        gv: vec![0.0; k],
    };
    let trace = run_epochs(&mut model, train, config, eval, "training")?;
    Ok(model.state.finish(trace, None, train))
}
