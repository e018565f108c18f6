//! Cosine-normalized factorization and its hyperplane-constrained variant.
//!
//! Both fit `r = R/r_max` with `cos(U_i, V_j)`. LinFac additionally keeps
//! every user and item row on `{x : alpha · x = 0}` for a fixed unit normal
//! `alpha`, projecting the touched rows after every step.

use rand::Rng;
use rand_distr::StandardNormal;

use super::matrix::{dot, norm, redraw_row, FactorMatrix};
use super::sgd::{check_shape, init_rng, redraw_rng, run_epochs, SgdModel, SgdState};
use super::{FactorSet, ModelKind, Scorer, TrainedModel};
use crate::data::{Dataset, Interaction, TrainConfig};
use crate::error::{Error, Result};
use crate::metrics::Evaluator;
use crate::rng::{derive_seed, seeded_rng, SeededRng};

const UNIT_TOLERANCE: f64 = 1e-12;

/// `(r - cos(u, v))²` with the norm product floored at `eps`.
pub fn cosine_loss(u: &[f64], v: &[f64], r: f64, eps: f64) -> f64 {
    let c = dot(u, v) / (norm(u) * norm(v)).max(eps);
    (r - c) * (r - c)
}

/// Gradient of [`cosine_loss`]:
/// `dc/du = v / (|u||v|) - c u / |u|²`, symmetric for `v`.
pub fn cosine_gradient(u: &[f64], v: &[f64], r: f64, eps: f64) -> (Vec<f64>, Vec<f64>) {
    let mut gu = vec![0.0; u.len()];
    let mut gv = vec![0.0; v.len()];
    cosine_gradient_into(u, v, r, eps, &mut gu, &mut gv);
    (gu, gv)
}

fn cosine_gradient_into(u: &[f64], v: &[f64], r: f64, eps: f64, gu: &mut [f64], gv: &mut [f64]) {
    let nu = norm(u).max(eps);
    let nv = norm(v).max(eps);
    let inv = 1.0 / (nu * nv);
    let c = dot(u, v) * inv;
    let outer = -2.0 * (r - c);
    let cu = c / (nu * nu);
    let cv = c / (nv * nv);
    for k in 0..u.len() {
        gu[k] = outer * (v[k] * inv - cu * u[k]);
        gv[k] = outer * (u[k] * inv - cv * v[k]);
    }
}

/// `v - (alpha·v) alpha`. `alpha` must be a unit vector.
pub fn project_onto_hyperplane(v: &[f64], alpha: &[f64]) -> Result<Vec<f64>> {
    check_unit(alpha)?;
    if v.len() != alpha.len() {
        return Err(Error::InvalidInput(format!(
            "length mismatch {} vs {}",
            v.len(),
            alpha.len()
        )));
    }
    let mut out = v.to_vec();
    project_in_place(&mut out, alpha);
    Ok(out)
}

fn check_unit(alpha: &[f64]) -> Result<()> {
    let n = norm(alpha);
    if n.is_nan() || (n - 1.0).abs() > UNIT_TOLERANCE {
        return Err(Error::InvalidInput(format!(
            "alpha has norm {n}, expected 1"
        )));
    }
    Ok(())
}

#[inline]
fn project_in_place(v: &mut [f64], alpha: &[f64]) {
    let d = dot(v, alpha);
    for (x, a) in v.iter_mut().zip(alpha) {
        *x -= d * a;
    }
}

/// Uniformly distributed direction in `R^k` (normalized Gaussian draw).
pub fn random_unit_vector(k: usize, rng: &mut SeededRng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..k)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        let n = norm(&v);
        if n > 1e-6 {
            let mut v: Vec<f64> = v.iter().map(|x| x / n).collect();
            // second pass pulls the norm to within an ulp of 1
            let n2 = norm(&v);
            v.iter_mut().for_each(|x| *x /= n2);
            return v;
        }
    }
}

struct CosineMf {
    state: SgdState,
    /// LinFac's hyperplane normal; `None` for plain cosine MF.
    alpha: Option<Vec<f64>>,
    n_items: usize,
    gu: Vec<f64>,
    gv: Vec<f64>,
}

impl CosineMf {
    /// Brings a row back to a usable state after an update or at init:
    /// onto the hyperplane for LinFac, and redrawn if it collapsed.
    fn settle_row(
        row: &mut [f64],
        alpha: Option<&[f64]>,
        scale: f64,
        eps: f64,
        rng: &mut SeededRng,
    ) -> bool {
        if let Some(a) = alpha {
            project_in_place(row, a);
        }
        if norm(row) >= eps {
            return false;
        }
        loop {
            redraw_row(row, scale, eps, rng);
            if let Some(a) = alpha {
                project_in_place(row, a);
            }
            if norm(row) >= eps {
                return true;
            }
        }
    }

    fn settle_all(&mut self) {
        let (scale, eps) = (
            self.state.config.init_scale,
            self.state.config.grad_guard_eps,
        );
        let alpha = self.alpha.clone();
        let mut redrawn = 0;
        let mut rng = std::mem::replace(&mut self.state.rng, seeded_rng(0));
        let f = self.state.factors_mut();
        for m in [&mut f.user, &mut f.item] {
            for r in 0..m.rows() {
                redrawn +=
                    Self::settle_row(m.row_mut(r), alpha.as_deref(), scale, eps, &mut rng) as usize;
            }
        }
        self.state.rng = rng;
        self.state.stats.reinitialized_rows += redrawn;
    }
}

impl SgdModel for CosineMf {
    fn step(&mut self, x: &Interaction, lr: f64) {
        let cfg = &self.state.config;
        let (eps, reg, scale) = (cfg.grad_guard_eps, cfg.regularization, cfg.init_scale);
        let r = x.rating / self.state.scale.max;
        {
            let f = self.state.factors();
            let (u, v) = (f.user.row(x.user), f.item.row(x.item));
            cosine_gradient_into(u, v, r, eps, &mut self.gu, &mut self.gv);
            if reg > 0.0 {
                for k in 0..u.len() {
                    self.gu[k] += 2.0 * reg * u[k];
                    self.gv[k] += 2.0 * reg * v[k];
                }
            }
        }
        let alpha = self.alpha.as_deref();
        let state = &mut self.state;
        let f = match &mut state.params {
            super::ModelParams::Factors(f) => f,
            _ => unreachable!(),
        };
        let mut redrawn = 0;
        let u = f.user.row_mut(x.user);
        for (uk, g) in u.iter_mut().zip(&self.gu) {
            *uk -= lr * g;
        }
        redrawn += Self::settle_row(u, alpha, scale, eps, &mut state.rng) as usize;
        let v = f.item.row_mut(x.item);
        for (vk, g) in v.iter_mut().zip(&self.gv) {
            *vk -= lr * g;
        }
        redrawn += Self::settle_row(v, alpha, scale, eps, &mut state.rng) as usize;
        state.stats.reinitialized_rows += redrawn;
    }

    fn sample_loss(&self, x: &Interaction) -> f64 {
        let f = self.state.factors();
        let r = x.rating / self.state.scale.max;
        cosine_loss(
            f.user.row(x.user),
            f.item.row(x.item),
            r,
            self.state.config.grad_guard_eps,
        )
    }

    fn scorer(&self) -> Scorer<'_> {
        self.state.scorer(None, self.n_items)
    }

    fn factors(&self) -> &FactorSet {
        self.state.factors()
    }
}

fn random_factors(train: &Dataset, config: &TrainConfig, rng: &mut SeededRng) -> FactorSet {
    let (k, eps) = (config.latent_dim, config.grad_guard_eps);
    let user = FactorMatrix::random(train.n_users(), k, config.init_scale, eps, rng);
    let item = FactorMatrix::random(train.n_items(), k, config.init_scale, eps, rng);
    FactorSet::new(user, item)
}

pub fn fit_cosine_mf(
    train: &Dataset,
    config: &TrainConfig,
    eval: Option<&Evaluator>,
) -> Result<TrainedModel> {
    config.validate()?;
    let init = random_factors(train, config, &mut init_rng(config));
    fit_cosine_mf_from(train, config, eval, init)
}

/// Trains cosine MF from caller-supplied initial factors.
pub fn fit_cosine_mf_from(
    train: &Dataset,
    config: &TrainConfig,
    eval: Option<&Evaluator>,
    init: FactorSet,
) -> Result<TrainedModel> {
    fit_cosine_family(ModelKind::CosineMf, train, config, eval, init, None)
}

pub fn fit_linfac(
    train: &Dataset,
    config: &TrainConfig,
    eval: Option<&Evaluator>,
) -> Result<TrainedModel> {
    config.validate()?;
    if config.latent_dim < 2 {
        return Err(Error::InvalidInput(
            "linfac needs latent_dim >= 2 (the constraint removes one dimension)".into(),
        ));
    }
    let init = random_factors(train, config, &mut init_rng(config));
    let alpha = random_unit_vector(
        config.latent_dim,
        &mut seeded_rng(derive_seed(config.seed, "alpha")),
    );
    fit_linfac_from(train, config, eval, init, alpha)
}

/// Trains LinFac from caller-supplied initial factors and hyperplane
/// normal. All rows are projected before the first step.
pub fn fit_linfac_from(
    train: &Dataset,
    config: &TrainConfig,
    eval: Option<&Evaluator>,
    init: FactorSet,
    alpha: Vec<f64>,
) -> Result<TrainedModel> {
    if config.latent_dim < 2 {
        return Err(Error::InvalidInput("linfac needs latent_dim >= 2".into()));
    }
    check_unit(&alpha)?;
    if alpha.len() != config.latent_dim {
        return Err(Error::InvalidInput(format!(
            "alpha has length {}, expected {}",
            alpha.len(),
            config.latent_dim
        )));
    }
    fit_cosine_family(ModelKind::LinFac, train, config, eval, init, Some(alpha))
}

fn fit_cosine_family(
    kind: ModelKind,
    train: &Dataset,
    config: &TrainConfig,
    eval: Option<&Evaluator>,
    init: FactorSet,
    alpha: Option<Vec<f64>>,
) -> Result<TrainedModel> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyDataset("training split is empty".into()));
    }
    check_shape(&init, train, config)?;
    let k = config.latent_dim;
    let mut model = CosineMf {
        state: SgdState::new(kind, init, train, config, redraw_rng(config)),
        alpha,
        n_items: train.n_items(),
        gu: vec![0.0; k],
        gv: vec![0.0; k],
    };
    model.settle_all();
    let trace = run_epochs(&mut model, train, config, eval, "training")?;
    let alpha = model.alpha.take();
    let mut out = model.state.finish(trace, None, train);
    if let super::ModelParams::Factors(f) = &mut out.params {
        f.alpha = alpha;
    }
    Ok(out)
}
