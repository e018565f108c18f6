//! Paraboloid-surface factorization.
//!
//! Two dot products `a = U_i·V_j` and `b = W_i·P_j` place a cell at
//! `(a, b)` in the plane. The point is lifted onto the cone
//! `z = r · sqrt(a² + b²)` and its distance to the origin,
//! `d = sqrt((a² + b²)(1 + r²))`, is fit to the normalized rating `r`.
//!
//! Training uses the observed `r` inside the lift. At prediction time the
//! rating is unknown, so a cosine model trained first (stage one) supplies
//! `r̂ = clamp(cos(U'_i, V'_j), 0, 1)` and the prediction is `r_max · d(a, b, r̂)`.

use super::matrix::{dot, FactorMatrix};
use super::sgd::{init_rng, redraw_rng, run_epochs, SgdModel, SgdState};
use super::{fit_cosine_mf, FactorSet, ModelKind, ModelParams, Scorer, TrainedModel};
use crate::data::{Dataset, Interaction, TrainConfig};
use crate::error::{Error, Result};
use crate::metrics::Evaluator;
use crate::rng::derive_seed;

/// Distance from `(a, b, r·sqrt(a² + b²))` to the origin.
#[inline]
pub fn paramat_surface_distance(a: f64, b: f64, r: f64) -> f64 {
    ((a * a + b * b) * (1.0 + r * r)).sqrt()
}

/// `(r - d)²` for one cell.
pub fn paramat_loss(u: &[f64], v: &[f64], w: &[f64], p: &[f64], r: f64) -> f64 {
    let d = paramat_surface_distance(dot(u, v), dot(w, p), r);
    (r - d) * (r - d)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamatGradient {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub w: Vec<f64>,
    pub p: Vec<f64>,
}

/// Gradient of [`paramat_loss`]. With `d` floored at `eps`,
/// `dl/da = -2(r - d)(1 + r²) a / d` and likewise for `b`; the chain rule
/// through the dot products gives the row gradients.
pub fn paramat_gradient(
    u: &[f64],
    v: &[f64],
    w: &[f64],
    p: &[f64],
    r: f64,
    eps: f64,
) -> ParamatGradient {
    let (dl_da, dl_db) = outer_gradient(dot(u, v), dot(w, p), r, eps);
    ParamatGradient {
        u: v.iter().map(|x| dl_da * x).collect(),
        v: u.iter().map(|x| dl_da * x).collect(),
        w: p.iter().map(|x| dl_db * x).collect(),
        p: w.iter().map(|x| dl_db * x).collect(),
    }
}

#[inline]
fn outer_gradient(a: f64, b: f64, r: f64, eps: f64) -> (f64, f64) {
    let d = paramat_surface_distance(a, b, r);
    let coef = -2.0 * (r - d) * (1.0 + r * r) / d.max(eps);
    (coef * a, coef * b)
}

struct Paramat {
    state: SgdState,
    aux: TrainedModel,
    n_items: usize,
    scratch: [Vec<f64>; 4],
}

type RowsMut<'a> = (
    &'a mut FactorMatrix,
    &'a mut FactorMatrix,
    &'a mut FactorMatrix,
    &'a mut FactorMatrix,
);

fn rows_mut(f: &mut FactorSet) -> RowsMut<'_> {
    let w = f.user_aux.as_mut().expect("paramat factors carry W");
    let p = f.item_aux.as_mut().expect("paramat factors carry P");
    (&mut f.user, &mut f.item, w, p)
}

impl SgdModel for Paramat {
    fn step(&mut self, x: &Interaction, lr: f64) {
        let (eps, reg) = (
            self.state.config.grad_guard_eps,
            self.state.config.regularization,
        );
        let r = x.rating / self.state.scale.max;
        let f = self.state.factors_mut();
        let (um, vm, wm, pm) = rows_mut(f);
        let (i, j) = (x.user, x.item);
        {
            let (u, v, w, p) = (um.row(i), vm.row(j), wm.row(i), pm.row(j));
            let (dl_da, dl_db) = outer_gradient(dot(u, v), dot(w, p), r, eps);
            let [gu, gv, gw, gp] = &mut self.scratch;
            for k in 0..u.len() {
                gu[k] = dl_da * v[k] + 2.0 * reg * u[k];
                gv[k] = dl_da * u[k] + 2.0 * reg * v[k];
                gw[k] = dl_db * p[k] + 2.0 * reg * w[k];
                gp[k] = dl_db * w[k] + 2.0 * reg * p[k];
            }
        }
        let [gu, gv, gw, gp] = &self.scratch;
        for (row, g) in [
            (um.row_mut(i), gu),
            (vm.row_mut(j), gv),
            (wm.row_mut(i), gw),
            (pm.row_mut(j), gp),
        ] {
            for (x, gk) in row.iter_mut().zip(g) {
                *x -= lr * gk;
            }
        }
    }

    fn sample_loss(&self, x: &Interaction) -> f64 {
        let f = self.state.factors();
        let (w, p) = (f.user_aux.as_ref().unwrap(), f.item_aux.as_ref().unwrap());
        let r = x.rating / self.state.scale.max;
        paramat_loss(
            f.user.row(x.user),
            f.item.row(x.item),
            w.row(x.user),
            p.row(x.item),
            r,
        )
    }

    fn scorer(&self) -> Scorer<'_> {
        self.state.scorer(self.aux.factors(), self.n_items)
    }

    fn factors(&self) -> &FactorSet {
        self.state.factors()
    }
}

/// Two-stage fit: a cosine pre-model (kept in `aux`) and then SGD on the
/// surface-distance loss.
pub fn fit_paramat(
    train: &Dataset,
    config: &TrainConfig,
    eval: Option<&Evaluator>,
) -> Result<TrainedModel> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyDataset("training split is empty".into()));
    }
    let aux_config = TrainConfig {
        seed: derive_seed(config.seed, "paramat-aux"),
        ..config.clone()
    };
    let aux = fit_cosine_mf(train, &aux_config, None).map_err(|e| match e {
        Error::Divergence { epoch, loss, .. } => Error::Divergence {
            model: ModelKind::ParaMat.name().into(),
            stage: "stage 1 (cosine pre-model)",
            epoch,
            loss,
        },
        other => other,
    })?;

    let mut rng = init_rng(config);
    let (k, s, eps) = (config.latent_dim, config.init_scale, config.grad_guard_eps);
    let mut factors = FactorSet::new(
        FactorMatrix::random(train.n_users(), k, s, eps, &mut rng),
        FactorMatrix::random(train.n_items(), k, s, eps, &mut rng),
    );
    factors.user_aux = Some(FactorMatrix::random(train.n_users(), k, s, eps, &mut rng));
    factors.item_aux = Some(FactorMatrix::random(train.n_items(), k, s, eps, &mut rng));

    let mut model = Paramat {
        state: SgdState::new(
            ModelKind::ParaMat,
            factors,
            train,
            config,
            redraw_rng(config),
        ),
        aux,
        n_items: train.n_items(),
        scratch: std::array::from_fn(|_| vec![0.0; k]),
    };
    let trace = run_epochs(&mut model, train, config, eval, "stage 2 (surface fit)")?;
    let Paramat { state, aux, .. } = model;
    debug_assert!(matches!(state.params, ModelParams::Factors(_)));
    Ok(state.finish(trace, Some(aux), train))
}
