//! Properties of the trained models.

mod common;

use common::{random_factor_set, small_dataset};
use parafair::data::{IdMap, IdMaps, Interaction};
use parafair::factorization::{
    classic_loss, colinearity_of_factors, cosine_loss, dot, fit_classic_mf_from,
    fit_cosine_mf_from, fit_linfac, fit_linfac_from, paramat_loss, random_unit_vector,
    FactorMatrix, FactorSet, ModelKind, Predictor, TrainedModel,
};
use parafair::ingest::generate_zipf_dataset;
use parafair::rng::seeded_rng;
use parafair::{predict, Dataset, TrainConfig};
use rand_distr::{Distribution, StandardNormal};

/// Learning rate small enough for epoch-end loss to decrease monotonically.
const MONOTONE_LR: f64 = 0.001;

fn zipf_data(seed: u64) -> Dataset {
    generate_zipf_dataset(60, 80, 1200, &[1.0, 2.0, 3.0, 4.0, 5.0], seed).unwrap()
}

fn config(seed: u64, epochs: usize) -> TrainConfig {
    TrainConfig {
        seed,
        epochs,
        ..TrainConfig::default()
    }
}

fn one_cell(rating: f64) -> Dataset {
    let maps = IdMaps {
        users: IdMap::identity(1),
        items: IdMap::identity(1),
    };
    let xs = vec![Interaction {
        user: 0,
        item: 0,
        rating,
    }];
    Dataset::new(xs, maps, 1.0, 5.0).unwrap()
}

fn max_violation(model: &TrainedModel) -> f64 {
    let f = model.factors().unwrap();
    let alpha = f.alpha.as_ref().unwrap();
    f.user
        .iter_rows()
        .chain(f.item.iter_rows())
        .map(|row| dot(alpha, row).abs())
        .fold(0.0, f64::max)
}

#[test]
fn linfac_rows_stay_on_the_hyperplane() {
    for seed in [1, 2, 3] {
        let model = fit_linfac(&zipf_data(seed), &config(seed, 5), None).unwrap();
        let v = max_violation(&model);
        assert!(v <= 1e-8, "seed {seed}: violation {v:e}");
    }
}

#[test]
fn linfac_in_two_dimensions_predicts_plus_or_minus_r_max() {
    let data = small_dataset(8, 8, 0.5, 4);
    let cfg = TrainConfig {
        latent_dim: 2,
        clamp_predictions: false,
        ..config(4, 3)
    };
    let init = random_factor_set(8, 8, 2, 9);
    let model = fit_linfac_from(&data, &cfg, None, init, vec![0.0, 1.0]).unwrap();
    for u in 0..8 {
        for i in 0..8 {
            let s = model.score(u, i);
            assert!((s.abs() - 5.0).abs() < 1e-9, "({u}, {i}) scored {s}");
        }
    }
}

fn random_orthogonal(k: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = seeded_rng(seed);
    let mut q: Vec<Vec<f64>> = Vec::new();
    while q.len() < k {
        let mut v: Vec<f64> = (0..k).map(|_| StandardNormal.sample(&mut rng)).collect();
        for b in &q {
            let d = dot(b, &v);
            for (x, y) in v.iter_mut().zip(b) {
                *x -= d * y;
            }
        }
        let n = dot(&v, &v).sqrt();
        if n > 1e-3 {
            q.push(v.iter().map(|x| x / n).collect());
        }
    }
    q
}

fn rotate(q: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    q.iter().map(|row| dot(row, v)).collect()
}

fn rotate_matrix(q: &[Vec<f64>], m: &FactorMatrix) -> FactorMatrix {
    FactorMatrix::from_rows(&m.iter_rows().map(|r| rotate(q, r)).collect::<Vec<_>>())
}

fn assert_same_losses(a: &TrainedModel, b: &TrainedModel) {
    let (la, lb) = (a.trace.losses(), b.trace.losses());
    assert!(!la.is_empty());
    assert_eq!(la.len(), lb.len());
    for (x, y) in la.iter().zip(&lb) {
        assert!((x - y).abs() <= 1e-9, "{x} vs {y}");
    }
}

#[test]
fn cosine_mf_loss_is_rotation_invariant() {
    let data = zipf_data(5);
    let cfg = config(5, 8);
    let init = random_factor_set(data.n_users(), data.n_items(), cfg.latent_dim, 17);
    let q = random_orthogonal(cfg.latent_dim, 3);
    let rotated = FactorSet::new(rotate_matrix(&q, &init.user), rotate_matrix(&q, &init.item));
    let a = fit_cosine_mf_from(&data, &cfg, None, init).unwrap();
    let b = fit_cosine_mf_from(&data, &cfg, None, rotated).unwrap();
    assert_same_losses(&a, &b);
}

#[test]
fn linfac_loss_is_rotation_invariant() {
    let data = zipf_data(6);
    let cfg = config(6, 8);
    let k = cfg.latent_dim;
    let init = random_factor_set(data.n_users(), data.n_items(), k, 18);
    let alpha = random_unit_vector(k, &mut seeded_rng(77));
    let q = random_orthogonal(k, 4);
    let rotated = FactorSet::new(rotate_matrix(&q, &init.user), rotate_matrix(&q, &init.item));
    let rotated_alpha = rotate(&q, &alpha);
    let a = fit_linfac_from(&data, &cfg, None, init, alpha).unwrap();
    let b = fit_linfac_from(&data, &cfg, None, rotated, rotated_alpha).unwrap();
    assert_same_losses(&a, &b);
}

/// Mean per-sample loss of a trained model over `data`, recomputed from
/// its factors with the public loss functions.
fn epoch_end_loss(model: &TrainedModel, data: &Dataset) -> f64 {
    let f = model.factors().unwrap();
    let r_max = model.scale.max;
    let eps = model.config.grad_guard_eps;
    let total: f64 = data
        .interactions()
        .iter()
        .map(|x| {
            let (u, v) = (f.user.row(x.user), f.item.row(x.item));
            match model.kind {
                ModelKind::ClassicMf => classic_loss(u, v, x.rating),
                ModelKind::CosineMf | ModelKind::LinFac => cosine_loss(u, v, x.rating / r_max, eps),
                ModelKind::ParaMat => {
                    let (w, p) = (f.user_aux.as_ref().unwrap(), f.item_aux.as_ref().unwrap());
                    paramat_loss(u, v, w.row(x.user), p.row(x.item), x.rating / r_max)
                }
                _ => unreachable!(),
            }
        })
        .sum();
    total / data.len() as f64
}

#[test]
fn small_learning_rate_gives_non_increasing_epoch_end_loss() {
    for kind in [
        ModelKind::ClassicMf,
        ModelKind::CosineMf,
        ModelKind::LinFac,
        ModelKind::ParaMat,
    ] {
        let mut good = 0;
        for seed in 0..5u64 {
            let data = zipf_data(100 + seed);
            let losses: Vec<f64> = (1..=5)
                .map(|epochs| {
                    let cfg = TrainConfig {
                        learning_rate: MONOTONE_LR,
                        ..config(seed, epochs)
                    };
                    epoch_end_loss(&kind.fit(&data, &cfg, None).unwrap(), &data)
                })
                .collect();
            if losses.windows(2).all(|w| w[1] <= w[0]) {
                good += 1;
            }
        }
        assert!(good >= 4, "{kind}: monotone on only {good}/5 seeds");
    }
}

#[test]
fn classic_single_step_matches_hand_update() {
    let (u, v, rating, lr) = ([0.7, -0.3], [0.4, 0.9], 4.0, 0.05);
    let cfg = TrainConfig {
        latent_dim: 2,
        learning_rate: lr,
        ..config(1, 1)
    };
    let init = FactorSet::new(
        FactorMatrix::from_rows(&[u.to_vec()]),
        FactorMatrix::from_rows(&[v.to_vec()]),
    );
    let model = fit_classic_mf_from(&one_cell(rating), &cfg, None, init).unwrap();
    let e = rating - dot(&u, &v);
    let f = model.factors().unwrap();
    for k in 0..2 {
        assert!((f.user.row(0)[k] - (u[k] + lr * 2.0 * e * v[k])).abs() < 1e-12);
        assert!((f.item.row(0)[k] - (v[k] + lr * 2.0 * e * u[k])).abs() < 1e-12);
    }
}

#[test]
fn classic_stationary_point_is_left_alone() {
    let cfg = TrainConfig {
        latent_dim: 2,
        ..config(1, 3)
    };
    let (u, v) = (vec![2.0, 0.0], vec![1.5, 7.0]);
    let init = FactorSet::new(
        FactorMatrix::from_rows(std::slice::from_ref(&u)),
        FactorMatrix::from_rows(std::slice::from_ref(&v)),
    );
    let model = fit_classic_mf_from(&one_cell(3.0), &cfg, None, init).unwrap();
    let f = model.factors().unwrap();
    assert_eq!(f.user.row(0), &u[..]);
    assert_eq!(f.item.row(0), &v[..]);
}

#[test]
fn cosine_single_step_matches_hand_update() {
    let cfg = TrainConfig {
        latent_dim: 2,
        learning_rate: 0.1,
        ..config(1, 1)
    };
    let init = FactorSet::new(
        FactorMatrix::from_rows(&[vec![1.0, 0.0]]),
        FactorMatrix::from_rows(&[vec![0.0, 1.0]]),
    );
    // r = 2.5 / 5 = 0.5, c = 0: gradient wrt U is -2(0.5)(V) = (0, -1)
    let model = fit_cosine_mf_from(&one_cell(2.5), &cfg, None, init).unwrap();
    let f = model.factors().unwrap();
    for (got, want) in f.user.row(0).iter().zip([1.0, 0.1]) {
        assert!((got - want).abs() < 1e-12);
    }
    for (got, want) in f.item.row(0).iter().zip([0.1, 1.0]) {
        assert!((got - want).abs() < 1e-12);
    }
}

#[test]
fn cosine_training_increases_colinearity() {
    let data = zipf_data(8);
    let cfg = config(8, 30);
    let trained = ModelKind::CosineMf.fit(&data, &cfg, None).unwrap();
    let f = trained.factors().unwrap();
    let untrained = random_factor_set(data.n_users(), data.n_items(), cfg.latent_dim, 8);
    let after = colinearity_of_factors(&f.user, &f.item, 0.95, 100_000, 1).unwrap();
    let before =
        colinearity_of_factors(&untrained.user, &untrained.item, 0.95, 100_000, 1).unwrap();
    assert!(
        after.fraction > before.fraction,
        "trained {} vs untrained {}",
        after.fraction,
        before.fraction
    );
}

#[test]
fn clamped_predictions_stay_in_range() {
    let data = zipf_data(9);
    for kind in ModelKind::ALL {
        let model = kind.fit(&data, &config(9, 5), None).unwrap();
        for u in 0..data.n_users() {
            for i in 0..data.n_items() {
                let p = predict(&model, u, i).unwrap();
                assert!((data.r_min()..=data.r_max()).contains(&p), "{kind}: {p}");
            }
        }
    }
}

#[test]
fn predict_rejects_out_of_range_indices() {
    let data = zipf_data(10);
    let model = ModelKind::CosineMf.fit(&data, &config(1, 1), None).unwrap();
    assert!(predict(&model, data.n_users(), 0).is_err());
    assert!(predict(&model, 0, data.n_items()).is_err());
}

#[test]
fn training_is_deterministic() {
    let data = zipf_data(11);
    for kind in ModelKind::ALL {
        let a = kind.fit(&data, &config(3, 4), None).unwrap();
        let b = kind.fit(&data, &config(3, 4), None).unwrap();
        assert_eq!(a, b, "{kind}");
    }
}

#[test]
fn zipf_placement_top_one_goes_to_most_popular_item() {
    let data = zipf_data(12);
    let model = ModelKind::ZipfPlacement
        .fit(&data, &config(1, 1), None)
        .unwrap();
    let counts = data.item_counts();
    let best = (0..counts.len())
        .max_by_key(|&i| (counts[i], std::cmp::Reverse(i)))
        .unwrap();
    let users: Vec<usize> = (0..data.n_users()).collect();
    let rec = parafair::metrics::recommendation_frequencies(&model, &data, &users, 1).unwrap();
    let top = rec.table.counts();
    let most = (0..top.len()).max_by_key(|&i| top[i]).unwrap();
    // users who already rated the rank-1 item get their next-best instead
    let seen = data
        .items_by_user()
        .iter()
        .filter(|items| items.contains(&best))
        .count();
    assert_eq!(most, best);
    assert_eq!(top[best] as usize, data.n_users() - seen);
}

#[test]
fn random_placement_mean_is_mid_scale() {
    let data = zipf_data(13);
    let model = ModelKind::RandomPlacement
        .fit(&data, &config(21, 1), None)
        .unwrap();
    let n = 100_000;
    let mean: f64 = (0..n).map(|c| model.score(c % 60, c / 60)).sum::<f64>() / n as f64;
    assert!((mean - 3.0).abs() < 0.02, "{mean}");
}
