//! Finite-difference oracle for the per-sample gradients.

use super::random_factors;
use parafair::factorization::{
    classic_gradient, classic_loss, cosine_gradient, cosine_loss, paramat_gradient, paramat_loss,
    project_onto_hyperplane, random_unit_vector,
};
use parafair::rng::seeded_rng;
use rand::Rng;

pub const STEP: f64 = 1e-6;
pub const TOL: f64 = 1e-4;
pub const SEEDS: u64 = 25;
pub const N: usize = 3;
pub const K: usize = 4;
pub const EPS: f64 = 1e-12;

/// Central-difference gradient of `f` at `x`.
pub fn numeric_gradient(x: &[f64], f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|k| {
            probe[k] = x[k] + STEP;
            let up = f(&probe);
            probe[k] = x[k] - STEP;
            let down = f(&probe);
            probe[k] = x[k];
            (up - down) / (2.0 * STEP)
        })
        .collect()
}

/// `|a - b| / max(|a|, |b|)` in the Euclidean norm; 0 when both vanish.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    let scale = na.max(nb);
    if scale < 1e-12 {
        diff
    } else {
        diff / scale
    }
}

fn for_each_cell(mut check: impl FnMut(u64, usize, usize, f64)) {
    for seed in 0..SEEDS {
        let mut rng = seeded_rng(seed + 1000);
        for i in 0..N {
            for j in 0..N {
                let r: f64 = rng.random_range(0.0..=1.0);
                check(seed, i, j, r);
            }
        }
    }
}

pub fn classic_gradient_worst_error() -> f64 {
    let mut worst: f64 = 0.0;
    for_each_cell(|seed, i, j, r| {
        let (u, v) = (random_factors(N, K, seed), random_factors(N, K, seed + 77));
        let (u, v, rating) = (u.row(i), v.row(j), 1.0 + 4.0 * r);
        let (gu, gv) = classic_gradient(u, v, rating);
        worst = worst
            .max(relative_error(
                &gu,
                &numeric_gradient(u, |x| classic_loss(x, v, rating)),
            ))
            .max(relative_error(
                &gv,
                &numeric_gradient(v, |x| classic_loss(u, x, rating)),
            ));
    });
    worst
}

pub fn cosine_gradient_worst_error() -> f64 {
    let mut worst: f64 = 0.0;
    for_each_cell(|seed, i, j, r| {
        let (u, v) = (random_factors(N, K, seed), random_factors(N, K, seed + 77));
        let (u, v) = (u.row(i), v.row(j));
        let (gu, gv) = cosine_gradient(u, v, r, EPS);
        worst = worst
            .max(relative_error(
                &gu,
                &numeric_gradient(u, |x| cosine_loss(x, v, r, EPS)),
            ))
            .max(relative_error(
                &gv,
                &numeric_gradient(v, |x| cosine_loss(u, x, r, EPS)),
            ));
    });
    worst
}

/// LinFac moves only inside the hyperplane `alpha·x = 0`: the projected
/// analytic gradient must match the finite-difference gradient of the loss
/// restricted to the plane (taken in an orthonormal basis of it).
pub fn linfac_gradient_worst_error() -> f64 {
    let mut worst: f64 = 0.0;
    for_each_cell(|seed, i, j, r| {
        let alpha = random_unit_vector(K, &mut seeded_rng(seed + 500));
        let basis = plane_basis(&alpha);
        let (u, v) = (random_factors(N, K, seed), random_factors(N, K, seed + 77));
        let u = project_onto_hyperplane(u.row(i), &alpha).unwrap();
        let v = project_onto_hyperplane(v.row(j), &alpha).unwrap();
        let (gu, gv) = cosine_gradient(&u, &v, r, EPS);
        let (gu, gv) = (
            project_onto_hyperplane(&gu, &alpha).unwrap(),
            project_onto_hyperplane(&gv, &alpha).unwrap(),
        );
        let lift = |base: &[f64], c: &[f64]| -> Vec<f64> {
            let mut x = base.to_vec();
            for (b, ck) in basis.iter().zip(c) {
                for (xk, bk) in x.iter_mut().zip(b) {
                    *xk += ck * bk;
                }
            }
            x
        };
        let zero = vec![0.0; K - 1];
        let fd_u = numeric_gradient(&zero, |c| cosine_loss(&lift(&u, c), &v, r, EPS));
        let fd_v = numeric_gradient(&zero, |c| cosine_loss(&u, &lift(&v, c), r, EPS));
        let coords = |g: &[f64]| -> Vec<f64> {
            basis
                .iter()
                .map(|b| b.iter().zip(g).map(|(x, y)| x * y).sum())
                .collect()
        };
        worst = worst
            .max(relative_error(&coords(&gu), &fd_u))
            .max(relative_error(&coords(&gv), &fd_v));
    });
    worst
}

/// Orthonormal basis of the plane orthogonal to the unit vector `alpha`
/// (Gram-Schmidt over the coordinate axes).
fn plane_basis(alpha: &[f64]) -> Vec<Vec<f64>> {
    let k = alpha.len();
    let mut basis: Vec<Vec<f64>> = vec![alpha.to_vec()];
    for axis in 0..k {
        let mut e = vec![0.0; k];
        e[axis] = 1.0;
        for b in &basis {
            let d: f64 = b.iter().zip(&e).map(|(x, y)| x * y).sum();
            for (ek, bk) in e.iter_mut().zip(b) {
                *ek -= d * bk;
            }
        }
        let n = e.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-6 && basis.len() < k {
            basis.push(e.iter().map(|x| x / n).collect());
        }
    }
    basis.remove(0);
    assert_eq!(basis.len(), k - 1);
    basis
}

pub fn paramat_gradient_worst_error() -> f64 {
    let mut worst: f64 = 0.0;
    for_each_cell(|seed, i, j, r| {
        let u = random_factors(N, K, seed);
        let v = random_factors(N, K, seed + 77);
        let w = random_factors(N, K, seed + 151);
        let p = random_factors(N, K, seed + 233);
        let (u, v, w, p) = (u.row(i), v.row(j), w.row(i), p.row(j));
        let g = paramat_gradient(u, v, w, p, r, EPS);
        for (analytic, numeric) in [
            (&g.u, numeric_gradient(u, |x| paramat_loss(x, v, w, p, r))),
            (&g.v, numeric_gradient(v, |x| paramat_loss(u, x, w, p, r))),
            (&g.w, numeric_gradient(w, |x| paramat_loss(u, v, x, p, r))),
            (&g.p, numeric_gradient(p, |x| paramat_loss(u, v, w, x, r))),
        ] {
            worst = worst.max(relative_error(analytic, &numeric));
        }
    });
    worst
}
