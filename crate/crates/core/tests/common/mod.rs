#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use parafair::data::{IdMap, IdMaps, Interaction};
use parafair::factorization::{FactorMatrix, FactorSet};
use parafair::ingest::{parse_ratings_file_head, SourceFormat};
use parafair::rng::seeded_rng;
use parafair::Dataset;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use statrs::distribution::{ChiSquared, ContinuousCDF};

pub mod oracle;

pub const ML1M_ENV: &str = "PARAFAIR_ML1M";

/// Location of MovieLens-1M `ratings.dat`, from `$PARAFAIR_ML1M`.
pub fn ml1m_path() -> Option<PathBuf> {
    std::env::var_os(ML1M_ENV)
        .map(PathBuf::from)
        .filter(|p| p.is_file())
}

pub fn require_ml1m() -> PathBuf {
    ml1m_path()
        .unwrap_or_else(|| panic!("MovieLens-1M ratings.dat not found; set {ML1M_ENV} to its path"))
}

pub fn load_ml1m_head(path: &Path, rows: Option<usize>) -> Dataset {
    parse_ratings_file_head(path, &SourceFormat::movielens_1m(), rows)
        .expect("ML-1M parses")
        .dataset
}

pub fn random_factors(rows: usize, k: usize, seed: u64) -> FactorMatrix {
    let mut rng = seeded_rng(seed);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let data: Vec<Vec<f64>> = (0..rows)
        .map(|_| (0..k).map(|_| normal.sample(&mut rng)).collect())
        .collect();
    FactorMatrix::from_rows(&data)
}

pub fn random_factor_set(users: usize, items: usize, k: usize, seed: u64) -> FactorSet {
    FactorSet::new(
        random_factors(users, k, seed),
        random_factors(items, k, seed ^ 0xABCD),
    )
}

/// Small dense-ish dataset with identity id maps and ratings in 1..=5.
pub fn small_dataset(n_users: usize, n_items: usize, density: f64, seed: u64) -> Dataset {
    let mut rng = seeded_rng(seed);
    let mut xs = Vec::new();
    for u in 0..n_users {
        for i in 0..n_items {
            if rng.random::<f64>() < density {
                xs.push(Interaction {
                    user: u,
                    item: i,
                    rating: rng.random_range(1..=5) as f64,
                });
            }
        }
    }
    let maps = IdMaps {
        users: IdMap::identity(n_users),
        items: IdMap::identity(n_items),
    };
    Dataset::new(xs, maps, 1.0, 5.0).unwrap()
}

/// Ratings file in the MovieLens-1M `user::item::rating::timestamp` layout
/// with the same broad shape: rows grouped by user, heavy-tailed item
/// popularity and user activity, integer ratings 1..5 driven by a low-rank
/// taste model plus per-item quality.
pub fn movielens_like_ratings(
    n_users: usize,
    n_items: usize,
    n_ratings: usize,
    seed: u64,
) -> String {
    let mut rng = seeded_rng(seed);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let k = 4;
    let user_f: Vec<Vec<f64>> = (0..n_users)
        .map(|_| (0..k).map(|_| normal.sample(&mut rng)).collect())
        .collect();
    let item_f: Vec<Vec<f64>> = (0..n_items)
        .map(|_| (0..k).map(|_| normal.sample(&mut rng)).collect())
        .collect();
    let quality: Vec<f64> = (0..n_items)
        .map(|_| 0.5 * normal.sample(&mut rng))
        .collect();
    // item popularity ~ rank^-0.9, user activity ~ rank^-0.6
    let item_w: Vec<f64> = (1..=n_items).map(|r| (r as f64).powf(-0.9)).collect();
    let user_w: Vec<f64> = (1..=n_users).map(|r| (r as f64).powf(-0.6)).collect();
    let user_total: f64 = user_w.iter().sum();
    let item_dist = rand::distr::weighted::WeightedIndex::new(&item_w).unwrap();

    let mut out = String::new();
    for u in 0..n_users {
        let want = ((user_w[u] / user_total) * n_ratings as f64)
            .round()
            .max(5.0) as usize;
        let want = want.min(n_items / 2);
        let mut seen = std::collections::BTreeSet::new();
        while seen.len() < want {
            seen.insert(item_dist.sample(&mut rng));
        }
        for &i in &seen {
            let taste: f64 = user_f[u]
                .iter()
                .zip(&item_f[i])
                .map(|(a, b)| a * b)
                .sum::<f64>();
            let raw = 3.6 + 0.45 * taste + quality[i] + 0.5 * normal.sample(&mut rng);
            let rating = raw.round().clamp(1.0, 5.0) as u8;
            writeln!(
                out,
                "{}::{}::{}::{}",
                u + 1,
                i + 1,
                rating,
                978_300_000 + u * 100 + i
            )
            .unwrap();
        }
    }
    out
}

pub const LEVELS: [f64; 5] = [1.0, 2.0, 3.0, 4.0, 5.0];

/// Pearson statistic and p-value of observed level counts against
/// weights proportional to the level.
pub fn level_chi_squared(ratings: &[f64]) -> (f64, f64) {
    let total: f64 = LEVELS.iter().sum();
    let n = ratings.len() as f64;
    let stat: f64 = LEVELS
        .iter()
        .map(|&l| {
            let observed = ratings.iter().filter(|&&r| r == l).count() as f64;
            let expected = n * l / total;
            (observed - expected).powi(2) / expected
        })
        .sum();
    let p = 1.0
        - ChiSquared::new((LEVELS.len() - 1) as f64)
            .unwrap()
            .cdf(stat);
    (stat, p)
}
