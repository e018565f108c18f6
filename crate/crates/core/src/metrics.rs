//! Accuracy and popularity-concentration metrics.
//!
//! The Degree of Matthew Effect (DME) used here is the difference of two
//! fitted log-log rank/frequency slopes:
//!
//! ```text
//! DME = slope(historical item counts) - slope(top-N recommendation counts)
//! ```
//!
//! Slopes are negative for long-tailed distributions. A positive DME means
//! recommendations decay faster than historical consumption (more
//! concentrated on popular items); 0 is parity; lower is fairer.

use rayon::prelude::*;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::factorization::Predictor;

/// Mean absolute error on the raw rating scale.
pub fn mae(predictions: &[f64], actuals: &[f64]) -> Result<f64> {
    if predictions.len() != actuals.len() {
        return Err(Error::InvalidInput(format!(
            "{} predictions vs {} actuals",
            predictions.len(),
            actuals.len()
        )));
    }
    if predictions.is_empty() {
        return Err(Error::InvalidInput("mae of empty lists".into()));
    }
    if predictions.iter().chain(actuals).any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("mae inputs must be finite".into()));
    }
    let sum: f64 = predictions
        .iter()
        .zip(actuals)
        .map(|(p, a)| (p - a).abs())
        .sum();
    Ok(sum / predictions.len() as f64)
}

/// Per-item counts, indexed by dense item index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrequencyTable {
    counts: Vec<u64>,
    total: u64,
}

impl FrequencyTable {
    pub fn new(n_items: usize) -> Self {
        Self {
            counts: vec![0; n_items],
            total: 0,
        }
    }

    pub fn from_counts(counts: Vec<u64>) -> Self {
        let total = counts.iter().sum();
        Self { counts, total }
    }

    pub fn add(&mut self, item: usize, n: u64) {
        self.counts[item] += n;
        self.total += n;
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn positive_items(&self) -> usize {
        self.counts.iter().filter(|&&c| c > 0).count()
    }
}

/// Least-squares slope of `ln(value)` against `ln(rank)` after sorting the
/// positive values in descending order (stable, so equal values keep their
/// input order). Zeros are dropped.
pub fn powerlaw_slope(values: &[f64]) -> Result<f64> {
    let mut pos: Vec<f64> = values.iter().copied().filter(|v| *v > 0.0).collect();
    if pos.len() < 2 {
        return Err(Error::DegenerateDistribution(format!(
            "{} positive entries, need at least 2",
            pos.len()
        )));
    }
    if pos.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite frequency".into()));
    }
    pos.sort_by(|a, b| b.total_cmp(a));
    if pos[0] == pos[pos.len() - 1] {
        return Ok(0.0);
    }
    let n = pos.len() as f64;
    let xs: Vec<f64> = (1..=pos.len()).map(|r| (r as f64).ln()).collect();
    let ys: Vec<f64> = pos.iter().map(|v| v.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (x, y) in xs.iter().zip(&ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    Ok(sxy / sxx)
}

pub fn fit_powerlaw_slope(freq: &FrequencyTable) -> Result<f64> {
    let values: Vec<f64> = freq.counts.iter().map(|&c| c as f64).collect();
    powerlaw_slope(&values)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatthewEffect {
    /// `slope_hist - slope_rec`; `+inf` when every recommendation went to a
    /// single item.
    pub dme: f64,
    pub slope_hist: f64,
    pub slope_rec: Option<f64>,
    pub single_item_rec: bool,
}

pub fn matthew_effect(
    rec_freq: &FrequencyTable,
    hist_freq: &FrequencyTable,
) -> Result<MatthewEffect> {
    let slope_hist = fit_powerlaw_slope(hist_freq)?;
    if rec_freq.positive_items() == 1 {
        return Ok(MatthewEffect {
            dme: f64::INFINITY,
            slope_hist,
            slope_rec: None,
            single_item_rec: true,
        });
    }
    let slope_rec = fit_powerlaw_slope(rec_freq)?;
    Ok(MatthewEffect {
        dme: slope_hist - slope_rec,
        slope_hist,
        slope_rec: Some(slope_rec),
        single_item_rec: false,
    })
}

pub fn degree_of_matthew_effect(
    rec_freq: &FrequencyTable,
    hist_freq: &FrequencyTable,
) -> Result<f64> {
    matthew_effect(rec_freq, hist_freq).map(|m| m.dme)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecommendationCounts {
    pub table: FrequencyTable,
    /// Users that had fewer than `top_n` unseen items and contributed
    /// everything they had.
    pub short_users: usize,
}

/// Counts how often each item lands in a user's top-`top_n` list. Items the
/// user rated in `train` are excluded; ties go to the lower item index.
pub fn recommendation_frequencies<P: Predictor + ?Sized>(
    model: &P,
    train: &Dataset,
    users: &[usize],
    top_n: usize,
) -> Result<RecommendationCounts> {
    let seen = train.items_by_user();
    if let Some(&u) = users.iter().find(|&&u| u >= seen.len()) {
        return Err(Error::Lookup {
            what: "user",
            index: u,
            size: seen.len(),
        });
    }
    top_n_counts(model, &seen, users, train.n_items(), top_n)
}

fn top_n_counts<P: Predictor + ?Sized>(
    model: &P,
    seen: &[Vec<usize>],
    users: &[usize],
    n_items: usize,
    top_n: usize,
) -> Result<RecommendationCounts> {
    if top_n == 0 {
        return Err(Error::InvalidInput("top_n must be >= 1".into()));
    }
    if users.is_empty() {
        return Err(Error::InvalidInput("no users to recommend for".into()));
    }
    let (counts, short_users) = users
        .par_iter()
        .fold(
            || (vec![0u64; n_items], 0usize, Vec::with_capacity(n_items)),
            |(mut counts, mut short, mut buf), &u| {
                buf.clear();
                let excluded = &seen[u];
                let mut next = excluded.iter().peekable();
                for item in 0..n_items {
                    if next.peek() == Some(&&item) {
                        next.next();
                        continue;
                    }
                    buf.push((model.score(u, item), item));
                }
                let by_rank =
                    |a: &(f64, usize), b: &(f64, usize)| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1));
                if buf.len() > top_n {
                    buf.select_nth_unstable_by(top_n - 1, by_rank);
                    buf.truncate(top_n);
                } else if buf.len() < top_n {
                    short += 1;
                }
                for &(_, item) in buf.iter() {
                    counts[item] += 1;
                }
                (counts, short, buf)
            },
        )
        .map(|(c, s, _)| (c, s))
        .reduce(
            || (vec![0u64; n_items], 0usize),
            |(mut a, sa), (b, sb)| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                (a, sa + sb)
            },
        );
    Ok(RecommendationCounts {
        table: FrequencyTable::from_counts(counts),
        short_users,
    })
}

/// Final metrics for one model.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub model: String,
    pub mae: f64,
    pub dme: f64,
    pub slope_rec: Option<f64>,
    pub slope_hist: f64,
    pub top_n: usize,
    pub notes: Vec<String>,
}

/// Test-split evaluation: MAE over held-out ratings and DME of top-N lists
/// for every test user against training popularity.
#[derive(Debug, Clone)]
pub struct Evaluator {
    test: Vec<(usize, usize, f64)>,
    test_users: Vec<usize>,
    seen: Vec<Vec<usize>>,
    hist: FrequencyTable,
    n_items: usize,
    top_n: usize,
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub mae: f64,
    pub matthew: Result<MatthewEffect, String>,
    pub short_users: usize,
}

impl Evaluator {
    pub fn new(train: &Dataset, test: &Dataset, top_n: usize) -> Result<Self> {
        if test.is_empty() {
            return Err(Error::EmptyDataset("test split is empty".into()));
        }
        if top_n == 0 {
            return Err(Error::InvalidInput("top_n must be >= 1".into()));
        }
        let mut test_users: Vec<usize> = test.interactions().iter().map(|x| x.user).collect();
        test_users.sort_unstable();
        test_users.dedup();
        Ok(Self {
            test: test
                .interactions()
                .iter()
                .map(|x| (x.user, x.item, x.rating))
                .collect(),
            test_users,
            seen: train.items_by_user(),
            hist: FrequencyTable::from_counts(train.item_counts()),
            n_items: train.n_items(),
            top_n,
        })
    }

    pub fn top_n(&self) -> usize {
        self.top_n
    }

    pub fn historical(&self) -> &FrequencyTable {
        &self.hist
    }

    pub fn test_users(&self) -> &[usize] {
        &self.test_users
    }

    pub fn mae<P: Predictor + ?Sized>(&self, model: &P) -> f64 {
        let sum: f64 = self
            .test
            .iter()
            .map(|&(u, i, r)| (model.rating(u, i) - r).abs())
            .sum();
        sum / self.test.len() as f64
    }

    pub fn recommendations<P: Predictor + ?Sized>(&self, model: &P) -> RecommendationCounts {
        top_n_counts(
            model,
            &self.seen,
            &self.test_users,
            self.n_items,
            self.top_n,
        )
        .expect("evaluator inputs validated at construction")
    }

    pub fn evaluate<P: Predictor + ?Sized>(&self, model: &P) -> Evaluation {
        let rec = self.recommendations(model);
        Evaluation {
            mae: self.mae(model),
            matthew: matthew_effect(&rec.table, &self.hist).map_err(|e| e.to_string()),
            short_users: rec.short_users,
        }
    }

    /// `(mae, dme)` for a trace; non-finite or undefined values become `None`.
    pub fn epoch_point<P: Predictor + ?Sized>(&self, model: &P) -> (Option<f64>, Option<f64>) {
        let e = self.evaluate(model);
        let dme = e.matthew.ok().map(|m| m.dme).filter(|d| d.is_finite());
        (Some(e.mae).filter(|m| m.is_finite()), dme)
    }

    pub fn report<P: Predictor + ?Sized>(&self, name: &str, model: &P) -> MetricReport {
        let e = self.evaluate(model);
        let mut notes = Vec::new();
        if e.short_users > 0 {
            notes.push(format!(
                "{} users had fewer than {} candidates",
                e.short_users, self.top_n
            ));
        }
        let (dme, slope_hist, slope_rec) = match e.matthew {
            Ok(m) => {
                if m.single_item_rec {
                    notes.push("all recommendations went to one item".into());
                }
                (m.dme, m.slope_hist, m.slope_rec)
            }
            Err(msg) => {
                notes.push(format!("dme undefined: {msg}"));
                (f64::NAN, f64::NAN, None)
            }
        };
        MetricReport {
            model: name.to_owned(),
            mae: e.mae,
            dme,
            slope_rec,
            slope_hist,
            top_n: self.top_n,
            notes,
        }
    }
}
