use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use super::config::{DatasetSource, ExperimentConfig};
use crate::analysis::{export_curves, write_file, EpochTrace};
use crate::data::{train_test_split, Dataset};
use crate::error::{Error, Result};
use crate::factorization::TrainedModel;
use crate::ingest::{generate_zipf_dataset, parse_ratings_file_head};
use crate::metrics::{Evaluator, MetricReport};

pub const SUMMARY_FILE: &str = "summary.txt";

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Directory relative dataset and output paths are resolved against.
    pub base_dir: PathBuf,
    /// Print progress lines to stderr.
    pub progress: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedReport {
    pub report: MetricReport,
    pub mae_rank: usize,
    pub dme_rank: usize,
}

#[derive(Debug)]
pub struct RunOutcome {
    /// Sorted by DME rank, fairest first.
    pub reports: Vec<RankedReport>,
    pub models: Vec<TrainedModel>,
    pub artifacts: Vec<PathBuf>,
    pub output_dir: PathBuf,
}

impl RunOutcome {
    pub fn table(&self) -> String {
        render_table(&self.reports)
    }
}

#[derive(Debug, Clone, PartialEq)]
struct DataSummary {
    lines: usize,
    malformed: usize,
    duplicates: usize,
}

fn progress(opts: &RunOptions, msg: impl FnOnce() -> String) {
    if opts.progress {
        eprintln!("[parafair] {}", msg());
    }
}

/// Loads the configured dataset and applies any rating-scale override.
pub fn load_dataset(config: &ExperimentConfig, base_dir: &Path) -> Result<Dataset> {
    load_with_summary(config, base_dir).map(|(d, _)| d)
}

fn load_with_summary(config: &ExperimentConfig, base_dir: &Path) -> Result<(Dataset, DataSummary)> {
    let (data, summary) = match &config.source {
        DatasetSource::File {
            path,
            format,
            max_rows,
        } => {
            let parsed = parse_ratings_file_head(&base_dir.join(path), format, *max_rows)?;
            let summary = DataSummary {
                lines: parsed.lines,
                malformed: parsed.malformed,
                duplicates: parsed.duplicates,
            };
            (parsed.dataset, summary)
        }
        DatasetSource::Synthetic {
            users,
            items,
            ratings,
            levels,
        } => {
            let d = generate_zipf_dataset(*users, *items, *ratings, levels, config.seed)?;
            let summary = DataSummary {
                lines: d.len(),
                malformed: 0,
                duplicates: 0,
            };
            (d, summary)
        }
    };
    let data = match (config.r_min, config.r_max) {
        (None, None) => data,
        (lo, hi) => data.with_scale(lo.unwrap_or(data.r_min()), hi.unwrap_or(data.r_max()))?,
    };
    Ok((data, summary))
}

/// Ingest, split, train every configured model with per-epoch evaluation,
/// then write the curve CSVs and `summary.txt`. Nothing is written unless
/// every model trains; files written before a failure are removed.
pub fn run_experiment(config: &ExperimentConfig, opts: &RunOptions) -> Result<RunOutcome> {
    config
        .check_inputs(&opts.base_dir)
        .map_err(|e| e.in_stage("validate"))?;
    let started = Instant::now();

    let (data, data_summary) =
        load_with_summary(config, &opts.base_dir).map_err(|e| e.in_stage("ingest"))?;
    progress(opts, || {
        format!(
            "loaded {} ratings ({} users, {} items, scale [{}, {}])",
            data.len(),
            data.n_users(),
            data.n_items(),
            data.r_min(),
            data.r_max()
        )
    });
    if data_summary.duplicates > 0 || data_summary.malformed > 0 {
        eprintln!(
            "[parafair] warning: skipped {} malformed line(s); {} repeated (user, item) pair(s) kept their last rating",
            data_summary.malformed, data_summary.duplicates
        );
    }
    let (train, test) = train_test_split(&data, &config.split).map_err(|e| e.in_stage("split"))?;
    let eval = Evaluator::new(&train, &test, config.top_n).map_err(|e| e.in_stage("split"))?;

    let fitted: Vec<(TrainedModel, MetricReport)> = config
        .models
        .par_iter()
        .map(|spec| {
            let t0 = Instant::now();
            let model = spec.kind.fit(&train, &spec.train, Some(&eval))?;
            let report = eval.report(spec.name(), &model);
            progress(opts, || {
                format!(
                    "{} done in {:.1}s: MAE {:.4}, DME {:.4}",
                    spec.name(),
                    t0.elapsed().as_secs_f64(),
                    report.mae,
                    report.dme
                )
            });
            Ok((model, report))
        })
        .collect::<Result<_>>()
        .map_err(|e: Error| e.in_stage("train"))?;

    let (models, reports): (Vec<_>, Vec<_>) = fitted.into_iter().unzip();
    let ranked = rank(reports);

    let out_dir = opts.base_dir.join(&config.output_dir);
    let traces: Vec<EpochTrace> = models.iter().map(|m| m.trace.clone()).collect();
    let summary = render_summary(
        config,
        &data,
        &train,
        &test,
        &data_summary,
        &ranked,
        &models,
    );
    let artifacts = write_outputs(&out_dir, &traces, &summary).map_err(|e| e.in_stage("export"))?;
    progress(opts, || {
        format!(
            "wrote {} files to {} in {:.1}s",
            artifacts.len(),
            out_dir.display(),
            started.elapsed().as_secs_f64()
        )
    });
    Ok(RunOutcome {
        reports: ranked,
        models,
        artifacts,
        output_dir: out_dir,
    })
}

fn write_outputs(out_dir: &Path, traces: &[EpochTrace], summary: &str) -> Result<Vec<PathBuf>> {
    let summary_path = out_dir.join(SUMMARY_FILE);
    let existed = out_dir.exists();
    let result = export_curves(traces, out_dir).and_then(|s| {
        let mut files = s.files;
        write_file(&summary_path, summary.as_bytes())?;
        files.push(summary_path.clone());
        Ok(files)
    });
    if result.is_err() {
        for name in [
            crate::analysis::CURVES_FILE,
            crate::analysis::TAKENS_MAE_FILE,
            crate::analysis::TAKENS_DME_FILE,
            SUMMARY_FILE,
        ] {
            let _ = fs::remove_file(out_dir.join(name));
        }
        if !existed {
            let _ = fs::remove_dir(out_dir);
        }
    }
    result
}

/// Ranks by ascending MAE and ascending DME (undefined DME last); ties keep
/// config order. Output is sorted by DME rank.
pub fn rank(reports: Vec<MetricReport>) -> Vec<RankedReport> {
    let n = reports.len();
    let key = |x: f64| if x.is_nan() { f64::INFINITY } else { x };
    let mut by_mae: Vec<usize> = (0..n).collect();
    by_mae.sort_by(|&a, &b| {
        key(reports[a].mae)
            .total_cmp(&key(reports[b].mae))
            .then(a.cmp(&b))
    });
    let mut by_dme: Vec<usize> = (0..n).collect();
    by_dme.sort_by(|&a, &b| {
        key(reports[a].dme)
            .total_cmp(&key(reports[b].dme))
            .then(reports[a].dme.is_nan().cmp(&reports[b].dme.is_nan()))
            .then(a.cmp(&b))
    });
    let mut mae_rank = vec![0; n];
    for (pos, &i) in by_mae.iter().enumerate() {
        mae_rank[i] = pos + 1;
    }
    let mut slots: Vec<Option<MetricReport>> = reports.into_iter().map(Some).collect();
    by_dme
        .iter()
        .enumerate()
        .map(|(pos, &i)| RankedReport {
            report: slots[i].take().expect("each index visited once"),
            mae_rank: mae_rank[i],
            dme_rank: pos + 1,
        })
        .collect()
}

pub fn render_table(reports: &[RankedReport]) -> String {
    let width = reports
        .iter()
        .map(|r| r.report.model.len())
        .max()
        .unwrap_or(0)
        .max("model".len());
    let mut out = format!(
        "{:<width$}  {:>10}  {:>10}  {:>8}  {:>8}\n",
        "model", "MAE", "DME", "MAE rank", "DME rank"
    );
    for r in reports {
        out.push_str(&format!(
            "{:<width$}  {:>10.4}  {:>10.4}  {:>8}  {:>8}\n",
            r.report.model, r.report.mae, r.report.dme, r.mae_rank, r.dme_rank
        ));
    }
    out
}

fn render_summary(
    config: &ExperimentConfig,
    data: &Dataset,
    train: &Dataset,
    test: &Dataset,
    ds: &DataSummary,
    ranked: &[RankedReport],
    models: &[TrainedModel],
) -> String {
    let mut out = String::new();
    let mut put = |k: &str, v: &dyn std::fmt::Display| out.push_str(&format!("{k} = {v}\n"));
    for (k, v) in config.echo() {
        put(&format!("config.{k}"), &v);
    }
    put("data.lines", &ds.lines);
    put("data.malformed_lines", &ds.malformed);
    put("data.duplicate_pairs", &ds.duplicates);
    put("data.interactions", &data.len());
    put("data.users", &data.n_users());
    put("data.items", &data.n_items());
    put("data.r_min", &data.r_min());
    put("data.r_max", &data.r_max());
    put("data.train_interactions", &train.len());
    put("data.test_interactions", &test.len());
    for m in models {
        let name = m.kind.name();
        let r = ranked
            .iter()
            .find(|r| r.report.model == name)
            .expect("every model has a report");
        put(&format!("result.{name}.mae"), &r.report.mae);
        put(&format!("result.{name}.dme"), &r.report.dme);
        put(&format!("result.{name}.slope_hist"), &r.report.slope_hist);
        let slope_rec = r
            .report
            .slope_rec
            .map_or("NA".to_owned(), |s| s.to_string());
        put(&format!("result.{name}.slope_rec"), &slope_rec);
        put(&format!("result.{name}.top_n"), &r.report.top_n);
        put(&format!("result.{name}.mae_rank"), &r.mae_rank);
        put(&format!("result.{name}.dme_rank"), &r.dme_rank);
        put(
            &format!("result.{name}.reinitialized_rows"),
            &m.stats.reinitialized_rows,
        );
        put(
            &format!("result.{name}.clipped_steps"),
            &m.stats.clipped_steps,
        );
        if !r.report.notes.is_empty() {
            put(&format!("result.{name}.notes"), &r.report.notes.join("; "));
        }
    }
    out
}

/// Parses a flat `key = value` summary file into ordered pairs.
pub fn parse_summary(text: &str) -> Result<Vec<(String, String)>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| {
            l.split_once(" = ")
                .map(|(k, v)| (k.to_owned(), v.to_owned()))
                .ok_or_else(|| Error::ConfigSyntax {
                    line: n + 1,
                    message: format!("summary line `{l}` is not `key = value`"),
                })
        })
        .collect()
}

/// The config echoed in a summary file.
pub fn config_from_summary(text: &str) -> Result<ExperimentConfig> {
    let pairs: Vec<(String, String)> = parse_summary(text)?
        .into_iter()
        .filter_map(|(k, v)| k.strip_prefix("config.").map(|k| (k.to_owned(), v)))
        .collect();
    super::config::config_from_pairs(&pairs)
}
