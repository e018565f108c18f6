//! Per-epoch metric curves, delay embeddings and their CSV export.
//!
//! `export_curves` writes three files into the destination directory:
//!
//! * `curves.csv` with header `epoch,model,mae,dme`, one row per
//!   `(epoch, model)`, epochs starting at 1;
//! * `takens_mae.csv` and `takens_dme.csv` with header `model,t,x,y`, the
//!   2-D delay embedding `(s[t], s[t + delay])` of each model's curve.
//!
//! Numbers are written with 9 significant digits; missing values as `NA`.
//! Lines end in `\n`. To plot, scatter `x` against `y` per model and join
//! consecutive `t`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

pub const CURVES_FILE: &str = "curves.csv";
pub const TAKENS_MAE_FILE: &str = "takens_mae.csv";
pub const TAKENS_DME_FILE: &str = "takens_dme.csv";
pub const DEFAULT_DELAY: usize = 1;
const MISSING: &str = "NA";

/// Metric curves of one model run, one entry per epoch. `None` marks a
/// value that could not be computed (e.g. an undefined DME).
#[derive(Debug, Clone, PartialEq)]
pub struct EpochTrace {
    pub model_tag: String,
    pub mae_curve: Vec<Option<f64>>,
    pub dme_curve: Vec<Option<f64>>,
    /// Mean training loss; `None` for non-trainable baselines.
    pub loss_curve: Vec<Option<f64>>,
}

impl EpochTrace {
    pub fn new(model_tag: &str) -> Self {
        Self {
            model_tag: model_tag.to_owned(),
            mae_curve: Vec::new(),
            dme_curve: Vec::new(),
            loss_curve: Vec::new(),
        }
    }

    pub fn push(&mut self, loss: Option<f64>, mae: Option<f64>, dme: Option<f64>) {
        self.loss_curve.push(loss);
        self.mae_curve.push(mae);
        self.dme_curve.push(dme);
    }

    pub fn epochs(&self) -> usize {
        self.mae_curve.len()
    }

    pub fn len(&self) -> usize {
        self.epochs()
    }

    pub fn is_empty(&self) -> bool {
        self.mae_curve.is_empty()
    }

    pub fn losses(&self) -> Vec<f64> {
        self.loss_curve.iter().flatten().copied().collect()
    }
}

/// Delay-coordinate pairs `(s[t], s[t + delay])` for `t = 0 .. len - delay`.
pub fn takens_embed<T: Copy>(series: &[T], delay: usize) -> Result<Vec<(T, T)>> {
    if delay == 0 {
        return Err(Error::InvalidInput("delay must be >= 1".into()));
    }
    if series.len() <= delay {
        return Err(Error::InvalidInput(format!(
            "series of length {} too short for delay {delay}",
            series.len()
        )));
    }
    Ok(series
        .iter()
        .zip(&series[delay..])
        .map(|(a, b)| (*a, *b))
        .collect())
}

/// Formats with 9 significant digits, using the shortest decimal form that
/// reads back to the rounded value.
pub fn format_sig9(v: f64) -> String {
    if !v.is_finite() {
        return MISSING.to_owned();
    }
    let rounded: f64 = format!("{v:.8e}").parse().expect("formatted float parses");
    format!("{rounded}")
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| MISSING.to_owned(), format_sig9)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExportSummary {
    pub curves_path: PathBuf,
    pub curve_rows: usize,
    pub takens_mae_rows: usize,
    pub takens_dme_rows: usize,
    pub files: Vec<PathBuf>,
}

pub fn export_curves(traces: &[EpochTrace], destination: &Path) -> Result<ExportSummary> {
    export_curves_with_delay(traces, destination, DEFAULT_DELAY)
}

pub fn export_curves_with_delay(
    traces: &[EpochTrace],
    destination: &Path,
    delay: usize,
) -> Result<ExportSummary> {
    let Some(first) = traces.first() else {
        return Err(Error::InvalidInput("no traces to export".into()));
    };
    let epochs = first.epochs();
    if let Some(t) = traces
        .iter()
        .find(|t| t.epochs() != epochs || t.dme_curve.len() != epochs)
    {
        return Err(Error::InvalidInput(format!(
            "trace `{}` has {} epochs, expected {epochs}",
            t.model_tag,
            t.epochs()
        )));
    }
    if delay == 0 {
        return Err(Error::InvalidInput("delay must be >= 1".into()));
    }
    fs::create_dir_all(destination).map_err(|e| Error::io(destination, e))?;

    let mut main = String::from("epoch,model,mae,dme\n");
    for epoch in 0..epochs {
        for t in traces {
            main.push_str(&format!(
                "{},{},{},{}\n",
                epoch + 1,
                t.model_tag,
                cell(t.mae_curve[epoch]),
                cell(t.dme_curve[epoch])
            ));
        }
    }
    let (mae_csv, mae_rows) = takens_csv(traces, |t| &t.mae_curve, delay);
    let (dme_csv, dme_rows) = takens_csv(traces, |t| &t.dme_curve, delay);

    let mut files = Vec::new();
    for (name, body) in [
        (CURVES_FILE, &main),
        (TAKENS_MAE_FILE, &mae_csv),
        (TAKENS_DME_FILE, &dme_csv),
    ] {
        let path = destination.join(name);
        write_file(&path, body.as_bytes())?;
        files.push(path);
    }
    Ok(ExportSummary {
        curves_path: files[0].clone(),
        curve_rows: epochs * traces.len(),
        takens_mae_rows: mae_rows,
        takens_dme_rows: dme_rows,
        files,
    })
}

/// Takens CSV for one metric. Curves too short for the delay contribute no
/// rows.
pub fn takens_csv(
    traces: &[EpochTrace],
    curve: impl Fn(&EpochTrace) -> &Vec<Option<f64>>,
    delay: usize,
) -> (String, usize) {
    let mut out = String::from("model,t,x,y\n");
    let mut rows = 0;
    for trace in traces {
        if let Ok(points) = takens_embed(curve(trace), delay) {
            for (t, (x, y)) in points.into_iter().enumerate() {
                out.push_str(&format!(
                    "{},{},{},{}\n",
                    trace.model_tag,
                    t,
                    cell(x),
                    cell(y)
                ));
                rows += 1;
            }
        }
    }
    (out, rows)
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}

/// Reads a `curves.csv` back into traces (model order of first appearance).
/// Loss curves are not part of the file and come back empty.
pub fn read_curves(path: &Path) -> Result<Vec<EpochTrace>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_curves(&text)
}

pub fn parse_curves(text: &str) -> Result<Vec<EpochTrace>> {
    let mut lines = text.lines();
    match lines.next() {
        Some("epoch,model,mae,dme") => {}
        other => {
            return Err(Error::InvalidInput(format!(
                "unexpected curves header {other:?}"
            )))
        }
    }
    let mut traces: Vec<EpochTrace> = Vec::new();
    for (n, line) in lines.enumerate() {
        let bad = || Error::InvalidInput(format!("curves line {}: `{line}`", n + 2));
        let fields: Vec<&str> = line.split(',').collect();
        let [epoch, model, mae, dme] = fields[..] else {
            return Err(bad());
        };
        let epoch: usize = epoch.parse().map_err(|_| bad())?;
        let value = |s: &str| -> Result<Option<f64>> {
            if s == MISSING {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|_| bad())
            }
        };
        let (mae, dme) = (value(mae)?, value(dme)?);
        let idx = match traces.iter().position(|t| t.model_tag == model) {
            Some(i) => i,
            None => {
                traces.push(EpochTrace::new(model));
                traces.len() - 1
            }
        };
        let trace = &mut traces[idx];
        if epoch != trace.epochs() + 1 {
            return Err(bad());
        }
        trace.mae_curve.push(mae);
        trace.dme_curve.push(dme);
    }
    if traces.is_empty() {
        return Err(Error::InvalidInput("curves file has no rows".into()));
    }
    Ok(traces)
}
