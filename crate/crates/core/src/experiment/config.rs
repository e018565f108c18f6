//! Experiment configuration files.
//!
//! Line-based `key = value` pairs. Keys before the first `[section]` are
//! global; each `[model-name]` section enables that model and may override
//! training keys for it. `#` starts a comment line.
//!
//! ```text
//! dataset = ml-1m/ratings.dat
//! format = movielens-1m
//! epochs = 30
//!
//! [cosine-mf]
//! [paramat]
//! learning_rate = 0.005
//! ```

use std::path::{Path, PathBuf};

use crate::data::{SplitSpec, TrainConfig};
use crate::error::{Error, Result};
use crate::factorization::ModelKind;
use crate::ingest::{FormatTag, SourceFormat};
use crate::rng::derive_seed;

pub const DEFAULT_TOP_N: usize = 10;
pub const DEFAULT_TEST_FRACTION: f64 = 0.2;
pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_OUTPUT_DIR: &str = "parafair-out";

const TRAIN_KEYS: &[&str] = &[
    "latent_dim",
    "learning_rate",
    "epochs",
    "init_scale",
    "grad_guard_eps",
    "clamp_predictions",
    "regularization",
    "grad_clip",
];

const DATA_KEYS: &[&str] = &[
    "dataset",
    "format",
    "separator",
    "user_column",
    "item_column",
    "rating_column",
    "header_rows",
    "max_rows",
    "r_min",
    "r_max",
    "synthetic_users",
    "synthetic_items",
    "synthetic_ratings",
    "synthetic_levels",
    "test_fraction",
    "seed",
    "top_n",
    "output_dir",
];

#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSource {
    File {
        path: PathBuf,
        format: SourceFormat,
        /// Read only the first `max_rows` data lines.
        max_rows: Option<usize>,
    },
    Synthetic {
        users: usize,
        items: usize,
        ratings: usize,
        levels: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub kind: ModelKind,
    /// Effective training config; `train.seed` is the explicit section seed
    /// or one derived from the experiment seed and the model name.
    pub train: TrainConfig,
    pub explicit_seed: Option<u64>,
    /// Keys set inside the model's section.
    overridden: Vec<&'static str>,
}

impl ModelSpec {
    pub fn name(&self) -> &'static str {
        self.kind.name()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub source: DatasetSource,
    pub r_min: Option<f64>,
    pub r_max: Option<f64>,
    pub split: SplitSpec,
    pub seed: u64,
    pub defaults: TrainConfig,
    pub models: Vec<ModelSpec>,
    pub top_n: usize,
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    /// Changes the experiment seed and everything derived from it.
    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.split.seed = seed;
        self.defaults.seed = seed;
        for m in &mut self.models {
            m.train.seed = m
                .explicit_seed
                .unwrap_or_else(|| derive_seed(seed, m.kind.name()));
        }
    }

    /// Checks that referenced input files exist, resolving relative paths
    /// against `base_dir`.
    pub fn check_inputs(&self, base_dir: &Path) -> Result<()> {
        if let DatasetSource::File { path, .. } = &self.source {
            let full = base_dir.join(path);
            if !full.is_file() {
                return Err(Error::Config(format!(
                    "dataset file {} does not exist",
                    full.display()
                )));
            }
        }
        Ok(())
    }

    /// Every setting as flat `(key, value)` pairs; model keys are prefixed
    /// with `<model>.`. Feeding these back through [`config_from_pairs`]
    /// reproduces the config.
    pub fn echo(&self) -> Vec<(String, String)> {
        let mut out: Vec<(String, String)> = Vec::new();
        let mut put = |k: &str, v: String| out.push((k.to_owned(), v));
        match &self.source {
            DatasetSource::File {
                path,
                format,
                max_rows,
            } => {
                put("dataset", path.display().to_string());
                put("format", format.tag.name().into());
                put("separator", escape_separator(&format.separator));
                put("user_column", format.user_column.to_string());
                put("item_column", format.item_column.to_string());
                put("rating_column", format.rating_column.to_string());
                put("header_rows", format.header_rows.to_string());
                if let Some(m) = max_rows {
                    put("max_rows", m.to_string());
                }
            }
            DatasetSource::Synthetic {
                users,
                items,
                ratings,
                levels,
            } => {
                put("synthetic_users", users.to_string());
                put("synthetic_items", items.to_string());
                put("synthetic_ratings", ratings.to_string());
                let levels: Vec<String> = levels.iter().map(|l| l.to_string()).collect();
                put("synthetic_levels", levels.join(", "));
            }
        }
        if let Some(r) = self.r_min {
            put("r_min", r.to_string());
        }
        if let Some(r) = self.r_max {
            put("r_max", r.to_string());
        }
        put("test_fraction", self.split.test_fraction.to_string());
        put("seed", self.seed.to_string());
        put("top_n", self.top_n.to_string());
        put("output_dir", self.output_dir.display().to_string());
        for (k, v) in train_pairs(&self.defaults) {
            put(k, v);
        }
        for m in &self.models {
            let name = m.name();
            // the section header must survive even with no overrides
            put(&format!("{name}.enabled"), "true".into());
            for (k, v) in train_pairs(&m.train) {
                if m.overridden.contains(&k) {
                    put(&format!("{name}.{k}"), v);
                }
            }
            if let Some(s) = m.explicit_seed {
                put(&format!("{name}.seed"), s.to_string());
            }
        }
        out
    }
}

fn escape_separator(s: &str) -> String {
    s.replace('\t', "\\t")
}

fn train_pairs(c: &TrainConfig) -> Vec<(&'static str, String)> {
    vec![
        ("latent_dim", c.latent_dim.to_string()),
        ("learning_rate", c.learning_rate.to_string()),
        ("epochs", c.epochs.to_string()),
        ("init_scale", c.init_scale.to_string()),
        ("grad_guard_eps", c.grad_guard_eps.to_string()),
        ("clamp_predictions", c.clamp_predictions.to_string()),
        ("regularization", c.regularization.to_string()),
        ("grad_clip", c.grad_clip.to_string()),
    ]
}

/// Rebuilds a config from [`ExperimentConfig::echo`] pairs.
pub fn config_from_pairs(pairs: &[(String, String)]) -> Result<ExperimentConfig> {
    let mut global = String::new();
    let mut sections: Vec<(String, String)> = Vec::new();
    for (k, v) in pairs {
        match k.split_once('.') {
            Some((model, key)) => {
                let idx = match sections.iter().position(|(m, _)| m == model) {
                    Some(i) => i,
                    None => {
                        sections.push((model.to_owned(), String::new()));
                        sections.len() - 1
                    }
                };
                if key != "enabled" {
                    sections[idx].1.push_str(&format!("{key} = {v}\n"));
                }
            }
            None => global.push_str(&format!("{k} = {v}\n")),
        }
    }
    for (model, body) in sections {
        global.push_str(&format!("[{model}]\n{body}"));
    }
    validate_config(&global)
}

struct Entry<'a> {
    line: usize,
    key: &'a str,
    value: &'a str,
}

struct Section<'a> {
    line: usize,
    name: &'a str,
    entries: Vec<Entry<'a>>,
}

/// Parses and validates config text, filling every unset value with its
/// documented default. Does not touch the filesystem.
pub fn validate_config(raw: &str) -> Result<ExperimentConfig> {
    let mut global: Vec<Entry<'_>> = Vec::new();
    let mut sections: Vec<Section<'_>> = Vec::new();
    for (n, line) in raw.lines().enumerate() {
        let line_no = n + 1;
        let text = line.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        if let Some(rest) = text.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or_else(|| Error::ConfigSyntax {
                line: line_no,
                message: format!("unterminated section header `{text}`"),
            })?;
            let name = name.trim();
            if ModelKind::parse(name).is_none() {
                let names: Vec<&str> = ModelKind::ALL.iter().map(|k| k.name()).collect();
                return Err(Error::UnknownKey {
                    line: line_no,
                    key: format!("[{name}]"),
                    suggestion: nearest(name, &names).map(|s| format!("[{s}]")),
                });
            }
            if sections.iter().any(|s| s.name == name) {
                return Err(Error::ConfigSyntax {
                    line: line_no,
                    message: format!("model `{name}` configured twice"),
                });
            }
            sections.push(Section {
                line: line_no,
                name,
                entries: Vec::new(),
            });
            continue;
        }
        let (key, value) = text.split_once('=').ok_or_else(|| Error::ConfigSyntax {
            line: line_no,
            message: format!("expected `key = value`, found `{text}`"),
        })?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() {
            return Err(Error::ConfigSyntax {
                line: line_no,
                message: "empty key".into(),
            });
        }
        let entry = Entry {
            line: line_no,
            key,
            value,
        };
        let allowed: Vec<&str> = match sections.last() {
            None => DATA_KEYS.iter().chain(TRAIN_KEYS).copied().collect(),
            Some(_) => TRAIN_KEYS.iter().copied().chain(["seed"]).collect(),
        };
        if !allowed.contains(&key) {
            return Err(Error::UnknownKey {
                line: line_no,
                key: key.to_owned(),
                suggestion: nearest(key, &allowed).map(str::to_owned),
            });
        }
        let bucket = match sections.last_mut() {
            Some(s) => &mut s.entries,
            None => &mut global,
        };
        if bucket.iter().any(|e| e.key == key) {
            return Err(Error::ConfigSyntax {
                line: line_no,
                message: format!("`{key}` set twice"),
            });
        }
        bucket.push(entry);
    }

    if sections.is_empty() {
        return Err(Error::Config(
            "no models configured (add a section such as `[cosine-mf]`)".into(),
        ));
    }

    let get = |k: &str| global.iter().find(|e| e.key == k);
    let seed: u64 = opt(get("seed"))?.unwrap_or(DEFAULT_SEED);

    let mut defaults = TrainConfig {
        seed,
        ..TrainConfig::default()
    };
    for e in global.iter().filter(|e| TRAIN_KEYS.contains(&e.key)) {
        apply_train_key(&mut defaults, e)?;
    }
    defaults
        .validate()
        .map_err(|err| Error::Config(err.to_string()))?;

    let source = dataset_source(&get)?;
    let r_min = opt(get("r_min"))?;
    let r_max = opt(get("r_max"))?;
    let test_fraction = opt(get("test_fraction"))?.unwrap_or(DEFAULT_TEST_FRACTION);
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(line_err(get("test_fraction").unwrap(), "must be in (0, 1)"));
    }
    let top_n = opt(get("top_n"))?.unwrap_or(DEFAULT_TOP_N);
    if top_n == 0 {
        return Err(line_err(get("top_n").unwrap(), "must be >= 1"));
    }
    let output_dir = get("output_dir").map_or_else(
        || PathBuf::from(DEFAULT_OUTPUT_DIR),
        |e| PathBuf::from(e.value),
    );

    let mut models = Vec::new();
    for s in &sections {
        let kind = ModelKind::parse(s.name).expect("checked when the header was read");
        let mut train = defaults.clone();
        let mut explicit_seed = None;
        let mut overridden = Vec::new();
        for e in &s.entries {
            if e.key == "seed" {
                explicit_seed = Some(parse_value(e)?);
            } else {
                apply_train_key(&mut train, e)?;
                overridden.push(*TRAIN_KEYS.iter().find(|k| **k == e.key).unwrap());
            }
        }
        train.seed = explicit_seed.unwrap_or_else(|| derive_seed(seed, kind.name()));
        train.validate().map_err(|err| Error::ConfigSyntax {
            line: s.line,
            message: format!("[{}]: {err}", s.name),
        })?;
        if kind == ModelKind::LinFac && train.latent_dim < 2 {
            return Err(Error::ConfigSyntax {
                line: s.line,
                message: "[linfac] needs latent_dim >= 2".into(),
            });
        }
        models.push(ModelSpec {
            kind,
            train,
            explicit_seed,
            overridden,
        });
    }

    Ok(ExperimentConfig {
        source,
        r_min,
        r_max,
        split: SplitSpec {
            test_fraction,
            seed,
        },
        seed,
        defaults,
        models,
        top_n,
        output_dir,
    })
}

fn dataset_source<'a>(get: &impl Fn(&str) -> Option<&'a Entry<'a>>) -> Result<DatasetSource> {
    let synthetic = [
        "synthetic_users",
        "synthetic_items",
        "synthetic_ratings",
        "synthetic_levels",
    ];
    let file_keys = [
        "format",
        "separator",
        "user_column",
        "item_column",
        "rating_column",
        "header_rows",
        "max_rows",
    ];
    match (get("dataset"), synthetic.iter().find_map(|k| get(k))) {
        (Some(d), Some(s)) => Err(Error::ConfigSyntax {
            line: s.line.max(d.line),
            message: "`dataset` and `synthetic_*` keys are mutually exclusive".into(),
        }),
        (None, None) => Err(Error::Config(
            "no dataset configured (set `dataset` or the `synthetic_*` keys)".into(),
        )),
        (Some(d), None) => {
            let tag = match get("format") {
                Some(e) => FormatTag::parse(e.value).ok_or_else(|| {
                    line_err(e, "expected movielens-1m, comoda-csv or generic-csv")
                })?,
                None => FormatTag::MovieLens1M,
            };
            let mut format = SourceFormat::for_tag(tag);
            if let Some(e) = get("separator") {
                format.separator = e.value.replace("\\t", "\t");
            }
            if let Some(c) = opt(get("user_column"))? {
                format.user_column = c;
            }
            if let Some(c) = opt(get("item_column"))? {
                format.item_column = c;
            }
            if let Some(c) = opt(get("rating_column"))? {
                format.rating_column = c;
            }
            if let Some(h) = opt(get("header_rows"))? {
                format.header_rows = h;
            }
            format
                .validate()
                .map_err(|err| line_err(get("separator").unwrap_or(d), &err.to_string()))?;
            if d.value.is_empty() {
                return Err(line_err(d, "empty dataset path"));
            }
            Ok(DatasetSource::File {
                path: PathBuf::from(d.value),
                format,
                max_rows: opt(get("max_rows"))?,
            })
        }
        (None, Some(_)) => {
            if let Some(e) = file_keys.iter().find_map(|k| get(k)) {
                return Err(line_err(e, "file layout keys need `dataset`"));
            }
            let need = |k: &str| -> Result<&Entry<'_>> {
                get(k).ok_or_else(|| Error::Config(format!("synthetic dataset needs `{k}`")))
            };
            let users: usize = parse_value(need("synthetic_users")?)?;
            let items: usize = parse_value(need("synthetic_items")?)?;
            let ratings: usize = parse_value(need("synthetic_ratings")?)?;
            let levels_entry = get("synthetic_levels");
            let levels = match levels_entry {
                Some(e) => e
                    .value
                    .split(',')
                    .map(|s| {
                        s.trim()
                            .parse::<f64>()
                            .map_err(|_| line_err(e, &format!("bad rating level `{}`", s.trim())))
                    })
                    .collect::<Result<Vec<_>>>()?,
                None => vec![1.0, 2.0, 3.0, 4.0, 5.0],
            };
            if levels.is_empty() || levels.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
                return Err(line_err(levels_entry.unwrap(), "levels must be positive"));
            }
            if ratings == 0 || users.checked_mul(items).is_none_or(|c| ratings > c) {
                return Err(line_err(
                    need("synthetic_ratings")?,
                    "must be between 1 and synthetic_users * synthetic_items",
                ));
            }
            Ok(DatasetSource::Synthetic {
                users,
                items,
                ratings,
                levels,
            })
        }
    }
}

fn apply_train_key(c: &mut TrainConfig, e: &Entry<'_>) -> Result<()> {
    match e.key {
        "latent_dim" => c.latent_dim = parse_value(e)?,
        "learning_rate" => c.learning_rate = parse_value(e)?,
        "epochs" => c.epochs = parse_value(e)?,
        "init_scale" => c.init_scale = parse_value(e)?,
        "grad_guard_eps" => c.grad_guard_eps = parse_value(e)?,
        "clamp_predictions" => c.clamp_predictions = parse_value(e)?,
        "regularization" => c.regularization = parse_value(e)?,
        "grad_clip" => c.grad_clip = parse_value(e)?,
        other => unreachable!("`{other}` is not a training key"),
    }
    Ok(())
}

fn parse_value<T: std::str::FromStr>(e: &Entry<'_>) -> Result<T> {
    e.value
        .parse()
        .map_err(|_| line_err(e, &format!("cannot parse `{}`", e.value)))
}

fn opt<T: std::str::FromStr>(e: Option<&Entry<'_>>) -> Result<Option<T>> {
    e.map(parse_value).transpose()
}

fn line_err(e: &Entry<'_>, msg: &str) -> Error {
    Error::ConfigSyntax {
        line: e.line,
        message: format!("`{}`: {msg}", e.key),
    }
}

fn nearest<'a>(key: &str, candidates: &[&'a str]) -> Option<&'a str> {
    candidates
        .iter()
        .map(|c| (strsim::levenshtein(key, c), *c))
        .filter(|(d, c)| *d <= 3.max(c.len() / 3))
        .min()
        .map(|(_, c)| c)
}
