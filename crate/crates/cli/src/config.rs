//! Run configuration: command-line flags over a flat `key=value` file over
//! built-in defaults. Every key is the kebab-case name of its flag.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;

use crate::CliError;

/// Keys and their defaults (`None`: no default).
const KEYS: &[(&str, Option<&str>)] = &[
    ("embeddings", None),
    ("embeddings-format", Some("binary")),
    ("unit-normalize", Some("false")),
    ("dataset", None),
    ("sts", None),
    ("stopwords", None),
    ("min-word-count", Some("1")),
    ("weighting", Some("nbow")),
    ("output", Some(".")),
    ("r", Some("128")),
    ("d-max", Some("6")),
    ("gamma", Some("1")),
    ("seed", Some("0")),
    ("mean-centered", Some("false")),
    ("precompute", Some("false")),
    ("basis", None),
    ("gammas", None),
    ("d-maxes", None),
    ("cs", Some("1")),
    ("folds", Some("10")),
    ("splits", Some("1")),
    ("test-fraction", Some("0.3")),
    ("k-grid", Some("1-21")),
    ("sweep", Some("r")),
    ("values", None),
    ("score", Some("cosine")),
    ("workers", None),
    ("no-timing", Some("false")),
];

/// Flags shared by every subcommand. Values are parsed after merging with
/// the config file so both sources go through the same validation.
#[derive(Args, Debug, Default, Clone)]
pub struct Flags {
    /// Flat key=value file; flags override its entries.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Print the resolved configuration and exit.
    #[arg(long)]
    pub print_config: bool,

    /// Word vectors file.
    #[arg(long)]
    pub embeddings: Option<String>,
    /// `binary` (word2vec) or `text`.
    #[arg(long)]
    pub embeddings_format: Option<String>,
    /// Scale every word vector to unit length after loading.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub unit_normalize: Option<String>,
    /// Labeled dataset, one `label<TAB>text` record per line.
    #[arg(long)]
    pub dataset: Option<String>,
    /// Comma-separated STS files of `score<TAB>sentence1<TAB>sentence2` lines.
    #[arg(long)]
    pub sts: Option<String>,
    /// Stop-word file, one token per line.
    #[arg(long)]
    pub stopwords: Option<String>,
    /// Drop tokens occurring fewer times than this in the dataset.
    #[arg(long)]
    pub min_word_count: Option<String>,
    /// `nbow` or `tfidf`.
    #[arg(long)]
    pub weighting: Option<String>,
    /// Output directory (created if missing).
    #[arg(long)]
    pub output: Option<String>,

    /// Number of random documents.
    #[arg(long)]
    pub r: Option<String>,
    /// Maximum random-document length.
    #[arg(long)]
    pub d_max: Option<String>,
    /// Kernel bandwidth in exp(-gamma * WMD).
    #[arg(long)]
    pub gamma: Option<String>,
    /// Seed for random documents and splits.
    #[arg(long)]
    pub seed: Option<String>,
    /// Center the random-word sampling box on the mean word vector.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub mean_centered: Option<String>,
    /// Reuse word-pair distances (`wmd`, `knn`) or precompute random-word
    /// distances (`embed`, `train-eval`, `sweep`, `sts`).
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub precompute: Option<String>,
    /// Saved basis file to embed against instead of sampling a new one.
    #[arg(long)]
    pub basis: Option<String>,

    /// Cross-validation grid for gamma, e.g. `0.1,1,10` (default: --gamma).
    #[arg(long)]
    pub gammas: Option<String>,
    /// Cross-validation grid for D_max, e.g. `3-21` (default: --d-max).
    #[arg(long)]
    pub d_maxes: Option<String>,
    /// Cross-validation grid for the inverse regularization strength C.
    #[arg(long)]
    pub cs: Option<String>,
    /// Cross-validation folds.
    #[arg(long)]
    pub folds: Option<String>,
    /// Number of seeded stratified train/test splits.
    #[arg(long)]
    pub splits: Option<String>,
    /// Fraction of each class held out for testing.
    #[arg(long)]
    pub test_fraction: Option<String>,
    /// Candidate k values for KNN, e.g. `1-21`.
    #[arg(long)]
    pub k_grid: Option<String>,
    /// Swept parameter: `r` or `d-max`.
    #[arg(long)]
    pub sweep: Option<String>,
    /// Swept values, e.g. `4,16,64`.
    #[arg(long)]
    pub values: Option<String>,
    /// STS similarity: `cosine` or `inner`.
    #[arg(long)]
    pub score: Option<String>,
    /// Worker threads (default: WME_WORKERS, then available parallelism).
    #[arg(long)]
    pub workers: Option<String>,
    /// Report zero for wall-clock fields and cache hit/miss counters.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub no_timing: Option<String>,
}

impl Flags {
    fn pairs(&self) -> Vec<(&'static str, &Option<String>)> {
        vec![
            ("embeddings", &self.embeddings),
            ("embeddings-format", &self.embeddings_format),
            ("unit-normalize", &self.unit_normalize),
            ("dataset", &self.dataset),
            ("sts", &self.sts),
            ("stopwords", &self.stopwords),
            ("min-word-count", &self.min_word_count),
            ("weighting", &self.weighting),
            ("output", &self.output),
            ("r", &self.r),
            ("d-max", &self.d_max),
            ("gamma", &self.gamma),
            ("seed", &self.seed),
            ("mean-centered", &self.mean_centered),
            ("precompute", &self.precompute),
            ("basis", &self.basis),
            ("gammas", &self.gammas),
            ("d-maxes", &self.d_maxes),
            ("cs", &self.cs),
            ("folds", &self.folds),
            ("splits", &self.splits),
            ("test-fraction", &self.test_fraction),
            ("k-grid", &self.k_grid),
            ("sweep", &self.sweep),
            ("values", &self.values),
            ("score", &self.score),
            ("workers", &self.workers),
            ("no-timing", &self.no_timing),
        ]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Source {
    Default,
    Environment,
    File,
    Flag,
}

impl Source {
    fn name(self) -> &'static str {
        match self {
            Source::Default => "default",
            Source::Environment => "environment",
            Source::File => "config",
            Source::Flag => "flag",
        }
    }
}

/// Merged key/value settings with the source of each value.
#[derive(Clone, Debug)]
pub struct Settings {
    values: BTreeMap<&'static str, (String, Source)>,
}

fn known(key: &str) -> Option<&'static str> {
    KEYS.iter().map(|(k, _)| *k).find(|k| *k == key)
}

pub fn parse_config_file(text: &str) -> Result<Vec<(String, String)>, CliError> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            CliError::Config(format!("config line {}: expected key=value", n + 1))
        })?;
        out.push((k.trim().to_owned(), v.trim().to_owned()));
    }
    Ok(out)
}

impl Settings {
    pub fn resolve(flags: &Flags, env_workers: Option<String>) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        for (k, d) in KEYS {
            if let Some(d) = d {
                values.insert(*k, (d.to_string(), Source::Default));
            }
        }
        if let Some(w) = env_workers.filter(|w| !w.trim().is_empty()) {
            values.insert("workers", (w.trim().to_owned(), Source::Environment));
        }
        if let Some(path) = &flags.config {
            let text = fs::read_to_string(path).map_err(|e| {
                CliError::Config(format!("cannot read config {}: {e}", path.display()))
            })?;
            for (k, v) in parse_config_file(&text)? {
                let key = known(&k)
                    .ok_or_else(|| CliError::Config(format!("unknown config key {k:?}")))?;
                values.insert(key, (v, Source::File));
            }
        }
        for (k, v) in flags.pairs() {
            if let Some(v) = v {
                values.insert(k, (v.clone(), Source::Flag));
            }
        }
        Ok(Settings { values })
    }

    /// `key=value  # source` lines, sorted by key.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (k, (v, s)) in &self.values {
            let _ = writeln!(out, "{k}={v}  # {}", s.name());
        }
        out
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(|(v, _)| v.as_str())
    }

    pub fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        self.raw(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|_| CliError::Config(format!("invalid value {v:?} for {key}")))
            })
            .transpose()
    }

    pub fn require<T: std::str::FromStr>(&self, key: &str) -> Result<T, CliError> {
        self.get(key)?
            .ok_or_else(|| CliError::Config(format!("missing required setting {key}")))
    }

    pub fn flag(&self, key: &str) -> Result<bool, CliError> {
        match self.raw(key) {
            None | Some("false") | Some("0") | Some("no") => Ok(false),
            Some("true") | Some("1") | Some("yes") => Ok(true),
            Some(v) => Err(CliError::Config(format!("invalid boolean {v:?} for {key}"))),
        }
    }

    /// Path that must exist now.
    pub fn existing_path(&self, key: &str) -> Result<PathBuf, CliError> {
        let p = PathBuf::from(self.require::<String>(key)?);
        if !p.exists() {
            return Err(CliError::Config(format!("{key}: {} does not exist", p.display())));
        }
        Ok(p)
    }

    pub fn optional_path(&self, key: &str) -> Result<Option<PathBuf>, CliError> {
        match self.raw(key) {
            None => Ok(None),
            Some(_) => self.existing_path(key).map(Some),
        }
    }

    pub fn f64_list(&self, key: &str) -> Result<Option<Vec<f64>>, CliError> {
        self.raw(key).map(|v| parse_f64_list(key, v)).transpose()
    }

    pub fn usize_list(&self, key: &str) -> Result<Option<Vec<usize>>, CliError> {
        self.raw(key).map(|v| parse_usize_list(key, v)).transpose()
    }
}

pub fn parse_f64_list(key: &str, text: &str) -> Result<Vec<f64>, CliError> {
    let values = text
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| CliError::Config(format!("invalid list {text:?} for {key}")))?;
    if values.is_empty() {
        return Err(CliError::Config(format!("empty list for {key}")));
    }
    Ok(values)
}

/// Comma-separated integers and inclusive `lo-hi` ranges.
pub fn parse_usize_list(key: &str, text: &str) -> Result<Vec<usize>, CliError> {
    let bad = || CliError::Config(format!("invalid list {text:?} for {key}"));
    let mut out = Vec::new();
    for part in text.split(',').map(str::trim) {
        match part.split_once('-') {
            Some((lo, hi)) => {
                let lo: usize = lo.trim().parse().map_err(|_| bad())?;
                let hi: usize = hi.trim().parse().map_err(|_| bad())?;
                if lo > hi {
                    return Err(bad());
                }
                out.extend(lo..=hi);
            }
            None => out.push(part.parse().map_err(|_| bad())?),
        }
    }
    Ok(out)
}

pub fn ensure_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path)
        .map_err(|e| CliError::Config(format!("cannot create {}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.cfg");
        fs::write(&cfg, "# comment\nr = 64\nseed=5\nworkers=3\n").unwrap();
        let flags = Flags {
            config: Some(cfg),
            seed: Some("9".into()),
            ..Flags::default()
        };
        let s = Settings::resolve(&flags, Some("2".into())).unwrap();
        assert_eq!(s.raw("r"), Some("64"));
        assert_eq!(s.raw("seed"), Some("9"));
        assert_eq!(s.raw("workers"), Some("3"));
        assert_eq!(s.raw("d-max"), Some("6"));
        let s = Settings::resolve(&Flags::default(), Some("2".into())).unwrap();
        assert_eq!(s.raw("workers"), Some("2"));
        assert!(s.dump().contains("workers=2  # environment"));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.cfg");
        fs::write(&cfg, "colour=blue\n").unwrap();
        let flags = Flags {
            config: Some(cfg),
            ..Flags::default()
        };
        assert!(matches!(Settings::resolve(&flags, None), Err(CliError::Config(_))));
    }

    #[test]
    fn lists() {
        assert_eq!(parse_usize_list("k", "1-3,7").unwrap(), vec![1, 2, 3, 7]);
        assert!(parse_usize_list("k", "3-1").is_err());
        assert_eq!(parse_f64_list("g", "0.1, 1e1").unwrap(), vec![0.1, 10.0]);
    }
}
