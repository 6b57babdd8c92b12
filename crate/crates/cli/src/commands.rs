use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::Instant;

use serde_json::{json, Value};
use wme_core::corpus::{build_document, load_stopwords, tokenize, TokenizedDataset};
use wme_core::learn::{
    accuracy, cross_validate, cross_validate_knn, knn_predict, pearson, per_class_accuracy,
    predict_linear, stratified_split, sts_scores, train_on_features, CvGrid, EvalReport, StsScore,
};
use wme_core::matrix::DenseMatrix;
use wme_core::transport::{wmd_pairwise, wmd_pairwise_symmetric, DistanceCache};
use wme_core::wme::{raw_features, EmbedOptions, RawFeatures};
use wme_core::{Corpus, Document, EmbeddingTable, RandomBasis, RandomBasisSpec, WeightScheme};

use crate::config::{ensure_dir, Settings};
use crate::CliError;

/// Wall-clock measurement that reads zero when timing is disabled, so that
/// reports can be compared byte for byte.
#[derive(Clone, Copy)]
struct Clock {
    enabled: bool,
}

impl Clock {
    fn new(s: &Settings) -> Result<Self, CliError> {
        Ok(Clock {
            enabled: !s.flag("no-timing")?,
        })
    }

    fn since(&self, start: Instant) -> f64 {
        if self.enabled {
            start.elapsed().as_secs_f64()
        } else {
            0.0
        }
    }

    fn count(&self, n: u64) -> u64 {
        if self.enabled {
            n
        } else {
            0
        }
    }
}

fn load_table(s: &Settings) -> Result<EmbeddingTable, CliError> {
    let path = s.existing_path("embeddings")?;
    let table = match s.require::<String>("embeddings-format")?.as_str() {
        "binary" => EmbeddingTable::load_word2vec_binary(&path)?,
        "text" => EmbeddingTable::load_text(&path)?,
        other => {
            return Err(CliError::Config(format!(
                "embeddings-format must be binary or text, got {other:?}"
            )))
        }
    };
    Ok(if s.flag("unit-normalize")? {
        table.unit_normalized()
    } else {
        table
    })
}

fn stopwords(s: &Settings) -> Result<HashSet<String>, CliError> {
    match s.optional_path("stopwords")? {
        Some(p) => Ok(load_stopwords(p)?),
        None => Ok(HashSet::new()),
    }
}

fn load_dataset(s: &Settings) -> Result<TokenizedDataset, CliError> {
    let path = s.existing_path("dataset")?;
    let min_count = s.require::<usize>("min-word-count")?;
    let dataset = TokenizedDataset::load(path, &stopwords(s)?, min_count)?;
    if dataset.is_empty() {
        return Err(CliError::Data("dataset has no records".into()));
    }
    Ok(dataset)
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Weighting {
    Nbow,
    TfIdf,
}

impl Weighting {
    fn parse(s: &Settings) -> Result<Self, CliError> {
        match s.require::<String>("weighting")?.as_str() {
            "nbow" => Ok(Weighting::Nbow),
            "tfidf" => Ok(Weighting::TfIdf),
            other => Err(CliError::Config(format!(
                "weighting must be nbow or tfidf, got {other:?}"
            ))),
        }
    }

    fn name(self) -> &'static str {
        match self {
            Weighting::Nbow => "nbow",
            Weighting::TfIdf => "tfidf",
        }
    }

    /// Scheme whose IDF (if any) is fitted on `fit` records only.
    fn scheme(self, dataset: &TokenizedDataset, fit: &[usize]) -> WeightScheme {
        match self {
            Weighting::Nbow => WeightScheme::Nbow,
            Weighting::TfIdf => WeightScheme::TfIdf(dataset.fit_idf(fit)),
        }
    }
}

fn output_dir(s: &Settings) -> Result<PathBuf, CliError> {
    let dir = PathBuf::from(s.require::<String>("output")?);
    ensure_dir(&dir)?;
    Ok(dir)
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text)
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}

fn write_json(path: &Path, value: &Value) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("JSON value serializes");
    text.push('\n');
    write_text(path, &text)
}

fn embed_options(s: &Settings) -> Result<EmbedOptions, CliError> {
    Ok(EmbedOptions {
        precompute: s.flag("precompute")?,
    })
}

/// Whole-dataset corpus, for commands without a train/test split.
fn full_corpus(
    s: &Settings,
    table: &EmbeddingTable,
) -> Result<(TokenizedDataset, Corpus), CliError> {
    let dataset = load_dataset(s)?;
    let all: Vec<usize> = (0..dataset.len()).collect();
    let scheme = Weighting::parse(s)?.scheme(&dataset, &all);
    let corpus = Corpus::build(&dataset, None, table, &scheme, &dataset.label_names())?;
    Ok((dataset, corpus))
}

fn save_matrix(m: &DenseMatrix, dir: &Path, stem: &str) -> Result<(), CliError> {
    m.save_binary(dir.join(format!("{stem}.bin")))?;
    m.save_tsv(dir.join(format!("{stem}.tsv")))?;
    Ok(())
}

pub fn wmd(s: &Settings) -> Result<(), CliError> {
    let clock = Clock::new(s)?;
    let out = output_dir(s)?;
    let table = load_table(s)?;
    let (dataset, corpus) = full_corpus(s, &table)?;
    let precompute = s.flag("precompute")?;
    let start = Instant::now();
    let cache = precompute.then(|| DistanceCache::for_documents(&table, &[&corpus.documents]));
    let dist = wmd_pairwise_symmetric(&table, &corpus.documents, cache.as_ref())?;
    let seconds = clock.since(start);
    save_matrix(&dist, &out, "distances")?;
    let n = corpus.len();
    let timing = json!({
        "documents": n,
        "pairs": n * n.saturating_sub(1) / 2,
        "dropped_records": corpus.dropped + dataset.malformed,
        "precompute": precompute,
        "seconds": seconds,
        "cache_entries": cache.as_ref().map_or(0, |c| c.len()),
        "cache_hits": clock.count(cache.as_ref().map_or(0, |c| c.hits())),
        "cache_misses": clock.count(cache.as_ref().map_or(0, |c| c.misses())),
    });
    write_json(&out.join("timing.json"), &timing)
}

fn basis_spec(
    s: &Settings,
    table: &EmbeddingTable,
    docs: &[Document],
) -> Result<RandomBasisSpec, CliError> {
    Ok(RandomBasisSpec::for_documents(
        table,
        docs,
        s.require("r")?,
        s.require("d-max")?,
        s.require("gamma")?,
        s.require("seed")?,
        s.flag("mean-centered")?,
    )?)
}

pub fn embed(s: &Settings) -> Result<(), CliError> {
    let clock = Clock::new(s)?;
    let out = output_dir(s)?;
    let table = load_table(s)?;
    let (dataset, corpus) = full_corpus(s, &table)?;
    let spec = match s.optional_path("basis")? {
        Some(p) => RandomBasisSpec::load(p)?,
        None => basis_spec(s, &table, &corpus.documents)?,
    };
    if spec.dim != table.dim() {
        return Err(CliError::Data(format!(
            "basis has dimension {} but the embeddings have {}",
            spec.dim,
            table.dim()
        )));
    }
    let start = Instant::now();
    let basis = RandomBasis::generate(spec)?;
    let z = raw_features(&table, &corpus.documents, &basis, embed_options(s)?)?.scaled()?;
    let seconds = clock.since(start);
    z.save_binary(out.join("features.bin"))?;
    z.save_tsv(out.join("features.tsv"))?;
    basis.spec().save(out.join("basis.cfg"))?;
    let mut rows = String::from("row\trecord\tlabel\n");
    for (i, (&src, &label)) in corpus.source_index.iter().zip(&corpus.labels).enumerate() {
        rows.push_str(&format!("{i}\t{src}\t{}\n", corpus.label_names[label]));
    }
    write_text(&out.join("rows.tsv"), &rows)?;
    write_json(
        &out.join("timing.json"),
        &json!({
            "documents": corpus.len(),
            "dropped_records": corpus.dropped + dataset.malformed,
            "r": basis.len(),
            "seconds": seconds,
        }),
    )
}

/// One stratified train/test split of the dataset.
struct Split {
    train: Corpus,
    test: Corpus,
    dropped: usize,
}

struct Protocol {
    dataset: TokenizedDataset,
    label_names: Vec<String>,
    label_ids: Vec<usize>,
    weighting: Weighting,
    test_fraction: f64,
    seed: u64,
    splits: usize,
    folds: usize,
}

impl Protocol {
    fn load(s: &Settings) -> Result<Self, CliError> {
        let dataset = load_dataset(s)?;
        let label_names = dataset.label_names();
        let index: HashMap<&str, usize> = label_names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.as_str(), i))
            .collect();
        let label_ids = dataset.labels.iter().map(|l| index[l.as_str()]).collect();
        let test_fraction: f64 = s.require("test-fraction")?;
        if !(test_fraction > 0.0 && test_fraction < 1.0) {
            return Err(CliError::Config(format!(
                "test-fraction must lie in (0, 1), got {test_fraction}"
            )));
        }
        let splits: usize = s.require("splits")?;
        if splits == 0 {
            return Err(CliError::Config("splits must be at least 1".into()));
        }
        if label_names.len() < 2 {
            return Err(CliError::Data("dataset has a single label".into()));
        }
        Ok(Protocol {
            dataset,
            label_names,
            label_ids,
            weighting: Weighting::parse(s)?,
            test_fraction,
            seed: s.require("seed")?,
            splits,
            folds: s.require("folds")?,
        })
    }

    fn split(&self, table: &EmbeddingTable, k: usize) -> Result<Split, CliError> {
        let (train_idx, test_idx) =
            stratified_split(&self.label_ids, self.test_fraction, self.seed, k as u64)?;
        if test_idx.is_empty() {
            return Err(CliError::Data("test split is empty".into()));
        }
        let scheme = self.weighting.scheme(&self.dataset, &train_idx);
        let train = Corpus::build(&self.dataset, Some(&train_idx), table, &scheme, &self.label_names)?;
        let test = Corpus::build(&self.dataset, Some(&test_idx), table, &scheme, &self.label_names)?;
        let dropped = train.dropped + test.dropped;
        Ok(Split { train, test, dropped })
    }

    fn summary(&self, reports: &[EvalReport], dropped: usize, extra: Value) -> Value {
        let accuracies: Vec<f64> = reports.iter().map(|r| r.accuracy).collect();
        let (mean, std) = mean_std(&accuracies);
        json!({
            "accuracies": accuracies,
            "mean_accuracy": mean,
            "std_accuracy": std,
            "dropped_records": dropped,
            "malformed_lines": self.dataset.malformed,
            "splits": reports,
            "selection": extra,
        })
    }
}

/// Mean and sample standard deviation (zero for a single value).
fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn labels_of(c: &Corpus) -> &[usize] {
    &c.labels
}

fn write_reports(out: &Path, summary: &Value, reports: &[EvalReport]) -> Result<(), CliError> {
    write_json(&out.join("report.json"), summary)?;
    let mut tsv = String::from("split\taccuracy\ttrain_seconds\ttest_seconds\thyperparameters\n");
    for (k, r) in reports.iter().enumerate() {
        tsv.push_str(&format!("{k}\t{}\n", r.tsv_line()));
    }
    write_text(&out.join("report.tsv"), &tsv)
}

pub fn knn(s: &Settings) -> Result<(), CliError> {
    let clock = Clock::new(s)?;
    let out = output_dir(s)?;
    let table = load_table(s)?;
    let protocol = Protocol::load(s)?;
    let ks = s.usize_list("k-grid")?.unwrap_or_default();
    if ks.is_empty() || ks.contains(&0) {
        return Err(CliError::Config("k-grid must hold positive integers".into()));
    }
    let precompute = s.flag("precompute")?;
    let mut reports = Vec::new();
    let mut selections = Vec::new();
    let mut dropped = 0;
    for k in 0..protocol.splits {
        let split = protocol.split(&table, k)?;
        dropped += split.dropped;
        let (train, test) = (&split.train, &split.test);
        let start = Instant::now();
        let cache = precompute
            .then(|| DistanceCache::for_documents(&table, &[&train.documents, &test.documents]));
        let d_train = wmd_pairwise_symmetric(&table, &train.documents, cache.as_ref())?;
        let candidates: Vec<usize> = ks.iter().copied().filter(|&c| c < train.len()).collect();
        let candidates = if candidates.is_empty() { vec![1] } else { candidates };
        let cv = cross_validate_knn(labels_of(train), &d_train, &candidates, protocol.folds, protocol.seed)?;
        let train_seconds = clock.since(start);

        let start = Instant::now();
        let d_test = wmd_pairwise(&table, &test.documents, &train.documents, cache.as_ref())?;
        let predicted = knn_predict(labels_of(train), &d_test, cv.best_k.min(train.len()))?;
        let test_seconds = clock.since(start);
        d_test.save_binary(out.join(format!("knn_test_train_{k}.bin")))?;

        let mut hyperparameters = BTreeMap::new();
        hyperparameters.insert("k".to_owned(), json!(cv.best_k));
        hyperparameters.insert("folds".to_owned(), json!(cv.folds));
        hyperparameters.insert("folds_reduced".to_owned(), json!(cv.folds_reduced));
        hyperparameters.insert("weighting".to_owned(), json!(protocol.weighting.name()));
        reports.push(EvalReport {
            accuracy: accuracy(&predicted, &test.labels),
            per_class: per_class_accuracy(&predicted, &test.labels, &protocol.label_names),
            train_seconds,
            test_seconds,
            hyperparameters,
        });
        selections.push(json!({"cv_accuracy": cv.best_score, "scores": cv.scores}));
    }
    let summary = protocol.summary(&reports, dropped, json!(selections));
    write_reports(&out, &summary, &reports)
}

/// Unscaled features per `(gamma, D_max)`, sampled at `r_max` random
/// documents and sliced to smaller `R` on demand. Without `retain`, nothing
/// is kept and repeated requests recompute identical features.
struct FeatureStore<'a> {
    table: &'a EmbeddingTable,
    docs: &'a [Document],
    base: RandomBasisSpec,
    options: EmbedOptions,
    retain: bool,
    cache: Mutex<HashMap<(u64, usize), Arc<RawFeatures>>>,
}

impl<'a> FeatureStore<'a> {
    fn new(
        table: &'a EmbeddingTable,
        docs: &'a [Document],
        base: RandomBasisSpec,
        options: EmbedOptions,
        retain: bool,
    ) -> Self {
        FeatureStore {
            table,
            docs,
            base,
            options,
            retain,
            cache: Mutex::new(HashMap::new()),
        }
    }

    fn raw(&self, gamma: f64, d_max: usize) -> wme_core::Result<Arc<RawFeatures>> {
        let key = (gamma.to_bits(), d_max);
        if let Some(hit) = self.cache.lock().expect("store lock").get(&key) {
            return Ok(hit.clone());
        }
        let basis = RandomBasis::generate(self.base.with_gamma(gamma).with_d_max(d_max))?;
        let raw = Arc::new(raw_features(self.table, self.docs, &basis, self.options)?);
        if self.retain {
            self.cache.lock().expect("store lock").insert(key, raw.clone());
        }
        Ok(raw)
    }
}

struct WmeSplit<'a> {
    split: &'a Split,
    train: FeatureStore<'a>,
    test: FeatureStore<'a>,
    n_classes: usize,
}

impl<'a> WmeSplit<'a> {
    fn new(
        s: &Settings,
        table: &'a EmbeddingTable,
        split: &'a Split,
        n_classes: usize,
        r_max: usize,
        retain: bool,
    ) -> Result<Self, CliError> {
        // The sampling box covers every word of the run, train and test alike.
        let all: Vec<Document> = split
            .train
            .documents
            .iter()
            .chain(&split.test.documents)
            .cloned()
            .collect();
        let base = basis_spec(s, table, &all)?.with_r(r_max);
        let options = embed_options(s)?;
        Ok(WmeSplit {
            split,
            train: FeatureStore::new(table, &split.train.documents, base.clone(), options, retain),
            test: FeatureStore::new(table, &split.test.documents, base, options, retain),
            n_classes,
        })
    }

    /// CV on the train part, final fit, and test evaluation at `R = r`.
    fn evaluate(
        &self,
        r: usize,
        grid: &CvGrid,
        seed: u64,
        clock: Clock,
        label_names: &[String],
    ) -> Result<(EvalReport, f64, f64), CliError> {
        let train_labels = labels_of(&self.split.train);
        let test_labels = labels_of(&self.split.test);
        let start = Instant::now();
        let cv = cross_validate(train_labels, self.n_classes, grid, seed, |g, d| {
            self.train.raw(g, d)?.scaled_prefix(r)
        })?;
        let best = cv.best;
        let z_train = self.train.raw(best.gamma, best.d_max)?.scaled_prefix(r)?;
        let model = train_on_features(&z_train, train_labels, self.n_classes, best.c)?;
        let train_seconds = clock.since(start);
        let train_accuracy = accuracy(&predict_linear(&model, z_train.as_slice())?, train_labels);

        let start = Instant::now();
        let z_test = self.test.raw(best.gamma, best.d_max)?.scaled_prefix(r)?;
        let predicted = predict_linear(&model, z_test.as_slice())?;
        let test_seconds = clock.since(start);

        let mut hp = BTreeMap::new();
        hp.insert("gamma".to_owned(), json!(best.gamma));
        hp.insert("d_max".to_owned(), json!(best.d_max));
        hp.insert("c".to_owned(), json!(best.c));
        hp.insert("r".to_owned(), json!(r));
        hp.insert("seed".to_owned(), json!(self.train.base.seed));
        hp.insert("folds".to_owned(), json!(cv.folds));
        hp.insert("folds_reduced".to_owned(), json!(cv.folds_reduced));
        hp.insert("mean_centered".to_owned(), json!(self.train.base.center.is_some()));
        let report = EvalReport {
            accuracy: accuracy(&predicted, test_labels),
            per_class: per_class_accuracy(&predicted, test_labels, label_names),
            train_seconds,
            test_seconds,
            hyperparameters: hp,
        };
        Ok((report, cv.best_score, train_accuracy))
    }
}

fn grid(s: &Settings, folds: usize) -> Result<CvGrid, CliError> {
    let gammas = match s.f64_list("gammas")? {
        Some(g) => g,
        None => vec![s.require("gamma")?],
    };
    let d_maxes = match s.usize_list("d-maxes")? {
        Some(d) => d,
        None => vec![s.require("d-max")?],
    };
    let cs = s.f64_list("cs")?.unwrap_or_else(|| vec![1.0]);
    if gammas.iter().any(|g| !(*g > 0.0 && g.is_finite())) {
        return Err(CliError::Config("gammas must be positive".into()));
    }
    if d_maxes.contains(&0) {
        return Err(CliError::Config("d-maxes must be positive".into()));
    }
    if cs.iter().any(|c| !(*c > 0.0 && c.is_finite())) {
        return Err(CliError::Config("cs must be positive".into()));
    }
    let grid = CvGrid {
        gammas,
        d_maxes,
        cs,
        folds,
    };
    grid.validate()?;
    Ok(grid)
}

pub fn train_eval(s: &Settings) -> Result<(), CliError> {
    let clock = Clock::new(s)?;
    let out = output_dir(s)?;
    let table = load_table(s)?;
    let protocol = Protocol::load(s)?;
    let grid = grid(s, protocol.folds)?;
    let r: usize = s.require("r")?;
    let mut reports = Vec::new();
    let mut selections = Vec::new();
    let mut dropped = 0;
    for k in 0..protocol.splits {
        let split = protocol.split(&table, k)?;
        dropped += split.dropped;
        let run = WmeSplit::new(s, &table, &split, protocol.label_names.len(), r, false)?;
        let (report, cv_accuracy, train_accuracy) =
            run.evaluate(r, &grid, protocol.seed, clock, &protocol.label_names)?;
        reports.push(report);
        selections.push(json!({"cv_accuracy": cv_accuracy, "train_accuracy": train_accuracy}));
    }
    let summary = protocol.summary(&reports, dropped, json!(selections));
    write_reports(&out, &summary, &reports)
}

pub fn sweep(s: &Settings) -> Result<(), CliError> {
    let clock = Clock::new(s)?;
    let out = output_dir(s)?;
    let table = load_table(s)?;
    let protocol = Protocol::load(s)?;
    let axis = s.require::<String>("sweep")?;
    if axis != "r" && axis != "d-max" {
        return Err(CliError::Config(format!("sweep must be r or d-max, got {axis:?}")));
    }
    let values = s
        .usize_list("values")?
        .ok_or_else(|| CliError::Config("sweep needs values".into()))?;
    if values.is_empty() || values.contains(&0) {
        return Err(CliError::Config("sweep values must be positive".into()));
    }
    let base_grid = grid(s, protocol.folds)?;
    let r_default: usize = s.require("r")?;
    let r_max = if axis == "r" {
        *values.iter().max().expect("non-empty")
    } else {
        r_default
    };

    // rows[v][split] = (cv, train, test)
    let mut rows = vec![Vec::new(); values.len()];
    for k in 0..protocol.splits {
        let split = protocol.split(&table, k)?;
        let run = WmeSplit::new(s, &table, &split, protocol.label_names.len(), r_max, true)?;
        for (vi, &v) in values.iter().enumerate() {
            let (r, grid) = if axis == "r" {
                (v, base_grid.clone())
            } else {
                let mut g = base_grid.clone();
                g.d_maxes = vec![v];
                (r_default, g)
            };
            let (report, cv, train) = run.evaluate(r, &grid, protocol.seed, clock, &protocol.label_names)?;
            rows[vi].push((cv, train, report.accuracy));
        }
    }
    let mut tsv = format!(
        "{axis}\tcv_accuracy\ttrain_accuracy\ttest_accuracy\ttest_std\n"
    );
    for (v, cells) in values.iter().zip(&rows) {
        let cv: Vec<f64> = cells.iter().map(|c| c.0).collect();
        let tr: Vec<f64> = cells.iter().map(|c| c.1).collect();
        let te: Vec<f64> = cells.iter().map(|c| c.2).collect();
        let (te_mean, te_std) = mean_std(&te);
        tsv.push_str(&format!(
            "{v}\t{}\t{}\t{te_mean}\t{te_std}\n",
            mean_std(&cv).0,
            mean_std(&tr).0
        ));
    }
    write_text(&out.join("sweep.tsv"), &tsv)
}

struct StsFile {
    path: PathBuf,
    gold: Vec<f64>,
    pairs: Vec<(Option<Document>, Option<Document>)>,
    malformed: usize,
}

fn read_sts(
    path: &Path,
    table: &EmbeddingTable,
    stop: &HashSet<String>,
    weighting: Weighting,
) -> Result<StsFile, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    let mut gold = Vec::new();
    let mut sentences = Vec::new();
    let mut malformed = 0;
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let fields: Vec<&str> = line.split('\t').collect();
        match (fields.len(), fields.first().and_then(|f| f.trim().parse::<f64>().ok())) {
            (3, Some(score)) if score.is_finite() => {
                gold.push(score);
                sentences.push((tokenize(fields[1], stop), tokenize(fields[2], stop)));
            }
            _ => malformed += 1,
        }
    }
    let scheme = match weighting {
        Weighting::Nbow => WeightScheme::Nbow,
        Weighting::TfIdf => {
            let docs: Vec<Vec<String>> = sentences
                .iter()
                .flat_map(|(a, b)| [a.clone(), b.clone()])
                .collect();
            WeightScheme::TfIdf(wme_core::Idf::fit(&docs))
        }
    };
    let build = |tokens: &[String]| match build_document(tokens, table, &scheme) {
        Ok(d) => Ok(Some(d)),
        Err(wme_core::Error::EmptyDocument { .. }) => Ok(None),
        Err(e) => Err(CliError::from(e)),
    };
    let pairs = sentences
        .iter()
        .map(|(a, b)| Ok((build(a)?, build(b)?)))
        .collect::<Result<Vec<_>, CliError>>()?;
    Ok(StsFile {
        path: path.to_owned(),
        gold,
        pairs,
        malformed,
    })
}

pub fn sts(s: &Settings) -> Result<(), CliError> {
    let out = output_dir(s)?;
    let table = load_table(s)?;
    let stop = stopwords(s)?;
    let weighting = Weighting::parse(s)?;
    let score = match s.require::<String>("score")?.as_str() {
        "cosine" => StsScore::Cosine,
        "inner" => StsScore::InnerProduct,
        other => {
            return Err(CliError::Config(format!("score must be cosine or inner, got {other:?}")))
        }
    };
    let list = s.require::<String>("sts")?;
    let mut files = Vec::new();
    for p in list.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let path = PathBuf::from(p);
        if !path.exists() {
            return Err(CliError::Config(format!("sts: {p} does not exist")));
        }
        files.push(read_sts(&path, &table, &stop, weighting)?);
    }
    if files.is_empty() {
        return Err(CliError::Config("sts needs at least one file".into()));
    }
    let spec = match s.optional_path("basis")? {
        Some(p) => RandomBasisSpec::load(p)?,
        None => {
            let docs: Vec<Document> = files
                .iter()
                .flat_map(|f| f.pairs.iter())
                .flat_map(|(a, b)| a.iter().chain(b.iter()).cloned())
                .collect();
            if docs.is_empty() {
                return Err(CliError::Data("no sentence has an in-vocabulary word".into()));
            }
            basis_spec(s, &table, &docs)?
        }
    };
    let basis = RandomBasis::generate(spec)?;
    let options = embed_options(s)?;

    let mut reports = Vec::new();
    let mut correlations = Vec::new();
    let mut tsv = String::from("file\tpair\tgold\tscore\n");
    for (fi, file) in files.iter().enumerate() {
        let mut entry = json!({
            "path": file.path.display().to_string(),
            "pairs": file.pairs.len(),
            "malformed_lines": file.malformed,
        });
        let outcome = sts_scores(&table, &file.pairs, &basis, score, options)
            .map_err(CliError::from)
            .and_then(|scores| {
                let mut pred = Vec::new();
                let mut gold = Vec::new();
                for (pi, sc) in scores.scores.iter().enumerate() {
                    if let Some(v) = sc {
                        tsv.push_str(&format!("{fi}\t{pi}\t{}\t{v}\n", file.gold[pi]));
                        pred.push(*v);
                        gold.push(file.gold[pi]);
                    }
                }
                entry["excluded"] = json!(scores.excluded);
                pearson(&pred, &gold).map_err(CliError::from)
            });
        match outcome {
            Ok(r) => {
                entry["pearson"] = json!(r);
                correlations.push(r);
            }
            Err(e) => entry["error"] = json!(e.to_string()),
        }
        reports.push(entry);
    }
    let average = (!correlations.is_empty())
        .then(|| correlations.iter().sum::<f64>() / correlations.len() as f64);
    write_json(
        &out.join("sts_report.json"),
        &json!({"files": reports, "average_pearson": average}),
    )?;
    write_text(&out.join("sts_scores.tsv"), &tsv)?;
    if correlations.is_empty() {
        return Err(CliError::Data(
            "Pearson correlation is undefined for every file".into(),
        ));
    }
    Ok(())
}
