//! Classifiers, model selection and evaluation metrics.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::Serialize;

use crate::corpus::Document;
use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::rng::{substream, Domain};
use crate::wme::{approx_kernel, cosine, embed_with_basis, EmbedOptions, FeatureMatrix, RandomBasis};

/// Majority vote among the `k` nearest training points of each test row of
/// `dist` (`test x train`).
///
/// Neighbors are ordered by distance, then by training index. Vote ties go to
/// the class with the smallest summed neighbor distance, then the lowest
/// label id.
pub fn knn_predict(train_labels: &[usize], dist: &DenseMatrix, k: usize) -> Result<Vec<usize>> {
    if dist.cols() != train_labels.len() {
        return Err(Error::DimensionMismatch(format!(
            "distance matrix has {} columns for {} training labels",
            dist.cols(),
            train_labels.len()
        )));
    }
    if k == 0 || k > train_labels.len() {
        return Err(Error::InvalidParameter(format!(
            "k = {k} outside [1, {}]",
            train_labels.len()
        )));
    }
    if dist.as_slice().iter().any(|d| !d.is_finite()) {
        return Err(Error::InvalidParameter("distances must be finite".into()));
    }
    let n_classes = train_labels.iter().max().map_or(0, |&m| m + 1);
    let mut order: Vec<usize> = (0..train_labels.len()).collect();
    let mut votes = vec![0usize; n_classes];
    let mut mass = vec![0.0f64; n_classes];
    let mut out = Vec::with_capacity(dist.rows());
    for t in 0..dist.rows() {
        let row = dist.row(t);
        let by_distance = |a: &usize, b: &usize| row[*a].total_cmp(&row[*b]).then(a.cmp(b));
        if k < order.len() {
            order.select_nth_unstable_by(k - 1, by_distance);
        }
        order[..k].sort_unstable_by(by_distance);

        votes.iter_mut().for_each(|v| *v = 0);
        mass.iter_mut().for_each(|m| *m = 0.0);
        for &i in &order[..k] {
            votes[train_labels[i]] += 1;
            mass[train_labels[i]] += row[i];
        }
        let mut best = usize::MAX;
        for c in 0..n_classes {
            if votes[c] == 0 {
                continue;
            }
            let better = best == usize::MAX
                || votes[c] > votes[best]
                || (votes[c] == votes[best] && mass[c] < mass[best]);
            if better {
                best = c;
            }
        }
        out.push(best);
        order.sort_unstable();
    }
    Ok(out)
}

/// One-vs-rest L2-regularized logistic regression.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LinearModel {
    pub n_features: usize,
    /// `n_classes x n_features`, row-major.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    /// Classes that had training examples; absent classes are never predicted.
    pub present: Vec<bool>,
    pub reg_c: f64,
    /// Objective value of each class's problem after every Newton step.
    pub history: Vec<Vec<f64>>,
    /// Embedding parameters of the training features, when known.
    pub features: Option<FeatureProvenance>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FeatureProvenance {
    pub gamma: f64,
    pub d_max: u32,
    pub seed: u64,
}

impl LinearModel {
    pub fn n_classes(&self) -> usize {
        self.bias.len()
    }

    pub fn class_weights(&self, c: usize) -> &[f64] {
        &self.weights[c * self.n_features..(c + 1) * self.n_features]
    }

    pub fn scores(&self, row: &[f64]) -> Vec<f64> {
        (0..self.n_classes())
            .map(|c| dot(self.class_weights(c), row) + self.bias[c])
            .collect()
    }
}

/// Trainer settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainOptions {
    pub gradient_tolerance: f64,
    pub max_epochs: usize,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            gradient_tolerance: 1e-6,
            max_epochs: 1000,
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `log(1 + exp(-z))` without overflow.
fn log_loss(z: f64) -> f64 {
    if z > 0.0 {
        (-z).exp().ln_1p()
    } else {
        -z + z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Binary problem `0.5 ||w||^2 + (C / N) sum_i log(1 + exp(-y_i (w.x_i + b)))`.
/// The bias is not regularized. Parameters are `[w; b]`.
pub struct BinaryLogistic<'a> {
    rows: &'a [f64],
    n_features: usize,
    targets: Vec<f64>,
    scale: f64,
}

impl<'a> BinaryLogistic<'a> {
    pub fn new(rows: &'a [f64], n_features: usize, targets: Vec<f64>, reg_c: f64) -> Self {
        let scale = reg_c / targets.len() as f64;
        BinaryLogistic {
            rows,
            n_features,
            targets,
            scale,
        }
    }

    fn margin(&self, theta: &[f64], i: usize) -> f64 {
        let p = self.n_features;
        dot(&theta[..p], &self.rows[i * p..(i + 1) * p]) + theta[p]
    }

    pub fn objective(&self, theta: &[f64]) -> f64 {
        let p = self.n_features;
        let reg = 0.5 * dot(&theta[..p], &theta[..p]);
        let loss: f64 = (0..self.targets.len())
            .map(|i| log_loss(self.targets[i] * self.margin(theta, i)))
            .sum();
        reg + self.scale * loss
    }

    /// Gradient, plus the per-example curvature `s_i (1 - s_i)`.
    pub fn gradient(&self, theta: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let p = self.n_features;
        let mut g = theta.to_vec();
        g[p] = 0.0;
        let mut curvature = Vec::with_capacity(self.targets.len());
        for (i, &y) in self.targets.iter().enumerate() {
            let s = sigmoid(y * self.margin(theta, i));
            let coef = -self.scale * (1.0 - s) * y;
            for (gk, xk) in g[..p].iter_mut().zip(&self.rows[i * p..(i + 1) * p]) {
                *gk += coef * xk;
            }
            g[p] += coef;
            curvature.push(s * (1.0 - s));
        }
        (g, curvature)
    }

    fn hessian_product(&self, curvature: &[f64], v: &[f64]) -> Vec<f64> {
        let p = self.n_features;
        let mut out = v.to_vec();
        out[p] = 0.0;
        for (i, &d) in curvature.iter().enumerate() {
            let x = &self.rows[i * p..(i + 1) * p];
            let coef = self.scale * d * (dot(x, &v[..p]) + v[p]);
            for (o, xk) in out[..p].iter_mut().zip(x) {
                *o += coef * xk;
            }
            out[p] += coef;
        }
        out
    }

    /// Newton-CG with Armijo backtracking from `theta = 0`.
    pub fn minimize(&self, options: TrainOptions) -> (Vec<f64>, Vec<f64>) {
        let dim = self.n_features + 1;
        let mut theta = vec![0.0; dim];
        let mut value = self.objective(&theta);
        let mut history = vec![value];
        for _ in 0..options.max_epochs {
            let (g, curvature) = self.gradient(&theta);
            let g_norm = dot(&g, &g).sqrt();
            if g_norm <= options.gradient_tolerance {
                break;
            }
            let step = conjugate_gradient(
                |v| self.hessian_product(&curvature, v),
                &g,
                (0.5f64).min(g_norm.sqrt()) * g_norm,
                250.max(2 * dim).min(1000),
            );
            let slope = dot(&g, &step);
            if slope >= 0.0 {
                break;
            }
            let mut t = 1.0;
            let mut accepted = None;
            for _ in 0..60 {
                let trial: Vec<f64> = theta.iter().zip(&step).map(|(a, s)| a + t * s).collect();
                let trial_value = self.objective(&trial);
                if trial_value <= value + 1e-4 * t * slope {
                    accepted = Some((trial, trial_value));
                    break;
                }
                t *= 0.5;
            }
            match accepted {
                Some((trial, trial_value)) => {
                    theta = trial;
                    value = trial_value;
                    history.push(value);
                }
                None => break,
            }
        }
        (theta, history)
    }
}

/// Approximately solves `H s = -g` for positive semidefinite `H`.
fn conjugate_gradient(
    hv: impl Fn(&[f64]) -> Vec<f64>,
    g: &[f64],
    tolerance: f64,
    max_iter: usize,
) -> Vec<f64> {
    let mut s = vec![0.0; g.len()];
    let mut r: Vec<f64> = g.iter().map(|x| -x).collect();
    let mut d = r.clone();
    let mut rr = dot(&r, &r);
    for _ in 0..max_iter {
        if rr.sqrt() <= tolerance {
            break;
        }
        let hd = hv(&d);
        let dhd = dot(&d, &hd);
        if dhd <= 0.0 {
            break;
        }
        let alpha = rr / dhd;
        for k in 0..s.len() {
            s[k] += alpha * d[k];
            r[k] -= alpha * hd[k];
        }
        let rr_next = dot(&r, &r);
        let beta = rr_next / rr;
        rr = rr_next;
        for k in 0..d.len() {
            d[k] = r[k] + beta * d[k];
        }
    }
    if s.iter().all(|&x| x == 0.0) {
        // Fall back to steepest descent when CG made no progress.
        return g.iter().map(|x| -x).collect();
    }
    s
}

/// Trains a one-vs-rest model on row-major `rows` (`labels.len() x n_features`).
pub fn train_linear(
    rows: &[f64],
    n_features: usize,
    labels: &[usize],
    n_classes: usize,
    reg_c: f64,
    options: TrainOptions,
) -> Result<LinearModel> {
    let n = labels.len();
    if n_features == 0 || rows.len() != n * n_features {
        return Err(Error::DimensionMismatch(format!(
            "{} values for {n} rows of {n_features} features",
            rows.len()
        )));
    }
    if !(reg_c > 0.0 && reg_c.is_finite()) {
        return Err(Error::InvalidParameter(format!("C must be positive, got {reg_c}")));
    }
    if rows.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParameter("features must be finite".into()));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= n_classes) {
        return Err(Error::InvalidParameter(format!(
            "label {bad} outside {n_classes} classes"
        )));
    }
    let mut present = vec![false; n_classes];
    for &l in labels {
        present[l] = true;
    }
    if present.iter().filter(|&&p| p).count() < 2 {
        return Err(Error::SingleClass);
    }

    let mut weights = vec![0.0; n_classes * n_features];
    let mut bias = vec![0.0; n_classes];
    let mut history = vec![Vec::new(); n_classes];
    for c in (0..n_classes).filter(|&c| present[c]) {
        let targets = labels
            .iter()
            .map(|&l| if l == c { 1.0 } else { -1.0 })
            .collect();
        let problem = BinaryLogistic::new(rows, n_features, targets, reg_c);
        let (theta, trace) = problem.minimize(options);
        weights[c * n_features..(c + 1) * n_features].copy_from_slice(&theta[..n_features]);
        bias[c] = theta[n_features];
        history[c] = trace;
    }
    if weights.iter().chain(&bias).any(|x| !x.is_finite()) {
        return Err(Error::Numerical("non-finite model parameters".into()));
    }
    Ok(LinearModel {
        n_features,
        weights,
        bias,
        present,
        reg_c,
        history,
        features: None,
    })
}

/// [`train_linear`] on a feature matrix, recording its embedding parameters.
pub fn train_on_features(
    z: &FeatureMatrix,
    labels: &[usize],
    n_classes: usize,
    reg_c: f64,
) -> Result<LinearModel> {
    let mut model = train_linear(z.as_slice(), z.cols(), labels, n_classes, reg_c, TrainOptions::default())?;
    model.features = Some(FeatureProvenance {
        gamma: z.gamma,
        d_max: z.d_max,
        seed: z.seed,
    });
    Ok(model)
}

/// `argmax_c w_c.z + b_c` per row; ties go to the lower label id.
pub fn predict_linear(model: &LinearModel, rows: &[f64]) -> Result<Vec<usize>> {
    let p = model.n_features;
    if !rows.len().is_multiple_of(p) {
        return Err(Error::DimensionMismatch(format!(
            "{} values are not rows of {p} features",
            rows.len()
        )));
    }
    Ok(rows
        .chunks_exact(p)
        .map(|row| {
            let scores = model.scores(row);
            let mut best = usize::MAX;
            for c in 0..scores.len() {
                if model.present[c] && (best == usize::MAX || scores[c] > scores[best]) {
                    best = c;
                }
            }
            best
        })
        .collect())
}

pub fn accuracy(predicted: &[usize], truth: &[usize]) -> f64 {
    if truth.is_empty() {
        return 0.0;
    }
    let correct = predicted.iter().zip(truth).filter(|(p, t)| p == t).count();
    correct as f64 / truth.len() as f64
}

/// Fraction of each present class's examples that were predicted correctly.
pub fn per_class_accuracy(
    predicted: &[usize],
    truth: &[usize],
    label_names: &[String],
) -> BTreeMap<String, f64> {
    let mut totals = vec![(0usize, 0usize); label_names.len()];
    for (&p, &t) in predicted.iter().zip(truth) {
        totals[t].1 += 1;
        if p == t {
            totals[t].0 += 1;
        }
    }
    totals
        .iter()
        .enumerate()
        .filter(|(_, (_, n))| *n > 0)
        .map(|(c, &(ok, n))| (label_names[c].clone(), ok as f64 / n as f64))
        .collect()
}

/// Stratified fold assignment.
#[derive(Clone, Debug, PartialEq)]
pub struct Folds {
    /// Held-out indices of each fold, ascending.
    pub folds: Vec<Vec<usize>>,
    pub requested: usize,
    /// True when the smallest class had fewer members than requested folds.
    pub reduced: bool,
}

impl Folds {
    pub fn len(&self) -> usize {
        self.folds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.folds.is_empty()
    }

    /// `(train, held_out)` indices of fold `f`.
    pub fn split(&self, f: usize) -> (Vec<usize>, Vec<usize>) {
        let mut train: Vec<usize> = self
            .folds
            .iter()
            .enumerate()
            .filter(|&(g, _)| g != f)
            .flat_map(|(_, idx)| idx.iter().copied())
            .collect();
        train.sort_unstable();
        (train, self.folds[f].clone())
    }
}

/// Seeded stratified folds. When a class has fewer members than `k`, the
/// fold count is reduced to that class size (but never below 2).
pub fn stratified_folds(labels: &[usize], k: usize, seed: u64) -> Result<Folds> {
    if k < 2 {
        return Err(Error::InvalidParameter("need at least 2 folds".into()));
    }
    if k > labels.len() {
        return Err(Error::InvalidParameter(format!(
            "{k} folds for {} examples",
            labels.len()
        )));
    }
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for &l in labels {
        *counts.entry(l).or_insert(0) += 1;
    }
    let smallest = counts.values().copied().min().unwrap_or(0);
    let effective = if smallest < k { smallest.max(2) } else { k };

    let mut order: Vec<usize> = (0..labels.len()).collect();
    order.shuffle(&mut substream(seed, Domain::Folds, 0));
    // Stable sort by class keeps the shuffled order within each class.
    order.sort_by_key(|&i| labels[i]);
    let mut folds = vec![Vec::new(); effective];
    for (pos, &i) in order.iter().enumerate() {
        folds[pos % effective].push(i);
    }
    for f in folds.iter_mut() {
        f.sort_unstable();
    }
    Ok(Folds {
        folds,
        requested: k,
        reduced: effective < k,
    })
}

/// Seeded stratified train/test split; `split` selects an independent stream.
/// Returns ascending `(train, test)` indices.
pub fn stratified_split(
    labels: &[usize],
    test_fraction: f64,
    seed: u64,
    split: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(0.0..1.0).contains(&test_fraction) {
        return Err(Error::InvalidParameter(format!(
            "test fraction {test_fraction} outside [0, 1)"
        )));
    }
    let mut rng = substream(seed, Domain::Split, split);
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        by_class.entry(l).or_default().push(i);
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for members in by_class.values_mut() {
        members.shuffle(&mut rng);
        let n = members.len();
        let n_test = ((n as f64 * test_fraction).round() as usize).min(n.saturating_sub(1));
        test.extend_from_slice(&members[..n_test]);
        train.extend_from_slice(&members[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Hyperparameter grid for WME + linear classifier.
#[derive(Clone, Debug, PartialEq)]
pub struct CvGrid {
    pub gammas: Vec<f64>,
    pub d_maxes: Vec<usize>,
    pub cs: Vec<f64>,
    pub folds: usize,
}

impl CvGrid {
    pub fn validate(&self) -> Result<()> {
        if self.gammas.is_empty() || self.d_maxes.is_empty() || self.cs.is_empty() {
            return Err(Error::InvalidParameter("grid axes must be non-empty".into()));
        }
        if self.folds < 2 {
            return Err(Error::InvalidParameter("need at least 2 folds".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GridPoint {
    pub gamma: f64,
    pub d_max: usize,
    pub c: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridScore {
    pub point: GridPoint,
    pub fold_accuracies: Vec<f64>,
    pub mean_accuracy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CvOutcome {
    pub best: GridPoint,
    pub best_score: f64,
    pub scores: Vec<GridScore>,
    pub folds: usize,
    pub folds_reduced: bool,
}

/// Grid search with stratified k-fold CV. `embed` maps `(gamma, d_max)` to
/// features for all `labels.len()` training documents. The winner maximizes
/// mean fold accuracy; ties go to smaller `D_max`, then `gamma`, then `C`.
pub fn cross_validate<F>(
    labels: &[usize],
    n_classes: usize,
    grid: &CvGrid,
    seed: u64,
    embed: F,
) -> Result<CvOutcome>
where
    F: Fn(f64, usize) -> Result<FeatureMatrix>,
{
    grid.validate()?;
    let folds = stratified_folds(labels, grid.folds, seed)?;
    let mut d_maxes = grid.d_maxes.clone();
    d_maxes.sort_unstable();
    d_maxes.dedup();
    let mut gammas = grid.gammas.clone();
    gammas.sort_by(f64::total_cmp);
    gammas.dedup();
    let mut cs = grid.cs.clone();
    cs.sort_by(f64::total_cmp);
    cs.dedup();

    let mut scores = Vec::new();
    for &d_max in &d_maxes {
        for &gamma in &gammas {
            let z = embed(gamma, d_max)?;
            if z.rows() != labels.len() {
                return Err(Error::DimensionMismatch(format!(
                    "embedding returned {} rows for {} labels",
                    z.rows(),
                    labels.len()
                )));
            }
            let jobs: Vec<(usize, usize)> = (0..cs.len())
                .flat_map(|ci| (0..folds.len()).map(move |f| (ci, f)))
                .collect();
            let results = jobs
                .par_iter()
                .map(|&(ci, f)| {
                    let (train, held) = folds.split(f);
                    let tr = z.select_rows(&train);
                    let te = z.select_rows(&held);
                    let tr_labels: Vec<usize> = train.iter().map(|&i| labels[i]).collect();
                    let te_labels: Vec<usize> = held.iter().map(|&i| labels[i]).collect();
                    let model = train_on_features(&tr, &tr_labels, n_classes, cs[ci])?;
                    let predicted = predict_linear(&model, te.as_slice())?;
                    Ok(accuracy(&predicted, &te_labels))
                })
                .collect::<Result<Vec<f64>>>()?;
            for (ci, &c) in cs.iter().enumerate() {
                let fold_accuracies = results[ci * folds.len()..(ci + 1) * folds.len()].to_vec();
                let mean_accuracy = fold_accuracies.iter().sum::<f64>() / folds.len() as f64;
                scores.push(GridScore {
                    point: GridPoint { gamma, d_max, c },
                    fold_accuracies,
                    mean_accuracy,
                });
            }
        }
    }
    let best = scores
        .iter()
        .fold(None::<&GridScore>, |acc, s| match acc {
            Some(b) if b.mean_accuracy >= s.mean_accuracy => Some(b),
            _ => Some(s),
        })
        .expect("non-empty grid");
    Ok(CvOutcome {
        best: best.point,
        best_score: best.mean_accuracy,
        folds: folds.len(),
        folds_reduced: folds.reduced,
        scores,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KnnCvOutcome {
    pub best_k: usize,
    pub best_score: f64,
    /// `(k, mean fold accuracy)` for every candidate.
    pub scores: Vec<(usize, f64)>,
    pub folds: usize,
    pub folds_reduced: bool,
}

/// Selects `k` by stratified CV on a `train x train` distance matrix. Ties go
/// to the smaller `k`.
pub fn cross_validate_knn(
    labels: &[usize],
    dist: &DenseMatrix,
    ks: &[usize],
    folds: usize,
    seed: u64,
) -> Result<KnnCvOutcome> {
    if ks.is_empty() {
        return Err(Error::InvalidParameter("empty k grid".into()));
    }
    if dist.rows() != labels.len() || dist.cols() != labels.len() {
        return Err(Error::DimensionMismatch(
            "need a square train x train distance matrix".into(),
        ));
    }
    let folds = stratified_folds(labels, folds, seed)?;
    let mut ks = ks.to_vec();
    ks.sort_unstable();
    ks.dedup();
    let mut sums = vec![0.0; ks.len()];
    let mut counted = vec![0usize; ks.len()];
    for f in 0..folds.len() {
        let (train, held) = folds.split(f);
        let sub = dist.select(&held, &train);
        let tr_labels: Vec<usize> = train.iter().map(|&i| labels[i]).collect();
        let te_labels: Vec<usize> = held.iter().map(|&i| labels[i]).collect();
        for (ki, &k) in ks.iter().enumerate() {
            let k_eff = k.min(train.len());
            let predicted = knn_predict(&tr_labels, &sub, k_eff)?;
            sums[ki] += accuracy(&predicted, &te_labels);
            counted[ki] += 1;
        }
    }
    let scores: Vec<(usize, f64)> = ks
        .iter()
        .zip(sums.iter().zip(&counted))
        .map(|(&k, (&s, &n))| (k, s / n as f64))
        .collect();
    let (best_k, best_score) = scores
        .iter()
        .copied()
        .fold(None::<(usize, f64)>, |acc, s| match acc {
            Some(b) if b.1 >= s.1 => Some(b),
            _ => Some(s),
        })
        .expect("non-empty k grid");
    Ok(KnnCvOutcome {
        best_k,
        best_score,
        scores,
        folds: folds.len(),
        folds_reduced: folds.reduced,
    })
}

/// Test accuracy, timings and the selected hyperparameters of one run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub per_class: BTreeMap<String, f64>,
    pub train_seconds: f64,
    pub test_seconds: f64,
    pub hyperparameters: BTreeMap<String, serde_json::Value>,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// `accuracy, train_seconds, test_seconds, key=value;...` separated by tabs.
    pub fn tsv_line(&self) -> String {
        let hp: Vec<String> = self
            .hyperparameters
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect();
        format!(
            "{}\t{}\t{}\t{}",
            self.accuracy,
            self.train_seconds,
            self.test_seconds,
            hp.join(";")
        )
    }
}

/// Sample Pearson correlation.
pub fn pearson(pred: &[f64], gold: &[f64]) -> Result<f64> {
    if pred.len() != gold.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} predictions for {} gold scores",
            pred.len(),
            gold.len()
        )));
    }
    if pred.len() < 2 {
        return Err(Error::InvalidParameter("need at least two pairs".into()));
    }
    // Single-pass co-moment updates.
    let (mut mx, mut my) = (0.0, 0.0);
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (n, (&x, &y)) in pred.iter().zip(gold).enumerate() {
        let k = (n + 1) as f64;
        let dx = x - mx;
        let dy = y - my;
        mx += dx / k;
        my += dy / k;
        sxx += dx * (x - mx);
        syy += dy * (y - my);
        sxy += dx * (y - my);
    }
    if !(sxx > 0.0) {
        return Err(Error::ConstantSequence("prediction"));
    }
    if !(syy > 0.0) {
        return Err(Error::ConstantSequence("gold"));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// How a pair of embeddings becomes a similarity score.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum StsScore {
    #[default]
    Cosine,
    InnerProduct,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StsScores {
    /// One entry per input pair; `None` for excluded pairs.
    pub scores: Vec<Option<f64>>,
    pub excluded: Vec<usize>,
}

/// Similarity of each sentence pair under a fixed basis. Pairs with a
/// missing side (no in-vocabulary words) are excluded.
pub fn sts_scores(
    table: &EmbeddingTable,
    pairs: &[(Option<Document>, Option<Document>)],
    basis: &RandomBasis,
    score: StsScore,
    options: EmbedOptions,
) -> Result<StsScores> {
    let mut docs = Vec::new();
    let mut kept = Vec::new();
    let mut excluded = Vec::new();
    for (i, pair) in pairs.iter().enumerate() {
        match pair {
            (Some(a), Some(b)) => {
                docs.push(a.clone());
                docs.push(b.clone());
                kept.push(i);
            }
            _ => excluded.push(i),
        }
    }
    if kept.is_empty() {
        return Err(Error::NoData("every sentence pair has an empty side".into()));
    }
    let z = embed_with_basis(table, &docs, basis, options)?;
    let mut scores = vec![None; pairs.len()];
    for (k, &i) in kept.iter().enumerate() {
        let (a, b) = (z.row(2 * k), z.row(2 * k + 1));
        let s = match score {
            StsScore::Cosine => cosine(a, b)?,
            StsScore::InnerProduct => approx_kernel(a, b)?,
        };
        scores[i] = Some(s);
    }
    Ok(StsScores { scores, excluded })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn knn_examples() {
        let d = DenseMatrix::from_vec(1, 3, vec![0.5, 0.0, 0.7]).unwrap();
        assert_eq!(knn_predict(&[0, 1, 0], &d, 1).unwrap(), vec![1]);
        let d = DenseMatrix::from_vec(1, 4, vec![0.1, 0.2, 0.3, 9.0]).unwrap();
        assert_eq!(knn_predict(&[0, 0, 1, 1], &d, 3).unwrap(), vec![0]);
        assert!(knn_predict(&[0, 1], &d, 1).is_err());
        assert!(knn_predict(&[0, 0, 1, 1], &d, 5).is_err());
    }

    #[test]
    fn knn_vote_ties() {
        // One vote each; class 1 is closer in sum.
        let d = DenseMatrix::from_vec(1, 2, vec![0.4, 0.3]).unwrap();
        assert_eq!(knn_predict(&[0, 1], &d, 2).unwrap(), vec![1]);
        // Equal sums fall back to the lower label.
        let d = DenseMatrix::from_vec(1, 2, vec![0.3, 0.3]).unwrap();
        assert_eq!(knn_predict(&[1, 0], &d, 2).unwrap(), vec![0]);
        // Distance ties resolved by lower training index.
        let d = DenseMatrix::from_vec(1, 3, vec![0.3, 0.3, 0.3]).unwrap();
        assert_eq!(knn_predict(&[2, 1, 0], &d, 1).unwrap(), vec![2]);
    }

    fn clusters() -> (Vec<f64>, Vec<usize>) {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..20 {
            let t = i as f64 * 0.05;
            rows.extend_from_slice(&[2.0 + t, 2.0 - t]);
            labels.push(0);
            rows.extend_from_slice(&[-2.0 - t, -1.5 + t]);
            labels.push(1);
        }
        (rows, labels)
    }

    #[test]
    fn separable_clusters_fit_perfectly() {
        let (rows, labels) = clusters();
        let model = train_linear(&rows, 2, &labels, 2, 10.0, TrainOptions::default()).unwrap();
        let predicted = predict_linear(&model, &rows).unwrap();
        assert_eq!(accuracy(&predicted, &labels), 1.0);
        for h in &model.history {
            assert!(h.windows(2).all(|w| w[1] <= w[0]));
        }
    }

    #[test]
    fn duplicated_data_gives_same_model() {
        let (rows, labels) = clusters();
        let a = train_linear(&rows, 2, &labels, 2, 1.0, TrainOptions::default()).unwrap();
        let mut rows2 = rows.clone();
        rows2.extend_from_slice(&rows);
        let mut labels2 = labels.clone();
        labels2.extend_from_slice(&labels);
        let b = train_linear(&rows2, 2, &labels2, 2, 1.0, TrainOptions::default()).unwrap();
        for (x, y) in a.weights.iter().chain(&a.bias).zip(b.weights.iter().chain(&b.bias)) {
            assert!((x - y).abs() < 1e-6, "{x} vs {y}");
        }
    }

    #[test]
    fn single_class_is_rejected() {
        assert!(matches!(
            train_linear(&[1.0, 2.0], 1, &[0, 0], 2, 1.0, TrainOptions::default()),
            Err(Error::SingleClass)
        ));
    }

    #[test]
    fn zero_model_predicts_lowest_label() {
        let model = LinearModel {
            n_features: 2,
            weights: vec![0.0; 6],
            bias: vec![0.0; 3],
            present: vec![true; 3],
            reg_c: 1.0,
            history: vec![],
            features: None,
        };
        assert_eq!(predict_linear(&model, &[1.0, 2.0, -3.0, 4.0]).unwrap(), vec![0, 0]);
        assert!(predict_linear(&model, &[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn hand_computed_scores() {
        // Rows of W: [1, 0, 2], [0, 1, -1]; biases 0 and 0.5.
        let model = LinearModel {
            n_features: 3,
            weights: vec![1.0, 0.0, 2.0, 0.0, 1.0, -1.0],
            bias: vec![0.0, 0.5],
            present: vec![true; 2],
            reg_c: 1.0,
            history: vec![],
            features: None,
        };
        // z = [1, 3, 0]: scores 1 and 3.5 -> class 1.
        // z = [0, 0, 1]: scores 2 and -0.5 -> class 0.
        assert_eq!(
            predict_linear(&model, &[1.0, 3.0, 0.0, 0.0, 0.0, 1.0]).unwrap(),
            vec![1, 0]
        );
    }

    #[test]
    fn pearson_examples() {
        let gold = [1.0, 2.0, 4.0, 3.5];
        assert!((pearson(&gold, &gold).unwrap() - 1.0).abs() < 1e-15);
        let neg: Vec<f64> = gold.iter().map(|x| -x).collect();
        assert!((pearson(&neg, &gold).unwrap() + 1.0).abs() < 1e-15);
        assert!(matches!(
            pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]),
            Err(Error::ConstantSequence("prediction"))
        ));
        assert!(pearson(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn folds_are_stratified_and_reduced() {
        let labels = [0, 0, 0, 0, 1, 1, 1, 1, 1, 1];
        let f = stratified_folds(&labels, 2, 1).unwrap();
        assert!(!f.reduced);
        for fold in &f.folds {
            assert_eq!(fold.iter().filter(|&&i| labels[i] == 0).count(), 2);
        }
        let f = stratified_folds(&labels, 5, 1).unwrap();
        assert!(f.reduced);
        assert_eq!(f.len(), 4);
        let mut all: Vec<usize> = f.folds.concat();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn split_proportions() {
        let labels: Vec<usize> = (0..100).map(|i| i % 2).collect();
        let (train, test) = stratified_split(&labels, 0.3, 3, 0).unwrap();
        assert_eq!(train.len(), 70);
        assert_eq!(test.len(), 30);
        let (train2, _) = stratified_split(&labels, 0.3, 3, 1).unwrap();
        assert_ne!(train, train2);
    }
}
