mod common;

use proptest::prelude::*;
use rand::Rng;
use wme_core::learn::{
    accuracy, cross_validate, knn_predict, pearson, predict_linear, stratified_folds,
    stratified_split, sts_scores, train_linear, train_on_features, BinaryLogistic, CvGrid,
    StsScore, TrainOptions,
};
use wme_core::matrix::DenseMatrix;
use wme_core::wme::{cosine, embed_corpus, embed_new, EmbedOptions, RandomBasis, RandomBasisSpec};
use wme_core::Error;
use wme_testkit as tk;

#[test]
fn knn_matches_brute_force() {
    let mut r = tk::rng(10);
    for _ in 0..50 {
        let n_train = r.gen_range(1..40);
        let n_test = r.gen_range(1..10);
        let labels: Vec<usize> = (0..n_train).map(|_| r.gen_range(0..4)).collect();
        // Coarse distances force ties on distance and on votes.
        let rows: Vec<Vec<f64>> = (0..n_test)
            .map(|_| (0..n_train).map(|_| r.gen_range(0..6) as f64 * 0.5).collect())
            .collect();
        let k = r.gen_range(1..=n_train);
        let dist = DenseMatrix::from_vec(n_test, n_train, rows.concat()).unwrap();
        assert_eq!(knn_predict(&labels, &dist, k).unwrap(), tk::knn_brute_force(&labels, &rows, k));
    }
}

#[test]
fn knn_zero_distance_duplicate_wins_at_k1() {
    let labels = [3, 1, 2];
    let dist = DenseMatrix::from_vec(1, 3, vec![0.5, 0.2, 0.0]).unwrap();
    assert_eq!(knn_predict(&labels, &dist, 1).unwrap(), vec![2]);
}

proptest! {
    #[test]
    fn pearson_matches_two_pass(xs in prop::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 3..40)) {
        let (a, b): (Vec<f64>, Vec<f64>) = xs.into_iter().unzip();
        prop_assume!(a.iter().any(|&x| x != a[0]) && b.iter().any(|&y| y != b[0]));
        let ours = pearson(&a, &b).unwrap();
        let oracle = tk::pearson_two_pass(&a, &b);
        prop_assert!((ours - oracle).abs() < 1e-12);
        prop_assert!((-1.0..=1.0).contains(&ours));
    }

    #[test]
    fn pearson_affine_invariance(
        xs in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 3..30),
        slope in 0.1f64..10.0,
        shift in -10.0f64..10.0,
    ) {
        let (a, b): (Vec<f64>, Vec<f64>) = xs.into_iter().unzip();
        prop_assume!(a.iter().any(|&x| (x - a[0]).abs() > 1e-3) && b.iter().any(|&y| (y - b[0]).abs() > 1e-3));
        let base = pearson(&a, &b).unwrap();
        let mapped: Vec<f64> = a.iter().map(|x| slope * x + shift).collect();
        prop_assert!((pearson(&mapped, &b).unwrap() - base).abs() < 1e-12);
        let flipped: Vec<f64> = a.iter().map(|x| -slope * x + shift).collect();
        prop_assert!((pearson(&flipped, &b).unwrap() + base).abs() < 1e-12);
    }
}

fn gaussian_blobs(seed: u64, n: usize, p: usize, classes: usize, gap: f64) -> (Vec<f64>, Vec<usize>) {
    let mut r = tk::rng(seed);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for i in 0..n {
        let c = i % classes;
        labels.push(c);
        for k in 0..p {
            let center = if k % classes == c { gap } else { 0.0 };
            rows.push(center + r.gen_range(-1.0..1.0));
        }
    }
    (rows, labels)
}

#[test]
fn trained_model_is_a_stationary_point() {
    let (rows, labels) = gaussian_blobs(3, 60, 5, 2, 0.8);
    for reg_c in [0.01, 1.0, 100.0] {
        let model = train_linear(&rows, 5, &labels, 2, reg_c, TrainOptions::default()).unwrap();
        for c in 0..2 {
            let targets = labels.iter().map(|&l| if l == c { 1.0 } else { -1.0 }).collect();
            let problem = BinaryLogistic::new(&rows, 5, targets, reg_c);
            let mut theta = model.class_weights(c).to_vec();
            theta.push(model.bias[c]);
            let at_zero = problem.objective(&[0.0; 6]);
            assert!(problem.objective(&theta) <= at_zero);
            let g = tk::numerical_gradient(|t| problem.objective(t), &theta, 1e-5);
            let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!(norm <= 1e-4, "C = {reg_c}: gradient norm {norm}");
            let h = &model.history[c];
            assert!(h.windows(2).all(|w| w[1] <= w[0]));
        }
    }
}

#[test]
fn multiclass_model_recovers_blobs() {
    let (rows, labels) = gaussian_blobs(4, 90, 3, 3, 4.0);
    let model = train_linear(&rows, 3, &labels, 3, 100.0, TrainOptions::default()).unwrap();
    assert!(accuracy(&predict_linear(&model, &rows).unwrap(), &labels) > 0.95);
}

#[test]
fn absent_class_is_never_predicted() {
    let (rows, labels) = gaussian_blobs(5, 20, 2, 2, 3.0);
    let model = train_linear(&rows, 2, &labels, 3, 1.0, TrainOptions::default()).unwrap();
    assert!(predict_linear(&model, &rows).unwrap().iter().all(|&l| l < 2));
}

#[test]
fn wme_linear_separates_clustered_corpus() {
    let (table, corpus) = common::clustered_corpus(7, 60, 10, 0.2);
    let (train, test) = stratified_split(&corpus.labels, 0.3, 1, 0).unwrap();
    let s = RandomBasisSpec::for_documents(&table, &corpus.documents, 256, 6, 1.0, 2, false).unwrap();
    let (_, z) = embed_corpus(&table, &corpus.documents, &s, EmbedOptions { precompute: true }).unwrap();
    let train_labels: Vec<usize> = train.iter().map(|&i| corpus.labels[i]).collect();
    let test_labels: Vec<usize> = test.iter().map(|&i| corpus.labels[i]).collect();
    let model = train_on_features(&z.select_rows(&train), &train_labels, 2, 100.0).unwrap();
    assert_eq!(model.features.unwrap().seed, 2);
    let predicted = predict_linear(&model, z.select_rows(&test).as_slice()).unwrap();
    assert!(accuracy(&predicted, &test_labels) > 0.95);
}

#[test]
fn cross_validation_matches_exhaustive_rerun() {
    let (table, corpus) = common::clustered_corpus(8, 15, 8, 0.45);
    let base = RandomBasisSpec::for_documents(&table, &corpus.documents, 32, 6, 1.0, 4, false).unwrap();
    let embed = |gamma: f64, d_max: usize| {
        embed_corpus(
            &table,
            &corpus.documents,
            &base.with_gamma(gamma).with_d_max(d_max),
            EmbedOptions::default(),
        )
        .map(|(_, z)| z)
    };
    let grid = CvGrid {
        gammas: vec![0.1, 1.0],
        d_maxes: vec![3],
        cs: vec![0.01, 10.0],
        folds: 5,
    };
    let outcome = cross_validate(&corpus.labels, 2, &grid, 11, embed).unwrap();
    assert_eq!(outcome.scores.len(), 4);

    let folds = stratified_folds(&corpus.labels, 5, 11).unwrap();
    let mut best: Option<(f64, f64, f64)> = None;
    for &gamma in &grid.gammas {
        let z = embed(gamma, 3).unwrap();
        for &c in &grid.cs {
            let mut total = 0.0;
            for f in 0..folds.len() {
                let (tr, te) = folds.split(f);
                let trl: Vec<usize> = tr.iter().map(|&i| corpus.labels[i]).collect();
                let tel: Vec<usize> = te.iter().map(|&i| corpus.labels[i]).collect();
                let m = train_linear(z.select_rows(&tr).as_slice(), z.cols(), &trl, 2, c, TrainOptions::default()).unwrap();
                total += accuracy(&predict_linear(&m, z.select_rows(&te).as_slice()).unwrap(), &tel);
            }
            let mean = total / folds.len() as f64;
            if best.is_none_or(|b| mean > b.0) {
                best = Some((mean, gamma, c));
            }
        }
    }
    let (score, gamma, c) = best.unwrap();
    assert_eq!(outcome.best_score, score);
    assert_eq!((outcome.best.gamma, outcome.best.c), (gamma, c));
}

#[test]
fn single_point_grid_returns_that_point() {
    let (table, corpus) = common::clustered_corpus(9, 6, 6, 0.1);
    let base = RandomBasisSpec::for_documents(&table, &corpus.documents, 8, 6, 1.0, 4, false).unwrap();
    let grid = CvGrid { gammas: vec![0.5], d_maxes: vec![2], cs: vec![3.0], folds: 3 };
    let outcome = cross_validate(&corpus.labels, 2, &grid, 1, |g, d| {
        embed_corpus(&table, &corpus.documents, &base.with_gamma(g).with_d_max(d), EmbedOptions::default())
            .map(|(_, z)| z)
    })
    .unwrap();
    assert_eq!((outcome.best.gamma, outcome.best.d_max, outcome.best.c), (0.5, 2, 3.0));
    assert_eq!(outcome.best_score, outcome.scores[0].mean_accuracy);
}

#[test]
fn sts_scores_are_cosines_of_embeddings() {
    let (table, corpus) = common::clustered_corpus(10, 10, 6, 0.3);
    let s = RandomBasisSpec::for_documents(&table, &corpus.documents, 64, 6, 1.0, 8, false).unwrap();
    let basis = RandomBasis::generate(s).unwrap();
    let docs = &corpus.documents;
    let mut pairs: Vec<_> = (0..10).map(|i| (Some(docs[i].clone()), Some(docs[i + 5].clone()))).collect();
    pairs.push((Some(docs[0].clone()), Some(docs[0].clone())));
    pairs.push((None, Some(docs[1].clone())));
    let out = sts_scores(&table, &pairs, &basis, StsScore::Cosine, EmbedOptions::default()).unwrap();
    assert_eq!(out.excluded, vec![11]);
    for i in 0..10 {
        let a = embed_new(&table, &docs[i], &basis).unwrap();
        let b = embed_new(&table, &docs[i + 5], &basis).unwrap();
        let s = out.scores[i].unwrap();
        assert_eq!(s, cosine(&a, &b).unwrap());
        assert!(s > 0.0 && s <= 1.0);
    }
    assert!((out.scores[10].unwrap() - 1.0).abs() < 1e-12);
    let none = vec![(None, None)];
    assert!(matches!(
        sts_scores(&table, &none, &basis, StsScore::Cosine, EmbedOptions::default()),
        Err(Error::NoData(_))
    ));
}
