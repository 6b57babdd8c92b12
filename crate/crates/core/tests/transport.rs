use proptest::prelude::*;
use rand::Rng;
use wme_core::corpus::Document;
use wme_core::transport::{
    cost_matrix, solve_transport, wmd, wmd_pairwise, wmd_pairwise_symmetric, CostMatrix,
    DistanceCache,
};
use wme_core::EmbeddingTable;
use wme_testkit as tk;

fn instance(seed: u64, max_len: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut r = tk::rng(seed);
    let m = r.gen_range(1..=max_len);
    let n = r.gen_range(1..=max_len);
    let fx = tk::random_simplex(&mut r, m);
    let fy = tk::random_simplex(&mut r, n);
    let cost = (0..m * n).map(|_| r.gen_range(0.0..5.0)).collect();
    (fx, fy, cost)
}

#[test]
fn matches_lp_oracle_on_larger_instances() {
    for seed in 0..60 {
        let (fx, fy, cost) = instance(seed, 9);
        let c = CostMatrix::new(fx.len(), fy.len(), cost.clone()).unwrap();
        let ours = solve_transport(&fx, &fy, &c).unwrap().objective();
        let oracle = tk::transport_lp(&fx, &fy, &cost);
        assert!((ours - oracle).abs() < 1e-9, "seed {seed}: {ours} vs {oracle}");
    }
}

#[test]
fn degenerate_instances_with_ties() {
    // Integer costs with many ties and rational marginals stress degeneracy.
    let mut r = tk::rng(77);
    for _ in 0..200 {
        let m = r.gen_range(1..=6);
        let n = r.gen_range(1..=6);
        let fx = tk::rational_simplex(&mut r, m, 6);
        let fy = tk::rational_simplex(&mut r, n, 6);
        let cost: Vec<f64> = (0..m * n).map(|_| r.gen_range(0..3) as f64).collect();
        let c = CostMatrix::new(m, n, cost.clone()).unwrap();
        let ours = solve_transport(&fx, &fy, &c).unwrap().objective();
        let oracle = tk::transport_lp(&fx, &fy, &cost);
        assert!((ours - oracle).abs() < 1e-9);
    }
}

proptest! {
    #[test]
    fn plan_is_feasible_and_optimal(seed in any::<u64>()) {
        let (fx, fy, cost) = instance(seed, 8);
        let (m, n) = (fx.len(), fy.len());
        let c = CostMatrix::new(m, n, cost).unwrap();
        let plan = solve_transport(&fx, &fy, &c).unwrap();
        for i in 0..m {
            let row: f64 = (0..n).map(|j| plan.flow(i, j)).sum();
            prop_assert!((row - fx[i]).abs() < 1e-12);
        }
        for j in 0..n {
            let col: f64 = (0..m).map(|i| plan.flow(i, j)).sum();
            prop_assert!((col - fy[j]).abs() < 1e-12);
        }
        prop_assert!(plan.flows().iter().all(|&f| f >= 0.0));
        prop_assert!(plan.positive_entries() < m + n);
        prop_assert_eq!(plan.basis().len(), m + n - 1);
        let (u, v) = plan.potentials();
        for i in 0..m {
            for j in 0..n {
                prop_assert!(c.get(i, j) - u[i] - v[j] >= -1e-10);
            }
        }
        let dual: f64 = fx.iter().zip(u).map(|(a, b)| a * b).sum::<f64>()
            + fy.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
        prop_assert!((dual - plan.objective()).abs() < 1e-9);
    }

    #[test]
    fn scaling_costs_scales_objective(seed in any::<u64>(), s in 0.01f64..100.0) {
        let (fx, fy, cost) = instance(seed, 6);
        let (m, n) = (fx.len(), fy.len());
        let base = solve_transport(&fx, &fy, &CostMatrix::new(m, n, cost.clone()).unwrap())
            .unwrap()
            .objective();
        let scaled_cost: Vec<f64> = cost.iter().map(|c| c * s).collect();
        let scaled = solve_transport(&fx, &fy, &CostMatrix::new(m, n, scaled_cost).unwrap())
            .unwrap()
            .objective();
        prop_assert!((scaled - s * base).abs() <= 1e-9 * (1.0 + s * base));
    }

    #[test]
    fn transposed_problem_has_same_objective(seed in any::<u64>()) {
        let (fx, fy, cost) = instance(seed, 7);
        let (m, n) = (fx.len(), fy.len());
        let t: Vec<f64> = (0..n * m).map(|k| cost[(k % m) * n + k / m]).collect();
        let a = solve_transport(&fx, &fy, &CostMatrix::new(m, n, cost).unwrap()).unwrap();
        let b = solve_transport(&fy, &fx, &CostMatrix::new(n, m, t).unwrap()).unwrap();
        prop_assert!((a.objective() - b.objective()).abs() < 1e-10);
    }
}

fn fixture(seed: u64, words: usize, dim: usize, docs: usize, len: usize) -> (EmbeddingTable, Vec<Document>) {
    let table = EmbeddingTable::new(dim, tk::random_vocabulary(seed, words, dim)).unwrap();
    let mut r = tk::rng(seed ^ 0xabc);
    let documents = (0..docs)
        .map(|_| {
            let mut masses = std::collections::BTreeMap::new();
            for _ in 0..r.gen_range(1..=len) {
                *masses.entry(r.gen_range(0..words)).or_insert(0.0) += 1.0;
            }
            Document::from_masses(table.fingerprint(), masses).unwrap()
        })
        .collect();
    (table, documents)
}

#[test]
fn wmd_matches_point_set_oracle() {
    let (table, docs) = fixture(3, 40, 5, 20, 6);
    for pair in docs.windows(2) {
        let (x, y) = (&pair[0], &pair[1]);
        let pts = |d: &Document| -> Vec<f64> {
            d.word_ids()
                .iter()
                .flat_map(|&w| table.vector(w).iter().map(|&v| v as f64))
                .collect()
        };
        let oracle = tk::wmd_oracle(&pts(x), x.weights(), &pts(y), y.weights(), 5);
        let ours = wmd(&table, x, y, None).unwrap();
        assert!((ours - oracle).abs() < 1e-9);
    }
}

#[test]
fn cache_is_transparent() {
    let (table, docs) = fixture(9, 30, 4, 25, 8);
    let plain = wmd_pairwise(&table, &docs, &docs, None).unwrap();
    let dense = DistanceCache::for_documents(&table, &[&docs]);
    let sparse = DistanceCache::new(&table);
    let a = wmd_pairwise(&table, &docs, &docs, Some(&dense)).unwrap();
    let b = wmd_pairwise(&table, &docs, &docs, Some(&sparse)).unwrap();
    assert_eq!(plain, a);
    assert_eq!(plain, b);
    assert!(dense.hits() > 0 && sparse.hits() > 0);
    for (x, y) in docs.iter().zip(docs.iter().rev()) {
        assert_eq!(
            cost_matrix(&table, x, y, None).unwrap(),
            cost_matrix(&table, x, y, Some(&dense)).unwrap()
        );
    }
    let sym = wmd_pairwise_symmetric(&table, &docs, Some(&dense)).unwrap();
    for i in 0..docs.len() {
        assert_eq!(sym.get(i, i), 0.0);
        for j in 0..docs.len() {
            assert_eq!(sym.get(i, j), sym.get(j, i));
            assert!((sym.get(i, j) - plain.get(i, j)).abs() < 1e-12);
        }
    }
}

#[test]
fn pairwise_is_independent_of_worker_count() {
    let (table, docs) = fixture(11, 50, 6, 30, 10);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| wmd_pairwise_symmetric(&table, &docs, None).unwrap())
    };
    assert_eq!(run(1), run(4));
}
