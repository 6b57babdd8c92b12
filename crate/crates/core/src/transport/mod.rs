//! Exact Word Mover's Distance.
//!
//! `WMD(x, y) = min <C, F>` over nonnegative flows `F` with row sums `f_x` and
//! column sums `f_y`, where `C_ij` is the Euclidean distance between the
//! vectors of word `i` of `x` and word `j` of `y`.

use std::sync::atomic::{AtomicU64, Ordering};

use dashmap::DashMap;
use rayon::prelude::*;

use crate::corpus::{used_word_ids, Document};
use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;

mod simplex;

/// Ground distances between the words of two documents.
#[derive(Clone, Debug, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} costs for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if let Some(c) = data.iter().find(|c| !(c.is_finite() && **c >= 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "costs must be finite and nonnegative, found {c}"
            )));
        }
        Ok(CostMatrix { rows, cols, data })
    }

    /// Pairwise Euclidean distances between two point sets given as
    /// row-major `f64` coordinates of dimension `dim`.
    pub fn euclidean(xs: &[f64], ys: &[f64], dim: usize) -> Result<Self> {
        let data = xs
            .chunks_exact(dim)
            .flat_map(|x| ys.chunks_exact(dim).map(move |y| euclidean(x, y)))
            .collect();
        CostMatrix::new(xs.len() / dim, ys.len() / dim, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// Optimal flow for one transportation problem.
#[derive(Clone, Debug, PartialEq)]
pub struct TransportPlan {
    rows: usize,
    cols: usize,
    flow: Vec<f64>,
    objective: f64,
    basis: Vec<(usize, usize)>,
    row_potentials: Vec<f64>,
    col_potentials: Vec<f64>,
    iterations: usize,
}

impl TransportPlan {
    pub fn objective(&self) -> f64 {
        self.objective
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn flow(&self, i: usize, j: usize) -> f64 {
        self.flow[i * self.cols + j]
    }

    /// Row-major flow matrix.
    pub fn flows(&self) -> &[f64] {
        &self.flow
    }

    /// The `rows + cols - 1` basic cells of the optimal basis.
    pub fn basis(&self) -> &[(usize, usize)] {
        &self.basis
    }

    /// Dual potentials `(u, v)` with `u_i + v_j = C_ij` on basic cells.
    pub fn potentials(&self) -> (&[f64], &[f64]) {
        (&self.row_potentials, &self.col_potentials)
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn positive_entries(&self) -> usize {
        self.flow.iter().filter(|&&f| f > 0.0).count()
    }
}

/// Solves `min <C, F>` subject to `F 1 = f_x`, `F^T 1 = f_y`, `F >= 0`.
pub fn solve_transport(fx: &[f64], fy: &[f64], cost: &CostMatrix) -> Result<TransportPlan> {
    simplex::solve(fx, fy, cost)
}

pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Euclidean distance between a stored word vector and an `f64` point.
pub fn point_distance(word: &[f32], point: &[f64]) -> f64 {
    word.iter()
        .zip(point)
        .map(|(&x, y)| {
            let d = f64::from(x) - y;
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// `||v_a - v_b||_2` at 64-bit precision. Bitwise symmetric in `(a, b)`.
pub fn ground_distance(table: &EmbeddingTable, a: usize, b: usize) -> f64 {
    if a == b {
        return 0.0;
    }
    table
        .vector(a)
        .iter()
        .zip(table.vector(b))
        .map(|(&x, &y)| {
            let d = f64::from(x) - f64::from(y);
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

const EMPTY: u64 = u64::MAX;
const NOT_LOCAL: u32 = u32::MAX;
/// Largest word set stored as a dense triangle (about 67 MB of cells).
pub const DENSE_CACHE_LIMIT: usize = 4096;

enum Store {
    /// Lazily filled lower triangle over a fixed word set.
    Dense {
        local: Vec<u32>,
        cells: Vec<AtomicU64>,
    },
    Sparse(DashMap<(u32, u32), f64>),
}

/// Memoized word-pair ground distances, shared across WMD evaluations.
///
/// Keys are unordered word-id pairs. Inserts are insert-if-absent; racing
/// writers store the same deterministic value, so results never depend on
/// scheduling.
pub struct DistanceCache {
    table_id: u64,
    store: Store,
    hits: AtomicU64,
    misses: AtomicU64,
}

impl std::fmt::Debug for DistanceCache {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DistanceCache")
            .field("table_id", &self.table_id)
            .field("dense", &matches!(self.store, Store::Dense { .. }))
            .field("hits", &self.hits())
            .field("misses", &self.misses())
            .finish()
    }
}

impl DistanceCache {
    /// Unbounded hash-map cache over any word ids of `table`.
    pub fn new(table: &EmbeddingTable) -> Self {
        DistanceCache {
            table_id: table.fingerprint(),
            store: Store::Sparse(DashMap::new()),
            hits: AtomicU64::new(0),
            misses: AtomicU64::new(0),
        }
    }

    /// Cache specialised to the words used by `documents`. Uses a dense
    /// triangle when the word set is at most [`DENSE_CACHE_LIMIT`].
    pub fn for_documents(table: &EmbeddingTable, documents: &[&[Document]]) -> Self {
        let all: Vec<Document> = documents.iter().flat_map(|d| d.iter().cloned()).collect();
        let words = used_word_ids(&all);
        if words.len() > DENSE_CACHE_LIMIT {
            return Self::new(table);
        }
        let mut local = vec![NOT_LOCAL; table.len()];
        for (k, &w) in words.iter().enumerate() {
            local[w] = k as u32;
        }
        let n = words.len();
        let cells = (0..n * (n + 1) / 2).map(|_| AtomicU64::new(EMPTY)).collect();
        DistanceCache {
            table_id: table.fingerprint(),
            store: Store::Dense { local, cells },
            hits: AtomicU64::new(0),
            misses: AtomicU64::new(0),
        }
    }

    pub fn hits(&self) -> u64 {
        self.hits.load(Ordering::Relaxed)
    }

    pub fn misses(&self) -> u64 {
        self.misses.load(Ordering::Relaxed)
    }

    pub fn len(&self) -> usize {
        match &self.store {
            Store::Dense { cells, .. } => cells
                .iter()
                .filter(|c| c.load(Ordering::Relaxed) != EMPTY)
                .count(),
            Store::Sparse(map) => map.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Cached distance, computing and storing it on a miss.
    pub fn distance(&self, table: &EmbeddingTable, a: usize, b: usize) -> f64 {
        let mut counts = (0, 0);
        let d = self.lookup(table, a, b, &mut counts);
        self.record(counts);
        d
    }

    fn record(&self, (hits, misses): (u64, u64)) {
        if hits > 0 {
            self.hits.fetch_add(hits, Ordering::Relaxed);
        }
        if misses > 0 {
            self.misses.fetch_add(misses, Ordering::Relaxed);
        }
    }

    fn lookup(&self, table: &EmbeddingTable, a: usize, b: usize, counts: &mut (u64, u64)) -> f64 {
        match &self.store {
            Store::Dense { local, cells } => {
                let (la, lb) = (local[a], local[b]);
                if la == NOT_LOCAL || lb == NOT_LOCAL {
                    counts.1 += 1;
                    return ground_distance(table, a, b);
                }
                self.dense_get(table, cells, (a, la), (b, lb), counts)
            }
            Store::Sparse(map) => {
                let key = if a <= b {
                    (a as u32, b as u32)
                } else {
                    (b as u32, a as u32)
                };
                if let Some(d) = map.get(&key) {
                    counts.0 += 1;
                    return *d;
                }
                counts.1 += 1;
                let d = ground_distance(table, a, b);
                map.entry(key).or_insert(d);
                d
            }
        }
    }

    fn dense_get(
        &self,
        table: &EmbeddingTable,
        cells: &[AtomicU64],
        (a, la): (usize, u32),
        (b, lb): (usize, u32),
        counts: &mut (u64, u64),
    ) -> f64 {
        let (lo, hi) = if la <= lb { (la, lb) } else { (lb, la) };
        let (lo, hi) = (lo as usize, hi as usize);
        let cell = &cells[hi * (hi + 1) / 2 + lo];
        let bits = cell.load(Ordering::Relaxed);
        if bits != EMPTY {
            counts.0 += 1;
            return f64::from_bits(bits);
        }
        counts.1 += 1;
        let d = ground_distance(table, a, b);
        let _ = cell.compare_exchange(EMPTY, d.to_bits(), Ordering::Relaxed, Ordering::Relaxed);
        d
    }
}

fn check_table(table: &EmbeddingTable, doc: &Document) -> Result<()> {
    if doc.table_id() != table.fingerprint() {
        return Err(Error::TableMismatch {
            expected: table.fingerprint(),
            found: doc.table_id(),
        });
    }
    if let Some(&bad) = doc.word_ids().iter().find(|&&id| id >= table.len()) {
        return Err(Error::InvalidDocument(format!(
            "word id {bad} outside a vocabulary of {}",
            table.len()
        )));
    }
    Ok(())
}

/// `C_ij = ground_distance(x_i, y_j)`. Identical with or without a cache.
pub fn cost_matrix(
    table: &EmbeddingTable,
    x: &Document,
    y: &Document,
    cache: Option<&DistanceCache>,
) -> Result<CostMatrix> {
    check_table(table, x)?;
    check_table(table, y)?;
    let mut data = Vec::with_capacity(x.len() * y.len());
    match cache {
        None => {
            for &a in x.word_ids() {
                data.extend(y.word_ids().iter().map(|&b| ground_distance(table, a, b)));
            }
        }
        Some(cache) => {
            if cache.table_id != table.fingerprint() {
                return Err(Error::TableMismatch {
                    expected: table.fingerprint(),
                    found: cache.table_id,
                });
            }
            let mut counts = (0, 0);
            match &cache.store {
                Store::Dense { local, cells } => {
                    let ly: Vec<u32> = y.word_ids().iter().map(|&b| local[b]).collect();
                    for &a in x.word_ids() {
                        let la = local[a];
                        for (&b, &lb) in y.word_ids().iter().zip(&ly) {
                            let d = if la == NOT_LOCAL || lb == NOT_LOCAL {
                                counts.1 += 1;
                                ground_distance(table, a, b)
                            } else {
                                cache.dense_get(table, cells, (a, la), (b, lb), &mut counts)
                            };
                            data.push(d);
                        }
                    }
                }
                Store::Sparse(_) => {
                    for &a in x.word_ids() {
                        for &b in y.word_ids() {
                            data.push(cache.lookup(table, a, b, &mut counts));
                        }
                    }
                }
            }
            cache.record(counts);
        }
    }
    CostMatrix::new(x.len(), y.len(), data)
}

/// Exact WMD between two documents over the same table.
pub fn wmd(
    table: &EmbeddingTable,
    x: &Document,
    y: &Document,
    cache: Option<&DistanceCache>,
) -> Result<f64> {
    let cost = cost_matrix(table, x, y, cache)?;
    Ok(solve_transport(x.weights(), y.weights(), &cost)?.objective())
}

/// `D_ab = wmd(a, b)` for every pair. Cells are computed in parallel on the
/// current rayon pool; the result does not depend on the worker count.
pub fn wmd_pairwise(
    table: &EmbeddingTable,
    rows: &[Document],
    cols: &[Document],
    cache: Option<&DistanceCache>,
) -> Result<DenseMatrix> {
    let n_cols = cols.len();
    let data = (0..rows.len() * n_cols)
        .into_par_iter()
        .map(|k| wmd(table, &rows[k / n_cols], &cols[k % n_cols], cache))
        .collect::<Result<Vec<f64>>>()?;
    DenseMatrix::from_vec(rows.len(), n_cols, data)
}

/// Pairwise WMD of a corpus with itself: the upper triangle is solved and
/// mirrored, so the result is exactly symmetric with a zero diagonal.
pub fn wmd_pairwise_symmetric(
    table: &EmbeddingTable,
    docs: &[Document],
    cache: Option<&DistanceCache>,
) -> Result<DenseMatrix> {
    let n = docs.len();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect();
    let values = pairs
        .par_iter()
        .map(|&(i, j)| wmd(table, &docs[i], &docs[j], cache))
        .collect::<Result<Vec<f64>>>()?;
    let mut out = DenseMatrix::zeros(n, n);
    for (&(i, j), &d) in pairs.iter().zip(&values) {
        out.set(i, j, d);
        out.set(j, i, d);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(table: &EmbeddingTable, ids: &[usize], weights: &[f64]) -> Document {
        Document::new(table.fingerprint(), ids.to_vec(), weights.to_vec()).unwrap()
    }

    fn plane() -> EmbeddingTable {
        EmbeddingTable::new(
            2,
            vec![
                ("o", vec![0.0f32, 0.0]),
                ("p", vec![3.0, 4.0]),
                ("q", vec![1.0, 0.0]),
                ("r", vec![0.0, 2.0]),
            ],
        )
        .unwrap()
    }

    #[test]
    fn forced_flows() {
        let c = CostMatrix::new(1, 1, vec![2.5]).unwrap();
        let plan = solve_transport(&[1.0], &[1.0], &c).unwrap();
        assert_eq!(plan.flows(), &[1.0]);
        assert_eq!(plan.objective(), 2.5);

        let c = CostMatrix::new(1, 2, vec![1.0, 3.0]).unwrap();
        let plan = solve_transport(&[1.0], &[0.5, 0.5], &c).unwrap();
        assert_eq!(plan.flows(), &[0.5, 0.5]);
        assert_eq!(plan.objective(), 2.0);
    }

    #[test]
    fn picks_cheap_diagonal() {
        let c = CostMatrix::new(2, 2, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        let plan = solve_transport(&[0.5, 0.5], &[0.5, 0.5], &c).unwrap();
        assert_eq!(plan.objective(), 0.0);
        assert_eq!(plan.flow(0, 0), 0.5);
        assert_eq!(plan.flow(0, 1), 0.0);
    }

    #[test]
    fn solver_errors() {
        let c = CostMatrix::new(1, 2, vec![1.0, 3.0]).unwrap();
        assert!(matches!(
            solve_transport(&[1.0], &[1.0], &c),
            Err(Error::DimensionMismatch(_))
        ));
        assert!(matches!(
            solve_transport(&[1.0], &[0.5, 0.6], &c),
            Err(Error::InvalidMarginal(_))
        ));
        assert!(matches!(
            solve_transport(&[1.0], &[1.0, 0.0], &c),
            Err(Error::InvalidMarginal(_))
        ));
        assert!(CostMatrix::new(1, 1, vec![-1.0]).is_err());
        assert!(CostMatrix::new(1, 1, vec![f64::NAN]).is_err());
    }

    #[test]
    fn ground_distance_examples() {
        let t = plane();
        assert_eq!(ground_distance(&t, 1, 1), 0.0);
        assert_eq!(ground_distance(&t, 0, 1), 5.0);
        assert_eq!(ground_distance(&t, 1, 0), 5.0);
    }

    #[test]
    fn wmd_examples() {
        let t = plane();
        let x = doc(&t, &[0, 1, 2], &[0.2, 0.3, 0.5]);
        assert_eq!(wmd(&t, &x, &x, None).unwrap(), 0.0);
        let u = doc(&t, &[0], &[1.0]);
        let w = doc(&t, &[1], &[1.0]);
        assert_eq!(wmd(&t, &u, &w, None).unwrap(), 5.0);
    }

    #[test]
    fn cost_matrix_same_document_has_zero_diagonal() {
        let t = plane();
        let x = doc(&t, &[0, 2, 3], &[0.25, 0.25, 0.5]);
        let c = cost_matrix(&t, &x, &x, None).unwrap();
        for i in 0..3 {
            assert_eq!(c.get(i, i), 0.0);
        }
        let cache = DistanceCache::new(&t);
        assert_eq!(cost_matrix(&t, &x, &x, Some(&cache)).unwrap(), c);
        // Unordered keys: (i, j) and (j, i) share an entry.
        assert_eq!((cache.hits(), cache.misses()), (3, 6));
        assert_eq!(cost_matrix(&t, &x, &x, Some(&cache)).unwrap(), c);
        assert_eq!((cache.hits(), cache.misses()), (12, 6));
    }

    #[test]
    fn table_mismatch_is_rejected() {
        let t = plane();
        let other = t.unit_normalized();
        let x = doc(&other, &[0], &[1.0]);
        let y = doc(&t, &[1], &[1.0]);
        assert!(matches!(
            wmd(&t, &x, &y, None),
            Err(Error::TableMismatch { .. })
        ));
    }

    #[test]
    fn pairwise_self_is_symmetric() {
        let t = plane();
        let docs = vec![
            doc(&t, &[0, 1], &[0.5, 0.5]),
            doc(&t, &[2], &[1.0]),
            doc(&t, &[1, 2, 3], &[0.2, 0.2, 0.6]),
        ];
        let d = wmd_pairwise_symmetric(&t, &docs, None).unwrap();
        let cache = DistanceCache::for_documents(&t, &[&docs]);
        let full = wmd_pairwise(&t, &docs, &docs, Some(&cache)).unwrap();
        for i in 0..3 {
            assert_eq!(d.get(i, i), 0.0);
            for j in 0..3 {
                assert_eq!(d.get(i, j), d.get(j, i));
                assert!((d.get(i, j) - full.get(i, j)).abs() < 1e-12);
            }
        }
        assert!(cache.hits() > 0);
        let one = wmd_pairwise(&t, &docs[..1], &docs[1..2], None).unwrap();
        assert_eq!(one.as_slice(), &[wmd(&t, &docs[0], &docs[1], None).unwrap()]);
    }
}
