//! Reference oracles and synthetic fixtures for tests.
//!
//! Nothing here depends on `wme-core`; every oracle is written from its
//! textbook definition so it can be compared against the library.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Minimum of `c.x` subject to `A x = b`, `x >= 0`, by two-phase dense
/// tableau simplex with Bland's rule. `a` is row-major `m x n`. Returns the
/// optimal value, or `None` when infeasible.
pub fn lp_minimize(a: &[f64], b: &[f64], c: &[f64]) -> Option<f64> {
    let m = b.len();
    let n = c.len();
    assert_eq!(a.len(), m * n);
    // Columns: n structural, m artificial, then the right-hand side.
    let width = n + m + 1;
    let mut t = vec![0.0; m * width];
    for i in 0..m {
        let sign = if b[i] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            t[i * width + j] = sign * a[i * n + j];
        }
        t[i * width + n + i] = 1.0;
        t[i * width + n + m] = sign * b[i];
    }
    let mut basis: Vec<usize> = (n..n + m).collect();

    let phase1: Vec<f64> = (0..n + m).map(|j| if j >= n { 1.0 } else { 0.0 }).collect();
    run_simplex(&mut t, &mut basis, m, width, &phase1, n + m);
    let infeasibility: f64 = basis
        .iter()
        .enumerate()
        .filter(|(_, &bj)| bj >= n)
        .map(|(i, _)| t[i * width + n + m])
        .sum();
    if infeasibility > 1e-9 {
        return None;
    }
    // Drive remaining (zero-valued) artificials out where possible.
    for i in 0..m {
        if basis[i] >= n {
            if let Some(j) = (0..n).find(|&j| t[i * width + j].abs() > 1e-12) {
                pivot(&mut t, &mut basis, m, width, i, j);
            }
        }
    }
    let mut cost = c.to_vec();
    cost.extend(std::iter::repeat_n(f64::INFINITY, m));
    run_simplex(&mut t, &mut basis, m, width, &cost, n);
    Some(
        basis
            .iter()
            .enumerate()
            .filter(|(_, &bj)| bj < n)
            .map(|(i, &bj)| c[bj] * t[i * width + n + m])
            .sum(),
    )
}

fn pivot(t: &mut [f64], basis: &mut [usize], m: usize, width: usize, row: usize, col: usize) {
    let p = t[row * width + col];
    for k in 0..width {
        t[row * width + k] /= p;
    }
    for i in 0..m {
        if i != row {
            let f = t[i * width + col];
            if f != 0.0 {
                for k in 0..width {
                    t[i * width + k] -= f * t[row * width + k];
                }
            }
        }
    }
    basis[row] = col;
}

/// Entering columns restricted to `0..allowed`.
fn run_simplex(
    t: &mut [f64],
    basis: &mut [usize],
    m: usize,
    width: usize,
    cost: &[f64],
    allowed: usize,
) {
    let rhs = width - 1;
    for _ in 0..100_000 {
        let entering = (0..allowed).find(|&j| {
            if basis.contains(&j) {
                return false;
            }
            let mut reduced = cost[j];
            for i in 0..m {
                let cb = cost[basis[i]];
                if cb.is_finite() {
                    reduced -= cb * t[i * width + j];
                } else if t[i * width + j].abs() > 1e-12 {
                    return false;
                }
            }
            reduced < -1e-11
        });
        let Some(j) = entering else { return };
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..m {
            let coef = t[i * width + j];
            if coef > 1e-12 {
                let ratio = t[i * width + rhs] / coef;
                let better = match leave {
                    None => true,
                    Some((l, r)) => ratio < r - 1e-15 || (ratio <= r + 1e-15 && basis[i] < basis[l]),
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
        }
        let Some((i, _)) = leave else { return };
        pivot(t, basis, m, width, i, j);
    }
    panic!("reference simplex did not terminate");
}

/// Transportation problem via [`lp_minimize`] on the explicit equality form.
pub fn transport_lp(fx: &[f64], fy: &[f64], cost: &[f64]) -> f64 {
    let (m, n) = (fx.len(), fy.len());
    let mut a = vec![0.0; (m + n) * m * n];
    for i in 0..m {
        for j in 0..n {
            a[i * m * n + i * n + j] = 1.0;
            a[(m + j) * m * n + i * n + j] = 1.0;
        }
    }
    let b: Vec<f64> = fx.iter().chain(fy).copied().collect();
    lp_minimize(&a, &b, cost).expect("balanced transport is feasible")
}

/// Transportation problem by enumerating every basic solution: each
/// spanning tree of the bipartite row/column graph with `m + n - 1` cells.
/// Feasible for small `m * n` only.
pub fn transport_vertices(fx: &[f64], fy: &[f64], cost: &[f64]) -> f64 {
    let (m, n) = (fx.len(), fy.len());
    let cells = m * n;
    let size = m + n - 1;
    let mut best = f64::INFINITY;
    let mut chosen = Vec::with_capacity(size);
    enumerate(cells, size, 0, &mut chosen, &mut |subset| {
        if let Some(value) = tree_solution(fx, fy, cost, subset) {
            best = best.min(value);
        }
    });
    best
}

fn enumerate(total: usize, size: usize, start: usize, chosen: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
    if chosen.len() == size {
        f(chosen);
        return;
    }
    for k in start..total {
        if total - k < size - chosen.len() {
            break;
        }
        chosen.push(k);
        enumerate(total, size, k + 1, chosen, f);
        chosen.pop();
    }
}

fn tree_solution(fx: &[f64], fy: &[f64], cost: &[f64], subset: &[usize]) -> Option<f64> {
    let (m, n) = (fx.len(), fy.len());
    let mut parent: Vec<usize> = (0..m + n).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut x = x;
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for &c in subset {
        let (a, b) = (find(&mut parent, c / n), find(&mut parent, m + c % n));
        if a == b {
            return None;
        }
        parent[a] = b;
    }
    // Solve by repeatedly fixing a cell that is alone in its row or column.
    let mut residual: Vec<f64> = fx.iter().chain(fy).copied().collect();
    let mut open: Vec<usize> = subset.to_vec();
    let mut value = 0.0;
    while !open.is_empty() {
        let mut degree = vec![0usize; m + n];
        for &c in &open {
            degree[c / n] += 1;
            degree[m + c % n] += 1;
        }
        let pos = open
            .iter()
            .position(|&c| degree[c / n] == 1 || degree[m + c % n] == 1)
            .expect("a tree has a leaf");
        let c = open.remove(pos);
        let (r, col) = (c / n, m + c % n);
        let f = if degree[r] == 1 { residual[r] } else { residual[col] };
        if f < -1e-12 {
            return None;
        }
        residual[r] -= f;
        residual[col] -= f;
        value += f * cost[c];
    }
    Some(value)
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// WMD between weighted point sets (row-major points of dimension `dim`).
pub fn wmd_oracle(xs: &[f64], wx: &[f64], ys: &[f64], wy: &[f64], dim: usize) -> f64 {
    let cost: Vec<f64> = xs
        .chunks(dim)
        .flat_map(|x| ys.chunks(dim).map(move |y| euclidean(x, y)))
        .collect();
    transport_lp(wx, wy, &cost)
}

/// KNN by full sort and explicit vote counting.
pub fn knn_brute_force(train_labels: &[usize], dist_rows: &[Vec<f64>], k: usize) -> Vec<usize> {
    dist_rows
        .iter()
        .map(|row| {
            let mut pairs: Vec<(f64, usize)> = row.iter().copied().zip(0..).collect();
            pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
            let mut tally: BTreeMap<usize, (usize, f64)> = BTreeMap::new();
            for &(d, i) in &pairs[..k] {
                let e = tally.entry(train_labels[i]).or_insert((0, 0.0));
                e.0 += 1;
                e.1 += d;
            }
            let most = tally.values().map(|v| v.0).max().unwrap();
            let mut best: Option<(usize, f64)> = None;
            for (&label, &(votes, sum)) in &tally {
                if votes == most && best.is_none_or(|(_, s)| sum < s) {
                    best = Some((label, sum));
                }
            }
            best.unwrap().0
        })
        .collect()
}

/// Pearson correlation by the two-pass formula.
pub fn pearson_two_pass(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (`n - 1` denominator).
pub fn sample_std(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)).sqrt()
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Central-difference gradient.
pub fn numerical_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|k| {
            probe[k] = x[k] + h;
            let up = f(&probe);
            probe[k] = x[k] - h;
            let down = f(&probe);
            probe[k] = x[k];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Reference tokenizer: lowercase, split on whitespace, strip leading and
/// trailing non-alphanumeric characters, drop empties and stop words.
pub fn reference_tokenize(text: &str, stopwords: &[&str]) -> Vec<String> {
    let mut out = Vec::new();
    for raw in text.split_whitespace() {
        let lower = raw.to_lowercase();
        let chars: Vec<char> = lower.chars().collect();
        let mut a = 0;
        let mut b = chars.len();
        while a < b && !chars[a].is_alphanumeric() {
            a += 1;
        }
        while b > a && !chars[b - 1].is_alphanumeric() {
            b -= 1;
        }
        let token: String = chars[a..b].iter().collect();
        if !token.is_empty() && !stopwords.contains(&token.as_str()) {
            out.push(token);
        }
    }
    out
}

/// Random probability vector with rational entries `k / denominator`.
pub fn rational_simplex(rng: &mut impl Rng, len: usize, denominator: u32) -> Vec<f64> {
    assert!(denominator as usize >= len);
    let mut counts = vec![1u32; len];
    for _ in 0..denominator as usize - len {
        counts[rng.gen_range(0..len)] += 1;
    }
    counts.iter().map(|&c| c as f64 / denominator as f64).collect()
}

/// Random probability vector with strictly positive entries.
pub fn random_simplex(rng: &mut impl Rng, len: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..len).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|x| x / total).collect()
}

/// Word vectors in two (or more) well-separated clusters.
#[derive(Clone, Debug)]
pub struct ClusteredVocabulary {
    pub dim: usize,
    /// `(token, vector)`; tokens of cluster `c` are `c{c}w{k}`.
    pub entries: Vec<(String, Vec<f32>)>,
    pub clusters: usize,
    pub words_per_cluster: usize,
}

impl ClusteredVocabulary {
    /// Cluster `c` is centered at `separation * e_c` (axis `c mod dim`, sign
    /// alternating past `dim`), with per-coordinate noise in `[-spread, spread]`.
    pub fn generate(
        seed: u64,
        dim: usize,
        clusters: usize,
        words_per_cluster: usize,
        separation: f32,
        spread: f32,
    ) -> Self {
        let mut r = rng(seed);
        let mut entries = Vec::new();
        for c in 0..clusters {
            let mut center = vec![0.0f32; dim];
            let sign = if (c / dim).is_multiple_of(2) { 1.0 } else { -1.0 };
            center[c % dim] = sign * separation;
            for k in 0..words_per_cluster {
                let v = center
                    .iter()
                    .map(|&x| x + r.gen_range(-spread..=spread))
                    .collect();
                entries.push((format!("c{c}w{k}"), v));
            }
        }
        ClusteredVocabulary {
            dim,
            entries,
            clusters,
            words_per_cluster,
        }
    }

    pub fn token(&self, cluster: usize, k: usize) -> &str {
        &self.entries[cluster * self.words_per_cluster + k].0
    }
}

/// Labeled documents whose words come mostly from their class's cluster.
/// Returns `(label, text)` pairs with labels `class0`, `class1`, ...
pub fn clustered_documents(
    vocab: &ClusteredVocabulary,
    seed: u64,
    per_class: usize,
    mean_len: usize,
    noise: f64,
) -> Vec<(String, String)> {
    let mut r = rng(seed);
    let mut docs = Vec::new();
    for i in 0..per_class * vocab.clusters {
        let class = i % vocab.clusters;
        let len = r.gen_range(mean_len.div_ceil(2)..=mean_len + mean_len / 2).max(1);
        let words: Vec<&str> = (0..len)
            .map(|_| {
                let c = if r.gen_bool(noise) {
                    r.gen_range(0..vocab.clusters)
                } else {
                    class
                };
                vocab.token(c, r.gen_range(0..vocab.words_per_cluster))
            })
            .collect();
        docs.push((format!("class{class}"), words.join(" ")));
    }
    docs
}

/// Random word vectors with coordinates uniform in `[-1, 1]`.
pub fn random_vocabulary(seed: u64, size: usize, dim: usize) -> Vec<(String, Vec<f32>)> {
    let mut r = rng(seed);
    (0..size)
        .map(|k| {
            let v = (0..dim).map(|_| r.gen_range(-1.0f32..=1.0)).collect();
            (format!("w{k}"), v)
        })
        .collect()
}

/// Bytes of a word2vec binary file written from its definition.
pub fn word2vec_binary_bytes(dim: usize, entries: &[(String, Vec<f32>)]) -> Vec<u8> {
    let mut out = format!("{} {}\n", entries.len(), dim).into_bytes();
    for (token, v) in entries {
        out.extend_from_slice(token.as_bytes());
        out.push(b' ');
        for x in v {
            out.extend_from_slice(&x.to_le_bytes());
        }
        out.push(b'\n');
    }
    out
}
