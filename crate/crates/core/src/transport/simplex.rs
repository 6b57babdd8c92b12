//! Transportation simplex.
//!
//! The basis is a spanning tree over `m` row nodes and `n` column nodes with
//! exactly `m + n - 1` basic cells. Entering cells follow the most negative
//! reduced cost (ties to the lowest row, then column); after a run of
//! degenerate pivots the solver falls back to Bland's first-improving rule
//! until progress resumes. Supplies are perturbed by `EPSILON` (and the last
//! demand by `m * EPSILON`) during pivoting; the reported flows are recomputed
//! on the final basis from the exact marginals.

use crate::error::{Error, Result};

use super::{CostMatrix, TransportPlan};

const EPSILON: f64 = 1e-13;
const MARGINAL_TOLERANCE: f64 = 1e-9;

pub fn solve(fx: &[f64], fy: &[f64], cost: &CostMatrix) -> Result<TransportPlan> {
    let m = fx.len();
    let n = fy.len();
    if cost.rows() != m || cost.cols() != n {
        return Err(Error::DimensionMismatch(format!(
            "marginals are {m}x{n} but the cost matrix is {}x{}",
            cost.rows(),
            cost.cols()
        )));
    }
    check_marginal("source", fx)?;
    check_marginal("target", fy)?;

    let supply: Vec<f64> = fx.iter().map(|&a| a + EPSILON).collect();
    let mut demand = fy.to_vec();
    demand[n - 1] += m as f64 * EPSILON;
    // Rebalance so both sides carry identical totals despite rounding.
    let gap = supply.iter().sum::<f64>() - demand.iter().sum::<f64>();
    demand[n - 1] += gap;

    let mut tree = Tree::least_cost(&supply, &demand, cost);
    tree.assign_flows(&supply, &demand);

    let scale = cost.as_slice().iter().fold(1.0f64, |acc, c| acc.max(c.abs()));
    let tolerance = 1e-12 * scale;
    let max_iterations = 50 * (m + n) * (m + n) + 1000;
    let mut degenerate_streak = 0usize;
    let mut iterations = 0usize;
    let mut u = vec![0.0; m];
    let mut v = vec![0.0; n];

    loop {
        tree.potentials(cost, &mut u, &mut v);
        let bland = degenerate_streak > m + n;
        let Some((ei, ej)) = entering_cell(cost, &u, &v, tolerance, bland) else {
            break;
        };
        iterations += 1;
        if iterations > max_iterations {
            return Err(Error::Numerical(format!(
                "transportation simplex did not converge in {max_iterations} pivots"
            )));
        }
        let theta = tree.pivot(ei, ej);
        if theta > 0.0 {
            degenerate_streak = 0;
        } else {
            degenerate_streak += 1;
        }
    }

    tree.assign_flows(fx, fy);
    let mut flow = vec![0.0; m * n];
    let mut objective = 0.0;
    for (&(i, j), &f) in tree.cells.iter().zip(&tree.flows) {
        let f = f.max(0.0);
        flow[i * n + j] = f;
        objective += cost.get(i, j) * f;
    }
    Ok(TransportPlan {
        rows: m,
        cols: n,
        flow,
        objective: objective.max(0.0),
        basis: tree.cells,
        row_potentials: u,
        col_potentials: v,
        iterations,
    })
}

fn check_marginal(name: &str, weights: &[f64]) -> Result<()> {
    if weights.is_empty() {
        return Err(Error::InvalidMarginal(format!("{name} marginal is empty")));
    }
    if let Some(w) = weights.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
        return Err(Error::InvalidMarginal(format!(
            "{name} marginal has non-positive entry {w}"
        )));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > MARGINAL_TOLERANCE {
        return Err(Error::InvalidMarginal(format!(
            "{name} marginal sums to {total}"
        )));
    }
    Ok(())
}

fn entering_cell(
    cost: &CostMatrix,
    u: &[f64],
    v: &[f64],
    tolerance: f64,
    first_improving: bool,
) -> Option<(usize, usize)> {
    let mut best: Option<(usize, usize)> = None;
    let mut best_reduced = -tolerance;
    for (i, &ui) in u.iter().enumerate() {
        let row = cost.row(i);
        for (j, (&c, &vj)) in row.iter().zip(v).enumerate() {
            let reduced = c - ui - vj;
            if reduced < best_reduced {
                if first_improving {
                    return Some((i, j));
                }
                best_reduced = reduced;
                best = Some((i, j));
            }
        }
    }
    best
}

struct Tree {
    m: usize,
    n: usize,
    cells: Vec<(usize, usize)>,
    flows: Vec<f64>,
    /// Basic cells incident to each node; rows are `0..m`, columns `m..m+n`.
    adjacency: Vec<Vec<usize>>,
}

impl Tree {
    /// Initial basis from the least-cost rule. Each allocation retires
    /// exactly one row or column, except the last which retires both, so the
    /// result has `m + n - 1` cells and spans all nodes.
    fn least_cost(supply: &[f64], demand: &[f64], cost: &CostMatrix) -> Self {
        let m = supply.len();
        let n = demand.len();
        let mut order: Vec<(usize, usize)> =
            (0..m).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
        order.sort_by(|a, b| {
            cost.get(a.0, a.1)
                .total_cmp(&cost.get(b.0, b.1))
                .then(a.cmp(b))
        });

        let mut rs = supply.to_vec();
        let mut cs = demand.to_vec();
        let mut row_done = vec![false; m];
        let mut col_done = vec![false; n];
        let (mut rows_left, mut cols_left) = (m, n);
        let mut cells = Vec::with_capacity(m + n - 1);

        for (i, j) in order {
            if row_done[i] || col_done[j] {
                continue;
            }
            let q = rs[i].min(cs[j]);
            cells.push((i, j));
            if rows_left == 1 && cols_left == 1 {
                break;
            }
            let retire_row = if rows_left == 1 {
                false
            } else if cols_left == 1 {
                true
            } else {
                rs[i] <= cs[j]
            };
            if retire_row {
                row_done[i] = true;
                rows_left -= 1;
                rs[i] = 0.0;
                cs[j] = (cs[j] - q).max(0.0);
            } else {
                col_done[j] = true;
                cols_left -= 1;
                cs[j] = 0.0;
                rs[i] = (rs[i] - q).max(0.0);
            }
        }
        debug_assert_eq!(cells.len(), m + n - 1);
        let mut tree = Tree {
            m,
            n,
            flows: vec![0.0; cells.len()],
            cells,
            adjacency: vec![Vec::new(); m + n],
        };
        tree.rebuild_adjacency();
        tree
    }

    fn rebuild_adjacency(&mut self) {
        for adj in self.adjacency.iter_mut() {
            adj.clear();
        }
        for (e, &(i, j)) in self.cells.iter().enumerate() {
            self.adjacency[i].push(e);
            self.adjacency[self.m + j].push(e);
        }
    }

    fn other_end(&self, e: usize, node: usize) -> usize {
        let (i, j) = self.cells[e];
        if node == i {
            self.m + j
        } else {
            i
        }
    }

    /// Basic flows for the given marginals, by repeatedly peeling leaves.
    fn assign_flows(&mut self, supply: &[f64], demand: &[f64]) {
        let nodes = self.m + self.n;
        let mut residual: Vec<f64> = supply.iter().chain(demand).copied().collect();
        let mut degree: Vec<usize> = self.adjacency.iter().map(Vec::len).collect();
        let mut assigned = vec![false; self.cells.len()];
        // Lowest-index leaf first keeps the elimination order deterministic.
        let mut stack: Vec<usize> = (0..nodes).rev().filter(|&k| degree[k] == 1).collect();
        while let Some(node) = stack.pop() {
            if degree[node] != 1 {
                continue;
            }
            let Some(&e) = self.adjacency[node].iter().find(|&&e| !assigned[e]) else {
                continue;
            };
            assigned[e] = true;
            let f = residual[node];
            self.flows[e] = f;
            residual[node] = 0.0;
            degree[node] = 0;
            let other = self.other_end(e, node);
            residual[other] -= f;
            degree[other] -= 1;
            if degree[other] == 1 {
                stack.push(other);
            }
        }
    }

    fn potentials(&self, cost: &CostMatrix, u: &mut [f64], v: &mut [f64]) {
        let nodes = self.m + self.n;
        let mut seen = vec![false; nodes];
        let mut queue = std::collections::VecDeque::with_capacity(nodes);
        u[0] = 0.0;
        seen[0] = true;
        queue.push_back(0);
        while let Some(node) = queue.pop_front() {
            for &e in &self.adjacency[node] {
                let other = self.other_end(e, node);
                if seen[other] {
                    continue;
                }
                seen[other] = true;
                let (i, j) = self.cells[e];
                let c = cost.get(i, j);
                if other >= self.m {
                    v[j] = c - u[i];
                } else {
                    u[i] = c - v[j];
                }
                queue.push_back(other);
            }
        }
    }

    /// Brings cell `(ei, ej)` into the basis and returns the flow shifted
    /// around the cycle.
    fn pivot(&mut self, ei: usize, ej: usize) -> f64 {
        let nodes = self.m + self.n;
        let start = ei;
        let target = self.m + ej;
        let mut parent_edge = vec![usize::MAX; nodes];
        let mut seen = vec![false; nodes];
        seen[start] = true;
        let mut queue = std::collections::VecDeque::with_capacity(nodes);
        queue.push_back(start);
        'search: while let Some(node) = queue.pop_front() {
            for &e in &self.adjacency[node] {
                let other = self.other_end(e, node);
                if seen[other] {
                    continue;
                }
                seen[other] = true;
                parent_edge[other] = e;
                if other == target {
                    break 'search;
                }
                queue.push_back(other);
            }
        }

        // Walk from the entering column back to the entering row; edges
        // alternate between losing and gaining flow, starting with a loss.
        let mut path = Vec::new();
        let mut node = target;
        while node != start {
            let e = parent_edge[node];
            path.push(e);
            node = self.other_end(e, node);
        }

        let mut leaving = usize::MAX;
        let mut theta = f64::INFINITY;
        for &e in path.iter().step_by(2) {
            let f = self.flows[e];
            let better = f < theta || (f == theta && self.cells[e] < self.cells[leaving]);
            if better {
                theta = f;
                leaving = e;
            }
        }
        let theta = theta.max(0.0);
        for (k, &e) in path.iter().enumerate() {
            if k % 2 == 0 {
                self.flows[e] = (self.flows[e] - theta).max(0.0);
            } else {
                self.flows[e] += theta;
            }
        }
        self.cells[leaving] = (ei, ej);
        self.flows[leaving] = theta;
        self.rebuild_adjacency();
        theta
    }
}
