//! Transportation simplex: exact solver for the balanced transport LP
//! min sum c_ij x_ij subject to row sums a, column sums b, x >= 0.
//!
//! Northwest-corner start, tree-structured basis with dual potentials,
//! most-negative entering rule with Bland's rule taking over during
//! degenerate runs (anti-cycling), lowest-index tie-break on the leaving
//! cell.

use crate::error::{HeatLabError, Result};
use ndarray::Array2;

/// Exact optimum of the transportation problem. `a` and `b` must be
/// componentwise positive or zero with equal totals (the column masses are
/// rescaled to the row total to absorb roundoff).
pub fn transport_simplex(cost: &Array2<f64>, a: &[f64], b: &[f64]) -> Result<(Array2<f64>, f64)> {
    let m = a.len();
    let n = b.len();
    assert_eq!(cost.nrows(), m);
    assert_eq!(cost.ncols(), n);
    let total_a: f64 = a.iter().sum();
    let total_b: f64 = b.iter().sum();
    if !(total_a > 0.0) || !(total_b > 0.0) {
        return Err(HeatLabError::NotNormalized(total_a.min(total_b)));
    }
    let scale = total_a / total_b;
    let b: Vec<f64> = b.iter().map(|&x| x * scale).collect();

    // northwest-corner initial basis: exactly m + n - 1 cells forming a tree
    let mut flow = Array2::<f64>::zeros((m, n));
    let mut basis: Vec<(usize, usize)> = Vec::with_capacity(m + n - 1);
    {
        let mut arem: Vec<f64> = a.to_vec();
        let mut brem: Vec<f64> = b.clone();
        let (mut i, mut j) = (0usize, 0usize);
        loop {
            let x = arem[i].min(brem[j]);
            flow[[i, j]] = x;
            basis.push((i, j));
            arem[i] -= x;
            brem[j] -= x;
            if i == m - 1 && j == n - 1 {
                break;
            }
            // advance along the exhausted side; on ties advance the row so
            // the basis keeps a zero cell and stays a spanning tree
            if i < m - 1 && (arem[i] <= brem[j] || j == n - 1) {
                i += 1;
            } else {
                j += 1;
            }
        }
    }

    let cost_scale = cost.iter().fold(0.0f64, |acc, &c| acc.max(c.abs()));
    let tol = 1e-12 * cost_scale.max(1.0);
    let max_pivots = 2000 * (m + n) * (m + n);
    let mut bland = false;
    let mut degenerate_run = 0usize;

    for _pivot in 0..max_pivots {
        // dual potentials from the basis tree: u_i + v_j = c_ij on basis
        let (u, v) = potentials(m, n, &basis, cost);

        // entering cell
        let mut entering: Option<(usize, usize)> = None;
        let mut most_negative = -tol;
        'scan: for i in 0..m {
            for j in 0..n {
                let red = cost[[i, j]] - u[i] - v[j];
                if red < -tol {
                    if bland {
                        entering = Some((i, j));
                        break 'scan;
                    }
                    if red < most_negative {
                        most_negative = red;
                        entering = Some((i, j));
                    }
                }
            }
        }
        let Some((ei, ej)) = entering else {
            let objective = basis
                .iter()
                .map(|&(i, j)| flow[[i, j]] * cost[[i, j]])
                .sum();
            return Ok((flow, objective));
        };

        // unique cycle: tree path from row ei to column ej plus the entering
        // cell; cells alternate +/- starting with + at the entering cell
        let path = tree_path(m, n, &basis, ei, ej);
        // theta = min flow over the cells that lose mass (even positions);
        // ties leave the lexicographically smallest cell (Bland-consistent)
        let mut theta = f64::INFINITY;
        for (pos, &(ci, cj)) in path.iter().enumerate() {
            if pos % 2 == 0 {
                theta = theta.min(flow[[ci, cj]]);
            }
        }
        let mut leaving_idx = usize::MAX;
        let mut leaving_cell = (usize::MAX, usize::MAX);
        for (pos, &(ci, cj)) in path.iter().enumerate() {
            if pos % 2 == 0 && flow[[ci, cj]] <= theta && (ci, cj) < leaving_cell {
                leaving_cell = (ci, cj);
                leaving_idx = pos;
            }
        }
        // apply the pivot
        flow[[ei, ej]] += theta;
        for (pos, &(ci, cj)) in path.iter().enumerate() {
            if pos % 2 == 0 {
                flow[[ci, cj]] -= theta;
            } else {
                flow[[ci, cj]] += theta;
            }
        }
        let leaving = path[leaving_idx];
        let k = basis.iter().position(|&c| c == leaving).expect("basic");
        basis.remove(k);
        basis.push((ei, ej));

        if theta <= tol {
            degenerate_run += 1;
            if degenerate_run > m + n {
                bland = true;
            }
        } else {
            degenerate_run = 0;
            bland = false;
        }
    }
    Err(HeatLabError::SimplexStalled { pivots: max_pivots })
}

/// Dual potentials on the basis tree, rooted at row 0 with u_0 = 0.
fn potentials(
    m: usize,
    n: usize,
    basis: &[(usize, usize)],
    cost: &Array2<f64>,
) -> (Vec<f64>, Vec<f64>) {
    let mut row_adj: Vec<Vec<usize>> = vec![Vec::new(); m];
    let mut col_adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for &(i, j) in basis {
        row_adj[i].push(j);
        col_adj[j].push(i);
    }
    let mut u = vec![f64::NAN; m];
    let mut v = vec![f64::NAN; n];
    u[0] = 0.0;
    // BFS over the bipartite tree
    let mut stack: Vec<(bool, usize)> = vec![(true, 0)];
    while let Some((is_row, idx)) = stack.pop() {
        if is_row {
            for &j in &row_adj[idx] {
                if v[j].is_nan() {
                    v[j] = cost[[idx, j]] - u[idx];
                    stack.push((false, j));
                }
            }
        } else {
            for &i in &col_adj[idx] {
                if u[i].is_nan() {
                    u[i] = cost[[i, idx]] - v[idx];
                    stack.push((true, i));
                }
            }
        }
    }
    (u, v)
}

/// Cells of the tree path from row `ei` to column `ej`, in cycle order
/// starting with the basis cell adjacent to the entering one on the minus
/// side. Positions 0, 2, ... lose flow; 1, 3, ... gain.
fn tree_path(
    m: usize,
    n: usize,
    basis: &[(usize, usize)],
    ei: usize,
    ej: usize,
) -> Vec<(usize, usize)> {
    // nodes: 0..m rows, m..m+n columns; edges = basis cells
    let nodes = m + n;
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); nodes]; // (neighbor, basis idx)
    for (k, &(i, j)) in basis.iter().enumerate() {
        adj[i].push((m + j, k));
        adj[m + j].push((i, k));
    }
    // BFS from row ei to column m + ej
    let mut parent: Vec<Option<(usize, usize)>> = vec![None; nodes]; // (prev node, basis idx)
    let mut visited = vec![false; nodes];
    visited[ei] = true;
    let mut queue = std::collections::VecDeque::from([ei]);
    while let Some(x) = queue.pop_front() {
        if x == m + ej {
            break;
        }
        for &(y, k) in &adj[x] {
            if !visited[y] {
                visited[y] = true;
                parent[y] = Some((x, k));
                queue.push_back(y);
            }
        }
    }
    // walk back from the column node, collecting basis cells; the first cell
    // on the walk is adjacent to ej (the minus side of the cycle)
    let mut cells = Vec::new();
    let mut node = m + ej;
    while let Some((prev, k)) = parent[node] {
        cells.push(basis[k]);
        node = prev;
    }
    cells
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;

    #[test]
    fn identical_marginals_zero_cost() {
        // diagonal cost zero: optimal plan is the diagonal
        let c = arr2(&[[0.0, 1.0], [1.0, 0.0]]);
        let (plan, obj) = transport_simplex(&c, &[0.4, 0.6], &[0.4, 0.6]).unwrap();
        assert!(obj.abs() < 1e-15);
        assert!((plan[[0, 0]] - 0.4).abs() < 1e-15);
        assert!((plan[[1, 1]] - 0.6).abs() < 1e-15);
    }

    #[test]
    fn translation_on_the_line() {
        // uniform on {0, 1} to uniform on {2, 3}: squared cost, W2^2 = 4
        let xs = [0.0, 1.0];
        let ys = [2.0, 3.0];
        let mut c = Array2::zeros((2, 2));
        for i in 0..2 {
            for j in 0..2 {
                c[[i, j]] = (xs[i] - ys[j]) * (xs[i] - ys[j]);
            }
        }
        let (_, obj) = transport_simplex(&c, &[0.5, 0.5], &[0.5, 0.5]).unwrap();
        assert!((obj - 4.0).abs() < 1e-12);
    }

    #[test]
    fn marginals_respected() {
        let c = arr2(&[
            [0.0, 2.0, 1.5],
            [2.0, 0.0, 1.0],
            [1.0, 3.0, 0.5],
            [2.5, 1.0, 2.0],
        ]);
        let a = [0.1, 0.4, 0.3, 0.2];
        let b = [0.3, 0.3, 0.4];
        let (plan, _) = transport_simplex(&c, &a, &b).unwrap();
        for i in 0..4 {
            let row: f64 = (0..3).map(|j| plan[[i, j]]).sum();
            assert!((row - a[i]).abs() < 1e-12);
        }
        for j in 0..3 {
            let col: f64 = (0..4).map(|i| plan[[i, j]]).sum();
            assert!((col - b[j]).abs() < 1e-12);
        }
        assert!(plan.iter().all(|&x| x >= 0.0));
    }

    /// brute force over all bases: every vertex of the transportation
    /// polytope is a spanning-tree solution; enumerate subsets of m+n-1
    /// cells, solve the tree flows, keep feasible ones
    fn brute_force_lp(cost: &Array2<f64>, a: &[f64], b: &[f64]) -> f64 {
        let m = a.len();
        let n = b.len();
        let cells: Vec<(usize, usize)> = (0..m).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
        let k = m + n - 1;
        let mut best = f64::INFINITY;
        let mut chosen = vec![0usize; k];
        fn rec(
            cells: &[(usize, usize)],
            chosen: &mut Vec<usize>,
            depth: usize,
            start: usize,
            k: usize,
            m: usize,
            n: usize,
            a: &[f64],
            b: &[f64],
            cost: &Array2<f64>,
            best: &mut f64,
        ) {
            if depth == k {
                if let Some(v) = solve_tree(cells, chosen, m, n, a, b, cost) {
                    if v < *best {
                        *best = v;
                    }
                }
                return;
            }
            for c in start..cells.len() {
                chosen[depth] = c;
                rec(cells, chosen, depth + 1, c + 1, k, m, n, a, b, cost, best);
            }
        }
        rec(&cells, &mut chosen, 0, 0, k, m, n, a, b, cost, &mut best);
        best
    }

    fn solve_tree(
        cells: &[(usize, usize)],
        chosen: &[usize],
        m: usize,
        n: usize,
        a: &[f64],
        b: &[f64],
        cost: &Array2<f64>,
    ) -> Option<f64> {
        // peel leaves of the bipartite graph; a spanning tree resolves fully
        let mut deg = vec![0usize; m + n];
        let mut arem = a.to_vec();
        let mut brem = b.to_vec();
        let mut alive: Vec<(usize, usize)> = chosen.iter().map(|&c| cells[c]).collect();
        for &(i, j) in &alive {
            deg[i] += 1;
            deg[m + j] += 1;
        }
        let mut obj = 0.0;
        while !alive.is_empty() {
            let mut progressed = false;
            let mut next = Vec::with_capacity(alive.len());
            for &(i, j) in &alive {
                if deg[i] == 1 {
                    let x = arem[i];
                    if x < -1e-12 {
                        return None;
                    }
                    obj += x * cost[[i, j]];
                    arem[i] = 0.0;
                    brem[j] -= x;
                    deg[i] -= 1;
                    deg[m + j] -= 1;
                    progressed = true;
                } else if deg[m + j] == 1 {
                    let x = brem[j];
                    if x < -1e-12 {
                        return None;
                    }
                    obj += x * cost[[i, j]];
                    brem[j] = 0.0;
                    arem[i] -= x;
                    deg[i] -= 1;
                    deg[m + j] -= 1;
                    progressed = true;
                } else {
                    next.push((i, j));
                }
            }
            if !progressed {
                return None; // cycle: not a tree
            }
            alive = next;
        }
        // all remaining masses must be zero and no negative flow occurred
        if arem.iter().chain(brem.iter()).any(|&x| x.abs() > 1e-9) {
            return None;
        }
        Some(obj)
    }

    #[test]
    fn simplex_matches_brute_force_on_random_instances() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        for _ in 0..20 {
            let m = rng.gen_range(2..=4);
            let n = rng.gen_range(2..=4);
            let mut c = Array2::zeros((m, n));
            for i in 0..m {
                for j in 0..n {
                    c[[i, j]] = rng.gen_range(0.0..3.0);
                }
            }
            let mut a: Vec<f64> = (0..m).map(|_| rng.gen_range(0.1..1.0)).collect();
            let ta: f64 = a.iter().sum();
            for x in &mut a {
                *x /= ta;
            }
            let mut b: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..1.0)).collect();
            let tb: f64 = b.iter().sum();
            for x in &mut b {
                *x /= tb;
            }
            let (_, obj) = transport_simplex(&c, &a, &b).unwrap();
            let brute = brute_force_lp(&c, &a, &b);
            assert!((obj - brute).abs() < 1e-9, "simplex {obj} vs brute {brute}");
        }
    }

    #[test]
    fn degenerate_instances_terminate() {
        // many equal masses and ties: plenty of zero pivots
        let m = 6;
        let c = Array2::from_shape_fn((m, m), |(i, j)| ((i + 2 * j) % 3) as f64);
        let a = vec![1.0 / m as f64; m];
        let (plan, obj) = transport_simplex(&c, &a, &a).unwrap();
        assert!(obj >= 0.0);
        for i in 0..m {
            let row: f64 = (0..m).map(|j| plan[[i, j]]).sum();
            assert!((row - a[i]).abs() < 1e-12);
        }
    }
}
