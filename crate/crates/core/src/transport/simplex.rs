//! Primal network simplex for the balanced transportation problem.
//!
//! Costs are handled lexicographically as pairs `(infinite part, finite part)`
//! so that forbidden cells never need a big-M constant: a forbidden cell costs
//! `(1, 0)`, an ordinary one `(0, c)`. Any flow left on a forbidden cell at
//! optimality proves infeasibility.
//!
//! Pricing is Dantzig (most negative reduced cost). After a run of degenerate
//! pivots the solver switches to Bland's rule (first improving cell in
//! row-major order, lowest-index leaving cell) until a pivot makes progress.

use crate::error::{Error, Result};

/// Consecutive degenerate pivots tolerated before switching to Bland's rule.
const DEGENERATE_STREAK: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
struct Lex(f64, f64);

impl Lex {
    fn sub(self, o: Lex) -> Lex {
        Lex(self.0 - o.0, self.1 - o.1)
    }
}

/// A spanning-tree basis: `rows + cols − 1` cells with their flows.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Basis {
    pub cells: Vec<(usize, usize)>,
    pub flows: Vec<f64>,
}

pub(crate) struct Problem<'a> {
    pub rows: usize,
    pub cols: usize,
    /// Row-major, `+∞` marks a forbidden cell.
    pub cost: &'a [f64],
    pub supply: &'a [f64],
    pub demand: &'a [f64],
}

impl Problem<'_> {
    fn lex(&self, i: usize, j: usize) -> Lex {
        let c = self.cost[i * self.cols + j];
        if c.is_infinite() {
            Lex(1.0, 0.0)
        } else {
            Lex(0.0, c)
        }
    }

    fn northwest_corner(&self) -> Basis {
        let (m, n) = (self.rows, self.cols);
        let mut s = self.supply.to_vec();
        let mut d = self.demand.to_vec();
        let mut cells = Vec::with_capacity(m + n - 1);
        let mut flows = Vec::with_capacity(m + n - 1);
        let (mut i, mut j) = (0, 0);
        loop {
            let x = s[i].min(d[j]);
            cells.push((i, j));
            flows.push(x);
            s[i] -= x;
            d[j] -= x;
            if i == m - 1 && j == n - 1 {
                break;
            }
            if i == m - 1 {
                j += 1;
            } else if j == n - 1 || s[i] <= d[j] {
                i += 1;
            } else {
                j += 1;
            }
        }
        Basis { cells, flows }
    }

    /// Solves to optimality, starting from `warm` when it is a valid basis
    /// for this problem's dimensions.
    pub fn solve(&self, warm: Option<&Basis>) -> Result<Basis> {
        let (m, n) = (self.rows, self.cols);
        let mut basis = match warm {
            Some(b) if b.cells.len() == m + n - 1 && b.cells.iter().all(|&(i, j)| i < m && j < n) => b.clone(),
            _ => self.northwest_corner(),
        };

        let scale = self
            .cost
            .iter()
            .filter(|c| c.is_finite())
            .fold(0.0_f64, |a, &c| a.max(c.abs()));
        let tol = 1e-12 * scale;
        let max_pivots = 50 * (m * n + m + n) + 10_000;

        let mut tree = Tree::new(m, n);
        let mut u = vec![Lex(0.0, 0.0); m];
        let mut v = vec![Lex(0.0, 0.0); n];
        let mut streak = 0usize;

        for _ in 0..max_pivots {
            tree.rebuild(&basis.cells);
            if !tree.potentials(self, &basis.cells, &mut u, &mut v) {
                if warm.is_some() {
                    return self.solve(None);
                }
                return Err(Error::Numeric("transport basis is not a spanning tree".into()));
            }

            let bland = streak >= DEGENERATE_STREAK;
            let mut entering: Option<((usize, usize), Lex)> = None;
            'price: for (i, &ui) in u.iter().enumerate().take(m) {
                for (j, &vj) in v.iter().enumerate().take(n) {
                    let rc = self.lex(i, j).sub(ui).sub(vj);
                    let improving = rc.0 < -0.5 || (rc.0.abs() < 0.5 && rc.1 < -tol);
                    if !improving {
                        continue;
                    }
                    match entering {
                        Some((_, best)) if !(rc < best) => {}
                        _ => entering = Some(((i, j), rc)),
                    }
                    if bland {
                        break 'price;
                    }
                }
            }
            let Some(((ei, ej), _)) = entering else {
                return Ok(basis);
            };

            // Cycle: entering cell gets +θ, tree path from column ej back to
            // row ei alternates −, +, −, ...
            let path = tree.path(&basis.cells, ei, ej);
            let mut theta = f64::INFINITY;
            let mut leave: Option<usize> = None;
            for (k, &slot) in path.iter().enumerate() {
                if k % 2 == 0 {
                    let f = basis.flows[slot];
                    let better = match leave {
                        None => true,
                        Some(l) => f < theta || (f == theta && basis.cells[slot] < basis.cells[l]),
                    };
                    if better {
                        theta = f;
                        leave = Some(slot);
                    }
                }
            }
            let leave = leave.expect("cycle has a decreasing cell");
            for (k, &slot) in path.iter().enumerate() {
                if k % 2 == 0 {
                    basis.flows[slot] -= theta;
                } else {
                    basis.flows[slot] += theta;
                }
            }
            basis.cells[leave] = (ei, ej);
            basis.flows[leave] = theta;
            streak = if theta == 0.0 { streak + 1 } else { 0 };
        }
        Err(Error::Numeric(format!(
            "network simplex did not terminate within {max_pivots} pivots"
        )))
    }
}

/// Adjacency of the basis tree; nodes `0..m` are rows, `m..m+n` columns.
struct Tree {
    m: usize,
    adj: Vec<Vec<usize>>,
    parent: Vec<usize>,
    seen: Vec<bool>,
    queue: Vec<usize>,
}

const NONE: usize = usize::MAX;

impl Tree {
    fn new(m: usize, n: usize) -> Self {
        Self {
            m,
            adj: vec![Vec::new(); m + n],
            parent: vec![NONE; m + n],
            seen: vec![false; m + n],
            queue: Vec::with_capacity(m + n),
        }
    }

    fn rebuild(&mut self, cells: &[(usize, usize)]) {
        for a in &mut self.adj {
            a.clear();
        }
        for (slot, &(i, j)) in cells.iter().enumerate() {
            self.adj[i].push(slot);
            self.adj[self.m + j].push(slot);
        }
    }

    fn other(&self, cells: &[(usize, usize)], node: usize, slot: usize) -> usize {
        let (i, j) = cells[slot];
        if node < self.m {
            self.m + j
        } else {
            i
        }
    }

    /// Breadth-first search from `root`, filling `parent` with tree slots.
    /// Returns the number of nodes reached.
    fn bfs(&mut self, cells: &[(usize, usize)], root: usize) -> usize {
        self.seen.fill(false);
        self.parent.fill(NONE);
        self.queue.clear();
        self.queue.push(root);
        self.seen[root] = true;
        let mut head = 0;
        while head < self.queue.len() {
            let node = self.queue[head];
            head += 1;
            for k in 0..self.adj[node].len() {
                let slot = self.adj[node][k];
                let next = self.other(cells, node, slot);
                if !self.seen[next] {
                    self.seen[next] = true;
                    self.parent[next] = slot;
                    self.queue.push(next);
                }
            }
        }
        self.queue.len()
    }

    /// Dual potentials with `u₀ = 0`; false if the basis does not span.
    fn potentials(&mut self, p: &Problem, cells: &[(usize, usize)], u: &mut [Lex], v: &mut [Lex]) -> bool {
        if self.bfs(cells, 0) != self.adj.len() {
            return false;
        }
        u[0] = Lex(0.0, 0.0);
        for k in 1..self.queue.len() {
            let node = self.queue[k];
            let (i, j) = cells[self.parent[node]];
            let c = p.lex(i, j);
            if node < self.m {
                u[node] = c.sub(v[j]);
            } else {
                v[node - self.m] = c.sub(u[i]);
            }
        }
        true
    }

    /// Tree slots on the path from column `col` to row `row`, in that order.
    fn path(&mut self, cells: &[(usize, usize)], row: usize, col: usize) -> Vec<usize> {
        self.bfs(cells, row);
        let mut out = Vec::new();
        let mut node = self.m + col;
        while node != row {
            let slot = self.parent[node];
            out.push(slot);
            node = self.other(cells, node, slot);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn value(p: &Problem, b: &Basis) -> f64 {
        b.cells
            .iter()
            .zip(&b.flows)
            .map(|(&(i, j), f)| if *f > 0.0 { f * p.cost[i * p.cols + j] } else { 0.0 })
            .sum()
    }

    #[test]
    fn northwest_corner_is_a_spanning_tree() {
        let cost = vec![0.0; 12];
        let p = Problem {
            rows: 3,
            cols: 4,
            cost: &cost,
            supply: &[0.5, 0.25, 0.25],
            demand: &[0.25, 0.25, 0.25, 0.25],
        };
        let b = p.northwest_corner();
        assert_eq!(b.cells.len(), 6);
        let mut tree = Tree::new(3, 4);
        tree.rebuild(&b.cells);
        assert_eq!(tree.bfs(&b.cells, 0), 7);
    }

    #[test]
    fn solves_small_assignment() {
        // Anti-diagonal is optimal.
        let cost = vec![4.0, 1.0, 1.0, 4.0];
        let p = Problem {
            rows: 2,
            cols: 2,
            cost: &cost,
            supply: &[0.5, 0.5],
            demand: &[0.5, 0.5],
        };
        let b = p.solve(None).unwrap();
        assert_eq!(value(&p, &b), 1.0);
    }

    #[test]
    fn warm_start_reaches_same_optimum() {
        let cost: Vec<f64> = (0..20).map(|k| ((k * 7) % 11) as f64).collect();
        let p = Problem {
            rows: 4,
            cols: 5,
            cost: &cost,
            supply: &[0.1, 0.2, 0.3, 0.4],
            demand: &[0.2; 5],
        };
        let cold = p.solve(None).unwrap();
        let mut cost2 = cost.clone();
        cost2[3] = 0.0;
        let p2 = Problem { cost: &cost2, ..p };
        let warm = p2.solve(Some(&cold)).unwrap();
        let fresh = p2.solve(None).unwrap();
        assert!((value(&p2, &warm) - value(&p2, &fresh)).abs() < 1e-12);
    }
}
