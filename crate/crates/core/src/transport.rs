//! Exact optimal transport between finite distributions.
//!
//! Solved with the transportation simplex (MODI): a northwest-corner basis, potentials
//! `u_i + v_j = c_ij` on basic cells, Dantzig's entering rule, and pivots along the unique
//! cycle through the spanning tree of basic cells. Every solution is checked against its
//! dual before it is returned.

use crate::error::{MdpError, Result};

/// Marginal mismatch tolerated before rebalancing.
pub const MARGINAL_TOL: f64 = 1e-9;
/// Relative primal-dual gap and dual infeasibility allowed by the certificate.
pub const CERTIFICATE_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct TransportSolution {
    pub cost: f64,
    /// Non-zero entries of the optimal coupling as `(i, j, mass)` in the caller's indices.
    pub plan: Vec<(usize, usize, f64)>,
    /// Dual potentials on the caller's indices; zero-mass atoms get 0.
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub pivots: usize,
}

/// `W(p, q)` under the row-major `ground` cost matrix of shape `p.len() × q.len()`.
pub fn kantorovich(p: &[f64], q: &[f64], ground: &[f64]) -> Result<f64> {
    let (m, n) = (p.len(), q.len());
    if ground.len() != m * n {
        return Err(MdpError::DimensionMismatch(format!(
            "ground cost has {} entries, expected {m}x{n}",
            ground.len()
        )));
    }
    if let Some(c) = ground.iter().find(|c| !(c.is_finite() && **c >= 0.0)) {
        return Err(MdpError::InvalidArgument(format!("ground cost entry {c} is not a finite non-negative number")));
    }
    for (name, dist) in [("p", p), ("q", q)] {
        let total: f64 = dist.iter().sum();
        if (total - 1.0).abs() > MARGINAL_TOL {
            return Err(MdpError::InfeasibleMarginals(format!("{name} sums to {total}")));
        }
    }
    if m == n && p == q && (0..m).all(|i| ground[i * n + i] == 0.0) {
        return Ok(0.0);
    }
    Ok(solve_transport(p, q, |i, j| ground[i * n + j])?.cost)
}

/// Minimum-cost coupling of `p` and `q` (equal total mass within [`MARGINAL_TOL`]).
pub fn solve_transport(p: &[f64], q: &[f64], cost: impl Fn(usize, usize) -> f64) -> Result<TransportSolution> {
    for (name, dist) in [("p", p), ("q", q)] {
        if let Some(x) = dist.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
            return Err(MdpError::InfeasibleMarginals(format!("{name} has invalid mass {x}")));
        }
    }
    let sp: f64 = p.iter().sum();
    let sq: f64 = q.iter().sum();
    if (sp - sq).abs() > MARGINAL_TOL * sp.max(1.0) {
        return Err(MdpError::InfeasibleMarginals(format!("total masses differ: {sp} vs {sq}")));
    }
    let rows: Vec<usize> = (0..p.len()).filter(|&i| p[i] > 0.0).collect();
    let cols: Vec<usize> = (0..q.len()).filter(|&j| q[j] > 0.0).collect();
    if rows.is_empty() || cols.is_empty() {
        return Err(MdpError::InfeasibleMarginals("a marginal has no mass".into()));
    }
    let supply: Vec<f64> = rows.iter().map(|&i| p[i]).collect();
    let scale = sp / sq;
    let demand: Vec<f64> = cols.iter().map(|&j| q[j] * scale).collect();
    let c: Vec<f64> = rows
        .iter()
        .flat_map(|&i| cols.iter().map(move |&j| (i, j)))
        .map(|(i, j)| cost(i, j))
        .collect();

    let reduced = Simplex::new(supply, demand, c).solve()?;

    let mut u = vec![0.0; p.len()];
    let mut v = vec![0.0; q.len()];
    for (k, &i) in rows.iter().enumerate() {
        u[i] = reduced.u[k];
    }
    for (k, &j) in cols.iter().enumerate() {
        v[j] = reduced.v[k];
    }
    let plan = reduced
        .basis
        .iter()
        .filter(|cell| cell.x > 0.0)
        .map(|cell| (rows[cell.i], cols[cell.j], cell.x))
        .collect();
    Ok(TransportSolution {
        cost: reduced.cost,
        plan,
        u,
        v,
        pivots: reduced.pivots,
    })
}

#[derive(Clone, Copy, Debug)]
struct Cell {
    i: usize,
    j: usize,
    x: f64,
}

struct Solved {
    cost: f64,
    basis: Vec<Cell>,
    u: Vec<f64>,
    v: Vec<f64>,
    pivots: usize,
}

struct Simplex {
    m: usize,
    n: usize,
    supply: Vec<f64>,
    demand: Vec<f64>,
    cost: Vec<f64>,
    basis: Vec<Cell>,
    cost_scale: f64,
}

impl Simplex {
    fn new(supply: Vec<f64>, demand: Vec<f64>, cost: Vec<f64>) -> Self {
        let (m, n) = (supply.len(), demand.len());
        let cost_scale = cost.iter().fold(1.0_f64, |acc, c| acc.max(c.abs()));
        let mut s = Self {
            m,
            n,
            supply,
            demand,
            cost,
            basis: Vec::with_capacity(m + n - 1),
            cost_scale,
        };
        s.northwest_corner();
        s
    }

    #[inline]
    fn c(&self, i: usize, j: usize) -> f64 {
        self.cost[i * self.n + j]
    }

    /// Produces exactly `m + n - 1` basic cells, keeping degenerate zeros so the basis stays a tree.
    fn northwest_corner(&mut self) {
        let mut s = self.supply.clone();
        let mut d = self.demand.clone();
        let (mut i, mut j) = (0, 0);
        loop {
            let last = i == self.m - 1 && j == self.n - 1;
            let x = if last { s[i].max(d[j]).max(0.0) } else { s[i].min(d[j]).max(0.0) };
            self.basis.push(Cell { i, j, x });
            if last {
                break;
            }
            s[i] -= x;
            d[j] -= x;
            if j == self.n - 1 || (i < self.m - 1 && s[i] <= d[j]) {
                i += 1;
            } else {
                j += 1;
            }
        }
    }

    fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.m + self.n];
        for (k, cell) in self.basis.iter().enumerate() {
            adj[cell.i].push(k);
            adj[self.m + cell.j].push(k);
        }
        adj
    }

    fn potentials(&self, adj: &[Vec<usize>]) -> (Vec<f64>, Vec<f64>) {
        let mut u = vec![f64::NAN; self.m];
        let mut v = vec![f64::NAN; self.n];
        u[0] = 0.0;
        let mut stack = vec![0usize];
        let mut seen = vec![false; self.m + self.n];
        seen[0] = true;
        while let Some(node) = stack.pop() {
            for &k in &adj[node] {
                let cell = self.basis[k];
                let (other, is_row) = if node < self.m { (self.m + cell.j, false) } else { (cell.i, true) };
                if seen[other] {
                    continue;
                }
                seen[other] = true;
                if is_row {
                    u[cell.i] = self.c(cell.i, cell.j) - v[cell.j];
                } else {
                    v[cell.j] = self.c(cell.i, cell.j) - u[cell.i];
                }
                stack.push(other);
            }
        }
        (u, v)
    }

    /// Basic cells on the tree path from column `j` to row `i`, in walking order.
    fn tree_path(&self, adj: &[Vec<usize>], i: usize, j: usize) -> Vec<usize> {
        let total = self.m + self.n;
        let mut parent: Vec<Option<usize>> = vec![None; total];
        let mut seen = vec![false; total];
        let mut queue = std::collections::VecDeque::from([i]);
        seen[i] = true;
        let target = self.m + j;
        while let Some(node) = queue.pop_front() {
            if node == target {
                break;
            }
            for &k in &adj[node] {
                let cell = self.basis[k];
                let other = if node < self.m { self.m + cell.j } else { cell.i };
                if !seen[other] {
                    seen[other] = true;
                    parent[other] = Some(k);
                    queue.push_back(other);
                }
            }
        }
        let mut path = Vec::new();
        let mut node = target;
        while node != i {
            let k = parent[node].expect("basis spans every row and column");
            path.push(k);
            let cell = self.basis[k];
            node = if node < self.m { self.m + cell.j } else { cell.i };
        }
        path
    }

    fn solve(mut self) -> Result<Solved> {
        let max_pivots = 50 * (self.m + self.n) * (self.m + self.n) + 1000;
        let entering_tol = 1e-13 * self.cost_scale;
        let mut pivots = 0;
        loop {
            let adj = self.adjacency();
            let (u, v) = self.potentials(&adj);
            let mut best = (0usize, 0usize, -entering_tol);
            for i in 0..self.m {
                for j in 0..self.n {
                    let r = self.c(i, j) - u[i] - v[j];
                    if r < best.2 {
                        best = (i, j, r);
                    }
                }
            }
            if best.2 >= -entering_tol {
                return self.certify(u, v, pivots);
            }
            if pivots == max_pivots {
                return Err(MdpError::Certificate(format!("no optimal basis after {pivots} pivots")));
            }
            pivots += 1;

            let (ei, ej, _) = best;
            let path = self.tree_path(&adj, ei, ej);
            // Cells at even positions lose mass, odd positions gain it.
            let (leave_pos, theta) = path
                .iter()
                .enumerate()
                .step_by(2)
                .map(|(pos, &k)| (pos, self.basis[k].x))
                .fold((usize::MAX, f64::INFINITY), |acc, (pos, x)| if x < acc.1 { (pos, x) } else { acc });
            for (pos, &k) in path.iter().enumerate() {
                let cell = &mut self.basis[k];
                if pos % 2 == 0 {
                    cell.x = (cell.x - theta).max(0.0);
                } else {
                    cell.x += theta;
                }
            }
            self.basis[path[leave_pos]] = Cell { i: ei, j: ej, x: theta };
        }
    }

    fn certify(self, u: Vec<f64>, v: Vec<f64>, pivots: usize) -> Result<Solved> {
        let primal: f64 = self.basis.iter().map(|cell| cell.x * self.c(cell.i, cell.j)).sum();
        let dual: f64 = self.supply.iter().zip(&u).map(|(a, ui)| a * ui).sum::<f64>()
            + self.demand.iter().zip(&v).map(|(b, vj)| b * vj).sum::<f64>();
        let bound = CERTIFICATE_TOL * self.cost_scale;
        let mut worst_reduced: f64 = 0.0;
        for i in 0..self.m {
            for j in 0..self.n {
                worst_reduced = worst_reduced.min(self.c(i, j) - u[i] - v[j]);
            }
        }
        if worst_reduced < -bound {
            return Err(MdpError::Certificate(format!("dual infeasible by {:.3e}", -worst_reduced)));
        }
        if (primal - dual).abs() > bound {
            return Err(MdpError::Certificate(format!("primal {primal} and dual {dual} disagree")));
        }
        Ok(Solved {
            cost: primal.max(0.0),
            basis: self.basis,
            u,
            v,
            pivots,
        })
    }
}
