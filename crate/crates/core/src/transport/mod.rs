//! Exact discrete optimal transport between empirical marginals.

mod simplex;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::adversaries::Adversary;
use crate::data::EmpiricalMarginal;
use crate::distortion::Scorer;
use crate::error::{Error, Result};
use crate::kernel::{euclidean, Kernel};
use crate::losses::ProperLoss;

pub(crate) use simplex::Basis;

/// Marginal tolerance asserted on every returned coupling.
pub const MARGINAL_TOL: f64 = 1e-10;

/// Radicands of feature-space distances above this are clamped to zero.
pub const RADICAND_TOL: f64 = -1e-10;

/// Ground costs understood by the CLI and the experiment configs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cost {
    Euclidean,
    L1,
    SqEuclidean,
    /// `‖Φ(x) − Φ(y)‖` in the feature space of a kernel.
    Feature(Kernel),
}

impl Cost {
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        match self {
            Cost::Euclidean => Ok(euclidean(x, y)),
            Cost::L1 => Ok(x.iter().zip(y).map(|(a, b)| (a - b).abs()).sum()),
            Cost::SqEuclidean => Ok(x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()),
            Cost::Feature(k) => feature_distance(k, x, y),
        }
    }
}

impl FromStr for Cost {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "euclidean" => Ok(Cost::Euclidean),
            "l1" => Ok(Cost::L1),
            "sq_euclidean" => Ok(Cost::SqEuclidean),
            other => match other.strip_prefix("feature:") {
                Some(k) => Ok(Cost::Feature(k.parse()?)),
                None => Err(Error::invalid(format!("unknown cost '{other}'"))),
            },
        }
    }
}

impl fmt::Display for Cost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cost::Euclidean => write!(f, "euclidean"),
            Cost::L1 => write!(f, "l1"),
            Cost::SqEuclidean => write!(f, "sq_euclidean"),
            Cost::Feature(k) => write!(f, "feature:{k}"),
        }
    }
}

/// Dense non-negative cost matrix; `+∞` marks a forbidden pair.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
}

impl CostMatrix {
    pub fn new(rows: usize, cols: usize, entries: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::invalid("cost matrix must be non-empty"));
        }
        if entries.len() != rows * cols {
            return Err(Error::invalid(format!(
                "cost matrix has {} entries, expected {rows}×{cols}",
                entries.len()
            )));
        }
        if let Some(k) = entries.iter().position(|c| c.is_nan()) {
            return Err(Error::invalid(format!("NaN cost at ({}, {})", k / cols, k % cols)));
        }
        if let Some(k) = entries.iter().position(|&c| c < 0.0) {
            return Err(Error::invalid(format!(
                "negative cost {} at ({}, {})",
                entries[k],
                k / cols,
                k % cols
            )));
        }
        Ok(Self { rows, cols, entries })
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let entries = (0..rows * cols).map(|k| f(k / cols, k % cols)).collect();
        Self::new(rows, cols, entries)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.cols + j]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }
}

/// A transport plan between two mass vectors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Coupling {
    rows: usize,
    cols: usize,
    #[serde(skip)]
    weights: Vec<f64>,
    row_marginal: Vec<f64>,
    col_marginal: Vec<f64>,
}

impl Coupling {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.cols + j]
    }

    pub fn row_marginal(&self) -> &[f64] {
        &self.row_marginal
    }

    pub fn col_marginal(&self) -> &[f64] {
        &self.col_marginal
    }

    /// Non-zero cells as `(row, col, weight)`, row-major.
    pub fn triples(&self) -> Vec<(usize, usize, f64)> {
        self.weights
            .iter()
            .enumerate()
            .filter(|(_, w)| **w > 0.0)
            .map(|(k, w)| (k / self.cols, k % self.cols, *w))
            .collect()
    }

    /// Largest absolute deviation of the row and column sums from the marginals.
    pub fn marginal_error(&self) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..self.rows {
            let s: f64 = self.weights[i * self.cols..(i + 1) * self.cols].iter().sum();
            worst = worst.max((s - self.row_marginal[i]).abs());
        }
        for j in 0..self.cols {
            let s: f64 = (0..self.rows).map(|i| self.weights[i * self.cols + j]).sum();
            worst = worst.max((s - self.col_marginal[j]).abs());
        }
        worst
    }

    /// `Σ weight·cost`, skipping empty cells so forbidden pairs contribute 0.
    pub fn cost(&self, cm: &CostMatrix) -> f64 {
        self.weights
            .iter()
            .zip(&cm.entries)
            .filter(|(w, _)| **w > 0.0)
            .map(|(w, c)| w * c)
            .sum()
    }
}

fn check_mass(mass: &[f64], what: &str) -> Result<()> {
    if mass.iter().any(|m| !(*m >= 0.0) || !m.is_finite()) {
        return Err(Error::invalid(format!("{what} mass must be finite and non-negative")));
    }
    let total: f64 = mass.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!("{what} mass sums to {total}, expected 1")));
    }
    Ok(())
}

/// A reduced problem with zero-mass rows and columns stripped.
struct Reduced {
    rows: Vec<usize>,
    cols: Vec<usize>,
    cost: Vec<f64>,
    supply: Vec<f64>,
    demand: Vec<f64>,
}

impl Reduced {
    fn new(cm: &CostMatrix, p: &[f64], n: &[f64]) -> Result<Self> {
        if p.len() != cm.rows || n.len() != cm.cols {
            return Err(Error::invalid(format!(
                "mass vectors of length {}/{} for a {}×{} cost matrix",
                p.len(),
                n.len(),
                cm.rows,
                cm.cols
            )));
        }
        check_mass(p, "row")?;
        check_mass(n, "column")?;
        let rows: Vec<usize> = (0..cm.rows).filter(|&i| p[i] > 0.0).collect();
        let cols: Vec<usize> = (0..cm.cols).filter(|&j| n[j] > 0.0).collect();
        for &i in &rows {
            if cols.iter().all(|&j| cm.get(i, j).is_infinite()) {
                return Err(Error::Infeasible(format!("row {i} has no finite cost")));
            }
        }
        for &j in &cols {
            if rows.iter().all(|&i| cm.get(i, j).is_infinite()) {
                return Err(Error::Infeasible(format!("column {j} has no finite cost")));
            }
        }
        let mut cost = Vec::with_capacity(rows.len() * cols.len());
        for &i in &rows {
            cost.extend(cols.iter().map(|&j| cm.get(i, j)));
        }
        Ok(Self {
            supply: rows.iter().map(|&i| p[i]).collect(),
            demand: cols.iter().map(|&j| n[j]).collect(),
            rows,
            cols,
            cost,
        })
    }

    fn solve(&self, warm: Option<&Basis>) -> Result<Basis> {
        let problem = simplex::Problem {
            rows: self.rows.len(),
            cols: self.cols.len(),
            cost: &self.cost,
            supply: &self.supply,
            demand: &self.demand,
        };
        let basis = problem.solve(warm)?;
        let stranded: f64 = basis
            .cells
            .iter()
            .zip(&basis.flows)
            .filter(|(&(i, j), _)| self.cost[i * self.cols.len() + j].is_infinite())
            .map(|(_, f)| *f)
            .sum();
        if stranded > 1e-12 {
            return Err(Error::Infeasible(format!(
                "mass {stranded:e} must travel along forbidden pairs"
            )));
        }
        Ok(basis)
    }

    fn value(&self, basis: &Basis) -> f64 {
        let n = self.cols.len();
        basis
            .cells
            .iter()
            .zip(&basis.flows)
            .filter(|(_, f)| **f > 0.0)
            .map(|(&(i, j), f)| {
                let c = self.cost[i * n + j];
                if c.is_finite() {
                    f * c
                } else {
                    0.0
                }
            })
            .sum()
    }
}

/// Exact minimiser of `Σ μ_ij·c_ij` over couplings of `p` and `n`.
pub fn optimal_coupling(cm: &CostMatrix, p: &[f64], n: &[f64]) -> Result<(Coupling, f64)> {
    let reduced = Reduced::new(cm, p, n)?;
    let basis = reduced.solve(None)?;
    let mut weights = vec![0.0; cm.rows * cm.cols];
    for (&(i, j), &f) in basis.cells.iter().zip(&basis.flows) {
        if f > 0.0 && cm.get(reduced.rows[i], reduced.cols[j]).is_finite() {
            weights[reduced.rows[i] * cm.cols + reduced.cols[j]] += f;
        }
    }
    let coupling = Coupling {
        rows: cm.rows,
        cols: cm.cols,
        weights,
        row_marginal: p.to_vec(),
        col_marginal: n.to_vec(),
    };
    let err = coupling.marginal_error();
    if err > MARGINAL_TOL {
        return Err(Error::Numeric(format!("coupling marginals off by {err:e}")));
    }
    let value = reduced.value(&basis);
    Ok((coupling, value))
}

/// Transport problem with fixed masses whose costs change between solves.
/// Each solve starts from the last committed optimal basis.
pub(crate) struct WarmTransport {
    reduced: Reduced,
    full_cols: usize,
    basis: Option<Basis>,
}

impl WarmTransport {
    pub fn new(cm: &CostMatrix, p: &[f64], n: &[f64]) -> Result<Self> {
        Ok(Self {
            reduced: Reduced::new(cm, p, n)?,
            full_cols: cm.cols,
            basis: None,
        })
    }

    /// Optimal value and basis for the full row-major cost matrix `cost`.
    pub fn solve(&mut self, cost: &[f64]) -> Result<(f64, Basis)> {
        let mut k = 0;
        for &i in &self.reduced.rows {
            for &j in &self.reduced.cols {
                self.reduced.cost[k] = cost[i * self.full_cols + j];
                k += 1;
            }
        }
        let basis = self.reduced.solve(self.basis.as_ref())?;
        Ok((self.reduced.value(&basis), basis))
    }

    pub fn commit(&mut self, basis: Basis) {
        self.basis = Some(basis);
    }

    /// Positive flows of a basis as `(row, col, flow)` in original indices.
    pub fn flows(&self, basis: &Basis) -> Vec<(usize, usize, f64)> {
        basis
            .cells
            .iter()
            .zip(&basis.flows)
            .filter(|(_, f)| **f > 0.0)
            .map(|(&(i, j), &f)| (self.reduced.rows[i], self.reduced.cols[j], f))
            .collect()
    }
}

/// `c(a(x_i), a(x′_j))` over the supports of `p` and `n`.
pub fn cost_matrix_with(
    c: impl Fn(&[f64], &[f64]) -> Result<f64>,
    a: &Adversary,
    p: &EmpiricalMarginal,
    n: &EmpiricalMarginal,
) -> Result<CostMatrix> {
    let ap: Vec<Vec<f64>> = p.support().iter().map(|x| a.apply_point(x)).collect();
    let an: Vec<Vec<f64>> = n.support().iter().map(|x| a.apply_point(x)).collect();
    let mut entries = Vec::with_capacity(ap.len() * an.len());
    for x in &ap {
        for y in &an {
            entries.push(c(x, y)?);
        }
    }
    CostMatrix::new(ap.len(), an.len(), entries)
}

pub fn cost_matrix(cost: &Cost, a: &Adversary, p: &EmpiricalMarginal, n: &EmpiricalMarginal) -> Result<CostMatrix> {
    cost_matrix_with(|x, y| cost.eval(x, y), a, p, n)
}

/// `C(a, P, N) = inf_μ ∫ c(a(x), a(x′)) dμ(x, x′)`.
pub fn monge_cost(a: &Adversary, p: &EmpiricalMarginal, n: &EmpiricalMarginal, cost: &Cost) -> Result<f64> {
    let cm = cost_matrix(cost, a, p, n)?;
    Ok(optimal_coupling(&cm, p.mass(), n.mass())?.1)
}

/// W1 under the ground cost `cost`. For one-dimensional supports with the
/// Euclidean or L1 cost the value is cross-checked against the quantile form.
pub fn wasserstein1(p: &EmpiricalMarginal, n: &EmpiricalMarginal, cost: &Cost) -> Result<f64> {
    if p.dim() != n.dim() {
        return Err(Error::invalid("marginal dimensions differ"));
    }
    let value = monge_cost(&Adversary::identity(), p, n, cost)?;
    if p.dim() == 1 && matches!(cost, Cost::Euclidean | Cost::L1) {
        let closed = w1_quantile_1d(p, n)?;
        if (closed - value).abs() > 1e-8 {
            return Err(Error::Numeric(format!(
                "W1 cross-check failed: simplex {value} vs quantile {closed}"
            )));
        }
    }
    Ok(value)
}

/// `∫ |F_P(t) − F_N(t)| dt` for one-dimensional marginals.
pub fn w1_quantile_1d(p: &EmpiricalMarginal, n: &EmpiricalMarginal) -> Result<f64> {
    if p.dim() != 1 || n.dim() != 1 {
        return Err(Error::invalid("quantile form needs one-dimensional marginals"));
    }
    let mut events: Vec<(f64, f64)> = p
        .support()
        .iter()
        .zip(p.mass())
        .map(|(x, m)| (x[0], *m))
        .chain(n.support().iter().zip(n.mass()).map(|(x, m)| (x[0], -*m)))
        .collect();
    events.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut diff = 0.0;
    let mut total = 0.0;
    for w in 0..events.len() {
        diff += events[w].1;
        if let Some(next) = events.get(w + 1) {
            total += diff.abs() * (next.0 - events[w].0);
        }
    }
    Ok(total)
}

/// `√(κ(x,x) − 2κ(x,y) + κ(y,y))`.
pub fn feature_distance(kernel: &Kernel, x: &[f64], y: &[f64]) -> Result<f64> {
    let r = kernel.eval(x, x) - 2.0 * kernel.eval(x, y) + kernel.eval(y, y);
    if r < RADICAND_TOL {
        return Err(Error::IndefiniteKernel(r));
    }
    Ok(r.max(0.0).sqrt())
}

pub fn feature_cost(kernel: Kernel) -> Cost {
    Cost::Feature(kernel)
}

/// W1 between the feature-space images of the marginals.
pub fn w1_phi(kernel: &Kernel, p: &EmpiricalMarginal, n: &EmpiricalMarginal) -> Result<f64> {
    wasserstein1(p, n, &Cost::Feature(*kernel))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LipschitzViolation {
    pub member: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LipschitzReport {
    pub k_hat: f64,
    pub violations: Vec<LipschitzViolation>,
    pub pairs_probed: usize,
    pub u: String,
    pub v: String,
}

/// Every ordered pair of points, the diagonal included.
pub fn all_ordered_pairs(points: &[Vec<f64>]) -> Vec<(Vec<f64>, Vec<f64>)> {
    let mut out = Vec::with_capacity(points.len() * points.len());
    for x in points {
        for y in points {
            out.push((x.clone(), y.clone()));
        }
    }
    out
}

/// Smallest `K` with `u(h(x)) − v(h(y)) ≤ K·c(x, y)` over the probes.
/// Pairs with zero cost and a positive left side are reported as violations.
pub fn lipschitz_estimate(
    class: &[Scorer],
    c: impl Fn(&[f64], &[f64]) -> f64,
    u: (&str, &dyn Fn(f64) -> f64),
    v: (&str, &dyn Fn(f64) -> f64),
    pairs: &[(Vec<f64>, Vec<f64>)],
) -> LipschitzReport {
    let mut k_hat = f64::NEG_INFINITY;
    let mut violations = Vec::new();
    for (idx, h) in class.iter().enumerate() {
        for (x, y) in pairs {
            let gap = (u.1)(h.eval(x)) - (v.1)(h.eval(y));
            let cost = c(x, y);
            if cost > 0.0 {
                k_hat = k_hat.max(gap / cost);
            } else if gap > 1e-9 {
                violations.push(LipschitzViolation {
                    member: idx,
                    x: x.clone(),
                    y: y.clone(),
                });
            }
        }
    }
    LipschitzReport {
        k_hat: if k_hat.is_finite() { k_hat.max(0.0) } else { 0.0 },
        violations,
        pairs_probed: pairs.len() * class.len(),
        u: u.0.to_string(),
        v: v.0.to_string(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BudgetMode {
    /// Canonical link, class `(Id, Id, K)`-Lipschitz.
    Canonical2K,
    /// General link, class `(π·g, (1−π)·g, K)`-Lipschitz.
    GeneralPiG,
    /// Canonical link dominated with constant `K_ℓ`, class `K`-Lipschitz.
    LinkDominated,
}

impl FromStr for BudgetMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "canonical_2K" | "canonical_2k" => Ok(Self::Canonical2K),
            "general_pi_g" => Ok(Self::GeneralPiG),
            "link_dominated" => Ok(Self::LinkDominated),
            other => Err(Error::invalid(format!("unknown budget mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MongeBudget {
    /// The usable δ, never negative.
    pub delta: f64,
    /// The formula value before clamping.
    pub raw: f64,
    /// Set when the formula is negative: no transport budget suffices.
    pub no_budget: bool,
}

/// Largest Monge budget δ that certifies an
/// ε-defeat.
pub fn monge_budget(
    loss: &ProperLoss,
    mode: BudgetMode,
    epsilon: f64,
    pi: f64,
    k: f64,
    k_ell: Option<f64>,
) -> Result<MongeBudget> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::Domain {
            what: "epsilon",
            value: epsilon,
            domain: "(0,1]",
        });
    }
    if !(k > 0.0) {
        return Err(Error::Domain {
            what: "Lipschitz constant K",
            value: k,
            domain: "(0,∞)",
        });
    }
    let blunt = loss.blunt();
    let delta = loss.delta(pi)?;
    let raw = match mode {
        BudgetMode::Canonical2K => (4.0 * epsilon * blunt - 2.0 * delta) / k,
        BudgetMode::GeneralPiG => 2.0 * (2.0 * epsilon * blunt - delta) / k,
        BudgetMode::LinkDominated => {
            let k_ell = k_ell.ok_or_else(|| Error::invalid("link_dominated mode needs K_ell"))?;
            if !(k_ell > 0.0) {
                return Err(Error::Domain {
                    what: "K_ell",
                    value: k_ell,
                    domain: "(0,∞)",
                });
            }
            (4.0 * epsilon * blunt - 2.0 * delta) / (k_ell * k)
        }
    };
    Ok(MongeBudget {
        delta: raw.max(0.0),
        raw,
        no_budget: raw < 0.0,
    })
}
