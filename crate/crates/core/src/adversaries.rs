//! Concrete adversaries `a : X → X`.
//!
//! Every adversary carries a stable id, the digest of its parameters, so that
//! certificates and reports can name the exact map they were computed for.

use std::collections::HashMap;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{EmpiricalMarginal, LabeledDataset};
use crate::digest;
use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::transport::{feature_distance, CostMatrix, WarmTransport};

/// Slack allowed on the L1 budget of a perturbation table.
pub const BUDGET_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableEntry {
    pub x: Vec<f64>,
    pub image: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AdversaryKind {
    Identity,
    /// `x ↦ λx + (1−λ)·target`.
    MixupToPoint { lambda: f64, target: Vec<f64> },
    /// Tabulated images with `‖a(x) − x‖₁ ≤ alpha`; other points are fixed.
    PerturbationTable { alpha: f64, entries: Vec<TableEntry> },
    /// `base` composed with itself `times` times.
    Iterated { base: Box<Adversary>, times: usize },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "AdversaryDto", into = "AdversaryDto")]
pub struct Adversary {
    kind: AdversaryKind,
    id: String,
    lookup: Option<Arc<HashMap<Vec<u64>, usize>>>,
}

impl PartialEq for Adversary {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}

#[derive(Serialize, Deserialize)]
struct AdversaryDto {
    #[serde(default, skip_deserializing)]
    id: String,
    #[serde(flatten)]
    kind: AdversaryKind,
}

impl TryFrom<AdversaryDto> for Adversary {
    type Error = Error;
    fn try_from(dto: AdversaryDto) -> Result<Self> {
        Adversary::from_kind(dto.kind)
    }
}

impl From<Adversary> for AdversaryDto {
    fn from(a: Adversary) -> Self {
        AdversaryDto { id: a.id, kind: a.kind }
    }
}

fn key(x: &[f64]) -> Vec<u64> {
    x.iter().map(|v| (v + 0.0).to_bits()).collect()
}

fn l1(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b).abs()).sum()
}

impl Adversary {
    /// Validates the parameters and computes the id.
    pub fn from_kind(kind: AdversaryKind) -> Result<Self> {
        let mut lookup = None;
        match &kind {
            AdversaryKind::Identity => {}
            AdversaryKind::MixupToPoint { lambda, target } => {
                if !(0.0..=1.0).contains(lambda) {
                    return Err(Error::Domain {
                        what: "mixup lambda",
                        value: *lambda,
                        domain: "[0,1]",
                    });
                }
                if target.is_empty() || target.iter().any(|v| !v.is_finite()) {
                    return Err(Error::invalid("mixup target must be a finite non-empty vector"));
                }
            }
            AdversaryKind::PerturbationTable { alpha, entries } => {
                if !(*alpha >= 0.0) || !alpha.is_finite() {
                    return Err(Error::Domain {
                        what: "perturbation budget",
                        value: *alpha,
                        domain: "[0,∞)",
                    });
                }
                let mut map = HashMap::with_capacity(entries.len());
                for (k, e) in entries.iter().enumerate() {
                    if e.x.len() != e.image.len() {
                        return Err(Error::invalid("table entry changes dimension"));
                    }
                    let moved = l1(&e.x, &e.image);
                    if !(moved <= alpha + BUDGET_TOL) {
                        return Err(Error::invalid(format!(
                            "table entry {k} moves by {moved} in L1, budget is {alpha}"
                        )));
                    }
                    if map.insert(key(&e.x), k).is_some() {
                        return Err(Error::invalid(format!("table entry {k} duplicates an earlier point")));
                    }
                }
                lookup = Some(Arc::new(map));
            }
            AdversaryKind::Iterated { times, .. } => {
                if *times < 1 {
                    return Err(Error::invalid("iteration count must be at least 1"));
                }
            }
        }
        let id = digest::of_json(&kind);
        Ok(Self { kind, id, lookup })
    }

    pub fn identity() -> Self {
        Self::from_kind(AdversaryKind::Identity).expect("identity is valid")
    }

    /// `a(x) = λx + (1−λ)·target`.
    pub fn mixup_to_point(lambda: f64, target: Vec<f64>) -> Result<Self> {
        Self::from_kind(AdversaryKind::MixupToPoint { lambda, target })
    }

    pub fn perturbation_table(alpha: f64, entries: Vec<TableEntry>) -> Result<Self> {
        Self::from_kind(AdversaryKind::PerturbationTable { alpha, entries })
    }

    pub fn kind(&self) -> &AdversaryKind {
        &self.kind
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn apply_point(&self, x: &[f64]) -> Vec<f64> {
        match &self.kind {
            AdversaryKind::Identity => x.to_vec(),
            AdversaryKind::MixupToPoint { lambda, target } => {
                x.iter().zip(target).map(|(a, t)| lambda * a + (1.0 - lambda) * t).collect()
            }
            AdversaryKind::PerturbationTable { entries, .. } => {
                let lookup = self.lookup.as_ref().expect("table adversaries carry a lookup");
                match lookup.get(&key(x)) {
                    Some(&k) => entries[k].image.clone(),
                    None => x.to_vec(),
                }
            }
            AdversaryKind::Iterated { base, times } => {
                let mut y = x.to_vec();
                for _ in 0..*times {
                    y = base.apply_point(&y);
                }
                y
            }
        }
    }

    /// Maps every point; labels and weights are untouched.
    pub fn apply(&self, ds: &LabeledDataset) -> Result<LabeledDataset> {
        self.check_dim(ds.dim())?;
        ds.with_points(ds.points().iter().map(|x| self.apply_point(x)).collect())
    }

    /// Push-forward of a marginal.
    pub fn push_forward(&self, q: &EmpiricalMarginal) -> Result<EmpiricalMarginal> {
        self.check_dim(q.dim())?;
        q.map(|x| self.apply_point(x))
    }

    fn check_dim(&self, d: usize) -> Result<()> {
        let expected = match &self.kind {
            AdversaryKind::MixupToPoint { target, .. } => Some(target.len()),
            AdversaryKind::PerturbationTable { entries, .. } => entries.first().map(|e| e.x.len()),
            AdversaryKind::Iterated { base, .. } => return base.check_dim(d),
            AdversaryKind::Identity => None,
        };
        match expected {
            Some(e) if e != d => Err(Error::invalid(format!(
                "adversary acts on dimension {e}, data has dimension {d}"
            ))),
            _ => Ok(()),
        }
    }
}

/// The composition `a ∘ … ∘ a` (`times` factors).
pub fn iterate(a: &Adversary, times: usize) -> Result<Adversary> {
    if times < 1 {
        return Err(Error::invalid("iteration count must be at least 1"));
    }
    match &a.kind {
        AdversaryKind::Iterated { base, times: t } => Adversary::from_kind(AdversaryKind::Iterated {
            base: base.clone(),
            times: t * times,
        }),
        _ => Adversary::from_kind(AdversaryKind::Iterated {
            base: Box::new(a.clone()),
            times,
        }),
    }
}

/// `λ = min(1, δ / W1)`. The flag is set when `W1 = 0`, where every λ works.
pub fn mixup_lambda_for_budget(delta: f64, w1: f64) -> Result<(f64, bool)> {
    if !(delta >= 0.0) {
        return Err(Error::Domain {
            what: "Monge budget",
            value: delta,
            domain: "[0,∞)",
        });
    }
    if !(w1 >= 0.0) {
        return Err(Error::Domain {
            what: "W1",
            value: w1,
            domain: "[0,∞)",
        });
    }
    if w1 == 0.0 {
        return Ok((1.0, true));
    }
    Ok(((delta / w1).min(1.0), false))
}

/// Euclidean projection onto the L1 ball of radius `r`.
pub fn project_l1(v: &[f64], r: f64) -> Vec<f64> {
    if r <= 0.0 {
        return vec![0.0; v.len()];
    }
    let norm: f64 = v.iter().map(|x| x.abs()).sum();
    if norm <= r {
        return v.to_vec();
    }
    let mut u: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cumsum += uj;
        let t = (cumsum - r) / (j + 1) as f64;
        if uj - t > 0.0 {
            theta = t;
        } else {
            break;
        }
    }
    let mut out: Vec<f64> = v.iter().map(|x| x.signum() * (x.abs() - theta).max(0.0)).collect();
    // Rounding can leave the result a hair outside the ball.
    let n: f64 = out.iter().map(|x| x.abs()).sum();
    if n > r {
        let s = r / n;
        out.iter_mut().for_each(|x| *x *= s);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MongeObjective {
    /// Optimal transport with squared Euclidean cost (no square root taken).
    W2Squared,
    /// Optimal transport with Euclidean cost.
    W1,
}

impl std::str::FromStr for MongeObjective {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "w2_squared" => Ok(Self::W2Squared),
            "w1" => Ok(Self::W1),
            other => Err(Error::invalid(format!("unknown Monge objective '{other}'"))),
        }
    }
}

impl MongeObjective {
    fn cost(self, x: &[f64], y: &[f64]) -> f64 {
        let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
        match self {
            MongeObjective::W2Squared => d2,
            MongeObjective::W1 => d2.sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MongeFitConfig {
    pub objective: MongeObjective,
    /// Objective evaluations (transport solves) after the initial one.
    pub evaluations: usize,
    pub seed: u64,
}

impl MongeFitConfig {
    pub fn new(objective: MongeObjective, seed: u64) -> Self {
        Self {
            objective,
            evaluations: 2000,
            seed,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MongeFit {
    pub adversary: Adversary,
    pub objective: f64,
    /// Objective of the starting table (identity unless warm-started).
    pub start_objective: f64,
    pub accepted: usize,
    pub evaluations: usize,
}

/// Seeded coordinate random search for a perturbation table over the union
/// of both supports that minimises the transport objective between the
/// transformed marginals, subject to `‖a(x) − x‖₁ ≤ alpha` per point.
///
/// Each step picks a support point and proposes either a move toward the
/// barycentre of its current transport partners or a Gaussian move, both
/// projected onto the budget ball; a proposal is kept only if it lowers the
/// objective. `start` (a table fitted at a smaller budget) replaces the
/// identity as the incumbent.
pub fn fit_monge_adversary(
    p: &EmpiricalMarginal,
    n: &EmpiricalMarginal,
    alpha: f64,
    cfg: &MongeFitConfig,
    start: Option<&Adversary>,
) -> Result<MongeFit> {
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(Error::Domain {
            what: "perturbation budget",
            value: alpha,
            domain: "[0,∞)",
        });
    }
    if p.dim() != n.dim() {
        return Err(Error::invalid("marginal dimensions differ"));
    }
    let dim = p.dim();

    // Union of supports; each union point knows its rows in P and columns in N.
    let mut points: Vec<Vec<f64>> = Vec::new();
    let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut row_of: Vec<Option<usize>> = Vec::new();
    let mut col_of: Vec<Option<usize>> = Vec::new();
    let mut p_point = Vec::with_capacity(p.len());
    let mut n_point = Vec::with_capacity(n.len());
    for (side, q) in [(0, p), (1, n)] {
        for (k, x) in q.support().iter().enumerate() {
            let u = *index.entry(key(x)).or_insert_with(|| {
                points.push(x.clone());
                row_of.push(None);
                col_of.push(None);
                points.len() - 1
            });
            if side == 0 {
                row_of[u] = Some(k);
                p_point.push(u);
            } else {
                col_of[u] = Some(k);
                n_point.push(u);
            }
        }
    }

    let mut shift: Vec<Vec<f64>> = vec![vec![0.0; dim]; points.len()];
    if let Some(start) = start {
        match start.kind() {
            AdversaryKind::PerturbationTable { alpha: a0, .. } if *a0 <= alpha + BUDGET_TOL => {}
            AdversaryKind::Identity => {}
            _ => {
                return Err(Error::invalid(
                    "warm start must be a perturbation table with a budget no larger than alpha",
                ))
            }
        }
        for (u, x) in points.iter().enumerate() {
            let y = start.apply_point(x);
            shift[u] = project_l1(&x.iter().zip(&y).map(|(a, b)| b - a).collect::<Vec<_>>(), alpha);
        }
    }
    let image = |u: usize, s: &[f64]| -> Vec<f64> { points[u].iter().zip(s).map(|(a, b)| a + b).collect() };
    let mut current: Vec<Vec<f64>> = (0..points.len()).map(|u| image(u, &shift[u])).collect();

    let (rows, cols) = (p.len(), n.len());
    let objective = cfg.objective;
    let mut cost = vec![0.0; rows * cols];
    for i in 0..rows {
        for j in 0..cols {
            cost[i * cols + j] = objective.cost(&current[p_point[i]], &current[n_point[j]]);
        }
    }
    let mut solver = WarmTransport::new(&CostMatrix::new(rows, cols, cost.clone())?, p.mass(), n.mass())?;
    let (start_value, basis) = solver.solve(&cost)?;
    let mut flows = solver.flows(&basis);
    solver.commit(basis);
    let mut best = start_value;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut accepted = 0;
    let mut evaluations = 0;
    let movable: Vec<usize> = (0..points.len()).collect();
    let mut order = movable.clone();
    let mut cursor = order.len();
    let mut candidate_cost = cost.clone();

    while alpha > 0.0 && evaluations < cfg.evaluations && best > 0.0 {
        if cursor == order.len() {
            order.shuffle(&mut rng);
            cursor = 0;
        }
        let u = order[cursor];
        cursor += 1;

        let proposal: Vec<f64> = if rng.gen_bool(0.5) {
            // Toward the barycentre of the transport partners.
            let mut target = vec![0.0; dim];
            let mut mass = 0.0;
            let use_row = match (row_of[u], col_of[u]) {
                (Some(_), Some(_)) => rng.gen_bool(0.5),
                (Some(_), None) => true,
                _ => false,
            };
            for &(i, j, f) in &flows {
                let partner = if use_row {
                    (Some(i) == row_of[u]).then_some(n_point[j])
                } else {
                    (Some(j) == col_of[u]).then_some(p_point[i])
                };
                if let Some(w) = partner {
                    mass += f;
                    for (t, c) in target.iter_mut().zip(&current[w]) {
                        *t += f * c;
                    }
                }
            }
            if mass > 0.0 {
                let step: f64 = rng.gen_range(0.25..=1.0);
                shift[u]
                    .iter()
                    .zip(&current[u])
                    .zip(&target)
                    .map(|((s, c), t)| s + step * (t / mass - c))
                    .collect()
            } else {
                gaussian_move(&shift[u], alpha, dim, &mut rng)
            }
        } else {
            gaussian_move(&shift[u], alpha, dim, &mut rng)
        };
        let proposal = project_l1(&proposal, alpha);
        let moved = image(u, &proposal);

        candidate_cost.copy_from_slice(&cost);
        if let Some(i) = row_of[u] {
            for j in 0..cols {
                candidate_cost[i * cols + j] = objective.cost(&moved, &current[n_point[j]]);
            }
        }
        if let Some(j) = col_of[u] {
            for i in 0..rows {
                let x = if p_point[i] == u { &moved } else { &current[p_point[i]] };
                candidate_cost[i * cols + j] = objective.cost(x, &moved);
            }
        }
        let (value, basis) = solver.solve(&candidate_cost)?;
        evaluations += 1;
        if value < best {
            best = value;
            shift[u] = proposal;
            current[u] = moved;
            std::mem::swap(&mut cost, &mut candidate_cost);
            flows = solver.flows(&basis);
            solver.commit(basis);
            accepted += 1;
        }
    }

    let entries = points
        .iter()
        .zip(&current)
        .map(|(x, y)| TableEntry {
            x: x.clone(),
            image: y.clone(),
        })
        .collect();
    Ok(MongeFit {
        adversary: Adversary::perturbation_table(alpha, entries)?,
        objective: best,
        start_objective: start_value,
        accepted,
        evaluations,
    })
}

fn gaussian_move(shift: &[f64], alpha: f64, dim: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let scale = alpha * 10f64.powf(-2.0 * rng.gen::<f64>()) / dim as f64;
    shift
        .iter()
        .map(|s| s + scale * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContractivityEstimate {
    pub eta_hat: f64,
    pub pairs_probed: usize,
    /// The pair attaining the largest distance ratio.
    pub worst_pair: (Vec<f64>, Vec<f64>),
    /// `eta_hat > 0`.
    pub contractive: bool,
}

/// `η̂ = 1 − max c_Φ(a(x), a(x′)) / c_Φ(x, x′)` over the probe pairs.
pub fn contractivity(a: &Adversary, kernel: &Kernel, pairs: &[(Vec<f64>, Vec<f64>)]) -> Result<ContractivityEstimate> {
    let mut worst: Option<(f64, usize)> = None;
    let mut probed = 0;
    for (k, (x, y)) in pairs.iter().enumerate() {
        let before = feature_distance(kernel, x, y)?;
        if before == 0.0 {
            continue;
        }
        probed += 1;
        let after = feature_distance(kernel, &a.apply_point(x), &a.apply_point(y))?;
        let ratio = after / before;
        if worst.is_none_or(|(r, _)| ratio > r) {
            worst = Some((ratio, k));
        }
    }
    let (ratio, k) = worst.ok_or_else(|| Error::invalid("no probe pair with positive feature distance"))?;
    let eta_hat = 1.0 - ratio;
    Ok(ContractivityEstimate {
        eta_hat,
        pairs_probed: probed,
        worst_pair: pairs[k].clone(),
        contractive: eta_hat > 0.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BoostPlan {
    pub iterations: usize,
    /// Set when δ ≥ W1^Φ, so a single application already suffices.
    pub already_efficient: bool,
}

/// `J = ⌈(1/η)·ln(W1^Φ / δ)⌉`, at least 1.
pub fn boost_iterations(eta: f64, w1_phi: f64, delta: f64) -> Result<BoostPlan> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::Domain {
            what: "contraction eta",
            value: eta,
            domain: "(0,1)",
        });
    }
    if !(delta > 0.0) {
        return Err(Error::Domain {
            what: "Monge budget",
            value: delta,
            domain: "(0,∞)",
        });
    }
    if !(w1_phi >= 0.0) {
        return Err(Error::Domain {
            what: "feature-space W1",
            value: w1_phi,
            domain: "[0,∞)",
        });
    }
    if delta >= w1_phi {
        return Ok(BoostPlan {
            iterations: 1,
            already_efficient: true,
        });
    }
    let j = ((w1_phi / delta).ln() / eta).ceil();
    Ok(BoostPlan {
        iterations: (j as usize).max(1),
        already_efficient: false,
    })
}
