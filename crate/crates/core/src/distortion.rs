//! Adversarial distortion, the hardness bound and defeat certificates.
//!
//! For a hypothesis class `H`, an adversary `a`, class marginals `P`, `N`,
//! prior `π` and offsets `b`, `c` the adversarial distortion is
//!
//! ```text
//! γ^g_{H,a}(P,N,π,b,c) = max_{h∈H} φ(P, g∘h∘a, π, b) − φ(N, g∘h∘a, 1−π, −c)
//!                      = max_h {π∫g∘h∘a dP − (1−π)∫g∘h∘a dN} + πb + (1−π)c
//! ```
//!
//! with `φ(Q,f,u,v) = ∫ u·(f + v) dQ`. The certificate quantity is
//! `β_a = γ^g(P,N,π,2L̄(1),2L̄(0))`, and any learner minimising the loss over
//! `H` pays at least `(ℓ° − ½·min_a β_a)₊` against the adversary set.
//!
//! On an RKHS ball of radius `r` with a canonical link the maximum is
//! attained at the normalised weighted mean-embedding difference, giving
//! `β_a = 2Δ_{ℓ,π} + r·‖π μ_{a,P} − (1−π) μ_{a,N}‖`.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::adversaries::Adversary;
use crate::data::{EmpiricalMarginal, Prior};
use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::losses::{g_map, Link, LinkKind, ProperLoss};

/// Radicands of the weighted MMD above this are clamped to zero.
pub const MMD_RADICAND_TOL: f64 = -1e-10;

/// Default number of sampled unit-ball members for cross-checks.
pub const DEFAULT_BALL_SAMPLES: usize = 4096;

type ScoreFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A real-valued classifier `h : X → ℝ`.
#[derive(Clone)]
pub struct Scorer {
    name: String,
    f: ScoreFn,
}

impl fmt::Debug for Scorer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("Scorer").field(&self.name).finish()
    }
}

impl Scorer {
    pub fn new(name: impl Into<String>, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            name: name.into(),
            f: Arc::new(f),
        }
    }

    /// `x ↦ w·x + b`.
    pub fn linear(w: Vec<f64>, b: f64) -> Self {
        let name = format!("linear({w:?}, {b})");
        Self::new(name, move |x| w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + b)
    }

    pub fn constant(c: f64) -> Self {
        Self::new(format!("const({c})"), move |_| c)
    }

    /// `x ↦ Σ_i coeffs_i·κ(centers_i, x)`.
    pub fn kernel_expansion(kernel: Kernel, centers: Vec<Vec<f64>>, coeffs: Vec<f64>) -> Self {
        Self::new(format!("{kernel} expansion ({} centres)", centers.len()), move |x| {
            centers.iter().zip(&coeffs).map(|(z, c)| c * kernel.eval(z, x)).sum()
        })
    }

    pub fn negated(&self) -> Self {
        let f = self.f.clone();
        Self {
            name: format!("-{}", self.name),
            f: Arc::new(move |x| -f(x)),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }
}

#[derive(Debug, Clone)]
pub enum HypothesisClass {
    /// `{h : ‖h‖_H ≤ radius}` in the RKHS of `kernel`.
    RkhsBall { kernel: Kernel, radius: f64 },
    /// An explicit list of scorers.
    Finite { members: Vec<Scorer>, closed_by_negation: bool },
    /// `{x ↦ w·x + b : ‖(w, b)‖₂ ≤ radius}` on `ℝ^dim`.
    LinearBall { radius: f64, dim: usize },
}

impl HypothesisClass {
    pub fn rkhs_unit_ball(kernel: Kernel) -> Self {
        HypothesisClass::RkhsBall { kernel, radius: 1.0 }
    }

    pub fn finite(members: Vec<Scorer>) -> Self {
        HypothesisClass::Finite {
            members,
            closed_by_negation: false,
        }
    }

    /// `H ∪ −H`.
    pub fn finite_symmetric(members: Vec<Scorer>) -> Self {
        let negated: Vec<Scorer> = members.iter().map(Scorer::negated).collect();
        HypothesisClass::Finite {
            members: members.into_iter().chain(negated).collect(),
            closed_by_negation: true,
        }
    }

    pub fn linear_ball(radius: f64, dim: usize) -> Self {
        HypothesisClass::LinearBall { radius, dim }
    }

    /// Checks the integrability premise (every member finite on every probe)
    /// and, for flagged finite classes, closure under negation on the probes.
    pub fn validate(&self, probes: &[Vec<f64>]) -> Result<()> {
        match self {
            HypothesisClass::Finite {
                members,
                closed_by_negation,
            } => {
                if members.is_empty() {
                    return Err(Error::EmptyHypothesisClass);
                }
                let values: Vec<Vec<f64>> = members.iter().map(|h| probes.iter().map(|x| h.eval(x)).collect()).collect();
                if let Some(k) = values.iter().position(|v| v.iter().any(|s| !s.is_finite())) {
                    return Err(Error::invalid(format!("member {} is not finite on the supports", members[k].name())));
                }
                if *closed_by_negation {
                    for (k, v) in values.iter().enumerate() {
                        let mirrored = values
                            .iter()
                            .any(|w| v.iter().zip(w).all(|(a, b)| (a + b).abs() <= 1e-12));
                        if !mirrored {
                            return Err(Error::invalid(format!(
                                "class flagged closed by negation but -{} is missing",
                                members[k].name()
                            )));
                        }
                    }
                }
                Ok(())
            }
            HypothesisClass::RkhsBall { kernel, radius } => {
                if !(*radius >= 0.0) {
                    return Err(Error::invalid("ball radius must be non-negative"));
                }
                kernel.check_psd(&dedup(probes))
            }
            HypothesisClass::LinearBall { radius, dim } => {
                if !(*radius >= 0.0) {
                    return Err(Error::invalid("ball radius must be non-negative"));
                }
                if probes.iter().any(|x| x.len() != *dim) {
                    return Err(Error::invalid("linear ball dimension differs from the data"));
                }
                Ok(())
            }
        }
    }
}

fn dedup(points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut seen = std::collections::HashSet::new();
    points
        .iter()
        .filter(|x| seen.insert(x.iter().map(|v| (v + 0.0).to_bits()).collect::<Vec<_>>()))
        .cloned()
        .collect()
}

/// `φ(Q, f, u, v) = Σ_i mass_i·u·(f(x_i) + v)`.
pub fn phi(q: &EmpiricalMarginal, f: impl Fn(&[f64]) -> f64, u: f64, v: f64) -> f64 {
    q.support().iter().zip(q.mass()).map(|(x, m)| m * u * (f(x) + v)).sum()
}

/// `γ` over a finite list of scorers, with the arg-max index (first on ties).
#[allow(clippy::too_many_arguments)]
pub fn gamma_finite(
    members: &[Scorer],
    g: &dyn Fn(f64) -> Result<f64>,
    a: &Adversary,
    p: &EmpiricalMarginal,
    n: &EmpiricalMarginal,
    pi: Prior,
    b: f64,
    c: f64,
) -> Result<(f64, usize)> {
    if members.is_empty() {
        return Err(Error::EmptyHypothesisClass);
    }
    let pi = pi.value();
    let ap: Vec<Vec<f64>> = p.support().iter().map(|x| a.apply_point(x)).collect();
    let an: Vec<Vec<f64>> = n.support().iter().map(|x| a.apply_point(x)).collect();
    let mut best: Option<(f64, usize)> = None;
    for (k, h) in members.iter().enumerate() {
        let mut pos = 0.0;
        for (x, m) in ap.iter().zip(p.mass()) {
            pos += m * pi * (g(h.eval(x))? + b);
        }
        let mut neg = 0.0;
        for (x, m) in an.iter().zip(n.mass()) {
            neg += m * (1.0 - pi) * (g(h.eval(x))? - c);
        }
        let value = pos - neg;
        if best.is_none_or(|(v, _)| value > v) {
            best = Some((value, k));
        }
    }
    Ok(best.expect("non-empty class"))
}

fn transformed(a: &Adversary, q: &EmpiricalMarginal) -> Vec<Vec<f64>> {
    q.support().iter().map(|x| a.apply_point(x)).collect()
}

// Σ_ij m_i m'_j κ(x_i, y_j) in fixed (row-major) order.
fn gram_sum(kernel: &Kernel, xs: &[Vec<f64>], mx: &[f64], ys: &[Vec<f64>], my: &[f64]) -> f64 {
    let mut total = 0.0;
    for (x, a) in xs.iter().zip(mx) {
        let mut row = 0.0;
        for (y, b) in ys.iter().zip(my) {
            row += b * kernel.eval(x, y);
        }
        total += a * row;
    }
    total
}

/// `‖π μ_{a,P} − (1−π) μ_{a,N}‖_H` from Gram sums.
pub fn weighted_mmd(kernel: &Kernel, a: &Adversary, p: &EmpiricalMarginal, n: &EmpiricalMarginal, pi: Prior) -> Result<f64> {
    let pi = pi.value();
    let (ap, an) = (transformed(a, p), transformed(a, n));
    let spp = gram_sum(kernel, &ap, p.mass(), &ap, p.mass());
    let spn = gram_sum(kernel, &ap, p.mass(), &an, n.mass());
    let snn = gram_sum(kernel, &an, n.mass(), &an, n.mass());
    let r = pi * pi * spp - 2.0 * pi * (1.0 - pi) * spn + (1.0 - pi) * (1.0 - pi) * snn;
    if r < MMD_RADICAND_TOL {
        return Err(Error::IndefiniteKernel(r));
    }
    Ok(r.max(0.0).sqrt())
}

/// `γ` over the RKHS ball of radius `r` with `g = Id`:
/// `r·‖π μ_{a,P} − (1−π) μ_{a,N}‖ + πb + (1−π)c`.
#[allow(clippy::too_many_arguments)]
pub fn gamma_rkhs(
    kernel: &Kernel,
    radius: f64,
    a: &Adversary,
    p: &EmpiricalMarginal,
    n: &EmpiricalMarginal,
    pi: Prior,
    b: f64,
    c: f64,
) -> Result<f64> {
    let mmd = weighted_mmd(kernel, a, p, n, pi)?;
    let pi = pi.value();
    Ok(radius * mmd + pi * b + (1.0 - pi) * c)
}

/// `β_a = 2Δ_{ℓ,π} + ‖π μ_{a,P} − (1−π) μ_{a,N}‖` on the RKHS unit ball
/// (canonical link).
pub fn beta_rkhs(loss: &ProperLoss, kernel: &Kernel, a: &Adversary, p: &EmpiricalMarginal, n: &EmpiricalMarginal, pi: Prior) -> Result<f64> {
    beta_rkhs_ball(loss, kernel, 1.0, a, p, n, pi)
}

/// [`beta_rkhs`] for a ball of radius `radius`.
pub fn beta_rkhs_ball(
    loss: &ProperLoss,
    kernel: &Kernel,
    radius: f64,
    a: &Adversary,
    p: &EmpiricalMarginal,
    n: &EmpiricalMarginal,
    pi: Prior,
) -> Result<f64> {
    gamma_rkhs(kernel, radius, a, p, n, pi, 2.0 * loss.cbr(1.0)?, 2.0 * loss.cbr(0.0)?)
}

/// The maximiser `h* = (π μ_{a,P} − (1−π) μ_{a,N}) / ‖·‖`, as a kernel
/// expansion over the transformed supports; `None` when the difference is 0.
pub fn mmd_witness(kernel: &Kernel, a: &Adversary, p: &EmpiricalMarginal, n: &EmpiricalMarginal, pi: Prior) -> Result<Option<Scorer>> {
    let norm = weighted_mmd(kernel, a, p, n, pi)?;
    if norm == 0.0 {
        return Ok(None);
    }
    let pi = pi.value();
    let centers: Vec<Vec<f64>> = transformed(a, p).into_iter().chain(transformed(a, n)).collect();
    let coeffs: Vec<f64> = p
        .mass()
        .iter()
        .map(|m| pi * m / norm)
        .chain(n.mass().iter().map(|m| -(1.0 - pi) * m / norm))
        .collect();
    Ok(Some(Scorer::kernel_expansion(*kernel, centers, coeffs)))
}

/// Seeded members of the RKHS unit ball: `h = Σ β_i κ(z_i, ·)` over random
/// subsets of `centers`, rescaled to `‖h‖_H = 1`.
pub fn sample_unit_ball(kernel: &Kernel, centers: &[Vec<f64>], count: usize, seed: u64) -> Result<Vec<Scorer>> {
    let pool = dedup(centers);
    if pool.is_empty() {
        return Err(Error::invalid("no centres to sample the unit ball from"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0;
    while out.len() < count {
        attempts += 1;
        if attempts > 100 * count + 100 {
            return Err(Error::Numeric("unit-ball sampling keeps producing zero-norm members".into()));
        }
        let k = rng.gen_range(1..=pool.len().min(8));
        let chosen: Vec<Vec<f64>> = rand::seq::index::sample(&mut rng, pool.len(), k)
            .into_iter()
            .map(|i| pool[i].clone())
            .collect();
        let coeffs: Vec<f64> = (0..k).map(|_| rng.sample(StandardNormal)).collect();
        let mut norm2 = 0.0;
        for (zi, ci) in chosen.iter().zip(&coeffs) {
            for (zj, cj) in chosen.iter().zip(&coeffs) {
                norm2 += ci * cj * kernel.eval(zi, zj);
            }
        }
        if !(norm2 > 1e-12) {
            continue;
        }
        let norm = norm2.sqrt();
        out.push(Scorer::kernel_expansion(*kernel, chosen, coeffs.iter().map(|c| c / norm).collect()));
    }
    Ok(out)
}

/// `β_a` for any class, dispatching to the RKHS closed form when the link is
/// canonical and to enumeration for finite classes.
pub fn beta(
    loss: &ProperLoss,
    link: &Link,
    class: &HypothesisClass,
    a: &Adversary,
    p: &EmpiricalMarginal,
    n: &EmpiricalMarginal,
    pi: Prior,
) -> Result<f64> {
    match class {
        HypothesisClass::Finite { members, .. } => {
            let g = |v: f64| g_map(loss, link, v);
            let (value, _) = gamma_finite(members, &g, a, p, n, pi, 2.0 * loss.cbr(1.0)?, 2.0 * loss.cbr(0.0)?)?;
            Ok(value)
        }
        HypothesisClass::RkhsBall { kernel, radius } => {
            if !link.is_canonical_for(loss) {
                return Err(Error::NonCanonicalLink(loss.name().to_string()));
            }
            beta_rkhs_ball(loss, kernel, *radius, a, p, n, pi)
        }
        HypothesisClass::LinearBall { radius, dim } => {
            if p.dim() != *dim {
                return Err(Error::invalid("linear ball dimension differs from the data"));
            }
            if !link.is_canonical_for(loss) {
                return Err(Error::NonCanonicalLink(loss.name().to_string()));
            }
            beta_rkhs_ball(loss, &Kernel::affine(), *radius, a, p, n, pi)
        }
    }
}

/// `(ℓ° − ½·min β)₊`.
pub fn hardness_bound(loss: &ProperLoss, betas: &[f64]) -> Result<f64> {
    if betas.is_empty() {
        return Err(Error::invalid("hardness bound needs at least one adversary"));
    }
    let min = betas.iter().copied().fold(f64::INFINITY, f64::min);
    Ok((loss.blunt() - 0.5 * min).max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateMethod {
    ClosedFormMmd,
    BruteForce,
    Ipm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefeatCertificate {
    pub loss: String,
    pub link: LinkKind,
    pub epsilon: f64,
    pub beta: f64,
    pub blunt: f64,
    pub bound: f64,
    pub verdict: bool,
    pub adversary_id: String,
    pub method: CertificateMethod,
    /// Digests of every input the certificate was computed from.
    pub digests: BTreeMap<String, String>,
}

impl DefeatCertificate {
    pub fn with_digest(mut self, key: impl Into<String>, digest: impl Into<String>) -> Self {
        self.digests.insert(key.into(), digest.into());
        self
    }
}

/// Verdict `β ≤ 2εℓ°` (inclusive) with the bound `(ℓ° − β/2)₊`.
pub fn defeat_certificate(
    loss: &ProperLoss,
    link: &Link,
    beta: f64,
    epsilon: f64,
    adversary_id: &str,
    method: CertificateMethod,
) -> Result<DefeatCertificate> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::Domain {
            what: "epsilon",
            value: epsilon,
            domain: "[0,1]",
        });
    }
    if beta.is_nan() {
        return Err(Error::Numeric("beta is NaN".into()));
    }
    let blunt = loss.blunt();
    Ok(DefeatCertificate {
        loss: loss.name().to_string(),
        link: link.kind(),
        epsilon,
        beta,
        blunt,
        bound: (blunt - beta / 2.0).max(0.0),
        verdict: beta <= 2.0 * epsilon * blunt,
        adversary_id: adversary_id.to_string(),
        method,
        digests: BTreeMap::new(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IpmReport {
    pub value: f64,
    /// `2·γ` over the same class, computed when `Δ = 0`, `π = ½` and the link
    /// is canonical.
    pub twice_gamma: Option<f64>,
}

fn ipm_finite(members: &[Scorer], g: &dyn Fn(f64) -> Result<f64>, a: &Adversary, p: &EmpiricalMarginal, n: &EmpiricalMarginal) -> Result<f64> {
    if members.is_empty() {
        return Err(Error::EmptyHypothesisClass);
    }
    let (ap, an) = (transformed(a, p), transformed(a, n));
    let mut best = f64::NEG_INFINITY;
    for h in members.iter().flat_map(|h| [h.clone(), h.negated()]) {
        let mut diff = 0.0;
        for (x, m) in ap.iter().zip(p.mass()) {
            diff += m * g(h.eval(x))?;
        }
        for (x, m) in an.iter().zip(n.mass()) {
            diff -= m * g(h.eval(x))?;
        }
        best = best.max(diff.abs());
    }
    Ok(best)
}

/// `sup_h |∫ g∘h∘a dP − ∫ g∘h∘a dN|` over `H ∪ −H`, with the factor-two
/// identity `IPM = 2γ` checked when its premises hold.
pub fn ipm(
    loss: &ProperLoss,
    link: &Link,
    class: &HypothesisClass,
    a: &Adversary,
    p: &EmpiricalMarginal,
    n: &EmpiricalMarginal,
    pi: Prior,
) -> Result<IpmReport> {
    let value = match class {
        HypothesisClass::Finite { members, .. } => {
            let g = |v: f64| g_map(loss, link, v);
            ipm_finite(members, &g, a, p, n)?
        }
        HypothesisClass::RkhsBall { kernel, radius } => {
            if !link.is_canonical_for(loss) {
                return Err(Error::NonCanonicalLink(loss.name().to_string()));
            }
            2.0 * radius * weighted_mmd(kernel, a, p, n, Prior::new(0.5)?)?
        }
        HypothesisClass::LinearBall { radius, .. } => {
            if !link.is_canonical_for(loss) {
                return Err(Error::NonCanonicalLink(loss.name().to_string()));
            }
            2.0 * radius * weighted_mmd(&Kernel::affine(), a, p, n, Prior::new(0.5)?)?
        }
    };
    let premises = loss.delta(pi.value())?.abs() <= 1e-12 && pi.value() == 0.5 && link.is_canonical_for(loss);
    let twice_gamma = if premises {
        let symmetric = match class {
            HypothesisClass::Finite { members, .. } => HypothesisClass::finite_symmetric(members.clone()),
            other => other.clone(),
        };
        let twice = 2.0 * beta(loss, link, &symmetric, a, p, n, pi)?;
        if (twice - value).abs() > 1e-9 * value.abs().max(1.0) {
            return Err(Error::Numeric(format!("IPM {value} differs from 2γ = {twice}")));
        }
        Some(twice)
    } else {
        None
    };
    Ok(IpmReport { value, twice_gamma })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointLossEntry {
    pub loss: String,
    pub blunt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointDefeatReport {
    pub losses: Vec<JointLossEntry>,
    /// The common endpoint value `L̄(0) = L̄(1)`.
    pub l_dagger: f64,
    pub inf_blunt: f64,
    pub gamma0: f64,
    pub epsilon: f64,
    /// `ε·inf ℓ° − L̄†`.
    pub threshold: f64,
    pub verdict: bool,
}

/// Joint ε-defeat of a set of symmetric losses: `γ₀ ≤ ε·inf ℓ° − L̄†`.
pub fn joint_defeat_certificate(losses: &[ProperLoss], gamma0: f64, epsilon: f64) -> Result<JointDefeatReport> {
    if losses.is_empty() {
        return Err(Error::invalid("joint certificate needs at least one loss"));
    }
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::Domain {
            what: "epsilon",
            value: epsilon,
            domain: "[0,1]",
        });
    }
    let mut l_dagger: Option<f64> = None;
    for loss in losses {
        let Some(d) = loss.symmetric_endpoint(1e-9) else {
            return Err(Error::invalid(format!("loss '{}' is not symmetric (L̄(0) ≠ L̄(1))", loss.name())));
        };
        match l_dagger {
            Some(prev) if (prev - d).abs() > 1e-9 => {
                return Err(Error::invalid("losses do not share a common endpoint value L̄(0) = L̄(1)"));
            }
            _ => l_dagger = Some(d),
        }
    }
    let l_dagger = l_dagger.expect("non-empty");
    let entries: Vec<JointLossEntry> = losses
        .iter()
        .map(|l| JointLossEntry {
            loss: l.name().to_string(),
            blunt: l.blunt(),
        })
        .collect();
    let inf_blunt = entries.iter().map(|e| e.blunt).fold(f64::INFINITY, f64::min);
    let threshold = epsilon * inf_blunt - l_dagger;
    Ok(JointDefeatReport {
        losses: entries,
        l_dagger,
        inf_blunt,
        gamma0,
        epsilon,
        threshold,
        verdict: gamma0 <= threshold,
    })
}
