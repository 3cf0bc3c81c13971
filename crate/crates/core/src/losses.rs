//! Proper losses for binary class-probability estimation.
//!
//! A loss is defined by its conditional Bayes risk `L̄ : [0,1] → ℝ` together
//! with the analytic derivative `L̄′`. Partial losses are always rebuilt from
//! `L̄` through the Savage construction
//!
//! ```text
//! ℓ₁(c)  = (1 − c)·L̄′(c) + L̄(c) − L̄(1)
//! ℓ₋₁(c) = L̄(c) − c·L̄′(c) − L̄(0)
//! ```
//!
//! so that a single code path serves registered, tabulated and user-supplied
//! losses. With the canonical link `ψ = −L̄′` the composite loss takes the
//! Fenchel–Young form
//!
//! ```text
//! ℓ(y, v) = (−L̄)*(v) − ((y+1)/2)·v − ½((1−y)·L̄(0) + (1+y)·L̄(1))
//! ```
//!
//! which is what the learner optimises, since it stays finite for every score.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::data::Label;
use crate::error::{Error, Result};

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Probe offset used to stay inside (0,1) when a function is only defined on
/// the open interval.
const EDGE: f64 = 1e-12;

#[derive(Clone)]
enum Cbr {
    Log,
    Square,
    Matsushita,
    Tabulated(Arc<HermiteTable>),
    Custom { cbr: ScalarFn, cbr_prime: ScalarFn },
}

/// A proper loss, given by its conditional Bayes risk.
#[derive(Clone)]
pub struct ProperLoss {
    name: String,
    cbr: Cbr,
}

impl fmt::Debug for ProperLoss {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProperLoss").field("name", &self.name).finish()
    }
}

impl ProperLoss {
    /// Log loss, `L̄(π) = −π log π − (1−π) log(1−π)`.
    pub fn log() -> Self {
        Self {
            name: "log".into(),
            cbr: Cbr::Log,
        }
    }

    /// Square loss, `L̄(π) = π(1−π)`.
    pub fn square() -> Self {
        Self {
            name: "square".into(),
            cbr: Cbr::Square,
        }
    }

    /// Matsushita loss, `L̄(π) = √(π(1−π))`.
    pub fn matsushita() -> Self {
        Self {
            name: "matsushita".into(),
            cbr: Cbr::Matsushita,
        }
    }

    /// Registered losses by config name.
    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "log" | "logistic" => Ok(Self::log()),
            "square" => Ok(Self::square()),
            "matsushita" => Ok(Self::matsushita()),
            other => Err(Error::invalid(format!("unknown loss '{other}'"))),
        }
    }

    /// A loss from an arbitrary Bayes risk and its derivative. Nothing is
    /// checked here; run [`properness_check`] before trusting it.
    pub fn from_fns(
        name: impl Into<String>,
        cbr: impl Fn(f64) -> f64 + Send + Sync + 'static,
        cbr_prime: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            cbr: Cbr::Custom {
                cbr: Arc::new(cbr),
                cbr_prime: Arc::new(cbr_prime),
            },
        }
    }

    /// A loss tabulated on a grid of π values covering [0,1]; values between
    /// knots come from the cubic Hermite interpolant through `(cbr, cbr_prime)`.
    pub fn tabulated(
        name: impl Into<String>,
        pi: Vec<f64>,
        cbr: Vec<f64>,
        cbr_prime: Vec<f64>,
    ) -> Result<Self> {
        let table = HermiteTable::new(pi, cbr, cbr_prime)?;
        Ok(Self {
            name: name.into(),
            cbr: Cbr::Tabulated(Arc::new(table)),
        })
    }

    /// Reads a tabulated loss from CSV with columns `pi,cbr,cbr_prime`.
    pub fn from_csv(name: impl Into<String>, path: impl AsRef<Path>) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            pi: f64,
            cbr: f64,
            cbr_prime: f64,
        }
        let mut reader = csv::Reader::from_path(path)?;
        let (mut pi, mut cbr, mut prime) = (Vec::new(), Vec::new(), Vec::new());
        for row in reader.deserialize() {
            let row: Row = row?;
            pi.push(row.pi);
            cbr.push(row.cbr);
            prime.push(row.cbr_prime);
        }
        Self::tabulated(name, pi, cbr, prime)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Partial losses stay finite on the closed interval [0,1].
    fn is_bounded(&self) -> bool {
        matches!(self.cbr, Cbr::Square | Cbr::Tabulated(_))
    }

    /// `L̄(π)` for `π ∈ [0,1]`, with `0·log 0 = 0` at the endpoints.
    pub fn cbr(&self, pi: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&pi) {
            return Err(Error::Domain {
                what: "conditional Bayes risk",
                value: pi,
                domain: "[0,1]",
            });
        }
        Ok(self.cbr_unchecked(pi))
    }

    fn cbr_unchecked(&self, pi: f64) -> f64 {
        match &self.cbr {
            Cbr::Log => xlogx_neg(pi) + xlogx_neg(1.0 - pi),
            Cbr::Square => pi * (1.0 - pi),
            Cbr::Matsushita => (pi * (1.0 - pi)).max(0.0).sqrt(),
            Cbr::Tabulated(t) => t.value(pi),
            Cbr::Custom { cbr, .. } => cbr(pi),
        }
    }

    /// `L̄′(c)`. Defined on (0,1); bounded losses also accept the endpoints.
    pub fn cbr_prime(&self, c: f64) -> Result<f64> {
        let open = c > 0.0 && c < 1.0;
        let closed_ok = self.is_bounded() && (0.0..=1.0).contains(&c);
        if !(open || closed_ok) {
            return Err(Error::Domain {
                what: "Bayes risk derivative",
                value: c,
                domain: "(0,1)",
            });
        }
        Ok(self.cbr_prime_unchecked(c))
    }

    fn cbr_prime_unchecked(&self, c: f64) -> f64 {
        match &self.cbr {
            Cbr::Log => ((1.0 - c) / c).ln(),
            Cbr::Square => 1.0 - 2.0 * c,
            Cbr::Matsushita => (1.0 - 2.0 * c) / (2.0 * (c * (1.0 - c)).sqrt()),
            Cbr::Tabulated(t) => t.derivative(c),
            Cbr::Custom { cbr_prime, .. } => cbr_prime(c),
        }
    }

    /// `L̄″(c)` on (0,1); custom losses fall back to a central difference of `L̄′`.
    pub fn cbr_second(&self, c: f64) -> f64 {
        match &self.cbr {
            Cbr::Log => -1.0 / (c * (1.0 - c)),
            Cbr::Square => -2.0,
            Cbr::Matsushita => -0.25 / (c * (1.0 - c)).powf(1.5),
            Cbr::Tabulated(t) => t.second_derivative(c),
            Cbr::Custom { cbr_prime, .. } => {
                let h = 1e-6_f64.min(c / 2.0).min((1.0 - c) / 2.0);
                (cbr_prime(c + h) - cbr_prime(c - h)) / (2.0 * h)
            }
        }
    }

    /// The blunt loss `ℓ° = L̄(1/2)`.
    pub fn blunt(&self) -> f64 {
        self.cbr_unchecked(0.5)
    }

    /// `Δ_{ℓ,π} = π·L̄(1) + (1−π)·L̄(0)`.
    pub fn delta(&self, pi: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&pi) {
            return Err(Error::Domain {
                what: "prior",
                value: pi,
                domain: "[0,1]",
            });
        }
        Ok(pi * self.cbr_unchecked(1.0) + (1.0 - pi) * self.cbr_unchecked(0.0))
    }

    /// `Some(L̄†)` when `L̄(0) = L̄(1) = L̄†` within `tol`.
    pub fn symmetric_endpoint(&self, tol: f64) -> Option<f64> {
        let (zero, one) = (self.cbr_unchecked(0.0), self.cbr_unchecked(1.0));
        ((zero - one).abs() <= tol).then_some(zero)
    }

    /// Partial loss `ℓ_y(c)` from the Savage construction.
    pub fn partial_loss(&self, y: Label, c: f64) -> Result<f64> {
        let open = c > 0.0 && c < 1.0;
        if !open && !(self.is_bounded() && (0.0..=1.0).contains(&c)) {
            return Err(Error::Domain {
                what: "partial loss",
                value: c,
                domain: "(0,1)",
            });
        }
        let l = self.cbr_unchecked(c);
        let dl = self.cbr_prime_unchecked(c);
        Ok(match y {
            Label::Pos => (1.0 - c) * dl + l - self.cbr_unchecked(1.0),
            Label::Neg => l - c * dl - self.cbr_unchecked(0.0),
        })
    }

    /// Maximiser of `v·c + L̄(c)` over `c ∈ [0,1]`: the inverse canonical link,
    /// extended by clamping where the link does not cover ℝ.
    pub fn canonical_inverse_ext(&self, v: f64) -> f64 {
        match &self.cbr {
            Cbr::Log => sigmoid(v),
            Cbr::Square => ((v + 1.0) / 2.0).clamp(0.0, 1.0),
            Cbr::Matsushita => 0.5 * (1.0 + v / (1.0 + v * v).sqrt()),
            _ => self.bisect_inverse(v),
        }
    }

    // −L̄′ is non-increasing in −c, so bisection on [lo, hi] finds ψ⁻¹(v).
    fn bisect_inverse(&self, v: f64) -> f64 {
        let (lo, hi) = if self.is_bounded() {
            (0.0, 1.0)
        } else {
            (EDGE, 1.0 - EDGE)
        };
        let psi = |c: f64| -self.cbr_prime_unchecked(c);
        if v <= psi(lo) {
            return lo;
        }
        if v >= psi(hi) {
            return hi;
        }
        let (mut a, mut b) = (lo, hi);
        while b - a > 1e-13 {
            let m = 0.5 * (a + b);
            if psi(m) < v {
                a = m;
            } else {
                b = m;
            }
        }
        0.5 * (a + b)
    }

    /// Convex conjugate `(−L̄)*(v) = sup_c { v·c + L̄(c) }`.
    pub fn conjugate(&self, v: f64) -> f64 {
        match &self.cbr {
            Cbr::Log => softplus(v),
            Cbr::Square => {
                if v > 1.0 {
                    v
                } else if v < -1.0 {
                    0.0
                } else {
                    0.25 * (1.0 + v) * (1.0 + v)
                }
            }
            Cbr::Matsushita => 0.5 * (v + (1.0 + v * v).sqrt()),
            _ => {
                let c = self.canonical_inverse_ext(v);
                v * c + self.cbr_unchecked(c)
            }
        }
    }

    /// Canonical composite loss in Fenchel–Young form, finite for every score.
    /// Agrees with [`composite_loss`] under the canonical link wherever the
    /// latter is defined; outside the image of a bounded link it continues
    /// the loss by its convex extension.
    pub fn canonical_loss(&self, y: Label, v: f64) -> f64 {
        if let Cbr::Log = self.cbr {
            return match y {
                Label::Pos => softplus(-v),
                Label::Neg => softplus(v),
            };
        }
        let offset = match y {
            Label::Pos => self.cbr_unchecked(1.0),
            Label::Neg => self.cbr_unchecked(0.0),
        };
        let linear = match y {
            Label::Pos => v,
            Label::Neg => 0.0,
        };
        self.conjugate(v) - linear - offset
    }

    /// The canonical link `ψ = −L̄′`.
    pub fn canonical_link(&self) -> Result<Link> {
        // Monotonicity probe on 199 interior points.
        let mut prev = f64::NEG_INFINITY;
        for k in 1..200 {
            let c = k as f64 / 200.0;
            let psi = -self.cbr_prime_unchecked(c);
            if !(psi > prev) {
                return Err(Error::invalid(format!(
                    "canonical link of '{}' is not strictly increasing near c = {c}",
                    self.name
                )));
            }
            prev = psi;
        }
        let loss = self.clone();
        let forward: ScalarFn = {
            let loss = loss.clone();
            Arc::new(move |c| -loss.cbr_prime_unchecked(c))
        };
        let inverse: ScalarFn = {
            let loss = loss.clone();
            Arc::new(move |v| loss.canonical_inverse_ext(v))
        };
        let inverse_prime: ScalarFn = {
            let loss = loss.clone();
            Arc::new(move |v| {
                let c = loss.canonical_inverse_ext(v);
                if c <= 0.0 || c >= 1.0 {
                    0.0
                } else {
                    -1.0 / loss.cbr_second(c)
                }
            })
        };
        let domain = match &self.cbr {
            Cbr::Log | Cbr::Matsushita => (f64::NEG_INFINITY, f64::INFINITY),
            Cbr::Square => (-1.0, 1.0),
            Cbr::Tabulated(_) => (
                -self.cbr_prime_unchecked(0.0),
                -self.cbr_prime_unchecked(1.0),
            ),
            Cbr::Custom { .. } => {
                let lo = -self.cbr_prime_unchecked(EDGE);
                let hi = -self.cbr_prime_unchecked(1.0 - EDGE);
                (
                    if lo < -1e6 { f64::NEG_INFINITY } else { lo },
                    if hi > 1e6 { f64::INFINITY } else { hi },
                )
            }
        };
        Ok(Link {
            kind: LinkKind::Canonical,
            canonical_of: Some(self.name.clone()),
            forward,
            inverse,
            inverse_prime,
            domain,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkKind {
    Canonical,
    Logit,
    Custom,
}

/// An invertible link `ψ : (0,1) → ℝ` mapping probabilities to scores.
#[derive(Clone)]
pub struct Link {
    kind: LinkKind,
    canonical_of: Option<String>,
    forward: ScalarFn,
    inverse: ScalarFn,
    inverse_prime: ScalarFn,
    domain: (f64, f64),
}

impl fmt::Debug for Link {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Link")
            .field("kind", &self.kind)
            .field("canonical_of", &self.canonical_of)
            .field("domain", &self.domain)
            .finish()
    }
}

impl Link {
    /// `ψ(c) = log(c/(1−c))` with the sigmoid as inverse.
    pub fn logit() -> Self {
        Self {
            kind: LinkKind::Logit,
            canonical_of: None,
            forward: Arc::new(|c: f64| (c / (1.0 - c)).ln()),
            inverse: Arc::new(sigmoid),
            inverse_prime: Arc::new(|v| {
                let s = sigmoid(v);
                s * (1.0 - s)
            }),
            domain: (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    /// A user-supplied link, validated on a probe grid in [0.01, 0.99].
    pub fn custom(
        forward: impl Fn(f64) -> f64 + Send + Sync + 'static,
        inverse: impl Fn(f64) -> f64 + Send + Sync + 'static,
        domain: (f64, f64),
    ) -> Result<Self> {
        let mut prev = f64::NEG_INFINITY;
        for k in 0..=98 {
            let c = 0.01 + k as f64 * 0.01;
            let v = forward(c);
            if !(v > prev) {
                return Err(Error::invalid(format!(
                    "custom link is not strictly increasing at c = {c}"
                )));
            }
            if (inverse(v) - c).abs() > 1e-9 {
                return Err(Error::invalid(format!(
                    "custom link inverse does not round-trip at c = {c}"
                )));
            }
            prev = v;
        }
        let inverse: ScalarFn = Arc::new(inverse);
        let inverse_prime: ScalarFn = {
            let inverse = inverse.clone();
            Arc::new(move |v| {
                let h = 1e-6 * (1.0 + v.abs());
                (inverse(v + h) - inverse(v - h)) / (2.0 * h)
            })
        };
        Ok(Self {
            kind: LinkKind::Custom,
            canonical_of: None,
            forward: Arc::new(forward),
            inverse,
            inverse_prime,
            domain,
        })
    }

    /// Resolves a link name (`canonical` or `logit`) for a loss.
    pub fn by_name(loss: &ProperLoss, name: &str) -> Result<Self> {
        match name {
            "canonical" => loss.canonical_link(),
            "logit" => Ok(Self::logit()),
            other => Err(Error::invalid(format!("unknown link '{other}'"))),
        }
    }

    pub fn kind(&self) -> LinkKind {
        self.kind
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.domain.0 && v <= self.domain.1
    }

    pub fn forward(&self, c: f64) -> f64 {
        (self.forward)(c)
    }

    /// `ψ⁻¹(v)`; scores outside the declared image are rejected.
    pub fn inverse(&self, v: f64) -> Result<f64> {
        if !self.contains(v) {
            return Err(Error::Domain {
                what: "link inverse",
                value: v,
                domain: "link image",
            });
        }
        Ok((self.inverse)(v))
    }

    pub fn inverse_prime(&self, v: f64) -> f64 {
        (self.inverse_prime)(v)
    }

    /// True when this link is the canonical link of `loss` (so `g = Id`).
    pub fn is_canonical_for(&self, loss: &ProperLoss) -> bool {
        match self.kind {
            LinkKind::Canonical => self.canonical_of.as_deref() == Some(loss.name()),
            LinkKind::Logit => matches!(loss.cbr, Cbr::Log),
            LinkKind::Custom => false,
        }
    }
}

/// `g(v) = (−L̄′)(ψ⁻¹(v))`; the identity when the link is canonical.
pub fn g_map(loss: &ProperLoss, link: &Link, v: f64) -> Result<f64> {
    if link.is_canonical_for(loss) {
        return Ok(v);
    }
    let c = link.inverse(v)?;
    Ok(-loss.cbr_prime(c)?)
}

/// `ℓ(y, ψ⁻¹(v))`.
pub fn composite_loss(loss: &ProperLoss, link: &Link, y: Label, v: f64) -> Result<f64> {
    if !link.contains(v) {
        return Err(Error::Domain {
            what: "composite loss score",
            value: v,
            domain: "link image",
        });
    }
    if link.is_canonical_for(loss) {
        return Ok(loss.canonical_loss(y, v));
    }
    loss.partial_loss(y, link.inverse(v)?)
}

/// Checks the Fenchel–Young representation of the canonical composite loss
/// against the Savage partial loss at score `v`.
pub fn fenchel_identity_check(loss: &ProperLoss, y: Label, v: f64, tol: f64) -> Result<bool> {
    let link = loss.canonical_link()?;
    let c = link.inverse(v)?;
    let lhs = loss.partial_loss(y, c)?;
    let conj = v * c + loss.cbr(c)?;
    let yf = y.as_f64();
    let rhs = conj
        - 0.5 * (yf + 1.0) * v
        - 0.5 * ((1.0 - yf) * loss.cbr(0.0)? + (1.0 + yf) * loss.cbr(1.0)?);
    Ok((lhs - rhs).abs() <= tol)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProperViolation {
    /// `E_{Y∼π} ℓ(Y, π)` differs from the Bayes risk of the partial losses.
    BayesRisk { pi: f64, expected: f64, got: f64 },
    /// The grid minimiser of `E_{Y∼π} ℓ(Y, c)` is more than one step from π.
    Minimizer { pi: f64, argmin: f64 },
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct ProperReport {
    pub grid_size: usize,
    pub violations: Vec<ProperViolation>,
}

impl ProperReport {
    pub fn is_proper(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Grid test of properness on the interior points of a uniform grid.
///
/// The partial losses carry the offsets `L̄(1)`, `L̄(0)`, so the Bayes risk
/// they induce is `L̄(π) − Δ_{ℓ,π}`; that is the reference value for check (a).
pub fn properness_check(loss: &ProperLoss, grid_size: usize) -> Result<ProperReport> {
    if grid_size < 3 {
        return Err(Error::invalid("properness grid needs at least 3 points"));
    }
    let step = 1.0 / (grid_size - 1) as f64;
    let interior: Vec<f64> = (1..grid_size - 1).map(|k| k as f64 * step).collect();
    let partials: Vec<(f64, f64)> = interior
        .iter()
        .map(|&c| {
            Ok((
                loss.partial_loss(Label::Pos, c)?,
                loss.partial_loss(Label::Neg, c)?,
            ))
        })
        .collect::<Result<_>>()?;

    let mut report = ProperReport {
        grid_size,
        violations: Vec::new(),
    };
    for (k, &pi) in interior.iter().enumerate() {
        let risk = |(l1, lm1): (f64, f64)| pi * l1 + (1.0 - pi) * lm1;
        let expected = loss.cbr(pi)? - loss.delta(pi)?;
        let got = risk(partials[k]);
        if (got - expected).abs() > 1e-7 {
            report
                .violations
                .push(ProperViolation::BayesRisk { pi, expected, got });
        }
        let argmin = partials
            .iter()
            .enumerate()
            .min_by(|a, b| risk(*a.1).total_cmp(&risk(*b.1)))
            .map(|(j, _)| j)
            .expect("non-empty grid");
        if argmin.abs_diff(k) > 1 {
            report.violations.push(ProperViolation::Minimizer {
                pi,
                argmin: interior[argmin],
            });
        }
    }
    Ok(report)
}

pub fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^v)` without overflow.
pub fn softplus(v: f64) -> f64 {
    v.max(0.0) + (-v.abs()).exp().ln_1p()
}

fn xlogx_neg(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        -x * x.ln()
    }
}

/// Piecewise cubic Hermite interpolant with prescribed knot slopes.
#[derive(Debug)]
struct HermiteTable {
    x: Vec<f64>,
    y: Vec<f64>,
    m: Vec<f64>,
}

impl HermiteTable {
    fn new(x: Vec<f64>, y: Vec<f64>, m: Vec<f64>) -> Result<Self> {
        if x.len() < 2 || x.len() != y.len() || x.len() != m.len() {
            return Err(Error::invalid(
                "tabulated loss needs at least two rows of equal length",
            ));
        }
        if x[0] != 0.0 || *x.last().unwrap() != 1.0 {
            return Err(Error::invalid("tabulated loss must span pi = 0 to pi = 1"));
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("tabulated pi values must be strictly increasing"));
        }
        if y.iter().chain(&m).any(|v| !v.is_finite()) {
            return Err(Error::invalid("tabulated loss values must be finite"));
        }
        Ok(Self { x, y, m })
    }

    fn segment(&self, t: f64) -> (usize, f64, f64) {
        let k = match self.x.partition_point(|&xi| xi <= t) {
            0 => 0,
            p => (p - 1).min(self.x.len() - 2),
        };
        let h = self.x[k + 1] - self.x[k];
        (k, h, (t - self.x[k]) / h)
    }

    fn value(&self, t: f64) -> f64 {
        let (k, h, s) = self.segment(t);
        let (s2, s3) = (s * s, s * s * s);
        (2.0 * s3 - 3.0 * s2 + 1.0) * self.y[k]
            + (s3 - 2.0 * s2 + s) * h * self.m[k]
            + (-2.0 * s3 + 3.0 * s2) * self.y[k + 1]
            + (s3 - s2) * h * self.m[k + 1]
    }

    fn derivative(&self, t: f64) -> f64 {
        let (k, h, s) = self.segment(t);
        let s2 = s * s;
        ((6.0 * s2 - 6.0 * s) * self.y[k]
            + (3.0 * s2 - 4.0 * s + 1.0) * h * self.m[k]
            + (-6.0 * s2 + 6.0 * s) * self.y[k + 1]
            + (3.0 * s2 - 2.0 * s) * h * self.m[k + 1])
            / h
    }

    fn second_derivative(&self, t: f64) -> f64 {
        let (k, h, s) = self.segment(t);
        ((12.0 * s - 6.0) * self.y[k]
            + (6.0 * s - 4.0) * h * self.m[k]
            + (-12.0 * s + 6.0) * self.y[k + 1]
            + (6.0 * s - 2.0) * h * self.m[k + 1])
            / (h * h)
    }
}
