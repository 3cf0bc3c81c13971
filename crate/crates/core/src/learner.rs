//! Full-batch gradient descent on a proper composite loss over linear scorers
//! `h(x) = w·x + b`, and the clean/adversarial cross-evaluation grid.
//!
//! With a canonical link the objective is the Fenchel–Young form of the loss,
//! which is convex in `(w, b)` and finite for every score. Other links use
//! the Savage partial losses at `ψ⁻¹(h(x))`.

use serde::{Deserialize, Serialize};

use crate::data::{Label, LabeledDataset};
use crate::error::{Error, Result};
use crate::losses::{Link, ProperLoss};

/// Consecutive loss increases tolerated when backoff is disabled.
const DIVERGENCE_STREAK: usize = 10;

/// Probabilities are kept this far from 0 and 1 under non-canonical links.
const PROB_CLAMP: f64 = 1e-15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LinearModel {
    pub fn zeros(dim: usize) -> Self {
        Self {
            weights: vec![0.0; dim],
            bias: 0.0,
        }
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.bias
    }

    /// `‖(w, b)‖₂`.
    pub fn norm(&self) -> f64 {
        (self.weights.iter().map(|w| w * w).sum::<f64>() + self.bias * self.bias).sqrt()
    }

    fn params(&self) -> Vec<f64> {
        let mut p = self.weights.clone();
        p.push(self.bias);
        p
    }

    fn from_params(mut p: Vec<f64>) -> Self {
        let bias = p.pop().expect("bias slot");
        Self { weights: p, bias }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub loss: String,
    pub link: String,
    pub step: f64,
    pub max_iter: usize,
    /// Stop once the gradient ∞-norm is at most this.
    pub tol: f64,
    /// Penalty `½·l2·‖w‖²` on the weights (not the bias).
    pub l2: f64,
    /// Optional constraint `‖(w, b)‖₂ ≤ max_norm`, enforced by projection.
    pub max_norm: Option<f64>,
    pub backoff: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            loss: "log".into(),
            link: "canonical".into(),
            step: 0.5,
            max_iter: 50_000,
            tol: 1e-8,
            l2: 0.0,
            max_norm: None,
            backoff: true,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn for_loss(loss: &str) -> Self {
        Self {
            loss: loss.into(),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::invalid("step size must be positive"));
        }
        if self.max_iter == 0 {
            return Err(Error::invalid("max_iter must be at least 1"));
        }
        if !(self.tol >= 0.0) || !(self.l2 >= 0.0) {
            return Err(Error::invalid("tolerance and l2 penalty must be non-negative"));
        }
        if let Some(r) = self.max_norm {
            if !(r >= 0.0) {
                return Err(Error::invalid("max_norm must be non-negative"));
            }
        }
        Ok(())
    }

    pub fn resolve(&self) -> Result<(ProperLoss, Link)> {
        let loss = ProperLoss::by_name(&self.loss)?;
        let link = Link::by_name(&loss, &self.link)?;
        Ok((loss, link))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    GradientTolerance,
    MaxIterations,
    StepUnderflow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub iterations: usize,
    pub converged: bool,
    pub stop_reason: StopReason,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub grad_norm: f64,
    /// Objective after every accepted step, starting with the initial value.
    #[serde(skip)]
    pub trace: Vec<f64>,
}

/// The training objective on a fixed dataset.
pub struct Objective<'a> {
    loss: &'a ProperLoss,
    link: &'a Link,
    canonical: bool,
    ds: &'a LabeledDataset,
    weights: Vec<f64>,
    l2: f64,
}

impl<'a> Objective<'a> {
    pub fn new(loss: &'a ProperLoss, link: &'a Link, ds: &'a LabeledDataset, l2: f64) -> Self {
        let weights = (0..ds.len()).map(|i| ds.weight(i)).collect();
        Self {
            loss,
            link,
            canonical: link.is_canonical_for(loss),
            ds,
            weights,
            l2,
        }
    }

    fn pointwise(&self, y: Label, v: f64) -> Result<f64> {
        if self.canonical {
            return Ok(self.loss.canonical_loss(y, v));
        }
        let c = self.link.inverse(v)?.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
        self.loss.partial_loss(y, c)
    }

    // ∂ℓ(y, v)/∂v.
    fn slope(&self, y: Label, v: f64) -> Result<f64> {
        let y01 = (y.as_f64() + 1.0) / 2.0;
        if self.canonical {
            return Ok(self.loss.canonical_inverse_ext(v) - y01);
        }
        let c = self.link.inverse(v)?.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
        Ok((c - y01) * -self.loss.cbr_second(c) * self.link.inverse_prime(v))
    }

    fn penalty(&self, m: &LinearModel) -> f64 {
        0.5 * self.l2 * m.weights.iter().map(|w| w * w).sum::<f64>()
    }

    pub fn value(&self, m: &LinearModel) -> Result<f64> {
        let mut total = 0.0;
        for (i, (x, &y)) in self.ds.points().iter().zip(self.ds.labels()).enumerate() {
            let w = self.weights[i];
            if w != 0.0 {
                total += w * self.pointwise(y, m.score(x))?;
            }
        }
        Ok(total + self.penalty(m))
    }

    /// Gradient with respect to `(w, b)`, bias last.
    pub fn gradient(&self, m: &LinearModel) -> Result<Vec<f64>> {
        let d = m.weights.len();
        let mut g = vec![0.0; d + 1];
        for (i, (x, &y)) in self.ds.points().iter().zip(self.ds.labels()).enumerate() {
            let w = self.weights[i];
            if w == 0.0 {
                continue;
            }
            let s = w * self.slope(y, m.score(x))?;
            for (gk, xk) in g.iter_mut().zip(x) {
                *gk += s * xk;
            }
            g[d] += s;
        }
        for (gk, wk) in g.iter_mut().zip(&m.weights) {
            *gk += self.l2 * wk;
        }
        Ok(g)
    }
}

fn project(mut p: Vec<f64>, radius: Option<f64>) -> Vec<f64> {
    if let Some(r) = radius {
        let norm = p.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > r {
            let s = r / norm;
            p.iter_mut().for_each(|v| *v *= s);
        }
    }
    p
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |a, x| a.max(x.abs()))
}

/// Full-batch gradient descent from the zero model.
pub fn train(ds: &LabeledDataset, cfg: &TrainConfig) -> Result<(LinearModel, TrainReport)> {
    cfg.validate()?;
    let (loss, link) = cfg.resolve()?;
    train_with(ds, &loss, &link, cfg)
}

/// [`train`] with an explicit loss and link (for losses not in the registry).
pub fn train_with(ds: &LabeledDataset, loss: &ProperLoss, link: &Link, cfg: &TrainConfig) -> Result<(LinearModel, TrainReport)> {
    cfg.validate()?;
    let obj = Objective::new(loss, link, ds, cfg.l2);
    let mut model = LinearModel::zeros(ds.dim());
    let mut params = model.params();
    let mut value = obj.value(&model)?;
    let initial_loss = value;
    let mut trace = vec![value];
    let mut step = cfg.step;
    let mut increases = 0usize;
    let mut stop_reason = StopReason::MaxIterations;
    let mut iterations = 0;

    // Stationarity measure: the gradient, or the projected-gradient mapping
    // under a norm constraint.
    let measure = |params: &[f64], g: &[f64]| -> f64 {
        if cfg.max_norm.is_none() {
            return inf_norm(g);
        }
        let moved: Vec<f64> = params.iter().zip(g).map(|(p, gk)| p - cfg.step * gk).collect();
        let proj = project(moved, cfg.max_norm);
        params.iter().zip(&proj).fold(0.0_f64, |a, (p, q)| a.max((p - q).abs() / cfg.step))
    };

    let mut grad = obj.gradient(&model)?;
    let mut grad_norm = measure(&params, &grad);
    while iterations < cfg.max_iter {
        if grad_norm <= cfg.tol {
            stop_reason = StopReason::GradientTolerance;
            break;
        }
        let (next_params, next_model, next_value) = loop {
            let cand: Vec<f64> = params.iter().zip(&grad).map(|(p, g)| p - step * g).collect();
            let cand = project(cand, cfg.max_norm);
            let cand_model = LinearModel::from_params(cand.clone());
            let v = obj.value(&cand_model)?;
            if cfg.backoff && !(v <= value) {
                step *= 0.5;
                if step < cfg.step * 1e-30 {
                    break (None, None, v);
                }
                continue;
            }
            break (Some(cand), Some(cand_model), v);
        };
        let (Some(next_params), Some(next_model)) = (next_params, next_model) else {
            stop_reason = StopReason::StepUnderflow;
            break;
        };
        iterations += 1;
        if next_value > value {
            increases += 1;
            if increases >= DIVERGENCE_STREAK {
                return Err(Error::Divergence(iterations));
            }
        } else {
            increases = 0;
        }
        if !next_value.is_finite() {
            return Err(Error::Divergence(iterations));
        }
        params = next_params;
        model = next_model;
        value = next_value;
        trace.push(value);
        if cfg.backoff {
            step = (2.0 * step).min(cfg.step);
        }
        grad = obj.gradient(&model)?;
        grad_norm = measure(&params, &grad);
    }
    if stop_reason == StopReason::MaxIterations && grad_norm <= cfg.tol {
        stop_reason = StopReason::GradientTolerance;
    }
    let report = TrainReport {
        iterations,
        converged: stop_reason == StopReason::GradientTolerance,
        stop_reason,
        initial_loss,
        final_loss: value,
        grad_norm,
        trace,
    };
    Ok((model, report))
}

/// Weighted mean of the composite loss over the dataset. Canonical links use
/// the Fenchel–Young form, so scores outside a bounded link's image are
/// scored by its convex extension rather than rejected.
pub fn expected_loss(model: &LinearModel, loss: &ProperLoss, link: &Link, ds: &LabeledDataset) -> Result<f64> {
    if model.weights.len() != ds.dim() {
        return Err(Error::invalid(format!(
            "model has {} weights but data has dimension {}",
            model.weights.len(),
            ds.dim()
        )));
    }
    Objective::new(loss, link, ds, 0.0).value(model)
}

/// Train on the row dataset, test on the column dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossEval {
    pub cc: f64,
    pub ca: f64,
    pub ac: f64,
    pub aa: f64,
    pub clean_model: LinearModel,
    pub adv_model: LinearModel,
    pub clean_report: TrainReport,
    pub adv_report: TrainReport,
}

pub fn cross_eval(clean: &LabeledDataset, adv: &LabeledDataset, cfg: &TrainConfig) -> Result<CrossEval> {
    check_paired(clean, adv)?;
    cfg.validate()?;
    let (loss, link) = cfg.resolve()?;
    let (c, a) = rayon::join(|| train_with(clean, &loss, &link, cfg), || train_with(adv, &loss, &link, cfg));
    assemble(clean, adv, c?, a?, cfg)
}

/// [`cross_eval`] reusing a model already trained on `clean` with `cfg`.
pub fn cross_eval_from(
    clean: &LabeledDataset,
    clean_fit: (LinearModel, TrainReport),
    adv: &LabeledDataset,
    cfg: &TrainConfig,
) -> Result<CrossEval> {
    check_paired(clean, adv)?;
    cfg.validate()?;
    let (loss, link) = cfg.resolve()?;
    let a = train_with(adv, &loss, &link, cfg)?;
    assemble(clean, adv, clean_fit, a, cfg)
}

fn check_paired(clean: &LabeledDataset, adv: &LabeledDataset) -> Result<()> {
    if clean.len() != adv.len() || clean.labels() != adv.labels() || clean.weights() != adv.weights() {
        return Err(Error::invalid("adversarial dataset must share labels and weights with the clean one"));
    }
    Ok(())
}

fn assemble(
    clean: &LabeledDataset,
    adv: &LabeledDataset,
    (clean_model, clean_report): (LinearModel, TrainReport),
    (adv_model, adv_report): (LinearModel, TrainReport),
    cfg: &TrainConfig,
) -> Result<CrossEval> {
    let (loss, link) = cfg.resolve()?;
    Ok(CrossEval {
        cc: expected_loss(&clean_model, &loss, &link, clean)?,
        ca: expected_loss(&clean_model, &loss, &link, adv)?,
        ac: expected_loss(&adv_model, &loss, &link, clean)?,
        aa: expected_loss(&adv_model, &loss, &link, adv)?,
        clean_model,
        adv_model,
        clean_report,
        adv_report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversaries::Adversary;
    use approx::assert_abs_diff_eq;
    use Label::{Neg, Pos};

    const LN2: f64 = std::f64::consts::LN_2;

    fn ds(points: &[f64], labels: &[Label]) -> LabeledDataset {
        LabeledDataset::new(points.iter().map(|&x| vec![x]).collect(), labels.to_vec(), None).unwrap()
    }

    #[test]
    fn zero_model_losses() {
        let d = ds(&[0.0, 1.0, 2.0], &[Neg, Pos, Pos]);
        let zero = LinearModel::zeros(1);
        let log = ProperLoss::log();
        assert_eq!(expected_loss(&zero, &log, &log.canonical_link().unwrap(), &d).unwrap(), LN2);
        let sq = ProperLoss::square();
        assert_eq!(expected_loss(&zero, &sq, &sq.canonical_link().unwrap(), &d).unwrap(), 0.25);
    }

    #[test]
    fn zero_weight_points_do_not_count() {
        let d = LabeledDataset::new(vec![vec![0.0], vec![1.0], vec![9.0]], vec![Neg, Pos, Pos], Some(vec![0.5, 0.5, 0.0])).unwrap();
        let trimmed = LabeledDataset::new(vec![vec![0.0], vec![1.0]], vec![Neg, Pos], None).unwrap();
        let m = LinearModel {
            weights: vec![3.0],
            bias: -1.0,
        };
        let log = ProperLoss::log();
        let link = log.canonical_link().unwrap();
        assert_eq!(
            expected_loss(&m, &log, &link, &d).unwrap(),
            expected_loss(&m, &log, &link, &trimmed).unwrap()
        );
    }

    #[test]
    fn separated_point_masses() {
        let d = ds(&[0.0, 1.0], &[Neg, Pos]);
        let (m, r) = train(&d, &TrainConfig::default()).unwrap();
        assert!(r.final_loss < 0.01, "{}", r.final_loss);
        assert!(m.weights[0] > 0.0);
        assert!(!r.converged);
        assert_eq!(r.stop_reason, StopReason::MaxIterations);
    }

    #[test]
    fn identical_marginals_stay_at_zero() {
        let d = ds(&[0.0, 1.0, 0.0, 1.0], &[Neg, Neg, Pos, Pos]);
        let (m, r) = train(&d, &TrainConfig::default()).unwrap();
        assert!(r.converged);
        assert_abs_diff_eq!(r.final_loss, LN2, epsilon = 1e-6);
        assert!(m.norm() < 1e-6);
    }

    #[test]
    fn square_loss_stationary_point() {
        // Objective ½[((1+b)/2)² + ((1−w−b)/2)²]; stationary at w = 2, b = −1.
        let d = ds(&[0.0, 1.0], &[Neg, Pos]);
        let (m, r) = train(&d, &TrainConfig::for_loss("square")).unwrap();
        assert!(r.converged);
        assert_abs_diff_eq!(m.weights[0], 2.0, epsilon = 1e-6);
        assert_abs_diff_eq!(m.bias, -1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(r.final_loss, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let pts = vec![vec![0.3, -1.2], vec![1.1, 0.4], vec![-0.7, 0.9], vec![0.2, 0.2]];
        let d = LabeledDataset::new(pts, vec![Neg, Pos, Pos, Neg], Some(vec![0.1, 0.2, 0.3, 0.4])).unwrap();
        let models = [
            LinearModel { weights: vec![0.4, -0.3], bias: 0.1 },
            LinearModel { weights: vec![-1.5, 2.0], bias: 0.7 },
        ];
        for name in ["log", "square", "matsushita"] {
            let loss = ProperLoss::by_name(name).unwrap();
            for link in [loss.canonical_link().unwrap(), Link::logit()] {
                let obj = Objective::new(&loss, &link, &d, 0.05);
                for m in &models {
                    let g = obj.gradient(m).unwrap();
                    let p = m.params();
                    for k in 0..p.len() {
                        let h = 1e-6;
                        let (mut up, mut dn) = (p.clone(), p.clone());
                        up[k] += h;
                        dn[k] -= h;
                        let fd = (obj.value(&LinearModel::from_params(up)).unwrap()
                            - obj.value(&LinearModel::from_params(dn)).unwrap())
                            / (2.0 * h);
                        let rel = (fd - g[k]).abs() / g[k].abs().max(1e-3);
                        assert!(rel < 1e-5, "{name} {:?} k={k}: fd {fd} vs {}", link.kind(), g[k]);
                    }
                }
            }
        }
    }

    #[test]
    fn backoff_trace_is_monotone() {
        let d = ds(&[0.0, 0.4, 0.5, 1.0, 0.2], &[Neg, Pos, Neg, Pos, Neg]);
        let cfg = TrainConfig {
            step: 50.0,
            max_iter: 500,
            ..TrainConfig::default()
        };
        let (_, r) = train(&d, &cfg).unwrap();
        assert!(r.trace.windows(2).all(|w| w[1] <= w[0]));
        assert!(r.final_loss <= r.initial_loss);
    }

    #[test]
    fn divergence_without_backoff() {
        let d = ds(&[0.0, 10.0, 5.0, 20.0], &[Neg, Pos, Neg, Pos]);
        let cfg = TrainConfig {
            loss: "square".into(),
            step: 10.0,
            l2: 1.0,
            backoff: false,
            ..TrainConfig::default()
        };
        assert!(matches!(train(&d, &cfg), Err(Error::Divergence(_))));
    }

    #[test]
    fn norm_constraint_is_respected() {
        let d = ds(&[0.0, 1.0], &[Neg, Pos]);
        let cfg = TrainConfig {
            max_norm: Some(0.5),
            ..TrainConfig::default()
        };
        let (m, r) = train(&d, &cfg).unwrap();
        assert!(m.norm() <= 0.5 + 1e-12);
        assert!(r.converged);
    }

    #[test]
    fn config_validation() {
        let d = ds(&[0.0, 1.0], &[Neg, Pos]);
        for cfg in [
            TrainConfig { step: 0.0, ..TrainConfig::default() },
            TrainConfig { max_iter: 0, ..TrainConfig::default() },
            TrainConfig::for_loss("hinge"),
        ] {
            assert!(train(&d, &cfg).is_err());
        }
    }

    #[test]
    fn identity_adversary_cross_eval() {
        let d = ds(&[0.0, 0.3, 0.5, 0.9, 1.0], &[Neg, Neg, Pos, Neg, Pos]);
        let adv = Adversary::identity().apply(&d).unwrap();
        let t = cross_eval(&d, &adv, &TrainConfig::default()).unwrap();
        for v in [t.ca, t.ac, t.aa] {
            assert_abs_diff_eq!(v, t.cc, epsilon = 1e-9);
        }
    }

    #[test]
    fn collapsing_adversary_reaches_blunt_loss() {
        let d = ds(&[0.0, 0.3, 0.5, 0.9, 1.0], &[Neg, Neg, Pos, Neg, Pos]);
        let adv = Adversary::mixup_to_point(0.0, vec![0.5]).unwrap().apply(&d).unwrap();
        let t = cross_eval(&d, &adv, &TrainConfig::default()).unwrap();
        // π = 0.4 here, so the a/a optimum is the prior entropy.
        let h = -(0.4 * 0.4f64.ln() + 0.6 * 0.6f64.ln());
        assert_abs_diff_eq!(t.aa, h, epsilon = 1e-6);
    }
}
