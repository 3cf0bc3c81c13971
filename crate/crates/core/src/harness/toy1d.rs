//! One-dimensional toy: two discretised Gaussians on the unit interval and a
//! mixup-to-mean adversary of growing strength.

use std::time::Instant;

use rayon::prelude::*;

use super::{prepare_dir, write_rows, ExperimentConfig, RunReport, SweepRecord, TOY_COLUMNS};
use crate::adversaries::Adversary;
use crate::data::{discretize_density, recombine, unconditional_mean, EmpiricalMarginal, Prior};
use crate::distortion::{beta, defeat_certificate, hardness_bound, CertificateMethod, HypothesisClass};
use crate::error::Result;
use crate::learner::{cross_eval_from, train_with};
use crate::transport::{monge_cost, Cost};

/// Positive class density, unnormalised.
pub fn toy_positive(x: f64) -> f64 {
    (-((x - 0.2) / 0.1).powi(2)).exp()
}

/// Negative class density, unnormalised.
pub fn toy_negative(x: f64) -> f64 {
    (-((x - 0.6) / 0.2).powi(2)).exp()
}

/// The two class marginals on `bins` equal-width bins of [0,1].
pub fn toy_marginals(bins: usize) -> Result<(EmpiricalMarginal, EmpiricalMarginal)> {
    Ok((
        discretize_density(toy_positive, 0.0, 1.0, bins)?,
        discretize_density(toy_negative, 0.0, 1.0, bins)?,
    ))
}

/// Sweeps `α` over the grid with the adversary `x ↦ (1−α)x + α·E X`.
pub fn run_toy1d(cfg: &ExperimentConfig) -> Result<RunReport> {
    let started = Instant::now();
    cfg.validate()?;
    let (p, n) = toy_marginals(cfg.bins)?;
    let pi = Prior::new(0.5)?;
    let mean = unconditional_mean(&p, &n, pi)?;
    let clean = recombine(&p, &n, pi)?;
    let train = cfg.train_config();
    let (loss, link) = train.resolve()?;
    let clean_fit = train_with(&clean, &loss, &link, &train)?;

    let point = |alpha: f64| -> Result<SweepRecord> {
        let a = Adversary::mixup_to_point(1.0 - alpha, mean.clone())?;
        let delta = monge_cost(&a, &p, &n, &Cost::Euclidean)?;
        let adv = a.apply(&clean)?;
        let table = cross_eval_from(&clean, clean_fit.clone(), &adv, &train)?;
        let w_norm = table.adv_model.norm();
        let class = HypothesisClass::linear_ball(w_norm, 1);
        let b = beta(&loss, &link, &class, &a, &p, &n, pi)?;
        let bound = hardness_bound(&loss, &[b])?;
        let cert = defeat_certificate(&loss, &link, b, cfg.epsilon, a.id(), CertificateMethod::ClosedFormMmd)?;
        let record = SweepRecord {
            alpha_frac: None,
            alpha,
            objective: None,
            delta,
            w_norm,
            loss_cc: table.cc,
            loss_ca: table.ca,
            loss_ac: table.ac,
            loss_aa: table.aa,
            beta: b,
            bound,
            verdict: cert.verdict,
            adversary_id: a.id().to_string(),
        };
        record.check_bound()?;
        Ok(record)
    };

    let grid = cfg.sweep();
    let records: Vec<SweepRecord> = cfg
        .pool()?
        .install(|| grid.par_iter().map(|&alpha| point(alpha)).collect::<Result<_>>())?;

    let dir = prepare_dir(cfg)?;
    let rows: Vec<Vec<f64>> = records
        .iter()
        .map(|r| vec![r.alpha, r.delta, r.w_norm, r.loss_cc, r.loss_ca, r.loss_ac, r.loss_aa, r.beta, r.bound])
        .collect();
    write_rows(&dir.join("toy1d.csv"), &TOY_COLUMNS, &rows)?;
    let mut report = RunReport::new(cfg);
    report.records = records;
    report.outputs.push("toy1d.csv".into());
    report.finish(&dir, started)
}
