//! Digits-style protocol: Monge adversaries fitted at budgets `α = f·d`,
//! where `d` is the L1 distance between the class means, then the
//! clean/adversarial cross-evaluation grid at each budget.

use std::time::Instant;

use rayon::prelude::*;

use super::{load_dataset, prepare_dir, write_json, write_rows, ExperimentConfig, RunReport, SweepRecord, DIGITS_COLUMNS};
use crate::adversaries::{fit_monge_adversary, Adversary, MongeFitConfig};
use crate::data::split_marginals;
use crate::distortion::{beta, defeat_certificate, hardness_bound, CertificateMethod, HypothesisClass};
use crate::error::{Error, Result};
use crate::learner::{cross_eval_from, train_with};
use crate::transport::{monge_cost, Cost};

fn budget_tag(frac: f64) -> String {
    format!("{frac:.4}")
}

pub fn run_digits(cfg: &ExperimentConfig) -> Result<RunReport> {
    let started = Instant::now();
    cfg.validate()?;
    let (clean, _) = load_dataset(cfg.dataset.as_ref().expect("validated"))?;
    let (p, n, pi) = split_marginals(&clean)?;
    let d: f64 = p.mean().iter().zip(n.mean()).map(|(a, b)| (a - b).abs()).sum();

    let mut fractions = cfg.sweep();
    if fractions.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::invalid("digits grid must be non-decreasing (fits are warm-started)"));
    }
    fractions.dedup();

    // Fits run in grid order, each starting from the previous table.
    let seed = cfg.seed.expect("validated");
    let mut fit_cfg = MongeFitConfig::new(cfg.monge_objective.parse()?, seed);
    fit_cfg.evaluations = cfg.monge_evaluations;
    let mut fits: Vec<(f64, f64, Adversary, f64)> = Vec::with_capacity(fractions.len());
    let mut previous: Option<Adversary> = None;
    for &frac in &fractions {
        let alpha = frac * d;
        let fit = fit_monge_adversary(&p, &n, alpha, &fit_cfg, previous.as_ref())?;
        if alpha == 0.0 {
            fits.push((frac, alpha, Adversary::identity(), fit.objective));
            continue;
        }
        previous = Some(fit.adversary.clone());
        fits.push((frac, alpha, fit.adversary, fit.objective));
    }

    let train = cfg.train_config();
    let (loss, link) = train.resolve()?;
    let clean_fit = train_with(&clean, &loss, &link, &train)?;
    let records: Vec<SweepRecord> = cfg.pool()?.install(|| {
        fits.par_iter()
            .map(|(frac, alpha, a, objective)| -> Result<SweepRecord> {
                let adv = a.apply(&clean)?;
                let table = cross_eval_from(&clean, clean_fit.clone(), &adv, &train)?;
                let w_norm = table.adv_model.norm();
                let b = beta(&loss, &link, &HypothesisClass::linear_ball(w_norm, clean.dim()), a, &p, &n, pi)?;
                let cert = defeat_certificate(&loss, &link, b, cfg.epsilon, a.id(), CertificateMethod::ClosedFormMmd)?;
                let record = SweepRecord {
                    alpha_frac: Some(*frac),
                    alpha: *alpha,
                    objective: Some(*objective),
                    delta: monge_cost(a, &p, &n, &Cost::Euclidean)?,
                    w_norm,
                    loss_cc: table.cc,
                    loss_ca: table.ca,
                    loss_ac: table.ac,
                    loss_aa: table.aa,
                    beta: b,
                    bound: hardness_bound(&loss, &[b])?,
                    verdict: cert.verdict,
                    adversary_id: a.id().to_string(),
                };
                record.check_bound()?;
                Ok(record)
            })
            .collect::<Result<_>>()
    })?;

    let dir = prepare_dir(cfg)?;
    let mut report = RunReport::new(cfg);
    for (frac, _, a, _) in &fits {
        let tag = budget_tag(*frac);
        let data_name = format!("digits_adv_{tag}.csv");
        let adv_name = format!("adversary_{tag}.json");
        a.apply(&clean)?.to_csv(dir.join(&data_name))?;
        write_json(&dir.join(&adv_name), a)?;
        report.outputs.push(data_name);
        report.outputs.push(adv_name);
    }
    let rows: Vec<Vec<f64>> = records
        .iter()
        .map(|r| {
            vec![
                r.alpha_frac.unwrap_or(0.0),
                r.alpha,
                r.objective.unwrap_or(0.0),
                r.delta,
                r.w_norm,
                r.loss_cc,
                r.loss_ca,
                r.loss_ac,
                r.loss_aa,
                r.beta,
                r.bound,
            ]
        })
        .collect();
    write_rows(&dir.join("digits.csv"), &DIGITS_COLUMNS, &rows)?;
    report.outputs.push("digits.csv".into());
    report.records = records;
    report.finish(&dir, started)
}
