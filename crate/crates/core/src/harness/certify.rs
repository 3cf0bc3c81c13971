//! Defeat certificates for a dataset, an adversary and one or more losses.

use std::time::Instant;

use super::{load_dataset, prepare_dir, write_json, write_rows, AdversarySpec, ExperimentConfig, RunReport, SampledCheck};
use crate::data::{split_marginals, Prior};
use crate::digest;
use crate::distortion::{
    beta, defeat_certificate, gamma_finite, joint_defeat_certificate, sample_unit_ball, weighted_mmd, CertificateMethod,
    HypothesisClass, DEFAULT_BALL_SAMPLES,
};
use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::losses::{Link, ProperLoss};

/// Default prior grid for the mmd_π curve.
pub fn default_pi_grid() -> Vec<f64> {
    (1..20).map(|k| k as f64 * 0.05).collect()
}

pub fn run_certify(cfg: &ExperimentConfig) -> Result<RunReport> {
    let started = Instant::now();
    cfg.validate()?;
    let (ds, data_digest) = load_dataset(cfg.dataset.as_ref().expect("validated"))?;
    let (p, n, pi) = split_marginals(&ds)?;
    let a = cfg.adversary.clone().unwrap_or(AdversarySpec::Identity).build(&p, &n, pi)?;
    let pooled: Vec<Vec<f64>> = p.support().iter().chain(n.support()).cloned().collect();
    let kernel = Kernel::parse_with_data(cfg.kernel.as_deref().unwrap_or("rbf"), &pooled)?;
    let class = HypothesisClass::rkhs_unit_ball(kernel);
    let transformed: Vec<Vec<f64>> = pooled.iter().map(|x| a.apply_point(x)).collect();
    class.validate(&transformed)?;

    let losses: Vec<ProperLoss> = cfg.loss_names().iter().map(|l| ProperLoss::by_name(l)).collect::<Result<_>>()?;
    let links: Vec<Link> = losses.iter().map(|l| Link::by_name(l, &cfg.link)).collect::<Result<_>>()?;

    let mut report = RunReport::new(cfg);
    let kernel_digest = digest::of_json(&kernel);
    let members = match cfg.seed {
        Some(seed) => Some(sample_unit_ball(&kernel, &transformed, DEFAULT_BALL_SAMPLES, seed)?),
        None => None,
    };
    for (loss, link) in losses.iter().zip(&links) {
        let b = beta(loss, link, &class, &a, &p, &n, pi)?;
        if let Some(members) = &members {
            let g = |v: f64| -> Result<f64> { Ok(v) };
            let (b1, b0) = (2.0 * loss.cbr(1.0)?, 2.0 * loss.cbr(0.0)?);
            let (sampled, _) = gamma_finite(members, &g, &a, &p, &n, pi, b1, b0)?;
            if sampled > b + 1e-9 {
                return Err(Error::Numeric(format!(
                    "sampled unit-ball supremum {sampled} exceeds the closed form {b} for loss {}",
                    loss.name()
                )));
            }
            report.sampled_checks.push(SampledCheck {
                loss: loss.name().to_string(),
                closed_form: b,
                sampled,
                samples: members.len(),
            });
        }
        let cert = defeat_certificate(loss, link, b, cfg.epsilon, a.id(), CertificateMethod::ClosedFormMmd)?
            .with_digest("dataset", data_digest.clone())
            .with_digest("adversary", a.id())
            .with_digest("kernel", kernel_digest.clone())
            .with_digest("config", report.config_digest.clone());
        report.certificates.push(cert);
    }

    // mmd_π curve: the weighted MMD and each loss's β over a prior grid.
    let pi_grid = if cfg.pi_grid.is_empty() { default_pi_grid() } else { cfg.pi_grid.clone() };
    let mut header = vec!["pi".to_string(), "mmd".to_string()];
    for loss in &losses {
        header.push(format!("beta_{}", loss.name()));
        header.push(format!("bound_{}", loss.name()));
    }
    let mut rows = Vec::with_capacity(pi_grid.len());
    for &q in &pi_grid {
        let prior = Prior::new(q)?;
        let mmd = weighted_mmd(&kernel, &a, &p, &n, prior)?;
        let mut row = vec![q, mmd];
        for loss in &losses {
            let b = 2.0 * loss.delta(q)? + mmd;
            row.push(b);
            row.push((loss.blunt() - b / 2.0).max(0.0));
        }
        rows.push(row);
    }

    let dir = prepare_dir(cfg)?;
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    write_rows(&dir.join("mmd_pi.csv"), &header_refs, &rows)?;
    write_json(&dir.join("certificates.json"), &report.certificates)?;
    report.outputs.push("mmd_pi.csv".into());
    report.outputs.push("certificates.json".into());

    if losses.len() > 1 {
        let gamma0 = weighted_mmd(&kernel, &a, &p, &n, pi)?;
        let joint = joint_defeat_certificate(&losses, gamma0, cfg.epsilon)?;
        write_json(&dir.join("joint.json"), &joint)?;
        report.outputs.push("joint.json".into());
        report.joint = Some(joint);
    }
    report.finish(&dir, started)
}
