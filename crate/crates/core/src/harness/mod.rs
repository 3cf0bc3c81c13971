//! Experiment configuration, runners and report emission.
//!
//! Every runner takes an [`ExperimentConfig`], writes its CSV/JSON artefacts
//! into the configured output directory and returns a [`RunReport`]. Given
//! the same configuration the artefacts are byte-identical across runs.

mod certify;
mod digits;
pub mod synth;
mod toy1d;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::adversaries::Adversary;
use crate::data::{unconditional_mean, EmpiricalMarginal, LabeledDataset, Prior};
use crate::digest;
use crate::distortion::{DefeatCertificate, JointDefeatReport};
use crate::error::{Error, Result};
use crate::learner::TrainConfig;
use crate::transport::{cost_matrix, optimal_coupling, Cost};

pub use certify::run_certify;
pub use digits::run_digits;
pub use toy1d::{run_toy1d, toy_marginals, toy_negative, toy_positive};

/// Environment variable naming the default output directory.
pub const OUTPUT_ENV: &str = "ADVBOUND_OUT";

/// Column order of the toy sweep CSV.
pub const TOY_COLUMNS: [&str; 9] = ["alpha", "delta", "w_norm", "loss_cc", "loss_ca", "loss_ac", "loss_aa", "beta", "bound"];

/// Column order of the digits sweep CSV.
pub const DIGITS_COLUMNS: [&str; 11] = [
    "alpha_frac",
    "alpha",
    "objective",
    "delta",
    "w_norm",
    "loss_cc",
    "loss_ca",
    "loss_ac",
    "loss_aa",
    "beta",
    "bound",
];

/// Weight penalty used by the experiment runners unless configured.
pub const DEFAULT_L2: f64 = 1e-3;

/// Slack allowed when checking `loss_aa ≥ bound` on every row.
pub const BOUND_SLACK: f64 = 1e-6;

pub fn default_output_dir() -> PathBuf {
    std::env::var_os(OUTPUT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("out"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Toy1d,
    Digits,
    Certify,
    Transport,
}

/// Target of a mixup adversary: the unconditional mean or an explicit point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MixupTarget {
    Named(String),
    Point(Vec<f64>),
}

impl MixupTarget {
    pub fn resolve(&self, p: &EmpiricalMarginal, n: &EmpiricalMarginal, pi: Prior) -> Result<Vec<f64>> {
        match self {
            MixupTarget::Named(name) if name == "mean" => unconditional_mean(p, n, pi),
            MixupTarget::Named(other) => Err(Error::invalid(format!("unknown mixup target '{other}'"))),
            MixupTarget::Point(x) => Ok(x.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AdversarySpec {
    Identity,
    Mixup { lambda: f64, target: MixupTarget },
    File { path: PathBuf },
}

impl AdversarySpec {
    pub fn build(&self, p: &EmpiricalMarginal, n: &EmpiricalMarginal, pi: Prior) -> Result<Adversary> {
        match self {
            AdversarySpec::Identity => Ok(Adversary::identity()),
            AdversarySpec::Mixup { lambda, target } => Adversary::mixup_to_point(*lambda, target.resolve(p, n, pi)?),
            AdversarySpec::File { path } => Ok(serde_json::from_str(&fs::read_to_string(path)?)?),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub loss: String,
    /// A loss set; when non-empty it replaces `loss` and enables the joint
    /// symmetric verdict in `certify`.
    pub losses: Vec<String>,
    pub link: String,
    /// `linear`, `affine`, `rbf`, `rbf:<bw>`; `rbf` alone uses the median heuristic.
    pub kernel: Option<String>,
    pub adversary: Option<AdversarySpec>,
    /// Sweep grid: α for `toy1d`, α/d for `digits`. Empty means the default.
    pub grid: Vec<f64>,
    pub dataset: Option<PathBuf>,
    /// Marginal files for `transport`.
    pub p: Option<PathBuf>,
    pub n: Option<PathBuf>,
    pub cost: String,
    pub emit_coupling: bool,
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
    pub bins: usize,
    pub epsilon: f64,
    pub workers: Option<usize>,
    pub train: TrainConfig,
    /// Prior grid for the `certify` mmd_π curve. Empty means the default.
    pub pi_grid: Vec<f64>,
    pub monge_evaluations: usize,
    pub monge_objective: String,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: ExperimentKind::Toy1d,
            loss: "log".into(),
            losses: Vec::new(),
            link: "canonical".into(),
            kernel: None,
            adversary: None,
            grid: Vec::new(),
            dataset: None,
            p: None,
            n: None,
            cost: "euclidean".into(),
            emit_coupling: false,
            seed: None,
            output: None,
            bins: 200,
            epsilon: 0.05,
            workers: None,
            train: TrainConfig {
                l2: DEFAULT_L2,
                ..TrainConfig::default()
            },
            pi_grid: Vec::new(),
            monge_evaluations: 2000,
            monge_objective: "w2_squared".into(),
        }
    }
}

fn default_grid(kind: ExperimentKind) -> Vec<f64> {
    match kind {
        ExperimentKind::Toy1d => (0..=20).map(|k| k as f64 * 0.05).collect(),
        ExperimentKind::Digits => vec![0.15, 0.30, 0.45, 0.60],
        _ => Vec::new(),
    }
}

impl ExperimentConfig {
    pub fn new(experiment: ExperimentKind) -> Self {
        Self {
            experiment,
            ..Self::default()
        }
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    /// The effective sweep grid.
    pub fn sweep(&self) -> Vec<f64> {
        if self.grid.is_empty() {
            default_grid(self.experiment)
        } else {
            self.grid.clone()
        }
    }

    /// The effective loss names.
    pub fn loss_names(&self) -> Vec<String> {
        if self.losses.is_empty() {
            vec![self.loss.clone()]
        } else {
            self.losses.clone()
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output.clone().unwrap_or_else(default_output_dir)
    }

    /// Training settings with the experiment's loss and link filled in.
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            loss: self.loss.clone(),
            link: self.link.clone(),
            seed: self.seed.unwrap_or(self.train.seed),
            ..self.train.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let need = |field: &Option<PathBuf>, what: &str| -> Result<()> {
            match field {
                None => Err(Error::invalid(format!("{what} is required for this experiment"))),
                Some(p) if !p.exists() => Err(Error::invalid(format!("{what} '{}' does not exist", p.display()))),
                Some(_) => Ok(()),
            }
        };
        let grid = self.sweep();
        match self.experiment {
            ExperimentKind::Toy1d => {
                if grid.iter().any(|a| !(0.0..=1.0).contains(a)) {
                    return Err(Error::invalid("toy1d grid values must lie in [0,1]"));
                }
                if self.bins < 2 {
                    return Err(Error::invalid("bins must be at least 2"));
                }
            }
            ExperimentKind::Digits => {
                need(&self.dataset, "dataset")?;
                if self.seed.is_none() {
                    return Err(Error::invalid("digits fits Monge adversaries and needs a seed"));
                }
                if grid.iter().any(|a| !(*a >= 0.0) || !a.is_finite()) {
                    return Err(Error::invalid("digits grid values must be finite and non-negative"));
                }
            }
            ExperimentKind::Certify => {
                need(&self.dataset, "dataset")?;
                if let Some(AdversarySpec::File { path }) = &self.adversary {
                    need(&Some(path.clone()), "adversary file")?;
                }
                if self.pi_grid.iter().any(|p| !(*p > 0.0 && *p < 1.0)) {
                    return Err(Error::invalid("pi grid values must lie in (0,1)"));
                }
            }
            ExperimentKind::Transport => {
                need(&self.p, "marginal p")?;
                need(&self.n, "marginal n")?;
                self.cost.parse::<Cost>()?;
            }
        }
        if matches!(self.experiment, ExperimentKind::Toy1d | ExperimentKind::Digits) && grid.is_empty() {
            return Err(Error::invalid("sweep grid is empty"));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::invalid("epsilon must lie in [0,1]"));
        }
        if self.workers == Some(0) {
            return Err(Error::invalid("workers must be at least 1"));
        }
        for name in self.loss_names() {
            crate::losses::ProperLoss::by_name(&name)?;
        }
        self.train_config().validate()
    }

    /// Digest of the fields that determine results (`output` and `workers`
    /// excluded).
    pub fn digest(&self) -> String {
        let mut canon = self.clone();
        canon.output = None;
        canon.workers = None;
        digest::of_json(&canon)
    }

    pub(crate) fn pool(&self) -> Result<rayon::ThreadPool> {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(w) = self.workers {
            b = b.num_threads(w);
        }
        b.build().map_err(|e| Error::invalid(format!("thread pool: {e}")))
    }
}

/// One sweep point of `toy1d` or `digits`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    /// `α/d` for digits.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_frac: Option<f64>,
    pub alpha: f64,
    /// Monge fit objective (digits only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub objective: Option<f64>,
    pub delta: f64,
    pub w_norm: f64,
    pub loss_cc: f64,
    pub loss_ca: f64,
    pub loss_ac: f64,
    pub loss_aa: f64,
    pub beta: f64,
    pub bound: f64,
    pub verdict: bool,
    pub adversary_id: String,
}

impl SweepRecord {
    fn check_bound(&self) -> Result<()> {
        if self.loss_aa < self.bound - BOUND_SLACK {
            return Err(Error::Numeric(format!(
                "adversarial loss {} is below the hardness bound {} at alpha {}",
                self.loss_aa, self.bound, self.alpha
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportResult {
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coupling: Option<Vec<(usize, usize, f64)>>,
}

/// Sampled unit-ball supremum next to the closed form it must not exceed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledCheck {
    pub loss: String,
    pub closed_form: f64,
    pub sampled: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub experiment: ExperimentKind,
    pub config_digest: String,
    pub version: String,
    pub records: Vec<SweepRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub certificates: Vec<DefeatCertificate>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sampled_checks: Vec<SampledCheck>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub joint: Option<JointDefeatReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transport: Option<TransportResult>,
    /// Files written, relative to the output directory.
    pub outputs: Vec<String>,
    /// Kept out of the JSON so reports stay byte-identical across runs.
    #[serde(skip)]
    pub wall_time: Duration,
}

impl RunReport {
    pub(crate) fn new(cfg: &ExperimentConfig) -> Self {
        Self {
            experiment: cfg.experiment,
            config_digest: cfg.digest(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            records: Vec::new(),
            certificates: Vec::new(),
            sampled_checks: Vec::new(),
            joint: None,
            transport: None,
            outputs: Vec::new(),
            wall_time: Duration::ZERO,
        }
    }

    /// Writes `report.json` into `dir` and records it.
    pub(crate) fn finish(mut self, dir: &Path, started: std::time::Instant) -> Result<Self> {
        self.outputs.push("report.json".into());
        write_json(&dir.join("report.json"), &self)?;
        self.wall_time = started.elapsed();
        Ok(self)
    }
}

/// Dispatches on `cfg.experiment`.
pub fn run(cfg: &ExperimentConfig) -> Result<RunReport> {
    match cfg.experiment {
        ExperimentKind::Toy1d => run_toy1d(cfg),
        ExperimentKind::Digits => run_digits(cfg),
        ExperimentKind::Certify => run_certify(cfg),
        ExperimentKind::Transport => run_transport(cfg),
    }
}

/// Optimal transport between two marginal files under `cfg.cost`.
pub fn run_transport(cfg: &ExperimentConfig) -> Result<RunReport> {
    let started = std::time::Instant::now();
    cfg.validate()?;
    let p = EmpiricalMarginal::from_path(cfg.p.as_ref().expect("validated"))?;
    let n = EmpiricalMarginal::from_path(cfg.n.as_ref().expect("validated"))?;
    let result = transport(&p, &n, &cfg.cost.parse()?, cfg.emit_coupling)?;
    let dir = prepare_dir(cfg)?;
    write_json(&dir.join("transport.json"), &result)?;
    let mut report = RunReport::new(cfg);
    report.transport = Some(result);
    report.outputs.push("transport.json".into());
    report.finish(&dir, started)
}

/// Optimal transport value, with the coupling as `(row, col, weight)` triples
/// when requested.
pub fn transport(p: &EmpiricalMarginal, n: &EmpiricalMarginal, cost: &Cost, coupling: bool) -> Result<TransportResult> {
    let cm = cost_matrix(cost, &Adversary::identity(), p, n)?;
    let (plan, value) = optimal_coupling(&cm, p.mass(), n.mass())?;
    Ok(TransportResult {
        value,
        coupling: coupling.then(|| plan.triples()),
    })
}

pub(crate) fn prepare_dir(cfg: &ExperimentConfig) -> Result<PathBuf> {
    let dir = cfg.output_dir();
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

pub(crate) fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub(crate) fn write_rows(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads the dataset file and returns it with the digest of its bytes.
pub(crate) fn load_dataset(path: &Path) -> Result<(LabeledDataset, String)> {
    let bytes = fs::read(path)?;
    Ok((LabeledDataset::from_csv(path)?, digest::short_hex(&bytes)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_defaults_and_round_trip() {
        let cfg = ExperimentConfig::new(ExperimentKind::Toy1d);
        assert_eq!(cfg.sweep().len(), 21);
        assert_eq!(cfg.sweep()[20], 1.0);
        cfg.validate().unwrap();
        let text = serde_json::to_string(&cfg).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.digest(), cfg.digest());
    }

    #[test]
    fn minimal_json_config() {
        let cfg: ExperimentConfig = serde_json::from_str(r#"{"experiment": "digits", "seed": 3}"#).unwrap();
        assert_eq!(cfg.sweep(), vec![0.15, 0.30, 0.45, 0.60]);
        assert!(cfg.validate().is_err(), "dataset missing");
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"experiment": "toy1d", "bogus": 1}"#).is_err());
    }

    #[test]
    fn validation_rejects_bad_fields() {
        let bad = [
            ExperimentConfig {
                grid: vec![1.5],
                ..ExperimentConfig::new(ExperimentKind::Toy1d)
            },
            ExperimentConfig {
                epsilon: 2.0,
                ..ExperimentConfig::new(ExperimentKind::Toy1d)
            },
            ExperimentConfig {
                loss: "hinge".into(),
                ..ExperimentConfig::new(ExperimentKind::Toy1d)
            },
            ExperimentConfig {
                workers: Some(0),
                ..ExperimentConfig::new(ExperimentKind::Toy1d)
            },
            ExperimentConfig::new(ExperimentKind::Transport),
            ExperimentConfig {
                dataset: Some("/nonexistent/file.csv".into()),
                ..ExperimentConfig::new(ExperimentKind::Certify)
            },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
    }

    #[test]
    fn adversary_spec_json() {
        let spec: AdversarySpec = serde_json::from_str(r#"{"kind": "mixup", "lambda": 0.5, "target": "mean"}"#).unwrap();
        let p = EmpiricalMarginal::dirac(vec![0.0]);
        let n = EmpiricalMarginal::dirac(vec![2.0]);
        let a = spec.build(&p, &n, Prior::new(0.5).unwrap()).unwrap();
        assert_eq!(a.apply_point(&[0.0]), vec![0.5]);
        let spec: AdversarySpec = serde_json::from_str(r#"{"kind": "mixup", "lambda": 0.5, "target": [4.0]}"#).unwrap();
        assert_eq!(spec.build(&p, &n, Prior::new(0.5).unwrap()).unwrap().apply_point(&[0.0]), vec![2.0]);
        let spec: AdversarySpec = serde_json::from_str(r#"{"kind": "mixup", "lambda": 0.5, "target": "median"}"#).unwrap();
        assert!(spec.build(&p, &n, Prior::new(0.5).unwrap()).is_err());
    }
}
