//! `advbound` command-line interface.
//!
//! Exit codes: 0 success, 2 configuration or input error, 3 numeric failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use advbound::adversaries::{boost_iterations, contractivity, fit_monge_adversary, iterate, MongeFitConfig};
use advbound::data::split_marginals;
use advbound::harness::{self, synth, AdversarySpec, ExperimentConfig, ExperimentKind, MixupTarget, OUTPUT_ENV};
use advbound::learner::{train, TrainConfig};
use advbound::transport::{all_ordered_pairs, w1_phi};
use advbound::{Adversary, Kernel, LabeledDataset};

#[derive(Parser)]
#[command(name = "advbound", version, about = "Budgeted adversaries and hardness certificates for proper-loss learners")]
struct Cli {
    /// Output directory (defaults to $ADVBOUND_OUT, then ./out).
    #[arg(long, global = true, env = OUTPUT_ENV)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Defeat certificates for a dataset and an adversary.
    Certify(CertifyArgs),
    /// Optimal transport between two marginals.
    Transport(TransportArgs),
    /// Build an adversary and write it as JSON.
    #[command(subcommand)]
    Adversary(AdversaryCommand),
    /// Train a linear proper-loss model.
    Train(TrainArgs),
    /// Run an experiment sweep.
    #[command(subcommand)]
    Experiment(ExperimentCommand),
    /// Write the synthetic two-class digits dataset.
    SynthDigits {
        #[arg(long, default_value_t = synth::BUNDLED_SEED)]
        seed: u64,
        #[arg(long, default_value_t = synth::PER_CLASS)]
        per_class: usize,
        /// Destination CSV.
        #[arg(long)]
        to: PathBuf,
    },
}

#[derive(Args)]
struct ConfigArg {
    /// JSON experiment config; flags override its top-level fields.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct CertifyArgs {
    #[command(flatten)]
    config: ConfigArg,
    #[arg(long)]
    data: Option<PathBuf>,
    /// Adversary JSON file (identity when absent).
    #[arg(long)]
    adversary: Option<PathBuf>,
    /// Kernel: linear, affine, rbf, rbf:<bandwidth>.
    #[arg(long)]
    kernel: Option<String>,
    /// Loss name; repeat for a loss set.
    #[arg(long = "loss")]
    losses: Vec<String>,
    #[arg(long)]
    link: Option<String>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Seed for the sampled unit-ball cross-check.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct TransportArgs {
    #[command(flatten)]
    config: ConfigArg,
    /// First marginal (JSON or CSV).
    #[arg(long)]
    p: Option<PathBuf>,
    /// Second marginal (JSON or CSV).
    #[arg(long)]
    n: Option<PathBuf>,
    /// euclidean | l1 | sq_euclidean | feature:<kernel>
    #[arg(long)]
    cost: Option<String>,
    /// Include the coupling triples in the output.
    #[arg(long)]
    coupling: bool,
}

#[derive(Subcommand)]
enum AdversaryCommand {
    /// x ↦ λx + (1−λ)x*.
    Mixup {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        lambda: f64,
        /// `mean` or a comma-separated point.
        #[arg(long, default_value = "mean")]
        target: String,
        #[arg(long)]
        to: Option<PathBuf>,
    },
    /// Fit a Monge perturbation table under an L1 budget.
    Monge {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, conflicts_with = "alpha_frac")]
        alpha: Option<f64>,
        /// Budget as a fraction of the L1 distance between class means.
        #[arg(long)]
        alpha_frac: Option<f64>,
        #[arg(long, default_value = "w2_squared")]
        objective: String,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 2000)]
        evaluations: usize,
        /// Table fitted at a smaller budget to start from.
        #[arg(long)]
        start: Option<PathBuf>,
        #[arg(long)]
        to: Option<PathBuf>,
    },
    /// Iterate the contraction x ↦ (1−η)x + η·E X until it is δ-Monge efficient in feature space.
    Boost {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        eta: f64,
        #[arg(long)]
        delta: f64,
        #[arg(long, default_value = "linear")]
        kernel: String,
        #[arg(long)]
        to: Option<PathBuf>,
    },
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "log")]
    loss: String,
    #[arg(long, default_value = "canonical")]
    link: String,
    #[arg(long)]
    step: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    l2: Option<f64>,
    #[arg(long)]
    max_norm: Option<f64>,
    /// Fixed step: no halving on a rejected step.
    #[arg(long)]
    no_backoff: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    to: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    config: ConfigArg,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    /// Comma-separated sweep grid.
    #[arg(long)]
    grid: Option<String>,
}

#[derive(Subcommand)]
enum ExperimentCommand {
    /// Discretised Gaussians with a mixup-to-mean adversary.
    Toy1d {
        #[command(flatten)]
        sweep: SweepArgs,
        #[arg(long)]
        bins: Option<usize>,
    },
    /// Monge adversaries on a two-class dataset.
    Digits {
        #[command(flatten)]
        sweep: SweepArgs,
        /// Two-class CSV (defaults to the bundled synthetic digits).
        #[arg(long)]
        data: Option<PathBuf>,
    },
}

fn load_config(arg: &ConfigArg, kind: ExperimentKind) -> anyhow::Result<ExperimentConfig> {
    let cfg = match &arg.config {
        Some(path) => {
            let cfg = ExperimentConfig::from_json_file(path).with_context(|| format!("reading config {}", path.display()))?;
            if cfg.experiment != kind {
                bail!(advbound::Error::InvalidInput(format!(
                    "config is for experiment {:?}, not {:?}",
                    cfg.experiment, kind
                )));
            }
            cfg
        }
        None => ExperimentConfig::new(kind),
    };
    Ok(cfg)
}

fn parse_grid(text: &str) -> anyhow::Result<Vec<f64>> {
    text.split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|e| advbound::Error::InvalidInput(format!("bad grid value '{s}': {e}")).into()))
        .collect()
}

fn out_dir(cli_out: &Option<PathBuf>) -> PathBuf {
    cli_out.clone().unwrap_or_else(harness::default_output_dir)
}

fn emit_json<T: serde::Serialize>(value: &T, to: Option<&Path>) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match to {
        Some(path) => {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent)?;
            }
            std::fs::write(path, text + "\n")?;
        }
        None => println!("{text}"),
    }
    Ok(())
}

fn print_report(report: &harness::RunReport, dir: &Path) {
    for name in &report.outputs {
        println!("{}", dir.join(name).display());
    }
    eprintln!("done in {:.2}s", report.wall_time.as_secs_f64());
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let global_out = cli.out.clone();
    match cli.command {
        Command::Certify(args) => {
            let mut cfg = load_config(&args.config, ExperimentKind::Certify)?;
            if let Some(d) = args.data {
                cfg.dataset = Some(d);
            }
            if let Some(path) = args.adversary {
                cfg.adversary = Some(AdversarySpec::File { path });
            }
            if args.kernel.is_some() {
                cfg.kernel = args.kernel;
            }
            match args.losses.len() {
                0 => {}
                1 => cfg.loss = args.losses[0].clone(),
                _ => cfg.losses = args.losses,
            }
            if let Some(l) = args.link {
                cfg.link = l;
            }
            if let Some(e) = args.epsilon {
                cfg.epsilon = e;
            }
            if args.seed.is_some() {
                cfg.seed = args.seed;
            }
            if global_out.is_some() || cfg.output.is_none() {
                cfg.output = Some(out_dir(&global_out));
            }
            let report = harness::run_certify(&cfg)?;
            for c in &report.certificates {
                println!("{}: beta = {:.6}, bound = {:.6}, defeated = {}", c.loss, c.beta, c.bound, c.verdict);
            }
            if let Some(j) = &report.joint {
                println!("joint: gamma0 = {:.6}, threshold = {:.6}, defeated = {}", j.gamma0, j.threshold, j.verdict);
            }
            print_report(&report, &cfg.output_dir());
        }
        Command::Transport(args) => {
            let mut cfg = load_config(&args.config, ExperimentKind::Transport)?;
            if args.p.is_some() {
                cfg.p = args.p;
            }
            if args.n.is_some() {
                cfg.n = args.n;
            }
            if let Some(c) = args.cost {
                cfg.cost = c;
            }
            cfg.emit_coupling |= args.coupling;
            if global_out.is_some() || cfg.output.is_none() {
                cfg.output = Some(out_dir(&global_out));
            }
            let report = harness::run_transport(&cfg)?;
            emit_json(report.transport.as_ref().expect("transport result"), None)?;
        }
        Command::Adversary(cmd) => run_adversary(cmd)?,
        Command::Train(args) => {
            let ds = LabeledDataset::from_csv(&args.data)?;
            let mut cfg = TrainConfig {
                loss: args.loss,
                link: args.link,
                max_norm: args.max_norm,
                backoff: !args.no_backoff,
                seed: args.seed,
                ..TrainConfig::default()
            };
            if let Some(s) = args.step {
                cfg.step = s;
            }
            if let Some(m) = args.max_iter {
                cfg.max_iter = m;
            }
            if let Some(t) = args.tol {
                cfg.tol = t;
            }
            if let Some(l) = args.l2 {
                cfg.l2 = l;
            }
            let (model, report) = train(&ds, &cfg)?;
            let doc = serde_json::json!({
                "weights": model.weights,
                "bias": model.bias,
                "loss": cfg.loss,
                "link": cfg.link,
                "train_report": report,
            });
            emit_json(&doc, args.to.as_deref())?;
        }
        Command::Experiment(cmd) => {
            let (mut cfg, sweep) = match cmd {
                ExperimentCommand::Toy1d { sweep, bins } => {
                    let mut cfg = load_config(&sweep.config, ExperimentKind::Toy1d)?;
                    if let Some(b) = bins {
                        cfg.bins = b;
                    }
                    (cfg, sweep)
                }
                ExperimentCommand::Digits { sweep, data } => {
                    let mut cfg = load_config(&sweep.config, ExperimentKind::Digits)?;
                    if let Some(d) = data {
                        cfg.dataset = Some(d);
                    }
                    if cfg.dataset.is_none() {
                        cfg.dataset = Some(synth::bundled_path());
                    }
                    (cfg, sweep)
                }
            };
            if sweep.seed.is_some() {
                cfg.seed = sweep.seed;
            }
            if sweep.workers.is_some() {
                cfg.workers = sweep.workers;
            }
            if let Some(g) = sweep.grid {
                cfg.grid = parse_grid(&g)?;
            }
            if global_out.is_some() || cfg.output.is_none() {
                cfg.output = Some(out_dir(&global_out));
            }
            let report = harness::run(&cfg)?;
            print_report(&report, &cfg.output_dir());
        }
        Command::SynthDigits { seed, per_class, to } => {
            synth::synthetic_digits(seed, per_class)?.to_csv(&to)?;
            println!("{}", to.display());
        }
    }
    Ok(())
}

fn run_adversary(cmd: AdversaryCommand) -> anyhow::Result<()> {
    match cmd {
        AdversaryCommand::Mixup { data, lambda, target, to } => {
            let ds = LabeledDataset::from_csv(&data)?;
            let (p, n, pi) = split_marginals(&ds)?;
            let target = if target.trim() == "mean" {
                MixupTarget::Named("mean".into())
            } else {
                MixupTarget::Point(parse_grid(&target)?)
            };
            let a = AdversarySpec::Mixup { lambda, target }.build(&p, &n, pi)?;
            emit_json(&a, to.as_deref())?;
        }
        AdversaryCommand::Monge {
            data,
            alpha,
            alpha_frac,
            objective,
            seed,
            evaluations,
            start,
            to,
        } => {
            let ds = LabeledDataset::from_csv(&data)?;
            let (p, n, _) = split_marginals(&ds)?;
            let alpha = match (alpha, alpha_frac) {
                (Some(a), None) => a,
                (None, Some(f)) => f * p.mean().iter().zip(n.mean()).map(|(a, b)| (a - b).abs()).sum::<f64>(),
                _ => bail!(advbound::Error::InvalidInput("give exactly one of --alpha and --alpha-frac".into())),
            };
            let start: Option<Adversary> = match start {
                Some(path) => Some(serde_json::from_str(&std::fs::read_to_string(path)?)?),
                None => None,
            };
            let mut cfg = MongeFitConfig::new(objective.parse()?, seed);
            cfg.evaluations = evaluations;
            let fit = fit_monge_adversary(&p, &n, alpha, &cfg, start.as_ref())?;
            eprintln!(
                "objective {:.6} -> {:.6} ({} accepted of {} evaluations)",
                fit.start_objective, fit.objective, fit.accepted, fit.evaluations
            );
            emit_json(&fit.adversary, to.as_deref())?;
        }
        AdversaryCommand::Boost {
            data,
            eta,
            delta,
            kernel,
            to,
        } => {
            let ds = LabeledDataset::from_csv(&data)?;
            let (p, n, pi) = split_marginals(&ds)?;
            let pooled: Vec<Vec<f64>> = p.support().iter().chain(n.support()).cloned().collect();
            let kernel = Kernel::parse_with_data(&kernel, &pooled)?;
            let base = AdversarySpec::Mixup {
                lambda: 1.0 - eta,
                target: MixupTarget::Named("mean".into()),
            }
            .build(&p, &n, pi)?;
            let est = contractivity(&base, &kernel, &all_ordered_pairs(&pooled))?;
            let w1 = w1_phi(&kernel, &p, &n)?;
            let plan = boost_iterations(est.eta_hat, w1, delta)?;
            eprintln!(
                "eta_hat {:.6}, W1_phi {:.6}, iterations {}",
                est.eta_hat, w1, plan.iterations
            );
            let a = iterate(&base, plan.iterations.max(1))?;
            emit_json(&a, to.as_deref())?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            let numeric = err.chain().any(|e| e.downcast_ref::<advbound::Error>().is_some_and(advbound::Error::is_numeric));
            ExitCode::from(if numeric { 3 } else { 2 })
        }
    }
}
