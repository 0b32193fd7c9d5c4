//! Command-line front end. Every command writes its artifacts plus an
//! `effective_config.json` next to the main output.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::bnn::{self, BnnPosterior, ModelConfig, TrainConfig};
use crate::decompose::{self, AlConfig, DecomposeConfig, Strategy};
use crate::envs::{self, StochasticFunctionEnv};
use crate::io;
use crate::policy::{self, FrontierConfig, PolicyNet, RiskMode, RolloutConfig};
use crate::rng::derive_seed;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BnnSection {
    pub arch: Vec<usize>,
    pub lambda: f64,
    pub gamma: f64,
    pub sigma: f64,
    pub alpha: f64,
    pub mc_samples: usize,
    pub steps: usize,
    pub step_size: f64,
    pub minibatch: usize,
}

impl Default for BnnSection {
    fn default() -> Self {
        let m = ModelConfig::default();
        let t = TrainConfig::default();
        Self {
            arch: m.arch,
            lambda: m.lambda,
            gamma: m.gamma,
            sigma: m.sigma,
            alpha: t.alpha,
            mc_samples: t.mc_samples,
            steps: t.steps,
            step_size: t.step_size,
            minibatch: t.minibatch_size,
        }
    }
}

impl BnnSection {
    pub fn model(&self) -> ModelConfig {
        ModelConfig {
            arch: self.arch.clone(),
            lambda: self.lambda,
            gamma: self.gamma,
            sigma: self.sigma,
        }
    }

    pub fn train(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            alpha: self.alpha,
            mc_samples: self.mc_samples,
            step_size: self.step_size,
            steps: self.steps,
            minibatch_size: self.minibatch,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PolicySection {
    #[serde(rename = "T")]
    pub horizon: usize,
    #[serde(rename = "M")]
    pub weight_draws: usize,
    #[serde(rename = "N")]
    pub noise_draws: usize,
    pub beta: f64,
    pub risk_mode: RiskMode,
    pub train_steps: usize,
    pub step_size: f64,
    pub hidden: Vec<usize>,
    pub starts_per_step: usize,
    pub eval_starts: usize,
    pub reps_true: usize,
}

impl Default for PolicySection {
    fn default() -> Self {
        let r = RolloutConfig::default();
        let f = FrontierConfig::default();
        Self {
            horizon: r.horizon,
            weight_draws: r.weight_draws,
            noise_draws: r.noise_draws,
            beta: r.beta,
            risk_mode: r.risk_mode,
            train_steps: f.train_steps,
            step_size: f.step_size,
            hidden: f.policy_hidden,
            starts_per_step: r.starts_per_step,
            eval_starts: f.eval_starts,
            reps_true: f.reps_true,
        }
    }
}

impl PolicySection {
    pub fn rollout(&self, seed: u64) -> RolloutConfig {
        RolloutConfig {
            horizon: self.horizon,
            weight_draws: self.weight_draws,
            noise_draws: self.noise_draws,
            beta: self.beta,
            risk_mode: self.risk_mode,
            starts_per_step: self.starts_per_step,
            seed,
        }
    }

    pub fn frontier(&self, seed: u64) -> FrontierConfig {
        FrontierConfig {
            rollout: self.rollout(seed),
            policy_hidden: self.hidden.clone(),
            train_steps: self.train_steps,
            step_size: self.step_size,
            eval_starts: self.eval_starts,
            reps_true: self.reps_true,
        }
    }
}

/// Settings for the `al` command other than model, scoring and training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AlSection {
    pub init_n: usize,
    pub per_round: usize,
    pub pool_size: usize,
    pub test_size: usize,
    pub grid_points: usize,
    pub likelihood_samples: usize,
}

impl Default for AlSection {
    fn default() -> Self {
        let a = AlConfig::default();
        Self {
            init_n: a.init_n,
            per_round: a.per_round,
            pool_size: a.pool_size,
            test_size: a.test_size,
            grid_points: a.grid_points,
            likelihood_samples: a.likelihood_samples,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub bnn: BnnSection,
    pub decompose: DecomposeConfig,
    pub policy: PolicySection,
    pub al: AlSection,
    pub seed: u64,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Format {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }
}

#[derive(Debug, Parser)]
#[command(name = "latent-bnn", version, about = "BNNs with latent inputs: uncertainty decomposition and risk-sensitive policy search")]
pub struct Cli {
    /// Master seed; overrides the config file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Main output file.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a toy regression dataset.
    Gen {
        env: String,
        n: usize,
        seed: Option<u64>,
        #[arg(value_name = "OUT")]
        output: Option<PathBuf>,
    },
    /// Fit a posterior to a dataset or transition CSV.
    Train {
        data: PathBuf,
        #[arg(value_name = "OUT")]
        output: Option<PathBuf>,
    },
    /// Entropy scores on a grid `min:max:count`.
    Score {
        model: PathBuf,
        #[arg(allow_hyphen_values = true)]
        grid: String,
        #[arg(value_name = "OUT")]
        output: Option<PathBuf>,
    },
    /// Active-learning learning curve.
    Al {
        env: String,
        rounds: usize,
        #[arg(value_name = "OUT")]
        output: Option<PathBuf>,
        #[arg(long, default_value = "epistemic")]
        strategy: String,
    },
    /// Log transitions from the narrow-passage MDP under the behaviour policy.
    Collect {
        #[arg(default_value_t = 100)]
        episodes: usize,
        #[arg(value_name = "OUT")]
        output: Option<PathBuf>,
    },
    /// Train a policy on model rollouts.
    PolicyTrain {
        model: PathBuf,
        transitions: PathBuf,
        #[arg(value_name = "OUT")]
        output: Option<PathBuf>,
        #[command(flatten)]
        risk: RiskArgs,
    },
    /// Model bias of a policy against the true MDP.
    PolicyEval {
        policy: PathBuf,
        model: PathBuf,
        transitions: PathBuf,
        #[arg(value_name = "OUT")]
        output: Option<PathBuf>,
    },
    /// Train and evaluate one policy per (β, seed).
    Frontier {
        model: PathBuf,
        transitions: PathBuf,
        #[arg(value_name = "OUT")]
        output: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "0,0.5,1,2,5", allow_hyphen_values = true)]
        betas: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
        seeds: Vec<u64>,
        #[arg(long)]
        risk_mode: Option<String>,
    },
}

#[derive(Debug, Args)]
pub struct RiskArgs {
    #[arg(long)]
    pub risk_mode: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub train_steps: Option<usize>,
}

#[derive(Serialize)]
struct Effective<'a, A: Serialize> {
    command: &'a str,
    args: A,
    config: &'a RunConfig,
}

fn write_effective<A: Serialize>(out: &Path, command: &str, args: A, config: &RunConfig) -> Result<()> {
    let dir = out.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let doc = Effective { command, args, config };
    fs::write(dir.join("effective_config.json"), serde_json::to_string_pretty(&doc)? + "\n")?;
    Ok(())
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map_or("out".into(), |s| s.to_string_lossy().into_owned());
    path.with_file_name(format!("{stem}_{suffix}.csv"))
}

fn parse_grid(spec: &str) -> Result<Vec<Vec<f64>>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || Error::invalid(format!("grid must be min:max:count, got '{spec}'"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
    if n == 0 {
        return Err(Error::invalid("empty grid"));
    }
    if !(lo.is_finite() && hi.is_finite()) || lo > hi {
        return Err(bad());
    }
    if n == 1 {
        return Ok(vec![vec![lo]]);
    }
    Ok((0..n)
        .map(|i| vec![lo + (hi - lo) * i as f64 / (n - 1) as f64])
        .collect())
}

fn load_training_data(path: &Path) -> Result<bnn::Dataset> {
    let table = io::Table::read(path)?;
    if io::is_transition_header(&table.header) {
        io::read_transitions(path)?.to_dataset()
    } else {
        io::read_dataset(path)
    }
}

fn or_default(out: Option<PathBuf>, global: &Option<PathBuf>, default: &str) -> PathBuf {
    out.or_else(|| global.clone()).unwrap_or_else(|| PathBuf::from(default))
}

/// Parse `args` (including the program name) and run the command.
pub fn run<I, T>(args: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| match e.kind() {
        clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
            let _ = e.print();
            Error::Help
        }
        _ => Error::Usage(e.to_string()),
    })?;
    let mut config = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        config.seed = s;
    }
    let seed = config.seed;
    let mdp = envs::narrow_passage_mdp();

    match cli.command {
        Command::Gen { env, n, seed: pos_seed, output: out } => {
            let env = StochasticFunctionEnv::by_name(&env)?;
            let seed = pos_seed.unwrap_or(seed);
            config.seed = seed;
            let out = or_default(out, &cli.out, "data.csv");
            let data = envs::make_dataset(&env, n, seed)?;
            io::write_dataset(&data, &out)?;
            write_effective(&out, "gen", (env.name(), n), &config)?;
        }
        Command::Train { data, output: out } => {
            let out = or_default(out, &cli.out, "model.json");
            let data = load_training_data(&data)?;
            let init = BnnPosterior::for_dataset(&config.bnn.model(), &data, derive_seed(seed, &[0]))?;
            let fit = bnn::train(&init, &data, &config.bnn.train(derive_seed(seed, &[1])))?;
            io::save_model(&fit.posterior, &out)?;
            io::trace_table("energy", &fit.energy_trace).write(&sibling(&out, "energy"))?;
            write_effective(&out, "train", (), &config)?;
        }
        Command::Score { model, grid, output: out } => {
            let out = or_default(out, &cli.out, "scores.csv");
            let post = io::load_model(&model)?;
            let grid = parse_grid(&grid)?;
            let dcfg = DecomposeConfig {
                seed,
                ..config.decompose.clone()
            };
            let scores = decompose::score_candidates(&post, &grid, &dcfg)?;
            io::scores_table(&scores).write(&out)?;
            write_effective(&out, "score", grid.len(), &config)?;
        }
        Command::Al { env, rounds, output: out, strategy } => {
            let env = StochasticFunctionEnv::by_name(&env)?;
            let strategy: Strategy = strategy.parse()?;
            let out = or_default(out, &cli.out, "al.csv");
            let a = &config.al;
            let acfg = AlConfig {
                init_n: a.init_n,
                rounds,
                per_round: a.per_round,
                pool_size: a.pool_size,
                test_size: a.test_size,
                grid_points: a.grid_points,
                likelihood_samples: a.likelihood_samples,
                strategy,
                seed,
                model: config.bnn.model(),
                decompose: config.decompose.clone(),
                train: config.bnn.train(0),
            };
            let records = decompose::al_loop(&env, &acfg)?;
            io::al_table(&records).write(&out)?;
            write_effective(&out, "al", (env.name(), rounds, strategy), &config)?;
        }
        Command::Collect { episodes, output: out } => {
            let out = or_default(out, &cli.out, "transitions.csv");
            let batch = envs::collect_batch(&mdp, episodes, seed)?;
            io::write_transitions(&batch, &out)?;
            write_effective(&out, "collect", episodes, &config)?;
        }
        Command::PolicyTrain { model, transitions, output: out, risk } => {
            let out = or_default(out, &cli.out, "policy.json");
            if let Some(m) = &risk.risk_mode {
                config.policy.risk_mode = m.parse()?;
            }
            if let Some(b) = risk.beta {
                config.policy.beta = b;
            }
            if let Some(s) = risk.train_steps {
                config.policy.train_steps = s;
            }
            let post = io::load_model(&model)?;
            let starts = io::read_transitions(&transitions)?.starts();
            let p = &config.policy;
            let init = PolicyNet::new(
                mdp.state_dim(),
                &p.hidden,
                vec![mdp.action_low],
                vec![mdp.action_high],
                derive_seed(seed, &[0]),
            )?;
            let trained = policy::train_policy(
                &post,
                &mdp,
                &init,
                &starts,
                &p.rollout(seed),
                p.train_steps,
                p.step_size,
                derive_seed(seed, &[1]),
            )?;
            io::save_policy(&trained.policy, &out)?;
            io::trace_table("objective", &trained.objective_trace).write(&sibling(&out, "objective"))?;
            write_effective(&out, "policy-train", (), &config)?;
        }
        Command::PolicyEval { policy: pol, model, transitions, output: out } => {
            let out = or_default(out, &cli.out, "bias.json");
            let pol = io::load_policy(&pol)?;
            let post = io::load_model(&model)?;
            let starts = io::read_transitions(&transitions)?.starts();
            let p = &config.policy;
            let pool = policy::pick_starts(&starts, p.eval_starts.max(1), seed);
            let report = policy::evaluate_model_bias(&pol, &post, &mdp, &pool, p.reps_true, &p.rollout(seed), seed)?;
            fs::write(&out, serde_json::to_string_pretty(&report)? + "\n")?;
            write_effective(&out, "policy-eval", (), &config)?;
        }
        Command::Frontier { model, transitions, output: out, betas, seeds, risk_mode } => {
            let out = or_default(out, &cli.out, "frontier.csv");
            if let Some(m) = &risk_mode {
                config.policy.risk_mode = m.parse()?;
            }
            let post = io::load_model(&model)?;
            let starts = io::read_transitions(&transitions)?.starts();
            let records = policy::frontier(
                &post,
                &mdp,
                &starts,
                &betas,
                config.policy.risk_mode,
                &seeds,
                &config.policy.frontier(seed),
            )?;
            io::frontier_table(&records).write(&out)?;
            write_effective(&out, "frontier", (&betas, &seeds), &config)?;
        }
    }
    Ok(())
}

/// Entry point for the binary: one `error: <kind>: <message>` line on
/// failure.
pub fn main() -> ExitCode {
    match run(std::env::args_os()) {
        Ok(()) | Err(Error::Help) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace(['\n', '\r'], " ");
            eprintln!("error: {}: {}", e.kind(), msg.trim());
            ExitCode::FAILURE
        }
    }
}
