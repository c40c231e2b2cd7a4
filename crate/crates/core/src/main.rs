use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use scalplus::bonus::BonusVariant;
use scalplus::continuous::{choose_num_intervals, horizon_warning, HolderEnv};
use scalplus::harness::config::{Algorithm, EnvKind, ExperimentConfig};
use scalplus::harness::env::{parse_pins, RewardKind, SmoothEnv, PIN_CELLS};
use scalplus::harness::experiment::{self, SweepParam};
use scalplus::mdp::{self, DiscreteMdp};
use scalplus::scopt::{self, ScOptConfig};
use scalplus::Result;

#[derive(Parser)]
#[command(
    name = "scalplus",
    version,
    about = "Span-constrained planning and regret experiments for average-reward MDPs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimal gain, bias and bias span of an MDP file.
    Solve {
        mdp: PathBuf,
        #[arg(long, default_value_t = mdp::DEFAULT_TOL)]
        tol: f64,
        #[arg(long, default_value_t = mdp::DEFAULT_MAX_ITER)]
        max_iter: usize,
    },
    /// One ScOpt call on an MDP file.
    Plan {
        mdp: PathBuf,
        /// Span cap c.
        #[arg(long)]
        span_cap: f64,
        /// Stopping accuracy.
        #[arg(long, default_value_t = 1e-6)]
        accuracy: f64,
        #[arg(long, default_value_t = 0)]
        reference_state: usize,
        #[arg(long, default_value_t = scopt::DEFAULT_MAX_ITER)]
        max_iter: usize,
    },
    /// Run an experiment described by a config file.
    Run {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
        /// Overwrite existing output files.
        #[arg(long)]
        force: bool,
    },
    /// Compute smooth-environment gains on a fine grid, in pin-file format.
    PinGain {
        /// Lipschitz constants to compute.
        #[arg(long = "holder-l", value_delimiter = ',', required = true)]
        lipschitz: Vec<f64>,
        #[arg(long, default_value_t = PIN_CELLS)]
        cells: usize,
        /// Merge into this pin file instead of printing.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Repeat an experiment over a grid of span caps or confidence levels.
    Sweep {
        config: PathBuf,
        #[arg(long, value_enum)]
        param: SweepParam,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long)]
        force: bool,
    },
}

/// Command-line overrides, one per config key.
#[derive(Args, Default)]
struct Overrides {
    #[arg(long, value_enum)]
    env: Option<EnvKind>,
    #[arg(long)]
    env_states: Option<usize>,
    #[arg(long)]
    env_actions: Option<usize>,
    #[arg(long)]
    env_gamma: Option<usize>,
    #[arg(long)]
    env_seed: Option<u64>,
    #[arg(long)]
    env_file: Option<PathBuf>,
    #[arg(long, value_parser = parse_reward)]
    env_reward: Option<RewardKind>,
    #[arg(long = "holder-l")]
    holder_l: Option<f64>,
    #[arg(long)]
    holder_alpha: Option<f64>,
    #[arg(long, value_enum)]
    algorithm: Option<Algorithm>,
    #[arg(long)]
    span_cap: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long, value_parser = parse_bonus)]
    bonus: Option<BonusVariant>,
    #[arg(long)]
    bonus_capped: Option<bool>,
    #[arg(long)]
    reference_state: Option<usize>,
    #[arg(long)]
    num_intervals: Option<usize>,
    #[arg(long)]
    horizon: Option<u64>,
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    checkpoint_stride: Option<u64>,
    #[arg(long)]
    verbose: Option<bool>,
}

fn parse_reward(s: &str) -> std::result::Result<RewardKind, String> {
    match s {
        "bernoulli" => Ok(RewardKind::Bernoulli),
        "deterministic" => Ok(RewardKind::Deterministic),
        _ => Err(format!("unknown reward kind {s}")),
    }
}

fn parse_bonus(s: &str) -> std::result::Result<BonusVariant, String> {
    match s {
        "hoeffding" => Ok(BonusVariant::Hoeffding),
        "bernstein-reward" => Ok(BonusVariant::BernsteinReward),
        _ => Err(format!("unknown bonus variant {s}")),
    }
}

impl Overrides {
    fn apply(self, cfg: &mut ExperimentConfig) {
        macro_rules! set {
            ($($field:ident),*) => {
                $(if let Some(v) = self.$field { cfg.$field = v; })*
            };
        }
        set!(
            env,
            env_states,
            env_actions,
            env_seed,
            env_reward,
            holder_l,
            holder_alpha,
            algorithm,
            span_cap,
            delta,
            bonus,
            bonus_capped,
            reference_state,
            horizon,
            seeds,
            checkpoint_stride,
            verbose
        );
        if self.env_gamma.is_some() {
            cfg.env_gamma = self.env_gamma;
        }
        if self.env_file.is_some() {
            cfg.env_file = self.env_file;
        }
        if self.num_intervals.is_some() {
            cfg.num_intervals = self.num_intervals;
        }
        if self.output.is_some() {
            cfg.output = self.output;
        }
    }
}

fn load_config(path: &PathBuf, overrides: Overrides) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(path)?;
    overrides.apply(&mut cfg);
    cfg.validate()?;
    if cfg.algorithm == Algorithm::CScalPlus {
        if let Ok(env) = SmoothEnv::unpinned(cfg.holder_l, cfg.holder_alpha) {
            if let Some(w) = horizon_warning(cfg.horizon, HolderEnv::num_actions(&env), env.holder()) {
                eprintln!("warning: {w}");
            }
            let s = cfg
                .num_intervals
                .unwrap_or_else(|| choose_num_intervals(cfg.horizon, 2, cfg.holder_l, cfg.holder_alpha));
            eprintln!("using {s} intervals");
        }
    }
    Ok(cfg)
}

fn print_summary(rows: &[experiment::SeedSummary]) {
    println!("seed,T,final_regret,episodes,mean_planning_iterations");
    for r in rows {
        println!(
            "{},{},{},{},{}",
            r.seed, r.horizon, r.final_regret, r.episodes, r.mean_planning_iterations
        );
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Solve {
            mdp: path,
            tol,
            max_iter,
        } => {
            let m = DiscreteMdp::load(&path)?;
            let sol = mdp::solve_gain_bias(&m, tol, max_iter)?;
            println!("gain {}", sol.gain);
            println!("span {}", sol.span);
            let bias: Vec<String> = sol.bias.iter().map(f64::to_string).collect();
            println!("bias {}", bias.join(" "));
        }
        Command::Plan {
            mdp: path,
            span_cap,
            accuracy,
            reference_state,
            max_iter,
        } => {
            let m = DiscreteMdp::load(&path)?;
            let cfg = ScOptConfig {
                reference_state,
                max_iter,
                ..ScOptConfig::new(span_cap, accuracy)
            };
            print!("{}", scopt::scopt(&m, &cfg)?.to_record());
        }
        Command::Run {
            config,
            overrides,
            force,
        } => {
            let cfg = load_config(&config, overrides)?;
            let rows = experiment::run_experiment(&cfg, force)?;
            print_summary(&rows);
            eprintln!("wrote {}", cfg.output_dir().display());
        }
        Command::PinGain {
            lipschitz,
            cells,
            output,
        } => {
            let mut pins = match &output {
                Some(p) if p.exists() => parse_pins(&std::fs::read_to_string(p)?),
                _ => Vec::new(),
            };
            for l in lipschitz {
                let gain = SmoothEnv::unpinned(l, 1.0)?.fine_grid_gain(cells)?;
                pins.retain(|&(x, _)| x != l);
                pins.push((l, gain));
            }
            pins.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut text = format!(
                "# Optimal gain of the smooth environment per Lipschitz constant L,\n# computed on a {cells}-cell grid. Regenerate with `scalplus pin-gain`.\n"
            );
            for (l, g) in pins {
                text.push_str(&format!("{l} {g}\n"));
            }
            match output {
                Some(p) => std::fs::write(p, text)?,
                None => print!("{text}"),
            }
        }
        Command::Sweep {
            config,
            param,
            values,
            overrides,
            force,
        } => {
            let cfg = load_config(&config, overrides)?;
            for (value, rows) in experiment::sweep(&cfg, param, &values, force)? {
                println!("# {param:?} = {value}");
                print_summary(&rows);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
