use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use nested_polar::channel_codec::build_channel_code_guarded;
use nested_polar::harness::config::SEED_ENV;
use nested_polar::harness::sweep::{channel_problem, point_seed, source_problem};
use nested_polar::harness::verify::verify_filtered;
use nested_polar::harness::{
    run_bler_sweep, run_rd_sweep, save_construction, ExperimentConfig, Fault, Mode, PartialConfig,
};
use nested_polar::lossy_codec::build_source_code_guarded;

#[derive(Parser)]
#[command(name = "npolar", version, about = "Nested polar codes for lossy compression and channel coding")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Quantize source blocks and report rate and distortion.
    Quantize(Common),
    /// Transmit random messages and report the block error rate.
    Transmit(Common),
    /// Build a construction and write it to a file.
    Construct {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = CodeKind::Source)]
        code: CodeKind,
    },
    /// Rate-distortion sweep over n and test channels.
    SweepRd(Common),
    /// Block-error-rate sweep over n and channels.
    SweepBler(Common),
    /// Run the invariant suite; exits nonzero when a check fails.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Corrupt an internal table to confirm the suite catches it.
        #[arg(long)]
        inject_fault: Option<String>,
        /// Run only checks whose `module.name` contains this text.
        #[arg(long)]
        only: Option<String>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum CodeKind {
    Source,
    Channel,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// TOML file with defaults for any of the flags below.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Source law: bss:p or dms:p0,p1,...
    #[arg(long)]
    source: Option<String>,
    /// Forward test channel p(u|x); repeat for several sweep points.
    #[arg(long)]
    test_channel: Vec<String>,
    /// Physical channel: bsc:p, bec:eps, z:p, qsc:q,p[@GROUP], table:PATH[@GROUP]; repeatable.
    #[arg(long)]
    channel: Vec<String>,
    /// Channel input law: uniform, capacity or dist:p0,p1,...
    #[arg(long)]
    px: Option<String>,
    /// Block length exponents, comma separated.
    #[arg(long, value_delimiter = ',')]
    n: Vec<u32>,
    #[arg(long)]
    beta: Option<f64>,
    /// Monte Carlo trials per construction estimate.
    #[arg(long)]
    trials: Option<usize>,
    /// Simulated blocks per point.
    #[arg(long)]
    blocks: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Cap on the net rate of channel codes.
    #[arg(long)]
    rate_cap: Option<f64>,
    /// Standard errors added to estimates before thresholding.
    #[arg(long)]
    guard_sigmas: Option<f64>,
    /// Construction file to use instead of building one.
    #[arg(long)]
    construction: Option<PathBuf>,
}

impl Common {
    fn resolve(&self, mode: Mode) -> anyhow::Result<ExperimentConfig> {
        let base = match &self.config {
            Some(path) => PartialConfig::from_file(path)?,
            None => PartialConfig::default(),
        };
        let some_vec = |v: &Vec<String>| (!v.is_empty()).then(|| v.clone());
        let flags = PartialConfig {
            source: self.source.clone(),
            test_channel: some_vec(&self.test_channel),
            channel: some_vec(&self.channel),
            px: self.px.clone(),
            n: (!self.n.is_empty()).then(|| self.n.clone()),
            beta: self.beta,
            trials: self.trials,
            blocks: self.blocks,
            seed: self.seed,
            out: self.out.clone(),
            rate_cap: self.rate_cap,
            guard_sigmas: self.guard_sigmas,
            construction: self.construction.clone(),
        };
        let env_seed = std::env::var(SEED_ENV).ok();
        Ok(ExperimentConfig::resolve(mode, base.merge(flags), env_seed.as_deref())?)
    }
}

fn emit(cfg: &ExperimentConfig, text: &str) -> anyhow::Result<()> {
    match &cfg.out {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn construct(cfg: &ExperimentConfig, kind: CodeKind) -> anyhow::Result<()> {
    if cfg.n.len() != 1 {
        bail!("construct takes a single n");
    }
    let n = cfg.n[0];
    let seed = point_seed(cfg.seed, n, 0);
    let c = match kind {
        CodeKind::Source => {
            let joint = source_problem(&cfg.source, &cfg.test_channels[0])?;
            build_source_code_guarded(&joint, n, cfg.beta, cfg.trials, cfg.guard_sigmas, seed)?.construction().clone()
        }
        CodeKind::Channel => {
            let (w, p_x) = channel_problem(&cfg.channels[0], &cfg.px)?;
            build_channel_code_guarded(&p_x, &w, n, cfg.beta, cfg.trials, cfg.guard_sigmas, seed, cfg.rate_cap)?
                .construction()
                .clone()
        }
    };
    let report = nested_polar::construction::code_rate(&c);
    log::info!("rate {:.6} side {:.6} reassigned {}", report.rate, report.side.value(), c.reassigned());
    match cfg.construction.as_ref().or(cfg.out.as_ref()) {
        Some(path) => save_construction(path, &c).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{}", c.to_text());
            Ok(())
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Quantize(c) => {
            let cfg = c.resolve(Mode::Quantize)?;
            emit(&cfg, &run_rd_sweep(&cfg)?)?
        }
        Command::SweepRd(c) => {
            let cfg = c.resolve(Mode::SweepRd)?;
            emit(&cfg, &run_rd_sweep(&cfg)?)?
        }
        Command::Transmit(c) => {
            let cfg = c.resolve(Mode::Transmit)?;
            emit(&cfg, &run_bler_sweep(&cfg)?)?
        }
        Command::SweepBler(c) => {
            let cfg = c.resolve(Mode::SweepBler)?;
            emit(&cfg, &run_bler_sweep(&cfg)?)?
        }
        Command::Construct { common, code } => construct(&common.resolve(Mode::Construct)?, code)?,
        Command::Verify { common, inject_fault, only } => {
            let cfg = common.resolve(Mode::Verify)?;
            let fault = inject_fault.map(|f| f.parse::<Fault>()).transpose()?;
            let report = verify_filtered(cfg.seed, fault, only.as_deref());
            emit(&cfg, &report.to_string())?;
            if !report.all_passed() {
                return Ok(ExitCode::from(2));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
