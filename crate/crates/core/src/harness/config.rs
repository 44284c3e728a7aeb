//! Experiment configuration: built-in defaults, then a TOML file, then
//! command-line flags. `NPOLAR_SEED` supplies the seed when neither sets one.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Deserialize;

use crate::construction::{check_beta, DEFAULT_BETA, DEFAULT_GUARD_SIGMAS, DEFAULT_TRIALS};
use crate::error::{Error, Result};

pub const SEED_ENV: &str = "NPOLAR_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Quantize,
    Transmit,
    Construct,
    SweepRd,
    SweepBler,
    Verify,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Quantize => "quantize",
            Mode::Transmit => "transmit",
            Mode::Construct => "construct",
            Mode::SweepRd => "sweep-rd",
            Mode::SweepBler => "sweep-bler",
            Mode::Verify => "verify",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Mode::Quantize, Mode::Transmit, Mode::Construct, Mode::SweepRd, Mode::SweepBler, Mode::Verify]
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown mode: '{s}'")))
    }
}

/// Every field optional; one layer of settings.
#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct PartialConfig {
    pub source: Option<String>,
    pub test_channel: Option<Vec<String>>,
    pub channel: Option<Vec<String>>,
    pub px: Option<String>,
    pub n: Option<Vec<u32>>,
    pub beta: Option<f64>,
    pub trials: Option<usize>,
    pub blocks: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub rate_cap: Option<f64>,
    pub guard_sigmas: Option<f64>,
    pub construction: Option<PathBuf>,
}

impl PartialConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Fields set in `over` win.
    pub fn merge(self, over: PartialConfig) -> PartialConfig {
        PartialConfig {
            source: over.source.or(self.source),
            test_channel: over.test_channel.or(self.test_channel),
            channel: over.channel.or(self.channel),
            px: over.px.or(self.px),
            n: over.n.or(self.n),
            beta: over.beta.or(self.beta),
            trials: over.trials.or(self.trials),
            blocks: over.blocks.or(self.blocks),
            seed: over.seed.or(self.seed),
            out: over.out.or(self.out),
            rate_cap: over.rate_cap.or(self.rate_cap),
            guard_sigmas: over.guard_sigmas.or(self.guard_sigmas),
            construction: over.construction.or(self.construction),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub source: String,
    pub test_channels: Vec<String>,
    pub channels: Vec<String>,
    pub px: String,
    pub n: Vec<u32>,
    pub beta: f64,
    pub trials: usize,
    pub blocks: usize,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub rate_cap: Option<f64>,
    pub guard_sigmas: f64,
    /// Construction file written by `construct`, or read by the codecs.
    pub construction: Option<PathBuf>,
}

/// Seed used by `verify` when none is configured.
pub const VERIFY_SEED: u64 = 2024;

impl ExperimentConfig {
    /// Apply defaults and validate. `env_seed` is the value of
    /// [`SEED_ENV`], if set.
    pub fn resolve(mode: Mode, p: PartialConfig, env_seed: Option<&str>) -> Result<Self> {
        let env_seed = env_seed
            .map(|s| s.trim().parse::<u64>().map_err(|_| Error::Config(format!("invalid {SEED_ENV}: '{s}'"))))
            .transpose()?;
        let seed = match (p.seed.or(env_seed), mode) {
            (Some(s), _) => s,
            (None, Mode::Verify) => VERIFY_SEED,
            (None, _) => {
                return Err(Error::Config(format!("a seed is required: pass --seed or set {SEED_ENV}")));
            }
        };
        let default_n = if mode == Mode::SweepRd || mode == Mode::SweepBler { vec![8, 10, 12] } else { vec![10] };
        let cfg = ExperimentConfig {
            mode,
            source: p.source.unwrap_or_else(|| "bss:0.5".into()),
            test_channels: p.test_channel.unwrap_or_else(|| vec!["bsc:0.11".into()]),
            channels: p.channel.unwrap_or_else(|| vec!["bsc:0.11".into()]),
            px: p.px.unwrap_or_else(|| "uniform".into()),
            n: p.n.unwrap_or(default_n),
            beta: p.beta.unwrap_or(DEFAULT_BETA),
            trials: p.trials.unwrap_or(DEFAULT_TRIALS),
            blocks: p.blocks.unwrap_or(100),
            seed,
            out: p.out,
            rate_cap: p.rate_cap,
            guard_sigmas: p.guard_sigmas.unwrap_or(DEFAULT_GUARD_SIGMAS),
            construction: p.construction,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n.is_empty() {
            return bad("at least one n is required".into());
        }
        if let Some(&n) = self.n.iter().find(|&&n| !(1..=24).contains(&n)) {
            return bad(format!("n must be in 1..=24, got {n}"));
        }
        check_beta(self.beta).map_err(|e| Error::Config(e.to_string()))?;
        if self.trials == 0 || self.blocks == 0 {
            return bad("trials and blocks must be positive".into());
        }
        if !(self.guard_sigmas >= 0.0) || !self.guard_sigmas.is_finite() {
            return bad(format!("guard-sigmas must be finite and nonnegative, got {}", self.guard_sigmas));
        }
        if let Some(c) = self.rate_cap {
            if !(c >= 0.0) {
                return bad(format!("rate cap must be nonnegative, got {c}"));
            }
        }
        if self.test_channels.is_empty() || self.channels.is_empty() {
            return bad("empty channel list".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layering_and_defaults() {
        let file = PartialConfig::from_toml("n = [8, 10]\nbeta = 0.3\nseed = 5\nchannel = [\"bec:0.5\"]\n").unwrap();
        let cli = PartialConfig { beta: Some(0.2), ..Default::default() };
        let cfg = ExperimentConfig::resolve(Mode::SweepBler, file.merge(cli), None).unwrap();
        assert_eq!(cfg.n, vec![8, 10]);
        assert_eq!(cfg.beta, 0.2);
        assert_eq!(cfg.seed, 5);
        assert_eq!(cfg.channels, vec!["bec:0.5".to_string()]);
        assert_eq!(cfg.trials, DEFAULT_TRIALS);
    }

    #[test]
    fn seed_sources() {
        let none = PartialConfig::default();
        assert!(ExperimentConfig::resolve(Mode::Transmit, none.clone(), None).is_err());
        assert_eq!(ExperimentConfig::resolve(Mode::Transmit, none.clone(), Some("17")).unwrap().seed, 17);
        assert!(ExperimentConfig::resolve(Mode::Transmit, none.clone(), Some("x")).is_err());
        assert_eq!(ExperimentConfig::resolve(Mode::Verify, none.clone(), None).unwrap().seed, VERIFY_SEED);
        let cli = PartialConfig { seed: Some(3), ..Default::default() };
        assert_eq!(ExperimentConfig::resolve(Mode::Transmit, cli, Some("17")).unwrap().seed, 3);
    }

    #[test]
    fn validation() {
        let with =
            |p: PartialConfig| ExperimentConfig::resolve(Mode::Quantize, PartialConfig { seed: Some(1), ..p }, None);
        assert!(with(PartialConfig { n: Some(vec![0]), ..Default::default() }).is_err());
        assert!(with(PartialConfig { n: Some(vec![]), ..Default::default() }).is_err());
        assert!(with(PartialConfig { beta: Some(0.5), ..Default::default() }).is_err());
        assert!(with(PartialConfig { blocks: Some(0), ..Default::default() }).is_err());
        assert!(with(PartialConfig { guard_sigmas: Some(-1.0), ..Default::default() }).is_err());
        assert!(PartialConfig::from_toml("unknown = 1").is_err());
        assert_eq!("sweep-rd".parse::<Mode>().unwrap(), Mode::SweepRd);
        assert!("sweep".parse::<Mode>().is_err());
    }
}
