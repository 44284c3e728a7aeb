//! Rate-distortion and block-error-rate sweeps with CSV output.
//!
//! Every point `(n, parameter)` gets its own seed derived from the run seed,
//! so rows do not depend on which other points are in the sweep. Points run
//! concurrently; rows are written in point order.

use rayon::prelude::*;

use crate::channel_codec::{build_channel_code_guarded, ChannelCode};
use crate::construction::NestedConstruction;
use crate::dmc::{Dmc, JointSource};
use crate::error::{Error, Result};
use crate::harness::config::{ExperimentConfig, Mode};
use crate::harness::load_construction;
use crate::harness::oracle::{capacity, hamming, rate_distortion};
use crate::harness::spec::{parse_channel, parse_input_distribution, parse_source, parse_test_channel};
use crate::lossy_codec::{build_source_code_guarded, SourceCode};
use crate::rng::{derive_seed, streams};

pub const RD_SCHEMA: &str = "# schema nested-polar/sweep-rd/1";
pub const BLER_SCHEMA: &str = "# schema nested-polar/sweep-bler/1";
pub const TRANSMIT_SCHEMA: &str = "# schema nested-polar/transmit/1";

pub const RD_COLUMNS: [&str; 11] = [
    "n",
    "N",
    "test_channel",
    "rate",
    "distortion",
    "d1_proxy",
    "oracle_rate",
    "target_distortion",
    "target_rate",
    "blocks",
    "trials",
];
pub const TRANSMIT_COLUMNS: [&str; 8] = ["n", "N", "gross_rate", "side_rate", "net_rate", "bler", "p1_proxy", "trials"];
pub const BLER_EXTRA_COLUMNS: [&str; 3] = ["channel", "px", "capacity"];

/// 12 significant digits.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.11e}")
}

/// Seed of point `(n, parameter index)`.
pub fn point_seed(seed: u64, n: u32, param: usize) -> u64 {
    derive_seed(derive_seed(seed, n as u64), param as u64)
}

/// `p_XU` from a source spec and a forward test-channel spec.
pub fn source_problem(source: &str, test_channel: &str) -> Result<JointSource> {
    let p_x = parse_source(source)?;
    let (test, group) = parse_test_channel(test_channel)?;
    JointSource::from_test_channel(&p_x, &test, group).map_err(|e| Error::Config(format!("{test_channel}: {e}")))
}

/// Channel and input law.
pub fn channel_problem(channel: &str, px: &str) -> Result<(Dmc, Vec<f64>)> {
    let w = parse_channel(channel)?;
    let p_x = parse_input_distribution(px, &w)?;
    Ok((w, p_x))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RdRecord {
    pub n: u32,
    pub test_channel: String,
    pub rate: f64,
    pub distortion: f64,
    pub d1_proxy: f64,
    /// `R(distortion)` from the oracle.
    pub oracle_rate: f64,
    /// `E d(X, U)` under the test channel.
    pub target_distortion: f64,
    /// `I(X; U)` under the test channel.
    pub target_rate: f64,
    pub blocks: usize,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlerRecord {
    pub n: u32,
    pub gross_rate: f64,
    pub side_rate: f64,
    pub net_rate: f64,
    pub bler: f64,
    pub p1_proxy: f64,
    /// Simulated blocks.
    pub trials: usize,
    pub channel: String,
    pub px: String,
    pub capacity: f64,
}

fn load_for(path: &std::path::Path, n: u32) -> Result<NestedConstruction> {
    let c = load_construction(path)?;
    if c.n() != n {
        return Err(Error::Config(format!("{} holds a construction for n = {}, not {n}", path.display(), c.n())));
    }
    Ok(c)
}

fn source_code_for(cfg: &ExperimentConfig, joint: &JointSource, n: u32, seed: u64) -> Result<SourceCode> {
    match (&cfg.construction, cfg.mode) {
        (Some(path), Mode::Quantize) => SourceCode::from_construction(load_for(path, n)?, joint.clone(), seed),
        _ => build_source_code_guarded(joint, n, cfg.beta, cfg.trials, cfg.guard_sigmas, seed),
    }
}

fn channel_code_for(cfg: &ExperimentConfig, w: &Dmc, p_x: &[f64], n: u32, seed: u64) -> Result<ChannelCode> {
    match (&cfg.construction, cfg.mode) {
        (Some(path), Mode::Transmit) => {
            let mut c = load_for(path, n)?;
            if let Some(cap) = cfg.rate_cap {
                c.apply_rate_cap(cap)?;
            }
            ChannelCode::from_construction(c, w.clone(), p_x.to_vec(), seed)
        }
        _ => build_channel_code_guarded(p_x, w, n, cfg.beta, cfg.trials, cfg.guard_sigmas, seed, cfg.rate_cap),
    }
}

/// One source point: build, quantize `blocks` blocks, compare with the oracle.
pub fn rd_point(cfg: &ExperimentConfig, n: u32, param: usize) -> Result<RdRecord> {
    let spec = &cfg.test_channels[param];
    let joint = source_problem(&cfg.source, spec)?;
    let seed = point_seed(cfg.seed, n, param);
    let code = source_code_for(cfg, &joint, n, seed)?;
    let blocks: Vec<Vec<usize>> = (0..cfg.blocks).map(|b| code.sample_source(derive_seed(seed, b as u64))).collect();
    let diag = code.diagnostics(&blocks, derive_seed(seed, streams::SAMPLING))?;
    let q = joint.u_group().order();
    let dist = hamming(joint.x_size(), q);
    let p_x = joint.p_x();
    Ok(RdRecord {
        n: code.construction().n(),
        test_channel: spec.clone(),
        rate: code.rate(),
        distortion: diag.d_avg,
        d1_proxy: diag.d1_proxy,
        oracle_rate: rate_distortion(&p_x, &dist, diag.d_avg)?,
        target_distortion: joint.expected_distortion(&dist),
        target_rate: joint.mutual_information(),
        blocks: cfg.blocks,
        trials: cfg.trials,
    })
}

/// One channel point: build, transmit `blocks` random messages.
pub fn bler_point(cfg: &ExperimentConfig, n: u32, param: usize) -> Result<BlerRecord> {
    let spec = &cfg.channels[param];
    let (w, p_x) = channel_problem(spec, &cfg.px)?;
    let seed = point_seed(cfg.seed, n, param);
    let code = channel_code_for(cfg, &w, &p_x, n, seed)?;
    let diag = code.diagnostics(cfg.blocks, derive_seed(seed, streams::SAMPLING))?;
    let rates = code.rates();
    Ok(BlerRecord {
        n: code.construction().n(),
        gross_rate: rates.rate,
        side_rate: rates.side.value() + 0.0,
        net_rate: rates.net_rate(),
        bler: diag.bler,
        p1_proxy: diag.p1_proxy,
        trials: cfg.blocks,
        channel: spec.clone(),
        px: cfg.px.clone(),
        capacity: capacity(&w.to_matrix())?.capacity,
    })
}

fn points(cfg: &ExperimentConfig, params: usize) -> Vec<(u32, usize)> {
    cfg.n.iter().flat_map(|&n| (0..params).map(move |p| (n, p))).collect()
}

pub fn run_rd_records(cfg: &ExperimentConfig) -> Result<Vec<RdRecord>> {
    points(cfg, cfg.test_channels.len()).into_par_iter().map(|(n, p)| rd_point(cfg, n, p)).collect()
}

pub fn run_bler_records(cfg: &ExperimentConfig) -> Result<Vec<BlerRecord>> {
    points(cfg, cfg.channels.len()).into_par_iter().map(|(n, p)| bler_point(cfg, n, p)).collect()
}

fn csv_text(schema: &str, header: &[&str], rows: Vec<Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(&r).map_err(io)?;
    }
    let body = w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    Ok(format!("{schema}\n{}", String::from_utf8(body).expect("csv output is utf-8")))
}

pub fn rd_csv(records: &[RdRecord]) -> Result<String> {
    let rows = records
        .iter()
        .map(|r| {
            vec![
                r.n.to_string(),
                (1usize << r.n).to_string(),
                r.test_channel.clone(),
                fmt_float(r.rate),
                fmt_float(r.distortion),
                fmt_float(r.d1_proxy),
                fmt_float(r.oracle_rate),
                fmt_float(r.target_distortion),
                fmt_float(r.target_rate),
                r.blocks.to_string(),
                r.trials.to_string(),
            ]
        })
        .collect();
    csv_text(RD_SCHEMA, &RD_COLUMNS, rows)
}

/// `extended` adds the channel, input law and capacity columns.
pub fn bler_csv(records: &[BlerRecord], extended: bool) -> Result<String> {
    let mut header: Vec<&str> = TRANSMIT_COLUMNS.to_vec();
    if extended {
        header.extend(BLER_EXTRA_COLUMNS);
    }
    let rows = records
        .iter()
        .map(|r| {
            let mut row = vec![
                r.n.to_string(),
                (1usize << r.n).to_string(),
                fmt_float(r.gross_rate),
                fmt_float(r.side_rate),
                fmt_float(r.net_rate),
                fmt_float(r.bler),
                fmt_float(r.p1_proxy),
                r.trials.to_string(),
            ];
            if extended {
                row.extend([r.channel.clone(), r.px.clone(), fmt_float(r.capacity)]);
            }
            row
        })
        .collect();
    csv_text(if extended { BLER_SCHEMA } else { TRANSMIT_SCHEMA }, &header, rows)
}

/// CSV for `quantize` and `sweep-rd`.
pub fn run_rd_sweep(cfg: &ExperimentConfig) -> Result<String> {
    rd_csv(&run_rd_records(cfg)?)
}

/// CSV for `transmit` (fixed columns) and `sweep-bler` (with oracle columns).
pub fn run_bler_sweep(cfg: &ExperimentConfig) -> Result<String> {
    bler_csv(&run_bler_records(cfg)?, cfg.mode != Mode::Transmit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::PartialConfig;

    fn cfg(mode: Mode) -> ExperimentConfig {
        let p = PartialConfig {
            n: Some(vec![2, 3]),
            trials: Some(200),
            blocks: Some(5),
            seed: Some(9),
            test_channel: Some(vec!["bsc:0.11".into(), "qsc:2,0.2".into()]),
            channel: Some(vec!["bsc:0.05".into()]),
            ..Default::default()
        };
        ExperimentConfig::resolve(mode, p, None).unwrap()
    }

    #[test]
    fn rd_sweep_is_deterministic_and_well_formed() {
        let c = cfg(Mode::SweepRd);
        let a = run_rd_sweep(&c).unwrap();
        assert_eq!(a, run_rd_sweep(&c).unwrap());
        let lines: Vec<&str> = a.lines().collect();
        assert_eq!(lines[0], RD_SCHEMA);
        assert_eq!(lines[1], RD_COLUMNS.join(","));
        assert_eq!(lines.len(), 2 + 4);
        assert!(lines[4].starts_with("3,8,bsc:0.11,"));
        assert!(lines[3].contains("\"qsc:2,0.2\""));
    }

    #[test]
    fn points_do_not_depend_on_the_rest_of_the_sweep() {
        let full = run_rd_records(&cfg(Mode::SweepRd)).unwrap();
        let mut one = cfg(Mode::SweepRd);
        one.n = vec![3];
        assert_eq!(run_rd_records(&one).unwrap()[0], full[2]);
    }

    #[test]
    fn transmit_columns() {
        let c = cfg(Mode::Transmit);
        let text = run_bler_sweep(&c).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[1], "n,N,gross_rate,side_rate,net_rate,bler,p1_proxy,trials");
        assert_eq!(lines.len(), 4);
        let ext = run_bler_sweep(&cfg(Mode::SweepBler)).unwrap();
        assert!(ext.lines().nth(1).unwrap().ends_with(",channel,px,capacity"));
    }

    #[test]
    fn oracle_columns() {
        let r = rd_point(&cfg(Mode::SweepRd), 3, 0).unwrap();
        assert!((r.target_distortion - 0.11).abs() < 1e-12);
        assert!((r.target_rate - (1.0 - crate::dmc::h2(0.11))).abs() < 1e-12);
        assert!((r.oracle_rate - rate_distortion(&[0.5, 0.5], &hamming(2, 2), r.distortion).unwrap()).abs() == 0.0);
        assert_eq!(fmt_float(0.5), "5.00000000000e-1");
    }

    #[test]
    fn bad_specs_name_the_token() {
        let mut c = cfg(Mode::SweepRd);
        c.test_channels = vec!["bsc:nope".into()];
        let e = run_rd_sweep(&c).unwrap_err();
        assert!(e.to_string().contains("bsc:nope"));
    }
}
