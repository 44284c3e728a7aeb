//! Spec strings for groups, channels, sources and input distributions.
//!
//! Channels: `bsc:p`, `bec:eps`, `z:p`, `qsc:q,p`, `table:PATH`. `qsc` and
//! `table` take an optional `@GROUP` suffix (`qsc:4,0.1@Z2xZ2`); the default
//! group is cyclic. Sources: `bss:p` (Bernoulli) and `dms:p0,p1,...`. Input
//! distributions: `uniform`, `capacity`, `dist:p0,p1,...`.

use std::path::Path;

use crate::dmc::{Dmc, StochasticMatrix};
use crate::error::{Error, Result};
use crate::group::FiniteAbelianGroup;
use crate::harness::oracle;

fn config_err(token: &str, what: &str) -> Error {
    Error::Config(format!("{what}: '{token}'"))
}

pub fn parse_group(token: &str) -> Result<FiniteAbelianGroup> {
    token.trim().parse().map_err(|_| config_err(token, "invalid group"))
}

fn parse_prob(token: &str, full: &str) -> Result<f64> {
    let p: f64 = token.trim().parse().map_err(|_| config_err(full, "invalid number"))?;
    if !(0.0..=1.0).contains(&p) {
        return Err(config_err(full, "probability outside [0, 1]"));
    }
    Ok(p)
}

fn parse_list(body: &str, full: &str) -> Result<Vec<f64>> {
    let v: Vec<f64> = body.split(',').map(|t| parse_prob(t, full)).collect::<Result<_>>()?;
    let total: f64 = v.iter().sum();
    if v.is_empty() || (total - 1.0).abs() > 1e-9 {
        return Err(config_err(full, "distribution must sum to 1"));
    }
    Ok(v)
}

fn split_group(body: &str) -> Result<(&str, Option<FiniteAbelianGroup>)> {
    match body.rsplit_once('@') {
        Some((b, g)) => Ok((b, Some(parse_group(g)?))),
        None => Ok((body, None)),
    }
}

fn read_table(path: &str, full: &str) -> Result<StochasticMatrix> {
    let text = std::fs::read_to_string(Path::new(path)).map_err(|e| Error::Config(format!("{full}: {e}")))?;
    StochasticMatrix::parse(&text).map_err(|e| Error::Config(format!("{full}: {e}")))
}

/// A row-stochastic matrix named by a channel spec, with the group that
/// labels its rows (`channel`) or its columns (`test`).
fn parse_matrix(spec: &str, label_cols: bool) -> Result<(StochasticMatrix, FiniteAbelianGroup)> {
    let (kind, body) = spec.split_once(':').ok_or_else(|| config_err(spec, "expected KIND:PARAMS"))?;
    let to_pair = |d: Dmc| (d.to_matrix(), d.group().clone());
    match kind.trim() {
        "bsc" => Ok(to_pair(Dmc::bsc(parse_prob(body, spec)?)?)),
        "bec" => Ok(to_pair(Dmc::bec(parse_prob(body, spec)?)?)),
        "z" => Ok(to_pair(Dmc::z_channel(parse_prob(body, spec)?)?)),
        "qsc" => {
            let (body, group) = split_group(body)?;
            let (q, p) = body.split_once(',').ok_or_else(|| config_err(spec, "expected qsc:q,p"))?;
            let q: usize = q.trim().parse().map_err(|_| config_err(spec, "invalid alphabet size"))?;
            if q < 2 {
                return Err(config_err(spec, "alphabet size must be at least 2"));
            }
            let group = match group {
                Some(g) if g.order() != q => return Err(config_err(spec, "group order differs from q")),
                Some(g) => g,
                None => FiniteAbelianGroup::cyclic(q)?,
            };
            Ok(to_pair(Dmc::qsc(group, parse_prob(p, spec)?)?))
        }
        "table" => {
            let (path, group) = split_group(body)?;
            let m = read_table(path, spec)?;
            let size = if label_cols { m.cols() } else { m.rows() };
            let group = match group {
                Some(g) => g,
                None => FiniteAbelianGroup::cyclic(size).map_err(|_| config_err(spec, "empty table"))?,
            };
            if group.order() != size {
                return Err(config_err(spec, "group order differs from the table"));
            }
            Ok((m, group))
        }
        _ => Err(config_err(spec, "unknown channel kind")),
    }
}

/// Physical channel; inputs are labelled by the group.
pub fn parse_channel(spec: &str) -> Result<Dmc> {
    let (m, group) = parse_matrix(spec, false)?;
    Dmc::from_matrix(group, m)
}

/// Forward test channel `p_{U|X}`; outputs are labelled by the group.
pub fn parse_test_channel(spec: &str) -> Result<(StochasticMatrix, FiniteAbelianGroup)> {
    parse_matrix(spec, true)
}

/// Source law `p_X`.
pub fn parse_source(spec: &str) -> Result<Vec<f64>> {
    let (kind, body) = spec.split_once(':').ok_or_else(|| config_err(spec, "expected KIND:PARAMS"))?;
    match kind.trim() {
        "bss" => {
            let p = parse_prob(body, spec)?;
            Ok(vec![1.0 - p, p])
        }
        "dms" => parse_list(body, spec),
        _ => Err(config_err(spec, "unknown source kind")),
    }
}

/// Channel input law for `w`.
pub fn parse_input_distribution(spec: &str, w: &Dmc) -> Result<Vec<f64>> {
    let q = w.input_size();
    let p = match spec.trim() {
        "uniform" => vec![1.0 / q as f64; q],
        "capacity" => oracle::capacity(&w.to_matrix())?.input,
        other => match other.split_once(':') {
            Some(("dist", body)) => parse_list(body, spec)?,
            _ => return Err(config_err(spec, "expected uniform, capacity or dist:...")),
        },
    };
    if p.len() != q {
        return Err(Error::AlphabetMismatch { expected: q, found: p.len() });
    }
    Ok(p)
}
