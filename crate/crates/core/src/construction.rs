//! Code construction: per-index synthesized-channel parameters, the
//! subgroup-indexed partitions and their nesting, and rate accounting.
//!
//! Cells are labelled `(H, K)` with `H` taken from the A partition and `K`
//! from the B partition. In source mode A is built from `W_c` with threshold
//! `delta` and B from `W_s` with threshold `1 - delta`; in channel mode A is
//! built from `W_s` with `1 - delta` and B from `W_c` with `delta`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use log::warn;
use rand::Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::dmc::Dmc;
use crate::error::{Error, Result};
use crate::group::{Element, FiniteAbelianGroup, Subgroup};
use crate::polar::{LikelihoodTable, ScEngine, TransformSpec};
use crate::rng::{substream, RowSampler};

pub const DEFAULT_BETA: f64 = 0.25;
pub const DEFAULT_TRIALS: usize = 10_000;
/// Standard errors added to each estimate before a threshold comparison.
pub const DEFAULT_GUARD_SIGMAS: f64 = 3.0;
/// Bound on the table size of any channel in the exact recursion.
pub const EXACT_TABLE_BOUND: usize = 1 << 26;
const TRIAL_CHUNK: usize = 32;
const SKIP_WARN_FRACTION: f64 = 0.01;

/// `delta_N = 2^{-N^beta}`.
pub fn delta(n: u32, beta: f64) -> f64 {
    let nn = (1u64 << n) as f64;
    (-(nn.powf(beta))).exp2()
}

pub fn check_beta(beta: f64) -> Result<()> {
    if beta > 0.0 && beta < 0.5 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("beta must lie in (0, 0.5), got {beta}")))
    }
}

/// Per-index estimates of `Z_d(W_N^{(i)})` and `I(W_N^{(i)})`.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthChannelParams {
    group: FiniteAbelianGroup,
    n: u32,
    /// `[i * q + d]`; entry `d = 0` is 1.
    z: Vec<f64>,
    z_stderr: Vec<f64>,
    capacity: Vec<f64>,
    trials: usize,
    seed: u64,
    skipped: usize,
    exact: bool,
}

impl SynthChannelParams {
    pub fn group(&self) -> &FiniteAbelianGroup {
        &self.group
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn len(&self) -> usize {
        1 << self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn trials(&self) -> usize {
        self.trials
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Conditioning events with zero probability that were left out.
    pub fn skipped(&self) -> usize {
        self.skipped
    }

    pub fn is_exact(&self) -> bool {
        self.exact
    }

    pub fn z_d(&self, i: usize, d: Element) -> f64 {
        self.z[i * self.group.order() + d]
    }

    pub fn z_stderr(&self, i: usize, d: Element) -> f64 {
        self.z_stderr[i * self.group.order() + d]
    }

    /// `Z^H = sum over d not in H of Z_d`.
    pub fn z_subgroup(&self, i: usize, h: &Subgroup) -> f64 {
        let q = self.group.order();
        (0..q).filter(|&d| !h.contains(d)).map(|d| self.z[i * q + d]).sum()
    }

    /// Standard error of `Z^H`, treating the per-shift errors as independent.
    pub fn z_subgroup_stderr(&self, i: usize, h: &Subgroup) -> f64 {
        let q = self.group.order();
        (0..q).filter(|&d| !h.contains(d)).map(|d| self.z_stderr[i * q + d].powi(2)).sum::<f64>().sqrt()
    }

    pub fn capacity(&self, i: usize) -> f64 {
        self.capacity[i]
    }

    /// Average of `I(W_N^{(i)})` over the indices.
    pub fn mean_capacity(&self) -> f64 {
        self.capacity.iter().sum::<f64>() / self.capacity.len() as f64
    }
}

#[derive(Clone)]
struct Accum {
    z_sum: Vec<f64>,
    z_sq: Vec<f64>,
    cap_sum: Vec<f64>,
    count: Vec<usize>,
    skipped: usize,
}

impl Accum {
    fn new(nn: usize, q: usize) -> Self {
        Accum {
            z_sum: vec![0.0; nn * q],
            z_sq: vec![0.0; nn * q],
            cap_sum: vec![0.0; nn],
            count: vec![0; nn],
            skipped: 0,
        }
    }

    fn merge(&mut self, other: &Accum) {
        for (a, b) in self.z_sum.iter_mut().zip(&other.z_sum) {
            *a += b;
        }
        for (a, b) in self.z_sq.iter_mut().zip(&other.z_sq) {
            *a += b;
        }
        for (a, b) in self.cap_sum.iter_mut().zip(&other.cap_sum) {
            *a += b;
        }
        for (a, b) in self.count.iter_mut().zip(&other.count) {
            *a += b;
        }
        self.skipped += other.skipped;
    }
}

/// Genie-aided Monte Carlo estimate: draw uniform `v`, pass `x = vG` through
/// `W`, and average `sqrt(P(v_i + d) / P(v_i))` and `log2 q + log2 P(v_i)`
/// over the posteriors computed with the true prefix.
pub fn estimate_params(w: &Dmc, n: u32, trials: usize, seed: u64) -> Result<SynthChannelParams> {
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be at least 1".into()));
    }
    let group = w.group().clone();
    let spec = TransformSpec::new(group.clone(), n)?;
    let (nn, q) = (spec.len(), group.order());
    let sampler = RowSampler::new(w.table(), w.output_size());
    let chunks = trials.div_ceil(TRIAL_CHUNK);
    let partials: Vec<Result<Accum>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = Accum::new(nn, q);
            let mut engine = ScEngine::new(spec.clone());
            let mut v = vec![0; nn];
            let mut ys = vec![0; nn];
            let log_q = (q as f64).log2();
            for trial in c * TRIAL_CHUNK..((c + 1) * TRIAL_CHUNK).min(trials) {
                let mut rng = substream(seed, trial as u64);
                for vi in v.iter_mut() {
                    *vi = rng.gen_range(0..q);
                }
                let x = spec.transform(&v)?;
                for (y, &xj) in ys.iter_mut().zip(&x) {
                    *y = sampler.sample(xj, &mut rng);
                }
                let table = LikelihoodTable::from_outputs(w, &ys)?;
                engine.run::<Error, _>(&table, |i, post| {
                    let p = post[v[i]];
                    if p > 0.0 {
                        for d in 0..q {
                            let r = (post[group.add(v[i], d)] / p).sqrt();
                            acc.z_sum[i * q + d] += r;
                            acc.z_sq[i * q + d] += r * r;
                        }
                        acc.cap_sum[i] += log_q + p.log2();
                        acc.count[i] += 1;
                    } else {
                        acc.skipped += 1;
                    }
                    Ok(v[i])
                })?;
            }
            Ok(acc)
        })
        .collect();
    let mut total = Accum::new(nn, q);
    for p in partials {
        total.merge(&p?);
    }
    let events = trials * nn;
    if total.skipped as f64 > SKIP_WARN_FRACTION * events as f64 {
        warn!("estimation unreliable: {} of {} conditioning events had zero probability", total.skipped, events);
    }
    let mut z = vec![0.0; nn * q];
    let mut z_stderr = vec![0.0; nn * q];
    let mut capacity = vec![0.0; nn];
    for i in 0..nn {
        let m = total.count[i] as f64;
        if total.count[i] == 0 {
            // No usable sample: report the uninformative value.
            z[i * q..(i + 1) * q].fill(1.0);
            z_stderr[i * q..(i + 1) * q].fill(f64::INFINITY);
            continue;
        }
        for d in 0..q {
            let mean = total.z_sum[i * q + d] / m;
            let var =
                if total.count[i] > 1 { ((total.z_sq[i * q + d] - m * mean * mean) / (m - 1.0)).max(0.0) } else { 0.0 };
            z[i * q + d] = mean;
            z_stderr[i * q + d] = (var / m).sqrt();
        }
        capacity[i] = total.cap_sum[i] / m;
    }
    Ok(SynthChannelParams { group, n, z, z_stderr, capacity, trials, seed, skipped: total.skipped, exact: false })
}

/// Exact parameters for `n <= 3` through the recursion
/// `W_{2N}^{(2i)} = (W_N^{(i)})^-`, `W_{2N}^{(2i+1)} = (W_N^{(i)})^+`, with
/// equivalent outputs merged after every step.
pub fn exact_params(w: &Dmc, n: u32) -> Result<SynthChannelParams> {
    if n > 3 {
        return Err(Error::InvalidParameter(format!("exact parameters support n <= 3, got {n}")));
    }
    let group = w.group().clone();
    let q = group.order();
    let mut channels = vec![w.merge_equivalent_outputs()];
    for _ in 0..n {
        let mut next = Vec::with_capacity(channels.len() * 2);
        for c in &channels {
            next.push(c.minus_transform_bounded(EXACT_TABLE_BOUND)?.merge_equivalent_outputs());
            next.push(c.plus_transform_bounded(EXACT_TABLE_BOUND)?.merge_equivalent_outputs());
        }
        channels = next;
    }
    let nn = channels.len();
    let mut z = vec![0.0; nn * q];
    for (i, c) in channels.iter().enumerate() {
        for d in 0..q {
            z[i * q + d] = c.z_d(d);
        }
    }
    Ok(SynthChannelParams {
        group,
        n,
        z,
        z_stderr: vec![0.0; nn * q],
        capacity: channels.iter().map(Dmc::symmetric_capacity).collect(),
        trials: 0,
        seed: 0,
        skipped: 0,
        exact: true,
    })
}

/// Which threshold a partition applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Threshold {
    /// `Z^H < delta`: the channel resolves the coset of `H`.
    Channel,
    /// `Z^H < 1 - delta`: the channel is not useless modulo `H`.
    Source,
}

/// Assignment of every index to one subgroup of a lattice.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubgroupPartition {
    labels: Vec<usize>,
}

impl SubgroupPartition {
    pub fn from_labels(labels: Vec<usize>) -> Self {
        SubgroupPartition { labels }
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Index set of each lattice element.
    pub fn sets(&self, lattice_len: usize) -> Vec<Vec<usize>> {
        let mut sets = vec![Vec::new(); lattice_len];
        for (i, &l) in self.labels.iter().enumerate() {
            sets[l].push(i);
        }
        sets
    }
}

/// Assign each index to a minimal subgroup `H` meeting the threshold. Among
/// several minimal candidates the one with the smallest `Z^H` wins, then the
/// earliest in lattice order.
pub fn partition_by_subgroup(
    params: &SynthChannelParams,
    lattice: &[Subgroup],
    delta: f64,
    threshold: Threshold,
) -> Result<SubgroupPartition> {
    partition_by_subgroup_guarded(params, lattice, delta, threshold, 0.0)
}

/// As [`partition_by_subgroup`], but a subgroup qualifies only when
/// `Z^H + sigmas * stderr(Z^H)` is below the threshold.
pub fn partition_by_subgroup_guarded(
    params: &SynthChannelParams,
    lattice: &[Subgroup],
    delta: f64,
    threshold: Threshold,
    sigmas: f64,
) -> Result<SubgroupPartition> {
    if !(sigmas >= 0.0) {
        return Err(Error::InvalidParameter(format!("guard must be nonnegative, got {sigmas}")));
    }
    if !(delta > 0.0 && delta <= 0.5) {
        return Err(Error::InvalidParameter(format!("delta must lie in (0, 0.5], got {delta}")));
    }
    if lattice.iter().any(|h| h.parent() != params.group()) {
        return Err(Error::InvalidSubgroup("lattice belongs to a different group".into()));
    }
    let limit = match threshold {
        Threshold::Channel => delta,
        Threshold::Source => 1.0 - delta,
    };
    let whole = lattice
        .iter()
        .position(|h| h.order() == params.group().order())
        .ok_or_else(|| Error::InvalidSubgroup("lattice lacks the whole group".into()))?;
    let mut labels = Vec::with_capacity(params.len());
    let mut qualifies = vec![false; lattice.len()];
    let mut zs = vec![0.0; lattice.len()];
    for i in 0..params.len() {
        for (j, h) in lattice.iter().enumerate() {
            zs[j] = params.z_subgroup(i, h);
            let margin = if sigmas > 0.0 { sigmas * params.z_subgroup_stderr(i, h) } else { 0.0 };
            qualifies[j] = zs[j] + margin < limit;
        }
        qualifies[whole] = true;
        let mut best: Option<usize> = None;
        for (j, h) in lattice.iter().enumerate() {
            if !qualifies[j] {
                continue;
            }
            let minimal = !lattice
                .iter()
                .enumerate()
                .any(|(k, s)| k != j && qualifies[k] && s.order() < h.order() && s.is_subgroup_of(h));
            if minimal && best.is_none_or(|b| zs[j] < zs[b]) {
                best = Some(j);
            }
        }
        labels.push(best.expect("the whole group always qualifies"));
    }
    Ok(SubgroupPartition { labels })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CodeMode {
    Source,
    Channel,
}

impl fmt::Display for CodeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CodeMode::Source => "source",
            CodeMode::Channel => "channel",
        })
    }
}

impl FromStr for CodeMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "source" => Ok(CodeMode::Source),
            "channel" => Ok(CodeMode::Channel),
            _ => Err(Error::InvalidParameter(format!("unknown code mode `{s}`"))),
        }
    }
}

/// What an index carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    /// Entire value is shared randomness (`K = H = G`).
    Frozen,
    /// Carries `log2(|H| / |K|)` message bits.
    Message,
    /// No message; the part outside `K` is sampled (`K = H < G`).
    Shaping,
    /// Channel mode with `K` not inside `H`: the sampled part is sent out of band.
    SideInfo,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Frozen => "frozen",
            Role::Message => "message",
            Role::Shaping => "shaping",
            Role::SideInfo => "side-info",
        })
    }
}

impl FromStr for Role {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "frozen" => Ok(Role::Frozen),
            "message" => Ok(Role::Message),
            "shaping" => Ok(Role::Shaping),
            "side-info" => Ok(Role::SideInfo),
            _ => Err(Error::InvalidParameter(format!("unknown role `{s}`"))),
        }
    }
}

/// Effective `(H, K)` of one index, as lattice positions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cell {
    pub h: usize,
    pub k: usize,
}

/// A rate `(1/N) sum_p c_p log2 p` with integer coefficients over primes, so
/// that two rate formulas can be compared exactly.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ExactRate {
    len: usize,
    coeffs: BTreeMap<u64, i64>,
}

impl ExactRate {
    pub fn new(len: usize) -> Self {
        ExactRate { len, coeffs: BTreeMap::new() }
    }

    /// Add `count * log2(num / den)`.
    pub fn add_log_ratio(&mut self, num: usize, den: usize, count: i64) {
        for (p, e) in factorize(num as u64) {
            *self.coeffs.entry(p).or_insert(0) += count * e;
        }
        for (p, e) in factorize(den as u64) {
            *self.coeffs.entry(p).or_insert(0) -= count * e;
        }
        self.coeffs.retain(|_, c| *c != 0);
    }

    pub fn coefficients(&self) -> &BTreeMap<u64, i64> {
        &self.coeffs
    }

    /// Total bits over the block.
    pub fn bits(&self) -> f64 {
        self.coeffs.iter().map(|(&p, &c)| c as f64 * (p as f64).log2()).sum()
    }

    /// Bits per symbol.
    pub fn value(&self) -> f64 {
        self.bits() / self.len as f64
    }
}

fn factorize(mut m: u64) -> Vec<(u64, i64)> {
    let mut out = Vec::new();
    let mut p = 2;
    while p * p <= m {
        let mut e = 0;
        while m.is_multiple_of(p) {
            m /= p;
            e += 1;
        }
        if e > 0 {
            out.push((p, e));
        }
        p += 1;
    }
    if m > 1 {
        out.push((m, 1));
    }
    out
}

/// Result of [`code_rate`].
#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    /// Message bits per symbol.
    pub rate: f64,
    pub exact: ExactRate,
    /// `sum_K |B_K| log2(q/|K|) - sum_H |A_H| log2(q/|H|)`, per symbol.
    pub cross_check: ExactRate,
    /// Out-of-band bits per symbol (channel mode).
    pub side: ExactRate,
    /// Exact agreement of `exact` and `cross_check`.
    pub matches: bool,
}

impl RateReport {
    pub fn net_rate(&self) -> f64 {
        self.rate - self.side.value()
    }
}

/// Estimator provenance kept with a construction.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorMeta {
    pub method: String,
    pub seed: u64,
    pub trials: usize,
    pub skipped_a: usize,
    pub skipped_b: usize,
    /// Confidence margin used by the threshold comparisons.
    pub guard_sigmas: f64,
}

impl EstimatorMeta {
    pub fn from_params(a: &SynthChannelParams, b: &SynthChannelParams, seed: u64) -> Self {
        EstimatorMeta {
            method: if a.is_exact() && b.is_exact() { "exact" } else { "monte-carlo-genie" }.to_string(),
            seed,
            trials: a.trials().max(b.trials()),
            skipped_a: a.skipped(),
            skipped_b: b.skipped(),
            guard_sigmas: 0.0,
        }
    }
}

/// The nested partition `A_{H,K} = A_H cap B_K` with a role per index.
#[derive(Debug, Clone, PartialEq)]
pub struct NestedConstruction {
    group: FiniteAbelianGroup,
    mode: CodeMode,
    n: u32,
    beta: f64,
    delta: f64,
    lattice: Vec<Subgroup>,
    a: SubgroupPartition,
    b: SubgroupPartition,
    cells: Vec<Cell>,
    roles: Vec<Role>,
    /// `Z^K` of each index under the B-partition channel; larger is less reliable.
    scores: Vec<f64>,
    reassigned: usize,
    demoted: usize,
    meta: EstimatorMeta,
}

/// Intersect the two partitions. In source mode an index with `K` not inside
/// `H` becomes the message cell `(H v K, H ^ K)`; in channel mode it is tagged
/// side-info. Both count as reassignments.
#[allow(clippy::too_many_arguments)]
pub fn nest_partitions(
    a: SubgroupPartition,
    b: SubgroupPartition,
    mode: CodeMode,
    lattice: Vec<Subgroup>,
    n: u32,
    beta: f64,
    scores: Vec<f64>,
    meta: EstimatorMeta,
) -> Result<NestedConstruction> {
    let nn = 1usize << n;
    for len in [a.len(), b.len(), scores.len()] {
        if len != nn {
            return Err(Error::LengthMismatch { expected: nn, found: len });
        }
    }
    if a.labels.iter().chain(&b.labels).any(|&l| l >= lattice.len()) {
        return Err(Error::InvalidSubgroup("partition label outside the lattice".into()));
    }
    let group =
        lattice.first().map(|s| s.parent().clone()).ok_or_else(|| Error::InvalidSubgroup("empty lattice".into()))?;
    let mut cells = Vec::with_capacity(nn);
    let mut roles = Vec::with_capacity(nn);
    let mut reassigned = 0;
    for i in 0..nn {
        let (h, k) = (a.labels[i], b.labels[i]);
        let mut cell = Cell { h, k };
        if !lattice[k].is_subgroup_of(&lattice[h]) {
            reassigned += 1;
            if mode == CodeMode::Source {
                let join = lattice[h].join(&lattice[k]);
                let meet = lattice[h].intersection(&lattice[k]);
                cell = Cell { h: lattice_position(&lattice, &join)?, k: lattice_position(&lattice, &meet)? };
            }
        }
        roles.push(role_of(&lattice, cell, mode, &group));
        cells.push(cell);
    }
    Ok(NestedConstruction {
        group,
        mode,
        n,
        beta,
        delta: delta(n, beta),
        lattice,
        a,
        b,
        cells,
        roles,
        scores,
        reassigned,
        demoted: 0,
        meta,
    })
}

fn lattice_position(lattice: &[Subgroup], s: &Subgroup) -> Result<usize> {
    lattice
        .iter()
        .position(|t| t.elements() == s.elements())
        .ok_or_else(|| Error::InvalidSubgroup(format!("{s} missing from the lattice")))
}

fn role_of(lattice: &[Subgroup], cell: Cell, mode: CodeMode, group: &FiniteAbelianGroup) -> Role {
    let (h, k) = (&lattice[cell.h], &lattice[cell.k]);
    if !k.is_subgroup_of(h) {
        debug_assert_eq!(mode, CodeMode::Channel);
        Role::SideInfo
    } else if h.order() > k.order() {
        Role::Message
    } else if h.order() == group.order() {
        Role::Frozen
    } else {
        Role::Shaping
    }
}

/// Run the full construction from the two parameter sets. `a_params` feeds the
/// A partition and `b_params` the B partition (see the module docs).
pub fn construct(
    a_params: &SynthChannelParams,
    b_params: &SynthChannelParams,
    mode: CodeMode,
    beta: f64,
    guard_sigmas: f64,
    seed: u64,
) -> Result<NestedConstruction> {
    check_beta(beta)?;
    if a_params.n() != b_params.n() || a_params.group() != b_params.group() {
        return Err(Error::InvalidParameter("parameter sets describe different transforms".into()));
    }
    let n = a_params.n();
    let lattice = a_params.group().enumerate_subgroups()?;
    let d = delta(n, beta);
    let (ta, tb) = match mode {
        CodeMode::Source => (Threshold::Channel, Threshold::Source),
        CodeMode::Channel => (Threshold::Source, Threshold::Channel),
    };
    let a = partition_by_subgroup_guarded(a_params, &lattice, d, ta, guard_sigmas)?;
    let b = partition_by_subgroup_guarded(b_params, &lattice, d, tb, guard_sigmas)?;
    let scores = (0..b.len()).map(|i| b_params.z_subgroup(i, &lattice[b.label(i)])).collect();
    let mut meta = EstimatorMeta::from_params(a_params, b_params, seed);
    meta.guard_sigmas = guard_sigmas;
    nest_partitions(a, b, mode, lattice, n, beta, scores, meta)
}

impl NestedConstruction {
    pub fn group(&self) -> &FiniteAbelianGroup {
        &self.group
    }

    pub fn mode(&self) -> CodeMode {
        self.mode
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn len(&self) -> usize {
        1 << self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn lattice(&self) -> &[Subgroup] {
        &self.lattice
    }

    pub fn a_partition(&self) -> &SubgroupPartition {
        &self.a
    }

    pub fn b_partition(&self) -> &SubgroupPartition {
        &self.b
    }

    pub fn cell(&self, i: usize) -> Cell {
        self.cells[i]
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn role(&self, i: usize) -> Role {
        self.roles[i]
    }

    pub fn roles(&self) -> &[Role] {
        &self.roles
    }

    pub fn h(&self, i: usize) -> &Subgroup {
        &self.lattice[self.cells[i].h]
    }

    pub fn k(&self, i: usize) -> &Subgroup {
        &self.lattice[self.cells[i].k]
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn reassigned(&self) -> usize {
        self.reassigned
    }

    pub fn demoted(&self) -> usize {
        self.demoted
    }

    pub fn meta(&self) -> &EstimatorMeta {
        &self.meta
    }

    /// Index sets of the nested cells.
    pub fn cell_sets(&self) -> BTreeMap<Cell, Vec<usize>> {
        let mut out: BTreeMap<Cell, Vec<usize>> = BTreeMap::new();
        for (i, &c) in self.cells.iter().enumerate() {
            out.entry(c).or_default().push(i);
        }
        out
    }

    /// `|A_H| / N` for each lattice element.
    pub fn a_fractions(&self) -> Vec<f64> {
        fractions(&self.a, self.lattice.len())
    }

    /// `|B_H| / N` for each lattice element.
    pub fn b_fractions(&self) -> Vec<f64> {
        fractions(&self.b, self.lattice.len())
    }

    /// Radix of the message digit at `i` (1 when the index carries none).
    pub fn message_radix(&self, i: usize) -> usize {
        match self.roles[i] {
            Role::Message => self.h(i).order() / self.k(i).order(),
            _ => 1,
        }
    }

    /// Radix of the side-information digit at `i` (1 when none).
    pub fn side_radix(&self, i: usize) -> usize {
        match self.roles[i] {
            Role::SideInfo => self.group.order() / self.h(i).order(),
            _ => 1,
        }
    }

    pub fn message_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.roles[i] == Role::Message).collect()
    }

    pub fn side_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.roles[i] == Role::SideInfo).collect()
    }

    /// Demote message cells `(H, K)` to `(H, H)`, least reliable first, until
    /// the net rate is at most `cap`.
    pub fn apply_rate_cap(&mut self, cap: f64) -> Result<()> {
        if !(cap >= 0.0) {
            return Err(Error::InvalidParameter(format!("rate cap must be nonnegative, got {cap}")));
        }
        let mut order = self.message_indices();
        order.sort_by(|&x, &y| self.scores[y].total_cmp(&self.scores[x]).then(x.cmp(&y)));
        let mut report = code_rate(self);
        for i in order {
            if report.net_rate() <= cap + 1e-12 {
                break;
            }
            let h = self.cells[i].h;
            self.cells[i] = Cell { h, k: h };
            self.roles[i] = role_of(&self.lattice, self.cells[i], self.mode, &self.group);
            self.demoted += 1;
            report = code_rate(self);
        }
        Ok(())
    }

    /// Fraction of indices that are neither frozen nor `(G, {0})` message cells.
    pub fn intermediate_fraction(&self) -> f64 {
        let q = self.group.order();
        let count = (0..self.len())
            .filter(|&i| {
                let (h, k) = (self.h(i).order(), self.k(i).order());
                !((h == q && k == q) || (h == q && k == 1))
            })
            .count();
        count as f64 / self.len() as f64
    }

    /// Canonical text form; see [`from_text`](Self::from_text).
    pub fn to_text(&self) -> String {
        use std::fmt::Write;
        let mut s = String::new();
        let _ = writeln!(s, "{FORMAT_MAGIC} {FORMAT_VERSION}");
        let _ = writeln!(s, "group {}", self.group);
        let _ = writeln!(s, "mode {}", self.mode);
        let _ = writeln!(s, "n {}", self.n);
        let _ = writeln!(s, "beta {:?}", self.beta);
        let _ = writeln!(s, "delta {:?}", self.delta);
        let _ = writeln!(s, "lattice {}", self.lattice.len());
        let _ = writeln!(s, "estimator {}", self.meta.method);
        let _ = writeln!(s, "seed {}", self.meta.seed);
        let _ = writeln!(s, "trials {}", self.meta.trials);
        let _ = writeln!(s, "skipped {} {}", self.meta.skipped_a, self.meta.skipped_b);
        let _ = writeln!(s, "guard {:?}", self.meta.guard_sigmas);
        let _ = writeln!(s, "reassigned {}", self.reassigned);
        let _ = writeln!(s, "demoted {}", self.demoted);
        let _ = writeln!(s, "# index a b h k role score");
        for i in 0..self.len() {
            let c = self.cells[i];
            let _ = writeln!(
                s,
                "{i} {} {} {} {} {} {:?}",
                self.a.labels[i], self.b.labels[i], c.h, c.k, self.roles[i], self.scores[i]
            );
        }
        s.push_str("end\n");
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let corrupt = |m: &str| Error::CorruptFile(m.to_string());
        let mut lines = text.lines().filter(|l| !l.starts_with('#'));
        let header = lines.next().ok_or_else(|| corrupt("empty file"))?;
        let mut hp = header.split_whitespace();
        if hp.next() != Some(FORMAT_MAGIC) {
            return Err(corrupt("not a construction file"));
        }
        let version: u32 = hp.next().and_then(|v| v.parse().ok()).ok_or_else(|| corrupt("missing version"))?;
        if version != FORMAT_VERSION {
            return Err(Error::VersionMismatch { found: version, expected: FORMAT_VERSION });
        }
        let mut field = |name: &str| -> Result<String> {
            let line = lines.next().ok_or_else(|| corrupt(&format!("missing `{name}`")))?;
            match line.split_once(' ') {
                Some((k, v)) if k == name => Ok(v.to_string()),
                _ => Err(corrupt(&format!("expected `{name}`, found `{line}`"))),
            }
        };
        fn num<T: FromStr>(s: &str, what: &str) -> Result<T> {
            s.trim().parse().map_err(|_| Error::CorruptFile(format!("bad {what} `{s}`")))
        }
        let group: FiniteAbelianGroup = field("group")?.parse()?;
        let mode: CodeMode = field("mode")?.parse()?;
        let n: u32 = num(&field("n")?, "n")?;
        let beta: f64 = num(&field("beta")?, "beta")?;
        let delta_v: f64 = num(&field("delta")?, "delta")?;
        let lattice_len: usize = num(&field("lattice")?, "lattice size")?;
        let method = field("estimator")?;
        let seed: u64 = num(&field("seed")?, "seed")?;
        let trials: usize = num(&field("trials")?, "trials")?;
        let skipped = field("skipped")?;
        let (sa, sb) = skipped.split_once(' ').ok_or_else(|| corrupt("bad skipped counts"))?;
        let guard_sigmas: f64 = num(&field("guard")?, "guard")?;
        let reassigned: usize = num(&field("reassigned")?, "reassigned")?;
        let demoted: usize = num(&field("demoted")?, "demoted")?;
        if n > 24 {
            return Err(corrupt("n out of range"));
        }
        let lattice = group.enumerate_subgroups()?;
        if lattice.len() != lattice_len {
            return Err(corrupt("subgroup lattice does not match the group"));
        }
        let nn = 1usize << n;
        let (mut a, mut b, mut cells, mut roles, mut scores) = (
            Vec::with_capacity(nn),
            Vec::with_capacity(nn),
            Vec::with_capacity(nn),
            Vec::with_capacity(nn),
            Vec::with_capacity(nn),
        );
        for i in 0..nn {
            let line = lines.next().ok_or_else(|| corrupt("truncated index table"))?;
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 7 || parts[0] != i.to_string() {
                return Err(corrupt(&format!("bad index line `{line}`")));
            }
            let labels: Vec<usize> = parts[1..5].iter().map(|p| num(p, "label")).collect::<Result<_>>()?;
            if labels.iter().any(|&l| l >= lattice.len()) {
                return Err(corrupt("label outside the lattice"));
            }
            a.push(labels[0]);
            b.push(labels[1]);
            cells.push(Cell { h: labels[2], k: labels[3] });
            roles.push(parts[5].parse::<Role>().map_err(|_| corrupt("bad role"))?);
            scores.push(num::<f64>(parts[6], "score")?);
        }
        if lines.next() != Some("end") {
            return Err(corrupt("missing end marker"));
        }
        let c = NestedConstruction {
            mode,
            n,
            beta,
            delta: delta_v,
            a: SubgroupPartition { labels: a },
            b: SubgroupPartition { labels: b },
            cells,
            roles,
            scores,
            reassigned,
            demoted,
            meta: EstimatorMeta {
                method,
                seed,
                trials,
                skipped_a: num(sa, "skipped")?,
                skipped_b: num(sb, "skipped")?,
                guard_sigmas,
            },
            lattice,
            group,
        };
        for i in 0..nn {
            if role_of(&c.lattice, c.cells[i], c.mode, &c.group) != c.roles[i] {
                return Err(corrupt(&format!("role of index {i} contradicts its cell")));
            }
        }
        Ok(c)
    }

    /// SHA-256 of the canonical text form.
    pub fn hash(&self) -> [u8; 32] {
        Sha256::digest(self.to_text().as_bytes()).into()
    }
}

pub const FORMAT_MAGIC: &str = "nested-polar-construction";
pub const FORMAT_VERSION: u32 = 1;

fn fractions(p: &SubgroupPartition, len: usize) -> Vec<f64> {
    let mut out = vec![0.0; len];
    for &l in &p.labels {
        out[l] += 1.0;
    }
    let nn = p.labels.len() as f64;
    out.iter_mut().for_each(|x| *x /= nn);
    out
}

/// Message rate `sum_{K <= H} |A_{H,K}|/N log2(|H|/|K|)` and its cross-check.
pub fn code_rate(c: &NestedConstruction) -> RateReport {
    let nn = c.len();
    let q = c.group.order();
    let mut exact = ExactRate::new(nn);
    let mut side = ExactRate::new(nn);
    for i in 0..nn {
        match c.roles[i] {
            Role::Message => exact.add_log_ratio(c.h(i).order(), c.k(i).order(), 1),
            Role::SideInfo => side.add_log_ratio(q, c.h(i).order(), 1),
            _ => {}
        }
    }
    let mut cross = ExactRate::new(nn);
    for i in 0..nn {
        cross.add_log_ratio(q, c.lattice[c.b.labels[i]].order(), 1);
        cross.add_log_ratio(q, c.lattice[c.a.labels[i]].order(), -1);
    }
    RateReport { rate: exact.value(), matches: exact == cross, exact, cross_check: cross, side }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dmc::{channel_test_channels, source_test_channels, JointSource};

    fn z2() -> FiniteAbelianGroup {
        FiniteAbelianGroup::cyclic(2).unwrap()
    }

    #[test]
    fn delta_values() {
        assert!((delta(12, 0.25) - 2f64.powf(-8.0)).abs() < 1e-15);
        assert!((delta(8, 0.25) - 0.0625).abs() < 1e-15);
        assert!(check_beta(0.5).is_err() && check_beta(0.0).is_err() && check_beta(0.25).is_ok());
    }

    #[test]
    fn identity_and_useless_estimates() {
        let g = FiniteAbelianGroup::cyclic(4).unwrap();
        let p = estimate_params(&Dmc::identity(g.clone()), 3, 50, 1).unwrap();
        for i in 0..8 {
            assert_eq!(p.z_d(i, 0), 1.0);
            for d in 1..4 {
                assert_eq!(p.z_d(i, d), 0.0);
            }
            assert!((p.capacity(i) - 2.0).abs() < 1e-12);
        }
        let u = estimate_params(&Dmc::useless(g, &[0.1, 0.2, 0.3, 0.4]).unwrap(), 3, 50, 1).unwrap();
        for i in 0..8 {
            for d in 0..4 {
                assert!((u.z_d(i, d) - 1.0).abs() < 1e-12);
            }
            assert!(u.capacity(i).abs() < 1e-12);
        }
    }

    #[test]
    fn bec_estimates_within_three_sigma_of_exact() {
        let w = Dmc::bec(0.5).unwrap();
        let exact = exact_params(&w, 2).unwrap();
        let expected = [0.9375, 0.5625, 0.4375, 0.0625];
        for (i, e) in expected.iter().enumerate() {
            assert!((exact.z_d(i, 1) - e).abs() < 1e-12);
        }
        let est = estimate_params(&w, 2, 10_000, 5).unwrap();
        for (i, e) in expected.iter().enumerate() {
            let s = est.z_stderr(i, 1);
            assert!((est.z_d(i, 1) - e).abs() <= 3.0 * s + 1e-12, "index {i}: {} vs {e}", est.z_d(i, 1));
        }
    }

    #[test]
    fn exact_params_agree_with_synthesized_tables() {
        let mut rng = substream(11, 0);
        let g = FiniteAbelianGroup::cyclic(3).unwrap();
        let w = Dmc::random(g.clone(), 2, &mut rng);
        let p = exact_params(&w, 2).unwrap();
        let synth = crate::polar::synthesize_exact(&w, 2).unwrap();
        for (i, s) in synth.iter().enumerate() {
            for d in 0..3 {
                assert!((p.z_d(i, d) - s.z_d(d)).abs() < 1e-12);
            }
            assert!((p.capacity(i) - s.symmetric_capacity()).abs() < 1e-12);
        }
    }

    #[test]
    fn estimation_is_deterministic() {
        let w = Dmc::bsc(0.1).unwrap();
        let a = estimate_params(&w, 4, 100, 9).unwrap();
        let b = estimate_params(&w, 4, 100, 9).unwrap();
        assert_eq!(a, b);
        let c = estimate_params(&w, 4, 100, 10).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn partition_extremes() {
        let g = FiniteAbelianGroup::cyclic(4).unwrap();
        let lattice = g.enumerate_subgroups().unwrap();
        let id = estimate_params(&Dmc::identity(g.clone()), 2, 10, 0).unwrap();
        let part = partition_by_subgroup(&id, &lattice, 0.1, Threshold::Channel).unwrap();
        assert!(part.labels().iter().all(|&l| lattice[l].order() == 1));
        let useless = estimate_params(&Dmc::useless(g.clone(), &[0.25; 4]).unwrap(), 2, 10, 0).unwrap();
        let part = partition_by_subgroup(&useless, &lattice, 0.1, Threshold::Source).unwrap();
        assert!(part.labels().iter().all(|&l| lattice[l].order() == 4));
        assert!(partition_by_subgroup(&id, &lattice, 0.6, Threshold::Channel).is_err());
    }

    #[test]
    fn partition_resolves_intermediate_subgroup() {
        // Output reveals x mod 2 only.
        let g = FiniteAbelianGroup::cyclic(4).unwrap();
        let lattice = g.enumerate_subgroups().unwrap();
        let w = Dmc::new(g.clone(), 2, vec![1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0]).unwrap();
        let p = exact_params(&w, 1).unwrap();
        let part = partition_by_subgroup(&p, &lattice, 0.1, Threshold::Channel).unwrap();
        for &l in part.labels() {
            assert_eq!(lattice[l].elements(), &[0, 2]);
        }
    }

    #[test]
    fn equal_partitions_give_diagonal_cells() {
        let g = FiniteAbelianGroup::cyclic(4).unwrap();
        let lattice = g.enumerate_subgroups().unwrap();
        let labels: Vec<usize> = (0..8).map(|i| i % lattice.len()).collect();
        let p = SubgroupPartition::from_labels(labels.clone());
        let meta =
            EstimatorMeta { method: "exact".into(), seed: 0, trials: 0, skipped_a: 0, skipped_b: 0, guard_sigmas: 0.0 };
        let c = nest_partitions(p.clone(), p, CodeMode::Channel, lattice, 3, 0.25, vec![0.0; 8], meta).unwrap();
        for (i, cell) in c.cells().iter().enumerate() {
            assert_eq!((cell.h, cell.k), (labels[i], labels[i]));
            assert_ne!(c.role(i), Role::Message);
        }
        let r = code_rate(&c);
        assert_eq!(r.rate, 0.0);
        assert!(r.matches);
    }

    #[test]
    fn identity_versus_useless_over_z4_has_rate_two() {
        let g = FiniteAbelianGroup::cyclic(4).unwrap();
        let a = exact_params(&Dmc::useless(g.clone(), &[0.25; 4]).unwrap(), 2).unwrap();
        let b = exact_params(&Dmc::identity(g), 2).unwrap();
        // Source mode: A from the useless channel, B from the noiseless one.
        let c = construct(&a, &b, CodeMode::Source, 0.25, 0.0, 0).unwrap();
        let r = code_rate(&c);
        assert_eq!(r.rate, 2.0);
        assert!(r.matches);
        assert!(c.roles().iter().all(|&r| r == Role::Message));
    }

    #[test]
    fn binary_source_pair_has_no_inverted_cells() {
        let joint = JointSource::dsbs(0.89).unwrap();
        let (wc, ws) = source_test_channels(&joint);
        for n in 1..=3 {
            let pc = exact_params(&wc, n).unwrap();
            let ps = exact_params(&ws, n).unwrap();
            let c = construct(&pc, &ps, CodeMode::Source, 0.25, 0.0, 0).unwrap();
            assert_eq!(c.reassigned(), 0);
            let r = code_rate(&c);
            assert!(r.matches);
            // Binary: rate is the fraction of (Z2, {0}) cells.
            let ones = c.roles().iter().filter(|&&r| r == Role::Message).count();
            assert_eq!(r.rate, ones as f64 / c.len() as f64);
        }
    }

    #[test]
    fn bec_channel_pair_cells_cover_block() {
        let (ws, wc) = channel_test_channels(&[0.5, 0.5], &Dmc::bec(0.3).unwrap()).unwrap();
        let pa = exact_params(&ws, 3).unwrap();
        let pb = exact_params(&wc, 3).unwrap();
        let c = construct(&pa, &pb, CodeMode::Channel, 0.25, 0.0, 0).unwrap();
        assert_eq!(c.cell_sets().values().map(Vec::len).sum::<usize>(), 8);
        assert!(code_rate(&c).rate >= 0.0);
    }

    #[test]
    fn exact_rate_arithmetic() {
        let mut r = ExactRate::new(4);
        r.add_log_ratio(4, 1, 1);
        r.add_log_ratio(6, 3, 1);
        assert_eq!(r.coefficients().get(&2), Some(&3));
        assert!((r.value() - 0.75).abs() < 1e-15);
        let mut s = ExactRate::new(4);
        s.add_log_ratio(8, 1, 1);
        assert_eq!(r, s);
    }

    #[test]
    fn rate_cap_demotes_least_reliable() {
        let g = z2();
        let lattice = g.enumerate_subgroups().unwrap();
        let whole = lattice.iter().position(|h| h.order() == 2).unwrap();
        let triv = 1 - whole;
        let a = SubgroupPartition::from_labels(vec![whole; 4]);
        let b = SubgroupPartition::from_labels(vec![triv; 4]);
        let meta =
            EstimatorMeta { method: "exact".into(), seed: 0, trials: 0, skipped_a: 0, skipped_b: 0, guard_sigmas: 0.0 };
        let mut c = nest_partitions(a, b, CodeMode::Channel, lattice, 2, 0.25, vec![0.1, 0.4, 0.2, 0.3], meta).unwrap();
        assert_eq!(code_rate(&c).rate, 1.0);
        c.apply_rate_cap(0.5).unwrap();
        assert_eq!(code_rate(&c).rate, 0.5);
        assert_eq!(c.roles(), &[Role::Message, Role::Frozen, Role::Message, Role::Frozen]);
        assert_eq!(c.demoted(), 2);
        assert!(!code_rate(&c).matches);
    }

    #[test]
    fn text_round_trip_is_exact() {
        let (ws, wc) = channel_test_channels(&[0.3, 0.7], &Dmc::z_channel(0.2).unwrap()).unwrap();
        let pa = estimate_params(&ws, 3, 200, 4).unwrap();
        let pb = estimate_params(&wc, 3, 200, 5).unwrap();
        let mut c = construct(&pa, &pb, CodeMode::Channel, 0.2, 0.0, 77).unwrap();
        c.apply_rate_cap(0.1).unwrap();
        let text = c.to_text();
        let back = NestedConstruction::from_text(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_text(), text);
        assert_eq!(back.hash(), c.hash());
    }

    #[test]
    fn text_errors() {
        let (wc, ws) = source_test_channels(&JointSource::dsbs(0.9).unwrap());
        let c =
            construct(&exact_params(&wc, 2).unwrap(), &exact_params(&ws, 2).unwrap(), CodeMode::Source, 0.25, 0.0, 1)
                .unwrap();
        let text = c.to_text();
        let cut = &text[..text.len() / 2];
        assert!(matches!(NestedConstruction::from_text(cut), Err(Error::CorruptFile(_))));
        let bumped = text.replacen(" 1\n", " 2\n", 1);
        assert!(matches!(NestedConstruction::from_text(&bumped), Err(Error::VersionMismatch { found: 2, .. })));
        assert!(NestedConstruction::from_text("").is_err());
    }
}
