//! The invariant suite behind `npolar verify`. Each check reports pass or
//! fail with a one-line detail; a panic inside a check counts as a failure.

use std::collections::BTreeSet;
use std::fmt;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::channel_codec::{build_channel_code_guarded, ChannelCode};
use crate::construction::{code_rate, construct, estimate_params, exact_params, CodeMode, NestedConstruction, Role};
use crate::dmc::{
    channel_degradation_link, channel_test_channels, h2, source_degradation_link, source_test_channels, Dmc,
    JointSource, StochasticMatrix,
};
use crate::error::Error;
use crate::group::{Element, FiniteAbelianGroup, NestedCosets, Subgroup};
use crate::harness::config::{ExperimentConfig, Mode, PartialConfig};
use crate::harness::oracle::{capacity, hamming, rate_distortion};
use crate::harness::sweep::{run_bler_sweep, run_rd_sweep};
use crate::harness::{load_construction, save_construction};
use crate::lossy_codec::{build_source_code_guarded, SourceCode};
use crate::polar::{bit_reverse, digits, sc_conditional, synthesize_exact, LikelihoodTable, TransformSpec};
use crate::rng::{derive_seed, substream};

/// Deliberate corruption used to confirm that the suite can fail.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// Flip one entry of the precomputed generator table.
    TransformTable,
}

impl FromStr for Fault {
    type Err = Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "transform-table" => Ok(Fault::TransformTable),
            _ => Err(Error::Config(format!("unknown fault: '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub module: &'static str,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&CheckResult> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }
}

/// Tab-separated `status module.name detail`, one check per line.
impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "{}\t{}.{}\t{}", if c.passed { "PASS" } else { "FAIL" }, c.module, c.name, c.detail)?;
        }
        Ok(())
    }
}

struct Fail(String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(e.to_string())
    }
}

type Outcome = std::result::Result<String, Fail>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), Fail> {
    if cond {
        Ok(())
    } else {
        Err(Fail(msg()))
    }
}

struct Ctx {
    seed: u64,
    fault: Option<Fault>,
}

impl Ctx {
    fn rng(&self, stream: u64) -> ChaCha8Rng {
        substream(self.seed, stream)
    }
}

type CheckFn = fn(&Ctx) -> Outcome;

const CHECKS: &[(&str, &str, CheckFn)] = &[
    ("group", "decompose_bijection", group_decompose_bijection),
    ("group", "coset_sizes", group_coset_sizes),
    ("group", "transversal_sum", group_transversal_sum),
    ("dmc", "row_stochastic", dmc_row_stochastic),
    ("dmc", "z_symmetry", dmc_z_symmetry),
    ("dmc", "conservation", dmc_conservation),
    ("dmc", "degradation_monotone", dmc_degradation_monotone),
    ("dmc", "degradation_preserved", dmc_degradation_preserved),
    ("dmc", "source_independence", dmc_source_independence),
    ("dmc", "test_channel_links", dmc_test_channel_links),
    ("dmc", "rate_identities", dmc_rate_identities),
    ("polar", "transform_table", polar_transform_table),
    ("polar", "sc_vs_exact", polar_sc_vs_exact),
    ("polar", "marginal_consistency", polar_marginal_consistency),
    ("polar", "bit_reversal", polar_bit_reversal),
    ("polar", "relabel_invariance", polar_relabel_invariance),
    ("construction", "degradation_ordering", construction_degradation_ordering),
    ("construction", "fraction_reproducibility", construction_fraction_reproducibility),
    ("construction", "intermediate_trend", construction_intermediate_trend),
    ("construction", "rate_cross_check", construction_rate_cross_check),
    ("construction", "file_round_trip", construction_file_round_trip),
    ("lossy_codec", "determinism", lossy_determinism),
    ("lossy_codec", "decoder_agreement", lossy_decoder_agreement),
    ("lossy_codec", "message_bits", lossy_message_bits),
    ("lossy_codec", "dither_marginal", lossy_dither_marginal),
    ("lossy_codec", "distortion_average", lossy_distortion_average),
    ("lossy_codec", "exact_tv", lossy_exact_tv),
    ("channel_codec", "determinism", channel_determinism),
    ("channel_codec", "noiseless_round_trip", channel_noiseless_round_trip),
    ("channel_codec", "shaping", channel_shaping),
    ("channel_codec", "rate_accounting", channel_rate_accounting),
    ("channel_codec", "decoder_isolation", channel_decoder_isolation),
    ("channel_codec", "exact_tv", channel_exact_tv),
    ("harness", "oracles", harness_oracles),
    ("harness", "csv_determinism", harness_csv_determinism),
    ("harness", "construction_files", harness_construction_files),
];

/// `(module, name)` of every check, in run order.
pub fn check_names() -> Vec<(&'static str, &'static str)> {
    CHECKS.iter().map(|&(m, n, _)| (m, n)).collect()
}

/// Run every check whose `module.name` contains `filter` (all when `None`).
pub fn verify_filtered(seed: u64, fault: Option<Fault>, filter: Option<&str>) -> VerifyReport {
    let ctx = Ctx { seed, fault };
    let checks = CHECKS
        .iter()
        .enumerate()
        .filter(|(_, (m, n, _))| filter.is_none_or(|f| format!("{m}.{n}").contains(f)))
        .map(|(k, &(module, name, check))| {
            let ctx = Ctx { seed: derive_seed(ctx.seed, k as u64), fault: ctx.fault };
            let (passed, detail) = match catch_unwind(AssertUnwindSafe(|| check(&ctx))) {
                Ok(Ok(d)) => (true, d),
                Ok(Err(Fail(d))) => (false, d),
                Err(p) => {
                    let msg = p
                        .downcast_ref::<String>()
                        .cloned()
                        .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                        .unwrap_or_default();
                    (false, format!("panicked: {msg}"))
                }
            };
            log::info!("{} {module}.{name}: {detail}", if passed { "pass" } else { "FAIL" });
            CheckResult { module, name, passed, detail }
        })
        .collect();
    VerifyReport { checks }
}

pub fn verify(seed: u64, fault: Option<Fault>) -> VerifyReport {
    verify_filtered(seed, fault, None)
}

fn group(s: &str) -> FiniteAbelianGroup {
    s.parse().expect("valid group literal")
}

const SMALL_GROUPS: [&str; 9] = ["Z2", "Z3", "Z4", "Z6", "Z8", "Z2xZ2", "Z2xZ4", "Z3xZ3", "Z2xZ2xZ2"];

fn lattice(g: &FiniteAbelianGroup) -> Vec<Subgroup> {
    g.enumerate_subgroups().expect("small group")
}

// ---- group ----

fn group_decompose_bijection(_: &Ctx) -> Outcome {
    let mut pairs = 0;
    for gs in SMALL_GROUPS {
        let g = group(gs);
        let lat = lattice(&g);
        for k in &lat {
            for h in lat.iter().filter(|h| k.is_subgroup_of(h)) {
                let nc = NestedCosets::new(k, h)?;
                let (t_kh, t_h) = (nc.t_kh().coset_reps(), nc.t_h().coset_reps());
                ensure(k.order() * t_kh.len() * t_h.len() == g.order(), || format!("{gs}: sizes of {k} <= {h}"))?;
                let mut seen = BTreeSet::new();
                for x in g.elements() {
                    let (a, m, t) = nc.decompose(x);
                    ensure(k.contains(a) && t_kh.contains(&m) && t_h.contains(&t), || {
                        format!("{gs}: parts of {x} outside K, T_K<=H, T_H for {k} <= {h}")
                    })?;
                    ensure(g.add(g.add(a, m), t) == x && nc.compose(a, m, t) == x, || {
                        format!("{gs}: parts of {x} do not sum back")
                    })?;
                    seen.insert((a, m, t));
                }
                ensure(seen.len() == g.order(), || format!("{gs}: decompose not injective for {k} <= {h}"))?;
                pairs += 1;
            }
        }
    }
    Ok(format!("{pairs} subgroup pairs over {} groups", SMALL_GROUPS.len()))
}

fn group_coset_sizes(_: &Ctx) -> Outcome {
    let mut count = 0;
    for gs in SMALL_GROUPS {
        let g = group(gs);
        for h in lattice(&g) {
            let t = g.canonical_transversal(&h)?;
            ensure(t.len() * h.order() == g.order(), || format!("{gs}: |T_H| |H| != q for {h}"))?;
            let covered: BTreeSet<Element> = t
                .coset_reps()
                .iter()
                .flat_map(|&r| h.elements().iter().map(move |&e| (r, e)))
                .map(|(r, e)| g.add(r, e))
                .collect();
            ensure(covered.len() == g.order(), || format!("{gs}: cosets of {h} overlap"))?;
            count += 1;
        }
    }
    Ok(format!("{count} subgroups"))
}

fn group_transversal_sum(_: &Ctx) -> Outcome {
    let mut pairs = 0;
    for gs in SMALL_GROUPS {
        let g = group(gs);
        let lat = lattice(&g);
        for k in &lat {
            for h in lat.iter().filter(|h| k.is_subgroup_of(h)) {
                let nc = NestedCosets::new(k, h)?;
                let sums: Vec<Element> = nc
                    .t_kh()
                    .coset_reps()
                    .iter()
                    .flat_map(|&m| nc.t_h().coset_reps().iter().map(move |&t| (m, t)))
                    .map(|(m, t)| g.add(m, t))
                    .collect();
                let cosets: BTreeSet<Vec<Element>> = sums
                    .iter()
                    .map(|&s| {
                        let mut c: Vec<Element> = k.elements().iter().map(|&e| g.add(s, e)).collect();
                        c.sort_unstable();
                        c
                    })
                    .collect();
                ensure(cosets.len() == sums.len() && sums.len() * k.order() == g.order(), || {
                    format!("{gs}: T_K<=H + T_H is not a transversal of {k}")
                })?;
                pairs += 1;
            }
        }
    }
    Ok(format!("{pairs} subgroup pairs"))
}

// ---- dmc ----

const CHANNEL_GROUPS: [&str; 3] = ["Z2", "Z4", "Z2xZ2"];

fn dmc_row_stochastic(ctx: &Ctx) -> Outcome {
    let mut rng = ctx.rng(0);
    let mut chans = vec![
        Dmc::bsc(0.11)?,
        Dmc::bec(0.3)?,
        Dmc::z_channel(0.4)?,
        Dmc::qsc(group("Z4"), 0.2)?,
        Dmc::additive(group("Z3"), &[0.7, 0.2, 0.1])?,
        Dmc::useless(group("Z2"), &[0.3, 0.7])?,
        Dmc::identity(group("Z2xZ2")),
    ];
    for gs in CHANNEL_GROUPS {
        let w = Dmc::random(group(gs), 3, &mut rng);
        let link = StochasticMatrix::random(3, 2, &mut rng);
        chans.push(w.degrade(&link)?);
        chans.push(w);
    }
    let mut worst: f64 = 0.0;
    for w in &chans {
        worst = worst.max(w.max_row_defect());
        worst = worst.max(w.minus_transform()?.max_row_defect());
        worst = worst.max(w.plus_transform()?.max_row_defect());
    }
    ensure(worst <= 1e-12, || format!("row defect {worst:e}"))?;
    Ok(format!("{} channels and their transforms, max defect {worst:.1e}", chans.len()))
}

fn dmc_z_symmetry(ctx: &Ctx) -> Outcome {
    let mut rng = ctx.rng(0);
    for gs in ["Z2", "Z3", "Z4", "Z6", "Z2xZ2"] {
        let g = group(gs);
        for _ in 0..5 {
            let w = Dmc::random(g.clone(), 4, &mut rng);
            ensure((w.z_d(0) - 1.0).abs() < 1e-12, || format!("{gs}: Z_0 = {}", w.z_d(0)))?;
            for d in g.elements() {
                let (a, b) = (w.z_d(d), w.z_d(g.neg(d)));
                ensure((a - b).abs() < 1e-12, || format!("{gs}: Z_{d} = {a} but Z_-d = {b}"))?;
                ensure((-1e-15..=1.0 + 1e-12).contains(&a), || format!("{gs}: Z_{d} = {a} out of range"))?;
            }
        }
    }
    Ok("25 random channels".into())
}

fn dmc_conservation(ctx: &Ctx) -> Outcome {
    let mut rng = ctx.rng(0);
    let mut worst: f64 = 0.0;
    for gs in CHANNEL_GROUPS {
        for _ in 0..10 {
            let w = Dmc::random(group(gs), 3, &mut rng);
            let lhs = w.minus_transform()?.symmetric_capacity() + w.plus_transform()?.symmetric_capacity();
            worst = worst.max((lhs - 2.0 * w.symmetric_capacity()).abs());
        }
    }
    ensure(worst < 1e-9, || format!("max deviation {worst:e}"))?;
    Ok(format!("30 random channels, max deviation {worst:.1e}"))
}

fn z_dominates(worse: &Dmc, better: &Dmc) -> Option<(Element, f64, f64)> {
    worse.group().elements().map(|d| (d, worse.z_d(d), better.z_d(d))).find(|&(_, a, b)| a < b - 1e-12)
}

fn dmc_degradation_monotone(ctx: &Ctx) -> Outcome {
    let mut rng = ctx.rng(0);
    for gs in CHANNEL_GROUPS {
        for _ in 0..10 {
            let w = Dmc::random(group(gs), 3, &mut rng);
            let worse = w.degrade(&StochasticMatrix::random(3, 3, &mut rng))?;
            if let Some((d, a, b)) = z_dominates(&worse, &w) {
                return Err(Fail(format!("{gs}: degraded Z_{d} = {a} < {b}")));
            }
        }
    }
    Ok("30 composed pairs".into())
}

fn dmc_degradation_preserved(ctx: &Ctx) -> Outcome {
    let mut rng = ctx.rng(0);
    for gs in CHANNEL_GROUPS {
        for _ in 0..5 {
            let w = Dmc::random(group(gs), 3, &mut rng);
            let worse = w.degrade(&StochasticMatrix::random(3, 2, &mut rng))?;
            for (a, b, which) in [
                (worse.minus_transform()?, w.minus_transform()?, "minus"),
                (worse.plus_transform()?, w.plus_transform()?, "plus"),
            ] {
                if let Some((d, za, zb)) = z_dominates(&a, &b) {
                    return Err(Fail(format!("{gs} {which}: Z_{d} = {za} < {zb}")));
                }
            }
        }
    }
    Ok("15 composed pairs through both transforms".into())
}

fn dmc_source_independence(ctx: &Ctx) -> Outcome {
    let mut rng = ctx.rng(0);
    let mut worst: f64 = 0.0;
    for gs in ["Z2", "Z3", "Z4", "Z2xZ2"] {
        let g = group(gs);
        let q = g.order();
        for nx in 2..=4 {
            let joint = JointSource::random(nx, g.clone(), &mut rng);
            let (_, ws) = source_test_channels(&joint);
            // Uniform s: P(x, z) = (1/q) sum_s W_s(x q + z | s).
            let pxz: Vec<f64> = (0..nx * q).map(|o| (0..q).map(|s| ws.prob(s, o)).sum::<f64>() / q as f64).collect();
            let p_x = joint.p_x();
            for z in 0..q {
                let pz: f64 = (0..nx).map(|x| pxz[x * q + z]).sum();
                for x in 0..nx {
                    worst = worst.max((pxz[x * q + z] / pz - p_x[x]).abs());
                }
            }
        }
    }
    ensure(worst < 1e-9, || format!("max |p(x|z) - p(x)| = {worst:e}"))?;
    Ok(format!("12 random sources, max deviation {worst:.1e}"))
}

fn dmc_test_channel_links(ctx: &Ctx) -> Outcome {
    let mut rng = ctx.rng(0);
    let mut worst: f64 = 0.0;
    for gs in CHANNEL_GROUPS {
        let g = group(gs);
        let q = g.order();
        let joint = JointSource::random(3, g.clone(), &mut rng);
        let (wc, ws) = source_test_channels(&joint);
        let linked = ws.degrade(&source_degradation_link(3, q))?;
        worst = linked.table().iter().zip(wc.table()).map(|(a, b)| (a - b).abs()).fold(worst, f64::max);

        let w = Dmc::random(g.clone(), 3, &mut rng);
        let p_x = StochasticMatrix::random(1, q, &mut rng).row(0).to_vec();
        let (ws, wc) = channel_test_channels(&p_x, &w)?;
        let linked = wc.degrade(&channel_degradation_link(3, q))?;
        worst = linked.table().iter().zip(ws.table()).map(|(a, b)| (a - b).abs()).fold(worst, f64::max);
    }
    ensure(worst < 1e-12, || format!("linked table differs by {worst:e}"))?;
    Ok(format!("source and channel pairs over 3 groups, max deviation {worst:.1e}"))
}

fn dmc_rate_identities(ctx: &Ctx) -> Outcome {
    let mut rng = ctx.rng(0);
    let mut worst: f64 = 0.0;
    for k in 0..10 {
        let g = group(CHANNEL_GROUPS[k % 3]);
        let q = g.order();
        let joint = JointSource::random(2 + k % 3, g.clone(), &mut rng);
        let (wc, ws) = source_test_channels(&joint);
        worst = worst.max((ws.symmetric_capacity() - wc.symmetric_capacity() - joint.mutual_information()).abs());
        let w = Dmc::random(g, 3, &mut rng);
        let p_x = StochasticMatrix::random(1, q, &mut rng).row(0).to_vec();
        let (ws, wc) = channel_test_channels(&p_x, &w)?;
        worst = worst.max((wc.symmetric_capacity() - ws.symmetric_capacity() - w.mutual_information(&p_x)).abs());
    }
    ensure(worst < 1e-9, || format!("max deviation {worst:e}"))?;
    Ok(format!("10 sources and 10 channels, max deviation {worst:.1e}"))
}

// ---- polar ----

/// Support pattern of `G_N`: row `i` marks the positions that `v_i` reaches.
fn generator_table(spec: &TransformSpec) -> crate::Result<Vec<Vec<bool>>> {
    let nn = spec.len();
    let g = spec.group();
    let one = g.elements().find(|&e| e != g.zero()).unwrap_or(0);
    (0..nn)
        .map(|i| {
            let mut v = vec![0; nn];
            v[i] = one;
            Ok(spec.transform(&v)?.iter().map(|&x| x != 0).collect())
        })
        .collect()
}

fn polar_transform_table(ctx: &Ctx) -> Outcome {
    let mut rng = ctx.rng(0);
    let mut checked = 0;
    let mut injected = false;
    for gs in ["Z2", "Z3", "Z4", "Z2xZ2"] {
        let g = group(gs);
        let q = g.order();
        let spec = TransformSpec::new(g.clone(), 2)?;
        let nn = spec.len();
        let mut table = generator_table(&spec)?;
        if ctx.fault == Some(Fault::TransformTable) && !injected {
            let (i, j) = (rng.gen_range(0..nn), rng.gen_range(0..nn));
            table[i][j] = !table[i][j];
            injected = true;
        }
        ensure(spec.transform(&vec![0; nn])?.iter().all(|&x| x == 0), || format!("{gs}: T(0) != 0"))?;
        let total = q.pow(nn as u32);
        let mut v = vec![0; nn];
        let mut u = vec![0; nn];
        for vi in 0..total {
            digits(vi, q, &mut v);
            let x = spec.transform(&v)?;
            let mut want = vec![0; nn];
            for (i, row) in table.iter().enumerate() {
                for (j, &hit) in row.iter().enumerate() {
                    if hit {
                        want[j] = g.add(want[j], v[i]);
                    }
                }
            }
            ensure(x == want, || format!("{gs}: transform of {v:?} disagrees with the generator table"))?;
            ensure(spec.inverse(&x)? == v, || format!("{gs}: inverse fails on {v:?}"))?;
            digits(rng.gen_range(0..total), q, &mut u);
            let sum: Vec<Element> = v.iter().zip(&u).map(|(&a, &b)| g.add(a, b)).collect();
            let tu = spec.transform(&u)?;
            let lin: Vec<Element> = x.iter().zip(&tu).map(|(&a, &b)| g.add(a, b)).collect();
            ensure(spec.transform(&sum)? == lin, || format!("{gs}: T(u + v) != T(u) + T(v)"))?;
            checked += 1;
        }
    }
    Ok(format!("{checked} words at N = 4"))
}

fn polar_sc_vs_exact(ctx: &Ctx) -> Outcome {
    let mut rng = ctx.rng(0);
    let mut worst: f64 = 0.0;
    let mut cases = 0usize;
    for gs in ["Z2", "Z4"] {
        let g = group(gs);
        let q = g.order();
        let w = Dmc::random(g.clone(), 2, &mut rng);
        let ny = w.output_size();
        for n in 0..=2u32 {
            let spec = TransformSpec::new(g.clone(), n)?;
            let nn = spec.len();
            let chans = synthesize_exact(&w, n)?;
            let mut ys = vec![0; nn];
            for obs in 0..ny.pow(nn as u32) {
                digits(obs, ny, &mut ys);
                let table = LikelihoodTable::from_outputs(&w, &ys)?;
                for (i, ch) in chans.iter().enumerate() {
                    let mut prefix = vec![0; i];
                    for pi in 0..q.pow(i as u32) {
                        digits(pi, q, &mut prefix);
                        let out = obs * q.pow(i as u32) + pi;
                        let col: Vec<f64> = (0..q).map(|u| ch.prob(u, out)).collect();
                        let total: f64 = col.iter().sum();
                        let sc = sc_conditional(&spec, &table, &prefix, i)?;
                        for (a, b) in sc.iter().zip(&col) {
                            worst = worst.max((a - b / total).abs());
                        }
                        cases += 1;
                    }
                }
            }
        }
    }
    ensure(worst < 1e-9, || format!("max deviation {worst:e}"))?;
    Ok(format!("{cases} (index, prefix, observation) cases, max deviation {worst:.1e}"))
}

fn polar_marginal_consistency(ctx: &Ctx) -> Outcome {
    let mut rng = ctx.rng(0);
    let mut worst: f64 = 0.0;
    for (gs, n) in [("Z2", 3u32), ("Z3", 2), ("Z2xZ2", 2)] {
        let g = group(gs);
        let q = g.order();
        let w = Dmc::random(g.clone(), 3, &mut rng);
        let spec = TransformSpec::new(g.clone(), n)?;
        let nn = spec.len();
        let ys: Vec<usize> = (0..nn).map(|_| rng.gen_range(0..3)).collect();
        let table = LikelihoodTable::from_outputs(&w, &ys)?;
        let total = q.pow(nn as u32);
        let mut v = vec![0; nn];
        let mut joint = vec![0.0; total];
        for (vi, j) in joint.iter_mut().enumerate() {
            digits(vi, q, &mut v);
            *j = spec.transform(&v)?.iter().zip(&ys).map(|(&x, &y)| w.prob(x, y)).product();
        }
        let mass: f64 = joint.iter().sum();
        for (vi, j) in joint.iter().enumerate() {
            digits(vi, q, &mut v);
            let mut chain = 1.0;
            for i in 0..nn {
                chain *= sc_conditional(&spec, &table, &v[..i], i)?[v[i]];
            }
            worst = worst.max((chain - j / mass).abs());
        }
    }
    ensure(worst < 1e-9, || format!("max deviation {worst:e}"))?;
    Ok(format!("chain of SC conditionals equals the joint, max deviation {worst:.1e}"))
}

fn polar_bit_reversal(_: &Ctx) -> Outcome {
    for n in 0..=12u32 {
        for i in 0..1usize << n {
            let r = bit_reverse(i, n);
            let manual = (0..n).fold(0, |acc, b| acc | (((i >> b) & 1) << (n - 1 - b)));
            ensure(r == manual && bit_reverse(r, n) == i, || format!("bit reversal of {i} at n = {n}"))?;
        }
    }
    Ok("n = 0..=12".into())
}

fn polar_relabel_invariance(ctx: &Ctx) -> Outcome {
    let mut rng = ctx.rng(0);
    // Outputs 2 and 3 carry no information about the input.
    let w = Dmc::new(group("Z2"), 4, vec![0.5, 0.1, 0.15, 0.25, 0.1, 0.5, 0.15, 0.25])?;
    let spec = TransformSpec::new(group("Z2"), 3)?;
    for _ in 0..20 {
        let ys: Vec<usize> = (0..8).map(|_| rng.gen_range(0..4)).collect();
        let swapped: Vec<usize> = ys.iter().map(|&y| if y >= 2 { 5 - y } else { y }).collect();
        let (a, b) = (LikelihoodTable::from_outputs(&w, &ys)?, LikelihoodTable::from_outputs(&w, &swapped)?);
        let v: Vec<Element> = (0..8).map(|_| rng.gen_range(0..2)).collect();
        for i in 0..8 {
            let (pa, pb) = (sc_conditional(&spec, &a, &v[..i], i)?, sc_conditional(&spec, &b, &v[..i], i)?);
            let dev = pa.iter().zip(&pb).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            ensure(dev < 1e-12, || format!("relabeling changed index {i} by {dev:e}"))?;
        }
    }
    Ok("20 observation words at N = 8".into())
}

// ---- construction ----

fn construction_degradation_ordering(ctx: &Ctx) -> Outcome {
    let mut rng = ctx.rng(0);
    let mut sources = vec![JointSource::dsbs(0.89)?, JointSource::dsbs(0.7)?];
    sources.push(JointSource::random(2, group("Z4"), &mut rng));
    let mut compared = 0;
    for joint in &sources {
        let (wc, ws) = source_test_channels(joint);
        for n in 1..=3 {
            let (pc, ps) = (exact_params(&wc, n)?, exact_params(&ws, n)?);
            for h in lattice(joint.u_group()) {
                for i in 0..pc.len() {
                    let (zc, zs) = (pc.z_subgroup(i, &h), ps.z_subgroup(i, &h));
                    ensure(zc >= zs - 1e-12, || format!("source n {n} i {i} H {h}: Z(W_c) {zc} < Z(W_s) {zs}"))?;
                    compared += 1;
                }
            }
        }
    }
    for (w, p_x) in [
        (Dmc::bsc(0.11)?, vec![0.5, 0.5]),
        (Dmc::z_channel(0.5)?, vec![0.6, 0.4]),
        (Dmc::qsc(group("Z4"), 0.2)?, vec![0.4, 0.3, 0.2, 0.1]),
    ] {
        let (ws, wc) = channel_test_channels(&p_x, &w)?;
        // W_c of the quaternary channel has 16 outputs; n = 3 exceeds the exact table bound.
        let top = if w.input_size() > 2 { 2 } else { 3 };
        for n in 1..=top {
            let (ps, pc) = (exact_params(&ws, n)?, exact_params(&wc, n)?);
            for h in lattice(w.group()) {
                for i in 0..ps.len() {
                    let (zs, zc) = (ps.z_subgroup(i, &h), pc.z_subgroup(i, &h));
                    ensure(zs >= zc - 1e-12, || format!("channel n {n} i {i} H {h}: Z(W_s) {zs} < Z(W_c) {zc}"))?;
                    compared += 1;
                }
            }
        }
    }
    Ok(format!("{compared} exact comparisons for n <= 3"))
}

fn bsc_channel_construction(n: u32, trials: usize, seed: u64) -> crate::Result<NestedConstruction> {
    let (ws, wc) = channel_test_channels(&[0.5, 0.5], &Dmc::bsc(0.11)?)?;
    let (ps, pc) = (estimate_params(&ws, n, trials, seed)?, estimate_params(&wc, n, trials, derive_seed(seed, 1))?);
    construct(&ps, &pc, CodeMode::Channel, 0.25, 0.0, seed)
}

fn construction_fraction_reproducibility(ctx: &Ctx) -> Outcome {
    let n = 7;
    let a = bsc_channel_construction(n, 2000, ctx.seed)?;
    let b = bsc_channel_construction(n, 2000, ctx.seed)?;
    ensure(a.to_text() == b.to_text(), || "same seed gave different constructions".into())?;
    let c = bsc_channel_construction(n, 2000, derive_seed(ctx.seed, 99))?;
    let nn = a.len() as f64;
    for (fa, fc) in a.b_fractions().iter().zip(c.b_fractions()) {
        let p = 0.5 * (fa + fc);
        let sigma = (2.0 * p * (1.0 - p) / nn).sqrt().max(1.0 / nn);
        ensure((fa - fc).abs() <= 3.0 * sigma, || format!("fractions {fa} and {fc} differ beyond 3 sigma"))?;
    }
    Ok(format!("reproducible; other seed fractions {:?} vs {:?}", a.b_fractions(), c.b_fractions()))
}

fn construction_intermediate_trend(ctx: &Ctx) -> Outcome {
    let w = Dmc::qsc(group("Z4"), 0.25)?;
    let (ws, wc) = channel_test_channels(&[0.25; 4], &w)?;
    let mut values = Vec::new();
    for n in [4u32, 6, 8] {
        let (ps, pc) =
            (estimate_params(&ws, n, 1000, ctx.seed)?, estimate_params(&wc, n, 1000, derive_seed(ctx.seed, 1))?);
        let c = construct(&ps, &pc, CodeMode::Channel, 0.25, 0.0, ctx.seed)?;
        let mass: f64 = c
            .b_partition()
            .labels()
            .iter()
            .filter(|&&l| {
                let o = c.lattice()[l].order();
                o != 1 && o != 4
            })
            .count() as f64
            / c.len() as f64;
        values.push(format!("n={n}: {mass:.4}"));
    }
    // Recorded only: convergence is asymptotic.
    Ok(format!("intermediate W_c mass {}", values.join(", ")))
}

fn construction_rate_cross_check(ctx: &Ctx) -> Outcome {
    let mut rng = ctx.rng(0);
    let mut checked = 0;
    let mut problems: Vec<(Dmc, Dmc, CodeMode)> = Vec::new();
    for joint in [JointSource::dsbs(0.89)?, JointSource::random(3, group("Z4"), &mut rng)] {
        let (wc, ws) = source_test_channels(&joint);
        problems.push((wc, ws, CodeMode::Source));
    }
    for (w, p_x) in [(Dmc::bsc(0.11)?, vec![0.5, 0.5]), (Dmc::qsc(group("Z4"), 0.1)?, vec![0.25; 4])] {
        let (ws, wc) = channel_test_channels(&p_x, &w)?;
        problems.push((ws, wc, CodeMode::Channel));
    }
    for (a, b, mode) in &problems {
        for n in 1..=3 {
            let c = construct(&exact_params(a, n)?, &exact_params(b, n)?, *mode, 0.25, 0.0, 0)?;
            if c.reassigned() == 0 && c.demoted() == 0 {
                let r = code_rate(&c);
                ensure(r.matches, || format!("{mode} n {n}: {:?} vs {:?}", r.exact, r.cross_check))?;
                checked += 1;
            }
        }
    }
    ensure(checked > 0, || "no construction without reassignment".into())?;
    Ok(format!("{checked} constructions matched exactly"))
}

fn construction_file_round_trip(ctx: &Ctx) -> Outcome {
    let c = bsc_channel_construction(5, 500, ctx.seed)?;
    let text = c.to_text();
    let back = NestedConstruction::from_text(&text)?;
    ensure(back.to_text() == text && back.hash() == c.hash(), || "round trip changed the construction".into())?;
    ensure(NestedConstruction::from_text(&text[..text.len() - 5]).is_err(), || "truncated text accepted".into())?;
    ensure(
        matches!(
            NestedConstruction::from_text(&text.replacen("construction 1", "construction 2", 1)),
            Err(Error::VersionMismatch { .. })
        ),
        || "version 2 accepted".into(),
    )?;
    Ok(format!("{} bytes", text.len()))
}

// ---- lossy_codec ----

fn bss_joint() -> crate::Result<JointSource> {
    JointSource::dsbs(0.89)
}

fn lossy_determinism(ctx: &Ctx) -> Outcome {
    let joint = bss_joint()?;
    let a = build_source_code_guarded(&joint, 6, 0.25, 1000, 3.0, ctx.seed)?;
    let b = build_source_code_guarded(&joint, 6, 0.25, 1000, 3.0, ctx.seed)?;
    ensure(a.hash() == b.hash() && a.dither() == b.dither(), || "same seed, different codes".into())?;
    let x = a.sample_source(ctx.seed);
    let (ea, eb) = (a.encode(&x, 5)?, b.encode(&x, 5)?);
    ensure(ea == eb, || "same seed, different encodings".into())?;
    Ok("build and encode reproduce".into())
}

fn coset_parts(c: &NestedConstruction, i: usize, v: Element) -> crate::Result<(Element, Element)> {
    let (k, m, _) = NestedCosets::new(c.k(i), c.h(i))?.decompose(v);
    Ok((k, m))
}

fn lossy_decoder_agreement(ctx: &Ctx) -> Outcome {
    let joint = JointSource::from_test_channel(&[0.25; 4], &Dmc::qsc(group("Z4"), 0.3)?.to_matrix(), group("Z4"))?;
    let mut rates = Vec::new();
    for n in [6u32, 8, 10] {
        let code = build_source_code_guarded(&joint, n, 0.25, 1000, 3.0, derive_seed(ctx.seed, n as u64))?;
        let c = code.construction();
        let (mut shaping, mut differ) = (0usize, 0usize);
        for b in 0..20u64 {
            let x = code.sample_source(derive_seed(ctx.seed, 100 + b));
            let enc = code.encode(&x, b)?;
            let dec = code.decode_full(&enc.message)?;
            for i in 0..code.len() {
                ensure(coset_parts(c, i, enc.v[i])? == coset_parts(c, i, dec.v[i])?, || {
                    format!("n {n}: decoder disagrees on the shared part of index {i}")
                })?;
                if c.role(i) == Role::Shaping {
                    shaping += 1;
                    differ += usize::from(enc.v[i] != dec.v[i]);
                }
            }
        }
        rates.push(if shaping > 0 { differ as f64 / shaping as f64 } else { 0.0 });
    }
    // Trend check with slack for sampling noise.
    ensure(rates.windows(2).all(|p| p[1] <= p[0] + 0.02), || format!("shaping disagreement rose: {rates:?}"))?;
    Ok(format!("shared parts always agree; shaping disagreement over n = 6, 8, 10: {rates:.4?}"))
}

fn lossy_message_bits(ctx: &Ctx) -> Outcome {
    let joint = bss_joint()?;
    for n in [4u32, 6, 8] {
        let code = build_source_code_guarded(&joint, n, 0.25, 1000, 3.0, derive_seed(ctx.seed, n as u64))?;
        let enc = code.encode(&code.sample_source(1), 2)?;
        let report = code_rate(code.construction());
        ensure(enc.message.exact_bits(code.len()) == report.exact, || format!("n {n}: message length != N R"))?;
    }
    Ok("n = 4, 6, 8".into())
}

fn lossy_dither_marginal(ctx: &Ctx) -> Outcome {
    let joint = JointSource::from_test_channel(&[0.5, 0.5], &Dmc::bsc(0.2)?.to_matrix(), group("Z2"))?;
    let code = build_source_code_guarded(&joint, 8, 0.25, 1000, 3.0, ctx.seed)?;
    let blocks: Vec<Vec<usize>> = (0..200).map(|b| code.sample_source(derive_seed(ctx.seed, b))).collect();
    let d = code.diagnostics(&blocks, ctx.seed)?;
    let symbols = (blocks.len() * code.len()) as f64;
    for (u, (&emp, &p)) in d.u_marginal.iter().zip(&joint.p_u()).enumerate() {
        let sigma = (p * (1.0 - p) / symbols).sqrt();
        ensure((emp - p).abs() <= 3.0 * sigma, || format!("u = {u}: {emp} vs {p} (sigma {sigma:e})"))?;
    }
    Ok(format!("u marginal {:.4?}", d.u_marginal))
}

fn lossy_distortion_average(ctx: &Ctx) -> Outcome {
    let mut rng = ctx.rng(0);
    let joint = JointSource::random(3, group("Z3"), &mut rng);
    let table: Vec<Vec<f64>> = (0..3).map(|_| (0..3).map(|_| rng.gen_range(0.0..2.0)).collect()).collect();
    let c = construct(
        &exact_params(&source_test_channels(&joint).0, 2)?,
        &exact_params(&source_test_channels(&joint).1, 2)?,
        CodeMode::Source,
        0.25,
        0.0,
        0,
    )?;
    let code = SourceCode::from_construction(c, joint, 0)?.with_distortion(&table)?;
    for _ in 0..20 {
        let x: Vec<usize> = (0..4).map(|_| rng.gen_range(0..3)).collect();
        let u: Vec<usize> = (0..4).map(|_| rng.gen_range(0..3)).collect();
        let want = x.iter().zip(&u).map(|(&a, &b)| table[a][b]).sum::<f64>() / 4.0;
        ensure((code.distortion(&x, &u) - want).abs() < 1e-15, || "distortion is not the per-letter mean".into())?;
    }
    Ok("20 random pairs".into())
}

fn lossy_exact_tv(_: &Ctx) -> Outcome {
    let joint = bss_joint()?;
    let (wc, ws) = source_test_channels(&joint);
    let mut tv = Vec::new();
    for n in [2u32, 3] {
        let c = construct(&exact_params(&wc, n)?, &exact_params(&ws, n)?, CodeMode::Source, 0.25, 0.0, 0)?;
        let code = SourceCode::from_construction(c, joint.clone(), 0)?;
        tv.push(code.exact_tv()?);
    }
    let identity = JointSource::from_test_channel(&[0.5, 0.5], &StochasticMatrix::identity(2), group("Z2"))?;
    let (wc, ws) = source_test_channels(&identity);
    let c = construct(&exact_params(&wc, 2)?, &exact_params(&ws, 2)?, CodeMode::Source, 0.25, 0.0, 0)?;
    let sampled_only = c.roles().iter().all(|&r| r != Role::Frozen);
    let zero = SourceCode::from_construction(c, identity, 0)?.exact_tv()?;
    ensure(tv.iter().all(|&t| t >= 0.0), || format!("negative TV {tv:?}"))?;
    ensure(!sampled_only || zero.abs() < 1e-12, || format!("TV {zero} without frozen cells"))?;
    ensure(tv[1] <= tv[0] + 1e-12, || format!("TV grew from N = 4 to N = 8: {tv:?}"))?;
    Ok(format!("TV at N = 4, 8: {tv:?}; without frozen cells: {zero:.1e}"))
}

// ---- channel_codec ----

fn channel_determinism(ctx: &Ctx) -> Outcome {
    let w = Dmc::bsc(0.11)?;
    let build = || build_channel_code_guarded(&[0.5, 0.5], &w, 6, 0.25, 1000, 3.0, ctx.seed, Some(0.25));
    let (a, b) = (build()?, build()?);
    ensure(a.hash() == b.hash(), || "same seed, different constructions".into())?;
    let m = a.random_message(1);
    let (ta, tb) = (a.encode(&m, 2)?, b.encode(&m, 2)?);
    ensure(ta == tb, || "same seed, different transmissions".into())?;
    ensure(a.simulate(&ta.x, 3) == b.simulate(&tb.x, 3), || "same seed, different channel noise".into())?;
    Ok("build, encode and channel noise reproduce".into())
}

fn exact_channel_code(p_x: &[f64], w: &Dmc, n: u32, seed: u64) -> crate::Result<ChannelCode> {
    let (ws, wc) = channel_test_channels(p_x, w)?;
    let c = construct(&exact_params(&ws, n)?, &exact_params(&wc, n)?, CodeMode::Channel, 0.25, 0.0, seed)?;
    ChannelCode::from_construction(c, w.clone(), p_x.to_vec(), seed)
}

fn channel_noiseless_round_trip(_: &Ctx) -> Outcome {
    let mut messages = 0usize;
    for (gs, p_x) in [
        ("Z2", vec![0.5, 0.5]),
        ("Z2", vec![0.8, 0.2]),
        ("Z3", vec![1.0 / 3.0; 3]),
        ("Z4", vec![0.25; 4]),
        ("Z4", vec![0.4, 0.3, 0.2, 0.1]),
        ("Z2xZ2", vec![0.25; 4]),
    ] {
        let g = group(gs);
        let w = Dmc::identity(g);
        for n in 0..=3u32 {
            let code = exact_channel_code(&p_x, &w, n, n as u64)?;
            let radices = code.message_radices();
            let total: usize = radices.iter().product();
            if total > 70_000 {
                continue;
            }
            let mut msg = vec![0; radices.len()];
            for index in 0..total {
                let mut rest = index;
                for (d, &r) in msg.iter_mut().zip(&radices).rev() {
                    *d = rest % r;
                    rest /= r;
                }
                let tx = code.encode(&msg, index as u64)?;
                let y = code.simulate(&tx.x, 0);
                ensure(code.decode(&y, &tx.side)? == msg, || format!("{gs} n {n}: message {msg:?} lost"))?;
                messages += 1;
            }
        }
    }
    Ok(format!("{messages} messages"))
}

fn channel_shaping(ctx: &Ctx) -> Outcome {
    // Uniform input: every (x, y) cell within 3 sigma.
    let w = Dmc::bsc(0.11)?;
    let code = build_channel_code_guarded(&[0.5, 0.5], &w, 8, 0.25, 1000, 3.0, ctx.seed, None)?;
    let blocks = 200;
    let d = code.diagnostics(blocks, ctx.seed)?;
    let symbols = (blocks * code.len()) as f64;
    for x in 0..2 {
        for y in 0..2 {
            let p = 0.5 * w.prob(x, y);
            let sigma = (p * (1.0 - p) / symbols).sqrt();
            let emp = d.xy_joint[x * 2 + y];
            ensure((emp - p).abs() <= 3.0 * sigma, || format!("BSC cell ({x}, {y}): {emp} vs {p}"))?;
        }
    }
    // Non-uniform input: the (x, y) law converges as n grows.
    let w = Dmc::z_channel(0.5)?;
    let p_x = capacity(&w.to_matrix())?.input;
    let mut tv = Vec::new();
    for n in [6u32, 8, 10] {
        let code = build_channel_code_guarded(&p_x, &w, n, 0.25, 1000, 3.0, derive_seed(ctx.seed, n as u64), None)?;
        tv.push(code.diagnostics(blocks, ctx.seed)?.xy_tv);
    }
    ensure(tv.windows(2).all(|p| p[1] <= p[0] + 1e-3), || format!("Z-channel (x, y) TV does not shrink: {tv:?}"))?;
    Ok(format!("BSC cells within 3 sigma; Z-channel (x, y) TV over n = 6, 8, 10: {tv:.4?}"))
}

fn channel_rate_accounting(ctx: &Ctx) -> Outcome {
    let w = Dmc::z_channel(0.3)?;
    let p_x = capacity(&w.to_matrix())?.input;
    let mut fractions = Vec::new();
    for n in [4u32, 6, 8, 10] {
        let code = build_channel_code_guarded(&p_x, &w, n, 0.25, 2000, 3.0, derive_seed(ctx.seed, n as u64), None)?;
        let r = code.rates();
        ensure((r.rate - r.side.value() - code.net_rate()).abs() < 1e-15, || format!("n {n}: gross - side != net"))?;
        fractions.push(code.side_fraction());
    }
    ensure(fractions.first() >= fractions.last(), || format!("side-info fraction grew: {fractions:?}"))?;
    Ok(format!("side-info fraction over n = 4, 6, 8, 10: {fractions:.4?}"))
}

fn channel_decoder_isolation(ctx: &Ctx) -> Outcome {
    let mut rng = ctx.rng(0);
    let w = Dmc::qsc(group("Z4"), 0.1)?;
    let code = build_channel_code_guarded(&[0.4, 0.3, 0.2, 0.1], &w, 6, 0.25, 1000, 3.0, ctx.seed, None)?;
    for b in 0..20u64 {
        let mut tx = code.encode(&code.random_message(b), b)?;
        let y = code.simulate(&tx.x, b);
        let before = code.decode_full(&y, &tx.side)?;
        tx.v.shuffle(&mut rng);
        tx.v.iter_mut().for_each(|v| *v = (*v + 1) % 4);
        ensure(code.decode_full(&y, &tx.side)? == before, || "decoding changed with encoder-private state".into())?;
    }
    Ok("20 blocks with scrambled encoder state".into())
}

fn channel_exact_tv(_: &Ctx) -> Outcome {
    let w = Dmc::bsc(0.11)?;
    let mut tv = Vec::new();
    for n in [2u32, 3] {
        tv.push(exact_channel_code(&[0.5, 0.5], &w, n, 0)?.exact_tv()?);
    }
    // The identity channel leaves nothing frozen.
    let free = exact_channel_code(&[0.5, 0.5], &Dmc::identity(group("Z2")), 2, 0)?;
    let zero = free.exact_tv()?;
    ensure(tv.iter().all(|&t| t >= 0.0), || format!("negative TV {tv:?}"))?;
    ensure(zero.abs() < 1e-12, || format!("TV {zero} without frozen cells"))?;
    Ok(format!("TV at N = 4, 8: {tv:?}"))
}

// ---- harness ----

fn harness_oracles(_: &Ctx) -> Outcome {
    let cases = [
        (capacity(&Dmc::bsc(0.11)?.to_matrix())?.capacity, 1.0 - h2(0.11), "BSC capacity"),
        (capacity(&Dmc::bec(0.5)?.to_matrix())?.capacity, 0.5, "BEC capacity"),
        (capacity(&Dmc::z_channel(0.5)?.to_matrix())?.capacity, 1.25f64.log2(), "Z capacity"),
        (rate_distortion(&[0.5, 0.5], &hamming(2, 2), 0.11)?, 1.0 - h2(0.11), "binary R(0.11)"),
        (rate_distortion(&[0.5, 0.5], &hamming(2, 2), 0.5)?, 0.0, "binary R(0.5)"),
        (rate_distortion(&[0.5, 0.5], &hamming(2, 2), 0.0)?, 1.0, "binary R(0)"),
        (rate_distortion(&[0.7, 0.3], &hamming(2, 2), 0.1)?, h2(0.3) - h2(0.1), "biased R(0.1)"),
    ];
    for (got, want, what) in cases {
        ensure((got - want).abs() < 1e-6, || format!("{what}: {got} vs {want}"))?;
    }
    Ok(format!("{} closed forms", cases.len()))
}

fn harness_csv_determinism(ctx: &Ctx) -> Outcome {
    let p = PartialConfig {
        n: Some(vec![3, 4]),
        trials: Some(300),
        blocks: Some(10),
        seed: Some(ctx.seed),
        ..Default::default()
    };
    let rd = ExperimentConfig::resolve(Mode::SweepRd, p.clone(), None)?;
    let bler = ExperimentConfig::resolve(Mode::SweepBler, p, None)?;
    ensure(run_rd_sweep(&rd)? == run_rd_sweep(&rd)?, || "rate-distortion CSV differs between runs".into())?;
    ensure(run_bler_sweep(&bler)? == run_bler_sweep(&bler)?, || "BLER CSV differs between runs".into())?;
    Ok("both sweeps reproduce bit for bit".into())
}

fn harness_construction_files(ctx: &Ctx) -> Outcome {
    let dir = std::env::temp_dir().join(format!("npolar-verify-{}-{}", std::process::id(), ctx.seed));
    std::fs::create_dir_all(&dir).map_err(Error::from)?;
    let path = dir.join("construction.txt");
    let result = (|| -> Outcome {
        let c = bsc_channel_construction(4, 500, ctx.seed)?;
        save_construction(&path, &c)?;
        let back = load_construction(&path)?;
        ensure(back.to_text() == c.to_text(), || "load(save(c)) != c".into())?;
        let text = c.to_text();
        std::fs::write(&path, &text[..text.len() / 3]).map_err(Error::from)?;
        ensure(matches!(load_construction(&path), Err(Error::CorruptFile(_))), || "truncated file accepted".into())?;
        let other = Dmc::qsc(group("Z4"), 0.1)?;
        ensure(
            matches!(ChannelCode::from_construction(back, other, vec![0.25; 4], 0), Err(Error::HashMismatch)),
            || "construction for Z2 accepted by a Z4 codec".into(),
        )?;
        Ok("save/load, truncation and group mismatch".into())
    })();
    let _ = std::fs::remove_dir_all(&dir);
    result
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fast_checks_pass() {
        let report = verify_filtered(1, None, Some("group."));
        assert!(report.all_passed(), "{report}");
        assert_eq!(report.checks.len(), 3);
        let report = verify_filtered(1, None, Some("polar.sc_vs_exact"));
        assert!(report.all_passed(), "{report}");
    }

    #[test]
    fn injected_fault_is_caught() {
        let report = verify_filtered(1, Some(Fault::TransformTable), Some("polar.transform_table"));
        assert!(!report.all_passed());
        assert!(report.to_string().starts_with("FAIL\tpolar.transform_table"));
        assert!(verify_filtered(1, None, Some("polar.transform_table")).all_passed());
    }

    #[test]
    fn names_are_unique() {
        let names = check_names();
        let set: BTreeSet<_> = names.iter().collect();
        assert_eq!(set.len(), names.len());
        assert!("bogus".parse::<Fault>().is_err());
    }
}
