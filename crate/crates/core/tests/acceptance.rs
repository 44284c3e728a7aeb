//! Acceptance suite: one line per criterion, nonzero exit if any fails.
//! Runs without the libtest harness so the lines always reach the output.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use nested_polar::channel_codec::{build_channel_code, build_channel_code_guarded, ChannelCode};
use nested_polar::construction::{code_rate, construct, estimate_params, exact_params, CodeMode, DEFAULT_GUARD_SIGMAS};
use nested_polar::dmc::{channel_test_channels, h2, source_test_channels, Dmc, JointSource, StochasticMatrix};
use nested_polar::group::FiniteAbelianGroup;
use nested_polar::harness::oracle::{capacity, hamming, rate_distortion};
use nested_polar::harness::{run_bler_sweep, run_rd_sweep, ExperimentConfig, Mode, PartialConfig};
use nested_polar::lossy_codec::{build_source_code, SourceCode};
use nested_polar::polar::{sc_conditional, synthesize_exact, LikelihoodTable, TransformSpec};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome, Duration);

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn lib<T>(r: nested_polar::Result<T>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn group(s: &str) -> FiniteAbelianGroup {
    s.parse().unwrap()
}

fn digits(mut index: usize, radix: usize, out: &mut [usize]) {
    for d in out.iter_mut().rev() {
        *d = index % radix;
        index /= radix;
    }
}

const SEED: u64 = 20_240_601;

/// SC conditionals against the enumerated synthesized channels.
fn exact_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for gs in ["Z2", "Z4"] {
        let g = group(gs);
        let q = g.order();
        for ny in [2usize, 3] {
            let w = Dmc::random(g.clone(), ny, &mut rng);
            for n in 0..=2u32 {
                let spec = lib(TransformSpec::new(g.clone(), n))?;
                let nn = spec.len();
                let chans = lib(synthesize_exact(&w, n))?;
                let mut ys = vec![0; nn];
                for obs in 0..ny.pow(nn as u32) {
                    digits(obs, ny, &mut ys);
                    let table = lib(LikelihoodTable::from_outputs(&w, &ys))?;
                    for (i, ch) in chans.iter().enumerate() {
                        let mut prefix = vec![0; i];
                        for pi in 0..q.pow(i as u32) {
                            digits(pi, q, &mut prefix);
                            let out = obs * q.pow(i as u32) + pi;
                            let total: f64 = (0..q).map(|u| ch.prob(u, out)).sum();
                            let sc = lib(sc_conditional(&spec, &table, &prefix, i))?;
                            for (u, p) in sc.iter().enumerate() {
                                worst = worst.max((p - ch.prob(u, out) / total).abs());
                            }
                            cases += 1;
                        }
                    }
                }
            }
        }
    }
    check(worst < 1e-9, || format!("max deviation {worst:e}"))?;
    Ok(format!("{cases} cases over Z2 and Z4, n <= 2, max deviation {worst:.1e}"))
}

fn conservation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 1);
    let mut worst: f64 = 0.0;
    for gs in ["Z2", "Z4", "Z2xZ2"] {
        for _ in 0..10 {
            let ny = rng.gen_range(2..5);
            let w = Dmc::random(group(gs), ny, &mut rng);
            let minus = lib(w.minus_transform())?.symmetric_capacity();
            let plus = lib(w.plus_transform())?.symmetric_capacity();
            worst = worst.max((minus + plus - 2.0 * w.symmetric_capacity()).abs());
        }
    }
    check(worst < 1e-9, || format!("max deviation {worst:e}"))?;
    Ok(format!("30 random channels, max deviation {worst:.1e}"))
}

fn degradation_ordering() -> Outcome {
    let mut compared = 0;
    for agreement in [0.89, 0.75, 0.6] {
        let joint = lib(JointSource::dsbs(agreement))?;
        let (wc, ws) = source_test_channels(&joint);
        for n in 0..=3 {
            let (pc, ps) = (lib(exact_params(&wc, n))?, lib(exact_params(&ws, n))?);
            for i in 0..pc.len() {
                let (zc, zs) = (pc.z_d(i, 1), ps.z_d(i, 1));
                check(zc >= zs - 1e-12, || format!("source p {agreement} n {n} i {i}: {zc} < {zs}"))?;
                compared += 1;
            }
        }
    }
    for (w, p_x) in [
        (lib(Dmc::bsc(0.11))?, vec![0.5, 0.5]),
        (lib(Dmc::bec(0.4))?, vec![0.5, 0.5]),
        (lib(Dmc::z_channel(0.5))?, vec![0.6, 0.4]),
    ] {
        let (ws, wc) = lib(channel_test_channels(&p_x, &w))?;
        for n in 0..=3 {
            let (ps, pc) = (lib(exact_params(&ws, n))?, lib(exact_params(&wc, n))?);
            for i in 0..ps.len() {
                let (zs, zc) = (ps.z_d(i, 1), pc.z_d(i, 1));
                check(zs >= zc - 1e-12, || format!("channel n {n} i {i}: {zs} < {zc}"))?;
                compared += 1;
            }
        }
    }
    Ok(format!("{compared} exact comparisons, n <= 3"))
}

fn rate_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 3);
    let mut worst: f64 = 0.0;
    for k in 0..10 {
        let g = group(["Z2", "Z3", "Z4", "Z2xZ2"][k % 4]);
        let joint = JointSource::random(2 + k % 3, g.clone(), &mut rng);
        let (wc, ws) = source_test_channels(&joint);
        worst = worst.max((ws.symmetric_capacity() - wc.symmetric_capacity() - joint.mutual_information()).abs());
        let w = Dmc::random(g.clone(), 3, &mut rng);
        let p_x = StochasticMatrix::random(1, g.order(), &mut rng).row(0).to_vec();
        let (ws, wc) = lib(channel_test_channels(&p_x, &w))?;
        worst = worst.max((wc.symmetric_capacity() - ws.symmetric_capacity() - w.mutual_information(&p_x)).abs());
    }
    check(worst < 1e-9, || format!("max deviation {worst:e}"))?;
    Ok(format!("10 sources and 10 channels, max deviation {worst:.1e}"))
}

fn bss_bsc_source() -> Result<JointSource, String> {
    let test = lib(Dmc::bsc(0.11))?.to_matrix();
    lib(JointSource::from_test_channel(&[0.5, 0.5], &test, group("Z2")))
}

fn lossy_end_to_end() -> Outcome {
    let joint = bss_bsc_source()?;
    let r_target = lib(rate_distortion(&[0.5, 0.5], &hamming(2, 2), 0.11))?;
    check((r_target - (1.0 - h2(0.11))).abs() < 1e-6, || format!("oracle R(0.11) = {r_target}"))?;
    let mut points = Vec::new();
    for n in [10u32, 12] {
        let code = lib(build_source_code(&joint, n, 0.25, 10_000, SEED + n as u64))?;
        let blocks: Vec<Vec<usize>> = (0..100).map(|b| code.sample_source(SEED + 1000 + b)).collect();
        let d = lib(code.diagnostics(&blocks, SEED + 5))?;
        points.push((n, code.rate(), d.d_avg));
    }
    let (_, rate12, d12) = points[1];
    let (_, rate10, d10) = points[0];
    let summary =
        format!("n=10 rate {rate10:.4} D {d10:.4}; n=12 rate {rate12:.4} D {d12:.4}; oracle R(0.11) = {r_target:.5}");
    check(d12 <= 0.13 && rate12 <= 0.62, || format!("bounds missed: {summary}"))?;
    check(rate12 - r_target < rate10 - r_target, || format!("rate gap did not shrink: {summary}"))?;
    check(d12 - 0.11 < d10 - 0.11, || format!("distortion gap did not shrink: {summary}"))?;
    Ok(summary)
}

fn channel_end_to_end() -> Outcome {
    let w = lib(Dmc::bsc(0.11))?;
    let cap = lib(capacity(&w.to_matrix()))?.capacity;
    let mut rows = Vec::new();
    for n in [8u32, 10, 12] {
        let code = lib(build_channel_code(&[0.5, 0.5], &w, n, 0.25, 10_000, SEED + n as u64, Some(0.25)))?;
        let d = lib(code.diagnostics(1000, SEED + 7))?;
        check(code.net_rate() <= cap, || format!("n {n}: net rate {} above capacity", code.net_rate()))?;
        rows.push((n, code.net_rate(), d.bler));
    }
    let summary = rows.iter().map(|(n, r, b)| format!("n={n} rate {r:.4} BLER {b:.4}")).collect::<Vec<_>>().join("; ");
    check((rows[2].1 - 0.25).abs() < 1e-12, || format!("net rate at n = 12 is not 0.25: {summary}"))?;
    check(rows[2].2 <= 0.05, || format!("BLER too high: {summary}"))?;
    check(rows.windows(2).all(|p| p[1].2 <= p[0].2), || format!("BLER increased with n: {summary}"))?;
    Ok(format!("{summary}; capacity {cap:.5}"))
}

fn quaternary() -> Outcome {
    let g = group("Z4");
    let mut seen = BTreeSet::new();
    let mut notes = Vec::new();
    for (k, p) in [0.05, 0.15, 0.3, 0.45].into_iter().enumerate() {
        let w = lib(Dmc::qsc(g.clone(), p))?;
        let code = lib(build_channel_code(&[0.25; 4], &w, 10, 0.25, 2000, SEED + k as u64, None))?;
        let c = code.construction();
        let mut masses = [0usize; 3];
        for i in 0..c.len() {
            let order = c.k(i).order();
            let slot = [1, 2, 4].iter().position(|&o| o == order).expect("Z4 subgroup orders");
            masses[slot] += 1;
            seen.insert(order);
        }
        let report = code_rate(c);
        if c.reassigned() == 0 && c.demoted() == 0 {
            check(report.matches, || {
                format!("p {p}: rate {:?} != cross-check {:?}", report.exact, report.cross_check)
            })?;
        }
        notes.push(format!("p={p}: |K|=1,2,4 counts {masses:?} rate {:.4}", report.rate));
    }
    check(seen.len() == 3, || format!("subgroup cells realized: {seen:?}; {}", notes.join("; ")))?;

    // Asymmetric quaternary channel at its capacity-achieving input.
    let table = vec![
        0.80, 0.10, 0.05, 0.05, //
        0.05, 0.60, 0.30, 0.05, //
        0.10, 0.10, 0.70, 0.10, //
        0.30, 0.05, 0.05, 0.60,
    ];
    let w = lib(Dmc::new(g, 4, table))?;
    let cap = lib(capacity(&w.to_matrix()))?;
    check(cap.input.iter().any(|&p| (p - 0.25).abs() > 1e-3), || "capacity input is uniform".into())?;
    let code = lib(build_channel_code(&cap.input, &w, 10, 0.25, 2000, SEED + 9, None))?;
    let mut errors = 0;
    for b in 0..50u64 {
        let msg = code.random_message(b);
        let tx = lib(code.encode(&msg, b))?;
        let y = code.simulate(&tx.x, b);
        errors += usize::from(lib(code.decode(&y, &tx.side))? != msg);
    }
    Ok(format!(
        "{}; asymmetric channel p_X {:.3?}: 50 round trips, {errors} block errors, net rate {:.4} of capacity {:.4}",
        notes.join("; "),
        cap.input,
        code.net_rate(),
        cap.capacity
    ))
}

fn distribution_simulation() -> Outcome {
    let joint = bss_bsc_source()?;
    let code = lib(build_source_code(&joint, 10, 0.25, 10_000, SEED + 21))?;
    let blocks: Vec<Vec<usize>> = (0..200).map(|b| code.sample_source(SEED + 3000 + b)).collect();
    let d = lib(code.diagnostics(&blocks, SEED + 22))?;
    check(d.joint_tv <= 0.05, || format!("(x, u) TV {}", d.joint_tv))?;

    let w = lib(Dmc::bsc(0.11))?;
    let chan = lib(build_channel_code(&[0.5, 0.5], &w, 10, 0.25, 10_000, SEED + 23, Some(0.25)))?;
    let dc = lib(chan.diagnostics(200, SEED + 24))?;
    let symbols = (200 * chan.len()) as f64;
    let sigma = (0.25 / symbols).sqrt();
    for (x, &emp) in dc.x_marginal.iter().enumerate() {
        check((emp - 0.5).abs() <= 3.0 * sigma, || format!("x = {x}: {emp} vs 0.5 (sigma {sigma:e})"))?;
    }

    // Recorded: non-uniform shaping at the same length.
    let z = lib(Dmc::z_channel(0.5))?;
    let p_x = lib(capacity(&z.to_matrix()))?.input;
    let zc = lib(build_channel_code_guarded(&p_x, &z, 10, 0.25, 2000, DEFAULT_GUARD_SIGMAS, SEED + 25, None))?;
    let dz = lib(zc.diagnostics(200, SEED + 26))?;
    let z_dev = (dz.x_marginal[0] - p_x[0]).abs() / (p_x[0] * p_x[1] / symbols).sqrt();
    Ok(format!(
        "source (x, u) TV {:.4}; channel x marginal {:.6?} (sigma {sigma:.1e}); Z-channel x marginal off by {z_dev:.1} sigma",
        d.joint_tv, dc.x_marginal
    ))
}

fn small_n_tv() -> Outcome {
    let joint = lib(JointSource::dsbs(0.89))?;
    let (wc, ws) = source_test_channels(&joint);
    let mut tv = Vec::new();
    for n in [2u32, 3] {
        let c = lib(construct(
            &lib(exact_params(&wc, n))?,
            &lib(exact_params(&ws, n))?,
            CodeMode::Source,
            0.25,
            0.0,
            SEED,
        ))?;
        let code = lib(SourceCode::from_construction(c, joint.clone(), SEED))?;
        tv.push(lib(code.exact_tv())?);
    }
    check(tv.iter().all(|&t| t >= 0.0), || format!("negative TV {tv:?}"))?;
    check(tv[1] < tv[0], || format!("TV did not decrease from N = 4 to N = 8: {tv:?}"))?;

    // No frozen cells: the identity test channel and a noiseless channel code.
    let identity = lib(JointSource::from_test_channel(&[0.5, 0.5], &StochasticMatrix::identity(2), group("Z2")))?;
    let (wc, ws) = source_test_channels(&identity);
    let mut zero = Vec::new();
    for n in [2u32, 3] {
        let c = lib(construct(
            &lib(exact_params(&wc, n))?,
            &lib(exact_params(&ws, n))?,
            CodeMode::Source,
            0.25,
            0.0,
            SEED,
        ))?;
        check(c.roles().iter().all(|r| r.to_string() != "frozen"), || "identity source code has frozen cells".into())?;
        zero.push(lib(lib(SourceCode::from_construction(c, identity.clone(), SEED))?.exact_tv())?);
        let w = Dmc::identity(group("Z2"));
        let (ws, wc) = lib(channel_test_channels(&[0.5, 0.5], &w))?;
        let c = lib(construct(
            &lib(exact_params(&ws, n))?,
            &lib(exact_params(&wc, n))?,
            CodeMode::Channel,
            0.25,
            0.0,
            SEED,
        ))?;
        zero.push(lib(lib(ChannelCode::from_construction(c, w, vec![0.5, 0.5], SEED))?.exact_tv())?);
    }
    check(zero.iter().all(|t| t.abs() < 1e-12), || format!("TV without frozen cells: {zero:?}"))?;
    Ok(format!("DSBS(0.89) TV at N = 4, 8: {:.4}, {:.4}; without frozen cells: {zero:?}", tv[0], tv[1]))
}

fn determinism() -> Outcome {
    let base = PartialConfig {
        n: Some(vec![4, 6]),
        trials: Some(1000),
        blocks: Some(20),
        seed: Some(SEED),
        test_channel: Some(vec!["bsc:0.11".into(), "bsc:0.2".into()]),
        channel: Some(vec!["bsc:0.11".into(), "bec:0.3".into()]),
        rate_cap: Some(0.3),
        ..Default::default()
    };
    let mut sizes = Vec::new();
    for mode in [Mode::SweepRd, Mode::Quantize, Mode::SweepBler, Mode::Transmit] {
        let cfg = lib(ExperimentConfig::resolve(mode, base.clone(), None))?;
        let run =
            || if matches!(mode, Mode::SweepRd | Mode::Quantize) { run_rd_sweep(&cfg) } else { run_bler_sweep(&cfg) };
        let (a, b) = (lib(run())?, lib(run())?);
        check(a == b, || format!("{mode} CSV differs between runs"))?;
        sizes.push(format!("{mode} {} bytes", a.len()));
    }
    // The binary, writing files.
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    for cmd in ["sweep-rd", "sweep-bler"] {
        let mut outputs = Vec::new();
        for run in 0..2 {
            let path = dir.path().join(format!("{cmd}-{run}.csv"));
            let status = std::process::Command::new(env!("CARGO_BIN_EXE_npolar"))
                .args([cmd, "--n", "4,6", "--trials", "1000", "--blocks", "20", "--seed", "7", "--rate-cap", "0.3"])
                .arg("--out")
                .arg(&path)
                .status()
                .map_err(|e| e.to_string())?;
            check(status.success(), || format!("npolar {cmd} exited with {status}"))?;
            outputs.push(std::fs::read(&path).map_err(|e| e.to_string())?);
        }
        check(outputs[0] == outputs[1], || format!("npolar {cmd} files differ"))?;
        sizes.push(format!("npolar {cmd} files {} bytes", outputs[0].len()));
    }
    // Estimation itself, independent of the CSV layer.
    let w = lib(Dmc::bsc(0.2))?;
    let (a, b) = (lib(estimate_params(&w, 8, 2000, SEED))?, lib(estimate_params(&w, 8, 2000, SEED))?);
    check((0..a.len()).all(|i| a.z_d(i, 1).to_bits() == b.z_d(i, 1).to_bits()), || "estimates differ".into())?;
    Ok(sizes.join(", "))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("exact-oracle equivalence", exact_oracle, Duration::from_secs(60)),
        ("conservation", conservation, Duration::from_secs(60)),
        ("degradation ordering", degradation_ordering, Duration::from_secs(60)),
        ("rate identities", rate_identities, Duration::from_secs(60)),
        ("lossy coding end-to-end", lossy_end_to_end, Duration::from_secs(600)),
        ("channel coding end-to-end", channel_end_to_end, Duration::from_secs(900)),
        ("non-binary multilevel", quaternary, Duration::from_secs(900)),
        ("distribution simulation", distribution_simulation, Duration::from_secs(300)),
        ("small-N total variation", small_n_tv, Duration::from_secs(120)),
        ("sweep determinism", determinism, Duration::from_secs(600)),
    ];
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|s| s.parse().ok());
    let mut failed = 0;
    for (k, (name, run, budget)) in criteria.into_iter().enumerate() {
        if only.is_some_and(|o| o != k + 1) {
            continue;
        }
        let start = Instant::now();
        let result = run();
        let elapsed = start.elapsed();
        let (status, detail) = match result {
            Ok(d) if elapsed <= budget => ("PASS", d),
            Ok(d) => ("FAIL", format!("over the {budget:?} budget: {d}")),
            Err(d) => ("FAIL", d),
        };
        failed += usize::from(status == "FAIL");
        println!("criterion {:>2} [{status}] {name} ({:.1}s): {detail}", k + 1, elapsed.as_secs_f64());
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
