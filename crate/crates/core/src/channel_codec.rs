//! Nested polar channel code with shaping.
//!
//! The encoder samples the `T_H` part of every index from the `W_s` posterior
//! `l_j(u) = p_X(z_j - u)` so that `x = z - vG` follows `p_X`. The decoder
//! runs SC with `W_c` likelihoods `l_j(u) = p_X(z_j - u) W(y_j | z_j - u)` and
//! takes the argmax over `[v_i]_K + T_K`. Indices whose `K` is not inside `H`
//! ship their sampled `T_H` part out of band.

use rand::Rng;
use rayon::prelude::*;

use crate::codec::{argmax_in_coset, sample_in_coset, shared_randomness, subtract, Layout, TvEnumerator};
use crate::construction::{
    code_rate, construct, estimate_params, CodeMode, ExactRate, NestedConstruction, RateReport, Role,
    DEFAULT_GUARD_SIGMAS,
};
use crate::dmc::{channel_test_channels, Dmc};
use crate::error::{Error, Result};
use crate::group::{Element, Subgroup};
use crate::polar::{digits, LikelihoodTable, ScEngine, TransformSpec};
use crate::rng::{derive_seed, sample_weighted, streams, substream, RowSampler};

/// Largest `q^N * q^N` accepted by [`ChannelCode::exact_tv`].
pub const EXACT_TV_BOUND: usize = 1 << 28;

#[derive(Debug, Clone)]
pub struct ChannelCode {
    construction: NestedConstruction,
    channel: Dmc,
    p_x: Vec<f64>,
    ws: Dmc,
    wc: Dmc,
    spec: TransformSpec,
    layout: Layout,
    dither: Vec<Element>,
    frozen: Vec<Element>,
    seed: u64,
    hash: [u8; 32],
}

/// Estimate `W_s` and `W_c`, nest them in channel mode, optionally cap the net
/// rate, and draw the shared randomness.
pub fn build_channel_code(
    p_x: &[f64],
    w: &Dmc,
    n: u32,
    beta: f64,
    trials: usize,
    seed: u64,
    rate_cap: Option<f64>,
) -> Result<ChannelCode> {
    build_channel_code_guarded(p_x, w, n, beta, trials, DEFAULT_GUARD_SIGMAS, seed, rate_cap)
}

/// [`build_channel_code`] with an explicit estimation guard.
#[allow(clippy::too_many_arguments)]
pub fn build_channel_code_guarded(
    p_x: &[f64],
    w: &Dmc,
    n: u32,
    beta: f64,
    trials: usize,
    guard_sigmas: f64,
    seed: u64,
    rate_cap: Option<f64>,
) -> Result<ChannelCode> {
    let (ws, wc) = channel_test_channels(p_x, w)?;
    let ps = estimate_params(&ws, n, trials, derive_seed(seed, streams::ESTIMATE_A))?;
    let pc = estimate_params(&wc, n, trials, derive_seed(seed, streams::ESTIMATE_B))?;
    let mut c = construct(&ps, &pc, CodeMode::Channel, beta, guard_sigmas, seed)?;
    if let Some(cap) = rate_cap {
        c.apply_rate_cap(cap)?;
    }
    ChannelCode::from_construction(c, w.clone(), p_x.to_vec(), seed)
}

impl ChannelCode {
    pub fn from_construction(construction: NestedConstruction, channel: Dmc, p_x: Vec<f64>, seed: u64) -> Result<Self> {
        if construction.mode() != CodeMode::Channel {
            return Err(Error::InvalidParameter("channel code needs a channel-mode construction".into()));
        }
        if construction.group() != channel.group() {
            return Err(Error::HashMismatch);
        }
        let (ws, wc) = channel_test_channels(&p_x, &channel)?;
        let group = construction.group().clone();
        let spec = TransformSpec::new(group.clone(), construction.n())?;
        let layout = Layout::new(&construction)?;
        let (dither, frozen) = shared_randomness(&group, &layout, spec.len(), seed);
        let hash = construction.hash();
        Ok(ChannelCode { construction, channel, p_x, ws, wc, spec, layout, dither, frozen, seed, hash })
    }

    pub fn construction(&self) -> &NestedConstruction {
        &self.construction
    }

    pub fn channel(&self) -> &Dmc {
        &self.channel
    }

    pub fn input_distribution(&self) -> &[f64] {
        &self.p_x
    }

    /// `(W_s, W_c)`.
    pub fn test_channels(&self) -> (&Dmc, &Dmc) {
        (&self.ws, &self.wc)
    }

    pub fn len(&self) -> usize {
        self.spec.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dither(&self) -> &[Element] {
        &self.dither
    }

    pub fn frozen_values(&self) -> &[Element] {
        &self.frozen
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn hash(&self) -> [u8; 32] {
        self.hash
    }

    pub fn rates(&self) -> RateReport {
        code_rate(&self.construction)
    }

    pub fn gross_rate(&self) -> f64 {
        self.rates().rate
    }

    pub fn side_rate(&self) -> f64 {
        self.rates().side.value() + 0.0
    }

    pub fn net_rate(&self) -> f64 {
        self.rates().net_rate()
    }

    /// Fraction of indices that need side information.
    pub fn side_fraction(&self) -> f64 {
        self.construction.side_indices().len() as f64 / self.len() as f64
    }

    /// Radix of each message digit, in index order.
    pub fn message_radices(&self) -> Vec<usize> {
        self.construction.message_indices().iter().map(|&i| self.construction.message_radix(i)).collect()
    }

    fn side_radices(&self) -> Vec<usize> {
        self.construction.side_indices().iter().map(|&i| self.construction.side_radix(i)).collect()
    }

    /// A uniformly random message.
    pub fn random_message(&self, seed: u64) -> Vec<usize> {
        let mut rng = substream(seed, streams::MESSAGE);
        self.message_radices().iter().map(|&r| rng.gen_range(0..r)).collect()
    }

    /// Encode `message` (one digit per message cell). `sampling_seed` drives
    /// the shaping samples.
    pub fn encode(&self, message: &[usize], sampling_seed: u64) -> Result<Transmission> {
        Ok(self.encode_inner(message, sampling_seed)?.0)
    }

    fn encode_inner(&self, message: &[usize], sampling_seed: u64) -> Result<(Transmission, f64, usize)> {
        let radices = self.message_radices();
        if message.len() != radices.len() {
            return Err(Error::LengthMismatch { expected: radices.len(), found: message.len() });
        }
        if let Some((d, r)) = message.iter().zip(&radices).find(|(d, r)| d >= r) {
            return Err(Error::InvalidParameter(format!("message digit {d} exceeds radix {r}")));
        }
        let g = self.construction.group();
        let nn = self.len();
        let table = LikelihoodTable::from_fn(nn, g.order(), |j, u| self.p_x[g.sub(self.dither[j], u)])?;
        let mut rng = substream(sampling_seed, streams::SAMPLING);
        let mut engine = ScEngine::new(self.spec.clone());
        let mut buf = Vec::new();
        let mut side = Vec::new();
        let mut next = 0;
        let (mut flat_sum, mut flat_count) = (0.0, 0);
        let v = engine.run::<Error, _>(&table, |i, post| {
            let slot = self.layout.at(i);
            let h = slot.cosets.h();
            if h.order() > 1 {
                flat_sum += coset_flatness(g, post, h, &slot.t_h);
                flat_count += 1;
            }
            let mut base = self.frozen[i];
            let role = self.construction.role(i);
            if role == Role::Message {
                base = g.add(base, slot.t_kh[message[next]]);
                next += 1;
            }
            let pos = sample_in_coset(g, post, base, slot.t_h.iter().copied(), &mut buf, &mut rng, i)?;
            if role == Role::SideInfo {
                side.push(pos);
            }
            Ok(g.add(base, slot.t_h[pos]))
        })?;
        let x = subtract(g, &self.dither, &self.spec.transform(&v)?);
        let side = SideInfo { digits: side, radices: self.side_radices() };
        Ok((Transmission { x, side, v }, flat_sum, flat_count))
    }

    /// Pass `x` through the physical channel.
    pub fn simulate(&self, x: &[Element], noise_seed: u64) -> Vec<usize> {
        let sampler = RowSampler::new(self.channel.table(), self.channel.output_size());
        let mut rng = substream(noise_seed, streams::NOISE);
        x.iter().map(|&xj| sampler.sample(xj, &mut rng)).collect()
    }

    /// Message estimate from the channel output and the side information.
    pub fn decode(&self, y: &[usize], side: &SideInfo) -> Result<Vec<usize>> {
        Ok(self.decode_full(y, side)?.message)
    }

    pub fn decode_full(&self, y: &[usize], side: &SideInfo) -> Result<ChannelDecoded> {
        self.decode_with(y, &self.dither, &self.frozen, side)
    }

    fn decode_with(&self, y: &[usize], z: &[Element], frozen: &[Element], side: &SideInfo) -> Result<ChannelDecoded> {
        let nn = self.len();
        if y.len() != nn {
            return Err(Error::LengthMismatch { expected: nn, found: y.len() });
        }
        if let Some(&bad) = y.iter().find(|&&o| o >= self.channel.output_size()) {
            return Err(Error::AlphabetMismatch { expected: self.channel.output_size(), found: bad + 1 });
        }
        let side_radices = self.side_radices();
        if side.digits.len() != side_radices.len() || side.radices != side_radices {
            return Err(Error::LengthMismatch { expected: side_radices.len(), found: side.digits.len() });
        }
        let g = self.construction.group();
        let table = LikelihoodTable::from_fn(nn, g.order(), |j, u| {
            let x = g.sub(z[j], u);
            self.p_x[x] * self.channel.prob(x, y[j])
        });
        // All-zero evidence at a position cannot be ruled out for arbitrary
        // outputs; fall back to flat likelihoods there.
        let table = match table {
            Ok(t) => t,
            Err(_) => LikelihoodTable::from_fn(nn, g.order(), |j, u| {
                let x = g.sub(z[j], u);
                let l = self.p_x[x] * self.channel.prob(x, y[j]);
                let any = (0..g.order()).any(|w| {
                    let xw = g.sub(z[j], w);
                    self.p_x[xw] * self.channel.prob(xw, y[j]) > 0.0
                });
                if any {
                    l
                } else {
                    1.0
                }
            })?,
        };
        let mut engine = ScEngine::new(self.spec.clone());
        let mut message = Vec::new();
        let mut next_side = 0;
        let v = engine.run::<Error, _>(&table, |i, post| {
            let slot = self.layout.at(i);
            let base = frozen[i];
            match self.construction.role(i) {
                Role::SideInfo => {
                    let d = side.digits[next_side];
                    next_side += 1;
                    let t = *slot
                        .t_h
                        .get(d)
                        .ok_or_else(|| Error::InvalidParameter(format!("side digit {d} out of range")))?;
                    Ok(g.add(base, t))
                }
                role => {
                    let pos = argmax_in_coset(g, post, base, slot.t_k.iter().map(|&(_, o)| o));
                    let (m, offset) = slot.t_k[pos];
                    if role == Role::Message {
                        message.push(m);
                    }
                    Ok(g.add(base, offset))
                }
            }
        })?;
        Ok(ChannelDecoded { message, v })
    }

    /// Block error rate, the exact-shaping genie error rate, the shaping
    /// statistics, and the small-N exact total variation.
    pub fn diagnostics(&self, blocks: usize, seed: u64) -> Result<ChannelDiagnostics> {
        if blocks == 0 {
            return Err(Error::InvalidParameter("diagnostics need at least one block".into()));
        }
        let (q, ny) = (self.construction.group().order(), self.channel.output_size());
        let per_block: Vec<Result<ChannelBlock>> = (0..blocks)
            .into_par_iter()
            .map(|b| {
                let bs = derive_seed(seed, b as u64);
                let message = self.random_message(bs);
                let (tx, flat_sum, flat_count) = self.encode_inner(&message, bs)?;
                let y = self.simulate(&tx.x, bs);
                let decoded = self.decode(&y, &tx.side)?;
                let mut joint = vec![0usize; q * ny];
                for (&x, &o) in tx.x.iter().zip(&y) {
                    joint[x * ny + o] += 1;
                }
                Ok(ChannelBlock {
                    error: decoded != message,
                    genie_error: self.genie_block(derive_seed(bs, streams::SAMPLING))?,
                    flat_sum,
                    flat_count,
                    joint,
                })
            })
            .collect();
        let mut errors = 0;
        let mut genie_errors = 0;
        let (mut flat_sum, mut flat_count) = (0.0, 0);
        let mut joint = vec![0usize; q * ny];
        for b in per_block {
            let b = b?;
            errors += usize::from(b.error);
            genie_errors += usize::from(b.genie_error);
            flat_sum += b.flat_sum;
            flat_count += b.flat_count;
            joint.iter_mut().zip(&b.joint).for_each(|(a, c)| *a += c);
        }
        let symbols = (blocks * self.len()) as f64;
        let empirical: Vec<f64> = joint.iter().map(|&c| c as f64 / symbols).collect();
        let mut x_marginal = vec![0.0; q];
        for (k, &p) in empirical.iter().enumerate() {
            x_marginal[k / ny] += p;
        }
        let mut xy_tv = 0.0;
        for x in 0..q {
            for o in 0..ny {
                xy_tv += (empirical[x * ny + o] - self.p_x[x] * self.channel.prob(x, o)).abs();
            }
        }
        Ok(ChannelDiagnostics {
            blocks,
            bler: errors as f64 / blocks as f64,
            p1_proxy: genie_errors as f64 / blocks as f64,
            frozen_flatness: if flat_count > 0 { flat_sum / flat_count as f64 } else { 0.0 },
            x_marginal,
            xy_joint: empirical,
            xy_tv: 0.5 * xy_tv,
            exact_tv: if self.len() <= 8 { self.exact_tv().ok() } else { None },
        })
    }

    /// One block drawn from the true law: uniform `v`, `x` i.i.d. `p_X`,
    /// `z = x + vG`. The decoder gets the true shared components of `v`.
    fn genie_block(&self, seed: u64) -> Result<bool> {
        let g = self.construction.group();
        let nn = self.len();
        let mut rng = substream(seed, streams::SAMPLING);
        let v: Vec<Element> = (0..nn).map(|_| rng.gen_range(0..g.order())).collect();
        let x: Vec<Element> = (0..nn).map(|_| sample_weighted(&self.p_x, &mut rng).expect("p_X has mass")).collect();
        let s = self.spec.transform(&v)?;
        let z: Vec<Element> = x.iter().zip(&s).map(|(&a, &b)| g.add(a, b)).collect();
        let y = self.simulate(&x, seed);
        let mut frozen = vec![0; nn];
        let mut side = Vec::new();
        let mut message = Vec::new();
        for i in 0..nn {
            let slot = self.layout.at(i);
            let (k, m, t) = slot.cosets.decompose(v[i]);
            frozen[i] = k;
            match self.construction.role(i) {
                Role::SideInfo => side.push(slot.t_h.iter().position(|&r| r == t).expect("t in T_H")),
                Role::Message => message.push(slot.t_kh.iter().position(|&r| r == m).expect("m in T_K<=H")),
                _ => {}
            }
        }
        let side = SideInfo { digits: side, radices: self.side_radices() };
        Ok(self.decode_with(&y, &z, &frozen, &side)?.message != message)
    }

    /// Exact total variation between the true law of `(v, z)` and the
    /// encoder's law with uniform `[v_i]_H` components.
    pub fn exact_tv(&self) -> Result<f64> {
        let g = self.construction.group();
        let (q, nn) = (g.order(), self.len());
        let cells = q.checked_pow(2 * nn as u32);
        match cells {
            Some(c) if c <= EXACT_TV_BOUND => {}
            c => return Err(Error::SynthesisTooLarge { cells: c.unwrap_or(usize::MAX), bound: EXACT_TV_BOUND }),
        }
        let parts: Vec<&Subgroup> = (0..nn).map(|i| self.layout.at(i).cosets.h()).collect();
        let enumerator = TvEnumerator::new(&self.spec, &parts)?;
        let scale = (q as f64).powi(-(nn as i32));
        let n_z = q.pow(nn as u32);
        let sums: Vec<f64> = (0..n_z)
            .into_par_iter()
            .map_init(
                || (enumerator.clone(), vec![0; nn], vec![0.0; nn * q]),
                |(e, z, lik), zi| {
                    digits(zi, q, z);
                    for j in 0..nn {
                        for u in 0..q {
                            lik[j * q + u] = self.p_x[g.sub(z[j], u)];
                        }
                    }
                    let (mass, l1) = e.l1(lik);
                    scale * mass * l1
                },
            )
            .collect();
        Ok(0.5 * sums.iter().sum::<f64>())
    }
}

/// Total variation between the posterior mass of the cosets `h + T_H`,
/// `h` in `H`, and the uniform law on `H`.
fn coset_flatness(g: &crate::group::FiniteAbelianGroup, post: &[f64], h: &Subgroup, t_h: &[Element]) -> f64 {
    let total: f64 = post.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    let uniform = 1.0 / h.order() as f64;
    0.5 * h
        .elements()
        .iter()
        .map(|&e| {
            let mass: f64 = t_h.iter().map(|&t| post[g.add(e, t)]).sum::<f64>() / total;
            (mass - uniform).abs()
        })
        .sum::<f64>()
}

struct ChannelBlock {
    error: bool,
    genie_error: bool,
    flat_sum: f64,
    flat_count: usize,
    joint: Vec<usize>,
}

/// Sampled `T_H` parts of the side-information cells, one digit of radix
/// `q / |H|` per cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SideInfo {
    digits: Vec<usize>,
    radices: Vec<usize>,
}

impl SideInfo {
    pub fn digits(&self) -> &[usize] {
        &self.digits
    }

    pub fn radices(&self) -> &[usize] {
        &self.radices
    }

    pub fn is_empty(&self) -> bool {
        self.digits.is_empty()
    }

    pub fn bit_length(&self) -> f64 {
        self.radices.iter().map(|&r| (r as f64).log2()).sum()
    }

    pub fn exact_bits(&self, len: usize) -> ExactRate {
        let mut r = ExactRate::new(len);
        for &radix in &self.radices {
            r.add_log_ratio(radix, 1, 1);
        }
        r
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transmission {
    pub x: Vec<Element>,
    pub side: SideInfo,
    /// Encoder-private `v`; the decoder never reads it.
    pub v: Vec<Element>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelDecoded {
    pub message: Vec<usize>,
    pub v: Vec<Element>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelDiagnostics {
    pub blocks: usize,
    pub bler: f64,
    /// Block error rate when `(v, z)` follows the true law and the decoder
    /// knows the shared components.
    pub p1_proxy: f64,
    /// Mean total variation between the posterior of `[v_i]_H` and uniform,
    /// over indices with nontrivial `H`.
    pub frozen_flatness: f64,
    pub x_marginal: Vec<f64>,
    /// Empirical `(x, y)` law indexed `[x * |Y| + y]`.
    pub xy_joint: Vec<f64>,
    /// Total variation between the empirical `(x, y)` law and `p_X x W`.
    pub xy_tv: f64,
    pub exact_tv: Option<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::construction::{exact_params, nest_partitions, EstimatorMeta, SubgroupPartition};
    use crate::group::FiniteAbelianGroup;

    fn exact_code(p_x: &[f64], w: &Dmc, n: u32, beta: f64, seed: u64) -> ChannelCode {
        let (ws, wc) = channel_test_channels(p_x, w).unwrap();
        let c = construct(
            &exact_params(&ws, n).unwrap(),
            &exact_params(&wc, n).unwrap(),
            CodeMode::Channel,
            beta,
            0.0,
            seed,
        )
        .unwrap();
        ChannelCode::from_construction(c, w.clone(), p_x.to_vec(), seed).unwrap()
    }

    fn fixed_code(w: &Dmc, p_x: &[f64], n: u32, a: usize, b: usize) -> ChannelCode {
        let g = w.group().clone();
        let lattice = g.enumerate_subgroups().unwrap();
        let nn = 1 << n;
        let c = nest_partitions(
            SubgroupPartition::from_labels(vec![a; nn]),
            SubgroupPartition::from_labels(vec![b; nn]),
            CodeMode::Channel,
            lattice,
            n,
            0.25,
            vec![0.0; nn],
            EstimatorMeta { method: "exact".into(), seed: 0, trials: 0, skipped_a: 0, skipped_b: 0, guard_sigmas: 0.0 },
        )
        .unwrap();
        ChannelCode::from_construction(c, w.clone(), p_x.to_vec(), 5).unwrap()
    }

    #[test]
    fn noiseless_round_trip_is_exhaustive() {
        for q in [2usize, 3, 4] {
            let g = FiniteAbelianGroup::cyclic(q).unwrap();
            let w = Dmc::identity(g);
            let p_x = vec![1.0 / q as f64; q];
            for n in 0..=3u32 {
                if q.pow(1 << n) > 70_000 {
                    continue;
                }
                let code = exact_code(&p_x, &w, n, 0.25, 3);
                assert!((code.net_rate() - (q as f64).log2()).abs() < 1e-12, "q {q} n {n}");
                assert!(code.construction().side_indices().is_empty());
                let radices = code.message_radices();
                let total: usize = radices.iter().product();
                let mut msg = vec![0; radices.len()];
                for index in 0..total {
                    let mut rest = index;
                    for (d, &r) in msg.iter_mut().zip(&radices).rev() {
                        *d = rest % r;
                        rest /= r;
                    }
                    let tx = code.encode(&msg, index as u64).unwrap();
                    let y = code.simulate(&tx.x, 0);
                    assert_eq!(code.decode(&y, &tx.side).unwrap(), msg);
                }
            }
        }
    }

    #[test]
    fn noiseless_encoding_is_deterministic_in_message() {
        let w = Dmc::identity(FiniteAbelianGroup::cyclic(2).unwrap());
        let code = exact_code(&[0.5, 0.5], &w, 3, 0.25, 1);
        let msg = code.random_message(4);
        assert_eq!(code.encode(&msg, 1).unwrap().x, code.encode(&msg, 2).unwrap().x);
    }

    #[test]
    fn useless_channel_has_no_message() {
        let w = Dmc::useless(FiniteAbelianGroup::cyclic(2).unwrap(), &[0.5, 0.5]).unwrap();
        let code = exact_code(&[0.5, 0.5], &w, 3, 0.25, 1);
        assert_eq!(code.gross_rate(), 0.0);
        let tx = code.encode(&[], 0).unwrap();
        assert!(code.decode(&code.simulate(&tx.x, 1), &tx.side).unwrap().is_empty());
    }

    #[test]
    fn all_frozen_code_ignores_message() {
        let w = Dmc::bsc(0.1).unwrap();
        let code = fixed_code(&w, &[0.5, 0.5], 2, 1, 1);
        let g = w.group();
        let whole = code.construction().lattice().iter().position(|h| h.order() == 2).unwrap();
        assert_eq!(whole, 1);
        let spec = TransformSpec::new(g.clone(), 2).unwrap();
        let expected = subtract(g, code.dither(), &spec.transform(code.frozen_values()).unwrap());
        assert_eq!(code.encode(&[], 3).unwrap().x, expected);
    }

    #[test]
    fn message_length_is_checked() {
        let w = Dmc::bsc(0.1).unwrap();
        let code = fixed_code(&w, &[0.5, 0.5], 2, 1, 0);
        assert_eq!(code.message_radices(), vec![2; 4]);
        assert!(matches!(code.encode(&[0, 1], 0), Err(Error::LengthMismatch { .. })));
        assert!(code.encode(&[0, 1, 2, 0], 0).is_err());
    }

    #[test]
    fn rate_accounting_identity() {
        let w = Dmc::z_channel(0.3).unwrap();
        let code = build_channel_code(&[0.6, 0.4], &w, 5, 0.25, 300, 2, None).unwrap();
        let r = code.rates();
        assert!((r.rate - r.side.value() - code.net_rate()).abs() < 1e-15);
        let msg = code.random_message(1);
        let tx = code.encode(&msg, 1).unwrap();
        assert_eq!(tx.side.exact_bits(code.len()), r.side);
    }

    #[test]
    fn decoder_ignores_encoder_private_state() {
        let w = Dmc::bsc(0.05).unwrap();
        let code = build_channel_code(&[0.5, 0.5], &w, 4, 0.25, 300, 6, None).unwrap();
        let msg = code.random_message(2);
        let mut tx = code.encode(&msg, 3).unwrap();
        let y = code.simulate(&tx.x, 4);
        let before = code.decode_full(&y, &tx.side).unwrap();
        tx.v.iter_mut().for_each(|v| *v ^= 1);
        let after = code.decode_full(&y, &tx.side).unwrap();
        assert_eq!(before, after);
    }

    #[test]
    fn exact_tv_zero_when_everything_is_sampled() {
        let w = Dmc::bsc(0.1).unwrap();
        // H = K = {0}: every component sampled.
        let code = fixed_code(&w, &[0.7, 0.3], 2, 0, 0);
        assert!(code.exact_tv().unwrap().abs() < 1e-12);
        let frozen = fixed_code(&w, &[0.7, 0.3], 2, 1, 1);
        assert!(frozen.exact_tv().unwrap() > 0.0);
    }

    #[test]
    fn diagnostics_are_deterministic() {
        let w = Dmc::bsc(0.05).unwrap();
        let code = build_channel_code(&[0.5, 0.5], &w, 4, 0.25, 300, 6, Some(0.3)).unwrap();
        let a = code.diagnostics(20, 1).unwrap();
        let b = code.diagnostics(20, 1).unwrap();
        assert_eq!(a, b);
        assert!(a.exact_tv.is_none());
        assert!(code.net_rate() <= 0.3 + 1e-12);
    }
}
