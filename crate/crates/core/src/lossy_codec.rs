//! Nested polar lossy source code.
//!
//! The encoder sees `x` and the shared dither `z`, samples `v` index by index
//! from the `W_s` posterior with `l_j(s) = p_XU(x_j, z_j - s)` restricted to
//! the coset of the frozen component, and sends the `T_{K<=H}` parts. The
//! decoder rebuilds `v` with `W_c` likelihoods `l_j(s) = p_U(z_j - s)` and
//! outputs `u = z - vG`.

use num_bigint::BigUint;
use rayon::prelude::*;

use crate::codec::{argmax_in_coset, sample_in_coset, shared_randomness, subtract, Layout, TvEnumerator};
use crate::construction::{
    code_rate, construct, estimate_params, CodeMode, ExactRate, NestedConstruction, Role, DEFAULT_GUARD_SIGMAS,
};
use crate::dmc::{source_test_channels, Dmc, JointSource};
use crate::error::{Error, Result};
use crate::group::{Element, Subgroup};
use crate::polar::{digits, LikelihoodTable, ScEngine, TransformSpec};
use crate::rng::{derive_seed, sample_weighted, streams, substream};

const MESSAGE_MAGIC: &[u8; 4] = b"NPQM";
pub const MESSAGE_VERSION: u32 = 1;
/// Largest `(|X| q)^N q^N` accepted by [`SourceCode::exact_tv`].
pub const EXACT_TV_BOUND: usize = 1 << 28;

#[derive(Debug, Clone)]
pub struct SourceCode {
    construction: NestedConstruction,
    joint: JointSource,
    wc: Dmc,
    ws: Dmc,
    /// `d(x, u)` indexed `[x * q + u]`.
    distortion: Vec<f64>,
    spec: TransformSpec,
    layout: Layout,
    dither: Vec<Element>,
    frozen: Vec<Element>,
    seed: u64,
    hash: [u8; 32],
}

/// Estimate both test-channel parameter sets, nest them in source mode and
/// draw the shared randomness, all from `seed`.
pub fn build_source_code(joint: &JointSource, n: u32, beta: f64, trials: usize, seed: u64) -> Result<SourceCode> {
    build_source_code_guarded(joint, n, beta, trials, DEFAULT_GUARD_SIGMAS, seed)
}

/// [`build_source_code`] with an explicit estimation guard.
pub fn build_source_code_guarded(
    joint: &JointSource,
    n: u32,
    beta: f64,
    trials: usize,
    guard_sigmas: f64,
    seed: u64,
) -> Result<SourceCode> {
    let (wc, ws) = source_test_channels(joint);
    let pc = estimate_params(&wc, n, trials, derive_seed(seed, streams::ESTIMATE_A))?;
    let ps = estimate_params(&ws, n, trials, derive_seed(seed, streams::ESTIMATE_B))?;
    let c = construct(&pc, &ps, CodeMode::Source, beta, guard_sigmas, seed)?;
    SourceCode::from_construction(c, joint.clone(), seed)
}

/// Hamming distortion between source letter `x` and group element `u`.
pub fn hamming_table(x_size: usize, q: usize) -> Vec<f64> {
    (0..x_size * q).map(|i| if i / q == i % q { 0.0 } else { 1.0 }).collect()
}

impl SourceCode {
    pub fn from_construction(construction: NestedConstruction, joint: JointSource, seed: u64) -> Result<Self> {
        if construction.mode() != CodeMode::Source {
            return Err(Error::InvalidParameter("source code needs a source-mode construction".into()));
        }
        if construction.group() != joint.u_group() {
            return Err(Error::HashMismatch);
        }
        let group = construction.group().clone();
        let spec = TransformSpec::new(group.clone(), construction.n())?;
        let layout = Layout::new(&construction)?;
        let (dither, frozen) = shared_randomness(&group, &layout, spec.len(), seed);
        let (wc, ws) = source_test_channels(&joint);
        let hash = construction.hash();
        Ok(SourceCode {
            distortion: hamming_table(joint.x_size(), group.order()),
            construction,
            joint,
            wc,
            ws,
            spec,
            layout,
            dither,
            frozen,
            seed,
            hash,
        })
    }

    /// Replace the default Hamming table; `table[x][u]`.
    pub fn with_distortion(mut self, table: &[Vec<f64>]) -> Result<Self> {
        let q = self.construction.group().order();
        if table.len() != self.joint.x_size() {
            return Err(Error::AlphabetMismatch { expected: self.joint.x_size(), found: table.len() });
        }
        let mut flat = Vec::with_capacity(table.len() * q);
        for row in table {
            if row.len() != q {
                return Err(Error::AlphabetMismatch { expected: q, found: row.len() });
            }
            if row.iter().any(|&d| !(d >= 0.0) || !d.is_finite()) {
                return Err(Error::InvalidParameter("distortions must be finite and nonnegative".into()));
            }
            flat.extend_from_slice(row);
        }
        self.distortion = flat;
        Ok(self)
    }

    pub fn construction(&self) -> &NestedConstruction {
        &self.construction
    }

    pub fn joint(&self) -> &JointSource {
        &self.joint
    }

    /// `(W_c, W_s)`.
    pub fn test_channels(&self) -> (&Dmc, &Dmc) {
        (&self.wc, &self.ws)
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

    /// Message bits per source symbol.
    pub fn rate(&self) -> f64 {
        code_rate(&self.construction).rate
    }

    pub fn d_max(&self) -> f64 {
        self.distortion.iter().cloned().fold(0.0, f64::max)
    }

    /// `(1/N) sum_j d(x_j, u_j)`.
    pub fn distortion(&self, x: &[usize], u: &[Element]) -> f64 {
        let q = self.construction.group().order();
        x.iter().zip(u).map(|(&a, &b)| self.distortion[a * q + b]).sum::<f64>() / x.len() as f64
    }

    fn radices(&self) -> Vec<usize> {
        self.construction.message_indices().iter().map(|&i| self.construction.message_radix(i)).collect()
    }

    /// Draw a block of `N` source letters from `p_X`.
    pub fn sample_source(&self, seed: u64) -> Vec<usize> {
        let p_x = self.joint.p_x();
        let mut rng = substream(seed, streams::MESSAGE);
        (0..self.len()).map(|_| sample_weighted(&p_x, &mut rng).expect("p_X has mass")).collect()
    }

    /// Randomized-rounding encoder. `sampling_seed` drives the rounding only.
    pub fn encode(&self, x: &[usize], sampling_seed: u64) -> Result<Encoded> {
        let nn = self.len();
        if x.len() != nn {
            return Err(Error::LengthMismatch { expected: nn, found: x.len() });
        }
        if let Some(&bad) = x.iter().find(|&&a| a >= self.joint.x_size()) {
            return Err(Error::AlphabetMismatch { expected: self.joint.x_size(), found: bad + 1 });
        }
        let g = self.construction.group();
        let table = LikelihoodTable::from_fn(nn, g.order(), |j, s| self.joint.p(x[j], g.sub(self.dither[j], s)))?;
        let mut rng = substream(sampling_seed, streams::SAMPLING);
        let mut engine = ScEngine::new(self.spec.clone());
        let mut buf = Vec::new();
        let mut message = Vec::new();
        let v = engine.run::<Error, _>(&table, |i, post| {
            let slot = self.layout.at(i);
            let base = self.frozen[i];
            let pos = sample_in_coset(g, post, base, slot.t_k.iter().map(|&(_, o)| o), &mut buf, &mut rng, i)?;
            let (m, offset) = slot.t_k[pos];
            if self.construction.role(i) == Role::Message {
                message.push(m);
            }
            Ok(g.add(base, offset))
        })?;
        let u = subtract(g, &self.dither, &self.spec.transform(&v)?);
        Ok(Encoded { message: QuantizedMessage { digits: message, radices: self.radices(), hash: self.hash }, v, u })
    }

    /// Reconstruction `u = z - vG`.
    pub fn decode(&self, msg: &QuantizedMessage) -> Result<Vec<Element>> {
        Ok(self.decode_full(msg)?.u)
    }

    /// Reconstruction together with the decoded `v`.
    pub fn decode_full(&self, msg: &QuantizedMessage) -> Result<Decoded> {
        if msg.hash != self.hash {
            return Err(Error::HashMismatch);
        }
        let radices = self.radices();
        if msg.digits.len() != radices.len() {
            return Err(Error::LengthMismatch { expected: radices.len(), found: msg.digits.len() });
        }
        let g = self.construction.group();
        let p_u = self.joint.p_u();
        let nn = self.len();
        let table = LikelihoodTable::from_fn(nn, g.order(), |j, s| p_u[g.sub(self.dither[j], s)])?;
        let mut engine = ScEngine::new(self.spec.clone());
        let mut next = 0;
        let v = engine.run::<Error, _>(&table, |i, post| {
            let slot = self.layout.at(i);
            let mut base = self.frozen[i];
            if self.construction.role(i) == Role::Message {
                let d = msg.digits[next];
                next += 1;
                let m = *slot
                    .t_kh
                    .get(d)
                    .ok_or_else(|| Error::InvalidParameter(format!("message digit {d} out of range")))?;
                base = g.add(base, m);
            }
            let pos = argmax_in_coset(g, post, base, slot.t_h.iter().copied());
            Ok(g.add(base, slot.t_h[pos]))
        })?;
        let u = subtract(g, &self.dither, &self.spec.transform(&v)?);
        Ok(Decoded { v, u })
    }

    /// Distortion diagnostics over the given source blocks. Block `b` is
    /// encoded with a sampling seed derived from `(seed, b)`.
    pub fn diagnostics(&self, blocks: &[Vec<usize>], seed: u64) -> Result<SourceDiagnostics> {
        if blocks.is_empty() {
            return Err(Error::InvalidParameter("diagnostics need at least one block".into()));
        }
        let q = self.construction.group().order();
        let nx = self.joint.x_size();
        let per_block: Vec<Result<BlockStats>> = blocks
            .par_iter()
            .enumerate()
            .map(|(b, x)| {
                let enc = self.encode(x, derive_seed(seed, b as u64))?;
                let dec = self.decode_full(&enc.message)?;
                let mut joint = vec![0usize; nx * q];
                for (&a, &u) in x.iter().zip(&enc.u) {
                    joint[a * q + u] += 1;
                }
                Ok(BlockStats {
                    distortion: self.distortion(x, &dec.u),
                    genie: self.distortion(x, &enc.u),
                    mismatch: dec.v.iter().zip(&enc.v).filter(|(a, b)| a != b).count(),
                    joint,
                })
            })
            .collect();
        let mut d_sum = 0.0;
        let mut g_sum = 0.0;
        let mut bad_blocks = 0;
        let mut bad_indices = 0;
        let mut joint = vec![0usize; nx * q];
        for s in per_block {
            let s = s?;
            d_sum += s.distortion;
            g_sum += s.genie;
            bad_blocks += usize::from(s.mismatch > 0);
            bad_indices += s.mismatch;
            joint.iter_mut().zip(&s.joint).for_each(|(a, b)| *a += b);
        }
        let nb = blocks.len() as f64;
        let symbols = nb * self.len() as f64;
        let empirical: Vec<f64> = joint.iter().map(|&c| c as f64 / symbols).collect();
        let joint_tv = 0.5 * empirical.iter().zip(self.joint.joint()).map(|(a, b)| (a - b).abs()).sum::<f64>();
        let mut u_marginal = vec![0.0; q];
        for (k, &p) in empirical.iter().enumerate() {
            u_marginal[k % q] += p;
        }
        let d_avg = d_sum / nb;
        let d1 = self.d_max() * bad_blocks as f64 / nb;
        let d2 = g_sum / nb;
        Ok(SourceDiagnostics {
            blocks: blocks.len(),
            d_avg,
            d1_proxy: d1,
            d2_proxy: d2,
            d3_proxy: d_avg - d2 - d1,
            block_mismatch: bad_blocks as f64 / nb,
            index_mismatch: bad_indices as f64 / symbols,
            joint_tv,
            xu_joint: empirical,
            u_marginal,
            exact_tv: if self.len() <= 8 { self.exact_tv().ok() } else { None },
        })
    }

    /// Exact total variation between the true law of `(v, x, z)` and the law
    /// produced by the encoder with uniform frozen components.
    pub fn exact_tv(&self) -> Result<f64> {
        let g = self.construction.group();
        let (q, nn, nx) = (g.order(), self.len(), self.joint.x_size());
        let per_cond = nx.checked_mul(q).and_then(|c| c.checked_pow(nn as u32));
        let cells = per_cond.and_then(|c| q.checked_pow(nn as u32).and_then(|v| v.checked_mul(c)));
        match cells {
            Some(c) if c <= EXACT_TV_BOUND => {}
            c => return Err(Error::SynthesisTooLarge { cells: c.unwrap_or(usize::MAX), bound: EXACT_TV_BOUND }),
        }
        let parts: Vec<&Subgroup> = (0..nn).map(|i| self.layout.at(i).k()).collect();
        let enumerator = TvEnumerator::new(&self.spec, &parts)?;
        let n_x = nx.pow(nn as u32);
        let n_z = q.pow(nn as u32);
        let scale = (q as f64).powi(-(nn as i32));
        let sums: Vec<f64> = (0..n_x)
            .into_par_iter()
            .map(|xi| {
                let mut e = enumerator.clone();
                let mut x = vec![0; nn];
                let mut z = vec![0; nn];
                let mut lik = vec![0.0; nn * q];
                digits(xi, nx, &mut x);
                let mut acc = 0.0;
                for zi in 0..n_z {
                    digits(zi, q, &mut z);
                    for j in 0..nn {
                        for s in 0..q {
                            lik[j * q + s] = self.joint.p(x[j], g.sub(z[j], s));
                        }
                    }
                    let (mass, l1) = e.l1(&lik);
                    acc += scale * mass * l1;
                }
                acc
            })
            .collect();
        Ok(0.5 * sums.iter().sum::<f64>())
    }
}

struct BlockStats {
    distortion: f64,
    genie: f64,
    mismatch: usize,
    joint: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Encoded {
    pub message: QuantizedMessage,
    pub v: Vec<Element>,
    /// Encoder-side reconstruction `z - vG`.
    pub u: Vec<Element>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decoded {
    pub v: Vec<Element>,
    pub u: Vec<Element>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SourceDiagnostics {
    pub blocks: usize,
    pub d_avg: f64,
    /// `d_max` times the fraction of blocks where the decoded `v` differs.
    pub d1_proxy: f64,
    /// Distortion of the encoder-side reconstruction (decoder given the true `v`).
    pub d2_proxy: f64,
    /// `d_avg - d2 - d1`.
    pub d3_proxy: f64,
    pub block_mismatch: f64,
    /// Fraction of indices where the decoded `v_i` differs.
    pub index_mismatch: f64,
    /// Total variation between the empirical encoder-side `(x, u)` law and `p_XU`.
    pub joint_tv: f64,
    /// Empirical encoder-side `(x, u)` law indexed `[x * q + u]`.
    pub xu_joint: Vec<f64>,
    pub u_marginal: Vec<f64>,
    /// Exact total variation for `N <= 8`.
    pub exact_tv: Option<f64>,
}

/// The transversal components of the message cells, packed as one mixed-radix
/// number with radix `|H| / |K|` per cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuantizedMessage {
    digits: Vec<usize>,
    radices: Vec<usize>,
    hash: [u8; 32],
}

impl QuantizedMessage {
    pub fn digits(&self) -> &[usize] {
        &self.digits
    }

    pub fn radices(&self) -> &[usize] {
        &self.radices
    }

    pub fn construction_hash(&self) -> &[u8; 32] {
        &self.hash
    }

    /// `sum log2(radix)` over the message cells, for a block of length `len`.
    pub fn exact_bits(&self, len: usize) -> ExactRate {
        let mut r = ExactRate::new(len);
        for &radix in &self.radices {
            r.add_log_ratio(radix, 1, 1);
        }
        r
    }

    pub fn bit_length(&self) -> f64 {
        self.radices.iter().map(|&r| (r as f64).log2()).sum()
    }

    pub fn packed(&self) -> BigUint {
        let mut value = BigUint::from(0u32);
        for (&d, &r) in self.digits.iter().zip(&self.radices) {
            value = value * r + d;
        }
        value
    }

    /// Header (magic, version, construction hash, digit count) and the packed value.
    pub fn to_bytes(&self) -> Vec<u8> {
        let payload = self.packed().to_bytes_le();
        let mut out = Vec::with_capacity(48 + payload.len());
        out.extend_from_slice(MESSAGE_MAGIC);
        out.extend_from_slice(&MESSAGE_VERSION.to_le_bytes());
        out.extend_from_slice(&self.hash);
        out.extend_from_slice(&(self.digits.len() as u32).to_le_bytes());
        out.extend_from_slice(&(payload.len() as u32).to_le_bytes());
        out.extend_from_slice(&payload);
        out
    }

    /// Parse bytes written by [`to_bytes`](Self::to_bytes) for `code`.
    pub fn from_bytes(bytes: &[u8], code: &SourceCode) -> Result<Self> {
        let corrupt = |m: &str| Error::CorruptFile(m.to_string());
        if bytes.len() < 48 || &bytes[..4] != MESSAGE_MAGIC {
            return Err(corrupt("not a quantized message"));
        }
        let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes"));
        let version = word(4);
        if version != MESSAGE_VERSION {
            return Err(Error::VersionMismatch { found: version, expected: MESSAGE_VERSION });
        }
        let hash: [u8; 32] = bytes[8..40].try_into().expect("32 bytes");
        if hash != code.hash {
            return Err(Error::HashMismatch);
        }
        let count = word(40) as usize;
        let len = word(44) as usize;
        if bytes.len() != 48 + len {
            return Err(corrupt("payload length mismatch"));
        }
        let radices = code.radices();
        if count != radices.len() {
            return Err(Error::LengthMismatch { expected: radices.len(), found: count });
        }
        let mut value = BigUint::from_bytes_le(&bytes[48..]);
        let mut digits = vec![0; count];
        for (d, &r) in digits.iter_mut().zip(&radices).rev() {
            let rb = BigUint::from(r);
            let rem = &value % &rb;
            *d = rem.iter_u64_digits().next().unwrap_or(0) as usize;
            value /= rb;
        }
        if value != BigUint::from(0u32) {
            return Err(corrupt("packed value exceeds the message space"));
        }
        Ok(QuantizedMessage { digits, radices, hash })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::construction::{exact_params, nest_partitions, EstimatorMeta, SubgroupPartition};
    use crate::dmc::StochasticMatrix;
    use crate::group::FiniteAbelianGroup;

    fn z2() -> FiniteAbelianGroup {
        FiniteAbelianGroup::cyclic(2).unwrap()
    }

    fn exact_code(joint: &JointSource, n: u32, beta: f64, seed: u64) -> SourceCode {
        let (wc, ws) = source_test_channels(joint);
        let c = construct(
            &exact_params(&wc, n).unwrap(),
            &exact_params(&ws, n).unwrap(),
            CodeMode::Source,
            beta,
            0.0,
            seed,
        )
        .unwrap();
        SourceCode::from_construction(c, joint.clone(), seed).unwrap()
    }

    /// Source mode construction with every index frozen.
    fn all_frozen(joint: &JointSource, n: u32) -> SourceCode {
        let g = joint.u_group().clone();
        let lattice = g.enumerate_subgroups().unwrap();
        let whole = lattice.iter().position(|h| h.order() == g.order()).unwrap();
        let nn = 1 << n;
        let p = SubgroupPartition::from_labels(vec![whole; nn]);
        let meta =
            EstimatorMeta { method: "exact".into(), seed: 0, trials: 0, skipped_a: 0, skipped_b: 0, guard_sigmas: 0.0 };
        let c = nest_partitions(p.clone(), p, CodeMode::Source, lattice, n, 0.25, vec![1.0; nn], meta).unwrap();
        SourceCode::from_construction(c, joint.clone(), 3).unwrap()
    }

    #[test]
    fn identity_test_channel_reconstructs_exactly() {
        let joint = JointSource::from_test_channel(&[0.5, 0.5], &StochasticMatrix::identity(2), z2()).unwrap();
        let code = exact_code(&joint, 3, 0.25, 1);
        assert_eq!(code.rate(), 1.0);
        for s in 0..10 {
            let x = code.sample_source(s);
            let enc = code.encode(&x, s).unwrap();
            assert_eq!(enc.u, x);
            assert_eq!(code.decode(&enc.message).unwrap(), x);
        }
        let blocks: Vec<_> = (0..5).map(|s| code.sample_source(s)).collect();
        let d = code.diagnostics(&blocks, 0).unwrap();
        assert_eq!((d.d_avg, d.d1_proxy, d.d2_proxy, d.d3_proxy), (0.0, 0.0, 0.0, 0.0));
        assert!(d.exact_tv.unwrap().abs() < 1e-12);
    }

    #[test]
    fn independent_source_has_no_message() {
        let joint = JointSource::new(2, z2(), vec![0.3 * 0.6, 0.3 * 0.4, 0.7 * 0.6, 0.7 * 0.4]).unwrap();
        let code = exact_code(&joint, 3, 0.25, 1);
        assert_eq!(code.rate(), 0.0);
    }

    #[test]
    fn all_frozen_code_ignores_the_source() {
        let joint = JointSource::dsbs(0.9).unwrap();
        let code = all_frozen(&joint, 2);
        let g = z2();
        let spec = TransformSpec::new(g.clone(), 2).unwrap();
        let expected = subtract(&g, code.dither(), &spec.transform(code.frozen_values()).unwrap());
        for s in 0..4 {
            let x = code.sample_source(s);
            let enc = code.encode(&x, s).unwrap();
            assert!(enc.message.digits().is_empty());
            assert_eq!(code.decode(&enc.message).unwrap(), expected);
        }
    }

    #[test]
    fn single_frozen_index() {
        let joint = JointSource::dsbs(0.9).unwrap();
        let code = all_frozen(&joint, 0);
        let enc = code.encode(&[1], 5).unwrap();
        assert!(enc.message.digits().is_empty());
        assert_eq!(enc.v, code.frozen_values());
    }

    #[test]
    fn frozen_and_message_cells_always_agree() {
        let joint = JointSource::dsbs(0.85).unwrap();
        let code = exact_code(&joint, 3, 0.3, 4);
        for s in 0..50 {
            let x = code.sample_source(s);
            let enc = code.encode(&x, s + 100).unwrap();
            let dec = code.decode_full(&enc.message).unwrap();
            let g = code.construction().group();
            for i in 0..code.len() {
                let k = code.construction().k(i).clone();
                let h = code.construction().h(i).clone();
                let nc = crate::group::NestedCosets::new(&k, &h).unwrap();
                let (ke, me, _) = nc.decompose(enc.v[i]);
                let (kd, md, _) = nc.decompose(dec.v[i]);
                assert_eq!((ke, me), (kd, md), "index {i}");
                assert_eq!(ke, code.frozen_values()[i]);
                let _ = g;
            }
        }
    }

    #[test]
    fn encoding_is_deterministic() {
        let joint = JointSource::dsbs(0.89).unwrap();
        let code = build_source_code(&joint, 5, 0.25, 300, 9).unwrap();
        let x = code.sample_source(1);
        let a = code.encode(&x, 2).unwrap();
        let b = code.encode(&x, 2).unwrap();
        assert_eq!(a, b);
        let code2 = build_source_code(&joint, 5, 0.25, 300, 9).unwrap();
        assert_eq!(code2.encode(&x, 2).unwrap(), a);
    }

    #[test]
    fn message_bits_match_rate_and_round_trip() {
        let g = FiniteAbelianGroup::cyclic(4).unwrap();
        let test = StochasticMatrix::new(4, 4, {
            let mut t = vec![0.05; 16];
            for i in 0..4 {
                t[i * 4 + i] = 0.85;
            }
            t
        })
        .unwrap();
        let joint = JointSource::from_test_channel(&[0.25; 4], &test, g).unwrap();
        let code = build_source_code(&joint, 4, 0.25, 200, 3).unwrap();
        let x = code.sample_source(7);
        let enc = code.encode(&x, 1).unwrap();
        let report = code_rate(code.construction());
        assert_eq!(enc.message.exact_bits(code.len()), report.exact);
        let bytes = enc.message.to_bytes();
        let back = QuantizedMessage::from_bytes(&bytes, &code).unwrap();
        assert_eq!(back, enc.message);
        assert!(matches!(QuantizedMessage::from_bytes(&bytes[..bytes.len() - 1], &code), Err(Error::CorruptFile(_))));
        let other = build_source_code(&joint, 4, 0.25, 200, 4).unwrap();
        if other.hash() != code.hash() {
            assert!(matches!(QuantizedMessage::from_bytes(&bytes, &other), Err(Error::HashMismatch)));
        }
    }

    #[test]
    fn exact_tv_vanishes_without_frozen_components() {
        // Nothing frozen: K = {0} everywhere, so the encoder samples the true law.
        let joint = JointSource::dsbs(0.8).unwrap();
        let g = z2();
        let lattice = g.enumerate_subgroups().unwrap();
        let whole = lattice.iter().position(|h| h.order() == 2).unwrap();
        let triv = 1 - whole;
        let c = nest_partitions(
            SubgroupPartition::from_labels(vec![whole; 4]),
            SubgroupPartition::from_labels(vec![triv; 4]),
            CodeMode::Source,
            lattice,
            2,
            0.25,
            vec![0.0; 4],
            EstimatorMeta { method: "exact".into(), seed: 0, trials: 0, skipped_a: 0, skipped_b: 0, guard_sigmas: 0.0 },
        )
        .unwrap();
        let code = SourceCode::from_construction(c, joint.clone(), 0).unwrap();
        assert!(code.exact_tv().unwrap().abs() < 1e-12);
        let frozen = all_frozen(&joint, 2);
        assert!(frozen.exact_tv().unwrap() > 0.0);
    }

    #[test]
    fn distortion_is_a_symbol_average() {
        let joint = JointSource::dsbs(0.9).unwrap();
        let code = all_frozen(&joint, 2);
        assert_eq!(code.distortion(&[0, 1, 1, 0], &[0, 0, 1, 1]), 0.5);
        let custom = code.clone().with_distortion(&[vec![0.0, 2.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(custom.distortion(&[0, 1, 1, 0], &[1, 0, 1, 1]), (2.0 + 1.0 + 0.0 + 2.0) / 4.0);
        assert_eq!(custom.d_max(), 2.0);
    }
}
