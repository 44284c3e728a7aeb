//! The polar transform `x = v G_N`, `G_N = B_N F^{(x)n}`, over a finite Abelian
//! group, and the successive-cancellation engine that evaluates the
//! synthesized-channel posteriors `P(v_i | obs, v_1^{i-1})`.
//!
//! The kernel acts on a pair as `(v1, v2) -> (v1 + v2, v2)`. Because `B_N`
//! commutes with `F^{(x)n}`, the SC tree runs the plain `F^{(x)n}` butterfly on
//! bit-reversed likelihoods and emits decisions in natural index order.

use crate::dmc::Dmc;
use crate::error::{Error, Result};
use crate::group::{Element, FiniteAbelianGroup};

/// Block length `N = 2^n` over a group.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransformSpec {
    group: FiniteAbelianGroup,
    n: u32,
}

impl TransformSpec {
    pub fn new(group: FiniteAbelianGroup, n: u32) -> Result<Self> {
        if n > 24 {
            return Err(Error::InvalidParameter(format!("n = {n} is too large")));
        }
        Ok(TransformSpec { group, n })
    }

    pub fn group(&self) -> &FiniteAbelianGroup {
        &self.group
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    /// Block length N.
    pub fn len(&self) -> usize {
        1 << self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn check_len(&self, found: usize) -> Result<()> {
        if found != self.len() {
            return Err(Error::LengthMismatch { expected: self.len(), found });
        }
        Ok(())
    }

    /// `x = v G_N`.
    pub fn transform(&self, v: &[Element]) -> Result<Vec<Element>> {
        self.check_len(v.len())?;
        Ok(encode_recursive(&self.group, v))
    }

    /// Inverse of [`transform`](Self::transform).
    pub fn inverse(&self, x: &[Element]) -> Result<Vec<Element>> {
        self.check_len(x.len())?;
        Ok(decode_recursive(&self.group, x))
    }
}

/// Odd/even recursion: `x = (s G_{N/2}, t G_{N/2})` with `s_k = v_{2k-1} + v_{2k}`, `t_k = v_{2k}`.
fn encode_recursive(g: &FiniteAbelianGroup, v: &[Element]) -> Vec<Element> {
    if v.len() == 1 {
        return v.to_vec();
    }
    let s: Vec<Element> = v.chunks(2).map(|p| g.add(p[0], p[1])).collect();
    let t: Vec<Element> = v.chunks(2).map(|p| p[1]).collect();
    let mut x = encode_recursive(g, &s);
    x.extend(encode_recursive(g, &t));
    x
}

fn decode_recursive(g: &FiniteAbelianGroup, x: &[Element]) -> Vec<Element> {
    if x.len() == 1 {
        return x.to_vec();
    }
    let half = x.len() / 2;
    let s = decode_recursive(g, &x[..half]);
    let t = decode_recursive(g, &x[half..]);
    s.iter().zip(&t).flat_map(|(&a, &b)| [g.sub(a, b), b]).collect()
}

/// Reverses the low `n` bits of `i`.
pub fn bit_reverse(i: usize, n: u32) -> usize {
    if n == 0 {
        return 0;
    }
    i.reverse_bits() >> (usize::BITS - n)
}

/// `F^{(x)n}` butterfly in place: `(a, b) -> (a + b, b)` at every stage.
pub fn kernel_butterfly(g: &FiniteAbelianGroup, x: &mut [Element]) {
    let mut half = 1;
    while half < x.len() {
        for block in x.chunks_mut(2 * half) {
            let (lo, hi) = block.split_at_mut(half);
            for (a, &b) in lo.iter_mut().zip(hi.iter()) {
                *a = g.add(*a, b);
            }
        }
        half *= 2;
    }
}

/// Per-position likelihood vectors `l_j(g)`, `j` in `[0, N)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LikelihoodTable {
    q: usize,
    data: Vec<f64>,
}

impl LikelihoodTable {
    /// `data` is indexed `[j * q + g]`; every position needs a positive entry.
    pub fn new(q: usize, data: Vec<f64>) -> Result<Self> {
        if q == 0 || !data.len().is_multiple_of(q) {
            return Err(Error::LengthMismatch { expected: q, found: data.len() });
        }
        for (j, row) in data.chunks(q).enumerate() {
            if row.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) || !row.iter().any(|&v| v > 0.0) {
                return Err(Error::InconsistentEvidence { index: j });
            }
        }
        Ok(LikelihoodTable { q, data })
    }

    pub fn from_fn(len: usize, q: usize, mut f: impl FnMut(usize, Element) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(len * q);
        for j in 0..len {
            for g in 0..q {
                data.push(f(j, g));
            }
        }
        Self::new(q, data)
    }

    /// `l_j(g) = W(y_j | g)`.
    pub fn from_outputs(w: &Dmc, ys: &[usize]) -> Result<Self> {
        Self::from_fn(ys.len(), w.input_size(), |j, g| w.prob(g, ys[j]))
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.q
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn position(&self, j: usize) -> &[f64] {
        &self.data[j * self.q..(j + 1) * self.q]
    }
}

fn normalize(v: &mut [f64]) {
    let s: f64 = v.iter().sum();
    if s > 0.0 && s.is_finite() {
        let inv = 1.0 / s;
        v.iter_mut().for_each(|x| *x *= inv);
    } else {
        v.iter_mut().for_each(|x| *x = 0.0);
    }
}

/// Reusable successive-cancellation state for one block length.
///
/// [`run`](Self::run) visits `i = 0..N` in order and hands the caller the
/// normalized posterior of `v_i` given the observations and the decisions
/// already made (all zeros when no mass is left). The caller returns `v_i`.
pub struct ScEngine {
    spec: TransformSpec,
    leaves: Vec<f64>,
    work: Vec<f64>,
    partial: Vec<Element>,
    posterior: Vec<f64>,
}

impl ScEngine {
    pub fn new(spec: TransformSpec) -> Self {
        let (nn, q) = (spec.len(), spec.group.order());
        ScEngine {
            leaves: vec![0.0; nn * q],
            work: vec![0.0; nn * q],
            partial: vec![0; nn],
            posterior: vec![0.0; q],
            spec,
        }
    }

    pub fn spec(&self) -> &TransformSpec {
        &self.spec
    }

    pub fn run<E, F>(&mut self, table: &LikelihoodTable, mut decide: F) -> std::result::Result<Vec<Element>, E>
    where
        E: From<Error>,
        F: FnMut(usize, &[f64]) -> std::result::Result<Element, E>,
    {
        let (nn, q) = (self.spec.len(), self.spec.group.order());
        if table.len() != nn {
            return Err(Error::LengthMismatch { expected: nn, found: table.len() }.into());
        }
        if table.q() != q {
            return Err(Error::AlphabetMismatch { expected: q, found: table.q() }.into());
        }
        let n = self.spec.n;
        for j in 0..nn {
            let src = table.position(bit_reverse(j, n));
            let dst = &mut self.leaves[j * q..(j + 1) * q];
            dst.copy_from_slice(src);
            normalize(dst);
        }
        let mut decisions = vec![0; nn];
        let mut ctx = Ctx {
            g: &self.spec.group,
            q,
            decisions: &mut decisions,
            posterior: &mut self.posterior,
            decide: &mut decide,
        };
        sc_node(&mut ctx, &self.leaves, &mut self.partial, &mut self.work, 0)?;
        Ok(decisions)
    }
}

struct Ctx<'a, F> {
    g: &'a FiniteAbelianGroup,
    q: usize,
    decisions: &'a mut [Element],
    posterior: &'a mut [f64],
    decide: &'a mut F,
}

fn sc_node<E, F>(
    ctx: &mut Ctx<'_, F>,
    lik: &[f64],
    partial: &mut [Element],
    work: &mut [f64],
    offset: usize,
) -> std::result::Result<(), E>
where
    F: FnMut(usize, &[f64]) -> std::result::Result<Element, E>,
{
    let q = ctx.q;
    let len = partial.len();
    if len == 1 {
        ctx.posterior.copy_from_slice(&lik[..q]);
        normalize(ctx.posterior);
        let v = (ctx.decide)(offset, ctx.posterior)?;
        ctx.decisions[offset] = v;
        partial[0] = v;
        return Ok(());
    }
    let half = len / 2;
    let (child, rest) = work.split_at_mut(half * q);
    let g = ctx.g;
    // Upper branch: the partner symbol is unknown and summed out.
    for k in 0..half {
        let a = &lik[k * q..(k + 1) * q];
        let b = &lik[(half + k) * q..(half + k + 1) * q];
        let out = &mut child[k * q..(k + 1) * q];
        for (s, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (t, &bt) in b.iter().enumerate() {
                if bt != 0.0 {
                    acc += a[g.add(s, t)] * bt;
                }
            }
            *o = acc;
        }
        normalize(out);
    }
    let (left, right) = partial.split_at_mut(half);
    sc_node(ctx, child, left, rest, offset)?;
    // Lower branch: the upper partial sums are now known.
    for k in 0..half {
        let a = &lik[k * q..(k + 1) * q];
        let b = &lik[(half + k) * q..(half + k + 1) * q];
        let out = &mut child[k * q..(k + 1) * q];
        let known = left[k];
        for (t, o) in out.iter_mut().enumerate() {
            *o = a[g.add(known, t)] * b[t];
        }
        normalize(out);
    }
    sc_node(ctx, child, right, rest, offset + half)?;
    for (l, &r) in left.iter_mut().zip(right.iter()) {
        *l = g.add(*l, r);
    }
    Ok(())
}

enum Probe {
    Done,
    Failed(Error),
}

impl From<Error> for Probe {
    fn from(e: Error) -> Self {
        Probe::Failed(e)
    }
}

/// Normalized `W_N^{(i)}(obs, v_1^{i-1} | .)` for 0-based index `i`, given the
/// prefix `v_0..v_{i-1}`.
pub fn sc_conditional(spec: &TransformSpec, table: &LikelihoodTable, prefix: &[Element], i: usize) -> Result<Vec<f64>> {
    if i >= spec.len() {
        return Err(Error::InvalidParameter(format!("index {i} out of range for N = {}", spec.len())));
    }
    if prefix.len() != i {
        return Err(Error::LengthMismatch { expected: i, found: prefix.len() });
    }
    let mut engine = ScEngine::new(spec.clone());
    let mut out = Vec::new();
    let res = engine.run(table, |j, p| {
        if j < i {
            Ok(prefix[j])
        } else {
            out = p.to_vec();
            Err(Probe::Done)
        }
    });
    match res {
        Err(Probe::Done) => {}
        Err(Probe::Failed(e)) => return Err(e),
        Ok(_) => unreachable!("probe stops at index {i}"),
    }
    if out.iter().all(|&p| p == 0.0) {
        return Err(Error::InconsistentEvidence { index: i });
    }
    Ok(out)
}

/// Exact synthesized channels `W_N^{(i)}` by enumeration of the defining sum.
/// The output of channel `i` (0-based) is the pair (observation tuple,
/// prefix tuple) encoded as `obs_index * q^i + prefix_index`, first
/// coordinates most significant.
pub fn synthesize_exact(w: &Dmc, n: u32) -> Result<Vec<Dmc>> {
    synthesize_exact_bounded(w, n, crate::dmc::DEFAULT_TABLE_BOUND)
}

pub fn synthesize_exact_bounded(w: &Dmc, n: u32, bound: usize) -> Result<Vec<Dmc>> {
    if n > 3 {
        return Err(Error::InvalidParameter(format!("exact synthesis supports n <= 3, got {n}")));
    }
    let g = w.group().clone();
    let spec = TransformSpec::new(g.clone(), n)?;
    let (nn, q, ny) = (spec.len(), g.order(), w.output_size());
    let obs_count = checked_pow(ny, nn).ok_or(Error::SynthesisTooLarge { cells: usize::MAX, bound })?;
    let mut sizes = Vec::with_capacity(nn);
    for i in 0..nn {
        let cells = checked_pow(q, i)
            .and_then(|p| p.checked_mul(obs_count))
            .and_then(|c| c.checked_mul(q))
            .ok_or(Error::SynthesisTooLarge { cells: usize::MAX, bound })?;
        if cells > bound {
            return Err(Error::SynthesisTooLarge { cells, bound });
        }
        sizes.push(cells / q);
    }
    let mut tables: Vec<Vec<f64>> = sizes.iter().map(|&s| vec![0.0; s * q]).collect();
    let scale = 1.0 / (q as f64).powi(nn as i32 - 1);
    let total_v = q.pow(nn as u32);
    let mut v = vec![0; nn];
    let mut y = vec![0; nn];
    for v_index in 0..total_v {
        digits(v_index, q, &mut v);
        let x = spec.transform(&v)?;
        for obs in 0..obs_count {
            digits(obs, ny, &mut y);
            let p: f64 = x.iter().zip(&y).map(|(&xj, &yj)| w.prob(xj, yj)).product();
            if p == 0.0 {
                continue;
            }
            let mut prefix = 0;
            for i in 0..nn {
                let out = obs * q.pow(i as u32) + prefix;
                tables[i][v[i] * sizes[i] + out] += p * scale;
                prefix = prefix * q + v[i];
            }
        }
    }
    tables.into_iter().zip(sizes).map(|(t, s)| Dmc::new(g.clone(), s, t)).collect()
}

fn checked_pow(base: usize, exp: usize) -> Option<usize> {
    (0..exp).try_fold(1usize, |acc, _| acc.checked_mul(base))
}

/// Base-`radix` digits of `index`, most significant first.
pub(crate) fn digits(mut index: usize, radix: usize, out: &mut [usize]) {
    for d in out.iter_mut().rev() {
        *d = index % radix;
        index /= radix;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn spec(s: &str, n: u32) -> TransformSpec {
        TransformSpec::new(s.parse().unwrap(), n).unwrap()
    }

    #[test]
    fn length_two_kernel() {
        let sp = spec("Z5", 1);
        assert_eq!(sp.transform(&[2, 4]).unwrap(), vec![1, 4]);
        assert_eq!(spec("Z2", 1).inverse(&[1, 1]).unwrap(), vec![0, 1]);
        assert_eq!(spec("Z4", 3).transform(&[0; 8]).unwrap(), vec![0; 8]);
        assert!(matches!(sp.transform(&[1, 2, 3]), Err(Error::LengthMismatch { expected: 2, found: 3 })));
        assert!(sp.inverse(&[1]).is_err());
    }

    #[test]
    fn round_trip_exhaustive_n2_z4() {
        let sp = spec("Z4", 2);
        let mut seen = std::collections::HashSet::new();
        let mut v = vec![0; 4];
        for idx in 0..256 {
            digits(idx, 4, &mut v);
            let x = sp.transform(&v).unwrap();
            assert_eq!(sp.inverse(&x).unwrap(), v);
            assert!(seen.insert(x));
        }
    }

    #[test]
    fn automorphism_exhaustive() {
        for s in ["Z2", "Z3", "Z4", "Z2xZ2"] {
            let sp = spec(s, 2);
            let g = sp.group().clone();
            let q = g.order();
            let total = q.pow(4);
            let (mut a, mut b) = (vec![0; 4], vec![0; 4]);
            for i in 0..total {
                digits(i, q, &mut a);
                let ta = sp.transform(&a).unwrap();
                for j in 0..total {
                    digits(j, q, &mut b);
                    let sum: Vec<_> = a.iter().zip(&b).map(|(&x, &y)| g.add(x, y)).collect();
                    let tb = sp.transform(&b).unwrap();
                    let expect: Vec<_> = ta.iter().zip(&tb).map(|(&x, &y)| g.add(x, y)).collect();
                    assert_eq!(sp.transform(&sum).unwrap(), expect);
                }
            }
        }
    }

    #[test]
    fn bit_reversal_is_an_involution() {
        for n in 0..8 {
            for i in 0..(1usize << n) {
                let r = bit_reverse(i, n);
                assert_eq!(bit_reverse(r, n), i);
                let s: String = format!("{:0w$b}", i, w = n as usize).chars().rev().collect();
                let expect = if n == 0 { 0 } else { usize::from_str_radix(&s, 2).unwrap() };
                assert_eq!(r, expect);
            }
        }
    }

    proptest! {
        /// The odd/even recursion equals `B_N` followed by the plain butterfly.
        #[test]
        fn transform_matches_bitreversed_butterfly(n in 0u32..7, seed in any::<u64>()) {
            let sp = spec("Z6", n);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let v: Vec<usize> = (0..sp.len()).map(|_| rng.gen_range(0..6)).collect();
            let mut u: Vec<usize> = (0..sp.len()).map(|j| v[bit_reverse(j, n)]).collect();
            kernel_butterfly(sp.group(), &mut u);
            prop_assert_eq!(sp.transform(&v).unwrap(), u);
            prop_assert_eq!(sp.inverse(&sp.transform(&v).unwrap()).unwrap(), v);
        }
    }

    #[test]
    fn single_position_is_normalized_likelihood() {
        let sp = spec("Z3", 0);
        let t = LikelihoodTable::new(3, vec![1.0, 2.0, 1.0]).unwrap();
        let p = sc_conditional(&sp, &t, &[], 0).unwrap();
        assert_eq!(p, vec![0.25, 0.5, 0.25]);
    }

    #[test]
    fn uniform_likelihoods_give_uniform_posteriors() {
        let sp = spec("Z4", 3);
        let t = LikelihoodTable::new(4, vec![0.7; 32]).unwrap();
        let prefix = [3, 1, 0, 2, 2, 1, 0];
        for i in 0..8 {
            let p = sc_conditional(&sp, &t, &prefix[..i], i).unwrap();
            for x in p {
                assert_abs_diff_eq!(x, 0.25, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn rejects_bad_tables_and_prefixes() {
        assert!(LikelihoodTable::new(2, vec![0.0, 0.0, 1.0, 0.0]).is_err());
        assert!(LikelihoodTable::new(2, vec![0.5, 0.5, 0.5]).is_err());
        let sp = spec("Z2", 1);
        let t = LikelihoodTable::new(2, vec![1.0, 0.0, 1.0, 0.0]).unwrap();
        assert!(matches!(sc_conditional(&sp, &t, &[0], 0), Err(Error::LengthMismatch { .. })));
        // Both outputs say "0": v = (0, 0) is the only consistent word, so v_0 = 1 is impossible.
        assert!(matches!(sc_conditional(&sp, &t, &[1], 1), Err(Error::InconsistentEvidence { index: 1 })));
    }

    #[test]
    fn exact_synthesis_small_cases() {
        let w = Dmc::bsc(0.2).unwrap();
        assert_eq!(synthesize_exact(&w, 0).unwrap(), vec![w.clone()]);
        let one = synthesize_exact(&w, 1).unwrap();
        let (minus, plus) = (w.minus_transform().unwrap(), w.plus_transform().unwrap());
        for (a, b) in one[0].table().iter().zip(minus.table()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-15);
        }
        for (a, b) in one[1].table().iter().zip(plus.table()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-15);
        }
        // BEC recursion e -> (2e - e^2, e^2) applied twice from 0.5.
        let chans = synthesize_exact(&Dmc::bec(0.5).unwrap(), 2).unwrap();
        let z: Vec<f64> = chans.iter().map(|c| c.bhattacharyya_pair(0, 1).unwrap()).collect();
        for (a, b) in z.iter().zip([0.9375, 0.5625, 0.4375, 0.0625]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
        }
        assert!(matches!(synthesize_exact_bounded(&w, 3, 1000), Err(Error::SynthesisTooLarge { .. })));
        assert!(synthesize_exact(&w, 4).is_err());
    }

    /// Brute-force oracle: marginalize the joint over all suffixes directly.
    fn brute_conditional(w: &Dmc, n: u32, ys: &[usize], prefix: &[usize]) -> Vec<f64> {
        let sp = TransformSpec::new(w.group().clone(), n).unwrap();
        let q = w.input_size();
        let nn = sp.len();
        let i = prefix.len();
        let mut out = vec![0.0; q];
        let rest = nn - i;
        let mut tail = vec![0; rest];
        for idx in 0..q.pow(rest as u32) {
            digits(idx, q, &mut tail);
            let mut v = prefix.to_vec();
            v.extend_from_slice(&tail);
            let x = sp.transform(&v).unwrap();
            out[v[i]] += x.iter().zip(ys).map(|(&a, &b)| w.prob(a, b)).product::<f64>();
        }
        let s: f64 = out.iter().sum();
        out.iter().map(|x| x / s).collect()
    }

    #[test]
    fn sc_matches_brute_force_on_random_channels() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for gs in ["Z2", "Z3", "Z4", "Z2xZ2"] {
            let g: FiniteAbelianGroup = gs.parse().unwrap();
            let w = Dmc::random(g.clone(), 3, &mut rng);
            for n in 0..=3u32 {
                let sp = TransformSpec::new(g.clone(), n).unwrap();
                for _ in 0..5 {
                    let ys: Vec<usize> = (0..sp.len()).map(|_| rng.gen_range(0..3)).collect();
                    let v: Vec<usize> = (0..sp.len()).map(|_| rng.gen_range(0..g.order())).collect();
                    let table = LikelihoodTable::from_outputs(&w, &ys).unwrap();
                    for i in 0..sp.len() {
                        let got = sc_conditional(&sp, &table, &v[..i], i).unwrap();
                        let want = brute_conditional(&w, n, &ys, &v[..i]);
                        for (a, b) in got.iter().zip(&want) {
                            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn relabeling_uniform_observations_changes_nothing() {
        let g: FiniteAbelianGroup = "Z4".parse().unwrap();
        let sp = TransformSpec::new(g, 2).unwrap();
        let flat = LikelihoodTable::new(4, vec![0.3; 16]).unwrap();
        let flat2 = LikelihoodTable::new(4, vec![0.9; 16]).unwrap();
        for i in 0..4 {
            let pre = vec![1; i];
            assert_eq!(sc_conditional(&sp, &flat, &pre, i).unwrap(), sc_conditional(&sp, &flat2, &pre, i).unwrap());
        }
    }
}
