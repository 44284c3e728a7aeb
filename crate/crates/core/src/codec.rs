//! Plumbing shared by the source and channel codecs: per-index coset
//! layouts, shared randomness, coset-restricted sampling and argmax, and the
//! exact small-N total-variation computation.

use rand::Rng;

use crate::construction::{NestedConstruction, Role};
use crate::error::{Error, Result};
use crate::group::{Element, FiniteAbelianGroup, NestedCosets, Subgroup};
use crate::polar::{digits, TransformSpec};
use crate::rng::{sample_weighted, streams, substream};

/// Precomputed cosets for one `(K, H)` pair.
#[derive(Debug, Clone)]
pub(crate) struct Slot {
    pub cosets: NestedCosets,
    /// `T_H`, in canonical order.
    pub t_h: Vec<Element>,
    /// `T_{K<=H}`, in canonical order.
    pub t_kh: Vec<Element>,
    /// `T_K = T_{K<=H} + T_H`, as `(m position, element)`.
    pub t_k: Vec<(usize, Element)>,
}

impl Slot {
    fn new(k: &Subgroup, h: &Subgroup) -> Result<Self> {
        let cosets = NestedCosets::new(k, h)?;
        let g = k.parent();
        let t_h = cosets.t_h().coset_reps().to_vec();
        let t_kh = cosets.t_kh().coset_reps().to_vec();
        let mut t_k = Vec::with_capacity(t_h.len() * t_kh.len());
        for (mi, &m) in t_kh.iter().enumerate() {
            for &t in &t_h {
                t_k.push((mi, g.add(m, t)));
            }
        }
        Ok(Slot { cosets, t_h, t_kh, t_k })
    }

    pub fn k(&self) -> &Subgroup {
        self.cosets.k()
    }
}

/// For every index, the pair whose `K` component is shared randomness:
/// `(K, H)` for nested cells and `(H, H)` for side-info cells.
#[derive(Debug, Clone)]
pub(crate) struct Layout {
    slots: Vec<Slot>,
    of: Vec<usize>,
}

impl Layout {
    pub fn new(c: &NestedConstruction) -> Result<Self> {
        let mut keys: Vec<(usize, usize)> = Vec::new();
        let mut slots = Vec::new();
        let mut of = Vec::with_capacity(c.len());
        for i in 0..c.len() {
            let cell = c.cell(i);
            let key = if c.role(i) == Role::SideInfo { (cell.h, cell.h) } else { (cell.k, cell.h) };
            let pos = match keys.iter().position(|&k| k == key) {
                Some(p) => p,
                None => {
                    keys.push(key);
                    slots.push(Slot::new(&c.lattice()[key.0], &c.lattice()[key.1])?);
                    slots.len() - 1
                }
            };
            of.push(pos);
        }
        Ok(Layout { slots, of })
    }

    pub fn at(&self, i: usize) -> &Slot {
        &self.slots[self.of[i]]
    }
}

/// Dither and frozen components derived from the code seed. Frozen values are
/// uniform over the `K` of each index's slot.
pub(crate) fn shared_randomness(
    group: &FiniteAbelianGroup,
    layout: &Layout,
    len: usize,
    seed: u64,
) -> (Vec<Element>, Vec<Element>) {
    let mut rng = substream(seed, streams::DITHER);
    let dither = (0..len).map(|_| rng.gen_range(0..group.order())).collect();
    let mut rng = substream(seed, streams::FROZEN);
    let frozen = (0..len)
        .map(|i| {
            let k = layout.at(i).k().elements();
            k[rng.gen_range(0..k.len())]
        })
        .collect();
    (dither, frozen)
}

/// Sample `g = base + offset` over `offsets` with probability proportional to
/// the posterior. Returns the position in `offsets`.
pub(crate) fn sample_in_coset<R: Rng + ?Sized>(
    group: &FiniteAbelianGroup,
    post: &[f64],
    base: Element,
    offsets: impl Iterator<Item = Element>,
    buf: &mut Vec<f64>,
    rng: &mut R,
    index: usize,
) -> Result<usize> {
    buf.clear();
    buf.extend(offsets.map(|o| post[group.add(base, o)]));
    sample_weighted(buf, rng).ok_or(Error::InconsistentEvidence { index })
}

/// Position in `offsets` of the most probable `base + offset`; ties go to the
/// smallest group element.
pub(crate) fn argmax_in_coset(
    group: &FiniteAbelianGroup,
    post: &[f64],
    base: Element,
    offsets: impl Iterator<Item = Element>,
) -> usize {
    let mut best: Option<(usize, f64, Element)> = None;
    for (pos, o) in offsets.enumerate() {
        let g = group.add(base, o);
        let p = post[g];
        let better = match best {
            None => true,
            Some((_, bp, bg)) => p > bp || (p == bp && g < bg),
        };
        if better {
            best = Some((pos, p, g));
        }
    }
    best.map_or(0, |b| b.0)
}

/// `u = z - vG` symbol by symbol.
pub(crate) fn subtract(group: &FiniteAbelianGroup, z: &[Element], s: &[Element]) -> Vec<Element> {
    z.iter().zip(s).map(|(&a, &b)| group.sub(a, b)).collect()
}

/// Largest `q^N` the exact total-variation enumeration accepts per
/// conditioning value.
pub const TV_ENUMERATION_BOUND: usize = 1 << 20;

/// Exact `sum_v |P(v) - Q(v)|` for one conditioning value. `P(v)` is
/// proportional to `prod_j lik_j((vG)_j)`; `Q` draws `v_i` uniformly over its
/// `S_i` component and from the true conditional over `[v_i]_{S_i} + T_{S_i}`.
#[derive(Clone)]
pub(crate) struct TvEnumerator {
    group: FiniteAbelianGroup,
    len: usize,
    q: usize,
    codewords: Vec<Element>,
    /// Per index: decomposition `g -> ([g]_S, T_S)` and `|S|`.
    split: Vec<Vec<(Element, Element)>>,
    t_s: Vec<Vec<Element>>,
    s_order: Vec<usize>,
    levels: Vec<Vec<f64>>,
}

impl TvEnumerator {
    pub fn new(spec: &TransformSpec, uniform_parts: &[&Subgroup]) -> Result<Self> {
        let (len, q) = (spec.len(), spec.group().order());
        let count = q
            .checked_pow(len as u32)
            .filter(|&c| c <= TV_ENUMERATION_BOUND)
            .ok_or(Error::SynthesisTooLarge { cells: q.saturating_pow(len as u32), bound: TV_ENUMERATION_BOUND })?;
        if uniform_parts.len() != len {
            return Err(Error::LengthMismatch { expected: len, found: uniform_parts.len() });
        }
        let mut codewords = vec![0; count * len];
        let mut v = vec![0; len];
        for vi in 0..count {
            digits(vi, q, &mut v);
            codewords[vi * len..(vi + 1) * len].copy_from_slice(&spec.transform(&v)?);
        }
        let mut split = Vec::with_capacity(len);
        let mut t_s = Vec::with_capacity(len);
        for s in uniform_parts {
            let nc = NestedCosets::new(s, s)?;
            split.push(
                (0..q)
                    .map(|g| {
                        let (k, _, t) = nc.decompose(g);
                        (k, t)
                    })
                    .collect(),
            );
            t_s.push(nc.t_h().coset_reps().to_vec());
        }
        Ok(TvEnumerator {
            group: spec.group().clone(),
            len,
            q,
            codewords,
            split,
            t_s,
            s_order: uniform_parts.iter().map(|s| s.order()).collect(),
            levels: (0..=len).map(|l| vec![0.0; q.pow(l as u32)]).collect(),
        })
    }

    /// `lik` is indexed `[j * q + g]`. Returns `(mass, sum_v |P(v|.) - Q(v|.)|)`
    /// where `mass` is the unnormalized total `sum_v prod_j lik_j`.
    pub fn l1(&mut self, lik: &[f64]) -> (f64, f64) {
        let (len, q) = (self.len, self.q);
        let count = self.levels[len].len();
        for vi in 0..count {
            let x = &self.codewords[vi * len..(vi + 1) * len];
            self.levels[len][vi] = x.iter().enumerate().map(|(j, &xj)| lik[j * q + xj]).product();
        }
        for l in (0..len).rev() {
            let (lo, hi) = self.levels.split_at_mut(l + 1);
            for (p, m) in lo[l].iter_mut().enumerate() {
                *m = hi[0][p * q..(p + 1) * q].iter().sum();
            }
        }
        let total = self.levels[0][0];
        if total <= 0.0 {
            return (0.0, 0.0);
        }
        let mut l1 = 0.0;
        self.descend(0, 0, 1.0, total, &mut l1);
        (total, l1)
    }

    fn descend(&self, i: usize, prefix: usize, q_mass: f64, total: f64, l1: &mut f64) {
        if i == self.len {
            *l1 += (self.levels[self.len][prefix] / total - q_mass).abs();
            return;
        }
        if q_mass == 0.0 {
            // Q is zero on the whole subtree; only P contributes.
            *l1 += self.levels[i][prefix] / total;
            return;
        }
        let row = &self.levels[i + 1][prefix * self.q..(prefix + 1) * self.q];
        let s_size = self.s_order[i] as f64;
        for g in 0..self.q {
            let (s, _) = self.split[i][g];
            let denom: f64 = self.t_s[i].iter().map(|&t| row[self.group.add(s, t)]).sum();
            let cond = if denom > 0.0 { row[g] / denom } else { 1.0 / self.t_s[i].len() as f64 };
            self.descend(i + 1, prefix * self.q + g, q_mass * cond / s_size, total, l1);
        }
    }
}
