//! Finite Abelian groups given as products of cyclic groups.
//!
//! Elements are encoded as indices `0..q` in mixed radix with the first
//! cyclic factor most significant, so index order is the lexicographic order
//! of residue tuples. The canonical transversal of a subgroup takes the
//! smallest index in each coset, which is also the lexicographically
//! smallest tuple.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// A group element, encoded as its mixed-radix index.
pub type Element = usize;

/// Largest group order for which addition tables are built.
pub const MAX_GROUP_ORDER: usize = 256;

/// Default bound on the group order for exhaustive subgroup enumeration.
pub const DEFAULT_ENUMERATION_BOUND: usize = 64;

#[derive(Clone)]
pub struct FiniteAbelianGroup {
    cyclic_orders: Vec<usize>,
    order: usize,
    add: Vec<Element>,
    neg: Vec<Element>,
}

impl PartialEq for FiniteAbelianGroup {
    fn eq(&self, other: &Self) -> bool {
        self.cyclic_orders == other.cyclic_orders
    }
}

impl Eq for FiniteAbelianGroup {}

impl fmt::Debug for FiniteAbelianGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FiniteAbelianGroup({self})")
    }
}

impl fmt::Display for FiniteAbelianGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.cyclic_orders.iter().map(|m| format!("Z{m}")).collect();
        f.write_str(&parts.join("x"))
    }
}

impl FromStr for FiniteAbelianGroup {
    type Err = Error;

    /// Parses `Z4`, `Z2xZ2`, `Z8` and the like.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidGroupSpec(s.to_string());
        let mut orders = Vec::new();
        for part in s.trim().split(['x', 'X', '*']) {
            let digits = part.trim().strip_prefix('Z').ok_or_else(bad)?;
            orders.push(digits.parse::<usize>().map_err(|_| bad())?);
        }
        Self::new(orders)
    }
}

impl FiniteAbelianGroup {
    pub fn new(cyclic_orders: Vec<usize>) -> Result<Self> {
        if cyclic_orders.is_empty() || cyclic_orders.iter().any(|&m| m < 2) {
            return Err(Error::InvalidGroupSpec(format!("{cyclic_orders:?}")));
        }
        let order = cyclic_orders
            .iter()
            .try_fold(1usize, |acc, &m| acc.checked_mul(m))
            .filter(|&q| q <= MAX_GROUP_ORDER)
            .ok_or_else(|| Error::InvalidGroupSpec(format!("order of {cyclic_orders:?} exceeds {MAX_GROUP_ORDER}")))?;
        let mut g = FiniteAbelianGroup { cyclic_orders, order, add: Vec::new(), neg: Vec::new() };
        let mut add = vec![0; order * order];
        let mut neg = vec![0; order];
        for a in 0..order {
            let ta = g.to_tuple(a);
            let na: Vec<usize> = ta.iter().zip(&g.cyclic_orders).map(|(&x, &m)| (m - x) % m).collect();
            neg[a] = g.from_tuple(&na);
            for b in 0..order {
                let tb = g.to_tuple(b);
                let s: Vec<usize> =
                    ta.iter().zip(&tb).zip(&g.cyclic_orders).map(|((&x, &y), &m)| (x + y) % m).collect();
                add[a * order + b] = g.from_tuple(&s);
            }
        }
        g.add = add;
        g.neg = neg;
        Ok(g)
    }

    /// The cyclic group Z_m.
    pub fn cyclic(m: usize) -> Result<Self> {
        Self::new(vec![m])
    }

    pub fn cyclic_orders(&self) -> &[usize] {
        &self.cyclic_orders
    }

    /// The group order q.
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn zero(&self) -> Element {
        0
    }

    pub fn elements(&self) -> std::ops::Range<Element> {
        0..self.order
    }

    #[inline]
    pub fn add(&self, a: Element, b: Element) -> Element {
        self.add[a * self.order + b]
    }

    #[inline]
    pub fn neg(&self, a: Element) -> Element {
        self.neg[a]
    }

    #[inline]
    pub fn sub(&self, a: Element, b: Element) -> Element {
        self.add(a, self.neg[b])
    }

    pub fn to_tuple(&self, mut e: Element) -> Vec<usize> {
        let mut t = vec![0; self.cyclic_orders.len()];
        for (slot, &m) in t.iter_mut().zip(&self.cyclic_orders).rev() {
            *slot = e % m;
            e /= m;
        }
        t
    }

    pub fn from_tuple(&self, t: &[usize]) -> Element {
        t.iter().zip(&self.cyclic_orders).fold(0, |acc, (&x, &m)| acc * m + x % m)
    }

    /// Human-readable element: a bare residue for cyclic groups, a tuple otherwise.
    pub fn format_element(&self, e: Element) -> String {
        let t = self.to_tuple(e);
        if t.len() == 1 {
            t[0].to_string()
        } else {
            let parts: Vec<String> = t.iter().map(|x| x.to_string()).collect();
            format!("({})", parts.join(","))
        }
    }

    /// Every subgroup exactly once, sorted by (order, elements).
    pub fn enumerate_subgroups(&self) -> Result<Vec<Subgroup>> {
        self.enumerate_subgroups_bounded(DEFAULT_ENUMERATION_BOUND)
    }

    pub fn enumerate_subgroups_bounded(&self, bound: usize) -> Result<Vec<Subgroup>> {
        if self.order > bound {
            return Err(Error::EnumerationInfeasible { order: self.order, bound });
        }
        let trivial = Subgroup::trivial(self);
        let mut found: Vec<Subgroup> = vec![trivial];
        let mut frontier = 0;
        // Every subgroup is reached by adjoining generators one at a time.
        while frontier < found.len() {
            let base = found[frontier].clone();
            for g in self.elements() {
                if base.contains(g) {
                    continue;
                }
                let mut gens = base.elements.clone();
                gens.push(g);
                let s = Subgroup::generated_by(self, &gens);
                if !found.iter().any(|f| f.elements == s.elements) {
                    found.push(s);
                }
            }
            frontier += 1;
        }
        found.sort_by(|a, b| a.order().cmp(&b.order()).then_with(|| a.elements.cmp(&b.elements)));
        Ok(found)
    }

    pub fn canonical_transversal(&self, h: &Subgroup) -> Result<Transversal> {
        if h.parent != *self {
            return Err(Error::InvalidSubgroup(format!("{h} is not a subgroup of {self}")));
        }
        Ok(Transversal::relative(h, &Subgroup::whole(self)))
    }

    /// Splits `g` into `([g]_K, [g]_{T_{K<=H}}, [g]_{T_H})` using canonical transversals.
    pub fn decompose(&self, g: Element, k: &Subgroup, h: &Subgroup) -> Result<(Element, Element, Element)> {
        Ok(NestedCosets::new(k, h)?.decompose(g))
    }
}

/// A subgroup, stored as its sorted element list plus a membership table.
#[derive(Clone, PartialEq, Eq)]
pub struct Subgroup {
    parent: FiniteAbelianGroup,
    elements: Vec<Element>,
    member: Vec<bool>,
}

impl fmt::Debug for Subgroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Subgroup({self})")
    }
}

impl fmt::Display for Subgroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.elements.iter().map(|&e| self.parent.format_element(e)).collect();
        write!(f, "{{{}}}", parts.join(","))
    }
}

impl Subgroup {
    pub fn trivial(g: &FiniteAbelianGroup) -> Self {
        Self::from_sorted(g, vec![0])
    }

    pub fn whole(g: &FiniteAbelianGroup) -> Self {
        Self::from_sorted(g, g.elements().collect())
    }

    fn from_sorted(g: &FiniteAbelianGroup, elements: Vec<Element>) -> Self {
        let mut member = vec![false; g.order()];
        for &e in &elements {
            member[e] = true;
        }
        Subgroup { parent: g.clone(), elements, member }
    }

    /// Smallest subgroup containing `gens`.
    pub fn generated_by(g: &FiniteAbelianGroup, gens: &[Element]) -> Self {
        let mut member = vec![false; g.order()];
        member[0] = true;
        let mut elements = vec![0];
        let mut i = 0;
        while i < elements.len() {
            let a = elements[i];
            for &s in gens {
                let b = g.add(a, s % g.order());
                if !member[b] {
                    member[b] = true;
                    elements.push(b);
                }
            }
            i += 1;
        }
        elements.sort_unstable();
        Subgroup { parent: g.clone(), elements, member }
    }

    /// Validates closure under addition and negation.
    pub fn from_elements(g: &FiniteAbelianGroup, elements: &[Element]) -> Result<Self> {
        let mut els: Vec<Element> = elements.to_vec();
        els.sort_unstable();
        els.dedup();
        if els.iter().any(|&e| e >= g.order()) {
            return Err(Error::InvalidSubgroup(format!("{elements:?} has elements outside {g}")));
        }
        let s = Self::from_sorted(g, els);
        if !s.contains(0) {
            return Err(Error::InvalidSubgroup(format!("{s} lacks the identity")));
        }
        for &a in &s.elements {
            if !s.contains(g.neg(a)) || s.elements.iter().any(|&b| !s.contains(g.add(a, b))) {
                return Err(Error::InvalidSubgroup(format!("{s} is not closed in {g}")));
            }
        }
        Ok(s)
    }

    pub fn parent(&self) -> &FiniteAbelianGroup {
        &self.parent
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    pub fn order(&self) -> usize {
        self.elements.len()
    }

    #[inline]
    pub fn contains(&self, e: Element) -> bool {
        self.member.get(e).copied().unwrap_or(false)
    }

    pub fn is_subgroup_of(&self, other: &Subgroup) -> bool {
        self.parent == other.parent && self.elements.iter().all(|&e| other.contains(e))
    }

    pub fn intersection(&self, other: &Subgroup) -> Subgroup {
        let els = self.elements.iter().copied().filter(|&e| other.contains(e)).collect();
        Self::from_sorted(&self.parent, els)
    }

    /// Subgroup generated by the union.
    pub fn join(&self, other: &Subgroup) -> Subgroup {
        let mut gens = self.elements.clone();
        gens.extend_from_slice(&other.elements);
        Self::generated_by(&self.parent, &gens)
    }
}

/// Coset representatives of `sub` inside an ambient subgroup (the whole group
/// for an ordinary transversal, `H` for `T_{K<=H}`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transversal {
    subgroup: Subgroup,
    coset_reps: Vec<Element>,
    /// For every element of the parent group lying in the ambient subgroup,
    /// the representative of its coset.
    rep_of: Vec<Option<Element>>,
}

impl Transversal {
    /// Canonical (smallest-index) representatives of the cosets of `sub` in `ambient`.
    /// Requires `sub <= ambient`.
    pub fn relative(sub: &Subgroup, ambient: &Subgroup) -> Self {
        let g = &sub.parent;
        let mut rep_of = vec![None; g.order()];
        let mut coset_reps = Vec::new();
        for &a in ambient.elements() {
            if rep_of[a].is_some() {
                continue;
            }
            coset_reps.push(a);
            for &h in sub.elements() {
                rep_of[g.add(a, h)] = Some(a);
            }
        }
        Transversal { subgroup: sub.clone(), coset_reps, rep_of }
    }

    pub fn subgroup(&self) -> &Subgroup {
        &self.subgroup
    }

    pub fn coset_reps(&self) -> &[Element] {
        &self.coset_reps
    }

    pub fn len(&self) -> usize {
        self.coset_reps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coset_reps.is_empty()
    }

    /// Representative of the coset of `g`, if `g` lies in the ambient subgroup.
    pub fn rep(&self, g: Element) -> Option<Element> {
        self.rep_of.get(g).copied().flatten()
    }

    pub fn position(&self, rep: Element) -> Option<usize> {
        self.coset_reps.iter().position(|&r| r == rep)
    }
}

/// Precomputed three-way split `g = [g]_K + [g]_{T_{K<=H}} + [g]_{T_H}` for `K <= H <= G`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NestedCosets {
    k: Subgroup,
    h: Subgroup,
    t_h: Transversal,
    t_kh: Transversal,
}

impl NestedCosets {
    pub fn new(k: &Subgroup, h: &Subgroup) -> Result<Self> {
        if k.parent != h.parent {
            return Err(Error::InvalidSubgroup("K and H live in different groups".into()));
        }
        if !k.is_subgroup_of(h) {
            return Err(Error::NestingViolation);
        }
        let whole = Subgroup::whole(&h.parent);
        Ok(NestedCosets {
            k: k.clone(),
            h: h.clone(),
            t_h: Transversal::relative(h, &whole),
            t_kh: Transversal::relative(k, h),
        })
    }

    pub fn k(&self) -> &Subgroup {
        &self.k
    }

    pub fn h(&self) -> &Subgroup {
        &self.h
    }

    /// `T_H`, representatives of the cosets of H in G.
    pub fn t_h(&self) -> &Transversal {
        &self.t_h
    }

    /// `T_{K<=H}`, representatives of the cosets of K in H.
    pub fn t_kh(&self) -> &Transversal {
        &self.t_kh
    }

    pub fn decompose(&self, g: Element) -> (Element, Element, Element) {
        let grp = &self.h.parent;
        let t = self.t_h.rep(g).expect("T_H covers the whole group");
        let in_h = grp.sub(g, t);
        let m = self.t_kh.rep(in_h).expect("g - [g]_{T_H} lies in H");
        (grp.sub(in_h, m), m, t)
    }

    pub fn compose(&self, k: Element, m: Element, t: Element) -> Element {
        let grp = &self.h.parent;
        grp.add(grp.add(k, m), t)
    }
}
