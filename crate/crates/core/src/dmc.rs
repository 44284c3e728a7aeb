//! Discrete memoryless channels with a group-structured input alphabet.
//!
//! All probabilities are kept in the linear domain. Transforms renormalize
//! their rows and flush entries below [`FLUSH_BELOW`] to zero. Output
//! alphabets of the transforms are index-encoded tuples, never merged.

use rand::Rng;

use crate::error::{Error, Result};
use crate::group::{Element, FiniteAbelianGroup, Subgroup};

/// Row sums must match 1 to this tolerance on construction.
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;

/// Entries smaller than this are set to zero after a transform.
pub const FLUSH_BELOW: f64 = 1e-300;

/// Default bound on the number of cells of a synthesized table.
pub const DEFAULT_TABLE_BOUND: usize = 1_000_000;

/// Shannon entropy in bits, with `0 log 0 = 0`.
pub fn entropy(p: &[f64]) -> f64 {
    p.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.log2()).sum()
}

/// Binary entropy function.
pub fn h2(p: f64) -> f64 {
    entropy(&[p, 1.0 - p])
}

fn check_distribution(p: &[f64], what: &str) -> Result<()> {
    if p.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
        return Err(Error::InvalidParameter(format!("{what} has a negative or non-finite entry")));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > ROW_SUM_TOLERANCE {
        return Err(Error::InvalidParameter(format!("{what} sums to {s}")));
    }
    Ok(())
}

fn normalize_rows(probs: &mut [f64], cols: usize) {
    for row in probs.chunks_mut(cols) {
        for v in row.iter_mut() {
            if *v < FLUSH_BELOW {
                *v = 0.0;
            }
        }
        let s: f64 = row.iter().sum();
        if s > 0.0 {
            row.iter_mut().for_each(|v| *v /= s);
        }
    }
}

/// A plain row-stochastic matrix; used for degradation links and test channels
/// whose input alphabet carries no group structure.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticMatrix {
    rows: usize,
    cols: usize,
    probs: Vec<f64>,
}

impl StochasticMatrix {
    pub fn new(rows: usize, cols: usize, mut probs: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidParameter("empty stochastic matrix".into()));
        }
        if probs.len() != rows * cols {
            return Err(Error::LengthMismatch { expected: rows * cols, found: probs.len() });
        }
        for (row, chunk) in probs.chunks(cols).enumerate() {
            let sum: f64 = chunk.iter().sum();
            if chunk.iter().any(|&x| !(x >= 0.0)) || (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(Error::NotStochastic { row, sum });
            }
        }
        normalize_rows(&mut probs, cols);
        Ok(StochasticMatrix { rows, cols, probs })
    }

    pub fn identity(n: usize) -> Self {
        let mut probs = vec![0.0; n * n];
        for i in 0..n {
            probs[i * n + i] = 1.0;
        }
        StochasticMatrix { rows: n, cols: n, probs }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.probs[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.probs[r * self.cols..(r + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }

    /// Parses whitespace-separated rows, one per line; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for line in text.lines() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let row: std::result::Result<Vec<f64>, _> =
                line.split(|c: char| c.is_whitespace() || c == ',').filter(|t| !t.is_empty()).map(str::parse).collect();
            rows.push(row.map_err(|e| Error::CorruptFile(format!("bad matrix entry: {e}")))?);
        }
        let cols = rows.first().map(Vec::len).unwrap_or(0);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::CorruptFile("ragged matrix rows".into()));
        }
        let n = rows.len();
        Self::new(n, cols, rows.into_iter().flatten().collect())
    }

    /// Random row-stochastic matrix with entries bounded away from zero.
    pub fn random<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Self {
        let mut probs: Vec<f64> = (0..rows * cols).map(|_| rng.gen_range(0.05..1.0)).collect();
        normalize_rows(&mut probs, cols);
        StochasticMatrix { rows, cols, probs }
    }
}

/// A DMC `W(y|x)` whose inputs are the elements of a finite Abelian group.
#[derive(Debug, Clone, PartialEq)]
pub struct Dmc {
    group: FiniteAbelianGroup,
    output_size: usize,
    probs: Vec<f64>,
}

impl Dmc {
    pub fn new(group: FiniteAbelianGroup, output_size: usize, probs: Vec<f64>) -> Result<Self> {
        let m = StochasticMatrix::new(group.order(), output_size, probs)?;
        Ok(Dmc { group, output_size, probs: m.probs })
    }

    pub fn from_matrix(group: FiniteAbelianGroup, m: StochasticMatrix) -> Result<Self> {
        if m.rows != group.order() {
            return Err(Error::AlphabetMismatch { expected: group.order(), found: m.rows });
        }
        Ok(Dmc { group, output_size: m.cols, probs: m.probs })
    }

    fn from_raw(group: FiniteAbelianGroup, output_size: usize, mut probs: Vec<f64>) -> Self {
        normalize_rows(&mut probs, output_size);
        Dmc { group, output_size, probs }
    }

    pub fn bsc(p: f64) -> Result<Self> {
        Self::new(FiniteAbelianGroup::cyclic(2)?, 2, vec![1.0 - p, p, p, 1.0 - p])
    }

    /// Binary erasure channel; output 2 is the erasure.
    pub fn bec(eps: f64) -> Result<Self> {
        Self::new(FiniteAbelianGroup::cyclic(2)?, 3, vec![1.0 - eps, 0.0, eps, 0.0, 1.0 - eps, eps])
    }

    /// Z-channel: a transmitted 1 is received as 0 with probability `p`.
    pub fn z_channel(p: f64) -> Result<Self> {
        Self::new(FiniteAbelianGroup::cyclic(2)?, 2, vec![1.0, 0.0, p, 1.0 - p])
    }

    /// q-ary symmetric channel over `group`: correct with probability `1 - p`,
    /// otherwise uniform over the other `q - 1` symbols.
    pub fn qsc(group: FiniteAbelianGroup, p: f64) -> Result<Self> {
        let q = group.order();
        let mut probs = vec![p / (q - 1) as f64; q * q];
        for x in 0..q {
            probs[x * q + x] = 1.0 - p;
        }
        Self::new(group, q, probs)
    }

    /// Additive-noise channel `y = x + e` with `e ~ noise`.
    pub fn additive(group: FiniteAbelianGroup, noise: &[f64]) -> Result<Self> {
        let q = group.order();
        if noise.len() != q {
            return Err(Error::AlphabetMismatch { expected: q, found: noise.len() });
        }
        let mut probs = vec![0.0; q * q];
        for x in 0..q {
            for e in 0..q {
                probs[x * q + group.add(x, e)] += noise[e];
            }
        }
        Self::new(group, q, probs)
    }

    pub fn identity(group: FiniteAbelianGroup) -> Self {
        let q = group.order();
        Dmc { group, output_size: q, probs: StochasticMatrix::identity(q).probs }
    }

    /// Every row equal to `row`.
    pub fn useless(group: FiniteAbelianGroup, row: &[f64]) -> Result<Self> {
        let probs = (0..group.order()).flat_map(|_| row.iter().copied()).collect();
        Self::new(group, row.len(), probs)
    }

    pub fn random<R: Rng + ?Sized>(group: FiniteAbelianGroup, output_size: usize, rng: &mut R) -> Self {
        let m = StochasticMatrix::random(group.order(), output_size, rng);
        Dmc { group, output_size, probs: m.probs }
    }

    pub fn group(&self) -> &FiniteAbelianGroup {
        &self.group
    }

    pub fn input_size(&self) -> usize {
        self.group.order()
    }

    pub fn output_size(&self) -> usize {
        self.output_size
    }

    #[inline]
    pub fn prob(&self, x: Element, y: usize) -> f64 {
        self.probs[x * self.output_size + y]
    }

    pub fn row(&self, x: Element) -> &[f64] {
        &self.probs[x * self.output_size..(x + 1) * self.output_size]
    }

    pub fn table(&self) -> &[f64] {
        &self.probs
    }

    /// Largest deviation of a row sum from 1.
    pub fn max_row_defect(&self) -> f64 {
        self.probs.chunks(self.output_size).map(|r| (r.iter().sum::<f64>() - 1.0).abs()).fold(0.0, f64::max)
    }

    /// `I(X;Y)` in bits for input distribution `p_x`.
    pub fn mutual_information(&self, p_x: &[f64]) -> f64 {
        let mut p_y = vec![0.0; self.output_size];
        for (x, &px) in p_x.iter().enumerate() {
            for (py, &w) in p_y.iter_mut().zip(self.row(x)) {
                *py += px * w;
            }
        }
        let h_y_given_x: f64 = p_x.iter().enumerate().map(|(x, &px)| px * entropy(self.row(x))).sum();
        entropy(&p_y) - h_y_given_x
    }

    /// Symmetric capacity: `I(X;Y)` with X uniform on the group.
    pub fn symmetric_capacity(&self) -> f64 {
        let q = self.input_size();
        self.mutual_information(&vec![1.0 / q as f64; q])
    }

    /// `Z(W_{x,x'}) = sum_y sqrt(W(y|x) W(y|x'))` for distinct inputs.
    pub fn bhattacharyya_pair(&self, x: Element, x2: Element) -> Result<f64> {
        if x == x2 {
            return Err(Error::InvalidPair(x));
        }
        Ok(self.affinity(x, x2))
    }

    fn affinity(&self, x: Element, x2: Element) -> f64 {
        self.row(x).iter().zip(self.row(x2)).map(|(&a, &b)| (a * b).sqrt()).sum()
    }

    /// Average Bhattacharyya parameter over ordered pairs of distinct inputs.
    pub fn bhattacharyya(&self) -> f64 {
        let q = self.input_size();
        let mut total = 0.0;
        for x in 0..q {
            for x2 in (0..q).filter(|&x2| x2 != x) {
                total += self.affinity(x, x2);
            }
        }
        total / (q * (q - 1)) as f64
    }

    /// `Z_d(W) = (1/q) sum_x sum_y sqrt(W(y|x) W(y|x+d))`.
    pub fn z_d(&self, d: Element) -> f64 {
        let q = self.input_size();
        (0..q).map(|x| self.affinity(x, self.group.add(x, d))).sum::<f64>() / q as f64
    }

    /// `Z^H(W) = sum_{d not in H} Z_d(W)`.
    pub fn z_subgroup(&self, h: &Subgroup) -> f64 {
        self.group.elements().filter(|&d| !h.contains(d)).map(|d| self.z_d(d)).sum()
    }

    /// `(D_d, D~_d)`: average absolute and squared row differences under shift `d`.
    pub fn distance_params(&self, d: Element) -> (f64, f64) {
        let q = self.input_size();
        let (mut abs, mut sq) = (0.0, 0.0);
        for u in 0..q {
            for (&a, &b) in self.row(u).iter().zip(self.row(self.group.add(u, d))) {
                abs += (a - b).abs();
                sq += (a - b) * (a - b);
            }
        }
        let scale = 1.0 / (2 * q) as f64;
        (abs * scale, sq * scale)
    }

    /// `I([X]_H; Y | [X]_{T_H})` with X uniform.
    pub fn conditional_capacity(&self, h: &Subgroup) -> Result<f64> {
        let t_h = self.group.canonical_transversal(h)?;
        let mut total = 0.0;
        let p_h = vec![1.0 / h.order() as f64; h.order()];
        for &t in t_h.coset_reps() {
            let rows: Vec<f64> =
                h.elements().iter().flat_map(|&e| self.row(self.group.add(t, e)).iter().copied()).collect();
            let sub = StochasticMatrix { rows: h.order(), cols: self.output_size, probs: rows };
            total += matrix_mutual_information(&sub, &p_h);
        }
        Ok(total / t_h.len() as f64)
    }

    pub fn minus_transform(&self) -> Result<Dmc> {
        self.minus_transform_bounded(DEFAULT_TABLE_BOUND)
    }

    /// `W^-(y1,y2|u1) = sum_{u2} (1/q) W(y1|u1+u2) W(y2|u2)`; output index `y1*|Y| + y2`.
    pub fn minus_transform_bounded(&self, bound: usize) -> Result<Dmc> {
        let (q, ny) = (self.input_size(), self.output_size);
        let out = ny * ny;
        check_bound(q * out, bound)?;
        let mut probs = vec![0.0; q * out];
        let inv_q = 1.0 / q as f64;
        for u1 in 0..q {
            let row = &mut probs[u1 * out..(u1 + 1) * out];
            for u2 in 0..q {
                let a = self.row(self.group.add(u1, u2));
                let b = self.row(u2);
                for (y1, &pa) in a.iter().enumerate() {
                    if pa == 0.0 {
                        continue;
                    }
                    for (y2, &pb) in b.iter().enumerate() {
                        row[y1 * ny + y2] += inv_q * pa * pb;
                    }
                }
            }
        }
        Ok(Dmc::from_raw(self.group.clone(), out, probs))
    }

    pub fn plus_transform(&self) -> Result<Dmc> {
        self.plus_transform_bounded(DEFAULT_TABLE_BOUND)
    }

    /// `W^+(y1,y2,u1|u2) = (1/q) W(y1|u1+u2) W(y2|u2)`; output index `(y1*|Y| + y2)*q + u1`.
    pub fn plus_transform_bounded(&self, bound: usize) -> Result<Dmc> {
        let (q, ny) = (self.input_size(), self.output_size);
        let out = ny * ny * q;
        check_bound(q * out, bound)?;
        let mut probs = vec![0.0; q * out];
        let inv_q = 1.0 / q as f64;
        for u2 in 0..q {
            let row = &mut probs[u2 * out..(u2 + 1) * out];
            for u1 in 0..q {
                let a = self.row(self.group.add(u1, u2));
                let b = self.row(u2);
                for (y1, &pa) in a.iter().enumerate() {
                    for (y2, &pb) in b.iter().enumerate() {
                        row[(y1 * ny + y2) * q + u1] = inv_q * pa * pb;
                    }
                }
            }
        }
        Ok(Dmc::from_raw(self.group.clone(), out, probs))
    }

    /// Equivalent channel with zero outputs dropped and outputs whose
    /// likelihood vectors are proportional merged. Bhattacharyya parameters and
    /// mutual informations are unchanged.
    pub fn merge_equivalent_outputs(&self) -> Dmc {
        let q = self.input_size();
        let mut keys: std::collections::HashMap<Vec<i64>, usize> = std::collections::HashMap::new();
        let mut columns: Vec<Vec<f64>> = Vec::new();
        for y in 0..self.output_size {
            let col: Vec<f64> = (0..q).map(|x| self.prob(x, y)).collect();
            let total: f64 = col.iter().sum();
            if total <= 0.0 {
                continue;
            }
            let key: Vec<i64> = col.iter().map(|&v| (v / total * 1e12).round() as i64).collect();
            match keys.get(&key) {
                Some(&c) => columns[c].iter_mut().zip(&col).for_each(|(a, b)| *a += b),
                None => {
                    keys.insert(key, columns.len());
                    columns.push(col);
                }
            }
        }
        let out = columns.len();
        let mut probs = vec![0.0; q * out];
        for (y, col) in columns.iter().enumerate() {
            for x in 0..q {
                probs[x * out + y] = col[x];
            }
        }
        Dmc::from_raw(self.group.clone(), out, probs)
    }

    /// Composes this channel with a link on its output alphabet:
    /// `W1(y1|x) = sum_{y2} W2(y2|x) link(y1|y2)`.
    pub fn degrade(&self, link: &StochasticMatrix) -> Result<Dmc> {
        if link.rows != self.output_size {
            return Err(Error::AlphabetMismatch { expected: self.output_size, found: link.rows });
        }
        let q = self.input_size();
        let mut probs = vec![0.0; q * link.cols];
        for x in 0..q {
            let out = &mut probs[x * link.cols..(x + 1) * link.cols];
            for (y2, &w) in self.row(x).iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                for (o, &l) in out.iter_mut().zip(link.row(y2)) {
                    *o += w * l;
                }
            }
        }
        Ok(Dmc::from_raw(self.group.clone(), link.cols, probs))
    }

    /// Transition matrix view (drops the group structure).
    pub fn to_matrix(&self) -> StochasticMatrix {
        StochasticMatrix { rows: self.input_size(), cols: self.output_size, probs: self.probs.clone() }
    }
}

fn check_bound(cells: usize, bound: usize) -> Result<()> {
    if cells > bound {
        return Err(Error::SynthesisTooLarge { cells, bound });
    }
    Ok(())
}

/// `I(X;Y)` for a plain matrix channel.
pub fn matrix_mutual_information(w: &StochasticMatrix, p_x: &[f64]) -> f64 {
    let mut p_y = vec![0.0; w.cols];
    for (x, &px) in p_x.iter().enumerate() {
        for (py, &v) in p_y.iter_mut().zip(w.row(x)) {
            *py += px * v;
        }
    }
    let h_cond: f64 = p_x.iter().enumerate().map(|(x, &px)| px * entropy(w.row(x))).sum();
    entropy(&p_y) - h_cond
}

/// Joint law `p_{XU}(x,u)` of a source symbol and its reconstruction, `u` in a group.
#[derive(Debug, Clone, PartialEq)]
pub struct JointSource {
    x_size: usize,
    u_group: FiniteAbelianGroup,
    joint: Vec<f64>,
}

impl JointSource {
    /// `joint` is indexed `[x * q + u]`.
    pub fn new(x_size: usize, u_group: FiniteAbelianGroup, joint: Vec<f64>) -> Result<Self> {
        let q = u_group.order();
        if joint.len() != x_size * q {
            return Err(Error::LengthMismatch { expected: x_size * q, found: joint.len() });
        }
        check_distribution(&joint, "joint source")?;
        let s: f64 = joint.iter().sum();
        let joint = joint.into_iter().map(|v| v / s).collect();
        Ok(JointSource { x_size, u_group, joint })
    }

    /// `p_{XU} = p_X(x) p_{U|X}(u|x)` from a source law and a forward test channel.
    pub fn from_test_channel(p_x: &[f64], test: &StochasticMatrix, u_group: FiniteAbelianGroup) -> Result<Self> {
        check_distribution(p_x, "source distribution")?;
        if test.rows != p_x.len() {
            return Err(Error::AlphabetMismatch { expected: p_x.len(), found: test.rows });
        }
        if test.cols != u_group.order() {
            return Err(Error::AlphabetMismatch { expected: u_group.order(), found: test.cols });
        }
        let q = u_group.order();
        let mut joint = vec![0.0; p_x.len() * q];
        for (x, &px) in p_x.iter().enumerate() {
            for u in 0..q {
                joint[x * q + u] = px * test.get(x, u);
            }
        }
        Self::new(p_x.len(), u_group, joint)
    }

    /// Doubly symmetric binary source: X uniform, `P(U = X) = agreement`.
    pub fn dsbs(agreement: f64) -> Result<Self> {
        let (a, b) = (0.5 * agreement, 0.5 * (1.0 - agreement));
        Self::new(2, FiniteAbelianGroup::cyclic(2)?, vec![a, b, b, a])
    }

    pub fn x_size(&self) -> usize {
        self.x_size
    }

    pub fn u_group(&self) -> &FiniteAbelianGroup {
        &self.u_group
    }

    #[inline]
    pub fn p(&self, x: usize, u: Element) -> f64 {
        self.joint[x * self.u_group.order() + u]
    }

    pub fn joint(&self) -> &[f64] {
        &self.joint
    }

    pub fn p_x(&self) -> Vec<f64> {
        self.joint.chunks(self.u_group.order()).map(|r| r.iter().sum()).collect()
    }

    pub fn p_u(&self) -> Vec<f64> {
        let q = self.u_group.order();
        let mut p = vec![0.0; q];
        for row in self.joint.chunks(q) {
            for (pu, &v) in p.iter_mut().zip(row) {
                *pu += v;
            }
        }
        p
    }

    pub fn h_u(&self) -> f64 {
        entropy(&self.p_u())
    }

    pub fn h_u_given_x(&self) -> f64 {
        entropy(&self.joint) - entropy(&self.p_x())
    }

    pub fn mutual_information(&self) -> f64 {
        entropy(&self.p_x()) + self.h_u() - entropy(&self.joint)
    }

    /// Expected distortion under `d[x][u]`.
    pub fn expected_distortion(&self, distortion: &[Vec<f64>]) -> f64 {
        let q = self.u_group.order();
        (0..self.x_size).flat_map(|x| (0..q).map(move |u| (x, u))).map(|(x, u)| self.p(x, u) * distortion[x][u]).sum()
    }

    pub fn random<R: Rng + ?Sized>(x_size: usize, u_group: FiniteAbelianGroup, rng: &mut R) -> Self {
        let q = u_group.order();
        let mut joint: Vec<f64> = (0..x_size * q).map(|_| rng.gen_range(0.02..1.0)).collect();
        let s: f64 = joint.iter().sum();
        joint.iter_mut().for_each(|v| *v /= s);
        JointSource { x_size, u_group, joint }
    }
}

/// Artificial channels of the lossy source code: `W_c(z|s) = p_U(z-s)` over `G -> G`
/// and `W_s(x,z|s) = p_{XU}(x, z-s)` over `G -> X x G` (output index `x*q + z`).
pub fn source_test_channels(p_xu: &JointSource) -> (Dmc, Dmc) {
    let g = p_xu.u_group.clone();
    let q = g.order();
    let p_u = p_xu.p_u();
    let mut wc = vec![0.0; q * q];
    let mut ws = vec![0.0; q * p_xu.x_size * q];
    for s in 0..q {
        for z in 0..q {
            let u = g.sub(z, s);
            wc[s * q + z] = p_u[u];
            for x in 0..p_xu.x_size {
                ws[s * p_xu.x_size * q + x * q + z] = p_xu.p(x, u);
            }
        }
    }
    let out_s = p_xu.x_size * q;
    (Dmc::from_raw(g.clone(), q, wc), Dmc::from_raw(g, out_s, ws))
}

/// The marginalization link `(x,z) -> z` under which `W_c` is a degraded `W_s`.
pub fn source_degradation_link(x_size: usize, q: usize) -> StochasticMatrix {
    let mut probs = vec![0.0; x_size * q * q];
    for x in 0..x_size {
        for z in 0..q {
            probs[(x * q + z) * q + z] = 1.0;
        }
    }
    StochasticMatrix { rows: x_size * q, cols: q, probs }
}

/// Artificial channels of the channel code: `W_s(z|u) = p_X(z-u)` over `G -> G`
/// and `W_c(y,z|u) = p_X(z-u) W(y|z-u)` over `G -> Y x G` (output index `y*q + z`).
pub fn channel_test_channels(p_x: &[f64], w: &Dmc) -> Result<(Dmc, Dmc)> {
    let g = w.group.clone();
    let q = g.order();
    if p_x.len() != q {
        return Err(Error::AlphabetMismatch { expected: q, found: p_x.len() });
    }
    check_distribution(p_x, "input distribution")?;
    let ny = w.output_size;
    let mut ws = vec![0.0; q * q];
    let mut wc = vec![0.0; q * ny * q];
    for u in 0..q {
        for z in 0..q {
            let x = g.sub(z, u);
            ws[u * q + z] = p_x[x];
            for y in 0..ny {
                wc[u * ny * q + y * q + z] = p_x[x] * w.prob(x, y);
            }
        }
    }
    Ok((Dmc::from_raw(g.clone(), q, ws), Dmc::from_raw(g, ny * q, wc)))
}

/// The link `(y,z) -> z` under which the channel-code `W_s` is a degraded `W_c`.
pub fn channel_degradation_link(y_size: usize, q: usize) -> StochasticMatrix {
    source_degradation_link(y_size, q)
}
