//! Blahut-Arimoto evaluators for the channel capacity and the rate-distortion
//! function. Both stop when the gap between their upper and lower bounds
//! falls below the tolerance.

use crate::dmc::StochasticMatrix;
use crate::error::{Error, Result};

pub const ORACLE_TOLERANCE: f64 = 1e-9;
const MAX_ITERATIONS: usize = 2_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct CapacityResult {
    /// Bits per channel use.
    pub capacity: f64,
    pub input: Vec<f64>,
    /// Upper minus lower bound at termination, in bits.
    pub gap: f64,
    pub iterations: usize,
}

/// `max_{p_X} I(X; Y)`.
pub fn capacity(w: &StochasticMatrix) -> Result<CapacityResult> {
    capacity_with_tolerance(w, ORACLE_TOLERANCE)
}

pub fn capacity_with_tolerance(w: &StochasticMatrix, tol: f64) -> Result<CapacityResult> {
    let (nx, ny) = (w.rows(), w.cols());
    let mut p = vec![1.0 / nx as f64; nx];
    let mut div = vec![0.0; nx];
    let mut q_y = vec![0.0; ny];
    for it in 1..=MAX_ITERATIONS {
        q_y.iter_mut().for_each(|v| *v = 0.0);
        for (x, &px) in p.iter().enumerate() {
            for (qy, &wy) in q_y.iter_mut().zip(w.row(x)) {
                *qy += px * wy;
            }
        }
        // div[x] = D(W(.|x) || q_Y) in nats.
        for (x, d) in div.iter_mut().enumerate() {
            *d = w.row(x).iter().zip(&q_y).filter(|(&wy, _)| wy > 0.0).map(|(&wy, &qy)| wy * (wy / qy).ln()).sum();
        }
        let lower_sum: f64 = p.iter().zip(&div).map(|(&px, &d)| px * d.exp()).sum();
        let lower = lower_sum.ln();
        let upper = div.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let gap = (upper - lower) / std::f64::consts::LN_2;
        if gap < tol {
            return Ok(CapacityResult { capacity: lower / std::f64::consts::LN_2, input: p, gap, iterations: it });
        }
        for (px, &d) in p.iter_mut().zip(&div) {
            *px *= d.exp() / lower_sum;
        }
    }
    Err(Error::InvalidParameter("capacity iteration did not converge".into()))
}

/// `R(D) = min I(X; U)` subject to `E d(X, U) <= D`, in bits. `distortion`
/// is `[x][u]`.
pub fn rate_distortion(p_x: &[f64], distortion: &[Vec<f64>], d: f64) -> Result<f64> {
    let nx = p_x.len();
    if distortion.len() != nx || nx == 0 {
        return Err(Error::AlphabetMismatch { expected: nx, found: distortion.len() });
    }
    let nu = distortion[0].len();
    if nu == 0 || distortion.iter().any(|r| r.len() != nu) {
        return Err(Error::InvalidParameter("distortion table must be rectangular".into()));
    }
    // Beyond D_max a constant reconstruction suffices.
    let d_max = (0..nu).map(|u| (0..nx).map(|x| p_x[x] * distortion[x][u]).sum::<f64>()).fold(f64::INFINITY, f64::min);
    if d >= d_max {
        return Ok(0.0);
    }
    let d_min: f64 = (0..nx).map(|x| p_x[x] * distortion[x].iter().cloned().fold(f64::INFINITY, f64::min)).sum();
    if d < d_min - 1e-15 {
        return Err(Error::InvalidParameter(format!("distortion {d} is below the minimum {d_min}")));
    }
    if d <= d_min + 1e-15 {
        return Ok(min_distortion_rate(p_x, distortion));
    }
    // D(s) decreases as the slope s < 0 decreases; bisect on s.
    let (mut lo, mut hi) = (-1.0, 0.0);
    while ba_point(p_x, distortion, lo).0 > d {
        lo *= 2.0;
        if lo < -1e6 {
            return Ok(min_distortion_rate(p_x, distortion));
        }
    }
    let mut best = ba_point(p_x, distortion, lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let point = ba_point(p_x, distortion, mid);
        if point.0 > d {
            hi = mid;
        } else {
            lo = mid;
            best = point;
        }
        if (point.0 - d).abs() < 1e-14 || hi - lo < 1e-15 {
            best = point;
            break;
        }
    }
    // Move along the curve from (D(s), R(s)) to D with slope s.
    let (ds, rs, s) = best;
    Ok((rs + s * (d - ds) / std::f64::consts::LN_2).max(0.0))
}

/// `(D, R in bits, s)` on the curve for slope `s`.
fn ba_point(p_x: &[f64], dist: &[Vec<f64>], s: f64) -> (f64, f64, f64) {
    let (nx, nu) = (p_x.len(), dist[0].len());
    let mut q = vec![1.0 / nu as f64; nu];
    let a: Vec<Vec<f64>> = dist.iter().map(|row| row.iter().map(|&dd| (s * dd).exp()).collect()).collect();
    let mut norm = vec![0.0; nx];
    let mut c = vec![0.0; nu];
    for _ in 0..MAX_ITERATIONS {
        for x in 0..nx {
            norm[x] = (0..nu).map(|u| q[u] * a[x][u]).sum();
        }
        for u in 0..nu {
            c[u] = (0..nx).map(|x| p_x[x] * a[x][u] / norm[x]).sum();
        }
        // Bounds on R(D(s)) in nats: upper - lower = max_u ln c(u) - sum_u q(u) ln c(u).
        let max_ln_c = c.iter().map(|v| v.ln()).fold(f64::NEG_INFINITY, f64::max);
        let avg_ln_c: f64 = q.iter().zip(&c).filter(|(&qu, _)| qu > 0.0).map(|(&qu, &cu)| qu * cu.ln()).sum();
        if (max_ln_c - avg_ln_c) / std::f64::consts::LN_2 < ORACLE_TOLERANCE * 1e-2 {
            break;
        }
        for u in 0..nu {
            q[u] *= c[u];
        }
    }
    for x in 0..nx {
        norm[x] = (0..nu).map(|u| q[u] * a[x][u]).sum();
    }
    let mut dd = 0.0;
    let mut r = 0.0;
    for x in 0..nx {
        for u in 0..nu {
            let cond = q[u] * a[x][u] / norm[x];
            if cond > 0.0 && p_x[x] > 0.0 {
                dd += p_x[x] * cond * dist[x][u];
                r += p_x[x] * cond * (cond / q[u]).log2();
            }
        }
    }
    (dd, r, s)
}

/// `R(D_min)`: the minimum of `I(X; U)` over channels supported on the
/// zero-excess-distortion pairs, by the same alternating iteration.
fn min_distortion_rate(p_x: &[f64], dist: &[Vec<f64>]) -> f64 {
    let (nx, nu) = (p_x.len(), dist[0].len());
    let allowed: Vec<Vec<bool>> = dist
        .iter()
        .map(|row| {
            let m = row.iter().cloned().fold(f64::INFINITY, f64::min);
            row.iter().map(|&v| v <= m + 1e-15).collect()
        })
        .collect();
    let mut q = vec![1.0 / nu as f64; nu];
    let mut norm = vec![0.0; nx];
    let mut c = vec![0.0; nu];
    for _ in 0..MAX_ITERATIONS {
        for x in 0..nx {
            norm[x] = (0..nu).filter(|&u| allowed[x][u]).map(|u| q[u]).sum();
        }
        for u in 0..nu {
            c[u] = (0..nx).filter(|&x| allowed[x][u]).map(|x| p_x[x] / norm[x]).sum();
        }
        let max_ln_c = c.iter().filter(|&&v| v > 0.0).map(|v| v.ln()).fold(f64::NEG_INFINITY, f64::max);
        let avg_ln_c: f64 = q.iter().zip(&c).filter(|(&qu, _)| qu > 0.0).map(|(&qu, &cu)| qu * cu.ln()).sum();
        if (max_ln_c - avg_ln_c) / std::f64::consts::LN_2 < ORACLE_TOLERANCE * 1e-2 {
            break;
        }
        for u in 0..nu {
            q[u] *= c[u];
        }
    }
    let mut r = 0.0;
    for x in 0..nx {
        let z: f64 = (0..nu).filter(|&u| allowed[x][u]).map(|u| q[u]).sum();
        for u in 0..nu {
            if allowed[x][u] && q[u] > 0.0 && p_x[x] > 0.0 {
                let cond = q[u] / z;
                r += p_x[x] * cond * (cond / q[u]).log2();
            }
        }
    }
    r
}

pub fn hamming(nx: usize, nu: usize) -> Vec<Vec<f64>> {
    (0..nx).map(|x| (0..nu).map(|u| if x == u { 0.0 } else { 1.0 }).collect()).collect()
}
