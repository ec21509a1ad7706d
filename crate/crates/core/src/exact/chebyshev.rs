//! Chebyshev expansion of `exp(-i H t)` acting on a vector, for Hamiltonians
//! too large to diagonalize.

use faer::c64;

use crate::exact::hamiltonian::SparseHamiltonian;

/// Bessel functions `J_0(x) .. J_{n-1}(x)` by Miller's backward recurrence.
pub fn bessel_j_sequence(x: f64, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    if n == 0 {
        return out;
    }
    if x == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let start = (n + 20).max((x.abs() * 1.5) as usize + 40);
    let start = start + start % 2;
    let (mut hi, mut cur) = (0.0f64, 1e-300f64);
    let mut norm = 0.0;
    let mut vals = vec![0.0; start + 1];
    vals[start] = cur;
    for k in (1..=start).rev() {
        let lo = 2.0 * k as f64 / x * cur - hi;
        hi = cur;
        cur = lo;
        vals[k - 1] = cur;
        if cur.abs() > 1e250 {
            for v in vals[k - 1..].iter_mut() {
                *v *= 1e-250;
            }
            hi *= 1e-250;
            cur *= 1e-250;
        }
    }
    for (k, v) in vals.iter().enumerate() {
        if k == 0 {
            norm += v;
        } else if k % 2 == 0 {
            norm += 2.0 * v;
        }
    }
    for k in 0..n.min(vals.len()) {
        out[k] = vals[k] / norm;
    }
    out
}

/// Precomputed expansion of `exp(-i H t)`.
#[derive(Clone, Debug)]
pub struct ChebyshevPropagator {
    center: f64,
    radius: f64,
    phase: c64,
    coeffs: Vec<c64>,
}

impl ChebyshevPropagator {
    pub fn new(h: &SparseHamiltonian, t: f64) -> Self {
        let (lo, hi) = h.spectral_bounds();
        let center = 0.5 * (lo + hi);
        let radius = (0.5 * (hi - lo)).max(1e-12) * 1.01;
        let x = radius * t;
        let n = (x.abs() * 1.2) as usize + 40;
        let j = bessel_j_sequence(x, n);
        let mut coeffs = Vec::with_capacity(n);
        let mut minus_i_pow = c64::new(1.0, 0.0);
        for (k, &jk) in j.iter().enumerate() {
            let w = if k == 0 { 1.0 } else { 2.0 };
            coeffs.push(minus_i_pow * (w * jk));
            minus_i_pow *= c64::new(0.0, -1.0);
            if k as f64 > x && jk.abs() < 1e-18 {
                break;
            }
        }
        Self { center, radius, phase: c64::cis(-center * t), coeffs }
    }

    pub fn terms(&self) -> usize {
        self.coeffs.len()
    }

    pub fn apply(&self, h: &SparseHamiltonian, psi: &[c64]) -> Vec<c64> {
        let n = psi.len();
        let scaled = |x: &[c64], y: &mut [c64]| {
            h.apply(x, y);
            for (yi, xi) in y.iter_mut().zip(x) {
                *yi = (*yi - *xi * self.center) / self.radius;
            }
        };
        let mut prev = psi.to_vec();
        let mut cur = vec![c64::new(0.0, 0.0); n];
        scaled(&prev, &mut cur);
        let mut acc: Vec<c64> = prev.iter().map(|z| z * self.coeffs[0]).collect();
        if self.coeffs.len() > 1 {
            for (a, z) in acc.iter_mut().zip(&cur) {
                *a += z * self.coeffs[1];
            }
        }
        let mut next = vec![c64::new(0.0, 0.0); n];
        for &ck in &self.coeffs[2..] {
            scaled(&cur, &mut next);
            for i in 0..n {
                next[i] = next[i] * 2.0 - prev[i];
                acc[i] += next[i] * ck;
            }
            std::mem::swap(&mut prev, &mut cur);
            std::mem::swap(&mut cur, &mut next);
        }
        for a in acc.iter_mut() {
            *a *= self.phase;
        }
        acc
    }
}
