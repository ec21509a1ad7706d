use faer::{c64, Mat};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spin::{OperatorMatrix, ProductSpace, SpinQuantum};

/// Largest Hilbert-space dimension handled with dense density matrices.
pub const EXACT_DIM_CAP: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LocalOp {
    Z,
    Plus,
    Minus,
}

impl LocalOp {
    /// Change of `2m` produced by the operator.
    fn twice_dm(self) -> i32 {
        match self {
            LocalOp::Z => 0,
            LocalOp::Plus => 2,
            LocalOp::Minus => -2,
        }
    }
}

/// A coefficient times a product of single-site operators on distinct sites.
#[derive(Clone, Debug)]
pub struct Term {
    pub coeff: c64,
    pub factors: Vec<(usize, LocalOp)>,
}

/// Hamiltonian stored as a list of local terms; site 0 is the control spin.
#[derive(Clone, Debug)]
pub struct SpinHamiltonian {
    spins: Vec<SpinQuantum>,
    space: ProductSpace,
    terms: Vec<Term>,
}

impl SpinHamiltonian {
    pub fn new(spins: Vec<SpinQuantum>) -> Result<Self> {
        let space = ProductSpace::from_spins(&spins)?;
        Ok(Self { spins, space, terms: Vec::new() })
    }

    pub fn add(&mut self, coeff: c64, factors: &[(usize, LocalOp)]) -> Result<()> {
        for (k, &(site, _)) in factors.iter().enumerate() {
            if site >= self.spins.len() {
                return Err(Error::SiteOutOfRange { site, sites: self.spins.len() });
            }
            if factors[..k].iter().any(|&(s, _)| s == site) {
                return Err(Error::Config(format!("term repeats site {site}")));
            }
        }
        if coeff != c64::new(0.0, 0.0) {
            self.terms.push(Term { coeff, factors: factors.to_vec() });
        }
        Ok(())
    }

    pub fn add_real(&mut self, coeff: f64, factors: &[(usize, LocalOp)]) -> Result<()> {
        self.add(c64::new(coeff, 0.0), factors)
    }

    pub fn spins(&self) -> &[SpinQuantum] {
        &self.spins
    }

    pub fn space(&self) -> &ProductSpace {
        &self.space
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn dim(&self) -> usize {
        self.space.total_dim()
    }

    /// True when every term leaves the total `S^z` unchanged.
    pub fn conserves_magnetization(&self) -> bool {
        self.terms.iter().all(|t| t.factors.iter().map(|f| f.1.twice_dm()).sum::<i32>() == 0)
    }

    /// Appends the nonzero entries `(i, <i|H|j>)` of column `j`.
    pub fn column(&self, j: usize, out: &mut Vec<(usize, c64)>) {
        'terms: for term in &self.terms {
            let mut idx = j;
            let mut amp = term.coeff;
            for &(site, op) in term.factors.iter().rev() {
                let spin = self.spins[site];
                let k = self.space.digit(idx, site);
                let stride = self.space.stride(site);
                match op {
                    LocalOp::Z => amp *= spin.m(k),
                    LocalOp::Plus => {
                        if k == 0 {
                            continue 'terms;
                        }
                        amp *= spin.raising_element(k);
                        idx -= stride;
                    }
                    LocalOp::Minus => {
                        if k + 1 == spin.dim() {
                            continue 'terms;
                        }
                        amp *= spin.raising_element(k + 1);
                        idx += stride;
                    }
                }
                if amp == c64::new(0.0, 0.0) {
                    continue 'terms;
                }
            }
            out.push((idx, amp));
        }
    }

    /// Dense matrix, refusing dimensions above `cap`.
    pub fn to_dense_capped(&self, cap: usize) -> Result<OperatorMatrix> {
        let n = self.dim();
        if n > cap {
            return Err(Error::ExceedsExactCap { dim: n, cap });
        }
        let mut data = Mat::<c64>::zeros(n, n);
        let mut col = Vec::new();
        for j in 0..n {
            col.clear();
            self.column(j, &mut col);
            for &(i, v) in &col {
                data[(i, j)] += v;
            }
        }
        OperatorMatrix::new(self.space.clone(), data, true)
    }

    pub fn to_dense(&self) -> Result<OperatorMatrix> {
        self.to_dense_capped(EXACT_DIM_CAP)
    }

    /// Compressed sparse rows of a Hermitian `H`.
    pub fn to_sparse(&self) -> SparseHamiltonian {
        let n = self.dim();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        let mut col = Vec::new();
        for i in 0..n {
            // row i of a Hermitian matrix is the conjugate of column i
            col.clear();
            self.column(i, &mut col);
            col.sort_unstable_by_key(|e| e.0);
            let mut last = usize::MAX;
            for &(k, v) in &col {
                if k == last {
                    *vals.last_mut().unwrap() += v.conj();
                } else {
                    cols.push(k);
                    vals.push(v.conj());
                    last = k;
                }
            }
            row_ptr.push(cols.len());
        }
        SparseHamiltonian { dim: n, row_ptr, cols, vals }
    }
}

/// CSR storage used for matrix-free propagation of large pure states.
#[derive(Clone, Debug)]
pub struct SparseHamiltonian {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<c64>,
}

impl SparseHamiltonian {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// `y = H x`
    pub fn apply(&self, x: &[c64], y: &mut [c64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = c64::new(0.0, 0.0);
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            *yi = acc;
        }
    }

    /// Gershgorin enclosure `[lo, hi]` of the spectrum.
    pub fn spectral_bounds(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..self.dim {
            let mut center = 0.0;
            let mut radius = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                if self.cols[k] == i {
                    center += self.vals[k].re;
                } else {
                    radius += self.vals[k].norm();
                }
            }
            lo = lo.min(center - radius);
            hi = hi.max(center + radius);
        }
        (lo, hi)
    }
}

/// Parameters of the central-spin chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainParams {
    pub n: usize,
    pub omega0: f64,
    pub h: f64,
    pub lambda: f64,
    pub j: f64,
    pub alpha: f64,
    /// Weight of the `S^z S^z` neighbour term (1 for the physical model).
    #[serde(default = "one")]
    pub zz_scale: f64,
}

fn one() -> f64 {
    1.0
}

impl ChainParams {
    pub fn new(n: usize, omega0: f64, h: f64, lambda: f64, j: f64, alpha: f64) -> Self {
        Self { n, omega0, h, lambda, j, alpha, zz_scale: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 1 {
            return Err(Error::Config("N must be at least 1".into()));
        }
        if !(self.h > 0.0) || !self.h.is_finite() {
            return Err(Error::Config(format!("h must be positive, got {}", self.h)));
        }
        for (name, v) in [
            ("omega0", self.omega0),
            ("lambda", self.lambda),
            ("J", self.j),
            ("alpha", self.alpha),
            ("zz_scale", self.zz_scale),
        ] {
            if !v.is_finite() {
                return Err(Error::Config(format!("{name} must be finite")));
            }
        }
        Ok(())
    }

    /// `J_n = J / n^alpha` for `n = 1..=N`.
    pub fn couplings(&self) -> Vec<f64> {
        (1..=self.n).map(|n| self.j / (n as f64).powf(self.alpha)).collect()
    }

    pub fn spins(&self) -> Vec<SpinQuantum> {
        vec![SpinQuantum::HALF; self.n + 1]
    }
}

pub fn chain_spin_hamiltonian(p: &ChainParams) -> Result<SpinHamiltonian> {
    use LocalOp::*;
    p.validate()?;
    let mut h = SpinHamiltonian::new(p.spins())?;
    h.add_real(p.omega0, &[(0, Z)])?;
    for (k, jn) in p.couplings().into_iter().enumerate() {
        let n = k + 1;
        h.add_real(p.h, &[(n, Z)])?;
        h.add_real(jn, &[(0, Plus), (n, Minus)])?;
        h.add_real(jn, &[(0, Minus), (n, Plus)])?;
    }
    for n in 1..p.n {
        h.add_real(p.lambda * p.zz_scale, &[(n, Z), (n + 1, Z)])?;
        h.add_real(p.lambda, &[(n, Plus), (n + 1, Minus)])?;
        h.add_real(p.lambda, &[(n, Minus), (n + 1, Plus)])?;
    }
    Ok(h)
}

/// Dense chain Hamiltonian (control at site 0, bath sites 1..=N).
pub fn build_chain_hamiltonian(p: &ChainParams) -> Result<OperatorMatrix> {
    let dim = 1usize.checked_shl(p.n as u32 + 1).unwrap_or(usize::MAX);
    if dim > EXACT_DIM_CAP || p.n >= 63 {
        return Err(Error::ExceedsExactCap { dim, cap: EXACT_DIM_CAP });
    }
    chain_spin_hamiltonian(p)?.to_dense()
}

/// Dressed-frame electron-nuclear Hamiltonian.
#[derive(Clone, Debug, PartialEq)]
pub struct HbnEffectiveParams {
    pub omega: f64,
    pub delta: f64,
    /// Modified nuclear Larmor frequencies.
    pub larmor: Vec<f64>,
    /// Electron-nuclear flip-flop amplitudes.
    pub alpha: Vec<c64>,
    /// Secular dipolar couplings, symmetric with zero diagonal.
    pub b: Vec<Vec<f64>>,
}

impl HbnEffectiveParams {
    pub fn sites(&self) -> usize {
        self.larmor.len()
    }

    pub fn validate(&self, spins: &[SpinQuantum]) -> Result<()> {
        let n = self.larmor.len();
        if n < 1 {
            return Err(Error::Config("at least one nuclear site is required".into()));
        }
        if self.alpha.len() != n || spins.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: self.alpha.len().min(spins.len()) });
        }
        if self.b.len() != n || self.b.iter().any(|r| r.len() != n) {
            return Err(Error::DimensionMismatch { expected: n, got: self.b.len() });
        }
        for i in 0..n {
            for j in 0..n {
                if self.b[i][j] != self.b[j][i] {
                    return Err(Error::Config(format!("b[{i}][{j}] is not symmetric")));
                }
            }
        }
        Ok(())
    }
}

pub fn hbn_spin_hamiltonian(p: &HbnEffectiveParams, spins: &[SpinQuantum]) -> Result<SpinHamiltonian> {
    use LocalOp::*;
    p.validate(spins)?;
    let mut all = vec![SpinQuantum::HALF];
    all.extend_from_slice(spins);
    let mut h = SpinHamiltonian::new(all)?;
    h.add_real(p.delta / 2.0, &[(0, Plus)])?;
    h.add_real(p.delta / 2.0, &[(0, Minus)])?;
    h.add_real(p.omega, &[(0, Z)])?;
    let n = p.sites();
    for i in 0..n {
        let site = i + 1;
        h.add_real(p.larmor[i], &[(site, Z)])?;
        h.add(p.alpha[i], &[(0, Plus), (site, Minus)])?;
        h.add(p.alpha[i].conj(), &[(0, Minus), (site, Plus)])?;
        for j in i + 1..n {
            let b = p.b[i][j];
            h.add_real(b, &[(site, Z), (j + 1, Z)])?;
            h.add_real(-0.25 * b, &[(site, Plus), (j + 1, Minus)])?;
            h.add_real(-0.25 * b, &[(site, Minus), (j + 1, Plus)])?;
        }
    }
    Ok(h)
}

/// Dense dressed-frame Hamiltonian; site 0 is the electron.
pub fn build_hbn_hamiltonian(p: &HbnEffectiveParams, spins: &[SpinQuantum]) -> Result<OperatorMatrix> {
    let dim: usize = 2 * spins.iter().map(|s| s.dim()).product::<usize>();
    if dim > EXACT_DIM_CAP {
        return Err(Error::ExceedsExactCap { dim, cap: EXACT_DIM_CAP });
    }
    hbn_spin_hamiltonian(p, spins)?.to_dense()
}
