//! Spin-s operator matrices, tensor-product embeddings, propagators and
//! partial traces for the exact engine.
//!
//! Every spin uses the basis `|s, m>` ordered `m = +s, s-1, ..., -s`, so the
//! lowest-weight state is the last basis vector. For a spin-1/2 this puts the
//! chain state `|0>` (S^z = -1/2) at index 1 and `|1>` (S^z = +1/2) at index 0.
//! In a [`ProductSpace`] site 0 is the most significant tensor factor, i.e.
//! `embed(A, 0) = A (x) I (x) ... (x) I`.

use faer::{c64, Mat, MatRef};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, HermitianEigen};

/// A half-integer spin magnitude, stored as `2s`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SpinQuantum {
    twice: u32,
}

impl SpinQuantum {
    pub const HALF: Self = Self { twice: 1 };
    pub const ONE: Self = Self { twice: 2 };
    pub const THREE_HALVES: Self = Self { twice: 3 };

    pub fn new(s: f64) -> Result<Self> {
        let twice = 2.0 * s;
        if !twice.is_finite() || twice < 1.0 || (twice - twice.round()).abs() > 1e-12 {
            return Err(Error::InvalidSpin(s));
        }
        Ok(Self { twice: twice.round() as u32 })
    }

    pub fn from_twice(twice: u32) -> Result<Self> {
        if twice == 0 {
            return Err(Error::InvalidSpin(0.0));
        }
        Ok(Self { twice })
    }

    pub fn from_dim(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidSpin((dim as f64 - 1.0) / 2.0));
        }
        Ok(Self { twice: (dim - 1) as u32 })
    }

    pub fn s(self) -> f64 {
        self.twice as f64 / 2.0
    }

    pub fn twice(self) -> u32 {
        self.twice
    }

    pub fn dim(self) -> usize {
        self.twice as usize + 1
    }

    /// Magnetic quantum number of basis index `k` (0 is `m = +s`).
    pub fn m(self, k: usize) -> f64 {
        self.s() - k as f64
    }

    /// `2m` of basis index `k`.
    pub fn twice_m(self, k: usize) -> i32 {
        self.twice as i32 - 2 * k as i32
    }

    /// `<m+1| S^+ |m>` for basis index `k` holding `m`; zero at the top.
    pub fn raising_element(self, k: usize) -> f64 {
        if k == 0 {
            return 0.0;
        }
        let (s, m) = (self.s(), self.m(k));
        (s * (s + 1.0) - m * (m + 1.0)).sqrt()
    }
}

/// Ordered tensor product of local spaces.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProductSpace {
    site_dims: Vec<usize>,
    strides: Vec<usize>,
    total_dim: usize,
}

impl ProductSpace {
    pub fn new(site_dims: Vec<usize>) -> Result<Self> {
        if site_dims.is_empty() || site_dims.iter().any(|&d| d < 1) {
            return Err(Error::Config("product space needs at least one site of dimension >= 1".into()));
        }
        let mut strides = vec![1; site_dims.len()];
        for k in (0..site_dims.len() - 1).rev() {
            strides[k] = strides[k + 1] * site_dims[k + 1];
        }
        let total_dim = site_dims.iter().product();
        Ok(Self { site_dims, strides, total_dim })
    }

    pub fn from_spins(spins: &[SpinQuantum]) -> Result<Self> {
        Self::new(spins.iter().map(|s| s.dim()).collect())
    }

    pub fn site_dims(&self) -> &[usize] {
        &self.site_dims
    }

    pub fn site_count(&self) -> usize {
        self.site_dims.len()
    }

    pub fn total_dim(&self) -> usize {
        self.total_dim
    }

    pub fn stride(&self, site: usize) -> usize {
        self.strides[site]
    }

    /// Local basis index of `site` inside the global basis index.
    pub fn digit(&self, index: usize, site: usize) -> usize {
        (index / self.strides[site]) % self.site_dims[site]
    }

    pub fn spin(&self, site: usize) -> Result<SpinQuantum> {
        SpinQuantum::from_dim(self.site_dims[site])
    }

    /// Total `2 * sum_i m_i` of a basis state.
    pub fn twice_magnetization(&self, index: usize) -> i32 {
        (0..self.site_count())
            .map(|site| {
                let d = self.site_dims[site];
                d as i32 - 1 - 2 * self.digit(index, site) as i32
            })
            .sum()
    }

    /// The subspace made of the listed sites, in the given order.
    pub fn subspace(&self, sites: &[usize]) -> Result<Self> {
        Self::new(sites.iter().map(|&s| self.site_dims[s]).collect())
    }
}

/// A dense operator on a [`ProductSpace`].
#[derive(Clone, Debug)]
pub struct OperatorMatrix {
    space: ProductSpace,
    data: Mat<c64>,
    hermitian: bool,
}

impl OperatorMatrix {
    pub fn new(space: ProductSpace, data: Mat<c64>, hermitian: bool) -> Result<Self> {
        let n = space.total_dim();
        if data.nrows() != n || data.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, got: data.nrows() });
        }
        if hermitian {
            let defect = linalg::hermiticity_defect(data.as_ref());
            let scale = linalg::max_abs(data.as_ref());
            if defect > 1e-12 * scale {
                return Err(Error::NotHermitian(defect));
            }
        }
        Ok(Self { space, data, hermitian })
    }

    pub fn identity(space: ProductSpace) -> Self {
        let n = space.total_dim();
        Self { space, data: Mat::identity(n, n), hermitian: true }
    }

    pub fn zeros(space: ProductSpace) -> Self {
        let n = space.total_dim();
        Self { space, data: Mat::zeros(n, n), hermitian: true }
    }

    pub fn space(&self) -> &ProductSpace {
        &self.space
    }

    pub fn data(&self) -> MatRef<'_, c64> {
        self.data.as_ref()
    }

    pub fn into_data(self) -> Mat<c64> {
        self.data
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn dim(&self) -> usize {
        self.space.total_dim()
    }

    /// Product on the same space; the result carries no Hermitian flag.
    pub fn matmul(&self, rhs: &Self) -> Result<Self> {
        if self.space != rhs.space {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: rhs.dim() });
        }
        Ok(Self { space: self.space.clone(), data: &self.data * &rhs.data, hermitian: false })
    }

    pub fn scaled(&self, factor: c64) -> Self {
        let hermitian = self.hermitian && factor.im == 0.0;
        Self { space: self.space.clone(), data: Mat::from_fn(self.dim(), self.dim(), |i, j| self.data[(i, j)] * factor), hermitian }
    }

    pub fn add(&self, rhs: &Self) -> Result<Self> {
        if self.space != rhs.space {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: rhs.dim() });
        }
        Ok(Self {
            space: self.space.clone(),
            data: &self.data + &rhs.data,
            hermitian: self.hermitian && rhs.hermitian,
        })
    }

    pub fn commutator(&self, rhs: &Self) -> Result<Mat<c64>> {
        if self.space != rhs.space {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: rhs.dim() });
        }
        Ok(linalg::commutator(self.data.as_ref(), rhs.data.as_ref()))
    }
}

/// `S^z, S^+, S^-, S^x, S^y` of one spin.
#[derive(Clone, Debug)]
pub struct LadderSet {
    pub sz: OperatorMatrix,
    pub splus: OperatorMatrix,
    pub sminus: OperatorMatrix,
    pub sx: OperatorMatrix,
    pub sy: OperatorMatrix,
}

pub fn ladder_operators(s: SpinQuantum) -> LadderSet {
    let d = s.dim();
    let space = ProductSpace::new(vec![d]).expect("dim >= 2");
    let sz = Mat::from_fn(d, d, |i, j| if i == j { c64::new(s.m(i), 0.0) } else { c64::new(0.0, 0.0) });
    let splus = Mat::from_fn(d, d, |i, j| {
        if j == i + 1 {
            c64::new(s.raising_element(j), 0.0)
        } else {
            c64::new(0.0, 0.0)
        }
    });
    let sminus = linalg::dagger(splus.as_ref());
    let sx = Mat::from_fn(d, d, |i, j| (splus[(i, j)] + sminus[(i, j)]) * 0.5);
    let sy = Mat::from_fn(d, d, |i, j| (splus[(i, j)] - sminus[(i, j)]) * c64::new(0.0, -0.5));
    let op = |m: Mat<c64>, h: bool| OperatorMatrix { space: space.clone(), data: m, hermitian: h };
    LadderSet {
        sz: op(sz, true),
        splus: op(splus, false),
        sminus: op(sminus, false),
        sx: op(sx, true),
        sy: op(sy, true),
    }
}

/// Lifts a single-site operator to `I (x) ... (x) op (x) ... (x) I`.
pub fn embed(op: &OperatorMatrix, site: usize, space: &ProductSpace) -> Result<OperatorMatrix> {
    if site >= space.site_count() {
        return Err(Error::SiteOutOfRange { site, sites: space.site_count() });
    }
    let d = space.site_dims()[site];
    if op.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: op.dim() });
    }
    let n = space.total_dim();
    let stride = space.stride(site);
    let mut data = Mat::<c64>::zeros(n, n);
    for col in 0..n {
        let local = space.digit(col, site);
        let base = col - local * stride;
        for row_local in 0..d {
            let v = op.data[(row_local, local)];
            if v != c64::new(0.0, 0.0) {
                data[(base + row_local * stride, col)] = v;
            }
        }
    }
    Ok(OperatorMatrix { space: space.clone(), data, hermitian: op.hermitian })
}

/// `U = exp(-i H t)` via Hermitian eigendecomposition.
pub fn propagator(h: &OperatorMatrix, t: f64) -> Result<OperatorMatrix> {
    ensure_hermitian(h)?;
    let evd = HermitianEigen::new(h.data())?;
    Ok(OperatorMatrix { space: h.space.clone(), data: evd.unitary(t), hermitian: false })
}

fn ensure_hermitian(h: &OperatorMatrix) -> Result<()> {
    let defect = linalg::hermiticity_defect(h.data());
    let scale = linalg::max_abs(h.data()).max(1.0);
    if !h.hermitian || defect > 1e-12 * scale {
        return Err(Error::NotHermitian(defect));
    }
    Ok(())
}

/// Trace-one Hermitian positive-semidefinite state.
#[derive(Clone, Debug)]
pub struct DensityMatrix {
    space: ProductSpace,
    data: Mat<c64>,
}

impl DensityMatrix {
    pub const TRACE_TOL: f64 = 1e-10;
    pub const EIGEN_FLOOR: f64 = -1e-10;

    /// Checked constructor.
    pub fn new(space: ProductSpace, data: Mat<c64>) -> Result<Self> {
        let rho = Self::from_parts(space, data)?;
        rho.validate(Self::EIGEN_FLOOR)?;
        Ok(rho)
    }

    /// Only checks shapes; used on hot paths where the invariants hold by
    /// construction.
    pub fn from_parts(space: ProductSpace, data: Mat<c64>) -> Result<Self> {
        let n = space.total_dim();
        if data.nrows() != n || data.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, got: data.nrows() });
        }
        Ok(Self { space, data })
    }

    pub fn pure(space: ProductSpace, psi: &[c64]) -> Result<Self> {
        let n = space.total_dim();
        if psi.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: psi.len() });
        }
        let norm2: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        let data = Mat::from_fn(n, n, |i, j| psi[i] * psi[j].conj() / norm2);
        Ok(Self { space, data })
    }

    pub fn maximally_mixed(space: ProductSpace) -> Self {
        let n = space.total_dim();
        let w = 1.0 / n as f64;
        let data = Mat::from_fn(n, n, |i, j| if i == j { c64::new(w, 0.0) } else { c64::new(0.0, 0.0) });
        Self { space, data }
    }

    /// Checks trace, Hermiticity and the eigenvalue floor.
    pub fn validate(&self, eigen_floor: f64) -> Result<()> {
        let tr = self.trace();
        if (tr.re - 1.0).abs() > Self::TRACE_TOL || tr.im.abs() > Self::TRACE_TOL {
            return Err(Error::Config(format!("density matrix trace {tr} != 1")));
        }
        let defect = linalg::hermiticity_defect(self.data.as_ref());
        if defect > 1e-10 {
            return Err(Error::NotHermitian(defect));
        }
        let min = self.min_eigenvalue()?;
        if min < eigen_floor {
            return Err(Error::NotPositiveSemidefinite(min));
        }
        Ok(())
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        linalg::min_eigenvalue(self.data.as_ref())
    }

    pub fn space(&self) -> &ProductSpace {
        &self.space
    }

    pub fn data(&self) -> MatRef<'_, c64> {
        self.data.as_ref()
    }

    pub fn into_data(self) -> Mat<c64> {
        self.data
    }

    pub fn trace(&self) -> c64 {
        linalg::trace(self.data.as_ref())
    }

    pub fn dim(&self) -> usize {
        self.space.total_dim()
    }

    /// `Tr(rho O)`
    pub fn expectation(&self, op: &OperatorMatrix) -> Result<c64> {
        if op.space != self.space {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: op.dim() });
        }
        let n = self.dim();
        let mut acc = c64::new(0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                acc += self.data[(i, j)] * op.data[(j, i)];
            }
        }
        Ok(acc)
    }

    /// Evolves `rho -> U rho U^dag`.
    pub fn conjugated(&self, u: &OperatorMatrix) -> Result<Self> {
        if u.space != self.space {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: u.dim() });
        }
        Ok(Self { space: self.space.clone(), data: linalg::conjugate_by(u.data(), self.data()) })
    }

    /// `rho_a (x) rho_b`
    pub fn tensor(&self, other: &Self) -> Result<Self> {
        let mut dims = self.space.site_dims().to_vec();
        dims.extend_from_slice(other.space.site_dims());
        Ok(Self { space: ProductSpace::new(dims)?, data: linalg::kron(self.data(), other.data()) })
    }
}

/// Reduced state on the sites in `keep` (in ascending site order).
pub fn partial_trace(rho: &DensityMatrix, keep: &[usize]) -> Result<DensityMatrix> {
    let space = rho.space();
    if keep.is_empty() {
        return Err(Error::EmptyKeepSet);
    }
    let mut keep: Vec<usize> = keep.to_vec();
    keep.sort_unstable();
    keep.dedup();
    if let Some(&bad) = keep.iter().find(|&&s| s >= space.site_count()) {
        return Err(Error::SiteOutOfRange { site: bad, sites: space.site_count() });
    }
    let traced: Vec<usize> = (0..space.site_count()).filter(|s| !keep.contains(s)).collect();
    let kept_space = space.subspace(&keep)?;
    let kd = kept_space.total_dim();
    let td: usize = traced.iter().map(|&s| space.site_dims()[s]).product();

    // offsets of kept-subspace and traced-subspace indices in the full index
    let offsets = |sites: &[usize], count: usize| -> Vec<usize> {
        (0..count)
            .map(|mut idx| {
                let mut off = 0;
                for &s in sites.iter().rev() {
                    let d = space.site_dims()[s];
                    off += (idx % d) * space.stride(s);
                    idx /= d;
                }
                off
            })
            .collect()
    };
    let kept_off = offsets(&keep, kd);
    let traced_off = offsets(&traced, td);

    let full = rho.data();
    let data = Mat::from_fn(kd, kd, |a, b| {
        traced_off
            .iter()
            .map(|&t| full[(kept_off[a] + t, kept_off[b] + t)])
            .sum::<c64>()
    });
    DensityMatrix::from_parts(kept_space, data)
}
