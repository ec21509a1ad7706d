//! Dense complex helpers on top of faer.

use faer::{c64, Mat, MatRef, Side};

use crate::error::{Error, Result};

pub const I: c64 = c64 { re: 0.0, im: 1.0 };

pub fn max_abs(m: MatRef<'_, c64>) -> f64 {
    let mut best = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            best = best.max(m[(i, j)].norm());
        }
    }
    best
}

/// max |M - M^dag|
pub fn hermiticity_defect(m: MatRef<'_, c64>) -> f64 {
    let n = m.nrows();
    let mut best = 0.0f64;
    for j in 0..n {
        for i in 0..=j {
            best = best.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    best
}

pub fn dagger(m: MatRef<'_, c64>) -> Mat<c64> {
    Mat::from_fn(m.ncols(), m.nrows(), |i, j| m[(j, i)].conj())
}

pub fn commutator(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> Mat<c64> {
    a * b - b * a
}

pub fn kron(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> Mat<c64> {
    let (ar, ac, br, bc) = (a.nrows(), a.ncols(), b.nrows(), b.ncols());
    Mat::from_fn(ar * br, ac * bc, |i, j| a[(i / br, j / bc)] * b[(i % br, j % bc)])
}

pub fn trace(m: MatRef<'_, c64>) -> c64 {
    (0..m.nrows().min(m.ncols())).map(|i| m[(i, i)]).sum()
}

pub fn max_abs_diff(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> f64 {
    assert_eq!((a.nrows(), a.ncols()), (b.nrows(), b.ncols()));
    let mut best = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            best = best.max((a[(i, j)] - b[(i, j)]).norm());
        }
    }
    best
}

/// Eigendecomposition of a Hermitian matrix, `M = V diag(values) V^dag`.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: Mat<c64>,
}

impl HermitianEigen {
    /// Decomposes `m` (assumed Hermitian; only the lower triangle is read).
    /// Real symmetric input takes the cheaper real path.
    pub fn new(m: MatRef<'_, c64>) -> Result<Self> {
        let n = m.nrows();
        if n == 0 {
            return Ok(Self { values: vec![], vectors: Mat::zeros(0, 0) });
        }
        let real = (0..n).all(|j| (j..n).all(|i| m[(i, j)].im == 0.0));
        if real {
            let re = Mat::<f64>::from_fn(n, n, |i, j| m[(i, j)].re);
            let evd = re.self_adjoint_eigen(Side::Lower).map_err(|_| Error::Eigen)?;
            let values = evd.S().column_vector().iter().copied().collect();
            let u = evd.U();
            let vectors = Mat::from_fn(n, n, |i, j| c64::new(u[(i, j)], 0.0));
            Ok(Self { values, vectors })
        } else {
            let evd = m.self_adjoint_eigen(Side::Lower).map_err(|_| Error::Eigen)?;
            let values = evd.S().column_vector().iter().map(|z| z.re).collect();
            Ok(Self { values, vectors: evd.U().to_owned() })
        }
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `exp(-i M t)`
    pub fn unitary(&self, t: f64) -> Mat<c64> {
        let v = self.vectors.as_ref();
        let n = v.nrows();
        let phases: Vec<c64> = self.values.iter().map(|&e| c64::cis(-e * t)).collect();
        let scaled = Mat::from_fn(n, n, |i, j| v[(i, j)] * phases[j]);
        scaled.as_ref() * v.adjoint()
    }
}

pub fn min_eigenvalue(m: MatRef<'_, c64>) -> Result<f64> {
    if m.nrows() == 0 {
        return Ok(0.0);
    }
    let vals = m.self_adjoint_eigenvalues(Side::Lower).map_err(|_| Error::Eigen)?;
    Ok(vals.iter().copied().fold(f64::INFINITY, f64::min))
}

/// `U A U^dag`
pub fn conjugate_by(u: MatRef<'_, c64>, a: MatRef<'_, c64>) -> Mat<c64> {
    let ua = u * a;
    ua.as_ref() * u.adjoint()
}
