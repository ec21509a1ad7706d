use faer::{c64, Mat};

use crate::error::{Error, Result};
use crate::linalg::HermitianEigen;
use crate::spin::{DensityMatrix, OperatorMatrix, ProductSpace, SpinQuantum};

/// Pure state the control spin is re-initialized to at the start of a cycle.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlReset {
    amplitudes: Vec<c64>,
}

impl ControlReset {
    pub fn new(amplitudes: Vec<c64>) -> Result<Self> {
        let norm: f64 = amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if amplitudes.len() < 2 || !(norm > 0.0) {
            return Err(Error::Config("control reset must be a nonzero vector of dimension >= 2".into()));
        }
        Ok(Self { amplitudes: amplitudes.into_iter().map(|z| z / norm).collect() })
    }

    /// Basis state `k` (0 is `m = +s`).
    pub fn basis(dim: usize, k: usize) -> Result<Self> {
        if k >= dim {
            return Err(Error::SiteOutOfRange { site: k, sites: dim });
        }
        let mut v = vec![c64::new(0.0, 0.0); dim];
        v[k] = c64::new(1.0, 0.0);
        Self::new(v)
    }

    /// Spin-1/2 `S^z = -1/2` state: the chain's `|0>` and the dressed `|->`.
    pub fn ground() -> Self {
        Self::basis(2, 1).expect("valid")
    }

    pub fn amplitudes(&self) -> &[c64] {
        &self.amplitudes
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    /// Index of the single occupied basis state, if the reset is an `S^z` eigenstate.
    pub fn basis_index(&self) -> Option<usize> {
        let nz: Vec<usize> = (0..self.dim()).filter(|&k| self.amplitudes[k] != c64::new(0.0, 0.0)).collect();
        (nz.len() == 1).then(|| nz[0])
    }
}

/// Eigendecomposition of a Hamiltonian split over invariant index blocks.
#[derive(Clone, Debug)]
pub struct SpectralHamiltonian {
    space: ProductSpace,
    blocks: Vec<(Vec<usize>, HermitianEigen)>,
}

impl SpectralHamiltonian {
    /// Splits by total magnetization when `H` has no elements between
    /// sectors, otherwise keeps one dense block.
    pub fn new(h: &OperatorMatrix) -> Result<Self> {
        let space = h.space().clone();
        let n = space.total_dim();
        let charge: Vec<i32> = (0..n).map(|i| space.twice_magnetization(i)).collect();
        let data = h.data();
        let conserving = (0..n).all(|j| (0..n).all(|i| charge[i] == charge[j] || data[(i, j)] == c64::new(0.0, 0.0)));
        let groups: Vec<Vec<usize>> = if conserving {
            let mut keys: Vec<i32> = charge.clone();
            keys.sort_unstable();
            keys.dedup();
            keys.iter().map(|&q| (0..n).filter(|&i| charge[i] == q).collect()).collect()
        } else {
            vec![(0..n).collect()]
        };
        let blocks = groups
            .into_iter()
            .map(|idx| {
                let m = Mat::from_fn(idx.len(), idx.len(), |a, b| data[(idx[a], idx[b])]);
                HermitianEigen::new(m.as_ref()).map(|e| (idx, e))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { space, blocks })
    }

    pub fn space(&self) -> &ProductSpace {
        &self.space
    }

    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    /// `exp(-i H t)` restricted to each block.
    pub fn unitary_blocks(&self, t: f64) -> Vec<(&[usize], Mat<c64>)> {
        self.blocks.iter().map(|(idx, e)| (idx.as_slice(), e.unitary(t))).collect()
    }

    pub fn unitary(&self, t: f64) -> Mat<c64> {
        let n = self.space.total_dim();
        let mut u = Mat::<c64>::zeros(n, n);
        for (idx, blk) in self.unitary_blocks(t) {
            for (a, &i) in idx.iter().enumerate() {
                for (b, &j) in idx.iter().enumerate() {
                    u[(i, j)] = blk[(a, b)];
                }
            }
        }
        u
    }
}

/// One piece `K_c` restricted to an input and output index set of the bath.
#[derive(Clone, Debug)]
struct KrausBlock {
    control_out: usize,
    out: Vec<usize>,
    inp: Vec<usize>,
    mat: Mat<c64>,
}

/// The bath map of one polarization cycle,
/// `rho -> Tr_c[U (|r><r| (x) rho) U^dag] = sum_c K_c rho K_c^dag`
/// with `K_c = <c| U |r>`.
#[derive(Clone, Debug)]
pub struct CycleChannel {
    bath: ProductSpace,
    blocks: Vec<KrausBlock>,
}

impl CycleChannel {
    pub fn new(spectral: &SpectralHamiltonian, t: f64, reset: &ControlReset) -> Result<Self> {
        let full = spectral.space();
        let dc = full.site_dims()[0];
        if reset.dim() != dc {
            return Err(Error::DimensionMismatch { expected: dc, got: reset.dim() });
        }
        let bath = full.subspace(&(1..full.site_count()).collect::<Vec<_>>())?;
        let db = bath.total_dim();
        let sectored = spectral.block_count() > 1 && reset.basis_index().is_some();
        let blocks = if sectored {
            let r = reset.basis_index().unwrap();
            let amp = reset.amplitudes()[r];
            let mut out = Vec::new();
            for (idx, u) in spectral.unitary_blocks(t) {
                let cols: Vec<usize> = (0..idx.len()).filter(|&b| idx[b] / db == r).collect();
                if cols.is_empty() {
                    continue;
                }
                for c in 0..dc {
                    let rows: Vec<usize> = (0..idx.len()).filter(|&a| idx[a] / db == c).collect();
                    if rows.is_empty() {
                        continue;
                    }
                    out.push(KrausBlock {
                        control_out: c,
                        out: rows.iter().map(|&a| idx[a] % db).collect(),
                        inp: cols.iter().map(|&b| idx[b] % db).collect(),
                        mat: Mat::from_fn(rows.len(), cols.len(), |a, b| u[(rows[a], cols[b])] * amp),
                    });
                }
            }
            out
        } else {
            let u = spectral.unitary(t);
            let all: Vec<usize> = (0..db).collect();
            (0..dc)
                .map(|c| KrausBlock {
                    control_out: c,
                    out: all.clone(),
                    inp: all.clone(),
                    mat: Mat::from_fn(db, db, |i, j| {
                        reset
                            .amplitudes()
                            .iter()
                            .enumerate()
                            .map(|(r, &a)| u[(c * db + i, r * db + j)] * a)
                            .sum()
                    }),
                })
                .collect()
        };
        Ok(Self { bath, blocks })
    }

    pub fn bath(&self) -> &ProductSpace {
        &self.bath
    }

    /// Dense Kraus operators `K_c` (for checks).
    pub fn kraus_operators(&self) -> Vec<Mat<c64>> {
        let db = self.bath.total_dim();
        let dc = self.blocks.iter().map(|b| b.control_out + 1).max().unwrap_or(0);
        let mut ks = vec![Mat::<c64>::zeros(db, db); dc];
        for blk in &self.blocks {
            for (a, &i) in blk.out.iter().enumerate() {
                for (b, &j) in blk.inp.iter().enumerate() {
                    ks[blk.control_out][(i, j)] += blk.mat[(a, b)];
                }
            }
        }
        ks
    }

    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        if rho.space() != &self.bath {
            return Err(Error::DimensionMismatch { expected: self.bath.total_dim(), got: rho.dim() });
        }
        let db = self.bath.total_dim();
        let src = rho.data();
        let mut dst = Mat::<c64>::zeros(db, db);
        for a in &self.blocks {
            for b in &self.blocks {
                if a.control_out != b.control_out {
                    continue;
                }
                let sub = Mat::from_fn(a.inp.len(), b.inp.len(), |i, j| src[(a.inp[i], b.inp[j])]);
                if sub.col_iter().all(|c| c.iter().all(|z| *z == c64::new(0.0, 0.0))) {
                    continue;
                }
                let left = a.mat.as_ref() * sub.as_ref();
                let res = left.as_ref() * b.mat.adjoint();
                for (i, &oi) in a.out.iter().enumerate() {
                    for (j, &oj) in b.out.iter().enumerate() {
                        dst[(oi, oj)] += res[(i, j)];
                    }
                }
            }
        }
        DensityMatrix::from_parts(self.bath.clone(), dst)
    }
}

/// `Tr_c[U(tau) (|reset><reset| (x) rho_bath) U(tau)^dag]`
pub fn polarization_cycle(rho_bath: &DensityMatrix, h: &OperatorMatrix, tau: f64, reset: &ControlReset) -> Result<DensityMatrix> {
    let expected = h.dim() / h.space().site_dims()[0];
    if rho_bath.dim() != expected || h.space().site_dims()[1..] != *rho_bath.space().site_dims() {
        return Err(Error::DimensionMismatch { expected, got: rho_bath.dim() });
    }
    let spectral = SpectralHamiltonian::new(h)?;
    CycleChannel::new(&spectral, tau, reset)?.apply(rho_bath)
}

/// Infinite-temperature state `(x)_i I / (2 s_i + 1)`.
pub fn thermal_state(spins: &[SpinQuantum]) -> Result<DensityMatrix> {
    Ok(DensityMatrix::maximally_mixed(ProductSpace::from_spins(spins)?))
}

/// `<S^z_n> / s_n` for every site of `rho`.
pub fn per_site_polarization(rho: &DensityMatrix) -> Result<Vec<f64>> {
    let space = rho.space();
    let data = rho.data();
    let spins = (0..space.site_count()).map(|s| space.spin(s)).collect::<Result<Vec<_>>>()?;
    let mut acc = vec![0.0; spins.len()];
    for i in 0..space.total_dim() {
        let p = data[(i, i)].re;
        if p == 0.0 {
            continue;
        }
        for (site, spin) in spins.iter().enumerate() {
            acc[site] += p * spin.m(space.digit(i, site)) / spin.s();
        }
    }
    Ok(acc)
}

/// Site-averaged polarization, in `[-1, 1]`.
pub fn mean_polarization(rho: &DensityMatrix) -> Result<f64> {
    let p = per_site_polarization(rho)?;
    Ok(p.iter().sum::<f64>() / p.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::hamiltonian::{build_chain_hamiltonian, build_hbn_hamiltonian, ChainParams, HbnEffectiveParams};
    use crate::linalg;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn up_state(space: ProductSpace) -> DensityMatrix {
        let mut psi = vec![c64::new(0.0, 0.0); space.total_dim()];
        psi[0] = c64::new(1.0, 0.0);
        DensityMatrix::pure(space, &psi).unwrap()
    }

    #[test]
    fn thermal_states() {
        let t = thermal_state(&[SpinQuantum::HALF]).unwrap();
        assert_eq!(t.data()[(0, 0)], c64::new(0.5, 0.0));
        assert_eq!(mean_polarization(&t).unwrap(), 0.0);
        let t = thermal_state(&[SpinQuantum::THREE_HALVES]).unwrap();
        assert!((0..4).all(|i| t.data()[(i, i)] == c64::new(0.25, 0.0)));
        let t = thermal_state(&[SpinQuantum::ONE, SpinQuantum::THREE_HALVES, SpinQuantum::HALF]).unwrap();
        assert!(mean_polarization(&t).unwrap().abs() < 1e-15);
    }

    #[test]
    fn extreme_polarizations() {
        let space = ProductSpace::new(vec![3, 4, 2]).unwrap();
        let top = up_state(space.clone());
        assert!((mean_polarization(&top).unwrap() - 1.0).abs() < 1e-15);
        let mut psi = vec![c64::new(0.0, 0.0); 24];
        psi[23] = c64::new(1.0, 0.0);
        let bottom = DensityMatrix::pure(space, &psi).unwrap();
        assert!((mean_polarization(&bottom).unwrap() + 1.0).abs() < 1e-15);
    }

    #[test]
    fn resonant_swap_flips_bath() {
        let j = 0.8;
        let p = ChainParams::new(1, 3.0, 3.0, 0.0, j, 2.0);
        let h = build_chain_hamiltonian(&p).unwrap();
        let rho = up_state(ProductSpace::new(vec![2]).unwrap());
        let out = polarization_cycle(&rho, &h, PI / (2.0 * j), &ControlReset::ground()).unwrap();
        assert!((mean_polarization(&out).unwrap() + 1.0).abs() < 1e-12);
        assert!((out.trace().re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_coupling_keeps_populations() {
        let p = ChainParams::new(3, 2.0, 1.3, 0.0, 0.0, 2.0);
        let h = build_chain_hamiltonian(&p).unwrap();
        let space = ProductSpace::new(vec![2, 2, 2]).unwrap();
        let w = [0.3, 0.1, 0.05, 0.15, 0.1, 0.1, 0.12, 0.08];
        let rho = DensityMatrix::new(space.clone(), Mat::from_fn(8, 8, |i, j| if i == j { c64::new(w[i], 0.0) } else { c64::new(0.0, 0.0) })).unwrap();
        let out = polarization_cycle(&rho, &h, 0.77, &ControlReset::ground()).unwrap();
        assert!(linalg::max_abs_diff(out.data(), rho.data()) < 1e-14);
    }

    #[test]
    fn sector_and_dense_channels_agree() {
        let p = ChainParams::new(3, 1.0, 1.2, 0.7, 0.9, 1.0);
        let h = build_chain_hamiltonian(&p).unwrap();
        let spectral = SpectralHamiltonian::new(&h).unwrap();
        assert_eq!(spectral.block_count(), 5);
        // a superposition reset forces the single-block path
        let amp = 1.0 / 2f64.sqrt();
        let mixed_reset = ControlReset::new(vec![c64::new(amp, 0.0), c64::new(0.0, amp)]).unwrap();
        let sector = CycleChannel::new(&spectral, 0.6, &ControlReset::ground()).unwrap();
        let blocked = CycleChannel::new(&spectral, 0.6, &mixed_reset).unwrap();
        let u = spectral.unitary(0.6);
        let db = 8;
        // brute force from the full unitary
        let rho = thermal_state(&[SpinQuantum::HALF; 3]).unwrap();
        let full_in = linalg::kron(Mat::from_fn(2, 2, |i, j| if i == 1 && j == 1 { c64::new(1.0, 0.0) } else { c64::new(0.0, 0.0) }).as_ref(), rho.data());
        let full_out = linalg::conjugate_by(u.as_ref(), full_in.as_ref());
        let reduced = Mat::<c64>::from_fn(db, db, |i, j| full_out[(i, j)] + full_out[(db + i, db + j)]);
        let a = sector.apply(&rho).unwrap();
        assert!(linalg::max_abs_diff(a.data(), reduced.as_ref()) < 1e-13);

        let mut psi_c = Mat::<c64>::zeros(2, 2);
        for i in 0..2 {
            for j in 0..2 {
                psi_c[(i, j)] = mixed_reset.amplitudes()[i] * mixed_reset.amplitudes()[j].conj();
            }
        }
        let full_in = linalg::kron(psi_c.as_ref(), rho.data());
        let full_out = linalg::conjugate_by(u.as_ref(), full_in.as_ref());
        let reduced = Mat::<c64>::from_fn(db, db, |i, j| full_out[(i, j)] + full_out[(db + i, db + j)]);
        let b = blocked.apply(&rho).unwrap();
        assert!(linalg::max_abs_diff(b.data(), reduced.as_ref()) < 1e-13);
    }

    #[test]
    fn kraus_completeness() {
        let p = ChainParams::new(4, 1.0, 1.0, 0.5, 1.3, 0.5);
        let h = build_chain_hamiltonian(&p).unwrap();
        let ch = CycleChannel::new(&SpectralHamiltonian::new(&h).unwrap(), 1.7, &ControlReset::ground()).unwrap();
        let ks = ch.kraus_operators();
        let mut sum = Mat::<c64>::zeros(16, 16);
        for k in &ks {
            sum = sum + k.adjoint() * k;
        }
        assert!(linalg::max_abs_diff(sum.as_ref(), Mat::<c64>::identity(16, 16).as_ref()) < 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let h = build_chain_hamiltonian(&ChainParams::new(2, 1.0, 1.0, 1.0, 1.0, 1.0)).unwrap();
        let rho = thermal_state(&[SpinQuantum::HALF; 3]).unwrap();
        assert!(matches!(polarization_cycle(&rho, &h, 1.0, &ControlReset::ground()), Err(Error::DimensionMismatch { .. })));
    }

    /// Direct diagonalization of the 6x6 electron plus spin-1 problem.
    #[test]
    fn single_nitrogen_oscillation() {
        let w = 2.0;
        let a = c64::new(0.3, -0.4);
        let p = HbnEffectiveParams { omega: w, delta: 0.0, larmor: vec![w], alpha: vec![a], b: vec![vec![0.0]] };
        let h = build_hbn_hamiltonian(&p, &[SpinQuantum::ONE]).unwrap();
        // start in |-> (x) |m=+1>, exchange with |+> (x) |0> at rate sqrt(2)|a|
        let mut rho = Mat::<c64>::zeros(3, 3);
        rho[(0, 0)] = c64::new(1.0, 0.0);
        let rho = DensityMatrix::new(ProductSpace::new(vec![3]).unwrap(), rho).unwrap();
        let spectral = SpectralHamiltonian::new(&h).unwrap();
        let full = HermitianEigen::new(h.data()).unwrap();
        for t in [0.3, 1.1, 2.9] {
            let out = CycleChannel::new(&spectral, t, &ControlReset::ground()).unwrap().apply(&rho).unwrap();
            let g = 2f64.sqrt() * a.norm();
            let moved = (g * t).sin().powi(2);
            let pol = per_site_polarization(&out).unwrap()[0];
            // m = +1 with weight 1 - moved, m = 0 with weight moved
            assert!((pol - (1.0 - moved)).abs() < 1e-12);
            // oracle: the full 6x6 eigendecomposition
            let u = full.unitary(t);
            let pop0: f64 = (0..2).map(|c| u[(c * 3, 3)].norm_sqr()).sum();
            let pop2: f64 = (0..2).map(|c| u[(c * 3 + 2, 3)].norm_sqr()).sum();
            assert!((pol - (pop0 - pop2)).abs() < 1e-12);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn cycles_preserve_trace_and_positivity(n in 1usize..5, lam in -3.0f64..3.0, j in -5.0f64..5.0, tau in 0.01f64..3.0) {
            let p = ChainParams::new(n, 2.0, 2.0, lam, j, 1.0);
            let h = build_chain_hamiltonian(&p).unwrap();
            let ch = CycleChannel::new(&SpectralHamiltonian::new(&h).unwrap(), tau, &ControlReset::ground()).unwrap();
            let mut rho = thermal_state(&p.spins()[1..]).unwrap();
            for _ in 0..5 {
                rho = ch.apply(&rho).unwrap();
                prop_assert!((rho.trace().re - 1.0).abs() <= 1e-10);
                prop_assert!(rho.min_eigenvalue().unwrap() >= -1e-8);
                let m = mean_polarization(&rho).unwrap();
                prop_assert!((-1.0 - 1e-10..=1.0 + 1e-10).contains(&m));
            }
        }
    }
}
