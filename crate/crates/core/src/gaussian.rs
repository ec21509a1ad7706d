//! Holstein-Primakoff Gaussian engine.
//!
//! Spins are mapped to bosons (`S^z = n - s`, `S^+ ~ sqrt(2s) a^dag`), which
//! turns every Hamiltonian used here into an excitation-conserving quadratic
//! form `sum_ij M_ij R_i^dag R_j` with `R = (a, b_1, .., b_N)`. The state is the
//! covariance matrix `Gamma_ij = <R_i^dag R_j>`; over a substep of length `dt`
//! with frozen `M` it maps to `conj(U) Gamma U^T`, `U = exp(-i M dt)`.
//! Occupation-dependent (mean-field) entries of `M` are refreshed from the
//! diagonal of `Gamma` at every substep.

use faer::{c64, Mat, MatRef};

use crate::error::{Error, Result};
use crate::exact::hamiltonian::{ChainParams, HbnEffectiveParams};
use crate::linalg::{self, HermitianEigen};
use crate::schedule::{CycleSchedule, PolarizationRecord, RecordPolicy, ScheduleCursor};
use crate::spin::SpinQuantum;

/// Stability factor: `dt = STEP_FACTOR / max_{i != j} |M_ij|`.
pub const STEP_FACTOR: f64 = 0.05;
/// Eigenvalue floor used for positivity checks of `Gamma`.
pub const PSD_FLOOR: f64 = -1e-8;

/// Mode 0 is the control, modes `1..=N` the bath sites.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeLayout {
    spins: Vec<f64>,
}

impl ModeLayout {
    pub fn new(bath: &[SpinQuantum]) -> Self {
        Self { spins: bath.iter().map(|s| s.s()).collect() }
    }

    pub fn bath_spins(&self) -> &[f64] {
        &self.spins
    }

    pub fn mode_count(&self) -> usize {
        self.spins.len() + 1
    }
}

/// Hermitian positive-semidefinite second-moment matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CovMatrix {
    data: Mat<c64>,
}

impl CovMatrix {
    /// Checks Hermiticity and positivity.
    pub fn new(data: Mat<c64>) -> Result<Self> {
        if data.nrows() != data.ncols() {
            return Err(Error::DimensionMismatch { expected: data.nrows(), got: data.ncols() });
        }
        let defect = linalg::hermiticity_defect(data.as_ref());
        if defect > 1e-10 {
            return Err(Error::NotHermitian(defect));
        }
        let c = Self { data };
        c.check_psd()?;
        Ok(c)
    }

    /// Control vacuum and bath occupations `nbar_i = s_i`.
    pub fn thermal(layout: &ModeLayout) -> Self {
        let n = layout.mode_count();
        let data = Mat::from_fn(n, n, |i, j| {
            if i == j && i > 0 {
                c64::new(layout.spins[i - 1], 0.0)
            } else {
                c64::new(0.0, 0.0)
            }
        });
        Self { data }
    }

    pub fn data(&self) -> MatRef<'_, c64> {
        self.data.as_ref()
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn occupations(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.data[(i, i)].re).collect()
    }

    pub fn trace(&self) -> f64 {
        linalg::trace(self.data.as_ref()).re
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        linalg::min_eigenvalue(self.data.as_ref())
    }

    pub fn check_psd(&self) -> Result<()> {
        let min = self.min_eigenvalue()?;
        if min < PSD_FLOOR {
            return Err(Error::NotPositiveSemidefinite(min));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DynamicalKind {
    ChainV,
    HbnW,
}

#[derive(Clone, Debug)]
pub struct DynamicalMatrix {
    pub m: Mat<c64>,
    pub kind: DynamicalKind,
}

impl DynamicalMatrix {
    pub fn max_off_diagonal(&self) -> f64 {
        let n = self.m.nrows();
        let mut best = 0.0f64;
        for j in 0..n {
            for i in 0..n {
                if i != j {
                    best = best.max(self.m[(i, j)].norm());
                }
            }
        }
        best
    }
}

/// Chain matrix `V` for bath occupations `nbar` (length `N`).
pub fn build_v_chain(p: &ChainParams, nbar: &[f64]) -> DynamicalMatrix {
    let n = p.n;
    let jn = p.couplings();
    let mut m = Mat::<c64>::zeros(n + 1, n + 1);
    m[(0, 0)] = c64::new(p.omega0, 0.0);
    for k in 0..n {
        m[(0, k + 1)] = c64::new(jn[k], 0.0);
        m[(k + 1, 0)] = c64::new(jn[k], 0.0);
        let neighbours: Vec<usize> = [k.checked_sub(1), (k + 1 < n).then_some(k + 1)].into_iter().flatten().collect();
        let field: f64 = neighbours.iter().map(|&q| nbar[q]).sum::<f64>() - neighbours.len() as f64;
        m[(k + 1, k + 1)] = c64::new(p.h + 0.5 * p.lambda * p.zz_scale * field, 0.0);
        if k + 1 < n {
            m[(k + 1, k + 2)] = c64::new(p.lambda, 0.0);
            m[(k + 2, k + 1)] = c64::new(p.lambda, 0.0);
        }
    }
    DynamicalMatrix { m, kind: DynamicalKind::ChainV }
}

/// hBN matrix `W` at resonant drive for bath occupations `nbar`.
pub fn build_w_hbn(p: &HbnEffectiveParams, spins: &[SpinQuantum], nbar: &[f64]) -> DynamicalMatrix {
    let n = p.sites();
    let s: Vec<f64> = spins.iter().map(|q| q.s()).collect();
    let mut m = Mat::<c64>::zeros(n + 1, n + 1);
    m[(0, 0)] = c64::new(p.omega, 0.0);
    for i in 0..n {
        let beta = p.alpha[i] * (2.0 * s[i]).sqrt();
        m[(0, i + 1)] = beta;
        m[(i + 1, 0)] = beta.conj();
        let mut shift = 0.0;
        for j in 0..n {
            if j != i {
                shift += p.b[i][j] * (nbar[j] - 2.0 * s[j]);
                m[(i + 1, j + 1)] = c64::new(-0.5 * (s[i] * s[j]).sqrt() * p.b[i][j], 0.0);
            }
        }
        m[(i + 1, i + 1)] = c64::new(p.larmor[i] + 0.5 * shift, 0.0);
    }
    DynamicalMatrix { m, kind: DynamicalKind::HbnW }
}

/// Occupation-dependent generator of the Gaussian dynamics.
pub trait Dynamics: Sync {
    fn layout(&self) -> &ModeLayout;
    fn matrix(&self, nbar: &[f64]) -> DynamicalMatrix;

    /// Default substep from the largest coupling between modes.
    fn default_dt(&self) -> Option<f64> {
        let nbar = self.layout().bath_spins().to_vec();
        let g = self.matrix(&nbar).max_off_diagonal();
        (g > 0.0).then(|| STEP_FACTOR / g)
    }
}

#[derive(Clone, Debug)]
pub struct ChainDynamics {
    pub params: ChainParams,
    layout: ModeLayout,
}

impl ChainDynamics {
    pub fn new(params: ChainParams) -> Result<Self> {
        params.validate()?;
        let layout = ModeLayout::new(&params.spins()[1..]);
        Ok(Self { params, layout })
    }
}

impl Dynamics for ChainDynamics {
    fn layout(&self) -> &ModeLayout {
        &self.layout
    }

    fn matrix(&self, nbar: &[f64]) -> DynamicalMatrix {
        build_v_chain(&self.params, nbar)
    }
}

#[derive(Clone, Debug)]
pub struct HbnDynamics {
    pub params: HbnEffectiveParams,
    pub spins: Vec<SpinQuantum>,
    layout: ModeLayout,
}

impl HbnDynamics {
    pub fn new(params: HbnEffectiveParams, spins: Vec<SpinQuantum>) -> Result<Self> {
        params.validate(&spins)?;
        if params.delta != 0.0 {
            return Err(Error::Config("the Gaussian engine requires a resonant drive (delta = 0)".into()));
        }
        let layout = ModeLayout::new(&spins);
        Ok(Self { params, spins, layout })
    }
}

impl Dynamics for HbnDynamics {
    fn layout(&self) -> &ModeLayout {
        &self.layout
    }

    fn matrix(&self, nbar: &[f64]) -> DynamicalMatrix {
        build_w_hbn(&self.params, &self.spins, nbar)
    }
}

fn substeps(tau: f64, dt: Option<f64>) -> (usize, f64) {
    match dt {
        Some(dt) if dt < tau => {
            let n = (tau / dt - 1e-9).ceil().max(1.0) as usize;
            (n, tau / n as f64)
        }
        _ => (1, tau),
    }
}

/// Evolves `Gamma` for `tau`, rebuilding `M` from the current occupations
/// every substep. `dt = None` uses the dynamics' default.
pub fn propagate_cov(gamma: &CovMatrix, dynamics: &dyn Dynamics, tau: f64, dt: Option<f64>) -> Result<CovMatrix> {
    gamma.check_psd()?;
    propagate_unchecked(gamma, dynamics, tau, dt.or_else(|| dynamics.default_dt()))
}

fn propagate_unchecked(gamma: &CovMatrix, dynamics: &dyn Dynamics, tau: f64, dt: Option<f64>) -> Result<CovMatrix> {
    let n = gamma.dim();
    if n != dynamics.layout().mode_count() {
        return Err(Error::DimensionMismatch { expected: dynamics.layout().mode_count(), got: n });
    }
    let (steps, h) = substeps(tau, dt);
    let mut g = gamma.data.clone();
    for _ in 0..steps {
        let nbar: Vec<f64> = (1..n).map(|i| g[(i, i)].re).collect();
        let m = dynamics.matrix(&nbar);
        let u = HermitianEigen::new(m.m.as_ref())?.unitary(h);
        let uc = Mat::from_fn(n, n, |i, j| u[(i, j)].conj());
        let left = uc.as_ref() * g.as_ref();
        g = left.as_ref() * u.transpose();
        // keep exact Hermiticity against rounding
        for j in 0..n {
            g[(j, j)].im = 0.0;
            for i in j + 1..n {
                let avg = (g[(i, j)] + g[(j, i)].conj()) * 0.5;
                g[(i, j)] = avg;
                g[(j, i)] = avg.conj();
            }
        }
    }
    Ok(CovMatrix { data: g })
}

/// Traces out the control and re-attaches it in the vacuum.
pub fn reset_control_mode(gamma: &CovMatrix) -> CovMatrix {
    reset_control_mode_to(gamma, 0.0)
}

/// Re-attaches the control with occupation `n0` and no coherences.
pub fn reset_control_mode_to(gamma: &CovMatrix, n0: f64) -> CovMatrix {
    let mut data = gamma.data.clone();
    for k in 0..data.nrows() {
        data[(0, k)] = c64::new(0.0, 0.0);
        data[(k, 0)] = c64::new(0.0, 0.0);
    }
    data[(0, 0)] = c64::new(n0, 0.0);
    CovMatrix { data }
}

/// Mean and per-mode bath polarization `(Gamma_ii - s_i) / s_i`.
pub fn polarization_from_cov(gamma: &CovMatrix, layout: &ModeLayout) -> (f64, Vec<f64>) {
    let per: Vec<f64> = layout.spins.iter().enumerate().map(|(k, &s)| (gamma.data[(k + 1, k + 1)].re - s) / s).collect();
    let mean = per.iter().sum::<f64>() / per.len() as f64;
    (mean, per)
}

/// How the control mode is re-initialized each cycle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ControlPrep {
    Vacuum,
    Occupied(f64),
}

pub struct GaussianModel<'a> {
    pub dynamics: &'a dyn Dynamics,
    pub prep: ControlPrep,
}

/// Repeats `{reset control; propagate tau}` over the schedule.
pub fn run_hpa_protocol<F>(
    models: &[GaussianModel<'_>],
    schedule: &CycleSchedule,
    initial: CovMatrix,
    record_every: usize,
    dt: Option<f64>,
    mut check: F,
) -> Result<Vec<PolarizationRecord>>
where
    F: FnMut(usize, &CovMatrix) -> Result<()>,
{
    schedule.validate(models.len())?;
    let layout = models.first().ok_or_else(|| Error::Config("no dynamics given".into()))?.dynamics.layout().clone();
    if models.iter().any(|m| m.dynamics.layout() != &layout) {
        return Err(Error::Config("all dynamics must share one mode layout".into()));
    }
    initial.check_psd()?;
    let policy = RecordPolicy::new(record_every, schedule.total_cycles())?;
    let steps: Vec<Option<f64>> = models.iter().map(|m| dt.or_else(|| m.dynamics.default_dt())).collect();
    let mut cursor = ScheduleCursor::new(schedule);
    let mut gamma = initial;
    let mut out = vec![cursor.record(polarization_from_cov(&gamma, &layout).1, None)];
    for seg in schedule.steps() {
        let s = &schedule.segments[seg];
        let model = &models[s.hamiltonian];
        gamma = match model.prep {
            ControlPrep::Vacuum => reset_control_mode(&gamma),
            ControlPrep::Occupied(n0) => reset_control_mode_to(&gamma, n0),
        };
        gamma = propagate_unchecked(&gamma, model.dynamics, s.tau, steps[s.hamiltonian])?;
        cursor.advance(seg);
        check(cursor.cycle(), &gamma)?;
        if policy.records(cursor.cycle()) {
            out.push(cursor.record(polarization_from_cov(&gamma, &layout).1, None));
        }
    }
    Ok(out)
}

/// Bath polarizations of `propagate(reset(initial), t)` for each `t`, without
/// resets in between (one continuous evolution).
pub fn short_time_trajectory(model: &GaussianModel<'_>, initial: &CovMatrix, times: &[f64], dt: Option<f64>) -> Result<Vec<Vec<f64>>> {
    let layout = model.dynamics.layout();
    let dt = dt.or_else(|| model.dynamics.default_dt());
    let mut gamma = match model.prep {
        ControlPrep::Vacuum => reset_control_mode(initial),
        ControlPrep::Occupied(n0) => reset_control_mode_to(initial, n0),
    };
    let mut now = 0.0;
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        if t < now {
            return Err(Error::Config("times must be nondecreasing".into()));
        }
        if t > now {
            gamma = propagate_unchecked(&gamma, model.dynamics, t - now, dt)?;
            now = t;
        }
        out.push(polarization_from_cov(&gamma, layout).1);
    }
    Ok(out)
}

/// Signed relative error `(exact - hpa) / |exact + hpa|`; `None` when the
/// denominator falls below `1e-6`.
pub fn relative_error(exact: f64, hpa: f64) -> Option<f64> {
    let den = (exact + hpa).abs();
    (den >= 1e-6).then(|| (exact - hpa) / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{
        build_chain_hamiltonian, run_density_protocol, thermal_state, ControlReset, ExactModel,
    };
    use crate::spin::{DensityMatrix, ProductSpace};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    struct Fixed(Mat<c64>, ModeLayout);

    impl Dynamics for Fixed {
        fn layout(&self) -> &ModeLayout {
            &self.1
        }
        fn matrix(&self, _: &[f64]) -> DynamicalMatrix {
            DynamicalMatrix { m: self.0.clone(), kind: DynamicalKind::ChainV }
        }
    }

    fn c(x: f64) -> c64 {
        c64::new(x, 0.0)
    }

    #[test]
    fn v_for_two_bath_sites() {
        let p = ChainParams::new(2, 100.0, 90.0, 2.5, 10.0, 2.0);
        let nbar = [0.3, 0.8];
        let v = build_v_chain(&p, &nbar).m;
        let mut expect = Mat::<c64>::zeros(3, 3);
        expect[(0, 0)] = c(100.0);
        expect[(1, 1)] = c(90.0 + 2.5 * (0.8 - 1.0) / 2.0);
        expect[(2, 2)] = c(90.0 + 2.5 * (0.3 - 1.0) / 2.0);
        expect[(0, 1)] = c(10.0);
        expect[(1, 0)] = c(10.0);
        expect[(0, 2)] = c(10.0 / 4.0);
        expect[(2, 0)] = c(10.0 / 4.0);
        expect[(1, 2)] = c(2.5);
        expect[(2, 1)] = c(2.5);
        assert!(linalg::max_abs_diff(v.as_ref(), expect.as_ref()) < 1e-14);
    }

    #[test]
    fn v_interior_and_noninteracting() {
        let p = ChainParams::new(4, 1.0, 2.0, 0.6, 1.0, 1.0);
        let nbar = [0.1, 0.2, 0.3, 0.4];
        let v = build_v_chain(&p, &nbar).m;
        assert!((v[(2, 2)].re - (2.0 + 0.3 * (0.1 + 0.3 - 2.0))).abs() < 1e-15);
        assert_eq!(linalg::hermiticity_defect(v.as_ref()), 0.0);
        let p0 = ChainParams { lambda: 0.0, ..p };
        let v0 = build_v_chain(&p0, &nbar).m;
        for i in 1..5 {
            assert_eq!(v0[(i, i)], c(2.0));
            for j in 1..5 {
                if i != j {
                    assert_eq!(v0[(i, j)], c(0.0));
                }
            }
        }
    }

    fn hbn_example() -> (HbnEffectiveParams, Vec<SpinQuantum>) {
        let p = HbnEffectiveParams {
            omega: 5.0,
            delta: 0.0,
            larmor: vec![3.0, 4.0, 4.5],
            alpha: vec![c64::new(0.3, 0.4), c64::new(-0.2, 0.1), c64::new(0.0, 0.5)],
            b: vec![vec![0.0, 0.07, -0.02], vec![0.07, 0.0, 0.11], vec![-0.02, 0.11, 0.0]],
        };
        (p, vec![SpinQuantum::ONE, SpinQuantum::THREE_HALVES, SpinQuantum::THREE_HALVES])
    }

    #[test]
    fn w_entries() {
        let (p, spins) = hbn_example();
        let full = [2.0, 3.0, 3.0];
        let w = build_w_hbn(&p, &spins, &full).m;
        for i in 0..3 {
            assert!((w[(i + 1, i + 1)].re - p.larmor[i]).abs() < 1e-15);
        }
        assert_eq!(linalg::hermiticity_defect(w.as_ref()), 0.0);
        assert!((w[(0, 1)] - p.alpha[0] * 2f64.sqrt()).norm() < 1e-15);
        assert!((w[(2, 0)] - (p.alpha[1] * 3f64.sqrt()).conj()).norm() < 1e-15);
        assert!((w[(2, 3)].re + 0.5 * 1.5 * 0.11).abs() < 1e-15);
        let thermal = [1.0, 1.5, 1.5];
        let w = build_w_hbn(&p, &spins, &thermal).m;
        let expect = 3.0 + 0.5 * (0.07 * (1.5 - 3.0) - 0.02 * (1.5 - 3.0));
        assert!((w[(1, 1)].re - expect).abs() < 1e-15);
    }

    #[test]
    fn zero_generator_leaves_gamma() {
        let layout = ModeLayout::new(&[SpinQuantum::HALF, SpinQuantum::ONE]);
        let dynamics = Fixed(Mat::zeros(3, 3), layout.clone());
        let g = CovMatrix::new(Mat::from_fn(3, 3, |i, j| if i == j { c(0.2 + i as f64) } else if i + j == 1 { c64::new(0.1, 0.05 * (i as f64 - j as f64)) } else { c(0.0) })).unwrap();
        let out = propagate_cov(&g, &dynamics, 2.0, None).unwrap();
        assert!(linalg::max_abs_diff(out.data(), g.data()) < 1e-15);
    }

    #[test]
    fn resonant_beamsplitter_swaps() {
        let j = 0.7;
        let layout = ModeLayout::new(&[SpinQuantum::HALF]);
        let m = Mat::from_fn(2, 2, |i, k| if i == k { c(3.0) } else { c(j) });
        let dynamics = Fixed(m, layout.clone());
        let g = CovMatrix::new(Mat::from_fn(2, 2, |i, k| if i == k && i == 0 { c(0.8) } else if i == k { c(0.1) } else { c(0.0) })).unwrap();
        let out = propagate_cov(&g, &dynamics, PI / (2.0 * j), None).unwrap();
        assert!((out.occupations()[0] - 0.1).abs() < 1e-12);
        assert!((out.occupations()[1] - 0.8).abs() < 1e-12);
    }

    #[test]
    fn reset_behaviour() {
        let g = CovMatrix::new(Mat::from_fn(3, 3, |i, j| if i == j { c(0.5 + i as f64) } else { c(0.1) })).unwrap();
        let r = reset_control_mode(&g);
        assert!((r.trace() - (g.trace() - 0.5)).abs() < 1e-15);
        assert_eq!(reset_control_mode(&r), r);
        assert!(r.check_psd().is_ok());
        assert_eq!(r.data()[(1, 2)], c(0.1));
        assert_eq!(r.data()[(0, 2)], c(0.0));
    }

    #[test]
    fn rejects_non_psd_input() {
        let layout = ModeLayout::new(&[SpinQuantum::HALF]);
        let dynamics = Fixed(Mat::zeros(2, 2), layout);
        let bad = CovMatrix { data: Mat::from_fn(2, 2, |i, j| if i == j { c(-0.5) } else { c(0.0) }) };
        assert!(matches!(propagate_cov(&bad, &dynamics, 1.0, None), Err(Error::NotPositiveSemidefinite(_))));
        assert!(CovMatrix::new(bad.data.clone()).is_err());
    }

    #[test]
    fn polarization_limits() {
        let layout = ModeLayout::new(&[SpinQuantum::HALF, SpinQuantum::ONE, SpinQuantum::THREE_HALVES]);
        let with = |f: &dyn Fn(f64) -> f64| {
            let s = [0.5, 1.0, 1.5];
            CovMatrix { data: Mat::from_fn(4, 4, |i, j| if i == j && i > 0 { c(f(s[i - 1])) } else { c(0.0) }) }
        };
        assert_eq!(polarization_from_cov(&with(&|_| 0.0), &layout).0, -1.0);
        assert_eq!(polarization_from_cov(&with(&|s| s), &layout).0, 0.0);
        assert_eq!(polarization_from_cov(&with(&|s| 2.0 * s), &layout).0, 1.0);
        assert_eq!(polarization_from_cov(&CovMatrix::thermal(&layout), &layout).0, 0.0);
    }

    #[test]
    fn relative_error_cases() {
        assert_eq!(relative_error(-0.7, -0.7), Some(0.0));
        assert!((relative_error(-1.0, -0.9).unwrap() + 0.1 / 1.9).abs() < 1e-15);
        assert_eq!(relative_error(0.5, -0.5), None);
        assert!(relative_error(-0.9, -0.8).unwrap() < 0.0);
        assert!(relative_error(-0.8, -0.9).unwrap() > 0.0);
    }

    #[test]
    fn no_coupling_keeps_thermal() {
        let p = ChainParams::new(5, 100.0, 100.0, 2.0, 0.0, 2.0);
        let d = ChainDynamics::new(p).unwrap();
        let models = [GaussianModel { dynamics: &d, prep: ControlPrep::Vacuum }];
        let recs = run_hpa_protocol(&models, &CycleSchedule::uniform(0, 0.05, 50), CovMatrix::thermal(d.layout()), 10, None, |_, _| Ok(())).unwrap();
        for r in recs {
            assert!(r.mean().abs() < 1e-12);
        }
    }

    fn bath_index(sites: usize, up: Option<usize>) -> usize {
        // spin-1/2 digit 0 is up; bath site k is the k-th factor
        (0..sites).map(|k| if Some(k) == up { 0 } else { 1usize << (sites - 1 - k) }).sum()
    }

    /// One bath spin, control re-excited each cycle: populations evolve
    /// linearly in both descriptions.
    #[test]
    fn single_spin_excited_reset_matches_exact() {
        let p = ChainParams { zz_scale: 0.0, ..ChainParams::new(1, 1.3, 1.0, 0.0, 0.4, 2.0) };
        let exact = ExactModel { hamiltonian: build_chain_hamiltonian(&p).unwrap(), reset: ControlReset::basis(2, 0).unwrap() };
        let schedule = CycleSchedule::uniform(0, 0.9, 12);
        let rho = thermal_state(&p.spins()[1..]).unwrap();
        let er = run_density_protocol(&[exact], &schedule, rho, 1, |_, _| Ok(())).unwrap();
        let d = ChainDynamics::new(p).unwrap();
        let models = [GaussianModel { dynamics: &d, prep: ControlPrep::Occupied(1.0) }];
        let gr = run_hpa_protocol(&models, &schedule, CovMatrix::thermal(d.layout()), 1, Some(0.9), |_, _| Ok(())).unwrap();
        for (a, b) in er.iter().zip(&gr) {
            assert!((a.per_site[0] - b.per_site[0]).abs() < 1e-10);
        }
    }

    fn single_excitation_case(n: usize, lambda: f64, seed: u64) -> f64 {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let p = ChainParams { zz_scale: 0.0, ..ChainParams::new(n, 2.0, 1.7, lambda, 0.9, 1.0) };
        let amps: Vec<c64> = (0..n).map(|_| c64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        let amps: Vec<c64> = amps.iter().map(|a| a / norm).collect();
        let db = 1usize << n;
        let mut psi = vec![c(0.0); db];
        for (k, a) in amps.iter().enumerate() {
            psi[bath_index(n, Some(k))] = *a;
        }
        let rho = DensityMatrix::pure(ProductSpace::new(vec![2; n]).unwrap(), &psi).unwrap();
        let exact = ExactModel { hamiltonian: build_chain_hamiltonian(&p).unwrap(), reset: ControlReset::ground() };
        let schedule = CycleSchedule::uniform(0, 0.8, 6);
        let er = run_density_protocol(&[exact], &schedule, rho, 1, |_, _| Ok(())).unwrap();
        let g = Mat::from_fn(n + 1, n + 1, |i, j| if i == 0 || j == 0 { c(0.0) } else { amps[i - 1].conj() * amps[j - 1] });
        let d = ChainDynamics::new(p).unwrap();
        let models = [GaussianModel { dynamics: &d, prep: ControlPrep::Vacuum }];
        let gr = run_hpa_protocol(&models, &schedule, CovMatrix::new(g).unwrap(), 1, None, |_, _| Ok(())).unwrap();
        let mut worst = 0.0f64;
        for (a, b) in er.iter().zip(&gr) {
            for (x, y) in a.per_site.iter().zip(&b.per_site) {
                worst = worst.max((x - y).abs());
            }
        }
        worst
    }

    #[test]
    fn single_excitation_equivalence() {
        assert!(single_excitation_case(4, 0.6, 1) < 1e-10);
    }

    #[test]
    fn dt_halving_converges_for_chain() {
        let p = ChainParams::new(9, 100.0, 100.0, 2.0, 10.0, 2.0);
        let d = ChainDynamics::new(p).unwrap();
        let models = [GaussianModel { dynamics: &d, prep: ControlPrep::Vacuum }];
        let schedule = CycleSchedule::uniform(0, 0.05, 200);
        let dt = d.default_dt().unwrap();
        assert!((dt - 0.005).abs() < 1e-15);
        let run = |dt| run_hpa_protocol(&models, &schedule, CovMatrix::thermal(d.layout()), 200, Some(dt), |_, _| Ok(())).unwrap().last().unwrap().mean();
        assert!((run(dt) - run(dt / 2.0)).abs() < 1e-4);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10))]

        #[test]
        fn segments_conserve_trace_and_positivity(n in 2usize..8, lam in -3.0f64..3.0, j in -10.0f64..10.0, tau in 0.01f64..0.5, seed in 0u64..100) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let d = ChainDynamics::new(ChainParams::new(n, 100.0, 100.0, lam, j, 1.0)).unwrap();
            let a = Mat::<c64>::from_fn(n + 1, n + 1, |_, _| c64::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)));
            let g = CovMatrix::new(a.as_ref() * a.adjoint()).unwrap();
            let out = propagate_cov(&g, &d, tau, None).unwrap();
            prop_assert!((out.trace() - g.trace()).abs() <= 1e-8);
            prop_assert!(out.min_eigenvalue().unwrap() >= PSD_FLOOR);
            prop_assert!(linalg::hermiticity_defect(out.data()) <= 1e-10);
            let r = reset_control_mode(&out);
            prop_assert!(r.min_eigenvalue().unwrap() >= PSD_FLOOR);
        }

        #[test]
        fn single_excitation_equivalence_holds(n in 1usize..6, lam in -2.0f64..2.0, seed in 0u64..1000) {
            prop_assert!(single_excitation_case(n, lam, seed) < 1e-10);
        }
    }
}
