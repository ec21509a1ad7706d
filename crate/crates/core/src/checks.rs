//! Invariant suite on small fixed instances, reported as measured defects
//! against tolerances.

use faer::{c64, Mat};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::exact::{
    build_chain_hamiltonian, build_hbn_hamiltonian, run_density_protocol, ChainParams, ControlReset, CycleChannel, ExactModel,
    SpectralHamiltonian,
};
use crate::gaussian::{propagate_cov, run_hpa_protocol, ChainDynamics, ControlPrep, CovMatrix, Dynamics, GaussianModel, HbnDynamics};
use crate::hbn::{
    dipolar_coefficients, generate_lattice, optimize_field_orientation, zfs_shifts, CouplingTable, FieldFrame, LatticeSite, LatticeSize,
    OrientationObjective, OrientationSearch, PhysicalConstants, Species,
};
use crate::linalg;
use crate::schedule::CycleSchedule;
use crate::spin::{embed, ladder_operators, DensityMatrix, OperatorMatrix, ProductSpace, SpinQuantum};

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    pub tolerance: f64,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.value.is_finite() && self.value <= self.tolerance
    }
}

fn c(v: f64) -> c64 {
    c64::new(v, 0.0)
}

/// Largest violation of `[Sz, S+] = S+`, `[S+, S-] = 2 Sz` and
/// `S^2 = s(s+1)` for spins 1/2 to 3.
pub fn ladder_algebra_defect() -> Result<f64> {
    let mut worst = 0.0f64;
    for twice in 1..=6 {
        let s = SpinQuantum::from_twice(twice)?;
        let l = ladder_operators(s);
        let a = l.sz.commutator(&l.splus)?;
        worst = worst.max(linalg::max_abs_diff(a.as_ref(), l.splus.data()));
        let b = l.splus.commutator(&l.sminus)?;
        worst = worst.max(linalg::max_abs_diff(b.as_ref(), l.sz.scaled(c(2.0)).data()));
        let sq = l.sx.matmul(&l.sx)?.add(&l.sy.matmul(&l.sy)?)?.add(&l.sz.matmul(&l.sz)?)?;
        let want = OperatorMatrix::identity(sq.space().clone()).scaled(c(s.s() * (s.s() + 1.0)));
        worst = worst.max(linalg::max_abs_diff(sq.data(), want.data()));
    }
    Ok(worst)
}

fn total_sz(space: &ProductSpace) -> Mat<c64> {
    let n = space.total_dim();
    Mat::from_fn(n, n, |i, j| if i == j { c(0.5 * space.twice_magnetization(i) as f64) } else { c(0.0) })
}

fn magnetization_commutator(h: &OperatorMatrix) -> f64 {
    let sz = total_sz(h.space());
    linalg::max_abs(linalg::commutator(h.data(), sz.as_ref()).as_ref()) / linalg::max_abs(h.data()).max(1.0)
}

fn frame() -> Result<FieldFrame> {
    FieldFrame::new(std::f64::consts::FRAC_PI_4, 0.23, 1.0)
}

fn small_hbn_table(sites: usize) -> Result<CouplingTable> {
    CouplingTable::new(generate_lattice(LatticeSize::Sites(sites), 1.5)?, frame()?, &PhysicalConstants::default())
}

/// `||[H, S^z_total]|| / ||H||` for a chain and a resonant lattice model.
pub fn magnetization_defect() -> Result<f64> {
    let chain = build_chain_hamiltonian(&ChainParams::new(5, 3.0, 2.5, 1.3, 0.9, 1.5))?;
    let table = small_hbn_table(5)?;
    let params = table.effective_params(table.larmor_bare[0], None)?;
    let hbn = build_hbn_hamiltonian(&params, &table.spins())?;
    Ok(magnetization_commutator(&chain).max(magnetization_commutator(&hbn)))
}

fn random_density(space: ProductSpace, rng: &mut ChaCha8Rng) -> Result<DensityMatrix> {
    let n = space.total_dim();
    let a = Mat::<c64>::from_fn(n, n, |_, _| c64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    let mut rho = a.as_ref() * a.adjoint();
    let tr = linalg::trace(rho.as_ref()).re;
    for j in 0..n {
        for i in 0..n {
            rho[(i, j)] /= tr;
        }
    }
    DensityMatrix::new(space, rho)
}

/// `(trace drift, -min eigenvalue)` over repeated cycles from a random bath
/// state, for a chain and a lattice model.
pub fn channel_defects() -> Result<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut tr, mut neg) = (0.0f64, 0.0f64);
    let table = small_hbn_table(3)?;
    let hbn = build_hbn_hamiltonian(&table.effective_params(table.larmor_bare[1], None)?, &table.spins())?;
    let chain = build_chain_hamiltonian(&ChainParams::new(4, 100.0, 100.0, 2.0, 10.0, 2.0))?;
    for (h, tau) in [(chain, 0.05), (hbn, 0.3)] {
        let bath = h.space().subspace(&(1..h.space().site_count()).collect::<Vec<_>>())?;
        let channel = CycleChannel::new(&SpectralHamiltonian::new(&h)?, tau, &ControlReset::ground())?;
        let mut rho = random_density(bath, &mut rng)?;
        for _ in 0..10 {
            rho = channel.apply(&rho)?;
            tr = tr.max((rho.trace() - c(1.0)).norm());
            neg = neg.max(-rho.min_eigenvalue()?);
        }
    }
    Ok((tr, neg))
}

/// Relative change of `tr Gamma` over one segment without reset.
pub fn covariance_trace_defect() -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let chain = ChainDynamics::new(ChainParams::new(6, 100.0, 100.0, 2.0, 10.0, 2.0))?;
    let table = small_hbn_table(9)?;
    let hbn = HbnDynamics::new(table.effective_params(table.larmor_bare[0], None)?, table.spins())?;
    let mut worst = 0.0f64;
    for (d, tau) in [(&chain as &dyn Dynamics, 0.05), (&hbn as &dyn Dynamics, 0.3)] {
        let n = d.layout().mode_count();
        let a = Mat::<c64>::from_fn(n, n, |_, _| c64::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)));
        let g = CovMatrix::new(a.as_ref() * a.adjoint())?;
        let out = propagate_cov(&g, d, tau, None)?;
        worst = worst.max((out.trace() - g.trace()).abs() / g.trace());
    }
    Ok(worst)
}

/// Largest per-site difference between the exact and Gaussian protocols when
/// the bath holds one excitation in a random superposition.
pub fn single_excitation_defect(n: usize, lambda: f64, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = ChainParams { zz_scale: 0.0, ..ChainParams::new(n, 2.0, 1.7, lambda, 0.9, 1.0) };
    let amps: Vec<c64> = (0..n).map(|_| c64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
    let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    let amps: Vec<c64> = amps.iter().map(|a| a / norm).collect();
    // basis digit 1 is spin down; the excited site carries digit 0
    let all_down = (1usize << n) - 1;
    let mut psi = vec![c(0.0); 1 << n];
    for (k, a) in amps.iter().enumerate() {
        psi[all_down & !(1 << (n - 1 - k))] = *a;
    }
    let rho = DensityMatrix::pure(ProductSpace::new(vec![2; n])?, &psi)?;
    let schedule = CycleSchedule::uniform(0, 0.8, 6);
    let exact = ExactModel { hamiltonian: build_chain_hamiltonian(&p)?, reset: ControlReset::ground() };
    let er = run_density_protocol(&[exact], &schedule, rho, 1, |_, _| Ok(()))?;
    let g = Mat::from_fn(n + 1, n + 1, |i, j| if i == 0 || j == 0 { c(0.0) } else { amps[i - 1].conj() * amps[j - 1] });
    let d = ChainDynamics::new(p)?;
    let gr = run_hpa_protocol(&[GaussianModel { dynamics: &d, prep: ControlPrep::Vacuum }], &schedule, CovMatrix::new(g)?, 1, None, |_, _| Ok(()))?;
    let mut worst = 0.0f64;
    for (a, b) in er.iter().zip(&gr) {
        for (x, y) in a.per_site.iter().zip(&b.per_site) {
            worst = worst.max((x - y).abs());
        }
    }
    Ok(worst)
}

/// Difference, relative to `g`, between the full dipolar operator
/// `g [I.J - 3 (I.r)(J.r)]` and its ladder decomposition with coefficients
/// `b, c, d`, for a pair of spins at separation `r`.
pub fn dipolar_decomposition_defect(si: SpinQuantum, sj: SpinQuantum, r: [f64; 3], frame: &FieldFrame) -> Result<f64> {
    let c = PhysicalConstants::default();
    let a = LatticeSite { species: Species::Boron11, position: r, ring: 1 };
    let o = LatticeSite { species: Species::Nitrogen14, position: [0.0; 3], ring: 1 };
    let coeff = dipolar_coefficients(&a, &o, frame, &c)?;
    let ([x, y, z], _) = frame.components(r)?;
    let space = ProductSpace::new(vec![si.dim(), sj.dim()])?;
    let (li, lj) = (ladder_operators(si), ladder_operators(sj));
    let e = |op, k| embed(op, k, &space);
    let (ix, iy, iz) = (e(&li.sx, 0)?, e(&li.sy, 0)?, e(&li.sz, 0)?);
    let (jx, jy, jz) = (e(&lj.sx, 1)?, e(&lj.sy, 1)?, e(&lj.sz, 1)?);
    let (ip, im, jp, jm) = (e(&li.splus, 0)?, e(&li.sminus, 0)?, e(&lj.splus, 1)?, e(&lj.sminus, 1)?);
    let mm = |a: &OperatorMatrix, b: &OperatorMatrix| a.matmul(b);
    let dot = mm(&ix, &jx)?.add(&mm(&iy, &jy)?)?.add(&mm(&iz, &jz)?)?;
    let ri = ix.scaled(c64::new(x, 0.0)).add(&iy.scaled(c64::new(y, 0.0)))?.add(&iz.scaled(c64::new(z, 0.0)))?;
    let rj = jx.scaled(c64::new(x, 0.0)).add(&jy.scaled(c64::new(y, 0.0)))?.add(&jz.scaled(c64::new(z, 0.0)))?;
    let direct = dot.add(&mm(&ri, &rj)?.scaled(c64::new(-3.0, 0.0)))?.scaled(c64::new(coeff.g, 0.0));
    let secular = mm(&iz, &jz)?.add(&mm(&ip, &jm)?.add(&mm(&im, &jp)?)?.scaled(c64::new(-0.25, 0.0)))?.scaled(c64::new(coeff.b, 0.0));
    let cterm = mm(&iz, &jp)?.add(&mm(&ip, &jz)?)?.scaled(coeff.c);
    let cdag = mm(&iz, &jm)?.add(&mm(&im, &jz)?)?.scaled(coeff.c.conj());
    let ladder = secular.add(&cterm)?.add(&cdag)?.add(&mm(&ip, &jp)?.scaled(coeff.d))?.add(&mm(&im, &jm)?.scaled(coeff.d.conj()))?;
    Ok(linalg::max_abs_diff(direct.data(), ladder.data()) / coeff.g)
}

/// `|theta* - pi/4|` in radians for the strongest-site objective.
pub fn optimal_polar_angle_defect() -> Result<f64> {
    let sites = generate_lattice(LatticeSize::Rings(2), 1.5)?;
    let search = OrientationSearch { objective: OrientationObjective::StrongestSite, ..Default::default() };
    let best = optimize_field_orientation(&sites, &search, 1.0, &PhysicalConstants::default())?;
    Ok((best.theta - std::f64::consts::FRAC_PI_4).abs())
}

/// `max(|D(0) - D| / D, |delta(0)|)`.
pub fn zfs_defect() -> Result<f64> {
    let c = PhysicalConstants::default();
    let (d0, delta0) = zfs_shifts(0.0, 1.0, &c)?;
    Ok(((d0 - c.d_angular()) / c.d_angular()).abs().max(delta0.abs()))
}

/// Change of the final mean polarization when the Gaussian substep is
/// halved, for a chain and a lattice run.
pub fn dt_halving_defect() -> Result<f64> {
    let chain = ChainDynamics::new(ChainParams::new(9, 100.0, 100.0, 2.0, 10.0, 2.0))?;
    let table = small_hbn_table(9)?;
    let wn = crate::hbn::bare_larmor(Species::Nitrogen14, 1.0, &PhysicalConstants::default());
    let wb = crate::hbn::bare_larmor(Species::Boron11, 1.0, &PhysicalConstants::default());
    let hn = HbnDynamics::new(table.effective_params(wn, None)?, table.spins())?;
    let hb = HbnDynamics::new(table.effective_params(wb, None)?, table.spins())?;
    let run = |models: &[GaussianModel<'_>], schedule: &CycleSchedule, dt: f64| -> Result<f64> {
        let recs = run_hpa_protocol(models, schedule, CovMatrix::thermal(models[0].dynamics.layout()), schedule.cycles, Some(dt), |_, _| Ok(()))?;
        Ok(recs.last().expect("final record").mean())
    };
    let mut worst = 0.0f64;
    let chain_models = [GaussianModel { dynamics: &chain, prep: ControlPrep::Vacuum }];
    let chain_schedule = CycleSchedule::uniform(0, 0.05, 200);
    let dt = chain.default_dt().expect("coupled chain");
    worst = worst.max((run(&chain_models, &chain_schedule, dt)? - run(&chain_models, &chain_schedule, dt / 2.0)?).abs());
    let hbn_models = [GaussianModel { dynamics: &hn, prep: ControlPrep::Vacuum }, GaussianModel { dynamics: &hb, prep: ControlPrep::Vacuum }];
    let hbn_schedule = CycleSchedule::alternating(&[(0, 25.0 / wb), (1, 15.0 / wb)], 60);
    let dt = hn.default_dt().expect("coupled lattice").min(hb.default_dt().expect("coupled lattice"));
    worst = worst.max((run(&hbn_models, &hbn_schedule, dt)? - run(&hbn_models, &hbn_schedule, dt / 2.0)?).abs());
    Ok(worst)
}

/// Runs every check; each entry holds the measured defect and its bound.
pub fn invariant_suite() -> Result<Vec<Check>> {
    let (trace, negativity) = channel_defects()?;
    let mut dipolar = 0.0f64;
    for (si, sj) in [(SpinQuantum::HALF, SpinQuantum::HALF), (SpinQuantum::ONE, SpinQuantum::THREE_HALVES)] {
        dipolar = dipolar.max(dipolar_decomposition_defect(si, sj, [1.1, -0.6, 0.3], &frame()?)?);
    }
    let single = [(1, 0.0, 1), (3, 0.6, 2), (5, -1.4, 3)]
        .into_iter()
        .map(|(n, l, s)| single_excitation_defect(n, l, s))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    Ok(vec![
        Check { name: "ladder algebra", value: ladder_algebra_defect()?, tolerance: 1e-12 },
        Check { name: "[H, Sz_total] = 0", value: magnetization_defect()?, tolerance: 1e-12 },
        Check { name: "cycle trace preservation", value: trace, tolerance: 1e-12 },
        Check { name: "cycle positivity", value: negativity, tolerance: 1e-12 },
        Check { name: "tr(Gamma) within a segment", value: covariance_trace_defect()?, tolerance: 1e-8 },
        Check { name: "single-excitation exact = Gaussian", value: single, tolerance: 1e-10 },
        Check { name: "dipolar ladder decomposition", value: dipolar, tolerance: 1e-12 },
        Check { name: "theta* = pi/4", value: optimal_polar_angle_defect()?, tolerance: 1e-12 },
        Check { name: "D(0) = D, delta(0) = 0", value: zfs_defect()?, tolerance: 1e-12 },
        Check { name: "dt halving", value: dt_halving_defect()?, tolerance: 1e-4 },
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes() {
        for check in invariant_suite().unwrap() {
            assert!(check.passed(), "{}: {:e} > {:e}", check.name, check.value, check.tolerance);
        }
    }

    #[test]
    fn checks_detect_broken_inputs() {
        // a detuned drive breaks magnetization conservation
        let table = small_hbn_table(2).unwrap();
        let mut p = table.effective_params(1.0, None).unwrap();
        p.delta = 0.5;
        let h = build_hbn_hamiltonian(&p, &table.spins()).unwrap();
        assert!(magnetization_commutator(&h) > 1e-3);
        assert!(!Check { name: "nan", value: f64::NAN, tolerance: 1.0 }.passed());
    }
}
