use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::exact::hamiltonian::{hbn_spin_hamiltonian, LocalOp};
use crate::exact::{
    build_hbn_hamiltonian, run_density_protocol, sampled_thermal_protocol, thermal_state, ControlReset, ExactModel, HbnEffectiveParams, SampleMode,
    SampledModel, SampledOptions,
};
use crate::gaussian::{build_w_hbn, run_hpa_protocol, ControlPrep, CovMatrix, Dynamics, GaussianModel, HbnDynamics};
use crate::hbn::{bare_larmor, generate_lattice, CouplingTable, FieldFrame, LatticeSize, LatticeSite, PhysicalConstants, Species};
use crate::protocol::chain::check_trace;
use crate::protocol::config::{Azimuth, CouplingMask, ExactMethod, HbnConfig, ScanSettings, TauReference};
use crate::protocol::series::{lattice_groups, Comparison, TimeSeries};
use crate::schedule::CycleSchedule;
use crate::spin::SpinQuantum;

/// Resolved drive and geometry of one lattice run.
#[derive(Clone, Debug)]
pub struct HbnSetup {
    pub table: CouplingTable,
    /// Electron couplings left on, per site.
    pub coupled: Vec<bool>,
    pub omega_n: f64,
    pub omega_b: f64,
    pub tau_n: f64,
    pub tau_b: f64,
    pub phi_deg: f64,
    /// `(phi_deg, objective)` for every scanned azimuth.
    pub scan: Option<Vec<(f64, f64)>>,
}

impl HbnSetup {
    /// Segment 0 drives at `omega_N`, segment 1 at `omega_B`.
    pub fn schedule(&self, cycles: usize) -> CycleSchedule {
        CycleSchedule::alternating(&[(0, self.tau_n), (1, self.tau_b)], cycles)
    }

    pub fn drives(&self) -> [f64; 2] {
        [self.omega_n, self.omega_b]
    }

    pub fn effective_params(&self) -> Result<Vec<HbnEffectiveParams>> {
        self.drives().iter().map(|&w| self.table.effective_params(w, Some(&self.coupled))).collect()
    }
}

#[derive(Clone, Debug)]
pub struct HbnOutcome {
    pub setup: HbnSetup,
    pub exact: Option<TimeSeries>,
    pub hpa: Option<TimeSeries>,
    pub comparison: Option<Comparison>,
}

impl HbnOutcome {
    pub fn series(&self) -> impl Iterator<Item = &TimeSeries> {
        self.exact.iter().chain(self.hpa.iter())
    }
}

pub fn segment_durations(cfg: &HbnConfig, omega_n: f64, omega_b: f64) -> (f64, f64) {
    let tau_n = match cfg.tau_n_reference {
        TauReference::OmegaB => cfg.tau_n_factor / omega_b,
        TauReference::OmegaN => cfg.tau_n_factor / omega_n,
    };
    (tau_n, cfg.tau_b_factor / omega_b)
}

/// Sites whose electron coupling survives `mask`.
pub fn coupling_mask(sites: &[LatticeSite], mask: CouplingMask) -> Vec<bool> {
    sites
        .iter()
        .map(|s| match mask {
            CouplingMask::All => true,
            CouplingMask::NitrogenOnly => s.species == Species::Nitrogen14,
            CouplingMask::BoronOnly => s.species == Species::Boron11,
            CouplingMask::RingsUpTo(k) => s.ring <= k,
        })
        .collect()
}

/// Confirms that switched-off sites have no electron matrix elements in the
/// Gaussian generator.
pub fn verify_mask_gaussian(params: &HbnEffectiveParams, spins: &[SpinQuantum], coupled: &[bool]) -> Result<()> {
    let nbar: Vec<f64> = spins.iter().map(|s| s.s()).collect();
    let w = build_w_hbn(params, spins, &nbar).m;
    for (i, _) in coupled.iter().enumerate().filter(|(_, &c)| !c) {
        if w[(0, i + 1)].norm() != 0.0 || w[(i + 1, 0)].norm() != 0.0 {
            return Err(Error::Numerical(format!("masked site {i} still couples to the control mode")));
        }
    }
    Ok(())
}

/// Confirms that no Hamiltonian term touches both the electron and a
/// switched-off site.
pub fn verify_mask_exact(params: &HbnEffectiveParams, spins: &[SpinQuantum], coupled: &[bool]) -> Result<()> {
    let h = hbn_spin_hamiltonian(params, spins)?;
    for term in h.terms() {
        if term.coeff.norm() == 0.0 || !term.factors.iter().any(|&(site, _)| site == 0) {
            continue;
        }
        for &(site, op) in &term.factors {
            if site > 0 && !coupled[site - 1] && op != LocalOp::Z {
                return Err(Error::Numerical(format!("masked site {} still flip-flops with the electron", site - 1)));
            }
        }
    }
    Ok(())
}

/// Gaussian polarization of the scan rings after `scan.cycles` alternating
/// cycles, for each azimuth on the scan grid.
pub fn scan_azimuth(theta: f64, field: f64, scan: &ScanSettings, tau: (f64, f64), dt: Option<f64>, c: &PhysicalConstants) -> Result<Vec<(f64, f64)>> {
    let outer = *scan.rings.iter().max().expect("validated scan rings");
    let sites: Vec<LatticeSite> =
        generate_lattice(LatticeSize::Rings(outer), c.bond_length)?.into_iter().filter(|s| scan.rings.contains(&s.ring)).collect();
    let steps = (scan.span_deg / scan.step_deg - 1e-9).ceil() as usize;
    let omegas = [bare_larmor(Species::Nitrogen14, field, c), bare_larmor(Species::Boron11, field, c)];
    let schedule = CycleSchedule::alternating(&[(0, tau.0), (1, tau.1)], scan.cycles);
    (0..steps)
        .into_par_iter()
        .map(|k| {
            let phi_deg = k as f64 * scan.step_deg;
            let table = CouplingTable::new(sites.clone(), FieldFrame::new(theta, phi_deg.to_radians(), field)?, c)?;
            let spins = table.spins();
            let dynamics = omegas
                .iter()
                .map(|&w| HbnDynamics::new(table.effective_params(w, None)?, spins.clone()))
                .collect::<Result<Vec<_>>>()?;
            let models: Vec<GaussianModel<'_>> = dynamics.iter().map(|d| GaussianModel { dynamics: d, prep: ControlPrep::Vacuum }).collect();
            let gamma = CovMatrix::thermal(dynamics[0].layout());
            let recs = run_hpa_protocol(&models, &schedule, gamma, scan.cycles.max(1), dt, |_, _| Ok(()))?;
            Ok((phi_deg, recs.last().expect("initial record").mean()))
        })
        .collect()
}

/// Azimuth with the most negative objective; near-ties keep the smallest.
pub fn best_azimuth(scan: &[(f64, f64)]) -> Option<f64> {
    let mut best: Option<(f64, f64)> = None;
    for &(phi, v) in scan {
        if best.map_or(true, |(_, b)| v < b - 1e-10 * b.abs().max(1.0)) {
            best = Some((phi, v));
        }
    }
    best.map(|(phi, _)| phi)
}

/// Builds the lattice, resolves the azimuth and evaluates the couplings once.
pub fn prepare_hbn(cfg: &HbnConfig) -> Result<HbnSetup> {
    cfg.validate()?;
    let c = &cfg.constants;
    let mut sites = generate_lattice(cfg.lattice.into(), c.bond_length)?;
    if let Some(keep) = &cfg.keep_sites {
        if let Some(&bad) = keep.iter().find(|&&i| i >= sites.len()) {
            return Err(Error::Config(format!("keep_sites index {bad} exceeds the {} generated sites", sites.len())));
        }
        sites = keep.iter().map(|&i| sites[i].clone()).collect();
    }
    let omega_n = bare_larmor(Species::Nitrogen14, cfg.field, c);
    let omega_b = bare_larmor(Species::Boron11, cfg.field, c);
    let (tau_n, tau_b) = segment_durations(cfg, omega_n, omega_b);
    let theta = cfg.theta_deg.to_radians();
    let (phi_deg, scan) = match cfg.phi {
        Azimuth::Degrees(p) => (p, None),
        Azimuth::Mode(_) => {
            let scan = scan_azimuth(theta, cfg.field, &cfg.scan, (tau_n, tau_b), cfg.dt, c)?;
            (best_azimuth(&scan).expect("nonempty scan"), Some(scan))
        }
    };
    let table = CouplingTable::new(sites, FieldFrame::new(theta, phi_deg.to_radians(), cfg.field)?, c)?;
    let coupled = coupling_mask(&table.sites, cfg.mask);
    Ok(HbnSetup { table, coupled, omega_n, omega_b, tau_n, tau_b, phi_deg, scan })
}

/// Alternating `Omega = omega_N` / `Omega = omega_B` cycles on the lattice.
/// The exact engine resets the electron to the dressed `|->`, the Gaussian
/// engine to the vacuum; both start from the infinite-temperature bath.
pub fn run_hbn_experiment(cfg: &HbnConfig) -> Result<HbnOutcome> {
    let setup = prepare_hbn(cfg)?;
    run_prepared(cfg, setup)
}

/// Runs with the configured lattice while the electron couples only to the
/// sites kept by `mask`. Inter-nuclear couplings are untouched.
pub fn run_decoupling_scenario(cfg: &HbnConfig, mask: CouplingMask) -> Result<HbnOutcome> {
    run_hbn_experiment(&HbnConfig { mask, ..cfg.clone() })
}

/// Runs `cfg` on an already prepared geometry.
pub fn run_prepared(cfg: &HbnConfig, setup: HbnSetup) -> Result<HbnOutcome> {
    let spins = setup.table.spins();
    let params = setup.effective_params()?;
    let schedule = setup.schedule(cfg.cycles);
    let groups = lattice_groups(&setup.table.sites);

    let exact = if cfg.engine.runs_exact() {
        for p in &params {
            verify_mask_exact(p, &spins, &setup.coupled)?;
        }
        let records = match cfg.exact_method {
            ExactMethod::Density => {
                let models = params
                    .iter()
                    .map(|p| Ok(ExactModel { hamiltonian: build_hbn_hamiltonian(p, &spins)?, reset: ControlReset::ground() }))
                    .collect::<Result<Vec<_>>>()?;
                run_density_protocol(&models, &schedule, thermal_state(&spins)?, cfg.record_every, check_trace)?
            }
            ExactMethod::Sampled => {
                let models = params
                    .iter()
                    .map(|p| Ok(SampledModel { hamiltonian: hbn_spin_hamiltonian(p, &spins)?, reset: ControlReset::ground() }))
                    .collect::<Result<Vec<_>>>()?;
                let opts = SampledOptions { mode: SampleMode::Random(cfg.samples), seed: cfg.seed, record_every: cfg.record_every, ..Default::default() };
                sampled_thermal_protocol(&models, &schedule, &opts)?
            }
        };
        Some(TimeSeries::from_records("exact", records, &schedule, groups.clone())?)
    } else {
        None
    };

    let hpa = if cfg.engine.runs_hpa() {
        for p in &params {
            verify_mask_gaussian(p, &spins, &setup.coupled)?;
        }
        let dynamics = params.into_iter().map(|p| HbnDynamics::new(p, spins.clone())).collect::<Result<Vec<_>>>()?;
        let models: Vec<GaussianModel<'_>> = dynamics.iter().map(|d| GaussianModel { dynamics: d, prep: ControlPrep::Vacuum }).collect();
        let gamma = CovMatrix::thermal(dynamics[0].layout());
        let records = run_hpa_protocol(&models, &schedule, gamma, cfg.record_every, cfg.dt, |_, _| Ok(()))?;
        Some(TimeSeries::from_records("hpa", records, &schedule, groups)?)
    } else {
        None
    };

    let comparison = match (&exact, &hpa) {
        (Some(e), Some(h)) => Some(Comparison::new(e, h)?),
        _ => None,
    };
    Ok(HbnOutcome { setup, exact, hpa, comparison })
}

/// Ring-1 sites plus the `borons` ring-2 borons with the largest `|alpha|`
/// (ties keep lattice order), as indices into `table`.
pub fn reduced_benchmark_sites(table: &CouplingTable, borons: usize) -> Vec<usize> {
    let mut keep: Vec<usize> = (0..table.sites.len()).filter(|&i| table.sites[i].ring == 1).collect();
    let mut ring2: Vec<usize> = (0..table.sites.len()).filter(|&i| table.sites[i].ring == 2 && table.sites[i].species == Species::Boron11).collect();
    ring2.sort_by(|&a, &b| table.hyperfine[b].alpha.norm().total_cmp(&table.hyperfine[a].alpha.norm()).then(a.cmp(&b)));
    ring2.truncate(borons);
    ring2.sort_unstable();
    keep.extend(ring2);
    keep
}

/// Exact and Gaussian bath polarizations during one uninterrupted evolution
/// after a single control reset.
#[derive(Clone, Debug)]
pub struct ShortTimeComparison {
    pub times: Vec<f64>,
    pub species: Vec<Species>,
    pub exact: Vec<Vec<f64>>,
    pub hpa: Vec<Vec<f64>>,
}

impl ShortTimeComparison {
    fn species_mean(&self, values: &[f64], sp: Species) -> Option<f64> {
        let v: Vec<f64> = values.iter().zip(&self.species).filter(|(_, &s)| s == sp).map(|(&x, _)| x).collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }

    /// `(exact, hpa)` species means at time index `k`.
    pub fn species_pair(&self, k: usize, sp: Species) -> Option<(f64, f64)> {
        Some((self.species_mean(&self.exact[k], sp)?, self.species_mean(&self.hpa[k], sp)?))
    }

    /// Largest species-mean gap over times not exceeding `t_max`.
    pub fn max_species_gap(&self, t_max: f64) -> f64 {
        let mut gap = 0.0f64;
        for (k, &t) in self.times.iter().enumerate() {
            if t > t_max {
                continue;
            }
            for sp in [Species::Boron11, Species::Nitrogen14] {
                if let Some((e, h)) = self.species_pair(k, sp) {
                    gap = gap.max((e - h).abs());
                }
            }
        }
        gap
    }
}

pub fn short_time_comparison(table: &CouplingTable, omega: f64, times: &[f64], dt: Option<f64>) -> Result<ShortTimeComparison> {
    let spins = table.spins();
    let params = table.effective_params(omega, None)?;
    let model = ExactModel { hamiltonian: build_hbn_hamiltonian(&params, &spins)?, reset: ControlReset::ground() };
    let exact = crate::exact::short_time_trajectory(&model, &thermal_state(&spins)?, times)?;
    let dynamics = HbnDynamics::new(params, spins)?;
    let gmodel = GaussianModel { dynamics: &dynamics, prep: ControlPrep::Vacuum };
    let hpa = crate::gaussian::short_time_trajectory(&gmodel, &CovMatrix::thermal(dynamics.layout()), times, dt)?;
    Ok(ShortTimeComparison { times: times.to_vec(), species: table.sites.iter().map(|s| s.species).collect(), exact, hpa })
}
