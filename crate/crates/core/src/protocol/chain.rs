use crate::error::{Error, Result};
use crate::exact::{
    build_chain_hamiltonian, run_density_protocol, sampled_thermal_protocol, thermal_state, ControlReset, ExactModel, SampleMode, SampledModel,
    SampledOptions,
};
use crate::exact::hamiltonian::chain_spin_hamiltonian;
use crate::gaussian::{run_hpa_protocol, ChainDynamics, ControlPrep, CovMatrix, GaussianModel};
use crate::protocol::config::{ChainConfig, ExactMethod};
use crate::protocol::series::{Comparison, TimeSeries};
use crate::schedule::CycleSchedule;
use crate::spin::DensityMatrix;

/// Trace drift tolerated per cycle before a run is aborted.
pub const TRACE_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct ChainOutcome {
    pub exact: Option<TimeSeries>,
    pub hpa: Option<TimeSeries>,
    pub comparison: Option<Comparison>,
}

impl ChainOutcome {
    pub fn series(&self) -> impl Iterator<Item = &TimeSeries> {
        self.exact.iter().chain(self.hpa.iter())
    }
}

pub fn chain_schedule(cfg: &ChainConfig) -> CycleSchedule {
    CycleSchedule::uniform(0, cfg.tau, cfg.cycles)
}

pub(crate) fn check_trace(cycle: usize, rho: &DensityMatrix) -> Result<()> {
    let tr = rho.trace();
    if (tr.re - 1.0).abs() > TRACE_TOLERANCE || tr.im.abs() > TRACE_TOLERANCE {
        return Err(Error::Numerical(format!("trace drifted to {tr} after cycle {cycle}")));
    }
    Ok(())
}

/// Runs the chain protocol with the configured engines. Both engines start
/// from the infinite-temperature bath and reset the control to `|0>`.
pub fn run_chain_experiment(cfg: &ChainConfig) -> Result<ChainOutcome> {
    cfg.validate()?;
    let params = cfg.params();
    let schedule = chain_schedule(cfg);
    let exact = if cfg.engine.runs_exact() {
        let records = match cfg.exact_method {
            ExactMethod::Density => {
                let model = ExactModel { hamiltonian: build_chain_hamiltonian(&params)?, reset: ControlReset::ground() };
                let rho = thermal_state(&params.spins()[1..])?;
                run_density_protocol(&[model], &schedule, rho, cfg.record_every, check_trace)?
            }
            ExactMethod::Sampled => {
                let model = SampledModel { hamiltonian: chain_spin_hamiltonian(&params)?, reset: ControlReset::ground() };
                let opts = SampledOptions { mode: SampleMode::Random(cfg.samples), seed: cfg.seed, record_every: cfg.record_every, ..Default::default() };
                sampled_thermal_protocol(&[model], &schedule, &opts)?
            }
        };
        Some(TimeSeries::from_records("exact", records, &schedule, Vec::new())?)
    } else {
        None
    };
    let hpa = if cfg.engine.runs_hpa() {
        let dynamics = ChainDynamics::new(params)?;
        let model = GaussianModel { dynamics: &dynamics, prep: ControlPrep::Vacuum };
        let gamma = CovMatrix::thermal(crate::gaussian::Dynamics::layout(&dynamics));
        let records = run_hpa_protocol(&[model], &schedule, gamma, cfg.record_every, cfg.dt, |_, _| Ok(()))?;
        Some(TimeSeries::from_records("hpa", records, &schedule, Vec::new())?)
    } else {
        None
    };
    let comparison = match (&exact, &hpa) {
        (Some(e), Some(h)) => Some(Comparison::new(e, h)?),
        _ => None,
    };
    Ok(ChainOutcome { exact, hpa, comparison })
}
