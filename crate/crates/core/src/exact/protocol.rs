use crate::error::Result;
use crate::exact::channel::{per_site_polarization, ControlReset, CycleChannel, SpectralHamiltonian};
use crate::schedule::{CycleSchedule, PolarizationRecord, RecordPolicy, ScheduleCursor};
use crate::spin::{DensityMatrix, OperatorMatrix};

/// A Hamiltonian together with the control state it resets to.
#[derive(Clone, Debug)]
pub struct ExactModel {
    pub hamiltonian: OperatorMatrix,
    pub reset: ControlReset,
}

/// Runs `schedule` on the bath density matrix, recording per-site
/// polarizations. `check` is called with the state after every cycle.
pub fn run_density_protocol<F>(
    models: &[ExactModel],
    schedule: &CycleSchedule,
    initial: DensityMatrix,
    record_every: usize,
    mut check: F,
) -> Result<Vec<PolarizationRecord>>
where
    F: FnMut(usize, &DensityMatrix) -> Result<()>,
{
    schedule.validate(models.len())?;
    let policy = RecordPolicy::new(record_every, schedule.total_cycles())?;
    let spectra = models.iter().map(|m| SpectralHamiltonian::new(&m.hamiltonian)).collect::<Result<Vec<_>>>()?;
    let channels = schedule
        .segments
        .iter()
        .map(|s| CycleChannel::new(&spectra[s.hamiltonian], s.tau, &models[s.hamiltonian].reset))
        .collect::<Result<Vec<_>>>()?;

    let mut cursor = ScheduleCursor::new(schedule);
    let mut rho = initial;
    let mut out = vec![cursor.record(per_site_polarization(&rho)?, None)];
    for seg in schedule.steps() {
        rho = channels[seg].apply(&rho)?;
        cursor.advance(seg);
        check(cursor.cycle(), &rho)?;
        if policy.records(cursor.cycle()) {
            out.push(cursor.record(per_site_polarization(&rho)?, None));
        }
    }
    Ok(out)
}

/// Bath polarizations after evolving `|reset> (x) rho` without any reset,
/// evaluated at each time in `times`.
pub fn short_time_trajectory(model: &ExactModel, initial: &DensityMatrix, times: &[f64]) -> Result<Vec<Vec<f64>>> {
    let spectral = SpectralHamiltonian::new(&model.hamiltonian)?;
    times
        .iter()
        .map(|&t| {
            let rho = CycleChannel::new(&spectral, t, &model.reset)?.apply(initial)?;
            per_site_polarization(&rho)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::channel::thermal_state;
    use crate::exact::hamiltonian::{build_chain_hamiltonian, ChainParams};

    #[test]
    fn zero_cycles_is_thermal() {
        let p = ChainParams::new(3, 100.0, 100.0, 2.0, 10.0, 2.0);
        let m = ExactModel { hamiltonian: build_chain_hamiltonian(&p).unwrap(), reset: ControlReset::ground() };
        let rho = thermal_state(&p.spins()[1..]).unwrap();
        let recs = run_density_protocol(&[m], &CycleSchedule::uniform(0, 0.05, 0), rho, 1, |_, _| Ok(())).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].mean(), 0.0);
    }

    #[test]
    fn records_follow_policy() {
        let p = ChainParams::new(2, 100.0, 100.0, 2.0, 10.0, 2.0);
        let m = ExactModel { hamiltonian: build_chain_hamiltonian(&p).unwrap(), reset: ControlReset::ground() };
        let rho = thermal_state(&p.spins()[1..]).unwrap();
        let mut checked = 0;
        let recs = run_density_protocol(&[m], &CycleSchedule::uniform(0, 0.05, 7), rho, 3, |_, r| {
            checked += 1;
            r.validate(-1e-8)
        })
        .unwrap();
        assert_eq!(checked, 7);
        assert_eq!(recs.iter().map(|r| r.cycle).collect::<Vec<_>>(), vec![0, 3, 6, 7]);
        assert!(recs.last().unwrap().mean() < 0.0);
    }
}
