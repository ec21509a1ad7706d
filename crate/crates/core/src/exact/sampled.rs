//! Monte Carlo unravelling of the polarization protocol into pure-state
//! trajectories.
//!
//! Each sample starts the bath in one computational basis state (drawn
//! uniformly for the infinite-temperature ensemble), prepends the control
//! reset, evolves, records the bath polarizations, then selects one outcome
//! `c` of the control with probability `||K_c phi||^2`. Averaging the recorded
//! values over samples reproduces the density-matrix protocol.

use faer::{c64, Mat};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::exact::channel::{ControlReset, SpectralHamiltonian};
use crate::exact::chebyshev::ChebyshevPropagator;
use crate::exact::hamiltonian::{SparseHamiltonian, SpinHamiltonian, EXACT_DIM_CAP};
use crate::schedule::{CycleSchedule, PolarizationRecord, RecordPolicy, ScheduleCursor};

#[derive(Clone, Debug, PartialEq)]
pub enum InitialEnsemble {
    /// Uniform over bath basis states.
    Thermal,
    /// Every sample starts in this bath basis index.
    Basis(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub enum SampleMode {
    Random(usize),
    /// One trajectory per bath basis state (`Thermal` ensemble only).
    Enumerate,
}

#[derive(Clone, Debug)]
pub struct SampledOptions {
    pub mode: SampleMode,
    pub initial: InitialEnsemble,
    pub seed: u64,
    pub record_every: usize,
    /// Largest full dimension propagated with dense sector unitaries.
    pub dense_limit: usize,
}

impl Default for SampledOptions {
    fn default() -> Self {
        Self { mode: SampleMode::Random(64), initial: InitialEnsemble::Thermal, seed: 0, record_every: 1, dense_limit: EXACT_DIM_CAP }
    }
}

pub struct SampledModel {
    pub hamiltonian: SpinHamiltonian,
    pub reset: ControlReset,
}

enum Stepper {
    Dense(Vec<(Vec<usize>, Mat<c64>)>),
    Chebyshev(usize, ChebyshevPropagator),
}

impl Stepper {
    fn apply(&self, sparse: &[SparseHamiltonian], psi: &[c64]) -> Vec<c64> {
        match self {
            Stepper::Dense(blocks) => {
                let mut out = vec![c64::new(0.0, 0.0); psi.len()];
                for (idx, u) in blocks {
                    for (a, &i) in idx.iter().enumerate() {
                        let mut acc = c64::new(0.0, 0.0);
                        for (b, &j) in idx.iter().enumerate() {
                            acc += u[(a, b)] * psi[j];
                        }
                        out[i] = acc;
                    }
                }
                out
            }
            Stepper::Chebyshev(h, prop) => prop.apply(&sparse[*h], psi),
        }
    }
}

/// Averages of per-site bath polarization over sampled trajectories, with
/// standard errors.
pub fn sampled_thermal_protocol(models: &[SampledModel], schedule: &CycleSchedule, opts: &SampledOptions) -> Result<Vec<PolarizationRecord>> {
    schedule.validate(models.len())?;
    let first = models.first().ok_or_else(|| Error::Config("no Hamiltonian given".into()))?;
    let space = first.hamiltonian.space().clone();
    if models.iter().any(|m| m.hamiltonian.space() != &space) {
        return Err(Error::Config("all Hamiltonians must act on the same space".into()));
    }
    let dc = space.site_dims()[0];
    let dim = space.total_dim();
    let db = dim / dc;
    let sites = space.site_count() - 1;
    let policy = RecordPolicy::new(opts.record_every, schedule.total_cycles())?;

    let dense = dim <= opts.dense_limit && dim <= EXACT_DIM_CAP;
    let sparse: Vec<SparseHamiltonian> = if dense { Vec::new() } else { models.iter().map(|m| m.hamiltonian.to_sparse()).collect() };
    let spectra = if dense {
        models.iter().map(|m| SpectralHamiltonian::new(&m.hamiltonian.to_dense()?)).collect::<Result<Vec<_>>>()?
    } else {
        Vec::new()
    };
    let steppers: Vec<Stepper> = schedule
        .segments
        .iter()
        .map(|s| {
            if dense {
                Stepper::Dense(spectra[s.hamiltonian].unitary_blocks(s.tau).into_iter().map(|(i, u)| (i.to_vec(), u)).collect())
            } else {
                Stepper::Chebyshev(s.hamiltonian, ChebyshevPropagator::new(&sparse[s.hamiltonian], s.tau))
            }
        })
        .collect();
    for m in models {
        if m.reset.dim() != dc {
            return Err(Error::DimensionMismatch { expected: dc, got: m.reset.dim() });
        }
    }

    // m_n / s_n of every bath basis state, site-major per state
    let mut table = vec![0.0; db * sites];
    for b in 0..db {
        for site in 0..sites {
            let spin = space.spin(site + 1)?;
            table[b * sites + site] = spin.m(space.digit(b, site + 1)) / spin.s();
        }
    }

    let starts: Vec<usize> = match (&opts.mode, &opts.initial) {
        (SampleMode::Enumerate, InitialEnsemble::Thermal) => (0..db).collect(),
        (SampleMode::Enumerate, InitialEnsemble::Basis(_)) => {
            return Err(Error::Config("enumeration requires the thermal ensemble".into()));
        }
        (SampleMode::Random(n), init) => {
            if *n < 1 {
                return Err(Error::Config("n_samples must be at least 1".into()));
            }
            (0..*n)
                .map(|i| match init {
                    InitialEnsemble::Thermal => sample_rng(opts.seed, i as u64).random_range(0..db),
                    InitialEnsemble::Basis(b) => *b,
                })
                .collect()
        }
    };
    if let Some(&bad) = starts.iter().find(|&&b| b >= db) {
        return Err(Error::SiteOutOfRange { site: bad, sites: db });
    }

    let trajectory = |sample: usize, start: usize| -> Vec<(usize, Vec<usize>, Vec<f64>)> {
        let mut rng = sample_rng(opts.seed, sample as u64);
        // the draw of the starting state is consumed first
        let _: usize = rng.random_range(0..db);
        let mut cursor = ScheduleCursor::new(schedule);
        let mut phi = vec![c64::new(0.0, 0.0); db];
        phi[start] = c64::new(1.0, 0.0);
        let mut out = Vec::new();
        out.push((0, cursor.counts().to_vec(), table[start * sites..(start + 1) * sites].to_vec()));
        for seg in schedule.steps() {
            let reset = &models[schedule.segments[seg].hamiltonian].reset;
            let mut psi = vec![c64::new(0.0, 0.0); dim];
            for (r, &a) in reset.amplitudes().iter().enumerate() {
                if a != c64::new(0.0, 0.0) {
                    for b in 0..db {
                        psi[r * db + b] = a * phi[b];
                    }
                }
            }
            let psi = steppers[seg].apply(&sparse, &psi);
            cursor.advance(seg);
            if policy.records(cursor.cycle()) {
                let mut pol = vec![0.0; sites];
                for (i, z) in psi.iter().enumerate() {
                    let p = z.norm_sqr();
                    if p != 0.0 {
                        let b = i % db;
                        for (site, v) in pol.iter_mut().enumerate() {
                            *v += p * table[b * sites + site];
                        }
                    }
                }
                out.push((cursor.cycle(), cursor.counts().to_vec(), pol));
            }
            let probs: Vec<f64> = (0..dc).map(|c| psi[c * db..(c + 1) * db].iter().map(|z| z.norm_sqr()).sum()).collect();
            let total: f64 = probs.iter().sum();
            let u: f64 = rng.random::<f64>() * total;
            let mut c = 0;
            let mut acc = probs[0];
            while u >= acc && c + 1 < dc {
                c += 1;
                acc += probs[c];
            }
            let norm = probs[c].sqrt();
            for b in 0..db {
                phi[b] = psi[c * db + b] / norm;
            }
        }
        out
    };

    let runs: Vec<Vec<(usize, Vec<usize>, Vec<f64>)>> = starts.par_iter().enumerate().map(|(i, &b)| trajectory(i, b)).collect();

    let n = runs.len() as f64;
    let records = runs[0].len();
    let mut out = Vec::with_capacity(records);
    for k in 0..records {
        let mut mean = vec![0.0; sites];
        for run in &runs {
            for (m, v) in mean.iter_mut().zip(&run[k].2) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; sites];
        for run in &runs {
            for ((s, v), m) in var.iter_mut().zip(&run[k].2).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let stderr = var.iter().map(|s| if n > 1.0 { (s / (n - 1.0) / n).sqrt() } else { 0.0 }).collect();
        out.push(PolarizationRecord { cycle: runs[0][k].0, segment_counts: runs[0][k].1.clone(), per_site: mean, stderr: Some(stderr) });
    }
    Ok(out)
}

/// Independent stream for sample `i` of a seeded run.
pub fn sample_rng(seed: u64, i: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(i);
    rng
}
