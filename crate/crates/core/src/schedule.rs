//! Cycle schedules shared by both engines, and the per-record output they
//! produce.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One block of identical polarization cycles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    /// Index into the caller's list of Hamiltonians / dynamical models.
    pub hamiltonian: usize,
    pub tau: f64,
    pub repetitions: usize,
}

/// A pattern of segments cycled through in order until `cycles` cycles ran.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CycleSchedule {
    pub segments: Vec<Segment>,
    pub cycles: usize,
}

impl CycleSchedule {
    /// `cycles` repetitions of one segment.
    pub fn uniform(hamiltonian: usize, tau: f64, cycles: usize) -> Self {
        Self { segments: vec![Segment { hamiltonian, tau, repetitions: 1 }], cycles }
    }

    /// Single cycles of each listed `(hamiltonian, tau)` in turn.
    pub fn alternating(pattern: &[(usize, f64)], cycles: usize) -> Self {
        let segments = pattern.iter().map(|&(hamiltonian, tau)| Segment { hamiltonian, tau, repetitions: 1 }).collect();
        Self { segments, cycles }
    }

    pub fn validate(&self, hamiltonians: usize) -> Result<()> {
        if self.segments.is_empty() {
            return Err(Error::Config("schedule needs at least one segment".into()));
        }
        for (k, s) in self.segments.iter().enumerate() {
            if !(s.tau > 0.0) || !s.tau.is_finite() {
                return Err(Error::Config(format!("segment {k}: tau must be positive, got {}", s.tau)));
            }
            if s.repetitions < 1 {
                return Err(Error::Config(format!("segment {k}: repetitions must be at least 1")));
            }
            if s.hamiltonian >= hamiltonians {
                return Err(Error::Config(format!("segment {k}: unknown hamiltonian {}", s.hamiltonian)));
            }
        }
        Ok(())
    }

    pub fn total_cycles(&self) -> usize {
        self.cycles
    }

    /// Segment index of every cycle, in execution order.
    pub fn steps(&self) -> impl Iterator<Item = usize> + '_ {
        self.segments
            .iter()
            .enumerate()
            .flat_map(|(k, s)| std::iter::repeat(k).take(s.repetitions))
            .cycle()
            .take(if self.segments.is_empty() { 0 } else { self.cycles })
    }

    /// Elapsed time from per-segment cycle counts, `sum_k count_k tau_k`.
    pub fn elapsed(&self, counts: &[usize]) -> f64 {
        counts.iter().zip(&self.segments).map(|(&c, s)| c as f64 * s.tau).sum()
    }
}

/// Per-site polarizations after `cycle` cycles.
#[derive(Clone, Debug, PartialEq)]
pub struct PolarizationRecord {
    pub cycle: usize,
    /// Cycles executed so far in each schedule segment.
    pub segment_counts: Vec<usize>,
    pub per_site: Vec<f64>,
    /// Standard error of `per_site` for sampled runs.
    pub stderr: Option<Vec<f64>>,
}

impl PolarizationRecord {
    pub fn mean(&self) -> f64 {
        self.per_site.iter().sum::<f64>() / self.per_site.len() as f64
    }
}

/// Decides which cycles are recorded: 0, every `every`-th, and the last.
#[derive(Clone, Copy, Debug)]
pub struct RecordPolicy {
    pub every: usize,
    pub total: usize,
}

impl RecordPolicy {
    pub fn new(every: usize, total: usize) -> Result<Self> {
        if every == 0 {
            return Err(Error::Config("record_every must be at least 1".into()));
        }
        Ok(Self { every, total })
    }

    pub fn records(&self, cycle: usize) -> bool {
        cycle % self.every == 0 || cycle == self.total
    }
}

/// Tracks progress through a schedule while a protocol runs.
#[derive(Clone, Debug)]
pub struct ScheduleCursor {
    counts: Vec<usize>,
    cycle: usize,
}

impl ScheduleCursor {
    pub fn new(schedule: &CycleSchedule) -> Self {
        Self { counts: vec![0; schedule.segments.len()], cycle: 0 }
    }

    pub fn advance(&mut self, segment: usize) {
        self.counts[segment] += 1;
        self.cycle += 1;
    }

    pub fn cycle(&self) -> usize {
        self.cycle
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn record(&self, per_site: Vec<f64>, stderr: Option<Vec<f64>>) -> PolarizationRecord {
        PolarizationRecord { cycle: self.cycle, segment_counts: self.counts.clone(), per_site, stderr }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alternating_schedule_steps() {
        let s = CycleSchedule::alternating(&[(0, 0.3), (1, 0.2)], 5);
        assert_eq!(s.steps().collect::<Vec<_>>(), vec![0, 1, 0, 1, 0]);
        let blocks = CycleSchedule {
            segments: vec![Segment { hamiltonian: 0, tau: 1.0, repetitions: 2 }, Segment { hamiltonian: 1, tau: 2.0, repetitions: 1 }],
            cycles: 4,
        };
        assert_eq!(blocks.steps().collect::<Vec<_>>(), vec![0, 0, 1, 0]);
        assert_eq!(s.total_cycles(), 5);
        assert_eq!(s.elapsed(&[3, 2]), 3.0 * 0.3 + 2.0 * 0.2);
    }

    #[test]
    fn uniform_schedule() {
        let s = CycleSchedule::uniform(0, 0.05, 800);
        assert_eq!(s.total_cycles(), 800);
        assert_eq!(s.steps().count(), 800);
        assert_eq!(s.elapsed(&[800]), 800.0 * 0.05);
        assert_eq!(CycleSchedule::uniform(0, 0.05, 0).steps().count(), 0);
    }

    #[test]
    fn validation() {
        assert!(CycleSchedule::uniform(0, -1.0, 3).validate(1).is_err());
        assert!(CycleSchedule::uniform(1, 1.0, 3).validate(1).is_err());
        assert!(CycleSchedule::uniform(0, 1.0, 3).validate(1).is_ok());
        assert!(RecordPolicy::new(0, 3).is_err());
    }

    #[test]
    fn record_policy_includes_ends() {
        let p = RecordPolicy::new(4, 10).unwrap();
        let got: Vec<_> = (0..=10).filter(|&c| p.records(c)).collect();
        assert_eq!(got, vec![0, 4, 8, 10]);
    }
}
