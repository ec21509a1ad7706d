use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::relative_error;
use crate::hbn::{LatticeSite, Species};
use crate::schedule::{CycleSchedule, PolarizationRecord};

/// Named set of sites whose polarizations are averaged into one column.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SiteGroup {
    pub name: String,
    pub members: Vec<usize>,
}

/// Ring-by-species groups (`ring_02_B`) followed by species groups
/// (`species_B`), in ring then species order.
pub fn lattice_groups(sites: &[LatticeSite]) -> Vec<SiteGroup> {
    let mut rings: Vec<(usize, Species)> = sites.iter().map(|s| (s.ring, s.species)).collect();
    rings.sort();
    rings.dedup();
    let mut out: Vec<SiteGroup> = rings
        .into_iter()
        .map(|(ring, sp)| SiteGroup {
            name: format!("ring_{ring:02}_{}", sp.symbol()),
            members: (0..sites.len()).filter(|&i| sites[i].ring == ring && sites[i].species == sp).collect(),
        })
        .collect();
    for sp in [Species::Boron11, Species::Nitrogen14] {
        let members: Vec<usize> = (0..sites.len()).filter(|&i| sites[i].species == sp).collect();
        if !members.is_empty() {
            out.push(SiteGroup { name: format!("species_{}", sp.symbol()), members });
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct SeriesRow {
    pub cycle: usize,
    /// Summed segment durations up to this cycle.
    pub t: f64,
    pub per_site: Vec<f64>,
    pub stderr: Option<Vec<f64>>,
}

impl SeriesRow {
    pub fn mean(&self) -> f64 {
        self.per_site.iter().sum::<f64>() / self.per_site.len() as f64
    }
}

/// Polarization history of one engine.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeries {
    pub engine: String,
    pub sites: usize,
    pub groups: Vec<SiteGroup>,
    pub rows: Vec<SeriesRow>,
}

impl TimeSeries {
    pub fn new(engine: &str, sites: usize, groups: Vec<SiteGroup>) -> Self {
        Self { engine: engine.to_string(), sites, groups, rows: Vec::new() }
    }

    /// Converts engine records; `t` is rebuilt from integer segment counts.
    pub fn from_records(engine: &str, records: Vec<PolarizationRecord>, schedule: &CycleSchedule, groups: Vec<SiteGroup>) -> Result<Self> {
        let sites = records.first().map_or(0, |r| r.per_site.len());
        let mut series = Self::new(engine, sites, groups);
        for r in records {
            if r.per_site.len() != sites {
                return Err(Error::DimensionMismatch { expected: sites, got: r.per_site.len() });
            }
            series.rows.push(SeriesRow { cycle: r.cycle, t: schedule.elapsed(&r.segment_counts), per_site: r.per_site, stderr: r.stderr });
        }
        Ok(series)
    }

    pub fn has_stderr(&self) -> bool {
        self.rows.iter().any(|r| r.stderr.is_some())
    }

    /// Column names after `cycle` and `t`.
    pub fn value_columns(&self) -> Vec<String> {
        let mut cols = vec!["mean_polarization".to_string()];
        cols.extend((0..self.sites).map(|i| format!("site_{i:04}")));
        cols.extend(self.groups.iter().map(|g| g.name.clone()));
        if self.has_stderr() {
            cols.extend((0..self.sites).map(|i| format!("site_{i:04}_stderr")));
        }
        cols
    }

    /// Values matching [`value_columns`](Self::value_columns).
    pub fn values(&self, row: &SeriesRow) -> Vec<f64> {
        let mut v = vec![row.mean()];
        v.extend_from_slice(&row.per_site);
        v.extend(self.groups.iter().map(|g| group_mean(row, g)));
        if self.has_stderr() {
            match &row.stderr {
                Some(e) => v.extend_from_slice(e),
                None => v.extend(std::iter::repeat(f64::NAN).take(self.sites)),
            }
        }
        v
    }

    pub fn last(&self) -> Option<&SeriesRow> {
        self.rows.last()
    }

    pub fn final_mean(&self) -> Option<f64> {
        self.last().map(SeriesRow::mean)
    }

    pub fn group(&self, name: &str) -> Option<&SiteGroup> {
        self.groups.iter().find(|g| g.name == name)
    }

    /// Per-row mean of the named group.
    pub fn group_series(&self, name: &str) -> Option<Vec<f64>> {
        let g = self.group(name)?;
        Some(self.rows.iter().map(|r| group_mean(r, g)).collect())
    }

    pub fn mean_series(&self) -> Vec<f64> {
        self.rows.iter().map(SeriesRow::mean).collect()
    }
}

fn group_mean(row: &SeriesRow, g: &SiteGroup) -> f64 {
    g.members.iter().map(|&i| row.per_site[i]).sum::<f64>() / g.members.len() as f64
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonRow {
    pub cycle: usize,
    pub t: f64,
    pub exact: f64,
    pub hpa: f64,
    pub epsilon: Option<f64>,
}

impl ComparisonRow {
    pub fn gap(&self) -> f64 {
        (self.exact - self.hpa).abs()
    }
}

/// Exact and Gaussian mean polarizations on a shared cycle grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
}

impl Comparison {
    pub fn new(exact: &TimeSeries, hpa: &TimeSeries) -> Result<Self> {
        if exact.rows.len() != hpa.rows.len() || exact.rows.iter().zip(&hpa.rows).any(|(a, b)| a.cycle != b.cycle) {
            return Err(Error::Config("exact and Gaussian series are recorded on different cycles".into()));
        }
        let rows = exact
            .rows
            .iter()
            .zip(&hpa.rows)
            .map(|(a, b)| {
                let (e, h) = (a.mean(), b.mean());
                ComparisonRow { cycle: a.cycle, t: a.t, exact: e, hpa: h, epsilon: relative_error(e, h) }
            })
            .collect();
        Ok(Self { rows })
    }

    pub fn max_gap(&self) -> f64 {
        self.rows.iter().map(ComparisonRow::gap).fold(0.0, f64::max)
    }

    pub fn final_epsilon(&self) -> Option<f64> {
        self.rows.last().and_then(|r| r.epsilon)
    }
}
