use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spin::SpinQuantum;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Species {
    #[serde(rename = "B")]
    Boron11,
    #[serde(rename = "N")]
    Nitrogen14,
}

impl Species {
    pub fn spin(self) -> SpinQuantum {
        match self {
            Species::Boron11 => SpinQuantum::THREE_HALVES,
            Species::Nitrogen14 => SpinQuantum::ONE,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Species::Boron11 => "B",
            Species::Nitrogen14 => "N",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeSite {
    pub species: Species,
    /// Position in angstrom; the vacancy is the origin and the layer is z = 0.
    pub position: [f64; 3],
    pub ring: usize,
}

impl LatticeSite {
    pub fn distance(&self) -> f64 {
        norm(self.position)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LatticeSize {
    /// The first `n` sites in ring/azimuth order.
    Sites(usize),
    /// All sites of rings `1..=k`.
    Rings(usize),
}

const RING_TOL: f64 = 1e-6;

/// Honeycomb sites around a boron vacancy, sorted by ring then azimuth in
/// `[0, 2 pi)`. The nitrogen at `(a, 0, 0)` is the first site.
pub fn generate_lattice(size: LatticeSize, bond: f64) -> Result<Vec<LatticeSite>> {
    let wanted = match size {
        LatticeSize::Sites(n) | LatticeSize::Rings(n) => n,
    };
    if wanted == 0 {
        return Err(Error::Config("lattice size must be at least 1".into()));
    }
    let mut m = 4;
    loop {
        let sites = shells(m, bond);
        // every site closer than `complete` is present
        let complete = 1.5 * m as f64 * bond - bond;
        let cut = match size {
            LatticeSize::Sites(n) => sites.get(n - 1).map(|s| (s.distance(), n)),
            LatticeSize::Rings(k) => {
                let end = sites.iter().position(|s| s.ring > k);
                end.map(|e| (sites[e - 1].distance(), e))
            }
        };
        match cut {
            Some((r, count)) if r < complete - RING_TOL => {
                let mut sites = sites;
                sites.truncate(count);
                return Ok(sites);
            }
            _ => m *= 2,
        }
    }
}

fn shells(m: i64, a: f64) -> Vec<LatticeSite> {
    let s3 = 3f64.sqrt();
    let a1 = [1.5 * a, 0.5 * s3 * a];
    let a2 = [1.5 * a, -0.5 * s3 * a];
    let mut raw = Vec::new();
    for i in -m..=m {
        for j in -m..=m {
            let p = [i as f64 * a1[0] + j as f64 * a2[0], i as f64 * a1[1] + j as f64 * a2[1], 0.0];
            if i != 0 || j != 0 {
                raw.push((Species::Boron11, p));
            }
            raw.push((Species::Nitrogen14, [p[0] + a, p[1], 0.0]));
        }
    }
    let key = |p: &[f64; 3]| {
        let az = p[1].atan2(p[0]);
        let az = if az < -1e-12 { az + 2.0 * std::f64::consts::PI } else { az.max(0.0) };
        (norm(*p), az)
    };
    raw.sort_by(|x, y| {
        let (rx, ax) = key(&x.1);
        let (ry, ay) = key(&y.1);
        if (rx - ry).abs() > RING_TOL {
            rx.total_cmp(&ry)
        } else {
            ax.total_cmp(&ay)
        }
    });
    let mut ring = 0;
    let mut last = f64::NEG_INFINITY;
    raw.into_iter()
        .map(|(species, position)| {
            let r = norm(position);
            if r - last > RING_TOL {
                ring += 1;
                last = r;
            }
            LatticeSite { species, position, ring }
        })
        .collect()
}

/// Per ring: species counts and distance.
#[derive(Clone, Debug, PartialEq)]
pub struct RingSummary {
    pub ring: usize,
    pub distance: f64,
    pub counts: BTreeMap<Species, usize>,
}

pub fn ring_census(sites: &[LatticeSite]) -> Vec<RingSummary> {
    let mut out: Vec<RingSummary> = Vec::new();
    for s in sites {
        if out.last().map(|r| r.ring) != Some(s.ring) {
            out.push(RingSummary { ring: s.ring, distance: s.distance(), counts: BTreeMap::new() });
        }
        *out.last_mut().unwrap().counts.entry(s.species).or_default() += 1;
    }
    out
}

pub(crate) fn norm(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}
