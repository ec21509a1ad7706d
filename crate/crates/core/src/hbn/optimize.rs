use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::hbn::constants::PhysicalConstants;
use crate::hbn::couplings::{hyperfine_vector, FieldFrame};
use crate::hbn::lattice::LatticeSite;

/// What the orientation grid search maximizes over the selected sites.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrientationObjective {
    /// Mean of `|alpha_i|^2`.
    MeanSquared,
    /// Largest single `|alpha_i|`.
    StrongestSite,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrientationSearch {
    pub objective: OrientationObjective,
    /// Rings entering the objective.
    pub rings: Vec<usize>,
    /// Grid step in degrees.
    pub step_deg: f64,
    /// Search `phi` over `[0, 360)` instead of `[0, 120)`.
    pub full_azimuth: bool,
}

impl Default for OrientationSearch {
    fn default() -> Self {
        Self { objective: OrientationObjective::MeanSquared, rings: vec![1, 2], step_deg: 1.0, full_azimuth: false }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Orientation {
    pub theta: f64,
    pub phi: f64,
    pub value: f64,
}

pub fn orientation_objective(sites: &[LatticeSite], frame: &FieldFrame, search: &OrientationSearch, c: &PhysicalConstants) -> Result<f64> {
    let mut acc = 0.0f64;
    let mut count = 0usize;
    for s in sites.iter().filter(|s| search.rings.contains(&s.ring)) {
        let a = hyperfine_vector(s, frame, c)?.alpha.norm();
        match search.objective {
            OrientationObjective::MeanSquared => acc += a * a,
            OrientationObjective::StrongestSite => acc = acc.max(a),
        }
        count += 1;
    }
    Ok(match search.objective {
        OrientationObjective::MeanSquared if count > 0 => acc / count as f64,
        _ => acc,
    })
}

/// Grid search over `theta in [0, 90]` and `phi`, in degrees; ties keep the
/// smallest `theta`, then the smallest `phi`.
pub fn optimize_field_orientation(sites: &[LatticeSite], search: &OrientationSearch, field: f64, c: &PhysicalConstants) -> Result<Orientation> {
    let steps_theta = (90.0 / search.step_deg).round() as usize;
    let span = if search.full_azimuth { 360.0 } else { 120.0 };
    let steps_phi = (span / search.step_deg).round() as usize;
    let mut best: Option<Orientation> = None;
    for it in 0..=steps_theta {
        let theta = (it as f64 * search.step_deg).to_radians();
        for ip in 0..steps_phi {
            let phi = (ip as f64 * search.step_deg).to_radians();
            let frame = FieldFrame { theta, phi, b: field };
            let value = orientation_objective(sites, &frame, search, c)?;
            if best.map_or(true, |b| value > b.value * (1.0 + 1e-12) + 1e-300) {
                best = Some(Orientation { theta, phi, value });
            }
        }
    }
    Ok(best.expect("nonempty grid"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hbn::lattice::{generate_lattice, LatticeSize, Species};
    use proptest::prelude::*;

    fn rings12() -> Vec<LatticeSite> {
        generate_lattice(LatticeSize::Rings(2), 1.5).unwrap()
    }

    #[test]
    fn strongest_site_peaks_at_forty_five_degrees() {
        let c = PhysicalConstants::default();
        let search = OrientationSearch { objective: OrientationObjective::StrongestSite, ..Default::default() };
        let best = optimize_field_orientation(&rings12(), &search, 1.0, &c).unwrap();
        assert_eq!(best.theta, 45f64.to_radians());
    }

    #[test]
    fn mean_squared_peaks_at_magic_complement() {
        // sum over a C3 ring of z^2 (1 - z^2) is maximal at sin^2 theta = 2/3
        let c = PhysicalConstants::default();
        let best = optimize_field_orientation(&rings12(), &OrientationSearch::default(), 1.0, &c).unwrap();
        let analytic = (2f64 / 3.0).sqrt().asin().to_degrees();
        assert!((best.theta.to_degrees() - analytic).abs() <= 0.5);
        assert_eq!(best.theta.to_degrees().round(), 55.0);
    }

    #[test]
    fn single_site_matches_closed_form() {
        // one nitrogen along phi = 0: |alpha| = 3/8 g |sin 2 theta|, max at 45 deg
        let c = PhysicalConstants::default();
        let site = vec![LatticeSite { species: Species::Nitrogen14, position: [1.5, 0.0, 0.0], ring: 1 }];
        let search = OrientationSearch { rings: vec![1], full_azimuth: true, ..Default::default() };
        let best = optimize_field_orientation(&site, &search, 1.0, &c).unwrap();
        let g = c.dipolar_strength(c.gamma_e, c.gamma_n14, 1.5);
        assert!((best.theta.to_degrees() - 45.0).abs() <= 1.0);
        assert_eq!(best.phi, 0.0);
        assert!((best.value.sqrt() - 0.375 * g).abs() < 1e-9 * g);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn objective_has_threefold_symmetry(theta in 0.0f64..1.5707, phi in 0.0f64..6.3, strongest in proptest::bool::ANY) {
            let c = PhysicalConstants::default();
            let search = OrientationSearch {
                objective: if strongest { OrientationObjective::StrongestSite } else { OrientationObjective::MeanSquared },
                rings: vec![1, 2, 3, 4],
                ..Default::default()
            };
            let sites = generate_lattice(LatticeSize::Rings(4), 1.5).unwrap();
            let a = orientation_objective(&sites, &FieldFrame { theta, phi, b: 1.0 }, &search, &c).unwrap();
            let b = orientation_objective(&sites, &FieldFrame { theta, phi: phi + 2.0 * std::f64::consts::PI / 3.0, b: 1.0 }, &search, &c).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-300));
        }
    }
}
