use faer::c64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::hamiltonian::HbnEffectiveParams;
use crate::hbn::constants::{PhysicalConstants, HZ_TO_RAD_PER_US};
use crate::hbn::lattice::{norm, LatticeSite, Species};
use crate::spin::SpinQuantum;

/// Field orientation: `theta` from the layer normal, `phi` from the
/// vacancy-to-nearest-nitrogen direction, magnitude `b` in tesla.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldFrame {
    pub theta: f64,
    pub phi: f64,
    pub b: f64,
}

impl FieldFrame {
    pub fn new(theta: f64, phi: f64, b: f64) -> Result<Self> {
        if !(0.0..=std::f64::consts::FRAC_PI_2 + 1e-12).contains(&theta) || !phi.is_finite() {
            return Err(Error::Config(format!("theta must lie in [0, pi/2], got {theta}")));
        }
        if !(b > 0.0) || !b.is_finite() {
            return Err(Error::Config(format!("field magnitude must be positive, got {b}")));
        }
        Ok(Self { theta, phi, b })
    }

    /// Orthonormal `(e_x', e_y', e_z')` with `e_z'` along the field.
    pub fn basis(&self) -> [[f64; 3]; 3] {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        [[ct * cp, ct * sp, -st], [-sp, cp, 0.0], [st * cp, st * sp, ct]]
    }

    /// Unit vector of `r` in field-frame components, and `|r|`.
    pub fn components(&self, r: [f64; 3]) -> Result<([f64; 3], f64)> {
        let d = norm(r);
        if d < 1e-12 {
            return Err(Error::SiteAtOrigin);
        }
        let [ex, ey, ez] = self.basis();
        let dot = |e: [f64; 3]| (e[0] * r[0] + e[1] * r[1] + e[2] * r[2]) / d;
        Ok(([dot(ex), dot(ey), dot(ez)], d))
    }
}

pub fn to_field_frame(site: &LatticeSite, frame: &FieldFrame) -> Result<([f64; 3], f64)> {
    frame.components(site.position)
}

pub fn gyromagnetic(species: Species, c: &PhysicalConstants) -> f64 {
    match species {
        Species::Boron11 => c.gamma_b11,
        Species::Nitrogen14 => c.gamma_n14,
    }
}

/// Bare nuclear Larmor frequency `gamma_n B` in rad/us.
pub fn bare_larmor(species: Species, field: f64, c: &PhysicalConstants) -> f64 {
    gyromagnetic(species, c) * field * HZ_TO_RAD_PER_US
}

/// Electron-nuclear hyperfine data of one site.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hyperfine {
    pub g: f64,
    pub a: [f64; 3],
    pub alpha: c64,
}

/// `A = g (-3 x z, -3 y z, 1 - 3 z^2)` and `alpha = (A^x + i A^y) / 4`.
pub fn hyperfine_vector(site: &LatticeSite, frame: &FieldFrame, c: &PhysicalConstants) -> Result<Hyperfine> {
    let ([x, y, z], r) = to_field_frame(site, frame)?;
    let g = c.dipolar_strength(c.gamma_e, gyromagnetic(site.species, c), r);
    let a = [-3.0 * g * x * z, -3.0 * g * y * z, g * (1.0 - 3.0 * z * z)];
    Ok(Hyperfine { g, a, alpha: c64::new(a[0], a[1]) * 0.25 })
}

/// `omega_i - A^z_i / 2`.
pub fn effective_larmor(site: &LatticeSite, frame: &FieldFrame, c: &PhysicalConstants) -> Result<f64> {
    let hf = hyperfine_vector(site, frame, c)?;
    Ok(bare_larmor(site.species, frame.b, c) - 0.5 * hf.a[2])
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DipolarCoefficients {
    pub g: f64,
    pub b: f64,
    pub c: c64,
    pub d: c64,
}

/// Nuclear dipolar coefficients from the field-frame direction of
/// `r_i - r_j`.
pub fn dipolar_coefficients(si: &LatticeSite, sj: &LatticeSite, frame: &FieldFrame, c: &PhysicalConstants) -> Result<DipolarCoefficients> {
    let rij = [si.position[0] - sj.position[0], si.position[1] - sj.position[1], si.position[2] - sj.position[2]];
    let ([x, y, z], r) = frame.components(rij).map_err(|_| Error::CoincidentSites(0, 0))?;
    let g = c.dipolar_strength(gyromagnetic(si.species, c), gyromagnetic(sj.species, c), r);
    Ok(DipolarCoefficients {
        g,
        b: g * (1.0 - 3.0 * z * z),
        c: c64::new(x, -y) * (-1.5 * g * z),
        d: c64::new(x * x - y * y, -2.0 * x * y) * (-0.75 * g),
    })
}

/// Everything the engines need about a lattice in one field orientation.
#[derive(Clone, Debug)]
pub struct CouplingTable {
    pub sites: Vec<LatticeSite>,
    pub frame: FieldFrame,
    pub hyperfine: Vec<Hyperfine>,
    pub larmor_bare: Vec<f64>,
    pub larmor: Vec<f64>,
    pub b: Vec<Vec<f64>>,
}

impl CouplingTable {
    pub fn new(sites: Vec<LatticeSite>, frame: FieldFrame, c: &PhysicalConstants) -> Result<Self> {
        c.validate()?;
        let n = sites.len();
        let hyperfine = sites.iter().map(|s| hyperfine_vector(s, &frame, c)).collect::<Result<Vec<_>>>()?;
        let larmor_bare: Vec<f64> = sites.iter().map(|s| bare_larmor(s.species, frame.b, c)).collect();
        let larmor = larmor_bare.iter().zip(&hyperfine).map(|(w, h)| w - 0.5 * h.a[2]).collect();
        let mut b = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in i + 1..n {
                let coeff = dipolar_coefficients(&sites[i], &sites[j], &frame, c).map_err(|_| Error::CoincidentSites(i, j))?;
                b[i][j] = coeff.b;
                b[j][i] = coeff.b;
            }
        }
        Ok(Self { sites, frame, hyperfine, larmor_bare, larmor, b })
    }

    pub fn spins(&self) -> Vec<SpinQuantum> {
        self.sites.iter().map(|s| s.species.spin()).collect()
    }

    pub fn alpha(&self) -> Vec<c64> {
        self.hyperfine.iter().map(|h| h.alpha).collect()
    }

    /// Resonant effective parameters at drive `omega`; sites with
    /// `coupled[i] == false` get `alpha_i = 0`.
    pub fn effective_params(&self, omega: f64, coupled: Option<&[bool]>) -> Result<HbnEffectiveParams> {
        if let Some(mask) = coupled {
            if mask.len() != self.sites.len() {
                return Err(Error::DimensionMismatch { expected: self.sites.len(), got: mask.len() });
            }
        }
        let alpha = self
            .hyperfine
            .iter()
            .enumerate()
            .map(|(i, h)| if coupled.map_or(true, |m| m[i]) { h.alpha } else { c64::new(0.0, 0.0) })
            .collect();
        Ok(HbnEffectiveParams { omega, delta: 0.0, larmor: self.larmor.clone(), alpha, b: self.b.clone() })
    }

    /// Restricts the table to the listed site indices (in the given order).
    pub fn subset(&self, keep: &[usize]) -> Self {
        Self {
            sites: keep.iter().map(|&i| self.sites[i].clone()).collect(),
            frame: self.frame,
            hyperfine: keep.iter().map(|&i| self.hyperfine[i]).collect(),
            larmor_bare: keep.iter().map(|&i| self.larmor_bare[i]).collect(),
            larmor: keep.iter().map(|&i| self.larmor[i]).collect(),
            b: keep.iter().map(|&i| keep.iter().map(|&j| self.b[i][j]).collect()).collect(),
        }
    }

    /// CSV rows: one per site with geometry and single-site couplings.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["site", "species", "x", "y", "z", "ring", "r", "A_x", "A_y", "A_z", "abs_alpha", "omega_eff"])
            .map_err(csv_err)?;
        for (i, s) in self.sites.iter().enumerate() {
            let h = &self.hyperfine[i];
            let mut row = vec![format!("{i}"), s.species.symbol().to_string()];
            row.extend(s.position.iter().map(|v| crate::io::fmt_float(*v)));
            row.push(s.ring.to_string());
            row.push(crate::io::fmt_float(s.distance()));
            row.extend(h.a.iter().map(|v| crate::io::fmt_float(*v)));
            row.push(crate::io::fmt_float(h.alpha.norm()));
            row.push(crate::io::fmt_float(self.larmor[i]));
            out.write_record(&row).map_err(csv_err)?;
        }
        out.flush()?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hbn::lattice::{generate_lattice, LatticeSize};
    use crate::linalg;
    use crate::spin::{embed, ladder_operators, ProductSpace};
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    fn site(species: Species, p: [f64; 3]) -> LatticeSite {
        LatticeSite { species, position: p, ring: 1 }
    }

    #[test]
    fn perpendicular_field_gives_no_flip_flop() {
        let c = PhysicalConstants::default();
        let frame = FieldFrame::new(0.0, 0.3, 1.0).unwrap();
        for s in generate_lattice(LatticeSize::Rings(4), 1.5).unwrap() {
            let (u, _) = to_field_frame(&s, &frame).unwrap();
            assert!(u[2].abs() < 1e-15);
            let h = hyperfine_vector(&s, &frame, &c).unwrap();
            assert!(h.alpha.norm() < 1e-14);
            assert!((h.a[2] - h.g).abs() < 1e-12 * h.g);
        }
    }

    #[test]
    fn in_plane_field_along_site() {
        let frame = FieldFrame::new(FRAC_PI_2, 0.0, 1.0).unwrap();
        let (u, r) = frame.components([1.5, 0.0, 0.0]).unwrap();
        // e_z' = (1, 0, 0) here
        assert!((u[2] - 1.0).abs() < 1e-15);
        assert!(u[0].abs() < 1e-15 && u[1].abs() < 1e-15);
        assert_eq!(r, 1.5);
        assert!(matches!(frame.components([0.0; 3]), Err(Error::SiteAtOrigin)));
    }

    #[test]
    fn nearest_nitrogen_coupling() {
        let c = PhysicalConstants::default();
        let frame = FieldFrame::new(FRAC_PI_4, 0.0, 1.0).unwrap();
        let n = site(Species::Nitrogen14, [1.5, 0.0, 0.0]);
        let h = hyperfine_vector(&n, &frame, &c).unwrap();
        // hand evaluation: g = 1e-7 hbar (2 pi)^2 28.024e9 3.078e6 / (1.5e-10)^3 in rad/us
        let g = 1e-7 * 1.054_571_817e-34 * 4.0 * PI * PI * 28.024e9 * 3.078e6 / 3.375e-30 * 1e-6;
        assert!((h.g - g).abs() < 1e-12 * g);
        // z = sin(pi/4), x = cos(pi/4): A = g(-3/2, 0, -1/2)
        assert!((h.a[0] + 1.5 * g).abs() < 1e-12 * g);
        assert!(h.a[1].abs() < 1e-12 * g);
        assert!((h.a[2] + 0.5 * g).abs() < 1e-12 * g);
        assert!((h.alpha.norm() - 0.375 * g).abs() < 1e-12 * g);
        let w = effective_larmor(&n, &frame, &c).unwrap();
        assert!((w - (c.gamma_n14 * HZ_TO_RAD_PER_US + 0.25 * g)).abs() < 1e-12);
    }

    #[test]
    fn larmor_shift_sign() {
        let c = PhysicalConstants::default();
        let frame = FieldFrame::new(0.0, 0.0, 1.0).unwrap();
        let n = site(Species::Nitrogen14, [1.5, 0.0, 0.0]);
        let h = hyperfine_vector(&n, &frame, &c).unwrap();
        assert!(h.a[2] > 0.0);
        assert!(effective_larmor(&n, &frame, &c).unwrap() < bare_larmor(Species::Nitrogen14, 1.0, &c));
        let far = site(Species::Nitrogen14, [1.5e6, 0.0, 0.0]);
        assert!((effective_larmor(&far, &frame, &c).unwrap() - c.gamma_n14 * HZ_TO_RAD_PER_US).abs() < 1e-12);
    }

    #[test]
    fn alpha_follows_sin_two_theta() {
        let c = PhysicalConstants::default();
        let phi = 0.37f64;
        let s = site(Species::Boron11, [2.0 * phi.cos(), 2.0 * phi.sin(), 0.0]);
        for k in 0..50 {
            let theta = FRAC_PI_2 * k as f64 / 49.0;
            let frame = FieldFrame::new(theta, phi, 1.0).unwrap();
            let h = hyperfine_vector(&s, &frame, &c).unwrap();
            let want = 0.375 * h.g * (2.0 * theta).sin().abs();
            assert!((h.alpha.norm() - want).abs() <= 1e-12 * h.g);
        }
    }

    #[test]
    fn magic_and_in_plane_pairs() {
        let c = PhysicalConstants::default();
        let frame = FieldFrame::new(0.0, 0.0, 1.0).unwrap();
        let a = site(Species::Boron11, [1.0, 0.0, 0.0]);
        let b = site(Species::Nitrogen14, [2.0, 1.0, 0.0]);
        let d = dipolar_coefficients(&a, &b, &frame, &c).unwrap();
        assert!((d.b - d.g).abs() < 1e-12 * d.g);
        assert_eq!(d.c, c64::new(0.0, 0.0));
        // r along (1, 0, 1/sqrt 2) has z-hat = 1/sqrt 3 in the lab frame
        let m = site(Species::Boron11, [1.0, 0.0, 1.0 / 2f64.sqrt()]);
        let o = site(Species::Boron11, [0.0, 0.0, 0.0]);
        let d = dipolar_coefficients(&m, &o, &frame, &c).unwrap();
        assert!(d.b.abs() < 1e-12 * d.g);
        assert!(matches!(dipolar_coefficients(&a, &a, &frame, &c), Err(Error::CoincidentSites(..))));
    }

    #[test]
    fn nearest_borons_w_entry() {
        // two borons 1.5 A apart in the plane, bond at 60 deg from the field azimuth
        let c = PhysicalConstants::default();
        let frame = FieldFrame::new(FRAC_PI_4, 0.0, 1.0).unwrap();
        let a = site(Species::Boron11, [0.0, 0.0, 0.0]);
        let b = site(Species::Boron11, [1.5 * (PI / 3.0).cos(), 1.5 * (PI / 3.0).sin(), 0.0]);
        let d = dipolar_coefficients(&a, &b, &frame, &c).unwrap();
        // z-hat = sin(pi/4) cos(pi/3) = sqrt2/4, so 1 - 3 z^2 = 5/8
        let g = 1e-7 * 1.054_571_817e-34 * (2.0 * PI * 13.66e6f64).powi(2) / 3.375e-30 * 1e-6;
        assert!((d.b - 0.625 * g).abs() < 1e-12 * g);
        // B_12 = sqrt(s_i s_j) b / 2 = 3/4 b for two spin-3/2
        let sites = vec![site(Species::Boron11, [3.0, 0.0, 0.0]), site(Species::Boron11, [3.0 + b.position[0], b.position[1], 0.0])];
        let table = CouplingTable::new(sites, frame, &c).unwrap();
        let p = table.effective_params(1.0, None).unwrap();
        let w = crate::gaussian::build_w_hbn(&p, &table.spins(), &[3.0, 3.0]).m;
        assert!((w[(1, 2)].re + 0.75 * table.b[0][1]).abs() < 1e-15);
        assert!((table.b[0][1] - 0.625 * g).abs() < 1e-12 * g);
    }

    #[test]
    fn mask_zeroes_alpha_only() {
        let c = PhysicalConstants::default();
        let frame = FieldFrame::new(FRAC_PI_4, 0.2, 1.0).unwrap();
        let table = CouplingTable::new(generate_lattice(LatticeSize::Rings(2), 1.5).unwrap(), frame, &c).unwrap();
        let mask: Vec<bool> = table.sites.iter().map(|s| s.species == Species::Nitrogen14).collect();
        let p = table.effective_params(5.0, Some(&mask)).unwrap();
        for (i, s) in table.sites.iter().enumerate() {
            assert_eq!(p.alpha[i] == c64::new(0.0, 0.0), s.species == Species::Boron11);
        }
        assert_eq!(p.b, table.b);
        assert!(table.effective_params(5.0, Some(&mask[..3])).is_err());
    }

    #[test]
    fn distance_scaling() {
        let c = PhysicalConstants::default();
        let frame = FieldFrame::new(0.6, 0.1, 1.0).unwrap();
        let a = site(Species::Boron11, [1.2, 0.7, 0.0]);
        let b = site(Species::Boron11, [2.4, 1.4, 0.0]);
        let ga = hyperfine_vector(&a, &frame, &c).unwrap().g;
        let gb = hyperfine_vector(&b, &frame, &c).unwrap().g;
        assert!((ga / gb - 8.0).abs() < 1e-12 * 8.0);
    }

    /// Both sides of the ladder-operator rewrite of the dipolar interaction
    /// as explicit matrices.
    fn dipolar_matrix_check(si: SpinQuantum, sj: SpinQuantum, r: [f64; 3], frame: &FieldFrame) -> f64 {
        let c = PhysicalConstants::default();
        let a = site(Species::Boron11, r);
        let o = site(Species::Nitrogen14, [0.0; 3]);
        let coeff = dipolar_coefficients(&a, &o, frame, &c).unwrap();
        let ([x, y, z], _) = frame.components(r).unwrap();
        let space = ProductSpace::new(vec![si.dim(), sj.dim()]).unwrap();
        let li = ladder_operators(si);
        let lj = ladder_operators(sj);
        let e = |op, k| embed(op, k, &space).unwrap();
        let (ix, iy, iz) = (e(&li.sx, 0), e(&li.sy, 0), e(&li.sz, 0));
        let (jx, jy, jz) = (e(&lj.sx, 1), e(&lj.sy, 1), e(&lj.sz, 1));
        let (ip, im, jp, jm) = (e(&li.splus, 0), e(&li.sminus, 0), e(&lj.splus, 1), e(&lj.sminus, 1));
        let cr = |v: f64| c64::new(v, 0.0);
        let mm = |a: &crate::spin::OperatorMatrix, b: &crate::spin::OperatorMatrix| a.matmul(b).unwrap();
        let dot = mm(&ix, &jx).add(&mm(&iy, &jy)).unwrap().add(&mm(&iz, &jz)).unwrap();
        let ri = ix.scaled(cr(x)).add(&iy.scaled(cr(y))).unwrap().add(&iz.scaled(cr(z))).unwrap();
        let rj = jx.scaled(cr(x)).add(&jy.scaled(cr(y))).unwrap().add(&jz.scaled(cr(z))).unwrap();
        let direct = dot.add(&mm(&ri, &rj).scaled(cr(-3.0))).unwrap().scaled(cr(coeff.g));

        let secular = mm(&iz, &jz).add(&mm(&ip, &jm).add(&mm(&im, &jp)).unwrap().scaled(cr(-0.25))).unwrap().scaled(cr(coeff.b));
        let cterm = mm(&iz, &jp).add(&mm(&ip, &jz)).unwrap().scaled(coeff.c);
        let dterm = mm(&ip, &jp).scaled(coeff.d);
        let cdag = mm(&iz, &jm).add(&mm(&im, &jz)).unwrap().scaled(coeff.c.conj());
        let ddag = mm(&im, &jm).scaled(coeff.d.conj());
        let ladder = secular.add(&cterm).unwrap().add(&dterm).unwrap().add(&cdag).unwrap().add(&ddag).unwrap();
        linalg::max_abs_diff(direct.data(), ladder.data()) / coeff.g
    }

    #[test]
    fn ladder_decomposition_spin_half() {
        let frame = FieldFrame::new(0.7, 0.4, 1.0).unwrap();
        assert!(dipolar_matrix_check(SpinQuantum::HALF, SpinQuantum::HALF, [1.1, -0.6, 0.3], &frame) < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn ladder_decomposition_general(theta in 0.0f64..FRAC_PI_2, phi in 0.0f64..6.3, x in -3.0f64..3.0, y in 0.2f64..3.0, z in -1.0f64..1.0,
                                        ti in 1u32..4, tj in 1u32..4) {
            let frame = FieldFrame::new(theta, phi, 1.0).unwrap();
            let si = SpinQuantum::from_twice(ti).unwrap();
            let sj = SpinQuantum::from_twice(tj).unwrap();
            prop_assert!(dipolar_matrix_check(si, sj, [x, y, z], &frame) < 1e-12);
        }

        #[test]
        fn reciprocity(theta in 0.0f64..FRAC_PI_2, phi in 0.0f64..6.3, k in 0usize..30, l in 0usize..30) {
            prop_assume!(k != l);
            let c = PhysicalConstants::default();
            let sites = generate_lattice(LatticeSize::Sites(30), 1.5).unwrap();
            let frame = FieldFrame::new(theta, phi, 1.0).unwrap();
            let ij = dipolar_coefficients(&sites[k], &sites[l], &frame, &c).unwrap();
            let ji = dipolar_coefficients(&sites[l], &sites[k], &frame, &c).unwrap();
            prop_assert!((ij.g - ji.g).abs() <= 1e-15 * ij.g);
            prop_assert!((ij.b - ji.b).abs() <= 1e-12 * ij.g);
            prop_assert!((ij.c - ji.c).norm() <= 1e-12 * ij.g);
            prop_assert!((ij.d - ji.d).norm() <= 1e-12 * ij.g);
        }

        #[test]
        fn rotation_preserves_length(theta in 0.0f64..FRAC_PI_2, phi in -7.0f64..7.0, x in -5.0f64..5.0, y in -5.0f64..5.0) {
            prop_assume!(x.abs() + y.abs() > 1e-3);
            let frame = FieldFrame::new(theta, phi, 1.0).unwrap();
            let (u, r) = frame.components([x, y, 0.0]).unwrap();
            prop_assert!((norm(u) - 1.0).abs() < 1e-14);
            prop_assert!((r - (x * x + y * y).sqrt()).abs() < 1e-14);
        }
    }
}
