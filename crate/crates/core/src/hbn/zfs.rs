use crate::error::{Error, Result};
use crate::hbn::constants::PhysicalConstants;

/// `D(theta) = (D / 4)(1 + 3 cos 2 theta)`, in rad/us.
pub fn zfs_projection(theta: f64, c: &PhysicalConstants) -> f64 {
    0.25 * c.d_angular() * (1.0 + 3.0 * (2.0 * theta).cos())
}

/// `(D(theta), delta(theta))` at field `b` (tesla), in rad/us, with
/// `delta = D^2 / (8 omega_e) [sin^4 theta + sin^2 2theta / (1 - (D(theta)/omega_e)^2)]`
/// and `omega_e = -gamma_e b`.
pub fn zfs_shifts(theta: f64, b: f64, c: &PhysicalConstants) -> Result<(f64, f64)> {
    let d_theta = zfs_projection(theta, c);
    let we = c.electron_larmor(b);
    let den = 1.0 - (d_theta / we).powi(2);
    if we == 0.0 || !we.is_finite() || den.abs() < 1e-12 {
        return Err(Error::ResonantDenominator { theta });
    }
    let d = c.d_angular();
    let (s, s2) = (theta.sin(), (2.0 * theta).sin());
    Ok((d_theta, d * d / (8.0 * we) * (s.powi(4) + s2 * s2 / den)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    #[test]
    fn special_angles() {
        let c = PhysicalConstants::default();
        let d = c.d_angular();
        let (d0, delta0) = zfs_shifts(0.0, 1.0, &c).unwrap();
        assert!((d0 - d).abs() < 1e-12 * d);
        assert_eq!(delta0, 0.0);
        assert!((zfs_projection(FRAC_PI_2, &c) + d / 2.0).abs() < 1e-12 * d);
        assert!((zfs_projection(FRAC_PI_4, &c) - d / 4.0).abs() < 1e-12 * d);
    }

    #[test]
    fn in_plane_shift() {
        // theta = pi/2: delta = D^2 / (8 omega_e)
        let c = PhysicalConstants::default();
        let (_, delta) = zfs_shifts(FRAC_PI_2, 1.0, &c).unwrap();
        let we = -c.gamma_e * 2.0 * std::f64::consts::PI * 1e-6;
        let want = c.d_angular().powi(2) / (8.0 * we);
        assert!((delta - want).abs() < 1e-9 * want.abs());
        assert!(delta < 0.0);
    }

    #[test]
    fn resonance_is_rejected() {
        let c = PhysicalConstants::default();
        // |omega_e| = D at theta = 0 when gamma_e B = D / 2 pi
        let b = c.d_zfs / c.gamma_e;
        assert!(matches!(zfs_shifts(0.0, b, &c), Err(Error::ResonantDenominator { .. })));
        assert!(zfs_shifts(0.0, 0.0, &c).is_err());
    }
}
