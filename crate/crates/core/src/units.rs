//! Physical constants and unit conversions for a pulsed-standing-wave
//! experiment on cold atoms.
//!
//! Conventions used throughout the crate:
//! * momenta are quoted in photon recoils `p_rec = HBAR * k_L`;
//! * one two-photon kick changes the atomic momentum by `2 * p_rec`, so the
//!   momentum ladder sits at `(2 * j + 2 * beta) * p_rec` with integer `j`;
//! * quasimomentum `beta` lives in `[0, 1)` in units of `2 * p_rec`;
//! * energies are quoted in photon-recoil energies `E_rec = HBAR * omega_rec`;
//! * the dimensionless kick period is `kbar = 8 * omega_rec * T`, equal to
//!   `4 * pi` when `T` is the Talbot time.

use crate::{Error, Result};
use std::f64::consts::PI;

/// Reduced Planck constant [J s].
pub const HBAR: f64 = 1.054_571_817e-34;

/// Laser wavelength and atomic mass; every recoil scale derives from these.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    /// Standing-wave laser wavelength [m].
    pub wavelength: f64,
    /// Atomic mass [kg].
    pub atom_mass: f64,
}

impl Default for PhysicalConstants {
    /// 780 nm light on rubidium-87.
    fn default() -> Self {
        Self {
            wavelength: 780.0e-9,
            atom_mass: 1.443_16e-25,
        }
    }
}

impl PhysicalConstants {
    pub fn new(wavelength: f64, atom_mass: f64) -> Result<Self> {
        if !(wavelength.is_finite() && wavelength > 0.0) {
            return Err(Error::config("wavelength", "must be finite and positive"));
        }
        if !(atom_mass.is_finite() && atom_mass > 0.0) {
            return Err(Error::config("atom_mass", "must be finite and positive"));
        }
        Ok(Self {
            wavelength,
            atom_mass,
        })
    }

    /// Laser wavenumber `k_L = 2 pi / wavelength` [1/m].
    pub fn k_l(&self) -> f64 {
        2.0 * PI / self.wavelength
    }

    /// Standing-wave grating period `wavelength / 2` [m].
    pub fn grating_period(&self) -> f64 {
        self.wavelength / 2.0
    }

    /// Recoil angular frequency `HBAR * k_L^2 / (2 m)` [rad/s].
    pub fn omega_rec(&self) -> f64 {
        HBAR * self.k_l().powi(2) / (2.0 * self.atom_mass)
    }

    /// Recoil frequency `omega_rec / 2 pi` [Hz].
    pub fn f_rec(&self) -> f64 {
        self.omega_rec() / (2.0 * PI)
    }

    /// Photon recoil momentum `HBAR * k_L` [kg m/s].
    pub fn p_rec(&self) -> f64 {
        HBAR * self.k_l()
    }

    /// Photon recoil energy `HBAR * omega_rec` [J].
    pub fn e_rec(&self) -> f64 {
        HBAR * self.omega_rec()
    }

    /// Talbot time `pi / (2 omega_rec)` [s]; free flight for this long gives
    /// `kbar = 4 pi`.
    pub fn talbot_time(&self) -> f64 {
        PI / (2.0 * self.omega_rec())
    }
}

/// Timing and strength of a periodic kick sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KickSchedule {
    /// Phase depth of one kick (area of the light pulse), dimensionless.
    pub phi_d: f64,
    /// Kick period [s].
    pub period_t: f64,
    /// Number of kicks to apply.
    pub num_kicks: u32,
    /// Quasimomentum of the initial ladder, in `[0, 1)` units of `2 p_rec`.
    pub beta: f64,
    /// Pulse width [s]; `0` means ideal delta kicks.
    pub pulse_width_tau: f64,
}

impl KickSchedule {
    pub fn new(
        phi_d: f64,
        period_t: f64,
        num_kicks: u32,
        beta: f64,
        pulse_width_tau: f64,
    ) -> Result<Self> {
        if !(phi_d.is_finite() && phi_d >= 0.0) {
            return Err(Error::config("phi_d", "must be finite and non-negative"));
        }
        if !(period_t.is_finite() && period_t > 0.0) {
            return Err(Error::config("period_T", "must be finite and positive"));
        }
        if !(beta.is_finite() && (0.0..1.0).contains(&beta)) {
            return Err(Error::config("beta", "must lie in [0, 1)"));
        }
        if !(pulse_width_tau.is_finite() && pulse_width_tau >= 0.0) {
            return Err(Error::config(
                "pulse_width_tau",
                "must be finite and non-negative",
            ));
        }
        if pulse_width_tau >= period_t {
            return Err(Error::config(
                "pulse_width_tau",
                "must be shorter than the kick period",
            ));
        }
        Ok(Self {
            phi_d,
            period_t,
            num_kicks,
            beta,
            pulse_width_tau,
        })
    }

    /// Ideal delta-kick schedule (zero pulse width).
    pub fn delta_kick(phi_d: f64, period_t: f64, num_kicks: u32, beta: f64) -> Result<Self> {
        Self::new(phi_d, period_t, num_kicks, beta, 0.0)
    }

    /// Dimensionless period `kbar = 8 * omega_rec * period_T`.
    pub fn kbar(&self, constants: &PhysicalConstants) -> f64 {
        period_to_kbar(self.period_t, constants)
    }

    /// Classical stochasticity parameter `kappa = phi_d * kbar`.
    pub fn kappa(&self, constants: &PhysicalConstants) -> f64 {
        self.phi_d * self.kbar(constants)
    }

    /// Ballistic flight time per period, `period_T - pulse_width_tau` [s].
    pub fn free_time(&self) -> f64 {
        self.period_t - self.pulse_width_tau
    }
}

/// Two-photon Rabi frequency `rabi^2 / detuning` [rad/s] of a far-detuned
/// standing wave. Fails on zero detuning.
pub fn effective_rabi(rabi: f64, detuning: f64) -> Result<f64> {
    if !rabi.is_finite() || !detuning.is_finite() {
        return Err(Error::domain("effective_rabi: inputs must be finite"));
    }
    if detuning == 0.0 {
        return Err(Error::domain(
            "effective_rabi: detuning must be non-zero (resonant drive has no dispersive limit)",
        ));
    }
    Ok(rabi * rabi / detuning)
}

/// Kick phase depth `omega_eff * tau` accumulated over one pulse.
pub fn kick_strength(omega_eff: f64, tau: f64) -> Result<f64> {
    if !omega_eff.is_finite() || !tau.is_finite() {
        return Err(Error::domain("kick_strength: inputs must be finite"));
    }
    if tau < 0.0 {
        return Err(Error::domain("kick_strength: pulse width must be >= 0"));
    }
    Ok(omega_eff * tau)
}

/// Initial momentum `delta_omega / (4 omega_rec)` [p_rec] selected by an AOM
/// frequency offset `delta_omega` [rad/s] between the standing-wave beams.
pub fn aom_offset_to_momentum(delta_omega: f64, constants: &PhysicalConstants) -> f64 {
    delta_omega / (4.0 * constants.omega_rec())
}

/// Dimensionless kick period `kbar = 8 * omega_rec * period_T`.
pub fn period_to_kbar(period_t: f64, constants: &PhysicalConstants) -> f64 {
    8.0 * constants.omega_rec() * period_t
}

/// Kick period [s] with dimensionless value `kbar`; inverse of
/// [`period_to_kbar`].
pub fn kbar_to_period(kbar: f64, constants: &PhysicalConstants) -> Result<f64> {
    if !(kbar.is_finite() && kbar > 0.0) {
        return Err(Error::domain("kbar_to_period: kbar must be positive"));
    }
    Ok(kbar / (8.0 * constants.omega_rec()))
}

/// Split an initial momentum `p_i` [p_rec] into the two-photon ladder index
/// and the quasimomentum: `p_i = 2 * (offset + beta)` with integer `offset`
/// and `beta` in `[0, 1)`.
pub fn momentum_to_ladder(p_i: f64) -> (i64, f64) {
    let x = p_i / 2.0;
    let mut offset = x.floor();
    let mut beta = x - offset;
    // Rounding can push `x - floor(x)` to exactly 1.0 when x is a hair below
    // an integer; keep beta inside [0, 1).
    if beta >= 1.0 {
        offset += 1.0;
        beta = 0.0;
    }
    (offset as i64, beta)
}

/// Momentum [p_rec] of ladder site `offset` at quasimomentum `beta`; inverse
/// of [`momentum_to_ladder`].
pub fn ladder_to_momentum(offset: i64, beta: f64) -> f64 {
    2.0 * (offset as f64 + beta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;

    #[test]
    fn derived_scales_match_rubidium_lab_values() {
        let c = PhysicalConstants::default();
        // Talbot time ~66.3 us, recoil frequency ~3.77 kHz.
        assert!(c.talbot_time() > 66.2e-6 && c.talbot_time() < 66.4e-6);
        assert!(c.f_rec() > 3.76e3 && c.f_rec() < 3.78e3);
        // Consistency of the derived scales among themselves.
        assert_relative_eq!(c.e_rec(), c.p_rec().powi(2) / (2.0 * c.atom_mass), max_relative = 1e-14);
        assert_relative_eq!(c.omega_rec() * c.talbot_time(), PI / 2.0, max_relative = 1e-14);
    }

    #[test]
    fn kbar_hits_4pi_at_the_talbot_time() {
        let c = PhysicalConstants::default();
        assert_relative_eq!(
            period_to_kbar(c.talbot_time(), &c),
            4.0 * PI,
            max_relative = 1e-13
        );
        assert_relative_eq!(
            period_to_kbar(0.5 * c.talbot_time(), &c),
            2.0 * PI,
            max_relative = 1e-13
        );
        // The lab-rounded 66.31 us period lands on 4 pi to a tenth of a percent.
        let kbar = period_to_kbar(66.31e-6, &c);
        assert!((kbar / (4.0 * PI) - 1.0).abs() < 1e-3);
    }

    #[test]
    fn kbar_period_round_trip() {
        let c = PhysicalConstants::default();
        let t = 47.3e-6;
        let back = kbar_to_period(period_to_kbar(t, &c), &c).unwrap();
        assert_relative_eq!(back, t, max_relative = 1e-12);
    }

    #[test]
    fn aom_offsets_select_recoil_momenta() {
        let c = PhysicalConstants::default();
        // 2 pi * 30.16 kHz is the lab setting for two recoils of drift.
        let p = aom_offset_to_momentum(2.0 * PI * 30.16e3, &c);
        assert_relative_eq!(p, 2.0, max_relative = 1e-3);
        // 2 pi * 3.77 kHz (one recoil frequency) drifts a quarter recoil,
        // i.e. an eighth of the two-photon ladder spacing.
        let p = aom_offset_to_momentum(2.0 * PI * 3.77e3, &c);
        assert_relative_eq!(p, 0.25, max_relative = 1e-3);
        let (offset, beta) = momentum_to_ladder(p);
        assert_eq!(offset, 0);
        assert_abs_diff_eq!(beta, 0.125, epsilon = 1e-3);
    }

    #[test]
    fn ladder_split_examples() {
        assert_eq!(momentum_to_ladder(0.0), (0, 0.0));
        assert_eq!(momentum_to_ladder(2.0), (1, 0.0));
        let (offset, beta) = momentum_to_ladder(0.5);
        assert_eq!(offset, 0);
        assert_abs_diff_eq!(beta, 0.25, epsilon = 1e-15);
        // Negative momenta wrap beta into [0, 1).
        let (offset, beta) = momentum_to_ladder(-0.5);
        assert_eq!(offset, -1);
        assert_abs_diff_eq!(beta, 0.75, epsilon = 1e-15);
    }

    #[test]
    fn effective_rabi_and_kick_strength() {
        // 10 MHz single-photon Rabi at 2.45 GHz detuning.
        let omega_eff = effective_rabi(2.0 * PI * 10.0e6, 2.0 * PI * 2.45e9).unwrap();
        assert_relative_eq!(omega_eff, 2.0 * PI * 40_816.326, max_relative = 1e-6);
        // A 9.75 us pulse at that strength accumulates phase depth 2.5.
        let phi_d = kick_strength(omega_eff, 9.75e-6).unwrap();
        assert_abs_diff_eq!(phi_d, 2.5, epsilon = 5e-3);
        assert!(effective_rabi(1.0e6, 0.0).is_err());
        assert!(kick_strength(1.0e4, -1.0e-6).is_err());
    }

    #[test]
    fn schedule_validation() {
        let c = PhysicalConstants::default();
        let tt = c.talbot_time();
        let s = KickSchedule::delta_kick(1.5, tt, 6, 0.0).unwrap();
        assert_relative_eq!(s.kbar(&c), 4.0 * PI, max_relative = 1e-13);
        assert_relative_eq!(s.kappa(&c), 1.5 * 4.0 * PI, max_relative = 1e-13);
        assert_eq!(s.free_time(), tt);

        assert!(KickSchedule::delta_kick(-0.1, tt, 1, 0.0).is_err());
        assert!(KickSchedule::delta_kick(1.0, 0.0, 1, 0.0).is_err());
        assert!(KickSchedule::delta_kick(1.0, tt, 1, 1.0).is_err());
        assert!(KickSchedule::delta_kick(1.0, tt, 1, -0.2).is_err());
        assert!(KickSchedule::new(1.0, tt, 1, 0.0, tt).is_err());
        assert!(KickSchedule::new(1.0, tt, 1, 0.0, -1e-9).is_err());
    }

    proptest! {
        #[test]
        fn ladder_round_trip(p in -400.0f64..400.0) {
            let (offset, beta) = momentum_to_ladder(p);
            prop_assert!((0.0..1.0).contains(&beta));
            let back = ladder_to_momentum(offset, beta);
            prop_assert!((back - p).abs() < 1e-10);
        }

        #[test]
        fn kbar_round_trip_wide(t in 1.0e-7f64..1.0e-3) {
            let c = PhysicalConstants::default();
            let back = kbar_to_period(period_to_kbar(t, &c), &c).unwrap();
            prop_assert!((back / t - 1.0).abs() < 1e-12);
        }
    }
}
