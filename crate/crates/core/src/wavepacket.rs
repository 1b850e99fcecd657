//! Spatial grid, initial wave packets, and momentum-space observables.
//!
//! The grid spans an integer number of grating periods (`wavelength / 2`), so
//! the standing-wave potential is exactly periodic on it and a two-photon
//! kick couples momentum bins separated by exactly `2 p_rec`. Grid momenta
//! are `p / p_rec = 2 f / num_periods` for signed FFT frequency `f`, which
//! places a bin on every ladder site `(2 j + 2 beta) p_rec` whenever
//! `beta * num_periods` is an integer and tiles every ladder uniformly
//! otherwise.

use crate::fft::SpectralTransform;
use crate::units::momentum_to_ladder;
use crate::{Error, Result};
use num_complex::Complex64;
use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::io::Write;

/// Uniform spatial grid over a whole number of grating periods.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialGrid {
    num_points: usize,
    num_periods: u32,
    wavelength: f64,
}

impl Default for SpatialGrid {
    /// 65536 points over 512 periods of a 780 nm standing wave: momentum
    /// bins every `p_rec / 256`, Nyquist momentum `128 p_rec`.
    fn default() -> Self {
        Self {
            num_points: 1 << 16,
            num_periods: 512,
            wavelength: 780.0e-9,
        }
    }
}

impl SpatialGrid {
    pub fn new(num_points: usize, num_periods: u32, wavelength: f64) -> Result<Self> {
        if num_periods == 0 {
            return Err(Error::config("num_periods", "must be at least 1"));
        }
        if !num_points.is_power_of_two() || num_points < 8 {
            return Err(Error::config(
                "num_points",
                "must be a power of two, at least 8",
            ));
        }
        if num_points < 4 * num_periods as usize {
            return Err(Error::config(
                "num_points",
                "must be at least 4 per grating period (Nyquist momentum must reach 4 p_rec)",
            ));
        }
        if !(wavelength.is_finite() && wavelength > 0.0) {
            return Err(Error::config("wavelength", "must be finite and positive"));
        }
        Ok(Self {
            num_points,
            num_periods,
            wavelength,
        })
    }

    pub fn num_points(&self) -> usize {
        self.num_points
    }

    pub fn num_periods(&self) -> u32 {
        self.num_periods
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    /// Grating period `wavelength / 2` [m].
    pub fn grating_period(&self) -> f64 {
        self.wavelength / 2.0
    }

    /// Total grid length [m].
    pub fn length(&self) -> f64 {
        self.num_periods as f64 * self.grating_period()
    }

    /// Sample spacing [m].
    pub fn dx(&self) -> f64 {
        self.length() / self.num_points as f64
    }

    /// Position of sample `j` [m]; the grid is centered, `x = 0` at
    /// `j = num_points / 2`.
    pub fn x_at(&self, j: usize) -> f64 {
        (j as f64 - self.num_points as f64 / 2.0) * self.dx()
    }

    /// Standing-wave phase `2 k_L x` at sample `j`, reduced to `[0, 2 pi)`
    /// in exact integer arithmetic.
    pub fn grating_phase_at(&self, j: usize) -> f64 {
        let n = self.num_points as i64;
        let centered = j as i64 - n / 2;
        let r = (self.num_periods as i64 * centered).rem_euclid(n);
        TAU * r as f64 / n as f64
    }

    /// Signed FFT frequency of momentum bin `m` in `0..num_points`.
    pub fn signed_freq(&self, bin: usize) -> i64 {
        let n = self.num_points as i64;
        let m = bin as i64;
        if m < n / 2 {
            m
        } else {
            m - n
        }
    }

    /// Momentum `p / p_rec` carried by signed FFT frequency `f`.
    pub fn p_over_prec(&self, f: i64) -> f64 {
        2.0 * f as f64 / self.num_periods as f64
    }

    /// Momentum bin spacing [p_rec].
    pub fn momentum_bin_width(&self) -> f64 {
        2.0 / self.num_periods as f64
    }

    /// Largest representable momentum magnitude [p_rec].
    pub fn nyquist_p_over_prec(&self) -> f64 {
        self.num_points as f64 / self.num_periods as f64
    }
}

/// Which ladder site a momentum belongs to: windows are half-open intervals
/// `[2 j + 2 beta - 1, 2 j + 2 beta + 1)` in `p_rec`, tiling the axis.
pub fn ladder_site_of(p_over_prec: f64, beta: f64) -> i64 {
    ((p_over_prec - 2.0 * beta + 1.0) / 2.0).floor() as i64
}

/// A position-space wave function on a [`SpatialGrid`], tagged with the
/// quasimomentum of the ladder it occupies.
#[derive(Debug, Clone)]
pub struct WavePacket {
    grid: SpatialGrid,
    pub(crate) amplitudes: Vec<Complex64>,
    beta: f64,
}

impl WavePacket {
    /// Gaussian envelope `exp(-x^2 / (2 sigma_w^2))` boosted to momentum
    /// `p_init` [p_rec], normalized to unit total probability.
    ///
    /// `sigma_w` [m] must lie in `[wavelength, length / 8]`: narrower packets
    /// are not resolved by the grating, wider ones touch the box walls.
    pub fn init_gaussian(grid: SpatialGrid, sigma_w: f64, p_init: f64) -> Result<Self> {
        if !sigma_w.is_finite() || sigma_w < grid.wavelength() || sigma_w > grid.length() / 8.0 {
            return Err(Error::config(
                "sigma_w",
                format!(
                    "must lie in [wavelength, length / 8] = [{:.3e}, {:.3e}] m",
                    grid.wavelength(),
                    grid.length() / 8.0
                ),
            ));
        }
        if !p_init.is_finite() {
            return Err(Error::config("p_init", "must be finite"));
        }
        let n = grid.num_points();
        let half = n as f64 / 2.0;
        // k_init * x_j in closed form: p_init * pi * num_periods * (j - n/2) / n.
        let phase_step = p_init * std::f64::consts::PI * grid.num_periods() as f64 / n as f64;
        let width_in_dx = sigma_w / grid.dx();
        let mut amplitudes = Vec::with_capacity(n);
        for j in 0..n {
            let centered = j as f64 - half;
            let envelope = (-0.5 * (centered / width_in_dx).powi(2)).exp();
            amplitudes.push(Complex64::from_polar(envelope, -phase_step * centered));
        }
        let norm: f64 = amplitudes.iter().map(|c| c.norm_sqr()).sum();
        let scale = 1.0 / norm.sqrt();
        for c in &mut amplitudes {
            *c *= scale;
        }
        let (_, beta) = momentum_to_ladder(p_init);
        Ok(Self {
            grid,
            amplitudes,
            beta,
        })
    }

    #[cfg(test)]
    pub(crate) fn from_amplitudes(grid: SpatialGrid, amplitudes: Vec<Complex64>, beta: f64) -> Self {
        debug_assert_eq!(amplitudes.len(), grid.num_points());
        Self {
            grid,
            amplitudes,
            beta,
        }
    }

    pub fn grid(&self) -> SpatialGrid {
        self.grid
    }

    /// Quasimomentum of the ladder the packet occupies, in `[0, 1)`.
    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    /// Total probability; unity up to accumulated round-off.
    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|c| c.norm_sqr()).sum()
    }

    /// Momentum-space probability distribution, bins in ascending momentum.
    pub fn momentum_distribution(&self) -> MomentumDistribution {
        let mut fft = SpectralTransform::new(self.grid.num_points());
        self.momentum_distribution_with(&mut fft)
    }

    pub(crate) fn momentum_distribution_with(
        &self,
        fft: &mut SpectralTransform,
    ) -> MomentumDistribution {
        debug_assert_eq!(fft.len(), self.grid.num_points());
        let n = self.grid.num_points();
        let mut buffer = self.amplitudes.clone();
        fft.to_momentum(&mut buffer);
        let mut p_over_prec = Vec::with_capacity(n);
        let mut probability = Vec::with_capacity(n);
        for i in 0..n {
            let f = i as i64 - (n / 2) as i64;
            let bin = (i + n / 2) % n;
            p_over_prec.push(self.grid.p_over_prec(f));
            probability.push(buffer[bin].norm_sqr());
        }
        MomentumDistribution {
            p_over_prec,
            probability,
            beta: self.beta,
            bin_width: self.grid.momentum_bin_width(),
        }
    }
}

/// Probability per momentum bin, ascending in momentum.
#[derive(Debug, Clone)]
pub struct MomentumDistribution {
    pub(crate) p_over_prec: Vec<f64>,
    pub(crate) probability: Vec<f64>,
    pub(crate) beta: f64,
    pub(crate) bin_width: f64,
}

impl MomentumDistribution {
    /// Bin momenta [p_rec], ascending.
    pub fn p_over_prec(&self) -> &[f64] {
        &self.p_over_prec
    }

    /// Probability in each bin; sums to the packet norm.
    pub fn probability(&self) -> &[f64] {
        &self.probability
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Bin spacing [p_rec].
    pub fn bin_width(&self) -> f64 {
        self.bin_width
    }

    /// Total probability.
    pub fn total(&self) -> f64 {
        self.probability.iter().sum()
    }

    /// Moment `<(p / p_rec)^q>` for `q` in `1..=4`.
    pub fn momentum_moment(&self, q: u32) -> Result<f64> {
        if !(1..=4).contains(&q) {
            return Err(Error::domain(format!(
                "momentum_moment: q = {q} outside supported range 1..=4"
            )));
        }
        Ok(self
            .p_over_prec
            .iter()
            .zip(&self.probability)
            .map(|(p, w)| w * p.powi(q as i32))
            .sum())
    }

    /// Kinetic energy `<(p / p_rec)^2>` in recoil energies `E_rec`.
    pub fn kinetic_energy(&self) -> f64 {
        self.momentum_moment(2).expect("q = 2 is always in range")
    }

    /// Probability per ladder site: each bin is assigned to the half-open
    /// window `[2 j + 2 beta - 1, 2 j + 2 beta + 1)` it falls in.
    pub fn order_populations(&self) -> BTreeMap<i64, f64> {
        let mut sites = BTreeMap::new();
        for (p, w) in self.p_over_prec.iter().zip(&self.probability) {
            *sites.entry(ladder_site_of(*p, self.beta)).or_insert(0.0) += w;
        }
        sites
    }

    /// CSV rows `p_over_prec,probability,density`; density is probability
    /// per unit `p / p_rec`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "p_over_prec,probability,density")?;
        for (p, w) in self.p_over_prec.iter().zip(&self.probability) {
            writeln!(out, "{p:.12e},{w:.12e},{:.12e}", w / self.bin_width)?;
        }
        Ok(())
    }

    /// CSV rows `site,center_p_over_prec,probability`, ascending in site.
    pub fn write_orders_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "site,center_p_over_prec,probability")?;
        for (site, w) in self.order_populations() {
            let center = 2.0 * (site as f64 + self.beta);
            writeln!(out, "{site},{center:.12e},{w:.12e}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn forty_period_packet(p_init: f64) -> WavePacket {
        let grid = SpatialGrid::default();
        let sigma_w = 40.0 * grid.grating_period();
        WavePacket::init_gaussian(grid, sigma_w, p_init).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(SpatialGrid::new(1 << 10, 512, 780e-9).is_err()); // under 4 per period
        assert!(SpatialGrid::new(1000, 128, 780e-9).is_err()); // not a power of two
        assert!(SpatialGrid::new(1 << 12, 0, 780e-9).is_err());
        assert!(SpatialGrid::new(4, 1, 780e-9).is_err());
        assert!(SpatialGrid::new(1 << 12, 512, 0.0).is_err());
        let grid = SpatialGrid::new(2048, 512, 780e-9).unwrap();
        assert_eq!(grid.nyquist_p_over_prec(), 4.0);
    }

    #[test]
    fn grid_momentum_mapping() {
        let grid = SpatialGrid::default();
        assert_eq!(grid.signed_freq(0), 0);
        assert_eq!(grid.signed_freq(1), 1);
        assert_eq!(grid.signed_freq(grid.num_points() - 1), -1);
        assert_eq!(grid.signed_freq(grid.num_points() / 2), -(1 << 15));
        // One grating period of frequency advance per 2 p_rec.
        assert_abs_diff_eq!(grid.p_over_prec(512), 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(grid.momentum_bin_width(), 2.0 / 512.0, epsilon = 1e-18);
        assert_abs_diff_eq!(grid.nyquist_p_over_prec(), 128.0, epsilon = 1e-12);
        // x = 0 sits exactly at the center sample.
        assert_eq!(grid.x_at(grid.num_points() / 2), 0.0);
        assert_abs_diff_eq!(grid.length(), 512.0 * 390e-9, epsilon = 1e-18);
    }

    #[test]
    fn grating_phase_is_exactly_periodic() {
        let grid = SpatialGrid::new(1 << 10, 16, 780e-9).unwrap();
        let stride = grid.num_points() / 16;
        for j in 0..stride {
            let a = grid.grating_phase_at(j);
            let b = grid.grating_phase_at(j + stride);
            assert_abs_diff_eq!(a, b, epsilon = 1e-15);
            // Agrees with 2 k_L x evaluated directly, modulo 2 pi.
            let direct = 2.0 * (2.0 * PI / grid.wavelength()) * grid.x_at(j);
            assert_abs_diff_eq!(
                (a - direct).rem_euclid(2.0 * PI).min((direct - a).rem_euclid(2.0 * PI)),
                0.0,
                epsilon = 1e-9
            );
        }
    }

    #[test]
    fn gaussian_packet_is_normalized() {
        let packet = forty_period_packet(0.0);
        assert_abs_diff_eq!(packet.norm(), 1.0, epsilon = 1e-14);
        let dist = packet.momentum_distribution();
        assert_abs_diff_eq!(dist.total(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn momentum_width_matches_fourier_scaling() {
        // A position-space width sigma_w transforms to a momentum-space
        // standard deviation hbar / (sqrt(2) sigma_w).
        let packet = forty_period_packet(0.0);
        let dist = packet.momentum_distribution();
        let mean = dist.momentum_moment(1).unwrap();
        let variance = dist.momentum_moment(2).unwrap() - mean * mean;
        let sigma_w = 40.0 * packet.grid().grating_period();
        let expected = 1.0 / (2.0_f64.sqrt() * sigma_w * 2.0 * PI / 780e-9);
        assert_relative_eq!(variance.sqrt(), expected, max_relative = 0.02);
    }

    #[test]
    fn boosted_packet_lands_on_the_requested_momentum() {
        let packet = forty_period_packet(2.0);
        assert_eq!(packet.beta(), 0.0);
        let dist = packet.momentum_distribution();
        assert_abs_diff_eq!(dist.momentum_moment(1).unwrap(), 2.0, epsilon = 1e-6);
        // Off-bin boost: quasimomentum splits off the fractional part.
        let packet = forty_period_packet(0.3);
        assert_abs_diff_eq!(packet.beta(), 0.15, epsilon = 1e-15);
        let dist = packet.momentum_distribution();
        assert_abs_diff_eq!(dist.momentum_moment(1).unwrap(), 0.3, epsilon = 1e-6);
        // All mass in the site-0 window.
        let orders = dist.order_populations();
        assert_relative_eq!(orders[&0], 1.0, max_relative = 1e-9);
    }

    #[test]
    fn rest_packet_momentum_distribution_is_even() {
        let packet = forty_period_packet(0.0);
        let dist = packet.momentum_distribution();
        let n = dist.probability().len();
        for i in (n / 2 - 40)..(n / 2 + 40) {
            let mirror = n - i;
            assert_abs_diff_eq!(
                dist.probability()[i],
                dist.probability()[mirror],
                epsilon = 1e-13
            );
        }
    }

    #[test]
    fn moment_q2_is_the_kinetic_energy() {
        let packet = forty_period_packet(1.3);
        let dist = packet.momentum_distribution();
        assert_eq!(dist.kinetic_energy(), dist.momentum_moment(2).unwrap());
        assert!(dist.momentum_moment(0).is_err());
        assert!(dist.momentum_moment(5).is_err());
    }

    #[test]
    fn order_windows_tile_without_loss() {
        let packet = forty_period_packet(0.5);
        let dist = packet.momentum_distribution();
        let orders = dist.order_populations();
        let windowed: f64 = orders.values().sum();
        assert_abs_diff_eq!(windowed, dist.total(), epsilon = 1e-13);
    }

    #[test]
    fn sigma_w_bounds_are_enforced() {
        let grid = SpatialGrid::default();
        assert!(WavePacket::init_gaussian(grid, 0.5 * grid.wavelength(), 0.0).is_err());
        assert!(WavePacket::init_gaussian(grid, grid.length() / 4.0, 0.0).is_err());
        assert!(WavePacket::init_gaussian(grid, f64::NAN, 0.0).is_err());
        assert!(WavePacket::init_gaussian(grid, grid.wavelength(), f64::NAN).is_err());
        assert!(WavePacket::init_gaussian(grid, grid.wavelength(), 0.0).is_ok());
        assert!(WavePacket::init_gaussian(grid, grid.length() / 8.0, 0.0).is_ok());
    }

    #[test]
    fn csv_outputs_are_well_formed() {
        let grid = SpatialGrid::new(256, 32, 780e-9).unwrap();
        let packet = WavePacket::init_gaussian(grid, 2.0 * grid.wavelength(), 0.0).unwrap();
        let dist = packet.momentum_distribution();

        let mut csv = Vec::new();
        dist.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "p_over_prec,probability,density");
        assert_eq!(lines.len(), 257);
        for line in &lines[1..] {
            let fields: Vec<f64> = line.split(',').map(|s| s.parse().unwrap()).collect();
            assert_eq!(fields.len(), 3);
            assert_relative_eq!(fields[2] * dist.bin_width(), fields[1], max_relative = 1e-11);
        }

        let mut csv = Vec::new();
        dist.write_orders_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("site,center_p_over_prec,probability\n"));
        assert!(text.lines().count() > 1);
    }

    proptest! {
        #[test]
        fn ladder_windows_tile_the_momentum_axis(
            p in -60.0f64..60.0,
            beta in 0.0f64..1.0,
        ) {
            let site = ladder_site_of(p, beta);
            let center = 2.0 * (site as f64 + beta);
            prop_assert!(p - center >= -1.0 - 1e-12);
            prop_assert!(p - center < 1.0 + 1e-12);
        }
    }
}
