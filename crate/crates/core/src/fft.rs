//! Thin unitary wrapper around the FFT pair used by the propagator.
//!
//! Convention: `to_momentum` maps a plane wave `exp(-i k x)` onto the bin
//! carrying momentum `+hbar k`, which on the index grid is the inverse FFT
//! direction. Both directions carry `1/sqrt(n)` so each is unitary and the
//! round trip is the identity.

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

pub struct SpectralTransform {
    to_momentum: Arc<dyn Fft<f64>>,
    to_position: Arc<dyn Fft<f64>>,
    scale: f64,
    scratch: Vec<Complex64>,
}

impl Clone for SpectralTransform {
    /// Shares the immutable FFT plans; the scratch buffer is per instance so
    /// clones can run on separate threads.
    fn clone(&self) -> Self {
        Self {
            to_momentum: Arc::clone(&self.to_momentum),
            to_position: Arc::clone(&self.to_position),
            scale: self.scale,
            scratch: vec![Complex64::new(0.0, 0.0); self.scratch.len()],
        }
    }
}

impl SpectralTransform {
    pub fn new(num_points: usize) -> Self {
        let mut planner = FftPlanner::new();
        let to_momentum = planner.plan_fft_inverse(num_points);
        let to_position = planner.plan_fft_forward(num_points);
        let scratch_len = to_momentum
            .get_inplace_scratch_len()
            .max(to_position.get_inplace_scratch_len());
        Self {
            to_momentum,
            to_position,
            scale: 1.0 / (num_points as f64).sqrt(),
            scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
        }
    }

    pub fn len(&self) -> usize {
        self.to_momentum.len()
    }

    pub fn to_momentum(&mut self, buffer: &mut [Complex64]) {
        self.to_momentum
            .process_with_scratch(buffer, &mut self.scratch);
        for value in buffer.iter_mut() {
            *value *= self.scale;
        }
    }

    pub fn to_position(&mut self, buffer: &mut [Complex64]) {
        self.to_position
            .process_with_scratch(buffer, &mut self.scratch);
        for value in buffer.iter_mut() {
            *value *= self.scale;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    #[test]
    fn round_trip_is_identity_and_unitary() {
        let n = 256;
        let mut t = SpectralTransform::new(n);
        let original: Vec<Complex64> = (0..n)
            .map(|j| Complex64::new((j as f64 * 0.1).sin(), (j as f64 * 0.07).cos()))
            .collect();
        let norm: f64 = original.iter().map(|c| c.norm_sqr()).sum();
        let mut buffer = original.clone();
        t.to_momentum(&mut buffer);
        let norm_after: f64 = buffer.iter().map(|c| c.norm_sqr()).sum();
        assert!((norm - norm_after).abs() < 1e-9 * norm);
        t.to_position(&mut buffer);
        for (a, b) in original.iter().zip(&buffer) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn negative_spatial_phase_lands_on_positive_frequency_bin() {
        // exp(-i 2 pi m j / n) must concentrate on bin m under to_momentum.
        let n = 64;
        let m = 5;
        let mut t = SpectralTransform::new(n);
        let mut buffer: Vec<Complex64> = (0..n)
            .map(|j| Complex64::from_polar(1.0, -TAU * m as f64 * j as f64 / n as f64))
            .collect();
        t.to_momentum(&mut buffer);
        assert!((buffer[m].norm() - (n as f64).sqrt()).abs() < 1e-9);
        let off_bin: f64 = buffer
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != m)
            .map(|(_, c)| c.norm_sqr())
            .sum();
        assert!(off_bin < 1e-18 * n as f64);
    }
}
