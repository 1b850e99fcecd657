//! Split-operator propagation of a wave packet through a periodic kick
//! sequence.
//!
//! One period is: multiply the kick phase `exp(-i phi_d cos(2 k_L x))` in
//! position space, then advance the free-flight phase
//! `exp(-i omega_rec t (p / p_rec)^2)` in momentum space, then measure. A
//! finite pulse width `tau` is resolved into substeps, each a delta kick of
//! depth `phi_d / substeps` followed by `tau / substeps` of free flight; the
//! remaining `period - tau` is ballistic. Zero-duration free segments are
//! skipped entirely, so ideal delta kicks stay bit-exact pointwise products.
//!
//! Every free segment first checks how much probability sits in the outer
//! half of the momentum band and aborts before the state can alias across
//! the grid's Nyquist edge.

use crate::fft::SpectralTransform;
use crate::units::{KickSchedule, PhysicalConstants};
use crate::wavepacket::{MomentumDistribution, SpatialGrid, WavePacket};
use crate::{Error, Result};
use num_complex::Complex64;
use std::ops::Range;
use std::sync::Arc;

/// Probability allowed in the outer half of the momentum band before a free
/// segment aborts with [`Error::CutoffExceeded`].
const TAIL_MASS_LIMIT: f64 = 1e-8;

/// Which intermediate states [`FloquetStepPlan::run_kicks`] reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordMode {
    /// One record, after the last kick (the initial state when there are no
    /// kicks).
    FinalOnly,
    /// The initial state plus one record after every kick.
    EveryKick,
}

/// Snapshot of the packet after `kicks_applied` full periods.
#[derive(Debug, Clone)]
pub struct KickRecord {
    pub kicks_applied: u32,
    /// Elapsed time [s].
    pub time: f64,
    /// Total probability; drifts from 1 only through round-off.
    pub norm: f64,
    /// Kinetic energy [E_rec].
    pub energy_erec: f64,
    pub distribution: MomentumDistribution,
}

struct PhaseTables {
    /// Position-space kick phase for one substep, `exp(-i (phi_d / s) cos(2 k_L x_j))`.
    kick: Vec<Complex64>,
    /// Momentum-space phase for `tau / s` of free flight, FFT bin order.
    intra: Vec<Complex64>,
    /// Momentum-space phase for the ballistic `period - tau`, FFT bin order.
    free: Vec<Complex64>,
}

/// Precomputed one-period propagator for a fixed grid and kick schedule.
///
/// Clones share the phase tables and FFT plans but own their scratch space,
/// so one plan can drive many packets in parallel.
#[derive(Clone)]
pub struct FloquetStepPlan {
    grid: SpatialGrid,
    schedule: KickSchedule,
    substeps: u32,
    tables: Arc<PhaseTables>,
    /// FFT bins with `|p| > p_nyquist / 2`.
    tail: Range<usize>,
    fft: SpectralTransform,
}

impl FloquetStepPlan {
    pub fn new(
        grid: SpatialGrid,
        constants: &PhysicalConstants,
        schedule: KickSchedule,
        substeps: u32,
    ) -> Result<Self> {
        if substeps == 0 {
            return Err(Error::config("substeps", "must be at least 1"));
        }
        if grid.wavelength() != constants.wavelength {
            return Err(Error::GridMismatch(format!(
                "grid wavelength {:.6e} m differs from the constants' {:.6e} m",
                grid.wavelength(),
                constants.wavelength
            )));
        }
        let n = grid.num_points();
        let omega_rec = constants.omega_rec();
        let sub_phi = schedule.phi_d / substeps as f64;
        let intra_time = schedule.pulse_width_tau / substeps as f64;
        let free_time = schedule.free_time();
        let mut kick = Vec::with_capacity(n);
        for j in 0..n {
            kick.push(Complex64::from_polar(
                1.0,
                -sub_phi * grid.grating_phase_at(j).cos(),
            ));
        }
        let mut intra = Vec::with_capacity(n);
        let mut free = Vec::with_capacity(n);
        for bin in 0..n {
            let u = grid.p_over_prec(grid.signed_freq(bin));
            intra.push(Complex64::from_polar(1.0, -omega_rec * intra_time * u * u));
            free.push(Complex64::from_polar(1.0, -omega_rec * free_time * u * u));
        }
        Ok(Self {
            grid,
            schedule,
            substeps,
            tables: Arc::new(PhaseTables { kick, intra, free }),
            tail: (n / 4 + 1)..(3 * n / 4),
            fft: SpectralTransform::new(n),
        })
    }

    pub fn grid(&self) -> SpatialGrid {
        self.grid
    }

    pub fn schedule(&self) -> &KickSchedule {
        &self.schedule
    }

    pub fn substeps(&self) -> u32 {
        self.substeps
    }

    fn check_grid(&self, psi: &WavePacket) -> Result<()> {
        if psi.grid() != self.grid {
            return Err(Error::GridMismatch(format!(
                "packet grid ({} points, {} periods) does not match the plan's ({}, {})",
                psi.grid().num_points(),
                psi.grid().num_periods(),
                self.grid.num_points(),
                self.grid.num_periods()
            )));
        }
        Ok(())
    }

    /// Free flight for `duration` with the given momentum-space phase table.
    /// Zero duration is the identity, applied without touching the buffer.
    fn propagate_free(
        fft: &mut SpectralTransform,
        tail: &Range<usize>,
        psi: &mut WavePacket,
        table: &[Complex64],
        duration: f64,
    ) -> Result<()> {
        if duration == 0.0 {
            return Ok(());
        }
        let buffer = &mut psi.amplitudes;
        fft.to_momentum(buffer);
        let tail_mass: f64 = buffer[tail.clone()].iter().map(|c| c.norm_sqr()).sum();
        if tail_mass > TAIL_MASS_LIMIT {
            return Err(Error::CutoffExceeded(format!(
                "probability {tail_mass:.3e} beyond half the Nyquist momentum \
                 (limit {TAIL_MASS_LIMIT:.0e}); enlarge num_points or num_periods"
            )));
        }
        for (a, phase) in buffer.iter_mut().zip(table) {
            *a *= phase;
        }
        fft.to_position(buffer);
        Ok(())
    }

    /// One kick: `substeps` repetitions of a sub-kick followed by its share
    /// of the pulse width.
    pub fn apply_kick(&mut self, psi: &mut WavePacket) -> Result<()> {
        self.check_grid(psi)?;
        let tables = Arc::clone(&self.tables);
        let intra_time = self.schedule.pulse_width_tau / self.substeps as f64;
        for _ in 0..self.substeps {
            for (a, phase) in psi.amplitudes.iter_mut().zip(&tables.kick) {
                *a *= phase;
            }
            Self::propagate_free(&mut self.fft, &self.tail, psi, &tables.intra, intra_time)?;
        }
        Ok(())
    }

    /// Ballistic flight for the rest of the period, `period - tau`.
    pub fn apply_free(&mut self, psi: &mut WavePacket) -> Result<()> {
        self.check_grid(psi)?;
        let tables = Arc::clone(&self.tables);
        Self::propagate_free(
            &mut self.fft,
            &self.tail,
            psi,
            &tables.free,
            self.schedule.free_time(),
        )
    }

    fn measure(&mut self, psi: &WavePacket, kicks_applied: u32) -> KickRecord {
        let distribution = psi.momentum_distribution_with(&mut self.fft);
        KickRecord {
            kicks_applied,
            time: kicks_applied as f64 * self.schedule.period_t,
            norm: psi.norm(),
            energy_erec: distribution.kinetic_energy(),
            distribution,
        }
    }

    /// Drive the packet through the schedule's kicks, measuring after the
    /// free flight of each period per `mode`.
    pub fn run_kicks(&mut self, psi: &mut WavePacket, mode: RecordMode) -> Result<Vec<KickRecord>> {
        self.check_grid(psi)?;
        let num_kicks = self.schedule.num_kicks;
        let mut records = Vec::new();
        if mode == RecordMode::EveryKick || num_kicks == 0 {
            records.push(self.measure(psi, 0));
        }
        for k in 1..=num_kicks {
            self.apply_kick(psi)?;
            self.apply_free(psi)?;
            if mode == RecordMode::EveryKick || k == num_kicks {
                records.push(self.measure(psi, k));
            }
        }
        Ok(records)
    }
}
