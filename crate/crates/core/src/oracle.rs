//! Closed-form momentum-ladder amplitudes for kick sequences whose period is
//! an integer multiple of half the Talbot time.
//!
//! In that regime the free-flight phases between kicks rephase so that `n`
//! pulses of depth `phi_d` act like a single pulse of an effective depth, and
//! the ladder amplitudes reduce to Bessel functions of that depth. This module
//! evaluates those amplitudes and their momentum moments without touching the
//! grid propagator, so the two routes stay independently checkable.
//!
//! Ladder conventions: site `j` carries momentum `(2 j + 2 beta) p_rec`, i.e.
//! `j + beta` in two-photon units.

use crate::units::PhysicalConstants;
use crate::{Error, Result};
use num_complex::Complex64;
use std::f64::consts::PI;

/// Largest Bessel order the recurrence evaluator accepts.
pub const MAX_BESSEL_ORDER: i32 = 200;
/// Largest |argument| the recurrence evaluator accepts.
pub const MAX_BESSEL_ARGUMENT: f64 = 100.0;

/// Bessel function of the first kind, `J_order(x)`, by downward (Miller)
/// recurrence normalized with `J_0 + 2 J_2 + 2 J_4 + ... = 1`.
///
/// Valid for `|order| <= 200` and `|x| <= 100`; absolute error below 1e-12
/// across that window.
pub fn bessel_j(order: i32, x: f64) -> Result<f64> {
    if order.abs() > MAX_BESSEL_ORDER {
        return Err(Error::domain(format!(
            "bessel_j: order {order} outside supported window |order| <= {MAX_BESSEL_ORDER}"
        )));
    }
    if !x.is_finite() || x.abs() > MAX_BESSEL_ARGUMENT {
        return Err(Error::domain(format!(
            "bessel_j: argument {x} outside supported window |x| <= {MAX_BESSEL_ARGUMENT}"
        )));
    }

    // Reduce to n >= 0, x >= 0 through the reflection symmetries
    // J_{-n}(x) = (-1)^n J_n(x) and J_n(-x) = (-1)^n J_n(x).
    let n = order.unsigned_abs() as i64;
    let mut sign = 1.0;
    if n % 2 == 1 {
        if order < 0 {
            sign = -sign;
        }
        if x < 0.0 {
            sign = -sign;
        }
    }
    let x = x.abs();

    if x < 1e-8 {
        // Leading series terms; the truncation error is far below 1e-12 here
        // and the recurrence ratio 2k/x would overflow.
        let value = match n {
            0 => 1.0 - 0.25 * x * x,
            1 => 0.5 * x,
            _ => 0.0,
        };
        return Ok(sign * value);
    }

    // Start the recurrence well above both the order and the turning point
    // j ~ x, where J_j(x) has decayed enough that the seed error is dead.
    let top = (n as f64).max(x);
    let mut k = n.max(x as i64) + (16.0 * top.sqrt()) as i64 + 24;
    if k % 2 == 1 {
        k += 1;
    }

    let mut above = 0.0_f64; // J_{k+1}, unnormalized
    let mut curr = 1e-30_f64; // J_k, unnormalized
    let mut target = 0.0_f64;
    let mut norm = 0.0_f64;
    loop {
        if k == n {
            target = curr;
        }
        if k == 0 {
            norm += curr;
            break;
        }
        if k % 2 == 0 {
            norm += 2.0 * curr;
        }
        let below = (2.0 * k as f64 / x) * curr - above;
        above = curr;
        curr = below;
        k -= 1;
        if curr.abs() > 1e250 {
            curr *= 1e-250;
            above *= 1e-250;
            norm *= 1e-250;
            target *= 1e-250;
        }
    }
    Ok(sign * target / norm)
}

/// Parameters of a resonant kick sequence: pulses of depth `phi_d` separated
/// by `l` half-Talbot times, acting on a ladder at quasimomentum `beta`,
/// observed after `n` kicks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResonanceContext {
    /// Period in half-Talbot times (`l >= 1`).
    pub l: u32,
    /// Quasimomentum in `[0, 1)`, units of `2 p_rec`.
    pub beta: f64,
    /// Phase depth of a single kick.
    pub phi_d: f64,
    /// Number of kicks.
    pub n: u32,
}

impl ResonanceContext {
    pub fn new(l: u32, beta: f64, phi_d: f64, n: u32) -> Result<Self> {
        if l < 1 {
            return Err(Error::config("l", "must be a positive integer"));
        }
        if !(beta.is_finite() && (0.0..1.0).contains(&beta)) {
            return Err(Error::config("beta", "must lie in [0, 1)"));
        }
        if !(phi_d.is_finite() && phi_d >= 0.0) {
            return Err(Error::config("phi_d", "must be finite and non-negative"));
        }
        Ok(Self { l, beta, phi_d, n })
    }

    /// Talbot phase accumulated per kick interval,
    /// `Upsilon = pi (1 + 2 beta) l / 2`.
    pub fn upsilon(&self) -> f64 {
        0.5 * PI * (1.0 + 2.0 * self.beta) * self.l as f64
    }
}

/// Depth of the single kick equivalent to the context's `n` kicks:
/// `phi_d * sin(n Upsilon) / sin(Upsilon)`.
///
/// When `Upsilon` is a multiple of pi every interval rephases and the ratio
/// takes its analytic limit `n * cos(Upsilon)^(n-1)`, i.e. the kicks add up
/// to `±n * phi_d`.
pub fn effective_argument(ctx: &ResonanceContext) -> f64 {
    if ctx.n == 0 {
        return 0.0;
    }
    let n = ctx.n as f64;
    // Upsilon = pi * r; integer r triggers the resonant limit.
    let r = 0.5 * (1.0 + 2.0 * ctx.beta) * ctx.l as f64;
    let m = r.round();
    if (r - m).abs() < 1e-9 {
        let cos_upsilon = if (m as i64) % 2 == 0 { 1.0 } else { -1.0 };
        let power = if (ctx.n - 1) % 2 == 0 { 1.0 } else { cos_upsilon };
        return ctx.phi_d * n * power;
    }
    let upsilon = ctx.upsilon();
    ctx.phi_d * (n * upsilon).sin() / upsilon.sin()
}

/// Complex amplitudes on the two-photon momentum ladder after the context's
/// kick sequence. Populations are `J_j(effective argument)^2`; the phases
/// carry the per-site Talbot winding and a global quasimomentum phase.
#[derive(Debug, Clone)]
pub struct LadderAmplitudes {
    min_order: i64,
    amplitudes: Vec<Complex64>,
    /// Quasimomentum the ladder sits at.
    pub beta: f64,
}

impl LadderAmplitudes {
    /// Lowest and highest ladder site held in the window.
    pub fn order_range(&self) -> std::ops::RangeInclusive<i64> {
        self.min_order..=(self.min_order + self.amplitudes.len() as i64 - 1)
    }

    /// Amplitude at ladder site `j`; zero outside the truncation window.
    pub fn amplitude(&self, j: i64) -> Complex64 {
        let idx = j - self.min_order;
        if idx < 0 || idx >= self.amplitudes.len() as i64 {
            Complex64::new(0.0, 0.0)
        } else {
            self.amplitudes[idx as usize]
        }
    }

    /// Population `|c_j|^2` at ladder site `j`.
    pub fn population(&self, j: i64) -> f64 {
        self.amplitude(j).norm_sqr()
    }

    /// All `(site, population)` pairs in the window, in ascending site order.
    pub fn populations(&self) -> Vec<(i64, f64)> {
        self.amplitudes
            .iter()
            .enumerate()
            .map(|(i, c)| (self.min_order + i as i64, c.norm_sqr()))
            .collect()
    }

    /// Sum of all populations; unity up to the truncation tail (< 1e-14).
    pub fn total_population(&self) -> f64 {
        self.amplitudes.iter().map(|c| c.norm_sqr()).sum()
    }

    /// Second momentum moment `sum_j |c_j|^2 (j + beta)^2` in two-photon
    /// units.
    pub fn second_moment(&self) -> f64 {
        self.amplitudes
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let j = (self.min_order + i as i64) as f64;
                c.norm_sqr() * (j + self.beta) * (j + self.beta)
            })
            .sum()
    }
}

/// Truncation half-width: sites beyond the argument plus this margin hold
/// less than 1e-14 of the population combined.
fn ladder_half_width(arg: f64) -> i64 {
    let a = arg.abs();
    ((a + 20.0 + 10.0 * a.sqrt()).ceil() as i64).min(MAX_BESSEL_ORDER as i64)
}

/// Ladder amplitudes after the context's kick sequence.
///
/// `c_j = J_j(arg) * i^j * exp(-i j (n + 1) Upsilon) * exp(-i n pi beta^2 l)`
/// with `arg` from [`effective_argument`]. Fails when the effective argument
/// leaves the supported Bessel window (very deep kicks at exact resonance).
pub fn ladder_amplitudes(ctx: &ResonanceContext) -> Result<LadderAmplitudes> {
    let arg = effective_argument(ctx);
    if arg.abs() > MAX_BESSEL_ARGUMENT {
        return Err(Error::domain(format!(
            "ladder_amplitudes: effective argument {arg:.2} exceeds the supported window \
             (|n_eff * phi_d| <= {MAX_BESSEL_ARGUMENT})"
        )));
    }
    let half_width = ladder_half_width(arg);
    let upsilon = ctx.upsilon();
    let n = ctx.n as f64;
    let global_phase = -n * PI * ctx.beta * ctx.beta * ctx.l as f64;
    let mut amplitudes = Vec::with_capacity((2 * half_width + 1) as usize);
    for j in -half_width..=half_width {
        let jf = j as f64;
        let phase = 0.5 * PI * jf - jf * (n + 1.0) * upsilon + global_phase;
        let magnitude = bessel_j(j as i32, arg)?;
        amplitudes.push(Complex64::from_polar(magnitude, phase));
    }
    Ok(LadderAmplitudes {
        min_order: -half_width,
        amplitudes,
        beta: ctx.beta,
    })
}

/// Momentum moment `<(p / 2 p_rec)^q>` of the ladder after the context's kick
/// sequence, as a direct Bessel sum (independent of [`ladder_amplitudes`]):
/// `sum_j J_{j-k}(arg)^2 (j + beta)^q` with `k = ladder_offset`, the site the
/// atoms started on.
///
/// Supports `q` in `1..=4`. For `q = 2` this is the kinetic energy in
/// two-photon units; multiply by 4 for photon-recoil units `E_rec`.
pub fn momentum_moment(ctx: &ResonanceContext, q: u32, ladder_offset: i64) -> Result<f64> {
    if !(1..=4).contains(&q) {
        return Err(Error::domain(format!(
            "momentum_moment: q = {q} outside supported range 1..=4"
        )));
    }
    let arg = effective_argument(ctx);
    if arg.abs() > MAX_BESSEL_ARGUMENT {
        return Err(Error::domain(format!(
            "momentum_moment: effective argument {arg:.2} exceeds the supported window"
        )));
    }
    let half_width = ladder_half_width(arg);
    let mut sum = 0.0;
    for j in (ladder_offset - half_width)..=(ladder_offset + half_width) {
        let weight = bessel_j((j - ladder_offset) as i32, arg)?.powi(2);
        sum += weight * (j as f64 + ctx.beta).powi(q as i32);
    }
    Ok(sum)
}

/// Kinetic energy in photon-recoil units for a second moment in two-photon
/// units: `E / E_rec = (p / p_rec)^2 = 4 (p / 2 p_rec)^2`.
pub fn two_photon_m2_to_erec(m2: f64) -> f64 {
    4.0 * m2
}

/// Predicted kinetic energy in `E_rec` after the context's kick sequence,
/// initial site `j = 0`.
pub fn energy_erec(ctx: &ResonanceContext) -> Result<f64> {
    Ok(two_photon_m2_to_erec(momentum_moment(ctx, 2, 0)?))
}

/// Ladder second moment (two-photon units) for each quasimomentum in
/// `beta_grid`, holding `l`, `n` and `phi_d` fixed. Evaluated through
/// [`ladder_amplitudes`], so it cross-checks [`momentum_moment`].
pub fn second_moment_vs_beta(l: u32, n: u32, phi_d: f64, beta_grid: &[f64]) -> Result<Vec<f64>> {
    beta_grid
        .iter()
        .map(|&beta| {
            let ctx = ResonanceContext::new(l, beta, phi_d, n)?;
            Ok(ladder_amplitudes(&ctx)?.second_moment())
        })
        .collect()
}

/// A rephasing time `numerator / denominator` of the Talbot time, in reduced
/// form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FractionalTime {
    pub numerator: u32,
    pub denominator: u32,
    /// Absolute time [s].
    pub time: f64,
}

fn gcd(mut a: u32, mut b: u32) -> u32 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// All reduced fractions of the Talbot time up to `max_denominator`, in
/// ascending time order, ending at the full Talbot time itself.
pub fn fractional_times(
    max_denominator: u32,
    constants: &PhysicalConstants,
) -> Result<Vec<FractionalTime>> {
    if max_denominator < 2 {
        return Err(Error::domain(
            "fractional_times: max_denominator must be at least 2",
        ));
    }
    let talbot = constants.talbot_time();
    let mut times = Vec::new();
    for denominator in 1..=max_denominator {
        for numerator in 1..=denominator {
            if gcd(numerator, denominator) == 1 {
                times.push(FractionalTime {
                    numerator,
                    denominator,
                    time: numerator as f64 / denominator as f64 * talbot,
                });
            }
        }
    }
    times.sort_by(|a, b| a.time.partial_cmp(&b.time).unwrap());
    Ok(times)
}
