//! Ensemble averaging over initial momenta, per-order Gaussian fits of the
//! momentum distribution, and one-dimensional parameter scans.
//!
//! Everything here reduces results in a fixed sequential order after the
//! parallel map, so a scan's output is byte-identical no matter how many
//! threads run it.

use crate::evolution::{FloquetStepPlan, RecordMode};
use crate::units::{momentum_to_ladder, KickSchedule, PhysicalConstants};
use crate::wavepacket::{ladder_site_of, MomentumDistribution, SpatialGrid, WavePacket};
use crate::{Error, Result};
use rayon::prelude::*;
use serde::Serialize;
use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::io::Write;

/// A Gaussian ensemble of initial momenta, sampled deterministically on a
/// `±3 sigma` grid so repeated runs average the same members.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleSpec {
    /// Mean initial momentum [p_rec].
    pub center_momentum: f64,
    /// Momentum standard deviation [p_rec]; zero means a single pure packet.
    pub sigma_momentum: f64,
    /// Sample count across the `±3 sigma` window; odd so the center is a
    /// member. Must be 1 when `sigma_momentum` is zero.
    pub num_samples: u32,
}

impl Default for EnsembleSpec {
    /// A single packet at rest.
    fn default() -> Self {
        Self {
            center_momentum: 0.0,
            sigma_momentum: 0.0,
            num_samples: 1,
        }
    }
}

impl EnsembleSpec {
    pub fn new(center_momentum: f64, sigma_momentum: f64, num_samples: u32) -> Result<Self> {
        if !center_momentum.is_finite() {
            return Err(Error::config("center_momentum", "must be finite"));
        }
        if !(sigma_momentum.is_finite() && sigma_momentum >= 0.0) {
            return Err(Error::config(
                "sigma_momentum",
                "must be finite and non-negative",
            ));
        }
        if sigma_momentum == 0.0 {
            if num_samples != 1 {
                return Err(Error::config(
                    "num_samples",
                    "must be 1 when sigma_momentum is zero",
                ));
            }
        } else if num_samples < 9 || num_samples % 2 == 0 {
            return Err(Error::config(
                "num_samples",
                "must be an odd number of at least 9",
            ));
        }
        Ok(Self {
            center_momentum,
            sigma_momentum,
            num_samples,
        })
    }

    /// One pure packet at `center_momentum`.
    pub fn single(center_momentum: f64) -> Result<Self> {
        Self::new(center_momentum, 0.0, 1)
    }

    /// `(momentum [p_rec], weight)` members; weights are the normalized
    /// Gaussian evaluated on the sample grid.
    pub fn samples(&self) -> Vec<(f64, f64)> {
        if self.sigma_momentum == 0.0 {
            return vec![(self.center_momentum, 1.0)];
        }
        let n = self.num_samples as usize;
        let mut members = Vec::with_capacity(n);
        let mut total = 0.0;
        for i in 0..n {
            let offset = self.sigma_momentum * (-3.0 + 6.0 * i as f64 / (n - 1) as f64);
            let weight = (-0.5 * (offset / self.sigma_momentum).powi(2)).exp();
            members.push((self.center_momentum + offset, weight));
            total += weight;
        }
        for (_, w) in &mut members {
            *w /= total;
        }
        members
    }
}

/// Weighted average over an ensemble run.
#[derive(Debug, Clone)]
pub struct EnsembleResult {
    /// Weighted mean of the members' momentum distributions; its ladder
    /// windows sit at the center member's quasimomentum.
    pub distribution: MomentumDistribution,
    /// Weighted mean kinetic energy [E_rec]; equals the kinetic energy of
    /// `distribution` because the observable is linear in the populations.
    pub energy_erec: f64,
    /// Weighted standard deviation of the member energies [E_rec].
    pub uncertainty_erec: f64,
    /// Initial momentum of each member [p_rec], in sample order.
    pub member_momenta: Vec<f64>,
    /// Final kinetic energy of each member [E_rec], in sample order.
    pub member_energies: Vec<f64>,
}

/// Run every ensemble member through the plan's kick sequence and average.
///
/// Members run in parallel; the averages are accumulated in sample order, so
/// results do not depend on the thread count.
pub fn ensemble_average(
    ensemble: &EnsembleSpec,
    plan: &FloquetStepPlan,
    sigma_w: f64,
) -> Result<EnsembleResult> {
    let samples = ensemble.samples();
    let grid = plan.grid();
    let runs: Vec<(f64, MomentumDistribution)> = samples
        .par_iter()
        .map(|&(momentum, _)| {
            let mut plan = plan.clone();
            let mut psi = WavePacket::init_gaussian(grid, sigma_w, momentum)?;
            let records = psi_run(&mut plan, &mut psi)?;
            let record = records.into_iter().last().expect("one record per run");
            Ok((record.energy_erec, record.distribution))
        })
        .collect::<Result<_>>()?;

    let beta = momentum_to_ladder(ensemble.center_momentum).1;
    let n = grid.num_points();
    let mut probability = vec![0.0; n];
    let mut energy = 0.0;
    let mut member_energies = Vec::with_capacity(runs.len());
    for ((_, weight), (member_energy, dist)) in samples.iter().zip(&runs) {
        for (acc, p) in probability.iter_mut().zip(&dist.probability) {
            *acc += weight * p;
        }
        energy += weight * member_energy;
        member_energies.push(*member_energy);
    }
    let uncertainty = samples
        .iter()
        .zip(&member_energies)
        .map(|((_, w), e)| w * (e - energy).powi(2))
        .sum::<f64>()
        .sqrt();
    let distribution = MomentumDistribution {
        p_over_prec: runs[0].1.p_over_prec.clone(),
        probability,
        beta,
        bin_width: grid.momentum_bin_width(),
    };
    Ok(EnsembleResult {
        distribution,
        energy_erec: energy,
        uncertainty_erec: uncertainty,
        member_momenta: samples.iter().map(|&(p, _)| p).collect(),
        member_energies,
    })
}

fn psi_run(
    plan: &mut FloquetStepPlan,
    psi: &mut WavePacket,
) -> Result<Vec<crate::evolution::KickRecord>> {
    plan.run_kicks(psi, RecordMode::FinalOnly)
}

/// One ladder order extracted from a momentum distribution.
#[derive(Debug, Clone, Serialize)]
pub struct OrderFit {
    /// Ladder site index.
    pub site: i64,
    /// Window center `2 (site + beta)` [p_rec].
    pub center_p_over_prec: f64,
    /// Probability in this order.
    pub weight: f64,
    /// Fitted Gaussian width [p_rec].
    pub sigma_p_over_prec: f64,
    /// Fitted peak density [probability per p_rec].
    pub amplitude_density: f64,
    /// True when the Gaussian fit failed and the window's direct second
    /// moment was used instead.
    pub fallback: bool,
}

/// Per-order decomposition of a momentum distribution.
#[derive(Debug, Clone, Serialize)]
pub struct FitReport {
    pub orders: Vec<OrderFit>,
    /// Kinetic energy reassembled as `sum_j w_j (c_j^2 + s_j^2)` [E_rec].
    pub energy_erec: f64,
    /// Sum of the order weights; close to 1 when the threshold cut little.
    pub total_weight: f64,
}

/// Fraction of the total probability an order must hold to be fitted.
const ORDER_MASS_THRESHOLD: f64 = 0.002;

/// Decompose a distribution into Gaussians pinned to the ladder sites
/// `2 (j + beta) p_rec`, fitting amplitude and width per site.
///
/// Orders holding less than 0.2% of the probability are skipped. When the
/// per-site fit does not converge the order falls back to its windowed
/// moments and is flagged.
pub fn fit_orders(dist: &MomentumDistribution) -> FitReport {
    let threshold = ORDER_MASS_THRESHOLD * dist.total();
    let masses = dist.order_populations();
    let selected: Vec<i64> = masses
        .iter()
        .filter(|(_, &m)| m > threshold)
        .map(|(&site, _)| site)
        .collect();

    // One pass over the bins, splitting (offset from center, density) pairs
    // per selected site with the same half-open windows as the masses.
    let mut windows: BTreeMap<i64, Vec<(f64, f64)>> =
        selected.iter().map(|&s| (s, Vec::new())).collect();
    for (p, w) in dist.p_over_prec.iter().zip(&dist.probability) {
        let site = ladder_site_of(*p, dist.beta);
        if let Some(samples) = windows.get_mut(&site) {
            let center = 2.0 * (site as f64 + dist.beta);
            samples.push((p - center, w / dist.bin_width));
        }
    }

    let mut orders = Vec::with_capacity(selected.len());
    let mut energy = 0.0;
    let mut total_weight = 0.0;
    for (site, samples) in windows {
        let center = 2.0 * (site as f64 + dist.beta);
        let mass = masses[&site];
        let (weight, sigma, amplitude, fallback) =
            match gaussian_fit_fixed_center(&samples) {
                Some((a, s)) => (a * s * TAU.sqrt(), s, a, false),
                None => {
                    let m2: f64 = samples
                        .iter()
                        .map(|(d, rho)| rho * dist.bin_width * d * d)
                        .sum();
                    (mass, (m2 / mass).sqrt(), 0.0, true)
                }
            };
        energy += weight * (center * center + sigma * sigma);
        total_weight += weight;
        orders.push(OrderFit {
            site,
            center_p_over_prec: center,
            weight,
            sigma_p_over_prec: sigma,
            amplitude_density: amplitude,
            fallback,
        });
    }
    FitReport {
        orders,
        energy_erec: energy,
        total_weight,
    }
}

/// Fit `rho ~ A exp(-d^2 / (2 s^2))` to `(d, rho)` samples with the center
/// pinned at `d = 0`. Log-linear least squares seeds a damped Gauss-Newton
/// refinement. Returns `None` when the data cannot seed or sustain the fit.
fn gaussian_fit_fixed_center(samples: &[(f64, f64)]) -> Option<(f64, f64)> {
    let peak = samples.iter().fold(0.0_f64, |m, &(_, rho)| m.max(rho));
    if peak <= 0.0 {
        return None;
    }
    // Seed from the bins that carry real signal: ln rho = ln A - d^2 / (2 s^2).
    let usable: Vec<(f64, f64)> = samples
        .iter()
        .filter(|&&(_, rho)| rho > 1e-3 * peak)
        .map(|&(d, rho)| (d * d, rho.ln()))
        .collect();
    if usable.len() < 3 {
        return None;
    }
    let n = usable.len() as f64;
    let sx: f64 = usable.iter().map(|(x, _)| x).sum();
    let sy: f64 = usable.iter().map(|(_, y)| y).sum();
    let sxx: f64 = usable.iter().map(|(x, _)| x * x).sum();
    let sxy: f64 = usable.iter().map(|(x, y)| x * y).sum();
    let det = n * sxx - sx * sx;
    if det.abs() < 1e-300 {
        return None;
    }
    let slope = (n * sxy - sx * sy) / det;
    let intercept = (sy - slope * sx) / n;
    if slope >= 0.0 {
        return None;
    }
    let mut a = intercept.exp();
    let mut s = (-0.5 / slope).sqrt();

    let sse = |a: f64, s: f64| -> f64 {
        samples
            .iter()
            .map(|&(d, rho)| {
                let r = a * (-0.5 * (d / s).powi(2)).exp() - rho;
                r * r
            })
            .sum()
    };
    let mut current = sse(a, s);
    for _ in 0..50 {
        // Normal equations for the two free parameters.
        let (mut jaa, mut jas, mut jss, mut ga, mut gs) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for &(d, rho) in samples {
            let e = (-0.5 * (d / s).powi(2)).exp();
            let r = a * e - rho;
            let ja = e;
            let js = a * e * d * d / (s * s * s);
            jaa += ja * ja;
            jas += ja * js;
            jss += js * js;
            ga += ja * r;
            gs += js * r;
        }
        let det = jaa * jss - jas * jas;
        if det.abs() < 1e-300 {
            break;
        }
        let mut da = -(jss * ga - jas * gs) / det;
        let mut ds = -(jaa * gs - jas * ga) / det;
        // Damp until the step actually reduces the residual.
        let mut improved = false;
        for _ in 0..8 {
            let (na, ns) = (a + da, s + ds);
            if na > 0.0 && ns > 0.0 {
                let next = sse(na, ns);
                if next <= current {
                    a = na;
                    s = ns;
                    current = next;
                    improved = true;
                    break;
                }
            }
            da *= 0.5;
            ds *= 0.5;
        }
        if !improved {
            break;
        }
        if da.abs() < 1e-12 * a && ds.abs() < 1e-12 * s {
            break;
        }
    }
    if a.is_finite() && s.is_finite() && a > 0.0 && s > 0.0 {
        Some((a, s))
    } else {
        None
    }
}

/// Which parameter a scan varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
pub enum ScanAxis {
    /// Kick period; values in seconds, reported in microseconds.
    #[serde(rename = "period_T")]
    PeriodT,
    /// Number of kicks; values must be non-negative integers.
    #[serde(rename = "num_kicks")]
    NumKicks,
    /// Quasimomentum in `[0, 1)`; the packet starts at `2 beta` plus the
    /// ensemble's center momentum.
    #[serde(rename = "beta")]
    Beta,
    /// Ensemble center momentum [p_rec].
    #[serde(rename = "center_momentum")]
    CenterMomentum,
}

impl ScanAxis {
    pub fn label(&self) -> &'static str {
        match self {
            ScanAxis::PeriodT => "period_T",
            ScanAxis::NumKicks => "num_kicks",
            ScanAxis::Beta => "beta",
            ScanAxis::CenterMomentum => "center_momentum",
        }
    }
}

/// How a scan condenses a distribution into one energy number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnergyEstimator {
    /// Second moment of the averaged distribution.
    DirectVariance,
    /// Energy reassembled from per-order Gaussian fits.
    GaussianFit,
}

/// Everything a scan needs besides the axis values.
#[derive(Debug, Clone)]
pub struct ScanSetup {
    pub grid: SpatialGrid,
    pub constants: PhysicalConstants,
    pub base_schedule: KickSchedule,
    pub substeps: u32,
    pub ensemble: EnsembleSpec,
    /// Initial packet width [m].
    pub sigma_w: f64,
    pub axis: ScanAxis,
    pub estimator: EnergyEstimator,
}

/// One scan point; failures carry their reason instead of aborting the scan.
#[derive(Debug, Clone, Serialize)]
pub struct ScanPoint {
    /// Axis value in native units (seconds for the period axis).
    pub value: f64,
    pub energy_erec: Option<f64>,
    /// Ensemble spread; absent for single-member ensembles.
    pub uncertainty_erec: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanResult {
    pub axis: ScanAxis,
    pub estimator: EnergyEstimator,
    pub points: Vec<ScanPoint>,
}

/// Schedule and ensemble for one axis value.
fn scan_point_inputs(setup: &ScanSetup, value: f64) -> Result<(KickSchedule, EnsembleSpec)> {
    let base = setup.base_schedule;
    let ens = setup.ensemble;
    match setup.axis {
        ScanAxis::PeriodT => Ok((
            KickSchedule::new(
                base.phi_d,
                value,
                base.num_kicks,
                base.beta,
                base.pulse_width_tau,
            )?,
            ens,
        )),
        ScanAxis::NumKicks => {
            let rounded = value.round();
            if !value.is_finite() || (value - rounded).abs() > 1e-9 || rounded < 0.0 {
                return Err(Error::config(
                    "num_kicks",
                    format!("scan value {value} is not a non-negative integer"),
                ));
            }
            Ok((
                KickSchedule::new(
                    base.phi_d,
                    base.period_t,
                    rounded as u32,
                    base.beta,
                    base.pulse_width_tau,
                )?,
                ens,
            ))
        }
        ScanAxis::Beta => {
            let schedule = KickSchedule::new(
                base.phi_d,
                base.period_t,
                base.num_kicks,
                value,
                base.pulse_width_tau,
            )?;
            let ensemble = EnsembleSpec::new(
                2.0 * value + ens.center_momentum,
                ens.sigma_momentum,
                ens.num_samples,
            )?;
            Ok((schedule, ensemble))
        }
        ScanAxis::CenterMomentum => {
            let (_, beta) = momentum_to_ladder(value);
            let schedule = KickSchedule::new(
                base.phi_d,
                base.period_t,
                base.num_kicks,
                beta,
                base.pulse_width_tau,
            )?;
            let ensemble = EnsembleSpec::new(value, ens.sigma_momentum, ens.num_samples)?;
            Ok((schedule, ensemble))
        }
    }
}

fn run_scan_point(setup: &ScanSetup, value: f64) -> Result<(f64, f64)> {
    let (schedule, ensemble) = scan_point_inputs(setup, value)?;
    let plan = FloquetStepPlan::new(setup.grid, &setup.constants, schedule, setup.substeps)?;
    let result = ensemble_average(&ensemble, &plan, setup.sigma_w)?;
    let energy = match setup.estimator {
        EnergyEstimator::DirectVariance => result.energy_erec,
        EnergyEstimator::GaussianFit => fit_orders(&result.distribution).energy_erec,
    };
    Ok((energy, result.uncertainty_erec))
}

/// Sweep the axis over `values`, one ensemble run per value.
///
/// Points run in parallel and failures are recorded in place, so one bad
/// value does not cost the rest of the sweep.
pub fn energy_scan(setup: &ScanSetup, values: &[f64]) -> Result<ScanResult> {
    if values.is_empty() {
        return Err(Error::config("values", "scan needs at least one value"));
    }
    let points: Vec<ScanPoint> = values
        .par_iter()
        .map(|&value| match run_scan_point(setup, value) {
            Ok((energy, uncertainty)) => ScanPoint {
                value,
                energy_erec: Some(energy),
                uncertainty_erec: (setup.ensemble.num_samples > 1).then_some(uncertainty),
                error: None,
            },
            Err(err) => ScanPoint {
                value,
                energy_erec: None,
                uncertainty_erec: None,
                error: Some(err.to_string()),
            },
        })
        .collect();
    Ok(ScanResult {
        axis: setup.axis,
        estimator: setup.estimator,
        points,
    })
}

impl ScanResult {
    /// CSV rows `axis,value,energy_Erec,uncertainty_Erec`. Period values are
    /// reported in microseconds, kick counts as integers; failed points get
    /// `nan` energies and an empty uncertainty field.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "axis,value,energy_Erec,uncertainty_Erec")?;
        for point in &self.points {
            let label = self.axis.label();
            let rounded = point.value.round();
            match self.axis {
                ScanAxis::PeriodT => write!(out, "{label},{:.12e}", point.value * 1e6)?,
                // Valid kick counts are integers; a rejected fractional
                // value keeps its raw form.
                ScanAxis::NumKicks if (point.value - rounded).abs() < 1e-9 => {
                    write!(out, "{label},{}", rounded as i64)?
                }
                _ => write!(out, "{label},{:.12e}", point.value)?,
            }
            match point.energy_erec {
                Some(energy) => write!(out, ",{energy:.12e}")?,
                None => write!(out, ",nan")?,
            }
            match point.uncertainty_erec {
                Some(u) => writeln!(out, ",{u:.12e}")?,
                None => writeln!(out, ",")?,
            }
        }
        Ok(())
    }
}
