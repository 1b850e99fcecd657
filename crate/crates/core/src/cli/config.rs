//! Config file schema, token parsing, and flag/file/default resolution.
//!
//! Precedence: built-in defaults, then the TOML config file, then command
//! line flags. Time-valued fields accept microseconds (bare numbers or a
//! `us` suffix) or Talbot-time tokens (`TT`, `TT/2`, `3TT/2`, `0.25TT`);
//! the dimensionless period accepts `pi` multiples (`4pi`) or plain numbers.

use crate::analysis::{EnergyEstimator, EnsembleSpec, ScanAxis};
use crate::evolution::RecordMode;
use crate::units::{kbar_to_period, momentum_to_ladder, KickSchedule, PhysicalConstants};
use crate::wavepacket::SpatialGrid;
use crate::{Error, Result};
use serde::Deserialize;
use std::path::{Path, PathBuf};

/// Seconds for a time token: `"12.5"` or `"12.5us"` (microseconds),
/// `"TT"`, `"TT/2"`, `"3TT/2"`, `"0.25TT"` (Talbot multiples).
pub fn parse_time(token: &str, talbot: f64) -> Result<f64> {
    let t = token.trim();
    let fail = |msg: &str| {
        Error::domain(format!(
            "time value `{token}`: {msg} (expected microseconds like `12.5us` or a Talbot \
             token like `TT/2` or `3TT/2`)"
        ))
    };
    if let Some((pre, post)) = t.split_once("TT") {
        let mult: f64 = if pre.is_empty() {
            1.0
        } else {
            pre.parse().map_err(|_| fail("bad multiplier"))?
        };
        let div: f64 = if post.is_empty() {
            1.0
        } else {
            let d = post
                .strip_prefix('/')
                .ok_or_else(|| fail("expected `/denominator` after TT"))?;
            d.parse().map_err(|_| fail("bad denominator"))?
        };
        if div == 0.0 {
            return Err(fail("denominator must be non-zero"));
        }
        return Ok(mult * talbot / div);
    }
    let micros: f64 = t
        .strip_suffix("us")
        .unwrap_or(t)
        .trim()
        .parse()
        .map_err(|_| fail("not a number"))?;
    Ok(micros * 1e-6)
}

/// Dimensionless period from `"4pi"`-style tokens or plain numbers.
pub fn parse_kbar(token: &str) -> Result<f64> {
    let t = token.trim();
    let parse = |s: &str| {
        s.trim().parse::<f64>().map_err(|_| {
            Error::domain(format!(
                "kbar value `{token}`: not a number (expected e.g. `4pi` or `12.57`)"
            ))
        })
    };
    if let Some(mult) = t.strip_suffix("pi") {
        let m = if mult.trim().is_empty() {
            1.0
        } else {
            parse(mult)?
        };
        Ok(m * std::f64::consts::PI)
    } else {
        parse(t)
    }
}

pub fn parse_axis(name: &str) -> Result<ScanAxis> {
    match name {
        "period" | "period_T" => Ok(ScanAxis::PeriodT),
        "kicks" | "num_kicks" => Ok(ScanAxis::NumKicks),
        "beta" => Ok(ScanAxis::Beta),
        "center" | "center_momentum" => Ok(ScanAxis::CenterMomentum),
        other => Err(Error::config(
            "scan.axis",
            format!("unknown axis `{other}` (period, kicks, beta, center_momentum)"),
        )),
    }
}

pub fn parse_estimator(name: &str) -> Result<EnergyEstimator> {
    match name {
        "direct" | "direct_variance" => Ok(EnergyEstimator::DirectVariance),
        "fit" | "gaussian_fit" => Ok(EnergyEstimator::GaussianFit),
        other => Err(Error::config(
            "scan.estimator",
            format!("unknown estimator `{other}` (direct_variance, gaussian_fit)"),
        )),
    }
}

pub fn parse_record(name: &str) -> Result<RecordMode> {
    match name {
        "every-kick" | "every_kick" => Ok(RecordMode::EveryKick),
        "final" | "final-only" => Ok(RecordMode::FinalOnly),
        other => Err(Error::config(
            "output.record",
            format!("unknown record mode `{other}` (every-kick, final)"),
        )),
    }
}

/// A TOML value that is either a number or a token string.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum NumOrStr {
    Num(f64),
    Str(String),
}

impl NumOrStr {
    /// Normalize to a token string; bare numbers in time positions mean
    /// microseconds.
    fn as_time_token(&self) -> String {
        match self {
            NumOrStr::Num(x) => format!("{x}us"),
            NumOrStr::Str(s) => s.clone(),
        }
    }

    fn as_token(&self) -> String {
        match self {
            NumOrStr::Num(x) => format!("{x}"),
            NumOrStr::Str(s) => s.clone(),
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    /// Provenance marker written by the config echo; ignored on load so an
    /// echoed config reloads verbatim.
    #[serde(rename = "command")]
    pub _command: Option<String>,
    pub constants: Option<ConstantsSection>,
    pub grid: Option<GridSection>,
    pub schedule: Option<ScheduleSection>,
    pub packet: Option<PacketSection>,
    pub ensemble: Option<EnsembleSection>,
    pub scan: Option<ScanSection>,
    pub oracle: Option<OracleSection>,
    pub output: Option<OutputSection>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantsSection {
    pub wavelength: Option<f64>,
    pub atom_mass: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub num_points: Option<usize>,
    pub num_periods: Option<u32>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSection {
    pub phi_d: Option<f64>,
    pub period: Option<NumOrStr>,
    pub kbar: Option<NumOrStr>,
    pub kicks: Option<u32>,
    pub beta: Option<f64>,
    pub pulse_width: Option<NumOrStr>,
    pub substeps: Option<u32>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PacketSection {
    pub sigma_w_periods: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSection {
    pub center_momentum: Option<f64>,
    pub sigma_momentum: Option<f64>,
    pub num_samples: Option<u32>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSection {
    pub axis: Option<String>,
    pub from: Option<NumOrStr>,
    pub to: Option<NumOrStr>,
    pub step: Option<NumOrStr>,
    pub steps: Option<u32>,
    pub estimator: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSection {
    pub l: Option<u32>,
    pub period: Option<NumOrStr>,
    pub beta: Option<f64>,
    pub phi_d: Option<f64>,
    pub kicks: Option<u32>,
    pub fractions: Option<u32>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
    pub record: Option<String>,
    pub json: Option<bool>,
}

pub fn load_file(path: &Path) -> Result<FileConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })?;
    toml::from_str(&text).map_err(|e| Error::config("config", format!("{}: {e}", path.display())))
}

/// Flag-level overrides shared by `evolve` and `scan`.
#[derive(Debug, Default, Clone)]
pub struct CommonFlags {
    pub phi_d: Option<f64>,
    pub period: Option<String>,
    pub kbar: Option<String>,
    pub kicks: Option<u32>,
    pub beta: Option<f64>,
    pub pulse_width: Option<String>,
    pub substeps: Option<u32>,
    pub p_init: Option<f64>,
    pub sigma_w: Option<f64>,
    pub grid_points: Option<usize>,
    pub grid_periods: Option<u32>,
    pub ensemble_center: Option<f64>,
    pub ensemble_sigma: Option<f64>,
    pub ensemble_samples: Option<u32>,
}

/// Fully validated inputs common to the grid-propagator commands.
#[derive(Debug, Clone)]
pub struct CommonResolved {
    pub constants: PhysicalConstants,
    pub grid: SpatialGrid,
    pub schedule: KickSchedule,
    pub substeps: u32,
    /// Packet width [m].
    pub sigma_w: f64,
    pub sigma_w_periods: f64,
    pub ensemble: EnsembleSpec,
    pub out_dir: PathBuf,
    pub record: RecordMode,
    pub json: bool,
}

pub fn resolve_common(
    file: &FileConfig,
    flags: &CommonFlags,
    out_flag: Option<PathBuf>,
    record_flag: Option<RecordMode>,
    json_flag: bool,
) -> Result<CommonResolved> {
    let fc = file.constants.as_ref();
    let constants = PhysicalConstants::new(
        fc.and_then(|c| c.wavelength)
            .unwrap_or(PhysicalConstants::default().wavelength),
        fc.and_then(|c| c.atom_mass)
            .unwrap_or(PhysicalConstants::default().atom_mass),
    )?;
    let talbot = constants.talbot_time();

    let fg = file.grid.as_ref();
    let grid = SpatialGrid::new(
        flags
            .grid_points
            .or(fg.and_then(|g| g.num_points))
            .unwrap_or(SpatialGrid::default().num_points()),
        flags
            .grid_periods
            .or(fg.and_then(|g| g.num_periods))
            .unwrap_or(SpatialGrid::default().num_periods()),
        constants.wavelength,
    )?;

    let fs = file.schedule.as_ref();
    // A period given as a flag beats any file setting; within one layer,
    // period and kbar are mutually exclusive.
    let period_s = if let Some(token) = &flags.period {
        parse_time(token, talbot)?
    } else if let Some(token) = &flags.kbar {
        kbar_to_period(parse_kbar(token)?, &constants)?
    } else {
        let file_period = fs.and_then(|s| s.period.as_ref());
        let file_kbar = fs.and_then(|s| s.kbar.as_ref());
        match (file_period, file_kbar) {
            (Some(_), Some(_)) => {
                return Err(Error::config(
                    "schedule",
                    "set either `period` or `kbar`, not both",
                ))
            }
            (Some(p), None) => parse_time(&p.as_time_token(), talbot)?,
            (None, Some(k)) => kbar_to_period(parse_kbar(&k.as_token())?, &constants)?,
            (None, None) => talbot,
        }
    };
    let pulse_width_s = match (&flags.pulse_width, fs.and_then(|s| s.pulse_width.as_ref())) {
        (Some(token), _) => parse_time(token, talbot)?,
        (None, Some(v)) => parse_time(&v.as_time_token(), talbot)?,
        (None, None) => 0.0,
    };
    let phi_d = flags
        .phi_d
        .or(fs.and_then(|s| s.phi_d))
        .unwrap_or(1.5);
    let kicks = flags.kicks.or(fs.and_then(|s| s.kicks)).unwrap_or(1);
    let beta_shift = flags.beta.or(fs.and_then(|s| s.beta)).unwrap_or(0.0);
    if !(beta_shift.is_finite() && (0.0..1.0).contains(&beta_shift)) {
        return Err(Error::config("beta", "must lie in [0, 1)"));
    }
    let substeps = flags
        .substeps
        .or(fs.and_then(|s| s.substeps))
        .unwrap_or(1);
    if substeps == 0 {
        return Err(Error::config("substeps", "must be at least 1"));
    }

    let fp = file.packet.as_ref();
    let sigma_w_periods = flags
        .sigma_w
        .or(fp.and_then(|p| p.sigma_w_periods))
        .unwrap_or(40.0);
    if !(sigma_w_periods.is_finite() && sigma_w_periods > 0.0) {
        return Err(Error::config(
            "sigma_w_periods",
            "must be finite and positive",
        ));
    }
    let sigma_w = sigma_w_periods * grid.grating_period();

    let fe = file.ensemble.as_ref();
    // `--p-init` and `--beta` both steer the launch momentum:
    // launch = center + 2 * beta.
    let base_center = flags
        .p_init
        .or(flags.ensemble_center)
        .or(fe.and_then(|e| e.center_momentum))
        .unwrap_or(0.0);
    let center = base_center + 2.0 * beta_shift;
    let sigma = flags
        .ensemble_sigma
        .or(fe.and_then(|e| e.sigma_momentum))
        .unwrap_or(0.0);
    let samples = flags
        .ensemble_samples
        .or(fe.and_then(|e| e.num_samples))
        // An unset count follows sigma: single packet when pure, 21 when spread.
        .unwrap_or(if sigma > 0.0 { 21 } else { 1 });
    let ensemble = EnsembleSpec::new(center, sigma, samples)?;

    let schedule = KickSchedule::new(
        phi_d,
        period_s,
        kicks,
        momentum_to_ladder(center).1,
        pulse_width_s,
    )?;

    let fo = file.output.as_ref();
    let out_dir = out_flag
        .or(fo.and_then(|o| o.dir.clone()))
        .unwrap_or_else(|| PathBuf::from("aokr-out"));
    let record = match record_flag {
        Some(mode) => mode,
        None => match fo.and_then(|o| o.record.as_deref()) {
            Some(name) => parse_record(name)?,
            None => RecordMode::EveryKick,
        },
    };
    let json = json_flag || fo.and_then(|o| o.json).unwrap_or(false);

    Ok(CommonResolved {
        constants,
        grid,
        schedule,
        substeps,
        sigma_w,
        sigma_w_periods,
        ensemble,
        out_dir,
        record,
        json,
    })
}

/// Flag-level overrides for `scan`.
#[derive(Debug, Default, Clone)]
pub struct ScanFlags {
    pub axis: Option<String>,
    pub from: Option<String>,
    pub to: Option<String>,
    pub step: Option<String>,
    pub steps: Option<u32>,
    pub estimator: Option<String>,
}

#[derive(Debug, Clone)]
pub struct ScanResolved {
    pub axis: ScanAxis,
    pub estimator: EnergyEstimator,
    /// Axis values in native units (seconds for the period axis).
    pub values: Vec<f64>,
    /// Grid bounds in file units (microseconds for the period axis), kept
    /// so the config echo can be reloaded verbatim.
    pub from_file_units: f64,
    pub to_file_units: f64,
    pub step_file_units: Option<f64>,
    pub steps: Option<u32>,
}

pub fn resolve_scan(
    file: &FileConfig,
    flags: &ScanFlags,
    constants: &PhysicalConstants,
) -> Result<ScanResolved> {
    let section = file.scan.as_ref();
    let axis_name = flags
        .axis
        .clone()
        .or(section.and_then(|s| s.axis.clone()))
        .ok_or_else(|| Error::config("scan.axis", "required (period, kicks, beta, center_momentum)"))?;
    let axis = parse_axis(&axis_name)?;
    let estimator = match flags
        .estimator
        .clone()
        .or(section.and_then(|s| s.estimator.clone()))
    {
        Some(name) => parse_estimator(&name)?,
        None => EnergyEstimator::DirectVariance,
    };

    let talbot = constants.talbot_time();
    let parse_value = |token: &str, field: &str| -> Result<f64> {
        if axis == ScanAxis::PeriodT {
            parse_time(token, talbot)
        } else {
            token.trim().parse::<f64>().map_err(|_| {
                Error::config(field, format!("`{token}` is not a plain number"))
            })
        }
    };
    let token_of = |v: &NumOrStr| {
        if axis == ScanAxis::PeriodT {
            v.as_time_token()
        } else {
            v.as_token()
        }
    };

    let from_token = flags
        .from
        .clone()
        .or(section.and_then(|s| s.from.as_ref().map(&token_of)))
        .ok_or_else(|| Error::config("scan.from", "required"))?;
    let to_token = flags
        .to
        .clone()
        .or(section.and_then(|s| s.to.as_ref().map(&token_of)))
        .ok_or_else(|| Error::config("scan.to", "required"))?;
    let from = parse_value(&from_token, "scan.from")?;
    let to = parse_value(&to_token, "scan.to")?;

    let step_token = flags
        .step
        .clone()
        .or(section.and_then(|s| s.step.as_ref().map(&token_of)));
    let steps = flags.steps.or(section.and_then(|s| s.steps));
    let mut step_native = None;
    let values = match (step_token, steps) {
        (Some(_), Some(_)) => {
            return Err(Error::config(
                "scan",
                "set either `step` or `steps`, not both",
            ))
        }
        (Some(token), None) => {
            let step = parse_value(&token, "scan.step")?;
            if !(step.is_finite() && step > 0.0) {
                return Err(Error::config("scan.step", "must be positive"));
            }
            step_native = Some(step);
            if to < from {
                return Err(Error::config("scan", "`to` must not be below `from`"));
            }
            let count = ((to - from) / step + 1.5).floor() as usize;
            if count > 100_000 {
                return Err(Error::config("scan", "more than 100000 points requested"));
            }
            // Multiplicative spacing keeps the grid reproducible; trailing
            // points beyond `to` (bar rounding slack) are dropped.
            (0..count)
                .map(|k| from + k as f64 * step)
                .filter(|v| *v <= to + 1e-9 * step)
                .collect()
        }
        (None, Some(n)) => {
            if n == 0 {
                return Err(Error::config("scan.steps", "must be at least 1"));
            }
            if n > 100_000 {
                return Err(Error::config("scan", "more than 100000 points requested"));
            }
            // `steps` points tile [from, to) half-open, so a full beta sweep
            // `from 0 to 1 steps 8` never hits the invalid beta = 1.
            let spacing = (to - from) / n as f64;
            (0..n).map(|k| from + k as f64 * spacing).collect()
        }
        (None, None) => {
            return Err(Error::config(
                "scan",
                "one of `step` or `steps` is required",
            ))
        }
    };
    let to_file = |native: f64| {
        if axis == ScanAxis::PeriodT {
            native * 1e6
        } else {
            native
        }
    };
    Ok(ScanResolved {
        axis,
        estimator,
        values,
        from_file_units: to_file(from),
        to_file_units: to_file(to),
        step_file_units: step_native.map(to_file),
        steps,
    })
}

/// Flag-level overrides for `oracle`.
#[derive(Debug, Default, Clone)]
pub struct OracleFlags {
    pub l: Option<u32>,
    pub period: Option<String>,
    pub beta: Option<f64>,
    pub phi_d: Option<f64>,
    pub kicks: Option<u32>,
    pub fractions: Option<u32>,
}

#[derive(Debug, Clone)]
pub struct OracleResolved {
    pub constants: PhysicalConstants,
    /// Period in half-Talbot units; absent when only the fraction table was
    /// requested.
    pub l: Option<u32>,
    pub beta: f64,
    pub phi_d: f64,
    pub kicks: u32,
    pub fractions: Option<u32>,
    pub out_dir: PathBuf,
}

pub fn resolve_oracle(
    file: &FileConfig,
    flags: &OracleFlags,
    out_flag: Option<PathBuf>,
) -> Result<OracleResolved> {
    let fc = file.constants.as_ref();
    let constants = PhysicalConstants::new(
        fc.and_then(|c| c.wavelength)
            .unwrap_or(PhysicalConstants::default().wavelength),
        fc.and_then(|c| c.atom_mass)
            .unwrap_or(PhysicalConstants::default().atom_mass),
    )?;
    let section = file.oracle.as_ref();

    let period_token = flags
        .period
        .clone()
        .or(section.and_then(|s| s.period.as_ref().map(|p| p.as_time_token())));
    let l_direct = flags.l.or(section.and_then(|s| s.l));
    let l = match (l_direct, period_token) {
        (Some(_), Some(_)) => {
            return Err(Error::config(
                "oracle",
                "set either `l` or `period`, not both",
            ))
        }
        (Some(l), None) => {
            if l == 0 {
                return Err(Error::config("oracle.l", "must be at least 1"));
            }
            Some(l)
        }
        (None, Some(token)) => {
            let period = parse_time(&token, constants.talbot_time())?;
            let ratio = period / (0.5 * constants.talbot_time());
            let rounded = ratio.round();
            if rounded < 1.0 || (ratio - rounded).abs() > 1e-6 * ratio.max(1.0) {
                return Err(Error::domain(format!(
                    "the closed-form route is only valid at integer multiples of half the \
                     Talbot time; {:.4} us is {ratio:.6} half-Talbot units (nearest integer \
                     {rounded}). Use a period of l * TT/2 or pass --l directly.",
                    period * 1e6
                )));
            }
            Some(rounded as u32)
        }
        (None, None) => None,
    };

    let fractions = flags.fractions.or(section.and_then(|s| s.fractions));
    if l.is_none() && fractions.is_none() {
        return Err(Error::config(
            "oracle",
            "nothing to do: give `l` (or `period`) for ladder populations, `fractions` for \
             the rephasing-time table, or both",
        ));
    }
    let beta = flags.beta.or(section.and_then(|s| s.beta)).unwrap_or(0.0);
    let phi_d = flags
        .phi_d
        .or(section.and_then(|s| s.phi_d))
        .unwrap_or(1.5);
    let kicks = flags.kicks.or(section.and_then(|s| s.kicks)).unwrap_or(1);
    let out_dir = out_flag
        .or(file.output.as_ref().and_then(|o| o.dir.clone()))
        .unwrap_or_else(|| PathBuf::from("aokr-out"));
    Ok(OracleResolved {
        constants,
        l,
        beta,
        phi_d,
        kicks,
        fractions,
        out_dir,
    })
}
