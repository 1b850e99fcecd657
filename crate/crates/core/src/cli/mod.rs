//! Command line front end: `evolve` (kick-by-kick distributions), `scan`
//! (energy versus one swept parameter), and `oracle` (closed-form ladder
//! populations at half-Talbot periods).
//!
//! Exit codes: 0 success, 2 configuration or domain errors, 3 momentum
//! cutoff aborts, 4 I/O failures. Every run directory receives a
//! `config_resolved.toml` echo of the fully resolved inputs and a
//! `manifest.csv` with SHA-256 checksums, so results stay reproducible.

mod config;
mod output;

pub use config::{parse_kbar, parse_time};

use crate::analysis::{energy_scan, ScanAxis, ScanSetup};
use crate::evolution::{FloquetStepPlan, RecordMode};
use crate::oracle::{energy_erec, fractional_times, ladder_amplitudes, ResonanceContext};
use crate::units::ladder_to_momentum;
use crate::wavepacket::{MomentumDistribution, WavePacket};
use crate::{Error, Result};
use clap::{Parser, Subcommand};
use config::{
    load_file, parse_record, resolve_common, resolve_oracle, resolve_scan, CommonFlags,
    CommonResolved, FileConfig, OracleFlags, OracleResolved, ScanFlags, ScanResolved,
};
use output::ArtifactDir;
use serde::Serialize;
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(
    name = "aokr",
    version,
    about = "Momentum dynamics of a pulse-kicked atom: grid propagation, parameter scans, \
             and closed-form ladder checks"
)]
pub struct Cli {
    /// TOML config file; command line flags override file values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads; 0 or absent uses all cores. Results are identical
    /// for every thread count.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Propagate a packet through the kick sequence and write momentum
    /// distributions.
    Evolve(EvolveArgs),
    /// Sweep one parameter and tabulate the final kinetic energy.
    Scan(ScanArgs),
    /// Closed-form ladder populations and energies at half-Talbot periods.
    Oracle(OracleArgs),
}

#[derive(Debug, clap::Args)]
struct PhysicsArgs {
    /// Kick phase depth.
    #[arg(long = "phi-d", value_name = "DEPTH")]
    phi_d: Option<f64>,
    /// Kick period: microseconds ("33.1us") or Talbot tokens ("TT", "TT/2",
    /// "3TT/2").
    #[arg(long, value_name = "TIME", conflicts_with = "kbar")]
    period: Option<String>,
    /// Dimensionless kick period, e.g. "4pi" or "12.57".
    #[arg(long, value_name = "KBAR")]
    kbar: Option<String>,
    /// Number of kicks.
    #[arg(long, value_name = "N")]
    kicks: Option<u32>,
    /// Ladder offset in [0, 1); shifts the launch momentum by 2*beta p_rec.
    #[arg(long, value_name = "BETA")]
    beta: Option<f64>,
    /// Kick pulse width: microseconds or Talbot tokens; 0 means ideal
    /// delta kicks.
    #[arg(long = "pulse-width", value_name = "TIME")]
    pulse_width: Option<String>,
    /// Trotter substeps resolving a finite pulse width.
    #[arg(long, value_name = "S")]
    substeps: Option<u32>,
    /// Initial packet momentum [p_rec]; alias for --ensemble-center.
    #[arg(long = "p-init", value_name = "P", conflicts_with = "ensemble_center")]
    p_init: Option<f64>,
    /// Packet envelope width in grating periods.
    #[arg(long = "sigma-w", value_name = "PERIODS")]
    sigma_w: Option<f64>,
    /// Grid sample count (a power of two).
    #[arg(long = "grid-points", value_name = "N")]
    grid_points: Option<usize>,
    /// Grid length in grating periods.
    #[arg(long = "grid-periods", value_name = "N")]
    grid_periods: Option<u32>,
    /// Ensemble center momentum [p_rec].
    #[arg(long = "ensemble-center", value_name = "P")]
    ensemble_center: Option<f64>,
    /// Ensemble momentum spread [p_rec]; 0 means a single pure packet.
    #[arg(long = "ensemble-sigma", value_name = "SIGMA")]
    ensemble_sigma: Option<f64>,
    /// Ensemble sample count (odd, at least 9).
    #[arg(long = "ensemble-samples", value_name = "N")]
    ensemble_samples: Option<u32>,
}

impl PhysicsArgs {
    fn to_flags(&self) -> CommonFlags {
        CommonFlags {
            phi_d: self.phi_d,
            period: self.period.clone(),
            kbar: self.kbar.clone(),
            kicks: self.kicks,
            beta: self.beta,
            pulse_width: self.pulse_width.clone(),
            substeps: self.substeps,
            p_init: self.p_init,
            sigma_w: self.sigma_w,
            grid_points: self.grid_points,
            grid_periods: self.grid_periods,
            ensemble_center: self.ensemble_center,
            ensemble_sigma: self.ensemble_sigma,
            ensemble_samples: self.ensemble_samples,
        }
    }
}

#[derive(Debug, clap::Args)]
struct EvolveArgs {
    #[command(flatten)]
    physics: PhysicsArgs,
    /// What to record: "every-kick" or "final".
    #[arg(long, value_name = "MODE")]
    record: Option<String>,
    /// Also write summary.json.
    #[arg(long)]
    json: bool,
}

#[derive(Debug, clap::Args)]
struct ScanArgs {
    #[command(flatten)]
    physics: PhysicsArgs,
    /// Swept parameter: period, kicks, beta, or center_momentum.
    #[arg(long, value_name = "AXIS")]
    axis: Option<String>,
    /// First axis value (time tokens for the period axis).
    #[arg(long, value_name = "VALUE")]
    from: Option<String>,
    /// Last axis value.
    #[arg(long, value_name = "VALUE")]
    to: Option<String>,
    /// Axis increment; the grid includes both ends.
    #[arg(long, value_name = "VALUE", conflicts_with = "steps")]
    step: Option<String>,
    /// Point count tiling [from, to) half-open.
    #[arg(long, value_name = "N")]
    steps: Option<u32>,
    /// Energy estimator: direct_variance or gaussian_fit.
    #[arg(long, value_name = "NAME")]
    estimator: Option<String>,
    /// Also write scan.json.
    #[arg(long)]
    json: bool,
}

#[derive(Debug, clap::Args)]
struct OracleArgs {
    /// Kick period in half-Talbot units.
    #[arg(long, value_name = "L", conflicts_with = "period")]
    l: Option<u32>,
    /// Kick period as a time; must be an integer multiple of TT/2.
    #[arg(long, value_name = "TIME")]
    period: Option<String>,
    /// Ladder offset in [0, 1).
    #[arg(long, value_name = "BETA")]
    beta: Option<f64>,
    /// Kick phase depth.
    #[arg(long = "phi-d", value_name = "DEPTH")]
    phi_d: Option<f64>,
    /// Number of kicks.
    #[arg(long, value_name = "N")]
    kicks: Option<u32>,
    /// Also tabulate rephasing times T_T * p / q for denominators up to N.
    #[arg(long, value_name = "N")]
    fractions: Option<u32>,
}

/// Parse the process arguments, run, and map errors to exit codes.
pub fn run() -> i32 {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err}");
            exit_code(&err)
        }
    }
}

/// 2 for bad inputs, 3 for a momentum cutoff abort, 4 for I/O failures.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Domain(_) | Error::Config { .. } | Error::GridMismatch(_) => 2,
        Error::CutoffExceeded(_) => 3,
        Error::Io(_) => 4,
    }
}

fn execute(cli: Cli) -> Result<()> {
    let file = match &cli.config {
        Some(path) => load_file(path)?,
        None => FileConfig::default(),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::config("threads", e.to_string()))?;
    match cli.command {
        Command::Evolve(args) => {
            let record = match &args.record {
                Some(name) => Some(parse_record(name)?),
                None => None,
            };
            let common =
                resolve_common(&file, &args.physics.to_flags(), cli.out, record, args.json)?;
            pool.install(|| cmd_evolve(&common))
        }
        Command::Scan(args) => {
            let common =
                resolve_common(&file, &args.physics.to_flags(), cli.out, None, args.json)?;
            let scan_flags = ScanFlags {
                axis: args.axis.clone(),
                from: args.from.clone(),
                to: args.to.clone(),
                step: args.step.clone(),
                steps: args.steps,
                estimator: args.estimator.clone(),
            };
            let scan = resolve_scan(&file, &scan_flags, &common.constants)?;
            pool.install(|| cmd_scan(&common, &scan))
        }
        Command::Oracle(args) => {
            let flags = OracleFlags {
                l: args.l,
                period: args.period.clone(),
                beta: args.beta,
                phi_d: args.phi_d,
                kicks: args.kicks,
                fractions: args.fractions,
            };
            let resolved = resolve_oracle(&file, &flags, cli.out)?;
            cmd_oracle(&resolved)
        }
    }
}

/// Weighted per-slot accumulator across ensemble members.
struct SlotAccumulator {
    kicks_applied: u32,
    time: f64,
    norm: f64,
    energy_erec: f64,
    probability: Vec<f64>,
    p_over_prec: Vec<f64>,
    bin_width: f64,
}

fn cmd_evolve(common: &CommonResolved) -> Result<()> {
    let mut artifacts = ArtifactDir::create(&common.out_dir)?;
    artifacts.write("config_resolved.toml", &echo_common("evolve", common, None)?)?;

    let mut plan = FloquetStepPlan::new(
        common.grid,
        &common.constants,
        common.schedule,
        common.substeps,
    )?;
    let beta = common.schedule.beta;

    // Members run sequentially; energies and probabilities are linear in
    // the per-member distributions, so weighted slot sums reproduce the
    // ensemble average exactly.
    let mut slots: Vec<SlotAccumulator> = Vec::new();
    for (momentum, weight) in common.ensemble.samples() {
        let mut psi = WavePacket::init_gaussian(common.grid, common.sigma_w, momentum)?;
        let records = plan.run_kicks(&mut psi, common.record)?;
        if slots.is_empty() {
            slots = records
                .iter()
                .map(|r| SlotAccumulator {
                    kicks_applied: r.kicks_applied,
                    time: r.time,
                    norm: 0.0,
                    energy_erec: 0.0,
                    probability: vec![0.0; r.distribution.probability().len()],
                    p_over_prec: r.distribution.p_over_prec().to_vec(),
                    bin_width: r.distribution.bin_width(),
                })
                .collect();
        }
        for (slot, record) in slots.iter_mut().zip(&records) {
            slot.norm += weight * record.norm;
            slot.energy_erec += weight * record.energy_erec;
            for (acc, p) in slot
                .probability
                .iter_mut()
                .zip(record.distribution.probability())
            {
                *acc += weight * p;
            }
        }
    }

    for slot in &slots {
        // One distribution file per applied kick; the unkicked packet is
        // written only when no kicks were requested at all.
        if slot.kicks_applied == 0 && common.schedule.num_kicks > 0 {
            continue;
        }
        let distribution = MomentumDistribution {
            p_over_prec: slot.p_over_prec.clone(),
            probability: slot.probability.clone(),
            beta,
            bin_width: slot.bin_width,
        };
        let mut csv = Vec::new();
        distribution.write_csv(&mut csv)?;
        artifacts.write(
            &format!("distribution_kick_{:02}.csv", slot.kicks_applied),
            &into_string(csv)?,
        )?;
        let mut orders = Vec::new();
        distribution.write_orders_csv(&mut orders)?;
        artifacts.write(
            &format!("orders_kick_{:02}.csv", slot.kicks_applied),
            &into_string(orders)?,
        )?;
    }

    let mut summary = String::from("kick,time_us,energy_Erec,norm\n");
    for slot in &slots {
        summary.push_str(&format!(
            "{},{:.6},{:.12e},{:.12e}\n",
            slot.kicks_applied,
            slot.time * 1e6,
            slot.energy_erec,
            slot.norm,
        ));
    }
    artifacts.write("summary.csv", &summary)?;

    if common.json {
        #[derive(Serialize)]
        struct SummaryRow {
            kick: u32,
            time_us: f64,
            #[serde(rename = "energy_Erec")]
            energy_erec: f64,
            norm: f64,
        }
        let rows: Vec<SummaryRow> = slots
            .iter()
            .map(|s| SummaryRow {
                kick: s.kicks_applied,
                time_us: s.time * 1e6,
                energy_erec: s.energy_erec,
                norm: s.norm,
            })
            .collect();
        let text = serde_json::to_string_pretty(&rows)
            .map_err(|e| Error::domain(format!("summary serialization: {e}")))?;
        artifacts.write("summary.json", &text)?;
    }
    artifacts.finish()
}

fn cmd_scan(common: &CommonResolved, scan: &ScanResolved) -> Result<()> {
    let mut artifacts = ArtifactDir::create(&common.out_dir)?;
    artifacts.write(
        "config_resolved.toml",
        &echo_common("scan", common, Some(scan))?,
    )?;

    let setup = ScanSetup {
        grid: common.grid,
        constants: common.constants,
        base_schedule: common.schedule,
        substeps: common.substeps,
        ensemble: common.ensemble,
        sigma_w: common.sigma_w,
        axis: scan.axis,
        estimator: scan.estimator,
    };
    let result = energy_scan(&setup, &scan.values)?;

    let mut csv = Vec::new();
    result.write_csv(&mut csv)?;
    artifacts.write("scan.csv", &into_string(csv)?)?;

    if common.json {
        let text = serde_json::to_string_pretty(&result)
            .map_err(|e| Error::domain(format!("scan serialization: {e}")))?;
        artifacts.write("scan.json", &text)?;
    }

    // A beta sweep at an exact half-Talbot period has a closed form; write
    // it alongside the grid result for direct overlay.
    if scan.axis == ScanAxis::Beta && common.schedule.num_kicks >= 1 {
        let half = common.constants.talbot_time() / 2.0;
        let ratio = common.schedule.period_t / half;
        let l = ratio.round();
        if l >= 1.0 && (ratio - l).abs() <= 1e-6 * ratio.max(1.0) {
            let mut overlay = String::from("beta,energy_Erec\n");
            for &beta in &scan.values {
                let ctx = ResonanceContext::new(
                    l as u32,
                    beta,
                    common.schedule.phi_d,
                    common.schedule.num_kicks,
                )?;
                overlay.push_str(&format!("{beta:.12e},{:.12e}\n", energy_erec(&ctx)?));
            }
            artifacts.write("oracle_overlay.csv", &overlay)?;
        }
    }
    artifacts.finish()
}

fn cmd_oracle(resolved: &OracleResolved) -> Result<()> {
    let mut artifacts = ArtifactDir::create(&resolved.out_dir)?;
    artifacts.write("config_resolved.toml", &echo_oracle(resolved)?)?;

    if let Some(l) = resolved.l {
        let ctx = ResonanceContext::new(l, resolved.beta, resolved.phi_d, resolved.kicks)?;
        let amplitudes = ladder_amplitudes(&ctx)?;
        let mut populations = String::from("site,center_p_over_prec,population\n");
        for site in amplitudes.order_range() {
            populations.push_str(&format!(
                "{site},{:.12e},{:.12e}\n",
                ladder_to_momentum(site, resolved.beta),
                amplitudes.population(site),
            ));
        }
        artifacts.write("populations.csv", &populations)?;

        let mut energies = String::from("kicks,energy_Erec\n");
        // Before any kick the packet rides ladder site 0 at 2*beta p_rec.
        energies.push_str(&format!("0,{:.12e}\n", 4.0 * resolved.beta * resolved.beta));
        for n in 1..=resolved.kicks {
            let ctx = ResonanceContext::new(l, resolved.beta, resolved.phi_d, n)?;
            energies.push_str(&format!("{n},{:.12e}\n", energy_erec(&ctx)?));
        }
        artifacts.write("energies.csv", &energies)?;
    }

    if let Some(max_denominator) = resolved.fractions {
        let table = fractional_times(max_denominator, &resolved.constants)?;
        let mut csv = String::from("numerator,denominator,time_us\n");
        for entry in &table {
            csv.push_str(&format!(
                "{},{},{:.6}\n",
                entry.numerator,
                entry.denominator,
                entry.time * 1e6,
            ));
        }
        artifacts.write("fractional_times.csv", &csv)?;
    }
    artifacts.finish()
}

fn into_string(bytes: Vec<u8>) -> Result<String> {
    String::from_utf8(bytes).map_err(|e| Error::domain(format!("non-utf8 artifact: {e}")))
}

#[derive(Serialize)]
struct EchoConstants {
    wavelength: f64,
    atom_mass: f64,
}

#[derive(Serialize)]
struct EchoGrid {
    num_points: usize,
    num_periods: u32,
}

#[derive(Serialize)]
struct EchoSchedule {
    phi_d: f64,
    /// Microseconds, matching the bare-number time convention on input.
    period: f64,
    kicks: u32,
    beta: f64,
    pulse_width: f64,
    substeps: u32,
}

#[derive(Serialize)]
struct EchoPacket {
    sigma_w_periods: f64,
}

#[derive(Serialize)]
struct EchoEnsemble {
    center_momentum: f64,
    sigma_momentum: f64,
    num_samples: u32,
}

#[derive(Serialize)]
struct EchoScan {
    axis: ScanAxis,
    estimator: crate::analysis::EnergyEstimator,
    /// Grid bounds in file units (microseconds for the period axis).
    from: f64,
    to: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    step: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    steps: Option<u32>,
}

#[derive(Serialize)]
struct EchoOutput {
    dir: String,
    record: String,
    json: bool,
}

#[derive(Serialize)]
struct EchoCommon {
    command: String,
    constants: EchoConstants,
    grid: EchoGrid,
    schedule: EchoSchedule,
    packet: EchoPacket,
    ensemble: EchoEnsemble,
    #[serde(skip_serializing_if = "Option::is_none")]
    scan: Option<EchoScan>,
    output: EchoOutput,
}

fn echo_common(
    command: &str,
    common: &CommonResolved,
    scan: Option<&ScanResolved>,
) -> Result<String> {
    let echo = EchoCommon {
        command: command.to_string(),
        constants: EchoConstants {
            wavelength: common.constants.wavelength,
            atom_mass: common.constants.atom_mass,
        },
        grid: EchoGrid {
            num_points: common.grid.num_points(),
            num_periods: common.grid.num_periods(),
        },
        schedule: EchoSchedule {
            phi_d: common.schedule.phi_d,
            period: common.schedule.period_t * 1e6,
            kicks: common.schedule.num_kicks,
            // The launch momentum is folded into ensemble.center_momentum,
            // so a reload of this echo must not shift it again.
            beta: 0.0,
            pulse_width: common.schedule.pulse_width_tau * 1e6,
            substeps: common.substeps,
        },
        packet: EchoPacket {
            sigma_w_periods: common.sigma_w_periods,
        },
        ensemble: EchoEnsemble {
            center_momentum: common.ensemble.center_momentum,
            sigma_momentum: common.ensemble.sigma_momentum,
            num_samples: common.ensemble.num_samples,
        },
        scan: scan.map(|s| EchoScan {
            axis: s.axis,
            estimator: s.estimator,
            from: s.from_file_units,
            to: s.to_file_units,
            step: s.step_file_units,
            steps: s.steps,
        }),
        output: EchoOutput {
            dir: common.out_dir.display().to_string(),
            record: match common.record {
                RecordMode::EveryKick => "every-kick".to_string(),
                RecordMode::FinalOnly => "final".to_string(),
            },
            json: common.json,
        },
    };
    toml::to_string(&echo).map_err(|e| Error::domain(format!("config echo: {e}")))
}

#[derive(Serialize)]
struct EchoOracleParams {
    #[serde(skip_serializing_if = "Option::is_none")]
    l: Option<u32>,
    beta: f64,
    phi_d: f64,
    kicks: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    fractions: Option<u32>,
}

#[derive(Serialize)]
struct EchoOracleConfig {
    command: String,
    constants: EchoConstants,
    oracle: EchoOracleParams,
    output: EchoOracleOutput,
}

#[derive(Serialize)]
struct EchoOracleOutput {
    dir: String,
}

fn echo_oracle(resolved: &OracleResolved) -> Result<String> {
    let echo = EchoOracleConfig {
        command: "oracle".to_string(),
        constants: EchoConstants {
            wavelength: resolved.constants.wavelength,
            atom_mass: resolved.constants.atom_mass,
        },
        oracle: EchoOracleParams {
            l: resolved.l,
            beta: resolved.beta,
            phi_d: resolved.phi_d,
            kicks: resolved.kicks,
            fractions: resolved.fractions,
        },
        output: EchoOracleOutput {
            dir: resolved.out_dir.display().to_string(),
        },
    };
    toml::to_string(&echo).map_err(|e| Error::domain(format!("config echo: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_classes_map_to_distinct_exit_codes() {
        assert_eq!(exit_code(&Error::domain("x")), 2);
        assert_eq!(exit_code(&Error::config("f", "m")), 2);
        assert_eq!(exit_code(&Error::GridMismatch("x".into())), 2);
        assert_eq!(exit_code(&Error::CutoffExceeded("x".into())), 3);
        assert_eq!(
            exit_code(&Error::Io(std::io::Error::new(
                std::io::ErrorKind::Other,
                "x"
            ))),
            4
        );
    }

    #[test]
    fn clap_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
