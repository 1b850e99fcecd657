//! Simulation and analysis toolkit for atom-optics kicked-rotor experiments:
//! cold atoms exposed to a pulsed optical standing wave.
//!
//! The crate has two independent routes to the same physics and keeps them
//! separate on purpose:
//!
//! * a split-operator spectral propagator ([`evolution`]) that evolves a
//!   wavepacket on a position grid through arbitrary kick sequences, and
//! * closed-form momentum-ladder amplitudes ([`oracle`]) valid when the kick
//!   period is an integer multiple of half the Talbot time.
//!
//! [`wavepacket`] holds the grid and state types, [`units`] the experimental
//! constants and unit conversions, [`analysis`] ensemble averaging, peak
//! fitting and parameter scans, and [`cli`] the command-line front end.

pub mod analysis;
pub mod cli;
pub mod evolution;
mod fft;
pub mod oracle;
pub mod units;
pub mod wavepacket;

/// Crate-wide error type. Variants map onto the CLI exit classes: bad inputs
/// (`Domain`, `Config`, `GridMismatch`), aborted physics (`CutoffExceeded`)
/// and filesystem failures (`Io`).
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("incompatible grids: {0}")]
    GridMismatch(String),

    #[error("momentum spread reached the grid cutoff: {0}")]
    CutoffExceeded(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(field: &str, msg: impl Into<String>) -> Self {
        Error::Config {
            field: field.to_string(),
            message: msg.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
