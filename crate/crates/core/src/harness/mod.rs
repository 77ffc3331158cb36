//! End-to-end experiments: refresh delay, incremental shape formation and
//! object-manipulation scripting, plus CSV output.

mod csv_out;
mod delay;
mod manipulation;
mod shapes;
mod xcorr;

use std::path::PathBuf;

pub use csv_out::{
    emit_csv, fmt_sig, write_delay_csv, write_error_curve_csv, write_manipulation_csv, CsvRecord,
};
pub use delay::{
    fit_slope, run_delay_binary, run_delay_wave, toggle_hold_ms, wave_timeline, DelayResult,
    BINARY_REPLICATES,
    WAVE_REPLICATES,
};
pub use manipulation::{run_manipulation, ManipulationRun, ManipulationTick, TrajectoryScript};
pub use shapes::{
    run_shape_experiment, shape_plan, shape_target, CurvePoint, ErrorCurve, ShapeConfig,
    SETTLE_BAND_MM, SETTLE_CAP_MS, SETTLE_WINDOW_MS,
};
pub use xcorr::{xcorr_delay, xcorr_delay_within};

use crate::approx::ApproxError;
use crate::bus::BusError;
use crate::frame::FrameError;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("degenerate signal: trace has zero variance")]
    DegenerateSignal,
    #[error(transparent)]
    Approx(#[from] ApproxError),
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error(transparent)]
    Bus(#[from] BusError),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}
