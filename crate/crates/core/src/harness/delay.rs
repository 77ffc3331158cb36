use std::f64::consts::PI;

use super::xcorr::xcorr_delay_within;
use super::HarnessError;
use crate::approx::{quarter_wavevector, DctTerm, FunctionForm, WavePair};
use crate::bus::{schedule, BusConfig, BusMode, Timeline};
use crate::frame::{encode_seq_ref, encode_term, Frame};
use crate::module_sim::{MotorParams, Robot};

/// Default number of delay values averaged per binary-toggle cell.
pub const BINARY_REPLICATES: usize = 20;
/// Default number of delay values averaged per traveling-wave cell.
pub const WAVE_REPLICATES: usize = 6;

#[derive(Debug, Clone, PartialEq)]
pub struct DelayResult {
    pub n: usize,
    pub t_msg_ms: u64,
    pub method: FunctionForm,
    pub tau_measured_ms: f64,
    pub tau_predicted_ms: f64,
    pub replicates: usize,
    /// Individual delay values behind the mean.
    pub samples: Vec<f64>,
}

fn mode_for(method: FunctionForm, broadcast_form: FunctionForm) -> Result<BusMode, HarnessError> {
    match method {
        FunctionForm::Seq => Ok(BusMode::Sequential),
        m if m == broadcast_form => Ok(BusMode::Broadcast),
        m => Err(HarnessError::InvalidInput(format!(
            "method `{m}` not available here (use seq or {broadcast_form})"
        ))),
    }
}

fn check(n: usize, t_msg_ms: u64, replicates: usize) -> Result<(), HarnessError> {
    if n < 2 {
        return Err(HarnessError::InvalidInput(format!("need at least 2 modules, got {n}")));
    }
    if t_msg_ms == 0 || replicates == 0 {
        return Err(HarnessError::InvalidInput("t_msg and replicates must be positive".into()));
    }
    Ok(())
}

/// How long each uniform pattern is held: long enough for a full sequential
/// refresh to finish well inside the half cycle.
pub fn toggle_hold_ms(n: usize, t_msg_ms: u64) -> u64 {
    (2 * n as u64 * t_msg_ms).max(50)
}

/// First/last module traces after running `timeline` to `horizon`.
fn edge_traces(
    n: usize,
    timeline: &Timeline<Frame>,
    horizon: u64,
    pick: impl Fn(&crate::module_sim::TraceSample) -> f64,
) -> Result<(Vec<f64>, Vec<f64>), HarnessError> {
    let mut robot = Robot::linear(n, MotorParams::default())?;
    robot.run(timeline, horizon - 1)?;
    let modules = robot.into_modules();
    let trace = |i: usize| modules[i].trace.iter().map(&pick).collect::<Vec<f64>>();
    Ok((trace(0), trace(n - 1)))
}

fn windowed_delays(
    a: &[f64],
    b: &[f64],
    starts: impl Iterator<Item = u64>,
    window: u64,
    max_lag: u64,
) -> Result<Vec<f64>, HarnessError> {
    starts
        .map(|s| {
            let r = s as usize..(s + window) as usize;
            xcorr_delay_within(&a[r.clone()], &b[r], 1.0, max_lag as usize)
        })
        .collect()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Refreshes the robot between `{f_n = 0}` and `{f_n = 1}` and measures the
/// delay between the first and last module inputs.
///
/// `method` is `Seq` (addressed heights) or `Dct` (broadcast DC steps).
pub fn run_delay_binary(
    n: usize,
    t_msg_ms: u64,
    method: FunctionForm,
    replicates: usize,
) -> Result<DelayResult, HarnessError> {
    check(n, t_msg_ms, replicates)?;
    let mode = mode_for(method, FunctionForm::Dct)?;
    let params = MotorParams::default();
    let ctx = crate::frame::FrameContext::new(n, params.stroke_mm);
    let config = BusConfig::new(t_msg_ms, mode)?;
    let hold = toggle_hold_ms(n, t_msg_ms);
    let cycle = 2 * hold;
    let toggles = 2 * (replicates as u64 + 2);
    let start = hold;

    let mut timeline = Timeline::empty();
    for k in 0..toggles {
        let high = k % 2 == 0;
        let frames = match mode {
            BusMode::Broadcast => {
                let step = if high { 1.0 } else { -1.0 };
                vec![encode_term(&DctTerm { index: 0, amplitude: step }.into(), &ctx)?]
            }
            BusMode::Sequential => {
                let h = if high { params.stroke_mm } else { 0.0 };
                (0..n)
                    .map(|m| encode_seq_ref(m, h, &ctx))
                    .collect::<Result<Vec<_>, _>>()?
            }
        };
        timeline = timeline.merge(schedule(&frames, config, start + k * hold)?)?;
    }
    let horizon = start + toggles * hold;
    let (a, b) = edge_traces(n, &timeline, horizon, |s| s.target_f)?;
    let samples = windowed_delays(
        &a,
        &b,
        // windows open mid-hold so no edge sits on a window boundary
        (0..replicates as u64).map(|r| start + hold / 2 + r * cycle),
        2 * cycle,
        hold,
    )?;
    let tau_predicted_ms = match mode {
        BusMode::Broadcast => 0.0,
        BusMode::Sequential => ((n - 1) as u64 * t_msg_ms) as f64,
    };
    Ok(DelayResult {
        n,
        t_msg_ms,
        method,
        tau_measured_ms: mean(&samples),
        tau_predicted_ms,
        replicates,
        samples,
    })
}

/// Drives the quarter-wave `f_n = sin(k_N n − v t)` with `v = 2π / T` and
/// measures the delay between first and last module positions. See
/// [`wave_timeline`] for the two methods.
pub fn run_delay_wave(
    n: usize,
    t_msg_ms: u64,
    method: FunctionForm,
    period_ms: u64,
    replicates: usize,
) -> Result<DelayResult, HarnessError> {
    check(n, t_msg_ms, replicates)?;
    let warmup = period_ms;
    let window = 2 * period_ms;
    let horizon = warmup + (replicates as u64 + 1) * period_ms;
    let timeline = wave_timeline(n, t_msg_ms, method, period_ms, horizon)?;
    let mode = mode_for(method, FunctionForm::Wave)?;
    let (a, b) = edge_traces(n, &timeline, horizon, |s| s.position)?;
    let samples = windowed_delays(
        &a,
        &b,
        (0..replicates as u64).map(|r| warmup + r * period_ms),
        window,
        period_ms / 2,
    )?;
    let quarter = period_ms as f64 / 4.0;
    let tau_predicted_ms = match mode {
        BusMode::Broadcast => quarter,
        BusMode::Sequential => quarter + ((n - 1) as u64 * t_msg_ms) as f64,
    };
    Ok(DelayResult {
        n,
        t_msg_ms,
        method,
        tau_measured_ms: mean(&samples),
        tau_predicted_ms,
        replicates,
        samples,
    })
}

/// Frames driving the quarter-wave `f_n = sin(k_N n − v t)`, `v = 2π / T`,
/// from time 0 until `horizon_ms`.
///
/// `Wave` broadcasts one coefficient frame per slot; `Seq` sends one sweep
/// of addressed heights per refresh, clamped to the stroke.
pub fn wave_timeline(
    n: usize,
    t_msg_ms: u64,
    method: FunctionForm,
    period_ms: u64,
    horizon_ms: u64,
) -> Result<Timeline<Frame>, HarnessError> {
    check(n, t_msg_ms, 1)?;
    if period_ms < 4 {
        return Err(HarnessError::InvalidInput(format!("period {period_ms} ms is too short")));
    }
    let mode = mode_for(method, FunctionForm::Wave)?;
    let params = MotorParams::default();
    let ctx = crate::frame::FrameContext::new(n, params.stroke_mm);
    let config = BusConfig::new(t_msg_ms, mode)?;
    let omega = 2.0 * PI / period_ms as f64;
    let slots = horizon_ms.div_ceil(t_msg_ms);
    let frames = match mode {
        BusMode::Broadcast => (0..slots)
            .map(|j| {
                let t = (j * t_msg_ms) as f64;
                encode_term(&WavePair::traveling(n, omega, t).into(), &ctx)
            })
            .collect::<Result<Vec<_>, _>>()?,
        BusMode::Sequential => {
            let k = quarter_wavevector(n);
            let sweeps = slots.div_ceil(n as u64);
            (0..sweeps)
                .flat_map(|s| {
                    let t = (s * n as u64 * t_msg_ms) as f64;
                    (0..n).map(move |m| {
                        let f = (k * m as f64 - omega * t).sin();
                        encode_seq_ref(m, (f * params.stroke_mm).clamp(0.0, params.stroke_mm), &ctx)
                    })
                })
                .collect::<Result<Vec<_>, _>>()?
        }
    };
    Ok(schedule(&frames, config, 0)?)
}

/// Least-squares slope of `y` against `x`.
pub fn fit_slope(points: &[(f64, f64)]) -> Result<f64, HarnessError> {
    if points.len() < 2 {
        return Err(HarnessError::InvalidInput("slope needs two points".into()));
    }
    let m = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / m;
    let my = points.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(HarnessError::InvalidInput("all x values equal".into()));
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Ok(sxy / sxx)
}
