//! Browser bindings. Each exported function returns a JSON string for the
//! page in `www/` to draw; the plain Rust versions are tested natively.

use pinsim::approx::{BuiltinShape, FunctionForm, Term};
use pinsim::frame::{decode_frame, encode_any};
use pinsim::harness::{
    run_delay_wave, run_manipulation, run_shape_experiment, shape_plan, shape_target, wave_timeline,
    HarnessError, ShapeConfig, TrajectoryScript,
};
use pinsim::module_sim::{run_robot, MotorParams, Robot};
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Debug, Serialize)]
pub struct ShapeView {
    pub rows: usize,
    pub cols: usize,
    pub target: Vec<f64>,
    /// Module inputs after `terms` frames, in stroke units.
    pub commanded: Vec<f64>,
    pub terms: usize,
    pub available: usize,
    /// Settled relative error for 0..=available frames.
    pub errors: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct WaveView {
    pub time_ms: Vec<u64>,
    pub first_mm: Vec<f64>,
    pub last_mm: Vec<f64>,
    pub tau_ms: f64,
    pub tau_predicted_ms: f64,
}

#[derive(Debug, Serialize)]
pub struct ManipulationView {
    pub rows: usize,
    pub cols: usize,
    pub rate_hz: f64,
    pub centers: Vec<(f64, f64)>,
    /// Module inputs per tick, row-major.
    pub targets: Vec<Vec<f64>>,
    pub mean_speed_mm_s: f64,
}

fn parse<T: std::str::FromStr>(s: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    s.parse().map_err(|e: T::Err| e.to_string())
}

fn text(e: HarnessError) -> String {
    e.to_string()
}

/// Target surface and the inputs built from its first `terms` frames.
pub fn shape_view(shape: &str, method: &str, terms: usize, quantized: bool, seed: u64) -> Result<ShapeView, String> {
    let shape: BuiltinShape = parse(shape)?;
    let method: FunctionForm = parse(method)?;
    let params = MotorParams::default();
    let (rows, cols, target) = shape_target(shape, seed);
    let plan = shape_plan(&target, method, None, params.stroke_mm).map_err(text)?;
    let terms = terms.min(plan.len());

    let mut robot = Robot::grid(rows, cols, params).map_err(|e| e.to_string())?.with_recording(false);
    let ctx = *robot.context();
    robot.level(0.5);
    if method != FunctionForm::Seq && terms > 0 {
        robot.reset_targets(0.0);
    }
    for t in &plan.terms[..terms] {
        let t: Term = if quantized {
            encode_any(t, &ctx)
                .and_then(|f| decode_frame(&f, &ctx))
                .map_err(|e| e.to_string())?
        } else {
            *t
        };
        robot.broadcast(&t).map_err(|e| e.to_string())?;
    }

    let mut cfg = ShapeConfig::new(method).quantized(quantized);
    cfg.seed = seed;
    let curve = run_shape_experiment(shape, &cfg).map_err(text)?;
    Ok(ShapeView {
        rows,
        cols,
        target: target.values().to_vec(),
        commanded: robot.targets(),
        terms,
        available: plan.len(),
        errors: curve.points.iter().map(|p| p.rel_error).collect(),
    })
}

/// First and last module heights under a traveling quarter-wave.
pub fn wave_view(n: usize, t_msg_ms: u64, method: &str, period_ms: u64) -> Result<WaveView, String> {
    let method: FunctionForm = parse(method)?;
    let horizon = 3 * period_ms;
    let timeline = wave_timeline(n, t_msg_ms, method, period_ms, horizon).map_err(text)?;
    let modules = run_robot(n, &timeline, MotorParams::default(), horizon - 1).map_err(|e| e.to_string())?;
    // every 4th sample is plenty for a plot
    let pick = |i: usize, f: fn(&pinsim::module_sim::TraceSample) -> f64| -> Vec<f64> {
        modules[i].trace.iter().step_by(4).map(f).collect()
    };
    let delay = run_delay_wave(n, t_msg_ms, method, period_ms, 1).map_err(text)?;
    Ok(WaveView {
        time_ms: modules[0].trace.iter().step_by(4).map(|s| s.time_ms).collect(),
        first_mm: pick(0, |s| s.position),
        last_mm: pick(n - 1, |s| s.position),
        tau_ms: delay.tau_measured_ms,
        tau_predicted_ms: delay.tau_predicted_ms,
    })
}

/// Module inputs for one loop of the demo bump on a `cols × rows` array.
pub fn manipulation_view(cols: usize, rows: usize) -> Result<ManipulationView, String> {
    let mut script = TrajectoryScript::demo();
    if (cols, rows) != (4, 4) {
        script.waypoints =
            TrajectoryScript::rectangle(cols, rows, 50.0, 50.0, script.pitch_mm, script.speed_mm_s).waypoints;
    }
    let run = run_manipulation(&script, cols, rows).map_err(text)?;
    Ok(ManipulationView {
        rows,
        cols,
        rate_hz: script.rate_hz,
        centers: run.ticks.iter().map(|t| t.center).collect(),
        mean_speed_mm_s: run.mean_speed_mm_s(),
        targets: run.ticks.into_iter().map(|t| t.targets).collect(),
    })
}

fn json<T: Serialize>(r: Result<T, String>) -> Result<String, JsError> {
    let v = r.map_err(|e| JsError::new(&e))?;
    serde_json::to_string(&v).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen]
pub fn shape_demo(shape: &str, method: &str, terms: usize, quantized: bool, seed: u64) -> Result<String, JsError> {
    json(shape_view(shape, method, terms, quantized, seed))
}

#[wasm_bindgen]
pub fn wave_demo(n: usize, t_msg_ms: u64, method: &str, period_ms: u64) -> Result<String, JsError> {
    json(wave_view(n, t_msg_ms, method, period_ms))
}

#[wasm_bindgen]
pub fn manipulation_demo(cols: usize, rows: usize) -> Result<String, JsError> {
    json(manipulation_view(cols, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_plan_reproduces_target() {
        let v = shape_view("parabola", "dct", 16, false, 0).unwrap();
        assert_eq!((v.rows, v.cols, v.available), (4, 4, 16));
        for (c, t) in v.commanded.iter().zip(&v.target) {
            assert!((c - t).abs() < 1e-9);
        }
        assert_eq!(v.errors.len(), 17);
    }

    #[test]
    fn no_terms_leaves_level_surface() {
        let v = shape_view("peak", "mp", 0, true, 0).unwrap();
        assert!(v.commanded.iter().all(|&c| c == 0.5));
    }

    #[test]
    fn bad_names_are_errors() {
        assert!(shape_view("cube", "dct", 1, false, 0).is_err());
        assert!(shape_view("peak", "fft", 1, false, 0).is_err());
        assert!(wave_view(4, 5, "dct", 3000).is_err());
        assert!(manipulation_view(0, 4).is_err());
    }

    #[test]
    fn wave_traces_line_up() {
        let v = wave_view(4, 5, "wave", 1200).unwrap();
        assert_eq!(v.time_ms.len(), v.first_mm.len());
        assert_eq!(v.time_ms.len(), v.last_mm.len());
        assert!(v.first_mm.iter().chain(&v.last_mm).all(|p| (0.0..=70.0).contains(p)));
        assert_eq!(v.tau_predicted_ms, 300.0);
    }

    #[test]
    fn manipulation_has_a_frame_per_tick() {
        let v = manipulation_view(4, 4).unwrap();
        assert_eq!(v.targets.len(), 120);
        assert_eq!(v.centers.len(), 120);
        assert!(v.targets.iter().all(|t| t.len() == 16));
    }

    #[test]
    fn json_shape() {
        let s = serde_json::to_string(&manipulation_view(2, 3).unwrap()).unwrap();
        assert!(s.starts_with("{\"rows\":3,\"cols\":2"));
    }
}
