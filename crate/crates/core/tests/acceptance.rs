//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the process fails if any criterion fails.

use std::time::{Duration, Instant};

use pinsim::approx::{
    builtin_shape, dct_eval, dct_forward, flatten, mp_eval, scale_to_stroke, BuiltinShape,
    FunctionForm, MatchingPursuit, MpAtom, ShapeVector, Term,
};
use pinsim::bus::{schedule, BusConfig, BusMode};
use pinsim::frame::{decode_frame, encode_term, FieldKind, FrameContext};
use pinsim::harness::{
    fit_slope, run_delay_binary, run_delay_wave, run_manipulation, run_shape_experiment,
    ErrorCurve, ShapeConfig, TrajectoryScript, BINARY_REPLICATES, WAVE_REPLICATES,
};
use pinsim::module_sim::{run_robot, MotorParams, Robot};
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

// criterion 1
const C1_NS: [usize; 4] = [2, 4, 8, 16];
const C1_TMSG: [u64; 3] = [5, 10, 20];
const C1_BROADCAST_MAX_MS: f64 = 1.0;
const C1_SEQ_TOL_MS: f64 = 1.0;
const C1_SEQ_SLOPE_REL: f64 = 0.05;
const C1_BROADCAST_SLOPE_MAX: f64 = 1.0;
const C1_BUDGET: Duration = Duration::from_secs(10);
// criterion 2
const C2_PERIOD_MS: u64 = 3000;
const C2_TMSG: u64 = 5;
const C2_REL_TOL: f64 = 0.02;
const C2_BUDGET: Duration = Duration::from_secs(60);
// criterion 3
const C3_PEAK_LEVEL: f64 = 0.01;
const C3_PARABOLA_LEVEL: f64 = 0.20;
const C3_PARABOLA_SEQ: usize = 11;
const C3_PARABOLA_MP: usize = 6;
const C3_PARABOLA_DCT: usize = 7;
const C3_BUDGET: Duration = Duration::from_secs(120);
// criterion 4
const C4_UNQUANTIZED_MAX: f64 = 1e-6;
const C4_FLOOR_MIN: f64 = 1e-4;
const C4_TERMS: usize = 16;
// criterion 5
const C5_DCT_TOL: f64 = 1e-9;
const C5_MP_RECOVERY: f64 = 1e-6;
const C5_STROKE_MM: f64 = 70.0;
const C5_MAX_STEP_MM: f64 = 125.0 * 0.016;
// criterion 6
const C6_DURATION_S: f64 = 2.0;
const C6_SPEED_MM_S: f64 = 100.0;
const C6_SPEED_REL_TOL: f64 = 0.02;
const C6_RATE_HZ: f64 = 60.0;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut bad = Vec::new();
    let mut worst_b: f64 = 0.0;
    let mut worst_s: f64 = 0.0;
    for &t in &C1_TMSG {
        let mut b_pts = Vec::new();
        let mut s_pts = Vec::new();
        for &n in &C1_NS {
            let b = run_delay_binary(n, t, FunctionForm::Dct, BINARY_REPLICATES).unwrap();
            let s = run_delay_binary(n, t, FunctionForm::Seq, BINARY_REPLICATES).unwrap();
            let pred = ((n - 1) as u64 * t) as f64;
            worst_b = worst_b.max(b.tau_measured_ms.abs());
            worst_s = worst_s.max((s.tau_measured_ms - pred).abs());
            if b.tau_measured_ms.abs() > C1_BROADCAST_MAX_MS {
                bad.push(format!("broadcast n={n} t={t}: {:.3}", b.tau_measured_ms));
            }
            if (s.tau_measured_ms - pred).abs() > C1_SEQ_TOL_MS {
                bad.push(format!("seq n={n} t={t}: {:.3} vs {pred}", s.tau_measured_ms));
            }
            b_pts.push((n as f64, b.tau_measured_ms));
            s_pts.push((n as f64, s.tau_measured_ms));
        }
        let bs = fit_slope(&b_pts).unwrap();
        let ss = fit_slope(&s_pts).unwrap();
        if bs.abs() >= C1_BROADCAST_SLOPE_MAX {
            bad.push(format!("broadcast slope {bs:.4} at t={t}"));
        }
        if (ss - t as f64).abs() > C1_SEQ_SLOPE_REL * t as f64 {
            bad.push(format!("seq slope {ss:.4} at t={t}"));
        }
    }
    let elapsed = start.elapsed();
    if elapsed >= C1_BUDGET {
        bad.push(format!("took {elapsed:?}"));
    }
    outcome(
        bad.is_empty(),
        format!(
            "worst broadcast |tau| {worst_b:.3} ms, worst seq error {worst_s:.3} ms, {elapsed:.2?} {}",
            bad.join("; ")
        ),
    )
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut bad = Vec::new();
    let mut worst: f64 = 0.0;
    for n in 2..=16 {
        for method in [FunctionForm::Wave, FunctionForm::Seq] {
            let r = run_delay_wave(n, C2_TMSG, method, C2_PERIOD_MS, WAVE_REPLICATES).unwrap();
            let want = match method {
                FunctionForm::Seq => 750.0 + (C2_TMSG * (n as u64 - 1)) as f64,
                _ => 750.0,
            };
            let rel = (r.tau_measured_ms - want).abs() / want;
            worst = worst.max(rel);
            if rel > C2_REL_TOL {
                bad.push(format!("{method} n={n}: {:.2} vs {want}", r.tau_measured_ms));
            }
        }
    }
    let elapsed = start.elapsed();
    if elapsed >= C2_BUDGET {
        bad.push(format!("took {elapsed:?}"));
    }
    outcome(
        bad.is_empty(),
        format!("worst relative error {:.3}%, {elapsed:.2?} {}", worst * 100.0, bad.join("; ")),
    )
}

fn sweep() -> (Vec<ErrorCurve>, Duration) {
    let start = Instant::now();
    let mut curves = Vec::new();
    for shape in BuiltinShape::ALL {
        for method in [FunctionForm::Seq, FunctionForm::Dct, FunctionForm::Mp] {
            for q in [false, true] {
                curves.push(run_shape_experiment(shape, &ShapeConfig::new(method).quantized(q)).unwrap());
            }
        }
    }
    (curves, start.elapsed())
}

fn find(curves: &[ErrorCurve], shape: BuiltinShape, method: FunctionForm, quantized: bool) -> &ErrorCurve {
    curves
        .iter()
        .find(|c| c.shape == shape && c.method == method && c.quantized == quantized)
        .unwrap()
}

fn criterion_3(curves: &[ErrorCurve], elapsed: Duration) -> Outcome {
    let mut bad = Vec::new();
    let peak_mp = find(curves, BuiltinShape::Peak, FunctionForm::Mp, false);
    let e1 = peak_mp.at(1).map_or(f64::INFINITY, |p| p.rel_error);
    if e1 >= C3_PEAK_LEVEL {
        bad.push(format!("peak mp after 1 term {e1:.4}"));
    }
    let peak_dct = find(curves, BuiltinShape::Peak, FunctionForm::Dct, false);
    let first_dct = peak_dct.points.iter().find(|p| p.rel_error < C3_PEAK_LEVEL).map(|p| p.terms_used);
    if first_dct != Some(16) {
        bad.push(format!("peak dct first below 1% at {first_dct:?}"));
    }
    let mut reached = Vec::new();
    for (method, limit) in [
        (FunctionForm::Seq, C3_PARABOLA_SEQ),
        (FunctionForm::Mp, C3_PARABOLA_MP),
        (FunctionForm::Dct, C3_PARABOLA_DCT),
    ] {
        let at = find(curves, BuiltinShape::Parabola, method, false).terms_to_reach(C3_PARABOLA_LEVEL);
        reached.push(format!("{method}@{at:?}"));
        if at.is_none_or(|k| k > limit) {
            bad.push(format!("parabola {method} reaches 20% at {at:?}, limit {limit}"));
        }
    }
    if elapsed >= C3_BUDGET {
        bad.push(format!("sweep took {elapsed:?}"));
    }
    outcome(
        bad.is_empty(),
        format!(
            "peak mp@1 {e1:.2e}, peak dct <1% first at {first_dct:?}, parabola {}, sweep {elapsed:.2?} {}",
            reached.join(" "),
            bad.join("; ")
        ),
    )
}

fn criterion_4(curves: &[ErrorCurve]) -> Outcome {
    let mut bad = Vec::new();
    let mut summary = Vec::new();
    for shape in [BuiltinShape::Parabola, BuiltinShape::Checkers, BuiltinShape::Random] {
        let exact = find(curves, shape, FunctionForm::Mp, false);
        let quant = find(curves, shape, FunctionForm::Mp, true);
        let e16 = exact.at(C4_TERMS).map_or(f64::INFINITY, |p| p.commanded_error);
        let floor = quant.points.last().unwrap().commanded_error;
        summary.push(format!("{}: exact@16 {e16:.2e} floor {floor:.2e}", shape.name()));
        if e16 >= C4_UNQUANTIZED_MAX {
            bad.push(format!("{} unquantized error at 16 terms {e16:.2e}", shape.name()));
        }
        if floor < C4_FLOOR_MIN {
            bad.push(format!("{} quantized floor {floor:.2e}", shape.name()));
        }
        for (q, e) in quant.points.iter().zip(&exact.points) {
            if q.commanded_error < e.commanded_error {
                bad.push(format!(
                    "{} quantized below exact at {} terms",
                    shape.name(),
                    q.terms_used
                ));
            }
        }
    }
    outcome(bad.is_empty(), format!("{} {}", summary.join(", "), bad.join("; ")))
}

fn criterion_5() -> Outcome {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(5);
    let mut bad = Vec::new();

    for _ in 0..200 {
        let n = rng.gen_range(1..=64);
        let values: Vec<f64> = (0..n).map(|_| rng.gen_range(-50.0..50.0)).collect();
        let scale = values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let terms = dct_forward(&ShapeVector::new(values.clone()).unwrap()).unwrap();
        for (x, v) in values.iter().enumerate() {
            if (dct_eval(&terms, x, n).unwrap() - v).abs() > C5_DCT_TOL * scale {
                bad.push(format!("dct round trip n={n} x={x}"));
            }
        }
    }

    for seed in 0..4 {
        for shape in BuiltinShape::ALL {
            let v = flatten(&scale_to_stroke(&builtin_shape(shape, seed), 1.0));
            let d = MatchingPursuit::new(16, 0.0).decompose(&v).unwrap();
            if d.residual_norms.windows(2).any(|w| w[1] > w[0]) {
                bad.push(format!("mp residual grew on {}", shape.name()));
            }
        }
    }
    let atom = MpAtom::new(1.5, 4.0, 8.0, 2.0, 0.7, 16).unwrap();
    let shape = ShapeVector::new((0..16).map(|x| mp_eval(&[atom], x as f64, 16).unwrap()).collect()).unwrap();
    let d = MatchingPursuit::new(16, 0.0).decompose(&shape).unwrap();
    let rel = d.residual_norms.get(1).copied().unwrap_or(f64::INFINITY) / d.residual_norms[0];
    if rel >= C5_MP_RECOVERY {
        bad.push(format!("single atom residual {rel:.2e}"));
    }

    let ctx = FrameContext::new(16, C5_STROKE_MM);
    let spec = ctx.spec();
    for _ in 0..1000 {
        let a = MpAtom::new(
            rng.gen_range(-2.5..2.5),
            rng.gen_range(0.01..40.0),
            rng.gen_range(-16.0..32.0),
            rng.gen_range(0.0..9.0),
            rng.gen_range(-7.0..7.0),
            16,
        )
        .unwrap();
        let back = match decode_frame(&encode_term(&a.into(), &ctx).unwrap(), &ctx).unwrap() {
            Term::Mp(b) => b,
            other => panic!("{other:?}"),
        };
        for (field, orig, got) in [
            (spec.mp_amplitude, a.amplitude, back.amplitude),
            (spec.mp_scale, a.scale, back.scale),
            (spec.mp_position, a.position, back.position),
            (spec.mp_frequency, a.frequency, back.frequency),
            (spec.mp_phase, a.phase, back.phase),
        ] {
            let mut diff = (got - field.clamp(orig)).abs();
            if field.kind == FieldKind::Periodic {
                diff = diff.min(field.max - field.min - diff);
            }
            if diff > field.step() / 2.0 + 1e-12 {
                bad.push(format!("frame field error {diff:.3e} > half step {:.3e}", field.step() / 2.0));
            }
        }
    }

    let params = MotorParams::default();
    let mut robot = Robot::linear(16, params).unwrap();
    for k in 0..60 {
        let term: Term = pinsim::approx::DctTerm {
            index: rng.gen_range(0..16),
            amplitude: rng.gen_range(-2.0..2.0),
        }
        .into();
        if k % 7 == 0 {
            robot.reset_targets(rng.gen_range(0.0..1.0));
        }
        robot.broadcast(&term).unwrap();
        for _ in 0..rng.gen_range(1..200) {
            robot.tick();
        }
    }
    for m in robot.modules() {
        let mut prev: Option<f64> = None;
        for s in m.trace.iter().filter(|s| s.time_ms % params.pid_period_ms == 0) {
            if !(0.0..=C5_STROKE_MM).contains(&s.position) {
                bad.push(format!("position {} outside stroke", s.position));
            }
            if prev.is_some_and(|p| (s.position - p).abs() > C5_MAX_STEP_MM + 1e-12) {
                bad.push(format!("step larger than {C5_MAX_STEP_MM} mm"));
            }
            prev = Some(s.position);
        }
    }

    let cfg = BusConfig::new(5, BusMode::Broadcast).unwrap();
    let frames: Vec<Term> = (0..10)
        .map(|i| pinsim::approx::DctTerm { index: i, amplitude: 0.1 }.into())
        .collect();
    let tl = schedule(&frames, cfg, 3).unwrap();
    let states = run_robot(16, &tl, params, 100).unwrap();
    let changes = |i: usize| -> Vec<u64> {
        states[i]
            .trace
            .windows(2)
            .filter(|w| w[0].target_f != w[1].target_f)
            .map(|w| w[1].time_ms)
            .collect()
    };
    let slots: Vec<u64> = tl.events().iter().map(|e| e.arrival_time).collect();
    for i in 0..16 {
        if changes(i).iter().any(|t| !slots.contains(t)) {
            bad.push(format!("module {i} changed outside a broadcast slot"));
        }
    }

    bad.dedup();
    outcome(
        bad.is_empty(),
        format!(
            "dct round trip, mp residuals, frame half-step bound, stroke/speed bounds, broadcast slots; {}",
            bad.join("; ")
        ),
    )
}

fn criterion_6() -> Outcome {
    let mut bad = Vec::new();
    let script = TrajectoryScript::demo();
    let run = run_manipulation(&script, 4, 4).unwrap();
    let tick = 1.0 / C6_RATE_HZ;
    let duration = run.duration_s();
    if (duration - C6_DURATION_S).abs() > tick {
        bad.push(format!("duration {duration}"));
    }
    let speed = run.mean_speed_mm_s();
    if (speed - C6_SPEED_MM_S).abs() > C6_SPEED_REL_TOL * C6_SPEED_MM_S {
        bad.push(format!("speed {speed}"));
    }
    for (cols, rows) in [(4, 4), (2, 3), (8, 8), (16, 16)] {
        let r = run_manipulation(&script, cols, rows).unwrap();
        if r.ticks.iter().any(|t| t.frames != 1) || r.frames_sent() != r.ticks.len() {
            bad.push(format!("{cols}x{rows}: not one frame per tick"));
        }
    }
    outcome(
        bad.is_empty(),
        format!(
            "{} ticks over {duration:.4} s, mean speed {speed:.3} mm/s {}",
            run.ticks.len(),
            bad.join("; ")
        ),
    )
}

fn main() {
    let (curves, sweep_time) = sweep();
    let results = [
        ("1 delay scaling without dynamics", criterion_1()),
        ("2 delay scaling with dynamics", criterion_2()),
        ("3 shape error milestones", criterion_3(&curves, sweep_time)),
        ("4 quantization effect", criterion_4(&curves)),
        ("5 property suites", criterion_5()),
        ("6 manipulation scripting", criterion_6()),
    ];
    let mut failed = 0;
    for (name, o) in &results {
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("[{tag}] criterion {name}: {}", o.detail.trim());
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
