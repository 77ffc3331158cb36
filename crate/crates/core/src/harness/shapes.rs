use std::collections::VecDeque;

use rand::SeedableRng;
use rand_distr::{Distribution, Normal};
use rand_xoshiro::Xoshiro256PlusPlus;

use super::HarnessError;
use crate::approx::{
    builtin_shape, dct_forward, flatten, order_terms, relative_error, scale_to_stroke, ApproxPlan,
    BuiltinShape, FunctionForm, MatchingPursuit, SeqRef, ShapeVector, Term,
};
use crate::frame::{decode_frame, encode_any};
use crate::module_sim::{MotorParams, Robot};

/// Positions count as settled once every module stays within this band...
pub const SETTLE_BAND_MM: f64 = 0.05;
/// ...for this long after the latest frame.
pub const SETTLE_WINDOW_MS: u64 = 100;
/// Give up waiting for a settled surface after this long.
pub const SETTLE_CAP_MS: u64 = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct ShapeConfig {
    pub method: FunctionForm,
    pub quantized: bool,
    /// Frames to send; `None` sends the whole plan.
    pub max_terms: Option<usize>,
    /// Seed of the `random` shape and of measurement noise.
    pub seed: u64,
    /// Runs averaged per point. Without noise every run is identical, so
    /// only one is simulated.
    pub replicates: usize,
    /// Standard deviation of simulated height readings in mm.
    pub noise_mm: Option<f64>,
    pub params: MotorParams,
}

impl ShapeConfig {
    pub fn new(method: FunctionForm) -> Self {
        ShapeConfig {
            method,
            quantized: false,
            max_terms: None,
            seed: 0,
            replicates: 6,
            noise_mm: None,
            params: MotorParams::default(),
        }
    }

    pub fn quantized(mut self, on: bool) -> Self {
        self.quantized = on;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub terms_used: usize,
    /// Settled surface against the target.
    pub rel_error: f64,
    /// Accumulated module inputs against the target, before any stroke
    /// clamping or motion.
    pub commanded_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorCurve {
    pub shape: BuiltinShape,
    pub method: FunctionForm,
    pub quantized: bool,
    pub replicates: usize,
    pub points: Vec<CurvePoint>,
}

impl ErrorCurve {
    /// Fewest frames after which the settled error is at most `level`.
    pub fn terms_to_reach(&self, level: f64) -> Option<usize> {
        self.points
            .iter()
            .find(|p| p.rel_error <= level)
            .map(|p| p.terms_used)
    }

    pub fn at(&self, terms_used: usize) -> Option<&CurvePoint> {
        self.points.iter().find(|p| p.terms_used == terms_used)
    }
}

/// Target surface in stroke units (0 bottom, 1 top), flattened row-major.
pub fn shape_target(shape: BuiltinShape, seed: u64) -> (usize, usize, ShapeVector) {
    let grid = scale_to_stroke(&builtin_shape(shape, seed), 1.0);
    (grid.rows(), grid.cols(), flatten(&grid))
}

/// Ordered terms that build `target` from a level surface at half stroke.
pub fn shape_plan(
    target: &ShapeVector,
    method: FunctionForm,
    max_terms: Option<usize>,
    stroke_mm: f64,
) -> Result<ApproxPlan, HarnessError> {
    let n = target.len();
    let limit = max_terms.unwrap_or(n);
    let baseline = stroke_mm / 2.0;
    let terms: Vec<Term> = match method {
        FunctionForm::Dct => dct_forward(target)?.into_iter().map(Term::from).collect(),
        FunctionForm::Mp => MatchingPursuit::new(limit, 0.0)
            .decompose(target)?
            .atoms
            .into_iter()
            .map(Term::from)
            .collect(),
        FunctionForm::Seq => target
            .values()
            .iter()
            .enumerate()
            .map(|(module, v)| {
                SeqRef {
                    module,
                    height: v * stroke_mm,
                }
                .into()
            })
            .collect(),
        other => {
            return Err(HarnessError::InvalidInput(format!(
                "shape scans support seq, dct and mp, not {other}"
            )))
        }
    };
    let mut plan = order_terms(ApproxPlan::new(method, terms, n)?.with_baseline(baseline));
    plan.terms.truncate(limit);
    Ok(plan)
}

/// Starts level at half stroke, sends the plan one frame at a time and
/// records the relative error after the surface settles each time.
pub fn run_shape_experiment(shape: BuiltinShape, config: &ShapeConfig) -> Result<ErrorCurve, HarnessError> {
    if config.replicates == 0 {
        return Err(HarnessError::InvalidInput("replicates must be positive".into()));
    }
    let params = config.params;
    let (rows, cols, target) = shape_target(shape, config.seed);
    let plan = shape_plan(&target, config.method, config.max_terms, params.stroke_mm)?;

    let mut robot = Robot::grid(rows, cols, params)?.with_recording(false);
    let ctx = *robot.context();
    let payloads: Vec<Term> = plan
        .terms
        .iter()
        .map(|t| {
            if config.quantized {
                Ok(decode_frame(&encode_any(t, &ctx)?, &ctx)?)
            } else {
                Ok(*t)
            }
        })
        .collect::<Result<_, HarnessError>>()?;

    let initial = ShapeVector::constant(target.len(), 0.5);
    let runs = if config.noise_mm.is_some() { config.replicates } else { 1 };
    let mut readers: Vec<Reader> = (0..runs)
        .map(|r| Reader::new(config.noise_mm, config.seed.wrapping_add(r as u64)))
        .collect::<Result<_, _>>()?;

    let mut points = Vec::with_capacity(payloads.len() + 1);
    robot.level(0.5);
    let mut record = |robot: &Robot, terms_used: usize| -> Result<(), HarnessError> {
        let commanded = ShapeVector::new(robot.targets())?;
        let mut measured = 0.0;
        for reader in &mut readers {
            let heights = reader.read(robot, params.stroke_mm)?;
            measured += relative_error(&heights, &target, &initial)?;
        }
        points.push(CurvePoint {
            terms_used,
            rel_error: measured / runs as f64,
            commanded_error: relative_error(&commanded, &target, &initial)?,
        });
        Ok(())
    };
    record(&robot, 0)?;
    for (i, term) in payloads.iter().enumerate() {
        // additive forms start accumulating from zero with the first frame
        if i == 0 && config.method != FunctionForm::Seq {
            robot.reset_targets(0.0);
        }
        robot.broadcast(term)?;
        settle(&mut robot);
        record(&robot, i + 1)?;
    }
    Ok(ErrorCurve {
        shape,
        method: config.method,
        quantized: config.quantized,
        replicates: runs,
        points,
    })
}

/// Ticks until every position has stayed within the settle band for the
/// settle window, or the cap runs out.
fn settle(robot: &mut Robot) {
    let period = robot.params().pid_period_ms;
    let start = robot.time_ms();
    let mut window: VecDeque<(u64, Vec<f64>)> = VecDeque::new();
    while robot.time_ms() - start < SETTLE_CAP_MS {
        robot.tick();
        let now = robot.time_ms();
        if !now.is_multiple_of(period) {
            continue;
        }
        window.push_back((now, robot.positions()));
        while window.front().is_some_and(|(t, _)| now - t > SETTLE_WINDOW_MS) {
            window.pop_front();
        }
        if now - start < SETTLE_WINDOW_MS {
            continue;
        }
        let current = &window.back().expect("just pushed").1;
        let still = window.iter().all(|(_, p)| {
            p.iter()
                .zip(current)
                .all(|(a, b)| (a - b).abs() <= SETTLE_BAND_MM)
        });
        if still {
            return;
        }
    }
}

/// Height readout in stroke units, optionally with Gaussian noise.
struct Reader {
    noise: Option<(Normal<f64>, Xoshiro256PlusPlus)>,
}

impl Reader {
    fn new(sigma_mm: Option<f64>, seed: u64) -> Result<Self, HarnessError> {
        let noise = match sigma_mm {
            Some(s) => Some((
                Normal::new(0.0, s).map_err(|e| HarnessError::InvalidInput(format!("noise {s}: {e}")))?,
                Xoshiro256PlusPlus::seed_from_u64(seed),
            )),
            None => None,
        };
        Ok(Reader { noise })
    }

    fn read(&mut self, robot: &Robot, stroke_mm: f64) -> Result<ShapeVector, HarnessError> {
        let values = robot
            .positions()
            .into_iter()
            .map(|p| {
                let p = match &mut self.noise {
                    Some((d, rng)) => p + d.sample(rng),
                    None => p,
                };
                p / stroke_mm
            })
            .collect();
        Ok(ShapeVector::new(values)?)
    }
}
