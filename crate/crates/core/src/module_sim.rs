//! Actuation modules: input accumulation from received terms and the
//! discrete position loop.

use rand::SeedableRng;
use rand_distr::{Distribution, Normal};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::approx::{atom_eval, Term};
use crate::bus::{deliver, BusError, Payload, Timeline};
use crate::frame::{Frame, FrameContext, FrameError};

/// Stored identifier of one module. The 1-D forms (DCT, MP, WAVE, SEQ) use
/// the flat index `n`; RBF uses the grid coordinates `(x, y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModuleId {
    pub n: usize,
    pub x: f64,
    pub y: f64,
}

impl ModuleId {
    pub fn linear(n: usize) -> Self {
        ModuleId {
            n,
            x: n as f64,
            y: 0.0,
        }
    }

    pub fn grid(n: usize, cols: usize) -> Self {
        ModuleId {
            n,
            x: (n % cols) as f64,
            y: (n / cols) as f64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotorParams {
    pub max_speed_mm_s: f64,
    pub stroke_mm: f64,
    pub pid_period_ms: u64,
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
}

impl Default for MotorParams {
    fn default() -> Self {
        MotorParams {
            max_speed_mm_s: 125.0,
            stroke_mm: 70.0,
            pid_period_ms: 16,
            kp: 20.0,
            ki: 0.0,
            kd: 0.0,
        }
    }
}

impl MotorParams {
    pub fn validate(&self) -> Result<(), BusError> {
        if !(self.max_speed_mm_s > 0.0 && self.stroke_mm > 0.0 && self.pid_period_ms > 0) {
            return Err(BusError::InvalidInput(format!("bad motor parameters {self:?}")));
        }
        Ok(())
    }

    fn dt_s(&self) -> f64 {
        self.pid_period_ms as f64 / 1000.0
    }

    /// Largest displacement in one control period.
    pub fn max_step_mm(&self) -> f64 {
        self.max_speed_mm_s * self.dt_s()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceSample {
    pub time_ms: u64,
    pub target_f: f64,
    /// Reported position in mm (includes measurement noise when enabled).
    pub position: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModuleState {
    pub id: ModuleId,
    /// Accumulated input in stroke units.
    pub target_f: f64,
    pub position: f64,
    pub integrator: f64,
    pub prev_error: f64,
    pub trace: Vec<TraceSample>,
}

impl ModuleState {
    pub fn new(id: ModuleId) -> Self {
        ModuleState {
            id,
            target_f: 0.0,
            position: 0.0,
            integrator: 0.0,
            prev_error: 0.0,
            trace: Vec::new(),
        }
    }

    /// Module resting at `level` (stroke fraction) with a matching target.
    pub fn at_rest(id: ModuleId, level: f64, params: &MotorParams) -> Self {
        let mut s = ModuleState::new(id);
        s.reset_target(level);
        s.position = (level * params.stroke_mm).clamp(0.0, params.stroke_mm);
        s
    }

    pub fn on_frame(&mut self, frame: &Frame, ctx: &FrameContext) -> Result<(), FrameError> {
        let term = crate::frame::decode_frame(frame, ctx)?;
        self.on_term(&term, ctx)
    }

    /// Adds DCT, MP and RBF contributions; WAVE replaces the input and SEQ
    /// replaces it only when addressed to this module.
    pub fn on_term(&mut self, term: &Term, ctx: &FrameContext) -> Result<(), FrameError> {
        let n = self.id.n;
        match term {
            Term::Dct(t) => {
                if t.index >= ctx.n_total || n >= ctx.n_total {
                    return Err(FrameError::Protocol(format!(
                        "DCT mode {} at module {n} with N = {}",
                        t.index, ctx.n_total
                    )));
                }
                self.target_f += t.contribution(n, ctx.n_total);
            }
            Term::Mp(a) => self.target_f += atom_eval(a, n as f64, ctx.n_total)?,
            Term::Rbf(r) => self.target_f += r.eval(self.id.x, self.id.y),
            Term::Wave(w) => self.target_f = w.eval(n as f64),
            Term::Seq(s) => {
                if s.module == n {
                    self.target_f = s.height / ctx.stroke_mm;
                }
            }
        }
        if !self.target_f.is_finite() {
            return Err(FrameError::Protocol("non-finite module input".into()));
        }
        Ok(())
    }

    pub fn reset_target(&mut self, level: f64) {
        self.target_f = level;
        self.integrator = 0.0;
    }

    pub fn target_mm(&self, params: &MotorParams) -> f64 {
        (self.target_f * params.stroke_mm).clamp(0.0, params.stroke_mm)
    }

    /// One control period: saturated PID velocity, integrated and clamped to
    /// the stroke. The integrator holds while the output saturates.
    pub fn pid_step(&mut self, params: &MotorParams) {
        let dt = params.dt_s();
        let error = self.target_mm(params) - self.position;
        let derivative = (error - self.prev_error) / dt;
        let integrator = self.integrator + error * dt;
        let raw = params.kp * error + params.ki * integrator + params.kd * derivative;
        let v = raw.clamp(-params.max_speed_mm_s, params.max_speed_mm_s);
        let unclamped = self.position + v * dt;
        self.position = unclamped.clamp(0.0, params.stroke_mm);
        if v == raw && unclamped == self.position {
            self.integrator = integrator;
        }
        self.prev_error = error;
    }
}

/// All modules on a shared 1 kHz clock.
#[derive(Debug, Clone)]
pub struct Robot {
    modules: Vec<ModuleState>,
    params: MotorParams,
    ctx: FrameContext,
    time_ms: u64,
    record: bool,
    noise: Option<(Normal<f64>, Xoshiro256PlusPlus)>,
}

impl Robot {
    fn from_ids(ids: impl Iterator<Item = ModuleId>, n: usize, params: MotorParams) -> Result<Self, BusError> {
        params.validate()?;
        if n == 0 {
            return Err(BusError::InvalidInput("robot needs at least one module".into()));
        }
        Ok(Robot {
            modules: ids.map(ModuleState::new).collect(),
            params,
            ctx: FrameContext::new(n, params.stroke_mm),
            time_ms: 0,
            record: true,
            noise: None,
        })
    }

    /// `n` modules in a line, identifiers `x = n`.
    pub fn linear(n: usize, params: MotorParams) -> Result<Self, BusError> {
        Self::from_ids((0..n).map(ModuleId::linear), n, params)
    }

    /// `rows × cols` modules, flattened row-major.
    pub fn grid(rows: usize, cols: usize, params: MotorParams) -> Result<Self, BusError> {
        let n = rows * cols;
        Self::from_ids((0..n).map(|i| ModuleId::grid(i, cols)), n, params)
    }

    /// Gaussian position noise on recorded samples only.
    pub fn with_noise(mut self, sigma_mm: f64, seed: u64) -> Result<Self, BusError> {
        let normal = Normal::new(0.0, sigma_mm)
            .map_err(|e| BusError::InvalidInput(format!("noise sigma {sigma_mm}: {e}")))?;
        self.noise = Some((normal, Xoshiro256PlusPlus::seed_from_u64(seed)));
        Ok(self)
    }

    pub fn with_recording(mut self, record: bool) -> Self {
        self.record = record;
        self
    }

    pub fn modules(&self) -> &[ModuleState] {
        &self.modules
    }

    pub fn into_modules(self) -> Vec<ModuleState> {
        self.modules
    }

    pub fn params(&self) -> &MotorParams {
        &self.params
    }

    pub fn context(&self) -> &FrameContext {
        &self.ctx
    }

    pub fn time_ms(&self) -> u64 {
        self.time_ms
    }

    pub fn positions(&self) -> Vec<f64> {
        self.modules.iter().map(|m| m.position).collect()
    }

    pub fn targets(&self) -> Vec<f64> {
        self.modules.iter().map(|m| m.target_f).collect()
    }

    /// Levels every module at `level` (stroke fraction), at rest.
    pub fn level(&mut self, level: f64) {
        let params = self.params;
        for m in &mut self.modules {
            *m = ModuleState {
                trace: std::mem::take(&mut m.trace),
                ..ModuleState::at_rest(m.id, level, &params)
            };
        }
    }

    pub fn reset_targets(&mut self, level: f64) {
        self.modules.iter_mut().for_each(|m| m.reset_target(level));
    }

    /// Applies one term to every module, as a broadcast would.
    pub fn broadcast<P: Payload>(&mut self, payload: &P) -> Result<(), BusError> {
        let term = payload.term(&self.ctx)?;
        for m in &mut self.modules {
            m.on_term(&term, &self.ctx)?;
        }
        Ok(())
    }

    pub fn apply<P: Payload>(&mut self, module: usize, payload: &P) -> Result<(), BusError> {
        let ctx = self.ctx;
        let m = self
            .modules
            .get_mut(module)
            .ok_or_else(|| BusError::InvalidInput(format!("no module {module}")))?;
        m.on_term(&payload.term(&ctx)?, &ctx)?;
        Ok(())
    }

    /// Finishes the current millisecond (control step when due, then a trace
    /// sample) and advances the clock.
    pub fn tick(&mut self) {
        let t = self.time_ms;
        let params = self.params;
        if t.is_multiple_of(params.pid_period_ms) {
            self.modules.iter_mut().for_each(|m| m.pid_step(&params));
        }
        if self.record {
            for m in &mut self.modules {
                let position = match &mut self.noise {
                    Some((dist, rng)) => m.position + dist.sample(rng),
                    None => m.position,
                };
                m.trace.push(TraceSample {
                    time_ms: t,
                    target_f: m.target_f,
                    position,
                });
            }
        }
        self.time_ms += 1;
    }

    /// Replays `timeline` while stepping the clock through `until` inclusive.
    /// Events dated before the current time count as already delivered, so a
    /// long timeline can be run in pieces.
    pub fn run<P: Payload>(&mut self, timeline: &Timeline<P>, until: u64) -> Result<(), BusError> {
        let events = timeline.events();
        let mut next = events.partition_point(|e| e.arrival_time < self.time_ms);
        while self.time_ms <= until {
            while next < events.len() && events[next].arrival_time == self.time_ms {
                self.deliver_event(&events[next])?;
                next += 1;
            }
            self.tick();
        }
        Ok(())
    }

    fn deliver_event<P: Payload>(&mut self, e: &crate::bus::BusEvent<P>) -> Result<(), BusError> {
        let ctx = self.ctx;
        let n = self.modules.len();
        let modules = &mut self.modules;
        deliver(e, n, &mut |_: u64, m: usize, p: &P| {
            modules[m].on_term(&p.term(&ctx)?, &ctx)?;
            Ok(())
        })
    }
}

/// Co-simulates `n` linear modules, starting at 0 mm with zero input, under
/// `timeline` for `horizon_ms` milliseconds.
pub fn run_robot<P: Payload>(
    n: usize,
    timeline: &Timeline<P>,
    params: MotorParams,
    horizon_ms: u64,
) -> Result<Vec<ModuleState>, BusError> {
    let mut robot = Robot::linear(n, params)?;
    if horizon_ms > 0 {
        robot.run(timeline, horizon_ms - 1)?;
    }
    Ok(robot.into_modules())
}
