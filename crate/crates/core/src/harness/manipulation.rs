use super::HarnessError;
use crate::approx::RbfTerm;
use crate::bus::{schedule, BusConfig, BusMode};
use crate::frame::{encode_term, Frame};
use crate::module_sim::{MotorParams, Robot};

/// A Gaussian bump moved at constant speed along a closed polyline.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryScript {
    /// Corners of the loop in module coordinates; the path returns to the
    /// first waypoint.
    pub waypoints: Vec<(f64, f64)>,
    pub rate_hz: f64,
    /// Bump width in module spacings.
    pub sigma: f64,
    /// Bump height in stroke units.
    pub amplitude: f64,
    /// Distance between neighbouring modules.
    pub pitch_mm: f64,
    pub speed_mm_s: f64,
    /// Run length; defaults to one loop.
    pub duration_s: Option<f64>,
}

impl TrajectoryScript {
    /// `width_mm × height_mm` rectangle centred on a `cols × rows` array.
    pub fn rectangle(cols: usize, rows: usize, width_mm: f64, height_mm: f64, pitch_mm: f64, speed_mm_s: f64) -> Self {
        let cx = (cols as f64 - 1.0) / 2.0;
        let cy = (rows as f64 - 1.0) / 2.0;
        let hw = width_mm / pitch_mm / 2.0;
        let hh = height_mm / pitch_mm / 2.0;
        TrajectoryScript {
            waypoints: vec![
                (cx - hw, cy - hh),
                (cx + hw, cy - hh),
                (cx + hw, cy + hh),
                (cx - hw, cy + hh),
            ],
            rate_hz: 60.0,
            sigma: 1.0,
            amplitude: 1.0,
            pitch_mm,
            speed_mm_s,
            duration_s: None,
        }
    }

    /// 20 cm square loop at 10 cm/s over a 4 × 4 array of 85 mm width.
    pub fn demo() -> Self {
        Self::rectangle(4, 4, 50.0, 50.0, 85.0 / 4.0, 100.0)
    }

    fn validate(&self) -> Result<(), HarnessError> {
        let ok = !self.waypoints.is_empty()
            && self.rate_hz > 0.0
            && self.sigma > 0.0
            && self.pitch_mm > 0.0
            && self.speed_mm_s > 0.0
            && self.duration_s.is_none_or(|d| d >= 0.0 && d.is_finite())
            && self.waypoints.iter().all(|(x, y)| x.is_finite() && y.is_finite());
        if ok {
            Ok(())
        } else {
            Err(HarnessError::InvalidInput(format!("bad trajectory script {self:?}")))
        }
    }

    fn segments(&self) -> impl Iterator<Item = ((f64, f64), (f64, f64))> + '_ {
        let n = self.waypoints.len();
        (0..n).map(move |i| (self.waypoints[i], self.waypoints[(i + 1) % n]))
    }

    /// Loop length in mm.
    pub fn path_length_mm(&self) -> f64 {
        self.segments()
            .map(|(a, b)| (b.0 - a.0).hypot(b.1 - a.1))
            .sum::<f64>()
            * self.pitch_mm
    }

    /// Run length (one loop unless overridden), rounded to whole ticks.
    pub fn tick_count(&self) -> usize {
        let duration = self
            .duration_s
            .unwrap_or(self.path_length_mm() / self.speed_mm_s);
        (duration * self.rate_hz).round() as usize
    }

    /// Centre after travelling `s_mm` along the loop.
    pub fn center_at(&self, s_mm: f64) -> (f64, f64) {
        let total = self.path_length_mm();
        if total == 0.0 {
            return self.waypoints[0];
        }
        let mut rest = s_mm.rem_euclid(total) / self.pitch_mm;
        for (a, b) in self.segments() {
            let len = (b.0 - a.0).hypot(b.1 - a.1);
            if rest <= len && len > 0.0 {
                let f = rest / len;
                return (a.0 + f * (b.0 - a.0), a.1 + f * (b.1 - a.1));
            }
            rest -= len;
        }
        self.waypoints[0]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManipulationTick {
    pub time_s: f64,
    /// Commanded bump centre in module coordinates.
    pub center: (f64, f64),
    /// Frames sent for this refresh.
    pub frames: usize,
    /// Module inputs in stroke units, row-major.
    pub targets: Vec<f64>,
    /// Simulated heights in mm at the moment of the refresh.
    pub positions: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManipulationRun {
    pub start_center: (f64, f64),
    pub ticks: Vec<ManipulationTick>,
    pub rows: usize,
    pub cols: usize,
    pub pitch_mm: f64,
}

impl ManipulationRun {
    pub fn duration_s(&self) -> f64 {
        self.ticks.last().map_or(0.0, |t| t.time_s)
    }

    pub fn frames_sent(&self) -> usize {
        self.ticks.iter().map(|t| t.frames).sum()
    }

    /// Length of the polyline through the commanded centres, in mm.
    pub fn commanded_distance_mm(&self) -> f64 {
        let mut prev = self.start_center;
        let mut total = 0.0;
        for t in &self.ticks {
            total += (t.center.0 - prev.0).hypot(t.center.1 - prev.1);
            prev = t.center;
        }
        total * self.pitch_mm
    }

    pub fn mean_speed_mm_s(&self) -> f64 {
        self.commanded_distance_mm() / self.duration_s()
    }
}

/// Renders one loop of `script` on an `n_cols × n_rows` array: one RBF frame
/// is broadcast per tick and replaces the previous bump.
pub fn run_manipulation(script: &TrajectoryScript, n_cols: usize, n_rows: usize) -> Result<ManipulationRun, HarnessError> {
    script.validate()?;
    if n_cols == 0 || n_rows == 0 {
        return Err(HarnessError::InvalidInput("empty module array".into()));
    }
    let mut robot = Robot::grid(n_rows, n_cols, MotorParams::default())?.with_recording(false);
    let ctx = *robot.context();
    let config = BusConfig::new(1, BusMode::Broadcast)?;
    let count = script.tick_count();
    let mut ticks = Vec::with_capacity(count);
    for i in 1..=count {
        let time_s = i as f64 / script.rate_hz;
        let center = script.center_at(script.speed_mm_s * time_s);
        let term = RbfTerm {
            amplitude: script.amplitude,
            width: script.sigma,
            center_x: center.0,
            center_y: center.1,
        };
        let frames: Vec<Frame> = vec![encode_term(&term.into(), &ctx)?];
        let at_ms = (time_s * 1000.0).round() as u64;
        let timeline = schedule(&frames, config, at_ms)?;
        while robot.time_ms() < at_ms {
            robot.tick();
        }
        robot.reset_targets(0.0);
        // deliver this tick's frame without advancing past it
        for e in timeline.events() {
            crate::bus::deliver(e, ctx.n_total, &mut |_: u64, m: usize, f: &Frame| robot.apply(m, f))?;
        }
        ticks.push(ManipulationTick {
            time_s,
            center,
            frames: timeline.len(),
            targets: robot.targets(),
            positions: robot.positions(),
        });
    }
    Ok(ManipulationRun {
        start_center: script.center_at(0.0),
        ticks,
        rows: n_rows,
        cols: n_cols,
        pitch_mm: script.pitch_mm,
    })
}
