//! Matching pursuit over periodized Gaussian time-frequency atoms.
//!
//! An atom evaluated at module `x` of an `N`-module array is
//!
//! ```text
//! a · g_s(x − p) · cos(2πk x / N + φ),   g_s(u) = Σ_j exp(−π ((u − jN) / s)²)
//! ```
//!
//! The decomposition is greedy. Each iteration scans a discrete dictionary
//! (dyadic scales, integer positions, integer frequencies up to Nyquist),
//! solving phase and amplitude in closed form for every candidate by
//! projecting the residual onto the even/odd pair `g·cos`, `g·sin`. The best
//! candidate is then refined by a pattern search over continuous
//! `(ln s, p, k)`, and the resulting atom is subtracted from the residual.

use std::f64::consts::PI;

use super::{invalid, ApproxError, ShapeVector};

const TWO_PI: f64 = 2.0 * PI;

/// `sqrt(ln(1e12) / π)`: beyond this many scales the Gaussian is below 1e-12.
fn tail_radius() -> f64 {
    (1e12f64.ln() / PI).sqrt()
}

/// Gaussian made periodic on `[0, N)`, truncated once the dropped images
/// fall below 1e-12.
pub fn gaussian_periodized(s: f64, x: f64, n_total: usize) -> Result<f64, ApproxError> {
    if !(s > 0.0) || !s.is_finite() {
        return Err(invalid(format!("scale must be positive, got {s}")));
    }
    if n_total == 0 {
        return Err(invalid("domain must contain at least one module"));
    }
    Ok(periodized(s, x, n_total as f64))
}

fn periodized(s: f64, x: f64, n: f64) -> f64 {
    let images = (s * tail_radius() / n).ceil() as i64 + 1;
    // fold x into [0, N) so the image window is centred on the bulk
    let x = x.rem_euclid(n);
    (-images..=images)
        .map(|j| {
            let u = (x - j as f64 * n) / s;
            (-PI * u * u).exp()
        })
        .sum()
}

/// One time-frequency atom. Construct through [`MpAtom::new`] to keep the
/// position and phase wrapped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MpAtom {
    pub amplitude: f64,
    pub scale: f64,
    pub position: f64,
    pub frequency: f64,
    pub phase: f64,
}

impl MpAtom {
    pub fn new(
        amplitude: f64,
        scale: f64,
        position: f64,
        frequency: f64,
        phase: f64,
        n_total: usize,
    ) -> Result<Self, ApproxError> {
        let fields = [amplitude, scale, position, frequency, phase];
        if fields.iter().any(|v| !v.is_finite()) {
            return Err(invalid("atom fields must be finite"));
        }
        if scale <= 0.0 {
            return Err(invalid(format!("atom scale must be positive, got {scale}")));
        }
        if frequency < 0.0 {
            return Err(invalid(format!("atom frequency must be non-negative, got {frequency}")));
        }
        if n_total == 0 {
            return Err(invalid("domain must contain at least one module"));
        }
        Ok(MpAtom {
            amplitude,
            scale,
            position: wrap(position, n_total as f64),
            frequency,
            phase: wrap(phase, TWO_PI),
        })
    }
}

impl MpAtom {
    /// `|a| · ‖w‖` where `w` is the unit-amplitude atom sampled on the
    /// modules: the coefficient this atom would carry in a unit-norm
    /// dictionary, i.e. the norm it removes from the residual.
    pub fn coefficient(&self, n_total: usize) -> f64 {
        let unit = MpAtom {
            amplitude: 1.0,
            ..*self
        };
        let energy: f64 = (0..n_total)
            .map(|x| atom_eval(&unit, x as f64, n_total).map_or(0.0, |v| v * v))
            .sum();
        self.amplitude.abs() * energy.sqrt()
    }
}

fn wrap(v: f64, period: f64) -> f64 {
    let w = v.rem_euclid(period);
    // rem_euclid can round up to exactly `period` for tiny negative inputs
    if w >= period {
        0.0
    } else {
        w
    }
}

pub fn atom_eval(atom: &MpAtom, x: f64, n_total: usize) -> Result<f64, ApproxError> {
    let g = gaussian_periodized(atom.scale, x - atom.position, n_total)?;
    let n = n_total as f64;
    Ok(atom.amplitude * g * (TWO_PI * atom.frequency * x / n + atom.phase).cos())
}

pub fn mp_eval(atoms: &[MpAtom], x: f64, n_total: usize) -> Result<f64, ApproxError> {
    atoms
        .iter()
        .try_fold(0.0, |acc, a| Ok(acc + atom_eval(a, x, n_total)?))
}

/// Stopping rule and search bounds for [`MatchingPursuit::decompose`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchingPursuit {
    pub max_terms: usize,
    /// Stop once the residual norm drops to `tolerance × initial norm`.
    pub tolerance: f64,
    /// Smallest scale the refinement may reach.
    pub min_scale: f64,
    /// Atoms whose amplitude would exceed this magnitude are not admitted.
    /// Near-degenerate atoms (sampled norm close to zero) otherwise win with
    /// enormous amplitudes that no 16-bit field can carry.
    pub max_amplitude: f64,
    /// How many of the best dictionary candidates get refined.
    pub refine_candidates: usize,
}

impl MatchingPursuit {
    pub fn new(max_terms: usize, tolerance: f64) -> Self {
        MatchingPursuit {
            max_terms,
            tolerance,
            min_scale: 1.0 / 16.0,
            max_amplitude: 2.0,
            refine_candidates: 1,
        }
    }
}

/// Atoms in selection order, plus the residual norm before the first and
/// after every iteration (`residual_norms.len() == atoms.len() + 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub atoms: Vec<MpAtom>,
    pub residual_norms: Vec<f64>,
    pub residual: Vec<f64>,
}

pub fn mp_decompose(
    shape: &ShapeVector,
    max_terms: usize,
    tolerance: f64,
) -> Result<Vec<MpAtom>, ApproxError> {
    Ok(MatchingPursuit::new(max_terms, tolerance).decompose(shape)?.atoms)
}

impl MatchingPursuit {
    pub fn decompose(&self, shape: &ShapeVector) -> Result<Decomposition, ApproxError> {
        let n = shape.len();
        if n == 0 {
            return Err(invalid("cannot decompose an empty shape"));
        }
        if self.max_terms == 0 {
            return Err(invalid("max_terms must be at least 1"));
        }
        if !(self.tolerance >= 0.0) {
            return Err(invalid(format!("tolerance must be non-negative, got {}", self.tolerance)));
        }

        let mut residual = shape.values().to_vec();
        let initial = norm(&residual);
        let mut out = Decomposition {
            atoms: Vec::new(),
            residual_norms: vec![initial],
            residual: Vec::new(),
        };
        let dictionary = Dictionary::new(n);
        let floor = self.tolerance * initial;
        let mut current = initial;

        while out.atoms.len() < self.max_terms && current > floor {
            let Some(fit) = dictionary
                .best_matches(&residual, self.refine_candidates, self.max_amplitude)
                .into_iter()
                .map(|start| self.pursue(&residual, start))
                .reduce(|a, b| if b.projection > a.projection { b } else { a })
            else {
                break;
            };
            // nothing left that any atom can see
            if fit.projection <= 1e-14 * initial {
                break;
            }
            let atom = fit.atom(n)?;
            for (x, r) in residual.iter_mut().enumerate() {
                *r -= fit.amplitude * fit.shape[x];
            }
            current = norm(&residual);
            out.atoms.push(atom);
            out.residual_norms.push(current);
        }
        out.residual = residual;
        Ok(out)
    }

    /// Pattern search on `(ln s, p, k)` that only accepts moves which
    /// increase the projection. Phase and amplitude stay analytic.
    fn pursue(&self, residual: &[f64], start: Fit) -> Fit {
        let n = residual.len() as f64;
        let mut best = start;
        let mut steps = [std::f64::consts::LN_2 / 2.0, 0.5, 0.5];
        let min_step = 1e-4;
        let max_scale = 2.0 * n;
        for _ in 0..500 {
            let mut moved = false;
            for (axis, step) in steps.iter().enumerate() {
                for dir in [1.0, -1.0] {
                    let (mut s, mut p, mut k) = (best.scale, best.position, best.frequency);
                    match axis {
                        0 => s = (s.ln() + dir * step).exp().clamp(self.min_scale, max_scale),
                        1 => p = wrap(p + dir * step, n),
                        _ => k = (k + dir * step).clamp(0.0, n / 2.0),
                    }
                    let trial = Fit::solve(residual, s, p, k);
                    if trial.projection > best.projection
                        && trial.amplitude.abs() <= self.max_amplitude
                    {
                        best = trial;
                        moved = true;
                    }
                }
            }
            if !moved {
                for step in &mut steps {
                    *step /= 2.0;
                }
                if steps.iter().all(|&s| s < min_step) {
                    break;
                }
            }
        }
        best
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Closed-form best atom for fixed `(s, p, k)`.
#[derive(Debug, Clone)]
struct Fit {
    scale: f64,
    position: f64,
    frequency: f64,
    phase: f64,
    amplitude: f64,
    /// `|<r, w>| / ‖w‖`, the norm removed from the residual.
    projection: f64,
    /// Unit-amplitude atom samples `w_x`.
    shape: Vec<f64>,
}

impl Fit {
    fn solve(residual: &[f64], s: f64, p: f64, k: f64) -> Fit {
        let n = residual.len();
        let envelope: Vec<f64> = (0..n)
            .map(|x| periodized(s, x as f64 - p, n as f64))
            .collect();
        Fit::from_envelope(residual, &envelope, s, p, k)
    }

    fn from_envelope(residual: &[f64], envelope: &[f64], s: f64, p: f64, k: f64) -> Fit {
        let n = residual.len();
        let omega = TWO_PI * k / n as f64;
        let even: Vec<f64> = envelope
            .iter()
            .enumerate()
            .map(|(x, g)| g * (omega * x as f64).cos())
            .collect();
        let odd: Vec<f64> = envelope
            .iter()
            .enumerate()
            .map(|(x, g)| g * (omega * x as f64).sin())
            .collect();
        let (ee, oo, eo) = (dot(&even, &even), dot(&odd, &odd), dot(&even, &odd));
        let (be, bo) = (dot(residual, &even), dot(residual, &odd));

        // Coefficients (ce, co) of the best direction ce·even + co·odd.
        let det = ee * oo - eo * eo;
        let (ce, co) = if oo > 1e-12 * ee && det > 1e-12 * ee * oo {
            ((oo * be - eo * bo) / det, (ee * bo - eo * be) / det)
        } else if ee >= oo && ee > 0.0 {
            (be / ee, 0.0)
        } else if oo > 0.0 {
            (0.0, bo / oo)
        } else {
            (0.0, 0.0)
        };

        // w = cos φ · even − sin φ · odd points along (ce, co).
        let phase = if ce == 0.0 && co == 0.0 {
            0.0
        } else {
            wrap((-co).atan2(ce), TWO_PI)
        };
        let (cos_p, sin_p) = (phase.cos(), phase.sin());
        let shape: Vec<f64> = even
            .iter()
            .zip(&odd)
            .map(|(e, o)| cos_p * e - sin_p * o)
            .collect();
        let ww = dot(&shape, &shape);
        let rw = dot(residual, &shape);
        let (amplitude, projection) = if ww > 0.0 {
            (rw / ww, rw.abs() / ww.sqrt())
        } else {
            (0.0, 0.0)
        };
        Fit {
            scale: s,
            position: p,
            frequency: k,
            phase,
            amplitude,
            projection,
            shape,
        }
    }

    fn atom(&self, n: usize) -> Result<MpAtom, ApproxError> {
        MpAtom::new(
            self.amplitude,
            self.scale,
            self.position,
            self.frequency,
            self.phase,
            n,
        )
    }
}

/// Precomputed envelopes for the discrete matching step.
struct Dictionary {
    n: usize,
    /// (scale, position, envelope samples)
    envelopes: Vec<(f64, f64, Vec<f64>)>,
}

impl Dictionary {
    fn new(n: usize) -> Self {
        let mut scales = Vec::new();
        let mut s = 1usize;
        while s < n {
            scales.push(s as f64);
            s *= 2;
        }
        scales.push(n as f64);
        let envelopes = scales
            .iter()
            .flat_map(|&s| (0..n).map(move |p| (s, p as f64)))
            .map(|(s, p)| {
                let env = (0..n)
                    .map(|x| periodized(s, x as f64 - p, n as f64))
                    .collect();
                (s, p, env)
            })
            .collect();
        Dictionary { n, envelopes }
    }

    /// The `count` admissible candidates with the largest projections, best
    /// first; ties keep scan order (scale, position, frequency).
    fn best_matches(&self, residual: &[f64], count: usize, max_amplitude: f64) -> Vec<Fit> {
        let mut fits: Vec<Fit> = self
            .envelopes
            .iter()
            .flat_map(|(s, p, env)| {
                (0..=self.n / 2).map(move |k| Fit::from_envelope(residual, env, *s, *p, k as f64))
            })
            .filter(|f| f.amplitude.abs() <= max_amplitude)
            .collect();
        fits.sort_by(|a, b| b.projection.total_cmp(&a.projection));
        fits.truncate(count.max(1));
        fits
    }
}
