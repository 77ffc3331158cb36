use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_xoshiro::SplitMix64;

use super::{invalid, ApproxError};

/// Target heights of a rectangular module array, stored row-major.
///
/// Module `n` sits at column `x = n % cols` and row `y = n / cols`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeGrid {
    rows: usize,
    cols: usize,
    heights: Vec<f64>,
}

impl ShapeGrid {
    pub fn new(rows: usize, cols: usize, heights: Vec<f64>) -> Result<Self, ApproxError> {
        if rows == 0 || cols == 0 {
            return Err(invalid("grid needs at least one row and one column"));
        }
        if heights.len() != rows * cols {
            return Err(invalid(format!(
                "{rows}x{cols} grid needs {} heights, got {}",
                rows * cols,
                heights.len()
            )));
        }
        if heights.iter().any(|h| !h.is_finite()) {
            return Err(invalid("grid heights must be finite"));
        }
        Ok(ShapeGrid {
            rows,
            cols,
            heights,
        })
    }

    /// Builds a grid from `f(x, y)`.
    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self, ApproxError> {
        let heights = (0..rows)
            .flat_map(|y| (0..cols).map(move |x| (x, y)))
            .map(|(x, y)| f(x, y))
            .collect();
        ShapeGrid::new(rows, cols, heights)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.heights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heights.is_empty()
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.heights[y * self.cols + x]
    }

    pub fn heights(&self) -> &[f64] {
        &self.heights
    }

    pub fn min(&self) -> f64 {
        self.heights.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.heights.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Values over modules `0..n`, indexed by the 1-D identifier.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeVector {
    values: Vec<f64>,
}

impl ShapeVector {
    pub fn new(values: Vec<f64>) -> Result<Self, ApproxError> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("shape values must be finite"));
        }
        Ok(ShapeVector { values })
    }

    pub fn constant(n: usize, value: f64) -> Self {
        ShapeVector {
            values: vec![value; n],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Multiplies every value by `k`.
    pub fn scaled(&self, k: f64) -> ShapeVector {
        ShapeVector {
            values: self.values.iter().map(|v| v * k).collect(),
        }
    }
}

pub fn flatten(grid: &ShapeGrid) -> ShapeVector {
    ShapeVector {
        values: grid.heights.clone(),
    }
}

pub fn unflatten(v: &ShapeVector, rows: usize, cols: usize) -> Result<ShapeGrid, ApproxError> {
    ShapeGrid::new(rows, cols, v.values.clone())
}

/// Affinely maps the grid so its minimum lands on 0 and its maximum on
/// `stroke_mm`. A flat grid is placed at mid-stroke.
pub fn scale_to_stroke(grid: &ShapeGrid, stroke_mm: f64) -> ShapeGrid {
    let (lo, hi) = (grid.min(), grid.max());
    let heights = if hi > lo {
        grid.heights
            .iter()
            .map(|h| (h - lo) / (hi - lo) * stroke_mm)
            .collect()
    } else {
        vec![stroke_mm / 2.0; grid.len()]
    };
    ShapeGrid { heights, ..*grid }
}

/// `‖current − target‖ / ‖initial − target‖`.
pub fn relative_error(
    current: &ShapeVector,
    target: &ShapeVector,
    initial: &ShapeVector,
) -> Result<f64, ApproxError> {
    if current.len() != target.len() || initial.len() != target.len() {
        return Err(invalid(format!(
            "length mismatch: current {}, target {}, initial {}",
            current.len(),
            target.len(),
            initial.len()
        )));
    }
    let dist = |a: &ShapeVector| {
        a.values
            .iter()
            .zip(&target.values)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    };
    let num = dist(current);
    let den = dist(initial);
    if den == 0.0 {
        return if num == 0.0 {
            Ok(0.0)
        } else {
            Err(ApproxError::DegenerateReference)
        };
    }
    Ok(num / den)
}

/// The six reference shapes of the 4×4 array.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BuiltinShape {
    Identity,
    Plane,
    Parabola,
    Checkers,
    Peak,
    Random,
}

impl BuiltinShape {
    pub const ALL: [BuiltinShape; 6] = [
        BuiltinShape::Identity,
        BuiltinShape::Plane,
        BuiltinShape::Parabola,
        BuiltinShape::Checkers,
        BuiltinShape::Peak,
        BuiltinShape::Random,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BuiltinShape::Identity => "identity",
            BuiltinShape::Plane => "plane",
            BuiltinShape::Parabola => "parabola",
            BuiltinShape::Checkers => "checkers",
            BuiltinShape::Peak => "peak",
            BuiltinShape::Random => "random",
        }
    }
}

impl fmt::Display for BuiltinShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BuiltinShape {
    type Err = ApproxError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        BuiltinShape::ALL
            .into_iter()
            .find(|b| b.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| invalid(format!("unknown shape `{s}`")))
    }
}

pub const BUILTIN_SIDE: usize = 4;

/// Raw (unscaled) 4×4 grid for a reference shape. `seed` only affects
/// [`BuiltinShape::Random`], which draws i.i.d. uniform values in [0, 1)
/// from a SplitMix64 stream.
pub fn builtin_shape(shape: BuiltinShape, seed: u64) -> ShapeGrid {
    let side = BUILTIN_SIDE;
    let grid = match shape {
        BuiltinShape::Identity => ShapeGrid::from_fn(side, side, |x, y| f64::from(u8::from(x == y))),
        BuiltinShape::Plane => ShapeGrid::from_fn(side, side, |x, y| (x + 2 * y) as f64),
        BuiltinShape::Parabola => ShapeGrid::from_fn(side, side, |x, y| {
            let (x, y) = (x as f64, y as f64);
            2.0 * x * x + 3.0 * y * y - 3.0 * x * y
        }),
        BuiltinShape::Checkers => ShapeGrid::from_fn(side, side, |x, y| ((x + y) % 2) as f64),
        BuiltinShape::Peak => {
            ShapeGrid::from_fn(side, side, |x, y| f64::from(u8::from(x == 1 && y == 2)))
        }
        BuiltinShape::Random => {
            let mut rng = SplitMix64::seed_from_u64(seed);
            let heights = (0..side * side).map(|_| rng.gen::<f64>()).collect();
            ShapeGrid::new(side, side, heights)
        }
    };
    grid.expect("builtin shapes are well formed")
}
