use std::f64::consts::FRAC_PI_2;

/// Coefficients of the travelling wave `a cos(k x − π/2) + b cos(k x)`,
/// which equals `sin(k x − v t)` when `a = cos(v t)` and `b = −sin(v t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WavePair {
    pub wavevector: f64,
    pub cos_amp: f64,
    pub sin_amp: f64,
}

impl WavePair {
    /// Quarter-wave over `n` modules: the last module repeats the first one a
    /// quarter period later.
    pub fn traveling(n: usize, omega: f64, t: f64) -> WavePair {
        WavePair {
            wavevector: quarter_wavevector(n),
            cos_amp: (omega * t).cos(),
            sin_amp: -(omega * t).sin(),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let kx = self.wavevector * x;
        self.cos_amp * (kx - FRAC_PI_2).cos() + self.sin_amp * kx.cos()
    }
}

/// `π / (2 (n − 1))`; a single module gets a flat wave.
pub fn quarter_wavevector(n: usize) -> f64 {
    if n < 2 {
        0.0
    } else {
        FRAC_PI_2 / (n - 1) as f64
    }
}
