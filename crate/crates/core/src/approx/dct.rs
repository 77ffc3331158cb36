use std::f64::consts::PI;

use super::{invalid, ApproxError, ShapeVector};

/// One cosine mode: `a_t` for frequency index `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DctTerm {
    pub index: usize,
    pub amplitude: f64,
}

impl DctTerm {
    /// `k_t = πt / 2N`.
    pub fn wave_vector(&self, n_total: usize) -> f64 {
        PI * self.index as f64 / (2.0 * n_total as f64)
    }

    /// Contribution of this mode at module `x`; the DC term enters once,
    /// every other mode twice.
    pub fn contribution(&self, x: usize, n_total: usize) -> f64 {
        if self.index == 0 {
            self.amplitude
        } else {
            2.0 * self.amplitude * (self.wave_vector(n_total) * (2 * x + 1) as f64).cos()
        }
    }
}

/// Analysis coefficients that make the cosine synthesis an exact inverse:
/// `a_0` is the mean and `a_t = (1/N) Σ f_n cos(k_t (2n + 1))`.
pub fn dct_forward(shape: &ShapeVector) -> Result<Vec<DctTerm>, ApproxError> {
    let n = shape.len();
    if n == 0 {
        return Err(invalid("cannot transform an empty shape"));
    }
    let f = shape.values();
    let terms = (0..n)
        .map(|t| {
            let k = PI * t as f64 / (2.0 * n as f64);
            let sum: f64 = f
                .iter()
                .enumerate()
                .map(|(i, v)| v * (k * (2 * i + 1) as f64).cos())
                .sum();
            DctTerm {
                index: t,
                amplitude: sum / n as f64,
            }
        })
        .collect();
    Ok(terms)
}

/// Partial synthesis `a_0 + 2 Σ a_t cos(k_t (2x + 1))` over the given terms.
pub fn dct_eval(terms: &[DctTerm], x: usize, n_total: usize) -> Result<f64, ApproxError> {
    if x >= n_total {
        return Err(invalid(format!("module {x} outside 0..{n_total}")));
    }
    terms.iter().try_fold(0.0, |acc, t| {
        if t.index >= n_total {
            Err(invalid(format!("mode {} outside 0..{n_total}", t.index)))
        } else {
            Ok(acc + t.contribution(x, n_total))
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn vector(values: Vec<f64>) -> ShapeVector {
        ShapeVector::new(values).unwrap()
    }

    #[test]
    fn constant_has_only_dc() {
        let terms = dct_forward(&ShapeVector::constant(16, 3.25)).unwrap();
        assert!((terms[0].amplitude - 3.25).abs() < 1e-12);
        assert!(terms[1..].iter().all(|t| t.amplitude.abs() < 1e-12));
    }

    #[test]
    fn first_mode_has_half_amplitude() {
        let n = 16;
        let shape = vector(
            (0..n)
                .map(|i| (PI * (2 * i + 1) as f64 / (2.0 * n as f64)).cos())
                .collect(),
        );
        let terms = dct_forward(&shape).unwrap();
        for t in &terms {
            let want = if t.index == 1 { 0.5 } else { 0.0 };
            assert!((t.amplitude - want).abs() < 1e-12, "a_{} = {}", t.index, t.amplitude);
        }
    }

    #[test]
    fn impulse_coefficients() {
        let mut f = vec![0.0; 16];
        f[6] = 1.0;
        let terms = dct_forward(&vector(f)).unwrap();
        assert!((terms[0].amplitude - 1.0 / 16.0).abs() < 1e-15);
        for t in &terms[1..] {
            let want = (t.wave_vector(16) * 13.0).cos() / 16.0;
            assert!((t.amplitude - want).abs() < 1e-15);
        }
        // first term alone is the mean everywhere
        for x in 0..16 {
            assert!((dct_eval(&terms[..1], x, 16).unwrap() - 1.0 / 16.0).abs() < 1e-15);
        }
    }

    #[test]
    fn dc_only_synthesis() {
        let terms = [DctTerm {
            index: 0,
            amplitude: 5.0,
        }];
        for x in 0..8 {
            assert_eq!(dct_eval(&terms, x, 8).unwrap(), 5.0);
        }
    }

    #[test]
    fn errors() {
        assert!(dct_forward(&ShapeVector::constant(0, 0.0)).is_err());
        let t = [DctTerm {
            index: 4,
            amplitude: 1.0,
        }];
        assert!(dct_eval(&t, 0, 4).is_err());
        assert!(dct_eval(&[], 4, 4).is_err());
    }

    proptest! {
        #[test]
        fn round_trip(values in prop::collection::vec(-100.0f64..100.0, 1..=64)) {
            let n = values.len();
            let shape = vector(values.clone());
            let terms = dct_forward(&shape).unwrap();
            let scale = values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            for (x, want) in values.iter().enumerate() {
                let got = dct_eval(&terms, x, n).unwrap();
                prop_assert!((got - want).abs() <= 1e-9 * scale);
            }
        }

        #[test]
        fn partial_sums_are_linear(values in prop::collection::vec(-1.0f64..1.0, 2..=32), split in 0usize..32) {
            let n = values.len();
            let terms = dct_forward(&vector(values)).unwrap();
            let split = split.min(n);
            for x in 0..n {
                let whole = dct_eval(&terms, x, n).unwrap();
                let parts = dct_eval(&terms[..split], x, n).unwrap() + dct_eval(&terms[split..], x, n).unwrap();
                prop_assert!((whole - parts).abs() < 1e-12);
            }
        }
    }
}
