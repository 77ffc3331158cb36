use rustfft::{num_complex::Complex, FftPlanner};

use super::HarnessError;

/// Delay of `sig_b` relative to `sig_a` in units of `dt` (positive when `b`
/// lags), searching lags up to half the signal length.
pub fn xcorr_delay(sig_a: &[f64], sig_b: &[f64], dt: f64) -> Result<f64, HarnessError> {
    xcorr_delay_within(sig_a, sig_b, dt, sig_a.len() / 2)
}

/// Same as [`xcorr_delay`] with an explicit lag bound in samples.
///
/// Each lag is scored by the Pearson coefficient over the overlapping
/// samples, so partial overlap does not pull the peak towards zero.
pub fn xcorr_delay_within(sig_a: &[f64], sig_b: &[f64], dt: f64, max_lag: usize) -> Result<f64, HarnessError> {
    let len = sig_a.len();
    if len != sig_b.len() || len < 2 {
        return Err(HarnessError::InvalidInput(format!(
            "traces must have equal length >= 2 (got {} and {})",
            len,
            sig_b.len()
        )));
    }
    if !(dt > 0.0) {
        return Err(HarnessError::InvalidInput(format!("sample period {dt}")));
    }
    let a = centred(sig_a)?;
    let b = centred(sig_b)?;
    let max_lag = max_lag.min(len - 2);
    let cross = cross_sums(&a, &b);
    let pa = Prefix::new(&a);
    let pb = Prefix::new(&b);

    let lags: Vec<isize> = (-(max_lag as isize)..=max_lag as isize).collect();
    let scores: Vec<f64> = lags
        .iter()
        .map(|&lag| {
            let m = len - lag.unsigned_abs();
            // pairs (a[i], b[i + lag]) for i in the overlap
            let (ra, rb) = if lag >= 0 {
                (0..m, lag as usize..len)
            } else {
                (lag.unsigned_abs()..len, 0..m)
            };
            let (sa, saa) = pa.range(ra);
            let (sb, sbb) = pb.range(rb);
            let mf = m as f64;
            let c = cross(lag) - sa * sb / mf;
            let va = saa - sa * sa / mf;
            let vb = sbb - sb * sb / mf;
            if va <= 1e-12 * pa.total_sq || vb <= 1e-12 * pb.total_sq {
                f64::NEG_INFINITY
            } else {
                c / (va * vb).sqrt()
            }
        })
        .collect();

    // first maximum; ties resolve towards the smaller lag magnitude
    let mut best = max_lag;
    for (i, s) in scores.iter().enumerate() {
        let closer = lags[i].unsigned_abs() < lags[best].unsigned_abs();
        if *s > scores[best] || (*s == scores[best] && closer) {
            best = i;
        }
    }
    let mut shift = 0.0;
    if best > 0 && best + 1 < scores.len() {
        let (l, c, r) = (scores[best - 1], scores[best], scores[best + 1]);
        let denom = l - 2.0 * c + r;
        if l.is_finite() && r.is_finite() && denom < 0.0 {
            shift = (0.5 * (l - r) / denom).clamp(-0.5, 0.5);
        }
    }
    Ok((lags[best] as f64 + shift) * dt)
}

fn centred(sig: &[f64]) -> Result<Vec<f64>, HarnessError> {
    if sig.iter().any(|v| !v.is_finite()) {
        return Err(HarnessError::InvalidInput("trace has non-finite samples".into()));
    }
    let mean = sig.iter().sum::<f64>() / sig.len() as f64;
    let out: Vec<f64> = sig.iter().map(|v| v - mean).collect();
    let scale = sig.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    if out.iter().all(|v| v.abs() <= 1e-12 * scale) {
        return Err(HarnessError::DegenerateSignal);
    }
    Ok(out)
}

/// `lag -> Σ_i a[i]·b[i + lag]` via one forward/inverse FFT pair.
fn cross_sums(a: &[f64], b: &[f64]) -> impl Fn(isize) -> f64 {
    let len = a.len();
    let size = (2 * len).next_power_of_two();
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(size);
    let inv = planner.plan_fft_inverse(size);
    let pad = |x: &[f64]| {
        let mut v: Vec<Complex<f64>> = x.iter().map(|&r| Complex::new(r, 0.0)).collect();
        v.resize(size, Complex::new(0.0, 0.0));
        v
    };
    let mut fa = pad(a);
    let mut fb = pad(b);
    fwd.process(&mut fa);
    fwd.process(&mut fb);
    let mut prod: Vec<Complex<f64>> = fa.iter().zip(&fb).map(|(x, y)| x.conj() * y).collect();
    inv.process(&mut prod);
    let scale = 1.0 / size as f64;
    let c: Vec<f64> = prod.iter().map(|z| z.re * scale).collect();
    move |lag| {
        if lag >= 0 {
            c[lag as usize]
        } else {
            c[size - lag.unsigned_abs()]
        }
    }
}

struct Prefix {
    sum: Vec<f64>,
    sq: Vec<f64>,
    total_sq: f64,
}

impl Prefix {
    fn new(x: &[f64]) -> Self {
        let mut sum = vec![0.0; x.len() + 1];
        let mut sq = vec![0.0; x.len() + 1];
        for (i, v) in x.iter().enumerate() {
            sum[i + 1] = sum[i] + v;
            sq[i + 1] = sq[i] + v * v;
        }
        let total_sq = sq[x.len()];
        Prefix { sum, sq, total_sq }
    }

    fn range(&self, r: std::ops::Range<usize>) -> (f64, f64) {
        (
            self.sum[r.end] - self.sum[r.start],
            self.sq[r.end] - self.sq[r.start],
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn noise(len: usize, seed: u64) -> Vec<f64> {
        let mut rng = rand_xoshiro::Xoshiro256PlusPlus::seed_from_u64(seed);
        let mut v = 0.0;
        (0..len)
            .map(|_| {
                v = 0.9 * v + rng.gen_range(-1.0..1.0);
                v
            })
            .collect()
    }

    fn shifted(x: &[f64], by: usize) -> Vec<f64> {
        (0..x.len()).map(|i| if i >= by { x[i - by] } else { x[0] }).collect()
    }

    #[test]
    fn identical_traces_have_no_delay() {
        let a = noise(500, 1);
        assert_eq!(xcorr_delay(&a, &a, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn constructed_shift() {
        let a = noise(2000, 2);
        let b = shifted(&a, 50);
        let d = xcorr_delay(&a, &b, 1.0).unwrap();
        assert!((d - 50.0).abs() <= 0.5, "{d}");
        let d = xcorr_delay(&b, &a, 1.0).unwrap();
        assert!((d + 50.0).abs() <= 0.5, "{d}");
    }

    #[test]
    fn sample_period_scales_result() {
        let a = noise(1000, 3);
        let b = shifted(&a, 20);
        let d = xcorr_delay(&a, &b, 0.25).unwrap();
        assert!((d - 5.0).abs() <= 0.125, "{d}");
    }

    #[test]
    fn sub_sample_interpolation_on_a_sine() {
        // b(t) = a(t − 12.3): the parabolic fit recovers the fraction
        let a: Vec<f64> = (0..3000).map(|i| (i as f64 * 0.01).sin()).collect();
        let b: Vec<f64> = (0..3000).map(|i| ((i as f64 - 12.3) * 0.01).sin()).collect();
        let d = xcorr_delay_within(&a, &b, 1.0, 300).unwrap();
        assert!((d - 12.3).abs() < 0.05, "{d}");
    }

    #[test]
    fn flat_or_short_inputs_fail() {
        assert!(matches!(
            xcorr_delay(&[1.0; 10], &noise(10, 1), 1.0),
            Err(HarnessError::DegenerateSignal)
        ));
        assert!(xcorr_delay(&[1.0], &[2.0], 1.0).is_err());
        assert!(xcorr_delay(&noise(10, 1), &noise(11, 1), 1.0).is_err());
        assert!(xcorr_delay(&noise(10, 1), &noise(10, 2), 0.0).is_err());
    }

    #[test]
    fn matches_direct_pearson() {
        let a = noise(64, 9);
        let b = noise(64, 10);
        // brute-force oracle
        let pearson = |x: &[f64], y: &[f64]| {
            let m = x.len() as f64;
            let (mx, my) = (x.iter().sum::<f64>() / m, y.iter().sum::<f64>() / m);
            let c: f64 = x.iter().zip(y).map(|(p, q)| (p - mx) * (q - my)).sum();
            let vx: f64 = x.iter().map(|p| (p - mx).powi(2)).sum();
            let vy: f64 = y.iter().map(|q| (q - my).powi(2)).sum();
            c / (vx * vy).sqrt()
        };
        let mut best = (f64::NEG_INFINITY, 0isize);
        for lag in -20isize..=20 {
            let r = if lag >= 0 {
                pearson(&a[..64 - lag as usize], &b[lag as usize..])
            } else {
                pearson(&a[(-lag) as usize..], &b[..64 - (-lag) as usize])
            };
            if r > best.0 {
                best = (r, lag);
            }
        }
        let d = xcorr_delay_within(&a, &b, 1.0, 20).unwrap();
        assert!((d - best.1 as f64).abs() <= 0.5, "{d} vs {}", best.1);
    }

    proptest! {
        #[test]
        fn antisymmetric(seed in any::<u64>(), shift in 0usize..40) {
            let a = noise(400, seed);
            let jitter = noise(400, seed ^ 0x55);
            let b: Vec<f64> = shifted(&a, shift).iter().zip(&jitter).map(|(x, j)| x + 0.3 * j).collect();
            let ab = xcorr_delay_within(&a, &b, 1.0, 60).unwrap();
            let ba = xcorr_delay_within(&b, &a, 1.0, 60).unwrap();
            prop_assert!((ab + ba).abs() <= 1e-6, "{ab} {ba}");
        }
    }
}
