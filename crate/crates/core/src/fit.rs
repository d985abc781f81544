//! Least-squares fits on logarithmic data: exponential rates of trajectory
//! norms and power-law slopes of sweep tables.

use serde::Serialize;

use crate::error::{Error, Result};

/// Minimum usable points for a decay fit.
pub const MIN_DECAY_POINTS: usize = 10;
/// Minimum rows for a log-log slope.
pub const MIN_SLOPE_ROWS: usize = 5;

struct Line {
    slope: f64,
    intercept: f64,
    slope_stderr: f64,
    r_squared: f64,
}

fn least_squares(xs: &[f64], ys: &[f64]) -> Line {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let r = y - intercept - slope * x;
            r * r
        })
        .sum();
    let slope_stderr = if xs.len() > 2 {
        (sse / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    let r_squared = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    Line {
        slope,
        intercept,
        slope_stderr,
        r_squared,
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct DecayFit {
    /// `-slope` of `log |.|` against `t`; `+inf` when the signal underflowed.
    pub rate: f64,
    pub amplitude: f64,
    pub r_squared: f64,
    /// Set when zeros cut the window short and too few points remained.
    pub underflow: bool,
    pub points: usize,
}

/// Fits `value ~ amplitude * exp(-rate t)` over samples with `t` in
/// `[t_lo, t_hi]`. Exact zeros end the usable window.
pub fn decay_fit(times: &[f64], values: &[f64], window: (f64, f64)) -> Result<DecayFit> {
    if times.len() != values.len() {
        return Err(Error::DimensionMismatch {
            expected: times.len(),
            found: values.len(),
        });
    }
    let in_window: Vec<(f64, f64)> = times
        .iter()
        .zip(values)
        .filter(|(t, _)| **t >= window.0 && **t <= window.1)
        .map(|(t, v)| (*t, *v))
        .collect();
    if in_window.len() < MIN_DECAY_POINTS {
        return Err(Error::DegenerateFit(format!(
            "{} samples in window, need {MIN_DECAY_POINTS}",
            in_window.len()
        )));
    }
    if in_window.iter().any(|(_, v)| !v.is_finite() || *v < 0.0) {
        return Err(Error::DegenerateFit("norms must be finite and nonnegative".into()));
    }
    let usable: Vec<(f64, f64)> = in_window.iter().copied().take_while(|(_, v)| *v > 0.0).collect();
    if usable.len() < MIN_DECAY_POINTS {
        return Ok(DecayFit {
            rate: f64::INFINITY,
            amplitude: usable.first().map_or(0.0, |p| p.1),
            r_squared: f64::NAN,
            underflow: true,
            points: usable.len(),
        });
    }
    let xs: Vec<f64> = usable.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = usable.iter().map(|p| p.1.ln()).collect();
    let line = least_squares(&xs, &ys);
    Ok(DecayFit {
        rate: -line.slope,
        amplitude: line.intercept.exp(),
        r_squared: line.r_squared,
        underflow: false,
        points: usable.len(),
    })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub stderr: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least squares of `log y` on `log x`.
pub fn fit_loglog_slope(xs: &[f64], ys: &[f64]) -> Result<SlopeFit> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch {
            expected: xs.len(),
            found: ys.len(),
        });
    }
    if xs.len() < MIN_SLOPE_ROWS {
        return Err(Error::DegenerateFit(format!(
            "{} rows, need {MIN_SLOPE_ROWS}",
            xs.len()
        )));
    }
    if xs.iter().chain(ys).any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::DegenerateFit("log-log fit needs positive finite values".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    if lx.iter().all(|v| *v == lx[0]) {
        return Err(Error::DegenerateFit("all x values coincide".into()));
    }
    let line = least_squares(&lx, &ly);
    Ok(SlopeFit {
        slope: line.slope,
        stderr: line.slope_stderr,
        intercept: line.intercept,
        r_squared: line.r_squared,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid(n: usize, dt: f64) -> Vec<f64> {
        (0..n).map(|i| i as f64 * dt).collect()
    }

    #[test]
    fn exact_exponential() {
        let t = grid(50, 0.02);
        let v: Vec<f64> = t.iter().map(|t| 2.0 * (-3.0 * t).exp()).collect();
        let f = decay_fit(&t, &v, (0.0, 1.0)).unwrap();
        assert!((f.rate - 3.0).abs() < 1e-6);
        assert!((f.amplitude - 2.0).abs() < 1e-9);
        assert!(f.r_squared > 1.0 - 1e-12);
    }

    #[test]
    fn constant_signal() {
        let t = grid(20, 0.1);
        let f = decay_fit(&t, &[4.0; 20], (0.0, 10.0)).unwrap();
        assert!(f.rate.abs() < 1e-12);
    }

    #[test]
    fn underflow_sentinel() {
        let t = grid(20, 0.1);
        let mut v = vec![0.0; 20];
        v[0] = 1.0;
        v[1] = 1e-300;
        let f = decay_fit(&t, &v, (0.0, 10.0)).unwrap();
        assert!(f.underflow && f.rate == f64::INFINITY);
    }

    #[test]
    fn too_few_points() {
        let t = grid(5, 0.1);
        assert!(matches!(
            decay_fit(&t, &[1.0; 5], (0.0, 1.0)),
            Err(Error::DegenerateFit(_))
        ));
        let t = grid(20, 0.1);
        assert!(decay_fit(&t, &[1.0; 20], (5.0, 6.0)).is_err());
    }

    #[test]
    fn synthetic_power_law() {
        let xs: Vec<f64> = (5..=200).map(|n| n as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x.powf(-1.5)).collect();
        let s = fit_loglog_slope(&xs, &ys).unwrap();
        assert!((s.slope + 1.5).abs() < 1e-12);
        assert!(s.stderr < 1e-12);
    }

    #[test]
    fn slope_rejects_nonpositive() {
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert!(fit_loglog_slope(&xs, &[1.0, 2.0, 0.0, 4.0, 5.0]).is_err());
        assert!(fit_loglog_slope(&xs[..4], &[1.0; 4]).is_err());
        assert!(fit_loglog_slope(&[2.0; 5], &[1.0, 2.0, 3.0, 4.0, 5.0]).is_err());
    }

    proptest! {
        #[test]
        fn recovers_power_laws(p in -4.0f64..4.0, c in 0.01f64..100.0) {
            let xs: Vec<f64> = (1..=30).map(|n| n as f64).collect();
            let ys: Vec<f64> = xs.iter().map(|x| c * x.powf(p)).collect();
            let s = fit_loglog_slope(&xs, &ys).unwrap();
            prop_assert!((s.slope - p).abs() < 1e-9);
            prop_assert!((s.intercept - c.ln()).abs() < 1e-8);
        }
    }
}
