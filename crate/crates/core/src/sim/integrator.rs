//! Adaptive fourth-order exponential time differencing (Cox-Matthews) for
//! `y' = -c * y + g(t, y)` with a diagonal, possibly very stiff, `c`.

use serde::Serialize;

use crate::error::{Error, Result};

/// A semilinear system with diagonal linear part.
pub trait SplitSystem {
    /// Decay rates `c`; the linear part is `-c * y`.
    fn decay(&self) -> &[f64];
    /// Writes `g(t, y)` into `out`.
    fn forcing(&self, t: f64, y: &[f64], out: &mut [f64]) -> Result<()>;
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    /// First trial step; `None` picks one from the sample spacing.
    pub initial_step: Option<f64>,
    pub max_step: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rtol: 1e-6,
            atol: 1e-10,
            initial_step: None,
            max_step: f64::INFINITY,
        }
    }
}

impl Tolerances {
    pub fn validate(&self) -> Result<()> {
        if !(self.rtol > 0.0 && self.atol > 0.0 && self.max_step > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "tolerances must be positive (rtol {}, atol {}, max_step {})",
                self.rtol, self.atol, self.max_step
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct IntegratorStats {
    pub accepted: usize,
    pub rejected: usize,
    pub forcing_evals: usize,
    pub min_step: f64,
    pub max_step: f64,
}

#[derive(Debug)]
pub struct Integration {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub stats: IntegratorStats,
    /// Set when the run stopped early; `times`/`states` hold what was reached.
    pub failure: Option<Error>,
}

/// Fraction of the largest component below which a component is judged
/// against that scale instead of its own magnitude.
pub const ROUNDOFF_FLOOR: f64 = 1e-6;

/// `phi_1`, `phi_2`, `phi_3` at `z`.
fn phis(z: f64) -> (f64, f64, f64) {
    if z.abs() < 1.0 {
        // phi_k(z) = sum_n z^n / (n + k)!
        let (mut p1, mut p2, mut p3) = (0.0, 0.0, 0.0);
        let mut term = 1.0; // z^n / n!
        let mut fact = [1.0, 1.0, 0.5, 1.0 / 6.0]; // n!/(n+k)!, indexed by k
        for n in 0..25 {
            p1 += term * fact[1];
            p2 += term * fact[2];
            p3 += term * fact[3];
            let nf = (n + 1) as f64;
            term *= z / nf;
            fact[1] *= nf / (nf + 1.0);
            fact[2] *= nf / (nf + 2.0);
            fact[3] *= nf / (nf + 3.0);
        }
        (p1, p2, p3)
    } else {
        let e = z.exp();
        let p1 = (e - 1.0) / z;
        let p2 = (e - 1.0 - z) / (z * z);
        let p3 = (e - 1.0 - z - 0.5 * z * z) / (z * z * z);
        (p1, p2, p3)
    }
}

/// Per-component coefficients of one step of size `h`.
struct StepCoefficients {
    e: Vec<f64>,
    e2: Vec<f64>,
    /// `(h/2) phi_1(-c h/2)`
    q: Vec<f64>,
    f1: Vec<f64>,
    f2: Vec<f64>,
    f3: Vec<f64>,
}

impl StepCoefficients {
    fn new(decay: &[f64], h: f64) -> Self {
        let n = decay.len();
        let mut s = Self {
            e: Vec::with_capacity(n),
            e2: Vec::with_capacity(n),
            q: Vec::with_capacity(n),
            f1: Vec::with_capacity(n),
            f2: Vec::with_capacity(n),
            f3: Vec::with_capacity(n),
        };
        for &c in decay {
            let z = -c * h;
            s.e.push(z.exp());
            s.e2.push((0.5 * z).exp());
            s.q.push(0.5 * h * phis(0.5 * z).0);
            let (p1, p2, p3) = phis(z);
            s.f1.push(h * (p1 - 3.0 * p2 + 4.0 * p3));
            s.f2.push(h * (p2 - 2.0 * p3));
            s.f3.push(h * (-p2 + 4.0 * p3));
        }
        s
    }
}

struct Stepper<'a, S: SplitSystem + ?Sized> {
    sys: &'a S,
    evals: usize,
    nu: Vec<f64>,
    na: Vec<f64>,
    nb: Vec<f64>,
    nc: Vec<f64>,
    a: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
}

impl<'a, S: SplitSystem + ?Sized> Stepper<'a, S> {
    fn new(sys: &'a S) -> Self {
        let n = sys.decay().len();
        let z = || vec![0.0; n];
        Self {
            sys,
            evals: 0,
            nu: z(),
            na: z(),
            nb: z(),
            nc: z(),
            a: z(),
            b: z(),
            c: z(),
        }
    }

    fn step(&mut self, t: f64, y: &[f64], h: f64, k: &StepCoefficients, out: &mut [f64]) -> Result<()> {
        let n = y.len();
        self.sys.forcing(t, y, &mut self.nu)?;
        for i in 0..n {
            self.a[i] = k.e2[i] * y[i] + k.q[i] * self.nu[i];
        }
        self.sys.forcing(t + 0.5 * h, &self.a, &mut self.na)?;
        for i in 0..n {
            self.b[i] = k.e2[i] * y[i] + k.q[i] * self.na[i];
        }
        self.sys.forcing(t + 0.5 * h, &self.b, &mut self.nb)?;
        for i in 0..n {
            self.c[i] = k.e2[i] * self.a[i] + k.q[i] * (2.0 * self.nb[i] - self.nu[i]);
        }
        self.sys.forcing(t + h, &self.c, &mut self.nc)?;
        self.evals += 4;
        for i in 0..n {
            out[i] =
                k.e[i] * y[i] + k.f1[i] * self.nu[i] + 2.0 * k.f2[i] * (self.na[i] + self.nb[i]) + k.f3[i] * self.nc[i];
        }
        Ok(())
    }
}

/// Integrates from `y0` at `t = 0` and records the state at each of
/// `sample_times` (increasing, the first may be 0). Steps are clipped so
/// every sample time is hit exactly.
pub fn integrate<S: SplitSystem + ?Sized>(
    sys: &S,
    y0: &[f64],
    sample_times: &[f64],
    tol: &Tolerances,
) -> Result<Integration> {
    tol.validate()?;
    let n = sys.decay().len();
    if y0.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: y0.len(),
        });
    }
    if sample_times.is_empty() || sample_times[0] < 0.0 || sample_times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument(
            "sample times must be nonnegative and strictly increasing".into(),
        ));
    }
    let t_end = *sample_times.last().unwrap();
    let mut out = Integration {
        times: Vec::with_capacity(sample_times.len()),
        states: Vec::with_capacity(sample_times.len()),
        stats: IntegratorStats {
            min_step: f64::INFINITY,
            ..Default::default()
        },
        failure: None,
    };
    if y0.iter().any(|v| !v.is_finite()) {
        out.failure = Some(Error::NonFinite { t: 0.0 });
        return Ok(out);
    }
    let mut stepper = Stepper::new(sys);
    let mut y = y0.to_vec();
    let mut full = vec![0.0; n];
    let mut half = vec![0.0; n];
    let mut two_half = vec![0.0; n];
    let mut t = 0.0;
    let spacing = if sample_times.len() > 1 {
        sample_times[1] - sample_times[0]
    } else {
        t_end
    };
    let mut h = tol
        .initial_step
        .unwrap_or_else(|| (spacing.max(t_end * 1e-3)) * 1e-2)
        .min(tol.max_step)
        .max(f64::MIN_POSITIVE);
    let mut next = 0;

    while next < sample_times.len() && sample_times[next] <= 0.0 {
        out.times.push(sample_times[next]);
        out.states.push(y.clone());
        next += 1;
    }

    while next < sample_times.len() {
        let target = sample_times[next];
        let remaining = target - t;
        let clipped = h >= remaining;
        let step = if clipped { remaining } else { h.min(remaining) };
        if step < 1e-14 * t.abs().max(1.0) {
            out.failure = Some(Error::StepSizeUnderflow { t, h: step });
            break;
        }

        let attempt = (|| -> Result<f64> {
            let big = StepCoefficients::new(sys.decay(), step);
            let small = StepCoefficients::new(sys.decay(), 0.5 * step);
            stepper.step(t, &y, step, &big, &mut full)?;
            stepper.step(t, &y, 0.5 * step, &small, &mut half)?;
            stepper.step(t + 0.5 * step, &half, 0.5 * step, &small, &mut two_half)?;
            // components far below the largest one only carry roundoff from it
            let floor = ROUNDOFF_FLOOR * y.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            let mut acc = 0.0;
            for i in 0..n {
                let scale = tol.atol + tol.rtol * y[i].abs().max(two_half[i].abs()).max(floor);
                let d = (two_half[i] - full[i]) / 15.0 / scale;
                acc += d * d;
            }
            Ok((acc / n.max(1) as f64).sqrt())
        })();
        let err = match attempt {
            Ok(e) if e.is_finite() && two_half.iter().all(|v| v.is_finite()) => e,
            Ok(_) => f64::INFINITY,
            Err(e) => {
                out.failure = Some(e);
                break;
            }
        };

        if err <= 1.0 {
            t = if clipped { target } else { t + step };
            std::mem::swap(&mut y, &mut two_half);
            out.stats.accepted += 1;
            out.stats.min_step = out.stats.min_step.min(step);
            out.stats.max_step = out.stats.max_step.max(step);
            if clipped {
                out.times.push(target);
                out.states.push(y.clone());
                next += 1;
            }
            let grow = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            // a clipped step says nothing about how large h may get
            h = if clipped { h.max(step * grow) } else { step * grow };
            h = h.min(tol.max_step);
        } else {
            out.stats.rejected += 1;
            if !err.is_finite() {
                if step < 1e-12 * t_end.max(1.0) {
                    out.failure = Some(Error::NonFinite { t });
                    break;
                }
                h = 0.2 * step;
            } else {
                h = step * (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
            }
        }
    }
    out.stats.forcing_evals = stepper.evals;
    if out.stats.accepted == 0 {
        out.stats.min_step = 0.0;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    struct Diagonal {
        c: Vec<f64>,
        g: fn(f64, &[f64], &mut [f64]),
    }

    impl SplitSystem for Diagonal {
        fn decay(&self) -> &[f64] {
            &self.c
        }
        fn forcing(&self, t: f64, y: &[f64], out: &mut [f64]) -> Result<()> {
            (self.g)(t, y, out);
            Ok(())
        }
    }

    fn no_forcing(_: f64, _: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }

    #[test]
    fn phi_functions_are_continuous() {
        for z in [-1.0 - 1e-12, 1.0 + 1e-12] {
            let a = phis(z);
            let b = phis(z.signum() * (1.0 - 1e-12));
            assert!((a.0 - b.0).abs() < 1e-10);
            assert!((a.1 - b.1).abs() < 1e-10);
            assert!((a.2 - b.2).abs() < 1e-10);
        }
        assert_eq!(phis(0.0), (1.0, 0.5, 1.0 / 6.0));
        let (p1, p2, p3) = phis(-1e6);
        assert!((p1 - 1e-6).abs() < 1e-15 && p2 > 0.0 && p3 > 0.0);
    }

    #[test]
    fn pure_decay_relative_error() {
        let lam = 8.0 * PI * PI;
        let sys = Diagonal {
            c: vec![lam],
            g: no_forcing,
        };
        let ts: Vec<f64> = (0..=20).map(|i| i as f64 * 0.005).collect();
        let r = integrate(&sys, &[1.0], &ts, &Tolerances::default()).unwrap();
        assert!(r.failure.is_none());
        assert_eq!(r.times, ts);
        for (t, y) in r.times.iter().zip(&r.states) {
            let exact = (-lam * t).exp();
            assert!(((y[0] - exact) / exact).abs() <= 1e-6);
        }
    }

    #[test]
    fn nonlinear_forcing_is_fourth_order_accurate() {
        // y' = -y + sin t, y(0) = 1
        fn g(t: f64, _: &[f64], out: &mut [f64]) {
            out[0] = t.sin();
        }
        let sys = Diagonal { c: vec![1.0], g };
        let ts: Vec<f64> = (0..=10).map(|i| i as f64 * 0.3).collect();
        let tol = Tolerances {
            rtol: 1e-10,
            atol: 1e-12,
            ..Default::default()
        };
        let r = integrate(&sys, &[1.0], &ts, &tol).unwrap();
        for (t, y) in r.times.iter().zip(&r.states) {
            let exact = 1.5 * (-t).exp() + 0.5 * (t.sin() - t.cos());
            assert!((y[0] - exact).abs() < 1e-8, "{t} {} {exact}", y[0]);
        }
    }

    #[test]
    fn logistic_growth() {
        // y' = y - y^2 written as c = -1 with forcing -y^2
        fn g(_: f64, y: &[f64], out: &mut [f64]) {
            out[0] = -y[0] * y[0];
        }
        let sys = Diagonal { c: vec![-1.0], g };
        let ts = [0.0, 1.0, 2.0, 5.0];
        let r = integrate(&sys, &[0.1], &ts, &Tolerances::default()).unwrap();
        for (t, y) in r.times.iter().zip(&r.states) {
            let exact = 1.0 / (1.0 + 9.0 * (-t).exp());
            assert!(((y[0] - exact) / exact).abs() < 1e-5);
        }
    }

    #[test]
    fn very_stiff_components_do_not_collapse_the_step() {
        let c: Vec<f64> = (1..=120).map(|i| PI * PI * (i * i) as f64).collect();
        fn g(_: f64, y: &[f64], out: &mut [f64]) {
            let s: f64 = y.iter().sum::<f64>() * 1e-2;
            out.fill(s.sin());
        }
        let sys = Diagonal { c, g };
        let ts: Vec<f64> = (0..=10).map(|i| i as f64 * 0.1).collect();
        let r = integrate(&sys, &vec![1.0; 120], &ts, &Tolerances::default()).unwrap();
        assert!(r.failure.is_none());
        assert!(r.stats.accepted < 2000, "{:?}", r.stats);
    }

    #[test]
    fn blow_up_is_reported_with_partial_output() {
        fn g(_: f64, y: &[f64], out: &mut [f64]) {
            out[0] = y[0] * y[0];
        }
        let sys = Diagonal { c: vec![0.0], g };
        let ts = [0.0, 0.5, 0.9, 1.5];
        let r = integrate(&sys, &[1.0], &ts, &Tolerances::default()).unwrap();
        assert!(r.failure.is_some());
        assert_eq!(r.times, vec![0.0, 0.5, 0.9]);
    }

    #[test]
    fn deterministic() {
        fn g(t: f64, y: &[f64], out: &mut [f64]) {
            for (o, v) in out.iter_mut().zip(y) {
                *o = (t + v).sin();
            }
        }
        let sys = Diagonal {
            c: vec![1.0, 10.0, 100.0],
            g,
        };
        let ts = [0.0, 0.1, 0.7];
        let a = integrate(&sys, &[1.0, 2.0, 3.0], &ts, &Tolerances::default()).unwrap();
        let b = integrate(&sys, &[1.0, 2.0, 3.0], &ts, &Tolerances::default()).unwrap();
        assert_eq!(a.states, b.states);
    }

    #[test]
    fn bad_input() {
        let sys = Diagonal {
            c: vec![1.0],
            g: no_forcing,
        };
        assert!(integrate(&sys, &[1.0, 2.0], &[0.0, 1.0], &Tolerances::default()).is_err());
        assert!(integrate(&sys, &[1.0], &[0.0, 0.0], &Tolerances::default()).is_err());
        let bad = Tolerances {
            rtol: 0.0,
            ..Default::default()
        };
        assert!(integrate(&sys, &[1.0], &[0.0, 1.0], &bad).is_err());
    }
}
