//! Acceptance suite. Each check runs at a fixed tolerance and runtime budget
//! and reports one pass/fail line.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::design::{assemble_bc, find_min_n, gain, scaling_sweep, SweepRow};
use crate::fit::{decay_fit, fit_loglog_slope};
use crate::lifting::LiftingSystem;
use crate::par::Execution;
use crate::sensors::{best_split, minimal_sensor_lines, SensorPartition};
use crate::sim::{simulate_scenario, ErrorInit, Kind, Nonlinearity, Scenario, Trajectory};
use crate::spectral::{bly_lower_bound, Rectangle, SpectralBasis};

/// `m` used for the scaling sweep.
pub const SWEEP_M: f64 = 0.6;
pub const SWEEP_RANGE: (usize, usize) = (5, 200);
/// Seed of the random partitions in the minimality check.
pub const DEFAULT_SEED: u64 = 20_240_601;

#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    pub id: &'static str,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed_s: f64,
    pub budget_s: f64,
}

impl CheckResult {
    pub fn line(&self) -> String {
        format!(
            "[{}] {:<4} {:<44} {:>8.2}s / {:>4.0}s  {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.elapsed_s,
            self.budget_s,
            self.detail
        )
    }
}

fn timed(
    id: &'static str,
    name: &'static str,
    budget: Duration,
    elapsed: Duration,
    (ok, detail): (bool, String),
) -> CheckResult {
    let within = elapsed <= budget;
    let detail = if within {
        detail
    } else {
        format!("{detail}; runtime budget exceeded")
    };
    CheckResult {
        id,
        name,
        passed: ok && within,
        detail,
        elapsed_s: elapsed.as_secs_f64(),
        budget_s: budget.as_secs_f64(),
    }
}

fn run(id: &'static str, name: &'static str, budget_s: u64, f: impl FnOnce() -> (bool, String)) -> CheckResult {
    let start = Instant::now();
    let out = f();
    timed(id, name, Duration::from_secs(budget_s), start.elapsed(), out)
}

/// First 1000 unit-square eigenvalues against brute force, and the lower
/// bound `lambda_k >= 2 pi k / |Omega|` for each.
pub fn spectral_exactness() -> CheckResult {
    run("1", "spectral exactness and BLY bound", 5, || {
        let count = 1000;
        let basis = match SpectralBasis::enumerate(Rectangle::unit_square(), count) {
            Ok(b) => b,
            Err(e) => return (false, e.to_string()),
        };
        let mut brute = Vec::new();
        for j in 1..=60u32 {
            for k in 1..=60u32 {
                brute.push((PI * PI * ((j * j + k * k) as f64), j, k));
            }
        }
        brute.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mismatches = basis
            .modes()
            .iter()
            .zip(&brute)
            .filter(|(m, b)| m.lambda != b.0 || (m.jx, m.ky) != (b.1, b.2))
            .count();
        let bly_violations = basis
            .modes()
            .iter()
            .filter(|m| m.lambda < bly_lower_bound(m.rank, 2, 1.0).unwrap_or(f64::INFINITY))
            .count();
        (
            mismatches == 0 && bly_violations == 0,
            format!("{mismatches} eigenvalue mismatches, {bly_violations} bound violations"),
        )
    })
}

/// `(N, m)` pairs of the gain-identity check.
pub fn gain_pairs() -> Vec<(usize, f64)> {
    let ns = [1, 2, 3, 4, 5, 6, 8, 10, 12, 15, 18, 20, 24, 28, 32, 36, 40, 44, 48, 50];
    let ms = [0.6, 1.0, 5.0, 10.0, 120.0];
    ns.iter().enumerate().map(|(i, &n)| (n, ms[i % ms.len()])).collect()
}

/// `||(mB - C)K + (mI + A_s)|| <= 1e-10 ||mI + A_s||` on 20 pairs.
pub fn gain_identity() -> CheckResult {
    run("2", "gain identity residual", 30, || {
        let basis = match SpectralBasis::enumerate(Rectangle::unit_square(), 60) {
            Ok(b) => b,
            Err(e) => return (false, e.to_string()),
        };
        let mut worst: f64 = 0.0;
        let mut failures = Vec::new();
        for (n, m) in gain_pairs() {
            let outcome = LiftingSystem::build(&basis, n).and_then(|sys| {
                let (b, c) = assemble_bc(&sys);
                gain(&basis.lambdas()[..n], &b, &c, m)
            });
            match outcome {
                Ok(sol) => {
                    worst = worst.max(sol.relative_residual);
                    if !(sol.relative_residual <= 1e-10) {
                        failures.push(format!("N={n} m={m}: {:.2e}", sol.relative_residual));
                    }
                }
                Err(e) => failures.push(format!("N={n} m={m}: {e}")),
            }
        }
        (
            failures.is_empty(),
            format!("worst relative residual {worst:.2e}; failures: {failures:?}"),
        )
    })
}

/// The `N = 5..=200` sweep at `m = 0.6`.
pub fn scaling_rows(exec: Execution) -> Vec<SweepRow> {
    let ns: Vec<usize> = (SWEEP_RANGE.0..=SWEEP_RANGE.1).collect();
    scaling_sweep(Rectangle::unit_square(), &ns, SWEEP_M, None, exec)
}

fn slope_check(rows: &[SweepRow], column: impl Fn(&SweepRow) -> f64, target: f64, tol: f64) -> (bool, String) {
    let bad: Vec<usize> = rows.iter().filter(|r| !r.is_ok()).map(|r| r.n).collect();
    if !bad.is_empty() {
        return (false, format!("sweep failed at N = {bad:?}"));
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
    let ys: Vec<f64> = rows.iter().map(column).collect();
    match fit_loglog_slope(&xs, &ys) {
        Ok(s) => (
            (s.slope - target).abs() <= tol,
            format!(
                "slope {:+.3} ± {:.3} (target {target:+.2} ± {tol:.2})",
                s.slope, s.stderr
            ),
        ),
        Err(e) => (false, format!("{e}")),
    }
}

fn closed_loop_check(rows: &[SweepRow]) -> (bool, String) {
    let singular: Vec<&SweepRow> = rows
        .iter()
        .filter(|r| r.is_ok() && (r.closed_loop_rank < r.n || !r.closed_loop_inverse_norm.is_finite()))
        .collect();
    match singular.last() {
        Some(r) => (
            false,
            format!(
                "I + BK is singular at {} of {} sizes (N = {}: rank {}), so the inverse norm is unbounded",
                singular.len(),
                rows.len(),
                r.n,
                r.closed_loop_rank
            ),
        ),
        None => slope_check(rows, |r| r.closed_loop_inverse_norm, 0.73, 0.20),
    }
}

/// Slopes of `||K||`, the zeta sum and `||(I + BK)^{-1}||` over the sweep.
/// The sweep itself is shared by the three checks.
pub fn scaling_slopes(exec: Execution) -> Vec<CheckResult> {
    let start = Instant::now();
    let rows = scaling_rows(exec);
    let elapsed = start.elapsed();
    let budget = Duration::from_secs(600);
    vec![
        timed(
            "3a",
            "gain norm slope",
            budget,
            elapsed,
            slope_check(&rows, |r| r.norm_k, -1.50, 0.15),
        ),
        timed(
            "3b",
            "spillover sum slope",
            budget,
            elapsed,
            slope_check(&rows, |r| r.zeta_sum, 2.50, 0.20),
        ),
        timed(
            "3c",
            "closed-loop inverse norm slope",
            budget,
            elapsed,
            closed_loop_check(&rows),
        ),
    ]
}

/// The reference scenario: `f = 50 sin z + 50 z`, `z_0 = cos x`, `N = 6`,
/// `m = 120`, 120 modes, one line at `x = 1/2`.
pub fn reference_scenario() -> Scenario {
    Scenario {
        t_end: 1.0,
        samples: 101,
        ..Scenario::default()
    }
}

/// `||p(t)||^2 <= e^{-(2m-1)t} ||p_0||^2` for `f = 0` at the smallest certified
/// `N` with `m = 0.6`.
pub fn linear_envelope() -> CheckResult {
    run("4", "linear decay envelope", 60, || {
        let (n, _) = match find_min_n(Rectangle::unit_square(), |_| SWEEP_M, 50, None) {
            Ok(v) => v,
            Err(e) => return (false, e.to_string()),
        };
        let sc = Scenario {
            n,
            m: SWEEP_M,
            nonlinearity: Nonlinearity::Zero,
            lipschitz: 0.0,
            t_end: 5.0,
            samples: 201,
            ..reference_scenario()
        };
        match simulate_scenario(Kind::StateFeedback, &sc) {
            Ok(tr) if tr.is_complete() => {
                let p0 = tr.samples[0].norm_p.powi(2);
                let rate = 2.0 * SWEEP_M - 1.0;
                let slack = 1e-6;
                let violations = tr
                    .samples
                    .iter()
                    .filter(|s| s.norm_p.powi(2) > (-rate * s.t).exp() * p0 * (1.0 + slack))
                    .count();
                (
                    violations == 0,
                    format!(
                        "N = {n}, m = {SWEEP_M}: {violations} violations over {} samples",
                        tr.samples.len()
                    ),
                )
            }
            Ok(tr) => (false, format!("integration stopped: {:?}", tr.failure)),
            Err(e) => (false, e.to_string()),
        }
    })
}

fn growth_rate(tr: &Trajectory, values: &[f64]) -> Result<f64, String> {
    let t = tr.times();
    decay_fit(&t, values, (0.0, f64::INFINITY))
        .map(|f| -f.rate)
        .map_err(|e| e.to_string())
}

/// Open-loop growth, closed-loop decay of `z` and observer-error decay on the
/// reference scenario.
pub fn reference_reproduction() -> Vec<CheckResult> {
    let sc = reference_scenario();
    let mut out = Vec::new();

    out.push(run("5a", "open loop grows", 300, || {
        match simulate_scenario(Kind::OpenLoop, &sc) {
            Ok(tr) => match growth_rate(&tr, &tr.norm_z()) {
                Ok(g) => (g > 0.0 && tr.is_complete(), format!("fitted growth rate {g:.3}")),
                Err(e) => (false, e),
            },
            Err(e) => (false, e.to_string()),
        }
    }));

    let start = Instant::now();
    let closed = simulate_scenario(Kind::OutputFeedback, &sc);
    let elapsed = start.elapsed();
    let budget = Duration::from_secs(300);
    match closed {
        Ok(tr) => {
            let z0 = tr.samples[0].norm_z;
            let last = tr.last().expect("nonempty");
            let ratio = last.norm_z / z0;
            out.push(timed(
                "5b",
                "output feedback: |z(1)|/|z(0)| <= 1e-3",
                budget,
                elapsed,
                (
                    tr.is_complete() && last.t <= 1.0 && ratio <= 1e-3,
                    format!("ratio {ratio:.3e} at T = {}", last.t),
                ),
            ));
            let check = match growth_rate(&tr, &tr.norm_eps()) {
                Ok(g) => (-g > 0.0, format!("fitted error decay rate {:.3}", -g)),
                Err(e) => (false, e),
            };
            out.push(timed("5c", "observer error decays", budget, elapsed, check));
        }
        Err(e) => {
            for (id, name) in [
                ("5b", "output feedback: |z(1)|/|z(0)| <= 1e-3"),
                ("5c", "observer error decays"),
            ] {
                out.push(timed(id, name, budget, elapsed, (false, e.to_string())));
            }
        }
    }
    out
}

/// `||eps(t)|| <= ||eps(0)|| e^{(L - 17 pi^2) t}` with three equidistant
/// vertical lines, per subdomain and in total.
pub fn guaranteed_observer_envelope() -> CheckResult {
    run("6", "observer envelope, 3 vertical lines", 120, || {
        let sc = Scenario {
            vertical_lines: vec![0.25, 0.5, 0.75],
            ..reference_scenario()
        };
        match simulate_scenario(Kind::OutputFeedback, &sc) {
            Ok(tr) if tr.is_complete() => {
                let rate = 100.0 - PI * PI * 17.0;
                let first = &tr.samples[0];
                let mut violations = 0;
                let mut worst: f64 = 0.0;
                for s in &tr.samples {
                    let env = (rate * s.t).exp();
                    let mut bounded = vec![(s.norm_eps, first.norm_eps)];
                    bounded.extend(s.subdomain_eps.iter().copied().zip(first.subdomain_eps.iter().copied()));
                    for (now, start) in bounded {
                        let bound = start * env;
                        if now > bound * (1.0 + 1e-6) + 1e-300 {
                            violations += 1;
                        }
                        if bound > 0.0 {
                            worst = worst.max(now / bound);
                        }
                    }
                }
                (
                    violations == 0,
                    format!("{violations} violations, largest norm/envelope {worst:.3}"),
                )
            }
            Ok(tr) => (false, format!("integration stopped: {:?}", tr.failure)),
            Err(e) => (false, e.to_string()),
        }
    })
}

/// Minimal line count for `L = 100` against exhaustive search, and equidistant
/// spacing against seeded random partitions.
pub fn sensor_minimality(seed: u64) -> CheckResult {
    run("7", "sensor minimality and equidistant optimality", 10, || {
        let domain = Rectangle::unit_square();
        let lipschitz = 100.0;
        let found = match minimal_sensor_lines(lipschitz, domain) {
            Ok(s) => s,
            Err(e) => return (false, e.to_string()),
        };
        // exhaustive: smallest total with any satisfying split
        let mut exhaustive = None;
        'outer: for total in 0..=4usize {
            for m1 in 0..=total {
                let m2 = total - m1;
                let score = ((m1 + 1) * (m1 + 1) + (m2 + 1) * (m2 + 1)) as f64;
                if lipschitz < PI * PI * score {
                    exhaustive = Some(total);
                    break 'outer;
                }
            }
        }
        let corner = (found.vertical, found.horizontal) == (found.total, 0)
            || (found.vertical, found.horizontal) == (0, found.total);
        let split_ok = best_split(&domain, found.total) == (found.vertical, found.horizontal);

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut beaten = 0;
        for _ in 0..1000 {
            let total = rng.random_range(1..=4usize);
            let m1 = rng.random_range(0..=total);
            let eq = SensorPartition::equidistant(m1, total - m1, domain).spacing_bound();
            let r = SensorPartition::random(m1, total - m1, domain, &mut rng).spacing_bound();
            if r > eq * (1.0 + 1e-12) {
                beaten += 1;
            }
        }
        (
            found.total == 3 && exhaustive == Some(3) && corner && split_ok && beaten == 0,
            format!(
                "M = {} ({}, {}), exhaustive M = {:?}, {beaten} random partitions beat equidistant",
                found.total, found.vertical, found.horizontal, exhaustive
            ),
        )
    })
}

/// Output feedback with exact initial estimate and `f = 0` against state
/// feedback, plus truncation refinement of the reference scenario.
pub fn consistency() -> Vec<CheckResult> {
    let mut out = Vec::new();
    out.push(run("8a", "observer consistency with state feedback", 600, || {
        let sc = Scenario {
            nonlinearity: Nonlinearity::Zero,
            lipschitz: 0.0,
            error_init: ErrorInit::Zero,
            ..reference_scenario()
        };
        let a = simulate_scenario(Kind::OutputFeedback, &sc);
        let b = simulate_scenario(Kind::StateFeedback, &sc);
        match (a, b) {
            (Ok(a), Ok(b)) if a.is_complete() && b.is_complete() => {
                let tol = sc.tolerances;
                let mut worst: f64 = 0.0;
                let mut violations = 0;
                for (x, y) in a.samples.iter().zip(&b.samples) {
                    for (p, q) in [(x.norm_p, y.norm_p), (x.norm_z, y.norm_z)] {
                        let allowed = 10.0 * (tol.rtol * q.abs() + tol.atol);
                        let diff = (p - q).abs();
                        worst = worst.max(diff / allowed);
                        if diff > allowed {
                            violations += 1;
                        }
                    }
                }
                (
                    violations == 0,
                    format!("{violations} violations, worst diff/allowed {worst:.3}"),
                )
            }
            (a, b) => (false, format!("runs failed: {:?} / {:?}", a.err(), b.err())),
        }
    }));

    let base = reference_scenario();
    let refined = [
        (
            "8b",
            "doubling modes moves terminal norms < 1%",
            Scenario {
                modes: 2 * base.modes,
                ..base.clone()
            },
        ),
        (
            "8c",
            "doubling subdomain modes moves terminal norms < 1%",
            Scenario {
                sub_modes: 2 * base.sub_modes,
                ..base.clone()
            },
        ),
    ];
    let coarse = simulate_scenario(Kind::OutputFeedback, &base);
    for (id, name, sc) in refined {
        out.push(run(id, name, 600, || {
            let fine = simulate_scenario(Kind::OutputFeedback, &sc);
            match (&coarse, fine) {
                (Ok(c), Ok(f)) if c.is_complete() && f.is_complete() => {
                    let (c, f) = (c.last().unwrap(), f.last().unwrap());
                    let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE);
                    let dz = rel(c.norm_z, f.norm_z);
                    let de = rel(c.norm_eps, f.norm_eps);
                    (
                        dz < 0.01 && de < 0.01,
                        format!("relative change |z(T)| {dz:.2e}, |eps(T)| {de:.2e}"),
                    )
                }
                (c, f) => (false, format!("runs failed: {:?} / {:?}", c.as_ref().err(), f.err())),
            }
        }));
    }
    out
}

/// Every check in order.
pub fn run_all(exec: Execution, seed: u64) -> Vec<CheckResult> {
    let mut out = vec![spectral_exactness(), gain_identity()];
    out.extend(scaling_slopes(exec));
    out.push(linear_envelope());
    out.extend(reference_reproduction());
    out.push(guaranteed_observer_envelope());
    out.push(sensor_minimality(seed));
    out.extend(consistency());
    out
}
