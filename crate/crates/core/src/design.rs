//! Controller synthesis: the reduced matrices `B`, `C`, the gain `K`, the
//! spillover sums `zeta_{i,j}` and the stability margin that certifies a
//! design.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lifting::LiftingSystem;
use crate::linalg::{self, spectral_norm};
use crate::par::{self, Execution};
use crate::spectral::{Edge, Rectangle, SpectralBasis};

/// Above this condition estimate of `mB - C` the gain is rejected.
pub const MAX_CONDITION: f64 = 1e12;
/// Default relative tolerance of the zeta convergence check.
pub const ZETA_REL_TOL: f64 = 1e-6;
/// Singular values of `I + BK` below this fraction of the largest are
/// treated as zero by the pseudo-inverse.
pub const CLOSED_LOOP_RANK_TOL: f64 = 1e-10;

/// `10 N + 200`.
pub fn default_tail_count(n: usize) -> usize {
    10 * n + 200
}

/// `B` and `C` of the reduced model `p_s' = A_s p_s + f_s - B u' - C u`.
pub fn assemble_bc(sys: &LiftingSystem) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = sys.n();
    let k = sys.k();
    let den = sys.denominators();
    let mut b = DMatrix::zeros(n, n);
    let mut c = DMatrix::zeros(n, n);
    for j in 0..n {
        for col in j..n {
            let g = sys.gram(j, col);
            if g == 0.0 {
                continue;
            }
            let (mut sb, mut sc) = (0.0, 0.0);
            for i in 0..n {
                let w = 1.0 / (den[(i, j)] * den[(i, col)]);
                sb += w;
                sc += k[i] * w;
            }
            b[(j, col)] = g * sb;
            b[(col, j)] = g * sb;
            c[(j, col)] = g * sc;
            c[(col, j)] = g * sc;
        }
    }
    (b, c)
}

#[derive(Clone, Debug)]
pub struct GainSolution {
    pub k: DMatrix<f64>,
    /// `||(mB - C) K + (mI + A_s)||_2`.
    pub residual: f64,
    /// `residual / ||mI + A_s||_2`.
    pub relative_residual: f64,
    /// Condition estimate of `mB - C`.
    pub condition: f64,
}

/// Solves `(mB - C) K = -(mI + A_s)` with `A_s = diag(-lambda_1..-lambda_N)`.
pub fn gain(lambdas: &[f64], b: &DMatrix<f64>, c: &DMatrix<f64>, m: f64) -> Result<GainSolution> {
    if !(m > 0.5) {
        return Err(Error::TuningTooSmall { m });
    }
    let n = lambdas.len();
    if b.shape() != (n, n) || c.shape() != (n, n) {
        return Err(Error::DimensionMismatch {
            expected: n * n,
            found: b.len(),
        });
    }
    let lhs = b * m - c;
    let rhs = DMatrix::from_diagonal(&DVector::from_iterator(n, lambdas.iter().map(|l| m - l)));
    let condition = linalg::condition_number(&lhs);
    if !(condition <= MAX_CONDITION) {
        return Err(Error::IllConditioned { condition });
    }
    let k = linalg::solve(&lhs, &(-&rhs)).ok_or(Error::IllConditioned {
        condition: f64::INFINITY,
    })?;
    let residual = spectral_norm(&(&lhs * &k + &rhs));
    let scale = spectral_norm(&rhs);
    Ok(GainSolution {
        k,
        residual,
        relative_residual: if scale > 0.0 { residual / scale } else { residual },
        condition,
    })
}

/// `sum_{q >= 1} q^2 / (a^2 + q^2)^2`, from the partial-fraction expansion
/// of `pi a coth(pi a)`.
pub(crate) fn family_series(a: f64) -> f64 {
    let x = PI * a;
    let coth = 1.0 / x.tanh();
    let csch_sq = if x > 350.0 { 0.0 } else { 1.0 / x.sinh().powi(2) };
    // s1 = sum 1/(q^2 + a^2), s2 = sum 1/(q^2 + a^2)^2 = -s1'(a) / (2a)
    let s1 = (x * coth - 1.0) / (2.0 * a * a);
    let ds1 = ((PI * coth - PI * x * csch_sq) * a - 2.0 * (x * coth - 1.0)) / (2.0 * a.powi(3));
    let s2 = -ds1 / (2.0 * a);
    s1 - a * a * s2
}

#[derive(Clone, Debug)]
pub struct ZetaMatrix {
    /// `zeta_{i,j} = sum_{n > N} <D_i(d_n phi_j), phi_n>^2`, summed to infinity.
    pub zeta: DMatrix<f64>,
    /// The explicit sum over `n = N+1..N+tail_count`.
    pub truncated: DMatrix<f64>,
    /// Largest relative share of `zeta` lying beyond the explicit sum.
    pub tail_estimate: f64,
    /// Largest relative change of the corrected sums between 90% and 100%
    /// of `tail_count`.
    pub increment: f64,
    pub tail_count: usize,
}

/// Spillover sums with the default convergence tolerance.
pub fn zeta_matrix(sys: &LiftingSystem, tail_count: usize) -> Result<ZetaMatrix> {
    zeta_matrix_with_tol(sys, tail_count, ZETA_REL_TOL)
}

/// Spillover sums.
///
/// The explicit part runs over the enumerated modes `N+1..N+tail_count`.
/// Traces on a rectangle edge couple only modes sharing their along-edge
/// frequency, and along each such family the squared coefficients form the
/// series `q^2 / (alpha + beta q^2)^2`, whose infinite sum is known in
/// closed form. The part beyond the enumerated modes is added from it, and
/// the corrected sums at 90% and 100% of `tail_count` must agree to
/// `rel_tol`.
pub fn zeta_matrix_with_tol(sys: &LiftingSystem, tail_count: usize, rel_tol: f64) -> Result<ZetaMatrix> {
    let n = sys.n();
    let basis = sys.basis();
    if tail_count == 0 || n + tail_count > basis.count() {
        return Err(Error::BasisTooSmall {
            n: n + tail_count,
            count: basis.count(),
        });
    }
    let coarse = (tail_count * 9 / 10).max(1);
    let fine = corrected_zeta(sys, tail_count)?;
    let rough = corrected_zeta(sys, coarse)?;
    let mut increment: f64 = 0.0;
    let mut tail_estimate: f64 = 0.0;
    for idx in 0..fine.0.len() {
        let z = fine.0[idx];
        if z > 0.0 {
            increment = increment.max((z - rough.0[idx]).abs() / z);
            tail_estimate = tail_estimate.max((z - fine.1[idx]) / z);
        }
    }
    if !(increment <= rel_tol) {
        return Err(Error::TailNotConverged {
            increment,
            tol: rel_tol,
        });
    }
    Ok(ZetaMatrix {
        zeta: fine.0,
        truncated: fine.1,
        tail_estimate,
        increment,
        tail_count,
    })
}

/// `(corrected, explicit)` zeta for one truncation.
fn corrected_zeta(sys: &LiftingSystem, tail_count: usize) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n = sys.n();
    let basis = sys.basis();
    let domain = *basis.domain();
    let edge = domain.controlled_edge();
    let modes = basis.modes();
    let end = n + tail_count;
    let den = sys.denominators();
    let k = sys.k();

    // tail members of each trace family, and how far each family reaches
    let mut explicit = DMatrix::zeros(n, n);
    let mut reach = std::collections::HashMap::<u32, u32>::new();
    for m in &modes[..end] {
        let (fam, q) = family_coords(edge, m.jx, m.ky);
        let e = reach.entry(fam).or_insert(0);
        *e = (*e).max(q);
    }
    for j in 0..n {
        let fam = modes[j].trace_family(edge);
        for (col, m) in modes.iter().enumerate().take(end).skip(n) {
            if m.trace_family(edge) != fam {
                continue;
            }
            let g = sys.gram(j, col);
            for i in 0..n {
                let c = g / den[(i, col)];
                explicit[(i, j)] += c * c;
            }
        }
    }

    let mut corrected = explicit.clone();
    for j in 0..n {
        let (fam, _) = family_coords(edge, modes[j].jx, modes[j].ky);
        let reached = reach.get(&fam).copied().unwrap_or(0);
        for i in 0..n {
            corrected[(i, j)] += family_remainder(&domain, k[i], modes[j].jx, modes[j].ky, reached)?;
        }
    }
    Ok((corrected, explicit))
}

/// `(family, position)`: the along-edge frequency and the other one.
fn family_coords(edge: Edge, jx: u32, ky: u32) -> (u32, u32) {
    match edge {
        Edge::Left | Edge::Right => (ky, jx),
        Edge::Bottom | Edge::Top => (jx, ky),
    }
}

/// `sum_{q > reached} <d_n phi_j, d_n phi_(q)>^2 / (k_i + lambda_(q))^2` over
/// the trace family of mode `(jx, ky)`.
fn family_remainder(domain: &Rectangle, k_i: f64, jx: u32, ky: u32, reached: u32) -> Result<f64> {
    let (w, h) = (domain.width(), domain.height());
    let c = 2.0 / (w * h).sqrt();
    // orient so that q runs across the controlled edge
    let (across, along, own_q, fam) = match domain.controlled_edge() {
        Edge::Left | Edge::Right => (w, h, jx, ky),
        Edge::Bottom | Edge::Top => (h, w, ky, jx),
    };
    let amp_j = c * own_q as f64 * PI / across;
    // |gram(j, q)| = p q
    let p = amp_j * c * PI / across * 0.5 * along;
    let beta = PI * PI / (across * across);
    let alpha = k_i + PI * PI * (fam as f64 / along).powi(2);
    if !(alpha > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "family series needs k_i + lambda > 0, got alpha = {alpha}"
        )));
    }
    let a = (alpha / beta).sqrt();
    let total = p * p / (beta * beta) * family_series(a);
    let partial: f64 = (1..=reached)
        .map(|q| {
            let qf = q as f64;
            let d = alpha + beta * qf * qf;
            p * p * qf * qf / (d * d)
        })
        .sum();
    Ok((total - partial).max(0.0))
}

#[derive(Clone, Debug, Serialize)]
pub struct Diagnostics {
    pub norm_k: f64,
    /// `||(I + BK)^{-1}||_2`, infinite when `I + BK` is singular.
    pub closed_loop_inverse_norm: f64,
    /// Numerical rank of `I + BK`.
    pub closed_loop_rank: usize,
    /// `||K^{-1}||_2 ||(K^{-1} + B)^{-1}||_2`, the factored bound.
    pub factored_inverse_bound: f64,
    /// `sum_{i,j} zeta_{i,j} / (k_i - lambda_j)^2`.
    pub zeta_sum: f64,
    /// `sum_{i,j} zeta_{i,j} (m + k_i)^2 / (k_i - lambda_j)^2`.
    pub zeta_penalty: f64,
    pub gain_residual: f64,
    pub gain_relative_residual: f64,
    pub condition: f64,
    /// `max |K^{-1}_formula - inv(K)| / max |inv(K)|` for the closed form of
    /// `K^{-1}`.
    pub inverse_formula_mismatch: f64,
    /// Whether the closed-form `K^{-1}` is strictly diagonally dominant by rows.
    pub inverse_diagonally_dominant: bool,
    pub tail_estimate: f64,
    pub min_lifting_gap: f64,
}

#[derive(Clone, Debug)]
pub struct ControllerDesign {
    pub n: usize,
    pub m: f64,
    /// Diagonal of `A_s`, i.e. `-lambda_1..-lambda_N`.
    pub a_s: Vec<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub k: DMatrix<f64>,
    pub zeta: DMatrix<f64>,
    pub lambda_next: f64,
    pub margin: f64,
    pub certified: bool,
    /// Moore-Penrose inverse of `I + BK`; the true inverse when it exists.
    pub closed_loop_pinv: DMatrix<f64>,
    pub diagnostics: Diagnostics,
}

/// Evaluates the full design and its stability margin
/// `lambda_{N+1} - m - ||K||^2 / 2 * sum zeta (m + k_i)^2 / (k_i - lambda_j)^2`.
pub fn stability_margin(sys: &LiftingSystem, m: f64, tail_count: usize) -> Result<ControllerDesign> {
    let n = sys.n();
    let basis = sys.basis();
    let lambdas: Vec<f64> = basis.modes()[..n].iter().map(|x| x.lambda).collect();
    let (b, c) = assemble_bc(sys);
    let sol = gain(&lambdas, &b, &c, m)?;
    let zeta = zeta_matrix(sys, tail_count)?;

    let k_vals = sys.k();
    let mut zeta_sum = 0.0;
    let mut zeta_penalty = 0.0;
    for i in 0..n {
        for j in 0..n {
            let d = k_vals[i] - lambdas[j];
            zeta_sum += zeta.zeta[(i, j)] / (d * d);
            zeta_penalty += zeta.zeta[(i, j)] * (m + k_vals[i]).powi(2) / (d * d);
        }
    }
    let norm_k = spectral_norm(&sol.k);
    let lambda_next = basis.mode(n + 1).lambda;
    let margin = lambda_next - m - 0.5 * norm_k * norm_k * zeta_penalty;

    let ibk = DMatrix::identity(n, n) + &b * &sol.k;
    let sv = linalg::singular_values(&ibk);
    let smin = *sv.last().unwrap_or(&0.0);
    let closed_loop_inverse_norm = if smin > 0.0 { 1.0 / smin } else { f64::INFINITY };
    let (closed_loop_pinv, closed_loop_rank) = linalg::pseudo_inverse(&ibk, CLOSED_LOOP_RANK_TOL);

    // closed form of K^{-1}: -(mI + A_s)^{-1} (mB - C)
    let mbc = &b * m - &c;
    let k_inv_formula = DMatrix::from_fn(n, n, |j, col| -mbc[(j, col)] / (m - lambdas[j]));
    let (inverse_formula_mismatch, factored_inverse_bound) = match sol.k.clone().try_inverse() {
        Some(k_inv) => {
            let scale = k_inv.amax();
            let mismatch = (&k_inv_formula - &k_inv).amax() / scale;
            let kb = &k_inv + &b;
            let s = linalg::singular_values(&kb);
            let kb_inv = match s.last() {
                Some(&lo) if lo > 0.0 => 1.0 / lo,
                _ => f64::INFINITY,
            };
            (mismatch, spectral_norm(&k_inv) * kb_inv)
        }
        None => (f64::NAN, f64::INFINITY),
    };
    let inverse_diagonally_dominant = (0..n).all(|j| {
        let off: f64 = (0..n).filter(|&c| c != j).map(|c| k_inv_formula[(j, c)].abs()).sum();
        k_inv_formula[(j, j)].abs() > off
    });

    let diagnostics = Diagnostics {
        norm_k,
        closed_loop_inverse_norm,
        closed_loop_rank,
        factored_inverse_bound,
        zeta_sum,
        zeta_penalty,
        gain_residual: sol.residual,
        gain_relative_residual: sol.relative_residual,
        condition: sol.condition,
        inverse_formula_mismatch,
        inverse_diagonally_dominant,
        tail_estimate: zeta.tail_estimate,
        min_lifting_gap: sys.min_gap(),
    };
    Ok(ControllerDesign {
        n,
        m,
        a_s: lambdas.iter().map(|l| -l).collect(),
        b,
        c,
        k: sol.k,
        zeta: zeta.zeta,
        lambda_next,
        margin,
        certified: margin > 0.0 && m > 0.5,
        closed_loop_pinv,
        diagnostics,
    })
}

/// Enumerates a basis large enough for the zeta tail and designs the
/// controller of dimension `n`.
pub fn design_for(domain: Rectangle, n: usize, m: f64, tail_count: Option<usize>) -> Result<ControllerDesign> {
    let tail = tail_count.unwrap_or_else(|| default_tail_count(n));
    let basis = SpectralBasis::enumerate(domain, n + tail)?;
    let sys = LiftingSystem::build(&basis, n)?;
    stability_margin(&sys, m, tail)
}

#[derive(Clone, Debug, Serialize)]
pub struct MarginRow {
    pub n: usize,
    pub m: f64,
    pub margin: Option<f64>,
    pub certified: bool,
    pub error: Option<String>,
}

/// Smallest `N <= n_max` whose design with `m = m_rule(N)` has a positive
/// margin, with the table of every probed `N`.
pub fn find_min_n(
    domain: Rectangle,
    m_rule: impl Fn(usize) -> f64,
    n_max: usize,
    tail_count: Option<usize>,
) -> Result<(usize, Vec<MarginRow>)> {
    let mut table = Vec::new();
    for n in 1..=n_max {
        let m = m_rule(n);
        let row = match design_for(domain, n, m, tail_count) {
            Ok(d) => MarginRow {
                n,
                m,
                margin: Some(d.margin),
                certified: d.certified,
                error: None,
            },
            Err(e) => MarginRow {
                n,
                m,
                margin: None,
                certified: false,
                error: Some(e.to_string()),
            },
        };
        let done = row.certified;
        table.push(row);
        if done {
            return Ok((n, table));
        }
    }
    Err(Error::NotFound { n_max, table })
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub n: usize,
    pub m: f64,
    pub norm_k: f64,
    pub zeta_sum: f64,
    pub zeta_penalty: f64,
    pub closed_loop_inverse_norm: f64,
    pub closed_loop_rank: usize,
    pub margin: f64,
    pub status: String,
}

impl SweepRow {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

/// One design per `N`; failures are kept as rows with their error message.
pub fn scaling_sweep(
    domain: Rectangle,
    n_list: &[usize],
    m: f64,
    tail_count: Option<usize>,
    exec: Execution,
) -> Vec<SweepRow> {
    par::map(n_list, exec, |&n| match design_for(domain, n, m, tail_count) {
        Ok(d) => SweepRow {
            n,
            m,
            norm_k: d.diagnostics.norm_k,
            zeta_sum: d.diagnostics.zeta_sum,
            zeta_penalty: d.diagnostics.zeta_penalty,
            closed_loop_inverse_norm: d.diagnostics.closed_loop_inverse_norm,
            closed_loop_rank: d.diagnostics.closed_loop_rank,
            margin: d.margin,
            status: "ok".into(),
        },
        Err(e) => SweepRow {
            n,
            m,
            norm_k: f64::NAN,
            zeta_sum: f64::NAN,
            zeta_penalty: f64::NAN,
            closed_loop_inverse_norm: f64::NAN,
            closed_loop_rank: 0,
            margin: f64::NAN,
            status: e.to_string(),
        },
    })
}
