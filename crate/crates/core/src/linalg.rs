//! Small dense helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

pub const POWER_ITERATION_TOL: f64 = 1e-10;
pub const POWER_ITERATION_CAP: usize = 10_000;

/// `||m||_2` by power iteration on `m^T m`, seeded with the normalized
/// all-ones vector so repeated calls are bit-identical.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let gram = m.transpose() * m;
    let n = gram.ncols();
    let mut v = DVector::from_element(n, 1.0 / (n as f64).sqrt());
    let mut estimate = 0.0;
    for _ in 0..POWER_ITERATION_CAP {
        let w = &gram * &v;
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        let next = norm;
        v = w / norm;
        if (next - estimate).abs() <= POWER_ITERATION_TOL * next {
            estimate = next;
            break;
        }
        estimate = next;
    }
    estimate.sqrt()
}

/// Singular values, largest first.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// `sigma_max / sigma_min`, infinite for singular input.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let s = singular_values(m);
    match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        _ => f64::INFINITY,
    }
}

/// Moore-Penrose inverse, dropping singular values below
/// `rel_tol * sigma_max`. Returns the inverse and the retained rank.
pub fn pseudo_inverse(m: &DMatrix<f64>, rel_tol: f64) -> (DMatrix<f64>, usize) {
    let svd = m.clone().svd(true, true);
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let cut = rel_tol * smax;
    let u = svd.u.expect("requested U");
    let vt = svd.v_t.expect("requested V^T");
    let mut out = DMatrix::zeros(m.ncols(), m.nrows());
    let mut rank = 0;
    for (idx, &s) in svd.singular_values.iter().enumerate() {
        if s > cut && s > 0.0 {
            rank += 1;
            out += vt.row(idx).transpose() * u.column(idx).transpose() / s;
        }
    }
    (out, rank)
}

/// LU solve of `a x = b`; `None` when `a` is singular.
pub fn solve(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    a.clone().lu().solve(b)
}

/// `sup w^T a w / w^T g w` over `w` outside the null space of the
/// positive semidefinite `g`.
pub fn generalized_max_ratio(a: &DMatrix<f64>, g: &DMatrix<f64>) -> f64 {
    let eig = g.clone().symmetric_eigen();
    let gmax = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..eig.eigenvalues.len())
        .filter(|&i| eig.eigenvalues[i] > 1e-12 * gmax)
        .collect();
    if keep.is_empty() {
        return 0.0;
    }
    let w = DMatrix::from_fn(g.nrows(), keep.len(), |r, c| {
        let i = keep[c];
        eig.eigenvectors[(r, i)] / eig.eigenvalues[i].sqrt()
    });
    let reduced = w.transpose() * a * &w;
    let sym = (&reduced + reduced.transpose()) * 0.5;
    sym.symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Euclidean norm of a slice.
/// Euclidean norm, scaled so that large entries do not overflow.
pub fn norm2(v: &[f64]) -> f64 {
    let big = v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    if big == 0.0 || !big.is_finite() {
        return if v.iter().any(|x| x.is_nan()) { f64::NAN } else { big };
    }
    big * v.iter().fold(0.0, |acc, x| acc + (x / big) * (x / big)).sqrt()
}
