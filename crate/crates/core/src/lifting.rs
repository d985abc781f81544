//! Dirichlet lifting of the boundary control.
//!
//! Each Dirichlet map is carried by its modal coefficients
//!
//! ```text
//! <D_i(g), phi_n> = -<g, d_n phi_n>_{Gamma_1} / (k_i + lambda_n - 2 lambda_n [n <= N])
//! ```
//!
//! so the elliptic lifting problem is never solved on a grid. Boundary
//! profiles are restricted to the span of the traces `d_n phi_j`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::spectral::SpectralBasis;

/// Relative floor on `|denominator|`, scaled by `lambda_N`.
pub const DEFAULT_SINGULARITY_FLOOR: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct LiftingSystem {
    basis: SpectralBasis,
    n: usize,
    k: Vec<f64>,
    /// `N x M`: `k_i - lambda_n` for `n <= N`, `k_i + lambda_n` beyond.
    denominators: DMatrix<f64>,
    min_abs_denominator: f64,
    min_gap: f64,
}

impl LiftingSystem {
    pub fn build(basis: &SpectralBasis, n: usize) -> Result<Self> {
        Self::build_with_floor(basis, n, DEFAULT_SINGULARITY_FLOOR)
    }

    /// `floor` is relative to `lambda_N`.
    pub fn build_with_floor(basis: &SpectralBasis, n: usize, floor: f64) -> Result<Self> {
        if n == 0 || n >= basis.count() {
            return Err(Error::BasisTooSmall {
                n,
                count: basis.count(),
            });
        }
        let modes = basis.modes();
        let lambda_n = modes[n - 1].lambda;
        let shift = lambda_n.powf(-0.75);
        let k: Vec<f64> = modes[..n]
            .iter()
            .map(|m| m.lambda - m.trace_norm_sq.sqrt() * shift)
            .collect();

        let floor = floor * lambda_n;
        let m_count = basis.count();
        let denominators = DMatrix::from_fn(n, m_count, |i, col| {
            let lam = modes[col].lambda;
            if col < n {
                k[i] - lam
            } else {
                k[i] + lam
            }
        });
        let mut min_abs = f64::INFINITY;
        for i in 0..n {
            for col in 0..m_count {
                let d = denominators[(i, col)];
                if d.abs() < floor || !d.is_finite() {
                    return Err(Error::SingularLifting {
                        i: i + 1,
                        j: col + 1,
                        value: d.abs(),
                        floor,
                    });
                }
                min_abs = min_abs.min(d.abs());
            }
        }
        let min_gap = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| (k[i] - modes[j].lambda).abs())
            .fold(f64::INFINITY, f64::min);

        Ok(Self {
            basis: basis.clone(),
            n,
            k,
            denominators,
            min_abs_denominator: min_abs,
            min_gap,
        })
    }

    pub fn basis(&self) -> &SpectralBasis {
        &self.basis
    }

    /// Controller dimension `N`.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of Galerkin modes `M`.
    pub fn modes(&self) -> usize {
        self.basis.count()
    }

    /// Lifting constants `k_1..k_N`.
    pub fn k(&self) -> &[f64] {
        &self.k
    }

    pub fn denominators(&self) -> &DMatrix<f64> {
        &self.denominators
    }

    /// Smallest `|denominator|` over the whole table.
    pub fn min_abs_denominator(&self) -> f64 {
        self.min_abs_denominator
    }

    /// `min |k_i - lambda_j|` over `i, j <= N`.
    pub fn min_gap(&self) -> f64 {
        self.min_gap
    }

    /// `<d_n phi_a, d_n phi_b>` by 0-based index.
    pub(crate) fn gram(&self, a: usize, b: usize) -> f64 {
        let modes = self.basis.modes();
        self.basis.trace_inner_product(&modes[a], &modes[b])
    }

    /// Weights of `T_i` on the profiles `d_n phi_1..d_n phi_N`:
    /// `(T_i)_j = -1 / (k_i - lambda_j)`.
    pub fn trace_vector(&self, i: usize) -> Vec<f64> {
        (0..self.n).map(|j| -1.0 / self.denominators[(i, j)]).collect()
    }

    /// `<D_i(d_n phi_j), phi_n>`, all indices 0-based.
    pub fn coefficient(&self, i: usize, j: usize, n: usize) -> f64 {
        let g = self.gram(j, n);
        if g == 0.0 {
            0.0
        } else {
            -g / self.denominators[(i, n)]
        }
    }

    /// Modal coefficients of `D_i(d_n phi_j)` over all `M` modes
    /// (1-based `i`, `j`).
    pub fn dirichlet_coefficient(&self, i: usize, j: usize) -> Result<Vec<f64>> {
        if i == 0 || i > self.n {
            return Err(Error::IndexOutOfRange { index: i, len: self.n });
        }
        if j == 0 || j > self.modes() {
            return Err(Error::IndexOutOfRange {
                index: j,
                len: self.modes(),
            });
        }
        Ok((0..self.modes()).map(|n| self.coefficient(i - 1, j - 1, n)).collect())
    }

    /// Weights on `d_n phi_1..d_n phi_N` of the boundary value
    /// `U_i = <u, T_i>`.
    pub fn boundary_profile(&self, i: usize, u: &[f64]) -> Vec<f64> {
        self.trace_vector(i).iter().zip(u).map(|(t, v)| t * v).collect()
    }

    fn lift_matrix_weighted(&self, weights: impl Fn(usize) -> f64) -> DMatrix<f64> {
        let m_count = self.modes();
        let mut out = DMatrix::zeros(m_count, self.n);
        for j in 0..self.n {
            for n in 0..m_count {
                let g = self.gram(j, n);
                if g == 0.0 {
                    continue;
                }
                let mut acc = 0.0;
                for i in 0..self.n {
                    acc += weights(i) / (self.denominators[(i, j)] * self.denominators[(i, n)]);
                }
                out[(n, j)] = g * acc;
            }
        }
        out
    }

    /// `M x N` matrix of `u -> sum_i D_i(<u, T_i>)` in modal coordinates.
    /// Its first `N` rows are `B`.
    pub fn lift_matrix(&self) -> DMatrix<f64> {
        self.lift_matrix_weighted(|_| 1.0)
    }

    /// Same as [`lift_matrix`](Self::lift_matrix) with each map weighted by
    /// `k_i`; its first `N` rows are `C`.
    pub fn lift_matrix_k(&self) -> DMatrix<f64> {
        self.lift_matrix_weighted(|i| self.k[i])
    }

    /// Modal coefficients of `sum_i D_i U_i`.
    pub fn lift_field(&self, u: &[f64]) -> Result<Vec<f64>> {
        if u.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: u.len(),
            });
        }
        let mut out = vec![0.0; self.modes()];
        for i in 0..self.n {
            for (j, w) in self.boundary_profile(i, u).into_iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                for (n, o) in out.iter_mut().enumerate() {
                    *o += w * self.coefficient(i, j, n);
                }
            }
        }
        Ok(out)
    }
}
