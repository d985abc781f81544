//! Per-subdomain estimation-error dynamics: each subdomain of a sensor
//! partition carries its own Dirichlet sine basis, and errors are mapped
//! into global modal coordinates through closed-form cross integrals.

use nalgebra::DMatrix;

use crate::error::Result;
use crate::sensors::{SensorPartition, Subdomain};
use crate::spectral::{grid_size, Rectangle, SineTransform, SpectralBasis, TensorGrid};

/// `sin(s) / s`, continuous at 0.
fn sinc(s: f64) -> f64 {
    if s.abs() < 1e-4 {
        1.0 - s * s / 6.0
    } else {
        s.sin() / s
    }
}

/// `int_{x0}^{x0+w} cos(kappa x + shift) dx`.
fn cos_integral(kappa: f64, shift: f64, x0: f64, w: f64) -> f64 {
    w * (kappa * (x0 + 0.5 * w) + shift).cos() * sinc(0.5 * kappa * w)
}

/// `int_{x0}^{x0+w} sin(j pi (x - x0) / w) sin(q pi x / extent) dx`.
pub(crate) fn cross_sine_integral(x0: f64, w: f64, j: u32, extent: f64, q: u32) -> f64 {
    let a = j as f64 * std::f64::consts::PI / w;
    let b = q as f64 * std::f64::consts::PI / extent;
    0.5 * (cos_integral(a - b, -a * x0, x0, w) - cos_integral(a + b, -a * x0, x0, w))
}

/// One subdomain: its basis, grid, transforms and the map into global modes.
#[derive(Clone, Debug)]
pub struct SubdomainBank {
    pub region: Subdomain,
    /// Subdomain eigenvalues, ascending.
    pub lambdas: Vec<f64>,
    /// Subdomain modes on the subdomain grid, with projection.
    pub local: SineTransform,
    /// The first global modes sampled on the subdomain grid.
    pub global: SineTransform,
    /// `cross[(n, q)] = <psi_q, phi_n>`, global mode `n` against local mode `q`.
    pub cross: DMatrix<f64>,
    pub grid: TensorGrid,
}

impl SubdomainBank {
    pub fn new(
        region: Subdomain,
        domain: &Rectangle,
        global_freqs: &[(u32, u32)],
        modes: usize,
        oversampling: usize,
    ) -> Result<Self> {
        let rect = Rectangle::new(region.width, region.height, domain.controlled_edge())?;
        let basis = SpectralBasis::enumerate(rect, modes)?;
        let (jmax, kmax) = basis.max_frequencies();
        // the grid must also carry the global modes restricted to the subdomain
        let gj = global_freqs.iter().map(|f| f.0).max().unwrap_or(1) as f64 * region.width / domain.width();
        let gk = global_freqs.iter().map(|f| f.1).max().unwrap_or(1) as f64 * region.height / domain.height();
        let nx = grid_size(jmax.max(gj.ceil() as u32), oversampling);
        let ny = grid_size(kmax.max(gk.ceil() as u32), oversampling);
        let (local, grid) = SineTransform::on_interior_grid(
            region.x0,
            region.y0,
            region.width,
            region.height,
            basis.frequencies(),
            nx,
            ny,
        );
        let global = SineTransform::evaluator(0.0, 0.0, domain.width(), domain.height(), global_freqs.to_vec(), &grid);
        let norm = 2.0 / (region.area()).sqrt() * 2.0 / (domain.area()).sqrt();
        let cross = DMatrix::from_fn(global_freqs.len(), basis.count(), |n, q| {
            let (gx, gy) = global_freqs[n];
            let m = basis.mode(q + 1);
            norm * cross_sine_integral(region.x0, region.width, m.jx, domain.width(), gx)
                * cross_sine_integral(region.y0, region.height, m.ky, domain.height(), gy)
        });
        Ok(Self {
            region,
            lambdas: basis.lambdas(),
            local,
            global,
            cross,
            grid,
        })
    }

    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }
}

/// All subdomains of a partition.
#[derive(Clone, Debug)]
pub struct ObserverBank {
    pub banks: Vec<SubdomainBank>,
}

impl ObserverBank {
    pub fn new(
        partition: &SensorPartition,
        global_freqs: &[(u32, u32)],
        modes_per_subdomain: usize,
        oversampling: usize,
    ) -> Result<Self> {
        let banks = partition
            .subdomains()
            .iter()
            .map(|s| SubdomainBank::new(*s, partition.domain(), global_freqs, modes_per_subdomain, oversampling))
            .collect::<Result<_>>()?;
        Ok(Self { banks })
    }

    /// Total length of the stacked error vector.
    pub fn dim(&self) -> usize {
        self.banks.iter().map(SubdomainBank::len).sum()
    }

    /// Offsets of each subdomain's block in the stacked vector.
    pub fn offsets(&self) -> Vec<usize> {
        let mut acc = 0;
        self.banks
            .iter()
            .map(|b| {
                let o = acc;
                acc += b.len();
                o
            })
            .collect()
    }

    /// Restricts a global modal field to every subdomain basis.
    pub fn restrict(&self, global: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dim());
        for b in &self.banks {
            let rows = global.len().min(b.cross.nrows());
            for q in 0..b.len() {
                let mut acc = 0.0;
                for n in 0..rows {
                    acc += b.cross[(n, q)] * global[n];
                }
                out.push(acc);
            }
        }
        out
    }

    /// First `count` global modal coefficients of the stitched field.
    pub fn globalize(&self, stacked: &[f64], count: usize) -> Vec<f64> {
        let mut out = vec![0.0; count];
        let mut off = 0;
        for b in &self.banks {
            let local = &stacked[off..off + b.len()];
            for (n, o) in out.iter_mut().enumerate() {
                let mut acc = 0.0;
                for (q, v) in local.iter().enumerate() {
                    acc += b.cross[(n, q)] * v;
                }
                *o += acc;
            }
            off += b.len();
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::Edge;
    use approx::assert_relative_eq;

    #[test]
    fn cross_integral_matches_midpoint_rule() {
        for &(x0, w, j, big, q) in &[
            (0.0, 0.5, 1u32, 1.0, 1u32),
            (0.5, 0.5, 2, 1.0, 4),
            (0.25, 0.25, 3, 1.0, 12),
            (0.3, 1.1, 5, 2.0, 1),
        ] {
            let steps = 200_000;
            let h = w / steps as f64;
            let mut acc = 0.0;
            for i in 0..steps {
                let x = x0 + (i as f64 + 0.5) * h;
                acc += (j as f64 * std::f64::consts::PI * (x - x0) / w).sin()
                    * (q as f64 * std::f64::consts::PI * x / big).sin();
            }
            assert_relative_eq!(cross_sine_integral(x0, w, j, big, q), acc * h, epsilon = 1e-9);
        }
    }

    #[test]
    fn trivial_partition_cross_is_identity() {
        let d = Rectangle::unit_square();
        let basis = SpectralBasis::enumerate(d, 20).unwrap();
        let p = SensorPartition::equidistant(0, 0, d);
        let bank = ObserverBank::new(&p, &basis.frequencies(), 20, 4).unwrap();
        let x = &bank.banks[0].cross;
        for n in 0..20 {
            for q in 0..20 {
                let want = if n == q { 1.0 } else { 0.0 };
                assert!((x[(n, q)] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn restriction_and_globalization_round_trip() {
        // global modes do not vanish on the interface, so the local sine
        // series converge slowly; the round trip must still improve with size
        let d = Rectangle::unit_square();
        let basis = SpectralBasis::enumerate(d, 6).unwrap();
        let p = SensorPartition::new(d, vec![0.5], vec![]).unwrap();
        let g = vec![1.0, -0.5, 0.25, 0.0, 0.1, 0.3];
        let mut errors = Vec::new();
        for sub in [25, 100, 400] {
            let bank = ObserverBank::new(&p, &basis.frequencies(), sub, 4).unwrap();
            assert_eq!(bank.dim(), 2 * sub);
            assert_eq!(bank.offsets(), vec![0, sub]);
            let back = bank.globalize(&bank.restrict(&g), 6);
            errors.push(g.iter().zip(&back).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
        }
        assert!(errors[0] > errors[1] && errors[1] > errors[2], "{errors:?}");
        assert!(errors[2] < 0.05, "{errors:?}");
        let bank = ObserverBank::new(&p, &basis.frequencies(), 400, 4).unwrap();
        // Parseval on each side: restriction never gains energy
        let local = bank.restrict(&g);
        let e: f64 = local.iter().map(|v| v * v).sum();
        let total: f64 = g.iter().map(|v| v * v).sum();
        assert!(e <= total * (1.0 + 1e-12));
    }

    #[test]
    fn local_projection_is_exact_for_local_modes() {
        let d = Rectangle::new(2.0, 1.0, Edge::Left).unwrap();
        let p = SensorPartition::equidistant(1, 1, d);
        let bank = ObserverBank::new(&p, &[(1, 1)], 10, 4).unwrap();
        for b in &bank.banks {
            let mut c = vec![0.0; b.len()];
            c[3] = 1.5;
            c[7] = -2.0;
            let back = b.local.project(&b.local.synthesize(&c).unwrap()).unwrap();
            for (x, y) in c.iter().zip(&back) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }
}
