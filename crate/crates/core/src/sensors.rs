//! Measurement-line partitions of the rectangle and the observer decay
//! condition they have to satisfy.

use std::f64::consts::PI;

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::spectral::{weyl_constant, Rectangle};

/// Largest subdomain volume for which every subdomain ground eigenvalue
/// exceeds `lipschitz` in dimension `d`.
pub fn volume_threshold(d: u32, lipschitz: f64) -> Result<f64> {
    if !(lipschitz > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "Lipschitz constant must be positive, got {lipschitz}"
        )));
    }
    let cd = weyl_constant(d)?;
    let df = d as f64;
    Ok((df / (lipschitz * (df + 2.0))).powf(df / 2.0) / cd)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Subdomain {
    pub x0: f64,
    pub y0: f64,
    pub width: f64,
    pub height: f64,
}

impl Subdomain {
    pub fn area(&self) -> f64 {
        self.width * self.height
    }

    pub fn first_eigenvalue(&self) -> f64 {
        PI * PI * (self.width.powi(-2) + self.height.powi(-2))
    }

    /// Dirichlet eigenvalue of mode `(jx, ky)` of the subdomain.
    pub fn eigenvalue(&self, jx: u32, ky: u32) -> f64 {
        PI * PI * ((jx as f64 / self.width).powi(2) + (ky as f64 / self.height).powi(2))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SensorPartition {
    #[serde(skip)]
    domain: Rectangle,
    vertical_lines: Vec<f64>,
    horizontal_lines: Vec<f64>,
    subdomains: Vec<Subdomain>,
    first_eigenvalues: Vec<f64>,
}

fn validate_lines(lines: &[f64], extent: f64, name: &str) -> Result<()> {
    let mut prev = 0.0;
    for &v in lines {
        if !(v > prev && v < extent) {
            return Err(Error::InvalidArgument(format!(
                "{name} lines must be strictly increasing inside (0, {extent}), got {lines:?}"
            )));
        }
        prev = v;
    }
    Ok(())
}

fn gaps(lines: &[f64], extent: f64) -> Vec<(f64, f64)> {
    let mut cuts = Vec::with_capacity(lines.len() + 2);
    cuts.push(0.0);
    cuts.extend_from_slice(lines);
    cuts.push(extent);
    cuts.windows(2).map(|w| (w[0], w[1] - w[0])).collect()
}

impl SensorPartition {
    /// Partition by vertical lines `x = b_i` and horizontal lines `y = a_j`.
    pub fn new(domain: Rectangle, vertical_lines: Vec<f64>, horizontal_lines: Vec<f64>) -> Result<Self> {
        validate_lines(&vertical_lines, domain.width(), "vertical")?;
        validate_lines(&horizontal_lines, domain.height(), "horizontal")?;
        let xs = gaps(&vertical_lines, domain.width());
        let ys = gaps(&horizontal_lines, domain.height());
        let mut subdomains = Vec::with_capacity(xs.len() * ys.len());
        for &(x0, width) in &xs {
            for &(y0, height) in &ys {
                subdomains.push(Subdomain { x0, y0, width, height });
            }
        }
        let first_eigenvalues = subdomains.iter().map(Subdomain::first_eigenvalue).collect();
        Ok(Self {
            domain,
            vertical_lines,
            horizontal_lines,
            subdomains,
            first_eigenvalues,
        })
    }

    /// `m1` vertical and `m2` horizontal lines at equal spacing.
    pub fn equidistant(m1: usize, m2: usize, domain: Rectangle) -> Self {
        let v = (1..=m1).map(|i| domain.width() * i as f64 / (m1 + 1) as f64).collect();
        let h = (1..=m2).map(|j| domain.height() * j as f64 / (m2 + 1) as f64).collect();
        Self::new(domain, v, h).expect("equidistant lines are interior")
    }

    /// Uniformly random interior lines; used to probe equidistant optimality.
    pub fn random<R: Rng + ?Sized>(m1: usize, m2: usize, domain: Rectangle, rng: &mut R) -> Self {
        let draw = |rng: &mut R, count: usize, extent: f64| loop {
            let mut v: Vec<f64> = (0..count).map(|_| rng.random::<f64>() * extent).collect();
            v.sort_by(f64::total_cmp);
            if validate_lines(&v, extent, "").is_ok() {
                return v;
            }
        };
        let v = draw(rng, m1, domain.width());
        let h = draw(rng, m2, domain.height());
        Self::new(domain, v, h).expect("validated lines")
    }

    pub fn domain(&self) -> &Rectangle {
        &self.domain
    }

    pub fn vertical_lines(&self) -> &[f64] {
        &self.vertical_lines
    }

    pub fn horizontal_lines(&self) -> &[f64] {
        &self.horizontal_lines
    }

    pub fn subdomains(&self) -> &[Subdomain] {
        &self.subdomains
    }

    pub fn first_eigenvalues(&self) -> &[f64] {
        &self.first_eigenvalues
    }

    pub fn min_first_eigenvalue(&self) -> f64 {
        self.first_eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `min lambda_{ij,1} - L`.
    pub fn decay_margin(&self, lipschitz: f64) -> f64 {
        self.min_first_eigenvalue() - lipschitz
    }

    /// `pi^2 (min gap^-2 over x-gaps + min gap^-2 over y-gaps)`.
    pub fn spacing_bound(&self) -> f64 {
        let worst = |lines: &[f64], extent: f64| {
            gaps(lines, extent)
                .iter()
                .map(|g| g.1.powi(-2))
                .fold(f64::INFINITY, f64::min)
        };
        PI * PI
            * (worst(&self.vertical_lines, self.domain.width()) + worst(&self.horizontal_lines, self.domain.height()))
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct PartitionCheck {
    pub satisfied: bool,
    /// Spacing bound minus `L`.
    pub margin: f64,
    /// Decay rate of the observer error envelope, `min lambda_{ij,1} - L`.
    pub envelope_rate: f64,
}

pub fn check_partition(p: &SensorPartition, lipschitz: f64) -> PartitionCheck {
    let bound = p.spacing_bound();
    PartitionCheck {
        satisfied: lipschitz < bound,
        margin: bound - lipschitz,
        envelope_rate: p.decay_margin(lipschitz),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SensorLines {
    pub total: usize,
    pub vertical: usize,
    pub horizontal: usize,
    pub partition: SensorPartition,
}

/// `(M1 + 1)^2 / W^2 + (M2 + 1)^2 / H^2`.
fn split_score(domain: &Rectangle, m1: usize, m2: usize) -> f64 {
    ((m1 + 1) as f64 / domain.width()).powi(2) + ((m2 + 1) as f64 / domain.height()).powi(2)
}

/// Best split of `total` lines; the all-vertical split wins ties.
pub fn best_split(domain: &Rectangle, total: usize) -> (usize, usize) {
    let mut best = (total, 0);
    let mut score = split_score(domain, total, 0);
    for m1 in (0..total).rev() {
        let s = split_score(domain, m1, total - m1);
        if s > score {
            score = s;
            best = (m1, total - m1);
        }
    }
    best
}

/// Fewest equidistant lines whose partition satisfies the decay condition.
pub fn minimal_sensor_lines(lipschitz: f64, domain: Rectangle) -> Result<SensorLines> {
    if !(lipschitz > 0.0 && lipschitz.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "Lipschitz constant must be positive, got {lipschitz}"
        )));
    }
    let mut total = 0;
    loop {
        let (m1, m2) = best_split(&domain, total);
        if lipschitz < PI * PI * split_score(&domain, m1, m2) {
            return Ok(SensorLines {
                total,
                vertical: m1,
                horizontal: m2,
                partition: SensorPartition::equidistant(m1, m2, domain),
            });
        }
        total += 1;
    }
}

/// `||eps_0|| e^{(L - min lambda_{ij,1}) t}`.
pub fn observer_decay_envelope(p: &SensorPartition, lipschitz: f64, eps0_norm: f64, t: f64) -> Result<f64> {
    let check = check_partition(p, lipschitz);
    if !check.satisfied {
        return Err(Error::EnvelopeInvalid { margin: check.margin });
    }
    Ok(eps0_norm * (-check.envelope_rate * t).exp())
}
