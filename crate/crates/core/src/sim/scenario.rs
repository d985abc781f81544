use std::hash::{DefaultHasher, Hash, Hasher};

use serde::{Deserialize, Serialize};

use super::integrator::{integrate, IntegratorStats, Tolerances};
use super::model::{ClosedLoop, Feedback, Kind};
use super::nonlinearity::Nonlinearity;
use super::observer::ObserverBank;
use super::OVERSAMPLING;
use crate::design::{default_tail_count, stability_margin};
use crate::error::{Error, Result};
use crate::lifting::LiftingSystem;
use crate::sensors::{check_partition, SensorPartition};
use crate::spectral::{cos_sine_integral, one_sine_integral, EigenMode, Rectangle, SineTransform, SpectralBasis};

/// Builtin initial profiles `z_0(x, y)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialCondition {
    /// `amplitude * cos(x)`
    CosX { amplitude: f64 },
    /// A constant field.
    Constant { value: f64 },
    /// `amplitude * phi_rank`
    Mode { rank: usize, amplitude: f64 },
}

impl InitialCondition {
    /// `L^2` projection onto `modes`.
    pub fn coefficients(&self, modes: &[EigenMode], domain: &Rectangle) -> Result<Vec<f64>> {
        let (w, h) = (domain.width(), domain.height());
        let norm = 2.0 / (w * h).sqrt();
        match *self {
            Self::CosX { amplitude } => Ok(modes
                .iter()
                .map(|m| amplitude * norm * cos_sine_integral(w, m.jx) * one_sine_integral(h, m.ky))
                .collect()),
            Self::Constant { value } => Ok(modes
                .iter()
                .map(|m| value * norm * one_sine_integral(w, m.jx) * one_sine_integral(h, m.ky))
                .collect()),
            Self::Mode { rank, amplitude } => {
                if rank == 0 || rank > modes.len() {
                    return Err(Error::IndexOutOfRange {
                        index: rank,
                        len: modes.len(),
                    });
                }
                let mut c = vec![0.0; modes.len()];
                c[rank - 1] = amplitude;
                Ok(c)
            }
        }
    }
}

/// How the subdomain errors start.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorInit {
    /// Estimate starts at zero, so the error equals the initial state.
    #[default]
    FromState,
    /// Estimate starts at the true state.
    Zero,
}

#[derive(Clone, Debug, Serialize)]
pub struct Scenario {
    pub domain: Rectangle,
    /// Simulated modes `M`.
    pub modes: usize,
    /// Controller dimension `N`.
    pub n: usize,
    pub m: f64,
    pub tail_count: Option<usize>,
    pub nonlinearity: Nonlinearity,
    /// Declared Lipschitz constant, audited before any integration.
    pub lipschitz: f64,
    pub initial: InitialCondition,
    pub vertical_lines: Vec<f64>,
    pub horizontal_lines: Vec<f64>,
    /// Modes per subdomain for the observer errors.
    pub sub_modes: usize,
    pub error_init: ErrorInit,
    pub tolerances: Tolerances,
    pub t_end: f64,
    /// Number of output samples, including `t = 0`.
    pub samples: usize,
    pub keep_states: bool,
}

impl Default for Scenario {
    /// `f = 50 sin z + 50 z`, `z_0 = cos x`, `N = 6`, `m = 120`, 120 modes
    /// and one measurement line at `x = 1/2` on the unit square.
    fn default() -> Self {
        Self {
            domain: Rectangle::unit_square(),
            modes: 120,
            n: 6,
            m: 120.0,
            tail_count: None,
            nonlinearity: Nonlinearity::SinLinear { a: 50.0, b: 50.0 },
            lipschitz: 100.0,
            initial: InitialCondition::CosX { amplitude: 1.0 },
            vertical_lines: vec![0.5],
            horizontal_lines: Vec::new(),
            sub_modes: 40,
            error_init: ErrorInit::FromState,
            tolerances: Tolerances::default(),
            t_end: 1.0,
            samples: 101,
            keep_states: false,
        }
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.modes == 0 {
            return bad("modes must be positive".into());
        }
        if self.n == 0 || self.n > self.modes {
            return bad(format!(
                "controller dimension {} must lie in 1..={}",
                self.n, self.modes
            ));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return bad(format!("t_end must be positive, got {}", self.t_end));
        }
        if self.samples < 2 {
            return bad("need at least two samples".into());
        }
        if self.sub_modes == 0 {
            return bad("sub_modes must be positive".into());
        }
        if !(self.lipschitz >= 0.0) {
            return bad(format!(
                "declared Lipschitz constant must be nonnegative, got {}",
                self.lipschitz
            ));
        }
        self.tolerances.validate().map_err(|e| Error::Config(e.to_string()))
    }

    pub fn sample_times(&self) -> Vec<f64> {
        let last = (self.samples - 1) as f64;
        (0..self.samples).map(|i| self.t_end * i as f64 / last).collect()
    }

    pub fn partition(&self) -> Result<SensorPartition> {
        SensorPartition::new(self.domain, self.vertical_lines.clone(), self.horizontal_lines.clone())
    }

    /// Stable fingerprint of the configuration and run kind.
    pub fn fingerprint(&self, kind: Kind) -> u64 {
        let mut h = DefaultHasher::new();
        format!("{kind:?}{self:?}").hash(&mut h);
        h.finish()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Sample {
    pub t: f64,
    pub norm_p: f64,
    pub norm_eps: f64,
    pub norm_z: f64,
    pub u: Vec<f64>,
    pub subdomain_eps: Vec<f64>,
    pub state: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Trajectory {
    pub kind: Kind,
    pub samples: Vec<Sample>,
    pub config_hash: u64,
    pub stats: IntegratorStats,
    pub controls: usize,
    pub certified: Option<bool>,
    pub margin: Option<f64>,
    /// Present when integration stopped before `t_end`.
    pub failure: Option<String>,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn norm_p(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.norm_p).collect()
    }

    pub fn norm_eps(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.norm_eps).collect()
    }

    pub fn norm_z(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.norm_z).collect()
    }

    pub fn last(&self) -> Option<&Sample> {
        self.samples.last()
    }

    pub fn is_complete(&self) -> bool {
        self.failure.is_none()
    }
}

/// Builds the modal system for `kind`, integrates it and samples the norms.
pub fn simulate_scenario(kind: Kind, sc: &Scenario) -> Result<Trajectory> {
    sc.validate()?;
    sc.nonlinearity.audit(sc.lipschitz)?;

    let needs_design = kind != Kind::OpenLoop;
    let tail = sc.tail_count.unwrap_or_else(|| default_tail_count(sc.n));
    let count = if needs_design {
        sc.modes.max(sc.n + tail)
    } else {
        sc.modes
    };
    let basis = SpectralBasis::enumerate(sc.domain, count)?;
    let modes = &basis.modes()[..sc.modes];
    let freqs: Vec<(u32, u32)> = modes.iter().map(|m| (m.jx, m.ky)).collect();
    let (jmax, kmax) = freqs.iter().fold((1, 1), |(a, b), &(j, k)| (a.max(j), b.max(k)));
    let (transform, _) = SineTransform::on_interior_grid(
        0.0,
        0.0,
        sc.domain.width(),
        sc.domain.height(),
        freqs.clone(),
        crate::spectral::grid_size(jmax, OVERSAMPLING),
        crate::spectral::grid_size(kmax, OVERSAMPLING),
    );
    let p0 = sc.initial.coefficients(modes, &sc.domain)?;

    let mut certified = None;
    let mut margin = None;
    let (system, y0) = match kind {
        Kind::OpenLoop => (ClosedLoop::open_loop(&basis, sc.modes, transform, sc.nonlinearity)?, p0),
        Kind::StateFeedback | Kind::OutputFeedback => {
            let sys = LiftingSystem::build(&basis, sc.n)?;
            let design = stability_margin(&sys, sc.m, tail)?;
            if !design.certified {
                log::warn!(
                    "m = {} with N = {} is not certified (margin {:.3e}); no decay guarantee applies",
                    sc.m,
                    sc.n,
                    design.margin
                );
            }
            certified = Some(design.certified);
            margin = Some(design.margin);
            let fb = Feedback::new(&design, &sys, sc.modes)?;
            if kind == Kind::StateFeedback {
                (
                    ClosedLoop::state_feedback(&basis, sc.modes, transform, sc.nonlinearity, fb)?,
                    p0,
                )
            } else {
                let partition = sc.partition()?;
                let check = check_partition(&partition, sc.lipschitz);
                if !check.satisfied {
                    log::warn!(
                        "sensor partition misses the decay condition by {:.3}; observer decay is not guaranteed",
                        -check.margin
                    );
                }
                let obs = ObserverBank::new(&partition, &freqs, sc.sub_modes, OVERSAMPLING)?;
                let mut y0 = p0.clone();
                match sc.error_init {
                    ErrorInit::FromState => y0.extend(obs.restrict(&p0)),
                    ErrorInit::Zero => y0.extend(std::iter::repeat_n(0.0, obs.dim())),
                }
                (
                    ClosedLoop::output_feedback(&basis, sc.modes, transform, sc.nonlinearity, fb, obs)?,
                    y0,
                )
            }
        }
    };

    let run = integrate(&system, &y0, &sc.sample_times(), &sc.tolerances)?;
    let samples = run
        .times
        .iter()
        .zip(&run.states)
        .map(|(&t, y)| {
            let o = system.outputs(y);
            Sample {
                t,
                norm_p: o.norm_p,
                norm_eps: o.norm_eps,
                norm_z: o.norm_z,
                u: o.u,
                subdomain_eps: o.subdomain_eps,
                state: sc.keep_states.then(|| y[..sc.modes].to_vec()),
            }
        })
        .collect();
    if let Some(e) = &run.failure {
        log::error!("integration stopped early: {e}");
    }
    Ok(Trajectory {
        kind,
        samples,
        config_hash: sc.fingerprint(kind),
        stats: run.stats,
        controls: if needs_design { sc.n } else { 0 },
        certified,
        margin,
        failure: run.failure.map(|e| e.to_string()),
    })
}
