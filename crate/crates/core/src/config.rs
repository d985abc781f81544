//! TOML run configuration. Every section is optional; omitted fields fall
//! back to the reference scenario (unit square, `f = 50 sin z + 50 z`,
//! `N = 6`, `m = 120`, one sensor line at `x = 1/2`).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sensors::SensorPartition;
use crate::sim::{ErrorInit, InitialCondition, Nonlinearity, Scenario, Tolerances};
use crate::spectral::{Edge, Rectangle};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DomainSection {
    pub width: f64,
    pub height: f64,
    pub controlled_edge: Edge,
}

impl Default for DomainSection {
    fn default() -> Self {
        Self {
            width: 1.0,
            height: 1.0,
            controlled_edge: Edge::Left,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GalerkinSection {
    /// Simulated modes.
    pub modes: usize,
    /// Explicit spillover terms; `10 N + 200` when absent.
    pub tail_count: Option<usize>,
    /// Rows of the `spectrum` table.
    pub spectrum_count: usize,
}

impl Default for GalerkinSection {
    fn default() -> Self {
        Self {
            modes: 120,
            tail_count: None,
            spectrum_count: 100,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerSection {
    pub n: usize,
    pub m: f64,
    /// `m` used by `design --sweep`.
    pub sweep_m: f64,
}

impl Default for ControllerSection {
    fn default() -> Self {
        Self {
            n: 6,
            m: 120.0,
            sweep_m: 0.6,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NonlinearitySection {
    /// One of `a*sin(z)+b*z`, `a*z`, `a*tanh(z)`, `zero`.
    pub name: String,
    pub a: f64,
    pub b: f64,
    /// Declared Lipschitz constant `L`.
    pub lipschitz: f64,
}

impl Default for NonlinearitySection {
    fn default() -> Self {
        Self {
            name: "a*sin(z)+b*z".into(),
            a: 50.0,
            b: 50.0,
            lipschitz: 100.0,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorSection {
    /// Explicit line positions; ignored when `equidistant` is set.
    pub vertical: Vec<f64>,
    pub horizontal: Vec<f64>,
    /// `[M1, M2]` equally spaced vertical and horizontal lines.
    pub equidistant: Option<[usize; 2]>,
    pub sub_modes: usize,
}

impl Default for SensorSection {
    fn default() -> Self {
        Self {
            vertical: vec![0.5],
            horizontal: Vec::new(),
            equidistant: None,
            sub_modes: 40,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorSection {
    pub rtol: f64,
    pub atol: f64,
    pub t_end: f64,
    pub samples: usize,
    pub error_init: ErrorInit,
    /// Also write the full modal state as a binary dump.
    pub dump_states: bool,
}

impl Default for IntegratorSection {
    fn default() -> Self {
        Self {
            rtol: 1e-6,
            atol: 1e-10,
            t_end: 1.0,
            samples: 101,
            error_init: ErrorInit::FromState,
            dump_states: false,
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    /// Output directory; overridden by `--out` and `MODAL_OFB_OUT`.
    pub out: Option<String>,
    pub seed: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub domain: DomainSection,
    pub galerkin: GalerkinSection,
    pub controller: ControllerSection,
    pub nonlinearity: NonlinearitySection,
    pub initial: InitialCondition,
    pub sensors: SensorSection,
    pub integrator: IntegratorSection,
    pub run: RunSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            domain: DomainSection::default(),
            galerkin: GalerkinSection::default(),
            controller: ControllerSection::default(),
            nonlinearity: NonlinearitySection::default(),
            initial: InitialCondition::CosX { amplitude: 1.0 },
            sensors: SensorSection::default(),
            integrator: IntegratorSection::default(),
            run: RunSection::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn domain(&self) -> Result<Rectangle> {
        Rectangle::new(self.domain.width, self.domain.height, self.domain.controlled_edge)
            .map_err(|e| Error::Config(e.to_string()))
    }

    pub fn nonlinearity(&self) -> Result<Nonlinearity> {
        Nonlinearity::builtin(&self.nonlinearity.name, self.nonlinearity.a, self.nonlinearity.b)
    }

    pub fn partition(&self) -> Result<SensorPartition> {
        let d = self.domain()?;
        match self.sensors.equidistant {
            Some([m1, m2]) => Ok(SensorPartition::equidistant(m1, m2, d)),
            None => SensorPartition::new(d, self.sensors.vertical.clone(), self.sensors.horizontal.clone())
                .map_err(|e| Error::Config(e.to_string())),
        }
    }

    /// Range checks plus the audit of the declared Lipschitz constant.
    pub fn validate(&self) -> Result<()> {
        self.domain()?;
        self.partition()?;
        if self.galerkin.spectrum_count == 0 {
            return Err(Error::Config("galerkin.spectrum_count must be positive".into()));
        }
        if !(self.controller.sweep_m > 0.5) {
            return Err(Error::Config(format!(
                "controller.sweep_m must exceed 1/2, got {}",
                self.controller.sweep_m
            )));
        }
        let f = self.nonlinearity()?;
        f.audit(self.nonlinearity.lipschitz)?;
        self.scenario()?.validate()
    }

    pub fn scenario(&self) -> Result<Scenario> {
        let p = self.partition()?;
        Ok(Scenario {
            domain: self.domain()?,
            modes: self.galerkin.modes,
            n: self.controller.n,
            m: self.controller.m,
            tail_count: self.galerkin.tail_count,
            nonlinearity: self.nonlinearity()?,
            lipschitz: self.nonlinearity.lipschitz,
            initial: self.initial.clone(),
            vertical_lines: p.vertical_lines().to_vec(),
            horizontal_lines: p.horizontal_lines().to_vec(),
            sub_modes: self.sensors.sub_modes,
            error_init: self.integrator.error_init,
            tolerances: Tolerances {
                rtol: self.integrator.rtol,
                atol: self.integrator.atol,
                ..Tolerances::default()
            },
            t_end: self.integrator.t_end,
            samples: self.integrator.samples,
            keep_states: self.integrator.dump_states,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_the_reference_scenario() {
        let cfg = RunConfig::from_toml_str("").unwrap();
        let sc = cfg.scenario().unwrap();
        let reference = Scenario::default();
        assert_eq!(format!("{sc:?}"), format!("{reference:?}"));
    }

    #[test]
    fn full_file() {
        let text = r#"
[domain]
width = 2.0
height = 1.0
controlled_edge = "bottom"

[galerkin]
modes = 60
tail_count = 300

[controller]
n = 4
m = 10.0

[nonlinearity]
name = "a*tanh(z)"
a = 3.0
lipschitz = 3.0

[initial]
kind = "mode"
rank = 2
amplitude = 0.5

[sensors]
equidistant = [3, 1]
sub_modes = 20

[integrator]
rtol = 1e-7
t_end = 0.5
samples = 11
error_init = "zero"

[run]
seed = 9
"#;
        let cfg = RunConfig::from_toml_str(text).unwrap();
        let sc = cfg.scenario().unwrap();
        assert_eq!(sc.domain.controlled_edge(), Edge::Bottom);
        assert_eq!(sc.vertical_lines, vec![0.5, 1.0, 1.5]);
        assert_eq!(sc.horizontal_lines, vec![0.5]);
        assert_eq!(
            sc.initial,
            InitialCondition::Mode {
                rank: 2,
                amplitude: 0.5
            }
        );
        assert_eq!(sc.error_init, ErrorInit::Zero);
        assert_eq!(cfg.run.seed, 9);
        let again = RunConfig::from_toml_str(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(format!("{again:?}"), format!("{cfg:?}"));
    }

    #[test]
    fn rejects_bad_files() {
        for text in [
            "[domain]\nwidth = -1.0",
            "[controller]\nn = 0",
            "[nonlinearity]\nlipschitz = 50.0",
            "[nonlinearity]\nname = \"exp(z)\"",
            "[sensors]\nvertical = [1.5]",
            "[integrator]\nrtol = 0.0",
            "[unknown]\nx = 1",
            "[galerkin]\nmodes = \"many\"",
        ] {
            assert!(
                matches!(
                    RunConfig::from_toml_str(text),
                    Err(Error::Config(_) | Error::Lipschitz(_))
                ),
                "{text}"
            );
        }
    }
}
