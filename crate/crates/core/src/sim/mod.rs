//! Galerkin simulation of the open-loop and closed-loop systems.

pub mod integrator;
pub mod model;
pub mod nonlinearity;
pub mod observer;
pub mod scenario;

pub use integrator::{integrate, Integration, IntegratorStats, SplitSystem, Tolerances};
pub use model::{project_nonlinearity, ClosedLoop, Feedback, Kind};
pub use nonlinearity::Nonlinearity;
pub use observer::ObserverBank;
pub use scenario::{simulate_scenario, ErrorInit, InitialCondition, Sample, Scenario, Trajectory};

/// Quadrature points per unit of the largest mode frequency.
pub const OVERSAMPLING: usize = 4;
