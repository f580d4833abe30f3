pub mod cases;
pub mod dynamics;
pub mod error;
pub mod geometry;
pub mod interact;
pub mod kernel;
pub mod limits;
pub mod measure;
pub mod numeric;
pub mod scenario;
pub mod stability;

pub use dynamics::{integrate, FlockState, IntegratorConfig, Trajectory};
pub use error::{Error, Result};
pub use geometry::DimensionEstimate;
pub use interact::{Cloud, Interaction, SumBackend};
pub use kernel::{FlockingConstants, Kernel, KernelFamily};
pub use limits::{LimitConfig, LimitReport};
pub use measure::{AcLabel, Atom, BoxDomain, MassMeasure};
pub use scenario::{Scenario, ScenarioSpec, ZeroSet};
pub use stability::StabilityReport;
