use serde::{Deserialize, Serialize};

use super::builders::*;
use super::Scenario;
use crate::error::Result;
use crate::kernel::KernelFamily;

/// Scenario block of a run config: a builder name plus its parameters.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "builder", rename_all = "snake_case")]
pub enum ScenarioSpec {
    Oracle(OracleParams),
    Breakdown(BreakdownParams),
    Cantor(CantorParams),
    Powerlaw(PowerlawParams),
    Plateau(PlateauParams),
    Generic(GenericParams),
    Disk(DiskParams),
    Annulus(AnnulusParams),
    Custom(CustomParams),
}

impl ScenarioSpec {
    pub fn build(&self) -> Result<Scenario> {
        match self {
            Self::Oracle(p) => oracle(p),
            Self::Breakdown(p) => breakdown(p),
            Self::Cantor(p) => cantor(p),
            Self::Powerlaw(p) => powerlaw(p),
            Self::Plateau(p) => plateau(p),
            Self::Generic(p) => generic(p),
            Self::Disk(p) => disk(p),
            Self::Annulus(p) => annulus(p),
            Self::Custom(p) => custom(p),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Oracle(_) => "oracle",
            Self::Breakdown(_) => "breakdown",
            Self::Cantor(_) => "cantor",
            Self::Powerlaw(_) => "powerlaw",
            Self::Plateau(_) => "plateau",
            Self::Generic(_) => "generic",
            Self::Disk(_) => "disk",
            Self::Annulus(_) => "annulus",
            Self::Custom(_) => "custom",
        }
    }

    /// The kernel block of the builder; `None` for the constant-kernel builders.
    pub fn kernel_mut(&mut self) -> Option<&mut KernelFamily> {
        match self {
            Self::Oracle(_) | Self::Breakdown(_) => None,
            Self::Cantor(p) => Some(&mut p.kernel),
            Self::Powerlaw(p) => Some(&mut p.kernel),
            Self::Plateau(p) => Some(&mut p.kernel),
            Self::Generic(p) => Some(&mut p.kernel),
            Self::Disk(p) => Some(&mut p.kernel),
            Self::Annulus(p) => Some(&mut p.kernel),
            Self::Custom(p) => Some(&mut p.kernel),
        }
    }

    /// Whether the builder may produce `e0 < 0` on purpose.
    pub fn is_supercritical(&self) -> bool {
        match self {
            Self::Breakdown(_) => true,
            Self::Custom(p) => p.allow_supercritical,
            _ => false,
        }
    }
}
