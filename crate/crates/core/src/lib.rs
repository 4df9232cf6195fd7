//! Dual-path (analytic + Monte Carlo) evaluation of uplink/downlink cell
//! association, SINR coverage and rate coverage in a two-tier network of
//! sub-6GHz macrocells and mmWave small cells.
//!
//! The analytic engine evaluates the pathloss-process, association and
//! coverage integrals by adaptive quadrature; the Monte Carlo engine samples
//! network realizations around a typical UE at the origin. Experiments pit
//! the two against each other and the acceptance suite gates the results.

pub mod acceptance;
pub mod association;
pub mod coverage;
pub mod experiment;
pub mod montecarlo;
pub mod numerics;
pub mod params;
pub mod pathloss;

use serde::{Deserialize, Serialize};

/// Link direction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Dl,
    Ul,
}

impl Direction {
    pub const BOTH: [Direction; 2] = [Direction::Dl, Direction::Ul];

    pub fn as_str(&self) -> &'static str {
        match self {
            Direction::Dl => "dl",
            Direction::Ul => "ul",
        }
    }
}

impl std::fmt::Display for Direction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Direction {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "dl" | "downlink" => Ok(Direction::Dl),
            "ul" | "uplink" => Ok(Direction::Ul),
            other => Err(format!("unknown direction `{other}` (expected dl or ul)")),
        }
    }
}

/// Base-station tier.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tier {
    /// Sub-6GHz macrocell.
    Mcell,
    /// mmWave small cell.
    Scell,
}

impl Tier {
    pub fn as_str(&self) -> &'static str {
        match self {
            Tier::Mcell => "mcell",
            Tier::Scell => "scell",
        }
    }
}

impl std::fmt::Display for Tier {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

pub use association::{Analysis, AssocCriterion, AssocQuery, AssocResult, AssocSource};
pub use coverage::{CoverageComponents, LoadModel};
pub use montecarlo::{LinkSample, Realization, SimOptions, Simulator};
pub use numerics::{q_function, rho, QuadratureSpec};
pub use params::{load_config, DerivedConstants, SystemParams};
