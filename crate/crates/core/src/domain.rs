//! Problem domains, their solver backbones and objective directions.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// The seven combinatorial heuristic-design domains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    TspC,
    CvrpC,
    OvrpC,
    TspAco,
    CvrpAco,
    OpAco,
    MkpAco,
}

/// Which solver backbone consumes a heuristic program.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backbone {
    Constructive,
    Aco,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Minimize,
    Maximize,
}

impl Direction {
    /// Maps a raw objective onto the "larger is better" scale.
    pub fn normalize(self, raw: f64) -> f64 {
        match self {
            Direction::Minimize => -raw,
            Direction::Maximize => raw,
        }
    }

    /// True when `a` is strictly better than `b`.
    pub fn better(self, a: f64, b: f64) -> bool {
        match self {
            Direction::Minimize => a < b,
            Direction::Maximize => a > b,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Minimize => "minimize",
            Direction::Maximize => "maximize",
        }
    }
}

#[derive(Debug, thiserror::Error)]
#[error("unknown domain `{0}` (expected one of tsp_c, cvrp_c, ovrp_c, tsp_aco, cvrp_aco, op_aco, mkp_aco)")]
pub struct UnknownDomain(pub String);

impl Domain {
    pub const ALL: [Domain; 7] = [
        Domain::TspC,
        Domain::CvrpC,
        Domain::OvrpC,
        Domain::TspAco,
        Domain::CvrpAco,
        Domain::OpAco,
        Domain::MkpAco,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Domain::TspC => "tsp_c",
            Domain::CvrpC => "cvrp_c",
            Domain::OvrpC => "ovrp_c",
            Domain::TspAco => "tsp_aco",
            Domain::CvrpAco => "cvrp_aco",
            Domain::OpAco => "op_aco",
            Domain::MkpAco => "mkp_aco",
        }
    }

    pub fn backbone(self) -> Backbone {
        match self {
            Domain::TspC | Domain::CvrpC | Domain::OvrpC => Backbone::Constructive,
            _ => Backbone::Aco,
        }
    }

    pub fn direction(self) -> Direction {
        match self {
            Domain::OpAco | Domain::MkpAco => Direction::Maximize,
            _ => Direction::Minimize,
        }
    }

    /// Human-readable name used in prompts and reports.
    pub fn display_name(self) -> &'static str {
        match self {
            Domain::TspC => "TSP-Constructive",
            Domain::CvrpC => "CVRP-Constructive",
            Domain::OvrpC => "OVRP-Constructive",
            Domain::TspAco => "TSP-ACO",
            Domain::CvrpAco => "CVRP-ACO",
            Domain::OpAco => "OP-ACO",
            Domain::MkpAco => "MKP-ACO",
        }
    }

    /// Whether instances carry per-customer demands.
    pub fn has_demands(self) -> bool {
        matches!(self, Domain::CvrpC | Domain::OvrpC | Domain::CvrpAco)
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Domain {
    type Err = UnknownDomain;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Domain::ALL
            .into_iter()
            .find(|d| d.tag() == s)
            .ok_or_else(|| UnknownDomain(s.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tags_round_trip() {
        for d in Domain::ALL {
            assert_eq!(d.tag().parse::<Domain>().unwrap(), d);
        }
        assert!("tsp".parse::<Domain>().is_err());
    }

    #[test]
    fn directions() {
        assert_eq!(Domain::OpAco.direction(), Direction::Maximize);
        assert_eq!(Domain::MkpAco.direction(), Direction::Maximize);
        assert_eq!(Domain::OvrpC.direction(), Direction::Minimize);
        assert_eq!(Direction::Minimize.normalize(3.0), -3.0);
        assert!(Direction::Maximize.better(2.0, 1.0));
    }
}
