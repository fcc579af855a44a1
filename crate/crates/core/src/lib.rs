//! Cone percolation (a one-shot rumour process) on homogeneous trees.
//!
//! Every informed vertex `u` draws a radius `R_u` and informs the graph ball
//! of that radius around itself. Starting from the origin, the informed set
//! grows as `I_{n+1} = union of B_u over u in I_n`; the process survives when
//! the informed set is infinite.
//!
//! * [`radius_dist`]: radius laws, sampling and the text grammar.
//! * [`gf_solver`]: generating functions of the auxiliary branching
//!   processes and their extinction probabilities.
//! * [`bounds`]: survival criteria and survival-probability bounds.
//! * [`tree_sim`]: Monte Carlo simulation of the ball-growth dynamics.
//! * [`hetero`]: radius laws that depend on depth, with a one-sided
//!   supercriticality certificate.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

pub mod bounds;
pub mod error;
pub mod gf_solver;
pub mod hetero;
pub mod radius_dist;
pub mod tree_sim;

pub use error::{Error, Result};
pub use radius_dist::{parse_dist, ExtendedReal, RadiusDistribution, RadiusSource};

/// The homogeneous tree `T_d` (every vertex has `d + 1` neighbours) or the
/// half tree `T_d^+`, where one neighbour of the origin and its subtree are
/// removed so the origin has `d` neighbours.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Graph {
    #[serde(rename = "td")]
    Td,
    #[serde(rename = "tdplus")]
    TdPlus,
}

impl fmt::Display for Graph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Graph::Td => "td",
            Graph::TdPlus => "tdplus",
        })
    }
}

impl FromStr for Graph {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "td" => Ok(Graph::Td),
            "tdplus" => Ok(Graph::TdPlus),
            other => Err(format!("unknown graph {other:?} (expected td or tdplus)")),
        }
    }
}
