//! Joint task offloading and resource allocation for multi-cell mobile-edge
//! computing.
//!
//! Users either run a task locally or upload it over one OFDMA sub-band to an
//! edge server. Given an offloading decision, uplink powers come from a
//! bisection on a quasi-convex per-user objective and server CPU shares from a
//! closed-form square-root split; the decision itself is found by a matroid
//! local search ([`search::heuristic_schedule`]). Baseline schemes and a
//! Monte-Carlo harness live in [`baselines`] and [`experiment`].

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod compute;
pub mod error;
pub mod experiment;
pub mod model;
pub mod power;
pub mod scenario;
pub mod search;
pub mod stats;

pub use baselines::{run_scheme, SchemeId, SchemeParams};
pub use error::{Error, Result};
pub use model::{Assignment, GroundElement, NetworkScenario, SinrModel};
pub use scenario::{generate, ScenarioConfig};
pub use search::{heuristic_schedule, Schedule, SearchConfig};
