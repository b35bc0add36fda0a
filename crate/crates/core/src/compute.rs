//! Computing resource allocation: minimise `Σ η_u / f_u` subject to
//! `Σ f_u <= f_s` on each server. The KKT conditions give the square-root split
//! `f_u = f_s √η_u / Σ √η`, with optimal value `(Σ √η)² / f_s`.

use log::warn;

use crate::error::{invalid, Result};
use crate::model::{Assignment, ComputeAllocation, NetworkScenario};

/// Relative floor applied to vanishing execution weights.
pub const ETA_FLOOR: f64 = 1e-12;

/// One server's allocation problem.
#[derive(Debug, Clone, PartialEq)]
pub struct CraInstance {
    pub server_rate: f64,
    pub etas: Vec<f64>,
}

impl CraInstance {
    pub fn new(server_rate: f64, etas: Vec<f64>) -> Result<Self> {
        if !(server_rate.is_finite() && server_rate > 0.0) {
            return Err(invalid("server_rate", format!("must be finite and > 0, got {server_rate}")));
        }
        if let Some(bad) = etas.iter().find(|e| !(e.is_finite() && **e > 0.0)) {
            return Err(invalid("etas", format!("weights must be finite and > 0, got {bad}")));
        }
        Ok(Self { server_rate, etas })
    }

    /// Builds an instance, raising zero weights to `ETA_FLOOR * max(η)`.
    /// The flag reports whether any weight was raised.
    pub fn with_floor(server_rate: f64, mut etas: Vec<f64>) -> Result<(Self, bool)> {
        let max = etas.iter().copied().fold(0.0, f64::max);
        let floor = if max > 0.0 { ETA_FLOOR * max } else { 1.0 };
        let mut clamped = false;
        for e in &mut etas {
            if *e < floor {
                *e = floor;
                clamped = true;
            }
        }
        Ok((Self::new(server_rate, etas)?, clamped))
    }
}

/// Optimal per-user rates; empty for an idle server.
pub fn allocate(inst: &CraInstance) -> Vec<f64> {
    let roots: Vec<f64> = inst.etas.iter().map(|e| e.sqrt()).collect();
    let total: f64 = roots.iter().sum();
    roots.iter().map(|r| inst.server_rate * r / total).collect()
}

/// `(Σ √η)² / f_s`; zero for an idle server.
pub fn optimal_value(inst: &CraInstance) -> f64 {
    let total: f64 = inst.etas.iter().map(|e| e.sqrt()).sum();
    total * total / inst.server_rate
}

/// Objective `Σ η / f` of an arbitrary allocation.
pub fn execution_overhead(etas: &[f64], rates: &[f64]) -> f64 {
    etas.iter().zip(rates).map(|(e, f)| e / f).sum()
}

/// Optimal compute split for every server under `x`, and the summed optimal value.
pub fn solve_cra(x: &Assignment, scen: &NetworkScenario) -> Result<(ComputeAllocation, f64)> {
    let mut alloc = ComputeAllocation::zeros(scen.num_users(), scen.num_servers());
    let mut value = 0.0;
    for (s, server) in scen.servers.iter().enumerate() {
        let users: Vec<usize> = x.users_of(s).collect();
        if users.is_empty() {
            continue;
        }
        let etas = users.iter().map(|&u| scen.coefficients(u).eta).collect();
        let (inst, clamped) = CraInstance::with_floor(server.cpu_rate, etas)?;
        if clamped {
            warn!("server {s}: execution weight floored; a user has no time preference");
        }
        for (&u, rate) in users.iter().zip(allocate(&inst)) {
            alloc.set(u, s, rate);
        }
        value += optimal_value(&inst);
    }
    Ok((alloc, value))
}
