//! Reproducible network drops: hexagonal base-station layout, uniform user
//! placement and path loss with log-normal shadowing.
//!
//! Randomness comes from ChaCha8 seeded with the 64-bit drop seed
//! (`ChaCha8Rng::seed_from_u64`). Draw order per drop is fixed: for each user
//! the cell index (only when users are spread over the whole area), then the
//! rejection-sampled position; afterwards one shadowing sample per (user,
//! server) pair in row-major order.

use std::collections::hash_map::DefaultHasher;
use std::f64::consts::PI;
use std::hash::{Hash, Hasher};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
pub use crate::model::NetworkScenario;
use crate::model::{ChannelGains, EdgeServer, Position, RadioConfig, TaskProfile, UserDevice};

/// Bits per (decimal) kilobyte.
pub const BITS_PER_KB: f64 = 8_000.0;
pub const CYCLES_PER_MEGACYCLE: f64 = 1e6;

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * watts.log10() + 30.0
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// How many users a drop contains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UserCount {
    /// Every cell receives this many users, placed uniformly in its hexagon.
    PerCell(usize),
    /// Users placed uniformly over the union of all cells.
    Total(usize),
}

/// Scenario configuration, read from JSON. Units are part of each field name.
///
/// ```json
/// {
///   "num_cells": 4,
///   "inter_bs_distance_km": 1.0,
///   "users": { "total": 6 },
///   "num_subbands": 2,
///   "max_power_dbm": 20.0
/// }
/// ```
///
/// Omitted fields take the defaults of [`ScenarioConfig::default`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub num_cells: usize,
    pub inter_bs_distance_km: f64,
    pub users: UserCount,
    /// Sub-bands per base station. Defaults to the users per cell.
    pub num_subbands: Option<usize>,
    pub total_bandwidth_hz: f64,
    pub noise_power_dbm: f64,
    pub server_cpu_hz: f64,
    pub local_cpu_hz: f64,
    /// Energy coefficient κ [J·s²/cycle³].
    pub energy_coeff: f64,
    pub max_power_dbm: f64,
    pub pref_time: f64,
    /// Defaults to `1 - pref_time`.
    pub pref_energy: Option<f64>,
    pub provider_weight: f64,
    /// Task input size in decimal kilobytes (1 KB = 8000 bits).
    pub input_kb: f64,
    pub workload_megacycles: f64,
    /// Per-cell workload override [Megacycles], indexed by cell in layout order.
    pub cell_workload_megacycles: Option<Vec<f64>>,
    /// Standard deviation of the log-normal shadowing [dB].
    pub shadowing_std_db: f64,
    /// Distances are clamped to at least this value before path loss [km].
    pub min_distance_km: f64,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            num_cells: 7,
            inter_bs_distance_km: 1.0,
            users: UserCount::PerCell(4),
            num_subbands: None,
            total_bandwidth_hz: 20e6,
            noise_power_dbm: -100.0,
            server_cpu_hz: 20e9,
            local_cpu_hz: 1e9,
            energy_coeff: 5e-27,
            max_power_dbm: 20.0,
            pref_time: 0.2,
            pref_energy: None,
            provider_weight: 1.0,
            input_kb: 420.0,
            workload_megacycles: 1000.0,
            cell_workload_megacycles: None,
            shadowing_std_db: 8.0,
            min_distance_km: 0.01,
            seed: 1,
        }
    }
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| invalid("config", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn num_users(&self) -> usize {
        match self.users {
            UserCount::PerCell(k) => k * self.num_cells,
            UserCount::Total(n) => n,
        }
    }

    pub fn subbands(&self) -> usize {
        match (self.num_subbands, self.users) {
            (Some(n), _) => n,
            (None, UserCount::PerCell(k)) => k,
            (None, UserCount::Total(n)) => n.div_ceil(self.num_cells.max(1)),
        }
    }

    pub fn pref_energy(&self) -> f64 {
        self.pref_energy.unwrap_or(1.0 - self.pref_time)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_cells == 0 {
            return Err(invalid("num_cells", "must be at least 1"));
        }
        match self.users {
            UserCount::PerCell(0) => return Err(invalid("users.per_cell", "must be at least 1")),
            UserCount::Total(0) => return Err(invalid("users.total", "must be at least 1")),
            _ => {}
        }
        if self.subbands() == 0 {
            return Err(invalid("num_subbands", "must be at least 1"));
        }
        for (field, v) in [
            ("inter_bs_distance_km", self.inter_bs_distance_km),
            ("total_bandwidth_hz", self.total_bandwidth_hz),
            ("server_cpu_hz", self.server_cpu_hz),
            ("local_cpu_hz", self.local_cpu_hz),
            ("energy_coeff", self.energy_coeff),
            ("input_kb", self.input_kb),
            ("workload_megacycles", self.workload_megacycles),
            ("min_distance_km", self.min_distance_km),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(field, format!("must be finite and > 0, got {v}")));
            }
        }
        for (field, v) in [
            ("noise_power_dbm", self.noise_power_dbm),
            ("max_power_dbm", self.max_power_dbm),
        ] {
            if !v.is_finite() {
                return Err(invalid(field, format!("must be finite, got {v}")));
            }
        }
        if !(self.shadowing_std_db.is_finite() && self.shadowing_std_db >= 0.0) {
            return Err(invalid("shadowing_std_db", "must be finite and >= 0"));
        }
        // Both preferences must be strictly positive: the closed-form compute split
        // and the power objective degenerate otherwise.
        if !(self.pref_time > 0.0 && self.pref_time < 1.0) {
            return Err(invalid("pref_time", format!("must lie in (0, 1), got {}", self.pref_time)));
        }
        let pe = self.pref_energy();
        if !(pe > 0.0 && (self.pref_time + pe - 1.0).abs() <= 1e-9) {
            return Err(invalid("pref_energy", format!("must equal 1 - pref_time, got {pe}")));
        }
        if !(self.provider_weight > 0.0 && self.provider_weight <= 1.0) {
            return Err(invalid("provider_weight", "must lie in (0, 1]"));
        }
        if let Some(w) = &self.cell_workload_megacycles {
            if w.len() != self.num_cells {
                return Err(invalid(
                    "cell_workload_megacycles",
                    format!("needs {} entries, got {}", self.num_cells, w.len()),
                ));
            }
            if w.iter().any(|c| !(c.is_finite() && *c > 0.0)) {
                return Err(invalid("cell_workload_megacycles", "entries must be > 0"));
            }
        }
        Ok(())
    }

    fn workload_cycles(&self, cell: usize) -> f64 {
        let mc = self
            .cell_workload_megacycles
            .as_ref()
            .map_or(self.workload_megacycles, |w| w[cell]);
        mc * CYCLES_PER_MEGACYCLE
    }
}

/// Base-station positions: cell 0 at the origin, then hexagonal rings.
///
/// Ring `k` starts at angle 0 and runs counter-clockwise; its corners sit at
/// distance `k * spacing`. Any count is accepted, the last ring may be partial.
pub fn hex_layout(num_cells: usize, spacing: f64) -> Result<Vec<Position>> {
    if num_cells == 0 {
        return Err(invalid("num_cells", "must be at least 1"));
    }
    if !(spacing.is_finite() && spacing > 0.0) {
        return Err(invalid("inter_bs_distance_km", "must be finite and > 0"));
    }
    let dir = |i: usize| {
        let a = (i % 6) as f64 * PI / 3.0;
        (spacing * a.cos(), spacing * a.sin())
    };
    let mut out = vec![Position::ORIGIN];
    let mut ring = 1;
    while out.len() < num_cells {
        for side in 0..6 {
            let (cx, cy) = dir(side);
            let (sx, sy) = dir(side + 2);
            for step in 0..ring {
                let (k, t) = (ring as f64, step as f64);
                out.push(Position::new(k * cx + t * sx, k * cy + t * sy));
            }
        }
        ring += 1;
    }
    out.truncate(num_cells);
    Ok(out)
}

/// Path loss `140.7 + 36.7 log10(d)` for a distance in km.
pub fn pathloss_db(distance_km: f64) -> Result<f64> {
    if !(distance_km.is_finite() && distance_km > 0.0) {
        return Err(invalid("distance", format!("must be finite and > 0 km, got {distance_km}")));
    }
    Ok(140.7 + 36.7 * distance_km.log10())
}

/// Whether `p` lies in the hexagon of inradius `apothem` centred at the origin,
/// with flat sides facing the six neighbouring base stations.
pub fn in_hexagon(p: Position, apothem: f64) -> bool {
    (0..3).all(|i| {
        let a = i as f64 * PI / 3.0;
        (p.x * a.cos() + p.y * a.sin()).abs() <= apothem
    })
}

fn sample_in_cell(rng: &mut impl Rng, centre: Position, spacing: f64) -> Position {
    let apothem = spacing / 2.0;
    let circumradius = apothem * 2.0 / 3f64.sqrt();
    loop {
        let p = Position::new(
            rng.random_range(-circumradius..=circumradius),
            rng.random_range(-circumradius..=circumradius),
        );
        if in_hexagon(p, apothem) {
            return Position::new(centre.x + p.x, centre.y + p.y);
        }
    }
}

/// Generates one drop. A pure function of `(config, seed)`.
pub fn generate(config: &ScenarioConfig, seed: u64) -> Result<NetworkScenario> {
    config.validate()?;
    let bs = hex_layout(config.num_cells, config.inter_bs_distance_km)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let n_users = config.num_users();
    let mut users = Vec::with_capacity(n_users);
    let max_power = dbm_to_watts(config.max_power_dbm);
    for id in 0..n_users {
        let cell = match config.users {
            UserCount::PerCell(k) => id / k,
            UserCount::Total(_) => rng.random_range(0..config.num_cells),
        };
        let position = sample_in_cell(&mut rng, bs[cell], config.inter_bs_distance_km);
        users.push(UserDevice {
            id,
            position,
            cell,
            local_cpu_rate: config.local_cpu_hz,
            energy_coeff: config.energy_coeff,
            max_power,
            pref_time: config.pref_time,
            pref_energy: config.pref_energy(),
            provider_weight: config.provider_weight,
            amp_efficiency: 1.0,
            task: TaskProfile::new(config.input_kb * BITS_PER_KB, config.workload_cycles(cell))?,
        });
    }

    let servers: Vec<EdgeServer> = bs
        .iter()
        .enumerate()
        .map(|(id, &position)| EdgeServer {
            id,
            position,
            cpu_rate: config.server_cpu_hz,
        })
        .collect();

    let shadow = Normal::new(0.0, config.shadowing_std_db)
        .map_err(|e| invalid("shadowing_std_db", e.to_string()))?;
    let mut gain = Vec::with_capacity(n_users * servers.len());
    for u in &users {
        for s in &servers {
            let d = u.position.distance(&s.position).max(config.min_distance_km);
            let loss = pathloss_db(d)? + shadow.sample(&mut rng);
            gain.push(db_to_linear(-loss));
        }
    }

    let radio = RadioConfig::new(
        config.total_bandwidth_hz,
        config.subbands(),
        dbm_to_watts(config.noise_power_dbm),
    )?;
    let gains = ChannelGains::new(users.len(), servers.len(), gain)?;
    NetworkScenario::new(users, servers, gains, radio)
}

/// Fingerprint of a scenario's numeric content, used to log that paired
/// schemes saw the same drop.
pub fn scenario_hash(scen: &NetworkScenario) -> u64 {
    let mut h = DefaultHasher::new();
    let mut put = |v: f64| v.to_bits().hash(&mut h);
    for u in &scen.users {
        put(u.position.x);
        put(u.position.y);
        put(u.task.input_bits);
        put(u.task.workload_cycles);
        put(u.max_power);
        put(u.pref_time);
    }
    for s in &scen.servers {
        put(s.cpu_rate);
    }
    for u in 0..scen.num_users() {
        for &g in scen.gains.row(u) {
            put(g);
        }
    }
    put(scen.radio.total_bandwidth);
    put(scen.radio.noise_power);
    scen.radio.num_subbands.hash(&mut h);
    h.finish()
}
