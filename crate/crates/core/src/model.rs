//! System model: domain types and the pure evaluation functions that score a
//! candidate (offloading, power, compute) triple.
//!
//! All quantities are SI: watts, hertz, bits, CPU cycles, seconds, joules.
//! Distances are kilometres because the path-loss law is stated in km.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// A computation task: input size and CPU workload.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskProfile {
    /// Input data to upload [bits].
    pub input_bits: f64,
    /// Workload [CPU cycles].
    pub workload_cycles: f64,
}

impl TaskProfile {
    pub fn new(input_bits: f64, workload_cycles: f64) -> Result<Self> {
        let task = Self {
            input_bits,
            workload_cycles,
        };
        task.validate()?;
        Ok(task)
    }

    pub fn validate(&self) -> Result<()> {
        positive("input_bits", self.input_bits)?;
        positive("workload_cycles", self.workload_cycles)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub const ORIGIN: Position = Position { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// A mobile user holding one atomic task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserDevice {
    pub id: usize,
    /// Location [km].
    pub position: Position,
    /// Cell the user was dropped in. Only used for per-cell workload overrides.
    pub cell: usize,
    /// Local CPU rate [cycles/s].
    pub local_cpu_rate: f64,
    /// Energy per cycle is `energy_coeff * f^2` [J·s²/cycle³].
    pub energy_coeff: f64,
    /// Transmit power budget [W].
    pub max_power: f64,
    pub pref_time: f64,
    pub pref_energy: f64,
    /// Provider-side weight in (0, 1].
    pub provider_weight: f64,
    /// Power amplifier efficiency. Kept at 1.
    pub amp_efficiency: f64,
    pub task: TaskProfile,
}

const PREF_SUM_TOL: f64 = 1e-9;

impl UserDevice {
    pub fn validate(&self) -> Result<()> {
        self.task.validate()?;
        positive("local_cpu_rate", self.local_cpu_rate)?;
        positive("energy_coeff", self.energy_coeff)?;
        positive("max_power", self.max_power)?;
        positive("amp_efficiency", self.amp_efficiency)?;
        unit_interval("pref_time", self.pref_time)?;
        unit_interval("pref_energy", self.pref_energy)?;
        if (self.pref_time + self.pref_energy - 1.0).abs() > PREF_SUM_TOL {
            return Err(invalid(
                "pref_time",
                format!(
                    "pref_time + pref_energy must be 1, got {}",
                    self.pref_time + self.pref_energy
                ),
            ));
        }
        if !(self.provider_weight > 0.0 && self.provider_weight <= 1.0) {
            return Err(invalid(
                "provider_weight",
                format!("must lie in (0, 1], got {}", self.provider_weight),
            ));
        }
        Ok(())
    }

    /// Completion time when the task runs on the device.
    pub fn local_completion_time(&self) -> f64 {
        self.task.workload_cycles / self.local_cpu_rate
    }

    /// Energy spent when the task runs on the device.
    pub fn local_energy(&self) -> f64 {
        self.energy_coeff * self.local_cpu_rate * self.local_cpu_rate * self.task.workload_cycles
    }
}

pub fn local_completion_time(user: &UserDevice) -> f64 {
    user.local_completion_time()
}

pub fn local_energy(user: &UserDevice) -> f64 {
    user.local_energy()
}

/// MEC server co-located with a base station.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeServer {
    pub id: usize,
    pub position: Position,
    /// Computational rate shared among the offloaded tasks [cycles/s].
    pub cpu_rate: f64,
}

/// Uplink OFDMA configuration shared by all base stations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadioConfig {
    /// System bandwidth [Hz].
    pub total_bandwidth: f64,
    pub num_subbands: usize,
    /// Background noise power [W].
    pub noise_power: f64,
}

impl RadioConfig {
    pub fn new(total_bandwidth: f64, num_subbands: usize, noise_power: f64) -> Result<Self> {
        let rc = Self {
            total_bandwidth,
            num_subbands,
            noise_power,
        };
        rc.validate()?;
        Ok(rc)
    }

    pub fn validate(&self) -> Result<()> {
        positive("total_bandwidth", self.total_bandwidth)?;
        positive("noise_power", self.noise_power)?;
        if self.num_subbands == 0 {
            return Err(invalid("num_subbands", "must be at least 1"));
        }
        Ok(())
    }

    /// Width of one sub-band [Hz].
    pub fn subband_width(&self) -> f64 {
        self.total_bandwidth / self.num_subbands as f64
    }
}

/// Large-scale channel gains per (user, server), identical on every sub-band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelGains {
    num_users: usize,
    num_servers: usize,
    gain: Vec<f64>,
}

impl ChannelGains {
    /// `gain` is row-major: `gain[u * num_servers + s]`.
    pub fn new(num_users: usize, num_servers: usize, gain: Vec<f64>) -> Result<Self> {
        if gain.len() != num_users * num_servers {
            return Err(invalid(
                "gain",
                format!(
                    "expected {} entries for {num_users} users x {num_servers} servers, got {}",
                    num_users * num_servers,
                    gain.len()
                ),
            ));
        }
        if let Some(bad) = gain.iter().find(|g| !(g.is_finite() && **g > 0.0)) {
            return Err(invalid("gain", format!("entries must be finite and > 0, got {bad}")));
        }
        Ok(Self {
            num_users,
            num_servers,
            gain,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let num_servers = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != num_servers) {
            return Err(invalid("gain", "rows have different lengths"));
        }
        Self::new(rows.len(), num_servers, rows.concat())
    }

    #[inline]
    pub fn get(&self, user: usize, server: usize) -> f64 {
        self.gain[user * self.num_servers + server]
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn num_servers(&self) -> usize {
        self.num_servers
    }

    pub fn row(&self, user: usize) -> &[f64] {
        &self.gain[user * self.num_servers..(user + 1) * self.num_servers]
    }
}

/// Everything the allocation problem needs to know about one network drop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkScenario {
    pub users: Vec<UserDevice>,
    pub servers: Vec<EdgeServer>,
    pub gains: ChannelGains,
    pub radio: RadioConfig,
}

impl NetworkScenario {
    pub fn new(
        users: Vec<UserDevice>,
        servers: Vec<EdgeServer>,
        gains: ChannelGains,
        radio: RadioConfig,
    ) -> Result<Self> {
        radio.validate()?;
        for (i, u) in users.iter().enumerate() {
            u.validate()?;
            if u.id != i {
                return Err(invalid("users", format!("user at index {i} has id {}", u.id)));
            }
        }
        for (i, s) in servers.iter().enumerate() {
            positive("cpu_rate", s.cpu_rate)?;
            if s.id != i {
                return Err(invalid("servers", format!("server at index {i} has id {}", s.id)));
            }
        }
        if gains.num_users() != users.len() || gains.num_servers() != servers.len() {
            return Err(invalid(
                "gains",
                format!(
                    "matrix is {}x{}, scenario has {} users and {} servers",
                    gains.num_users(),
                    gains.num_servers(),
                    users.len(),
                    servers.len()
                ),
            ));
        }
        Ok(Self {
            users,
            servers,
            gains,
            radio,
        })
    }

    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    pub fn num_servers(&self) -> usize {
        self.servers.len()
    }

    pub fn num_subbands(&self) -> usize {
        self.radio.num_subbands
    }

    /// Size of the ground set, `S * U * N`.
    pub fn ground_set_size(&self) -> usize {
        self.num_users() * self.num_servers() * self.num_subbands()
    }

    /// All ground elements in ascending (user, server, subband) order.
    pub fn ground_set(&self) -> Vec<GroundElement> {
        let mut out = Vec::with_capacity(self.ground_set_size());
        for user in 0..self.num_users() {
            for server in 0..self.num_servers() {
                for subband in 0..self.num_subbands() {
                    out.push(GroundElement::new(user, server, subband));
                }
            }
        }
        out
    }

    /// Server with the strongest gain to `user`; ties go to the lowest index.
    pub fn home_server(&self, user: usize) -> usize {
        let row = self.gains.row(user);
        let mut best = 0;
        for (s, g) in row.iter().enumerate() {
            if *g > row[best] {
                best = s;
            }
        }
        best
    }

    pub fn coefficients(&self, user: usize) -> OverheadCoefficients {
        OverheadCoefficients::new(&self.users[user], self.radio.subband_width())
    }
}

/// One offloading variable: `user` uploads to `server` on `subband`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GroundElement {
    pub user: usize,
    pub server: usize,
    pub subband: usize,
}

impl GroundElement {
    pub const fn new(user: usize, server: usize, subband: usize) -> Self {
        Self {
            user,
            server,
            subband,
        }
    }
}

impl fmt::Display for GroundElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(u={}, s={}, j={})", self.user, self.server, self.subband)
    }
}

/// The offloading decision: the set of active ground elements.
///
/// The set itself does not enforce the two matroid constraints so that
/// infeasible candidates can be represented and rejected; see
/// [`Assignment::is_feasible`].
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Assignment {
    triples: BTreeSet<GroundElement>,
}

impl Assignment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_triples(triples: impl IntoIterator<Item = GroundElement>) -> Self {
        Self {
            triples: triples.into_iter().collect(),
        }
    }

    /// Like [`Assignment::from_triples`] but rejects infeasible sets.
    pub fn try_from_triples(triples: impl IntoIterator<Item = GroundElement>) -> Result<Self> {
        let x = Self::from_triples(triples);
        x.check_feasible()?;
        Ok(x)
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn contains(&self, elem: &GroundElement) -> bool {
        self.triples.contains(elem)
    }

    pub fn iter(&self) -> impl Iterator<Item = &GroundElement> + '_ {
        self.triples.iter()
    }

    pub fn insert(&mut self, elem: GroundElement) -> bool {
        self.triples.insert(elem)
    }

    pub fn remove(&mut self, elem: &GroundElement) -> bool {
        self.triples.remove(elem)
    }

    pub fn retain(&mut self, keep: impl FnMut(&GroundElement) -> bool) {
        self.triples.retain(keep)
    }

    /// The slot held by `user`, if any.
    pub fn slot_of(&self, user: usize) -> Option<GroundElement> {
        self.triples.iter().copied().find(|e| e.user == user)
    }

    /// The user occupying `(server, subband)`, if any.
    pub fn occupant(&self, server: usize, subband: usize) -> Option<GroundElement> {
        self.triples
            .iter()
            .copied()
            .find(|e| e.server == server && e.subband == subband)
    }

    pub fn users_of(&self, server: usize) -> impl Iterator<Item = usize> + '_ {
        self.triples
            .iter()
            .filter(move |e| e.server == server)
            .map(|e| e.user)
    }

    pub fn is_feasible(&self) -> bool {
        self.check_feasible().is_ok()
    }

    pub fn check_feasible(&self) -> Result<()> {
        let mut users = BTreeSet::new();
        let mut slots = BTreeSet::new();
        for e in &self.triples {
            if !users.insert(e.user) {
                return Err(Error::InfeasibleAssignment(format!(
                    "user {} holds more than one slot",
                    e.user
                )));
            }
            if !slots.insert((e.server, e.subband)) {
                return Err(Error::InfeasibleAssignment(format!(
                    "sub-band {} of server {} is assigned twice",
                    e.subband, e.server
                )));
            }
        }
        Ok(())
    }

    /// Checks feasibility and that every index is in range for `scen`.
    pub fn check_against(&self, scen: &NetworkScenario) -> Result<()> {
        for e in &self.triples {
            if e.user >= scen.num_users()
                || e.server >= scen.num_servers()
                || e.subband >= scen.num_subbands()
            {
                return Err(Error::InfeasibleAssignment(format!("{e} is out of range")));
            }
        }
        self.check_feasible()
    }
}

impl<'a> IntoIterator for &'a Assignment {
    type Item = &'a GroundElement;
    type IntoIter = std::collections::btree_set::Iter<'a, GroundElement>;

    fn into_iter(self) -> Self::IntoIter {
        self.triples.iter()
    }
}

/// Uplink transmit power per user [W]; zero for users that run locally.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerAllocation {
    pub power: Vec<f64>,
}

impl PowerAllocation {
    pub fn zeros(num_users: usize) -> Self {
        Self {
            power: vec![0.0; num_users],
        }
    }

    pub fn get(&self, user: usize) -> f64 {
        self.power[user]
    }
}

/// Compute rate granted by each server to each user [cycles/s].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComputeAllocation {
    num_servers: usize,
    rate: Vec<f64>,
}

impl ComputeAllocation {
    pub fn zeros(num_users: usize, num_servers: usize) -> Self {
        Self {
            num_servers,
            rate: vec![0.0; num_users * num_servers],
        }
    }

    pub fn get(&self, user: usize, server: usize) -> f64 {
        self.rate[user * self.num_servers + server]
    }

    pub fn set(&mut self, user: usize, server: usize, rate: f64) {
        self.rate[user * self.num_servers + server] = rate;
    }

    pub fn server_load(&self, server: usize) -> f64 {
        self.rate.iter().skip(server).step_by(self.num_servers).sum()
    }
}

/// Which interference term enters the SINR.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SinrModel {
    /// Actual transmit powers of the co-channel users in other cells.
    Exact,
    /// Co-channel users in other cells assumed to transmit at full power.
    Approx,
}

/// Per-user overhead weights used by the decomposed objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverheadCoefficients {
    /// Weight of the upload term in the delay overhead.
    pub phi: f64,
    /// Weight of the upload term in the energy overhead [1/W].
    pub psi: f64,
    /// Weight of the execution term [cycles/s].
    pub eta: f64,
}

impl OverheadCoefficients {
    pub fn new(user: &UserDevice, subband_width: f64) -> Self {
        let d = user.task.input_bits;
        let lambda = user.provider_weight;
        Self {
            phi: lambda * user.pref_time * d / (user.local_completion_time() * subband_width),
            psi: lambda * user.pref_energy * d / (user.local_energy() * subband_width),
            eta: lambda * user.pref_time * user.local_cpu_rate,
        }
    }
}

/// Interference seen at `elem.server` on `elem.subband` from users served by
/// other servers on the same sub-band, with transmit powers given by `power_of`.
pub fn co_channel_interference(
    elem: &GroundElement,
    x: &Assignment,
    scen: &NetworkScenario,
    mut power_of: impl FnMut(usize) -> f64,
) -> f64 {
    x.iter()
        .filter(|k| k.subband == elem.subband && k.server != elem.server)
        .map(|k| power_of(k.user) * scen.gains.get(k.user, elem.server))
        .sum()
}

fn sinr_with(
    elem: &GroundElement,
    x: &Assignment,
    p: &PowerAllocation,
    scen: &NetworkScenario,
    model: SinrModel,
) -> f64 {
    if !x.contains(elem) {
        return 0.0;
    }
    let interference = match model {
        SinrModel::Exact => co_channel_interference(elem, x, scen, |k| p.get(k)),
        SinrModel::Approx => {
            co_channel_interference(elem, x, scen, |k| scen.users[k].max_power)
        }
    };
    p.get(elem.user) * scen.gains.get(elem.user, elem.server)
        / (interference + scen.radio.noise_power)
}

/// SINR of `elem` under the actual powers `p`. Zero when `elem` is not in `x`.
pub fn exact_sinr(
    elem: &GroundElement,
    x: &Assignment,
    p: &PowerAllocation,
    scen: &NetworkScenario,
) -> f64 {
    sinr_with(elem, x, p, scen, SinrModel::Exact)
}

/// SINR of `elem` with full-power co-channel interference.
pub fn approx_sinr(
    elem: &GroundElement,
    x: &Assignment,
    p: &PowerAllocation,
    scen: &NetworkScenario,
) -> f64 {
    sinr_with(elem, x, p, scen, SinrModel::Approx)
}

/// Shannon rate for a given SINR over one sub-band [bits/s].
pub fn shannon_rate(sinr: f64, subband_width: f64) -> f64 {
    subband_width * (1.0 + sinr).log2()
}

/// Uplink rate of `user` under `x` [bits/s]; zero if the user runs locally.
pub fn uplink_rate(
    user: usize,
    x: &Assignment,
    p: &PowerAllocation,
    scen: &NetworkScenario,
    model: SinrModel,
) -> f64 {
    match x.slot_of(user) {
        Some(elem) => shannon_rate(
            sinr_with(&elem, x, p, scen, model),
            scen.radio.subband_width(),
        ),
        None => 0.0,
    }
}

/// Delay [s] and device energy [J] of an offloaded user.
pub fn offload_delay_energy(
    user: usize,
    x: &Assignment,
    p: &PowerAllocation,
    f: &ComputeAllocation,
    scen: &NetworkScenario,
    model: SinrModel,
) -> Result<(f64, f64)> {
    let elem = x
        .slot_of(user)
        .ok_or_else(|| Error::Inconsistent(format!("user {user} does not offload")))?;
    let rate = uplink_rate(user, x, p, scen, model);
    if !(rate > 0.0) {
        return Err(Error::UnreachableServer {
            user,
            server: elem.server,
        });
    }
    let exec_rate = f.get(user, elem.server);
    if !(exec_rate > 0.0) {
        return Err(Error::Inconsistent(format!(
            "user {user} offloads to server {} but receives no compute",
            elem.server
        )));
    }
    let dev = &scen.users[user];
    let upload = dev.task.input_bits / rate;
    let delay = upload + dev.task.workload_cycles / exec_rate;
    let energy = p.get(user) * upload / dev.amp_efficiency;
    Ok((delay, energy))
}

/// Offloading utility of one user; zero when the user runs locally.
pub fn user_utility(
    user: usize,
    x: &Assignment,
    p: &PowerAllocation,
    f: &ComputeAllocation,
    scen: &NetworkScenario,
    model: SinrModel,
) -> Result<f64> {
    if x.slot_of(user).is_none() {
        return Ok(0.0);
    }
    let (t, e) = offload_delay_energy(user, x, p, f, scen, model)?;
    Ok(relative_gain(&scen.users[user], t, e))
}

fn relative_gain(dev: &UserDevice, delay: f64, energy: f64) -> f64 {
    let tl = dev.local_completion_time();
    let el = dev.local_energy();
    dev.pref_time * (tl - delay) / tl + dev.pref_energy * (el - energy) / el
}

/// Per-user breakdown and the weighted system utility.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilityReport {
    pub per_user_utility: Vec<f64>,
    /// Experienced completion time; local execution time for users that do not offload.
    pub per_user_delay: Vec<f64>,
    /// Experienced device energy; local energy for users that do not offload.
    pub per_user_energy: Vec<f64>,
    pub system_utility: f64,
}

impl UtilityReport {
    pub fn mean_delay(&self) -> f64 {
        mean(&self.per_user_delay)
    }

    pub fn mean_energy(&self) -> f64 {
        mean(&self.per_user_energy)
    }
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Checks that `x`, `p` and `f` describe the same offloaded set and that `f`
/// respects the server capacities.
pub fn check_consistent(
    x: &Assignment,
    p: &PowerAllocation,
    f: &ComputeAllocation,
    scen: &NetworkScenario,
) -> Result<()> {
    x.check_against(scen)?;
    if p.power.len() != scen.num_users() {
        return Err(Error::Inconsistent(format!(
            "power allocation has {} entries for {} users",
            p.power.len(),
            scen.num_users()
        )));
    }
    if f.rate.len() != scen.num_users() * scen.num_servers() {
        return Err(Error::Inconsistent("compute allocation has the wrong shape".into()));
    }
    for (u, dev) in scen.users.iter().enumerate() {
        let slot = x.slot_of(u);
        let pu = p.get(u);
        match slot {
            Some(_) if !(pu > 0.0 && pu <= dev.max_power * (1.0 + 1e-12)) => {
                return Err(Error::Inconsistent(format!(
                    "user {u} offloads with power {pu} outside (0, {}]",
                    dev.max_power
                )));
            }
            None if pu != 0.0 => {
                return Err(Error::Inconsistent(format!(
                    "user {u} runs locally but has power {pu}"
                )));
            }
            _ => {}
        }
        for s in 0..scen.num_servers() {
            let r = f.get(u, s);
            let assigned = slot.is_some_and(|e| e.server == s);
            if assigned && !(r > 0.0) {
                return Err(Error::Inconsistent(format!(
                    "user {u} offloads to server {s} without compute"
                )));
            }
            if !assigned && r != 0.0 {
                return Err(Error::Inconsistent(format!(
                    "user {u} receives compute {r} from server {s} it does not use"
                )));
            }
        }
    }
    for (s, server) in scen.servers.iter().enumerate() {
        let load = f.server_load(s);
        if load > server.cpu_rate * (1.0 + 1e-12) {
            return Err(Error::Inconsistent(format!(
                "server {s} allocates {load} cycles/s above its capacity {}",
                server.cpu_rate
            )));
        }
    }
    Ok(())
}

/// Weighted-sum utility of all users together with the per-user breakdown.
pub fn system_utility(
    x: &Assignment,
    p: &PowerAllocation,
    f: &ComputeAllocation,
    scen: &NetworkScenario,
    model: SinrModel,
) -> Result<UtilityReport> {
    check_consistent(x, p, f, scen)?;
    let n = scen.num_users();
    let mut report = UtilityReport {
        per_user_utility: vec![0.0; n],
        per_user_delay: vec![0.0; n],
        per_user_energy: vec![0.0; n],
        system_utility: 0.0,
    };
    for (u, dev) in scen.users.iter().enumerate() {
        let (t, e, j) = if x.slot_of(u).is_some() {
            let (t, e) = offload_delay_energy(u, x, p, f, scen, model)?;
            (t, e, relative_gain(dev, t, e))
        } else {
            (dev.local_completion_time(), dev.local_energy(), 0.0)
        };
        report.per_user_delay[u] = t;
        report.per_user_energy[u] = e;
        report.per_user_utility[u] = j;
        report.system_utility += dev.provider_weight * j;
    }
    Ok(report)
}

/// Total offloading overhead of the offloaded users, in the decomposed
/// (upload term + execution term) form.
pub fn overhead(
    x: &Assignment,
    p: &PowerAllocation,
    f: &ComputeAllocation,
    scen: &NetworkScenario,
    model: SinrModel,
) -> Result<f64> {
    check_consistent(x, p, f, scen)?;
    let mut v = 0.0;
    for elem in x {
        let c = scen.coefficients(elem.user);
        let spectral = (1.0 + sinr_with(elem, x, p, scen, model)).log2();
        if !(spectral > 0.0) {
            return Err(Error::UnreachableServer {
                user: elem.user,
                server: elem.server,
            });
        }
        v += (c.phi + c.psi * p.get(elem.user)) / spectral;
        v += c.eta / f.get(elem.user, elem.server);
    }
    Ok(v)
}

/// Constant part of the decomposed utility: sum of λ(β^t + β^e) over offloaded users.
pub fn offloading_gain_bound(x: &Assignment, scen: &NetworkScenario) -> f64 {
    x.iter()
        .map(|e| {
            let u = &scen.users[e.user];
            u.provider_weight * (u.pref_time + u.pref_energy)
        })
        .sum()
}

fn positive(field: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(field, format!("must be finite and > 0, got {v}")))
    }
}

fn unit_interval(field: &'static str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(invalid(field, format!("must lie in [0, 1], got {v}")))
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    pub fn user(id: usize, cycles: f64, bits: f64) -> UserDevice {
        UserDevice {
            id,
            position: Position::ORIGIN,
            cell: 0,
            local_cpu_rate: 1e9,
            energy_coeff: 5e-27,
            max_power: 0.1,
            pref_time: 0.2,
            pref_energy: 0.8,
            provider_weight: 1.0,
            amp_efficiency: 1.0,
            task: TaskProfile::new(bits, cycles).unwrap(),
        }
    }

    pub fn server(id: usize, rate: f64) -> EdgeServer {
        EdgeServer {
            id,
            position: Position::ORIGIN,
            cpu_rate: rate,
        }
    }

    /// `gains[u][s]`, 20 GHz servers, 10 MHz total bandwidth.
    pub fn scenario(gains: &[Vec<f64>], num_subbands: usize, noise: f64) -> NetworkScenario {
        let users = (0..gains.len()).map(|u| user(u, 1e9, 1e6)).collect();
        let servers = (0..gains[0].len()).map(|s| server(s, 20e9)).collect();
        NetworkScenario::new(
            users,
            servers,
            ChannelGains::from_rows(gains).unwrap(),
            RadioConfig::new(10e6 * num_subbands as f64, num_subbands, noise).unwrap(),
        )
        .unwrap()
    }
}
