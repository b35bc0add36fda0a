//! Comparison schemes: exhaustive search over feasible decisions, greedy
//! full offloading (GOJRA), independent per-user offloading (IOJRA) and
//! per-cell distributed search (DORA).

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::{Assignment, GroundElement, NetworkScenario};
use crate::search::{heuristic_schedule, local_search, Evaluator, Schedule, SearchConfig};

/// Default cap on the number of feasible decisions the exhaustive search visits.
pub const DEFAULT_EXHAUSTIVE_LIMIT: u128 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SchemeId {
    #[serde(rename = "hJTORA")]
    Hjtora,
    #[serde(rename = "DORA")]
    Dora,
    #[serde(rename = "GOJRA")]
    Gojra,
    #[serde(rename = "IOJRA")]
    Iojra,
    Exhaustive,
}

impl SchemeId {
    pub const ALL: [SchemeId; 5] = [
        SchemeId::Hjtora,
        SchemeId::Dora,
        SchemeId::Gojra,
        SchemeId::Iojra,
        SchemeId::Exhaustive,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            SchemeId::Hjtora => "hJTORA",
            SchemeId::Dora => "DORA",
            SchemeId::Gojra => "GOJRA",
            SchemeId::Iojra => "IOJRA",
            SchemeId::Exhaustive => "Exhaustive",
        }
    }
}

impl fmt::Display for SchemeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchemeId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SchemeId::ALL
            .into_iter()
            .find(|id| id.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| invalid("scheme", format!("unknown scheme `{s}`")))
    }
}

/// Tunables shared by all schemes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SchemeParams {
    pub search: SearchConfig,
    pub exhaustive_limit: u128,
}

impl Default for SchemeParams {
    fn default() -> Self {
        Self {
            search: SearchConfig::default(),
            exhaustive_limit: DEFAULT_EXHAUSTIVE_LIMIT,
        }
    }
}

/// Runs one scheme on a drop. `seed` only affects IOJRA.
pub fn run_scheme(
    id: SchemeId,
    scen: &NetworkScenario,
    params: &SchemeParams,
    seed: u64,
) -> Result<Schedule> {
    let tol = params.search.tol;
    match id {
        SchemeId::Hjtora => Ok(heuristic_schedule(scen, &params.search)?.schedule),
        SchemeId::Dora => dora_schedule(scen, &params.search),
        SchemeId::Gojra => gojra_schedule(scen, tol),
        SchemeId::Iojra => iojra_schedule(scen, seed, tol),
        SchemeId::Exhaustive => {
            Ok(exhaustive_schedule(scen, tol, params.exhaustive_limit)?.schedule)
        }
    }
}

/// Number of decisions satisfying both matroid constraints:
/// `Σ_k C(users, k) · slots! / (slots - k)!`.
pub fn count_feasible(users: usize, slots: usize) -> u128 {
    let mut total: u128 = 0;
    let mut choose: u128 = 1; // C(users, k)
    let mut arrange: u128 = 1; // slots! / (slots - k)!
    for k in 0..=users.min(slots) {
        total = total.saturating_add(choose.saturating_mul(arrange));
        choose = choose * (users - k) as u128 / (k + 1) as u128;
        arrange = arrange.saturating_mul((slots - k) as u128);
    }
    total
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExhaustiveOutcome {
    pub schedule: Schedule,
    /// Number of decisions evaluated, including the empty one.
    pub visited: u128,
}

/// Optimal decision by backtracking over users; each user either runs
/// locally or takes one free (server, sub-band) slot.
pub fn exhaustive_schedule(
    scen: &NetworkScenario,
    tol: f64,
    limit: u128,
) -> Result<ExhaustiveOutcome> {
    let slots = scen.num_servers() * scen.num_subbands();
    let feasible = count_feasible(scen.num_users(), slots);
    if feasible > limit {
        return Err(Error::SearchTooLarge { feasible, limit });
    }
    let mut state = Backtrack {
        eval: Evaluator::uncached(scen, tol),
        used: vec![false; slots],
        current: Assignment::new(),
        best: Assignment::new(),
        best_value: f64::NEG_INFINITY,
        visited: 0,
    };
    state.descend(0);
    let visited = state.visited;
    let schedule = Schedule::for_assignment(state.best, scen, tol)?;
    Ok(ExhaustiveOutcome { schedule, visited })
}

struct Backtrack<'a> {
    eval: Evaluator<'a>,
    used: Vec<bool>,
    current: Assignment,
    best: Assignment,
    best_value: f64,
    visited: u128,
}

impl Backtrack<'_> {
    fn descend(&mut self, user: usize) {
        let scen = self.eval.scenario();
        if user == scen.num_users() {
            self.visited += 1;
            let v = self.eval.value(&self.current);
            let better = v > self.best_value
                || (v == self.best_value && self.current.iter().lt(self.best.iter()));
            if better {
                self.best_value = v;
                self.best = self.current.clone();
            }
            return;
        }
        self.descend(user + 1);
        let n = scen.num_subbands();
        for slot in 0..self.used.len() {
            if self.used[slot] {
                continue;
            }
            let elem = GroundElement::new(user, slot / n, slot % n);
            self.used[slot] = true;
            self.current.insert(elem);
            self.descend(user + 1);
            self.current.remove(&elem);
            self.used[slot] = false;
        }
    }
}

/// Every user offloads to its home server; within a cell users take sub-bands
/// in descending order of gain until the sub-bands run out. Ties go to the
/// lower user index.
pub fn gojra_schedule(scen: &NetworkScenario, tol: f64) -> Result<Schedule> {
    let mut x = Assignment::new();
    for s in 0..scen.num_servers() {
        let mut members: Vec<usize> = (0..scen.num_users())
            .filter(|&u| scen.home_server(u) == s)
            .collect();
        members.sort_by(|&a, &b| {
            scen.gains
                .get(b, s)
                .total_cmp(&scen.gains.get(a, s))
                .then(a.cmp(&b))
        });
        for (j, &u) in members.iter().take(scen.num_subbands()).enumerate() {
            x.insert(GroundElement::new(u, s, j));
        }
    }
    Schedule::for_assignment(x, scen, tol)
}

/// Each user draws a random sub-band at its home server (the first user to
/// draw a slot keeps it, later colliding users run locally) and then offloads
/// on its own if that pays off when it gets the whole server CPU, transmits at
/// its power budget and every other drawn user interferes at full power.
pub fn iojra_schedule(scen: &NetworkScenario, seed: u64, tol: f64) -> Result<Schedule> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut drawn = Assignment::new();
    for u in 0..scen.num_users() {
        let s = scen.home_server(u);
        let j = rng.random_range(0..scen.num_subbands());
        if drawn.occupant(s, j).is_none() {
            drawn.insert(GroundElement::new(u, s, j));
        }
    }
    let mut x = Assignment::new();
    for elem in &drawn {
        if standalone_gain(elem, &drawn, scen) > 0.0 {
            x.insert(*elem);
        }
    }
    Schedule::for_assignment(x, scen, tol)
}

/// λ·J_u of `elem` at full power with the whole server CPU.
fn standalone_gain(elem: &GroundElement, drawn: &Assignment, scen: &NetworkScenario) -> f64 {
    let u = &scen.users[elem.user];
    let c = scen.coefficients(elem.user);
    let theta = crate::power::effective_channel(elem, drawn, scen);
    let upload = (c.phi + c.psi * u.max_power) / (1.0 + theta * u.max_power).log2();
    let exec = c.eta / scen.servers[elem.server].cpu_rate;
    u.provider_weight * (u.pref_time + u.pref_energy) - upload - exec
}

/// Each base station runs the local search over its own users and sub-bands,
/// unaware of the other cells; the union is scored with full interference.
pub fn dora_schedule(scen: &NetworkScenario, cfg: &SearchConfig) -> Result<Schedule> {
    let mut x = Assignment::new();
    for s in 0..scen.num_servers() {
        let ground: Vec<GroundElement> = (0..scen.num_users())
            .filter(|&u| scen.home_server(u) == s)
            .flat_map(|u| (0..scen.num_subbands()).map(move |j| GroundElement::new(u, s, j)))
            .collect();
        if ground.is_empty() {
            continue;
        }
        let out = local_search(scen, &ground, cfg)?;
        for e in &out.schedule.assignment {
            x.insert(*e);
        }
    }
    Schedule::for_assignment(x, scen, cfg.tol)
}
