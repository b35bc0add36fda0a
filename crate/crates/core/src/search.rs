//! Task offloading: the optimal-value function `J*(X)` of the resource
//! allocation subproblem and the remove/exchange local search over the two
//! partition matroids (one slot per user, one user per server sub-band).

use std::collections::HashMap;
use std::f64::consts::LN_2;

use serde::Serialize;

use crate::compute::solve_cra;
use crate::error::{Error, Result};
use crate::model::{
    Assignment, ComputeAllocation, GroundElement, NetworkScenario, OverheadCoefficients,
    PowerAllocation,
};
use crate::power::{bisect_power, solve_upa, UpaCoefficients, DEFAULT_TOLERANCE};

/// Default improvement parameter of the local search.
pub const DEFAULT_EPS: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SearchConfig {
    /// Accepted moves must improve `J*` by a factor `1 + eps / n²`.
    pub eps: f64,
    /// Bisection tolerance for the power subproblems [W].
    pub tol: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            eps: DEFAULT_EPS,
            tol: DEFAULT_TOLERANCE,
        }
    }
}

/// Evaluates `J*(X)` with precomputed per-user coefficients. The memoising
/// variant remembers each element's optimal upload overhead keyed by its
/// effective channel: a local-search move only changes the interference on one
/// or two sub-bands, so most power subproblems repeat between candidates.
pub struct Evaluator<'a> {
    scen: &'a NetworkScenario,
    coef: Vec<OverheadCoefficients>,
    sqrt_eta: Vec<f64>,
    tol: f64,
    uploads: Option<HashMap<(GroundElement, u64), f64>>,
    evaluations: usize,
}

impl<'a> Evaluator<'a> {
    pub fn new(scen: &'a NetworkScenario, tol: f64) -> Self {
        let coef: Vec<_> = (0..scen.num_users()).map(|u| scen.coefficients(u)).collect();
        let sqrt_eta = coef.iter().map(|c| c.eta.sqrt()).collect();
        Self {
            scen,
            coef,
            sqrt_eta,
            tol,
            uploads: Some(HashMap::new()),
            evaluations: 0,
        }
    }

    /// Evaluator without memoisation, for one-off evaluations.
    pub fn uncached(scen: &'a NetworkScenario, tol: f64) -> Self {
        Self {
            uploads: None,
            ..Self::new(scen, tol)
        }
    }

    pub fn scenario(&self) -> &'a NetworkScenario {
        self.scen
    }

    /// Number of `J*` evaluations so far.
    pub fn evaluations(&self) -> usize {
        self.evaluations
    }

    /// `J*(x)`; `x` must be feasible.
    pub fn value(&mut self, x: &Assignment) -> f64 {
        self.evaluations += 1;
        let mut memo = self.uploads.take();
        let v = self.compute(x, memo.as_mut());
        self.uploads = memo;
        v
    }

    /// Optimal upload overhead of every element in `members`, which must be
    /// the sorted elements of one sub-band.
    fn subband_upload(&mut self, members: &[GroundElement]) -> f64 {
        let scen = self.scen;
        let mut total = 0.0;
        for elem in members {
            let interference: f64 = members
                .iter()
                .filter(|k| k.server != elem.server)
                .map(|k| scen.users[k.user].max_power * scen.gains.get(k.user, elem.server))
                .sum();
            let theta = scen.gains.get(elem.user, elem.server) / (interference + scen.radio.noise_power);
            total += Self::upload_term(&self.coef, self.tol, scen, self.uploads.as_mut(), elem, theta);
        }
        total
    }

    fn upload_term(
        coef: &[OverheadCoefficients],
        tol: f64,
        scen: &NetworkScenario,
        memo: Option<&mut HashMap<(GroundElement, u64), f64>>,
        elem: &GroundElement,
        theta: f64,
    ) -> f64 {
        let solve = || {
            let c = &coef[elem.user];
            let sub = UpaCoefficients {
                phi: c.phi,
                psi: c.psi,
                theta,
                max_power: scen.users[elem.user].max_power,
            };
            let p = bisect_power(&sub, tol).power;
            (sub.phi + sub.psi * p) / (sub.theta * p).ln_1p() * LN_2
        };
        match memo {
            Some(memo) => *memo.entry((*elem, theta.to_bits())).or_insert_with(solve),
            None => solve(),
        }
    }

    fn compute(
        &self,
        x: &Assignment,
        mut uploads: Option<&mut HashMap<(GroundElement, u64), f64>>,
    ) -> f64 {
        let scen = self.scen;
        let mut gain = 0.0;
        let mut upload = 0.0;
        let mut per_server = vec![0.0; scen.num_servers()];
        for elem in x {
            let u = &scen.users[elem.user];
            gain += u.provider_weight * (u.pref_time + u.pref_energy);
            let theta = crate::power::effective_channel(elem, x, scen);
            upload += Self::upload_term(&self.coef, self.tol, scen, uploads.as_deref_mut(), elem, theta);
            per_server[elem.server] += self.sqrt_eta[elem.user];
        }
        let execution: f64 = per_server
            .iter()
            .zip(&scen.servers)
            .map(|(r, s)| r * r / s.cpu_rate)
            .sum();
        gain - upload - execution
    }
}

/// `J*(x)`: the best utility reachable with `x` fixed, using the bisection
/// powers and the closed-form compute split.
pub fn j_star(x: &Assignment, scen: &NetworkScenario, tol: f64) -> Result<f64> {
    x.check_against(scen)?;
    Ok(Evaluator::uncached(scen, tol).value(x))
}

pub fn is_feasible(x: &Assignment) -> bool {
    x.is_feasible()
}

/// Drops `elem` from `x`.
pub fn remove_op(x: &Assignment, elem: &GroundElement) -> Result<Assignment> {
    if !x.contains(elem) {
        return Err(Error::NotInAssignment(*elem));
    }
    let mut out = x.clone();
    out.remove(elem);
    Ok(out)
}

/// Inserts `elem`, first dropping the user's current slot and the current
/// occupant of `elem`'s server sub-band (at most two elements).
pub fn exchange_op(x: &Assignment, elem: &GroundElement) -> Result<Assignment> {
    if x.contains(elem) {
        return Err(Error::AlreadyInAssignment(*elem));
    }
    let mut out = x.clone();
    out.retain(|e| {
        e.user != elem.user && !(e.server == elem.server && e.subband == elem.subband)
    });
    out.insert(*elem);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum MoveKind {
    Remove,
    Exchange,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AcceptedMove {
    pub kind: MoveKind,
    pub element: GroundElement,
    pub before: f64,
    pub after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchTrace {
    /// Ground set size used in the improvement threshold.
    pub ground_size: usize,
    pub eps: f64,
    /// Value of the starting singleton; zero when the search did not start.
    pub initial_value: f64,
    pub accepted_moves: Vec<AcceptedMove>,
    pub evaluations: usize,
    pub final_value: f64,
}

impl SearchTrace {
    pub fn iterations(&self) -> usize {
        self.accepted_moves.len()
    }

    /// `1 + eps / n²`.
    pub fn threshold(&self) -> f64 {
        improvement_factor(self.eps, self.ground_size)
    }
}

pub fn improvement_factor(eps: f64, ground_size: usize) -> f64 {
    let n = ground_size.max(1) as f64;
    1.0 + eps / (n * n)
}

/// A complete solution: decision, powers, compute split and `J*`.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub assignment: Assignment,
    pub power: PowerAllocation,
    pub compute: ComputeAllocation,
    /// `J*` of the assignment (upper-bound interference).
    pub value: f64,
}

impl Schedule {
    /// Derives the optimal powers and compute split for a fixed decision.
    pub fn for_assignment(x: Assignment, scen: &NetworkScenario, tol: f64) -> Result<Self> {
        x.check_against(scen)?;
        let upa = solve_upa(&x, scen, tol);
        let (compute, _) = solve_cra(&x, scen)?;
        let value = Evaluator::uncached(scen, tol).value(&x);
        Ok(Self {
            assignment: x,
            power: upa.power,
            compute,
            value,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    pub schedule: Schedule,
    pub trace: SearchTrace,
}

/// Local search over the full ground set.
pub fn heuristic_schedule(scen: &NetworkScenario, cfg: &SearchConfig) -> Result<SearchOutcome> {
    local_search(scen, &scen.ground_set(), cfg)
}

/// Local search restricted to `ground`.
///
/// Starts from the best singleton (lowest element on ties) and repeatedly takes
/// the first improving move: removes are scanned over the current set first,
/// then exchanges over the elements outside it, both in ascending order. A move
/// is improving when it raises `J*` by more than the factor `1 + eps / n²`.
/// If no singleton has positive value every task runs locally.
pub fn local_search(
    scen: &NetworkScenario,
    ground: &[GroundElement],
    cfg: &SearchConfig,
) -> Result<SearchOutcome> {
    if !(cfg.eps > 0.0) {
        return Err(crate::error::invalid("eps", "must be > 0"));
    }
    let mut ground = ground.to_vec();
    ground.sort_unstable();
    ground.dedup();
    if let Some(bad) = ground.iter().find(|e| {
        e.user >= scen.num_users() || e.server >= scen.num_servers() || e.subband >= scen.num_subbands()
    }) {
        return Err(Error::InfeasibleAssignment(format!("{bad} is out of range")));
    }

    let factor = improvement_factor(cfg.eps, ground.len());
    let mut eval = Evaluator::new(scen, cfg.tol);

    let mut best: Option<(GroundElement, f64)> = None;
    for e in &ground {
        let v = eval.value(&Assignment::from_triples([*e]));
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((*e, v));
        }
    }

    let mut trace = SearchTrace {
        ground_size: ground.len(),
        eps: cfg.eps,
        initial_value: 0.0,
        accepted_moves: Vec::new(),
        evaluations: 0,
        final_value: 0.0,
    };

    let mut x = Assignment::new();
    let mut value = 0.0;
    if let Some((e, v)) = best.filter(|(_, v)| *v > 0.0) {
        x.insert(e);
        value = v;
        trace.initial_value = v;
        while let Some(mv) = first_improving_move(&mut eval, &ground, &x, value, factor) {
            x = match mv.kind {
                MoveKind::Remove => remove_op(&x, &mv.element)?,
                MoveKind::Exchange => exchange_op(&x, &mv.element)?,
            };
            value = mv.after;
            trace.accepted_moves.push(mv);
        }
    }

    trace.evaluations = eval.evaluations();
    trace.final_value = value;
    let schedule = Schedule::for_assignment(x, scen, cfg.tol)?;
    Ok(SearchOutcome { schedule, trace })
}

/// Incremental view of `J*` around a fixed decision: a remove or exchange only
/// changes the upload terms on the sub-bands it touches and the compute terms
/// of the servers it touches.
struct Neighbourhood {
    by_subband: Vec<Vec<GroundElement>>,
    subband_upload: Vec<f64>,
    upload: f64,
    gain: f64,
    server_root: Vec<f64>,
}

impl Neighbourhood {
    fn new(eval: &mut Evaluator<'_>, x: &Assignment) -> Self {
        let scen = eval.scen;
        let mut by_subband = vec![Vec::new(); scen.num_subbands()];
        let mut gain = 0.0;
        let mut server_root = vec![0.0; scen.num_servers()];
        for e in x {
            by_subband[e.subband].push(*e);
            gain += user_weight(scen, e.user);
            server_root[e.server] += eval.sqrt_eta[e.user];
        }
        let subband_upload: Vec<f64> = by_subband.iter().map(|m| eval.subband_upload(m)).collect();
        Self {
            upload: subband_upload.iter().sum(),
            by_subband,
            subband_upload,
            gain,
            server_root,
        }
    }

    /// Approximate `J*` after dropping `removed` and adding `added`.
    fn value(
        &self,
        eval: &mut Evaluator<'_>,
        removed: &[GroundElement],
        added: Option<GroundElement>,
    ) -> f64 {
        let scen = eval.scen;
        eval.evaluations += 1;
        let mut gain = self.gain;
        let mut roots = self.server_root.clone();
        let mut touched: Vec<usize> = Vec::with_capacity(2);
        for e in removed {
            gain -= user_weight(scen, e.user);
            roots[e.server] -= eval.sqrt_eta[e.user];
            touched.push(e.subband);
        }
        if let Some(a) = added {
            gain += user_weight(scen, a.user);
            roots[a.server] += eval.sqrt_eta[a.user];
            touched.push(a.subband);
        }
        touched.sort_unstable();
        touched.dedup();
        let mut upload = self.upload;
        for &j in &touched {
            let mut members: Vec<GroundElement> = self.by_subband[j]
                .iter()
                .filter(|e| !removed.contains(e))
                .copied()
                .collect();
            if let Some(a) = added.filter(|a| a.subband == j) {
                let at = members.partition_point(|e| *e < a);
                members.insert(at, a);
            }
            upload += eval.subband_upload(&members) - self.subband_upload[j];
        }
        let execution: f64 = roots
            .iter()
            .zip(&scen.servers)
            .map(|(r, s)| r.max(0.0).powi(2) / s.cpu_rate)
            .sum();
        gain - upload - execution
    }
}

fn user_weight(scen: &NetworkScenario, user: usize) -> f64 {
    let u = &scen.users[user];
    u.provider_weight * (u.pref_time + u.pref_energy)
}

/// Relative slack of the incremental screen; candidates it passes are
/// re-evaluated from scratch before a move is accepted.
const SCREEN_SLACK: f64 = 1e-9;

fn first_improving_move(
    eval: &mut Evaluator<'_>,
    ground: &[GroundElement],
    x: &Assignment,
    value: f64,
    factor: f64,
) -> Option<AcceptedMove> {
    let target = factor * value;
    let screen_target = target - SCREEN_SLACK * target.abs().max(1.0);
    let around = Neighbourhood::new(eval, x);
    let confirm = |eval: &mut Evaluator<'_>, kind: MoveKind, e: &GroundElement, cand: Assignment| {
        let v = eval.value(&cand);
        (v > target).then_some(AcceptedMove {
            kind,
            element: *e,
            before: value,
            after: v,
        })
    };
    let members: Vec<GroundElement> = x.iter().copied().collect();
    for e in &members {
        if around.value(eval, std::slice::from_ref(e), None) > screen_target {
            if let Some(mv) = confirm(eval, MoveKind::Remove, e, remove_op(x, e).expect("member")) {
                return Some(mv);
            }
        }
    }
    let mut removed = Vec::with_capacity(2);
    for e in ground.iter().filter(|e| !x.contains(e)) {
        removed.clear();
        removed.extend(x.slot_of(e.user));
        removed.extend(x.occupant(e.server, e.subband));
        if around.value(eval, &removed, Some(*e)) > screen_target {
            let cand = exchange_op(x, e).expect("non-member");
            if let Some(mv) = confirm(eval, MoveKind::Exchange, e, cand) {
                return Some(mv);
            }
        }
    }
    None
}

/// True when no single remove or exchange over `ground` beats `value` by the
/// improvement factor.
pub fn is_local_optimum(
    scen: &NetworkScenario,
    ground: &[GroundElement],
    x: &Assignment,
    cfg: &SearchConfig,
) -> bool {
    let mut eval = Evaluator::uncached(scen, cfg.tol);
    let value = eval.value(x);
    let factor = improvement_factor(cfg.eps, ground.len());
    first_improving_move(&mut eval, ground, x, value, factor).is_none()
}
