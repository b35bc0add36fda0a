//! Monte-Carlo experiment runner.
//!
//! Each drop `i` uses the scenario seed `drop_seed(master_seed, i)`, the
//! `(i + 1)`-th output of a SplitMix64 stream started at `master_seed`. Every
//! scheme and every sweep point sees the same drop seeds, so comparisons are
//! paired and adding a scheme never changes the scenarios.

use std::fmt;
use std::fs::File;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use log::{debug, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{run_scheme, SchemeId, SchemeParams};
use crate::error::{invalid, Error, Result};
use crate::model::{system_utility, NetworkScenario, SinrModel};
use crate::scenario::{generate, scenario_hash, ScenarioConfig, UserCount};
use crate::search::Schedule;
use crate::stats::RunningStats;

/// CSV header of [`emit_csv`].
pub const CSV_HEADER: &str =
    "sweep_value,scheme,mean_utility,ci95,mean_delay_s,mean_energy_j,mean_runtime_ms,drops";

pub fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

pub fn drop_seed(master_seed: u64, drop: u64) -> u64 {
    splitmix64(master_seed.wrapping_add(drop.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}

/// Seed for the random sub-band draws of IOJRA in a given drop.
pub fn scheme_seed(drop_seed: u64) -> u64 {
    splitmix64(drop_seed ^ 0x0049_4F4A_5241)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SweepParameter {
    #[serde(rename = "users_per_cell")]
    UsersPerCell,
    /// Task workload [Megacycles].
    #[serde(rename = "c_u")]
    Workload,
    /// Task input [KB].
    #[serde(rename = "d_u")]
    InputSize,
    #[serde(rename = "beta_t")]
    PrefTime,
    #[serde(rename = "P_u_dbm")]
    MaxPowerDbm,
}

impl SweepParameter {
    pub fn name(&self) -> &'static str {
        match self {
            SweepParameter::UsersPerCell => "users_per_cell",
            SweepParameter::Workload => "c_u",
            SweepParameter::InputSize => "d_u",
            SweepParameter::PrefTime => "beta_t",
            SweepParameter::MaxPowerDbm => "P_u_dbm",
        }
    }

    /// `base` with this parameter set to `value`.
    pub fn apply(&self, base: &ScenarioConfig, value: f64) -> Result<ScenarioConfig> {
        let mut cfg = base.clone();
        match self {
            SweepParameter::UsersPerCell => {
                if !(value >= 1.0 && value.fract() == 0.0) {
                    return Err(invalid("users_per_cell", format!("must be a positive integer, got {value}")));
                }
                cfg.users = UserCount::PerCell(value as usize);
                // one sub-band per user slot in each cell
                cfg.num_subbands = None;
            }
            SweepParameter::Workload => {
                cfg.workload_megacycles = value;
                cfg.cell_workload_megacycles = None;
            }
            SweepParameter::InputSize => cfg.input_kb = value,
            SweepParameter::PrefTime => {
                cfg.pref_time = value;
                cfg.pref_energy = None;
            }
            SweepParameter::MaxPowerDbm => cfg.max_power_dbm = value,
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

impl fmt::Display for SweepParameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepParameter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            SweepParameter::UsersPerCell,
            SweepParameter::Workload,
            SweepParameter::InputSize,
            SweepParameter::PrefTime,
            SweepParameter::MaxPowerDbm,
        ]
        .into_iter()
        .find(|p| p.name().eq_ignore_ascii_case(s.trim()))
        .ok_or_else(|| invalid("sweep", format!("unknown sweep parameter `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

impl FromStr for Sweep {
    type Err = Error;

    /// `name=v1,v2,...`
    fn from_str(s: &str) -> Result<Self> {
        let (name, values) = s
            .split_once('=')
            .ok_or_else(|| invalid("sweep", "expected `name=v1,v2,...`"))?;
        let values = values
            .split(',')
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| invalid("sweep", format!("bad value `{v}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Sweep {
            parameter: name.parse()?,
            values,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InterferenceMode {
    Approx,
    Exact,
    Both,
}

impl InterferenceMode {
    pub fn models(&self) -> &'static [SinrModel] {
        match self {
            InterferenceMode::Approx => &[SinrModel::Approx],
            InterferenceMode::Exact => &[SinrModel::Exact],
            InterferenceMode::Both => &[SinrModel::Exact, SinrModel::Approx],
        }
    }
}

impl FromStr for InterferenceMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "approx" => Ok(InterferenceMode::Approx),
            "exact" => Ok(InterferenceMode::Exact),
            "both" => Ok(InterferenceMode::Both),
            other => Err(invalid("interference", format!("unknown mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentSpec {
    pub scenario: ScenarioConfig,
    pub schemes: Vec<SchemeId>,
    pub drops: usize,
    pub master_seed: u64,
    pub sweep: Option<Sweep>,
    pub interference: InterferenceMode,
    pub params: SchemeParams,
    /// Worker threads; `Some(1)` runs sequentially, `None` uses all cores.
    pub threads: Option<usize>,
}

impl ExperimentSpec {
    pub fn new(scenario: ScenarioConfig, schemes: Vec<SchemeId>, drops: usize) -> Self {
        Self {
            master_seed: scenario.seed,
            scenario,
            schemes,
            drops,
            sweep: None,
            interference: InterferenceMode::Exact,
            params: SchemeParams::default(),
            threads: None,
        }
    }

    /// Validates the spec and returns one scenario config per sweep point.
    pub fn sweep_points(&self) -> Result<Vec<(Option<f64>, ScenarioConfig)>> {
        if self.drops == 0 {
            return Err(invalid("drops", "must be at least 1"));
        }
        if self.schemes.is_empty() {
            return Err(invalid("schemes", "at least one scheme is required"));
        }
        self.scenario.validate()?;
        match &self.sweep {
            None => Ok(vec![(None, self.scenario.clone())]),
            Some(sweep) => {
                if sweep.values.is_empty() {
                    return Err(invalid("sweep", "needs at least one value"));
                }
                sweep
                    .values
                    .iter()
                    .map(|&v| Ok((Some(v), sweep.parameter.apply(&self.scenario, v)?)))
                    .collect()
            }
        }
    }
}

/// Headline numbers of one schedule under one SINR model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Evaluation {
    pub utility: f64,
    /// Mean over all users; local figures for users that do not offload.
    pub mean_delay: f64,
    pub mean_energy: f64,
    pub offloaded: usize,
}

pub fn evaluate(schedule: &Schedule, scen: &NetworkScenario, model: SinrModel) -> Result<Evaluation> {
    let r = system_utility(
        &schedule.assignment,
        &schedule.power,
        &schedule.compute,
        scen,
        model,
    )?;
    Ok(Evaluation {
        utility: r.system_utility,
        mean_delay: r.mean_delay(),
        mean_energy: r.mean_energy(),
        offloaded: schedule.assignment.len(),
    })
}

/// Outcome of one scheme on one drop.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DropRecord {
    pub sweep_index: usize,
    pub drop: usize,
    pub seed: u64,
    pub scenario_hash: u64,
    pub scheme: SchemeId,
    pub runtime_ms: f64,
    /// `None` when the scheme refused the instance (exhaustive size guard).
    pub exact: Option<Evaluation>,
    pub approx: Option<Evaluation>,
}

/// Runs every (sweep point, drop, scheme) combination and returns the
/// per-drop records ordered by sweep point, drop, then scheme order in `spec`.
pub fn run_drops(spec: &ExperimentSpec) -> Result<Vec<DropRecord>> {
    let points = spec.sweep_points()?;
    let jobs: Vec<(usize, usize)> = (0..points.len())
        .flat_map(|p| (0..spec.drops).map(move |d| (p, d)))
        .collect();
    let work = |&(p, d): &(usize, usize)| run_one_drop(spec, p, &points[p].1, d);
    let nested: Vec<Result<Vec<DropRecord>>> = match spec.threads {
        Some(1) => jobs.iter().map(work).collect(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| invalid("threads", e.to_string()))?
            .install(|| jobs.par_iter().map(work).collect()),
        None => jobs.par_iter().map(work).collect(),
    };
    let mut out = Vec::with_capacity(jobs.len() * spec.schemes.len());
    for recs in nested {
        out.extend(recs?);
    }
    Ok(out)
}

fn run_one_drop(
    spec: &ExperimentSpec,
    sweep_index: usize,
    cfg: &ScenarioConfig,
    drop: usize,
) -> Result<Vec<DropRecord>> {
    let seed = drop_seed(spec.master_seed, drop as u64);
    let scen = generate(cfg, seed)?;
    let hash = scenario_hash(&scen);
    debug!("sweep point {sweep_index} drop {drop}: seed {seed:#x} scenario {hash:#018x}");
    let mut out = Vec::with_capacity(spec.schemes.len());
    for &scheme in &spec.schemes {
        let start = Instant::now();
        let result = run_scheme(scheme, &scen, &spec.params, scheme_seed(seed));
        let runtime_ms = start.elapsed().as_secs_f64() * 1e3;
        let (exact, approx) = match result {
            Ok(schedule) => (
                Some(evaluate(&schedule, &scen, SinrModel::Exact)?),
                Some(evaluate(&schedule, &scen, SinrModel::Approx)?),
            ),
            Err(e @ Error::SearchTooLarge { .. }) => {
                if drop == 0 {
                    warn!("{scheme} skipped: {e}");
                }
                (None, None)
            }
            Err(e) => return Err(e),
        };
        out.push(DropRecord {
            sweep_index,
            drop,
            seed,
            scenario_hash: hash,
            scheme,
            runtime_ms,
            exact,
            approx,
        });
    }
    Ok(out)
}

/// One aggregate line of the output CSV.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub sweep_value: Option<f64>,
    pub scheme: SchemeId,
    pub sinr: SinrModel,
    pub mean_utility: f64,
    pub ci95_halfwidth: f64,
    pub mean_delay_s: f64,
    pub mean_energy_j: f64,
    pub mean_runtime_ms: f64,
    /// Zero for a scheme that refused the instance.
    pub drops: usize,
}

impl ResultRow {
    /// Scheme column: the scheme name, with `:approx` appended for rows
    /// scored with full-power interference.
    pub fn label(&self) -> String {
        match self.sinr {
            SinrModel::Exact => self.scheme.name().to_string(),
            SinrModel::Approx => format!("{}:approx", self.scheme.name()),
        }
    }
}

/// Aggregates per-drop records into rows ordered by sweep point, scheme, and
/// SINR model (exact first).
pub fn aggregate(spec: &ExperimentSpec, records: &[DropRecord]) -> Result<Vec<ResultRow>> {
    let points = spec.sweep_points()?;
    let mut rows = Vec::new();
    for (p, (value, _)) in points.iter().enumerate() {
        for &scheme in &spec.schemes {
            let recs: Vec<&DropRecord> = records
                .iter()
                .filter(|r| r.sweep_index == p && r.scheme == scheme)
                .collect();
            for &model in spec.interference.models() {
                let evals: Vec<Evaluation> = recs
                    .iter()
                    .filter_map(|r| match model {
                        SinrModel::Exact => r.exact,
                        SinrModel::Approx => r.approx,
                    })
                    .collect();
                let utility: RunningStats = evals.iter().map(|e| e.utility).collect();
                let delay: RunningStats = evals.iter().map(|e| e.mean_delay).collect();
                let energy: RunningStats = evals.iter().map(|e| e.mean_energy).collect();
                let runtime: RunningStats = recs.iter().map(|r| r.runtime_ms).collect();
                rows.push(ResultRow {
                    sweep_value: *value,
                    scheme,
                    sinr: model,
                    mean_utility: utility.mean(),
                    ci95_halfwidth: utility.ci95_halfwidth(),
                    mean_delay_s: delay.mean(),
                    mean_energy_j: energy.mean(),
                    mean_runtime_ms: runtime.mean(),
                    drops: evals.len(),
                });
            }
        }
    }
    Ok(rows)
}

/// Runs the experiment and aggregates it.
pub fn run(spec: &ExperimentSpec) -> Result<Vec<ResultRow>> {
    let records = run_drops(spec)?;
    aggregate(spec, &records)
}

/// Approximated versus exact utility of the hJTORA solution at one power budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapRow {
    pub p_u_dbm: f64,
    pub utility_approx: f64,
    pub utility_exact: f64,
    /// Mean over drops of `|exact - approx| / |exact|` (zero when nothing is offloaded).
    pub mean_relative_gap: f64,
    pub drops: usize,
}

/// Scores the same hJTORA solution under both SINR models across the power
/// budgets of `spec.sweep` (which must sweep `P_u_dbm`).
pub fn fig6_gap(spec: &ExperimentSpec) -> Result<Vec<GapRow>> {
    let sweep = spec
        .sweep
        .as_ref()
        .filter(|s| s.parameter == SweepParameter::MaxPowerDbm)
        .ok_or_else(|| invalid("sweep", "the interference gap needs a P_u_dbm sweep"))?;
    let spec = ExperimentSpec {
        schemes: vec![SchemeId::Hjtora],
        interference: InterferenceMode::Both,
        ..spec.clone()
    };
    let records = run_drops(&spec)?;
    let mut rows = Vec::with_capacity(sweep.values.len());
    for (p, &dbm) in sweep.values.iter().enumerate() {
        let mut approx = RunningStats::new();
        let mut exact = RunningStats::new();
        let mut gap = RunningStats::new();
        for r in records.iter().filter(|r| r.sweep_index == p) {
            let (Some(e), Some(a)) = (r.exact, r.approx) else {
                continue;
            };
            approx.push(a.utility);
            exact.push(e.utility);
            gap.push(relative_gap(e.utility, a.utility));
        }
        rows.push(GapRow {
            p_u_dbm: dbm,
            utility_approx: approx.mean(),
            utility_exact: exact.mean(),
            mean_relative_gap: gap.mean(),
            drops: gap.count(),
        });
    }
    Ok(rows)
}

pub fn relative_gap(exact: f64, approx: f64) -> f64 {
    if exact == approx {
        0.0
    } else {
        (exact - approx).abs() / exact.abs()
    }
}

/// Nine significant digits.
pub fn format_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.8e}")
    } else {
        format!("{v}")
    }
}

fn io_error(path: &Path, e: impl fmt::Display) -> Error {
    Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

/// Renders rows as CSV text (header included).
pub fn render_csv(rows: &[ResultRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let sweep = r.sweep_value.map(format_float).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            sweep,
            r.label(),
            format_float(r.mean_utility),
            format_float(r.ci95_halfwidth),
            format_float(r.mean_delay_s),
            format_float(r.mean_energy_j),
            format_float(r.mean_runtime_ms),
            r.drops
        ));
    }
    out
}

pub fn emit_csv(rows: &[ResultRow], path: &Path) -> Result<()> {
    let mut f = File::create(path).map_err(|e| io_error(path, e))?;
    f.write_all(render_csv(rows).as_bytes())
        .map_err(|e| io_error(path, e))
}

/// Reads back a file written by [`emit_csv`].
pub fn read_csv(path: &Path) -> Result<Vec<ResultRow>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| io_error(path, e))?;
    let header = reader.headers().map_err(|e| io_error(path, e))?.clone();
    if header.iter().collect::<Vec<_>>().join(",") != CSV_HEADER {
        return Err(io_error(path, "unexpected header"));
    }
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| io_error(path, e))?;
        let num = |i: usize| -> Result<f64> {
            rec[i]
                .parse::<f64>()
                .map_err(|_| io_error(path, format!("bad number `{}`", &rec[i])))
        };
        let (scheme, sinr) = match rec[1].strip_suffix(":approx") {
            Some(name) => (name.parse()?, SinrModel::Approx),
            None => (rec[1].parse()?, SinrModel::Exact),
        };
        rows.push(ResultRow {
            sweep_value: if rec[0].is_empty() { None } else { Some(num(0)?) },
            scheme,
            sinr,
            mean_utility: num(2)?,
            ci95_halfwidth: num(3)?,
            mean_delay_s: num(4)?,
            mean_energy_j: num(5)?,
            mean_runtime_ms: num(6)?,
            drops: rec[7]
                .parse()
                .map_err(|_| io_error(path, format!("bad drop count `{}`", &rec[7])))?,
        });
    }
    Ok(rows)
}

pub const GAP_CSV_HEADER: &str = "p_u_dbm,utility_approx,utility_exact,mean_relative_gap,drops";

pub fn render_gap_csv(rows: &[GapRow]) -> String {
    let mut out = String::from(GAP_CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            format_float(r.p_u_dbm),
            format_float(r.utility_approx),
            format_float(r.utility_exact),
            format_float(r.mean_relative_gap),
            r.drops
        ));
    }
    out
}

/// Ready-made experiment specs for the standard evaluation grid.
pub mod presets {
    use super::*;

    /// Small network: 6 users over 4 cells with 2 sub-bands each.
    pub fn small_network() -> ScenarioConfig {
        ScenarioConfig {
            num_cells: 4,
            users: UserCount::Total(6),
            num_subbands: Some(2),
            ..ScenarioConfig::default()
        }
    }

    /// All five schemes on the small network, for 1000 and 2000 Megacycle tasks.
    pub fn fig2() -> ExperimentSpec {
        let mut spec = ExperimentSpec::new(small_network(), SchemeId::ALL.to_vec(), 100);
        spec.sweep = Some(Sweep {
            parameter: SweepParameter::Workload,
            values: vec![1000.0, 2000.0],
        });
        spec
    }

    fn heuristic_schemes() -> Vec<SchemeId> {
        vec![SchemeId::Hjtora, SchemeId::Dora, SchemeId::Gojra, SchemeId::Iojra]
    }

    /// 7 cells, 1 to 10 users per cell. `non_uniform` alternates 500 and 2000
    /// Megacycle workloads starting with 500 at the centre cell.
    pub fn fig3(non_uniform: bool) -> ExperimentSpec {
        let mut cfg = ScenarioConfig::default();
        if non_uniform {
            cfg.cell_workload_megacycles =
                Some((0..7).map(|c| if c % 2 == 0 { 500.0 } else { 2000.0 }).collect());
        }
        let mut spec = ExperimentSpec::new(cfg, heuristic_schemes(), 100);
        spec.sweep = Some(Sweep {
            parameter: SweepParameter::UsersPerCell,
            values: (1..=10).map(f64::from).collect(),
        });
        spec
    }

    /// 28 users over 7 cells; workload sweep (500 to 3000 Megacycles).
    pub fn fig4_workload() -> ExperimentSpec {
        let mut spec = ExperimentSpec::new(ScenarioConfig::default(), heuristic_schemes(), 100);
        spec.sweep = Some(Sweep {
            parameter: SweepParameter::Workload,
            values: (1..=6).map(|k| 500.0 * k as f64).collect(),
        });
        spec
    }

    /// 28 users over 7 cells; input size sweep (100 KB to 1 MB).
    pub fn fig4_input() -> ExperimentSpec {
        let mut spec = ExperimentSpec::new(ScenarioConfig::default(), heuristic_schemes(), 100);
        spec.sweep = Some(Sweep {
            parameter: SweepParameter::InputSize,
            values: (1..=10).map(|k| 100.0 * k as f64).collect(),
        });
        spec
    }

    /// hJTORA delay and energy against the time preference, `users` in {14, 21}.
    pub fn fig5(users: usize) -> ExperimentSpec {
        let cfg = ScenarioConfig {
            users: UserCount::PerCell(users.div_ceil(7)),
            ..ScenarioConfig::default()
        };
        let mut spec = ExperimentSpec::new(cfg, vec![SchemeId::Hjtora], 100);
        spec.sweep = Some(Sweep {
            parameter: SweepParameter::PrefTime,
            values: (1..=9).map(|k| k as f64 / 10.0).collect(),
        });
        spec
    }

    /// hJTORA under both SINR models, power budget 0 to 35 dBm.
    pub fn fig6() -> ExperimentSpec {
        let mut spec = ExperimentSpec::new(ScenarioConfig::default(), vec![SchemeId::Hjtora], 100);
        spec.interference = InterferenceMode::Both;
        spec.sweep = Some(Sweep {
            parameter: SweepParameter::MaxPowerDbm,
            values: (0..=7).map(|k| 5.0 * k as f64).collect(),
        });
        spec
    }

    /// Runtime comparison on the small network, single-threaded.
    pub fn table1() -> ExperimentSpec {
        let mut spec = ExperimentSpec::new(small_network(), SchemeId::ALL.to_vec(), 100);
        spec.threads = Some(1);
        spec
    }
}
