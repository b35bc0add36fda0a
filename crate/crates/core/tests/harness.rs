use std::process::Command;

use mec_offload::experiment::{
    self, emit_csv, fig6_gap, read_csv, render_csv, run, run_drops, ExperimentSpec,
    InterferenceMode, Sweep, SweepParameter, CSV_HEADER,
};
use mec_offload::scenario::{generate, pathloss_db, scenario_hash, ScenarioConfig, UserCount};
use mec_offload::stats::RunningStats;
use mec_offload::SchemeId;

fn tiny() -> ScenarioConfig {
    ScenarioConfig {
        num_cells: 3,
        users: UserCount::PerCell(2),
        ..ScenarioConfig::default()
    }
}

#[test]
fn shadowing_has_the_configured_spread() {
    let cfg = ScenarioConfig {
        users: UserCount::Total(1500),
        ..ScenarioConfig::default()
    };
    let scen = generate(&cfg, 3).unwrap();
    let mut residual = RunningStats::new();
    for (u, user) in scen.users.iter().enumerate() {
        for (s, server) in scen.servers.iter().enumerate() {
            let d = user.position.distance(&server.position).max(cfg.min_distance_km);
            let loss_db = -10.0 * scen.gains.get(u, s).log10();
            residual.push(loss_db - pathloss_db(d).unwrap());
        }
    }
    assert!(residual.count() >= 10_000);
    assert!(residual.mean().abs() < 0.2, "mean {}", residual.mean());
    assert!((residual.sample_std() - 8.0).abs() < 0.2, "std {}", residual.sample_std());
}

#[test]
fn users_spread_evenly_over_cells() {
    let cfg = ScenarioConfig {
        users: UserCount::Total(7_000),
        ..ScenarioConfig::default()
    };
    let scen = generate(&cfg, 9).unwrap();
    let mut counts = [0usize; 7];
    for u in &scen.users {
        counts[u.cell] += 1;
    }
    let expected = 1_000.0;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    // 99.9% quantile of chi-square with 6 degrees of freedom
    assert!(chi2 < 22.46, "chi2 {chi2}, counts {counts:?}");
}

#[test]
fn drops_are_reproducible_and_paired() {
    let mut spec = ExperimentSpec::new(tiny(), vec![SchemeId::Hjtora, SchemeId::Iojra], 4);
    spec.master_seed = 77;
    let a = run_drops(&spec).unwrap();
    spec.threads = Some(1);
    let b = run_drops(&spec).unwrap();
    assert_eq!(a.len(), 8);
    for (ra, rb) in a.iter().zip(&b) {
        assert_eq!(ra.scenario_hash, rb.scenario_hash);
        assert_eq!(ra.exact, rb.exact);
    }
    // both schemes of a drop see the same scenario
    assert_eq!(a[0].scenario_hash, a[1].scenario_hash);
    assert_ne!(a[0].scenario_hash, a[2].scenario_hash);
    let scen = generate(&tiny(), a[2].seed).unwrap();
    assert_eq!(scenario_hash(&scen), a[2].scenario_hash);
}

#[test]
fn csv_layout_and_round_trip() {
    let mut spec = ExperimentSpec::new(tiny(), vec![SchemeId::Hjtora, SchemeId::Gojra], 3);
    spec.interference = InterferenceMode::Both;
    spec.sweep = Some(Sweep {
        parameter: SweepParameter::InputSize,
        values: vec![200.0, 400.0],
    });
    let rows = run(&spec).unwrap();
    assert_eq!(rows.len(), 2 * 2 * 2);
    let text = render_csv(&rows);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(CSV_HEADER));
    for line in lines {
        assert_eq!(line.split(',').count(), 8, "{line}");
    }
    assert!(text.contains(",hJTORA:approx,"));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out.csv");
    emit_csv(&rows, &path).unwrap();
    let back = read_csv(&path).unwrap();
    assert_eq!(back.len(), rows.len());
    for (a, b) in rows.iter().zip(&back) {
        assert_eq!((a.scheme, a.sinr, a.drops, a.sweep_value), (b.scheme, b.sinr, b.drops, b.sweep_value));
        assert!((a.mean_utility - b.mean_utility).abs() <= 1e-8 * a.mean_utility.abs());
    }
}

#[test]
fn lone_user_sees_no_interference_gap() {
    let cfg = ScenarioConfig {
        num_cells: 1,
        users: UserCount::PerCell(1),
        ..ScenarioConfig::default()
    };
    let mut spec = ExperimentSpec::new(cfg, vec![SchemeId::Hjtora], 5);
    spec.sweep = Some(Sweep {
        parameter: SweepParameter::MaxPowerDbm,
        values: vec![10.0, 35.0],
    });
    for row in fig6_gap(&spec).unwrap() {
        assert_eq!(row.mean_relative_gap, 0.0);
        assert_eq!(row.drops, 5);
    }
}

#[test]
fn preset_shapes() {
    assert_eq!(experiment::presets::fig2().scenario.num_users(), 6);
    assert_eq!(experiment::presets::fig2().scenario.subbands(), 2);
    assert_eq!(experiment::presets::fig5(21).scenario.num_users(), 21);
    assert_eq!(experiment::presets::fig6().sweep.unwrap().values.len(), 8);
}

fn cli() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mec-offload"))
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fig.csv");
    let status = cli()
        .args(["run", "--drops", "2", "--schemes", "hJTORA,GOJRA", "--out"])
        .arg(&out)
        .args(["--config"])
        .arg({
            let cfg = dir.path().join("cfg.json");
            std::fs::write(&cfg, r#"{"num_cells": 2, "users": {"per_cell": 2}}"#).unwrap();
            cfg
        })
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let rows = read_csv(&out).unwrap();
    assert_eq!(rows.len(), 2);

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"pref_time": 1.5}"#).unwrap();
    let status = cli().args(["run", "--drops", "1", "--config"]).arg(&bad).status().unwrap();
    assert_eq!(status.code(), Some(1));

    let status = cli().args(["run", "--schemes", "nonsense"]).status().unwrap();
    assert_eq!(status.code(), Some(1));
}
