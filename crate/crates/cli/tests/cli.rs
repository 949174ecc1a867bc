use std::process::Command;

use temporal_robustness::{Engine, NetworkConfig};
use trlab::{
    parse_engines, run_figure, run_sweep, run_validate, Axis, CliError, FigureOverrides, Level, Row, SweepPlan, HEADER,
};

fn trlab() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_trlab"));
    cmd.env_remove(trlab::CONFIG_ENV);
    cmd
}

fn overrides(iterations: usize) -> FigureOverrides {
    FigureOverrides {
        iterations,
        ..FigureOverrides::default()
    }
}

fn rows_of(rows: &[Row], engine: Engine) -> Vec<&Row> {
    rows.iter().filter(|r| r.engine == engine).collect()
}

#[test]
fn csv_header_and_determinism() {
    let mut plan = SweepPlan::new(
        Axis::ChProbability,
        vec![0.2, 0.5],
        vec![Engine::Simulation, Engine::AnalyticApprox, Engine::MeanDegree],
        NetworkConfig::reference().with_n_nodes(40).unwrap(),
    );
    plan.iterations = 300;
    let a = run_sweep(&plan).unwrap().to_csv();
    let b = run_sweep(&plan).unwrap().to_csv();
    assert_eq!(a, b);
    let mut lines = a.lines();
    assert_eq!(lines.next(), Some(HEADER));
    let body: Vec<&str> = lines.collect();
    assert_eq!(body.len(), 6);
    for line in &body {
        assert_eq!(line.split(',').count(), 14, "{line}");
        assert!(line.contains(";iterations="), "{line}");
    }
    assert!(body[0].starts_with("ch_probability,0.2,sim,"));
    assert!(body[2].starts_with("ch_probability,0.2,mean-degree,"));
    assert!(body[5].starts_with("ch_probability,0.5,mean-degree,"));
}

#[test]
fn binary_output_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let path = dir.path().join(name);
        let status = trlab()
            .args(["sweep", "--axis", "n_nodes", "--values", "10,20", "--iterations", "200", "--seed", "5", "--quiet"])
            .args(["--engine", "sim,analytic-exact", "--out"])
            .arg(&path)
            .status()
            .unwrap();
        assert!(status.success());
        std::fs::read(path).unwrap()
    };
    assert_eq!(run("a.csv"), run("b.csv"));
}

#[test]
fn no_failures_means_full_robustness() {
    let plan = SweepPlan {
        iterations: 200,
        ..SweepPlan::new(
            Axis::FailureQ,
            vec![0.0],
            parse_engines("sim,analytic-exact,analytic-approx,mean-degree").unwrap(),
            NetworkConfig::reference(),
        )
    };
    let result = run_sweep(&plan).unwrap();
    assert_eq!(result.rows.len(), 4);
    for row in &result.rows {
        let r = row.robustness.unwrap();
        assert!((r - 1.0).abs() <= 1e-9, "{row:?}");
    }
}

#[test]
fn approximation_tracks_simulation_over_ch_probability() {
    let plan = SweepPlan {
        iterations: 20_000,
        ..SweepPlan::new(
            Axis::ChProbability,
            (1..=9).map(|i| i as f64 / 10.0).collect(),
            vec![Engine::Simulation, Engine::AnalyticApprox],
            NetworkConfig::reference(),
        )
    };
    let rows = run_sweep(&plan).unwrap().rows;
    for pair in rows.chunks(2) {
        let (sim, approx) = (pair[0].robustness.unwrap(), pair[1].robustness.unwrap());
        assert!((sim - approx).abs() / sim <= 0.015, "{pair:?}");
    }
}

#[test]
fn fig5_successes_shrink_after_removal() {
    let result = run_figure("fig5", &overrides(500)).unwrap();
    assert_eq!(result.rows.len(), 18);
    for row in &result.rows {
        assert!(row.pre_success.unwrap() >= row.post_success.unwrap(), "{row:?}");
    }
}

#[test]
fn fig6_reports_percentages_per_threshold() {
    let result = run_figure("fig6", &overrides(300)).unwrap();
    assert_eq!(result.rows.len(), 18);
    for row in &result.rows {
        let (nodes, heads) = (row.pct_fail_nodes.unwrap(), row.pct_fail_chs.unwrap());
        assert!((0.0..=100.0).contains(&nodes) && (0.0..=100.0).contains(&heads));
    }
    assert!(result.rows[0].mode.contains("p_th_dbm=-111"));
    assert!(result.rows[17].mode.contains("p_th_dbm=-141"));
}

#[test]
fn fig7_robustness_falls_with_failure_probability() {
    let result = run_figure("fig7", &overrides(2000)).unwrap();
    for engine in [Engine::Simulation, Engine::AnalyticApprox] {
        let series: Vec<f64> = rows_of(&result.rows, engine).iter().map(|r| r.robustness.unwrap()).collect();
        assert_eq!(series.len(), 5);
        assert!(series.windows(2).all(|w| w[1] <= w[0]), "{engine}: {series:?}");
    }
}

#[test]
fn fig3_simulation_overlaps_exact_analysis() {
    let result = run_figure("fig3", &overrides(10_000)).unwrap();
    let sims = rows_of(&result.rows, Engine::Simulation);
    let exact = rows_of(&result.rows, Engine::AnalyticExact);
    assert_eq!(sims.len(), 3);
    for (s, e) in sims.iter().zip(&exact) {
        let combined = (s.std_error.unwrap().powi(2) + e.std_error.unwrap().powi(2)).sqrt();
        let gap = (s.robustness.unwrap() - e.robustness.unwrap()).abs();
        assert!(gap <= 0.01f64.max(4.0 * combined), "{s:?} vs {e:?}");
    }
}

#[test]
fn unknown_figure_is_a_usage_error() {
    assert!(matches!(run_figure("fig8", &overrides(100)), Err(CliError::Usage(_))));
    let out = trlab().args(["figure", "fig8"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = trlab().args(["sweep", "--axis", "speed", "--values", "1"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = trlab().args(["sweep", "--axis", "n_nodes", "--values", "10.5"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = trlab().arg("--bogus").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn corrupted_config_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.cfg");
    std::fs::write(&path, "path_loss_exponent = 0\n").unwrap();
    let out = trlab().args(["validate", "fast", "--config"]).arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("path_loss_exponent"));

    // The environment variable supplies the same default.
    let out = trlab().env(trlab::CONFIG_ENV, &path).args(["validate"]).output().unwrap();
    assert_eq!(out.status.code(), Some(3));

    let mut cfg = NetworkConfig::reference();
    cfg.path_loss_exponent = -1.0;
    assert!(matches!(run_validate(Level::Fast, &cfg), Err(CliError::Invalid(_))));
}

#[test]
fn engine_failures_become_error_rows() {
    let dead = NetworkConfig::reference().with_threshold_dbm(400.0).unwrap();
    let plan = SweepPlan {
        iterations: 100,
        ..SweepPlan::new(Axis::ChProbability, vec![0.3], vec![Engine::Simulation, Engine::MeanDegree], dead.clone())
    };
    let result = run_sweep(&plan).unwrap();
    assert_eq!(result.error_rows(), 2);
    assert!(result.rows[0].mode.starts_with("error:no-success-baseline"));
    assert!(result.rows[1].mode.starts_with("error:degenerate-degree"));

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("dead.cfg");
    std::fs::write(&cfg, dead.to_string()).unwrap();
    let out = trlab()
        .args(["sweep", "--axis", "ch_probability", "--values", "0.3", "--iterations", "100", "--quiet", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4));
    assert_eq!(String::from_utf8_lossy(&out.stdout).lines().count(), 3);
}

#[test]
fn fast_validation_passes_quickly() {
    let start = std::time::Instant::now();
    let out = trlab().args(["validate", "fast"]).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(start.elapsed().as_secs() < 60);
}

#[test]
fn full_validation_includes_the_fading_oracle() {
    let report = run_validate(Level::Full, &NetworkConfig::reference()).unwrap();
    assert!(report.checks.iter().any(|c| c.name == "fading-oracle"));
    assert!(report.passed(), "{report}");
}
