//! Preset sweeps that produce the data behind each robustness figure.

use std::str::FromStr;

use temporal_robustness::analytic::CountMode;
use temporal_robustness::simulator::PostMode;
use temporal_robustness::{Engine, NetworkConfig};

use crate::{run_sweep, Axis, CliError, SweepPlan, SweepResult, DEFAULT_ITERATIONS, DEFAULT_SEED};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    /// Robustness against network size.
    Fig3,
    /// Robustness and degree ratio against CH probability, per size and threshold.
    Fig4,
    /// Successful nodes before and after removal against CH probability.
    Fig5,
    /// Failing node and CH percentages against CH probability, per threshold.
    Fig6,
    /// Robustness against per-node failure probability.
    Fig7,
}

impl Figure {
    pub const ALL: [Figure; 5] = [Figure::Fig3, Figure::Fig4, Figure::Fig5, Figure::Fig6, Figure::Fig7];

    pub fn name(self) -> &'static str {
        match self {
            Figure::Fig3 => "fig3",
            Figure::Fig4 => "fig4",
            Figure::Fig5 => "fig5",
            Figure::Fig6 => "fig6",
            Figure::Fig7 => "fig7",
        }
    }

    fn axis(self) -> Axis {
        match self {
            Figure::Fig3 => Axis::NNodes,
            Figure::Fig7 => Axis::FailureQ,
            _ => Axis::ChProbability,
        }
    }

    fn default_values(self) -> Vec<f64> {
        match self {
            Figure::Fig3 => vec![50.0, 100.0, 150.0],
            Figure::Fig7 => vec![0.0, 0.2, 0.4, 0.6, 0.8],
            _ => (1..=9).map(|i| f64::from(i) / 10.0).collect(),
        }
    }

    fn default_engines(self) -> Vec<Engine> {
        use Engine::*;
        match self {
            Figure::Fig3 => vec![Simulation, AnalyticExact, AnalyticApprox],
            Figure::Fig4 => vec![Simulation, AnalyticApprox, MeanDegree],
            Figure::Fig5 => vec![Simulation, AnalyticExact],
            Figure::Fig6 => vec![Simulation],
            Figure::Fig7 => vec![Simulation, AnalyticApprox],
        }
    }

    /// `(n_nodes, p_threshold_dbm)` per series; `None` keeps the base value.
    fn series(self) -> Vec<(Option<usize>, Option<f64>)> {
        match self {
            Figure::Fig4 => [50, 100, 150]
                .into_iter()
                .flat_map(|n| [-111.0, -141.0].map(|t| (Some(n), Some(t))))
                .collect(),
            Figure::Fig6 => vec![(None, Some(-111.0)), (None, Some(-141.0))],
            _ => vec![(None, None)],
        }
    }
}

impl FromStr for Figure {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        Figure::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| CliError::Usage(format!("unknown figure `{s}` (expected fig3..fig7)")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FigureOverrides {
    pub base: NetworkConfig,
    pub master_seed: u64,
    pub iterations: usize,
    pub engines: Option<Vec<Engine>>,
    pub values: Option<Vec<f64>>,
    pub post_mode: PostMode,
    pub counts: CountMode,
}

impl Default for FigureOverrides {
    fn default() -> Self {
        FigureOverrides {
            base: NetworkConfig::reference(),
            master_seed: DEFAULT_SEED,
            iterations: DEFAULT_ITERATIONS,
            engines: None,
            values: None,
            post_mode: PostMode::Reassociate,
            counts: CountMode::Floored,
        }
    }
}

/// Runs every series of a figure and concatenates the rows in series order.
pub fn run_figure(name: &str, overrides: &FigureOverrides) -> Result<SweepResult, CliError> {
    let figure: Figure = name.parse()?;
    let mut result = SweepResult::default();
    for (n_nodes, p_th) in figure.series() {
        let mut base = overrides.base.clone();
        if let Some(n) = n_nodes {
            base = base.with_n_nodes(n)?;
        }
        if let Some(t) = p_th {
            base = base.with_threshold_dbm(t)?;
        }
        let mut plan = SweepPlan::new(
            figure.axis(),
            overrides.values.clone().unwrap_or_else(|| figure.default_values()),
            overrides.engines.clone().unwrap_or_else(|| figure.default_engines()),
            base,
        );
        plan.iterations = overrides.iterations;
        plan.master_seed = overrides.master_seed;
        plan.post_mode = overrides.post_mode;
        plan.counts = overrides.counts;
        result.rows.extend(run_sweep(&plan)?.rows);
    }
    Ok(result)
}
