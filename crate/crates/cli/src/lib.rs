//! Sweeps, figure data and the validation suite behind the `trlab` binary.

pub mod csv;
pub mod figures;
pub mod validate;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use temporal_robustness::analytic::{robustness, AnalyticMode, AnalyticSettings, CountMode, RemovalLaw};
use temporal_robustness::simulator::{simulate, DisruptionPolicy, PostMode, SimSettings, Simulation};
use temporal_robustness::{Engine, Error as CoreError, NetworkConfig, RobustnessEstimate};

pub use csv::{format_float, HEADER};
pub use figures::{run_figure, Figure, FigureOverrides};
pub use validate::{run_validate, Level, ValidationReport};

/// Environment variable holding the default scenario path.
pub const CONFIG_ENV: &str = "TRLAB_CONFIG";
pub const DEFAULT_ITERATIONS: usize = 10_000;
pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("{0}")]
    Invalid(#[from] CoreError),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Invalid(_) | CliError::Validation(_) => 3,
            CliError::Numeric(_) | CliError::Io(_) => 4,
        }
    }
}

/// Reads a scenario file. `None` gives the reference scenario.
pub fn load_config(path: Option<&Path>) -> Result<NetworkConfig, CliError> {
    match path {
        None => Ok(NetworkConfig::reference()),
        Some(p) => {
            let text = std::fs::read_to_string(p)?;
            Ok(text.parse::<NetworkConfig>()?)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    ChProbability,
    NNodes,
    PThresholdDbm,
    FailureQ,
}

impl Axis {
    pub const ALL: [Axis; 4] = [Axis::ChProbability, Axis::NNodes, Axis::PThresholdDbm, Axis::FailureQ];

    pub fn name(self) -> &'static str {
        match self {
            Axis::ChProbability => "ch_probability",
            Axis::NNodes => "n_nodes",
            Axis::PThresholdDbm => "p_threshold_dbm",
            Axis::FailureQ => "failure_q",
        }
    }
}

impl FromStr for Axis {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        Axis::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| CliError::Usage(format!("unknown axis `{s}`")))
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Parses a comma-separated engine list.
pub fn parse_engines(list: &str) -> Result<Vec<Engine>, CliError> {
    list.split(',')
        .map(|t| Engine::from_tag(t.trim()).ok_or_else(|| CliError::Usage(format!("unknown engine `{}`", t.trim()))))
        .collect()
}

/// Parses a comma-separated list of numbers.
pub fn parse_values(list: &str) -> Result<Vec<f64>, CliError> {
    list.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| CliError::Usage(format!("not a number: `{}`", t.trim()))))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPlan {
    pub axis: Axis,
    pub values: Vec<f64>,
    pub engines: Vec<Engine>,
    pub base: NetworkConfig,
    pub iterations: usize,
    pub master_seed: u64,
    pub post_mode: PostMode,
    pub counts: CountMode,
}

impl SweepPlan {
    pub fn new(axis: Axis, values: Vec<f64>, engines: Vec<Engine>, base: NetworkConfig) -> Self {
        SweepPlan {
            axis,
            values,
            engines,
            base,
            iterations: DEFAULT_ITERATIONS,
            master_seed: DEFAULT_SEED,
            post_mode: PostMode::Reassociate,
            counts: CountMode::Floored,
        }
    }

    /// Values must be non-empty and strictly increasing; every value must
    /// yield a valid scenario.
    pub fn validate(&self) -> Result<(), CliError> {
        if self.values.is_empty() {
            return Err(CliError::Usage("axis values must not be empty".into()));
        }
        if self.engines.is_empty() {
            return Err(CliError::Usage("at least one engine is required".into()));
        }
        if self.values.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(CliError::Usage("axis values must be strictly increasing".into()));
        }
        self.base.validate()?;
        for &v in &self.values {
            self.point(v)?;
        }
        Ok(())
    }

    /// Scenario and removal policy at one axis value.
    fn point(&self, value: f64) -> Result<(NetworkConfig, DisruptionPolicy), CliError> {
        let mut policy = DisruptionPolicy::UniformCount;
        let config = match self.axis {
            Axis::ChProbability => self.base.with_ch_probability(value)?,
            Axis::PThresholdDbm => self.base.with_threshold_dbm(value)?,
            Axis::NNodes => {
                if !(value >= 1.0 && value.fract() == 0.0) {
                    return Err(CliError::Usage(format!("n_nodes values must be positive integers, got {value}")));
                }
                self.base.with_n_nodes(value as usize)?
            }
            Axis::FailureQ => {
                policy = DisruptionPolicy::BernoulliPerNode(value);
                policy.validate(self.base.n_nodes)?;
                self.base.clone()
            }
        };
        Ok((config, policy))
    }
}

/// One CSV row. `None` cells are written empty.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub axis: Axis,
    pub value: f64,
    pub engine: Engine,
    pub robustness: Option<f64>,
    pub std_error: Option<f64>,
    pub ci: Option<(f64, f64)>,
    pub pre_success: Option<f64>,
    pub post_success: Option<f64>,
    pub pct_fail_nodes: Option<f64>,
    pub pct_fail_chs: Option<f64>,
    pub seed: u64,
    pub alpha: f64,
    pub mode: String,
}

impl Row {
    pub fn is_error(&self) -> bool {
        self.mode.starts_with("error:")
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepResult {
    pub rows: Vec<Row>,
}

impl SweepResult {
    pub fn to_csv(&self) -> String {
        csv::render(&self.rows)
    }

    pub fn error_rows(&self) -> usize {
        self.rows.iter().filter(|r| r.is_error()).count()
    }
}

fn error_tag(e: &CoreError) -> &'static str {
    match e {
        CoreError::InvalidParameter { .. } => "invalid-parameter",
        CoreError::NoSuccessBaseline => "no-success-baseline",
        CoreError::DegenerateDegree => "degenerate-degree",
        CoreError::Parse { .. } => "parse",
    }
}

/// Scenario echo appended to every mode cell.
fn scenario_echo(cfg: &NetworkConfig, iterations: usize) -> String {
    format!(
        "iterations={iterations};n_nodes={};p={};p_th_dbm={}",
        cfg.n_nodes,
        format_float(cfg.ch_probability),
        format_float(cfg.p_threshold_dbm)
    )
}

struct PointContext<'a> {
    plan: &'a SweepPlan,
    value: f64,
    config: NetworkConfig,
    policy: DisruptionPolicy,
}

impl PointContext<'_> {
    fn blank(&self, engine: Engine, mode: String) -> Row {
        Row {
            axis: self.plan.axis,
            value: self.value,
            engine,
            robustness: None,
            std_error: None,
            ci: None,
            pre_success: None,
            post_success: None,
            pct_fail_nodes: None,
            pct_fail_chs: None,
            seed: self.plan.master_seed,
            alpha: self.config.path_loss_exponent,
            mode,
        }
    }

    fn error_row(&self, engine: Engine, e: &CoreError) -> Row {
        let iterations = match engine {
            Engine::Simulation | Engine::MeanDegree => self.plan.iterations,
            _ => AnalyticSettings::default().mc_samples,
        };
        self.blank(engine, format!("error:{};{}", error_tag(e), scenario_echo(&self.config, iterations)))
    }

    fn estimate_row(&self, est: &RobustnessEstimate) -> Row {
        let mode = format!("{};{}", est.provenance.mode, scenario_echo(&self.config, est.provenance.iterations));
        let mut row = self.blank(est.provenance.engine, mode);
        row.robustness = Some(est.mean);
        row.std_error = Some(est.std_error);
        row.ci = Some(est.ci95);
        row.seed = est.provenance.seed;
        row.alpha = est.provenance.alpha;
        row
    }

    fn simulation(&self) -> Result<Simulation, CoreError> {
        let settings = SimSettings::new(self.policy, self.plan.iterations, self.plan.master_seed)
            .with_post_mode(self.plan.post_mode);
        simulate(&self.config, &settings)
    }

    fn sim_row(&self, sim: &Simulation) -> Result<Row, CoreError> {
        let mut row = self.estimate_row(&sim.robustness()?);
        let breakdown = sim.failure_breakdown()?;
        row.pre_success = Some(sim.mean_pre_success());
        row.post_success = Some(sim.mean_post_success());
        row.pct_fail_nodes = Some(breakdown.pct_failing_nodes);
        row.pct_fail_chs = Some(breakdown.pct_failing_chs);
        Ok(row)
    }

    fn degree_row(&self, sim: &Simulation) -> Result<Row, CoreError> {
        let ratio = sim.degree_ratio()?;
        let mode = format!("{};{}", self.policy, scenario_echo(&self.config, self.plan.iterations));
        let mut row = self.blank(Engine::MeanDegree, mode);
        row.robustness = Some(ratio);
        Ok(row)
    }

    fn analytic_row(&self, mode: AnalyticMode) -> Result<Row, CoreError> {
        let removal = match self.policy {
            DisruptionPolicy::BernoulliPerNode(q) => RemovalLaw::Bernoulli(q),
            _ => RemovalLaw::UniformCount,
        };
        let settings = AnalyticSettings {
            seed: self.plan.master_seed,
            removal,
            ..AnalyticSettings::default()
        };
        let result = robustness(&self.config, mode.with_counts(self.plan.counts), &settings)?;
        let mut row = self.estimate_row(&result.estimate);
        row.pre_success = Some(result.terms.n_espa);
        row.post_success = Some(result.terms.l3);
        Ok(row)
    }
}

/// Evaluates every engine at every axis value. Rows follow plan order: axis
/// values outer, engines inner. A failing engine yields an error row.
pub fn run_sweep(plan: &SweepPlan) -> Result<SweepResult, CliError> {
    run_sweep_with_progress(plan, |_, _| {})
}

/// As [`run_sweep`], calling `progress(done, total)` after each point.
pub fn run_sweep_with_progress(
    plan: &SweepPlan,
    mut progress: impl FnMut(usize, usize),
) -> Result<SweepResult, CliError> {
    plan.validate()?;
    let mut rows = Vec::with_capacity(plan.values.len() * plan.engines.len());
    for (done, &value) in plan.values.iter().enumerate() {
        let (config, policy) = plan.point(value)?;
        let ctx = PointContext {
            plan,
            value,
            config,
            policy,
        };
        let needs_sim = plan.engines.iter().any(|e| matches!(e, Engine::Simulation | Engine::MeanDegree));
        let sim = if needs_sim { Some(ctx.simulation()) } else { None };
        for &engine in &plan.engines {
            let outcome = match (engine, &sim) {
                (Engine::Simulation, Some(Ok(s))) => ctx.sim_row(s),
                (Engine::MeanDegree, Some(Ok(s))) => ctx.degree_row(s),
                (Engine::Simulation | Engine::MeanDegree, Some(Err(e))) => Err(e.clone()),
                (Engine::AnalyticExact, _) => ctx.analytic_row(AnalyticMode::EXACT),
                (Engine::AnalyticApprox, _) => ctx.analytic_row(AnalyticMode::APPROX),
                (Engine::Simulation | Engine::MeanDegree, None) => unreachable!("simulation runs when requested"),
            };
            rows.push(outcome.unwrap_or_else(|e| ctx.error_row(engine, &e)));
        }
        progress(done + 1, plan.values.len());
    }
    Ok(SweepResult { rows })
}
