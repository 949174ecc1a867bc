use std::fmt;

/// Which engine produced a number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Engine {
    Simulation,
    AnalyticExact,
    AnalyticApprox,
    MeanDegree,
}

impl Engine {
    pub fn tag(self) -> &'static str {
        match self {
            Engine::Simulation => "sim",
            Engine::AnalyticExact => "analytic-exact",
            Engine::AnalyticApprox => "analytic-approx",
            Engine::MeanDegree => "mean-degree",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Engine> {
        [Engine::Simulation, Engine::AnalyticExact, Engine::AnalyticApprox, Engine::MeanDegree]
            .into_iter()
            .find(|e| e.tag() == tag)
    }
}

impl fmt::Display for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// Settings that produced an estimate. Every output row echoes these.
#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub engine: Engine,
    /// Engine-specific mode label, e.g. `floored` or `uniform-count/reassociate`.
    pub mode: String,
    pub alpha: f64,
    pub seed: u64,
    /// Realizations for the simulator, position samples for exact analytic
    /// mode, zero for the quadrature-only approximation.
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobustnessEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub ci95: (f64, f64),
    pub provenance: Provenance,
}

impl RobustnessEstimate {
    /// A deterministic value: zero error, degenerate interval.
    pub fn exact(mean: f64, provenance: Provenance) -> Self {
        RobustnessEstimate {
            mean,
            std_error: 0.0,
            ci95: (mean, mean),
            provenance,
        }
    }

    pub fn iterations(&self) -> usize {
        self.provenance.iterations
    }
}
