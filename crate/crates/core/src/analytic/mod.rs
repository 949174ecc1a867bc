//! Analytic robustness: the ratio of expected post-disruption successes `L3`
//! to the expected undisrupted successes `N_ESPA`.
//!
//! The mean NCH failure probability is either estimated exactly by Monte
//! Carlo over all node positions for every CH count, or approximated by
//! factorizing the position expectation into one 4D relay integral raised to
//! the CH count times one 2D direct-link integral. The approximated mode also
//! replaces the binomial average over CH counts by a single evaluation at
//! `⌊Np⌋`, which drops one loop and makes it `O(N²)` against `O(N³)`.

pub mod chain;

use std::fmt;

use crate::error::{Error, Result};
use crate::estimate::{Engine, Provenance, RobustnessEstimate};
use crate::integrate::{
    integrate_mean_2d, integrate_mean_4d, mc_mean, position_at, McIntegrationResult, QuadratureSpec, DEFAULT_ORDER_2D,
    DEFAULT_ORDER_4D,
};
use crate::linkprob::p_relay_pair_fails;
use crate::model::{floor_count, NetworkConfig};
use crate::streams::derive_seed;

pub use chain::{binom_pmf, l0, l1, l2, p_fch, r_range, Chain, FnchCoupling, RemovalLaw, SuccessProbabilities};

/// How the mean NCH failure probability is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FnchMethod {
    /// Joint position expectation by Monte Carlo, one estimate per CH count.
    ExactMc,
    /// Factorized expectation by quadrature, evaluated at the expected CH count.
    Approximated,
}

/// How expected CH and NCH counts enter `N_ESPA` and the approximated `L3`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CountMode {
    /// `⌊Np⌋` and `⌊N(1−p)⌋`.
    #[default]
    Floored,
    /// `Np` and `N(1−p)`; integer-indexed quantities are interpolated linearly.
    Smooth,
}

impl CountMode {
    pub fn tag(self) -> &'static str {
        match self {
            CountMode::Floored => "floored",
            CountMode::Smooth => "smooth",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AnalyticMode {
    pub method: FnchMethod,
    pub counts: CountMode,
}

impl AnalyticMode {
    pub const EXACT: AnalyticMode = AnalyticMode {
        method: FnchMethod::ExactMc,
        counts: CountMode::Floored,
    };
    pub const APPROX: AnalyticMode = AnalyticMode {
        method: FnchMethod::Approximated,
        counts: CountMode::Floored,
    };

    pub fn with_counts(self, counts: CountMode) -> Self {
        AnalyticMode { counts, ..self }
    }

    pub fn engine(&self) -> Engine {
        match self.method {
            FnchMethod::ExactMc => Engine::AnalyticExact,
            FnchMethod::Approximated => Engine::AnalyticApprox,
        }
    }
}

/// Numerical settings for the analytic engine.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticSettings {
    pub order_2d: usize,
    pub order_4d: usize,
    /// Position samples per CH count in exact mode.
    pub mc_samples: usize,
    pub seed: u64,
    pub coupling: FnchCoupling,
    pub removal: RemovalLaw,
}

impl Default for AnalyticSettings {
    fn default() -> Self {
        AnalyticSettings {
            order_2d: DEFAULT_ORDER_2D,
            order_4d: DEFAULT_ORDER_4D,
            mc_samples: 4096,
            seed: 0x5eed,
            coupling: FnchCoupling::Frozen,
            removal: RemovalLaw::UniformCount,
        }
    }
}

/// Intermediate quantities of one analytic evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DisruptionChainTerms {
    /// NCH failure probability at the expected CH count.
    pub p_fnch: f64,
    pub p_sch: f64,
    pub n_espa: f64,
    pub l3: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticResult {
    pub estimate: RobustnessEstimate,
    pub terms: DisruptionChainTerms,
}

fn quadrature(config: &NetworkConfig, order: usize) -> Result<QuadratureSpec> {
    QuadratureSpec::new(order, config.grid_half_width)
}

/// Mean NCH failure probability with `n_ch` CHs, by Monte Carlo over the
/// joint positions of the NCH and every CH (dimension `2(n_ch + 1)`).
/// Each CH count draws from its own substream of `seed`.
pub fn p_fnch_exact(config: &NetworkConfig, n_ch: usize, samples: usize, seed: u64) -> Result<McIntegrationResult> {
    if n_ch > config.n_nodes {
        return Err(Error::invalid("n_ch", format!("CH count {n_ch} exceeds node count {}", config.n_nodes)));
    }
    let pw = config.linear_powers();
    let dim = 2 * (n_ch + 1);
    let mut result = mc_mean(
        |point| {
            let r_j = position_at(point, 0);
            let no_relay: f64 = (1..=n_ch).map(|i| p_relay_pair_fails(r_j, position_at(point, i), &pw)).product();
            no_relay * -(-pw.z_bs(r_j)).exp_m1()
        },
        dim,
        config.grid_half_width,
        samples,
        derive_seed(seed, n_ch as u64),
    )?;
    result.seed = seed;
    Ok(result)
}

/// The two position integrals of the factorized failure probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApproxIntegrals {
    /// Mean over `(r_j, r_i)` of `1 − e^{−(z₁+z₂)}`.
    pub relay_fail: f64,
    /// Mean over `r_j` of `1 − e^{−z_DBS}`.
    pub direct_fail: f64,
}

impl ApproxIntegrals {
    pub fn compute(config: &NetworkConfig, order_2d: usize, order_4d: usize) -> Result<Self> {
        let pw = config.linear_powers();
        let relay_fail = integrate_mean_4d(|r_j, r_i| p_relay_pair_fails(r_j, r_i, &pw), &quadrature(config, order_4d)?)?;
        let direct_fail = integrate_mean_2d(|r_j| -(-pw.z_bs(r_j)).exp_m1(), &quadrature(config, order_2d)?)?;
        Ok(ApproxIntegrals { relay_fail, direct_fail })
    }

    /// Factorized failure probability; `n_ch` may be fractional in smooth mode.
    pub fn p_fnch(&self, n_ch: f64) -> f64 {
        self.relay_fail.powf(n_ch) * self.direct_fail
    }
}

/// Factorized mean NCH failure probability with `n_ch` CHs.
pub fn p_fnch_approx(config: &NetworkConfig, n_ch: usize, settings: &AnalyticSettings) -> Result<f64> {
    if n_ch > config.n_nodes {
        return Err(Error::invalid("n_ch", format!("CH count {n_ch} exceeds node count {}", config.n_nodes)));
    }
    Ok(ApproxIntegrals::compute(config, settings.order_2d, settings.order_4d)?.p_fnch(n_ch as f64))
}

/// Mean probability that a uniformly placed CH hears the base station.
pub fn p_sch(config: &NetworkConfig, order_2d: usize) -> Result<f64> {
    let pw = config.linear_powers();
    // Integrate the small complement so weight rounding does not swamp it.
    let miss = integrate_mean_2d(|r_i| -(-pw.z_bs(r_i)).exp_m1(), &quadrature(config, order_2d)?)?;
    Ok(1.0 - miss)
}

/// Expected undisrupted successful nodes.
pub fn n_espa(config: &NetworkConfig, mode: AnalyticMode, settings: &AnalyticSettings) -> Result<f64> {
    Ok(Evaluation::run(config, mode, settings)?.n_espa)
}

/// Expected successful nodes after a uniform-count random removal.
pub fn l3(config: &NetworkConfig, mode: AnalyticMode, settings: &AnalyticSettings) -> Result<f64> {
    Ok(Evaluation::run(config, mode, settings)?.l3)
}

/// `R_N = L3 / N_ESPA`, with the chain terms that produced it.
pub fn robustness(config: &NetworkConfig, mode: AnalyticMode, settings: &AnalyticSettings) -> Result<AnalyticResult> {
    let eval = Evaluation::run(config, mode, settings)?;
    if !(eval.n_espa > 0.0) {
        return Err(Error::NoSuccessBaseline);
    }
    let mean = eval.l3 / eval.n_espa;
    let std_error = eval.ratio_std_error();
    let half = 1.959_963_984_540_054 * std_error;
    let mut label = mode.counts.tag().to_string();
    if settings.coupling == FnchCoupling::Rescaled {
        label.push_str("/rescaled");
    }
    if let RemovalLaw::Bernoulli(q) = settings.removal {
        label.push_str(&format!("/bernoulli-q{q}"));
    }
    let provenance = Provenance {
        engine: mode.engine(),
        mode: label,
        alpha: config.path_loss_exponent,
        seed: settings.seed,
        iterations: match mode.method {
            FnchMethod::ExactMc => settings.mc_samples,
            FnchMethod::Approximated => 0,
        },
    };
    Ok(AnalyticResult {
        estimate: RobustnessEstimate {
            mean,
            std_error,
            ci95: (mean - half, mean + half),
            provenance,
        },
        terms: DisruptionChainTerms {
            p_fnch: eval.espa_p_fnch,
            p_sch: eval.p_sch,
            n_espa: eval.n_espa,
            l3: eval.l3,
        },
    })
}

/// Linear interpolation weights for a real-valued count: `(lower index, upper weight)`.
fn interpolation(x: f64, max: usize) -> (usize, f64) {
    let lower = floor_count(x).min(max);
    let t = (x - lower as f64).clamp(0.0, 1.0);
    if lower == max || t < 1e-9 {
        (lower, 0.0)
    } else {
        (lower, t)
    }
}

/// Everything one analytic evaluation needs, computed once.
struct Evaluation {
    n_espa: f64,
    l3: f64,
    p_sch: f64,
    espa_p_fnch: f64,
    /// Monte Carlo standard error per CH count (exact mode only).
    table_se: Vec<f64>,
    /// `∂L3/∂p_fnch[m]`.
    l3_grad: Vec<f64>,
    /// `∂N_ESPA/∂p_fnch[m]`.
    espa_grad: Vec<f64>,
}

impl Evaluation {
    fn run(config: &NetworkConfig, mode: AnalyticMode, settings: &AnalyticSettings) -> Result<Self> {
        let config = config.validate()?;
        let n = config.n_nodes;
        let p = config.ch_probability;
        let p_sch = p_sch(&config, settings.order_2d)?;

        let (expected_heads, expected_members) = match mode.counts {
            CountMode::Floored => (config.floored_ch_count() as f64, config.floored_member_count() as f64),
            CountMode::Smooth => (n as f64 * p, n as f64 * (1.0 - p)),
        };
        let (espa_lower, espa_t) = interpolation(expected_heads, n);

        let mut table = vec![0.0; n + 1];
        let mut table_se = vec![0.0; n + 1];
        let approx = match mode.method {
            FnchMethod::Approximated => {
                let integrals = ApproxIntegrals::compute(&config, settings.order_2d, settings.order_4d)?;
                for (m, v) in table.iter_mut().enumerate() {
                    *v = integrals.p_fnch(m as f64);
                }
                Some(integrals)
            }
            FnchMethod::ExactMc => {
                for m in exact_counts_needed(n, p, settings.coupling, espa_lower, espa_t) {
                    let r = p_fnch_exact(&config, m, settings.mc_samples, settings.seed)?;
                    table[m] = r.estimate;
                    table_se[m] = r.std_error;
                }
                None
            }
        };

        let mut espa_grad = vec![0.0; n + 1];
        let espa_p_fnch = match approx {
            Some(integrals) => integrals.p_fnch(expected_heads),
            None => {
                espa_grad[espa_lower] -= expected_members * (1.0 - espa_t);
                if espa_t > 0.0 {
                    espa_grad[espa_lower + 1] -= expected_members * espa_t;
                    (1.0 - espa_t) * table[espa_lower] + espa_t * table[espa_lower + 1]
                } else {
                    table[espa_lower]
                }
            }
        };
        let n_espa = expected_members * (1.0 - espa_p_fnch) + expected_heads * p_sch;

        let chain = Chain::new(n, p_sch, &table, settings.coupling)?.with_removal(settings.removal)?;
        let mut l3_grad = vec![0.0; n + 1];
        let l3 = match mode.method {
            FnchMethod::ExactMc => chain.l3(p, Some(&mut l3_grad))?,
            FnchMethod::Approximated => {
                let (lower, t) = match mode.counts {
                    CountMode::Floored => (config.floored_ch_count(), 0.0),
                    CountMode::Smooth => (espa_lower, espa_t),
                };
                let mut value = (1.0 - t) * chain.l2(lower, None);
                if t > 0.0 {
                    value += t * chain.l2(lower + 1, None);
                }
                value
            }
        };

        Ok(Evaluation {
            n_espa,
            l3,
            p_sch,
            espa_p_fnch,
            table_se,
            l3_grad,
            espa_grad,
        })
    }

    /// Delta-method standard error of `L3 / N_ESPA` from the per-CH-count
    /// Monte Carlo errors. Zero for the quadrature-only mode.
    fn ratio_std_error(&self) -> f64 {
        if !(self.n_espa > 0.0) {
            return 0.0;
        }
        let d = self.n_espa;
        let var: f64 = self
            .table_se
            .iter()
            .zip(self.l3_grad.iter().zip(&self.espa_grad))
            .map(|(se, (gl, ge))| {
                let dr = gl / d - self.l3 * ge / (d * d);
                dr * dr * se * se
            })
            .sum();
        var.sqrt()
    }
}

/// CH counts whose exact failure probability affects the result.
fn exact_counts_needed(n: usize, p: f64, coupling: FnchCoupling, espa_lower: usize, espa_t: f64) -> Vec<usize> {
    let mut needed = vec![false; n + 1];
    for (m, slot) in needed.iter_mut().enumerate() {
        *slot = binom_pmf(m, n, p).map(|w| w > 0.0).unwrap_or(false);
    }
    if coupling == FnchCoupling::Rescaled {
        if let Some(top) = needed.iter().rposition(|x| *x) {
            needed[..=top].iter_mut().for_each(|x| *x = true);
        }
    }
    needed[espa_lower] = true;
    if espa_t > 0.0 {
        needed[espa_lower + 1] = true;
    }
    needed.iter().enumerate().filter(|(_, x)| **x).map(|(m, _)| m).collect()
}

impl fmt::Display for AnalyticMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.engine(), self.counts.tag())
    }
}
