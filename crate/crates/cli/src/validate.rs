//! Self-check suite: distribution normalizations, closed-form and
//! brute-force oracles, quadrature refinement and the fading oracle.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::Rng;
use rand_distr::Exp1;

use temporal_robustness::analytic::{
    binom_pmf, p_fch, p_sch, r_range, robustness, AnalyticMode, AnalyticSettings, ApproxIntegrals, Chain, CountMode,
    FnchCoupling,
};
use temporal_robustness::integrate::{DEFAULT_ORDER_2D, DEFAULT_ORDER_4D};
use temporal_robustness::linkprob::p_fbe;
use temporal_robustness::simulator::{simulate, DisruptionPolicy, SimSettings};
use temporal_robustness::streams::{substream, Domain};
use temporal_robustness::{NetworkConfig, Position, RawConfig};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    Fast,
    Full,
}

impl FromStr for Level {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "fast" => Ok(Level::Fast),
            "full" => Ok(Level::Full),
            other => Err(CliError::Usage(format!("unknown validation level `{other}` (expected fast or full)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            let status = if c.passed { "PASS" } else { "FAIL" };
            writeln!(f, "{status} {} ({:.2}s): {}", c.name, c.seconds, c.detail)?;
        }
        let failed = self.checks.iter().filter(|c| !c.passed).count();
        write!(f, "{} checks, {failed} failed", self.checks.len())
    }
}

const SEED: u64 = 0x7a11da7e;

type CheckFn = Box<dyn Fn() -> (bool, String)>;

/// Runs every check of `level` against `config`. All checks run even when
/// earlier ones fail.
pub fn run_validate(level: Level, config: &NetworkConfig) -> Result<ValidationReport, CliError> {
    let config = config.validate()?;
    let mut checks: Vec<(&'static str, CheckFn)> = vec![
        ("binomial-normalization", Box::new(move || binomial_normalization(level))),
        ("hypergeometric-normalization", Box::new(move || hypergeometric_normalization(level))),
        ("perfect-connectivity", Box::new(move || perfect_connectivity(level))),
        ("brute-force-chain", Box::new(move || brute_force_chain(level))),
        ("quadrature-doubling", {
            let cfg = config.clone();
            Box::new(move || quadrature_doubling(&cfg))
        }),
        ("simulation-reproducibility", {
            let cfg = config.clone();
            Box::new(move || reproducibility(&cfg))
        }),
    ];
    if level == Level::Full {
        checks.push(("fading-oracle", Box::new(fading_oracle)));
    }
    let checks = checks
        .into_iter()
        .map(|(name, run)| {
            let start = Instant::now();
            let (passed, detail) = run();
            Check {
                name,
                passed,
                detail,
                seconds: start.elapsed().as_secs_f64(),
            }
        })
        .collect();
    Ok(ValidationReport { checks })
}

fn cases(level: Level, fast: usize, full: usize) -> usize {
    match level {
        Level::Fast => fast,
        Level::Full => full,
    }
}

fn binomial_normalization(level: Level) -> (bool, String) {
    let mut rng = substream(SEED, Domain::Oracle, 1, 0);
    let mut worst = 0.0f64;
    for _ in 0..cases(level, 50, 500) {
        let n = rng.random_range(1..=2000usize);
        let p: f64 = rng.random();
        let total: f64 = (0..=n).map(|m| binom_pmf(m, n, p).unwrap_or(f64::NAN)).sum();
        worst = worst.max((total - 1.0).abs());
    }
    (worst <= 1e-10, format!("max |Σ − 1| = {worst:.2e}"))
}

fn hypergeometric_normalization(level: Level) -> (bool, String) {
    let mut rng = substream(SEED, Domain::Oracle, 2, 0);
    let mut worst = 0.0f64;
    for _ in 0..cases(level, 200, 2000) {
        let n = rng.random_range(1..=2000usize);
        let k = rng.random_range(1..=n);
        let n_ch = rng.random_range(0..=n);
        let total: f64 = match r_range(k, n_ch, n) {
            Ok((lo, hi)) => (lo..=hi).map(|r| p_fch(r, k, n_ch, n).unwrap_or(f64::NAN)).sum(),
            Err(_) => f64::NAN,
        };
        worst = worst.max((total - 1.0).abs());
    }
    (worst <= 1e-10, format!("max |Σ − 1| = {worst:.2e}"))
}

fn perfect_connectivity(level: Level) -> (bool, String) {
    let sizes: &[usize] = match level {
        Level::Fast => &[10, 50],
        Level::Full => &[10, 50, 150],
    };
    let iterations = cases(level, 2000, 10_000);
    let mut pass = true;
    let mut notes = Vec::new();
    for &n in sizes {
        let Ok(cfg) = NetworkConfig::reference().with_n_nodes(n).and_then(|c| c.with_threshold_dbm(-400.0)) else {
            return (false, format!("N={n}: scenario rejected"));
        };
        let closed = (n - 1) as f64 / (2 * n) as f64;
        for mode in [AnalyticMode::EXACT, AnalyticMode::APPROX] {
            let settings = AnalyticSettings::default();
            match robustness(&cfg, mode.with_counts(CountMode::Smooth), &settings) {
                Ok(r) if (r.estimate.mean - closed).abs() <= 1e-9 => {}
                Ok(r) => {
                    pass = false;
                    notes.push(format!("N={n} {}: {} vs {closed}", mode.engine(), r.estimate.mean));
                }
                Err(e) => {
                    pass = false;
                    notes.push(format!("N={n} {}: {e}", mode.engine()));
                }
            }
        }
        match simulate(&cfg, &SimSettings::new(DisruptionPolicy::UniformCount, iterations, SEED))
            .and_then(|s| s.robustness())
        {
            Ok(est) => {
                let z = (est.mean - closed) / est.std_error;
                pass &= z.abs() <= 3.0;
                notes.push(format!("N={n} sim z={z:+.2}"));
            }
            Err(e) => {
                pass = false;
                notes.push(format!("N={n} sim: {e}"));
            }
        }
    }
    (pass, notes.join("; "))
}

fn subsets(n: usize, k: usize) -> impl Iterator<Item = u32> {
    (0u32..1 << n).filter(move |m| m.count_ones() as usize == k)
}

fn brute_force_chain(level: Level) -> (bool, String) {
    let max_n = cases(level, 5, 6);
    let mut rng = substream(SEED, Domain::Oracle, 3, 0);
    let mut worst = 0.0f64;
    for n in 1..=max_n {
        let table: Vec<f64> = (0..=n).map(|_| rng.random::<f64>()).collect();
        let p_sch: f64 = rng.random();
        let p: f64 = rng.random();
        for coupling in [FnchCoupling::Frozen, FnchCoupling::Rescaled] {
            let Ok(chain) = Chain::new(n, p_sch, &table, coupling) else {
                return (false, format!("chain rejected N={n}"));
            };
            let mut l3 = 0.0;
            for heads in 0u32..1 << n {
                let n_ch = heads.count_ones() as usize;
                let mut l2 = 0.0;
                for k in 1..=n {
                    let sets: Vec<u32> = subsets(n, k).collect();
                    let sum: f64 = sets
                        .iter()
                        .map(|&removed| {
                            let alive = !removed & ((1u32 << n) - 1);
                            let alive_heads = (alive & heads).count_ones() as usize;
                            let alive_members = (alive & !heads).count_ones() as f64;
                            let at = if coupling == FnchCoupling::Frozen { n_ch } else { alive_heads };
                            alive_members * (1.0 - table[at]) + alive_heads as f64 * p_sch
                        })
                        .sum();
                    l2 += sum / sets.len() as f64 / n as f64;
                }
                worst = worst.max((chain.l2(n_ch, None) - l2).abs());
                l3 += p.powi(n_ch as i32) * (1.0 - p).powi((n - n_ch) as i32) * l2;
            }
            worst = worst.max((chain.l3(p, None).unwrap_or(f64::NAN) - l3).abs());
        }
    }
    (worst <= 1e-10, format!("N ≤ {max_n}: max |chain − enumeration| = {worst:.2e}"))
}

fn quadrature_doubling(cfg: &NetworkConfig) -> (bool, String) {
    let base = ApproxIntegrals::compute(cfg, DEFAULT_ORDER_2D, DEFAULT_ORDER_4D);
    let fine = ApproxIntegrals::compute(cfg, 2 * DEFAULT_ORDER_2D, 2 * DEFAULT_ORDER_4D);
    let sch = (p_sch(cfg, DEFAULT_ORDER_2D), p_sch(cfg, 2 * DEFAULT_ORDER_2D));
    match (base, fine, sch) {
        (Ok(b), Ok(f), (Ok(s1), Ok(s2))) => {
            let change = (b.relay_fail - f.relay_fail)
                .abs()
                .max((b.direct_fail - f.direct_fail).abs())
                .max((s1 - s2).abs());
            (change <= 1e-6, format!("max change under order doubling {change:.2e}"))
        }
        _ => (false, "quadrature failed".into()),
    }
}

fn reproducibility(cfg: &NetworkConfig) -> (bool, String) {
    let settings = SimSettings::new(DisruptionPolicy::UniformCount, 200, SEED);
    let run = || simulate(cfg, &settings).and_then(|s| s.robustness());
    match (run(), run()) {
        (Ok(a), Ok(b)) => (a == b, format!("two runs: {} and {}", a.mean, b.mean)),
        (Err(e), _) | (_, Err(e)) => (false, e.to_string()),
    }
}

fn random_position<R: Rng>(rng: &mut R, a: f64) -> Position {
    Position::new(rng.random_range(-a..a), rng.random_range(-a..a))
}

/// `p_fbe` against the frequency of relay and direct failures over 10⁶
/// fading draws on random geometries with non-trivial link probabilities.
fn fading_oracle() -> (bool, String) {
    let raw = RawConfig {
        n_nodes: 20,
        ch_probability: 0.3,
        grid_half_width: None,
        node_density: Some(1.0),
        p_tx_node_dbm: 40.0,
        p_tx_bs_dbm: 46.0,
        p_threshold_dbm: 35.0,
        path_loss_exponent: 3.0,
    };
    let Ok(cfg) = raw.validate() else {
        return (false, "oracle scenario rejected".into());
    };
    let pw = cfg.linear_powers();
    let a = cfg.grid_half_width;
    let draws = 1_000_000usize;
    let mut rng = substream(SEED, Domain::Oracle, 4, 0);
    let mut worst_z = 0.0f64;
    for _ in 0..5 {
        let r_j = random_position(&mut rng, a);
        let n_heads = rng.random_range(1..=4usize);
        let heads: Vec<Position> = (0..n_heads).map(|_| random_position(&mut rng, a)).collect();
        let need = |d: f64, power: f64| pw.p_th * d.powf(pw.alpha) / power;
        let mut fails = 0usize;
        for _ in 0..draws {
            let direct = rng.sample::<f64, _>(Exp1) >= need(r_j.norm(), pw.p_b);
            let relayed = heads.iter().any(|r_i| {
                let h = rng.sample::<f64, _>(Exp1) >= need(r_j.distance_to(r_i), pw.p_t);
                let g = rng.sample::<f64, _>(Exp1) >= need(r_i.norm(), pw.p_b);
                h && g
            });
            fails += usize::from(!direct && !relayed);
        }
        let exact = p_fbe(r_j, &heads, &pw);
        let freq = fails as f64 / draws as f64;
        let sigma = (exact * (1.0 - exact) / draws as f64).sqrt().max(1.0 / draws as f64);
        worst_z = worst_z.max((freq - exact).abs() / sigma);
    }
    (worst_z <= 4.0, format!("5 geometries, max |z| = {worst_z:.2}"))
}
