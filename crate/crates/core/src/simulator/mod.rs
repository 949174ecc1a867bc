//! Monte Carlo engine.
//!
//! Each realization draws node positions, the CH election and every fading
//! gain once. The same gains serve the evaluation before and after node
//! removal, so removal is the only thing that changes between the two counts
//! and a survivor can only lose its link, never gain one.
//!
//! Realization `i` reads its randomness from substreams keyed by
//! `(master seed, i)`. Per-realization tallies are integers and are summed in
//! index order, so every estimate is independent of the rayon pool size.

use std::fmt;

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rand_distr::Exp1;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimate::{Engine, Provenance, RobustnessEstimate};
use crate::linkprob::LinearPowers;
use crate::model::{NetworkConfig, Position, Role};
use crate::streams::{substream, Domain};

/// Smallest accepted realization count for an estimate.
pub const MIN_ITERATIONS: usize = 100;
pub const BOOTSTRAP_RESAMPLES: usize = 1000;

/// How nodes are removed from a realization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DisruptionPolicy {
    /// `K` uniform on `{1..N}`, then a uniform `K`-subset is removed.
    UniformCount,
    /// Each node fails independently with probability `q`.
    BernoulliPerNode(f64),
    /// A uniform subset of exactly `k` nodes is removed.
    FixedCount(usize),
}

impl DisruptionPolicy {
    pub fn validate(&self, n_nodes: usize) -> Result<()> {
        match *self {
            DisruptionPolicy::UniformCount => Ok(()),
            DisruptionPolicy::BernoulliPerNode(q) if (0.0..=1.0).contains(&q) => Ok(()),
            DisruptionPolicy::BernoulliPerNode(q) => {
                Err(Error::invalid("failure_q", format!("must lie in [0, 1], got {q}")))
            }
            DisruptionPolicy::FixedCount(k) if k <= n_nodes => Ok(()),
            DisruptionPolicy::FixedCount(k) => {
                Err(Error::invalid("failure_count", format!("must not exceed N = {n_nodes}, got {k}")))
            }
        }
    }
}

impl fmt::Display for DisruptionPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DisruptionPolicy::UniformCount => f.write_str("uniform-count"),
            DisruptionPolicy::BernoulliPerNode(q) => write!(f, "bernoulli-q{q}"),
            DisruptionPolicy::FixedCount(k) => write!(f, "fixed-k{k}"),
        }
    }
}

/// How survivors are evaluated after removal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PostMode {
    /// NCHs look for a relay among the surviving CHs.
    #[default]
    Reassociate,
    /// A survivor succeeds iff it succeeded before removal.
    FrozenTopology,
}

impl PostMode {
    pub fn tag(self) -> &'static str {
        match self {
            PostMode::Reassociate => "reassociate",
            PostMode::FrozenTopology => "frozen",
        }
    }
}

/// One sampled network: geometry, roles and fading.
///
/// `heads` and `members` list node indices by role in ascending order. Gains
/// of the NCH→CH links are stored row-major, one row per member, one column
/// per head.
#[derive(Debug, Clone, PartialEq)]
pub struct Realization {
    pub positions: Vec<Position>,
    pub roles: Vec<Role>,
    pub heads: Vec<usize>,
    pub members: Vec<usize>,
    /// `h_ji`, `members.len() × heads.len()`.
    pub gains_nch_ch: Vec<f64>,
    /// `g_ib`, one per head.
    pub gains_bs_ch: Vec<f64>,
    /// `k_jb`, one per member.
    pub gains_bs_nch: Vec<f64>,
    pub master_seed: u64,
    pub index: u64,
}

impl Realization {
    /// Assembles a realization from explicit parts, checking shapes and gains.
    pub fn from_parts(
        positions: Vec<Position>,
        roles: Vec<Role>,
        gains_nch_ch: Vec<f64>,
        gains_bs_ch: Vec<f64>,
        gains_bs_nch: Vec<f64>,
    ) -> Result<Self> {
        if positions.len() != roles.len() {
            return Err(Error::invalid("roles", "need one role per position"));
        }
        let (heads, members) = split_roles(&roles);
        if gains_bs_ch.len() != heads.len() {
            return Err(Error::invalid("gains_bs_ch", "need one gain per cluster head"));
        }
        if gains_bs_nch.len() != members.len() {
            return Err(Error::invalid("gains_bs_nch", "need one gain per member"));
        }
        if gains_nch_ch.len() != heads.len() * members.len() {
            return Err(Error::invalid("gains_nch_ch", "need members × heads gains"));
        }
        let all = gains_nch_ch.iter().chain(&gains_bs_ch).chain(&gains_bs_nch);
        if let Some(g) = all.copied().find(|g| !(g.is_finite() && *g > 0.0)) {
            return Err(Error::invalid("gains", format!("must be finite and > 0, got {g}")));
        }
        Ok(Realization {
            positions,
            roles,
            heads,
            members,
            gains_nch_ch,
            gains_bs_ch,
            gains_bs_nch,
            master_seed: 0,
            index: 0,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.positions.len()
    }

    pub fn gain_member_head(&self, member: usize, head: usize) -> f64 {
        self.gains_nch_ch[member * self.heads.len() + head]
    }
}

fn split_roles(roles: &[Role]) -> (Vec<usize>, Vec<usize>) {
    (0..roles.len()).partition(|&i| roles[i].is_cluster_head())
}

/// Draws realization `index` of `master_seed`.
///
/// Draw order: `2N` coordinates, `N` election uniforms, one BS gain per node
/// in node order, then the NCH→CH gains row by row.
pub fn sample_realization(config: &NetworkConfig, master_seed: u64, index: u64) -> Realization {
    let n = config.n_nodes;
    let a = config.grid_half_width;
    let mut rng = substream(master_seed, Domain::Realization, index, 0);

    let positions: Vec<Position> = (0..n)
        .map(|_| {
            let x = a * (2.0 * rng.random::<f64>() - 1.0);
            let y = a * (2.0 * rng.random::<f64>() - 1.0);
            Position::new(x, y)
        })
        .collect();
    let roles: Vec<Role> = (0..n)
        .map(|_| {
            if rng.random::<f64>() < config.ch_probability {
                Role::ClusterHead
            } else {
                Role::Member
            }
        })
        .collect();
    let (heads, members) = split_roles(&roles);

    let mut gains_bs_ch = Vec::with_capacity(heads.len());
    let mut gains_bs_nch = Vec::with_capacity(members.len());
    for role in &roles {
        let g = positive_exp(&mut rng);
        match role {
            Role::ClusterHead => gains_bs_ch.push(g),
            Role::Member => gains_bs_nch.push(g),
        }
    }
    let gains_nch_ch = (0..heads.len() * members.len()).map(|_| positive_exp(&mut rng)).collect();

    Realization {
        positions,
        roles,
        heads,
        members,
        gains_nch_ch,
        gains_bs_ch,
        gains_bs_nch,
        master_seed,
        index,
    }
}

/// Unit-mean exponential draw, redrawn on the measure-zero value 0.
fn positive_exp<R: Rng>(rng: &mut R) -> f64 {
    loop {
        let g: f64 = rng.sample(Exp1);
        if g > 0.0 {
            return g;
        }
    }
}

/// Which links of a realization exist under the given powers.
struct LinkState {
    /// BS→CH link, per head.
    head_up: Vec<bool>,
    /// Direct BS link, per member.
    direct_up: Vec<bool>,
    /// NCH→CH link, row-major as the gains.
    pair_up: Vec<bool>,
}

impl LinkState {
    fn new(real: &Realization, pw: &LinearPowers) -> Self {
        let head_up = real
            .heads
            .iter()
            .zip(&real.gains_bs_ch)
            .map(|(&i, &g)| g >= pw.z_bs(real.positions[i]))
            .collect();
        let direct_up = real
            .members
            .iter()
            .zip(&real.gains_bs_nch)
            .map(|(&j, &k)| k >= pw.z_bs(real.positions[j]))
            .collect();

        // Any gain above the requirement of the longest possible link passes
        // without evaluating the path loss.
        let extent = real.positions.iter().fold(0.0f64, |m, p| m.max(p.x.abs()).max(p.y.abs()));
        let cap = pw.required_gain(2.0 * std::f64::consts::SQRT_2 * extent, pw.p_t);
        let n_heads = real.heads.len();
        let mut pair_up = Vec::with_capacity(real.gains_nch_ch.len());
        for (m, &j) in real.members.iter().enumerate() {
            let row = &real.gains_nch_ch[m * n_heads..(m + 1) * n_heads];
            for (&i, &h) in real.heads.iter().zip(row) {
                pair_up.push(h >= cap || h >= pw.z_member_to_head(real.positions[j], real.positions[i]));
            }
        }
        LinkState {
            head_up,
            direct_up,
            pair_up,
        }
    }

    /// Success flags for every node given the alive mask. Removed nodes fail.
    fn successes(&self, real: &Realization, alive: &[bool]) -> Vec<bool> {
        let mut ok = vec![false; real.n_nodes()];
        for (h, &i) in real.heads.iter().enumerate() {
            ok[i] = alive[i] && self.head_up[h];
        }
        let n_heads = real.heads.len();
        for (m, &j) in real.members.iter().enumerate() {
            if !alive[j] {
                continue;
            }
            ok[j] = self.direct_up[m]
                || real
                    .heads
                    .iter()
                    .enumerate()
                    .any(|(h, &i)| alive[i] && self.head_up[h] && self.pair_up[m * n_heads + h]);
        }
        ok
    }

    /// `Σ_i k_i` over alive nodes: each usable NCH–CH pair counts twice, each
    /// BS link once.
    fn degree_sum(&self, real: &Realization, alive: &[bool]) -> u64 {
        let mut total = 0u64;
        for (h, &i) in real.heads.iter().enumerate() {
            total += u64::from(alive[i] && self.head_up[h]);
        }
        let n_heads = real.heads.len();
        for (m, &j) in real.members.iter().enumerate() {
            if !alive[j] {
                continue;
            }
            total += u64::from(self.direct_up[m]);
            for (h, &i) in real.heads.iter().enumerate() {
                if alive[i] && self.head_up[h] && self.pair_up[m * n_heads + h] {
                    total += 2;
                }
            }
        }
        total
    }
}

/// Nodes of `real` that communicate successfully when only `survivors` are
/// present, with NCHs associating to any surviving CH. `survivors` is an
/// alive mask of length `N`; the result lists node indices in ascending order.
pub fn success_set(real: &Realization, config: &NetworkConfig, survivors: &[bool]) -> Result<Vec<usize>> {
    if survivors.len() != real.n_nodes() {
        return Err(Error::invalid(
            "survivors",
            format!("mask has length {}, realization has {} nodes", survivors.len(), real.n_nodes()),
        ));
    }
    let links = LinkState::new(real, &config.linear_powers());
    let ok = links.successes(real, survivors);
    Ok((0..ok.len()).filter(|&i| ok[i]).collect())
}

/// Draws the set of survivors under `policy`. Returns an alive mask.
pub fn apply_disruption<R: Rng>(real: &Realization, policy: DisruptionPolicy, rng: &mut R) -> Result<Vec<bool>> {
    let n = real.n_nodes();
    policy.validate(n)?;
    Ok(disrupt(n, policy, rng))
}

fn disrupt<R: Rng>(n: usize, policy: DisruptionPolicy, rng: &mut R) -> Vec<bool> {
    let mut alive = vec![true; n];
    let remove_k = |k: usize, rng: &mut R, alive: &mut Vec<bool>| {
        for i in sample_indices(rng, n, k) {
            alive[i] = false;
        }
    };
    match policy {
        DisruptionPolicy::UniformCount => {
            if n > 0 {
                let k = rng.random_range(1..=n);
                remove_k(k, rng, &mut alive);
            }
        }
        DisruptionPolicy::FixedCount(k) => remove_k(k, rng, &mut alive),
        DisruptionPolicy::BernoulliPerNode(q) => {
            for a in alive.iter_mut() {
                *a = !rng.random_bool(q);
            }
        }
    }
    alive
}

/// Inputs of a simulation run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimSettings {
    pub policy: DisruptionPolicy,
    pub iterations: usize,
    pub master_seed: u64,
    pub post_mode: PostMode,
}

impl SimSettings {
    pub fn new(policy: DisruptionPolicy, iterations: usize, master_seed: u64) -> Self {
        SimSettings {
            policy,
            iterations,
            master_seed,
            post_mode: PostMode::Reassociate,
        }
    }

    pub fn with_post_mode(mut self, post_mode: PostMode) -> Self {
        self.post_mode = post_mode;
        self
    }
}

/// Integer counts of one realization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Tally {
    pub pre: u32,
    pub post: u32,
    pub pre_heads: u32,
    pub post_heads: u32,
    pub pre_degree: u64,
    pub post_degree: u64,
}

/// Counts realization `index` of a run.
pub fn tally_realization(config: &NetworkConfig, settings: &SimSettings, index: u64) -> Tally {
    let real = sample_realization(config, settings.master_seed, index);
    let n = real.n_nodes();
    let links = LinkState::new(&real, &config.linear_powers());
    let everyone = vec![true; n];
    let before = links.successes(&real, &everyone);

    let mut rng = substream(settings.master_seed, Domain::Disruption, index, 0);
    let alive = disrupt(n, settings.policy, &mut rng);
    let after = match settings.post_mode {
        PostMode::Reassociate => links.successes(&real, &alive),
        PostMode::FrozenTopology => before.iter().zip(&alive).map(|(&b, &a)| b && a).collect(),
    };

    let count = |flags: &[bool]| flags.iter().filter(|&&f| f).count() as u32;
    let count_heads = |flags: &[bool]| real.heads.iter().filter(|&&i| flags[i]).count() as u32;
    Tally {
        pre: count(&before),
        post: count(&after),
        pre_heads: count_heads(&before),
        post_heads: count_heads(&after),
        pre_degree: links.degree_sum(&real, &everyone),
        post_degree: links.degree_sum(&real, &alive),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FailureBreakdown {
    /// `100·(pre − post)/pre` over all nodes.
    pub pct_failing_nodes: f64,
    /// The same ratio restricted to CH-role nodes; 0 when no CH succeeds before removal.
    pub pct_failing_chs: f64,
}

/// The per-realization tallies of one run plus the settings that made them.
#[derive(Debug, Clone)]
pub struct Simulation {
    config: NetworkConfig,
    settings: SimSettings,
    tallies: Vec<Tally>,
}

/// Runs every realization of a simulation.
pub fn simulate(config: &NetworkConfig, settings: &SimSettings) -> Result<Simulation> {
    let config = config.validate()?;
    settings.policy.validate(config.n_nodes)?;
    if settings.iterations < MIN_ITERATIONS {
        return Err(Error::invalid(
            "iterations",
            format!("must be at least {MIN_ITERATIONS}, got {}", settings.iterations),
        ));
    }
    let tallies: Vec<Tally> = (0..settings.iterations as u64)
        .into_par_iter()
        .map(|i| tally_realization(&config, settings, i))
        .collect();
    Ok(Simulation {
        config,
        settings: *settings,
        tallies,
    })
}

impl Simulation {
    pub fn tallies(&self) -> &[Tally] {
        &self.tallies
    }

    fn sums(&self) -> (u64, u64, u64, u64) {
        self.tallies.iter().fold((0, 0, 0, 0), |(a, b, c, d), t| {
            (
                a + u64::from(t.pre),
                b + u64::from(t.post),
                c + u64::from(t.pre_heads),
                d + u64::from(t.post_heads),
            )
        })
    }

    /// Mean successful nodes per realization before removal.
    pub fn mean_pre_success(&self) -> f64 {
        self.sums().0 as f64 / self.tallies.len() as f64
    }

    pub fn mean_post_success(&self) -> f64 {
        self.sums().1 as f64 / self.tallies.len() as f64
    }

    /// Ratio-of-sums robustness with a delta-method standard error and a
    /// percentile bootstrap interval over realizations.
    pub fn robustness(&self) -> Result<RobustnessEstimate> {
        let (pre, post, _, _) = self.sums();
        if pre == 0 {
            return Err(Error::NoSuccessBaseline);
        }
        let mean = post as f64 / pre as f64;
        let std_error = ratio_std_error(&self.tallies, mean);
        let (lo, hi) = bootstrap_interval(&self.tallies, self.settings.master_seed);
        Ok(RobustnessEstimate {
            mean,
            std_error,
            ci95: (lo.min(mean), hi.max(mean)),
            provenance: Provenance {
                engine: Engine::Simulation,
                mode: format!("{}/{}", self.settings.policy, self.settings.post_mode.tag()),
                alpha: self.config.path_loss_exponent,
                seed: self.settings.master_seed,
                iterations: self.settings.iterations,
            },
        })
    }

    pub fn failure_breakdown(&self) -> Result<FailureBreakdown> {
        let (pre, post, pre_heads, post_heads) = self.sums();
        if pre == 0 {
            return Err(Error::NoSuccessBaseline);
        }
        let pct = |before: u64, after: u64| {
            if before == 0 {
                0.0
            } else {
                100.0 * (before - after) as f64 / before as f64
            }
        };
        Ok(FailureBreakdown {
            pct_failing_nodes: pct(pre, post),
            pct_failing_chs: pct(pre_heads, post_heads),
        })
    }

    /// Mean degree after removal over mean degree before. The `1/N`
    /// normalization and the averaging over realizations cancel.
    pub fn degree_ratio(&self) -> Result<f64> {
        let pre: u64 = self.tallies.iter().map(|t| t.pre_degree).sum();
        let post: u64 = self.tallies.iter().map(|t| t.post_degree).sum();
        if pre == 0 {
            return Err(Error::DegenerateDegree);
        }
        Ok(post as f64 / pre as f64)
    }
}

/// `sqrt(Σ (post − R·pre)² / (n(n−1))) / mean(pre)`.
fn ratio_std_error(tallies: &[Tally], ratio: f64) -> f64 {
    let n = tallies.len() as f64;
    let mean_pre = tallies.iter().map(|t| f64::from(t.pre)).sum::<f64>() / n;
    let ss: f64 = tallies
        .iter()
        .map(|t| {
            let r = f64::from(t.post) - ratio * f64::from(t.pre);
            r * r
        })
        .sum();
    (ss / (n * (n - 1.0))).sqrt() / mean_pre
}

/// 2.5% and 97.5% percentiles of the ratio of sums over realization-level
/// resamples. Resamples with no pre-removal success are skipped.
fn bootstrap_interval(tallies: &[Tally], seed: u64) -> (f64, f64) {
    let n = tallies.len();
    let mut rng = substream(seed, Domain::Bootstrap, n as u64, 0);
    let mut ratios = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
    for _ in 0..BOOTSTRAP_RESAMPLES {
        let (mut pre, mut post) = (0u64, 0u64);
        for _ in 0..n {
            let t = &tallies[rng.random_range(0..n)];
            pre += u64::from(t.pre);
            post += u64::from(t.post);
        }
        if pre > 0 {
            ratios.push(post as f64 / pre as f64);
        }
    }
    if ratios.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    ratios.sort_by(f64::total_cmp);
    let at = |q: f64| ratios[((q * (ratios.len() - 1) as f64).round() as usize).min(ratios.len() - 1)];
    (at(0.025), at(0.975))
}

/// Ratio-of-sums robustness estimate over `iterations` realizations.
pub fn estimate_robustness(
    config: &NetworkConfig,
    policy: DisruptionPolicy,
    iterations: usize,
    master_seed: u64,
    post_mode: PostMode,
) -> Result<RobustnessEstimate> {
    let settings = SimSettings::new(policy, iterations, master_seed).with_post_mode(post_mode);
    simulate(config, &settings)?.robustness()
}

/// Ratio of mean node degrees after and before removal.
pub fn mean_degree_metric(
    config: &NetworkConfig,
    policy: DisruptionPolicy,
    iterations: usize,
    master_seed: u64,
) -> Result<f64> {
    simulate(config, &SimSettings::new(policy, iterations, master_seed))?.degree_ratio()
}

pub fn failure_breakdown(
    config: &NetworkConfig,
    policy: DisruptionPolicy,
    iterations: usize,
    master_seed: u64,
) -> Result<FailureBreakdown> {
    simulate(config, &SimSettings::new(policy, iterations, master_seed))?.failure_breakdown()
}

#[cfg(test)]
mod tests;
