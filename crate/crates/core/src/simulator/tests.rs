use super::*;
use crate::analytic::{robustness, AnalyticMode, AnalyticSettings};
use crate::model::RawConfig;
use proptest::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn config(n: usize, p: f64, p_th_dbm: f64) -> NetworkConfig {
    NetworkConfig::reference()
        .with_n_nodes(n)
        .unwrap()
        .with_ch_probability(p)
        .unwrap()
        .with_threshold_dbm(p_th_dbm)
        .unwrap()
}

/// Links fail often enough that every success rule matters.
fn lossy() -> NetworkConfig {
    RawConfig {
        n_nodes: 20,
        ch_probability: 0.3,
        grid_half_width: None,
        node_density: Some(1.0),
        p_tx_node_dbm: 40.0,
        p_tx_bs_dbm: 46.0,
        p_threshold_dbm: 35.0,
        path_loss_exponent: 3.0,
    }
    .validate()
    .unwrap()
}

fn perfect(n: usize) -> NetworkConfig {
    config(n, 0.3, -400.0)
}

fn dead(n: usize) -> NetworkConfig {
    config(n, 0.3, 400.0)
}

#[test]
fn election_extremes() {
    let all = sample_realization(&config(30, 1.0, -111.0), 1, 0);
    assert!(all.roles.iter().all(|r| *r == Role::ClusterHead));
    assert!(all.members.is_empty() && all.gains_nch_ch.is_empty());
    let none = sample_realization(&config(30, 0.0, -111.0), 1, 0);
    assert!(none.roles.iter().all(|r| *r == Role::Member));
    assert!(none.heads.is_empty());
}

#[test]
fn realization_invariants_and_reproducibility() {
    let cfg = lossy();
    for index in 0..50 {
        let r = sample_realization(&cfg, 9, index);
        assert_eq!(r, sample_realization(&cfg, 9, index));
        assert_eq!(r.n_nodes(), cfg.n_nodes);
        let a = cfg.grid_half_width;
        assert!(r.positions.iter().all(|p| p.x.abs() <= a && p.y.abs() <= a));
        assert_eq!(r.gains_nch_ch.len(), r.heads.len() * r.members.len());
        assert!(r.gains_nch_ch.iter().chain(&r.gains_bs_ch).chain(&r.gains_bs_nch).all(|g| *g > 0.0));
        let rebuilt = Realization::from_parts(
            r.positions.clone(),
            r.roles.clone(),
            r.gains_nch_ch.clone(),
            r.gains_bs_ch.clone(),
            r.gains_bs_nch.clone(),
        )
        .unwrap();
        assert_eq!((rebuilt.heads, rebuilt.members), (r.heads.clone(), r.members.clone()));
    }
    assert_ne!(sample_realization(&cfg, 9, 0), sample_realization(&cfg, 9, 1));
    assert_ne!(sample_realization(&cfg, 9, 0), sample_realization(&cfg, 10, 0));
}

#[test]
fn gain_means_are_one() {
    let cfg = config(4, 0.5, -111.0);
    let n = 100_000;
    let (mut bs, mut pair, mut pairs) = (0.0, 0.0, 0usize);
    for index in 0..n {
        let r = sample_realization(&cfg, 3, index);
        bs += r.gains_bs_ch.iter().chain(&r.gains_bs_nch).next().unwrap();
        if let Some(h) = r.gains_nch_ch.first() {
            pair += h;
            pairs += 1;
        }
    }
    let bs_mean = bs / n as f64;
    assert!((bs_mean - 1.0).abs() <= 4.0 / (n as f64).sqrt(), "{bs_mean}");
    let pair_mean = pair / pairs as f64;
    assert!((pair_mean - 1.0).abs() <= 4.0 / (pairs as f64).sqrt(), "{pair_mean}");
}

#[test]
fn election_matches_binomial_by_chi_square() {
    let cfg = config(20, 0.3, -111.0);
    let runs = 20_000;
    let mut observed = vec![0.0; cfg.n_nodes + 1];
    for index in 0..runs {
        observed[sample_realization(&cfg, 17, index).heads.len()] += 1.0;
    }
    // Pool tail bins until every expected count is at least 5.
    let expected: Vec<f64> = (0..=cfg.n_nodes)
        .map(|k| runs as f64 * crate::analytic::binom_pmf(k, cfg.n_nodes, cfg.ch_probability).unwrap())
        .collect();
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let mut acc = (0.0, 0.0);
    for (o, e) in observed.iter().zip(&expected) {
        acc = (acc.0 + o, acc.1 + e);
        if acc.1 >= 5.0 {
            bins.push(acc);
            acc = (0.0, 0.0);
        }
    }
    if let Some(last) = bins.last_mut() {
        last.0 += acc.0;
        last.1 += acc.1;
    }
    let stat: f64 = bins.iter().map(|(o, e)| (o - e) * (o - e) / e).sum();
    let critical = ChiSquared::new((bins.len() - 1) as f64).unwrap().inverse_cdf(0.99);
    assert!(stat < critical, "chi² = {stat}, critical = {critical}");
}

#[test]
fn success_set_extremes() {
    for index in 0..10 {
        let r = sample_realization(&perfect(25), 5, index);
        let mut alive = vec![true; 25];
        assert_eq!(success_set(&r, &perfect(25), &alive).unwrap(), (0..25).collect::<Vec<_>>());
        alive[3] = false;
        alive[11] = false;
        let expect: Vec<usize> = (0..25).filter(|i| alive[*i]).collect();
        assert_eq!(success_set(&r, &perfect(25), &alive).unwrap(), expect);
        let r = sample_realization(&dead(25), 5, index);
        assert!(success_set(&r, &dead(25), &vec![true; 25]).unwrap().is_empty());
    }
}

#[test]
fn crafted_three_node_realization() {
    let cfg = config(3, 0.3, -111.0);
    let pw = cfg.linear_powers();
    let head = Position::new(1.0, 0.0);
    let relayed = Position::new(2.0, 0.0);
    let isolated = Position::new(-3.0, -3.0);
    // Gains sit a factor 10 on either side of each requirement.
    let good_bs = 10.0 * pw.z_bs(head);
    let good_pair = 10.0 * pw.z_member_to_head(relayed, head);
    let bad_direct_relayed = 0.1 * pw.z_bs(relayed);
    let bad_pair = 0.1 * pw.z_member_to_head(isolated, head);
    let bad_direct_isolated = 0.1 * pw.z_bs(isolated);
    let real = Realization::from_parts(
        vec![head, relayed, isolated],
        vec![Role::ClusterHead, Role::Member, Role::Member],
        vec![good_pair, bad_pair],
        vec![good_bs],
        vec![bad_direct_relayed, bad_direct_isolated],
    )
    .unwrap();
    assert_eq!(success_set(&real, &cfg, &[true, true, true]).unwrap(), vec![0, 1]);
    assert_eq!(success_set(&real, &cfg, &[false, true, true]).unwrap(), Vec::<usize>::new());
    assert_eq!(success_set(&real, &cfg, &[true, false, true]).unwrap(), vec![0]);

    // The relay needs its own BS link as well.
    let mut no_uplink = real.clone();
    no_uplink.gains_bs_ch[0] = 0.1 * pw.z_bs(head);
    assert!(success_set(&no_uplink, &cfg, &[true, true, true]).unwrap().is_empty());
}

#[test]
fn malformed_inputs_are_rejected() {
    let r = sample_realization(&lossy(), 1, 0);
    assert!(success_set(&r, &lossy(), &[true; 3]).is_err());
    assert!(Realization::from_parts(vec![Position::ORIGIN], vec![Role::ClusterHead], vec![], vec![0.0], vec![]).is_err());
    assert!(Realization::from_parts(vec![Position::ORIGIN], vec![Role::Member], vec![], vec![], vec![]).is_err());
    let mut rng = substream(0, Domain::Oracle, 0, 0);
    assert!(apply_disruption(&r, DisruptionPolicy::BernoulliPerNode(1.5), &mut rng).is_err());
    assert!(apply_disruption(&r, DisruptionPolicy::FixedCount(21), &mut rng).is_err());
    assert!(matches!(
        estimate_robustness(&lossy(), DisruptionPolicy::UniformCount, 99, 0, PostMode::Reassociate),
        Err(Error::InvalidParameter { field: "iterations", .. })
    ));
}

#[test]
fn disruption_examples() {
    let r = sample_realization(&lossy(), 1, 0);
    let mut rng = substream(0, Domain::Oracle, 1, 0);
    let none = apply_disruption(&r, DisruptionPolicy::FixedCount(20), &mut rng).unwrap();
    assert!(none.iter().all(|a| !a));
    let all = apply_disruption(&r, DisruptionPolicy::BernoulliPerNode(0.0), &mut rng).unwrap();
    assert!(all.iter().all(|a| *a));
    let gone = apply_disruption(&r, DisruptionPolicy::BernoulliPerNode(1.0), &mut rng).unwrap();
    assert!(gone.iter().all(|a| !a));
    for k in [0, 1, 7, 19] {
        let alive = apply_disruption(&r, DisruptionPolicy::FixedCount(k), &mut rng).unwrap();
        assert_eq!(alive.iter().filter(|a| !**a).count(), k);
    }
}

#[test]
fn uniform_count_mean() {
    let n = 20usize;
    let r = sample_realization(&lossy(), 1, 0);
    let mut rng = substream(0, Domain::Oracle, 2, 0);
    let draws = 100_000;
    let mut sum = 0.0;
    for _ in 0..draws {
        let alive = apply_disruption(&r, DisruptionPolicy::UniformCount, &mut rng).unwrap();
        let k = alive.iter().filter(|a| !**a).count();
        assert!((1..=n).contains(&k));
        sum += k as f64;
    }
    let mean = sum / draws as f64;
    let sd = (((n * n - 1) as f64) / 12.0).sqrt();
    assert!((mean - (n + 1) as f64 / 2.0).abs() <= 4.0 * sd / (draws as f64).sqrt(), "{mean}");
}

#[test]
fn perfect_connectivity_matches_closed_form() {
    for n in [10, 50] {
        let est = estimate_robustness(&perfect(n), DisruptionPolicy::UniformCount, 5000, 21, PostMode::Reassociate)
            .unwrap();
        let closed = (n - 1) as f64 / (2 * n) as f64;
        assert!((est.mean - closed).abs() <= 3.0 * est.std_error, "{n}: {est:?}");
        assert!(est.ci95.0 <= est.mean && est.mean <= est.ci95.1);
        assert!(est.ci95.0 < closed && closed < est.ci95.1, "{est:?}");
        assert_eq!(est.provenance.mode, "uniform-count/reassociate");
        assert_eq!(est.iterations(), 5000);
    }
}

#[test]
fn no_removal_gives_exactly_one() {
    for post_mode in [PostMode::Reassociate, PostMode::FrozenTopology] {
        let est = estimate_robustness(&lossy(), DisruptionPolicy::BernoulliPerNode(0.0), 200, 4, post_mode).unwrap();
        assert_eq!(est.mean, 1.0);
        assert_eq!(est.ci95, (1.0, 1.0));
        assert_eq!(est.std_error, 0.0);
    }
    let est = estimate_robustness(&perfect(15), DisruptionPolicy::BernoulliPerNode(0.0), 100, 4, PostMode::Reassociate)
        .unwrap();
    assert_eq!(est.mean, 1.0);
    assert_eq!(mean_degree_metric(&lossy(), DisruptionPolicy::BernoulliPerNode(0.0), 200, 4).unwrap(), 1.0);
    let fb = failure_breakdown(&lossy(), DisruptionPolicy::BernoulliPerNode(0.0), 200, 4).unwrap();
    assert_eq!((fb.pct_failing_nodes, fb.pct_failing_chs), (0.0, 0.0));
}

#[test]
fn total_removal_fails_everything() {
    let fb = failure_breakdown(&lossy(), DisruptionPolicy::FixedCount(20), 200, 4).unwrap();
    assert_eq!((fb.pct_failing_nodes, fb.pct_failing_chs), (100.0, 100.0));
    let est = estimate_robustness(&lossy(), DisruptionPolicy::FixedCount(20), 200, 4, PostMode::Reassociate).unwrap();
    assert_eq!(est.mean, 0.0);
}

#[test]
fn dead_network_has_no_baseline() {
    let policy = DisruptionPolicy::UniformCount;
    assert_eq!(
        estimate_robustness(&dead(10), policy, 100, 1, PostMode::Reassociate),
        Err(Error::NoSuccessBaseline)
    );
    assert_eq!(failure_breakdown(&dead(10), policy, 100, 1), Err(Error::NoSuccessBaseline));
    assert_eq!(mean_degree_metric(&dead(10), policy, 100, 1), Err(Error::DegenerateDegree));
}

#[test]
fn degree_counts_pairs_twice_and_bs_links_once() {
    let n = 12;
    let cfg = perfect(n);
    let settings = SimSettings::new(DisruptionPolicy::FixedCount(0), 100, 2);
    for index in 0..20 {
        let r = sample_realization(&cfg, 2, index);
        let t = tally_realization(&cfg, &settings, index);
        let pairs = (r.heads.len() * r.members.len()) as u64;
        assert_eq!(t.pre_degree, n as u64 + 2 * pairs);
        assert_eq!(t.pre, n as u32);
        assert_eq!(t.pre_heads as usize, r.heads.len());
    }
}

#[test]
fn frozen_topology_dominates_reassociation() {
    let policy = DisruptionPolicy::UniformCount;
    let settings = SimSettings::new(policy, 400, 8);
    let re = simulate(&lossy(), &settings).unwrap();
    let fr = simulate(&lossy(), &settings.with_post_mode(PostMode::FrozenTopology)).unwrap();
    for (a, b) in re.tallies().iter().zip(fr.tallies()) {
        assert_eq!(a.pre, b.pre);
        assert!(a.post <= b.post);
    }
    assert_eq!(fr.robustness().unwrap().provenance.mode, "uniform-count/frozen");
}

#[test]
fn lossy_simulation_agrees_with_exact_analysis() {
    let cfg = lossy();
    let sim = estimate_robustness(&cfg, DisruptionPolicy::UniformCount, 20_000, 31, PostMode::Reassociate).unwrap();
    let exact = robustness(&cfg, AnalyticMode::EXACT, &AnalyticSettings::default()).unwrap().estimate;
    let combined = (sim.std_error.powi(2) + exact.std_error.powi(2)).sqrt();
    assert!((sim.mean - exact.mean).abs() <= 0.05f64.max(4.0 * combined), "{sim:?} vs {exact:?}");
}

#[test]
fn bernoulli_robustness_is_non_increasing_in_q() {
    let qs = [0.0, 0.2, 0.4, 0.6, 0.8];
    let est: Vec<RobustnessEstimate> = qs
        .iter()
        .map(|&q| {
            estimate_robustness(&lossy(), DisruptionPolicy::BernoulliPerNode(q), 2000, 12, PostMode::Reassociate)
                .unwrap()
        })
        .collect();
    for w in est.windows(2) {
        assert!(w[1].mean <= w[0].mean || w[1].ci95.0 <= w[0].ci95.1, "{w:?}");
    }
    assert!(est[4].mean < est[0].mean);
}

#[test]
fn estimates_ignore_pool_size() {
    let settings = SimSettings::new(DisruptionPolicy::UniformCount, 300, 77);
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let sim = simulate(&lossy(), &settings).unwrap();
            (sim.robustness().unwrap(), sim.degree_ratio().unwrap(), sim.failure_breakdown().unwrap())
        })
    };
    let one = run(1);
    assert_eq!(one, run(3));
    assert_eq!(one, run(1));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn survivors_only_lose_links(seed in any::<u64>(), index in 0u64..1000, mask in proptest::collection::vec(any::<bool>(), 20)) {
        let cfg = lossy();
        let r = sample_realization(&cfg, seed, index);
        let before = success_set(&r, &cfg, &[true; 20]).unwrap();
        let after = success_set(&r, &cfg, &mask).unwrap();
        for i in &after {
            prop_assert!(mask[*i]);
            prop_assert!(before.contains(i));
        }
    }

    #[test]
    fn estimates_lie_in_unit_interval(seed in any::<u64>(), q in 0.0f64..=1.0) {
        let sim = simulate(&lossy(), &SimSettings::new(DisruptionPolicy::BernoulliPerNode(q), 100, seed)).unwrap();
        for t in sim.tallies() {
            prop_assert!(t.post <= t.pre && t.post_heads <= t.pre_heads && t.post_degree <= t.pre_degree);
        }
        if let Ok(est) = sim.robustness() {
            prop_assert!((0.0..=1.0).contains(&est.mean));
            prop_assert!(est.ci95.0 <= est.mean && est.mean <= est.ci95.1);
        }
        let fb = sim.failure_breakdown().unwrap();
        prop_assert!(fb.pct_failing_nodes >= 0.0 && fb.pct_failing_chs >= 0.0);
    }
}

#[test]
fn bernoulli_simulation_agrees_with_bernoulli_chain() {
    let cfg = lossy();
    let q = 0.3;
    let sim =
        estimate_robustness(&cfg, DisruptionPolicy::BernoulliPerNode(q), 20_000, 32, PostMode::Reassociate).unwrap();
    let settings = AnalyticSettings {
        removal: crate::analytic::RemovalLaw::Bernoulli(q),
        ..AnalyticSettings::default()
    };
    let exact = robustness(&cfg, AnalyticMode::EXACT, &settings).unwrap().estimate;
    assert!(exact.provenance.mode.ends_with("bernoulli-q0.3"));
    assert!((sim.mean - exact.mean).abs() <= 0.05, "{sim:?} vs {exact:?}");
}
