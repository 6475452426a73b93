//! Monte Carlo checks of the simulator against exact laws and bounds.

use rand::Rng;
use statrs::distribution::{Binomial, ChiSquared, ContinuousCDF, Discrete};

use rbb_core::bounds::chernoff_upper;
use rbb_core::coupling::coupled_step;
use rbb_core::harness::{run_experiment, ExperimentKind, ExperimentSpec, StartKind};
use rbb_core::rng::{stream, Purpose};
use rbb_core::tetris::TetrisState;
use rbb_core::{Configuration, Topology, TopologySpec};

#[test]
fn complete_destinations_are_uniform() {
    let n = 16;
    let draws = 1_000_000u64;
    let t = Topology::complete(n).unwrap();
    let mut r = stream(1, 0, Purpose::Sampling);
    let mut counts = vec![0u64; n];
    for _ in 0..draws {
        counts[t.sample(3, &mut r)] += 1;
    }
    let p = 1.0 / n as f64;
    let se = (p * (1.0 - p) / draws as f64).sqrt();
    for (v, &c) in counts.iter().enumerate() {
        let f = c as f64 / draws as f64;
        assert!((f - p).abs() <= 5.0 * se, "bin {v}: {f} vs {p}");
    }
}

#[test]
fn sparse_topologies_stay_on_edges() {
    let mut r = stream(2, 0, Purpose::Sampling);
    for spec in [TopologySpec::Ring, TopologySpec::RandomRegular { degree: 3, seed: 7 }] {
        let t = Topology::new(spec, 20).unwrap();
        for _ in 0..20_000 {
            let u = r.random_range(0..20);
            let v = t.sample(u, &mut r);
            assert!(t.is_neighbour(u, v) && u != v, "{spec}: {u} -> {v}");
        }
    }
}

#[test]
fn simulator_matches_oracle_distributions() {
    for (n, start, rounds) in [
        (2, StartKind::Flat, 3),
        (3, StartKind::Loads(vec![3, 0, 0]), 3),
        (4, StartKind::Flat, 2),
        (3, StartKind::Loads(vec![2, 0, 0]), 4),
    ] {
        let mut spec = ExperimentSpec::new(ExperimentKind::ExactCheck, n)
            .rounds(rounds)
            .trials(200_000)
            .seed(n as u64)
            .start(start.clone());
        if let StartKind::Loads(l) = &start {
            spec = spec.balls(l.iter().map(|&x| x as u64).sum());
        }
        let rep = run_experiment(&spec).unwrap();
        assert!(rep.all_hold(), "n={n} {start:?}: {:?}", rep.failures());
        assert!(rep.comparisons.len() > 4);
    }
}

#[test]
fn tetris_arrivals_under_coupling_are_binomial() {
    let n = 8;
    let k = 6;
    let rounds = 100_000u64;
    let mut rng = stream(3, 0, Purpose::Coupling);
    let mut q = Configuration::uniform_random(n, n as u32, &mut stream(3, 0, Purpose::InitialConfiguration)).unwrap();
    let mut s = TetrisState::from_configuration(&q).unwrap();
    let mut counts = [0u64; 5];
    let mut matched = 0;
    for _ in 0..rounds {
        let (q1, s1, flags) = coupled_step(&q, &s, &mut rng).unwrap();
        matched += flags.coupled as u64;
        counts[(s1.last_arrivals()[0] as usize).min(4)] += 1;
        q = q1;
        s = s1;
    }
    let law = Binomial::new(1.0 / n as f64, k).unwrap();
    let mut expected: Vec<f64> = (0..4).map(|j| law.pmf(j) * rounds as f64).collect();
    expected.push(rounds as f64 - expected.iter().sum::<f64>());
    let chi2: f64 = counts
        .iter()
        .zip(&expected)
        .map(|(&o, &e)| (o as f64 - e).powi(2) / e)
        .sum();
    let critical = ChiSquared::new(4.0).unwrap().inverse_cdf(0.999);
    assert!(chi2 < critical, "chi2 {chi2} >= {critical}; counts {counts:?} vs {expected:?}");
    assert!(matched > rounds / 2, "matched rounds {matched}");
}

#[test]
fn tetris_per_round_mean_and_bound_consistency() {
    let spec = ExperimentSpec::new(ExperimentKind::Tetris, 64).rounds(100_000).trials(1).seed(4);
    let rep = run_experiment(&spec).unwrap();
    let c = rep.comparison("window_mean_delta_0").unwrap();
    assert_eq!(c.reference, 0.75);
    assert!(c.holds, "{c:?}");
    assert!(rep.comparison("per_round_variance").unwrap().holds);
    assert!(rep.comparison("lag1_autocorrelation").unwrap().holds);
    for t in &rep.tails {
        assert!(t.ci_low <= t.frequency && t.frequency <= t.ci_high);
        assert_ne!(t.consistent, Some(false), "{t:?}");
    }
}

#[test]
fn single_ball_cover_is_coupon_collector() {
    let spec = ExperimentSpec::new(ExperimentKind::Cover, 4).balls(1).rounds(10_000).trials(100_000).seed(5);
    let rep = run_experiment(&spec).unwrap();
    let c = rep.comparison("single_ball_cover_vs_coupon_collector").unwrap();
    // 4/3 + 4/2 + 4/1: the start bin is already visited.
    assert!((c.reference - 22.0 / 3.0).abs() < 1e-12);
    assert_eq!((rep.exact["single_ball_cover_mean"].num, rep.exact["single_ball_cover_mean"].den), (22, 3));
    assert!(c.holds, "{c:?}");
}

#[test]
fn coin_flip_tails_respect_chernoff() {
    // 10^4 fair flips = 156 words of 64 bits plus 16 bits.
    let trials = 1_000_000u64;
    let mut r = stream(6, 0, Purpose::Sampling);
    let (mut far, mut near) = (0u64, 0u64);
    for _ in 0..trials {
        let mut x: u32 = (0..156).map(|_| r.random::<u64>().count_ones()).sum();
        x += (r.random::<u64>() & 0xffff).count_ones();
        far += (x >= 6250) as u64;
        near += (x >= 5050) as u64;
    }
    let far_freq = far as f64 / trials as f64;
    let near_freq = near as f64 / trials as f64;
    assert!(far_freq <= chernoff_upper(5000.0, 0.25).unwrap());
    assert!(near_freq <= chernoff_upper(5000.0, 0.01).unwrap());
    // P[X >= 5050] is about 0.16; the bound is far from tight but not vacuous.
    assert!(near_freq > 0.1 && near_freq < 0.2, "{near_freq}");
}

#[test]
fn empty_bins_floor_holds_from_random_starts() {
    let spec = ExperimentSpec::new(ExperimentKind::EmptyBins, 1024)
        .rounds(20_000)
        .trials(10)
        .seed(7)
        .start(StartKind::Random);
    let rep = run_experiment(&spec).unwrap();
    assert!(rep.comparison("empty_below_quarter_rounds").unwrap().holds);
    assert_eq!(rep.tail("empty_below_quarter").unwrap().trials, 200_000);
}
