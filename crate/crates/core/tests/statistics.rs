use sln_gbm::estimators::{
    estimate_trace_moments, nontightness_from_samples, tail_share, terminal_samples,
    truncation_level,
};
use sln_gbm::moments::{exact_moments, moment_bounds};
use sln_gbm::noise::noise_law_checks;
use sln_gbm::{run_trajectory, Partition, Scheme, TrajectoryConfig, Workers};

const SEED: u64 = 8_675_309;

#[test]
fn estimates_are_bit_identical_for_1_4_16_workers() {
    let config = TrajectoryConfig::new(3, 0.3, 1e-2, Scheme::Exponential, 3, SEED)
        .with_checkpoints(vec![0.1, 0.3]);
    let runs: Vec<_> = [1, 4, 16]
        .into_iter()
        .map(|k| estimate_trace_moments(&config, 500, Workers::with_count(k)).unwrap())
        .collect();
    assert_eq!(runs[0], runs[1]);
    assert_eq!(runs[0], runs[2]);

    let samples: Vec<_> = [1, 4, 16]
        .into_iter()
        .map(|k| {
            terminal_samples(
                3,
                1.0,
                1e-2,
                Scheme::Euler,
                300,
                SEED,
                Workers::with_count(k),
            )
            .unwrap()
        })
        .collect();
    assert_eq!(samples[0], samples[1]);
    assert_eq!(samples[0], samples[2]);

    let laws: Vec<_> = [1, 4, 16]
        .into_iter()
        .map(|k| noise_law_checks(3, 1e-2, 5_000, SEED, Workers::with_count(k)).unwrap())
        .collect();
    assert_eq!(laws[0], laws[1]);
    assert_eq!(laws[0], laws[2]);
}

#[test]
fn monte_carlo_moments_sit_between_bounds_and_near_exact_values() {
    let taus = [0.5, 1.0, 2.0];
    for n in [2, 3] {
        let config = TrajectoryConfig::new(n, 2.0, 2e-3, Scheme::Exponential, 3, SEED + n as u64)
            .with_checkpoints(taus.to_vec());
        let est = estimate_trace_moments(&config, 4_000, Workers::default()).unwrap();
        assert!(!est.failed());
        for tau in taus {
            for p in 1..=3u32 {
                let exact = exact_moments(n, p, tau).unwrap();
                let (lo, hi) = moment_bounds(n, p, tau).unwrap();
                for lambda in [Partition::single(p), Partition::ones(p)] {
                    let s = est.get(tau, &lambda).unwrap();
                    let target = exact.get(&lambda).unwrap();
                    assert!(s.mean >= lo - 3.0 * s.stderr, "n={n} tau={tau} [{lambda}]");
                    assert!(s.mean <= hi + 3.0 * s.stderr, "n={n} tau={tau} [{lambda}]");
                    assert!(
                        (s.mean - target).abs() <= 3.0 * s.stderr,
                        "n={n} tau={tau} [{lambda}]: {} +- {} vs {target}",
                        s.mean,
                        s.stderr
                    );
                }
            }
        }
    }
}

#[test]
fn euler_scheme_matches_degree_two_moments() {
    let config = TrajectoryConfig::new(3, 1.0, 1e-3, Scheme::Euler, 2, SEED);
    let est = estimate_trace_moments(&config, 5_000, Workers::default()).unwrap();
    let exact = exact_moments(3, 2, 1.0).unwrap();
    for lambda in [Partition::single(2), Partition::ones(2)] {
        let s = est.get(1.0, &lambda).unwrap();
        let target = exact.get(&lambda).unwrap();
        assert!(
            (s.mean - target).abs() <= 3.0 * s.stderr,
            "[{lambda}] {} +- {} vs {target}",
            s.mean,
            s.stderr
        );
    }
}

#[test]
fn euler_determinant_drift_shrinks_like_root_dt() {
    let dts = [4e-3, 2e-3, 1e-3, 5e-4];
    let rms: Vec<f64> = dts
        .iter()
        .map(|&dt| {
            let sq: Vec<f64> = Workers::default().map_indexed(400, |i| {
                let mut config = TrajectoryConfig::new(3, 1.0, dt, Scheme::Euler, 1, SEED);
                config.stream_index = i as u64;
                run_trajectory(&config).unwrap().final_log_det.powi(2)
            });
            (sq.iter().sum::<f64>() / sq.len() as f64).sqrt()
        })
        .collect();
    let xs: Vec<f64> = dts.iter().map(|d| d.ln()).collect();
    let ys: Vec<f64> = rms.iter().map(|r| r.ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / 4.0, ys.iter().sum::<f64>() / 4.0);
    let slope = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (x - mx) * (y - my))
        .sum::<f64>()
        / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    assert!((slope - 0.5).abs() <= 0.15, "slope {slope}, rms {rms:?}");
}

#[test]
fn truncated_samples_never_exceed_level() {
    let samples = terminal_samples(
        3,
        6.0,
        1e-2,
        Scheme::Exponential,
        2_000,
        SEED,
        Workers::default(),
    )
    .unwrap();
    let est = nontightness_from_samples(&samples).unwrap();
    let r_star = truncation_level(3, 6.0);
    assert_eq!(est.r_star, r_star);
    assert!(est.max_retained <= r_star);
    let scale = 3.0 * 6f64.exp();
    for &x in &samples.frobenius_sq {
        let r = x / scale;
        let kept = if r <= r_star { r } else { 0.0 };
        assert!(kept <= r_star);
    }
}

/// The largest 1% of `|F|^2` carry at least a fifth of the second moment.
#[test]
fn heavy_tail_witness() {
    let samples = terminal_samples(
        3,
        2.0,
        1e-2,
        Scheme::Exponential,
        100_000,
        SEED,
        Workers::default(),
    )
    .unwrap();
    assert_eq!(samples.n_diverged, 0);
    let share = tail_share(&samples.frobenius_sq, 0.01);
    assert!(share >= 0.2, "top 1% share {share}");
}
