//! Acceptance suite. Prints one `PASS` / `FAIL` line per criterion.
//!
//! Run with `cargo test --release -p sln-gbm-cli --test acceptance`; pass
//! criterion numbers after `--` to run a subset. The process fails when a
//! criterion outside `KNOWN_FAILING` fails or errors.

use std::time::Instant;

use sln_gbm::estimators::{
    chain_check, estimate_trace_moments, lognormal_from_samples, nontightness_from_samples,
    terminal_samples, weak_errors, weak_order_slope, TerminalSamples,
};
use sln_gbm::moments::{
    exact_moments, linearized_exponent_ratio, moment_bounds, pair_closed_form, pair_eigenvalues,
};
use sln_gbm::noise::noise_law_checks;
use sln_gbm::pde::{decay_integral, solve_backward, terminal_condition, threshold_sigma_star};
use sln_gbm::{run_trajectory, Partition, Scheme, TrajectoryConfig, Workers};
use sln_gbm_cli::{run_experiment, Command, ExperimentSpec};

/// Criteria that fail on converged or exact values; the README has the
/// analysis. They are still run and reported.
const KNOWN_FAILING: [u32; 2] = [7, 8];

const SEED_NOISE: u64 = 3_001;
const SEED_SDE: u64 = 4_001;
const SEED_WEAK: u64 = 4_002;
const SEED_N2: u64 = 5_001;
const SEED_NONTIGHT: u64 = 6_001;
const SEED_TAU10: u64 = 7_001;
const SEED_TAU40: u64 = 6_040;
const SEED_REPRO: u64 = 9_001;

type Outcome = Result<(bool, String), sln_gbm_cli::CliError>;
type Criterion = (u32, &'static str, fn(&mut Shared) -> Outcome);

/// Terminal samples shared between criteria 6 and 7.
#[derive(Default)]
struct Shared {
    tau10: Option<TerminalSamples>,
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn workers() -> Workers {
    Workers::from_env()
}

fn tau10_samples(shared: &mut Shared) -> Result<&TerminalSamples, sln_gbm_cli::CliError> {
    if shared.tau10.is_none() {
        shared.tau10 = Some(terminal_samples(
            3,
            10.0,
            1e-2,
            Scheme::Exponential,
            100_000,
            SEED_TAU10,
            workers(),
        )?);
    }
    Ok(shared.tau10.as_ref().unwrap())
}

fn criterion_1(_: &mut Shared) -> Outcome {
    let mut worst_closed = 0.0f64;
    let mut worst_identity = 0.0f64;
    for n in 2..=5 {
        for tau in [0.0, 0.5, 1.0, 2.0, 5.0] {
            let table = exact_moments(n, 2, tau)?;
            let (sq, tr2) = pair_closed_form(n, tau)?;
            worst_closed = worst_closed
                .max(rel(table.power_of_trace(), sq))
                .max(rel(table.trace_of_power(), tr2));
            let diff = table.power_of_trace() - table.trace_of_power();
            let nf = n as f64;
            worst_identity = worst_identity.max(rel(
                diff,
                nf * (nf - 1.0) * (pair_eigenvalues(n).1 * tau).exp(),
            ));
        }
    }
    let t = exact_moments(3, 2, 1.0)?;
    let (sq, tr2) = (t.power_of_trace(), t.trace_of_power());
    let values_ok = (sq - 93.0964).abs() < 5e-5 && (tr2 - 76.7867).abs() < 5e-5;
    Ok((
        worst_closed <= 1e-10 && worst_identity <= 1e-10 && values_ok,
        format!(
            "closed form rel {worst_closed:.2e}, identity rel {worst_identity:.2e}, n=3 tau=1: {sq:.6} / {tr2:.6}"
        ),
    ))
}

fn criterion_2(_: &mut Shared) -> Outcome {
    let mut worst = f64::NEG_INFINITY;
    let mut where_ = String::new();
    for p in 1..=6 {
        for n in 2..=5 {
            for tau in [0.0, 1.0, 5.0, 10.0] {
                let table = exact_moments(n, p, tau)?;
                let (lo, hi) = moment_bounds(n, p, tau)?;
                for v in [table.trace_of_power(), table.power_of_trace()] {
                    // signed violation in relative units; <= 1e-9 passes
                    let margin = ((lo - v) / lo).max((v - hi) / hi);
                    if margin > worst {
                        worst = margin;
                        where_ = format!("n={n} p={p} tau={tau}");
                    }
                }
            }
        }
    }
    Ok((
        worst <= 1e-9,
        format!("largest relative violation {worst:.3e} at {where_}"),
    ))
}

fn criterion_3(_: &mut Shared) -> Outcome {
    let mut failed = Vec::new();
    let mut total = 0;
    let mut anchors = Vec::new();
    for n in [2, 3, 5] {
        let checks = noise_law_checks(n, 1e-2, 1_000_000, SEED_NOISE, workers())?;
        total += checks.len();
        for c in &checks {
            if !c.passes(5.0) {
                failed.push(format!("n={n} {}", c.name));
            }
            if c.name == "E tr(d_sym^2)/dt" {
                anchors.push(format!("n={n}: {:.4} vs {}", c.estimate.mean, c.theory));
            }
        }
    }
    Ok((
        failed.is_empty() && anchors.len() == 3,
        format!(
            "{} of {total} statistics within 5 stderr; E tr B_sym^2 / tau {}{}",
            total - failed.len(),
            anchors.join(", "),
            if failed.is_empty() {
                String::new()
            } else {
                format!("; failing: {}", failed.join("; "))
            }
        ),
    ))
}

fn criterion_4(_: &mut Shared) -> Outcome {
    let config = TrajectoryConfig::new(3, 1.0, 1e-3, Scheme::Exponential, 2, SEED_SDE);
    let est = estimate_trace_moments(&config, 100_000, workers())?;
    let exact = exact_moments(3, 2, 1.0)?;
    let targets = [
        (Partition::single(1), 3.0 * 1f64.exp()),
        (Partition::single(2), exact.trace_of_power()),
        (Partition::ones(2), exact.power_of_trace()),
    ];
    let mut means_ok = !est.failed();
    let mut parts = Vec::new();
    for (lambda, target) in &targets {
        let s = est.get(1.0, lambda).expect("checkpoint at tau = 1");
        let z = (s.mean - target) / s.stderr;
        means_ok &= z.abs() <= 3.0;
        parts.push(format!(
            "[{lambda}] {:.4}+-{:.4} (z {z:+.2})",
            s.mean, s.stderr
        ));
    }
    let det_ok = est.max_abs_log_det <= 1e-8;
    let dts = [4e-3, 2e-3, 1e-3, 5e-4];
    let mut slopes = Vec::new();
    for scheme in [Scheme::Exponential, Scheme::Euler] {
        let points = weak_errors(3, 1.0, &dts, scheme, 10_000, SEED_WEAK, workers())?;
        slopes.push((scheme, weak_order_slope(&points)));
    }
    let slopes_ok = slopes.iter().all(|(_, s)| (s - 1.0).abs() <= 0.3);
    Ok((
        means_ok && det_ok && slopes_ok,
        format!(
            "{}; max |log det F| {:.1e}; weak slopes {}",
            parts.join(", "),
            est.max_abs_log_det,
            slopes
                .iter()
                .map(|(s, v)| format!("{} {v:.3}", s.name()))
                .collect::<Vec<_>>()
                .join(", ")
        ),
    ))
}

fn criterion_5(_: &mut Shared) -> Outcome {
    let checkpoints: Vec<f64> = (1..=20).map(|k| 0.1 * k as f64).collect();
    let worst = workers()
        .map_indexed(200, |i| -> sln_gbm::Result<f64> {
            let mut config = TrajectoryConfig::new(2, 2.0, 1e-3, Scheme::Exponential, 2, SEED_N2)
                .with_checkpoints(checkpoints.clone());
            config.stream_index = i as u64;
            let record = run_trajectory(&config)?;
            Ok(record
                .checkpoints
                .iter()
                .map(|g| {
                    let (t1, t2) = (g.trace_powers[0], g.trace_powers[1]);
                    rel(t1 * t1 - t2, 2.0)
                })
                .fold(0.0, f64::max))
        })
        .into_iter()
        .collect::<sln_gbm::Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    Ok((
        worst <= 1e-6,
        format!("max relative deviation of tr^2 G - tr G^2 from 2 over 200 paths x 20 checkpoints: {worst:.2e}"),
    ))
}

fn criterion_6(shared: &mut Shared) -> Outcome {
    let mut zeta_max = f64::NEG_INFINITY;
    for n in [2, 3] {
        for ts in [10.0, 20.0, 40.0] {
            let terminal = terminal_condition(threshold_sigma_star(n, ts))?;
            zeta_max = zeta_max.max(solve_backward(n, ts, &terminal, 0.0, 0.0)?);
        }
    }
    let a_ok = zeta_max <= 0.5 + 1e-9;

    let s20 = terminal_samples(
        3,
        20.0,
        1e-2,
        Scheme::Exponential,
        200_000,
        SEED_NONTIGHT,
        workers(),
    )?;
    let nt = nontightness_from_samples(&s20)?;
    let (m, se) = (nt.summary.mean, nt.summary.stderr);
    let b_ok = !nt.summary.failed
        && m - 3.0 * se <= 0.5 + 2.0 / 20f64.sqrt()
        && (0.30..=0.52).contains(&m);

    let s40 = terminal_samples(
        3,
        40.0,
        1e-2,
        Scheme::Exponential,
        20_000,
        SEED_TAU40,
        workers(),
    )?;
    let s10 = tau10_samples(shared)?.clone();
    let mut ks = Vec::new();
    for samples in [&s10, &s20, &s40] {
        let terminal = terminal_condition(threshold_sigma_star(3, samples.tau))?;
        let bound = decay_integral(3, samples.tau, &terminal)?;
        let chain = chain_check(samples, &terminal, bound)?;
        ks.push((samples.tau, chain.constant));
    }
    let c_ok = ks.iter().all(|&(_, k)| k <= 10.0);
    Ok((
        a_ok && b_ok && c_ok,
        format!(
            "(a) max zeta(0,0) {zeta_max:.6}; (b) truncated mean {m:.4}+-{se:.4}; (c) K {}",
            ks.iter()
                .map(|(t, k)| format!("{k:.3} at tau*={t}"))
                .collect::<Vec<_>>()
                .join(", ")
        ),
    ))
}

fn criterion_7(shared: &mut Shared) -> Outcome {
    let d = lognormal_from_samples(tau10_samples(shared)?);
    let (m, se) = (d.emp_mean, d.emp_mean_stderr);
    let gap = (5.4 - m).max(m - 6.6).max(0.0);
    let mean_ok = gap <= 3.0 * se;
    let var_ok = (7.0..=9.0).contains(&d.emp_var);
    Ok((
        mean_ok && var_ok && !d.failed,
        format!(
            "mean ln|F|^2 {m:.4}+-{se:.4} (target [5.4, 6.6]), variance {:.4}+-{:.4} (target [7, 9])",
            d.emp_var, d.emp_var_stderr
        ),
    ))
}

fn criterion_8(_: &mut Shared) -> Outcome {
    let mut failures = Vec::new();
    for p in [2, 3] {
        for n in [2, 3] {
            let ratios: Vec<f64> = (0..=10)
                .map(|t| linearized_exponent_ratio(n, p, t as f64))
                .collect::<Result<_, _>>()?;
            if let Some(k) = ratios.windows(2).position(|w| w[1] < w[0] * (1.0 - 1e-12)) {
                failures.push(format!(
                    "n={n} p={p} drops {:.4} -> {:.4} at tau {k}->{}",
                    ratios[k],
                    ratios[k + 1],
                    k + 1
                ));
            }
        }
    }
    let detail = if failures.is_empty() {
        "ratio nondecreasing for all four (n, p)".to_string()
    } else {
        failures.join("; ")
    };
    Ok((failures.is_empty(), detail))
}

fn criterion_9(_: &mut Shared) -> Outcome {
    let mut sim = ExperimentSpec::new(Command::Simulate);
    sim.tau = Some(0.5);
    sim.dt = Some(1e-2);
    sim.paths = Some(2_000);
    sim.p = Some(3);
    sim.checkpoints = Some(vec![0.25, 0.5]);
    sim.seed = Some(SEED_REPRO);
    let mut qv = ExperimentSpec::new(Command::Qvcheck);
    qv.samples = Some(100_000);
    qv.seed = Some(SEED_REPRO);
    let mut nt = ExperimentSpec::new(Command::Nontight);
    nt.tau_stars = Some(vec![4.0, 8.0]);
    nt.paths = Some(1_000);
    nt.seed = Some(SEED_REPRO);
    let mut mo = ExperimentSpec::new(Command::Moments);
    mo.p = Some(4);

    let mut identical = Vec::new();
    let mut differing = Vec::new();
    for spec in [&sim, &qv, &nt, &mo] {
        let one = run_experiment(spec, Workers::Sequential)?.to_csv();
        let eight = run_experiment(spec, Workers::Threads(8))?.to_csv();
        let name = spec.command.name();
        if one == eight {
            identical.push(name);
        } else {
            differing.push(name);
        }
    }
    Ok((
        differing.is_empty(),
        format!(
            "byte-identical CSV with 1 and 8 workers: [{}]{}",
            identical.join(", "),
            if differing.is_empty() {
                String::new()
            } else {
                format!("; differing: [{}]", differing.join(", "))
            }
        ),
    ))
}

fn main() {
    let selected: Vec<u32> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let criteria: [Criterion; 9] = [
        (1, "degree-2 closed form", criterion_1),
        (2, "moment sandwich", criterion_2),
        (3, "noise law", criterion_3),
        (4, "SDE consistency", criterion_4),
        (5, "n = 2 determinant identity", criterion_5),
        (6, "non-tightness machinery", criterion_6),
        (7, "log-normal heuristic", criterion_7),
        (8, "linearized exponent monotonicity", criterion_8),
        (9, "reproducibility", criterion_9),
    ];
    let mut shared = Shared::default();
    let mut unexpected = Vec::new();
    let mut passed = 0;
    let mut ran = 0;
    for (id, name, run) in criteria {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let (ok, detail) = match run(&mut shared) {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        println!(
            "criterion {id} [{}] {name}: {detail} ({:.1} s)",
            if ok { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
        if ok {
            passed += 1;
        } else if !KNOWN_FAILING.contains(&id) {
            unexpected.push(id);
        }
    }
    println!("{passed} of {ran} criteria pass");
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
