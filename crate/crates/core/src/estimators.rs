//! Monte Carlo estimators over independent trajectories.
//!
//! Trajectory `i` always draws from stream `(master_seed, i)`. Paths are
//! split into contiguous batches, each batch is one unit of parallel work,
//! and batch results are merged in a fixed tree, so every estimate is
//! bit-identical for any worker count.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{gram_unchecked, SquareMatrix};
use crate::moments::{partitions, Partition};
use crate::noise::{noise_coefficients, IncrementSource, IsotropicSource, NoiseIncrement};
use crate::parallel::Workers;
use crate::pde::{phi, threshold_sigma_star, BackwardSolution, TerminalCondition};
use crate::rng::RngStream;
use crate::sde::{integrate, Scheme, StepView, TrajectoryConfig};
use crate::stats::{batch_count, batch_range, tree_reduce, EstimatorSummary, Moments};

/// Largest `tau` for which `n e^tau` stays comfortably finite.
pub const MAX_NORMALIZATION_TAU: f64 = 690.0;

/// Fewest paths accepted by the estimators.
pub const MIN_PATHS: usize = 100;

fn check_paths(n_paths: usize) -> Result<()> {
    if n_paths < MIN_PATHS {
        return Err(Error::Domain(format!(
            "need at least {MIN_PATHS} paths, got {n_paths}"
        )));
    }
    Ok(())
}

/// Monte Carlo estimate of `E prod tr G^{p_i}` at one checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub tau: f64,
    pub partition: Partition,
    pub summary: EstimatorSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimates {
    pub config: TrajectoryConfig,
    pub n_paths: usize,
    /// Checkpoint-major, partitions by degree then in canonical order.
    pub entries: Vec<MomentEstimate>,
    /// Largest `|ln det F|` seen at any checkpoint of any non-diverged path.
    pub max_abs_log_det: f64,
}

impl MomentEstimates {
    pub fn get(&self, tau: f64, partition: &Partition) -> Option<&EstimatorSummary> {
        self.entries
            .iter()
            .find(|e| e.tau == tau && &e.partition == partition)
            .map(|e| &e.summary)
    }

    pub fn failed(&self) -> bool {
        self.entries.iter().any(|e| e.summary.failed)
    }
}

struct BatchMoments {
    moments: Vec<Moments>,
    diverged: u64,
    max_abs_log_det: f64,
}

/// Sample means of every trace monomial of degree `<= p_max` at every
/// checkpoint. The stream index of path `i` is `config.stream_index + i`.
pub fn estimate_trace_moments(
    config: &TrajectoryConfig,
    n_paths: usize,
    workers: Workers,
) -> Result<MomentEstimates> {
    check_paths(n_paths)?;
    let plan = config.plan()?;
    let coeffs = noise_coefficients(config.n)?;
    let basis: Vec<Partition> = (1..=config.p_max as u32)
        .map(partitions)
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    let n_cp = plan.checkpoint_steps.len();
    let width = basis.len();
    let batches = batch_count(n_paths);

    let per_batch: Vec<BatchMoments> = workers.map_indexed(batches, |b| {
        let mut acc = BatchMoments {
            moments: vec![Moments::default(); n_cp * width],
            diverged: 0,
            max_abs_log_det: 0.0,
        };
        for i in batch_range(n_paths, batches, b) {
            let mut path = config.clone();
            path.stream_index = config.stream_index + i as u64;
            let mut source =
                IsotropicSource::new(RngStream::new(path.master_seed, path.stream_index));
            let record = integrate(&path, &plan, &coeffs, &mut source, &mut |_| {});
            if record.diverged() {
                acc.diverged += 1;
                continue;
            }
            for (c, summary) in record.checkpoints.iter().enumerate() {
                acc.max_abs_log_det = acc.max_abs_log_det.max(summary.log_det.abs());
                for (k, lambda) in basis.iter().enumerate() {
                    acc.moments[c * width + k].push(summary.monomial(lambda.parts()));
                }
            }
        }
        acc
    });

    let diverged: u64 = per_batch.iter().map(|b| b.diverged).sum();
    let max_abs_log_det = per_batch
        .iter()
        .map(|b| b.max_abs_log_det)
        .fold(0.0, f64::max);
    let mut entries = Vec::with_capacity(n_cp * width);
    for c in 0..n_cp {
        let tau = plan.checkpoint_steps[c] as f64 * config.dt;
        for (k, lambda) in basis.iter().enumerate() {
            let column: Vec<Moments> = per_batch.iter().map(|b| b.moments[c * width + k]).collect();
            entries.push(MomentEstimate {
                tau,
                partition: lambda.clone(),
                summary: EstimatorSummary::from_batches(&column, diverged, config.master_seed),
            });
        }
    }
    Ok(MomentEstimates {
        config: config.clone(),
        n_paths,
        entries,
        max_abs_log_det,
    })
}

/// `|F_tau|^2` for every non-diverged path, in path order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TerminalSamples {
    pub n: usize,
    pub tau: f64,
    pub dt: f64,
    pub scheme: Scheme,
    pub master_seed: u64,
    pub frobenius_sq: Vec<f64>,
    pub n_diverged: u64,
}

impl TerminalSamples {
    /// Summary of `h(|F|^2)` over the retained paths.
    pub fn summarize(&self, h: impl Fn(f64) -> f64) -> EstimatorSummary {
        let xs: Vec<f64> = self.frobenius_sq.iter().map(|&x| h(x)).collect();
        EstimatorSummary::from_samples(&xs, self.n_diverged, self.master_seed)
    }

    /// `R = |F|^2 / (n e^tau)`, mean one in expectation.
    pub fn normalized(&self) -> Vec<f64> {
        let scale = self.n as f64 * self.tau.exp();
        self.frobenius_sq.iter().map(|x| x / scale).collect()
    }
}

/// Simulates `n_paths` trajectories to `tau` and keeps `|F_tau|^2`.
pub fn terminal_samples(
    n: usize,
    tau: f64,
    dt: f64,
    scheme: Scheme,
    n_paths: usize,
    seed: u64,
    workers: Workers,
) -> Result<TerminalSamples> {
    terminal_samples_with(n, tau, dt, scheme, n_paths, seed, workers, |i| {
        IsotropicSource::new(RngStream::new(seed, i))
    })
}

/// As [`terminal_samples`] with increments from `source_for(path_index)`.
#[allow(clippy::too_many_arguments)]
pub fn terminal_samples_with<S, M>(
    n: usize,
    tau: f64,
    dt: f64,
    scheme: Scheme,
    n_paths: usize,
    seed: u64,
    workers: Workers,
    source_for: M,
) -> Result<TerminalSamples>
where
    S: IncrementSource,
    M: Fn(u64) -> S + Sync + Send,
{
    check_paths(n_paths)?;
    let config = TrajectoryConfig::new(n, tau, dt, scheme, 1, seed);
    let plan = config.plan()?;
    let coeffs = noise_coefficients(n)?;
    let batches = batch_count(n_paths);
    let per_batch: Vec<(Vec<f64>, u64)> = workers.map_indexed(batches, |b| {
        let range = batch_range(n_paths, batches, b);
        let mut xs = Vec::with_capacity(range.len());
        let mut diverged = 0;
        for i in range {
            let mut source = source_for(i as u64);
            let record = integrate(&config, &plan, &coeffs, &mut source, &mut |_| {});
            match record.checkpoints.last() {
                Some(s) if !record.diverged() => xs.push(s.frobenius_sq()),
                _ => diverged += 1,
            }
        }
        (xs, diverged)
    });
    let n_diverged = per_batch.iter().map(|b| b.1).sum();
    let frobenius_sq = per_batch.into_iter().flat_map(|b| b.0).collect();
    Ok(TerminalSamples {
        n,
        tau: config.plan()?.checkpoint_steps[0] as f64 * dt,
        dt,
        scheme,
        master_seed: seed,
        frobenius_sq,
        n_diverged,
    })
}

/// Truncated mean `E R I(R <= R*)` with `R* = exp(2 tau*/(n+2) - 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NontightnessEstimate {
    pub n: usize,
    pub tau_star: f64,
    pub r_star: f64,
    pub summary: EstimatorSummary,
    /// Largest retained sample of `R I(R <= R*)`.
    pub max_retained: f64,
}

fn check_tau_star(tau_star: f64) -> Result<()> {
    if !(tau_star >= 1.0) {
        return Err(Error::Domain(format!(
            "tau_star must be >= 1, got {tau_star}"
        )));
    }
    if tau_star > MAX_NORMALIZATION_TAU {
        return Err(Error::Range {
            what: format!("n e^tau overflows for tau_star = {tau_star}"),
            max_tau: MAX_NORMALIZATION_TAU,
        });
    }
    Ok(())
}

/// `R* = exp(2 tau*/(n+2) - 1)`.
pub fn truncation_level(n: usize, tau_star: f64) -> f64 {
    threshold_sigma_star(n, tau_star).exp()
}

pub fn nontightness_functional(
    n: usize,
    tau_star: f64,
    n_paths: usize,
    dt: f64,
    seed: u64,
    workers: Workers,
) -> Result<NontightnessEstimate> {
    check_tau_star(tau_star)?;
    let samples = terminal_samples(n, tau_star, dt, Scheme::Exponential, n_paths, seed, workers)?;
    nontightness_from_samples(&samples)
}

/// The functional evaluated on already simulated paths.
pub fn nontightness_from_samples(samples: &TerminalSamples) -> Result<NontightnessEstimate> {
    check_tau_star(samples.tau)?;
    let r_star = truncation_level(samples.n, samples.tau);
    let retained: Vec<f64> = samples
        .normalized()
        .into_iter()
        .map(|r| if r <= r_star { r } else { 0.0 })
        .collect();
    let max_retained = retained.iter().copied().fold(0.0, f64::max);
    Ok(NontightnessEstimate {
        n: samples.n,
        tau_star: samples.tau,
        r_star,
        summary: EstimatorSummary::from_samples(&retained, samples.n_diverged, samples.master_seed),
        max_retained,
    })
}

/// Gaussian reference for `ln |F_tau|^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogNormalReference {
    pub n: usize,
    pub tau: f64,
    /// `(1 - 2/(n+2)) tau`, as a deviation from `ln n`.
    pub mu_ref: f64,
    pub var_ref: f64,
    /// `Phi(-1/sqrt(var_ref))`.
    pub functional_ref: f64,
}

impl LogNormalReference {
    pub fn new(n: usize, tau: f64) -> Self {
        let nf = n as f64;
        let var_ref = 4.0 * tau / (nf + 2.0);
        Self {
            n,
            tau,
            mu_ref: (1.0 - 2.0 / (nf + 2.0)) * tau,
            var_ref,
            functional_ref: if var_ref > 0.0 {
                phi(-1.0 / var_ref.sqrt())
            } else {
                0.0
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogNormalDiagnostics {
    pub reference: LogNormalReference,
    pub emp_mean: f64,
    pub emp_mean_stderr: f64,
    pub emp_var: f64,
    /// Batch-means standard error of the sample variance.
    pub emp_var_stderr: f64,
    pub n_paths: usize,
    pub n_diverged: u64,
    pub failed: bool,
}

pub fn lognormal_diagnostics(
    n: usize,
    tau: f64,
    n_paths: usize,
    dt: f64,
    seed: u64,
    workers: Workers,
) -> Result<LogNormalDiagnostics> {
    let reference = LogNormalReference::new(n, tau);
    if tau == 0.0 {
        check_paths(n_paths)?;
        return Ok(LogNormalDiagnostics {
            reference,
            emp_mean: (n as f64).ln(),
            emp_mean_stderr: 0.0,
            emp_var: 0.0,
            emp_var_stderr: 0.0,
            n_paths,
            n_diverged: 0,
            failed: false,
        });
    }
    let samples = terminal_samples(n, tau, dt, Scheme::Exponential, n_paths, seed, workers)?;
    Ok(lognormal_from_samples(&samples))
}

pub fn lognormal_from_samples(samples: &TerminalSamples) -> LogNormalDiagnostics {
    let logs: Vec<f64> = samples.frobenius_sq.iter().map(|x| x.ln()).collect();
    let mean = samples.summarize(f64::ln);
    let batches = batch_count(logs.len());
    let parts: Vec<Moments> = (0..batches)
        .map(|b| {
            let mut m = Moments::default();
            logs[batch_range(logs.len(), batches, b)]
                .iter()
                .for_each(|&x| m.push(x));
            m
        })
        .collect();
    let total = tree_reduce(&parts, Moments::merge).unwrap_or_default();
    let vars: Vec<f64> = parts
        .iter()
        .filter(|m| m.count >= 2)
        .map(|m| m.variance())
        .collect();
    let var_se = if vars.len() >= 2 {
        let k = vars.len() as f64;
        let m = vars.iter().sum::<f64>() / k;
        (vars.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (k * (k - 1.0))).sqrt()
    } else {
        0.0
    };
    LogNormalDiagnostics {
        reference: LogNormalReference::new(samples.n, samples.tau),
        emp_mean: mean.mean,
        emp_mean_stderr: mean.stderr,
        emp_var: total.variance(),
        emp_var_stderr: var_se,
        n_paths: samples.frobenius_sq.len() + samples.n_diverged as usize,
        n_diverged: samples.n_diverged,
        failed: mean.failed,
    }
}

/// Share of `sum x^2` carried by the largest `fraction` of the samples.
pub fn tail_share(xs: &[f64], fraction: f64) -> f64 {
    let mut sorted: Vec<f64> = xs.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let k = ((xs.len() as f64 * fraction).ceil() as usize).min(xs.len());
    let squares: Vec<f64> = sorted.iter().map(|x| x * x).collect();
    let total = crate::stats::pairwise_sum(&squares);
    if total == 0.0 {
        return 0.0;
    }
    crate::stats::pairwise_sum(&squares[..k]) / total
}

/// Comparison of `E R zeta(tau*, ln R) - zeta(0, 0)` against the decay bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainCheck {
    pub n: usize,
    pub tau_star: f64,
    pub smoothed: EstimatorSummary,
    pub zeta_initial: f64,
    pub bound: f64,
    /// Smallest `K` with `lhs <= K bound + 3 stderr`.
    pub constant: f64,
}

pub fn chain_check(
    samples: &TerminalSamples,
    terminal: &TerminalCondition,
    bound: f64,
) -> Result<ChainCheck> {
    let sol = BackwardSolution::new(samples.n, samples.tau, *terminal)?;
    let scale = samples.n as f64 * samples.tau.exp();
    let smoothed = samples.summarize(|x| {
        let r = x / scale;
        r * terminal.value(r.ln())
    });
    let zeta_initial = sol.value(0.0, 0.0)?;
    let excess = smoothed.mean - zeta_initial - 3.0 * smoothed.stderr;
    let constant = if excess <= 0.0 {
        0.0
    } else if bound > 0.0 {
        excess / bound
    } else {
        f64::INFINITY
    };
    Ok(ChainCheck {
        n: samples.n,
        tau_star: samples.tau,
        smoothed,
        zeta_initial,
        bound,
        constant,
    })
}

/// `E tr G_tau` with the zero-mean martingale control
/// `sum_k e^{tau - tau_{k+1}} tr(G_k L_k)` subtracted, where `L_k` is the
/// centered one-step change of `tr G` to second order in the increment.
/// The expectation equals that of the plain estimator for the same scheme.
pub fn controlled_trace_mean(
    n: usize,
    tau: f64,
    dt: f64,
    scheme: Scheme,
    n_paths: usize,
    seed: u64,
    workers: Workers,
) -> Result<EstimatorSummary> {
    check_paths(n_paths)?;
    let config = TrajectoryConfig::new(n, tau, dt, scheme, 1, seed);
    let plan = config.plan()?;
    let coeffs = noise_coefficients(n)?;
    let horizon = plan.steps as f64 * dt;
    let batches = batch_count(n_paths);
    let per_batch: Vec<(Moments, u64)> = workers.map_indexed(batches, |b| {
        let mut m = Moments::default();
        let mut diverged = 0;
        for i in batch_range(n_paths, batches, b) {
            let mut source = IsotropicSource::new(RngStream::new(seed, i as u64));
            let mut control = 0.0;
            let mut observer = |view: StepView<'_>| {
                let g = gram_unchecked(view.state);
                let l = centered_change(view.increment, scheme);
                let weight = (horizon - (view.step + 1) as f64 * dt).exp();
                control += weight * g.trace_product(&l);
            };
            let record = integrate(&config, &plan, &coeffs, &mut source, &mut observer);
            match record.checkpoints.last() {
                Some(s) if !record.diverged() => m.push(s.frobenius_sq() - control),
                _ => diverged += 1,
            }
        }
        (m, diverged)
    });
    let diverged = per_batch.iter().map(|b| b.1).sum();
    let moments: Vec<Moments> = per_batch.iter().map(|b| b.0).collect();
    Ok(EstimatorSummary::from_batches(&moments, diverged, seed))
}

/// `L = dB + dB^T + dB dB^T - dt I`, plus `(dB^2 + (dB^T)^2)/2` for the
/// exponential step. `E[L] = 0` for the isotropic increment.
fn centered_change(inc: &NoiseIncrement, scheme: Scheme) -> SquareMatrix {
    let b = inc.total();
    let bt = b.transpose();
    let mut l = &(&b + &bt) + &(&b * &bt);
    if scheme == Scheme::Exponential {
        let b2 = &b * &b;
        let bt2 = &bt * &bt;
        l = &l + &(&b2 + &bt2).scale(0.5);
    }
    let n = l.dim();
    for i in 0..n {
        l.set(i, i, l.get(i, i) - inc.dt);
    }
    l
}

/// Weak error of `E tr G_tau` at one step size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakErrorPoint {
    pub dt: f64,
    pub error: f64,
    pub stderr: f64,
}

/// Least-squares slope of `ln |error|` against `ln dt`.
pub fn weak_order_slope(points: &[WeakErrorPoint]) -> f64 {
    let xs: Vec<f64> = points.iter().map(|p| p.dt.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.error.abs().ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Weak errors of `E tr G_tau` against `n e^tau` over a list of step sizes.
pub fn weak_errors(
    n: usize,
    tau: f64,
    dts: &[f64],
    scheme: Scheme,
    n_paths: usize,
    seed: u64,
    workers: Workers,
) -> Result<Vec<WeakErrorPoint>> {
    let exact = n as f64 * tau.exp();
    dts.iter()
        .map(|&dt| {
            let s = controlled_trace_mean(n, tau, dt, scheme, n_paths, seed, workers)?;
            Ok(WeakErrorPoint {
                dt,
                error: s.mean - exact,
                stderr: s.stderr,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::ZeroNoise;
    use crate::pde::terminal_condition;

    #[test]
    fn tau_zero_checkpoint_is_exact() {
        let config = TrajectoryConfig::new(3, 0.05, 1e-2, Scheme::Exponential, 3, 5)
            .with_checkpoints(vec![0.0, 0.05]);
        let est = estimate_trace_moments(&config, 200, Workers::Sequential).unwrap();
        for e in est.entries.iter().filter(|e| e.tau == 0.0) {
            assert_eq!(e.summary.mean, 3f64.powi(e.partition.len() as i32));
            assert_eq!(e.summary.stderr, 0.0);
        }
        assert_eq!(est.entries.len(), 2 * (1 + 2 + 3));
    }

    #[test]
    fn rejects_few_paths() {
        let config = TrajectoryConfig::new(3, 0.1, 1e-2, Scheme::Euler, 1, 5);
        assert!(estimate_trace_moments(&config, 99, Workers::Sequential).is_err());
    }

    #[test]
    fn worker_count_does_not_change_bits() {
        let config = TrajectoryConfig::new(3, 0.2, 1e-2, Scheme::Exponential, 2, 11);
        let a = estimate_trace_moments(&config, 300, Workers::Sequential).unwrap();
        let b = estimate_trace_moments(&config, 300, Workers::Threads(4)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_noise_functional_is_deterministic() {
        let samples = terminal_samples_with(
            3,
            1.0,
            1e-2,
            Scheme::Exponential,
            100,
            0,
            Workers::Sequential,
            |_| ZeroNoise,
        )
        .unwrap();
        let est = nontightness_from_samples(&samples).unwrap();
        assert!((est.summary.mean - (-1f64).exp()).abs() < 1e-15);
        assert_eq!(est.summary.stderr, 0.0);
    }

    #[test]
    fn small_horizon_truncates() {
        let est = nontightness_functional(3, 1.0, 2000, 1e-2, 3, Workers::Sequential).unwrap();
        assert!((est.r_star - (-0.6f64).exp()).abs() < 1e-15);
        assert!(est.summary.mean < 1.0);
        assert!(est.max_retained <= est.r_star);
    }

    #[test]
    fn functional_guards() {
        assert!(nontightness_functional(3, 0.5, 100, 1e-2, 1, Workers::Sequential).is_err());
        assert!(matches!(
            nontightness_functional(3, 700.0, 100, 1e-2, 1, Workers::Sequential),
            Err(Error::Range { .. })
        ));
    }

    #[test]
    fn lognormal_references() {
        let d = lognormal_diagnostics(3, 0.0, 100, 1e-2, 1, Workers::Sequential).unwrap();
        assert_eq!(d.emp_mean, 3f64.ln());
        assert_eq!(d.emp_var, 0.0);
        let r = LogNormalReference::new(2, 10.0);
        assert_eq!((r.mu_ref, r.var_ref), (5.0, 10.0));
        let r = LogNormalReference::new(3, 20.0);
        assert!((r.functional_ref - 0.401_293_674_317_076).abs() < 1e-12);
    }

    #[test]
    fn tail_share_examples() {
        let mut xs = vec![1.0; 99];
        xs.push(10.0);
        assert!((tail_share(&xs, 0.01) - 100.0 / 199.0).abs() < 1e-15);
        assert_eq!(tail_share(&[0.0; 10], 0.1), 0.0);
    }

    #[test]
    fn control_variate_keeps_euler_mean() {
        // Euler gives E tr G_K = n (1 + dt)^K exactly
        let (n, dt, tau) = (3, 0.05, 0.5);
        let s =
            controlled_trace_mean(n, tau, dt, Scheme::Euler, 400, 9, Workers::Sequential).unwrap();
        let exact = 3.0 * (1.0f64 + dt).powi(10);
        assert!(s.within(exact, 4.0), "{} vs {exact} ({})", s.mean, s.stderr);
        assert!(s.stderr < 1e-2);
    }

    #[test]
    fn slope_of_exact_power_law() {
        let pts: Vec<WeakErrorPoint> = [1e-3, 2e-3, 4e-3]
            .iter()
            .map(|&dt| WeakErrorPoint {
                dt,
                error: -3.0 * dt,
                stderr: 0.0,
            })
            .collect();
        assert!((weak_order_slope(&pts) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn chain_check_constant_is_nonnegative() {
        let samples = terminal_samples(
            3,
            2.0,
            1e-2,
            Scheme::Exponential,
            400,
            4,
            Workers::Sequential,
        )
        .unwrap();
        let t = terminal_condition(threshold_sigma_star(3, 2.0)).unwrap();
        let c = chain_check(&samples, &t, 0.5).unwrap();
        assert!(c.constant >= 0.0);
        assert!(c.zeta_initial > 0.0 && c.zeta_initial <= 1.0);
    }
}
