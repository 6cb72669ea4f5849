//! Dispatch from a resolved specification to the simulator.

use std::path::PathBuf;
use std::time::Instant;

use sln_gbm::estimators::{
    chain_check, estimate_trace_moments, lognormal_from_samples, nontightness_from_samples,
    tail_share, terminal_samples,
};
use sln_gbm::moments::{
    exact_moments, intermittency_exponent, moment_bounds, pair_closed_form, partitions,
};
use sln_gbm::noise::noise_law_checks;
use sln_gbm::pde::{
    coefficient, decay_integral, phi, terminal_condition, threshold_sigma_star, BackwardSolution,
};
use sln_gbm::{Partition, Scheme, TrajectoryConfig, Workers};

use crate::plot::emit_plots;
use crate::report::{write_atomic, Check, Provenance, Report, Row, Series};
use crate::spec::{Command, ExperimentSpec, Format, Resolved, SCHEMA_VERSION};
use crate::CliError;

/// Standard errors a law statistic may deviate before it is flagged.
pub const LAW_SIGMAS: f64 = 5.0;

/// Fixed constant standing in for the unspecified `C(n)` in the
/// truncated-mean bound `1/2 + C/sqrt(tau*)`.
pub const NONTIGHT_CONSTANT: f64 = 2.0;

/// Largest acceptable chain-check constant.
pub const CHAIN_CONSTANT_MAX: f64 = 10.0;

const HISTOGRAM_BINS: usize = 50;

pub fn run_experiment(spec: &ExperimentSpec, workers: Workers) -> Result<Report, CliError> {
    let r = spec.resolve()?;
    let start = Instant::now();
    let mut report = match r.command {
        Command::Simulate => simulate(&r, workers)?,
        Command::Moments => moments(&r)?,
        Command::Qvcheck => qvcheck(&r, workers)?,
        Command::Nontight => nontight(&r, workers)?,
        Command::Pde => pde(&r)?,
        Command::Report => {
            let path = r.input.as_ref().expect("resolve checks input");
            return Report::from_file(path);
        }
    };
    report.provenance.wall_time_s = start.elapsed().as_secs_f64();
    report.provenance.workers = workers.count();
    Ok(report)
}

/// Writes the requested formats and plots into `r.out`.
pub fn write_outputs(
    report: &Report,
    out: &std::path::Path,
    format: Format,
) -> Result<Vec<PathBuf>, CliError> {
    let stem = report.provenance.command.clone();
    let mut files = Vec::new();
    if matches!(format, Format::Csv | Format::Both) {
        let path = out.join(format!("{stem}.csv"));
        write_atomic(&path, &report.to_csv())?;
        files.push(path);
    }
    if matches!(format, Format::Json | Format::Both) {
        let path = out.join(format!("{stem}.json"));
        write_atomic(&path, &report.to_json())?;
        files.push(path);
    }
    files.extend(emit_plots(report, out)?);
    Ok(files)
}

fn new_report(r: &Resolved, dt: f64, n_paths: u64) -> Report {
    Report {
        schema_version: SCHEMA_VERSION,
        provenance: Provenance {
            command: r.command.name().to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: r.seed,
            dt,
            n_paths,
            workers: 1,
            wall_time_s: 0.0,
        },
        spec: r.clone(),
        summary: Vec::new(),
        rows: Vec::new(),
        checks: Vec::new(),
        series: Vec::new(),
    }
}

fn check(report: &mut Report, name: &str, passed: bool, detail: String) {
    report.summary.push(format!(
        "[{}] {name}: {detail}",
        if passed { "pass" } else { "FAIL" }
    ));
    report.checks.push(Check {
        name: name.to_string(),
        passed,
        detail,
    });
}

fn pass_flag(ok: bool) -> String {
    if ok { "pass" } else { "fail" }.to_string()
}

/// Bounds apply to `E tr G^q` and `E (tr G)^q`.
fn bounds_for(n: usize, lambda: &Partition, tau: f64) -> Option<(f64, f64)> {
    let q = lambda.degree();
    if *lambda == Partition::single(q) || *lambda == Partition::ones(q) {
        moment_bounds(n, q, tau).ok()
    } else {
        None
    }
}

fn simulate(r: &Resolved, workers: Workers) -> Result<Report, CliError> {
    let config = TrajectoryConfig::new(r.n, r.tau, r.dt, r.scheme, r.p as usize, r.seed)
        .with_checkpoints(r.checkpoints.clone());
    let est = estimate_trace_moments(&config, r.paths, workers)?;
    let mut report = new_report(r, r.dt, r.paths as u64);
    let mut sandwich_ok = true;
    let mut deviating = 0usize;
    for e in &est.entries {
        let s = &e.summary;
        let mut row = Row::new("simulate", r.n, e.partition.to_string(), e.tau);
        row.scheme = Some(r.scheme.name().to_string());
        row.dt = Some(r.dt);
        row.n_paths = Some(s.n_paths);
        row.seed = Some(r.seed);
        row.estimate = Some(s.mean);
        row.stderr = Some(s.stderr);
        row.exact_value = exact_moments(r.n, e.partition.degree(), e.tau)
            .ok()
            .and_then(|t| t.get(&e.partition));
        if let Some((lo, hi)) = bounds_for(r.n, &e.partition, e.tau) {
            row.lower_bound = Some(lo);
            row.upper_bound = Some(hi);
            let slack = 1e-9 * hi;
            sandwich_ok &=
                s.mean >= lo - 3.0 * s.stderr - slack && s.mean <= hi + 3.0 * s.stderr + slack;
        }
        row.flag = if s.failed {
            "diverged".into()
        } else if let Some(x) = row.exact_value {
            let ok = (s.mean - x).abs() <= 3.0 * s.stderr + 1e-12 * x.abs();
            deviating += usize::from(!ok);
            if ok { "ok" } else { "deviates" }.into()
        } else {
            "estimate".into()
        };
        if e.partition.len() == 1 && e.partition.degree() == 1 {
            report.summary.push(format!(
                "E tr G at tau = {}: {} +- {} (exact {})",
                e.tau,
                s.mean,
                s.stderr,
                row.exact_value.map(|x| x.to_string()).unwrap_or_default()
            ));
        }
        report.rows.push(row);
    }
    let diverged = est
        .entries
        .first()
        .map(|e| e.summary.n_diverged)
        .unwrap_or(0);
    check(
        &mut report,
        "divergence budget",
        !est.failed(),
        format!("{diverged} of {} paths diverged", r.paths),
    );
    check(
        &mut report,
        "moment bounds (3 stderr)",
        sandwich_ok,
        "bounded monomials inside [n e^(r tau), n^p e^(r tau)]".into(),
    );
    if r.scheme == Scheme::Exponential {
        check(
            &mut report,
            "determinant preserved",
            est.max_abs_log_det <= 1e-8,
            format!("max |ln det F| = {}", est.max_abs_log_det),
        );
    }
    report.summary.push(format!(
        "{deviating} of {} estimates outside 3 stderr of the exact value",
        est.entries.len()
    ));
    Ok(report)
}

fn moments(r: &Resolved) -> Result<Report, CliError> {
    let table = exact_moments(r.n, r.p, r.tau)?;
    let mut report = new_report(r, 0.0, 0);
    let mut sandwich_ok = true;
    for (lambda, value) in &table.values {
        let mut row = Row::new("moments", r.n, lambda.to_string(), r.tau);
        row.exact_value = Some(*value);
        if let Some((lo, hi)) = bounds_for(r.n, lambda, r.tau) {
            row.lower_bound = Some(lo);
            row.upper_bound = Some(hi);
            sandwich_ok &= *value >= lo * (1.0 - 1e-9) && *value <= hi * (1.0 + 1e-9);
        }
        row.flag = "exact".into();
        report
            .summary
            .push(format!("E m[{lambda}] at tau = {}: {value}", r.tau));
        report.rows.push(row);
    }
    check(
        &mut report,
        "moment bounds",
        sandwich_ok,
        "tr G^p and (tr G)^p inside the growth bounds".into(),
    );
    check(
        &mut report,
        "ODE cross-check",
        table.cross_check_rel_diff <= 1e-10,
        format!("relative difference {}", table.cross_check_rel_diff),
    );
    if r.p == 2 {
        let (sq, tr2) = pair_closed_form(r.n, r.tau)?;
        let rel = ((table.power_of_trace() - sq) / sq)
            .abs()
            .max(((table.trace_of_power() - tr2) / tr2).abs());
        check(
            &mut report,
            "degree-2 closed form",
            rel <= 1e-10,
            format!("relative difference {rel}"),
        );
    }
    let horizon = if r.tau > 0.0 { r.tau } else { 1.0 };
    let grid: Vec<f64> = (0..=40).map(|k| horizon * k as f64 / 40.0).collect();
    let nf = r.n as f64;
    for q in 1..=r.p {
        let rate = intermittency_exponent(r.n, q as f64);
        let exact: Vec<f64> = grid
            .iter()
            .map(|&t| exact_moments(r.n, q, t).map(|m| m.power_of_trace().ln()))
            .collect::<Result<_, _>>()?;
        report.series.push(Series::Moments {
            n: r.n,
            p: q,
            exact,
            lower: grid.iter().map(|t| nf.ln() + rate * t).collect(),
            upper: grid.iter().map(|t| q as f64 * nf.ln() + rate * t).collect(),
            tau: grid.clone(),
        });
    }
    Ok(report)
}

fn qvcheck(r: &Resolved, workers: Workers) -> Result<Report, CliError> {
    let checks = noise_law_checks(r.n, r.dt, r.samples, r.seed, workers)?;
    let mut report = new_report(r, r.dt, r.samples as u64);
    let mut failed = Vec::new();
    for c in &checks {
        let mut row = Row::new("qvcheck", r.n, c.name.clone(), r.dt);
        row.dt = Some(r.dt);
        row.n_paths = Some(c.estimate.n_paths);
        row.seed = Some(r.seed);
        row.estimate = Some(c.estimate.mean);
        row.stderr = Some(c.estimate.stderr);
        row.exact_value = Some(c.theory);
        let ok = c.passes(LAW_SIGMAS);
        if !ok {
            failed.push(c.name.clone());
        }
        row.flag = pass_flag(ok);
        report.rows.push(row);
    }
    let detail = if failed.is_empty() {
        format!("{} statistics within {LAW_SIGMAS} stderr", checks.len())
    } else {
        format!("outside {LAW_SIGMAS} stderr: {}", failed.join("; "))
    };
    check(&mut report, "noise law", failed.is_empty(), detail);
    Ok(report)
}

fn nontight(r: &Resolved, workers: Workers) -> Result<Report, CliError> {
    let mut report = new_report(r, r.dt, r.paths as u64);
    let mut means = Vec::new();
    let mut stderrs = Vec::new();
    for &ts in &r.tau_stars {
        let samples = terminal_samples(r.n, ts, r.dt, r.scheme, r.paths, r.seed, workers)?;
        let nt = nontightness_from_samples(&samples)?;
        let ln = lognormal_from_samples(&samples);
        let terminal = terminal_condition(threshold_sigma_star(r.n, ts))?;
        let bound = decay_integral(r.n, ts, &terminal)?;
        let chain = chain_check(&samples, &terminal, bound)?;
        let share = tail_share(&samples.frobenius_sq, 0.01);
        let upper = 0.5 + NONTIGHT_CONSTANT / ts.sqrt();
        let ln_n = (r.n as f64).ln();

        let base = |label: &str| {
            let mut row = Row::new("nontight", r.n, label, ts);
            row.scheme = Some(r.scheme.name().to_string());
            row.dt = Some(r.dt);
            row.n_paths = Some(r.paths as u64);
            row.seed = Some(r.seed);
            row
        };
        let s = &nt.summary;
        let upper_ok = s.mean - 3.0 * s.stderr <= upper;
        let mut row = base("truncated_mean");
        row.estimate = Some(s.mean);
        row.stderr = Some(s.stderr);
        row.exact_value = Some(ln.reference.functional_ref);
        row.upper_bound = Some(upper);
        row.flag = pass_flag(upper_ok);
        report.rows.push(row);

        let mut row = base("ln_norm_mean");
        row.estimate = Some(ln.emp_mean);
        row.stderr = Some(ln.emp_mean_stderr);
        row.exact_value = Some(ln_n + ln.reference.mu_ref);
        row.flag = "reported".into();
        report.rows.push(row);

        let mut row = base("ln_norm_var");
        row.estimate = Some(ln.emp_var);
        row.stderr = Some(ln.emp_var_stderr);
        row.exact_value = Some(ln.reference.var_ref);
        row.flag = "reported".into();
        report.rows.push(row);

        let mut row = base("smoothed_mean");
        row.estimate = Some(chain.smoothed.mean);
        row.stderr = Some(chain.smoothed.stderr);
        row.exact_value = Some(chain.zeta_initial);
        row.upper_bound = Some(bound);
        row.flag = "reported".into();
        report.rows.push(row);

        let mut row = base("chain_constant");
        row.estimate = Some(chain.constant);
        row.upper_bound = Some(CHAIN_CONSTANT_MAX);
        row.flag = pass_flag(chain.constant <= CHAIN_CONSTANT_MAX);
        report.rows.push(row);

        let mut row = base("tail_share_1pct");
        row.estimate = Some(share);
        row.flag = "reported".into();
        report.rows.push(row);

        check(
            &mut report,
            &format!("divergence budget (tau* = {ts})"),
            !s.failed,
            format!("{} of {} paths diverged", s.n_diverged, s.n_paths),
        );
        check(
            &mut report,
            &format!("truncated samples bounded (tau* = {ts})"),
            nt.max_retained <= nt.r_star,
            format!("max retained {} <= R* = {}", nt.max_retained, nt.r_star),
        );
        check(
            &mut report,
            &format!("truncated mean bound (tau* = {ts})"),
            upper_ok,
            format!("{} - 3 * {} <= {upper}", s.mean, s.stderr),
        );
        check(
            &mut report,
            &format!("chain constant (tau* = {ts})"),
            chain.constant <= CHAIN_CONSTANT_MAX,
            format!("K = {} (bound {bound})", chain.constant),
        );
        report.summary.push(format!(
            "tau* = {ts}: ln|F|^2 mean {} +- {} (reference {}), variance {} +- {} (reference {})",
            ln.emp_mean,
            ln.emp_mean_stderr,
            ln_n + ln.reference.mu_ref,
            ln.emp_var,
            ln.emp_var_stderr,
            ln.reference.var_ref
        ));
        means.push(s.mean);
        stderrs.push(s.stderr);

        let logs: Vec<f64> = samples.frobenius_sq.iter().map(|x| x.ln()).collect();
        let lo = logs.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let width = (hi - lo).max(1e-12) / HISTOGRAM_BINS as f64;
        let mut counts = vec![0usize; HISTOGRAM_BINS];
        for x in &logs {
            let k = (((x - lo) / width) as usize).min(HISTOGRAM_BINS - 1);
            counts[k] += 1;
        }
        let total = logs.len() as f64 * width;
        report.series.push(Series::Histogram {
            n: r.n,
            tau: ts,
            edges: (0..=HISTOGRAM_BINS)
                .map(|k| lo + width * k as f64)
                .collect(),
            density: counts.iter().map(|&c| c as f64 / total).collect(),
            reference_mean: ln_n + ln.reference.mu_ref,
            reference_var: ln.reference.var_ref,
        });
    }
    report.series.insert(
        0,
        Series::Nontight {
            n: r.n,
            tau_star: r.tau_stars.clone(),
            mean: means,
            stderr: stderrs,
        },
    );
    Ok(report)
}

fn pde(r: &Resolved) -> Result<Report, CliError> {
    let mut report = new_report(r, 0.0, 0);
    let a = coefficient(r.n);
    for &ts in &r.tau_stars {
        let sigma_star = threshold_sigma_star(r.n, ts);
        let terminal = terminal_condition(sigma_star)?;
        let sol = BackwardSolution::new(r.n, ts, terminal)?;
        let base = |label: &str, tau: f64| {
            let mut row = Row::new("pde", r.n, label, tau);
            row.seed = None;
            row
        };

        let z0 = sol.value(0.0, 0.0)?;
        let phi_bound = if ts > 0.0 {
            phi((sigma_star + 1.0 - a * ts) / (2.0 * a * ts).sqrt())
        } else {
            terminal.value(0.0)
        };
        let mut row = base("zeta_initial", 0.0);
        row.estimate = Some(z0);
        row.exact_value = Some(phi_bound);
        row.upper_bound = Some(0.5);
        row.flag = pass_flag(z0 <= 0.5 + 1e-9);
        report.rows.push(row);
        check(
            &mut report,
            &format!("initial value (tau* = {ts})"),
            z0 <= 0.5 + 1e-9,
            format!("zeta(0, 0) = {z0}, normal bound {phi_bound}"),
        );

        for tau in [0.0, 0.5 * ts, ts] {
            let sup = sol.derivative_sup(tau)?;
            let h = ts - tau;
            for (label, value, envelope) in [
                ("sup_d1", sup.sup_d1, 1.5 / (1.0 + h).sqrt()),
                ("sup_d2", sup.sup_d2, 6.0 / (1.0 + h)),
            ] {
                let mut row = base(label, tau);
                row.estimate = Some(value);
                row.upper_bound = Some(envelope);
                row.flag = "reported".into();
                report.rows.push(row);
            }
        }

        let bound = decay_integral(r.n, ts, &terminal)?;
        let mut row = base("decay_integral", ts);
        row.estimate = Some(bound);
        row.flag = "reported".into();
        report.rows.push(row);
        report.summary.push(format!(
            "tau* = {ts}: decay integral {bound}, times sqrt(tau*) = {}",
            bound * ts.sqrt()
        ));

        // grid properties: range, monotonicity and the normal-CDF comparison
        let (mut in_range, mut monotone, mut below_phi) = (true, true, true);
        for k in 0..=8 {
            let tau = ts * k as f64 / 8.0;
            let (shift, sd) = sol.kernel(tau)?;
            let mut prev = f64::INFINITY;
            for j in 0..=200 {
                let s = sigma_star - 10.0 + 0.1 * j as f64;
                let v = sol.value(tau, s)?;
                in_range &= (0.0..=1.0).contains(&v);
                monotone &= v <= prev + 1e-12;
                prev = v;
                if sd > 0.0 {
                    below_phi &= v <= phi((sigma_star + 1.0 - s - shift) / sd) + 1e-9;
                }
            }
        }
        check(
            &mut report,
            &format!("maximum principle (tau* = {ts})"),
            in_range,
            "values in [0, 1]".into(),
        );
        check(
            &mut report,
            &format!("monotone in sigma (tau* = {ts})"),
            monotone,
            "nonincreasing on the grid".into(),
        );
        check(
            &mut report,
            &format!("normal comparison (tau* = {ts})"),
            below_phi,
            "zeta below the Gaussian tail bound on the grid".into(),
        );
    }
    Ok(report)
}

/// Degrees `1..=p` of the canonical moment basis, flattened.
pub fn moment_basis(p: u32) -> Result<Vec<Partition>, CliError> {
    Ok((1..=p)
        .map(partitions)
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .flatten()
        .collect())
}
