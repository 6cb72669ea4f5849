use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use sln_gbm::{Scheme, Workers};
use sln_gbm_cli::{run_experiment, write_outputs, CliError, Command, ExperimentSpec, Format};

/// Simulates matrix-valued geometric Brownian motion on SL(n) and checks
/// the estimates against exact moments and analytic bounds.
///
/// Exit status: 0 when every check passes, 1 when a check fails, 2 on error.
#[derive(Debug, Parser)]
#[command(name = "sln-gbm", version)]
struct Args {
    /// Experiment to run; optional when --spec names one.
    #[arg(value_enum)]
    command: Option<Command>,

    /// JSON specification; command-line flags override its fields.
    #[arg(long)]
    spec: Option<PathBuf>,

    #[arg(long)]
    n: Option<usize>,
    /// Moment degree.
    #[arg(long)]
    p: Option<u32>,
    #[arg(long)]
    tau: Option<f64>,
    /// Checkpoint times for `simulate`, comma separated.
    #[arg(long, value_delimiter = ',')]
    checkpoints: Option<Vec<f64>>,
    /// Horizons for `nontight` and `pde`, comma separated.
    #[arg(long, value_delimiter = ',')]
    tau_stars: Option<Vec<f64>>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    paths: Option<usize>,
    /// Increments drawn by `qvcheck`.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// `euler` or `exponential`.
    #[arg(long)]
    scheme: Option<Scheme>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Report read by `report`.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Worker threads; defaults to SLN_GBM_THREADS or the core count.
    #[arg(long)]
    threads: Option<usize>,
}

impl Args {
    fn spec(&self) -> Result<ExperimentSpec, CliError> {
        let mut spec = match (&self.spec, self.command) {
            (Some(path), cmd) => {
                let s = ExperimentSpec::from_file(path)?;
                if let Some(c) = cmd.filter(|&c| c != s.command) {
                    return Err(CliError::Schema(format!(
                        "command {} conflicts with {} in {}",
                        c.name(),
                        s.command.name(),
                        path.display()
                    )));
                }
                s
            }
            (None, Some(cmd)) => ExperimentSpec::new(cmd),
            (None, None) => return Err(CliError::Schema("no command given".into())),
        };
        macro_rules! set {
            ($($f:ident),*) => {$(
                if let Some(v) = self.$f.clone() {
                    spec.$f = Some(v);
                }
            )*};
        }
        set!(
            n,
            p,
            tau,
            checkpoints,
            tau_stars,
            dt,
            paths,
            samples,
            seed,
            scheme,
            out,
            format,
            input
        );
        Ok(spec)
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    let workers = args.threads.map(Workers::with_count).unwrap_or_default();
    let result = args.spec().and_then(|spec| {
        let resolved = spec.resolve()?;
        let report = run_experiment(&spec, workers)?;
        let files = write_outputs(&report, &resolved.out, resolved.format)?;
        Ok((report, files))
    });
    match result {
        Ok((report, files)) => {
            for line in &report.summary {
                println!("{line}");
            }
            for f in &files {
                println!("wrote {}", f.display());
            }
            if report.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
