//! Time stepping of `dF = F dB`, `F(0) = id`.
//!
//! Because `E[dB dB] = 0` the Itô and Stratonovich readings of the equation
//! coincide, so the plain Euler update `F + F dB` is consistent. The
//! exponential update `F exp(dB)` stays on the determinant-one group up to
//! the tolerance of the matrix exponential.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    gram_unchecked, log_det, matrix_exp_unchecked, trace_powers, GramSummary, SquareMatrix,
};
use crate::noise::{
    noise_coefficients, IncrementSource, IsotropicSource, NoiseCoefficients, NoiseIncrement,
};
use crate::rng::RngStream;

/// Entries beyond this magnitude mark a trajectory as diverged.
pub const OVERFLOW_LIMIT: f64 = 1e300;

/// Default tolerance of the matrix exponential inside the exponential step.
pub const DEFAULT_EXP_TOL: f64 = 1e-12;

/// Highest trace power the moment basis supports.
pub const MAX_DEGREE: usize = 8;

const MAX_STEPS: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Euler,
    #[default]
    Exponential,
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Euler => "euler",
            Scheme::Exponential => "exponential",
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euler" => Ok(Scheme::Euler),
            "exponential" | "exp" => Ok(Scheme::Exponential),
            other => Err(Error::Domain(format!("unknown scheme '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryConfig {
    pub n: usize,
    pub tau_end: f64,
    pub dt: f64,
    #[serde(default)]
    pub scheme: Scheme,
    /// Highest trace power recorded at checkpoints.
    pub p_max: usize,
    /// Sorted times in `[0, tau_end]`; empty means `[tau_end]`.
    #[serde(default)]
    pub checkpoints: Vec<f64>,
    pub master_seed: u64,
    #[serde(default)]
    pub stream_index: u64,
    #[serde(default = "default_exp_tol")]
    pub exp_tol: f64,
}

fn default_exp_tol() -> f64 {
    DEFAULT_EXP_TOL
}

impl TrajectoryConfig {
    pub fn new(
        n: usize,
        tau_end: f64,
        dt: f64,
        scheme: Scheme,
        p_max: usize,
        master_seed: u64,
    ) -> Self {
        Self {
            n,
            tau_end,
            dt,
            scheme,
            p_max,
            checkpoints: Vec::new(),
            master_seed,
            stream_index: 0,
            exp_tol: DEFAULT_EXP_TOL,
        }
    }

    pub fn with_checkpoints(mut self, checkpoints: Vec<f64>) -> Self {
        self.checkpoints = checkpoints;
        self
    }

    /// Validates the configuration and snaps checkpoints to step boundaries.
    pub fn plan(&self) -> Result<StepPlan> {
        if self.n < 2 {
            return Err(Error::Dimension(self.n));
        }
        if !self.tau_end.is_finite() || self.tau_end <= 0.0 {
            return Err(Error::EmptyHorizon);
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::Config(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if self.p_max < 1 || self.p_max > MAX_DEGREE {
            return Err(Error::Config(format!(
                "p_max must lie in 1..={MAX_DEGREE}, got {}",
                self.p_max
            )));
        }
        if !(self.exp_tol > 0.0 && self.exp_tol <= 1e-6) {
            return Err(Error::Config(format!(
                "exp_tol {} outside (0, 1e-6]",
                self.exp_tol
            )));
        }
        let ratio = self.tau_end / self.dt;
        if ratio > MAX_STEPS {
            return Err(Error::Config(format!("tau_end/dt = {ratio:e} exceeds 1e8")));
        }
        let steps = ratio.round().max(1.0) as u64;
        let requested: Vec<f64> = if self.checkpoints.is_empty() {
            vec![self.tau_end]
        } else {
            self.checkpoints.clone()
        };
        let mut indices = Vec::with_capacity(requested.len());
        let mut max_snap_error: f64 = 0.0;
        for &t in &requested {
            if !t.is_finite() || t < 0.0 || t > self.tau_end {
                return Err(Error::Config(format!(
                    "checkpoint {t} outside [0, {}]",
                    self.tau_end
                )));
            }
            let k = ((t / self.dt).round() as u64).min(steps);
            if let Some(&prev) = indices.last() {
                if k <= prev {
                    return Err(Error::Config(format!(
                        "checkpoints must be increasing and at least dt apart (at {t})"
                    )));
                }
            }
            max_snap_error = max_snap_error.max((k as f64 * self.dt - t).abs());
            indices.push(k);
        }
        Ok(StepPlan {
            steps,
            checkpoint_steps: indices,
            requested,
            max_snap_error,
        })
    }
}

/// Validated step schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepPlan {
    pub steps: u64,
    pub checkpoint_steps: Vec<u64>,
    pub requested: Vec<f64>,
    /// Largest distance between a requested and a snapped checkpoint.
    pub max_snap_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    /// One summary per checkpoint, at the snapped time.
    pub checkpoints: Vec<GramSummary>,
    pub final_log_det: f64,
    /// Time of the step at which an entry left the finite range.
    pub diverged_at: Option<f64>,
    pub config: TrajectoryConfig,
}

impl TrajectoryRecord {
    pub fn diverged(&self) -> bool {
        self.diverged_at.is_some()
    }
}

/// `F + F dB`.
pub fn step_euler(f: &SquareMatrix, db: &NoiseIncrement) -> Result<SquareMatrix> {
    check_step_input(f, db)?;
    let out = euler_unchecked(f, db);
    check_overflow(out)
}

/// `F exp(dB)`.
pub fn step_exponential(f: &SquareMatrix, db: &NoiseIncrement, tol: f64) -> Result<SquareMatrix> {
    check_step_input(f, db)?;
    if !(tol > 0.0 && tol <= 1e-6) {
        return Err(Error::Domain(format!(
            "matrix_exp tol {tol} outside (0, 1e-6]"
        )));
    }
    let out = exponential_unchecked(f, db, tol);
    check_overflow(out)
}

fn check_step_input(f: &SquareMatrix, db: &NoiseIncrement) -> Result<()> {
    if !f.is_finite() {
        return Err(Error::NonFinite("state F"));
    }
    if f.dim() != db.dim() {
        return Err(Error::DimensionMismatch {
            expected: f.dim(),
            got: db.dim(),
        });
    }
    Ok(())
}

fn check_overflow(out: SquareMatrix) -> Result<SquareMatrix> {
    if is_overflowed(&out) {
        return Err(Error::Domain(
            "trajectory diverged: entry beyond 1e300".into(),
        ));
    }
    Ok(out)
}

#[inline]
fn is_overflowed(f: &SquareMatrix) -> bool {
    f.as_slice().iter().any(|x| !(x.abs() <= OVERFLOW_LIMIT))
}

#[inline]
fn euler_unchecked(f: &SquareMatrix, db: &NoiseIncrement) -> SquareMatrix {
    let b = db.total();
    let mut fb = SquareMatrix::zeros_unchecked(f.dim());
    f.mul_into(&b, &mut fb);
    f + &fb
}

#[inline]
fn exponential_unchecked(f: &SquareMatrix, db: &NoiseIncrement, tol: f64) -> SquareMatrix {
    let e = matrix_exp_unchecked(&db.total(), tol);
    let mut out = SquareMatrix::zeros_unchecked(f.dim());
    f.mul_into(&e, &mut out);
    out
}

/// What an observer sees before each step: step index, the state and the
/// increment about to be applied.
pub struct StepView<'a> {
    pub step: u64,
    pub tau: f64,
    pub state: &'a SquareMatrix,
    pub increment: &'a NoiseIncrement,
}

/// Runs one trajectory with increments from the isotropic stream
/// `(master_seed, stream_index)`.
pub fn run_trajectory(config: &TrajectoryConfig) -> Result<TrajectoryRecord> {
    let mut source = IsotropicSource::new(RngStream::new(config.master_seed, config.stream_index));
    run_trajectory_with(config, &mut source, |_| {})
}

/// Runs one trajectory with a caller-supplied increment source, calling
/// `observer` before every step.
pub fn run_trajectory_with<S, O>(
    config: &TrajectoryConfig,
    source: &mut S,
    mut observer: O,
) -> Result<TrajectoryRecord>
where
    S: IncrementSource,
    O: FnMut(StepView<'_>),
{
    let plan = config.plan()?;
    let coeffs = noise_coefficients(config.n)?;
    Ok(integrate(config, &plan, &coeffs, source, &mut observer))
}

pub(crate) fn integrate<S, O>(
    config: &TrajectoryConfig,
    plan: &StepPlan,
    coeffs: &NoiseCoefficients,
    source: &mut S,
    observer: &mut O,
) -> TrajectoryRecord
where
    S: IncrementSource,
    O: FnMut(StepView<'_>),
{
    let n = config.n;
    let dt = config.dt;
    let mut f = SquareMatrix::identity_unchecked(n);
    let mut checkpoints = Vec::with_capacity(plan.checkpoint_steps.len());
    let mut next_cp = 0usize;
    let mut diverged_at = None;

    let record = |f: &SquareMatrix, k: u64| -> GramSummary {
        let g = gram_unchecked(f);
        GramSummary {
            trace_powers: trace_powers(&g, config.p_max),
            log_det: log_det(f).unwrap_or(f64::NEG_INFINITY),
            tau: k as f64 * dt,
        }
    };

    'steps: for k in 0..=plan.steps {
        while next_cp < plan.checkpoint_steps.len() && plan.checkpoint_steps[next_cp] == k {
            checkpoints.push(record(&f, k));
            next_cp += 1;
        }
        if k == plan.steps {
            break;
        }
        let inc = source.next_increment(coeffs, dt);
        observer(StepView {
            step: k,
            tau: k as f64 * dt,
            state: &f,
            increment: &inc,
        });
        f = match config.scheme {
            Scheme::Euler => euler_unchecked(&f, &inc),
            Scheme::Exponential => exponential_unchecked(&f, &inc, config.exp_tol),
        };
        if is_overflowed(&f) {
            diverged_at = Some((k + 1) as f64 * dt);
            break 'steps;
        }
    }

    let final_log_det = if diverged_at.is_some() {
        f64::NAN
    } else {
        log_det(&f).unwrap_or(f64::NEG_INFINITY)
    };
    TrajectoryRecord {
        checkpoints,
        final_log_det,
        diverged_at,
        config: config.clone(),
    }
}
