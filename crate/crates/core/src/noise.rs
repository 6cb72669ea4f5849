//! The isotropic Brownian motion on the trace-free matrices.
//!
//! An increment over a step `dt` is `dB = d_sym + d_skew` with
//!
//! * `d_sym = sqrt(n dt / alpha_n) * S0`, `S0` the trace-free part of
//!   `(W + W^T)/2`,
//! * `d_skew = sqrt(dt / (n - 1)) * (W' - W'^T)/2`,
//!
//! where `W`, `W'` are independent matrices of i.i.d. standard normals and
//! `alpha_n = (n - 1)(n + 2)`. In index form the symmetric part has
//! covariance `dt [n/alpha_n (d_ik d_jl + d_il d_jk)/2 - 1/alpha_n d_ij d_kl]`
//! and the skew part `dt (d_ik d_jl - d_il d_jk) / (2(n - 1))`, which are the
//! unique O(n)-invariant choices giving `E[dB dB] = 0`, `E[dB^T dB] = dt id`
//! and `E[d_sym^2] = -E[d_skew^2] = dt id / 2`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::SquareMatrix;
use crate::parallel::Workers;
use crate::rng::{RngStream, StreamRng};
use crate::stats::{batch_count, batch_range, EstimatorSummary, Moments};

/// `alpha_n = (n - 1)(n + 2)`.
pub fn alpha(n: usize) -> f64 {
    (n as f64 - 1.0) * (n as f64 + 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseCoefficients {
    pub n: usize,
    pub alpha_n: f64,
    /// Scale of the trace-free symmetric part per unit `sqrt(dt)`.
    pub c_sym: f64,
    /// Scale of the skew part per unit `sqrt(dt)`.
    pub c_skew: f64,
}

pub fn noise_coefficients(n: usize) -> Result<NoiseCoefficients> {
    if n < 2 {
        return Err(Error::Dimension(n));
    }
    let alpha_n = alpha(n);
    Ok(NoiseCoefficients {
        n,
        alpha_n,
        c_sym: (n as f64 / alpha_n).sqrt(),
        c_skew: (1.0 / (n as f64 - 1.0)).sqrt(),
    })
}

/// One increment of the driving noise, split into symmetric and skew parts.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseIncrement {
    pub d_sym: SquareMatrix,
    pub d_skew: SquareMatrix,
    pub dt: f64,
}

impl NoiseIncrement {
    pub fn zero(n: usize, dt: f64) -> Result<Self> {
        Ok(Self {
            d_sym: SquareMatrix::zeros(n)?,
            d_skew: SquareMatrix::zeros(n)?,
            dt,
        })
    }

    /// Builds an increment from given parts, checking their symmetry.
    pub fn from_parts(d_sym: SquareMatrix, d_skew: SquareMatrix, dt: f64) -> Result<Self> {
        if d_sym.dim() != d_skew.dim() {
            return Err(Error::DimensionMismatch {
                expected: d_sym.dim(),
                got: d_skew.dim(),
            });
        }
        if !(dt > 0.0) {
            return Err(Error::Domain(format!("dt must be positive, got {dt}")));
        }
        if d_sym != d_sym.transpose() {
            return Err(Error::NotSymmetric {
                what: "d_sym",
                asym: d_sym.relative_asymmetry(),
            });
        }
        if d_skew != d_skew.transpose().scale(-1.0) {
            return Err(Error::Domain("d_skew must be skew-symmetric".into()));
        }
        Ok(Self { d_sym, d_skew, dt })
    }

    pub fn dim(&self) -> usize {
        self.d_sym.dim()
    }

    /// `dB = d_sym + d_skew`.
    pub fn total(&self) -> SquareMatrix {
        &self.d_sym + &self.d_skew
    }
}

/// Draws one increment.
pub fn sample_increment<R: Rng + ?Sized>(
    coeffs: &NoiseCoefficients,
    dt: f64,
    rng: &mut R,
) -> Result<NoiseIncrement> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::Domain(format!("dt must be positive, got {dt}")));
    }
    Ok(sample_increment_unchecked(coeffs, dt, rng))
}

pub(crate) fn sample_increment_unchecked<R: Rng + ?Sized>(
    coeffs: &NoiseCoefficients,
    dt: f64,
    rng: &mut R,
) -> NoiseIncrement {
    let n = coeffs.n;
    let mut w = [0.0f64; 64];
    let mut w2 = [0.0f64; 64];
    let mut heap_w;
    let mut heap_w2;
    let (w, w2): (&mut [f64], &mut [f64]) = if n * n <= 64 {
        (&mut w[..n * n], &mut w2[..n * n])
    } else {
        heap_w = vec![0.0; n * n];
        heap_w2 = vec![0.0; n * n];
        (&mut heap_w[..], &mut heap_w2[..])
    };
    for x in w.iter_mut() {
        *x = rng.sample(StandardNormal);
    }
    for x in w2.iter_mut() {
        *x = rng.sample(StandardNormal);
    }

    let sym_scale = (n as f64 * dt / coeffs.alpha_n).sqrt();
    let skew_scale = (dt / (n as f64 - 1.0)).sqrt();

    let mut d_sym = SquareMatrix::zeros_unchecked(n);
    let mut d_skew = SquareMatrix::zeros_unchecked(n);
    let mut tr = 0.0;
    for i in 0..n {
        tr += w[i * n + i];
    }
    let shift = tr / n as f64;
    for i in 0..n {
        d_sym.set(i, i, sym_scale * (w[i * n + i] - shift));
        for j in (i + 1)..n {
            let s = sym_scale * 0.5 * (w[i * n + j] + w[j * n + i]);
            d_sym.set(i, j, s);
            d_sym.set(j, i, s);
            let a = skew_scale * 0.5 * (w2[i * n + j] - w2[j * n + i]);
            d_skew.set(i, j, a);
            d_skew.set(j, i, -a);
        }
    }
    NoiseIncrement { d_sym, d_skew, dt }
}

/// Supplies increments to the integrators.
pub trait IncrementSource {
    fn next_increment(&mut self, coeffs: &NoiseCoefficients, dt: f64) -> NoiseIncrement;
}

/// Increments sampled from a counter-based stream.
#[derive(Debug, Clone)]
pub struct IsotropicSource {
    rng: StreamRng,
}

impl IsotropicSource {
    pub fn new(stream: RngStream) -> Self {
        Self {
            rng: stream.generator(),
        }
    }
}

impl IncrementSource for IsotropicSource {
    #[inline]
    fn next_increment(&mut self, coeffs: &NoiseCoefficients, dt: f64) -> NoiseIncrement {
        sample_increment_unchecked(coeffs, dt, &mut self.rng)
    }
}

/// Always returns the zero increment; the path stays at the identity.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroNoise;

impl IncrementSource for ZeroNoise {
    fn next_increment(&mut self, coeffs: &NoiseCoefficients, dt: f64) -> NoiseIncrement {
        NoiseIncrement {
            d_sym: SquareMatrix::zeros_unchecked(coeffs.n),
            d_skew: SquareMatrix::zeros_unchecked(coeffs.n),
            dt,
        }
    }
}

/// The two invariant bilinear forms of the symmetric noise part.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovariationKind {
    /// `d[tr(G B_sym) tr(H B_sym)]`
    TraceTrace,
    /// `d[tr(G B_sym H B_sym)]`
    Sandwich,
}

/// Rate per unit time of the covariation of the symmetric noise part.
pub fn theoretical_covariation(
    g: &SquareMatrix,
    h: &SquareMatrix,
    kind: CovariationKind,
    n: usize,
) -> Result<f64> {
    check_pair(g, h, n)?;
    let a = alpha(n);
    let nf = n as f64;
    let tr_gh = g.trace_product(h);
    let tg = g.trace();
    let th = h.trace();
    Ok(match kind {
        CovariationKind::TraceTrace => (nf * tr_gh - tg * th) / a,
        CovariationKind::Sandwich => ((nf - 2.0) * tr_gh + nf * tg * th) / (2.0 * a),
    })
}

fn check_pair(g: &SquareMatrix, h: &SquareMatrix, n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::Dimension(n));
    }
    for m in [g, h] {
        if m.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: m.dim(),
            });
        }
    }
    g.check_symmetric("covariation test matrix G", 1e-12)?;
    h.check_symmetric("covariation test matrix H", 1e-12)?;
    Ok(())
}

/// Per-sample value of the covariation functional, divided by `dt`.
fn covariation_sample(
    g: &SquareMatrix,
    h: &SquareMatrix,
    kind: CovariationKind,
    inc: &NoiseIncrement,
) -> f64 {
    let s = &inc.d_sym;
    match kind {
        CovariationKind::TraceTrace => g.trace_product(s) * h.trace_product(s) / inc.dt,
        CovariationKind::Sandwich => (g * s).trace_product(&(h * s)) / inc.dt,
    }
}

/// Monte Carlo estimate of [`theoretical_covariation`] from sampled increments.
///
/// Sample `i` is drawn from stream `(seed, i)`.
#[allow(clippy::too_many_arguments)]
pub fn empirical_covariation(
    g: &SquareMatrix,
    h: &SquareMatrix,
    kind: CovariationKind,
    n: usize,
    dt: f64,
    n_samples: usize,
    seed: u64,
    workers: Workers,
) -> Result<EstimatorSummary> {
    check_pair(g, h, n)?;
    if n_samples < 2 {
        return Err(Error::Domain("need at least 2 samples".into()));
    }
    let coeffs = noise_coefficients(n)?;
    if !(dt > 0.0) {
        return Err(Error::Domain(format!("dt must be positive, got {dt}")));
    }
    let batches = batch_count(n_samples);
    let moments = workers.map_indexed(batches, |b| {
        let mut m = Moments::default();
        for i in batch_range(n_samples, batches, b) {
            let mut rng = RngStream::new(seed, i as u64).generator();
            let inc = sample_increment_unchecked(&coeffs, dt, &mut rng);
            m.push(covariation_sample(g, h, kind, &inc));
        }
        m
    });
    Ok(EstimatorSummary::from_batches(&moments, 0, seed))
}

/// One line of the noise-law harness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LawCheck {
    pub name: String,
    pub theory: f64,
    pub estimate: EstimatorSummary,
}

impl LawCheck {
    pub fn passes(&self, k: f64) -> bool {
        // Degenerate statistics (zero up to roundoff) carry a roundoff-sized
        // stderr, so agreement to roundoff always passes.
        let roundoff =
            (self.estimate.mean - self.theory).abs() <= 1e-12 * self.theory.abs().max(1.0);
        roundoff || (self.estimate.stderr > 0.0 && self.estimate.within(self.theory, k))
    }
}

/// Test pairs for the two bilinear forms: identity, a symmetric basis
/// element, a trace-free diagonal and a fixed generic pair.
pub fn law_test_pairs(n: usize) -> Result<Vec<(String, SquareMatrix, SquareMatrix)>> {
    let id = SquareMatrix::identity(n)?;
    let mut e01 = SquareMatrix::zeros(n)?;
    e01.set(0, 1, 1.0);
    e01.set(1, 0, 1.0);
    let mut d = vec![0.0; n];
    d[0] = 1.0;
    d[1] = -1.0;
    let diag = SquareMatrix::diag(&d)?;
    let g = SquareMatrix::from_fn_unchecked(n, |i, j| {
        let (a, b) = (i.min(j) as f64, i.max(j) as f64);
        1.0 / (1.0 + a + b) + if i == j { 0.5 * (a + 1.0) } else { 0.0 }
    });
    let h = SquareMatrix::from_fn_unchecked(n, |i, j| {
        let (a, b) = (i.min(j) as f64, i.max(j) as f64);
        ((a + 2.0 * b) * 0.7).sin()
    });
    Ok(vec![
        ("id,id".into(), id.clone(), id),
        ("e01+e10,e01+e10".into(), e01.clone(), e01),
        ("diag(1,-1,0..),same".into(), diag.clone(), diag),
        ("generic G,H".into(), g, h),
    ])
}

/// Runs every noise-law statistic on one sample of `n_samples` increments:
/// entrywise mean, `E[dB^T dB] = dt id`, `E[dB dB] = 0`,
/// `E[d_sym^2] = -E[d_skew^2] = dt id/2`, zero sym/skew cross-covariance,
/// and both bilinear forms on [`law_test_pairs`].
pub fn noise_law_checks(
    n: usize,
    dt: f64,
    n_samples: usize,
    seed: u64,
    workers: Workers,
) -> Result<Vec<LawCheck>> {
    let coeffs = noise_coefficients(n)?;
    if !(dt > 0.0) {
        return Err(Error::Domain(format!("dt must be positive, got {dt}")));
    }
    if n_samples < 2 {
        return Err(Error::Domain("need at least 2 samples".into()));
    }
    let pairs = law_test_pairs(n)?;
    let upper_sym: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
    let upper_skew: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .collect();

    let mut names: Vec<(String, f64)> = Vec::new();
    for i in 0..n {
        for j in 0..n {
            names.push((format!("mean dB[{i},{j}]"), 0.0));
        }
    }
    for i in 0..n {
        for j in 0..n {
            names.push((
                format!("E[dB^T dB]/dt [{i},{j}]"),
                if i == j { 1.0 } else { 0.0 },
            ));
        }
    }
    for i in 0..n {
        for j in 0..n {
            names.push((format!("E[dB dB]/dt [{i},{j}]"), 0.0));
        }
    }
    for i in 0..n {
        for j in 0..n {
            names.push((
                format!("E[d_sym^2]/dt [{i},{j}]"),
                if i == j { 0.5 } else { 0.0 },
            ));
        }
    }
    for i in 0..n {
        for j in 0..n {
            names.push((
                format!("E[d_skew^2]/dt [{i},{j}]"),
                if i == j { -0.5 } else { 0.0 },
            ));
        }
    }
    names.push(("E tr(d_sym^2)/dt".into(), 0.5 * n as f64));
    for &(i, j) in &upper_sym {
        for &(k, l) in &upper_skew {
            names.push((format!("cov(d_sym[{i},{j}], d_skew[{k},{l}])/dt"), 0.0));
        }
    }
    for (label, g, h) in &pairs {
        for kind in [CovariationKind::TraceTrace, CovariationKind::Sandwich] {
            let theory = theoretical_covariation(g, h, kind, n)?;
            names.push((format!("{kind:?} {label}"), theory));
        }
    }
    let n_stats = names.len();

    let batches = batch_count(n_samples);
    let sqrt_dt = dt.sqrt();
    let per_batch = workers.map_indexed(batches, |b| {
        let mut acc = vec![Moments::default(); n_stats];
        let mut buf = Vec::with_capacity(n_stats);
        for idx in batch_range(n_samples, batches, b) {
            let mut rng = RngStream::new(seed, idx as u64).generator();
            let inc = sample_increment_unchecked(&coeffs, dt, &mut rng);
            let db = inc.total();
            let dbt = db.transpose();
            buf.clear();
            buf.extend(db.as_slice().iter().map(|x| x / sqrt_dt));
            buf.extend((&dbt * &db).as_slice().iter().map(|x| x / dt));
            buf.extend((&db * &db).as_slice().iter().map(|x| x / dt));
            buf.extend((&inc.d_sym * &inc.d_sym).as_slice().iter().map(|x| x / dt));
            buf.extend(
                (&inc.d_skew * &inc.d_skew)
                    .as_slice()
                    .iter()
                    .map(|x| x / dt),
            );
            buf.push(inc.d_sym.frobenius_sq() / dt);
            for &(i, j) in &upper_sym {
                for &(k, l) in &upper_skew {
                    buf.push(inc.d_sym.get(i, j) * inc.d_skew.get(k, l) / dt);
                }
            }
            for (_, g, h) in &pairs {
                for kind in [CovariationKind::TraceTrace, CovariationKind::Sandwich] {
                    buf.push(covariation_sample(g, h, kind, &inc));
                }
            }
            debug_assert_eq!(buf.len(), n_stats);
            for (m, &x) in acc.iter_mut().zip(&buf) {
                m.push(x);
            }
        }
        acc
    });

    Ok(names
        .into_iter()
        .enumerate()
        .map(|(k, (name, theory))| {
            let col: Vec<Moments> = per_batch.iter().map(|b| b[k]).collect();
            LawCheck {
                name,
                theory,
                estimate: EstimatorSummary::from_batches(&col, 0, seed),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn coefficients_examples() {
        let c2 = noise_coefficients(2).unwrap();
        assert_eq!(c2.alpha_n, 4.0);
        assert_relative_eq!(c2.c_sym, 0.5f64.sqrt(), max_relative = 1e-15);
        assert_eq!(c2.c_skew, 1.0);
        let c3 = noise_coefficients(3).unwrap();
        assert_eq!(c3.alpha_n, 10.0);
        assert_relative_eq!(c3.c_sym, 0.3f64.sqrt(), max_relative = 1e-15);
        assert_relative_eq!(c3.c_skew, 0.5f64.sqrt(), max_relative = 1e-15);
        assert_eq!(noise_coefficients(1), Err(Error::Dimension(1)));
    }

    #[test]
    fn sampled_parts_have_exact_structure() {
        let coeffs = noise_coefficients(4).unwrap();
        let mut rng = RngStream::new(1, 2).generator();
        for _ in 0..200 {
            let inc = sample_increment(&coeffs, 0.01, &mut rng).unwrap();
            assert_eq!(inc.d_sym, inc.d_sym.transpose());
            assert_eq!(inc.d_skew, inc.d_skew.transpose().scale(-1.0));
            assert!(inc.d_sym.trace().abs() <= 1e-14 * inc.d_sym.max_abs().max(1e-300) * 4.0);
        }
    }

    #[test]
    fn rejects_nonpositive_dt() {
        let coeffs = noise_coefficients(3).unwrap();
        let mut rng = RngStream::new(1, 0).generator();
        assert!(sample_increment(&coeffs, 0.0, &mut rng).is_err());
        assert!(sample_increment(&coeffs, -1.0, &mut rng).is_err());
    }

    #[test]
    fn theoretical_examples() {
        for n in 2..7 {
            let id = SquareMatrix::identity(n).unwrap();
            assert_eq!(
                theoretical_covariation(&id, &id, CovariationKind::TraceTrace, n).unwrap(),
                0.0
            );
            assert_relative_eq!(
                theoretical_covariation(&id, &id, CovariationKind::Sandwich, n).unwrap(),
                n as f64 / 2.0,
                max_relative = 1e-15
            );
        }
        let d = SquareMatrix::diag(&[1.0, -1.0, 0.0]).unwrap();
        assert_relative_eq!(
            theoretical_covariation(&d, &d, CovariationKind::TraceTrace, 3).unwrap(),
            0.6,
            max_relative = 1e-15
        );
        let e = SquareMatrix::from_rows(&[&[0.0, 1.0], &[1.0, 0.0]]).unwrap();
        assert_eq!(
            theoretical_covariation(&e, &e, CovariationKind::TraceTrace, 2).unwrap(),
            1.0
        );
    }

    #[test]
    fn theoretical_rejects_asymmetric() {
        let a = SquareMatrix::from_rows(&[&[0.0, 1.0], &[0.0, 0.0]]).unwrap();
        let id = SquareMatrix::identity(2).unwrap();
        assert!(matches!(
            theoretical_covariation(&a, &id, CovariationKind::Sandwich, 2),
            Err(Error::NotSymmetric { .. })
        ));
    }

    #[test]
    fn small_sample_smoke() {
        let id = SquareMatrix::identity(3).unwrap();
        let s = empirical_covariation(
            &id,
            &id,
            CovariationKind::Sandwich,
            3,
            0.1,
            10,
            5,
            Workers::Sequential,
        )
        .unwrap();
        assert!(s.mean.is_finite());
        assert!(s.stderr > 0.0);
        assert_eq!(s.n_paths, 10);
    }
}
