//! Exact expectations of trace monomials `m_lambda = prod_i tr G^{lambda_i}`.
//!
//! For a fixed total degree `p` the expectations of all monomials indexed by
//! partitions of `p` obey a closed linear system `d/dtau E[m] = A E[m]` with
//! `E[m](0) = n^{#parts}`. A row of `A` collects, for every part `q` of the
//! partition, the drift of `tr G^q`,
//!
//! ```text
//! (q + q(q-1)(n-2)/alpha_n) m_lambda + (q n/alpha_n) sum_{s=1}^{q-1} m_{lambda: q -> (s, q-s)}
//! ```
//!
//! and, for every unordered pair of parts `(q, r)`, their covariation
//!
//! ```text
//! (4 q r/alpha_n) (n m_{lambda: (q, r) -> q+r} - m_lambda).
//! ```

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::alpha;
use crate::sde::MAX_DEGREE;

/// Largest admissible `lambda_max * tau`.
pub const MAX_EXPONENT: f64 = 700.0;

/// Non-increasing list of positive parts.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<u32>", into = "Vec<u32>")]
pub struct Partition(Vec<u32>);

impl Partition {
    pub fn new(mut parts: Vec<u32>) -> Result<Self> {
        if parts.is_empty() || parts.contains(&0) {
            return Err(Error::Domain("partition parts must be positive".into()));
        }
        parts.sort_unstable_by(|a, b| b.cmp(a));
        Ok(Self(parts))
    }

    pub fn parts(&self) -> &[u32] {
        &self.0
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `(p)`, i.e. `tr G^p`.
    pub fn single(p: u32) -> Self {
        Self(vec![p])
    }

    /// `(1, ..., 1)`, i.e. `(tr G)^p`.
    pub fn ones(p: u32) -> Self {
        Self(vec![1; p as usize])
    }

    fn replaced(&self, remove: &[usize], add: &[u32]) -> Self {
        let mut parts: Vec<u32> = self
            .0
            .iter()
            .enumerate()
            .filter(|(i, _)| !remove.contains(i))
            .map(|(_, &q)| q)
            .collect();
        parts.extend_from_slice(add);
        parts.sort_unstable_by(|a, b| b.cmp(a));
        Self(parts)
    }
}

impl TryFrom<Vec<u32>> for Partition {
    type Error = Error;
    fn try_from(v: Vec<u32>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<Partition> for Vec<u32> {
    fn from(p: Partition) -> Self {
        p.0
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: Vec<String> = self.0.iter().map(|q| q.to_string()).collect();
        f.write_str(&s.join("+"))
    }
}

impl std::str::FromStr for Partition {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let parts = s
            .split('+')
            .map(|t| t.trim().parse::<u32>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Domain(format!("bad partition '{s}': {e}")))?;
        Self::new(parts)
    }
}

fn check_degree(p: u32) -> Result<()> {
    if p < 1 || p as usize > MAX_DEGREE {
        return Err(Error::Domain(format!(
            "degree p must lie in 1..={MAX_DEGREE}, got {p}"
        )));
    }
    Ok(())
}

/// All partitions of `p` in reverse-lexicographic order, `(p)` first and
/// `(1, ..., 1)` last.
pub fn partitions(p: u32) -> Result<Vec<Partition>> {
    check_degree(p)?;
    let mut out = Vec::new();
    let mut current = vec![p];
    loop {
        out.push(Partition(current.clone()));
        // rightmost part larger than one
        let Some(k) = current.iter().rposition(|&q| q > 1) else {
            break;
        };
        let mut rest: u32 = current[k + 1..].iter().sum::<u32>() + 1;
        let v = current[k] - 1;
        current.truncate(k);
        current.push(v);
        while rest > 0 {
            let take = rest.min(v);
            current.push(take);
            rest -= take;
        }
    }
    Ok(out)
}

/// Generator of the degree-`p` moment system on the canonical basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorMatrix {
    pub n: usize,
    pub p: u32,
    pub basis: Vec<Partition>,
    /// Row-major; row `i` is the rate of `E[m_{basis[i]}]`.
    pub entries: Vec<f64>,
}

impl GeneratorMatrix {
    pub fn size(&self) -> usize {
        self.basis.len()
    }

    pub fn get(&self, row: &Partition, col: &Partition) -> Option<f64> {
        let i = self.index_of(row)?;
        let j = self.index_of(col)?;
        Some(self.entries[i * self.size() + j])
    }

    pub fn index_of(&self, lambda: &Partition) -> Option<usize> {
        self.basis.iter().position(|b| b == lambda)
    }

    pub fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.size(), self.size(), &self.entries)
    }

    /// `E[m](0) = n^{#parts}`.
    pub fn initial_vector(&self) -> Vec<f64> {
        self.basis
            .iter()
            .map(|b| (self.n as f64).powi(b.len() as i32))
            .collect()
    }

    /// Largest real part among the eigenvalues.
    pub fn dominant_eigenvalue(&self) -> f64 {
        self.to_nalgebra()
            .complex_eigenvalues()
            .iter()
            .map(|z| z.re)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

pub fn generator_matrix(n: usize, p: u32) -> Result<GeneratorMatrix> {
    if n < 2 {
        return Err(Error::Dimension(n));
    }
    let basis = partitions(p)?;
    let size = basis.len();
    let a = alpha(n);
    let nf = n as f64;
    let mut entries = vec![0.0; size * size];
    let index = |lambda: &Partition| {
        basis
            .iter()
            .position(|b| b == lambda)
            .expect("closed basis")
    };

    for (row, lambda) in basis.iter().enumerate() {
        let parts = lambda.parts();
        for (i, &q) in parts.iter().enumerate() {
            let qf = q as f64;
            entries[row * size + row] += qf + qf * (qf - 1.0) * (nf - 2.0) / a;
            for s in 1..q {
                let col = index(&lambda.replaced(&[i], &[s, q - s]));
                entries[row * size + col] += qf * nf / a;
            }
        }
        for i in 0..parts.len() {
            for j in (i + 1)..parts.len() {
                let w = 4.0 * parts[i] as f64 * parts[j] as f64 / a;
                entries[row * size + row] -= w;
                let col = index(&lambda.replaced(&[i, j], &[parts[i] + parts[j]]));
                entries[row * size + col] += w * nf;
            }
        }
    }
    Ok(GeneratorMatrix {
        n,
        p,
        basis,
        entries,
    })
}

/// Expected monomial values at one time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentTable {
    pub n: usize,
    pub p: u32,
    pub tau: f64,
    pub values: Vec<(Partition, f64)>,
    /// Largest relative disagreement between the matrix-exponential and the
    /// adaptive ODE solutions.
    pub cross_check_rel_diff: f64,
}

impl MomentTable {
    pub fn get(&self, lambda: &Partition) -> Option<f64> {
        self.values
            .iter()
            .find(|(b, _)| b == lambda)
            .map(|(_, v)| *v)
    }

    /// `E tr G^p`.
    pub fn trace_of_power(&self) -> f64 {
        self.get(&Partition::single(self.p))
            .expect("basis contains (p)")
    }

    /// `E (tr G)^p`.
    pub fn power_of_trace(&self) -> f64 {
        self.get(&Partition::ones(self.p))
            .expect("basis contains (1^p)")
    }
}

fn range_guard(lambda_max: f64, tau: f64, what: &str) -> Result<()> {
    if !(tau >= 0.0) || !tau.is_finite() {
        return Err(Error::Domain(format!("tau must be >= 0, got {tau}")));
    }
    if lambda_max * tau > MAX_EXPONENT {
        return Err(Error::Range {
            what: format!(
                "{what}: growth exponent {:.3} * tau {tau} exceeds {MAX_EXPONENT}",
                lambda_max
            ),
            max_tau: MAX_EXPONENT / lambda_max,
        });
    }
    Ok(())
}

/// `exp(tau A) m(0)` on the degree-`p` basis, computed by a Padé
/// scaling-and-squaring exponential and cross-checked by [`integrate_moments_ode`].
pub fn exact_moments(n: usize, p: u32, tau: f64) -> Result<MomentTable> {
    let gen = generator_matrix(n, p)?;
    let lambda_max = gen
        .dominant_eigenvalue()
        .max(intermittency_exponent(n, p as f64));
    range_guard(lambda_max, tau, "exact_moments")?;
    let via_exp = moments_by_exponential(&gen, tau);
    let via_ode = integrate_moments_ode(&gen, tau, 1e-13);
    let rel = via_exp
        .iter()
        .zip(&via_ode)
        .map(|(a, b)| ((a - b) / a.abs().max(f64::MIN_POSITIVE)).abs())
        .fold(0.0, f64::max);
    Ok(MomentTable {
        n,
        p,
        tau,
        values: gen.basis.iter().cloned().zip(via_exp).collect(),
        cross_check_rel_diff: rel,
    })
}

/// `exp(tau A) m(0)` via nalgebra's matrix exponential.
pub fn moments_by_exponential(gen: &GeneratorMatrix, tau: f64) -> Vec<f64> {
    if tau == 0.0 {
        return gen.initial_vector();
    }
    let e = (gen.to_nalgebra() * tau).exp();
    let v = e * DVector::from_vec(gen.initial_vector());
    v.iter().copied().collect()
}

/// Solves `y' = A y`, `y(0) = m(0)` with an adaptive Dormand–Prince 5(4)
/// method under a mixed relative/absolute tolerance `rtol`.
pub fn integrate_moments_ode(gen: &GeneratorMatrix, tau: f64, rtol: f64) -> Vec<f64> {
    let a = gen.to_nalgebra();
    let y0 = DVector::from_vec(gen.initial_vector());
    dormand_prince(|y| &a * y, y0, tau, rtol)
        .iter()
        .copied()
        .collect()
}

fn dormand_prince<F>(f: F, y0: DVector<f64>, t_end: f64, rtol: f64) -> DVector<f64>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    const C2: f64 = 1.0 / 5.0;
    const A21: f64 = 1.0 / 5.0;
    const A31: f64 = 3.0 / 40.0;
    const A32: f64 = 9.0 / 40.0;
    const A41: f64 = 44.0 / 45.0;
    const A42: f64 = -56.0 / 15.0;
    const A43: f64 = 32.0 / 9.0;
    const A51: f64 = 19372.0 / 6561.0;
    const A52: f64 = -25360.0 / 2187.0;
    const A53: f64 = 64448.0 / 6561.0;
    const A54: f64 = -212.0 / 729.0;
    const A61: f64 = 9017.0 / 3168.0;
    const A62: f64 = -355.0 / 33.0;
    const A63: f64 = 46732.0 / 5247.0;
    const A64: f64 = 49.0 / 176.0;
    const A65: f64 = -5103.0 / 18656.0;
    const B1: f64 = 35.0 / 384.0;
    const B3: f64 = 500.0 / 1113.0;
    const B4: f64 = 125.0 / 192.0;
    const B5: f64 = -2187.0 / 6784.0;
    const B6: f64 = 11.0 / 84.0;
    const E1: f64 = 71.0 / 57600.0;
    const E3: f64 = -71.0 / 16695.0;
    const E4: f64 = 71.0 / 1920.0;
    const E5: f64 = -17253.0 / 339200.0;
    const E6: f64 = 22.0 / 525.0;
    const E7: f64 = -1.0 / 40.0;
    let _ = C2;

    let mut y = y0;
    if t_end <= 0.0 {
        return y;
    }
    let mut t = 0.0;
    let mut h = (t_end * 1e-3).min(1e-2);
    let mut k1 = f(&y);
    while t < t_end {
        if t + h > t_end {
            h = t_end - t;
        }
        let k2 = f(&(&y + &k1 * (h * A21)));
        let k3 = f(&(&y + &k1 * (h * A31) + &k2 * (h * A32)));
        let k4 = f(&(&y + &k1 * (h * A41) + &k2 * (h * A42) + &k3 * (h * A43)));
        let k5 = f(&(&y + &k1 * (h * A51) + &k2 * (h * A52) + &k3 * (h * A53) + &k4 * (h * A54)));
        let k6 = f(&(&y
            + &k1 * (h * A61)
            + &k2 * (h * A62)
            + &k3 * (h * A63)
            + &k4 * (h * A64)
            + &k5 * (h * A65)));
        let y_new = &y + (&k1 * B1 + &k3 * B3 + &k4 * B4 + &k5 * B5 + &k6 * B6) * h;
        let k7 = f(&y_new);
        let err_vec = (&k1 * E1 + &k3 * E3 + &k4 * E4 + &k5 * E5 + &k6 * E6 + &k7 * E7) * h;
        let err = err_vec
            .iter()
            .zip(y.iter().zip(y_new.iter()))
            .map(|(e, (a, b))| {
                let scale = rtol * (1.0 + a.abs().max(b.abs()));
                (e / scale).powi(2)
            })
            .sum::<f64>()
            .sqrt()
            / (err_vec.len() as f64).sqrt();
        if err <= 1.0 {
            t += h;
            y = y_new;
            k1 = k7;
        }
        let factor = if err == 0.0 {
            5.0
        } else {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        };
        h *= factor;
    }
    y
}

/// `lambda_1 = 2 + 4/(n+2)` and `lambda_2 = 2 - 2/(n-1)`, the eigenvalues of
/// the degree-2 system.
pub fn pair_eigenvalues(n: usize) -> (f64, f64) {
    let nf = n as f64;
    (2.0 + 4.0 / (nf + 2.0), 2.0 - 2.0 / (nf - 1.0))
}

/// Closed form of `(E (tr G)^2, E tr G^2)`.
pub fn pair_closed_form(n: usize, tau: f64) -> Result<(f64, f64)> {
    if n < 2 {
        return Err(Error::Dimension(n));
    }
    let (l1, l2) = pair_eigenvalues(n);
    range_guard(l1, tau, "pair_closed_form")?;
    let nf = n as f64;
    let top = (nf * nf + 2.0 * nf) * (l1 * tau).exp();
    let low = nf * (nf - 1.0) * (l2 * tau).exp();
    Ok(((top + 2.0 * low) / 3.0, (top - low) / 3.0))
}

/// `p + 2p(p-1)/(n+2)`.
pub fn intermittency_exponent(n: usize, p: f64) -> f64 {
    let nf = n as f64;
    p + 2.0 * p * (p - 1.0) / (nf + 2.0)
}

/// `(n e^{r tau}, n^p e^{r tau})` with `r = intermittency_exponent(n, p)`.
pub fn moment_bounds(n: usize, p: u32, tau: f64) -> Result<(f64, f64)> {
    if n < 2 {
        return Err(Error::Dimension(n));
    }
    if p < 1 {
        return Err(Error::Domain("p must be >= 1".into()));
    }
    let r = intermittency_exponent(n, p as f64);
    range_guard(r, tau, "moment_bounds")?;
    let growth = (r * tau).exp();
    let nf = n as f64;
    Ok((nf * growth, nf.powi(p as i32) * growth))
}

/// `E (tr G)^p / (n e^tau)^{1 + (n+4)(p-1)/(n+2)}`.
pub fn linearized_exponent_ratio(n: usize, p: u32, tau: f64) -> Result<f64> {
    let table = exact_moments(n, p, tau)?;
    let nf = n as f64;
    let k = 1.0 + (nf + 4.0) * (p as f64 - 1.0) / (nf + 2.0);
    Ok(table.power_of_trace() / (nf * tau.exp()).powf(k))
}
