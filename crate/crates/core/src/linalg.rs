//! Small dense real matrices and the Gram/trace functionals built on them.
//!
//! Storage is row-major with inline capacity for `n <= 5`, so the stepping
//! loops in [`crate::sde`] never touch the heap for the dimensions that
//! matter in practice.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{Error, Result};

type Storage = SmallVec<[f64; 25]>;

/// Dense `n x n` real matrix, `n >= 2`, finite entries.
#[derive(Clone, PartialEq)]
pub struct SquareMatrix {
    n: usize,
    data: Storage,
}

impl fmt::Debug for SquareMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut list = f.debug_list();
        for i in 0..self.n {
            list.entry(&self.row(i));
        }
        list.finish()
    }
}

impl SquareMatrix {
    /// Builds a matrix from row-major entries.
    pub fn new(n: usize, entries: Vec<f64>) -> Result<Self> {
        if n < 2 {
            return Err(Error::Dimension(n));
        }
        if entries.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                got: entries.len(),
            });
        }
        if entries.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("matrix entries"));
        }
        Ok(Self {
            n,
            data: Storage::from_vec(entries),
        })
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let n = rows.len();
        let mut entries = Vec::with_capacity(n * n);
        for r in rows {
            if r.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: r.len(),
                });
            }
            entries.extend_from_slice(r);
        }
        Self::new(n, entries)
    }

    pub fn zeros(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::Dimension(n));
        }
        Ok(Self::zeros_unchecked(n))
    }

    pub fn identity(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::Dimension(n));
        }
        Ok(Self::identity_unchecked(n))
    }

    pub fn diag(d: &[f64]) -> Result<Self> {
        let n = d.len();
        let mut m = Self::zeros(n)?;
        for (i, &x) in d.iter().enumerate() {
            m.data[i * n + i] = x;
        }
        if !m.is_finite() {
            return Err(Error::NonFinite("diagonal"));
        }
        Ok(m)
    }

    pub(crate) fn zeros_unchecked(n: usize) -> Self {
        Self {
            n,
            data: smallvec::smallvec![0.0; n * n],
        }
    }

    pub(crate) fn identity_unchecked(n: usize) -> Self {
        let mut m = Self::zeros_unchecked(n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Row-major constructor without validation, for internal hot paths.
    pub(crate) fn from_fn_unchecked(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Storage::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        Self { n, data }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub(crate) fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn_unchecked(self.n, |i, j| self.get(j, i))
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    /// `tr(self * other)` without forming the product.
    pub fn trace_product(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.n, other.n);
        let n = self.n;
        let mut acc = 0.0;
        for i in 0..n {
            for k in 0..n {
                acc += self.data[i * n + k] * other.data[k * n + i];
            }
        }
        acc
    }

    /// Squared Frobenius norm `tr(A^T A)`.
    pub fn frobenius_sq(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum()
    }

    /// Induced 1-norm (maximum absolute column sum).
    pub fn norm_one(&self) -> f64 {
        let n = self.n;
        (0..n)
            .map(|j| (0..n).map(|i| self.data[i * n + j].abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().map(|x| x * s).collect(),
        }
    }

    /// Product written into `out` (which must not alias either factor).
    #[inline]
    pub(crate) fn mul_into(&self, rhs: &Self, out: &mut Self) {
        let n = self.n;
        debug_assert_eq!(n, rhs.n);
        debug_assert_eq!(n, out.n);
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0.0;
                for k in 0..n {
                    acc += self.data[i * n + k] * rhs.data[k * n + j];
                }
                out.data[i * n + j] = acc;
            }
        }
    }

    /// `(A + A^T)/2`, exactly symmetric.
    pub fn symmetrized(&self) -> Self {
        Self::from_fn_unchecked(self.n, |i, j| {
            if i == j {
                self.get(i, i)
            } else {
                0.5 * (self.get(i, j) + self.get(j, i))
            }
        })
    }

    /// `max |a_ij - a_ji| / max(1, max |a_ij|)`.
    pub fn relative_asymmetry(&self) -> f64 {
        let n = self.n;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst / self.max_abs().max(1.0)
    }

    pub(crate) fn check_symmetric(&self, what: &'static str, rel_tol: f64) -> Result<()> {
        let asym = self.relative_asymmetry();
        if asym > rel_tol {
            return Err(Error::NotSymmetric { what, asym });
        }
        Ok(())
    }

    pub fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.n, &self.data)
    }

    pub fn from_nalgebra(m: &DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                got: m.ncols(),
            });
        }
        let n = m.nrows();
        Self::new(n, (0..n * n).map(|k| m[(k / n, k % n)]).collect())
    }
}

impl Mul<&SquareMatrix> for &SquareMatrix {
    type Output = SquareMatrix;
    fn mul(self, rhs: &SquareMatrix) -> SquareMatrix {
        assert_eq!(self.n, rhs.n, "dimension mismatch in product");
        let mut out = SquareMatrix::zeros_unchecked(self.n);
        self.mul_into(rhs, &mut out);
        out
    }
}

impl Add<&SquareMatrix> for &SquareMatrix {
    type Output = SquareMatrix;
    fn add(self, rhs: &SquareMatrix) -> SquareMatrix {
        assert_eq!(self.n, rhs.n, "dimension mismatch in sum");
        SquareMatrix {
            n: self.n,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl Sub<&SquareMatrix> for &SquareMatrix {
    type Output = SquareMatrix;
    fn sub(self, rhs: &SquareMatrix) -> SquareMatrix {
        assert_eq!(self.n, rhs.n, "dimension mismatch in difference");
        SquareMatrix {
            n: self.n,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

/// Gram matrix `F^T F`, symmetrized after the product.
pub fn gram(f: &SquareMatrix) -> Result<SquareMatrix> {
    if !f.is_finite() {
        return Err(Error::NonFinite("gram input"));
    }
    Ok(gram_unchecked(f))
}

pub(crate) fn gram_unchecked(f: &SquareMatrix) -> SquareMatrix {
    let n = f.n;
    let mut g = SquareMatrix::zeros_unchecked(n);
    for i in 0..n {
        for j in i..n {
            let mut acc = 0.0;
            for k in 0..n {
                acc += f.data[k * n + i] * f.data[k * n + j];
            }
            g.data[i * n + j] = acc;
            g.data[j * n + i] = acc;
        }
    }
    g
}

/// `tr(G^p)` by repeated multiplication.
pub fn trace_power(g: &SquareMatrix, p: u32) -> Result<f64> {
    if p < 1 {
        return Err(Error::Domain("trace power p must be >= 1".into()));
    }
    Ok(*trace_powers(g, p as usize)
        .last()
        .expect("p >= 1 gives at least one power"))
}

/// `tr(G^p)` as the sum of `p`-th powers of the eigenvalues of symmetric `G`.
pub fn trace_power_eig(g: &SquareMatrix, p: u32) -> Result<f64> {
    if p < 1 {
        return Err(Error::Domain("trace power p must be >= 1".into()));
    }
    g.check_symmetric("trace_power_eig input", 1e-12)?;
    Ok(symmetric_eigenvalues(g)
        .iter()
        .map(|l| l.powi(p as i32))
        .sum())
}

pub fn symmetric_eigenvalues(g: &SquareMatrix) -> Vec<f64> {
    let mut ev: Vec<f64> = g
        .to_nalgebra()
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    ev
}

/// `[tr G, tr G^2, ..., tr G^p_max]`.
pub fn trace_powers(g: &SquareMatrix, p_max: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(p_max);
    if p_max == 0 {
        return out;
    }
    out.push(g.trace());
    // tr G^{2k} = tr(G^k G^k) and tr G^{2k+1} = tr(G^k G^{k+1}), so powers up
    // to ceil(p_max/2) suffice.
    let half = p_max.div_ceil(2);
    let mut powers: Vec<SquareMatrix> = Vec::with_capacity(half + 1);
    powers.push(g.clone());
    let mut scratch = SquareMatrix::zeros_unchecked(g.n);
    for _ in 1..half {
        powers.last().unwrap().mul_into(g, &mut scratch);
        powers.push(scratch.clone());
    }
    for p in 2..=p_max {
        let a = p / 2;
        let b = p - a;
        out.push(powers[a - 1].trace_product(&powers[b - 1]));
    }
    out
}

/// Matrix exponential by scaling and squaring with a truncated Taylor series.
///
/// The scaled matrix has 1-norm at most 1/2 and the series is cut once the
/// tail bound `|A|^(m+1)/(m+1)! / (1 - |A|/(m+2))` drops below `tol / 2^s`.
pub fn matrix_exp(m: &SquareMatrix, tol: f64) -> Result<SquareMatrix> {
    if !(tol > 0.0 && tol <= 1e-6) {
        return Err(Error::Domain(format!(
            "matrix_exp tol {tol} outside (0, 1e-6]"
        )));
    }
    if !m.is_finite() {
        return Err(Error::NonFinite("matrix_exp input"));
    }
    Ok(matrix_exp_unchecked(m, tol))
}

pub(crate) fn matrix_exp_unchecked(m: &SquareMatrix, tol: f64) -> SquareMatrix {
    let n = m.n;
    let norm = m.norm_one();
    if norm == 0.0 {
        return SquareMatrix::identity_unchecked(n);
    }
    let mut squarings = 0u32;
    if norm > 0.5 {
        squarings = (norm / 0.5).log2().ceil() as u32;
    }
    let a = m.scale(0.5f64.powi(squarings as i32));
    let a_norm = norm * 0.5f64.powi(squarings as i32);
    let budget = tol / 2f64.powi(squarings as i32);

    let mut terms = 0usize;
    let mut tail = a_norm; // |A|^(m+1)/(m+1)! for m = terms
    while terms < 40 {
        let bound = tail / (1.0 - a_norm / (terms as f64 + 2.0));
        if bound <= budget {
            break;
        }
        terms += 1;
        tail *= a_norm / (terms as f64 + 1.0);
    }

    // Horner: I + A(I + A/2(I + ... (I + A/m)))
    let mut p = SquareMatrix::identity_unchecked(n);
    let mut scratch = SquareMatrix::zeros_unchecked(n);
    for k in (1..=terms).rev() {
        a.mul_into(&p, &mut scratch);
        let inv = 1.0 / k as f64;
        for (idx, v) in scratch.data.iter().enumerate() {
            p.data[idx] = v * inv;
        }
        for i in 0..n {
            p.data[i * n + i] += 1.0;
        }
    }
    for _ in 0..squarings {
        p.mul_into(&p, &mut scratch);
        std::mem::swap(&mut p, &mut scratch);
    }
    p
}

/// `ln |det F|` via LU with partial pivoting.
pub fn log_det(f: &SquareMatrix) -> Result<f64> {
    if !f.is_finite() {
        return Err(Error::NonFinite("log_det input"));
    }
    let n = f.n;
    let mut a = f.data.clone();
    let mut acc = 0.0;
    for col in 0..n {
        let (piv_row, piv_abs) =
            (col..n)
                .map(|r| (r, a[r * n + col].abs()))
                .fold(
                    (col, -1.0),
                    |best, cur| if cur.1 > best.1 { cur } else { best },
                );
        if piv_abs < 1e-300 {
            return Err(Error::Singular { pivot: piv_abs });
        }
        if piv_row != col {
            for j in 0..n {
                a.swap(col * n + j, piv_row * n + j);
            }
        }
        let pivot = a[col * n + col];
        acc += pivot.abs().ln();
        for r in (col + 1)..n {
            let factor = a[r * n + col] / pivot;
            if factor != 0.0 {
                for j in (col + 1)..n {
                    a[r * n + j] -= factor * a[col * n + j];
                }
            }
        }
    }
    Ok(acc)
}

/// Trace powers and log-determinant recorded at one time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GramSummary {
    /// `tr G, tr G^2, ..., tr G^p_max`.
    pub trace_powers: Vec<f64>,
    pub log_det: f64,
    pub tau: f64,
}

impl GramSummary {
    pub fn from_state(f: &SquareMatrix, p_max: usize, tau: f64) -> Result<Self> {
        let g = gram(f)?;
        Ok(Self {
            trace_powers: trace_powers(&g, p_max),
            log_det: log_det(f)?,
            tau,
        })
    }

    /// `|F|^2 = tr G`.
    pub fn frobenius_sq(&self) -> f64 {
        self.trace_powers[0]
    }

    /// Product of `tr G^{p_i}` over the given parts.
    pub fn monomial(&self, parts: &[u32]) -> f64 {
        parts
            .iter()
            .map(|&p| self.trace_powers[p as usize - 1])
            .product()
    }

    /// Positivity and `tr G^p <= (tr G)^p`, the latter with relative slack.
    pub fn satisfies_invariants(&self, rel_slack: f64) -> bool {
        let t1 = match self.trace_powers.first() {
            Some(&t) if t > 0.0 => t,
            _ => return false,
        };
        self.trace_powers.iter().enumerate().all(|(k, &tp)| {
            let bound = t1.powi(k as i32 + 1);
            tp > 0.0 && tp <= bound * (1.0 + rel_slack)
        })
    }
}
