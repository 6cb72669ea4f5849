//! Backward drift-diffusion equation for the smoothed tail observable.
//!
//! `zeta(tau, s)` solves `d_tau zeta + a d_s zeta + a d_ss zeta = 0` with
//! `a = 2/(n+2)` and terminal data at `tau_star`. The solution is the
//! Gaussian average
//!
//! ```text
//! zeta(tau, s) = E T(s + a h + sqrt(2 a h) Z),   h = tau_star - tau,
//! ```
//!
//! and because `T` equals 1 left of the transition, 0 right of it and a
//! quintic polynomial in between, the average reduces to one normal CDF term
//! plus truncated Gaussian moments of degree at most five, evaluated in
//! closed form.

use std::num::NonZeroUsize;
use std::sync::OnceLock;

use gauss_quad::GaussLegendre;
use libm::erfc;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `sup |T'|` of the smoothstep profile.
pub const TERMINAL_SUP_D1: f64 = 15.0 / 8.0;

/// `sup |T''|` of the smoothstep profile, `10 sqrt(3) / 3`.
pub const TERMINAL_SUP_D2: f64 = 5.773_502_691_896_258;

const SQRT_2PI: f64 = 2.506_628_274_631_000_7;
const SUP_GRID: usize = 801;

/// Kernel width from which the transition integrals switch from the moment
/// recursion (unstable for wide kernels) to Gauss-Legendre quadrature
/// (inaccurate for narrow ones).
const WIDE_KERNEL: f64 = 0.5;
const LEGENDRE_NODES: usize = 40;

fn legendre() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(NonZeroUsize::new(LEGENDRE_NODES).expect("nonzero")))
}

/// Standard normal CDF.
pub fn phi(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal density.
pub fn phi_density(x: f64) -> f64 {
    (-0.5 * x * x).exp() / SQRT_2PI
}

/// Drift and diffusion coefficient `2/(n+2)`.
pub fn coefficient(n: usize) -> f64 {
    2.0 / (n as f64 + 2.0)
}

/// Largest transition start keeping `zeta(0, 0) <= 1/2`: `2 tau_star/(n+2) - 1`.
pub fn threshold_sigma_star(n: usize, tau_star: f64) -> f64 {
    coefficient(n) * tau_star - 1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// `1 - (6x^5 - 15x^4 + 10x^3)` on `[0, 1]`.
    QuinticSmoothstep,
}

/// Terminal data: 1 up to `sigma_star`, 0 from `sigma_star + 1`, smoothstep
/// in between.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TerminalCondition {
    pub sigma_star: f64,
    pub profile: Profile,
}

pub fn terminal_condition(sigma_star: f64) -> Result<TerminalCondition> {
    if !sigma_star.is_finite() {
        return Err(Error::NonFinite("sigma_star"));
    }
    Ok(TerminalCondition {
        sigma_star,
        profile: Profile::QuinticSmoothstep,
    })
}

impl TerminalCondition {
    pub fn value(&self, sigma: f64) -> f64 {
        let x = sigma - self.sigma_star;
        if x <= 0.0 {
            1.0
        } else if x >= 1.0 {
            0.0
        } else {
            1.0 - x * x * x * (10.0 + x * (-15.0 + 6.0 * x))
        }
    }

    pub fn d1(&self, sigma: f64) -> f64 {
        let x = sigma - self.sigma_star;
        if x <= 0.0 || x >= 1.0 {
            0.0
        } else {
            -30.0 * x * x * (1.0 - x) * (1.0 - x)
        }
    }

    pub fn d2(&self, sigma: f64) -> f64 {
        let x = sigma - self.sigma_star;
        if x <= 0.0 || x >= 1.0 {
            0.0
        } else {
            -60.0 * x * (1.0 - x) * (1.0 - 2.0 * x)
        }
    }
}

/// Value and first two `sigma`-derivatives at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
}

/// Immutable evaluator of the backward solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BackwardSolution {
    pub n: usize,
    pub tau_star: f64,
    pub terminal: TerminalCondition,
}

impl BackwardSolution {
    pub fn new(n: usize, tau_star: f64, terminal: TerminalCondition) -> Result<Self> {
        if n < 2 {
            return Err(Error::Dimension(n));
        }
        if !(tau_star >= 0.0) || !tau_star.is_finite() {
            return Err(Error::Domain(format!(
                "tau_star must be >= 0, got {tau_star}"
            )));
        }
        Ok(Self {
            n,
            tau_star,
            terminal,
        })
    }

    /// Remaining time `tau_star - tau`.
    fn horizon(&self, tau: f64) -> Result<f64> {
        if !(tau >= 0.0 && tau <= self.tau_star) {
            return Err(Error::Domain(format!(
                "tau = {tau} outside [0, {}]",
                self.tau_star
            )));
        }
        Ok(self.tau_star - tau)
    }

    /// Mean shift and standard deviation of the transition kernel.
    pub fn kernel(&self, tau: f64) -> Result<(f64, f64)> {
        let h = self.horizon(tau)?;
        let a = coefficient(self.n);
        Ok((a * h, (2.0 * a * h).sqrt()))
    }

    pub fn value(&self, tau: f64, sigma: f64) -> Result<f64> {
        Ok(self.jet(tau, sigma)?.value)
    }

    pub fn jet(&self, tau: f64, sigma: f64) -> Result<Jet> {
        let (shift, sd) = self.kernel(tau)?;
        if sd == 0.0 {
            return Ok(Jet {
                value: self.terminal.value(sigma),
                d1: self.terminal.d1(sigma),
                d2: self.terminal.d2(sigma),
            });
        }
        Ok(smoothed_jet(sigma + shift - self.terminal.sigma_star, sd))
    }

    /// Largest `|d1|`, `|d2|` and `|d1 + d2|` over `sigma` at time `tau`.
    pub fn derivative_sup(&self, tau: f64) -> Result<DerivativeSup> {
        let (shift, sd) = self.kernel(tau)?;
        if sd == 0.0 {
            // d1 + d2 = -30 x (1-x) (x(1-x) + 2(1-2x)) on the transition
            let sum = |x: f64| -30.0 * x * (1.0 - x) * (x * (1.0 - x) + 2.0 - 4.0 * x);
            let (_, s) = grid_max(0.0, 1.0, |x| sum(x).abs());
            return Ok(DerivativeSup {
                sup_d1: TERMINAL_SUP_D1,
                sup_d2: TERMINAL_SUP_D2,
                sup_sum: s,
            });
        }
        // the jet depends on sigma only through c = sigma + shift - sigma_star
        let _ = shift;
        let half = 8.0 * sd + 1.0;
        let (lo, hi) = (0.5 - half, 0.5 + half);
        let h = (hi - lo) / (SUP_GRID - 1) as f64;
        let mut best = [(lo, f64::NEG_INFINITY); 3];
        for i in 0..SUP_GRID {
            let c = lo + h * i as f64;
            let j = smoothed_jet(c, sd);
            for (b, y) in best
                .iter_mut()
                .zip([j.d1.abs(), j.d2.abs(), (j.d1 + j.d2).abs()])
            {
                if y > b.1 {
                    *b = (c, y);
                }
            }
        }
        let pick = [
            |j: Jet| j.d1.abs(),
            |j: Jet| j.d2.abs(),
            |j: Jet| (j.d1 + j.d2).abs(),
        ];
        let mut sup = [0.0; 3];
        for k in 0..3 {
            let (c0, y0) = best[k];
            let f = |c: f64| pick[k](smoothed_jet(c, sd));
            sup[k] = golden_max((c0 - h).max(lo), (c0 + h).min(hi), f).1.max(y0);
        }
        Ok(DerivativeSup {
            sup_d1: sup[0],
            sup_d2: sup[1],
            sup_sum: sup[2],
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivativeSup {
    pub sup_d1: f64,
    pub sup_d2: f64,
    /// `sup |d1 + d2|`, the integrand of the decay bound.
    pub sup_sum: f64,
}

/// `E T(sigma_star + c + sd Z)` and its derivatives in `c`, for `sd > 0`.
fn smoothed_jet(c: f64, sd: f64) -> Jet {
    if sd >= WIDE_KERNEL {
        let g = |u: f64| phi_density((u - c) / sd) / sd;
        let rule = legendre();
        let s = rule.integrate(0.0, 1.0, |u| {
            u * u * u * (10.0 + u * (-15.0 + 6.0 * u)) * g(u)
        });
        let s1 = rule.integrate(0.0, 1.0, |u| 30.0 * u * u * (1.0 - u) * (1.0 - u) * g(u));
        let s2 = rule.integrate(0.0, 1.0, |u| 60.0 * u * (1.0 - u) * (1.0 - 2.0 * u) * g(u));
        return Jet {
            value: (phi((1.0 - c) / sd) - s).clamp(0.0, 1.0),
            d1: -s1,
            d2: -s2,
        };
    }
    let m = truncated_moments(c, sd);
    let s = 10.0 * m[3] - 15.0 * m[4] + 6.0 * m[5];
    let s1 = 30.0 * m[2] - 60.0 * m[3] + 30.0 * m[4];
    let s2 = 60.0 * m[1] - 180.0 * m[2] + 120.0 * m[3];
    Jet {
        value: (phi((1.0 - c) / sd) - s).clamp(0.0, 1.0),
        d1: -s1,
        d2: -s2,
    }
}

/// `M_k = int_0^1 u^k g(u) du` for `k = 0..=5`, `g` the normal density with
/// mean `c` and standard deviation `sd`, via integration by parts:
/// `M_k = c M_{k-1} + (k-1) v M_{k-2} - v [u^{k-1} g]_0^1`.
fn truncated_moments(c: f64, sd: f64) -> [f64; 6] {
    let v = sd * sd;
    let a = -c / sd;
    let b = (1.0 - c) / sd;
    let g0 = phi_density(a) / sd;
    let g1 = phi_density(b) / sd;
    let mut m = [0.0; 6];
    m[0] = if a > 0.0 {
        // both limits in the right tail
        phi(-a) - phi(-b)
    } else {
        phi(b) - phi(a)
    };
    m[1] = c * m[0] + v * (g0 - g1);
    for k in 2..6 {
        m[k] = c * m[k - 1] + (k as f64 - 1.0) * v * m[k - 2] - v * g1;
    }
    m
}

/// Maximum of `f` on `[lo, hi]`: grid scan, then golden-section refinement
/// around the best grid point. Returns `(argmax, max)`.
fn grid_max(lo: f64, hi: f64, f: impl Fn(f64) -> f64) -> (f64, f64) {
    let h = (hi - lo) / (SUP_GRID - 1) as f64;
    let mut best = (lo, f(lo));
    for i in 1..SUP_GRID {
        let x = lo + h * i as f64;
        let y = f(x);
        if y > best.1 {
            best = (x, y);
        }
    }
    let refined = golden_max((best.0 - h).max(lo), (best.0 + h).min(hi), f);
    if refined.1 > best.1 {
        refined
    } else {
        best
    }
}

/// Golden-section search for a maximum of a unimodal `f` on `[a, b]`.
fn golden_max(mut a: f64, mut b: f64, f: impl Fn(f64) -> f64) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - r * (b - a);
    let mut x2 = a + r * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..60 {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + r * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - r * (b - a);
            f1 = f(x1);
        }
    }
    if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// `zeta(tau, sigma)`.
pub fn solve_backward(
    n: usize,
    tau_star: f64,
    terminal: &TerminalCondition,
    tau: f64,
    sigma: f64,
) -> Result<f64> {
    BackwardSolution::new(n, tau_star, *terminal)?.value(tau, sigma)
}

/// `(sup |d_sigma zeta|, sup |d_sigma^2 zeta|)` at time `tau`.
pub fn derivative_sup(
    n: usize,
    tau_star: f64,
    terminal: &TerminalCondition,
    tau: f64,
) -> Result<(f64, f64)> {
    let s = BackwardSolution::new(n, tau_star, *terminal)?.derivative_sup(tau)?;
    Ok((s.sup_d1, s.sup_d2))
}

/// `int_0^tau_star exp(-t/(n-1)) sup_sigma |d1 + d2|(t) dt`.
pub fn decay_integral(n: usize, tau_star: f64, terminal: &TerminalCondition) -> Result<f64> {
    let sol = BackwardSolution::new(n, tau_star, *terminal)?;
    // validate once so the integrand cannot fail
    sol.derivative_sup(0.0)?;
    Ok(decay_integral_with(n, tau_star, |t| {
        sol.derivative_sup(t.clamp(0.0, tau_star))
            .map(|s| s.sup_sum)
            .unwrap_or(f64::NAN)
    }))
}

/// The decay integral with a caller-supplied `sup |d1 + d2|` profile.
pub fn decay_integral_with(n: usize, tau_star: f64, sup_sum: impl Fn(f64) -> f64) -> f64 {
    if tau_star <= 0.0 {
        return 0.0;
    }
    let rate = 1.0 / (n as f64 - 1.0);
    let f = |t: f64| (-rate * t).exp() * sup_sum(t);
    adaptive_simpson(&f, 0.0, tau_star, 1e-10, 40)
}

fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, depth)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}
