use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sln_gbm::linalg::{gram, log_det, matrix_exp, symmetric_eigenvalues, trace_power};
use sln_gbm::moments::{exact_moments, intermittency_exponent, moment_bounds};
use sln_gbm::noise::{theoretical_covariation, CovariationKind};
use sln_gbm::{
    noise_coefficients, run_trajectory, sample_increment, Scheme, SquareMatrix, TrajectoryConfig,
};

fn square(n: usize, lo: f64, hi: f64) -> impl Strategy<Value = SquareMatrix> {
    prop::collection::vec(lo..hi, n * n).prop_map(move |e| SquareMatrix::new(n, e).unwrap())
}

fn sized(lo: f64, hi: f64) -> impl Strategy<Value = SquareMatrix> {
    (2usize..=5).prop_flat_map(move |n| square(n, lo, hi))
}

fn symmetric(n: usize) -> impl Strategy<Value = SquareMatrix> {
    square(n, -2.0, 2.0).prop_map(|m| m.symmetrized())
}

/// `Q` from the QR factorization of a random matrix.
fn orthogonal(n: usize) -> impl Strategy<Value = SquareMatrix> {
    prop::collection::vec(-1.0..1.0f64, n * n).prop_filter_map("singular draw", move |e| {
        let m = DMatrix::from_row_slice(n, n, &e);
        let qr = m.qr();
        let r_min = qr
            .r()
            .diagonal()
            .iter()
            .fold(f64::INFINITY, |a, x| a.min(x.abs()));
        (r_min > 1e-3).then(|| SquareMatrix::from_nalgebra(&qr.q()).unwrap())
    })
}

proptest! {
    #[test]
    fn trace_power_below_power_of_trace(a in sized(-2.0, 2.0)) {
        let n = a.dim();
        let mut g = gram(&a).unwrap().to_nalgebra();
        for i in 0..n {
            g[(i, i)] += 1e-3;
        }
        let g = SquareMatrix::from_nalgebra(&g).unwrap();
        let t1 = trace_power(&g, 1).unwrap();
        for p in 1..=6 {
            let tp = trace_power(&g, p).unwrap();
            prop_assert!(tp <= t1.powi(p as i32) * (1.0 + 1e-12), "p = {}: {} > {}", p, tp, t1.powi(p as i32));
        }
    }

    #[test]
    fn exp_of_trace_free_has_unit_determinant(m in sized(-0.5, 0.5)) {
        let n = m.dim();
        let shift = m.trace() / n as f64;
        let mut tf = m.to_nalgebra();
        for i in 0..n {
            tf[(i, i)] -= shift;
        }
        let tf = SquareMatrix::from_nalgebra(&tf).unwrap();
        let tol = 1e-12;
        let e = matrix_exp(&tf, tol).unwrap();
        prop_assert!(log_det(&e).unwrap().abs() <= 10.0 * tol);
    }

    #[test]
    fn gram_is_positive_semidefinite(f in sized(-3.0, 3.0)) {
        let g = gram(&f).unwrap();
        let eig = symmetric_eigenvalues(&g);
        let top = eig.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        prop_assert!(eig.iter().all(|&x| x >= -1e-12 * top.max(1.0)), "{:?}", eig);
    }

    #[test]
    fn covariation_forms_are_isotropic(
        (g, h, o) in (2usize..=5).prop_flat_map(|n| (symmetric(n), symmetric(n), orthogonal(n)))
    ) {
        let n = g.dim();
        let ot = o.transpose();
        let rotate = |m: &SquareMatrix| &(&o * m) * &ot;
        let (gr, hr) = (rotate(&g).symmetrized(), rotate(&h).symmetrized());
        for kind in [CovariationKind::TraceTrace, CovariationKind::Sandwich] {
            let a = theoretical_covariation(&g, &h, kind, n).unwrap();
            let b = theoretical_covariation(&gr, &hr, kind, n).unwrap();
            let scale = g.frobenius_sq().sqrt() * h.frobenius_sq().sqrt();
            prop_assert!((a - b).abs() <= 1e-12 * scale.max(1.0), "{:?}: {} vs {}", kind, a, b);
        }
    }

    #[test]
    fn sampled_increments_have_exact_structure(n in 2usize..=6, seed in any::<u64>(), dt in 1e-5..1.0f64) {
        let coeffs = noise_coefficients(n).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inc = sample_increment(&coeffs, dt, &mut rng).unwrap();
        let scale = inc.d_sym.max_abs().max(1e-300);
        prop_assert!(inc.d_sym.trace().abs() <= 1e-14 * scale * n as f64);
        for i in 0..n {
            prop_assert_eq!(inc.d_skew.get(i, i), 0.0);
            for j in 0..n {
                prop_assert_eq!(inc.d_sym.get(i, j), inc.d_sym.get(j, i));
                prop_assert_eq!(inc.d_skew.get(i, j), -inc.d_skew.get(j, i));
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn exponential_scheme_keeps_determinant(n in 2usize..=5, seed in any::<u64>(), index in 0u64..1000) {
        let tol = 1e-12;
        let mut config = TrajectoryConfig::new(n, 0.5, 1e-2, Scheme::Exponential, 2, seed);
        config.stream_index = index;
        let record = run_trajectory(&config).unwrap();
        prop_assert!(!record.diverged());
        prop_assert!(record.final_log_det.abs() <= 50.0 * 10.0 * tol);
    }
}

#[test]
fn exact_moments_respect_sandwich_and_ordering() {
    for n in 2..=5 {
        for p in 1..=6 {
            for tau in [0.0, 0.5, 1.0, 2.0, 5.0] {
                let t = exact_moments(n, p, tau).unwrap();
                let (lo, hi) = moment_bounds(n, p, tau).unwrap();
                let (tp, pt) = (t.trace_of_power(), t.power_of_trace());
                let slack = 1e-9;
                assert!(lo <= tp * (1.0 + slack), "n={n} p={p} tau={tau}");
                assert!(tp <= pt * (1.0 + slack), "n={n} p={p} tau={tau}");
                assert!(pt <= hi * (1.0 + slack), "n={n} p={p} tau={tau}");

                // log form: ln(E (tr G)^p / e^{r tau}) in [ln n, p ln n]
                let r = intermittency_exponent(n, p as f64);
                let l = pt.ln() - r * tau;
                let ln_n = (n as f64).ln();
                assert!(
                    l >= ln_n - 1e-9 && l <= p as f64 * ln_n + 1e-9,
                    "n={n} p={p} tau={tau}"
                );
            }
        }
    }
}

#[test]
fn every_monomial_is_at_least_n() {
    for n in 2..=5 {
        for p in 1..=5 {
            for tau in [0.0, 1.0, 3.0] {
                let t = exact_moments(n, p, tau).unwrap();
                for (lambda, v) in &t.values {
                    assert!(
                        *v >= n as f64 * (1.0 - 1e-12),
                        "n={n} {lambda} tau={tau}: {v}"
                    );
                }
            }
        }
    }
}
