//! Monte Carlo sampler and estimators, and the bulk-edge limits.

use approx::assert_relative_eq;
use chiralcp::asym::{self, ScalingParams, SweepKind};
use chiralcp::exact::{self, EnsembleParams};
use chiralcp::mc::{self, Functional};
use chiralcp::par::Exec;
use num_complex::Complex64;
use std::f64::consts::PI;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn mean_of_x(p: &EnsembleParams, count: usize, seed: u64) -> (f64, f64) {
    let om = mc::omega_matrix(&p.source);
    let b = mc::sample_batch(p, &om, count, seed, Exec::default()).unwrap();
    let xs: Vec<f64> = b.xs.iter().map(|x| x[0]).collect();
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

#[test]
fn exponential_mean() {
    let (m, se) = mean_of_x(&EnsembleParams::distinct(0, vec![0.0]).unwrap(), 1_000_000, 11);
    assert!((m - 1.0).abs() <= 3.0 * se, "{m} ± {se}");
}

#[test]
fn shifted_gaussian_second_moment() {
    let z: f64 = 1.3;
    let (m, se) = mean_of_x(&EnsembleParams::distinct(0, vec![z * z]).unwrap(), 1_000_000, 12);
    assert!((m - (z * z + 1.0)).abs() <= 3.0 * se, "{m} ± {se}");
}

#[test]
fn ratio_at_equal_arguments_is_one() {
    let p = EnsembleParams::distinct(1, vec![0.5, 1.5]).unwrap();
    let om = mc::omega_matrix(&p.source);
    let z = c(0.3, 0.2);
    let e = mc::estimate(&p, &om, Functional::Ratio { v: z, z }, 1000, 5, Exec::default()).unwrap();
    assert_eq!(e.mean, c(1.0, 0.0));
    assert_eq!(e.stderr, 0.0);
}

#[test]
fn inverse_cp_matches_exact() {
    let p = EnsembleParams::distinct(0, vec![0.5, 1.5]).unwrap();
    let om = mc::omega_matrix(&p.source);
    let y = c(-1.0, 0.0);
    let e = mc::estimate(&p, &om, Functional::InverseCp(y), 1_000_000, 21, Exec::default()).unwrap();
    let x = exact::inverse_cp(&p, y).unwrap().value;
    assert!((e.mean - x).norm() <= 3.0 * e.stderr, "{} vs {x} ± {}", e.mean, e.stderr);
    assert!(e.ess <= e.n_samples as f64);
}

#[test]
fn cp_exponential_mean() {
    let p = EnsembleParams::distinct(0, vec![0.0]).unwrap();
    let om = mc::omega_matrix(&p.source);
    let e = mc::estimate(&p, &om, Functional::Cp(c(5.0, 0.0)), 1_000_000, 22, Exec::default()).unwrap();
    assert!((e.mean.re - 4.0).abs() <= 3.0 * e.stderr);
}

#[test]
fn reweighted_estimates_report_ess() {
    let run = |l: usize, w: Vec<f64>| {
        let p = EnsembleParams::distinct(l, w).unwrap();
        let om = mc::omega_matrix(&p.source);
        mc::estimate(&p, &om, Functional::Cp(c(0.5, 0.0)), 20_000, 3, Exec::default()).unwrap()
    };
    let mild = run(1, vec![0.5, 1.5]);
    assert!(mild.ess > 0.0 && mild.ess < mild.n_samples as f64);
    assert!(!mild.degenerate_weights, "{mild:?}");
    // det² weights at N = 3 put most of the mass on a few draws
    let heavy = run(2, vec![0.3, 1.0, 2.0]);
    assert!(heavy.degenerate_weights, "{heavy:?}");
}

#[test]
fn mismatched_source_matrix_rejected() {
    let p = EnsembleParams::distinct(0, vec![0.5, 1.5]).unwrap();
    let q = EnsembleParams::distinct(0, vec![0.5, 2.5]).unwrap();
    let om = mc::omega_matrix(&q.source);
    assert!(mc::sample_batch(&p, &om, 10, 1, Exec::Sequential).is_err());
}

#[test]
fn small_histogram() {
    let p = EnsembleParams::distinct(0, vec![0.5, 1.5]).unwrap();
    let om = mc::omega_matrix(&p.source);
    let edges = [0.0, 0.5, 1.0, 2.0, 4.0, 7.0, 12.0];
    let h = mc::histogram_check_n2(&om, |u, v| mc::jpdf(&p, &[u, v]).unwrap(), &edges, 100_000, 9, Exec::default())
        .unwrap();
    assert!(h.max_z <= 4.0, "max z {}", h.max_z);
    let total: f64 = h.bins.iter().map(|b| b.3).sum();
    assert!(total < 1.0 && total > 0.95, "{total}");
}

// ---------------------------------------------------------------------------
// limits

/// K₀(x) = ∫₀^∞ e^{−x cosh t} dt by the trapezoid rule.
fn k0(x: f64) -> f64 {
    let h = 0.01f64;
    let mut s = 0.5 * (-x).exp();
    let mut t = h;
    while t < 12.0 {
        s += (-x * t.cosh()).exp();
        t += h;
    }
    s * h
}

fn i_series(n: i32, x: f64) -> f64 {
    let mut term = (0.5 * x).powi(n) / (1..=n).map(f64::from).product::<f64>();
    let mut s = term;
    for k in 1..60 {
        term *= 0.25 * x * x / (k as f64 * (k + n) as f64);
        s += term;
    }
    s
}

fn j0_series(x: f64) -> f64 {
    let mut term = 1.0;
    let mut s = 1.0;
    for k in 1..80 {
        term *= -0.25 * x * x / (k * k) as f64;
        s += term;
    }
    s
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, m: usize) -> f64 {
    let h = (b - a) / (2 * m) as f64;
    let mut s = f(a) + f(b);
    for i in 1..2 * m {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

#[test]
fn inverse_cp_limit_values() {
    assert_relative_eq!(asym::inverse_cp_limit(1, 1e-6).unwrap(), 1.0 / (2.0 * PI).sqrt(), max_relative = 1e-4);
    assert_relative_eq!(asym::inverse_cp_limit(0, 1.0).unwrap(), (2.0 / PI).sqrt() * k0(2.0), max_relative = 1e-12);
    for l in 0..=1 {
        assert!(asym::inverse_cp_limit(l, 4.0).unwrap() < asym::inverse_cp_limit(l, 1.0).unwrap());
    }
}

#[test]
fn cp_limit_values() {
    assert_relative_eq!(asym::cp_limit(0, 1e-12).unwrap(), (2.0 * PI).sqrt(), max_relative = 1e-10);
    assert_relative_eq!(i_series(1, 2.0), 1.5906368546373291, max_relative = 1e-15);
    assert_relative_eq!(asym::cp_limit(1, 1.0).unwrap(), -(2.0 * PI).sqrt() * i_series(1, 2.0), max_relative = 1e-12);
    for l in 0..4 {
        let (a, b) = (asym::cp_limit(l, 1.5).unwrap(), asym::cp_limit(l + 1, 1.5).unwrap());
        assert!(a * b < 0.0);
    }
}

#[test]
fn kernel_limit_closed_form_vs_quadrature() {
    let (alpha, beta) = (1.0f64, 4.0f64);
    let f = |t: f64| j0_series(2.0 * (alpha * t).sqrt()) * j0_series(2.0 * (beta * t).sqrt());
    let q = simpson(f, 0.0, 1.0, 2000);
    assert_relative_eq!(asym::kernel_limit(0, alpha, beta).unwrap(), q, max_relative = 1e-10);
}

#[test]
fn kernel_limit_continuous_on_diagonal() {
    for l in 0..=3 {
        for a in [0.5, 2.0, 6.0] {
            let d = asym::kernel_limit(l, a, a).unwrap();
            let near = asym::kernel_limit(l, a * (1.0 + 1e-6), a).unwrap();
            assert_relative_eq!(d, near, max_relative = 1e-5);
        }
    }
}

#[test]
fn kernel_limit_trace_grows_like_sqrt() {
    // K(α, α) → 1/(π√α) for large α, so ∫₀^Λ grows like (2/π)√Λ
    let grow = simpson(|a| asym::kernel_limit(0, a, a).unwrap(), 100.0, 400.0, 400);
    let slope = grow / (400f64.sqrt() - 100f64.sqrt());
    assert!((slope - 2.0 / PI).abs() < 0.02, "slope {slope}");
}

#[test]
fn bessel_identity_cases() {
    let (_, _, d) = asym::kernel_identity_check(0, 1.0, 2.0).unwrap();
    assert!(d <= 1e-12);
    let (_, _, d) = asym::kernel_identity_check(2, 1.0, 3.0).unwrap();
    assert!(d <= 1e-10);
    let (_, _, d) = asym::kernel_identity_check(4, 0.5, 5.0).unwrap();
    assert!(d <= 1e-9);
}

#[test]
fn g_limit_value() {
    assert_relative_eq!(asym::g_limit(1, 0.5, 1.0).unwrap(), 0.75 * (-0.75f64).exp(), max_relative = 1e-14);
    assert_relative_eq!(asym::g_limit(1, 0.5, 1.0).unwrap(), 0.354275, max_relative = 1e-5);
}

#[test]
fn inverse_cp_sweep_converges() {
    let s = ScalingParams { xi: 1.0, ..ScalingParams::new(0.5).unwrap() };
    let t = asym::convergence_sweep(SweepKind::InverseCp, 0, &s, &[20, 40, 80], Exec::default()).unwrap();
    assert!(t.decreasing, "{:?}", t.rows);
    assert!(t.final_rel_err <= 0.05);
}

#[test]
fn g_sweep_converges() {
    let s = ScalingParams { a: 2.0, w: 0.5f64.sqrt(), ..ScalingParams::new(0.5).unwrap() };
    let t = asym::convergence_sweep(SweepKind::G, 1, &s, &[10, 30, 100], Exec::default()).unwrap();
    assert!(t.decreasing, "{:?}", t.rows);
}

#[test]
fn sweep_rejects_bad_input() {
    assert!(ScalingParams::new(1.2).is_err());
    let s = ScalingParams::new(0.5).unwrap();
    assert!(asym::convergence_sweep(SweepKind::Cp, 0, &s, &[40, 20], Exec::Sequential).is_err());
    assert!(asym::convergence_sweep(SweepKind::Kernel, 1, &s, &[10, 20], Exec::Sequential).is_err());
}
