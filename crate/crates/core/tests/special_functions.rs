//! Special functions, quadrature rules and small linear algebra against
//! closed forms and independent oracles computed here.

use approx::assert_relative_eq;
use chiralcp::linalg::{det_lu, inverse_lu, svd_squared, tridiag_eigen, ComplexMatrix};
use chiralcp::quad::{self, contour_residue, gauss_hermite_rule, gauss_laguerre_rule, integrate_semi_infinite};
use chiralcp::specfun::*;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::{E, PI};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// E1(x) = −γ − ln x − Σ (−x)^k/(k·k!).
fn expint_e1(x: f64) -> f64 {
    let gamma = 0.577_215_664_901_532_9;
    let mut s = 0.0;
    let mut t = 1.0;
    for k in 1..200 {
        t *= -x / k as f64;
        s += t / k as f64;
    }
    -gamma - x.ln() - s
}

#[test]
fn hyp0f1_values() {
    assert_eq!(hyp0f1(1, 0.0).unwrap(), 1.0);
    let mut s = 0.0;
    let mut t = 1.0;
    for k in 0..40 {
        if k > 0 {
            t /= (k * k) as f64;
        }
        s += t;
    }
    assert_relative_eq!(hyp0f1(1, 1.0).unwrap(), s, max_relative = 1e-15);
    assert_relative_eq!(hyp0f1(1, 1.0).unwrap(), 2.2795853023360673, max_relative = 1e-15);
    assert_relative_eq!(hyp0f1(1, -4.0).unwrap(), bessel_j(0, 4.0).unwrap(), max_relative = 1e-12);
}

#[test]
fn bessel_values() {
    assert_eq!(bessel_i(0, 0.0).unwrap(), 1.0);
    assert_eq!(bessel_j(0, 0.0).unwrap(), 1.0);
    let (q, _) =
        quad::adaptive_semi(|a| Ok(c(if a == 0.0 { 0.0 } else { (-1.0 / a - a).exp() }, 0.0)), &[0.0, 1.0], 2.0, 1e-15, 1e-12)
            .unwrap();
    assert_relative_eq!(2.0 * bessel_k(1, 2.0).unwrap(), q.re, max_relative = 1e-10);
    let x = 3.0;
    let r = bessel_j(1, x).unwrap() + bessel_j(3, x).unwrap() - 4.0 / x * bessel_j(2, x).unwrap();
    assert!(r.abs() < 1e-11, "{r}");
}

#[test]
fn laguerre_values() {
    assert_eq!(laguerre(1, 3.0).unwrap(), -2.0);
    assert_relative_eq!(laguerre_monic(2, 1.0).unwrap(), -1.0, epsilon = 1e-14);
    // e^{−x} L_3(x) = (1/3!) d³/dx³ (e^{−x} x³), seven-point stencil
    let f = |x: f64| (-x).exp() * x.powi(3);
    let (x, h) = (0.7, 1e-2);
    let d3 = (-f(x + 3.0 * h) + 8.0 * f(x + 2.0 * h) - 13.0 * f(x + h) + 13.0 * f(x - h) - 8.0 * f(x - 2.0 * h)
        + f(x - 3.0 * h))
        / (8.0 * h * h * h);
    assert!(((-x).exp() * laguerre(3, x).unwrap() - d3 / 6.0).abs() < 1e-6);
}

#[test]
fn hermite_values_and_orthogonality() {
    assert_eq!(hermite_monic(2, 0.0).unwrap(), -1.0);
    assert_eq!(hermite_monic(3, 2.0).unwrap(), 2.0);
    let r = gauss_hermite_rule(8).unwrap();
    let s: f64 =
        r.nodes.iter().zip(&r.weights).map(|(&x, w)| w * hermite_monic(2, x).unwrap() * hermite_monic(3, x).unwrap()).sum();
    assert!(s.abs() < 1e-10);
}

#[test]
fn incomplete_gamma_values() {
    assert_relative_eq!(gamma_upper(1, 2.0).unwrap(), (-2.0f64).exp(), max_relative = 1e-15);
    assert_relative_eq!(gamma_upper(3, 0.0).unwrap(), 2.0, max_relative = 1e-15);
    let (q, _) = quad::adaptive_semi(|t| Ok(c(t.powi(3) * (-t).exp(), 0.0)), &[1.5, 5.0], 5.0, 1e-15, 1e-13).unwrap();
    assert_relative_eq!(gamma_upper(4, 1.5).unwrap(), q.re, max_relative = 1e-10);
}

#[test]
fn vandermonde_values() {
    assert_eq!(vandermonde(&[5.0]).unwrap(), 1.0);
    assert_eq!(vandermonde(&[1.0, 2.0, 4.0]).unwrap(), 6.0);
    assert_eq!(vandermonde(&[2.0, 1.0, 4.0]).unwrap(), -6.0);
}

#[test]
fn laguerre_rules() {
    let r = gauss_laguerre_rule(1).unwrap();
    assert_relative_eq!(r.nodes[0], 1.0, max_relative = 1e-14);
    assert_relative_eq!(r.weights[0], 1.0, max_relative = 1e-14);
    let r = gauss_laguerre_rule(2).unwrap();
    let s2 = 2f64.sqrt();
    let mut pairs: Vec<(f64, f64)> = r.nodes.iter().cloned().zip(r.weights.iter().cloned()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    assert_relative_eq!(pairs[0].0, 2.0 - s2, max_relative = 1e-14);
    assert_relative_eq!(pairs[1].0, 2.0 + s2, max_relative = 1e-14);
    assert_relative_eq!(pairs[0].1, (2.0 + s2) / 4.0, max_relative = 1e-14);
    assert_relative_eq!(pairs[1].1, (2.0 - s2) / 4.0, max_relative = 1e-14);
    let m3: f64 = r.nodes.iter().zip(&r.weights).map(|(x, w)| w * x.powi(3)).sum();
    assert_relative_eq!(m3, 6.0, max_relative = 1e-14);
}

#[test]
fn hermite_rules() {
    let r = gauss_hermite_rule(1).unwrap();
    assert!(r.nodes[0].abs() < 1e-15);
    assert_relative_eq!(r.weights[0], (2.0 * PI).sqrt(), max_relative = 1e-14);
    let r = gauss_hermite_rule(2).unwrap();
    let m2: f64 = r.nodes.iter().zip(&r.weights).map(|(x, w)| w * x * x).sum();
    assert_relative_eq!(m2, (2.0 * PI).sqrt(), max_relative = 1e-14);
    // ∫∫ Δ² e^{−x²/2−y²/2} = 1!·2!·2π
    let r = gauss_hermite_rule(4).unwrap();
    let mut s = 0.0;
    for (a, wa) in r.nodes.iter().zip(&r.weights) {
        for (b, wb) in r.nodes.iter().zip(&r.weights) {
            s += wa * wb * (a - b).powi(2);
        }
    }
    assert_relative_eq!(s, 4.0 * PI, max_relative = 1e-12);
}

#[test]
fn contour_examples() {
    let cc = c(0.3, 0.1);
    assert_relative_eq!(contour_residue(cc, 0.7, 32, |v| 1.0 / (v - cc)).unwrap().re, 1.0, max_relative = 1e-14);
    let v = contour_residue(cc, 1.0, 64, |v| v.exp() / ((v - cc) * (v - cc))).unwrap();
    assert!((v - cc.exp()).norm() < 1e-13);
    // third-order pole against a finite-difference second derivative
    let (n, w, u) = (3, 1.0, 0.5);
    let f = |v: Complex64| (-v).exp() * hyp0f1_complex(1, v * u).unwrap() / (v - w).powu(n);
    let res = contour_residue(c(w, 0.0), 0.5, 64, f).unwrap();
    let g = |x: f64| (-x).exp() * hyp0f1(1, x * u).unwrap();
    let h = 1e-2;
    let d2 = (-g(w + 2.0 * h) + 16.0 * g(w + h) - 30.0 * g(w) + 16.0 * g(w - h) - g(w - 2.0 * h)) / (12.0 * h * h);
    assert_relative_eq!(res.re, d2 / 2.0, max_relative = 1e-7);
    assert!(res.im.abs() < 1e-14);
}

#[test]
fn semi_infinite_examples() {
    let cases: [(Box<dyn Fn(f64) -> f64>, f64); 3] = [
        (Box::new(|x: f64| (-x).exp()), 1.0),
        (Box::new(|x: f64| (-x).exp() / (1.0 + x)), E * expint_e1(1.0)),
        (Box::new(|x: f64| x * (-x).exp() * hyp0f1(1, -0.3 * x).unwrap()), (-0.3f64).exp() * 0.7),
    ];
    assert_relative_eq!(E * expint_e1(1.0), 0.596_347_362_323_194_1, max_relative = 1e-14);
    for (f, want) in cases {
        let r = integrate_semi_infinite(f, 1e-12).unwrap();
        let err = (r.value.re - want).abs();
        assert!(err <= 1e-10 * want.abs(), "{} vs {want}", r.value.re);
        // the doubling estimate bounds the true error
        assert!(err <= r.abs_err.max(1e-15 * want.abs()), "err {err} est {}", r.abs_err);
    }
}

#[test]
fn svd_examples() {
    let s = svd_squared(&ComplexMatrix::identity(3)).unwrap();
    for v in s {
        assert_relative_eq!(v, 1.0, max_relative = 1e-15);
    }
    let d = ComplexMatrix::from_fn(2, 2, |i, j| match (i, j) {
        (0, 0) => c(3.0, 0.0),
        (1, 1) => c(0.0, -4.0),
        _ => c(0.0, 0.0),
    });
    let s = svd_squared(&d).unwrap();
    assert_relative_eq!(s[0], 16.0, max_relative = 1e-14);
    assert_relative_eq!(s[1], 9.0, max_relative = 1e-14);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let m = ComplexMatrix::from_fn(2, 2, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
    let tr: f64 = (0..2).flat_map(|i| (0..2).map(move |j| (i, j))).map(|(i, j)| m[(i, j)].norm_sqr()).sum();
    let det = (m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)]).norm_sqr();
    let disc = (tr * tr - 4.0 * det).sqrt();
    let s = svd_squared(&m).unwrap();
    assert_relative_eq!(s[0], (tr + disc) / 2.0, max_relative = 1e-12);
    assert_relative_eq!(s[1], (tr - disc) / 2.0, max_relative = 1e-10);
}

#[test]
fn det_and_inverse_examples() {
    assert_eq!(det_lu(&ComplexMatrix::identity(4)).unwrap(), c(1.0, 0.0));
    let p = ComplexMatrix::from_real(2, 2, &[0.0, 1.0, 1.0, 0.0]);
    assert_relative_eq!(det_lu(&p).unwrap().re, -1.0, max_relative = 1e-15);
    let u = ComplexMatrix::from_real(2, 2, &[2.0, 1.0, 0.0, 4.0]);
    let inv = inverse_lu(&u).unwrap();
    let want = [0.5, -0.125, 0.0, 0.25];
    for (k, w) in want.iter().enumerate() {
        assert!((inv[(k / 2, k % 2)] - c(*w, 0.0)).norm() < 1e-15);
    }
}

#[test]
fn tridiagonal_examples() {
    let (v, w) = tridiag_eigen(&[1.0], &[]).unwrap();
    assert_eq!((v[0], w[0]), (1.0, 1.0));
    let (mut v, _) = tridiag_eigen(&[1.0, 3.0], &[1.0]).unwrap();
    v.sort_by(f64::total_cmp);
    assert_relative_eq!(v[0], 2.0 - 2f64.sqrt(), max_relative = 1e-14);
    assert_relative_eq!(v[1], 2.0 + 2f64.sqrt(), max_relative = 1e-14);
    // Laguerre Jacobi matrix against bisection roots of L_5
    let (mut v, _) = tridiag_eigen(&[1.0, 3.0, 5.0, 7.0, 9.0], &[1.0, 2.0, 3.0, 4.0]).unwrap();
    v.sort_by(f64::total_cmp);
    let l5 = |x: f64| laguerre(5, x).unwrap();
    let mut roots = Vec::new();
    let mut a = 0.0;
    while a < 15.0 {
        let b = a + 0.01;
        if l5(a).signum() != l5(b).signum() {
            let (mut lo, mut hi) = (a, b);
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if l5(lo).signum() == l5(mid).signum() {
                    lo = mid
                } else {
                    hi = mid
                }
            }
            roots.push(0.5 * (lo + hi));
        }
        a = b;
    }
    assert_eq!(roots.len(), 5);
    for (x, r) in v.iter().zip(&roots) {
        assert_relative_eq!(*x, *r, max_relative = 1e-12);
    }
}
