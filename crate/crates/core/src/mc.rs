//! Monte Carlo oracle. X = Ω* + G with G complex Gaussian of density
//! ∝ e^{−Tr GG*}; the det(X*X)^L factor is handled by importance weights.
//!
//! Draw i uses its own ChaCha8 stream (stream number i under the run's
//! seed), and every reduction runs over draws in index order, so results do
//! not depend on the number of worker threads.

use crate::error::{Error, Result};
use crate::exact::{EnsembleParams, SourceSpectrum};
use crate::linalg::{det_lu, svd_squared, ComplexMatrix};
use crate::par::{map_indexed, Exec};
use crate::specfun::{hyp0f1, laguerre, ln_factorial, vandermonde};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

#[derive(Debug, Clone, PartialEq)]
pub struct MCEstimate {
    pub mean: Complex64,
    pub stderr: f64,
    /// (Σw)²/Σw².
    pub ess: f64,
    pub n_samples: usize,
    pub seed: u64,
    /// Set when ess < 0.01·n_samples.
    pub degenerate_weights: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    /// Squared singular values per draw, descending.
    pub xs: Vec<Vec<f64>>,
    /// L·Σ ln x_i per draw.
    pub log_weights: Vec<f64>,
}

/// Averaged quantity estimated from a batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Functional {
    InverseCp(Complex64),
    Cp(Complex64),
    Ratio { v: Complex64, z: Complex64 },
    /// 𝒟(p) = E₀[det(X*X)^L ∏ 1/(p + x_i)]: unnormalised, sampled at L = 0.
    DFunction(f64),
    /// E₀[det(X*X)^L], the ratio of the L and L = 0 normalisations.
    WeightMean,
}

impl Functional {
    fn normalised(&self) -> bool {
        !matches!(self, Functional::DFunction(_) | Functional::WeightMean)
    }

    fn eval(&self, x: &[f64]) -> Complex64 {
        let one = Complex64::new(1.0, 0.0);
        match *self {
            Functional::InverseCp(y) => x.iter().fold(one, |a, &t| a / (y - t)),
            Functional::Cp(z) => x.iter().fold(one, |a, &t| a * (z - t)),
            Functional::Ratio { v, z } => {
                if v == z {
                    return one;
                }
                x.iter().fold(one, |a, &t| a * (v - t) / (z - t))
            }
            Functional::DFunction(p) => Complex64::new(x.iter().map(|t| 1.0 / (p + t)).product(), 0.0),
            Functional::WeightMean => one,
        }
    }

    fn check(&self) -> Result<()> {
        let off = |y: Complex64| {
            let d = if y.re < 0.0 { y.norm() } else { y.im.abs() };
            d > 1e-8 * (1.0 + y.norm())
        };
        match *self {
            Functional::InverseCp(y) if !off(y) => Err(Error::Precondition(format!("y = {y} on the support"))),
            Functional::Ratio { v, z } if v != z && !off(z) => {
                Err(Error::Precondition(format!("z = {z} on the support")))
            }
            Functional::DFunction(p) if !(p > 0.0) => Err(Error::Precondition(format!("p = {p} must be > 0"))),
            _ => Ok(()),
        }
    }
}

/// diag(√ω₁, …, √ω_N): a source matrix with the given spectrum.
pub fn omega_matrix(source: &SourceSpectrum) -> ComplexMatrix {
    let w = source.omegas();
    let n = w.len();
    ComplexMatrix::from_fn(n, n, |i, j| if i == j { Complex64::new(w[i].sqrt(), 0.0) } else { Complex64::new(0.0, 0.0) })
}

fn check_omega(params: &EnsembleParams, omega: &ComplexMatrix) -> Result<()> {
    let n = params.n;
    if omega.rows != n || omega.cols != n {
        return Err(Error::Precondition(format!("source matrix must be {n}x{n}")));
    }
    let mut got = svd_squared(omega)?;
    let mut want = params.omegas();
    got.sort_by(f64::total_cmp);
    want.sort_by(f64::total_cmp);
    let scale = want.iter().cloned().fold(1.0, f64::max);
    if got.iter().zip(&want).any(|(a, b)| (a - b).abs() > 1e-9 * scale) {
        return Err(Error::Precondition("source matrix spectrum differs from params.source".into()));
    }
    Ok(())
}

/// Squared singular values of X = Ω* + G for draw `index`.
fn draw(omega: &ComplexMatrix, seed: u64, index: u64) -> Result<Vec<f64>> {
    let n = omega.rows;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let x = ComplexMatrix::from_fn(n, n, |i, j| {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        omega[(j, i)].conj() + Complex64::new(s * re, s * im)
    });
    svd_squared(&x)
}

fn log_weight(l: usize, x: &[f64]) -> f64 {
    if l == 0 {
        0.0
    } else {
        l as f64 * x.iter().map(|t| t.ln()).sum::<f64>()
    }
}

/// `count` draws with their log-weights.
pub fn sample_batch(
    params: &EnsembleParams,
    omega: &ComplexMatrix,
    count: usize,
    seed: u64,
    exec: Exec,
) -> Result<SampleBatch> {
    check_omega(params, omega)?;
    if count == 0 {
        return Err(Error::Precondition("count must be >= 1".into()));
    }
    let draws: Vec<Result<Vec<f64>>> = map_indexed(exec, count, |i| draw(omega, seed, i as u64));
    let xs: Vec<Vec<f64>> = draws.into_iter().collect::<Result<_>>()?;
    let log_weights = xs.iter().map(|x| log_weight(params.l, x)).collect();
    Ok(SampleBatch { xs, log_weights })
}

/// Several functionals from one shared batch of draws.
pub fn estimate_many(
    params: &EnsembleParams,
    omega: &ComplexMatrix,
    functionals: &[Functional],
    count: usize,
    seed: u64,
    exec: Exec,
) -> Result<Vec<MCEstimate>> {
    check_omega(params, omega)?;
    for f in functionals {
        f.check()?;
    }
    if count < 2 {
        return Err(Error::Precondition("count must be >= 2".into()));
    }
    let l = params.l;
    let rows: Vec<Result<(f64, Vec<Complex64>)>> = map_indexed(exec, count, |i| {
        let x = draw(omega, seed, i as u64)?;
        Ok((log_weight(l, &x), functionals.iter().map(|f| f.eval(&x)).collect()))
    });
    let rows: Vec<(f64, Vec<Complex64>)> = rows.into_iter().collect::<Result<_>>()?;
    let n = count as f64;

    let lmax = rows.iter().map(|r| r.0).fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = rows.iter().map(|r| (r.0 - lmax).exp()).collect();
    let sw: f64 = w.iter().sum();
    let sw2: f64 = w.iter().map(|a| a * a).sum();
    let ess = sw * sw / sw2;
    let degenerate_weights = ess < 0.01 * n;

    let mut out = Vec::with_capacity(functionals.len());
    for (k, f) in functionals.iter().enumerate() {
        let (mean, stderr) = if f.normalised() {
            let mean: Complex64 = rows.iter().zip(&w).map(|(r, a)| r.1[k] * a).sum::<Complex64>() / sw;
            let var: f64 = rows.iter().zip(&w).map(|(r, a)| a * a * (r.1[k] - mean).norm_sqr()).sum::<f64>();
            (mean, (var * n / (n - 1.0)).sqrt() / sw)
        } else {
            // plain mean of w·f with the true weights
            let scale = lmax.exp();
            if !scale.is_finite() {
                return Err(Error::Overflow("det^L weights overflow".into()));
            }
            let vals: Vec<Complex64> = rows.iter().zip(&w).map(|(r, a)| r.1[k] * a * scale).collect();
            let mean: Complex64 = vals.iter().sum::<Complex64>() / n;
            let var: f64 = vals.iter().map(|v| (v - mean).norm_sqr()).sum::<f64>() / (n - 1.0);
            (mean, (var / n).sqrt())
        };
        out.push(MCEstimate { mean, stderr, ess, n_samples: count, seed, degenerate_weights });
    }
    Ok(out)
}

pub fn estimate(
    params: &EnsembleParams,
    omega: &ComplexMatrix,
    functional: Functional,
    count: usize,
    seed: u64,
    exec: Exec,
) -> Result<MCEstimate> {
    Ok(estimate_many(params, omega, &[functional], count, seed, exec)?.remove(0))
}

/// Joint density of the unordered squared singular values,
/// Δ(x) det[₀F₁(1; ω_i x_j)] ∏ x^L e^{−x} / (N! det G). Distinct ω only.
pub fn jpdf(params: &EnsembleParams, x: &[f64]) -> Result<f64> {
    let SourceSpectrum::Distinct(w) = &params.source else {
        return Err(Error::Precondition("jpdf needs a distinct source spectrum".into()));
    };
    let (n, l) = (params.n, params.l);
    if x.len() != n || x.iter().any(|t| *t < 0.0) {
        return Err(Error::Precondition(format!("jpdf needs {n} nonnegative points")));
    }
    // rows scaled by e^{−ω_i} for conditioning; G is scaled the same way
    let mut a = ComplexMatrix::zeros(n, n);
    let mut g = ComplexMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            a[(i, j)] = Complex64::new((-w[i]).exp() * hyp0f1(1, w[i] * x[j])?, 0.0);
            g[(i, j)] = Complex64::new(laguerre(j + l, -w[i])?, 0.0);
        }
    }
    let det_a = det_lu(&a)?.re;
    let det_g = det_lu(&g)?.re;
    let ln_rest: f64 = x.iter().map(|t| -t + if l > 0 { l as f64 * t.ln() } else { 0.0 }).sum::<f64>()
        - ln_factorial(n)
        - (0..n).map(|j| ln_factorial(j + l)).sum::<f64>();
    Ok(vandermonde(x)? * det_a / det_g * ln_rest.exp())
}

/// Binned comparison of sampled (min, max) pairs against exact bin masses.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistogramCheck {
    /// Bin edges shared by both axes.
    pub edges: Vec<f64>,
    /// (i, j, empirical mass, exact mass, binomial stderr) for i ≤ j.
    pub bins: Vec<(usize, usize, f64, f64, f64)>,
    /// max |empirical − exact| / stderr.
    pub max_z: f64,
}

/// Two-level histogram test for N = 2: draws are binned by (min x, max x)
/// and compared to the masses of `density` (the symmetric unordered jpdf).
pub fn histogram_check_n2<D: Fn(f64, f64) -> f64 + Sync>(
    omega: &ComplexMatrix,
    density: D,
    edges: &[f64],
    count: usize,
    seed: u64,
    exec: Exec,
) -> Result<HistogramCheck> {
    if omega.rows != 2 {
        return Err(Error::Precondition("histogram check is for N = 2".into()));
    }
    let nb = edges.len() - 1;
    let locate = |t: f64| -> Option<usize> {
        if t < edges[0] || t >= edges[nb] {
            return None;
        }
        Some(edges.windows(2).position(|w| t >= w[0] && t < w[1]).unwrap_or(nb - 1))
    };
    let cells: Vec<Result<Option<(usize, usize)>>> = map_indexed(exec, count, |i| {
        let x = draw(omega, seed, i as u64)?;
        let (lo, hi) = (x[0].min(x[1]), x[0].max(x[1]));
        Ok(match (locate(lo), locate(hi)) {
            (Some(a), Some(b)) => Some((a, b)),
            _ => None,
        })
    });
    let mut counts = vec![vec![0usize; nb]; nb];
    for c in cells {
        if let Some((a, b)) = c? {
            counts[a][b] += 1;
        }
    }
    let mass = |a: usize, b: usize| -> Result<f64> {
        let inner = |u: f64| -> f64 {
            crate::quad::adaptive_real(|v| density(u, v), edges[b], edges[b + 1], 1e-14, 1e-10)
                .map(|r| r.0)
                .unwrap_or(f64::NAN)
        };
        let (m, _) = crate::quad::adaptive_real(inner, edges[a], edges[a + 1], 1e-13, 1e-9)?;
        // off-diagonal cells collect both orderings
        Ok(if a == b { m } else { 2.0 * m })
    };
    let n = count as f64;
    let mut bins = Vec::new();
    let mut max_z: f64 = 0.0;
    for a in 0..nb {
        for b in a..nb {
            let p = mass(a, b)?;
            if !p.is_finite() {
                return Err(Error::NonConvergence("bin mass quadrature".into()));
            }
            let emp = counts[a][b] as f64 / n;
            let se = (p * (1.0 - p) / n).sqrt();
            if se > 0.0 {
                max_z = max_z.max((emp - p).abs() / se);
            }
            bins.push((a, b, emp, p, se));
        }
    }
    Ok(HistogramCheck { edges: edges.to_vec(), bins, max_z })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_single_particle() {
        let p = EnsembleParams::distinct(0, vec![0.0]).unwrap();
        let om = omega_matrix(&p.source);
        let e = estimate(&p, &om, Functional::Cp(Complex64::new(5.0, 0.0)), 200_000, 3, Exec::default()).unwrap();
        assert!((e.mean.re - 4.0).abs() < 4.0 * e.stderr, "{e:?}");
        assert_eq!(e.ess, 200_000.0);
    }

    #[test]
    fn noncentral_second_moment() {
        let z: f64 = 1.3;
        let p = EnsembleParams::distinct(0, vec![z * z]).unwrap();
        let om = omega_matrix(&p.source);
        // E[x] = |z|² + 1 read off E[c − x] at c = 0
        let e = estimate(&p, &om, Functional::Cp(Complex64::new(0.0, 0.0)), 200_000, 11, Exec::default()).unwrap();
        assert!((-e.mean.re - (z * z + 1.0)).abs() < 4.0 * e.stderr, "{e:?}");
    }

    #[test]
    fn ratio_at_equal_arguments_is_one() {
        let p = EnsembleParams::distinct(1, vec![0.5, 1.5]).unwrap();
        let om = omega_matrix(&p.source);
        let z = Complex64::new(-1.0, 0.0);
        let e = estimate(&p, &om, Functional::Ratio { v: z, z }, 1000, 1, Exec::default()).unwrap();
        assert_eq!(e.mean, Complex64::new(1.0, 0.0));
        assert_eq!(e.stderr, 0.0);
    }

    #[test]
    fn seeds_are_reproducible_across_executors() {
        let p = EnsembleParams::distinct(1, vec![0.5, 1.5]).unwrap();
        let om = omega_matrix(&p.source);
        let f = Functional::InverseCp(Complex64::new(-1.0, 0.0));
        let a = estimate(&p, &om, f, 5000, 42, Exec::Sequential).unwrap();
        let b = estimate(&p, &om, f, 5000, 42, Exec::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn jpdf_is_normalised() {
        let p = EnsembleParams::distinct(0, vec![0.5, 1.5]).unwrap();
        let v = crate::quad::tensor_laguerre(2, 64, |t| jpdf(&p, t).unwrap() * (t[0] + t[1]).exp()).unwrap();
        assert!((v - 1.0).abs() < 1e-8, "{v}");
    }

    #[test]
    fn wrong_source_matrix_rejected() {
        let p = EnsembleParams::distinct(0, vec![0.5, 1.5]).unwrap();
        let q = EnsembleParams::distinct(0, vec![0.5, 2.5]).unwrap();
        assert!(sample_batch(&p, &omega_matrix(&q.source), 10, 1, Exec::Sequential).is_err());
    }
}
