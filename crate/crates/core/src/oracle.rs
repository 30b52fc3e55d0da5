//! Small-N determinantal oracle built on the Gram matrix of the
//! bi-orthogonal system η_i(x) = x^{i−1}, ζ_j(x) = x^L e^{−x} ₀F₁(1; ω_j x).
//! Nothing here uses the contour machinery of [`crate::exact`].
//!
//! Columns indexed by the source values are always carried with the factor
//! e^{−ω} absorbed. For clustered or degenerate spectra every column
//! function is replaced by its Newton divided differences over the spectrum
//! (a fixed invertible column transform), which gives the confluent limit
//! without an ε-perturbation. Rows are scaled by 1/(i+L−1)!. All formulas
//! below are invariant under both transforms up to the stated row factors.

use crate::error::{Error, Result};
use crate::exact::EnsembleParams;
use crate::linalg::{condition_1, det_lu, det_lu_ln, inverse_lu, ComplexMatrix};
use crate::quad;
use crate::specfun::{binomial, hyp0f1, hyp0f1_taylor, laguerre, ln_factorial};
use num_complex::Complex64;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Oracle size limits.
pub const MAX_N: usize = 12;
pub const MAX_L: usize = 4;

fn cr(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

fn sgn(k: usize) -> f64 {
    if k % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// How source-indexed columns are formed.
#[derive(Debug, Clone, PartialEq)]
pub enum Columns {
    /// One column per ω_j.
    Direct(Vec<f64>),
    /// Column r is the divided difference over ω_1..ω_{r+1}, taken from
    /// `count` Taylor coefficients about `center`.
    Divided { nodes: Vec<f64>, center: f64, count: usize },
}

impl Columns {
    fn for_spectrum(omegas: &[f64]) -> Result<Self> {
        let n = omegas.len();
        let lo = omegas.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = omegas.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut gap = f64::INFINITY;
        for i in 0..n {
            for j in i + 1..n {
                gap = gap.min((omegas[i] - omegas[j]).abs());
            }
        }
        if gap >= 0.2 {
            return Ok(Columns::Direct(omegas.to_vec()));
        }
        let half = 0.5 * (hi - lo);
        let mut extra = 0usize;
        if half > 0.0 {
            extra = 4;
            while (extra as f64) * (2.0 * half).ln() - ln_factorial(extra) > -40.0 {
                extra += 1;
                if extra > 80 {
                    return Err(Error::IllConditioned(format!(
                        "spectrum spread {} too wide for confluent columns",
                        hi - lo
                    )));
                }
            }
        }
        Ok(Columns::Divided { nodes: omegas.to_vec(), center: 0.5 * (lo + hi), count: n + extra })
    }

    /// Applies the column transform to a vector-valued function of ω, given
    /// its values at ω (direct) or its Taylor coefficients about the centre.
    /// Returns one vector per column.
    fn build<V, T>(&self, values: V, taylor: T) -> Result<Vec<Vec<Complex64>>>
    where
        V: Fn(f64) -> Result<Vec<Complex64>>,
        T: Fn(f64, usize) -> Result<Vec<Vec<Complex64>>>,
    {
        match self {
            Columns::Direct(w) => w.iter().map(|&x| values(x)).collect(),
            Columns::Divided { nodes, center, count } => {
                // coeffs[k] is the vector of k-th Taylor coefficients
                let coeffs = taylor(*center, *count)?;
                let dim = coeffs[0].len();
                let delta: Vec<f64> = nodes.iter().map(|w| w - center).collect();
                let mut hc = vec![0.0; *count];
                hc[0] = 1.0;
                let mut out = Vec::with_capacity(nodes.len());
                for (r, d) in delta.iter().enumerate() {
                    for m in 1..*count {
                        hc[m] += d * hc[m - 1];
                    }
                    let mut col = vec![ZERO; dim];
                    for k in r..*count {
                        let h = hc[k - r];
                        for (c, a) in col.iter_mut().zip(&coeffs[k]) {
                            *c += a * h;
                        }
                    }
                    out.push(col);
                }
                Ok(out)
            }
        }
    }
}

/// Taylor coefficients of e^{−ω} about c.
fn exp_neg(c: f64, count: usize) -> Vec<f64> {
    (0..count).map(|k| (-c).exp() * sgn(k) / (ln_factorial(k)).exp()).collect()
}

fn conv(a: &[f64], b: &[f64]) -> Vec<f64> {
    (0..b.len()).map(|k| (0..=k).map(|j| a[j] * b[k - j]).sum()).collect()
}

/// Monomial coefficients of n!·L_n(−ω)/n! = L_n(−ω) in ω.
fn laguerre_neg_poly(n: usize) -> Vec<f64> {
    (0..=n).map(|m| binomial(n, m) / ln_factorial(m).exp()).collect()
}

/// Taylor coefficients about c of a polynomial given by monomial coefficients.
fn shift_poly(p: &[f64], c: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|m| (m..p.len()).map(|j| p[j] * binomial(j, m) * c.powi((j - m) as i32)).sum())
        .collect()
}

/// Transposes per-function Taylor vectors into per-order vectors.
fn by_order(per_fn: Vec<Vec<f64>>, count: usize) -> Vec<Vec<Complex64>> {
    (0..count).map(|k| per_fn.iter().map(|f| cr(f[k])).collect()).collect()
}

/// Column function ω ↦ (e^{−ω} g_i(ω)/(i+L−1)!)_i = (L_{i+L−1}(−ω))_i over `rows` rows.
fn gram_columns(cols: &Columns, l: usize, rows: usize) -> Result<Vec<Vec<Complex64>>> {
    cols.build(
        |w| (0..rows).map(|i| Ok(cr(laguerre(i + l, -w)?))).collect(),
        |c, count| {
            let per: Vec<Vec<f64>> = (0..rows).map(|i| shift_poly(&laguerre_neg_poly(i + l), c, count)).collect();
            Ok(by_order(per, count))
        },
    )
}

/// Column function ω ↦ e^{−ω} ζ(x; ω) = x^L e^{−x−ω} ₀F₁(1; ω x).
fn zeta_columns(cols: &Columns, l: usize, x: f64) -> Result<Vec<Complex64>> {
    let pre = (-x).exp() * x.powi(l as i32);
    let v = cols.build(
        |w| Ok(vec![cr(pre * (-w).exp() * hyp0f1(1, w * x)?)]),
        |c, count| {
            let t = conv(&exp_neg(c, count), &hyp0f1_taylor(c, x, count)?);
            Ok(t.into_iter().map(|a| vec![cr(pre * a)]).collect())
        },
    )?;
    Ok(v.into_iter().map(|c| c[0]).collect())
}

fn x_cut(omegas: &[f64], l: usize) -> f64 {
    let w = omegas.iter().cloned().fold(0.0, f64::max);
    let mut u = (w.sqrt() + (w + 760.0).sqrt()).powi(2);
    u += 2.0 * l as f64 * u.ln();
    u
}

fn breaks_for(z: Complex64) -> Vec<f64> {
    let mut b = vec![0.0, 0.5, 2.0, 8.0, 24.0];
    if z.re > 0.0 {
        for x in [z.re - z.im.abs(), z.re, z.re + z.im.abs()] {
            if x > 0.0 && x < 24.0 {
                b.push(x);
            }
        }
    }
    b.sort_by(f64::total_cmp);
    b.dedup();
    b
}

/// Column function ω ↦ e^{−ω} ∫ ζ(u; ω)/(y − u) du.
fn h_columns(cols: &Columns, l: usize, y: Complex64) -> Result<Vec<Complex64>> {
    let nodes: Vec<f64> = match cols {
        Columns::Direct(w) => w.clone(),
        Columns::Divided { nodes, .. } => nodes.clone(),
    };
    let cut = x_cut(&nodes, l);
    let breaks = breaks_for(y);
    let dim = match cols {
        Columns::Direct(w) => w.len(),
        Columns::Divided { count, .. } => *count,
    };
    let integrate = |f: &dyn Fn(f64) -> Result<Vec<Complex64>>| -> Result<Vec<Complex64>> {
        let g = |u: f64| -> Result<Vec<Complex64>> {
            if u > cut {
                return Ok(vec![ZERO; dim]);
            }
            f(u)
        };
        Ok(quad::adaptive_semi_vec(g, &breaks, 8.0, 1e-300, 1e-13)?.0)
    };
    match cols {
        Columns::Direct(w) => integrate(&|u: f64| {
            let pre = (-u).exp() * u.powi(l as i32) / (y - u);
            w.iter().map(|&om| Ok(pre * (-om).exp() * hyp0f1(1, om * u)?)).collect()
        }),
        Columns::Divided { center, count, .. } => {
            let (c, k) = (*center, *count);
            let e = exp_neg(c, k);
            let taylor = integrate(&|u: f64| {
                let pre = (-u).exp() * u.powi(l as i32) / (y - u);
                Ok(hyp0f1_taylor(c, u, k)?.into_iter().map(|a| pre * a).collect())
            })?;
            let t: Vec<Complex64> =
                (0..k).map(|m| (0..=m).map(|j| taylor[m - j] * e[j]).sum()).collect();
            let v = cols.build(|_| unreachable!(), move |_, _| Ok(t.iter().map(|a| vec![*a]).collect()))?;
            Ok(v.into_iter().map(|c| c[0]).collect())
        }
    }
}

/// Scaled Gram matrix and its inverse.
#[derive(Debug, Clone)]
pub struct GramData {
    /// Scaled entries: row i divided by (i+L−1)!, columns transformed as
    /// described in the module notes.
    pub g: ComplexMatrix,
    /// Inverse of the scaled matrix.
    pub c: ComplexMatrix,
    /// ln (i+L−1)! per row.
    pub log_scale: Vec<f64>,
    pub columns: Columns,
    pub l: usize,
    /// 1-norm condition number of the scaled matrix.
    pub condition: f64,
}

fn check_params(params: &EnsembleParams) -> Result<()> {
    if params.n > MAX_N || params.l > MAX_L {
        return Err(Error::Precondition(format!(
            "oracle limited to N <= {MAX_N}, L <= {MAX_L} (got N = {}, L = {})",
            params.n, params.l
        )));
    }
    Ok(())
}

fn column_matrix(cols: &[Vec<Complex64>], rows: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols.len(), |i, j| cols[j][i])
}

/// Gram matrix g_{ij} = (i+L−1)! e^{ω_j} L_{i+L−1}(−ω_j) in scaled form.
pub fn gram(params: &EnsembleParams) -> Result<GramData> {
    check_params(params)?;
    let (n, l) = (params.n, params.l);
    let columns = Columns::for_spectrum(&params.omegas())?;
    let g = column_matrix(&gram_columns(&columns, l, n)?, n);
    let condition = condition_1(&g)?;
    if !(condition <= 1e12) {
        return Err(Error::IllConditioned(format!("scaled Gram condition {condition:.3e} > 1e12")));
    }
    let c = inverse_lu(&g)?;
    let log_scale = (0..n).map(|i| ln_factorial(i + l)).collect();
    Ok(GramData { g, c, log_scale, columns, l, condition })
}

impl GramData {
    pub fn n(&self) -> usize {
        self.g.rows
    }

    /// Unscaled Gram entry g_{ij} (0-based), direct columns only.
    pub fn entry(&self, i: usize, j: usize) -> Result<f64> {
        match &self.columns {
            Columns::Direct(w) => Ok((self.log_scale[i] + w[j]).exp() * self.g[(i, j)].re),
            _ => Err(Error::Precondition("raw Gram entries need direct columns".into())),
        }
    }

    /// Last column of C = G^{−1}, i.e. the coefficients c_{N,j} (direct columns only).
    pub fn c_last(&self) -> Result<Vec<f64>> {
        let Columns::Direct(w) = &self.columns else {
            return Err(Error::Precondition("raw inverse entries need direct columns".into()));
        };
        let n = self.n();
        let s = self.log_scale[n - 1];
        Ok((0..n).map(|j| (-w[j] - s).exp() * self.c[(j, n - 1)].re).collect())
    }

    /// ln det G for the unscaled matrix (direct columns only), as (ln|det|, phase).
    pub fn ln_det(&self) -> Result<(f64, Complex64)> {
        let Columns::Direct(w) = &self.columns else {
            return Err(Error::Precondition("raw determinant needs direct columns".into()));
        };
        let (ld, ph) = det_lu_ln(&self.g)?;
        Ok((ld + self.log_scale.iter().sum::<f64>() + w.iter().sum::<f64>(), ph))
    }

    /// Row-scaled monomials e_i(x) = x^{i}/(i+L)!.
    fn e_scaled(&self, x: Complex64) -> Vec<Complex64> {
        (0..self.n()).map(|i| x.powu(i as u32) * (-self.log_scale[i]).exp()).collect()
    }

    /// a(x) = G_s^{−1} e_s(x).
    fn coeffs(&self, x: Complex64) -> Vec<Complex64> {
        self.c.mul_vec(&self.e_scaled(x))
    }
}

/// Inverse characteristic polynomial by the c_{N,j}-sum and by the bordered
/// determinant; both values are returned.
pub fn inverse_cp_oracle_both(params: &EnsembleParams, y: Complex64) -> Result<(Complex64, Complex64)> {
    check_support(y)?;
    let gd = gram(params)?;
    let n = gd.n();
    let h = h_columns(&gd.columns, params.l, y)?;
    let s = (-gd.log_scale[n - 1]).exp();
    let sum: Complex64 = (0..n).map(|j| h[j] * gd.c[(j, n - 1)]).sum::<Complex64>() * s;
    let mut b = gd.g.clone();
    for j in 0..n {
        b[(n - 1, j)] = h[j];
    }
    let bordered = det_lu(&b)? / det_lu(&gd.g)? * s;
    Ok((sum, bordered))
}

/// E[∏ 1/(y − x_i)] from the Gram matrix. Fails if the two Gram forms
/// disagree beyond 1e−9.
pub fn inverse_cp_oracle(params: &EnsembleParams, y: Complex64) -> Result<Complex64> {
    let (a, b) = inverse_cp_oracle_both(params, y)?;
    if (a - b).norm() > 1e-9 * a.norm().max(1e-300) {
        return Err(Error::Instability(format!("Gram inverse-CP forms disagree: {a} vs {b}")));
    }
    Ok(a)
}

fn check_support(y: Complex64) -> Result<()> {
    let dist = if y.re < 0.0 { y.norm() } else { y.im.abs() };
    if !(dist > 1e-8 * (1.0 + y.norm())) {
        return Err(Error::Precondition(format!("argument {y} lies on [0, inf)")));
    }
    Ok(())
}

/// E[∏(z − x_i)] as the bordered determinant over det G.
pub fn cp_oracle(params: &EnsembleParams, z: Complex64) -> Result<Complex64> {
    check_params(params)?;
    let (n, l) = (params.n, params.l);
    let columns = Columns::for_spectrum(&params.omegas())?;
    let g = column_matrix(&gram_columns(&columns, l, n)?, n);
    let cols = gram_columns(&columns, l, n + 1)?;
    let b = ComplexMatrix::from_fn(n + 1, n + 1, |i, j| {
        if j < n {
            cols[j][i]
        } else {
            z.powu(i as u32) * (-ln_factorial(i + l)).exp()
        }
    });
    let (lb, pb) = det_lu_ln(&b)?;
    let (lg, pg) = det_lu_ln(&g)?;
    Ok(pb / pg * (lb - lg + ln_factorial(n + l)).exp())
}

/// E[∏(v − x_i)/(z − x_i)] by the column-replacement determinant: an outer
/// x-integral of (v−x)/(z−x)·ζ(x)·G^{−1}e(v).
pub fn ratio_oracle(params: &EnsembleParams, v: Complex64, z: Complex64) -> Result<Complex64> {
    check_support(z)?;
    let gd = gram(params)?;
    let a = gd.coeffs(v);
    let cut = x_cut(&params.omegas(), params.l);
    let f = |x: f64| -> Result<Complex64> {
        if x > cut || x == 0.0 && params.l > 0 {
            return Ok(ZERO);
        }
        let zeta = zeta_columns(&gd.columns, params.l, x)?;
        let s: Complex64 = zeta.iter().zip(&a).map(|(p, q)| p * q).sum();
        Ok(s * (v - x) / (z - x))
    };
    Ok(quad::adaptive_semi(f, &breaks_for(z), 8.0, 1e-300, 1e-12)?.0)
}

/// Correlation kernel K(x, y) = ζ(y)ᵀ G^{−1} η(x), the orientation for which
/// ∫K(x,t)K(t,y)dt = K(x,y).
pub fn kernel_oracle(params: &EnsembleParams, x: f64, y: f64) -> Result<f64> {
    let gd = gram(params)?;
    kernel_from_gram(&gd, x, y)
}

pub fn kernel_from_gram(gd: &GramData, x: f64, y: f64) -> Result<f64> {
    if !(x >= 0.0 && y >= 0.0) {
        return Err(Error::Precondition(format!("kernel needs x, y >= 0 (got {x}, {y})")));
    }
    let a = gd.coeffs(cr(x));
    let zeta = zeta_columns(&gd.columns, gd.l, y)?;
    Ok(zeta.iter().zip(&a).map(|(p, q)| p * q).sum::<Complex64>().re)
}

/// π_n(−ε) row-scaled by 1/n!: (−1)^n L_n(−ε).
fn pi_columns(cols: &Columns, first: usize, rows: usize) -> Result<Vec<Vec<Complex64>>> {
    cols.build(
        |w| (0..rows).map(|i| Ok(cr(sgn(first + i) * laguerre(first + i, -w)?))).collect(),
        |c, count| {
            let per: Vec<Vec<f64>> = (0..rows)
                .map(|i| {
                    let n = first + i;
                    shift_poly(&laguerre_neg_poly(n), c, count).into_iter().map(|a| a * sgn(n)).collect()
                })
                .collect();
            Ok(by_order(per, count))
        },
    )
}

/// F^{(L)}_K(ε) = ∫Δ(y) det[₀F₁(1; ε_i y_j)] ∏ y^L e^{−y} dy through the
/// monic-Laguerre determinant, as (ln|F|, sign). Distinct ε only.
pub fn laguerre_det_f_ln(l: usize, eps: &[f64]) -> Result<(f64, f64)> {
    let k = eps.len();
    if k == 0 {
        return Ok((0.0, 1.0));
    }
    let m = ComplexMatrix::from_fn(k, k, |i, j| {
        let n = l + i;
        cr(sgn(n) * laguerre(n, -eps[j]).unwrap_or(f64::NAN))
    });
    let (ld, ph) = det_lu_ln(&m)?;
    if !ld.is_finite() && ld != f64::NEG_INFINITY {
        return Err(Error::Domain("laguerre_det_f: invalid Laguerre value".into()));
    }
    let lnf = ln_factorial(k)
        + eps.iter().sum::<f64>()
        + (0..k).map(|i| ln_factorial(l + i)).sum::<f64>()
        + ld;
    let sign = ph.re.signum() * sgn(k * l + k * (k - 1) / 2);
    Ok((lnf, sign))
}

/// Inverse characteristic polynomial by the permutation-symmetry route: a
/// sum over i of ∫ζ_i/(y−u) times ratios F_{N−1}(ω∖ω_i)/F_N(ω), assembled
/// as a Laplace expansion of the monic-Laguerre determinants.
pub fn inverse_cp_permutation(params: &EnsembleParams, y: Complex64) -> Result<Complex64> {
    check_support(y)?;
    check_params(params)?;
    let (n, l) = (params.n, params.l);
    let columns = Columns::for_spectrum(&params.omegas())?;
    let h = h_columns(&columns, l, y)?;
    let den = column_matrix(&pi_columns(&columns, l, n)?, n);
    let (ld, pd) = det_lu_ln(&den)?;
    let rowscale = -ln_factorial(l + n - 1);
    let sign = sgn(l + n - 1);
    match &columns {
        Columns::Direct(_) => {
            // Σ_i (−1)^{N+i} e^{−ω_i} H_i · minor_i / D, 1-based i
            let top = pi_columns(&columns, l, n - 1)?;
            let mut total = ZERO;
            for i in 0..n {
                let minor = ComplexMatrix::from_fn(n - 1, n - 1, |a, b| top[if b < i { b } else { b + 1 }][a]);
                let md = if n == 1 { cr(1.0) } else { det_lu(&minor)? };
                total += h[i] * md * sgn(n + i + 1);
            }
            Ok(total / pd * sign * (rowscale - ld).exp())
        }
        Columns::Divided { .. } => {
            let top = pi_columns(&columns, l, n - 1)?;
            let num = ComplexMatrix::from_fn(n, n, |a, b| if a + 1 < n { top[b][a] } else { h[b] });
            let (ln_num, pn) = det_lu_ln(&num)?;
            Ok(pn / pd * sign * (ln_num - ld + rowscale).exp())
        }
    }
}

/// F(y − iδ) − F(y + iδ) for F(z) = E[∏(x−x_i)/(z−x_i)]: across the cut this
/// jump equals 2πi (x − y) K(x, y). The jump is sampled along the directions
/// θ = π/3 and 2π/3 at distances δ and δ/2; a Richardson step removes the
/// O(δ) bias. Returns the kernel value implied by the jump.
pub fn kernel_from_ratio_jump(params: &EnsembleParams, x: f64, y: f64, delta: f64) -> Result<f64> {
    if x == y {
        return Err(Error::Precondition("jump extraction needs x != y".into()));
    }
    let jump = |dist: f64| -> Result<Complex64> {
        let mut acc = ZERO;
        for theta in [std::f64::consts::FRAC_PI_3, 2.0 * std::f64::consts::FRAC_PI_3] {
            let d = Complex64::from_polar(dist, theta);
            acc += ratio_oracle(params, cr(x), y + d.conj())? - ratio_oracle(params, cr(x), y + d)?;
        }
        Ok(acc / 2.0)
    };
    let j = jump(delta / 2.0)? * 2.0 - jump(delta)?;
    let k = j / (Complex64::new(0.0, 2.0 * std::f64::consts::PI) * (x - y));
    Ok(k.re)
}
