//! Closed-form evaluators: averaged inverse characteristic polynomial,
//! characteristic polynomial, ratio, correlation kernel, the normalisation
//! integral and the connection functions 𝒟 and 𝒢.
//!
//! Every contour integral over the source spectrum is a divided difference
//! of an entire function, h[ω₁..ω_N] = (1/2πi)∮ h(v)/∏(v−ω_k) dv. With
//! P(s) = ∏(s+ω_k), the Leibniz rule gives
//!
//!   P(s)·(h/(s+·))[ω₁..ω_N] = Σ_r h[ω₁..ω_{r+1}]·φ_r(s),
//!   φ_r(s) = (−1)^{N−1−r} ∏_{k≤r}(s+ω_k),
//!
//! a polynomial in s, so the s- and t-integrals that follow are exact under
//! Gauss–Laguerre. The divided differences are taken by residue sum, by a
//! Taylor expansion about the centre of the spectrum, or on a circle.

use crate::error::{Error, Result};
use crate::quad::{self, laguerre_rule};
use crate::specfun::{self, binomial, hyp0f1_complex, hyp0f1_taylor, ln_factorial, signed_lse};
use num_complex::Complex64;
use std::fmt;
use std::str::FromStr;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

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

/// Largest N accepted by the evaluators.
pub const MAX_N: usize = 128;
/// Largest L accepted (cost of the L-fold cubature).
pub const MAX_L: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub enum SourceSpectrum {
    /// Pairwise distinct squared singular values of the source.
    Distinct(Vec<f64>),
    /// Ω = z·1: every squared singular value equals `z_sq`.
    Degenerate { z_sq: f64, multiplicity: usize },
}

impl SourceSpectrum {
    pub fn distinct(omegas: Vec<f64>) -> Result<Self> {
        if omegas.is_empty() {
            return Err(Error::Precondition("empty source spectrum".into()));
        }
        if omegas.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Precondition("source values must be finite and >= 0".into()));
        }
        let max = omegas.iter().cloned().fold(0.0, f64::max);
        for i in 0..omegas.len() {
            for j in i + 1..omegas.len() {
                if (omegas[i] - omegas[j]).abs() <= 1e-10 * max {
                    return Err(Error::Precondition(format!(
                        "source values {} and {} coincide to 1e-10; use the degenerate spectrum",
                        omegas[i], omegas[j]
                    )));
                }
            }
        }
        Ok(SourceSpectrum::Distinct(omegas))
    }

    pub fn degenerate(z_sq: f64, multiplicity: usize) -> Result<Self> {
        if !(z_sq >= 0.0) || !z_sq.is_finite() || multiplicity == 0 {
            return Err(Error::Precondition(format!("degenerate source |z|^2 = {z_sq}, N = {multiplicity}")));
        }
        Ok(SourceSpectrum::Degenerate { z_sq, multiplicity })
    }

    pub fn len(&self) -> usize {
        match self {
            SourceSpectrum::Distinct(w) => w.len(),
            SourceSpectrum::Degenerate { multiplicity, .. } => *multiplicity,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn omegas(&self) -> Vec<f64> {
        match self {
            SourceSpectrum::Distinct(w) => w.clone(),
            SourceSpectrum::Degenerate { z_sq, multiplicity } => vec![*z_sq; *multiplicity],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleParams {
    pub n: usize,
    pub l: usize,
    pub source: SourceSpectrum,
}

impl EnsembleParams {
    pub fn new(n: usize, l: usize, source: SourceSpectrum) -> Result<Self> {
        if n == 0 || n > MAX_N {
            return Err(Error::Precondition(format!("N = {n} outside 1..={MAX_N}")));
        }
        if l > MAX_L {
            return Err(Error::Precondition(format!("L = {l} > {MAX_L}")));
        }
        if source.len() != n {
            return Err(Error::Precondition(format!("source has {} values, N = {n}", source.len())));
        }
        Ok(EnsembleParams { n, l, source })
    }

    pub fn distinct(l: usize, omegas: Vec<f64>) -> Result<Self> {
        let n = omegas.len();
        Self::new(n, l, SourceSpectrum::distinct(omegas)?)
    }

    pub fn degenerate(n: usize, l: usize, z_sq: f64) -> Result<Self> {
        Self::new(n, l, SourceSpectrum::degenerate(z_sq, n)?)
    }

    pub fn omegas(&self) -> Vec<f64> {
        self.source.omegas()
    }
}

/// How the divided differences over the source spectrum are taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ResidueMode {
    /// Taylor for clustered spectra, residue sum for well separated ones,
    /// circle rule otherwise.
    #[default]
    Auto,
    Contour,
    Taylor,
    /// Explicit residue sum (distinct spectra only).
    Lagrange,
}

impl fmt::Display for ResidueMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ResidueMode::Auto => "auto",
            ResidueMode::Contour => "contour",
            ResidueMode::Taylor => "taylor",
            ResidueMode::Lagrange => "lagrange",
        };
        f.write_str(s)
    }
}

impl FromStr for ResidueMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "auto" => Ok(ResidueMode::Auto),
            "contour" => Ok(ResidueMode::Contour),
            "taylor" => Ok(ResidueMode::Taylor),
            "lagrange" | "residue" => Ok(ResidueMode::Lagrange),
            _ => Err(Error::Config(format!("unknown residue mode '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalOptions {
    pub mode: ResidueMode,
    /// Circle radius override for [`ResidueMode::Contour`].
    pub radius: Option<f64>,
    /// Relative tolerance of the adaptive quadratures.
    pub rel_tol: f64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions { mode: ResidueMode::Auto, radius: None, rel_tol: 1e-12 }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvalMeta {
    /// Quadrature orders (Gauss–Laguerre orders or circle points) used.
    pub orders: Vec<usize>,
    pub contour_radius: Option<f64>,
    pub residue_mode: Option<ResidueMode>,
}

impl EvalMeta {
    pub fn with_orders(orders: Vec<usize>) -> Self {
        EvalMeta { orders, ..Default::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    pub value: Complex64,
    pub abs_err: f64,
    pub meta: EvalMeta,
}

impl EvalResult {
    pub fn real(v: f64, abs_err: f64, meta: EvalMeta) -> Self {
        EvalResult { value: cr(v), abs_err, meta }
    }

    pub fn complex(value: Complex64, abs_err: f64, meta: EvalMeta) -> Result<Self> {
        if !value.re.is_finite() || !value.im.is_finite() {
            return Err(Error::Overflow("non-finite result".into()));
        }
        Ok(EvalResult { value, abs_err: if abs_err.is_finite() { abs_err } else { f64::MAX }, meta })
    }

    pub fn re(&self) -> f64 {
        self.value.re
    }
}

// ---------------------------------------------------------------------------
// divided differences

/// An entire function of the spectral variable.
trait Entire: Sync {
    fn values(&self, vs: &[Complex64]) -> Result<Vec<Complex64>>;
    /// The first `count` Taylor coefficients about the real point `c`, with
    /// absolute error bounds that include cancellation in their assembly.
    fn taylor(&self, c: f64, count: usize) -> Result<(Vec<Complex64>, Vec<f64>)>;
}

#[derive(Debug, Clone, Copy)]
enum Plan {
    Lagrange,
    Taylor { center: f64, count: usize },
    Contour { center: f64, radius: f64 },
}

fn spread(nodes: &[f64]) -> (f64, f64, f64) {
    let lo = nodes.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = nodes.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut gap = f64::INFINITY;
    for i in 0..nodes.len() {
        for j in i + 1..nodes.len() {
            gap = gap.min((nodes[i] - nodes[j]).abs());
        }
    }
    (0.5 * (lo + hi), 0.5 * (hi - lo), gap)
}

fn taylor_count(n: usize, half: f64) -> usize {
    if half == 0.0 {
        return n;
    }
    // extra terms until (2·half)^m/m! is negligible
    let mut m = 4usize;
    while m < 80 && (m as f64) * (2.0 * half).max(1e-300).ln() - ln_factorial(m) > -40.0 {
        m += 1;
    }
    n + m
}

fn make_plan(nodes: &[f64], opts: &EvalOptions) -> Result<(Plan, ResidueMode)> {
    let n = nodes.len();
    let (center, half, gap) = spread(nodes);
    let radius = || -> Result<f64> {
        let r = opts.radius.unwrap_or_else(|| (1.25 * half).max(0.3 * n as f64).max(0.75));
        if !(r > half) {
            return Err(Error::Config(format!("contour radius {r} does not enclose the spectrum")));
        }
        Ok(r)
    };
    let mode = match opts.mode {
        ResidueMode::Auto => {
            if half > 0.0 && gap >= 0.25 && n <= 8 {
                ResidueMode::Lagrange
            } else if half <= 2.0 {
                ResidueMode::Taylor
            } else {
                ResidueMode::Contour
            }
        }
        m => m,
    };
    let plan = match mode {
        ResidueMode::Lagrange => {
            if gap == 0.0 {
                return Err(Error::Precondition("residue sum needs a distinct spectrum".into()));
            }
            Plan::Lagrange
        }
        ResidueMode::Taylor => Plan::Taylor { center, count: taylor_count(n, half) },
        ResidueMode::Contour => Plan::Contour { center, radius: radius()? },
        ResidueMode::Auto => unreachable!(),
    };
    Ok((plan, mode))
}

struct DdTable {
    dd: Vec<Complex64>,
    err: Vec<f64>,
    meta: EvalMeta,
}

/// h[ω₁..ω_{r+1}] for r = 0..N−1.
fn divided_differences<H: Entire>(nodes: &[f64], plan: Plan, mode: ResidueMode, h: &H) -> Result<DdTable> {
    let n = nodes.len();
    let mut meta = EvalMeta { residue_mode: Some(mode), ..Default::default() };
    match plan {
        Plan::Lagrange => {
            let vals = h.values(&nodes.iter().map(|&w| cr(w)).collect::<Vec<_>>())?;
            let mut dd = Vec::with_capacity(n);
            let mut err = Vec::with_capacity(n);
            for r in 0..n {
                let mut s = ZERO;
                let mut mag = 0.0;
                for k in 0..=r {
                    let mut den = 1.0;
                    for j in 0..=r {
                        if j != k {
                            den *= nodes[k] - nodes[j];
                        }
                    }
                    let t = vals[k] / den;
                    s += t;
                    mag += t.norm();
                }
                dd.push(s);
                err.push(1e-15 * mag * (r + 1) as f64);
            }
            Ok(DdTable { dd, err, meta })
        }
        Plan::Taylor { center, count } => {
            let (a, a_err) = h.taylor(center, count)?;
            let delta: Vec<f64> = nodes.iter().map(|w| w - center).collect();
            // hc[m] = complete homogeneous h_m(δ_0..δ_r), updated in place per r
            let mut hc = vec![0.0; count];
            hc[0] = 1.0;
            let mut dd = Vec::with_capacity(n);
            let mut err = Vec::with_capacity(n);
            for r in 0..n {
                for m in 1..count {
                    hc[m] += delta[r] * hc[m - 1];
                }
                let mut s = ZERO;
                let mut mag = 0.0;
                let mut last = 0.0f64;
                let mut carried = 0.0;
                for k in r..count {
                    let t = a[k] * hc[k - r];
                    s += t;
                    mag += t.norm();
                    carried += a_err[k] * hc[k - r].abs();
                    if k + 3 >= count {
                        last = last.max(t.norm());
                    }
                }
                dd.push(s);
                err.push(1e-15 * mag + carried + if count > n { last } else { 0.0 });
            }
            meta.orders.push(count);
            Ok(DdTable { dd, err, meta })
        }
        Plan::Contour { center, radius } => {
            let c = cr(center);
            let mut order = 64usize.max(4 * n);
            let eval = |m: usize| -> Result<(Vec<Complex64>, Vec<f64>)> {
                let rule = quad::ContourRule::new(c, radius, m)?;
                let pts: Vec<Complex64> = (0..m).map(|i| rule.point(i).0).collect();
                let vals = h.values(&pts)?;
                let hmax = vals.iter().map(|z| z.norm()).fold(0.0, f64::max);
                let mut dd = vec![ZERO; n];
                for (v, hv) in pts.iter().zip(&vals) {
                    let mut t = hv * (v - c);
                    for r in 0..n {
                        t /= v - nodes[r];
                        dd[r] += t;
                    }
                }
                let floor = (0..n).map(|r| 1e-15 * hmax / radius.powi(r as i32)).collect();
                Ok((dd.into_iter().map(|z| z / m as f64).collect(), floor))
            };
            let (mut prev, _) = eval(order)?;
            loop {
                order *= 2;
                let (cur, floor) = eval(order)?;
                let diffs: Vec<f64> = cur.iter().zip(&prev).map(|(a, b)| (a - b).norm()).collect();
                let ok = diffs.iter().zip(&cur).zip(&floor).all(|((d, v), f)| *d <= 1e-10 * v.norm() + 10.0 * f);
                if ok {
                    meta.orders.push(order);
                    meta.contour_radius = Some(radius);
                    let err = diffs.iter().zip(&floor).map(|(d, f)| d + f).collect();
                    return Ok(DdTable { dd: cur, err, meta });
                }
                if order >= 4096 {
                    return Err(Error::NonConvergence(format!(
                        "circle rule radius {radius}: orders {}/{order} disagree",
                        order / 2
                    )));
                }
                prev = cur;
            }
        }
    }
}

/// Taylor coefficients of e^{−v} about c: e^{−c}(−1)^k/k!.
fn exp_neg_taylor(c: f64, count: usize, scale: f64) -> Vec<f64> {
    let e = (-c * scale).exp();
    (0..count).map(|k| e * sgn(k) * (k as f64 * scale.abs().ln() - ln_factorial(k)).exp()).collect()
}

/// Σ_j |a_j|·|b_{k−j}|: the scale against which cancellation in [`convolve`] is measured.
fn convolve_abs(a: &[f64], b: &[f64]) -> Vec<f64> {
    (0..b.len()).map(|k| (0..=k).map(|j| b[k - j] * a[j].abs()).sum()).collect()
}

fn convolve<T: Copy + std::ops::Mul<f64, Output = T> + std::ops::Add<Output = T>>(
    a: &[f64],
    b: &[T],
    zero: T,
) -> Vec<T> {
    (0..b.len()).map(|k| (0..=k).fold(zero, |s, j| s + b[k - j] * a[j])).collect()
}

/// g_x(u) = e^{−u} ₀F₁(1; u x).
struct GammaFn {
    x: f64,
}

impl Entire for GammaFn {
    fn values(&self, vs: &[Complex64]) -> Result<Vec<Complex64>> {
        vs.iter().map(|&v| Ok((-v).exp() * hyp0f1_complex(1, v * self.x)?)).collect()
    }
    fn taylor(&self, c: f64, count: usize) -> Result<(Vec<Complex64>, Vec<f64>)> {
        let t: Vec<Complex64> = hyp0f1_taylor(c, self.x, count)?.into_iter().map(cr).collect();
        let e = exp_neg_taylor(c, count, 1.0);
        let scale = convolve_abs(&e, &t.iter().map(|z| z.norm()).collect::<Vec<_>>());
        Ok((convolve(&e, &t, ZERO), scale.into_iter().map(|m| 1e-15 * m).collect()))
    }
}

// upper end beyond which e^{-u} u^L ₀F₁(1; v u) is below e^{-740}
fn u_cutoff(vmax: f64, l: usize) -> f64 {
    let mut u = (vmax.sqrt() + (vmax + 760.0).sqrt()).powi(2);
    u += 2.0 * l as f64 * u.ln();
    u
}

/// h(v) = e^{−v} ∫₀^∞ e^{−u} u^L ₀F₁(1; v u)/(y − u) du.
struct IcpFn {
    y: Complex64,
    l: usize,
    rel_tol: f64,
}

impl IcpFn {
    fn breaks(&self) -> Vec<f64> {
        let mut b = vec![0.0, 0.5, 2.0, 8.0, 24.0];
        if self.y.re > 0.0 {
            for x in [self.y.re - self.y.im.abs(), self.y.re, self.y.re + self.y.im.abs()] {
                if x > 0.0 && x < 24.0 {
                    b.push(x);
                }
            }
        }
        b.sort_by(f64::total_cmp);
        b.dedup();
        b
    }
}

impl Entire for IcpFn {
    fn values(&self, vs: &[Complex64]) -> Result<Vec<Complex64>> {
        let vmax = vs.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let cut = u_cutoff(vmax, self.l);
        let f = |u: f64| -> Result<Vec<Complex64>> {
            if u > cut {
                return Ok(vec![ZERO; vs.len()]);
            }
            let w = (-u + self.l as f64 * u.ln()).exp() / (self.y - u);
            vs.iter().map(|&v| Ok(w * hyp0f1_complex(1, v * u)?)).collect()
        };
        let (vals, _) = quad::adaptive_semi_vec(f, &self.breaks(), 8.0, 1e-300, self.rel_tol)?;
        Ok(vals.into_iter().zip(vs).map(|(u, v)| u * (-v).exp()).collect())
    }

    fn taylor(&self, c: f64, count: usize) -> Result<(Vec<Complex64>, Vec<f64>)> {
        let cut = u_cutoff(c, self.l + count);
        let f = |u: f64| -> Result<Vec<Complex64>> {
            if u > cut {
                return Ok(vec![ZERO; count]);
            }
            let w = (-u + self.l as f64 * u.ln()).exp() / (self.y - u);
            Ok(hyp0f1_taylor(c, u, count)?.into_iter().map(|t| w * t).collect())
        };
        let (u, u_err) = quad::adaptive_semi_vec(f, &self.breaks(), 8.0, 1e-300, self.rel_tol)?;
        let e = exp_neg_taylor(c, count, 1.0);
        // each u_k is known to about rel_tol; the alternating e^{−v} series can cancel it away
        let bound: Vec<f64> = u.iter().zip(&u_err).map(|(z, d)| d + (self.rel_tol + 1e-15) * z.norm()).collect();
        Ok((convolve(&e, &u, ZERO), convolve_abs(&e, &bound)))
    }
}

/// f(v) = e^{−vτ} L_L(−v(1−τ)).
struct GFn {
    tau: f64,
    l: usize,
}

impl GFn {
    // monomial coefficients of L_L(−v(1−τ))
    fn poly(&self) -> Vec<f64> {
        let l = self.l;
        (0..=l)
            .map(|j| binomial(l, j) * ((1.0 - self.tau).powi(j as i32)) / specfun::factorial(j))
            .collect()
    }
}

impl Entire for GFn {
    fn values(&self, vs: &[Complex64]) -> Result<Vec<Complex64>> {
        let p = self.poly();
        Ok(vs
            .iter()
            .map(|&v| {
                let q = p.iter().rev().fold(ZERO, |s, &a| s * v + a);
                (-v * self.tau).exp() * q
            })
            .collect())
    }
    fn taylor(&self, c: f64, count: usize) -> Result<(Vec<Complex64>, Vec<f64>)> {
        let p = self.poly();
        let shifted: Vec<Complex64> = (0..count)
            .map(|m| {
                let s: f64 = (m..p.len()).map(|j| p[j] * binomial(j, m) * c.powi((j - m) as i32)).sum();
                cr(s)
            })
            .collect();
        let e = if self.tau == 0.0 {
            let mut e = vec![0.0; count];
            e[0] = 1.0;
            e
        } else {
            exp_neg_taylor(c, count, self.tau)
        };
        let scale = convolve_abs(&e, &shifted.iter().map(|z| z.norm()).collect::<Vec<_>>());
        Ok((convolve(&e, &shifted, ZERO), scale.into_iter().map(|m| 1e-15 * m).collect()))
    }
}

// ---------------------------------------------------------------------------
// polynomial helpers

/// Monomial coefficients (low to high) of ∏(s + ω_k) over `omegas`.
fn poly_from_shifts(omegas: &[f64]) -> Vec<f64> {
    let mut p = vec![1.0];
    for &w in omegas {
        let mut q = vec![0.0; p.len() + 1];
        for (i, &a) in p.iter().enumerate() {
            q[i] += a * w;
            q[i + 1] += a;
        }
        p = q;
    }
    p
}

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Coefficients b_n in the monic Laguerre basis: Σ_m a_m s^m = Σ_n b_n π_n(s),
/// using s^m = Σ_n m!·C(m,n)/n! π_n(s).
fn monomial_to_laguerre(a: &[f64]) -> Vec<f64> {
    (0..a.len())
        .map(|n| {
            (n..a.len())
                .map(|m| a[m] * (ln_factorial(m) - ln_factorial(n) + binomial(m, n).ln()).exp())
                .sum()
        })
        .collect()
}

/// e_k(t), k = 0..=len.
fn elementary(t: &[f64]) -> Vec<f64> {
    let mut e = vec![0.0; t.len() + 1];
    e[0] = 1.0;
    for (i, &x) in t.iter().enumerate() {
        for k in (1..=i + 1).rev() {
            e[k] += e[k - 1] * x;
        }
    }
    e
}

fn ln_p(t: f64, omegas: &[f64]) -> f64 {
    omegas.iter().map(|w| (t + w).ln()).sum()
}

fn ln_vdm2(t: &[f64]) -> Option<f64> {
    let mut s = 0.0;
    for i in 0..t.len() {
        for j in i + 1..t.len() {
            let d = (t[j] - t[i]).abs();
            if d == 0.0 {
                return None;
            }
            s += 2.0 * d.ln();
        }
    }
    Some(s)
}

/// Per-axis Gauss–Laguerre order exact for the L-fold normalisation integrand.
pub fn cubature_order(n: usize, l: usize) -> usize {
    48usize.max((n + 2 * l) / 2 + 2)
}

fn check_l(l: usize) -> Result<()> {
    if l > MAX_L {
        return Err(Error::Precondition(format!("L = {l} > {MAX_L}")));
    }
    Ok(())
}

/// ln Ñ_L = ln ∫ ∏_i ∏_j (t_i + ω_j) Δ²(t) ∏ e^{−t_i} dt.
pub fn norm_tilde_ln(params: &EnsembleParams) -> Result<f64> {
    let l = params.l;
    check_l(l)?;
    if l == 0 {
        return Ok(0.0);
    }
    let om = params.omegas();
    let order = cubature_order(params.n, l);
    let (v, s) = quad::tensor_laguerre_ln(l, order, |t| match ln_vdm2(t) {
        Some(lv) => (lv + t.iter().map(|&x| ln_p(x, &om)).sum::<f64>(), 1.0),
        None => (0.0, 0.0),
    })?;
    if s <= 0.0 {
        return Err(Error::Instability("normalisation integral not positive".into()));
    }
    Ok(v)
}

/// Ñ_L; exactly 1 at L = 0.
pub fn norm_tilde(params: &EnsembleParams) -> Result<EvalResult> {
    let ln = norm_tilde_ln(params)?;
    let v = ln.exp();
    if !v.is_finite() {
        return Err(Error::Overflow(format!("Ñ_L = exp({ln}) overflows; use norm_tilde_ln")));
    }
    let order = if params.l == 0 { vec![] } else { vec![cubature_order(params.n, params.l)] };
    Ok(EvalResult::real(v, 1e-13 * v * (1 + params.l) as f64, EvalMeta::with_orders(order)))
}

/// ln of the Mehta-type integral ∫Δ²(t)∏e^{−t_i}dt = L!·∏_{j<L} (j!)².
pub fn mehta_integral_ln(l: usize) -> f64 {
    if l == 0 {
        return 0.0;
    }
    ln_factorial(l) + (1..l).map(|j| 2.0 * ln_factorial(j)).sum::<f64>()
}

/// L!·∏_{j=1}^{L−1}(j!)². Exact in floating point while it fits in 53 bits.
pub fn mehta_integral(l: usize) -> Result<f64> {
    if l > 20 {
        return Err(Error::Domain(format!("mehta_integral: L = {l} > 20")));
    }
    let mut acc: u128 = (1..=l as u128).product();
    for j in 1..l as u128 {
        let f: u128 = (1..=j).product();
        match acc.checked_mul(f * f) {
            Some(v) => acc = v,
            None => return Ok(mehta_integral_ln(l).exp()),
        }
    }
    Ok(acc as f64)
}

/// W(s) = ∫ ∏_{m=2}^{L} P(t_m)(t_m − s) e^{−t_m} Δ²(t₂..t_L) dt as (ln|W|, sign).
fn w_ln(s: f64, l: usize, omegas: &[f64], order: usize) -> Result<(f64, f64)> {
    if l <= 1 {
        return Ok((0.0, 1.0));
    }
    quad::tensor_laguerre_ln(l - 1, order, |t| {
        let Some(lv) = ln_vdm2(t) else { return (0.0, 0.0) };
        let mut ln = lv;
        let mut sign = 1.0;
        for &x in t {
            let d = x - s;
            if d == 0.0 {
                return (0.0, 0.0);
            }
            ln += ln_p(x, omegas) + d.abs().ln();
            sign *= d.signum();
        }
        (ln, sign)
    })
}

/// W₂(t, s) = ∫ ∏_{m=2}^{L} P(t_m)(s − t_m)(t_m − t) e^{−t_m} Δ²(t₂..t_L) dt.
fn w2_ln(t0: f64, s: f64, l: usize, omegas: &[f64], order: usize) -> Result<(f64, f64)> {
    if l <= 1 {
        return Ok((0.0, 1.0));
    }
    quad::tensor_laguerre_ln(l - 1, order, |t| {
        let Some(lv) = ln_vdm2(t) else { return (0.0, 0.0) };
        let mut ln = lv;
        let mut sign = 1.0;
        for &x in t {
            let d = (s - x) * (x - t0);
            if d == 0.0 {
                return (0.0, 0.0);
            }
            ln += ln_p(x, omegas) + d.abs().ln();
            sign *= d.signum();
        }
        (ln, sign)
    })
}

fn check_off_support(y: Complex64, what: &str) -> Result<()> {
    let dist = if y.re < 0.0 { y.norm() } else { y.im.abs() };
    if !(dist > 1e-8 * (1.0 + y.norm())) {
        return Err(Error::Precondition(format!("{what} = {y} lies on the support [0, inf)")));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// inverse characteristic polynomial

/// E[∏ 1/(y − x_i)].
pub fn inverse_cp(params: &EnsembleParams, y: Complex64) -> Result<EvalResult> {
    inverse_cp_with(params, y, &EvalOptions::default())
}

pub fn inverse_cp_with(params: &EnsembleParams, y: Complex64, opts: &EvalOptions) -> Result<EvalResult> {
    check_off_support(y, "y")?;
    check_l(params.l)?;
    let om = params.omegas();
    let (n, l) = (params.n, params.l);
    let (plan, mode) = make_plan(&om, opts)?;
    let h = IcpFn { y, l, rel_tol: opts.rel_tol };
    let t = divided_differences(&om, plan, mode, &h)?;
    let mut meta = t.meta;
    let quad_err = 10.0 * opts.rel_tol;
    if l == 0 {
        let v = t.dd[n - 1];
        return EvalResult::complex(v, t.err[n - 1] + quad_err * v.norm(), meta);
    }
    let ln_nt = norm_tilde_ln(params)?;
    let order = cubature_order(n, l);
    let s_rule = laguerre_rule((n + l) / 2 + 2)?;
    let ws: Vec<(f64, f64)> = s_rule.nodes.iter().map(|&s| w_ln(s, l, &om, order)).collect::<Result<_>>()?;
    let mut value = ZERO;
    let mut mag = 0.0;
    let mut err = 0.0;
    for r in 0..n {
        let terms: Vec<(f64, f64)> = s_rule
            .nodes
            .iter()
            .zip(&s_rule.log_weights)
            .zip(&ws)
            .map(|((&s, &lw), &(lwv, sw))| (lw + lwv + ln_p(s, &om[..r]) - ln_nt, sw))
            .collect();
        let (ls, ss) = signed_lse(&terms);
        let sr = ss * ls.exp() * l as f64 * sgn(n - 1 - r);
        let term = t.dd[r] * sr;
        value += term;
        mag += term.norm();
        err += t.err[r] * sr.abs();
    }
    meta.orders.push(order);
    meta.orders.push(s_rule.order);
    EvalResult::complex(value, err + quad_err * mag, meta)
}

// ---------------------------------------------------------------------------
// characteristic polynomial

/// Ẽ_k = ∫∏P Δ² e_k(t) e^{−t} / Ñ_L, k = 0..=L.
fn e_tilde(params: &EnsembleParams) -> Result<Vec<f64>> {
    let l = params.l;
    if l == 0 {
        return Ok(vec![1.0]);
    }
    let om = params.omegas();
    let ln_nt = norm_tilde_ln(params)?;
    let order = cubature_order(params.n, l) + 1;
    let mut out = vec![1.0];
    for k in 1..=l {
        let (v, s) = quad::tensor_laguerre_ln(l, order, |t| match ln_vdm2(t) {
            Some(lv) => {
                let e = elementary(t)[k];
                (lv + t.iter().map(|&x| ln_p(x, &om)).sum::<f64>() + e.ln(), 1.0)
            }
            None => (0.0, 0.0),
        })?;
        out.push(s * (v - ln_nt).exp());
    }
    Ok(out)
}

/// Monomial coefficients of P(y)·V(y), V(y) = E[∏(y − t_i)] under the
/// normalised t-weight.
fn cp_integrand_poly(params: &EnsembleParams) -> Result<Vec<f64>> {
    let l = params.l;
    let e = e_tilde(params)?;
    let v: Vec<f64> = (0..=l).map(|m| sgn(l - m) * e[l - m]).collect();
    Ok(poly_mul(&poly_from_shifts(&params.omegas()), &v))
}

/// E[∏(z − x_i)].
pub fn cp(params: &EnsembleParams, z: Complex64) -> Result<EvalResult> {
    let (n, l) = (params.n, params.l);
    check_l(l)?;
    if l >= 1 && z == ZERO {
        return Err(Error::Precondition("cp argument z = 0 with L >= 1".into()));
    }
    let b = monomial_to_laguerre(&cp_integrand_poly(params)?);
    let mut value = ZERO;
    let mut mag = 0.0;
    for k in l..=n + l {
        let t = z.powu((k - l) as u32) * (b[k] * sgn(k));
        value += t;
        mag += t.norm();
    }
    value *= sgn(n + l);
    let meta = EvalMeta::with_orders(if l == 0 { vec![] } else { vec![cubature_order(n, l) + 1] });
    EvalResult::complex(value, 1e-14 * mag * (n + l + 1) as f64, meta)
}

/// E[∏(z − x_i)] by direct quadrature of the y-integral representation; a
/// cross-check for [`cp`] at moderate |z|.
pub fn cp_direct(params: &EnsembleParams, z: Complex64) -> Result<EvalResult> {
    let (n, l) = (params.n, params.l);
    if l >= 1 && z == ZERO {
        return Err(Error::Precondition("cp argument z = 0 with L >= 1".into()));
    }
    let poly = cp_integrand_poly(params)?;
    let cut = 800.0 + 4.0 * (n + l) as f64;
    if z.norm() * cut > 1e5 {
        return Err(Error::Domain(format!("cp_direct: |z| = {} too large", z.norm())));
    }
    let f = |y: f64| -> Result<Complex64> {
        if y > cut {
            return Ok(ZERO);
        }
        let p = poly.iter().rev().fold(0.0, |s, &a| s * y + a);
        Ok(hyp0f1_complex(1, -z * y)? * ((-y).exp() * p))
    };
    let (v, e) = quad::adaptive_semi(f, &[0.0, 1.0, 4.0, 16.0, 48.0], 16.0, 1e-15, 1e-13)?;
    let pref = z.exp() / z.powu(l as u32) * sgn(n + l);
    EvalResult::complex(v * pref, e * pref.norm(), EvalMeta::default())
}

// ---------------------------------------------------------------------------
// ratio and kernel

/// Coefficients β_n^{(r)} of Λ̃_r(v) = Σ_{n≥L} β_n (−1)^n v^{n−L}.
fn lambda_coeffs(params: &EnsembleParams) -> Result<Vec<Vec<f64>>> {
    let (n, l) = (params.n, params.l);
    let om = params.omegas();
    let phi = |r: usize| -> Vec<f64> { poly_from_shifts(&om[..r]).into_iter().map(|a| a * sgn(n - 1 - r)).collect() };
    if l == 0 {
        return Ok((0..n).map(|r| monomial_to_laguerre(&phi(r))).collect());
    }
    let p = poly_from_shifts(&om);
    let ln_nt = norm_tilde_ln(params)?;
    let order = cubature_order(n, l);
    let rule = laguerre_rule(n + l + 1)?;
    let deg = n + l;
    // B_r(s,t) = (P(t)φ_r(s) − P(s)φ_r(t))/(t − s) via
    // (t^i s^j − s^i t^j)/(t − s) = (st)^j h_{i−j−1}(s,t) for i > j
    let kern = |i: usize, j: usize, s: f64, t: f64| -> f64 {
        if i == j {
            return 0.0;
        }
        let (hi, lo, sign) = if i > j { (i, j, 1.0) } else { (j, i, -1.0) };
        let k = hi - lo - 1;
        let hk: f64 = (0..=k).map(|m| s.powi(m as i32) * t.powi((k - m) as i32)).sum();
        sign * (s * t).powi(lo as i32) * hk
    };
    let phis: Vec<Vec<f64>> = (0..n).map(phi).collect();
    let mut beta = vec![vec![0.0; deg]; n];
    for (&s, &lws) in rule.nodes.iter().zip(&rule.log_weights) {
        let mut q = vec![0.0; n];
        for (&t, &lwt) in rule.nodes.iter().zip(&rule.log_weights) {
            let (lw2, sw2) = w2_ln(t, s, l, &om, order)?;
            let w = sw2 * (lwt + lw2 - ln_nt).exp() * (s - t) * l as f64;
            if w == 0.0 {
                continue;
            }
            for r in 0..n {
                let mut b = 0.0;
                for (i, &pi) in p.iter().enumerate() {
                    for (j, &fj) in phis[r].iter().enumerate() {
                        b += pi * fj * kern(i, j, s, t);
                    }
                }
                q[r] += w * b;
            }
        }
        for nn in 0..deg {
            let pn = specfun::laguerre_monic(nn, s)?;
            let f = (lws - 2.0 * ln_factorial(nn)).exp() * pn;
            for r in 0..n {
                beta[r][nn] += f * q[r];
            }
        }
    }
    Ok(beta)
}

fn lambda_values(beta: &[Vec<f64>], l: usize, v: Complex64) -> Vec<Complex64> {
    beta.iter()
        .map(|b| {
            (l..b.len()).rev().fold(ZERO, |s, k| s * v + b[k] * sgn(k))
        })
        .collect()
}

fn gammas(om: &[f64], x: f64, plan: Plan, mode: ResidueMode) -> Result<DdTable> {
    divided_differences(om, plan, mode, &GammaFn { x })
}

fn x_cutoff(om: &[f64]) -> f64 {
    let wmax = om.iter().cloned().fold(0.0, f64::max);
    (wmax.sqrt() + (wmax + 780.0).sqrt()).powi(2)
}

/// E[∏ (v − x_i)/(z − x_i)].
pub fn ratio_cp(params: &EnsembleParams, v: Complex64, z: Complex64) -> Result<EvalResult> {
    ratio_cp_with(params, v, z, &EvalOptions::default())
}

pub fn ratio_cp_with(params: &EnsembleParams, v: Complex64, z: Complex64, opts: &EvalOptions) -> Result<EvalResult> {
    check_off_support(z, "z")?;
    check_l(params.l)?;
    let (n, l) = (params.n, params.l);
    let om = params.omegas();
    let (plan, mode) = make_plan(&om, opts)?;
    let lam = lambda_values(&lambda_coeffs(params)?, l, v);
    let cut = x_cutoff(&om);
    let f = |x: f64| -> Result<Complex64> {
        if x > cut {
            return Ok(ZERO);
        }
        let g = gammas(&om, x, plan, mode)?;
        let s: Complex64 = g.dd.iter().zip(&lam).map(|(a, b)| a * b).sum();
        Ok(s * ((v - x) / (z - x)) * (-x + l as f64 * x.ln()).exp())
    };
    let mut breaks = vec![0.0, 0.5, 2.0, 8.0, 24.0];
    if z.re > 0.0 {
        for x in [z.re - z.im.abs(), z.re, z.re + z.im.abs()] {
            if x > 0.0 && x < 24.0 {
                breaks.push(x);
            }
        }
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let (val, err) = quad::adaptive_semi(f, &breaks, 8.0, 1e-300, opts.rel_tol.max(1e-13))?;
    let mut meta = EvalMeta { residue_mode: Some(mode), ..Default::default() };
    if let Plan::Contour { radius, .. } = plan {
        meta.contour_radius = Some(radius);
    }
    meta.orders.push(n + l + 1);
    EvalResult::complex(val * sgn(n + l + 1), err, meta)
}

/// Correlation kernel K_N(x, y), oriented so that ∫K(x,t)K(t,y)dt = K(x,y)
/// and the density is K(x,x).
pub fn kernel(params: &EnsembleParams, x: f64, y: f64) -> Result<EvalResult> {
    kernel_with(params, x, y, &EvalOptions::default())
}

pub fn kernel_with(params: &EnsembleParams, x: f64, y: f64, opts: &EvalOptions) -> Result<EvalResult> {
    if !(x > 0.0 && y > 0.0) || !x.is_finite() || !y.is_finite() {
        return Err(Error::Precondition(format!("kernel needs x, y > 0 (got {x}, {y})")));
    }
    check_l(params.l)?;
    let kc = KernelCoeffs::new(params, opts)?;
    kc.eval(x, y)
}

/// Precomputed Λ̃ coefficients for repeated kernel evaluation.
pub struct KernelCoeffs {
    n: usize,
    l: usize,
    om: Vec<f64>,
    beta: Vec<Vec<f64>>,
    plan: Plan,
    mode: ResidueMode,
}

impl KernelCoeffs {
    pub fn new(params: &EnsembleParams, opts: &EvalOptions) -> Result<Self> {
        let om = params.omegas();
        let (plan, mode) = make_plan(&om, opts)?;
        Ok(KernelCoeffs { n: params.n, l: params.l, beta: lambda_coeffs(params)?, om, plan, mode })
    }

    /// K(x, y); the error estimate reflects cancellation in the r-sum.
    pub fn eval(&self, x: f64, y: f64) -> Result<EvalResult> {
        let lam = lambda_values(&self.beta, self.l, cr(x));
        let g = gammas(&self.om, y, self.plan, self.mode)?;
        let mut s = ZERO;
        let mut mag = 0.0;
        let mut err = 0.0;
        for r in 0..self.n {
            let t = g.dd[r] * lam[r];
            s += t;
            mag += t.norm();
            err += g.err[r] * lam[r].norm();
        }
        let pref = sgn(self.n + self.l + 1) * (-y + self.l as f64 * y.ln()).exp();
        let mut meta = g.meta;
        meta.orders.push(self.n + self.l + 1);
        EvalResult::complex(s * pref, (err + 1e-15 * mag) * pref.abs(), meta)
    }

    /// Σ|terms|/|K|: the cancellation factor of the r-sum at (x, y).
    pub fn condition(&self, x: f64, y: f64) -> Result<f64> {
        let lam = lambda_values(&self.beta, self.l, cr(x));
        let g = gammas(&self.om, y, self.plan, self.mode)?;
        let terms: Vec<Complex64> = g.dd.iter().zip(&lam).map(|(a, b)| a * b).collect();
        let s: Complex64 = terms.iter().sum();
        Ok(terms.iter().map(|t| t.norm()).sum::<f64>() / s.norm())
    }
}

// ---------------------------------------------------------------------------
// 𝒟 and 𝒢

fn check_dg(n: usize, l: usize, z_sq: f64) -> Result<()> {
    if n == 0 || n > MAX_N {
        return Err(Error::Precondition(format!("N = {n} outside 1..={MAX_N}")));
    }
    check_l(l)?;
    if !(z_sq >= 0.0) || !z_sq.is_finite() {
        return Err(Error::Precondition(format!("|z|^2 = {z_sq} must be >= 0")));
    }
    Ok(())
}

// ∫₀¹ exp(φ(τ)) dτ for a log-integrand φ, as (ln value, relative error).
fn integrate_unit_ln<F: Fn(f64) -> f64>(phi: F, extra_breaks: &[f64]) -> Result<(f64, f64)> {
    let grid = 4096;
    let (mut arg, mut fmax) = (0.5, f64::NEG_INFINITY);
    for k in 1..grid {
        let t = k as f64 / grid as f64;
        let v = phi(t);
        if v > fmax {
            fmax = v;
            arg = t;
        }
    }
    for k in 1..=12 {
        let t = 1.0 - 10f64.powi(-k);
        let v = phi(t);
        if v > fmax {
            fmax = v;
            arg = t;
        }
    }
    if !fmax.is_finite() {
        return Err(Error::Instability("log-integrand has no finite maximum".into()));
    }
    let mut breaks = vec![0.0, arg, 1.0];
    breaks.extend((1..=12).map(|k| 1.0 - 10f64.powi(-k)));
    breaks.extend(extra_breaks.iter().copied().filter(|b| *b > 0.0 && *b < 1.0));
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let mut total = 0.0;
    let mut err = 0.0;
    for w in breaks.windows(2) {
        let (v, e) = quad::adaptive_real(
            |t| {
                let a = phi(t) - fmax;
                if a.is_nan() {
                    0.0
                } else {
                    a.exp()
                }
            },
            w[0],
            w[1],
            1e-17,
            1e-13,
        )?;
        total += v;
        err += e;
    }
    if !(total > 0.0) {
        return Err(Error::Instability("log-integral not positive".into()));
    }
    Ok((fmax + total.ln(), err / total + 1e-14))
}

/// ln 𝒢 in closed form for L ∈ {0, 1}.
pub fn g_function_ln(n: usize, l: usize, rho: f64, tau: f64) -> Result<f64> {
    check_dg(n, l, rho)?;
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::Precondition(format!("tau = {tau} outside (0, 1)")));
    }
    let nf = n as f64;
    match l {
        0 => Ok(-rho * tau + (nf - 1.0) * tau.ln() - ln_factorial(n - 1)),
        1 => {
            let lg = specfun::gamma_upper_ln(n, rho)?;
            let r = (nf * rho.ln() - rho - lg).exp();
            let bracket = nf + r - tau * rho;
            Ok(rho * (1.0 - tau) + (nf - 1.0) * tau.ln() - ln_factorial(n - 1) + lg + bracket.ln())
        }
        _ => Err(Error::Precondition(format!("closed-form 𝒢 only for L <= 1 (got {l})"))),
    }
}

/// ln 𝒟^{(L)}_N(z, p) for L ∈ {0, 1} from the one-dimensional τ-integrals;
/// returns (ln value, relative error).
pub fn d_function_ln(n: usize, l: usize, z_sq: f64, p: f64) -> Result<(f64, f64)> {
    check_dg(n, l, z_sq)?;
    if !(p > 0.0) || !p.is_finite() {
        return Err(Error::Precondition(format!("p = {p} must be > 0")));
    }
    let nf = n as f64;
    match l {
        0 => {
            let c = ln_factorial(n - 1);
            integrate_unit_ln(
                |t| -p * t / (1.0 - t) - z_sq * t + (nf - 1.0) * t.ln() - (1.0 - t).ln() - c,
                &[1.0 - p.min(1.0), 1.0 / (1.0 + p)],
            )
        }
        1 => {
            let lg = specfun::gamma_upper_ln(n, z_sq)?;
            let r = (nf * z_sq.ln() - z_sq - lg).exp();
            let c = ln_factorial(n - 1) - lg;
            integrate_unit_ln(
                |t| {
                    -p * t / (1.0 - t) + z_sq * (1.0 - t) + (nf - 1.0) * t.ln() - c
                        + (nf + r - t * z_sq).ln()
                },
                &[1.0 - p.min(1.0), 1.0 / (1.0 + p)],
            )
        }
        _ => Err(Error::Precondition(format!("one-dimensional 𝒟 only for L <= 1 (got {l})"))),
    }
}

/// 𝒟^{(L)}_N(z, p): τ-integral closed forms for L ≤ 1, the general
/// contour/cubature expression for L ≥ 2.
pub fn d_function(n: usize, l: usize, z_sq: f64, p: f64) -> Result<EvalResult> {
    if l >= 2 {
        return d_function_general(n, l, z_sq, p, &EvalOptions::default());
    }
    let (ln, rel) = d_function_ln(n, l, z_sq, p)?;
    let v = ln.exp();
    Ok(EvalResult::real(v, rel * v, EvalMeta::default()))
}

/// 𝒟 from the inverse characteristic polynomial of the degenerate ensemble:
/// 𝒟 = (−1)^N Ñ_L E[∏ 1/(−p − x_i)] / (L!∏_{j<L}(j!)²).
pub fn d_function_general(n: usize, l: usize, z_sq: f64, p: f64, opts: &EvalOptions) -> Result<EvalResult> {
    check_dg(n, l, z_sq)?;
    if !(p > 0.0) || !p.is_finite() {
        return Err(Error::Precondition(format!("p = {p} must be > 0")));
    }
    let params = EnsembleParams::degenerate(n, l, z_sq)?;
    let q = inverse_cp_with(&params, cr(-p), opts)?;
    let f = sgn(n) * (norm_tilde_ln(&params)? - mehta_integral_ln(l)).exp();
    Ok(EvalResult { value: q.value * f, abs_err: q.abs_err * f.abs(), meta: q.meta })
}

fn check_tau(tau: f64) -> Result<()> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::Precondition(format!("tau = {tau} outside (0, 1)")));
    }
    Ok(())
}

/// 𝒢^{(L)}_N(ρ, τ). L = 0 and L = 1 with N > 40 use the closed forms,
/// otherwise the contour/cubature representation.
pub fn g_function(n: usize, l: usize, rho: f64, tau: f64) -> Result<EvalResult> {
    check_dg(n, l, rho)?;
    check_tau(tau)?;
    if l == 0 || (l == 1 && n > 40) {
        let v = g_function_ln(n, l, rho, tau)?.exp();
        return Ok(EvalResult::real(v, 1e-13 * v, EvalMeta::default()));
    }
    g_function_contour(n, l, rho, tau, &EvalOptions::default())
}

/// 𝒢 from its contour representation,
/// (−1)^{N−1}/∏_{j<L}(j!)² ∫Δ²∏(t_k+ρ)^N e^{−t} (1/2πi)∮ e^{−vτ}L_L(−v(1−τ)) / ((v−ρ)^N ∏(t_k+v)) dv dt.
pub fn g_function_contour(n: usize, l: usize, rho: f64, tau: f64, opts: &EvalOptions) -> Result<EvalResult> {
    check_dg(n, l, rho)?;
    check_tau(tau)?;
    let om = vec![rho; n];
    let (plan, mode) = make_plan(&om, opts)?;
    let t = divided_differences(&om, plan, mode, &GFn { tau, l })?;
    let pref = sgn(n - 1) * (-(1..l).map(|j| 2.0 * ln_factorial(j)).sum::<f64>()).exp();
    if l == 0 {
        let v = t.dd[n - 1] * pref;
        return EvalResult::complex(v, t.err[n - 1], t.meta);
    }
    let order = cubature_order(n, l);
    let rule = laguerre_rule((n + l) / 2 + 2)?;
    let mut terms = Vec::with_capacity(rule.order);
    let mut err_terms = Vec::with_capacity(rule.order);
    for (&s, &lw) in rule.nodes.iter().zip(&rule.log_weights) {
        let (lwv, sw) = w_ln(s, l, &om, order)?;
        let mut sum = ZERO;
        let mut esum = 0.0;
        for r in 0..n {
            let phi = sgn(n - 1 - r) * (s + rho).powi(r as i32);
            sum += t.dd[r] * phi;
            esum += t.err[r] * phi.abs();
        }
        terms.push((lw + lwv + sum.re.abs().ln(), sw * sum.re.signum()));
        err_terms.push((lw + lwv + esum.ln(), 1.0));
    }
    let (lv, sv) = signed_lse(&terms);
    let (le, _) = signed_lse(&err_terms);
    let f = pref * l as f64;
    let v = sv * (lv + f.abs().ln()).exp() * f.signum();
    let mut meta = t.meta;
    meta.orders.push(order);
    Ok(EvalResult::real(v, (le + f.abs().ln()).exp() + 1e-13 * v.abs(), meta))
}

/// 𝒢 from the derivative form, with the ρ-derivatives taken exactly through
/// Leibniz' rule and the partial fractions of 1/∏(t_k + ρ).
pub fn g_function_derivative(n: usize, l: usize, rho: f64, tau: f64) -> Result<EvalResult> {
    check_dg(n, l, rho)?;
    check_tau(tau)?;
    let (f, f_err) = GFn { tau, l }.taylor(rho, n)?;
    let pref = sgn(n - 1) * (-(1..l).map(|j| 2.0 * ln_factorial(j)).sum::<f64>()).exp();
    if l == 0 {
        return Ok(EvalResult::real(pref * f[n - 1].re, f_err[n - 1] + 1e-13 * f[n - 1].norm(), EvalMeta::default()));
    }
    let order = cubature_order(n, l);
    let (lv, sv) = quad::tensor_laguerre_ln(l, order, |t| {
        let Some(lvdm) = ln_vdm2(t) else { return (0.0, 0.0) };
        let mut acc = Vec::with_capacity(l);
        for k in 0..l {
            // ∏_{m≠k} (t_m+ρ)^N/(t_m−t_k), then Σ_j f_{N−1−j}(−1)^j (t_k+ρ)^{N−1−j}
            let mut ln = 0.0;
            let mut sign = 1.0;
            for m in 0..l {
                if m != k {
                    let d = t[m] - t[k];
                    ln += n as f64 * (t[m] + rho).ln() - d.abs().ln();
                    sign *= d.signum();
                }
            }
            let tk = t[k] + rho;
            let inner: f64 = (0..n).map(|j| f[n - 1 - j].re * sgn(j) * tk.powi((n - 1 - j) as i32)).sum();
            acc.push((lvdm + ln + inner.abs().ln(), sign * inner.signum()));
        }
        signed_lse(&acc)
    })?;
    let v = sv * (lv).exp() * pref;
    Ok(EvalResult::real(v, 1e-11 * v.abs(), EvalMeta::with_orders(vec![order])))
}
