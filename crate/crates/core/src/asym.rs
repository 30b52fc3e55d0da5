//! Joint bulk-edge limits for the degenerate source |z|² = N·R and sweeps
//! comparing scaled finite-N values against them.
//!
//! Finite-N values come only from representations that stay stable at
//! large N: the τ-integrals for the inverse characteristic polynomial, a
//! positive finite sum for the characteristic polynomial, the closed form of
//! 𝒢 at L = 1, and the Taylor-mode kernel for moderate N.

use crate::error::{Error, Result};
use crate::exact::{self, EnsembleParams, EvalOptions, KernelCoeffs, ResidueMode};
use crate::par::{map_indexed, Exec};
use crate::quad;
use crate::specfun::{
    bessel_i, bessel_j, bessel_j_all, bessel_k, binomial, gamma_upper_ln, laguerre, ln_factorial, signed_lse,
};
use serde::Serialize;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalingParams {
    /// |z|² = N·R.
    pub r: f64,
    /// 1 − R.
    pub r_star: f64,
    /// Scaled inverse-CP / CP argument: p = ξ/(N R★).
    pub xi: f64,
    /// Scaled kernel arguments: x = α/(N R★), y = β/(N R★).
    pub alpha: f64,
    pub beta: f64,
    /// τ = 1 − a/N.
    pub a: f64,
    /// ρ = N w².
    pub w: f64,
}

impl ScalingParams {
    pub fn new(r: f64) -> Result<Self> {
        if !(r > 0.0 && r < 1.0) {
            return Err(Error::Precondition(format!(
                "R = {r}: the bulk-edge limit needs 0 < R < 1 (saddle point on the negative axis)"
            )));
        }
        Ok(ScalingParams { r, r_star: 1.0 - r, xi: 1.0, alpha: 1.0, beta: 2.0, a: 1.0, w: 0.5f64.sqrt() })
    }
}

/// √(2/π) ξ^{L/2} K_L(2√ξ).
pub fn inverse_cp_limit(l: usize, xi: f64) -> Result<f64> {
    if !(xi > 0.0) {
        return Err(Error::Precondition(format!("xi = {xi} must be > 0")));
    }
    Ok((2.0 / PI).sqrt() * xi.powf(0.5 * l as f64) * bessel_k(l, 2.0 * xi.sqrt())?)
}

/// (−1)^L √(2π) ξ^{−L/2} I_L(2√ξ).
pub fn cp_limit(l: usize, xi: f64) -> Result<f64> {
    if !(xi > 0.0) {
        return Err(Error::Precondition(format!("xi = {xi} must be > 0")));
    }
    let s = if l % 2 == 0 { 1.0 } else { -1.0 };
    Ok(s * (2.0 * PI).sqrt() * xi.powf(-0.5 * l as f64) * bessel_i(l, 2.0 * xi.sqrt())?)
}

// J_{n}(x) with J_{−1} = −J_1
fn jn(n: i64, x: f64) -> Result<f64> {
    if n < 0 {
        Ok(-bessel_j(1, x)?)
    } else {
        bessel_j(n as usize, x)
    }
}

/// ∫₀¹ J_L(a√τ) J_L(b√τ) dτ in closed form, a ≠ b.
fn jj_closed(l: usize, a: f64, b: f64) -> Result<f64> {
    let li = l as i64;
    Ok(2.0 * (b * jn(li - 1, b)? * jn(li, a)? - a * jn(li - 1, a)? * jn(li, b)?) / (a * a - b * b))
}

fn jj_quad(l: usize, a: f64, b: f64) -> Result<f64> {
    let f = |t: f64| {
        let s = t.sqrt();
        bessel_j(l, a * s).unwrap_or(f64::NAN) * bessel_j(l, b * s).unwrap_or(f64::NAN)
    };
    let (v, _) = quad::adaptive_real(f, 0.0, 1.0, 1e-16, 1e-13)?;
    if !v.is_finite() {
        return Err(Error::Domain("Bessel argument out of range".into()));
    }
    Ok(v)
}

/// (β/α)^{L/2} ∫₀¹ J_L(2√(ατ)) J_L(2√(βτ)) dτ; closed form off the diagonal,
/// quadrature when α and β agree to 1e−4.
pub fn kernel_limit(l: usize, alpha: f64, beta: f64) -> Result<f64> {
    if !(alpha > 0.0 && beta > 0.0) {
        return Err(Error::Precondition(format!("alpha, beta must be > 0 (got {alpha}, {beta})")));
    }
    let (a, b) = (2.0 * alpha.sqrt(), 2.0 * beta.sqrt());
    let pref = (beta / alpha).powf(0.5 * l as f64);
    let jj = if (alpha - beta).abs() <= 1e-4 * alpha.max(beta) { jj_quad(l, a, b)? } else { jj_closed(l, a, b)? };
    Ok(pref * jj)
}

/// The same limit by direct quadrature of the J_L·J_L integral.
pub fn kernel_limit_quad(l: usize, alpha: f64, beta: f64) -> Result<f64> {
    if !(alpha > 0.0 && beta > 0.0) {
        return Err(Error::Precondition(format!("alpha, beta must be > 0 (got {alpha}, {beta})")));
    }
    Ok((beta / alpha).powf(0.5 * l as f64) * jj_quad(l, 2.0 * alpha.sqrt(), 2.0 * beta.sqrt())?)
}

/// The limit in its subtracted form, (β/α)^L ∫₀¹ J₀(2√(βτ))·[J₀(2√(ατ)) − Σ_{k<L} …] dτ.
pub fn kernel_limit_subtracted(l: usize, alpha: f64, beta: f64) -> Result<f64> {
    Ok(kernel_identity_check(l, 2.0 * alpha.sqrt(), 2.0 * beta.sqrt())?.0)
}

/// Both sides of the Bessel identity
/// (b/a)^{2L} ∫₀¹ J₀(b√τ)[J₀(a√τ) − Σ_{k<L}(1−τ)^k (a/2)^k J_k(a)/k!] dτ
///   = (b/a)^L ∫₀¹ J_L(a√τ) J_L(b√τ) dτ,
/// left side by quadrature, right side in closed form. Returns (lhs, rhs, |lhs − rhs|).
pub fn kernel_identity_check(l: usize, a: f64, b: f64) -> Result<(f64, f64, f64)> {
    if !(a > 0.0 && b > 0.0) || a == b {
        return Err(Error::Precondition(format!("need a, b > 0 and a != b (got {a}, {b})")));
    }
    // J₀(a√τ) = Σ_k (1−τ)^k (a/2)^k J_k(a)/k!, so the bracket is the k ≥ L
    // tail; summing the tail avoids cancelling O(1) terms at small a.
    let kmax = 40 + l;
    let jk = bessel_j_all(kmax, a)?;
    let coef: Vec<f64> = (0..=kmax).map(|k| jk[k] * (k as f64 * (0.5 * a).ln() - ln_factorial(k)).exp()).collect();
    let bracket = |t: f64| -> f64 {
        let d = 1.0 - t;
        let mut s = 0.0;
        let mut p = d.powi(l as i32);
        for c in &coef[l..] {
            let term = c * p;
            s += term;
            if term.abs() < 1e-18 * s.abs() {
                break;
            }
            p *= d;
        }
        s
    };
    let f = |t: f64| bessel_j(0, b * t.sqrt()).unwrap_or(f64::NAN) * bracket(t);
    let (integral, _) = quad::adaptive_real(f, 0.0, 1.0, 1e-18, 1e-13)?;
    if !integral.is_finite() {
        return Err(Error::Domain("Bessel argument out of range".into()));
    }
    let lhs = (b / a).powi(2 * l as i32) * integral;
    let rhs = (b / a).powi(l as i32) * jj_closed(l, a, b)?;
    Ok((lhs, rhs, (lhs - rhs).abs()))
}

/// (∏_{k≤L} k!)(2π)^{(L−1)/2} e^{−a(1−w²)}(1−w²)^L.
pub fn g_limit(l: usize, w: f64, a: f64) -> Result<f64> {
    if !(a > 0.0) {
        return Err(Error::Precondition(format!("a = {a} must be > 0")));
    }
    let q = 1.0 - w * w;
    let lnp: f64 = (1..=l).map(ln_factorial).sum();
    Ok((lnp + 0.5 * (l as f64 - 1.0) * (2.0 * PI).ln()).exp() * (-a * q).exp() * q.powi(l as i32))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepKind {
    InverseCp,
    Cp,
    Kernel,
    G,
}

impl fmt::Display for SweepKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepKind::InverseCp => "inverse-cp",
            SweepKind::Cp => "cp",
            SweepKind::Kernel => "kernel",
            SweepKind::G => "g",
        })
    }
}

impl FromStr for SweepKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "inverse-cp" | "icp" => Ok(SweepKind::InverseCp),
            "cp" => Ok(SweepKind::Cp),
            "kernel" => Ok(SweepKind::Kernel),
            "g" => Ok(SweepKind::G),
            _ => Err(Error::Config(format!("unknown sweep kind '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub n: usize,
    pub finite: f64,
    pub limit: f64,
    pub rel_err: f64,
    /// Why the row was dropped, if it was.
    pub dropped: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepTable {
    pub kind: SweepKind,
    pub l: usize,
    pub scaling: ScalingParams,
    pub rows: Vec<SweepRow>,
    /// |rel_err| strictly decreasing over the kept rows.
    pub decreasing: bool,
    /// |rel_err| of the last kept row.
    pub final_rel_err: f64,
}

/// ln Q_N(p) for the degenerate source, L ∈ {0, 1}.
pub fn inverse_cp_degenerate_ln(n: usize, l: usize, rho: f64, p: f64) -> Result<f64> {
    let (ld, _) = exact::d_function_ln(n, l, rho, p)?;
    match l {
        0 => Ok(ld),
        // Ñ₁ = e^ρ Γ(N+1, ρ)
        1 => Ok(ld - rho - gamma_upper_ln(n + 1, rho)?),
        _ => Err(Error::Precondition(format!("stable inverse-CP form only for L <= 1 (got {l})"))),
    }
}

/// ln P_N(p), P_N(p) = E[∏(p + x_i)] at L = 0 for the degenerate source:
/// Σ_k C(N,k) ρ^{N−k} k! L_k(−p), a sum of positive terms.
pub fn cp_degenerate_ln(n: usize, rho: f64, p: f64) -> Result<f64> {
    if !(p >= 0.0) || !(rho >= 0.0) {
        return Err(Error::Precondition("cp_degenerate_ln needs p, rho >= 0".into()));
    }
    let mut terms = Vec::with_capacity(n + 1);
    for k in 0..=n {
        if rho == 0.0 && k < n {
            continue;
        }
        let lr = if k == n { 0.0 } else { (n - k) as f64 * rho.ln() };
        terms.push((binomial(n, k).ln() + lr + ln_factorial(k) + laguerre(k, -p)?.ln(), 1.0));
    }
    Ok(signed_lse(&terms).0)
}

fn sweep_row(kind: SweepKind, l: usize, s: &ScalingParams, n: usize) -> Result<SweepRow> {
    let nf = n as f64;
    let rho = nf * s.r;
    let ns = nf * s.r_star;
    let (finite, limit, dropped) = match kind {
        SweepKind::InverseCp => {
            let lq = inverse_cp_degenerate_ln(n, l, rho, s.xi / ns)?;
            let v = ((nf + l as f64 - 0.5) * nf.ln() - ns + lq).exp();
            (v, inverse_cp_limit(l, s.xi)?, None)
        }
        SweepKind::Cp => {
            let lp = cp_degenerate_ln(n, rho, s.xi / ns)?;
            let v = (ns - (nf + 0.5) * nf.ln() + lp).exp();
            (v, cp_limit(0, s.xi)?, None)
        }
        SweepKind::Kernel => {
            let params = EnsembleParams::degenerate(n, 0, rho)?;
            let opts = EvalOptions { mode: ResidueMode::Taylor, ..Default::default() };
            let kc = KernelCoeffs::new(&params, &opts)?;
            let (x, y) = (s.alpha / ns, s.beta / ns);
            let cond = kc.condition(x, y)?;
            let v = kc.eval(x, y)?.re() / ns;
            let dropped = (cond > 1e10).then(|| format!("cancellation factor {cond:.2e} > 1e10"));
            (v, kernel_limit(0, s.alpha, s.beta)?, dropped)
        }
        SweepKind::G => {
            let rho = nf * s.w * s.w;
            let lg = exact::g_function_ln(n, l, rho, 1.0 - s.a / nf)?;
            let scale = (nf - 0.5) * (l as f64 - 1.0) + 1.0;
            ((lg - scale * nf.ln()).exp(), g_limit(l, s.w, s.a)?, None)
        }
    };
    Ok(SweepRow { n, finite, limit, rel_err: (finite - limit) / limit, dropped })
}

/// Scaled finite-N values against the limit for each N in `n_list`.
pub fn convergence_sweep(
    kind: SweepKind,
    l: usize,
    scaling: &ScalingParams,
    n_list: &[usize],
    exec: Exec,
) -> Result<SweepTable> {
    if n_list.is_empty() || n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Precondition("n_list must be nonempty and strictly ascending".into()));
    }
    if !(scaling.r > 0.0 && scaling.r < 1.0) || (scaling.r + scaling.r_star - 1.0).abs() > 1e-12 {
        return Err(Error::Precondition(format!(
            "R = {}: the bulk-edge limit needs 0 < R < 1 and R* = 1 - R",
            scaling.r
        )));
    }
    match kind {
        SweepKind::InverseCp | SweepKind::G if l > 1 => {
            return Err(Error::Precondition(format!("{kind} sweep supports L <= 1 (got {l})")))
        }
        SweepKind::Cp | SweepKind::Kernel if l != 0 => {
            return Err(Error::Precondition(format!("{kind} sweep supports L = 0 only (got {l})")))
        }
        SweepKind::Cp | SweepKind::Kernel if n_list.iter().any(|&n| n > 80) => {
            return Err(Error::Precondition(format!("{kind} sweep supports N <= 80")))
        }
        SweepKind::G if !(scaling.w.abs() < 1.0) => {
            return Err(Error::Precondition(format!("w = {} must satisfy w^2 < 1", scaling.w)))
        }
        _ => {}
    }
    if n_list.iter().any(|&n| n == 0 || n > exact::MAX_N) {
        return Err(Error::Precondition(format!("N must lie in 1..={}", exact::MAX_N)));
    }
    let rows: Vec<Result<SweepRow>> = map_indexed(exec, n_list.len(), |i| sweep_row(kind, l, scaling, n_list[i]));
    let rows: Vec<SweepRow> = rows.into_iter().collect::<Result<_>>()?;
    let kept: Vec<f64> = rows.iter().filter(|r| r.dropped.is_none()).map(|r| r.rel_err.abs()).collect();
    let decreasing = !kept.is_empty() && kept.windows(2).all(|w| w[1] < w[0]);
    let final_rel_err = kept.last().copied().unwrap_or(f64::NAN);
    Ok(SweepTable { kind, l, scaling: *scaling, rows, decreasing, final_rel_err })
}
