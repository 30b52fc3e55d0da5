//! Quadrature: Gauss–Laguerre and Gauss–Hermite rules (Golub–Welsch),
//! circle rules for residues, adaptive Gauss–Kronrod on finite and
//! semi-infinite ranges, and tensor-product Laguerre cubature.

use crate::error::{Error, Result};
use crate::exact::{EvalMeta, EvalResult};
use crate::linalg;
use crate::specfun::{ln_factorial, signed_lse};
use num_complex::Complex64;
use std::collections::{BinaryHeap, HashMap};
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RuleKind {
    Laguerre,
    Hermite,
    Circle,
}

#[derive(Debug, Clone)]
pub struct QuadRule {
    pub nodes: Vec<f64>,
    /// Weights; the largest Laguerre nodes of high-order rules underflow to 0
    /// here, `log_weights` keeps them.
    pub weights: Vec<f64>,
    pub log_weights: Vec<f64>,
    pub kind: RuleKind,
    pub order: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContourRule {
    pub center: Complex64,
    pub radius: f64,
    pub order: usize,
}

impl ContourRule {
    pub fn new(center: Complex64, radius: f64, order: usize) -> Result<Self> {
        if !(radius > 0.0) || order == 0 {
            return Err(Error::Domain(format!("contour radius {radius}, order {order}")));
        }
        Ok(ContourRule { center, radius, order })
    }

    /// Node `m` of the rule and the unit phase e^{iθ_m}.
    pub fn point(&self, m: usize) -> (Complex64, Complex64) {
        let th = 2.0 * PI * (m as f64 + 0.5) / self.order as f64;
        let e = Complex64::from_polar(1.0, th);
        (self.center + self.radius * e, e)
    }

    /// (1/2πi)∮ f(v) dv ≈ (r/M) Σ f(v_m) e^{iθ_m}.
    pub fn apply<F: Fn(Complex64) -> Result<Complex64>>(&self, f: F) -> Result<Complex64> {
        let mut s = Complex64::new(0.0, 0.0);
        for m in 0..self.order {
            let (v, e) = self.point(m);
            s += f(v)? * e;
        }
        Ok(s * (self.radius / self.order as f64))
    }
}

/// Trapezoidal circle rule for (1/2πi)∮ f(v) dv.
pub fn contour_residue<F: Fn(Complex64) -> Complex64>(
    center: Complex64,
    radius: f64,
    order: usize,
    f: F,
) -> Result<Complex64> {
    ContourRule::new(center, radius, order)?.apply(|v| Ok(f(v)))
}

fn rule_cache() -> &'static Mutex<HashMap<(RuleKind, usize), Arc<QuadRule>>> {
    static CACHE: OnceLock<Mutex<HashMap<(RuleKind, usize), Arc<QuadRule>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

fn cached(kind: RuleKind, n: usize) -> Result<Arc<QuadRule>> {
    if let Some(r) = rule_cache().lock().unwrap().get(&(kind, n)) {
        return Ok(r.clone());
    }
    let rule = Arc::new(match kind {
        RuleKind::Laguerre => build_laguerre(n)?,
        RuleKind::Hermite => build_hermite(n)?,
        RuleKind::Circle => unreachable!(),
    });
    rule_cache().lock().unwrap().insert((kind, n), rule.clone());
    Ok(rule)
}

/// Gauss–Laguerre rule for ∫₀^∞ f(x) e^{-x} dx.
pub fn gauss_laguerre_rule(n: usize) -> Result<QuadRule> {
    Ok((*laguerre_rule(n)?).clone())
}

/// Shared, cached Gauss–Laguerre rule.
pub fn laguerre_rule(n: usize) -> Result<Arc<QuadRule>> {
    if n == 0 || n > 512 {
        return Err(Error::Domain(format!("Gauss-Laguerre order {n} outside 1..=512")));
    }
    cached(RuleKind::Laguerre, n)
}

/// Gauss–Hermite rule for ∫ f(x) e^{-x²/2} dx.
pub fn gauss_hermite_rule(n: usize) -> Result<QuadRule> {
    Ok((*hermite_rule(n)?).clone())
}

pub fn hermite_rule(n: usize) -> Result<Arc<QuadRule>> {
    if n == 0 || n > 512 {
        return Err(Error::Domain(format!("Gauss-Hermite order {n} outside 1..=512")));
    }
    cached(RuleKind::Hermite, n)
}

// Scaled three-term recurrence for L_{n-1}(x), L_n(x): returns (ln scale, a, b)
// with L_{n-1} = a·e^scale and L_n = b·e^scale.
fn laguerre_pair(n: usize, x: f64) -> (f64, f64, f64) {
    let (mut p0, mut p1) = (1.0f64, 1.0 - x);
    let mut scale = 0.0;
    for k in 1..n {
        let kf = k as f64;
        let p2 = ((2.0 * kf + 1.0 - x) * p1 - kf * p0) / (kf + 1.0);
        p0 = p1;
        p1 = p2;
        let a = p0.abs().max(p1.abs());
        if a > 1e100 {
            p0 /= a;
            p1 /= a;
            scale += a.ln();
        }
    }
    (scale, p0, p1)
}

fn build_laguerre(n: usize) -> Result<QuadRule> {
    let diag: Vec<f64> = (0..n).map(|k| (2 * k + 1) as f64).collect();
    let off: Vec<f64> = (1..n).map(|k| k as f64).collect();
    let (mut nodes, z) = linalg::tridiag_eigen(&diag, &off)?;
    let mut log_weights = Vec::with_capacity(n);
    for (x, zi) in nodes.iter_mut().zip(&z) {
        if n > 1 {
            // Newton on L_n: L_n' = n (L_n - L_{n-1}) / x
            for _ in 0..3 {
                let (_, a, b) = laguerre_pair(n, *x);
                let step = *x * b / (n as f64 * (b - a));
                if !step.is_finite() {
                    break;
                }
                *x -= step;
                if step.abs() <= 1e-16 * x.abs() {
                    break;
                }
            }
        }
        // Large weights from the eigenvector (the recurrence for L_{n-1}
        // cancels at small x), tiny ones from w = x / (n L_{n-1}(x))².
        let lw = if n == 1 {
            0.0
        } else if zi * zi > 1e-4 {
            (zi * zi).ln()
        } else {
            let (s, a, _) = laguerre_pair(n, *x);
            x.ln() - 2.0 * ((n as f64).ln() + s + a.abs().ln())
        };
        log_weights.push(lw);
    }
    let weights = log_weights.iter().map(|l| l.exp()).collect();
    Ok(QuadRule { nodes, weights, log_weights, kind: RuleKind::Laguerre, order: n })
}

fn hermite_pair(n: usize, x: f64) -> (f64, f64, f64) {
    let (mut h0, mut h1) = (1.0f64, x);
    let mut scale = 0.0;
    for k in 1..n {
        let h2 = x * h1 - k as f64 * h0;
        h0 = h1;
        h1 = h2;
        let a = h0.abs().max(h1.abs());
        if a > 1e100 {
            h0 /= a;
            h1 /= a;
            scale += a.ln();
        }
    }
    (scale, h0, h1)
}

fn build_hermite(n: usize) -> Result<QuadRule> {
    let diag = vec![0.0; n];
    let off: Vec<f64> = (1..n).map(|k| (k as f64).sqrt()).collect();
    let (mut nodes, _) = linalg::tridiag_eigen(&diag, &off)?;
    let mut log_weights = Vec::with_capacity(n);
    let ln_root_2pi = 0.5 * (2.0 * PI).ln();
    for x in nodes.iter_mut() {
        if n > 1 {
            for _ in 0..3 {
                let (_, a, b) = hermite_pair(n, *x);
                // He_n' = n He_{n-1}
                let step = b / (n as f64 * a);
                if !step.is_finite() {
                    break;
                }
                *x -= step;
                if step.abs() <= 1e-16 * (1.0 + x.abs()) {
                    break;
                }
            }
        }
        let lw = if n == 1 {
            ln_root_2pi
        } else {
            let (s, a, _) = hermite_pair(n, *x);
            ln_root_2pi + ln_factorial(n) - 2.0 * ((n as f64).ln() + s + a.abs().ln())
        };
        log_weights.push(lw);
    }
    // the rule is symmetric; enforce it exactly
    for i in 0..n / 2 {
        let m = 0.5 * (nodes[n - 1 - i] - nodes[i]);
        nodes[i] = -m;
        nodes[n - 1 - i] = m;
        let w = 0.5 * (log_weights[i] + log_weights[n - 1 - i]);
        log_weights[i] = w;
        log_weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    let weights = log_weights.iter().map(|l| l.exp()).collect();
    Ok(QuadRule { nodes, weights, log_weights, kind: RuleKind::Hermite, order: n })
}

/// ∫₀^∞ f(x) dx for f with at most polynomial-times-e^{-x} decay, by
/// Gauss–Laguerre at orders 64, 128, 256, 512 until two successive values
/// agree to `rel_tol`.
pub fn integrate_semi_infinite<F: Fn(f64) -> f64>(f: F, rel_tol: f64) -> Result<EvalResult> {
    let mut prev: Option<f64> = None;
    let mut n = 64;
    loop {
        let rule = laguerre_rule(n)?;
        let v: f64 = rule
            .nodes
            .iter()
            .zip(&rule.log_weights)
            .map(|(&x, &lw)| {
                let w = (lw + x).exp();
                if w == 0.0 {
                    0.0
                } else {
                    w * f(x)
                }
            })
            .sum();
        if let Some(p) = prev {
            let diff = (v - p).abs();
            if diff <= rel_tol * v.abs() {
                return Ok(EvalResult::real(v, diff, EvalMeta::with_orders(vec![n])));
            }
            if n == 512 {
                if diff <= 10.0 * rel_tol * v.abs() {
                    return Ok(EvalResult::real(v, diff, EvalMeta::with_orders(vec![n])));
                }
                return Err(Error::NonConvergence(format!(
                    "semi-infinite Gauss-Laguerre: orders 256/512 differ by {diff:e}"
                )));
            }
        }
        prev = Some(v);
        n *= 2;
    }
}

// Gauss–Kronrod 7/15 abscissae and weights.
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

type CVec = Vec<Complex64>;

fn axpy(acc: &mut [Complex64], a: f64, x: &[Complex64]) {
    for (s, v) in acc.iter_mut().zip(x) {
        *s += v * a;
    }
}

// GK15 on [a, b] of a vector integrand; per-component Kronrod value and
// |Kronrod − Gauss| error.
fn gk15<F: Fn(f64) -> Result<CVec>>(f: &F, a: f64, b: f64) -> Result<(CVec, Vec<f64>)> {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c)?;
    let dim = fc.len();
    let mut rk = vec![Complex64::new(0.0, 0.0); dim];
    let mut rg = vec![Complex64::new(0.0, 0.0); dim];
    axpy(&mut rk, WGK[7], &fc);
    axpy(&mut rg, WG[3], &fc);
    for j in 0..7 {
        let x = h * XGK[j];
        let lo = f(c - x)?;
        let hi = f(c + x)?;
        if lo.len() != dim || hi.len() != dim {
            return Err(Error::Domain("vector integrand changed length".into()));
        }
        axpy(&mut rk, WGK[j], &lo);
        axpy(&mut rk, WGK[j], &hi);
        if j % 2 == 1 {
            axpy(&mut rg, WG[j / 2], &lo);
            axpy(&mut rg, WG[j / 2], &hi);
        }
    }
    let err = rk.iter().zip(&rg).map(|(k, g)| ((k - g) * h).norm()).collect();
    Ok((rk.into_iter().map(|k| k * h).collect(), err))
}

struct Piece {
    a: f64,
    b: f64,
    val: CVec,
    err: Vec<f64>,
    key: f64,
}

impl PartialEq for Piece {
    fn eq(&self, o: &Self) -> bool {
        self.key == o.key
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Piece {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        self.key.total_cmp(&o.key)
    }
}

const MAX_PIECES: usize = 4000;

/// Adaptive Gauss–Kronrod (7/15) on [a, b] for a vector of complex
/// integrands sharing the abscissae. Each component must reach
/// `max(abs_tol, rel_tol·|value|)`. Returns values and per-component errors.
pub fn adaptive_vec<F: Fn(f64) -> Result<CVec>>(
    f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<(CVec, Vec<f64>)> {
    adaptive_vec_floor(f, a, b, None, abs_tol, rel_tol)
}

// `floor[k]`, when given, is a per-component absolute tolerance on top of `abs_tol`.
fn adaptive_vec_floor<F: Fn(f64) -> Result<CVec>>(
    f: F,
    a: f64,
    b: f64,
    floor: Option<&[f64]>,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<(CVec, Vec<f64>)> {
    let (v, e) = gk15(&f, a, b)?;
    let dim = v.len();
    if a == b {
        return Ok((vec![Complex64::new(0.0, 0.0); dim], vec![0.0; dim]));
    }
    let mut total = v.clone();
    let mut err = e.clone();
    // the floor keeps exactly-zero components from stalling the loop
    let target = |t: &[Complex64]| -> Vec<f64> {
        t.iter()
            .enumerate()
            .map(|(k, z)| {
                let fl = floor.map_or(0.0, |fl| fl[k]);
                abs_tol.max(fl).max(rel_tol * z.norm()).max(1e-300)
            })
            .collect()
    };
    let key = |e: &[f64], tg: &[f64]| e.iter().zip(tg).map(|(x, t)| x / t).fold(0.0, f64::max);
    let mut tg = target(&total);
    let mut heap = BinaryHeap::new();
    heap.push(Piece { a, b, key: key(&e, &tg), val: v, err: e });
    let mut splits = 0usize;
    loop {
        if err.iter().zip(&tg).all(|(e, t)| e <= t) {
            break;
        }
        if heap.len() >= MAX_PIECES {
            return Err(Error::NonConvergence(format!(
                "adaptive quadrature on [{a}, {b}]: {MAX_PIECES} pieces, error ratio {:.2e}",
                key(&err, &tg)
            )));
        }
        let p = heap.pop().unwrap();
        let m = 0.5 * (p.a + p.b);
        if m <= p.a || m >= p.b {
            heap.push(p);
            break;
        }
        let (v1, e1) = gk15(&f, p.a, m)?;
        let (v2, e2) = gk15(&f, m, p.b)?;
        for k in 0..dim {
            total[k] += v1[k] + v2[k] - p.val[k];
            err[k] += e1[k] + e2[k] - p.err[k];
        }
        heap.push(Piece { a: p.a, b: m, key: key(&e1, &tg), val: v1, err: e1 });
        heap.push(Piece { a: m, b: p.b, key: key(&e2, &tg), val: v2, err: e2 });
        splits += 1;
        // targets move with the running value; re-key now and then
        if splits % 64 == 0 {
            tg = target(&total);
            let pieces: Vec<Piece> = heap.drain().collect();
            for mut q in pieces {
                q.key = key(&q.err, &tg);
                heap.push(q);
            }
            err = vec![0.0; dim];
            for q in heap.iter() {
                for k in 0..dim {
                    err[k] += q.err[k];
                }
            }
        }
    }
    let mut pieces: Vec<Piece> = heap.into_vec();
    pieces.sort_by(|x, y| x.a.total_cmp(&y.a));
    let mut total = vec![Complex64::new(0.0, 0.0); dim];
    let mut err = vec![0.0; dim];
    for q in &pieces {
        for k in 0..dim {
            total[k] += q.val[k];
            err[k] += q.err[k];
        }
    }
    Ok((total, err))
}

/// Adaptive Gauss–Kronrod (7/15) on [a, b] for a complex integrand.
/// Returns the value and an error estimate.
pub fn adaptive<F: Fn(f64) -> Result<Complex64>>(
    f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<(Complex64, f64)> {
    let (v, e) = adaptive_vec(|x| Ok(vec![f(x)?]), a, b, abs_tol, rel_tol)?;
    Ok((v[0], e[0]))
}


/// Real-valued convenience wrapper around [`adaptive`].
pub fn adaptive_real<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<(f64, f64)> {
    let (v, e) = adaptive(|x| Ok(Complex64::new(f(x), 0.0)), a, b, abs_tol, rel_tol)?;
    Ok((v.re, e))
}

/// ∫_{breaks[0]}^∞ of a vector integrand: adaptive pieces between the break
/// points, then the tail through x = b + scale·t/(1−t). The integrand must
/// stay finite for every x ≥ breaks[0].
pub fn adaptive_semi_vec<F: Fn(f64) -> Result<CVec>>(
    f: F,
    breaks: &[f64],
    scale: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<(CVec, Vec<f64>)> {
    if breaks.is_empty() || !(scale > 0.0) {
        return Err(Error::Domain("adaptive_semi needs break points and scale > 0".into()));
    }
    let pieces = breaks.len() as f64;
    let b = *breaks.last().unwrap();
    let tail = |t: f64| -> Result<CVec> {
        let u = 1.0 - t;
        let x = b + scale * t / u;
        let j = scale / (u * u);
        Ok(f(x)?.into_iter().map(|z| z * j).collect())
    };
    // A cancelling component cannot beat rel_tol·∫|f|, so a crude pass over
    // |f| sets a per-component absolute floor.
    fn abs_of<G: Fn(f64) -> Result<CVec>>(g: &G) -> impl Fn(f64) -> Result<CVec> + '_ {
        move |x| Ok(g(x)?.into_iter().map(|z| Complex64::new(z.norm(), 0.0)).collect())
    }
    let mut scale_k: Vec<f64> = gk15(&abs_of(&tail), 0.0, 1.0)?.0.iter().map(|z| z.re).collect();
    for w in breaks.windows(2) {
        for (s, z) in scale_k.iter_mut().zip(gk15(&abs_of(&f), w[0], w[1])?.0) {
            *s += z.re;
        }
    }
    let floor: Vec<f64> = scale_k.iter().map(|s| rel_tol * s / pieces).collect();
    let (mut total, mut err) = adaptive_vec_floor(tail, 0.0, 1.0, Some(&floor), abs_tol / pieces, rel_tol)?;
    for w in breaks.windows(2) {
        let (v, e) = adaptive_vec_floor(&f, w[0], w[1], Some(&floor), abs_tol / pieces, rel_tol)?;
        for k in 0..total.len() {
            total[k] += v[k];
            err[k] += e[k];
        }
    }
    Ok((total, err))
}

/// Scalar form of [`adaptive_semi_vec`].
pub fn adaptive_semi<F: Fn(f64) -> Result<Complex64>>(
    f: F,
    breaks: &[f64],
    scale: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<(Complex64, f64)> {
    let (v, e) = adaptive_semi_vec(|x| Ok(vec![f(x)?]), breaks, scale, abs_tol, rel_tol)?;
    Ok((v[0], e[0]))
}

/// Σ over the tensor Gauss–Laguerre grid of dimension `dim` of
/// (∏ weights)·f(t), with f given as `(ln|f|, sign)`; returns `(ln|Σ|, sign)`.
/// Integrates ∫ f(t) ∏ e^{-t_i} dt_i exactly for polynomials of per-axis
/// degree ≤ 2·order − 1.
pub fn tensor_laguerre_ln<F: Fn(&[f64]) -> (f64, f64)>(
    dim: usize,
    order: usize,
    f: F,
) -> Result<(f64, f64)> {
    if dim > 3 {
        return Err(Error::Domain(format!("tensor cubature dimension {dim} > 3")));
    }
    if dim == 0 {
        return Ok(f(&[]));
    }
    let rule = laguerre_rule(order)?;
    let n = rule.order;
    let total = n.pow(dim as u32);
    let mut terms = Vec::with_capacity(total);
    let mut t = vec![0.0; dim];
    for idx in 0..total {
        let mut r = idx;
        let mut lw = 0.0;
        for d in 0..dim {
            let k = r % n;
            r /= n;
            t[d] = rule.nodes[k];
            lw += rule.log_weights[k];
        }
        let (lf, s) = f(&t);
        if s != 0.0 && lf.is_finite() {
            terms.push((lw + lf, s));
        }
    }
    Ok(signed_lse(&terms))
}

/// Plain-valued tensor Gauss–Laguerre cubature ∫ f(t) ∏ e^{-t_i} dt_i.
pub fn tensor_laguerre<F: Fn(&[f64]) -> f64>(dim: usize, order: usize, f: F) -> Result<f64> {
    let (l, s) = tensor_laguerre_ln(dim, order, |t| {
        let v = f(t);
        (v.abs().ln(), if v == 0.0 { 0.0 } else { v.signum() })
    })?;
    Ok(s * l.exp())
}
