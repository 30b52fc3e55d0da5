//! Verification suites behind `chiralcp verify`.

use crate::asym::kernel_identity_check;
use crate::error::Result;
use crate::exact::{self, EnsembleParams, EvalOptions};
use crate::mc::{self, Functional};
use crate::oracle;
use crate::par::Exec;
use num_complex::Complex64;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckRow {
    pub suite: &'static str,
    pub check: &'static str,
    pub case: String,
    pub measured: f64,
    pub tolerance: f64,
    pub pass: bool,
    /// Whether this row decides the suite's exit status.
    pub gating: bool,
}

fn row(suite: &'static str, check: &'static str, case: String, measured: f64, tolerance: f64) -> CheckRow {
    CheckRow { suite, check, case, measured, tolerance, pass: measured <= tolerance, gating: true }
}

fn rel(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// 𝒟 from the general inverse-CP route against its τ-integral form at
/// L = 0 and L = 1, and the two sides of the Bessel product identity.
pub fn identities() -> Result<Vec<CheckRow>> {
    let mut out = Vec::new();
    for (l, name) in [(0, "d-general-vs-closed-l0"), (1, "d-general-vs-closed-l1")] {
        for n in 1..=8 {
            for p in [0.1, 1.0, 10.0] {
                for z in [0.0, 0.5, 2.0] {
                    let a = exact::d_function_general(n, l, z, p, &EvalOptions::default())?.value;
                    let b = exact::d_function(n, l, z, p)?.value;
                    out.push(row("identities", name, format!("N={n} p={p} z2={z}"), rel(a, b), 1e-8));
                }
            }
        }
    }
    let grid = [0.5, 1.0, 2.0, 5.0];
    for l in 0..=4 {
        for a in grid {
            for b in grid {
                if a != b {
                    let (_, _, d) = kernel_identity_check(l, a, b)?;
                    out.push(row("identities", "bessel-product", format!("L={l} a={a} b={b}"), d, 1e-9));
                }
            }
        }
    }
    Ok(out)
}

pub const ORACLE_ARGS: [(f64, f64); 3] = [(-0.5, 0.0), (-2.0, 0.0), (1.0, 2.0)];

/// Spectra used by the oracle comparison: well separated, and a cluster of
/// width ~1e−3 around 1 standing in for the degenerate source.
pub fn oracle_spectra(n: usize) -> Vec<(&'static str, Vec<f64>)> {
    let mut v = vec![("distinct", (0..n).map(|i| 0.3 + 0.6 * i as f64).collect())];
    if n > 1 {
        v.push(("near-degenerate", (0..n).map(|i| 1.0 + 1e-3 * i as f64).collect()));
    }
    v
}

/// Contour formula, Gram determinant and permutation-sum route for the
/// inverse characteristic polynomial; measured is the worst pairwise
/// relative deviation.
pub fn oracles(max_n: usize) -> Result<Vec<CheckRow>> {
    let mut out = Vec::new();
    for n in 1..=max_n {
        for l in 0..=2 {
            for (label, om) in oracle_spectra(n) {
                let params = EnsembleParams::distinct(l, om)?;
                for (re, im) in ORACLE_ARGS {
                    let y = c(re, im);
                    let a = exact::inverse_cp(&params, y)?.value;
                    let b = oracle::inverse_cp_oracle(&params, y)?;
                    let d = oracle::inverse_cp_permutation(&params, y)?;
                    let worst = rel(a, b).max(rel(a, d)).max(rel(b, d));
                    out.push(row("oracles", "inverse-cp-three-way", format!("N={n} L={l} {label} y={y}"), worst, 1e-6));
                }
            }
        }
    }
    Ok(out)
}

/// The ensembles and functionals of the Monte Carlo comparison (40 points).
pub fn mc_grid() -> Result<Vec<(EnsembleParams, Vec<Functional>)>> {
    let fs = vec![
        Functional::InverseCp(c(-0.5, 0.0)),
        Functional::InverseCp(c(-2.0, 0.0)),
        Functional::InverseCp(c(1.0, 2.0)),
        Functional::InverseCp(c(-1.0, 1.0)),
        Functional::Cp(c(0.5, 0.0)),
        Functional::Cp(c(-1.0, 0.0)),
        Functional::Cp(c(1.0, 1.0)),
        Functional::Ratio { v: c(0.5, 0.0), z: c(-1.0, 0.0) },
        Functional::Ratio { v: c(1.0, 1.0), z: c(-2.0, 0.0) },
        Functional::Ratio { v: c(2.0, 0.0), z: c(1.0, 2.0) },
    ];
    Ok(vec![
        (EnsembleParams::distinct(0, vec![0.7])?, fs.clone()),
        (EnsembleParams::distinct(1, vec![0.5, 1.5])?, fs.clone()),
        (EnsembleParams::distinct(0, vec![0.3, 1.0, 2.0])?, fs.clone()),
        (EnsembleParams::degenerate(3, 2, 0.8)?, fs),
    ])
}

pub fn exact_value(params: &EnsembleParams, f: &Functional) -> Result<Complex64> {
    Ok(match *f {
        Functional::InverseCp(y) => exact::inverse_cp(params, y)?.value,
        Functional::Cp(z) => exact::cp(params, z)?.value,
        Functional::Ratio { v, z } => exact::ratio_cp(params, v, z)?.value,
        Functional::DFunction(p) => exact::d_function(params.n, 0, params.omegas()[0], p)?.value,
        Functional::WeightMean => Complex64::new(1.0, 0.0),
    })
}

pub fn describe(f: &Functional) -> String {
    match f {
        Functional::InverseCp(y) => format!("inverse-cp y={y}"),
        Functional::Cp(z) => format!("cp z={z}"),
        Functional::Ratio { v, z } => format!("ratio v={v} z={z}"),
        Functional::DFunction(p) => format!("d p={p}"),
        Functional::WeightMean => "weight-mean".into(),
    }
}

/// Monte Carlo against the exact evaluators: per-point |Δ|/stderr (not
/// gating), the fraction within 3σ (≥ 0.95 required) and seed determinism.
pub fn monte_carlo(samples: usize, seed: u64, exec: Exec) -> Result<Vec<CheckRow>> {
    let mut out = Vec::new();
    let mut within = 0usize;
    let mut total = 0usize;
    for (params, fs) in mc_grid()? {
        let om = mc::omega_matrix(&params.source);
        let est = mc::estimate_many(&params, &om, &fs, samples, seed, exec)?;
        for (f, e) in fs.iter().zip(&est) {
            let want = exact_value(&params, f)?;
            let z = (e.mean - want).norm() / e.stderr.max(1e-300);
            let case = format!("N={} L={} {}", params.n, params.l, describe(f));
            let mut r = row("mc", "point-3sigma", case, z, 3.0);
            r.gating = false;
            within += r.pass as usize;
            total += 1;
            out.push(r);
        }
    }
    let frac = within as f64 / total as f64;
    out.push(CheckRow {
        suite: "mc",
        check: "fraction-within-3sigma",
        case: format!("{within}/{total}"),
        measured: frac,
        tolerance: 0.95,
        pass: frac >= 0.95,
        gating: true,
    });
    let (params, fs) = mc_grid()?.swap_remove(1);
    let om = mc::omega_matrix(&params.source);
    let a = mc::estimate_many(&params, &om, &fs, 2000, seed, Exec::Sequential)?;
    let b = mc::estimate_many(&params, &om, &fs, 2000, seed, exec)?;
    let same = a == b;
    out.push(CheckRow {
        suite: "mc",
        check: "seed-determinism",
        case: format!("seed={seed} sequential vs configured executor"),
        measured: if same { 0.0 } else { 1.0 },
        tolerance: 0.0,
        pass: same,
        gating: true,
    });
    Ok(out)
}
