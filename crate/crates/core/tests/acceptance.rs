//! Acceptance criteria, one PASS/FAIL line each. Exits nonzero if any fails.

use chiralcp::asym::{self, ScalingParams, SweepKind};
use chiralcp::cli::suites;
use chiralcp::exact::{self, EnsembleParams, EvalOptions};
use chiralcp::mc;
use chiralcp::oracle;
use chiralcp::par::Exec;
use chiralcp::quad;
use num_complex::Complex64;
use std::time::Instant;

type Outcome = Result<(bool, String), String>;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn rel(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

/// Worst value over the grid, with the case that produced it.
struct Worst {
    value: f64,
    case: String,
}

impl Worst {
    fn new() -> Self {
        Worst { value: 0.0, case: String::new() }
    }
    fn see(&mut self, v: f64, case: impl FnOnce() -> String) {
        if !(v <= self.value) {
            self.value = v;
            self.case = case();
        }
    }
    fn verdict(&self, tol: f64) -> (bool, String) {
        (self.value <= tol, format!("worst {:.2e} (tol {tol:.0e}) at {}", self.value, self.case))
    }
}

fn d_identity(l: usize) -> Outcome {
    let mut w = Worst::new();
    for n in 1..=8 {
        for p in [0.1, 1.0, 10.0] {
            for z in [0.0, 0.5, 2.0] {
                let a = exact::d_function_general(n, l, z, p, &EvalOptions::default()).map_err(err)?.value;
                let b = exact::d_function(n, l, z, p).map_err(err)?.value;
                w.see(rel(a, b), || format!("N={n} p={p} |z|^2={z}"));
            }
        }
    }
    Ok(w.verdict(1e-8))
}

fn three_way() -> Outcome {
    let rows = suites::oracles(6).map_err(err)?;
    let mut w = Worst::new();
    for r in &rows {
        w.see(r.measured, || r.case.clone());
    }
    let (ok, msg) = w.verdict(1e-6);
    Ok((ok && rows.iter().all(|r| r.pass), format!("{} cases, {msg}", rows.len())))
}

fn cp_and_ratio() -> Outcome {
    let mut w = Worst::new();
    let mut unit = 0.0f64;
    for n in 1..=6 {
        for l in 0..=2 {
            for (label, om) in suites::oracle_spectra(n) {
                let p = EnsembleParams::distinct(l, om).map_err(err)?;
                for z in [c(-0.5, 0.0), c(-2.0, 0.0), c(1.0, 2.0), c(0.5, 0.0)] {
                    let a = exact::cp(&p, z).map_err(err)?.value;
                    let b = oracle::cp_oracle(&p, z).map_err(err)?;
                    w.see(rel(a, b), || format!("cp N={n} L={l} {label} z={z}"));
                }
                for v in [c(0.5, 0.0), c(1.0, 1.0)] {
                    for (re, im) in suites::ORACLE_ARGS {
                        let z = c(re, im);
                        let a = exact::ratio_cp(&p, v, z).map_err(err)?.value;
                        let b = oracle::ratio_oracle(&p, v, z).map_err(err)?;
                        w.see(rel(a, b), || format!("ratio N={n} L={l} {label} v={v} z={z}"));
                    }
                }
                let z = c(-1.0, 0.5);
                unit = unit.max((exact::ratio_cp(&p, z, z).map_err(err)?.value - 1.0).norm());
            }
        }
    }
    let (ok, msg) = w.verdict(1e-6);
    Ok((ok && unit <= 1e-8, format!("{msg}; |ratio(v=z) - 1| = {unit:.1e}")))
}

fn semi(f: impl Fn(f64) -> f64) -> Result<f64, String> {
    quad::adaptive_semi(|x| Ok(c(f(x), 0.0)), &[0.0, 2.0, 6.0, 15.0], 4.0, 1e-15, 1e-12).map(|r| r.0.re).map_err(err)
}

fn kernel_validity() -> Outcome {
    let mut w = Worst::new();
    for n in 1..=5 {
        for l in 0..=1 {
            for (label, om) in suites::oracle_spectra(n) {
                let p = EnsembleParams::distinct(l, om).map_err(err)?;
                for (x, y) in [(0.5, 1.2), (2.0, 0.3), (0.1, 4.0)] {
                    let a = exact::kernel(&p, x, y).map_err(err)?.re();
                    let b = oracle::kernel_oracle(&p, x, y).map_err(err)?;
                    w.see(rel(c(a, 0.0), c(b, 0.0)), || format!("N={n} L={l} {label} ({x},{y})"));
                }
            }
        }
    }
    let p = EnsembleParams::distinct(1, vec![0.2, 1.0, 2.5]).map_err(err)?;
    let k = |a: f64, b: f64| exact::kernel(&p, a, b).map(|r| r.re()).unwrap_or(f64::NAN);
    let tr_exact = semi(|x| k(x, x))?;
    let gd = oracle::gram(&p).map_err(err)?;
    let tr_oracle = semi(|x| oracle::kernel_from_gram(&gd, x, x).unwrap_or(f64::NAN))?;
    let tr = (tr_exact - 3.0).abs().max((tr_oracle - 3.0).abs());
    let mut rep: f64 = 0.0;
    for (x, y) in [(0.5, 1.2), (2.0, 0.3), (1.0, 1.0)] {
        let v = semi(|t| k(x, t) * k(t, y))?;
        rep = rep.max(((v - k(x, y)) / k(x, y)).abs());
    }
    let (ok, msg) = w.verdict(1e-6);
    Ok((ok && tr <= 1e-6 && rep <= 1e-5, format!("oracle {msg}; trace dev {tr:.1e}; reproducing rel {rep:.1e}")))
}

fn monte_carlo() -> Outcome {
    let rows = suites::monte_carlo(1_000_000, 20240611, Exec::default()).map_err(err)?;
    let frac = rows.iter().find(|r| r.check == "fraction-within-3sigma").ok_or("missing row")?;
    let det = rows.iter().find(|r| r.check == "seed-determinism").ok_or("missing row")?;
    // byte-exact rerun of the full estimate on one ensemble
    let (params, fs) = suites::mc_grid().map_err(err)?.swap_remove(3);
    let om = mc::omega_matrix(&params.source);
    let a = mc::estimate_many(&params, &om, &fs, 100_000, 5, Exec::default()).map_err(err)?;
    let b = mc::estimate_many(&params, &om, &fs, 100_000, 5, Exec::default()).map_err(err)?;
    let bits = |v: &[mc::MCEstimate]| -> Vec<u64> {
        v.iter().flat_map(|e| [e.mean.re.to_bits(), e.mean.im.to_bits(), e.stderr.to_bits(), e.ess.to_bits()]).collect()
    };
    let rerun = bits(&a) == bits(&b);
    Ok((
        frac.pass && det.pass && rerun,
        format!("{} within 3 sigma ({:.3}); determinism {}", frac.case, frac.measured, det.pass && rerun),
    ))
}

fn bessel_identity() -> Outcome {
    let mut w = Worst::new();
    let grid = [0.5, 1.0, 2.0, 5.0];
    for l in 0..=4 {
        for a in grid {
            for b in grid {
                if a != b {
                    let (_, _, d) = asym::kernel_identity_check(l, a, b).map_err(err)?;
                    w.see(d, || format!("L={l} a={a} b={b}"));
                }
            }
        }
    }
    Ok(w.verdict(1e-9))
}

/// Every sweep must decrease strictly and end within `tol`.
fn sweeps(cases: Vec<(String, SweepKind, usize, ScalingParams, &[usize])>, tol: f64) -> Outcome {
    let mut ok = true;
    let mut notes = Vec::new();
    for (name, kind, l, s, ns) in cases {
        let t = asym::convergence_sweep(kind, l, &s, ns, Exec::default()).map_err(err)?;
        let errs: Vec<String> = t.rows.iter().map(|r| format!("{:+.2e}", r.rel_err)).collect();
        let good = t.decreasing && t.final_rel_err <= tol;
        if !good {
            notes.push(format!("{name}: [{}]", errs.join(", ")));
        }
        ok &= good;
    }
    Ok((ok, if notes.is_empty() { "all sweeps decreasing".into() } else { format!("not decreasing or too large: {}", notes.join("; ")) }))
}

fn scaling() -> ScalingParams {
    ScalingParams::new(0.5).expect("R = 0.5")
}

fn inverse_cp_convergence() -> Outcome {
    let mut cases = Vec::new();
    for l in 0..=1 {
        for xi in [0.25, 1.0, 4.0] {
            cases.push((format!("L={l} xi={xi}"), SweepKind::InverseCp, l, ScalingParams { xi, ..scaling() }, &[20, 40, 80][..]));
        }
    }
    sweeps(cases, 0.05)
}

fn cp_kernel_convergence() -> Outcome {
    let mut cases = Vec::new();
    for xi in [0.25, 1.0, 4.0] {
        cases.push((format!("cp xi={xi}"), SweepKind::Cp, 0, ScalingParams { xi, ..scaling() }, &[20, 40, 80][..]));
    }
    let g = [0.5, 1.0, 2.0];
    for (i, &alpha) in g.iter().enumerate() {
        for &beta in &g[i..] {
            let s = ScalingParams { alpha, beta, ..scaling() };
            cases.push((format!("kernel ({alpha},{beta})"), SweepKind::Kernel, 0, s, &[10, 20, 40][..]));
        }
    }
    sweeps(cases, 0.10)
}

fn g_convergence() -> Outcome {
    let cases = [0.5, 2.0]
        .into_iter()
        .map(|a| {
            let s = ScalingParams { a, w: 0.5f64.sqrt(), ..scaling() };
            (format!("a={a}"), SweepKind::G, 1, s, &[10, 30, 100][..])
        })
        .collect();
    sweeps(cases, 0.05)
}

fn histogram() -> Outcome {
    let eps = 1e-3;
    let p = EnsembleParams::distinct(0, vec![eps, 2.0 * eps]).map_err(err)?;
    let om = mc::omega_matrix(&p.source);
    let edges = [0.0, 0.25, 0.5, 1.0, 2.0, 3.0, 5.0, 8.0, 14.0];
    let h = mc::histogram_check_n2(
        &om,
        |u, v| mc::jpdf(&p, &[u, v]).unwrap_or(f64::NAN),
        &edges,
        1_000_000,
        77,
        Exec::default(),
    )
    .map_err(err)?;
    Ok((h.max_z <= 4.0, format!("{} cells, max |dev|/stderr {:.2}", h.bins.len(), h.max_z)))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("D function: general route vs closed form, L=0", || d_identity(0)),
        ("D function: general route vs closed form, L=1", || d_identity(1)),
        ("inverse CP three-way agreement", three_way),
        ("CP and ratio vs Gram oracles", cp_and_ratio),
        ("kernel: oracle, trace, reproducing", kernel_validity),
        ("Monte Carlo 40-point grid and determinism", monte_carlo),
        ("Bessel product identity", bessel_identity),
        ("inverse CP bulk-edge convergence", inverse_cp_convergence),
        ("CP and kernel bulk-edge convergence", cp_kernel_convergence),
        ("G function limit", g_convergence),
        ("N=2 singular value histogram vs jpdf", histogram),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let (ok, detail) = match f() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        failed += (!ok) as usize;
        println!(
            "{} {:>2} {name}: {detail} [{:.1}s]",
            if ok { "PASS" } else { "FAIL" },
            i + 1,
            t.elapsed().as_secs_f64()
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
