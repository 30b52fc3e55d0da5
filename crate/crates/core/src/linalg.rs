//! Small dense linear algebra: complex matrices, LU determinants and
//! inverses, squared singular values by one-sided Jacobi, and the
//! symmetric tridiagonal eigenproblem.

use crate::error::{Error, Result};
use num_complex::Complex64;

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    pub rows: usize,
    pub cols: usize,
    /// Row-major entries.
    pub data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        ComplexMatrix { rows, cols, data: vec![Complex64::new(0.0, 0.0); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn<F: FnMut(usize, usize) -> Complex64>(rows: usize, cols: usize, mut f: F) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        ComplexMatrix { rows, cols, data }
    }

    pub fn from_real(rows: usize, cols: usize, v: &[f64]) -> Self {
        assert_eq!(v.len(), rows * cols);
        ComplexMatrix { rows, cols, data: v.iter().map(|&x| Complex64::new(x, 0.0)).collect() }
    }

    pub fn mul(&self, o: &ComplexMatrix) -> Result<ComplexMatrix> {
        if self.cols != o.rows {
            return Err(Error::Domain(format!(
                "shape mismatch {}x{} * {}x{}",
                self.rows, self.cols, o.rows, o.cols
            )));
        }
        let mut out = Self::zeros(self.rows, o.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                for j in 0..o.cols {
                    out[(i, j)] += a * o[(k, j)];
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, v: &[Complex64]) -> Vec<Complex64> {
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self[(i, j)] * v[j]).sum())
            .collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    fn square(&self) -> Result<()> {
        if self.rows != self.cols {
            return Err(Error::Domain(format!("matrix {}x{} not square", self.rows, self.cols)));
        }
        Ok(())
    }
}

impl std::ops::Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.cols + j]
    }
}

/// LU with partial pivoting. Returns the packed factors, the pivot order and
/// the permutation sign, or `Singular` on an exactly zero pivot.
fn lu(a: &ComplexMatrix) -> Result<(ComplexMatrix, Vec<usize>, f64)> {
    a.square()?;
    let n = a.rows;
    let mut m = a.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut sign = 1.0;
    for k in 0..n {
        let (p, best) = (k..n)
            .map(|i| (i, m[(i, k)].norm()))
            .fold((k, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if best == 0.0 || !best.is_finite() {
            return Err(Error::Singular);
        }
        if p != k {
            for j in 0..n {
                m.data.swap(k * n + j, p * n + j);
            }
            perm.swap(k, p);
            sign = -sign;
        }
        let piv = m[(k, k)];
        for i in k + 1..n {
            let f = m[(i, k)] / piv;
            m[(i, k)] = f;
            if f != Complex64::new(0.0, 0.0) {
                for j in k + 1..n {
                    let t = m[(k, j)];
                    m[(i, j)] -= f * t;
                }
            }
        }
    }
    Ok((m, perm, sign))
}

/// Determinant by LU. A singular matrix has determinant 0.
pub fn det_lu(a: &ComplexMatrix) -> Result<Complex64> {
    match lu(a) {
        Ok((m, _, s)) => {
            let mut d = Complex64::new(s, 0.0);
            for k in 0..a.rows {
                d *= m[(k, k)];
            }
            Ok(d)
        }
        Err(Error::Singular) => Ok(Complex64::new(0.0, 0.0)),
        Err(e) => Err(e),
    }
}

/// Determinant as (ln|det|, unit phase); avoids overflow for large entries.
pub fn det_lu_ln(a: &ComplexMatrix) -> Result<(f64, Complex64)> {
    let (m, _, s) = lu(a)?;
    let mut ln = 0.0;
    let mut ph = Complex64::new(s, 0.0);
    for k in 0..a.rows {
        let z = m[(k, k)];
        ln += z.norm().ln();
        ph *= z / z.norm();
    }
    Ok((ln, ph))
}

fn lu_solve_in_place(m: &ComplexMatrix, perm: &[usize], b: &[Complex64]) -> Vec<Complex64> {
    let n = m.rows;
    let mut x: Vec<Complex64> = perm.iter().map(|&p| b[p]).collect();
    for i in 0..n {
        for k in 0..i {
            let t = x[k];
            x[i] -= m[(i, k)] * t;
        }
    }
    for i in (0..n).rev() {
        for k in i + 1..n {
            let t = x[k];
            x[i] -= m[(i, k)] * t;
        }
        x[i] /= m[(i, i)];
    }
    x
}

/// Solve A x = b.
pub fn solve(a: &ComplexMatrix, b: &[Complex64]) -> Result<Vec<Complex64>> {
    let (m, perm, _) = lu(a)?;
    if b.len() != a.rows {
        return Err(Error::Domain("right-hand side length mismatch".into()));
    }
    Ok(lu_solve_in_place(&m, &perm, b))
}

/// Inverse by LU.
pub fn inverse_lu(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    let (m, perm, _) = lu(a)?;
    let n = a.rows;
    let mut inv = ComplexMatrix::zeros(n, n);
    let mut e = vec![Complex64::new(0.0, 0.0); n];
    for j in 0..n {
        e.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
        e[j] = Complex64::new(1.0, 0.0);
        let col = lu_solve_in_place(&m, &perm, &e);
        for i in 0..n {
            inv[(i, j)] = col[i];
        }
    }
    Ok(inv)
}

/// 1-norm condition number estimate ‖A‖₁‖A⁻¹‖₁ (exact, via the inverse).
pub fn condition_1(a: &ComplexMatrix) -> Result<f64> {
    let inv = inverse_lu(a)?;
    let norm1 = |m: &ComplexMatrix| {
        (0..m.cols)
            .map(|j| (0..m.rows).map(|i| m[(i, j)].norm()).sum::<f64>())
            .fold(0.0, f64::max)
    };
    Ok(norm1(a) * norm1(&inv))
}

/// Squared singular values of `a`, descending, by one-sided Jacobi on the
/// columns. Requires rows ≥ cols.
pub fn svd_squared(a: &ComplexMatrix) -> Result<Vec<f64>> {
    if a.rows < a.cols {
        return Err(Error::Domain(format!("svd_squared needs rows >= cols, got {}x{}", a.rows, a.cols)));
    }
    let (m, n) = (a.rows, a.cols);
    // column-major working copy
    let mut c: Vec<Vec<Complex64>> = (0..n).map(|j| (0..m).map(|i| a[(i, j)]).collect()).collect();
    let tol = 1e-15;
    let mut converged = n < 2;
    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha: f64 = c[p].iter().map(|z| z.norm_sqr()).sum();
                let beta: f64 = c[q].iter().map(|z| z.norm_sqr()).sum();
                let gamma: Complex64 = c[p].iter().zip(&c[q]).map(|(x, y)| x.conj() * y).sum();
                let g = gamma.norm();
                if g == 0.0 || g <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let ph = gamma / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;
                for i in 0..m {
                    let x = c[p][i];
                    let y = c[q][i] * ph.conj();
                    c[p][i] = x * cs - y * sn;
                    c[q][i] = x * sn + y * cs;
                }
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NonConvergence("one-sided Jacobi: 60 sweeps".into()));
    }
    let mut s: Vec<f64> = c.iter().map(|col| col.iter().map(|z| z.norm_sqr()).sum()).collect();
    s.sort_by(|x, y| y.total_cmp(x));
    Ok(s)
}

/// Eigen-decomposition of the symmetric tridiagonal matrix with diagonal `d`
/// and off-diagonal `e` by implicit QL. Returns eigenvalues ascending and
/// the first components of the normalised eigenvectors.
pub fn tridiag_eigen(d: &[f64], e: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = d.len();
    if n == 0 || e.len() + 1 != n {
        return Err(Error::Domain("tridiag_eigen: need len(e) = len(d) - 1 >= 0".into()));
    }
    let mut d = d.to_vec();
    let mut e: Vec<f64> = e.iter().copied().chain(std::iter::once(0.0)).collect();
    let mut z = vec![0.0; n];
    z[0] = 1.0;
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(Error::NonConvergence("tridiagonal QL: 60 iterations".into()));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = m;
            let mut underflow = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                let zf = z[i + 1];
                z[i + 1] = s * z[i] + c * zf;
                z[i] = c * z[i] - s * zf;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
    Ok((idx.iter().map(|&i| d[i]).collect(), idx.iter().map(|&i| z[i]).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn det_and_inverse_2x2() {
        let a = ComplexMatrix { rows: 2, cols: 2, data: vec![c(1.0, 1.0), c(2.0, 0.0), c(0.0, 3.0), c(4.0, -1.0)] };
        let d = det_lu(&a).unwrap();
        let want = c(1.0, 1.0) * c(4.0, -1.0) - c(2.0, 0.0) * c(0.0, 3.0);
        assert!((d - want).norm() < 1e-14);
        let (ln, ph) = det_lu_ln(&a).unwrap();
        assert!((ph * ln.exp() - want).norm() < 1e-13);
        let inv = inverse_lu(&a).unwrap();
        let id = a.mul(&inv).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let t = if i == j { 1.0 } else { 0.0 };
                assert!((id[(i, j)] - t).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn singular_matrix() {
        let a = ComplexMatrix::from_real(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert_eq!(det_lu(&a).unwrap(), c(0.0, 0.0));
        assert!(matches!(inverse_lu(&a), Err(Error::Singular)));
    }

    #[test]
    fn svd_of_known_matrix() {
        // A^H A = [[2, 0], [0, 8]] up to rotation
        let a = ComplexMatrix::from_real(2, 2, &[1.0, 2.0, 1.0, -2.0]);
        let s = svd_squared(&a).unwrap();
        assert_relative_eq!(s[0], 8.0, max_relative = 1e-14);
        assert_relative_eq!(s[1], 2.0, max_relative = 1e-14);
        let b = ComplexMatrix { rows: 2, cols: 2, data: vec![c(0.0, 1.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 1.0)] };
        // singular values: |i ± 1| = √2 each ... det = -1 -1 = -2, ‖B‖_F² = 4
        let s = svd_squared(&b).unwrap();
        assert_relative_eq!(s[0] + s[1], 4.0, max_relative = 1e-14);
        assert_relative_eq!(s[0] * s[1], 4.0, max_relative = 1e-13);
    }

    #[test]
    fn tridiag_known_spectrum() {
        let (ev, z) = tridiag_eigen(&[2.0, 2.0, 2.0], &[1.0, 1.0]).unwrap();
        let s2 = 2f64.sqrt();
        assert_relative_eq!(ev[0], 2.0 - s2, max_relative = 1e-14);
        assert_relative_eq!(ev[1], 2.0, max_relative = 1e-14);
        assert_relative_eq!(ev[2], 2.0 + s2, max_relative = 1e-14);
        let zz: f64 = z.iter().map(|x| x * x).sum();
        assert_relative_eq!(zz, 1.0, max_relative = 1e-14);
    }
}
