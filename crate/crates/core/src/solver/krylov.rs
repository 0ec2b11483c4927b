//! Matrix-free conjugate gradient and restarted GMRes.
//!
//! Vectors are stored in the working precision `T`; every inner product and
//! norm is accumulated in `f64`. A solve is reported as converged only after
//! the residual has been recomputed from scratch as `b - A x`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::real::Real;

/// Square matrix-free operator.
pub trait LinearOperator<T> {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[T], y: &mut [T]) -> Result<()>;
}

/// Wraps a closure `f(x, y)` computing `y = A x`.
pub struct FnOperator<C> {
    pub dim: usize,
    pub f: C,
}

impl<T, C: Fn(&[T], &mut [T]) -> Result<()>> LinearOperator<T> for FnOperator<C> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &[T], y: &mut [T]) -> Result<()> {
        (self.f)(x, y)
    }
}

/// Dense row-major matrix, mostly for tests and small systems.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<T> {
    pub n: usize,
    pub a: Vec<T>,
}

impl<T: Real> LinearOperator<T> for DenseMatrix<T> {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[T], y: &mut [T]) -> Result<()> {
        for (i, yi) in y.iter_mut().enumerate() {
            let row = &self.a[i * self.n..(i + 1) * self.n];
            *yi = T::from_f64(dot(row, x));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SolverReport {
    pub iterations: usize,
    /// Final relative residual `|b - A x| / |b|`, recomputed from scratch.
    pub residual: f64,
    pub converged: bool,
    /// Relative residual estimate after every iteration.
    pub history: Vec<f64>,
}

pub fn dot<T: Real>(a: &[T], b: &[T]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.as_f64() * y.as_f64()).sum()
}

pub fn norm<T: Real>(a: &[T]) -> f64 {
    libm::sqrt(dot(a, a))
}

fn axpy<T: Real>(alpha: f64, x: &[T], y: &mut [T]) {
    let a = T::from_f64(alpha);
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi = *yi + a * *xi;
    }
}

fn residual<T: Real, A: LinearOperator<T> + ?Sized>(
    op: &A,
    b: &[T],
    x: &[T],
    r: &mut [T],
) -> Result<()> {
    op.apply(x, r)?;
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = *bi - *ri;
    }
    Ok(())
}

fn check_dims<T, A: LinearOperator<T> + ?Sized>(op: &A, b: &[T], x: &[T]) -> Result<()> {
    for len in [b.len(), x.len()] {
        if len != op.dim() {
            return Err(Error::Shape {
                expected: op.dim(),
                actual: len,
            });
        }
    }
    Ok(())
}

fn breakdown(solver: &'static str, message: &str) -> Error {
    Error::Breakdown {
        solver,
        message: message.into(),
    }
}

/// Conjugate gradient for a symmetric positive (semi-)definite operator.
/// `x` holds the initial guess on entry and the solution on exit.
pub fn cg_solve<T: Real, A: LinearOperator<T> + ?Sized>(
    op: &A,
    b: &[T],
    x: &mut [T],
    tol: f64,
    max_iter: usize,
) -> Result<SolverReport> {
    check_dims(op, b, x)?;
    let n = b.len();
    let bnorm = norm(b);
    let mut report = SolverReport::default();
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = T::zero());
        report.converged = true;
        return Ok(report);
    }
    let mut r = vec![T::zero(); n];
    let mut p = vec![T::zero(); n];
    let mut ap = vec![T::zero(); n];
    'outer: loop {
        residual(op, b, x, &mut r)?;
        let mut rel = norm(&r) / bnorm;
        if !rel.is_finite() {
            return Err(breakdown("cg", "non-finite residual"));
        }
        if rel <= tol {
            report.residual = rel;
            report.converged = true;
            return Ok(report);
        }
        if report.iterations >= max_iter {
            report.residual = rel;
            return Ok(report);
        }
        p.copy_from_slice(&r);
        let mut rr = dot(&r, &r);
        while report.iterations < max_iter {
            op.apply(&p, &mut ap)?;
            let pap = dot(&p, &ap);
            if !(pap > 0.0) {
                if !pap.is_finite() {
                    return Err(breakdown("cg", "non-finite curvature"));
                }
                // exhausted the range of a semi-definite operator
                residual(op, b, x, &mut r)?;
                report.residual = norm(&r) / bnorm;
                report.converged = report.residual <= tol;
                return Ok(report);
            }
            let alpha = rr / pap;
            axpy(alpha, &p, x);
            axpy(-alpha, &ap, &mut r);
            report.iterations += 1;
            let rr_new = dot(&r, &r);
            rel = libm::sqrt(rr_new) / bnorm;
            report.history.push(rel);
            if !rel.is_finite() {
                return Err(breakdown("cg", "non-finite iterate"));
            }
            if rel <= tol {
                continue 'outer;
            }
            let beta = rr_new / rr;
            rr = rr_new;
            let bt = T::from_f64(beta);
            for (pi, ri) in p.iter_mut().zip(&r) {
                *pi = *ri + bt * *pi;
            }
        }
    }
}

/// Restarted GMRes(`restart`) with modified Gram-Schmidt and Givens
/// rotations. `x` holds the initial guess on entry and the solution on exit.
pub fn gmres_solve<T: Real, A: LinearOperator<T> + ?Sized>(
    op: &A,
    b: &[T],
    x: &mut [T],
    tol: f64,
    restart: usize,
    max_iter: usize,
) -> Result<SolverReport> {
    check_dims(op, b, x)?;
    if restart == 0 {
        return Err(Error::config("time.gmres_restart", "must be at least 1"));
    }
    let n = b.len();
    let bnorm = norm(b);
    let mut report = SolverReport::default();
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = T::zero());
        report.converged = true;
        return Ok(report);
    }
    let m = restart;
    let mut basis: Vec<Vec<T>> = (0..=m).map(|_| vec![T::zero(); n]).collect();
    let mut h = vec![0.0f64; (m + 1) * m];
    let hidx = |i: usize, j: usize| i * m + j;
    let mut cs = vec![0.0f64; m];
    let mut sn = vec![0.0f64; m];
    let mut g = vec![0.0f64; m + 1];
    let mut w = vec![T::zero(); n];
    let mut stalled = 0;
    let mut last_rel = f64::INFINITY;

    loop {
        residual(op, b, x, &mut w)?;
        let beta = norm(&w);
        let rel = beta / bnorm;
        if !rel.is_finite() {
            return Err(breakdown("gmres", "non-finite residual"));
        }
        report.residual = rel;
        if rel <= tol {
            report.converged = true;
            return Ok(report);
        }
        if report.iterations >= max_iter {
            return Ok(report);
        }
        // no progress across two restarts: working precision is exhausted
        if rel >= last_rel {
            stalled += 1;
            if stalled >= 2 {
                return Ok(report);
            }
        }
        last_rel = rel;

        let inv = T::from_f64(1.0 / beta);
        for (v, wi) in basis[0].iter_mut().zip(&w) {
            *v = *wi * inv;
        }
        g.iter_mut().for_each(|v| *v = 0.0);
        g[0] = beta;
        let mut k = 0;
        let mut lucky = false;
        while k < m && report.iterations < max_iter {
            op.apply(&basis[k], &mut w)?;
            let wnorm0 = norm(&w);
            for i in 0..=k {
                let hij = dot(&w, &basis[i]);
                h[hidx(i, k)] = hij;
                axpy(-hij, &basis[i], &mut w);
            }
            let hk1 = norm(&w);
            if !hk1.is_finite() {
                return Err(breakdown("gmres", "non-finite Arnoldi vector"));
            }
            h[hidx(k + 1, k)] = hk1;
            for i in 0..k {
                let (a, bb) = (h[hidx(i, k)], h[hidx(i + 1, k)]);
                h[hidx(i, k)] = cs[i] * a + sn[i] * bb;
                h[hidx(i + 1, k)] = -sn[i] * a + cs[i] * bb;
            }
            let (a, bb) = (h[hidx(k, k)], h[hidx(k + 1, k)]);
            let r = libm::hypot(a, bb);
            if r == 0.0 {
                return Err(breakdown("gmres", "singular Hessenberg matrix"));
            }
            cs[k] = a / r;
            sn[k] = bb / r;
            h[hidx(k, k)] = r;
            h[hidx(k + 1, k)] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            report.iterations += 1;
            let est = libm::fabs(g[k + 1]) / bnorm;
            report.history.push(est);
            k += 1;
            if hk1 <= 1e-14 * wnorm0.max(f64::MIN_POSITIVE) {
                lucky = true;
                break;
            }
            if est <= tol {
                break;
            }
            let inv = T::from_f64(1.0 / hk1);
            for (v, wi) in basis[k].iter_mut().zip(&w) {
                *v = *wi * inv;
            }
        }
        // back substitution for the k x k triangular system
        let mut y = vec![0.0f64; k];
        for i in (0..k).rev() {
            let mut s = g[i];
            for j in i + 1..k {
                s -= h[hidx(i, j)] * y[j];
            }
            y[i] = s / h[hidx(i, i)];
        }
        for (j, yj) in y.iter().enumerate() {
            axpy(*yj, &basis[j], x);
        }
        if lucky {
            residual(op, b, x, &mut w)?;
            let rel = norm(&w) / bnorm;
            report.residual = rel;
            if rel > tol {
                return Err(breakdown(
                    "gmres",
                    &format!("Arnoldi breakdown with relative residual {rel:e}"),
                ));
            }
            report.converged = true;
            return Ok(report);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(d: &[f64]) -> DenseMatrix<f64> {
        let n = d.len();
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            a[i * n + i] = d[i];
        }
        DenseMatrix { n, a }
    }

    #[test]
    fn identity_in_one_iteration() {
        let id = diag(&[1.0; 6]);
        let b = [1.0, -2.0, 3.0, 0.5, 0.25, 9.0];
        let mut x = [0.0; 6];
        let r = cg_solve(&id, &b, &mut x, 1e-12, 10).unwrap();
        assert_eq!(r.iterations, 1);
        assert_eq!(x, b);
        let mut x = [0.0; 6];
        let r = gmres_solve(&id, &b, &mut x, 1e-12, 5, 10).unwrap();
        assert_eq!(r.iterations, 1);
        assert!(r.converged);
        assert_eq!(x, b);
    }

    #[test]
    fn diagonal_inverse() {
        let a = diag(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        let b = [1.0; 5];
        let mut x = [0.0; 5];
        let r = cg_solve(&a, &b, &mut x, 1e-12, 50).unwrap();
        assert!(r.converged);
        for (i, xi) in x.iter().enumerate() {
            assert!((xi - 1.0 / (i + 1) as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn scaled_identity_gmres() {
        let a = diag(&[2.0; 4]);
        let b = [4.0, 2.0, -6.0, 1.0];
        let mut x = [0.0; 4];
        gmres_solve(&a, &b, &mut x, 1e-12, 3, 10).unwrap();
        for (xi, e) in x.iter().zip([2.0, 1.0, -3.0, 0.5]) {
            assert!((xi - e).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let a = diag(&[2.0; 3]);
        let mut x = [1.0; 3];
        let r = gmres_solve(&a, &[0.0; 3], &mut x, 1e-8, 3, 10).unwrap();
        assert!(r.converged);
        assert_eq!(x, [0.0; 3]);
    }

    #[test]
    fn non_convergence_reported() {
        // rotation by 90 degrees: GMRes(1) stagnates
        let a = DenseMatrix {
            n: 2,
            a: vec![0.0, -1.0, 1.0, 0.0],
        };
        let mut x = [0.0; 2];
        let r = gmres_solve(&a, &[1.0, 0.0], &mut x, 1e-10, 1, 20).unwrap();
        assert!(!r.converged);
    }

    #[test]
    fn nan_operator_is_breakdown() {
        let op = FnOperator {
            dim: 2,
            f: |_: &[f64], y: &mut [f64]| {
                y.iter_mut().for_each(|v| *v = f64::NAN);
                Ok(())
            },
        };
        let mut x = [0.0; 2];
        assert!(matches!(
            cg_solve(&op, &[1.0, 1.0], &mut x, 1e-8, 10),
            Err(Error::Breakdown { .. })
        ));
    }
}
