//! Right-preconditioned BiCGSTAB. The pulled-back operator is not symmetric,
//! so plain CG does not apply; the flat-interface fast solver makes an
//! effective preconditioner for admissible heights.

use super::separable::SeparableSolver;
use super::stencil::PhaseOperator;
use crate::error::{Error, Result};

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn bicgstab(
    op: &PhaseOperator,
    precond: &SeparableSolver,
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, f64, usize)> {
    let n = b.len();
    let b_norm = norm(b);
    let mut x = precond.precondition(b);
    if b_norm == 0.0 {
        return Ok((vec![0.0; n], 0.0, 0));
    }
    let mut r = vec![0.0; n];
    op.apply(&x, &mut r);
    r.iter_mut().zip(b).for_each(|(ri, bi)| *ri = bi - *ri);
    let r_hat = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut p = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut t = vec![0.0; n];
    let mut residual = norm(&r) / b_norm;

    for iter in 1..=max_iter {
        if residual <= tol {
            return Ok((x, residual, iter - 1));
        }
        let rho_next = dot(&r_hat, &r);
        if rho_next == 0.0 {
            break;
        }
        let beta = (rho_next / rho) * (alpha / omega);
        rho = rho_next;
        for k in 0..n {
            p[k] = r[k] + beta * (p[k] - omega * v[k]);
        }
        let p_hat = precond.precondition(&p);
        op.apply(&p_hat, &mut v);
        alpha = rho / dot(&r_hat, &v);
        for k in 0..n {
            s[k] = r[k] - alpha * v[k];
        }
        if norm(&s) / b_norm <= tol {
            x.iter_mut().zip(&p_hat).for_each(|(xi, pi)| *xi += alpha * pi);
            residual = norm(&s) / b_norm;
            return Ok((x, residual, iter));
        }
        let s_hat = precond.precondition(&s);
        op.apply(&s_hat, &mut t);
        omega = dot(&t, &s) / dot(&t, &t);
        for k in 0..n {
            x[k] += alpha * p_hat[k] + omega * s_hat[k];
            r[k] = s[k] - omega * t[k];
        }
        residual = norm(&r) / b_norm;
        if omega == 0.0 {
            break;
        }
    }
    if residual <= tol {
        Ok((x, residual, max_iter))
    } else {
        Err(Error::SolverDiverged {
            residual,
            iterations: max_iter,
        })
    }
}
