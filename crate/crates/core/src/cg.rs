//! Matrix-free conjugate gradient with thread-count independent reductions.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// A symmetric positive (semi-)definite operator applied without a matrix.
pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;
    /// `y = A x`; `y` is fully overwritten.
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

/// Outcome of a solve.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    /// Final relative residual `||b - A x|| / ||b||`.
    pub residual: f64,
    /// Relative residual after each iteration, starting with the initial guess.
    pub history: Vec<f64>,
}

const CHUNK: usize = 1 << 14;

/// Dot product summed over fixed-size chunks, so the result does not depend on
/// how many worker threads rayon uses.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let partial: Vec<f64> = a
        .par_chunks(CHUNK)
        .zip(b.par_chunks(CHUNK))
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>())
        .collect();
    partial.iter().sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.par_chunks_mut(CHUNK)
        .zip(x.par_chunks(CHUNK))
        .for_each(|(y, x)| y.iter_mut().zip(x).for_each(|(y, x)| *y += alpha * x));
}

/// Solves `A x = b` starting from the contents of `x`, stopping when the
/// relative residual drops to `tol`.
pub fn conjugate_gradient<A: LinearOperator>(
    op: &A,
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iters: usize,
) -> Result<SolveStats> {
    let n = op.dim();
    assert_eq!(b.len(), n);
    assert_eq!(x.len(), n);
    let b_norm = dot(b, b).sqrt();
    if b_norm == 0.0 {
        x.fill(0.0);
        return Ok(SolveStats { iterations: 0, residual: 0.0, history: vec![0.0] });
    }

    let mut r = vec![0.0; n];
    op.apply(x, &mut r);
    r.par_iter_mut().zip(b.par_iter()).for_each(|(r, b)| *r = b - *r);
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let mut rs = dot(&r, &r);
    let mut history = vec![rs.sqrt() / b_norm];

    let mut it = 0;
    while rs.sqrt() / b_norm > tol {
        if it == max_iters {
            return Err(Error::SolverNotConverged {
                iterations: it,
                residual: rs.sqrt() / b_norm,
                tol,
            });
        }
        op.apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            // exhausted the Krylov space of a semi-definite operator
            break;
        }
        let step = rs / pap;
        axpy(step, &p, x);
        axpy(-step, &ap, &mut r);
        let rs_new = dot(&r, &r);
        let beta = rs_new / rs;
        rs = rs_new;
        p.par_chunks_mut(CHUNK)
            .zip(r.par_chunks(CHUNK))
            .for_each(|(p, r)| p.iter_mut().zip(r).for_each(|(p, r)| *p = r + beta * *p));
        it += 1;
        history.push(rs.sqrt() / b_norm);
    }
    Ok(SolveStats { iterations: it, residual: rs.sqrt() / b_norm, history })
}

/// Conjugate residual iteration for symmetric operators. Same cost per
/// iteration as CG but minimizes the residual norm over the Krylov space, so
/// the reported residual never increases.
pub fn conjugate_residual<A: LinearOperator>(
    op: &A,
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iters: usize,
) -> Result<SolveStats> {
    let n = op.dim();
    assert_eq!(b.len(), n);
    assert_eq!(x.len(), n);
    let b_norm = dot(b, b).sqrt();
    if b_norm == 0.0 {
        x.fill(0.0);
        return Ok(SolveStats { iterations: 0, residual: 0.0, history: vec![0.0] });
    }

    let mut r = vec![0.0; n];
    op.apply(x, &mut r);
    r.par_iter_mut().zip(b.par_iter()).for_each(|(r, b)| *r = b - *r);
    let mut ar = vec![0.0; n];
    op.apply(&r, &mut ar);
    let mut p = r.clone();
    let mut ap = ar.clone();
    let mut rar = dot(&r, &ar);
    let mut rs = dot(&r, &r);
    let mut history = vec![rs.sqrt() / b_norm];

    let mut it = 0;
    while rs.sqrt() / b_norm > tol {
        if it == max_iters {
            return Err(Error::SolverNotConverged {
                iterations: it,
                residual: rs.sqrt() / b_norm,
                tol,
            });
        }
        let apap = dot(&ap, &ap);
        if apap <= 0.0 || rar <= 0.0 {
            break;
        }
        let step = rar / apap;
        axpy(step, &p, x);
        axpy(-step, &ap, &mut r);
        op.apply(&r, &mut ar);
        let rar_new = dot(&r, &ar);
        let beta = rar_new / rar;
        rar = rar_new;
        p.par_chunks_mut(CHUNK)
            .zip(r.par_chunks(CHUNK))
            .for_each(|(p, r)| p.iter_mut().zip(r).for_each(|(p, r)| *p = r + beta * *p));
        ap.par_chunks_mut(CHUNK)
            .zip(ar.par_chunks(CHUNK))
            .for_each(|(q, a)| q.iter_mut().zip(a).for_each(|(q, a)| *q = a + beta * *q));
        rs = dot(&r, &r);
        it += 1;
        history.push(rs.sqrt() / b_norm);
    }
    Ok(SolveStats { iterations: it, residual: rs.sqrt() / b_norm, history })
}
