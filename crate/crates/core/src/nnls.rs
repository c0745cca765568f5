//! Lawson–Hanson active-set solver for `min ‖Ax − b‖₂ s.t. x ≥ 0`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct NnlsResult {
    pub x: DVector<f64>,
    pub residual_norm: f64,
    /// Number of variables moved into the passive set.
    pub iterations: usize,
    /// KKT conditions hold at `tol` on the returned iterate.
    pub converged: bool,
}

/// Solves the problem with the default tolerance and `3·q` iterations.
pub fn nnls_default(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<NnlsResult> {
    nnls(a, b, 3 * a.ncols(), DEFAULT_TOL)
}

/// Lawson–Hanson NNLS. The passive-set least-squares problems are solved by
/// Householder QR. Entering variables are chosen by largest dual value,
/// ties going to the lowest index.
///
/// Hitting `max_iter` is not an error: the current iterate is returned with
/// `converged == false`.
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>, max_iter: usize, tol: f64) -> Result<NnlsResult> {
    nnls_warm(a, b, None, max_iter, tol)
}

/// As [`nnls`], but starts from the passive set `hint` (typically the
/// support of a previous solution to a nearby problem). The result satisfies
/// the same KKT conditions; only the path differs.
pub fn nnls_warm(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    hint: Option<&[bool]>,
    max_iter: usize,
    tol: f64,
) -> Result<NnlsResult> {
    let (p, q) = a.shape();
    if p == 0 || q == 0 {
        return Err(Error::DimensionMismatch(format!("design matrix is {p}×{q}")));
    }
    if b.len() != p {
        return Err(Error::DimensionMismatch(format!("rhs has length {}, design has {p} rows", b.len())));
    }
    if hint.is_some_and(|h| h.len() != q) {
        return Err(Error::DimensionMismatch(format!("passive hint does not have {q} entries")));
    }
    if max_iter == 0 {
        return Err(Error::InvalidParameter("max_iter must be at least 1".into()));
    }

    nnls_gram(a, &gram(a), b, hint, max_iter, tol)
}

/// Warm-started solve with a precomputed Gram matrix `AᵀA`, for callers
/// solving several right-hand sides against one design. Shapes are assumed
/// checked.
pub(crate) fn nnls_gram(
    a: &DMatrix<f64>,
    ata: &DMatrix<f64>,
    b: &DVector<f64>,
    hint: Option<&[bool]>,
    max_iter: usize,
    tol: f64,
) -> Result<NnlsResult> {
    let q = a.ncols();
    let atb = a.tr_mul(b);
    let threshold = tol * inf_norm(ata);

    let mut x = DVector::zeros(q);
    let mut passive = vec![false; q];
    let mut blocked = vec![false; q];
    let mut iterations = 0;

    if let Some(h) = hint {
        if h.iter().any(|&v| v) {
            passive.copy_from_slice(h);
            // x = 0 is feasible, so the feasibility loop applies unchanged.
            restore_feasibility(a, b, &mut x, &mut passive);
        }
    }

    loop {
        let w = &atb - ata * &x;
        let mut entering: Option<usize> = None;
        for j in 0..q {
            if passive[j] || blocked[j] || w[j] <= threshold {
                continue;
            }
            if entering.is_none_or(|e| w[j] > w[e]) {
                entering = Some(j);
            }
        }
        let Some(j) = entering else { break };
        if iterations >= max_iter {
            break;
        }
        iterations += 1;
        passive[j] = true;
        let before = x.clone();
        restore_feasibility(a, b, &mut x, &mut passive);

        if x == before {
            // The entering variable could not move; keep it out until the
            // iterate changes.
            blocked[j] = true;
        } else {
            blocked.iter_mut().for_each(|v| *v = false);
        }
    }

    let residual_norm = (a * &x - b).norm();
    let converged = kkt_violation_with(ata, &atb, &x) <= tol;
    Ok(NnlsResult { x, residual_norm, iterations, converged })
}

/// Solves every column of `bs` on the fixed passive set `passive` with one
/// QR factorization. Returns `None` unless each solution is strictly
/// positive on the passive set and satisfies the dual conditions at `tol`;
/// such a solution is the KKT point the general solver would also reach.
pub(crate) fn nnls_fixed_support(
    a: &DMatrix<f64>,
    ata: &DMatrix<f64>,
    bs: &DMatrix<f64>,
    passive: &[bool],
    tol: f64,
) -> Option<DMatrix<f64>> {
    let idx: Vec<usize> = (0..passive.len()).filter(|&i| passive[i]).collect();
    if idx.is_empty() || idx.len() > a.nrows() {
        return None;
    }
    let sub = a.select_columns(&idx);
    let k = idx.len();
    let qr = sub.qr();
    let r = qr.r();
    let rmax = r.diagonal().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if !r.diagonal().iter().all(|v| v.abs() > 1e-13 * rmax) {
        return None;
    }
    let mut qtb = bs.clone();
    qr.q_tr_mul(&mut qtb);
    let z = r.solve_upper_triangular(&qtb.rows(0, k).into_owned())?;
    if z.iter().any(|&v| v <= 0.0) {
        return None;
    }
    let mut x = DMatrix::zeros(a.ncols(), bs.ncols());
    for (row, &i) in idx.iter().enumerate() {
        x.row_mut(i).copy_from(&z.row(row));
    }
    let threshold = tol * inf_norm(ata);
    let dual = a.transpose() * (bs - a * &x);
    for j in 0..bs.ncols() {
        for i in 0..a.ncols() {
            if !passive[i] && dual[(i, j)] > threshold {
                return None;
            }
        }
    }
    Some(x)
}

/// Inner loop: moves `x` towards the passive-set least-squares solution,
/// dropping variables that hit zero. Each pass removes at least one
/// variable, so it ends after at most `q` passes.
fn restore_feasibility(a: &DMatrix<f64>, b: &DVector<f64>, x: &mut DVector<f64>, passive: &mut [bool]) {
    let q = passive.len();
    for _ in 0..=q {
        let idx: Vec<usize> = (0..q).filter(|&i| passive[i]).collect();
        if idx.is_empty() {
            return;
        }
        let s = passive_solve(a, b, &idx);
        if s.iter().all(|&v| v > 0.0) {
            for (k, &i) in idx.iter().enumerate() {
                x[i] = s[k];
            }
            return;
        }
        let mut alpha = f64::INFINITY;
        let mut leaving = idx[0];
        for (k, &i) in idx.iter().enumerate() {
            if s[k] <= 0.0 {
                let step = x[i] / (x[i] - s[k]);
                if step < alpha {
                    alpha = step;
                    leaving = i;
                }
            }
        }
        for (k, &i) in idx.iter().enumerate() {
            x[i] += alpha * (s[k] - x[i]);
        }
        x[leaving] = 0.0;
        for &i in &idx {
            if x[i] <= 0.0 {
                x[i] = 0.0;
                passive[i] = false;
            }
        }
    }
}

/// Largest KKT violation of `x`, relative to `‖AᵀA‖∞`: the gradient
/// `g = Aᵀ(Ax − b)` must vanish on positive entries and be non-negative on
/// zero entries.
pub fn kkt_violation(a: &DMatrix<f64>, b: &DVector<f64>, x: &DVector<f64>) -> f64 {
    kkt_violation_with(&a.tr_mul(a), &a.tr_mul(b), x)
}

fn kkt_violation_with(ata: &DMatrix<f64>, atb: &DVector<f64>, x: &DVector<f64>) -> f64 {
    let scale = inf_norm(ata);
    if scale == 0.0 {
        return 0.0;
    }
    let g = ata * x - atb;
    let mut worst: f64 = 0.0;
    for i in 0..x.len() {
        let v = if x[i] < 0.0 {
            f64::INFINITY
        } else if x[i] > 0.0 {
            g[i].abs()
        } else {
            (-g[i]).max(0.0)
        };
        worst = worst.max(v);
    }
    worst / scale
}

/// `AᵀA` through the blocked matrix product.
pub(crate) fn gram(a: &DMatrix<f64>) -> DMatrix<f64> {
    a.transpose() * a
}

fn inf_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// Unconstrained least squares on the columns `idx` of `a`.
fn passive_solve(a: &DMatrix<f64>, b: &DVector<f64>, idx: &[usize]) -> DVector<f64> {
    let sub = a.select_columns(idx);
    let (p, k) = sub.shape();
    if p >= k {
        let qr = sub.clone().qr();
        let r = qr.r();
        let rmax = r.diagonal().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let well_posed = r.diagonal().iter().all(|v| v.abs() > 1e-13 * rmax);
        if well_posed {
            let mut qtb = b.clone();
            qr.q_tr_mul(&mut qtb);
            let rhs = qtb.rows(0, k).into_owned();
            if let Some(z) = r.solve_upper_triangular(&rhs) {
                return z;
            }
        }
    }
    sub.svd(true, true)
        .solve(b, 1e-13)
        .unwrap_or_else(|_| DVector::zeros(idx.len()))
}
