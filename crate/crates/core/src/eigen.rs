//! Eigenpairs near a shift: Arnoldi iteration on the inverted shifted
//! operator, with a dense full-spectrum oracle for validation and
//! fallback.

use crate::error::{Error, Result};
use faer::linalg::solvers::{PartialPivLu, Solve};
use faer::Mat;
use num_complex::Complex;

/// Matrices this small are handed to the dense solver outright; above it
/// the dense path serves as validation oracle and as fallback when the
/// iteration stalls.
pub const DENSE_FALLBACK_DIM: usize = 2500;

/// Imaginary parts above this (relative) threshold flag an unphysical
/// complex pair near the shift.
const REALITY_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct EigenRequest {
    /// Shift; eigenvalues nearest this value are computed.
    pub sigma: f64,
    /// Number of eigenpairs.
    pub k: usize,
    /// Krylov basis size before a restart.
    pub krylov_dim: usize,
    /// Residual tolerance.
    pub tol: f64,
    pub max_restarts: usize,
    /// Deterministic start vector; all-ones when absent.
    pub start: Option<Vec<f64>>,
}

impl EigenRequest {
    pub fn new(sigma: f64, k: usize) -> Self {
        Self {
            sigma,
            k,
            krylov_dim: (4 * k).max(60),
            tol: 1e-10,
            max_restarts: 8,
            start: None,
        }
    }

    pub fn with_krylov_dim(mut self, m: usize) -> Self {
        self.krylov_dim = m;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_start(mut self, v: Vec<f64>) -> Self {
        self.start = Some(v);
        self
    }
}

#[derive(Debug, Clone)]
pub struct EigenResult {
    /// Sorted by distance from the shift.
    pub eigenvalues: Vec<f64>,
    /// Euclidean-normalized, sign-fixed.
    pub eigenvectors: Vec<Vec<f64>>,
    /// `||A v - lambda v||_2` per pair.
    pub residuals: Vec<f64>,
    pub sigma: f64,
}

fn mat_from_col(v: &[f64]) -> Mat<f64> {
    Mat::from_fn(v.len(), 1, |i, _| v[i])
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn fix_sign(v: &mut [f64]) {
    let mut best = 0.0f64;
    let mut sign = 1.0f64;
    for &x in v.iter() {
        if x.abs() > best {
            best = x.abs();
            sign = if x >= 0.0 { 1.0 } else { -1.0 };
        }
    }
    if sign < 0.0 {
        for x in v.iter_mut() {
            *x = -*x;
        }
    }
}

fn inf_norm(a: &Mat<f64>) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..a.nrows() {
        let mut s = 0.0;
        for j in 0..a.ncols() {
            s += a[(i, j)].abs();
        }
        worst = worst.max(s);
    }
    worst
}

fn residual_on(a: &Mat<f64>, lambda: f64, v: &[f64]) -> f64 {
    let n = v.len();
    let mut acc = 0.0;
    for i in 0..n {
        let mut r = -lambda * v[i];
        for j in 0..n {
            r += a[(i, j)] * v[j];
        }
        acc += r * r;
    }
    acc.sqrt()
}

fn factor_shifted(a: &Mat<f64>, sigma: f64) -> (PartialPivLu<f64>, f64) {
    let n = a.nrows();
    let mut sigma = sigma;
    loop {
        let mut shifted = a.clone();
        for i in 0..n {
            shifted[(i, i)] -= sigma;
        }
        let lu = shifted.partial_piv_lu();
        let u = lu.U();
        let mut min_d = f64::INFINITY;
        let mut max_d = 0.0f64;
        for i in 0..n {
            let d = u[(i, i)].abs();
            min_d = min_d.min(d);
            max_d = max_d.max(d);
        }
        if min_d > max_d * 1e-14 && min_d.is_finite() {
            return (lu, sigma);
        }
        let bump = 1e-8 * sigma.abs().max(1.0);
        log::warn!("(A - sigma I) numerically singular at sigma = {sigma}; retrying at {}", sigma + bump);
        sigma += bump;
    }
}

/// Full-spectrum dense decomposition, returning the `k` eigenvalues
/// nearest `sigma`. This is the validation oracle for the iterative path.
pub fn dense_eigs(a: &Mat<f64>, sigma: f64, k: usize) -> Result<EigenResult> {
    let n = a.nrows();
    let evd = a.eigen().map_err(|_| Error::SingularOperator {
        context: "dense eigendecomposition",
    })?;
    let s = evd.S();
    let u = evd.U();
    let mut order: Vec<usize> = (0..n).collect();
    let dist = |i: usize| {
        let l: Complex<f64> = s[i];
        ((l.re - sigma) * (l.re - sigma) + l.im * l.im).sqrt()
    };
    order.sort_by(|&i, &j| dist(i).partial_cmp(&dist(j)).unwrap());
    let mut eigenvalues = Vec::with_capacity(k);
    let mut eigenvectors = Vec::with_capacity(k);
    let mut residuals = Vec::with_capacity(k);
    for &idx in order.iter().take(k.min(n)) {
        let l: Complex<f64> = s[idx];
        if l.im.abs() > REALITY_TOL * l.re.abs().max(1.0) {
            return Err(Error::ComplexEigenvalue {
                sigma,
                imag: l.im,
            });
        }
        // rotate the complex vector onto the real axis before projecting
        let mut biggest = Complex::new(0.0, 0.0);
        for r in 0..n {
            if u[(r, idx)].norm() > biggest.norm() {
                biggest = u[(r, idx)];
            }
        }
        let phase = biggest / biggest.norm();
        let mut v: Vec<f64> = (0..n).map(|r| (u[(r, idx)] / phase).re).collect();
        let nrm = norm2(&v);
        for x in v.iter_mut() {
            *x /= nrm;
        }
        fix_sign(&mut v);
        residuals.push(residual_on(a, l.re, &v));
        eigenvalues.push(l.re);
        eigenvectors.push(v);
    }
    Ok(EigenResult {
        eigenvalues,
        eigenvectors,
        residuals,
        sigma,
    })
}

struct RitzSet {
    /// (eigenvalue of the inverted operator, Ritz vector coefficients)
    pairs: Vec<(Complex<f64>, Vec<Complex<f64>>)>,
}

fn hessenberg_ritz(h: &Mat<f64>, j: usize) -> Result<RitzSet> {
    let hj = Mat::from_fn(j, j, |r, c| h[(r, c)]);
    let evd = hj.eigen().map_err(|_| Error::SingularOperator {
        context: "Hessenberg eigendecomposition",
    })?;
    let s = evd.S();
    let u = evd.U();
    let mut pairs: Vec<(Complex<f64>, Vec<Complex<f64>>)> = (0..j)
        .map(|c| {
            let y: Vec<Complex<f64>> = (0..j).map(|r| u[(r, c)]).collect();
            (s[c], y)
        })
        .collect();
    // dominant eigenvalues of the inverted operator first
    pairs.sort_by(|a, b| b.0.norm().partial_cmp(&a.0.norm()).unwrap());
    Ok(RitzSet { pairs })
}

/// Eigenpairs of `a` nearest `req.sigma` via Arnoldi iteration on
/// `(A - sigma I)^-1`, restarting from the accumulated Ritz estimate when
/// the basis fills up. Falls back to the dense decomposition for small
/// problems and, below [`DENSE_FALLBACK_DIM`], on non-convergence.
pub fn shift_invert_eigs(a: &Mat<f64>, req: &EigenRequest) -> Result<EigenResult> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::SizeMismatch {
            expected: n,
            got: a.ncols(),
            context: "eigenproblem requires a square matrix",
        });
    }
    if req.k == 0 || req.k > n {
        return Err(Error::InvalidParameter {
            name: "k",
            reason: format!("need 1 <= k <= {n}, got {}", req.k),
        });
    }
    let m = req.krylov_dim.min(n);
    if m >= n || req.k + 2 >= m {
        return dense_eigs(a, req.sigma, req.k);
    }

    let (lu, sigma) = factor_shifted(a, req.sigma);
    let a_scale = inf_norm(a).max(1.0);

    let mut v0: Vec<f64> = match &req.start {
        Some(v) if v.len() == n && norm2(v) > 0.0 => v.clone(),
        _ => vec![1.0; n],
    };
    let nrm = norm2(&v0);
    for x in v0.iter_mut() {
        *x /= nrm;
    }

    let mut best_residuals: Vec<f64> = Vec::new();
    for _restart in 0..=req.max_restarts {
        let mut basis: Vec<Vec<f64>> = vec![v0.clone()];
        let mut h = Mat::<f64>::zeros(m + 1, m);
        let mut converged: Option<RitzSet> = None;
        let mut j_used = 0;

        'expand: for j in 0..m {
            // w = (A - sigma I)^-1 v_j
            let w_mat = lu.solve(&mat_from_col(&basis[j]));
            let mut w: Vec<f64> = (0..n).map(|i| w_mat[(i, 0)]).collect();
            let w_before = norm2(&w);
            for (i, vi) in basis.iter().enumerate() {
                let hij = dot(vi, &w);
                h[(i, j)] += hij;
                for (wk, vk) in w.iter_mut().zip(vi) {
                    *wk -= hij * vk;
                }
            }
            // one re-orthogonalization pass when cancellation was heavy
            if norm2(&w) < 0.5 * w_before {
                for (i, vi) in basis.iter().enumerate() {
                    let hij = dot(vi, &w);
                    h[(i, j)] += hij;
                    for (wk, vk) in w.iter_mut().zip(vi) {
                        *wk -= hij * vk;
                    }
                }
            }
            let beta = norm2(&w);
            h[(j + 1, j)] = beta;
            j_used = j + 1;

            let invariant = beta < 1e-14 * a_scale.recip().max(1e-300) || beta < 1e-290;
            let check_now = invariant
                || j + 1 == m
                || (j + 1 >= req.k + 2 && (j + 1) % 3 == 0);
            if check_now {
                let ritz = hessenberg_ritz(&h, j + 1)?;
                let enough = ritz.pairs.len() >= req.k;
                if enough {
                    let mut all_ok = true;
                    for (mu, y) in ritz.pairs.iter().take(req.k) {
                        let res_est = beta * y[j].norm();
                        if res_est > req.tol * mu.norm().max(1e-300) {
                            all_ok = false;
                            break;
                        }
                    }
                    if all_ok || invariant {
                        converged = Some(ritz);
                        break 'expand;
                    }
                }
                if invariant {
                    converged = Some(ritz);
                    break 'expand;
                }
            }
            if beta < 1e-290 {
                break 'expand;
            }
            for x in w.iter_mut() {
                *x /= beta;
            }
            basis.push(w);
        }

        let ritz = match converged {
            Some(r) => r,
            None => hessenberg_ritz(&h, j_used)?,
        };

        // assemble Ritz vectors in the original space
        let take = req.k.min(ritz.pairs.len());
        let mut eigenvalues = Vec::with_capacity(take);
        let mut eigenvectors = Vec::with_capacity(take);
        let mut residuals = Vec::with_capacity(take);
        let mut ok = true;
        for (mu, y) in ritz.pairs.iter().take(take) {
            if mu.norm() == 0.0 {
                ok = false;
                break;
            }
            let lambda_c = Complex::new(sigma, 0.0) + mu.powi(-1);
            if lambda_c.im.abs() > REALITY_TOL * lambda_c.re.abs().max(1.0) {
                return Err(Error::ComplexEigenvalue {
                    sigma,
                    imag: lambda_c.im,
                });
            }
            let mut v = vec![0.0; n];
            for (coef, basis_vec) in y.iter().zip(basis.iter()) {
                // wanted Ritz values are real here, so the real projection
                // of the coefficient vector carries the eigenvector
                let c = coef.re;
                for (vk, bk) in v.iter_mut().zip(basis_vec) {
                    *vk += c * bk;
                }
            }
            let nrm = norm2(&v);
            if nrm < 1e-300 {
                ok = false;
                break;
            }
            for x in v.iter_mut() {
                *x /= nrm;
            }
            fix_sign(&mut v);
            let lambda = lambda_c.re;
            let res = residual_on(a, lambda, &v);
            if res > req.tol * a_scale {
                ok = false;
            }
            eigenvalues.push(lambda);
            eigenvectors.push(v);
            residuals.push(res);
        }

        if ok && eigenvalues.len() == req.k {
            let mut order: Vec<usize> = (0..req.k).collect();
            order.sort_by(|&i, &j| {
                (eigenvalues[i] - sigma)
                    .abs()
                    .partial_cmp(&(eigenvalues[j] - sigma).abs())
                    .unwrap()
            });
            return Ok(EigenResult {
                eigenvalues: order.iter().map(|&i| eigenvalues[i]).collect(),
                eigenvectors: order.iter().map(|&i| eigenvectors[i].clone()).collect(),
                residuals: order.iter().map(|&i| residuals[i]).collect(),
                sigma,
            });
        }

        best_residuals = residuals;
        // restart from the span of the wanted Ritz directions
        let mut fresh = vec![0.0; n];
        for v in eigenvectors.iter() {
            for (fk, vk) in fresh.iter_mut().zip(v) {
                *fk += vk;
            }
        }
        let nrm = norm2(&fresh);
        if nrm > 1e-300 {
            for x in fresh.iter_mut() {
                *x /= nrm;
            }
            v0 = fresh;
        }
    }

    if n <= DENSE_FALLBACK_DIM {
        log::warn!(
            "shift-invert iteration stalled at sigma = {}; using the dense fallback (dim {n})",
            req.sigma
        );
        return dense_eigs(a, req.sigma, req.k);
    }
    Err(Error::EigenNoConvergence {
        restarts: req.max_restarts,
        best_residuals,
        tol: req.tol,
    })
}

/// How to pick one eigenpair out of a solve.
pub enum SelectTarget<'a> {
    /// The `nu`-th lowest eigenvalue (1-based), for initialization.
    Excitation(usize),
    /// Maximal overlap with the previous orbital, to keep tracking the
    /// same state across iterations.
    Previous(&'a [f64]),
}

/// Outcome of a selection: index into the result and the (absolute)
/// overlap that justified it.
#[derive(Debug, Clone, Copy)]
pub struct Selection {
    pub index: usize,
    pub overlap: f64,
    /// Sign of the raw overlap, for keeping orbital phases aligned.
    pub sign: f64,
}

/// Pick an eigenpair. `inner` is the physical inner product used for
/// overlaps (eigenvectors are assumed normalized under it by the caller;
/// selection only compares magnitudes, so Euclidean vectors work too).
pub fn select_orbital(
    result: &EigenResult,
    target: SelectTarget,
    inner: impl Fn(&[f64], &[f64]) -> f64,
) -> Result<Selection> {
    if result.eigenvalues.is_empty() {
        return Err(Error::InvalidParameter {
            name: "result",
            reason: "no eigenpairs to select from".into(),
        });
    }
    match target {
        SelectTarget::Excitation(nu) => {
            if nu == 0 || nu > result.eigenvalues.len() {
                return Err(Error::InvalidParameter {
                    name: "nu",
                    reason: format!(
                        "excitation {nu} outside 1..={}",
                        result.eigenvalues.len()
                    ),
                });
            }
            let mut order: Vec<usize> = (0..result.eigenvalues.len()).collect();
            order.sort_by(|&i, &j| {
                result.eigenvalues[i]
                    .partial_cmp(&result.eigenvalues[j])
                    .unwrap()
            });
            Ok(Selection {
                index: order[nu - 1],
                overlap: 1.0,
                sign: 1.0,
            })
        }
        SelectTarget::Previous(prev) => {
            let prev_norm = inner(prev, prev).sqrt();
            let mut overlaps = Vec::with_capacity(result.eigenvectors.len());
            for v in &result.eigenvectors {
                let vn = inner(v, v).sqrt();
                let o = inner(v, prev) / (vn * prev_norm);
                overlaps.push(o);
            }
            let mut best = 0usize;
            for i in 1..overlaps.len() {
                if overlaps[i].abs() > overlaps[best].abs() {
                    best = i;
                }
            }
            let abs: Vec<f64> = overlaps.iter().map(|o| o.abs()).collect();
            if abs[best] < 0.5 {
                return Err(Error::StateLost {
                    best: abs[best],
                    overlaps: abs,
                });
            }
            let mut second = 0.0f64;
            for (i, &o) in abs.iter().enumerate() {
                if i != best {
                    second = second.max(o);
                }
            }
            if abs[best] - second < 0.05 {
                log::warn!(
                    "orbital selection near-tie: best overlap {:.4}, runner-up {:.4}",
                    abs[best],
                    second
                );
            }
            Ok(Selection {
                index: best,
                overlap: abs[best],
                sign: overlaps[best].signum(),
            })
        }
    }
}
