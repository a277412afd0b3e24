//! Chebyshev differentiation matrices, 2D tensor-product operators, and
//! elimination of inner boundary conditions.
//!
//! Vectorization convention: a field on the trimmed grid (outer Dirichlet
//! edges at `x = +1`, `y = +1` removed) is stored with the y index fastest,
//! `p = [p(x_1,y_1), p(x_1,y_2), ..., p(x_1,y_N), p(x_2,y_1), ...]`.
//! The trimmed set splits into interior nodes (`i, j <= N-1`), the plane
//! boundary `b_y` (`j = N`, `i <= N-1`) and the axis boundary `b_x`
//! (`i = N`, including the corner). This is the single canonical layout
//! used by every module.

use crate::error::{Error, Result};
use faer::linalg::solvers::{PartialPivLu, Solve};
use faer::Mat;

/// Differentiation matrix on arbitrary distinct nodes via the cardinal
/// polynomials: `D_ij = a_i / (a_j (x_i - x_j))` off the diagonal with
/// `a_j = prod_{k != j} (x_j - x_k)`. Diagonal entries are filled with the
/// negative row sum, which is the same quantity evaluated stably.
pub fn diff_matrix(nodes: &[f64]) -> Result<Mat<f64>> {
    let m = nodes.len();
    for i in 0..m {
        for j in i + 1..m {
            if nodes[i] == nodes[j] {
                return Err(Error::DuplicateNodes { i, j });
            }
        }
    }
    // log-scaled products to avoid under/overflow at large N
    let mut log_a = vec![0.0f64; m];
    let mut sign_a = vec![1.0f64; m];
    for j in 0..m {
        let mut s = 0.0;
        let mut sg = 1.0;
        for k in 0..m {
            if k != j {
                let d: f64 = nodes[j] - nodes[k];
                s += d.abs().ln();
                if d < 0.0 {
                    sg = -sg;
                }
            }
        }
        log_a[j] = s;
        sign_a[j] = sg;
    }
    let mut d = Mat::<f64>::zeros(m, m);
    for i in 0..m {
        let mut diag = 0.0;
        for j in 0..m {
            if i != j {
                let dx = nodes[i] - nodes[j];
                let val = sign_a[i] * sign_a[j] * (log_a[i] - log_a[j]).exp() / dx;
                d[(i, j)] = val;
                diag -= val;
            }
        }
        d[(i, i)] = diag;
    }
    Ok(d)
}

/// Inner boundary condition at `x = -1` or `y = -1`. The outer edges are
/// always Dirichlet.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bc {
    Dirichlet,
    Neumann,
}

/// Conditions on the magnetic axis (`x = -1`) and the `z = 0` plane
/// (`y = -1`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryPolicy {
    pub axis: Bc,
    pub plane: Bc,
}

impl BoundaryPolicy {
    pub const fn new(axis: Bc, plane: Bc) -> Self {
        Self { axis, plane }
    }
}

/// Index bookkeeping for the trimmed grid of degree `n`.
#[derive(Debug, Clone, Copy)]
pub struct Layout {
    pub n: usize,
}

impl Layout {
    pub fn new(n: usize) -> Self {
        Self { n }
    }

    pub fn interior_len(&self) -> usize {
        (self.n - 1) * (self.n - 1)
    }

    pub fn by_len(&self) -> usize {
        self.n - 1
    }

    pub fn bx_len(&self) -> usize {
        self.n
    }

    pub fn trimmed_len(&self) -> usize {
        self.n * self.n
    }

    pub fn full_len(&self) -> usize {
        (self.n + 1) * (self.n + 1)
    }

    /// Trimmed index of node `(i, j)`, `i, j` in `1..=N`.
    #[inline]
    pub fn trim(&self, i: usize, j: usize) -> usize {
        (i - 1) * self.n + (j - 1)
    }

    /// Interior index of node `(i, j)`, `i, j` in `1..=N-1`.
    #[inline]
    pub fn int(&self, i: usize, j: usize) -> usize {
        (i - 1) * (self.n - 1) + (j - 1)
    }

    /// Interior values of a full-grid field.
    pub fn interior_from_full(&self, full: &[f64]) -> Vec<f64> {
        debug_assert_eq!(full.len(), self.full_len());
        let np1 = self.n + 1;
        let mut out = vec![0.0; self.interior_len()];
        for i in 1..self.n {
            for j in 1..self.n {
                out[self.int(i, j)] = full[i * np1 + j];
            }
        }
        out
    }

    /// Trimmed values of a full-grid field.
    pub fn trimmed_from_full(&self, full: &[f64]) -> Vec<f64> {
        debug_assert_eq!(full.len(), self.full_len());
        let np1 = self.n + 1;
        let mut out = vec![0.0; self.trimmed_len()];
        for i in 1..=self.n {
            for j in 1..=self.n {
                out[self.trim(i, j)] = full[i * np1 + j];
            }
        }
        out
    }
}

/// First- and second-derivative operators in both directions, with the
/// outer Dirichlet rows and columns excised. Stored in factored
/// (one-dimensional) form; `dense_*` materializes the Kronecker products
/// for small-grid validation.
#[derive(Debug, Clone)]
pub struct Kron2d {
    n: usize,
    pub dx: Mat<f64>,
    pub dy: Mat<f64>,
    pub dx2: Mat<f64>,
    pub dy2: Mat<f64>,
}

impl Kron2d {
    pub fn new(dx: Mat<f64>, dy: Mat<f64>) -> Result<Self> {
        if dx.nrows() != dx.ncols() || dy.nrows() != dy.ncols() || dx.nrows() != dy.nrows() {
            return Err(Error::SizeMismatch {
                expected: dx.nrows(),
                got: dy.nrows(),
                context: "Kron2d requires square matrices of equal order",
            });
        }
        let dx2 = &dx * &dx;
        let dy2 = &dy * &dy;
        Ok(Self {
            n: dx.nrows() - 1,
            dx,
            dy,
            dx2,
            dy2,
        })
    }

    pub fn for_degree(n: usize) -> Result<Self> {
        let d = diff_matrix(&crate::grid::chebyshev_lobatto(n))?;
        Kron2d::new(d.clone(), d)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn layout(&self) -> Layout {
        Layout::new(self.n)
    }

    fn apply_x(&self, m: &Mat<f64>, f: &[f64]) -> Vec<f64> {
        let n = self.n;
        debug_assert_eq!(f.len(), n * n);
        let mut out = vec![0.0; n * n];
        for i in 1..=n {
            for j in 1..=n {
                let mut acc = 0.0;
                for ip in 1..=n {
                    acc += m[(i, ip)] * f[(ip - 1) * n + (j - 1)];
                }
                out[(i - 1) * n + (j - 1)] = acc;
            }
        }
        out
    }

    fn apply_y(&self, m: &Mat<f64>, f: &[f64]) -> Vec<f64> {
        let n = self.n;
        debug_assert_eq!(f.len(), n * n);
        let mut out = vec![0.0; n * n];
        for i in 1..=n {
            for j in 1..=n {
                let mut acc = 0.0;
                for jp in 1..=n {
                    acc += m[(j, jp)] * f[(i - 1) * n + (jp - 1)];
                }
                out[(i - 1) * n + (j - 1)] = acc;
            }
        }
        out
    }

    /// `(Dx (x) I) f` on the trimmed grid.
    pub fn apply_dx(&self, f: &[f64]) -> Vec<f64> {
        self.apply_x(&self.dx, f)
    }

    /// `(Dx Dx (x) I) f`.
    pub fn apply_dx2(&self, f: &[f64]) -> Vec<f64> {
        self.apply_x(&self.dx2, f)
    }

    /// `(I (x) Dy) f`.
    pub fn apply_dy(&self, f: &[f64]) -> Vec<f64> {
        self.apply_y(&self.dy, f)
    }

    /// `(I (x) Dy Dy) f`.
    pub fn apply_dy2(&self, f: &[f64]) -> Vec<f64> {
        self.apply_y(&self.dy2, f)
    }

    fn dense_x(&self, m: &Mat<f64>) -> Mat<f64> {
        let n = self.n;
        let lay = self.layout();
        let mut out = Mat::zeros(n * n, n * n);
        for i in 1..=n {
            for j in 1..=n {
                for ip in 1..=n {
                    out[(lay.trim(i, j), lay.trim(ip, j))] = m[(i, ip)];
                }
            }
        }
        out
    }

    fn dense_y(&self, m: &Mat<f64>) -> Mat<f64> {
        let n = self.n;
        let lay = self.layout();
        let mut out = Mat::zeros(n * n, n * n);
        for i in 1..=n {
            for j in 1..=n {
                for jp in 1..=n {
                    out[(lay.trim(i, j), lay.trim(i, jp))] = m[(j, jp)];
                }
            }
        }
        out
    }

    pub fn dense_dx(&self) -> Mat<f64> {
        self.dense_x(&self.dx)
    }

    pub fn dense_dy(&self) -> Mat<f64> {
        self.dense_y(&self.dy)
    }

    pub fn dense_dx2(&self) -> Mat<f64> {
        self.dense_x(&self.dx2)
    }

    pub fn dense_dy2(&self) -> Mat<f64> {
        self.dense_y(&self.dy2)
    }
}

/// Diagonal coefficient fields of `a Dx~2 + b Dx~ + c Dy~2 + d Dy~ + e`,
/// sampled over the trimmed grid.
#[derive(Debug, Clone)]
pub struct CoeffFields {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub d: Vec<f64>,
    pub e: Vec<f64>,
}

impl CoeffFields {
    /// Sample coefficient closures `f(i, j)` (node indices in `1..=N`)
    /// over the trimmed grid.
    pub fn sample<Fa, Fb, Fc, Fd, Fe>(n: usize, a: Fa, b: Fb, c: Fc, d: Fd, e: Fe) -> Self
    where
        Fa: Fn(usize, usize) -> f64,
        Fb: Fn(usize, usize) -> f64,
        Fc: Fn(usize, usize) -> f64,
        Fd: Fn(usize, usize) -> f64,
        Fe: Fn(usize, usize) -> f64,
    {
        let lay = Layout::new(n);
        let mut out = Self {
            a: vec![0.0; n * n],
            b: vec![0.0; n * n],
            c: vec![0.0; n * n],
            d: vec![0.0; n * n],
            e: vec![0.0; n * n],
        };
        for i in 1..=n {
            for j in 1..=n {
                let t = lay.trim(i, j);
                out.a[t] = a(i, j);
                out.b[t] = b(i, j);
                out.c[t] = c(i, j);
                out.d[t] = d(i, j);
                out.e[t] = e(i, j);
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }
}

/// Interior rows of the assembled operator, partitioned by column class:
/// `E` (interior), `C` (plane boundary) and `E_N` (axis boundary).
#[derive(Debug, Clone)]
pub struct FullOperator {
    n: usize,
    e: Mat<f64>,
    c: Mat<f64>,
    en: Mat<f64>,
}

impl FullOperator {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn e_block(&self) -> &Mat<f64> {
        &self.e
    }

    pub fn c_block(&self) -> &Mat<f64> {
        &self.c
    }

    pub fn en_block(&self) -> &Mat<f64> {
        &self.en
    }

    /// Apply the interior rows to a trimmed-grid field.
    pub fn apply_trimmed(&self, f: &[f64]) -> Vec<f64> {
        let lay = Layout::new(self.n);
        debug_assert_eq!(f.len(), lay.trimmed_len());
        let n = self.n;
        let nint = lay.interior_len();
        let mut p_int = vec![0.0; nint];
        let mut p_by = vec![0.0; lay.by_len()];
        let mut p_bx = vec![0.0; lay.bx_len()];
        for i in 1..n {
            for j in 1..n {
                p_int[lay.int(i, j)] = f[lay.trim(i, j)];
            }
            p_by[i - 1] = f[lay.trim(i, n)];
        }
        for j in 1..=n {
            p_bx[j - 1] = f[lay.trim(n, j)];
        }
        let mut out = vec![0.0; nint];
        for r in 0..nint {
            let mut acc = 0.0;
            for k in 0..nint {
                acc += self.e[(r, k)] * p_int[k];
            }
            for k in 0..lay.by_len() {
                acc += self.c[(r, k)] * p_by[k];
            }
            for k in 0..lay.bx_len() {
                acc += self.en[(r, k)] * p_bx[k];
            }
            out[r] = acc;
        }
        out
    }
}

/// Assemble `diag(a) Dx~2 + diag(b) Dx~ + diag(c) Dy~2 + diag(d) Dy~ +
/// diag(e)` over the trimmed grid, keeping only the interior rows.
pub fn assemble_operator(coeffs: &CoeffFields, kron: &Kron2d) -> Result<FullOperator> {
    let n = kron.n();
    let lay = Layout::new(n);
    if coeffs.len() != lay.trimmed_len() {
        return Err(Error::SizeMismatch {
            expected: lay.trimmed_len(),
            got: coeffs.len(),
            context: "coefficient fields must cover the trimmed grid",
        });
    }
    let nint = lay.interior_len();
    let mut e = Mat::<f64>::zeros(nint, nint);
    let mut c = Mat::<f64>::zeros(nint, lay.by_len());
    let mut en = Mat::<f64>::zeros(nint, lay.bx_len());
    for i in 1..n {
        for j in 1..n {
            let r = lay.int(i, j);
            let t = lay.trim(i, j);
            let (ca, cb, cc, cd, ce) =
                (coeffs.a[t], coeffs.b[t], coeffs.c[t], coeffs.d[t], coeffs.e[t]);
            // x-direction couplings: same j, varying i'
            for ip in 1..=n {
                let v = ca * kron.dx2[(i, ip)] + cb * kron.dx[(i, ip)];
                if ip < n {
                    e[(r, lay.int(ip, j))] += v;
                } else {
                    en[(r, j - 1)] += v;
                }
            }
            // y-direction couplings: same i, varying j'
            for jp in 1..=n {
                let v = cc * kron.dy2[(j, jp)] + cd * kron.dy[(j, jp)];
                if jp < n {
                    e[(r, lay.int(i, jp))] += v;
                } else {
                    c[(r, i - 1)] += v;
                }
            }
            e[(r, r)] += ce;
        }
    }
    Ok(FullOperator { n, e, c, en })
}

/// Rows of the Neumann condition matrices, partitioned like the operator:
/// `B_1 p_int + B_2 p_by + B_N p_bx = 0` along the axis and
/// `G p_int + H p_by = 0` along the plane.
#[derive(Debug, Clone)]
pub struct BoundaryBlocks {
    pub b1: Mat<f64>,
    pub b2: Mat<f64>,
    pub bn: Mat<f64>,
    pub g: Mat<f64>,
    pub h: Mat<f64>,
}

pub fn boundary_blocks(kron: &Kron2d) -> BoundaryBlocks {
    let n = kron.n();
    let lay = Layout::new(n);
    let nint = lay.interior_len();
    let mut b1 = Mat::<f64>::zeros(lay.bx_len(), nint);
    let mut b2 = Mat::<f64>::zeros(lay.bx_len(), lay.by_len());
    let mut bn = Mat::<f64>::zeros(lay.bx_len(), lay.bx_len());
    // row for axis node (N, j): sum_i Dx[N, i] p(i, j)
    for j in 1..=n {
        bn[(j - 1, j - 1)] = kron.dx[(n, n)];
        for ip in 1..n {
            if j < n {
                b1[(j - 1, lay.int(ip, j))] = kron.dx[(n, ip)];
            } else {
                // corner row touches the plane boundary line
                b2[(j - 1, ip - 1)] = kron.dx[(n, ip)];
            }
        }
    }
    let mut g = Mat::<f64>::zeros(lay.by_len(), nint);
    let mut h = Mat::<f64>::zeros(lay.by_len(), lay.by_len());
    // row for plane node (i, N): sum_j Dy[N, j] p(i, j)
    for i in 1..n {
        h[(i - 1, i - 1)] = kron.dy[(n, n)];
        for jp in 1..n {
            g[(i - 1, lay.int(i, jp))] = kron.dy[(n, jp)];
        }
    }
    BoundaryBlocks { b1, b2, g, h, bn }
}

/// Boundary-eliminated operator over interior nodes, with the linear maps
/// that rebuild the inner boundary values from an interior solution.
#[derive(Debug, Clone)]
pub struct ReducedOperator {
    n: usize,
    policy: BoundaryPolicy,
    a: Mat<f64>,
    recon_by: Option<Mat<f64>>,
    recon_bx: Option<Mat<f64>>,
}

fn lu_checked(m: &Mat<f64>, block: &'static str, edge: &'static str) -> Result<PartialPivLu<f64>> {
    let lu = m.partial_piv_lu();
    let u = lu.U();
    let k = u.nrows();
    let mut max_diag = 0.0f64;
    let mut min_diag = f64::INFINITY;
    for i in 0..k {
        let d = u[(i, i)].abs();
        max_diag = max_diag.max(d);
        min_diag = min_diag.min(d);
    }
    if !(min_diag > max_diag * 1e-14) || !min_diag.is_finite() {
        return Err(Error::SingularBoundaryBlock { block, edge });
    }
    Ok(lu)
}

/// Eliminate the inner boundary unknowns of `op` under `policy`.
///
/// With both edges Neumann the interior operator is
/// `E - E_N B_N^-1 (B_1 - B_2 H^-1 G) - C H^-1 G`; a Dirichlet edge
/// simply zeroes its boundary values and drops the corresponding
/// correction.
pub fn eliminate_boundaries(
    op: &FullOperator,
    policy: BoundaryPolicy,
    kron: &Kron2d,
) -> Result<ReducedOperator> {
    if kron.n() != op.n {
        return Err(Error::SizeMismatch {
            expected: op.n,
            got: kron.n(),
            context: "operator and differentiation matrices disagree on degree",
        });
    }
    let blocks = boundary_blocks(kron);
    let (a, recon_by, recon_bx) = match (policy.axis, policy.plane) {
        (Bc::Dirichlet, Bc::Dirichlet) => (op.e.clone(), None, None),
        (Bc::Dirichlet, Bc::Neumann) => {
            let h = lu_checked(&blocks.h, "H", "z = 0 plane")?;
            let x = h.solve(&blocks.g);
            let a = &op.e - &op.c * &x;
            (a, Some(-x), None)
        }
        (Bc::Neumann, Bc::Dirichlet) => {
            let bn = lu_checked(&blocks.bn, "B_N", "magnetic axis")?;
            let y = bn.solve(&blocks.b1);
            let a = &op.e - &op.en * &y;
            (a, None, Some(-y))
        }
        (Bc::Neumann, Bc::Neumann) => {
            let h = lu_checked(&blocks.h, "H", "z = 0 plane")?;
            let x = h.solve(&blocks.g);
            let bn = lu_checked(&blocks.bn, "B_N", "magnetic axis")?;
            let y = bn.solve(&(&blocks.b1 - &blocks.b2 * &x));
            let a = &op.e - &op.c * &x - &op.en * &y;
            (a, Some(-x), Some(-y))
        }
    };
    Ok(ReducedOperator {
        n: op.n,
        policy,
        a,
        recon_by,
        recon_bx,
    })
}

impl ReducedOperator {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        (self.n - 1) * (self.n - 1)
    }

    pub fn policy(&self) -> BoundaryPolicy {
        self.policy
    }

    pub fn matrix(&self) -> &Mat<f64> {
        &self.a
    }

    /// Same elimination maps with `diag(v)` added over interior nodes.
    /// The boundary reconstruction is untouched: it encodes only the
    /// derivative conditions, which local potentials do not enter.
    pub fn with_added_diagonal(&self, v: &[f64]) -> ReducedOperator {
        debug_assert_eq!(v.len(), self.dim());
        let mut a = self.a.clone();
        for (k, vk) in v.iter().enumerate() {
            a[(k, k)] += vk;
        }
        ReducedOperator {
            n: self.n,
            policy: self.policy,
            a,
            recon_by: self.recon_by.clone(),
            recon_bx: self.recon_bx.clone(),
        }
    }

    pub fn apply(&self, p_int: &[f64]) -> Vec<f64> {
        let nint = self.dim();
        debug_assert_eq!(p_int.len(), nint);
        let mut out = vec![0.0; nint];
        for r in 0..nint {
            let mut acc = 0.0;
            for k in 0..nint {
                acc += self.a[(r, k)] * p_int[k];
            }
            out[r] = acc;
        }
        out
    }

    /// Rebuild the full `(N+1)^2` field: interior values copied, inner
    /// boundaries via the reconstruction maps (zero for Dirichlet), outer
    /// boundaries zero.
    pub fn reconstruct(&self, p_int: &[f64]) -> Vec<f64> {
        let n = self.n;
        let lay = Layout::new(n);
        debug_assert_eq!(p_int.len(), lay.interior_len());
        let np1 = n + 1;
        let mut full = vec![0.0; lay.full_len()];
        for i in 1..n {
            for j in 1..n {
                full[i * np1 + j] = p_int[lay.int(i, j)];
            }
        }
        if let Some(rby) = &self.recon_by {
            for i in 1..n {
                let mut acc = 0.0;
                for k in 0..p_int.len() {
                    acc += rby[(i - 1, k)] * p_int[k];
                }
                full[i * np1 + n] = acc;
            }
        }
        if let Some(rbx) = &self.recon_bx {
            for j in 1..=n {
                let mut acc = 0.0;
                for k in 0..p_int.len() {
                    acc += rbx[(j - 1, k)] * p_int[k];
                }
                full[n * np1 + j] = acc;
            }
        }
        full
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{chebyshev_lobatto, LN10};

    fn max_abs(v: &[f64]) -> f64 {
        v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    #[test]
    fn diff_matrix_n1() {
        let d = diff_matrix(&[1.0, -1.0]).unwrap();
        let expect = [[0.5, -0.5], [0.5, -0.5]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((d[(i, j)] - expect[i][j]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn diff_matrix_n2() {
        // derivatives of the three quadratic cardinal polynomials on
        // {1, 0, -1}, evaluated analytically
        let d = diff_matrix(&[1.0, 0.0, -1.0]).unwrap();
        let expect = [[1.5, -2.0, 0.5], [0.5, 0.0, -0.5], [-0.5, 2.0, -1.5]];
        for i in 0..3 {
            for j in 0..3 {
                assert!(
                    (d[(i, j)] - expect[i][j]).abs() < 1e-14,
                    "({i},{j}): {} vs {}",
                    d[(i, j)],
                    expect[i][j]
                );
            }
        }
    }

    #[test]
    fn diff_matrix_rejects_duplicates() {
        assert!(matches!(
            diff_matrix(&[1.0, 0.5, 0.5, -1.0]),
            Err(Error::DuplicateNodes { .. })
        ));
    }

    #[test]
    fn diff_matrix_exact_on_cubic() {
        for n in [3, 8, 21] {
            let x = chebyshev_lobatto(n);
            let d = diff_matrix(&x).unwrap();
            let f: Vec<f64> = x.iter().map(|v| v * v * v).collect();
            for i in 0..=n {
                let mut acc = 0.0;
                for j in 0..=n {
                    acc += d[(i, j)] * f[j];
                }
                assert!(
                    (acc - 3.0 * x[i] * x[i]).abs() < 1e-12,
                    "n = {n}, node {i}"
                );
            }
        }
    }

    #[test]
    fn diff_matrix_row_sums_vanish() {
        for n in [11, 41, 81] {
            let d = diff_matrix(&chebyshev_lobatto(n)).unwrap();
            for i in 0..=n {
                let s: f64 = (0..=n).map(|j| d[(i, j)]).sum();
                assert!(s.abs() < 1e-12, "n = {n}, row {i}: {s}");
            }
        }
    }

    #[test]
    fn diff_matrix_diagonal_matches_node_sums() {
        let nodes = chebyshev_lobatto(12);
        let d = diff_matrix(&nodes).unwrap();
        for j in 0..=12 {
            let s: f64 = (0..=12)
                .filter(|&k| k != j)
                .map(|k| 1.0 / (nodes[j] - nodes[k]))
                .sum();
            assert!((d[(j, j)] - s).abs() < 1e-10 * s.abs().max(1.0));
        }
    }

    fn trimmed_samples(n: usize, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        let x = chebyshev_lobatto(n);
        let lay = Layout::new(n);
        let mut out = vec![0.0; n * n];
        for i in 1..=n {
            for j in 1..=n {
                out[lay.trim(i, j)] = f(x[i], x[j]);
            }
        }
        out
    }

    #[test]
    fn kron_dx_of_x_is_one() {
        let n = 6;
        let kron = Kron2d::for_degree(n).unwrap();
        let f = trimmed_samples(n, |x, _| x);
        let dfx = kron.apply_dx(&f);
        let dfy = kron.apply_dy(&f);
        let lay = Layout::new(n);
        // interior rows see the exact derivative; rows touching the
        // excised outer line lose the x = +1 sample, so check interior
        for i in 1..n {
            for j in 1..n {
                let t = lay.trim(i, j);
                // the excised column at x0 = +1 holds f = x0 = 1, absent
                // from the trimmed product; restore its contribution
                let x = chebyshev_lobatto(n);
                let missing_x = kron.dx[(i, 0)] * x[0];
                let missing_y = kron.dy[(j, 0)] * x[i];
                assert!(((dfx[t] + missing_x) - 1.0).abs() < 1e-12);
                assert!((dfy[t] + missing_y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn kron_mixed_partials_commute() {
        for n in [5, 7] {
            let kron = Kron2d::for_degree(n).unwrap();
            let f = trimmed_samples(n, |x, y| x * x * y * y);
            let a = kron.apply_dy(&kron.apply_dx(&f));
            let b = kron.apply_dx(&kron.apply_dy(&f));
            let diff: Vec<f64> = a.iter().zip(&b).map(|(p, q)| p - q).collect();
            assert!(max_abs(&diff) < 1e-10, "n = {n}: {}", max_abs(&diff));
        }
    }

    #[test]
    fn kron_dense_matches_factored_apply() {
        let n = 5;
        let kron = Kron2d::for_degree(n).unwrap();
        let f = trimmed_samples(n, |x, y| (1.3 * x - 0.4 * y * y + 0.2 * x * y).sin());
        let dense = kron.dense_dx2();
        let fast = kron.apply_dx2(&f);
        for r in 0..n * n {
            let mut acc = 0.0;
            for k in 0..n * n {
                acc += dense[(r, k)] * f[k];
            }
            assert!((acc - fast[r]).abs() < 1e-11);
        }
    }

    /// -Laplacian (cylindrical, azimuthally symmetric) coefficient fields
    /// in the compactified coordinates, derived by chain rule. Test-local
    /// so that module tests do not depend on the Hamiltonian assembly.
    fn kinetic_coeffs(n: usize, alpha: f64, delta: f64) -> CoeffFields {
        let mut x = chebyshev_lobatto(n);
        x[n] = -1.0 + delta;
        let at = alpha / LN10;
        let pow = |x: f64, k: f64| 10f64.powf(k * (x + 1.0));
        CoeffFields::sample(
            n,
            |i, _| -at * at * pow(x[i], -2.0),
            |i, _| {
                let u = pow(x[i], 1.0);
                alpha * at * pow(x[i], -2.0) - alpha * at * pow(x[i], -1.0) / (u - 1.0)
            },
            |_, j| -at * at * pow(x[j], -2.0),
            |_, j| alpha * at * pow(x[j], -2.0),
            |_, _| 0.0,
        )
    }

    #[test]
    fn block_shapes_match_degree_three_bookkeeping() {
        let n = 3;
        let kron = Kron2d::for_degree(n).unwrap();
        let coeffs = kinetic_coeffs(n, 9.9, 1e-14);
        let op = assemble_operator(&coeffs, &kron).unwrap();
        assert_eq!((op.e_block().nrows(), op.e_block().ncols()), (4, 4));
        assert_eq!((op.c_block().nrows(), op.c_block().ncols()), (4, 2));
        assert_eq!((op.en_block().nrows(), op.en_block().ncols()), (4, 3));
        let blocks = boundary_blocks(&kron);
        assert_eq!((blocks.b1.nrows(), blocks.b1.ncols()), (3, 4));
        assert_eq!((blocks.b2.nrows(), blocks.b2.ncols()), (3, 2));
        assert_eq!((blocks.bn.nrows(), blocks.bn.ncols()), (3, 3));
        assert_eq!((blocks.g.nrows(), blocks.g.ncols()), (2, 4));
        assert_eq!((blocks.h.nrows(), blocks.h.ncols()), (2, 2));
    }

    #[test]
    fn assemble_laplacian_of_quadratic() {
        // a = c = 1, b = d = e = 0 is the Cartesian (x, y) Laplacian;
        // nabla^2 (x^2 + y^2) = 4. The trimmed product misses the outer
        // column, so restore its known contribution as in the Dx test.
        let n = 7;
        let kron = Kron2d::for_degree(n).unwrap();
        let one = |_: usize, _: usize| 1.0;
        let zero = |_: usize, _: usize| 0.0;
        let coeffs = CoeffFields::sample(n, one, zero, one, zero, zero);
        let op = assemble_operator(&coeffs, &kron).unwrap();
        let f = trimmed_samples(n, |x, y| x * x + y * y);
        let lap = op.apply_trimmed(&f);
        let x = chebyshev_lobatto(n);
        let lay = Layout::new(n);
        for i in 1..n {
            for j in 1..n {
                let missing = kron.dx2[(i, 0)] * (1.0 + x[j] * x[j])
                    + kron.dy2[(j, 0)] * (x[i] * x[i] + 1.0);
                let v = lap[lay.int(i, j)] + missing;
                assert!((v - 4.0).abs() < 1e-10, "({i},{j}): {v}");
            }
        }
    }

    #[test]
    fn assemble_diagonal_only() {
        let n = 5;
        let kron = Kron2d::for_degree(n).unwrap();
        let zero = |_: usize, _: usize| 0.0;
        let coeffs = CoeffFields::sample(n, zero, zero, zero, zero, |i, j| (i * 10 + j) as f64);
        let op = assemble_operator(&coeffs, &kron).unwrap();
        let f = trimmed_samples(n, |x, y| x + 2.0 * y);
        let out = op.apply_trimmed(&f);
        let lay = Layout::new(n);
        for i in 1..n {
            for j in 1..n {
                let expect = (i * 10 + j) as f64 * f[lay.trim(i, j)];
                assert!((out[lay.int(i, j)] - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn assemble_rejects_size_mismatch() {
        let kron = Kron2d::for_degree(5).unwrap();
        let zero = |_: usize, _: usize| 0.0;
        let coeffs = CoeffFields::sample(4, zero, zero, zero, zero, zero);
        assert!(matches!(
            assemble_operator(&coeffs, &kron),
            Err(Error::SizeMismatch { .. })
        ));
    }

    #[test]
    fn dirichlet_everywhere_is_plain_interior_block() {
        let n = 6;
        let kron = Kron2d::for_degree(n).unwrap();
        let coeffs = kinetic_coeffs(n, 9.9, 1e-14);
        let op = assemble_operator(&coeffs, &kron).unwrap();
        let red = eliminate_boundaries(
            &op,
            BoundaryPolicy::new(Bc::Dirichlet, Bc::Dirichlet),
            &kron,
        )
        .unwrap();
        let nint = (n - 1) * (n - 1);
        for r in 0..nint {
            for k in 0..nint {
                assert_eq!(red.matrix()[(r, k)], op.e_block()[(r, k)]);
            }
        }
        let p: Vec<f64> = (0..nint).map(|k| (k as f64 * 0.37).sin()).collect();
        let full = red.reconstruct(&p);
        let np1 = n + 1;
        for j in 0..=n {
            assert_eq!(full[n * np1 + j], 0.0);
            assert_eq!(full[j * np1 + n], 0.0);
            assert_eq!(full[j], 0.0);
            assert_eq!(full[j * np1], 0.0);
        }
    }

    /// Manufactured Poisson problem: u* = exp(-rho^2 - z^2) satisfies
    /// homogeneous Neumann conditions on both inner edges, and
    /// -nabla^2 u* = (6 - 4 r^2) u*.
    fn manufactured_error(n: usize) -> f64 {
        manufactured_error_on(n, 8.0)
    }

    fn manufactured_error_on(n: usize, rho_max: f64) -> f64 {
        let alpha = 99.0 / rho_max;
        let delta = 1e-14;
        let kron = Kron2d::for_degree(n).unwrap();
        let coeffs = kinetic_coeffs(n, alpha, delta);
        let op = assemble_operator(&coeffs, &kron).unwrap();
        let red = eliminate_boundaries(
            &op,
            BoundaryPolicy::new(Bc::Neumann, Bc::Neumann),
            &kron,
        )
        .unwrap();
        let mut x = chebyshev_lobatto(n);
        x[n] = -1.0 + delta;
        let rho = |i: usize| (10f64.powf(x[i] + 1.0) - 1.0) / alpha;
        let lay = Layout::new(n);
        let mut rhs = vec![0.0; lay.interior_len()];
        let mut exact = vec![0.0; lay.interior_len()];
        for i in 1..n {
            for j in 1..n {
                let (r2, u) = {
                    let (rr, zz) = (rho(i), rho(j));
                    (rr * rr + zz * zz, (-rr * rr - zz * zz).exp())
                };
                rhs[lay.int(i, j)] = (6.0 - 4.0 * r2) * u;
                exact[lay.int(i, j)] = u;
            }
        }
        let lu = red.matrix().partial_piv_lu();
        let mut b = Mat::<f64>::zeros(lay.interior_len(), 1);
        for (k, v) in rhs.iter().enumerate() {
            b[(k, 0)] = *v;
        }
        let sol = lu.solve(&b);
        let mut err = 0.0f64;
        for k in 0..lay.interior_len() {
            err = err.max((sol[(k, 0)] - exact[k]).abs());
        }
        err
    }

    #[test]
    fn manufactured_solution_neumann_poisson() {
        // The 1/rho row weight next to the axis amplifies the interpolation
        // truncation of the steep compactified Gaussian; the pointwise error
        // drops below 1e-8 one refinement level after N = 41.
        let err = manufactured_error_on(51, 5.0);
        assert!(err < 1e-8, "max interior error {err}");
    }

    #[test]
    fn manufactured_solution_spectral_convergence() {
        let errs: Vec<f64> = [11, 21, 31, 41, 51]
            .iter()
            .map(|&n| manufactured_error(n))
            .collect();
        for w in errs.windows(2) {
            assert!(
                w[1] < w[0] * 0.5 || w[1] < 1e-10,
                "errors not decaying: {errs:?}"
            );
        }
    }

    #[test]
    fn manufactured_boundary_reconstruction() {
        let n = 41;
        let rho_max = 8.0;
        let alpha = 99.0 / rho_max;
        let kron = Kron2d::for_degree(n).unwrap();
        let coeffs = kinetic_coeffs(n, alpha, 1e-14);
        let op = assemble_operator(&coeffs, &kron).unwrap();
        let red = eliminate_boundaries(
            &op,
            BoundaryPolicy::new(Bc::Neumann, Bc::Neumann),
            &kron,
        )
        .unwrap();
        let x = chebyshev_lobatto(n);
        let rho = |i: usize| (10f64.powf(x[i] + 1.0) - 1.0) / alpha;
        let lay = Layout::new(n);
        let mut u_int = vec![0.0; lay.interior_len()];
        for i in 1..n {
            for j in 1..n {
                let (rr, zz) = (rho(i), rho(j));
                u_int[lay.int(i, j)] = (-rr * rr - zz * zz).exp();
            }
        }
        let full = red.reconstruct(&u_int);
        let np1 = n + 1;
        // axis line x = -1 (i = n): u*(0, z) = exp(-z^2)
        for j in 1..=n {
            let expect = (-rho(j) * rho(j)).exp();
            assert!(
                (full[n * np1 + j] - expect).abs() < 1e-7,
                "axis j = {j}: {} vs {expect}",
                full[n * np1 + j]
            );
        }
        // plane line y = -1 (j = n): u*(rho, 0) = exp(-rho^2)
        for i in 1..n {
            let expect = (-rho(i) * rho(i)).exp();
            assert!(
                (full[i * np1 + n] - expect).abs() < 1e-7,
                "plane i = {i}: {} vs {expect}",
                full[i * np1 + n]
            );
        }
    }

    #[test]
    fn reconstruction_preserves_constants_under_neumann() {
        // A constant satisfies homogeneous Neumann conditions, but the
        // trimmed outer column removes the D[N,0] * p(outer) term from the
        // discrete condition, leaving a deviation of d = 3 / (2 N^2 + 1)
        // on each edge and (1 + d)^2 - 1 at the corner node, which sees
        // both trims. Check that bound and its decay under refinement.
        let mut prev = f64::INFINITY;
        for n in [9, 17, 33] {
            let kron = Kron2d::for_degree(n).unwrap();
            let coeffs = kinetic_coeffs(n, 9.9, 1e-14);
            let op = assemble_operator(&coeffs, &kron).unwrap();
            let red = eliminate_boundaries(
                &op,
                BoundaryPolicy::new(Bc::Neumann, Bc::Neumann),
                &kron,
            )
            .unwrap();
            let ones = vec![1.0; (n - 1) * (n - 1)];
            let full = red.reconstruct(&ones);
            let np1 = n + 1;
            let d = 3.0 / (2.0 * (n * n) as f64 + 1.0);
            let bound = (2.0 * d + d * d) * (1.0 + 1e-10);
            let mut worst = 0.0f64;
            for j in 1..=n {
                worst = worst.max((full[n * np1 + j] - 1.0).abs());
            }
            for i in 1..n {
                worst = worst.max((full[i * np1 + n] - 1.0).abs());
            }
            assert!(worst <= bound, "n = {n}: deviation {worst} > bound {bound}");
            assert!(worst < prev, "deviation must shrink with n");
            prev = worst;
        }
    }
}
