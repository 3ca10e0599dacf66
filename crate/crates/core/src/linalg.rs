//! Dense complex helpers on top of nalgebra.

use matrixmultiply::CGemmOption;
use nalgebra::{DMatrix, DVector, Dyn, Matrix, RawStorage, SymmetricEigen};
use num_complex::Complex64 as C64;

pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };

fn to_faer(m: &CMat) -> faer::Mat<C64> {
    faer::Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn from_faer(m: faer::MatRef<'_, C64>) -> CMat {
    CMat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// `a * b` through a blocked complex gemm; nalgebra's generic product is far
/// slower for complex entries.
pub fn mul<S1, S2>(a: &Matrix<C64, Dyn, Dyn, S1>, b: &Matrix<C64, Dyn, Dyn, S2>) -> CMat
where
    S1: RawStorage<C64, Dyn, Dyn>,
    S2: RawStorage<C64, Dyn, Dyn>,
{
    let (m, k) = a.shape();
    let (k2, n) = b.shape();
    assert_eq!(k, k2, "dimension mismatch in mul");
    let mut out = CMat::zeros(m, n);
    if m == 0 || n == 0 || k == 0 {
        return out;
    }
    let (ra, ca) = a.strides();
    let (rb, cb) = b.strides();
    // SAFETY: Complex<f64> is repr(C) with layout [re, im]; the strides come
    // from the views themselves and `out` is a fresh contiguous column-major buffer.
    unsafe {
        matrixmultiply::zgemm(
            CGemmOption::Standard,
            CGemmOption::Standard,
            m,
            k,
            n,
            [1.0, 0.0],
            a.as_ptr() as *const [f64; 2],
            ra as isize,
            ca as isize,
            b.as_ptr() as *const [f64; 2],
            rb as isize,
            cb as isize,
            [0.0, 0.0],
            out.as_mut_ptr() as *mut [f64; 2],
            1,
            m as isize,
        );
    }
    out
}

/// `a^H * b`
pub fn mul_ah<S1, S2>(a: &Matrix<C64, Dyn, Dyn, S1>, b: &Matrix<C64, Dyn, Dyn, S2>) -> CMat
where
    S1: RawStorage<C64, Dyn, Dyn>,
    S2: RawStorage<C64, Dyn, Dyn>,
{
    mul(&a.adjoint(), b)
}

/// `a * b^H`
pub fn mul_bh<S1, S2>(a: &Matrix<C64, Dyn, Dyn, S1>, b: &Matrix<C64, Dyn, Dyn, S2>) -> CMat
where
    S1: RawStorage<C64, Dyn, Dyn>,
    S2: RawStorage<C64, Dyn, Dyn>,
{
    mul(a, &b.adjoint())
}

pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()).scale(0.5)
}

/// Eigenpairs of a Hermitian matrix, eigenvalues ascending, eigenvectors as columns.
pub fn hermitian_eigen(m: &CMat) -> (Vec<f64>, CMat) {
    let n = m.nrows();
    if n == 0 {
        return (vec![], CMat::zeros(0, 0));
    }
    let h = hermitian_part(m);
    let fast = to_faer(&h).self_adjoint_eigen(faer::Side::Lower).ok().map(|e| {
        let vals: Vec<f64> = e.S().column_vector().iter().map(|z| z.re).collect();
        (vals, from_faer(e.U()))
    });
    let finite = |(vals, vecs): &(Vec<f64>, CMat)| {
        vals.iter().all(|x| x.is_finite()) && vecs.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    };
    let (vals, vecs) = match fast {
        Some(pair) if finite(&pair) => pair,
        _ => embedded_eigen(&h),
    };
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
    let mut out = CMat::zeros(n, n);
    for (j, &i) in idx.iter().enumerate() {
        out.set_column(j, &vecs.column(i));
    }
    (idx.iter().map(|&i| vals[i]).collect(), out)
}

/// Fallback for inputs where the complex tridiagonalisation breaks down (it can
/// return NaN on matrices with many exact zeros): `A + iB` becomes the real
/// symmetric `[[A, -B], [B, A]]`, whose spectrum is that of `A + iB` doubled.
/// Complex eigenvectors are picked from the real ones by Gram-Schmidt.
fn embedded_eigen(h: &CMat) -> (Vec<f64>, CMat) {
    let n = h.nrows();
    let mut r = DMatrix::<f64>::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let z = h[(i, j)];
            r[(i, j)] = z.re;
            r[(i + n, j + n)] = z.re;
            r[(i, j + n)] = -z.im;
            r[(i + n, j)] = z.im;
        }
    }
    let eig = SymmetricEigen::new(r);
    let mut order: Vec<usize> = (0..2 * n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let mut vecs = CMat::zeros(n, n);
    let mut vals = Vec::with_capacity(n);
    for (&i, cut) in order.iter().map(|i| (i, 0.1)).chain(order.iter().map(|i| (i, 1e-8))) {
        if vals.len() == n {
            break;
        }
        let col = eig.eigenvectors.column(i);
        let mut z = CVec::from_fn(n, |r, _| c(col[r], col[r + n]));
        let k = vals.len();
        for _ in 0..2 {
            for j in 0..k {
                let q = vecs.column(j);
                let p = q.dotc(&z);
                z -= q * p;
            }
        }
        let nz = z.norm();
        if nz > cut {
            z.unscale_mut(nz);
            vals.push(z.dotc(&(h * &z)).re);
            vecs.set_column(k, &z);
        }
    }
    (vals, vecs)
}

/// Eigenvalues only, ascending.
pub fn hermitian_eigenvalues(m: &CMat) -> Vec<f64> {
    if m.nrows() == 0 {
        return vec![];
    }
    match to_faer(&hermitian_part(m)).self_adjoint_eigenvalues(faer::Side::Lower) {
        Ok(mut vals) if vals.iter().all(|x| x.is_finite()) => {
            vals.sort_by(f64::total_cmp);
            vals
        }
        _ => hermitian_eigen(m).0,
    }
}

pub fn min_hermitian_eig(m: &CMat) -> f64 {
    hermitian_eigenvalues(m).first().copied().unwrap_or(0.0)
}

pub fn max_hermitian_eig(m: &CMat) -> f64 {
    hermitian_eigenvalues(m).last().copied().unwrap_or(0.0)
}

/// Largest singular value.
pub fn op_norm(m: &CMat) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    let g = if m.nrows() >= m.ncols() { mul_ah(m, m) } else { mul_bh(m, m) };
    max_hermitian_eig(&g).max(0.0).sqrt()
}

/// Singular values (descending) and right singular vectors of a matrix, full set.
pub fn svd_full(m: &CMat) -> (Vec<f64>, CMat) {
    let (r, n) = m.shape();
    let sq = if r < n {
        let mut p = CMat::zeros(n, n);
        p.view_mut((0, 0), (r, n)).copy_from(m);
        p
    } else {
        m.clone()
    };
    if n == 0 {
        return (vec![], CMat::zeros(0, 0));
    }
    let svd = to_faer(&sq).thin_svd();
    let (sv, v) = match svd {
        Ok(f) => (f.S().column_vector().iter().map(|z| z.re).collect::<Vec<f64>>(), from_faer(f.V())),
        Err(_) => {
            let svd = sq.svd(false, true);
            let vt = svd.v_t.expect("requested v_t");
            (svd.singular_values.iter().copied().collect(), vt.adjoint())
        }
    };
    let mut idx: Vec<usize> = (0..sv.len()).collect();
    idx.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]));
    let mut out = CMat::zeros(n, idx.len());
    for (j, &i) in idx.iter().enumerate() {
        out.set_column(j, &v.column(i));
    }
    (idx.iter().map(|&i| sv[i]).collect(), out)
}

/// Orthonormal basis (columns) of the null space: singular values `<= tol`.
pub fn null_space(m: &CMat, tol: f64) -> CMat {
    let n = m.ncols();
    if n == 0 {
        return CMat::zeros(0, 0);
    }
    if m.nrows() == 0 {
        return CMat::identity(n, n);
    }
    let (sv, v) = svd_full(m);
    let keep: Vec<usize> = (0..n).filter(|&j| sv.get(j).copied().unwrap_or(0.0) <= tol).collect();
    let mut out = CMat::zeros(n, keep.len());
    for (j, &i) in keep.iter().enumerate() {
        out.set_column(j, &v.column(i));
    }
    out
}

pub fn numerical_rank(m: &CMat, tol: f64) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    svd_full(m).0.iter().filter(|&&s| s > tol).count()
}

/// Modified Gram-Schmidt with one reorthogonalization pass.
/// Columns whose remainder falls below `tol` are dropped.
pub fn orthonormal_columns(m: &CMat, tol: f64) -> CMat {
    let mut basis: Vec<CVec> = Vec::new();
    for j in 0..m.ncols() {
        let mut x: CVec = m.column(j).into_owned();
        for _ in 0..2 {
            for q in &basis {
                let p = q.dotc(&x);
                x.axpy(-p, q, ONE);
            }
        }
        let nrm = x.norm();
        if nrm > tol {
            basis.push(x.unscale(nrm));
        }
    }
    let mut out = CMat::zeros(m.nrows(), basis.len());
    for (j, q) in basis.iter().enumerate() {
        out.set_column(j, q);
    }
    out
}

/// Orthonormal basis of the range of a Hermitian matrix (eigenvalues with `|lambda| > tol`).
pub fn hermitian_range(m: &CMat, tol: f64) -> (Vec<f64>, CMat) {
    let (vals, vecs) = hermitian_eigen(m);
    let keep: Vec<usize> = (0..vals.len()).filter(|&i| vals[i].abs() > tol).collect();
    let mut out = CMat::zeros(m.nrows(), keep.len());
    for (j, &i) in keep.iter().enumerate() {
        out.set_column(j, &vecs.column(i));
    }
    (keep.iter().map(|&i| vals[i]).collect(), out)
}

/// Square root of a positive semidefinite Hermitian matrix (negative noise clamped).
pub fn psd_sqrt(m: &CMat) -> CMat {
    spectral_fn(m, |l| l.max(0.0).sqrt())
}

/// `Q f(L) Q^H` from the Hermitian eigen-decomposition.
pub fn spectral_fn(m: &CMat, f: impl Fn(f64) -> f64) -> CMat {
    let (vals, vecs) = hermitian_eigen(m);
    let mut scaled = vecs.clone();
    for (j, &l) in vals.iter().enumerate() {
        scaled.column_mut(j).scale_mut(f(l));
    }
    mul_bh(&scaled, &vecs)
}

/// `||A* A - A A*||` (operator norm).
pub fn normality_residual(a: &CMat) -> f64 {
    op_norm(&(mul_ah(a, a) - mul_bh(a, a)))
}

/// Eigen-decomposition of a normal matrix by jointly diagonalizing its
/// Hermitian and skew-Hermitian parts. Returns eigenvalues and unitary eigenvectors.
pub fn normal_eigen(a: &CMat) -> (Vec<C64>, CMat) {
    let h = hermitian_part(a);
    let k = (a - a.adjoint()).scale(0.5) * c(0.0, -1.0);
    // generic real combination separates eigenvalues that differ in either part
    let mix = &h + k.scale(0.618_033_988_749_894_9);
    let (_, q) = hermitian_eigen(&mix);
    let d = mul(&mul_ah(&q, a), &q);
    (d.diagonal().iter().copied().collect(), q)
}

/// Both eigenvalues of a 2x2 matrix.
pub fn eig2(m: &CMat) -> [C64; 2] {
    let (a, b, cc, d) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
    let tr = a + d;
    let disc = ((a - d) * (a - d) + b * cc * 4.0).sqrt();
    [(tr + disc) * 0.5, (tr - disc) * 0.5]
}

/// Hermitian `G^{s}` for a positive definite `G`.
pub fn pd_power(g: &CMat, s: f64) -> CMat {
    spectral_fn(g, |l| l.powf(s))
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}
