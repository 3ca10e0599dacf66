//! Naive reference computations. Nothing here reuses the closed forms or the
//! products in the main crate: the matrices are copied out and multiplied by
//! plain loops.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use quasinormal::linalg::CMat;
use quasinormal::operators::TruncOperator;
use quasinormal::Result;

const BLOCK: usize = 8;

/// Entries below this are dropped: triple products of them would land in the
/// subnormal range, which is very slow and far below every tolerance.
const FLUSH: f64 = 1e-100;

/// Rows of the truncated matrix.
fn dense(t: &TruncOperator) -> Vec<Vec<C64>> {
    let m = t.matrix();
    let flush = |z: C64| if z.norm() < FLUSH { C64::new(0.0, 0.0) } else { z };
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| flush(m[(i, j)])).collect()).collect()
}

/// A complex row kept as separate real and imaginary parts so the inner loops vectorize.
#[derive(Clone)]
struct Row {
    re: Vec<f64>,
    im: Vec<f64>,
}

impl Row {
    fn zeros(n: usize) -> Self {
        Row { re: vec![0.0; n], im: vec![0.0; n] }
    }

    fn of(x: impl Iterator<Item = C64>) -> Self {
        let (re, im) = x.map(|z| (z.re, z.im)).unzip();
        Row { re, im }
    }

    /// `self += s * x`, or `s * conj(x)` when `conj` is set
    fn axpy(&mut self, s: C64, x: &Row, conj: bool) {
        if s.re == 0.0 && s.im == 0.0 {
            return;
        }
        let sg = if conj { -1.0 } else { 1.0 };
        let (sr, si) = (s.re, s.im);
        for ((yr, yi), (xr, xi)) in self.re.iter_mut().zip(self.im.iter_mut()).zip(x.re.iter().zip(&x.im)) {
            let xi = sg * xi;
            *yr += sr * xr - si * xi;
            *yi += sr * xi + si * xr;
        }
    }
}

/// `max_n |(T*T - TT*) T e_n|` over the trusted columns, by plain triple loops.
pub fn brute_residual(t: &TruncOperator) -> Result<f64> {
    let cols = t.trusted_columns()?;
    let a = dense(t);
    let n = a.len();
    let rows: Vec<Row> = a.iter().map(|r| Row::of(r.iter().copied())).collect();
    let columns: Vec<Row> = (0..n).map(|j| Row::of(a.iter().map(|r| r[j]))).collect();
    // row i of T*T - TT*: sum_l conj(a_li) (row l) - sum_l a_il conj(column l),
    // with output rows taken in blocks so each source row is reused from cache
    let mut comm = vec![Row::zeros(n); n];
    for (b, block) in comm.chunks_mut(BLOCK).enumerate() {
        for l in 0..n {
            for (o, out) in block.iter_mut().enumerate() {
                out.axpy(a[l][b * BLOCK + o].conj(), &rows[l], false);
            }
            for (o, out) in block.iter_mut().enumerate() {
                out.axpy(-a[b * BLOCK + o][l], &columns[l], true);
            }
        }
    }
    // Y = comm * T restricted to the first `cols` columns
    let lead: Vec<Row> = a.iter().map(|r| Row::of(r[..cols].iter().copied())).collect();
    let mut sq = vec![0.0; cols];
    for block in comm.chunks(BLOCK) {
        let mut ys = vec![Row::zeros(cols); block.len()];
        for (l, src) in lead.iter().enumerate() {
            for (y, row) in ys.iter_mut().zip(block) {
                y.axpy(C64::new(row.re[l], row.im[l]), src, false);
            }
        }
        for y in &ys {
            for (s, (r, i)) in sq.iter_mut().zip(y.re.iter().zip(&y.im)) {
                *s += r * r + i * i;
            }
        }
    }
    Ok(sq.iter().fold(0.0, |m: f64, s| m.max(s.sqrt())))
}

/// SVD numerical rank with absolute cutoff `tol` and an orthonormal basis of
/// the null space (as columns).
pub fn brute_kernel(m: &CMat, tol: f64) -> (usize, CMat) {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return (0, CMat::identity(cols, cols));
    }
    // pad to square so that V is complete
    let size = rows.max(cols);
    let mut sq: DMatrix<C64> = DMatrix::zeros(size, cols);
    sq.view_mut((0, 0), (rows, cols)).copy_from(m);
    let svd = sq.svd(false, true);
    let vt = svd.v_t.expect("requested V");
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
    let null: Vec<usize> = (0..svd.singular_values.len()).filter(|&i| svd.singular_values[i] <= tol).collect();
    let mut basis = CMat::zeros(cols, null.len());
    for (j, &i) in null.iter().enumerate() {
        for r in 0..cols {
            basis[(r, j)] = vt[(i, r)].conj();
        }
    }
    (rank, basis)
}

#[cfg(test)]
mod tests {
    use super::*;
    use quasinormal::hardy::HCoeffVec;
    use quasinormal::operators::quasinormal_residual;
    use quasinormal::Tolerances;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn op(u: &[f64], v: &[f64]) -> TruncOperator {
        let p = |x: &[f64]| HCoeffVec::polynomial(x.iter().map(|&r| c(r, 0.0)).collect());
        TruncOperator::perturbed_shift(1, &p(u), &p(v), 48, &Tolerances::default()).unwrap()
    }

    #[test]
    fn named_residuals() {
        assert!(brute_residual(&op(&[0.0, -1.0], &[1.0])).unwrap() < 1e-15);
        let t = op(&[0.0, 1.0], &[1.0]);
        let b = brute_residual(&t).unwrap();
        assert!(b > 0.1);
        assert!((b - quasinormal_residual(&t).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn kernel_examples() {
        let d = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]));
        let (r, k) = brute_kernel(&d, 1e-10);
        assert_eq!((r, k.ncols()), (1, 2));
        assert!(k.row(0).iter().all(|z| z.norm() < 1e-15));
        let (r, k) = brute_kernel(&CMat::zeros(4, 4), 1e-10);
        assert_eq!((r, k.ncols()), (0, 4));
    }
}
