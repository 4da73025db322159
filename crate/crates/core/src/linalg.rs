//! Small linear-algebra kit: banded operators, column-pivoted QR ordering,
//! thin left singular vectors and least squares.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Square banded matrix stored row by row.
///
/// Entry `(i, j)` with `-lower <= j - i <= upper` lives at
/// `data[i * width + (j + lower - i)]`, `width = lower + upper + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandMatrix {
    n: usize,
    lower: usize,
    upper: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, lower: usize, upper: usize) -> Self {
        BandMatrix {
            n,
            lower,
            upper,
            data: vec![0.0; n * (lower + upper + 1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        (self.lower, self.upper)
    }

    fn width(&self) -> usize {
        self.lower + self.upper + 1
    }

    fn in_band(&self, i: usize, j: usize) -> bool {
        j + self.lower >= i && j <= i + self.upper
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i >= self.n || j >= self.n || !self.in_band(i, j) {
            return 0.0;
        }
        self.data[i * self.width() + (j + self.lower - i)]
    }

    /// Panics when `(i, j)` lies outside the band.
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        assert!(self.in_band(i, j), "entry ({i}, {j}) outside band");
        let w = self.width();
        self.data[i * w + (j + self.lower - i)] = value;
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        let w = self.width();
        for (i, yi) in y.iter_mut().enumerate() {
            let j0 = i.saturating_sub(self.lower);
            let j1 = (i + self.upper).min(self.n - 1);
            let mut acc = 0.0;
            for j in j0..=j1 {
                acc += self.data[i * w + (j + self.lower - i)] * x[j];
            }
            *yi = acc;
        }
        y
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    /// Returns `a * I + b * self`.
    pub fn shifted(&self, a: f64, b: f64) -> BandMatrix {
        let mut out = self.clone();
        for v in out.data.iter_mut() {
            *v *= b;
        }
        let w = out.width();
        for i in 0..out.n {
            out.data[i * w + out.lower] += a;
        }
        out
    }

    /// Band-preserving Gaussian elimination without pivoting.
    ///
    /// Tridiagonal systems reduce to the Thomas algorithm and lower-bidiagonal
    /// systems to forward substitution. The matrices assembled by the
    /// benchmark systems are diagonally dominant, so no pivoting is needed.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        if rhs.len() != self.n {
            return Err(Error::Shape(format!(
                "band solve: rhs length {} vs dimension {}",
                rhs.len(),
                self.n
            )));
        }
        let n = self.n;
        let (l, u) = (self.lower, self.upper);
        let w = self.width();
        let mut a = self.data.clone();
        let mut b = rhs.to_vec();
        for k in 0..n {
            let pivot = a[k * w + l];
            if pivot.abs() < 1e-300 || !pivot.is_finite() {
                return Err(Error::Conditioning(format!("zero pivot at row {k}")));
            }
            for i in (k + 1)..(k + l + 1).min(n) {
                let idx_ik = i * w + (k + l - i);
                let factor = a[idx_ik] / pivot;
                if factor == 0.0 {
                    continue;
                }
                a[idx_ik] = 0.0;
                for j in (k + 1)..=(k + u).min(n - 1) {
                    a[i * w + (j + l - i)] -= factor * a[k * w + (j + l - k)];
                }
                b[i] -= factor * b[k];
            }
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let mut acc = b[i];
            for j in (i + 1)..=(i + u).min(n - 1) {
                acc -= a[i * w + (j + l - i)] * x[j];
            }
            x[i] = acc / a[i * w + l];
        }
        Ok(x)
    }
}

/// Jacobian of a velocity field: banded for the full-order benchmarks,
/// dense for reduced systems.
#[derive(Debug, Clone)]
pub enum Jacobian {
    Band(BandMatrix),
    Dense(DMatrix<f64>),
}

impl Jacobian {
    pub fn dim(&self) -> usize {
        match self {
            Jacobian::Band(b) => b.dim(),
            Jacobian::Dense(d) => d.nrows(),
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Jacobian::Band(b) => b.matvec(x),
            Jacobian::Dense(d) => (d * DVector::from_column_slice(x)).as_slice().to_vec(),
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            Jacobian::Band(b) => b.to_dense(),
            Jacobian::Dense(d) => d.clone(),
        }
    }

    /// Product `self * m` for a dense right factor.
    pub fn mul_dense(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            Jacobian::Dense(d) => d * m,
            Jacobian::Band(b) => {
                let mut out = DMatrix::zeros(b.dim(), m.ncols());
                for c in 0..m.ncols() {
                    let col: Vec<f64> = m.column(c).iter().copied().collect();
                    let y = b.matvec(&col);
                    out.column_mut(c).copy_from_slice(&y);
                }
                out
            }
        }
    }

    /// Solves `(a I + b J) x = rhs`.
    pub fn solve_shifted(&self, a: f64, b: f64, rhs: &[f64]) -> Result<Vec<f64>> {
        match self {
            Jacobian::Band(band) => band.shifted(a, b).solve(rhs),
            Jacobian::Dense(d) => {
                let n = d.nrows();
                let m = DMatrix::identity(n, n) * a + d * b;
                let lu = m.lu();
                lu.solve(&DVector::from_column_slice(rhs))
                    .map(|x| x.as_slice().to_vec())
                    .ok_or_else(|| Error::Conditioning("singular Newton matrix".into()))
            }
        }
    }
}

pub fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Column order chosen by Householder QR with column pivoting
/// (Businger–Golub): at every step the remaining column of largest norm is
/// moved to the front. Ties resolve to the lowest column index. Once the
/// trailing block is numerically zero the remaining columns are appended
/// in order of their (zero) norms, i.e. by index.
pub fn pivoted_qr_order(a: &DMatrix<f64>) -> Vec<usize> {
    let (m, n) = a.shape();
    let mut r = a.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut norms: Vec<f64> = (0..n).map(|j| r.column(j).norm_squared()).collect();
    let steps = m.min(n);
    for k in 0..steps {
        let mut best = k;
        for j in (k + 1)..n {
            if norms[j] > norms[best] {
                best = j;
            }
        }
        if best != k {
            r.swap_columns(k, best);
            perm.swap(k, best);
            norms.swap(k, best);
        }
        // Householder reflector on rows k.. of column k.
        let mut x: Vec<f64> = (k..m).map(|i| r[(i, k)]).collect();
        let alpha = norm2(&x);
        if alpha == 0.0 {
            continue;
        }
        let sign = if x[0] >= 0.0 { 1.0 } else { -1.0 };
        x[0] += sign * alpha;
        let vnorm2 = x.iter().map(|v| v * v).sum::<f64>();
        for j in k..n {
            let mut s = 0.0;
            for (off, xi) in x.iter().enumerate() {
                s += xi * r[(k + off, j)];
            }
            let f = 2.0 * s / vnorm2;
            for (off, xi) in x.iter().enumerate() {
                r[(k + off, j)] -= f * xi;
            }
        }
        // Downdate remaining column norms by recomputation (matrices are small).
        for j in (k + 1)..n {
            norms[j] = ((k + 1)..m).map(|i| r[(i, j)] * r[(i, j)]).sum();
        }
    }
    perm
}

/// Thin left singular vectors and singular values (sorted nonincreasing)
/// of `s`. Wide matrices go through the eigendecomposition of the Gram
/// matrix `S Sᵀ`; otherwise a direct SVD is used.
pub fn left_singular_vectors(s: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>) {
    let (m, n) = s.shape();
    if n > 2 * m {
        let gram = s * s.transpose();
        let eig = gram.symmetric_eigen();
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
        let mut u = DMatrix::zeros(m, m);
        let mut sigma = Vec::with_capacity(m);
        for (c, &i) in order.iter().enumerate() {
            u.set_column(c, &eig.eigenvectors.column(i));
            sigma.push(eig.eigenvalues[i].max(0.0).sqrt());
        }
        canonical_signs(&mut u);
        (u, sigma)
    } else {
        let svd = s.clone().svd(true, false);
        let u_raw = svd.u.expect("requested U");
        let k = svd.singular_values.len();
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
        let mut u = DMatrix::zeros(m, k);
        let mut sigma = Vec::with_capacity(k);
        for (c, &i) in order.iter().enumerate() {
            u.set_column(c, &u_raw.column(i));
            sigma.push(svd.singular_values[i]);
        }
        canonical_signs(&mut u);
        (u, sigma)
    }
}

/// Flips column signs so the entry of largest magnitude is positive.
fn canonical_signs(u: &mut DMatrix<f64>) {
    for c in 0..u.ncols() {
        let mut best = 0;
        for i in 0..u.nrows() {
            if u[(i, c)].abs() > u[(best, c)].abs() {
                best = i;
            }
        }
        if u.nrows() > 0 && u[(best, c)] < 0.0 {
            u.column_mut(c).neg_mut();
        }
    }
}

/// Least-squares solution of `a x ≈ b` by Householder QR.
///
/// Fails with a conditioning error when the smallest singular value of `a`
/// is below `rel_tol` times the largest.
pub fn least_squares(a: &DMatrix<f64>, b: &[f64], rel_tol: f64) -> Result<Vec<f64>> {
    let (m, n) = a.shape();
    if b.len() != m {
        return Err(Error::Shape(format!(
            "least squares: rhs length {} vs {} rows",
            b.len(),
            m
        )));
    }
    if m < n {
        return Err(Error::Conditioning(format!(
            "underdetermined least squares ({m} rows, {n} columns)"
        )));
    }
    let sv = a.clone().singular_values();
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(smax > 0.0) || smin < rel_tol * smax {
        return Err(Error::Conditioning(format!(
            "rank-deficient least-squares matrix (σ_min={smin:e}, σ_max={smax:e})"
        )));
    }
    let qr = a.clone().qr();
    let qtb = qr.q().transpose() * DVector::from_column_slice(b);
    let r = qr.r();
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut acc = qtb[i];
        for j in (i + 1)..n {
            acc -= r[(i, j)] * x[j];
        }
        x[i] = acc / r[(i, i)];
    }
    Ok(x)
}

/// Largest singular value of a linear operator by power iteration on `AᵀA`.
///
/// Stops once successive estimates agree to relative tolerance `tol`.
pub fn spectral_norm<F, G>(n: usize, apply: F, apply_t: G, tol: f64, max_iter: usize) -> f64
where
    F: Fn(&[f64]) -> Vec<f64>,
    G: Fn(&[f64]) -> Vec<f64>,
{
    // Deterministic, non-degenerate start vector.
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * ((i * 7919) % 13) as f64).collect();
    let nv = norm2(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    let mut estimate = 0.0;
    for _ in 0..max_iter {
        let w = apply_t(&apply(&v));
        let lambda = norm2(&w);
        if lambda == 0.0 {
            return 0.0;
        }
        v = w.iter().map(|x| x / lambda).collect();
        let next = lambda.sqrt();
        if (next - estimate).abs() <= tol * next {
            return next;
        }
        estimate = next;
    }
    estimate
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn band_solve_matches_dense() {
        let mut b = BandMatrix::zeros(5, 1, 1);
        for i in 0..5 {
            b.set(i, i, 4.0 + i as f64);
            if i > 0 {
                b.set(i, i - 1, -1.0);
            }
            if i < 4 {
                b.set(i, i + 1, 0.5 * i as f64 - 1.0);
            }
        }
        let rhs = [1.0, -2.0, 3.0, 0.5, 2.0];
        let x = b.solve(&rhs).unwrap();
        let dense = b.to_dense().lu().solve(&DVector::from_column_slice(&rhs)).unwrap();
        for i in 0..5 {
            assert!((x[i] - dense[i]).abs() < 1e-13);
        }
    }

    #[test]
    fn lower_bidiagonal_is_forward_substitution() {
        let mut b = BandMatrix::zeros(3, 1, 0);
        b.set(0, 0, 2.0);
        b.set(1, 0, 1.0);
        b.set(1, 1, 4.0);
        b.set(2, 1, -1.0);
        b.set(2, 2, 1.0);
        let x = b.solve(&[2.0, 5.0, 0.0]).unwrap();
        assert_eq!(x, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn pivot_order_prefers_largest_column() {
        let a = DMatrix::from_row_slice(2, 3, &[0.0, 3.0, 1.0, 0.0, 0.0, 2.0]);
        let p = pivoted_qr_order(&a);
        assert_eq!(p[0], 1);
        assert_eq!(p[1], 2);
        assert_eq!(p[2], 0);
    }

    #[test]
    fn least_squares_rejects_rank_deficiency() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 6.0]);
        assert!(matches!(
            least_squares(&a, &[1.0, 2.0, 3.0], 1e-10),
            Err(Error::Conditioning(_))
        ));
    }

    #[test]
    fn gram_and_svd_routes_agree() {
        let s = DMatrix::from_fn(4, 12, |i, j| ((i * 3 + j * 5) % 7) as f64 - 3.0 + 0.1 * i as f64);
        let (u1, s1) = left_singular_vectors(&s);
        let svd = s.clone().svd(false, false);
        let mut exact: Vec<f64> = svd.singular_values.iter().copied().collect();
        exact.sort_by(|a, b| b.total_cmp(a));
        for (a, b) in s1.iter().zip(&exact) {
            assert!((a - b).abs() < 1e-9 * exact[0]);
        }
        let ortho = u1.transpose() * &u1;
        assert!((ortho - DMatrix::identity(4, 4)).amax() < 1e-12);
    }

    #[test]
    fn power_iteration_on_diagonal() {
        let d = [1.0, -5.0, 3.0];
        let f = |x: &[f64]| x.iter().zip(&d).map(|(a, b)| a * b).collect::<Vec<_>>();
        let s = spectral_norm(3, f, f, 1e-12, 10_000);
        assert!((s - 5.0).abs() < 1e-9);
    }
}
