//! Dense matrices just big enough for this crate: kernel matrices of order
//! K (components, K <~ 30) and regression blocks of order p (covariates).
//! Row-major storage, Cholesky with an LU fallback for log-determinants.

use crate::real::Real;

#[derive(Clone, Debug, PartialEq)]
pub struct Mat<T> {
    n_rows: usize,
    n_cols: usize,
    data: Vec<T>,
}

impl<T: Real> Mat<T> {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Mat { n_rows, n_cols, data: vec![T::zero(); n_rows * n_cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn diag(entries: &[T]) -> Self {
        let mut m = Self::zeros(entries.len(), entries.len());
        for (i, &e) in entries.iter().enumerate() {
            m[(i, i)] = e;
        }
        m
    }

    pub fn from_fn(n_rows: usize, n_cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut m = Self::zeros(n_rows, n_cols);
        for i in 0..n_rows {
            for j in 0..n_cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let n_rows = rows.len();
        let n_cols = if n_rows == 0 { 0 } else { rows[0].len() };
        let mut m = Self::zeros(n_rows, n_cols);
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.len(), n_cols);
            m.data[i * n_cols..(i + 1) * n_cols].copy_from_slice(r);
        }
        m
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn mat_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(v.len(), self.n_cols);
        (0..self.n_rows).map(|i| dot(self.row(i), v)).collect()
    }

    /// self += scale * x x^T (x treated as a column).
    pub fn add_outer(&mut self, x: &[T], scale: T) {
        assert_eq!(self.n_rows, x.len());
        assert_eq!(self.n_cols, x.len());
        for i in 0..x.len() {
            for j in 0..x.len() {
                let v = self[(i, j)] + scale * x[i] * x[j];
                self[(i, j)] = v;
            }
        }
    }

    pub fn add(&mut self, other: &Mat<T>) {
        assert_eq!(self.n_rows, other.n_rows);
        assert_eq!(self.n_cols, other.n_cols);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += *b;
        }
    }

    pub fn scale(&mut self, s: T) {
        for a in self.data.iter_mut() {
            *a *= s;
        }
    }

    /// x^T A y.
    pub fn quad_form(&self, x: &[T], y: &[T]) -> T {
        dot(x, &self.mat_vec(y))
    }
}

impl<T> std::ops::Index<(usize, usize)> for Mat<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.n_cols + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for Mat<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        let c = self.n_cols;
        &mut self.data[i * c + j]
    }
}

pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
#[derive(Clone, Debug)]
pub struct Cholesky<T> {
    l: Mat<T>,
}

impl<T: Real> Cholesky<T> {
    /// `None` when the matrix is not numerically positive definite.
    pub fn new(a: &Mat<T>) -> Option<Self> {
        assert_eq!(a.n_rows, a.n_cols);
        let n = a.n_rows;
        let mut l = Mat::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s = s - l[(i, k)] * l[(j, k)];
                }
                if i == j {
                    if !(s > T::zero()) || !s.is_finite() {
                        return None;
                    }
                    l[(i, j)] = s.sqrt();
                } else {
                    l[(i, j)] = s / l[(j, j)];
                }
            }
        }
        Some(Cholesky { l })
    }

    pub fn log_det(&self) -> T {
        let n = self.l.n_rows;
        let two = T::of(2.0);
        (0..n).map(|i| two * self.l[(i, i)].ln()).sum()
    }

    /// Solve A x = b.
    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.l.n_rows;
        assert_eq!(b.len(), n);
        // forward: L y = b
        let mut y = b.to_vec();
        for i in 0..n {
            for k in 0..i {
                let t = self.l[(i, k)] * y[k];
                y[i] = y[i] - t;
            }
            y[i] = y[i] / self.l[(i, i)];
        }
        // backward: L^T x = y
        for i in (0..n).rev() {
            for k in i + 1..n {
                let t = self.l[(k, i)] * y[k];
                y[i] = y[i] - t;
            }
            y[i] = y[i] / self.l[(i, i)];
        }
        y
    }

    /// Solve L^T x = b (backward substitution only). With A = L L^T this
    /// turns a standard-normal vector z into a draw from N(0, A^{-1}).
    pub fn solve_lt(&self, b: &[T]) -> Vec<T> {
        let n = self.l.n_rows;
        assert_eq!(b.len(), n);
        let mut x = b.to_vec();
        for i in (0..n).rev() {
            for k in i + 1..n {
                let t = self.l[(k, i)] * x[k];
                x[i] = x[i] - t;
            }
            x[i] = x[i] / self.l[(i, i)];
        }
        x
    }

    pub fn inverse(&self) -> Mat<T> {
        let n = self.l.n_rows;
        let mut inv = Mat::zeros(n, n);
        for j in 0..n {
            let mut e = vec![T::zero(); n];
            e[j] = T::one();
            let col = self.solve(&e);
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
        }
        inv
    }

    /// x^T A^{-1} y.
    pub fn inv_quad_form(&self, x: &[T], y: &[T]) -> T {
        dot(x, &self.solve(y))
    }

    /// Draw from N(mean, A) where A = L L^T is the factored matrix.
    pub fn sample_mvn<R: rand::Rng + ?Sized>(&self, mean: &[T], rng: &mut R) -> Vec<T> {
        let n = self.l.n_rows;
        let z: Vec<T> = (0..n).map(|_| T::sample_std_normal(rng)).collect();
        (0..n)
            .map(|i| {
                let mut v = mean[i];
                for k in 0..=i {
                    v = v + self.l[(i, k)] * z[k];
                }
                v
            })
            .collect()
    }
}

/// Log-determinant via LU with partial pivoting; `None` when the determinant
/// is non-positive or the matrix is numerically singular.
pub fn lu_log_det<T: Real>(a: &Mat<T>) -> Option<T> {
    assert_eq!(a.n_rows, a.n_cols);
    let n = a.n_rows;
    let mut m = a.clone();
    let mut sign_flips = 0usize;
    let mut log_abs = T::zero();
    for c in 0..n {
        let mut piv = c;
        let mut best = m[(c, c)].abs();
        for r in c + 1..n {
            let v = m[(r, c)].abs();
            if v > best {
                best = v;
                piv = r;
            }
        }
        if !(best > T::zero()) || !best.is_finite() {
            return None;
        }
        if piv != c {
            for j in 0..n {
                let tmp = m[(c, j)];
                m[(c, j)] = m[(piv, j)];
                m[(piv, j)] = tmp;
            }
            sign_flips += 1;
        }
        let d = m[(c, c)];
        if d < T::zero() {
            sign_flips += 1;
        }
        log_abs += d.abs().ln();
        for r in c + 1..n {
            let f = m[(r, c)] / d;
            if f != T::zero() {
                for j in c + 1..n {
                    let t = f * m[(c, j)];
                    m[(r, j)] = m[(r, j)] - t;
                }
            }
            m[(r, c)] = T::zero();
        }
    }
    if sign_flips % 2 == 1 {
        None
    } else {
        Some(log_abs)
    }
}

/// Log-determinant of a symmetric matrix meant to be positive definite:
/// Cholesky first, LU as the fallback; `None` means "treat the density as 0".
pub fn sym_log_det<T: Real>(a: &Mat<T>) -> Option<T> {
    if a.n_rows() == 0 {
        return Some(T::zero());
    }
    match Cholesky::new(a) {
        Some(ch) => Some(ch.log_det()),
        None => lu_log_det(a),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_solves_and_logdet() {
        let a = Mat::from_rows(&[
            vec![4.0, 1.0, 0.5],
            vec![1.0, 3.0, 0.2],
            vec![0.5, 0.2, 2.0],
        ]);
        let ch = Cholesky::new(&a).unwrap();
        let x = ch.solve(&[1.0, 2.0, 3.0]);
        let b = a.mat_vec(&x);
        for (bi, want) in b.iter().zip([1.0, 2.0, 3.0]) {
            assert!((bi - want).abs() < 1e-12);
        }
        let lu = lu_log_det(&a).unwrap();
        assert!((ch.log_det() - lu).abs() < 1e-12);
    }

    #[test]
    fn non_pd_matrix_is_rejected() {
        let a = Mat::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]);
        assert!(Cholesky::<f64>::new(&a).is_none());
        // det = -3 < 0
        assert!(lu_log_det(&a).is_none());
    }

    #[test]
    fn inverse_round_trip() {
        let a = Mat::from_rows(&[vec![2.5, 0.7], vec![0.7, 1.9]]);
        let inv = Cholesky::new(&a).unwrap().inverse();
        let prod = Mat::from_fn(2, 2, |i, j| dot(a.row(i), &(0..2).map(|k| inv[(k, j)]).collect::<Vec<_>>()));
        for i in 0..2 {
            for j in 0..2 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((prod[(i, j)] - want).abs() < 1e-12);
            }
        }
    }
}
