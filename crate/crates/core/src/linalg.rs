//! Small dense linear algebra for the desk-scale problems handled here
//! (a handful of parameters, a few hundred residuals).

use crate::scalar::Real;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged matrix rows");
            data.extend_from_slice(r);
        }
        Self { rows: rows.len(), cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Appends a row.
    pub fn push_row(&mut self, row: &[T]) {
        assert_eq!(row.len(), self.cols);
        self.data.extend_from_slice(row);
        self.rows += 1;
    }

    /// `Aᵀ v`.
    pub fn tr_mul_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(v.len(), self.rows);
        let mut out = vec![T::zero(); self.cols];
        for (i, &vi) in v.iter().enumerate() {
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o = *o + a * vi;
            }
        }
        out
    }

    /// `A v`.
    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(&a, &b)| a * b).sum())
            .collect()
    }

    /// `AᵀA`.
    pub fn gram(&self) -> Matrix<T> {
        let n = self.cols;
        let mut g = Matrix::zeros(n, n);
        for i in 0..self.rows {
            let r = self.row(i);
            for a in 0..n {
                for b in a..n {
                    let v = g.get(a, b) + r[a] * r[b];
                    g.set(a, b, v);
                }
            }
        }
        for a in 0..n {
            for b in 0..a {
                let v = g.get(b, a);
                g.set(a, b, v);
            }
        }
        g
    }

    /// Keeps only the listed columns, in the given order.
    pub fn select_cols(&self, cols: &[usize]) -> Matrix<T> {
        let mut out = Matrix::zeros(self.rows, cols.len());
        for i in 0..self.rows {
            for (k, &j) in cols.iter().enumerate() {
                out.set(i, k, self.get(i, j));
            }
        }
        out
    }
}

/// Householder triangularization of `A` applied to `b` as well; returns
/// `(R, Qᵀb, largest column norm met)`.
fn householder<T: Real>(a: &Matrix<T>, b: &[T]) -> (Matrix<T>, Vec<T>, T) {
    let (m, n) = (a.rows(), a.cols());
    let mut r = a.clone();
    let mut qtb = b.to_vec();
    let mut scale = T::zero();
    let two = T::lit(2.0);
    for k in 0..n.min(m) {
        let mut alpha = (k..m).map(|i| r.get(i, k).powi(2)).sum::<T>().sqrt();
        scale = scale.max(alpha);
        if alpha == T::zero() {
            continue;
        }
        if r.get(k, k) > T::zero() {
            alpha = -alpha;
        }
        // v = x - alpha e1, stored in column k below the diagonal
        let mut v: Vec<T> = (k..m).map(|i| r.get(i, k)).collect();
        v[0] = v[0] - alpha;
        let vnorm2: T = v.iter().map(|&x| x * x).sum();
        if vnorm2 == T::zero() {
            continue;
        }
        for j in k..n {
            let dot: T = v.iter().enumerate().map(|(o, &vi)| vi * r.get(k + o, j)).sum();
            let f = two * dot / vnorm2;
            for (o, &vi) in v.iter().enumerate() {
                let val = r.get(k + o, j) - f * vi;
                r.set(k + o, j, val);
            }
        }
        let dot: T = v.iter().enumerate().map(|(o, &vi)| vi * qtb[k + o]).sum();
        let f = two * dot / vnorm2;
        for (o, &vi) in v.iter().enumerate() {
            qtb[k + o] = qtb[k + o] - f * vi;
        }
    }
    (r, qtb, scale)
}

/// Solves `min ‖A x − b‖₂` by Householder QR. Returns `None` when `A` is
/// numerically rank deficient (a zero pivot) or has fewer rows than columns.
pub fn lstsq<T: Real>(a: &Matrix<T>, b: &[T]) -> Option<Vec<T>> {
    let (m, n) = (a.rows(), a.cols());
    assert_eq!(b.len(), m);
    if m < n {
        return None;
    }
    let (r, qtb, scale) = householder(a, b);
    let tiny = scale * T::epsilon() * T::lit(n.max(1) as f64);
    let mut x = vec![T::zero(); n];
    for k in (0..n).rev() {
        let d = r.get(k, k);
        if d.abs() <= tiny || d == T::zero() {
            return None;
        }
        let s: T = ((k + 1)..n).map(|j| r.get(k, j) * x[j]).sum();
        x[k] = (qtb[k] - s) / d;
    }
    Some(x)
}

/// `‖b‖² − min_x ‖A x − b‖²` for full-rank `A`, and an upper bound on it
/// otherwise: the squared length of `b` inside the span of the Householder
/// reflections, which contains the column space of `A`.
pub fn reducible_sq<T: Real>(a: &Matrix<T>, b: &[T]) -> T {
    assert_eq!(b.len(), a.rows());
    let (_, qtb, _) = householder(a, b);
    qtb.iter().take(a.cols()).map(|&v| v * v).sum()
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
pub fn symmetric_eigenvalues<T: Real>(a: &Matrix<T>) -> Vec<T> {
    let n = a.rows();
    assert_eq!(n, a.cols(), "matrix must be square");
    let mut m = a.clone();
    let two = T::lit(2.0);
    for _sweep in 0..100 {
        let off: T = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m.get(i, j).powi(2))
            .sum();
        let diag: T = (0..n).map(|i| m.get(i, i).powi(2)).sum();
        if off <= T::epsilon().powi(2) * diag || off == T::zero() {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m.get(p, q);
                if apq == T::zero() {
                    continue;
                }
                let theta = (m.get(q, q) - m.get(p, p)) / (two * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = m.get(k, p);
                    let akq = m.get(k, q);
                    m.set(k, p, c * akp - s * akq);
                    m.set(k, q, s * akp + c * akq);
                }
                for k in 0..n {
                    let apk = m.get(p, k);
                    let aqk = m.get(q, k);
                    m.set(p, k, c * apk - s * aqk);
                    m.set(q, k, s * apk + c * aqk);
                }
            }
        }
    }
    let mut ev: Vec<T> = (0..n).map(|i| m.get(i, i)).collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    ev
}
