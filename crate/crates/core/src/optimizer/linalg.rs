use crate::Real;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<T>,
}

impl<T: Real> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn add_diagonal(&mut self, v: T) {
        for i in 0..self.rows.min(self.cols) {
            let d = self.get(i, i);
            self.set(i, i, d + v);
        }
    }
}

/// Lower-triangular Cholesky factor `L` with `A = L L^T`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cholesky<T> {
    l: Matrix<T>,
}

impl<T: Real> Cholesky<T> {
    /// Factors a symmetric matrix; `None` if it is not numerically positive definite.
    pub fn new(a: &Matrix<T>) -> Option<Self> {
        let n = a.rows;
        assert_eq!(n, a.cols, "square matrix required");
        let mut l = Matrix::zeros(n, n);
        for j in 0..n {
            let mut d = a.get(j, j);
            for k in 0..j {
                let v = l.get(j, k);
                d = d - v * v;
            }
            if !(d > T::zero()) || !d.is_finite() {
                return None;
            }
            let d = d.sqrt();
            l.set(j, j, d);
            for i in j + 1..n {
                let (ri, rj) = (i * n, j * n);
                let mut s = a.get(i, j);
                for k in 0..j {
                    s = s - l.data[ri + k] * l.data[rj + k];
                }
                l.set(i, j, s / d);
            }
        }
        Some(Self { l })
    }

    pub fn dim(&self) -> usize {
        self.l.rows
    }

    pub fn factor(&self) -> &Matrix<T> {
        &self.l
    }

    /// Solves `L x = b`.
    pub fn solve_lower(&self, b: &[T]) -> Vec<T> {
        let n = self.dim();
        let mut x = b.to_vec();
        for i in 0..n {
            let row = self.l.row(i);
            let mut s = x[i];
            for k in 0..i {
                s = s - row[k] * x[k];
            }
            x[i] = s / row[i];
        }
        x
    }

    /// Solves `L^T x = b`.
    pub fn solve_upper(&self, b: &[T]) -> Vec<T> {
        let n = self.dim();
        let mut x = b.to_vec();
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in i + 1..n {
                s = s - self.l.get(k, i) * x[k];
            }
            x[i] = s / self.l.get(i, i);
        }
        x
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[T]) -> Vec<T> {
        self.solve_upper(&self.solve_lower(b))
    }

    /// log det A.
    pub fn log_det(&self) -> T {
        (0..self.dim()).fold(T::zero(), |s, i| s + self.l.get(i, i).ln()) * T::lit(2.0)
    }

    /// `L v` for a vector `v`.
    pub fn mul_lower(&self, v: &[T]) -> Vec<T> {
        (0..self.dim()).map(|i| self.l.row(i)[..=i].iter().zip(v).fold(T::zero(), |s, (&a, &b)| s + a * b)).collect()
    }
}

/// Factors `a + jitter I`, growing the jitter tenfold until the factorization succeeds or
/// it exceeds `max_jitter`. Returns the factor and the jitter used.
pub fn cholesky_with_jitter<T: Real>(a: &Matrix<T>, jitter: T, max_jitter: T) -> Option<(Cholesky<T>, T)> {
    let mut j = jitter;
    loop {
        let mut m = a.clone();
        m.add_diagonal(j);
        if let Some(c) = Cholesky::new(&m) {
            return Some((c, j));
        }
        j = j * T::lit(10.0);
        if j > max_jitter {
            return None;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factors_and_solves() {
        let a = Matrix { rows: 3, cols: 3, data: vec![4.0, 12.0, -16.0, 12.0, 37.0, -43.0, -16.0, -43.0, 98.0] };
        let c = Cholesky::new(&a).unwrap();
        assert_eq!(c.factor().data, vec![2.0, 0.0, 0.0, 6.0, 1.0, 0.0, -8.0, 5.0, 3.0]);
        let x = c.solve(&[1.0, 2.0, 3.0]);
        for i in 0..3 {
            let r: f64 = (0..3).map(|j| a.get(i, j) * x[j]).sum();
            assert!((r - [1.0, 2.0, 3.0][i]).abs() < 1e-10);
        }
        assert!((c.log_det() - 36.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn rejects_indefinite() {
        let a = Matrix { rows: 2, cols: 2, data: vec![1.0, 2.0, 2.0, 1.0] };
        assert!(Cholesky::new(&a).is_none());
        let singular = Matrix { rows: 2, cols: 2, data: vec![1.0, 1.0, 1.0, 1.0] };
        let (_, j) = cholesky_with_jitter(&singular, 1e-9, 1e-3).unwrap();
        assert!(j >= 1e-9);
    }
}
