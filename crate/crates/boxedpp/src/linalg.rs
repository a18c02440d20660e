//! Minimal dense linear algebra (LU with partial pivoting) for the small
//! matrices that appear in determinantal formulas and identity checks.

use num_complex::Complex64;

pub trait Scalar: Copy + std::ops::Add<Output = Self> + std::ops::Sub<Output = Self>
    + std::ops::Mul<Output = Self> + std::ops::Div<Output = Self> {
    fn zero() -> Self;
    fn one() -> Self;
    fn abs2(self) -> f64;
    fn neg(self) -> Self;
}

impl Scalar for f64 {
    fn zero() -> Self { 0.0 }
    fn one() -> Self { 1.0 }
    fn abs2(self) -> f64 { self * self }
    fn neg(self) -> Self { -self }
}

impl Scalar for Complex64 {
    fn zero() -> Self { Complex64::new(0.0, 0.0) }
    fn one() -> Self { Complex64::new(1.0, 0.0) }
    fn abs2(self) -> f64 { self.norm_sqr() }
    fn neg(self) -> Self { -self }
}

/// Row-major square matrix.
#[derive(Debug, Clone)]
pub struct Matrix<T> {
    pub n: usize,
    pub data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(n: usize) -> Self {
        Matrix { n, data: vec![T::zero(); n * n] }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut m = Matrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.data[i * n + j] = f(i, j);
            }
        }
        m
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.n + j] = v;
    }

    pub fn matmul(&self, other: &Matrix<T>) -> Matrix<T> {
        assert_eq!(self.n, other.n);
        let n = self.n;
        Matrix::from_fn(n, |i, j| {
            let mut acc = T::zero();
            for k in 0..n {
                acc = acc + self.get(i, k) * other.get(k, j);
            }
            acc
        })
    }

    /// Determinant via LU with partial pivoting.
    pub fn det(&self) -> T {
        let n = self.n;
        let mut a = self.data.clone();
        let mut det = T::one();
        for col in 0..n {
            let mut piv = col;
            let mut best = a[col * n + col].abs2();
            for r in col + 1..n {
                let v = a[r * n + col].abs2();
                if v > best {
                    best = v;
                    piv = r;
                }
            }
            if best == 0.0 {
                return T::zero();
            }
            if piv != col {
                for j in 0..n {
                    a.swap(col * n + j, piv * n + j);
                }
                det = det.neg();
            }
            let d = a[col * n + col];
            det = det * d;
            for r in col + 1..n {
                let f = a[r * n + col] / d;
                for j in col..n {
                    let v = a[col * n + j];
                    a[r * n + j] = a[r * n + j] - f * v;
                }
            }
        }
        det
    }

    /// Inverse via Gauss-Jordan; returns None when singular to working precision.
    pub fn inverse(&self) -> Option<Matrix<T>> {
        let n = self.n;
        let mut a = self.data.clone();
        let mut inv = Matrix::<T>::from_fn(n, |i, j| if i == j { T::one() } else { T::zero() });
        for col in 0..n {
            let mut piv = col;
            let mut best = a[col * n + col].abs2();
            for r in col + 1..n {
                let v = a[r * n + col].abs2();
                if v > best {
                    best = v;
                    piv = r;
                }
            }
            if best == 0.0 {
                return None;
            }
            if piv != col {
                for j in 0..n {
                    a.swap(col * n + j, piv * n + j);
                    inv.data.swap(col * n + j, piv * n + j);
                }
            }
            let d = a[col * n + col];
            for j in 0..n {
                a[col * n + j] = a[col * n + j] / d;
                inv.data[col * n + j] = inv.data[col * n + j] / d;
            }
            for r in 0..n {
                if r == col {
                    continue;
                }
                let f = a[r * n + col];
                if f.abs2() == 0.0 {
                    continue;
                }
                for j in 0..n {
                    let av = a[col * n + j];
                    let iv = inv.data[col * n + j];
                    a[r * n + j] = a[r * n + j] - f * av;
                    inv.data[r * n + j] = inv.data[r * n + j] - f * iv;
                }
            }
        }
        Some(inv)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn det_and_inverse() {
        let m = Matrix::<f64>::from_fn(3, |i, j| [[2.0, 1.0, 0.0], [1.0, 3.0, 1.0], [0.0, 1.0, 2.0]][i][j]);
        assert!((m.det() - 8.0).abs() < 1e-12);
        let inv = m.inverse().unwrap();
        let id = m.matmul(&inv);
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((id.get(i, j) - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn complex_det() {
        let i = Complex64::new(0.0, 1.0);
        let m = Matrix::<Complex64>::from_fn(2, |r, c| {
            [[i, Complex64::new(1.0, 0.0)], [Complex64::new(1.0, 0.0), i]][r][c]
        });
        let d = m.det();
        assert!((d - Complex64::new(-2.0, 0.0)).norm() < 1e-14);
    }
}
