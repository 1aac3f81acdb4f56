//! Dense row-major 2-D tensors.

use fbcode_core::Real;

use crate::error::{shape, NnError, Result};

/// A [`Real`] with a matching GEMM kernel.
pub trait Scalar: Real {
    /// `c = alpha * a * b + beta * c` for an `m x k` times `k x n` product,
    /// each operand addressed through explicit row/column strides.
    #[allow(clippy::too_many_arguments)]
    fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: &[Self],
        a_strides: (isize, isize),
        b: &[Self],
        b_strides: (isize, isize),
        beta: Self,
        c: &mut [Self],
    );
}

macro_rules! impl_scalar {
    ($t:ty, $kernel:path) => {
        impl Scalar for $t {
            fn gemm(
                m: usize,
                k: usize,
                n: usize,
                alpha: Self,
                a: &[Self],
                (rsa, csa): (isize, isize),
                b: &[Self],
                (rsb, csb): (isize, isize),
                beta: Self,
                c: &mut [Self],
            ) {
                let span = |r: usize, c: usize, rs: isize, cs: isize| {
                    if r == 0 || c == 0 {
                        0
                    } else {
                        (r as isize - 1) * rs + (c as isize - 1) * cs + 1
                    }
                };
                assert!(span(m, k, rsa, csa) as usize <= a.len(), "gemm: lhs buffer too small");
                assert!(span(k, n, rsb, csb) as usize <= b.len(), "gemm: rhs buffer too small");
                assert!(m * n <= c.len(), "gemm: output buffer too small");
                // SAFETY: the asserts above bound every address the kernel touches.
                unsafe {
                    $kernel(
                        m,
                        k,
                        n,
                        alpha,
                        a.as_ptr(),
                        rsa,
                        csa,
                        b.as_ptr(),
                        rsb,
                        csb,
                        beta,
                        c.as_mut_ptr(),
                        n as isize,
                        1,
                    )
                }
            }
        }
    };
}

impl_scalar!(f32, matrixmultiply::sgemm);
impl_scalar!(f64, matrixmultiply::dgemm);

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, T::zero())
    }

    pub fn filled(rows: usize, cols: usize, v: T) -> Self {
        Self {
            rows,
            cols,
            data: vec![v; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return shape(format!("{} values cannot fill a {rows}x{cols} tensor", data.len()));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn scalar(v: T) -> Self {
        Self::filled(1, 1, v)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: T) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Copies column `c` out.
    pub fn col(&self, c: usize) -> Vec<T> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    /// The single value of a `1 x 1` tensor.
    pub fn item(&self) -> Result<T> {
        if self.shape() != (1, 1) {
            return shape(format!("item() on a {}x{} tensor", self.rows, self.cols));
        }
        Ok(self.data[0])
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        self.same_shape(other, "zip")?;
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn add_assign(&mut self, other: &Self) -> Result<()> {
        self.same_shape(other, "add_assign")?;
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    pub fn same_shape(&self, other: &Self, op: &str) -> Result<()> {
        if self.shape() != other.shape() {
            return shape(format!("{op}: {:?} vs {:?}", self.shape(), other.shape()));
        }
        Ok(())
    }

    /// `op(self) * op(other)` with optional transposes.
    pub fn matmul_t(&self, ta: bool, other: &Self, tb: bool) -> Result<Self> {
        let (m, k) = if ta { (self.cols, self.rows) } else { (self.rows, self.cols) };
        let (k2, n) = if tb { (other.cols, other.rows) } else { (other.rows, other.cols) };
        if k != k2 {
            return shape(format!(
                "matmul: {:?}{} x {:?}{}",
                self.shape(),
                if ta { "^T" } else { "" },
                other.shape(),
                if tb { "^T" } else { "" }
            ));
        }
        let sa = if ta { (1, self.cols as isize) } else { (self.cols as isize, 1) };
        let sb = if tb { (1, other.cols as isize) } else { (other.cols as isize, 1) };
        let mut out = Self::zeros(m, n);
        T::gemm(m, k, n, T::one(), &self.data, sa, &other.data, sb, T::zero(), &mut out.data);
        Ok(out)
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        self.matmul_t(false, other, false)
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self.get(c, r))
    }

    pub fn sum(&self) -> T {
        T::of(self.data.iter().map(|v| v.as_f64()).sum::<f64>())
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn check_finite(&self, op: &str) -> Result<()> {
        if let Some(i) = self.data.iter().position(|v| !v.is_finite()) {
            return Err(NnError::Numeric(format!(
                "{op} produced {} at ({}, {})",
                self.data[i],
                i / self.cols.max(1),
                i % self.cols.max(1)
            )));
        }
        Ok(())
    }

    /// Converts element type through `f64`.
    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| U::of(v.as_f64())).collect(),
        }
    }

    /// Per-column mean and population variance, accumulated in `f64`.
    pub fn column_moments(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.rows as f64;
        let mut mean = vec![0.0f64; self.cols];
        for r in 0..self.rows {
            for (m, v) in mean.iter_mut().zip(self.row(r)) {
                *m += v.as_f64();
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0f64; self.cols];
        for r in 0..self.rows {
            for ((s, v), m) in var.iter_mut().zip(self.row(r)).zip(&mean) {
                let d = v.as_f64() - m;
                *s += d * d;
            }
        }
        var.iter_mut().for_each(|s| *s /= n);
        (mean, var)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(a: &Tensor<f64>, b: &Tensor<f64>) -> Tensor<f64> {
        Tensor::from_fn(a.rows(), b.cols(), |r, c| (0..a.cols()).map(|i| a.get(r, i) * b.get(i, c)).sum())
    }

    #[test]
    fn matmul_shapes_and_values() {
        let a = Tensor::from_fn(2, 3, |r, c| (r * 3 + c) as f64);
        let b = Tensor::from_fn(3, 4, |r, c| (r as f64) - 0.5 * c as f64);
        let c = a.matmul(&b).unwrap();
        assert_eq!(c.shape(), (2, 4));
        assert_eq!(c, naive(&a, &b));
        assert!(a.matmul(&a).is_err());
    }

    #[test]
    fn transposed_products() {
        let a = Tensor::from_fn(5, 3, |r, c| ((r * 7 + c * 3) % 5) as f64 - 2.0);
        let b = Tensor::from_fn(5, 4, |r, c| ((r + 2 * c) % 3) as f64);
        assert_eq!(a.matmul_t(true, &b, false).unwrap(), naive(&a.transpose(), &b));
        let c = Tensor::from_fn(4, 3, |r, c| (r as f64) * 0.25 + c as f64);
        assert_eq!(a.matmul_t(false, &c, true).unwrap(), naive(&a, &c.transpose()));
    }

    #[test]
    fn f32_kernel() {
        let a = Tensor::<f32>::from_fn(2, 2, |r, c| (r + c) as f32);
        let i = Tensor::<f32>::from_fn(2, 2, |r, c| if r == c { 1.0 } else { 0.0 });
        assert_eq!(a.matmul(&i).unwrap(), a);
    }

    #[test]
    fn construction_checks() {
        assert!(Tensor::<f64>::from_vec(2, 2, vec![1.0; 3]).is_err());
        assert!(Tensor::<f64>::zeros(2, 1).item().is_err());
        assert_eq!(Tensor::scalar(2.5f64).item().unwrap(), 2.5);
        let bad = Tensor::from_vec(1, 2, vec![1.0, f64::NAN]).unwrap();
        assert!(matches!(bad.check_finite("t"), Err(NnError::Numeric(_))));
    }

    #[test]
    fn moments() {
        let t = Tensor::from_vec(4, 2, vec![1.0, 0.0, 2.0, 0.0, 3.0, 0.0, 4.0, 8.0]).unwrap();
        let (m, v) = t.column_moments();
        assert_eq!(m, vec![2.5, 2.0]);
        assert_eq!(v, vec![1.25, 12.0]);
    }
}
