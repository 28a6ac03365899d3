use std::fmt;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Row-major dense matrix.
///
/// Both dimensions are always positive and every entry is finite; the
/// constructors reject anything else.
#[derive(Clone, PartialEq)]
pub struct DenseMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> DenseMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Result<Self> {
        Self::filled(rows, cols, T::zero())
    }

    pub fn filled(rows: usize, cols: usize, value: T) -> Result<Self> {
        check_dims(rows, cols)?;
        if !value.is_finite() {
            return Err(Error::NonFinite("filled"));
        }
        Ok(Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        })
    }

    pub fn identity(n: usize) -> Result<Self> {
        let mut m = Self::zeros(n, n)?;
        for i in 0..n {
            m.data[i * n + i] = T::one();
        }
        Ok(m)
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        check_dims(rows, cols)?;
        if data.len() != rows * cols {
            return Err(Error::DataLength {
                rows,
                cols,
                len: data.len(),
            });
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("from_vec"));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from nested rows; all rows must have equal length.
    pub fn from_rows<R: AsRef<[T]>>(rows: &[R]) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, |r| r.as_ref().len());
        check_dims(n_rows, n_cols)?;
        let mut data = Vec::with_capacity(n_rows * n_cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != n_cols {
                return Err(Error::DataLength {
                    rows: n_rows,
                    cols: n_cols,
                    len: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Self::from_vec(n_rows, n_cols, data)
    }

    /// Builds a matrix whose entry (i, j) is `f(i, j)`.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Result<Self> {
        check_dims(rows, cols)?;
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self::from_vec(rows, cols, data)
    }

    /// Outer product `u vᵀ`.
    pub fn outer(u: &[T], v: &[T]) -> Result<Self> {
        Self::from_fn(u.len(), v.len(), |i, j| u[i] * v[j])
    }

    /// Diagonal `rows x cols` matrix with `diag` on the main diagonal.
    pub fn diagonal(rows: usize, cols: usize, diag: &[T]) -> Result<Self> {
        if diag.len() > rows.min(cols) {
            return Err(Error::InvalidArgument(format!(
                "diagonal of length {} does not fit {rows}x{cols}",
                diag.len()
            )));
        }
        let mut m = Self::zeros(rows, cols)?;
        for (i, &d) in diag.iter().enumerate() {
            m.data[i * cols + i] = d;
        }
        if !m.is_finite() {
            return Err(Error::NonFinite("diagonal"));
        }
        Ok(m)
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
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    /// Always false; kept for clippy's `len_without_is_empty`.
    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    /// Mutable access to the raw storage. Callers must keep entries finite.
    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: T) {
        self.data[i * self.cols + j] = value;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        let c = self.cols;
        &mut self.data[i * c..(i + 1) * c]
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn transpose(&self) -> Self {
        let mut data = vec![T::zero(); self.data.len()];
        for i in 0..self.rows {
            for j in 0..self.cols {
                data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        Self {
            rows: self.cols,
            cols: self.rows,
            data,
        }
    }

    /// Leading `k` columns as a new matrix.
    pub fn leading_columns(&self, k: usize) -> Result<Self> {
        if k == 0 || k > self.cols {
            return Err(Error::InvalidArgument(format!(
                "cannot take {k} leading columns of a {}-column matrix",
                self.cols
            )));
        }
        let mut data = Vec::with_capacity(self.rows * k);
        for i in 0..self.rows {
            data.extend_from_slice(&self.row(i)[..k]);
        }
        Ok(Self {
            rows: self.rows,
            cols: k,
            data,
        })
    }

    /// Horizontal concatenation `[self, other]`.
    pub fn hstack(&self, other: &Self) -> Result<Self> {
        if self.rows != other.rows {
            return Err(mismatch("hstack", self, other));
        }
        let cols = self.cols + other.cols;
        let mut data = Vec::with_capacity(self.rows * cols);
        for i in 0..self.rows {
            data.extend_from_slice(self.row(i));
            data.extend_from_slice(other.row(i));
        }
        Ok(Self {
            rows: self.rows,
            cols,
            data,
        })
    }

    /// Matrix product `self · rhs`.
    pub fn matmul(&self, rhs: &Self) -> Result<Self> {
        if self.cols != rhs.rows {
            return Err(mismatch("matmul", self, rhs));
        }
        let (m, n) = (self.rows, rhs.cols);
        let mut out = vec![T::zero(); m * n];
        for i in 0..m {
            let out_row = &mut out[i * n..(i + 1) * n];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == T::zero() {
                    continue;
                }
                axpy(a, rhs.row(k), out_row);
            }
        }
        Ok(Self {
            rows: m,
            cols: n,
            data: out,
        })
    }

    /// `selfᵀ · rhs` without materialising the transpose.
    pub fn matmul_tn(&self, rhs: &Self) -> Result<Self> {
        if self.rows != rhs.rows {
            return Err(mismatch("matmul_tn", self, rhs));
        }
        let (m, n) = (self.cols, rhs.cols);
        let mut out = vec![T::zero(); m * n];
        for r in 0..self.rows {
            let rhs_row = rhs.row(r);
            for (i, &a) in self.row(r).iter().enumerate() {
                if a == T::zero() {
                    continue;
                }
                axpy(a, rhs_row, &mut out[i * n..(i + 1) * n]);
            }
        }
        Ok(Self {
            rows: m,
            cols: n,
            data: out,
        })
    }

    /// `self · rhsᵀ` without materialising the transpose.
    pub fn matmul_nt(&self, rhs: &Self) -> Result<Self> {
        if self.cols != rhs.cols {
            return Err(mismatch("matmul_nt", self, rhs));
        }
        let (m, n) = (self.rows, rhs.rows);
        let mut out = Vec::with_capacity(m * n);
        for i in 0..m {
            let a = self.row(i);
            for j in 0..n {
                out.push(dot(a, rhs.row(j)));
            }
        }
        Ok(Self {
            rows: m,
            cols: n,
            data: out,
        })
    }

    /// Sum of squares of all entries.
    pub fn squared_norm(&self) -> T {
        self.data.iter().map(|&x| x * x).sum()
    }

    /// Frobenius norm, accumulated with scaling so it neither overflows nor
    /// underflows for extreme magnitudes.
    pub fn frobenius_norm(&self) -> T {
        let scale = self.max_abs();
        if scale == T::zero() {
            return T::zero();
        }
        let s: T = self
            .data
            .iter()
            .map(|&x| {
                let y = x / scale;
                y * y
            })
            .sum();
        scale * s.sqrt()
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |acc, &x| acc.max(x.abs()))
    }

    pub fn sum(&self) -> T {
        self.data.iter().copied().sum()
    }

    /// Frobenius inner product `Σ aᵢⱼ bᵢⱼ`.
    pub fn inner(&self, other: &Self) -> Result<T> {
        self.check_same_shape("inner", other)?;
        Ok(dot(&self.data, &other.data))
    }

    pub fn row_sums(&self) -> Vec<T> {
        (0..self.rows).map(|i| self.row(i).iter().copied().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<T> {
        let mut out = vec![T::zero(); self.cols];
        for i in 0..self.rows {
            for (o, &x) in out.iter_mut().zip(self.row(i)) {
                *o += x;
            }
        }
        out
    }

    fn check_same_shape(&self, op: &'static str, other: &Self) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(mismatch(op, self, other));
        }
        Ok(())
    }

    fn zip_with(&self, other: &Self, op: &'static str, f: impl Fn(T, T) -> T) -> Result<Self> {
        self.check_same_shape(op, other)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    /// Applies `f` to every entry.
    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn map_inplace(&mut self, f: impl Fn(T) -> T) {
        for x in &mut self.data {
            *x = f(*x);
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, "add", |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, "sub", |a, b| a - b)
    }

    /// Elementwise (Hadamard) product.
    pub fn mul_elem(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, "mul_elem", |a, b| a * b)
    }

    /// Elementwise quotient `a / max(b, floor)`.
    ///
    /// The floor keeps the quotient finite; with `floor = 0` and a strictly
    /// positive divisor this is plain division.
    pub fn div_elem(&self, other: &Self, floor: T) -> Result<Self> {
        let out = self.zip_with(other, "div_elem", |a, b| a / b.max(floor))?;
        if !out.is_finite() {
            return Err(Error::NonFinite("div_elem"));
        }
        Ok(out)
    }

    /// Elementwise square root; negative entries are an error.
    pub fn sqrt(&self) -> Result<Self> {
        if self.data.iter().any(|&x| x < T::zero()) {
            return Err(Error::InvalidArgument(
                "sqrt of a matrix with negative entries".into(),
            ));
        }
        Ok(self.map(|x| x.sqrt()))
    }

    pub fn square(&self) -> Self {
        self.map(|x| x * x)
    }

    pub fn scale(&self, s: T) -> Self {
        self.map(|x| x * s)
    }

    /// Elementwise `max(x, c)`.
    pub fn clamp_min(&self, c: T) -> Self {
        self.map(|x| x.max(c))
    }

    /// `self += alpha · other`.
    pub fn add_scaled_inplace(&mut self, alpha: T, other: &Self) -> Result<()> {
        self.check_same_shape("add_scaled_inplace", other)?;
        axpy(alpha, &other.data, &mut self.data);
        Ok(())
    }

    pub fn scale_inplace(&mut self, s: T) {
        for x in &mut self.data {
            *x *= s;
        }
    }

    /// Largest absolute entry of `selfᵀ self − I`; zero for orthonormal columns.
    pub fn orthonormality_defect(&self) -> T {
        let gram = self.matmul_tn(self).expect("gram of self is always conformable");
        let mut worst = T::zero();
        for i in 0..gram.rows {
            for j in 0..gram.cols {
                let target = if i == j { T::one() } else { T::zero() };
                worst = worst.max((gram.get(i, j) - target).abs());
            }
        }
        worst
    }

    /// Converts the scalar type, e.g. `f64 -> f32` for storage experiments.
    pub fn cast<U: Real>(&self) -> DenseMatrix<U> {
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| U::of(x.as_f64())).collect(),
        }
    }
}

impl<T: fmt::Debug> fmt::Debug for DenseMatrix<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "DenseMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows.min(8) {
            write!(f, "  ")?;
            for j in 0..self.cols.min(8) {
                write!(f, "{:?} ", self.data[i * self.cols + j])?;
            }
            if self.cols > 8 {
                write!(f, "...")?;
            }
            writeln!(f)?;
        }
        if self.rows > 8 {
            writeln!(f, "  ...")?;
        }
        write!(f, "]")
    }
}

fn check_dims(rows: usize, cols: usize) -> Result<()> {
    if rows == 0 || cols == 0 {
        return Err(Error::ZeroDimension { rows, cols });
    }
    Ok(())
}

fn mismatch<T: Real>(op: &'static str, a: &DenseMatrix<T>, b: &DenseMatrix<T>) -> Error {
    Error::ShapeMismatch {
        op,
        left: a.shape(),
        right: b.shape(),
    }
}

#[inline]
pub(crate) fn axpy<T: Real>(alpha: T, x: &[T], y: &mut [T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[inline]
pub(crate) fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    // Four independent accumulators let the compiler vectorise the loop.
    let mut acc = [T::zero(); 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = 4 * c;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in 4 * chunks..a.len() {
        s += a[i] * b[i];
    }
    s
}
