//! Small dense second-order tensors (at most 3×3) with the Frobenius
//! inner product, plus the matrix type used for fourth-order derivative
//! tensors acting on them.

use std::fmt;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use nalgebra::DMatrix;

/// Maximum number of rows or columns.
pub const MAX_DIM: usize = 3;

/// A `rows × cols` real matrix stored row-major in a fixed buffer.
///
/// Rows index vector components and columns index spatial directions, so
/// the gradient of a vector field has entries `∂u_i/∂x_j` at `(i, j)`.
#[derive(Clone, Copy, PartialEq)]
pub struct Tensor {
    rows: usize,
    cols: usize,
    data: [f64; MAX_DIM * MAX_DIM],
}

/// Fourth-order tensor flattened to an `m × m` matrix, `m = rows * cols`,
/// using the row-major flattening of [`Tensor::as_slice`].
pub type TensorMap = DMatrix<f64>;

impl Tensor {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(
            (1..=MAX_DIM).contains(&rows) && (1..=MAX_DIM).contains(&cols),
            "tensor shape {rows}x{cols} unsupported"
        );
        Tensor {
            rows,
            cols,
            data: [0.0; MAX_DIM * MAX_DIM],
        }
    }

    /// 1×1 tensor, the scalar case `d = N = 1`.
    pub fn scalar(value: f64) -> Self {
        let mut t = Tensor::zeros(1, 1);
        t.data[0] = value;
        t
    }

    pub fn identity(dim: usize) -> Self {
        let mut t = Tensor::zeros(dim, dim);
        for i in 0..dim {
            t[(i, i)] = 1.0;
        }
        t
    }

    pub fn from_slice(rows: usize, cols: usize, values: &[f64]) -> Self {
        assert_eq!(values.len(), rows * cols, "value count mismatch");
        let mut t = Tensor::zeros(rows, cols);
        t.data[..rows * cols].copy_from_slice(values);
        t
    }

    pub fn from_rows<const C: usize>(rows: &[[f64; C]]) -> Self {
        let mut t = Tensor::zeros(rows.len(), C);
        for (i, row) in rows.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                t[(i, j)] = *v;
            }
        }
        t
    }

    /// Unit tensor with equal diagonal entries; a default direction.
    pub fn unit_diagonal(rows: usize, cols: usize) -> Self {
        let mut t = Tensor::zeros(rows, cols);
        let k = rows.min(cols);
        for i in 0..k {
            t[(i, i)] = 1.0 / (k as f64).sqrt();
        }
        t
    }

    /// Outer product `a ⊗ b`.
    pub fn outer(a: &[f64], b: &[f64]) -> Self {
        let mut t = Tensor::zeros(a.len(), b.len());
        for (i, ai) in a.iter().enumerate() {
            for (j, bj) in b.iter().enumerate() {
                t[(i, j)] = ai * bj;
            }
        }
        t
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Number of entries, the dimension of the tensor space.
    #[inline]
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data[..self.rows * self.cols]
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        let n = self.rows * self.cols;
        &mut self.data[..n]
    }

    pub fn same_shape(&self, other: &Tensor) -> bool {
        self.rows == other.rows && self.cols == other.cols
    }

    /// Frobenius inner product `A·B = Σ A_ij B_ij`.
    #[inline]
    pub fn dot(&self, other: &Tensor) -> f64 {
        debug_assert!(self.same_shape(other));
        self.as_slice().iter().zip(other.as_slice()).map(|(a, b)| a * b).sum()
    }

    #[inline]
    pub fn norm_squared(&self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn norm(&self) -> f64 {
        self.norm_squared().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.as_slice().iter().all(|v| v.is_finite())
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Exact symmetry check.
    pub fn is_symmetric(&self) -> bool {
        self.is_square() && (0..self.rows).all(|i| (0..i).all(|j| self[(i, j)] == self[(j, i)]))
    }

    pub fn transpose(&self) -> Tensor {
        let mut t = Tensor::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    /// `½(A + Aᵀ)`; the result is exactly symmetric.
    pub fn symmetric_part(&self) -> Tensor {
        assert!(self.is_square(), "symmetric part of a non-square tensor");
        let mut t = *self;
        for i in 0..self.rows {
            for j in 0..i {
                let m = 0.5 * (self[(i, j)] + self[(j, i)]);
                t[(i, j)] = m;
                t[(j, i)] = m;
            }
        }
        t
    }

    pub fn scaled(&self, factor: f64) -> Tensor {
        let mut t = *self;
        t.as_mut_slice().iter_mut().for_each(|v| *v *= factor);
        t
    }

    /// `self / |self|`, or `None` for the zero tensor.
    pub fn normalized(&self) -> Option<Tensor> {
        let n = self.norm();
        (n > 0.0).then(|| self.scaled(1.0 / n))
    }

    /// Largest absolute entry difference.
    pub fn max_abs_diff(&self, other: &Tensor) -> f64 {
        self.as_slice()
            .iter()
            .zip(other.as_slice())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Apply a flattened fourth-order tensor: `(M B)_k = Σ_l M_kl B_l`.
    pub fn apply(map: &TensorMap, b: &Tensor) -> Tensor {
        debug_assert_eq!(map.nrows(), b.len());
        let mut out = Tensor::zeros(b.rows, b.cols);
        let bs = b.as_slice();
        for (k, o) in out.as_mut_slice().iter_mut().enumerate() {
            *o = (0..bs.len()).map(|l| map[(k, l)] * bs[l]).sum();
        }
        out
    }

    /// Bilinear form `(B, C)_M = Σ_kl M_kl B_k C_l`.
    pub fn bilinear(map: &TensorMap, b: &Tensor, c: &Tensor) -> f64 {
        b.dot(&Tensor::apply(map, c))
    }
}

impl Index<(usize, usize)> for Tensor {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Tensor {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl Add for Tensor {
    type Output = Tensor;
    fn add(mut self, rhs: Tensor) -> Tensor {
        self += rhs;
        self
    }
}

impl AddAssign for Tensor {
    fn add_assign(&mut self, rhs: Tensor) {
        debug_assert!(self.same_shape(&rhs));
        for (a, b) in self.as_mut_slice().iter_mut().zip(rhs.as_slice()) {
            *a += b;
        }
    }
}

impl Sub for Tensor {
    type Output = Tensor;
    fn sub(mut self, rhs: Tensor) -> Tensor {
        self -= rhs;
        self
    }
}

impl SubAssign for Tensor {
    fn sub_assign(&mut self, rhs: Tensor) {
        debug_assert!(self.same_shape(&rhs));
        for (a, b) in self.as_mut_slice().iter_mut().zip(rhs.as_slice()) {
            *a -= b;
        }
    }
}

impl Mul<f64> for Tensor {
    type Output = Tensor;
    fn mul(self, rhs: f64) -> Tensor {
        self.scaled(rhs)
    }
}

impl Mul<Tensor> for f64 {
    type Output = Tensor;
    fn mul(self, rhs: Tensor) -> Tensor {
        rhs.scaled(self)
    }
}

impl Neg for Tensor {
    type Output = Tensor;
    fn neg(self) -> Tensor {
        self.scaled(-1.0)
    }
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Tensor{}x{}[", self.rows, self.cols)?;
        for i in 0..self.rows {
            if i > 0 {
                write!(f, "; ")?;
            }
            for j in 0..self.cols {
                if j > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{:e}", self[(i, j)])?;
            }
        }
        write!(f, "]")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frobenius_norm_of_identity() {
        let i2 = Tensor::identity(2);
        assert_eq!(i2.norm_squared(), 2.0);
        assert!((i2.norm() - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn symmetric_part_is_exactly_symmetric() {
        let t = Tensor::from_rows(&[[0.1, 0.7, -0.3], [0.2, 1.0, 0.4], [0.9, -0.5, 2.0]]);
        let s = t.symmetric_part();
        assert!(s.is_symmetric());
        assert!(!t.is_symmetric());
        assert_eq!(s[(0, 1)], 0.5 * (0.7 + 0.2));
    }

    #[test]
    fn apply_identity_map() {
        let t = Tensor::from_rows(&[[1.0, 2.0], [3.0, 4.0]]);
        let id = TensorMap::identity(4, 4);
        assert_eq!(Tensor::apply(&id, &t), t);
        assert_eq!(Tensor::bilinear(&id, &t, &t), t.norm_squared());
    }

    #[test]
    fn outer_product_shape() {
        let t = Tensor::outer(&[1.0, 2.0], &[3.0, 4.0, 5.0]);
        assert_eq!((t.rows(), t.cols()), (2, 3));
        assert_eq!(t[(1, 2)], 10.0);
    }
}
