//! Small dense complex linear algebra: products, Hermitian transpose,
//! right pseudo-inverse through a Cholesky factorization of the Gram matrix,
//! and Frobenius norms.
//!
//! Matrices here are tiny (the Gram matrices are K×K with K ≤ 8), so the
//! kernels are straight loops over a row-major buffer.

use std::fmt;
use std::ops::{Index, IndexMut};

use num_complex::Complex64;
use thiserror::Error;

/// Gram matrices whose 1-norm condition number exceeds this are treated as
/// singular.
pub const CONDITION_LIMIT: f64 = 1e12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("shape mismatch: {op} got {left:?} and {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("matrix is singular or ill-conditioned (condition estimate {condition:e})")]
    Singular { condition: f64 },
    #[error("buffer of length {len} cannot hold a {rows}x{cols} matrix")]
    BadBuffer { rows: usize, cols: usize, len: usize },
}

/// Dense complex matrix stored row-major.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self, NumericsError> {
        if data.len() != rows * cols {
            return Err(NumericsError::BadBuffer {
                rows,
                cols,
                len: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from nested rows. Panics if the rows are ragged.
    pub fn from_rows(rows: &[Vec<Complex64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Self { rows: r, cols: c, data }
    }

    /// Real diagonal matrix.
    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = Complex64::new(d, 0.0);
        }
        m
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
    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[Complex64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<Complex64> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Conjugate transpose.
    pub fn hermitian(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out[(c, r)] = self[(r, c)].conj();
            }
        }
        out
    }

    pub fn matmul(&self, rhs: &Self) -> Result<Self, NumericsError> {
        if self.cols != rhs.rows {
            return Err(NumericsError::ShapeMismatch {
                op: "matmul",
                left: self.shape(),
                right: rhs.shape(),
            });
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
            for (p, &a) in self.row(i).iter().enumerate() {
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(rhs.row(p)) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn sub(&self, rhs: &Self) -> Result<Self, NumericsError> {
        if self.shape() != rhs.shape() {
            return Err(NumericsError::ShapeMismatch {
                op: "sub",
                left: self.shape(),
                right: rhs.shape(),
            });
        }
        let data = self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect();
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(Complex64::norm_sqr).sum::<f64>().sqrt()
    }

    /// Right pseudo-inverse `A^H (A A^H)^{-1}` of a full-row-rank matrix.
    pub fn right_pinv(&self) -> Result<Self, NumericsError> {
        if self.rows > self.cols {
            return Err(NumericsError::ShapeMismatch {
                op: "right_pinv",
                left: self.shape(),
                right: self.shape(),
            });
        }
        let ah = self.hermitian();
        let gram = self.matmul(&ah)?;
        let mut inv = Self::zeros(self.rows, self.rows);
        hpd_inverse(gram.as_slice(), self.rows, inv.as_mut_slice())?;
        ah.matmul(&inv)
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;

    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &Complex64 {
        debug_assert!(r < self.rows && c < self.cols);
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Complex64 {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[r * self.cols + c]
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            write!(f, "  ")?;
            for z in self.row(r) {
                write!(f, "{:+.6}{:+.6}j ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

/// Inverts an `n×n` Hermitian positive definite matrix given row-major in
/// `a`, writing the inverse into `out`. Returns the 1-norm condition number.
///
/// Factorizes `A = L L^H`, inverts the triangular factor and forms
/// `A^{-1} = L^{-H} L^{-1}`. Works on caller-provided slices so hot loops can
/// pass stack buffers.
pub fn hpd_inverse(a: &[Complex64], n: usize, out: &mut [Complex64]) -> Result<f64, NumericsError> {
    debug_assert!(a.len() >= n * n && out.len() >= n * n);
    let zero = Complex64::new(0.0, 0.0);
    // Lower factor and its inverse live in `out` and a scratch buffer.
    let mut l = [zero; 64];
    let mut heap;
    let l: &mut [Complex64] = if n * n <= 64 {
        &mut l[..n * n]
    } else {
        heap = vec![zero; n * n];
        &mut heap
    };

    for j in 0..n {
        let mut d = a[j * n + j].re;
        for p in 0..j {
            d -= l[j * n + p].norm_sqr();
        }
        if d.is_nan() || d <= 0.0 || !d.is_finite() {
            return Err(NumericsError::Singular { condition: f64::INFINITY });
        }
        let djj = d.sqrt();
        l[j * n + j] = Complex64::new(djj, 0.0);
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for p in 0..j {
                s -= l[i * n + p] * l[j * n + p].conj();
            }
            l[i * n + j] = s / djj;
        }
    }

    // Invert L in place (lower triangular), column by column.
    for j in 0..n {
        l[j * n + j] = Complex64::new(1.0 / l[j * n + j].re, 0.0);
        for i in j + 1..n {
            let mut s = zero;
            for p in j..i {
                s -= l[i * n + p] * l[p * n + j];
            }
            l[i * n + j] = s * l[i * n + i].re.recip();
        }
    }

    // out = L^{-H} L^{-1}
    for i in 0..n {
        for j in 0..n {
            let mut s = zero;
            for p in i.max(j)..n {
                s += l[p * n + i].conj() * l[p * n + j];
            }
            out[i * n + j] = s;
        }
    }

    let norm1 = |m: &[Complex64]| {
        (0..n)
            .map(|c| (0..n).map(|r| m[r * n + c].norm()).sum::<f64>())
            .fold(0.0, f64::max)
    };
    let condition = norm1(a) * norm1(out);
    if !condition.is_finite() || condition > CONDITION_LIMIT {
        return Err(NumericsError::Singular { condition });
    }
    Ok(condition)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random(rows: usize, cols: usize, rng: &mut impl Rng) -> ComplexMatrix {
        let data = (0..rows * cols)
            .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        ComplexMatrix::from_vec(rows, cols, data).unwrap()
    }

    fn naive_matmul(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(a.rows(), b.cols());
        for i in 0..a.rows() {
            for j in 0..b.cols() {
                let mut s = c(0.0, 0.0);
                for p in 0..a.cols() {
                    s += a[(i, p)] * b[(p, j)];
                }
                out[(i, j)] = s;
            }
        }
        out
    }

    #[test]
    fn hermitian_cases() {
        assert_eq!(ComplexMatrix::identity(2).hermitian(), ComplexMatrix::identity(2));
        let j = ComplexMatrix::from_rows(&[vec![c(0.0, 1.0)]]);
        assert_eq!(j.hermitian()[(0, 0)], c(0.0, -1.0));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random(3, 2, &mut rng);
        assert_eq!(a.hermitian().shape(), (2, 3));
        assert_eq!(a.hermitian().hermitian(), a);
    }

    #[test]
    fn matmul_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random(3, 3, &mut rng);
        assert_eq!(a.matmul(&ComplexMatrix::identity(3)).unwrap(), a);

        let row = ComplexMatrix::from_rows(&[vec![c(1.0, 0.0), c(0.0, 1.0)]]);
        let col = ComplexMatrix::from_rows(&[vec![c(1.0, 0.0)], vec![c(0.0, 1.0)]]);
        let p = row.matmul(&col).unwrap();
        assert!(p[(0, 0)].norm() < 1e-15);

        let a = random(2, 3, &mut rng);
        let b = random(3, 2, &mut rng);
        let fast = a.matmul(&b).unwrap();
        let slow = naive_matmul(&a, &b);
        assert!(fast.sub(&slow).unwrap().frobenius_norm() < 1e-14);
    }

    #[test]
    fn matmul_shape_error() {
        let a = ComplexMatrix::zeros(2, 3);
        let err = a.matmul(&ComplexMatrix::zeros(2, 3)).unwrap_err();
        assert!(matches!(err, NumericsError::ShapeMismatch { .. }));
    }

    #[test]
    fn right_pinv_cases() {
        let i3 = ComplexMatrix::identity(3);
        assert!(i3.right_pinv().unwrap().sub(&i3).unwrap().frobenius_norm() < 1e-15);

        let d = ComplexMatrix::from_diag(&[2.0, 4.0]);
        let expected = ComplexMatrix::from_diag(&[0.5, 0.25]);
        assert!(d.right_pinv().unwrap().sub(&expected).unwrap().frobenius_norm() < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random(2, 6, &mut rng);
        let resid = a
            .matmul(&a.right_pinv().unwrap())
            .unwrap()
            .sub(&ComplexMatrix::identity(2))
            .unwrap()
            .frobenius_norm();
        assert!(resid < 1e-9, "residual {resid}");
    }

    #[test]
    fn right_pinv_rejects_rank_deficient() {
        let row = vec![c(1.0, 2.0), c(-0.5, 0.3), c(0.1, 0.0)];
        let a = ComplexMatrix::from_rows(&[row.clone(), row.iter().map(|z| z * 2.0).collect()]);
        assert!(matches!(a.right_pinv(), Err(NumericsError::Singular { .. })));
        assert!(matches!(
            ComplexMatrix::zeros(2, 2).right_pinv(),
            Err(NumericsError::Singular { .. })
        ));
        // Tall matrices have no right inverse.
        assert!(ComplexMatrix::zeros(3, 2).right_pinv().is_err());
    }

    #[test]
    fn frobenius_cases() {
        assert_eq!(ComplexMatrix::zeros(3, 4).frobenius_norm(), 0.0);
        assert!((ComplexMatrix::identity(5).frobenius_norm() - 5f64.sqrt()).abs() < 1e-15);
        let m = ComplexMatrix::from_rows(&[vec![c(3.0, 0.0), c(0.0, 4.0)]]);
        assert!((m.frobenius_norm() - 5.0).abs() < 1e-15);
    }

    #[test]
    fn bad_buffer() {
        assert!(ComplexMatrix::from_vec(2, 2, vec![c(0.0, 0.0); 3]).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = ComplexMatrix> {
            proptest::collection::vec((-2.0f64..2.0, -2.0f64..2.0), rows * cols).prop_map(move |v| {
                ComplexMatrix::from_vec(rows, cols, v.into_iter().map(|(r, i)| c(r, i)).collect())
                    .unwrap()
            })
        }

        proptest! {
            #[test]
            fn pinv_residual_bound(a in matrix(3, 7)) {
                if let Ok(p) = a.right_pinv() {
                    let r = a.matmul(&p).unwrap().sub(&ComplexMatrix::identity(3)).unwrap();
                    prop_assert!(r.frobenius_norm() <= 1e-9 * a.frobenius_norm().max(1.0));
                }
            }

            #[test]
            fn associativity(a in matrix(2, 3), b in matrix(3, 4), m in matrix(4, 2)) {
                let left = a.matmul(&b).unwrap().matmul(&m).unwrap();
                let right = a.matmul(&b.matmul(&m).unwrap()).unwrap();
                let diff = left.sub(&right).unwrap().frobenius_norm();
                prop_assert!(diff <= 1e-10 * left.frobenius_norm().max(1e-300) + 1e-14);
            }

            #[test]
            fn hermitian_of_product(a in matrix(3, 2), b in matrix(2, 4)) {
                let lhs = a.matmul(&b).unwrap().hermitian();
                let rhs = b.hermitian().matmul(&a.hermitian()).unwrap();
                prop_assert!(lhs.sub(&rhs).unwrap().frobenius_norm() <= 1e-12);
            }
        }
    }
}
