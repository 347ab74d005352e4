//! Small dense Hermitian algebra: Cholesky, cyclic Jacobi eigensolver and
//! the generalized problem `K v = lambda M v`.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use libm::sqrt;

use crate::error::FemError;
use crate::scalar::Scalar;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<T> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<T>,
}

impl<T: Scalar> DenseMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix { rows, cols, data: vec![T::ZERO; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::ONE;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> T) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        (0..self.rows)
            .map(|i| {
                self.data[i * self.cols..(i + 1) * self.cols]
                    .iter()
                    .zip(x)
                    .fold(T::ZERO, |acc, (&a, &b)| acc + a * b)
            })
            .collect()
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    /// Makes the matrix exactly Hermitian by averaging with its adjoint.
    pub fn symmetrize(&mut self) {
        for i in 0..self.rows {
            self[(i, i)] = T::from_real(self[(i, i)].re());
            for j in i + 1..self.cols {
                let avg = (self[(i, j)] + self[(j, i)].conj()).scale(0.5);
                self[(i, j)] = avg;
                self[(j, i)] = avg.conj();
            }
        }
    }
}

impl<T> Index<(usize, usize)> for DenseMatrix<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for DenseMatrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

/// Lower factor `L` with `A = L L^H`.
pub fn cholesky<T: Scalar>(a: &DenseMatrix<T>) -> Result<DenseMatrix<T>, FemError> {
    let n = a.rows;
    let mut l: DenseMatrix<T> = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)].re();
        for k in 0..j {
            d -= l[(j, k)].abs2();
        }
        if !(d > 0.0) {
            return Err(FemError::NotPositiveDefinite { pivot: j, value: d });
        }
        let ljj = sqrt(d);
        l[(j, j)] = T::from_real(ljj);
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s.scale(1.0 / ljj);
        }
    }
    Ok(l)
}

/// Solves `L y = b` in place.
fn forward<T: Scalar>(l: &DenseMatrix<T>, b: &mut [T]) {
    for i in 0..l.rows {
        let mut s = b[i];
        for k in 0..i {
            s -= l[(i, k)] * b[k];
        }
        b[i] = s.scale(1.0 / l[(i, i)].re());
    }
}

/// Solves `L^H x = b` in place.
fn backward<T: Scalar>(l: &DenseMatrix<T>, b: &mut [T]) {
    for i in (0..l.rows).rev() {
        let mut s = b[i];
        for k in i + 1..l.rows {
            s -= l[(k, i)].conj() * b[k];
        }
        b[i] = s.scale(1.0 / l[(i, i)].re());
    }
}

/// Eigen-decomposition of a Hermitian matrix; eigenvalues ascending,
/// eigenvectors as columns of the returned unitary matrix.
pub fn hermitian_eigen<T: Scalar + JacobiPhase>(a: &DenseMatrix<T>) -> (Vec<f64>, DenseMatrix<T>) {
    let n = a.rows;
    let mut a = a.clone();
    a.symmetrize();
    let mut v = DenseMatrix::identity(n);
    let frob: f64 = a.data.iter().map(|x| x.abs2()).sum::<f64>();
    for _sweep in 0..60 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)].abs2())
            .sum();
        if off <= 1e-30 * frob || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let b = a[(p, q)];
                let babs = sqrt(b.abs2());
                if babs == 0.0 || babs < 1e-300 {
                    continue;
                }
                let (app, aqq) = (a[(p, p)].re(), a[(q, q)].re());
                if babs < 1e-18 * (app.abs() + aqq.abs()) {
                    a[(p, q)] = T::ZERO;
                    a[(q, p)] = T::ZERO;
                    continue;
                }
                // phase = e^{-i arg b}, so b * phase = |b|.
                let phase = T::unit_phase(b);
                let theta = (aqq - app) / (2.0 * babs);
                let t = if theta >= 0.0 {
                    1.0 / (theta + sqrt(theta * theta + 1.0))
                } else {
                    -1.0 / (-theta + sqrt(theta * theta + 1.0))
                };
                let c = 1.0 / sqrt(t * t + 1.0);
                let s = t * c;
                // U = [[c, s], [-s phase, c phase]] on the (p, q) plane.
                let upp = T::from_real(c);
                let upq = T::from_real(s);
                let uqp = phase.scale(-s);
                let uqq = phase.scale(c);
                for k in 0..n {
                    let (x, y) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = x * upp + y * uqp;
                    a[(k, q)] = x * upq + y * uqq;
                }
                for k in 0..n {
                    let (x, y) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = upp.conj() * x + uqp.conj() * y;
                    a[(q, k)] = upq.conj() * x + uqq.conj() * y;
                }
                a[(p, q)] = T::ZERO;
                a[(q, p)] = T::ZERO;
                a[(p, p)] = T::from_real(a[(p, p)].re());
                a[(q, q)] = T::from_real(a[(q, q)].re());
                for k in 0..n {
                    let (x, y) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = x * upp + y * uqp;
                    v[(k, q)] = x * upq + y * uqq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].re().total_cmp(&a[(j, j)].re()));
    let values = order.iter().map(|&i| a[(i, i)].re()).collect();
    let vectors = DenseMatrix::from_fn(n, n, |i, j| v[(i, order[j])]);
    (values, vectors)
}

/// Unit-modulus factor rotating an entry onto the positive real axis.
pub trait JacobiPhase: Scalar {
    fn unit_phase(b: Self) -> Self;
}

impl JacobiPhase for f64 {
    fn unit_phase(b: Self) -> Self {
        if b < 0.0 {
            -1.0
        } else {
            1.0
        }
    }
}

impl JacobiPhase for num_complex::Complex64 {
    fn unit_phase(b: Self) -> Self {
        let r = sqrt(b.abs2());
        num_complex::Complex64::new(b.re / r, -b.im / r)
    }
}

/// Generalized Hermitian-definite problem `K v = lambda M v`. Eigenvectors
/// are `M`-orthonormal columns.
pub fn generalized_eigen<T: Scalar + JacobiPhase>(
    k: &DenseMatrix<T>,
    m: &DenseMatrix<T>,
) -> Result<(Vec<f64>, DenseMatrix<T>), FemError> {
    let n = k.rows;
    let l = cholesky(m)?;
    // C = L^{-1} K L^{-H}
    let mut w = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let mut col = k.column(j);
        forward(&l, &mut col);
        for i in 0..n {
            w[(i, j)] = col[i];
        }
    }
    // w = L^{-1} K; C = (L^{-1} w^H)^H
    let mut c = DenseMatrix::zeros(n, n);
    for i in 0..n {
        let mut row: Vec<T> = (0..n).map(|j| w[(i, j)].conj()).collect();
        forward(&l, &mut row);
        for j in 0..n {
            c[(i, j)] = row[j].conj();
        }
    }
    let (values, y) = hermitian_eigen(&c);
    let mut vectors = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let mut col = y.column(j);
        backward(&l, &mut col);
        for i in 0..n {
            vectors[(i, j)] = col[i];
        }
    }
    Ok((values, vectors))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use proptest::prelude::*;

    fn random_hermitian(n: usize, seed: u64) -> DenseMatrix<Complex64> {
        let mut s = seed;
        let mut next = move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let mut a = DenseMatrix::zeros(n, n);
        for i in 0..n {
            a[(i, i)] = Complex64::new(next(), 0.0);
            for j in i + 1..n {
                let v = Complex64::new(next(), next());
                a[(i, j)] = v;
                a[(j, i)] = v.conj();
            }
        }
        a
    }

    #[test]
    fn jacobi_reconstructs() {
        let a = random_hermitian(12, 3);
        let (vals, vecs) = hermitian_eigen(&a);
        for j in 0..12 {
            let v = vecs.column(j);
            let av = a.mul_vec(&v);
            for i in 0..12 {
                assert!((av[i] - v[i] * vals[j]).norm() < 1e-12);
            }
        }
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn generalized_matches_known_pair() {
        // K = diag(2, 6), M = diag(1, 2): eigenvalues 2 and 3.
        let k = DenseMatrix::from_fn(2, 2, |i, j| if i == j { [2.0, 6.0][i] } else { 0.0 });
        let m = DenseMatrix::from_fn(2, 2, |i, j| if i == j { [1.0, 2.0][i] } else { 0.0 });
        let (vals, _) = generalized_eigen(&k, &m).unwrap();
        assert!((vals[0] - 2.0).abs() < 1e-14 && (vals[1] - 3.0).abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn trace_is_preserved(seed in 0u64..10_000, n in 2usize..9) {
            let a = random_hermitian(n, seed);
            let (vals, _) = hermitian_eigen(&a);
            let tr: f64 = (0..n).map(|i| a[(i, i)].re).sum();
            prop_assert!((vals.iter().sum::<f64>() - tr).abs() < 1e-11);
        }
    }
}
