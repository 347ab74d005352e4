//! Compressed sparse row matrices and an up-looking sparse Cholesky
//! factorization `P A P^T = L L^H` with a geometric nested-dissection
//! ordering.

use alloc::vec;
use alloc::vec::Vec;

use libm::sqrt;

use crate::error::FemError;
use crate::geometry::Point;
use crate::scalar::Scalar;

/// Row-compressed nonzero structure with sorted column indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Pattern {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
}

impl Pattern {
    /// Pattern of a finite-element matrix whose elements couple all pairs of
    /// their listed unknowns.
    pub fn from_elements<'a>(n: usize, elements: impl Iterator<Item = &'a [usize]>) -> Self {
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); n];
        for el in elements {
            for &i in el {
                for &j in el {
                    rows[i].push(j);
                }
            }
        }
        for (i, row) in rows.iter_mut().enumerate() {
            row.push(i);
            row.sort_unstable();
            row.dedup();
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        for row in rows {
            col_idx.extend_from_slice(&row);
            row_ptr.push(col_idx.len());
        }
        Pattern { n, row_ptr, col_idx }
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn row(&self, i: usize) -> &[usize] {
        &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]]
    }

    /// Storage slot of entry `(i, j)`.
    pub fn find(&self, i: usize, j: usize) -> Option<usize> {
        let start = self.row_ptr[i];
        self.row(i).binary_search(&j).ok().map(|k| start + k)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix<T> {
    pub pattern: Pattern,
    pub values: Vec<T>,
}

impl<T: Scalar> CsrMatrix<T> {
    pub fn zeros(pattern: Pattern) -> Self {
        let values = vec![T::ZERO; pattern.nnz()];
        CsrMatrix { pattern, values }
    }

    pub fn n(&self) -> usize {
        self.pattern.n
    }

    /// Adds `v` to entry `(i, j)`; the entry must be in the pattern.
    pub fn add(&mut self, i: usize, j: usize, v: T) {
        let slot = self.pattern.find(i, j).expect("entry outside sparsity pattern");
        self.values[slot] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.pattern.find(i, j).map_or(T::ZERO, |s| self.values[s])
    }

    /// `y = A x`.
    pub fn matvec(&self, x: &[T], y: &mut [T]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = T::ZERO;
            for s in self.pattern.row_ptr[i]..self.pattern.row_ptr[i + 1] {
                acc += self.values[s] * x[self.pattern.col_idx[s]];
            }
            *yi = acc;
        }
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::ZERO; self.n()];
        self.matvec(x, &mut y);
        y
    }

    /// Entrywise `a * self + b * other` on a shared pattern.
    pub fn combine(&self, a: T, other: &CsrMatrix<T>, b: T) -> CsrMatrix<T> {
        assert_eq!(self.pattern, other.pattern, "patterns differ");
        CsrMatrix {
            pattern: self.pattern.clone(),
            values: self.values.iter().zip(&other.values).map(|(&x, &y)| a * x + b * y).collect(),
        }
    }

    /// `max |A_ij - conj(A_ji)| / max |A_ij|`.
    pub fn hermitian_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        let mut scale = 0.0f64;
        for i in 0..self.n() {
            for s in self.pattern.row_ptr[i]..self.pattern.row_ptr[i + 1] {
                let j = self.pattern.col_idx[s];
                let v = self.values[s];
                scale = scale.max(v.abs2());
                worst = worst.max((v - self.get(j, i).conj()).abs2());
            }
        }
        if scale == 0.0 {
            0.0
        } else {
            sqrt(worst / scale)
        }
    }

    pub fn to_dense(&self) -> crate::dense::DenseMatrix<T> {
        let mut d = crate::dense::DenseMatrix::zeros(self.n(), self.n());
        for i in 0..self.n() {
            for s in self.pattern.row_ptr[i]..self.pattern.row_ptr[i + 1] {
                d[(i, self.pattern.col_idx[s])] = self.values[s];
            }
        }
        d
    }
}

impl CsrMatrix<f64> {
    pub fn to_complex(&self) -> CsrMatrix<num_complex::Complex64> {
        CsrMatrix {
            pattern: self.pattern.clone(),
            values: self.values.iter().map(|&v| num_complex::Complex64::new(v, 0.0)).collect(),
        }
    }
}

/// Fill-reducing symmetric permutation: `perm[new] = old`, `inv[old] = new`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ordering {
    pub perm: Vec<usize>,
    pub inv: Vec<usize>,
}

impl Ordering {
    pub fn identity(n: usize) -> Self {
        Ordering { perm: (0..n).collect(), inv: (0..n).collect() }
    }

    fn from_perm(perm: Vec<usize>) -> Self {
        let mut inv = vec![0; perm.len()];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        Ordering { perm, inv }
    }

    /// Recursive coordinate bisection; each separator is the boundary layer
    /// of the smaller side and is numbered after both halves.
    pub fn nested_dissection(pattern: &Pattern, coords: &[Point]) -> Self {
        let n = pattern.n;
        assert_eq!(coords.len(), n);
        let mut state = Dissection { pattern, coords, stamp: vec![0; n], side: vec![0; n], next_stamp: 0 };
        let mut out = Vec::with_capacity(n);
        let mut all: Vec<usize> = (0..n).collect();
        state.dissect(&mut all, &mut out);
        debug_assert_eq!(out.len(), n);
        Ordering::from_perm(out)
    }
}

struct Dissection<'a> {
    pattern: &'a Pattern,
    coords: &'a [Point],
    stamp: Vec<u32>,
    side: Vec<u8>,
    next_stamp: u32,
}

const LEAF_SIZE: usize = 48;
const CUT_FRACTIONS: [f64; 9] = [0.3, 0.35, 0.4, 0.45, 0.5, 0.55, 0.6, 0.65, 0.7];

impl Dissection<'_> {
    /// Marks `set[..k]` as side 0 and the rest as side 1; returns the
    /// smaller border and the side sizes left after removing it.
    fn split(&mut self, set: &[usize], k: usize) -> (usize, usize, usize) {
        self.next_stamp += 1;
        let stamp = self.next_stamp;
        for (i, &v) in set.iter().enumerate() {
            self.stamp[v] = stamp;
            self.side[v] = u8::from(i >= k);
        }
        let mut border = [0usize; 2];
        for &v in set {
            let s = self.side[v];
            if self.touches(v, stamp, s) {
                border[s as usize] += 1;
            }
        }
        let (na, nb) = (k, set.len() - k);
        if border[0] <= border[1] {
            (border[0], na - border[0], nb)
        } else {
            (border[1], na, nb - border[1])
        }
    }

    fn touches(&self, v: usize, stamp: u32, s: u8) -> bool {
        self.pattern.row(v).iter().any(|&w| w != v && self.stamp[w] == stamp && self.side[w] != s)
    }

    fn dissect(&mut self, set: &mut [usize], out: &mut Vec<usize>) {
        if set.len() <= LEAF_SIZE {
            out.extend_from_slice(set);
            return;
        }
        // Candidate cuts along both axes at several ranks; keep the one with
        // the smallest ratio cut |S| / (|A| |B|).
        let coords = self.coords;
        let mut best: Option<(f64, usize, usize)> = None;
        for axis in 0..2 {
            set.sort_unstable_by(|&a, &b| coords[a][axis].total_cmp(&coords[b][axis]).then(a.cmp(&b)));
            for step in 0..CUT_FRACTIONS.len() {
                let k = (CUT_FRACTIONS[step] * set.len() as f64) as usize;
                let (sep, a, b) = self.split(set, k);
                let cost = sep as f64 / ((a.max(1) * b.max(1)) as f64);
                if a > 0 && b > 0 && best.map_or(true, |(c, _, _)| cost < c) {
                    best = Some((cost, axis, k));
                }
            }
        }
        let Some((_, axis, k)) = best else {
            out.extend_from_slice(set);
            return;
        };
        set.sort_unstable_by(|&a, &b| coords[a][axis].total_cmp(&coords[b][axis]).then(a.cmp(&b)));
        self.split(set, k);
        let stamp = self.next_stamp;
        let mut border = [Vec::new(), Vec::new()];
        for &v in set.iter() {
            let s = self.side[v];
            if self.touches(v, stamp, s) {
                border[s as usize].push(v);
            }
        }
        let sep_side = if border[0].len() <= border[1].len() { 0u8 } else { 1u8 };
        let separator = core::mem::take(&mut border[sep_side as usize]);
        for &v in &separator {
            self.side[v] = 2;
        }
        let mut left: Vec<usize> = set.iter().copied().filter(|&v| self.side[v] == 0).collect();
        let mut right: Vec<usize> = set.iter().copied().filter(|&v| self.side[v] == 1).collect();
        if left.is_empty() || right.is_empty() {
            out.extend_from_slice(set);
            return;
        }
        self.dissect(&mut left, out);
        self.dissect(&mut right, out);
        out.extend_from_slice(&separator);
    }
}

/// Sparse Cholesky factor of a Hermitian positive definite matrix.
#[derive(Debug, Clone)]
pub struct SparseCholesky<T> {
    n: usize,
    ordering: Ordering,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<T>,
}

impl<T: Scalar> SparseCholesky<T> {
    pub fn factor(a: &CsrMatrix<T>, ordering: &Ordering) -> Result<Self, FemError> {
        let n = a.n();
        // Upper triangle of C = P A P^T by columns: entries (i, C(i,k)), i <= k.
        let mut upper: Vec<Vec<(usize, T)>> = vec![Vec::new(); n];
        for r in 0..n {
            let k = ordering.inv[r];
            for s in a.pattern.row_ptr[r]..a.pattern.row_ptr[r + 1] {
                let i = ordering.inv[a.pattern.col_idx[s]];
                if i <= k {
                    upper[k].push((i, a.values[s].conj()));
                }
            }
        }
        let parent = etree(&upper);

        // Column counts from the row patterns.
        let mut counts = vec![1usize; n];
        let mut mark = vec![usize::MAX; n];
        let mut stack = Vec::new();
        let mut pattern_k = Vec::new();
        for k in 0..n {
            row_pattern(&upper[k], k, &parent, &mut mark, &mut stack, &mut pattern_k);
            for &i in &pattern_k {
                counts[i] += 1;
            }
        }
        let mut col_ptr = vec![0usize; n + 1];
        for j in 0..n {
            col_ptr[j + 1] = col_ptr[j] + counts[j];
        }
        let nnz = col_ptr[n];
        let mut row_idx = vec![0usize; nnz];
        let mut values = vec![T::ZERO; nnz];
        let mut next: Vec<usize> = col_ptr[..n].to_vec();
        let mut x = vec![T::ZERO; n];
        mark.iter_mut().for_each(|m| *m = usize::MAX);

        for k in 0..n {
            row_pattern(&upper[k], k, &parent, &mut mark, &mut stack, &mut pattern_k);
            let mut d = 0.0;
            for &(i, v) in &upper[k] {
                if i == k {
                    d += v.re();
                } else {
                    x[i] += v;
                }
            }
            // Pattern is in topological order (descendants first).
            for &i in &pattern_k {
                let lki = x[i].scale(1.0 / values[col_ptr[i]].re());
                x[i] = T::ZERO;
                for p in col_ptr[i] + 1..next[i] {
                    let r = row_idx[p];
                    x[r] -= values[p] * lki;
                }
                d -= lki.abs2();
                let p = next[i];
                next[i] += 1;
                row_idx[p] = k;
                values[p] = lki.conj();
            }
            if !(d > 0.0) {
                return Err(FemError::NotPositiveDefinite { pivot: k, value: d });
            }
            let p = next[k];
            next[k] += 1;
            row_idx[p] = k;
            values[p] = T::from_real(sqrt(d));
        }
        Ok(SparseCholesky { n, ordering: ordering.clone(), col_ptr, row_idx, values })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn factor_nnz(&self) -> usize {
        self.values.len()
    }

    /// Overwrites `b` with `A^{-1} b`.
    pub fn solve_in_place(&self, b: &mut [T]) {
        let n = self.n;
        let mut x: Vec<T> = (0..n).map(|k| b[self.ordering.perm[k]]).collect();
        for j in 0..n {
            let start = self.col_ptr[j];
            let xj = x[j].scale(1.0 / self.values[start].re());
            x[j] = xj;
            for p in start + 1..self.col_ptr[j + 1] {
                x[self.row_idx[p]] -= self.values[p] * xj;
            }
        }
        for j in (0..n).rev() {
            let start = self.col_ptr[j];
            let mut acc = x[j];
            for p in start + 1..self.col_ptr[j + 1] {
                acc -= self.values[p].conj() * x[self.row_idx[p]];
            }
            x[j] = acc.scale(1.0 / self.values[start].re());
        }
        for k in 0..n {
            b[self.ordering.perm[k]] = x[k];
        }
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

fn etree<T>(upper: &[Vec<(usize, T)>]) -> Vec<usize> {
    let n = upper.len();
    let mut parent = vec![usize::MAX; n];
    let mut ancestor = vec![usize::MAX; n];
    for k in 0..n {
        for &(i0, _) in &upper[k] {
            let mut i = i0;
            while i != usize::MAX && i < k {
                let next = ancestor[i];
                ancestor[i] = k;
                if next == usize::MAX {
                    parent[i] = k;
                    break;
                }
                i = next;
            }
        }
    }
    parent
}

/// Nonzero pattern of row `k` of `L` (excluding the diagonal), in an order
/// where every node precedes its elimination-tree ancestors.
fn row_pattern<T>(
    col: &[(usize, T)],
    k: usize,
    parent: &[usize],
    mark: &mut [usize],
    stack: &mut Vec<usize>,
    out: &mut Vec<usize>,
) {
    out.clear();
    mark[k] = k;
    for &(i0, _) in col {
        if i0 >= k {
            continue;
        }
        stack.clear();
        let mut i = i0;
        while mark[i] != k {
            stack.push(i);
            mark[i] = k;
            i = parent[i];
        }
        out.append(stack);
    }
    // Parents always carry larger indices than their children.
    out.sort_unstable();
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::DenseMatrix;
    use num_complex::Complex64;

    fn laplacian_grid(nx: usize, ny: usize) -> (CsrMatrix<f64>, Vec<Point>) {
        let idx = |i: usize, j: usize| j * nx + i;
        let mut els: Vec<Vec<usize>> = Vec::new();
        for j in 0..ny {
            for i in 0..nx {
                if i + 1 < nx {
                    els.push(vec![idx(i, j), idx(i + 1, j)]);
                }
                if j + 1 < ny {
                    els.push(vec![idx(i, j), idx(i, j + 1)]);
                }
            }
        }
        let pattern = Pattern::from_elements(nx * ny, els.iter().map(|e| e.as_slice()));
        let mut a = CsrMatrix::zeros(pattern);
        for e in &els {
            a.add(e[0], e[0], 1.0);
            a.add(e[1], e[1], 1.0);
            a.add(e[0], e[1], -1.0);
            a.add(e[1], e[0], -1.0);
        }
        for i in 0..nx * ny {
            a.add(i, i, 0.1);
        }
        let coords = (0..ny).flat_map(|j| (0..nx).map(move |i| [i as f64, j as f64])).collect();
        (a, coords)
    }

    #[test]
    fn real_factor_solves() {
        let (a, coords) = laplacian_grid(30, 17);
        let ord = Ordering::nested_dissection(&a.pattern, &coords);
        let chol = SparseCholesky::factor(&a, &ord).unwrap();
        let b: Vec<f64> = (0..a.n()).map(|i| ((i * 7919) % 13) as f64 - 6.0).collect();
        let x = chol.solve(&b);
        let r = a.mul_vec(&x);
        let err = r.iter().zip(&b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        assert!(err < 1e-11, "{err}");
    }

    #[test]
    fn complex_hermitian_factor_matches_dense() {
        let (a, coords) = laplacian_grid(9, 7);
        let mut c = a.to_complex();
        // Skew-Hermitian-free imaginary coupling keeps C Hermitian.
        for i in 0..c.n() {
            let cols: Vec<usize> = c.pattern.row(i).to_vec();
            for j in cols {
                if j > i {
                    let v = Complex64::new(0.0, 0.05 * ((i + 2 * j) % 5) as f64);
                    c.add(i, j, v);
                    c.add(j, i, v.conj());
                }
            }
        }
        assert!(c.hermitian_defect() < 1e-15);
        let ord = Ordering::nested_dissection(&c.pattern, &coords);
        let chol = SparseCholesky::factor(&c, &ord).unwrap();
        let b: Vec<Complex64> = (0..c.n()).map(|i| Complex64::new(i as f64, 1.0 - i as f64 * 0.5)).collect();
        let x = chol.solve(&b);
        let dense: DenseMatrix<Complex64> = c.to_dense();
        let r = dense.mul_vec(&x);
        let err = r.iter().zip(&b).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max);
        assert!(err < 1e-10, "{err}");
    }

    #[test]
    fn identity_ordering_agrees_with_dissection() {
        let (a, coords) = laplacian_grid(12, 12);
        let b: Vec<f64> = (0..a.n()).map(|i| (i as f64).sin()).collect();
        let x1 = SparseCholesky::factor(&a, &Ordering::identity(a.n())).unwrap().solve(&b);
        let x2 = SparseCholesky::factor(&a, &Ordering::nested_dissection(&a.pattern, &coords)).unwrap().solve(&b);
        for (p, q) in x1.iter().zip(&x2) {
            assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn indefinite_is_rejected() {
        let (mut a, _) = laplacian_grid(3, 3);
        a.add(4, 4, -10.0);
        assert!(matches!(
            SparseCholesky::factor(&a, &Ordering::identity(9)),
            Err(FemError::NotPositiveDefinite { .. })
        ));
    }
}
