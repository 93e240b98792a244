//! Sparse storage helpers, a banded LU with partial pivoting, tridiagonal
//! solves and dense generalized symmetric eigenvalues.

use nalgebra::{DMatrix, DVector};
use sprs::CsMat;

use crate::error::{Error, Result};

/// CSR matrix from `(row, col, value)` triplets. Duplicates are summed in
/// the order they appear, so identical triplet lists give identical bits.
pub fn csr_from_triplets(rows: usize, cols: usize, mut triplets: Vec<(usize, usize, f64)>) -> CsMat<f64> {
    triplets.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    let mut indptr = vec![0usize; rows + 1];
    let mut indices = Vec::with_capacity(triplets.len());
    let mut data: Vec<f64> = Vec::with_capacity(triplets.len());
    let mut last: Option<(usize, usize)> = None;
    for (r, c, v) in triplets {
        assert!(r < rows && c < cols, "triplet ({r}, {c}) outside {rows}×{cols}");
        if last == Some((r, c)) {
            *data.last_mut().unwrap() += v;
        } else {
            indices.push(c);
            data.push(v);
            indptr[r + 1] += 1;
            last = Some((r, c));
        }
    }
    for r in 0..rows {
        indptr[r + 1] += indptr[r];
    }
    CsMat::new((rows, cols), indptr, indices, data)
}

pub fn mul_vec(a: &CsMat<f64>, x: &[f64]) -> Vec<f64> {
    assert_eq!(a.cols(), x.len());
    let mut y = vec![0.0; a.rows()];
    for (r, row) in a.outer_iterator().enumerate() {
        y[r] = row.iter().map(|(c, v)| v * x[c]).sum();
    }
    y
}

pub fn mul_transpose_vec(a: &CsMat<f64>, x: &[f64]) -> Vec<f64> {
    assert_eq!(a.rows(), x.len());
    let mut y = vec![0.0; a.cols()];
    for (r, row) in a.outer_iterator().enumerate() {
        for (c, v) in row.iter() {
            y[c] += v * x[r];
        }
    }
    y
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `xᵀ A x`.
pub fn quadratic_form(a: &CsMat<f64>, x: &[f64]) -> f64 {
    dot(x, &mul_vec(a, x))
}

pub fn to_dense(a: &CsMat<f64>) -> DMatrix<f64> {
    let mut d = DMatrix::zeros(a.rows(), a.cols());
    for (r, row) in a.outer_iterator().enumerate() {
        for (c, v) in row.iter() {
            d[(r, c)] += *v;
        }
    }
    d
}

/// Largest `|A - Aᵀ|` entry, relative to the largest `|A|` entry.
pub fn asymmetry(a: &CsMat<f64>) -> f64 {
    let d = to_dense(a);
    let scale = d.amax().max(f64::MIN_POSITIVE);
    (&d - d.transpose()).amax() / scale
}

/// Lower and upper bandwidths.
pub fn bandwidths(a: &CsMat<f64>) -> (usize, usize) {
    let mut kl = 0;
    let mut ku = 0;
    for (r, row) in a.outer_iterator().enumerate() {
        for (c, _) in row.iter() {
            if c < r {
                kl = kl.max(r - c);
            } else {
                ku = ku.max(c - r);
            }
        }
    }
    (kl, ku)
}

/// LU factorization of a banded matrix with partial pivoting. Row `i` stores
/// columns `i - kl ..= i + kl + ku` to hold the pivoting fill-in.
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
    pivots: Vec<usize>,
}

impl BandedLu {
    pub fn factor(a: &CsMat<f64>) -> Result<Self> {
        if a.rows() != a.cols() {
            return Err(Error::Internal(format!("LU of a non-square {}×{} matrix", a.rows(), a.cols())));
        }
        let n = a.rows();
        let (kl, ku) = bandwidths(a);
        let width = 2 * kl + ku + 1;
        let mut lu = Self {
            n,
            kl,
            ku,
            width,
            data: vec![0.0; n * width],
            pivots: vec![0; n],
        };
        let mut scale: f64 = 0.0;
        for (r, row) in a.outer_iterator().enumerate() {
            for (c, v) in row.iter() {
                *lu.at_mut(r, c) += *v;
                scale = scale.max(v.abs());
            }
        }
        let tiny = scale * f64::EPSILON * n as f64;
        let reach = kl + ku;
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = lu.at(k, k).abs();
            for i in k + 1..=last_row {
                let v = lu.at(i, k).abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if !(best > tiny) {
                return Err(Error::Numerical(format!("zero pivot in column {k} of {n} (|pivot| = {best:e})")));
            }
            lu.pivots[k] = p;
            let last_col = (k + reach).min(n - 1);
            if p != k {
                for j in k..=last_col {
                    let tmp = lu.at(k, j);
                    *lu.at_mut(k, j) = lu.at(p, j);
                    *lu.at_mut(p, j) = tmp;
                }
            }
            let pivot = lu.at(k, k);
            for i in k + 1..=last_row {
                let l = lu.at(i, k) / pivot;
                *lu.at_mut(i, k) = l;
                if l != 0.0 {
                    for j in k + 1..=last_col {
                        let u = lu.at(k, j);
                        *lu.at_mut(i, j) -= l * u;
                    }
                }
            }
        }
        Ok(lu)
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.width + (j + self.kl - i)]
    }

    #[inline]
    fn at_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        &mut self.data[i * self.width + (j + self.kl - i)]
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let n = self.n;
        let mut x = b.to_vec();
        for k in 0..n {
            x.swap(k, self.pivots[k]);
            let xk = x[k];
            if xk != 0.0 {
                for i in k + 1..=(k + self.kl).min(n - 1) {
                    x[i] -= self.at(i, k) * xk;
                }
            }
        }
        let reach = self.kl + self.ku;
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..=(i + reach).min(n - 1) {
                s -= self.at(i, j) * x[j];
            }
            x[i] = s / self.at(i, i);
        }
        x
    }

    /// Solves `Aᵀ x = b`.
    pub fn solve_transpose(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let n = self.n;
        let reach = self.kl + self.ku;
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for j in i.saturating_sub(reach)..i {
                s -= self.at(j, i) * y[j];
            }
            y[i] = s / self.at(i, i);
        }
        for k in (0..n).rev() {
            let mut s = 0.0;
            for i in k + 1..=(k + self.kl).min(n - 1) {
                s += self.at(i, k) * y[i];
            }
            y[k] -= s;
            y.swap(k, self.pivots[k]);
        }
        y
    }
}

/// Symmetric tridiagonal matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    pub diag: Vec<f64>,
    /// `off[i]` couples unknowns `i` and `i + 1`.
    pub off: Vec<f64>,
}

impl Tridiagonal {
    pub fn zeros(n: usize) -> Self {
        Self {
            diag: vec![0.0; n],
            off: vec![0.0; n.saturating_sub(1)],
        }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        if i == j {
            self.diag[i] += v;
        } else if i + 1 == j {
            self.off[i] += v;
        } else if j + 1 == i {
            // stored once
        } else {
            panic!("({i}, {j}) outside the tridiagonal band");
        }
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut s = self.diag[i] * x[i];
                if i > 0 {
                    s += self.off[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    s += self.off[i] * x[i + 1];
                }
                s
            })
            .collect()
    }

    /// Thomas algorithm; the matrix must be positive definite.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.len();
        if n == 0 {
            return Ok(Vec::new());
        }
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        let mut denom = self.diag[0];
        if !(denom > 0.0) {
            return Err(Error::Internal("tridiagonal Gram matrix is not positive definite".into()));
        }
        c[0] = if n > 1 { self.off[0] / denom } else { 0.0 };
        d[0] = b[0] / denom;
        for i in 1..n {
            denom = self.diag[i] - self.off[i - 1] * c[i - 1];
            if !(denom > 0.0) {
                return Err(Error::Internal("tridiagonal Gram matrix is not positive definite".into()));
            }
            c[i] = if i + 1 < n { self.off[i] / denom } else { 0.0 };
            d[i] = (b[i] - self.off[i - 1] * d[i - 1]) / denom;
        }
        for i in (0..n - 1).rev() {
            d[i] -= c[i] * d[i + 1];
        }
        Ok(d)
    }

    /// `rᵀ T⁻¹ r`.
    pub fn inverse_form(&self, r: &[f64]) -> Result<f64> {
        Ok(dot(r, &self.solve(r)?))
    }
}

/// Eigenvalues of `A x = λ B x` for symmetric `A` and SPD `B`, ascending.
pub fn generalized_symmetric_eigenvalues(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DVector<f64>> {
    let chol = b
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Numerical("norm matrix is not positive definite".into()))?;
    let l = chol.l();
    // C = L⁻¹ A L⁻ᵀ
    let y = l
        .solve_lower_triangular(a)
        .ok_or_else(|| Error::Numerical("singular Cholesky factor".into()))?;
    let c = l
        .solve_lower_triangular(&y.transpose())
        .ok_or_else(|| Error::Numerical("singular Cholesky factor".into()))?;
    let c = (&c + c.transpose()) * 0.5;
    let mut values: Vec<f64> = c.symmetric_eigenvalues().iter().copied().collect();
    values.sort_by(f64::total_cmp);
    Ok(DVector::from_vec(values))
}

pub fn generalized_symmetric_min(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    Ok(generalized_symmetric_eigenvalues(a, b)?[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn random_band(n: usize, kl: usize, ku: usize, seed: u64) -> Vec<(usize, usize, f64)> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut t = Vec::new();
        for i in 0..n {
            for j in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                t.push((i, j, rng.random_range(-1.0..1.0)));
            }
        }
        t
    }

    #[test]
    fn triplets_sum_duplicates_deterministically() {
        let a = csr_from_triplets(2, 2, vec![(1, 0, 1.0), (0, 0, 2.0), (1, 0, 0.5), (0, 1, 3.0)]);
        let d = to_dense(&a);
        assert_eq!(d[(1, 0)], 1.5);
        assert_eq!(d[(0, 0)], 2.0);
        assert_eq!(d[(0, 1)], 3.0);
        assert_eq!(a.nnz(), 3);
    }

    #[test]
    fn banded_lu_needs_pivoting() {
        // zero leading entry forces a row swap
        let a = csr_from_triplets(3, 3, vec![(0, 1, 1.0), (1, 0, 1.0), (1, 1, 1.0), (1, 2, 2.0), (2, 1, 3.0), (2, 2, 1.0)]);
        let lu = BandedLu::factor(&a).unwrap();
        let x = lu.solve(&[1.0, 2.0, 3.0]);
        let r = mul_vec(&a, &x);
        for (ri, bi) in r.iter().zip([1.0, 2.0, 3.0]) {
            assert!((ri - bi).abs() < 1e-14);
        }
    }

    #[test]
    fn singular_matrix_is_reported() {
        let a = csr_from_triplets(2, 2, vec![(0, 0, 1.0), (0, 1, 2.0), (1, 0, 2.0), (1, 1, 4.0)]);
        assert!(BandedLu::factor(&a).is_err());
    }

    #[test]
    fn tridiagonal_solve() {
        let mut t = Tridiagonal::zeros(4);
        for i in 0..4 {
            t.add(i, i, 4.0);
        }
        for i in 0..3 {
            t.add(i, i + 1, 1.0);
        }
        let b = [1.0, 2.0, 3.0, 4.0];
        let x = t.solve(&b).unwrap();
        let r = t.mul(&x);
        for (ri, bi) in r.iter().zip(b) {
            assert!((ri - bi).abs() < 1e-14);
        }
    }

    #[test]
    fn generalized_eigen_of_diagonal_pencil() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 6.0]));
        let b = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0]));
        let e = generalized_symmetric_eigenvalues(&a, &b).unwrap();
        assert!((e[0] - 2.0).abs() < 1e-14 && (e[1] - 3.0).abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn banded_lu_solves_and_transposes(n in 2usize..40, kl in 0usize..6, ku in 0usize..4, seed in 0u64..1000) {
            let mut t = random_band(n, kl, ku, seed);
            // keep it comfortably nonsingular
            for i in 0..n {
                t.push((i, i, 3.0 + (kl + ku) as f64));
            }
            let a = csr_from_triplets(n, n, t);
            let lu = BandedLu::factor(&a).unwrap();
            let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
            let x = lu.solve(&b);
            let r = mul_vec(&a, &x);
            for (ri, bi) in r.iter().zip(&b) {
                prop_assert!((ri - bi).abs() < 1e-11);
            }
            let y = lu.solve_transpose(&b);
            let r = mul_transpose_vec(&a, &y);
            for (ri, bi) in r.iter().zip(&b) {
                prop_assert!((ri - bi).abs() < 1e-11);
            }
        }
    }
}
