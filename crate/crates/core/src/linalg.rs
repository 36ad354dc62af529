//! Small dense complex linear algebra.
//!
//! Channel matrices and beamformers in this crate are tiny (antenna counts of
//! a few), so the operations here are hand-rolled rather than pulled from a
//! BLAS/LAPACK binding: row-major matrices, a cyclic Jacobi eigensolver for
//! Hermitian matrices, and a Cholesky solve for Hermitian positive definite
//! systems. Everything is deterministic for a fixed input.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub type C64 = Complex64;

/// Conjugating inner product `sum_i conj(a_i) * b_i`.
pub fn vdot(a: &[C64], b: &[C64]) -> C64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Squared Euclidean norm of a complex vector.
pub fn norm_sq(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum()
}

/// Scale a vector in place.
pub fn scale(a: &mut [C64], factor: f64) {
    for x in a.iter_mut() {
        *x *= factor;
    }
}

/// Dense complex matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct CMat {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl CMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![C64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<C64>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c));
        Self {
            rows: r,
            cols: c,
            data: rows.into_iter().flatten().collect(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    /// `A x`.
    pub fn mul_vec(&self, x: &[C64]) -> Vec<C64> {
        debug_assert_eq!(self.cols, x.len());
        (0..self.rows)
            .map(|i| {
                let row = &self.data[i * self.cols..(i + 1) * self.cols];
                row.iter().zip(x).map(|(a, b)| a * b).sum()
            })
            .collect()
    }

    /// `A^H x` (conjugate transpose applied to a vector).
    pub fn mulh_vec(&self, x: &[C64]) -> Vec<C64> {
        debug_assert_eq!(self.rows, x.len());
        let mut out = vec![C64::new(0.0, 0.0); self.cols];
        for i in 0..self.rows {
            let xi = x[i];
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            for (j, a) in row.iter().enumerate() {
                out[j] += a.conj() * xi;
            }
        }
        out
    }

    /// `A += weight * v v^H` for a column vector `v`.
    pub fn add_outer(&mut self, v: &[C64], weight: f64) {
        debug_assert_eq!(self.rows, v.len());
        debug_assert_eq!(self.cols, v.len());
        for i in 0..self.rows {
            for j in 0..self.cols {
                self.data[i * self.cols + j] += v[i] * v[j].conj() * weight;
            }
        }
    }

    pub fn add_scaled_identity(&mut self, s: f64) {
        debug_assert_eq!(self.rows, self.cols);
        for i in 0..self.rows {
            self.data[i * self.cols + i] += s;
        }
    }

    pub fn frob_norm_sq(&self) -> f64 {
        self.data.iter().map(|x| x.norm_sqr()).sum()
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        if self.rows != self.cols {
            return false;
        }
        for i in 0..self.rows {
            for j in i..self.cols {
                let d = self[(i, j)] - self[(j, i)].conj();
                if d.norm() > tol {
                    return false;
                }
            }
        }
        true
    }

    /// Replace `A` with `(A + A^H) / 2`.
    pub fn hermitize(&mut self) {
        debug_assert_eq!(self.rows, self.cols);
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                let avg = (self[(i, j)] + self[(j, i)].conj()) * 0.5;
                self[(i, j)] = avg;
                self[(j, i)] = avg.conj();
            }
            let d = self[(i, i)].re;
            self[(i, i)] = C64::new(d, 0.0);
        }
    }
}

impl std::ops::Index<(usize, usize)> for CMat {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for CMat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.cols + j]
    }
}

impl Serialize for CMat {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        // Complex entries serialize as [re, im] pairs.
        let rows: Vec<Vec<[f64; 2]>> = (0..self.rows)
            .map(|i| {
                (0..self.cols)
                    .map(|j| {
                        let z = self[(i, j)];
                        [z.re, z.im]
                    })
                    .collect()
            })
            .collect();
        rows.serialize(s)
    }
}

impl<'de> Deserialize<'de> for CMat {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows: Vec<Vec<[f64; 2]>> = Vec::deserialize(d)?;
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(serde::de::Error::custom("ragged matrix"));
        }
        let data = rows
            .into_iter()
            .flatten()
            .map(|[re, im]| C64::new(re, im))
            .collect();
        Ok(CMat { rows: r, cols: c, data })
    }
}

/// Eigendecomposition of a Hermitian matrix via cyclic Jacobi rotations.
///
/// Returns eigenvalues in ascending order and the corresponding eigenvectors
/// as matrix columns, so `A = V diag(w) V^H`.
pub fn hermitian_eigen(a: &CMat) -> (Vec<f64>, CMat) {
    assert_eq!(a.rows, a.cols);
    let n = a.rows;
    let mut m = a.clone();
    m.hermitize();
    let mut v = CMat::identity(n);
    if n <= 1 {
        return ((0..n).map(|i| m[(i, i)].re).collect(), v);
    }

    let total = m.frob_norm_sq().max(f64::MIN_POSITIVE);
    let tol = total * 1e-30;
    for _sweep in 0..60 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)].norm_sqr())
            .sum();
        if off <= tol {
            break;
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                let g = m[(p, q)];
                let abs_g = g.norm();
                if abs_g <= f64::MIN_POSITIVE {
                    continue;
                }
                let u = g / abs_g;
                let tau = (m[(q, q)].re - m[(p, p)].re) / (2.0 * abs_g);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let su = u * s;
                // A <- A J, with J the (p,q) complex rotation.
                for k in 0..n {
                    let akp = m[(k, p)];
                    let akq = m[(k, q)];
                    m[(k, p)] = akp * c - su.conj() * akq;
                    m[(k, q)] = su * akp + akq * c;
                }
                // A <- J^H A.
                for k in 0..n {
                    let apk = m[(p, k)];
                    let aqk = m[(q, k)];
                    m[(p, k)] = apk * c - su * aqk;
                    m[(q, k)] = su.conj() * apk + aqk * c;
                }
                m[(p, q)] = C64::new(0.0, 0.0);
                m[(q, p)] = C64::new(0.0, 0.0);
                m[(p, p)] = C64::new(m[(p, p)].re, 0.0);
                m[(q, q)] = C64::new(m[(q, q)].re, 0.0);
                // V <- V J.
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * c - su.conj() * vkq;
                    v[(k, q)] = su * vkp + vkq * c;
                }
            }
        }
    }

    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| m[(i, i)].re.partial_cmp(&m[(j, j)].re).unwrap());
    let vals = idx.iter().map(|&i| m[(i, i)].re).collect();
    let mut vecs = CMat::zeros(n, n);
    for (new_col, &old_col) in idx.iter().enumerate() {
        for k in 0..n {
            vecs[(k, new_col)] = v[(k, old_col)];
        }
    }
    (vals, vecs)
}

/// Solve `A x = b` for Hermitian positive definite `A` via Cholesky.
///
/// Returns `None` if the factorization breaks down (A not positive definite).
pub fn cholesky_solve(a: &CMat, b: &[C64]) -> Option<Vec<C64>> {
    assert_eq!(a.rows, a.cols);
    assert_eq!(a.rows, b.len());
    let n = a.rows;
    let mut l = CMat::zeros(n, n);
    for j in 0..n {
        let mut diag = a[(j, j)].re;
        for m in 0..j {
            diag -= l[(j, m)].norm_sqr();
        }
        if diag <= 0.0 || !diag.is_finite() {
            return None;
        }
        let ljj = diag.sqrt();
        l[(j, j)] = C64::new(ljj, 0.0);
        for i in j + 1..n {
            let mut sum = a[(i, j)];
            for m in 0..j {
                sum -= l[(i, m)] * l[(j, m)].conj();
            }
            l[(i, j)] = sum / ljj;
        }
    }
    // Forward: L y = b.
    let mut y = vec![C64::new(0.0, 0.0); n];
    for i in 0..n {
        let mut sum = b[i];
        for m in 0..i {
            sum -= l[(i, m)] * y[m];
        }
        y[i] = sum / l[(i, i)].re;
    }
    // Backward: L^H x = y.
    let mut x = vec![C64::new(0.0, 0.0); n];
    for i in (0..n).rev() {
        let mut sum = y[i];
        for m in i + 1..n {
            sum -= l[(m, i)].conj() * x[m];
        }
        x[i] = sum / l[(i, i)].re;
    }
    Some(x)
}
