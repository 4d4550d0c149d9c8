//! Small dense complex matrices: Hermitian eigendecomposition, Cholesky, inversion.
//!
//! Channel counts are single digits, so plain row-major storage and a cyclic Jacobi
//! eigensolver are both accurate and fast enough.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};
#[allow(unused_imports)]
use num_traits::Float;

use num_complex::Complex64;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Square complex matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    n: usize,
    data: Vec<Complex64>,
}

impl Index<(usize, usize)> for CMatrix {
    type Output = Complex64;
    fn index(&self, (r, c): (usize, usize)) -> &Complex64 {
        &self.data[r * self.n + c]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Complex64 {
        &mut self.data[r * self.n + c]
    }
}

impl CMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![ZERO; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<Complex64>]) -> Self {
        let n = rows.len();
        let mut m = Self::zeros(n);
        for (r, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), n, "matrix must be square");
            for (c, &v) in row.iter().enumerate() {
                m[(r, c)] = v;
            }
        }
        m
    }

    /// `x x^H`.
    pub fn outer(x: &[Complex64]) -> Self {
        let mut m = Self::zeros(x.len());
        m.add_outer(x, 1.0);
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    /// `self += weight * x x^H`.
    pub fn add_outer(&mut self, x: &[Complex64], weight: f64) {
        let n = self.n;
        for r in 0..n {
            let xr = x[r] * weight;
            let row = &mut self.data[r * n..(r + 1) * n];
            for (dst, xc) in row.iter_mut().zip(x) {
                *dst += xr * xc.conj();
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        for v in &mut self.data {
            *v *= s;
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut m = self.clone();
        m.scale(s);
        m
    }

    pub fn add(&self, other: &Self) -> Self {
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Self { n: self.n, data }
    }

    pub fn sub(&self, other: &Self) -> Self {
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Self { n: self.n, data }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let n = self.n;
        let mut out = Self::zeros(n);
        for r in 0..n {
            for k in 0..n {
                let a = self[(r, k)];
                if a == ZERO {
                    continue;
                }
                for c in 0..n {
                    out.data[r * n + c] += a * other.data[k * n + c];
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, x: &[Complex64]) -> Vec<Complex64> {
        let n = self.n;
        (0..n).map(|r| self.data[r * n..(r + 1) * n].iter().zip(x).fold(ZERO, |acc, (a, b)| acc + a * b)).collect()
    }

    pub fn adjoint(&self) -> Self {
        let n = self.n;
        let mut out = Self::zeros(n);
        for r in 0..n {
            for c in 0..n {
                out[(c, r)] = self[(r, c)].conj();
            }
        }
        out
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.n).map(|i| self[(i, i)]).fold(ZERO, |a, b| a + b)
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest entrywise deviation from Hermitian symmetry, relative to the Frobenius norm.
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.n;
        let mut worst = 0.0f64;
        for r in 0..n {
            for c in r..n {
                worst = worst.max((self[(r, c)] - self[(c, r)].conj()).norm());
            }
        }
        let norm = self.frobenius();
        if norm == 0.0 {
            0.0
        } else {
            worst / norm
        }
    }

    /// Replace the matrix by `(A + A^H)/2`.
    pub fn symmetrize(&mut self) {
        let n = self.n;
        for r in 0..n {
            let d = self[(r, r)].re;
            self[(r, r)] = Complex64::new(d, 0.0);
            for c in r + 1..n {
                let v = (self[(r, c)] + self[(c, r)].conj()) * 0.5;
                self[(r, c)] = v;
                self[(c, r)] = v.conj();
            }
        }
    }

    /// Add `eps * trace / n` to the diagonal, with `eps` relative to the mean diagonal power.
    /// A matrix with zero trace gets an absolute `eps` instead.
    pub fn diagonal_loaded(&self, eps: f64) -> Self {
        let n = self.n as f64;
        let mean = self.trace().re / n;
        let load = if mean > 0.0 { eps * mean } else { eps };
        let mut out = self.clone();
        for i in 0..self.n {
            out[(i, i)] += load;
        }
        out
    }

    /// Eigendecomposition of a Hermitian matrix with eigenvalues in descending order.
    pub fn hermitian_eigen(&self) -> HermitianEigen {
        jacobi_eigen(self)
    }

    /// Project onto the positive semidefinite cone by clamping negative eigenvalues.
    pub fn psd_projection(&self) -> Self {
        let eig = self.hermitian_eigen();
        let n = self.n;
        let mut out = Self::zeros(n);
        for (k, &lambda) in eig.values.iter().enumerate() {
            if lambda <= 0.0 {
                continue;
            }
            let v = eig.vector(k);
            out.add_outer(&v, lambda);
        }
        out.symmetrize();
        out
    }

    /// Lower-triangular `L` with `A = L L^H`, or `None` if `A` is not positive definite.
    pub fn cholesky(&self) -> Option<Self> {
        let n = self.n;
        let mut l = Self::zeros(n);
        for j in 0..n {
            let mut d = self[(j, j)].re;
            for k in 0..j {
                d -= l[(j, k)].norm_sqr();
            }
            if !(d > 0.0) || !d.is_finite() {
                return None;
            }
            let djj = d.sqrt();
            l[(j, j)] = Complex64::new(djj, 0.0);
            for i in j + 1..n {
                let mut s = self[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)].conj();
                }
                l[(i, j)] = s / djj;
            }
        }
        Some(l)
    }

    /// Solve `L y = b` for lower-triangular `L`.
    pub fn forward_substitute(&self, b: &[Complex64]) -> Vec<Complex64> {
        let n = self.n;
        let mut y = vec![ZERO; n];
        for i in 0..n {
            let mut s = b[i];
            for k in 0..i {
                s -= self[(i, k)] * y[k];
            }
            y[i] = s / self[(i, i)];
        }
        y
    }

    /// Inverse of a lower-triangular matrix.
    pub fn lower_inverse(&self) -> Self {
        let n = self.n;
        let mut inv = Self::zeros(n);
        let mut e = vec![ZERO; n];
        for c in 0..n {
            e.iter_mut().for_each(|v| *v = ZERO);
            e[c] = ONE;
            let col = self.forward_substitute(&e);
            for r in 0..n {
                inv[(r, c)] = col[r];
            }
        }
        inv
    }

    /// General inverse by Gauss-Jordan elimination with partial pivoting.
    pub fn inverse(&self) -> Option<Self> {
        let n = self.n;
        let mut a = self.clone();
        let mut inv = Self::identity(n);
        let scale = self.frobenius();
        if scale == 0.0 || !scale.is_finite() {
            return None;
        }
        for col in 0..n {
            let pivot = (col..n).max_by(|&i, &j| a[(i, col)].norm().total_cmp(&a[(j, col)].norm())).unwrap();
            if a[(pivot, col)].norm() <= scale * 1e-14 {
                return None;
            }
            if pivot != col {
                for c in 0..n {
                    a.data.swap(pivot * n + c, col * n + c);
                    inv.data.swap(pivot * n + c, col * n + c);
                }
            }
            let p = a[(col, col)];
            for c in 0..n {
                a[(col, c)] /= p;
                inv[(col, c)] /= p;
            }
            for r in 0..n {
                if r == col {
                    continue;
                }
                let f = a[(r, col)];
                if f == ZERO {
                    continue;
                }
                for c in 0..n {
                    let ac = a[(col, c)];
                    let ic = inv[(col, c)];
                    a[(r, c)] -= f * ac;
                    inv[(r, c)] -= f * ic;
                }
            }
        }
        Some(inv)
    }
}

/// Eigenvalues (descending) and orthonormal eigenvectors stored as matrix columns.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl HermitianEigen {
    pub fn vector(&self, k: usize) -> Vec<Complex64> {
        (0..self.vectors.n).map(|r| self.vectors[(r, k)]).collect()
    }
}

fn jacobi_eigen(a: &CMatrix) -> HermitianEigen {
    let n = a.n;
    let mut m = a.clone();
    m.symmetrize();
    let mut v = CMatrix::identity(n);
    let total = m.frobenius();

    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|r| (0..n).filter(move |&c| c != r).map(move |c| (r, c)))
            .map(|(r, c)| m[(r, c)].norm_sqr())
            .sum::<f64>()
            .sqrt();
        if off <= total * 1e-15 || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                let r = apq.norm();
                if r <= total * 1e-18 {
                    continue;
                }
                let phase = apq / r;
                let app = m[(p, p)].re;
                let aqq = m[(q, q)].re;
                let theta = (aqq - app) / (2.0 * r);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // Unitary acting on columns p, q: phase-align a_pq, then a real rotation.
                let jpp = Complex64::new(c, 0.0);
                let jpq = Complex64::new(s, 0.0);
                let jqp = -phase.conj() * s;
                let jqq = phase.conj() * c;

                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = mkp * jpp + mkq * jqp;
                    m[(k, q)] = mkp * jpq + mkq * jqq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = jpp.conj() * mpk + jqp.conj() * mqk;
                    m[(q, k)] = jpq.conj() * mpk + jqq.conj() * mqk;
                }
                m[(p, q)] = ZERO;
                m[(q, p)] = ZERO;
                m[(p, p)] = Complex64::new(m[(p, p)].re, 0.0);
                m[(q, q)] = Complex64::new(m[(q, q)].re, 0.0);
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * jpp + vkq * jqp;
                    v[(k, q)] = vkp * jpq + vkq * jqq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(j, j)].re.total_cmp(&m[(i, i)].re));
    let values = order.iter().map(|&i| m[(i, i)].re).collect();
    let mut vectors = CMatrix::zeros(n);
    for (dst, &src) in order.iter().enumerate() {
        for r in 0..n {
            vectors[(r, dst)] = v[(r, src)];
        }
    }
    HermitianEigen { values, vectors }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn random_hermitian(seed: &[f64], n: usize) -> CMatrix {
        let mut m = CMatrix::zeros(n);
        let mut it = seed.iter().cycle();
        for r in 0..n {
            for c in r..n {
                let re = *it.next().unwrap();
                let im = if r == c { 0.0 } else { *it.next().unwrap() };
                m[(r, c)] = Complex64::new(re, im);
                m[(c, r)] = Complex64::new(re, -im);
            }
        }
        m
    }

    #[test]
    fn eigen_of_diagonal() {
        let mut m = CMatrix::zeros(3);
        m[(0, 0)] = Complex64::new(1.0, 0.0);
        m[(1, 1)] = Complex64::new(5.0, 0.0);
        m[(2, 2)] = Complex64::new(-2.0, 0.0);
        let e = m.hermitian_eigen();
        assert_eq!(e.values, vec![5.0, 1.0, -2.0]);
    }

    #[test]
    fn cholesky_and_inverse() {
        let seed = [0.3, -0.7, 1.1, 0.2, 0.9, -0.4, 0.5, 0.8, -1.2, 0.6];
        let b = random_hermitian(&seed, 4);
        let a = b.mul(&b.adjoint()).add(&CMatrix::identity(4));
        let l = a.cholesky().unwrap();
        let rebuilt = l.mul(&l.adjoint());
        assert!(rebuilt.sub(&a).frobenius() < 1e-12);
        let inv = a.inverse().unwrap();
        assert!(inv.mul(&a).sub(&CMatrix::identity(4)).frobenius() < 1e-12);
        let linv = l.lower_inverse();
        assert!(linv.mul(&l).sub(&CMatrix::identity(4)).frobenius() < 1e-12);
    }

    #[test]
    fn singular_matrix_has_no_inverse() {
        let m = CMatrix::outer(&[ONE, ONE]);
        assert!(m.inverse().is_none());
        assert!(m.cholesky().is_none());
    }

    proptest! {
        #[test]
        fn eigen_reconstructs(seed in proptest::collection::vec(-1.0f64..1.0, 64), n in 1usize..9) {
            let m = random_hermitian(&seed, n);
            let e = m.hermitian_eigen();
            let mut rebuilt = CMatrix::zeros(n);
            for k in 0..n {
                rebuilt.add_outer(&e.vector(k), e.values[k]);
            }
            prop_assert!(rebuilt.sub(&m).frobenius() <= 1e-11 * (1.0 + m.frobenius()));
            let gram = e.vectors.adjoint().mul(&e.vectors);
            prop_assert!(gram.sub(&CMatrix::identity(n)).frobenius() < 1e-11);
            for w in e.values.windows(2) {
                prop_assert!(w[0] >= w[1]);
            }
        }
    }
}
