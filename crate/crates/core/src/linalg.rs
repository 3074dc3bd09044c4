//! Dense Hermitian eigensolvers, a small CSR type and a Lanczos solver.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Largest dimension handled by dense diagonalization.
pub const DENSE_LIMIT: usize = 4096;

/// Ascending eigenvalues with matching orthonormal eigenvector columns.
#[derive(Debug, Clone)]
pub struct Eigen<T: nalgebra::Scalar> {
    pub values: Vec<f64>,
    pub vectors: DMatrix<T>,
}

fn sort_decomposition<T: nalgebra::Scalar + Copy>(values: &[f64], vectors: &DMatrix<T>) -> Eigen<T> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let n = vectors.nrows();
    let sorted = DMatrix::from_fn(n, order.len(), |i, k| vectors[(i, order[k])]);
    Eigen {
        values: order.iter().map(|&k| values[k]).collect(),
        vectors: sorted,
    }
}

pub fn hermitian_eigen(m: &CMatrix) -> Option<Eigen<Complex64>> {
    let n = m.nrows();
    let eig = SymmetricEigen::try_new(m.clone(), f64::EPSILON, 1000 * n.max(1))?;
    let values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    Some(sort_decomposition(&values, &eig.eigenvectors))
}

pub fn hermitian_eigenvalues(m: &CMatrix) -> Option<Vec<f64>> {
    hermitian_eigen(m).map(|e| e.values)
}

pub fn symmetric_eigen(m: &DMatrix<f64>) -> Option<Eigen<f64>> {
    let n = m.nrows();
    let eig = SymmetricEigen::try_new(m.clone(), f64::EPSILON, 1000 * n.max(1))?;
    let values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    Some(sort_decomposition(&values, &eig.eigenvectors))
}

/// `(M + M*) / 2`.
pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// `||M - M*||_max`.
pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    max_abs(&(m - m.adjoint()))
}

/// Real sparse matrix in compressed-row form.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// Assembles from triplets, summing duplicates. Column order within a
    /// row is ascending, so assembly is deterministic.
    pub fn from_triplets(dim: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); dim];
        for &(i, j, v) in triplets {
            rows[i].push((j, v));
        }
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            // stable sort keeps the insertion order of duplicates
            row.sort_by_key(|&(j, _)| j);
            let mut k = 0;
            while k < row.len() {
                let j = row[k].0;
                let mut v = 0.0;
                while k < row.len() && row[k].0 == j {
                    v += row[k].1;
                    k += 1;
                }
                cols.push(j);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        Self {
            dim,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|&(c, _)| c == j).map_or(0.0, |(_, v)| v)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for i in 0..self.dim {
            for (j, v) in self.row(i) {
                m[(i, j)] += v;
            }
        }
        m
    }

    pub fn mul_complex(&self, x: &[Complex64], out: &mut [Complex64]) {
        for i in 0..self.dim {
            let mut acc = Complex64::new(0.0, 0.0);
            for (j, v) in self.row(i) {
                acc += x[j] * v;
            }
            out[i] = acc;
        }
    }

    pub fn mul_real(&self, x: &[f64], out: &mut [f64]) {
        for i in 0..self.dim {
            out[i] = self.row(i).map(|(j, v)| v * x[j]).sum();
        }
    }

    /// `max_{ij} |A_ij - A_ji|`.
    pub fn symmetry_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.dim {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// Gershgorin enclosure `[lo, hi]` of the spectrum.
    pub fn gershgorin(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..self.dim {
            let mut diag = 0.0;
            let mut radius = 0.0;
            for (j, v) in self.row(i) {
                if j == i {
                    diag += v;
                } else {
                    radius += v.abs();
                }
            }
            lo = lo.min(diag - radius);
            hi = hi.max(diag + radius);
        }
        if self.dim == 0 {
            (0.0, 0.0)
        } else {
            (lo, hi)
        }
    }
}

/// Lowest `k` eigenvalues of a real symmetric sparse matrix by Lanczos with
/// full reorthogonalization and restarts on the Krylov dimension.
pub fn lanczos_lowest(a: &CsrMatrix, k: usize, tol: f64) -> Result<Vec<f64>> {
    let n = a.dim();
    if k == 0 {
        return Ok(Vec::new());
    }
    if k > n {
        return Err(Error::InvalidArgument(format!(
            "requested {k} eigenvalues of a {n}-dimensional operator"
        )));
    }
    let mut m = (2 * k + 40).min(n);
    // deterministic start vector
    let mut start: Vec<f64> = (0..n)
        .map(|i| 1.0 + ((i as f64) * 0.618_033_988_75).fract())
        .collect();
    loop {
        let (alphas, betas, basis) = lanczos_tridiagonal(a, &start, m);
        let steps = alphas.len();
        let mut t = DMatrix::<f64>::zeros(steps, steps);
        for i in 0..steps {
            t[(i, i)] = alphas[i];
            if i + 1 < steps {
                t[(i, i + 1)] = betas[i];
                t[(i + 1, i)] = betas[i];
            }
        }
        let eig = symmetric_eigen(&t)
            .ok_or_else(|| Error::SolverNonConvergence("Lanczos tridiagonal".into()))?;
        let beta_last = betas.get(steps - 1).copied().unwrap_or(0.0);
        let kk = k.min(steps);
        let converged = (0..kk).all(|i| {
            let resid = (beta_last * eig.vectors[(steps - 1, i)]).abs();
            resid <= tol * (1.0 + eig.values[i].abs())
        });
        if (converged && kk == k) || steps == n {
            if steps == n && kk < k {
                return Err(Error::SolverNonConvergence("Krylov space exhausted".into()));
            }
            return Ok(eig.values[..k].to_vec());
        }
        if m >= n {
            return Err(Error::SolverNonConvergence(format!(
                "Lanczos did not converge for {k} eigenvalues"
            )));
        }
        // restart from the combination of the wanted Ritz vectors
        let mut next = vec![0.0; n];
        for i in 0..kk {
            for (r, q) in basis.iter().enumerate() {
                let c = eig.vectors[(r, i)];
                for (x, y) in next.iter_mut().zip(q) {
                    *x += c * y;
                }
            }
        }
        start = next;
        m = (2 * m).min(n);
    }
}

fn lanczos_tridiagonal(a: &CsrMatrix, start: &[f64], m: usize) -> (Vec<f64>, Vec<f64>, Vec<Vec<f64>>) {
    let n = a.dim();
    let norm = start.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut q: Vec<f64> = start.iter().map(|x| x / norm).collect();
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut alphas = Vec::with_capacity(m);
    let mut betas = Vec::with_capacity(m);
    let mut w = vec![0.0; n];
    for _ in 0..m {
        a.mul_real(&q, &mut w);
        let alpha: f64 = w.iter().zip(&q).map(|(x, y)| x * y).sum();
        basis.push(q.clone());
        alphas.push(alpha);
        // two passes of classical Gram-Schmidt against the whole basis
        for _ in 0..2 {
            for b in &basis {
                let c: f64 = w.iter().zip(b).map(|(x, y)| x * y).sum();
                for (x, y) in w.iter_mut().zip(b) {
                    *x -= c * y;
                }
            }
        }
        let beta = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        betas.push(beta);
        if beta < 1e-13 || basis.len() == n {
            break;
        }
        q = w.iter().map(|x| x / beta).collect();
    }
    (alphas, betas, basis)
}
