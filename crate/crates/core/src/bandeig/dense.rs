//! Householder tridiagonalization of a dense symmetric matrix.

use super::Tridiagonal;

/// Row-major symmetric matrix, only used where bandedness is lost.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseSymmetric {
    n: usize,
    data: Vec<f64>,
}

impl DenseSymmetric {
    pub fn zeros(n: usize) -> Self {
        DenseSymmetric {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// Sets both `(i, j)` and `(j, i)`.
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
        self.data[j * self.n + i] = v;
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    /// Orthogonally similar tridiagonal matrix (eigenvalues only, no
    /// accumulation of the reflectors).
    pub fn tridiagonalize(&self) -> Tridiagonal {
        let n = self.n;
        let mut a = self.data.clone();
        let mut v = vec![0.0; n];
        let mut p = vec![0.0; n];
        for k in 0..n.saturating_sub(2) {
            let m = k + 1;
            let alpha_sq: f64 = (m..n).map(|i| a[i * n + k] * a[i * n + k]).sum();
            let x0 = a[m * n + k];
            let tail = alpha_sq - x0 * x0;
            if tail == 0.0 {
                continue;
            }
            let alpha = -alpha_sq.sqrt().copysign(x0);
            for i in m..n {
                v[i] = a[i * n + k];
            }
            v[m] -= alpha;
            let vnorm_sq = tail + v[m] * v[m];
            let beta = 2.0 / vnorm_sq;

            // p = beta * A v on the trailing block
            for i in m..n {
                let row = &a[i * n + m..i * n + n];
                let acc: f64 = row.iter().zip(&v[m..n]).map(|(x, y)| x * y).sum();
                p[i] = beta * acc;
            }
            let kfac: f64 = 0.5 * beta * (m..n).map(|i| v[i] * p[i]).sum::<f64>();
            for i in m..n {
                p[i] -= kfac * v[i];
            }
            for i in m..n {
                let (vi, pi) = (v[i], p[i]);
                let row = &mut a[i * n + m..i * n + n];
                for (j, x) in row.iter_mut().enumerate() {
                    *x -= vi * p[m + j] + pi * v[m + j];
                }
            }
            a[m * n + k] = alpha;
            a[k * n + m] = alpha;
            for i in m + 1..n {
                a[i * n + k] = 0.0;
                a[k * n + i] = 0.0;
            }
        }
        let diag = (0..n).map(|i| a[i * n + i]).collect();
        let offdiag = (0..n.saturating_sub(1))
            .map(|i| a[(i + 1) * n + i])
            .collect();
        Tridiagonal { diag, offdiag }
    }
}
