//! Eigenvalues of symmetric band matrices and the resolvent trace.
//!
//! The banded path reduces to tridiagonal form with plane rotations confined
//! to the band (O(n^2 w) flops, O(n w) memory) and then runs implicit QL.
//! Periodized matrices lose bandedness in the corners and go through a dense
//! Householder reduction instead.

mod dense;
mod reduce;
mod tridiag;

pub use dense::DenseSymmetric;
pub use reduce::reduce_to_tridiagonal;
pub use tridiag::{tridiag_eigenvalues, SWEEPS_PER_EIGENVALUE};

use std::io::{self, Write};

use num_complex::Complex64;

use crate::ensemble::{BandMatrix, PeriodicBandMatrix};
use crate::error::{Error, Result};

/// Largest matrix accepted by the dense path.
pub const DENSE_CAP: usize = 4096;

/// Symmetric tridiagonal matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    pub diag: Vec<f64>,
    pub offdiag: Vec<f64>,
}

impl Tridiagonal {
    pub fn n(&self) -> usize {
        self.diag.len()
    }

    pub fn trace(&self) -> f64 {
        self.diag.iter().sum()
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.diag.iter().map(|d| d * d).sum::<f64>()
            + 2.0 * self.offdiag.iter().map(|e| e * e).sum::<f64>()
    }
}

/// Eigenvalues sorted ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    eigenvalues: Vec<f64>,
}

impl Spectrum {
    /// Sorts the values; rejects NaN and infinities.
    pub fn from_unsorted(mut values: Vec<f64>) -> Result<Self> {
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvariantViolation(format!(
                "non-finite eigenvalue {bad}"
            )));
        }
        values.sort_by(f64::total_cmp);
        Ok(Spectrum {
            eigenvalues: values,
        })
    }

    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn sum(&self) -> f64 {
        self.eigenvalues.iter().sum()
    }

    pub fn sum_sq(&self) -> f64 {
        self.eigenvalues.iter().map(|l| l * l).sum()
    }

    /// Checks similarity invariance against the trace and squared Frobenius
    /// norm of the source matrix, within `1e-8 * n` on the unit scale.
    pub fn check_invariants(&self, trace: f64, frobenius_sq: f64) -> Result<()> {
        let n = self.n().max(1) as f64;
        let scale = (frobenius_sq / n).max(1.0);
        let tol = 1e-8 * n * scale;
        let dt = (self.sum() - trace).abs();
        if dt > tol {
            return Err(Error::InvariantViolation(format!(
                "eigenvalue sum {} differs from trace {trace} by {dt:e}",
                self.sum()
            )));
        }
        let df = (self.sum_sq() - frobenius_sq).abs();
        if df > tol {
            return Err(Error::InvariantViolation(format!(
                "sum of squared eigenvalues {} differs from Frobenius norm {frobenius_sq} by {df:e}",
                self.sum_sq()
            )));
        }
        Ok(())
    }

    /// One eigenvalue per line, 17 significant digits.
    pub fn write_to<W: Write>(&self, mut out: W) -> io::Result<()> {
        for l in &self.eigenvalues {
            writeln!(out, "{l:.16e}")?;
        }
        Ok(())
    }
}

/// All eigenvalues of a band matrix (reduction followed by QL).
pub fn eigenvalues(m: &BandMatrix) -> Result<Spectrum> {
    let t = reduce_to_tridiagonal(m);
    let s = tridiag_eigenvalues(&t, f64::EPSILON)?;
    s.check_invariants(m.trace(), m.frobenius_sq())?;
    Ok(s)
}

/// All eigenvalues of a dense symmetric matrix.
pub fn eigenvalues_dense(a: &DenseSymmetric) -> Result<Spectrum> {
    if a.n() > DENSE_CAP {
        return Err(Error::DenseSizeCap {
            n: a.n(),
            cap: DENSE_CAP,
        });
    }
    let t = a.tridiagonalize();
    let s = tridiag_eigenvalues(&t, f64::EPSILON)?;
    s.check_invariants(a.trace(), a.frobenius_sq())?;
    Ok(s)
}

/// All eigenvalues of a periodized band matrix, via the dense path.
pub fn eigenvalues_periodic(m: &PeriodicBandMatrix) -> Result<Spectrum> {
    if m.n() > DENSE_CAP {
        return Err(Error::DenseSizeCap {
            n: m.n(),
            cap: DENSE_CAP,
        });
    }
    eigenvalues_dense(&m.to_dense())
}

/// `gamma_n(z) = sum_i (lambda_i - z)^{-1}` for `Im z != 0`.
pub fn stieltjes_trace(s: &Spectrum, z: Complex64) -> Result<Complex64> {
    if z.im == 0.0 {
        return Err(Error::RealArgument { re: z.re, im: z.im });
    }
    Ok(s.eigenvalues()
        .iter()
        .map(|&l| (Complex64::new(l, 0.0) - z).inv())
        .sum())
}
