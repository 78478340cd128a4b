use super::{Spectrum, Tridiagonal};
use crate::error::{Error, Result};

/// Sweep budget per eigenvalue before the input is declared pathological.
pub const SWEEPS_PER_EIGENVALUE: usize = 50;

/// All eigenvalues of a symmetric tridiagonal matrix by implicit QL with a
/// Wilkinson shift, in the root-free form that iterates on squared
/// off-diagonals.
///
/// Off-diagonal `e_i` is deflated once `|e_i| <= tol * (|d_i| + |d_{i+1}|)`.
pub fn tridiag_eigenvalues(t: &Tridiagonal, tol: f64) -> Result<Spectrum> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let n = t.diag.len();
    if t.offdiag.len() != n.saturating_sub(1) {
        return Err(Error::InvalidParameter(format!(
            "offdiag has length {} for diag of length {n}",
            t.offdiag.len()
        )));
    }

    // Squaring must neither overflow nor flush to zero.
    let norm = t
        .diag
        .iter()
        .chain(&t.offdiag)
        .fold(0.0f64, |a, x| a.max(x.abs()));
    let scale = if norm > 0.0 && !(1e-100..=1e100).contains(&norm) {
        1.0 / norm
    } else {
        1.0
    };
    let mut d: Vec<f64> = t.diag.iter().map(|x| x * scale).collect();
    let mut e2: Vec<f64> = t.offdiag.iter().map(|x| (x * scale).powi(2)).collect();
    e2.push(0.0);
    let tol2 = tol * tol;
    let negligible = |e2: f64, a: f64, b: f64| e2 <= tol2 * (a.abs() + b.abs()).powi(2);

    let mut l = 0;
    let mut iter = 0;
    while l < n {
        let mut m = l;
        while m + 1 < n && !negligible(e2[m], d[m], d[m + 1]) {
            m += 1;
        }
        if m + 1 < n {
            e2[m] = 0.0;
        }
        if m == l {
            l += 1;
            iter = 0;
            continue;
        }
        if m == l + 1 {
            let (r1, r2) = sym2_eigenvalues(d[l], e2[l].sqrt(), d[l + 1]);
            d[l] = r1;
            d[l + 1] = r2;
            e2[l] = 0.0;
            l += 2;
            iter = 0;
            continue;
        }
        iter += 1;
        if iter > SWEEPS_PER_EIGENVALUE {
            return Err(Error::IterationCap {
                index: l,
                cap: SWEEPS_PER_EIGENVALUE,
            });
        }

        let p = d[l];
        let rte = e2[l].sqrt();
        let g = (d[l + 1] - p) / (2.0 * rte);
        let r = g.hypot(1.0);
        let sigma = p - rte / (g + r.copysign(g));

        let mut c = 1.0f64;
        let mut s = 0.0f64;
        let mut gamma = d[m] - sigma;
        let mut p = gamma * gamma;
        for i in (l..m).rev() {
            let bb = e2[i];
            let r = p + bb;
            if i + 1 != m {
                e2[i + 1] = s * r;
            }
            let oldc = c;
            c = p / r;
            s = bb / r;
            let oldgam = gamma;
            let alpha = d[i];
            gamma = c * (alpha - sigma) - s * oldgam;
            d[i + 1] = oldgam + (alpha - gamma);
            p = if c != 0.0 {
                gamma * gamma / c
            } else {
                oldc * bb
            };
        }
        e2[l] = s * p;
        d[l] = sigma + gamma;
    }

    if scale != 1.0 {
        d.iter_mut().for_each(|x| *x /= scale);
    }
    Spectrum::from_unsorted(d)
}

/// Eigenvalues of `[[a, b], [b, c]]`, larger magnitude first.
fn sym2_eigenvalues(a: f64, b: f64, c: f64) -> (f64, f64) {
    let sm = a + c;
    let df = a - c;
    let rt = df.hypot(2.0 * b);
    let (acmx, acmn) = if a.abs() > c.abs() { (a, c) } else { (c, a) };
    if sm == 0.0 {
        return (0.5 * rt, -0.5 * rt);
    }
    let rt1 = 0.5 * (sm + rt.copysign(sm));
    let rt2 = (acmx / rt1) * acmn - (b / rt1) * b;
    (rt1, rt2)
}
