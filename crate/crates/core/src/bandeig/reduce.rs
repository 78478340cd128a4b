//! Plane-rotation reduction of a symmetric band matrix to tridiagonal form.
//!
//! The band is held in lower storage, column-major, with one extra slot
//! below the outermost diagonal for the bulge that every rotation creates.
//! Column `j` occupies `ab[j * ld .. (j + 1) * ld]` and `ab[j * ld + d]`
//! is the entry `(j + d, j)`.

use super::Tridiagonal;
use crate::ensemble::BandMatrix;

const GROUP: usize = 8;

struct LowerBand {
    n: usize,
    w: usize,
    ld: usize,
    ab: Vec<f64>,
}

impl LowerBand {
    fn from_band(m: &BandMatrix) -> Self {
        let n = m.n();
        let w = m.half_bandwidth();
        let ld = w + 2;
        let mut ab = vec![0.0; n * ld];
        for (d, diag) in m.diagonals().iter().enumerate() {
            for (j, &v) in diag.iter().enumerate() {
                ab[j * ld + d] = v;
            }
        }
        LowerBand { n, w, ld, ab }
    }

    /// Applies the rotation in the plane `(p, p + 1)` on both sides, skipping
    /// the pivot column `col` (already updated by the caller) and everything
    /// to its left.
    #[inline]
    fn rotate(&mut self, p: usize, col: usize, c: f64, s: f64) {
        let ld = self.ld;
        let q = p + 1;

        // Rows p and q to the left of the pivot: one adjacent pair per
        // column, stride ld - 1.
        if p > col + 1 {
            let start = (col + 1) * ld + (p - col - 1);
            let end = (p - 1) * ld + 1;
            let row = &mut self.ab[start..=end + 1];
            for pair in row.chunks_mut(ld - 1) {
                let x = pair[0];
                let y = pair[1];
                pair[0] = c * x + s * y;
                pair[1] = c * y - s * x;
            }
        }

        let app = self.ab[p * ld];
        let aqp = self.ab[p * ld + 1];
        let aqq = self.ab[q * ld];
        let cs = c * s;
        self.ab[p * ld] = c * c * app + 2.0 * cs * aqp + s * s * aqq;
        self.ab[q * ld] = s * s * app - 2.0 * cs * aqp + c * c * aqq;
        self.ab[p * ld + 1] = cs * (aqq - app) + (c * c - s * s) * aqp;

        // Rows q+1 ..= min(n-1, q+w) of columns p and q. Column p gains the
        // bulge at offset w+1.
        let last = (q + self.w).min(self.n - 1);
        if last > q {
            let len = last - q;
            let (head, tail) = self.ab.split_at_mut(q * ld);
            let colp = &mut head[p * ld + 2..p * ld + 2 + len];
            let colq = &mut tail[1..1 + len];
            for (x, y) in colp.iter_mut().zip(colq.iter_mut()) {
                let xv = *x;
                let yv = *y;
                *x = c * xv + s * yv;
                *y = c * yv - s * xv;
            }
        }
    }

    /// Zeroes `(p + 1, col)` against `(p, col)` and returns the position of
    /// the bulge this creates, if any.
    #[inline]
    fn step(&mut self, p: usize, col: usize) -> Option<(usize, usize)> {
        let i_x = col * self.ld + (p - col);
        let x = self.ab[i_x];
        let y = self.ab[i_x + 1];
        if y == 0.0 {
            return None;
        }
        let r = (x * x + y * y).sqrt();
        let c = x / r;
        let s = y / r;
        self.ab[i_x] = r;
        self.ab[i_x + 1] = 0.0;
        self.rotate(p, col, c, s);

        // bulge now sits at (p + w + 1, p)
        let next_p = p + self.w;
        (next_p + 1 < self.n).then_some((next_p, p))
    }

    /// Chases the chains started at `(k + d, k)` for `d` in
    /// `first - group + 1 ..= first`, each trailing the previous one by a
    /// single step. Chains that far apart touch disjoint rows and columns,
    /// so the result equals chasing them one after another, while the
    /// overlapping cache lines stay hot.
    fn chase_group(&mut self, k: usize, first: usize, group: usize) {
        let mut chains = [None; GROUP];
        for (j, chain) in chains.iter_mut().enumerate().take(group) {
            *chain = Some((k + first - j - 1, k));
        }
        let mut live = group;
        let mut started = 0;
        while live > 0 {
            if started < group {
                started += 1;
            }
            for chain in chains.iter_mut().take(started) {
                if let Some((p, col)) = *chain {
                    *chain = self.step(p, col);
                    if chain.is_none() {
                        live -= 1;
                    }
                }
            }
        }
    }

    fn run(mut self) -> Tridiagonal {
        let (n, w, ld) = (self.n, self.w, self.ld);
        if n > 2 {
            for k in 0..n - 2 {
                let mut d = w.min(n - 1 - k);
                while d >= 2 {
                    let group = GROUP.min(d - 1);
                    self.chase_group(k, d, group);
                    d -= group;
                }
            }
        }
        let diag = (0..n).map(|j| self.ab[j * ld]).collect();
        let offdiag = (0..n.saturating_sub(1))
            .map(|j| self.ab[j * ld + 1])
            .collect();
        Tridiagonal { diag, offdiag }
    }
}

/// Reduces `m` to an orthogonally similar tridiagonal matrix.
///
/// Matrices with half-bandwidth at most one are passed through unchanged.
pub fn reduce_to_tridiagonal(m: &BandMatrix) -> Tridiagonal {
    let n = m.n();
    if m.half_bandwidth() <= 1 {
        let diag = m.diagonals()[0].clone();
        let offdiag = if m.half_bandwidth() == 1 {
            m.diagonals()[1].clone()
        } else {
            vec![0.0; n.saturating_sub(1)]
        };
        return Tridiagonal { diag, offdiag };
    }
    LowerBand::from_band(m).run()
}
