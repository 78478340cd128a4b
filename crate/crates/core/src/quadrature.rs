//! Gauss–Kronrod adaptive integration and fixed Gauss–Legendre rules.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::ops::{Add, Mul};

use crate::error::{Error, Result};

const XGK: [f64; 11] = [
    0.995_657_163_025_808_1,
    0.973_906_528_517_171_7,
    0.930_157_491_355_708_2,
    0.865_063_366_688_984_5,
    0.780_817_726_586_416_9,
    0.679_409_568_299_024_4,
    0.562_757_134_668_604_7,
    0.433_395_394_129_247_2,
    0.294_392_862_701_460_2,
    0.148_874_338_981_631_22,
    0.000000000000000000000000000000000,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874,
    0.032_558_162_307_964_725,
    0.054_755_896_574_351_995,
    0.075_039_674_810_919_96,
    0.093_125_454_583_697_6,
    0.109_387_158_802_297_64,
    0.123_491_976_262_065_84,
    0.134_709_217_311_473_34,
    0.142_775_938_577_060_09,
    0.147_739_104_901_338_49,
    0.149_445_554_002_916_9,
];

const WG: [f64; 5] = [
    0.066_671_344_308_688_14,
    0.149_451_349_150_580_6,
    0.219_086_362_515_982_04,
    0.269_266_719_309_996_35,
    0.295_524_224_714_752_87,
];

/// 21-point Kronrod estimate and its difference from the embedded 10-point
/// Gauss rule.
pub fn gk21<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[10];
    let mut gauss = 0.0;
    for j in 0..10 {
        let dx = h * XGK[j];
        let pair = f(c - dx) + f(c + dx);
        kron += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

#[derive(Debug, Clone, Copy)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

struct Piece {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive bisection driven by the GK21 error estimate.
#[derive(Debug, Clone, Copy)]
pub struct Adaptive {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for Adaptive {
    fn default() -> Self {
        Adaptive {
            abs_tol: 1e-9,
            rel_tol: 1e-12,
            max_intervals: 4000,
        }
    }
}

impl Adaptive {
    pub fn with_abs_tol(abs_tol: f64) -> Self {
        Adaptive {
            abs_tol,
            ..Default::default()
        }
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F, a: f64, b: f64) -> Result<Estimate> {
        self.integrate_with_breaks(f, &[a, b])
    }

    /// Integrates over `[breaks[0], breaks[last]]`, starting from the given
    /// partition. `breaks` must be non-decreasing.
    pub fn integrate_with_breaks<F: Fn(f64) -> f64>(
        &self,
        f: F,
        breaks: &[f64],
    ) -> Result<Estimate> {
        if breaks.len() < 2 {
            return Ok(Estimate {
                value: 0.0,
                error: 0.0,
            });
        }
        let mut heap = BinaryHeap::new();
        let (mut total, mut err) = (0.0, 0.0);
        for w in breaks.windows(2) {
            if w[1] <= w[0] {
                continue;
            }
            let (v, e) = gk21(&f, w[0], w[1]);
            total += v;
            err += e;
            heap.push(Piece {
                a: w[0],
                b: w[1],
                value: v,
                error: e,
            });
        }
        while err > self.abs_tol.max(self.rel_tol * total.abs()) {
            if heap.len() >= self.max_intervals {
                return Err(Error::QuadratureFailure(format!(
                    "error estimate {err:e} after {} intervals",
                    heap.len()
                )));
            }
            let worst = heap.pop().expect("non-empty partition");
            let mid = 0.5 * (worst.a + worst.b);
            if mid <= worst.a || mid >= worst.b {
                // interval cannot be split further in floating point
                return Err(Error::QuadratureFailure(format!(
                    "interval [{}, {}] exhausted at error {err:e}",
                    worst.a, worst.b
                )));
            }
            let (v1, e1) = gk21(&f, worst.a, mid);
            let (v2, e2) = gk21(&f, mid, worst.b);
            total += v1 + v2 - worst.value;
            err += e1 + e2 - worst.error;
            heap.push(Piece {
                a: worst.a,
                b: mid,
                value: v1,
                error: e1,
            });
            heap.push(Piece {
                a: mid,
                b: worst.b,
                value: v2,
                error: e2,
            });
        }
        // re-sum to shed the drift of incremental updates
        let value = heap.iter().map(|p| p.value).sum();
        let error = heap.iter().map(|p| p.error).sum();
        Ok(Estimate { value, error })
    }

    /// Integral over the real line through `y = center + scale * tan(t)`.
    /// Suitable for integrands decaying at least like `1/y^2`.
    pub fn integrate_real_line<F: Fn(f64) -> f64>(
        &self,
        f: F,
        center: f64,
        scale: f64,
    ) -> Result<Estimate> {
        let half = std::f64::consts::FRAC_PI_2;
        let g = |t: f64| {
            let c = t.cos();
            if c <= 0.0 {
                return 0.0;
            }
            let y = center + scale * t.tan();
            let v = f(y) * scale / (c * c);
            if v.is_finite() {
                v
            } else {
                0.0
            }
        };
        self.integrate(g, -half, half)
    }

    /// Integral of `f` over `[start, inf)` (`upward`) or `(-inf, start]`
    /// through `y = start +- scale * t / (1 - t)`. Suitable for integrands
    /// decaying at least like `1/y^2`.
    pub fn integrate_tail<F: Fn(f64) -> f64>(
        &self,
        f: F,
        start: f64,
        scale: f64,
        upward: bool,
    ) -> Result<Estimate> {
        let sign = if upward { 1.0 } else { -1.0 };
        let g = |t: f64| {
            let omt = 1.0 - t;
            if omt <= 0.0 {
                return 0.0;
            }
            let v = f(start + sign * scale * t / omt) * scale / (omt * omt);
            if v.is_finite() {
                v
            } else {
                0.0
            }
        };
        self.integrate(g, 0.0, 1.0)
    }
}

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p1, mut p2) = (1.0, 0.0);
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * j + 1) as f64 * z * p2 - j as f64 * p3) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let z1 = z;
            z = z1 - p1 / dp;
            if (z - z1).abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Fixed composite Gauss–Legendre rule over a list of panels.
#[derive(Debug, Clone)]
pub struct CompositeRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl CompositeRule {
    /// `order`-point rule on each panel `[edges[i], edges[i+1]]`.
    pub fn from_edges(edges: &[f64], order: usize) -> Self {
        let (x, w) = gauss_legendre(order);
        let mut nodes = Vec::with_capacity(edges.len() * order);
        let mut weights = Vec::with_capacity(edges.len() * order);
        for e in edges.windows(2) {
            let c = 0.5 * (e[0] + e[1]);
            let h = 0.5 * (e[1] - e[0]);
            for (xi, wi) in x.iter().zip(&w) {
                nodes.push(c + h * xi);
                weights.push(h * wi);
            }
        }
        CompositeRule { nodes, weights }
    }

    /// `panels` equal panels on `[a, b]`.
    pub fn uniform(a: f64, b: f64, panels: usize, order: usize) -> Self {
        let edges: Vec<f64> = (0..=panels)
            .map(|i| a + (b - a) * i as f64 / panels as f64)
            .collect();
        Self::from_edges(&edges, order)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<T, F>(&self, f: F) -> T
    where
        T: Copy + Default + Add<Output = T> + Mul<f64, Output = T>,
        F: Fn(f64) -> T,
    {
        self.nodes
            .iter()
            .zip(&self.weights)
            .fold(T::default(), |acc, (&x, &w)| acc + f(x) * w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tails_of_cauchy_density() {
        let f = |y: f64| 1.0 / (std::f64::consts::PI * (1.0 + y * y));
        let q = Adaptive::with_abs_tol(1e-13);
        let up = q.integrate_tail(f, 1.0, 1.0, true).unwrap().value;
        let down = q.integrate_tail(f, -1.0, 1.0, false).unwrap().value;
        assert!((up - 0.25).abs() < 1e-12);
        assert!((down - 0.25).abs() < 1e-12);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(7);
        // degree 12 monomial: int_{-1}^{1} x^12 = 2/13
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(12)).sum();
        assert!((s - 2.0 / 13.0).abs() < 1e-14);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn adaptive_handles_peaks() {
        let eta = 1e-3;
        let f = |x: f64| eta / std::f64::consts::PI / (x * x + eta * eta);
        let est = Adaptive::with_abs_tol(1e-11)
            .integrate(f, -1.0, 1.0)
            .unwrap();
        let exact = 2.0 / std::f64::consts::PI * (1.0 / eta).atan();
        assert!((est.value - exact).abs() < 1e-10);
    }

    #[test]
    fn real_line_cauchy_mass() {
        let f = |x: f64| 1.0 / (std::f64::consts::PI * (1.0 + (x - 3.0).powi(2)));
        let est = Adaptive::with_abs_tol(1e-12)
            .integrate_real_line(f, 3.0, 1.0)
            .unwrap();
        assert!((est.value - 1.0).abs() < 1e-11);
    }

    #[test]
    fn composite_rule_sine() {
        let r = CompositeRule::uniform(0.0, std::f64::consts::PI, 8, 10);
        let s: f64 = r.integrate(|x| x.sin());
        assert!((s - 2.0).abs() < 1e-14);
    }

    #[test]
    fn cap_reports_failure() {
        let q = Adaptive {
            abs_tol: 1e-300,
            rel_tol: 0.0,
            max_intervals: 8,
        };
        assert!(q.integrate(|x: f64| x.abs().sqrt(), -1.0, 1.0).is_err());
    }
}
