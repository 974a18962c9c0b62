//! Fixed node/weight rules that turn a Lebesgue interval into measure atoms.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuadratureRule {
    /// Cell midpoints, equal weights.
    Midpoint,
    /// Left endpoints `a + i h`, `i < n`, equal weights. Spectrally accurate
    /// for periodic integrands, first order otherwise.
    TrapezoidPeriodic,
    GaussLegendre,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureScheme {
    pub rule: QuadratureRule,
    pub node_count: usize,
    pub interval: (f64, f64),
}

impl QuadratureScheme {
    pub fn new(rule: QuadratureRule, node_count: usize, a: f64, b: f64) -> Result<Self> {
        if node_count == 0 {
            return Err(Error::InvalidArgument("quadrature needs at least one node".into()));
        }
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::InvalidArgument(format!(
                "quadrature interval [{a}, {b}] must be finite with a < b"
            )));
        }
        Ok(Self {
            rule,
            node_count,
            interval: (a, b),
        })
    }

    /// Nodes and positive weights; weights sum to `b - a`.
    pub fn nodes_weights(&self) -> (Vec<f64>, Vec<f64>) {
        let (a, b) = self.interval;
        let n = self.node_count;
        let h = (b - a) / n as f64;
        match self.rule {
            QuadratureRule::Midpoint => (
                (0..n).map(|i| a + (i as f64 + 0.5) * h).collect(),
                vec![h; n],
            ),
            QuadratureRule::TrapezoidPeriodic => {
                ((0..n).map(|i| a + i as f64 * h).collect(), vec![h; n])
            }
            QuadratureRule::GaussLegendre => {
                let (x, w) = gauss_legendre(n);
                let half = 0.5 * (b - a);
                let mid = 0.5 * (a + b);
                (
                    x.iter().map(|t| mid + half * t).collect(),
                    w.iter().map(|wi| half * wi).collect(),
                )
            }
        }
    }
}

/// Legendre polynomial `P_n(x)` and its derivative by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Gauss-Legendre nodes and weights on [-1, 1], nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess, then Newton.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() <= 1e-16 * x.abs().max(1.0) {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d.is_finite() {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        // Exact zero for the middle node.
        let (_, d) = legendre(n, 0.0);
        nodes[n / 2] = 0.0;
        weights[n / 2] = 2.0 / (d * d);
    }
    (nodes, weights)
}
