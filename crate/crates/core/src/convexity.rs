//! The function `phi`, its companion `f(t) = t phi(t)`, the domain interval
//! `I`, and numerical certification of the convexity of `f` on a range.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance on finite-difference second derivatives.
pub const FD_TOLERANCE: f64 = 1e-9;

/// Default grid size used by checks that certify shape internally.
pub const DEFAULT_GRID: usize = 64;

/// A real interval with independently open or closed ends; infinite ends are
/// always open.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl Interval {
    pub const REAL: Interval = Interval {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
        lo_closed: false,
        hi_closed: false,
    };

    pub const POSITIVE: Interval = Interval {
        lo: 0.0,
        hi: f64::INFINITY,
        lo_closed: false,
        hi_closed: false,
    };

    pub const NONNEGATIVE: Interval = Interval {
        lo: 0.0,
        hi: f64::INFINITY,
        lo_closed: true,
        hi_closed: false,
    };

    pub fn closed(lo: f64, hi: f64) -> Self {
        Self {
            lo,
            hi,
            lo_closed: lo.is_finite(),
            hi_closed: hi.is_finite(),
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        let above = if self.lo_closed { x >= self.lo } else { x > self.lo };
        let below = if self.hi_closed { x <= self.hi } else { x < self.hi };
        x.is_finite() && above && below
    }

    pub fn contains_interior(&self, x: f64) -> bool {
        x.is_finite() && x > self.lo && x < self.hi
    }

    pub fn intersect(&self, other: &Interval) -> Interval {
        let (lo, lo_closed) = if self.lo > other.lo {
            (self.lo, self.lo_closed)
        } else if other.lo > self.lo {
            (other.lo, other.lo_closed)
        } else {
            (self.lo, self.lo_closed && other.lo_closed)
        };
        let (hi, hi_closed) = if self.hi < other.hi {
            (self.hi, self.hi_closed)
        } else if other.hi < self.hi {
            (other.hi, other.hi_closed)
        } else {
            (self.hi, self.hi_closed && other.hi_closed)
        };
        Interval {
            lo,
            hi,
            lo_closed,
            hi_closed,
        }
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}{}, {}{}",
            if self.lo_closed { '[' } else { '(' },
            self.lo,
            self.hi,
            if self.hi_closed { ']' } else { ')' }
        )
    }
}

/// Shape of `f(t) = t phi(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Shape {
    Convex,
    StrictlyConvex,
    Concave,
    StrictlyConcave,
    Unknown,
}

impl Shape {
    pub fn is_convex(self) -> bool {
        matches!(self, Shape::Convex | Shape::StrictlyConvex)
    }

    pub fn is_concave(self) -> bool {
        matches!(self, Shape::Concave | Shape::StrictlyConcave)
    }

    pub fn is_strict(self) -> bool {
        matches!(self, Shape::StrictlyConvex | Shape::StrictlyConcave)
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Shape::Convex => "convex",
            Shape::StrictlyConvex => "strictly-convex",
            Shape::Concave => "concave",
            Shape::StrictlyConcave => "strictly-concave",
            Shape::Unknown => "unknown",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Family {
    Log,
    /// `phi(t) = t^r`.
    Power { exponent: f64 },
    Identity,
    /// Piecewise linear through `(t, phi(t))` points sorted by `t`.
    Tabulated { points: Vec<(f64, f64)> },
}

/// `phi` together with its domain and a user-declared shape for `f`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhiSpec {
    pub family: Family,
    pub domain: Interval,
    pub declared_shape: Shape,
}

impl PhiSpec {
    pub fn log() -> Self {
        Self {
            family: Family::Log,
            domain: Interval::POSITIVE,
            declared_shape: Shape::StrictlyConvex,
        }
    }

    pub fn identity() -> Self {
        Self {
            family: Family::Identity,
            domain: Interval::REAL,
            declared_shape: Shape::StrictlyConvex,
        }
    }

    pub fn power(exponent: f64) -> Self {
        let domain = if is_integer(exponent) {
            if exponent >= 0.0 {
                Interval::REAL
            } else {
                Interval::POSITIVE
            }
        } else if exponent > 0.0 {
            Interval::NONNEGATIVE
        } else {
            Interval::POSITIVE
        };
        Self {
            family: Family::Power { exponent },
            domain,
            declared_shape: Shape::Unknown,
        }
    }

    pub fn tabulated(mut points: Vec<(f64, f64)>, declared_shape: Shape) -> Result<Self> {
        if points.len() < 2 || points.iter().any(|(t, y)| !t.is_finite() || !y.is_finite()) {
            return Err(Error::InvalidArgument(
                "tabulated phi needs at least two finite points".into(),
            ));
        }
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        if points.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidArgument("tabulated phi has duplicate abscissae".into()));
        }
        let domain = Interval::closed(points[0].0, points[points.len() - 1].0);
        Ok(Self {
            family: Family::Tabulated { points },
            domain,
            declared_shape,
        })
    }

    /// Restrict the domain to its intersection with `other`.
    pub fn restricted_to(mut self, other: &Interval) -> Self {
        self.domain = self.domain.intersect(other);
        self
    }

    /// Short label matching the CLI grammar where possible.
    pub fn label(&self) -> String {
        match &self.family {
            Family::Log => "log".into(),
            Family::Identity => "id".into(),
            Family::Power { exponent } => format!("pow:{exponent}"),
            Family::Tabulated { points } => format!("tab:{}", points.len()),
        }
    }

    pub fn is_analytic(&self) -> bool {
        !matches!(self.family, Family::Tabulated { .. })
    }

    fn raw(&self, t: f64) -> f64 {
        match &self.family {
            Family::Log => t.ln(),
            Family::Identity => t,
            Family::Power { exponent } => pow(t, *exponent),
            Family::Tabulated { points } => interpolate(points, t),
        }
    }

    /// `phi(t)`; fails outside the domain or on a non-finite value.
    pub fn phi(&self, t: f64) -> Result<f64> {
        if !self.domain.contains(t) {
            return Err(Error::Evaluation(t));
        }
        let y = self.raw(t);
        if y.is_finite() {
            Ok(y)
        } else {
            Err(Error::Evaluation(t))
        }
    }

    /// `f(t) = t phi(t)`.
    pub fn f(&self, t: f64) -> Result<f64> {
        if let (Family::Log, 0.0) = (&self.family, t) {
            return Err(Error::Evaluation(t));
        }
        Ok(t * self.phi(t)?)
    }

    /// Closed-form `f''(t)`; `None` for tabulated `phi`.
    pub fn f_second(&self, t: f64) -> Option<f64> {
        match &self.family {
            Family::Log => Some(1.0 / t),
            Family::Identity => Some(2.0),
            Family::Power { exponent: r } => {
                let coeff = (r + 1.0) * r;
                if coeff == 0.0 {
                    Some(0.0)
                } else {
                    Some(coeff * pow(t, r - 1.0))
                }
            }
            Family::Tabulated { .. } => None,
        }
    }

    /// Exact `(inf, sup)` of `f''` over `[m, hi]` for analytic families.
    fn f_second_bounds(&self, m: f64, hi: f64) -> Option<(f64, f64)> {
        let mut candidates = vec![self.f_second(m)?, self.f_second(hi)?];
        // f'' is monotone on each side of zero for every analytic family.
        if m < 0.0 && hi > 0.0 {
            if let Some(v) = self.f_second(0.0) {
                if v.is_finite() {
                    candidates.push(v);
                }
            }
        }
        let lo = candidates.iter().copied().fold(f64::INFINITY, f64::min);
        let up = candidates.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Some((lo, up))
    }
}

impl fmt::Display for PhiSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl FromStr for PhiSpec {
    type Err = Error;

    /// `log`, `id`, or `pow:<r>` meaning `phi(t) = t^r`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "log" => Ok(PhiSpec::log()),
            "id" => Ok(PhiSpec::identity()),
            _ => {
                let r = s
                    .strip_prefix("pow:")
                    .and_then(|r| r.parse::<f64>().ok())
                    .filter(|r| r.is_finite())
                    .ok_or_else(|| Error::PhiParse(s.to_string()))?;
                Ok(PhiSpec::power(r))
            }
        }
    }
}

fn is_integer(x: f64) -> bool {
    x.fract() == 0.0 && x.abs() < i32::MAX as f64
}

fn pow(t: f64, r: f64) -> f64 {
    if is_integer(r) {
        t.powi(r as i32)
    } else {
        t.powf(r)
    }
}

fn interpolate(points: &[(f64, f64)], t: f64) -> f64 {
    let idx = points.partition_point(|p| p.0 < t);
    if idx == 0 {
        return points[0].1;
    }
    if idx == points.len() {
        return points[points.len() - 1].1;
    }
    let (x0, y0) = points[idx - 1];
    let (x1, y1) = points[idx];
    y0 + (y1 - y0) * (t - x0) / (x1 - x0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeCertificate {
    pub shape: Shape,
    pub grid: Vec<f64>,
    /// Smallest second derivative of `f` observed (exact for analytic families).
    pub min_f_second: f64,
    pub max_f_second: f64,
    pub tolerance: f64,
}

fn check_range(phi: &PhiSpec, (m, hi): (f64, f64), grid_size: usize) -> Result<()> {
    if grid_size < 3 {
        return Err(Error::InvalidArgument(format!("grid size {grid_size} < 3")));
    }
    if !(m.is_finite() && hi.is_finite() && m <= hi) {
        return Err(Error::InvalidArgument(format!("invalid range [{m}, {hi}]")));
    }
    if !(phi.domain.contains(m) && phi.domain.contains(hi)) {
        return Err(Error::RangeOutsideDomain {
            lo: m,
            hi,
            domain: phi.domain.to_string(),
        });
    }
    Ok(())
}

fn linspace(m: f64, hi: f64, n: usize) -> Vec<f64> {
    if m == hi {
        return vec![m];
    }
    let h = (hi - m) / (n - 1) as f64;
    (0..n)
        .map(|i| if i == n - 1 { hi } else { m + i as f64 * h })
        .collect()
}

/// Classify `f` on `[m, hi]`. Analytic families use the closed-form second
/// derivative; tabulated `phi` uses central differences and can only confirm
/// a declared shape.
pub fn certify_shape(phi: &PhiSpec, range: (f64, f64), grid_size: usize) -> Result<ShapeCertificate> {
    check_range(phi, range, grid_size)?;
    let (m, hi) = range;
    let grid = linspace(m, hi, grid_size);
    let Some((lo2, hi2)) = phi.f_second_bounds(m, hi) else {
        let mut cert = certify_shape_numeric(phi, range, grid_size)?;
        cert.shape = match phi.declared_shape {
            Shape::Unknown => Shape::Unknown,
            declared if declared.is_convex() && cert.min_f_second >= -cert.tolerance => declared,
            declared if declared.is_concave() && cert.max_f_second <= cert.tolerance => declared,
            _ => Shape::Unknown,
        };
        return Ok(cert);
    };
    if lo2.is_nan() || hi2.is_nan() {
        return Err(Error::Evaluation(m));
    }
    let shape = if m == hi {
        // constant degree profile: every inequality is an identity
        Shape::Convex
    } else if lo2 == 0.0 && hi2 == 0.0 {
        Shape::Convex
    } else if lo2 >= 0.0 {
        // analytic f'' vanishes at isolated points only
        Shape::StrictlyConvex
    } else if hi2 <= 0.0 {
        Shape::StrictlyConcave
    } else {
        Shape::Unknown
    };
    Ok(ShapeCertificate {
        shape,
        grid,
        min_f_second: lo2,
        max_f_second: hi2,
        tolerance: 0.0,
    })
}

/// Central-difference classification with step equal to the grid spacing.
pub fn certify_shape_numeric(
    phi: &PhiSpec,
    range: (f64, f64),
    grid_size: usize,
) -> Result<ShapeCertificate> {
    check_range(phi, range, grid_size)?;
    let (m, hi) = range;
    let grid = linspace(m, hi, grid_size);
    if grid.len() == 1 {
        let d2 = phi.f_second(m).unwrap_or(0.0);
        return Ok(ShapeCertificate {
            shape: Shape::Convex,
            grid,
            min_f_second: d2,
            max_f_second: d2,
            tolerance: FD_TOLERANCE,
        });
    }
    let h = (hi - m) / (grid_size - 1) as f64;
    let values = grid.iter().map(|&t| phi.f(t)).collect::<Result<Vec<_>>>()?;
    let (mut lo2, mut hi2) = (f64::INFINITY, f64::NEG_INFINITY);
    for w in values.windows(3) {
        let d2 = (w[0] - 2.0 * w[1] + w[2]) / (h * h);
        lo2 = lo2.min(d2);
        hi2 = hi2.max(d2);
    }
    let tol = FD_TOLERANCE;
    let shape = if lo2 >= -tol && hi2 <= tol {
        Shape::Convex
    } else if lo2 >= -tol {
        if lo2 > tol {
            Shape::StrictlyConvex
        } else {
            Shape::Convex
        }
    } else if hi2 <= tol {
        if hi2 < -tol {
            Shape::StrictlyConcave
        } else {
            Shape::Concave
        }
    } else {
        Shape::Unknown
    };
    Ok(ShapeCertificate {
        shape,
        grid,
        min_f_second: lo2,
        max_f_second: hi2,
        tolerance: tol,
    })
}

/// Lower bound `alpha >= 0` on `f''` over `[m, hi]`.
pub fn estimate_alpha(phi: &PhiSpec, range: (f64, f64), grid_size: usize) -> Result<f64> {
    let cert = certify_shape(phi, range, grid_size)?;
    if !cert.shape.is_convex() {
        return Err(Error::ShapeMismatch {
            required: "convex",
            found: cert.shape.to_string(),
        });
    }
    Ok(cert.min_f_second.max(0.0))
}
