//! Both sides of every Jensen-type inequality on an [`Instance`], with gaps,
//! status and equality flags.
//!
//! Every left-hand side that is a double sum over `V x E` is computed twice:
//! once as the literal double sum and once through the marginal form
//! `(1/s) sum_v f(delta_v) mu_v`. The two must agree to
//! [`KEY_IDENTITY_REL`], otherwise the check fails with
//! [`Error::KeyIdentity`]. The double-sum value is the one reported.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::convexity::{certify_shape, estimate_alpha, PhiSpec, Shape, DEFAULT_GRID};
use crate::degree::{characterize, effective_phi, DegreeProfile, DEFAULT_COLUMN_TOL};
use crate::error::{Error, Result};
use crate::measure::{restrict_edges, Instance, SequenceModel};

/// Relative agreement required between the double sum and the marginal form.
pub const KEY_IDENTITY_REL: f64 = 1e-9;

/// `delta` counts as constant when its spread is at most this times `|mean|`.
pub const CONSTANT_DELTA_REL: f64 = 1e-7;

/// Relative spread above which `delta` counts as genuinely nonconstant, so a
/// check that characterizes its equality case must report a strict gap.
/// Between this and [`CONSTANT_DELTA_REL`] the gap is of order spread^2 and
/// may legitimately fall under the equality tolerance.
pub const DISTINCT_DELTA_REL: f64 = 1e-3;

/// Spread above which a perturbed profile must beat the constant one strictly.
pub const STRICT_SPREAD: f64 = 1e-9;

const PERTURBATION_ATTEMPTS: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    /// `|gap| <= eq` raises the equality flag.
    pub eq: f64,
    /// Column-integral constancy, relative to `|c|`.
    pub column: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            abs: 1e-9,
            rel: 1e-9,
            eq: 1e-9,
            column: DEFAULT_COLUMN_TOL,
        }
    }
}

impl Tolerance {
    pub fn effective(&self, lhs: f64, rhs: f64) -> f64 {
        self.abs + self.rel * lhs.abs().max(rhs.abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = ">=")]
    AtLeast,
    #[serde(rename = "<=")]
    AtMost,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Holds,
    Violated,
    Equality,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Holds => "holds",
            Status::Violated => "violated",
            Status::Equality => "equality",
        })
    }
}

/// Which normalization a mean-type check uses. `PaperLiteral` reproduces the
/// display as printed; its rows are informational and never asserted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Normalized,
    PaperLiteral,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Normalized => "normalized",
            Variant::PaperLiteral => "paper-literal",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub check_name: String,
    pub phi: Option<String>,
    pub direction: Direction,
    pub lhs: f64,
    pub rhs: f64,
    /// `lhs - rhs`.
    pub gap: f64,
    pub bound: Option<f64>,
    pub status: Status,
    pub equality_flag: bool,
    pub tol: f64,
    /// `false` for informational rows.
    pub asserted: bool,
    /// Left-hand side through the marginal form, when there is one.
    pub lhs_identity: Option<f64>,
    /// Magnitude of the summed terms in `lhs` units, the scale of the
    /// identity comparison.
    pub identity_scale: Option<f64>,
    pub delta_constant: Option<bool>,
    /// Relative spread of `delta` that `delta_constant` was decided on.
    pub delta_spread: Option<f64>,
    /// Whether equality is claimed to occur exactly for constant `delta`.
    pub characterizes_equality: bool,
    #[serde(default)]
    pub extras: Vec<(String, f64)>,
}

impl CheckResult {
    pub(crate) fn new(name: impl Into<String>, direction: Direction, lhs: f64, rhs: f64, tol: &Tolerance) -> Self {
        let gap = lhs - rhs;
        let eff = tol.effective(lhs, rhs);
        let violated = match direction {
            Direction::AtLeast => !(gap >= -eff),
            Direction::AtMost => !(gap <= eff),
        };
        let equality_flag = !violated && gap.abs() <= tol.eq;
        let status = if violated {
            Status::Violated
        } else if equality_flag {
            Status::Equality
        } else {
            Status::Holds
        };
        Self {
            check_name: name.into(),
            phi: None,
            direction,
            lhs,
            rhs,
            gap,
            bound: None,
            status,
            equality_flag,
            tol: eff,
            asserted: true,
            lhs_identity: None,
            identity_scale: None,
            delta_constant: None,
            delta_spread: None,
            characterizes_equality: false,
            extras: Vec::new(),
        }
    }

    fn with_phi(mut self, phi: &PhiSpec) -> Self {
        self.phi = Some(phi.label());
        self
    }

    fn informational(mut self) -> Self {
        self.asserted = false;
        self
    }

    fn extra(mut self, key: &str, value: f64) -> Self {
        self.extras.push((key.to_string(), value));
        self
    }

    pub fn is_violated(&self) -> bool {
        self.status == Status::Violated
    }

    pub(crate) fn set_spread(&mut self, relative_spread: f64) {
        self.delta_spread = Some(relative_spread);
        self.delta_constant = Some(relative_spread <= CONSTANT_DELTA_REL);
    }

    /// `Some(false)` when the equality flag disagrees with constancy of
    /// `delta` on a check that characterizes its equality case. `None` when
    /// the spread is in the band where either outcome is legitimate.
    pub fn characterization_consistent(&self) -> Option<bool> {
        if !self.characterizes_equality {
            return None;
        }
        let spread = self.delta_spread?;
        if spread <= CONSTANT_DELTA_REL {
            Some(self.equality_flag)
        } else if spread > DISTINCT_DELTA_REL {
            Some(!self.equality_flag)
        } else {
            None
        }
    }

    /// Disagreement between the two left-hand-side routes, relative to the
    /// larger of the two values and the magnitude of the summed terms.
    pub fn identity_discrepancy(&self) -> Option<f64> {
        self.lhs_identity.map(|alt| {
            let scale = self
                .lhs
                .abs()
                .max(alt.abs())
                .max(self.identity_scale.unwrap_or(0.0))
                .max(f64::MIN_POSITIVE);
            (self.lhs - alt).abs() / scale
        })
    }

    pub fn get_extra(&self, key: &str) -> Option<f64> {
        self.extras.iter().find(|(k, _)| k == key).map(|&(_, v)| v)
    }
}

/// `(sum, sum of |terms|)` of `g_v M(v,e) wt_e mu_v tau_e` over `V x E`.
fn double_sum(inst: &Instance, g: &[f64]) -> (f64, f64) {
    let mu = inst.v_masses();
    let tau = inst.e_masses();
    let wt = inst.weights();
    let (mut sum, mut abs) = (0.0, 0.0);
    for (v, &gv) in g.iter().enumerate() {
        for ((&m, &w), &t) in inst.kernel_row(v).iter().zip(wt).zip(tau) {
            let term = gv * m * w * mu[v] * t;
            sum += term;
            abs += term.abs();
        }
    }
    (sum, abs)
}

fn marginal_sum(profile: &DegreeProfile, h: &[f64]) -> (f64, f64) {
    let (mut sum, mut abs) = (0.0, 0.0);
    for (hv, m) in h.iter().zip(profile.v_masses()) {
        sum += hv * m;
        abs += (hv * m).abs();
    }
    (sum, abs)
}

fn key_identity(double: (f64, f64), marginal: (f64, f64)) -> Result<()> {
    let scale = double.1.max(marginal.1).max(f64::MIN_POSITIVE);
    if (double.0 - marginal.0).abs() <= KEY_IDENTITY_REL * scale {
        Ok(())
    } else {
        Err(Error::KeyIdentity {
            double_sum: double.0,
            marginal: marginal.0,
        })
    }
}

fn ensure_in_domain(profile: &DegreeProfile, phi: &PhiSpec) -> Result<()> {
    match profile.delta.iter().position(|&d| !phi.domain.contains(d)) {
        Some(index) => Err(Error::DegreeOutsideDomain {
            index,
            value: profile.delta[index],
            domain: phi.domain.to_string(),
        }),
        None => Ok(()),
    }
}

fn phi_at_mean(profile: &DegreeProfile, phi: &PhiSpec) -> Result<f64> {
    if !phi.domain.contains_interior(profile.delta_bar) {
        return Err(Error::MeanOutsideDomain {
            mean: profile.delta_bar,
            domain: phi.domain.to_string(),
        });
    }
    phi.phi(profile.delta_bar)
}

fn range(profile: &DegreeProfile) -> (f64, f64) {
    (profile.min_delta(), profile.max_delta())
}

/// Both sides of the main inequality, shape-agnostic.
struct JensenSides {
    lhs: f64,
    lhs_identity: f64,
    scale: f64,
    rhs: f64,
}

fn jensen_sides(profile: &DegreeProfile, phi: &PhiSpec) -> Result<JensenSides> {
    let phi_delta = profile
        .delta
        .iter()
        .map(|&d| phi.phi(d))
        .collect::<Result<Vec<_>>>()?;
    let f_delta: Vec<f64> = phi_delta.iter().zip(&profile.delta).map(|(p, d)| p * d).collect();
    let double = double_sum(profile.instance, &phi_delta);
    let marginal = marginal_sum(profile, &f_delta);
    key_identity(double, marginal)?;
    let rhs = profile.c * phi_at_mean(profile, phi)?;
    Ok(JensenSides {
        lhs: double.0 / profile.s,
        lhs_identity: marginal.0 / profile.s,
        scale: double.1.max(marginal.1) / profile.s,
        rhs,
    })
}

fn required_shape(
    profile: &DegreeProfile,
    phi: &PhiSpec,
    required: &'static str,
    accept: impl Fn(Shape) -> bool,
) -> Result<Shape> {
    let cert = certify_shape(phi, range(profile), DEFAULT_GRID)?;
    let (lo, hi) = range(profile);
    if lo == hi || accept(cert.shape) {
        Ok(cert.shape)
    } else {
        Err(Error::ShapeMismatch {
            required,
            found: cert.shape.to_string(),
        })
    }
}

/// `(1/s) sum phi(delta_v) M wt d(mu x tau) >= c phi(mean)`; equality exactly
/// for constant `delta` when `f` is strictly convex.
pub fn main_inequality(profile: &DegreeProfile, phi: &PhiSpec, tol: &Tolerance) -> Result<CheckResult> {
    let phi = effective_phi(profile.instance, phi);
    ensure_in_domain(profile, &phi)?;
    let shape = required_shape(profile, &phi, "convex", Shape::is_convex)?;
    let sides = jensen_sides(profile, &phi)?;
    let mut out = CheckResult::new("main", Direction::AtLeast, sides.lhs, sides.rhs, tol).with_phi(&phi);
    out.lhs_identity = Some(sides.lhs_identity);
    out.identity_scale = Some(sides.scale);
    out.set_spread(profile.relative_spread());
    out.characterizes_equality = shape.is_strict() || profile.spread() == 0.0;
    Ok(out)
}

/// Uniform-convexity constant, range, and the resulting quadratic term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StabilityParams {
    pub alpha: f64,
    pub range: (f64, f64),
    /// `(alpha / 2s) sum (delta_v - mean)^2 mu_v`.
    pub variance_term: f64,
}

impl StabilityParams {
    pub fn new(profile: &DegreeProfile, alpha: f64, range: (f64, f64)) -> Result<Self> {
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidArgument(format!("alpha = {alpha} must be finite and >= 0")));
        }
        if range.0 > profile.min_delta() || range.1 < profile.max_delta() {
            return Err(Error::InvalidArgument(format!(
                "stability range [{}, {}] does not cover the degrees [{}, {}]",
                range.0,
                range.1,
                profile.min_delta(),
                profile.max_delta()
            )));
        }
        let spread: f64 = profile
            .delta
            .iter()
            .zip(profile.v_masses())
            .map(|(d, m)| (d - profile.delta_bar).powi(2) * m)
            .sum();
        Ok(Self {
            alpha,
            range,
            variance_term: alpha / (2.0 * profile.s) * spread,
        })
    }

    /// `alpha` estimated on the exact degree range.
    pub fn estimate(profile: &DegreeProfile, phi: &PhiSpec) -> Result<Self> {
        let phi = effective_phi(profile.instance, phi);
        let r = range(profile);
        let alpha = estimate_alpha(&phi, r, DEFAULT_GRID)?;
        Self::new(profile, alpha, r)
    }
}

/// Main inequality sharpened by the quadratic term; `gap` is the slack
/// `lhs - c phi(mean) - variance_term`.
pub fn stability_check(
    profile: &DegreeProfile,
    phi: &PhiSpec,
    params: &StabilityParams,
    tol: &Tolerance,
) -> Result<CheckResult> {
    let phi = effective_phi(profile.instance, phi);
    ensure_in_domain(profile, &phi)?;
    let (lo, hi) = params.range;
    if lo > profile.min_delta() || hi < profile.max_delta() {
        return Err(Error::InvalidArgument("stability range does not cover the degrees".into()));
    }
    let cert = certify_shape(&phi, params.range, DEFAULT_GRID)?;
    if !(cert.shape.is_convex() || lo == hi) {
        return Err(Error::ShapeMismatch {
            required: "convex",
            found: cert.shape.to_string(),
        });
    }
    let sides = jensen_sides(profile, &phi)?;
    let rhs = sides.rhs + params.variance_term;
    let mut out = CheckResult::new("stability", Direction::AtLeast, sides.lhs, rhs, tol)
        .with_phi(&phi)
        .extra("alpha", params.alpha)
        .extra("main_gap", sides.lhs - sides.rhs);
    out.bound = Some(params.variance_term);
    out.lhs_identity = Some(sides.lhs_identity);
    out.identity_scale = Some(sides.scale);
    out.set_spread(profile.relative_spread());
    Ok(out)
}

/// Reverse inequality for concave `f`.
pub fn concave_reversal(profile: &DegreeProfile, phi: &PhiSpec, tol: &Tolerance) -> Result<CheckResult> {
    let phi = effective_phi(profile.instance, phi);
    ensure_in_domain(profile, &phi)?;
    let shape = required_shape(profile, &phi, "concave", Shape::is_concave)?;
    let sides = jensen_sides(profile, &phi)?;
    let mut out =
        CheckResult::new("concave-reversal", Direction::AtMost, sides.lhs, sides.rhs, tol).with_phi(&phi);
    out.lhs_identity = Some(sides.lhs_identity);
    out.identity_scale = Some(sides.scale);
    out.set_spread(profile.relative_spread());
    out.characterizes_equality = shape == Shape::StrictlyConcave || profile.spread() == 0.0;
    Ok(out)
}

/// `F(x) = (1/s) sum_v f(x_v) mu_v`.
fn functional(profile: &DegreeProfile, phi: &PhiSpec, x: &[f64]) -> Result<f64> {
    let mut sum = 0.0;
    for (&xv, m) in x.iter().zip(profile.v_masses()) {
        sum += phi.f(xv)? * m;
    }
    Ok(sum / profile.s)
}

/// Random admissible profiles `x` with `sum x mu = c s`, built from the
/// constant profile by pairwise mass transfers and re-centered exactly.
fn admissible_profiles(
    profile: &DegreeProfile,
    phi: &PhiSpec,
    trials: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let mu = profile.v_masses();
    let p = mu.len();
    let mean = profile.delta_bar;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(trials);
    let mut feasible = 0usize;
    for _ in 0..trials {
        let mut x = vec![mean; p];
        if p >= 2 && mean != 0.0 {
            let moves = rng.gen_range(1..=p);
            let mut accepted = 0;
            for _ in 0..moves {
                for _ in 0..PERTURBATION_ATTEMPTS {
                    let i = rng.gen_range(0..p);
                    let mut j = rng.gen_range(0..p - 1);
                    if j >= i {
                        j += 1;
                    }
                    let amount = 0.2 * mean.abs() * (1.0 - rng.gen::<f64>());
                    let xi = x[i] + amount / mu[i];
                    let xj = x[j] - amount / mu[j];
                    if phi.domain.contains(xi) && phi.domain.contains(xj) {
                        x[i] = xi;
                        x[j] = xj;
                        accepted += 1;
                        break;
                    }
                }
            }
            let total: f64 = mu.iter().sum();
            let residual = x.iter().zip(mu).map(|(a, m)| a * m).sum::<f64>() - mean * total;
            for xv in &mut x {
                *xv -= residual / total;
            }
            if accepted > 0 && x.iter().all(|&xv| phi.domain.contains(xv)) {
                feasible += 1;
            } else {
                x = vec![mean; p];
            }
        } else {
            feasible += 1;
        }
        out.push(x);
    }
    if trials > 0 && feasible == 0 {
        return Err(Error::PerturbationInfeasible(phi.domain.to_string()));
    }
    Ok(out)
}

/// Compares `F` at the given profile and at `trials` random admissible
/// profiles against `F` at the constant profile. `lhs` is `F(delta)`, `rhs`
/// is `F(mean)`; the check is violated if any trial falls below `rhs`.
pub fn variational_scan(
    profile: &DegreeProfile,
    phi: &PhiSpec,
    trials: usize,
    seed: u64,
    tol: &Tolerance,
) -> Result<CheckResult> {
    let phi = effective_phi(profile.instance, phi);
    ensure_in_domain(profile, &phi)?;
    if !phi.domain.contains(profile.delta_bar) {
        return Err(Error::MeanOutsideDomain {
            mean: profile.delta_bar,
            domain: phi.domain.to_string(),
        });
    }
    let candidates = admissible_profiles(profile, &phi, trials, seed)?;
    let (mut lo, mut hi) = range(profile);
    for x in &candidates {
        for &xv in x {
            lo = lo.min(xv);
            hi = hi.max(xv);
        }
    }
    let cert = certify_shape(&phi, (lo, hi), DEFAULT_GRID)?;
    if lo != hi && cert.shape != Shape::StrictlyConvex {
        return Err(Error::ShapeMismatch {
            required: "strictly-convex",
            found: cert.shape.to_string(),
        });
    }

    let constant = vec![profile.delta_bar; profile.delta.len()];
    let f_min = functional(profile, &phi, &constant)?;
    let f_profile = functional(profile, &phi, &profile.delta)?;
    let mut worst = f64::INFINITY;
    let mut strict_failures = 0usize;
    let mut below = 0usize;
    let eps = tol.effective(f_min, f_min);
    for x in &candidates {
        let value = functional(profile, &phi, x)?;
        worst = worst.min(value);
        if value < f_min - eps {
            below += 1;
        }
        let spread = x.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            - x.iter().copied().fold(f64::INFINITY, f64::min);
        if spread > STRICT_SPREAD * profile.delta_bar.abs().max(1.0) && !(value > f_min) {
            strict_failures += 1;
        }
    }

    let mut out = CheckResult::new("variational", Direction::AtLeast, f_profile, f_min, tol)
        .with_phi(&phi)
        .extra("trials", candidates.len() as f64)
        .extra("trial_min", worst)
        .extra("trials_below", below as f64)
        .extra("strict_failures", strict_failures as f64);
    if below > 0 {
        out.status = Status::Violated;
        out.equality_flag = false;
    }
    out.set_spread(profile.relative_spread());
    out.characterizes_equality = true;
    Ok(out)
}

fn signed_pow(d: f64, r: f64) -> Result<f64> {
    if d < 0.0 && r.fract() != 0.0 {
        return Err(Error::NegativeBase { value: d, exponent: r });
    }
    Ok(if r.fract() == 0.0 && r.abs() < i32::MAX as f64 {
        d.powi(r as i32)
    } else {
        d.powf(r)
    })
}

/// `B_r = (1/s) sum delta^r M wt d(mu x tau)` and its marginal form.
fn power_moment(profile: &DegreeProfile, r: f64) -> Result<(f64, f64)> {
    let g = profile
        .delta
        .iter()
        .map(|&d| signed_pow(d, r))
        .collect::<Result<Vec<_>>>()?;
    let h = profile
        .delta
        .iter()
        .map(|&d| signed_pow(d, r + 1.0))
        .collect::<Result<Vec<_>>>()?;
    let double = double_sum(profile.instance, &g);
    let marginal = marginal_sum(profile, &h);
    key_identity(double, marginal)?;
    Ok((double.0 / profile.s, marginal.0 / profile.s))
}

fn exponent_list(xs: &[f64]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

/// Consecutive power-mean comparisons. `Normalized` compares
/// `(B_r / c)^(1/r)`, the `r`-th moment root of `delta` under `rho`, and is
/// nondecreasing in `r`. `PaperLiteral` compares `B_r^(1/r)` and is
/// informational.
pub fn power_mean_chain(
    profile: &DegreeProfile,
    exponents: &[f64],
    variant: Variant,
    tol: &Tolerance,
) -> Result<Vec<CheckResult>> {
    if exponents.len() < 2
        || exponents.iter().any(|&r| !(r > 0.0 && r.is_finite()))
        || exponents.windows(2).any(|w| w[0] >= w[1])
    {
        return Err(Error::InvalidArgument(format!(
            "exponents {exponents:?} must be positive and strictly ascending (at least two)"
        )));
    }
    if variant == Variant::Normalized && profile.rho.is_none() {
        return Err(Error::RhoUnavailable);
    }
    let moments = exponents
        .iter()
        .map(|&r| power_moment(profile, r))
        .collect::<Result<Vec<_>>>()?;
    let root = |b: f64, r: f64| match variant {
        Variant::Normalized => (b / profile.c).powf(1.0 / r),
        Variant::PaperLiteral => b.powf(1.0 / r),
    };
    // equality in Lyapunov's inequality only needs delta constant rho-a.e.
    let spread = profile.support_spread();
    let mut out = Vec::with_capacity(exponents.len() - 1);
    for k in 1..exponents.len() {
        let (q, p) = (exponents[k - 1], exponents[k]);
        let lhs = root(moments[k].0, p);
        let rhs = root(moments[k - 1].0, q);
        let name = format!("power-mean:{}[{}]", variant.name(), exponent_list(&[q, p]));
        let mut row = CheckResult::new(name, Direction::AtLeast, lhs, rhs, tol)
            .extra("p", p)
            .extra("q", q)
            .extra("B_p", moments[k].0)
            .extra("B_q", moments[k - 1].0);
        row.lhs_identity = Some(root(moments[k].1, p));
        row.set_spread(spread);
        if variant == Variant::Normalized {
            row.characterizes_equality = true;
        } else {
            row = row.informational();
        }
        out.push(row);
    }
    Ok(out)
}

fn require_nonnegative(profile: &DegreeProfile) -> Result<()> {
    match profile.delta.iter().position(|&d| d < 0.0) {
        Some(index) => Err(Error::NegativeBase {
            value: profile.delta[index],
            exponent: f64::NAN,
        }),
        None => Ok(()),
    }
}

fn require_positive(profile: &DegreeProfile) -> Result<()> {
    match profile.delta.iter().position(|&d| !(d > 0.0)) {
        Some(index) => Err(Error::NonPositiveDegree {
            index,
            value: profile.delta[index],
        }),
        None => Ok(()),
    }
}

/// Usual power-mean inequality for `delta` under `mu`, `p >= 1`.
pub fn marginal_power_mean(profile: &DegreeProfile, p: f64, tol: &Tolerance) -> Result<CheckResult> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::InvalidArgument(format!("power-mean exponent {p} must be >= 1")));
    }
    require_nonnegative(profile)?;
    let moment: f64 = profile
        .delta
        .iter()
        .zip(profile.v_masses())
        .map(|(d, m)| d.powf(p) * m)
        .sum::<f64>()
        / profile.mu_total;
    let mean: f64 = profile
        .delta
        .iter()
        .zip(profile.v_masses())
        .map(|(d, m)| d * m)
        .sum::<f64>()
        / profile.mu_total;
    let mut out = CheckResult::new(
        format!("marginal-power-mean[{p}]"),
        Direction::AtLeast,
        moment.powf(1.0 / p),
        mean,
        tol,
    );
    out.set_spread(profile.relative_spread());
    out.characterizes_equality = p > 1.0;
    Ok(out)
}

/// `(1/s) sum delta^(p-1) M wt d(mu x tau) >= c mean^(p-1)`, `p >= 1`.
pub fn power_mean_product(profile: &DegreeProfile, p: f64, tol: &Tolerance) -> Result<CheckResult> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::InvalidArgument(format!("power-mean exponent {p} must be >= 1")));
    }
    require_nonnegative(profile)?;
    let (lhs, lhs_identity) = power_moment(profile, p - 1.0)?;
    let rhs = profile.c * profile.delta_bar.powf(p - 1.0);
    let mut out = CheckResult::new(format!("power-mean-product[{p}]"), Direction::AtLeast, lhs, rhs, tol);
    out.lhs_identity = Some(lhs_identity);
    out.set_spread(profile.relative_spread());
    out.characterizes_equality = p > 1.0;
    Ok(out)
}

/// `H = -(1/(cs)) sum ln(delta_v / mean) M wt d(mu x tau) <= 0`.
pub fn entropy_check(profile: &DegreeProfile, tol: &Tolerance) -> Result<CheckResult> {
    require_positive(profile)?;
    let cs = profile.c * profile.s;
    if !(cs > 0.0) {
        return Err(Error::RhoUnavailable);
    }
    let mean = profile.delta_bar;
    let log_ratio: Vec<f64> = profile.delta.iter().map(|d| (d / mean).ln()).collect();
    let weighted: Vec<f64> = log_ratio.iter().zip(&profile.delta).map(|(l, d)| l * d).collect();
    let double = double_sum(profile.instance, &log_ratio);
    let marginal = marginal_sum(profile, &weighted);
    key_identity(double, marginal)?;
    let mut out = CheckResult::new("entropy", Direction::AtMost, -double.0 / cs, 0.0, tol);
    out.lhs_identity = Some(-marginal.0 / cs);
    out.identity_scale = Some(double.1.max(marginal.1) / cs);
    out.set_spread(profile.relative_spread());
    out.characterizes_equality = true;
    Ok(out)
}

/// Main inequality after zeroing the weights on `erased` e-atoms, with the
/// unchanged column constant `c`. The constants obtained from the retained
/// set's `tau`-mass are reported as extras for comparison only.
pub fn erasure_check(inst: &Instance, erased: &[bool], phi: &PhiSpec, tol: &Tolerance) -> Result<CheckResult> {
    let restricted = restrict_edges(inst, erased)?;
    let profile = characterize(&restricted, tol.column)?;
    let mut out = main_inequality(&profile, phi, tol)?;
    out.check_name = "erasure".into();
    let retained_tau: f64 = inst
        .e_masses()
        .iter()
        .zip(erased)
        .filter(|(_, &gone)| !gone)
        .map(|(t, _)| t)
        .sum();
    let alt_mean = retained_tau * profile.s / profile.mu_total;
    let alt_rhs = effective_phi(inst, phi)
        .phi(alt_mean)
        .map(|y| retained_tau * y)
        .unwrap_or(f64::NAN);
    Ok(out
        .extra("s_restricted", profile.s)
        .extra("mean_restricted", profile.delta_bar)
        .extra("erased_atoms", erased.iter().filter(|&&e| e).count() as f64)
        .extra("retained_tau_mass", retained_tau)
        .extra("retained_tau_mean", alt_mean)
        .extra("retained_tau_rhs", alt_rhs))
}

/// Exponentiated `phi = ln` case: `exp((1/(cs)) sum M wt ln(delta) d(mu x tau)) >= mean`.
/// `PaperLiteral` divides by `s` instead of `c s`.
pub fn geometric_mean_check(profile: &DegreeProfile, variant: Variant, tol: &Tolerance) -> Result<CheckResult> {
    require_positive(profile)?;
    let norm = match variant {
        Variant::Normalized => profile.c * profile.s,
        Variant::PaperLiteral => profile.s,
    };
    if variant == Variant::Normalized && !(norm > 0.0) {
        return Err(Error::RhoUnavailable);
    }
    let logs: Vec<f64> = profile.delta.iter().map(|d| d.ln()).collect();
    let weighted: Vec<f64> = logs.iter().zip(&profile.delta).map(|(l, d)| l * d).collect();
    let double = double_sum(profile.instance, &logs);
    let marginal = marginal_sum(profile, &weighted);
    key_identity(double, marginal)?;
    let mut out = CheckResult::new(
        format!("geometric-mean:{}", variant.name()),
        Direction::AtLeast,
        (double.0 / norm).exp(),
        profile.delta_bar,
        tol,
    )
    .extra("log_lhs", double.0 / norm);
    out.lhs_identity = Some((marginal.0 / norm).exp());
    out.set_spread(profile.relative_spread());
    if variant == Variant::Normalized {
        out.characterizes_equality = true;
    } else {
        // claimed by the display, so constant delta exposes the normalization
        out.characterizes_equality = true;
        out = out.informational();
    }
    Ok(out)
}

/// The two sequence-space inequalities with the diagonal kernel
/// `m_ii = 1 / a_i`: the `phi`-form and the log-product form (`phi = ln`),
/// the latter compared in log domain.
pub fn sequence_inequalities(
    model: &SequenceModel,
    phi: &PhiSpec,
    tol: &Tolerance,
) -> Result<(CheckResult, CheckResult)> {
    let a = model.a();
    let u = model.u();
    let s: f64 = u.iter().sum();
    let a_total: f64 = a.iter().sum();
    let ratios: Vec<f64> = u.iter().zip(a).map(|(ui, ai)| ui / ai).collect();
    let (lo, hi) = ratios
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &r| (l.min(r), h.max(r)));
    let spread = (hi - lo) / (s / a_total);

    let cert = certify_shape(phi, (lo, hi), DEFAULT_GRID)?;
    if !(cert.shape.is_convex() || lo == hi) {
        return Err(Error::ShapeMismatch {
            required: "convex",
            found: cert.shape.to_string(),
        });
    }
    let mut lhs = 0.0;
    let mut lhs_identity = 0.0;
    for ((r, ui), ai) in ratios.iter().zip(u).zip(a) {
        lhs += phi.phi(*r)? * ui;
        lhs_identity += phi.f(*r)? * ai;
    }
    let mean = s / a_total;
    if !phi.domain.contains_interior(mean) {
        return Err(Error::MeanOutsideDomain {
            mean,
            domain: phi.domain.to_string(),
        });
    }
    let mut first = CheckResult::new("sequence:phi", Direction::AtLeast, lhs / s, phi.phi(mean)?, tol).with_phi(phi);
    first.lhs_identity = Some(lhs_identity / s);
    first.set_spread(spread);
    first.characterizes_equality = cert.shape.is_strict() || lo == hi;

    let log_lhs: f64 = u.iter().zip(&ratios).map(|(ui, r)| ui * r.ln()).sum();
    let abs_check: f64 = u.iter().zip(&ratios).map(|(ui, r)| ui * r.ln().abs()).sum();
    if !abs_check.is_finite() || !log_lhs.is_finite() {
        return Err(Error::Evaluation(abs_check));
    }
    let log_rhs = s * mean.ln();
    let mut second = CheckResult::new("sequence:log-product", Direction::AtLeast, log_lhs, log_rhs, tol)
        .extra("product_lhs", log_lhs.exp())
        .extra("product_rhs", log_rhs.exp());
    second.phi = Some("log".into());
    second.set_spread(spread);
    second.characterizes_equality = true;
    Ok((first, second))
}
