//! The degree functional `delta(v) = sum_e M(v,e) wt(e) tau_e`, the totals
//! `s` and `c`, the mean degree, and the induced probability measure `rho`.

use serde::Serialize;

use crate::convexity::{Interval, PhiSpec};
use crate::error::{Error, Result};
use crate::measure::Instance;

/// Default tolerance on column-integral constancy, relative to `|c|`.
pub const DEFAULT_COLUMN_TOL: f64 = 1e-9;

/// Relative tolerance of the mean identity `mean = c s / mu(V)` for exact
/// constructors; column deviations allowed by `column_tol` are added on top.
pub const MEAN_IDENTITY_REL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct DegreeProfile<'a> {
    pub instance: &'a Instance,
    pub delta: Vec<f64>,
    /// `s = sum_e wt_e tau_e`.
    pub s: f64,
    /// Common column integral, taken from the first e-atom.
    pub c: f64,
    pub delta_bar: f64,
    pub mu_total: f64,
    /// `rho_v = delta_v mu_v / (c s)`; `None` unless `c s > 0` and `delta >= 0`.
    pub rho: Option<Vec<f64>>,
    /// `mean * mu(V) - c * s`.
    pub identity_residual: f64,
}

impl DegreeProfile<'_> {
    pub fn min_delta(&self) -> f64 {
        self.delta.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_delta(&self) -> f64 {
        self.delta.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn spread(&self) -> f64 {
        self.max_delta() - self.min_delta()
    }

    pub fn v_masses(&self) -> &[f64] {
        self.instance.v_masses()
    }

    /// `delta` constant up to `rel * max(|mean|, tiny)`.
    pub fn is_constant(&self, rel: f64) -> bool {
        self.relative_spread() <= rel
    }

    /// `spread / |mean|`; zero for constant `delta`.
    pub fn relative_spread(&self) -> f64 {
        let spread = self.spread();
        if spread == 0.0 {
            0.0
        } else {
            spread / self.delta_bar.abs().max(f64::MIN_POSITIVE)
        }
    }

    /// Relative spread over the atoms where `delta` is nonzero, i.e. the
    /// support of `rho`.
    pub fn support_spread(&self) -> f64 {
        let (lo, hi) = self
            .delta
            .iter()
            .filter(|&&d| d != 0.0)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &d| (l.min(d), h.max(d)));
        if !(hi > lo) {
            0.0
        } else {
            (hi - lo) / self.delta_bar.abs().max(f64::MIN_POSITIVE)
        }
    }
}

/// Compute `delta`, `s`, `c`, the mean and `rho`, verifying that column
/// integrals agree within `column_tol * |c|` and that the mean equals
/// `c s / mu(V)`.
pub fn characterize(inst: &Instance, column_tol: f64) -> Result<DegreeProfile<'_>> {
    let tau = inst.e_masses();
    let mu = inst.v_masses();
    let wt = inst.weights();

    let s: f64 = wt.iter().zip(tau).map(|(w, t)| w * t).sum();
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::ZeroWeightMass(s));
    }

    let columns = inst.column_integrals();
    let c = columns[0];
    let allowed = column_tol * if c == 0.0 { 1.0 } else { c.abs() };
    for (index, &value) in columns.iter().enumerate().skip(1) {
        if (value - c).abs() > allowed || !value.is_finite() {
            return Err(Error::NonConstantColumns {
                first: c,
                index,
                value,
            });
        }
    }

    let weighted: Vec<f64> = wt.iter().zip(tau).map(|(w, t)| w * t).collect();
    let delta: Vec<f64> = (0..inst.v_count())
        .map(|v| {
            inst.kernel_row(v)
                .iter()
                .zip(&weighted)
                .map(|(m, wt)| m * wt)
                .sum::<f64>()
        })
        .collect();
    if let Some(v) = delta.iter().position(|d| !d.is_finite()) {
        return Err(Error::NonFiniteDegree(v));
    }

    let mu_total: f64 = mu.iter().sum();
    let mass: f64 = delta.iter().zip(mu).map(|(d, m)| d * m).sum();
    let delta_bar = mass / mu_total;

    let abs_s: f64 = wt.iter().zip(tau).map(|(w, t)| w.abs() * t).sum();
    let identity_residual = mass - c * s;
    let magnitude: f64 = (0..inst.v_count())
        .map(|v| {
            inst.kernel_row(v)
                .iter()
                .zip(&weighted)
                .map(|(m, w)| (m * w).abs())
                .sum::<f64>()
                * mu[v]
        })
        .sum();
    let budget = MEAN_IDENTITY_REL * magnitude.max((c * s).abs()) + allowed * abs_s;
    if identity_residual.abs() > budget {
        return Err(Error::MeanIdentity {
            mean: delta_bar,
            identity: c * s / mu_total,
        });
    }

    let rho = (c * s > 0.0 && delta.iter().all(|&d| d >= 0.0) && mass > 0.0)
        .then(|| delta.iter().zip(mu).map(|(d, m)| d * m / mass).collect());

    Ok(DegreeProfile {
        instance: inst,
        delta,
        s,
        c,
        delta_bar,
        mu_total,
        rho,
        identity_residual,
    })
}

/// One entry of the hypothesis report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisEntry {
    pub label: &'static str,
    pub passed: bool,
    /// The quantity the entry was decided on.
    pub value: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisReport {
    pub entries: Vec<HypothesisEntry>,
}

impl HypothesisReport {
    pub fn all_pass(&self) -> bool {
        self.entries.iter().all(|e| e.passed)
    }

    pub fn get(&self, label: &str) -> Option<&HypothesisEntry> {
        self.entries.iter().find(|e| e.label == label)
    }

    pub fn failures(&self) -> impl Iterator<Item = &HypothesisEntry> {
        self.entries.iter().filter(|e| !e.passed)
    }
}

/// Evaluate hypotheses (i)-(vi) of the main inequality on `inst` for `phi`.
/// Failures are recorded, never raised. The instance's own interval, if any,
/// narrows the domain of `phi`.
pub fn check_hypotheses(inst: &Instance, phi: &PhiSpec, column_tol: f64) -> HypothesisReport {
    let phi = effective_phi(inst, phi);
    let mu = inst.v_masses();
    let tau = inst.e_masses();
    let wt = inst.weights();
    let mut entries = Vec::with_capacity(6);

    let mu_total: f64 = mu.iter().sum();
    entries.push(HypothesisEntry {
        label: "(i)",
        passed: mu_total > 0.0 && mu_total.is_finite(),
        value: mu_total,
        detail: "0 < mu(V) < inf".into(),
    });

    let s: f64 = wt.iter().zip(tau).map(|(w, t)| w * t).sum();
    entries.push(HypothesisEntry {
        label: "(ii)",
        passed: s > 0.0 && s.is_finite(),
        value: s,
        detail: "0 < s < inf".into(),
    });

    let abs_sum: f64 = (0..inst.v_count())
        .map(|v| {
            inst.kernel_row(v)
                .iter()
                .zip(wt.iter().zip(tau))
                .map(|(m, (w, t))| (m * w).abs() * t)
                .sum::<f64>()
                * mu[v]
        })
        .sum();
    entries.push(HypothesisEntry {
        label: "(iii)",
        passed: abs_sum.is_finite(),
        value: abs_sum,
        detail: "sum |M| |wt| d(mu x tau) < inf".into(),
    });

    let columns = inst.column_integrals();
    let c = columns[0];
    let deviation = columns
        .iter()
        .map(|x| (x - c).abs())
        .fold(0.0, f64::max);
    let allowed = column_tol * if c == 0.0 { 1.0 } else { c.abs() };
    entries.push(HypothesisEntry {
        label: "(iv)",
        passed: deviation <= allowed && deviation.is_finite(),
        value: deviation,
        detail: format!("column integrals constant (c = {c}, max deviation)"),
    });

    let weighted: Vec<f64> = wt.iter().zip(tau).map(|(w, t)| w * t).collect();
    let delta: Vec<f64> = (0..inst.v_count())
        .map(|v| inst.kernel_row(v).iter().zip(&weighted).map(|(m, w)| m * w).sum())
        .collect();
    let outside = delta.iter().position(|&d| !phi.domain.contains(d));
    entries.push(HypothesisEntry {
        label: "(v)",
        passed: outside.is_none(),
        value: outside.map_or(f64::NAN, |i| delta[i]),
        detail: match outside {
            Some(i) => format!("delta at v-atom {i} is outside {}", phi.domain),
            None => format!("every delta in {}", phi.domain),
        },
    });

    let vi = if outside.is_none() {
        delta
            .iter()
            .enumerate()
            .map(|(v, &d)| {
                let phi_d = phi.phi(d).map(f64::abs).unwrap_or(f64::INFINITY);
                phi_d
                    * inst.kernel_row(v)
                        .iter()
                        .zip(&weighted)
                        .map(|(m, w)| (m * w).abs())
                        .sum::<f64>()
                    * mu[v]
            })
            .sum()
    } else {
        f64::INFINITY
    };
    entries.push(HypothesisEntry {
        label: "(vi)",
        passed: vi.is_finite(),
        value: vi,
        detail: "sum |phi(delta)| |M| |wt| d(mu x tau) < inf".into(),
    });

    HypothesisReport { entries }
}

/// `phi` with its domain narrowed by the instance's interval, if present.
pub fn effective_phi(inst: &Instance, phi: &PhiSpec) -> PhiSpec {
    match inst.interval_domain() {
        Some((lo, hi)) => phi.clone().restricted_to(&Interval::closed(
            lo.unwrap_or(f64::NEG_INFINITY),
            hi.unwrap_or(f64::INFINITY),
        )),
        None => phi.clone(),
    }
}
