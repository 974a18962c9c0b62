//! Atomic measure spaces and the [`Instance`] carrier used by every check.
//!
//! Finite matrices, truncated weighted sequence spaces and quadrature
//! discretizations of intervals all end up as a pair of atomic spaces, a dense
//! kernel indexed `(v-atom, e-atom)` and a weight per e-atom.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::QuadratureScheme;

/// Number of redraws allowed for a degenerate (all-zero) random column.
const COLUMN_RETRY_BUDGET: usize = 64;

/// Probability that a random kernel entry is exactly zero.
const KERNEL_ZERO_PROBABILITY: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomicSpace {
    masses: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<String>>,
}

impl AtomicSpace {
    pub fn new(masses: Vec<f64>, what: &'static str) -> Result<Self> {
        if masses.is_empty() {
            return Err(Error::DimensionMismatch(format!("{what} has no atoms")));
        }
        for (index, &value) in masses.iter().enumerate() {
            if !value.is_finite() {
                return Err(Error::NonFinite { what, index });
            }
            if value <= 0.0 {
                return Err(Error::NonPositiveMass { what, index, value });
            }
        }
        let total: f64 = masses.iter().sum();
        if !total.is_finite() {
            return Err(Error::NonFinite { what, index: 0 });
        }
        Ok(Self {
            masses,
            labels: None,
        })
    }

    pub fn unit(n: usize) -> Self {
        Self {
            masses: vec![1.0; n],
            labels: None,
        }
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.masses.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} labels for {} atoms",
                labels.len(),
                self.masses.len()
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn atom_count(&self) -> usize {
        self.masses.len()
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn total(&self) -> f64 {
        self.masses.iter().sum()
    }
}

/// A pair of atomic measure spaces `(V, mu)`, `(E, tau)` with a kernel
/// `M(v, e)` and an edge weight `wt(e)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    v_space: AtomicSpace,
    e_space: AtomicSpace,
    /// Row-major, `v_count x e_count`.
    kernel: Vec<f64>,
    weights: Vec<f64>,
    interval_domain: Option<(Option<f64>, Option<f64>)>,
    meta: Option<serde_json::Value>,
}

impl Instance {
    pub fn new(
        v_space: AtomicSpace,
        e_space: AtomicSpace,
        kernel: Vec<Vec<f64>>,
        weights: Vec<f64>,
    ) -> Result<Self> {
        let p = v_space.atom_count();
        let q = e_space.atom_count();
        if kernel.len() != p {
            return Err(Error::DimensionMismatch(format!(
                "kernel has {} rows, v-space has {p} atoms",
                kernel.len()
            )));
        }
        if weights.len() != q {
            return Err(Error::DimensionMismatch(format!(
                "{} weights, e-space has {q} atoms",
                weights.len()
            )));
        }
        let mut flat = Vec::with_capacity(p * q);
        for (i, row) in kernel.into_iter().enumerate() {
            if row.len() != q {
                return Err(Error::DimensionMismatch(format!(
                    "kernel row {i} has {} entries, e-space has {q} atoms",
                    row.len()
                )));
            }
            flat.extend(row);
        }
        Self::from_flat(v_space, e_space, flat, weights)
    }

    fn from_flat(
        v_space: AtomicSpace,
        e_space: AtomicSpace,
        kernel: Vec<f64>,
        weights: Vec<f64>,
    ) -> Result<Self> {
        debug_assert_eq!(kernel.len(), v_space.atom_count() * e_space.atom_count());
        if let Some(index) = kernel.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                what: "kernel",
                index,
            });
        }
        if let Some(index) = weights.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                what: "weights",
                index,
            });
        }
        Ok(Self {
            v_space,
            e_space,
            kernel,
            weights,
            interval_domain: None,
            meta: None,
        })
    }

    pub fn v_space(&self) -> &AtomicSpace {
        &self.v_space
    }

    pub fn e_space(&self) -> &AtomicSpace {
        &self.e_space
    }

    pub fn v_masses(&self) -> &[f64] {
        self.v_space.masses()
    }

    pub fn e_masses(&self) -> &[f64] {
        self.e_space.masses()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn v_count(&self) -> usize {
        self.v_space.atom_count()
    }

    pub fn e_count(&self) -> usize {
        self.e_space.atom_count()
    }

    #[inline]
    pub fn kernel(&self, v: usize, e: usize) -> f64 {
        self.kernel[v * self.e_count() + e]
    }

    pub fn kernel_row(&self, v: usize) -> &[f64] {
        let q = self.e_count();
        &self.kernel[v * q..(v + 1) * q]
    }

    pub fn kernel_rows(&self) -> Vec<Vec<f64>> {
        (0..self.v_count()).map(|v| self.kernel_row(v).to_vec()).collect()
    }

    /// Mass-weighted column sums `sum_v M(v, e) mu_v`, one per e-atom.
    pub fn column_integrals(&self) -> Vec<f64> {
        let mu = self.v_masses();
        let mut out = vec![0.0; self.e_count()];
        for (v, &m) in mu.iter().enumerate() {
            for (o, k) in out.iter_mut().zip(self.kernel_row(v)) {
                *o += k * m;
            }
        }
        out
    }

    /// The interval `I` attached to the instance file, if any. `None` ends are
    /// unbounded.
    pub fn interval_domain(&self) -> Option<(Option<f64>, Option<f64>)> {
        self.interval_domain
    }

    pub fn with_interval_domain(mut self, lo: Option<f64>, hi: Option<f64>) -> Self {
        self.interval_domain = Some((lo, hi));
        self
    }

    pub fn meta(&self) -> Option<&serde_json::Value> {
        self.meta.as_ref()
    }

    pub fn with_meta(mut self, meta: serde_json::Value) -> Self {
        self.meta = Some(meta);
        self
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: InstanceFile = serde_json::from_str(text)?;
        file.try_into()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&InstanceFile::from(self))?)
    }

    /// Drop one v-atom. Returns `None` when it is the only one.
    pub fn without_v_atom(&self, index: usize) -> Option<Instance> {
        if self.v_count() <= 1 {
            return None;
        }
        let masses: Vec<f64> = skip_index(self.v_masses(), index);
        let rows: Vec<Vec<f64>> = (0..self.v_count())
            .filter(|&v| v != index)
            .map(|v| self.kernel_row(v).to_vec())
            .collect();
        let v_space = AtomicSpace::new(masses, "v_masses").ok()?;
        let mut out = Instance::new(v_space, self.e_space.clone(), rows, self.weights.clone()).ok()?;
        out.interval_domain = self.interval_domain;
        Some(out)
    }

    /// Drop one e-atom. Returns `None` when it is the only one.
    pub fn without_e_atom(&self, index: usize) -> Option<Instance> {
        if self.e_count() <= 1 {
            return None;
        }
        let e_space = AtomicSpace::new(skip_index(self.e_masses(), index), "e_masses").ok()?;
        let rows: Vec<Vec<f64>> = (0..self.v_count())
            .map(|v| skip_index(self.kernel_row(v), index))
            .collect();
        let mut out = Instance::new(
            self.v_space.clone(),
            e_space,
            rows,
            skip_index(&self.weights, index),
        )
        .ok()?;
        out.interval_domain = self.interval_domain;
        Some(out)
    }

    /// Rescale every kernel column so its mass-weighted sum equals `c`.
    /// Returns `None` if a column sums to zero.
    pub fn with_column_integral(&self, c: f64) -> Option<Instance> {
        let sums = self.column_integrals();
        if sums.iter().any(|&s| s == 0.0 || !s.is_finite()) {
            return None;
        }
        let q = self.e_count();
        let mut kernel = self.kernel.clone();
        for (i, k) in kernel.iter_mut().enumerate() {
            *k *= c / sums[i % q];
        }
        let mut out =
            Instance::from_flat(self.v_space.clone(), self.e_space.clone(), kernel, self.weights.clone())
                .ok()?;
        out.interval_domain = self.interval_domain;
        Some(out)
    }

    /// Apply `f` to masses, kernel entries and weights, selected by `parts`.
    pub fn map_values(&self, parts: ValueParts, f: impl Fn(f64) -> f64) -> Result<Instance> {
        let v = if parts.v_masses {
            self.v_masses().iter().map(|&x| f(x)).collect()
        } else {
            self.v_masses().to_vec()
        };
        let e = if parts.e_masses {
            self.e_masses().iter().map(|&x| f(x)).collect()
        } else {
            self.e_masses().to_vec()
        };
        let kernel = if parts.kernel {
            self.kernel.iter().map(|&x| f(x)).collect()
        } else {
            self.kernel.clone()
        };
        let weights = if parts.weights {
            self.weights.iter().map(|&x| f(x)).collect()
        } else {
            self.weights.clone()
        };
        let mut out = Instance::from_flat(
            AtomicSpace::new(v, "v_masses")?,
            AtomicSpace::new(e, "e_masses")?,
            kernel,
            weights,
        )?;
        out.interval_domain = self.interval_domain;
        Ok(out)
    }
}

/// Selects which value groups [`Instance::map_values`] touches.
#[derive(Debug, Clone, Copy, Default)]
pub struct ValueParts {
    pub v_masses: bool,
    pub e_masses: bool,
    pub kernel: bool,
    pub weights: bool,
}

fn skip_index(xs: &[f64], index: usize) -> Vec<f64> {
    xs.iter()
        .enumerate()
        .filter(|&(i, _)| i != index)
        .map(|(_, &x)| x)
        .collect()
}

/// On-disk form of an [`Instance`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub v_masses: Vec<f64>,
    pub e_masses: Vec<f64>,
    pub kernel: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interval_domain: Option<(Option<f64>, Option<f64>)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<serde_json::Value>,
}

impl TryFrom<InstanceFile> for Instance {
    type Error = Error;

    fn try_from(file: InstanceFile) -> Result<Self> {
        let mut inst = build_discrete(file.v_masses, file.e_masses, file.kernel, file.weights)?;
        inst.interval_domain = file.interval_domain;
        inst.meta = file.meta;
        Ok(inst)
    }
}

impl From<&Instance> for InstanceFile {
    fn from(inst: &Instance) -> Self {
        Self {
            v_masses: inst.v_masses().to_vec(),
            e_masses: inst.e_masses().to_vec(),
            kernel: inst.kernel_rows(),
            weights: inst.weights.clone(),
            interval_domain: inst.interval_domain,
            meta: inst.meta.clone(),
        }
    }
}

impl Serialize for Instance {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        InstanceFile::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Instance {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        InstanceFile::deserialize(d)?
            .try_into()
            .map_err(serde::de::Error::custom)
    }
}

/// Finite matrix instance. Does not check that column integrals are constant.
pub fn build_discrete(
    v_masses: Vec<f64>,
    e_masses: Vec<f64>,
    kernel: Vec<Vec<f64>>,
    weights: Vec<f64>,
) -> Result<Instance> {
    let v_space = AtomicSpace::new(v_masses, "v_masses")?;
    let e_space = AtomicSpace::new(e_masses, "e_masses")?;
    Instance::new(v_space, e_space, kernel, weights)
}

/// Truncated weighted counting measures on the natural numbers.
///
/// `a` carries the masses of `mu`, `b` those of `tau`, `w` the weights; `u`
/// is the product `w_j b_j`, which is what the sequence inequalities are
/// stated in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceModel {
    a: Vec<f64>,
    b: Vec<f64>,
    w: Vec<f64>,
    u: Vec<f64>,
    /// Mass of `a` beyond the truncation, when known analytically.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tail_a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tail_u: Option<f64>,
}

impl SequenceModel {
    pub fn new(a: Vec<f64>, b: Vec<f64>, w: Vec<f64>) -> Result<Self> {
        if a.is_empty() || a.len() != b.len() || b.len() != w.len() {
            return Err(Error::DimensionMismatch(format!(
                "sequence lengths a={}, b={}, w={} must agree and be positive",
                a.len(),
                b.len(),
                w.len()
            )));
        }
        for (what, xs) in [("a", &a), ("b", &b), ("w", &w)] {
            for (index, &value) in xs.iter().enumerate() {
                if !value.is_finite() {
                    return Err(Error::NonFinite { what, index });
                }
                if value <= 0.0 {
                    return Err(Error::NonPositiveMass { what, index, value });
                }
            }
        }
        let u = w.iter().zip(&b).map(|(wj, bj)| wj * bj).collect();
        Ok(Self {
            a,
            b,
            w,
            u,
            tail_a: None,
            tail_u: None,
        })
    }

    /// `tau` = counting measure, so `b = 1` and `w = u`.
    pub fn from_u(a: Vec<f64>, u: Vec<f64>) -> Result<Self> {
        let b = vec![1.0; u.len()];
        Self::new(a, b, u)
    }

    /// `a_i = a0 ra^i`, `u_i = u0 ru^i` for `i < n`, with the analytic tail
    /// masses recorded.
    pub fn geometric(a0: f64, ra: f64, u0: f64, ru: f64, n: usize) -> Result<Self> {
        if !(0.0 < ra && ra < 1.0 && 0.0 < ru && ru < 1.0) {
            return Err(Error::InvalidArgument(
                "geometric ratios must lie in (0, 1)".into(),
            ));
        }
        let a = (0..n).map(|i| a0 * ra.powi(i as i32)).collect();
        let u = (0..n).map(|i| u0 * ru.powi(i as i32)).collect();
        let mut model = Self::from_u(a, u)?;
        model.tail_a = Some(a0 * ra.powi(n as i32) / (1.0 - ra));
        model.tail_u = Some(u0 * ru.powi(n as i32) / (1.0 - ru));
        Ok(model)
    }

    pub fn with_tail_masses(mut self, tail_a: Option<f64>, tail_u: Option<f64>) -> Self {
        self.tail_a = tail_a;
        self.tail_u = tail_u;
        self
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn w(&self) -> &[f64] {
        &self.w
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn truncation_length(&self) -> usize {
        self.a.len()
    }

    pub fn tail_mass_a(&self) -> Option<f64> {
        self.tail_a
    }

    pub fn tail_mass_u(&self) -> Option<f64> {
        self.tail_u
    }

    /// Kernel `m_ii = 1 / a_i`, zero elsewhere; gives column integral 1.
    pub fn diagonal_kernel(&self) -> impl Fn(usize, usize) -> f64 + '_ {
        move |i, j| if i == j { 1.0 / self.a[i] } else { 0.0 }
    }
}

/// Instance with `mu = a`, `tau = b`, `wt = w` and `m_ij = kernel(i, j)`.
pub fn from_sequences(
    model: &SequenceModel,
    kernel: impl Fn(usize, usize) -> f64,
) -> Result<Instance> {
    let n = model.truncation_length();
    let rows = (0..n).map(|i| (0..n).map(|j| kernel(i, j)).collect()).collect();
    let inst = build_discrete(model.a.clone(), model.b.clone(), rows, model.w.clone())?;
    Ok(inst.with_meta(serde_json::json!({
        "source": "sequence",
        "u": model.u,
        "tail_mass_a": model.tail_a,
        "tail_mass_u": model.tail_u,
    })))
}

/// Discretize `V x E` with one quadrature scheme per axis; atoms are nodes,
/// masses are quadrature weights.
pub fn from_interval(
    kernel: impl Fn(f64, f64) -> f64,
    wt: impl Fn(f64) -> f64,
    scheme_v: &QuadratureScheme,
    scheme_e: &QuadratureScheme,
) -> Result<Instance> {
    let (xv, wv) = scheme_v.nodes_weights();
    let (xe, we) = scheme_e.nodes_weights();
    let rows: Vec<Vec<f64>> = xv
        .iter()
        .map(|&v| xe.iter().map(|&e| kernel(v, e)).collect())
        .collect();
    let weights: Vec<f64> = xe.iter().map(|&e| wt(e)).collect();
    let inst = build_discrete(wv, we, rows, weights)?;
    Ok(inst.with_meta(serde_json::json!({
        "source": "interval",
        "v_nodes": xv,
        "e_nodes": xe,
    })))
}

/// Zero the weights on erased e-atoms. Masses and kernel are untouched, so
/// the column integral is unchanged.
pub fn restrict_edges(inst: &Instance, erased: &[bool]) -> Result<Instance> {
    if erased.len() != inst.e_count() {
        return Err(Error::DimensionMismatch(format!(
            "mask has {} entries, e-space has {} atoms",
            erased.len(),
            inst.e_count()
        )));
    }
    let mut out = inst.clone();
    for (w, &gone) in out.weights.iter_mut().zip(erased) {
        if gone {
            *w = 0.0;
        }
    }
    Ok(out)
}

/// Random `p x q` instance with unit masses, nonnegative kernel columns
/// rescaled to integrate to `c`, and weights uniform in `weight_range`.
/// A pure function of its arguments.
pub fn random_instance(
    p: usize,
    q: usize,
    c: f64,
    seed: u64,
    weight_range: (f64, f64),
) -> Result<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_instance_with(&mut rng, p, q, c, weight_range)
}

pub(crate) fn random_instance_with<R: Rng>(
    rng: &mut R,
    p: usize,
    q: usize,
    c: f64,
    (wlo, whi): (f64, f64),
) -> Result<Instance> {
    if p == 0 || q == 0 {
        return Err(Error::InvalidArgument("p and q must be at least 1".into()));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidArgument(format!("column integral c = {c} must be positive")));
    }
    if !(0.0 < wlo && wlo <= whi && whi.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "weight range [{wlo}, {whi}] must be positive"
        )));
    }
    let mut kernel = vec![0.0; p * q];
    for e in 0..q {
        let mut attempts = 0;
        loop {
            let mut total = 0.0;
            for v in 0..p {
                let x = if rng.gen::<f64>() < KERNEL_ZERO_PROBABILITY {
                    0.0
                } else {
                    rng.gen::<f64>()
                };
                kernel[v * q + e] = x;
                total += x;
            }
            if total > 0.0 {
                for v in 0..p {
                    kernel[v * q + e] *= c / total;
                }
                break;
            }
            attempts += 1;
            if attempts >= COLUMN_RETRY_BUDGET {
                return Err(Error::DegenerateColumn {
                    column: e,
                    attempts,
                });
            }
        }
    }
    let weights = (0..q)
        .map(|_| if wlo == whi { wlo } else { rng.gen_range(wlo..whi) })
        .collect();
    Instance::from_flat(AtomicSpace::unit(p), AtomicSpace::unit(q), kernel, weights)
}
