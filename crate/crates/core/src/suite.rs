//! Check orchestration: sources, per-instance suites, fuzzing with
//! shrinking, parameter sweeps and CSV/JSON reports.

use std::f64::consts::TAU;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::convexity::{certify_shape, PhiSpec, DEFAULT_GRID};
use crate::degree::{characterize, check_hypotheses, effective_phi, DegreeProfile, HypothesisReport};
use crate::error::{Error, Result};
use crate::hypergraph::{random_hypergraph_with, Hypergraph};
use crate::inequalities::{
    concave_reversal, entropy_check, erasure_check, geometric_mean_check, main_inequality,
    marginal_power_mean, power_mean_chain, power_mean_product, sequence_inequalities,
    stability_check, variational_scan, CheckResult, StabilityParams, Status, Tolerance, Variant,
};
use crate::measure::{
    build_discrete, from_interval, from_sequences, random_instance_with, Instance, SequenceModel,
};
use crate::quadrature::{QuadratureRule, QuadratureScheme};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckKind {
    Main,
    Stability,
    ConcaveReversal,
    Variational,
    PowerMean,
    PowerMeanLiteral,
    MarginalPowerMean,
    PowerMeanProduct,
    Entropy,
    Erasure,
    GeometricMean,
    GeometricMeanLiteral,
    Sequence,
    GmOfGms,
}

impl CheckKind {
    pub const ALL: [CheckKind; 14] = [
        CheckKind::Main,
        CheckKind::Stability,
        CheckKind::ConcaveReversal,
        CheckKind::Variational,
        CheckKind::PowerMean,
        CheckKind::PowerMeanLiteral,
        CheckKind::MarginalPowerMean,
        CheckKind::PowerMeanProduct,
        CheckKind::Entropy,
        CheckKind::Erasure,
        CheckKind::GeometricMean,
        CheckKind::GeometricMeanLiteral,
        CheckKind::Sequence,
        CheckKind::GmOfGms,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CheckKind::Main => "main",
            CheckKind::Stability => "stability",
            CheckKind::ConcaveReversal => "concave-reversal",
            CheckKind::Variational => "variational",
            CheckKind::PowerMean => "power-mean",
            CheckKind::PowerMeanLiteral => "power-mean:paper-literal",
            CheckKind::MarginalPowerMean => "marginal-power-mean",
            CheckKind::PowerMeanProduct => "power-mean-product",
            CheckKind::Entropy => "entropy",
            CheckKind::Erasure => "erasure",
            CheckKind::GeometricMean => "geometric-mean",
            CheckKind::GeometricMeanLiteral => "geometric-mean:paper-literal",
            CheckKind::Sequence => "sequence",
            CheckKind::GmOfGms => "gm-of-gms",
        }
    }

    pub fn is_asserted(self) -> bool {
        !matches!(self, CheckKind::PowerMeanLiteral | CheckKind::GeometricMeanLiteral)
    }

    pub fn uses_phi(self) -> bool {
        matches!(
            self,
            CheckKind::Main
                | CheckKind::Stability
                | CheckKind::ConcaveReversal
                | CheckKind::Variational
                | CheckKind::Erasure
                | CheckKind::Sequence
        )
    }

    /// Every asserted check; paper-literal variants must be requested by name.
    pub fn asserted() -> Vec<CheckKind> {
        Self::ALL.into_iter().filter(|k| k.is_asserted()).collect()
    }

    /// Parse a comma-separated list; `all` expands to [`CheckKind::asserted`].
    pub fn parse_list(text: &str) -> Result<Vec<CheckKind>> {
        let mut out: Vec<CheckKind> = Vec::new();
        for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let kinds = if part == "all" {
                Self::asserted()
            } else {
                vec![part.parse()?]
            };
            for k in kinds {
                if !out.contains(&k) {
                    out.push(k);
                }
            }
        }
        if out.is_empty() {
            return Err(Error::InvalidArgument("empty check list".into()));
        }
        Ok(out)
    }
}

impl FromStr for CheckKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown check '{s}'")))
    }
}

impl fmt::Display for CheckKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteConfig {
    pub checks: Vec<CheckKind>,
    pub phi_list: Vec<PhiSpec>,
    pub tol: Tolerance,
    pub seed: u64,
    /// Random profiles per variational scan.
    pub trials: usize,
    /// Exponents of the power-mean chain.
    pub chain_exponents: Vec<f64>,
    /// Exponents of the marginal power mean and the power-mean product.
    pub mean_exponents: Vec<f64>,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            checks: CheckKind::asserted(),
            phi_list: vec![PhiSpec::identity(), PhiSpec::log()],
            tol: Tolerance::default(),
            seed: 0,
            trials: 100,
            chain_exponents: vec![0.5, 1.0, 2.0, 3.0],
            mean_exponents: vec![1.5, 2.0, 3.0],
        }
    }
}

impl SuiteConfig {
    pub fn validate(&self) -> Result<()> {
        let t = &self.tol;
        if !(t.abs > 0.0 && t.rel >= 0.0 && t.eq > 0.0 && t.column > 0.0) {
            return Err(Error::InvalidArgument("tolerances must be positive".into()));
        }
        if self.trials == 0 {
            return Err(Error::InvalidArgument("trials must be at least 1".into()));
        }
        if self.checks.is_empty() {
            return Err(Error::InvalidArgument("no checks selected".into()));
        }
        if self.checks.iter().any(|k| k.uses_phi()) && self.phi_list.is_empty() {
            return Err(Error::InvalidArgument("phi-dependent checks need at least one --phi".into()));
        }
        Ok(())
    }
}

/// An instance plus the structure some checks need.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Subject {
    pub id: String,
    pub instance: Instance,
    pub hypergraph: Option<Hypergraph>,
    pub sequence: Option<SequenceModel>,
    /// Erasure mask; drawn from `check_seed` when absent.
    pub erased: Option<Vec<bool>>,
    /// Seed for the randomized checks on this subject.
    pub check_seed: u64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SequenceFile {
    a: Vec<f64>,
    #[serde(default)]
    u: Option<Vec<f64>>,
    #[serde(default)]
    b: Option<Vec<f64>>,
    #[serde(default)]
    w: Option<Vec<f64>>,
}

impl Subject {
    /// Recovers a sequence model from instance metadata when present.
    pub fn from_instance(id: impl Into<String>, instance: Instance) -> Self {
        let sequence = instance
            .meta()
            .filter(|m| m["source"] == "sequence")
            .and_then(|m| serde_json::from_value::<Vec<f64>>(m["u"].clone()).ok())
            .and_then(|u| SequenceModel::from_u(instance.v_masses().to_vec(), u).ok());
        Self {
            id: id.into(),
            instance,
            hypergraph: None,
            sequence,
            erased: None,
            check_seed: 0,
        }
    }

    pub fn from_hypergraph(id: impl Into<String>, h: Hypergraph) -> Result<Self> {
        let instance = h.to_instance()?;
        Ok(Self {
            hypergraph: Some(h),
            ..Self::from_instance(id, instance)
        })
    }

    pub fn from_sequence(id: impl Into<String>, model: SequenceModel) -> Result<Self> {
        let instance = from_sequences(&model, model.diagonal_kernel())?;
        Ok(Self {
            sequence: Some(model),
            ..Self::from_instance(id, instance)
        })
    }

    /// Instance, hypergraph (`incidence` key) or sequence (`a` key) JSON.
    pub fn parse_json(id: impl Into<String>, text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        if value.get("incidence").is_some() {
            Self::from_hypergraph(id, serde_json::from_value(value)?)
        } else if value.get("a").is_some() {
            let file: SequenceFile = serde_json::from_value(value)?;
            let model = match (file.u, file.b, file.w) {
                (Some(u), None, None) => SequenceModel::from_u(file.a, u)?,
                (None, Some(b), Some(w)) => SequenceModel::new(file.a, b, w)?,
                _ => {
                    return Err(Error::InvalidArgument(
                        "sequence JSON needs either u or both b and w".into(),
                    ))
                }
            };
            Self::from_sequence(id, model)
        } else {
            Ok(Self::from_instance(id, serde_json::from_value(value)?))
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let id = path
            .file_stem()
            .map_or_else(|| "instance".to_string(), |s| s.to_string_lossy().into_owned());
        Self::parse_json(id, &text)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.check_seed = seed;
        self
    }

    pub fn with_erased(mut self, erased: Vec<bool>) -> Self {
        self.erased = Some(erased);
        self
    }

    pub fn size(&self) -> (usize, usize) {
        (self.instance.v_count(), self.instance.e_count())
    }

    /// The explicit mask, or a seeded one erasing each atom with probability
    /// one half while keeping at least one.
    pub fn erasure_mask(&self) -> Vec<bool> {
        if let Some(mask) = &self.erased {
            return mask.clone();
        }
        let q = self.instance.e_count();
        let mut rng = ChaCha8Rng::seed_from_u64(self.check_seed ^ 0x5eed_e4a5);
        let mut mask: Vec<bool> = (0..q).map(|_| rng.gen_bool(0.5)).collect();
        if mask.iter().all(|&m| m) {
            mask[rng.gen_range(0..q)] = false;
        }
        mask
    }
}

/// `--gen` specifications.
#[derive(Debug, Clone, PartialEq)]
pub enum GenSpec {
    Matrix { p: usize, q: usize, c: f64 },
    Hypergraph { p: usize, q: usize, k: u32, regular: bool },
    /// `a_i = 2^-i`, `u_i = 3^-i`, `i < n`.
    Sequence { n: usize },
    /// Kernel `1 + sin(2 pi (v - e))`, weight `wt(e) = e` on `[0, 1]^2`.
    Interval { nodes: usize, rule_v: QuadratureRule, rule_e: QuadratureRule },
}

fn parse_rule(s: &str) -> Result<QuadratureRule> {
    match s {
        "trapezoid-periodic" | "trapezoid" => Ok(QuadratureRule::TrapezoidPeriodic),
        "midpoint" => Ok(QuadratureRule::Midpoint),
        "gauss-legendre" | "gl" => Ok(QuadratureRule::GaussLegendre),
        _ => Err(Error::InvalidArgument(format!("unknown quadrature rule '{s}'"))),
    }
}

impl FromStr for GenSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
        let mut params = std::collections::BTreeMap::new();
        for pair in rest.split(',').filter(|p| !p.is_empty()) {
            let (k, v) = pair
                .split_once('=')
                .ok_or_else(|| Error::InvalidArgument(format!("expected key=value, got '{pair}'")))?;
            params.insert(k.trim(), v.trim());
        }
        let allowed: &[&str] = match kind {
            "matrix" => &["p", "q", "c"],
            "hypergraph" => &["p", "q", "k", "regular"],
            "sequence" => &["n"],
            "interval" => &["nodes", "rule", "rule-v", "rule-e"],
            _ => return Err(Error::InvalidArgument(format!("unknown generator '{kind}'"))),
        };
        if let Some(bad) = params.keys().find(|k| !allowed.contains(k)) {
            return Err(Error::InvalidArgument(format!("unknown {kind} parameter '{bad}'")));
        }
        fn num<T: FromStr>(params: &std::collections::BTreeMap<&str, &str>, key: &str, default: T) -> Result<T> {
            params.get(key).map_or(Ok(default), |v| {
                v.parse()
                    .map_err(|_| Error::InvalidArgument(format!("bad value '{v}' for {key}")))
            })
        }
        Ok(match kind {
            "matrix" => GenSpec::Matrix {
                p: num(&params, "p", 4)?,
                q: num(&params, "q", 4)?,
                c: num(&params, "c", 1.0)?,
            },
            "hypergraph" => GenSpec::Hypergraph {
                p: num(&params, "p", 6)?,
                q: num(&params, "q", 4)?,
                k: num(&params, "k", 3)?,
                regular: matches!(params.get("regular").copied(), Some("1" | "true")),
            },
            "sequence" => GenSpec::Sequence { n: num(&params, "n", 20)? },
            _ => {
                let both = params.get("rule").map(|r| parse_rule(r)).transpose()?;
                let side = |key| -> Result<QuadratureRule> {
                    match params.get(key) {
                        Some(r) => parse_rule(r),
                        None => Ok(both.unwrap_or(QuadratureRule::TrapezoidPeriodic)),
                    }
                };
                GenSpec::Interval {
                    nodes: num(&params, "nodes", 128)?,
                    rule_v: side("rule-v")?,
                    rule_e: side("rule-e")?,
                }
            }
        })
    }
}

/// The convolution instance on `[0, 1]^2`.
pub fn convolution_instance(nodes: usize, rule_v: QuadratureRule, rule_e: QuadratureRule) -> Result<Instance> {
    let sv = QuadratureScheme::new(rule_v, nodes, 0.0, 1.0)?;
    let se = QuadratureScheme::new(rule_e, nodes, 0.0, 1.0)?;
    from_interval(|v, e| 1.0 + (TAU * (v - e)).sin(), |e| e, &sv, &se)
}

impl GenSpec {
    pub fn build(&self, seed: u64) -> Result<Subject> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let subject = match *self {
            GenSpec::Matrix { p, q, c } => Subject::from_instance(
                format!("matrix-{p}x{q}"),
                random_instance_with(&mut rng, p, q, c, (0.1, 3.0))?,
            ),
            GenSpec::Hypergraph { p, q, k, regular } => Subject::from_hypergraph(
                format!("hypergraph-{p}x{q}-k{k}"),
                random_hypergraph_with(&mut rng, p, q, k, regular)?,
            )?,
            GenSpec::Sequence { n } => {
                Subject::from_sequence(format!("sequence-{n}"), SequenceModel::geometric(1.0, 0.5, 1.0, 1.0 / 3.0, n)?)?
            }
            GenSpec::Interval { nodes, rule_v, rule_e } => Subject::from_instance(
                format!("interval-{nodes}"),
                convolution_instance(nodes, rule_v, rule_e)?,
            ),
        };
        Ok(subject.with_seed(seed))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RowStatus {
    Holds,
    Violated,
    Equality,
    Skipped,
    /// An internal consistency check failed; counts as a violation.
    Error,
}

impl fmt::Display for RowStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RowStatus::Holds => "holds",
            RowStatus::Violated => "violated",
            RowStatus::Equality => "equality",
            RowStatus::Skipped => "skipped",
            RowStatus::Error => "error",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub instance_id: String,
    pub check_name: String,
    pub phi: Option<String>,
    pub status: RowStatus,
    pub asserted: bool,
    pub result: Option<CheckResult>,
    pub note: Option<String>,
}

impl ReportRow {
    fn checked(instance_id: &str, result: CheckResult) -> Self {
        let mut note = None;
        let mut status = match result.status {
            Status::Holds => RowStatus::Holds,
            Status::Violated => RowStatus::Violated,
            Status::Equality => RowStatus::Equality,
        };
        if let Some(false) = result.characterization_consistent() {
            note = Some("equality flag disagrees with constancy of delta".to_string());
            if result.asserted {
                status = RowStatus::Error;
            }
        }
        Self {
            instance_id: instance_id.to_string(),
            check_name: result.check_name.clone(),
            phi: result.phi.clone(),
            status,
            asserted: result.asserted,
            result: Some(result),
            note,
        }
    }

    fn not_run(instance_id: &str, kind: CheckKind, phi: Option<&PhiSpec>, status: RowStatus, note: String) -> Self {
        Self {
            instance_id: instance_id.to_string(),
            check_name: kind.name().to_string(),
            phi: phi.map(PhiSpec::label),
            status,
            asserted: kind.is_asserted(),
            result: None,
            note: Some(note),
        }
    }

    /// Violation or internal failure on an asserted check.
    pub fn is_failure(&self) -> bool {
        self.asserted && matches!(self.status, RowStatus::Violated | RowStatus::Error)
    }

    pub fn is_informational_violation(&self) -> bool {
        !self.asserted && matches!(self.status, RowStatus::Violated | RowStatus::Error)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisRecord {
    pub instance_id: String,
    pub phi: String,
    pub report: HypothesisReport,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct Report {
    pub rows: Vec<ReportRow>,
    pub hypotheses: Vec<HypothesisRecord>,
}

const CSV_HEADER: [&str; 11] = [
    "instance_id",
    "check_name",
    "phi",
    "lhs",
    "rhs",
    "gap",
    "bound",
    "status",
    "tol",
    "asserted",
    "note",
];

fn sci(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_string(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

impl Report {
    pub fn failures(&self) -> impl Iterator<Item = &ReportRow> {
        self.rows.iter().filter(|r| r.is_failure())
    }

    pub fn failure_count(&self) -> usize {
        self.failures().count()
    }

    pub fn informational_violations(&self) -> usize {
        self.rows.iter().filter(|r| r.is_informational_violation()).count()
    }

    pub fn checked_rows(&self) -> impl Iterator<Item = (&ReportRow, &CheckResult)> {
        self.rows.iter().filter_map(|r| r.result.as_ref().map(|c| (r, c)))
    }

    pub fn to_csv(&self) -> Result<String> {
        csv_string(
            &CSV_HEADER,
            self.rows.iter().map(|row| {
                let r = row.result.as_ref();
                let num = |f: fn(&CheckResult) -> Option<f64>| r.and_then(f).map(sci).unwrap_or_default();
                vec![
                    row.instance_id.clone(),
                    row.check_name.clone(),
                    row.phi.clone().unwrap_or_default(),
                    num(|c| Some(c.lhs)),
                    num(|c| Some(c.rhs)),
                    num(|c| Some(c.gap)),
                    num(|c| c.bound),
                    row.status.to_string(),
                    num(|c| Some(c.tol)),
                    row.asserted.to_string(),
                    row.note.clone().unwrap_or_default(),
                ]
            }),
        )
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Errors meaning "this check does not apply here", as opposed to a failed
/// internal consistency check.
fn inapplicable(e: &Error) -> bool {
    !matches!(e, Error::KeyIdentity { .. } | Error::MeanIdentity { .. })
}

fn run_kind(
    subject: &Subject,
    profile: &DegreeProfile,
    kind: CheckKind,
    phi: Option<&PhiSpec>,
    cfg: &SuiteConfig,
) -> Result<Vec<CheckResult>> {
    let tol = &cfg.tol;
    let phi_ref = || phi.expect("phi-dependent check without phi");
    Ok(match kind {
        CheckKind::Main => vec![main_inequality(profile, phi_ref(), tol)?],
        CheckKind::Stability => {
            let params = StabilityParams::estimate(profile, phi_ref())?;
            vec![stability_check(profile, phi_ref(), &params, tol)?]
        }
        CheckKind::ConcaveReversal => vec![concave_reversal(profile, phi_ref(), tol)?],
        CheckKind::Variational => {
            vec![variational_scan(profile, phi_ref(), cfg.trials, subject.check_seed, tol)?]
        }
        CheckKind::PowerMean => power_mean_chain(profile, &cfg.chain_exponents, Variant::Normalized, tol)?,
        CheckKind::PowerMeanLiteral => {
            power_mean_chain(profile, &cfg.chain_exponents, Variant::PaperLiteral, tol)?
        }
        CheckKind::MarginalPowerMean => cfg
            .mean_exponents
            .iter()
            .map(|&p| marginal_power_mean(profile, p, tol))
            .collect::<Result<_>>()?,
        CheckKind::PowerMeanProduct => cfg
            .mean_exponents
            .iter()
            .map(|&p| power_mean_product(profile, p, tol))
            .collect::<Result<_>>()?,
        CheckKind::Entropy => vec![entropy_check(profile, tol)?],
        CheckKind::Erasure => vec![erasure_check(&subject.instance, &subject.erasure_mask(), phi_ref(), tol)?],
        CheckKind::GeometricMean => vec![geometric_mean_check(profile, Variant::Normalized, tol)?],
        CheckKind::GeometricMeanLiteral => vec![geometric_mean_check(profile, Variant::PaperLiteral, tol)?],
        CheckKind::Sequence => {
            let model = subject
                .sequence
                .as_ref()
                .ok_or_else(|| Error::InvalidArgument("not a sequence instance".into()))?;
            let (a, b) = sequence_inequalities(model, phi_ref(), tol)?;
            vec![a, b]
        }
        CheckKind::GmOfGms => {
            let h = subject
                .hypergraph
                .as_ref()
                .ok_or_else(|| Error::InvalidArgument("not a hypergraph instance".into()))?;
            vec![h.gm_of_gms_check(tol)?]
        }
    })
}

fn run_into(
    subject: &Subject,
    profile: &DegreeProfile,
    kind: CheckKind,
    phi: Option<&PhiSpec>,
    cfg: &SuiteConfig,
    rows: &mut Vec<ReportRow>,
) {
    match run_kind(subject, profile, kind, phi, cfg) {
        Ok(results) => rows.extend(results.into_iter().map(|r| ReportRow::checked(&subject.id, r))),
        Err(e) if inapplicable(&e) => {
            rows.push(ReportRow::not_run(&subject.id, kind, phi, RowStatus::Skipped, e.to_string()))
        }
        Err(e) => rows.push(ReportRow::not_run(&subject.id, kind, phi, RowStatus::Error, e.to_string())),
    }
}

/// Every configured check on one subject. Characterization failures are
/// invalid input; inapplicable checks become skipped rows.
pub fn run_subject(subject: &Subject, cfg: &SuiteConfig) -> Result<Report> {
    cfg.validate()?;
    let profile = characterize(&subject.instance, cfg.tol.column)?;
    let mut report = Report::default();
    for &kind in &cfg.checks {
        if !kind.uses_phi() {
            run_into(subject, &profile, kind, None, cfg, &mut report.rows);
            continue;
        }
        for phi in &cfg.phi_list {
            let hyp = if kind == CheckKind::Sequence {
                None
            } else {
                Some(check_hypotheses(&subject.instance, phi, cfg.tol.column))
            };
            match hyp.as_ref().filter(|h| !h.all_pass()) {
                Some(h) => {
                    let failed: Vec<_> = h.failures().map(|f| format!("{} {}", f.label, f.detail)).collect();
                    report.rows.push(ReportRow::not_run(
                        &subject.id,
                        kind,
                        Some(phi),
                        RowStatus::Skipped,
                        format!("hypotheses failed: {}", failed.join("; ")),
                    ));
                }
                None => run_into(subject, &profile, kind, Some(phi), cfg, &mut report.rows),
            }
        }
    }
    for phi in &cfg.phi_list {
        report.hypotheses.push(HypothesisRecord {
            instance_id: subject.id.clone(),
            phi: phi.label(),
            report: check_hypotheses(&subject.instance, phi, cfg.tol.column),
        });
    }
    if report.rows.iter().all(|r| r.status == RowStatus::Skipped) {
        return Err(Error::InvalidArgument(format!(
            "no applicable checks for '{}'",
            subject.id
        )));
    }
    Ok(report)
}

/// `pow:a..b:step`, inclusive of `b` up to rounding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiFamily {
    pub start: f64,
    pub end: f64,
    pub step: f64,
}

impl FromStr for PhiFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::PhiParse(format!("'{s}': expected pow:<start>..<end>:<step>"));
        let body = s.strip_prefix("pow:").ok_or_else(bad)?;
        let (range, step) = body.rsplit_once(':').ok_or_else(bad)?;
        let (a, b) = range.split_once("..").ok_or_else(bad)?;
        let parse = |t: &str| t.trim().parse::<f64>().map_err(|_| bad());
        let fam = Self {
            start: parse(a)?,
            end: parse(b)?,
            step: parse(step)?,
        };
        if !(fam.step > 0.0 && fam.start.is_finite() && fam.end.is_finite() && fam.start <= fam.end) {
            return Err(bad());
        }
        Ok(fam)
    }
}

impl PhiFamily {
    pub fn exponents(&self) -> Vec<f64> {
        let n = ((self.end - self.start) / self.step + 1e-9).floor() as usize;
        (0..=n).map(|i| self.start + i as f64 * self.step).collect()
    }
}

/// One row per family member: convex members assert `>=`, concave ones
/// `<=`, anything else is skipped.
pub fn sweep(subject: &Subject, family: &PhiFamily, cfg: &SuiteConfig) -> Result<Report> {
    let profile = characterize(&subject.instance, cfg.tol.column)?;
    let range = (profile.min_delta(), profile.max_delta());
    let rows: Vec<ReportRow> = family
        .exponents()
        .into_par_iter()
        .map(|r| {
            let phi = PhiSpec::power(r);
            let shape = certify_shape(&effective_phi(&subject.instance, &phi), range, DEFAULT_GRID);
            let kind = match shape {
                Ok(c) if c.shape.is_convex() => CheckKind::Main,
                Ok(c) if c.shape.is_concave() => CheckKind::ConcaveReversal,
                Ok(c) => {
                    return ReportRow::not_run(
                        &subject.id,
                        CheckKind::Main,
                        Some(&phi),
                        RowStatus::Skipped,
                        format!("f is {} on the degree range", c.shape),
                    )
                }
                Err(e) => {
                    return ReportRow::not_run(&subject.id, CheckKind::Main, Some(&phi), RowStatus::Skipped, e.to_string())
                }
            };
            let mut rows = Vec::with_capacity(1);
            run_into(subject, &profile, kind, Some(&phi), cfg, &mut rows);
            rows.pop().expect("one row per family member")
        })
        .collect();
    Ok(Report {
        rows,
        hypotheses: Vec::new(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FuzzKind {
    Matrix,
    Hypergraph,
    Sequence,
    Interval,
}

/// Summary of one fuzzed instance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FuzzBlock {
    pub index: usize,
    pub instance_id: String,
    pub kind: FuzzKind,
    pub v_atoms: usize,
    pub e_atoms: usize,
    pub rows: usize,
    pub skipped: usize,
    pub failures: usize,
    pub informational: usize,
    /// Sum of `|gap|` over checked rows; a cheap fingerprint of the block.
    pub gap_sum: f64,
    /// Largest relative disagreement between the two left-hand-side routes.
    pub max_identity_discrepancy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FuzzViolation {
    pub instance_id: String,
    pub check_name: String,
    pub phi: Option<String>,
    pub asserted: bool,
    pub gap: f64,
    pub original_size: (usize, usize),
    /// Shrunk counterexample; replays with `erased` and the stored seed.
    pub instance: Instance,
    pub erased: Vec<bool>,
    pub check_seed: u64,
    pub shrunk_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FuzzReport {
    pub seed: u64,
    pub instances_tried: usize,
    pub blocks: Vec<FuzzBlock>,
    pub violations: Vec<FuzzViolation>,
}

const FUZZ_CSV_HEADER: [&str; 11] = [
    "instance_id",
    "kind",
    "v_atoms",
    "e_atoms",
    "rows",
    "skipped",
    "failures",
    "informational",
    "gap_sum",
    "max_identity_discrepancy",
    "violations",
];

impl FuzzReport {
    pub fn failure_count(&self) -> usize {
        self.violations.iter().filter(|v| v.asserted).count()
    }

    pub fn informational_count(&self) -> usize {
        self.violations.iter().filter(|v| !v.asserted).count()
    }

    pub fn to_csv(&self) -> Result<String> {
        csv_string(
            &FUZZ_CSV_HEADER,
            self.blocks.iter().map(|b| {
                let names: Vec<&str> = self
                    .violations
                    .iter()
                    .filter(|v| v.instance_id == b.instance_id)
                    .map(|v| v.check_name.as_str())
                    .collect();
                vec![
                    b.instance_id.clone(),
                    format!("{:?}", b.kind).to_lowercase(),
                    b.v_atoms.to_string(),
                    b.e_atoms.to_string(),
                    b.rows.to_string(),
                    b.skipped.to_string(),
                    b.failures.to_string(),
                    b.informational.to_string(),
                    sci(b.gap_sum),
                    sci(b.max_identity_discrepancy),
                    names.join(";"),
                ]
            }),
        )
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn random_masses<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(0.2..2.0)).collect()
}

/// The `index`-th fuzz subject; a pure function of `(seed, index)`.
pub fn fuzz_subject(seed: u64, index: usize) -> Result<(FuzzKind, Subject)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    let id = format!("fuzz-{index}");
    let (kind, subject) = match index % 4 {
        0 => {
            let (p, q) = (rng.gen_range(1..=20), rng.gen_range(1..=20));
            let c = rng.gen_range(0.5..=5.0);
            let base = random_instance_with(&mut rng, p, q, c, (0.1, 3.0))?;
            let inst = build_discrete(
                random_masses(&mut rng, p),
                random_masses(&mut rng, q),
                base.kernel_rows(),
                base.weights().to_vec(),
            )?
            .with_column_integral(c)
            .ok_or(Error::DegenerateColumn { column: 0, attempts: 1 })?;
            (FuzzKind::Matrix, Subject::from_instance(id, inst))
        }
        1 => {
            let k = rng.gen_range(2..=4u32);
            let p: usize = rng.gen_range(2..=12);
            let q = rng.gen_range(p.div_ceil(k as usize)..=12);
            let regular = (k as usize * q).is_multiple_of(p) && rng.gen_bool(0.25);
            let mut h = random_hypergraph_with(&mut rng, p, q, k, regular)?;
            if rng.gen_bool(0.5) {
                let w = random_masses(&mut rng, q);
                h = h.with_edge_weights(w)?;
            }
            (FuzzKind::Hypergraph, Subject::from_hypergraph(id, h)?)
        }
        2 => {
            let n = rng.gen_range(1..=20);
            let model = if rng.gen_bool(0.5) {
                let ra = rng.gen_range(0.2..0.9);
                let ru = rng.gen_range(0.2..0.9);
                SequenceModel::geometric(rng.gen_range(0.5..2.0), ra, rng.gen_range(0.5..2.0), ru, n)?
            } else {
                let a = random_masses(&mut rng, n);
                let u = random_masses(&mut rng, n);
                SequenceModel::from_u(a, u)?
            };
            (FuzzKind::Sequence, Subject::from_sequence(id, model)?)
        }
        _ => {
            let nodes = rng.gen_range(4..=32);
            let amplitude = rng.gen_range(0.0..1.0);
            let slope = rng.gen_range(0.0..2.0);
            let rule_e = [
                QuadratureRule::Midpoint,
                QuadratureRule::TrapezoidPeriodic,
                QuadratureRule::GaussLegendre,
            ][rng.gen_range(0..3)];
            let sv = QuadratureScheme::new(QuadratureRule::TrapezoidPeriodic, nodes, 0.0, 1.0)?;
            let se = QuadratureScheme::new(rule_e, nodes, 0.0, 1.0)?;
            let inst = from_interval(
                |v, e| 1.0 + amplitude * (TAU * (v - e)).sin(),
                |e| 0.25 + slope * e,
                &sv,
                &se,
            )?;
            (FuzzKind::Interval, Subject::from_instance(id, inst))
        }
    };
    Ok((kind, subject.with_seed(rng.gen())))
}

fn round_sig3(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    let scale = 10f64.powi(2 - x.abs().log10().floor() as i32);
    (x * scale).round() / scale
}

/// Gap of the named row if it is still violated on `subject`.
fn violated_gap(subject: &Subject, kind: CheckKind, phi: Option<&PhiSpec>, name: &str, cfg: &SuiteConfig) -> Option<f64> {
    let profile = characterize(&subject.instance, cfg.tol.column).ok()?;
    let results = run_kind(subject, &profile, kind, phi, cfg).ok()?;
    results
        .into_iter()
        .find(|r| r.check_name == name && r.is_violated())
        .map(|r| r.gap)
}

fn plain(subject: &Subject, instance: Instance, erased: Vec<bool>) -> Subject {
    Subject {
        id: subject.id.clone(),
        instance,
        hypergraph: None,
        sequence: None,
        erased: Some(erased),
        check_seed: subject.check_seed,
    }
}

/// Drop atoms one at a time (columns re-normalized to the original `c`),
/// then round values to 3 significant digits, while the violation persists.
fn shrink(subject: &Subject, kind: CheckKind, phi: Option<&PhiSpec>, name: &str, cfg: &SuiteConfig) -> (Subject, f64) {
    let mut best = subject.clone();
    best.erased = Some(subject.erasure_mask());
    let Some(mut gap) = violated_gap(&best, kind, phi, name, cfg) else {
        return (best, f64::NAN);
    };
    // sequence and hypergraph checks need their structure; keep as is
    if matches!(kind, CheckKind::Sequence | CheckKind::GmOfGms) {
        return (best, gap);
    }
    let c = match characterize(&best.instance, cfg.tol.column) {
        Ok(p) => p.c,
        Err(_) => return (best, gap),
    };
    let mut progress = true;
    while progress {
        progress = false;
        let mask = best.erased.clone().unwrap_or_default();
        let mut candidates = Vec::new();
        for v in 0..best.instance.v_count() {
            if let Some(inst) = best.instance.without_v_atom(v).and_then(|i| i.with_column_integral(c)) {
                candidates.push(plain(&best, inst, mask.clone()));
            }
        }
        for e in 0..best.instance.e_count() {
            let mut m = mask.clone();
            m.remove(e);
            if m.iter().all(|&x| x) {
                continue;
            }
            if let Some(inst) = best.instance.without_e_atom(e) {
                candidates.push(plain(&best, inst, m));
            }
        }
        for cand in candidates {
            if let Some(g) = violated_gap(&cand, kind, phi, name, cfg) {
                best = cand;
                gap = g;
                progress = true;
                break;
            }
        }
    }
    let parts = crate::measure::ValueParts {
        v_masses: true,
        e_masses: true,
        kernel: true,
        weights: true,
    };
    let rounded = best
        .instance
        .map_values(parts, round_sig3)
        .ok()
        .and_then(|i| i.with_column_integral(round_sig3(c)))
        .map(|i| plain(&best, i, best.erased.clone().unwrap_or_default()));
    if let Some(cand) = rounded {
        if let Some(g) = violated_gap(&cand, kind, phi, name, cfg) {
            best = cand;
            gap = g;
        }
    }
    (best, gap)
}

fn fuzz_one(seed: u64, index: usize, cfg: &SuiteConfig) -> Result<(FuzzBlock, Vec<FuzzViolation>)> {
    let (kind, subject) = fuzz_subject(seed, index)?;
    let report = run_subject(&subject, cfg)?;
    let mut block = FuzzBlock {
        index,
        instance_id: subject.id.clone(),
        kind,
        v_atoms: subject.instance.v_count(),
        e_atoms: subject.instance.e_count(),
        rows: report.rows.len(),
        skipped: report.rows.iter().filter(|r| r.status == RowStatus::Skipped).count(),
        failures: report.failure_count(),
        informational: report.informational_violations(),
        gap_sum: 0.0,
        max_identity_discrepancy: 0.0,
    };
    for (_, r) in report.checked_rows() {
        if r.asserted {
            block.gap_sum += r.gap.abs();
        }
        if let Some(d) = r.identity_discrepancy() {
            block.max_identity_discrepancy = block.max_identity_discrepancy.max(d);
        }
    }
    let mut violations = Vec::new();
    for row in report
        .rows
        .iter()
        .filter(|r| matches!(r.status, RowStatus::Violated | RowStatus::Error))
    {
        let check_kind = cfg
            .checks
            .iter()
            .copied()
            .find(|k| row.check_name.starts_with(k.name()))
            .unwrap_or(CheckKind::Main);
        let phi = row.phi.as_deref().and_then(|p| p.parse::<PhiSpec>().ok());
        let phi = if check_kind.uses_phi() { phi } else { None };
        let gap = row.result.as_ref().map_or(f64::NAN, |r| r.gap);
        let (shrunk, shrunk_gap) = if row.result.is_some() {
            shrink(&subject, check_kind, phi.as_ref(), &row.check_name, cfg)
        } else {
            (subject.clone(), f64::NAN)
        };
        violations.push(FuzzViolation {
            instance_id: subject.id.clone(),
            check_name: row.check_name.clone(),
            phi: row.phi.clone(),
            asserted: row.asserted,
            gap,
            original_size: subject.size(),
            erased: shrunk.erased.clone().unwrap_or_else(|| shrunk.erasure_mask()),
            instance: shrunk.instance,
            check_seed: shrunk.check_seed,
            shrunk_gap,
        });
    }
    Ok((block, violations))
}

/// `count` generated instances cycling through matrix, hypergraph, sequence
/// and quadrature constructors. Instances run in parallel; the report is
/// assembled in index order, so it depends only on `seed`, `count` and `cfg`.
pub fn fuzz(cfg: &SuiteConfig, count: usize) -> Result<FuzzReport> {
    cfg.validate()?;
    if count == 0 {
        return Err(Error::InvalidArgument("count must be at least 1".into()));
    }
    let results: Vec<(FuzzBlock, Vec<FuzzViolation>)> = (0..count)
        .into_par_iter()
        .map(|i| fuzz_one(cfg.seed, i, cfg))
        .collect::<Result<_>>()?;
    let mut report = FuzzReport {
        seed: cfg.seed,
        instances_tried: count,
        blocks: Vec::with_capacity(count),
        violations: Vec::new(),
    };
    for (block, violations) in results {
        report.blocks.push(block);
        report.violations.extend(violations);
    }
    Ok(report)
}

/// Re-run a stored violation; returns its current gap if still violated.
pub fn replay(v: &FuzzViolation, cfg: &SuiteConfig) -> Option<f64> {
    let subject = Subject {
        id: v.instance_id.clone(),
        instance: v.instance.clone(),
        hypergraph: None,
        sequence: None,
        erased: Some(v.erased.clone()),
        check_seed: v.check_seed,
    };
    let kind = cfg
        .checks
        .iter()
        .copied()
        .find(|k| v.check_name.starts_with(k.name()))?;
    let phi = v.phi.as_deref().and_then(|p| p.parse::<PhiSpec>().ok());
    let phi = if kind.uses_phi() { phi } else { None };
    violated_gap(&subject, kind, phi.as_ref(), &v.check_name, cfg)
}
