//! Edge-weighted k-uniform hypergraphs: ingest, degree statistics, random
//! generation and the embedding into an [`Instance`] with counting measures.

use num_rational::Ratio;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inequalities::{CheckResult, Direction, Tolerance};
use crate::measure::{AtomicSpace, Instance};

/// Redraws allowed while repairing isolated vertices.
const REPAIR_BUDGET: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "HypergraphFile", into = "HypergraphFile")]
pub struct Hypergraph {
    k: u32,
    /// `incidence[v][e]` is the multiplicity of vertex `v` on edge `e`.
    incidence: Vec<Vec<u32>>,
    edge_weights: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HypergraphFile {
    k: u32,
    incidence: Vec<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    edge_weights: Option<Vec<f64>>,
}

impl TryFrom<HypergraphFile> for Hypergraph {
    type Error = Error;

    fn try_from(file: HypergraphFile) -> Result<Self> {
        Hypergraph::new(file.k, file.incidence, file.edge_weights)
    }
}

impl From<Hypergraph> for HypergraphFile {
    fn from(h: Hypergraph) -> Self {
        let unit = h.has_unit_weights();
        HypergraphFile {
            k: h.k,
            incidence: h.incidence,
            edge_weights: (!unit).then_some(h.edge_weights),
        }
    }
}

/// Degree statistics of a validated hypergraph.
#[derive(Debug, Clone, PartialEq)]
pub struct DegreeSummary {
    pub degrees: Vec<u64>,
    /// `sum_e M(v,e) wt(e)`.
    pub weighted_degrees: Vec<f64>,
    /// `k q / p`, exact.
    pub d_bar: Ratio<u64>,
    pub regular: bool,
}

impl DegreeSummary {
    pub fn d_bar_f64(&self) -> f64 {
        *self.d_bar.numer() as f64 / *self.d_bar.denom() as f64
    }
}

impl Hypergraph {
    /// Shape checks only; uniformity and isolated vertices are checked by
    /// [`Hypergraph::validate_and_degrees`].
    pub fn new(k: u32, incidence: Vec<Vec<u32>>, edge_weights: Option<Vec<f64>>) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidArgument("uniformity k must be at least 1".into()));
        }
        let q = incidence.first().map_or(0, Vec::len);
        if incidence.is_empty() || q == 0 {
            return Err(Error::DimensionMismatch("incidence needs at least one vertex and one edge".into()));
        }
        if let Some(v) = incidence.iter().position(|row| row.len() != q) {
            return Err(Error::DimensionMismatch(format!(
                "incidence row {v} has {} entries, expected {q}",
                incidence[v].len()
            )));
        }
        let edge_weights = edge_weights.unwrap_or_else(|| vec![1.0; q]);
        if edge_weights.len() != q {
            return Err(Error::DimensionMismatch(format!(
                "{} edge weights for {q} edges",
                edge_weights.len()
            )));
        }
        if let Some(index) = edge_weights.iter().position(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::NonPositiveMass {
                what: "edge_weights",
                index,
                value: edge_weights[index],
            });
        }
        Ok(Self {
            k,
            incidence,
            edge_weights,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn vertex_count(&self) -> usize {
        self.incidence.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_weights.len()
    }

    pub fn incidence(&self) -> &[Vec<u32>] {
        &self.incidence
    }

    pub fn edge_weights(&self) -> &[f64] {
        &self.edge_weights
    }

    pub fn has_unit_weights(&self) -> bool {
        self.edge_weights.iter().all(|&w| w == 1.0)
    }

    pub fn with_edge_weights(self, weights: Vec<f64>) -> Result<Self> {
        Self::new(self.k, self.incidence, Some(weights))
    }

    pub fn validate_and_degrees(&self) -> Result<DegreeSummary> {
        let (p, q) = (self.vertex_count(), self.edge_count());
        for e in 0..q {
            let sum: u64 = self.incidence.iter().map(|row| row[e] as u64).sum();
            if sum != self.k as u64 {
                return Err(Error::NonUniform { edge: e, sum, k: self.k });
            }
        }
        let degrees: Vec<u64> = self
            .incidence
            .iter()
            .map(|row| row.iter().map(|&m| m as u64).sum())
            .collect();
        if let Some(v) = degrees.iter().position(|&d| d == 0) {
            return Err(Error::IsolatedVertex(v));
        }
        let weighted_degrees = self
            .incidence
            .iter()
            .map(|row| row.iter().zip(&self.edge_weights).map(|(&m, w)| m as f64 * w).sum())
            .collect();
        let regular = degrees.windows(2).all(|w| w[0] == w[1]);
        Ok(DegreeSummary {
            degrees,
            weighted_degrees,
            d_bar: Ratio::new(self.k as u64 * q as u64, p as u64),
            regular,
        })
    }

    /// Counting measures on both sides, kernel = incidence, weights = edge
    /// weights. The column integral is `k`.
    pub fn to_instance(&self) -> Result<Instance> {
        self.validate_and_degrees()?;
        let rows = self
            .incidence
            .iter()
            .map(|row| row.iter().map(|&m| m as f64).collect())
            .collect();
        let inst = Instance::new(
            AtomicSpace::unit(self.vertex_count()),
            AtomicSpace::unit(self.edge_count()),
            rows,
            self.edge_weights.clone(),
        )?;
        Ok(inst.with_meta(serde_json::json!({ "source": "hypergraph", "k": self.k })))
    }

    /// Geometric mean over edges of the edge-wise geometric means of the
    /// degrees against the average degree, compared in log domain.
    pub fn gm_of_gms_check(&self, tol: &Tolerance) -> Result<CheckResult> {
        if !self.has_unit_weights() {
            return Err(Error::InvalidArgument("gm-of-gms needs unit edge weights".into()));
        }
        let summary = self.validate_and_degrees()?;
        if let Some(v) = summary.degrees.iter().position(|&d| d == 0) {
            return Err(Error::ZeroDegree(v));
        }
        let logs: Vec<f64> = summary.degrees.iter().map(|&d| (d as f64).ln()).collect();
        let (k, q) = (self.k as f64, self.edge_count() as f64);
        let mut lhs = 0.0;
        for e in 0..self.edge_count() {
            let edge: f64 = self
                .incidence
                .iter()
                .zip(&logs)
                .map(|(row, l)| row[e] as f64 * l)
                .sum();
            lhs += edge / k;
        }
        lhs /= q;
        // sum_e sum_v m ln d_v = sum_v d_v ln d_v
        let marginal: f64 =
            summary.degrees.iter().zip(&logs).map(|(&d, l)| d as f64 * l).sum::<f64>() / (k * q);
        let d_bar = summary.d_bar_f64();
        let mut out = CheckResult::new("gm-of-gms", Direction::AtLeast, lhs, d_bar.ln(), tol);
        out.phi = Some("log".into());
        out.lhs_identity = Some(marginal);
        let lo = summary.degrees.iter().min().copied().unwrap_or(0) as f64;
        let hi = summary.degrees.iter().max().copied().unwrap_or(0) as f64;
        out.set_spread((hi - lo) / d_bar);
        out.characterizes_equality = true;
        out.extras.push(("gm_lhs".into(), lhs.exp()));
        out.extras.push(("d_bar".into(), d_bar));
        Ok(out)
    }
}

/// Random `k`-uniform hypergraph with unit weights. Edges are multisets of
/// `k` vertices drawn uniformly with replacement; with `regular`, the
/// multiset holding each vertex `kq/p` times is shuffled and cut into edges.
pub fn random_hypergraph(p: usize, q: usize, k: u32, seed: u64, regular: bool) -> Result<Hypergraph> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_hypergraph_with(&mut rng, p, q, k, regular)
}

pub(crate) fn random_hypergraph_with<R: Rng>(
    rng: &mut R,
    p: usize,
    q: usize,
    k: u32,
    regular: bool,
) -> Result<Hypergraph> {
    if p == 0 || q == 0 || k == 0 {
        return Err(Error::InvalidArgument("p, q and k must be at least 1".into()));
    }
    let k_us = k as usize;
    let slots = k_us * q;
    let edges: Vec<Vec<usize>> = if regular {
        if !slots.is_multiple_of(p) {
            return Err(Error::RegularInfeasible { p, q, k });
        }
        let mut pool: Vec<usize> = (0..slots).map(|i| i % p).collect();
        pool.shuffle(rng);
        pool.chunks(k_us).map(<[usize]>::to_vec).collect()
    } else {
        if slots < p {
            return Err(Error::InvalidArgument(format!(
                "{q} edges of size {k} cannot cover {p} vertices"
            )));
        }
        let mut edges: Vec<Vec<usize>> =
            (0..q).map(|_| (0..k_us).map(|_| rng.gen_range(0..p)).collect()).collect();
        repair_isolated(rng, p, &mut edges)?;
        edges
    };
    let mut incidence = vec![vec![0u32; q]; p];
    for (e, edge) in edges.iter().enumerate() {
        for &v in edge {
            incidence[v][e] += 1;
        }
    }
    Hypergraph::new(k, incidence, None)
}

/// Redraw an edge whose removal isolates nobody, with the isolated vertex
/// placed on it and the remaining slots drawn afresh. When every edge is
/// load-bearing, move a single slot of a repeated vertex instead.
fn repair_isolated<R: Rng>(rng: &mut R, p: usize, edges: &mut [Vec<usize>]) -> Result<()> {
    let mut degree = vec![0usize; p];
    for &v in edges.iter().flatten() {
        degree[v] += 1;
    }
    for _ in 0..REPAIR_BUDGET {
        let Some(isolated) = degree.iter().position(|&d| d == 0) else {
            return Ok(());
        };
        let removable: Vec<usize> = (0..edges.len())
            .filter(|&e| {
                edges[e]
                    .iter()
                    .all(|&v| degree[v] > edges[e].iter().filter(|&&w| w == v).count())
            })
            .collect();
        if let Some(&e) = removable.choose(rng) {
            for &v in &edges[e] {
                degree[v] -= 1;
            }
            let k = edges[e].len();
            edges[e] = std::iter::once(isolated)
                .chain((1..k).map(|_| rng.gen_range(0..p)))
                .collect();
            for &v in &edges[e] {
                degree[v] += 1;
            }
            continue;
        }
        // no edge can be redrawn whole: hand one slot of a repeated vertex over
        let slots: Vec<(usize, usize)> = edges
            .iter()
            .enumerate()
            .flat_map(|(e, edge)| edge.iter().enumerate().map(move |(i, &v)| (e, i, v)))
            .filter(|&(_, _, v)| degree[v] >= 2)
            .map(|(e, i, _)| (e, i))
            .collect();
        let Some(&(e, i)) = slots.choose(rng) else {
            break;
        };
        degree[edges[e][i]] -= 1;
        edges[e][i] = isolated;
        degree[isolated] += 1;
    }
    match degree.iter().position(|&d| d == 0) {
        Some(v) => Err(Error::IsolatedVertex(v)),
        None => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::degree::{characterize, DEFAULT_COLUMN_TOL};
    use crate::inequalities::Status;

    fn k3() -> Hypergraph {
        Hypergraph::new(2, vec![vec![1, 0, 1], vec![1, 1, 0], vec![0, 1, 1]], None).unwrap()
    }

    fn p3() -> Hypergraph {
        Hypergraph::new(2, vec![vec![1, 0], vec![1, 1], vec![0, 1]], None).unwrap()
    }

    #[test]
    fn triangle_and_path_degrees() {
        let s = k3().validate_and_degrees().unwrap();
        assert_eq!(s.degrees, vec![2, 2, 2]);
        assert_eq!(s.d_bar, Ratio::from_integer(2));
        assert!(s.regular);
        let s = p3().validate_and_degrees().unwrap();
        assert_eq!(s.degrees, vec![1, 2, 1]);
        assert_eq!(s.d_bar, Ratio::new(4, 3));
        assert!(!s.regular);
    }

    #[test]
    fn validation_errors() {
        let h = Hypergraph::new(2, vec![vec![2, 1], vec![1, 1]], None).unwrap();
        assert!(matches!(
            h.validate_and_degrees(),
            Err(Error::NonUniform { edge: 0, sum: 3, k: 2 })
        ));
        let h = Hypergraph::new(2, vec![vec![2, 1], vec![0, 1], vec![0, 0]], None).unwrap();
        assert!(matches!(h.validate_and_degrees(), Err(Error::IsolatedVertex(2))));
        assert!(Hypergraph::new(2, vec![vec![1, 1], vec![1]], None).is_err());
        assert!(Hypergraph::new(2, vec![vec![1], vec![1]], Some(vec![0.0])).is_err());
        assert!(Hypergraph::new(0, vec![vec![1]], None).is_err());
    }

    #[test]
    fn instance_embedding() {
        let inst = p3().to_instance().unwrap();
        let prof = characterize(&inst, DEFAULT_COLUMN_TOL).unwrap();
        assert_eq!(prof.c, 2.0);
        assert_eq!(prof.delta, vec![1.0, 2.0, 1.0]);
        assert!((prof.delta_bar - 4.0 / 3.0).abs() < 1e-15);

        let weighted = p3().with_edge_weights(vec![1.0, 2.0]).unwrap();
        assert_eq!(weighted.validate_and_degrees().unwrap().weighted_degrees, vec![1.0, 3.0, 2.0]);
        let inst = weighted.to_instance().unwrap();
        let prof = characterize(&inst, DEFAULT_COLUMN_TOL).unwrap();
        assert_eq!((prof.s, prof.delta_bar), (3.0, 2.0));
        assert!(weighted.gm_of_gms_check(&Tolerance::default()).is_err());
    }

    #[test]
    fn gm_of_gms_examples() {
        let tol = Tolerance::default();
        let r = p3().gm_of_gms_check(&tol).unwrap();
        assert!((r.get_extra("gm_lhs").unwrap() - 2f64.sqrt()).abs() < 1e-12);
        assert!((r.get_extra("d_bar").unwrap() - 4.0 / 3.0).abs() < 1e-15);
        assert_eq!(r.status, Status::Holds);
        assert!(r.identity_discrepancy().unwrap() < 1e-12);

        let r = k3().gm_of_gms_check(&tol).unwrap();
        assert_eq!(r.status, Status::Equality);
        assert!((r.get_extra("gm_lhs").unwrap() - 2.0).abs() < 1e-15);

        let h = random_hypergraph(7, 5, 3, 11, false).unwrap();
        assert!(!h.validate_and_degrees().unwrap().regular);
        let r = h.gm_of_gms_check(&tol).unwrap();
        assert_eq!(r.status, Status::Holds);
        assert!(r.gap > 0.0);
    }

    #[test]
    fn generator_examples() {
        let h = random_hypergraph(6, 4, 3, 5, false).unwrap();
        assert_eq!((h.vertex_count(), h.edge_count()), (6, 4));
        h.validate_and_degrees().unwrap();

        let h = random_hypergraph(4, 2, 2, 0, true).unwrap();
        assert_eq!(h.validate_and_degrees().unwrap().degrees, vec![1; 4]);

        assert!(matches!(
            random_hypergraph(5, 2, 2, 0, true),
            Err(Error::RegularInfeasible { p: 5, q: 2, k: 2 })
        ));
        assert!(random_hypergraph(9, 2, 2, 0, false).is_err());
        assert_eq!(random_hypergraph(8, 6, 3, 42, false).unwrap(), random_hypergraph(8, 6, 3, 42, false).unwrap());
    }

    #[test]
    fn tight_cover_is_repaired() {
        // kq = p: every vertex must appear exactly once
        for seed in 0..20 {
            let h = random_hypergraph(6, 3, 2, seed, false).unwrap();
            assert!(h.validate_and_degrees().unwrap().regular);
        }
    }

    #[test]
    fn json_round_trip() {
        let h = p3();
        let text = h.to_json().unwrap();
        assert!(!text.contains("edge_weights"));
        assert_eq!(Hypergraph::from_json(&text).unwrap(), h);
        let w = p3().with_edge_weights(vec![0.5, 1.0]).unwrap();
        assert_eq!(Hypergraph::from_json(&w.to_json().unwrap()).unwrap(), w);
        assert!(Hypergraph::from_json(r#"{"k":2,"incidence":[[1]],"extra":1}"#).is_err());
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn embedding_has_column_integral_k(p in 1usize..12, q in 1usize..12, k in 1u32..5, seed in any::<u64>()) {
                prop_assume!(k as usize * q >= p);
                let h = random_hypergraph(p, q, k, seed, false).unwrap();
                let summary = h.validate_and_degrees().unwrap();
                let inst = h.to_instance().unwrap();
                let prof = characterize(&inst, DEFAULT_COLUMN_TOL).unwrap();
                prop_assert_eq!(prof.c, k as f64);
                let mean = summary.weighted_degrees.iter().sum::<f64>() / p as f64;
                prop_assert!((prof.delta_bar - mean).abs() <= 1e-12 * mean.max(1.0));
            }

            #[test]
            fn gm_equality_iff_regular(p in 2usize..10, q in 1usize..10, k in 2u32..4, seed in any::<u64>()) {
                prop_assume!(k as usize * q >= p);
                let h = random_hypergraph(p, q, k, seed, false).unwrap();
                let r = h.gm_of_gms_check(&Tolerance::default()).unwrap();
                prop_assert_eq!(r.equality_flag, h.validate_and_degrees().unwrap().regular);
            }
        }
    }
}
