//! Verification engine for Jensen-type inequalities on pairs of measure
//! spaces linked by a kernel with constant column integrals.

// Comparisons are written as `!(x > 0.0)` on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod convexity;
pub mod degree;
pub mod error;
pub mod hypergraph;
pub mod inequalities;
pub mod measure;
pub mod quadrature;
pub mod suite;

pub use convexity::{Family, Interval, PhiSpec, Shape, ShapeCertificate};
pub use degree::{characterize, DegreeProfile, HypothesisReport};
pub use error::{Error, Result};
pub use hypergraph::{random_hypergraph, DegreeSummary, Hypergraph};
pub use inequalities::{CheckResult, Direction, Status, Tolerance, Variant};
pub use measure::{AtomicSpace, Instance, SequenceModel};
pub use quadrature::{QuadratureRule, QuadratureScheme};
pub use suite::{CheckKind, FuzzReport, GenSpec, Report, SuiteConfig, Subject};
