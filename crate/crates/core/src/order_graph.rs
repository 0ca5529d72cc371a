//! Edge relations on `R^d` generated by polyhedral convex cones.
//!
//! An edge `(x, y)` exists iff `y - x` lies in the cone
//! `K = { v : G v >= 0 }`, where `G` is the generator matrix. Because `K`
//! contains zero and is closed under addition and nonnegative scaling, the
//! relation is reflexive, transitive, and compatible with convex
//! combinations of edges. The sampled auditors here check those three
//! axioms numerically; they are generic over [`EdgeRelation`] so that
//! deliberately broken relations can be run through the same checks.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::vector;

/// Default absolute slack on each generator row.
pub const DEFAULT_SLACK_TOL: f64 = 1e-12;

/// A directed edge relation on `R^d`.
pub trait EdgeRelation: Sync {
    fn dimension(&self) -> usize;

    /// Whether `(x, y)` is an edge.
    fn edge(&self, x: &[f64], y: &[f64]) -> Result<bool>;

    /// Edge of the symmetrized graph: `(x, y)` or `(y, x)`.
    fn undirected(&self, x: &[f64], y: &[f64]) -> Result<bool> {
        Ok(self.edge(x, y)? || self.edge(y, x)?)
    }

    /// Membership of `x` in the up-set `[anchor, ->)` or down-set `(<-, anchor]`.
    fn interval_contains(&self, anchor: &[f64], x: &[f64], direction: Direction) -> Result<bool> {
        match direction {
            Direction::Up => self.edge(anchor, x),
            Direction::Down => self.edge(x, anchor),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Up,
    Down,
}

/// Cone-generated relation: `edge(x, y)` iff `G (y - x) >= -slack_tol` row by row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConeRelation {
    dimension: usize,
    generator: Vec<Vec<f64>>,
    slack_tol: f64,
}

impl ConeRelation {
    /// Builds a relation from generator rows. An empty row list gives the full relation.
    pub fn new(dimension: usize, generator: Vec<Vec<f64>>, slack_tol: f64) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::InvalidInput("dimension must be positive".into()));
        }
        if !(slack_tol >= 0.0 && slack_tol.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "slack_tol must be a nonnegative finite number, got {slack_tol}"
            )));
        }
        for row in &generator {
            check_dim(dimension, row.len())?;
            if !vector::is_finite(row) {
                return Err(Error::InvalidInput("generator entries must be finite".into()));
            }
        }
        Ok(Self {
            dimension,
            generator,
            slack_tol,
        })
    }

    /// The coordinatewise order `x <= y`.
    pub fn coordinatewise(dimension: usize) -> Result<Self> {
        let rows = (0..dimension)
            .map(|i| {
                let mut row = vec![0.0; dimension];
                row[i] = 1.0;
                row
            })
            .collect();
        Self::new(dimension, rows, DEFAULT_SLACK_TOL)
    }

    /// The half-space cone `{ v : normal . v >= 0 }`.
    pub fn half_space(normal: Vec<f64>) -> Result<Self> {
        Self::new(normal.len(), vec![normal], DEFAULT_SLACK_TOL)
    }

    pub fn generator(&self) -> &[Vec<f64>] {
        &self.generator
    }

    pub fn slack_tol(&self) -> f64 {
        self.slack_tol
    }

    /// Exact membership of `v` in the cone, without slack.
    pub fn cone_contains(&self, v: &[f64]) -> bool {
        self.generator.iter().all(|row| dot(row, v) >= 0.0)
    }

    fn within(&self, v: &[f64]) -> bool {
        self.generator.iter().all(|row| dot(row, v) >= -self.slack_tol)
    }

    /// Draws a nonzero cone element with a Gaussian-derived direction.
    ///
    /// Each attempt tries `g`, `-g` and `|g|` for a standard normal `g`, which
    /// always succeeds at once for the orthant and for half-spaces with a
    /// nonnegative normal. Returns `None` after `max_attempts` misses.
    pub fn sample_cone_element<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        max_attempts: usize,
    ) -> Option<Vec<f64>> {
        for _ in 0..max_attempts {
            let g: Vec<f64> = (0..self.dimension)
                .map(|_| rng.sample(StandardNormal))
                .collect();
            if g.iter().all(|&c| c == 0.0) {
                continue;
            }
            let abs: Vec<f64> = g.iter().map(|c| c.abs()).collect();
            let neg: Vec<f64> = g.iter().map(|c| -c).collect();
            for cand in [g, neg, abs] {
                if self.cone_contains(&cand) {
                    return Some(cand);
                }
            }
        }
        None
    }

    /// A chained triple `(x, x + u, x + u + v)` with `u`, `v` sampled cone
    /// elements of norm at most `scale` in the max norm and `x` Gaussian.
    pub fn sample_chained_triple<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        scale: f64,
    ) -> Option<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let x: Vec<f64> = (0..self.dimension)
            .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let u = self.sample_scaled(rng, scale)?;
        let v = self.sample_scaled(rng, scale)?;
        let y = vector::add(&x, &u);
        let z = vector::add(&y, &v);
        Some((x, y, z))
    }

    /// A sampled edge `(x, x + u)`.
    pub fn sample_edge<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        scale: f64,
    ) -> Option<(Vec<f64>, Vec<f64>)> {
        let x: Vec<f64> = (0..self.dimension)
            .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let u = self.sample_scaled(rng, scale)?;
        let y = vector::add(&x, &u);
        Some((x, y))
    }

    fn sample_scaled<R: Rng + ?Sized>(&self, rng: &mut R, scale: f64) -> Option<Vec<f64>> {
        let v = self.sample_cone_element(rng, 1000)?;
        let m = v.iter().fold(0.0_f64, |acc, c| acc.max(c.abs()));
        let len = scale * rng.random::<f64>();
        Some(vector::scale(&v, len / m))
    }
}

impl EdgeRelation for ConeRelation {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn edge(&self, x: &[f64], y: &[f64]) -> Result<bool> {
        check_dim(self.dimension, x.len())?;
        check_dim(self.dimension, y.len())?;
        Ok(self.within(&vector::sub(y, x)))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Outcome of an auditor: hypotheses are kept apart from conclusions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditStatus {
    Pass,
    Fail,
    HypothesisNotMet,
}

/// Pass/fail evidence for one property, with the first counterexample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub property: String,
    pub status: AuditStatus,
    pub trials: usize,
    pub failures: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub metrics: BTreeMap<String, f64>,
}

impl AuditReport {
    pub fn new(property: impl Into<String>) -> Self {
        Self {
            property: property.into(),
            status: AuditStatus::Pass,
            trials: 0,
            failures: 0,
            witness: None,
            note: None,
            metrics: BTreeMap::new(),
        }
    }

    /// A report whose hypothesis failed; no trials were run.
    pub fn hypothesis_not_met(property: impl Into<String>, reason: impl Into<String>) -> Self {
        let mut report = Self::new(property);
        report.status = AuditStatus::HypothesisNotMet;
        report.note = Some(reason.into());
        report
    }

    /// Records one trial. The witness closure runs only for the first failure.
    pub fn record<F>(&mut self, ok: bool, witness: F)
    where
        F: FnOnce() -> Vec<Vec<f64>>,
    {
        self.trials += 1;
        if !ok {
            if self.failures == 0 {
                self.witness = Some(witness());
            }
            self.failures += 1;
            if self.status == AuditStatus::Pass {
                self.status = AuditStatus::Fail;
            }
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    pub fn passed(&self) -> bool {
        self.status == AuditStatus::Pass
    }
}

/// Checks `edge(x, x)` on `sample_count` points drawn from `sampler`.
pub fn audit_reflexive<R, S>(rel: &R, sample_count: usize, mut sampler: S) -> Result<AuditReport>
where
    R: EdgeRelation + ?Sized,
    S: FnMut() -> Vec<f64>,
{
    if sample_count == 0 {
        return Err(Error::InvalidInput("sample_count must be at least 1".into()));
    }
    let mut report = AuditReport::new("reflexive");
    for _ in 0..sample_count {
        let x = sampler();
        let ok = rel.edge(&x, &x)?;
        report.record(ok, || vec![x.clone()]);
    }
    Ok(report)
}

/// Checks `edge(x, z)` on chained triples. Triples whose premises
/// `edge(x, y)` and `edge(y, z)` fail are skipped and not counted.
pub fn audit_transitive<R, S>(rel: &R, triple_count: usize, mut sampler: S) -> Result<AuditReport>
where
    R: EdgeRelation + ?Sized,
    S: FnMut() -> (Vec<f64>, Vec<f64>, Vec<f64>),
{
    if triple_count == 0 {
        return Err(Error::InvalidInput("triple_count must be at least 1".into()));
    }
    let mut report = AuditReport::new("transitive");
    for _ in 0..triple_count {
        let (x, y, z) = sampler();
        if !(rel.edge(&x, &y)? && rel.edge(&y, &z)?) {
            continue;
        }
        let ok = rel.edge(&x, &z)?;
        report.record(ok, || vec![x.clone(), y.clone(), z.clone()]);
    }
    Ok(report)
}

/// Checks that convex combinations of two edges are edges, for every alpha.
/// Edge pairs come from `sampler` as `((x, y), (w, z))`.
pub fn audit_cg<R, S>(
    rel: &R,
    sample_count: usize,
    alphas: &[f64],
    mut sampler: S,
) -> Result<AuditReport>
where
    R: EdgeRelation + ?Sized,
    S: FnMut() -> ((Vec<f64>, Vec<f64>), (Vec<f64>, Vec<f64>)),
{
    if sample_count == 0 {
        return Err(Error::InvalidInput("sample_count must be at least 1".into()));
    }
    if let Some(a) = alphas.iter().find(|a| !(0.0..=1.0).contains(*a)) {
        return Err(Error::InvalidInput(format!("alpha {a} outside [0, 1]")));
    }
    let mut report = AuditReport::new("convex_combination");
    for _ in 0..sample_count {
        let ((x, y), (w, z)) = sampler();
        if !(rel.edge(&x, &y)? && rel.edge(&w, &z)?) {
            continue;
        }
        for &alpha in alphas {
            let u = vector::convex_combination(alpha, &x, &w);
            let v = vector::convex_combination(alpha, &y, &z);
            let ok = rel.edge(&u, &v)?;
            report.record(ok, || vec![x.clone(), y.clone(), w.clone(), z.clone(), vec![alpha]]);
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn coord2() -> ConeRelation {
        ConeRelation::coordinatewise(2).unwrap()
    }

    /// `edge(x, y)` iff `G (y - x) > 0` strictly; has no loops.
    struct StrictCone(ConeRelation);

    impl EdgeRelation for StrictCone {
        fn dimension(&self) -> usize {
            self.0.dimension()
        }
        fn edge(&self, x: &[f64], y: &[f64]) -> Result<bool> {
            check_dim(self.dimension(), x.len())?;
            let v = vector::sub(y, x);
            Ok(self.0.generator().iter().all(|row| dot(row, &v) > 0.0))
        }
    }

    #[test]
    fn edge_examples() {
        let rel = coord2();
        assert!(rel.edge(&[0.0, 0.0], &[1.0, 2.0]).unwrap());
        assert!(rel.edge(&[0.3, -7.0], &[0.3, -7.0]).unwrap());
        assert!(!rel.edge(&[1.0, 0.0], &[0.0, 1.0]).unwrap());
    }

    #[test]
    fn slack_absorbs_roundoff_only() {
        let rel = coord2();
        assert!(rel.edge(&[1.0, 1.0], &[1.0 - 5e-13, 1.0]).unwrap());
        assert!(!rel.edge(&[1.0, 1.0], &[1.0 - 1e-9, 1.0]).unwrap());
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let rel = coord2();
        assert_eq!(
            rel.edge(&[0.0], &[0.0, 1.0]),
            Err(Error::DimensionMismatch { expected: 2, found: 1 })
        );
        assert!(rel.undirected(&[0.0, 0.0, 0.0], &[0.0, 1.0]).is_err());
        assert!(rel
            .interval_contains(&[0.0, 0.0], &[1.0], Direction::Up)
            .is_err());
    }

    #[test]
    fn undirected_examples() {
        let rel = coord2();
        assert!(rel.undirected(&[1.0, 2.0], &[0.0, 0.0]).unwrap());
        assert!(!rel.undirected(&[1.0, 0.0], &[0.0, 1.0]).unwrap());
        assert!(rel.undirected(&[4.0, 4.0], &[4.0, 4.0]).unwrap());
    }

    #[test]
    fn interval_examples() {
        let rel = coord2();
        let o = [0.0, 0.0];
        assert!(rel.interval_contains(&o, &[1.0, 1.0], Direction::Up).unwrap());
        assert!(!rel.interval_contains(&o, &[1.0, 1.0], Direction::Down).unwrap());
        assert!(rel.interval_contains(&o, &o, Direction::Up).unwrap());
        assert!(rel.interval_contains(&o, &o, Direction::Down).unwrap());
    }

    #[test]
    fn rejects_bad_construction() {
        assert!(ConeRelation::new(2, vec![vec![1.0]], 0.0).is_err());
        assert!(ConeRelation::new(2, vec![], -1.0).is_err());
        assert!(ConeRelation::new(2, vec![vec![f64::NAN, 0.0]], 0.0).is_err());
        assert!(ConeRelation::new(0, vec![], 0.0).is_err());
    }

    #[test]
    fn reflexive_audits() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rel = coord2();
        let report = audit_reflexive(&rel, 1000, || {
            vec![rng.random::<f64>() * 10.0 - 5.0, rng.random::<f64>()]
        })
        .unwrap();
        assert_eq!((report.trials, report.failures), (1000, 0));
        assert!(report.witness.is_none());

        let strict = StrictCone(coord2());
        let report = audit_reflexive(&strict, 50, || vec![rng.random(), rng.random()]).unwrap();
        assert_eq!(report.failures, report.trials);
        assert_eq!(report.status, AuditStatus::Fail);
        assert!(report.witness.is_some());

        let full = ConeRelation::new(3, vec![], DEFAULT_SLACK_TOL).unwrap();
        let report = audit_reflexive(&full, 10, || vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(report.failures, 0);

        assert!(audit_reflexive(&full, 0, || vec![0.0; 3]).is_err());
    }

    #[test]
    fn transitive_audits_on_cones() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for rel in [coord2(), ConeRelation::half_space(vec![1.0, 1.0]).unwrap()] {
            let report = audit_transitive(&rel, 1000, || {
                rel.sample_chained_triple(&mut rng, 1.0).unwrap()
            })
            .unwrap();
            assert_eq!(report.failures, 0);
            assert_eq!(report.trials, 1000);
        }
    }

    #[test]
    fn cg_audit_and_endpoint_alphas() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rel = coord2();
        let report = audit_cg(&rel, 500, &[0.0, 0.5, 1.0], || {
            (
                rel.sample_edge(&mut rng, 1.0).unwrap(),
                rel.sample_edge(&mut rng, 1.0).unwrap(),
            )
        })
        .unwrap();
        assert_eq!((report.trials, report.failures), (1500, 0));

        let e1 = (vec![0.0, 0.0], vec![1.0, 0.0]);
        let e2 = (vec![5.0, 5.0], vec![5.0, 7.0]);
        for alpha in [0.0, 1.0] {
            let r = audit_cg(&rel, 1, &[alpha], || (e1.clone(), e2.clone())).unwrap();
            assert_eq!(r.failures, 0);
        }
        assert!(audit_cg(&rel, 1, &[1.5], || (e1.clone(), e2.clone())).is_err());
        assert!(audit_cg(&rel, 1, &[-0.1], || (e1.clone(), e2.clone())).is_err());
    }

    #[test]
    fn cone_elements_belong_to_the_cone() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let rel = ConeRelation::new(3, vec![vec![1.0, -1.0, 0.0], vec![0.0, 1.0, 2.0]], 0.0)
            .unwrap();
        for _ in 0..200 {
            let v = rel.sample_cone_element(&mut rng, 1000).unwrap();
            assert!(rel.cone_contains(&v));
        }
    }

    #[test]
    fn reports_serialize_without_empty_fields() {
        let report = AuditReport::new("reflexive");
        let json = serde_json::to_string(&report).unwrap();
        assert!(!json.contains("witness"));
        assert!(json.contains("\"status\":\"pass\""));
    }
}
