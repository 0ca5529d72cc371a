//! The Mann iteration `x_{n+1} = t_n T(x_n) + (1 - t_n) x_n` and its
//! recorded trajectory.
//!
//! Indices are 1-based throughout the public surface: `x_1` is the start,
//! `r_n = |x_n - T(x_n)|`, and `t_n` is the step taken from `x_n` to
//! `x_{n+1}`. A trajectory with `N` iterates has `N` residuals and `N - 1`
//! steps. With `record_stride = k > 1` only `x_1, x_{1+k}, ...` and the final
//! iterate are stored; residuals are kept for every `n`, and the missing
//! iterates can be replayed exactly with [`Trajectory::densify`].

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::normed_space::MEMBERSHIP_TOL;
use crate::operators::OperatorSpec;
use crate::order_graph::{AuditReport, ConeRelation, EdgeRelation};

pub const DEFAULT_MAX_ITER: usize = 100_000;
pub const DEFAULT_TOL: f64 = 1e-10;

/// Tolerance used when recomputing recorded steps and residuals.
pub const RECOMPUTE_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScheduleKind {
    Constant { t: f64 },
    /// Step sizes used in order and repeated cyclically.
    Explicit { steps: Vec<f64> },
}

/// The step sequence `(t_n)` with its declared bounds `[a, b]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub kind: ScheduleKind,
    pub a: f64,
    pub b: f64,
    pub enforce_bounds: bool,
}

impl Schedule {
    /// With `enforce_bounds`, requires `0 < a <= t_n <= b < 1` for every step;
    /// otherwise only `t_n` in `[0, 1]` and `0 <= a <= b <= 1`.
    pub fn new(kind: ScheduleKind, a: f64, b: f64, enforce_bounds: bool) -> Result<Self> {
        let s = Self {
            kind,
            a,
            b,
            enforce_bounds,
        };
        s.validate()?;
        Ok(s)
    }

    /// Constant step `t` with `a = b = t`, bounds enforced.
    pub fn constant(t: f64) -> Result<Self> {
        Self::new(ScheduleKind::Constant { t }, t, t, true)
    }

    pub fn validate(&self) -> Result<()> {
        let steps = self.distinct_steps();
        if steps.is_empty() {
            return Err(Error::Config("explicit schedule has no steps".into()));
        }
        if let Some(t) = steps.iter().find(|t| !(0.0..=1.0).contains(*t)) {
            return Err(Error::Config(format!("step size {t} outside [0, 1]")));
        }
        if !(0.0..=1.0).contains(&self.a) || !(0.0..=1.0).contains(&self.b) || self.a > self.b {
            return Err(Error::Config(format!(
                "schedule bounds a = {}, b = {} must satisfy 0 <= a <= b <= 1",
                self.a, self.b
            )));
        }
        if self.enforce_bounds {
            if !(self.a > 0.0 && self.b < 1.0) {
                return Err(Error::Config(format!(
                    "enforced bounds need 0 < a <= b < 1, got a = {}, b = {}",
                    self.a, self.b
                )));
            }
            if let Some(t) = steps.iter().find(|t| **t < self.a || **t > self.b) {
                return Err(Error::Config(format!(
                    "step size {t} outside [{}, {}]",
                    self.a, self.b
                )));
            }
        }
        Ok(())
    }

    fn distinct_steps(&self) -> Vec<f64> {
        match &self.kind {
            ScheduleKind::Constant { t } => vec![*t],
            ScheduleKind::Explicit { steps } => steps.clone(),
        }
    }

    /// `t_n` for `n >= 1`.
    pub fn step(&self, n: usize) -> f64 {
        match &self.kind {
            ScheduleKind::Constant { t } => *t,
            ScheduleKind::Explicit { steps } => steps[(n - 1) % steps.len()],
        }
    }

    /// Whether every step lies in `[a, b]` with `0 < a` and `b < 1`.
    pub fn within_bounds(&self) -> bool {
        self.a > 0.0
            && self.b < 1.0
            && self
                .distinct_steps()
                .iter()
                .all(|t| *t >= self.a && *t <= self.b)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    ToleranceMet,
    MaxIterations,
    DivergedFromDomain,
}

/// Orientation of the starting pair `(x_1, T(x_1))` in the relation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartEdge {
    /// `(x_1, T x_1)` is an edge and the reverse is not.
    Forward,
    /// `(T x_1, x_1)` is an edge and the forward pair is not.
    Backward,
    /// Both orientations, e.g. a loop when `x_1` is fixed.
    Both,
    Neither,
}

impl StartEdge {
    pub fn classify(rel: &ConeRelation, x: &[f64], tx: &[f64]) -> Result<Self> {
        Ok(match (rel.edge(x, tx)?, rel.edge(tx, x)?) {
            (true, true) => StartEdge::Both,
            (true, false) => StartEdge::Forward,
            (false, true) => StartEdge::Backward,
            (false, false) => StartEdge::Neither,
        })
    }

    pub fn forward(self) -> bool {
        matches!(self, StartEdge::Forward | StartEdge::Both)
    }

    pub fn backward(self) -> bool {
        matches!(self, StartEdge::Backward | StartEdge::Both)
    }

    /// `(x_1, T x_1)` is an edge of the symmetrized graph.
    pub fn comparable(self) -> bool {
        self != StartEdge::Neither
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    /// Maximum number of steps.
    pub max_iter: usize,
    pub tol: f64,
    pub record_stride: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            max_iter: DEFAULT_MAX_ITER,
            tol: DEFAULT_TOL,
            record_stride: 1,
        }
    }
}

/// A recorded Mann run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub dimension: usize,
    /// 1-based indices `n` of the stored iterates, increasing, first 1, last `N`.
    pub recorded: Vec<usize>,
    pub iterates: Vec<Vec<f64>>,
    /// `r_n` for `n = 1..=N`.
    pub residuals: Vec<f64>,
    /// `t_n` for `n = 1..N`.
    pub schedule_used: Vec<f64>,
    pub stop_reason: StopReason,
    pub record_stride: usize,
    /// Orientation of `(x_1, T x_1)`, when a relation was supplied.
    pub start_edge: Option<StartEdge>,
    pub operator_ref: String,
    pub space_ref: String,
    pub relation_ref: String,
}

impl Trajectory {
    /// Number of iterates `N`.
    pub fn len(&self) -> usize {
        self.residuals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.residuals.is_empty()
    }

    pub fn first(&self) -> Option<&[f64]> {
        self.iterates.first().map(Vec::as_slice)
    }

    pub fn last(&self) -> Option<&[f64]> {
        self.iterates.last().map(Vec::as_slice)
    }

    pub fn final_residual(&self) -> Option<f64> {
        self.residuals.last().copied()
    }

    /// Stored iterate `x_n`, if recorded.
    pub fn iterate(&self, n: usize) -> Option<&[f64]> {
        self.recorded
            .binary_search(&n)
            .ok()
            .map(|k| self.iterates[k].as_slice())
    }

    pub fn is_dense(&self) -> bool {
        self.recorded.len() == self.len()
    }

    /// Checks the recording convention.
    pub fn check_shape(&self) -> Result<()> {
        let n = self.len();
        if n == 0 {
            return Err(Error::InvalidInput("trajectory has no iterates".into()));
        }
        if self.schedule_used.len() + 1 != n {
            return Err(Error::Format(format!(
                "{} residuals but {} steps",
                n,
                self.schedule_used.len()
            )));
        }
        if self.recorded.len() != self.iterates.len()
            || self.recorded.first() != Some(&1)
            || self.recorded.last() != Some(&n)
            || self.recorded.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::Format(
                "recorded indices must increase from 1 to N".into(),
            ));
        }
        for x in &self.iterates {
            check_dim(self.dimension, x.len())?;
        }
        Ok(())
    }

    /// The same trajectory with every iterate present, replaying the steps
    /// between recorded iterates.
    pub fn densify(&self, op: &OperatorSpec) -> Result<Trajectory> {
        self.check_shape()?;
        if self.is_dense() {
            return Ok(self.clone());
        }
        let mut iterates = Vec::with_capacity(self.len());
        for (k, &n) in self.recorded.iter().enumerate() {
            let x = self.iterates[k].clone();
            let next = self.recorded.get(k + 1).copied();
            iterates.push(x.clone());
            if let Some(next) = next {
                let mut cur = x;
                for m in n..next - 1 {
                    cur = mann_step(&cur, &op.apply(&cur), self.schedule_used[m - 1])?;
                    iterates.push(cur.clone());
                }
            }
        }
        Ok(Trajectory {
            recorded: (1..=self.len()).collect(),
            iterates,
            record_stride: 1,
            ..self.clone()
        })
    }
}

/// `t * Tx + (1 - t) * x`.
pub fn mann_step(x: &[f64], tx: &[f64], t: f64) -> Result<Vec<f64>> {
    check_dim(x.len(), tx.len())?;
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidInput(format!("step size {t} outside [0, 1]")));
    }
    Ok(x.iter().zip(tx).map(|(a, b)| t * b + (1.0 - t) * a).collect())
}

/// Runs the Mann iteration from `x1` until `r_n <= tol` or `max_iter` steps.
///
/// When `rel` is given, the orientation of `(x_1, T x_1)` is classified and
/// stored in the trajectory; nothing about it is assumed.
pub fn run(
    op: &OperatorSpec,
    x1: &[f64],
    schedule: &Schedule,
    options: &RunOptions,
    rel: Option<&ConeRelation>,
) -> Result<Trajectory> {
    check_dim(op.dimension(), x1.len())?;
    if !op.contains(x1)? {
        return Err(Error::Domain(format!("start {x1:?} is not a member of the domain")));
    }
    schedule.validate()?;
    if options.record_stride == 0 {
        return Err(Error::Config("record_stride must be at least 1".into()));
    }
    if !(options.tol >= 0.0) {
        return Err(Error::Config(format!("tolerance {} must be nonnegative", options.tol)));
    }
    let space = op.space();
    let stride = options.record_stride;

    let mut x = x1.to_vec();
    let mut tx = op.apply(&x);
    let start_edge = match rel {
        Some(rel) => Some(StartEdge::classify(rel, &x, &tx)?),
        None => None,
    };

    let mut recorded = Vec::new();
    let mut iterates = Vec::new();
    let mut residuals = Vec::new();
    let mut schedule_used = Vec::new();
    let mut n = 1;
    let stop_reason = loop {
        let r = space.dist_of(&x, &tx);
        residuals.push(r);
        let stop = if r <= options.tol {
            Some(StopReason::ToleranceMet)
        } else if n > options.max_iter {
            Some(StopReason::MaxIterations)
        } else {
            None
        };
        if stop.is_some() || (n - 1) % stride == 0 {
            recorded.push(n);
            iterates.push(x.clone());
        }
        if let Some(reason) = stop {
            break reason;
        }
        let t = schedule.step(n);
        let next = mann_step(&x, &tx, t)?;
        if !op.domain().contains_unchecked(space, &next, MEMBERSHIP_TOL) {
            if recorded.last() != Some(&n) {
                recorded.push(n);
                iterates.push(x.clone());
            }
            break StopReason::DivergedFromDomain;
        }
        schedule_used.push(t);
        x = next;
        tx = op.apply(&x);
        n += 1;
    };

    Ok(Trajectory {
        dimension: op.dimension(),
        recorded,
        iterates,
        residuals,
        schedule_used,
        stop_reason,
        record_stride: stride,
        start_edge,
        operator_ref: op.label(),
        space_ref: format!("l_{:?}^{}", op.space().p().value(), op.dimension()),
        relation_ref: rel
            .map(|r| format!("cone[{} rows]", r.generator().len()))
            .unwrap_or_else(|| "none".into()),
    })
}

/// A start `x_1` in the domain with `(x_1, T x_1)` comparable under `rel`.
///
/// Tries `attempts` uniform samples, then the body's representative points
/// (for a box its lower and upper corners, which every monotone self-map
/// moves up and down respectively under the orthant order).
pub fn sample_comparable_start<R: Rng + ?Sized>(
    op: &OperatorSpec,
    rel: &ConeRelation,
    attempts: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    check_dim(op.dimension(), rel.dimension())?;
    let space = op.space();
    let fallback = op.domain().representative_points();
    let candidates = (0..attempts)
        .map(|_| op.domain().sample(space, rng))
        .chain(fallback);
    for x in candidates {
        if StartEdge::classify(rel, &x, &op.apply(&x))?.comparable() {
            return Ok(x);
        }
    }
    Err(Error::HypothesisNotMet(
        "no sampled start is comparable to its image".into(),
    ))
}

/// Recomputes every recorded step and residual of `traj` under `op`.
///
/// Steps between non-consecutive recorded iterates are replayed; each
/// replayed iterate also has its residual checked.
pub fn verify_trajectory(traj: &Trajectory, op: &OperatorSpec) -> Result<AuditReport> {
    if traj.is_empty() {
        return Err(Error::InvalidInput("trajectory has no iterates".into()));
    }
    traj.check_shape()?;
    check_dim(op.dimension(), traj.dimension)?;
    let space = op.space();
    let mut report = AuditReport::new("trajectory");

    for (k, &n) in traj.recorded.iter().enumerate() {
        let x = &traj.iterates[k];
        let inside = op.domain().contains_unchecked(space, x, MEMBERSHIP_TOL);
        report.record(inside, || vec![vec![n as f64], x.clone()]);

        let mut cur = x.clone();
        let mut tcur = op.apply(&cur);
        let r = space.dist_of(&cur, &tcur);
        report.record((r - traj.residuals[n - 1]).abs() <= RECOMPUTE_TOL, || {
            vec![vec![n as f64], cur.clone(), vec![traj.residuals[n - 1], r]]
        });

        let Some(&next) = traj.recorded.get(k + 1) else {
            continue;
        };
        for m in n..next {
            let t = traj.schedule_used[m - 1];
            let stepped = match mann_step(&cur, &tcur, t) {
                Ok(v) => v,
                Err(_) => {
                    report.record(false, || vec![vec![m as f64, t]]);
                    break;
                }
            };
            if m + 1 == next {
                let expected = &traj.iterates[k + 1];
                let ok = space.dist_of(&stepped, expected) <= RECOMPUTE_TOL;
                report.record(ok, || vec![vec![(m + 1) as f64], expected.clone(), stepped.clone()]);
            } else {
                cur = stepped;
                tcur = op.apply(&cur);
                let r = space.dist_of(&cur, &tcur);
                report.record((r - traj.residuals[m]).abs() <= RECOMPUTE_TOL, || {
                    vec![vec![(m + 1) as f64], cur.clone(), vec![traj.residuals[m], r]]
                });
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::normed_space::{ConvexBody, NormSpace};
    use crate::operators::PiecewiseLinear;

    /// `T(x) = (x + 1) / 2` on `[0, 1]`.
    fn averaging() -> OperatorSpec {
        OperatorSpec::componentwise(
            NormSpace::euclidean(1).unwrap(),
            ConvexBody::unit_box(1).unwrap(),
            vec![PiecewiseLinear::new(vec![0.0, 1.0], vec![0.5, 1.0]).unwrap()],
        )
        .unwrap()
    }

    fn opts(max_iter: usize, tol: f64) -> RunOptions {
        RunOptions {
            max_iter,
            tol,
            record_stride: 1,
        }
    }

    #[test]
    fn step_examples() {
        let x = [0.2, 0.4];
        let tx = [1.0, 0.0];
        assert_eq!(mann_step(&x, &tx, 0.0).unwrap(), x.to_vec());
        assert_eq!(mann_step(&x, &tx, 1.0).unwrap(), tx.to_vec());
        assert_eq!(mann_step(&x, &x, 0.37).unwrap(), x.to_vec());
        assert!(mann_step(&x, &tx, 1.5).is_err());
        assert!(mann_step(&x, &tx, -0.1).is_err());
        assert!(mann_step(&x, &[1.0], 0.5).is_err());
    }

    #[test]
    fn schedule_validation() {
        assert!(Schedule::constant(0.5).is_ok());
        assert!(matches!(Schedule::constant(1.0), Err(Error::Config(_))));
        assert!(matches!(Schedule::constant(0.0), Err(Error::Config(_))));
        let k = ScheduleKind::Constant { t: 1.0 };
        assert!(Schedule::new(k.clone(), 1.0, 1.0, false).is_ok());
        assert!(Schedule::new(k, 0.2, 0.8, true).is_err());
        let e = ScheduleKind::Explicit {
            steps: vec![0.2, 0.3, 0.9],
        };
        assert!(Schedule::new(e.clone(), 0.2, 0.8, true).is_err());
        let s = Schedule::new(e, 0.2, 0.9, true).unwrap();
        assert_eq!((s.step(1), s.step(3), s.step(4)), (0.2, 0.9, 0.2));
        assert!(Schedule::new(ScheduleKind::Explicit { steps: vec![] }, 0.1, 0.2, true).is_err());
    }

    #[test]
    fn run_matches_recurrence() {
        let op = averaging();
        let traj = run(&op, &[0.0], &Schedule::constant(0.5).unwrap(), &opts(100, 0.0), None)
            .unwrap();
        assert_eq!(traj.iterate(2), Some(&[0.25][..]));
        assert_eq!(traj.iterate(3), Some(&[0.4375][..]));
        for n in 1..=100 {
            let closed = 1.0 - 0.75f64.powi(n as i32 - 1);
            assert!((traj.iterate(n).unwrap()[0] - closed).abs() < 1e-10);
        }
        assert_eq!(traj.stop_reason, StopReason::MaxIterations);
        assert_eq!(traj.len(), 101);
        assert_eq!(traj.schedule_used.len(), 100);
    }

    #[test]
    fn run_from_fixed_point_stops_immediately() {
        let op = averaging();
        let traj = run(&op, &[1.0], &Schedule::constant(0.3).unwrap(), &opts(50, 1e-10), None)
            .unwrap();
        assert_eq!(traj.len(), 1);
        assert_eq!(traj.residuals, vec![0.0]);
        assert_eq!(traj.stop_reason, StopReason::ToleranceMet);

        let id = OperatorSpec::identity(
            NormSpace::new(2, 1.0).unwrap(),
            ConvexBody::new_ball(vec![0.0, 0.0], 1.0).unwrap(),
        )
        .unwrap();
        let traj = run(&id, &[0.1, -0.2], &Schedule::constant(0.5).unwrap(), &opts(10, 0.0), None)
            .unwrap();
        assert!(traj.iterates.iter().all(|x| x == &vec![0.1, -0.2]));
        assert!(traj.residuals.iter().all(|r| *r == 0.0));
    }

    #[test]
    fn run_rejects_bad_input() {
        let op = averaging();
        let s = Schedule::constant(0.5).unwrap();
        assert!(matches!(run(&op, &[1.5], &s, &opts(5, 0.0), None), Err(Error::Domain(_))));
        let bad = Schedule {
            kind: ScheduleKind::Constant { t: 1.0 },
            a: 0.5,
            b: 1.0,
            enforce_bounds: true,
        };
        assert!(matches!(run(&op, &[0.0], &bad, &opts(5, 0.0), None), Err(Error::Config(_))));
    }

    #[test]
    fn start_edge_is_recorded() {
        let op = averaging();
        let rel = ConeRelation::coordinatewise(1).unwrap();
        let s = Schedule::constant(0.5).unwrap();
        let t = run(&op, &[0.0], &s, &opts(3, 0.0), Some(&rel)).unwrap();
        assert_eq!(t.start_edge, Some(StartEdge::Forward));
        let t = run(&op, &[1.0], &s, &opts(3, 0.0), Some(&rel)).unwrap();
        assert_eq!(t.start_edge, Some(StartEdge::Both));
    }

    #[test]
    fn verify_detects_tampering() {
        let op = averaging();
        let s = Schedule::constant(0.5).unwrap();
        let traj = run(&op, &[0.0], &s, &opts(20, 0.0), None).unwrap();
        let r = verify_trajectory(&traj, &op).unwrap();
        assert_eq!(r.failures, 0);
        assert!(r.trials > 40);

        let mut bad = traj.clone();
        bad.iterates[5][0] += 1e-6;
        assert!(verify_trajectory(&bad, &op).unwrap().failures >= 1);

        let mut empty = traj;
        empty.residuals.clear();
        empty.iterates.clear();
        empty.recorded.clear();
        empty.schedule_used.clear();
        assert!(matches!(verify_trajectory(&empty, &op), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn decimated_runs_replay_exactly() {
        let op = averaging();
        let s = Schedule::new(
            ScheduleKind::Explicit {
                steps: vec![0.2, 0.7, 0.45],
            },
            0.2,
            0.7,
            true,
        )
        .unwrap();
        let full = run(&op, &[0.1], &s, &opts(30, 0.0), None).unwrap();
        let sparse = run(
            &op,
            &[0.1],
            &s,
            &RunOptions {
                max_iter: 30,
                tol: 0.0,
                record_stride: 7,
            },
            None,
        )
        .unwrap();
        assert_eq!(sparse.recorded, vec![1, 8, 15, 22, 29, 31]);
        assert_eq!(sparse.residuals, full.residuals);
        assert_eq!(verify_trajectory(&sparse, &op).unwrap().failures, 0);
        assert_eq!(sparse.densify(&op).unwrap().iterates, full.iterates);

        let mut bad = sparse.clone();
        bad.iterates[2][0] -= 1e-6;
        assert!(verify_trajectory(&bad, &op).unwrap().failures > 0);
    }

    #[test]
    fn runs_are_deterministic() {
        let op = averaging();
        let s = Schedule::constant(0.35).unwrap();
        let a = run(&op, &[0.2], &s, &opts(500, 1e-10), None).unwrap();
        let b = run(&op, &[0.2], &s, &opts(500, 1e-10), None).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.stop_reason, StopReason::ToleranceMet);
    }
}
