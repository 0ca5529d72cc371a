//! Auditors that check, along a recorded trajectory, the properties a
//! monotone nonexpansive Mann run must have: edge propagation, Fejér
//! monotonicity toward a comparable fixed point, the Goebel-Kirk
//! inequality, monotone residuals, the pre-limit rate inequality, and
//! convergence to a fixed point comparable to the start.
//!
//! Auditors that return an [`AuditReport`] use the tri-state
//! [`AuditStatus`]: an unmet hypothesis is reported as
//! `HypothesisNotMet`, never as a pass or a failure. Sparse trajectories are
//! densified by replay before auditing.

use std::borrow::Cow;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::mann_engine::{Schedule, StopReason, Trajectory};
use crate::normed_space::{NormSpace, MEMBERSHIP_TOL};
use crate::operators::OperatorSpec;
use crate::order_graph::{AuditReport, AuditStatus, ConeRelation, EdgeRelation};

/// Slack allowed on the inequalities.
pub const INEQUALITY_TOL: f64 = 1e-9;
/// Slack allowed on monotone sequences of distances and residuals.
pub const MONOTONE_TOL: f64 = 1e-12;
/// `T(omega) = omega` is accepted within this distance.
pub const OMEGA_FIXED_TOL: f64 = 1e-10;
/// Fixed-point tolerance applied to converged runs.
pub const ACCEPT_FIXED_TOL: f64 = 1e-8;

fn dense<'a>(traj: &'a Trajectory, op: &OperatorSpec) -> Result<Cow<'a, Trajectory>> {
    traj.check_shape()?;
    check_dim(op.dimension(), traj.dimension)?;
    if traj.is_dense() {
        Ok(Cow::Borrowed(traj))
    } else {
        Ok(Cow::Owned(traj.densify(op)?))
    }
}

/// Checks `(x_n, x_{n+1})` and `(x_{n+1}, T x_n)` are edges for every step
/// when `(x_1, T x_1)` is an edge, and the mirrored pairs when `(T x_1, x_1)` is.
pub fn audit_edge_propagation(
    traj: &Trajectory,
    op: &OperatorSpec,
    rel: &ConeRelation,
) -> Result<AuditReport> {
    const NAME: &str = "edge_propagation";
    let traj = dense(traj, op)?;
    check_dim(rel.dimension(), traj.dimension)?;
    let x1 = &traj.iterates[0];
    let tx1 = op.apply(x1);
    let forward = rel.edge(x1, &tx1)?;
    let backward = rel.edge(&tx1, x1)?;
    if !forward && !backward {
        return Ok(AuditReport::hypothesis_not_met(
            NAME,
            "(x_1, T x_1) is comparable in neither orientation",
        ));
    }
    let mut report = AuditReport::new(NAME);
    for (k, pair) in traj.iterates.windows(2).enumerate() {
        let (x, next) = (&pair[0], &pair[1]);
        let tx = op.apply(x);
        let n = (k + 1) as f64;
        let witness = || vec![vec![n], x.clone(), next.clone(), tx.clone()];
        if forward {
            report.record(rel.edge(x, next)?, witness);
            report.record(rel.edge(next, &tx)?, witness);
        }
        if backward {
            report.record(rel.edge(next, x)?, witness);
            report.record(rel.edge(&tx, next)?, witness);
        }
    }
    Ok(report.with_note(match (forward, backward) {
        (true, true) => "both orientations",
        (true, false) => "case (x_1, T x_1) in E",
        _ => "case (T x_1, x_1) in E",
    }))
}

/// Checks that `|x_n - omega|` is nonincreasing and that every iterate stays
/// comparable to `omega` in the orientation of the start.
///
/// The metrics carry `initial_distance` and `limit_estimate` (the distance
/// at the last iterate).
pub fn audit_fejer(
    traj: &Trajectory,
    omega: &[f64],
    op: &OperatorSpec,
    rel: &ConeRelation,
    space: &NormSpace,
) -> Result<AuditReport> {
    const NAME: &str = "fejer";
    let traj = dense(traj, op)?;
    check_dim(traj.dimension, omega.len())?;
    check_dim(space.dimension(), omega.len())?;
    if !op.contains(omega)? {
        return Ok(AuditReport::hypothesis_not_met(NAME, "omega is outside the domain"));
    }
    if space.dist_of(&op.apply(omega), omega) > OMEGA_FIXED_TOL {
        return Ok(AuditReport::hypothesis_not_met(NAME, "omega is not a fixed point"));
    }
    let x1 = &traj.iterates[0];
    let below = rel.edge(x1, omega)?;
    let above = rel.edge(omega, x1)?;
    if !below && !above {
        return Ok(AuditReport::hypothesis_not_met(
            NAME,
            "x_1 is not comparable to omega",
        ));
    }
    let mut report = AuditReport::new(NAME);
    let dists: Vec<f64> = traj.iterates.iter().map(|x| space.dist_of(x, omega)).collect();
    for (k, x) in traj.iterates.iter().enumerate() {
        let n = (k + 1) as f64;
        if below {
            report.record(rel.edge(x, omega)?, || vec![vec![n], x.clone()]);
        }
        if above {
            report.record(rel.edge(omega, x)?, || vec![vec![n], x.clone()]);
        }
        if k + 1 < dists.len() {
            report.record(dists[k + 1] <= dists[k] + MONOTONE_TOL, || {
                vec![vec![n], vec![dists[k], dists[k + 1]]]
            });
        }
    }
    report.metrics.insert("initial_distance".into(), dists[0]);
    report
        .metrics
        .insert("limit_estimate".into(), *dists.last().expect("nonempty"));
    Ok(report)
}

/// One evaluation of the Goebel-Kirk inequality
/// `(1 + sum t_s) r_i <= |T x_{i+n} - x_i| + prod (1 - t_s)^-1 (r_i - r_{i+n})`
/// with `s` ranging over `i..i+n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GKRecord {
    pub i: usize,
    pub n: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
}

/// Evaluates the Goebel-Kirk inequality at each `(i, n)`; both indices are 1-based.
pub fn gk_inequality_check(
    traj: &Trajectory,
    op: &OperatorSpec,
    pairs: &[(usize, usize)],
) -> Result<Vec<GKRecord>> {
    let traj = dense(traj, op)?;
    match traj.start_edge {
        Some(e) if e.comparable() => {}
        Some(_) => {
            return Err(Error::HypothesisNotMet(
                "(x_1, T x_1) is not an edge of the symmetrized graph".into(),
            ))
        }
        None => {
            return Err(Error::HypothesisNotMet(
                "start comparability was not recorded".into(),
            ))
        }
    }
    let len = traj.len();
    let space = op.space();
    let mut out = Vec::with_capacity(pairs.len());
    for &(i, n) in pairs {
        if i == 0 || n == 0 || i + n > len {
            return Err(Error::InvalidInput(format!(
                "pair (i = {i}, n = {n}) does not fit a trajectory of {len} iterates"
            )));
        }
        let mut sum = 0.0;
        let mut prod = 1.0;
        for s in i..i + n {
            let t = traj.schedule_used[s - 1];
            if t >= 1.0 {
                return Err(Error::UndefinedProduct { step: s });
            }
            sum += t;
            prod /= 1.0 - t;
        }
        let xi = &traj.iterates[i - 1];
        let txin = op.apply(&traj.iterates[i + n - 1]);
        let ri = traj.residuals[i - 1];
        let rin = traj.residuals[i + n - 1];
        let lhs = (1.0 + sum) * ri;
        let drop = ri - rin;
        let amplified = if drop == 0.0 { 0.0 } else { prod * drop };
        let rhs = space.dist_of(&txin, xi) + amplified;
        out.push(GKRecord {
            i,
            n,
            lhs,
            rhs,
            slack: rhs - lhs,
        });
    }
    Ok(out)
}

/// Draws `count` pairs `(i, n)` with `i, n >= 1` and `i + n <= len`.
pub fn sample_gk_pairs<R: Rng + ?Sized>(
    len: usize,
    count: usize,
    rng: &mut R,
) -> Result<Vec<(usize, usize)>> {
    if len < 2 {
        return Err(Error::InvalidInput(
            "need at least two iterates to sample pairs".into(),
        ));
    }
    Ok((0..count)
        .map(|_| {
            let i = rng.random_range(1..len);
            let n = rng.random_range(1..=len - i);
            (i, n)
        })
        .collect())
}

/// [`gk_inequality_check`] as a tri-state report; the records are returned
/// alongside. Unmet hypotheses and undefined products map to
/// `HypothesisNotMet`.
pub fn gk_audit(
    traj: &Trajectory,
    op: &OperatorSpec,
    pairs: &[(usize, usize)],
) -> Result<(AuditReport, Vec<GKRecord>)> {
    const NAME: &str = "goebel_kirk";
    match gk_inequality_check(traj, op, pairs) {
        Ok(records) => {
            let mut report = AuditReport::new(NAME);
            for rec in &records {
                report.record(rec.slack >= -INEQUALITY_TOL, || {
                    vec![vec![rec.i as f64, rec.n as f64, rec.lhs, rec.rhs]]
                });
            }
            if let Some(min) = records.iter().map(|r| r.slack).reduce(f64::min) {
                report.metrics.insert("min_slack".into(), min);
            }
            Ok((report, records))
        }
        Err(e @ (Error::HypothesisNotMet(_) | Error::UndefinedProduct { .. })) => {
            Ok((AuditReport::hypothesis_not_met(NAME, e.to_string()), Vec::new()))
        }
        Err(e) => Err(e),
    }
}

/// Checks `r_{n+1} <= r_n + 1e-12` for every `n`.
///
/// When the start is not comparable or some step lies outside `[0, 1]`, the
/// checks are still counted but the status is `HypothesisNotMet`.
pub fn residual_monotone_check(traj: &Trajectory) -> Result<AuditReport> {
    if traj.is_empty() {
        return Err(Error::InvalidInput("trajectory has no iterates".into()));
    }
    let mut report = AuditReport::new("residual_monotone");
    for (k, w) in traj.residuals.windows(2).enumerate() {
        report.record(w[1] <= w[0] + MONOTONE_TOL, || {
            vec![vec![(k + 1) as f64, w[0], w[1]]]
        });
    }
    let comparable = traj.start_edge.is_some_and(|e| e.comparable());
    let steps_ok = traj.schedule_used.iter().all(|t| (0.0..=1.0).contains(t));
    if !comparable || !steps_ok {
        report.status = AuditStatus::HypothesisNotMet;
        report.note = Some(if comparable {
            "step sizes outside [0, 1]".into()
        } else {
            "start comparability not met or not recorded".into()
        });
    }
    Ok(report)
}

/// `diam / (1 + n a)`.
pub fn rate_bound(n: usize, a: f64, diam: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidInput("n must be at least 1".into()));
    }
    if !(a > 0.0) {
        return Err(Error::InvalidInput(format!("a must be positive, got {a}")));
    }
    if !(diam >= 0.0) {
        return Err(Error::InvalidInput(format!("diameter must be nonnegative, got {diam}")));
    }
    Ok(diam / (1.0 + n as f64 * a))
}

/// Final residual against the limit bound for one span.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateCheck {
    pub n: usize,
    pub a: f64,
    pub diam: f64,
    pub bound: f64,
    pub observed_limit_estimate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateAudit {
    pub report: AuditReport,
    pub checks: Vec<RateCheck>,
}

/// Checks `(1 + n a) r_i <= diam + (1 - b)^-n (r_i - r_{i+n})` at
/// `samples_per_span` random `i` for every span `n`.
///
/// Requires a comparable start and a schedule inside `[a, b]` with
/// `0 < a` and `b < 1`; otherwise the report is `HypothesisNotMet`.
pub fn rate_audit<R: Rng + ?Sized>(
    traj: &Trajectory,
    schedule: &Schedule,
    diam: f64,
    spans: &[usize],
    samples_per_span: usize,
    rng: &mut R,
) -> Result<RateAudit> {
    const NAME: &str = "rate";
    traj.check_shape()?;
    let len = traj.len();
    if let Some(&n) = spans.iter().find(|&&n| n == 0 || n >= len) {
        return Err(Error::InvalidInput(format!(
            "span {n} does not fit a trajectory of {len} iterates"
        )));
    }
    let not_met = |why: &str| RateAudit {
        report: AuditReport::hypothesis_not_met(NAME, why),
        checks: Vec::new(),
    };
    if !traj.start_edge.is_some_and(|e| e.comparable()) {
        return Ok(not_met("start comparability not met or not recorded"));
    }
    if !schedule.enforce_bounds || !schedule.within_bounds() {
        return Ok(not_met("schedule is not confined to [a, b] with 0 < a <= b < 1"));
    }
    if let Some(t) = traj
        .schedule_used
        .iter()
        .find(|t| **t < schedule.a || **t > schedule.b)
    {
        return Ok(not_met(&format!("recorded step {t} outside [a, b]")));
    }
    let (a, b) = (schedule.a, schedule.b);
    let r = &traj.residuals;
    let mut report = AuditReport::new(NAME);
    let mut checks = Vec::with_capacity(spans.len());
    let final_r = *r.last().expect("nonempty");
    for &n in spans {
        let weight = (1.0 - b).powi(-(n as i32));
        for _ in 0..samples_per_span {
            let i = rng.random_range(1..=len - n);
            let lhs = (1.0 + n as f64 * a) * r[i - 1];
            let rhs = diam + weight * (r[i - 1] - r[i + n - 1]);
            report.record(lhs <= rhs + INEQUALITY_TOL, || {
                vec![vec![i as f64, n as f64, lhs, rhs]]
            });
        }
        checks.push(RateCheck {
            n,
            a,
            diam,
            bound: rate_bound(n, a, diam)?,
            observed_limit_estimate: final_r,
        });
    }
    Ok(RateAudit { report, checks })
}

/// `|T x - x| <= tol`.
pub fn verify_fixed_point(op: &OperatorSpec, x: &[f64], tol: f64) -> Result<bool> {
    let tx = op.evaluate(x)?;
    Ok(op.space().dist_of(&tx, x) <= tol)
}

/// Checks that a converged run ends at a fixed point comparable to `x_1`
/// in the orientation of the start.
pub fn convergence_audit(
    traj: &Trajectory,
    op: &OperatorSpec,
    rel: &ConeRelation,
    tol: f64,
) -> Result<AuditReport> {
    const NAME: &str = "convergence";
    traj.check_shape()?;
    check_dim(rel.dimension(), traj.dimension)?;
    if traj.stop_reason != StopReason::ToleranceMet {
        return Ok(AuditReport::hypothesis_not_met(
            NAME,
            format!("run stopped with {:?}", traj.stop_reason),
        ));
    }
    let x1 = traj.first().expect("nonempty");
    let last = traj.last().expect("nonempty");
    let mut report = AuditReport::new(NAME);
    let inside = op.domain().contains(op.space(), last, MEMBERSHIP_TOL)?;
    report.record(inside, || vec![last.to_vec()]);
    if !inside {
        return Ok(report);
    }
    let fixed = verify_fixed_point(op, last, tol)?;
    report.record(fixed, || vec![last.to_vec()]);
    let tx1 = op.apply(x1);
    if rel.edge(x1, &tx1)? {
        report.record(rel.edge(x1, last)?, || vec![x1.to_vec(), last.to_vec()]);
    }
    if rel.edge(&tx1, x1)? {
        report.record(rel.edge(last, x1)?, || vec![last.to_vec(), x1.to_vec()]);
    }
    report
        .metrics
        .insert("final_residual".into(), op.space().dist_of(&op.apply(last), last));
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mann_engine::{run, RunOptions, ScheduleKind};
    use crate::normed_space::ConvexBody;
    use crate::operators::PiecewiseLinear;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn averaging() -> OperatorSpec {
        OperatorSpec::componentwise(
            NormSpace::euclidean(1).unwrap(),
            ConvexBody::unit_box(1).unwrap(),
            vec![PiecewiseLinear::new(vec![0.0, 1.0], vec![0.5, 1.0]).unwrap()],
        )
        .unwrap()
    }

    fn coord(d: usize) -> ConeRelation {
        ConeRelation::coordinatewise(d).unwrap()
    }

    fn oracle_run(steps: usize, tol: f64) -> Trajectory {
        run(
            &averaging(),
            &[0.0],
            &Schedule::constant(0.5).unwrap(),
            &RunOptions {
                max_iter: steps,
                tol,
                record_stride: 1,
            },
            Some(&coord(1)),
        )
        .unwrap()
    }

    #[test]
    fn gk_hand_example() {
        let traj = oracle_run(10, 0.0);
        let rec = gk_inequality_check(&traj, &averaging(), &[(1, 1)]).unwrap()[0];
        assert!((rec.lhs - 0.75).abs() < 1e-12);
        assert!((rec.rhs - 0.875).abs() < 1e-12);
        assert!((rec.slack - 0.125).abs() < 1e-12);
    }

    #[test]
    fn gk_errors() {
        let op = averaging();
        let traj = oracle_run(10, 0.0);
        assert!(matches!(
            gk_inequality_check(&traj, &op, &[(5, 7)]),
            Err(Error::InvalidInput(_))
        ));
        let unrecorded = Trajectory {
            start_edge: None,
            ..traj.clone()
        };
        assert!(matches!(
            gk_inequality_check(&unrecorded, &op, &[(1, 1)]),
            Err(Error::HypothesisNotMet(_))
        ));
        let full_steps = run(
            &op,
            &[0.0],
            &Schedule::new(ScheduleKind::Constant { t: 1.0 }, 1.0, 1.0, false).unwrap(),
            &RunOptions {
                max_iter: 5,
                tol: 0.0,
                record_stride: 1,
            },
            Some(&coord(1)),
        )
        .unwrap();
        assert_eq!(
            gk_inequality_check(&full_steps, &op, &[(2, 2)]),
            Err(Error::UndefinedProduct { step: 2 })
        );
        let (report, _) = gk_audit(&full_steps, &op, &[(1, 1)]).unwrap();
        assert_eq!(report.status, AuditStatus::HypothesisNotMet);
    }

    #[test]
    fn edge_propagation_cases() {
        let op = averaging();
        let traj = oracle_run(200, 0.0);
        let r = audit_edge_propagation(&traj, &op, &coord(1)).unwrap();
        assert_eq!((r.status, r.failures, r.trials), (AuditStatus::Pass, 0, 400));

        // started above the fixed set: mirrored case
        let s = NormSpace::euclidean(2).unwrap();
        let c = ConvexBody::unit_box(2).unwrap();
        let m = OperatorSpec::matrix_affine(
            s,
            c.clone(),
            vec![vec![0.5, 0.0], vec![0.0, 0.5]],
            vec![0.25, 0.25],
        )
        .unwrap();
        let traj = run(
            &m,
            &[1.0, 0.9],
            &Schedule::constant(0.4).unwrap(),
            &RunOptions {
                max_iter: 50,
                tol: 0.0,
                record_stride: 1,
            },
            Some(&coord(2)),
        )
        .unwrap();
        let r = audit_edge_propagation(&traj, &m, &coord(2)).unwrap();
        assert_eq!((r.status, r.failures), (AuditStatus::Pass, 0));

        // incomparable start
        let traj = run(
            &m,
            &[1.0, 0.0],
            &Schedule::constant(0.4).unwrap(),
            &RunOptions {
                max_iter: 5,
                tol: 0.0,
                record_stride: 1,
            },
            Some(&coord(2)),
        )
        .unwrap();
        let r = audit_edge_propagation(&traj, &m, &coord(2)).unwrap();
        assert_eq!(r.status, AuditStatus::HypothesisNotMet);

        let id = OperatorSpec::identity(s, c).unwrap();
        let traj = run(
            &id,
            &[0.2, 0.7],
            &Schedule::constant(0.5).unwrap(),
            &RunOptions {
                max_iter: 10,
                tol: 0.0,
                record_stride: 1,
            },
            Some(&coord(2)),
        )
        .unwrap();
        let r = audit_edge_propagation(&traj, &id, &coord(2)).unwrap();
        assert_eq!((r.status, r.failures), (AuditStatus::Pass, 0));
    }

    #[test]
    fn swap_breaks_edge_propagation() {
        // edge(x, y) iff y_1 >= x_1; the swap mixes the coordinates
        let s = NormSpace::euclidean(2).unwrap();
        let c = ConvexBody::unit_box(2).unwrap();
        let rel = ConeRelation::half_space(vec![1.0, 0.0]).unwrap();
        let swap = OperatorSpec::test_only_swap(s, c, vec![0.8, 0.2], 0.5).unwrap();
        let traj = run(
            &swap,
            &[0.72, 0.12],
            &Schedule::constant(0.5).unwrap(),
            &RunOptions {
                max_iter: 200,
                tol: 0.0,
                record_stride: 1,
            },
            Some(&rel),
        )
        .unwrap();
        assert_eq!(traj.start_edge, Some(crate::StartEdge::Backward));
        let r = audit_edge_propagation(&traj, &swap, &rel).unwrap();
        assert_eq!(r.status, AuditStatus::Fail);
        assert!(r.failures > 0);
    }

    #[test]
    fn fejer_cases() {
        let op = averaging();
        let rel = coord(1);
        let s = *op.space();
        let traj = oracle_run(60, 0.0);
        let r = audit_fejer(&traj, &[1.0], &op, &rel, &s).unwrap();
        assert_eq!((r.status, r.failures), (AuditStatus::Pass, 0));
        assert_eq!(r.metrics["initial_distance"], 1.0);
        for (k, x) in traj.iterates.iter().enumerate() {
            let closed = 0.75f64.powi(k as i32);
            assert!(((1.0 - x[0]) - closed).abs() < 1e-12);
        }

        let r = audit_fejer(&traj, &[0.5], &op, &rel, &s).unwrap();
        assert_eq!(r.status, AuditStatus::HypothesisNotMet);
    }

    #[test]
    fn residuals_and_convergence() {
        let op = averaging();
        let traj = oracle_run(100_000, 1e-10);
        assert_eq!(traj.stop_reason, StopReason::ToleranceMet);
        assert_eq!(residual_monotone_check(&traj).unwrap().status, AuditStatus::Pass);
        let r = convergence_audit(&traj, &op, &coord(1), ACCEPT_FIXED_TOL).unwrap();
        assert_eq!((r.status, r.failures), (AuditStatus::Pass, 0));
        assert!((traj.last().unwrap()[0] - 1.0).abs() < 1e-8);
        assert!(verify_fixed_point(&op, traj.last().unwrap(), 1e-8).unwrap());
        assert!(!verify_fixed_point(&op, &[0.0], 1e-10).unwrap());
        assert!(verify_fixed_point(&op, &[1.0], 1e-10).unwrap());
        assert!(verify_fixed_point(&op, &[2.0], 1e-10).is_err());

        let unfinished = oracle_run(5, 1e-10);
        let r = convergence_audit(&unfinished, &op, &coord(1), ACCEPT_FIXED_TOL).unwrap();
        assert_eq!(r.status, AuditStatus::HypothesisNotMet);
    }

    #[test]
    fn rate_bound_examples() {
        assert_eq!(rate_bound(2, 0.5, 2.0).unwrap(), 1.0);
        assert!((rate_bound(10, 0.25, 2f64.sqrt()).unwrap() - 0.40406).abs() < 1e-5);
        assert!(rate_bound(1_000_000, 0.1, 3.0).unwrap() < 3.0e-5 / 0.1 * 1.001);
        assert!(rate_bound(1, 0.0, 1.0).is_err());
        assert!(rate_bound(0, 0.5, 1.0).is_err());
    }

    #[test]
    fn rate_audit_oracle_and_hypotheses() {
        let traj = oracle_run(100, 0.0);
        let sched = Schedule::constant(0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let audit = rate_audit(&traj, &sched, 1.0, &[1, 5, 10, 50], 20, &mut rng).unwrap();
        assert_eq!((audit.report.status, audit.report.failures), (AuditStatus::Pass, 0));
        assert_eq!(audit.report.trials, 80);
        assert_eq!(audit.checks.len(), 4);

        // (i, n) = (1, 2): r_1 = 0.5, r_3 = 0.28125
        let (r1, r3) = (traj.residuals[0], traj.residuals[2]);
        assert_eq!((r1, r3), (0.5, 0.28125));
        let lhs = (1.0 + 2.0 * 0.5) * r1;
        let rhs = 1.0 + 4.0 * (r1 - r3);
        assert!(lhs <= rhs);

        assert!(rate_audit(&traj, &sched, 1.0, &[101], 1, &mut rng).is_err());
        let loose = Schedule::new(ScheduleKind::Constant { t: 0.5 }, 0.5, 0.5, false).unwrap();
        let audit = rate_audit(&traj, &loose, 1.0, &[1], 1, &mut rng).unwrap();
        assert_eq!(audit.report.status, AuditStatus::HypothesisNotMet);
    }

    #[test]
    fn sparse_trajectories_are_audited_after_replay() {
        let op = averaging();
        let traj = run(
            &op,
            &[0.0],
            &Schedule::constant(0.5).unwrap(),
            &RunOptions {
                max_iter: 40,
                tol: 0.0,
                record_stride: 9,
            },
            Some(&coord(1)),
        )
        .unwrap();
        let r = audit_edge_propagation(&traj, &op, &coord(1)).unwrap();
        assert_eq!((r.failures, r.trials), (0, 80));
        let recs = gk_inequality_check(&traj, &op, &[(3, 5), (1, 40)]).unwrap();
        assert!(recs.iter().all(|r| r.slack >= -INEQUALITY_TOL));
    }
}
