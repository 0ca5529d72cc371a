//! Building an experiment from its configuration, running it, and auditing
//! the resulting trajectory.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use mann_core::diagnostics::{
    audit_edge_propagation, audit_fejer, convergence_audit, gk_audit, rate_audit,
    residual_monotone_check, sample_gk_pairs,
};
use mann_core::operators::{audit_lipschitz_on_edges, audit_monotone};
use mann_core::{
    run, sample_comparable_start, verify_trajectory, AuditReport, AuditStatus, ConeRelation,
    ConvexBody, EdgeRelation, NormSpace, OperatorSpec, PiecewiseLinear, RunOptions, Schedule,
    ScheduleKind, Trajectory,
};

use crate::config::{
    AuditName, AuditParams, BodyConfig, ExperimentConfig, FunctionConfig, OperatorConfig,
    RelationConfig, ScheduleConfig, StartConfig,
};
use crate::error::CliError;

/// Independent random streams derived from the config seed.
mod stream {
    pub const START: u64 = 0;
    pub const EDGES: u64 = 1;
    pub const GK: u64 = 2;
    pub const RATE: u64 = 3;
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Everything needed to run and audit one configuration.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub seed: u64,
    pub space: NormSpace,
    pub relation: ConeRelation,
    pub operator: OperatorSpec,
    pub schedule: Schedule,
    pub x1: Vec<f64>,
    pub options: RunOptions,
    pub audits: Vec<AuditName>,
    pub params: AuditParams,
}

impl Experiment {
    pub fn build(cfg: &ExperimentConfig) -> Result<Self, CliError> {
        let d = cfg.space.dimension;
        let space = NormSpace::new(d, cfg.space.p)?;
        let body = match &cfg.body {
            BodyConfig::Box { lo, hi } => {
                ConvexBody::new_box(lo.resolve(d, "body.lo")?, hi.resolve(d, "body.hi")?)?
            }
            BodyConfig::Ball { center, radius } => {
                ConvexBody::new_ball(center.resolve(d, "body.center")?, *radius)?
            }
        };
        let relation = match &cfg.relation {
            RelationConfig::Orthant { slack_tol } => {
                let rows = (0..d)
                    .map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
                    .collect();
                ConeRelation::new(d, rows, *slack_tol)?
            }
            RelationConfig::HalfSpace { normal, slack_tol } => {
                ConeRelation::new(d, vec![normal.resolve(d, "relation.normal")?], *slack_tol)?
            }
            RelationConfig::Generator {
                generator,
                slack_tol,
            } => ConeRelation::new(d, generator.clone(), *slack_tol)?,
        };
        let operator = build_operator(&cfg.operator, space, &body)?;
        let schedule = build_schedule(&cfg.schedule)?;
        let x1 = match &cfg.start {
            StartConfig::Explicit { x } => x.resolve(d, "start.x")?,
            StartConfig::RandomComparable { attempts } => {
                let mut rng = rng_for(cfg.seed, stream::START);
                sample_comparable_start(&operator, &relation, *attempts, &mut rng)?
            }
        };
        if !operator.contains(&x1)? {
            return Err(CliError::Config(format!("start {x1:?} lies outside the body")));
        }
        Ok(Self {
            seed: cfg.seed,
            space,
            relation,
            operator,
            schedule,
            x1,
            options: RunOptions {
                max_iter: cfg.run.max_iter,
                tol: cfg.run.tol,
                record_stride: cfg.run.record_stride,
            },
            audits: cfg.audits.clone(),
            params: cfg.audit.clone(),
        })
    }

    pub fn run(&self) -> Result<Trajectory, CliError> {
        Ok(run(
            &self.operator,
            &self.x1,
            &self.schedule,
            &self.options,
            Some(&self.relation),
        )?)
    }

    /// Runs `verify` and every configured auditor, in parallel.
    pub fn audit(&self, traj: &Trajectory) -> Result<AuditSummary, CliError> {
        let mut names = vec![AuditName::Verify];
        names.extend(self.audits.iter().copied().filter(|n| *n != AuditName::Verify));
        names.dedup();
        let entries = names
            .par_iter()
            .map(|&name| self.audit_one(name, traj).map(|e| (name.as_str().to_string(), e)))
            .collect::<Result<Vec<_>, CliError>>()?;
        Ok(AuditSummary {
            auditors: entries.into_iter().collect(),
        })
    }

    fn audit_one(&self, name: AuditName, traj: &Trajectory) -> Result<AuditEntry, CliError> {
        let op = &self.operator;
        let rel = &self.relation;
        let p = &self.params;
        Ok(match name {
            AuditName::Verify => AuditEntry::from_report(verify_trajectory(traj, op)?),
            AuditName::Monotone => {
                let mut rng = rng_for(self.seed, stream::EDGES);
                AuditEntry::from_report(audit_monotone(op, rel, p.edges, &mut rng)?)
            }
            AuditName::Lipschitz => {
                let mut rng = rng_for(self.seed, stream::EDGES);
                let worst = audit_lipschitz_on_edges(op, rel, &self.space, p.edges, &mut rng)?;
                let mut report = AuditReport::new("lipschitz");
                report.record(worst <= 1.0 + mann_core::diagnostics::INEQUALITY_TOL, || {
                    vec![vec![worst]]
                });
                report.metrics.insert("max_ratio".into(), worst);
                AuditEntry::from_report(report)
            }
            AuditName::EdgePropagation => {
                AuditEntry::from_report(audit_edge_propagation(traj, op, rel)?)
            }
            AuditName::ResidualMonotone => AuditEntry::from_report(residual_monotone_check(traj)?),
            AuditName::Fejer => match self.comparable_fixed_point(traj) {
                Some(omega) => {
                    let mut entry =
                        AuditEntry::from_report(audit_fejer(traj, &omega, op, rel, &self.space)?);
                    entry.records = json!({ "omega": omega });
                    entry
                }
                None => AuditEntry::from_report(AuditReport::hypothesis_not_met(
                    "fejer",
                    "no known fixed point is comparable to x_1",
                )),
            },
            AuditName::GoebelKirk => {
                let horizon = traj.len().min(p.gk_horizon);
                let pairs = if horizon >= 2 {
                    sample_gk_pairs(horizon, p.gk_pairs, &mut rng_for(self.seed, stream::GK))?
                } else {
                    Vec::new()
                };
                let (report, records) = gk_audit(traj, op, &pairs)?;
                let mut entry = AuditEntry::from_report(report);
                entry.records = serde_json::to_value(records).expect("records serialize");
                entry
            }
            AuditName::Rate => {
                let spans: Vec<usize> = p
                    .rate_spans
                    .iter()
                    .copied()
                    .filter(|n| *n >= 1 && *n < traj.len())
                    .collect();
                let diam = op.domain().diameter(&self.space)?;
                let mut rng = rng_for(self.seed, stream::RATE);
                let audit = rate_audit(traj, &self.schedule, diam, &spans, p.rate_samples, &mut rng)?;
                let mut entry = AuditEntry::from_report(audit.report);
                entry.records = serde_json::to_value(audit.checks).expect("records serialize");
                entry
            }
            AuditName::Convergence => {
                AuditEntry::from_report(convergence_audit(traj, op, rel, p.fixed_point_tol)?)
            }
        })
    }

    /// A known fixed point `omega` with `x_1` below or above it.
    fn comparable_fixed_point(&self, traj: &Trajectory) -> Option<Vec<f64>> {
        let x1 = traj.first()?;
        self.operator
            .known_fixed_points()
            .points
            .into_iter()
            .find(|w| self.relation.undirected(x1, w).unwrap_or(false))
    }
}

fn build_operator(
    cfg: &OperatorConfig,
    space: NormSpace,
    body: &ConvexBody,
) -> Result<OperatorSpec, CliError> {
    let d = space.dimension();
    Ok(match cfg {
        OperatorConfig::Identity => OperatorSpec::identity(space, body.clone())?,
        OperatorConfig::MatrixAffine {
            matrix,
            diagonal,
            offset,
        } => {
            let matrix = match (matrix, diagonal) {
                (Some(m), None) => m.clone(),
                (None, Some(c)) => (0..d)
                    .map(|i| (0..d).map(|j| if i == j { *c } else { 0.0 }).collect())
                    .collect(),
                _ => {
                    return Err(CliError::Config(
                        "matrix_affine needs exactly one of `matrix` and `diagonal`".into(),
                    ))
                }
            };
            OperatorSpec::matrix_affine(
                space,
                body.clone(),
                matrix,
                offset.resolve(d, "operator.offset")?,
            )?
        }
        OperatorConfig::Componentwise { functions } => {
            let (lo, hi) = body.as_box().ok_or_else(|| {
                CliError::Config("componentwise operators need a box body".into())
            })?;
            let functions = match functions.len() {
                1 => vec![functions[0].clone(); d],
                n if n == d => functions.clone(),
                n => {
                    return Err(CliError::Config(format!(
                        "operator.functions has {n} entries but the dimension is {d}"
                    )))
                }
            };
            let functions = functions
                .iter()
                .enumerate()
                .map(|(k, f)| match f {
                    FunctionConfig::Points { xs, ys } => PiecewiseLinear::new(xs.clone(), ys.clone()),
                    FunctionConfig::Affine { slope, intercept } => {
                        PiecewiseLinear::affine(*slope, *intercept, lo[k], hi[k])
                    }
                })
                .collect::<Result<Vec<_>, _>>()?;
            OperatorSpec::componentwise(space, body.clone(), functions)?
        }
        OperatorConfig::TestOnlySwap { anchor, rate } => {
            OperatorSpec::test_only_swap(space, body.clone(), anchor.clone(), *rate)?
        }
        OperatorConfig::Compose { first, then } => OperatorSpec::compose(
            build_operator(first, space, body)?,
            build_operator(then, space, body)?,
        )?,
    })
}

fn build_schedule(cfg: &ScheduleConfig) -> Result<Schedule, CliError> {
    let (kind, a, b, enforce) = match cfg {
        ScheduleConfig::Constant {
            t,
            a,
            b,
            enforce_bounds,
        } => (
            ScheduleKind::Constant { t: *t },
            a.unwrap_or(*t),
            b.unwrap_or(*t),
            *enforce_bounds,
        ),
        ScheduleConfig::Explicit {
            steps,
            a,
            b,
            enforce_bounds,
        } => {
            let lo = steps.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = steps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (
                ScheduleKind::Explicit {
                    steps: steps.clone(),
                },
                a.unwrap_or(lo),
                b.unwrap_or(hi),
                *enforce_bounds,
            )
        }
    };
    Ok(Schedule::new(kind, a, b, enforce)?)
}

/// One auditor's entry in the audit JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub status: AuditStatus,
    pub trials: usize,
    pub failures: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub metrics: BTreeMap<String, f64>,
    #[serde(default)]
    pub records: serde_json::Value,
}

impl AuditEntry {
    pub fn from_report(r: AuditReport) -> Self {
        Self {
            status: r.status,
            trials: r.trials,
            failures: r.failures,
            witness: r.witness,
            note: r.note,
            metrics: r.metrics,
            records: serde_json::Value::Array(Vec::new()),
        }
    }
}

/// Contents of an audit JSON file, keyed by auditor name.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AuditSummary {
    pub auditors: BTreeMap<String, AuditEntry>,
}

/// Aggregate outcome by the exit-code rule.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Outcome {
    Pass,
    HypothesisNotMet,
    Fail,
}

impl Outcome {
    pub fn of<'a>(statuses: impl IntoIterator<Item = &'a AuditStatus>) -> Self {
        statuses
            .into_iter()
            .map(|s| match s {
                AuditStatus::Pass => Outcome::Pass,
                AuditStatus::HypothesisNotMet => Outcome::HypothesisNotMet,
                AuditStatus::Fail => Outcome::Fail,
            })
            .max()
            .unwrap_or(Outcome::Pass)
    }

    pub fn of_outcomes(outcomes: impl IntoIterator<Item = Outcome>) -> Self {
        outcomes.into_iter().max().unwrap_or(Outcome::Pass)
    }

    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Pass => 0,
            Outcome::Fail => 2,
            Outcome::HypothesisNotMet => 3,
        }
    }
}

impl AuditSummary {
    pub fn outcome(&self) -> Outcome {
        Outcome::of(self.auditors.values().map(|e| &e.status))
    }
}
