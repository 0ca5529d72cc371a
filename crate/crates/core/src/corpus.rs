//! Seeded random library instances: an operator on `[0,1]^d` with a unique
//! interior fixed point `omega`, a cone for which it is monotone, a step
//! schedule inside `[a, b]`, and a start comparable to both `T x_1` and
//! `omega`.
//!
//! Matrix maps are `lambda` times a convex combination of permutation
//! matrices, so every `l_p` norm of `M` is `lambda` and `M^T 1 = lambda 1`;
//! they are monotone for the orthant and for the half-space `sum v >= 0`.
//! Componentwise maps are piecewise linear with slopes below 1 for the
//! orthant, and share one slope for the half-space. In both families the
//! image stays inside the box, so the clamp never acts.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::mann_engine::{Schedule, ScheduleKind};
use crate::normed_space::{ConvexBody, Exponent, NormSpace};
use crate::operators::{OperatorSpec, PiecewiseLinear};
use crate::order_graph::ConeRelation;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    MatrixAffine,
    Componentwise,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConeKind {
    Orthant,
    HalfSpace,
}

/// Which side of `omega` the start lies on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartSide {
    /// `x_1 <= omega`, so `(x_1, T x_1)` is an edge.
    Below,
    /// `omega <= x_1`, so `(T x_1, x_1)` is an edge.
    Above,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub seed: u64,
    pub family: Family,
    pub cone: ConeKind,
    pub side: StartSide,
    pub space: NormSpace,
    pub relation: ConeRelation,
    pub operator: OperatorSpec,
    pub schedule: Schedule,
    pub x1: Vec<f64>,
    pub omega: Vec<f64>,
}

const EXPONENTS: [Exponent; 5] = [
    Exponent::Finite(1.0),
    Exponent::Finite(1.5),
    Exponent::Finite(2.0),
    Exponent::Finite(3.0),
    Exponent::Infinity,
];

/// Instance `seed`. The family, cone and start side cycle with the seed so
/// that any four consecutive seeds cover every combination of family and cone.
pub fn instance(seed: u64, max_dimension: usize) -> Result<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = rng.random_range(1..=max_dimension.max(1));
    let p = EXPONENTS[rng.random_range(0..EXPONENTS.len())];
    let space = NormSpace::new(d, p)?;
    let domain = ConvexBody::unit_box(d)?;
    let family = if seed % 2 == 0 {
        Family::MatrixAffine
    } else {
        Family::Componentwise
    };
    let cone = if (seed / 2) % 2 == 0 {
        ConeKind::Orthant
    } else {
        ConeKind::HalfSpace
    };
    let side = if (seed / 4) % 2 == 0 {
        StartSide::Below
    } else {
        StartSide::Above
    };
    let relation = match cone {
        ConeKind::Orthant => ConeRelation::coordinatewise(d)?,
        ConeKind::HalfSpace => ConeRelation::half_space(vec![1.0; d])?,
    };

    let (operator, omega) = match family {
        Family::MatrixAffine => {
            let lambda = rng.random_range(0.9..0.98);
            let matrix = doubly_stochastic(d, &mut rng)
                .into_iter()
                .map(|row| row.into_iter().map(|m| lambda * m).collect())
                .collect::<Vec<Vec<f64>>>();
            let offset: Vec<f64> = (0..d)
                .map(|_| rng.random_range(0.1..0.9) * (1.0 - lambda))
                .collect();
            let op = OperatorSpec::matrix_affine(space, domain, matrix, offset)?;
            let omega = op
                .known_fixed_points()
                .points
                .into_iter()
                .next()
                .expect("I - M is invertible for lambda < 1");
            (op, omega)
        }
        Family::Componentwise => {
            let shared = rng.random_range(0.85..0.98);
            let mut omega = Vec::with_capacity(d);
            let mut functions = Vec::with_capacity(d);
            for _ in 0..d {
                let w = rng.random_range(0.2..0.8);
                let f = match cone {
                    ConeKind::Orthant => piecewise_through(w, &mut rng)?,
                    ConeKind::HalfSpace => {
                        PiecewiseLinear::affine(shared, w * (1.0 - shared), 0.0, 1.0)?
                    }
                };
                omega.push(w);
                functions.push(f);
            }
            (OperatorSpec::componentwise(space, domain, functions)?, omega)
        }
    };

    let a = rng.random_range(0.1..0.2);
    let b = rng.random_range(0.3..0.5);
    let len = rng.random_range(1..=8);
    let steps = (0..len).map(|_| rng.random_range(a..=b)).collect();
    let schedule = Schedule::new(ScheduleKind::Explicit { steps }, a, b, true)?;

    let s = rng.random_range(0.0..0.9);
    let x1 = match side {
        StartSide::Below => omega.iter().map(|w| s * w).collect(),
        StartSide::Above => omega.iter().map(|w| w + s * (1.0 - w)).collect(),
    };

    Ok(Instance {
        seed,
        family,
        cone,
        side,
        space,
        relation,
        operator,
        schedule,
        x1,
        omega,
    })
}

/// A random convex combination of up to three permutation matrices.
fn doubly_stochastic<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let mut m = vec![vec![0.0; d]; d];
    let k = rng.random_range(1..=3);
    let mut weights: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..1.0)).collect();
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    let mut perm: Vec<usize> = (0..d).collect();
    for w in weights {
        perm.shuffle(rng);
        for (i, &j) in perm.iter().enumerate() {
            m[i][j] += w;
        }
    }
    m
}

/// Piecewise-linear map of `[0, 1]` with slopes in `[0.85, 0.98)` and fixed point `w`.
fn piecewise_through<R: Rng + ?Sized>(w: f64, rng: &mut R) -> Result<PiecewiseLinear> {
    let mut knots: Vec<f64> = (0..3).map(|_| rng.random_range(0.05..0.95)).collect();
    knots.push(w);
    knots.push(0.0);
    knots.push(1.0);
    knots.sort_by(f64::total_cmp);
    knots.dedup();
    let at = knots.iter().position(|k| *k == w).expect("w is a knot");
    let mut ys = vec![0.0; knots.len()];
    ys[at] = w;
    for k in (0..at).rev() {
        ys[k] = ys[k + 1] - rng.random_range(0.85..0.98) * (knots[k + 1] - knots[k]);
    }
    for k in at + 1..knots.len() {
        ys[k] = ys[k - 1] + rng.random_range(0.85..0.98) * (knots[k] - knots[k - 1]);
    }
    PiecewiseLinear::new(knots, ys)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mann_engine::StartEdge;
    use crate::order_graph::EdgeRelation;
    use crate::vector;

    #[test]
    fn instances_are_consistent() {
        for seed in 0..64 {
            let inst = instance(seed, 8).unwrap();
            let op = &inst.operator;
            let tw = op.evaluate(&inst.omega).unwrap();
            assert!(vector::max_abs_diff(&tw, &inst.omega) < 1e-12, "seed {seed}");
            assert!(inst.omega.iter().all(|w| *w > 0.0 && *w < 1.0));
            let tx = op.evaluate(&inst.x1).unwrap();
            let edge = StartEdge::classify(&inst.relation, &inst.x1, &tx).unwrap();
            match inst.side {
                StartSide::Below => {
                    assert!(edge.forward(), "seed {seed}");
                    assert!(inst.relation.edge(&inst.x1, &inst.omega).unwrap());
                }
                StartSide::Above => {
                    assert!(edge.backward(), "seed {seed}");
                    assert!(inst.relation.edge(&inst.omega, &inst.x1).unwrap());
                }
            }
            assert!(inst.schedule.within_bounds());
        }
    }

    #[test]
    fn seeds_cover_every_combination() {
        let kinds: std::collections::BTreeSet<String> = (0..8)
            .map(|s| {
                let i = instance(s, 4).unwrap();
                format!("{:?}{:?}{:?}", i.family, i.cone, i.side)
            })
            .collect();
        assert_eq!(kinds.len(), 8);
    }

    #[test]
    fn deterministic() {
        assert_eq!(instance(17, 8).unwrap(), instance(17, 8).unwrap());
    }
}
