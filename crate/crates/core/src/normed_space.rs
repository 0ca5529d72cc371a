//! Finite-dimensional `l_p` spaces, convex bodies, and the modulus of
//! uniform convexity.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{check_dim, Error, Result};
use crate::vector;

/// Membership tolerance used for domain checks.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

/// The exponent `p` of an `l_p` norm.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Exponent {
    Finite(f64),
    Infinity,
}

impl Exponent {
    pub fn value(self) -> f64 {
        match self {
            Exponent::Finite(p) => p,
            Exponent::Infinity => f64::INFINITY,
        }
    }
}

impl From<f64> for Exponent {
    fn from(p: f64) -> Self {
        if p == f64::INFINITY {
            Exponent::Infinity
        } else {
            Exponent::Finite(p)
        }
    }
}

impl Serialize for Exponent {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Exponent::Finite(p) => s.serialize_f64(*p),
            Exponent::Infinity => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(p) => Ok(Exponent::from(p)),
            Raw::Text(s) if matches!(s.as_str(), "inf" | "infinity" | "Infinity") => {
                Ok(Exponent::Infinity)
            }
            Raw::Text(s) => Err(serde::de::Error::custom(format!("invalid exponent {s:?}"))),
        }
    }
}

/// `R^d` with the `l_p` norm.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormSpace {
    dimension: usize,
    p: Exponent,
}

impl NormSpace {
    pub fn new(dimension: usize, p: impl Into<Exponent>) -> Result<Self> {
        let p = p.into();
        if dimension == 0 {
            return Err(Error::InvalidInput("dimension must be positive".into()));
        }
        if let Exponent::Finite(v) = p {
            if !(v >= 1.0 && v.is_finite()) {
                return Err(Error::InvalidInput(format!("p must lie in [1, inf], got {v}")));
            }
        }
        Ok(Self { dimension, p })
    }

    pub fn euclidean(dimension: usize) -> Result<Self> {
        Self::new(dimension, 2.0)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn p(&self) -> Exponent {
        self.p
    }

    /// `1 < p < inf`.
    pub fn uniformly_convex(&self) -> bool {
        matches!(self.p, Exponent::Finite(p) if p > 1.0)
    }

    /// Always true: in finite dimension weak and norm convergence coincide.
    pub fn weak_opial(&self) -> bool {
        true
    }

    pub fn norm(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dimension, x.len())?;
        Ok(self.norm_of(x))
    }

    pub fn distance(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        check_dim(self.dimension, x.len())?;
        check_dim(self.dimension, y.len())?;
        Ok(self.dist_of(x, y))
    }

    pub(crate) fn dist_of(&self, x: &[f64], y: &[f64]) -> f64 {
        self.norm_of(&vector::sub(x, y))
    }

    pub(crate) fn norm_of(&self, x: &[f64]) -> f64 {
        match self.p {
            Exponent::Infinity => x.iter().fold(0.0, |m, c| m.max(c.abs())),
            Exponent::Finite(p) if p == 1.0 => x.iter().map(|c| c.abs()).sum(),
            Exponent::Finite(p) if p == 2.0 => x.iter().map(|c| c * c).sum::<f64>().sqrt(),
            Exponent::Finite(p) => {
                let m = x.iter().fold(0.0, |m: f64, c| m.max(c.abs()));
                if m == 0.0 {
                    return 0.0;
                }
                let s: f64 = x.iter().map(|c| (c.abs() / m).powf(p)).sum();
                m * s.powf(1.0 / p)
            }
        }
    }

    /// Estimates the modulus of uniform convexity at `epsilon` with the
    /// default seed. See [`NormSpace::modulus_uc_estimate_seeded`].
    pub fn modulus_uc_estimate(&self, epsilon: f64, budget: usize) -> Result<ModulusEstimate> {
        self.modulus_uc_estimate_seeded(epsilon, budget, 0)
    }

    /// Estimates `inf { 1 - |(x+y)/2| : |x| <= 1, |y| <= 1, |x-y| >= epsilon }`.
    ///
    /// Each of the `budget` starts picks a half-difference `h` with
    /// `|h| = epsilon/2` and a midpoint direction `e`, then takes the largest
    /// `s >= 0` with `|s e + h| <= 1` and `|s e - h| <= 1` by bisection, so
    /// every evaluated pair is feasible and the reported value is an upper
    /// bound of the infimum. A (1+1) random search refines `(e, h)`.
    ///
    /// Start `k` always uses the same random stream, so more budget can only
    /// lower the result, and the result is independent of thread count.
    pub fn modulus_uc_estimate_seeded(
        &self,
        epsilon: f64,
        budget: usize,
        seed: u64,
    ) -> Result<ModulusEstimate> {
        if !(epsilon > 0.0 && epsilon <= 2.0) {
            return Err(Error::InvalidInput(format!("epsilon {epsilon} outside (0, 2]")));
        }
        if budget == 0 {
            return Err(Error::InvalidInput("budget must be at least 1".into()));
        }
        let results: Vec<ModulusEstimate> = (0..budget)
            .into_par_iter()
            .map(|k| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(k as u64);
                self.refine_start(epsilon, &mut rng)
            })
            .collect();
        let mut best = results
            .into_iter()
            .reduce(|best, cand| if cand.value < best.value { cand } else { best })
            .expect("budget >= 1");
        best.starts = budget;
        Ok(best)
    }

    fn refine_start(&self, epsilon: f64, rng: &mut ChaCha8Rng) -> ModulusEstimate {
        const ITERS: usize = 400;
        let d = self.dimension;
        let gauss = |rng: &mut ChaCha8Rng| -> Vec<f64> {
            (0..d).map(|_| rng.sample(StandardNormal)).collect()
        };
        let mut e = gauss(rng);
        let mut u = gauss(rng);
        let mut cur = self.midpoint_pair(epsilon, &e, &u);
        let mut step = 0.5;
        for _ in 0..ITERS {
            if step < 1e-12 {
                break;
            }
            let de = gauss(rng);
            let du = gauss(rng);
            let e2: Vec<f64> = e.iter().zip(&de).map(|(a, b)| a + step * b).collect();
            let u2: Vec<f64> = u.iter().zip(&du).map(|(a, b)| a + step * b).collect();
            match self.midpoint_pair(epsilon, &e2, &u2) {
                Some(cand) if cur.as_ref().is_none_or(|c| cand.value < c.value) => {
                    e = e2;
                    u = u2;
                    cur = Some(cand);
                    step *= 1.5;
                }
                _ => step *= 0.85,
            }
        }
        let mut best = cur.unwrap_or_else(|| ModulusEstimate::trivial(d, epsilon));
        best.tolerance = step;
        best
    }

    /// Feasible pair `x = s e + h`, `y = s e - h` with `s` maximal.
    fn midpoint_pair(&self, epsilon: f64, e: &[f64], u: &[f64]) -> Option<ModulusEstimate> {
        let ne = self.norm_of(e);
        let nu = self.norm_of(u);
        if ne == 0.0 || nu == 0.0 || !ne.is_finite() || !nu.is_finite() {
            return None;
        }
        let e = vector::scale(e, 1.0 / ne);
        let mut h = vector::scale(u, 0.5 * epsilon / nu);
        // keep |x - y| = 2|h| >= epsilon despite rounding
        for _ in 0..8 {
            if self.norm_of(&h) >= 0.5 * epsilon {
                break;
            }
            h = vector::scale(&h, 1.0 + 4.0 * f64::EPSILON);
        }
        let feasible = |s: f64| {
            let m = vector::scale(&e, s);
            self.norm_of(&vector::add(&m, &h)) <= 1.0 && self.norm_of(&vector::sub(&m, &h)) <= 1.0
        };
        let mut lo = 0.0;
        let mut hi = 2.0;
        if !feasible(lo) {
            // |h| rounded above 1 at epsilon = 2: the only admissible value is 1.
            return Some(ModulusEstimate {
                value: 1.0,
                tolerance: 0.0,
                starts: 1,
                x: h.clone(),
                y: vector::scale(&h, -1.0),
            });
        }
        for _ in 0..64 {
            let mid = 0.5 * (lo + hi);
            if feasible(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let m = vector::scale(&e, lo);
        let value = (1.0 - self.norm_of(&m)).clamp(0.0, 1.0);
        Some(ModulusEstimate {
            value,
            tolerance: 0.0,
            starts: 1,
            x: vector::add(&m, &h),
            y: vector::sub(&m, &h),
        })
    }
}

/// Result of [`NormSpace::modulus_uc_estimate`] with the witnessing pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModulusEstimate {
    pub value: f64,
    /// Step size of the local search when it stopped.
    pub tolerance: f64,
    pub starts: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl ModulusEstimate {
    fn trivial(d: usize, epsilon: f64) -> Self {
        let mut x = vec![0.0; d];
        x[0] = epsilon / 2.0;
        let y = vector::scale(&x, -1.0);
        Self {
            value: 1.0,
            tolerance: 0.0,
            starts: 1,
            x,
            y,
        }
    }
}

/// A closed, bounded, convex domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConvexBody {
    Box { lo: Vec<f64>, hi: Vec<f64> },
    /// A ball in the norm of the ambient space.
    Ball { center: Vec<f64>, radius: f64 },
}

impl ConvexBody {
    pub fn new_box(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        check_dim(lo.len(), hi.len())?;
        if lo.is_empty() {
            return Err(Error::InvalidInput("box must have positive dimension".into()));
        }
        if !(vector::is_finite(&lo) && vector::is_finite(&hi)) {
            return Err(Error::InvalidInput("box bounds must be finite".into()));
        }
        if lo.iter().zip(&hi).any(|(l, h)| l > h) {
            return Err(Error::InvalidInput("box requires lo <= hi componentwise".into()));
        }
        Ok(ConvexBody::Box { lo, hi })
    }

    pub fn unit_box(dimension: usize) -> Result<Self> {
        Self::new_box(vec![0.0; dimension], vec![1.0; dimension])
    }

    pub fn new_ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        if center.is_empty() {
            return Err(Error::InvalidInput("ball must have positive dimension".into()));
        }
        if !(radius > 0.0 && radius.is_finite() && vector::is_finite(&center)) {
            return Err(Error::InvalidInput(format!("ball radius must be positive, got {radius}")));
        }
        Ok(ConvexBody::Ball { center, radius })
    }

    /// Re-validates a deserialized body.
    pub fn validated(self) -> Result<Self> {
        match self {
            ConvexBody::Box { lo, hi } => Self::new_box(lo, hi),
            ConvexBody::Ball { center, radius } => Self::new_ball(center, radius),
        }
    }

    pub fn dimension(&self) -> usize {
        match self {
            ConvexBody::Box { lo, .. } => lo.len(),
            ConvexBody::Ball { center, .. } => center.len(),
        }
    }

    pub fn as_box(&self) -> Option<(&[f64], &[f64])> {
        match self {
            ConvexBody::Box { lo, hi } => Some((lo, hi)),
            ConvexBody::Ball { .. } => None,
        }
    }

    fn check(&self, space: &NormSpace, x: &[f64]) -> Result<()> {
        check_dim(space.dimension(), self.dimension())?;
        check_dim(self.dimension(), x.len())
    }

    pub fn contains(&self, space: &NormSpace, x: &[f64], tol: f64) -> Result<bool> {
        self.check(space, x)?;
        Ok(self.contains_unchecked(space, x, tol))
    }

    pub(crate) fn contains_unchecked(&self, space: &NormSpace, x: &[f64], tol: f64) -> bool {
        match self {
            ConvexBody::Box { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(c, (l, h))| *c >= l - tol && *c <= h + tol),
            ConvexBody::Ball { center, radius } => space.dist_of(x, center) <= radius + tol,
        }
    }

    /// `sup { |x - y| : x, y in C }`.
    pub fn diameter(&self, space: &NormSpace) -> Result<f64> {
        check_dim(space.dimension(), self.dimension())?;
        Ok(match self {
            ConvexBody::Box { lo, hi } => space.dist_of(hi, lo),
            ConvexBody::Ball { radius, .. } => 2.0 * radius,
        })
    }

    /// Nearest member of the body. Boxes clamp componentwise in every `l_p`;
    /// balls are supported only for `p = 2`.
    pub fn project(&self, space: &NormSpace, x: &[f64]) -> Result<Vec<f64>> {
        self.check(space, x)?;
        match self {
            ConvexBody::Box { lo, hi } => Ok(clamp_box(x, lo, hi)),
            ConvexBody::Ball { center, radius } => {
                if space.p() != Exponent::Finite(2.0) {
                    return Err(Error::Unsupported(
                        "ball projection is only available for p = 2".into(),
                    ));
                }
                let off = vector::sub(x, center);
                let dist = space.norm_of(&off);
                if dist <= *radius {
                    Ok(x.to_vec())
                } else {
                    Ok(vector::add(center, &vector::scale(&off, radius / dist)))
                }
            }
        }
    }

    /// A member of the body. Uniform for boxes and Euclidean balls; for other
    /// balls the radius is drawn with the Euclidean density along an
    /// `l_p`-normalized Gaussian direction.
    pub fn sample<R: Rng + ?Sized>(&self, space: &NormSpace, rng: &mut R) -> Vec<f64> {
        match self {
            ConvexBody::Box { lo, hi } => lo
                .iter()
                .zip(hi)
                .map(|(l, h)| l + (h - l) * rng.random::<f64>())
                .collect(),
            ConvexBody::Ball { center, radius } => {
                let d = center.len();
                let dir: Vec<f64> = loop {
                    let g: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
                    if space.norm_of(&g) > 0.0 {
                        break g;
                    }
                };
                let n = space.norm_of(&dir);
                let r = radius * rng.random::<f64>().powf(1.0 / d as f64);
                let p = vector::add(center, &vector::scale(&dir, r / n));
                // keep the point inside despite rounding
                if space.dist_of(&p, center) <= *radius {
                    p
                } else {
                    center.clone()
                }
            }
        }
    }

    /// Deterministic representative members: the center and, for boxes, the
    /// two extreme corners.
    pub fn representative_points(&self) -> Vec<Vec<f64>> {
        match self {
            ConvexBody::Box { lo, hi } => {
                let mid = lo.iter().zip(hi).map(|(l, h)| 0.5 * (l + h)).collect();
                vec![lo.clone(), mid, hi.clone()]
            }
            ConvexBody::Ball { center, .. } => vec![center.clone()],
        }
    }
}

pub(crate) fn clamp_box(x: &[f64], lo: &[f64], hi: &[f64]) -> Vec<f64> {
    x.iter()
        .zip(lo.iter().zip(hi))
        .map(|(c, (l, h))| c.clamp(*l, *h))
        .collect()
}
