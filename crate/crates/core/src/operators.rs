//! Self-maps `T: C -> C` that are monotone for the edge relation and
//! 1-Lipschitz on edges, together with sampled auditors for both properties.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::normed_space::{clamp_box, ConvexBody, Exponent, NormSpace, MEMBERSHIP_TOL};
use crate::order_graph::{AuditReport, ConeRelation, EdgeRelation};
use crate::vector;

/// Tolerance on the operator norm of a matrix-affine map.
pub const NORM_BOUND_TOL: f64 = 1e-12;

/// Points reported by [`OperatorSpec::known_fixed_points`] satisfy `|T(x) - x| <= FIXED_POINT_TOL`.
pub const FIXED_POINT_TOL: f64 = 1e-12;

/// A continuous piecewise-linear function through `(xs[k], ys[k])`, constant
/// outside `[xs[0], xs[last]]`. Every slope lies in `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseLinear {
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl PiecewiseLinear {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.is_empty() || xs.len() != ys.len() {
            return Err(Error::InvalidInput(
                "breakpoints need matching, nonempty xs and ys".into(),
            ));
        }
        if !(vector::is_finite(&xs) && vector::is_finite(&ys)) {
            return Err(Error::InvalidInput("breakpoints must be finite".into()));
        }
        for k in 1..xs.len() {
            let dx = xs[k] - xs[k - 1];
            if dx <= 0.0 {
                return Err(Error::InvalidInput("breakpoint xs must increase strictly".into()));
            }
            let dy = ys[k] - ys[k - 1];
            if dy < 0.0 || dy > dx {
                return Err(Error::InvalidInput(format!(
                    "slope {} on piece {k} is outside [0, 1]",
                    dy / dx
                )));
            }
        }
        Ok(Self { xs, ys })
    }

    /// `x -> slope * x + intercept` on all of `R`, written with two breakpoints.
    pub fn affine(slope: f64, intercept: f64, from: f64, to: f64) -> Result<Self> {
        Self::new(vec![from, to], vec![slope * from + intercept, slope * to + intercept])
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return self.ys[0];
        }
        if x >= self.xs[n - 1] {
            return self.ys[n - 1];
        }
        let k = self.xs.partition_point(|&b| b <= x);
        let (x0, x1) = (self.xs[k - 1], self.xs[k]);
        let (y0, y1) = (self.ys[k - 1], self.ys[k]);
        y0 + (y1 - y0) * ((x - x0) / (x1 - x0))
    }

    /// Fixed points of `x -> clamp(f(x), lo, hi)` on `[lo, hi]`; the endpoints
    /// of each fixed segment are reported when a piece has slope one.
    fn clamped_fixed_points(&self, lo: f64, hi: f64) -> Vec<f64> {
        let g = |x: f64| self.eval(x).clamp(lo, hi) - x;
        let mut knots: Vec<f64> = self
            .xs
            .iter()
            .copied()
            .filter(|&b| b > lo && b < hi)
            .collect();
        // points where f crosses lo or hi
        for w in self.xs.windows(2).zip(self.ys.windows(2)) {
            let ((x0, x1), (y0, y1)) = ((w.0[0], w.0[1]), (w.1[0], w.1[1]));
            for level in [lo, hi] {
                if (y0 - level) * (y1 - level) < 0.0 {
                    let x = x0 + (level - y0) * (x1 - x0) / (y1 - y0);
                    if x > lo && x < hi {
                        knots.push(x);
                    }
                }
            }
        }
        knots.push(lo);
        knots.push(hi);
        knots.sort_by(f64::total_cmp);
        knots.dedup();

        let mut out = Vec::new();
        for w in knots.windows(2) {
            let (a, b) = (w[0], w[1]);
            let (ga, gb) = (g(a), g(b));
            if ga == 0.0 {
                out.push(a);
            }
            if gb == 0.0 {
                out.push(b);
            }
            if ga * gb < 0.0 {
                out.push(a + ga * (b - a) / (ga - gb));
            }
        }
        if knots.len() == 1 && g(knots[0]) == 0.0 {
            out.push(knots[0]);
        }
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }
}

/// The operator families.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OperatorKind {
    Identity,
    /// `x -> clamp_C(M x + offset)` with `M >= 0` entrywise and `|M|_p <= 1`.
    MatrixAffine {
        matrix: Vec<Vec<f64>>,
        offset: Vec<f64>,
    },
    /// `x_i -> clamp(f_i(x_i), lo_i, hi_i)`.
    Componentwise { functions: Vec<PiecewiseLinear> },
    /// `x -> then(first(x))`.
    Compose {
        first: Box<OperatorSpec>,
        then: Box<OperatorSpec>,
    },
    /// Negative-test map on `R^2`: swap the coordinates, then contract by
    /// `rate` toward `anchor`. Nonexpansive, but it flips edges of cones that
    /// are not symmetric under the swap.
    TestOnlySwap { anchor: Vec<f64>, rate: f64 },
}

/// A self-map of a convex body in a normed space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorSpec {
    #[serde(flatten)]
    kind: OperatorKind,
    domain: ConvexBody,
    space: NormSpace,
}

/// Analytically known fixed points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixedPointSet {
    pub points: Vec<Vec<f64>>,
    pub description: String,
}

impl OperatorSpec {
    pub fn identity(space: NormSpace, domain: ConvexBody) -> Result<Self> {
        check_dim(space.dimension(), domain.dimension())?;
        Ok(Self {
            kind: OperatorKind::Identity,
            domain,
            space,
        })
    }

    pub fn matrix_affine(
        space: NormSpace,
        domain: ConvexBody,
        matrix: Vec<Vec<f64>>,
        offset: Vec<f64>,
    ) -> Result<Self> {
        let d = space.dimension();
        check_dim(d, domain.dimension())?;
        require_box(&domain, "matrix_affine")?;
        check_dim(d, matrix.len())?;
        check_dim(d, offset.len())?;
        for row in &matrix {
            check_dim(d, row.len())?;
            if row.iter().any(|m| !(*m >= 0.0 && m.is_finite())) {
                return Err(Error::InvalidInput(
                    "matrix entries must be finite and nonnegative".into(),
                ));
            }
        }
        if offset.iter().any(|c| !(*c >= 0.0 && c.is_finite())) {
            return Err(Error::InvalidInput("offset must be finite and nonnegative".into()));
        }
        let bound = operator_norm_bound(&matrix, space.p());
        if bound > 1.0 + NORM_BOUND_TOL {
            return Err(Error::InvalidInput(format!(
                "matrix operator norm bound {bound} exceeds 1"
            )));
        }
        Ok(Self {
            kind: OperatorKind::MatrixAffine { matrix, offset },
            domain,
            space,
        })
    }

    pub fn componentwise(
        space: NormSpace,
        domain: ConvexBody,
        functions: Vec<PiecewiseLinear>,
    ) -> Result<Self> {
        check_dim(space.dimension(), domain.dimension())?;
        require_box(&domain, "componentwise")?;
        check_dim(space.dimension(), functions.len())?;
        Ok(Self {
            kind: OperatorKind::Componentwise { functions },
            domain,
            space,
        })
    }

    /// `x -> then(first(x))`; both maps must share domain and space.
    pub fn compose(first: OperatorSpec, then: OperatorSpec) -> Result<Self> {
        if first.domain != then.domain || first.space != then.space {
            return Err(Error::InvalidInput(
                "composed operators must share domain and space".into(),
            ));
        }
        let (domain, space) = (first.domain.clone(), first.space);
        Ok(Self {
            kind: OperatorKind::Compose {
                first: Box::new(first),
                then: Box::new(then),
            },
            domain,
            space,
        })
    }

    pub fn test_only_swap(
        space: NormSpace,
        domain: ConvexBody,
        anchor: Vec<f64>,
        rate: f64,
    ) -> Result<Self> {
        check_dim(2, space.dimension())?;
        check_dim(2, domain.dimension())?;
        check_dim(2, anchor.len())?;
        require_box(&domain, "test_only_swap")?;
        if !(0.0..=1.0).contains(&rate) {
            return Err(Error::InvalidInput(format!("rate {rate} outside [0, 1]")));
        }
        if !domain.contains(&space, &anchor, 0.0)? {
            return Err(Error::InvalidInput("anchor must lie in the domain".into()));
        }
        Ok(Self {
            kind: OperatorKind::TestOnlySwap { anchor, rate },
            domain,
            space,
        })
    }

    /// Rebuilds a deserialized operator through the validating constructors.
    pub fn validated(self) -> Result<Self> {
        let domain = self.domain.validated()?;
        let space = NormSpace::new(self.space.dimension(), self.space.p())?;
        match self.kind {
            OperatorKind::Identity => Self::identity(space, domain),
            OperatorKind::MatrixAffine { matrix, offset } => {
                Self::matrix_affine(space, domain, matrix, offset)
            }
            OperatorKind::Componentwise { functions } => {
                let functions = functions
                    .into_iter()
                    .map(|f| PiecewiseLinear::new(f.xs, f.ys))
                    .collect::<Result<_>>()?;
                Self::componentwise(space, domain, functions)
            }
            OperatorKind::Compose { first, then } => {
                Self::compose(first.validated()?, then.validated()?)
            }
            OperatorKind::TestOnlySwap { anchor, rate } => {
                Self::test_only_swap(space, domain, anchor, rate)
            }
        }
    }

    pub fn kind(&self) -> &OperatorKind {
        &self.kind
    }

    pub fn domain(&self) -> &ConvexBody {
        &self.domain
    }

    pub fn space(&self) -> &NormSpace {
        &self.space
    }

    pub fn dimension(&self) -> usize {
        self.space.dimension()
    }

    /// Short identifier of the operator family.
    pub fn label(&self) -> String {
        match &self.kind {
            OperatorKind::Identity => "identity".into(),
            OperatorKind::MatrixAffine { .. } => "matrix_affine".into(),
            OperatorKind::Componentwise { .. } => "componentwise".into(),
            OperatorKind::Compose { first, then } => {
                format!("compose({},{})", first.label(), then.label())
            }
            OperatorKind::TestOnlySwap { .. } => "test_only_swap".into(),
        }
    }

    pub fn contains(&self, x: &[f64]) -> Result<bool> {
        self.domain.contains(&self.space, x, MEMBERSHIP_TOL)
    }

    /// `T(x)` for `x` in the domain.
    pub fn evaluate(&self, x: &[f64]) -> Result<Vec<f64>> {
        if !self.contains(x)? {
            return Err(Error::Domain(format!("{x:?} is not a member of the domain")));
        }
        Ok(self.apply(x))
    }

    /// `T(x)` without the membership check.
    pub(crate) fn apply(&self, x: &[f64]) -> Vec<f64> {
        match &self.kind {
            OperatorKind::Identity => x.to_vec(),
            OperatorKind::MatrixAffine { matrix, offset } => {
                let y: Vec<f64> = matrix
                    .iter()
                    .zip(offset)
                    .map(|(row, c)| row.iter().zip(x).map(|(m, v)| m * v).sum::<f64>() + c)
                    .collect();
                self.clamp(&y)
            }
            OperatorKind::Componentwise { functions } => {
                let y: Vec<f64> = functions.iter().zip(x).map(|(f, v)| f.eval(*v)).collect();
                self.clamp(&y)
            }
            OperatorKind::Compose { first, then } => then.apply(&first.apply(x)),
            OperatorKind::TestOnlySwap { anchor, rate } => {
                let y = vec![
                    anchor[0] + rate * (x[1] - anchor[0]),
                    anchor[1] + rate * (x[0] - anchor[1]),
                ];
                self.clamp(&y)
            }
        }
    }

    fn clamp(&self, y: &[f64]) -> Vec<f64> {
        let (lo, hi) = self.domain.as_box().expect("validated as a box domain");
        clamp_box(y, lo, hi)
    }

    /// Fixed points known in closed form for the library constructors.
    pub fn known_fixed_points(&self) -> FixedPointSet {
        let (points, description) = match &self.kind {
            OperatorKind::Identity => (self.domain.representative_points(), "all of C".to_string()),
            OperatorKind::MatrixAffine { matrix, offset } => {
                (self.linear_fixed_point(matrix, offset), "solution of (I - M) x = offset".into())
            }
            OperatorKind::Componentwise { functions } => {
                let (lo, hi) = self.domain.as_box().expect("box domain");
                let per_coord: Vec<Vec<f64>> = functions
                    .iter()
                    .zip(lo.iter().zip(hi))
                    .map(|(f, (l, h))| f.clamped_fixed_points(*l, *h))
                    .collect();
                let least: Vec<f64> = per_coord.iter().filter_map(|c| c.first().copied()).collect();
                let greatest: Vec<f64> =
                    per_coord.iter().filter_map(|c| c.last().copied()).collect();
                let mut pts = Vec::new();
                if least.len() == self.dimension() {
                    pts.push(least);
                    if greatest != pts[0] {
                        pts.push(greatest);
                    }
                }
                (pts, "least and greatest per-coordinate fixed points".into())
            }
            OperatorKind::TestOnlySwap { anchor, rate } => {
                // x = (1 - rate) anchor + rate S x
                let m = vec![vec![0.0, *rate], vec![*rate, 0.0]];
                let c = vector::scale(anchor, 1.0 - rate);
                (self.linear_fixed_point(&m, &c), "solution of (I - rate S) x = (1 - rate) anchor".into())
            }
            OperatorKind::Compose { .. } => (Vec::new(), "none known".into()),
        };
        let points: Vec<Vec<f64>> = points
            .into_iter()
            .filter(|x| {
                self.domain.contains_unchecked(&self.space, x, 0.0)
                    && self.space.dist_of(&self.apply(x), x) <= FIXED_POINT_TOL
            })
            .collect();
        let description = if points.is_empty() {
            "none known".to_string()
        } else {
            description
        };
        FixedPointSet {
            points,
            description,
        }
    }

    fn linear_fixed_point(&self, matrix: &[Vec<f64>], offset: &[f64]) -> Vec<Vec<f64>> {
        let d = self.dimension();
        let m = DMatrix::from_fn(d, d, |i, j| matrix[i][j]);
        let a = DMatrix::identity(d, d) - &m;
        let b = DVector::from_column_slice(offset);
        match a.lu().solve(&b) {
            Some(x) if x.iter().all(|v| v.is_finite()) => vec![x.iter().copied().collect()],
            _ => Vec::new(),
        }
    }
}

fn require_box(domain: &ConvexBody, what: &str) -> Result<()> {
    if domain.as_box().is_none() {
        return Err(Error::Unsupported(format!("{what} operators need a box domain")));
    }
    Ok(())
}

/// Upper bound on the `l_p -> l_p` operator norm of `matrix`.
///
/// Exact for `p = 1` (max column sum), `p = 2` (largest singular value) and
/// `p = inf` (max row sum); for other `p` the Riesz-Thorin interpolation
/// `|M|_1^(1/p) |M|_inf^(1 - 1/p)` is returned.
pub fn operator_norm_bound(matrix: &[Vec<f64>], p: Exponent) -> f64 {
    let d = matrix.len();
    if d == 0 {
        return 0.0;
    }
    let col = (0..d)
        .map(|j| matrix.iter().map(|row| row[j].abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let row = matrix
        .iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    match p {
        Exponent::Infinity => row,
        Exponent::Finite(q) if q == 1.0 => col,
        Exponent::Finite(q) if q == 2.0 => {
            let m = DMatrix::from_fn(d, d, |i, j| matrix[i][j]);
            m.singular_values().max()
        }
        Exponent::Finite(q) => col.powf(1.0 / q) * row.powf(1.0 - 1.0 / q),
    }
}

/// Draws edges `(x, y)` inside the domain: `x` from the body, `y` the
/// projection of `x + v` for a cone element `v` with norm uniform in
/// `(0, diam / 2)`. Pairs whose edge does not survive projection are rejected.
pub struct EdgeSampler<'a> {
    rel: &'a ConeRelation,
    space: NormSpace,
    domain: ConvexBody,
    radius: f64,
}

impl<'a> EdgeSampler<'a> {
    pub fn new(
        rel: &'a ConeRelation,
        space: &NormSpace,
        domain: &ConvexBody,
    ) -> Result<Self> {
        check_dim(space.dimension(), rel.dimension())?;
        check_dim(space.dimension(), domain.dimension())?;
        Ok(Self {
            rel,
            space: *space,
            domain: domain.clone(),
            radius: 0.5 * domain.diameter(space)?,
        })
    }

    pub fn sample<G: Rng + ?Sized>(&self, rng: &mut G) -> Result<(Vec<f64>, Vec<f64>)> {
        const MAX_ATTEMPTS: usize = 1000;
        for _ in 0..MAX_ATTEMPTS {
            let x = self.domain.sample(&self.space, rng);
            let Some(v) = self.rel.sample_cone_element(rng, 100) else {
                continue;
            };
            let len = self.radius * (1.0 - rng.random::<f64>());
            let v = vector::scale(&v, len / self.space.norm_of(&v));
            let y = self.domain.project(&self.space, &vector::add(&x, &v))?;
            if self.rel.edge(&x, &y)? {
                return Ok((x, y));
            }
        }
        Err(Error::InvalidInput(
            "could not sample an edge inside the domain".into(),
        ))
    }
}

/// Checks `edge(T x, T y)` on `edge_count` sampled edges.
pub fn audit_monotone<G: Rng + ?Sized>(
    op: &OperatorSpec,
    rel: &ConeRelation,
    edge_count: usize,
    rng: &mut G,
) -> Result<AuditReport> {
    if edge_count == 0 {
        return Err(Error::InvalidInput("edge_count must be at least 1".into()));
    }
    let sampler = EdgeSampler::new(rel, op.space(), op.domain())?;
    let mut report = AuditReport::new("monotone");
    for _ in 0..edge_count {
        let (x, y) = sampler.sample(rng)?;
        let (tx, ty) = (op.apply(&x), op.apply(&y));
        let ok = rel.edge(&tx, &ty)?;
        report.record(ok, || vec![x.clone(), y.clone(), tx.clone(), ty.clone()]);
    }
    Ok(report)
}

/// Largest observed `|T y - T x| / |y - x|` over sampled edges with `|y - x| >= 1e-12`.
pub fn audit_lipschitz_on_edges<G: Rng + ?Sized>(
    op: &OperatorSpec,
    rel: &ConeRelation,
    space: &NormSpace,
    edge_count: usize,
    rng: &mut G,
) -> Result<f64> {
    if edge_count == 0 {
        return Err(Error::InvalidInput("edge_count must be at least 1".into()));
    }
    check_dim(op.dimension(), space.dimension())?;
    let sampler = EdgeSampler::new(rel, space, op.domain())?;
    let mut worst: f64 = 0.0;
    for _ in 0..edge_count {
        let (x, y) = sampler.sample(rng)?;
        let dxy = space.dist_of(&y, &x);
        if dxy < 1e-12 {
            continue;
        }
        let ratio = space.dist_of(&op.apply(&y), &op.apply(&x)) / dxy;
        worst = worst.max(ratio);
    }
    Ok(worst)
}
