//! Subgradient and proximal oracles for the function classes in the
//! problem gallery.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::oracles::sets::{membership_tol, ConvexSetSpec};
use crate::point::Point;

/// Evaluates a convex function and returns one element of its
/// subdifferential under a deterministic selection rule.
pub trait SubgradOracle: Send + Sync {
    fn eval(&self, x: &Point) -> Result<f64>;
    fn subgrad(&self, x: &Point) -> Result<Point>;
    fn eval_with_subgrad(&self, x: &Point) -> Result<(f64, Point)> {
        Ok((self.eval(x)?, self.subgrad(x)?))
    }
    fn domain_test(&self, _x: &Point) -> bool {
        true
    }
}

/// Exact proximal operator of a convex function g, with an analytic
/// subdifferential membership test and a bounded subgradient selection.
pub trait ProxOracle: Send + Sync {
    /// Value g(x). Indicator functions return +infinity outside the set.
    fn eval(&self, x: &Point) -> Result<f64>;
    /// prox_{alpha g}(z) = argmin g(y) + ||y - z||^2 / (2 alpha)
    fn prox(&self, alpha: f64, z: &Point) -> Result<Point>;
    fn domain_test(&self, x: &Point) -> bool;
    /// Whether w belongs to dg(x), tested analytically (never through `prox`).
    fn in_subdiff(&self, w: &Point, x: &Point, tol: f64) -> Result<bool>;
    /// A w in dg(x) with ||w|| <= rho, the selection realizing Assumption A2.
    fn bounded_subgrad(&self, x: &Point) -> Result<Point>;
    /// Declared bound on the norm of `bounded_subgrad` outputs.
    fn subgrad_bound(&self) -> f64;
    /// A randomized valid subgradient, used by property tests to probe
    /// inequalities that must hold for every selection.
    fn random_subgrad(&self, x: &Point, _rng: &mut ChaCha8Rng) -> Result<Point> {
        self.bounded_subgrad(x)
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::config(format!("prox stepsize must be positive, got {alpha}")));
    }
    Ok(())
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

// ---------------------------------------------------------------------------
// g = lambda * ||.||_1
// ---------------------------------------------------------------------------

/// lambda * l1-norm; also usable as an f-oracle.
#[derive(Debug, Clone)]
pub struct ScaledL1 {
    pub lambda: f64,
    pub dim: usize,
}

impl ScaledL1 {
    pub fn new(lambda: f64, dim: usize) -> Result<Self> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::config(format!("l1 weight must be nonnegative, got {lambda}")));
        }
        Ok(ScaledL1 { lambda, dim })
    }
}

impl SubgradOracle for ScaledL1 {
    fn eval(&self, x: &Point) -> Result<f64> {
        x.check_finite("ScaledL1::eval")?;
        x.check_dim(self.dim, "ScaledL1::eval")?;
        Ok(self.lambda * x.coords().iter().map(|v| v.abs()).sum::<f64>())
    }

    fn subgrad(&self, x: &Point) -> Result<Point> {
        x.check_finite("ScaledL1::subgrad")?;
        x.check_dim(self.dim, "ScaledL1::subgrad")?;
        Ok(Point::from(
            x.coords()
                .iter()
                .map(|&v| self.lambda * sign(v))
                .collect::<Vec<_>>(),
        ))
    }
}

impl ProxOracle for ScaledL1 {
    fn eval(&self, x: &Point) -> Result<f64> {
        SubgradOracle::eval(self, x)
    }

    fn prox(&self, alpha: f64, z: &Point) -> Result<Point> {
        prox_l1(alpha, self.lambda, z)
    }

    fn domain_test(&self, x: &Point) -> bool {
        x.dim() == self.dim
    }

    fn in_subdiff(&self, w: &Point, x: &Point, tol: f64) -> Result<bool> {
        w.check_finite("ScaledL1::in_subdiff")?;
        x.check_finite("ScaledL1::in_subdiff")?;
        w.check_dim(self.dim, "ScaledL1::in_subdiff")?;
        let lam = self.lambda;
        Ok(x.coords().iter().zip(w.coords()).all(|(&xi, &wi)| {
            if xi.abs() > tol {
                (wi - lam * sign(xi)).abs() <= tol
            } else {
                wi.abs() <= lam + tol
            }
        }))
    }

    fn bounded_subgrad(&self, x: &Point) -> Result<Point> {
        SubgradOracle::subgrad(self, x)
    }

    fn subgrad_bound(&self) -> f64 {
        self.lambda * (self.dim as f64).sqrt()
    }

    fn random_subgrad(&self, x: &Point, rng: &mut ChaCha8Rng) -> Result<Point> {
        x.check_dim(self.dim, "ScaledL1::random_subgrad")?;
        Ok(Point::from(
            x.coords()
                .iter()
                .map(|&v| {
                    if v != 0.0 {
                        self.lambda * sign(v)
                    } else {
                        self.lambda * rng.gen_range(-1.0..=1.0)
                    }
                })
                .collect::<Vec<_>>(),
        ))
    }
}

// ---------------------------------------------------------------------------
// g identically zero
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct ZeroFn {
    pub dim: usize,
}

impl SubgradOracle for ZeroFn {
    fn eval(&self, x: &Point) -> Result<f64> {
        x.check_finite("ZeroFn::eval")?;
        Ok(0.0)
    }

    fn subgrad(&self, x: &Point) -> Result<Point> {
        x.check_finite("ZeroFn::subgrad")?;
        Ok(Point::zeros(x.dim()))
    }
}

impl ProxOracle for ZeroFn {
    fn eval(&self, x: &Point) -> Result<f64> {
        x.check_finite("ZeroFn::eval")?;
        Ok(0.0)
    }

    fn prox(&self, alpha: f64, z: &Point) -> Result<Point> {
        check_alpha(alpha)?;
        z.check_finite("ZeroFn::prox")?;
        Ok(z.clone())
    }

    fn domain_test(&self, x: &Point) -> bool {
        x.dim() == self.dim
    }

    fn in_subdiff(&self, w: &Point, _x: &Point, tol: f64) -> Result<bool> {
        w.check_finite("ZeroFn::in_subdiff")?;
        Ok(w.norm() <= tol)
    }

    fn bounded_subgrad(&self, x: &Point) -> Result<Point> {
        Ok(Point::zeros(x.dim()))
    }

    fn subgrad_bound(&self) -> f64 {
        0.0
    }
}

// ---------------------------------------------------------------------------
// g = indicator of a closed convex set
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct IndicatorSet {
    set: ConvexSetSpec,
}

impl IndicatorSet {
    pub fn new(set: ConvexSetSpec) -> Result<Self> {
        set.validate()?;
        Ok(IndicatorSet { set })
    }

    pub fn set(&self) -> &ConvexSetSpec {
        &self.set
    }
}

impl ProxOracle for IndicatorSet {
    fn eval(&self, x: &Point) -> Result<f64> {
        x.check_finite("IndicatorSet::eval")?;
        if self.domain_test(x) {
            Ok(0.0)
        } else {
            Ok(f64::INFINITY)
        }
    }

    fn prox(&self, alpha: f64, z: &Point) -> Result<Point> {
        check_alpha(alpha)?;
        self.set.project(z)
    }

    fn domain_test(&self, x: &Point) -> bool {
        self.set.member(x, membership_tol(x.norm()))
    }

    fn in_subdiff(&self, w: &Point, x: &Point, tol: f64) -> Result<bool> {
        self.set.normal_cone_contains(w, x, tol)
    }

    fn bounded_subgrad(&self, x: &Point) -> Result<Point> {
        // zero is in the normal cone at every feasible point
        if !self.domain_test(x) {
            return Err(Error::config(
                "bounded_subgrad requested outside the indicator's set",
            ));
        }
        Ok(Point::zeros(x.dim()))
    }

    fn subgrad_bound(&self) -> f64 {
        0.0
    }
}

// ---------------------------------------------------------------------------
// g = indicator of the nonnegative orthant plus lambda * ||.||_1
// ---------------------------------------------------------------------------

/// Composite from the dual-of-finite-support construction: the prox is a
/// shifted projection onto the orthant.
#[derive(Debug, Clone)]
pub struct NonnegL1 {
    pub lambda: f64,
    pub dim: usize,
}

impl NonnegL1 {
    pub fn new(lambda: f64, dim: usize) -> Result<Self> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::config(format!("l1 weight must be nonnegative, got {lambda}")));
        }
        Ok(NonnegL1 { lambda, dim })
    }
}

impl ProxOracle for NonnegL1 {
    fn eval(&self, x: &Point) -> Result<f64> {
        x.check_finite("NonnegL1::eval")?;
        if !self.domain_test(x) {
            return Ok(f64::INFINITY);
        }
        Ok(self.lambda * x.coords().iter().map(|v| v.abs()).sum::<f64>())
    }

    fn prox(&self, alpha: f64, z: &Point) -> Result<Point> {
        check_alpha(alpha)?;
        z.check_finite("NonnegL1::prox")?;
        z.check_dim(self.dim, "NonnegL1::prox")?;
        Ok(Point::from(
            z.coords()
                .iter()
                .map(|&v| (v - alpha * self.lambda).max(0.0))
                .collect::<Vec<_>>(),
        ))
    }

    fn domain_test(&self, x: &Point) -> bool {
        let tol = membership_tol(x.norm());
        x.dim() == self.dim && x.coords().iter().all(|&v| v >= -tol)
    }

    fn in_subdiff(&self, w: &Point, x: &Point, tol: f64) -> Result<bool> {
        w.check_finite("NonnegL1::in_subdiff")?;
        if !self.domain_test(x) {
            return Ok(false);
        }
        // dg(x)_i = { lambda } at x_i > 0 and (-inf, lambda] at x_i = 0
        Ok(x.coords().iter().zip(w.coords()).all(|(&xi, &wi)| {
            if xi > tol {
                (wi - self.lambda).abs() <= tol
            } else {
                wi <= self.lambda + tol
            }
        }))
    }

    fn bounded_subgrad(&self, x: &Point) -> Result<Point> {
        if !self.domain_test(x) {
            return Err(Error::config(
                "bounded_subgrad requested outside the nonnegative orthant",
            ));
        }
        Ok(Point::from(
            x.coords()
                .iter()
                .map(|&v| if v > 0.0 { self.lambda } else { 0.0 })
                .collect::<Vec<_>>(),
        ))
    }

    fn subgrad_bound(&self) -> f64 {
        self.lambda * (self.dim as f64).sqrt()
    }
}

// ---------------------------------------------------------------------------
// f = max of affine pieces
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct MaxAffine {
    rows: Vec<Vec<f64>>,
    offsets: Vec<f64>,
}

impl MaxAffine {
    pub fn new(rows: Vec<Vec<f64>>, offsets: Vec<f64>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::config("max-affine needs at least one row"));
        }
        if rows.len() != offsets.len() {
            return Err(Error::config("max-affine rows/offsets length mismatch"));
        }
        let dim = rows[0].len();
        for r in &rows {
            if r.len() != dim {
                return Err(Error::config("max-affine rows have ragged dimensions"));
            }
            Point::new(r.clone())?;
        }
        Point::new(offsets.clone())?;
        Ok(MaxAffine { rows, offsets })
    }

    pub fn max_row_norm(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| Point::from(r.clone()).norm())
            .fold(0.0, f64::max)
    }
}

impl SubgradOracle for MaxAffine {
    fn eval(&self, x: &Point) -> Result<f64> {
        Ok(self.eval_with_subgrad(x)?.0)
    }

    fn subgrad(&self, x: &Point) -> Result<Point> {
        Ok(self.eval_with_subgrad(x)?.1)
    }

    fn eval_with_subgrad(&self, x: &Point) -> Result<(f64, Point)> {
        x.check_finite("MaxAffine::eval")?;
        x.check_dim(self.rows[0].len(), "MaxAffine::eval")?;
        let mut best = f64::NEG_INFINITY;
        let mut active = 0;
        for (i, (r, &b)) in self.rows.iter().zip(&self.offsets).enumerate() {
            let v = Point::from(r.clone()).dot(x) + b;
            // first active index under ties
            if v > best {
                best = v;
                active = i;
            }
        }
        Ok((best, Point::from(self.rows[active].clone())))
    }
}

// ---------------------------------------------------------------------------
// f = || A x - b ||_1
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct L1Residual {
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
}

impl L1Residual {
    pub fn new(a: Vec<Vec<f64>>, b: Vec<f64>) -> Result<Self> {
        if a.is_empty() || a.len() != b.len() {
            return Err(Error::DimensionMismatch {
                context: "L1Residual::new",
                expected: a.len(),
                got: b.len(),
            });
        }
        let dim = a[0].len();
        for r in &a {
            if r.len() != dim {
                return Err(Error::config("residual matrix has ragged rows"));
            }
            Point::new(r.clone())?;
        }
        Point::new(b.clone())?;
        Ok(L1Residual { a, b })
    }

    pub fn matrix(&self) -> &[Vec<f64>] {
        &self.a
    }

    pub fn rhs(&self) -> &[f64] {
        &self.b
    }

    /// Sum of row norms, a global bound on the subgradient norm.
    pub fn row_norm_sum(&self) -> f64 {
        self.a.iter().map(|r| Point::from(r.clone()).norm()).sum()
    }
}

impl SubgradOracle for L1Residual {
    fn eval(&self, x: &Point) -> Result<f64> {
        Ok(self.eval_with_subgrad(x)?.0)
    }

    fn subgrad(&self, x: &Point) -> Result<Point> {
        Ok(self.eval_with_subgrad(x)?.1)
    }

    fn eval_with_subgrad(&self, x: &Point) -> Result<(f64, Point)> {
        x.check_finite("L1Residual::eval")?;
        x.check_dim(self.a[0].len(), "L1Residual::eval")?;
        let mut value = 0.0;
        let mut u = vec![0.0; x.dim()];
        for (r, &bi) in self.a.iter().zip(&self.b) {
            let resid = Point::from(r.clone()).dot(x) - bi;
            value += resid.abs();
            let s = sign(resid);
            if s != 0.0 {
                for (uj, &rj) in u.iter_mut().zip(r) {
                    *uj += s * rj;
                }
            }
        }
        Ok((value, Point::from(u)))
    }
}

// ---------------------------------------------------------------------------
// f = sum of distances to convex sets
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct SumOfDistances {
    sets: Vec<ConvexSetSpec>,
}

impl SumOfDistances {
    pub fn new(sets: Vec<ConvexSetSpec>) -> Result<Self> {
        if sets.is_empty() {
            return Err(Error::config("sum-of-distances needs at least one set"));
        }
        let dim = sets[0].dim();
        for s in &sets {
            s.validate()?;
            if s.dim() != dim {
                return Err(Error::config("sum-of-distances sets have mixed dimensions"));
            }
        }
        Ok(SumOfDistances { sets })
    }

    pub fn n_sets(&self) -> usize {
        self.sets.len()
    }
}

impl SubgradOracle for SumOfDistances {
    fn eval(&self, x: &Point) -> Result<f64> {
        Ok(self.eval_with_subgrad(x)?.0)
    }

    fn subgrad(&self, x: &Point) -> Result<Point> {
        Ok(self.eval_with_subgrad(x)?.1)
    }

    fn eval_with_subgrad(&self, x: &Point) -> Result<(f64, Point)> {
        x.check_finite("SumOfDistances::eval")?;
        let mut value = 0.0;
        let mut u = Point::zeros(x.dim());
        for s in &self.sets {
            let p = s.project(x)?;
            let d = x.dist(&p);
            // zero selection at members (distance kink)
            if d > membership_tol(x.norm()) {
                value += d;
                u = u.add_scaled(1.0 / d, &x.sub(&p));
            }
        }
        Ok((value, u))
    }
}

// ---------------------------------------------------------------------------
// 1-D envelope with unattained infimum
// ---------------------------------------------------------------------------

/// Supremum of the tangent lines to sqrt(x^2+1) - x taken at every
/// nonnegative integer grid point. Piecewise linear, convex, strictly
/// decreasing, with infimum 0 approached but never attained, so the
/// solution set is empty.
#[derive(Debug, Clone, Default)]
pub struct FlatteningEnvelope;

impl FlatteningEnvelope {
    /// Limiting infimum of the envelope.
    pub const INFIMUM: f64 = 0.0;

    fn base(t: f64) -> f64 {
        // sqrt(t^2+1) - t, evaluated stably for large t
        1.0 / ((t * t + 1.0).sqrt() + t)
    }

    fn base_slope(t: f64) -> f64 {
        t / (t * t + 1.0).sqrt() - 1.0
    }

    fn tangent(j: f64, x: f64) -> f64 {
        Self::base(j) + Self::base_slope(j) * (x - j)
    }

    /// Active tangent index: the maximizing grid point is within one unit of
    /// x (the continuous maximizer of j -> tangent_j(x) is j = x), so a small
    /// window suffices.
    fn active_index(x: f64) -> f64 {
        let lo = (x.floor() - 2.0).max(0.0);
        let mut best_j = lo;
        let mut best_v = Self::tangent(lo, x);
        for step in 1..=5 {
            let j = lo + step as f64;
            let v = Self::tangent(j, x);
            if v > best_v {
                best_v = v;
                best_j = j;
            }
        }
        best_j
    }
}

impl SubgradOracle for FlatteningEnvelope {
    fn eval(&self, x: &Point) -> Result<f64> {
        Ok(self.eval_with_subgrad(x)?.0)
    }

    fn subgrad(&self, x: &Point) -> Result<Point> {
        Ok(self.eval_with_subgrad(x)?.1)
    }

    fn eval_with_subgrad(&self, x: &Point) -> Result<(f64, Point)> {
        x.check_finite("FlatteningEnvelope::eval")?;
        x.check_dim(1, "FlatteningEnvelope::eval")?;
        let v = x[0];
        let j = Self::active_index(v);
        Ok((
            Self::tangent(j, v),
            Point::from(vec![Self::base_slope(j)]),
        ))
    }
}

// ---------------------------------------------------------------------------
// Named operations
// ---------------------------------------------------------------------------

/// Componentwise soft threshold: the prox of lambda * ||.||_1 at stepsize alpha.
pub fn prox_l1(alpha: f64, lambda: f64, z: &Point) -> Result<Point> {
    check_alpha(alpha)?;
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::config(format!("l1 weight must be nonnegative, got {lambda}")));
    }
    z.check_finite("prox_l1")?;
    let t = alpha * lambda;
    Ok(Point::from(
        z.coords()
            .iter()
            .map(|&v| sign(v) * (v.abs() - t).max(0.0))
            .collect::<Vec<_>>(),
    ))
}

/// Orthogonal projection, the prox of an indicator function.
pub fn prox_indicator(set: &ConvexSetSpec, z: &Point) -> Result<Point> {
    set.validate()?;
    set.project(z)
}

/// Minimal-norm-flavored subgradient of the (unscaled) l1 norm.
pub fn subgrad_l1(x: &Point) -> Result<Point> {
    x.check_finite("subgrad_l1")?;
    Ok(Point::from(
        x.coords().iter().map(|&v| sign(v)).collect::<Vec<_>>(),
    ))
}

/// Value and one subgradient of max_i (<a_i, x> + b_i), first active index.
pub fn subgrad_max_affine(rows: &[Vec<f64>], offsets: &[f64], x: &Point) -> Result<(f64, Point)> {
    MaxAffine::new(rows.to_vec(), offsets.to_vec())?.eval_with_subgrad(x)
}

/// Value and one subgradient of ||A x - b||_1 under sign(0) = 0.
pub fn subgrad_l1_residual(a: &[Vec<f64>], b: &[f64], x: &Point) -> Result<(f64, Point)> {
    L1Residual::new(a.to_vec(), b.to_vec())?.eval_with_subgrad(x)
}

/// Verifies the prox optimality inclusion (z - p)/alpha in dg(p).
pub fn check_optimality_inclusion(
    g: &dyn ProxOracle,
    alpha: f64,
    z: &Point,
    tol: f64,
) -> Result<bool> {
    check_alpha(alpha)?;
    let p = g.prox(alpha, z)?;
    let w = z.sub(&p).scale(1.0 / alpha);
    g.in_subdiff(&w, &p, tol)
}

/// Declared bounds on the subgradient selections over a bounded region:
/// zeta for the f-oracle, rho for the g-oracle's bounded selection.
#[derive(Debug, Clone, Copy)]
pub struct AssumptionConstants {
    pub zeta: f64,
    pub rho: f64,
}
