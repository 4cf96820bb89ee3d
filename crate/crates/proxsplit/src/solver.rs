//! The proximal subgradient splitting iteration
//! x^{k+1} = prox_{alpha_k g}(x^k - alpha_k u^k), u^k in df(x^k),
//! with pluggable stepsize rules, best-value tracking and ergodic averaging.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracles::{ProxOracle, SubgradOracle};
use crate::point::Point;

/// Monotone nonincreasing target-value schedule for Polyak stepsizes.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetSchedule {
    Constant { value: f64 },
    /// s_k = limit + scale / (k+1)^rate, decreasing to `limit`.
    OffsetDecay { limit: f64, scale: f64, rate: f64 },
}

impl TargetSchedule {
    pub fn value(&self, k: usize) -> f64 {
        match self {
            TargetSchedule::Constant { value } => *value,
            TargetSchedule::OffsetDecay { limit, scale, rate } => {
                limit + scale / ((k + 1) as f64).powf(*rate)
            }
        }
    }

    pub fn limit(&self) -> f64 {
        match self {
            TargetSchedule::Constant { value } => *value,
            TargetSchedule::OffsetDecay { limit, .. } => *limit,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            TargetSchedule::Constant { value } => {
                if !value.is_finite() {
                    return Err(Error::config("target value must be finite"));
                }
            }
            TargetSchedule::OffsetDecay { limit, scale, rate } => {
                if !limit.is_finite() || !scale.is_finite() || !rate.is_finite() {
                    return Err(Error::config("target schedule parameters must be finite"));
                }
                if *scale < 0.0 || *rate <= 0.0 {
                    return Err(Error::config(
                        "target schedule needs scale >= 0 and rate > 0 to be nonincreasing",
                    ));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StepsizeRule {
    Constant {
        alpha: f64,
    },
    /// alpha_k = beta_k / max(1, ||u^k||) with beta_k = scale / (k+1)^rate.
    /// rate in (1/2, 1] gives square-summable but not summable beta.
    Exogenous {
        scale: f64,
        rate: f64,
    },
    Polyak {
        gamma: f64,
        gamma_floor: f64,
        target: TargetSchedule,
    },
}

impl StepsizeRule {
    pub fn validate(&self) -> Result<()> {
        match self {
            StepsizeRule::Constant { alpha } => {
                if !(*alpha > 0.0) || !alpha.is_finite() {
                    return Err(Error::config(format!(
                        "constant stepsize must be positive, got {alpha}"
                    )));
                }
            }
            StepsizeRule::Exogenous { scale, rate } => {
                if !(*scale > 0.0) || !scale.is_finite() {
                    return Err(Error::config(format!(
                        "exogenous scale must be positive, got {scale}"
                    )));
                }
                if !(*rate > 0.5 && *rate <= 1.0) {
                    return Err(Error::config(format!(
                        "exogenous rate must lie in (1/2, 1], got {rate}"
                    )));
                }
            }
            StepsizeRule::Polyak {
                gamma,
                gamma_floor,
                target,
            } => {
                if !(*gamma_floor > 0.0 && *gamma_floor <= 1.0) {
                    return Err(Error::config(format!(
                        "gamma floor must lie in (0, 1], got {gamma_floor}"
                    )));
                }
                if !(*gamma >= *gamma_floor && *gamma <= 2.0 - *gamma_floor) {
                    return Err(Error::config(format!(
                        "gamma must lie in [{gamma_floor}, {}], got {gamma}",
                        2.0 - gamma_floor
                    )));
                }
                target.validate()?;
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &'static str {
        match self {
            StepsizeRule::Constant { .. } => "constant",
            StepsizeRule::Exogenous { .. } => "exogenous",
            StepsizeRule::Polyak { .. } => "polyak",
        }
    }
}

/// Why a run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxIters,
    /// ||x^{k+1} - x^k|| <= stop_tol
    StepTol,
    /// Polyak numerator (f+g)(x^k) - s_k <= 0: x^k is s_k-suboptimal.
    TargetReached,
    /// Polyak denominator vanished while the target gap stayed positive.
    StationaryDenominator,
}

impl std::fmt::Display for StopReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            StopReason::MaxIters => "max_iters",
            StopReason::StepTol => "step_tol",
            StopReason::TargetReached => "target_reached",
            StopReason::StationaryDenominator => "stationary_denominator",
        };
        f.write_str(s)
    }
}

/// Per-iteration record. Scalars are kept at every k; full points are
/// thinned by `record_every` (the certificate bounds need every scalar but
/// only as many points as the caller asks to retain).
#[derive(Debug, Clone)]
pub struct IterateRecord {
    pub k: usize,
    pub x: Option<Point>,
    pub u: Option<Point>,
    pub w: Option<Point>,
    pub alpha: f64,
    pub value: f64,
    pub best_value: f64,
    pub ergodic_x: Option<Point>,
    pub ergodic_value: f64,
    pub step_norm: f64,
    pub u_norm: f64,
    pub w_norm: f64,
    /// ||u^k + w^k||, the exact ingredient of the running C_k maximum.
    pub uw_norm: f64,
    /// Polyak target s_k, when the rule has one.
    pub target: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RunTrace {
    pub dim: usize,
    pub rule: StepsizeRule,
    pub stop_tol: f64,
    pub record_every: usize,
    pub records: Vec<IterateRecord>,
    pub final_x: Point,
    pub final_value: f64,
    pub best_value: f64,
    pub stop: StopReason,
    /// Index of the iterate at which the run stopped (the final iterate).
    pub stop_iter: usize,
}

impl RunTrace {
    /// Number of completed steps (records run k = 0 .. steps-1).
    pub fn steps(&self) -> usize {
        self.records.len()
    }

    /// x^k for k in 0..=steps(), when recorded.
    pub fn iterate(&self, k: usize) -> Option<&Point> {
        if k == self.records.len() {
            Some(&self.final_x)
        } else {
            self.records.get(k).and_then(|r| r.x.as_ref())
        }
    }

    pub fn has_all_points(&self) -> bool {
        self.record_every == 1 && self.records.iter().all(|r| r.x.is_some())
    }

    /// Running max of ||u^i + w^i||^2 for i <= k, at every k.
    pub fn running_c(&self) -> Vec<f64> {
        let mut c = Vec::with_capacity(self.records.len());
        let mut m: f64 = 0.0;
        for r in &self.records {
            m = m.max(r.uw_norm * r.uw_norm);
            c.push(m);
        }
        c
    }

    /// Running max of (||u^i|| + rho_i)^2 for i <= k, at every k.
    pub fn running_d(&self) -> Vec<f64> {
        let mut d = Vec::with_capacity(self.records.len());
        let mut m: f64 = 0.0;
        for r in &self.records {
            let t = r.u_norm + r.w_norm;
            m = m.max(t * t);
            d.push(m);
        }
        d
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub x0: Point,
    pub rule: StepsizeRule,
    pub max_iters: usize,
    pub stop_tol: f64,
    pub record_every: usize,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.rule.validate()?;
        if self.max_iters == 0 {
            return Err(Error::config("max_iters must be positive"));
        }
        if self.record_every == 0 {
            return Err(Error::config("record_every must be positive"));
        }
        if !(self.stop_tol >= 0.0) {
            return Err(Error::config("stop_tol must be nonnegative"));
        }
        Ok(())
    }
}

/// One iteration: forward subgradient step on f, backward proximal step on g.
pub fn pss_step(
    x: &Point,
    f: &dyn SubgradOracle,
    g: &dyn ProxOracle,
    alpha: f64,
) -> Result<(Point, Point)> {
    if !g.domain_test(x) {
        return Err(Error::ContractViolation {
            iter: 0,
            msg: "pss_step called outside dom(g)".into(),
        });
    }
    let u = f.subgrad(x)?;
    let x_next = g.prox(alpha, &x.add_scaled(-alpha, &u))?;
    Ok((x_next, u))
}

/// Optimal constant stepsize dist0 / (sqrt(Ck) * sqrt(horizon+1)).
pub fn constant_alpha(dist0: f64, ck: f64, horizon: usize) -> Result<f64> {
    if !(dist0 > 0.0) || !(ck > 0.0) {
        return Err(Error::config(
            "constant_alpha needs positive dist0 and Ck",
        ));
    }
    Ok(dist0 / (ck.sqrt() * ((horizon + 1) as f64).sqrt()))
}

/// alpha_k = beta_k / eta_k with eta_k = max(1, ||u||).
pub fn exogenous_alpha(k: usize, scale: f64, rate: f64, u: &Point) -> f64 {
    exogenous_beta(k, scale, rate) / u.norm().max(1.0)
}

pub fn exogenous_beta(k: usize, scale: f64, rate: f64) -> f64 {
    scale / ((k + 1) as f64).powf(rate)
}

/// Outcome of the Polyak stepsize formula at one iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PolyakStep {
    Alpha(f64),
    /// (f+g)(x^k) - s_k <= 0: x^k is already s_k-suboptimal.
    TargetReached,
    /// Denominator below epsilon while the gap is positive.
    StationaryDenominator,
}

const DENOMINATOR_EPS: f64 = 1e-16;

/// gamma_k * [(f+g)(x^k) - s_k] / (||u|| + rho_k)^2 with rho_k = ||w||.
pub fn polyak_alpha(value: f64, s_k: f64, gamma_k: f64, u: &Point, w: &Point) -> PolyakStep {
    let gap = value - s_k;
    if gap <= 0.0 {
        return PolyakStep::TargetReached;
    }
    let u_norm = u.norm();
    let rho = w.norm();
    let den = u_norm * u_norm + 2.0 * rho * u_norm + rho * rho;
    if den < DENOMINATOR_EPS {
        return PolyakStep::StationaryDenominator;
    }
    PolyakStep::Alpha(gamma_k * gap / den)
}

/// Running minimum of objective values.
pub fn update_best(best_prev: f64, value: f64) -> f64 {
    best_prev.min(value)
}

/// One step of the stepsize-weighted running average:
/// sigma = sigma_prev + alpha; ergodic = (1 - alpha/sigma) prev + (alpha/sigma) x.
pub fn update_ergodic(
    ergodic_prev: &Point,
    sigma_prev: f64,
    alpha_k: f64,
    x_k: &Point,
) -> (Point, f64) {
    let sigma = sigma_prev + alpha_k;
    let t = alpha_k / sigma;
    (ergodic_prev.scale(1.0 - t).add_scaled(t, x_k), sigma)
}

/// Runs the iteration until max_iters, step tolerance, or a Polyak stop
/// signal. Returns the complete trace.
pub fn run(f: &dyn SubgradOracle, g: &dyn ProxOracle, config: &RunConfig) -> Result<RunTrace> {
    config.validate()?;
    config.x0.check_finite("run x0")?;
    if !g.domain_test(&config.x0) {
        return Err(Error::ContractViolation {
            iter: 0,
            msg: "x0 is not in dom(g)".into(),
        });
    }

    let dim = config.x0.dim();
    let mut records = Vec::new();
    let mut x = config.x0.clone();
    let mut best = f64::INFINITY;
    let mut ergodic: Option<(Point, f64)> = None; // (xbar, sigma)
    let mut stop = StopReason::MaxIters;

    let objective = |p: &Point, iter: usize| -> Result<f64> {
        let v = f.eval(p)? + g.eval(p)?;
        if !v.is_finite() {
            return Err(Error::ContractViolation {
                iter,
                msg: "objective is not finite at the current iterate".into(),
            });
        }
        Ok(v)
    };

    let mut k = 0;
    while k < config.max_iters {
        let (fval, u) = f.eval_with_subgrad(&x)?;
        let gval = g.eval(&x)?;
        let value = fval + gval;
        if !value.is_finite() {
            return Err(Error::ContractViolation {
                iter: k,
                msg: "objective is not finite at the current iterate".into(),
            });
        }
        let w = g.bounded_subgrad(&x)?;

        let mut target = None;
        let alpha = match &config.rule {
            StepsizeRule::Constant { alpha } => *alpha,
            StepsizeRule::Exogenous { scale, rate } => exogenous_alpha(k, *scale, *rate, &u),
            StepsizeRule::Polyak {
                gamma,
                target: sched,
                ..
            } => {
                let s_k = sched.value(k);
                target = Some(s_k);
                match polyak_alpha(value, s_k, *gamma, &u, &w) {
                    PolyakStep::Alpha(a) => a,
                    PolyakStep::TargetReached => {
                        stop = StopReason::TargetReached;
                        break;
                    }
                    PolyakStep::StationaryDenominator => {
                        stop = StopReason::StationaryDenominator;
                        break;
                    }
                }
            }
        };

        let x_next = g.prox(alpha, &x.add_scaled(-alpha, &u))?;
        x_next.check_finite("run iterate")?;
        let step_norm = x_next.dist(&x);

        best = update_best(best, value);
        let (xbar, sigma) = match ergodic.take() {
            None => (x.clone(), alpha),
            Some((prev, sigma_prev)) => update_ergodic(&prev, sigma_prev, alpha, &x),
        };
        let ergodic_value = objective(&xbar, k)?;

        let keep_points = k % config.record_every == 0;
        records.push(IterateRecord {
            k,
            x: keep_points.then(|| x.clone()),
            u: keep_points.then(|| u.clone()),
            w: keep_points.then(|| w.clone()),
            alpha,
            value,
            best_value: best,
            ergodic_x: keep_points.then(|| xbar.clone()),
            ergodic_value,
            step_norm,
            u_norm: u.norm(),
            w_norm: w.norm(),
            uw_norm: u.add(&w).norm(),
            target,
        });
        ergodic = Some((xbar, sigma));

        x = x_next;
        k += 1;

        if step_norm <= config.stop_tol {
            stop = StopReason::StepTol;
            break;
        }
    }

    let final_value = objective(&x, k)?;
    best = update_best(best, final_value);
    Ok(RunTrace {
        dim,
        rule: config.rule.clone(),
        stop_tol: config.stop_tol,
        record_every: config.record_every,
        records,
        final_x: x,
        final_value,
        best_value: best,
        stop,
        stop_iter: k,
    })
}

/// Two-pass protocol for the optimal constant stepsize: the running maximum
/// C_K depends on the run, so a pilot estimates it and the certified run uses
/// it. Because C_K is piecewise constant in alpha, an exact fixpoint need
/// not exist; the estimate only ever grows and the protocol settles once the
/// observed maximum is covered by the declared one, so the final stepsize is
/// optimal for a certified upper bound on C_K.
pub fn constant_two_pass(
    f: &dyn SubgradOracle,
    g: &dyn ProxOracle,
    x0: &Point,
    dist0: f64,
    horizon: usize,
    max_passes: usize,
) -> Result<(f64, RunTrace)> {
    let mut ck = 1.0;
    let mut out = None;
    for _ in 0..max_passes.max(2) {
        let alpha = constant_alpha(dist0, ck, horizon)?;
        let trace = run(
            f,
            g,
            &RunConfig {
                x0: x0.clone(),
                rule: StepsizeRule::Constant { alpha },
                max_iters: horizon + 1,
                stop_tol: 0.0,
                record_every: 1,
            },
        )?;
        let observed = *trace
            .running_c()
            .last()
            .ok_or_else(|| Error::config("two-pass run produced no iterations"))?;
        let settled = observed <= ck * (1.0 + 1e-9);
        out = Some((alpha, trace));
        if settled {
            break;
        }
        ck = ck.max(observed);
    }
    Ok(out.unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles::{
        ConvexSetSpec, IndicatorSet, MaxAffine, ProxOracle, ScaledL1, ZeroFn,
    };

    fn pt(v: &[f64]) -> Point {
        Point::new(v.to_vec()).unwrap()
    }

    fn abs_1d() -> MaxAffine {
        MaxAffine::new(vec![vec![1.0], vec![-1.0]], vec![0.0, 0.0]).unwrap()
    }

    #[test]
    fn step_on_abs_with_identity_prox() {
        let f = abs_1d();
        let g = ZeroFn { dim: 1 };
        let (x_next, u) = pss_step(&pt(&[1.0]), &f, &g, 0.4).unwrap();
        assert_eq!(u, pt(&[1.0]));
        assert!((x_next[0] - 0.6).abs() < 1e-15);
    }

    #[test]
    fn step_fixed_at_interior_point() {
        let f = ZeroFn { dim: 1 };
        let g = IndicatorSet::new(ConvexSetSpec::Box {
            lower: vec![0.0],
            upper: vec![1.0],
        })
        .unwrap();
        let (x_next, _) = pss_step(&pt(&[0.5]), &f, &g, 3.7).unwrap();
        assert_eq!(x_next, pt(&[0.5]));
    }

    #[test]
    fn step_soft_thresholds_after_forward() {
        // f = ||.||_1, g = ||.||_1, x = 2, alpha = 0.5: forward to 1.5, then
        // threshold by 0.5. Cross-checked against a grid scan of the prox
        // objective in tests/properties.rs.
        let f = ScaledL1::new(1.0, 1).unwrap();
        let g = ScaledL1::new(1.0, 1).unwrap();
        let (x_next, u) = pss_step(&pt(&[2.0]), &f, &g, 0.5).unwrap();
        assert_eq!(u, pt(&[1.0]));
        assert!((x_next[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn step_rejects_infeasible_point() {
        let f = ZeroFn { dim: 1 };
        let g = IndicatorSet::new(ConvexSetSpec::NonnegOrthant { dim: 1 }).unwrap();
        assert!(pss_step(&pt(&[-1.0]), &f, &g, 1.0).is_err());
    }

    #[test]
    fn run_projection_is_idempotent() {
        let f = ZeroFn { dim: 2 };
        let g = IndicatorSet::new(ConvexSetSpec::Ball {
            center: vec![0.0, 0.0],
            radius: 1.0,
        })
        .unwrap();
        let trace = run(
            &f,
            &g,
            &RunConfig {
                x0: g.prox(1.0, &pt(&[3.0, 4.0])).unwrap(),
                rule: StepsizeRule::Constant { alpha: 0.7 },
                max_iters: 100,
                stop_tol: 0.0,
                record_every: 1,
            },
        )
        .unwrap();
        // u = 0 and the projection of a feasible point is itself
        assert_eq!(trace.stop, StopReason::StepTol);
        assert_eq!(trace.stop_iter, 1);
        assert!(trace.final_x.dist(&pt(&[0.6, 0.8])) < 1e-12);
    }

    #[test]
    fn run_exogenous_drives_abs_to_zero() {
        let f = abs_1d();
        let g = ZeroFn { dim: 1 };
        let trace = run(
            &f,
            &g,
            &RunConfig {
                x0: pt(&[1.0]),
                rule: StepsizeRule::Exogenous {
                    scale: 1.0,
                    rate: 1.0,
                },
                max_iters: 10_000,
                stop_tol: 0.0,
                record_every: 100,
            },
        )
        .unwrap();
        assert!(trace.best_value <= 1e-2, "best={}", trace.best_value);
    }

    #[test]
    fn constant_alpha_formula() {
        assert_eq!(constant_alpha(1.0, 1.0, 0).unwrap(), 1.0);
        assert_eq!(constant_alpha(2.0, 4.0, 3).unwrap(), 0.5);
        assert!((constant_alpha(1.0, 9.0, 99).unwrap() - 1.0 / 30.0).abs() < 1e-16);
        assert!(constant_alpha(0.0, 1.0, 0).is_err());
    }

    #[test]
    fn exogenous_alpha_clamps_eta() {
        assert_eq!(exogenous_alpha(0, 1.0, 1.0, &pt(&[0.5])), 1.0);
        assert_eq!(exogenous_alpha(0, 1.0, 1.0, &pt(&[4.0])), 0.25);
        assert_eq!(exogenous_alpha(3, 2.0, 1.0, &pt(&[2.0])), 0.25);
    }

    #[test]
    fn polyak_alpha_cases() {
        assert_eq!(
            polyak_alpha(1.0, 0.0, 1.0, &pt(&[1.0]), &pt(&[0.0])),
            PolyakStep::Alpha(1.0)
        );
        assert_eq!(
            polyak_alpha(2.0, 1.0, 1.5, &pt(&[1.0]), &pt(&[1.0])),
            PolyakStep::Alpha(0.375)
        );
        assert_eq!(
            polyak_alpha(1.0, 1.0, 1.0, &pt(&[1.0]), &pt(&[0.0])),
            PolyakStep::TargetReached
        );
        assert_eq!(
            polyak_alpha(1.0, 0.0, 1.0, &pt(&[0.0]), &pt(&[0.0])),
            PolyakStep::StationaryDenominator
        );
    }

    #[test]
    fn best_is_running_min() {
        assert_eq!(update_best(3.0, 5.0), 3.0);
        assert_eq!(update_best(3.0, 2.0), 2.0);
    }

    #[test]
    fn ergodic_recursion_matches_closed_form() {
        // alpha_i = 1, x = 0, 2, 4 -> mean 2
        let (e1, s1) = update_ergodic(&pt(&[0.0]), 1.0, 1.0, &pt(&[2.0]));
        let (e2, s2) = update_ergodic(&e1, s1, 1.0, &pt(&[4.0]));
        assert!((e2[0] - 2.0).abs() < 1e-15);
        assert_eq!(s2, 3.0);

        // constant iterates stay fixed
        let (e, _) = update_ergodic(&pt(&[7.0]), 2.5, 0.3, &pt(&[7.0]));
        assert_eq!(e, pt(&[7.0]));
    }

    #[test]
    fn ergodic_trace_matches_direct_sum() {
        let f = abs_1d();
        let g = ZeroFn { dim: 1 };
        let trace = run(
            &f,
            &g,
            &RunConfig {
                x0: pt(&[1.0]),
                rule: StepsizeRule::Exogenous {
                    scale: 0.7,
                    rate: 0.6,
                },
                max_iters: 200,
                stop_tol: 0.0,
                record_every: 1,
            },
        )
        .unwrap();
        let mut num = 0.0;
        let mut den = 0.0;
        for r in &trace.records {
            let x = r.x.as_ref().unwrap();
            num += r.alpha * x[0];
            den += r.alpha;
            let direct = num / den;
            let recursive = r.ergodic_x.as_ref().unwrap()[0];
            assert!(
                (direct - recursive).abs() <= 1e-12 * (1.0 + direct.abs()),
                "k={}",
                r.k
            );
        }
    }

    #[test]
    fn run_rejects_infeasible_x0() {
        let f = ZeroFn { dim: 1 };
        let g = IndicatorSet::new(ConvexSetSpec::NonnegOrthant { dim: 1 }).unwrap();
        let err = run(
            &f,
            &g,
            &RunConfig {
                x0: pt(&[-1.0]),
                rule: StepsizeRule::Constant { alpha: 1.0 },
                max_iters: 5,
                stop_tol: 0.0,
                record_every: 1,
            },
        )
        .unwrap_err();
        assert!(matches!(err, Error::ContractViolation { .. }));
    }

    #[test]
    fn polyak_stops_at_target() {
        // start at the minimizer of |x| with s = 0: numerator is zero at k=0
        let f = abs_1d();
        let g = ZeroFn { dim: 1 };
        let trace = run(
            &f,
            &g,
            &RunConfig {
                x0: pt(&[0.0]),
                rule: StepsizeRule::Polyak {
                    gamma: 1.0,
                    gamma_floor: 1.0,
                    target: TargetSchedule::Constant { value: 0.0 },
                },
                max_iters: 10,
                stop_tol: 0.0,
                record_every: 1,
            },
        )
        .unwrap();
        assert_eq!(trace.stop, StopReason::TargetReached);
        assert_eq!(trace.stop_iter, 0);
    }
}
