//! Experiment configuration: one versioned TOML file per experiment, with
//! unknown keys rejected so schedule-parameter typos cannot silently
//! invalidate a certificate run.

use serde::Deserialize;

use crate::certificates::GroundTruth;
use crate::error::{Error, Result};
use crate::gallery::{self, ProblemInstance};
use crate::oracles::ConvexSetSpec;
use crate::point::Point;
use crate::solver::{StepsizeRule, TargetSchedule};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub problem: ProblemSpec,
    pub rule: RuleSpec,
    pub run: RunSpec,
    #[serde(default)]
    pub certificates: CertificatesSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::config(format!("config parse error: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        self.run.validate()?;
        self.certificates.validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSpec {
    LadL1 {
        a: Vec<Vec<f64>>,
        b: Vec<f64>,
        lambda: f64,
    },
    /// Deterministic pseudo-random instance at a given desk scale.
    LadL1Desk {
        m: usize,
        n: usize,
        lambda: f64,
        seed: u64,
    },
    ConstrainedMaxAffine {
        rows: Vec<Vec<f64>>,
        offsets: Vec<f64>,
        set: ConvexSetSpec,
    },
    SumOfDistances {
        sets: Vec<ConvexSetSpec>,
        g_set: Option<ConvexSetSpec>,
    },
    DualFinite {
        h0_values: Vec<f64>,
        h_matrix: Vec<Vec<f64>>,
        #[serde(default)]
        lambda: f64,
        #[serde(default)]
        g0: DualRegSpec,
    },
    UnattainedInf,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DualRegSpec {
    #[default]
    None,
    L1,
    Box {
        lower: Vec<f64>,
        upper: Vec<f64>,
    },
}

impl ProblemSpec {
    pub fn build(&self) -> Result<ProblemInstance> {
        match self {
            ProblemSpec::LadL1 { a, b, lambda } => {
                if *lambda < 0.0 {
                    return Err(Error::config("problem.lambda must be nonnegative"));
                }
                gallery::make_lad_l1(a.clone(), b.clone(), *lambda)
            }
            ProblemSpec::LadL1Desk { m, n, lambda, seed } => {
                if *lambda < 0.0 {
                    return Err(Error::config("problem.lambda must be nonnegative"));
                }
                gallery::lad_l1_desk(*m, *n, *lambda, *seed)
            }
            ProblemSpec::ConstrainedMaxAffine { rows, offsets, set } => {
                gallery::make_constrained_max_affine(rows.clone(), offsets.clone(), set.clone())
            }
            ProblemSpec::SumOfDistances { sets, g_set } => {
                gallery::make_sum_of_distances(sets.clone(), g_set.clone())
            }
            ProblemSpec::DualFinite { h0_values, h_matrix, lambda, g0 } => {
                if *lambda < 0.0 {
                    return Err(Error::config("problem.lambda must be nonnegative"));
                }
                let reg = match g0 {
                    DualRegSpec::None => gallery::DualRegularizer::None,
                    DualRegSpec::L1 => gallery::DualRegularizer::L1,
                    DualRegSpec::Box { lower, upper } => gallery::DualRegularizer::Box {
                        lower: lower.clone(),
                        upper: upper.clone(),
                    },
                };
                gallery::make_dual_finite(h0_values.clone(), h_matrix.clone(), *lambda, reg)
            }
            ProblemSpec::UnattainedInf => Ok(gallery::make_unattained_inf()),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RuleSpec {
    Constant {
        alpha: f64,
    },
    /// Optimal constant stepsize for the given horizon, resolved by the
    /// two-pass protocol against the instance's ground truth.
    ConstantOptimal {
        horizon: usize,
        #[serde(default = "default_max_passes")]
        max_passes: usize,
    },
    Exogenous {
        scale: f64,
        rate: f64,
    },
    Polyak {
        gamma: f64,
        gamma_floor: f64,
        target: TargetSpec,
    },
}

fn default_max_passes() -> usize {
    30
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetSpec {
    /// s_k = s* from the instance's ground truth.
    Optimal,
    /// s_k = s* + offset (negative offsets give the inconsistent regime).
    OptimalOffset { offset: f64 },
    Constant { value: f64 },
    OffsetDecay { limit: f64, scale: f64, rate: f64 },
}

impl TargetSpec {
    pub fn resolve(&self, truth: Option<&GroundTruth>) -> Result<TargetSchedule> {
        let schedule = match self {
            TargetSpec::Optimal => TargetSchedule::Constant {
                value: require_truth(truth, "target kind \"optimal\"")?.s_star,
            },
            TargetSpec::OptimalOffset { offset } => TargetSchedule::Constant {
                value: require_truth(truth, "target kind \"optimal_offset\"")?.s_star + offset,
            },
            TargetSpec::Constant { value } => TargetSchedule::Constant { value: *value },
            TargetSpec::OffsetDecay { limit, scale, rate } => TargetSchedule::OffsetDecay {
                limit: *limit,
                scale: *scale,
                rate: *rate,
            },
        };
        schedule.validate()?;
        Ok(schedule)
    }
}

fn require_truth<'a>(truth: Option<&'a GroundTruth>, what: &str) -> Result<&'a GroundTruth> {
    truth.ok_or_else(|| {
        Error::config(format!("{what} needs a problem with known ground truth"))
    })
}

impl RuleSpec {
    /// Resolves truth-dependent parameters into a concrete stepsize rule;
    /// `ConstantOptimal` is handled by the harness (it needs its own runs).
    pub fn resolve(&self, truth: Option<&GroundTruth>) -> Result<Option<StepsizeRule>> {
        let rule = match self {
            RuleSpec::Constant { alpha } => StepsizeRule::Constant { alpha: *alpha },
            RuleSpec::ConstantOptimal { .. } => return Ok(None),
            RuleSpec::Exogenous { scale, rate } => StepsizeRule::Exogenous {
                scale: *scale,
                rate: *rate,
            },
            RuleSpec::Polyak { gamma, gamma_floor, target } => StepsizeRule::Polyak {
                gamma: *gamma,
                gamma_floor: *gamma_floor,
                target: target.resolve(truth)?,
            },
        };
        rule.validate()?;
        Ok(Some(rule))
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub x0: X0Spec,
    pub max_iters: usize,
    #[serde(default)]
    pub stop_tol: f64,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_record_every() -> usize {
    1
}

impl RunSpec {
    fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::config("run.max_iters must be positive"));
        }
        if self.record_every == 0 {
            return Err(Error::config("run.record_every must be positive"));
        }
        if !(self.stop_tol >= 0.0) {
            return Err(Error::config("run.stop_tol must be nonnegative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum X0Spec {
    Point { coords: Vec<f64> },
    /// scale * (1, ..., 1), projected into dom(g) via the prox.
    Ones { scale: f64 },
    /// Uniform in [low, high]^dim from the run seed, projected into dom(g).
    Random { low: f64, high: f64 },
}

impl X0Spec {
    pub fn resolve(
        &self,
        g: &dyn crate::oracles::ProxOracle,
        dim: usize,
        seed: u64,
    ) -> Result<Point> {
        use rand::{Rng, SeedableRng};
        let raw = match self {
            X0Spec::Point { coords } => Point::new(coords.clone())?,
            X0Spec::Ones { scale } => Point::new(vec![*scale; dim])?,
            X0Spec::Random { low, high } => {
                if !(low < high) {
                    return Err(Error::config("run.x0 random range needs low < high"));
                }
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
                Point::new((0..dim).map(|_| rng.gen_range(*low..*high)).collect())?
            }
        };
        raw.check_dim(dim, "run.x0")?;
        match self {
            // explicit points must already be feasible; synthesized ones are
            // pushed into dom(g) through the prox
            X0Spec::Point { .. } => {
                if !g.domain_test(&raw) {
                    return Err(Error::config("run.x0 point is outside dom(g)"));
                }
                Ok(raw)
            }
            _ => g.prox(1.0, &raw),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificatesSpec {
    /// Check names, or the single entry "all" (the default) for every check
    /// applicable to the rule.
    #[serde(default = "default_checks")]
    pub checks: Vec<String>,
    #[serde(default = "default_probes")]
    pub probes: usize,
    /// Finite-horizon tolerance for the inconsistent-target limit statement.
    #[serde(default = "default_horizon_tol")]
    pub inconsistent_horizon_tol: f64,
    /// Negative control: multiplies every recorded stepsize before checking,
    /// which must break the stepsize-sensitive certificates.
    pub corrupt_alpha: Option<f64>,
}

fn default_checks() -> Vec<String> {
    vec!["all".to_string()]
}

fn default_probes() -> usize {
    50
}

fn default_horizon_tol() -> f64 {
    1e-6
}

impl Default for CertificatesSpec {
    fn default() -> Self {
        CertificatesSpec {
            checks: default_checks(),
            probes: default_probes(),
            inconsistent_horizon_tol: default_horizon_tol(),
            corrupt_alpha: None,
        }
    }
}

pub const KNOWN_CHECKS: &[&str] = &[
    "key_inequality",
    "best_value_bound",
    "ergodic_bound",
    "constant_rate",
    "exogenous_quasifejer",
    "exogenous_best_bound",
    "polyak_fejer",
    "polyak_complexity",
    "inconsistent_target",
    "summary_corollary",
];

impl CertificatesSpec {
    fn validate(&self) -> Result<()> {
        for c in &self.checks {
            if c != "all" && !KNOWN_CHECKS.contains(&c.as_str()) {
                return Err(Error::config(format!(
                    "unknown certificate \"{c}\" in certificates.checks"
                )));
            }
        }
        if let Some(f) = self.corrupt_alpha {
            if !(f > 0.0) || !f.is_finite() {
                return Err(Error::config("certificates.corrupt_alpha must be positive"));
            }
        }
        Ok(())
    }

    pub fn wants(&self, name: &str) -> bool {
        self.checks.iter().any(|c| c == "all" || c == name)
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    /// Trace CSV path relative to the output root; defaults to
    /// "<config stem>_trace.csv".
    pub trace: Option<String>,
    /// Certificate report path; defaults to "<config stem>_report.txt".
    pub report: Option<String>,
}
