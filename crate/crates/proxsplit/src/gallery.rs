//! Desk-scale problem instances of min f(x) + g(x) with independently
//! derived ground truth (LP, grid, or closed form — never a solver run).

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::lp;
use crate::oracles::{
    AssumptionConstants, ConvexSetSpec, FlatteningEnvelope, IndicatorSet, L1Residual, MaxAffine,
    NonnegL1, ProxOracle, ScaledL1, SubgradOracle, SumOfDistances, ZeroFn,
};
use crate::point::Point;

/// Desk-scale ceiling: the ground-truth oracles are exact only because the
/// instances stay this small.
pub const MAX_DIM: usize = 20;
pub const MAX_ROWS: usize = 40;

/// An optimal value and one minimizer, independently derived.
#[derive(Debug, Clone)]
pub struct OptimalInfo {
    pub s_star: f64,
    pub witness: Point,
}

#[derive(Debug, Clone)]
pub enum Truth {
    Known(OptimalInfo),
    /// The infimum is approached but never attained (empty solution set).
    Unattained { infimum: f64 },
}

impl Truth {
    pub fn known(&self) -> Option<&OptimalInfo> {
        match self {
            Truth::Known(info) => Some(info),
            Truth::Unattained { .. } => None,
        }
    }
}

#[derive(Clone)]
pub struct ProblemInstance {
    pub name: String,
    pub dim: usize,
    pub f: Arc<dyn SubgradOracle>,
    pub g: Arc<dyn ProxOracle>,
    pub truth: Truth,
    pub constants: AssumptionConstants,
}

impl std::fmt::Debug for ProblemInstance {
    fn fmt(&self, fm: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        fm.debug_struct("ProblemInstance")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("truth", &self.truth)
            .finish()
    }
}

impl ProblemInstance {
    /// (f+g)(x)
    pub fn objective(&self, x: &Point) -> Result<f64> {
        Ok(self.f.eval(x)? + self.g.eval(x)?)
    }
}

fn check_desk_scale(dim: usize, rows: usize) -> Result<()> {
    if dim == 0 || dim > MAX_DIM {
        return Err(Error::config(format!(
            "instance dimension {dim} outside desk scale 1..={MAX_DIM}"
        )));
    }
    if rows > MAX_ROWS {
        return Err(Error::config(format!(
            "instance row count {rows} exceeds desk scale {MAX_ROWS}"
        )));
    }
    Ok(())
}

/// min ||A x - b||_1 + lambda ||x||_1, ground truth from the LP oracle.
pub fn make_lad_l1(a: Vec<Vec<f64>>, b: Vec<f64>, lambda: f64) -> Result<ProblemInstance> {
    let f = L1Residual::new(a.clone(), b.clone())?;
    let dim = a[0].len();
    check_desk_scale(dim, a.len())?;
    let g = ScaledL1::new(lambda, dim)?;
    let (_, witness) = lp::solve_lad_l1(&a, &b, lambda)?;
    // recompute the optimal value through the shipped oracles so the witness
    // satisfies (f+g)(witness) = s_star exactly as the certificates see it
    let s_star = f.eval(&witness)? + SubgradOracle::eval(&g, &witness)?;
    let zeta = f.row_norm_sum();
    let rho = ProxOracle::subgrad_bound(&g);
    Ok(ProblemInstance {
        name: format!("lad_l1(m={}, n={}, lambda={})", a.len(), dim, lambda),
        dim,
        f: Arc::new(f),
        g: Arc::new(g),
        truth: Truth::Known(OptimalInfo { s_star, witness }),
        constants: AssumptionConstants { zeta, rho },
    })
}

/// Rough radius of a ball guaranteed to intersect the set, used to size the
/// grid oracle's initial box.
fn rough_radius(set: &ConvexSetSpec) -> f64 {
    match set {
        ConvexSetSpec::Box { lower, upper } => lower
            .iter()
            .chain(upper)
            .fold(1.0_f64, |m, &v| m.max(v.abs())),
        ConvexSetSpec::Ball { center, radius } => {
            center.iter().fold(0.0_f64, |m, &v| m.max(v.abs())) + radius
        }
        ConvexSetSpec::Halfspace { offset, normal } => {
            let n = Point::from(normal.clone()).norm();
            1.0 + offset.abs() / n
        }
        ConvexSetSpec::AffineEquality { rhs, .. } => {
            1.0 + rhs.iter().fold(0.0_f64, |m, &v| m.max(v.abs()))
        }
        ConvexSetSpec::Simplex { .. } | ConvexSetSpec::NonnegOrthant { .. } => 1.0,
    }
}

/// min max_i(<a_i, x> + b_i) s.t. x in C, truth from the epigraph LP for
/// polyhedral C and from grid refinement otherwise (dim <= 2).
pub fn make_constrained_max_affine(
    rows: Vec<Vec<f64>>,
    offsets: Vec<f64>,
    set: ConvexSetSpec,
) -> Result<ProblemInstance> {
    let f = MaxAffine::new(rows.clone(), offsets.clone())?;
    set.validate()?;
    let dim = set.dim();
    check_desk_scale(dim, rows.len())?;
    if rows[0].len() != dim {
        return Err(Error::DimensionMismatch {
            context: "make_constrained_max_affine",
            expected: dim,
            got: rows[0].len(),
        });
    }
    let g = IndicatorSet::new(set.clone())?;
    let witness = match lp::solve_epigraph_max_affine(&rows, &offsets, &set, &[])? {
        Some((_, x)) => x,
        None => {
            // non-polyhedral set: grid refinement, low dimension only
            if dim > 2 {
                return Err(Error::config(
                    "grid ground truth for non-polyhedral sets needs dim <= 2",
                ));
            }
            let r = rough_radius(&set) + 1.0;
            let obj = |p: &Point| -> Result<f64> { f.eval(p) };
            let feas = |p: &Point| set.member(p, 1e-12);
            let (_, x) = lp::grid_minimize(&obj, &feas, &vec![-r; dim], &vec![r; dim], 65, 24)?;
            // land exactly on the set
            set.project(&x)?
        }
    };
    let s_star = f.eval(&witness)?;
    let zeta = f.max_row_norm().max(f64::MIN_POSITIVE);
    Ok(ProblemInstance {
        name: format!("constrained_max_affine(pieces={}, n={dim})", rows.len()),
        dim,
        f: Arc::new(f),
        g: Arc::new(g),
        truth: Truth::Known(OptimalInfo { s_star, witness }),
        constants: AssumptionConstants { zeta, rho: 0.0 },
    })
}

/// min sum_i dist(x, C_i) s.t. x in g_set (None means unconstrained), truth
/// by grid refinement in dim <= 2.
pub fn make_sum_of_distances(
    sets: Vec<ConvexSetSpec>,
    g_set: Option<ConvexSetSpec>,
) -> Result<ProblemInstance> {
    let f = SumOfDistances::new(sets.clone())?;
    let dim = sets[0].dim();
    check_desk_scale(dim, sets.len())?;
    if dim > 2 {
        return Err(Error::config("sum-of-distances ground truth needs dim <= 2"));
    }
    let g: Arc<dyn ProxOracle> = match &g_set {
        None => Arc::new(ZeroFn { dim }),
        Some(s) => {
            s.validate()?;
            if s.dim() != dim {
                return Err(Error::config("g_set dimension mismatch"));
            }
            Arc::new(IndicatorSet::new(s.clone())?)
        }
    };
    let r = sets
        .iter()
        .map(rough_radius)
        .chain(g_set.iter().map(rough_radius))
        .fold(1.0_f64, f64::max)
        + 1.0;
    let g_for_grid = g_set.clone();
    let obj = |p: &Point| -> Result<f64> { f.eval(p) };
    let feas = |p: &Point| match &g_for_grid {
        None => true,
        Some(s) => s.member(p, 1e-12),
    };
    let (_, raw) = lp::grid_minimize(&obj, &feas, &vec![-r; dim], &vec![r; dim], 65, 24)?;
    let witness = match &g_set {
        None => raw,
        Some(s) => s.project(&raw)?,
    };
    let s_star = f.eval(&witness)? + g.eval(&witness)?;
    Ok(ProblemInstance {
        name: format!("sum_of_distances(sets={}, n={dim})", sets.len()),
        dim,
        f: Arc::new(f),
        g,
        truth: Truth::Known(OptimalInfo { s_star, witness }),
        constants: AssumptionConstants {
            zeta: sets.len() as f64,
            rho: 0.0,
        },
    })
}

/// Simple g0 choices whose composite prox with the orthant stays exact.
#[derive(Debug, Clone, PartialEq)]
pub enum DualRegularizer {
    None,
    L1,
    Box { lower: Vec<f64>, upper: Vec<f64> },
}

/// Dual of a finitely supported constrained problem: f(x) is the max over
/// candidates y_j of -h0(y_j) - sum_i x_i h_i(y_j), g is the indicator of
/// the nonnegative orthant plus an optional simple regularizer.
/// `h_matrix[j][i]` holds h_i(y_j); `h0_values[j]` holds h0(y_j).
pub fn make_dual_finite(
    h0_values: Vec<f64>,
    h_matrix: Vec<Vec<f64>>,
    lambda: f64,
    g0: DualRegularizer,
) -> Result<ProblemInstance> {
    if h_matrix.is_empty() || h_matrix.len() != h0_values.len() {
        return Err(Error::config("empty or inconsistent candidate set"));
    }
    let dim = h_matrix[0].len();
    check_desk_scale(dim, h_matrix.len())?;
    let rows: Vec<Vec<f64>> = h_matrix
        .iter()
        .map(|r| r.iter().map(|v| -v).collect())
        .collect();
    let offsets: Vec<f64> = h0_values.iter().map(|v| -v).collect();
    let f = MaxAffine::new(rows.clone(), offsets.clone())?;

    let (g, truth_set, cost): (Arc<dyn ProxOracle>, ConvexSetSpec, Vec<f64>) = match &g0 {
        DualRegularizer::None => (
            Arc::new(IndicatorSet::new(ConvexSetSpec::NonnegOrthant { dim })?),
            ConvexSetSpec::NonnegOrthant { dim },
            vec![],
        ),
        DualRegularizer::L1 => (
            Arc::new(NonnegL1::new(lambda, dim)?),
            ConvexSetSpec::NonnegOrthant { dim },
            vec![lambda; dim],
        ),
        DualRegularizer::Box { lower, upper } => {
            let clamped = ConvexSetSpec::Box {
                lower: lower.iter().map(|v| v.max(0.0)).collect(),
                upper: upper.clone(),
            };
            clamped.validate().map_err(|_| {
                Error::config("dual regularizer box does not intersect the orthant")
            })?;
            (
                Arc::new(IndicatorSet::new(clamped.clone())?),
                clamped,
                vec![],
            )
        }
    };

    let (_, witness) = lp::solve_epigraph_max_affine(&rows, &offsets, &truth_set, &cost)?
        .expect("polyhedral set always has an epigraph LP");
    let s_star = f.eval(&witness)? + g.eval(&witness)?;
    let rho = g.subgrad_bound();
    Ok(ProblemInstance {
        name: format!(
            "dual_finite(candidates={}, n={dim}, lambda={lambda})",
            h_matrix.len()
        ),
        dim,
        f: Arc::new(f),
        g,
        truth: Truth::Known(OptimalInfo { s_star, witness }),
        constants: AssumptionConstants {
            zeta: MaxAffine::new(rows, offsets)?.max_row_norm().max(f64::MIN_POSITIVE),
            rho,
        },
    })
}

/// 1-D instance with empty solution set: the objective decreases strictly
/// toward an infimum of 0 that is never attained, so iterates must diverge.
pub fn make_unattained_inf() -> ProblemInstance {
    ProblemInstance {
        name: "unattained_inf".into(),
        dim: 1,
        f: Arc::new(FlatteningEnvelope),
        g: Arc::new(ZeroFn { dim: 1 }),
        truth: Truth::Unattained {
            infimum: FlatteningEnvelope::INFIMUM,
        },
        constants: AssumptionConstants { zeta: 1.0, rho: 0.0 },
    }
}

/// Deterministic pseudo-random LAD instance at the acceptance desk scale.
pub fn lad_l1_desk(m: usize, n: usize, lambda: f64, seed: u64) -> Result<ProblemInstance> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let a: Vec<Vec<f64>> = (0..m)
        .map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let x_ref: Vec<f64> = (0..n)
        .map(|j| if j % 3 == 0 { rng.gen_range(-2.0..2.0) } else { 0.0 })
        .collect();
    let b: Vec<f64> = a
        .iter()
        .map(|r| {
            r.iter().zip(&x_ref).map(|(av, xv)| av * xv).sum::<f64>() + rng.gen_range(-0.1..0.1)
        })
        .collect();
    make_lad_l1(a, b, lambda)
}
