//! Independent ground-truth oracles for the problem gallery: exact LP solves
//! for the polyhedral families and grid refinement for low dimensions. These
//! never touch the solver iteration.

use microlp::{ComparisonOp, OptimizationDirection, Problem, Variable};

use crate::error::{Error, Result};
use crate::oracles::ConvexSetSpec;
use crate::point::Point;

const FREE: (f64, f64) = (f64::NEG_INFINITY, f64::INFINITY);

/// Minimizes ||A x - b||_1 + lambda ||x||_1 exactly via its LP formulation.
pub fn solve_lad_l1(a: &[Vec<f64>], b: &[f64], lambda: f64) -> Result<(f64, Point)> {
    let m = a.len();
    let n = a[0].len();
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let xp: Vec<Variable> = (0..n).map(|_| lp.add_var(lambda, (0.0, f64::INFINITY))).collect();
    let xm: Vec<Variable> = (0..n).map(|_| lp.add_var(lambda, (0.0, f64::INFINITY))).collect();
    let rp: Vec<Variable> = (0..m).map(|_| lp.add_var(1.0, (0.0, f64::INFINITY))).collect();
    let rm: Vec<Variable> = (0..m).map(|_| lp.add_var(1.0, (0.0, f64::INFINITY))).collect();
    for i in 0..m {
        // A x - r+ + r- = b  with x = x+ - x-
        let mut expr: Vec<(Variable, f64)> = Vec::with_capacity(2 * n + 2);
        for j in 0..n {
            expr.push((xp[j], a[i][j]));
            expr.push((xm[j], -a[i][j]));
        }
        expr.push((rp[i], -1.0));
        expr.push((rm[i], 1.0));
        lp.add_constraint(expr.as_slice(), ComparisonOp::Eq, b[i]);
    }
    let sol = lp
        .solve()
        .map_err(|e| Error::Lp(e.to_string()))?
        .into_solution()
        .map_err(|_| Error::Lp("lp solve interrupted".into()))?;
    let x: Vec<f64> = (0..n).map(|j| sol[xp[j]] - sol[xm[j]]).collect();
    Ok((sol.objective(), Point::from(x)))
}

/// Minimizes max_i (<a_i, x> + b_i) + <cost, x> over a polyhedral set via
/// the epigraph LP (`cost` may be empty for no linear term). Returns None
/// when the set is not polyhedral (caller falls back to the grid oracle).
pub fn solve_epigraph_max_affine(
    rows: &[Vec<f64>],
    offsets: &[f64],
    set: &ConvexSetSpec,
    cost: &[f64],
) -> Result<Option<(f64, Point)>> {
    if matches!(set, ConvexSetSpec::Ball { .. }) {
        return Ok(None);
    }
    let n = rows[0].len();
    let c = |j: usize| cost.get(j).copied().unwrap_or(0.0);
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let t = lp.add_var(1.0, FREE);
    let xs: Vec<Variable> = match set {
        ConvexSetSpec::Box { lower, upper } => (0..n)
            .map(|j| lp.add_var(c(j), (lower[j], upper[j])))
            .collect(),
        ConvexSetSpec::NonnegOrthant { .. } | ConvexSetSpec::Simplex { .. } => {
            (0..n).map(|j| lp.add_var(c(j), (0.0, f64::INFINITY))).collect()
        }
        _ => (0..n).map(|j| lp.add_var(c(j), FREE)).collect(),
    };
    match set {
        ConvexSetSpec::Halfspace { normal, offset } => {
            let expr: Vec<(Variable, f64)> = xs.iter().cloned().zip(normal.iter().cloned()).collect();
            lp.add_constraint(expr.as_slice(), ComparisonOp::Le, *offset);
        }
        ConvexSetSpec::AffineEquality { rows: eq_rows, rhs } => {
            for (r, &bv) in eq_rows.iter().zip(rhs) {
                let expr: Vec<(Variable, f64)> = xs.iter().cloned().zip(r.iter().cloned()).collect();
                lp.add_constraint(expr.as_slice(), ComparisonOp::Eq, bv);
            }
        }
        ConvexSetSpec::Simplex { .. } => {
            let expr: Vec<(Variable, f64)> = xs.iter().map(|&v| (v, 1.0)).collect();
            lp.add_constraint(expr.as_slice(), ComparisonOp::Eq, 1.0);
        }
        _ => {}
    }
    for (r, &bi) in rows.iter().zip(offsets) {
        // <a_i, x> - t <= -b_i
        let mut expr: Vec<(Variable, f64)> = xs.iter().cloned().zip(r.iter().cloned()).collect();
        expr.push((t, -1.0));
        lp.add_constraint(expr.as_slice(), ComparisonOp::Le, -bi);
    }
    let sol = lp
        .solve()
        .map_err(|e| Error::Lp(e.to_string()))?
        .into_solution()
        .map_err(|_| Error::Lp("lp solve interrupted".into()))?;
    let x: Vec<f64> = xs.iter().map(|&v| sol[v]).collect();
    Ok(Some((sol.objective(), Point::from(x))))
}

/// Grid minimization with iterative box refinement, for dimensions 1 and 2.
/// `feasible` filters grid nodes; the refinement recenters on the best
/// feasible node and shrinks the box each level.
pub fn grid_minimize(
    objective: &dyn Fn(&Point) -> Result<f64>,
    feasible: &dyn Fn(&Point) -> bool,
    lower: &[f64],
    upper: &[f64],
    nodes_per_axis: usize,
    refinements: usize,
) -> Result<(f64, Point)> {
    let dim = lower.len();
    if dim == 0 || dim > 2 {
        return Err(Error::config("grid oracle supports dimensions 1 and 2"));
    }
    let mut lo = lower.to_vec();
    let mut hi = upper.to_vec();
    let mut best_v = f64::INFINITY;
    let mut best_x: Option<Point> = None;
    for _ in 0..=refinements {
        let steps = nodes_per_axis - 1;
        let mut idx = vec![0usize; dim];
        loop {
            let coords: Vec<f64> = (0..dim)
                .map(|d| lo[d] + (hi[d] - lo[d]) * idx[d] as f64 / steps as f64)
                .collect();
            let p = Point::from(coords);
            if feasible(&p) {
                let v = objective(&p)?;
                if v < best_v {
                    best_v = v;
                    best_x = Some(p);
                }
            }
            // odometer increment
            let mut d = 0;
            loop {
                if d == dim {
                    break;
                }
                idx[d] += 1;
                if idx[d] <= steps {
                    break;
                }
                idx[d] = 0;
                d += 1;
            }
            if d == dim {
                break;
            }
        }
        let center = best_x
            .as_ref()
            .ok_or_else(|| Error::config("grid oracle found no feasible node"))?;
        for d in 0..dim {
            let half = (hi[d] - lo[d]) * 2.0 / steps as f64;
            lo[d] = center[d] - half;
            hi[d] = center[d] + half;
        }
    }
    Ok((best_v, best_x.unwrap()))
}
