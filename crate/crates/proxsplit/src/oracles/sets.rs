//! Closed convex sets with exact orthogonal projection and normal-cone
//! membership tests.

use crate::error::{Error, Result};
use crate::point::Point;
use serde::{Deserialize, Serialize};

/// Membership/inclusion tolerance: absolute 1e-8 plus relative 1e-8*(1+scale).
pub fn membership_tol(scale: f64) -> f64 {
    1e-8 + 1e-8 * (1.0 + scale.abs())
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ConvexSetSpec {
    Box {
        lower: Vec<f64>,
        upper: Vec<f64>,
    },
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
    /// { x : <normal, x> <= offset }
    Halfspace {
        normal: Vec<f64>,
        offset: f64,
    },
    /// { x : rows * x = rhs }, rows with full row rank
    AffineEquality {
        rows: Vec<Vec<f64>>,
        rhs: Vec<f64>,
    },
    /// Unit simplex { x >= 0, sum x = 1 }
    Simplex {
        dim: usize,
    },
    NonnegOrthant {
        dim: usize,
    },
}

impl ConvexSetSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            ConvexSetSpec::Box { lower, upper } => {
                if lower.len() != upper.len() {
                    return Err(Error::config("box bounds have mismatched dimensions"));
                }
                if lower.is_empty() {
                    return Err(Error::config("box has dimension zero"));
                }
                for (i, (&l, &u)) in lower.iter().zip(upper).enumerate() {
                    if l.is_nan() || u.is_nan() {
                        return Err(Error::config(format!("box bound {i} is NaN")));
                    }
                    if l > u {
                        return Err(Error::config(format!(
                            "empty box: lower[{i}]={l} > upper[{i}]={u}"
                        )));
                    }
                }
                Ok(())
            }
            ConvexSetSpec::Ball { center, radius } => {
                Point::new(center.clone())?;
                if !(*radius > 0.0) {
                    return Err(Error::config(format!("ball radius must be positive, got {radius}")));
                }
                Ok(())
            }
            ConvexSetSpec::Halfspace { normal, offset } => {
                let n = Point::new(normal.clone())?;
                if !offset.is_finite() {
                    return Err(Error::config("halfspace offset is not finite"));
                }
                if n.norm() == 0.0 {
                    return Err(Error::config("halfspace normal is zero"));
                }
                Ok(())
            }
            ConvexSetSpec::AffineEquality { rows, rhs } => {
                if rows.is_empty() || rows.len() != rhs.len() {
                    return Err(Error::config("affine equality rows/rhs mismatch"));
                }
                let dim = rows[0].len();
                for r in rows {
                    if r.len() != dim {
                        return Err(Error::config("affine equality rows have ragged dimensions"));
                    }
                    Point::new(r.clone())?;
                }
                // full row rank needed for the projection formula
                let gram = gram_matrix(rows);
                if solve_dense(&gram, &vec![0.0; rows.len()]).is_err() {
                    return Err(Error::config("affine equality rows are rank deficient"));
                }
                Ok(())
            }
            ConvexSetSpec::Simplex { dim } | ConvexSetSpec::NonnegOrthant { dim } => {
                if *dim == 0 {
                    return Err(Error::config("set dimension must be positive"));
                }
                Ok(())
            }
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ConvexSetSpec::Box { lower, .. } => lower.len(),
            ConvexSetSpec::Ball { center, .. } => center.len(),
            ConvexSetSpec::Halfspace { normal, .. } => normal.len(),
            ConvexSetSpec::AffineEquality { rows, .. } => rows[0].len(),
            ConvexSetSpec::Simplex { dim } | ConvexSetSpec::NonnegOrthant { dim } => *dim,
        }
    }

    /// Orthogonal projection onto the set.
    pub fn project(&self, z: &Point) -> Result<Point> {
        z.check_finite("project")?;
        z.check_dim(self.dim(), "project")?;
        let out = match self {
            ConvexSetSpec::Box { lower, upper } => Point::from(
                z.coords()
                    .iter()
                    .zip(lower.iter().zip(upper))
                    .map(|(&v, (&l, &u))| v.clamp(l, u))
                    .collect::<Vec<_>>(),
            ),
            ConvexSetSpec::Ball { center, radius } => {
                let c = Point::from(center.clone());
                let d = z.sub(&c);
                let n = d.norm();
                if n <= *radius {
                    z.clone()
                } else {
                    c.add_scaled(radius / n, &d)
                }
            }
            ConvexSetSpec::Halfspace { normal, offset } => {
                let a = Point::from(normal.clone());
                let viol = a.dot(z) - offset;
                if viol <= 0.0 {
                    z.clone()
                } else {
                    z.add_scaled(-viol / a.dot(&a), &a)
                }
            }
            ConvexSetSpec::AffineEquality { rows, rhs } => {
                // P(z) = z - A^T (A A^T)^{-1} (A z - rhs)
                let resid: Vec<f64> = rows
                    .iter()
                    .zip(rhs)
                    .map(|(r, &b)| Point::from(r.clone()).dot(z) - b)
                    .collect();
                let gram = gram_matrix(rows);
                let mu = solve_dense(&gram, &resid)?;
                let mut out = z.coords().to_vec();
                for (r, &m) in rows.iter().zip(&mu) {
                    for (o, &rj) in out.iter_mut().zip(r) {
                        *o -= m * rj;
                    }
                }
                Point::from(out)
            }
            ConvexSetSpec::Simplex { .. } => project_simplex(z),
            ConvexSetSpec::NonnegOrthant { .. } => {
                Point::from(z.coords().iter().map(|&v| v.max(0.0)).collect::<Vec<_>>())
            }
        };
        Ok(out)
    }

    pub fn member(&self, x: &Point, tol: f64) -> bool {
        if x.dim() != self.dim() {
            return false;
        }
        match self {
            ConvexSetSpec::Box { lower, upper } => x
                .coords()
                .iter()
                .zip(lower.iter().zip(upper))
                .all(|(&v, (&l, &u))| v >= l - tol && v <= u + tol),
            ConvexSetSpec::Ball { center, radius } => {
                x.sub(&Point::from(center.clone())).norm() <= radius + tol
            }
            ConvexSetSpec::Halfspace { normal, offset } => {
                Point::from(normal.clone()).dot(x) <= offset + tol
            }
            ConvexSetSpec::AffineEquality { rows, rhs } => rows
                .iter()
                .zip(rhs)
                .all(|(r, &b)| (Point::from(r.clone()).dot(x) - b).abs() <= tol),
            ConvexSetSpec::Simplex { .. } => {
                x.coords().iter().all(|&v| v >= -tol)
                    && (x.coords().iter().sum::<f64>() - 1.0).abs() <= tol
            }
            ConvexSetSpec::NonnegOrthant { .. } => x.coords().iter().all(|&v| v >= -tol),
        }
    }

    /// Whether `w` belongs to the normal cone of the set at `x` (x assumed a
    /// member up to `tol`). Analytic per set family, independent of the
    /// projection routine.
    pub fn normal_cone_contains(&self, w: &Point, x: &Point, tol: f64) -> Result<bool> {
        w.check_finite("normal_cone_contains")?;
        w.check_dim(self.dim(), "normal_cone_contains")?;
        if !self.member(x, tol) {
            return Ok(false);
        }
        let ok = match self {
            ConvexSetSpec::Box { lower, upper } => x
                .coords()
                .iter()
                .zip(w.coords())
                .zip(lower.iter().zip(upper))
                .all(|((&xi, &wi), (&l, &u))| {
                    let at_lower = xi <= l + tol;
                    let at_upper = xi >= u - tol;
                    match (at_lower, at_upper) {
                        (true, true) => true,
                        (true, false) => wi <= tol,
                        (false, true) => wi >= -tol,
                        (false, false) => wi.abs() <= tol,
                    }
                }),
            ConvexSetSpec::Ball { center, radius } => {
                let d = x.sub(&Point::from(center.clone()));
                if d.norm() < radius - tol {
                    w.norm() <= tol
                } else {
                    // w = t * d with t >= 0
                    let dd = d.dot(&d);
                    if dd == 0.0 {
                        // degenerate: x at center on the boundary cannot happen (r > 0)
                        w.norm() <= tol
                    } else {
                        let t = w.dot(&d) / dd;
                        t >= -tol && w.add_scaled(-t, &d).norm() <= tol * (1.0 + w.norm())
                    }
                }
            }
            ConvexSetSpec::Halfspace { normal, offset } => {
                let a = Point::from(normal.clone());
                if a.dot(x) < offset - tol {
                    w.norm() <= tol
                } else {
                    let t = w.dot(&a) / a.dot(&a);
                    t >= -tol && w.add_scaled(-t, &a).norm() <= tol * (1.0 + w.norm())
                }
            }
            ConvexSetSpec::AffineEquality { rows, .. } => {
                // w in range(A^T): least-squares residual of A^T mu = w
                let gram = gram_matrix(rows);
                let aw: Vec<f64> = rows
                    .iter()
                    .map(|r| Point::from(r.clone()).dot(w))
                    .collect();
                let mu = solve_dense(&gram, &aw)?;
                let mut recon = vec![0.0; self.dim()];
                for (r, &m) in rows.iter().zip(&mu) {
                    for (o, &rj) in recon.iter_mut().zip(r) {
                        *o += m * rj;
                    }
                }
                w.sub(&Point::from(recon)).norm() <= tol * (1.0 + w.norm())
            }
            ConvexSetSpec::Simplex { .. } => {
                // support function over vertices: max_i w_i <= <w, x>
                let wmax = w.coords().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                wmax - w.dot(x) <= tol * (1.0 + w.norm())
            }
            ConvexSetSpec::NonnegOrthant { .. } => x
                .coords()
                .iter()
                .zip(w.coords())
                .all(|(&xi, &wi)| if xi > tol { wi.abs() <= tol } else { wi <= tol }),
        };
        Ok(ok)
    }
}

/// Sort-based exact projection onto the unit simplex.
fn project_simplex(z: &Point) -> Point {
    let mut sorted = z.coords().to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &v) in sorted.iter().enumerate() {
        cumsum += v;
        let t = (cumsum - 1.0) / (j as f64 + 1.0);
        if j + 1 == sorted.len() || sorted[j + 1] <= t {
            theta = t;
            break;
        }
    }
    Point::from(
        z.coords()
            .iter()
            .map(|&v| (v - theta).max(0.0))
            .collect::<Vec<_>>(),
    )
}

fn gram_matrix(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let m = rows.len();
    let mut g = vec![vec![0.0; m]; m];
    for i in 0..m {
        for j in 0..m {
            g[i][j] = rows[i].iter().zip(&rows[j]).map(|(a, b)| a * b).sum();
        }
    }
    g
}

/// Gaussian elimination with partial pivoting for small dense systems.
pub(crate) fn solve_dense(a: &[Vec<f64>], b: &[f64]) -> Result<Vec<f64>> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a.iter().cloned().collect();
    let mut rhs = b.to_vec();
    for col in 0..n {
        let (piv, pv) = (col..n)
            .map(|r| (r, m[r][col].abs()))
            .max_by(|x, y| x.1.partial_cmp(&y.1).unwrap())
            .unwrap();
        if pv < 1e-12 {
            return Err(Error::config("singular linear system in set geometry"));
        }
        m.swap(col, piv);
        rhs.swap(col, piv);
        for r in col + 1..n {
            let f = m[r][col] / m[col][col];
            for c in col..n {
                m[r][c] -= f * m[col][c];
            }
            rhs[r] -= f * rhs[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| m[r][c] * x[c]).sum();
        x[r] = (rhs[r] - s) / m[r][r];
    }
    Ok(x)
}
