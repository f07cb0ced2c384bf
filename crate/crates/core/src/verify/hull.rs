//! Minimal-norm element of a convex hull and the linear Lyapunov variant
//! used near 0-dimensional strata that are not Clarke critical.

use crate::catalog::Objective;
use crate::descent::Trajectory;
use crate::error::{Error, Result};
use crate::geometry::{LinearMap, Point, Vector};
use crate::selection::Interval;
use serde::{Deserialize, Serialize};

/// Norm below which the minimal element is treated as zero.
pub const ZERO_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HullPoint {
    pub point: Vector,
    /// Convex weights over the input vectors.
    pub weights: Vec<f64>,
}

/// Projection of the origin onto the affine hull of `vs`, as barycentric
/// weights, or `None` if the family is affinely dependent.
fn affine_min_norm(vs: &[&Vector]) -> Option<Vec<f64>> {
    let m = vs.len();
    let mut rows = vec![vec![0.0; m + 1]; m + 1];
    for i in 0..m {
        for j in 0..m {
            rows[i][j] = vs[i].dot(vs[j]);
        }
        rows[i][m] = 1.0;
        rows[m][i] = 1.0;
    }
    let a = LinearMap::from_rows(&rows).ok()?;
    let scale = 1.0 + a.max_abs();
    let inv = a.scale(1.0 / scale).inverse()?.scale(1.0 / scale);
    let mut rhs = Point::zeros(m + 1);
    rhs.coords_mut()[m] = 1.0;
    let sol = inv.apply(&rhs);
    let w: Vec<f64> = sol.coords()[..m].to_vec();
    // Reject nearly dependent families whose solve is unreliable.
    let point = combine(vs, &w);
    let residual = vs
        .iter()
        .map(|v| (v.dot(&point) - point.norm_sq()).abs())
        .fold(0.0, f64::max);
    if residual > 1e-8 * (1.0 + vs.iter().map(|v| v.norm_sq()).fold(0.0, f64::max)) {
        return None;
    }
    Some(w)
}

fn combine(vs: &[&Vector], w: &[f64]) -> Vector {
    let mut p = Point::zeros(vs[0].dim());
    for (v, wi) in vs.iter().zip(w) {
        p = p.add_scaled(*wi, v);
    }
    p
}

/// Minimal-norm element of `conv(vs)` by enumerating every affinely
/// independent subset of size at most `d + 1` (exact for small inputs).
pub fn min_norm_hull(vs: &[Vector]) -> Result<HullPoint> {
    let Some(first) = vs.first() else {
        return Err(Error::Empty(
            "min_norm_hull needs at least one vector".into(),
        ));
    };
    let d = first.dim();
    if let Some(v) = vs.iter().find(|v| v.dim() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: v.dim(),
        });
    }
    let n = vs.len();
    let max_size = (d + 1).min(n);
    let mut best: Option<(f64, Vec<usize>, Vec<f64>)> = None;
    let mut subset: Vec<usize> = Vec::new();
    fn visit(
        start: usize,
        n: usize,
        max_size: usize,
        subset: &mut Vec<usize>,
        vs: &[Vector],
        best: &mut Option<(f64, Vec<usize>, Vec<f64>)>,
    ) {
        if !subset.is_empty() {
            let refs: Vec<&Vector> = subset.iter().map(|&i| &vs[i]).collect();
            if let Some(w) = affine_min_norm(&refs) {
                if w.iter().all(|&x| x >= -1e-12) {
                    let w: Vec<f64> = {
                        let clipped: Vec<f64> = w.iter().map(|x| x.max(0.0)).collect();
                        let s: f64 = clipped.iter().sum();
                        clipped.iter().map(|x| x / s).collect()
                    };
                    let norm = combine(&refs, &w).norm();
                    if best.as_ref().is_none_or(|b| norm < b.0 - 1e-15) {
                        *best = Some((norm, subset.clone(), w));
                    }
                }
            }
        }
        if subset.len() == max_size {
            return;
        }
        for i in start..n {
            subset.push(i);
            visit(i + 1, n, max_size, subset, vs, best);
            subset.pop();
        }
    }
    visit(0, n, max_size, &mut subset, vs, &mut best);
    let (_, idx, w) = best.expect("singletons are always affinely independent");
    let mut weights = vec![0.0; n];
    for (i, wi) in idx.iter().zip(&w) {
        weights[*i] = *wi;
    }
    let refs: Vec<&Vector> = idx.iter().map(|&i| &vs[i]).collect();
    Ok(HullPoint {
        point: combine(&refs, &w),
        weights,
    })
}

/// Deterministic subgradient samples in the closed ball of radius `delta`.
pub fn ball_subgradients(f: &dyn Objective, z: &Point, delta: f64) -> Vec<Vector> {
    let d = z.dim();
    let mut pts = vec![z.clone()];
    let dirs: Vec<Point> = if d == 2 {
        (0..16)
            .map(|i| {
                let t = i as f64 * std::f64::consts::PI / 8.0;
                Point::from([t.cos(), t.sin()])
            })
            .collect()
    } else {
        (0..d)
            .flat_map(|i| {
                [1.0, -1.0].into_iter().map(move |s| {
                    let mut e = vec![0.0; d];
                    e[i] = s;
                    Point::new(e).expect("finite")
                })
            })
            .collect()
    };
    for r in [0.1, 0.5, 1.0] {
        for u in &dirs {
            pts.push(z.add_scaled(r * delta, u));
        }
    }
    let mut out: Vec<Vector> = Vec::new();
    for p in pts {
        let v = f.subgradient(&p);
        if !out.iter().any(|w| w.distance(&v) <= 1e-12) {
            out.push(v);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpuriousRow {
    pub k: usize,
    pub g: f64,
    pub decrease: f64,
    pub required: f64,
    pub in_ball: bool,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpuriousLedger {
    pub v: Vector,
    pub delta: f64,
    pub rows: Vec<SpuriousRow>,
    pub all_hold: bool,
}

/// Linear Lyapunov `g(x) = f(z) + ⟨v, x - z⟩` with `v` the minimal element
/// of the local subgradient hull; checks the per-step decrease
/// `g(x_{k+1}) - g(x_k) <= -γ_k ‖v‖²` over `segment`.
pub fn spurious_ledger_variant(
    f: &dyn Objective,
    z: &Point,
    traj: &Trajectory,
    segment: Interval,
    delta: f64,
) -> Result<SpuriousLedger> {
    if segment.lo == 0 || segment.hi > traj.len() || segment.is_empty() {
        return Err(Error::Precondition("segment outside the trajectory".into()));
    }
    let hull = min_norm_hull(&ball_subgradients(f, z, delta))?;
    let v = hull.point;
    if v.norm() <= ZERO_TOL {
        return Err(Error::ZeroInHull);
    }
    let fz = f.value(z);
    let g = |x: &Point| fz + v.dot(&x.sub(z));
    let vv = v.norm_sq();
    let rows: Vec<SpuriousRow> = (segment.lo..=segment.hi)
        .map(|k| {
            let gamma = traj.gamma(k);
            let decrease = g(traj.x(k + 1)) - g(traj.x(k));
            let required = -gamma * vv;
            SpuriousRow {
                k,
                g: g(traj.x(k)),
                decrease,
                required,
                in_ball: traj.x(k).distance(z) <= delta,
                holds: decrease <= required + 1e-12 * (1.0 + gamma * vv),
            }
        })
        .collect();
    let all_hold = rows.iter().all(|r| r.holds);
    Ok(SpuriousLedger {
        v,
        delta,
        rows,
        all_hold,
    })
}
