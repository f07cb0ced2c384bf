use super::{g_grad, ParamSchedule};
use crate::catalog::CatalogFunction;
use crate::descent::Trajectory;
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::selection::SelectionFunction;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KlThresholds {
    /// Fraction of the run forming the tail window.
    pub tail_fraction: f64,
    pub max_oscillation: f64,
    pub max_increment: f64,
}

impl Default for KlThresholds {
    fn default() -> Self {
        KlThresholds {
            tail_fraction: 0.1,
            max_oscillation: 1e-3,
            max_increment: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KlReport {
    /// Partial sums of `‖π_{Ψ_{k+1}}(x_{k+1}) - π_{Ψ_k}(x_{k+1})‖`, `k = 1..K-1`.
    pub projection_jumps: Vec<f64>,
    /// Partial sums of `γ_k ‖∇g_{Ψ_k}(x_k)‖`, `k = 1..K`.
    pub path_terms: Vec<f64>,
    pub skipped_jumps: usize,
    pub skipped_path_terms: usize,
    pub tail_start: usize,
    /// Diameter of `{x_m : m >= tail_start}`.
    pub tail_oscillation: f64,
    pub tail_jump_increment: f64,
    pub tail_path_increment: f64,
    pub thresholds: KlThresholds,
    pub converged: bool,
}

/// Diameter of a point cloud; exact, via the convex hull in the plane.
pub fn diameter(points: &[Point]) -> f64 {
    if points.len() < 2 {
        return 0.0;
    }
    match points[0].dim() {
        1 => {
            let (lo, hi) = points
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| {
                    (a.min(p[0]), b.max(p[0]))
                });
            hi - lo
        }
        2 => {
            let hull = convex_hull(points);
            let mut best: f64 = 0.0;
            for i in 0..hull.len() {
                for j in i + 1..hull.len() {
                    best = best.max(hull[i].distance(&hull[j]));
                }
            }
            best
        }
        _ => {
            let mut best: f64 = 0.0;
            for i in 0..points.len() {
                for j in i + 1..points.len() {
                    best = best.max(points[i].distance(&points[j]));
                }
            }
            best
        }
    }
}

/// Monotone-chain hull of planar points.
fn convex_hull(points: &[Point]) -> Vec<Point> {
    let mut pts: Vec<(f64, f64)> = points.iter().map(|p| (p[0], p[1])).collect();
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    pts.dedup();
    if pts.len() < 3 {
        return pts.into_iter().map(|(x, y)| Point::from([x, y])).collect();
    }
    let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| {
        (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
    };
    let mut lower: Vec<(f64, f64)> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<(f64, f64)> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower
        .into_iter()
        .chain(upper)
        .map(|(x, y)| Point::from([x, y]))
        .collect()
}

pub fn kl_monitor(
    f: &CatalogFunction,
    traj: &Trajectory,
    sel: &SelectionFunction,
    sched: &ParamSchedule,
    thresholds: KlThresholds,
) -> Result<KlReport> {
    let k_max = traj.len();
    if sel.len() != k_max {
        return Err(Error::DimensionMismatch {
            expected: k_max,
            got: sel.len(),
        });
    }
    if k_max < 2 {
        return Err(Error::Empty("the monitor needs at least two steps".into()));
    }
    let strat = f.stratification();
    let mut projection_jumps = Vec::with_capacity(k_max - 1);
    let mut skipped_jumps = 0;
    let mut acc = 0.0;
    for k in 1..k_max {
        let x = traj.x(k + 1);
        let a = strat.stratum(sel.at(k + 1))?.project(x);
        let b = strat.stratum(sel.at(k))?.project(x);
        match (a, b) {
            (Ok(a), Ok(b)) => acc += a.distance(&b),
            _ => skipped_jumps += 1,
        }
        projection_jumps.push(acc);
    }
    let mut path_terms = Vec::with_capacity(k_max);
    let mut skipped_path_terms = 0;
    let mut acc = 0.0;
    for k in 1..=k_max {
        match g_grad(f, sched.at(k), sel.at(k), traj.x(k)) {
            Ok(g) => acc += traj.gamma(k) * g.norm(),
            Err(_) => skipped_path_terms += 1,
        }
        path_terms.push(acc);
    }
    let window = ((k_max as f64 * thresholds.tail_fraction).round() as usize).clamp(1, k_max);
    let tail_start = k_max + 1 - window;
    let tail_oscillation = diameter(&traj.iterates[tail_start - 1..]);
    let before = |v: &[f64], k: usize| if k >= 2 { v[k - 2] } else { 0.0 };
    let tail_jump_increment = projection_jumps[k_max - 2] - before(&projection_jumps, tail_start);
    let tail_path_increment = path_terms[k_max - 1] - before(&path_terms, tail_start);
    let converged = tail_oscillation <= thresholds.max_oscillation
        && tail_jump_increment <= thresholds.max_increment
        && tail_path_increment <= thresholds.max_increment;
    Ok(KlReport {
        projection_jumps,
        path_terms,
        skipped_jumps,
        skipped_path_terms,
        tail_start,
        tail_oscillation,
        tail_jump_increment,
        tail_path_increment,
        thresholds,
        converged,
    })
}
