//! Checks and accounting on top of a trajectory and a selection: validity
//! and goodness, the Lyapunov family `g_X = f ∘ π_X`, descent ledgers,
//! switch counts, rate reports, the KL monitor and the spurious-point
//! variant.

pub mod constants;
pub mod hull;
pub mod kl;
pub mod ledger;
pub mod rates;

use crate::catalog::{CatalogFunction, Objective};
use crate::descent::Trajectory;
use crate::error::{Error, Result};
use crate::geometry::{Point, Vector};
use crate::neighborhoods::{DimFilter, NeighborhoodParams, Neighborhoods};
use crate::selection::{switch_sets, SelectionFunction};
use crate::stratification::Stratification;
use serde::{Deserialize, Serialize};

/// Parameters attached to consecutive index ranges (a single range for
/// constant steps, one per doubling interval otherwise).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSchedule {
    pub intervals: Vec<(usize, usize)>,
    pub params: Vec<NeighborhoodParams>,
}

impl ParamSchedule {
    pub fn constant(params: NeighborhoodParams, k_max: usize) -> Self {
        ParamSchedule {
            intervals: vec![(1, k_max)],
            params: vec![params],
        }
    }

    /// Index of the interval containing `k`.
    pub fn interval_of(&self, k: usize) -> usize {
        self.intervals
            .iter()
            .position(|&(lo, hi)| lo <= k && k <= hi)
            .unwrap_or(self.intervals.len() - 1)
    }

    pub fn at(&self, k: usize) -> &NeighborhoodParams {
        &self.params[self.interval_of(k)]
    }
}

/// `g_X(x) = f(π_X(x))`, defined on the well-posed neighborhood of `X`.
pub fn g_value(
    f: &CatalogFunction,
    params: &NeighborhoodParams,
    id: usize,
    x: &Point,
) -> Result<f64> {
    let strat = f.stratification();
    if !Neighborhoods::new(strat, params).in_wellposed(x, id) {
        return Err(Error::OutsideWellPosed { stratum: id });
    }
    let y = strat.stratum(id)?.project(x)?;
    Ok(f.value(&y))
}

/// `∇g_X(x) = (Jac π_X(x))ᵀ ∇_X f(π_X(x))`.
pub fn g_grad(
    f: &CatalogFunction,
    params: &NeighborhoodParams,
    id: usize,
    x: &Point,
) -> Result<Vector> {
    let strat = f.stratification();
    if !Neighborhoods::new(strat, params).in_wellposed(x, id) {
        return Err(Error::OutsideWellPosed { stratum: id });
    }
    let s = strat.stratum(id)?;
    let y = s.project(x)?;
    let jac = s.projection_jacobian(x)?;
    Ok(jac.transpose().apply(&f.restricted_gradient(id, &y)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidityReport {
    pub valid: bool,
    /// `(k, Ψ_k, reason)` of the first violation.
    pub first_violation: Option<(usize, usize, String)>,
}

fn check_lengths(traj: &Trajectory, sel: &SelectionFunction) -> Result<()> {
    if sel.len() != traj.len() {
        return Err(Error::DimensionMismatch {
            expected: traj.len(),
            got: sel.len(),
        });
    }
    Ok(())
}

/// `x_k ∈ C(Ψ_k) \ Ĉ_{<dim Ψ_k}` for every `k`.
pub fn is_valid(
    strat: &Stratification,
    traj: &Trajectory,
    sched: &ParamSchedule,
    sel: &SelectionFunction,
) -> Result<ValidityReport> {
    check_lengths(traj, sel)?;
    for k in 1..=sel.len() {
        let id = sel.at(k);
        let s = strat.stratum(id)?;
        let nb = Neighborhoods::new(strat, sched.at(k));
        let p = nb.profile(traj.x(k));
        let reason = if !nb.outer_at(&p, id) {
            Some("outside the outer neighborhood")
        } else if nb.inner_union_at(&p, DimFilter::Below(s.dim)) {
            Some("inside an inner neighborhood of lower dimension")
        } else {
            None
        };
        if let Some(r) = reason {
            return Ok(ValidityReport {
                valid: false,
                first_violation: Some((k, id, r.to_string())),
            });
        }
    }
    Ok(ValidityReport {
        valid: true,
        first_violation: None,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoodViolation {
    pub stratum: usize,
    /// 1: a switch index outside the inner neighborhood; 2: no exit between
    /// consecutive left switches; 3: no exit between consecutive right switches.
    pub clause: u8,
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoodReport {
    pub valid: bool,
    pub good: bool,
    pub violations: Vec<GoodViolation>,
}

/// Goodness of the selection restricted to each parameter interval; each
/// interval is judged as a sequence of its own.
pub fn is_good(
    strat: &Stratification,
    traj: &Trajectory,
    sched: &ParamSchedule,
    sel: &SelectionFunction,
) -> Result<GoodReport> {
    let valid = is_valid(strat, traj, sched, sel)?.valid;
    let dims: Vec<usize> = strat.strata().iter().map(|s| s.dim).collect();
    let mut violations = Vec::new();
    for (&(lo, hi), params) in sched.intervals.iter().zip(&sched.params) {
        let nb = Neighborhoods::new(strat, params);
        let local = &sel.assignments[lo - 1..hi];
        let sw = switch_sets(local, &dims);
        let n_local = local.len();
        let global = |k: usize| k + lo - 1;
        let outside = |id: usize, k_local: usize| !nb.in_outer(traj.x(global(k_local)), id);
        for id in 0..dims.len() {
            for &k in sw.lswitch[id].iter().chain(&sw.rswitch[id]) {
                if !nb.in_inner(traj.x(global(k)), id) {
                    violations.push(GoodViolation {
                        stratum: id,
                        clause: 1,
                        index: global(k),
                    });
                }
            }
            let ls = &sw.lswitch[id];
            for s in 0..ls.len() {
                let prev = if s == 0 { 0 } else { ls[s - 1] };
                if !(prev + 1..ls[s]).any(|k| outside(id, k)) {
                    violations.push(GoodViolation {
                        stratum: id,
                        clause: 2,
                        index: global(ls[s]),
                    });
                }
            }
            let rs = &sw.rswitch[id];
            for s in 0..rs.len() {
                let next = if s + 1 < rs.len() {
                    rs[s + 1]
                } else {
                    n_local + 1
                };
                if !(rs[s] + 1..next).any(|k| outside(id, k)) {
                    violations.push(GoodViolation {
                        stratum: id,
                        clause: 3,
                        index: global(rs[s]),
                    });
                }
            }
        }
    }
    Ok(GoodReport {
        valid,
        good: valid && violations.is_empty(),
        violations,
    })
}

/// Per-stratum switch counts against `4GγK / γ^{α + rank β}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwitchCount {
    pub stratum: usize,
    pub rank: usize,
    pub lswitch: usize,
    pub rswitch: usize,
    pub bound: f64,
    pub holds: bool,
}

pub fn switch_count_bound(
    strat: &Stratification,
    sel: &SelectionFunction,
    params: &NeighborhoodParams,
) -> Vec<SwitchCount> {
    let dims: Vec<usize> = strat.strata().iter().map(|s| s.dim).collect();
    let sw = switch_sets(&sel.assignments, &dims);
    let (a, b, g) = (params.alpha, params.beta, params.gamma);
    let k_max = sel.len() as f64;
    (0..dims.len())
        .map(|id| {
            let rank = strat.rank(id);
            let bound = 4.0 * params.constants.g * g * k_max / g.powf(a + rank as f64 * b);
            let (l, r) = (sw.lswitch[id].len(), sw.rswitch[id].len());
            SwitchCount {
                stratum: id,
                rank,
                lswitch: l,
                rswitch: r,
                bound,
                holds: (l as f64) <= bound && (r as f64) <= bound,
            }
        })
        .collect()
}

/// `(ε_k, δ_k)`: norm of the Riemannian gradient at the projection and the
/// distance to the selected stratum. `ε_k` is `None` when the projection
/// is ill-posed.
pub fn stationarity_measure(
    f: &CatalogFunction,
    traj: &Trajectory,
    sel: &SelectionFunction,
) -> Result<Vec<(Option<f64>, f64)>> {
    check_lengths(traj, sel)?;
    let strat = f.stratification();
    (1..=sel.len())
        .map(|k| {
            let s = strat.stratum(sel.at(k))?;
            let x = traj.x(k);
            let eps = match s.project(x) {
                Ok(y) => Some(f.restricted_gradient(s.id, &y)?.norm()),
                Err(_) => None,
            };
            Ok((eps, s.dist(x)))
        })
        .collect()
}

/// Independent central-difference gradient (fourth order) of `g_X`.
pub fn g_grad_fd(
    f: &CatalogFunction,
    params: &NeighborhoodParams,
    id: usize,
    x: &Point,
    h: f64,
) -> Result<Vector> {
    let n = x.dim();
    let mut out = vec![0.0; n];
    for (i, o) in out.iter_mut().enumerate() {
        let at = |t: f64| {
            let mut y = x.clone();
            y.coords_mut()[i] += t;
            g_value(f, params, id, &y)
        };
        *o = (-at(2.0 * h)? + 8.0 * at(h)? - 8.0 * at(-h)? + at(-2.0 * h)?) / (12.0 * h);
    }
    Point::new(out)
}
