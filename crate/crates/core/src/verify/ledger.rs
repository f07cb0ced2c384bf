//! Per-iteration descent accounting and its aggregates.

use super::{g_grad, g_value, ParamSchedule};
use crate::catalog::CatalogFunction;
use crate::descent::Trajectory;
use crate::error::{Error, Result};
use crate::geometry::truncate;
use crate::neighborhoods::Neighborhoods;
use crate::selection::{switch_sets, SelectionFunction};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

/// Relative slack used when comparing accumulated floating-point sums.
const SUM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerRow {
    pub k: usize,
    pub stratum: usize,
    pub grad_sq: Option<f64>,
    /// `g_{Ψ_k}(x_k) - g_{Ψ_{k-1}}(x_k)` for `k >= 2`.
    pub switching: Option<f64>,
    /// `(dist(x_k, Ψ_k) / truncdist(x_k, skeleton below))²`.
    pub proximity_sq: f64,
    /// `g_{Ψ_k}(x_k) - g_{Ψ_k}(x_{k+1})`.
    pub step_decrease: Option<f64>,
    pub excluded: bool,
    pub lemma_hypotheses: bool,
    pub lemma_holds: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescentSummary {
    #[serde(rename = "K")]
    pub k: usize,
    pub a1: f64,
    pub a2: f64,
    pub excluded_rows: usize,
    pub excluded_fraction: f64,
    /// `A1 Σ γ_k ‖∇g_{Ψ_k}(x_k)‖²` over usable rows.
    pub lhs: f64,
    /// `g_{Ψ_1}(x_1) - g_{Ψ_K}(x_{K+1})` when both ends are defined.
    pub telescoped: Option<f64>,
    /// `Σ_{k=2}^{K}` switching terms.
    pub switching_sum: f64,
    /// `A2 Σ γ_k^{1+2α}`.
    pub error_term: f64,
    /// `Σ` of per-step decreases over usable rows.
    pub step_decrease_sum: f64,
    /// Right side: step decreases plus the error term.
    pub rhs: f64,
    /// `|Σ steps - (telescoped + switching)|`, zero up to rounding when no row is excluded.
    pub identity_residual: Option<f64>,
    pub valid_descent_holds: bool,
    pub payment_left: f64,
    pub payment_right: f64,
    pub payment_bound: f64,
    pub switching_payment_holds: bool,
    /// `16 |X| G Σ γ_k^{1+β-α}`, the budget for `P_L + P_R`.
    pub payment_budget: f64,
    pub payments_within_budget: bool,
    pub boundary_switch: bool,
    pub projection_gap_checked: usize,
    pub projection_gap_violations: usize,
    pub lemma_checked: usize,
    pub lemma_hypotheses_held: usize,
    pub lemma_violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescentLedger {
    pub rows: Vec<LedgerRow>,
    pub summary: DescentSummary,
}

impl DescentLedger {
    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:?}")).unwrap_or_default();
        let mut out = String::from("k,grad_sq,switching_term,proximity_sq,flags\n");
        for r in &self.rows {
            let mut flags = Vec::new();
            if r.excluded {
                flags.push("excluded");
            }
            if r.switching.is_some_and(|s| s != 0.0) || (r.k >= 2 && r.switching.is_none()) {
                flags.push("switch");
            }
            if r.lemma_hypotheses {
                flags.push("lemma_hyp");
            }
            if r.lemma_holds == Some(false) {
                flags.push("lemma_fail");
            }
            let _ = writeln!(
                out,
                "{},{},{},{:?},{}",
                r.k,
                opt(r.grad_sq),
                opt(r.switching),
                r.proximity_sq,
                flags.join("|")
            );
        }
        out
    }

    /// Parses the CSV produced by [`DescentLedger::to_csv`] into
    /// `(k, grad_sq, switching, proximity_sq, flags)` tuples.
    #[allow(clippy::type_complexity)]
    pub fn parse_csv(
        text: &str,
    ) -> Result<Vec<(usize, Option<f64>, Option<f64>, f64, Vec<String>)>> {
        let mut lines = text.lines();
        if lines.next() != Some("k,grad_sq,switching_term,proximity_sq,flags") {
            return Err(Error::Parse("bad ledger header".into()));
        }
        let opt = |t: &str| -> Result<Option<f64>> {
            if t.is_empty() {
                Ok(None)
            } else {
                t.parse()
                    .map(Some)
                    .map_err(|_| Error::Parse(format!("bad number `{t}`")))
            }
        };
        lines
            .filter(|l| !l.is_empty())
            .map(|l| {
                let f: Vec<&str> = l.split(',').collect();
                if f.len() != 5 {
                    return Err(Error::Parse(format!("bad ledger row `{l}`")));
                }
                Ok((
                    f[0].parse()
                        .map_err(|_| Error::Parse(format!("bad index `{}`", f[0])))?,
                    opt(f[1])?,
                    opt(f[2])?,
                    f[3].parse()
                        .map_err(|_| Error::Parse(format!("bad number `{}`", f[3])))?,
                    f[4].split('|')
                        .filter(|s| !s.is_empty())
                        .map(String::from)
                        .collect(),
                ))
            })
            .collect()
    }
}

/// Builds the ledger of a selection over a trajectory.
pub fn descent_ledger(
    f: &CatalogFunction,
    traj: &Trajectory,
    sel: &SelectionFunction,
    sched: &ParamSchedule,
) -> Result<DescentLedger> {
    let k_max = traj.len();
    if sel.len() != k_max {
        return Err(Error::DimensionMismatch {
            expected: k_max,
            got: sel.len(),
        });
    }
    if k_max == 0 {
        return Err(Error::Empty("empty trajectory".into()));
    }
    let strat = f.stratification();
    let c = sched.params[0].constants;
    let (a1, a2) = (c.a1(), c.a2());
    let mut rows = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        let params = sched.at(k);
        let id = sel.at(k);
        let x = traj.x(k);
        let x_next = traj.x(k + 1);
        let gamma = traj.gamma(k);
        let nb = Neighborhoods::new(strat, params);
        let profile = nb.profile(x);
        let below = profile.skeleton_dist(strat.strata()[id].dim as isize - 1);
        let proximity_sq = (profile.dists[id] / truncate(below)).powi(2);
        let gx = g_value(f, params, id, x).ok();
        let grad = g_grad(f, params, id, x).ok();
        let gx_next = g_value(f, params, id, x_next).ok();
        let step_decrease = gx.zip(gx_next).map(|(a, b)| a - b);
        let switching = if k >= 2 {
            let prev = sel.at(k - 1);
            if prev == id {
                Some(0.0)
            } else {
                let gp = g_value(f, sched.at(k - 1), prev, x).ok();
                gx.zip(gp).map(|(a, b)| a - b)
            }
        } else {
            None
        };
        let excluded = grad.is_none() || step_decrease.is_none() || (k >= 2 && switching.is_none());
        let grad_sq = grad.as_ref().map(|g| g.norm_sq());
        let same_next = k < k_max && sel.at(k + 1) == id;
        let mut lemma_hypotheses = false;
        let mut lemma_holds = None;
        if same_next {
            let segment_ok = (0..=4).all(|i| {
                let t = i as f64 / 4.0;
                let z = x.add_scaled(t, &x_next.sub(x));
                nb.in_wellposed(&z, id)
            });
            lemma_hypotheses =
                segment_ok && 4.0 * c.a3 <= 1.0 && gamma * c.descent_step_factor() <= below;
            if let (Some(gsq), Some(dec)) = (grad_sq, step_decrease) {
                let bound = -gamma * a1 * gsq + gamma * a2 * proximity_sq;
                let slack = 1e-12 * (1.0 + gx.unwrap_or(0.0).abs());
                lemma_holds = Some(-dec <= bound + slack);
            }
        }
        rows.push(LedgerRow {
            k,
            stratum: id,
            grad_sq,
            switching,
            proximity_sq,
            step_decrease,
            excluded,
            lemma_hypotheses,
            lemma_holds,
        });
    }

    let excluded_rows = rows.iter().filter(|r| r.excluded).count();
    let usable = || rows.iter().filter(|r| !r.excluded);
    let lhs: f64 = usable()
        .map(|r| a1 * traj.gamma(r.k) * r.grad_sq.unwrap_or(0.0))
        .sum();
    let step_decrease_sum: f64 = usable().map(|r| r.step_decrease.unwrap_or(0.0)).sum();
    let switching_sum: f64 = rows.iter().filter_map(|r| r.switching).sum();
    let error_term: f64 = (1..=k_max)
        .map(|k| a2 * traj.gamma(k).powf(1.0 + 2.0 * sched.at(k).alpha))
        .sum();
    let first = g_value(f, sched.at(1), sel.at(1), traj.x(1)).ok();
    let last = g_value(f, sched.at(k_max), sel.at(k_max), traj.x(k_max + 1)).ok();
    let telescoped = first.zip(last).map(|(a, b)| a - b);
    let identity_residual = if excluded_rows == 0 {
        telescoped.map(|t| (step_decrease_sum - (t + switching_sum)).abs())
    } else {
        None
    };
    let rhs = step_decrease_sum + error_term;
    let scale = 1.0 + lhs.abs() + rhs.abs();

    let dims: Vec<usize> = strat.strata().iter().map(|s| s.dim).collect();
    let sw = switch_sets(&sel.assignments, &dims);
    let mut payment_left = 0.0;
    let mut payment_right = 0.0;
    for id in 0..dims.len() {
        let s = &strat.strata()[id];
        for &k in &sw.lswitch[id] {
            if (2..k_max).contains(&k) {
                payment_left += s.dist(traj.x(k));
            }
        }
        for &km1 in &sw.rswitch[id] {
            let k = km1 + 1;
            if (2..k_max).contains(&k) {
                payment_right += s.dist(traj.x(k));
            }
        }
    }
    let payment_bound = 4.0 * c.g * (payment_left + payment_right);
    let payment_budget: f64 = (1..=k_max)
        .map(|k| {
            let p = sched.at(k);
            16.0 * dims.len() as f64 * c.g * traj.gamma(k).powf(1.0 + p.beta - p.alpha)
        })
        .sum();
    let boundary_switch = k_max >= 2 && sel.at(k_max) != sel.at(k_max - 1);

    let mut projection_gap_checked = 0;
    let mut projection_gap_violations = 0;
    for k in 2..=k_max {
        let (cur, prev) = (sel.at(k), sel.at(k - 1));
        if cur == prev {
            continue;
        }
        let (sc, sp) = (&strat.strata()[cur], &strat.strata()[prev]);
        let x = traj.x(k);
        if let (Ok(yc), Ok(yp)) = (sc.project(x), sp.project(x)) {
            projection_gap_checked += 1;
            let mut bound = 0.0;
            if sc.dim <= sp.dim {
                bound += sc.dist(x);
            }
            if sc.dim >= sp.dim {
                bound += sp.dist(x);
            }
            if yc.distance(&yp) > 4.0 * bound * (1.0 + 1e-12) + 1e-15 {
                projection_gap_violations += 1;
            }
        }
    }

    let lemma_checked = rows.iter().filter(|r| r.lemma_holds.is_some()).count();
    let lemma_hypotheses_held = rows.iter().filter(|r| r.lemma_hypotheses).count();
    let lemma_violations = rows
        .iter()
        .filter(|r| r.lemma_hypotheses && r.lemma_holds == Some(false))
        .count();

    let summary = DescentSummary {
        k: k_max,
        a1,
        a2,
        excluded_rows,
        excluded_fraction: excluded_rows as f64 / k_max as f64,
        lhs,
        telescoped,
        switching_sum,
        error_term,
        step_decrease_sum,
        rhs,
        identity_residual,
        valid_descent_holds: lhs <= rhs + SUM_TOL * scale,
        payment_left,
        payment_right,
        payment_bound,
        switching_payment_holds: switching_sum
            <= payment_bound + SUM_TOL * (1.0 + switching_sum.abs() + payment_bound),
        payment_budget,
        payments_within_budget: payment_left + payment_right <= payment_budget,
        boundary_switch,
        projection_gap_checked,
        projection_gap_violations,
        lemma_checked,
        lemma_hypotheses_held,
        lemma_violations,
    };
    Ok(DescentLedger { rows, summary })
}

/// Ledger for a decreasing schedule, splitting switching terms at the
/// doubling-interval boundaries from those inside an interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VaryingSummary {
    pub intervals: Vec<(usize, usize)>,
    pub gammas: Vec<f64>,
    pub descent: DescentSummary,
    pub within_interval_switching: f64,
    pub boundary_switching: f64,
    /// `G² |X| Σ γ_k^{1+β-α} + G γ_{k(1)}^β`.
    pub payment_scale: f64,
    /// Smallest constant making the switching bound hold.
    pub fitted_payment_constant: f64,
    /// `Σ (G² |X| γ_k^{1+β-α} + A2 γ_k^{1+2α}) + G`.
    pub total_scale: f64,
    /// Smallest constant `C` with `lhs <= telescoped + C * total_scale`.
    pub fitted_total_constant: f64,
}

pub fn varying_ledger(
    f: &CatalogFunction,
    traj: &Trajectory,
    sel: &SelectionFunction,
    sched: &ParamSchedule,
) -> Result<(DescentLedger, VaryingSummary)> {
    let ledger = descent_ledger(f, traj, sel, sched)?;
    let starts: Vec<usize> = sched.intervals.iter().skip(1).map(|i| i.0).collect();
    let mut within = 0.0;
    let mut boundary = 0.0;
    for r in &ledger.rows {
        if let Some(s) = r.switching {
            if starts.contains(&r.k) {
                boundary += s;
            } else {
                within += s;
            }
        }
    }
    let p0 = &sched.params[0];
    let g = p0.constants.g;
    let n = f.stratification().len() as f64;
    let k1 = sched.intervals[0].0;
    let sum_pay: f64 = (1..=traj.len())
        .map(|k| traj.gamma(k).powf(1.0 + p0.beta - p0.alpha))
        .sum();
    let payment_scale = g * g * n * sum_pay + g * traj.gamma(k1).powf(p0.beta);
    let sum_err: f64 = (1..=traj.len())
        .map(|k| p0.constants.a2() * traj.gamma(k).powf(1.0 + 2.0 * p0.alpha))
        .sum();
    let total_scale = g * g * n * sum_pay + sum_err + g;
    let fitted_payment_constant = (ledger.summary.switching_sum / payment_scale).max(0.0);
    let tel = ledger.summary.telescoped.unwrap_or(0.0);
    let fitted_total_constant = ((ledger.summary.lhs - tel) / total_scale).max(0.0);
    let summary = VaryingSummary {
        intervals: sched.intervals.clone(),
        gammas: sched.params.iter().map(|p| p.gamma).collect(),
        descent: ledger.summary.clone(),
        within_interval_switching: within,
        boundary_switching: boundary,
        payment_scale,
        fitted_payment_constant,
        total_scale,
        fitted_total_constant,
    };
    Ok((ledger, summary))
}
