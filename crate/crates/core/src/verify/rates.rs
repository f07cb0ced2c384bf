use super::ledger::descent_ledger;
use super::{stationarity_measure, ParamSchedule};
use crate::catalog::{CatalogFunction, Constants};
use crate::descent::{run, RunMode, StepSchedule};
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::neighborhoods::{auto_exponents, NeighborhoodParams};
use crate::selection::build_selection;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// How the step size is derived from `K`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum StepRule {
    /// `γ = K^{-1 + 2/(3R+8)}` with `β = 1/(R+2)`, `α = β/3`.
    Corollary,
    Fixed {
        gamma: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    #[serde(rename = "K")]
    pub k: usize,
    pub gamma: f64,
    pub mean_grad_sq: f64,
    pub usable_rows: usize,
    /// Fraction of `k` with `dist(x_k, Ψ_k) <= γ^{α + rank(Ψ_k) β}`.
    pub certificate_pass_rate: f64,
    pub max_stationarity: f64,
    pub max_distance: f64,
    /// `(g_{Ψ_1}(x_1) - g_{Ψ_K}(x_{K+1})) / (γK)`, absent when either end
    /// is outside its well-posed neighborhood.
    pub descent_component: Option<f64>,
    /// `γ^{β-α}`.
    pub switching_component: f64,
    /// `γ^{2α}`.
    pub error_component: f64,
    pub escaped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub function: String,
    pub alpha: f64,
    pub beta: f64,
    pub gamma0: f64,
    pub rows: Vec<RateRow>,
    /// Least-squares slope of `log mean_grad_sq` against `log K` (needs two rows).
    pub fitted_slope: Option<f64>,
    /// Theoretical exponent `-2/(3R+8)` for the corollary rule.
    pub predicted_slope: f64,
    /// Largest ratio of the mean squared gradient to the sum of the three
    /// bound components.
    pub fitted_constant: f64,
    pub strictly_decreasing: bool,
}

impl RateReport {
    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:?}")).unwrap_or_default();
        let mut s = String::from(
            "K,gamma,mean_grad_sq,certificate_pass_rate,descent,switching,error,fitted_slope\n",
        );
        for r in &self.rows {
            s.push_str(&format!(
                "{},{:?},{:?},{:?},{},{:?},{:?},{}\n",
                r.k,
                r.gamma,
                r.mean_grad_sq,
                r.certificate_pass_rate,
                opt(r.descent_component),
                r.switching_component,
                r.error_component,
                opt(self.fitted_slope)
            ));
        }
        s
    }
}

/// One parsed line of the rates CSV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateCsvRow {
    pub k: usize,
    pub gamma: f64,
    pub mean_grad_sq: f64,
    pub certificate_pass_rate: f64,
    pub descent: Option<f64>,
    pub switching: f64,
    pub error: f64,
    pub fitted_slope: Option<f64>,
}

pub fn parse_rates_csv(text: &str) -> Result<Vec<RateCsvRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.starts_with("K,gamma,mean_grad_sq") => {}
        _ => return Err(Error::Parse("missing rates header".into())),
    }
    lines
        .filter(|l| !l.is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 8 {
                return Err(Error::Parse(format!("expected 8 fields, got {}", f.len())));
            }
            let opt = |s: &str| {
                if s.is_empty() {
                    Ok(None)
                } else {
                    s.parse::<f64>()
                        .map(Some)
                        .map_err(|_| Error::Parse(format!("bad number `{s}`")))
                }
            };
            let num = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| Error::Parse(format!("bad number `{s}`")))
            };
            Ok(RateCsvRow {
                k: f[0]
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad K `{}`", f[0])))?,
                gamma: num(f[1])?,
                mean_grad_sq: num(f[2])?,
                certificate_pass_rate: num(f[3])?,
                descent: opt(f[4])?,
                switching: num(f[5])?,
                error: num(f[6])?,
                fitted_slope: opt(f[7])?,
            })
        })
        .collect()
}

pub fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Runs the method for every `K` in `ks` from `start` and summarizes the
/// stationarity rate. The runs are independent and execute in parallel;
/// rows keep the order of `ks`.
pub fn rate_report(
    f: &CatalogFunction,
    constants: &Constants,
    ks: &[usize],
    rule: StepRule,
    gamma0: f64,
    start: &Point,
) -> Result<RateReport> {
    if ks.is_empty() {
        return Err(Error::Empty("no K values".into()));
    }
    let big_r = f.stratification().max_rank();
    let (alpha, beta) = auto_exponents(big_r);
    let rows = ks
        .par_iter()
        .map(|&k| rate_row(f, constants, k, rule, gamma0, start))
        .collect::<Result<Vec<RateRow>>>()?;
    let xs: Vec<f64> = rows.iter().map(|r| (r.k as f64).ln()).collect();
    let ys: Vec<f64> = rows
        .iter()
        .map(|r| r.mean_grad_sq.max(1e-300).ln())
        .collect();
    let fitted_slope = (rows.len() >= 2).then(|| least_squares_slope(&xs, &ys));
    let fitted_constant = rows
        .iter()
        .map(|r| {
            r.mean_grad_sq
                / (r.descent_component.unwrap_or(0.0).abs()
                    + r.switching_component
                    + r.error_component)
        })
        .fold(0.0, f64::max);
    let strictly_decreasing = rows
        .windows(2)
        .all(|w| w[1].mean_grad_sq < w[0].mean_grad_sq);
    Ok(RateReport {
        function: f.name().to_string(),
        alpha,
        beta,
        gamma0,
        rows,
        fitted_slope,
        predicted_slope: -2.0 / (3.0 * big_r as f64 + 8.0),
        fitted_constant,
        strictly_decreasing,
    })
}

/// Step used for horizon `k` under `rule`.
pub fn rule_gamma(rule: StepRule, k: usize, max_rank: usize) -> f64 {
    match rule {
        StepRule::Corollary => (k as f64).powf(-1.0 + 2.0 / (3.0 * max_rank as f64 + 8.0)),
        StepRule::Fixed { gamma } => gamma,
    }
}

fn rate_row(
    f: &CatalogFunction,
    constants: &Constants,
    k: usize,
    rule: StepRule,
    gamma0: f64,
    start: &Point,
) -> Result<RateRow> {
    if k == 0 {
        return Err(Error::Empty("K = 0".into()));
    }
    let strat = f.stratification();
    let big_r = strat.max_rank();
    let (alpha, beta) = auto_exponents(big_r);
    let gamma = rule_gamma(rule, k, big_r);
    if gamma >= gamma0 {
        return Err(Error::InvalidParams(format!(
            "step {gamma:e} for K={k} is not below gamma0={gamma0:e}"
        )));
    }
    let params = NeighborhoodParams::new(alpha, beta, gamma, gamma0, big_r, *constants)?;
    let traj = run(
        f,
        f.domain(),
        start,
        &StepSchedule::Constant { gamma },
        k,
        RunMode::Plain,
    )?;
    let sel = build_selection(strat, &traj, &params)?;
    let sched = ParamSchedule::constant(params, traj.len());
    let ledger = descent_ledger(f, &traj, &sel, &sched)?;
    let usable: Vec<f64> = ledger.rows.iter().filter_map(|r| r.grad_sq).collect();
    let mean_grad_sq = usable.iter().sum::<f64>() / usable.len().max(1) as f64;
    let stat = stationarity_measure(f, &traj, &sel)?;
    let pass = stat
        .iter()
        .enumerate()
        .filter(|(i, (_, dist))| {
            let rank = strat.rank(sel.at(i + 1)) as f64;
            *dist <= gamma.powf(alpha + rank * beta)
        })
        .count();
    let kk = traj.len() as f64;
    Ok(RateRow {
        k,
        gamma,
        mean_grad_sq,
        usable_rows: usable.len(),
        certificate_pass_rate: pass as f64 / stat.len() as f64,
        max_stationarity: stat.iter().filter_map(|s| s.0).fold(0.0, f64::max),
        max_distance: stat.iter().map(|s| s.1).fold(0.0, f64::max),
        descent_component: ledger.summary.telescoped.map(|t| t / (gamma * kk)),
        switching_component: gamma.powf(beta - alpha),
        error_component: gamma.powf(2.0 * alpha),
        escaped: traj.escaped_at.is_some(),
    })
}
