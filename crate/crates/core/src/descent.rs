//! The subgradient recursion `x_{k+1} = x_k - γ_k v_k`, step schedules,
//! doubling intervals and the trajectory CSV format.

use crate::catalog::Objective;
use crate::error::{Error, Result};
use crate::geometry::{DomainBox, Point, Vector};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepSchedule {
    Constant {
        gamma: f64,
    },
    /// `γ_k = c / k`.
    InverseK {
        c: f64,
    },
    Explicit {
        steps: Vec<f64>,
    },
}

impl StepSchedule {
    /// Parses `constant:0.01`, `inverse_k:0.01` or `explicit:0.1,0.05,...`.
    pub fn parse(s: &str) -> Result<Self> {
        let (kind, rest) = s
            .split_once(':')
            .ok_or_else(|| Error::Parse(format!("schedule `{s}` lacks a `kind:` prefix")))?;
        let num = |t: &str| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("bad number `{t}` in schedule")))
        };
        match kind.trim() {
            "constant" => Ok(StepSchedule::Constant { gamma: num(rest)? }),
            "inverse_k" => Ok(StepSchedule::InverseK { c: num(rest)? }),
            "explicit" => Ok(StepSchedule::Explicit {
                steps: rest.split(',').map(num).collect::<Result<_>>()?,
            }),
            other => Err(Error::Parse(format!("unknown schedule kind `{other}`"))),
        }
    }

    /// The first `k_max` steps, validated positive and finite.
    pub fn steps(&self, k_max: usize) -> Result<Vec<f64>> {
        let steps: Vec<f64> = match self {
            StepSchedule::Constant { gamma } => vec![*gamma; k_max],
            StepSchedule::InverseK { c } => (1..=k_max).map(|k| c / k as f64).collect(),
            StepSchedule::Explicit { steps } => {
                if steps.len() < k_max {
                    return Err(Error::InvalidSchedule(format!(
                        "explicit schedule has {} steps, {} needed",
                        steps.len(),
                        k_max
                    )));
                }
                steps[..k_max].to_vec()
            }
        };
        if let Some(k) = steps.iter().position(|g| !(g.is_finite() && *g > 0.0)) {
            return Err(Error::InvalidSchedule(format!(
                "step {} is not positive and finite",
                k + 1
            )));
        }
        Ok(steps)
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, StepSchedule::Constant { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    /// The plain recursion; the run stops when an iterate leaves the domain.
    #[default]
    Plain,
    /// Iterates are clipped to the domain after each step (not the analyzed method).
    Projected,
}

/// Iterates `x_1..x_{K+1}`, subgradients `v_1..v_K` and steps `γ_1..γ_K`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub function: String,
    pub config_hash: String,
    pub mode: RunMode,
    pub iterates: Vec<Point>,
    pub subgradients: Vec<Vector>,
    pub steps: Vec<f64>,
    /// Index of the first iterate found outside the domain.
    pub escaped_at: Option<usize>,
}

impl Trajectory {
    /// Number of steps `K`.
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.iterates[0].dim()
    }

    /// `x_k` for `1 <= k <= K+1`.
    pub fn x(&self, k: usize) -> &Point {
        &self.iterates[k - 1]
    }

    /// `v_k` for `1 <= k <= K`.
    pub fn v(&self, k: usize) -> &Vector {
        &self.subgradients[k - 1]
    }

    /// `γ_k` for `1 <= k <= K`.
    pub fn gamma(&self, k: usize) -> f64 {
        self.steps[k - 1]
    }

    /// Largest `‖x_{k+1} - (x_k - γ_k v_k)‖` over the run.
    pub fn recursion_residual(&self) -> f64 {
        (1..=self.len())
            .map(|k| {
                self.x(k + 1)
                    .distance(&self.x(k).add_scaled(-self.gamma(k), self.v(k)))
            })
            .fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let d = self.dim();
        let mut out = String::from("k");
        for i in 1..=d {
            let _ = write!(out, ",x_{i}");
        }
        for i in 1..=d {
            let _ = write!(out, ",v_{i}");
        }
        out.push_str(",gamma\n");
        for k in 1..=self.len() + 1 {
            let _ = write!(out, "{k}");
            for c in self.x(k).iter() {
                let _ = write!(out, ",{c:?}");
            }
            if k <= self.len() {
                for c in self.v(k).iter() {
                    let _ = write!(out, ",{c:?}");
                }
                let _ = write!(out, ",{:?}", self.gamma(k));
            } else {
                for _ in 0..=d {
                    out.push(',');
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty trajectory file".into()))?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        if cols.len() < 4
            || cols[0] != "k"
            || cols[cols.len() - 1] != "gamma"
            || !(cols.len() - 2).is_multiple_of(2)
        {
            return Err(Error::Parse(format!("bad trajectory header `{header}`")));
        }
        let d = (cols.len() - 2) / 2;
        for i in 0..d {
            if cols[1 + i] != format!("x_{}", i + 1) || cols[1 + d + i] != format!("v_{}", i + 1) {
                return Err(Error::Parse(format!("bad trajectory header `{header}`")));
            }
        }
        let mut iterates = Vec::new();
        let mut subgradients = Vec::new();
        let mut steps = Vec::new();
        let rows: Vec<&str> = lines.collect();
        for (row, line) in rows.iter().enumerate() {
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != cols.len() {
                return Err(Error::DimensionMismatch {
                    expected: cols.len(),
                    got: f.len(),
                });
            }
            let k: usize = f[0]
                .parse()
                .map_err(|_| Error::Parse(format!("bad index `{}`", f[0])))?;
            if k != row + 1 {
                return Err(Error::Parse(format!("row {} carries index {k}", row + 1)));
            }
            let num = |t: &str| {
                t.parse::<f64>()
                    .map_err(|_| Error::Parse(format!("bad number `{t}` in row {k}")))
            };
            let x: Vec<f64> = f[1..=d].iter().map(|t| num(t)).collect::<Result<_>>()?;
            iterates.push(Point::new(x)?);
            let last = row + 1 == rows.len();
            if last {
                if f[d + 1..].iter().any(|t| !t.is_empty()) {
                    return Err(Error::Parse(
                        "final row must leave v and gamma empty".into(),
                    ));
                }
            } else {
                let v: Vec<f64> = f[d + 1..=2 * d]
                    .iter()
                    .map(|t| num(t))
                    .collect::<Result<_>>()?;
                subgradients.push(Point::new(v)?);
                steps.push(num(f[2 * d + 1])?);
            }
        }
        if iterates.is_empty() {
            return Err(Error::Parse("trajectory has no rows".into()));
        }
        Ok(Trajectory {
            function: String::new(),
            config_hash: String::new(),
            mode: RunMode::Plain,
            iterates,
            subgradients,
            steps,
            escaped_at: None,
        })
    }
}

/// Runs `k_max` steps from `x1`. In plain mode the run is truncated at the
/// first iterate outside the domain, which is kept and flagged.
pub fn run(
    f: &dyn Objective,
    domain: &DomainBox,
    x1: &Point,
    schedule: &StepSchedule,
    k_max: usize,
    mode: RunMode,
) -> Result<Trajectory> {
    if x1.dim() != f.dim() || domain.dim() != f.dim() {
        return Err(Error::DimensionMismatch {
            expected: f.dim(),
            got: x1.dim(),
        });
    }
    if !domain.contains(x1) {
        return Err(Error::Precondition(
            "starting point outside the domain".into(),
        ));
    }
    let steps = schedule.steps(k_max)?;
    let mut iterates = Vec::with_capacity(k_max + 1);
    let mut subgradients = Vec::with_capacity(k_max);
    let mut taken = Vec::with_capacity(k_max);
    let mut escaped_at = None;
    iterates.push(x1.clone());
    for (k, &gamma) in steps.iter().enumerate() {
        let x = &iterates[k];
        let v = f.subgradient(x);
        let mut next = x.add_scaled(-gamma, &v);
        if !next.is_finite() {
            return Err(Error::NonFinite { index: k + 2 });
        }
        subgradients.push(v);
        taken.push(gamma);
        if !domain.contains(&next) {
            match mode {
                RunMode::Plain => {
                    iterates.push(next);
                    escaped_at = Some(k + 2);
                    break;
                }
                RunMode::Projected => next = domain.clip(&next),
            }
        }
        iterates.push(next);
    }
    Ok(Trajectory {
        function: String::new(),
        config_hash: String::new(),
        mode,
        iterates,
        subgradients,
        steps: taken,
        escaped_at,
    })
}

/// Partition of `[k1, K]` into maximal runs on which the step stays within
/// a factor two of the run's first step. Intervals are 1-based and
/// inclusive. The schedule must be non-increasing.
pub fn doubling_intervals(steps: &[f64], k1: usize) -> Result<Vec<(usize, usize)>> {
    let k_max = steps.len();
    if k1 == 0 || k1 > k_max {
        return Err(Error::Precondition(format!("k1={k1} outside [1, {k_max}]")));
    }
    if steps.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::InvalidSchedule(
            "schedule is not non-increasing".into(),
        ));
    }
    let mut out = Vec::new();
    let mut start = k1;
    loop {
        let head = steps[start - 1];
        let next = (start + 1..=k_max).find(|&k| steps[k - 1] <= head / 2.0);
        match next {
            Some(n) => {
                out.push((start, n - 1));
                start = n;
            }
            None => {
                out.push((start, k_max));
                return Ok(out);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn doubling_for_inverse_k() {
        let steps = StepSchedule::InverseK { c: 1.0 }.steps(8).unwrap();
        assert_eq!(
            doubling_intervals(&steps, 1).unwrap(),
            vec![(1, 1), (2, 3), (4, 7), (8, 8)]
        );
    }

    #[test]
    fn doubling_for_constant_is_single_interval() {
        let steps = StepSchedule::Constant { gamma: 0.1 }.steps(10).unwrap();
        assert_eq!(doubling_intervals(&steps, 1).unwrap(), vec![(1, 10)]);
    }

    #[test]
    fn increasing_schedule_rejected() {
        let s = StepSchedule::Explicit {
            steps: vec![0.1, 0.2],
        };
        assert!(doubling_intervals(&s.steps(2).unwrap(), 1).is_err());
    }

    #[test]
    fn schedule_parsing() {
        assert_eq!(
            StepSchedule::parse("inverse_k:0.01").unwrap(),
            StepSchedule::InverseK { c: 0.01 }
        );
        assert!(StepSchedule::parse("weird:1").is_err());
        assert!(StepSchedule::parse("constant:-1")
            .unwrap()
            .steps(3)
            .is_err());
    }
}
