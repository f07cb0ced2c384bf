//! Strata selection: membership tables, the interval-splitting builder
//! (main loop, left check and inside construction) and switch sets.
//!
//! Iteration indices are 1-based throughout this module, matching the
//! trajectory files.

use crate::descent::Trajectory;
use crate::error::{Error, Result};
use crate::neighborhoods::{NeighborhoodParams, Neighborhoods};
use crate::stratification::Stratification;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Inclusive interval of iteration indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: usize,
    pub hi: usize,
}

impl Interval {
    pub fn new(lo: usize, hi: usize) -> Self {
        Interval { lo, hi }
    }

    pub fn len(&self) -> usize {
        self.hi + 1 - self.lo
    }

    pub fn is_empty(&self) -> bool {
        self.hi < self.lo
    }
}

/// Inner/outer membership of every iterate in every stratum's
/// neighborhoods, plus the nearest full-dimensional stratum per iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct MembershipTable {
    k_max: usize,
    ambient_dim: usize,
    dims: Vec<usize>,
    inner: Vec<Vec<bool>>,
    outer: Vec<Vec<bool>>,
    fallback: Vec<usize>,
}

/// Hand-written table: one string per stratum with `-` (outside), `o`
/// (outer only) or `i` (inner, hence outer) for each iteration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SyntheticTable {
    pub ambient_dim: usize,
    pub strata: Vec<SyntheticStratum>,
    pub fallback: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SyntheticStratum {
    pub dim: usize,
    pub cells: String,
}

impl MembershipTable {
    /// Table for iterates `x_lo..x_hi` of a trajectory (re-indexed from 1).
    pub fn from_trajectory(
        strat: &Stratification,
        params: &NeighborhoodParams,
        traj: &Trajectory,
        range: Interval,
    ) -> Result<Self> {
        if range.lo == 0 || range.hi > traj.len() || range.is_empty() {
            return Err(Error::Precondition(format!(
                "range [{}, {}] outside [1, {}]",
                range.lo,
                range.hi,
                traj.len()
            )));
        }
        if traj.dim() != strat.ambient_dim() {
            return Err(Error::DimensionMismatch {
                expected: strat.ambient_dim(),
                got: traj.dim(),
            });
        }
        let nb = Neighborhoods::new(strat, params);
        let n = strat.len();
        let k_max = range.len();
        let mut inner = vec![vec![false; k_max]; n];
        let mut outer = vec![vec![false; k_max]; n];
        let mut fallback = Vec::with_capacity(k_max);
        for (i, k) in (range.lo..=range.hi).enumerate() {
            let x = traj.x(k);
            let p = nb.profile(x);
            for id in 0..n {
                inner[id][i] = nb.inner_at(&p, id);
                outer[id][i] = nb.outer_at(&p, id);
            }
            fallback.push(strat.nearest_full_dim(x));
        }
        Ok(MembershipTable {
            k_max,
            ambient_dim: strat.ambient_dim(),
            dims: strat.strata().iter().map(|s| s.dim).collect(),
            inner,
            outer,
            fallback,
        })
    }

    pub fn synthetic(spec: &SyntheticTable) -> Result<Self> {
        let k_max = spec.fallback.len();
        if k_max == 0 {
            return Err(Error::Empty("synthetic table has no iterations".into()));
        }
        let mut inner = Vec::new();
        let mut outer = Vec::new();
        for (id, s) in spec.strata.iter().enumerate() {
            if s.cells.chars().count() != k_max {
                return Err(Error::DimensionMismatch {
                    expected: k_max,
                    got: s.cells.chars().count(),
                });
            }
            if s.dim > spec.ambient_dim {
                return Err(Error::InvalidStratification(format!(
                    "stratum {id} too large"
                )));
            }
            let mut i_row = Vec::with_capacity(k_max);
            let mut o_row = Vec::with_capacity(k_max);
            for c in s.cells.chars() {
                let (i, o) = match c {
                    '-' => (false, false),
                    'o' => (false, true),
                    'i' => (true, true),
                    other => return Err(Error::Parse(format!("bad table cell `{other}`"))),
                };
                i_row.push(i);
                o_row.push(o);
            }
            inner.push(i_row);
            outer.push(o_row);
        }
        for &f in &spec.fallback {
            if spec.strata.get(f).map(|s| s.dim) != Some(spec.ambient_dim) {
                return Err(Error::InvalidStratification(format!(
                    "fallback {f} is not a full-dimensional stratum"
                )));
            }
        }
        Ok(MembershipTable {
            k_max,
            ambient_dim: spec.ambient_dim,
            dims: spec.strata.iter().map(|s| s.dim).collect(),
            inner,
            outer,
            fallback: spec.fallback.clone(),
        })
    }

    pub fn len(&self) -> usize {
        self.k_max
    }

    pub fn is_empty(&self) -> bool {
        self.k_max == 0
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn inner(&self, id: usize, k: usize) -> bool {
        self.inner[id][k - 1]
    }

    pub fn outer(&self, id: usize, k: usize) -> bool {
        self.outer[id][k - 1]
    }

    fn ids_with_dim(&self, j: usize) -> impl Iterator<Item = usize> + '_ {
        self.dims
            .iter()
            .enumerate()
            .filter(move |(_, &d)| d == j)
            .map(|(i, _)| i)
    }

    /// First entry into the inner neighborhood of `id` within `iv`.
    pub fn k_left(&self, id: usize, iv: Interval) -> Option<usize> {
        (iv.lo..=iv.hi).find(|&k| self.inner(id, k))
    }

    /// Last index `k` of `iv` such that `x_{lo..k}` stays in the outer
    /// neighborhood of `id` and `x_k` is in its inner neighborhood.
    pub fn k_right(&self, id: usize, iv: Interval) -> Option<usize> {
        let mut best = None;
        for k in iv.lo..=iv.hi {
            if !self.outer(id, k) {
                break;
            }
            if self.inner(id, k) {
                best = Some(k);
            }
        }
        best
    }

    pub fn all_outer(&self, id: usize, iv: Interval) -> bool {
        (iv.lo..=iv.hi).all(|k| self.outer(id, k))
    }
}

/// One assignment made by the builder, recorded for tracing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildStep {
    pub pass: usize,
    pub routine: String,
    pub stratum: usize,
    pub interval: Interval,
}

struct Builder<'t> {
    table: &'t MembershipTable,
    assign: Vec<Option<usize>>,
    trace: Vec<BuildStep>,
}

impl<'t> Builder<'t> {
    fn set(&mut self, pass: usize, routine: &str, id: usize, iv: Interval) {
        for k in iv.lo..=iv.hi {
            debug_assert!(self.assign[k - 1].is_none(), "index {k} assigned twice");
            self.assign[k - 1] = Some(id);
        }
        self.trace.push(BuildStep {
            pass,
            routine: routine.to_string(),
            stratum: id,
            interval: iv,
        });
    }

    /// Extends a block of dimension `j` reaching in from the left of `iv`.
    fn check_left(&mut self, iv: Interval, j: usize) -> Option<Interval> {
        let mut best: Option<(usize, usize)> = None;
        for id in self.table.ids_with_dim(j) {
            if let Some(kr) = self.table.k_right(id, iv) {
                if best.is_none_or(|(_, b)| kr > b) {
                    best = Some((id, kr));
                }
            }
        }
        let Some((id, kr)) = best else {
            return Some(iv);
        };
        if self.table.all_outer(id, iv) {
            self.set(j, "check_left", id, iv);
            return None;
        }
        self.set(j, "check_left", id, Interval::new(iv.lo, kr));
        Some(Interval::new(kr + 1, iv.hi))
    }

    /// Assigns the earliest inner entry of dimension `j` within `iv`.
    fn build_inside(&mut self, iv: Interval, j: usize) -> Option<Interval> {
        let mut best: Option<(usize, usize)> = None;
        for id in self.table.ids_with_dim(j) {
            if let Some(kl) = self.table.k_left(id, iv) {
                if best.is_none_or(|(_, b)| kl < b) {
                    best = Some((id, kl));
                }
            }
        }
        let (id, kl) = best?;
        debug_assert!(
            (iv.lo..kl).all(|k| self.table.ids_with_dim(j).all(|x| !self.table.inner(x, k)))
        );
        let rest = Interval::new(kl, iv.hi);
        if self.table.all_outer(id, rest) {
            self.set(j, "build_inside", id, rest);
            return None;
        }
        let kr = self
            .table
            .k_right(id, rest)
            .expect("the entry index lies in the inner neighborhood");
        self.set(j, "build_inside", id, Interval::new(kl, kr));
        Some(Interval::new(kr + 1, iv.hi))
    }

    fn unassigned_runs(&self) -> Vec<Interval> {
        let mut runs = Vec::new();
        let mut start = None;
        for k in 1..=self.table.k_max {
            match (self.assign[k - 1].is_none(), start) {
                (true, None) => start = Some(k),
                (false, Some(s)) => {
                    runs.push(Interval::new(s, k - 1));
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(s) = start {
            runs.push(Interval::new(s, self.table.k_max));
        }
        runs
    }
}

/// A strata selection function `k ↦ Ψ_k` on `[1, K]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectionFunction {
    pub assignments: Vec<usize>,
    pub trace: Vec<BuildStep>,
}

impl SelectionFunction {
    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    /// `Ψ_k` for `1 <= k <= K`.
    pub fn at(&self, k: usize) -> usize {
        self.assignments[k - 1]
    }

    pub fn to_doc(&self, dims: &[usize]) -> SelectionDoc {
        let sw = switch_sets(&self.assignments, dims);
        let to_map = |v: &Vec<Vec<usize>>| {
            v.iter()
                .enumerate()
                .map(|(i, s)| (i, s.clone()))
                .collect::<BTreeMap<_, _>>()
        };
        SelectionDoc {
            k: self.len(),
            assignments: self.assignments.clone(),
            lswitch: to_map(&sw.lswitch),
            rswitch: to_map(&sw.rswitch),
        }
    }

    pub fn to_json(&self, dims: &[usize]) -> String {
        serde_json::to_string_pretty(&self.to_doc(dims)).expect("selection serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: SelectionDoc = serde_json::from_str(text)?;
        if doc.assignments.len() != doc.k {
            return Err(Error::DimensionMismatch {
                expected: doc.k,
                got: doc.assignments.len(),
            });
        }
        Ok(SelectionFunction {
            assignments: doc.assignments,
            trace: Vec::new(),
        })
    }
}

/// Serialized selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionDoc {
    #[serde(rename = "K")]
    pub k: usize,
    pub assignments: Vec<usize>,
    pub lswitch: BTreeMap<usize, Vec<usize>>,
    pub rswitch: BTreeMap<usize, Vec<usize>>,
}

/// Runs the builder on a membership table.
pub fn build_from_table(table: &MembershipTable) -> Result<SelectionFunction> {
    if table.is_empty() {
        return Err(Error::Empty("cannot build a selection for K = 0".into()));
    }
    let mut b = Builder {
        table,
        assign: vec![None; table.k_max],
        trace: Vec::new(),
    };
    for j in 0..table.ambient_dim {
        if table.ids_with_dim(j).next().is_none() {
            continue;
        }
        for run in b.unassigned_runs() {
            let mut pending = b.check_left(run, j);
            while let Some(iv) = pending {
                let next = b.build_inside(iv, j);
                if let Some(n) = next {
                    assert!(n.lo > iv.lo, "builder failed to make progress");
                }
                pending = next;
            }
        }
    }
    for k in 1..=table.k_max {
        if b.assign[k - 1].is_none() {
            let id = table.fallback[k - 1];
            b.set(table.ambient_dim, "fallback", id, Interval::new(k, k));
        }
    }
    Ok(SelectionFunction {
        assignments: b.assign.into_iter().map(|a| a.expect("assigned")).collect(),
        trace: b.trace,
    })
}

/// Builds a selection for a constant-step trajectory.
pub fn build_selection(
    strat: &Stratification,
    traj: &Trajectory,
    params: &NeighborhoodParams,
) -> Result<SelectionFunction> {
    if traj.is_empty() {
        return Err(Error::Empty("cannot build a selection for K = 0".into()));
    }
    let table =
        MembershipTable::from_trajectory(strat, params, traj, Interval::new(1, traj.len()))?;
    build_from_table(&table)
}

/// Builds one selection per doubling interval, each with its own
/// parameters, and concatenates them.
pub fn build_selection_varying(
    strat: &Stratification,
    traj: &Trajectory,
    intervals: &[(usize, usize)],
    params: &[NeighborhoodParams],
) -> Result<SelectionFunction> {
    if intervals.len() != params.len() {
        return Err(Error::DimensionMismatch {
            expected: intervals.len(),
            got: params.len(),
        });
    }
    let mut assignments = Vec::with_capacity(traj.len());
    let mut trace = Vec::new();
    let mut expected_lo = intervals.first().map_or(1, |i| i.0);
    for (&(lo, hi), p) in intervals.iter().zip(params) {
        if lo != expected_lo {
            return Err(Error::Precondition("intervals must be contiguous".into()));
        }
        let table = MembershipTable::from_trajectory(strat, p, traj, Interval::new(lo, hi))?;
        let sel = build_from_table(&table)?;
        assignments.extend_from_slice(&sel.assignments);
        trace.extend(sel.trace.into_iter().map(|mut s| {
            s.interval = Interval::new(s.interval.lo + lo - 1, s.interval.hi + lo - 1);
            s
        }));
        expected_lo = hi + 1;
    }
    if assignments.len() != traj.len() || intervals.first().map(|i| i.0) != Some(1) {
        return Err(Error::Precondition("intervals must cover [1, K]".into()));
    }
    Ok(SelectionFunction { assignments, trace })
}

/// Switch sets of every stratum.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SwitchSets {
    /// Indices `k ∈ [2, K]` entering the stratum from one of no lower dimension.
    pub lswitch: Vec<Vec<usize>>,
    /// Indices `k ∈ [1, K-1]` leaving the stratum for one of no lower dimension.
    pub rswitch: Vec<Vec<usize>>,
}

pub fn switch_sets(assign: &[usize], dims: &[usize]) -> SwitchSets {
    let n = dims.len();
    let k_max = assign.len();
    let mut lswitch = vec![Vec::new(); n];
    let mut rswitch = vec![Vec::new(); n];
    for k in 2..=k_max {
        let (cur, prev) = (assign[k - 1], assign[k - 2]);
        if cur != prev && dims[cur] <= dims[prev] {
            lswitch[cur].push(k);
        }
    }
    for k in 1..k_max {
        let (cur, next) = (assign[k - 1], assign[k]);
        if cur != next && dims[cur] <= dims[next] {
            rswitch[cur].push(k);
        }
    }
    SwitchSets { lswitch, rswitch }
}
