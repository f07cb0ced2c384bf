//! Experiment configuration and the commands behind the command-line tool.
//!
//! Every command resolves an [`ExperimentConfig`] into concrete values,
//! runs the pipeline and writes its artifacts into one output directory.
//! Outputs depend only on the resolved configuration, so two runs of the
//! same configuration produce byte-identical files.

use crate::catalog::{CatalogFunction, Constants};
use crate::descent::{doubling_intervals, run, RunMode, StepSchedule, Trajectory};
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::neighborhoods::{
    auto_exponents, gamma0_ceiling, varying_neighborhoods, NeighborhoodParams, ParamCheck,
    ValidationTier,
};
use crate::selection::{build_selection, build_selection_varying, SelectionFunction};
use crate::stratification::Stratification;
use crate::svg;
use crate::verify::constants::estimate_constants;
use crate::verify::kl::{kl_monitor, KlReport, KlThresholds};
use crate::verify::ledger::{
    descent_ledger, varying_ledger, DescentLedger, DescentSummary, VaryingSummary,
};
use crate::verify::rates::{rate_report, rule_gamma, RateReport, StepRule};
use crate::verify::{
    is_good, is_valid, stationarity_measure, switch_count_bound, GoodViolation, ParamSchedule,
    SwitchCount, ValidityReport,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

/// Environment variable overriding the output root.
pub const OUT_ENV: &str = "STRATA_LAB_OUT";
pub const DEFAULT_OUT: &str = "strata-lab-out";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Keyword {
    Auto,
}

/// An exponent given as a number or as `"auto"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Exponent {
    Value(f64),
    Keyword(Keyword),
}

impl std::str::FromStr for Exponent {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s == "auto" {
            return Ok(Exponent::Keyword(Keyword::Auto));
        }
        s.parse::<f64>()
            .map(Exponent::Value)
            .map_err(|_| Error::Parse(format!("exponent must be a number or `auto`, got `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstantsKeyword {
    /// The values stored with the catalog entry.
    Frozen,
    /// Fresh sampling estimates with safety margins.
    Estimate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ConstantsSpec {
    Keyword(ConstantsKeyword),
    Explicit(Constants),
}

impl std::str::FromStr for ConstantsSpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "frozen" => Ok(ConstantsSpec::Keyword(ConstantsKeyword::Frozen)),
            "estimate" => Ok(ConstantsSpec::Keyword(ConstantsKeyword::Estimate)),
            other => serde_json::from_str(other).map_err(|e| {
                Error::Parse(format!(
                    "constants must be frozen, estimate or a JSON object: {e}"
                ))
            }),
        }
    }
}

/// Experiment description. Every field is optional; command-line flags are
/// layered on top with [`ExperimentConfig::overlay`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub function: Option<String>,
    pub start: Option<Vec<f64>>,
    /// Shorthand for a constant schedule.
    pub gamma: Option<f64>,
    /// `constant:γ`, `inverse_k:c` or `explicit:γ1,γ2,...`.
    pub schedule: Option<String>,
    #[serde(rename = "K")]
    pub k: Option<usize>,
    pub alpha: Option<Exponent>,
    pub beta: Option<Exponent>,
    pub gamma0: Option<f64>,
    pub constants: Option<ConstantsSpec>,
    pub validation: Option<ValidationTier>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub mode: Option<String>,
    /// Horizons of a rate sweep.
    pub ks: Option<Vec<usize>>,
    /// Clip iterates to the domain instead of stopping at the first escape.
    pub projected: Option<bool>,
    pub kl: Option<KlThresholds>,
    pub estimate_samples: Option<usize>,
    pub from: Option<PathBuf>,
    pub trajectory: Option<PathBuf>,
    pub selection: Option<PathBuf>,
    pub stratification: Option<PathBuf>,
    pub params: Option<PathBuf>,
}

macro_rules! overlay_fields {
    ($base:ident, $top:ident; $($f:ident),*) => {
        $( if $top.$f.is_some() { $base.$f = $top.$f.clone(); } )*
    };
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Fields set in `top` replace those of `self`.
    pub fn overlay(mut self, top: &ExperimentConfig) -> Self {
        overlay_fields!(self, top; function, start, gamma, schedule, k, alpha, beta, gamma0,
            constants, validation, out, seed, mode, ks, projected, kl, estimate_samples,
            from, trajectory, selection, stratification, params);
        self
    }
}

/// Output root: explicit flag, then the environment, then the config file.
pub fn output_root(flag: Option<&Path>, config: Option<&Path>) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    if let Some(env) = std::env::var_os(OUT_ENV).filter(|v| !v.is_empty()) {
        return PathBuf::from(env);
    }
    config.map_or_else(|| PathBuf::from(DEFAULT_OUT), Path::to_path_buf)
}

/// The five commands of the tool.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Run,
    Verify,
    RateSweep,
    Kl,
    Varying,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Run => "run",
            Command::Verify => "verify",
            Command::RateSweep => "rate-sweep",
            Command::Kl => "kl",
            Command::Varying => "varying",
        }
    }
}

/// Fully resolved configuration.
#[derive(Debug, Clone, Serialize)]
pub struct Resolved {
    pub command: Command,
    pub function: String,
    pub start: Point,
    pub schedule: StepSchedule,
    #[serde(rename = "K")]
    pub k: usize,
    pub alpha: f64,
    pub beta: f64,
    pub gamma0: Option<f64>,
    pub constants: Constants,
    pub constants_source: String,
    pub validation: ValidationTier,
    pub seed: u64,
    pub run_mode: RunMode,
    pub ks: Vec<usize>,
    pub kl: KlThresholds,
    #[serde(skip)]
    pub catalog: CatalogFunction,
}

impl Resolved {
    /// SHA-256 of the canonical JSON of the resolved values, truncated to
    /// 16 hex digits.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("serializable");
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

pub fn resolve(cfg: &ExperimentConfig, command: Command) -> Result<Resolved> {
    let name = cfg
        .function
        .clone()
        .unwrap_or_else(|| "appendix_fig1".into());
    let f = CatalogFunction::get(&name)?;
    let start = match &cfg.start {
        Some(v) => Point::new(v.clone())?,
        None => f.reference_start().clone(),
    };
    let n = f.stratification().ambient_dim();
    if start.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: start.dim(),
        });
    }
    let varying_default = matches!(command, Command::Kl | Command::Varying);
    let schedule = match (&cfg.schedule, cfg.gamma) {
        (Some(_), Some(_)) => {
            return Err(Error::InvalidSchedule(
                "give either `gamma` or `schedule`, not both".into(),
            ))
        }
        (Some(s), None) => StepSchedule::parse(s)?,
        (None, Some(g)) => StepSchedule::Constant { gamma: g },
        (None, None) if varying_default => StepSchedule::InverseK {
            c: f.reference_gamma(),
        },
        (None, None) => StepSchedule::Constant {
            gamma: f.reference_gamma(),
        },
    };
    let k = cfg.k.unwrap_or(match command {
        Command::Kl => 100_000,
        _ => 5000,
    });
    if k == 0 {
        return Err(Error::Empty("K must be positive".into()));
    }
    let r = f.stratification().max_rank();
    let (auto_a, auto_b) = auto_exponents(r);
    let beta = match cfg.beta {
        Some(Exponent::Value(b)) => b,
        _ => auto_b,
    };
    let alpha = match cfg.alpha {
        Some(Exponent::Value(a)) => a,
        // `α = β/3` follows an explicit `β` as well.
        _ if matches!(cfg.beta, Some(Exponent::Value(_))) => beta / 3.0,
        _ => auto_a,
    };
    let seed = cfg.seed.unwrap_or(0);
    let (constants, constants_source) = match cfg.constants {
        None | Some(ConstantsSpec::Keyword(ConstantsKeyword::Frozen)) => {
            (*f.constants(), "frozen".to_string())
        }
        Some(ConstantsSpec::Keyword(ConstantsKeyword::Estimate)) => {
            let n = cfg.estimate_samples.unwrap_or(20_000);
            if n < 100 {
                return Err(Error::Precondition(
                    "estimate_samples must be at least 100".into(),
                ));
            }
            (
                estimate_constants(&f, n, seed)?.frozen,
                format!("estimate({n} samples, seed {seed})"),
            )
        }
        Some(ConstantsSpec::Explicit(c)) => (c, "explicit".to_string()),
    };
    let ks = cfg.ks.clone().unwrap_or_else(|| vec![2000, 8000, 32000]);
    Ok(Resolved {
        command,
        function: f.name().to_string(),
        start,
        schedule,
        k,
        alpha,
        beta,
        gamma0: cfg.gamma0,
        constants,
        constants_source,
        validation: cfg.validation.unwrap_or_default(),
        seed,
        run_mode: if cfg.projected.unwrap_or(false) {
            RunMode::Projected
        } else {
            RunMode::Plain
        },
        ks,
        kl: cfg.kl.unwrap_or_default(),
        catalog: f,
    })
}

/// Result of a command: where files went, the verdict and notes for the
/// terminal.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub dir: PathBuf,
    pub pass: bool,
    pub files: Vec<String>,
    pub messages: Vec<String>,
}

struct Writer {
    dir: PathBuf,
    files: Vec<String>,
}

impl Writer {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
        Ok(Writer {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn text(&mut self, name: &str, body: &str) -> Result<()> {
        let p = self.dir.join(name);
        fs::write(&p, body).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut body = serde_json::to_string_pretty(value)?;
        body.push('\n');
        self.text(name, &body)
    }

    fn finish(self, pass: bool, messages: Vec<String>) -> Outcome {
        Outcome {
            dir: self.dir,
            pass,
            files: self.files,
            messages,
        }
    }
}

/// Neighborhood parameters for a run, checked against the requested tier.
fn base_params(res: &Resolved, first_step: f64) -> Result<NeighborhoodParams> {
    let r = res.catalog.stratification().max_rank();
    let p = NeighborhoodParams::resolve(
        res.alpha,
        res.beta,
        Some(first_step),
        res.gamma0,
        r,
        res.constants,
    )?;
    p.require(res.validation)?;
    Ok(p)
}

/// Trajectory, parameter schedule and selection of a resolved experiment.
pub struct Pipeline {
    pub trajectory: Trajectory,
    pub schedule: ParamSchedule,
    pub selection: SelectionFunction,
    pub checks: Vec<ParamCheck>,
}

pub fn pipeline(res: &Resolved) -> Result<Pipeline> {
    let f = &res.catalog;
    let strat = f.stratification();
    let mut traj = run(
        f,
        f.domain(),
        &res.start,
        &res.schedule,
        res.k,
        res.run_mode,
    )?;
    traj.function = res.function.clone();
    traj.config_hash = res.hash();
    let base = base_params(res, traj.steps[0])?;
    let checks = base.checks();
    let (schedule, selection) = if res.schedule.is_constant() {
        let sel = build_selection(strat, &traj, &base)?;
        (ParamSchedule::constant(base, traj.len()), sel)
    } else {
        let intervals = doubling_intervals(&traj.steps, 1)?;
        let params = (0..intervals.len())
            .map(|i| varying_neighborhoods(&base, &intervals, &traj.steps, i))
            .collect::<Result<Vec<_>>>()?;
        let sel = build_selection_varying(strat, &traj, &intervals, &params)?;
        (ParamSchedule { intervals, params }, sel)
    };
    Ok(Pipeline {
        trajectory: traj,
        schedule,
        selection,
        checks,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoodnessDoc {
    pub good: bool,
    pub violations: usize,
    /// First violations, at most 20.
    pub first: Vec<GoodViolation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaritySummary {
    pub max_epsilon: Option<f64>,
    pub max_delta: f64,
    pub undefined_epsilon: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub command: String,
    pub function: String,
    pub config_hash: String,
    #[serde(rename = "K")]
    pub k: usize,
    pub steps_taken: usize,
    pub escaped_at: Option<usize>,
    pub run_mode: RunMode,
    pub constants: Constants,
    pub constants_source: String,
    pub validation: ValidationTier,
    pub alpha: f64,
    pub beta: f64,
    pub gamma0: f64,
    pub parameter_checks: Vec<ParamCheck>,
    pub intervals: usize,
    pub validity: ValidityReport,
    pub goodness: GoodnessDoc,
    pub ledger: DescentSummary,
    pub varying: Option<VaryingSummary>,
    pub switch_counts: Option<Vec<SwitchCount>>,
    pub stationarity: StationaritySummary,
    pub recursion_residual: f64,
    /// Named pass/fail results; the run passes when all hold.
    pub invariants: BTreeMap<String, bool>,
    pub pass: bool,
}

fn run_report(
    res: &Resolved,
    pipe: &Pipeline,
    command: Command,
) -> Result<(RunReport, DescentLedger)> {
    let f = &res.catalog;
    let strat = f.stratification();
    let (traj, sched, sel) = (&pipe.trajectory, &pipe.schedule, &pipe.selection);
    let validity = is_valid(strat, traj, sched, sel)?;
    let good = is_good(strat, traj, sched, sel)?;
    let (ledger, varying) = if sched.intervals.len() > 1 || !res.schedule.is_constant() {
        let (l, v) = varying_ledger(f, traj, sel, sched)?;
        (l, Some(v))
    } else {
        (descent_ledger(f, traj, sel, sched)?, None)
    };
    let switch_counts = res
        .schedule
        .is_constant()
        .then(|| switch_count_bound(strat, sel, &sched.params[0]));
    let stat = stationarity_measure(f, traj, sel)?;
    let eps: Vec<f64> = stat.iter().filter_map(|s| s.0).collect();
    let stationarity = StationaritySummary {
        max_epsilon: (!eps.is_empty()).then(|| eps.iter().copied().fold(0.0, f64::max)),
        max_delta: stat.iter().map(|s| s.1).fold(0.0, f64::max),
        undefined_epsilon: stat.len() - eps.len(),
    };
    let s = &ledger.summary;
    let mut inv = BTreeMap::new();
    inv.insert("valid".to_string(), validity.valid);
    inv.insert("good".to_string(), good.good);
    inv.insert("valid_descent".to_string(), s.valid_descent_holds);
    inv.insert("switching_payment".to_string(), s.switching_payment_holds);
    inv.insert(
        "payments_within_budget".to_string(),
        s.payments_within_budget,
    );
    inv.insert(
        "projection_gap".to_string(),
        s.projection_gap_violations == 0,
    );
    inv.insert("descent_lemma_steps".to_string(), s.lemma_violations == 0);
    inv.insert(
        "excluded_at_most_1pct".to_string(),
        s.excluded_fraction <= 0.01,
    );
    inv.insert("stayed_in_domain".to_string(), traj.escaped_at.is_none());
    inv.insert(
        "recursion_exact".to_string(),
        traj.recursion_residual() == 0.0,
    );
    if let Some(sc) = &switch_counts {
        inv.insert("switch_counts".to_string(), sc.iter().all(|c| c.holds));
    }
    let pass = inv.values().all(|v| *v);
    let report = RunReport {
        command: command.name().to_string(),
        function: res.function.clone(),
        config_hash: traj.config_hash.clone(),
        k: res.k,
        steps_taken: traj.len(),
        escaped_at: traj.escaped_at,
        run_mode: res.run_mode,
        constants: res.constants,
        constants_source: res.constants_source.clone(),
        validation: res.validation,
        alpha: res.alpha,
        beta: res.beta,
        gamma0: sched.params[0].gamma0,
        parameter_checks: pipe.checks.clone(),
        intervals: sched.intervals.len(),
        validity,
        goodness: GoodnessDoc {
            good: good.good,
            violations: good.violations.len(),
            first: good.violations.iter().take(20).cloned().collect(),
        },
        ledger: ledger.summary.clone(),
        varying,
        switch_counts,
        stationarity,
        recursion_residual: traj.recursion_residual(),
        invariants: inv,
        pass,
    };
    Ok((report, ledger))
}

fn write_run_artifacts(w: &mut Writer, res: &Resolved, pipe: &Pipeline) -> Result<()> {
    let strat = res.catalog.stratification();
    let dims: Vec<usize> = strat.strata().iter().map(|s| s.dim).collect();
    w.text("trajectory.csv", &pipe.trajectory.to_csv())?;
    w.text("selection.json", &pipe.selection.to_json(&dims))?;
    w.json("stratification.json", strat)?;
    w.json("params.json", &pipe.schedule)?;
    w.text(
        "trajectory.svg",
        &svg::trajectory_svg(strat, &pipe.trajectory.iterates, &res.function),
    )
}

fn run_like(cfg: &ExperimentConfig, out: &Path, command: Command) -> Result<Outcome> {
    let res = resolve(cfg, command)?;
    let pipe = pipeline(&res)?;
    let (report, ledger) = run_report(&res, &pipe, command)?;
    let mut w = Writer::new(out)?;
    write_run_artifacts(&mut w, &res, &pipe)?;
    w.text("ledger.csv", &ledger.to_csv())?;
    w.json("report.json", &report)?;
    let failed: Vec<String> = report
        .invariants
        .iter()
        .filter(|(_, v)| !**v)
        .map(|(k, _)| format!("failed: {k}"))
        .collect();
    let mut messages = vec![format!(
        "{} {} K={} hash={} pass={}",
        command.name(),
        res.function,
        res.k,
        report.config_hash,
        report.pass
    )];
    if let Some(k) = report.escaped_at {
        messages.push(format!("trajectory left the domain at k={k}"));
    }
    messages.extend(failed);
    Ok(w.finish(report.pass, messages))
}

/// Runs the method, builds the selection and writes the trajectory,
/// selection, ledger, report and plot.
pub fn cmd_run(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    run_like(cfg, out, Command::Run)
}

/// Same as [`cmd_run`] for a decreasing schedule, with per-interval
/// parameters and the varying-step summary in the report.
pub fn cmd_varying(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    let res = resolve(cfg, Command::Varying)?;
    if res.schedule.is_constant() {
        return Err(Error::InvalidSchedule(
            "the varying command needs a decreasing schedule".into(),
        ));
    }
    run_like(cfg, out, Command::Varying)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    #[serde(rename = "K")]
    pub k: usize,
    pub validity: ValidityReport,
    pub goodness: GoodnessDoc,
    pub pass: bool,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// Checks validity and goodness of stored artifacts.
pub fn cmd_verify(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    let base = cfg.from.clone().unwrap_or_else(|| PathBuf::from("."));
    let pick = |p: &Option<PathBuf>, name: &str| p.clone().unwrap_or_else(|| base.join(name));
    let traj = Trajectory::from_csv(&read(&pick(&cfg.trajectory, "trajectory.csv"))?)?;
    let sel = SelectionFunction::from_json(&read(&pick(&cfg.selection, "selection.json"))?)?;
    let strat: Stratification =
        serde_json::from_str(&read(&pick(&cfg.stratification, "stratification.json"))?)?;
    let sched: ParamSchedule = serde_json::from_str(&read(&pick(&cfg.params, "params.json"))?)?;
    if traj.dim() != strat.ambient_dim() {
        return Err(Error::DimensionMismatch {
            expected: strat.ambient_dim(),
            got: traj.dim(),
        });
    }
    if sel.len() != traj.len() {
        return Err(Error::DimensionMismatch {
            expected: traj.len(),
            got: sel.len(),
        });
    }
    if let Some(&bad) = sel.assignments.iter().find(|&&id| id >= strat.len()) {
        return Err(Error::UnknownStratum(bad));
    }
    let covered = sched.intervals.first().map(|i| i.0) == Some(1)
        && sched.intervals.last().map(|i| i.1) == Some(traj.len())
        && sched.intervals.len() == sched.params.len();
    if !covered {
        return Err(Error::DimensionMismatch {
            expected: traj.len(),
            got: sched.intervals.last().map_or(0, |i| i.1),
        });
    }
    let validity = is_valid(&strat, &traj, &sched, &sel)?;
    let good = is_good(&strat, &traj, &sched, &sel)?;
    let pass = validity.valid && good.good;
    let mut messages = Vec::new();
    if let Some((k, id, why)) = &validity.first_violation {
        messages.push(format!("invalid at k={k}: stratum {id} {why}"));
    }
    if let Some(v) = good.violations.first() {
        messages.push(format!(
            "not good: clause {} for stratum {} at k={}",
            v.clause, v.stratum, v.index
        ));
    }
    messages.push(format!("valid={} good={}", validity.valid, good.good));
    let report = VerifyReport {
        k: traj.len(),
        validity,
        goodness: GoodnessDoc {
            good: good.good,
            violations: good.violations.len(),
            first: good.violations.iter().take(20).cloned().collect(),
        },
        pass,
    };
    let mut w = Writer::new(out)?;
    w.json("report.json", &report)?;
    Ok(w.finish(pass, messages))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub config_hash: String,
    pub start: Point,
    pub constants: Constants,
    pub skipped: Vec<usize>,
    pub report: RateReport,
    pub invariants: BTreeMap<String, bool>,
    pub pass: bool,
}

/// Rate sweep over the configured horizons with `γ = K^{-1 + 2/(3R+8)}`,
/// or a fixed step when `gamma` is set.
pub fn cmd_rate_sweep(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    if cfg.ks.as_ref().is_some_and(|v| v.is_empty()) {
        return Err(Error::Empty("the K list is empty".into()));
    }
    let res = resolve(cfg, Command::RateSweep)?;
    let f = &res.catalog;
    let r = f.stratification().max_rank();
    let rule = match cfg.gamma {
        Some(gamma) => StepRule::Fixed { gamma },
        None => StepRule::Corollary,
    };
    let (alpha, beta) = auto_exponents(r);
    let gamma0 = res
        .gamma0
        .unwrap_or_else(|| gamma0_ceiling(res.validation, alpha, beta, r, &res.constants));
    let mut messages = Vec::new();
    let mut kept = Vec::new();
    let mut skipped = Vec::new();
    for &k in &res.ks {
        let g = rule_gamma(rule, k, r);
        if k == 0 || g >= gamma0 {
            messages.push(format!(
                "warning: skipping K={k}: step {g:e} is not below gamma0={gamma0:e}"
            ));
            skipped.push(k);
        } else {
            kept.push(k);
        }
    }
    if kept.is_empty() {
        return Err(Error::Empty("no K value gives a step below gamma0".into()));
    }
    let report = rate_report(f, &res.constants, &kept, rule, gamma0, &res.start)?;
    let mut inv = BTreeMap::new();
    inv.insert(
        "slope_nonpositive".to_string(),
        report.fitted_slope.is_some_and(|s| s <= 0.0),
    );
    inv.insert(
        "certificates_all_pass".to_string(),
        report.rows.iter().all(|r| r.certificate_pass_rate == 1.0),
    );
    inv.insert(
        "strictly_decreasing".to_string(),
        report.strictly_decreasing,
    );
    inv.insert(
        "stayed_in_domain".to_string(),
        report.rows.iter().all(|r| !r.escaped),
    );
    let pass = inv.values().all(|v| *v);
    messages.push(format!(
        "rate-sweep {} slope={} pass={pass}",
        res.function,
        report
            .fitted_slope
            .map_or("n/a".to_string(), |s| format!("{s:.4}"))
    ));
    let mut w = Writer::new(out)?;
    w.text("rates.csv", &report.to_csv())?;
    w.text("rates.svg", &svg::rates_svg(&report))?;
    w.json(
        "rates.json",
        &SweepReport {
            config_hash: res.hash(),
            start: res.start.clone(),
            constants: res.constants,
            skipped,
            report,
            invariants: inv,
            pass,
        },
    )?;
    Ok(w.finish(pass, messages))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KlDoc {
    pub config_hash: String,
    pub function: String,
    pub start: Point,
    pub schedule: StepSchedule,
    #[serde(rename = "K")]
    pub k: usize,
    pub escaped_at: Option<usize>,
    pub last_iterate: Point,
    pub monitor: KlReport,
    pub pass: bool,
}

/// Sequential-convergence monitor for a `1/k` schedule.
pub fn cmd_kl(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    let res = resolve(cfg, Command::Kl)?;
    let pipe = pipeline(&res)?;
    let report = kl_monitor(
        &res.catalog,
        &pipe.trajectory,
        &pipe.selection,
        &pipe.schedule,
        res.kl,
    )?;
    let pass = report.converged && pipe.trajectory.escaped_at.is_none();
    let messages = vec![format!(
        "kl {} oscillation={:e} jumps={:e} path={:e} pass={pass}",
        res.function,
        report.tail_oscillation,
        report.tail_jump_increment,
        report.tail_path_increment
    )];
    let mut w = Writer::new(out)?;
    write_run_artifacts(&mut w, &res, &pipe)?;
    w.text(
        "kl.svg",
        &svg::series_svg(
            "partial sums",
            &[
                ("projection jumps", &report.projection_jumps),
                ("path terms", &report.path_terms),
            ],
        ),
    )?;
    w.json(
        "kl.json",
        &KlDoc {
            config_hash: res.hash(),
            function: res.function.clone(),
            start: res.start.clone(),
            schedule: res.schedule.clone(),
            k: res.k,
            escaped_at: pipe.trajectory.escaped_at,
            last_iterate: pipe.trajectory.iterates.last().expect("nonempty").clone(),
            monitor: report,
            pass,
        },
    )?;
    Ok(w.finish(pass, messages))
}

/// Dispatches a command.
pub fn execute(command: Command, cfg: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    match command {
        Command::Run => cmd_run(cfg, out),
        Command::Verify => cmd_verify(cfg, out),
        Command::RateSweep => cmd_rate_sweep(cfg, out),
        Command::Kl => cmd_kl(cfg, out),
        Command::Varying => cmd_varying(cfg, out),
    }
}
