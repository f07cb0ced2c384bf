//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits nonzero when any criterion fails.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;
use strata_lab::descent::doubling_intervals;
use strata_lab::experiment::{pipeline, resolve, Command, ExperimentConfig};
use strata_lab::geometry::truncate;
use strata_lab::selection::{build_from_table, Interval, MembershipTable, SyntheticTable};
use strata_lab::stratum::{OpenInterval, Stratum, StratumKind};
use strata_lab::verify::hull::{min_norm_hull, spurious_ledger_variant};
use strata_lab::verify::kl::kl_monitor;
use strata_lab::verify::ledger::descent_ledger;
use strata_lab::verify::rates::{rate_report, StepRule};
use strata_lab::verify::{g_grad, g_grad_fd, is_good, switch_count_bound, ParamSchedule};
use strata_lab::{
    build_selection, run, CatalogFunction, DomainBox, NeighborhoodParams, Neighborhoods, Objective,
    Point, RunMode, StepSchedule, Stratification, Vector,
};

const ENTRIES: [&str; 5] = [
    "appendix_fig1",
    "abs_diff_sq",
    "abs_power(0.5)",
    "abs_power(1)",
    "two_lines_demo",
];

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn random_unit(rng: &mut ChaCha8Rng, n: usize) -> Point {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let p = Point::new(v).unwrap();
        let r = p.norm();
        if r > 1e-3 && r <= 1.0 {
            return p.scale(1.0 / r);
        }
    }
}

fn uniform_in(rng: &mut ChaCha8Rng, dom: &DomainBox, shrink: f64) -> Point {
    let c: Vec<f64> = dom
        .lo
        .iter()
        .zip(&dom.hi)
        .map(|(l, h)| {
            let (mid, half) = ((l + h) / 2.0, (h - l) / 2.0 * shrink);
            rng.gen_range(mid - half..=mid + half)
        })
        .collect();
    Point::new(c).unwrap()
}

/// A point at cone scale around a random lower-dimensional stratum, or a
/// uniform point of the domain.
fn near_lower_stratum(rng: &mut ChaCha8Rng, f: &CatalogFunction, p: &NeighborhoodParams) -> Point {
    let s = f.stratification();
    let dom = s.domain();
    let n = s.ambient_dim();
    let lower: Vec<&Stratum> = s.strata().iter().filter(|st| st.dim < n).collect();
    loop {
        let st = lower[rng.gen_range(0..lower.len())];
        let y = st.sample(rng, &dom.lo, &dom.hi);
        let scale = p.gamma.powf(p.alpha + s.rank(st.id) as f64 * p.beta);
        let x = y.add_scaled(
            scale * 10f64.powf(rng.gen_range(-3.0..0.5)),
            &random_unit(rng, n),
        );
        if dom.contains(&x) {
            return x;
        }
    }
}

/// The appendix run at the reference step shows both vertical half-lines
/// with an upward switch between their blocks.
fn criterion_1() -> Verdict {
    let cfg = ExperimentConfig {
        function: Some("appendix_fig1".into()),
        gamma: Some(0.01),
        k: Some(5000),
        ..Default::default()
    };
    let res = resolve(&cfg, Command::Run).unwrap();
    let pipe = pipeline(&res).unwrap();
    let f = &res.catalog;
    let strat = f.stratification();
    let (right, left) = (4, 2);
    let nb = Neighborhoods::new(strat, &pipe.schedule.params[0]);
    let traj = &pipe.trajectory;
    let visits = |id: usize| (1..=traj.len()).any(|k| nb.in_outer(traj.x(k), id));
    let a = &pipe.selection.assignments;
    let dims: Vec<usize> = strat.strata().iter().map(|s| s.dim).collect();
    let blocks = |id: usize| {
        let mut out = Vec::new();
        let mut k = 0;
        while k < a.len() {
            if a[k] == id {
                let lo = k;
                while k < a.len() && a[k] == id {
                    k += 1;
                }
                out.push((lo, k - 1));
            } else {
                k += 1;
            }
        }
        out
    };
    let (br, bl) = (blocks(right), blocks(left));
    let upward_between = |(_, end): (usize, usize), (start, _): (usize, usize)| {
        end < start && (end..start).any(|k| dims[a[k + 1]] > dims[a[k]])
    };
    let switch = br.iter().any(|&x| {
        bl.iter()
            .any(|&y| upward_between(x, y) || upward_between(y, x))
    });
    let pass = visits(right) && visits(left) && !br.is_empty() && !bl.is_empty() && switch;
    verdict(
        pass,
        format!(
            "outer visits x=0.5: {}, x=0: {}; blocks {} and {}; upward switch between them: {switch}",
            visits(right),
            visits(left),
            br.len(),
            bl.len()
        ),
    )
}

struct CatalogRuns {
    good_failures: usize,
    descent_failures: usize,
    lemma_violations: usize,
    worst_excluded: f64,
    switch_failures: usize,
    runs: usize,
}

fn catalog_runs() -> CatalogRuns {
    let mut out = CatalogRuns {
        good_failures: 0,
        descent_failures: 0,
        lemma_violations: 0,
        worst_excluded: 0.0,
        switch_failures: 0,
        runs: 0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for name in ENTRIES {
        let f = CatalogFunction::get(name).unwrap();
        let p = NeighborhoodParams::auto(&f, None, None).unwrap();
        let schedule = StepSchedule::Constant { gamma: p.gamma };
        for i in 0..20 {
            let start = if i % 2 == 0 {
                uniform_in(&mut rng, f.domain(), 0.95)
            } else {
                near_lower_stratum(&mut rng, &f, &p)
            };
            let traj = run(&f, f.domain(), &start, &schedule, 2000, RunMode::Plain).unwrap();
            let sel = build_selection(f.stratification(), &traj, &p).unwrap();
            let sched = ParamSchedule::constant(p, traj.len());
            let good = is_good(f.stratification(), &traj, &sched, &sel).unwrap();
            if !good.good {
                out.good_failures += 1;
            }
            let led = descent_ledger(&f, &traj, &sel, &sched).unwrap();
            let s = &led.summary;
            if !(s.valid_descent_holds && s.switching_payment_holds) {
                out.descent_failures += 1;
            }
            out.lemma_violations += s.lemma_violations;
            out.worst_excluded = out.worst_excluded.max(s.excluded_fraction);
            if !switch_count_bound(f.stratification(), &sel, &p)
                .iter()
                .all(|c| c.holds)
            {
                out.switch_failures += 1;
            }
            out.runs += 1;
        }
    }
    out
}

fn criterion_3() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut counterexamples = 0;
    let mut antecedents = [0usize; 6];
    let mut needed_factor = [0.0f64; 2];
    for name in ENTRIES {
        let f = CatalogFunction::get(name).unwrap();
        let p = NeighborhoodParams::auto(&f, None, None).unwrap();
        let s = f.stratification();
        let nb = Neighborhoods::new(s, &p);
        let n = s.ambient_dim();
        for _ in 0..10_000 {
            let x = if rng.gen_bool(0.2) {
                uniform_in(&mut rng, s.domain(), 1.0)
            } else {
                near_lower_stratum(&mut rng, &f, &p)
            };
            // Most steps respect the G·γ bound; the rest reach cone scale so
            // that the lower bound on exits gets exercised.
            let step = if rng.gen_bool(0.7) {
                f.constants().g * p.gamma * rng.gen_range(0.0..=1.0)
            } else {
                p.gamma.powf(p.alpha) * 10f64.powf(rng.gen_range(-3.0..0.0))
            };
            let x2 = x.add_scaled(step, &random_unit(&mut rng, n));
            for id in 0..s.len() {
                let items = nb.geom_items(&x, &x2, id);
                for (count, item) in antecedents.iter_mut().zip(&items.items) {
                    *count += item.hypothesis as usize;
                }
                for (worst, item) in needed_factor.iter_mut().zip(&items.items[4..]) {
                    if item.hypothesis && item.bound > 0.0 {
                        *worst = worst.max(3.0 * item.value / item.bound);
                    }
                }
                if !items.all_hold() {
                    counterexamples += 1;
                }
            }
        }
    }
    verdict(
        counterexamples == 0,
        format!(
            "{counterexamples} counterexamples; antecedents exercised per item {antecedents:?}; \
             largest factor needed by items 5 and 6: {:.3}, {:.3} (allowed 3)",
            needed_factor[0], needed_factor[1]
        ),
    )
}

fn circle_jacobians() -> f64 {
    let circle = Stratum::new(
        0,
        "circle",
        StratumKind::CircleArc {
            center: [0.0, 0.0],
            radius: 1.0,
            arc: None,
        },
        2,
    )
    .unwrap();
    let plane = Stratum::new(
        1,
        "plane",
        StratumKind::Region {
            bounds: vec![OpenInterval::ALL; 2],
        },
        2,
    )
    .unwrap();
    let _ = Stratification::new(
        2,
        DomainBox::new(vec![-3.0; 2], vec![3.0; 2]).unwrap(),
        vec![circle.clone(), plane],
    )
    .unwrap();
    let mut worst: f64 = 0.0;
    for (rho, theta) in [
        (1.5, 0.0),
        (0.5, 0.0),
        (2.0, 0.0),
        (1.5, 1.0),
        (0.5, 2.5),
        (2.0, -2.0),
    ] {
        let x = Point::from([rho * f64::cos(theta), rho * f64::sin(theta)]);
        let jac = circle.projection_jacobian(&x).unwrap();
        let t = [-f64::sin(theta), f64::cos(theta)];
        let expected = 1.0 / rho;
        for i in 0..2 {
            for j in 0..2 {
                worst = worst.max((jac.get(i, j) - expected * t[i] * t[j]).abs());
            }
        }
    }
    worst
}

fn criterion_6() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    let mut attempts = 0usize;
    for name in ENTRIES {
        let f = CatalogFunction::get(name).unwrap();
        let p = NeighborhoodParams::auto(&f, None, None).unwrap();
        let s = f.stratification();
        let dom = s.domain();
        let n = s.ambient_dim();
        let mut done = 0;
        while done < 500 {
            attempts += 1;
            let st = &s.strata()[rng.gen_range(0..s.len())];
            let y = st.sample(&mut rng, &dom.lo, &dom.hi);
            let reach = f.constants().a3 * truncate(s.lower_skeleton_dist(&y, st.id));
            let x = if st.dim == n {
                y
            } else {
                y.add_scaled(reach * rng.gen_range(0.0..0.5), &random_unit(&mut rng, n))
            };
            let (Ok(an), Ok(fd)) = (
                g_grad(&f, &p, st.id, &x),
                g_grad_fd(&f, &p, st.id, &x, 1e-5),
            ) else {
                continue;
            };
            worst = worst.max(an.distance(&fd) / an.norm().max(1.0));
            done += 1;
        }
    }
    let circle = circle_jacobians();
    verdict(
        worst <= 1e-6 && circle <= 1e-8,
        format!("max relative error {worst:.2e} over 2500 points ({attempts} draws); circle Jacobian error {circle:.2e}"),
    )
}

fn criterion_7() -> Verdict {
    let f = CatalogFunction::get("appendix_fig1").unwrap();
    let start = Point::from([0.25, 2.0]);
    let r = rate_report(
        &f,
        f.constants(),
        &[2000, 8000, 32_000],
        StepRule::Corollary,
        1.0,
        &start,
    )
    .unwrap();
    let certs = r.rows.iter().all(|row| row.certificate_pass_rate == 1.0);
    let slope = r.fitted_slope.unwrap_or(f64::NAN);
    let means: Vec<String> = r
        .rows
        .iter()
        .map(|row| format!("{:.4e}", row.mean_grad_sq))
        .collect();
    verdict(
        r.strictly_decreasing && certs && slope <= 0.0,
        format!(
            "mean grad-sq [{}], all certificates pass: {certs}, fitted slope {slope:.4} (reference {:.4})",
            means.join(", "),
            r.predicted_slope
        ),
    )
}

fn criterion_8() -> Verdict {
    let cfg = ExperimentConfig {
        function: Some("appendix_fig1".into()),
        schedule: Some("inverse_k:0.01".into()),
        k: Some(100_000),
        ..Default::default()
    };
    let res = resolve(&cfg, Command::Kl).unwrap();
    let pipe = pipeline(&res).unwrap();
    let kl = kl_monitor(
        &res.catalog,
        &pipe.trajectory,
        &pipe.selection,
        &pipe.schedule,
        res.kl,
    )
    .unwrap();
    let intervals = doubling_intervals(&pipe.trajectory.steps, 1).unwrap();
    verdict(
        kl.converged && pipe.trajectory.escaped_at.is_none(),
        format!(
            "tail oscillation {:.3e} (<= 1e-3), jump increment {:.3e}, path increment {:.3e} (<= 1e-4); {} doubling intervals",
            kl.tail_oscillation,
            kl.tail_jump_increment,
            kl.tail_path_increment,
            intervals.len()
        ),
    )
}

#[derive(Deserialize)]
struct GoldenCase {
    table: SyntheticTable,
}

fn criterion_9() -> Verdict {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    let mut tables: Vec<PathBuf> = std::fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.to_string_lossy().ends_with(".table.json"))
        .collect();
    tables.sort();
    let mut mismatched = Vec::new();
    for path in &tables {
        let case: GoldenCase =
            serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
        let t = MembershipTable::synthetic(&case.table).unwrap();
        let got = build_from_table(&t).unwrap().to_json(t.dims());
        let expected = std::fs::read_to_string(
            path.to_string_lossy()
                .replace(".table.json", ".selection.json"),
        )
        .unwrap();
        if got != expected {
            mismatched.push(path.file_name().unwrap().to_string_lossy().into_owned());
        }
    }
    verdict(
        tables.len() == 12 && mismatched.is_empty(),
        format!("{} tables, mismatches {mismatched:?}", tables.len()),
    )
}

struct ShiftedKink;

impl Objective for ShiftedKink {
    fn dim(&self) -> usize {
        1
    }
    fn value(&self, x: &Point) -> f64 {
        x[0].abs() + 1.3 * x[0]
    }
    fn subgradient(&self, x: &Point) -> Vector {
        Point::from([if x[0] >= 0.0 { 2.3 } else { 0.3 }])
    }
}

fn criterion_10() -> Verdict {
    let hull_err = |vs: &[[f64; 2]], want: [f64; 2]| {
        let pts: Vec<Point> = vs.iter().map(|v| Point::from(*v)).collect();
        min_norm_hull(&pts)
            .unwrap()
            .point
            .distance(&Point::from(want))
    };
    let errs = [
        hull_err(&[[1.0, 0.0], [-1.0, 0.0]], [0.0, 0.0]),
        hull_err(&[[0.6, -0.8]], [0.6, -0.8]),
        hull_err(&[[1.0, 0.0], [0.0, 1.0]], [0.5, 0.5]),
    ];
    let hull_ok = errs.iter().all(|e| *e <= 1e-12);
    let gamma = 0.01;
    let dom = DomainBox::new(vec![-2.0], vec![2.0]).unwrap();
    let traj = run(
        &ShiftedKink,
        &dom,
        &Point::from([0.05]),
        &StepSchedule::Constant { gamma },
        50,
        RunMode::Plain,
    )
    .unwrap();
    let led = spurious_ledger_variant(
        &ShiftedKink,
        &Point::from([0.0]),
        &traj,
        Interval::new(1, 50),
        0.1,
    )
    .unwrap();
    let vv = led.v.norm_sq();
    let worst = led
        .rows
        .iter()
        .map(|r| -r.decrease / (gamma * vv))
        .fold(f64::INFINITY, f64::min);
    verdict(
        hull_ok && led.all_hold && (led.v[0] - 0.3).abs() <= 1e-12,
        format!(
            "hull errors {errs:?}; v = {:.3}; smallest decrease / (γ‖v‖²) = {worst:.3}",
            led.v[0]
        ),
    )
}

fn timed(f: impl FnOnce() -> Verdict) -> (Verdict, f64) {
    let t = Instant::now();
    let v = f();
    (v, t.elapsed().as_secs_f64())
}

fn main() -> ExitCode {
    let mut results: Vec<(usize, Verdict, f64)> = Vec::new();
    let (v, s) = timed(criterion_1);
    results.push((1, v, s));

    let t = Instant::now();
    let runs = catalog_runs();
    let shared = t.elapsed().as_secs_f64();
    results.push((
        2,
        verdict(
            runs.good_failures == 0,
            format!(
                "{} runs, {} not valid and good",
                runs.runs, runs.good_failures
            ),
        ),
        shared,
    ));
    results.push((
        4,
        verdict(
            runs.descent_failures == 0 && runs.lemma_violations == 0 && runs.worst_excluded <= 0.01,
            format!(
                "{} runs failing the descent or payment inequality, {} per-step lemma violations, worst excluded fraction {:.4} (same runs as criterion 2)",
                runs.descent_failures, runs.lemma_violations, runs.worst_excluded
            ),
        ),
        shared,
    ));
    results.push((
        5,
        verdict(
            runs.switch_failures == 0,
            format!(
                "{} runs exceeding a switch-count bound (same runs as criterion 2)",
                runs.switch_failures
            ),
        ),
        shared,
    ));
    let rest: [(usize, fn() -> Verdict); 6] = [
        (3, criterion_3),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
        (10, criterion_10),
    ];
    for (n, f) in rest {
        let (v, s) = timed(f);
        results.push((n, v, s));
    }
    results.sort_by_key(|r| r.0);

    for (n, v, secs) in &results {
        println!(
            "criterion {n}: {} ({secs:.2} s) {}",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail
        );
    }
    let failed = results.iter().filter(|r| !r.1.pass).count();
    println!(
        "{} of {} criteria pass",
        results.len() - failed,
        results.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
