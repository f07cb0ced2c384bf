use strata_lab::selection::{Interval, SelectionFunction};
use strata_lab::verify::hull::{min_norm_hull, spurious_ledger_variant};
use strata_lab::verify::kl::{kl_monitor, KlThresholds};
use strata_lab::verify::ledger::{descent_ledger, DescentLedger};
use strata_lab::verify::rates::{parse_rates_csv, rate_report, StepRule};
use strata_lab::verify::{
    g_grad, g_grad_fd, g_value, is_good, is_valid, stationarity_measure, switch_count_bound,
    ParamSchedule,
};
use strata_lab::{
    build_selection, run, CatalogFunction, Constants, DomainBox, Error, NeighborhoodParams,
    Objective, Point, RunMode, StepSchedule, Trajectory, Vector,
};

struct ShiftedKink {
    slope: f64,
}

impl Objective for ShiftedKink {
    fn dim(&self) -> usize {
        1
    }
    fn value(&self, x: &Point) -> f64 {
        x[0].abs() + self.slope * x[0]
    }
    fn subgradient(&self, x: &Point) -> Vector {
        let s = if x[0] >= 0.0 { 1.0 } else { -1.0 };
        Point::from([s + self.slope])
    }
}

fn trajectory_csv(points: &[[f64; 2]], gamma: f64) -> Trajectory {
    let mut text = String::from("k,x_1,x_2,v_1,v_2,gamma\n");
    for (i, p) in points.iter().enumerate() {
        if i + 1 < points.len() {
            text += &format!("{},{},{},0,0,{}\n", i + 1, p[0], p[1], gamma);
        } else {
            text += &format!("{},{},{},,,\n", i + 1, p[0], p[1]);
        }
    }
    Trajectory::from_csv(&text).unwrap()
}

fn selection(assign: Vec<usize>) -> SelectionFunction {
    SelectionFunction {
        assignments: assign,
        trace: Vec::new(),
    }
}

#[test]
fn lyapunov_value_and_gradient_on_a_line() {
    let f = CatalogFunction::get("abs_diff_sq").unwrap();
    let p = NeighborhoodParams::auto(&f, Some(0.01), None).unwrap();
    let x = Point::from([2.0, 0.1]);
    assert!((g_value(&f, &p, 1, &x).unwrap() - 4.0).abs() < 1e-12);
    let g = g_grad(&f, &p, 1, &x).unwrap();
    assert!((g[0] - 4.0).abs() < 1e-12 && g[1].abs() < 1e-12);
    let fd = g_grad_fd(&f, &p, 1, &x, 1e-5).unwrap();
    assert!(fd.distance(&g) < 1e-6);
}

#[test]
fn lyapunov_gradient_vanishes_on_a_point_stratum() {
    let f = CatalogFunction::get("abs_diff_sq").unwrap();
    let p = NeighborhoodParams::auto(&f, Some(0.01), None).unwrap();
    let g = g_grad(&f, &p, 0, &Point::from([0.01, -0.02])).unwrap();
    assert!(g.norm() < 1e-15);
}

#[test]
fn lyapunov_outside_wellposed_is_an_error() {
    let f = CatalogFunction::get("abs_diff_sq").unwrap();
    let p = NeighborhoodParams::auto(&f, Some(0.01), None).unwrap();
    let err = g_value(&f, &p, 1, &Point::from([0.1, 0.5])).unwrap_err();
    assert!(matches!(err, Error::OutsideWellPosed { stratum: 1 }));
}

#[test]
fn switch_count_bound_example() {
    let f = CatalogFunction::get("abs_diff_sq").unwrap();
    let constants = Constants {
        g: 1.0,
        ..*f.constants()
    };
    let p = NeighborhoodParams::new(1.0 / 12.0, 0.25, 1e-4, 2e-4, 2, constants).unwrap();
    let sel = selection(vec![5; 10_000]);
    let counts = switch_count_bound(f.stratification(), &sel, &p);
    let line = &counts[1];
    assert_eq!(line.rank, 1);
    assert!((line.bound - 86.177).abs() < 0.01, "{}", line.bound);
    assert!(counts
        .iter()
        .all(|c| c.holds && c.lswitch == 0 && c.rswitch == 0));
}

#[test]
fn goodness_flags_reentry_without_exit() {
    let f = CatalogFunction::get("two_lines_demo").unwrap();
    let p = NeighborhoodParams::auto(&f, Some(0.01), None).unwrap();
    let traj = trajectory_csv(
        &[[0.0, 1.0], [0.1, 1.0], [0.2, 1.0], [0.3, 1.0], [0.4, 1.0]],
        0.01,
    );
    let sched = ParamSchedule::constant(p, 4);
    let sel = selection(vec![2, 0, 2, 0]);
    let report = is_good(f.stratification(), &traj, &sched, &sel).unwrap();
    assert!(!report.good);
    assert!(report
        .violations
        .iter()
        .any(|v| v.stratum == 0 && v.clause == 2 && v.index == 4));

    let on_line = selection(vec![0, 0, 0, 0]);
    let ok = is_good(f.stratification(), &traj, &sched, &on_line).unwrap();
    assert!(ok.valid && ok.good, "{:?}", ok.violations);
}

#[test]
fn validity_reports_the_first_violation() {
    let f = CatalogFunction::get("two_lines_demo").unwrap();
    let p = NeighborhoodParams::auto(&f, Some(0.01), None).unwrap();
    let traj = trajectory_csv(&[[0.0, 0.0], [0.0, 1.0], [0.0, 1.0]], 0.01);
    let sched = ParamSchedule::constant(p, 2);
    let r = is_valid(f.stratification(), &traj, &sched, &selection(vec![3, 3])).unwrap();
    assert!(!r.valid);
    assert_eq!(r.first_violation.as_ref().map(|v| (v.0, v.1)), Some((2, 3)));
    let r = is_valid(f.stratification(), &traj, &sched, &selection(vec![0, 0])).unwrap();
    assert_eq!(r.first_violation.as_ref().map(|v| (v.0, v.1)), Some((1, 0)));
    assert!(is_valid(f.stratification(), &traj, &sched, &selection(vec![3])).is_err());
}

#[test]
fn hull_examples() {
    let e = |v: &[f64]| Point::new(v.to_vec()).unwrap();
    let h = min_norm_hull(&[e(&[1.0, 0.0]), e(&[-1.0, 0.0])]).unwrap();
    assert!(h.point.norm() <= 1e-12);
    let h = min_norm_hull(&[e(&[0.3, -0.7])]).unwrap();
    assert!(h.point.distance(&e(&[0.3, -0.7])) <= 1e-12);
    let h = min_norm_hull(&[e(&[1.0, 0.0]), e(&[0.0, 1.0])]).unwrap();
    assert!(h.point.distance(&e(&[0.5, 0.5])) <= 1e-12);
    let s: f64 = h.weights.iter().sum();
    assert!((s - 1.0).abs() < 1e-12);
    let h = min_norm_hull(&[e(&[2.0, 1.0]), e(&[2.0, -1.0]), e(&[3.0, 0.0])]).unwrap();
    assert!(h.point.distance(&e(&[2.0, 0.0])) <= 1e-12);
}

#[test]
fn spurious_point_variant_decreases_linearly() {
    let f = ShiftedKink { slope: 1.3 };
    let dom = DomainBox::new(vec![-2.0], vec![2.0]).unwrap();
    let traj = run(
        &f,
        &dom,
        &Point::from([0.05]),
        &StepSchedule::Constant { gamma: 0.01 },
        50,
        RunMode::Plain,
    )
    .unwrap();
    let led =
        spurious_ledger_variant(&f, &Point::from([0.0]), &traj, Interval::new(1, 50), 0.1).unwrap();
    assert!((led.v[0] - 0.3).abs() <= 1e-12);
    assert!(led.all_hold);
    assert!(led.rows.iter().all(|r| r.decrease <= -0.01 * 0.09 + 1e-15));
}

#[test]
fn spurious_variant_refuses_critical_points() {
    let dom = DomainBox::new(vec![-2.0], vec![2.0]).unwrap();
    for slope in [0.0, 0.3] {
        let f = ShiftedKink { slope };
        let traj = run(
            &f,
            &dom,
            &Point::from([0.05]),
            &StepSchedule::Constant { gamma: 0.01 },
            10,
            RunMode::Plain,
        )
        .unwrap();
        let err =
            spurious_ledger_variant(&f, &Point::from([0.0]), &traj, Interval::new(1, 10), 0.1)
                .unwrap_err();
        assert!(matches!(err, Error::ZeroInHull));
    }
}

#[test]
fn kl_monitor_sees_no_oscillation_for_a_parabola() {
    let f = CatalogFunction::abs_power(1.0).unwrap();
    let traj = run(
        &f,
        f.domain(),
        f.reference_start(),
        &StepSchedule::InverseK { c: 0.5 },
        200,
        RunMode::Plain,
    )
    .unwrap();
    let p = NeighborhoodParams::auto(&f, Some(0.5), None).unwrap();
    let sel = build_selection(f.stratification(), &traj, &p).unwrap();
    let sched = ParamSchedule::constant(p, traj.len());
    let kl = kl_monitor(&f, &traj, &sel, &sched, KlThresholds::default()).unwrap();
    assert!(kl.tail_oscillation <= 1e-12);
    assert!(kl.tail_jump_increment <= 1e-12);
    assert!(kl.tail_path_increment <= 1e-12);
    assert!(kl.converged);
}

#[test]
fn ledger_without_switches_has_zero_payments() {
    let f = CatalogFunction::abs_power(1.0).unwrap();
    let gamma = 1e-3;
    let traj = run(
        &f,
        f.domain(),
        f.reference_start(),
        &StepSchedule::Constant { gamma },
        300,
        RunMode::Plain,
    )
    .unwrap();
    let p = NeighborhoodParams::auto(&f, Some(gamma), None).unwrap();
    let sel = build_selection(f.stratification(), &traj, &p).unwrap();
    assert!(sel.assignments.iter().all(|&id| id == 1));
    let led = descent_ledger(&f, &traj, &sel, &ParamSchedule::constant(p, traj.len())).unwrap();
    let s = &led.summary;
    assert_eq!((s.payment_left, s.payment_right), (0.0, 0.0));
    assert_eq!(s.switching_sum, 0.0);
    assert!(s.valid_descent_holds && s.switching_payment_holds && s.payments_within_budget);
    assert!(led.rows.iter().skip(1).all(|r| r.switching == Some(0.0)));

    let parsed = DescentLedger::parse_csv(&led.to_csv()).unwrap();
    assert_eq!(parsed.len(), led.rows.len());
    for (row, (k, g, sw, prox, _)) in led.rows.iter().zip(parsed) {
        assert_eq!(
            (row.k, row.grad_sq, row.switching, row.proximity_sq),
            (k, g, sw, prox)
        );
    }
    assert!(DescentLedger::parse_csv("k,grad_sq\n1,2\n").is_err());
}

#[test]
fn stationarity_measure_example() {
    let f = CatalogFunction::get("abs_diff_sq").unwrap();
    let traj = trajectory_csv(&[[2.0, 0.1], [2.0, 0.05]], 0.01);
    let m = stationarity_measure(&f, &traj, &selection(vec![1])).unwrap();
    let (eps, delta) = m[0];
    assert!((eps.unwrap() - 4.0).abs() < 1e-12);
    assert!((delta - 0.1).abs() < 1e-12);
}

#[test]
fn smooth_rate_report_decreases_and_round_trips() {
    let f = CatalogFunction::abs_power(1.0).unwrap();
    let report = rate_report(
        &f,
        f.constants(),
        &[100, 400, 1600],
        StepRule::Corollary,
        1.0,
        f.reference_start(),
    )
    .unwrap();
    assert!(report.strictly_decreasing);
    assert!(report.fitted_slope.unwrap() < 0.0);
    let parsed = parse_rates_csv(&report.to_csv()).unwrap();
    assert_eq!(parsed.len(), 3);
    for (row, p) in report.rows.iter().zip(&parsed) {
        assert_eq!(row.k, p.k);
        assert_eq!(row.mean_grad_sq, p.mean_grad_sq);
        assert_eq!(row.switching_component, p.switching);
    }
    assert!(rate_report(
        &f,
        f.constants(),
        &[],
        StepRule::Corollary,
        1.0,
        f.reference_start()
    )
    .is_err());
    assert!(parse_rates_csv("K,gamma\n1,x\n").is_err());
}
