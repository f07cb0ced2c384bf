use proptest::prelude::*;
use strata_lab::descent::doubling_intervals;
use strata_lab::{
    run, CatalogFunction, Error, Objective, Point, RunMode, StepSchedule, Trajectory,
};

fn square() -> CatalogFunction {
    CatalogFunction::get("abs_power(1)").unwrap()
}

#[test]
fn smooth_square_two_steps() {
    let f = square();
    let t = run(
        &f,
        f.domain(),
        &Point::from([1.0]),
        &StepSchedule::Constant { gamma: 0.25 },
        2,
        RunMode::Plain,
    )
    .unwrap();
    assert_eq!(t.len(), 2);
    assert_eq!(t.x(2), &Point::from([0.5]));
    assert_eq!(t.x(3), &Point::from([0.25]));
    assert_eq!(t.recursion_residual(), 0.0);
}

#[test]
fn stationary_points_stay_put() {
    let f = square();
    let t = run(
        &f,
        f.domain(),
        &Point::from([0.0]),
        &StepSchedule::Constant { gamma: 0.1 },
        50,
        RunMode::Plain,
    )
    .unwrap();
    assert!(t.iterates.iter().all(|x| x[0] == 0.0));
}

#[test]
fn appendix_run_reaches_the_right_line_early() {
    use strata_lab::{NeighborhoodParams, Neighborhoods};
    let f = CatalogFunction::get("appendix_fig1").unwrap();
    let t = run(
        &f,
        f.domain(),
        f.reference_start(),
        &StepSchedule::Constant { gamma: 0.01 },
        200,
        RunMode::Plain,
    )
    .unwrap();
    let p = NeighborhoodParams::auto(&f, Some(0.01), None).unwrap();
    let nb = Neighborhoods::new(f.stratification(), &p);
    assert!((1..=t.len()).any(|k| nb.in_outer(t.x(k), 4)));
}

#[test]
fn escaping_runs_are_truncated_and_flagged() {
    let f = CatalogFunction::get("two_lines_demo").unwrap();
    // Large steps on the quadratic in x overshoot the box.
    let t = run(
        &f,
        f.domain(),
        &Point::from([1.9, 0.0]),
        &StepSchedule::Constant { gamma: 2.5 },
        10,
        RunMode::Plain,
    )
    .unwrap();
    let k = t.escaped_at.expect("escape flagged");
    assert_eq!(t.iterates.len(), k);
    assert!(!f.domain().contains(t.x(k)));
    let p = run(
        &f,
        f.domain(),
        &Point::from([1.9, 0.0]),
        &StepSchedule::Constant { gamma: 2.5 },
        10,
        RunMode::Projected,
    )
    .unwrap();
    assert_eq!(p.escaped_at, None);
    assert_eq!(p.len(), 10);
    assert!(p.iterates.iter().all(|x| f.domain().contains(x)));
}

#[test]
fn invalid_inputs() {
    let f = square();
    let g = StepSchedule::Constant { gamma: 0.1 };
    assert!(matches!(
        run(&f, f.domain(), &Point::from([3.0]), &g, 5, RunMode::Plain),
        Err(Error::Precondition(_))
    ));
    assert!(matches!(
        run(
            &f,
            f.domain(),
            &Point::from([0.5, 0.5]),
            &g,
            5,
            RunMode::Plain
        ),
        Err(Error::DimensionMismatch { .. })
    ));
    assert!(StepSchedule::Constant { gamma: -1.0 }.steps(3).is_err());
    assert!(StepSchedule::Explicit {
        steps: vec![0.1, 0.05]
    }
    .steps(3)
    .is_err());
}

#[test]
fn schedule_parsing() {
    assert_eq!(
        StepSchedule::parse("constant:0.01").unwrap(),
        StepSchedule::Constant { gamma: 0.01 }
    );
    assert_eq!(
        StepSchedule::parse("inverse_k:0.5").unwrap(),
        StepSchedule::InverseK { c: 0.5 }
    );
    assert_eq!(
        StepSchedule::parse("explicit:0.4,0.2,0.1").unwrap(),
        StepSchedule::Explicit {
            steps: vec![0.4, 0.2, 0.1]
        }
    );
    assert!(StepSchedule::parse("0.01").is_err());
    assert!(StepSchedule::parse("cosine:1").is_err());
    assert!(StepSchedule::parse("constant:abc").is_err());
}

#[test]
fn doubling_examples() {
    let c = StepSchedule::InverseK { c: 1.0 }.steps(8).unwrap();
    assert_eq!(
        doubling_intervals(&c, 1).unwrap(),
        vec![(1, 1), (2, 3), (4, 7), (8, 8)]
    );
    let flat = StepSchedule::Constant { gamma: 0.3 }.steps(9).unwrap();
    assert_eq!(doubling_intervals(&flat, 1).unwrap(), vec![(1, 9)]);
    assert_eq!(doubling_intervals(&flat, 4).unwrap(), vec![(4, 9)]);
    let halving = [0.8, 0.4, 0.2, 0.1];
    assert_eq!(
        doubling_intervals(&halving, 1).unwrap(),
        vec![(1, 1), (2, 2), (3, 3), (4, 4)]
    );
    assert!(matches!(
        doubling_intervals(&[0.1, 0.2], 1),
        Err(Error::InvalidSchedule(_))
    ));
    assert!(doubling_intervals(&flat, 0).is_err());
}

#[test]
fn csv_round_trip_and_format() {
    let f = CatalogFunction::get("appendix_fig1").unwrap();
    let t = run(
        &f,
        f.domain(),
        f.reference_start(),
        &StepSchedule::InverseK { c: 0.01 },
        300,
        RunMode::Plain,
    )
    .unwrap();
    let text = t.to_csv();
    assert!(text.starts_with("k,x_1,x_2,v_1,v_2,gamma\n1,0.4,5.5,"));
    assert!(text.ends_with(",,,\n"));
    let back = Trajectory::from_csv(&text).unwrap();
    assert_eq!(back.iterates, t.iterates);
    assert_eq!(back.subgradients, t.subgradients);
    assert_eq!(back.steps, t.steps);
    assert_eq!(back.to_csv(), text);
}

#[test]
fn malformed_csv_is_rejected() {
    let f = square();
    let t = run(
        &f,
        f.domain(),
        &Point::from([1.0]),
        &StepSchedule::Constant { gamma: 0.25 },
        4,
        RunMode::Plain,
    )
    .unwrap();
    let text = t.to_csv();
    let cut = &text[..text.len() - 8];
    assert!(Trajectory::from_csv(cut).is_err());
    let rows: Vec<&str> = text.lines().collect();
    assert!(Trajectory::from_csv(&rows[..rows.len() - 1].join("\n")).is_err());
    assert!(Trajectory::from_csv("").is_err());
    assert!(Trajectory::from_csv("k,x_1,gamma\n").is_err());
    assert!(Trajectory::from_csv(&text.replace("\n2,", "\n3,")).is_err());
}

#[test]
fn runs_are_deterministic() {
    for name in ["appendix_fig1", "abs_diff_sq", "two_lines_demo"] {
        let f = CatalogFunction::get(name).unwrap();
        let go = || {
            run(
                &f,
                f.domain(),
                f.reference_start(),
                &StepSchedule::Constant { gamma: 0.01 },
                1000,
                RunMode::Plain,
            )
            .unwrap()
            .to_csv()
        };
        assert_eq!(go(), go());
    }
}

proptest! {
    #[test]
    fn recursion_is_stored_exactly(x in -1.9..1.9f64, y in -1.9..1.9f64, g in 1e-4..0.05f64, k in 1..400usize) {
        let f = CatalogFunction::get("abs_diff_sq").unwrap();
        let t = run(&f, f.domain(), &Point::from([x, y]), &StepSchedule::Constant { gamma: g }, k, RunMode::Plain).unwrap();
        prop_assert_eq!(t.recursion_residual(), 0.0);
        for i in 1..=t.len() {
            prop_assert_eq!(t.v(i), &f.subgradient(t.x(i)));
        }
    }

    #[test]
    fn doubling_intervals_partition_and_stay_within_factor_two(c in 0.001..1.0f64, p in 0.3..1.5f64, n in 1..500usize, k1 in 1..50usize) {
        let steps: Vec<f64> = (1..=n).map(|k| c / (k as f64).powf(p)).collect();
        prop_assume!(k1 <= n);
        let iv = doubling_intervals(&steps, k1).unwrap();
        prop_assert_eq!(iv[0].0, k1);
        prop_assert_eq!(iv[iv.len() - 1].1, n);
        for w in iv.windows(2) {
            prop_assert_eq!(w[0].1 + 1, w[1].0);
        }
        for &(a, b) in &iv {
            let (hi, lo) = (steps[a - 1], steps[b - 1]);
            prop_assert!(hi / lo <= 2.0 && lo > hi / 2.0);
        }
    }
}
