use proptest::prelude::*;
use strata_lab::descent::doubling_intervals;
use strata_lab::neighborhoods::{
    auto_exponents, gamma0_ceiling, varying_neighborhoods, DimFilter, NeighborhoodParams,
    Neighborhoods, ValidationTier,
};
use strata_lab::{CatalogFunction, Error, Point, StepSchedule};

fn reference(gamma: f64) -> (CatalogFunction, NeighborhoodParams) {
    let f = CatalogFunction::get("abs_diff_sq").unwrap();
    let p = NeighborhoodParams::new(1.0 / 12.0, 0.25, gamma, 0.02, 2, *f.constants()).unwrap();
    (f, p)
}

#[test]
fn inner_and_outer_thresholds_by_hand() {
    let (f, p) = reference(0.01);
    let nb = Neighborhoods::new(f.stratification(), &p);
    // Stratum 1 is the ray {y = 0, x > 0}, of rank 1.
    assert!(nb.in_inner(&Point::from([1.0, 1e-4]), 1));
    assert!(!nb.in_inner(&Point::from([1.0, 0.2]), 1));
    assert!(nb.in_outer(&Point::from([1.0, 0.2]), 1));
    assert!(!nb.in_outer(&Point::from([1.0, 0.22]), 1));
    let inner = 0.01f64.powf(0.25) * 0.01f64.powf(0.25);
    let outer = 0.01f64.powf(1.0 / 12.0) * 0.01f64.powf(0.25);
    assert!((inner - 0.1).abs() < 1e-12);
    assert!((outer - 0.2154).abs() < 1e-4);
    let on = Point::from([1.3, 0.0]);
    assert!(nb.in_inner(&on, 1) && nb.in_outer(&on, 1) && nb.in_wellposed(&on, 1));
}

#[test]
fn wellposed_examples() {
    let (f, p) = reference(0.01);
    let nb = Neighborhoods::new(f.stratification(), &p);
    assert!(!nb.in_wellposed(&Point::from([2.0, 0.3]), 1));
    assert!(nb.in_wellposed(&Point::from([2.0, 0.2]), 1));
    // Full-dimensional strata: membership is region membership.
    assert!(nb.in_wellposed(&Point::from([1.0, 1.0]), 5));
    assert!(!nb.in_wellposed(&Point::from([1.0, 0.0]), 5));
    assert!(nb.in_outer(&Point::from([1.0, 1.0]), 5) && !nb.in_outer(&Point::from([-1.0, 1.0]), 5));
}

#[test]
fn union_predicates() {
    let (f, p) = reference(0.01);
    let nb = Neighborhoods::new(f.stratification(), &p);
    let near_ray = Point::from([1.0, 1e-4]);
    assert!(!nb.in_inner_union(&near_ray, DimFilter::Below(0)));
    assert!(nb.in_inner_union(&near_ray, DimFilter::Equal(1)));
    assert!(!nb.in_inner_union(&near_ray, DimFilter::Equal(0)));
    let far = Point::from([1.0, 1.0]);
    assert!(!nb.in_inner_union(&far, DimFilter::Below(2)));
    assert!(nb.in_inner_union(&far, DimFilter::AtMost(2)));
}

#[test]
fn auto_exponents_and_ceilings() {
    assert_eq!(auto_exponents(2), (1.0 / 12.0, 0.25));
    let f = CatalogFunction::get("appendix_fig1").unwrap();
    let (a, b) = auto_exponents(2);
    let c = f.constants();
    assert_eq!(gamma0_ceiling(ValidationTier::Report, a, b, 2, c), 1.0);
    let geo = gamma0_ceiling(ValidationTier::Geometric, a, b, 2, c);
    let thm = gamma0_ceiling(ValidationTier::Theorem, a, b, 2, c);
    assert!(thm <= geo && geo < 1.0);
    let p = NeighborhoodParams::auto(&f, None, None).unwrap();
    assert_eq!(p.gamma0, geo);
    assert_eq!(p.gamma, geo / 2.0);
    assert!(p.satisfies(ValidationTier::Geometric));
    let at_ceiling = NeighborhoodParams::auto(&f, None, Some(thm)).unwrap();
    assert!(at_ceiling.satisfies(ValidationTier::Theorem));
}

#[test]
fn violations_name_the_inequality() {
    let f = CatalogFunction::get("appendix_fig1").unwrap();
    let p = NeighborhoodParams::auto(&f, Some(0.01), None).unwrap();
    assert_eq!(p.gamma0, 0.02);
    let err = p
        .require(ValidationTier::Geometric)
        .unwrap_err()
        .to_string();
    assert!(err.contains("4*gamma0^(beta-alpha) <= 1"), "{err}");
    assert!(p.require(ValidationTier::Report).is_ok());
    let checks = p.checks();
    assert_eq!(checks.len(), 6);
    assert!(checks.iter().any(|c| c.name == "A3 <= 1/4" && c.holds));
}

#[test]
fn structural_errors() {
    let c = *CatalogFunction::get("abs_diff_sq").unwrap().constants();
    let bad = |a, b, g, g0, r| {
        matches!(
            NeighborhoodParams::new(a, b, g, g0, r, c),
            Err(Error::InvalidParams(_))
        )
    };
    assert!(bad(0.3, 0.2, 0.01, 0.02, 1));
    assert!(bad(0.1, 0.4, 0.01, 0.02, 2));
    assert!(bad(0.1, 0.2, 0.03, 0.02, 1));
    assert!(bad(0.1, 0.2, 0.01, 1.5, 1));
    let mut neg = c;
    neg.l2 = -1.0;
    assert!(NeighborhoodParams::new(0.1, 0.2, 0.01, 0.02, 1, neg).is_err());
}

#[test]
fn skeleton_lower_bound_examples() {
    let f = CatalogFunction::get("two_lines_demo").unwrap();
    assert_eq!(f.stratification().max_rank(), 1);
    let g0 = 0.01;
    let p = NeighborhoodParams::new(1.0 / 12.0, 0.25, g0 / 2.0, g0, 1, *f.constants()).unwrap();
    let nb = Neighborhoods::new(f.stratification(), &p);
    let expected = (g0 / 2.0f64).powf(0.75) / g0.powf(0.5);
    // Line {y = 1}: no lower skeleton, so min{1, dist(x, empty)} = 1.
    let (lhs, rhs) = nb
        .skeleton_lower_bound(&Point::from([0.3, 1.05]), 0)
        .unwrap();
    assert_eq!(lhs, 1.0);
    assert!((rhs - expected).abs() < 1e-15);
    assert!(matches!(
        nb.skeleton_lower_bound(&Point::from([0.3, 1.0]), 2),
        Err(Error::Precondition(_))
    ));
}

#[test]
fn varying_params_use_the_next_interval_start() {
    let f = CatalogFunction::get("abs_diff_sq").unwrap();
    let base = NeighborhoodParams::auto(&f, Some(0.01), Some(0.02)).unwrap();
    let steps = StepSchedule::InverseK { c: 0.01 }.steps(8).unwrap();
    let iv = doubling_intervals(&steps, 1).unwrap();
    assert_eq!(iv[1].0, 2);
    let p0 = varying_neighborhoods(&base, &iv, &steps, 0).unwrap();
    assert_eq!(p0.gamma, 0.01 / 2.0);
    let last = varying_neighborhoods(&base, &iv, &steps, iv.len() - 1).unwrap();
    assert_eq!(last.gamma, 0.01 / 8.0);
    assert!(varying_neighborhoods(&base, &iv, &steps, iv.len()).is_err());

    let constant = StepSchedule::Constant { gamma: 0.01 }.steps(8).unwrap();
    let one = doubling_intervals(&constant, 1).unwrap();
    assert_eq!(one, vec![(1, 8)]);
    assert_eq!(
        varying_neighborhoods(&base, &one, &constant, 0).unwrap(),
        base
    );

    let halving: Vec<f64> = (0..6).map(|k| 0.01 / 2f64.powi(k)).collect();
    let single = doubling_intervals(&halving, 1).unwrap();
    assert!(single.iter().all(|(a, b)| a == b));
}

fn geometric_params(name: &str) -> (CatalogFunction, NeighborhoodParams) {
    let f = CatalogFunction::get(name).unwrap();
    let p = NeighborhoodParams::auto(&f, None, None).unwrap();
    (f, p)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn inner_implies_outer_implies_wellposed(
        which in 0..4usize,
        id_seed in 0..64usize,
        t in -2.0..2.0f64,
        log_off in -12.0..0.0f64,
        sign in prop::bool::ANY,
    ) {
        let name = ["appendix_fig1", "abs_diff_sq", "two_lines_demo", "abs_power(0.5)"][which];
        let (f, p) = geometric_params(name);
        let s = f.stratification();
        let st = &s.strata()[id_seed % s.len()];
        let mut x = st.project(&Point::zeros(f_dim(&f))).unwrap_or_else(|_| Point::zeros(f_dim(&f)));
        let off = 10f64.powf(log_off) * if sign { 1.0 } else { -1.0 };
        let mut c = x.to_vec();
        c[0] += off;
        if c.len() > 1 { c[1] += t; }
        x = Point::new(c).unwrap();
        let nb = Neighborhoods::new(s, &p);
        for id in 0..s.len() {
            if nb.in_inner(&x, id) { prop_assert!(nb.in_outer(&x, id)); }
            if nb.in_outer(&x, id) { prop_assert!(nb.in_wellposed(&x, id)); }
        }
    }

    #[test]
    fn neighborhoods_shrink_with_the_step(
        x0 in 0.0..1.0f64, y0 in -0.5..0.5f64, lg in -6.0..-2.0f64, ratio in 0.05..1.0f64,
    ) {
        let f = CatalogFunction::get("abs_diff_sq").unwrap();
        let big = 10f64.powf(lg);
        let hi = NeighborhoodParams::new(1.0 / 12.0, 0.25, big, 0.02, 2, *f.constants()).unwrap();
        let lo = hi.with_gamma(big * ratio).unwrap();
        let s = f.stratification();
        let (a, b) = (Neighborhoods::new(s, &lo), Neighborhoods::new(s, &hi));
        let x = Point::from([x0, y0 * y0 * y0]);
        for id in 0..s.len() {
            if a.in_inner(&x, id) { prop_assert!(b.in_inner(&x, id)); }
            if a.in_outer(&x, id) { prop_assert!(b.in_outer(&x, id)); }
        }
    }

    #[test]
    fn geometric_items_hold_near_strata(
        which in 0..3usize,
        id_seed in 0..64usize,
        t in 0.0..1.0f64,
        scale in -3.0..0.5f64,
        ang in 0.0..std::f64::consts::TAU,
        step in 0.0..1.0f64,
    ) {
        let name = ["appendix_fig1", "abs_diff_sq", "two_lines_demo"][which];
        let (f, p) = geometric_params(name);
        let s = f.stratification();
        let nb = Neighborhoods::new(s, &p);
        let lower: Vec<_> = s.strata().iter().filter(|st| st.dim < 2).collect();
        let st = lower[id_seed % lower.len()];
        let dom = s.domain();
        let y = Point::from([dom.lo[0] + t * (dom.hi[0] - dom.lo[0]), dom.lo[1] + t * (dom.hi[1] - dom.lo[1])]);
        let base = st.project(&y).unwrap_or(y);
        let r = p.gamma.powf(p.alpha + s.rank(st.id) as f64 * p.beta) * 10f64.powf(scale);
        let x = Point::from([base[0] + r * ang.cos(), base[1] + r * ang.sin()]);
        let dx = f.constants().g * p.gamma * step;
        let x2 = Point::from([x[0] + dx * (ang * 3.0).cos(), x[1] + dx * (ang * 3.0).sin()]);
        for id in 0..s.len() {
            let items = nb.geom_items(&x, &x2, id);
            prop_assert!(items.all_hold(), "{name} stratum {id}: {:?}", items);
        }
    }
}

fn f_dim(f: &CatalogFunction) -> usize {
    f.stratification().ambient_dim()
}
