//! Sampling estimates of the regularity constants of a catalog function.

use crate::catalog::{CatalogFunction, Constants, Objective, DEFAULT_A3};
use crate::error::Result;
use crate::geometry::{symmetric_eigenvalues, truncate, LinearMap, Point};
use crate::stratification::Stratification;
use crate::stratum::Stratum;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

const FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantEstimate {
    /// Raw sampled extremes (sup for upper bounds, inf for `lambda_lo`).
    pub sampled: Constants,
    /// Sampled values with safety margins: 10% on `G`, a factor two on the
    /// others (division for `lambda_lo`), floored at 1e-6.
    pub frozen: Constants,
    pub samples: usize,
}

/// Spectral bounds of the projection Jacobian and the `L0` ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JacobianSpectrum {
    pub lambda_lo: f64,
    pub lambda_hi: f64,
    pub l0: f64,
}

fn random_unit<R: Rng>(rng: &mut R, n: usize) -> Point {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let p = Point::new(v).expect("finite");
        let norm = p.norm();
        if norm > 1e-3 && norm <= 1.0 {
            return p.scale(1.0 / norm);
        }
    }
}

fn normal_direction<R: Rng>(rng: &mut R, s: &Stratum, y: &Point) -> Option<Point> {
    let p = s.tangent_projector(y);
    for _ in 0..32 {
        let u = random_unit(rng, y.dim());
        let w = u.sub(&p.apply(&u));
        if w.norm() > 1e-3 {
            return Some(w.scale(1.0 / w.norm()));
        }
    }
    None
}

/// Samples `x = y ± r n` with `y` on the stratum, `n` a unit normal and
/// `r <= max_offset`, and records the Jacobian spectrum restricted to the
/// tangent space.
pub fn jacobian_spectrum<R: Rng>(
    strat: &Stratification,
    s: &Stratum,
    max_offset: f64,
    samples: usize,
    rng: &mut R,
) -> JacobianSpectrum {
    let mut out = JacobianSpectrum {
        lambda_lo: f64::INFINITY,
        lambda_hi: 0.0,
        l0: 0.0,
    };
    if s.dim == 0 {
        return JacobianSpectrum {
            lambda_lo: 1.0,
            lambda_hi: 1.0,
            l0: 0.0,
        };
    }
    let dom = strat.domain();
    for _ in 0..samples {
        let y = s.sample(rng, &dom.lo, &dom.hi);
        let x = match normal_direction(rng, s, &y) {
            Some(n) => y.add_scaled(rng.gen_range(0.0..=max_offset), &n),
            None => y.clone(),
        };
        let Ok(jac) = s.projection_jacobian(&x) else {
            continue;
        };
        let Ok(y) = s.project(&x) else { continue };
        let basis = s.tangent_basis(&y);
        let k = basis.len();
        let mut restricted = LinearMap::zeros(k);
        for i in 0..k {
            let col = jac.apply(&basis[i]);
            for (j, bj) in basis.iter().enumerate() {
                restricted.set(j, i, bj.dot(&col));
            }
        }
        let ev = symmetric_eigenvalues(&restricted);
        out.lambda_lo = out.lambda_lo.min(ev[0]);
        out.lambda_hi = out.lambda_hi.max(ev[k - 1]);
        let r = x.distance(&y);
        if r > 0.0 {
            let ratio = jac.sub(&s.tangent_projector(&y)).operator_norm()
                * strat.truncated_skeleton_dist(&x, s.dim as isize - 1)
                / r;
            out.l0 = out.l0.max(ratio);
        }
    }
    out
}

pub fn estimate_constants(
    f: &CatalogFunction,
    samples: usize,
    seed: u64,
) -> Result<ConstantEstimate> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let strat = f.stratification();
    let dom = strat.domain().clone();
    let n = strat.ambient_dim();
    let uniform = |rng: &mut ChaCha8Rng| {
        Point::new(
            dom.lo
                .iter()
                .zip(&dom.hi)
                .map(|(l, h)| rng.gen_range(*l..=*h))
                .collect(),
        )
        .expect("finite")
    };

    let mut g: f64 = 0.0;
    let mut top: Vec<(f64, Point)> = Vec::new();
    for _ in 0..samples {
        let x = uniform(&mut rng);
        let v = f.subgradient(&x).norm();
        g = g.max(v);
        top.push((v, x));
        if top.len() > 64 {
            top.sort_by(|a, b| b.0.total_cmp(&a.0));
            top.truncate(16);
        }
    }
    top.sort_by(|a, b| b.0.total_cmp(&a.0));
    top.truncate(16);
    // Local random search around the largest gradients found so far.
    for (best, x) in top.iter_mut() {
        let mut radius = 0.1;
        for _ in 0..400 {
            let cand = x.add_scaled(radius, &random_unit(&mut rng, n));
            if dom.contains(&cand) {
                let v = f.subgradient(&cand).norm();
                if v > *best {
                    *best = v;
                    *x = cand;
                    continue;
                }
            }
            radius = (radius * 0.98).max(1e-5);
        }
        g = g.max(*best);
    }
    for s in strat.strata() {
        for _ in 0..samples / strat.len() + 1 {
            let y = s.sample(&mut rng, &dom.lo, &dom.hi);
            if dom.contains(&y) {
                g = g.max(f.subgradient(&y).norm());
            }
        }
    }

    let mut l2: f64 = 0.0;
    let mut l1: f64 = 0.0;
    for _ in 0..samples {
        let (s, y) = if rng.gen_bool(0.25) && !top.is_empty() {
            let centre = &top[rng.gen_range(0..top.len())].1;
            let y = centre.add_scaled(
                10f64.powf(rng.gen_range(-4.0..-1.0)),
                &random_unit(&mut rng, n),
            );
            match strat.locate(&y) {
                Some(id) => (&strat.strata()[id], y),
                None => continue,
            }
        } else {
            let s = &strat.strata()[rng.gen_range(0..strat.len())];
            (s, s.sample(&mut rng, &dom.lo, &dom.hi))
        };
        if s.dim == 0 {
            continue;
        }
        if !dom.contains(&y) {
            continue;
        }
        let below = truncate(strat.skeleton_dist(&y, s.dim as isize - 1));
        let x = if rng.gen_bool(0.5) {
            uniform(&mut rng)
        } else {
            let r = 10f64.powf(rng.gen_range(-6.0..0.0));
            y.add_scaled(r, &random_unit(&mut rng, n))
        };
        if !dom.contains(&x) || x == y {
            continue;
        }
        let v = f.subgradient(&x);
        let riem = f.restricted_gradient(s.id, &y)?;
        let diff = s.tangent_projector(&y).apply(&v).sub(&riem).norm();
        l2 = l2.max(diff * below / x.distance(&y));

        let y2 = if rng.gen_bool(0.5) {
            s.sample(&mut rng, &dom.lo, &dom.hi)
        } else {
            let t = s.tangent_basis(&y);
            let step = 10f64.powf(rng.gen_range(-6.0..-1.0));
            let moved = y.add_scaled(step, &t[0]);
            s.project(&moved).unwrap_or(moved)
        };
        if y2 != y && s.contains(&y2) {
            let dp = s
                .tangent_projector(&y)
                .sub(&s.tangent_projector(&y2))
                .operator_norm();
            l1 = l1.max(dp * below / y.distance(&y2));
        }
    }

    let mut spec = JacobianSpectrum {
        lambda_lo: 1.0,
        lambda_hi: 1.0,
        l0: 0.0,
    };
    for s in strat.strata() {
        if s.dim == 0 || s.dim == n {
            continue;
        }
        let below = strat.skeleton_dist(&s.sample(&mut rng, &dom.lo, &dom.hi), s.dim as isize - 1);
        let sp = jacobian_spectrum(
            strat,
            s,
            DEFAULT_A3 * truncate(below),
            samples / strat.len() + 1,
            &mut rng,
        );
        spec.lambda_lo = spec.lambda_lo.min(sp.lambda_lo);
        spec.lambda_hi = spec.lambda_hi.max(sp.lambda_hi);
        spec.l0 = spec.l0.max(sp.l0);
    }

    let sampled = Constants {
        g,
        l0: spec.l0,
        l1,
        l2,
        lambda_lo: spec.lambda_lo,
        lambda_hi: spec.lambda_hi,
        a3: DEFAULT_A3,
    };
    let frozen = Constants {
        g: (1.1 * g).max(FLOOR),
        l0: (2.0 * spec.l0).max(FLOOR),
        l1: (2.0 * l1).max(FLOOR),
        l2: (2.0 * l2).max(FLOOR),
        lambda_lo: spec.lambda_lo / 2.0,
        lambda_hi: 2.0 * spec.lambda_hi,
        a3: DEFAULT_A3,
    };
    Ok(ConstantEstimate {
        sampled,
        frozen,
        samples,
    })
}
