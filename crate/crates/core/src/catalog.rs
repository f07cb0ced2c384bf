//! Built-in stratifiable test functions with analytic strata.
//!
//! Each function is a sum of smooth terms and smooth multiples of `|ℓ(x)|`
//! for affine forms `ℓ` (the *kinks*). A stratum fixes the sign pattern of
//! the kink arguments, so the function agrees on it with the smooth piece
//! obtained by replacing each `|ℓ|` with `sᵢ ℓ`.

use crate::error::{Error, Result};
use crate::geometry::{DomainBox, Point, Vector};
use crate::stratification::Stratification;
use crate::stratum::{OpenInterval, Stratum, StratumKind};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Value and a Clarke subgradient selection.
pub trait Objective: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &Point) -> f64;
    fn subgradient(&self, x: &Point) -> Vector;
}

/// Regularity constants frozen into the catalog.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    /// Bound on subgradient norms over the domain.
    pub g: f64,
    pub l0: f64,
    pub l1: f64,
    pub l2: f64,
    pub lambda_lo: f64,
    pub lambda_hi: f64,
    /// Width of the well-posed neighborhoods.
    pub a3: f64,
}

impl Constants {
    pub fn a1(&self) -> f64 {
        self.lambda_lo / (16.0 * self.lambda_hi * self.lambda_hi)
    }

    pub fn a2(&self) -> f64 {
        self.l2
            * self.l2
            * (4.0 * self.lambda_hi * self.lambda_hi / self.lambda_lo + self.lambda_lo / 2.0)
    }

    /// Left side of the step-size requirement of the stratified descent lemma.
    pub fn descent_step_factor(&self) -> f64 {
        let lam = self.lambda_hi;
        (4.0 * lam * self.g)
            .max(8.0 * self.l2 * lam * lam / self.lambda_lo)
            .max(2.0 * self.l1 * self.g * lam)
    }
}

/// Affine (all strata flat) catalog entries share these Jacobian bounds:
/// the projection Jacobian is the tangent projector, so both spectral
/// bounds equal 1 before the 2x safety margin.
const AFFINE_LAMBDA_LO: f64 = 0.5;
const AFFINE_LAMBDA_HI: f64 = 2.0;
const CONSTANT_FLOOR: f64 = 1e-6;
pub const DEFAULT_A3: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AppendixParams {
    pub b1: f64,
    pub b2: f64,
    pub sigma_x: f64,
    pub sigma_y: f64,
    pub mu: f64,
    pub c: f64,
    pub lambda: f64,
}

impl Default for AppendixParams {
    fn default() -> Self {
        AppendixParams {
            b1: 1.0,
            b2: 1.0,
            sigma_x: 0.02,
            sigma_y: 0.35,
            mu: 0.1,
            c: 0.5,
            lambda: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "formula", rename_all = "snake_case")]
pub enum Formula {
    AppendixFig1(AppendixParams),
    AbsDiffSq,
    AbsPower { exponent: f64 },
    TwoLines,
}

impl Formula {
    pub fn dim(&self) -> usize {
        match self {
            Formula::AbsPower { .. } => 1,
            _ => 2,
        }
    }

    /// Arguments of the absolute values.
    pub fn kinks(&self, x: &Point) -> Vec<f64> {
        match self {
            Formula::AppendixFig1(p) => vec![x[1], x[0], x[0] - p.c],
            Formula::AbsDiffSq => vec![x[0], x[1]],
            Formula::AbsPower { .. } => vec![x[0]],
            Formula::TwoLines => vec![x[1] - 1.0, x[1] + 1.0],
        }
    }

    pub fn kink_signs(&self, x: &Point) -> Vec<i8> {
        self.kinks(x)
            .into_iter()
            .map(|v| {
                if v > 0.0 {
                    1
                } else if v < 0.0 {
                    -1
                } else {
                    0
                }
            })
            .collect()
    }

    pub fn value(&self, x: &Point) -> f64 {
        match self {
            Formula::AppendixFig1(p) => {
                let (u, v) = (x[0], x[1]);
                let s = (PI * v).sin();
                v.abs()
                    + p.lambda / 2.0 * (1.0 + s) * u.abs()
                    + p.lambda / 2.0 * (1.0 - s) * (u - p.c).abs()
                    + p.mu * u * u
                    + bumps(p, u, v).0
            }
            Formula::AbsDiffSq => (x[0].abs() - x[1].abs()).powi(2),
            Formula::AbsPower { exponent } => x[0].abs().powf(1.0 + exponent),
            Formula::TwoLines => {
                let (u, v) = (x[0], x[1]);
                0.5 * u * u + (v - 1.0).abs() + 0.5 * (v + 1.0).abs() + 0.25 * v * v
            }
        }
    }

    /// Gradient of the smooth piece selected by the sign pattern `sig`.
    pub fn piece_gradient(&self, sig: &[i8], x: &Point) -> Vector {
        let s = |i: usize| sig[i] as f64;
        match self {
            Formula::AppendixFig1(p) => {
                let (u, v) = (x[0], x[1]);
                let sn = (PI * v).sin();
                let cs = (PI * v).cos();
                let (_, bx, by) = bumps(p, u, v);
                let gx = p.lambda / 2.0 * (1.0 + sn) * s(1)
                    + p.lambda / 2.0 * (1.0 - sn) * s(2)
                    + 2.0 * p.mu * u
                    + bx;
                let gy = s(0) + p.lambda / 2.0 * PI * cs * s(1) * u
                    - p.lambda / 2.0 * PI * cs * s(2) * (u - p.c)
                    + by;
                Point::from([gx, gy])
            }
            Formula::AbsDiffSq => {
                let m = s(0) * x[0] - s(1) * x[1];
                Point::from([2.0 * m * s(0), -2.0 * m * s(1)])
            }
            Formula::AbsPower { exponent } => {
                Point::from([(1.0 + exponent) * x[0].abs().powf(*exponent) * s(0)])
            }
            Formula::TwoLines => Point::from([x[0], s(0) + 0.5 * s(1) + 0.5 * x[1]]),
        }
    }
}

/// Sum of the two Gaussian bumps and its partial derivatives.
fn bumps(p: &AppendixParams, u: f64, v: f64) -> (f64, f64, f64) {
    let (sx2, sy2) = (p.sigma_x * p.sigma_x, p.sigma_y * p.sigma_y);
    let e1 = p.b1 * (-(u - p.c).powi(2) / sx2 - (v - 4.2).powi(2) / sy2).exp();
    let e2 = p.b2 * (-u * u / sx2 - (v - 3.2).powi(2) / sy2).exp();
    (
        e1 + e2,
        e1 * (-2.0 * (u - p.c) / sx2) + e2 * (-2.0 * u / sx2),
        e1 * (-2.0 * (v - 4.2) / sy2) + e2 * (-2.0 * (v - 3.2) / sy2),
    )
}

/// A catalog entry: formula, stratification, per-stratum sign signatures
/// and frozen constants.
#[derive(Debug, Clone)]
pub struct CatalogFunction {
    name: String,
    formula: Formula,
    strat: Stratification,
    signatures: Vec<Vec<i8>>,
    constants: Constants,
    reference_start: Point,
    reference_gamma: f64,
}

pub const CATALOG_NAMES: [&str; 4] = [
    "appendix_fig1",
    "abs_diff_sq",
    "abs_power",
    "two_lines_demo",
];

fn line(
    id: usize,
    label: &str,
    anchor: [f64; 2],
    dir: [f64; 2],
    t: OpenInterval,
) -> Result<Stratum> {
    Stratum::new(
        id,
        label,
        StratumKind::Affine {
            anchor: Point::from(anchor),
            basis: vec![Point::from(dir)],
            bounds: vec![t],
        },
        2,
    )
}

fn point(id: usize, label: &str, at: Point) -> Result<Stratum> {
    let n = at.dim();
    Stratum::new(id, label, StratumKind::Point { at }, n)
}

fn region(id: usize, label: &str, bounds: Vec<OpenInterval>) -> Result<Stratum> {
    let n = bounds.len();
    Stratum::new(id, label, StratumKind::Region { bounds }, n)
}

fn iv(lo: Option<f64>, hi: Option<f64>) -> OpenInterval {
    OpenInterval::new(lo, hi)
}

impl CatalogFunction {
    /// Looks up a catalog entry; `abs_power(b)` selects the exponent `1 + b`.
    pub fn get(name: &str) -> Result<Self> {
        let trimmed = name.trim();
        match trimmed {
            "appendix_fig1" => Self::appendix_fig1(AppendixParams::default()),
            "abs_diff_sq" => Self::abs_diff_sq(),
            "abs_power" => Self::abs_power(0.5),
            "two_lines_demo" => Self::two_lines_demo(),
            _ => {
                if let Some(arg) = trimmed
                    .strip_prefix("abs_power(")
                    .and_then(|r| r.strip_suffix(')'))
                {
                    let b: f64 = arg
                        .trim()
                        .parse()
                        .map_err(|_| Error::UnknownFunction(name.to_string()))?;
                    Self::abs_power(b)
                } else {
                    Err(Error::UnknownFunction(name.to_string()))
                }
            }
        }
    }

    pub fn appendix_fig1(p: AppendixParams) -> Result<Self> {
        let c = p.c;
        let strata = vec![
            point(0, "origin", Point::from([0.0, 0.0]))?,
            point(1, "kink point (c,0)", Point::from([c, 0.0]))?,
            line(2, "x=0, y>0", [0.0, 0.0], [0.0, 1.0], iv(Some(0.0), None))?,
            line(3, "x=0, y<0", [0.0, 0.0], [0.0, 1.0], iv(None, Some(0.0)))?,
            line(4, "x=c, y>0", [c, 0.0], [0.0, 1.0], iv(Some(0.0), None))?,
            line(5, "x=c, y<0", [c, 0.0], [0.0, 1.0], iv(None, Some(0.0)))?,
            line(6, "y=0, x<0", [0.0, 0.0], [1.0, 0.0], iv(None, Some(0.0)))?,
            line(
                7,
                "y=0, 0<x<c",
                [0.0, 0.0],
                [1.0, 0.0],
                iv(Some(0.0), Some(c)),
            )?,
            line(8, "y=0, x>c", [0.0, 0.0], [1.0, 0.0], iv(Some(c), None))?,
            region(
                9,
                "x<0, y>0",
                vec![iv(None, Some(0.0)), iv(Some(0.0), None)],
            )?,
            region(
                10,
                "0<x<c, y>0",
                vec![iv(Some(0.0), Some(c)), iv(Some(0.0), None)],
            )?,
            region(11, "x>c, y>0", vec![iv(Some(c), None), iv(Some(0.0), None)])?,
            region(
                12,
                "x<0, y<0",
                vec![iv(None, Some(0.0)), iv(None, Some(0.0))],
            )?,
            region(
                13,
                "0<x<c, y<0",
                vec![iv(Some(0.0), Some(c)), iv(None, Some(0.0))],
            )?,
            region(14, "x>c, y<0", vec![iv(Some(c), None), iv(None, Some(0.0))])?,
        ];
        let domain = DomainBox::new(vec![-2.0, -1.0], vec![2.0, 8.0])?;
        let strat = Stratification::new(2, domain, strata)?;
        let defaults = p == AppendixParams::default();
        let constants = Constants {
            g: if defaults { APPENDIX_G } else { f64::NAN },
            l0: CONSTANT_FLOOR,
            l1: CONSTANT_FLOOR,
            l2: if defaults { APPENDIX_L2 } else { f64::NAN },
            lambda_lo: AFFINE_LAMBDA_LO,
            lambda_hi: AFFINE_LAMBDA_HI,
            a3: DEFAULT_A3,
        };
        let mut f = Self::assemble(
            "appendix_fig1",
            Formula::AppendixFig1(p),
            strat,
            constants,
            Point::from([0.4, 5.5]),
            0.01,
        )?;
        if !defaults {
            let est = crate::verify::constants::estimate_constants(&f, 20_000, 7)?;
            f.constants.g = est.frozen.g;
            f.constants.l2 = est.frozen.l2;
        }
        Ok(f)
    }

    pub fn abs_diff_sq() -> Result<Self> {
        let strata = vec![
            point(0, "origin", Point::from([0.0, 0.0]))?,
            line(1, "y=0, x>0", [0.0, 0.0], [1.0, 0.0], iv(Some(0.0), None))?,
            line(2, "y=0, x<0", [0.0, 0.0], [1.0, 0.0], iv(None, Some(0.0)))?,
            line(3, "x=0, y>0", [0.0, 0.0], [0.0, 1.0], iv(Some(0.0), None))?,
            line(4, "x=0, y<0", [0.0, 0.0], [0.0, 1.0], iv(None, Some(0.0)))?,
            region(
                5,
                "x>0, y>0",
                vec![iv(Some(0.0), None), iv(Some(0.0), None)],
            )?,
            region(
                6,
                "x<0, y>0",
                vec![iv(None, Some(0.0)), iv(Some(0.0), None)],
            )?,
            region(
                7,
                "x<0, y<0",
                vec![iv(None, Some(0.0)), iv(None, Some(0.0))],
            )?,
            region(
                8,
                "x>0, y<0",
                vec![iv(Some(0.0), None), iv(None, Some(0.0))],
            )?,
        ];
        let domain = DomainBox::new(vec![-2.0, -2.0], vec![2.0, 2.0])?;
        let strat = Stratification::new(2, domain, strata)?;
        Self::assemble(
            "abs_diff_sq",
            Formula::AbsDiffSq,
            strat,
            Constants {
                g: ABS_DIFF_SQ_G,
                l0: CONSTANT_FLOOR,
                l1: CONSTANT_FLOOR,
                l2: ABS_DIFF_SQ_L2,
                lambda_lo: AFFINE_LAMBDA_LO,
                lambda_hi: AFFINE_LAMBDA_HI,
                a3: DEFAULT_A3,
            },
            Point::from([1.5, 0.4]),
            0.01,
        )
    }

    pub fn abs_power(b: f64) -> Result<Self> {
        if !(b > 0.0 && b <= 1.0) {
            return Err(Error::UnknownFunction(format!("abs_power({b})")));
        }
        let one = |lo: Option<f64>, hi: Option<f64>| vec![iv(lo, hi)];
        let strata = vec![
            point(0, "origin", Point::from([0.0]))?,
            region(1, "x>0", one(Some(0.0), None))?,
            region(2, "x<0", one(None, Some(0.0)))?,
        ];
        let domain = DomainBox::new(vec![-2.0], vec![2.0])?;
        let strat = Stratification::new(1, domain, strata)?;
        // Sup of (1+b)|x|^b on [-2, 2] is (1+b) 2^b; the gradient-difference
        // ratio is bounded by twice that.
        let peak = (1.0 + b) * 2f64.powf(b);
        Self::assemble(
            &format!("abs_power({b})"),
            Formula::AbsPower { exponent: b },
            strat,
            Constants {
                g: 1.1 * peak,
                l0: CONSTANT_FLOOR,
                l1: CONSTANT_FLOOR,
                l2: 4.0 * peak,
                lambda_lo: AFFINE_LAMBDA_LO,
                lambda_hi: AFFINE_LAMBDA_HI,
                a3: DEFAULT_A3,
            },
            Point::from([1.5]),
            0.01,
        )
    }

    pub fn two_lines_demo() -> Result<Self> {
        let strata = vec![
            line(0, "y=1", [0.0, 1.0], [1.0, 0.0], OpenInterval::ALL)?,
            line(1, "y=-1", [0.0, -1.0], [1.0, 0.0], OpenInterval::ALL)?,
            region(2, "y>1", vec![OpenInterval::ALL, iv(Some(1.0), None)])?,
            region(
                3,
                "-1<y<1",
                vec![OpenInterval::ALL, iv(Some(-1.0), Some(1.0))],
            )?,
            region(4, "y<-1", vec![OpenInterval::ALL, iv(None, Some(-1.0))])?,
        ];
        let domain = DomainBox::new(vec![-2.0, -2.0], vec![2.0, 2.0])?;
        let strat = Stratification::new(2, domain, strata)?;
        Self::assemble(
            "two_lines_demo",
            Formula::TwoLines,
            strat,
            Constants {
                g: TWO_LINES_G,
                l0: CONSTANT_FLOOR,
                l1: CONSTANT_FLOOR,
                l2: TWO_LINES_L2,
                lambda_lo: AFFINE_LAMBDA_LO,
                lambda_hi: AFFINE_LAMBDA_HI,
                a3: DEFAULT_A3,
            },
            Point::from([1.5, -0.5]),
            0.01,
        )
    }

    fn assemble(
        name: &str,
        formula: Formula,
        strat: Stratification,
        constants: Constants,
        reference_start: Point,
        reference_gamma: f64,
    ) -> Result<Self> {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let dom = strat.domain().clone();
        let signatures = strat
            .strata()
            .iter()
            .map(|s| formula.kink_signs(&s.sample(&mut rng, &dom.lo, &dom.hi)))
            .collect();
        Ok(CatalogFunction {
            name: name.to_string(),
            formula,
            strat,
            signatures,
            constants,
            reference_start,
            reference_gamma,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn formula(&self) -> &Formula {
        &self.formula
    }

    pub fn stratification(&self) -> &Stratification {
        &self.strat
    }

    pub fn constants(&self) -> &Constants {
        &self.constants
    }

    pub fn lipschitz_g(&self) -> f64 {
        self.constants.g
    }

    pub fn domain(&self) -> &DomainBox {
        self.strat.domain()
    }

    pub fn reference_start(&self) -> &Point {
        &self.reference_start
    }

    pub fn reference_gamma(&self) -> f64 {
        self.reference_gamma
    }

    pub fn signature(&self, id: usize) -> Result<&[i8]> {
        self.signatures
            .get(id)
            .map(|v| v.as_slice())
            .ok_or(Error::UnknownStratum(id))
    }

    pub fn piece_gradient(&self, sig: &[i8], x: &Point) -> Vector {
        self.formula.piece_gradient(sig, x)
    }

    /// Riemannian gradient of the restriction to stratum `id` at `y`.
    pub fn restricted_gradient(&self, id: usize, y: &Point) -> Result<Vector> {
        let s = self.strat.stratum(id)?;
        let sig = self.signature(id)?;
        let p = s.tangent_projector(y);
        Ok(p.apply(&self.formula.piece_gradient(sig, y)))
    }
}

impl Objective for CatalogFunction {
    fn dim(&self) -> usize {
        self.formula.dim()
    }

    fn value(&self, x: &Point) -> f64 {
        self.formula.value(x)
    }

    fn subgradient(&self, x: &Point) -> Vector {
        self.formula.piece_gradient(&self.formula.kink_signs(x), x)
    }
}

// Frozen from `estimate_constants` (sampled sup, G with a 10% margin and
// L2 with a 2x margin); the catalog tests re-estimate and compare.
const APPENDIX_G: f64 = 48.0;
const APPENDIX_L2: f64 = 161.0;
const ABS_DIFF_SQ_G: f64 = 6.25;
const ABS_DIFF_SQ_L2: f64 = 16.0;
const TWO_LINES_G: f64 = 3.6;
const TWO_LINES_L2: f64 = 5.0;
