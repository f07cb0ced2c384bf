//! Exponents, step ceilings and the three families of conical
//! neighborhoods around strata (well-posed, outer, inner).

use crate::catalog::{CatalogFunction, Constants};
use crate::error::{Error, Result};
use crate::geometry::{truncate, Point};
use crate::stratification::Stratification;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ValidationTier {
    /// Evaluate and record every inequality, reject only structural errors.
    #[default]
    Report,
    /// Require the hypotheses of the geometric lemma and the nesting of
    /// outer neighborhoods inside well-posed ones.
    Geometric,
    /// Additionally require the constraints of the descent lemma.
    Theorem,
}

impl std::str::FromStr for ValidationTier {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "report" => Ok(ValidationTier::Report),
            "geometric" => Ok(ValidationTier::Geometric),
            "theorem" => Ok(ValidationTier::Theorem),
            other => Err(Error::Parse(format!("unknown validation tier `{other}`"))),
        }
    }
}

/// One evaluated inequality `lhs <= rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamCheck {
    pub name: String,
    pub tier: ValidationTier,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeighborhoodParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub gamma0: f64,
    pub max_rank: usize,
    pub constants: Constants,
}

/// `β = 1/(R+2)`, `α = β/3`.
pub fn auto_exponents(max_rank: usize) -> (f64, f64) {
    let beta = 1.0 / (max_rank as f64 + 2.0);
    (beta / 3.0, beta)
}

/// Largest `γ₀` satisfying every inequality of the requested tier.
pub fn gamma0_ceiling(
    tier: ValidationTier,
    alpha: f64,
    beta: f64,
    max_rank: usize,
    c: &Constants,
) -> f64 {
    let r = max_rank as f64;
    let mut g0: f64 = 1.0;
    if tier == ValidationTier::Report {
        return g0;
    }
    g0 = g0.min(4f64.powf(-1.0 / (beta - alpha)));
    g0 = g0.min((2.0 * c.g).powf(1.0 / ((r + 1.0) * beta - 1.0)));
    g0 = g0.min(c.a3.powf(1.0 / alpha));
    if tier == ValidationTier::Theorem {
        g0 = g0.min((c.a3 / 3.0).powf(1.0 / alpha));
        g0 = g0.min(c.descent_step_factor().powf(1.0 / (r * beta - 1.0)));
    }
    // Back off by a relative 1e-9 from the exact ceiling.
    g0 * (1.0 - 1e-9)
}

impl NeighborhoodParams {
    /// Builds parameters, rejecting only structurally invalid values.
    pub fn new(
        alpha: f64,
        beta: f64,
        gamma: f64,
        gamma0: f64,
        max_rank: usize,
        constants: Constants,
    ) -> Result<Self> {
        let p = NeighborhoodParams {
            alpha,
            beta,
            gamma,
            gamma0,
            max_rank,
            constants,
        };
        p.check_structure()?;
        Ok(p)
    }

    fn check_structure(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParams(m));
        if !(0.0 < self.alpha && self.alpha < self.beta && self.beta < 1.0) {
            return bad(format!(
                "need 0 < alpha < beta < 1, got alpha={} beta={}",
                self.alpha, self.beta
            ));
        }
        if !((self.max_rank as f64 + 1.0) * self.beta < 1.0) {
            return bad(format!(
                "need (R+1) beta < 1, got R={} beta={}",
                self.max_rank, self.beta
            ));
        }
        if !(0.0 < self.gamma && self.gamma < self.gamma0 && self.gamma0 <= 1.0) {
            return bad(format!(
                "need 0 < gamma < gamma0 <= 1, got gamma={} gamma0={}",
                self.gamma, self.gamma0
            ));
        }
        let c = &self.constants;
        let all = [c.g, c.l0, c.l1, c.l2, c.lambda_lo, c.lambda_hi, c.a3];
        if all.iter().any(|v| !(v.is_finite() && *v > 0.0)) || c.lambda_lo > c.lambda_hi {
            return bad("constants must be finite, positive and lambda_lo <= lambda_hi".into());
        }
        Ok(())
    }

    /// Automatic exponents and, unless given, a step at half the ceiling of
    /// the geometric tier.
    pub fn auto(f: &CatalogFunction, gamma: Option<f64>, gamma0: Option<f64>) -> Result<Self> {
        let r = f.stratification().max_rank();
        let (alpha, beta) = auto_exponents(r);
        Self::with_exponents(f, alpha, beta, gamma, gamma0)
    }

    pub fn with_exponents(
        f: &CatalogFunction,
        alpha: f64,
        beta: f64,
        gamma: Option<f64>,
        gamma0: Option<f64>,
    ) -> Result<Self> {
        Self::resolve(
            alpha,
            beta,
            gamma,
            gamma0,
            f.stratification().max_rank(),
            *f.constants(),
        )
    }

    /// Fills in a missing step or ceiling: `γ₀` defaults to the geometric
    /// ceiling (or `min(1, 2γ)` when `γ` is not below it) and `γ` to `γ₀/2`.
    pub fn resolve(
        alpha: f64,
        beta: f64,
        gamma: Option<f64>,
        gamma0: Option<f64>,
        r: usize,
        c: Constants,
    ) -> Result<Self> {
        let ceiling = gamma0_ceiling(ValidationTier::Geometric, alpha, beta, r, &c);
        let (gamma, gamma0) = match (gamma, gamma0) {
            (Some(g), Some(g0)) => (g, g0),
            (Some(g), None) => (
                g,
                if g < ceiling {
                    ceiling
                } else {
                    (2.0 * g).min(1.0)
                },
            ),
            (None, Some(g0)) => (g0 / 2.0, g0),
            (None, None) => (ceiling / 2.0, ceiling),
        };
        Self::new(alpha, beta, gamma, gamma0, r, c)
    }

    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        let mut p = *self;
        p.gamma = gamma;
        p.check_structure()?;
        Ok(p)
    }

    /// Every tiered inequality, evaluated at `γ₀`.
    pub fn checks(&self) -> Vec<ParamCheck> {
        let (a, b, g0) = (self.alpha, self.beta, self.gamma0);
        let r = self.max_rank as f64;
        let c = &self.constants;
        let mk = |name: &str, tier, lhs: f64, rhs: f64| ParamCheck {
            name: name.to_string(),
            tier,
            lhs,
            rhs,
            holds: lhs <= rhs,
        };
        use ValidationTier::*;
        vec![
            mk(
                "4*gamma0^(beta-alpha) <= 1",
                Geometric,
                4.0 * g0.powf(b - a),
                1.0,
            ),
            mk(
                "2*G <= gamma0^((R+1)*beta-1)",
                Geometric,
                2.0 * c.g,
                g0.powf((r + 1.0) * b - 1.0),
            ),
            mk("gamma0^alpha <= A3", Geometric, g0.powf(a), c.a3),
            mk("3*gamma0^alpha <= A3", Theorem, 3.0 * g0.powf(a), c.a3),
            mk("A3 <= 1/4", Theorem, c.a3, 0.25),
            mk(
                "max(4*lh*G, 8*L2*lh^2/ll, 2*L1*G*lh) <= gamma0^(R*beta-1)",
                Theorem,
                c.descent_step_factor(),
                g0.powf(r * b - 1.0),
            ),
        ]
    }

    /// Errors with the first violated inequality of the requested tier.
    pub fn require(&self, tier: ValidationTier) -> Result<()> {
        let needed = |t: ValidationTier| match tier {
            ValidationTier::Report => false,
            ValidationTier::Geometric => t == ValidationTier::Geometric,
            ValidationTier::Theorem => true,
        };
        for ch in self.checks() {
            if needed(ch.tier) && !ch.holds {
                return Err(Error::InvalidParams(format!(
                    "violated: {} (lhs={:e}, rhs={:e})",
                    ch.name, ch.lhs, ch.rhs
                )));
            }
        }
        Ok(())
    }

    pub fn satisfies(&self, tier: ValidationTier) -> bool {
        self.require(tier).is_ok()
    }
}

/// Which strata a union of neighborhoods ranges over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DimFilter {
    Below(usize),
    AtMost(usize),
    Equal(usize),
}

impl DimFilter {
    fn accepts(&self, d: usize) -> bool {
        match *self {
            DimFilter::Below(j) => d < j,
            DimFilter::AtMost(j) => d <= j,
            DimFilter::Equal(j) => d == j,
        }
    }
}

/// Distances from one point to every stratum and every skeleton, computed
/// once and shared by all membership predicates.
#[derive(Debug, Clone)]
pub struct Profile {
    pub dists: Vec<f64>,
    /// `skeleton[j]` is the distance to the union of strata of dimension
    /// at most `j` (1 when that union is empty).
    pub skeleton: Vec<f64>,
    contained: Vec<bool>,
}

impl Profile {
    pub fn new(strat: &Stratification, x: &Point) -> Self {
        let d = strat.ambient_dim();
        let mut dists = Vec::with_capacity(strat.len());
        let mut contained = Vec::with_capacity(strat.len());
        let mut skeleton = vec![f64::INFINITY; d + 1];
        let mut seen = vec![false; d + 1];
        for s in strat.strata() {
            let v = s.dist(x);
            dists.push(v);
            contained.push(s.dim == d && s.contains(x));
            seen[s.dim] = true;
            skeleton[s.dim] = skeleton[s.dim].min(v);
        }
        let mut acc = f64::INFINITY;
        let mut any = false;
        for j in 0..=d {
            if seen[j] {
                any = true;
                acc = acc.min(skeleton[j]);
            }
            skeleton[j] = if any { acc } else { 1.0 };
        }
        Profile {
            dists,
            skeleton,
            contained,
        }
    }

    /// Distance to the skeleton of dimension at most `j` (1 for `j < 0`).
    pub fn skeleton_dist(&self, j: isize) -> f64 {
        if j < 0 {
            1.0
        } else {
            self.skeleton[j as usize]
        }
    }
}

/// Membership predicates for one stratification and parameter set.
#[derive(Debug, Clone, Copy)]
pub struct Neighborhoods<'a> {
    pub strat: &'a Stratification,
    pub params: &'a NeighborhoodParams,
}

impl<'a> Neighborhoods<'a> {
    pub fn new(strat: &'a Stratification, params: &'a NeighborhoodParams) -> Self {
        Neighborhoods { strat, params }
    }

    pub fn profile(&self, x: &Point) -> Profile {
        Profile::new(self.strat, x)
    }

    fn dim(&self, id: usize) -> usize {
        self.strat.strata()[id].dim
    }

    fn is_full(&self, id: usize) -> bool {
        self.dim(id) == self.strat.ambient_dim()
    }

    /// `min(γ^{rank·β}, dist(x, skeleton below X))`.
    pub fn cone_scale(&self, p: &Profile, id: usize) -> f64 {
        let r = self.strat.rank(id) as f64;
        let g = self.params.gamma;
        g.powf(r * self.params.beta)
            .min(p.skeleton_dist(self.dim(id) as isize - 1))
    }

    pub fn outer_at(&self, p: &Profile, id: usize) -> bool {
        if self.is_full(id) {
            return p.contained[id];
        }
        p.dists[id] <= self.params.gamma.powf(self.params.alpha) * self.cone_scale(p, id)
    }

    pub fn inner_at(&self, p: &Profile, id: usize) -> bool {
        if self.is_full(id) {
            return p.contained[id];
        }
        p.dists[id] <= self.params.gamma.powf(self.params.beta) * self.cone_scale(p, id)
    }

    pub fn wellposed_at(&self, p: &Profile, id: usize) -> bool {
        if self.is_full(id) {
            return p.contained[id];
        }
        p.dists[id]
            <= self.params.constants.a3 * truncate(p.skeleton_dist(self.dim(id) as isize - 1))
    }

    pub fn inner_union_at(&self, p: &Profile, filter: DimFilter) -> bool {
        self.strat
            .strata()
            .iter()
            .filter(|s| filter.accepts(s.dim))
            .any(|s| self.inner_at(p, s.id))
    }

    pub fn outer_union_at(&self, p: &Profile, filter: DimFilter) -> bool {
        self.strat
            .strata()
            .iter()
            .filter(|s| filter.accepts(s.dim))
            .any(|s| self.outer_at(p, s.id))
    }

    pub fn in_outer(&self, x: &Point, id: usize) -> bool {
        self.outer_at(&self.profile(x), id)
    }

    pub fn in_inner(&self, x: &Point, id: usize) -> bool {
        self.inner_at(&self.profile(x), id)
    }

    pub fn in_wellposed(&self, x: &Point, id: usize) -> bool {
        self.wellposed_at(&self.profile(x), id)
    }

    pub fn in_inner_union(&self, x: &Point, filter: DimFilter) -> bool {
        self.inner_union_at(&self.profile(x), filter)
    }

    /// Evaluates every item of the geometric lemma at `(x, x')` for stratum `id`.
    pub fn geom_items(&self, x: &Point, x2: &Point, id: usize) -> GeomItems {
        let (a, b, g) = (self.params.alpha, self.params.beta, self.params.gamma);
        let r = self.strat.rank(id) as f64;
        let j = self.dim(id) as isize;
        let px = self.profile(x);
        let px2 = self.profile(x2);
        let inner = self.inner_at(&px, id);
        let outer = self.outer_at(&px, id);
        let below = self.inner_union_at(&px, DimFilter::Below(j as usize));
        let x2_outer = self.outer_at(&px2, id);
        let step = x.distance(x2);
        let dist = px.dists[id];
        let dist2 = px2.dists[id];
        let scale2 = g.powf(r * b).min(px2.skeleton_dist(j - 1));
        let close = step <= self.params.constants.g * g;
        GeomItems {
            items: [
                GeomItem::new(inner, dist, g.powf((1.0 + r) * b), false),
                GeomItem::new(outer, dist, g.powf(a + r * b), false),
                GeomItem::new(!below, px.skeleton_dist(j - 1), g.powf(r * b), true),
                GeomItem::new(
                    inner && !below && !x2_outer,
                    step,
                    g.powf(a + r * b) / 4.0,
                    true,
                ),
                GeomItem::new(
                    inner && !below && close,
                    dist2,
                    3.0 * g.powf(b) * scale2,
                    false,
                ),
                GeomItem::new(
                    outer && !below && close,
                    dist2,
                    3.0 * g.powf(a) * scale2,
                    false,
                ),
            ],
        }
    }

    /// Checks `min{γ^{rβ}, dist(x, skeleton below)} >= γ^{1-β}/γ₀^{1-(R+1)β}`
    /// for `x` outside the lower inner cones; returns `(lhs, rhs)`.
    pub fn skeleton_lower_bound(&self, x: &Point, id: usize) -> Result<(f64, f64)> {
        let p = self.profile(x);
        let j = self.dim(id);
        if self.inner_union_at(&p, DimFilter::Below(j)) {
            return Err(Error::Precondition(
                "point lies in an inner neighborhood of a lower-dimensional stratum".into(),
            ));
        }
        let (b, g, g0) = (self.params.beta, self.params.gamma, self.params.gamma0);
        let big_r = self.params.max_rank as f64;
        let lhs = self.cone_scale(&p, id);
        let rhs = g.powf(1.0 - b) / g0.powf(1.0 - (big_r + 1.0) * b);
        Ok((lhs, rhs))
    }
}

/// One implication `hypothesis ⟹ value (<= or >=) bound`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GeomItem {
    pub hypothesis: bool,
    pub value: f64,
    pub bound: f64,
    pub lower: bool,
}

impl GeomItem {
    fn new(hypothesis: bool, value: f64, bound: f64, lower: bool) -> Self {
        GeomItem {
            hypothesis,
            value,
            bound,
            lower,
        }
    }

    /// True when the implication holds (vacuously if the hypothesis fails).
    pub fn holds(&self) -> bool {
        if !self.hypothesis {
            return true;
        }
        if self.lower {
            self.value >= self.bound
        } else {
            self.value <= self.bound
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GeomItems {
    pub items: [GeomItem; 6],
}

impl GeomItems {
    pub fn all_hold(&self) -> bool {
        self.items.iter().all(GeomItem::holds)
    }
}

/// Parameters for the `i`-th doubling interval: same exponents, step equal
/// to the first step of the following interval (the last step of the run
/// for the final interval).
pub fn varying_neighborhoods(
    base: &NeighborhoodParams,
    intervals: &[(usize, usize)],
    steps: &[f64],
    i: usize,
) -> Result<NeighborhoodParams> {
    let (_, hi) = *intervals
        .get(i)
        .ok_or_else(|| Error::Precondition(format!("no interval {i}")))?;
    let k = if i + 1 < intervals.len() {
        intervals[i + 1].0
    } else {
        hi
    };
    base.with_gamma(steps[k - 1])
}
