//! Individual strata: points, bounded or unbounded affine pieces, circle
//! arcs in the plane and open full-dimensional boxes.

use crate::error::{Error, Result};
use crate::geometry::{LinearMap, Point, Vector};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Open interval with optional (infinite when absent) endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpenInterval {
    pub lo: Option<f64>,
    pub hi: Option<f64>,
}

impl OpenInterval {
    pub const ALL: OpenInterval = OpenInterval { lo: None, hi: None };

    pub fn new(lo: Option<f64>, hi: Option<f64>) -> Self {
        OpenInterval { lo, hi }
    }

    pub fn lo_f(&self) -> f64 {
        self.lo.unwrap_or(f64::NEG_INFINITY)
    }

    pub fn hi_f(&self) -> f64 {
        self.hi.unwrap_or(f64::INFINITY)
    }

    pub fn contains(&self, t: f64) -> bool {
        self.lo_f() < t && t < self.hi_f()
    }

    /// Distance from `t` to the closed interval.
    pub fn dist(&self, t: f64) -> f64 {
        if t < self.lo_f() {
            self.lo_f() - t
        } else if t > self.hi_f() {
            t - self.hi_f()
        } else {
            0.0
        }
    }

    pub fn clamp(&self, t: f64) -> f64 {
        t.max(self.lo_f()).min(self.hi_f())
    }
}

/// Geometric description of a stratum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StratumKind {
    Point {
        at: Point,
    },
    /// `{anchor + Σ tᵢ bᵢ : tᵢ ∈ bounds[i]}` with an orthonormal basis.
    Affine {
        anchor: Point,
        basis: Vec<Point>,
        bounds: Vec<OpenInterval>,
    },
    /// Circle (or open arc of angles in `]arc[0], arc[1][`) in the plane.
    CircleArc {
        center: [f64; 2],
        radius: f64,
        arc: Option<[f64; 2]>,
    },
    /// Open axis-aligned box, full-dimensional.
    Region {
        bounds: Vec<OpenInterval>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stratum {
    pub id: usize,
    pub dim: usize,
    pub label: String,
    pub kind: StratumKind,
}

fn circle_angle(center: [f64; 2], x: &Point) -> f64 {
    (x[1] - center[1]).atan2(x[0] - center[0])
}

impl Stratum {
    pub fn new(
        id: usize,
        label: impl Into<String>,
        kind: StratumKind,
        ambient: usize,
    ) -> Result<Self> {
        let dim = match &kind {
            StratumKind::Point { .. } => 0,
            StratumKind::Affine { basis, .. } => basis.len(),
            StratumKind::CircleArc { .. } => 1,
            StratumKind::Region { .. } => ambient,
        };
        let s = Stratum {
            id,
            dim,
            label: label.into(),
            kind,
        };
        s.validate(ambient)?;
        Ok(s)
    }

    /// Structural checks: dimensions agree, bases are orthonormal, radii
    /// positive, affine pieces are not full-dimensional.
    pub fn validate(&self, ambient: usize) -> Result<()> {
        let bad = |m: &str| {
            Err(Error::InvalidStratification(format!(
                "stratum {}: {m}",
                self.id
            )))
        };
        match &self.kind {
            StratumKind::Point { at } => {
                if at.dim() != ambient {
                    return bad("point has wrong dimension");
                }
            }
            StratumKind::Affine {
                anchor,
                basis,
                bounds,
            } => {
                if anchor.dim() != ambient || basis.iter().any(|b| b.dim() != ambient) {
                    return bad("affine piece has wrong dimension");
                }
                if basis.is_empty() || basis.len() >= ambient || bounds.len() != basis.len() {
                    return bad("affine piece must have 1..d-1 directions and matching bounds");
                }
                for (i, bi) in basis.iter().enumerate() {
                    for (j, bj) in basis.iter().enumerate() {
                        let want = if i == j { 1.0 } else { 0.0 };
                        if (bi.dot(bj) - want).abs() > 1e-12 {
                            return bad("basis is not orthonormal");
                        }
                    }
                }
                if bounds.iter().any(|b| !(b.lo_f() < b.hi_f())) {
                    return bad("empty coordinate bounds");
                }
            }
            StratumKind::CircleArc { radius, arc, .. } => {
                if ambient != 2 {
                    return bad("circle arcs live in the plane");
                }
                if !(*radius > 0.0) {
                    return bad("radius must be positive");
                }
                if let Some([a, b]) = arc {
                    if !(-std::f64::consts::PI <= *a && a < b && *b <= std::f64::consts::PI) {
                        return bad("arc angles must satisfy -pi <= a < b <= pi");
                    }
                }
            }
            StratumKind::Region { bounds } => {
                if bounds.len() != ambient {
                    return bad("region bounds have wrong dimension");
                }
                if bounds.iter().any(|b| !(b.lo_f() < b.hi_f())) {
                    return bad("empty region");
                }
            }
        }
        Ok(())
    }

    fn affine_coords(anchor: &Point, basis: &[Point], x: &Point) -> Vec<f64> {
        let rel = x.sub(anchor);
        basis.iter().map(|b| b.dot(&rel)).collect()
    }

    /// Euclidean distance to the closure of the stratum.
    pub fn dist(&self, x: &Point) -> f64 {
        match &self.kind {
            StratumKind::Point { at } => x.distance(at),
            StratumKind::Affine {
                anchor,
                basis,
                bounds,
            } => {
                let t = Self::affine_coords(anchor, basis, x);
                let mut closest = anchor.clone();
                for ((b, ti), bd) in basis.iter().zip(&t).zip(bounds) {
                    closest = closest.add_scaled(bd.clamp(*ti), b);
                }
                x.distance(&closest)
            }
            StratumKind::CircleArc {
                center,
                radius,
                arc,
            } => {
                let s = ((x[0] - center[0]).powi(2) + (x[1] - center[1]).powi(2)).sqrt();
                match arc {
                    None => (s - radius).abs(),
                    Some([a, b]) => {
                        if s > 0.0 {
                            let th = circle_angle(*center, x);
                            if *a < th && th < *b {
                                return (s - radius).abs();
                            }
                        }
                        let end = |t: f64| {
                            Point::from([
                                center[0] + radius * t.cos(),
                                center[1] + radius * t.sin(),
                            ])
                        };
                        x.distance(&end(*a)).min(x.distance(&end(*b)))
                    }
                }
            }
            StratumKind::Region { bounds } => x
                .iter()
                .zip(bounds)
                .map(|(c, b)| b.dist(*c).powi(2))
                .sum::<f64>()
                .sqrt(),
        }
    }

    /// Exact membership. Affine residuals are compared against zero, which
    /// is exact for the axis-aligned pieces of the catalog; circles use a
    /// 1e-12 band.
    pub fn contains(&self, x: &Point) -> bool {
        match &self.kind {
            StratumKind::Point { at } => x == at,
            StratumKind::Affine {
                anchor,
                basis,
                bounds,
            } => {
                let t = Self::affine_coords(anchor, basis, x);
                if !t.iter().zip(bounds).all(|(ti, b)| b.contains(*ti)) {
                    return false;
                }
                let mut y = anchor.clone();
                for (b, ti) in basis.iter().zip(&t) {
                    y = y.add_scaled(*ti, b);
                }
                y.iter().zip(x.iter()).all(|(a, b)| a == b)
            }
            StratumKind::CircleArc { center, arc, .. } => {
                self.dist(x) <= 1e-12
                    && match arc {
                        None => true,
                        Some([a, b]) => {
                            let th = circle_angle(*center, x);
                            *a < th && th < *b
                        }
                    }
            }
            StratumKind::Region { bounds } => x.iter().zip(bounds).all(|(c, b)| b.contains(*c)),
        }
    }

    /// Nearest point of the stratum; errors when the nearest point of the
    /// closure is not in the stratum or is not unique.
    pub fn project(&self, x: &Point) -> Result<Point> {
        let ill = Err(Error::IllPosedProjection { stratum: self.id });
        match &self.kind {
            StratumKind::Point { at } => Ok(at.clone()),
            StratumKind::Affine {
                anchor,
                basis,
                bounds,
            } => {
                let t = Self::affine_coords(anchor, basis, x);
                if !t.iter().zip(bounds).all(|(ti, b)| b.contains(*ti)) {
                    return ill;
                }
                let mut y = anchor.clone();
                for (b, ti) in basis.iter().zip(&t) {
                    y = y.add_scaled(*ti, b);
                }
                Ok(y)
            }
            StratumKind::CircleArc {
                center,
                radius,
                arc,
            } => {
                let dx = x[0] - center[0];
                let dy = x[1] - center[1];
                let s = (dx * dx + dy * dy).sqrt();
                if s == 0.0 {
                    return ill;
                }
                if let Some([a, b]) = arc {
                    let th = dy.atan2(dx);
                    if !(*a < th && th < *b) {
                        return ill;
                    }
                }
                Ok(Point::from([
                    center[0] + radius * dx / s,
                    center[1] + radius * dy / s,
                ]))
            }
            StratumKind::Region { .. } => {
                if self.contains(x) {
                    Ok(x.clone())
                } else {
                    ill
                }
            }
        }
    }

    /// Orthonormal basis of the tangent space at `y` (assumed on the stratum).
    pub fn tangent_basis(&self, y: &Point) -> Vec<Vector> {
        let n = y.dim();
        match &self.kind {
            StratumKind::Point { .. } => Vec::new(),
            StratumKind::Affine { basis, .. } => basis.clone(),
            StratumKind::CircleArc { center, .. } => {
                let th = circle_angle(*center, y);
                vec![Point::from([-th.sin(), th.cos()])]
            }
            StratumKind::Region { .. } => (0..n)
                .map(|i| {
                    let mut e = Point::zeros(n);
                    e.coords_mut()[i] = 1.0;
                    e
                })
                .collect(),
        }
    }

    /// Orthogonal projector onto the tangent space at `y`.
    pub fn tangent_projector(&self, y: &Point) -> LinearMap {
        LinearMap::span_projector(y.dim(), &self.tangent_basis(y))
    }

    /// Shape operator `S_{w,y}` for a unit normal `w` at `y`, as a map on the
    /// ambient space vanishing on the normal space.
    pub fn shape_operator(&self, y: &Point, w: &Vector) -> LinearMap {
        match &self.kind {
            StratumKind::CircleArc { center, radius, .. } => {
                let outward =
                    Point::from([(y[0] - center[0]) / radius, (y[1] - center[1]) / radius]);
                let t = &self.tangent_basis(y)[0];
                LinearMap::outer(t, t).scale(-outward.dot(w) / radius)
            }
            _ => LinearMap::zeros(y.dim()),
        }
    }

    /// Jacobian of the nearest-point map at `x`, `(Id - r S_{w,y})⁻¹ P_y`.
    pub fn projection_jacobian(&self, x: &Point) -> Result<LinearMap> {
        let y = self.project(x)?;
        let n = x.dim();
        let p = self.tangent_projector(&y);
        let offset = x.sub(&y);
        let r = offset.norm();
        if r == 0.0 {
            return Ok(p);
        }
        let w = offset.scale(1.0 / r);
        if let StratumKind::CircleArc { center, radius, .. } = &self.kind {
            let outward = Point::from([(y[0] - center[0]) / radius, (y[1] - center[1]) / radius]);
            if outward.dot(&w) < 0.0 && r >= *radius {
                return Err(Error::CurvatureRadiusExceeded { stratum: self.id });
            }
        }
        let s = self.shape_operator(&y, &w);
        let m = LinearMap::identity(n).sub(&s.scale(r));
        let inv = m
            .inverse()
            .ok_or(Error::CurvatureRadiusExceeded { stratum: self.id })?;
        Ok(inv.mul(&p))
    }

    /// A random point of the stratum inside (roughly) the given box.
    pub fn sample<R: Rng>(&self, rng: &mut R, lo: &[f64], hi: &[f64]) -> Point {
        let span = lo
            .iter()
            .zip(hi)
            .map(|(a, b)| (b - a).powi(2))
            .sum::<f64>()
            .sqrt();
        match &self.kind {
            StratumKind::Point { at } => at.clone(),
            StratumKind::Affine {
                anchor,
                basis,
                bounds,
            } => {
                let mut y = anchor.clone();
                for (b, bd) in basis.iter().zip(bounds) {
                    let a = bd.lo_f().max(-span);
                    let c = bd.hi_f().min(span);
                    let mut t = rng.gen_range(a..c);
                    while !bd.contains(t) {
                        t = rng.gen_range(a..c);
                    }
                    y = y.add_scaled(t, b);
                }
                y
            }
            StratumKind::CircleArc {
                center,
                radius,
                arc,
            } => {
                let [a, b] = arc.unwrap_or([-std::f64::consts::PI, std::f64::consts::PI]);
                let th = rng.gen_range(a..b);
                Point::from([center[0] + radius * th.cos(), center[1] + radius * th.sin()])
            }
            StratumKind::Region { bounds } => {
                let coords = bounds
                    .iter()
                    .zip(lo.iter().zip(hi))
                    .map(|(bd, (l, h))| {
                        let a = bd.lo_f().max(*l);
                        let c = bd.hi_f().min(*h);
                        let (a, c) = if a < c {
                            (a, c)
                        } else {
                            (bd.lo_f().max(-span), bd.hi_f().min(span))
                        };
                        let mut t = rng.gen_range(a..c);
                        while !bd.contains(t) {
                            t = rng.gen_range(a..c);
                        }
                        t
                    })
                    .collect();
                Point::new(coords).expect("finite sample")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn circle(center: [f64; 2]) -> Stratum {
        Stratum::new(
            0,
            "circle",
            StratumKind::CircleArc {
                center,
                radius: 1.0,
                arc: None,
            },
            2,
        )
        .unwrap()
    }

    #[test]
    fn circle_jacobian_outside_and_inside() {
        let c = circle([0.0, 0.0]);
        let j = c.projection_jacobian(&Point::from([2.0, 0.0])).unwrap();
        assert!((j.get(0, 0)).abs() < 1e-15 && (j.get(1, 1) - 0.5).abs() < 1e-12);
        assert!(j.get(0, 1).abs() < 1e-15);
        let j = c.projection_jacobian(&Point::from([0.5, 0.0])).unwrap();
        assert!((j.get(1, 1) - 2.0).abs() < 1e-12 && j.get(0, 0).abs() < 1e-15);
    }

    #[test]
    fn circle_center_is_ill_posed() {
        let c = circle([0.0, 0.0]);
        assert!(c.projection_jacobian(&Point::from([0.0, 0.0])).is_err());
    }

    #[test]
    fn ray_projection_and_distance() {
        let ray = Stratum::new(
            3,
            "ray",
            StratumKind::Affine {
                anchor: Point::from([0.0, 0.0]),
                basis: vec![Point::from([0.0, 1.0])],
                bounds: vec![OpenInterval::new(Some(0.0), None)],
            },
            2,
        )
        .unwrap();
        assert_eq!(
            ray.project(&Point::from([0.3, 2.0])).unwrap(),
            Point::from([0.0, 2.0])
        );
        assert!((ray.dist(&Point::from([0.3, -0.4])) - 0.5).abs() < 1e-15);
        assert_eq!(
            ray.project(&Point::from([0.3, -0.4])),
            Err(Error::IllPosedProjection { stratum: 3 })
        );
        assert!(ray.contains(&Point::from([0.0, 0.1])));
        assert!(!ray.contains(&Point::from([0.0, 0.0])));
    }

    #[test]
    fn rejects_non_orthonormal_basis() {
        let r = Stratum::new(
            0,
            "bad",
            StratumKind::Affine {
                anchor: Point::from([0.0, 0.0]),
                basis: vec![Point::from([1.0, 1.0])],
                bounds: vec![OpenInterval::ALL],
            },
            2,
        );
        assert!(r.is_err());
    }
}
