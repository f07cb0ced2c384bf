//! Points, dense linear maps and the small amount of linear algebra the
//! rest of the crate needs (ambient dimension is at most 8).

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::ops::{Deref, Index};

/// Largest ambient dimension supported by the lab.
pub const MAX_DIM: usize = 8;

/// Tolerance used when checking that a map is symmetric and idempotent.
pub const PROJECTOR_TOL: f64 = 1e-9;

/// A point (or vector) of the ambient space with finite coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Point(Vec<f64>);

/// Vectors share the representation of points.
pub type Vector = Point;

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() || coords.len() > MAX_DIM {
            return Err(Error::DimensionMismatch {
                expected: MAX_DIM,
                got: coords.len(),
            });
        }
        if let Some(index) = coords.iter().position(|c| !c.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Point(coords))
    }

    pub fn zeros(dim: usize) -> Self {
        Point(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn dot(&self, other: &Point) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn sub(&self, other: &Point) -> Point {
        debug_assert_eq!(self.dim(), other.dim());
        Point(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn add(&self, other: &Point) -> Point {
        debug_assert_eq!(self.dim(), other.dim());
        Point(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn scale(&self, s: f64) -> Point {
        Point(self.0.iter().map(|a| a * s).collect())
    }

    /// `self + s * other`.
    pub fn add_scaled(&self, s: f64, other: &Point) -> Point {
        debug_assert_eq!(self.dim(), other.dim());
        Point(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a + s * b)
                .collect(),
        )
    }

    pub fn distance(&self, other: &Point) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }

    pub(crate) fn from_vec_unchecked(v: Vec<f64>) -> Point {
        Point(v)
    }

    pub(crate) fn coords_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl TryFrom<Vec<f64>> for Point {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Point::new(v)
    }
}

impl From<Point> for Vec<f64> {
    fn from(p: Point) -> Self {
        p.0
    }
}

impl<const N: usize> From<[f64; N]> for Point {
    /// Panics on non-finite input; intended for literals.
    fn from(a: [f64; N]) -> Self {
        Point::new(a.to_vec()).expect("finite literal point")
    }
}

impl Deref for Point {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl Index<usize> for Point {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Dense square matrix, row-major, carrying a tag recording whether it was
/// validated as an orthogonal projector.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearMap {
    n: usize,
    entries: Vec<f64>,
    projector: bool,
}

impl LinearMap {
    pub fn zeros(n: usize) -> Self {
        LinearMap {
            n,
            entries: vec![0.0; n * n],
            projector: false,
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = LinearMap::zeros(n);
        for i in 0..n {
            m.entries[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut entries = Vec::with_capacity(n * n);
        for r in rows {
            if r.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: r.len(),
                });
            }
            entries.extend_from_slice(r);
        }
        Ok(LinearMap {
            n,
            entries,
            projector: false,
        })
    }

    /// `u vᵀ`.
    pub fn outer(u: &Vector, v: &Vector) -> Self {
        let n = u.dim();
        let mut m = LinearMap::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.entries[i * n + j] = u[i] * v[j];
            }
        }
        m
    }

    /// Orthogonal projector onto the span of an orthonormal family.
    pub fn span_projector(n: usize, basis: &[Vector]) -> Self {
        let mut m = LinearMap::zeros(n);
        for b in basis {
            m = m.add(&LinearMap::outer(b, b));
        }
        m.projector = true;
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.entries[i * self.n + j] = v;
        self.projector = false;
    }

    pub fn is_projector(&self) -> bool {
        self.projector
    }

    /// Validates symmetry and idempotence and returns the tagged map.
    pub fn into_projector(mut self) -> Result<Self> {
        let sym = self.sub(&self.transpose()).max_abs();
        let idem = self.mul(&self).sub(&self).max_abs();
        if sym > PROJECTOR_TOL || idem > PROJECTOR_TOL {
            return Err(Error::NotAProjector);
        }
        self.projector = true;
        Ok(self)
    }

    pub fn apply(&self, v: &Vector) -> Vector {
        let n = self.n;
        let mut out = vec![0.0; n];
        for (i, o) in out.iter_mut().enumerate() {
            *o = (0..n).map(|j| self.entries[i * n + j] * v[j]).sum();
        }
        Point::from_vec_unchecked(out)
    }

    pub fn transpose(&self) -> Self {
        let n = self.n;
        let mut m = LinearMap::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.entries[j * n + i] = self.entries[i * n + j];
            }
        }
        m.projector = self.projector;
        m
    }

    pub fn mul(&self, other: &LinearMap) -> Self {
        let n = self.n;
        let mut m = LinearMap::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.entries[i * n + j] = (0..n)
                    .map(|l| self.entries[i * n + l] * other.entries[l * n + j])
                    .sum();
            }
        }
        m
    }

    pub fn add(&self, other: &LinearMap) -> Self {
        LinearMap {
            n: self.n,
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| a + b)
                .collect(),
            projector: false,
        }
    }

    pub fn sub(&self, other: &LinearMap) -> Self {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, s: f64) -> Self {
        LinearMap {
            n: self.n,
            entries: self.entries.iter().map(|a| a * s).collect(),
            projector: false,
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, a| m.max(a.abs()))
    }

    pub fn frobenius(&self) -> f64 {
        self.entries.iter().map(|a| a * a).sum::<f64>().sqrt()
    }

    /// Spectral norm, via the largest eigenvalue of `AᵀA`.
    pub fn operator_norm(&self) -> f64 {
        let ata = self.transpose().mul(self);
        symmetric_eigenvalues(&ata)
            .into_iter()
            .fold(0.0_f64, f64::max)
            .max(0.0)
            .sqrt()
    }

    /// Inverse by Gauss-Jordan elimination with partial pivoting.
    pub fn inverse(&self) -> Option<Self> {
        let n = self.n;
        let mut a = self.entries.clone();
        let mut inv = LinearMap::identity(n).entries;
        for col in 0..n {
            let pivot = (col..n).max_by(|&r, &s| {
                a[r * n + col]
                    .abs()
                    .partial_cmp(&a[s * n + col].abs())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })?;
            if a[pivot * n + col].abs() < 1e-14 {
                return None;
            }
            for j in 0..n {
                a.swap(col * n + j, pivot * n + j);
                inv.swap(col * n + j, pivot * n + j);
            }
            let p = a[col * n + col];
            for j in 0..n {
                a[col * n + j] /= p;
                inv[col * n + j] /= p;
            }
            for r in 0..n {
                if r != col {
                    let factor = a[r * n + col];
                    if factor != 0.0 {
                        for j in 0..n {
                            a[r * n + j] -= factor * a[col * n + j];
                            inv[r * n + j] -= factor * inv[col * n + j];
                        }
                    }
                }
            }
        }
        Some(LinearMap {
            n,
            entries: inv,
            projector: false,
        })
    }
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, sorted
/// ascending. Only the symmetric part of the input is used.
pub fn symmetric_eigenvalues(m: &LinearMap) -> Vec<f64> {
    let n = m.dim();
    let mut a: Vec<f64> = (0..n * n)
        .map(|idx| {
            let (i, j) = (idx / n, idx % n);
            0.5 * (m.get(i, j) + m.get(j, i))
        })
        .collect();
    for _sweep in 0..64 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * n + j] * a[i * n + j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
    ev.sort_by(|x, y| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal));
    ev
}

/// Applies a validated projector to a vector.
pub fn project_subspace(p: &LinearMap, v: &Vector) -> Result<Vector> {
    if !p.is_projector() {
        return Err(Error::NotAProjector);
    }
    if p.dim() != v.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            got: v.dim(),
        });
    }
    Ok(p.apply(v))
}

/// Distance to a union of sets given by their individual distances; the
/// empty union is at distance 1 by convention.
pub fn dist_to_union<I: IntoIterator<Item = f64>>(dists: I) -> f64 {
    let mut it = dists.into_iter().peekable();
    if it.peek().is_none() {
        return 1.0;
    }
    it.fold(f64::INFINITY, f64::min)
}

/// `min(dist, 1)`.
pub fn truncate(dist: f64) -> f64 {
    dist.min(1.0)
}

/// Closed axis-aligned box used as the sampling domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl DomainBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::DimensionMismatch {
                expected: lo.len(),
                got: hi.len(),
            });
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a < b)) {
            return Err(Error::InvalidStratification(
                "domain box must satisfy lo < hi in every coordinate".into(),
            ));
        }
        Ok(DomainBox { lo, hi })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, x: &Point) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(c, (l, h))| *l <= *c && *c <= *h)
    }

    pub fn clip(&self, x: &Point) -> Point {
        Point::from_vec_unchecked(
            x.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .map(|(c, (l, h))| c.clamp(*l, *h))
                .collect(),
        )
    }

    pub fn diameter(&self) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| (h - l) * (h - l))
            .sum::<f64>()
            .sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_rejects_non_finite() {
        assert_eq!(
            Point::new(vec![1.0, f64::NAN]),
            Err(Error::NonFinite { index: 1 })
        );
    }

    #[test]
    fn projector_tag_is_checked() {
        let p = LinearMap::from_rows(&[vec![1.0, 0.0], vec![0.0, 0.0]]).unwrap();
        assert_eq!(
            project_subspace(&p, &Point::from([3.0, 4.0])),
            Err(Error::NotAProjector)
        );
        let p = p.into_projector().unwrap();
        assert_eq!(
            project_subspace(&p, &Point::from([3.0, 4.0])).unwrap(),
            Point::from([3.0, 0.0])
        );
        let bad = LinearMap::from_rows(&[vec![1.0, 1.0], vec![0.0, 0.0]]).unwrap();
        assert!(bad.into_projector().is_err());
    }

    #[test]
    fn jacobi_matches_closed_form_two_by_two() {
        let m = LinearMap::from_rows(&[vec![2.0, 1.0], vec![1.0, 3.0]]).unwrap();
        let ev = symmetric_eigenvalues(&m);
        let disc = (0.25f64 + 1.0).sqrt();
        assert!((ev[0] - (2.5 - disc)).abs() < 1e-12);
        assert!((ev[1] - (2.5 + disc)).abs() < 1e-12);
    }

    #[test]
    fn inverse_round_trip() {
        let m = LinearMap::from_rows(&[
            vec![4.0, 1.0, 0.0],
            vec![1.0, 3.0, 1.0],
            vec![0.0, 1.0, 2.0],
        ])
        .unwrap();
        let prod = m.mul(&m.inverse().unwrap());
        assert!(prod.sub(&LinearMap::identity(3)).max_abs() < 1e-12);
    }

    #[test]
    fn empty_union_is_at_unit_distance() {
        assert_eq!(dist_to_union(std::iter::empty()), 1.0);
        assert_eq!(dist_to_union([0.3, 0.2]), 0.2);
        assert_eq!(truncate(3.0), 1.0);
    }
}
