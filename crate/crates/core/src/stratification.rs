use crate::error::{Error, Result};
use crate::geometry::{dist_to_union, truncate, DomainBox, Point};
use crate::stratum::Stratum;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Finite partition of the ambient space into strata, identified by their
/// index in `strata`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StratificationDesc", into = "StratificationDesc")]
pub struct Stratification {
    ambient_dim: usize,
    domain: DomainBox,
    strata: Vec<Stratum>,
    active_dims: Vec<usize>,
}

/// Serialized form; the derived fields are recomputed on load.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StratificationDesc {
    pub ambient_dim: usize,
    pub domain: DomainBox,
    pub active_dims: Vec<usize>,
    pub strata: Vec<Stratum>,
}

impl TryFrom<StratificationDesc> for Stratification {
    type Error = Error;
    fn try_from(d: StratificationDesc) -> Result<Self> {
        let s = Stratification::new(d.ambient_dim, d.domain, d.strata)?;
        if s.active_dims != d.active_dims {
            return Err(Error::InvalidStratification(
                "active dimensions disagree with the strata".into(),
            ));
        }
        Ok(s)
    }
}

impl From<Stratification> for StratificationDesc {
    fn from(s: Stratification) -> Self {
        StratificationDesc {
            ambient_dim: s.ambient_dim,
            domain: s.domain,
            active_dims: s.active_dims,
            strata: s.strata,
        }
    }
}

impl Stratification {
    pub fn new(ambient_dim: usize, domain: DomainBox, strata: Vec<Stratum>) -> Result<Self> {
        if domain.dim() != ambient_dim {
            return Err(Error::DimensionMismatch {
                expected: ambient_dim,
                got: domain.dim(),
            });
        }
        for (i, s) in strata.iter().enumerate() {
            if s.id != i {
                return Err(Error::InvalidStratification(format!(
                    "stratum at position {i} carries id {}",
                    s.id
                )));
            }
            s.validate(ambient_dim)?;
            if s.dim > ambient_dim {
                return Err(Error::InvalidStratification(format!(
                    "stratum {i} too large"
                )));
            }
        }
        if !strata.iter().any(|s| s.dim == ambient_dim) {
            return Err(Error::InvalidStratification(
                "no full-dimensional stratum".into(),
            ));
        }
        let mut active_dims: Vec<usize> = strata.iter().map(|s| s.dim).collect();
        active_dims.sort_unstable();
        active_dims.dedup();
        Ok(Stratification {
            ambient_dim,
            domain,
            strata,
            active_dims,
        })
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn domain(&self) -> &DomainBox {
        &self.domain
    }

    pub fn strata(&self) -> &[Stratum] {
        &self.strata
    }

    pub fn len(&self) -> usize {
        self.strata.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strata.is_empty()
    }

    pub fn stratum(&self, id: usize) -> Result<&Stratum> {
        self.strata.get(id).ok_or(Error::UnknownStratum(id))
    }

    pub fn active_dims(&self) -> &[usize] {
        &self.active_dims
    }

    /// Number of active dimensions minus one.
    pub fn max_rank(&self) -> usize {
        self.active_dims.len() - 1
    }

    /// Position of the stratum's dimension among the active dimensions.
    pub fn rank(&self, id: usize) -> usize {
        let d = self.strata[id].dim;
        self.active_dims
            .iter()
            .position(|&a| a == d)
            .expect("dimension of an existing stratum is active")
    }

    pub fn ids_with_dim(&self, j: usize) -> Vec<usize> {
        self.strata
            .iter()
            .filter(|s| s.dim == j)
            .map(|s| s.id)
            .collect()
    }

    /// Distance to the skeleton of strata of dimension at most `j`; the
    /// empty skeleton (including `j < 0`) is at distance 1.
    pub fn skeleton_dist(&self, x: &Point, j: isize) -> f64 {
        if j < 0 {
            return 1.0;
        }
        dist_to_union(
            self.strata
                .iter()
                .filter(|s| s.dim as isize <= j)
                .map(|s| s.dist(x)),
        )
    }

    pub fn truncated_skeleton_dist(&self, x: &Point, j: isize) -> f64 {
        truncate(self.skeleton_dist(x, j))
    }

    /// Distance to the skeleton just below the stratum's dimension.
    pub fn lower_skeleton_dist(&self, x: &Point, id: usize) -> f64 {
        self.skeleton_dist(x, self.strata[id].dim as isize - 1)
    }

    /// The lowest-dimensional stratum containing `x`.
    pub fn locate(&self, x: &Point) -> Option<usize> {
        let mut best: Option<&Stratum> = None;
        for s in &self.strata {
            if s.contains(x) && best.is_none_or(|b| s.dim < b.dim) {
                best = Some(s);
            }
        }
        best.map(|s| s.id)
    }

    /// Argmin of the distance over full-dimensional strata, lowest id on ties.
    pub fn nearest_full_dim(&self, x: &Point) -> usize {
        let mut best = (f64::INFINITY, usize::MAX);
        for s in self.strata.iter().filter(|s| s.dim == self.ambient_dim) {
            let d = s.dist(x);
            if d < best.0 {
                best = (d, s.id);
            }
        }
        best.1
    }

    /// Grid check that every grid point of the domain lies in exactly one
    /// stratum. Returns the number of grid points checked.
    pub fn check_partition(&self, per_axis: usize) -> Result<usize> {
        let n = self.ambient_dim;
        let total = per_axis.pow(n as u32);
        for idx in 0..total {
            let mut rem = idx;
            let mut coords = Vec::with_capacity(n);
            for i in 0..n {
                let step = rem % per_axis;
                rem /= per_axis;
                let (lo, hi) = (self.domain.lo[i], self.domain.hi[i]);
                coords.push(lo + step as f64 * ((hi - lo) / (per_axis - 1) as f64));
            }
            let x = Point::new(coords)?;
            let claims: Vec<usize> = self
                .strata
                .iter()
                .filter(|s| s.contains(&x))
                .map(|s| s.id)
                .collect();
            if claims.len() != 1 {
                return Err(Error::InvalidStratification(format!(
                    "grid point {:?} lies in {} strata {:?}",
                    x.coords(),
                    claims.len(),
                    claims
                )));
            }
        }
        Ok(total)
    }

    /// Sampled frontier condition: whenever a sampled point of `Y` lies in
    /// the closure of `X`, every sample of `Y` must, and `dim Y < dim X`.
    pub fn check_frontier<R: Rng>(&self, samples: usize, rng: &mut R) -> Result<()> {
        for y in &self.strata {
            let pts: Vec<Point> = (0..samples)
                .map(|_| y.sample(rng, &self.domain.lo, &self.domain.hi))
                .collect();
            for x in &self.strata {
                if x.id == y.id {
                    continue;
                }
                let touching = pts.iter().filter(|p| x.dist(p) <= 1e-12).count();
                if touching == 0 {
                    continue;
                }
                if touching != pts.len() || y.dim >= x.dim {
                    return Err(Error::InvalidStratification(format!(
                        "frontier condition fails between strata {} and {}",
                        y.id, x.id
                    )));
                }
            }
        }
        Ok(())
    }
}
