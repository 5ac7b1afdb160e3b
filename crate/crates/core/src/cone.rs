//! Polyhedral ordering cones and the partial orders they induce.
//!
//! A cone is held in both representations: unit halfspace normals `N`
//! (`C = {v : N v >= 0}`) and unit extreme rays `G`. The rows of `N`
//! generate the dual cone, and the rows of `G` are its facet normals.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{dot, norm, orthogonal_complement, rank, Matrix};
use crate::lp::{LinearProgram, LpOutcome, Relation};

/// Absolute slack for `N v >= 0` tests on unit normals.
pub const DEFAULT_TOL: f64 = 1e-9;
/// Relative margin for interior tests: `N v > margin * |v|`.
pub const DEFAULT_MARGIN: f64 = 1e-9;
/// Largest dimension for which one representation is derived from the other.
pub const MAX_CONVERSION_DIM: usize = 4;

#[derive(Clone, Debug, PartialEq, Error)]
pub enum ConeError {
    #[error("dimension mismatch: cone has dimension {expected}, vector has {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("cone dimension must be positive")]
    ZeroDimension,
    #[error("cone is not pointed: it contains a line")]
    NotPointed,
    #[error("cone has empty interior")]
    EmptyInterior,
    #[error("generator and halfspace representations disagree: {0}")]
    Inconsistent(String),
    #[error(
        "cannot convert representations in dimension {0} (limit {MAX_CONVERSION_DIM}); supply both"
    )]
    ConversionUnsupported(usize),
    #[error("malformed cone description: {0}")]
    Malformed(String),
}

/// All `k`-subsets of `0..n` in lexicographic order.
fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::with_capacity(k), &mut out);
    out
}

fn unit_rows(rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, ConeError> {
    rows.iter()
        .map(|r| {
            let n = norm(r);
            if n == 0.0 || !n.is_finite() {
                Err(ConeError::Malformed("zero or non-finite row".into()))
            } else {
                Ok(r.iter().map(|v| v / n).collect())
            }
        })
        .collect()
}

fn dedup_rows(rows: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for r in rows {
        if !out
            .iter()
            .any(|o| o.iter().zip(&r).all(|(a, b)| (a - b).abs() < 1e-9))
        {
            out.push(r);
        }
    }
    out
}

/// Facet normals of the cone generated by `rays` (unit rows), for a
/// full-dimensional cone in `R^dim`. The same routine maps halfspace normals
/// to extreme rays, because the rays of `{v : N v >= 0}` are the facet normals
/// of the cone generated by the rows of `N`.
fn facets_of(rays: &[Vec<f64>], dim: usize) -> Result<Vec<Vec<f64>>, ConeError> {
    if dim > MAX_CONVERSION_DIM {
        return Err(ConeError::ConversionUnsupported(dim));
    }
    if rank(rays, 1e-10) < dim {
        return Err(ConeError::EmptyInterior);
    }
    if dim == 1 {
        let pos = rays.iter().any(|r| r[0] > 0.0);
        let neg = rays.iter().any(|r| r[0] < 0.0);
        return match (pos, neg) {
            (true, true) => Err(ConeError::NotPointed),
            (true, false) => Ok(vec![vec![1.0]]),
            _ => Ok(vec![vec![-1.0]]),
        };
    }
    let mut facets = Vec::new();
    for subset in combinations(rays.len(), dim - 1) {
        let chosen: Vec<Vec<f64>> = subset.iter().map(|&i| rays[i].clone()).collect();
        let normal = orthogonal_complement(&chosen);
        let len = norm(&normal);
        if len < 1e-10 {
            continue;
        }
        let normal: Vec<f64> = normal.iter().map(|v| v / len).collect();
        for sign in [1.0, -1.0] {
            if rays.iter().all(|r| sign * dot(r, &normal) >= -1e-10) {
                facets.push(normal.iter().map(|v| sign * v).collect());
            }
        }
    }
    let facets = dedup_rows(facets);
    // Both orientations of one hyperplane mean the rays span a halfspace.
    for f in &facets {
        if facets
            .iter()
            .any(|g| f.iter().zip(g).all(|(a, b)| (a + b).abs() < 1e-9))
        {
            return Err(ConeError::NotPointed);
        }
    }
    if facets.len() < dim {
        return Err(ConeError::NotPointed);
    }
    Ok(facets)
}

/// Closed pointed convex cone with nonempty interior, given by both its
/// halfspace normals and its extreme rays.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderingCone {
    dim: usize,
    normals: Matrix,
    generators: Matrix,
    tol: f64,
    margin: f64,
    interior: Vec<f64>,
    orthant: bool,
}

impl OrderingCone {
    /// The nonnegative orthant `R^m_+`.
    pub fn orthant(dim: usize) -> Result<Self, ConeError> {
        if dim == 0 {
            return Err(ConeError::ZeroDimension);
        }
        Ok(OrderingCone {
            dim,
            normals: Matrix::identity(dim),
            generators: Matrix::identity(dim),
            tol: DEFAULT_TOL,
            margin: DEFAULT_MARGIN,
            interior: vec![1.0; dim],
            orthant: true,
        })
    }

    pub fn from_normals(normals: &[Vec<f64>]) -> Result<Self, ConeError> {
        let dim = Self::common_dim(normals)?;
        let normals = unit_rows(normals)?;
        let generators = facets_of(&normals, dim).map_err(|e| match e {
            // Normals that do not span make the cone contain a line.
            ConeError::EmptyInterior => ConeError::NotPointed,
            ConeError::NotPointed => ConeError::EmptyInterior,
            other => other,
        })?;
        Self::assemble(dim, normals, generators)
    }

    pub fn from_generators(generators: &[Vec<f64>]) -> Result<Self, ConeError> {
        let dim = Self::common_dim(generators)?;
        let generators = unit_rows(generators)?;
        let normals = facets_of(&generators, dim)?;
        Self::assemble(dim, normals, generators)
    }

    /// Both representations supplied; consistency is checked by sampling.
    pub fn from_both(generators: &[Vec<f64>], normals: &[Vec<f64>]) -> Result<Self, ConeError> {
        let dim = Self::common_dim(generators)?;
        if Self::common_dim(normals)? != dim {
            return Err(ConeError::Malformed(
                "generators and normals have different dimensions".into(),
            ));
        }
        let cone = Self::assemble(dim, unit_rows(normals)?, unit_rows(generators)?)?;
        cone.check_consistency()?;
        Ok(cone)
    }

    fn common_dim(rows: &[Vec<f64>]) -> Result<usize, ConeError> {
        let dim = rows
            .first()
            .map(Vec::len)
            .ok_or_else(|| ConeError::Malformed("no rows".into()))?;
        if dim == 0 {
            return Err(ConeError::ZeroDimension);
        }
        if rows.iter().any(|r| r.len() != dim) {
            return Err(ConeError::Malformed("rows have different lengths".into()));
        }
        Ok(dim)
    }

    fn assemble(
        dim: usize,
        normals: Vec<Vec<f64>>,
        generators: Vec<Vec<f64>>,
    ) -> Result<Self, ConeError> {
        if rank(&normals, 1e-10) < dim {
            return Err(ConeError::NotPointed);
        }
        if rank(&generators, 1e-10) < dim {
            return Err(ConeError::EmptyInterior);
        }
        let mut interior = vec![0.0; dim];
        for g in &generators {
            for (w, v) in interior.iter_mut().zip(g) {
                *w += v;
            }
        }
        let len = norm(&interior);
        if len < 1e-12 {
            return Err(ConeError::NotPointed);
        }
        let interior: Vec<f64> = interior.iter().map(|v| v / len).collect();
        let orthant = dim == normals.len()
            && normals.iter().enumerate().all(|(i, r)| {
                r.iter()
                    .enumerate()
                    .all(|(j, v)| (v - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12)
            });
        let cone = OrderingCone {
            dim,
            normals: Matrix::from_rows(&normals).map_err(ConeError::Malformed)?,
            generators: Matrix::from_rows(&generators).map_err(ConeError::Malformed)?,
            tol: DEFAULT_TOL,
            margin: DEFAULT_MARGIN,
            interior,
            orthant,
        };
        if !cone.strictly_contains_unchecked(&cone.interior) {
            return Err(ConeError::EmptyInterior);
        }
        Ok(cone)
    }

    fn check_consistency(&self) -> Result<(), ConeError> {
        for g in self.generators.rows() {
            if !self.contains_unchecked(g) {
                return Err(ConeError::Inconsistent(format!(
                    "generator {g:?} violates a halfspace"
                )));
            }
        }
        // Deterministic probes: coordinate axes, sums of normal pairs and, in
        // low dimension, the rays implied by the halfspaces.
        let mut probes: Vec<Vec<f64>> = Vec::new();
        for i in 0..self.dim {
            for s in [1.0, -1.0] {
                let mut e = vec![0.0; self.dim];
                e[i] = s;
                probes.push(e);
            }
        }
        for a in self.normals.rows() {
            for b in self.normals.rows() {
                probes.push(a.iter().zip(b).map(|(x, y)| x + y).collect());
            }
        }
        if self.dim <= MAX_CONVERSION_DIM {
            // Extreme rays implied by the halfspaces.
            if let Ok(rays) = facets_of(&self.normals.to_rows(), self.dim) {
                probes.extend(rays);
            }
        }
        for v in probes.iter().filter(|v| self.contains_unchecked(v)) {
            if !self.generated_by_rays(v) {
                return Err(ConeError::Inconsistent(format!(
                    "{v:?} satisfies the halfspaces but is not a ray combination"
                )));
            }
        }
        Ok(())
    }

    /// Is `v` a nonnegative combination of the stored extreme rays?
    pub fn generated_by_rays(&self, v: &[f64]) -> bool {
        let k = self.generators.nrows();
        let mut lp = LinearProgram::new(k);
        for j in 0..self.dim {
            let coeffs: Vec<f64> = self.generators.rows().map(|g| g[j]).collect();
            lp.constrain(coeffs.clone(), Relation::Le, v[j] + 1e-9);
            lp.constrain(coeffs, Relation::Ge, v[j] - 1e-9);
        }
        matches!(lp.solve(), LpOutcome::Optimal { .. })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_orthant(&self) -> bool {
        self.orthant
    }

    pub fn normals(&self) -> &Matrix {
        &self.normals
    }

    pub fn generators(&self) -> &Matrix {
        &self.generators
    }

    pub fn interior_witness(&self) -> &[f64] {
        &self.interior
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn margin(&self) -> f64 {
        self.margin
    }

    pub fn with_tolerances(mut self, tol: f64, margin: f64) -> Self {
        self.tol = tol;
        self.margin = margin;
        self
    }

    fn check_dim(&self, v: &[f64]) -> Result<(), ConeError> {
        if v.len() != self.dim {
            return Err(ConeError::DimensionMismatch {
                expected: self.dim,
                found: v.len(),
            });
        }
        Ok(())
    }

    /// `v ∈ C`, i.e. `N v >= -tol` componentwise.
    pub fn contains(&self, v: &[f64]) -> Result<bool, ConeError> {
        self.check_dim(v)?;
        Ok(self.contains_unchecked(v))
    }

    /// `v ∈ int C`, i.e. `N v > margin * |v|` componentwise; never true at 0.
    pub fn strictly_contains(&self, v: &[f64]) -> Result<bool, ConeError> {
        self.check_dim(v)?;
        Ok(self.strictly_contains_unchecked(v))
    }

    pub(crate) fn contains_unchecked(&self, v: &[f64]) -> bool {
        self.normals.rows().all(|n| dot(n, v) >= -self.tol)
    }

    pub(crate) fn strictly_contains_unchecked(&self, v: &[f64]) -> bool {
        let bound = self.margin * norm(v);
        bound > 0.0 && self.normals.rows().all(|n| dot(n, v) > bound)
    }

    /// Membership in the dual cone `C* = {y : G y >= 0}`.
    pub fn dual_contains(&self, y: &[f64]) -> Result<bool, ConeError> {
        self.check_dim(y)?;
        Ok(self.generators.rows().all(|g| dot(g, y) >= -self.tol))
    }

    /// `x <=_C y`
    pub fn leq(&self, x: &[f64], y: &[f64]) -> Result<bool, ConeError> {
        self.check_dim(x)?;
        self.contains(&crate::linalg::sub(y, x))
    }

    /// `x <_C y`
    pub fn lt(&self, x: &[f64], y: &[f64]) -> Result<bool, ConeError> {
        self.check_dim(x)?;
        self.strictly_contains(&crate::linalg::sub(y, x))
    }

    /// A valid `e` must satisfy `e >_C 0`.
    pub fn validate_e(&self, e: &[f64]) -> bool {
        e.len() == self.dim && self.strictly_contains_unchecked(e)
    }
}
