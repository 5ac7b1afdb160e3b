use serde::{Deserialize, Serialize};

use super::{ModelError, PiecewiseVectorFn};
use crate::linalg::Matrix;

/// Jacobians closer than this (max-abs entry difference) are one vertex.
pub const VERTEX_MERGE_TOL: f64 = 1e-9;

/// Generalized Jacobian at a point: the convex hull of `vertices`, which are
/// the Jacobians of the pieces in `active` (after merging duplicates).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JacobianPolytope {
    pub point: Vec<f64>,
    pub active: Vec<usize>,
    pub vertices: Vec<Matrix>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn contains(&self, v: f64, tol: f64) -> bool {
        v >= self.lo - tol && v <= self.hi + tol
    }
}

/// Entrywise interval hull of a set of Jacobians: row `i` of any member lies
/// in `entries[i][0] x ... x entries[i][n-1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OuterBox {
    pub entries: Vec<Vec<Interval>>,
}

impl OuterBox {
    pub fn contains(&self, m: &Matrix, tol: f64) -> bool {
        m.nrows() == self.entries.len()
            && self.entries.iter().enumerate().all(|(i, row)| {
                row.len() == m.ncols()
                    && row
                        .iter()
                        .enumerate()
                        .all(|(j, iv)| iv.contains(m[(i, j)], tol))
            })
    }
}

impl JacobianPolytope {
    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertex(&self, i: usize) -> &Matrix {
        &self.vertices[i]
    }

    /// `sum_i lambda_i V_i` for barycentric `lambda`.
    pub fn combination(&self, lambda: &[f64]) -> Matrix {
        Matrix::combine(lambda, &self.vertices)
    }

    pub fn outer_box(&self) -> OuterBox {
        let first = &self.vertices[0];
        let entries = (0..first.nrows())
            .map(|i| {
                (0..first.ncols())
                    .map(|j| {
                        let (lo, hi) = self
                            .vertices
                            .iter()
                            .map(|v| v[(i, j)])
                            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                                (lo.min(v), hi.max(v))
                            });
                        Interval { lo, hi }
                    })
                    .collect()
            })
            .collect();
        OuterBox { entries }
    }
}

impl PiecewiseVectorFn {
    /// Convex hull of the Jacobians of the pieces active at `x`, where a
    /// region counts as active when it holds up to `tol_active`.
    pub fn clarke_jacobian(
        &self,
        x: &[f64],
        tol_active: f64,
    ) -> Result<JacobianPolytope, ModelError> {
        // Evaluating first rejects points outside every region and
        // inconsistent overlaps.
        self.eval(x)?;
        let active = self.active_pieces(x, tol_active)?;
        let mut vertices: Vec<Matrix> = Vec::with_capacity(active.len());
        for &p in &active {
            let jac = self.pieces()[p].jacobian_at(x)?;
            if !vertices
                .iter()
                .any(|v| v.max_abs_diff(&jac) <= VERTEX_MERGE_TOL)
            {
                vertices.push(jac);
            }
        }
        Ok(JacobianPolytope {
            point: x.to_vec(),
            active,
            vertices,
        })
    }

    /// Interval hull of the generalized Jacobian, one interval per entry.
    pub fn cartesian_outer_box(&self, x: &[f64], tol_active: f64) -> Result<OuterBox, ModelError> {
        Ok(self.clarke_jacobian(x, tol_active)?.outer_box())
    }
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::*;
    use super::super::DEFAULT_TOL_ACTIVE;
    use super::*;

    fn rows(m: &Matrix) -> Vec<Vec<f64>> {
        m.to_rows()
    }

    #[test]
    fn kink_has_two_vertices() {
        let f = kinked_cubic();
        let jac = f.clarke_jacobian(&[0.0], DEFAULT_TOL_ACTIVE).unwrap();
        assert_eq!(jac.active, vec![0, 1]);
        assert_eq!(rows(jac.vertex(0)), vec![vec![5.0], vec![-2.0]]);
        assert_eq!(rows(jac.vertex(1)), vec![vec![6.0], vec![-3.0]]);
        let outer = jac.outer_box();
        assert_eq!(outer.entries[0][0], Interval { lo: 5.0, hi: 6.0 });
        assert_eq!(outer.entries[1][0], Interval { lo: -3.0, hi: -2.0 });
    }

    #[test]
    fn smooth_point_has_one_vertex() {
        let f = kinked_cubic();
        let jac = f.clarke_jacobian(&[0.5], DEFAULT_TOL_ACTIVE).unwrap();
        assert_eq!(jac.num_vertices(), 1);
        // d/dx (-x^3 - x^2 + 5x) at 0.5 and d/dx (x^2 - 2x)
        assert_eq!(
            rows(jac.vertex(0)),
            vec![vec![-0.75 - 1.0 + 5.0], vec![-1.0]]
        );
    }

    #[test]
    fn near_boundary_within_tolerance_is_a_kink() {
        let f = kinked_cubic();
        assert_eq!(
            f.clarke_jacobian(&[5e-8], DEFAULT_TOL_ACTIVE)
                .unwrap()
                .num_vertices(),
            2
        );
        assert_eq!(
            f.clarke_jacobian(&[1e-6], DEFAULT_TOL_ACTIVE)
                .unwrap()
                .num_vertices(),
            1
        );
    }

    #[test]
    fn duplicate_jacobians_merge() {
        let f = concave_kink();
        let jac = f.clarke_jacobian(&[0.0], DEFAULT_TOL_ACTIVE).unwrap();
        assert_eq!(jac.active.len(), 2);
        // (1, 4) and (1, 2) differ, so both remain.
        assert_eq!(jac.num_vertices(), 2);
        let g = PiecewiseVectorFn::from_sources(
            1,
            1,
            super::super::DomainBox::cube(1, 1.0).unwrap(),
            &[piece("x1 >= 0", &["2*x1"]), piece("x1 <= 0", &["x1 + x1"])],
        )
        .unwrap();
        assert_eq!(
            g.clarke_jacobian(&[0.0], DEFAULT_TOL_ACTIVE)
                .unwrap()
                .num_vertices(),
            1
        );
    }

    #[test]
    fn combination_and_box_membership() {
        let jac = kinked_cubic()
            .clarke_jacobian(&[0.0], DEFAULT_TOL_ACTIVE)
            .unwrap();
        let mid = jac.combination(&[0.5, 0.5]);
        assert_eq!(rows(&mid), vec![vec![5.5], vec![-2.5]]);
        assert!(jac.outer_box().contains(&mid, 0.0));
        let outside = Matrix::from_rows(&[vec![7.0], vec![-2.5]]).unwrap();
        assert!(!jac.outer_box().contains(&outside, 1e-9));
    }
}
