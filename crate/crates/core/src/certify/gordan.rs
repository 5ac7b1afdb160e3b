//! Gordan's alternative and the vector criticality test, both as small LPs.

use serde::{Deserialize, Serialize};

use super::{CertifyError, CheckContext, CriticalMultiplier, SampleStats, Verdict, Witness};
use crate::cone::OrderingCone;
use crate::linalg::{dot, norm, Matrix};
use crate::lp::{LinearProgram, LpOutcome, Relation};

/// Absolute tolerance on `A^T y = 0`, scaled by the largest entry of `A`.
const NULL_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "alternative")]
pub enum GordanOutcome {
    /// `A x <_C 0`
    #[serde(rename = "1")]
    Direction { x: Vec<f64> },
    /// `A^T y = 0` with `y` in the dual cone, `y != 0`.
    #[serde(rename = "2")]
    Multiplier { y: Vec<f64> },
}

fn scale_of(a: &Matrix) -> f64 {
    a.max_abs().max(1.0)
}

/// `B = N A`: the cone inequalities expressed in `x`.
fn cone_rows(a: &Matrix, cone: &OrderingCone) -> Matrix {
    cone.normals().mul(a)
}

/// Maximize `t` with `B x + t <= 0`, `|x_j| <= 1`, `t <= 1`.
fn direction_lp(b: &Matrix) -> Option<(Vec<f64>, f64)> {
    let n = b.ncols();
    let mut lp = LinearProgram::new(n + 1);
    for j in 0..=n {
        lp.set_free(j);
    }
    let mut obj = vec![0.0; n + 1];
    obj[n] = 1.0;
    lp.maximize(obj);
    for row in b.rows() {
        let mut c = row.to_vec();
        c.push(1.0);
        lp.constrain(c, Relation::Le, 0.0);
    }
    for j in 0..n {
        let mut c = vec![0.0; n + 1];
        c[j] = 1.0;
        lp.constrain(c.clone(), Relation::Le, 1.0);
        lp.constrain(c, Relation::Ge, -1.0);
    }
    let mut c = vec![0.0; n + 1];
    c[n] = 1.0;
    lp.constrain(c, Relation::Le, 1.0);
    match lp.solve() {
        LpOutcome::Optimal { mut x, value } => {
            x.truncate(n);
            Some((x, value))
        }
        _ => None,
    }
}

/// Minimize `|B^T w|_1` over the simplex `w >= 0, sum w = 1`.
fn multiplier_lp(b: &Matrix) -> Option<(Vec<f64>, f64)> {
    let (p, n) = (b.nrows(), b.ncols());
    // variables: w (p), s+ (n), s- (n)
    let total = p + 2 * n;
    let mut lp = LinearProgram::new(total);
    let mut obj = vec![0.0; total];
    for v in &mut obj[p..] {
        *v = -1.0;
    }
    lp.maximize(obj);
    for j in 0..n {
        let mut c = vec![0.0; total];
        for i in 0..p {
            c[i] = b[(i, j)];
        }
        c[p + j] = -1.0;
        c[p + n + j] = 1.0;
        lp.constrain(c, Relation::Eq, 0.0);
    }
    let mut c = vec![0.0; total];
    for v in &mut c[..p] {
        *v = 1.0;
    }
    lp.constrain(c, Relation::Eq, 1.0);
    match lp.solve() {
        LpOutcome::Optimal { mut x, value } => {
            x.truncate(p);
            Some((x, -value))
        }
        _ => None,
    }
}

/// Exactly one of `A x <_C 0` and `A^T y = 0, y >=_{C*} 0, y != 0` is
/// solvable. Returns the solvable branch with a verified certificate, or
/// `Degenerate` when the LPs do not separate the cases clearly.
pub fn gordan_alternative(a: &Matrix, cone: &OrderingCone) -> Result<GordanOutcome, CertifyError> {
    if a.nrows() != cone.dim() {
        return Err(CertifyError::DimensionMismatch(format!(
            "matrix has {} rows but the cone has dimension {}",
            a.nrows(),
            cone.dim()
        )));
    }
    if a.max_abs().is_nan() || !a.max_abs().is_finite() {
        return Err(CertifyError::Degenerate(
            "matrix has non-finite entries".into(),
        ));
    }
    let tau = NULL_TOL * scale_of(a);
    let b = cone_rows(a, cone);

    let direction = direction_lp(&b).and_then(|(x, t)| {
        let ax: Vec<f64> = a.mul_vec(&x).iter().map(|v| -v).collect();
        (t > tau && cone.strictly_contains_unchecked(&ax)).then_some(x)
    });
    let multiplier = multiplier_lp(&b).and_then(|(w, residual)| {
        let y = cone.normals().transpose().mul_vec(&w);
        let aty = a.transpose().mul_vec(&y);
        let ok = residual <= tau
            && norm(&y) > 0.0
            && cone.generators().rows().all(|g| dot(g, &y) >= -cone.tol())
            && norm(&aty) <= tau;
        ok.then_some(y)
    });
    match (direction, multiplier) {
        (Some(x), None) => Ok(GordanOutcome::Direction { x }),
        (None, Some(y)) => Ok(GordanOutcome::Multiplier { y }),
        (Some(_), Some(_)) => Err(CertifyError::Degenerate(
            "both alternatives verified within tolerance".into(),
        )),
        (None, None) => Err(CertifyError::Degenerate(
            "neither alternative verified within tolerance".into(),
        )),
    }
}

/// `mu` strictly inside `C` with `mu^T A = 0`, normalized by `1^T N mu = 1`.
fn critical_multiplier(a: &Matrix, cone: &OrderingCone) -> Option<Vec<f64>> {
    let (m, n) = (a.nrows(), a.ncols());
    let normals = cone.normals();
    let mut lp = LinearProgram::new(m + 1);
    for j in 0..=m {
        lp.set_free(j);
    }
    let mut obj = vec![0.0; m + 1];
    obj[m] = 1.0;
    lp.maximize(obj);
    for j in 0..n {
        let mut c: Vec<f64> = (0..m).map(|i| a[(i, j)]).collect();
        c.push(0.0);
        lp.constrain(c, Relation::Eq, 0.0);
    }
    let mut total = vec![0.0; m + 1];
    for row in normals.rows() {
        let mut c = row.to_vec();
        c.push(-1.0);
        lp.constrain(c, Relation::Ge, 0.0);
        for (t, v) in total.iter_mut().zip(row) {
            *t += v;
        }
    }
    lp.constrain(total, Relation::Eq, 1.0);
    let LpOutcome::Optimal { mut x, value } = lp.solve() else {
        return None;
    };
    x.truncate(m);
    let residual = norm(&a.transpose().mul_vec(&x));
    (value > 0.0 && residual <= NULL_TOL * scale_of(a) && cone.strictly_contains_unchecked(&x))
        .then_some(x)
}

/// A direction `d` with `-A d` in the dual cone and nonzero, which rules out
/// a strictly positive multiplier for `A`.
fn separating_direction(a: &Matrix, cone: &OrderingCone) -> Option<Vec<f64>> {
    let n = a.ncols();
    // G (-A d) >= t, 1^T G (-A d) = 1, maximize t
    let ga = cone.generators().mul(a).scaled(-1.0);
    let mut lp = LinearProgram::new(n + 1);
    for j in 0..=n {
        lp.set_free(j);
    }
    let mut obj = vec![0.0; n + 1];
    obj[n] = 1.0;
    lp.maximize(obj);
    let mut total = vec![0.0; n + 1];
    for row in ga.rows() {
        let mut c = row.to_vec();
        c.push(-1.0);
        lp.constrain(c, Relation::Ge, 0.0);
        for (t, v) in total.iter_mut().zip(row) {
            *t += v;
        }
    }
    lp.constrain(total, Relation::Eq, 1.0);
    let mut cap = vec![0.0; n + 1];
    cap[n] = 1.0;
    lp.constrain(cap, Relation::Le, 1.0);
    let LpOutcome::Optimal { mut x, .. } = lp.solve() else {
        return None;
    };
    x.truncate(n);
    verify_separation(a, cone, &x).then_some(x)
}

fn verify_separation(a: &Matrix, cone: &OrderingCone, d: &[f64]) -> bool {
    let w: Vec<f64> = a.mul_vec(d).iter().map(|v| -v).collect();
    norm(&w) > NULL_TOL && cone.generators().rows().all(|g| dot(g, &w) >= -cone.tol())
}

pub(crate) fn check_vector_critical(
    ctx: &CheckContext<'_>,
    xi: &[f64],
) -> Result<Verdict, CertifyError> {
    ctx.check_point(xi)?;
    let vertices = ctx.vertices(xi)?;
    let grid = ctx.hull_grid(&vertices);
    let mut directions = Vec::with_capacity(grid.len());
    for (lambda, a) in &grid {
        if let Some(mu) = critical_multiplier(a, ctx.cone) {
            return Ok(Verdict::CertifiedUpToSampling {
                reason: format!("mu = {mu:?} solves mu^T A = 0 at lambda = {lambda:?}"),
                stats: SampleStats {
                    samples: directions.len() + 1,
                    skipped_zero_eta: 0,
                    premise_hits: None,
                    seed: ctx.plan.seed,
                    stream: "simplex-grid".into(),
                    center: Some(xi.to_vec()),
                    radius: None,
                    search_box: None,
                    grid_depth: ctx.plan.simplex_grid_depth,
                    tolerances: ctx.plan.tolerances.clone(),
                },
                multiplier: Some(CriticalMultiplier {
                    lambda: lambda.clone(),
                    jacobian: a.clone(),
                    mu,
                }),
            });
        }
        match separating_direction(a, ctx.cone) {
            Some(d) => directions.push(d),
            None => {
                return Err(CertifyError::Degenerate(format!(
                    "no multiplier and no separating direction at lambda = {lambda:?}"
                )))
            }
        }
    }
    Ok(Verdict::Refuted {
        reason: format!(
            "no strictly positive multiplier on {} hull points; one separating direction each",
            grid.len()
        ),
        witness: Witness {
            x: xi.to_vec(),
            y: None,
            lambda: None,
            vertex: None,
            vectors: directions,
            detail: "row i is d with -A(lambda_i) d in the dual cone, nonzero".into(),
        },
    })
}

pub(crate) fn replay_noncritical(
    ctx: &CheckContext<'_>,
    xi: &[f64],
    witness: &Witness,
) -> Result<bool, CertifyError> {
    let vertices = ctx.vertices(xi)?;
    let grid = ctx.hull_grid(&vertices);
    Ok(grid.len() == witness.vectors.len()
        && grid
            .iter()
            .zip(&witness.vectors)
            .all(|((_, a), d)| verify_separation(a, ctx.cone, d)))
}
