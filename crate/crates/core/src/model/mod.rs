//! Piecewise-smooth vector functions and their generalized Jacobians.

mod jacobian;
mod kernel;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{self, Context, EvalError, Expr, ParseError, Predicate};
use crate::linalg::{norm, sub, Matrix};
use crate::sampling::{sample_ball_pairs, sample_box};

pub use jacobian::{Interval, JacobianPolytope, OuterBox, VERTEX_MERGE_TOL};
pub use kernel::{Kernel, KernelFlags, KernelKind};

/// The open domain is represented by the closed box shrunk by this amount.
pub const DOMAIN_INSET: f64 = 1e-9;
/// Default inflation of region predicates when collecting active pieces.
pub const DEFAULT_TOL_ACTIVE: f64 = 1e-7;
/// Largest disagreement tolerated between simultaneously active pieces.
pub const CONTINUITY_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Error)]
pub enum ModelError {
    #[error("point {0:?} is outside the open domain")]
    OutOfDomain(Vec<f64>),
    #[error("no piece is active at {0:?}")]
    NoActivePiece(Vec<f64>),
    #[error("pieces {pieces:?} disagree by {gap:e} at {point:?}")]
    InconsistentPieces {
        point: Vec<f64>,
        pieces: (usize, usize),
        gap: f64,
    },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("{location}: {source}")]
    Parse {
        location: String,
        #[source]
        source: ParseError,
    },
    #[error("piece {0}, component {1} is not smooth")]
    NonSmooth(usize, usize),
    #[error("function needs at least one piece")]
    NoPieces,
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Axis-aligned box; the open set used for sampling is the box shrunk by
/// [`DOMAIN_INSET`]. Serialized as a list of `[lower, upper]` intervals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "Vec<[f64; 2]>", try_from = "Vec<[f64; 2]>")]
pub struct DomainBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl DomainBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, ModelError> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(ModelError::InvalidDomain(
                "bounds must be non-empty and of equal length".into(),
            ));
        }
        for (l, u) in lower.iter().zip(&upper) {
            if !(l.is_finite() && u.is_finite() && u - l > 2.0 * DOMAIN_INSET) {
                return Err(ModelError::InvalidDomain(format!(
                    "bad interval [{l}, {u}]"
                )));
            }
        }
        Ok(DomainBox { lower, upper })
    }

    pub fn cube(dim: usize, half_width: f64) -> Result<Self, ModelError> {
        DomainBox::new(vec![-half_width; dim], vec![half_width; dim])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn inner_lower(&self) -> Vec<f64> {
        self.lower.iter().map(|l| l + DOMAIN_INSET).collect()
    }

    pub fn inner_upper(&self) -> Vec<f64> {
        self.upper.iter().map(|u| u - DOMAIN_INSET).collect()
    }

    pub fn contains_open(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (l, u))| *v >= l + DOMAIN_INSET && *v <= u - DOMAIN_INSET)
    }

    /// Does the closed ball `B(center, radius)` fit in the open domain?
    pub fn contains_ball(&self, center: &[f64], radius: f64) -> bool {
        self.contains_open(center)
            && center
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(c, (l, u))| c - radius >= l + DOMAIN_INSET && c + radius <= u - DOMAIN_INSET)
    }
}

impl From<DomainBox> for Vec<[f64; 2]> {
    fn from(b: DomainBox) -> Self {
        b.lower
            .iter()
            .zip(&b.upper)
            .map(|(l, u)| [*l, *u])
            .collect()
    }
}

impl TryFrom<Vec<[f64; 2]>> for DomainBox {
    type Error = String;
    fn try_from(v: Vec<[f64; 2]>) -> Result<Self, String> {
        DomainBox::new(
            v.iter().map(|p| p[0]).collect(),
            v.iter().map(|p| p[1]).collect(),
        )
        .map_err(|e| e.to_string())
    }
}

/// One smooth selection and the region where it applies.
#[derive(Clone, Debug, PartialEq)]
pub struct Piece {
    region: Predicate,
    components: Vec<Expr>,
    /// `m x n` symbolic partial derivatives.
    jacobian: Vec<Vec<Expr>>,
}

impl Piece {
    pub fn new(region: Predicate, components: Vec<Expr>, n: usize) -> Result<Self, ModelError> {
        let mut jacobian = Vec::with_capacity(components.len());
        for (i, c) in components.iter().enumerate() {
            let row = (0..n)
                .map(|j| c.differentiate(j))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|_| ModelError::NonSmooth(0, i))?;
            jacobian.push(row);
        }
        Ok(Piece {
            region,
            components,
            jacobian,
        })
    }

    pub fn region(&self) -> &Predicate {
        &self.region
    }

    pub fn components(&self) -> &[Expr] {
        &self.components
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>, EvalError> {
        self.components.iter().map(|c| c.eval(x)).collect()
    }

    pub fn jacobian_at(&self, x: &[f64]) -> Result<Matrix, EvalError> {
        let rows = self
            .jacobian
            .iter()
            .map(|row| row.iter().map(|d| d.eval(x)).collect())
            .collect::<Result<Vec<Vec<f64>>, _>>()?;
        Ok(Matrix::from_rows(&rows).expect("jacobian rows have equal length"))
    }

    fn negated(&self) -> Piece {
        Piece {
            region: self.region.clone(),
            components: self.components.iter().map(Expr::negated).collect(),
            jacobian: self
                .jacobian
                .iter()
                .map(|row| row.iter().map(Expr::negated).collect())
                .collect(),
        }
    }
}

/// `f: X -> R^m` given by smooth pieces over an ordered list of regions.
#[derive(Clone, Debug, PartialEq)]
pub struct PiecewiseVectorFn {
    n: usize,
    m: usize,
    domain: DomainBox,
    pieces: Vec<Piece>,
}

/// A piece as text: region predicate and one expression per output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PieceSource {
    pub region: String,
    pub components: Vec<String>,
}

impl PiecewiseVectorFn {
    pub fn new(
        n: usize,
        m: usize,
        domain: DomainBox,
        pieces: Vec<Piece>,
    ) -> Result<Self, ModelError> {
        if pieces.is_empty() {
            return Err(ModelError::NoPieces);
        }
        if domain.dim() != n {
            return Err(ModelError::DimensionMismatch {
                expected: n,
                found: domain.dim(),
            });
        }
        for (p, piece) in pieces.iter().enumerate() {
            if piece.components.len() != m {
                return Err(ModelError::DimensionMismatch {
                    expected: m,
                    found: piece.components.len(),
                });
            }
            if let Some(i) = piece.components.iter().position(|c| !c.is_smooth()) {
                return Err(ModelError::NonSmooth(p, i));
            }
        }
        Ok(PiecewiseVectorFn {
            n,
            m,
            domain,
            pieces,
        })
    }

    /// Parse pieces from text.
    pub fn from_sources(
        n: usize,
        m: usize,
        domain: DomainBox,
        sources: &[PieceSource],
    ) -> Result<Self, ModelError> {
        let mut pieces = Vec::with_capacity(sources.len());
        for (p, src) in sources.iter().enumerate() {
            let region = expr::parse_predicate(&src.region, n).map_err(|e| ModelError::Parse {
                location: format!("pieces[{p}].region"),
                source: e,
            })?;
            if src.components.len() != m {
                return Err(ModelError::DimensionMismatch {
                    expected: m,
                    found: src.components.len(),
                });
            }
            let components = src
                .components
                .iter()
                .enumerate()
                .map(|(i, text)| {
                    expr::parse(text, n, Context::Function).map_err(|e| ModelError::Parse {
                        location: format!("pieces[{p}].components[{i}]"),
                        source: e,
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            let piece = Piece::new(region, components, n).map_err(|e| match e {
                ModelError::NonSmooth(_, i) => ModelError::NonSmooth(p, i),
                other => other,
            })?;
            pieces.push(piece);
        }
        PiecewiseVectorFn::new(n, m, domain, pieces)
    }

    pub fn input_dim(&self) -> usize {
        self.n
    }

    pub fn output_dim(&self) -> usize {
        self.m
    }

    pub fn domain(&self) -> &DomainBox {
        &self.domain
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    fn check_point(&self, x: &[f64]) -> Result<(), ModelError> {
        if x.len() != self.n {
            return Err(ModelError::DimensionMismatch {
                expected: self.n,
                found: x.len(),
            });
        }
        if !self.domain.contains_open(x) {
            return Err(ModelError::OutOfDomain(x.to_vec()));
        }
        Ok(())
    }

    /// Pieces whose region, inflated by `slack`, contains `x`.
    pub fn active_pieces(&self, x: &[f64], slack: f64) -> Result<Vec<usize>, ModelError> {
        self.check_point(x)?;
        let mut active = Vec::new();
        for (i, p) in self.pieces.iter().enumerate() {
            if p.region.holds(x, slack)? {
                active.push(i);
            }
        }
        Ok(active)
    }

    /// `f(x)`: the first active piece's value, after checking that every
    /// other active piece agrees with it.
    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>, ModelError> {
        let mut active = self.active_pieces(x, 0.0)?;
        if active.is_empty() {
            active = self.active_pieces(x, DEFAULT_TOL_ACTIVE)?;
        }
        let (&first, rest) = active
            .split_first()
            .ok_or_else(|| ModelError::NoActivePiece(x.to_vec()))?;
        let value = self.pieces[first].eval(x)?;
        for &other in rest {
            let v = self.pieces[other].eval(x)?;
            let gap = norm(&sub(&v, &value));
            if gap > CONTINUITY_TOL * (1.0 + norm(&value)) {
                return Err(ModelError::InconsistentPieces {
                    point: x.to_vec(),
                    pieces: (first, other),
                    gap,
                });
            }
        }
        Ok(value)
    }

    /// The function with every component negated, over the same regions.
    pub fn negated(&self) -> PiecewiseVectorFn {
        PiecewiseVectorFn {
            n: self.n,
            m: self.m,
            domain: self.domain.clone(),
            pieces: self.pieces.iter().map(Piece::negated).collect(),
        }
    }

    /// Largest sampled difference quotient `|f(x) - f(y)| / |x - y|` over
    /// pairs from `B(center, radius)`.
    pub fn lipschitz_estimate(
        &self,
        center: &[f64],
        radius: f64,
        samples: usize,
        seed: u64,
    ) -> Result<LipschitzEstimate, ModelError> {
        self.check_point(center)?;
        if !self.domain.contains_ball(center, radius) {
            return Err(ModelError::OutOfDomain(center.to_vec()));
        }
        let pairs = sample_ball_pairs(center, radius, &self.domain, samples, seed);
        let mut constant: f64 = 0.0;
        for (x, y) in &pairs {
            let dx = norm(&sub(x, y));
            if dx < 1e-12 {
                continue;
            }
            let df = norm(&sub(&self.eval(x)?, &self.eval(y)?));
            constant = constant.max(df / dx);
        }
        Ok(LipschitzEstimate {
            center: center.to_vec(),
            radius,
            constant,
            samples: pairs.len(),
        })
    }

    /// Sampled checks of region coverage and continuity across boundaries.
    pub fn validate(&self, samples: usize, seed: u64) -> ValidationReport {
        let mut report = ValidationReport::default();
        let points = sample_box(&self.domain, samples, seed);
        for x in &points {
            match self.active_pieces(x, DEFAULT_TOL_ACTIVE) {
                Ok(a) if a.is_empty() => report.uncovered.push(x.clone()),
                Ok(_) => {
                    if let Err(e) = self.eval(x) {
                        report.failures.push(e.to_string());
                    }
                }
                Err(e) => report.failures.push(e.to_string()),
            }
        }
        // Boundary straddling: bisect consecutive sample pairs whose first
        // active piece differs, then compare the two pieces at the switch.
        for w in points.windows(2) {
            if let Err(e) = self.check_switch(&w[0], &w[1]) {
                report.failures.push(e.to_string());
            }
        }
        report.samples = points.len();
        report
    }

    fn first_active(&self, x: &[f64]) -> Result<Option<usize>, ModelError> {
        Ok(self.active_pieces(x, 0.0)?.first().copied())
    }

    fn check_switch(&self, a: &[f64], b: &[f64]) -> Result<(), ModelError> {
        let (Some(pa), Some(pb)) = (self.first_active(a)?, self.first_active(b)?) else {
            return Ok(());
        };
        if pa == pb {
            return Ok(());
        }
        let (mut lo, mut hi) = (0.0, 1.0);
        let at = |t: f64| -> Vec<f64> { a.iter().zip(b).map(|(p, q)| p + t * (q - p)).collect() };
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if self.first_active(&at(mid))? == Some(pa) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let z_lo = at(lo);
        let z_hi = at(hi);
        let Some(q) = self.first_active(&z_hi)? else {
            return Ok(());
        };
        let gap = norm(&sub(
            &self.pieces[pa].eval(&z_lo)?,
            &self.pieces[q].eval(&z_hi)?,
        ));
        let scale = 1.0 + norm(&self.pieces[pa].eval(&z_lo)?);
        if gap > CONTINUITY_TOL * scale {
            return Err(ModelError::InconsistentPieces {
                point: z_lo,
                pieces: (pa, q),
                gap,
            });
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub samples: usize,
    pub uncovered: Vec<Vec<f64>>,
    pub failures: Vec<String>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.uncovered.is_empty() && self.failures.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LipschitzEstimate {
    pub center: Vec<f64>,
    pub radius: f64,
    pub constant: f64,
    pub samples: usize,
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    pub fn piece(region: &str, comps: &[&str]) -> PieceSource {
        PieceSource {
            region: region.into(),
            components: comps.iter().map(|s| s.to_string()).collect(),
        }
    }

    /// The two-objective cubic/quadratic function with a kink at 0.
    pub fn kinked_cubic() -> PiecewiseVectorFn {
        PiecewiseVectorFn::from_sources(
            1,
            2,
            DomainBox::cube(1, 1.0).unwrap(),
            &[
                piece("x1 >= 0", &["-x1^3 - x1^2 + 5*x1", "x1^2 - 2*x1"]),
                piece("x1 <= 0", &["x1^3 + 6*x1", "-x1^2 - 3*x1"]),
            ],
        )
        .unwrap()
    }

    /// `(x, phi(x))` with `phi = 4x - x^2` right of 0 and `2x` left of it.
    pub fn concave_kink() -> PiecewiseVectorFn {
        PiecewiseVectorFn::from_sources(
            1,
            2,
            DomainBox::cube(1, 1.0).unwrap(),
            &[
                piece("x1 >= 0", &["x1", "4*x1 - x1^2"]),
                piece("x1 <= 0", &["x1", "2*x1"]),
            ],
        )
        .unwrap()
    }

    pub fn linear(comps: &[&str]) -> PiecewiseVectorFn {
        PiecewiseVectorFn::from_sources(
            1,
            comps.len(),
            DomainBox::cube(1, 1.0).unwrap(),
            &[piece("true", comps)],
        )
        .unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    #[test]
    fn evaluates_fixtures() {
        let f = kinked_cubic();
        assert_eq!(f.eval(&[1.0 - 2e-9]).unwrap().len(), 2);
        let v = f.eval(&[0.5]).unwrap();
        assert!((v[0] - (-0.125 - 0.25 + 2.5)).abs() < 1e-15);
        assert_eq!(f.eval(&[0.0]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(concave_kink().eval(&[-0.5]).unwrap(), vec![-0.5, -1.0]);
    }

    #[test]
    fn domain_errors() {
        let f = kinked_cubic();
        assert_eq!(f.eval(&[1.0]), Err(ModelError::OutOfDomain(vec![1.0])));
        assert!(matches!(
            f.eval(&[0.0, 0.0]),
            Err(ModelError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn coverage_gap_is_reported() {
        let f = PiecewiseVectorFn::from_sources(
            1,
            1,
            DomainBox::cube(1, 1.0).unwrap(),
            &[piece("x1 >= 0.5", &["x1"]), piece("x1 <= 0", &["x1"])],
        )
        .unwrap();
        assert_eq!(f.eval(&[0.25]), Err(ModelError::NoActivePiece(vec![0.25])));
        let report = f.validate(200, 1);
        assert!(!report.uncovered.is_empty());
    }

    #[test]
    fn inconsistent_overlap_is_reported() {
        let f = PiecewiseVectorFn::from_sources(
            1,
            1,
            DomainBox::cube(1, 1.0).unwrap(),
            &[
                piece("x1 >= -0.5", &["x1"]),
                piece("x1 <= 0.5", &["x1 + 1"]),
            ],
        )
        .unwrap();
        assert!(matches!(
            f.eval(&[0.0]),
            Err(ModelError::InconsistentPieces { .. })
        ));
        assert!(!f.validate(100, 1).is_clean());
    }

    #[test]
    fn jump_is_found_by_bisection() {
        let f = PiecewiseVectorFn::from_sources(
            1,
            1,
            DomainBox::cube(1, 1.0).unwrap(),
            &[
                piece("x1 > 0.3", &["x1 + 0.1"]),
                piece("x1 <= 0.3", &["x1"]),
            ],
        )
        .unwrap();
        let report = f.validate(100, 1);
        assert!(report.uncovered.is_empty());
        assert!(!report.failures.is_empty());
        assert!(kinked_cubic().validate(500, 1).is_clean());
    }

    #[test]
    fn rejects_non_smooth_components_and_bad_dims() {
        let err = PiecewiseVectorFn::from_sources(
            1,
            1,
            DomainBox::cube(1, 1.0).unwrap(),
            &[piece("true", &["abs(x1)"])],
        )
        .unwrap_err();
        assert!(matches!(err, ModelError::Parse { .. }));
        assert_eq!(
            PiecewiseVectorFn::from_sources(
                1,
                2,
                DomainBox::cube(1, 1.0).unwrap(),
                &[piece("true", &["x1"])]
            ),
            Err(ModelError::DimensionMismatch {
                expected: 2,
                found: 1
            })
        );
        assert_eq!(
            PiecewiseVectorFn::from_sources(1, 1, DomainBox::cube(1, 1.0).unwrap(), &[]),
            Err(ModelError::NoPieces)
        );
    }

    #[test]
    fn lipschitz_of_simple_maps() {
        let c = linear(&["3"]);
        assert_eq!(
            c.lipschitz_estimate(&[0.0], 0.5, 200, 1).unwrap().constant,
            0.0
        );
        let l = linear(&["2*x1"]);
        let k = l.lipschitz_estimate(&[0.0], 0.5, 200, 1).unwrap().constant;
        assert!((k - 2.0).abs() < 1e-9);
    }

    #[test]
    fn lipschitz_of_kinked_cubic() {
        // sup of |f'| over [-0.5, 0.5] is attained at -0.5:
        // |(3/4 + 6, -2)| = sqrt(49.5625).
        let bound = 49.5625f64.sqrt();
        let est = kinked_cubic()
            .lipschitz_estimate(&[0.0], 0.5, 10_000, 42)
            .unwrap();
        assert!(
            est.constant >= 5.0 && est.constant <= bound + 1e-9,
            "{est:?}"
        );
        let small = kinked_cubic()
            .lipschitz_estimate(&[0.0], 0.5, 1_000, 42)
            .unwrap();
        assert!(small.constant <= est.constant);
    }

    #[test]
    fn negation_flips_values_and_keeps_regions() {
        let f = kinked_cubic();
        let g = f.negated();
        for x in [-0.7, -0.1, 0.0, 0.3, 0.9] {
            let a = f.eval(&[x]).unwrap();
            let b = g.eval(&[x]).unwrap();
            assert_eq!(a[0], -b[0]);
            assert_eq!(a[1], -b[1]);
        }
    }

    #[test]
    fn domain_serializes_as_intervals() {
        let d = DomainBox::new(vec![-1.0, 0.0], vec![1.0, 2.0]).unwrap();
        assert_eq!(serde_json::to_string(&d).unwrap(), "[[-1.0,1.0],[0.0,2.0]]");
        assert!(serde_json::from_str::<DomainBox>("[[1.0,-1.0]]").is_err());
    }
}
