//! Semi-decision checkers. Each check either finds a violation (with a
//! replayable witness) or certifies the property over the plan's samples.

mod checks;
mod gordan;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cone::{ConeError, OrderingCone};
use crate::expr::EvalError;
use crate::linalg::Matrix;
use crate::model::{DomainBox, Kernel, ModelError, PiecewiseVectorFn};
use crate::sampling::{simplex_grid, SamplingPlan, ToleranceProfile};

pub use checks::{efficiency_at, invex_pair_at, invex_pairs, vvi_at, PointOutcome};
pub use gordan::{gordan_alternative, GordanOutcome};

#[derive(Clone, Debug, PartialEq, Error)]
pub enum CertifyError {
    #[error("e = {0:?} is not strictly positive with respect to the cone")]
    InvalidE(Vec<f64>),
    #[error("out of domain: {0}")]
    OutOfDomain(String),
    #[error("numerically degenerate: {0}")]
    Degenerate(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid sampling plan: {0}")]
    Plan(String),
    #[error(transparent)]
    Model(ModelError),
    #[error(transparent)]
    Cone(#[from] ConeError),
}

impl From<ModelError> for CertifyError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::OutOfDomain(p) => CertifyError::OutOfDomain(format!("{p:?}")),
            other => CertifyError::Model(other),
        }
    }
}

impl From<EvalError> for CertifyError {
    fn from(e: EvalError) -> Self {
        CertifyError::Model(ModelError::Eval(e))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VviVariant {
    Svvi,
    Mvvi,
    Wsvvi,
    Wmvvi,
}

impl VviVariant {
    pub const ALL: [VviVariant; 4] = [Self::Svvi, Self::Mvvi, Self::Wsvvi, Self::Wmvvi];

    /// Stampacchia forms take the Jacobian at the base point.
    pub fn at_base_point(self) -> bool {
        matches!(self, Self::Svvi | Self::Wsvvi)
    }

    pub fn is_weak(self) -> bool {
        matches!(self, Self::Wsvvi | Self::Wmvvi)
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Svvi => "svvi",
            Self::Mvvi => "mvvi",
            Self::Wsvvi => "wsvvi",
            Self::Wmvvi => "wmvvi",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InvexClass {
    Invex,
    #[serde(rename = "pseudo1")]
    PseudoI,
    #[serde(rename = "pseudo2")]
    PseudoII,
    #[serde(rename = "quasi1")]
    QuasiI,
    #[serde(rename = "quasi2")]
    QuasiII,
}

impl InvexClass {
    pub const ALL: [InvexClass; 5] = [
        Self::Invex,
        Self::PseudoI,
        Self::PseudoII,
        Self::QuasiI,
        Self::QuasiII,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Invex => "invex",
            Self::PseudoI => "pseudo1",
            Self::PseudoII => "pseudo2",
            Self::QuasiI => "quasi1",
            Self::QuasiII => "quasi2",
        }
    }
}

/// How the "for all A" in the variational inequalities is read: the default
/// rules out points where every Jacobian element gives the inequality; the
/// alternative rules out points where some element does.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quantifier {
    #[default]
    Forall,
    Exists,
}

macro_rules! name_parsing {
    ($ty:ty, $what:literal, [$($variant:expr),*]) => {
        impl FromStr for $ty {
            type Err = String;
            fn from_str(s: &str) -> Result<Self, String> {
                let lower = s.to_ascii_lowercase();
                [$($variant),*]
                    .into_iter()
                    .find(|v: &$ty| v.name() == lower)
                    .ok_or_else(|| format!(concat!("unknown ", $what, " '{}'"), s))
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }
    };
}

name_parsing!(
    VviVariant,
    "variant",
    [
        VviVariant::Svvi,
        VviVariant::Mvvi,
        VviVariant::Wsvvi,
        VviVariant::Wmvvi
    ]
);
name_parsing!(
    InvexClass,
    "class",
    [
        InvexClass::Invex,
        InvexClass::PseudoI,
        InvexClass::PseudoII,
        InvexClass::QuasiI,
        InvexClass::QuasiII
    ]
);

impl Quantifier {
    pub fn name(self) -> &'static str {
        match self {
            Quantifier::Forall => "forall",
            Quantifier::Exists => "exists",
        }
    }
}

name_parsing!(
    Quantifier,
    "quantifier",
    [Quantifier::Forall, Quantifier::Exists]
);

/// The offending point (or pair) of a refutation plus the vectors that show
/// the violation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub x: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vertex: Option<usize>,
    pub vectors: Vec<Vec<f64>>,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleStats {
    /// Samples that were evaluated (excluding skipped ones).
    pub samples: usize,
    pub skipped_zero_eta: usize,
    /// For implication classes: samples where the premise held.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub premise_hits: Option<usize>,
    pub seed: u64,
    pub stream: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub search_box: Option<DomainBox>,
    pub grid_depth: usize,
    pub tolerances: ToleranceProfile,
}

/// Multipliers found by the criticality check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalMultiplier {
    pub lambda: Vec<f64>,
    pub jacobian: Matrix,
    pub mu: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status")]
pub enum Verdict {
    Refuted {
        witness: Witness,
        reason: String,
    },
    CertifiedUpToSampling {
        stats: SampleStats,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        multiplier: Option<CriticalMultiplier>,
        reason: String,
    },
    Inapplicable {
        reason: String,
    },
}

impl Verdict {
    pub fn is_refuted(&self) -> bool {
        matches!(self, Verdict::Refuted { .. })
    }

    pub fn is_certified(&self) -> bool {
        matches!(self, Verdict::CertifiedUpToSampling { .. })
    }

    pub fn witness(&self) -> Option<&Witness> {
        match self {
            Verdict::Refuted { witness, .. } => Some(witness),
            _ => None,
        }
    }

    pub fn stats(&self) -> Option<&SampleStats> {
        match self {
            Verdict::CertifiedUpToSampling { stats, .. } => Some(stats),
            _ => None,
        }
    }

    pub fn status(&self) -> &'static str {
        match self {
            Verdict::Refuted { .. } => "Refuted",
            Verdict::CertifiedUpToSampling { .. } => "CertifiedUpToSampling",
            Verdict::Inapplicable { .. } => "Inapplicable",
        }
    }

    pub fn reason(&self) -> &str {
        match self {
            Verdict::Refuted { reason, .. }
            | Verdict::CertifiedUpToSampling { reason, .. }
            | Verdict::Inapplicable { reason } => reason,
        }
    }
}

/// A fully parameterized check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "check", rename_all = "snake_case")]
pub enum CheckSpec {
    Efficiency {
        xi: Vec<f64>,
        e: Vec<f64>,
        r: f64,
        weak: bool,
    },
    Vvi {
        variant: VviVariant,
        xi: Vec<f64>,
        quantifier: Quantifier,
    },
    Invex {
        class: InvexClass,
        x0: Vec<f64>,
        e: Vec<f64>,
        r: f64,
    },
    Critical {
        xi: Vec<f64>,
    },
}

impl CheckSpec {
    /// Short label such as `efficiency`, `wsvvi` or `pseudo1`.
    pub fn label(&self) -> String {
        match self {
            CheckSpec::Efficiency { weak: false, .. } => "efficiency".into(),
            CheckSpec::Efficiency { weak: true, .. } => "weak_efficiency".into(),
            CheckSpec::Vvi { variant, .. } => variant.name().into(),
            CheckSpec::Invex { class, .. } => class.name().into(),
            CheckSpec::Critical { .. } => "critical".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub spec: CheckSpec,
    pub verdict: Verdict,
}

/// Everything a checker reads. The function may be `-f` for the checks
/// that need it.
#[derive(Clone, Copy, Debug)]
pub struct CheckContext<'a> {
    pub f: &'a PiecewiseVectorFn,
    pub kernel: &'a Kernel,
    pub cone: &'a OrderingCone,
    pub plan: &'a SamplingPlan,
}

impl<'a> CheckContext<'a> {
    pub fn new(
        f: &'a PiecewiseVectorFn,
        kernel: &'a Kernel,
        cone: &'a OrderingCone,
        plan: &'a SamplingPlan,
    ) -> Result<Self, CertifyError> {
        if f.output_dim() != cone.dim() {
            return Err(CertifyError::DimensionMismatch(format!(
                "function has {} outputs but the cone has dimension {}",
                f.output_dim(),
                cone.dim()
            )));
        }
        if kernel.dim() != f.input_dim() {
            return Err(CertifyError::DimensionMismatch(format!(
                "kernel has dimension {} but the function has {} inputs",
                kernel.dim(),
                f.input_dim()
            )));
        }
        plan.validate().map_err(CertifyError::Plan)?;
        Ok(CheckContext {
            f,
            kernel,
            cone,
            plan,
        })
    }

    pub(crate) fn vertices(&self, at: &[f64]) -> Result<Vec<Matrix>, CertifyError> {
        Ok(self
            .f
            .clarke_jacobian(at, self.plan.tolerances.active)?
            .vertices)
    }

    /// Vertices followed by the interior points of the simplex grid, each
    /// with its barycentric weights.
    pub(crate) fn hull_grid(&self, vertices: &[Matrix]) -> Vec<(Vec<f64>, Matrix)> {
        simplex_grid(vertices.len(), self.plan.simplex_grid_depth)
            .into_iter()
            .map(|w| {
                let m = Matrix::combine(&w, vertices);
                (w, m)
            })
            .collect()
    }

    fn check_e(&self, e: &[f64]) -> Result<(), CertifyError> {
        if self.cone.validate_e(e) {
            Ok(())
        } else {
            Err(CertifyError::InvalidE(e.to_vec()))
        }
    }

    fn check_point(&self, p: &[f64]) -> Result<(), CertifyError> {
        if p.len() != self.f.input_dim() {
            return Err(CertifyError::DimensionMismatch(format!(
                "point {p:?} should have {} coordinates",
                self.f.input_dim()
            )));
        }
        if !self.f.domain().contains_open(p) {
            return Err(CertifyError::OutOfDomain(format!("{p:?}")));
        }
        Ok(())
    }

    fn check_ball(&self, center: &[f64], r: f64) -> Result<(), CertifyError> {
        self.check_point(center)?;
        if !(r > 0.0 && r.is_finite()) {
            return Err(CertifyError::Plan(format!(
                "radius must be positive, got {r}"
            )));
        }
        if !self.f.domain().contains_ball(center, r) {
            return Err(CertifyError::OutOfDomain(format!(
                "ball of radius {r} around {center:?} leaves the domain"
            )));
        }
        Ok(())
    }
}

/// Run a check under the context's plan.
pub fn run(ctx: &CheckContext<'_>, spec: &CheckSpec) -> Result<Certificate, CertifyError> {
    let verdict = match spec {
        CheckSpec::Efficiency { xi, e, r, weak } => {
            checks::check_quasi_efficient(ctx, xi, e, *r, *weak)?
        }
        CheckSpec::Vvi {
            variant,
            xi,
            quantifier,
        } => checks::check_vvi(ctx, *variant, xi, *quantifier)?,
        CheckSpec::Invex { class, x0, e, r } => checks::check_invex_class(ctx, *class, x0, e, *r)?,
        CheckSpec::Critical { xi } => gordan::check_vector_critical(ctx, xi)?,
    };
    Ok(Certificate {
        spec: spec.clone(),
        verdict,
    })
}

/// Re-evaluate a witness from scratch; true when it still shows a violation.
pub fn replay(
    ctx: &CheckContext<'_>,
    spec: &CheckSpec,
    witness: &Witness,
) -> Result<bool, CertifyError> {
    let violated = |o: PointOutcome| matches!(o, PointOutcome::Violated(_));
    Ok(match spec {
        CheckSpec::Efficiency { xi, e, weak, .. } => {
            violated(efficiency_at(ctx, xi, e, *weak, &witness.x)?)
        }
        CheckSpec::Vvi {
            variant,
            xi,
            quantifier,
        } => violated(vvi_at(ctx, *variant, *quantifier, xi, &witness.x)?),
        CheckSpec::Invex { class, e, .. } => {
            let Some(y) = &witness.y else {
                return Ok(false);
            };
            violated(invex_pair_at(ctx, *class, e, &witness.x, y)?)
        }
        CheckSpec::Critical { xi } => gordan::replay_noncritical(ctx, xi, witness)?,
    })
}

pub fn check_quasi_efficient(
    ctx: &CheckContext<'_>,
    xi: &[f64],
    e: &[f64],
    r: f64,
    weak: bool,
) -> Result<Verdict, CertifyError> {
    checks::check_quasi_efficient(ctx, xi, e, r, weak)
}

pub fn check_vvi(
    ctx: &CheckContext<'_>,
    variant: VviVariant,
    xi: &[f64],
    quantifier: Quantifier,
) -> Result<Verdict, CertifyError> {
    checks::check_vvi(ctx, variant, xi, quantifier)
}

pub fn check_invex_class(
    ctx: &CheckContext<'_>,
    class: InvexClass,
    x0: &[f64],
    e: &[f64],
    r: f64,
) -> Result<Verdict, CertifyError> {
    checks::check_invex_class(ctx, class, x0, e, r)
}

pub fn check_vector_critical(ctx: &CheckContext<'_>, xi: &[f64]) -> Result<Verdict, CertifyError> {
    gordan::check_vector_critical(ctx, xi)
}
