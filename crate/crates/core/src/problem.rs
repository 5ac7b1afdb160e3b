//! Problem files: JSON documents describing `f`, the cone, the kernel, the
//! default `e` and named points.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::certify::{CertifyError, CheckContext};
use crate::cone::OrderingCone;
use crate::model::{DomainBox, Kernel, KernelKind, ModelError, PieceSource, PiecewiseVectorFn};
use crate::sampling::{stream_seed, SamplingPlan};

pub const FORMAT_VERSION: &str = "vvicert/1";
/// Samples used by the coverage and continuity checks at load time.
pub const LOAD_VALIDATION_SAMPLES: usize = 2_000;

const EXAMPLE5: &str = include_str!("../fixtures/example5.json");
const EXAMPLE23: &str = include_str!("../fixtures/example23.json");

/// Names accepted by `--problem` in place of a path.
pub const BUNDLED: [&str; 2] = ["example5", "example23"];

pub fn bundled(name: &str) -> Option<&'static str> {
    match name {
        "example5" => Some(EXAMPLE5),
        "example23" => Some(EXAMPLE23),
        _ => None,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub version: String,
    #[serde(default)]
    pub name: String,
    pub n: usize,
    pub m: usize,
    pub domain: Vec<[f64; 2]>,
    pub cone: ConeSpec,
    pub function: FunctionSpec,
    pub kernel: KernelSpec,
    pub e: Vec<f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub points: BTreeMap<String, Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ConeSpec {
    Orthant {
        dim: usize,
    },
    Polyhedral {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        generators: Option<Vec<Vec<f64>>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        normals: Option<Vec<Vec<f64>>>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionSpec {
    pub pieces: Vec<PieceSource>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    pub kind: KernelKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub components: Vec<String>,
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unsupported version '{0}', expected '{FORMAT_VERSION}'")]
    Version(String),
    #[error("{location}: {message}")]
    Invalid { location: String, message: String },
    #[error("{0}")]
    Model(#[from] ModelError),
    #[error("validation failed: {}", .0.join("; "))]
    Validation(Vec<String>),
}

fn invalid(location: &str, message: impl Into<String>) -> LoadError {
    LoadError::Invalid {
        location: location.into(),
        message: message.into(),
    }
}

/// A validated problem.
#[derive(Clone, Debug)]
pub struct Problem {
    pub name: String,
    pub f: PiecewiseVectorFn,
    pub kernel: Kernel,
    pub cone: OrderingCone,
    pub e: Vec<f64>,
    pub points: BTreeMap<String, Vec<f64>>,
    pub file: ProblemFile,
    /// Invariant failures tolerated because strict mode was off.
    pub warnings: Vec<String>,
    hash: String,
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

impl Problem {
    /// Path to a JSON file, or the name of a bundled fixture.
    pub fn load(path_or_name: &str, strict: bool) -> Result<Problem, LoadError> {
        if let Some(text) = bundled(path_or_name) {
            return Problem::from_json(text, strict);
        }
        let text = std::fs::read_to_string(Path::new(path_or_name)).map_err(|e| LoadError::Io {
            path: path_or_name.into(),
            message: e.to_string(),
        })?;
        Problem::from_json(&text, strict)
    }

    pub fn from_json(text: &str, strict: bool) -> Result<Problem, LoadError> {
        let file: ProblemFile = serde_json::from_str(text).map_err(|e| LoadError::Syntax {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        let mut problem = Problem::from_file(file, strict)?;
        problem.hash = sha256_hex(text.as_bytes());
        Ok(problem)
    }

    pub fn from_file(file: ProblemFile, strict: bool) -> Result<Problem, LoadError> {
        if file.version != FORMAT_VERSION {
            return Err(LoadError::Version(file.version.clone()));
        }
        if file.n == 0 || file.m == 0 {
            return Err(invalid("n/m", "dimensions must be positive"));
        }
        if file.domain.len() != file.n {
            return Err(invalid("domain", format!("expected {} intervals", file.n)));
        }
        let domain = DomainBox::try_from(file.domain.clone()).map_err(|m| invalid("domain", m))?;
        let cone = build_cone(&file.cone).map_err(|m| invalid("cone", m))?;
        if cone.dim() != file.m {
            return Err(invalid(
                "cone",
                format!("dimension {} differs from m = {}", cone.dim(), file.m),
            ));
        }
        let f = PiecewiseVectorFn::from_sources(file.n, file.m, domain, &file.function.pieces)?;
        let kernel = build_kernel(&file.kernel, file.n)?;
        if file.e.len() != file.m || !cone.validate_e(&file.e) {
            return Err(invalid("e", "e must be strictly inside the cone"));
        }
        for (name, p) in &file.points {
            if !f.domain().contains_open(p) {
                return Err(invalid(
                    &format!("points.{name}"),
                    "point is outside the open domain",
                ));
            }
        }

        let report = f.validate(LOAD_VALIDATION_SAMPLES, stream_seed(0, "load-validation"));
        // Disagreeing pieces do not define a function; that is always fatal.
        if let Some(msg) = report.failures.first() {
            return Err(LoadError::Validation(vec![msg.clone()]));
        }
        let mut warnings = Vec::new();
        if !report.uncovered.is_empty() {
            warnings.push(format!(
                "coverage: {} of {} sampled points lie in no region, first at {:?}",
                report.uncovered.len(),
                report.samples,
                report.uncovered[0]
            ));
        }
        if strict && !warnings.is_empty() {
            return Err(LoadError::Validation(warnings));
        }
        let text = serde_json::to_string(&file).expect("problem file serializes");
        Ok(Problem {
            name: file.name.clone(),
            f,
            kernel,
            cone,
            e: file.e.clone(),
            points: file.points.clone(),
            file,
            warnings,
            hash: sha256_hex(text.as_bytes()),
        })
    }

    /// Hex SHA-256 of the source text.
    pub fn hash(&self) -> &str {
        &self.hash
    }

    /// The same problem with a built-in kernel in place of the file's.
    pub fn with_kernel(&self, kind: KernelKind) -> Result<Problem, LoadError> {
        let mut out = self.clone();
        out.kernel = match kind {
            KernelKind::Difference => Kernel::difference(self.f.input_dim()),
            KernelKind::NegNormDifference => Kernel::neg_norm_difference(self.f.input_dim()),
            KernelKind::Custom => {
                return Err(invalid(
                    "kernel",
                    "a custom kernel needs components in the problem file",
                ))
            }
        };
        out.file.kernel = KernelSpec {
            kind,
            components: Vec::new(),
        };
        Ok(out)
    }

    pub fn context<'a>(&'a self, plan: &'a SamplingPlan) -> Result<CheckContext<'a>, CertifyError> {
        CheckContext::new(&self.f, &self.kernel, &self.cone, plan)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.file).expect("problem file serializes")
    }
}

fn build_cone(spec: &ConeSpec) -> Result<OrderingCone, String> {
    let cone = match spec {
        ConeSpec::Orthant { dim } => OrderingCone::orthant(*dim),
        ConeSpec::Polyhedral {
            generators: Some(g),
            normals: Some(n),
        } => OrderingCone::from_both(g, n),
        ConeSpec::Polyhedral {
            generators: Some(g),
            normals: None,
        } => OrderingCone::from_generators(g),
        ConeSpec::Polyhedral {
            generators: None,
            normals: Some(n),
        } => OrderingCone::from_normals(n),
        ConeSpec::Polyhedral { .. } => return Err("needs generators or normals".into()),
    };
    cone.map_err(|e| e.to_string())
}

fn build_kernel(spec: &KernelSpec, n: usize) -> Result<Kernel, LoadError> {
    match spec.kind {
        KernelKind::Difference => Ok(Kernel::difference(n)),
        KernelKind::NegNormDifference => Ok(Kernel::neg_norm_difference(n)),
        KernelKind::Custom => Ok(Kernel::custom(n, &spec.components)?),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use crate::model::DEFAULT_TOL_ACTIVE;

    fn col(v: &[f64]) -> Matrix {
        Matrix::from_rows(&v.iter().map(|x| vec![*x]).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn bundled_fixtures_load() {
        let p = Problem::load("example5", true).unwrap();
        assert_eq!(p.f.pieces().len(), 2);
        assert!(p.warnings.is_empty());
        let jac = p.f.clarke_jacobian(&[0.0], DEFAULT_TOL_ACTIVE).unwrap();
        assert_eq!(jac.vertices, vec![col(&[5.0, -2.0]), col(&[6.0, -3.0])]);
        assert_eq!(
            p.f.eval(&[0.5]).unwrap(),
            vec![-0.125 - 0.25 + 2.5, 0.25 - 1.0]
        );

        let q = Problem::load("example23", true).unwrap();
        let jac = q.f.clarke_jacobian(&[0.0], DEFAULT_TOL_ACTIVE).unwrap();
        assert_eq!(jac.vertices, vec![col(&[1.0, 4.0]), col(&[1.0, 2.0])]);
        assert_eq!(q.kernel.kind(), KernelKind::NegNormDifference);
        assert_eq!(q.hash().len(), 64);
    }

    fn with_pieces(pieces: &str) -> String {
        EXAMPLE5.replace(
            &EXAMPLE5[EXAMPLE5.find("\"pieces\"").unwrap()
                ..EXAMPLE5.find("  },\n  \"kernel\"").unwrap()],
            &format!("\"pieces\": {pieces}\n"),
        )
    }

    #[test]
    fn inconsistent_pieces_are_rejected() {
        let text = with_pieces(
            r#"[{"region": "x1 >= -0.5", "components": ["x1", "0"]},
                {"region": "x1 <= 0.5", "components": ["x1 + 1", "0"]}]"#,
        );
        let err = Problem::from_json(&text, false).unwrap_err();
        assert!(err.to_string().contains("disagree"), "{err}");
    }

    #[test]
    fn coverage_gap_is_a_warning_unless_strict() {
        let text = with_pieces(
            r#"[{"region": "x1 >= 0.2", "components": ["x1", "0"]},
                {"region": "x1 <= 0", "components": ["x1", "0"]}]"#,
        );
        let p = Problem::from_json(&text, false).unwrap();
        assert_eq!(p.warnings.len(), 1);
        assert!(matches!(
            Problem::from_json(&text, true),
            Err(LoadError::Validation(_))
        ));
    }

    #[test]
    fn positioned_errors() {
        match Problem::from_json("{\n  \"version\": ", false) {
            Err(LoadError::Syntax { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        let text = EXAMPLE5.replace("x1^2 - 2*x1", "x1^2 - 2*");
        match Problem::from_json(&text, false) {
            Err(LoadError::Model(ModelError::Parse { location, source })) => {
                assert_eq!(location, "pieces[0].components[1]");
                assert_eq!(source.offset, 9);
            }
            other => panic!("{other:?}"),
        }
        let text = EXAMPLE5.replace("vvicert/1", "vvicert/0");
        assert!(matches!(
            Problem::from_json(&text, false),
            Err(LoadError::Version(_))
        ));
        let text = EXAMPLE5.replace("\"e\": [0.5, 0.5]", "\"e\": [0.5, 0.0]");
        assert!(matches!(
            Problem::from_json(&text, false),
            Err(LoadError::Invalid { .. })
        ));
    }

    #[test]
    fn round_trips_through_json() {
        let p = Problem::load("example5", false).unwrap();
        let again = Problem::from_json(&p.to_json(), false).unwrap();
        assert_eq!(again.file, p.file);
    }

    #[test]
    fn kernel_override() {
        let p = Problem::load("example23", false).unwrap();
        let d = p.with_kernel(KernelKind::Difference).unwrap();
        assert_eq!(d.kernel.eval(&[0.0], &[0.5]).unwrap(), vec![-0.5]);
        assert!(p.with_kernel(KernelKind::Custom).is_err());
    }
}
