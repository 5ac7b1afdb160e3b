use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::AuditError;
use crate::model::{KernelKind, PieceSource};
use crate::problem::{ConeSpec, FunctionSpec, KernelSpec, Problem, ProblemFile, FORMAT_VERSION};

const MAX_DIM: usize = 3;
const MAX_PIECES: usize = 3;
const MAX_DEGREE: u32 = 3;
const ATTEMPTS: u64 = 8;

/// Bounds for a random piecewise polynomial instance. Pieces are glued along
/// parallel hyperplanes `a.x = c_k`, each new piece adding a multiple of
/// `(a.x - c_k)`, so continuity holds by construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomInstanceSpec {
    pub seed: u64,
    pub n: usize,
    pub m: usize,
    pub pieces: usize,
    pub degree: u32,
    pub kernel: KernelKind,
    pub e_range: [f64; 2],
}

impl RandomInstanceSpec {
    /// Dimensions, piece count, degree and kernel drawn from the seed.
    pub fn from_seed(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
        let kernel = if rng.random_bool(0.5) {
            KernelKind::Difference
        } else {
            KernelKind::NegNormDifference
        };
        RandomInstanceSpec {
            seed,
            n: rng.random_range(1..=MAX_DIM),
            m: rng.random_range(1..=MAX_DIM),
            pieces: rng.random_range(1..=MAX_PIECES),
            degree: rng.random_range(1..=MAX_DEGREE),
            kernel,
            e_range: [0.1, 1.0],
        }
    }

    fn check(&self) -> Result<(), String> {
        if self.n == 0 || self.n > MAX_DIM || self.m == 0 || self.m > MAX_DIM {
            return Err(format!(
                "dimensions ({}, {}) outside 1..={MAX_DIM}",
                self.n, self.m
            ));
        }
        if self.pieces == 0 || self.pieces > MAX_PIECES {
            return Err(format!(
                "piece count {} outside 1..={MAX_PIECES}",
                self.pieces
            ));
        }
        if self.degree == 0 || self.degree > MAX_DEGREE {
            return Err(format!("degree {} outside 1..={MAX_DEGREE}", self.degree));
        }
        if self.kernel == KernelKind::Custom {
            return Err("custom kernels cannot be generated".into());
        }
        let [lo, hi] = self.e_range;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return Err(format!("e range [{lo}, {hi}] must be positive and ordered"));
        }
        Ok(())
    }
}

fn round2(v: f64) -> f64 {
    (v * 100.0).round() / 100.0
}

fn exponents(n: usize, max_degree: u32) -> Vec<Vec<u32>> {
    let mut out = vec![vec![]];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|prefix: Vec<u32>| {
                let used: u32 = prefix.iter().sum();
                (0..=max_degree - used).map(move |k| {
                    let mut p = prefix.clone();
                    p.push(k);
                    p
                })
            })
            .collect();
    }
    out
}

fn monomial(exp: &[u32]) -> String {
    let factors: Vec<String> = exp
        .iter()
        .enumerate()
        .filter(|(_, &k)| k > 0)
        .map(|(i, &k)| {
            if k == 1 {
                format!("x{}", i + 1)
            } else {
                format!("x{}^{}", i + 1, k)
            }
        })
        .collect();
    if factors.is_empty() {
        "1".into()
    } else {
        factors.join("*")
    }
}

/// Sparse polynomial with 2-decimal coefficients in [-2, 2].
fn polynomial(rng: &mut ChaCha8Rng, n: usize, degree: u32) -> String {
    let terms: Vec<String> = exponents(n, degree)
        .into_iter()
        .filter_map(|exp| {
            let keep = rng.random_bool(0.5);
            let c = round2(rng.random_range(-2.0..=2.0));
            (keep && c != 0.0).then(|| format!("({c})*{}", monomial(&exp)))
        })
        .collect();
    if terms.is_empty() {
        "0".into()
    } else {
        terms.join(" + ")
    }
}

fn attempt(spec: &RandomInstanceSpec, rng: &mut ChaCha8Rng) -> Result<Problem, String> {
    let n = spec.n;
    let a: Vec<f64> = (0..n)
        .map(|_| round2(rng.random_range(-1.0..=1.0)))
        .collect();
    if a.iter().all(|&v| v == 0.0) {
        return Err("zero gluing direction".into());
    }
    let s = format!(
        "({})",
        a.iter()
            .enumerate()
            .map(|(i, c)| format!("({c})*x{}", i + 1))
            .collect::<Vec<_>>()
            .join(" + ")
    );
    let mut cuts = vec![0.0];
    if spec.pieces == 3 {
        cuts.push(round2(rng.random_range(0.1..0.6)));
    }
    let cuts = &cuts[..spec.pieces - 1];

    let mut current: Vec<String> = (0..spec.m)
        .map(|_| polynomial(rng, n, spec.degree))
        .collect();
    let mut pieces = Vec::with_capacity(spec.pieces);
    for k in 0..spec.pieces {
        if k > 0 {
            let c = cuts[k - 1];
            current = current
                .iter()
                .map(|p| {
                    format!(
                        "{p} + ({s} - ({c}))*({})",
                        polynomial(rng, n, spec.degree - 1)
                    )
                })
                .collect();
        }
        let region = match (k.checked_sub(1).map(|i| cuts[i]), cuts.get(k)) {
            (None, None) => "true".to_string(),
            (None, Some(hi)) => format!("{s} <= {hi}"),
            (Some(lo), None) => format!("{s} >= {lo}"),
            (Some(lo), Some(hi)) => format!("{s} >= {lo} and {s} <= {hi}"),
        };
        pieces.push(PieceSource {
            region,
            components: current.clone(),
        });
    }
    let [lo, hi] = spec.e_range;
    let e = (0..spec.m)
        .map(|_| {
            if lo == hi {
                lo
            } else {
                round2(rng.random_range(lo..=hi)).clamp(lo, hi)
            }
        })
        .collect();
    let file = ProblemFile {
        version: FORMAT_VERSION.into(),
        name: format!("random-{}", spec.seed),
        n,
        m: spec.m,
        domain: vec![[-1.0, 1.0]; n],
        cone: ConeSpec::Orthant { dim: spec.m },
        function: FunctionSpec { pieces },
        kernel: KernelSpec {
            kind: spec.kernel,
            components: vec![],
        },
        e,
        points: BTreeMap::from([("xi".to_string(), vec![0.0; n])]),
    };
    Problem::from_file(file, true).map_err(|e| e.to_string())
}

/// Deterministic per spec. Retries a bounded number of times when a draw
/// fails validation.
pub fn generate_instance(spec: &RandomInstanceSpec) -> Result<Problem, AuditError> {
    let fail = |reason| AuditError::GenerationFailed {
        seed: spec.seed,
        reason,
    };
    spec.check().map_err(fail)?;
    let mut last = String::new();
    for k in 0..ATTEMPTS {
        let mut rng =
            ChaCha8Rng::seed_from_u64(spec.seed.wrapping_add(k.wrapping_mul(0x1000_0001)));
        match attempt(spec, &mut rng) {
            Ok(p) => return Ok(p),
            Err(e) => last = e,
        }
    }
    Err(fail(format!("{ATTEMPTS} attempts failed, last: {last}")))
}
