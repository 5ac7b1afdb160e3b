use serde::{Deserialize, Serialize};

use super::{DomainBox, ModelError};
use crate::expr::{self, Context, Expr};
use crate::linalg::{norm, sub};
use crate::sampling::sample_box;

/// Relative tolerance for the sampled kernel identities.
const FLAG_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    /// `eta(x, y) = x - y`
    Difference,
    /// `eta(x, y) = -|x - y| (1, ..., 1)`
    NegNormDifference,
    Custom,
}

/// The map `eta: X x X -> R^n`.
#[derive(Clone, Debug, PartialEq)]
pub struct Kernel {
    kind: KernelKind,
    n: usize,
    components: Vec<Expr>,
}

/// Structural properties, each established by sampling.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelFlags {
    /// `eta(x, y) = -eta(y, x)`
    pub skew: bool,
    /// `eta(. , y)` is affine.
    pub first_arg_affine: bool,
    /// `eta(x, x) = 0`
    pub vanishes_on_diagonal: bool,
    pub samples: usize,
    pub seed: u64,
}

impl Kernel {
    pub fn difference(n: usize) -> Self {
        Kernel {
            kind: KernelKind::Difference,
            n,
            components: Vec::new(),
        }
    }

    pub fn neg_norm_difference(n: usize) -> Self {
        Kernel {
            kind: KernelKind::NegNormDifference,
            n,
            components: Vec::new(),
        }
    }

    /// Components written in `x1..xn` and `y1..yn`, one per input.
    pub fn custom(n: usize, sources: &[String]) -> Result<Self, ModelError> {
        if sources.len() != n {
            return Err(ModelError::DimensionMismatch {
                expected: n,
                found: sources.len(),
            });
        }
        let components = sources
            .iter()
            .enumerate()
            .map(|(i, s)| {
                expr::parse(s, n, Context::Kernel).map_err(|e| ModelError::Parse {
                    location: format!("kernel.components[{i}]"),
                    source: e,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Kernel {
            kind: KernelKind::Custom,
            n,
            components,
        })
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn components(&self) -> &[Expr] {
        &self.components
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            KernelKind::Difference => "difference",
            KernelKind::NegNormDifference => "neg_norm_difference",
            KernelKind::Custom => "custom",
        }
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<Vec<f64>, ModelError> {
        for v in [x, y] {
            if v.len() != self.n {
                return Err(ModelError::DimensionMismatch {
                    expected: self.n,
                    found: v.len(),
                });
            }
        }
        Ok(match self.kind {
            KernelKind::Difference => sub(x, y),
            KernelKind::NegNormDifference => vec![-norm(&sub(x, y)); self.n],
            KernelKind::Custom => self
                .components
                .iter()
                .map(|c| c.eval_xy(x, y))
                .collect::<Result<_, _>>()?,
        })
    }

    /// Test the structural identities on `samples` points of `domain`.
    pub fn flags(
        &self,
        domain: &DomainBox,
        samples: usize,
        seed: u64,
    ) -> Result<KernelFlags, ModelError> {
        let n = self.n;
        let lo = domain.inner_lower();
        let hi = domain.inner_upper();
        // One draw gives (x, x', y, lambda).
        let mut plo = [lo.clone(), lo.clone(), lo].concat();
        let mut phi = [hi.clone(), hi.clone(), hi].concat();
        plo.push(0.0);
        phi.push(1.0);
        let product = DomainBox::new(plo, phi)?;
        let close = |a: &[f64], b: &[f64]| norm(&sub(a, b)) <= FLAG_TOL * (1.0 + norm(a) + norm(b));
        let (mut skew, mut affine, mut diagonal) = (true, true, true);
        let points = sample_box(&product, samples, seed);
        for p in &points {
            let (x, rest) = p.split_at(n);
            let (x2, rest) = rest.split_at(n);
            let (y, lambda) = rest.split_at(n);
            let lambda = lambda[0];
            let exy = self.eval(x, y)?;
            if skew {
                let eyx = self.eval(y, x)?;
                skew = close(&exy, &eyx.iter().map(|v| -v).collect::<Vec<_>>());
            }
            if affine {
                let mix: Vec<f64> = x
                    .iter()
                    .zip(x2)
                    .map(|(a, b)| lambda * a + (1.0 - lambda) * b)
                    .collect();
                let lhs = self.eval(&mix, y)?;
                let ex2y = self.eval(x2, y)?;
                let rhs: Vec<f64> = exy
                    .iter()
                    .zip(&ex2y)
                    .map(|(a, b)| lambda * a + (1.0 - lambda) * b)
                    .collect();
                affine = close(&lhs, &rhs);
            }
            if diagonal {
                diagonal = norm(&self.eval(x, x)?) <= FLAG_TOL * (1.0 + norm(x));
            }
        }
        Ok(KernelFlags {
            skew,
            first_arg_affine: affine,
            vanishes_on_diagonal: diagonal,
            samples: points.len(),
            seed,
        })
    }
}
