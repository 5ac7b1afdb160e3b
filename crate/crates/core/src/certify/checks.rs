use rayon::prelude::*;

use super::{
    CertifyError, CheckContext, InvexClass, Quantifier, SampleStats, Verdict, VviVariant, Witness,
};
use crate::linalg::{norm, scale, sub, Matrix};
use crate::sampling::{sample_ball, sample_ball_pairs, sample_box, stream_seed};

pub(crate) const EFFICIENCY_STREAM: &str = "efficiency";
pub(crate) const VVI_STREAM: &str = "vvi";
pub(crate) const INVEX_STREAM: &str = "invex-pairs";

/// Result of testing one sample.
#[derive(Clone, Debug, PartialEq)]
pub enum PointOutcome {
    /// `eta` vanished and the plan excludes such points.
    Skipped,
    Passed {
        premise: bool,
    },
    Violated(Witness),
}

struct Scan {
    violation: Option<Witness>,
    evaluated: usize,
    skipped: usize,
    premise_hits: usize,
}

/// Evaluate all samples in parallel and report the first violation in sample
/// order, so the witness does not depend on scheduling.
fn scan<F>(count: usize, eval: F) -> Result<Scan, CertifyError>
where
    F: Fn(usize) -> Result<PointOutcome, CertifyError> + Sync + Send,
{
    let outcomes: Vec<_> = (0..count).into_par_iter().map(eval).collect();
    let mut s = Scan {
        violation: None,
        evaluated: 0,
        skipped: 0,
        premise_hits: 0,
    };
    for o in outcomes {
        match o? {
            PointOutcome::Skipped => s.skipped += 1,
            PointOutcome::Passed { premise } => {
                s.evaluated += 1;
                s.premise_hits += premise as usize;
            }
            PointOutcome::Violated(w) => {
                s.evaluated += 1;
                s.violation = Some(w);
                return Ok(s);
            }
        }
    }
    Ok(s)
}

fn neg(v: &[f64]) -> Vec<f64> {
    scale(v, -1.0)
}

fn add_scaled(v: &[f64], e: &[f64], s: f64) -> Vec<f64> {
    v.iter().zip(e).map(|(a, b)| a + s * b).collect()
}

impl CheckContext<'_> {
    fn member(&self, v: &[f64], strict: bool) -> bool {
        if strict {
            self.cone.strictly_contains_unchecked(v)
        } else {
            self.cone.contains_unchecked(v)
        }
    }

    fn stats(&self, scan: &Scan, stream: &str) -> SampleStats {
        SampleStats {
            samples: scan.evaluated,
            skipped_zero_eta: scan.skipped,
            premise_hits: None,
            seed: self.plan.seed,
            stream: stream.into(),
            center: None,
            radius: None,
            search_box: None,
            grid_depth: self.plan.simplex_grid_depth,
            tolerances: self.plan.tolerances.clone(),
        }
    }

    fn eta(&self, x: &[f64], y: &[f64]) -> Result<Option<(Vec<f64>, f64)>, CertifyError> {
        let eta = self.kernel.eval(x, y)?;
        let nn = norm(&eta);
        if self.plan.exclude_zero_eta && nn <= self.plan.tolerances.eta_zero {
            return Ok(None);
        }
        Ok(Some((eta, nn)))
    }
}

fn efficiency_with(
    ctx: &CheckContext<'_>,
    xi: &[f64],
    f_xi: &[f64],
    e: &[f64],
    weak: bool,
    x: &[f64],
) -> Result<PointOutcome, CertifyError> {
    let Some((_, nn)) = ctx.eta(x, xi)? else {
        return Ok(PointOutcome::Skipped);
    };
    // f(x) + e|eta| <=_C f(xi)  iff  f(xi) - f(x) - e|eta| in C
    let gap = add_scaled(&sub(f_xi, &ctx.f.eval(x)?), e, -nn);
    if ctx.member(&gap, weak) {
        let order = if weak { "<_C" } else { "<=_C" };
        Ok(PointOutcome::Violated(Witness {
            x: x.to_vec(),
            y: Some(xi.to_vec()),
            lambda: None,
            vertex: None,
            vectors: vec![gap],
            detail: format!("f(x) + e|eta(x, xi)| {order} f(xi)"),
        }))
    } else {
        Ok(PointOutcome::Passed { premise: false })
    }
}

/// Does `x` violate (weak) quasi efficiency of `xi`?
pub fn efficiency_at(
    ctx: &CheckContext<'_>,
    xi: &[f64],
    e: &[f64],
    weak: bool,
    x: &[f64],
) -> Result<PointOutcome, CertifyError> {
    ctx.check_point(x)?;
    let f_xi = ctx.f.eval(xi)?;
    efficiency_with(ctx, xi, &f_xi, e, weak, x)
}

pub(crate) fn check_quasi_efficient(
    ctx: &CheckContext<'_>,
    xi: &[f64],
    e: &[f64],
    r: f64,
    weak: bool,
) -> Result<Verdict, CertifyError> {
    ctx.check_e(e)?;
    ctx.check_ball(xi, r)?;
    let f_xi = ctx.f.eval(xi)?;
    let seed = stream_seed(ctx.plan.seed, EFFICIENCY_STREAM);
    let points = sample_ball(xi, r, ctx.f.domain(), ctx.plan.ball_samples, seed);
    let s = scan(points.len(), |i| {
        efficiency_with(ctx, xi, &f_xi, e, weak, &points[i])
    })?;
    let name = if weak {
        "quasi weak efficiency"
    } else {
        "quasi efficiency"
    };
    Ok(match s.violation {
        Some(witness) => Verdict::Refuted {
            reason: format!("{name} fails at x = {:?}", witness.x),
            witness,
        },
        None if s.evaluated == 0 => Verdict::Inapplicable {
            reason: "no usable samples in the ball".into(),
        },
        None => {
            let mut stats = ctx.stats(&s, EFFICIENCY_STREAM);
            stats.center = Some(xi.to_vec());
            stats.radius = Some(r);
            Verdict::CertifiedUpToSampling {
                reason: format!("no violation of {name} among {} samples", s.evaluated),
                stats,
                multiplier: None,
            }
        }
    })
}

fn vvi_with(
    ctx: &CheckContext<'_>,
    variant: VviVariant,
    quantifier: Quantifier,
    xi: &[f64],
    base_vertices: Option<&[Matrix]>,
    x: &[f64],
) -> Result<PointOutcome, CertifyError> {
    let Some((eta, _)) = ctx.eta(x, xi)? else {
        return Ok(PointOutcome::Skipped);
    };
    let owned;
    let vertices = match base_vertices {
        Some(v) => v,
        None => {
            owned = ctx.vertices(x)?;
            &owned[..]
        }
    };
    let strict = variant.is_weak();
    let order = if strict { "<_C" } else { "<=_C" };
    match quantifier {
        Quantifier::Forall => {
            let products: Vec<Vec<f64>> = vertices.iter().map(|v| v.mul_vec(&eta)).collect();
            if products.iter().all(|p| ctx.member(&neg(p), strict)) {
                return Ok(PointOutcome::Violated(Witness {
                    x: x.to_vec(),
                    y: Some(xi.to_vec()),
                    lambda: None,
                    vertex: None,
                    vectors: products,
                    detail: format!("A eta(x, xi) {order} 0 for every vertex A"),
                }));
            }
        }
        Quantifier::Exists => {
            for (w, a) in ctx.hull_grid(vertices) {
                let p = a.mul_vec(&eta);
                if ctx.member(&neg(&p), strict) {
                    return Ok(PointOutcome::Violated(Witness {
                        x: x.to_vec(),
                        y: Some(xi.to_vec()),
                        lambda: Some(w),
                        vertex: None,
                        vectors: vec![p],
                        detail: format!("A eta(x, xi) {order} 0 for the hull element at lambda"),
                    }));
                }
            }
        }
    }
    Ok(PointOutcome::Passed { premise: false })
}

/// Does `x` show that `xi` does not solve the variational inequality?
pub fn vvi_at(
    ctx: &CheckContext<'_>,
    variant: VviVariant,
    quantifier: Quantifier,
    xi: &[f64],
    x: &[f64],
) -> Result<PointOutcome, CertifyError> {
    ctx.check_point(x)?;
    let base = if variant.at_base_point() {
        Some(ctx.vertices(xi)?)
    } else {
        None
    };
    vvi_with(ctx, variant, quantifier, xi, base.as_deref(), x)
}

pub(crate) fn check_vvi(
    ctx: &CheckContext<'_>,
    variant: VviVariant,
    xi: &[f64],
    quantifier: Quantifier,
) -> Result<Verdict, CertifyError> {
    ctx.check_point(xi)?;
    let base = if variant.at_base_point() {
        Some(ctx.vertices(xi)?)
    } else {
        ctx.f.eval(xi)?;
        None
    };
    let region = ctx
        .plan
        .search_box
        .clone()
        .unwrap_or_else(|| ctx.f.domain().clone());
    let seed = stream_seed(ctx.plan.seed, VVI_STREAM);
    let points: Vec<Vec<f64>> = sample_box(&region, ctx.plan.ball_samples, seed)
        .into_iter()
        .filter(|p| ctx.f.domain().contains_open(p))
        .collect();
    let s = scan(points.len(), |i| {
        vvi_with(ctx, variant, quantifier, xi, base.as_deref(), &points[i])
    })?;
    Ok(match s.violation {
        Some(witness) => Verdict::Refuted {
            reason: format!("x = {:?} violates {}", witness.x, variant.name()),
            witness,
        },
        None if s.evaluated == 0 => Verdict::Inapplicable {
            reason: "no usable samples in the search region".into(),
        },
        None => {
            let mut stats = ctx.stats(&s, VVI_STREAM);
            stats.search_box = Some(region);
            Verdict::CertifiedUpToSampling {
                reason: format!(
                    "xi solves {} ({} reading) over {} samples",
                    variant.name(),
                    quantifier.name(),
                    s.evaluated
                ),
                stats,
                multiplier: None,
            }
        }
    })
}

fn pair_witness(
    x: &[f64],
    y: &[f64],
    vertex: Option<usize>,
    lambda: Option<Vec<f64>>,
    v: Vec<f64>,
    detail: &str,
) -> PointOutcome {
    PointOutcome::Violated(Witness {
        x: x.to_vec(),
        y: Some(y.to_vec()),
        lambda,
        vertex,
        vectors: vec![v],
        detail: detail.into(),
    })
}

/// Test the defining implication of `class` on the pair `(x, y)`, with the
/// Jacobian taken at `y`.
pub fn invex_pair_at(
    ctx: &CheckContext<'_>,
    class: InvexClass,
    e: &[f64],
    x: &[f64],
    y: &[f64],
) -> Result<PointOutcome, CertifyError> {
    let eta = ctx.kernel.eval(x, y)?;
    let nn = norm(&eta);
    let d = sub(&ctx.f.eval(x)?, &ctx.f.eval(y)?);
    let vertices = ctx.vertices(y)?;
    match class {
        InvexClass::Invex => {
            // f(x) - f(y) - A eta + e|eta| in C for every vertex A
            for (i, a) in vertices.iter().enumerate() {
                let slack = add_scaled(&sub(&d, &a.mul_vec(&eta)), e, nn);
                if !ctx.member(&slack, false) {
                    return Ok(pair_witness(
                        x,
                        y,
                        Some(i),
                        None,
                        slack,
                        "f(x) - f(y) - A eta + e|eta| is not in C",
                    ));
                }
            }
            Ok(PointOutcome::Passed { premise: true })
        }
        InvexClass::PseudoI | InvexClass::PseudoII => {
            let premise = if class == InvexClass::PseudoI {
                // f(x) - f(y) <_C -e|eta|
                add_scaled(&neg(&d), e, -nn)
            } else {
                neg(&d)
            };
            if !ctx.member(&premise, true) {
                return Ok(PointOutcome::Passed { premise: false });
            }
            for (i, a) in vertices.iter().enumerate() {
                let mut lhs = a.mul_vec(&eta);
                if class == InvexClass::PseudoII {
                    lhs = add_scaled(&lhs, e, nn);
                }
                if !ctx.member(&neg(&lhs), true) {
                    return Ok(pair_witness(
                        x,
                        y,
                        Some(i),
                        None,
                        lhs,
                        "premise holds but the vertex term is not <_C 0",
                    ));
                }
            }
            Ok(PointOutcome::Passed { premise: true })
        }
        InvexClass::QuasiI | InvexClass::QuasiII => {
            let premise_at = ctx.hull_grid(&vertices).into_iter().find(|(_, a)| {
                let mut p = a.mul_vec(&eta);
                if class == InvexClass::QuasiI {
                    p = add_scaled(&p, e, -nn);
                }
                ctx.member(&p, true)
            });
            let Some((lambda, _)) = premise_at else {
                return Ok(PointOutcome::Passed { premise: false });
            };
            let conclusion = if class == InvexClass::QuasiI {
                d
            } else {
                add_scaled(&d, e, -nn)
            };
            if ctx.member(&conclusion, true) {
                Ok(PointOutcome::Passed { premise: true })
            } else {
                Ok(pair_witness(
                    x,
                    y,
                    None,
                    Some(lambda),
                    conclusion,
                    "premise holds for a hull element but the value conclusion fails",
                ))
            }
        }
    }
}

pub(crate) fn check_invex_class(
    ctx: &CheckContext<'_>,
    class: InvexClass,
    x0: &[f64],
    e: &[f64],
    r: f64,
) -> Result<Verdict, CertifyError> {
    ctx.check_e(e)?;
    ctx.check_ball(x0, r)?;
    let seed = stream_seed(ctx.plan.seed, INVEX_STREAM);
    let pairs = sample_ball_pairs(x0, r, ctx.f.domain(), ctx.plan.pair_samples, seed);
    let s = scan(pairs.len(), |i| {
        invex_pair_at(ctx, class, e, &pairs[i].0, &pairs[i].1)
    })?;
    Ok(match s.violation {
        Some(witness) => Verdict::Refuted {
            reason: format!(
                "{} fails for x = {:?}, y = {:?}",
                class.name(),
                witness.x,
                witness.y.as_deref().unwrap_or_default()
            ),
            witness,
        },
        None if s.evaluated == 0 => Verdict::Inapplicable {
            reason: "no pairs could be drawn from the ball".into(),
        },
        None => {
            let mut stats = ctx.stats(&s, INVEX_STREAM);
            stats.center = Some(x0.to_vec());
            stats.radius = Some(r);
            if class != InvexClass::Invex {
                stats.premise_hits = Some(s.premise_hits);
            }
            Verdict::CertifiedUpToSampling {
                reason: format!("{} holds on {} sampled pairs", class.name(), s.evaluated),
                stats,
                multiplier: None,
            }
        }
    })
}

/// The pairs an invexity check at `(x0, r)` would draw under `ctx`'s plan.
pub fn invex_pairs(ctx: &CheckContext<'_>, x0: &[f64], r: f64) -> Vec<(Vec<f64>, Vec<f64>)> {
    let seed = stream_seed(ctx.plan.seed, INVEX_STREAM);
    sample_ball_pairs(x0, r, ctx.f.domain(), ctx.plan.pair_samples, seed)
}
