#![allow(dead_code)]

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use vvicert_core::certify::{gordan_alternative, GordanOutcome};
use vvicert_core::cone::OrderingCone;
use vvicert_core::linalg::{norm, Matrix};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random smooth expression text over `x1..xn`. Divisions are only by
/// `1 + (..)^2`, so there are no poles.
pub fn random_expr(rng: &mut ChaCha8Rng, n: usize, depth: u32) -> String {
    if depth == 0 || rng.random_bool(0.25) {
        return if rng.random_bool(0.6) {
            format!("x{}", rng.random_range(1..=n))
        } else {
            let c = (rng.random_range(-3.0..3.0f64) * 100.0).round() / 100.0;
            format!("{c}")
        };
    }
    let a = random_expr(rng, n, depth - 1);
    match rng.random_range(0..6) {
        0 => format!("({a} + {})", random_expr(rng, n, depth - 1)),
        1 => format!("({a} - {})", random_expr(rng, n, depth - 1)),
        2 => format!("({a} * {})", random_expr(rng, n, depth - 1)),
        3 => format!("({a})^{}", rng.random_range(2..=3)),
        4 => format!("({a} / (1 + ({})^2))", random_expr(rng, n, depth - 1)),
        _ => format!("-({a})"),
    }
}

pub fn random_point(rng: &mut ChaCha8Rng, n: usize, half: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-half..half)).collect()
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

/// Central difference of `f` in coordinate `j`.
pub fn central_difference(f: impl Fn(&[f64]) -> f64, x: &[f64], j: usize, h: f64) -> f64 {
    let mut p = x.to_vec();
    let mut m = x.to_vec();
    p[j] += h;
    m[j] -= h;
    (f(&p) - f(&m)) / (2.0 * h)
}

pub fn cone_cases() -> Vec<OrderingCone> {
    vec![
        OrderingCone::orthant(2).unwrap(),
        OrderingCone::orthant(3).unwrap(),
        OrderingCone::from_generators(&[vec![1.0, 0.2], vec![-0.3, 1.0]]).unwrap(),
        OrderingCone::from_generators(&[
            vec![1.0, 0.0, 0.0],
            vec![1.0, 1.0, 0.0],
            vec![0.0, 1.0, 1.0],
            vec![0.0, 0.0, 1.0],
        ])
        .unwrap(),
    ]
}

/// A nonnegative combination of the cone's generators.
pub fn cone_point(cone: &OrderingCone, weights: &[f64]) -> Vec<f64> {
    let g = cone.generators();
    let mut v = vec![0.0; cone.dim()];
    for (i, row) in g.rows().enumerate() {
        let w = weights[i % weights.len()];
        for (vj, gj) in v.iter_mut().zip(row) {
            *vj += w * gj;
        }
    }
    v
}

pub fn normal_values(cone: &OrderingCone, v: &[f64]) -> Vec<f64> {
    cone.normals().mul_vec(v)
}

/// Trials in which polytopes map `eta` into `-C` (or `-int C`) at every
/// vertex by construction; counts sampled convex combinations that do not.
pub fn vertex_reduction_failures(trials: usize, seed: u64) -> usize {
    let mut r = rng(seed);
    let cones = cone_cases();
    let mut failures = 0;
    for trial in 0..trials {
        let cone = &cones[trial % cones.len()];
        let m = cone.dim();
        let n = r.random_range(1..=3);
        let strict = trial % 2 == 1;
        let mut eta = random_point(&mut r, n, 1.0);
        while norm(&eta) < 1e-3 {
            eta = random_point(&mut r, n, 1.0);
        }
        let nn: f64 = eta.iter().map(|v| v * v).sum();
        let vertices: Vec<Matrix> = (0..r.random_range(1..=4))
            .map(|_| {
                let lo = if strict { 0.05 } else { 0.0 };
                let w: Vec<f64> = (0..4).map(|_| r.random_range(lo..1.0)).collect();
                let target: Vec<f64> = cone_point(cone, &w).iter().map(|v| -v).collect();
                let mut rows: Vec<Vec<f64>> =
                    (0..m).map(|_| random_point(&mut r, n, 2.0)).collect();
                // Shift each row so that row . eta equals the target entry.
                for (row, t) in rows.iter_mut().zip(&target) {
                    let cur: f64 = row.iter().zip(&eta).map(|(a, b)| a * b).sum();
                    for (a, e) in row.iter_mut().zip(&eta) {
                        *a += (t - cur) * e / nn;
                    }
                }
                Matrix::from_rows(&rows).unwrap()
            })
            .collect();
        let neg = |a: &Matrix| -> Vec<f64> { a.mul_vec(&eta).iter().map(|v| -v).collect() };
        let member = |v: &[f64]| {
            if strict {
                cone.strictly_contains(v).unwrap()
            } else {
                cone.contains(v).unwrap()
            }
        };
        if !vertices.iter().all(|v| member(&neg(v))) {
            // Rounding pushed a constructed vertex off the cone; not a trial.
            continue;
        }
        for _ in 0..1000 {
            let mut lambda: Vec<f64> = (0..vertices.len()).map(|_| r.random::<f64>()).collect();
            let s: f64 = lambda.iter().sum();
            lambda.iter_mut().for_each(|l| *l /= s);
            if !member(&neg(&Matrix::combine(&lambda, &vertices))) {
                failures += 1;
            }
        }
    }
    failures
}

/// Certificates checked with plain arithmetic against the orthant.
pub fn verify_gordan(a: &Matrix, outcome: &GordanOutcome) -> bool {
    match outcome {
        GordanOutcome::Direction { x } => a.mul_vec(x).iter().all(|&v| v < 0.0),
        GordanOutcome::Multiplier { y } => {
            let aty = a.transpose().mul_vec(y);
            y.iter().all(|&v| v >= -1e-12)
                && y.iter().any(|&v| v > 1e-9)
                && norm(&aty) <= 1e-8 * norm(y).max(1.0)
        }
    }
}

#[derive(Debug, Default)]
pub struct GordanTrials {
    pub matrices: usize,
    pub directions: usize,
    pub multipliers: usize,
    pub degenerate: usize,
    pub unverified: usize,
}

/// Random `m x n` matrices with `m, n <= 4` and entries in [-1, 1].
pub fn gordan_trials(count: usize, seed: u64) -> GordanTrials {
    let mut r = rng(seed);
    let mut t = GordanTrials {
        matrices: count,
        ..Default::default()
    };
    for _ in 0..count {
        let m = r.random_range(1..=4);
        let n = r.random_range(1..=4);
        let rows: Vec<Vec<f64>> = (0..m)
            .map(|_| (0..n).map(|_| r.random_range(-1.0..=1.0)).collect())
            .collect();
        let a = Matrix::from_rows(&rows).unwrap();
        let cone = OrderingCone::orthant(m).unwrap();
        match gordan_alternative(&a, &cone) {
            Ok(outcome) => {
                match outcome {
                    GordanOutcome::Direction { .. } => t.directions += 1,
                    GordanOutcome::Multiplier { .. } => t.multipliers += 1,
                }
                if !verify_gordan(&a, &outcome) {
                    t.unverified += 1;
                }
            }
            Err(_) => t.degenerate += 1,
        }
    }
    t
}
