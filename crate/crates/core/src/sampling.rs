//! Deterministic sample generation.
//!
//! For problems with at most three inputs the unit cube is covered by a
//! Cranley-Patterson rotated R_d sequence (additive recurrence with the
//! generalized golden ratio); larger problems draw seeded uniform points.
//! Balls are sampled by rejection from their bounding box. Every sequence is
//! a pure function of `(dimension, seed)` and prefix-stable in the count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::norm;
use crate::model::DomainBox;

/// Input dimension up to which the low-discrepancy sequence is used.
pub const LOW_DISCREPANCY_MAX_INPUT_DIM: usize = 3;

/// Tolerances shared by all checkers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToleranceProfile {
    /// `|eta| <= eta_zero` counts as `eta = 0`.
    pub eta_zero: f64,
    /// Region inflation when collecting active pieces.
    pub active: f64,
}

impl Default for ToleranceProfile {
    fn default() -> Self {
        ToleranceProfile {
            eta_zero: 1e-8,
            active: 1e-7,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplingPlan {
    pub seed: u64,
    /// Point samples drawn from a ball or from the search box.
    pub ball_samples: usize,
    /// Pair samples drawn from the product of a ball with itself.
    pub pair_samples: usize,
    /// Region searched by the variational-inequality checks; the problem
    /// domain when absent.
    pub search_box: Option<DomainBox>,
    pub simplex_grid_depth: usize,
    pub exclude_zero_eta: bool,
    pub tolerances: ToleranceProfile,
}

impl Default for SamplingPlan {
    fn default() -> Self {
        SamplingPlan {
            seed: 42,
            ball_samples: 10_000,
            pair_samples: 10_000,
            search_box: None,
            simplex_grid_depth: 8,
            exclude_zero_eta: true,
            tolerances: ToleranceProfile::default(),
        }
    }
}

impl SamplingPlan {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_samples(mut self, count: usize) -> Self {
        self.ball_samples = count;
        self.pair_samples = count;
        self
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.ball_samples == 0 || self.pair_samples == 0 {
            return Err("sample counts must be at least 1".into());
        }
        if self.simplex_grid_depth == 0 {
            return Err("simplex grid depth must be at least 1".into());
        }
        Ok(())
    }
}

/// Stream of points in `[0,1)^dim`.
pub struct UnitSequence {
    kind: SequenceKind,
}

enum SequenceKind {
    Additive {
        offset: Vec<f64>,
        alpha: Vec<f64>,
        index: u64,
    },
    Uniform {
        dim: usize,
        rng: Box<ChaCha8Rng>,
    },
}

/// Unique positive root of `x^(d+1) = x + 1`.
fn generalized_golden_ratio(d: usize) -> f64 {
    let mut x = 2.0f64;
    for _ in 0..64 {
        x = (1.0 + x).powf(1.0 / (d as f64 + 1.0));
    }
    x
}

impl UnitSequence {
    pub fn new(dim: usize, low_discrepancy: bool, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        if low_discrepancy {
            let g = generalized_golden_ratio(dim);
            let alpha = (1..=dim).map(|k| g.powi(-(k as i32))).collect();
            let offset = (0..dim).map(|_| rng.random::<f64>()).collect();
            UnitSequence {
                kind: SequenceKind::Additive {
                    offset,
                    alpha,
                    index: 0,
                },
            }
        } else {
            UnitSequence {
                kind: SequenceKind::Uniform {
                    dim,
                    rng: Box::new(rng),
                },
            }
        }
    }
}

impl Iterator for UnitSequence {
    type Item = Vec<f64>;

    fn next(&mut self) -> Option<Vec<f64>> {
        Some(match &mut self.kind {
            SequenceKind::Additive {
                offset,
                alpha,
                index,
            } => {
                *index += 1;
                let k = *index as f64;
                offset
                    .iter()
                    .zip(alpha.iter())
                    .map(|(o, a)| (o + k * a).fract())
                    .collect()
            }
            SequenceKind::Uniform { dim, rng } => (0..*dim).map(|_| rng.random::<f64>()).collect(),
        })
    }
}

fn use_low_discrepancy(input_dim: usize) -> bool {
    input_dim <= LOW_DISCREPANCY_MAX_INPUT_DIM
}

/// Mix a plan seed with a stream label so different checks draw different
/// but reproducible sequences.
pub fn stream_seed(seed: u64, label: &str) -> u64 {
    // FNV-1a over the label, folded into the seed with a splitmix step.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    let mut z = seed ^ h;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Points of the box, in sequence order.
pub fn sample_box(bounds: &DomainBox, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let lo = bounds.inner_lower();
    let hi = bounds.inner_upper();
    UnitSequence::new(lo.len(), use_low_discrepancy(lo.len()), seed)
        .take(count)
        .map(|u| {
            u.iter()
                .enumerate()
                .map(|(i, t)| lo[i] + t * (hi[i] - lo[i]))
                .collect()
        })
        .collect()
}

/// Up to `count` points of the open ball `B(center, radius)` that also lie in
/// `within`, by rejection from the bounding box. Gives up after `50 * count`
/// draws, so callers must check how many points came back.
pub fn sample_ball(
    center: &[f64],
    radius: f64,
    within: &DomainBox,
    count: usize,
    seed: u64,
) -> Vec<Vec<f64>> {
    let n = center.len();
    let mut out = Vec::with_capacity(count);
    let seq = UnitSequence::new(n, use_low_discrepancy(n), seed);
    for u in seq.take(count.saturating_mul(50)) {
        let x: Vec<f64> = u
            .iter()
            .zip(center)
            .map(|(t, c)| c + radius * (2.0 * t - 1.0))
            .collect();
        if in_open_ball(&x, center, radius) && within.contains_open(&x) {
            out.push(x);
            if out.len() == count {
                break;
            }
        }
    }
    out
}

/// Up to `count` pairs from `B(center, radius)^2`, drawn jointly from a
/// `2n`-dimensional sequence.
pub fn sample_ball_pairs(
    center: &[f64],
    radius: f64,
    within: &DomainBox,
    count: usize,
    seed: u64,
) -> Vec<(Vec<f64>, Vec<f64>)> {
    let n = center.len();
    let mut out = Vec::with_capacity(count);
    let seq = UnitSequence::new(2 * n, use_low_discrepancy(n), seed);
    for u in seq.take(count.saturating_mul(50)) {
        let point = |block: &[f64]| -> Vec<f64> {
            block
                .iter()
                .zip(center)
                .map(|(t, c)| c + radius * (2.0 * t - 1.0))
                .collect()
        };
        let x = point(&u[..n]);
        let y = point(&u[n..]);
        if in_open_ball(&x, center, radius)
            && in_open_ball(&y, center, radius)
            && within.contains_open(&x)
            && within.contains_open(&y)
        {
            out.push((x, y));
            if out.len() == count {
                break;
            }
        }
    }
    out
}

fn in_open_ball(x: &[f64], center: &[f64], radius: f64) -> bool {
    norm(&crate::linalg::sub(x, center)) < radius
}

/// Barycentric weights `i/depth` over `k` vertices: the vertices first, then
/// the remaining grid points in lexicographic order of their numerators.
pub fn simplex_grid(k: usize, depth: usize) -> Vec<Vec<f64>> {
    if k == 0 {
        return Vec::new();
    }
    if k == 1 {
        return vec![vec![1.0]];
    }
    let mut out: Vec<Vec<f64>> = (0..k)
        .map(|i| {
            let mut w = vec![0.0; k];
            w[i] = 1.0;
            w
        })
        .collect();
    let mut counts = vec![0usize; k];
    fn rec(
        slot: usize,
        left: usize,
        depth: usize,
        counts: &mut Vec<usize>,
        out: &mut Vec<Vec<f64>>,
    ) {
        let k = counts.len();
        if slot == k - 1 {
            counts[slot] = left;
            if counts.iter().filter(|&&c| c > 0).count() > 1 {
                out.push(counts.iter().map(|&c| c as f64 / depth as f64).collect());
            }
            return;
        }
        for c in (0..=left).rev() {
            counts[slot] = c;
            rec(slot + 1, left - c, depth, counts, out);
        }
    }
    rec(0, depth, depth, &mut counts, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_box(n: usize) -> DomainBox {
        DomainBox::new(vec![-1.0; n], vec![1.0; n]).unwrap()
    }

    #[test]
    fn golden_ratio_for_one_dimension() {
        let g = generalized_golden_ratio(1);
        assert!((g - (1.0 + 5f64.sqrt()) / 2.0).abs() < 1e-12);
        let plastic = generalized_golden_ratio(2);
        assert!((plastic.powi(3) - plastic - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sequences_are_deterministic_and_prefix_stable() {
        let a: Vec<_> = UnitSequence::new(2, true, 7).take(50).collect();
        let b: Vec<_> = UnitSequence::new(2, true, 7).take(80).collect();
        assert_eq!(a[..], b[..50]);
        let c: Vec<_> = UnitSequence::new(2, true, 8).take(50).collect();
        assert_ne!(a, c);
        let u: Vec<_> = UnitSequence::new(5, false, 7).take(10).collect();
        assert_eq!(
            u,
            UnitSequence::new(5, false, 7).take(10).collect::<Vec<_>>()
        );
    }

    #[test]
    fn ball_samples_stay_inside() {
        let pts = sample_ball(&[0.0, 0.0], 0.25, &unit_box(2), 500, 3);
        assert_eq!(pts.len(), 500);
        assert!(pts.iter().all(|p| norm(p) < 0.25));
        let pairs = sample_ball_pairs(&[0.0], 0.5, &unit_box(1), 300, 3);
        assert_eq!(pairs.len(), 300);
        assert!(pairs
            .iter()
            .all(|(x, y)| x[0].abs() < 0.5 && y[0].abs() < 0.5));
    }

    #[test]
    fn ball_is_clipped_by_domain() {
        let pts = sample_ball(&[0.9], 0.5, &unit_box(1), 200, 1);
        assert!(pts.iter().all(|p| p[0] < 1.0));
    }

    #[test]
    fn low_discrepancy_covers_interval() {
        let pts = sample_box(&unit_box(1), 1000, 42);
        let mut bins = [0usize; 10];
        for p in &pts {
            bins[(((p[0] + 1.0) / 2.0) * 10.0) as usize] += 1;
        }
        assert!(bins.iter().all(|&b| (95..=105).contains(&b)), "{bins:?}");
    }

    #[test]
    fn grid_lists_vertices_first() {
        let g = simplex_grid(2, 4);
        assert_eq!(g.len(), 5);
        assert_eq!(g[0], vec![1.0, 0.0]);
        assert_eq!(g[1], vec![0.0, 1.0]);
        assert!(g
            .iter()
            .all(|w| (w.iter().sum::<f64>() - 1.0).abs() < 1e-15));
        // C(8 + 2, 2) = 45 points for three vertices at depth 8.
        assert_eq!(simplex_grid(3, 8).len(), 45);
        assert_eq!(simplex_grid(1, 8), vec![vec![1.0]]);
    }

    #[test]
    fn stream_seeds_differ_by_label() {
        assert_ne!(stream_seed(42, "ball"), stream_seed(42, "pairs"));
        assert_eq!(stream_seed(42, "ball"), stream_seed(42, "ball"));
    }
}
