//! Angle-bisector subdivision on the simplex of angle triples.
//!
//! Cutting a triangle along its three bisectors gives six children; their
//! angles are affine images of the parent's. The chain can be run either by
//! picking one of the six children uniformly, or by always applying the first
//! map and then permuting the result uniformly at random. The second form keeps
//! the law of every generation exchangeable, which is what the moment
//! estimates below rely on.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{simplex_distance, AngleTriple};
use crate::rng::RandomSource;
use crate::stats::StreamingMoments;

/// Replicas per work unit; fixed so reductions are schedule independent.
pub(crate) const CHUNK: usize = 4096;

/// The six children's angles, in the order: bottom-left, then around the
/// incentre (pairs share the halved angle `a`, `b`, `c` respectively).
pub fn bisector_children(t: AngleTriple) -> [AngleTriple; 6] {
    let (a, b, c) = (t.a, t.b, t.c);
    [
        [a / 2.0, c + b / 2.0, (a + b) / 2.0],
        [a / 2.0, b + c / 2.0, (a + c) / 2.0],
        [b / 2.0, a + c / 2.0, (b + c) / 2.0],
        [b / 2.0, c + a / 2.0, (a + b) / 2.0],
        [c / 2.0, b + a / 2.0, (a + c) / 2.0],
        [c / 2.0, a + b / 2.0, (b + c) / 2.0],
    ]
    .map(|v| AngleTriple::from_array(v).renormalized())
}

/// The six maps applied to a displacement `d` (sum zero). They are linear, so
/// `f_i(u) - f_i(v) = f_i(u - v)`.
fn child_displacements(d: [f64; 3]) -> [[f64; 3]; 6] {
    let [a, b, c] = d;
    [
        [a / 2.0, c + b / 2.0, (a + b) / 2.0],
        [a / 2.0, b + c / 2.0, (a + c) / 2.0],
        [b / 2.0, a + c / 2.0, (b + c) / 2.0],
        [b / 2.0, c + a / 2.0, (a + b) / 2.0],
        [c / 2.0, b + a / 2.0, (a + c) / 2.0],
        [c / 2.0, a + b / 2.0, (b + c) / 2.0],
    ]
}

/// The first map, `(a/2, c + b/2, (a+b)/2)`.
pub fn base_map(t: AngleTriple) -> AngleTriple {
    bisector_children(t)[0]
}

/// The six permutations, as index maps: output `k` takes input `perm[k]`.
pub const PERMUTATIONS: [[usize; 3]; 6] = [
    [0, 1, 2],
    [1, 2, 0],
    [2, 0, 1],
    [2, 1, 0],
    [1, 0, 2],
    [0, 2, 1],
];

pub fn permute(t: AngleTriple, which: usize) -> AngleTriple {
    let v = t.to_array();
    let p = PERMUTATIONS[which];
    AngleTriple::from_array([v[p[0]], v[p[1]], v[p[2]]])
}

/// Base map followed by a uniformly chosen permutation.
pub fn bisector_step_permutation(t: AngleTriple, src: &mut RandomSource) -> AngleTriple {
    permute(base_map(t), src.next_below(6) as usize)
}

/// One of the six children, uniformly.
pub fn bisector_step_child(t: AngleTriple, src: &mut RandomSource) -> AngleTriple {
    bisector_children(t)[src.next_below(6) as usize]
}

/// Average over the six maps of the log Lipschitz ratio at the pair `(u, v)`.
pub fn pairwise_contraction(u: AngleTriple, v: AngleTriple) -> Result<f64> {
    let ratios = contraction_log_ratios(u, v)?;
    Ok(ratios.iter().sum::<f64>() / 6.0)
}

/// `log(|f_i(u) - f_i(v)| / |u - v|)` for each of the six maps.
pub fn contraction_log_ratios(u: AngleTriple, v: AngleTriple) -> Result<[f64; 6]> {
    let d = [u.a - v.a, u.b - v.b, u.c - v.c];
    let base = simplex_distance(u, v);
    if base == 0.0 {
        return Err(Error::ZeroDisplacement);
    }
    Ok(child_displacements(d).map(|w| (w[0] * w[0] + w[1] * w[1] + w[2] * w[2]).sqrt().ln() - base.ln()))
}

/// Sums of the log ratios over the map pairs (1,2), (3,4), (5,6).
pub fn pair_sums(ratios: &[f64; 6]) -> [f64; 3] {
    [ratios[0] + ratios[1], ratios[2] + ratios[3], ratios[4] + ratios[5]]
}

/// Which dynamics to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dynamics {
    Permutation,
    UniformChild,
}

/// Runs one chain for `n_steps` from `start`.
pub fn run_chain(start: AngleTriple, n_steps: u64, dynamics: Dynamics, src: &mut RandomSource) -> AngleTriple {
    let mut t = start;
    for _ in 0..n_steps {
        t = match dynamics {
            Dynamics::Permutation => bisector_step_permutation(t, src),
            Dynamics::UniformChild => bisector_step_child(t, src),
        };
    }
    t
}

/// Final states of `n_replicas` independent chains from the equilateral point.
/// Replica `i` uses stream `i` of `seed`.
pub fn simulate_replicas(n_steps: u64, n_replicas: usize, seed: u64, dynamics: Dynamics) -> Vec<AngleTriple> {
    (0..n_replicas)
        .into_par_iter()
        .with_min_len(CHUNK)
        .map(|i| {
            let mut src = RandomSource::new(seed, i as u64);
            run_chain(AngleTriple::EQUILATERAL, n_steps, dynamics, &mut src)
        })
        .collect()
}

/// Moments of the limiting angle law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BisectorMoments {
    /// Mean of the first component.
    pub mean_a: f64,
    /// Mean of `(a^2 + b^2 + c^2) / 3`.
    pub second_a: f64,
    /// Mean of `(ab + bc + ca) / 3`.
    pub cross_ab: f64,
    pub var_a: f64,
    pub cov_ab: f64,
    pub n_samples: u64,
    pub stderr_mean: f64,
    pub stderr_second: f64,
    pub stderr_cross: f64,
}

/// Mergeable per-replica sums behind [`BisectorMoments`].
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MomentAccumulator {
    pub first: StreamingMoments,
    pub second: StreamingMoments,
    pub cross: StreamingMoments,
}

impl MomentAccumulator {
    pub fn push(&mut self, t: AngleTriple) {
        self.first.push(t.a);
        self.second.push((t.a * t.a + t.b * t.b + t.c * t.c) / 3.0);
        self.cross.push((t.a * t.b + t.b * t.c + t.c * t.a) / 3.0);
    }

    pub fn merge(&self, other: &Self) -> Self {
        Self {
            first: self.first.merge(&other.first),
            second: self.second.merge(&other.second),
            cross: self.cross.merge(&other.cross),
        }
    }

    pub fn finish(&self) -> Result<BisectorMoments> {
        if self.first.count == 0 {
            return Err(Error::EmptySample);
        }
        let mean_a = self.first.mean;
        let second_a = self.second.mean;
        let cross_ab = self.cross.mean;
        Ok(BisectorMoments {
            mean_a,
            second_a,
            cross_ab,
            var_a: second_a - mean_a * mean_a,
            cov_ab: cross_ab - mean_a * mean_a,
            n_samples: self.first.count,
            stderr_mean: self.first.std_error(),
            stderr_second: self.second.std_error(),
            stderr_cross: self.cross.std_error(),
        })
    }
}

/// Accumulates moments over a sample, chunk by chunk in index order.
pub fn moments_of(samples: &[AngleTriple]) -> Result<BisectorMoments> {
    samples
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc = MomentAccumulator::default();
            chunk.iter().for_each(|&t| acc.push(t));
            acc
        })
        .collect::<Vec<_>>()
        .iter()
        .fold(MomentAccumulator::default(), |a, b| a.merge(b))
        .finish()
}

/// Runs `n_replicas` permutation-dynamics chains for `n_steps` from the
/// equilateral start and returns the moments of their final states.
pub fn estimate_moments(n_steps: u64, n_replicas: usize, seed: u64) -> Result<BisectorMoments> {
    if n_steps == 0 || n_replicas == 0 {
        return Err(Error::InvalidArgument("n_steps and n_replicas must be positive".into()));
    }
    let chunks = n_replicas.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|k| {
            let mut acc = MomentAccumulator::default();
            for i in (k * CHUNK)..((k + 1) * CHUNK).min(n_replicas) {
                let mut src = RandomSource::new(seed, i as u64);
                acc.push(run_chain(AngleTriple::EQUILATERAL, n_steps, Dynamics::Permutation, &mut src));
            }
            acc
        })
        .collect::<Vec<_>>()
        .iter()
        .fold(MomentAccumulator::default(), |a, b| a.merge(b))
        .finish()
}

/// Stationary value of `E a^2`.
pub const SECOND_MOMENT: f64 = 1.0 / 7.0;
/// Stationary value of `E[a b]`.
pub const CROSS_MOMENT: f64 = 2.0 / 21.0;
pub const VARIANCE: f64 = 2.0 / 63.0;
pub const COVARIANCE: f64 = -1.0 / 63.0;

/// Residual of the one-step self-consistency relation for the second moment,
/// `s - [s/4 + E(c + b/2)^2 + E(a + b)^2 / 4] / 3`, written with exchangeable
/// moments `s = E a^2`, `m = E[ab]`.
pub fn second_moment_recursion_residual(second: f64, cross: f64) -> f64 {
    // E(c + b/2)^2 = 5s/4 + m, E(a + b)^2 = 2s + 2m
    let rhs = (second / 4.0 + (1.25 * second + cross) + (2.0 * second + 2.0 * cross) / 4.0) / 3.0;
    second - rhs
}

/// Largest number of samples sharing one value once rounded to `resolution`.
///
/// A continuous law gives a small multiplicity (a few birthday collisions);
/// an atom of mass `p` gives roughly `p n`. This is a screening heuristic only.
pub fn max_multiplicity(values: &[f64], resolution: f64) -> usize {
    let mut keys: Vec<i64> = values.iter().map(|v| (v / resolution).round() as i64).collect();
    keys.sort_unstable();
    keys.chunk_by(|a, b| a == b).map(<[i64]>::len).max().unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn close(t: AngleTriple, want: [f64; 3]) {
        for (x, w) in t.to_array().iter().zip(want) {
            assert_abs_diff_eq!(*x, w, epsilon = 1e-15);
        }
    }

    #[test]
    fn first_child_examples() {
        close(bisector_children(AngleTriple::EQUILATERAL)[0], [1.0 / 6.0, 0.5, 1.0 / 3.0]);
        close(bisector_children(AngleTriple::new(1.0, 0.0, 0.0).unwrap())[0], [0.5, 0.0, 0.5]);
        close(
            bisector_children(AngleTriple::new(0.5, 0.25, 0.25).unwrap())[0],
            [0.25, 0.375, 0.375],
        );
    }

    #[test]
    fn children_stay_on_simplex() {
        let t = AngleTriple::new(0.2, 0.3, 0.5).unwrap();
        for c in bisector_children(t) {
            assert!(c.is_valid(), "{c:?}");
        }
    }

    #[test]
    fn identity_permutation_is_base_map() {
        close(permute(base_map(AngleTriple::EQUILATERAL), 0), [1.0 / 6.0, 0.5, 1.0 / 3.0]);
    }

    #[test]
    fn permutation_step_preserves_multiset() {
        let mut src = RandomSource::new(3, 0);
        for _ in 0..50 {
            let t = bisector_step_permutation(AngleTriple::EQUILATERAL, &mut src);
            let s = t.sorted();
            assert_abs_diff_eq!(s[0], 1.0 / 6.0, epsilon = 1e-15);
            assert_abs_diff_eq!(s[1], 1.0 / 3.0, epsilon = 1e-15);
            assert_abs_diff_eq!(s[2], 0.5, epsilon = 1e-15);
        }
    }

    #[test]
    fn corner_child_is_one_of_six_images() {
        let corner = AngleTriple::new(1.0, 0.0, 0.0).unwrap();
        let images = bisector_children(corner);
        let mut src = RandomSource::new(4, 0);
        for _ in 0..20 {
            let t = bisector_step_child(corner, &mut src);
            assert!(images.contains(&t));
        }
    }

    #[test]
    fn child_frequencies() {
        let mut src = RandomSource::new(8, 0);
        let kids = bisector_children(AngleTriple::new(0.2, 0.3, 0.5).unwrap());
        let mut counts = [0usize; 6];
        let n = 100_000;
        for _ in 0..n {
            let t = bisector_step_child(AngleTriple::new(0.2, 0.3, 0.5).unwrap(), &mut src);
            let k = kids.iter().position(|&c| c == t).unwrap();
            counts[k] += 1;
        }
        for c in counts {
            // 3 sigma of a binomial(1e5, 1/6) frequency is about 0.0035
            assert!((c as f64 / n as f64 - 1.0 / 6.0).abs() < 0.005, "{counts:?}");
        }
    }

    #[test]
    fn zero_displacement() {
        let e = AngleTriple::EQUILATERAL;
        assert_eq!(pairwise_contraction(e, e), Err(Error::ZeroDisplacement));
    }

    #[test]
    fn contraction_sign_symmetry() {
        let u = AngleTriple::new(0.3, 0.4, 0.3).unwrap();
        let v = AngleTriple::new(0.4, 0.3, 0.3).unwrap();
        let w = AngleTriple::new(0.2, 0.5, 0.3).unwrap();
        // displacements (-x, x, 0) and (x, -x, 0)
        let a = pairwise_contraction(u, v).unwrap();
        let b = pairwise_contraction(u, w).unwrap();
        assert_abs_diff_eq!(a, b, epsilon = 1e-12);
    }

    #[test]
    fn contraction_along_zero_first_component() {
        // displacement (0, y, -y): maps 1, 2, 3 and 6 shrink by exactly 1/2
        let u = AngleTriple::new(0.2, 0.5, 0.3).unwrap();
        let v = AngleTriple::new(0.2, 0.4, 0.4).unwrap();
        let r = contraction_log_ratios(u, v).unwrap();
        let half = 0.5f64.ln();
        for k in [0, 1, 2, 5] {
            assert_abs_diff_eq!(r[k], half, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(pair_sums(&r)[0], 0.25f64.ln(), epsilon = 1e-12);
        assert!(pairwise_contraction(u, v).unwrap() <= (3f64.sqrt() / 2.0).ln());
    }

    #[test]
    fn pair_sums_stay_well_below_log_three_quarters() {
        // every lattice pair on the simplex; the bound log(3/4) is never attained
        let n = 24;
        let pts: Vec<AngleTriple> = (0..=n)
            .flat_map(|i| (0..=n - i).map(move |j| (i, j)))
            .map(|(i, j)| AngleTriple::from_array([i as f64 / n as f64, j as f64 / n as f64, (n - i - j) as f64 / n as f64]))
            .collect();
        let mut worst = f64::NEG_INFINITY;
        for (k, &u) in pts.iter().enumerate() {
            for &v in &pts[k + 1..] {
                let r = contraction_log_ratios(u, v).unwrap();
                worst = pair_sums(&r).into_iter().fold(worst, f64::max);
            }
        }
        assert!(worst <= 0.75f64.ln());
        assert!((worst - (-0.539)).abs() < 0.01, "{worst}");
    }

    #[test]
    fn recursion_residual_vanishes_at_stationary_moments() {
        assert_abs_diff_eq!(
            second_moment_recursion_residual(SECOND_MOMENT, CROSS_MOMENT),
            0.0,
            epsilon = 1e-15
        );
        assert!(second_moment_recursion_residual(0.15, (1.0 - 0.45) / 6.0).abs() > 1e-3);
    }

    #[test]
    fn multiplicity_detects_atom() {
        let mut src = RandomSource::new(1, 0);
        let mut v: Vec<f64> = (0..10_000).map(|_| src.next_uniform()).collect();
        assert!(max_multiplicity(&v, 1e-9) <= 2);
        v.extend(std::iter::repeat(0.25).take(500));
        assert!(max_multiplicity(&v, 1e-9) >= 500);
    }

    #[test]
    fn estimate_rejects_zero_sizes() {
        assert!(estimate_moments(0, 10, 1).is_err());
        assert!(estimate_moments(10, 0, 1).is_err());
    }
}
