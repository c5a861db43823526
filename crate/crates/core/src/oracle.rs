//! Numerical integration used to cross-check the closed forms.
//!
//! `integrate_1d` is globally adaptive Gauss-Kronrod (7/15 points): the
//! subinterval with the largest `|K15 - G7|` is bisected until the summed
//! estimate drops below the tolerance. Nodes never touch the endpoints, so
//! integrable logarithmic endpoint singularities are handled by refinement.
//! Multi-dimensional integrals nest the 1-D rule.

#![allow(clippy::excessive_precision)]

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RandomSource;

/// Offset applied to interval ends where an integrand has a log singularity.
pub const ENDPOINT_OFFSET: f64 = 1e-12;

/// Absolute tolerance for a single 1-D pass inside nested integrals.
pub const NESTED_TOL: f64 = 1e-10;

const DEFAULT_MAX_INTERVALS: usize = 4000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegrationResult {
    pub value: f64,
    pub error_estimate: f64,
    pub evaluations: usize,
}

// Kronrod nodes on [0, 1] (symmetric), from QUADPACK qk15.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.000_000_000_000_000_000_000_000_000_000_000,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error.total_cmp(&other.error) == Ordering::Equal
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gauss_kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Segment {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    let value = kronrod * half;
    let error = ((kronrod - gauss) * half).abs();
    Segment { a, b, value, error }
}

/// Adaptive integral of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn integrate_1d<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<IntegrationResult> {
    integrate_1d_with_budget(&f, a, b, tol, DEFAULT_MAX_INTERVALS)
}

/// As [`integrate_1d`], first splitting `[a, b]` at `breaks` (kinks or
/// branch switches of the integrand). Break points outside `(a, b)` are ignored.
pub fn integrate_1d_breaks<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    tol: f64,
) -> Result<IntegrationResult> {
    let mut pts: Vec<f64> = breaks.iter().copied().filter(|&p| p > a && p < b).collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let mut edges = Vec::with_capacity(pts.len() + 2);
    edges.push(a);
    edges.extend(pts);
    edges.push(b);
    let initial: Vec<(f64, f64)> = edges.windows(2).map(|w| (w[0], w[1])).collect();
    adaptive(&f, &initial, tol, DEFAULT_MAX_INTERVALS)
}

pub fn integrate_1d_with_budget<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    tol: f64,
    max_intervals: usize,
) -> Result<IntegrationResult> {
    if !(a < b) {
        return Err(Error::InvalidArgument(format!("need a < b, got [{a}, {b}]")));
    }
    adaptive(f, &[(a, b)], tol, max_intervals)
}

fn adaptive<F: Fn(f64) -> f64>(
    f: &F,
    initial: &[(f64, f64)],
    tol: f64,
    max_intervals: usize,
) -> Result<IntegrationResult> {
    let mut heap = BinaryHeap::new();
    let mut evaluations = 0usize;
    for &(a, b) in initial {
        if b > a {
            heap.push(gauss_kronrod(f, a, b));
            evaluations += 15;
        }
    }
    loop {
        let (value, error): (f64, f64) = heap
            .iter()
            .fold((0.0, 0.0), |(v, e), s| (v + s.value, e + s.error));
        if !value.is_finite() {
            return Err(Error::NonConvergence {
                value,
                error_estimate: error,
                evaluations,
            });
        }
        if error <= tol {
            // Sum in a fixed order so results do not depend on heap layout.
            let mut segs: Vec<Segment> = heap.into_vec();
            segs.sort_by(|p, q| p.a.total_cmp(&q.a));
            let value = segs.iter().map(|s| s.value).sum();
            return Ok(IntegrationResult {
                value,
                error_estimate: error,
                evaluations,
            });
        }
        if heap.len() >= max_intervals {
            return Err(Error::NonConvergence {
                value,
                error_estimate: error,
                evaluations,
            });
        }
        let worst = heap.pop().expect("non-empty heap");
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) {
            // interval cannot be split further; accept its estimate as is
            heap.push(Segment { error: 0.0, ..worst });
            continue;
        }
        heap.push(gauss_kronrod(f, worst.a, mid));
        heap.push(gauss_kronrod(f, mid, worst.b));
        evaluations += 30;
    }
}

/// Iterated integral over the unit square or cube.
///
/// Each 1-D pass runs at `tol`; inner passes that fail to converge propagate
/// their error.
pub fn integrate_cube<F: Fn(&[f64]) -> f64>(f: F, dims: usize, tol: f64) -> Result<IntegrationResult> {
    match dims {
        2 => {
            let evals = std::cell::Cell::new(0usize);
            let failure = std::cell::RefCell::new(None);
            let outer = integrate_1d(
                |a| match integrate_1d(|b| f(&[a, b]), 0.0, 1.0, tol) {
                    Ok(r) => {
                        evals.set(evals.get() + r.evaluations);
                        r.value
                    }
                    Err(e) => {
                        failure.borrow_mut().get_or_insert(e);
                        f64::NAN
                    }
                },
                0.0,
                1.0,
                tol,
            );
            finish_nested(outer, failure.into_inner(), evals.get())
        }
        3 => {
            let evals = std::cell::Cell::new(0usize);
            let failure = std::cell::RefCell::new(None);
            let outer = integrate_1d(
                |a| {
                    let mid = integrate_1d(
                        |b| match integrate_1d(|c| f(&[a, b, c]), 0.0, 1.0, tol) {
                            Ok(r) => {
                                evals.set(evals.get() + r.evaluations);
                                r.value
                            }
                            Err(e) => {
                                failure.borrow_mut().get_or_insert(e);
                                f64::NAN
                            }
                        },
                        0.0,
                        1.0,
                        tol,
                    );
                    match mid {
                        Ok(r) => r.value,
                        Err(e) => {
                            failure.borrow_mut().get_or_insert(e);
                            f64::NAN
                        }
                    }
                },
                0.0,
                1.0,
                tol,
            );
            finish_nested(outer, failure.into_inner(), evals.get())
        }
        _ => Err(Error::InvalidArgument(format!("dims must be 2 or 3, got {dims}"))),
    }
}

fn finish_nested(
    outer: Result<IntegrationResult>,
    inner_failure: Option<Error>,
    inner_evals: usize,
) -> Result<IntegrationResult> {
    if let Some(e) = inner_failure {
        return Err(e);
    }
    let r = outer?;
    Ok(IntegrationResult {
        value: r.value,
        error_estimate: r.error_estimate,
        evaluations: r.evaluations.max(1) + inner_evals,
    })
}

/// Plain Monte Carlo mean of `f` over the unit hypercube.
///
/// `error_estimate` is three standard errors.
pub fn mc_integrate<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    dims: usize,
    n: usize,
    src: &mut RandomSource,
) -> Result<IntegrationResult> {
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: n });
    }
    if dims == 0 {
        return Err(Error::InvalidArgument("dims must be positive".into()));
    }
    let mut point = vec![0.0; dims];
    let mut acc = crate::stats::StreamingMoments::new();
    for _ in 0..n {
        for p in point.iter_mut() {
            *p = src.next_uniform();
        }
        acc.push(f(&point));
    }
    Ok(IntegrationResult {
        value: acc.mean,
        error_estimate: 3.0 * acc.std_dev() / (n as f64).sqrt(),
        evaluations: n,
    })
}
