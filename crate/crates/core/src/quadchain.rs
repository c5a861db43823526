//! Quadrilateral midpoint subdivision.
//!
//! A convex quadrilateral `ABCD` is cut by the two lines joining midpoints of
//! opposite sides into `AEMH`, `EBFM`, `MFCG`, `HMGD`; one child is kept and
//! doubled in size. Along the chain the pair of "horizontal" side vectors
//! `(B - A, C - D)` follows a two-map recursion in which the new vector is
//! always the average of the old two, so the pair collapses at rate `2^-n`
//! onto a point distributed uniformly on the initial segment.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Quadrilateral, Vec2};
use crate::rng::RandomSource;

/// Reduced state of the chain: an unordered pair of side vectors.
///
/// `d = v - u` is carried separately. Each step maps it to `+-d/2`, which is
/// exact in binary floating point, so the gap halves exactly however small it
/// gets relative to `u`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[repr(C)]
pub struct PairState {
    pub u: Vec2,
    pub v: Vec2,
    pub d: Vec2,
    pub step: u64,
}

impl PairState {
    pub fn new(u: Vec2, v: Vec2) -> Self {
        Self { u, v, d: v - u, step: 0 }
    }

    pub fn from_horizontal(q: &Quadrilateral) -> Self {
        let (u, v) = q.horizontal_pair();
        Self::new(u, v)
    }

    pub fn from_vertical(q: &Quadrilateral) -> Self {
        let (u, v) = q.vertical_pair();
        Self::new(u, v)
    }

    pub fn gap(&self) -> f64 {
        self.d.norm()
    }

    /// True if `{u, v}` equals `{p, q}` as unordered pairs within `tol`.
    pub fn same_pair(&self, p: Vec2, q: Vec2, tol: f64) -> bool {
        let close = |a: Vec2, b: Vec2| (a - b).norm() <= tol;
        (close(self.u, p) && close(self.v, q)) || (close(self.u, q) && close(self.v, p))
    }
}

/// Child `index` (0..4 = AEMH, EBFM, MFCG, HMGD), doubled about its centroid.
pub fn quad_child(q: &Quadrilateral, index: usize) -> Result<Quadrilateral> {
    if index > 3 {
        return Err(Error::InvalidArgument(format!("child index {index} not in 0..4")));
    }
    if q.signed_area() == 0.0 {
        return Err(Error::DegenerateQuadrilateral);
    }
    let e = q.a.midpoint(q.b);
    let f = q.b.midpoint(q.c);
    let g = q.c.midpoint(q.d);
    let h = q.d.midpoint(q.a);
    let m = segment_intersection(e, g, f, h).ok_or(Error::DegenerateQuadrilateral)?;
    let [p0, p1, p2, p3] = match index {
        0 => [q.a, e, m, h],
        1 => [e, q.b, f, m],
        2 => [m, f, q.c, g],
        _ => [h, m, g, q.d],
    };
    let centre = (p0 + p1 + p2 + p3) * 0.25;
    let grow = |p: Vec2| centre + (p - centre) * 2.0;
    Ok(Quadrilateral {
        a: grow(p0),
        b: grow(p1),
        c: grow(p2),
        d: grow(p3),
    })
}

/// Intersection of lines `p0 p1` and `q0 q1`; `None` if parallel.
fn segment_intersection(p0: Vec2, p1: Vec2, q0: Vec2, q1: Vec2) -> Option<Vec2> {
    let r = p1 - p0;
    let s = q1 - q0;
    let denom = r.cross(s);
    if denom == 0.0 {
        return None;
    }
    let t = (q0 - p0).cross(s) / denom;
    Some(p0 + r * t)
}

/// Child index from two fair bits: `horizontal` picks which side of the
/// horizontal pair survives, `vertical` likewise for the vertical pair.
pub fn child_index(horizontal: bool, vertical: bool) -> usize {
    match (horizontal, vertical) {
        (false, false) => 0,
        (false, true) => 1,
        (true, true) => 2,
        (true, false) => 3,
    }
}

/// One step of the reduced recursion: `coin = false` keeps `u`, `true` keeps
/// `v`; the other slot becomes the midpoint.
pub fn pair_step(s: PairState, coin: bool) -> PairState {
    let (kept, d) = if coin { (s.v, -s.d * 0.5) } else { (s.u, s.d * 0.5) };
    PairState {
        u: kept,
        v: kept + d,
        d,
        step: s.step + 1,
    }
}

/// Runs `n` fair-coin steps and returns the endpoint created at the last one.
pub fn simulate_pair_limit(s0: PairState, src: &mut RandomSource, n: u64) -> Result<Vec2> {
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one step".into()));
    }
    let mut s = s0;
    for _ in 0..n {
        s = pair_step(s, src.next_bit());
    }
    Ok(s.v)
}

/// Position of `p` along segment `from -> to`, by orthogonal projection.
pub fn segment_parameter(p: Vec2, from: Vec2, to: Vec2) -> f64 {
    let d = to - from;
    (p - from).dot(d) / d.norm_sq()
}

/// Distance from `p` to the closed segment `[from, to]`.
pub fn distance_to_segment(p: Vec2, from: Vec2, to: Vec2) -> f64 {
    let t = segment_parameter(p, from, to).clamp(0.0, 1.0);
    (p - (from + (to - from) * t)).norm()
}

/// `(|(B-A)-(C-D)| + |(D-A)-(C-B)|) / perimeter`; zero exactly for parallelograms.
pub fn parallelogram_defect(q: &Quadrilateral) -> f64 {
    let (u, v) = q.horizontal_pair();
    let (p, r) = q.vertical_pair();
    ((u - v).norm() + (p - r).norm()) / q.perimeter()
}

/// Bound on the defect of every descendant, scaled by `2^-n` at generation `n`.
///
/// Each side vector of a descendant lies on the segment joining the initial
/// pair it came from, so the perimeter never drops below twice the sum of the
/// distances from the origin to those two segments.
pub fn defect_scale(q: &Quadrilateral) -> f64 {
    let (u, v) = q.horizontal_pair();
    let (p, r) = q.vertical_pair();
    let floor = 2.0 * (distance_to_segment(Vec2::ZERO, u, v) + distance_to_segment(Vec2::ZERO, p, r));
    ((u - v).norm() + (p - r).norm()) / floor
}

/// One row of a vertex-chain trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub step: u64,
    pub ux: f64,
    pub uy: f64,
    pub vx: f64,
    pub vy: f64,
    pub defect: f64,
}

/// Full vertex-level run for `steps` generations, recording `(B - A, C - D)`
/// and the defect at every generation including the start.
pub fn vertex_trajectory(q0: &Quadrilateral, steps: u64, src: &mut RandomSource) -> Result<Vec<TrajectoryRow>> {
    let mut q = *q0;
    let mut rows = Vec::with_capacity(steps as usize + 1);
    let record = |step: u64, q: &Quadrilateral| {
        let (u, v) = q.horizontal_pair();
        TrajectoryRow {
            step,
            ux: u.x,
            uy: u.y,
            vx: v.x,
            vy: v.y,
            defect: parallelogram_defect(q),
        }
    };
    rows.push(record(0, &q));
    for step in 1..=steps {
        let h = src.next_bit();
        let w = src.next_bit();
        q = quad_child(&q, child_index(h, w))?;
        rows.push(record(step, &q));
    }
    Ok(rows)
}
