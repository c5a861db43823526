//! C ABI for `subdivlab`.
//!
//! Every fallible function returns an [`SdlStatus`] and writes its result
//! through an out-pointer. Random sources are opaque handles created with
//! [`sdl_random_new`] and released with [`sdl_random_free`]. Panics never
//! cross the boundary; they surface as [`SdlStatus::Panic`].

use std::os::raw::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};

use subdivlab::geometry::{AngleTriple, Quadrilateral, ShapeCoord, UniformTriple, Vec2};
use subdivlab::{bisector, quadchain, subtriangle, Error, RandomSource};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdlStatus {
    Ok = 0,
    NullPointer = 1,
    NullTriangle = 2,
    DegenerateQuadrilateral = 3,
    NonConvex = 4,
    ZeroDisplacement = 5,
    DegenerateChild = 6,
    ZeroSpread = 7,
    OutOfDomain = 8,
    NonConvergence = 9,
    EmptySample = 10,
    TooFewSamples = 11,
    InvalidArgument = 12,
    Panic = 13,
}

impl From<&Error> for SdlStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::NullTriangle => SdlStatus::NullTriangle,
            Error::DegenerateQuadrilateral => SdlStatus::DegenerateQuadrilateral,
            Error::NonConvex => SdlStatus::NonConvex,
            Error::ZeroDisplacement => SdlStatus::ZeroDisplacement,
            Error::DegenerateChild => SdlStatus::DegenerateChild,
            Error::ZeroSpread => SdlStatus::ZeroSpread,
            Error::OutOfDomain { .. } => SdlStatus::OutOfDomain,
            Error::NonConvergence { .. } => SdlStatus::NonConvergence,
            Error::EmptySample => SdlStatus::EmptySample,
            Error::TooFewSamples { .. } => SdlStatus::TooFewSamples,
            Error::DegenerateAbscissae | Error::UndefinedSlope(_) | Error::InvalidArgument(_) => {
                SdlStatus::InvalidArgument
            }
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdlVec2 {
    pub x: f64,
    pub y: f64,
}

/// Angles normalised to sum 1.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdlAngles {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

/// Apex of a triangle whose longest side is `(0,0)-(1,0)`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdlShape {
    pub x: f64,
    pub y: f64,
}

/// Vertices `a, b, c, d` in counter-clockwise order.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdlQuad {
    pub a: SdlVec2,
    pub b: SdlVec2,
    pub c: SdlVec2,
    pub d: SdlVec2,
}

/// Pair of side vectors; `d = v - u` is tracked exactly.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdlPair {
    pub u: SdlVec2,
    pub v: SdlVec2,
    pub d: SdlVec2,
    pub step: u64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdlUniforms {
    pub xi_a: f64,
    pub xi_b: f64,
    pub xi_c: f64,
}

/// Per-step quantities of the subtriangle chain.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdlStepInfo {
    pub r: f64,
    pub area_ratio: f64,
    pub longest_side: f64,
    pub mu: f64,
    pub nu: f64,
    pub delta: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdlMoments {
    pub mean_a: f64,
    pub second_a: f64,
    pub cross_ab: f64,
    pub var_a: f64,
    pub cov_ab: f64,
    pub stderr_mean: f64,
    pub stderr_second: f64,
    pub stderr_cross: f64,
    pub n_samples: u64,
}

/// Opaque random source.
pub struct SdlRandom(RandomSource);

impl From<SdlVec2> for Vec2 {
    fn from(v: SdlVec2) -> Self {
        Vec2::new(v.x, v.y)
    }
}

impl From<Vec2> for SdlVec2 {
    fn from(v: Vec2) -> Self {
        SdlVec2 { x: v.x, y: v.y }
    }
}

impl From<AngleTriple> for SdlAngles {
    fn from(t: AngleTriple) -> Self {
        SdlAngles { a: t.a, b: t.b, c: t.c }
    }
}

impl From<ShapeCoord> for SdlShape {
    fn from(s: ShapeCoord) -> Self {
        SdlShape { x: s.x, y: s.y }
    }
}

impl From<Quadrilateral> for SdlQuad {
    fn from(q: Quadrilateral) -> Self {
        SdlQuad {
            a: q.a.into(),
            b: q.b.into(),
            c: q.c.into(),
            d: q.d.into(),
        }
    }
}

impl From<quadchain::PairState> for SdlPair {
    fn from(s: quadchain::PairState) -> Self {
        SdlPair {
            u: s.u.into(),
            v: s.v.into(),
            d: s.d.into(),
            step: s.step,
        }
    }
}

impl From<SdlPair> for quadchain::PairState {
    fn from(s: SdlPair) -> Self {
        quadchain::PairState {
            u: s.u.into(),
            v: s.v.into(),
            d: s.d.into(),
            step: s.step,
        }
    }
}

fn angles(t: SdlAngles) -> Result<AngleTriple, Error> {
    AngleTriple::new(t.a, t.b, t.c)
}

fn quad(q: SdlQuad) -> Result<Quadrilateral, Error> {
    Quadrilateral::new(q.a.into(), q.b.into(), q.c.into(), q.d.into())
}

fn uniforms(u: SdlUniforms) -> Result<UniformTriple, Error> {
    UniformTriple::new(u.xi_a, u.xi_b, u.xi_c)
}

/// Runs `f`, writes its value to `out`, and maps errors and panics to codes.
fn guard<T>(out: *mut T, f: impl FnOnce() -> Result<T, Error>) -> SdlStatus {
    if out.is_null() {
        return SdlStatus::NullPointer;
    }
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(v)) => {
            // SAFETY: checked non-null; the caller guarantees it is writable.
            unsafe { out.write(v) };
            SdlStatus::Ok
        }
        Ok(Err(e)) => SdlStatus::from(&e),
        Err(_) => SdlStatus::Panic,
    }
}

/// Static, NUL-terminated description of `status`.
#[no_mangle]
pub extern "C" fn sdl_status_message(status: SdlStatus) -> *const c_char {
    let s: &'static [u8] = match status {
        SdlStatus::Ok => b"ok\0",
        SdlStatus::NullPointer => b"null pointer argument\0",
        SdlStatus::NullTriangle => b"null triangle\0",
        SdlStatus::DegenerateQuadrilateral => b"degenerate quadrilateral\0",
        SdlStatus::NonConvex => b"quadrilateral is not convex\0",
        SdlStatus::ZeroDisplacement => b"zero displacement\0",
        SdlStatus::DegenerateChild => b"degenerate child\0",
        SdlStatus::ZeroSpread => b"zero spread\0",
        SdlStatus::OutOfDomain => b"argument out of domain\0",
        SdlStatus::NonConvergence => b"quadrature did not converge\0",
        SdlStatus::EmptySample => b"empty sample\0",
        SdlStatus::TooFewSamples => b"too few samples\0",
        SdlStatus::InvalidArgument => b"invalid argument\0",
        SdlStatus::Panic => b"internal panic\0",
    };
    s.as_ptr().cast()
}

// ---------------------------------------------------------------- random

/// New random source for (`seed`, `stream`). Free with [`sdl_random_free`].
#[no_mangle]
pub extern "C" fn sdl_random_new(seed: u64, stream: u64) -> *mut SdlRandom {
    Box::into_raw(Box::new(SdlRandom(RandomSource::new(seed, stream))))
}

/// Releases a handle from [`sdl_random_new`]; null is ignored.
///
/// # Safety
/// `rng` must be null or a live handle not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sdl_random_free(rng: *mut SdlRandom) {
    if !rng.is_null() {
        drop(Box::from_raw(rng));
    }
}

/// Next uniform in `[0, 1)`.
///
/// # Safety
/// `rng` must be null or a live handle; `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn sdl_random_uniform(rng: *mut SdlRandom, out: *mut f64) -> SdlStatus {
    let Some(r) = rng.as_mut() else {
        return SdlStatus::NullPointer;
    };
    guard(out, || Ok(r.0.next_uniform()))
}

// ---------------------------------------------------------------- geometry

/// Shape coordinates of the triangle `a b c`.
///
/// # Safety
/// `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn sdl_shape_from_vertices(a: SdlVec2, b: SdlVec2, c: SdlVec2, out: *mut SdlShape) -> SdlStatus {
    guard(out, || subdivlab::shape_from_vertices(a.into(), b.into(), c.into()).map(Into::into))
}

/// Euclidean distance between two angle triples.
///
/// # Safety
/// `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn sdl_simplex_distance(u: SdlAngles, v: SdlAngles, out: *mut f64) -> SdlStatus {
    guard(out, || Ok(subdivlab::simplex_distance(angles(u)?, angles(v)?)))
}

// ---------------------------------------------------------------- quadrilaterals

/// Pair state from the horizontal sides `(B - A, C - D)` of `q`.
///
/// # Safety
/// `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn sdl_pair_from_quad(q: SdlQuad, out: *mut SdlPair) -> SdlStatus {
    guard(out, || Ok(quadchain::PairState::from_horizontal(&quad(q)?).into()))
}

/// One step of the pair recursion: `coin = false` keeps `u`.
///
/// # Safety
/// `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn sdl_pair_step(s: SdlPair, coin: bool, out: *mut SdlPair) -> SdlStatus {
    guard(out, || Ok(quadchain::pair_step(s.into(), coin).into()))
}

/// Child `index` in `0..4` of `q`, doubled about its centroid.
///
/// # Safety
/// `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn sdl_quad_child(q: SdlQuad, index: u32, out: *mut SdlQuad) -> SdlStatus {
    guard(out, || Ok(quadchain::quad_child(&quad(q)?, index as usize)?.into()))
}

/// Normalised distance of `q` from a parallelogram.
///
/// # Safety
/// `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn sdl_parallelogram_defect(q: SdlQuad, out: *mut f64) -> SdlStatus {
    guard(out, || Ok(quadchain::parallelogram_defect(&quad(q)?)))
}

// ---------------------------------------------------------------- bisector

/// The six bisector children of `t`, written to `out[0..6]`.
///
/// # Safety
/// `out` must be null or point to six writable elements.
#[no_mangle]
pub unsafe extern "C" fn sdl_bisector_children(t: SdlAngles, out: *mut SdlAngles) -> SdlStatus {
    guard(out.cast::<[SdlAngles; 6]>(), || {
        Ok(bisector::bisector_children(angles(t)?).map(Into::into))
    })
}

/// Mean log Lipschitz ratio of the six maps on the pair `u, v`.
///
/// # Safety
/// `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn sdl_pairwise_contraction(u: SdlAngles, v: SdlAngles, out: *mut f64) -> SdlStatus {
    guard(out, || bisector::pairwise_contraction(angles(u)?, angles(v)?))
}

/// Moments of one angle after `steps` steps of `replicas` chains.
///
/// # Safety
/// `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn sdl_estimate_moments(steps: u64, replicas: u64, seed: u64, out: *mut SdlMoments) -> SdlStatus {
    guard(out, || {
        let m = bisector::estimate_moments(steps, replicas as usize, seed)?;
        Ok(SdlMoments {
            mean_a: m.mean_a,
            second_a: m.second_a,
            cross_ab: m.cross_ab,
            var_a: m.var_a,
            cov_ab: m.cov_ab,
            stderr_mean: m.stderr_mean,
            stderr_second: m.stderr_second,
            stderr_cross: m.stderr_cross,
            n_samples: m.n_samples,
        })
    })
}

// ---------------------------------------------------------------- subtriangle

/// One subtriangle step; `info` may be null.
///
/// # Safety
/// `out` must be null or writable; `info` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn sdl_subtriangle_step(
    s: SdlShape,
    xi: SdlUniforms,
    out: *mut SdlShape,
    info: *mut SdlStepInfo,
) -> SdlStatus {
    let mut diag = None;
    let status = guard(out, || {
        let (next, d) = subtriangle::step(ShapeCoord::new(s.x, s.y)?, uniforms(xi)?)?;
        diag = Some(d);
        Ok(next.into())
    });
    if let (Some(d), Some(slot)) = (diag, info.as_mut()) {
        *slot = SdlStepInfo {
            r: d.r,
            area_ratio: d.big_r,
            longest_side: d.big_s,
            mu: d.mu,
            nu: d.nu,
            delta: d.delta,
        };
    }
    status
}

/// `I1, I2, I3` at apex abscissa `x`, written to `out[0..3]`.
///
/// # Safety
/// `out` must be null or point to three writable elements.
#[no_mangle]
pub unsafe extern "C" fn sdl_closed_form_i(x: f64, xi_a: f64, xi_b: f64, out: *mut f64) -> SdlStatus {
    guard(out.cast::<[f64; 3]>(), || {
        let (a, b, c) = subtriangle::closed_form_i(x, xi_a, xi_b)?;
        Ok([a, b, c])
    })
}

/// `E[r(x,0) | xi_a, xi_b]`.
///
/// # Safety
/// `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn sdl_cond_r_given_ab(x: f64, xi_a: f64, xi_b: f64, out: *mut f64) -> SdlStatus {
    guard(out, || subtriangle::cond_r_given_ab(x, xi_a, xi_b))
}

/// `E[r(x,0) | xi_a]`.
///
/// # Safety
/// `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn sdl_cond_r_given_a(x: f64, xi_a: f64, out: *mut f64) -> SdlStatus {
    guard(out, || subtriangle::cond_r_given_a(x, xi_a))
}

/// `E log S` for a flat triangle with apex at `x`.
///
/// # Safety
/// `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn sdl_expected_log_s(x: f64, out: *mut f64) -> SdlStatus {
    guard(out, || subtriangle::expected_log_s(x))
}

/// `E log R`.
#[no_mangle]
pub extern "C" fn sdl_expected_log_r() -> f64 {
    subtriangle::expected_log_r()
}

/// Position of `xi_c` within the child's longest side.
///
/// # Safety
/// `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn sdl_chi(mu: f64, nu: f64, xi_c: f64, out: *mut f64) -> SdlStatus {
    guard(out, || subtriangle::chi(mu, nu, xi_c))
}

/// The three terms of `P(chi <= z)` at apex `x`, written to `out[0..3]`.
///
/// # Safety
/// `out` must be null or point to three writable elements.
#[no_mangle]
pub unsafe extern "C" fn sdl_chi_cdf_terms(x: f64, z: f64, out: *mut f64) -> SdlStatus {
    guard(out.cast::<[f64; 3]>(), || {
        let (a, b, c) = subtriangle::chi_cdf_terms(x, z)?;
        Ok([a, b, c])
    })
}
