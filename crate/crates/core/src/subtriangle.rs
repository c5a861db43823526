//! Random-subtriangle chain in shape coordinates.
//!
//! A triangle with vertices `A = (0,0)`, `B = (1,0)`, `C = (x,y)` is replaced by
//! the triangle whose vertices are independent uniform points on its three
//! sides: `A1` on `BC` at ratio `xi_a` from `B`, `B1` on `CA` at `xi_b` from
//! `C`, `C1` on `AB` at `xi_c` from `A`. The height ratio evolves
//! multiplicatively, `y1 = y r` with `r = R / max side^2`, and the chain
//! flattens exponentially fast. In the flat limit the apex abscissa becomes
//! uniform on `[1/2, 1]`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{shape_from_vertices, ShapeCoord, UniformTriple, Vec2};
use crate::rng::RandomSource;
use crate::stats::{fit_slope, StreamingMoments};

/// `E log R = pi^2/9 - 8/3`.
pub fn expected_log_r() -> f64 {
    std::f64::consts::PI.powi(2) / 9.0 - 8.0 / 3.0
}

/// Upper bound on the exponential rate of `y_n`: `pi^2/9 - 1 - log(4)/3`.
pub fn rate_bound() -> f64 {
    std::f64::consts::PI.powi(2) / 9.0 - 1.0 - 4f64.ln() / 3.0
}

/// Squared side lengths `|B1C1|^2, |C1A1|^2, |A1B1|^2` of the child.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[repr(C)]
pub struct SideLengthsSquared {
    pub a2: f64,
    pub b2: f64,
    pub c2: f64,
}

impl SideLengthsSquared {
    pub fn max(&self) -> f64 {
        self.a2.max(self.b2).max(self.c2)
    }

    pub fn min(&self) -> f64 {
        self.a2.min(self.b2).min(self.c2)
    }

    pub fn sum(&self) -> f64 {
        self.a2 + self.b2 + self.c2
    }
}

/// Quantities produced alongside one step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[repr(C)]
pub struct StepDiagnostics {
    /// Height ratio multiplier `y1 / y`.
    pub r: f64,
    /// `xi_a xi_b xi_c + (1-xi_a)(1-xi_b)(1-xi_c)`, the child's area fraction.
    pub big_r: f64,
    /// Longest child side (relative to the unit base).
    pub big_s: f64,
    pub mu: f64,
    pub nu: f64,
    /// Child area.
    pub delta: f64,
}

/// Child vertices for shape `s` and side ratios `xi`.
pub fn child_vertices(s: ShapeCoord, xi: UniformTriple) -> [Vec2; 3] {
    let (x, y) = (s.x, s.y);
    [
        Vec2::new(1.0 - (1.0 - x) * xi.xi_a, y * xi.xi_a),
        Vec2::new(x * (1.0 - xi.xi_b), y * (1.0 - xi.xi_b)),
        Vec2::new(xi.xi_c, 0.0),
    ]
}

pub fn side_lengths_sq(s: ShapeCoord, xi: UniformTriple) -> SideLengthsSquared {
    let (x, y) = (s.x, s.y);
    let (ua, ub, uc) = (xi.xi_a, xi.xi_b, xi.xi_c);
    let sq = |t: f64| t * t;
    SideLengthsSquared {
        a2: sq(x * (1.0 - ub) - uc) + sq(y * (1.0 - ub)),
        b2: sq(1.0 - (1.0 - x) * ua - uc) + sq(y * ua),
        c2: sq(1.0 - (1.0 - x) * ua - x * (1.0 - ub)) + sq(y * (1.0 - ua - ub)),
    }
}

/// `xi_a xi_b xi_c + (1 - xi_a)(1 - xi_b)(1 - xi_c)`.
pub fn area_ratio(xi: UniformTriple) -> f64 {
    xi.xi_a * xi.xi_b * xi.xi_c + (1.0 - xi.xi_a) * (1.0 - xi.xi_b) * (1.0 - xi.xi_c)
}

/// One step in shape coordinates.
pub fn step(s: ShapeCoord, xi: UniformTriple) -> Result<(ShapeCoord, StepDiagnostics)> {
    let sides = side_lengths_sq(s, xi);
    let longest = sides.max();
    if !(longest > 0.0) {
        return Err(Error::DegenerateChild);
    }
    let big_r = area_ratio(xi);
    let r = big_r / longest;
    let x1 = (sides.sum() - 2.0 * sides.min()) / (2.0 * longest);
    let next = ShapeCoord::from_raw(x1.max(1.0 - x1), s.y * r);
    let diag = StepDiagnostics {
        r,
        big_r,
        big_s: longest.sqrt(),
        mu: 1.0 - (1.0 - s.x) * xi.xi_a,
        nu: s.x * (1.0 - xi.xi_b),
        delta: 0.5 * s.y * big_r,
    };
    Ok((next, diag))
}

/// Independent route: build the child triangle from its vertices and normalize it.
pub fn step_via_vertices(s: ShapeCoord, xi: UniformTriple) -> Result<ShapeCoord> {
    if s.y == 0.0 {
        return Err(Error::OutOfDomain { what: "y", value: 0.0 });
    }
    let a = Vec2::new(0.0, 0.0);
    let b = Vec2::new(1.0, 0.0);
    let c = Vec2::new(s.x, s.y);
    // ratios measured from B along BC, from C along CA, from A along AB
    let a1 = b + (c - b) * xi.xi_a;
    let b1 = c + (a - c) * xi.xi_b;
    let c1 = a + (b - a) * xi.xi_c;
    shape_from_vertices(a1, b1, c1).map_err(|_| Error::DegenerateChild)
}

/// Longest child side when `y = 0`, by cases on where `xi_c` falls relative
/// to `nu <= mu`.
pub fn max_side_y0(x: f64, xi: UniformTriple) -> f64 {
    let mu = 1.0 - (1.0 - x) * xi.xi_a;
    let nu = x * (1.0 - xi.xi_b);
    let c = xi.xi_c;
    if c < nu {
        mu - c
    } else if c <= mu {
        mu - nu
    } else {
        c - nu
    }
}

fn check_open_unit(what: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::OutOfDomain { what, value: v })
    }
}

fn positive_log(what: &'static str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v.ln())
    } else {
        Err(Error::OutOfDomain { what, value: v })
    }
}

/// The three pieces of `E[r(x,0) | xi_a, xi_b]`, split by the branch of
/// [`max_side_y0`] that `xi_c` lands in.
pub fn closed_form_i(x: f64, xi_a: f64, xi_b: f64) -> Result<(f64, f64, f64)> {
    check_open_unit("x", x)?;
    check_open_unit("xi_a", xi_a)?;
    check_open_unit("xi_b", xi_b)?;
    let k = xi_a + xi_b - 1.0;
    let lower = 1.0 - xi_a + xi_a * x; // 1 - xi_a (1 - x)
    let gap = xi_b * x + (1.0 - x) * (1.0 - xi_a); // mu - nu
    let upper = 1.0 - x + xi_b * x; // 1 - nu
    let i1 = k * positive_log("I1 log argument", gap / lower)? + (1.0 - xi_b) * xi_a * x / lower;
    let i2 = (xi_a + 1.0 - xi_b) / 2.0;
    let i3 = k * positive_log("I3 log argument", upper / gap)? + xi_a * (1.0 - xi_b) * (1.0 - x) / upper;
    Ok((i1, i2, i3))
}

/// `E[r(x,0) | xi_a, xi_b]` in one expression.
///
/// Combining the rational parts of `I1` and `I3` over the common denominator
/// gives the numerator `xi_a (1 - xi_b) (1 - x^2 (1 - xi_b) - xi_a (1 - x)^2)`.
pub fn cond_r_given_ab(x: f64, xi_a: f64, xi_b: f64) -> Result<f64> {
    check_open_unit("x", x)?;
    check_open_unit("xi_a", xi_a)?;
    check_open_unit("xi_b", xi_b)?;
    let lower = 1.0 - xi_a + xi_a * x;
    let upper = 1.0 - x + xi_b * x;
    let log_term = (xi_a + xi_b - 1.0) * positive_log("log argument", upper / lower)?;
    let numer = xi_a * (1.0 - xi_b) * (1.0 - x * x * (1.0 - xi_b) - xi_a * (1.0 - x) * (1.0 - x));
    Ok(log_term + (xi_a + 1.0 - xi_b) / 2.0 + numer / (lower * upper))
}

/// `E[r(x,0) | xi_a]`.
pub fn cond_r_given_a(x: f64, xi_a: f64) -> Result<f64> {
    check_open_unit("x", x)?;
    check_open_unit("xi_a", xi_a)?;
    let lower = 1.0 - xi_a + xi_a * x;
    let poly = x * (x + 1.0 - xi_a * (1.0 - x) * (2.0 * x + 3.0 - xi_a * (2.0 - x)));
    let logs = (1.0 - x * x) * positive_log("1 - x", 1.0 - x)? + x * x * positive_log("log argument", lower)?;
    Ok((poly + (1.0 - 2.0 * xi_a) * lower * logs) / (2.0 * x * x * lower))
}

/// Which `(1 - x)^3` log factor to use in [`expected_log_s_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogSForm {
    /// `(1 - x)^3 log(1 - x)`, the form that integrates correctly.
    LogOneMinusX,
    /// `(1 - x)^3 log(x)`; integrates to the wrong value except at `x = 1/2`.
    LogX,
}

/// `E log S(x; xi)` for `y = 0`.
pub fn expected_log_s(x: f64) -> Result<f64> {
    expected_log_s_with(x, LogSForm::LogOneMinusX)
}

pub fn expected_log_s_with(x: f64, form: LogSForm) -> Result<f64> {
    if !(x > 0.0 && x <= 1.0) {
        return Err(Error::OutOfDomain { what: "x", value: x });
    }
    if x == 1.0 {
        // removable: x^3 log x / (3 x (1 - x)) -> -1/3; the tail term vanishes in both forms
        return Ok(-0.5);
    }
    let tail = match form {
        LogSForm::LogOneMinusX => (1.0 - x).powi(3) * (1.0 - x).ln(),
        LogSForm::LogX => (1.0 - x).powi(3) * x.ln(),
    };
    Ok(-5.0 / 6.0 - (x.powi(3) * x.ln() + tail) / (3.0 * x * (1.0 - x)))
}

/// `kappa = (5 - log 4) / 6`, the largest mean of `-log S` over `x`.
pub fn kappa() -> f64 {
    (5.0 - 4f64.ln()) / 6.0
}

/// Middle-over-range ratio of the three sorted abscissae.
pub fn chi(mu: f64, nu: f64, xi_c: f64) -> Result<f64> {
    let mut v = [mu, nu, xi_c];
    v.sort_by(f64::total_cmp);
    let spread = v[2] - v[0];
    if spread == 0.0 {
        return Err(Error::ZeroSpread);
    }
    Ok((v[1] - v[0]) / spread)
}

/// `P(chi <= z)` split by the position of `xi_c`: below `nu`, between, above `mu`.
pub fn chi_cdf_terms(x: f64, z: f64) -> Result<(f64, f64, f64)> {
    check_open_unit("x", x)?;
    check_open_unit("z", z)?;
    let below = if x < z {
        (3.0 * z - x * z * z - z * x - x) * x / (6.0 * z * (1.0 - x))
    } else {
        (3.0 * x - z * x * x - x * z - z) * z / (6.0 * x * (1.0 - z))
    };
    let between = z / 2.0;
    let above = if x < z {
        (3.0 * z * z + z * z * x * x - 3.0 * z * z * x + z * x * x - 3.0 * z * x + x * x) / (6.0 * z * (1.0 - x))
    } else {
        (1.0 - x).powi(2) * z * z / (6.0 * (1.0 - z) * x)
    };
    Ok((below, between, above))
}

/// Where `xi_c` falls relative to `nu <= mu`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChiBranch {
    Below,
    Between,
    Above,
}

pub fn chi_branch(mu: f64, nu: f64, xi_c: f64) -> ChiBranch {
    if xi_c < nu {
        ChiBranch::Below
    } else if xi_c <= mu {
        ChiBranch::Between
    } else {
        ChiBranch::Above
    }
}

/// Monte Carlo estimate of one term of `P(chi <= z)` at apex abscissa `x`:
/// the indicator of `{chi <= z}` restricted to `branch`.
pub fn chi_term_indicator(x: f64, z: f64, branch: ChiBranch) -> impl Fn(&[f64]) -> f64 {
    move |p: &[f64]| {
        let mu = 1.0 - (1.0 - x) * p[0];
        let nu = x * (1.0 - p[1]);
        let c = p[2];
        if chi_branch(mu, nu, c) != branch {
            return 0.0;
        }
        match chi(mu, nu, c) {
            Ok(v) if v <= z => 1.0,
            _ => 0.0,
        }
    }
}

/// One row of a recorded trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub replica: u64,
    pub step: u64,
    pub x: f64,
    pub y: f64,
    pub log_y: f64,
    pub r: f64,
    #[serde(rename = "R")]
    pub big_r: f64,
    #[serde(rename = "S")]
    pub big_s: f64,
}

/// Runs one replica, returning the final shape and `log y_k` for `k = 0..=n`.
///
/// `log y` is accumulated from the step multipliers so it stays finite after
/// `y` itself underflows.
pub fn run_log_height(s0: ShapeCoord, n: u64, src: &mut RandomSource) -> Result<(ShapeCoord, Vec<f64>)> {
    let mut s = s0;
    let mut log_y = s0.y.ln();
    let mut path = Vec::with_capacity(n as usize + 1);
    path.push(log_y);
    for _ in 0..n {
        let (next, d) = step(s, UniformTriple::draw(src))?;
        log_y += d.r.ln();
        s = next;
        path.push(log_y);
    }
    Ok((s, path))
}

/// Recorded trajectory of one replica, `n` steps.
pub fn trajectory(replica: u64, s0: ShapeCoord, n: u64, src: &mut RandomSource) -> Result<Vec<TrajectoryRow>> {
    let mut s = s0;
    let mut log_y = s0.y.ln();
    let mut rows = Vec::with_capacity(n as usize + 1);
    rows.push(TrajectoryRow {
        replica,
        step: 0,
        x: s.x,
        y: s.y,
        log_y,
        r: f64::NAN,
        big_r: f64::NAN,
        big_s: f64::NAN,
    });
    for k in 1..=n {
        let (next, d) = step(s, UniformTriple::draw(src))?;
        log_y += d.r.ln();
        s = next;
        rows.push(TrajectoryRow {
            replica,
            step: k,
            x: s.x,
            y: s.y,
            log_y,
            r: d.r,
            big_r: d.big_r,
            big_s: d.big_s,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovEstimate {
    /// Least-squares slope of the replica-mean `log y_k` over the fit window.
    pub slope: f64,
    /// Standard error of `slope`, from the spread of per-replica slopes.
    pub stderr: f64,
    pub window_start: u64,
    pub window_end: u64,
    pub replicas: usize,
}

/// Fits the exponential rate of `y_n` over steps `window_start..=n`.
///
/// The slope of the mean curve equals the mean of per-replica least-squares
/// slopes (the fit is linear in the data), so the per-replica slopes give an
/// honest standard error even though each path is a random walk.
pub fn lyapunov_estimate_window(
    n: u64,
    window_start: u64,
    replicas: usize,
    seed: u64,
    s0: ShapeCoord,
) -> Result<LyapunovEstimate> {
    if s0.y == 0.0 {
        return Err(Error::UndefinedSlope("start has y = 0, so every y_n is 0"));
    }
    if replicas < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: replicas });
    }
    if window_start + 2 > n {
        return Err(Error::InvalidArgument(format!(
            "fit window [{window_start}, {n}] needs at least 3 points"
        )));
    }
    let ks: Vec<f64> = (window_start..=n).map(|k| k as f64).collect();
    let slopes: Vec<Result<f64>> = (0..replicas)
        .into_par_iter()
        .with_min_len(256)
        .map(|i| {
            let mut src = RandomSource::new(seed, i as u64);
            let (_, path) = run_log_height(s0, n, &mut src)?;
            Ok(fit_slope(&ks, &path[window_start as usize..])?.slope)
        })
        .collect();
    let mut acc = StreamingMoments::new();
    for s in slopes {
        acc.push(s?);
    }
    Ok(LyapunovEstimate {
        slope: acc.mean,
        stderr: acc.std_error(),
        window_start,
        window_end: n,
        replicas,
    })
}

/// Default window: discard the first quarter.
pub fn lyapunov_estimate(n: u64, replicas: usize, seed: u64, s0: ShapeCoord) -> Result<LyapunovEstimate> {
    if n < 100 {
        return Err(Error::InvalidArgument(format!("need n >= 100, got {n}")));
    }
    lyapunov_estimate_window(n, n / 4, replicas, seed, s0)
}

/// Final `x_n` of independent replicas started at `s0`.
pub fn simulate_x_limit(n: u64, replicas: usize, seed: u64, s0: ShapeCoord) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::InvalidArgument("need n >= 1".into()));
    }
    (0..replicas)
        .into_par_iter()
        .with_min_len(1024)
        .map(|i| {
            let mut src = RandomSource::new(seed, i as u64);
            let mut s = s0;
            for _ in 0..n {
                s = step(s, UniformTriple::draw(&mut src))?.0;
            }
            Ok(s.x)
        })
        .collect()
}

/// Mean of `r` at a fixed shape, over `samples` fresh draws.
pub fn conditional_r(s: ShapeCoord, samples: usize, src: &mut RandomSource) -> Result<StreamingMoments> {
    let mut acc = StreamingMoments::new();
    for _ in 0..samples {
        acc.push(step(s, UniformTriple::draw(src))?.1.r);
    }
    Ok(acc)
}

/// Is `xi` in `{xi_a < 0.1, xi_b > 0.9}`?
pub fn in_event_e(xi: UniformTriple) -> bool {
    xi.xi_a < 0.1 && xi.xi_b > 0.9
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupermartingaleCheck {
    pub x: f64,
    pub y: f64,
    pub mean_r: f64,
    pub stderr: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventReport {
    pub draws: usize,
    pub hits: usize,
    pub frequency: f64,
    pub sigma: f64,
    pub max_r_on_event: f64,
    pub grid: Vec<SupermartingaleCheck>,
    pub frequency_pass: bool,
    pub bound_pass: bool,
}

impl EventReport {
    pub fn pass(&self) -> bool {
        self.frequency_pass && self.bound_pass && self.grid.iter().all(|g| g.pass)
    }
}

/// Supermartingale property on a shape grid, and the event `E` frequency and
/// `r < 1/3` bound over `draws` steps taken at shapes drawn uniformly from the
/// valid region.
pub fn supermartingale_and_event_checks(
    grid: &[ShapeCoord],
    samples_per_shape: usize,
    draws: usize,
    seed: u64,
) -> Result<EventReport> {
    let checks: Vec<Result<SupermartingaleCheck>> = grid
        .par_iter()
        .enumerate()
        .map(|(i, &s)| {
            let mut src = RandomSource::for_experiment(seed, "supermartingale", i as u64);
            let m = conditional_r(s, samples_per_shape, &mut src)?;
            Ok(SupermartingaleCheck {
                x: s.x,
                y: s.y,
                mean_r: m.mean,
                stderr: m.std_error(),
                pass: m.mean <= 1.0 + 3.0 * m.std_error(),
            })
        })
        .collect();
    let grid = checks.into_iter().collect::<Result<Vec<_>>>()?;

    let chunk = 1usize << 16;
    let parts: Vec<Result<(usize, f64)>> = (0..draws.div_ceil(chunk))
        .into_par_iter()
        .map(|k| {
            let mut src = RandomSource::for_experiment(seed, "event-e", k as u64);
            let mut hits = 0usize;
            let mut max_r: f64 = 0.0;
            for _ in (k * chunk)..((k + 1) * chunk).min(draws) {
                let s = random_shape(&mut src);
                let xi = UniformTriple::draw(&mut src);
                if in_event_e(xi) {
                    hits += 1;
                    max_r = max_r.max(step(s, xi)?.1.r);
                }
            }
            Ok((hits, max_r))
        })
        .collect();
    let mut hits = 0;
    let mut max_r: f64 = 0.0;
    for p in parts {
        let (h, m) = p?;
        hits += h;
        max_r = max_r.max(m);
    }
    let p = 0.01;
    let sigma = (p * (1.0 - p) / draws as f64).sqrt();
    let frequency = hits as f64 / draws as f64;
    Ok(EventReport {
        draws,
        hits,
        frequency,
        sigma,
        max_r_on_event: max_r,
        grid,
        frequency_pass: (frequency - p).abs() <= 3.0 * sigma,
        bound_pass: max_r < 1.0 / 3.0,
    })
}

/// Uniform draw from `{1/2 <= x <= 1, 0 <= y, x^2 + y^2 <= 1}` (the region
/// where `AB` is the longest side and `|AC| >= |BC|`), by rejection.
pub fn random_shape(src: &mut RandomSource) -> ShapeCoord {
    loop {
        let x = 0.5 + 0.5 * src.next_uniform();
        let y = crate::geometry::SQRT3_OVER_2 * src.next_uniform();
        if x * x + y * y <= 1.0 {
            return ShapeCoord::from_raw(x, y);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailRow {
    pub z: f64,
    pub survival: f64,
    pub bound: f64,
    pub sigma: f64,
    pub pass: bool,
}

/// Empirical `P(-log S >= z)` at `y = 0`, `x ~ U[1/2, 1]`, against `2 e^-z`
/// plus three binomial standard deviations.
pub fn sigma_tail_check(z_grid: &[f64], samples: usize, seed: u64) -> Result<Vec<TailRow>> {
    if samples == 0 {
        return Err(Error::EmptySample);
    }
    let chunk = 1usize << 16;
    let sigmas: Vec<f64> = (0..samples.div_ceil(chunk))
        .into_par_iter()
        .flat_map_iter(|k| {
            let mut src = RandomSource::for_experiment(seed, "sigma-tail", k as u64);
            ((k * chunk)..((k + 1) * chunk).min(samples))
                .map(|_| {
                    let x = 0.5 + 0.5 * src.next_uniform();
                    -max_side_y0(x, UniformTriple::draw(&mut src)).ln()
                })
                .collect::<Vec<_>>()
        })
        .collect();
    Ok(z_grid
        .iter()
        .map(|&z| {
            let hits = sigmas.iter().filter(|&&s| s >= z).count();
            let survival = hits as f64 / samples as f64;
            let bound = (2.0 * (-z).exp()).min(1.0);
            let sigma = (bound * (1.0 - bound) / samples as f64).sqrt();
            TailRow {
                z,
                survival,
                bound,
                sigma,
                pass: survival <= bound + 3.0 * sigma,
            }
        })
        .collect())
}
