//! Command-line experiments.
//!
//! Each subcommand runs one battery of checks, writes its data files and a
//! summary report under `--out`, and yields one claim row per checked
//! property. The binary exits 0 when every claim passes, 1 when any fails and
//! 2 on a usage error.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use crate::bisector::{self, Dynamics};
use crate::error::{Error, Result};
use crate::geometry::{AngleTriple, Quadrilateral, ShapeCoord, UniformTriple, Vec2};
use crate::oracle::{self, NESTED_TOL};
use crate::quadchain::{self, PairState};
use crate::report::{self, Claim, Format, SummaryReport};
use crate::rng::RandomSource;
use crate::stats::{self, StreamingMoments};
use crate::subtriangle::{self, ChiBranch};

/// Seed used when `--seed` is not given.
pub const DEFAULT_SEED: u64 = 20_110_501;

/// Environment variable overriding the worker thread count.
pub const THREADS_ENV: &str = "SUBDIVLAB_THREADS";

pub const DEFAULT_X_GRID: [f64; 10] = [0.51, 0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9, 0.99];

#[derive(Debug, Parser)]
#[command(name = "subdivlab", version, about = "Random geometric subdivision chains")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Master seed; every replica derives its own stream from it.
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    pub seed: u64,

    /// Output directory (default: out/<command>).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Format of the summary report.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,

    /// Worker threads (0 = all cores). Results do not depend on this.
    #[arg(long, global = true, env = THREADS_ENV)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Quadrilateral midpoint subdivision: rate and uniform limit.
    Quad(SizeArgs),
    /// Angle-bisector subdivision: contraction, moments, densities.
    Bisector(SizeArgs),
    /// Random subtriangles: flattening rate, tails, limit of x.
    Subtriangle(SizeArgs),
    /// Closed forms against quadrature and Monte Carlo oracles.
    Verify(SizeArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct SizeArgs {
    /// Steps per chain.
    #[arg(long)]
    pub steps: Option<u64>,
    /// Independent replicas.
    #[arg(long)]
    pub replicas: Option<usize>,
    /// Bins of the 1-D angle histogram.
    #[arg(long)]
    pub bins: Option<usize>,
    /// Resolution of the ternary histogram.
    #[arg(long)]
    pub resolution: Option<usize>,
    /// Comma-separated x values for the closed-form checks.
    #[arg(long, value_delimiter = ',')]
    pub x_grid: Option<Vec<f64>>,
    /// Sample count for the auxiliary checks (pairs, tail draws, sweeps).
    #[arg(long)]
    pub samples: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CommandKind {
    Quad,
    Bisector,
    Subtriangle,
    Verify,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            CommandKind::Quad => "quad",
            CommandKind::Bisector => "bisector",
            CommandKind::Subtriangle => "subtriangle",
            CommandKind::Verify => "verify",
        }
    }
}

/// Fully resolved configuration of one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: CommandKind,
    pub seed: u64,
    pub steps: u64,
    pub replicas: usize,
    pub bins: usize,
    pub resolution: usize,
    pub x_grid: Vec<f64>,
    pub samples: usize,
    #[serde(skip)]
    pub out: PathBuf,
    pub format: Format,
    #[serde(skip)]
    pub threads: Option<usize>,
}

impl RunConfig {
    /// Defaults for `command`, sized for the acceptance runs.
    pub fn defaults(command: CommandKind) -> Self {
        let (steps, replicas, samples) = match command {
            CommandKind::Quad => (30, 100_000, 10_000),
            CommandKind::Bisector => (60, 1_000_000, 10_000),
            CommandKind::Subtriangle => (200, 10_000, 1_000_000),
            CommandKind::Verify => (1, 1, 100_000),
        };
        Self {
            command,
            seed: DEFAULT_SEED,
            steps,
            replicas,
            bins: 100,
            resolution: 50,
            x_grid: DEFAULT_X_GRID.to_vec(),
            samples,
            out: PathBuf::from("out").join(command.name()),
            format: Format::Json,
            threads: None,
        }
    }

    pub fn from_cli(cli: &Cli) -> Result<Self> {
        let (kind, sizes) = match &cli.command {
            Command::Quad(s) => (CommandKind::Quad, s),
            Command::Bisector(s) => (CommandKind::Bisector, s),
            Command::Subtriangle(s) => (CommandKind::Subtriangle, s),
            Command::Verify(s) => (CommandKind::Verify, s),
        };
        let mut c = Self::defaults(kind);
        c.seed = cli.common.seed;
        c.format = cli.common.format;
        c.threads = cli.common.threads;
        if let Some(out) = &cli.common.out {
            c.out = out.clone();
        }
        if let Some(v) = sizes.steps {
            c.steps = v;
        }
        if let Some(v) = sizes.replicas {
            c.replicas = v;
        }
        if let Some(v) = sizes.bins {
            c.bins = v;
        }
        if let Some(v) = sizes.resolution {
            c.resolution = v;
        }
        if let Some(v) = &sizes.x_grid {
            c.x_grid = v.clone();
        }
        if let Some(v) = sizes.samples {
            c.samples = v;
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 || self.replicas == 0 {
            return Err(Error::InvalidArgument("steps and replicas must be at least 1".into()));
        }
        if self.bins == 0 || self.resolution == 0 || self.samples == 0 {
            return Err(Error::InvalidArgument("bins, resolution and samples must be at least 1".into()));
        }
        if self.x_grid.is_empty() || self.x_grid.iter().any(|&x| !(x > 0.5 && x < 1.0)) {
            return Err(Error::InvalidArgument("x-grid values must lie in (1/2, 1)".into()));
        }
        match self.command {
            CommandKind::Subtriangle if self.steps < 100 => {
                Err(Error::InvalidArgument("subtriangle needs --steps >= 100".into()))
            }
            CommandKind::Subtriangle if self.replicas < 2 => {
                Err(Error::InvalidArgument("subtriangle needs --replicas >= 2".into()))
            }
            CommandKind::Quad if self.replicas < stats::KS_MIN_SAMPLES => Err(Error::InvalidArgument(format!(
                "quad needs --replicas >= {}",
                stats::KS_MIN_SAMPLES
            ))),
            _ => Ok(()),
        }
    }
}

/// Failure of a run: bad input, a numerical error, or an I/O problem.
#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Compute(#[from] Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Runs the configured experiment, writing data files and the summary.
pub fn run(config: &RunConfig) -> std::result::Result<SummaryReport, RunError> {
    config.validate()?;
    let start = Instant::now();
    std::fs::create_dir_all(&config.out)?;
    let echo = serde_json::to_value(config).expect("config serializes");
    let mut report = SummaryReport::new(config.command.name(), echo);
    match config.command {
        CommandKind::Quad => run_quad(config, &mut report)?,
        CommandKind::Bisector => run_bisector(config, &mut report)?,
        CommandKind::Subtriangle => run_subtriangle(config, &mut report)?,
        CommandKind::Verify => run_verify(config, &mut report)?,
    }
    report.wall_clock_seconds = start.elapsed().as_secs_f64();
    let summary = report::emit(&report, config.format, &config.out)?;
    report.artifact(&summary);
    Ok(report)
}

/// Configures the global worker pool; only the first call has an effect.
pub fn init_threads(threads: Option<usize>) {
    if let Some(n) = threads {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

/// Entry point used by the binary; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let config = match RunConfig::from_cli(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    init_threads(config.threads);
    match run(&config) {
        Ok(report) => {
            for c in &report.claims {
                println!("{}", c.line());
            }
            println!(
                "{} claims, {} failed, {:.2}s -> {}",
                report.claims.len(),
                report.claims.iter().filter(|c| !c.pass).count(),
                report.wall_clock_seconds,
                config.out.display()
            );
            if report.all_pass() {
                0
            } else {
                1
            }
        }
        Err(RunError::Compute(Error::InvalidArgument(m))) => {
            eprintln!("error: {m}");
            2
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn out_file(config: &RunConfig, report: &mut SummaryReport, name: &str) -> PathBuf {
    let p = config.out.join(name);
    report.artifact(&p);
    p
}

// ---------------------------------------------------------------- quad

/// Reference quadrilateral for trajectories and the limit law.
pub fn reference_quadrilateral() -> Quadrilateral {
    Quadrilateral {
        a: Vec2::new(0.0, 0.0),
        b: Vec2::new(4.0, 0.0),
        c: Vec2::new(5.0, 3.0),
        d: Vec2::new(1.0, 4.0),
    }
}

/// Convex quadrilateral from four uniform points in the unit square, ordered
/// by angle about their mean; redrawn until convex and non-degenerate.
pub fn random_convex_quadrilateral(src: &mut RandomSource) -> Quadrilateral {
    loop {
        let mut pts: Vec<Vec2> = (0..4).map(|_| Vec2::new(src.next_uniform(), src.next_uniform())).collect();
        let centre = (pts[0] + pts[1] + pts[2] + pts[3]) * 0.25;
        pts.sort_by(|p, q| {
            let ap = (p.y - centre.y).atan2(p.x - centre.x);
            let aq = (q.y - centre.y).atan2(q.x - centre.x);
            ap.total_cmp(&aq)
        });
        if let Ok(q) = Quadrilateral::new(pts[0], pts[1], pts[2], pts[3]) {
            if q.signed_area().abs() > 1e-3 {
                return q;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateCheck {
    /// Largest `| |u_n - v_n| / (2^-n |u_0 - v_0|) - 1 |`.
    pub max_gap_rel_error: f64,
    /// Largest `defect_n / (2^(1-n) scale)`.
    pub max_envelope_ratio: f64,
}

/// Exact halving of the pair gap and the defect envelope, over `quads`
/// random convex quadrilaterals and `steps` generations.
pub fn quad_rate_check(steps: u64, quads: usize, seed: u64) -> Result<RateCheck> {
    let rows: Vec<Result<RateCheck>> = (0..quads)
        .into_par_iter()
        .map(|i| {
            let mut src = RandomSource::for_experiment(seed, "quad-rate", i as u64);
            let q0 = if i == 0 {
                reference_quadrilateral()
            } else {
                random_convex_quadrilateral(&mut src)
            };
            let mut pair = PairState::from_horizontal(&q0);
            let gap0 = pair.gap();
            let mut max_gap: f64 = 0.0;
            for n in 1..=steps {
                pair = quadchain::pair_step(pair, src.next_bit());
                let want = gap0 * 0.5f64.powi(n as i32);
                max_gap = max_gap.max((pair.gap() / want - 1.0).abs());
            }
            let scale = quadchain::defect_scale(&q0);
            let traj = quadchain::vertex_trajectory(&q0, steps, &mut src)?;
            let max_env = traj
                .iter()
                .map(|r| r.defect / (scale * 2f64.powi(1 - r.step as i32)))
                .fold(0.0, f64::max);
            Ok(RateCheck {
                max_gap_rel_error: max_gap,
                max_envelope_ratio: max_env,
            })
        })
        .collect();
    let mut out = RateCheck {
        max_gap_rel_error: 0.0,
        max_envelope_ratio: 0.0,
    };
    for r in rows {
        let r = r?;
        out.max_gap_rel_error = out.max_gap_rel_error.max(r.max_gap_rel_error);
        out.max_envelope_ratio = out.max_envelope_ratio.max(r.max_envelope_ratio);
    }
    Ok(out)
}

/// Largest mismatch between the vertex child's side pairs and the reduced
/// recursion, over `quads` random quadrilaterals and all four children.
pub fn quad_consistency(quads: usize, seed: u64) -> Result<f64> {
    let errs: Vec<Result<f64>> = (0..quads)
        .into_par_iter()
        .map(|i| {
            let mut src = RandomSource::for_experiment(seed, "quad-consistency", i as u64);
            let q = random_convex_quadrilateral(&mut src);
            let scale = q.perimeter();
            let mut worst: f64 = 0.0;
            for (h, w) in [(false, false), (false, true), (true, true), (true, false)] {
                let child = quadchain::quad_child(&q, quadchain::child_index(h, w))?;
                let (cu, cv) = child.horizontal_pair();
                let (cp, cq) = child.vertical_pair();
                let hs = quadchain::pair_step(PairState::from_horizontal(&q), h);
                let vs = quadchain::pair_step(PairState::from_vertical(&q), w);
                worst = worst.max(pair_distance(hs, cu, cv) / scale);
                worst = worst.max(pair_distance(vs, cp, cq) / scale);
            }
            Ok(worst)
        })
        .collect();
    errs.into_iter().try_fold(0.0f64, |m, e| Ok(m.max(e?)))
}

fn pair_distance(s: PairState, p: Vec2, q: Vec2) -> f64 {
    let direct = (s.u - p).norm().max((s.v - q).norm());
    let swapped = (s.u - q).norm().max((s.v - p).norm());
    direct.min(swapped)
}

#[derive(Debug, Clone, Copy, Serialize)]
struct LimitRow {
    replica: u64,
    t: f64,
}

/// Segment parameters of `X_n` for `replicas` chains from the reference pair,
/// plus the largest relative distance of any `X_n` from the segment.
pub fn quad_limit_samples(steps: u64, replicas: usize, seed: u64) -> Result<(Vec<f64>, f64)> {
    let s0 = PairState::from_horizontal(&reference_quadrilateral());
    let len = s0.gap();
    let out: Vec<Result<(f64, f64)>> = (0..replicas)
        .into_par_iter()
        .with_min_len(1024)
        .map(|i| {
            let mut src = RandomSource::for_experiment(seed, "quad-limit", i as u64);
            let x = quadchain::simulate_pair_limit(s0, &mut src, steps)?;
            Ok((
                quadchain::segment_parameter(x, s0.u, s0.v),
                quadchain::distance_to_segment(x, s0.u, s0.v) / len,
            ))
        })
        .collect();
    let mut ts = Vec::with_capacity(replicas);
    let mut off: f64 = 0.0;
    for r in out {
        let (t, d) = r?;
        ts.push(t);
        off = off.max(d);
    }
    Ok((ts, off))
}

fn run_quad(config: &RunConfig, report: &mut SummaryReport) -> std::result::Result<(), RunError> {
    let rate_steps = 40;
    let rate = quad_rate_check(rate_steps, 100, config.seed)?;
    report.push(Claim::at_most("pair gap |u_n - v_n| = 2^-n |u_0 - v_0| (40 steps)", 0.0, rate.max_gap_rel_error, 1e-12));
    report.push(Claim::at_most("defect_n <= 2^(1-n) x initial scale", 1.0, rate.max_envelope_ratio, 0.0));

    let consistency = quad_consistency(config.samples, config.seed)?;
    report.push(Claim::at_most("vertex child side pairs match pair recursion", 0.0, consistency, 1e-10));

    let (ts, off) = quad_limit_samples(config.steps, config.replicas, config.seed)?;
    report.push(Claim::at_most("X_n lies on segment U_0 V_0", 0.0, off, 1e-10));
    let ks = stats::ks_test(&ts, |t| t.clamp(0.0, 1.0))?;
    report.push(Claim::at_least(
        format!("X_{} segment parameter ~ U[0,1] (KS p-value)", config.steps),
        0.001,
        ks.p_value,
        0.0,
    ));

    let mut src = RandomSource::for_experiment(config.seed, "quad-trajectory", 0);
    let traj = quadchain::vertex_trajectory(&reference_quadrilateral(), rate_steps.max(config.steps), &mut src)?;
    report::write_csv(&out_file(config, report, "trajectory.csv"), traj)?;
    report::write_csv(
        &out_file(config, report, "limit_samples.csv"),
        ts.iter().enumerate().map(|(i, &t)| LimitRow { replica: i as u64, t }),
    )?;
    Ok(())
}

// ---------------------------------------------------------------- bisector

/// Uniform point of the simplex.
pub fn random_simplex_point(src: &mut RandomSource) -> AngleTriple {
    let (u, v) = (src.next_uniform(), src.next_uniform());
    let (lo, hi) = if u < v { (u, v) } else { (v, u) };
    AngleTriple::from_array([lo, hi - lo, 1.0 - hi])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContractionCheck {
    pub max_average: f64,
    pub max_pair_sum: f64,
}

/// Worst average log ratio and worst map-pair sum over `pairs` random pairs.
pub fn contraction_check(pairs: usize, seed: u64) -> Result<ContractionCheck> {
    let mut src = RandomSource::for_experiment(seed, "contraction", 0);
    let mut out = ContractionCheck {
        max_average: f64::NEG_INFINITY,
        max_pair_sum: f64::NEG_INFINITY,
    };
    for _ in 0..pairs {
        let u = random_simplex_point(&mut src);
        let v = random_simplex_point(&mut src);
        let ratios = bisector::contraction_log_ratios(u, v)?;
        out.max_average = out.max_average.max(ratios.iter().sum::<f64>() / 6.0);
        for s in bisector::pair_sums(&ratios) {
            out.max_pair_sum = out.max_pair_sum.max(s);
        }
    }
    Ok(out)
}

/// Sorted supports of one permutation step and one uniform-child step from
/// the equilateral point agree as weighted multisets.
pub fn exchangeable_start_equivalence() -> bool {
    let e = AngleTriple::EQUILATERAL;
    let key = |t: AngleTriple| t.sorted().map(|v| (v * 1e12).round() as i64);
    let mut perm: Vec<_> = (0..6).map(|k| key(bisector::permute(bisector::base_map(e), k))).collect();
    let mut kids: Vec<_> = bisector::bisector_children(e).into_iter().map(key).collect();
    perm.sort();
    kids.sort();
    perm == kids
}

#[derive(Debug, Clone, Copy, Serialize)]
struct SampleRow {
    replica: u64,
    a: f64,
    b: f64,
    c: f64,
}

#[derive(Debug, Clone, Copy, Serialize)]
struct TernaryRow {
    i: usize,
    j: usize,
    count: u64,
}

#[derive(Debug, Clone, Copy, Serialize)]
struct BinRow {
    bin_left: f64,
    bin_right: f64,
    count: u64,
}

#[derive(Debug, Serialize)]
struct MomentsFile<'a> {
    #[serde(flatten)]
    moments: bisector::BisectorMoments,
    config: &'a RunConfig,
}

fn run_bisector(config: &RunConfig, report: &mut SummaryReport) -> std::result::Result<(), RunError> {
    let c = contraction_check(config.samples, config.seed)?;
    report.push(Claim::at_most(
        "pairwise contraction <= log(sqrt(3)/2)",
        (3f64.sqrt() / 2.0).ln(),
        c.max_average,
        1e-12,
    ));
    report.push(Claim::at_most("map-pair log ratio sum <= log(3/4)", 0.75f64.ln(), c.max_pair_sum, 1e-12));
    report.push(Claim::holds(
        "one-step sorted law: permutation == uniform child (exact, equilateral start)",
        exchangeable_start_equivalence(),
    ));

    let seed = rng_seed(config.seed, "bisector-moments");
    let samples = bisector::simulate_replicas(config.steps, config.replicas, seed, Dynamics::Permutation);
    let m = bisector::moments_of(&samples)?;
    report.push(Claim::within("E a = 1/3", 1.0 / 3.0, m.mean_a, 1e-3));
    report.push(Claim::within("E a^2 = 1/7", bisector::SECOND_MOMENT, m.second_a, 1e-3));
    report.push(Claim::within("E[ab] = 2/21", bisector::CROSS_MOMENT, m.cross_ab, 1e-3));
    report.push(Claim::within("Var a = 2/63", bisector::VARIANCE, m.var_a, 1e-3));
    report.push(Claim::within("Cov(a,b) = -1/63", bisector::COVARIANCE, m.cov_ab, 1e-3));

    let residual: StreamingMoments = samples
        .iter()
        .map(|t| {
            let s = (t.a * t.a + t.b * t.b + t.c * t.c) / 3.0;
            let x = (t.a * t.b + t.b * t.c + t.c * t.a) / 3.0;
            bisector::second_moment_recursion_residual(s, x)
        })
        .collect();
    report.push(Claim::within(
        "second-moment recursion closes (3 stderr)",
        0.0,
        residual.mean,
        3.0 * residual.std_error(),
    ));

    let hist = stats::build_angle_histogram(&samples, config.bins)?;
    report.push(Claim::within("pooled angle histogram mass = 3 x samples", 3.0 * samples.len() as f64, hist.total() as f64, 0.0));
    report.push(Claim::within("pooled angle histogram mean = 1/3", 1.0 / 3.0, hist.binned_mean(), 1e-3));
    let ternary = stats::build_ternary_histogram(&samples, config.resolution)?;

    // stationarity: independent runs at n and 2n steps
    let n_cmp = config.replicas.min(200_000);
    let early = bisector::simulate_replicas(config.steps, n_cmp, rng_seed(config.seed, "bisector-early"), Dynamics::Permutation);
    let late = bisector::simulate_replicas(2 * config.steps, n_cmp, rng_seed(config.seed, "bisector-late"), Dynamics::Permutation);
    let a_early: Vec<f64> = early.iter().map(|t| t.a).collect();
    let a_late: Vec<f64> = late.iter().map(|t| t.a).collect();
    let ks = stats::ks_two_sample(&a_early, &a_late)?;
    report.push(Claim::at_least(
        format!("angle law at n={} vs n={} (two-sample KS p-value)", config.steps, 2 * config.steps),
        0.01,
        ks.p_value,
        0.0,
    ));

    // heuristic screen for atoms in the law of one angle
    let firsts: Vec<f64> = samples.iter().map(|t| t.a).collect();
    let mult = bisector::max_multiplicity(&firsts, 1e-9);
    report.push(Claim::at_most("atom screen: max multiplicity at 1e-9 (heuristic)", 10.0, mult as f64, 0.0));

    report::write_csv(
        &out_file(config, report, "samples.csv"),
        samples.iter().enumerate().map(|(i, t)| SampleRow {
            replica: i as u64,
            a: t.a,
            b: t.b,
            c: t.c,
        }),
    )?;
    report::write_csv(
        &out_file(config, report, "ternary_histogram.csv"),
        ternary.rows().map(|(i, j, count)| TernaryRow { i, j, count }),
    )?;
    report::write_csv(
        &out_file(config, report, "angle_histogram.csv"),
        hist.rows().map(|(bin_left, bin_right, count)| BinRow { bin_left, bin_right, count }),
    )?;
    report::write_json(&out_file(config, report, "moments.json"), &MomentsFile { moments: m, config })?;
    Ok(())
}

fn rng_seed(seed: u64, label: &str) -> u64 {
    crate::rng::derive_seed(seed, label)
}

// ---------------------------------------------------------------- subtriangle

/// `E log R - 4 * integral over [1/2, 1] of E log S(x)`: the mean log height
/// multiplier once the chain is flat and `x` is uniform on `[1/2, 1]`.
pub fn stationary_rate() -> Result<f64> {
    let avg = oracle::integrate_1d(
        |x| subtriangle::expected_log_s(x).unwrap_or(f64::NAN),
        0.5,
        1.0,
        1e-13,
    )?;
    Ok(subtriangle::expected_log_r() - 4.0 * avg.value)
}

/// Shapes at which the one-step conditional mean of `r` is checked.
pub fn supermartingale_grid(seed: u64) -> Result<Vec<ShapeCoord>> {
    let mut grid = Vec::new();
    for x in [0.5, 0.625, 0.75, 0.875] {
        for y in [0.05, 0.2, 0.4] {
            grid.push(ShapeCoord::new(x, y)?);
        }
    }
    // points along one path started at height 0.5
    let mut src = RandomSource::for_experiment(seed, "supermartingale-path", 0);
    let mut s = ShapeCoord::new(0.75, 0.5)?;
    for _ in 0..8 {
        grid.push(s);
        s = subtriangle::step(s, UniformTriple::draw(&mut src))?.0;
    }
    Ok(grid)
}

/// Largest `r(x, y) - r(x, 0)` over random shapes and draws (never positive).
pub fn monotonicity_check(samples: usize, seed: u64) -> Result<f64> {
    let mut src = RandomSource::for_experiment(seed, "monotone", 0);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..samples {
        let s = subtriangle::random_shape(&mut src);
        let xi = UniformTriple::draw(&mut src);
        let r = subtriangle::step(s, xi)?.1.r;
        let r0 = subtriangle::step(ShapeCoord::from_raw(s.x, 0.0), xi)?.1.r;
        worst = worst.max(r - r0);
    }
    Ok(worst)
}

fn run_subtriangle(config: &RunConfig, report: &mut SummaryReport) -> std::result::Result<(), RunError> {
    let start = ShapeCoord::EQUILATERAL;
    let lyap = subtriangle::lyapunov_estimate(
        config.steps,
        config.replicas,
        rng_seed(config.seed, "lyapunov"),
        start,
    )?;
    report.push(Claim::at_most(
        format!("rate over n in [{}, {}]: slope + 3 stderr < -0.3654", lyap.window_start, lyap.window_end),
        -0.3654,
        lyap.slope + 3.0 * lyap.stderr,
        0.0,
    ));
    let lambda = stationary_rate()?;
    report.push(Claim::within("slope = stationary prediction (3 stderr)", lambda, lyap.slope, 3.0 * lyap.stderr));

    let tail = subtriangle::sigma_tail_check(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0], config.samples, config.seed)?;
    for row in &tail {
        report.push(Claim::at_most(
            format!("P(-log S >= {}) <= 2 exp(-{})", row.z, row.z),
            row.bound,
            row.survival,
            3.0 * row.sigma,
        ));
    }

    let limit_steps = 50;
    let limit_replicas = 100_000;
    let xs = subtriangle::simulate_x_limit(limit_steps, limit_replicas, rng_seed(config.seed, "x-limit"), start)?;
    let ks = stats::ks_test(&xs, |x| (2.0 * x - 1.0).clamp(0.0, 1.0))?;
    report.push(Claim::at_least(format!("x_{limit_steps} ~ U[1/2,1] (KS p-value)"), 0.001, ks.p_value, 0.0));
    let mx: StreamingMoments = xs.iter().copied().collect();
    let sigma_mean = (1.0 / 48.0 / xs.len() as f64).sqrt();
    report.push(Claim::within(format!("mean of x_{limit_steps} = 3/4"), 0.75, mx.mean, 3.0 * sigma_mean));

    let flat_start = ShapeCoord::new(0.7, 0.0)?;
    let xs1 = subtriangle::simulate_x_limit(1, limit_replicas, rng_seed(config.seed, "x-one-step"), flat_start)?;
    let ks1 = stats::ks_test(&xs1, |x| (2.0 * x - 1.0).clamp(0.0, 1.0))?;
    report.push(Claim::at_least("x_1 from a flat start ~ U[1/2,1] (KS p-value)", 0.001, ks1.p_value, 0.0));

    let grid = supermartingale_grid(config.seed)?;
    let ev = subtriangle::supermartingale_and_event_checks(&grid, 200_000, config.samples, config.seed)?;
    report.push(Claim::within("P(E) = 0.01", 0.01, ev.frequency, 3.0 * ev.sigma));
    report.push(Claim::at_most("r < 1/3 on E", 1.0 / 3.0, ev.max_r_on_event, 0.0));
    let worst_sm = ev
        .grid
        .iter()
        .map(|g| (g.mean_r - 1.0) / g.stderr)
        .fold(f64::NEG_INFINITY, f64::max);
    report.push(Claim::at_most("E[y_(n+1) | shape] <= y_n (worst z-score of mean r - 1)", 3.0, worst_sm, 0.0));
    let mono = monotonicity_check(config.samples.min(100_000), config.seed)?;
    report.push(Claim::at_most("r(x, y) <= r(x, 0)", 0.0, mono, 1e-12));

    let mut rows = Vec::new();
    for replica in 0..config.replicas.min(10) {
        let mut src = RandomSource::new(rng_seed(config.seed, "lyapunov"), replica as u64);
        rows.extend(subtriangle::trajectory(replica as u64, start, config.steps, &mut src)?);
    }
    report::write_csv(&out_file(config, report, "trajectory.csv"), rows)?;
    report::write_csv(&out_file(config, report, "tail.csv"), &tail)?;
    report::write_csv(
        &out_file(config, report, "x_limit_samples.csv"),
        xs.iter().enumerate().map(|(i, &x)| XRow { replica: i as u64, x }),
    )?;
    report::write_json(
        &out_file(config, report, "lyapunov.json"),
        &serde_json::json!({
            "estimate": lyap,
            "stationary_prediction": lambda,
            "rate_bound": subtriangle::rate_bound(),
        }),
    )?;
    Ok(())
}

#[derive(Debug, Clone, Copy, Serialize)]
struct XRow {
    replica: u64,
    x: f64,
}

// ---------------------------------------------------------------- verify

/// One closed form compared with its oracle over a grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationEntry {
    pub name: String,
    pub grid: String,
    pub max_abs_deviation: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl VerificationEntry {
    fn new(name: &str, grid: String, max_abs_deviation: f64, tolerance: f64) -> Self {
        Self {
            name: name.to_string(),
            grid,
            max_abs_deviation,
            tolerance,
            pass: max_abs_deviation <= tolerance,
        }
    }

    fn claim(&self) -> Claim {
        Claim::at_most(self.name.clone(), 0.0, self.max_abs_deviation, self.tolerance)
    }
}

/// Midpoints of `n` equal cells of `(lo, hi)`.
pub fn cell_midpoints(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * (i as f64 + 0.5) / n as f64).collect()
}

/// `R / max side^2` at `y = 0`, computed from the child's side lengths.
pub fn r_flat(x: f64, xi_a: f64, xi_b: f64, xi_c: f64) -> f64 {
    let xi = UniformTriple { xi_a, xi_b, xi_c };
    let s = ShapeCoord { x, y: 0.0 };
    subtriangle::area_ratio(xi) / subtriangle::side_lengths_sq(s, xi).max()
}

/// `log` of the longest side at `y = 0`, from the side lengths.
pub fn log_s_flat(x: f64, xi_a: f64, xi_b: f64, xi_c: f64) -> f64 {
    let xi = UniformTriple { xi_a, xi_b, xi_c };
    0.5 * subtriangle::side_lengths_sq(ShapeCoord { x, y: 0.0 }, xi).max().ln()
}

fn mu_nu(x: f64, a: f64, b: f64) -> (f64, f64) {
    (1.0 - (1.0 - x) * a, x * (1.0 - b))
}

/// Quadrature values of the three pieces of `E[r(x,0) | xi_a, xi_b]`.
pub fn oracle_i(x: f64, a: f64, b: f64) -> Result<(f64, f64, f64)> {
    let (mu, nu) = mu_nu(x, a, b);
    let big_r = |c: f64| a * b * c + (1.0 - a) * (1.0 - b) * (1.0 - c);
    let i1 = oracle::integrate_1d(|c| big_r(c) / (mu - c).powi(2), 0.0, nu, NESTED_TOL)?.value;
    let i2 = oracle::integrate_1d(|c| big_r(c) / (mu - nu).powi(2), nu, mu, NESTED_TOL)?.value;
    let i3 = oracle::integrate_1d(|c| big_r(c) / (c - nu).powi(2), mu, 1.0, NESTED_TOL)?.value;
    Ok((i1, i2, i3))
}

/// Quadrature of `r(x,0)` over `xi_c`.
pub fn oracle_r_given_ab(x: f64, a: f64, b: f64) -> Result<f64> {
    let (mu, nu) = mu_nu(x, a, b);
    Ok(oracle::integrate_1d_breaks(|c| r_flat(x, a, b, c), 0.0, 1.0, &[nu, mu], NESTED_TOL)?.value)
}

/// Quadrature of `r(x,0)` over `xi_b` and `xi_c`.
pub fn oracle_r_given_a(x: f64, a: f64) -> Result<f64> {
    let fail = std::cell::RefCell::new(None);
    let v = oracle::integrate_1d(
        |b| match oracle_r_given_ab(x, a, b) {
            Ok(v) => v,
            Err(e) => {
                fail.borrow_mut().get_or_insert(e);
                f64::NAN
            }
        },
        0.0,
        1.0,
        NESTED_TOL,
    );
    if let Some(e) = fail.into_inner() {
        return Err(e);
    }
    Ok(v?.value)
}

/// Three-fold quadrature of `log S` at `y = 0`, splitting the innermost
/// integral where the longest side changes.
pub fn oracle_log_s(x: f64) -> Result<f64> {
    let fail = std::cell::RefCell::new(None);
    let record = |e: Error| {
        fail.borrow_mut().get_or_insert(e);
        f64::NAN
    };
    let v = oracle::integrate_1d(
        |a| {
            oracle::integrate_1d(
                |b| {
                    let (mu, nu) = mu_nu(x, a, b);
                    oracle::integrate_1d_breaks(|c| log_s_flat(x, a, b, c), 0.0, 1.0, &[nu, mu], NESTED_TOL)
                        .map(|r| r.value)
                        .unwrap_or_else(record)
                },
                0.0,
                1.0,
                NESTED_TOL,
            )
            .map(|r| r.value)
            .unwrap_or_else(record)
        },
        0.0,
        1.0,
        NESTED_TOL,
    );
    if let Some(e) = fail.into_inner() {
        return Err(e);
    }
    Ok(v?.value)
}

/// Three-fold quadrature of `log R` over the unit cube.
pub fn oracle_log_r() -> Result<f64> {
    Ok(oracle::integrate_cube(
        |p| (p[0] * p[1] * p[2] + (1.0 - p[0]) * (1.0 - p[1]) * (1.0 - p[2])).ln(),
        3,
        NESTED_TOL,
    )?
    .value)
}

fn max_dev(pairs: impl IntoIterator<Item = Result<(f64, f64)>>) -> Result<f64> {
    pairs.into_iter().try_fold(0.0f64, |m, p| {
        let (a, b) = p?;
        Ok(m.max((a - b).abs()))
    })
}

/// Closed forms against quadrature, plus the algebraic identities.
pub fn closed_form_entries(x_grid: &[f64]) -> Result<Vec<VerificationEntry>> {
    let xs = cell_midpoints(0.5, 1.0, 10);
    let us = cell_midpoints(0.0, 1.0, 10);
    let grid3 = "x: 10 midpoints of (1/2,1); xi_a, xi_b: 10 midpoints of (0,1)".to_string();
    let grid2 = "x: 10 midpoints of (1/2,1); xi_a: 10 midpoints of (0,1)".to_string();

    let mut triples = Vec::with_capacity(xs.len() * us.len() * us.len());
    for &x in &xs {
        for &a in &us {
            for &b in &us {
                triples.push((x, a, b));
            }
        }
    }
    let per_point: Vec<Result<[f64; 4]>> = triples
        .par_iter()
        .map(|&(x, a, b)| {
            let (i1, i2, i3) = subtriangle::closed_form_i(x, a, b)?;
            let (o1, o2, o3) = oracle_i(x, a, b)?;
            let total = subtriangle::cond_r_given_ab(x, a, b)?;
            let o_total = oracle_r_given_ab(x, a, b)?;
            Ok([(i1 - o1).abs(), (i2 - o2).abs(), (i3 - o3).abs(), (total - o_total).abs()])
        })
        .collect();
    let mut worst = [0.0f64; 4];
    for p in per_point {
        let p = p?;
        for k in 0..4 {
            worst[k] = worst[k].max(p[k]);
        }
    }
    let mut out = vec![
        VerificationEntry::new("I1 closed form vs quadrature", grid3.clone(), worst[0], 1e-8),
        VerificationEntry::new("I2 closed form vs quadrature", grid3.clone(), worst[1], 1e-8),
        VerificationEntry::new("I3 closed form vs quadrature", grid3.clone(), worst[2], 1e-8),
        VerificationEntry::new("E[r(x,0)|xi_a,xi_b] closed form vs quadrature", grid3, worst[3], 1e-8),
    ];

    let pairs: Vec<(f64, f64)> = xs.iter().flat_map(|&x| us.iter().map(move |&a| (x, a))).collect();
    let dev: Vec<Result<(f64, f64)>> = pairs
        .par_iter()
        .map(|&(x, a)| Ok((subtriangle::cond_r_given_a(x, a)?, oracle_r_given_a(x, a)?)))
        .collect();
    out.push(VerificationEntry::new(
        "E[r(x,0)|xi_a] closed form vs quadrature",
        grid2,
        max_dev(dev)?,
        1e-8,
    ));

    let norm: Vec<Result<(f64, f64)>> = x_grid
        .iter()
        .map(|&x| {
            let v = oracle::integrate_1d(|a| subtriangle::cond_r_given_a(x, a).unwrap_or(f64::NAN), 0.0, 1.0, 1e-12)?;
            Ok((v.value, 1.0))
        })
        .collect();
    out.push(VerificationEntry::new(
        "integral of E[r(x,0)|xi_a] over xi_a = 1",
        format!("x in {x_grid:?}"),
        max_dev(norm)?,
        1e-6,
    ));

    out.push(VerificationEntry::new(
        "E log R = pi^2/9 - 8/3 (3-D quadrature)",
        "unit cube".into(),
        (oracle_log_r()? - subtriangle::expected_log_r()).abs(),
        1e-8,
    ));

    let logs: Vec<Result<(f64, f64)>> = x_grid
        .par_iter()
        .map(|&x| Ok((subtriangle::expected_log_s(x)?, oracle_log_s(x)?)))
        .collect();
    out.push(VerificationEntry::new(
        "E log S(x) closed form vs 3-D quadrature",
        format!("x in {x_grid:?}"),
        max_dev(logs)?,
        1e-8,
    ));
    out.push(VerificationEntry::new(
        "E log S(1/2) = (log 4 - 5)/6",
        "x = 1/2".into(),
        (subtriangle::expected_log_s(0.5)? - (4f64.ln() - 5.0) / 6.0).abs(),
        1e-12,
    ));

    let zs = cell_midpoints(0.0, 1.0, 50);
    let mut cdf_dev: f64 = 0.0;
    for &x in &zs {
        for &z in &zs {
            let (i, ii, iii) = subtriangle::chi_cdf_terms(x, z)?;
            cdf_dev = cdf_dev.max((i + ii + iii - z).abs());
        }
    }
    out.push(VerificationEntry::new(
        "(I)+(II)+(III) = z",
        "x, z: 50 midpoints of (0,1) each".into(),
        cdf_dev,
        1e-10,
    ));
    Ok(out)
}

/// Largest coordinate difference between [`subtriangle::step`] and the
/// vertex construction over `n` random inputs with `y > 0`.
pub fn step_oracle_sweep(n: usize, seed: u64) -> Result<f64> {
    let chunk = 1usize << 14;
    let parts: Vec<Result<f64>> = (0..n.div_ceil(chunk))
        .into_par_iter()
        .map(|k| {
            let mut src = RandomSource::for_experiment(seed, "step-oracle", k as u64);
            let mut worst: f64 = 0.0;
            for _ in (k * chunk)..((k + 1) * chunk).min(n) {
                let mut s = subtriangle::random_shape(&mut src);
                if s.y == 0.0 {
                    s.y = f64::MIN_POSITIVE;
                }
                let xi = UniformTriple::draw(&mut src);
                let a = subtriangle::step(s, xi)?.0;
                let b = subtriangle::step_via_vertices(s, xi)?;
                worst = worst.max((a.x - b.x).abs()).max((a.y - b.y).abs());
            }
            Ok(worst)
        })
        .collect();
    parts.into_iter().try_fold(0.0f64, |m, p| Ok(m.max(p?)))
}

/// Largest `|S^2 - max side^2|` at `y = 0` over `n` random inputs.
pub fn branch_consistency_sweep(n: usize, seed: u64) -> f64 {
    let mut src = RandomSource::for_experiment(seed, "branches", 0);
    let mut worst: f64 = 0.0;
    for _ in 0..n {
        let x = 0.5 + 0.5 * src.next_uniform();
        let xi = UniformTriple::draw(&mut src);
        let s = subtriangle::max_side_y0(x, xi);
        let m = subtriangle::side_lengths_sq(ShapeCoord { x, y: 0.0 }, xi).max();
        worst = worst.max((s * s - m).abs());
    }
    worst
}

/// Draws of `chi` at apex abscissa `x`.
pub fn chi_samples(x: f64, n: usize, seed: u64) -> Result<Vec<f64>> {
    let mut src = RandomSource::for_experiment(seed, "chi", 0);
    (0..n)
        .map(|_| {
            let xi = UniformTriple::draw(&mut src);
            let (mu, nu) = mu_nu(x, xi.xi_a, xi.xi_b);
            subtriangle::chi(mu, nu, xi.xi_c)
        })
        .collect()
}

fn run_verify(config: &RunConfig, report: &mut SummaryReport) -> std::result::Result<(), RunError> {
    let mut entries = closed_form_entries(&config.x_grid)?;

    // Monte Carlo checks of the indicator terms
    for (label, x, z, branch, k) in [
        ("(I) at x=0.7, z=0.4", 0.7, 0.4, ChiBranch::Below, 0),
        ("(III) at x=0.7, z=0.4", 0.7, 0.4, ChiBranch::Above, 2),
        ("(I) at x=0.3, z=0.6", 0.3, 0.6, ChiBranch::Below, 0),
        ("(III) at x=0.3, z=0.6", 0.3, 0.6, ChiBranch::Above, 2),
    ] {
        let mut src = RandomSource::for_experiment(config.seed, label, 0);
        let mc = oracle::mc_integrate(subtriangle::chi_term_indicator(x, z, branch), 3, 10_000_000, &mut src)?;
        let (i, ii, iii) = subtriangle::chi_cdf_terms(x, z)?;
        let closed = [i, ii, iii][k];
        entries.push(VerificationEntry::new(
            &format!("{label}: closed form vs Monte Carlo"),
            "10^7 uniform draws, tolerance = 3 standard errors".into(),
            (mc.value - closed).abs(),
            mc.error_estimate,
        ));
    }

    // Monte Carlo against the same constants quadrature checked
    let mut src = RandomSource::for_experiment(config.seed, "mc-log-r", 0);
    let mc = oracle::mc_integrate(|p| (p[0] * p[1] * p[2] + (1.0 - p[0]) * (1.0 - p[1]) * (1.0 - p[2])).ln(), 3, 1_000_000, &mut src)?;
    entries.push(VerificationEntry::new(
        "E log R: closed form vs Monte Carlo",
        "10^6 draws, tolerance = 3 standard errors".into(),
        (mc.value - subtriangle::expected_log_r()).abs(),
        mc.error_estimate,
    ));
    let mut src = RandomSource::for_experiment(config.seed, "mc-log-s", 0);
    let mc = oracle::mc_integrate(|p| log_s_flat(0.75, p[0], p[1], p[2]), 3, 1_000_000, &mut src)?;
    entries.push(VerificationEntry::new(
        "E log S(3/4): closed form vs Monte Carlo",
        "10^6 draws, tolerance = 3 standard errors".into(),
        (mc.value - subtriangle::expected_log_s(0.75)?).abs(),
        mc.error_estimate,
    ));

    entries.push(VerificationEntry::new(
        "step vs vertex construction",
        format!("{} random (x, y > 0, xi)", config.samples),
        step_oracle_sweep(config.samples, config.seed)?,
        1e-10,
    ));
    let n_branch = config.samples.saturating_mul(10);
    entries.push(VerificationEntry::new(
        "S^2 = max side^2 at y = 0",
        format!("{n_branch} random (x, xi)"),
        branch_consistency_sweep(n_branch, config.seed),
        0.0,
    ));

    let chis = chi_samples(0.7, n_branch, config.seed)?;
    let ks = stats::ks_test(&chis, |v| v.clamp(0.0, 1.0))?;
    entries.push(VerificationEntry::new(
        "chi ~ U[0,1] at x = 0.7 (KS distance)",
        format!("{n_branch} draws, tolerance = 1% critical value"),
        ks.d_statistic,
        stats::ks_critical_1pct(ks.n),
    ));

    report.extend(entries.iter().map(VerificationEntry::claim));

    let log_x_gap: Vec<(f64, f64)> = config
        .x_grid
        .iter()
        .map(|&x| {
            (
                x,
                subtriangle::expected_log_s_with(x, subtriangle::LogSForm::LogX).unwrap_or(f64::NAN)
                    - subtriangle::expected_log_s(x).unwrap_or(f64::NAN),
            )
        })
        .collect();
    report::write_json(
        &out_file(config, report, "verification.json"),
        &serde_json::json!({
            "entries": entries,
            "log_x_variant_minus_closed_form": log_x_gap,
            "all_pass": entries.iter().all(|e| e.pass),
        }),
    )?;
    Ok(())
}

/// Runs `command` with defaults, writing into `out`.
pub fn run_default(command: CommandKind, out: &Path) -> std::result::Result<SummaryReport, RunError> {
    let mut c = RunConfig::defaults(command);
    c.out = out.to_path_buf();
    run(&c)
}
