//! Acceptance suite: one PASS/FAIL line per criterion, each with its runtime
//! budget. Runs as a single test so the criteria do not compete for cores.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use subdivlab::cli::{self, CommandKind, DEFAULT_SEED, DEFAULT_X_GRID};
use subdivlab::geometry::ShapeCoord;
use subdivlab::rng::{derive_seed, RandomSource};
use subdivlab::stats;
use subdivlab::subtriangle::{self, ChiBranch};
use subdivlab::{bisector, oracle};

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(id: u32, title: &str, budget_s: f64, f: impl FnOnce() -> Outcome) -> bool {
    let t = Instant::now();
    let out = f();
    let secs = t.elapsed().as_secs_f64();
    let in_time = secs < budget_s;
    let pass = out.pass && in_time;
    println!(
        "{} criterion {id:>2} {title}: {} [{secs:.2}s / budget {budget_s}s{}]",
        if pass { "PASS" } else { "FAIL" },
        out.detail,
        if in_time { "" } else { ", over budget" }
    );
    pass
}

fn c1_quad_rate() -> Outcome {
    let r = cli::quad_rate_check(40, 100, DEFAULT_SEED).unwrap();
    Outcome {
        pass: r.max_gap_rel_error <= 1e-12 && r.max_envelope_ratio <= 1.0,
        detail: format!(
            "max gap rel error {:.3e} (<= 1e-12), max defect/envelope {:.4} (<= 1)",
            r.max_gap_rel_error, r.max_envelope_ratio
        ),
    }
}

fn c2_quad_limit() -> Outcome {
    let (ts, _) = cli::quad_limit_samples(30, 100_000, DEFAULT_SEED).unwrap();
    let ks = stats::ks_test(&ts, |t| t.clamp(0.0, 1.0)).unwrap();
    Outcome {
        pass: ks.p_value > 0.001,
        detail: format!("X_30 KS D = {:.5}, p = {:.4} (> 0.001)", ks.d_statistic, ks.p_value),
    }
}

fn c3_contraction() -> Outcome {
    let c = cli::contraction_check(10_000, DEFAULT_SEED).unwrap();
    Outcome {
        pass: c.max_average <= -0.143841 + 1e-12,
        detail: format!("max pairwise contraction {:.6} (<= -0.143841)", c.max_average),
    }
}

fn c4_moments() -> Outcome {
    let m = bisector::estimate_moments(60, 1_000_000, derive_seed(DEFAULT_SEED, "acceptance-moments")).unwrap();
    let devs = [
        (m.mean_a - 1.0 / 3.0).abs(),
        (m.second_a - 1.0 / 7.0).abs(),
        (m.cross_ab - 2.0 / 21.0).abs(),
        (m.cov_ab + 1.0 / 63.0).abs(),
    ];
    Outcome {
        pass: devs.iter().all(|&d| d < 1e-3),
        detail: format!(
            "|dE a| {:.1e}, |dE a^2| {:.1e}, |dE ab| {:.1e}, |dCov| {:.1e} (all < 1e-3)",
            devs[0], devs[1], devs[2], devs[3]
        ),
    }
}

fn c5_step_oracle() -> Outcome {
    let d = cli::step_oracle_sweep(100_000, DEFAULT_SEED).unwrap();
    Outcome {
        pass: d <= 1e-10,
        detail: format!("max |step - vertex construction| {d:.2e} (<= 1e-10)"),
    }
}

fn c6_closed_forms() -> Outcome {
    let entries = cli::closed_form_entries(&DEFAULT_X_GRID).unwrap();
    let failed: Vec<_> = entries.iter().filter(|e| !e.pass).map(|e| e.name.clone()).collect();
    let worst = entries
        .iter()
        .map(|e| format!("{:.0e}", e.max_abs_deviation))
        .collect::<Vec<_>>()
        .join(",");
    Outcome {
        pass: failed.is_empty() && entries.len() >= 9,
        detail: format!("{} checks, deviations [{worst}], failed {failed:?}", entries.len()),
    }
}

/// `2/3 - pi^2/9`: the stationary rate, evaluated in closed form.
fn lambda_star() -> f64 {
    2.0 / 3.0 - std::f64::consts::PI.powi(2) / 9.0
}

fn c7_rate() -> Outcome {
    let e = subtriangle::lyapunov_estimate(200, 10_000, derive_seed(DEFAULT_SEED, "lyapunov"), ShapeCoord::EQUILATERAL)
        .unwrap();
    let bound_ok = e.slope + 3.0 * e.stderr < -0.3654;
    let match_ok = (e.slope - lambda_star()).abs() < 3.0 * e.stderr;
    Outcome {
        pass: bound_ok && match_ok && e.window_start == 50 && e.window_end == 200,
        detail: format!(
            "slope {:.5} +- {:.5} on [{}, {}]; slope + 3se = {:.5} (< -0.3654); |slope - {:.5}| = {:.5} (< 3se)",
            e.slope,
            e.stderr,
            e.window_start,
            e.window_end,
            e.slope + 3.0 * e.stderr,
            lambda_star(),
            (e.slope - lambda_star()).abs()
        ),
    }
}

fn c8_tail() -> Outcome {
    let rows = subtriangle::sigma_tail_check(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0], 1_000_000, DEFAULT_SEED).unwrap();
    let pass = rows.iter().all(|r| r.survival <= 2.0 * (-r.z).exp() + 3.0 * r.sigma);
    let cells = rows
        .iter()
        .map(|r| format!("z={}: {:.2e}<={:.2e}", r.z, r.survival, r.bound))
        .collect::<Vec<_>>()
        .join(", ");
    Outcome { pass, detail: cells }
}

fn c9_uniform_limit() -> Outcome {
    let xs =
        subtriangle::simulate_x_limit(50, 100_000, derive_seed(DEFAULT_SEED, "x-limit"), ShapeCoord::EQUILATERAL).unwrap();
    let ks = stats::ks_test(&xs, |x| (2.0 * x - 1.0).clamp(0.0, 1.0)).unwrap();

    let grid: Vec<f64> = (0..50).map(|i| (i as f64 + 0.5) / 50.0).collect();
    let mut identity: f64 = 0.0;
    for &x in &grid {
        for &z in &grid {
            let (a, b, c) = subtriangle::chi_cdf_terms(x, z).unwrap();
            identity = identity.max((a + b + c - z).abs());
        }
    }

    let mut mc_ok = true;
    let mut mc_dev: f64 = 0.0;
    for (k, (x, z, branch)) in [
        (0.7, 0.4, ChiBranch::Below),
        (0.7, 0.4, ChiBranch::Above),
        (0.3, 0.6, ChiBranch::Below),
        (0.3, 0.6, ChiBranch::Above),
    ]
    .into_iter()
    .enumerate()
    {
        let mut src = RandomSource::for_experiment(DEFAULT_SEED, "acceptance-chi-mc", k as u64);
        let mc = oracle::mc_integrate(subtriangle::chi_term_indicator(x, z, branch), 3, 4_000_000, &mut src).unwrap();
        let (i, _, iii) = subtriangle::chi_cdf_terms(x, z).unwrap();
        let closed = if branch == ChiBranch::Below { i } else { iii };
        mc_ok &= (mc.value - closed).abs() <= mc.error_estimate;
        mc_dev = mc_dev.max((mc.value - closed).abs() / mc.error_estimate);
    }
    Outcome {
        pass: ks.p_value > 0.001 && identity <= 1e-10 && mc_ok,
        detail: format!(
            "x_50 KS p = {:.4} (> 0.001); CDF identity {identity:.1e} (<= 1e-10); MC |dev|/errbar max {mc_dev:.2} (<= 1)",
            ks.p_value
        ),
    }
}

fn c10_event() -> Outcome {
    let ev = subtriangle::supermartingale_and_event_checks(&[], 1, 1_000_000, DEFAULT_SEED).unwrap();
    Outcome {
        pass: ev.frequency_pass && ev.bound_pass,
        detail: format!(
            "P(E) = {:.5} (0.01 +- {:.5}); max r on E = {:.4} (< 1/3)",
            ev.frequency,
            3.0 * ev.sigma,
            ev.max_r_on_event
        ),
    }
}

fn read_dir_files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            let name = e.file_name().to_string_lossy().into_owned();
            let mut bytes = std::fs::read(e.path()).unwrap();
            if name == "summary.json" {
                let mut v: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
                v.as_object_mut().unwrap().remove("wall_clock_seconds");
                bytes = serde_json::to_vec(&v).unwrap();
            }
            (name, bytes)
        })
        .collect()
}

fn c11_determinism() -> Outcome {
    let exe = env!("CARGO_BIN_EXE_subdivlab");
    let tmp = tempfile::tempdir().unwrap();
    let mut mismatches = Vec::new();
    let mut files = 0;
    for kind in [CommandKind::Quad, CommandKind::Bisector, CommandKind::Subtriangle, CommandKind::Verify] {
        let mut runs = Vec::new();
        for rep in 0..2 {
            let out = tmp.path().join(format!("{}-{rep}", kind.name()));
            let status = Command::new(exe)
                .arg(kind.name())
                .arg("--out")
                .arg(&out)
                .output()
                .unwrap()
                .status;
            if status.code() != Some(0) {
                mismatches.push(format!("{} exited {:?}", kind.name(), status.code()));
            }
            runs.push(read_dir_files(&out));
        }
        files += runs[0].len();
        if runs[0] != runs[1] {
            mismatches.push(kind.name().to_string());
        }
    }
    Outcome {
        pass: mismatches.is_empty(),
        detail: format!("{files} output files compared across reruns; mismatches {mismatches:?}"),
    }
}

#[test]
fn acceptance() {
    let results = [
        check(1, "quadrilateral rate", 1.0, c1_quad_rate),
        check(2, "quadrilateral limit law", 5.0, c2_quad_limit),
        check(3, "bisector contraction", 1.0, c3_contraction),
        check(4, "bisector moments", 60.0, c4_moments),
        check(5, "subtriangle oracle equivalence", 5.0, c5_step_oracle),
        check(6, "closed forms vs quadrature", 60.0, c6_closed_forms),
        check(7, "flattening rate", 120.0, c7_rate),
        check(8, "longest-side tail", 10.0, c8_tail),
        check(9, "uniform limit of x", 60.0, c9_uniform_limit),
        check(10, "event E", 10.0, c10_event),
        check(11, "determinism", f64::INFINITY, c11_determinism),
    ];
    let failed: Vec<usize> = results
        .iter()
        .enumerate()
        .filter(|(_, &ok)| !ok)
        .map(|(i, _)| i + 1)
        .collect();
    println!("acceptance: {}/{} criteria pass", results.len() - failed.len(), results.len());
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
