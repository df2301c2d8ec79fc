//! Acceptance criteria 1–11. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::process::ExitCode;

use esc_core::metrics::{final_window, fitted_decay_rate, time_to_band};
use esc_core::scenario::{preset, Scenario};
use esc_core::validation::{averaged_decay_rate, frozen_riccati, omega_trend_distances, run_suite, OMEGA_SWEEP};
use esc_core::{run_problem, QuadraticMap, Trajectory};
use nalgebra::DMatrix;

const SEEDS: std::ops::RangeInclusive<u64> = 1..=10;
const REQUIRED: usize = 9;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

/// Runs `name` once per seed, in parallel.
fn per_seed<T: Send>(name: &str, f: impl Fn(&Scenario, &Trajectory) -> T + Sync) -> Vec<T> {
    let base = preset(name).expect("preset exists");
    std::thread::scope(|scope| {
        let handles: Vec<_> = SEEDS
            .map(|seed| {
                let (base, f) = (&base, &f);
                scope.spawn(move || {
                    let mut s = base.clone();
                    s.sim.seed = seed;
                    let traj = run_problem(&s.to_problem().expect("valid preset")).expect("runs");
                    f(&s, &traj)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker")).collect()
    })
}

/// Final 10% window: |y − y*| ≤ 0.25 and |θ − θ*|∞ ≤ 0.2.
fn converged(s: &Scenario, traj: &Trajectory) -> (bool, f64, f64) {
    if traj.diverged() {
        return (false, f64::NAN, f64::NAN);
    }
    let w = final_window(traj, s.sim.t_end, 0.10).expect("window has samples");
    let dy = (w.y - s.map.y_star).abs();
    let dtheta = w
        .theta
        .iter()
        .zip(&s.map.theta_star)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    (dy <= 0.25 && dtheta <= 0.2, dy, dtheta)
}

fn convergence(name: &str) -> Outcome {
    let runs = per_seed(name, converged);
    let ok = runs.iter().filter(|r| r.0).count();
    let worst_y = runs.iter().map(|r| r.1).fold(0.0, f64::max);
    let worst_t = runs.iter().map(|r| r.2).fold(0.0, f64::max);
    outcome(
        ok >= REQUIRED,
        format!("{name}: {ok}/10 seeds converged; worst |y−5| = {worst_y:.3}, worst |θ−θ*|∞ = {worst_t:.3}"),
    )
}

fn entrywise(got: &[f64], want: &[f64]) -> f64 {
    got.iter()
        .zip(want)
        .map(|(g, w)| ((g - w) / w).abs())
        .fold(0.0, f64::max)
}

fn fig7() -> (Scenario, Trajectory) {
    let s = preset("fig7").unwrap();
    let traj = run_problem(&s.to_problem().unwrap()).unwrap();
    (s, traj)
}

fn criterion_2() -> Outcome {
    let times = per_seed("fig4", |_, traj| traj.divergence.as_ref().map(|d| d.t));
    let tripped = times.iter().flatten().count();
    let latest = times.iter().flatten().copied().fold(0.0, f64::max);
    outcome(
        tripped >= REQUIRED,
        format!("fig4: guard tripped in {tripped}/10 seeds (latest at {latest:.0} s)"),
    )
}

fn criterion_5() -> Outcome {
    let (s, traj) = fig7();
    let w = final_window(&traj, s.sim.t_end, 0.25).expect("window");
    let h = [-2.0, -2.0, -2.0, -4.0];
    let err = entrywise(&w.hhat, &h);
    outcome(
        err <= 0.15,
        format!("mean Ĥ over final 25% = {:.3?}, max entrywise error {:.1}%", w.hhat, 100.0 * err),
    )
}

fn criterion_6() -> Outcome {
    let (_, traj) = fig7();
    let gamma = traj.last().expect("rows").gamma().to_vec();
    let want = [-1.0, 0.5, 0.5, -0.5];
    let err = entrywise(&gamma, &want);
    outcome(
        !traj.diverged() && err <= 0.15,
        format!("Γ(t_end) = {gamma:.3?}, max entrywise error {:.1}%", 100.0 * err),
    )
}

fn band_time(s: &Scenario, traj: &Trajectory) -> Option<f64> {
    time_to_band(traj, s.map.y_star, 0.05, 10.0)
}

fn criterion_7() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for pair in ["fig13", "fig14"] {
        let newton = per_seed(&format!("{pair}-newton"), band_time);
        let gradient = per_seed(&format!("{pair}-gradient"), band_time);
        let wins = newton
            .iter()
            .zip(&gradient)
            .filter(|(n, g)| match (n, g) {
                (Some(n), Some(g)) => n < g,
                (Some(_), None) => true,
                _ => false,
            })
            .count();
        let median = |v: &[Option<f64>]| {
            let mut t: Vec<f64> = v.iter().map(|x| x.unwrap_or(f64::INFINITY)).collect();
            t.sort_by(f64::total_cmp);
            t[t.len() / 2]
        };
        ok &= wins >= REQUIRED;
        parts.push(format!(
            "{pair}: Newton faster in {wins}/10 (median {:.0} s vs {:.0} s)",
            median(&newton),
            median(&gradient)
        ));
    }
    outcome(ok, parts.join("; "))
}

fn criterion_8() -> Outcome {
    let k = 0.005;
    let mut ok = true;
    let mut parts = Vec::new();
    for (c, tol) in [(20.0, 0.05), (200.0, 0.01)] {
        let rate = averaged_decay_rate(c).expect("oracle runs");
        let rel = (rate - k).abs() / k;
        ok &= rel <= tol;
        parts.push(format!("c = {c}: slope −{rate:.6} ({:.2}% off, tol {}%)", 100.0 * rel, 100.0 * tol));
    }
    outcome(ok, parts.join("; "))
}

fn criterion_9() -> Outcome {
    let map = QuadraticMap::source_seeking();
    let h = map.hessian().clone();
    let h_inv = map.hessian_inverse().unwrap();
    let gamma0 = &h_inv + DMatrix::from_row_slice(2, 2, &[0.05, 0.02, 0.02, 0.05]);
    let omega_r = 0.007;
    let err = frozen_riccati(&h, &gamma0, omega_r, 0.01, 3000.0, 100).unwrap();
    let rate = fitted_decay_rate(&err, 0.0, 1e-12).unwrap_or(f64::NAN);
    let rel = (rate - omega_r).abs() / omega_r;
    outcome(
        rel <= 0.10,
        format!("fitted rate {rate:.6} vs ω_r = {omega_r} ({:.2}% off, tol 10%)", 100.0 * rel),
    )
}

fn criterion_10() -> Outcome {
    let d = omega_trend_distances().expect("sweep runs");
    let monotone = d.windows(2).all(|w| w[1] <= w[0]);
    outcome(monotone, format!("RMS distance at ω = {OMEGA_SWEEP:?}: {d:.4?}"))
}

fn criterion_11() -> Outcome {
    let mut ok = true;
    let mut failed = Vec::new();
    let mut total = 0;
    for suite in ["buffers", "dither", "riccati", "equilibrium", "reduction"] {
        let rep = run_suite(suite).expect("suite runs");
        total += rep.checks.len();
        for c in rep.checks.iter().filter(|c| !c.passed) {
            failed.push(format!("{suite}/{}: {}", c.name, c.detail));
        }
        ok &= rep.passed();
    }
    let detail = if failed.is_empty() {
        format!("{total} checks in buffers, dither, riccati, equilibrium, reduction")
    } else {
        failed.join("; ")
    };
    outcome(ok, detail)
}

type Criterion = (u32, &'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        (1, "delay-free convergence", || convergence("fig2")),
        (2, "instability without compensation", criterion_2),
        (3, "distinct-delay compensation", || convergence("fig7")),
        (4, "equal-delay compensation", || convergence("fig11")),
        (5, "Hessian identification", criterion_5),
        (6, "Hessian-inverse identification", criterion_6),
        (7, "Newton faster than gradient", criterion_7),
        (8, "averaged decay rate", criterion_8),
        (9, "linearized Riccati rate", criterion_9),
        (10, "tracking error trend in ω", criterion_10),
        (11, "property suites", criterion_11),
    ];
    // Honour `cargo test -- <filter>` loosely: run everything unless a
    // numeric filter picks one criterion.
    let only: Option<u32> = std::env::args().skip(1).find_map(|a| a.parse().ok());
    let mut failures = 0;
    for (n, title, run) in criteria {
        if only.is_some_and(|k| k != n) {
            continue;
        }
        let o = run();
        let tag = if o.passed { "PASS" } else { "FAIL" };
        println!("{tag} criterion {n} ({title}): {}", o.detail);
        failures += usize::from(!o.passed);
    }
    if failures > 0 {
        println!("{failures} criterion(s) failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
