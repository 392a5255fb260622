//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so every line is printed regardless of
//! outcome; the process exits nonzero if any criterion fails.

use std::cmp::Ordering;
use std::f64::consts::PI;
use std::time::{Duration, Instant};

use clickspace::detector::{click_distribution_coherent, d_symbol_exact, d_symbol_table};
use clickspace::special::rational_to_f64;
use clickspace::{
    click_distribution, quasiprob, quasiprob_genfn, reference_quasiprob, replication_study, scan_line,
    significance_vs_s, truncation_for, DetectorArray, ExperimentConfig, LineGrid, OrderingParam, PhasePoint,
    ScanRecord, StateSpec, DEFAULT_TAIL_EPS,
};
use num_complex::Complex64;

mod common;
use common::{d_symbol_by_series, rat};

const NU: u64 = 10_000;

/// Id, name, runtime limit in seconds, check.
type Criterion = (u32, &'static str, Option<u64>, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Outcome {
            pass,
            detail: detail.into(),
        }
    }
}

fn det(n: usize, eta: f64) -> DetectorArray {
    DetectorArray::new(n, eta).unwrap()
}

fn s(v: f64) -> OrderingParam {
    OrderingParam::new(v).unwrap()
}

fn squeezed() -> StateSpec {
    StateSpec::SqueezedVacuum { r: 1.0 }
}

fn min_significance(rows: &[ScanRecord]) -> (f64, f64) {
    rows.iter()
        .filter_map(|r| r.significance.map(|z| (z, r.re_alpha)))
        .fold(
            (f64::INFINITY, f64::NAN),
            |best, cur| if cur.0 < best.0 { cur } else { best },
        )
}

fn timed(limit: Option<Duration>, body: impl FnOnce() -> Outcome) -> Outcome {
    let start = Instant::now();
    let out = body();
    let elapsed = start.elapsed();
    match limit {
        Some(limit) if elapsed >= limit => Outcome::new(
            false,
            format!("{}; runtime {:.2?} exceeds {:.0?}", out.detail, elapsed, limit),
        ),
        _ => Outcome::new(out.pass, format!("{}; runtime {:.2?}", out.detail, elapsed)),
    }
}

/// Optimum significance of the squeezed-vacuum scan.
fn criterion_1() -> Outcome {
    let grid = LineGrid::new(0.0, 2.0, 201).unwrap();
    let rows = scan_line(&squeezed(), det(6, 0.9), s(0.0), NU, grid, 0.0, DEFAULT_TAIL_EPS).unwrap();
    let (z, at) = min_significance(&rows);
    let pass = (z - -8.8).abs() <= 0.5 && (at - 0.8).abs() <= 0.1 + 1e-12;
    Outcome::new(
        pass,
        format!("min significance {z:.4} at Re alpha = {at:.2} (want -8.8 +- 0.5 at 0.8 +- 0.1)"),
    )
}

/// Negativity near the origin and saturation far out.
fn criterion_2() -> Outcome {
    let detector = det(6, 0.9);
    let near = scan_line(
        &squeezed(),
        detector,
        s(0.0),
        NU,
        LineGrid::new(-2.0, 2.0, 401).unwrap(),
        0.0,
        DEFAULT_TAIL_EPS,
    )
    .unwrap();
    let min_near = near.iter().map(|r| r.p_value).fold(f64::INFINITY, f64::min);
    let saturation = 2.0 / PI * (11.0f64 / 9.0).powi(6);
    let far = scan_line(
        &squeezed(),
        detector,
        s(0.0),
        NU,
        LineGrid::new(6.0, 8.0, 201).unwrap(),
        0.0,
        DEFAULT_TAIL_EPS,
    )
    .unwrap();
    let (worst_dev, worst_at) = far
        .iter()
        .map(|r| ((r.p_value - saturation).abs() / saturation, r.re_alpha))
        .fold((0.0, f64::NAN), |best, cur| if cur.0 > best.0 { cur } else { best });
    let pass = min_near < 0.0 && worst_dev <= 0.01;
    Outcome::new(
        pass,
        format!(
            "min P_N on [-2,2] = {min_near:.6}; saturation {saturation:.6}, worst relative deviation on [6,8] \
             {:.3}% at Re alpha = {worst_at:.2} (want <= 1%)",
            100.0 * worst_dev
        ),
    )
}

/// Significance at the origin for Fock states versus `s` and `eta`.
fn criterion_3() -> Outcome {
    let s_grid = [-0.5, 0.0, 0.5];
    let mut pass = true;
    let mut notes = Vec::new();
    for (photons, n) in [(1u32, 4usize), (3, 8)] {
        let state = StateSpec::Fock { n: photons };
        let mut by_eta = Vec::new();
        for eta in [0.6, 0.9] {
            let rows =
                significance_vs_s(&state, det(n, eta), PhasePoint::origin(), NU, &s_grid, DEFAULT_TAIL_EPS).unwrap();
            let z: Vec<f64> = rows.iter().map(|r| r.significance.unwrap_or(f64::NAN)).collect();
            let negative = z.iter().all(|&v| v < 0.0);
            let decreasing = z.windows(2).all(|w| w[1] < w[0]);
            if !(negative && decreasing) {
                pass = false;
                notes.push(format!(
                    "n={photons} N={n} eta={eta}: {}{}",
                    if negative { "" } else { "not all negative " },
                    if decreasing { "" } else { "not decreasing in s" }
                ));
            }
            by_eta.push(z);
        }
        for (i, sv) in s_grid.iter().enumerate() {
            if by_eta[1][i].partial_cmp(&by_eta[0][i]) != Some(Ordering::Less) {
                pass = false;
                notes.push(format!(
                    "n={photons} N={n} s={sv}: eta=0.9 not more negative than eta=0.6"
                ));
            }
        }
        notes.push(format!(
            "n={photons} N={n} significances eta=0.6 {:.2?}, eta=0.9 {:.2?}",
            by_eta[0], by_eta[1]
        ));
    }
    Outcome::new(pass, notes.join("; "))
}

/// Residual negativity at low `s` and reduced efficiency.
fn criterion_4() -> Outcome {
    let grid = LineGrid::new(0.0, 2.0, 201).unwrap();
    let rows = scan_line(&squeezed(), det(6, 0.6), s(-0.25), NU, grid, 0.0, DEFAULT_TAIL_EPS).unwrap();
    let (z, at) = min_significance(&rows);
    Outcome::new(
        z < 0.0,
        format!("min significance {z:.4} at Re alpha = {at:.2} (want < 0)"),
    )
}

/// Classical states never produce negative values for even `N`.
fn criterion_5() -> Outcome {
    let s_grid = [-1.0, -0.5, 0.0, 0.5, 0.9];
    let mut states = Vec::new();
    for amp in [0.0, 0.5, 1.0, 2.0] {
        states.push(StateSpec::Coherent {
            beta: Complex64::new(amp, 0.0),
        });
    }
    for mean_n in [0.2, 1.0, 3.0] {
        states.push(StateSpec::Thermal { mean_n });
    }
    let axis = LineGrid::new(-2.0, 2.0, 21).unwrap().points();
    let mut worst = (f64::INFINITY, String::new());
    let mut evaluated = 0usize;
    for n in [2usize, 4, 6, 8] {
        for eta in [0.6, 0.9] {
            let detector = det(n, eta);
            for state in &states {
                for &re in &axis {
                    for &im in &axis {
                        let rows =
                            significance_vs_s(state, detector, PhasePoint::new(re, im), NU, &s_grid, DEFAULT_TAIL_EPS)
                                .unwrap();
                        for r in rows {
                            evaluated += 1;
                            if r.p_value < worst.0 {
                                worst = (
                                    r.p_value,
                                    format!("{state} N={n} eta={eta} s={} alpha=({re},{im})", r.s),
                                );
                            }
                        }
                    }
                }
            }
        }
    }
    Outcome::new(
        worst.0 >= -1e-10,
        format!(
            "{evaluated} values, minimum {:.3e} for {} (want >= -1e-10)",
            worst.0, worst.1
        ),
    )
}

/// Exact oracles for the pipeline.
fn criterion_6() -> Outcome {
    let mut failures = Vec::new();

    // D-symbols against the generating-function derivative, exactly.
    for (eta_q, eta_f) in [(rat(1, 2), 0.5), (rat(3, 5), 0.6), (rat(9, 10), 0.9)] {
        for n in 1..=8usize {
            let table = d_symbol_table(det(n, eta_f), 20).unwrap();
            for m in 0..=20 {
                for k in 0..=n {
                    let series = d_symbol_by_series(n, &eta_q, k, m);
                    if d_symbol_exact(n, &eta_q, k, m) != series {
                        failures.push(format!("exact D N={n} eta={eta_f} k={k} m={m}"));
                    }
                    let expected = rational_to_f64(&series);
                    if (table.get(k, m) - expected).abs() > 1e-12 * expected.abs() + 1e-15 {
                        failures.push(format!("tabulated D N={n} eta={eta_f} k={k} m={m}"));
                    }
                }
            }
        }
    }

    // Click-statistics route against the generating-function route.
    let states = [
        StateSpec::Fock { n: 1 },
        StateSpec::Fock { n: 3 },
        squeezed(),
        StateSpec::Coherent {
            beta: Complex64::new(0.4, -0.2),
        },
        StateSpec::Thermal { mean_n: 1.0 },
    ];
    let alphas = [(0.0, 0.0), (0.5, 0.0), (0.8, 0.3), (-1.5, 0.2)];
    let mut route_gap: f64 = 0.0;
    for state in &states {
        for &(re, im) in &alphas {
            let pnd = state.distribution(PhasePoint::new(re, im), DEFAULT_TAIL_EPS).unwrap();
            for n in [2usize, 4, 6, 8] {
                for eta in [0.6, 0.9] {
                    let clicks = click_distribution(&pnd, det(n, eta)).unwrap();
                    for sv in [-0.5, 0.0, 0.5] {
                        let a = quasiprob(&clicks, s(sv)).unwrap();
                        let b = quasiprob_genfn(&pnd, det(n, eta), s(sv)).unwrap();
                        route_gap = route_gap.max((a - b).abs());
                    }
                }
            }
        }
    }
    if route_gap > 1e-9 {
        failures.push(format!("route gap {route_gap:e}"));
    }

    // Coherent binomial closed form against the Fock contraction.
    let mut coherent_gap: f64 = 0.0;
    for beta in [
        Complex64::new(0.0, 0.0),
        Complex64::new(0.5, 0.3),
        Complex64::new(2.0, -1.0),
    ] {
        for &(re, im) in &alphas {
            let alpha = PhasePoint::new(re, im);
            for n in [1usize, 2, 5, 8] {
                for eta in [0.6, 0.9, 1.0] {
                    let tail = truncation_for(det(n, eta), s(0.0), DEFAULT_TAIL_EPS).unwrap();
                    let pnd = StateSpec::Coherent { beta }.distribution(alpha, tail).unwrap();
                    let contracted = click_distribution(&pnd, det(n, eta)).unwrap();
                    let closed = click_distribution_coherent(beta - alpha.0, det(n, eta)).unwrap();
                    for (a, b) in contracted.probs().iter().zip(closed.probs()) {
                        coherent_gap = coherent_gap.max((a - b).abs());
                    }
                    for sv in [-0.5, 0.0] {
                        let a = quasiprob(&contracted, s(sv)).unwrap();
                        let b = quasiprob(&closed, s(sv)).unwrap();
                        coherent_gap = coherent_gap.max((a - b).abs());
                    }
                }
            }
        }
    }
    if coherent_gap > 1e-10 {
        failures.push(format!("coherent gap {coherent_gap:e}"));
    }

    // Single photon on two perfect detectors.
    let pnd = StateSpec::Fock { n: 1 }
        .distribution(PhasePoint::origin(), DEFAULT_TAIL_EPS)
        .unwrap();
    let clicks = click_distribution(&pnd, det(2, 1.0)).unwrap();
    let single = clicks.probs().to_vec();
    if single != [0.0, 1.0, 0.0] {
        failures.push(format!("single-photon clicks {single:?}"));
    }
    let value = quasiprob(&clicks, s(0.0)).unwrap();
    if (value + 2.0 / PI).abs() > 1e-12 {
        failures.push(format!("single-photon value {value}"));
    }

    Outcome::new(
        failures.is_empty(),
        format!(
            "route gap {route_gap:.2e}, coherent gap {coherent_gap:.2e}, single-photon clicks {single:?}, \
             P_2(0;0) + 2/pi = {:.1e}{}",
            value + 2.0 / PI,
            if failures.is_empty() {
                String::new()
            } else {
                format!("; failures: {}", failures.join(", "))
            }
        ),
    )
}

/// First-order convergence towards the ideal quasiprobability.
fn criterion_7() -> Outcome {
    let state = StateSpec::Coherent {
        beta: Complex64::new(0.5, 0.0),
    };
    let exact = reference_quasiprob(&state, PhasePoint::origin(), s(0.0)).unwrap();
    let error = |n: usize| {
        let rows = significance_vs_s(&state, det(n, 0.8), PhasePoint::origin(), NU, &[0.0], DEFAULT_TAIL_EPS).unwrap();
        (rows[0].p_value - exact).abs()
    };
    let (e128, e256) = (error(128), error(256));
    let ratio = e128 / e256;
    Outcome::new(
        (1.7..=2.3).contains(&ratio),
        format!("error N=128 {e128:.4e}, N=256 {e256:.4e}, ratio {ratio:.4} (want [1.7, 2.3])"),
    )
}

/// Replicated experiments against the analytic error model.
fn criterion_8() -> Outcome {
    let config = ExperimentConfig::new(NU, 20_240_601, 1000).unwrap();
    let cases = [
        (
            "fock n=1 N=4",
            StateSpec::Fock { n: 1 },
            det(4, 0.9),
            PhasePoint::origin(),
        ),
        ("squeezed r=1 N=6", squeezed(), det(6, 0.9), PhasePoint::new(0.8, 0.0)),
    ];
    let mut pass = true;
    let mut notes = Vec::new();
    for (label, state, detector, alpha) in cases {
        let study = replication_study(&state, detector, alpha, s(0.0), &config, DEFAULT_TAIL_EPS).unwrap();
        let ratio = study.empirical_std / study.stderr_exact_analytic;
        let bias = (study.mean_estimate - study.exact_value).abs();
        let bias_limit = 4.0 * study.stderr_exact_analytic / (config.replications as f64).sqrt();
        let ok = (0.9..=1.1).contains(&ratio) && bias <= bias_limit;
        pass &= ok;
        notes.push(format!(
            "{label}: std/stderr_exact {ratio:.4}, |bias| {bias:.3e} vs limit {bias_limit:.3e}, \
             stderr_paper/stderr_exact {:.4}",
            study.stderr_paper_mean / study.stderr_exact_analytic
        ));
    }
    Outcome::new(pass, notes.join("; "))
}

fn main() {
    let criteria: [Criterion; 8] = [
        (1, "squeezed-vacuum optimum significance", Some(10), criterion_1),
        (2, "negativity and saturation", None, criterion_2),
        (3, "Fock significance trends in s and eta", Some(5), criterion_3),
        (4, "negativity at s = -0.25, eta = 0.6", None, criterion_4),
        (5, "classical positivity for even N", Some(60), criterion_5),
        (6, "exact pipeline oracles", None, criterion_6),
        (7, "convergence rate in N", None, criterion_7),
        (8, "error-model validation by replication", Some(60), criterion_8),
    ];
    let mut failed = 0;
    for (id, name, limit, run) in criteria {
        let out = timed(limit.map(Duration::from_secs), run);
        if !out.pass {
            failed += 1;
        }
        println!(
            "{} criterion {id} ({name}): {}",
            if out.pass { "PASS" } else { "FAIL" },
            out.detail
        );
    }
    println!("acceptance: {} passed, {failed} failed", 8 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
