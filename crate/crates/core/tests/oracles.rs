//! Independent cross-checks of the exact pipeline.
//!
//! Each oracle reaches the same quantity by a different route than the
//! library: symbolic series, direct physical simulation, dense matrix
//! exponentials or numerical quadrature.

#![allow(clippy::needless_range_loop)]

use clickspace::detector::{d_symbol_exact, d_symbol_table, DetectorArray};
use clickspace::special::rational_to_f64;
use clickspace::states::{
    displaced_fock_distribution, displaced_squeezed_vacuum_distribution, squeezed_vacuum_amplitudes,
    thermal_distribution, PhasePoint, DEFAULT_TAIL_EPS,
};
use clickspace::{
    click_distribution, estimate_point, quasiprob, quasiprob_genfn, sample_clicks, stderr_exact, stderr_paper, weight,
    ExperimentConfig, OrderingParam, StateSpec,
};
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;

mod common;
use common::{d_symbol_by_series, rat};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn d_symbols_equal_limit_derivative_definition() {
    for (eta_q, eta_f) in [(rat(1, 2), 0.5), (rat(9, 10), 0.9)] {
        for n in 1..=8 {
            let table = d_symbol_table(DetectorArray::new(n, eta_f).unwrap(), 20).unwrap();
            for m in 0..=20 {
                for k in 0..=n {
                    let series = d_symbol_by_series(n, &eta_q, k, m);
                    assert_eq!(d_symbol_exact(n, &eta_q, k, m), series, "N={n} k={k} m={m}");
                    let expected = rational_to_f64(&series);
                    let got = table.get(k, m);
                    assert!(
                        (got - expected).abs() <= 1e-12 * expected.abs() + 1e-15,
                        "N={n} eta={eta_f} k={k} m={m}: {got} vs {expected}"
                    );
                }
            }
        }
    }
}

#[test]
fn d_symbols_match_photon_by_photon_recursion() {
    // q_{m+1}(k) = q_m(k) (1 - eta + eta k / N) + q_m(k-1) eta (N - k + 1) / N
    for &(n, eta) in &[(6usize, 0.9), (8, 0.6), (32, 0.3)] {
        let max_m = 600;
        let table = d_symbol_table(DetectorArray::new(n, eta).unwrap(), max_m).unwrap();
        let mut q = vec![0.0; n + 1];
        q[0] = 1.0;
        for m in 0..=max_m {
            for k in 0..=n {
                assert!((table.get(k, m) - q[k]).abs() < 1e-12, "N={n} k={k} m={m}");
            }
            let mut next = vec![0.0; n + 1];
            for k in 0..=n {
                next[k] += q[k] * (1.0 - eta + eta * k as f64 / n as f64);
                if k < n {
                    next[k + 1] += q[k] * eta * (n - k) as f64 / n as f64;
                }
            }
            q = next;
        }
    }
}

#[test]
fn fock_clicks_match_physical_monte_carlo() {
    let (photons, n, eta) = (3usize, 8usize, 0.6);
    let detector = DetectorArray::new(n, eta).unwrap();
    let pnd = displaced_fock_distribution(photons, PhasePoint::origin(), DEFAULT_TAIL_EPS).unwrap();
    let clicks = click_distribution(&pnd, detector).unwrap();

    let trials = 10_000_000u64;
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut counts = vec![0u64; n + 1];
    for _ in 0..trials {
        let mut occupied = 0u32;
        for _ in 0..photons {
            if rng.random::<f64>() < eta {
                occupied |= 1 << rng.random_range(0..n);
            }
        }
        counts[occupied.count_ones() as usize] += 1;
    }
    for k in 0..=n {
        let c = clicks.probs()[k];
        let freq = counts[k] as f64 / trials as f64;
        let se = (c * (1.0 - c) / trials as f64).sqrt();
        assert!((freq - c).abs() <= 4.0 * se + 1e-12, "k={k}: {freq} vs {c}");
    }
}

fn ladder(dim: usize) -> DMatrix<Complex64> {
    DMatrix::from_fn(dim, dim, |i, j| {
        if j == i + 1 {
            Complex64::new((j as f64).sqrt(), 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

fn expm_displacement(gamma: Complex64, dim: usize) -> DMatrix<Complex64> {
    let a = ladder(dim);
    let ad = a.adjoint();
    (ad * gamma - a * gamma.conj()).exp()
}

#[test]
fn displaced_fock_matches_matrix_exponential() {
    let dim = 140;
    for &(n, alpha) in &[
        (0usize, Complex64::new(1.0, 0.0)),
        (1, Complex64::new(0.3, -0.9)),
        (3, Complex64::new(-1.4, 0.5)),
    ] {
        let d = expm_displacement(-alpha, dim);
        let pnd = displaced_fock_distribution(n, PhasePoint(alpha), DEFAULT_TAIL_EPS).unwrap();
        for (m, p) in pnd.probs().iter().enumerate().take(40) {
            let expected = d[(m, n)].norm_sqr();
            assert!((p - expected).abs() < 1e-11, "n={n} m={m}: {p} vs {expected}");
        }
    }
}

#[test]
fn squeezed_states_match_matrix_exponential() {
    let dim = 200;
    let a = ladder(dim);
    let ad = a.adjoint();
    let r = 1.0;
    let generator = (&a * &a - &ad * &ad) * Complex64::new(0.5 * r, 0.0);
    let mut vac = nalgebra::DVector::from_element(dim, Complex64::new(0.0, 0.0));
    vac[0] = Complex64::new(1.0, 0.0);
    let xi = generator.exp() * vac;

    for &alpha in &[
        Complex64::new(0.0, 0.0),
        Complex64::new(0.8, 0.0),
        Complex64::new(0.0, 1.1),
        Complex64::new(1.5, -0.7),
    ] {
        let out = expm_displacement(-alpha, dim) * &xi;
        let pnd = displaced_squeezed_vacuum_distribution(r, PhasePoint(alpha), DEFAULT_TAIL_EPS).unwrap();
        for (m, p) in pnd.probs().iter().enumerate().take(60) {
            assert!((p - out[m].norm_sqr()).abs() < 1e-10, "alpha={alpha} m={m}");
        }
        let mean: f64 = (0..120).map(|m| m as f64 * out[m].norm_sqr()).sum();
        assert!((pnd.mean() - mean).abs() < 1e-8, "alpha={alpha}");
    }
}

#[test]
fn squeezed_amplitudes_match_closed_form() {
    for &r in &[0.3, 1.0, 2.0] {
        let (amps, _) = squeezed_vacuum_amplitudes(r, 1e-30);
        let (t, sech) = (f64::tanh(r), 1.0 / f64::cosh(r));
        for (j, c) in amps.iter().step_by(2).enumerate().take(60) {
            // sqrt((2j)!)/(2^j j!) via logs
            let ln = 0.5 * clickspace::special::ln_factorial(2 * j)
                - j as f64 * 2f64.ln()
                - clickspace::special::ln_factorial(j);
            let expected = sech.sqrt() * ln.exp() * t.powi(j as i32);
            assert!((c.abs() - expected).abs() < 1e-13, "r={r} j={j}");
        }
        assert!(amps.iter().skip(1).step_by(2).all(|&c| c == 0.0));
    }
}

#[test]
fn displaced_thermal_matches_p_function_quadrature() {
    let (mean_n, alpha) = (0.5, Complex64::new(1.0, 0.0));
    let pnd = thermal_distribution(mean_n, PhasePoint(alpha), DEFAULT_TAIL_EPS).unwrap();
    // Gaussian P function exp(-|b|^2/nbar)/(pi nbar), midpoint rule
    let (half, steps) = (8.0 * mean_n.sqrt() + 1.0, 500);
    let h = 2.0 * half / steps as f64;
    let m_max = 20;
    let mut quad = vec![0.0; m_max];
    for i in 0..steps {
        for j in 0..steps {
            let b = Complex64::new(-half + (i as f64 + 0.5) * h, -half + (j as f64 + 0.5) * h);
            let weight = (-b.norm_sqr() / mean_n).exp() / (std::f64::consts::PI * mean_n) * h * h;
            let lambda = (b - alpha).norm_sqr();
            let mut poisson = (-lambda).exp();
            for (m, q) in quad.iter_mut().enumerate() {
                if m > 0 {
                    poisson *= lambda / m as f64;
                }
                *q += weight * poisson;
            }
        }
    }
    for (m, q) in quad.iter().enumerate() {
        assert!((pnd.probs()[m] - q).abs() < 1e-9, "m={m}: {} vs {q}", pnd.probs()[m]);
    }
}

#[test]
fn click_and_generating_function_routes_agree() {
    let states = [
        StateSpec::Fock { n: 1 },
        StateSpec::Fock { n: 3 },
        StateSpec::SqueezedVacuum { r: 1.0 },
        StateSpec::Coherent {
            beta: Complex64::new(0.4, -0.2),
        },
        StateSpec::Thermal { mean_n: 1.0 },
    ];
    let alphas = [
        Complex64::new(0.0, 0.0),
        Complex64::new(0.5, 0.0),
        Complex64::new(0.8, 0.3),
        Complex64::new(-1.5, 0.2),
    ];
    for state in &states {
        for &alpha in &alphas {
            let pnd = state.distribution(PhasePoint(alpha), DEFAULT_TAIL_EPS).unwrap();
            for n in [2usize, 4, 6, 8] {
                for eta in [0.6, 0.9] {
                    let det = DetectorArray::new(n, eta).unwrap();
                    let clicks = click_distribution(&pnd, det).unwrap();
                    for s in [-0.5, 0.0, 0.5] {
                        let s = OrderingParam::new(s).unwrap();
                        let a = quasiprob(&clicks, s).unwrap();
                        let b = quasiprob_genfn(&pnd, det, s).unwrap();
                        assert!(
                            (a - b).abs() < 1e-9,
                            "{state} alpha={alpha} N={n} eta={eta}: {a} vs {b}"
                        );
                    }
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, .. ProptestConfig::default() })]

    #[test]
    fn classical_states_are_nonnegative_for_even_arrays(
        thermal in any::<bool>(),
        amp in 0.0f64..2.5,
        phase in 0.0f64..std::f64::consts::TAU,
        re in -2.5f64..2.5,
        im in -2.5f64..2.5,
        half_n in 1usize..6,
        eta in 0.05f64..1.0,
        s in -1.5f64..0.9,
    ) {
        let state = if thermal {
            StateSpec::Thermal { mean_n: amp * amp }
        } else {
            StateSpec::Coherent { beta: Complex64::from_polar(amp, phase) }
        };
        let det = DetectorArray::new(2 * half_n, eta).unwrap();
        let s = OrderingParam::new(s).unwrap();
        let value = estimate_point(&state, det, PhasePoint::new(re, im), s, 1, DEFAULT_TAIL_EPS).unwrap().value;
        prop_assert!(value >= -1e-10, "{} gives {}", state, value);
    }

    #[test]
    fn click_distributions_are_complete(
        kind in 0u8..4,
        param in 0.0f64..2.0,
        re in -3.0f64..3.0,
        im in -3.0f64..3.0,
        n in 1usize..17,
        eta in 0.05f64..1.0,
    ) {
        let state = match kind {
            0 => StateSpec::Coherent { beta: Complex64::new(param, 0.0) },
            1 => StateSpec::Fock { n: (param * 3.0) as u32 },
            2 => StateSpec::Thermal { mean_n: param },
            _ => StateSpec::SqueezedVacuum { r: param },
        };
        let pnd = state.distribution(PhasePoint::new(re, im), DEFAULT_TAIL_EPS).unwrap();
        let total: f64 = pnd.probs().iter().sum::<f64>() + pnd.tail_bound();
        prop_assert!((total - 1.0).abs() <= 1e-9);
        let clicks = click_distribution(&pnd, DetectorArray::new(n, eta).unwrap()).unwrap();
        let sum: f64 = clicks.probs().iter().sum();
        prop_assert!((sum - 1.0).abs() <= 1e-9);
    }
}

/// Both error formulas against 10^5 simulated experiments of 10^4 shots.
#[test]
fn error_formulas_match_massive_replication() {
    let detector = DetectorArray::new(4, 0.9).unwrap();
    let s = OrderingParam::new(0.0).unwrap();
    let nu = 10_000u64;
    let replications = 100_000usize;
    let pnd = displaced_fock_distribution(1, PhasePoint::origin(), DEFAULT_TAIL_EPS).unwrap();
    let clicks = click_distribution(&pnd, detector).unwrap();
    let w = weight(s, detector.efficiency()).unwrap();
    let pre = s.prefactor();

    // Per-bin frequency moments and estimator moments, accumulated in one pass.
    let config = ExperimentConfig::new(nu, 2024, replications).unwrap();
    let bins = detector.n_detectors() + 1;
    let (mut f1, mut f2) = (vec![0.0f64; bins], vec![0.0f64; bins]);
    let (mut v1, mut v2) = (0.0f64, 0.0f64);
    for i in 0..replications {
        let seed = config.replication_seed(i);
        let counts = sample_clicks(&clicks, &ExperimentConfig::new(nu, seed, 1).unwrap());
        let mut value = 0.0;
        for (k, &n) in counts.counts().iter().enumerate() {
            let f = n as f64 / nu as f64;
            f1[k] += f;
            f2[k] += f * f;
            value += w.powi(k as i32) * f;
        }
        value *= pre;
        v1 += value;
        v2 += value * value;
    }
    let r = replications as f64;
    let var = |a: f64, b: f64| (b - a * a / r) / (r - 1.0);

    let empirical_std = var(v1, v2).sqrt();
    let exact = stderr_exact(&clicks, s, nu).unwrap();
    assert!(
        (empirical_std / exact - 1.0).abs() <= 0.02,
        "{empirical_std} vs {exact}"
    );

    // The binomial-per-bin formula is the square root of the summed
    // per-bin variances, which the replications measure directly.
    let per_bin: f64 = (0..bins).map(|k| w.powi(2 * k as i32) * var(f1[k], f2[k])).sum();
    let empirical_paper = pre * per_bin.sqrt();
    let paper = stderr_paper(&clicks, s, nu).unwrap();
    assert!(
        (empirical_paper / paper - 1.0).abs() <= 0.02,
        "{empirical_paper} vs {paper}"
    );
}
