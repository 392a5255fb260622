//! Click-counting POVM of an array of `N` equally illuminated on-off
//! detectors with overall efficiency `eta`.
//!
//! The POVM is diagonal in the Fock basis with weights
//!
//! ```text
//! D_{k,m} = C(N,k) sum_{j=0}^{k} C(k,j) (-1)^{k-j} (1 - eta + j eta / N)^m
//! ```
//!
//! the probability that `m` photons produce exactly `k` clicks.

use std::collections::HashMap;
use std::sync::{Arc, OnceLock, RwLock};

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{ClickError, Result};
use crate::special::{binomial, compensated_alternating_sum, exact_rational, ln_binomial, rational_to_f64};
use crate::states::PhotonNumberDistribution;

/// Clamping threshold for roundoff-level negative probabilities.
pub const CLAMP_TOLERANCE: f64 = 1e-12;

/// Entries whose predicted relative error exceeds this are recomputed
/// exactly.
const REL_ERROR_TARGET: f64 = 1e-12;

/// Largest photon number for which the exact fallback is attempted.
pub const RATIONAL_MAX_M: usize = 8192;

/// Upper limit on the photon-number range of a D-symbol table.
pub const MAX_TABLE_M: usize = crate::states::MAX_CUTOFF;

/// `N` on-off detectors sharing one overall quantum efficiency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorArray {
    n_detectors: usize,
    efficiency: f64,
}

impl DetectorArray {
    pub fn new(n_detectors: usize, efficiency: f64) -> Result<Self> {
        if n_detectors == 0 {
            return Err(ClickError::domain("the array needs at least one detector"));
        }
        if !(efficiency > 0.0 && efficiency <= 1.0) {
            return Err(ClickError::domain(format!(
                "efficiency {efficiency} must lie in (0, 1]"
            )));
        }
        Ok(DetectorArray {
            n_detectors,
            efficiency,
        })
    }

    pub fn n_detectors(&self) -> usize {
        self.n_detectors
    }

    pub fn efficiency(&self) -> f64 {
        self.efficiency
    }

    /// Negativity certifies nonclassicality only for even arrays.
    pub fn is_even(&self) -> bool {
        self.n_detectors.is_multiple_of(2)
    }
}

/// Diagonal POVM weights `D^{1-eta,eta}_{k,m}` for `k = 0..=N`, `m = 0..=M`.
#[derive(Debug, Clone, PartialEq)]
pub struct DSymbolTable {
    detector: DetectorArray,
    max_m: usize,
    // k-major: entries[k * (max_m + 1) + m]
    entries: Vec<f64>,
}

impl DSymbolTable {
    pub fn detector(&self) -> DetectorArray {
        self.detector
    }

    pub fn tau(&self) -> f64 {
        1.0 - self.detector.efficiency
    }

    pub fn sigma(&self) -> f64 {
        self.detector.efficiency
    }

    pub fn max_m(&self) -> usize {
        self.max_m
    }

    pub fn get(&self, k: usize, m: usize) -> f64 {
        assert!(k <= self.detector.n_detectors && m <= self.max_m);
        self.entries[k * (self.max_m + 1) + m]
    }

    /// Weights `D_{k,0..=M}` for one click number.
    pub fn row(&self, k: usize) -> &[f64] {
        let w = self.max_m + 1;
        &self.entries[k * w..(k + 1) * w]
    }
}

/// Builds the D-symbol table from the closed-form alternating sum.
///
/// Each inner sum is evaluated with compensated summation; when the
/// cancellation diagnostic predicts a relative error above `1e-12` the
/// entry is recomputed in exact integer arithmetic.
pub fn d_symbol_table(detector: DetectorArray, max_m: usize) -> Result<DSymbolTable> {
    if max_m > MAX_TABLE_M {
        return Err(ClickError::domain(format!(
            "max_m = {max_m} exceeds the table limit {MAX_TABLE_M}"
        )));
    }
    let n = detector.n_detectors;
    let eta = detector.efficiency;
    let width = max_m + 1;
    let mut entries = vec![0.0; (n + 1) * width];
    let bases: Vec<f64> = (0..=n).map(|j| 1.0 - eta + j as f64 * eta / n as f64).collect();
    let mut exact: Option<ExactBases> = None;
    let mut terms = Vec::with_capacity(n + 1);

    for k in 0..=n {
        let ln_outer = ln_binomial(n as u64, k as i64)?;
        let inner_coeffs: Vec<f64> = (0..=k)
            .map(|j| {
                let c = binomial(k, j);
                if (k - j).is_multiple_of(2) {
                    c
                } else {
                    -c
                }
            })
            .collect();
        // m < k photons cannot fire k detectors.
        for m in k..=max_m {
            terms.clear();
            terms.extend(inner_coeffs.iter().zip(&bases).map(|(c, b)| c * b.powi(m as i32)));
            let (inner, diagnostic) = compensated_alternating_sum(&terms);
            let predicted = diagnostic * (m + k + 2) as f64 * f64::EPSILON;
            let value = if predicted <= REL_ERROR_TARGET {
                ln_outer.exp() * inner
            } else {
                if m > RATIONAL_MAX_M {
                    return Err(ClickError::Precision(format!(
                        "D-symbol (k = {k}, m = {m}) loses {diagnostic:e} to cancellation \
                         beyond the exact fallback limit m <= {RATIONAL_MAX_M}"
                    )));
                }
                let ex = match &mut exact {
                    Some(ex) => ex,
                    None => exact.insert(ExactBases::new(n, eta)?),
                };
                rational_to_f64(&ex.d_symbol(k, m))
            };
            entries[k * width + m] = clamp_probability(value, || format!("D_{{{k},{m}}}"))?;
        }
    }
    Ok(DSymbolTable {
        detector,
        max_m,
        entries,
    })
}

fn clamp_probability(value: f64, label: impl FnOnce() -> String) -> Result<f64> {
    if !(-CLAMP_TOLERANCE..=1.0 + CLAMP_TOLERANCE).contains(&value) {
        return Err(ClickError::Precision(format!(
            "{} = {value} is not a probability",
            label()
        )));
    }
    Ok(value.clamp(0.0, 1.0))
}

/// `1 - eta + j eta / N = B_j / Q` with integer `B_j` and common `Q`.
struct ExactBases {
    numerators: Vec<BigInt>,
    denominator: BigInt,
    n: usize,
}

impl ExactBases {
    fn new(n: usize, eta: f64) -> Result<Self> {
        Ok(Self::from_rational(n, &exact_rational(eta)?))
    }

    fn from_rational(n: usize, eta: &BigRational) -> Self {
        let nn = BigInt::from(n);
        let (a, b) = (eta.numer().clone(), eta.denom().clone());
        // 1 - a/b + j a / (b N) = (bN - aN + j a) / (bN)
        let denominator = &b * &nn;
        let numerators = (0..=n)
            .map(|j| &denominator - &a * &nn + &a * BigInt::from(j))
            .collect();
        ExactBases {
            numerators,
            denominator,
            n,
        }
    }

    fn d_symbol(&self, k: usize, m: usize) -> BigRational {
        if m < k {
            return BigRational::zero();
        }
        let mut sum = BigInt::zero();
        let mut c = BigInt::one();
        for j in 0..=k {
            if j > 0 {
                c = c * BigInt::from(k - j + 1) / BigInt::from(j);
            }
            let term = &c * num_traits::pow(self.numerators[j].clone(), m);
            if (k - j).is_multiple_of(2) {
                sum += term;
            } else {
                sum -= term;
            }
        }
        let mut outer = BigInt::one();
        for i in 0..k {
            outer = outer * BigInt::from(self.n - i) / BigInt::from(i + 1);
        }
        BigRational::new(outer * sum, num_traits::pow(self.denominator.clone(), m))
    }
}

/// Exact D-symbol for a rational efficiency.
pub fn d_symbol_exact(n_detectors: usize, eta: &BigRational, k: usize, m: usize) -> BigRational {
    ExactBases::from_rational(n_detectors, eta).d_symbol(k, m)
}

/// Process-wide cache of D-symbol tables keyed by `(N, eta)`.
///
/// A cached table covering at least the requested photon range is reused;
/// otherwise a larger one replaces it.
#[derive(Debug, Default)]
pub struct DSymbolCache {
    tables: RwLock<HashMap<(usize, u64), Arc<DSymbolTable>>>,
}

impl DSymbolCache {
    const MAX_TABLES: usize = 64;

    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, detector: DetectorArray, max_m: usize) -> Result<Arc<DSymbolTable>> {
        let key = (detector.n_detectors, detector.efficiency.to_bits());
        if let Some(t) = self.tables.read().expect("cache poisoned").get(&key) {
            if t.max_m >= max_m {
                return Ok(Arc::clone(t));
            }
        }
        let mut tables = self.tables.write().expect("cache poisoned");
        if let Some(t) = tables.get(&key) {
            if t.max_m >= max_m {
                return Ok(Arc::clone(t));
            }
        }
        let size = max_m.max(63).checked_next_power_of_two().unwrap_or(max_m) - 1;
        let size = size.max(max_m).min(MAX_TABLE_M.max(max_m));
        let table = Arc::new(d_symbol_table(detector, size)?);
        if tables.len() >= Self::MAX_TABLES {
            tables.clear();
        }
        tables.insert(key, Arc::clone(&table));
        Ok(table)
    }
}

/// Shared cache used by [`click_distribution`].
pub fn shared_cache() -> &'static DSymbolCache {
    static CACHE: OnceLock<DSymbolCache> = OnceLock::new();
    CACHE.get_or_init(DSymbolCache::new)
}

/// Probabilities `c_0..c_N` of exactly `k` coincident clicks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClickDistribution {
    probs: Vec<f64>,
    detector: DetectorArray,
}

impl ClickDistribution {
    pub fn new(mut probs: Vec<f64>, detector: DetectorArray) -> Result<Self> {
        if probs.len() != detector.n_detectors + 1 {
            return Err(ClickError::domain(format!(
                "expected {} click probabilities, got {}",
                detector.n_detectors + 1,
                probs.len()
            )));
        }
        for (k, c) in probs.iter_mut().enumerate() {
            *c = clamp_probability(*c, || format!("c_{k}"))?;
        }
        let (total, _) = compensated_alternating_sum(&probs);
        if (total - 1.0).abs() > 1e-9 {
            return Err(ClickError::Precision(format!("click probabilities sum to {total}")));
        }
        Ok(ClickDistribution { probs, detector })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn detector(&self) -> DetectorArray {
        self.detector
    }
}

/// Contracts a photon-number distribution with the click POVM.
pub fn click_distribution(pnd: &PhotonNumberDistribution, detector: DetectorArray) -> Result<ClickDistribution> {
    click_distribution_with(shared_cache(), pnd, detector)
}

pub fn click_distribution_with(
    cache: &DSymbolCache,
    pnd: &PhotonNumberDistribution,
    detector: DetectorArray,
) -> Result<ClickDistribution> {
    if pnd.tail_bound() > 1e-9 {
        return Err(ClickError::domain(format!(
            "photon-number tail bound {:e} is too loose (needs <= 1e-9)",
            pnd.tail_bound()
        )));
    }
    let table = cache.get(detector, pnd.cutoff())?;
    let p = pnd.probs();
    let mut terms = Vec::with_capacity(p.len());
    let probs = (0..=detector.n_detectors)
        .map(|k| {
            terms.clear();
            terms.extend(table.row(k).iter().zip(p).map(|(d, p)| d * p));
            compensated_alternating_sum(&terms).0
        })
        .collect();
    ClickDistribution::new(probs, detector)
}

/// Binomial click statistics of a coherent state with amplitude `beta_eff`.
pub fn click_distribution_coherent(beta_eff: Complex64, detector: DetectorArray) -> Result<ClickDistribution> {
    let n = detector.n_detectors;
    let rate = detector.efficiency * beta_eff.norm_sqr() / n as f64;
    if !rate.is_finite() {
        return Err(ClickError::domain("coherent amplitude must be finite"));
    }
    let mut probs = vec![0.0; n + 1];
    if rate == 0.0 {
        probs[0] = 1.0;
    } else {
        // ln(1 - e^{-rate}) without cancellation
        let ln_click = (-(-rate).exp_m1()).ln();
        for (k, c) in probs.iter_mut().enumerate() {
            let ln_c = ln_binomial(n as u64, k as i64)? - (n - k) as f64 * rate + k as f64 * ln_click;
            *c = ln_c.exp();
        }
    }
    ClickDistribution::new(probs, detector)
}
