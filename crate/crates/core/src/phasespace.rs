//! Click-counting phase-space functions `P_N(alpha; s)`.
//!
//! Sampled directly from the click statistics as
//!
//! ```text
//! P_N(alpha; s) = 2 / (pi (1 - s)) * sum_k w^k c_k(alpha),   w = (eta (1 - s) - 2) / (eta (1 - s))
//! ```
//!
//! together with the two standard-error models and the grid scans used to
//! map negativities.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::detector::{click_distribution, ClickDistribution, DetectorArray};
use crate::error::{ClickError, Result};
use crate::special::{compensated_alternating_sum, laguerre_assoc, ln_factorial, DoubleDouble};
use crate::states::{PhasePoint, PhotonNumberDistribution, StateSpec};

/// Ordering parameter `s < 1`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct OrderingParam(f64);

impl OrderingParam {
    pub fn new(s: f64) -> Result<Self> {
        if s.is_finite() && s < 1.0 {
            Ok(OrderingParam(s))
        } else {
            Err(ClickError::domain(format!(
                "ordering parameter s = {s} must be finite and < 1"
            )))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// `2 / (pi (1 - s))`.
    pub fn prefactor(self) -> f64 {
        2.0 / (PI * (1.0 - self.0))
    }
}

impl TryFrom<f64> for OrderingParam {
    type Error = ClickError;
    fn try_from(s: f64) -> Result<Self> {
        OrderingParam::new(s)
    }
}

impl From<OrderingParam> for f64 {
    fn from(s: OrderingParam) -> f64 {
        s.0
    }
}

/// Click weight `(eta (1 - s) - 2) / (eta (1 - s))`.
pub fn weight(s: OrderingParam, eta: f64) -> Result<f64> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(ClickError::domain(format!("efficiency {eta} must lie in (0, 1]")));
    }
    let s = OrderingParam::new(s.0)?;
    let e = eta * (1.0 - s.0);
    Ok((e - 2.0) / e)
}

/// `P_N(alpha; s)` from the click statistics.
pub fn quasiprob(clicks: &ClickDistribution, s: OrderingParam) -> Result<f64> {
    let w = weight(s, clicks.detector().efficiency())?;
    let terms: Vec<f64> = clicks
        .probs()
        .iter()
        .enumerate()
        .map(|(k, c)| w.powi(k as i32) * c)
        .collect();
    Ok(s.prefactor() * compensated_alternating_sum(&terms).0)
}

/// `P_N(alpha; s)` through the normally ordered generating function,
/// evaluated diagonally in the Fock basis. Independent of the D-symbols.
///
/// The alternating sum over `j` is badly conditioned for large `N` or
/// `s -> 1`, so moments and the outer sum are carried in double-double.
pub fn quasiprob_genfn(pnd: &PhotonNumberDistribution, detector: DetectorArray, s: OrderingParam) -> Result<f64> {
    let eta = detector.efficiency();
    weight(s, eta)?;
    let n = detector.n_detectors();
    let e = eta * (1.0 - s.value());
    let ln_pre = (eta / PI).ln() + (n + 1) as f64 * (2.0 / e).ln();
    // (e - 2) / 2 with e taken as exact
    let shift = DoubleDouble::from_f64(e).sub(DoubleDouble::from_f64(2.0)).div_f64(2.0);
    let one = DoubleDouble::from_f64(1.0);

    let probs = pnd.probs();
    let mut sum = DoubleDouble::default();
    let mut abs_sum = 0.0;
    let mut binom = one;
    for j in 0..=n {
        if j > 0 {
            binom = binom.mul(DoubleDouble::from_f64((n - j + 1) as f64)).div_f64(j as f64);
        }
        // <:exp(-eta j n / N):> = sum_m p_m (1 - eta j / N)^m
        let base = one.sub(
            DoubleDouble::from_f64(eta)
                .mul(DoubleDouble::from_f64(j as f64))
                .div_f64(n as f64),
        );
        let mut moment = DoubleDouble::default();
        let mut pow = one;
        for &p in probs {
            moment = moment.add(pow.mul(DoubleDouble::from_f64(p)));
            pow = pow.mul(base);
        }
        let mut shift_pow = one;
        for _ in 0..n - j {
            shift_pow = shift_pow.mul(shift);
        }
        let term = binom.mul(shift_pow).mul(moment);
        abs_sum += term.abs().to_f64();
        sum = sum.add(term);
    }
    let pre = ln_pre.exp();
    let predicted = pre * abs_sum * (n + probs.len() + 2) as f64 * 1e-30;
    if predicted > 1e-10 {
        return Err(ClickError::Precision(format!(
            "generating-function route loses accuracy (predicted absolute error {predicted:e})"
        )));
    }
    Ok(pre * sum.to_f64())
}

fn check_nu(nu: u64) -> Result<()> {
    if nu == 0 {
        Err(ClickError::domain("the number of repetitions nu must be at least 1"))
    } else {
        Ok(())
    }
}

/// Standard error treating each `c_k` as an independent binomial estimate.
pub fn stderr_paper(clicks: &ClickDistribution, s: OrderingParam, nu: u64) -> Result<f64> {
    check_nu(nu)?;
    let w = weight(s, clicks.detector().efficiency())?;
    let terms: Vec<f64> = clicks
        .probs()
        .iter()
        .enumerate()
        .map(|(k, c)| w.powi(2 * k as i32) * c * (1.0 - c))
        .collect();
    let var = compensated_alternating_sum(&terms).0.max(0.0) / nu as f64;
    Ok(s.prefactor() * var.sqrt())
}

/// Exact multinomial standard error of the linear estimator.
pub fn stderr_exact(clicks: &ClickDistribution, s: OrderingParam, nu: u64) -> Result<f64> {
    check_nu(nu)?;
    let w = weight(s, clicks.detector().efficiency())?;
    let u: Vec<f64> = (0..clicks.probs().len()).map(|k| w.powi(k as i32)).collect();
    let c = clicks.probs();
    let mean = compensated_alternating_sum(&u.iter().zip(c).map(|(u, c)| u * c).collect::<Vec<_>>()).0;
    // centered second moment, nonnegative term by term
    let var = compensated_alternating_sum(&u.iter().zip(c).map(|(u, c)| (u - mean).powi(2) * c).collect::<Vec<_>>()).0;
    Ok(s.prefactor() * (var / nu as f64).sqrt())
}

/// `P_N(alpha; s)` with its standard errors for `nu` repetitions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuasiprobEstimate {
    pub value: f64,
    pub stderr_paper: f64,
    pub stderr_exact: f64,
    /// `value / stderr_paper`; `None` when the error vanishes.
    pub significance: Option<f64>,
    pub nu: u64,
}

impl QuasiprobEstimate {
    pub fn from_clicks(clicks: &ClickDistribution, s: OrderingParam, nu: u64) -> Result<Self> {
        let value = quasiprob(clicks, s)?;
        let stderr_paper = stderr_paper(clicks, s, nu)?;
        let stderr_exact = stderr_exact(clicks, s, nu)?;
        Ok(QuasiprobEstimate {
            value,
            stderr_paper,
            stderr_exact,
            significance: significance(value, stderr_paper),
            nu,
        })
    }
}

pub(crate) fn significance(value: f64, stderr: f64) -> Option<f64> {
    (stderr > 0.0).then(|| value / stderr)
}

/// Photon-number truncation needed for `P_N` to inherit an absolute error
/// of at most `tail_eps`.
///
/// A discarded photon-number mass `t` moves `P_N` by at most
/// `t * 2/(pi(1-s)) * max(1, |w|)^N`, so the distribution is truncated at
/// `tail_eps` divided by that amplification (never more loosely than
/// `tail_eps` itself).
pub fn truncation_for(detector: DetectorArray, s: OrderingParam, tail_eps: f64) -> Result<f64> {
    let w = weight(s, detector.efficiency())?;
    let gain = s.prefactor() * w.abs().max(1.0).powi(detector.n_detectors() as i32);
    Ok(tail_eps / gain.max(1.0))
}

/// Runs the full pipeline `state -> p_m -> c_k -> P_N` at one point.
pub fn estimate_point(
    state: &StateSpec,
    detector: DetectorArray,
    alpha: PhasePoint,
    s: OrderingParam,
    nu: u64,
    tail_eps: f64,
) -> Result<QuasiprobEstimate> {
    let tail = truncation_for(detector, s, tail_eps)?;
    let clicks = click_distribution(&state.distribution(alpha, tail)?, detector)?;
    QuasiprobEstimate::from_clicks(&clicks, s, nu)
}

/// Evenly spaced points `start..=stop`; `steps` is the point count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineGrid {
    pub start: f64,
    pub stop: f64,
    pub steps: usize,
}

impl LineGrid {
    pub fn new(start: f64, stop: f64, steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(ClickError::domain("a grid needs at least one point"));
        }
        if !(start.is_finite() && stop.is_finite()) {
            return Err(ClickError::domain("grid endpoints must be finite"));
        }
        Ok(LineGrid { start, stop, steps })
    }

    pub fn point(&self, i: usize) -> f64 {
        if self.steps == 1 {
            return self.start;
        }
        if i + 1 == self.steps {
            return self.stop;
        }
        self.start + (self.stop - self.start) * i as f64 / (self.steps - 1) as f64
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.steps).map(|i| self.point(i)).collect()
    }
}

impl FromStr for LineGrid {
    type Err = ClickError;

    /// `start:stop:steps`
    fn from_str(s: &str) -> Result<Self> {
        let bad = || ClickError::domain(format!("invalid grid `{s}` (expected start:stop:steps)"));
        let parts: Vec<&str> = s.split(':').map(str::trim).collect();
        let [start, stop, steps] = parts[..] else {
            return Err(bad());
        };
        LineGrid::new(
            start.parse().map_err(|_| bad())?,
            stop.parse().map_err(|_| bad())?,
            steps.parse().map_err(|_| bad())?,
        )
    }
}

impl fmt::Display for LineGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.start, self.stop, self.steps)
    }
}

/// One output row; field order is the CSV column order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanRecord {
    pub re_alpha: f64,
    pub im_alpha: f64,
    pub s: f64,
    #[serde(rename = "N")]
    pub n_detectors: usize,
    pub eta: f64,
    pub nu: u64,
    pub p_value: f64,
    pub stderr_paper: f64,
    pub stderr_exact: f64,
    pub significance: Option<f64>,
}

pub const CSV_HEADER: &str = "re_alpha,im_alpha,s,N,eta,nu,p_value,stderr_paper,stderr_exact,significance";

/// Float with 17 significant digits.
pub fn format_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

impl ScanRecord {
    pub fn new(alpha: PhasePoint, s: OrderingParam, detector: DetectorArray, est: &QuasiprobEstimate) -> Self {
        ScanRecord {
            re_alpha: alpha.re(),
            im_alpha: alpha.im(),
            s: s.value(),
            n_detectors: detector.n_detectors(),
            eta: detector.efficiency(),
            nu: est.nu,
            p_value: est.value,
            stderr_paper: est.stderr_paper,
            stderr_exact: est.stderr_exact,
            significance: est.significance,
        }
    }

    /// CSV line without trailing newline; missing significance is `NA`.
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            format_float(self.re_alpha),
            format_float(self.im_alpha),
            format_float(self.s),
            self.n_detectors,
            format_float(self.eta),
            self.nu,
            format_float(self.p_value),
            format_float(self.stderr_paper),
            format_float(self.stderr_exact),
            self.significance.map_or_else(|| "NA".to_string(), format_float),
        )
    }
}

/// Evaluates `f` over `0..n` in index order, in parallel when enabled.
pub(crate) fn map_indexed<T, F>(n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// `P_N` along a line of constant `Im alpha`.
pub fn scan_line(
    state: &StateSpec,
    detector: DetectorArray,
    s: OrderingParam,
    nu: u64,
    re_range: LineGrid,
    im_alpha: f64,
    tail_eps: f64,
) -> Result<Vec<ScanRecord>> {
    check_nu(nu)?;
    state.validate()?;
    weight(s, detector.efficiency())?;
    map_indexed(re_range.steps, |i| {
        let alpha = PhasePoint::new(re_range.point(i), im_alpha);
        let est = estimate_point(state, detector, alpha, s, nu, tail_eps)?;
        Ok(ScanRecord::new(alpha, s, detector, &est))
    })
}

/// Significance curve at a fixed phase-space point.
pub fn significance_vs_s(
    state: &StateSpec,
    detector: DetectorArray,
    alpha: PhasePoint,
    nu: u64,
    s_grid: &[f64],
    tail_eps: f64,
) -> Result<Vec<ScanRecord>> {
    check_nu(nu)?;
    let s_values = s_grid
        .iter()
        .map(|&s| OrderingParam::new(s))
        .collect::<Result<Vec<_>>>()?;
    let mut tail = tail_eps;
    for &s in &s_values {
        tail = tail.min(truncation_for(detector, s, tail_eps)?);
    }
    let clicks = click_distribution(&state.distribution(alpha, tail)?, detector)?;
    s_values
        .into_iter()
        .map(|s| {
            let est = QuasiprobEstimate::from_clicks(&clicks, s, nu)?;
            Ok(ScanRecord::new(alpha, s, detector, &est))
        })
        .collect()
}

/// Analytic `s`-parametrized quasiprobability of the ideal state at the
/// point probed by the displacement `alpha`.
///
/// Normalized so that the vacuum gives `2 / (pi (1 - s))` at the origin.
/// Supported: coherent and thermal states for any `s < 1`, Fock states for
/// `-1 <= s <= 0`, squeezed vacuum for `s <= 0`.
pub fn reference_quasiprob(state: &StateSpec, alpha: PhasePoint, s: OrderingParam) -> Result<f64> {
    state.validate()?;
    let s = s.value();
    let a = alpha.0;
    match *state {
        StateSpec::Coherent { beta } => Ok(gaussian(a - beta, 1.0 - s, 1.0 - s)),
        StateSpec::Thermal { mean_n } => {
            let v = 1.0 + 2.0 * mean_n - s;
            Ok(gaussian(a, v, v))
        }
        StateSpec::SqueezedVacuum { r } if s <= 0.0 => {
            // Re(alpha) is the squeezed quadrature.
            Ok(gaussian(a, (-2.0 * r).exp() - s, (2.0 * r).exp() - s))
        }
        StateSpec::Fock { n } if s == -1.0 => {
            let x = a.norm_sqr();
            let n = n as usize;
            let ln_q = if x == 0.0 {
                if n == 0 {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            } else {
                n as f64 * x.ln() - ln_factorial(n)
            };
            Ok((ln_q - x).exp() / PI)
        }
        StateSpec::Fock { n } if (-1.0..=0.0).contains(&s) => {
            let x = a.norm_sqr();
            let ratio = (s + 1.0) / (s - 1.0);
            let lag = laguerre_assoc(n as usize, 0, 4.0 * x / (1.0 - s * s));
            Ok(2.0 / (PI * (1.0 - s)) * ratio.powi(n as i32) * (-2.0 * x / (1.0 - s)).exp() * lag)
        }
        _ => Err(ClickError::domain(format!(
            "no regular reference quasiprobability for {state} at s = {s}"
        ))),
    }
}

// 2/(pi sqrt(vx vy)) exp(-2 re^2 / vx - 2 im^2 / vy), variances in units of 1/4
fn gaussian(d: Complex64, vx: f64, vy: f64) -> f64 {
    2.0 / (PI * (vx * vy).sqrt()) * (-2.0 * d.re * d.re / vx - 2.0 * d.im * d.im / vy).exp()
}
