//! Single-mode signal states and the photon-number statistics of their
//! displaced versions `rho_alpha = D(-alpha) rho D(-alpha)^dagger`.
//!
//! Only the diagonal `p_m = <m|rho_alpha|m>` is ever needed because the
//! click-counting POVM is diagonal in the Fock basis.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{ClickError, Result};
use crate::special::{ln_factorial, two_sum};

/// Default truncation tolerance for the photon-number tail.
pub const DEFAULT_TAIL_EPS: f64 = 1e-12;

/// Largest photon number a distribution may be truncated at.
pub const MAX_CUTOFF: usize = 1 << 15;

/// Soft limit on the squeezing parameter.
pub const MAX_SQUEEZING: f64 = 3.0;

const NEGATIVE_CLAMP: f64 = 1e-14;

/// Declarative description of an undisplaced signal state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StateSpec {
    Coherent {
        beta: Complex64,
    },
    Fock {
        n: u32,
    },
    Thermal {
        mean_n: f64,
    },
    /// `exp(r (a^2 - a^dagger^2) / 2) |0>`.
    SqueezedVacuum {
        r: f64,
    },
}

impl StateSpec {
    pub fn vacuum() -> Self {
        StateSpec::Fock { n: 0 }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            StateSpec::Coherent { beta } if !(beta.re.is_finite() && beta.im.is_finite()) => {
                Err(ClickError::domain("coherent amplitude must be finite"))
            }
            StateSpec::Thermal { mean_n } if !(mean_n >= 0.0 && mean_n.is_finite()) => Err(ClickError::domain(
                format!("thermal mean photon number {mean_n} must be finite and >= 0"),
            )),
            StateSpec::SqueezedVacuum { r } if !r.is_finite() => {
                Err(ClickError::domain("squeezing parameter must be finite"))
            }
            StateSpec::SqueezedVacuum { r } if r.abs() > MAX_SQUEEZING => Err(ClickError::domain(format!(
                "|r| = {} exceeds the supported limit {MAX_SQUEEZING}",
                r.abs()
            ))),
            _ => Ok(()),
        }
    }

    /// Coherent and thermal states have a nonnegative P function.
    pub fn is_classical(&self) -> bool {
        match *self {
            StateSpec::Coherent { .. } | StateSpec::Thermal { .. } => true,
            StateSpec::Fock { n } => n == 0,
            StateSpec::SqueezedVacuum { r } => r == 0.0,
        }
    }

    /// Photon-number distribution of the state displaced by `-alpha`.
    pub fn distribution(&self, alpha: PhasePoint, tail_eps: f64) -> Result<PhotonNumberDistribution> {
        self.validate()?;
        match *self {
            StateSpec::Coherent { beta } => coherent_distribution(beta, alpha, tail_eps),
            StateSpec::Fock { n } => displaced_fock_distribution(n as usize, alpha, tail_eps),
            StateSpec::Thermal { mean_n } => thermal_distribution(mean_n, alpha, tail_eps),
            StateSpec::SqueezedVacuum { r } => displaced_squeezed_vacuum_distribution(r, alpha, tail_eps),
        }
    }
}

impl fmt::Display for StateSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateSpec::Coherent { beta } => write!(f, "coherent:beta_re={},beta_im={}", beta.re, beta.im),
            StateSpec::Fock { n } => write!(f, "fock:n={n}"),
            StateSpec::Thermal { mean_n } => write!(f, "thermal:mean={mean_n}"),
            StateSpec::SqueezedVacuum { r } => write!(f, "squeezed:r={r}"),
        }
    }
}

impl FromStr for StateSpec {
    type Err = ClickError;

    /// Grammar: `kind:key=value,key=value`, with kinds
    /// `coherent` (keys `beta_re`, `beta_im`, both default 0),
    /// `fock` (`n`), `thermal` (`mean`) and `squeezed` (`r`).
    fn from_str(s: &str) -> Result<Self> {
        let bad = |msg: String| ClickError::domain(format!("invalid state `{s}`: {msg}"));
        let (kind, rest) = s.trim().split_once(':').unwrap_or((s.trim(), ""));
        let mut params = Vec::new();
        for item in rest.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = item
                .split_once('=')
                .ok_or_else(|| bad(format!("expected key=value, got `{item}`")))?;
            if params.iter().any(|(k, _)| *k == key.trim()) {
                return Err(bad(format!("duplicate key `{}`", key.trim())));
            }
            params.push((key.trim(), value.trim()));
        }
        let allowed: &[&str] = match kind {
            "coherent" => &["beta_re", "beta_im"],
            "fock" => &["n"],
            "thermal" => &["mean"],
            "squeezed" => &["r"],
            other => {
                return Err(bad(format!(
                    "unknown kind `{other}` (expected coherent, fock, thermal or squeezed)"
                )))
            }
        };
        if let Some((key, _)) = params.iter().find(|(k, _)| !allowed.contains(k)) {
            return Err(bad(format!("unknown key `{key}` for `{kind}`")));
        }
        let real = |key: &str, default: Option<f64>| -> Result<f64> {
            match params.iter().find(|(k, _)| *k == key) {
                Some((_, v)) => v
                    .parse::<f64>()
                    .map_err(|_| bad(format!("`{key}` is not a number: `{v}`"))),
                None => default.ok_or_else(|| bad(format!("missing `{key}`"))),
            }
        };
        let spec = match kind {
            "coherent" => StateSpec::Coherent {
                beta: Complex64::new(real("beta_re", Some(0.0))?, real("beta_im", Some(0.0))?),
            },
            "fock" => {
                let (_, v) = params
                    .iter()
                    .find(|(k, _)| *k == "n")
                    .ok_or_else(|| bad("missing `n`".into()))?;
                let n = v
                    .parse::<u32>()
                    .map_err(|_| bad(format!("`n` must be a nonnegative integer, got `{v}`")))?;
                StateSpec::Fock { n }
            }
            "thermal" => StateSpec::Thermal {
                mean_n: real("mean", None)?,
            },
            _ => StateSpec::SqueezedVacuum { r: real("r", None)? },
        };
        spec.validate().map_err(|e| bad(e.to_string()))?;
        Ok(spec)
    }
}

/// Local-oscillator displacement amplitude `alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PhasePoint(pub Complex64);

impl PhasePoint {
    pub fn new(re: f64, im: f64) -> Self {
        PhasePoint(Complex64::new(re, im))
    }

    pub fn origin() -> Self {
        PhasePoint::default()
    }

    pub fn re(&self) -> f64 {
        self.0.re
    }

    pub fn im(&self) -> f64 {
        self.0.im
    }

    /// Rejects non-finite coordinates.
    pub fn checked(self) -> Result<Self> {
        if self.0.re.is_finite() && self.0.im.is_finite() {
            Ok(self)
        } else {
            Err(ClickError::domain(format!(
                "phase-space point {} is not finite",
                self.0
            )))
        }
    }
}

/// Truncated diagonal `p_0..p_M` of a density matrix in the Fock basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhotonNumberDistribution {
    probs: Vec<f64>,
    tail_bound: f64,
}

impl PhotonNumberDistribution {
    /// Validates normalization and clamps roundoff-level negatives.
    pub fn new(mut probs: Vec<f64>, tail_bound: f64) -> Result<Self> {
        if probs.is_empty() {
            return Err(ClickError::domain("empty photon-number distribution"));
        }
        if !(tail_bound >= 0.0 && tail_bound.is_finite()) {
            return Err(ClickError::domain(format!("invalid tail bound {tail_bound}")));
        }
        for (m, p) in probs.iter_mut().enumerate() {
            if !p.is_finite() || *p < -NEGATIVE_CLAMP {
                return Err(ClickError::Precision(format!("p_{m} = {p} is not a probability")));
            }
            if *p < 0.0 {
                *p = 0.0;
            }
        }
        let total = kahan_total(&probs) + tail_bound;
        if (total - 1.0).abs() > 1e-9 {
            return Err(ClickError::Precision(format!(
                "probabilities plus tail bound sum to {total}"
            )));
        }
        Ok(PhotonNumberDistribution { probs, tail_bound })
    }

    pub fn vacuum() -> Self {
        PhotonNumberDistribution {
            probs: vec![1.0],
            tail_bound: 0.0,
        }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Upper bound on the probability mass beyond the cutoff.
    pub fn tail_bound(&self) -> f64 {
        self.tail_bound
    }

    /// Truncation photon number `M`.
    pub fn cutoff(&self) -> usize {
        self.probs.len() - 1
    }

    pub fn mean(&self) -> f64 {
        kahan_total(
            &self
                .probs
                .iter()
                .enumerate()
                .map(|(m, p)| m as f64 * p)
                .collect::<Vec<_>>(),
        )
    }
}

fn kahan_total(values: &[f64]) -> f64 {
    let (mut s, mut c) = (0.0, 0.0);
    for &v in values {
        let (t, e) = two_sum(s, v);
        s = t;
        c += e;
    }
    s + c
}

fn check_tail_eps(tail_eps: f64) -> Result<()> {
    if tail_eps > 0.0 && tail_eps <= 1e-6 {
        Ok(())
    } else {
        Err(ClickError::domain(format!(
            "tail_eps = {tail_eps} must lie in (0, 1e-6]"
        )))
    }
}

/// Runs `next(m)` for `m = 0, 1, ...` until the geometric tail estimate
/// `p_M q / (1 - q)`, with `q = p_M / p_{M-1}`, is at most `tail_eps`.
///
/// The estimate is only trusted once `m` has passed `min_len` (beyond the
/// bulk of the distribution) and the ratio has been non-increasing for a
/// few consecutive steps, so the remaining terms decay at least
/// geometrically. Unlike `1 - sum(p)` it resolves tails far below the
/// double-precision epsilon.
fn collect_exact(
    tail_eps: f64,
    min_len: usize,
    mut next: impl FnMut(usize) -> f64,
) -> Result<PhotonNumberDistribution> {
    const SETTLE_STEPS: usize = 3;
    let mut probs: Vec<f64> = Vec::new();
    let mut prev_ratio = f64::INFINITY;
    let mut falling = 0usize;
    let mut achieved = 1.0;
    for m in 0..=MAX_CUTOFF {
        let p = next(m);
        let last = probs.last().copied();
        probs.push(p);
        let Some(last) = last else { continue };
        if m + 1 < min_len {
            continue;
        }
        if p == 0.0 {
            if last == 0.0 {
                // Both terms underflowed; the remainder is below f64 range.
                return PhotonNumberDistribution::new(probs, 0.0);
            }
            continue;
        }
        let q = p / last;
        if q < 1.0 && q <= prev_ratio * (1.0 + 1e-12) {
            falling += 1;
        } else {
            falling = 0;
        }
        prev_ratio = q;
        if falling >= SETTLE_STEPS {
            let q = (q * (1.0 + 1e-9)).min(0.5 * (1.0 + q));
            achieved = p * q / (1.0 - q);
            if achieved <= tail_eps {
                return PhotonNumberDistribution::new(probs, achieved);
            }
        }
    }
    Err(ClickError::Cutoff {
        achieved,
        requested: tail_eps,
        cutoff: MAX_CUTOFF,
    })
}

/// Radial parts `e^{-x/2} x^{k/2} sqrt(n!/(n+k)!) L_n^{(k)}(x)` for
/// `n = 0..len`, i.e. `|<n+k|D(gamma)|n>|` up to sign with `x = |gamma|^2`.
///
/// Uses the normalized form of the Laguerre recurrence in `n` with
/// explicit exponent tracking, so neither the tiny prefactor nor the large
/// polynomial values leave the floating-point range.
pub(crate) fn displacement_diagonal(x: f64, k: usize, len: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(len);
    if len == 0 {
        return out;
    }
    if x == 0.0 {
        out.resize(len, if k == 0 { 1.0 } else { 0.0 });
        return out;
    }
    const RESCALE: f64 = 1e150;
    let kf = k as f64;
    let ln_prefactor = -0.5 * x + 0.5 * kf * x.ln() - 0.5 * ln_factorial(k);
    let mut log_scale = 0.0;
    let emit = |g: f64, log_scale: f64| -> f64 {
        if g == 0.0 {
            0.0
        } else {
            g.signum() * (g.abs().ln() + ln_prefactor + log_scale).exp()
        }
    };
    let mut prev = 1.0;
    out.push(emit(prev, log_scale));
    if len == 1 {
        return out;
    }
    let mut cur = (1.0 + kf - x) / (kf + 1.0).sqrt();
    out.push(emit(cur, log_scale));
    for n in 1..len - 1 {
        let nf = n as f64;
        let next =
            ((2.0 * nf + kf + 1.0 - x) * cur - (nf * (nf + kf)).sqrt() * prev) / ((nf + 1.0) * (nf + 1.0 + kf)).sqrt();
        prev = cur;
        cur = next;
        if cur.abs() > RESCALE {
            prev /= RESCALE;
            cur /= RESCALE;
            log_scale += RESCALE.ln();
        }
        out.push(emit(cur, log_scale));
    }
    out
}

/// Truncated matrix of `<m|D(gamma)|n>`, `m < rows`, `n < cols`, row-major.
pub fn displacement_matrix(gamma: Complex64, rows: usize, cols: usize) -> Vec<Complex64> {
    let x = gamma.norm_sqr();
    let phase = if x == 0.0 {
        Complex64::new(1.0, 0.0)
    } else {
        gamma / gamma.norm()
    };
    let mut out = vec![Complex64::new(0.0, 0.0); rows * cols];
    // m = n + k
    let mut phase_k = Complex64::new(1.0, 0.0);
    for k in 0..rows {
        let len = cols.min(rows - k);
        for (n, h) in displacement_diagonal(x, k, len).into_iter().enumerate() {
            out[(n + k) * cols + n] = phase_k * h;
        }
        phase_k *= phase;
    }
    // n = m + k, picks up (-conj(gamma)/|gamma|)^k
    let minus_conj = -phase.conj();
    let mut phase_k = minus_conj;
    for k in 1..cols {
        let len = rows.min(cols - k);
        for (m, h) in displacement_diagonal(x, k, len).into_iter().enumerate() {
            out[m * cols + m + k] = phase_k * h;
        }
        phase_k *= minus_conj;
    }
    out
}

/// `|<m|D(-alpha)|n>|^2` for all `m`.
pub fn displaced_fock_distribution(n: usize, alpha: PhasePoint, tail_eps: f64) -> Result<PhotonNumberDistribution> {
    check_tail_eps(tail_eps)?;
    let x = alpha.checked()?.0.norm_sqr();
    if x == 0.0 {
        let mut probs = vec![0.0; n + 1];
        probs[n] = 1.0;
        return PhotonNumberDistribution::new(probs, 0.0);
    }
    // Column n of the displacement matrix: m < n lies on diagonal n - m
    // (index m), m >= n on diagonal m - n (index n).
    let upper: Vec<f64> = (0..n).map(|m| displacement_diagonal(x, n - m, m + 1)[m]).collect();
    // Past the last sign change of L_n^{(m-n)}(x) the ratios settle.
    let min_len = n + 1 + (x + 4.0 * (n as f64 * x).sqrt()).ceil() as usize;
    collect_exact(tail_eps, min_len, |m| {
        let h = if m < n {
            upper[m]
        } else {
            displacement_diagonal(x, m - n, n + 1)[n]
        };
        h * h
    })
}

/// Fock amplitudes of `exp(r (a^2 - a^dagger^2) / 2)|0>` together with a
/// rigorous bound on the discarded probability.
pub fn squeezed_vacuum_amplitudes(r: f64, tail_target: f64) -> (Vec<f64>, f64) {
    let t = r.tanh();
    let mut amps = vec![1.0 / r.cosh().sqrt()];
    if t == 0.0 {
        return (amps, 0.0);
    }
    // |c_{2j+2} / c_{2j}|^2 < tanh^2 r, so the tail after the last kept
    // pair is bounded by a geometric series.
    let cosh2 = r.cosh().powi(2);
    let mut j = 0usize;
    let mut last = amps[0];
    loop {
        let next = -t * ((2 * j + 1) as f64 / (2 * j + 2) as f64).sqrt() * last;
        let bound = next * next * cosh2;
        if bound <= tail_target || amps.len() > MAX_CUTOFF {
            return (amps, bound);
        }
        amps.push(0.0);
        amps.push(next);
        last = next;
        j += 1;
    }
}

/// Photon statistics of the squeezed coherent state `D(-alpha)|xi>`.
pub fn displaced_squeezed_vacuum_distribution(
    r: f64,
    alpha: PhasePoint,
    tail_eps: f64,
) -> Result<PhotonNumberDistribution> {
    check_tail_eps(tail_eps)?;
    StateSpec::SqueezedVacuum { r }.validate()?;
    let gamma = -alpha.checked()?.0;
    let input_target = (0.25 * tail_eps).powi(2);
    let (amps, input_tail) = squeezed_vacuum_amplitudes(r, input_target);
    // Trace-distance style bound between truncated and exact outputs.
    let input_error = 2.0 * input_tail.sqrt();
    if input_error > 0.5 * tail_eps {
        return Err(ClickError::Cutoff {
            achieved: input_error,
            requested: tail_eps,
            cutoff: amps.len(),
        });
    }
    let cols = amps.len();

    let g = gamma.norm();
    let width = (cols as f64).sqrt() + g;
    let mut rows = (width * width + 6.0 * width + 20.0).ceil() as usize;
    loop {
        let matrix = displacement_matrix(gamma, rows, cols);
        let probs: Vec<f64> = (0..rows)
            .map(|m| {
                let row = &matrix[m * cols..(m + 1) * cols];
                row.iter().zip(&amps).map(|(d, c)| d * c).sum::<Complex64>().norm_sqr()
            })
            .collect();
        // The output of a finite-support input decays faster than
        // geometrically once past it; the last rows must be negligible
        // before the suffix sums below are meaningful.
        let edge = probs[rows.saturating_sub(4)..].iter().sum::<f64>();
        let budget = tail_eps - input_error;
        if edge <= 1e-3 * budget || rows >= MAX_CUTOFF {
            let mut suffix = edge;
            let mut cut = rows;
            while cut > 1 && suffix + probs[cut - 1] <= budget {
                cut -= 1;
                suffix += probs[cut];
            }
            let achieved = suffix + input_error;
            if achieved <= tail_eps {
                let mut probs = probs;
                probs.truncate(cut);
                return PhotonNumberDistribution::new(probs, achieved);
            }
            return Err(ClickError::Cutoff {
                achieved,
                requested: tail_eps,
                cutoff: rows,
            });
        }
        rows = (2 * rows).min(MAX_CUTOFF);
    }
}

/// Poisson statistics with mean `|beta - alpha|^2`.
pub fn coherent_distribution(beta: Complex64, alpha: PhasePoint, tail_eps: f64) -> Result<PhotonNumberDistribution> {
    check_tail_eps(tail_eps)?;
    StateSpec::Coherent { beta }.validate()?;
    let lambda = (beta - alpha.checked()?.0).norm_sqr();
    if lambda == 0.0 {
        return Ok(PhotonNumberDistribution::vacuum());
    }
    let ln_lambda = lambda.ln();
    collect_exact(tail_eps, lambda.ceil() as usize + 1, |m| {
        (m as f64 * ln_lambda - lambda - ln_factorial(m)).exp()
    })
}

/// Displaced thermal statistics
/// `p_m = nbar^m / (1+nbar)^{m+1} exp(-|alpha|^2/(1+nbar)) L_m(-|alpha|^2/(nbar(1+nbar)))`.
pub fn thermal_distribution(mean_n: f64, alpha: PhasePoint, tail_eps: f64) -> Result<PhotonNumberDistribution> {
    check_tail_eps(tail_eps)?;
    StateSpec::Thermal { mean_n }.validate()?;
    let x = alpha.checked()?.0.norm_sqr();
    if mean_n == 0.0 {
        return coherent_distribution(Complex64::new(0.0, 0.0), alpha, tail_eps);
    }
    let ln_ratio = mean_n.ln() - mean_n.ln_1p();
    let ln_base = -mean_n.ln_1p() - x / (1.0 + mean_n);
    let y = x / (mean_n * (1.0 + mean_n));
    let min_len = (mean_n + x).ceil() as usize + 1;

    // L_m(-y) has only positive terms; track it as value * exp(log_scale).
    const RESCALE: f64 = 1e150;
    let (mut prev, mut cur, mut log_scale) = (0.0f64, 1.0f64, 0.0f64);
    collect_exact(tail_eps, min_len, |m| {
        if m > 0 {
            let mf = (m - 1) as f64;
            let next = ((2.0 * mf + 1.0 + y) * cur - mf * prev) / (mf + 1.0);
            prev = cur;
            cur = next;
            if cur > RESCALE {
                prev /= RESCALE;
                cur /= RESCALE;
                log_scale += RESCALE.ln();
            }
        }
        (m as f64 * ln_ratio + ln_base + cur.ln() + log_scale).exp()
    })
}
