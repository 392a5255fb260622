//! Special functions and combinatorics.
//!
//! Log-factorials are kept in double-double form so that differences such as
//! `ln(m!) - ln(j!)` stay accurate to a few ulps of the *difference*, not of
//! the (much larger) operands. Alternating sums use cascaded error-free
//! transformations and report how much cancellation took place so that
//! callers can decide to fall back to exact rational arithmetic.

use std::sync::{OnceLock, RwLock};

use num_bigint::BigInt;
use num_rational::BigRational;

use crate::error::{ClickError, Result};

/// Default size of the shared log-factorial table.
pub const DEFAULT_FACTORIAL_MAX: usize = 4096;

/// Error-free sum: `a + b = s + e` exactly.
#[inline]
pub(crate) fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let e = (a - (s - bb)) + (b - bb);
    (s, e)
}

#[inline]
fn fast_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

/// Unevaluated sum `hi + lo` with `|lo| <= ulp(hi) / 2`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub(crate) struct DoubleDouble {
    pub hi: f64,
    pub lo: f64,
}

impl DoubleDouble {
    pub fn from_f64(x: f64) -> Self {
        DoubleDouble { hi: x, lo: 0.0 }
    }

    pub fn add(self, other: DoubleDouble) -> DoubleDouble {
        let (s, e) = two_sum(self.hi, other.hi);
        let (hi, lo) = fast_two_sum(s, e + self.lo + other.lo);
        DoubleDouble { hi, lo }
    }

    pub fn neg(self) -> DoubleDouble {
        DoubleDouble {
            hi: -self.hi,
            lo: -self.lo,
        }
    }

    pub fn sub(self, other: DoubleDouble) -> DoubleDouble {
        self.add(other.neg())
    }

    pub fn mul(self, other: DoubleDouble) -> DoubleDouble {
        let p = self.hi * other.hi;
        let e = self.hi.mul_add(other.hi, -p);
        let (hi, lo) = fast_two_sum(p, e + self.hi * other.lo + self.lo * other.hi);
        DoubleDouble { hi, lo }
    }

    pub fn div_f64(self, d: f64) -> DoubleDouble {
        let q1 = self.hi / d;
        let r = self.sub(DoubleDouble::from_f64(q1).mul(DoubleDouble::from_f64(d)));
        let q2 = r.hi / d;
        let (hi, lo) = fast_two_sum(q1, q2);
        DoubleDouble { hi, lo }
    }

    pub fn abs(self) -> DoubleDouble {
        if self.hi < 0.0 {
            self.neg()
        } else {
            self
        }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }
}

/// Table of `ln(m!)` for `m = 0..=max`, stored in double-double precision.
#[derive(Debug, Clone)]
pub struct LogFactorialTable {
    values: Vec<DoubleDouble>,
}

impl LogFactorialTable {
    pub fn new(max: usize) -> Self {
        let mut table = LogFactorialTable {
            values: vec![DoubleDouble::default()],
        };
        table.extend_to(max);
        table
    }

    /// Largest `m` currently tabulated.
    pub fn max(&self) -> usize {
        self.values.len() - 1
    }

    pub fn extend_to(&mut self, max: usize) {
        let mut acc = *self.values.last().expect("table is never empty");
        for m in self.values.len()..=max {
            acc = acc.add(DoubleDouble {
                hi: (m as f64).ln(),
                lo: 0.0,
            });
            self.values.push(acc);
        }
    }

    /// `ln(m!)`, or `None` past the end of the table.
    pub fn get(&self, m: usize) -> Option<f64> {
        self.values.get(m).map(|v| v.to_f64())
    }

    /// `ln(m! / j!)`, accurate relative to the size of the result.
    pub fn log_ratio(&self, m: usize, j: usize) -> Option<f64> {
        let a = *self.values.get(m)?;
        let b = *self.values.get(j)?;
        Some(a.add(b.neg()).to_f64())
    }

    fn ln_binomial_dd(&self, n: usize, k: usize) -> f64 {
        let v = &self.values;
        v[n].add(v[k].neg()).add(v[n - k].neg()).to_f64()
    }
}

fn shared_table() -> &'static RwLock<LogFactorialTable> {
    static TABLE: OnceLock<RwLock<LogFactorialTable>> = OnceLock::new();
    TABLE.get_or_init(|| RwLock::new(LogFactorialTable::new(DEFAULT_FACTORIAL_MAX)))
}

fn with_table<T>(max: usize, f: impl FnOnce(&LogFactorialTable) -> T) -> T {
    {
        let table = shared_table().read().expect("factorial table poisoned");
        if table.max() >= max {
            return f(&table);
        }
    }
    let mut table = shared_table().write().expect("factorial table poisoned");
    if table.max() < max {
        let target = max.max(2 * table.max());
        table.extend_to(target);
    }
    f(&table)
}

/// `ln(m!)` from the shared table, extending it on demand.
pub fn ln_factorial(m: usize) -> f64 {
    with_table(m, |t| t.get(m).expect("table extended"))
}

/// `ln(m! / j!)` from the shared table.
pub fn ln_factorial_ratio(m: usize, j: usize) -> f64 {
    with_table(m.max(j), |t| t.log_ratio(m, j).expect("table extended"))
}

/// Natural log of the binomial coefficient `C(n, k)`.
pub fn ln_binomial(n: u64, k: i64) -> Result<f64> {
    if k < 0 || k as u64 > n {
        return Err(ClickError::domain(format!("ln_binomial: k = {k} outside 0..={n}")));
    }
    let (n, k) = (n as usize, k as usize);
    Ok(with_table(n, |t| t.ln_binomial_dd(n, k)))
}

/// Binomial coefficient `C(n, k)` as a float.
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    with_table(n, |t| t.ln_binomial_dd(n, k)).exp()
}

/// Associated Laguerre polynomial `L_n^{(k)}(x)` by upward recurrence in `n`.
pub fn laguerre_assoc(n: usize, k: usize, x: f64) -> f64 {
    let k = k as f64;
    let mut prev = 1.0;
    if n == 0 {
        return prev;
    }
    let mut cur = 1.0 + k - x;
    for i in 1..n {
        let i = i as f64;
        let next = ((2.0 * i + k + 1.0 - x) * cur - (i + k) * prev) / (i + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// Compensated sum of `terms` together with the cancellation diagnostic
/// `max |term| / |sum|`.
///
/// The sum is computed with cascaded two-sums, which behaves as if the
/// accumulation were carried out in twice the working precision. A zero sum
/// of nonzero terms reports an infinite diagnostic; a sequence of zeros
/// reports `1`.
pub fn compensated_alternating_sum(terms: &[f64]) -> (f64, f64) {
    let mut sum = 0.0;
    let mut comp = 0.0;
    let mut max_abs: f64 = 0.0;
    for &t in terms {
        let (s, e) = two_sum(sum, t);
        sum = s;
        comp += e;
        max_abs = max_abs.max(t.abs());
    }
    let value = sum + comp;
    let diagnostic = if max_abs == 0.0 {
        1.0
    } else if value == 0.0 {
        f64::INFINITY
    } else {
        max_abs / value.abs()
    };
    (value, diagnostic)
}

/// Exact rational value of a finite float.
pub fn exact_rational(x: f64) -> Result<BigRational> {
    BigRational::from_float(x).ok_or_else(|| ClickError::domain(format!("cannot represent {x} as a rational")))
}

/// Nearest float to a rational, correct to within one ulp or so.
pub fn rational_to_f64(q: &BigRational) -> f64 {
    use num_traits::{Signed, ToPrimitive, Zero};
    if q.is_zero() {
        return 0.0;
    }
    let sign = if q.is_negative() { -1.0 } else { 1.0 };
    let num = q.numer().abs();
    let den = q.denom().clone();
    // Shift so that the integer quotient carries ~64 significant bits.
    let shift = num.bits() as i64 - den.bits() as i64 - 64;
    let quotient: BigInt = if shift >= 0 {
        num / (den << shift as usize)
    } else {
        (num << (-shift) as usize) / den
    };
    let mut value = quotient.to_f64().unwrap_or(f64::INFINITY);
    // apply 2^shift in steps that stay inside the exponent range
    let mut remaining = shift;
    while remaining != 0 {
        let step = remaining.clamp(-1000, 1000);
        value *= 2f64.powi(step as i32);
        remaining -= step;
    }
    sign * value
}
