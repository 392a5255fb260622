//! Oracles shared by the integration test targets.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

pub fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// `C(N, k) m! [x^m] e^{tau x} (e^{sigma x / N} - 1)^k`: the D-symbol as
/// the `m`-th derivative of its generating function at zero, via truncated
/// power series.
pub fn d_symbol_by_series(n: usize, eta: &BigRational, k: usize, m: usize) -> BigRational {
    let tau = BigRational::one() - eta;
    let sig = eta / BigRational::from_integer(BigInt::from(n));
    let exp_series = |a: &BigRational| -> Vec<BigRational> {
        let mut out = vec![BigRational::one()];
        for i in 1..=m {
            let next = &out[i - 1] * a / BigRational::from_integer(BigInt::from(i));
            out.push(next);
        }
        out
    };
    let mul = |a: &[BigRational], b: &[BigRational]| -> Vec<BigRational> {
        let mut out = vec![BigRational::zero(); m + 1];
        for (i, x) in a.iter().enumerate() {
            for (j, y) in b.iter().enumerate().take(m + 1 - i) {
                out[i + j] += x * y;
            }
        }
        out
    };
    let mut click = exp_series(&sig);
    click[0] = BigRational::zero();
    let mut acc = exp_series(&tau);
    for _ in 0..k {
        acc = mul(&acc, &click);
    }
    let mut fact = BigInt::one();
    for i in 1..=m {
        fact *= BigInt::from(i);
    }
    let mut binom = BigInt::one();
    for i in 0..k {
        binom = binom * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    &acc[m] * BigRational::from_integer(fact * binom)
}
