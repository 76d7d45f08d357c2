//! Wigner 3j symbols and Gaunt integrals for integer angular momenta.

use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::sh::Y00;

const LN_FACT_LEN: usize = 512;

fn ln_factorial(n: i64) -> f64 {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    let table = TABLE.get_or_init(|| {
        let mut t = vec![0.0; LN_FACT_LEN];
        for k in 1..LN_FACT_LEN {
            t[k] = t[k - 1] + (k as f64).ln();
        }
        t
    });
    table[n as usize]
}

/// Wigner 3j symbol `(j1 j2 j3; m1 m2 m3)` via the Racah formula.
pub fn wigner_3j(j1: i64, j2: i64, j3: i64, m1: i64, m2: i64, m3: i64) -> f64 {
    if m1 + m2 + m3 != 0
        || m1.abs() > j1
        || m2.abs() > j2
        || m3.abs() > j3
        || j3 < (j1 - j2).abs()
        || j3 > j1 + j2
    {
        return 0.0;
    }
    let t_min = 0.max(j2 - j3 - m1).max(j1 - j3 + m2);
    let t_max = (j1 + j2 - j3).min(j1 - m1).min(j2 + m2);
    if t_min > t_max {
        return 0.0;
    }

    let ln_prefactor = 0.5
        * (ln_factorial(j1 + j2 - j3) + ln_factorial(j1 - j2 + j3) + ln_factorial(-j1 + j2 + j3)
            - ln_factorial(j1 + j2 + j3 + 1)
            + ln_factorial(j1 + m1)
            + ln_factorial(j1 - m1)
            + ln_factorial(j2 + m2)
            + ln_factorial(j2 - m2)
            + ln_factorial(j3 + m3)
            + ln_factorial(j3 - m3));

    let mut sum = 0.0;
    for t in t_min..=t_max {
        let ln_den = ln_factorial(t)
            + ln_factorial(j3 - j2 + t + m1)
            + ln_factorial(j3 - j1 + t - m2)
            + ln_factorial(j1 + j2 - j3 - t)
            + ln_factorial(j1 - t - m1)
            + ln_factorial(j2 - t + m2);
        let term = (ln_prefactor - ln_den).exp();
        sum += if t % 2 == 0 { term } else { -term };
    }
    if (j1 - j2 - m3).rem_euclid(2) == 1 {
        -sum
    } else {
        sum
    }
}

/// Relative phase between the harmonics used here and the textbook
/// Condon-Shortley ones: they differ by `(-1)^m` for negative `m`.
#[inline]
fn phase(m: i64) -> f64 {
    if m < 0 && m % 2 != 0 {
        -1.0
    } else {
        1.0
    }
}

/// `∫ Y_{n1}^{m1} Y_{n2}^{m2} conj(Y_{n3}^{m3}) dΩ` over the unit sphere.
///
/// Exactly zero whenever a selection rule fails.
pub fn gaunt(n1: usize, m1: i64, n2: usize, m2: i64, n3: usize, m3: i64) -> Result<f64> {
    for (n, m) in [(n1, m1), (n2, m2), (n3, m3)] {
        if m.unsigned_abs() as usize > n {
            return Err(Error::OrderOutOfRange { n, m });
        }
    }
    if m1 + m2 != m3 || (n1 + n2 + n3) % 2 == 1 || n3 > n1 + n2 || n3 < n1.abs_diff(n2) {
        return Ok(0.0);
    }
    // multiplication by the constant harmonic
    if n1 == 0 || n2 == 0 {
        return Ok(Y00);
    }
    let (l1, l2, l3) = (n1 as i64, n2 as i64, n3 as i64);
    let norm = (((2 * l1 + 1) * (2 * l2 + 1) * (2 * l3 + 1)) as f64 / (4.0 * PI)).sqrt();
    // conj(Y_{n3}^{m3}) = Y_{n3}^{-m3} for these harmonics
    let value = norm * wigner_3j(l1, l2, l3, 0, 0, 0) * wigner_3j(l1, l2, l3, m1, m2, -m3);
    Ok(value * phase(m1) * phase(m2) * phase(-m3))
}
