//! Digamma ψ and its first two derivatives for positive real arguments.
//!
//! All three functions shift the argument upward with the recurrence
//! ψ(x+1) = ψ(x) + 1/x until x ≥ 8 and then apply the Bernoulli-number
//! asymptotic series, which is accurate to a few ulps there.

use crate::error::{Error, Result};

/// Euler–Mascheroni constant γ = −ψ(1).
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

const SHIFT_THRESHOLD: f64 = 8.0;

/// B_{2k} for k = 1..=7.
const BERNOULLI_EVEN: [f64; 7] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
];

/// Largest integer argument answered from the harmonic-number identity
/// ψ(n) = −γ + H_{n−1}.
const EXACT_INTEGER_LIMIT: f64 = 16.0;

fn check_domain(x: f64, name: &str) -> Result<()> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::DomainViolation(format!(
            "{name} requires a finite x > 0, got {x}"
        )));
    }
    Ok(())
}

/// ψ(x) for x > 0.
pub fn digamma(x: f64) -> Result<f64> {
    check_domain(x, "digamma")?;
    if x <= EXACT_INTEGER_LIMIT && x.fract() == 0.0 {
        let n = x as u32;
        let harmonic: f64 = (1..n).map(|k| 1.0 / k as f64).sum();
        return Ok(-EULER_GAMMA + harmonic);
    }
    Ok(digamma_by_recurrence(x))
}

/// ψ(x) through recurrence plus asymptotic series only, without the
/// integer shortcut.
pub(crate) fn digamma_by_recurrence(x: f64) -> f64 {
    let mut acc = 0.0;
    let mut z = x;
    while z < SHIFT_THRESHOLD {
        acc -= 1.0 / z;
        z += 1.0;
    }
    let inv2 = 1.0 / (z * z);
    let mut power = inv2;
    let mut tail = 0.0;
    for (k, b) in BERNOULLI_EVEN.iter().enumerate() {
        tail += b / (2.0 * (k + 1) as f64) * power;
        power *= inv2;
    }
    acc + z.ln() - 0.5 / z - tail
}

/// ψ′(x) for x > 0.
pub fn trigamma(x: f64) -> Result<f64> {
    check_domain(x, "trigamma")?;
    let mut acc = 0.0;
    let mut z = x;
    while z < SHIFT_THRESHOLD {
        acc += 1.0 / (z * z);
        z += 1.0;
    }
    let inv = 1.0 / z;
    let inv2 = inv * inv;
    let mut power = inv2 * inv;
    let mut tail = 0.0;
    for b in BERNOULLI_EVEN {
        tail += b * power;
        power *= inv2;
    }
    Ok(acc + inv + 0.5 * inv2 + tail)
}

/// ψ″(x) for x > 0.
pub fn tetragamma(x: f64) -> Result<f64> {
    check_domain(x, "tetragamma")?;
    let mut acc = 0.0;
    let mut z = x;
    while z < SHIFT_THRESHOLD {
        acc -= 2.0 / (z * z * z);
        z += 1.0;
    }
    let inv = 1.0 / z;
    let inv2 = inv * inv;
    let mut power = inv2 * inv2;
    let mut tail = 0.0;
    for (k, b) in BERNOULLI_EVEN.iter().enumerate() {
        tail += (2 * k + 3) as f64 * b * power;
        power *= inv2;
    }
    Ok(acc - inv2 - inv2 * inv - tail)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn digamma_at_one_is_minus_gamma() {
        assert_eq!(digamma(1.0).unwrap(), -0.577_215_664_901_532_9);
        assert!((digamma_by_recurrence(1.0) + EULER_GAMMA).abs() <= 1e-12);
    }

    #[test]
    fn digamma_at_two() {
        assert!((digamma(2.0).unwrap() - 0.422_784_335_098_467_1).abs() <= 1e-15);
        assert!((digamma_by_recurrence(2.0) - 0.422_784_335_098_467_1).abs() <= 1e-13);
    }

    #[test]
    fn digamma_at_half() {
        // ψ(1/2) = −γ − 2 ln 2
        let expected = -EULER_GAMMA - 2.0 * 2f64.ln();
        assert!((digamma(0.5).unwrap() - expected).abs() <= 1e-13);
    }

    #[test]
    fn trigamma_at_one_and_half() {
        assert!((trigamma(1.0).unwrap() - PI * PI / 6.0).abs() <= 1e-13);
        assert!((trigamma(0.5).unwrap() - PI * PI / 2.0).abs() <= 1e-12);
    }

    #[test]
    fn tetragamma_at_one() {
        // ψ″(1) = −2 ζ(3)
        let zeta3 = 1.202_056_903_159_594_3;
        assert!((tetragamma(1.0).unwrap() + 2.0 * zeta3).abs() <= 1e-12);
    }

    #[test]
    fn recurrence_identity_on_grid() {
        for k in 0..1000 {
            let x = 0.5 + 9.5 * k as f64 / 999.0;
            let lhs = digamma(x + 1.0).unwrap() - digamma(x).unwrap() - 1.0 / x;
            assert!(lhs.abs() <= 1e-12, "x = {x}: {lhs:e}");
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        for &x in &[0.7, 1.0, 2.3, 5.5, 9.0] {
            let step = 1e-5;
            let fd1 = (digamma_by_recurrence(x + step) - digamma_by_recurrence(x - step)) / (2.0 * step);
            let t = trigamma(x).unwrap();
            assert!(((fd1 - t) / t).abs() < 1e-8);
            let fd2 = (trigamma(x + step).unwrap() - trigamma(x - step).unwrap()) / (2.0 * step);
            let q = tetragamma(x).unwrap();
            assert!(((fd2 - q) / q).abs() < 1e-8);
        }
    }

    #[test]
    fn rejects_non_positive() {
        assert!(matches!(digamma(0.0), Err(Error::DomainViolation(_))));
        assert!(matches!(digamma(-1.5), Err(Error::DomainViolation(_))));
        assert!(trigamma(f64::NAN).is_err());
    }
}
