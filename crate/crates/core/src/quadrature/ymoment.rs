//! Exact y-integrals Gⱼ(λ) = ∫_A y^{2j} e^{iλy²} dy over an interval A
//! that excludes 0.
//!
//! Small |λ|·max y² uses the power series of the exponential. Otherwise G₀
//! comes from the complementary error function (continued fraction for
//! large arguments, Taylor series for small ones) and higher moments from
//! the integration-by-parts recurrence
//! Gⱼ = ([y^{2j−1} e^{iλy²}]_a^b − (2j−1) Gⱼ₋₁) / (2iλ).

use std::f64::consts::{FRAC_PI_4, PI};

use num_complex::Complex64;

use crate::fields::YRange;

/// |λ|·max y² up to which the power series is used.
const SERIES_LIMIT: f64 = 4.0;
/// Arguments u = √λ·y at or above this use the continued fraction.
const CF_THRESHOLD: f64 = 2.0;
const CF_MAX_TERMS: usize = 5000;

/// Gⱼ(λ) for j = 0..=jmax.
pub fn y_moments(lambda: f64, range: YRange, jmax: usize) -> Vec<Complex64> {
    // The integrand is even in y, so a negative range reflects onto a positive one.
    let (a, b) = if range.lo() > 0.0 {
        (range.lo(), range.hi())
    } else {
        (-range.hi(), -range.lo())
    };
    if lambda < 0.0 {
        return positive_moments(-lambda, a, b, jmax)
            .into_iter()
            .map(|z| z.conj())
            .collect();
    }
    positive_moments(lambda, a, b, jmax)
}

/// G₀(λ) = ∫_A e^{iλy²} dy.
pub fn y_moment0(lambda: f64, range: YRange) -> Complex64 {
    let (a, b) = if range.lo() > 0.0 {
        (range.lo(), range.hi())
    } else {
        (-range.hi(), -range.lo())
    };
    let l = lambda.abs();
    let g = if l * b * b <= SERIES_LIMIT {
        series_moment(l, a, b, 0)
    } else {
        moment0_large(l, a, b)
    };
    if lambda < 0.0 { g.conj() } else { g }
}

fn positive_moments(lambda: f64, a: f64, b: f64, jmax: usize) -> Vec<Complex64> {
    if lambda * b * b <= SERIES_LIMIT {
        return (0..=jmax).map(|j| series_moment(lambda, a, b, j)).collect();
    }
    let mut out = Vec::with_capacity(jmax + 1);
    out.push(moment0_large(lambda, a, b));
    let ea = Complex64::cis(lambda * a * a);
    let eb = Complex64::cis(lambda * b * b);
    let denom = Complex64::new(0.0, 2.0 * lambda);
    for j in 1..=jmax {
        let p = (2 * j - 1) as i32;
        let boundary = eb * b.powi(p) - ea * a.powi(p);
        let prev = out[j - 1];
        out.push((boundary - prev * (2 * j - 1) as f64) / denom);
    }
    out
}

/// Σₖ (iλ)ᵏ/k! · (b^{2j+2k+1} − a^{2j+2k+1})/(2j+2k+1).
fn series_moment(lambda: f64, a: f64, b: f64, j: usize) -> Complex64 {
    let mut sum = Complex64::new(0.0, 0.0);
    let mut coef = Complex64::new(1.0, 0.0);
    let (a2, b2) = (a * a, b * b);
    let mut pa = a.powi(2 * j as i32 + 1);
    let mut pb = b.powi(2 * j as i32 + 1);
    for k in 0..200 {
        let deg = (2 * j + 2 * k + 1) as f64;
        let term = coef * ((pb - pa) / deg);
        sum += term;
        if term.norm_sqr() <= 1e-34 * sum.norm_sqr() && k > 2 {
            break;
        }
        coef *= Complex64::new(0.0, lambda / (k + 1) as f64);
        pa *= a2;
        pb *= b2;
    }
    sum
}

/// G₀ for λ > 0 with λb² above the series limit, through
/// ∫_y^∞ e^{iλt²} dt = T(√λ·y)/√λ.
fn moment0_large(lambda: f64, a: f64, b: f64) -> Complex64 {
    let s = lambda.sqrt();
    let (ua, ub) = (s * a, s * b);
    if ua >= CF_THRESHOLD {
        // Both tails from the continued fraction; the common phase factor
        // is applied once.
        let ta = Complex64::cis(ua * ua) * erfc_fraction(ua);
        let tb = Complex64::cis(ub * ub) * erfc_fraction(ub);
        return Complex64::cis(FRAC_PI_4) * (ta - tb) / (2.0 * s);
    }
    (fresnel_tail(ua) - fresnel_tail(ub)) / s
}

/// T(u) = ∫_u^∞ e^{it²} dt for u ≥ 0.
pub(crate) fn fresnel_tail(u: f64) -> Complex64 {
    if u >= CF_THRESHOLD {
        Complex64::cis(FRAC_PI_4) * Complex64::cis(u * u) * erfc_fraction(u) / 2.0
    } else {
        let half_total = Complex64::cis(FRAC_PI_4) * (PI.sqrt() / 2.0);
        half_total - fresnel_head(u)
    }
}

/// ∫_0^u e^{it²} dt by its power series (u below the fraction threshold).
fn fresnel_head(u: f64) -> Complex64 {
    let u2 = u * u;
    let mut sum = Complex64::new(0.0, 0.0);
    let mut coef = Complex64::new(u, 0.0);
    for k in 0..200 {
        let term = coef / (2 * k + 1) as f64;
        sum += term;
        if term.norm_sqr() <= 1e-34 * sum.norm_sqr() && k > 2 {
            break;
        }
        coef *= Complex64::new(0.0, u2 / (k + 1) as f64);
    }
    sum
}

/// K(w) = √π·e^{w²}·erfc(w) at w = e^{−iπ/4}u, from
/// K = 2w / (1+2w² − 1·2/(5+2w² − 3·4/(9+2w² − …))) by modified Lentz.
fn erfc_fraction(u: f64) -> Complex64 {
    let w = Complex64::cis(-FRAC_PI_4) * u;
    let w2x2 = Complex64::new(0.0, -2.0 * u * u);
    let tiny = 1e-150;
    let mut f = Complex64::new(1.0, 0.0) + w2x2;
    let mut c = f;
    let mut d = Complex64::new(0.0, 0.0);
    for k in 1..CF_MAX_TERMS {
        let an = -(((2 * k - 1) * (2 * k)) as f64);
        let bn = Complex64::new((4 * k + 1) as f64, 0.0) + w2x2;
        d = bn + d * an;
        if d.norm_sqr() < tiny * tiny {
            d = Complex64::new(tiny, 0.0);
        }
        c = bn + an / c;
        if c.norm_sqr() < tiny * tiny {
            c = Complex64::new(tiny, 0.0);
        }
        d = d.inv();
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).norm_sqr() < 1e-30 {
            break;
        }
    }
    2.0 * w / f
}

#[cfg(test)]
mod tests {
    use super::*;

    fn range(a: f64, b: f64) -> YRange {
        YRange::new(a, b).unwrap()
    }

    /// Composite Gauss–Legendre reference with many panels.
    fn brute(lambda: f64, a: f64, b: f64, j: usize) -> Complex64 {
        let (x, w) = crate::quadrature::gauss::nodes_weights();
        let panels = 4000;
        let width = (b - a) / panels as f64;
        let mut sum = Complex64::new(0.0, 0.0);
        for p in 0..panels {
            let lo = a + p as f64 * width;
            for (xi, wi) in x.iter().zip(w) {
                let y = lo + 0.5 * width * (xi + 1.0);
                sum += Complex64::cis(lambda * y * y) * y.powi(2 * j as i32) * (0.5 * width * wi);
            }
        }
        sum
    }

    #[test]
    fn zero_lambda_is_length() {
        assert_eq!(y_moment0(0.0, range(1.0, 2.0)), Complex64::new(1.0, 0.0));
        let g = y_moments(0.0, range(1.0, 2.0), 1);
        assert!((g[1].re - 7.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn fresnel_tail_matches_reference_values() {
        // ∫_u^∞ e^{it²} dt = √(π/2)·[(½ − C(u√(2/π))) + i(½ − S(u√(2/π)))],
        // reference values from mpmath (30 digits).
        let cases = [
            (0.5, Complex64::new(0.129_773_039_442_955_41, 0.585_176_044_389_202_6)),
            (2.0, Complex64::new(0.165_195_606_224_533_75, -0.178_119_420_686_005_98)),
            (7.5, Complex64::new(0.020_177_533_902_606_606, 0.063_526_065_064_290_245)),
        ];
        for (u, want) in cases {
            let got = fresnel_tail(u);
            assert!((got - want).norm() < 1e-13, "u = {u}: {got} vs {want}");
        }
    }

    #[test]
    fn moments_match_brute_force_across_regimes() {
        for &lambda in &[0.3, 1.0, 3.9, 4.1, 10.0, 57.0, 400.0, 2500.0] {
            let g = y_moments(lambda, range(1.0, 2.0), 4);
            for (j, gj) in g.iter().enumerate() {
                let want = brute(lambda, 1.0, 2.0, j);
                assert!(
                    (gj - want).norm() <= 1e-11 * (1.0 + want.norm()),
                    "lambda {lambda} j {j}: {gj} vs {want}"
                );
            }
        }
    }

    #[test]
    fn small_lower_endpoint_mixes_series_and_fraction() {
        for &lambda in &[30.0, 900.0] {
            let got = y_moment0(lambda, range(0.05, 1.5));
            let want = brute(lambda, 0.05, 1.5, 0);
            assert!((got - want).norm() < 1e-11);
        }
    }

    #[test]
    fn negative_lambda_and_negative_range() {
        let g = y_moment0(37.0, range(1.0, 2.0));
        assert_eq!(y_moment0(-37.0, range(1.0, 2.0)), g.conj());
        assert_eq!(y_moment0(37.0, range(-2.0, -1.0)), g);
    }
}
