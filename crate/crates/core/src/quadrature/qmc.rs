//! Randomly shifted Kronecker rule with a standard error across shifts.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::pairwise_sum;
use crate::error::{Error, Result};
use crate::fields::BoxDomain;
use crate::lowdisc::Kronecker;

const CHUNK: u64 = 4096;

/// Mean over `shifts` shifted rules of `points` nodes each, times the box
/// volume, and the standard error of that mean.
pub fn qmc_integrate(
    domain: &BoxDomain,
    points: u64,
    shifts: usize,
    seed: u64,
    f: &(dyn Fn(&[f64]) -> Result<Complex64> + Sync),
) -> Result<(Complex64, f64)> {
    if points == 0 || shifts < 2 {
        return Err(Error::InvalidArgument(
            "QMC needs at least one point and two shifts".into(),
        ));
    }
    let d = domain.dim();
    let seq = Kronecker::new(d);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift_vectors: Vec<Vec<f64>> = (0..shifts)
        .map(|_| (0..d).map(|_| rng.random::<f64>()).collect())
        .collect();
    let volume = domain.volume();
    let estimates = shift_vectors
        .iter()
        .map(|shift| {
            let chunks = points.div_ceil(CHUNK);
            let sums = (0..chunks)
                .into_par_iter()
                .map(|c| {
                    let mut u = vec![0.0; d];
                    let mut x = vec![0.0; d];
                    let mut acc = Vec::with_capacity(CHUNK as usize);
                    for i in c * CHUNK..((c + 1) * CHUNK).min(points) {
                        seq.point(i, shift, &mut u);
                        for ((xk, uk), iv) in x.iter_mut().zip(&u).zip(&domain.intervals) {
                            *xk = iv.lo + iv.width() * uk;
                        }
                        acc.push(f(&x)?);
                    }
                    Ok(pairwise_sum(&acc))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(pairwise_sum(&sums) * (volume / points as f64))
        })
        .collect::<Result<Vec<Complex64>>>()?;
    let mean = pairwise_sum(&estimates) / shifts as f64;
    let var = estimates.iter().map(|e| (e - mean).norm_sqr()).sum::<f64>() / (shifts as f64 - 1.0);
    Ok((mean, (var / shifts as f64).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smooth_integrand_is_accurate_with_small_error_bar() {
        let d = BoxDomain::from_bounds(&[(0.0, 1.0), (0.0, 2.0), (-1.0, 1.0)]).unwrap();
        let f = |x: &[f64]| Ok(Complex64::new(x[0] * x[1] + x[2] * x[2], x[0]));
        let (v, err) = qmc_integrate(&d, 1 << 14, 8, 7, &f).unwrap();
        // ∫ x0·x1 = 0.5·2·2 = 2, ∫ x2² = 2/3·2 = 4/3, ∫ x0 = 0.5·4 = 2
        let want = Complex64::new(2.0 + 4.0 / 3.0, 2.0);
        assert!((v - want).norm() < 4.0 * err, "{v} {err}");
        assert!(err < 1e-2);
    }

    #[test]
    fn seeded_runs_are_reproducible() {
        let d = BoxDomain::from_bounds(&[(0.0, 1.0); 3]).unwrap();
        let f = |x: &[f64]| Ok(Complex64::cis(10.0 * (x[0] + x[1] * x[2])));
        let a = qmc_integrate(&d, 1000, 4, 42, &f).unwrap();
        let b = qmc_integrate(&d, 1000, 4, 42, &f).unwrap();
        assert_eq!(a, b);
    }
}
