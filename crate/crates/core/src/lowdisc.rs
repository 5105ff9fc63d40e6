//! Kronecker (R_d) low-discrepancy sequence on the unit cube.

/// Additive recurrence xᵢ = frac(shift + i·g) with g built from the
/// generalized golden ratio φ_d, the positive root of x^{d+1} = x + 1.
#[derive(Debug, Clone)]
pub struct Kronecker {
    generator: Vec<f64>,
}

impl Kronecker {
    pub fn new(dim: usize) -> Self {
        let mut phi = 2.0f64;
        for _ in 0..64 {
            phi = (1.0 + phi).powf(1.0 / (dim as f64 + 1.0));
        }
        let generator = (1..=dim).map(|k| phi.powi(-(k as i32)).fract()).collect();
        Self { generator }
    }

    /// Writes the `index`-th point, shifted by `shift`, into `out`.
    pub fn point(&self, index: u64, shift: &[f64], out: &mut [f64]) {
        for ((o, g), s) in out.iter_mut().zip(&self.generator).zip(shift) {
            // i·g mod 1 computed in two pieces keeps precision for large i.
            let hi = (index >> 20) as f64;
            let lo = (index & 0xF_FFFF) as f64;
            let v = s + (hi * (g * 1_048_576.0).fract()).fract() + (lo * g).fract();
            *o = v - v.floor();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_dimensional_generator_is_golden() {
        let k = Kronecker::new(1);
        let golden = (5f64.sqrt() - 1.0) / 2.0;
        assert!((k.generator[0] - golden).abs() < 1e-14);
    }

    #[test]
    fn points_fill_the_cube_evenly() {
        let k = Kronecker::new(3);
        let mut counts = [0usize; 8];
        let mut p = [0.0; 3];
        let n = 8000;
        for i in 0..n {
            k.point(i, &[0.5; 3], &mut p);
            assert!(p.iter().all(|&v| (0.0..1.0).contains(&v)));
            let cell = (p[0] >= 0.5) as usize + 2 * (p[1] >= 0.5) as usize + 4 * (p[2] >= 0.5) as usize;
            counts[cell] += 1;
        }
        for c in counts {
            assert!((c as i64 - 1000).abs() < 50, "{counts:?}");
        }
    }
}
