//! Multiscale value noise: random lattice values, trilinearly interpolated,
//! summed over wavelengths.

use crate::error::{ensure, Result};
use crate::grid::{self, Dims};
use crate::rng::{hash_words, unit_f64};

#[derive(Clone, Debug, PartialEq)]
pub struct ValueNoise {
    key: u64,
    scales: Vec<f64>,
}

impl ValueNoise {
    /// `scales` are lattice wavelengths in voxels.
    pub fn new(seed: u64, scales: &[f64]) -> Result<Self> {
        ensure(!scales.is_empty(), || "noise needs at least one scale".into())?;
        ensure(scales.iter().all(|s| s.is_finite() && *s > 0.0), || {
            format!("noise scales must be positive, got {scales:?}")
        })?;
        Ok(Self {
            key: seed,
            scales: scales.to_vec(),
        })
    }

    fn lattice(&self, scale: usize, q: [i64; 3]) -> f64 {
        let h = hash_words(self.key, &[scale as u64, q[0] as u64, q[1] as u64, q[2] as u64]);
        2.0 * unit_f64(h) - 1.0
    }

    fn octave(&self, scale: usize, p: [f64; 3]) -> f64 {
        let s = p.map(|v| v / self.scales[scale]);
        let f0 = s.map(f64::floor);
        let t = [s[0] - f0[0], s[1] - f0[1], s[2] - f0[2]];
        let i0 = f0.map(|v| v as i64);
        let mut acc = 0.0;
        for corner in 0..8usize {
            let mut w = 1.0;
            let mut q = i0;
            for a in 0..3 {
                if corner >> a & 1 == 1 {
                    w *= t[a];
                    q[a] += 1;
                } else {
                    w *= 1.0 - t[a];
                }
            }
            acc += w * self.lattice(scale, q);
        }
        acc
    }

    /// Sum of octaves divided by the number of scales; lies in `[-1, 1]`.
    pub fn unit(&self, p: [f64; 3]) -> f64 {
        let sum: f64 = (0..self.scales.len()).map(|s| self.octave(s, p)).sum();
        sum / self.scales.len() as f64
    }
}

/// Noise over a whole grid, shifted and scaled to zero mean and standard
/// deviation `sigma`.
pub fn value_noise(dims: Dims, scales: &[f64], sigma: f64, seed: u64) -> Result<Vec<f64>> {
    ensure(sigma >= 0.0, || format!("sigma {sigma} must be >= 0"))?;
    let noise = ValueNoise::new(seed, scales)?;
    let n = grid::voxel_count(dims);
    if sigma == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let mut v: Vec<f64> = (0..n)
        .map(|i| {
            let c = grid::coords(dims, i);
            noise.unit([c[0] as f64, c[1] as f64, c[2] as f64])
        })
        .collect();
    normalize(&mut v, sigma);
    Ok(v)
}

/// Rescales in place to zero mean and the given population std. A constant
/// input becomes all zeros.
pub fn normalize(v: &mut [f64], sigma: f64) {
    let (mean, sd) = mean_sd(v);
    for x in v.iter_mut() {
        *x = if sd > 0.0 { (*x - mean) / sd * sigma } else { 0.0 };
    }
}

pub(crate) fn mean_sd(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (0.0, 0.0);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_sigma_is_zero_field() {
        let v = value_noise([8, 8, 8], &[4.0], 0.0, 1).unwrap();
        assert!(v.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn deterministic_per_seed() {
        let a = value_noise([10, 9, 8], &[3.0, 7.0], 5.0, 11).unwrap();
        let b = value_noise([10, 9, 8], &[3.0, 7.0], 5.0, 11).unwrap();
        let c = value_noise([10, 9, 8], &[3.0, 7.0], 5.0, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn normalized_moments() {
        let v = value_noise([16, 16, 16], &[4.0, 8.0], 20.0, 3).unwrap();
        let (m, s) = mean_sd(&v);
        assert!(m.abs() < 1e-9);
        assert!((s - 20.0).abs() < 1e-9);
    }

    #[test]
    fn empty_scales_rejected() {
        assert!(value_noise([2, 2, 2], &[], 1.0, 0).is_err());
        assert!(value_noise([2, 2, 2], &[0.0], 1.0, 0).is_err());
    }

    #[test]
    fn unit_noise_bounded() {
        let n = ValueNoise::new(5, &[2.0, 5.0]).unwrap();
        for i in 0..2000 {
            let p = [i as f64 * 0.37, i as f64 * -0.11, (i % 17) as f64];
            let v = n.unit(p);
            assert!((-1.0..=1.0).contains(&v));
        }
    }

    /// Lag-4 autocorrelation along x for single-scale noise at wavelength 8:
    /// neighbouring samples share lattice cells, so it must be positive.
    #[test]
    fn half_wavelength_autocorrelation_positive() {
        let dims = [64, 64, 64];
        let v = value_noise(dims, &[8.0], 1.0, 77).unwrap();
        let lag = 4;
        let mut num = 0.0;
        let mut cnt = 0usize;
        for z in 0..64 {
            for y in 0..64 {
                for x in 0..64 - lag {
                    let a = v[grid::index(dims, [x, y, z])];
                    let b = v[grid::index(dims, [x + lag, y, z])];
                    num += a * b;
                    cnt += 1;
                }
            }
        }
        let r = num / cnt as f64; // variance is 1 after normalization
        assert!(r > 0.2, "autocorrelation {r}");
    }
}
