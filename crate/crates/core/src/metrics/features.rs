//! First-order intensity statistics and a small set of 3D shape
//! descriptors over a masked region.

use std::f64::consts::PI;

use nalgebra::{Matrix3, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid;
use crate::volume_io::{HuVolume, LabelVolume};

pub const ENTROPY_BINS: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FeatureVector {
    pub mean: f64,
    pub std: f64,
    pub median: f64,
    pub p10: f64,
    pub p90: f64,
    pub entropy: f64,
    pub volume_mm3: f64,
    pub surface_area_mm2: f64,
    pub sphericity: f64,
    pub equivalent_diameter_mm: f64,
    pub elongation: f64,
}

impl FeatureVector {
    pub fn named(&self) -> [(&'static str, f64); 11] {
        [
            ("mean", self.mean),
            ("std", self.std),
            ("median", self.median),
            ("p10", self.p10),
            ("p90", self.p90),
            ("entropy", self.entropy),
            ("volume_mm3", self.volume_mm3),
            ("surface_area_mm2", self.surface_area_mm2),
            ("sphericity", self.sphericity),
            ("equivalent_diameter_mm", self.equivalent_diameter_mm),
            ("elongation", self.elongation),
        ]
    }
}

pub fn extract_features(image: &HuVolume, mask: &LabelVolume) -> Result<FeatureVector> {
    image.ensure_same_grid(mask, "image and mask")?;
    mask.ensure_binary()?;
    let mut values: Vec<f64> = image
        .data()
        .iter()
        .zip(mask.data())
        .filter(|(_, &m)| m != 0)
        .map(|(&v, _)| v as f64)
        .collect();
    if values.is_empty() {
        return Err(Error::EmptyMask);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
    let entropy = histogram_entropy(&values);
    values.sort_by(f64::total_cmp);

    let (volume, area) = volume_and_area(mask);
    let sphericity = PI.cbrt() * (6.0 * volume).powf(2.0 / 3.0) / area;
    Ok(FeatureVector {
        mean,
        std,
        median: percentile(&values, 0.5),
        p10: percentile(&values, 0.1),
        p90: percentile(&values, 0.9),
        entropy,
        volume_mm3: volume,
        surface_area_mm2: area,
        sphericity,
        equivalent_diameter_mm: (6.0 * volume / PI).cbrt(),
        elongation: elongation(mask),
    })
}

/// Linear interpolation between closest ranks; `sorted` must be nonempty.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Shannon entropy in bits over equal-width bins spanning [min, max].
fn histogram_entropy(values: &[f64]) -> f64 {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if hi <= lo {
        return 0.0;
    }
    let width = (hi - lo) / ENTROPY_BINS as f64;
    let mut counts = [0usize; ENTROPY_BINS];
    for &v in values {
        let b = (((v - lo) / width) as usize).min(ENTROPY_BINS - 1);
        counts[b] += 1;
    }
    let n = values.len() as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum()
}

/// Voxel volume and exposed-face surface area.
fn volume_and_area(mask: &LabelVolume) -> (f64, f64) {
    let dims = mask.dims();
    let s = mask.spacing_f64();
    let face_area = [s[1] * s[2], s[1] * s[2], s[0] * s[2], s[0] * s[2], s[0] * s[1], s[0] * s[1]];
    let data = mask.data();
    let mut count = 0usize;
    let mut area = 0.0;
    for (i, &m) in data.iter().enumerate() {
        if m == 0 {
            continue;
        }
        count += 1;
        let c = grid::coords(dims, i);
        for (dir, fa) in face_area.iter().enumerate() {
            let inside = grid::neighbor(dims, c, dir).is_some_and(|j| data[j] != 0);
            if !inside {
                area += fa;
            }
        }
    }
    (count as f64 * mask.voxel_volume_mm3(), area)
}

/// `sqrt(λ_minor / λ_major)` of the physical-coordinate covariance, where
/// λ_major ≥ λ_minor are the two largest eigenvalues. 1 for a single voxel.
fn elongation(mask: &LabelVolume) -> f64 {
    let dims = mask.dims();
    let s = mask.spacing_f64();
    let pts: Vec<[f64; 3]> = mask
        .data()
        .iter()
        .enumerate()
        .filter(|(_, &m)| m != 0)
        .map(|(i, _)| {
            let c = grid::coords(dims, i);
            [c[0] as f64 * s[0], c[1] as f64 * s[1], c[2] as f64 * s[2]]
        })
        .collect();
    let n = pts.len() as f64;
    let mut mu = [0.0; 3];
    for p in &pts {
        for a in 0..3 {
            mu[a] += p[a] / n;
        }
    }
    let mut cov = Matrix3::<f64>::zeros();
    for p in &pts {
        for a in 0..3 {
            for b in 0..3 {
                cov[(a, b)] += (p[a] - mu[a]) * (p[b] - mu[b]) / n;
            }
        }
    }
    let mut ev: Vec<f64> = SymmetricEigen::new(cov).eigenvalues.iter().map(|v| v.max(0.0)).collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    if ev[0] <= 0.0 {
        return 1.0;
    }
    (ev[1] / ev[0]).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ball(dims: grid::Dims, r: f64) -> LabelVolume {
        let c = dims.map(|d| (d as f64 - 1.0) / 2.0);
        let data = (0..grid::voxel_count(dims))
            .map(|i| {
                let p = grid::coords(dims, i);
                let d2: f64 = (0..3).map(|a| (p[a] as f64 - c[a]).powi(2)).sum();
                (d2 <= r * r) as u8
            })
            .collect();
        LabelVolume::new(dims, [1.0; 3], data).unwrap()
    }

    #[test]
    fn constant_image() {
        let m = ball([9, 9, 9], 3.0);
        let img = HuVolume::filled([9, 9, 9], [1.0; 3], 106).unwrap();
        let f = extract_features(&img, &m).unwrap();
        assert_eq!((f.mean, f.std, f.entropy), (106.0, 0.0, 0.0));
        assert_eq!((f.median, f.p10, f.p90), (106.0, 106.0, 106.0));
    }

    #[test]
    fn single_voxel_shape() {
        let mut m = LabelVolume::filled([3, 3, 3], [1.0; 3], 0).unwrap();
        m.set([1, 1, 1], 1);
        let img = HuVolume::filled([3, 3, 3], [1.0; 3], 0).unwrap();
        let f = extract_features(&img, &m).unwrap();
        assert_eq!(f.volume_mm3, 1.0);
        assert_eq!(f.surface_area_mm2, 6.0);
        let expect = PI.cbrt() * 6f64.powf(2.0 / 3.0) / 6.0;
        assert!((f.sphericity - expect).abs() < 1e-12);
        assert!((f.sphericity - 0.806).abs() < 1e-3);
        assert_eq!(f.elongation, 1.0);
    }

    #[test]
    fn anisotropic_faces() {
        let mut m = LabelVolume::filled([2, 1, 1], [1.0, 2.0, 3.0], 0).unwrap();
        m.data_mut().fill(1);
        let img = HuVolume::filled([2, 1, 1], [1.0, 2.0, 3.0], 0).unwrap();
        let f = extract_features(&img, &m).unwrap();
        assert_eq!(f.volume_mm3, 12.0);
        // two x faces of 6, four y faces of 3, four z faces of 2
        assert_eq!(f.surface_area_mm2, 12.0 + 12.0 + 8.0);
    }

    #[test]
    fn percentiles_and_entropy() {
        let mut m = LabelVolume::filled([10, 1, 1], [1.0; 3], 1).unwrap();
        m.set([0, 0, 0], 1);
        let img = HuVolume::new([10, 1, 1], [1.0; 3], (0..10).map(|v| v * 10).collect()).unwrap();
        let f = extract_features(&img, &m).unwrap();
        assert_eq!(f.median, 45.0);
        assert!((f.p10 - 9.0).abs() < 1e-12);
        assert!((f.p90 - 81.0).abs() < 1e-12);
        // ten distinct values, each in its own bin
        assert!((f.entropy - 10f64.log2()).abs() < 1e-12);
    }

    #[test]
    fn elongated_box() {
        let dims = [20, 5, 5];
        let m = LabelVolume::filled(dims, [1.0; 3], 1).unwrap();
        let img = HuVolume::filled(dims, [1.0; 3], 0).unwrap();
        let f = extract_features(&img, &m).unwrap();
        // variance of a uniform integer run of length n is (n^2 - 1) / 12
        let expect = ((25.0 - 1.0) / (400.0 - 1.0_f64)).sqrt();
        assert!((f.elongation - expect).abs() < 1e-9);
    }

    #[test]
    fn ball_sphericity_high_and_outside_values_ignored() {
        let m = ball([21, 21, 21], 8.0);
        let mut img = HuVolume::filled([21, 21, 21], [1.0; 3], 50).unwrap();
        let f1 = extract_features(&img, &m).unwrap();
        for (v, &k) in img.data_mut().iter_mut().zip(m.data()) {
            if k == 0 {
                *v = 900;
            }
        }
        let f2 = extract_features(&img, &m).unwrap();
        assert_eq!(f1, f2);
        assert!(f1.sphericity > 0.6 && f1.sphericity <= 1.0);
    }

    #[test]
    fn empty_mask_rejected() {
        let m = LabelVolume::filled([3, 3, 3], [1.0; 3], 0).unwrap();
        let img = HuVolume::filled([3, 3, 3], [1.0; 3], 0).unwrap();
        assert!(matches!(extract_features(&img, &m), Err(Error::EmptyMask)));
    }
}
