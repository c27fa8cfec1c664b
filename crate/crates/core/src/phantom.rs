//! Synthetic abdominal phantoms for tests, demos, and benchmarks: an
//! ellipsoidal organ with textured parenchyma and two tubular vessels.

use crate::error::Result;
use crate::grid::{self, Dims};
use crate::mapping::value_noise;
use crate::volume_io::{HuVolume, LabelVolume, MaskSet, Voxel};

#[derive(Clone, Debug, PartialEq)]
pub struct PhantomSpec {
    pub dims: Dims,
    pub spacing: [f32; 3],
    /// Organ semiaxes as fractions of the grid extent.
    pub organ_fraction: [f64; 3],
    pub organ_hu: f64,
    pub organ_noise_sigma: f64,
    pub background_hu: f64,
    pub vessels: bool,
    pub vessel_hu: f64,
    pub vessel_radius_voxels: f64,
    pub seed: u64,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        Self {
            dims: [64, 64, 64],
            spacing: [1.0; 3],
            organ_fraction: [0.42, 0.38, 0.40],
            organ_hu: 60.0,
            organ_noise_sigma: 8.0,
            background_hu: -100.0,
            vessels: true,
            vessel_hu: 180.0,
            vessel_radius_voxels: 1.5,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Phantom {
    pub ct: HuVolume,
    pub masks: MaskSet,
}

impl Phantom {
    pub fn generate(spec: &PhantomSpec) -> Result<Self> {
        let dims = spec.dims;
        let n = grid::voxel_count(dims);
        let center = dims.map(|d| (d as f64 - 1.0) / 2.0);
        let semi = [0, 1, 2].map(|a| spec.organ_fraction[a] * dims[a] as f64);
        let organ: Vec<u8> = (0..n)
            .map(|i| {
                let c = grid::coords(dims, i);
                let rho2: f64 = (0..3).map(|a| ((c[a] as f64 - center[a]) / semi[a]).powi(2)).sum();
                (rho2 <= 1.0) as u8
            })
            .collect();

        // one tube along z, one along x, both offset from the center
        let r2 = spec.vessel_radius_voxels * spec.vessel_radius_voxels;
        let vz = [center[0] + 0.35 * semi[0], center[1] - 0.2 * semi[1]];
        let vx = [center[1] + 0.4 * semi[1], center[2] - 0.3 * semi[2]];
        let vessels: Vec<u8> = (0..n)
            .map(|i| {
                if !spec.vessels || organ[i] == 0 {
                    return 0;
                }
                let c = grid::coords(dims, i).map(|v| v as f64);
                let along_z = (c[0] - vz[0]).powi(2) + (c[1] - vz[1]).powi(2) <= r2;
                let along_x = (c[1] - vx[0]).powi(2) + (c[2] - vx[1]).powi(2) <= r2;
                (along_z || along_x) as u8
            })
            .collect();

        let texture = value_noise(dims, &[4.0, 9.0], spec.organ_noise_sigma, spec.seed)?;
        let hu: Vec<i16> = (0..n)
            .map(|i| {
                let v = if vessels[i] != 0 {
                    spec.vessel_hu
                } else if organ[i] != 0 {
                    spec.organ_hu + texture[i]
                } else {
                    spec.background_hu
                };
                i16::from_f64(v)
            })
            .collect();

        let ct = HuVolume::new(dims, spec.spacing, hu)?;
        let organ = LabelVolume::new(dims, spec.spacing, organ)?;
        let vessels = spec
            .vessels
            .then(|| LabelVolume::new(dims, spec.spacing, vessels))
            .transpose()?;
        Ok(Self {
            ct,
            masks: MaskSet::new(organ, vessels)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phantom_is_consistent() {
        let p = Phantom::generate(&PhantomSpec {
            dims: [32, 30, 28],
            ..PhantomSpec::default()
        })
        .unwrap();
        let organ = p.masks.organ().count_nonzero();
        let vessels = p.masks.vessels().unwrap().count_nonzero();
        assert!(organ > 32 * 30 * 28 / 5);
        assert!(vessels > 0 && vessels < organ / 10);
        let again = Phantom::generate(&PhantomSpec {
            dims: [32, 30, 28],
            ..PhantomSpec::default()
        })
        .unwrap();
        assert_eq!(p.ct, again.ct);
    }
}
