use serde::{Deserialize, Serialize};

use super::noise::{mean_sd, ValueNoise};
use crate::error::{ensure, Error, Result};
use crate::grid::{self, Coord};
use crate::quantize::{Phase, TumorMap, MAX_DENSITY};
use crate::volume_io::{HuVolume, Voxel};

/// How tumor state turns into HU.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntensityModel {
    /// Mean lesion HU for this lesion.
    pub hu_base: f64,
    /// Range `hu_base` was drawn from.
    pub hu_range: [f64; 2],
    /// HU offset applied to Necrotic voxels (negative: darker).
    pub necrosis_delta: f64,
    /// Standard deviation of the texture over the lesion, HU.
    pub texture_sigma: f64,
    /// Texture wavelengths, voxels.
    pub texture_scales: Vec<f64>,
    /// Width in voxels of the soft edge outside the mask.
    pub blend_halfwidth: u32,
    pub capsule_enabled: bool,
    /// HU offset of the one-voxel rim just outside the mask.
    pub capsule_delta: f64,
    /// Lesions with a smaller equivalent-sphere radius get no capsule.
    pub capsule_min_radius_mm: f64,
}

impl Default for IntensityModel {
    fn default() -> Self {
        Self {
            hu_base: 106.0,
            hu_range: [36.0, 162.0],
            necrosis_delta: -30.0,
            texture_sigma: 10.0,
            texture_scales: vec![3.0, 6.0],
            blend_halfwidth: 1,
            capsule_enabled: true,
            capsule_delta: -15.0,
            capsule_min_radius_mm: 10.0,
        }
    }
}

impl IntensityModel {
    pub fn validate(&self) -> Result<()> {
        let [lo, hi] = self.hu_range;
        ensure(lo <= hi, || format!("hu_range {:?} is reversed", self.hu_range))?;
        ensure((lo..=hi).contains(&self.hu_base), || {
            format!("hu_base {} outside hu_range {:?}", self.hu_base, self.hu_range)
        })?;
        ensure(self.texture_sigma >= 0.0, || format!("texture_sigma {} < 0", self.texture_sigma))?;
        ensure(!self.texture_scales.is_empty(), || "texture_scales is empty".into())?;
        ensure(self.capsule_min_radius_mm >= 0.0, || "capsule_min_radius_mm < 0".into())
    }

    /// Whether a lesion of this equivalent radius gets a capsule rim.
    pub fn capsule_applies(&self, equivalent_radius_mm: f64) -> bool {
        self.capsule_enabled && equivalent_radius_mm >= self.capsule_min_radius_mm
    }
}

/// Composites the tumor into the CT.
///
/// `out = (1 - w) * base + w * T` where `w = density / 10` on the tumor,
/// a linear taper over `blend_halfwidth` voxels outside it, and 0 elsewhere;
/// `base` is the CT (plus `capsule_delta` on the rim when the capsule
/// applies) and `T = hu_base + texture`. Necrotic voxels use
/// `hu_base + necrosis_delta`, clamped to `hu_range`, in place of `hu_base`.
/// The texture is normalized to zero mean and `texture_sigma` over the tumor
/// voxels.
pub fn render(ct: &HuVolume, tumor: &TumorMap, model: &IntensityModel, noise_seed: u64) -> Result<HuVolume> {
    model.validate()?;
    if ct.dims() != tumor.dims() {
        return Err(Error::DimensionMismatch(format!(
            "CT {:?} vs tumor map {:?}",
            ct.dims(),
            tumor.dims()
        )));
    }
    let Some(core) = tumor.region() else {
        return Ok(ct.clone());
    };
    let dims = ct.dims();
    let bh = model.blend_halfwidth as usize;
    let region = core.expand(bh.max(1), dims);
    let noise = ValueNoise::new(noise_seed, &model.texture_scales)?;
    let at = |c: Coord| noise.unit([c[0] as f64, c[1] as f64, c[2] as f64]);

    // texture normalization constants over the tumor voxels
    let (mean, sd) = if model.texture_sigma > 0.0 {
        let samples: Vec<f64> = core
            .iter()
            .filter(|&c| tumor.density_at(grid::index(dims, c)) > 0)
            .map(at)
            .collect();
        mean_sd(&samples)
    } else {
        (0.0, 0.0)
    };
    let texture = |c: Coord| {
        if sd > 0.0 {
            (at(c) - mean) / sd * model.texture_sigma
        } else {
            0.0
        }
    };

    let capsule = model.capsule_applies(tumor.equivalent_radius_mm());
    let src = ct.data();
    let mut out = src.to_vec();
    for c in region.iter() {
        let i = grid::index(dims, c);
        let d = tumor.density_at(i);
        let mut base = src[i] as f64;
        let (w, necrotic) = if d > 0 {
            (d as f64 / MAX_DENSITY as f64, tumor.phase_at(i) == Phase::Necrotic)
        } else {
            if capsule && touches_tumor(tumor, c) {
                base += model.capsule_delta;
            }
            (shell_weight(tumor, c, bh), false)
        };
        if w == 0.0 && base == src[i] as f64 {
            continue;
        }
        let level = if necrotic {
            (model.hu_base + model.necrosis_delta).clamp(model.hu_range[0], model.hu_range[1])
        } else {
            model.hu_base
        };
        let t = level + texture(c);
        out[i] = i16::from_f64((1.0 - w) * base + w * t);
    }
    ct.with_data(out)
}

fn touches_tumor(tumor: &TumorMap, c: Coord) -> bool {
    let dims = tumor.dims();
    (0..6).any(|d| grid::neighbor(dims, c, d).is_some_and(|n| tumor.density_at(n) > 0))
}

/// Blend weight of a non-tumor voxel: the strongest tapered contribution of
/// any tumor voxel within Euclidean distance `bh`.
fn shell_weight(tumor: &TumorMap, c: Coord, bh: usize) -> f64 {
    if bh == 0 {
        return 0.0;
    }
    let dims = tumor.dims();
    let r = bh as i64;
    let mut best: f64 = 0.0;
    for dz in -r..=r {
        for dy in -r..=r {
            for dx in -r..=r {
                let dist = ((dx * dx + dy * dy + dz * dz) as f64).sqrt();
                if dist > bh as f64 {
                    continue;
                }
                let Some(n) = grid::offset(dims, c, [dx, dy, dz]) else {
                    continue;
                };
                let d = tumor.density_at(grid::index(dims, n));
                if d > 0 {
                    let w = d as f64 / MAX_DENSITY as f64 * (1.0 - dist / (bh as f64 + 1.0));
                    best = best.max(w);
                }
            }
        }
    }
    best
}
