//! Shape-based lesion generator: a randomly rotated ellipsoid with a
//! noise-perturbed surface, placed by rejection sampling.

use std::collections::VecDeque;

use nalgebra::{Rotation3, Vector3};
use serde::{Deserialize, Serialize};

use crate::ca::SeedSampler;
use crate::error::{ensure, Error, Result, StageExt};
use crate::grid::{self, Coord, Dims};
use crate::mapping::ValueNoise;
use crate::pipeline::{composite, LesionRecipe, SynthesisResult};
use crate::quantize::{build_organ_map, OrganMap, TumorMap};
use crate::rng::Stream;
use crate::volume_io::{HuVolume, LabelVolume, MaskSet};

/// Largest semiaxis accepted, mm.
pub const MAX_SEMIAXIS_MM: f64 = 100.0;
/// Satellites are centered within this distance of the primary, mm.
pub const SATELLITE_RADIUS_MM: f64 = 40.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShapeSpec {
    pub semiaxes_mm: [f64; 3],
    /// Roll, pitch, yaw in radians (rotations about x, y, z).
    pub euler_angles: [f64; 3],
    /// Correlation length of the surface perturbation along the surface, mm.
    pub elastic_sigma_mm: f64,
    /// Perturbation amplitude as a fraction of the radius, in [0, 0.5].
    pub elastic_amplitude: f64,
    /// Primary plus satellites.
    pub multifocal_count: u32,
}

impl Default for ShapeSpec {
    fn default() -> Self {
        Self {
            semiaxes_mm: [5.0, 5.0, 5.0],
            euler_angles: [0.0; 3],
            elastic_sigma_mm: 4.0,
            elastic_amplitude: 0.15,
            multifocal_count: 1,
        }
    }
}

impl ShapeSpec {
    pub fn validate(&self) -> Result<()> {
        ensure(
            self.semiaxes_mm.iter().all(|&a| a > 0.0 && a <= MAX_SEMIAXIS_MM),
            || format!("semiaxes {:?} must lie in (0, {MAX_SEMIAXIS_MM}] mm", self.semiaxes_mm),
        )?;
        ensure(self.euler_angles.iter().all(|a| a.is_finite()), || "euler angles must be finite".into())?;
        ensure(self.elastic_sigma_mm > 0.0 && self.elastic_sigma_mm.is_finite(), || {
            format!("elastic_sigma_mm {} must be > 0", self.elastic_sigma_mm)
        })?;
        ensure((0.0..=0.5).contains(&self.elastic_amplitude), || {
            format!("elastic_amplitude {} not in [0, 0.5]", self.elastic_amplitude)
        })?;
        ensure(self.multifocal_count >= 1, || "multifocal_count must be >= 1".into())
    }

    pub fn mean_radius_mm(&self) -> f64 {
        self.semiaxes_mm.iter().product::<f64>().cbrt()
    }

    pub fn volume_mm3(&self) -> f64 {
        4.0 / 3.0 * std::f64::consts::PI * self.semiaxes_mm.iter().product::<f64>()
    }
}

/// A mask on a small grid centered on `center`.
#[derive(Clone, Debug, PartialEq)]
pub struct ShapeMask {
    pub mask: LabelVolume,
    pub center: Coord,
}

impl ShapeMask {
    /// Offsets of the mask voxels relative to the center.
    pub fn offsets(&self) -> impl Iterator<Item = [i64; 3]> + '_ {
        let dims = self.mask.dims();
        self.mask
            .data()
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0)
            .map(move |(i, _)| {
                let c = grid::coords(dims, i);
                [0, 1, 2].map(|a| c[a] as i64 - self.center[a] as i64)
            })
    }
}

/// Rasterizes a perturbed, rotated ellipsoid at `spacing`.
///
/// A voxel at body-frame offset `q` is inside when
/// `rho(q) <= 1 + amplitude * n(q / |q|)` with `rho` the ellipsoid radius
/// function and `n` value noise sampled on a sphere whose radius is the
/// mean radius over `elastic_sigma_mm`. Only the 6-connected component of
/// the center voxel is kept.
pub fn generate_shape(spec: &ShapeSpec, spacing: [f64; 3], seed: u64) -> Result<ShapeMask> {
    spec.validate()?;
    ensure(spacing.iter().all(|&s| s > 0.0 && s.is_finite()), || {
        format!("spacing {spacing:?} must be positive")
    })?;
    let min_spacing = spacing.iter().cloned().fold(f64::INFINITY, f64::min);
    if spec.semiaxes_mm.iter().any(|&a| a < 0.5 * min_spacing) {
        return Err(Error::DegenerateShape);
    }

    let reach = spec.semiaxes_mm.iter().cloned().fold(0.0, f64::max) * (1.0 + spec.elastic_amplitude);
    let half: [usize; 3] = [0, 1, 2].map(|a| (reach / spacing[a]).ceil() as usize + 1);
    let dims: Dims = half.map(|h| 2 * h + 1);
    let center = half;

    let [roll, pitch, yaw] = spec.euler_angles;
    let rot_t = Rotation3::from_euler_angles(roll, pitch, yaw).inverse();
    let identity = spec.euler_angles == [0.0; 3];
    let noise = ValueNoise::new(seed, &[1.0])?;
    let noise_radius = spec.mean_radius_mm() / spec.elastic_sigma_mm;
    let amp = spec.elastic_amplitude;

    let mut data = vec![0u8; grid::voxel_count(dims)];
    for (i, v) in data.iter_mut().enumerate() {
        let c = grid::coords(dims, i);
        let p = [0, 1, 2].map(|a| (c[a] as f64 - center[a] as f64) * spacing[a]);
        let q = if identity {
            p
        } else {
            let r = rot_t * Vector3::from(p);
            [r.x, r.y, r.z]
        };
        let mut terms = [0, 1, 2].map(|a| (q[a] / spec.semiaxes_mm[a]).powi(2));
        // ordered sum keeps the result exact under axis permutations
        terms.sort_by(f64::total_cmp);
        let rho2 = terms[0] + terms[1] + terms[2];
        let limit = if amp == 0.0 || rho2 == 0.0 {
            1.0
        } else {
            let norm = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2]).sqrt();
            let dir = q.map(|x| x / norm * noise_radius);
            1.0 + amp * noise.unit(dir)
        };
        *v = (rho2 <= limit * limit) as u8;
    }
    keep_component(dims, &mut data, grid::index(dims, center));
    let mask = LabelVolume::new(dims, spacing.map(|s| s as f32), data)?;
    Ok(ShapeMask { mask, center })
}

fn keep_component(dims: Dims, data: &mut [u8], start: usize) {
    if data[start] == 0 {
        data.fill(0);
        return;
    }
    let mut seen = vec![false; data.len()];
    let mut queue = VecDeque::from([start]);
    seen[start] = true;
    while let Some(i) = queue.pop_front() {
        let c = grid::coords(dims, i);
        for dir in 0..6 {
            if let Some(j) = grid::neighbor(dims, c, dir) {
                if data[j] != 0 && !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
    }
    for (v, s) in data.iter_mut().zip(seen) {
        if !s {
            *v = 0;
        }
    }
}

/// A placed lesion: the union mask on the organ grid and the center of
/// each focus (primary first).
#[derive(Clone, Debug, PartialEq)]
pub struct Placement {
    pub mask: LabelVolume,
    pub centers: Vec<Coord>,
}

/// Voxels of `shape` translated to `at`, or `None` if any would leave the
/// grid or touch a level-0 voxel (vessel or non-organ).
fn fit(shape: &ShapeMask, organ: &OrganMap, at: Coord) -> Option<Vec<usize>> {
    let dims = organ.dims();
    shape
        .offsets()
        .map(|off| {
            let c = grid::offset(dims, at, off)?;
            let idx = grid::index(dims, c);
            (organ.level(idx) >= 1).then_some(idx)
        })
        .collect()
}

/// Places the primary focus (at `fixed_center` if given, otherwise drawn
/// from the seed sampler) and any satellites.
///
/// Each focus gets up to `max_attempts` candidate centers; a candidate is
/// accepted only if the whole shape lies on organ tissue and off vessels.
/// Satellite shapes are the primary scaled by a factor in [0.25, 0.5],
/// centered within [`SATELLITE_RADIUS_MM`] of the primary, and may not
/// overlap already placed foci.
pub fn place_lesion(
    masks: &MaskSet,
    organ: &OrganMap,
    spec: &ShapeSpec,
    fixed_center: Option<Coord>,
    seed: u64,
    max_attempts: usize,
) -> Result<Placement> {
    ensure(max_attempts >= 1, || "max_attempts must be >= 1".into())?;
    let dims = organ.dims();
    let spacing = organ.levels().spacing_f64();
    let primary = generate_shape(spec, spacing, crate::rng::derive_key(seed, "shape"))?;

    let mut taken = vec![0u8; grid::voxel_count(dims)];
    let mut centers = Vec::new();

    let (center, voxels) = match fixed_center {
        Some(c) => {
            ensure(c.iter().zip(dims).all(|(&x, d)| x < d), || format!("seed voxel {c:?} outside grid"))?;
            let v = fit(&primary, organ, c).ok_or(Error::PlacementFailed(1))?;
            (c, v)
        }
        None => {
            let sampler = SeedSampler::new(masks, organ, 0.0)?;
            let mut stream = Stream::for_purpose(seed, "placement");
            (0..max_attempts)
                .find_map(|_| {
                    let c = sampler.sample(&mut stream);
                    fit(&primary, organ, c).map(|v| (c, v))
                })
                .ok_or(Error::PlacementFailed(max_attempts))?
        }
    };
    for i in voxels {
        taken[i] = 1;
    }
    centers.push(center);

    let mut stream = Stream::for_purpose(seed, "satellites");
    for k in 1..spec.multifocal_count {
        let scale = stream.range_f64(0.25, 0.5);
        let sat_spec = ShapeSpec {
            semiaxes_mm: spec.semiaxes_mm.map(|a| (a * scale).max(0.5 * min_axis(spacing))),
            multifocal_count: 1,
            ..spec.clone()
        };
        let shape = generate_shape(&sat_spec, spacing, crate::rng::hash_words(seed, &[k as u64]))?;
        let mut placed = None;
        for _ in 0..max_attempts {
            let off = random_offset_mm(&mut stream, SATELLITE_RADIUS_MM);
            let Some(c) = grid::offset(dims, center, [0, 1, 2].map(|a| (off[a] / spacing[a]).round() as i64))
            else {
                continue;
            };
            if let Some(v) = fit(&shape, organ, c) {
                if v.iter().all(|&i| taken[i] == 0) {
                    placed = Some((c, v));
                    break;
                }
            }
        }
        let (c, v) = placed.ok_or(Error::PlacementFailed(max_attempts))?;
        for i in v {
            taken[i] = 1;
        }
        centers.push(c);
    }
    let mask = organ.levels().with_data(taken)?;
    Ok(Placement { mask, centers })
}

/// Handcrafted path: placement, shape rasterization, then the shared mass
/// effect, warp, and rendering. The lesion is saturated (density 10)
/// everywhere inside its mask.
pub fn synthesize_handcrafted(ct: &HuVolume, masks: &MaskSet, recipe: &LesionRecipe) -> Result<SynthesisResult> {
    let spec = recipe
        .shape
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("missing shape".into()))?;
    let organ = build_organ_map(ct, masks, recipe.organ_levels).stage("quantize")?;
    let placement = place_lesion(
        masks,
        &organ,
        spec,
        recipe.seed_voxel,
        recipe.rng_seed,
        recipe.placement_attempts,
    )
    .stage("placement")?;
    let tumor = TumorMap::saturated_from_mask(&placement.mask).stage("placement")?;
    let mut echo = recipe.clone();
    echo.seed_voxel = Some(placement.centers[0]);
    composite(ct, masks, &tumor, echo)
}

fn min_axis(spacing: [f64; 3]) -> f64 {
    spacing.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Uniform point in a ball of radius `r`.
fn random_offset_mm(stream: &mut Stream, r: f64) -> [f64; 3] {
    loop {
        let p = [0; 3].map(|_| stream.range_f64(-r, r));
        if p.iter().map(|x| x * x).sum::<f64>() <= r * r {
            return p;
        }
    }
}
