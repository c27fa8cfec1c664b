//! Mass effect: a radial displacement field around the tumor and a backward
//! warp that pushes the surrounding anatomy outward.
//!
//! The field is `u(x) = A * g(|x - c|) * (x - c) / |x - c|` with `c` the
//! density-weighted centroid and `R` the equivalent-sphere radius (voxels):
//!
//! ```text
//! g(r) = sin^2(pi r / 2R)                          r <= R
//!      = (1 + cos(pi (r - R) / (r_inf - R))) / 2   R < r < r_inf
//!      = 0                                         r >= r_inf
//! ```
//!
//! The amplitude `A = strength * d_max * gate(R_mm)` is further capped so that
//! `A * max(|g'|, g / r) <= 0.9`, which bounds every diagonal Jacobian entry
//! (and its finite-difference estimate) below 1: the warp cannot fold.

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::grid::{self, Dims, Region};
use crate::quantize::TumorMap;
use crate::volume_io::{MaskSet, Volume, Voxel};

/// Upper bound on `A * max(|g'|, g/r)`.
const FOLD_MARGIN: f64 = 0.9;
/// max over t in (0, pi/2] of sin^2(t)/t, times pi/2.
const INNER_TANGENTIAL: f64 = 1.138_216_852_865_026_3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MassEffectParams {
    /// Overall scale in [0, 1].
    pub strength: f64,
    /// Maximum displacement, voxels.
    pub d_max: f64,
    /// Radius (voxels, from the centroid) beyond which the field is zero;
    /// raised to twice the lesion radius for large lesions.
    pub r_influence: f64,
    /// Equivalent radii (mm) over which the size gate ramps from 0 to 1.
    /// Smaller lesions produce no displacement.
    pub size_gate_mm: [f64; 2],
}

impl Default for MassEffectParams {
    fn default() -> Self {
        Self {
            strength: 1.0,
            d_max: 3.0,
            r_influence: 20.0,
            size_gate_mm: [2.0, 6.0],
        }
    }
}

impl MassEffectParams {
    pub fn validate(&self) -> Result<()> {
        ensure((0.0..=1.0).contains(&self.strength), || {
            format!("mass-effect strength {} not in [0,1]", self.strength)
        })?;
        ensure(self.d_max >= 0.0 && self.d_max.is_finite(), || format!("d_max {} must be >= 0", self.d_max))?;
        ensure(self.r_influence >= 0.0 && self.r_influence.is_finite(), || {
            format!("r_influence {} must be >= 0", self.r_influence)
        })?;
        ensure(self.size_gate_mm[0] <= self.size_gate_mm[1], || "size gate must be ordered".into())
    }
}

/// Radial profile of the field.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RadialProfile {
    pub radius: f64,
    pub r_influence: f64,
}

impl RadialProfile {
    pub fn g(&self, r: f64) -> f64 {
        let (big_r, ri) = (self.radius, self.r_influence);
        if r >= ri {
            0.0
        } else if r <= big_r {
            let s = (std::f64::consts::FRAC_PI_2 * r / big_r).sin();
            s * s
        } else {
            0.5 * (1.0 + (std::f64::consts::PI * (r - big_r) / (ri - big_r)).cos())
        }
    }

    /// Upper bound of `max(|g'(r)|, g(r)/r)` over all r.
    pub fn max_rate(&self) -> f64 {
        let big_r = self.radius;
        if big_r <= 0.0 || self.r_influence <= big_r {
            return f64::INFINITY;
        }
        let inner = std::f64::consts::FRAC_PI_2 / big_r;
        let outer = std::f64::consts::FRAC_PI_2 / (self.r_influence - big_r);
        inner.max(outer).max(INNER_TANGENTIAL / big_r)
    }
}

fn smoothstep(lo: f64, hi: f64, x: f64) -> f64 {
    if hi <= lo {
        return if x >= hi { 1.0 } else { 0.0 };
    }
    let t = ((x - lo) / (hi - lo)).clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

/// Displacement in voxel units, stored only inside `region`; zero elsewhere.
#[derive(Clone, Debug, PartialEq)]
pub struct DisplacementField {
    dims: Dims,
    region: Region,
    u: [Vec<f32>; 3],
}

impl DisplacementField {
    pub fn zero(dims: Dims) -> Self {
        Self {
            dims,
            region: Region::point([0, 0, 0]),
            u: [vec![0.0], vec![0.0], vec![0.0]],
        }
    }

    /// Uniform displacement over the whole grid.
    pub fn constant(dims: Dims, v: [f32; 3]) -> Self {
        let n = grid::voxel_count(dims);
        Self {
            dims,
            region: Region::full(dims),
            u: [vec![v[0]; n], vec![v[1]; n], vec![v[2]; n]],
        }
    }

    /// Builds a field from a closure evaluated on every voxel of `region`.
    pub fn from_fn(dims: Dims, region: Region, f: impl Fn(grid::Coord) -> [f64; 3]) -> Self {
        let n = grid::voxel_count(region.extent());
        let mut u = [Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n)];
        for c in region.iter() {
            let v = f(c);
            for a in 0..3 {
                u[a].push(v[a] as f32);
            }
        }
        Self { dims, region, u }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn region(&self) -> Region {
        self.region
    }

    #[inline]
    pub fn at(&self, c: grid::Coord) -> [f64; 3] {
        if !self.region.contains(c) {
            return [0.0; 3];
        }
        let e = self.region.extent();
        let l = (c[0] - self.region.lo[0]) + e[0] * ((c[1] - self.region.lo[1]) + e[1] * (c[2] - self.region.lo[2]));
        [self.u[0][l] as f64, self.u[1][l] as f64, self.u[2][l] as f64]
    }

    pub fn max_magnitude(&self) -> f64 {
        (0..self.u[0].len())
            .map(|l| {
                let (x, y, z) = (self.u[0][l] as f64, self.u[1][l] as f64, self.u[2][l] as f64);
                (x * x + y * y + z * z).sqrt()
            })
            .fold(0.0, f64::max)
    }

    /// Largest |du_a/dx_a| over forward differences, including the step
    /// across the stored region's border.
    pub fn max_axial_gradient(&self) -> f64 {
        let probe = self.region.expand(1, self.dims);
        let mut worst: f64 = 0.0;
        for c in probe.iter() {
            let here = self.at(c);
            for a in 0..3 {
                let mut n = c;
                n[a] += 1;
                if n[a] >= self.dims[a] {
                    continue;
                }
                worst = worst.max((self.at(n)[a] - here[a]).abs());
            }
        }
        worst
    }
}

/// Density-weighted centroid in voxel coordinates.
pub fn tumor_centroid(tumor: &TumorMap) -> Option<[f64; 3]> {
    let region = tumor.region()?;
    let dims = tumor.dims();
    let mut acc = [0.0f64; 3];
    let mut w = 0.0;
    for c in region.iter() {
        let d = tumor.density_at(grid::index(dims, c)) as f64;
        if d > 0.0 {
            for a in 0..3 {
                acc[a] += d * c[a] as f64;
            }
            w += d;
        }
    }
    Some(acc.map(|v| v / w))
}

/// Radial push field for the tumor.
pub fn mass_effect_field(tumor: &TumorMap, masks: &MaskSet, params: &MassEffectParams) -> Result<DisplacementField> {
    params.validate()?;
    if tumor.dims() != masks.dims() {
        return Err(Error::DimensionMismatch(format!(
            "tumor {:?} vs masks {:?}",
            tumor.dims(),
            masks.dims()
        )));
    }
    let dims = tumor.dims();
    let centroid = tumor_centroid(tumor).ok_or(Error::EmptyTumor)?;
    let n = tumor.tumor_voxels() as f64;
    let radius = (3.0 * n / (4.0 * std::f64::consts::PI)).cbrt();
    // large lesions push at least one radius beyond their surface
    let r_influence = params.r_influence.max(2.0 * radius);
    let profile = RadialProfile { radius, r_influence };
    let gate = smoothstep(params.size_gate_mm[0], params.size_gate_mm[1], tumor.equivalent_radius_mm());
    let amplitude = (params.strength * params.d_max * gate).min(FOLD_MARGIN / profile.max_rate());
    if amplitude <= 0.0 {
        return Ok(DisplacementField::zero(dims));
    }

    let reach = r_influence.ceil() as i64;
    let mut lo = [0usize; 3];
    let mut hi = [0usize; 3];
    for a in 0..3 {
        let c = centroid[a].round() as i64;
        lo[a] = (c - reach).clamp(0, dims[a] as i64 - 1) as usize;
        hi[a] = (c + reach).clamp(0, dims[a] as i64 - 1) as usize;
    }
    let region = Region { lo, hi };
    Ok(DisplacementField::from_fn(dims, region, |c| {
        let d = [
            c[0] as f64 - centroid[0],
            c[1] as f64 - centroid[1],
            c[2] as f64 - centroid[2],
        ];
        let r = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
        if r == 0.0 {
            return [0.0; 3];
        }
        let s = amplitude * profile.g(r) / r;
        [s * d[0], s * d[1], s * d[2]]
    }))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    /// For label volumes: output values always come from the input set.
    Nearest,
    /// For intensity volumes.
    Trilinear,
}

/// Backward warp: `out(x) = in(x - u(x))`, sampling positions clamped to
/// the grid edge. Voxels outside the field's stored region are copied.
pub fn warp<T: Voxel>(vol: &Volume<T>, field: &DisplacementField, interp: Interpolation) -> Result<Volume<T>> {
    let dims = vol.dims();
    if dims != field.dims() {
        return Err(Error::DimensionMismatch(format!(
            "volume {:?} vs field {:?}",
            dims,
            field.dims()
        )));
    }
    let src = vol.data();
    let mut out = src.to_vec();
    let maxc = [dims[0] - 1, dims[1] - 1, dims[2] - 1].map(|v| v as f64);
    for c in field.region().iter() {
        let u = field.at(c);
        if u == [0.0; 3] {
            continue;
        }
        let p = [0, 1, 2].map(|a| (c[a] as f64 - u[a]).clamp(0.0, maxc[a]));
        out[grid::index(dims, c)] = match interp {
            Interpolation::Nearest => {
                let q = p.map(|v| v.round() as usize);
                src[grid::index(dims, q)]
            }
            Interpolation::Trilinear => T::from_f64(trilinear(src, dims, p)),
        };
    }
    vol.with_data(out)
}

fn trilinear<T: Voxel>(src: &[T], dims: Dims, p: [f64; 3]) -> f64 {
    let i0 = p.map(|v| v.floor() as usize);
    let f = [p[0] - i0[0] as f64, p[1] - i0[1] as f64, p[2] - i0[2] as f64];
    let i1 = [0, 1, 2].map(|a| (i0[a] + 1).min(dims[a] - 1));
    let mut acc = 0.0;
    for corner in 0..8 {
        let pick = |a: usize| corner >> a & 1 == 1;
        let mut w = 1.0;
        let mut q = [0usize; 3];
        for a in 0..3 {
            if pick(a) {
                w *= f[a];
                q[a] = i1[a];
            } else {
                w *= 1.0 - f[a];
                q[a] = i0[a];
            }
        }
        if w != 0.0 {
            acc += w * src[grid::index(dims, q)].to_f64();
        }
    }
    acc
}
