use serde::{Deserialize, Serialize};

use crate::distance::squared_edt;
use crate::error::{Error, Result};
use crate::grid;
use crate::volume_io::{derive_boundary, LabelVolume};

/// Above this many boundary voxels (per mask) NSD switches from pairwise
/// distances to a distance transform.
pub const BRUTE_FORCE_LIMIT: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfaceTolerance {
    pub tau_mm: f64,
}

impl Default for SurfaceTolerance {
    fn default() -> Self {
        Self { tau_mm: 2.0 }
    }
}

impl SurfaceTolerance {
    pub fn new(tau_mm: f64) -> Result<Self> {
        if tau_mm >= 0.0 && tau_mm.is_finite() {
            Ok(Self { tau_mm })
        } else {
            Err(Error::InvalidParameter(format!("tolerance {tau_mm} must be >= 0")))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SurfaceDistanceMethod {
    Auto,
    BruteForce,
    DistanceTransform,
}

fn check_pair(a: &LabelVolume, b: &LabelVolume) -> Result<()> {
    a.ensure_same_grid(b, "mask pair")?;
    a.ensure_binary()?;
    b.ensure_binary()
}

/// Dice similarity `2|A∩B| / (|A|+|B|)`; 1 when both masks are empty.
pub fn dsc(a: &LabelVolume, b: &LabelVolume) -> Result<f64> {
    check_pair(a, b)?;
    let (mut inter, mut na, mut nb) = (0usize, 0usize, 0usize);
    for (&x, &y) in a.data().iter().zip(b.data()) {
        let (x, y) = (x != 0, y != 0);
        na += x as usize;
        nb += y as usize;
        inter += (x && y) as usize;
    }
    if na + nb == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * inter as f64 / (na + nb) as f64)
}

/// Normalized surface distance at tolerance `tol`, using the voxel spacing
/// of the masks.
pub fn nsd(a: &LabelVolume, b: &LabelVolume, tol: SurfaceTolerance) -> Result<f64> {
    nsd_with(a, b, tol, SurfaceDistanceMethod::Auto)
}

pub fn nsd_with(a: &LabelVolume, b: &LabelVolume, tol: SurfaceTolerance, method: SurfaceDistanceMethod) -> Result<f64> {
    check_pair(a, b)?;
    let ba = surface_points(&derive_boundary(a)?);
    let bb = surface_points(&derive_boundary(b)?);
    match (ba.is_empty(), bb.is_empty()) {
        (true, true) => return Ok(1.0),
        (true, false) | (false, true) => return Ok(0.0),
        _ => {}
    }
    let method = match method {
        SurfaceDistanceMethod::Auto if ba.len().max(bb.len()) <= BRUTE_FORCE_LIMIT => SurfaceDistanceMethod::BruteForce,
        SurfaceDistanceMethod::Auto => SurfaceDistanceMethod::DistanceTransform,
        m => m,
    };
    let dims = a.dims();
    let spacing = a.spacing_f64();
    let tau2 = tol.tau_mm * tol.tau_mm;
    let (hit_a, hit_b) = match method {
        SurfaceDistanceMethod::BruteForce => (
            count_within_brute(&ba, &bb, dims, spacing, tau2),
            count_within_brute(&bb, &ba, dims, spacing, tau2),
        ),
        _ => (
            count_within_edt(&ba, &bb, dims, spacing, tau2),
            count_within_edt(&bb, &ba, dims, spacing, tau2),
        ),
    };
    Ok((hit_a + hit_b) as f64 / (ba.len() + bb.len()) as f64)
}

fn surface_points(boundary: &LabelVolume) -> Vec<usize> {
    boundary
        .data()
        .iter()
        .enumerate()
        .filter(|(_, &v)| v != 0)
        .map(|(i, _)| i)
        .collect()
}

fn sq_dist(dims: grid::Dims, spacing: [f64; 3], i: usize, j: usize) -> f64 {
    let (p, q) = (grid::coords(dims, i), grid::coords(dims, j));
    let mut s = 0.0;
    for a in 0..3 {
        let d = (p[a] as f64 - q[a] as f64) * spacing[a];
        s += d * d;
    }
    s
}

/// Points of `from` whose nearest point in `to` lies within `sqrt(tau2)`.
fn count_within_brute(from: &[usize], to: &[usize], dims: grid::Dims, spacing: [f64; 3], tau2: f64) -> usize {
    from.iter()
        .filter(|&&i| to.iter().any(|&j| sq_dist(dims, spacing, i, j) <= tau2))
        .count()
}

fn count_within_edt(from: &[usize], to: &[usize], dims: grid::Dims, spacing: [f64; 3], tau2: f64) -> usize {
    let mut is_target = vec![false; grid::voxel_count(dims)];
    for &j in to {
        is_target[j] = true;
    }
    let d2 = squared_edt(dims, spacing, |i| is_target[i]);
    from.iter().filter(|&&i| d2[i] <= tau2).count()
}
