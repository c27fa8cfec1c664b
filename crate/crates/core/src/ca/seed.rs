use crate::distance::squared_edt;
use crate::error::{Error, Result};
use crate::grid::{self, Coord};
use crate::quantize::OrganMap;
use crate::rng::Stream;
use crate::volume_io::MaskSet;

/// Candidate seed voxels: tissue (level >= 1) at least `min_margin_voxels`
/// (Euclidean, voxel units) away from every organ-boundary and vessel voxel.
#[derive(Clone, Debug)]
pub struct SeedSampler {
    dims: grid::Dims,
    candidates: Vec<u32>,
}

impl SeedSampler {
    pub fn new(masks: &MaskSet, organ: &OrganMap, min_margin_voxels: f64) -> Result<Self> {
        let dims = organ.dims();
        if masks.dims() != dims {
            return Err(Error::DimensionMismatch(format!(
                "masks {:?} vs organ map {:?}",
                masks.dims(),
                dims
            )));
        }
        let margin2 = min_margin_voxels.max(0.0).powi(2);
        let dist2 = if min_margin_voxels > 0.0 {
            let boundary = masks.boundary().data();
            Some(squared_edt(dims, [1.0; 3], |i| boundary[i] != 0 || masks.is_vessel(i)))
        } else {
            None
        };
        let candidates: Vec<u32> = (0..grid::voxel_count(dims))
            .filter(|&i| organ.level(i) >= 1 && dist2.as_ref().is_none_or(|d| d[i] >= margin2))
            .map(|i| i as u32)
            .collect();
        if candidates.is_empty() {
            return Err(Error::NoEligibleSeed(min_margin_voxels));
        }
        Ok(Self { dims, candidates })
    }

    pub fn candidates(&self) -> usize {
        self.candidates.len()
    }

    /// Uniform draw over the candidate set.
    pub fn sample(&self, stream: &mut Stream) -> Coord {
        let k = stream.below(self.candidates.len() as u64) as usize;
        grid::coords(self.dims, self.candidates[k] as usize)
    }
}

/// Draws one seed voxel uniformly from the eligible set.
pub fn sample_seed(masks: &MaskSet, organ: &OrganMap, stream: &mut Stream, min_margin_voxels: f64) -> Result<Coord> {
    Ok(SeedSampler::new(masks, organ, min_margin_voxels)?.sample(stream))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantize::build_organ_map;
    use crate::volume_io::{HuVolume, LabelVolume};

    fn ball_case(n: usize, r: f64) -> (MaskSet, OrganMap) {
        let dims = [n, n, n];
        let c = (n as f64 - 1.0) / 2.0;
        let organ: Vec<u8> = (0..grid::voxel_count(dims))
            .map(|i| {
                let p = grid::coords(dims, i);
                let d2: f64 = p.iter().map(|&v| (v as f64 - c).powi(2)).sum();
                (d2 <= r * r) as u8
            })
            .collect();
        let masks = MaskSet::new(LabelVolume::new(dims, [1.0; 3], organ).unwrap(), None).unwrap();
        let ct = HuVolume::filled(dims, [1.0; 3], 60).unwrap();
        let map = build_organ_map(&ct, &masks, 4).unwrap();
        (masks, map)
    }

    #[test]
    fn single_voxel_organ_is_forced() {
        let dims = [3, 3, 3];
        let mut organ = LabelVolume::filled(dims, [1.0; 3], 0).unwrap();
        organ.set([1, 2, 0], 1);
        let masks = MaskSet::new(organ, None).unwrap();
        let ct = HuVolume::filled(dims, [1.0; 3], 60).unwrap();
        let map = build_organ_map(&ct, &masks, 4).unwrap();
        let mut s = Stream::new(1);
        assert_eq!(sample_seed(&masks, &map, &mut s, 0.0).unwrap(), [1, 2, 0]);
    }

    #[test]
    fn oversized_margin_has_no_candidates() {
        let (masks, map) = ball_case(11, 4.0);
        let mut s = Stream::new(1);
        assert!(matches!(
            sample_seed(&masks, &map, &mut s, 6.0),
            Err(Error::NoEligibleSeed(_))
        ));
    }

    #[test]
    fn margin_keeps_seeds_interior() {
        let (masks, map) = ball_case(15, 6.0);
        let sampler = SeedSampler::new(&masks, &map, 3.0).unwrap();
        let mut s = Stream::new(9);
        for _ in 0..200 {
            let c = sampler.sample(&mut s);
            let d2: f64 = c.iter().map(|&v| (v as f64 - 7.0).powi(2)).sum();
            assert!(d2.sqrt() <= 3.0 + 1e-9, "{c:?}");
        }
    }

    #[test]
    fn draws_are_uniform_over_candidates() {
        // 3x3x3 cube inside a 5^3 grid: 27 equally likely voxels
        let dims = [5, 5, 5];
        let mut organ = LabelVolume::filled(dims, [1.0; 3], 0).unwrap();
        for c in (grid::Region { lo: [1; 3], hi: [3; 3] }).iter() {
            organ.set(c, 1);
        }
        let masks = MaskSet::new(organ, None).unwrap();
        let ct = HuVolume::filled(dims, [1.0; 3], 60).unwrap();
        let map = build_organ_map(&ct, &masks, 4).unwrap();
        let sampler = SeedSampler::new(&masks, &map, 0.0).unwrap();
        let mut counts = std::collections::HashMap::new();
        let mut s = Stream::new(2024);
        let draws = 1000;
        for _ in 0..draws {
            *counts.entry(sampler.sample(&mut s)).or_insert(0usize) += 1;
        }
        assert_eq!(counts.len(), 27);
        let p = 1.0 / 27.0;
        let mean = draws as f64 * p;
        let sd = (draws as f64 * p * (1.0 - p)).sqrt();
        for (c, &k) in &counts {
            assert!((k as f64 - mean).abs() <= 4.0 * sd, "{c:?}: {k}");
        }
    }
}
