//! Organ map (quantized tissue levels) and tumor map (cell population state).

use crate::error::{Error, Result};
use crate::grid::{self, Coord, Dims, Region};
use crate::volume_io::{HuVolume, LabelVolume, MaskSet, Volume, HU_MIN};

pub const DEFAULT_LEVELS: u8 = 4;
pub const MAX_DENSITY: u8 = 10;

/// Per-voxel tissue level: 0 outside the organ or on vessels, `1..=L` on
/// parenchyma, higher levels for brighter (by quantile) tissue.
#[derive(Clone, Debug, PartialEq)]
pub struct OrganMap {
    levels: LabelVolume,
    level_count: u8,
    thresholds: Vec<i16>,
}

impl OrganMap {
    /// Builds a map directly from level values, for callers that quantize
    /// by other means.
    pub fn from_levels(levels: LabelVolume, level_count: u8) -> Result<Self> {
        if let Some(&bad) = levels.data().iter().find(|&&l| l > level_count) {
            return Err(Error::InvalidParameter(format!(
                "level {bad} exceeds level count {level_count}"
            )));
        }
        Ok(Self {
            levels,
            level_count,
            thresholds: Vec::new(),
        })
    }

    pub fn levels(&self) -> &LabelVolume {
        &self.levels
    }

    pub fn level_count(&self) -> u8 {
        self.level_count
    }

    pub fn thresholds(&self) -> &[i16] {
        &self.thresholds
    }

    pub fn dims(&self) -> Dims {
        self.levels.dims()
    }

    #[inline]
    pub fn level(&self, idx: usize) -> u8 {
        self.levels.data()[idx]
    }

    /// Number of voxels with level >= 1.
    pub fn tissue_voxels(&self) -> usize {
        self.levels.count_nonzero()
    }
}

/// Quantizes parenchyma HU into `level_count` quantile bins.
///
/// Threshold `k` is the lower `k/L` quantile of parenchyma HU; a voxel's
/// level is one plus the number of thresholds strictly below its HU. An
/// organ of constant intensity maps entirely to level `L`.
pub fn build_organ_map(ct: &HuVolume, masks: &MaskSet, level_count: u8) -> Result<OrganMap> {
    if !(2..=8).contains(&level_count) {
        return Err(Error::InvalidParameter(format!(
            "level count {level_count} outside [2, 8]"
        )));
    }
    ct.ensure_same_grid(masks.organ(), "CT vs organ mask")?;

    // counting sort over the HU range
    let mut hist = vec![0usize; 4096];
    let mut n = 0usize;
    for (i, &hu) in ct.data().iter().enumerate() {
        if masks.is_parenchyma(i) {
            hist[(hu - HU_MIN) as usize] += 1;
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::EmptyOrgan);
    }

    let l = level_count as usize;
    let degenerate = hist.iter().filter(|&&c| c > 0).count() == 1;
    let thresholds: Vec<i16> = (1..l)
        .map(|k| {
            let rank = (k * n).div_ceil(l) - 1;
            let mut seen = 0;
            for (b, &c) in hist.iter().enumerate() {
                seen += c;
                if seen > rank {
                    return b as i16 + HU_MIN;
                }
            }
            unreachable!("rank < n")
        })
        .collect();

    let levels: Vec<u8> = ct
        .data()
        .iter()
        .enumerate()
        .map(|(i, &hu)| {
            if !masks.is_parenchyma(i) {
                0
            } else if degenerate {
                level_count
            } else {
                1 + thresholds.partition_point(|&t| t < hu) as u8
            }
        })
        .collect();

    Ok(OrganMap {
        levels: ct.with_data(levels)?,
        level_count,
        thresholds,
    })
}

#[repr(u8)]
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Phase {
    Empty = 0,
    Active = 1,
    Quiescent = 2,
    Necrotic = 3,
}

impl Phase {
    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Phase::Empty),
            1 => Some(Phase::Active),
            2 => Some(Phase::Quiescent),
            3 => Some(Phase::Necrotic),
            _ => None,
        }
    }
}

/// Tumor cell population per voxel (0..=10) and its phase.
#[derive(Clone, Debug, PartialEq)]
pub struct TumorMap {
    pub(crate) density: LabelVolume,
    pub(crate) phase: LabelVolume,
}

impl TumorMap {
    pub fn empty(dims: Dims, spacing: [f32; 3]) -> Result<Self> {
        Ok(Self {
            density: Volume::filled(dims, spacing, 0)?,
            phase: Volume::filled(dims, spacing, Phase::Empty as u8)?,
        })
    }

    pub fn from_parts(density: LabelVolume, phase: LabelVolume) -> Result<Self> {
        density.ensure_same_grid(&phase, "density vs phase")?;
        let map = Self { density, phase };
        map.check_invariants().map_err(Error::InvalidParameter)?;
        Ok(map)
    }

    /// Saturated tumor covering a binary mask. Phases: Active on voxels with
    /// a non-tumor face neighbor inside the grid, Quiescent elsewhere.
    pub fn saturated_from_mask(mask: &LabelVolume) -> Result<Self> {
        mask.ensure_binary()?;
        let dims = mask.dims();
        let m = mask.data();
        let density: Vec<u8> = m.iter().map(|&v| v * MAX_DENSITY).collect();
        let phase: Vec<u8> = (0..m.len())
            .map(|i| {
                if m[i] == 0 {
                    return Phase::Empty as u8;
                }
                let c = grid::coords(dims, i);
                let exposed = (0..6).any(|d| grid::neighbor(dims, c, d).is_some_and(|n| m[n] == 0));
                if exposed {
                    Phase::Active as u8
                } else {
                    Phase::Quiescent as u8
                }
            })
            .collect();
        Ok(Self {
            density: mask.with_data(density)?,
            phase: mask.with_data(phase)?,
        })
    }

    pub fn density(&self) -> &LabelVolume {
        &self.density
    }

    pub fn phase(&self) -> &LabelVolume {
        &self.phase
    }

    pub fn dims(&self) -> Dims {
        self.density.dims()
    }

    pub fn spacing(&self) -> [f32; 3] {
        self.density.spacing()
    }

    #[inline]
    pub fn density_at(&self, idx: usize) -> u8 {
        self.density.data()[idx]
    }

    #[inline]
    pub fn phase_at(&self, idx: usize) -> Phase {
        Phase::from_code(self.phase.data()[idx]).unwrap_or(Phase::Empty)
    }

    pub fn tumor_voxels(&self) -> usize {
        self.density.count_nonzero()
    }

    pub fn is_empty(&self) -> bool {
        self.tumor_voxels() == 0
    }

    pub fn volume_mm3(&self) -> f64 {
        self.tumor_voxels() as f64 * self.density.voxel_volume_mm3()
    }

    /// Radius of the sphere with the tumor's volume, in mm.
    pub fn equivalent_radius_mm(&self) -> f64 {
        (3.0 * self.volume_mm3() / (4.0 * std::f64::consts::PI)).cbrt()
    }

    /// Binary tumor mask: 1 where density >= 1.
    pub fn mask(&self) -> LabelVolume {
        let data = self.density.data().iter().map(|&d| (d > 0) as u8).collect();
        self.density.with_data(data).expect("same grid")
    }

    pub fn region(&self) -> Option<Region> {
        grid::bounding_region(self.dims(), self.density.data(), |&d| d > 0)
    }

    /// Checks density bounds and the phase/density coupling.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        for (i, (&d, &p)) in self.density.data().iter().zip(self.phase.data()).enumerate() {
            let phase = Phase::from_code(p).ok_or_else(|| format!("voxel {i}: bad phase code {p}"))?;
            if d > MAX_DENSITY {
                return Err(format!("voxel {i}: density {d} > {MAX_DENSITY}"));
            }
            if (phase == Phase::Empty) != (d == 0) {
                return Err(format!("voxel {i}: phase {phase:?} with density {d}"));
            }
            if phase == Phase::Necrotic && d != MAX_DENSITY {
                return Err(format!("voxel {i}: necrotic with density {d}"));
            }
        }
        Ok(())
    }
}

/// A tumor map with a single Active cell of density 1 at `seed`.
pub fn init_tumor_map(organ: &OrganMap, seed: Coord) -> Result<TumorMap> {
    let dims = organ.dims();
    if (0..3).any(|a| seed[a] >= dims[a]) {
        return Err(Error::SeedOutsideOrgan(seed));
    }
    let idx = grid::index(dims, seed);
    if organ.level(idx) == 0 {
        return Err(Error::SeedOutsideOrgan(seed));
    }
    let mut map = TumorMap::empty(dims, organ.levels().spacing())?;
    map.density.data_mut()[idx] = 1;
    map.phase.data_mut()[idx] = Phase::Active as u8;
    Ok(map)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn line_case(hu: Vec<i16>, organ: Vec<u8>, vessels: Option<Vec<u8>>) -> (HuVolume, MaskSet) {
        let dims = [hu.len(), 1, 1];
        let ct = HuVolume::new(dims, [1.0; 3], hu).unwrap();
        let organ = LabelVolume::new(dims, [1.0; 3], organ).unwrap();
        let vessels = vessels.map(|v| LabelVolume::new(dims, [1.0; 3], v).unwrap());
        (ct, MaskSet::new(organ, vessels).unwrap())
    }

    #[test]
    fn four_values_four_levels() {
        let (ct, masks) = line_case(vec![40, 60, 80, 100], vec![1; 4], None);
        let map = build_organ_map(&ct, &masks, 4).unwrap();
        assert_eq!(map.levels().data(), &[1, 2, 3, 4]);
        assert_eq!(map.thresholds(), &[40, 60, 80]);
    }

    #[test]
    fn constant_organ_maps_to_top_level() {
        let (ct, masks) = line_case(vec![70; 6], vec![1, 1, 1, 1, 1, 0], None);
        let map = build_organ_map(&ct, &masks, 4).unwrap();
        assert_eq!(map.levels().data(), &[4, 4, 4, 4, 4, 0]);
        assert!(map.thresholds().iter().all(|&t| t == 70));
    }

    #[test]
    fn vessels_get_level_zero() {
        let (ct, masks) = line_case(
            vec![10, 20, 30, 40, 50],
            vec![1; 5],
            Some(vec![0, 0, 1, 0, 0]),
        );
        let map = build_organ_map(&ct, &masks, 2).unwrap();
        assert_eq!(map.level(2), 0);
        assert_eq!(map.levels().data(), &[1, 1, 0, 2, 2]);
    }

    #[test]
    fn empty_organ_is_an_error() {
        let (ct, masks) = line_case(vec![1, 2], vec![0, 0], None);
        assert!(matches!(build_organ_map(&ct, &masks, 4), Err(Error::EmptyOrgan)));
        let (ct, masks) = line_case(vec![1, 2], vec![1, 0], Some(vec![1, 0]));
        assert!(matches!(build_organ_map(&ct, &masks, 4), Err(Error::EmptyOrgan)));
    }

    #[test]
    fn level_count_validated() {
        let (ct, masks) = line_case(vec![1, 2], vec![1, 1], None);
        assert!(build_organ_map(&ct, &masks, 1).is_err());
        assert!(build_organ_map(&ct, &masks, 9).is_err());
    }

    #[test]
    fn init_places_one_active_cell() {
        let (ct, masks) = line_case(vec![50; 5], vec![0, 1, 1, 1, 0], None);
        let map = build_organ_map(&ct, &masks, 4).unwrap();
        let t = init_tumor_map(&map, [2, 0, 0]).unwrap();
        assert_eq!(t.tumor_voxels(), 1);
        assert_eq!(t.density().data().iter().map(|&d| d as u32).sum::<u32>(), 1);
        assert_eq!(t.phase_at(2), Phase::Active);
        t.check_invariants().unwrap();
        assert!(matches!(
            init_tumor_map(&map, [0, 0, 0]),
            Err(Error::SeedOutsideOrgan([0, 0, 0]))
        ));
        assert!(init_tumor_map(&map, [9, 0, 0]).is_err());
    }

    #[test]
    fn init_in_cube_center() {
        let dims = [5, 5, 5];
        let levels = LabelVolume::filled(dims, [1.0; 3], 2).unwrap();
        let map = OrganMap::from_levels(levels, 4).unwrap();
        let t = init_tumor_map(&map, [2, 2, 2]).unwrap();
        assert_eq!(t.tumor_voxels(), 1);
        assert_eq!(t.density_at(grid::index(dims, [2, 2, 2])), 1);
    }

    #[test]
    fn saturated_mask_phases() {
        let dims = [3, 3, 3];
        let mask = LabelVolume::filled(dims, [1.0; 3], 1).unwrap();
        let t = TumorMap::saturated_from_mask(&mask).unwrap();
        t.check_invariants().unwrap();
        // grid edges are not exposed faces, so every voxel is Quiescent
        assert!((0..27).all(|i| t.phase_at(i) == Phase::Quiescent));
    }

    proptest! {
        #[test]
        fn raising_hu_never_lowers_level(
            hu in prop::collection::vec(-200i16..300, 2..60),
            pick in any::<prop::sample::Index>(),
            bump in 1i16..200,
            l in 2u8..=8,
        ) {
            let n = hu.len();
            let (ct, masks) = line_case(hu.clone(), vec![1; n], None);
            prop_assume!(hu.iter().any(|&v| v != hu[0]));
            let before = build_organ_map(&ct, &masks, l).unwrap();
            let i = pick.index(n);
            let mut raised = hu.clone();
            raised[i] += bump;
            let (ct2, masks2) = line_case(raised, vec![1; n], None);
            let after = build_organ_map(&ct2, &masks2, l).unwrap();
            prop_assert!(after.level(i) >= before.level(i));
            prop_assert!(after.thresholds().windows(2).all(|w| w[0] <= w[1]));
        }

        #[test]
        fn levels_balanced_within_ties(
            hu in prop::collection::vec(-100i16..100, 1..200),
            l in 2u8..=8,
        ) {
            let n = hu.len();
            let (ct, masks) = line_case(hu.clone(), vec![1; n], None);
            let map = build_organ_map(&ct, &masks, l).unwrap();
            let ties = hu.iter().filter(|v| map.thresholds().contains(v)).count();
            let degenerate = hu.iter().all(|&v| v == hu[0]);
            for level in 1..=l {
                let count = map.levels().data().iter().filter(|&&x| x == level).count();
                if degenerate {
                    continue;
                }
                let lo = (n / l as usize).saturating_sub(ties);
                let hi = n.div_ceil(l as usize) + ties;
                prop_assert!(count >= lo && count <= hi, "level {} count {} not in [{}, {}]", level, count, lo, hi);
            }
        }
    }
}
