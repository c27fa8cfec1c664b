//! Volumes, mask sets, and their on-disk formats.
//!
//! Two containers are supported: RVOL, a small little-endian format that
//! round-trips byte for byte, and uncompressed single-file NIfTI-1 (read only).

mod nifti;
mod rvol;

use std::fmt::Debug;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{self, Coord, Dims};

pub use nifti::read_nifti;
pub use rvol::{read_rvol, write_rvol, RVOL_HEADER_LEN, RVOL_MAGIC};

pub const HU_MIN: i16 = -1024;
pub const HU_MAX: i16 = 3071;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VolumeKind {
    HuInt16,
    LabelU8,
}

impl VolumeKind {
    pub fn code(self) -> u8 {
        match self {
            VolumeKind::HuInt16 => 0,
            VolumeKind::LabelU8 => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(VolumeKind::HuInt16),
            1 => Some(VolumeKind::LabelU8),
            _ => None,
        }
    }

    pub fn bytes_per_voxel(self) -> usize {
        match self {
            VolumeKind::HuInt16 => 2,
            VolumeKind::LabelU8 => 1,
        }
    }
}

mod sealed {
    pub trait Sealed {}
    impl Sealed for i16 {}
    impl Sealed for u8 {}
}

/// Scalar types a [`Volume`] can hold.
pub trait Voxel: sealed::Sealed + Copy + Default + PartialEq + Debug + Send + Sync + 'static {
    const KIND: VolumeKind;
    fn in_range(self) -> bool;
    fn as_i64(self) -> i64;
    fn to_f64(self) -> f64;
    /// Rounds to nearest and clamps into the type's valid range.
    fn from_f64(v: f64) -> Self;
    fn write_le(self, out: &mut Vec<u8>);
    fn read_le(bytes: &[u8]) -> Self;
}

impl Voxel for i16 {
    const KIND: VolumeKind = VolumeKind::HuInt16;

    fn in_range(self) -> bool {
        (HU_MIN..=HU_MAX).contains(&self)
    }

    fn as_i64(self) -> i64 {
        self as i64
    }

    fn to_f64(self) -> f64 {
        self as f64
    }

    fn from_f64(v: f64) -> Self {
        v.round().clamp(HU_MIN as f64, HU_MAX as f64) as i16
    }

    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }

    fn read_le(bytes: &[u8]) -> Self {
        i16::from_le_bytes([bytes[0], bytes[1]])
    }
}

impl Voxel for u8 {
    const KIND: VolumeKind = VolumeKind::LabelU8;

    fn in_range(self) -> bool {
        true
    }

    fn as_i64(self) -> i64 {
        self as i64
    }

    fn to_f64(self) -> f64 {
        self as f64
    }

    fn from_f64(v: f64) -> Self {
        v.round().clamp(0.0, 255.0) as u8
    }

    fn write_le(self, out: &mut Vec<u8>) {
        out.push(self);
    }

    fn read_le(bytes: &[u8]) -> Self {
        bytes[0]
    }
}

/// Dense 3D scalar grid with physical spacing (mm), stored x-fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct Volume<T> {
    dims: Dims,
    spacing: [f32; 3],
    data: Vec<T>,
}

pub type HuVolume = Volume<i16>;
pub type LabelVolume = Volume<u8>;

impl<T: Voxel> Volume<T> {
    pub fn new(dims: Dims, spacing: [f32; 3], data: Vec<T>) -> Result<Self> {
        validate_geometry(dims, spacing)?;
        if data.len() != grid::voxel_count(dims) {
            return Err(Error::DimensionMismatch(format!(
                "dims {dims:?} need {} voxels, got {}",
                grid::voxel_count(dims),
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !v.in_range()) {
            return Err(Error::ValueOutOfRange {
                kind: kind_name(T::KIND),
                value: v.as_i64(),
            });
        }
        Ok(Self {
            dims,
            spacing,
            data,
        })
    }

    pub fn filled(dims: Dims, spacing: [f32; 3], value: T) -> Result<Self> {
        Self::new(dims, spacing, vec![value; grid::voxel_count(dims)])
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn spacing(&self) -> [f32; 3] {
        self.spacing
    }

    pub fn spacing_f64(&self) -> [f64; 3] {
        self.spacing.map(f64::from)
    }

    pub fn voxel_volume_mm3(&self) -> f64 {
        let s = self.spacing_f64();
        s[0] * s[1] * s[2]
    }

    pub fn kind(&self) -> VolumeKind {
        T::KIND
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    /// Mutable voxel access. Callers are responsible for keeping HU values
    /// inside `[HU_MIN, HU_MAX]`.
    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn index(&self, c: Coord) -> usize {
        grid::index(self.dims, c)
    }

    pub fn get(&self, c: Coord) -> T {
        self.data[grid::index(self.dims, c)]
    }

    pub fn set(&mut self, c: Coord, v: T) {
        let i = grid::index(self.dims, c);
        self.data[i] = v;
    }

    pub fn same_grid<U>(&self, other: &Volume<U>) -> bool {
        self.dims == other.dims && self.spacing == other.spacing
    }

    pub fn ensure_same_grid<U>(&self, other: &Volume<U>, what: &str) -> Result<()> {
        if self.same_grid(other) {
            Ok(())
        } else {
            Err(Error::DimensionMismatch(format!(
                "{what}: {:?}@{:?} vs {:?}@{:?}",
                self.dims, self.spacing, other.dims, other.spacing
            )))
        }
    }

    /// Same grid, new contents.
    pub fn with_data<U: Voxel>(&self, data: Vec<U>) -> Result<Volume<U>> {
        Volume::new(self.dims, self.spacing, data)
    }
}

impl LabelVolume {
    /// Fails with `NonBinaryMask` on any value other than 0 or 1.
    pub fn ensure_binary(&self) -> Result<()> {
        match self.data.iter().find(|&&v| v > 1) {
            Some(&v) => Err(Error::NonBinaryMask(v)),
            None => Ok(()),
        }
    }

    pub fn count_nonzero(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0).count()
    }
}

fn kind_name(kind: VolumeKind) -> &'static str {
    match kind {
        VolumeKind::HuInt16 => "HU_INT16",
        VolumeKind::LabelU8 => "LABEL_U8",
    }
}

pub(crate) fn validate_geometry(dims: Dims, spacing: [f32; 3]) -> Result<()> {
    if dims.contains(&0) {
        return Err(Error::MalformedHeader(format!("zero extent in dims {dims:?}")));
    }
    if spacing.iter().any(|&s| !(s.is_finite() && s > 0.0)) {
        return Err(Error::MalformedHeader(format!("non-positive spacing {spacing:?}")));
    }
    Ok(())
}

/// A volume of either kind, as read from disk.
#[derive(Clone, Debug, PartialEq)]
pub enum AnyVolume {
    Hu(HuVolume),
    Label(LabelVolume),
}

impl AnyVolume {
    pub fn kind(&self) -> VolumeKind {
        match self {
            AnyVolume::Hu(_) => VolumeKind::HuInt16,
            AnyVolume::Label(_) => VolumeKind::LabelU8,
        }
    }

    pub fn dims(&self) -> Dims {
        match self {
            AnyVolume::Hu(v) => v.dims(),
            AnyVolume::Label(v) => v.dims(),
        }
    }

    pub fn into_hu(self) -> Result<HuVolume> {
        match self {
            AnyVolume::Hu(v) => Ok(v),
            AnyVolume::Label(v) => {
                let data = v.data.iter().map(|&x| x as i16).collect();
                Volume::new(v.dims, v.spacing, data)
            }
        }
    }

    /// Converts to a label volume; HU volumes convert only when every value
    /// fits in `0..=255`.
    pub fn into_label(self) -> Result<LabelVolume> {
        match self {
            AnyVolume::Label(v) => Ok(v),
            AnyVolume::Hu(v) => {
                if let Some(&bad) = v.data.iter().find(|&&x| !(0..=255).contains(&x)) {
                    return Err(Error::ValueOutOfRange {
                        kind: "LABEL_U8",
                        value: bad as i64,
                    });
                }
                let data = v.data.iter().map(|&x| x as u8).collect();
                Volume::new(v.dims, v.spacing, data)
            }
        }
    }
}

/// Loads an RVOL or NIfTI-1 file, sniffing the format from its first bytes.
pub fn load_volume(path: impl AsRef<Path>) -> Result<AnyVolume> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(RVOL_MAGIC) {
        read_rvol(&bytes)
    } else {
        read_nifti(&bytes)
    }
}

pub fn save_volume<T: Voxel>(v: &Volume<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, write_rvol(v)).map_err(|e| Error::io(path, e))
}

/// Voxels of a binary mask that have at least one 6-neighbor equal to 0.
/// Out-of-grid neighbors count as 0.
pub fn derive_boundary(mask: &LabelVolume) -> Result<LabelVolume> {
    mask.ensure_binary()?;
    let dims = mask.dims();
    let src = mask.data();
    let mut out = vec![0u8; src.len()];
    for (i, o) in out.iter_mut().enumerate() {
        if src[i] == 0 {
            continue;
        }
        let c = grid::coords(dims, i);
        let on_edge = (0..6).any(|d| match grid::neighbor(dims, c, d) {
            Some(n) => src[n] == 0,
            None => true,
        });
        *o = on_edge as u8;
    }
    mask.with_data(out)
}

/// Organ mask, optional vessel mask, and the derived organ boundary.
#[derive(Clone, Debug, PartialEq)]
pub struct MaskSet {
    organ: LabelVolume,
    vessels: Option<LabelVolume>,
    boundary: LabelVolume,
}

impl MaskSet {
    pub fn new(organ: LabelVolume, vessels: Option<LabelVolume>) -> Result<Self> {
        organ.ensure_binary()?;
        if let Some(v) = &vessels {
            v.ensure_binary()?;
            organ.ensure_same_grid(v, "vessel mask vs organ mask")?;
            if let Some(i) = v
                .data()
                .iter()
                .zip(organ.data())
                .position(|(&vv, &o)| vv != 0 && o == 0)
            {
                return Err(Error::VesselOutsideOrgan(grid::coords(organ.dims(), i)));
            }
        }
        let boundary = derive_boundary(&organ)?;
        Ok(Self {
            organ,
            vessels,
            boundary,
        })
    }

    pub fn organ(&self) -> &LabelVolume {
        &self.organ
    }

    pub fn vessels(&self) -> Option<&LabelVolume> {
        self.vessels.as_ref()
    }

    pub fn boundary(&self) -> &LabelVolume {
        &self.boundary
    }

    pub fn dims(&self) -> Dims {
        self.organ.dims()
    }

    pub fn spacing(&self) -> [f32; 3] {
        self.organ.spacing()
    }

    pub fn is_vessel(&self, idx: usize) -> bool {
        self.vessels.as_ref().is_some_and(|v| v.data()[idx] != 0)
    }

    /// Organ parenchyma: organ and not vessel.
    pub fn is_parenchyma(&self, idx: usize) -> bool {
        self.organ.data()[idx] != 0 && !self.is_vessel(idx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn label(dims: Dims, data: Vec<u8>) -> LabelVolume {
        Volume::new(dims, [1.0; 3], data).unwrap()
    }

    #[test]
    fn boundary_of_full_cube_is_its_shell() {
        let b = derive_boundary(&label([3, 3, 3], vec![1; 27])).unwrap();
        assert_eq!(b.count_nonzero(), 26);
        assert_eq!(b.get([1, 1, 1]), 0);
    }

    #[test]
    fn boundary_of_empty_mask_is_empty() {
        let b = derive_boundary(&label([3, 3, 3], vec![0; 27])).unwrap();
        assert_eq!(b.count_nonzero(), 0);
    }

    #[test]
    fn isolated_voxel_is_its_own_boundary() {
        let mut m = label([3, 3, 3], vec![0; 27]);
        m.set([1, 1, 1], 1);
        let b = derive_boundary(&m).unwrap();
        assert_eq!(b.count_nonzero(), 1);
        assert_eq!(b.get([1, 1, 1]), 1);
    }

    #[test]
    fn boundary_rejects_non_binary() {
        let m = label([2, 1, 1], vec![0, 2]);
        assert!(matches!(derive_boundary(&m), Err(Error::NonBinaryMask(2))));
    }

    #[test]
    fn thin_shell_boundary_is_idempotent() {
        // hollow 5^3 cube: a one-voxel-thick shell
        let dims = [5, 5, 5];
        let mut m = label(dims, vec![0; 125]);
        for c in grid::Region::full(dims).iter() {
            if c.iter().any(|&v| v == 0 || v == 4) {
                m.set(c, 1);
            }
        }
        let b = derive_boundary(&m).unwrap();
        assert_eq!(b, m);
        assert_eq!(derive_boundary(&b).unwrap(), b);
    }

    #[test]
    fn hu_range_enforced() {
        assert!(HuVolume::new([1, 1, 1], [1.0; 3], vec![-1024]).is_ok());
        assert!(HuVolume::new([1, 1, 1], [1.0; 3], vec![3071]).is_ok());
        assert!(matches!(
            HuVolume::new([1, 1, 1], [1.0; 3], vec![3072]),
            Err(Error::ValueOutOfRange { .. })
        ));
        assert!(matches!(
            HuVolume::new([1, 1, 1], [1.0; 3], vec![-1025]),
            Err(Error::ValueOutOfRange { .. })
        ));
    }

    #[test]
    fn geometry_validated() {
        assert!(LabelVolume::new([0, 1, 1], [1.0; 3], vec![]).is_err());
        assert!(LabelVolume::new([1, 1, 1], [0.0, 1.0, 1.0], vec![0]).is_err());
        assert!(matches!(
            LabelVolume::new([2, 2, 2], [1.0; 3], vec![0; 7]),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn vessels_must_lie_in_organ() {
        let organ = label([3, 1, 1], vec![1, 1, 0]);
        let ok = label([3, 1, 1], vec![0, 1, 0]);
        let bad = label([3, 1, 1], vec![0, 0, 1]);
        assert!(MaskSet::new(organ.clone(), Some(ok)).is_ok());
        assert!(matches!(
            MaskSet::new(organ, Some(bad)),
            Err(Error::VesselOutsideOrgan([2, 0, 0]))
        ));
    }

    #[test]
    fn mask_set_requires_shared_grid() {
        let organ = label([3, 1, 1], vec![1, 1, 0]);
        let vessels = LabelVolume::new([3, 1, 1], [2.0, 1.0, 1.0], vec![0; 3]).unwrap();
        assert!(matches!(
            MaskSet::new(organ, Some(vessels)),
            Err(Error::DimensionMismatch(_))
        ));
    }
}
