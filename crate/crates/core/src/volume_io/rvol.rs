// RVOL layout (little-endian):
//   0  magic "RVOL"
//   4  version u32 = 1
//   8  kind u8 (0 = HU_INT16, 1 = LABEL_U8)
//   9  reserved, 3 zero bytes
//  12  nx, ny, nz u32
//  24  sx, sy, sz f32
//  36  payload, x-fastest

use super::{AnyVolume, Volume, VolumeKind, Voxel};
use crate::error::{Error, Result};
use crate::grid;

pub const RVOL_MAGIC: &[u8; 4] = b"RVOL";
pub const RVOL_HEADER_LEN: usize = 36;
const RVOL_VERSION: u32 = 1;

pub fn write_rvol<T: Voxel>(v: &Volume<T>) -> Vec<u8> {
    let mut out = Vec::with_capacity(RVOL_HEADER_LEN + v.len() * T::KIND.bytes_per_voxel());
    out.extend_from_slice(RVOL_MAGIC);
    out.extend_from_slice(&RVOL_VERSION.to_le_bytes());
    out.push(T::KIND.code());
    out.extend_from_slice(&[0u8; 3]);
    for d in v.dims() {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for s in v.spacing() {
        out.extend_from_slice(&s.to_le_bytes());
    }
    for &x in v.data() {
        x.write_le(&mut out);
    }
    out
}

fn u32_at(b: &[u8], off: usize) -> u32 {
    u32::from_le_bytes(b[off..off + 4].try_into().unwrap())
}

fn f32_at(b: &[u8], off: usize) -> f32 {
    f32::from_le_bytes(b[off..off + 4].try_into().unwrap())
}

pub fn read_rvol(bytes: &[u8]) -> Result<AnyVolume> {
    if bytes.len() < RVOL_HEADER_LEN {
        return Err(Error::MalformedHeader(format!(
            "RVOL header needs {RVOL_HEADER_LEN} bytes, file has {}",
            bytes.len()
        )));
    }
    if &bytes[0..4] != RVOL_MAGIC {
        return Err(Error::MalformedHeader("bad RVOL magic".into()));
    }
    let version = u32_at(bytes, 4);
    if version != RVOL_VERSION {
        return Err(Error::MalformedHeader(format!("unknown RVOL version {version}")));
    }
    let kind = VolumeKind::from_code(bytes[8])
        .ok_or_else(|| Error::UnsupportedDatatype(format!("RVOL kind code {}", bytes[8])))?;
    if bytes[9..12] != [0, 0, 0] {
        return Err(Error::MalformedHeader("RVOL reserved bytes are not zero".into()));
    }
    let dims = [
        u32_at(bytes, 12) as usize,
        u32_at(bytes, 16) as usize,
        u32_at(bytes, 20) as usize,
    ];
    let spacing = [f32_at(bytes, 24), f32_at(bytes, 28), f32_at(bytes, 32)];
    super::validate_geometry(dims, spacing)?;

    let n = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::MalformedHeader(format!("dims {dims:?} overflow")))?;
    let payload = &bytes[RVOL_HEADER_LEN..];
    let expected = n
        .checked_mul(kind.bytes_per_voxel())
        .ok_or_else(|| Error::MalformedHeader(format!("dims {dims:?} overflow")))?;
    if payload.len() != expected {
        return Err(Error::DimensionMismatch(format!(
            "header promises {expected} payload bytes, file has {}",
            payload.len()
        )));
    }
    debug_assert_eq!(n, grid::voxel_count(dims));
    Ok(match kind {
        VolumeKind::HuInt16 => AnyVolume::Hu(Volume::new(dims, spacing, decode(payload))?),
        VolumeKind::LabelU8 => AnyVolume::Label(Volume::new(dims, spacing, payload.to_vec())?),
    })
}

fn decode<T: Voxel>(payload: &[u8]) -> Vec<T> {
    let w = T::KIND.bytes_per_voxel();
    payload.chunks_exact(w).map(T::read_le).collect()
}
