//! Minimal NIfTI-1 reader: single-file `.nii`, uncompressed, int16 or uint8.
//! Only dim[1..3], pixdim[1..3], datatype and vox_offset are honored.

use super::{AnyVolume, Volume, HU_MAX, HU_MIN};
use crate::error::{Error, Result};

const HEADER_LEN: usize = 348;
const DT_UINT8: i16 = 2;
const DT_INT16: i16 = 4;

#[derive(Clone, Copy)]
enum Endian {
    Little,
    Big,
}

struct Reader<'a> {
    b: &'a [u8],
    e: Endian,
}

impl Reader<'_> {
    fn arr<const N: usize>(&self, off: usize) -> [u8; N] {
        self.b[off..off + N].try_into().unwrap()
    }

    fn i16(&self, off: usize) -> i16 {
        match self.e {
            Endian::Little => i16::from_le_bytes(self.arr(off)),
            Endian::Big => i16::from_be_bytes(self.arr(off)),
        }
    }

    fn f32(&self, off: usize) -> f32 {
        match self.e {
            Endian::Little => f32::from_le_bytes(self.arr(off)),
            Endian::Big => f32::from_be_bytes(self.arr(off)),
        }
    }
}

/// Parses a NIfTI-1 single-file image. int16 data becomes an HU volume
/// (clamped into the HU range, since scanners pad with values like -2048 or
/// -3024); uint8 data becomes a label volume.
pub fn read_nifti(bytes: &[u8]) -> Result<AnyVolume> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::MalformedHeader(format!(
            "NIfTI-1 header needs {HEADER_LEN} bytes, file has {}",
            bytes.len()
        )));
    }
    let e = match (
        i32::from_le_bytes(bytes[0..4].try_into().unwrap()),
        i32::from_be_bytes(bytes[0..4].try_into().unwrap()),
    ) {
        (348, _) => Endian::Little,
        (_, 348) => Endian::Big,
        _ => return Err(Error::MalformedHeader("sizeof_hdr is not 348".into())),
    };
    if &bytes[344..348] != b"n+1\0" {
        return Err(Error::MalformedHeader(
            "not a single-file NIfTI-1 image (magic != \"n+1\")".into(),
        ));
    }
    let r = Reader { b: bytes, e };

    let ndim = r.i16(40);
    if !(1..=7).contains(&ndim) {
        return Err(Error::MalformedHeader(format!("dim[0] = {ndim}")));
    }
    let mut dims = [1usize; 3];
    for i in 1..=7usize {
        let d = if i as i16 <= ndim { r.i16(40 + 2 * i) } else { 1 };
        if d < 1 {
            return Err(Error::MalformedHeader(format!("dim[{i}] = {d}")));
        }
        if i <= 3 {
            dims[i - 1] = d as usize;
        } else if d != 1 {
            return Err(Error::UnsupportedDatatype(format!(
                "only 3D volumes are supported, dim[{i}] = {d}"
            )));
        }
    }
    let mut spacing = [1f32; 3];
    for (a, s) in spacing.iter_mut().enumerate() {
        *s = r.f32(76 + 4 * (a + 1)).abs();
    }

    let datatype = r.i16(70);
    let bpv = match datatype {
        DT_UINT8 => 1,
        DT_INT16 => 2,
        other => {
            return Err(Error::UnsupportedDatatype(format!("NIfTI datatype code {other}")));
        }
    };
    let vox_offset = r.f32(108);
    if !(vox_offset.is_finite() && vox_offset >= HEADER_LEN as f32) || vox_offset.fract() != 0.0 {
        return Err(Error::MalformedHeader(format!("vox_offset = {vox_offset}")));
    }
    let vox_offset = vox_offset as usize;
    if vox_offset > bytes.len() {
        return Err(Error::DimensionMismatch(format!(
            "vox_offset {vox_offset} beyond end of file ({} bytes)",
            bytes.len()
        )));
    }
    super::validate_geometry(dims, spacing)?;

    let n: usize = dims.iter().product();
    let payload = &bytes[vox_offset..];
    if payload.len() != n * bpv {
        return Err(Error::DimensionMismatch(format!(
            "header promises {} payload bytes, file has {}",
            n * bpv,
            payload.len()
        )));
    }

    Ok(match datatype {
        DT_UINT8 => AnyVolume::Label(Volume::new(dims, spacing, payload.to_vec())?),
        _ => {
            let data = payload
                .chunks_exact(2)
                .map(|c| {
                    let v = match e {
                        Endian::Little => i16::from_le_bytes([c[0], c[1]]),
                        Endian::Big => i16::from_be_bytes([c[0], c[1]]),
                    };
                    v.clamp(HU_MIN, HU_MAX)
                })
                .collect();
            AnyVolume::Hu(Volume::new(dims, spacing, data)?)
        }
    })
}
