//! Minimal NIfTI-1 (single file, little-endian) reader and writer.
//!
//! Only the subset needed for label volumes and float32 probability maps:
//! magic `n+1\0`, `vox_offset >= 352`, datatypes uint8 (2), int16 (4) and
//! float32 (16), identity intensity scaling.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::volmodel::{Dims, LabelVolume, ProbabilityMap, TissueClass, VoxelSpacing};

pub const HEADER_SIZE: usize = 348;
/// Header plus the 4-byte extension flag.
pub const MIN_VOX_OFFSET: usize = 352;

const OFF_DIM: usize = 40;
const OFF_DATATYPE: usize = 70;
const OFF_BITPIX: usize = 72;
const OFF_PIXDIM: usize = 76;
const OFF_VOX_OFFSET: usize = 108;
const OFF_SCL_SLOPE: usize = 112;
const OFF_SCL_INTER: usize = 116;
const OFF_XYZT_UNITS: usize = 123;
const OFF_MAGIC: usize = 344;
const MAGIC: &[u8; 4] = b"n+1\0";

/// Integral tolerance for float-encoded labels.
const FLOAT_LABEL_TOLERANCE: f32 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Datatype {
    Uint8,
    Int16,
    Float32,
}

impl Datatype {
    pub fn code(self) -> i16 {
        match self {
            Datatype::Uint8 => 2,
            Datatype::Int16 => 4,
            Datatype::Float32 => 16,
        }
    }

    fn from_code(code: i16) -> Result<Self> {
        match code {
            2 => Ok(Datatype::Uint8),
            4 => Ok(Datatype::Int16),
            16 => Ok(Datatype::Float32),
            other => Err(Error::UnsupportedDatatype(other)),
        }
    }

    pub fn bytes(self) -> usize {
        match self {
            Datatype::Uint8 => 1,
            Datatype::Int16 => 2,
            Datatype::Float32 => 4,
        }
    }
}

/// The header fields this reader honours.
#[derive(Clone, Debug, PartialEq)]
pub struct NiftiHeader {
    pub dim: [i16; 8],
    pub datatype: Datatype,
    pub pixdim: [f32; 8],
    pub vox_offset: usize,
}

impl NiftiHeader {
    pub fn rank(&self) -> usize {
        self.dim[0] as usize
    }

    pub fn voxel_count(&self) -> Option<usize> {
        self.dim[1..=self.rank()]
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d as usize))
    }
}

fn i16_at(b: &[u8], off: usize) -> i16 {
    i16::from_le_bytes([b[off], b[off + 1]])
}

fn i32_at(b: &[u8], off: usize) -> i32 {
    i32::from_le_bytes(b[off..off + 4].try_into().unwrap())
}

fn f32_at(b: &[u8], off: usize) -> f32 {
    f32::from_le_bytes(b[off..off + 4].try_into().unwrap())
}

/// Parse and validate the fixed 348-byte header. `rank` is the required dim[0].
pub fn parse_header(bytes: &[u8], rank: i16) -> Result<NiftiHeader> {
    if bytes.len() < HEADER_SIZE {
        return Err(Error::LengthMismatch { expected: HEADER_SIZE, actual: bytes.len() });
    }
    let sizeof_hdr = i32_at(bytes, 0);
    if sizeof_hdr != HEADER_SIZE as i32 {
        return Err(Error::Format(format!(
            "sizeof_hdr is {sizeof_hdr}, expected 348 (big-endian files are not supported)"
        )));
    }
    if &bytes[OFF_MAGIC..OFF_MAGIC + 4] != MAGIC {
        return Err(Error::Format("bad magic, expected single-file \"n+1\"".into()));
    }
    let mut dim = [0i16; 8];
    for (k, d) in dim.iter_mut().enumerate() {
        *d = i16_at(bytes, OFF_DIM + 2 * k);
    }
    if dim[0] != rank {
        return Err(Error::UnsupportedRank(dim[0]));
    }
    if let Some(bad) = dim[1..=rank as usize].iter().find(|&&d| d < 1) {
        return Err(Error::Format(format!("non-positive dimension {bad}")));
    }
    let datatype = Datatype::from_code(i16_at(bytes, OFF_DATATYPE))?;
    let mut pixdim = [0f32; 8];
    for (k, p) in pixdim.iter_mut().enumerate() {
        *p = f32_at(bytes, OFF_PIXDIM + 4 * k);
    }
    if let Some(bad) = pixdim[1..=3].iter().find(|p| !(p.is_finite() && **p > 0.0)) {
        return Err(Error::Format(format!("invalid voxel spacing {bad}")));
    }
    let vox_offset = f32_at(bytes, OFF_VOX_OFFSET);
    if !(vox_offset.is_finite() && vox_offset.fract() == 0.0 && vox_offset >= MIN_VOX_OFFSET as f32)
    {
        return Err(Error::Format(format!("invalid vox_offset {vox_offset}")));
    }
    let slope = f32_at(bytes, OFF_SCL_SLOPE);
    let inter = f32_at(bytes, OFF_SCL_INTER);
    if !((slope == 0.0 || slope == 1.0) && inter == 0.0) {
        return Err(Error::Format(format!(
            "non-identity intensity scaling (slope {slope}, intercept {inter})"
        )));
    }
    Ok(NiftiHeader { dim, datatype, pixdim, vox_offset: vox_offset as usize })
}

fn payload<'a>(bytes: &'a [u8], header: &NiftiHeader) -> Result<&'a [u8]> {
    let nvox = header
        .voxel_count()
        .ok_or_else(|| Error::Format("voxel count overflows".into()))?;
    let expected = nvox
        .checked_mul(header.datatype.bytes())
        .and_then(|n| n.checked_add(header.vox_offset))
        .ok_or_else(|| Error::Format("payload size overflows".into()))?;
    if bytes.len() != expected {
        return Err(Error::LengthMismatch { expected, actual: bytes.len() });
    }
    Ok(&bytes[header.vox_offset..])
}

fn spacing_of<T: Scalar>(header: &NiftiHeader) -> Result<VoxelSpacing<T>> {
    let p = header.pixdim;
    VoxelSpacing::new(
        T::from_f64_lossy(p[1] as f64),
        T::from_f64_lossy(p[2] as f64),
        T::from_f64_lossy(p[3] as f64),
    )
}

fn decode_label(v: f32) -> Result<TissueClass> {
    let rounded = v.round();
    if !v.is_finite() || (v - rounded).abs() > FLOAT_LABEL_TOLERANCE || !(0.0..=3.0).contains(&rounded) {
        return Err(Error::InvalidLabel(v as f64));
    }
    Ok(TissueClass::from_code(rounded as u8).expect("range checked"))
}

/// Decode a 3D label volume.
pub fn read_volume<T: Scalar>(bytes: &[u8]) -> Result<LabelVolume<T>> {
    let header = parse_header(bytes, 3)?;
    let data = payload(bytes, &header)?;
    let labels = match header.datatype {
        Datatype::Uint8 => data
            .iter()
            .map(|&b| TissueClass::from_code(b).ok_or(Error::InvalidLabel(b as f64)))
            .collect::<Result<Vec<_>>>()?,
        Datatype::Int16 => data
            .chunks_exact(2)
            .map(|c| {
                let v = i16::from_le_bytes([c[0], c[1]]);
                u8::try_from(v)
                    .ok()
                    .and_then(TissueClass::from_code)
                    .ok_or(Error::InvalidLabel(v as f64))
            })
            .collect::<Result<Vec<_>>>()?,
        Datatype::Float32 => data
            .chunks_exact(4)
            .map(|c| decode_label(f32::from_le_bytes(c.try_into().unwrap())))
            .collect::<Result<Vec<_>>>()?,
    };
    let d = header.dim;
    let dims = Dims::new(d[1] as usize, d[2] as usize, d[3] as usize);
    LabelVolume::new(dims, spacing_of(&header)?, labels)
}

/// Decode a float32 4D probability map (dim[4] = classes, class slowest).
pub fn read_probability_map<T: Scalar>(bytes: &[u8]) -> Result<(ProbabilityMap<T>, VoxelSpacing<T>)> {
    let header = parse_header(bytes, 4)?;
    if header.datatype != Datatype::Float32 {
        return Err(Error::UnsupportedDatatype(header.datatype.code()));
    }
    let data = payload(bytes, &header)?;
    let d = header.dim;
    let dims = Dims::new(d[1] as usize, d[2] as usize, d[3] as usize);
    let classes = d[4] as usize;
    let nvox = dims.len();
    let mut values = vec![T::zero(); nvox * classes];
    for (i, c) in data.chunks_exact(4).enumerate() {
        let (class, voxel) = (i / nvox, i % nvox);
        let v = f32::from_le_bytes(c.try_into().unwrap());
        values[voxel * classes + class] = T::from_f64_lossy(v as f64);
    }
    Ok((ProbabilityMap::new(dims, classes, values)?, spacing_of(&header)?))
}

fn header_bytes(dim: [i16; 8], datatype: Datatype, pixdim: [f32; 8]) -> Vec<u8> {
    let mut h = vec![0u8; MIN_VOX_OFFSET];
    h[0..4].copy_from_slice(&(HEADER_SIZE as i32).to_le_bytes());
    for (k, d) in dim.iter().enumerate() {
        h[OFF_DIM + 2 * k..OFF_DIM + 2 * k + 2].copy_from_slice(&d.to_le_bytes());
    }
    h[OFF_DATATYPE..OFF_DATATYPE + 2].copy_from_slice(&datatype.code().to_le_bytes());
    let bitpix = (datatype.bytes() * 8) as i16;
    h[OFF_BITPIX..OFF_BITPIX + 2].copy_from_slice(&bitpix.to_le_bytes());
    for (k, p) in pixdim.iter().enumerate() {
        h[OFF_PIXDIM + 4 * k..OFF_PIXDIM + 4 * k + 4].copy_from_slice(&p.to_le_bytes());
    }
    h[OFF_VOX_OFFSET..OFF_VOX_OFFSET + 4].copy_from_slice(&(MIN_VOX_OFFSET as f32).to_le_bytes());
    h[OFF_SCL_SLOPE..OFF_SCL_SLOPE + 4].copy_from_slice(&1f32.to_le_bytes());
    // millimetres
    h[OFF_XYZT_UNITS] = 2;
    h[OFF_MAGIC..OFF_MAGIC + 4].copy_from_slice(MAGIC);
    h
}

fn dim_i16(n: usize) -> Result<i16> {
    i16::try_from(n).map_err(|_| Error::InvalidArgument(format!("dimension {n} exceeds NIfTI-1 range")))
}

fn pixdim_of<T: Scalar>(s: &VoxelSpacing<T>) -> [f32; 8] {
    [
        1.0,
        s.dx.to_f64_lossy() as f32,
        s.dy.to_f64_lossy() as f32,
        s.dz.to_f64_lossy() as f32,
        0.0,
        0.0,
        0.0,
        0.0,
    ]
}

/// Encode a label volume as uint8 NIfTI-1.
pub fn write_volume<T: Scalar>(v: &LabelVolume<T>) -> Result<Vec<u8>> {
    let d = v.dims();
    let dim = [3, dim_i16(d.nx)?, dim_i16(d.ny)?, dim_i16(d.nz)?, 1, 1, 1, 1];
    let mut out = header_bytes(dim, Datatype::Uint8, pixdim_of(&v.spacing()));
    out.extend(v.data().iter().map(|c| c.code()));
    Ok(out)
}

/// Encode a probability map as float32 4D NIfTI-1 (class slowest).
pub fn write_probability_map<T: Scalar>(p: &ProbabilityMap<T>, spacing: &VoxelSpacing<T>) -> Result<Vec<u8>> {
    let d = p.dims();
    let dim = [4, dim_i16(d.nx)?, dim_i16(d.ny)?, dim_i16(d.nz)?, dim_i16(p.classes())?, 1, 1, 1];
    let mut out = header_bytes(dim, Datatype::Float32, pixdim_of(spacing));
    out.reserve(d.len() * p.classes() * 4);
    for class in 0..p.classes() {
        for voxel in p.voxels() {
            out.extend_from_slice(&(voxel[class].to_f64_lossy() as f32).to_le_bytes());
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Hand-assembled 4x4x2 uint8 file, pixdim (1.5, 1.5, 8.0).
    fn golden() -> Vec<u8> {
        let mut b = vec![0u8; 352];
        b[0..4].copy_from_slice(&348i32.to_le_bytes());
        for (k, d) in [3i16, 4, 4, 2, 1, 1, 1, 1].iter().enumerate() {
            b[40 + 2 * k..42 + 2 * k].copy_from_slice(&d.to_le_bytes());
        }
        b[70..72].copy_from_slice(&2i16.to_le_bytes());
        b[72..74].copy_from_slice(&8i16.to_le_bytes());
        for (k, p) in [1.0f32, 1.5, 1.5, 8.0].iter().enumerate() {
            b[76 + 4 * k..80 + 4 * k].copy_from_slice(&p.to_le_bytes());
        }
        b[108..112].copy_from_slice(&352f32.to_le_bytes());
        b[344..348].copy_from_slice(b"n+1\0");
        b.extend((0..32u8).map(|i| i % 4));
        b
    }

    #[test]
    fn reads_golden_file() {
        let v = read_volume::<f64>(&golden()).unwrap();
        assert_eq!(v.dims(), Dims::new(4, 4, 2));
        assert_eq!(v.spacing(), VoxelSpacing::new(1.5, 1.5, 8.0).unwrap());
        assert_eq!(v.get(1, 0, 0), TissueClass::Rv);
        assert_eq!(v.get(3, 3, 1), TissueClass::Lv);
        assert_eq!(v.count(TissueClass::Myocardium), 8);
    }

    #[test]
    fn rejects_out_of_range_label() {
        let mut b = golden();
        b[352 + 5] = 7;
        assert!(matches!(read_volume::<f64>(&b), Err(Error::InvalidLabel(v)) if v == 7.0));
    }

    #[test]
    fn rejects_truncated_payload() {
        let mut b = golden();
        b.pop();
        assert!(matches!(read_volume::<f64>(&b), Err(Error::LengthMismatch { expected: 384, actual: 383 })));
    }

    #[test]
    fn rejects_bad_magic_rank_datatype_scaling() {
        let mut b = golden();
        b[345] = b'i';
        assert!(matches!(read_volume::<f64>(&b), Err(Error::Format(_))));

        let mut b = golden();
        b[40..42].copy_from_slice(&4i16.to_le_bytes());
        assert!(matches!(read_volume::<f64>(&b), Err(Error::UnsupportedRank(4))));

        let mut b = golden();
        b[70..72].copy_from_slice(&64i16.to_le_bytes());
        assert!(matches!(read_volume::<f64>(&b), Err(Error::UnsupportedDatatype(64))));

        let mut b = golden();
        b[112..116].copy_from_slice(&2f32.to_le_bytes());
        assert!(matches!(read_volume::<f64>(&b), Err(Error::Format(_))));

        let mut b = golden();
        b[108..112].copy_from_slice(&348f32.to_le_bytes());
        assert!(matches!(read_volume::<f64>(&b), Err(Error::Format(_))));
    }

    #[test]
    fn float_payload_must_be_integral() {
        let v = LabelVolume::<f64>::from_codes(Dims::new(2, 1, 1), VoxelSpacing::isotropic(), &[1, 3]).unwrap();
        let mut b = write_volume(&v).unwrap();
        b.truncate(352);
        b[70..72].copy_from_slice(&16i16.to_le_bytes());
        let mut ok = b.clone();
        ok.extend_from_slice(&1.0004f32.to_le_bytes());
        ok.extend_from_slice(&2.9995f32.to_le_bytes());
        assert_eq!(read_volume::<f64>(&ok).unwrap().codes(), vec![1, 3]);
        let mut bad = b;
        bad.extend_from_slice(&1.5f32.to_le_bytes());
        bad.extend_from_slice(&2.0f32.to_le_bytes());
        assert!(matches!(read_volume::<f64>(&bad), Err(Error::InvalidLabel(_))));
    }

    #[test]
    fn int16_payload() {
        let mut b = golden();
        b.truncate(352);
        b[70..72].copy_from_slice(&4i16.to_le_bytes());
        for i in 0..32i16 {
            b.extend_from_slice(&(i % 4).to_le_bytes());
        }
        assert_eq!(read_volume::<f64>(&b).unwrap().count(TissueClass::Lv), 8);
        let n = b.len();
        b[n - 2..].copy_from_slice(&(-1i16).to_le_bytes());
        assert!(matches!(read_volume::<f64>(&b), Err(Error::InvalidLabel(_))));
    }

    #[test]
    fn probability_map_round_trip() {
        let dims = Dims::new(2, 1, 1);
        let p = ProbabilityMap::new(dims, 3, vec![0.5, 0.25, 0.25, 0.0, 0.0, 1.0]).unwrap();
        let s = VoxelSpacing::new(1.5, 1.5, 8.0).unwrap();
        let bytes = write_probability_map(&p, &s).unwrap();
        let (q, s2) = read_probability_map::<f64>(&bytes).unwrap();
        assert_eq!(q, p);
        assert_eq!(s2, s);
        assert!(matches!(read_volume::<f64>(&bytes), Err(Error::UnsupportedRank(4))));
    }

    proptest! {
        #[test]
        fn write_read_round_trip(
            (nx, ny, nz) in (1usize..7, 1usize..7, 1usize..5),
            dx in 0.5f64..3.0, dz in 1.0f64..12.0,
            seed in any::<u64>(),
        ) {
            let n = nx * ny * nz;
            let codes: Vec<u8> = (0..n).map(|i| ((seed >> (i % 60)) as u8 ^ i as u8) % 4).collect();
            let s = VoxelSpacing::new(dx, dx * 1.1, dz).unwrap();
            let v = LabelVolume::from_codes(Dims::new(nx, ny, nz), s, &codes).unwrap();
            let back = read_volume::<f64>(&write_volume(&v).unwrap()).unwrap();
            prop_assert_eq!(back.dims(), v.dims());
            prop_assert_eq!(back.codes(), v.codes());
            prop_assert_eq!(back.spacing(), s.cast::<f32>().cast::<f64>());
        }

        #[test]
        fn mutated_headers_never_panic(
            edits in prop::collection::vec((0usize..352, any::<u8>()), 1..8),
            cut in prop::option::of(0usize..384),
        ) {
            let mut b = golden();
            for (off, val) in edits {
                b[off] = val;
            }
            if let Some(c) = cut {
                b.truncate(c);
            }
            if let Ok(v) = read_volume::<f64>(&b) {
                prop_assert_eq!(v.data().len(), v.dims().len());
                prop_assert!(v.max_code() <= 3);
            }
        }

        #[test]
        fn critical_field_mutations_are_rejected(
            field in 0usize..4, val in any::<i16>(),
        ) {
            let mut b = golden();
            let (off, good) = [(0usize, 348i16), (40, 3), (70, 2), (344, 0x2b6e)][field];
            prop_assume!(val != good);
            if field == 2 { prop_assume!(val != 4 && val != 16); }
            b[off..off + 2].copy_from_slice(&val.to_le_bytes());
            prop_assert!(read_volume::<f64>(&b).is_err());
        }
    }
}
