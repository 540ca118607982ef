//! The AFF tensor container.
//!
//! ```text
//! offset  size  field
//! 0       4     magic "VAFF"
//! 4       2     version (u16 LE), currently 1
//! 6       1     kind: 0 affinity field, 1 feature map, 2 scale weights, 3 real map
//! 7       12    channels, height, width (u32 LE each)
//! 19      2     scale count n (u16 LE); 0 for feature and real maps
//! 21      2n    scales (u16 LE each)
//! 21+2n   4N    payload, f32 LE, channel-major then row-major, N = channels*height*width
//! ```
//!
//! Affinity fields carry `8 * n` channels in canonical direction order within
//! each scale; scale weight maps carry `n`.

use std::fs;
use std::path::Path;

use crate::affinity::NeighborhoodSpec;
use crate::error::{Error, Result};
use crate::grid::{AffinityField, FeatureMap, Grid, RealMap, ScaleWeightMap, Shape};

pub const MAGIC: &[u8; 4] = b"VAFF";
pub const VERSION: u16 = 1;
const FIXED_HEADER: usize = 21;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum AffKind {
    Affinity = 0,
    Feature = 1,
    ScaleWeight = 2,
    Real = 3,
}

impl AffKind {
    fn from_byte(b: u8) -> Result<Self> {
        Ok(match b {
            0 => AffKind::Affinity,
            1 => AffKind::Feature,
            2 => AffKind::ScaleWeight,
            3 => AffKind::Real,
            _ => return Err(Error::CorruptFile(format!("unknown AFF kind {b}"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AffPayload {
    Affinity(AffinityField),
    Feature(FeatureMap),
    ScaleWeight(ScaleWeightMap),
    Real(RealMap),
}

impl AffPayload {
    pub fn kind(&self) -> AffKind {
        match self {
            AffPayload::Affinity(_) => AffKind::Affinity,
            AffPayload::Feature(_) => AffKind::Feature,
            AffPayload::ScaleWeight(_) => AffKind::ScaleWeight,
            AffPayload::Real(_) => AffKind::Real,
        }
    }

    fn parts(&self) -> (usize, Shape, Vec<u32>, &[f64]) {
        match self {
            AffPayload::Affinity(f) => (f.slot_count(), f.shape(), f.spec().scales().to_vec(), f.data()),
            AffPayload::Feature(f) => (f.channels(), f.shape(), Vec::new(), f.data()),
            AffPayload::ScaleWeight(w) => (w.scales().len(), w.shape(), w.scales().to_vec(), w.data()),
            AffPayload::Real(m) => (1, m.shape(), Vec::new(), m.data()),
        }
    }
}

pub fn encode_aff(payload: &AffPayload) -> Result<Vec<u8>> {
    let (channels, shape, scales, data) = payload.parts();
    let mut out = Vec::with_capacity(FIXED_HEADER + 2 * scales.len() + 4 * data.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(payload.kind() as u8);
    for d in [channels, shape.height, shape.width] {
        let d = u32::try_from(d).map_err(|_| Error::InvalidParameter(format!("dimension {d} exceeds u32")))?;
        out.extend_from_slice(&d.to_le_bytes());
    }
    let count = u16::try_from(scales.len()).map_err(|_| Error::InvalidParameter("too many scales".into()))?;
    out.extend_from_slice(&count.to_le_bytes());
    for s in scales {
        let s = u16::try_from(s).map_err(|_| Error::InvalidScale(s))?;
        out.extend_from_slice(&s.to_le_bytes());
    }
    for &v in data {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    Ok(out)
}

fn u16_at(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn u32_at(b: &[u8], at: usize) -> usize {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]]) as usize
}

pub fn decode_aff(bytes: &[u8]) -> Result<AffPayload> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(Error::CorruptFile("missing VAFF magic".into()));
    }
    if bytes.len() < 6 {
        return Err(Error::TruncatedPayload {
            expected: FIXED_HEADER,
            found: bytes.len(),
        });
    }
    let version = u16_at(bytes, 4);
    if version != VERSION {
        return Err(Error::VersionMismatch {
            found: version,
            expected: VERSION,
        });
    }
    if bytes.len() < FIXED_HEADER {
        return Err(Error::TruncatedPayload {
            expected: FIXED_HEADER,
            found: bytes.len(),
        });
    }
    let kind = AffKind::from_byte(bytes[6])?;
    let (channels, height, width) = (u32_at(bytes, 7), u32_at(bytes, 11), u32_at(bytes, 15));
    let count = u16_at(bytes, 19) as usize;
    let header = FIXED_HEADER + 2 * count;
    let n = channels
        .checked_mul(height)
        .and_then(|v| v.checked_mul(width))
        .and_then(|v| v.checked_mul(4))
        .ok_or_else(|| Error::CorruptFile("AFF dimensions overflow".into()))?;
    let expected = header + n;
    if bytes.len() < expected {
        return Err(Error::TruncatedPayload {
            expected,
            found: bytes.len(),
        });
    }
    if bytes.len() > expected {
        return Err(Error::CorruptFile(format!(
            "{} trailing bytes after AFF payload",
            bytes.len() - expected
        )));
    }
    let scales: Vec<u32> = (0..count).map(|i| u16_at(bytes, FIXED_HEADER + 2 * i) as u32).collect();
    let data: Vec<f64> = bytes[header..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    let corrupt = |e: Error| Error::CorruptFile(format!("AFF content: {e}"));
    let want_channels = match kind {
        AffKind::Affinity => 8 * count,
        AffKind::ScaleWeight => count,
        AffKind::Real => 1,
        AffKind::Feature => channels,
    };
    if channels != want_channels || (matches!(kind, AffKind::Feature | AffKind::Real) && count != 0) {
        return Err(Error::CorruptFile(format!(
            "AFF kind {kind:?} with {channels} channels and {count} scales is inconsistent"
        )));
    }
    Ok(match kind {
        AffKind::Affinity => {
            let spec = NeighborhoodSpec::new(scales).map_err(corrupt)?;
            AffPayload::Affinity(AffinityField::new(width, height, spec, data).map_err(corrupt)?)
        }
        AffKind::Feature => AffPayload::Feature(FeatureMap::new(channels, width, height, data).map_err(corrupt)?),
        AffKind::ScaleWeight => {
            AffPayload::ScaleWeight(ScaleWeightMap::new(scales, width, height, data).map_err(corrupt)?)
        }
        AffKind::Real => AffPayload::Real(RealMap::new(width, height, data).map_err(corrupt)?),
    })
}

pub fn read_aff(path: impl AsRef<Path>) -> Result<AffPayload> {
    let path = path.as_ref();
    decode_aff(&fs::read(path).map_err(|e| Error::io(path, e))?)
}

pub fn write_aff(path: impl AsRef<Path>, payload: &AffPayload) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_aff(payload)?).map_err(|e| Error::io(path, e))
}

fn wrong_kind(want: AffKind, got: AffKind) -> Error {
    Error::InvalidValue(format!("expected an AFF {want:?} payload, found {got:?}"))
}

pub fn read_affinity(path: impl AsRef<Path>) -> Result<AffinityField> {
    match read_aff(path)? {
        AffPayload::Affinity(f) => Ok(f),
        p => Err(wrong_kind(AffKind::Affinity, p.kind())),
    }
}

pub fn read_features(path: impl AsRef<Path>) -> Result<FeatureMap> {
    match read_aff(path)? {
        AffPayload::Feature(f) => Ok(f),
        p => Err(wrong_kind(AffKind::Feature, p.kind())),
    }
}

pub fn read_weights(path: impl AsRef<Path>) -> Result<ScaleWeightMap> {
    match read_aff(path)? {
        AffPayload::ScaleWeight(w) => Ok(w),
        p => Err(wrong_kind(AffKind::ScaleWeight, p.kind())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::affinity::compute_affinity;
    use crate::grid::Mask;

    fn field() -> AffinityField {
        let m = Mask::from_fn(64, 64, |r, c| (r * 7 + c * 3) % 5 < 2);
        compute_affinity(&m, &NeighborhoodSpec::new(vec![3, 9, 15]).unwrap())
    }

    #[test]
    fn affinity_round_trip() {
        let f = AffPayload::Affinity(field());
        let bytes = encode_aff(&f).unwrap();
        assert_eq!(bytes.len(), 21 + 6 + 24 * 64 * 64 * 4);
        assert_eq!(decode_aff(&bytes).unwrap(), f);
    }

    #[test]
    fn other_kinds_round_trip() {
        let fm = FeatureMap::from_fn(3, 4, 5, |ch, r, c| (ch as f64 - r as f64) * 0.25 + c as f64).unwrap();
        let w = ScaleWeightMap::uniform(vec![3, 5], 4, 5, 0.5).unwrap();
        let rm = RealMap::new(2, 2, vec![1.5, -2.0, 0.0, 3.25]).unwrap();
        for p in [
            AffPayload::Feature(fm),
            AffPayload::ScaleWeight(w),
            AffPayload::Real(rm),
        ] {
            assert_eq!(decode_aff(&encode_aff(&p).unwrap()).unwrap(), p);
        }
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.aff");
        write_aff(&p, &AffPayload::Affinity(field())).unwrap();
        assert_eq!(read_affinity(&p).unwrap(), field());
        assert!(read_features(&p).is_err());
    }

    #[test]
    fn malformed_inputs() {
        let bytes = encode_aff(&AffPayload::Affinity(field())).unwrap();
        assert!(matches!(
            decode_aff(&bytes[..bytes.len() - 1]),
            Err(Error::TruncatedPayload { .. })
        ));
        assert!(matches!(decode_aff(&bytes[..10]), Err(Error::TruncatedPayload { .. })));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(decode_aff(&bad), Err(Error::CorruptFile(_))));
        let mut v2 = bytes.clone();
        v2[4] = 2;
        assert!(matches!(
            decode_aff(&v2),
            Err(Error::VersionMismatch { found: 2, expected: 1 })
        ));
        let mut extra = bytes;
        extra.push(0);
        assert!(matches!(decode_aff(&extra), Err(Error::CorruptFile(_))));
    }
}
