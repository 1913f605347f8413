//! Binary model snapshot codec.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic  "STSR" (4 bytes)
//! version u32
//! count   u32                      number of named tensors
//! entry × count:
//!     name_len u32, name (UTF-8)
//!     rank     u32, dims (u32 × rank)
//!     data     f32 × Πdims
//! ```
//!
//! Values are stored as f32 bit patterns, so an f32 parameter store
//! round-trips bitwise. Decoding never trusts a length field before
//! checking the remaining bytes.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::params::ParamStore;
use crate::tensor::{Scalar, Tensor};

pub const MAGIC: [u8; 4] = *b"STSR";
pub const VERSION: u32 = 1;

/// Why a byte stream failed to decode; pinpoints the failing element.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CheckpointError {
    /// Fewer bytes than the element named needed.
    Truncated { reading: String },
    BadMagic([u8; 4]),
    UnsupportedVersion(u32),
    /// A name field was not valid UTF-8.
    BadName { entry: usize },
    /// Bytes remained after the last entry.
    TrailingBytes(usize),
}

impl core::fmt::Display for CheckpointError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            CheckpointError::Truncated { reading } => write!(f, "checkpoint truncated while reading {reading}"),
            CheckpointError::BadMagic(m) => write!(f, "bad checkpoint magic {m:?} (expected {MAGIC:?})"),
            CheckpointError::UnsupportedVersion(v) => write!(f, "unsupported checkpoint version {v} (expected {VERSION})"),
            CheckpointError::BadName { entry } => write!(f, "entry {entry} has a non-UTF-8 name"),
            CheckpointError::TrailingBytes(n) => write!(f, "{n} unexpected trailing bytes after the last entry"),
        }
    }
}

/// Serialize every parameter (registration order) as f32.
pub fn encode<T: Scalar>(store: &ParamStore<T>) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(store.len() as u32).to_le_bytes());
    for (name, tensor) in store.iter() {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(tensor.rank() as u32).to_le_bytes());
        for &d in tensor.shape() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in tensor.data() {
            out.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
        }
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, reading: impl FnOnce() -> String) -> Result<&'a [u8], CheckpointError> {
        if self.bytes.len() - self.pos < n {
            return Err(CheckpointError::Truncated { reading: reading() });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, reading: impl FnOnce() -> String) -> Result<u32, CheckpointError> {
        let b = self.take(4, reading)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

/// Decode a checkpoint to named f32 tensors, in stored order.
pub fn decode(bytes: &[u8]) -> Result<Vec<(String, Tensor<f32>)>, CheckpointError> {
    let mut c = Cursor { bytes, pos: 0 };
    let magic = c.take(4, || "magic".to_string())?;
    if magic != MAGIC {
        return Err(CheckpointError::BadMagic([magic[0], magic[1], magic[2], magic[3]]));
    }
    let version = c.u32(|| "version".to_string())?;
    if version != VERSION {
        return Err(CheckpointError::UnsupportedVersion(version));
    }
    let count = c.u32(|| "entry count".to_string())? as usize;
    let mut out = Vec::with_capacity(count.min(1024));
    for entry in 0..count {
        let name_len = c.u32(|| format!("entry {entry} name length"))? as usize;
        let name_bytes = c.take(name_len, || format!("entry {entry} name"))?;
        let name = core::str::from_utf8(name_bytes).map_err(|_| CheckpointError::BadName { entry })?.to_string();
        let rank = c.u32(|| format!("entry {entry} ({name}) rank"))? as usize;
        let mut dims = Vec::with_capacity(rank.min(16));
        for d in 0..rank {
            dims.push(c.u32(|| format!("entry {entry} ({name}) dim {d}"))? as usize);
        }
        let numel: usize = dims.iter().product();
        let raw = c.take(4 * numel, || format!("entry {entry} ({name}) data"))?;
        let data: Vec<f32> =
            raw.chunks_exact(4).map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]])).collect();
        out.push((name, Tensor::from_vec(&dims, data)));
    }
    if c.pos != bytes.len() {
        return Err(CheckpointError::TrailingBytes(bytes.len() - c.pos));
    }
    Ok(out)
}

/// Copy decoded tensors into a parameter store. The name sets and shapes
/// must match exactly; the error message names every discrepancy.
pub fn load_into_store<T: Scalar>(
    store: &mut ParamStore<T>,
    entries: &[(String, Tensor<f32>)],
) -> Result<(), String> {
    let mut problems = Vec::new();
    for (name, tensor) in entries {
        match store.find(name) {
            None => problems.push(format!("unexpected parameter '{name}'")),
            Some(id) => {
                if store.get(id).shape() != tensor.shape() {
                    problems.push(format!(
                        "parameter '{name}' has shape {:?} in the checkpoint but {:?} in the model",
                        tensor.shape(),
                        store.get(id).shape()
                    ));
                }
            }
        }
    }
    let ids: Vec<_> = store.ids().collect();
    for id in &ids {
        let name = store.name(*id);
        if !entries.iter().any(|(n, _)| n == name) {
            problems.push(format!("missing parameter '{name}'"));
        }
    }
    if !problems.is_empty() {
        return Err(problems.join("; "));
    }
    for (name, tensor) in entries {
        let id = store.find(name).expect("checked above");
        *store.get_mut(id) = tensor.cast::<T>();
    }
    Ok(())
}

// ─── Tests ───────────────────────────────────────────────────────────────

#[cfg(test)]
mod tests {
    use super::*;
    use crate::train::seeded_rng;
    use alloc::vec;

    fn sample_store(seed: u64) -> ParamStore<f32> {
        let mut rng = seeded_rng(seed);
        let mut store = ParamStore::new();
        store.register("layer.weight", Tensor::uniform(&[4, 3, 3, 3], -1.0, 1.0, &mut rng));
        store.register("layer.bias", Tensor::uniform(&[4], -1.0, 1.0, &mut rng));
        store.register("other.scalarish", Tensor::uniform(&[1], -1.0, 1.0, &mut rng));
        store
    }

    #[test]
    fn test_round_trip_is_bitwise() {
        let store = sample_store(501);
        let bytes = encode(&store);
        let entries = decode(&bytes).unwrap();
        assert_eq!(entries.len(), 3);
        for ((name, tensor), (orig_name, orig)) in entries.iter().zip(store.iter()) {
            assert_eq!(name, orig_name);
            assert_eq!(tensor.shape(), orig.shape());
            for (a, b) in tensor.data().iter().zip(orig.data()) {
                assert_eq!(a.to_bits(), b.to_bits(), "{name} must round-trip bitwise");
            }
        }
    }

    #[test]
    fn test_load_into_store_restores_values() {
        let store = sample_store(503);
        let bytes = encode(&store);
        let mut other = sample_store(504);
        assert!(store.iter().zip(other.iter()).any(|((_, a), (_, b))| a != b));
        load_into_store(&mut other, &decode(&bytes).unwrap()).unwrap();
        for ((_, a), (_, b)) in store.iter().zip(other.iter()) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn test_bad_magic_rejected() {
        let store = sample_store(505);
        let mut bytes = encode(&store);
        bytes[0] = b'X';
        assert!(matches!(decode(&bytes), Err(CheckpointError::BadMagic(_))));
    }

    #[test]
    fn test_unsupported_version_rejected() {
        let store = sample_store(507);
        let mut bytes = encode(&store);
        bytes[4] = 9;
        assert_eq!(decode(&bytes), Err(CheckpointError::UnsupportedVersion(9)));
    }

    #[test]
    fn test_truncation_names_the_failing_element() {
        let store = sample_store(509);
        let bytes = encode(&store);
        // Cutting inside the first tensor's payload names that tensor.
        let cut = &bytes[..bytes.len() - 8];
        match decode(cut) {
            Err(CheckpointError::Truncated { reading }) => {
                assert!(reading.contains("other.scalarish"), "got '{reading}'");
            }
            other => panic!("expected truncation error, got {other:?}"),
        }
        // An empty stream fails at the magic.
        assert_eq!(decode(&[]), Err(CheckpointError::Truncated { reading: "magic".into() }));
    }

    #[test]
    fn test_trailing_bytes_rejected() {
        let store = sample_store(511);
        let mut bytes = encode(&store);
        bytes.push(0);
        assert_eq!(decode(&bytes), Err(CheckpointError::TrailingBytes(1)));
    }

    #[test]
    fn test_non_utf8_name_rejected() {
        let store = sample_store(513);
        let mut bytes = encode(&store);
        // First name starts right after magic+version+count+name_len.
        bytes[16] = 0xFF;
        assert!(matches!(decode(&bytes), Err(CheckpointError::BadName { entry: 0 })));
    }

    #[test]
    fn test_load_reports_name_set_mismatches() {
        let store = sample_store(515);
        let bytes = encode(&store);
        let mut entries = decode(&bytes).unwrap();
        entries[0].0 = "renamed.weight".into();
        let mut target = sample_store(516);
        let err = load_into_store(&mut target, &entries).unwrap_err();
        assert!(err.contains("unexpected parameter 'renamed.weight'"), "{err}");
        assert!(err.contains("missing parameter 'layer.weight'"), "{err}");
    }

    #[test]
    fn test_load_reports_shape_mismatch() {
        let store = sample_store(517);
        let mut entries = decode(&encode(&store)).unwrap();
        entries[1].1 = Tensor::zeros(&[5]);
        let mut target = sample_store(518);
        let err = load_into_store(&mut target, &entries).unwrap_err();
        assert!(err.contains("layer.bias") && err.contains("[5]"), "{err}");
    }

    #[test]
    fn test_empty_store_round_trips() {
        let store = ParamStore::<f32>::new();
        let bytes = encode(&store);
        assert_eq!(bytes.len(), 12);
        assert_eq!(decode(&bytes).unwrap(), vec![]);
    }

    #[test]
    fn test_declared_count_beyond_data_is_truncation_not_allocation() {
        // A count field of u32::MAX must fail fast on the first missing
        // entry rather than trying to reserve memory for it.
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&MAGIC);
        bytes.extend_from_slice(&VERSION.to_le_bytes());
        bytes.extend_from_slice(&u32::MAX.to_le_bytes());
        assert!(matches!(decode(&bytes), Err(CheckpointError::Truncated { .. })));
    }
}
