//! Binary checkpoint format.
//!
//! ```text
//! magic      8 bytes  "DLABQNET"
//! version    u32 LE
//! meta_len   u32 LE
//! meta       meta_len bytes of JSON (CheckpointMeta)
//! count      u64 LE   number of f64 parameters
//! params     count * f64 LE, layer by layer (weights then bias)
//! ```

use serde::{Deserialize, Serialize};

use super::{Dense, DuelingNet};
use crate::error::{Error, Result};
use crate::perception::ObservationLayout;

pub const MAGIC: &[u8; 8] = b"DLABQNET";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    /// `(inputs, outputs)` per layer: trunk, value, advantage.
    pub shapes: Vec<[usize; 2]>,
    pub layout: ObservationLayout,
    pub actions: usize,
    pub config_hash: String,
    pub role: String,
    pub tag: String,
    /// Agent decision steps taken (drives the exploration schedule).
    pub steps: u64,
    pub learn_steps: u64,
    pub episodes: u64,
}

pub fn serialize_params(params: &DuelingNet, meta: &CheckpointMeta) -> Vec<u8> {
    let meta_json = serde_json::to_vec(meta).expect("metadata serializes");
    let count = params.param_count();
    let mut out = Vec::with_capacity(24 + meta_json.len() + 8 * count);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(meta_json.len() as u32).to_le_bytes());
    out.extend_from_slice(&meta_json);
    out.extend_from_slice(&(count as u64).to_le_bytes());
    for s in params.slices() {
        for x in s {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            Error::CorruptCheckpoint(format!("truncated at byte {} (wanted {n} more)", self.pos))
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Reads only the header and metadata.
pub fn read_meta(bytes: &[u8]) -> Result<CheckpointMeta> {
    let mut r = Reader { bytes, pos: 0 };
    read_header(&mut r)
}

fn read_header(r: &mut Reader) -> Result<CheckpointMeta> {
    if r.take(8)? != MAGIC {
        return Err(Error::CorruptCheckpoint("bad magic bytes".into()));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::VersionMismatch(format!("format version {version}, expected {FORMAT_VERSION}")));
    }
    let len = r.u32()? as usize;
    serde_json::from_slice(r.take(len)?).map_err(|e| Error::CorruptCheckpoint(format!("metadata: {e}")))
}

/// Decodes a checkpoint. With `expected` set, the stored observation layout
/// must match it exactly.
pub fn deserialize_params(
    bytes: &[u8],
    expected: Option<&ObservationLayout>,
) -> Result<(CheckpointMeta, DuelingNet)> {
    let mut r = Reader { bytes, pos: 0 };
    let meta = read_header(&mut r)?;
    if let Some(layout) = expected {
        if meta.layout != *layout {
            return Err(Error::VersionMismatch(format!(
                "checkpoint observation layout {:?} does not match run layout {:?}",
                meta.layout, layout
            )));
        }
    }
    if meta.shapes.len() < 2 {
        return Err(Error::CorruptCheckpoint("fewer than two layers".into()));
    }
    let n_trunk = meta.shapes.len() - 2;
    for w in meta.shapes[..n_trunk + 1].windows(2) {
        if w[0][1] != w[1][0] {
            return Err(Error::CorruptCheckpoint(format!("layer shapes do not chain: {:?}", meta.shapes)));
        }
    }
    let head_in = meta.shapes[n_trunk][0];
    let [adv_in, adv_out] = meta.shapes[n_trunk + 1];
    if adv_in != head_in || meta.shapes[n_trunk][1] != 1 || adv_out != meta.actions {
        return Err(Error::CorruptCheckpoint(format!("bad head shapes: {:?}", meta.shapes)));
    }
    if meta.shapes[0][0] != meta.layout.len() {
        return Err(Error::CorruptCheckpoint("input width disagrees with observation layout".into()));
    }
    let count = r.u64()? as usize;
    let expected_count: usize = meta.shapes.iter().map(|[i, o]| i * o + o).sum();
    if count != expected_count {
        return Err(Error::CorruptCheckpoint(format!("{count} parameters stored, shapes need {expected_count}")));
    }
    let blob = r.take(count * 8)?;
    if r.pos != bytes.len() {
        return Err(Error::CorruptCheckpoint(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    let mut values = blob.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap()));
    let mut layer = |[i, o]: [usize; 2]| Dense {
        inputs: i,
        outputs: o,
        weights: values.by_ref().take(i * o).collect(),
        bias: values.by_ref().take(o).collect(),
    };
    let trunk = meta.shapes[..n_trunk].iter().map(|s| layer(*s)).collect();
    let value = layer(meta.shapes[n_trunk]);
    let advantage = layer(meta.shapes[n_trunk + 1]);
    Ok((meta, DuelingNet { trunk, value, advantage }))
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn fixture(beams: usize) -> (DuelingNet, CheckpointMeta) {
        let layout = ObservationLayout { beams, frames: 4 };
        let net = DuelingNet::new(layout.len(), &[16, 8], 9, &mut ChaCha8Rng::seed_from_u64(1));
        let meta = CheckpointMeta {
            shapes: net.shapes(),
            layout,
            actions: 9,
            config_hash: "abc".into(),
            role: "protagonist".into(),
            tag: "test".into(),
            steps: 12,
            learn_steps: 3,
            episodes: 1,
        };
        (net, meta)
    }

    #[test]
    fn round_trip_is_exact() {
        let (net, meta) = fixture(36);
        let bytes = serialize_params(&net, &meta);
        let (m2, n2) = deserialize_params(&bytes, Some(&meta.layout)).unwrap();
        assert_eq!(m2, meta);
        assert_eq!(n2, net);
        assert_eq!(serialize_params(&n2, &m2), bytes);
    }

    #[test]
    fn truncated_is_corrupt() {
        let (net, meta) = fixture(36);
        let bytes = serialize_params(&net, &meta);
        for cut in [4, 20, bytes.len() - 1] {
            assert!(matches!(deserialize_params(&bytes[..cut], None), Err(Error::CorruptCheckpoint(_))));
        }
    }

    #[test]
    fn layout_mismatch_is_rejected() {
        let (net, meta) = fixture(36);
        let bytes = serialize_params(&net, &meta);
        let other = ObservationLayout { beams: 24, frames: 4 };
        assert!(matches!(deserialize_params(&bytes, Some(&other)), Err(Error::VersionMismatch(_))));
    }

    #[test]
    fn future_version_is_rejected() {
        let (net, meta) = fixture(36);
        let mut bytes = serialize_params(&net, &meta);
        bytes[8..12].copy_from_slice(&2u32.to_le_bytes());
        assert!(matches!(deserialize_params(&bytes, None), Err(Error::VersionMismatch(_))));
    }
}
