//! Binary checkpoint format.
//!
//! ```text
//! offset  size  field
//! 0       8     magic  b"MODECONN"
//! 8       4     version, u32 little-endian (currently 1)
//! 12      4     header length H, u32 little-endian
//! 16      H     UTF-8 JSON header: epoch, spec, schedule, seeds, config_digest, dim
//! 16+H    8·D   parameters, IEEE-754 binary64 little-endian, D = header.dim
//! ```
//!
//! Nothing may follow the payload.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::MlpSpec;
use crate::optim::Scheduler;
use crate::tensor::ParamVector;

pub const MAGIC: &[u8; 8] = b"MODECONN";
pub const VERSION: u32 = 1;

/// Header JSON is capped to keep hostile length prefixes from allocating.
const MAX_HEADER_LEN: usize = 1 << 20;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSeeds {
    /// Drives dataset generation.
    pub data: u64,
    /// Drives initialization, shuffling, augmentation and curve sampling.
    pub run: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub epoch: u64,
    pub params: ParamVector,
    pub spec: MlpSpec,
    pub schedule: Option<Scheduler>,
    pub seeds: RunSeeds,
    pub config_digest: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    epoch: u64,
    spec: MlpSpec,
    schedule: Option<Scheduler>,
    seeds: RunSeeds,
    config_digest: String,
    dim: usize,
}

fn take(bytes: &[u8], at: usize, len: usize) -> Result<&[u8]> {
    let end = at.checked_add(len).ok_or(Error::Truncated {
        needed: usize::MAX,
        available: bytes.len(),
    })?;
    bytes.get(at..end).ok_or(Error::Truncated {
        needed: end,
        available: bytes.len(),
    })
}

fn read_u32(bytes: &[u8], at: usize) -> Result<u32> {
    let raw = take(bytes, at, 4)?;
    Ok(u32::from_le_bytes(raw.try_into().expect("4 bytes")))
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        self.spec.validate()?;
        self.params.check_len(self.spec.num_params())?;
        let header = Header {
            epoch: self.epoch,
            spec: self.spec.clone(),
            schedule: self.schedule.clone(),
            seeds: self.seeds,
            config_digest: self.config_digest.clone(),
            dim: self.params.len(),
        };
        let json = serde_json::to_vec(&header)?;
        let header_len = u32::try_from(json.len())
            .ok()
            .filter(|&n| (n as usize) <= MAX_HEADER_LEN)
            .ok_or_else(|| Error::Format("header too large".into()))?;
        let mut out = Vec::with_capacity(16 + json.len() + 8 * self.params.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&header_len.to_le_bytes());
        out.extend_from_slice(&json);
        for v in self.params.as_slice() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let magic = take(bytes, 0, 8)?;
        if magic != MAGIC {
            return Err(Error::Format("bad magic bytes".into()));
        }
        let version = read_u32(bytes, 8)?;
        if version != VERSION {
            return Err(Error::UnsupportedVersion {
                found: version,
                supported: VERSION,
            });
        }
        let header_len = read_u32(bytes, 12)? as usize;
        if header_len > MAX_HEADER_LEN {
            return Err(Error::Format(format!("header length {header_len} exceeds limit")));
        }
        let header: Header = serde_json::from_slice(take(bytes, 16, header_len)?)
            .map_err(|e| Error::Format(format!("header: {e}")))?;
        header.spec.validate()?;
        if header.dim != header.spec.num_params() {
            return Err(Error::Format(format!(
                "header dim {} does not match spec parameter count {}",
                header.dim,
                header.spec.num_params()
            )));
        }
        let payload = &bytes[16 + header_len..];
        if !payload.len().is_multiple_of(8) {
            return Err(Error::Truncated {
                needed: 16 + header_len + 8 * header.dim,
                available: bytes.len(),
            });
        }
        if payload.len() / 8 != header.dim {
            return Err(Error::PayloadLength {
                declared: header.dim,
                payload: payload.len() / 8,
            });
        }
        let values = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        let params =
            ParamVector::new(values).map_err(|e| Error::Format(format!("payload: {e}")))?;
        if let Some(s) = &header.schedule {
            s.validate()?;
        }
        Ok(Self {
            epoch: header.epoch,
            params,
            spec: header.spec,
            schedule: header.schedule,
            seeds: header.seeds,
            config_digest: header.config_digest,
        })
    }

    /// Writes through a temporary sibling file and renames it into place.
    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = self.to_bytes()?;
        write_atomic(path, &bytes)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::invalid(format!("not a file path: {}", path.display())))?;
    let mut tmp_name = file_name.to_os_string();
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{init_params, Activation};
    use crate::optim::ScheduleConfig;
    use crate::rng::RngStream;

    fn sample() -> Checkpoint {
        let spec = MlpSpec::new(vec![2, 5, 3], Activation::Relu).unwrap();
        let params = init_params(&spec, &mut RngStream::new(1, "init")).unwrap();
        let mut schedule = Scheduler::new(
            ScheduleConfig::Sgdr {
                eta_min: 1e-6,
                eta_max: 0.05,
                t_0: 10,
                t_mult: 2,
            },
            150,
        )
        .unwrap();
        for _ in 0..13 {
            schedule.advance();
        }
        Checkpoint {
            epoch: 13,
            params,
            spec,
            schedule: Some(schedule),
            seeds: RunSeeds { data: 7, run: 11 },
            config_digest: "abc123".into(),
        }
    }

    #[test]
    fn round_trip_all_fields() {
        let c = sample();
        let back = Checkpoint::from_bytes(&c.to_bytes().unwrap()).unwrap();
        assert_eq!(back, c);
        let bits = |p: &ParamVector| p.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back.params), bits(&c.params));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.ckpt");
        let c = sample();
        c.save(&path).unwrap();
        assert_eq!(Checkpoint::load(&path).unwrap(), c);
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
        let missing = Checkpoint::load(&dir.path().join("nope")).unwrap_err();
        assert!(matches!(missing, Error::Io { .. }));
    }

    #[test]
    fn payload_is_little_endian_binary64() {
        let c = sample();
        let bytes = c.to_bytes().unwrap();
        let tail = &bytes[bytes.len() - 8..];
        let last = *c.params.as_slice().last().unwrap();
        assert_eq!(tail, &last.to_le_bytes());
        assert_eq!(&bytes[..8], MAGIC);
        assert_eq!(&bytes[8..12], &1u32.to_le_bytes());
    }

    #[test]
    fn corrupt_magic() {
        let mut bytes = sample().to_bytes().unwrap();
        bytes[0] ^= 0xff;
        assert!(matches!(Checkpoint::from_bytes(&bytes), Err(Error::Format(_))));
    }

    #[test]
    fn unknown_version() {
        let mut bytes = sample().to_bytes().unwrap();
        bytes[8..12].copy_from_slice(&7u32.to_le_bytes());
        assert!(matches!(
            Checkpoint::from_bytes(&bytes),
            Err(Error::UnsupportedVersion { found: 7, .. })
        ));
    }

    #[test]
    fn truncated() {
        let bytes = sample().to_bytes().unwrap();
        for cut in [4, 10, 14, 30, bytes.len() - 3] {
            assert!(
                matches!(Checkpoint::from_bytes(&bytes[..cut]), Err(Error::Truncated { .. })),
                "cut at {cut}"
            );
        }
    }

    #[test]
    fn payload_count_mismatch() {
        let bytes = sample().to_bytes().unwrap();
        let short = &bytes[..bytes.len() - 16];
        assert!(matches!(
            Checkpoint::from_bytes(short),
            Err(Error::PayloadLength { declared: 33, payload: 31 })
        ));
        let mut long = bytes.clone();
        long.extend_from_slice(&0f64.to_le_bytes());
        assert!(matches!(Checkpoint::from_bytes(&long), Err(Error::PayloadLength { .. })));
    }

    #[test]
    fn non_finite_payload_rejected() {
        let mut bytes = sample().to_bytes().unwrap();
        let n = bytes.len();
        bytes[n - 8..].copy_from_slice(&f64::NAN.to_le_bytes());
        assert!(matches!(Checkpoint::from_bytes(&bytes), Err(Error::Format(_))));
    }
}
