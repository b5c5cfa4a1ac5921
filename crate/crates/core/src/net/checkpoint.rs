//! Checkpoint files.
//!
//! Binary layout: the 8-byte magic `CFGENCK1`, a little-endian `u64` header
//! length, the JSON header, then little-endian `f64` values for θ followed by
//! the Adam first and second moments when present. The JSON form holds the
//! same header with the vectors inlined. [`load_checkpoint`] accepts both.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AdamConfig, AdamState, MlpParams, NetArch};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"CFGENCK1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckpointFormat {
    Binary,
    Json,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub params: MlpParams,
    pub seed: u64,
    /// Number of completed training epochs.
    pub step: u64,
    pub adam: Option<AdamState>,
    /// Caller-defined data, stored verbatim.
    pub meta: serde_json::Value,
}

#[derive(Serialize, Deserialize)]
struct AdamHeader {
    t: u64,
    config: AdamConfig,
}

#[derive(Serialize, Deserialize)]
struct Header {
    arch: NetArch,
    seed: u64,
    step: u64,
    param_count: usize,
    adam: Option<AdamHeader>,
    #[serde(default)]
    meta: serde_json::Value,
}

#[derive(Serialize, Deserialize)]
struct JsonCheckpoint {
    #[serde(flatten)]
    header: Header,
    theta: Vec<f64>,
    #[serde(default)]
    adam_m: Option<Vec<f64>>,
    #[serde(default)]
    adam_v: Option<Vec<f64>>,
}

impl Checkpoint {
    fn header(&self) -> Header {
        Header {
            arch: self.params.arch().clone(),
            seed: self.seed,
            step: self.step,
            param_count: self.params.len(),
            adam: self.adam.as_ref().map(|a| AdamHeader {
                t: a.t,
                config: a.config,
            }),
            meta: self.meta.clone(),
        }
    }

    fn from_parts(header: Header, theta: Vec<f64>, moments: Option<(Vec<f64>, Vec<f64>)>) -> Result<Self> {
        if header.param_count != header.arch.param_count() {
            return Err(Error::Checkpoint(format!(
                "header declares {} parameters, architecture has {}",
                header.param_count,
                header.arch.param_count()
            )));
        }
        let params = MlpParams::from_theta(header.arch, theta)?;
        let adam = match (header.adam, moments) {
            (None, None) => None,
            (Some(h), Some((m, v))) => {
                if m.len() != params.len() || v.len() != params.len() {
                    return Err(Error::Checkpoint("Adam moment length mismatch".into()));
                }
                h.config.validate()?;
                Some(AdamState {
                    config: h.config,
                    t: h.t,
                    m,
                    v,
                })
            }
            _ => return Err(Error::Checkpoint("Adam header and moments disagree".into())),
        };
        Ok(Self {
            params,
            seed: header.seed,
            step: header.step,
            adam,
            meta: header.meta,
        })
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = serde_json::to_vec(&self.header())?;
        let p = self.params.len();
        let blobs = if self.adam.is_some() { 3 * p } else { p };
        let mut out = Vec::with_capacity(16 + header.len() + 8 * blobs);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        let mut put = |xs: &[f64]| xs.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes()));
        put(self.params.theta());
        if let Some(a) = &self.adam {
            put(&a.m);
            put(&a.v);
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() >= MAGIC.len() && &bytes[..MAGIC.len()] == MAGIC {
            Self::from_binary(&bytes[MAGIC.len()..])
        } else {
            let doc: JsonCheckpoint = serde_json::from_slice(bytes)?;
            let moments = match (doc.adam_m, doc.adam_v) {
                (Some(m), Some(v)) => Some((m, v)),
                (None, None) => None,
                _ => return Err(Error::Checkpoint("only one Adam moment present".into())),
            };
            Self::from_parts(doc.header, doc.theta, moments)
        }
    }

    fn from_binary(rest: &[u8]) -> Result<Self> {
        let truncated = || Error::Checkpoint("truncated file".into());
        let len_bytes: [u8; 8] = rest.get(..8).ok_or_else(truncated)?.try_into().unwrap();
        let hlen = usize::try_from(u64::from_le_bytes(len_bytes)).map_err(|_| truncated())?;
        let header_end = 8usize.checked_add(hlen).ok_or_else(truncated)?;
        let header: Header = serde_json::from_slice(rest.get(8..header_end).ok_or_else(truncated)?)?;
        let body = &rest[header_end..];
        let p = header.param_count;
        let expected = if header.adam.is_some() { 3 * p } else { p };
        if body.len() != 8 * expected {
            return Err(Error::Checkpoint(format!(
                "expected {} bytes of parameters, found {}",
                8 * expected,
                body.len()
            )));
        }
        let mut values = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
        let mut take = |k: usize| values.by_ref().take(k).collect::<Vec<f64>>();
        let theta = take(p);
        let moments = header.adam.as_ref().map(|_| (take(p), take(p)));
        Self::from_parts(header, theta, moments)
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = JsonCheckpoint {
            header: self.header(),
            theta: self.params.theta().to_vec(),
            adam_m: self.adam.as_ref().map(|a| a.m.clone()),
            adam_v: self.adam.as_ref().map(|a| a.v.clone()),
        };
        Ok(serde_json::to_string(&doc)?)
    }
}

pub fn save_checkpoint(path: impl AsRef<Path>, checkpoint: &Checkpoint, format: CheckpointFormat) -> Result<()> {
    let bytes = match format {
        CheckpointFormat::Binary => checkpoint.to_bytes()?,
        CheckpointFormat::Json => checkpoint.to_json()?.into_bytes(),
    };
    // Write then rename so an interrupted save keeps the previous file.
    let path = path.as_ref();
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(&bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    Checkpoint::from_bytes(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::init_mlp;
    use crate::numkit::seed_stream;

    fn sample() -> Checkpoint {
        let arch = NetArch::new(2, vec![3, 4], 2).unwrap();
        let params = init_mlp(&arch, &mut seed_stream(4)).unwrap();
        let mut adam = AdamState::new(params.len(), AdamConfig::default()).unwrap();
        adam.t = 7;
        adam.m.iter_mut().enumerate().for_each(|(i, v)| *v = i as f64 * 0.1);
        adam.v.iter_mut().enumerate().for_each(|(i, v)| *v = 1.0 / (1.0 + i as f64));
        Checkpoint {
            params,
            seed: 99,
            step: 12,
            adam: Some(adam),
            meta: serde_json::json!({"note": "x"}),
        }
    }

    #[test]
    fn binary_round_trip() {
        let c = sample();
        assert_eq!(Checkpoint::from_bytes(&c.to_bytes().unwrap()).unwrap(), c);
    }

    #[test]
    fn json_round_trip_is_exact() {
        let c = sample();
        let back = Checkpoint::from_bytes(c.to_json().unwrap().as_bytes()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn file_round_trip_both_formats() {
        let dir = tempfile::tempdir().unwrap();
        let c = sample();
        for f in [CheckpointFormat::Binary, CheckpointFormat::Json] {
            let p = dir.path().join("ck");
            save_checkpoint(&p, &c, f).unwrap();
            assert_eq!(load_checkpoint(&p).unwrap(), c);
        }
    }

    #[test]
    fn truncated_binary_rejected() {
        let bytes = sample().to_bytes().unwrap();
        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 3]).is_err());
        assert!(Checkpoint::from_bytes(&bytes[..10]).is_err());
    }
}
