//! Self-describing parameter container with a text manifest sidecar.
//!
//! Layout: the 8-byte magic `SE3MCKPT`, a little-endian `u32` format
//! version, a little-endian `u64` header length, a JSON header naming every
//! tensor (with shape and dtype) and every auxiliary section, then the tensor
//! values as row-major little-endian `f64`, then the raw section bytes.
//!
//! The manifest sidecar (`<file>.manifest`) lists the same entries plus the
//! SHA-256 of the container.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::params::ParamStore;
use super::tensor::Tensor;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"SE3MCKPT";
pub const FORMAT_VERSION: u32 = 1;
pub const DTYPE: &str = "f64-le";

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SectionEntry {
    name: String,
    bytes: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Header {
    format_version: u32,
    dtype: String,
    tensors: Vec<TensorEntry>,
    sections: Vec<SectionEntry>,
    metadata: BTreeMap<String, String>,
}

/// Parameters plus named byte sections and string metadata.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Checkpoint {
    pub params: ParamStore,
    pub sections: BTreeMap<String, Vec<u8>>,
    pub metadata: BTreeMap<String, String>,
}

pub fn manifest_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".manifest");
    PathBuf::from(s)
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

impl Checkpoint {
    pub fn new(params: ParamStore) -> Self {
        Self {
            params,
            ..Self::default()
        }
    }

    pub fn with_section(mut self, name: &str, bytes: Vec<u8>) -> Self {
        self.sections.insert(name.to_string(), bytes);
        self
    }

    pub fn with_metadata(mut self, key: &str, value: impl Into<String>) -> Self {
        self.metadata.insert(key.to_string(), value.into());
        self
    }

    pub fn section_text(&self, name: &str) -> Result<&str> {
        let bytes = self
            .sections
            .get(name)
            .ok_or_else(|| bad(format!("missing section `{name}`")))?;
        std::str::from_utf8(bytes).map_err(|_| bad(format!("section `{name}` is not UTF-8")))
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = Header {
            format_version: FORMAT_VERSION,
            dtype: DTYPE.to_string(),
            tensors: self
                .params
                .iter()
                .map(|(_, p)| TensorEntry {
                    name: p.name.clone(),
                    shape: p.tensor.shape().to_vec(),
                })
                .collect(),
            sections: self
                .sections
                .iter()
                .map(|(name, b)| SectionEntry {
                    name: name.clone(),
                    bytes: b.len(),
                })
                .collect(),
            metadata: self.metadata.clone(),
        };
        let header_bytes = serde_json::to_vec(&header)?;
        let mut out = Vec::with_capacity(20 + header_bytes.len() + self.params.num_scalars() * 8);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(header_bytes.len() as u64).to_le_bytes());
        out.extend_from_slice(&header_bytes);
        for (_, p) in self.params.iter() {
            for v in p.tensor.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        for bytes in self.sections.values() {
            out.extend_from_slice(bytes);
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 20 || &bytes[..8] != MAGIC {
            return Err(bad("not a checkpoint container"));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        if version != FORMAT_VERSION {
            return Err(bad(format!("unsupported format version {version}")));
        }
        let header_len = u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize;
        let mut pos = 20usize;
        let header_end = pos.checked_add(header_len).filter(|&e| e <= bytes.len()).ok_or_else(|| bad("truncated header"))?;
        let header: Header = serde_json::from_slice(&bytes[pos..header_end])?;
        if header.dtype != DTYPE {
            return Err(bad(format!("unsupported dtype {}", header.dtype)));
        }
        pos = header_end;
        let mut params = ParamStore::new();
        for entry in &header.tensors {
            let n: usize = entry.shape.iter().product();
            let end = pos + n * 8;
            if end > bytes.len() {
                return Err(bad(format!("truncated tensor `{}`", entry.name)));
            }
            let values = bytes[pos..end]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            if params.find(&entry.name).is_some() {
                return Err(bad(format!("duplicate tensor `{}`", entry.name)));
            }
            params.add(entry.name.clone(), Tensor::from_vec(&entry.shape, values)?);
            pos = end;
        }
        let mut sections = BTreeMap::new();
        for entry in &header.sections {
            let end = pos + entry.bytes;
            if end > bytes.len() {
                return Err(bad(format!("truncated section `{}`", entry.name)));
            }
            sections.insert(entry.name.clone(), bytes[pos..end].to_vec());
            pos = end;
        }
        if pos != bytes.len() {
            return Err(bad("trailing bytes after the last section"));
        }
        Ok(Self {
            params,
            sections,
            metadata: header.metadata,
        })
    }

    fn manifest_text(&self, checksum: &str) -> String {
        let mut s = format!("format_version {FORMAT_VERSION}\ndtype {DTYPE}\nsha256 {checksum}\n");
        for (_, p) in self.params.iter() {
            let shape: Vec<String> = p.tensor.shape().iter().map(usize::to_string).collect();
            s.push_str(&format!("param {} {}\n", p.name, shape.join("x")));
        }
        for (name, b) in &self.sections {
            s.push_str(&format!("section {name} {}\n", b.len()));
        }
        for (k, v) in &self.metadata {
            s.push_str(&format!("meta {k}={v}\n"));
        }
        s
    }

    /// Writes the container and its manifest sidecar.
    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = self.to_bytes()?;
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        std::fs::write(path, &bytes).map_err(|e| Error::io(path, e))?;
        let manifest = manifest_path(path);
        std::fs::write(&manifest, self.manifest_text(&sha256_hex(&bytes))).map_err(|e| Error::io(&manifest, e))
    }

    /// Reads a container; when a manifest is present its checksum must match.
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let manifest = manifest_path(path);
        if let Ok(text) = std::fs::read_to_string(&manifest) {
            let expected = text
                .lines()
                .find_map(|l| l.strip_prefix("sha256 "))
                .ok_or_else(|| bad("manifest has no checksum"))?;
            if expected.trim() != sha256_hex(&bytes) {
                return Err(bad(format!("checksum mismatch for {}", path.display())));
            }
        }
        Self::from_bytes(&bytes)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}
