//! Single-file index persistence. Layout in `docs/index-format.md`.

use std::io::Write;
use std::path::Path;

use super::{Embedding, IndexError, IndexedDoc, VectorIndex, NORM_TOLERANCE};
use crate::scalar::Scalar;

const MAGIC: &[u8; 8] = b"SPQLIDX\0";
const VERSION: u32 = 1;

pub(super) fn encode<S: Scalar>(index: &VectorIndex<S>) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(S::BYTES as u8);
    out.extend_from_slice(&(index.dimension as u32).to_le_bytes());
    out.extend_from_slice(&(index.fingerprint.len() as u32).to_le_bytes());
    out.extend_from_slice(index.fingerprint.as_bytes());
    out.extend_from_slice(&(index.entries.len() as u64).to_le_bytes());
    for entry in &index.entries {
        let json = serde_json::to_vec(&entry.doc).expect("documents serialize");
        out.extend_from_slice(&(json.len() as u32).to_le_bytes());
        out.extend_from_slice(&json);
        for &v in entry.embedding.as_slice() {
            v.write_le(&mut out);
        }
    }
    out
}

/// Write the index next to `path` then rename it into place, so readers
/// never see a half-written file.
pub fn save<S: Scalar>(index: &VectorIndex<S>, path: &Path) -> Result<(), IndexError> {
    let bytes = encode(index);
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let file_name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "index".into());
    let tmp = dir.join(format!(".{file_name}.tmp{}", std::process::id()));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(&bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], IndexError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| IndexError::CorruptIndex(format!("truncated while reading {what}")))?;
        let slice = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn u32(&mut self, what: &str) -> Result<u32, IndexError> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes(b.try_into().expect("4 bytes")))
    }

    fn u64(&mut self, what: &str) -> Result<u64, IndexError> {
        let b = self.take(8, what)?;
        Ok(u64::from_le_bytes(b.try_into().expect("8 bytes")))
    }
}

pub(super) fn decode<S: Scalar>(bytes: &[u8]) -> Result<VectorIndex<S>, IndexError> {
    let corrupt = |m: String| IndexError::CorruptIndex(m);
    let mut r = Reader { bytes, pos: 0 };
    if r.take(MAGIC.len(), "magic")? != MAGIC {
        return Err(corrupt("not an index file".into()));
    }
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(corrupt(format!("unsupported format version {version}")));
    }
    let width = r.take(1, "scalar width")?[0] as usize;
    if width != S::BYTES {
        return Err(corrupt(format!("stored {width}-byte floats, expected {}", S::BYTES)));
    }
    let dimension = r.u32("dimension")? as usize;
    let fp_len = r.u32("fingerprint length")? as usize;
    let fingerprint = std::str::from_utf8(r.take(fp_len, "fingerprint")?)
        .map_err(|_| corrupt("fingerprint is not UTF-8".into()))?
        .to_string();
    let count = r.u64("document count")?;
    let mut index = VectorIndex::new(dimension, fingerprint);
    for i in 0..count {
        let len = r.u32("record length")? as usize;
        let doc: IndexedDoc =
            serde_json::from_slice(r.take(len, "record")?).map_err(|e| corrupt(format!("record {i}: {e}")))?;
        let raw = r.take(
            dimension
                .checked_mul(S::BYTES)
                .ok_or_else(|| corrupt("dimension too large".into()))?,
            "vector",
        )?;
        let values: Vec<S> = raw.chunks_exact(S::BYTES).map(S::read_le).collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(corrupt(format!("record {i}: non-finite vector component")));
        }
        let norm = values.iter().map(|v| v.to_f64().unwrap_or(f64::NAN).powi(2)).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(corrupt(format!("record {i}: vector norm {norm} is not 1")));
        }
        index.entries.push(super::IndexEntry {
            doc,
            embedding: Embedding::from_unit(values),
        });
    }
    if r.pos != bytes.len() {
        return Err(corrupt(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    Ok(index)
}

/// Read an index file. With `expected_fingerprint`, an index built by a
/// different embedding provider is refused.
pub fn load<S: Scalar>(path: &Path, expected_fingerprint: Option<&str>) -> Result<VectorIndex<S>, IndexError> {
    let bytes = std::fs::read(path)?;
    let index = decode(&bytes)?;
    if let Some(expected) = expected_fingerprint {
        if index.fingerprint != expected {
            return Err(IndexError::ProviderMismatch {
                expected: expected.to_string(),
                found: index.fingerprint,
            });
        }
    }
    Ok(index)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb_index::DocKind;

    #[test]
    fn every_truncation_is_corrupt() {
        let mut index = VectorIndex::<f32>::new(3, "hash:v1:d3");
        let doc = IndexedDoc::new(DocKind::ExampleQuery, "q", "SELECT * {}", "e", None).unwrap();
        index.insert(doc, Embedding::normalized(vec![1.0, 2.0, 3.0])).unwrap();
        let bytes = encode(&index);
        assert_eq!(decode::<f32>(&bytes).unwrap(), index);
        for cut in 0..bytes.len() {
            assert!(
                matches!(decode::<f32>(&bytes[..cut]), Err(IndexError::CorruptIndex(_))),
                "cut {cut}"
            );
        }
        assert!(matches!(decode::<f64>(&bytes), Err(IndexError::CorruptIndex(_))));
    }

    #[test]
    fn non_unit_vectors_are_rejected() {
        let mut index = VectorIndex::<f64>::new(2, "t");
        let doc = IndexedDoc::new(DocKind::ClassShape, "s", "p", "e", None).unwrap();
        index.insert(doc, Embedding::from_unit(vec![0.6, 0.8])).unwrap();
        let mut bytes = encode(&index);
        assert!(decode::<f64>(&bytes).is_ok());
        // Overwrite the last component: 0.8 -> 0.81.
        let n = bytes.len();
        bytes[n - 8..].copy_from_slice(&0.81f64.to_le_bytes());
        let err = decode::<f64>(&bytes).unwrap_err();
        assert!(err.to_string().contains("norm"), "{err}");
    }
}
