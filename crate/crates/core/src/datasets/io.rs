//! Dataset files: a magic line, a one-line JSON manifest, then one block per
//! entry (a length-prefixed JSON header followed by the record rows as
//! little-endian f64), and a trailing SHA-256 of everything before it.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

use super::types::{Dataset, DatasetManifest, Family, Split, StateDatasetEntry, StateMeta, FORMAT_VERSION};
use crate::error::{Error, Result};
use crate::homodyne::{Histogram, HomodyneRecord, HomodyneSetting};
use crate::properties::PropertyLabel;

pub const MAGIC: &[u8] = b"STATELAB-DATASET\n";

#[derive(serde::Serialize, serde::Deserialize)]
struct EntryHeader {
    id: u64,
    family: Family,
    split: Split,
    meta: StateMeta,
    labels: Vec<PropertyLabel>,
    records: usize,
}

struct HashingWriter<W: Write> {
    inner: W,
    hasher: Sha256,
}

impl<W: Write> Write for HashingWriter<W> {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        let n = self.inner.write(buf)?;
        self.hasher.update(&buf[..n]);
        Ok(n)
    }

    fn flush(&mut self) -> std::io::Result<()> {
        self.inner.flush()
    }
}

/// Streaming writer; call `finish` after the manifest's `count` entries.
pub struct DatasetWriter<W: Write> {
    out: HashingWriter<W>,
    bins: usize,
    remaining: usize,
}

impl DatasetWriter<BufWriter<File>> {
    pub fn create(path: &Path, manifest: &DatasetManifest) -> Result<Self> {
        Self::new(BufWriter::new(File::create(path)?), manifest)
    }
}

impl<W: Write> DatasetWriter<W> {
    pub fn new(inner: W, manifest: &DatasetManifest) -> Result<Self> {
        let mut out = HashingWriter { inner, hasher: Sha256::new() };
        out.write_all(MAGIC)?;
        serde_json::to_writer(&mut out, manifest)?;
        out.write_all(b"\n")?;
        Ok(Self { out, bins: manifest.bins, remaining: manifest.count })
    }

    pub fn write_entry(&mut self, e: &StateDatasetEntry) -> Result<()> {
        if self.remaining == 0 {
            return Err(Error::Format("more entries than the manifest count".into()));
        }
        let header = EntryHeader {
            id: e.id,
            family: e.family,
            split: e.split,
            meta: e.meta.clone(),
            labels: e.labels.clone(),
            records: e.records.len(),
        };
        let json = serde_json::to_vec(&header)?;
        self.out.write_all(&(json.len() as u64).to_le_bytes())?;
        self.out.write_all(&json)?;
        let mut row = Vec::with_capacity((2 + self.bins) * 8);
        for r in &e.records {
            if r.histogram.bins.len() != self.bins {
                return Err(Error::DimensionMismatch { expected: self.bins, actual: r.histogram.bins.len() });
            }
            row.clear();
            row.extend_from_slice(&(r.setting.mode as f64).to_le_bytes());
            row.extend_from_slice(&r.setting.phase.to_le_bytes());
            for b in &r.histogram.bins {
                row.extend_from_slice(&b.to_le_bytes());
            }
            self.out.write_all(&row)?;
        }
        self.remaining -= 1;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        if self.remaining != 0 {
            return Err(Error::Format(format!("{} entries missing", self.remaining)));
        }
        let digest = self.out.hasher.finalize_reset();
        self.out.inner.write_all(&digest)?;
        self.out.inner.flush()?;
        Ok(self.out.inner)
    }
}

struct HashingReader<R: Read> {
    inner: R,
    hasher: Sha256,
}

impl<R: Read> HashingReader<R> {
    fn read_exact_hashed(&mut self, buf: &mut [u8]) -> Result<()> {
        self.inner.read_exact(buf).map_err(|e| match e.kind() {
            std::io::ErrorKind::UnexpectedEof => Error::Format("truncated dataset file".into()),
            _ => Error::Io(e),
        })?;
        self.hasher.update(&*buf);
        Ok(())
    }
}

/// Streaming reader yielding entries in file order. The checksum is
/// verified once the last entry has been read.
pub struct DatasetReader<R: BufRead> {
    input: HashingReader<R>,
    pub manifest: DatasetManifest,
    remaining: usize,
    failed: bool,
}

impl DatasetReader<BufReader<File>> {
    pub fn open(path: &Path) -> Result<Self> {
        Self::new(BufReader::with_capacity(1 << 20, File::open(path)?))
    }
}

impl<R: BufRead> DatasetReader<R> {
    pub fn new(mut inner: R) -> Result<Self> {
        let mut hasher = Sha256::new();
        let mut line = Vec::new();
        inner.read_until(b'\n', &mut line)?;
        if line != MAGIC {
            return Err(Error::Format("not a dataset file".into()));
        }
        hasher.update(&line);
        line.clear();
        inner.read_until(b'\n', &mut line)?;
        hasher.update(&line);
        let value: serde_json::Value = serde_json::from_slice(&line)?;
        let found = value.get("format_version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
        if found != FORMAT_VERSION {
            return Err(Error::Version { found, expected: FORMAT_VERSION });
        }
        let manifest: DatasetManifest = serde_json::from_value(value)?;
        let remaining = manifest.count;
        let mut reader = Self { input: HashingReader { inner, hasher }, manifest, remaining, failed: false };
        if remaining == 0 {
            reader.verify_checksum()?;
        }
        Ok(reader)
    }

    fn verify_checksum(&mut self) -> Result<()> {
        let expected = self.input.hasher.finalize_reset();
        let mut stored = [0u8; 32];
        self.input.inner.read_exact(&mut stored).map_err(|_| Error::Format("missing checksum".into()))?;
        if stored[..] != expected[..] {
            return Err(Error::Checksum("dataset file".into()));
        }
        Ok(())
    }

    fn read_entry(&mut self) -> Result<StateDatasetEntry> {
        let mut len = [0u8; 8];
        self.input.read_exact_hashed(&mut len)?;
        let len = u64::from_le_bytes(len) as usize;
        if len > 1 << 24 {
            return Err(Error::Format(format!("entry header of {len} bytes")));
        }
        let mut json = vec![0u8; len];
        self.input.read_exact_hashed(&mut json)?;
        let h: EntryHeader = serde_json::from_slice(&json)?;
        let width = 2 + self.manifest.bins;
        let mut raw = vec![0u8; h.records * width * 8];
        self.input.read_exact_hashed(&mut raw)?;
        let vals: Vec<f64> = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect();
        let records = vals
            .chunks_exact(width)
            .map(|row| HomodyneRecord {
                setting: HomodyneSetting { mode: row[0] as usize, phase: row[1] },
                histogram: Histogram { bins: row[2..].to_vec() },
            })
            .collect();
        self.remaining -= 1;
        if self.remaining == 0 {
            self.verify_checksum()?;
        }
        Ok(StateDatasetEntry { id: h.id, family: h.family, split: h.split, meta: h.meta, labels: h.labels, records })
    }
}

impl<R: BufRead> Iterator for DatasetReader<R> {
    type Item = Result<StateDatasetEntry>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.remaining == 0 || self.failed {
            return None;
        }
        let out = self.read_entry();
        self.failed = out.is_err();
        Some(out)
    }
}

pub fn write_dataset<W: Write>(out: W, ds: &Dataset) -> Result<W> {
    if ds.entries.len() != ds.manifest.count {
        return Err(Error::Format(format!("manifest count {} but {} entries", ds.manifest.count, ds.entries.len())));
    }
    let mut w = DatasetWriter::new(out, &ds.manifest)?;
    for e in &ds.entries {
        w.write_entry(e)?;
    }
    w.finish()
}

pub fn read_dataset<R: BufRead>(input: R) -> Result<Dataset> {
    let reader = DatasetReader::new(input)?;
    let manifest = reader.manifest.clone();
    let entries = reader.collect::<Result<Vec<_>>>()?;
    Ok(Dataset { manifest, entries })
}

impl Dataset {
    pub fn save(&self, path: &Path) -> Result<()> {
        write_dataset(BufWriter::new(File::create(path)?), self)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        read_dataset(BufReader::with_capacity(1 << 20, File::open(path)?))
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        write_dataset(Vec::new(), self)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        read_dataset(bytes)
    }
}
