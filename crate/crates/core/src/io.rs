//! On-disk formats.
//!
//! * KLB1 — dense little-endian f64 arrays: `b"KLB1"`, `u32` rank, `rank`
//!   × `u64` dims, the payload, then a CRC32 of everything before it.
//! * CSV — `#`-prefixed header block (`# key: value`), one column-name line,
//!   then rows. Floats are written in shortest round-trip form.
//! * JSON — sidecars and manifests via serde.
//!
//! Every writer goes through [`atomic_write`], so a crash never leaves a
//! half-written file under the final name.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{de::DeserializeOwned, Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"KLB1";

#[derive(Clone, Debug, PartialEq)]
pub struct Array {
    pub dims: Vec<usize>,
    pub data: Vec<f64>,
}

impl Array {
    pub fn new(dims: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let expect: usize = dims.iter().product();
        if expect != data.len() {
            return Err(Error::Contract(format!("array dims {dims:?} need {expect} values, got {}", data.len())));
        }
        Ok(Array { dims, data })
    }

    pub fn vector(data: Vec<f64>) -> Self {
        Array { dims: vec![data.len()], data }
    }

    /// Row-major rank-2 array from equal-length rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Contract("ragged rows".into()));
        }
        Ok(Array { dims: vec![rows.len(), cols], data: rows.concat() })
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        match self.dims.as_slice() {
            [_, c] if *c > 0 => self.data.chunks(*c).map(<[f64]>::to_vec).collect(),
            [r, _] => vec![Vec::new(); *r],
            _ => vec![self.data.clone()],
        }
    }
}

pub fn encode_klb1(a: &Array) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + 8 * a.dims.len() + 8 * a.data.len() + 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(a.dims.len() as u32).to_le_bytes());
    for &d in &a.dims {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for &v in &a.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

pub fn decode_klb1(bytes: &[u8], path: &Path) -> Result<Array> {
    let bad = |msg: &str| Error::format(path, msg);
    if bytes.len() < 12 || &bytes[..4] != MAGIC {
        return Err(bad("missing KLB1 magic"));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().unwrap());
    if crc32fast::hash(body) != stored {
        return Err(bad("CRC32 mismatch"));
    }
    let rank = u32::from_le_bytes(body[4..8].try_into().unwrap()) as usize;
    let header = 8 + 8 * rank;
    if body.len() < header {
        return Err(bad("truncated header"));
    }
    let dims: Vec<usize> =
        body[8..header].chunks_exact(8).map(|c| u64::from_le_bytes(c.try_into().unwrap()) as usize).collect();
    let count = dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d)).ok_or_else(|| bad("dims overflow"))?;
    let payload = &body[header..];
    if payload.len() != 8 * count {
        return Err(bad("payload length does not match dims"));
    }
    let data = payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    Ok(Array { dims, data })
}

pub fn write_klb1(path: &Path, a: &Array) -> Result<()> {
    atomic_write(path, &encode_klb1(a))
}

pub fn read_klb1(path: &Path) -> Result<Array> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_klb1(&bytes, path)
}

/// Columnar table with a metadata header.
#[derive(Clone, Debug, PartialEq)]
pub struct CsvTable {
    pub meta: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl CsvTable {
    pub fn new(columns: &[&str]) -> Self {
        CsvTable { meta: Vec::new(), columns: columns.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn meta(mut self, key: &str, value: impl ToString) -> Self {
        self.meta.push((key.to_string(), value.to_string()));
        self
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn get_meta(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.meta {
            s.push_str(&format!("# {k}: {v}\n"));
        }
        s.push_str(&self.columns.join(","));
        s.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut meta = Vec::new();
        let mut lines = text.lines();
        let mut header = None;
        for line in lines.by_ref() {
            if let Some(rest) = line.strip_prefix('#') {
                let (k, v) = rest.split_once(':').ok_or_else(|| Error::format(path, "header line without ':'"))?;
                meta.push((k.trim().to_string(), v.trim().to_string()));
            } else {
                header = Some(line);
                break;
            }
        }
        let header = header.ok_or_else(|| Error::format(path, "no column line"))?;
        let columns: Vec<String> = header.split(',').map(|c| c.trim().to_string()).collect();
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let row: std::result::Result<Vec<f64>, _> = line.split(',').map(|c| c.trim().parse::<f64>()).collect();
            let row = row.map_err(|e| Error::format(path, format!("row {}: {e}", i + 1)))?;
            if row.len() != columns.len() {
                return Err(Error::format(path, format!("row {} has {} cells, expected {}", i + 1, row.len(), columns.len())));
            }
            rows.push(row);
        }
        Ok(CsvTable { meta, columns, rows })
    }
}

pub fn write_csv(path: &Path, t: &CsvTable) -> Result<()> {
    atomic_write(path, t.to_text().as_bytes())
}

pub fn read_csv(path: &Path) -> Result<CsvTable> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    CsvTable::parse(&text, path)
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::format(path, e.to_string()))?;
    text.push('\n');
    atomic_write(path, text.as_bytes())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
}

/// Scalar with an explicit unit system tag.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tagged {
    pub value: f64,
    pub unit: String,
}

impl Tagged {
    pub fn natural(value: f64) -> Self {
        Tagged { value, unit: "natural".into() }
    }
    pub fn atomic(value: f64) -> Self {
        Tagged { value, unit: "a.u.".into() }
    }
}

/// Write to a sibling temporary file, sync, then rename over `path`.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().ok_or_else(|| Error::format(path, "not a file path"))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let write = || -> std::io::Result<()> {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()
    };
    if let Err(e) = write() {
        let _ = fs::remove_file(&tmp);
        return Err(Error::io(path, e));
    }
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn file_sha256(path: &Path) -> Result<String> {
    Ok(sha256_hex(&fs::read(path).map_err(|e| Error::io(path, e))?))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Relative to the manifest's directory.
    pub path: PathBuf,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    /// Seconds since the Unix epoch.
    pub created: u64,
    /// The configuration document the run was started from.
    pub config: String,
    pub files: Vec<ManifestEntry>,
    pub timings: Vec<(String, f64)>,
}

impl RunManifest {
    pub fn new(config: String) -> Self {
        let created = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        RunManifest {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            created,
            config,
            files: Vec::new(),
            timings: Vec::new(),
        }
    }

    /// Record `rel` (relative to `root`) with its current checksum.
    pub fn add_file(&mut self, root: &Path, rel: impl Into<PathBuf>) -> Result<()> {
        let rel = rel.into();
        let full = root.join(&rel);
        let bytes = fs::read(&full).map_err(|e| Error::io(&full, e))?;
        self.files.push(ManifestEntry { path: rel, sha256: sha256_hex(&bytes), bytes: bytes.len() as u64 });
        Ok(())
    }

    /// Paths whose content no longer matches (or that vanished).
    pub fn verify(&self, root: &Path) -> Vec<PathBuf> {
        self.files
            .iter()
            .filter(|e| file_sha256(&root.join(&e.path)).map_or(true, |h| h != e.sha256))
            .map(|e| e.path.clone())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn klb1_layout() {
        let a = Array::new(vec![2, 3], vec![1.0, -2.5, 0.0, f64::MIN_POSITIVE, 1e300, -0.0]).unwrap();
        let bytes = encode_klb1(&a);
        assert_eq!(&bytes[..4], b"KLB1");
        assert_eq!(bytes.len(), 4 + 4 + 16 + 48 + 4);
        let back = decode_klb1(&bytes, Path::new("mem")).unwrap();
        assert_eq!(back.dims, a.dims);
        assert!(back.data.iter().zip(&a.data).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn corrupted_payload_is_detected() {
        let mut bytes = encode_klb1(&Array::vector(vec![1.0, 2.0]));
        bytes[12] ^= 1;
        assert!(matches!(decode_klb1(&bytes, Path::new("x")), Err(Error::Format { .. })));
    }

    #[test]
    fn csv_keeps_meta_and_bits() {
        let mut t = CsvTable::new(&["E_over_c2", "rho"]).meta("case", "I").meta("t", 50);
        t.push(vec![1.1, 0.1 + 0.2]);
        t.push(vec![1.0 / 3.0, 2.0e-17]);
        let back = CsvTable::parse(&t.to_text(), Path::new("m")).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.get_meta("t"), Some("50"));
    }

    #[test]
    fn atomic_write_leaves_no_temporaries() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.json");
        write_json(&p, &Tagged::natural(2.5)).unwrap();
        write_json(&p, &Tagged::atomic(3.0)).unwrap();
        let names: Vec<_> = fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
        assert_eq!(names.len(), 1);
        assert!(fs::read_to_string(&p).unwrap().contains("a.u."));
    }

    #[test]
    fn manifest_detects_edits() {
        let dir = tempfile::tempdir().unwrap();
        atomic_write(&dir.path().join("f.csv"), b"x\n1\n").unwrap();
        let mut m = RunManifest::new(String::new());
        m.add_file(dir.path(), "f.csv").unwrap();
        assert!(m.verify(dir.path()).is_empty());
        atomic_write(&dir.path().join("f.csv"), b"x\n2\n").unwrap();
        assert_eq!(m.verify(dir.path()), vec![PathBuf::from("f.csv")]);
    }
}
