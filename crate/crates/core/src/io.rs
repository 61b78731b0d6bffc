//! Output files: CSV series, JSON reports, binary fields and the manifest.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::decay::Series;
use crate::error::{Error, Result};
use crate::grid::ChannelGrid;

pub const MANIFEST: &str = "manifest.json";

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::io(path, std::io::Error::other(e.to_string()))
}

/// Writes `(t, name, value)` rows, series by series.
pub fn write_series_csv(path: &Path, series: &[(&str, &Series)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(["t", "name", "value"]).map_err(|e| csv_err(path, e))?;
    for (name, s) in series {
        for (t, v) in s.times.iter().zip(&s.values) {
            w.write_record([format!("{t:e}"), name.to_string(), format!("{v:e}")])
                .map_err(|e| csv_err(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads `(t, name, value)` rows back, keeping first-appearance order.
pub fn read_series_csv(path: &Path) -> Result<Vec<(String, Series)>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let mut out: Vec<(String, Series)> = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let parse = |k: usize| -> Result<f64> {
            rec.get(k)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::InvalidArgument(format!("{}: bad number in row {:?}", path.display(), rec)))
        };
        let (t, v) = (parse(0)?, parse(2)?);
        let name = rec.get(1).unwrap_or("").to_string();
        match out.iter_mut().find(|(n, _)| *n == name) {
            Some((_, s)) => s.push(t, v),
            None => out.push((name, Series::new(vec![t], vec![v]))),
        }
    }
    Ok(out)
}

/// Writes a table with a header row.
pub fn write_table_csv(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for row in rows {
        w.write_record(row.iter().map(|v| format!("{v:e}"))).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Header describing a flat binary field file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldHeader {
    pub t: f64,
    pub dtype: String,
    /// `[n1, n2, n3]`, row-major with `x1` slowest.
    pub shape: [usize; 3],
    pub half_width: f64,
    pub fields: Vec<String>,
    pub data: String,
}

/// Writes `stem.bin` (little-endian `f64`, fields back to back) and
/// `stem.json`.
pub fn write_field(dir: &Path, stem: &str, grid: &ChannelGrid, t: f64, fields: &[(&str, &[f64])]) -> Result<()> {
    let l = grid.layout();
    let mut bytes = Vec::with_capacity(fields.len() * grid.len() * 8);
    for (_, f) in fields {
        if f.len() != grid.len() {
            return Err(Error::Shape { expected: grid.len(), got: f.len() });
        }
        for v in f.iter() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    let bin = dir.join(format!("{stem}.bin"));
    fs::write(&bin, bytes).map_err(|e| Error::io(&bin, e))?;
    let header = FieldHeader {
        t,
        dtype: "f64le".into(),
        shape: [l.n1, l.n2, l.n3],
        half_width: grid.half_width,
        fields: fields.iter().map(|(n, _)| n.to_string()).collect(),
        data: format!("{stem}.bin"),
    };
    write_json(&dir.join(format!("{stem}.json")), &header)
}

/// Reads one named field written by `write_field`.
pub fn read_field(dir: &Path, stem: &str, name: &str) -> Result<(FieldHeader, Vec<f64>)> {
    let header: FieldHeader = read_json(&dir.join(format!("{stem}.json")))?;
    let k = header
        .fields
        .iter()
        .position(|f| f == name)
        .ok_or_else(|| Error::InvalidArgument(format!("field {name} not in {stem}")))?;
    let n: usize = header.shape.iter().product();
    let bin = dir.join(&header.data);
    let bytes = fs::read(&bin).map_err(|e| Error::io(&bin, e))?;
    if bytes.len() != 8 * n * header.fields.len() {
        return Err(Error::Shape { expected: 8 * n * header.fields.len(), got: bytes.len() });
    }
    let values = bytes[8 * n * k..8 * n * (k + 1)]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Ok((header, values))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckSummary {
    pub id: String,
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub versions: Vec<(String, String)>,
    pub stages: Vec<String>,
    pub files: Vec<FileEntry>,
    pub checks: Vec<CheckSummary>,
    /// False when a stage aborted; the listed files are what was written.
    pub complete: bool,
    pub error: Option<String>,
}

impl RunManifest {
    pub fn new(config_hash: String) -> Self {
        Self {
            config_hash,
            versions: vec![("cwave".into(), env!("CARGO_PKG_VERSION").into())],
            stages: Vec::new(),
            files: Vec::new(),
            checks: Vec::new(),
            complete: false,
            error: None,
        }
    }

    pub fn all_pass(&self) -> bool {
        self.complete && self.checks.iter().all(|c| c.pass)
    }

    /// Lists every file under `dir` (except the manifest) with checksums
    /// and writes `manifest.json`.
    pub fn finish(&mut self, dir: &Path) -> Result<()> {
        let mut files = Vec::new();
        collect_files(dir, dir, &mut files)?;
        files.sort();
        self.files = files
            .into_iter()
            .filter(|p| p != MANIFEST)
            .map(|rel| {
                let path = dir.join(&rel);
                let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
                Ok(FileEntry {
                    sha256: sha256_hex(&bytes),
                    bytes: bytes.len() as u64,
                    path: rel,
                })
            })
            .collect::<Result<_>>()?;
        write_json(&dir.join(MANIFEST), self)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

fn collect_files(root: &Path, dir: &Path, out: &mut Vec<String>) -> Result<()> {
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        if path.is_dir() {
            collect_files(root, &path, out)?;
        } else {
            let rel: PathBuf = path.strip_prefix(root).expect("under root").to_path_buf();
            out.push(rel.to_string_lossy().replace('\\', "/"));
        }
    }
    Ok(())
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn series_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        let a = Series::new(vec![0.0, 0.5, 1.0], vec![1.0, 0.1, 1e-300]);
        let b = Series::new(vec![0.0, 1.0], vec![2.0, 3.25]);
        write_series_csv(&p, &[("a", &a), ("b", &b)]).unwrap();
        let back = read_series_csv(&p).unwrap();
        assert_eq!(back, vec![("a".to_string(), a), ("b".to_string(), b)]);
    }

    #[test]
    fn field_round_trip_and_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let g = ChannelGrid::new(2.0, 5, vec![3]).unwrap();
        let u: Vec<f64> = (0..g.len()).map(|k| k as f64 * 0.1).collect();
        let phi: Vec<f64> = u.iter().map(|v| -v).collect();
        write_field(dir.path(), "f", &g, 1.5, &[("u", &u), ("phi", &phi)]).unwrap();
        let (h, back) = read_field(dir.path(), "f", "phi").unwrap();
        assert_eq!(h.shape, [5, 3, 1]);
        assert_eq!(back, phi);
        let mut m = RunManifest::new("abc".into());
        m.complete = true;
        m.finish(dir.path()).unwrap();
        let names: Vec<&str> = m.files.iter().map(|f| f.path.as_str()).collect();
        assert_eq!(names, vec!["f.bin", "f.json"]);
        assert_eq!(m.files[0].sha256, sha256_hex(&fs::read(dir.path().join("f.bin")).unwrap()));
    }
}
