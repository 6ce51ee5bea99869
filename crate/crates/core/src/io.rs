//! Checkpoint and dataset files.
//!
//! Both are UTF-8 JSON objects. Every float is printed with 17 significant
//! digits (`{:.16e}`), which round-trips `f64` exactly.
//!
//! Checkpoint: `{"d", "m", "W": [[..m..] x d], "alpha": [..m..], "meta": {..}}`.
//! Dataset: `{"n", "d", "X": [[..d..] x n], "y": [..n..]}`.
//! Path profile: CSV with header `t,loss,R_W,R_alpha,stable_rank`.

use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::numerics::Mat;
use crate::paths::{PathProfile, PROFILE_HEADER};
use crate::relu_net::{Dataset, TwoLayerNet};

/// Pretty JSON with 17-significant-digit floats.
pub struct Digits17<'a>(PrettyFormatter<'a>);

impl Default for Digits17<'_> {
    fn default() -> Self {
        Self(PrettyFormatter::with_indent(b"  "))
    }
}

impl Formatter for Digits17<'_> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{value:.16e}")
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn to_text<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Digits17::default());
    value
        .serialize(&mut ser)
        .map_err(|e| Error::Parse(e.to_string()))?;
    buf.push(b'\n');
    String::from_utf8(buf).map_err(|e| Error::Parse(e.to_string()))
}

pub fn from_text<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
        }
    }
    fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn mat_rows(m: &Mat) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

fn rows_mat(rows: &[Vec<f64>], ncols: usize, what: &str) -> Result<Mat> {
    if rows.is_empty() {
        return Ok(Mat::zeros(0, ncols));
    }
    let m = Mat::from_rows(rows)?;
    if m.cols() != ncols {
        return Err(Error::Parse(format!("{what} rows have {} entries, expected {ncols}", m.cols())));
    }
    Ok(m)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointFile {
    pub d: usize,
    pub m: usize,
    #[serde(rename = "W")]
    pub w: Vec<Vec<f64>>,
    pub alpha: Vec<f64>,
    #[serde(default)]
    pub meta: Map<String, Value>,
}

impl CheckpointFile {
    pub fn from_net(net: &TwoLayerNet, meta: Map<String, Value>) -> Self {
        Self {
            d: net.dim(),
            m: net.width(),
            w: mat_rows(&net.w),
            alpha: net.alpha.clone(),
            meta,
        }
    }

    pub fn to_net(&self) -> Result<TwoLayerNet> {
        if self.w.len() != self.d || self.alpha.len() != self.m {
            return Err(Error::Parse(format!(
                "checkpoint declares d={}, m={} but holds {} rows and {} alpha entries",
                self.d,
                self.m,
                self.w.len(),
                self.alpha.len()
            )));
        }
        TwoLayerNet::new(rows_mat(&self.w, self.m, "W")?, self.alpha.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetFile {
    pub n: usize,
    pub d: usize,
    #[serde(rename = "X")]
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
}

impl DatasetFile {
    pub fn from_dataset(data: &Dataset) -> Self {
        Self {
            n: data.n(),
            d: data.d(),
            x: mat_rows(&data.x),
            y: data.y.clone(),
        }
    }

    pub fn to_dataset(&self) -> Result<Dataset> {
        if self.x.len() != self.n || self.y.len() != self.n {
            return Err(Error::Parse(format!(
                "dataset declares n={} but holds {} rows and {} targets",
                self.n,
                self.x.len(),
                self.y.len()
            )));
        }
        Dataset::new(rows_mat(&self.x, self.d, "X")?, self.y.clone())
    }
}

pub fn write_checkpoint(path: &Path, net: &TwoLayerNet, meta: Map<String, Value>) -> Result<()> {
    write_text(path, &to_text(&CheckpointFile::from_net(net, meta))?)
}

pub fn read_checkpoint(path: &Path) -> Result<(TwoLayerNet, Map<String, Value>)> {
    let f: CheckpointFile = from_text(&read_text(path)?)?;
    Ok((f.to_net()?, f.meta))
}

pub fn write_dataset(path: &Path, data: &Dataset) -> Result<()> {
    write_text(path, &to_text(&DatasetFile::from_dataset(data))?)
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    from_text::<DatasetFile>(&read_text(path)?)?.to_dataset()
}

pub fn profile_csv(profile: &PathProfile) -> String {
    let mut out = PROFILE_HEADER.join(",");
    out.push('\n');
    for row in profile.rows() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// Rows of a profile CSV in header order. Columns may appear in any order;
/// a missing column is a parse error.
pub fn parse_profile_csv(text: &str) -> Result<Vec<[f64; 5]>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<&str> = lines.next().unwrap_or("").split(',').map(str::trim).collect();
    let mut idx = [0usize; 5];
    let mut missing = Vec::new();
    for (k, name) in PROFILE_HEADER.iter().enumerate() {
        match header.iter().position(|h| h == name) {
            Some(i) => idx[k] = i,
            None => missing.push(*name),
        }
    }
    if !missing.is_empty() {
        return Err(Error::Parse(format!("profile is missing column(s): {}", missing.join(", "))));
    }
    lines
        .enumerate()
        .map(|(r, line)| {
            let cells: Vec<&str> = line.split(',').map(str::trim).collect();
            let mut row = [0.0; 5];
            for (k, &i) in idx.iter().enumerate() {
                let cell = cells
                    .get(i)
                    .ok_or_else(|| Error::Parse(format!("row {} has {} cells", r + 2, cells.len())))?;
                row[k] = cell
                    .parse()
                    .map_err(|_| Error::Parse(format!("row {}: bad number '{cell}'", r + 2)))?;
            }
            Ok(row)
        })
        .collect()
}
