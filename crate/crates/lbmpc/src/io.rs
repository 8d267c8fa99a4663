//! CSV formats: trajectory logs, GP datasets and plot data.
//!
//! Floats are written in shortest round-trip form, so a log read back
//! reproduces every value bit for bit.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use lbmpc_core::gp::GpDataset;
use lbmpc_core::{StateVector, Vector3};

use crate::{Error, Result};

pub const FLAT_COLUMNS: [&str; 10] = ["px", "py", "pz", "vx", "vy", "vz", "ax", "ay", "az", "psi"];
pub const DISTURBANCE_COLUMNS: [&str; 3] = ["dx", "dy", "dz"];

/// One control tick.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub t: f64,
    /// Flat state from simulator truth (true acceleration under the
    /// applied command).
    pub z: [f64; 10],
    pub c: f64,
    /// Body z axis at the tick.
    pub thrust_dir: [f64; 3],
    pub omega: [f64; 3],
    pub reference: [f64; 10],
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub status: String,
    /// Measured disturbance, m/s².
    pub d_hat: [f64; 3],
}

impl LogRow {
    pub fn position_error(&self) -> f64 {
        let p = Vector3::new(self.z[0], self.z[1], self.z[2]);
        let r = Vector3::new(self.reference[0], self.reference[1], self.reference[2]);
        (p - r).norm()
    }

    /// Tilt of the body z axis from vertical, rad.
    pub fn tilt(&self) -> f64 {
        self.thrust_dir[2].clamp(-1.0, 1.0).acos()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrajectoryLog {
    pub rows: Vec<LogRow>,
}

pub fn log_header() -> Vec<String> {
    let mut h = vec!["t".to_string()];
    h.extend(FLAT_COLUMNS.iter().map(|s| s.to_string()));
    h.push("c".into());
    h.extend(["zb_x", "zb_y", "zb_z", "wx", "wy", "wz"].iter().map(|s| s.to_string()));
    h.extend(FLAT_COLUMNS.iter().map(|s| format!("ref_{s}")));
    h.extend(["iterations", "primal_residual", "dual_residual", "status"].iter().map(|s| s.to_string()));
    h.extend(DISTURBANCE_COLUMNS.iter().map(|s| s.to_string()));
    h
}

fn fmt(x: f64) -> String {
    format!("{x:?}")
}

fn parse_f64(s: &str, line: usize) -> Result<f64> {
    s.trim().parse().map_err(|_| Error::Format(format!("line {line}: `{s}` is not a number")))
}

fn fill<const N: usize>(rec: &csv::StringRecord, start: usize, line: usize) -> Result<[f64; N]> {
    let mut out = [0.0; N];
    for (i, x) in out.iter_mut().enumerate() {
        *x = parse_f64(&rec[start + i], line)?;
    }
    Ok(out)
}

fn check_header(rec: &csv::StringRecord, expected: &[String]) -> Result<()> {
    let got: Vec<&str> = rec.iter().map(str::trim).collect();
    if got != expected.iter().map(String::as_str).collect::<Vec<_>>() {
        return Err(Error::Format(format!("unexpected header: {}", got.join(","))));
    }
    Ok(())
}

impl TrajectoryLog {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn write<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(log_header())?;
        for r in &self.rows {
            let mut rec = vec![fmt(r.t)];
            rec.extend(r.z.iter().map(|x| fmt(*x)));
            rec.push(fmt(r.c));
            rec.extend(r.thrust_dir.iter().chain(&r.omega).map(|x| fmt(*x)));
            rec.extend(r.reference.iter().map(|x| fmt(*x)));
            rec.push(r.iterations.to_string());
            rec.push(fmt(r.primal_residual));
            rec.push(fmt(r.dual_residual));
            rec.push(r.status.clone());
            rec.extend(r.d_hat.iter().map(|x| fmt(*x)));
            out.write_record(rec)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read<R: Read>(r: R) -> Result<Self> {
        let mut input = csv::ReaderBuilder::new().has_headers(false).from_reader(r);
        let header = log_header();
        let mut records = input.records();
        let first = records.next().ok_or_else(|| Error::Format("empty log".into()))??;
        check_header(&first, &header)?;
        let mut rows = Vec::new();
        for (i, rec) in records.enumerate() {
            let rec = rec?;
            let line = i + 2;
            if rec.len() != header.len() {
                return Err(Error::Format(format!("line {line}: expected {} fields", header.len())));
            }
            rows.push(LogRow {
                t: parse_f64(&rec[0], line)?,
                z: fill(&rec, 1, line)?,
                c: parse_f64(&rec[11], line)?,
                thrust_dir: fill(&rec, 12, line)?,
                omega: fill(&rec, 15, line)?,
                reference: fill(&rec, 18, line)?,
                iterations: rec[28]
                    .trim()
                    .parse()
                    .map_err(|_| Error::Format(format!("line {line}: bad iteration count")))?,
                primal_residual: parse_f64(&rec[29], line)?,
                dual_residual: parse_f64(&rec[30], line)?,
                status: rec[31].trim().to_string(),
                d_hat: fill(&rec, 32, line)?,
            });
        }
        Ok(Self { rows })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write(File::create(path)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read(File::open(path)?)
    }
}

pub fn dataset_header() -> Vec<String> {
    FLAT_COLUMNS.iter().chain(&DISTURBANCE_COLUMNS).map(|s| s.to_string()).collect()
}

pub fn write_dataset<W: Write>(ds: &GpDataset, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(dataset_header())?;
    for (z, d) in ds.inputs.iter().zip(&ds.targets) {
        out.write_record(z.iter().chain(d.iter()).map(|x| fmt(*x)))?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_dataset<R: Read>(r: R) -> Result<GpDataset> {
    let mut input = csv::ReaderBuilder::new().has_headers(false).from_reader(r);
    let mut records = input.records();
    let first = records.next().ok_or_else(|| Error::Format("empty dataset: header required".into()))??;
    check_header(&first, &dataset_header())?;
    let mut ds = GpDataset::default();
    for (i, rec) in records.enumerate() {
        let rec = rec?;
        let line = i + 2;
        if rec.len() != 13 {
            return Err(Error::Format(format!("line {line}: expected 13 fields")));
        }
        let v: [f64; 13] = fill(&rec, 0, line)?;
        ds.push(StateVector::from_row_slice(&v[..10]), Vector3::new(v[10], v[11], v[12]));
    }
    Ok(ds)
}

pub fn save_dataset(ds: &GpDataset, path: &Path) -> Result<()> {
    write_dataset(ds, File::create(path)?)
}

pub fn load_dataset(path: &Path) -> Result<GpDataset> {
    read_dataset(File::open(path)?)
}
