//! On-disk form of a [`TrajectoryRecord`].
//!
//! `<stem>.ndjson` holds a header line followed by one measurement event per
//! line. The header names a companion `<stem>.snap` file with the snapshot
//! block: per snapshot, step `u64`, time `f64`, entropy count `u32` and values,
//! matrix order `u32` and the one-body matrix row-major as `(re, im)` pairs.
//! All binary fields are little-endian.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};

use super::{MeasurementEvent, ObservableSnapshot, TrajectoryRecord, TrajectorySeed};
use crate::backend::BackendKind;
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C64};
use crate::model::ChainSpec;

pub const RECORD_VERSION: u32 = 1;
const FORMAT_NAME: &str = "monitored-fermions/trajectory";

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    format: String,
    version: u32,
    spec: ChainSpec,
    seed: TrajectorySeed,
    backend: BackendKind,
    sampling_interval: f64,
    snapshots: String,
}

/// Write `<dir>/<stem>.ndjson` and `<dir>/<stem>.snap`; returns the NDJSON path.
pub fn write_record(record: &TrajectoryRecord, dir: &Path, stem: &str) -> Result<PathBuf> {
    let snap_name = format!("{stem}.snap");
    let header = Header {
        format: FORMAT_NAME.into(),
        version: RECORD_VERSION,
        spec: record.spec.clone(),
        seed: record.seed,
        backend: record.backend,
        sampling_interval: record.sampling_interval,
        snapshots: snap_name.clone(),
    };
    let path = dir.join(format!("{stem}.ndjson"));
    let mut out = BufWriter::new(File::create(&path)?);
    serde_json::to_writer(&mut out, &header)?;
    out.write_all(b"\n")?;
    for event in &record.events {
        serde_json::to_writer(&mut out, event)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;

    let mut snap = BufWriter::new(File::create(dir.join(&snap_name))?);
    write_snapshots(&record.snapshots, &mut snap)?;
    snap.flush()?;
    Ok(path)
}

/// Read a record written by [`write_record`].
pub fn read_record(path: &Path) -> Result<TrajectoryRecord> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines();
    let first = lines.next().ok_or_else(|| Error::Format("empty trajectory file".into()))??;
    let header: Header = serde_json::from_str(&first)?;
    if header.format != FORMAT_NAME || header.version != RECORD_VERSION {
        return Err(Error::Format(format!("unsupported record {} v{}", header.format, header.version)));
    }
    let mut events = Vec::new();
    for line in lines {
        let line = line?;
        if !line.trim().is_empty() {
            events.push(serde_json::from_str::<MeasurementEvent>(&line)?);
        }
    }
    let snap_path = path.parent().unwrap_or(Path::new(".")).join(&header.snapshots);
    let snapshots = read_snapshots(&mut BufReader::new(File::open(snap_path)?))?;
    Ok(TrajectoryRecord {
        spec: header.spec,
        seed: header.seed,
        backend: header.backend,
        sampling_interval: header.sampling_interval,
        events,
        snapshots,
    })
}

fn write_snapshots<W: Write>(snapshots: &[ObservableSnapshot], out: &mut W) -> Result<()> {
    out.write_u32::<LittleEndian>(snapshots.len() as u32)?;
    for s in snapshots {
        out.write_u64::<LittleEndian>(s.step as u64)?;
        out.write_f64::<LittleEndian>(s.time)?;
        out.write_u32::<LittleEndian>(s.entropy.len() as u32)?;
        for &x in &s.entropy {
            out.write_f64::<LittleEndian>(x)?;
        }
        let n = s.correlation.nrows();
        out.write_u32::<LittleEndian>(n as u32)?;
        for i in 0..n {
            for j in 0..n {
                out.write_f64::<LittleEndian>(s.correlation[(i, j)].re)?;
                out.write_f64::<LittleEndian>(s.correlation[(i, j)].im)?;
            }
        }
    }
    Ok(())
}

fn read_snapshots<R: Read>(input: &mut R) -> Result<Vec<ObservableSnapshot>> {
    let count = input.read_u32::<LittleEndian>()?;
    let mut out = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let step = input.read_u64::<LittleEndian>()? as usize;
        let time = input.read_f64::<LittleEndian>()?;
        let m = input.read_u32::<LittleEndian>()? as usize;
        let entropy = (0..m).map(|_| input.read_f64::<LittleEndian>()).collect::<std::io::Result<Vec<_>>>()?;
        let n = input.read_u32::<LittleEndian>()? as usize;
        let mut values = Vec::with_capacity(n * n);
        for _ in 0..n * n {
            let re = input.read_f64::<LittleEndian>()?;
            let im = input.read_f64::<LittleEndian>()?;
            values.push(C64::new(re, im));
        }
        out.push(ObservableSnapshot { step, time, entropy, correlation: CMatrix::from_row_slice(n, n, &values) });
    }
    Ok(out)
}
