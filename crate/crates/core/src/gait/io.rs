//! Gait CSV reading and writing.
//!
//! Header: `t,q1..q12,com_x,com_y,com_z,cop_x,cop_y,phase`, one row per
//! sample on a uniform time grid. Columns are matched by name.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::Vector3;

use super::{GaitError, GaitSample, NominalGait, Phase, N_JOINTS};
use crate::lip::Vec2;

fn column_names() -> Vec<String> {
    let mut names = vec!["t".to_string()];
    names.extend((1..=N_JOINTS).map(|i| format!("q{i}")));
    names.extend(["com_x", "com_y", "com_z", "cop_x", "cop_y", "phase"].map(String::from));
    names
}

/// Parse a gait CSV from any reader.
pub fn read_gait<R: Read>(reader: R) -> Result<NominalGait, GaitError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .has_headers(true)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| GaitError::Parse {
            row: 1,
            msg: e.to_string(),
        })?
        .clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(GaitError::Empty);
    }
    let names = column_names();
    let mut index = Vec::with_capacity(names.len());
    for name in &names {
        let pos = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| GaitError::MissingColumn(name.clone()))?;
        index.push(pos);
    }

    let mut samples = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        // Row numbers count the header as row 1.
        let row = k + 2;
        let rec = rec.map_err(|e| GaitError::Parse {
            row,
            msg: e.to_string(),
        })?;
        let num = |col: usize| -> Result<f64, GaitError> {
            let raw = rec.get(index[col]).unwrap_or("");
            let v: f64 = raw.parse().map_err(|_| GaitError::Parse {
                row,
                msg: format!("column `{}`: cannot parse `{raw}` as a number", names[col]),
            })?;
            if !v.is_finite() {
                return Err(GaitError::Parse {
                    row,
                    msg: format!("column `{}`: non-finite value", names[col]),
                });
            }
            Ok(v)
        };
        let mut q = [0.0; N_JOINTS];
        for (j, qj) in q.iter_mut().enumerate() {
            *qj = num(1 + j)?;
        }
        let o = 1 + N_JOINTS;
        let phase_raw = rec.get(index[o + 5]).unwrap_or("");
        let phase = Phase::parse(phase_raw).ok_or_else(|| GaitError::Parse {
            row,
            msg: format!("unknown phase `{phase_raw}` (expected SS_LEFT, SS_RIGHT or DS)"),
        })?;
        samples.push(GaitSample {
            t: num(0)?,
            q,
            com: Vector3::new(num(o)?, num(o + 1)?, num(o + 2)?),
            cop: Vec2::new(num(o + 3)?, num(o + 4)?),
            phase,
        });
    }
    if samples.is_empty() {
        return Err(GaitError::Empty);
    }
    NominalGait::new(samples)
}

pub fn load_gait(path: &Path) -> Result<NominalGait, GaitError> {
    let file = std::fs::File::open(path)?;
    read_gait(std::io::BufReader::new(file))
}

/// Write a gait as CSV. Values use the shortest round-trip representation.
pub fn write_gait<W: Write>(gait: &NominalGait, writer: W) -> Result<(), GaitError> {
    let mut w = csv::Writer::from_writer(writer);
    let to_io = |e: csv::Error| GaitError::Io(std::io::Error::other(e));
    w.write_record(column_names()).map_err(to_io)?;
    for s in gait.samples() {
        let mut rec: Vec<String> = Vec::with_capacity(N_JOINTS + 7);
        rec.push(s.t.to_string());
        rec.extend(s.q.iter().map(|v| v.to_string()));
        rec.extend(s.com.iter().map(|v| v.to_string()));
        rec.extend(s.cop.iter().map(|v| v.to_string()));
        rec.push(s.phase.label().to_string());
        w.write_record(&rec).map_err(to_io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_gait(gait: &NominalGait, path: &Path) -> Result<(), GaitError> {
    let file = std::fs::File::create(path)?;
    write_gait(gait, std::io::BufWriter::new(file))
}
