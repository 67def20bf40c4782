//! Trace CSV: `step,loss,fg_mass,wall_ms`.

use std::io::{Read, Write};

use motionfactor_core::attention::TraceRow;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub step: u32,
    pub loss: f64,
    pub fg_mass: f64,
    /// Milliseconds since the run started; the only non-reproducible column.
    pub wall_ms: f64,
}

impl TraceRecord {
    pub fn new(row: TraceRow, wall_ms: f64) -> Self {
        Self { step: row.step, loss: row.loss, fg_mass: row.fg_mass, wall_ms }
    }
}

pub fn write_trace<W: Write>(w: W, records: &[TraceRecord]) -> Result<(), csv::Error> {
    let mut out = csv::Writer::from_writer(w);
    if records.is_empty() {
        out.write_record(["step", "loss", "fg_mass", "wall_ms"])?;
    }
    for r in records {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_trace<R: Read>(r: R) -> Result<Vec<TraceRecord>, csv::Error> {
    csv::Reader::from_reader(r).deserialize().collect()
}
