//! CSV record files: `trial,outcome_j,pointer,quadrature,readout`.
//! Paths ending in `.gz` are gzip-compressed transparently.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use flate2::read::MultiGzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use serde::{Deserialize, Serialize};

use super::{ExperimentRecord, Quadrature};
use crate::error::{Error, Result};

fn is_gzip(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "gz")
}

pub fn open_output(path: &Path) -> Result<Box<dyn Write>> {
    let file = BufWriter::new(File::create(path)?);
    if is_gzip(path) {
        Ok(Box::new(GzEncoder::new(file, Compression::default())))
    } else {
        Ok(Box::new(file))
    }
}

pub fn open_input(path: &Path) -> Result<Box<dyn Read>> {
    let file = BufReader::new(File::open(path)?);
    if is_gzip(path) {
        Ok(Box::new(MultiGzDecoder::new(file)))
    } else {
        Ok(Box::new(file))
    }
}

#[derive(Serialize, Deserialize)]
struct Row {
    trial: u64,
    outcome_j: usize,
    pointer: usize,
    quadrature: Quadrature,
    readout: f64,
}

pub fn write_records_csv<W: Write>(
    out: W,
    records: impl IntoIterator<Item = ExperimentRecord>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(Row {
            trial: r.trial,
            outcome_j: r.outcome_j,
            pointer: r.pointer_index,
            quadrature: r.quadrature,
            readout: r.readout,
        })?;
    }
    w.flush()?;
    Ok(())
}

/// Streams records back; each item fails independently on malformed rows.
pub fn read_records_csv<R: Read>(input: R) -> impl Iterator<Item = Result<ExperimentRecord>> {
    csv::Reader::from_reader(input)
        .into_deserialize::<Row>()
        .enumerate()
        .map(|(line, row)| {
            let r = row.map_err(|e| Error::Format(format!("record row {}: {e}", line + 1)))?;
            Ok(ExperimentRecord {
                trial: r.trial,
                outcome_j: r.outcome_j,
                pointer_index: r.pointer,
                quadrature: r.quadrature,
                readout: r.readout,
            })
        })
}
