//! Training log CSV: `epoch,train_loss,val_nrms,seconds,is_best`.

use std::path::Path;

use ssenc_core::optim::EpochRecord;
use ssenc_core::TrainLog;

use crate::error::{Error, Result};

pub const COLUMNS: [&str; 5] = ["epoch", "train_loss", "val_nrms", "seconds", "is_best"];

/// Writes one row per epoch. Floats use their shortest round-trip form and
/// `is_best` is `1` or `0`. With `record_time = false` every `seconds`
/// entry is written as `0`, which makes logs of identical runs identical.
pub fn write_log(path: impl AsRef<Path>, log: &TrainLog, record_time: bool) -> Result<()> {
    let path = path.as_ref();
    let mut out = COLUMNS.join(",");
    out.push('\n');
    for r in &log.records {
        let secs = if record_time { r.seconds } else { 0.0 };
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.epoch,
            r.train_loss,
            r.val_nrms,
            secs,
            u8::from(r.is_best)
        ));
    }
    std::fs::write(path, out).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_log(path: impl AsRef<Path>) -> Result<Vec<EpochRecord>> {
    let path = path.as_ref();
    let mut rdr = csv::Reader::from_path(path).map_err(|source| Error::Csv {
        path: path.to_path_buf(),
        source,
    })?;
    let mut records = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|source| Error::Csv {
            path: path.to_path_buf(),
            source,
        })?;
        let field = |c: usize| -> Result<f64> {
            let s = rec.get(c).unwrap_or("");
            s.parse::<f64>().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                row: i + 1,
                column: COLUMNS[c].into(),
                value: s.into(),
            })
        };
        records.push(EpochRecord {
            epoch: field(0)? as usize,
            train_loss: field(1)?,
            val_nrms: field(2)?,
            seconds: field(3)?,
            is_best: field(4)? != 0.0,
        });
    }
    Ok(records)
}
