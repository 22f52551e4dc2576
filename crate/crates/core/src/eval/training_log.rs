//! Per-epoch loss log written by the trainer: CSV with header
//! `epoch,train_loss,val_loss`.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const TRAINING_LOG_HEADER: [&str; 3] = ["epoch", "train_loss", "val_loss"];

#[derive(Debug, Error)]
pub enum TrainingLogError {
    #[error("training log header must be {expected:?}, found {found:?}")]
    Header { expected: String, found: String },
    #[error("training log line {line}: {message}")]
    Row { line: u64, message: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainingLog {
    pub epochs: Vec<EpochLoss>,
}

impl TrainingLog {
    /// Parses and checks the log: exact header, strictly increasing epochs,
    /// finite nonnegative losses.
    pub fn read_csv<R: Read>(input: R) -> Result<Self, TrainingLogError> {
        let mut rdr = csv::Reader::from_reader(input);
        let header: Vec<String> = rdr.headers()?.iter().map(|s| s.trim().to_string()).collect();
        if header != TRAINING_LOG_HEADER {
            return Err(TrainingLogError::Header {
                expected: TRAINING_LOG_HEADER.join(","),
                found: header.join(","),
            });
        }
        let mut epochs: Vec<EpochLoss> = Vec::new();
        for row in rdr.deserialize::<EpochLoss>() {
            let row = row.map_err(|e| TrainingLogError::Row {
                line: e.position().map_or(0, |p| p.line()),
                message: e.to_string(),
            })?;
            let line = epochs.len() as u64 + 2;
            let bad = |message: String| TrainingLogError::Row { line, message };
            if let Some(prev) = epochs.last() {
                if row.epoch <= prev.epoch {
                    return Err(bad(format!("epoch {} does not follow {}", row.epoch, prev.epoch)));
                }
            }
            for (name, v) in [("train_loss", row.train_loss), ("val_loss", row.val_loss)] {
                if !(v.is_finite() && v >= 0.0) {
                    return Err(bad(format!("{name} {v} is not a finite nonnegative number")));
                }
            }
            epochs.push(row);
        }
        Ok(TrainingLog { epochs })
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), TrainingLogError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(TRAINING_LOG_HEADER)?;
        for e in &self.epochs {
            w.write_record([e.epoch.to_string(), e.train_loss.to_string(), e.val_loss.to_string()])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    /// Epoch with the lowest validation loss (earliest on ties).
    pub fn best_epoch(&self) -> Option<EpochLoss> {
        self.epochs.iter().copied().reduce(|a, b| if b.val_loss < a.val_loss { b } else { a })
    }

    /// Final validation loss is no higher than the first.
    pub fn improved(&self) -> bool {
        match (self.epochs.first(), self.epochs.last()) {
            (Some(a), Some(b)) => b.val_loss <= a.val_loss,
            _ => false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const LOG: &str = "epoch,train_loss,val_loss\n1,0.05,0.04\n2,0.01,0.012\n3,0.008,0.013\n";

    #[test]
    fn parses_and_summarizes() {
        let log = TrainingLog::read_csv(LOG.as_bytes()).unwrap();
        assert_eq!(log.epochs.len(), 3);
        assert_eq!(log.best_epoch().unwrap().epoch, 2);
        assert!(log.improved());
    }

    #[test]
    fn round_trips() {
        let log = TrainingLog::read_csv(LOG.as_bytes()).unwrap();
        let mut out = Vec::new();
        log.write_csv(&mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), LOG);
    }

    #[test]
    fn rejects_bad_logs() {
        let header = TrainingLog::read_csv("epoch,loss,val\n1,0.1,0.1\n".as_bytes());
        assert!(matches!(header, Err(TrainingLogError::Header { .. })));
        let order = TrainingLog::read_csv("epoch,train_loss,val_loss\n2,0.1,0.1\n2,0.1,0.1\n".as_bytes());
        assert!(matches!(order, Err(TrainingLogError::Row { line: 3, .. })));
        let nan = TrainingLog::read_csv("epoch,train_loss,val_loss\n1,NaN,0.1\n".as_bytes());
        assert!(matches!(nan, Err(TrainingLogError::Row { .. })));
        let text = TrainingLog::read_csv("epoch,train_loss,val_loss\n1,abc,0.1\n".as_bytes());
        assert!(matches!(text, Err(TrainingLogError::Row { .. })));
    }

    #[test]
    fn empty_log() {
        let log = TrainingLog::read_csv("epoch,train_loss,val_loss\n".as_bytes()).unwrap();
        assert!(log.best_epoch().is_none());
        assert!(!log.improved());
    }
}
