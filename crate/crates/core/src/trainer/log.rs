//! Append-only CSV training log.

use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use super::StepLog;
use crate::{Error, Result};

pub const LOG_HEADER: &str = "iter,loss,photo,reg,pose_drift,psnr_probe";

pub struct TrainLog {
    path: PathBuf,
    out: BufWriter<File>,
}

impl TrainLog {
    /// Opens `path` for appending and writes the header if the file is new
    /// or empty.
    pub fn open(path: &Path) -> Result<Self> {
        let file = OpenOptions::new().create(true).append(true).open(path).map_err(|e| Error::io(path, e))?;
        let empty = file.metadata().map_err(|e| Error::io(path, e))?.len() == 0;
        let mut log = TrainLog { path: path.to_path_buf(), out: BufWriter::new(file) };
        if empty {
            log.write_line(LOG_HEADER)?;
        }
        Ok(log)
    }

    fn write_line(&mut self, line: &str) -> Result<()> {
        writeln!(self.out, "{line}").map_err(|e| Error::io(&self.path, e))
    }

    /// One row per step; `psnr_probe` is empty when no probe ran.
    pub fn append(&mut self, step: &StepLog) -> Result<()> {
        self.write_line(&format_row(step))
    }

    pub fn flush(&mut self) -> Result<()> {
        self.out.flush().map_err(|e| Error::io(&self.path, e))
    }
}

pub fn format_row(step: &StepLog) -> String {
    let probe = step.psnr_probe.map(|p| format!("{p:.6}")).unwrap_or_default();
    format!(
        "{},{:.9e},{:.9e},{:.9e},{:.9e},{}",
        step.iteration,
        step.loss,
        step.photo,
        step.reg,
        step.mean_drift(),
        probe
    )
}
