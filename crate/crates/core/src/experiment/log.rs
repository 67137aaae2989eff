//! Line-delimited JSON run logs.
//!
//! The first line is a [`LogHeader`], then one trial per line in step order.
//! Bandit runs end with the final state table. Each trial line is flushed
//! before the next step starts, so an interrupted run can be resumed from
//! the last complete line.

use std::fs::{File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    replay_state, run_bandit_with, run_replication_with, BanditRun, ConfiguredBackends, RunConfig,
    TrialRecord,
};
use crate::bandit::{BanditState, StateRow};
use crate::error::{Error, Result};

pub const LOG_SCHEMA: &str = "valuebandit-log";
pub const LOG_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunKind {
    Bandit,
    Replication,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogHeader {
    pub schema: String,
    pub version: u32,
    pub kind: RunKind,
    pub config: RunConfig,
}

impl LogHeader {
    pub fn new(kind: RunKind, config: RunConfig) -> Self {
        Self {
            schema: LOG_SCHEMA.to_string(),
            version: LOG_VERSION,
            kind,
            config,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[allow(clippy::large_enum_variant)]
pub enum LogLine {
    Header(LogHeader),
    Trial(Box<TrialRecord>),
    BanditState(Vec<StateRow>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentLog {
    pub header: LogHeader,
    pub records: Vec<TrialRecord>,
    pub state: Option<BanditState>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WriteMode {
    /// Fail if the file exists.
    Create,
    /// Replace any existing file.
    Overwrite,
    /// Continue an interrupted run with the same configuration.
    Resume,
}

fn log_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Log {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn parse_lines(path: &Path, text: &str) -> Result<ExperimentLog> {
    let mut header = None;
    let mut records = Vec::new();
    let mut state = None;
    for (i, line) in text.lines().enumerate() {
        let n = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: LogLine = serde_json::from_str(line).map_err(|e| log_error(path, n, e.to_string()))?;
        match (parsed, &header, &state) {
            (LogLine::Header(h), None, _) => {
                if h.schema != LOG_SCHEMA || h.version != LOG_VERSION {
                    return Err(log_error(
                        path,
                        n,
                        format!("unsupported log schema {} v{}", h.schema, h.version),
                    ));
                }
                header = Some(h);
            }
            (LogLine::Header(_), Some(_), _) => return Err(log_error(path, n, "second header")),
            (_, None, _) => return Err(log_error(path, n, "log does not start with a header")),
            (_, Some(_), Some(_)) => return Err(log_error(path, n, "line after final bandit state")),
            (LogLine::Trial(r), Some(_), None) => {
                if r.step != records.len() as u64 + 1 {
                    return Err(log_error(
                        path,
                        n,
                        format!("trial {} out of order, expected {}", r.step, records.len() + 1),
                    ));
                }
                records.push(*r);
            }
            (LogLine::BanditState(rows), Some(_), None) => {
                state = Some(BanditState::from_rows(&rows).map_err(|e| log_error(path, n, e.to_string()))?);
            }
        }
    }
    let header = header.ok_or_else(|| Error::Data(format!("{}: empty log", path.display())))?;
    Ok(ExperimentLog { header, records, state })
}

/// Reads a complete log. Corrupt lines are reported with their line number.
pub fn read_log(path: &Path) -> Result<ExperimentLog> {
    let text = std::fs::read_to_string(path)?;
    parse_lines(path, &text)
}

struct LogWriter {
    file: File,
}

impl LogWriter {
    fn create(path: &Path, overwrite: bool, header: &LogHeader) -> Result<Self> {
        let mut opts = OpenOptions::new();
        opts.write(true);
        if overwrite {
            opts.create(true).truncate(true);
        } else {
            opts.create_new(true);
        }
        let file = opts.open(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::AlreadyExists => {
                Error::Usage(format!("{} exists; pass --force to overwrite or --resume to continue", path.display()))
            }
            _ => e.into(),
        })?;
        let mut w = Self { file };
        w.write(&LogLine::Header(header.clone()))?;
        Ok(w)
    }

    /// Opens an existing log for appending after dropping any partial last line.
    fn resume(path: &Path, kind: RunKind, config: &RunConfig) -> Result<(Self, Vec<TrialRecord>, bool)> {
        let mut file = OpenOptions::new().read(true).write(true).open(path)?;
        let mut bytes = Vec::new();
        file.read_to_end(&mut bytes)?;
        let complete = bytes.iter().rposition(|b| *b == b'\n').map_or(0, |i| i + 1);
        let text = std::str::from_utf8(&bytes[..complete])
            .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        let log = parse_lines(path, text)?;
        if log.header.kind != kind {
            return Err(Error::Usage(format!("{} holds a {:?} run", path.display(), log.header.kind)));
        }
        if &log.header.config != config {
            return Err(Error::Usage(format!(
                "{} was written with a different configuration",
                path.display()
            )));
        }
        file.set_len(complete as u64)?;
        file.seek(SeekFrom::End(0))?;
        Ok((Self { file }, log.records, log.state.is_some()))
    }

    fn write(&mut self, line: &LogLine) -> Result<()> {
        let mut buf = serde_json::to_vec(line)?;
        buf.push(b'\n');
        self.file.write_all(&buf)?;
        self.file.flush()?;
        Ok(())
    }
}

fn open_writer(
    path: &Path,
    mode: WriteMode,
    kind: RunKind,
    config: &RunConfig,
) -> Result<(LogWriter, Vec<TrialRecord>, bool)> {
    match mode {
        WriteMode::Create | WriteMode::Overwrite => {
            let header = LogHeader::new(kind, config.clone());
            Ok((LogWriter::create(path, mode == WriteMode::Overwrite, &header)?, Vec::new(), false))
        }
        WriteMode::Resume if !path.exists() => open_writer(path, WriteMode::Create, kind, config),
        WriteMode::Resume => LogWriter::resume(path, kind, config),
    }
}

/// Runs (or resumes) a bandit experiment, appending to the log at `path`.
pub fn run_bandit_to_log(config: &RunConfig, path: &Path, mode: WriteMode) -> Result<BanditRun> {
    config.validate()?;
    let backends = ConfiguredBackends::new(config)?;
    let (mut writer, prior, finished) = open_writer(path, mode, RunKind::Bandit, config)?;
    if finished {
        let state = replay_state(&prior)?;
        return Ok(BanditRun { records: prior, state });
    }
    let run = run_bandit_with(config, &backends, prior, &mut |r| {
        writer.write(&LogLine::Trial(Box::new(r.clone())))
    })?;
    writer.write(&LogLine::BanditState(run.state.to_rows()))?;
    Ok(run)
}

/// Runs (or resumes) a replication of `config.steps` participants.
pub fn run_replication_to_log(config: &RunConfig, path: &Path, mode: WriteMode) -> Result<Vec<TrialRecord>> {
    config.validate()?;
    let backends = ConfiguredBackends::new(config)?;
    let (mut writer, prior, _) = open_writer(path, mode, RunKind::Replication, config)?;
    run_replication_with(config, &backends, prior, &mut |r| {
        writer.write(&LogLine::Trial(Box::new(r.clone())))
    })
}
