use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};

use serde::{Deserialize, Serialize};

use super::detector::DetectorDecision;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WarningKind {
    OfficerMessage,
    Siren,
}

impl WarningKind {
    pub const ALL: [WarningKind; 2] = [WarningKind::OfficerMessage, WarningKind::Siren];

    pub fn file_name(self) -> &'static str {
        match self {
            WarningKind::OfficerMessage => "warnings_officer_message.jsonl",
            WarningKind::Siren => "warnings_siren.jsonl",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WarningRecord {
    pub kind: WarningKind,
    pub timestamp_s: f64,
    pub pn_id: String,
    pub text: String,
}

pub trait WarningSink {
    fn write(&mut self, record: &WarningRecord) -> Result<()>;
}

/// Keeps records in memory.
#[derive(Debug, Default, Clone)]
pub struct MemorySink {
    pub records: Vec<WarningRecord>,
}

impl WarningSink for MemorySink {
    fn write(&mut self, record: &WarningRecord) -> Result<()> {
        self.records.push(record.clone());
        Ok(())
    }
}

/// Append-only JSON-lines files, one per warning kind, in a directory.
#[derive(Debug)]
pub struct JsonlSink {
    dir: PathBuf,
    files: Vec<(WarningKind, File)>,
}

impl JsonlSink {
    pub fn new(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        std::fs::create_dir_all(&dir)?;
        Ok(Self {
            dir,
            files: Vec::new(),
        })
    }

    pub fn path(&self, kind: WarningKind) -> PathBuf {
        self.dir.join(kind.file_name())
    }

    /// Creates both files even if nothing gets written to them.
    pub fn touch_all(&mut self) -> Result<()> {
        for kind in WarningKind::ALL {
            self.file(kind)?;
        }
        Ok(())
    }

    fn file(&mut self, kind: WarningKind) -> Result<&mut File> {
        let idx = match self.files.iter().position(|(k, _)| *k == kind) {
            Some(i) => i,
            None => {
                let f = OpenOptions::new()
                    .create(true)
                    .append(true)
                    .open(self.path(kind))?;
                self.files.push((kind, f));
                self.files.len() - 1
            }
        };
        Ok(&mut self.files[idx].1)
    }
}

impl WarningSink for JsonlSink {
    fn write(&mut self, record: &WarningRecord) -> Result<()> {
        let mut line = serde_json::to_vec(record)?;
        line.push(b'\n');
        self.file(record.kind)?.write_all(&line)?;
        Ok(())
    }
}

/// Runs an external program per record with the JSON record on stdin, the
/// way an SMS or siren gateway would be driven. A nonzero exit is a failure.
#[derive(Debug, Clone)]
pub struct CommandSink {
    pub program: PathBuf,
    pub args: Vec<String>,
}

impl WarningSink for CommandSink {
    fn write(&mut self, record: &WarningRecord) -> Result<()> {
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::null())
            .spawn()?;
        let mut line = serde_json::to_vec(record)?;
        line.push(b'\n');
        child
            .stdin
            .take()
            .expect("stdin is piped")
            .write_all(&line)?;
        let status = child.wait()?;
        if !status.success() {
            return Err(Error::Io(std::io::Error::other(format!(
                "{} exited with {status}",
                self.program.display()
            ))));
        }
        Ok(())
    }
}

/// Result of pushing warnings to the sinks.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct WarningOutcome {
    pub records: Vec<WarningRecord>,
    /// `(sink index, kind, error)` for writes that failed twice.
    pub failures: Vec<(usize, WarningKind, String)>,
}

/// The record of `kind` for a positive decision.
pub fn warning_record(
    kind: WarningKind,
    decision: &DetectorDecision,
    pn_id: &str,
    now_s: f64,
) -> WarningRecord {
    let text = match kind {
        WarningKind::OfficerMessage => format!(
            "elephant detected near {pn_id} (frame {}, confidence {:.2})",
            decision.frame_id, decision.confidence
        ),
        WarningKind::Siren => format!("siren activated at {pn_id}"),
    };
    WarningRecord {
        kind,
        timestamp_s: now_s,
        pn_id: pn_id.to_string(),
        text,
    }
}

/// Writes `record` to every sink, retrying a failed write once. Returns
/// `(sink index, error)` for writes that failed twice.
pub fn write_to_sinks(
    record: &WarningRecord,
    sinks: &mut [&mut dyn WarningSink],
) -> Vec<(usize, String)> {
    let mut failed = Vec::new();
    for (i, sink) in sinks.iter_mut().enumerate() {
        if let Err(first) = sink.write(record) {
            log::debug!("warning sink {i} failed ({first}), retrying");
            if let Err(e) = sink.write(record) {
                log::warn!("warning sink {i} dropped a {:?} record: {e}", record.kind);
                failed.push((i, e.to_string()));
            }
        }
    }
    failed
}

/// One officer message and one siren record per positive decision, each
/// written to every sink. A failed write is retried once and then given up
/// on, so a broken sink never holds up repelling.
pub fn emit_warning(
    decision: &DetectorDecision,
    pn_id: &str,
    now_s: f64,
    sinks: &mut [&mut dyn WarningSink],
) -> WarningOutcome {
    let mut out = WarningOutcome::default();
    if !decision.elephant_present {
        return out;
    }
    for kind in WarningKind::ALL {
        let record = warning_record(kind, decision, pn_id, now_s);
        for (i, e) in write_to_sinks(&record, sinks) {
            out.failures.push((i, kind, e));
        }
        out.records.push(record);
    }
    out
}

pub fn read_warning_log(path: impl AsRef<Path>) -> Result<Vec<WarningRecord>> {
    let text = std::fs::read_to_string(path)?;
    let mut offset = 0;
    let mut out = Vec::new();
    for line in text.split_inclusive('\n') {
        if !line.trim().is_empty() {
            out.push(
                serde_json::from_str(line.trim())
                    .map_err(|e| Error::parse(offset, e.to_string()))?,
            );
        }
        offset += line.len();
    }
    Ok(out)
}
