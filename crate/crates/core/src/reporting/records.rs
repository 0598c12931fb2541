//! Newline-delimited transcript record files.
//!
//! Line 1 is a header naming the schema and the fingerprint of the plan that
//! produced the games; every further line is one `GameTranscript`.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::ReportError;
use crate::game::GameTranscript;
use crate::tournament::checkpoint::{self, Manifest, GAMES_DIR, MANIFEST_FILE, TRANSCRIPTS_FILE};
use crate::tournament::ExperimentPlan;

pub const RECORD_SCHEMA: &str = "ipd-transcripts";
pub const RECORD_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordHeader {
    pub schema: String,
    pub schema_version: u32,
    pub plan_fingerprint: String,
}

impl RecordHeader {
    pub fn new(plan_fingerprint: &str) -> Self {
        Self {
            schema: RECORD_SCHEMA.into(),
            schema_version: RECORD_SCHEMA_VERSION,
            plan_fingerprint: plan_fingerprint.into(),
        }
    }
}

fn encode(records: impl IntoIterator<Item = String>) -> Vec<u8> {
    let mut out = Vec::new();
    for r in records {
        out.extend_from_slice(r.as_bytes());
        out.push(b'\n');
    }
    out
}

/// Writes a complete record file in one atomic replace.
pub fn write_record_file(path: &Path, plan_fingerprint: &str, games: &[GameTranscript]) -> std::io::Result<()> {
    let header = serde_json::to_string(&RecordHeader::new(plan_fingerprint))?;
    let mut lines = vec![header];
    for g in games {
        lines.push(serde_json::to_string(g)?);
    }
    checkpoint::write_atomic(path, &encode(lines))
}

/// Append-only sink. Opening an existing file checks its header.
pub struct RecordWriter {
    out: BufWriter<File>,
}

impl RecordWriter {
    pub fn open(path: &Path, plan_fingerprint: &str) -> Result<Self, ReportError> {
        if path.exists() && fs::metadata(path)?.len() > 0 {
            let header = read_header(path)?;
            if header.plan_fingerprint != plan_fingerprint {
                return Err(ReportError::FingerprintMismatch {
                    expected: header.plan_fingerprint,
                    found: plan_fingerprint.into(),
                });
            }
            let f = OpenOptions::new().append(true).open(path)?;
            return Ok(Self { out: BufWriter::new(f) });
        }
        let mut out = BufWriter::new(File::create(path)?);
        serde_json::to_writer(&mut out, &RecordHeader::new(plan_fingerprint))?;
        out.write_all(b"\n")?;
        out.flush()?;
        Ok(Self { out })
    }

    pub fn append(&mut self, game: &GameTranscript) -> Result<(), ReportError> {
        serde_json::to_writer(&mut self.out, game)?;
        self.out.write_all(b"\n")?;
        self.out.flush()?;
        Ok(())
    }
}

fn parse_header(path: &Path, line: &str) -> Result<RecordHeader, ReportError> {
    let header: RecordHeader = serde_json::from_str(line).map_err(|e| ReportError::Parse {
        path: path.to_path_buf(),
        line: 1,
        message: format!("bad header: {e}"),
    })?;
    if header.schema != RECORD_SCHEMA || header.schema_version != RECORD_SCHEMA_VERSION {
        return Err(ReportError::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: format!("unsupported schema {} v{}", header.schema, header.schema_version),
        });
    }
    Ok(header)
}

fn read_header(path: &Path) -> Result<RecordHeader, ReportError> {
    let mut first = String::new();
    BufReader::new(File::open(path)?).read_line(&mut first)?;
    parse_header(path, first.trim_end())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecordFile {
    pub header: RecordHeader,
    pub transcripts: Vec<GameTranscript>,
}

pub fn read_record_file(path: &Path) -> Result<RecordFile, ReportError> {
    let reader = BufReader::new(File::open(path)?);
    let mut header = None;
    let mut transcripts = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if i == 0 {
            header = Some(parse_header(path, &line)?);
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        transcripts.push(serde_json::from_str(&line).map_err(|e| ReportError::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    let header = header.ok_or_else(|| ReportError::Parse {
        path: path.to_path_buf(),
        line: 1,
        message: "empty file".into(),
    })?;
    Ok(RecordFile { header, transcripts })
}

/// Transcripts and provenance gathered from a run directory or record file.
#[derive(Debug, Clone)]
pub struct RunData {
    pub source: PathBuf,
    pub plan_fingerprint: String,
    pub plan: Option<ExperimentPlan>,
    pub transcripts: Vec<GameTranscript>,
}

impl RunData {
    pub fn planned_games(&self) -> Option<usize> {
        self.plan.as_ref().map(ExperimentPlan::planned_games)
    }
}

/// Loads a record file, or a run directory. A directory without a record
/// file (an unfinished run) is read from its per-game checkpoints.
pub fn load_run(path: &Path) -> Result<RunData, ReportError> {
    if path.is_file() {
        let file = read_record_file(path)?;
        return Ok(RunData {
            source: path.to_path_buf(),
            plan_fingerprint: file.header.plan_fingerprint,
            plan: None,
            transcripts: file.transcripts,
        });
    }
    if !path.join(MANIFEST_FILE).exists() {
        return Err(ReportError::EmptyInput(format!(
            "{} is neither a record file nor a run directory",
            path.display()
        )));
    }
    let manifest = Manifest::load(path).map_err(|e| ReportError::Parse {
        path: path.join(MANIFEST_FILE),
        line: 1,
        message: e.to_string(),
    })?;
    let records = path.join(TRANSCRIPTS_FILE);
    let transcripts = if records.exists() {
        let file = read_record_file(&records)?;
        if file.header.plan_fingerprint != manifest.plan_fingerprint {
            return Err(ReportError::FingerprintMismatch {
                expected: manifest.plan_fingerprint,
                found: file.header.plan_fingerprint,
            });
        }
        file.transcripts
    } else {
        checkpoint::load_games(path, &manifest.plan)
            .map_err(|e| ReportError::Parse {
                path: path.join(GAMES_DIR),
                line: 0,
                message: e.to_string(),
            })?
            .into_values()
            .collect()
    };
    Ok(RunData {
        source: path.to_path_buf(),
        plan_fingerprint: manifest.plan_fingerprint,
        plan: Some(manifest.plan),
        transcripts,
    })
}
