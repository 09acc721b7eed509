//! Run records: JSON Lines with a header, one line per observation and a
//! closing result line. Each line is flushed as soon as it is written, so a
//! record cut short still holds a valid prefix of the observations.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use moboga::engine::{exploit, Archive, Observation, StopReason};
use moboga::{Candidate, ObjectiveVector, ParamSpec, ParamValue};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub format_version: u32,
    pub seed: u64,
    pub config: RunConfig,
    pub parameters: Vec<ParamSpec>,
    pub objectives: Vec<String>,
    pub constraints: Vec<ConstraintInfo>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintInfo {
    pub name: String,
    pub hard: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationLine {
    pub index: usize,
    pub candidate: Vec<ParamValue>,
    pub encoded: Vec<f64>,
    pub objectives: Vec<f64>,
    pub feasible: bool,
    pub iteration: usize,
    /// Seconds since the Unix epoch.
    pub timestamp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultLine {
    pub pof: Vec<usize>,
    pub best_index: usize,
    pub closeness: Vec<f64>,
    pub stop_reason: StopReason,
    pub iterations_used: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum Line {
    Header(Box<Header>),
    Observation(ObservationLine),
    Result(ResultLine),
}

pub struct RecordWriter {
    out: BufWriter<File>,
    path: std::path::PathBuf,
    next_index: usize,
}

impl RecordWriter {
    pub fn create(path: &Path, header: Header) -> CliResult<Self> {
        let file = File::create(path).map_err(|e| CliError::io(path, e))?;
        let mut w = RecordWriter {
            out: BufWriter::new(file),
            path: path.to_path_buf(),
            next_index: 0,
        };
        w.write(&Line::Header(Box::new(header)))?;
        Ok(w)
    }

    fn write(&mut self, line: &Line) -> CliResult<()> {
        let text = serde_json::to_string(line).map_err(|e| CliError::Runtime(e.to_string()))?;
        writeln!(self.out, "{text}")
            .and_then(|_| self.out.flush())
            .map_err(|e| CliError::io(&self.path, e))
    }

    pub fn observation(&mut self, o: &Observation) -> CliResult<()> {
        let timestamp = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs_f64())
            .unwrap_or(0.0);
        let line = ObservationLine {
            index: self.next_index,
            candidate: o.candidate.0.clone(),
            encoded: o.encoded.clone(),
            objectives: o.objectives.0.clone(),
            feasible: o.feasible,
            iteration: o.iteration,
            timestamp,
        };
        self.next_index += 1;
        self.write(&Line::Observation(line))
    }

    pub fn result(&mut self, r: ResultLine) -> CliResult<()> {
        self.write(&Line::Result(r))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub header: Header,
    pub observations: Vec<ObservationLine>,
    /// Missing when the run was interrupted.
    pub result: Option<ResultLine>,
}

impl RunRecord {
    pub fn read(path: &Path) -> CliResult<Self> {
        let file = File::open(path).map_err(|e| CliError::io(path, e))?;
        let bad =
            |n: usize, msg: String| CliError::Runtime(format!("{}:{n}: {msg}", path.display()));
        let mut header = None;
        let mut observations = Vec::new();
        let mut result = None;
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let n = i + 1;
            let line = line.map_err(|e| CliError::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: Line = serde_json::from_str(&line).map_err(|e| bad(n, e.to_string()))?;
            match parsed {
                Line::Header(h) if header.is_none() && n == 1 => {
                    if h.format_version != FORMAT_VERSION {
                        return Err(bad(
                            n,
                            format!("unsupported format_version {}", h.format_version),
                        ));
                    }
                    header = Some(*h);
                }
                Line::Header(_) => return Err(bad(n, "unexpected header line".into())),
                _ if header.is_none() => {
                    return Err(bad(n, "record must start with a header".into()))
                }
                Line::Observation(o) => {
                    if result.is_some() {
                        return Err(bad(n, "observation after the result line".into()));
                    }
                    if o.index != observations.len() {
                        return Err(bad(
                            n,
                            format!(
                                "expected observation {}, found {}",
                                observations.len(),
                                o.index
                            ),
                        ));
                    }
                    observations.push(o);
                }
                Line::Result(r) => {
                    if result.is_some() {
                        return Err(bad(n, "duplicate result line".into()));
                    }
                    result = Some(r);
                }
            }
        }
        let header = header.ok_or_else(|| bad(0, "empty record".into()))?;
        let record = RunRecord {
            header,
            observations,
            result,
        };
        record.check().map_err(|m| bad(0, m))?;
        Ok(record)
    }

    fn check(&self) -> Result<(), String> {
        let d = self.header.parameters.len();
        let k = self.header.objectives.len();
        for o in &self.observations {
            if o.candidate.len() != d || o.objectives.len() != k {
                return Err(format!("observation {} has the wrong shape", o.index));
            }
        }
        if let Some(r) = &self.result {
            let n = self.observations.len();
            if r.pof.iter().any(|&i| i >= n)
                || r.closeness.len() != r.pof.len()
                || !r.pof.contains(&r.best_index)
            {
                return Err("result line is inconsistent with the observations".into());
            }
        }
        Ok(())
    }

    pub fn archive(&self) -> CliResult<Archive> {
        let mut a = Archive::new();
        for o in &self.observations {
            a.push(Observation {
                candidate: Candidate(o.candidate.clone()),
                encoded: o.encoded.clone(),
                objectives: ObjectiveVector(o.objectives.clone()),
                feasible: o.feasible,
                iteration: o.iteration,
            })
            .map_err(|e| CliError::Runtime(format!("observation {}: {e}", o.index)))?;
        }
        Ok(a)
    }

    /// Front indices, best index and closeness, recomputed from the
    /// observations when the record has no result line.
    pub fn front(&self) -> CliResult<(Vec<usize>, usize, Vec<f64>)> {
        if let Some(r) = &self.result {
            return Ok((r.pof.clone(), r.best_index, r.closeness.clone()));
        }
        let pick = exploit(&self.archive()?, self.header.config.weights.as_deref())?;
        Ok((pick.pof, pick.best_index, pick.closeness))
    }
}
