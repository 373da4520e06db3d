//! Line-oriented trace format shared by the runtime and the CLI tooling.
//!
//! Every record is one ASCII line, LF-terminated:
//!
//! ```text
//! <tick>\t<source>\t<kind>\t<detail>
//! ```
//!
//! Header lines start with `#` and carry the format version and a hash of
//! the effective configuration — never timestamps or hostnames, so a run is
//! byte-reproducible. Records appear in execution order: ascending tick,
//! then ascending priority of the emitting instance, then emission order.

use std::fmt;
use std::str::FromStr;

pub const FORMAT_VERSION: &str = "siloplc-trace v1";

/// Record categories. `EVT` logs event dispatches (including ignored ones),
/// `ACT` actuator commands, `STATE` machine transitions, `RES` resource
/// arbitration, `MSG` bus traffic, `FAULT` plant constraint violations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RecordKind {
    Evt,
    Act,
    State,
    Msg,
    Res,
    Fault,
}

impl RecordKind {
    pub const ALL: [RecordKind; 6] = [
        RecordKind::Evt,
        RecordKind::Act,
        RecordKind::State,
        RecordKind::Msg,
        RecordKind::Res,
        RecordKind::Fault,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RecordKind::Evt => "EVT",
            RecordKind::Act => "ACT",
            RecordKind::State => "STATE",
            RecordKind::Msg => "MSG",
            RecordKind::Res => "RES",
            RecordKind::Fault => "FAULT",
        }
    }
}

impl fmt::Display for RecordKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RecordKind {
    type Err = ();

    fn from_str(s: &str) -> Result<RecordKind, ()> {
        match s {
            "EVT" => Ok(RecordKind::Evt),
            "ACT" => Ok(RecordKind::Act),
            "STATE" => Ok(RecordKind::State),
            "MSG" => Ok(RecordKind::Msg),
            "RES" => Ok(RecordKind::Res),
            "FAULT" => Ok(RecordKind::Fault),
            _ => Err(()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceRecord {
    pub tick: u64,
    pub source: String,
    pub kind: RecordKind,
    pub detail: String,
}

impl fmt::Display for TraceRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}\t{}\t{}\t{}", self.tick, self.source, self.kind, self.detail)
    }
}

/// An in-memory trace: optional header values plus the ordered records.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Trace {
    pub config_hash: Option<String>,
    pub records: Vec<TraceRecord>,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum TraceParseError {
    #[error("line {line}: expected 4 tab-separated fields")]
    FieldCount { line: usize },
    #[error("line {line}: bad tick `{text}`")]
    BadTick { line: usize, text: String },
    #[error("line {line}: unknown record kind `{text}`")]
    BadKind { line: usize, text: String },
    #[error("line {line}: tick {tick} decreases below {prev}")]
    OutOfOrder { line: usize, tick: u64, prev: u64 },
}

impl Trace {
    pub fn push(&mut self, tick: u64, source: &str, kind: RecordKind, detail: String) {
        self.records.push(TraceRecord {
            tick,
            source: source.to_string(),
            kind,
            detail,
        });
    }

    /// Records of the given kinds, in trace order.
    pub fn filtered(&self, kinds: &[RecordKind]) -> Vec<&TraceRecord> {
        self.records
            .iter()
            .filter(|r| kinds.contains(&r.kind))
            .collect()
    }

    pub fn has_fault(&self) -> bool {
        self.records.iter().any(|r| r.kind == RecordKind::Fault)
    }

    /// Serializes header plus records in the exact on-disk byte format.
    pub fn to_file_string(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("# {FORMAT_VERSION}\n"));
        if let Some(h) = &self.config_hash {
            out.push_str(&format!("# config {h}\n"));
        }
        for r in &self.records {
            out.push_str(&r.to_string());
            out.push('\n');
        }
        out
    }

    /// Parses a trace file. Rejects malformed lines and ticks that go
    /// backwards; `#` lines are headers.
    pub fn parse(text: &str) -> Result<Trace, TraceParseError> {
        let mut trace = Trace::default();
        let mut prev_tick = 0u64;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            if raw.is_empty() {
                continue;
            }
            if let Some(header) = raw.strip_prefix('#') {
                let header = header.trim();
                if let Some(h) = header.strip_prefix("config ") {
                    trace.config_hash = Some(h.to_string());
                }
                continue;
            }
            let fields: Vec<&str> = raw.split('\t').collect();
            if fields.len() != 4 {
                return Err(TraceParseError::FieldCount { line });
            }
            let tick: u64 = fields[0].parse().map_err(|_| TraceParseError::BadTick {
                line,
                text: fields[0].to_string(),
            })?;
            let kind: RecordKind = fields[2].parse().map_err(|_| TraceParseError::BadKind {
                line,
                text: fields[2].to_string(),
            })?;
            if tick < prev_tick {
                return Err(TraceParseError::OutOfOrder {
                    line,
                    tick,
                    prev: prev_tick,
                });
            }
            prev_tick = tick;
            trace.records.push(TraceRecord {
                tick,
                source: fields[1].to_string(),
                kind,
                detail: fields[3].to_string(),
            });
        }
        Ok(trace)
    }
}

/// Formats a float the way every trace detail must: six decimal places.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.6}")
}
