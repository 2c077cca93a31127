//! Bit-stable artifacts: canonical JSON, CSV tables and run manifests.
//!
//! JSON objects are written with sorted keys and every float as
//! `{:.16e}` (17 significant digits), so two runs with the same manifest
//! produce identical bytes.

use std::collections::BTreeMap;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Digest of one input consumed by a run.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputHash {
    pub source: String,
    pub sha256: String,
}

impl InputHash {
    pub fn of(source: impl Into<String>, content: &[u8]) -> Self {
        InputHash { source: source.into(), sha256: hex::encode(Sha256::digest(content)) }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub parameters: BTreeMap<String, Value>,
    pub tool_version: String,
    pub timestamp: String,
    pub input_hashes: Vec<InputHash>,
}

impl RunManifest {
    pub fn new(command: impl Into<String>, timestamp: impl Into<String>) -> Self {
        RunManifest {
            command: command.into(),
            parameters: BTreeMap::new(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: timestamp.into(),
            input_hashes: Vec::new(),
        }
    }

    pub fn param(&mut self, key: &str, value: impl Serialize) -> &mut Self {
        let v = serde_json::to_value(value).unwrap_or(Value::Null);
        self.parameters.insert(key.to_string(), v);
        self
    }

    pub fn input(&mut self, source: impl Into<String>, content: &[u8]) -> &mut Self {
        self.input_hashes.push(InputHash::of(source, content));
        self
    }
}

/// RFC 3339 rendering of a unix time in UTC.
pub fn format_timestamp(unix_seconds: i64) -> String {
    time::OffsetDateTime::from_unix_timestamp(unix_seconds)
        .ok()
        .and_then(|t| t.format(&time::format_description::well_known::Rfc3339).ok())
        .unwrap_or_else(|| format!("unix:{unix_seconds}"))
}

/// Timestamp for a manifest: `SOURCE_DATE_EPOCH` when set, else the clock.
pub fn default_timestamp() -> String {
    let secs = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.trim().parse::<i64>().ok())
        .unwrap_or_else(|| {
            std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map_or(0, |d| d.as_secs() as i64)
        });
    format_timestamp(secs)
}

pub fn format_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".to_string()
    } else if x > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

struct CanonicalFormatter<'a>(PrettyFormatter<'a>);

impl Formatter for CanonicalFormatter<'_> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(format_float(value).as_bytes())
    }
    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }
    fn begin_array<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.begin_array(writer)
    }
    fn end_array<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_array(writer)
    }
    fn begin_array_value<W: ?Sized + io::Write>(&mut self, writer: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(writer, first)
    }
    fn end_array_value<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_array_value(writer)
    }
    fn begin_object<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.begin_object(writer)
    }
    fn end_object<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_object(writer)
    }
    fn begin_object_key<W: ?Sized + io::Write>(&mut self, writer: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(writer, first)
    }
    fn begin_object_value<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.begin_object_value(writer)
    }
    fn end_object_value<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_object_value(writer)
    }
}

/// Canonical JSON text of any serializable value. Non-finite floats become
/// `null`, as `serde_json` requires.
pub fn to_canonical_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    // Going through `Value` sorts object keys.
    let v = serde_json::to_value(value).map_err(|e| Error::MalformedSpec(format!("serialization failed: {e}")))?;
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, CanonicalFormatter(PrettyFormatter::with_indent(b"  ")));
    v.serialize(&mut ser).map_err(|e| Error::MalformedSpec(format!("serialization failed: {e}")))?;
    out.push(b'\n');
    Ok(String::from_utf8(out).expect("serde_json emits UTF-8"))
}

/// `{"manifest": …, "result": …}`.
pub fn envelope<T: Serialize + ?Sized>(manifest: &RunManifest, result: &T) -> Result<String> {
    #[derive(Serialize)]
    struct Envelope<'a, T: ?Sized> {
        manifest: &'a RunManifest,
        result: &'a T,
    }
    to_canonical_json(&Envelope { manifest, result })
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> Error + '_ {
    move |source| Error::IoFailure { path: path.display().to_string(), source }
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    std::fs::write(path, text).map_err(io_err(path))
}

/// Write `result` inside an envelope carrying `manifest`.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, manifest: &RunManifest, result: &T) -> Result<()> {
    write_text(path, &envelope(manifest, result)?)
}

/// One CSV cell.
#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => format_float(*v),
            Cell::Text(s) => s.clone(),
        }
    }
}

pub fn csv_string(header: &[&str], rows: &[Vec<Cell>]) -> Result<String> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let fail = |e: csv::Error| Error::InvalidArgument(format!("csv encoding failed: {e}"));
    w.write_record(header).map_err(fail)?;
    for row in rows {
        w.write_record(row.iter().map(Cell::render)).map_err(fail)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::InvalidArgument(format!("csv encoding failed: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv cells are UTF-8"))
}

pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<Cell>]) -> Result<()> {
    write_text(path, &csv_string(header, rows)?)
}

/// Machine-readable description of a failure, with its diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ErrorReport {
    pub kind: String,
    pub message: String,
    pub details: BTreeMap<String, Value>,
}

impl From<&Error> for ErrorReport {
    fn from(e: &Error) -> Self {
        let mut details = BTreeMap::new();
        let mut put = |k: &str, v: Value| {
            details.insert(k.to_string(), v);
        };
        let kind = match e {
            Error::EmptyCoefficients => "EmptyCoefficients",
            Error::NonFiniteCoefficient { index } => {
                put("index", (*index).into());
                "NonFiniteCoefficient"
            }
            Error::OrderExhausted { requested, valid_order } => {
                put("requested", (*requested).into());
                put("valid_order", (*valid_order).into());
                "OrderExhausted"
            }
            Error::EmptyCombination => "EmptyCombination",
            Error::InvalidDisk { radius, grid_points } => {
                put("radius", (*radius).into());
                put("grid_points", (*grid_points).into());
                "InvalidDisk"
            }
            Error::ZeroOperator => "ZeroOperator",
            Error::InvalidArgument(_) => "InvalidArgument",
            Error::NotWeyl { off_diagonal, diagonal_spread } => {
                put("off_diagonal_max", (*off_diagonal).into());
                put("diagonal_spread", (*diagonal_spread).into());
                "NotWeyl"
            }
            Error::InconsistentConvolution { column, row, deviation } => {
                put("column", (*column).into());
                put("row", (*row).into());
                put("deviation", (*deviation).into());
                "InconsistentConvolution"
            }
            Error::KernelResidualTooLarge { residual, threshold } => {
                put("residual", (*residual).into());
                put("threshold", (*threshold).into());
                "KernelResidualTooLarge"
            }
            Error::ZeroOrderOperator => "ZeroOrderOperator",
            Error::ConvolutionCase => "ConvolutionCase",
            Error::SingularSystem { condition, ridge } => {
                put("condition", (*condition).into());
                put("ridge", (*ridge).into());
                "SingularSystem"
            }
            Error::SearchExhausted { threshold, radius_cap } => {
                put("threshold", (*threshold).into());
                put("radius_cap", (*radius_cap).into());
                "SearchExhausted"
            }
            Error::BudgetExceeded { target, residual, budget, stage } => {
                put("target", (*target).into());
                put("residual", (*residual).into());
                put("budget", (*budget).into());
                put("stage", stage.clone().into());
                "BudgetExceeded"
            }
            Error::ScheduleOverflow { target, requested, cap } => {
                put("target", (*target).into());
                put("requested", (*requested).into());
                put("cap", (*cap).into());
                "ScheduleOverflow"
            }
            Error::MalformedSpec(_) => "MalformedSpec",
            Error::IoFailure { path, .. } => {
                put("path", path.clone().into());
                "IoFailure"
            }
        };
        ErrorReport { kind: kind.to_string(), message: e.to_string(), details }
    }
}

/// Exit code for a failed run: 1 for an honest negative scientific result,
/// 2 for unusable input.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NotWeyl { .. }
        | Error::InconsistentConvolution { .. }
        | Error::KernelResidualTooLarge { .. }
        | Error::SingularSystem { .. }
        | Error::SearchExhausted { .. }
        | Error::BudgetExceeded { .. }
        | Error::ScheduleOverflow { .. }
        | Error::OrderExhausted { .. } => 1,
        _ => 2,
    }
}
