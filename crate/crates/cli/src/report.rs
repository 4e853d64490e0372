//! Report document and its JSON encoding.

use std::collections::BTreeMap;
use std::io;

use finsler::classify::{HolonomyClass, Residual, Verdict, VerdictValue};
use finsler::transport::CurveSpec;
use finsler::FinslerError;
use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::config::RunConfig;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize)]
pub struct MetricSummary {
    pub label: String,
    pub family: String,
    pub dim: usize,
    pub expression: String,
}

/// A verdict with the residual that decided it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerdictEntry {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verdict: Option<Verdict>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub class: Option<HolonomyClass>,
    pub residual: String,
    pub value: f64,
    pub tolerance: f64,
    pub samples: usize,
    pub seed: u64,
}

impl VerdictEntry {
    pub fn new(value: VerdictValue, decisive: &Residual) -> Self {
        let (verdict, class) = match value {
            VerdictValue::Verdict(v) => (Some(v), None),
            VerdictValue::Class(c) => (None, Some(c)),
        };
        Self {
            verdict,
            class,
            residual: decisive.name.clone(),
            value: decisive.value,
            tolerance: decisive.tolerance,
            samples: decisive.samples,
            seed: decisive.seed,
        }
    }

    /// `yes`/`no`/`inconclusive`, or the holonomy class name.
    pub fn label(&self) -> &'static str {
        match (self.verdict, self.class) {
            (Some(v), _) => v.name(),
            (None, Some(c)) => c.name(),
            (None, None) => "none",
        }
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Samples {
    pub seed: u64,
    pub points: Vec<Vec<f64>>,
    pub directions: Vec<Vec<f64>>,
    pub curves: Vec<CurveSpec>,
}

/// Work counters. They replace wall-clock times so that reports are
/// reproducible byte for byte.
#[derive(Debug, Clone, Default, Serialize)]
pub struct Timings {
    pub fiber_evaluations: usize,
    pub quadrature_nodes: usize,
    pub ode_steps: usize,
    pub curves_transported: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ErrorEntry {
    pub analysis: String,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y: Option<Vec<f64>>,
}

impl ErrorEntry {
    pub fn from_numeric(analysis: &str, e: &FinslerError) -> Self {
        let (x, y) = match e.point() {
            Some((x, y)) => (Some(x.to_vec()), (!y.is_empty()).then(|| y.to_vec())),
            None => (None, None),
        };
        Self {
            analysis: analysis.into(),
            message: e.to_string(),
            x,
            y,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub command: String,
    pub metric: MetricSummary,
    pub config: RunConfig,
    pub verdicts: BTreeMap<String, VerdictEntry>,
    pub residuals: Vec<Residual>,
    pub samples: Samples,
    pub analyses: BTreeMap<String, serde_json::Value>,
    pub notes: Vec<String>,
    pub timings: Timings,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorEntry>,
}

impl Report {
    pub fn to_json(&self) -> String {
        let mut buf = Vec::new();
        let mut ser = serde_json::Serializer::with_formatter(&mut buf, FloatFormatter::default());
        self.serialize(&mut ser).expect("report serializes");
        buf.push(b'\n');
        String::from_utf8(buf).expect("JSON is UTF-8")
    }
}

/// Pretty printer writing every float with 17 significant digits.
#[derive(Default)]
pub struct FloatFormatter {
    inner: PrettyFormatter<'static>,
}

impl Formatter for FloatFormatter {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.begin_array(writer)
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.end_array(writer)
    }

    fn begin_array_value<W: ?Sized + io::Write>(
        &mut self,
        writer: &mut W,
        first: bool,
    ) -> io::Result<()> {
        self.inner.begin_array_value(writer, first)
    }

    fn end_array_value<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.end_array_value(writer)
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.begin_object(writer)
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.end_object(writer)
    }

    fn begin_object_key<W: ?Sized + io::Write>(
        &mut self,
        writer: &mut W,
        first: bool,
    ) -> io::Result<()> {
        self.inner.begin_object_key(writer, first)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.begin_object_value(writer)
    }

    fn end_object_value<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.end_object_value(writer)
    }
}
