//! Verdicts, residuals and the aggregated classification report.

use std::collections::BTreeMap;

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Yes,
    No,
    Inconclusive,
}

impl Verdict {
    /// `yes` up to `tol`, `no` from `10 tol`, `inconclusive` between.
    pub fn from_residual(value: f64, tol: f64) -> Self {
        if value.is_nan() {
            Verdict::Inconclusive
        } else if value <= tol {
            Verdict::Yes
        } else if value >= 10.0 * tol {
            Verdict::No
        } else {
            Verdict::Inconclusive
        }
    }

    /// Both must hold for `yes`; either failing clearly gives `no`.
    pub fn and(self, other: Verdict) -> Verdict {
        match (self, other) {
            (Verdict::Yes, Verdict::Yes) => Verdict::Yes,
            (Verdict::No, _) | (_, Verdict::No) => Verdict::No,
            _ => Verdict::Inconclusive,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Verdict::Yes => "yes",
            Verdict::No => "no",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

/// Scales a tolerance by the size of the compared quantities.
pub fn effective_tolerance(tol: f64, magnitude: f64) -> f64 {
    tol * magnitude.max(1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Residual {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub samples: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestOutcome {
    pub verdict: Verdict,
    pub residuals: Vec<Residual>,
    pub notes: Vec<String>,
}

impl TestOutcome {
    pub fn residual(&self, name: &str) -> Option<&Residual> {
        self.residuals.iter().find(|r| r.name == name)
    }

    /// Largest residual value.
    pub fn worst(&self) -> f64 {
        self.residuals.iter().map(|r| r.value).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum HolonomyClass {
    Trivial,
    MetricPreserving,
    SpecialLinear,
    GeneralLinear,
}

impl HolonomyClass {
    pub fn name(self) -> &'static str {
        match self {
            HolonomyClass::Trivial => "trivial",
            HolonomyClass::MetricPreserving => "metric_preserving",
            HolonomyClass::SpecialLinear => "special_linear",
            HolonomyClass::GeneralLinear => "general_linear",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(untagged)]
pub enum VerdictValue {
    Verdict(Verdict),
    Class(HolonomyClass),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SamplingMeta {
    pub points: usize,
    pub directions: usize,
    pub curves: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassificationReport {
    pub metric: String,
    pub verdicts: BTreeMap<String, VerdictValue>,
    pub residuals: Vec<Residual>,
    pub sampling: SamplingMeta,
    pub notes: Vec<String>,
}

impl ClassificationReport {
    pub fn verdict(&self, key: &str) -> Option<Verdict> {
        match self.verdicts.get(key) {
            Some(VerdictValue::Verdict(v)) => Some(*v),
            _ => None,
        }
    }

    pub fn holonomy_class(&self) -> Option<HolonomyClass> {
        match self.verdicts.get("holonomy_class") {
            Some(VerdictValue::Class(c)) => Some(*c),
            _ => None,
        }
    }
}
