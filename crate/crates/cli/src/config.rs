//! Run configuration read from TOML.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub metric: MetricSection,
    pub chart: ChartSection,
    #[serde(default)]
    pub analysis: AnalysisSection,
    #[serde(default)]
    pub numeric: NumericSection,
    #[serde(default)]
    pub output: OutputSection,
}

/// `family` picks a registry entry; the remaining keys are its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricSection {
    pub family: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    /// Riemannian `g_ij(x)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<String>>>,
    /// Randers `a_ij(x)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<Vec<Vec<String>>>,
    /// Randers `b_i(x)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expression: Option<String>,
    /// Scalar parameters of families that take them.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartSection {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Analysis {
    Tensors,
    Connections,
    Geodesic,
    Transport,
    Average,
    Classify,
    Holonomy,
}

impl Analysis {
    pub fn name(self) -> &'static str {
        match self {
            Analysis::Tensors => "tensors",
            Analysis::Connections => "connections",
            Analysis::Geodesic => "geodesic",
            Analysis::Transport => "transport",
            Analysis::Average => "average",
            Analysis::Classify => "classify",
            Analysis::Holonomy => "holonomy",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Assertion {
    Berwald,
    NotBerwald,
    Landsberg,
    Rigidity,
}

impl Assertion {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "berwald" => Some(Assertion::Berwald),
            "not_berwald" | "not-berwald" => Some(Assertion::NotBerwald),
            "landsberg" => Some(Assertion::Landsberg),
            "rigidity" => Some(Assertion::Rigidity),
            _ => None,
        }
    }

    /// Verdict key in the report and the value that satisfies the assertion.
    pub fn expectation(self) -> (&'static str, &'static str) {
        match self {
            Assertion::Berwald => ("is_berwald", "yes"),
            Assertion::NotBerwald => ("is_berwald", "no"),
            Assertion::Landsberg => ("is_landsberg", "yes"),
            Assertion::Rigidity => ("rigidity_holds", "yes"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeodesicSection {
    pub x0: Vec<f64>,
    pub y0: Vec<f64>,
    pub length: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HolonomySection {
    /// Base point; the chart centre when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<Vec<f64>>,
    #[serde(default = "default_loop_sizes")]
    pub loop_sizes: Vec<f64>,
    #[serde(default = "default_loop_count")]
    pub loop_count: usize,
}

impl Default for HolonomySection {
    fn default() -> Self {
        Self {
            x: None,
            loop_sizes: default_loop_sizes(),
            loop_count: default_loop_count(),
        }
    }
}

fn default_loop_sizes() -> Vec<f64> {
    vec![0.1, 0.2]
}

fn default_loop_count() -> usize {
    12
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSection {
    #[serde(default = "default_run")]
    pub run: Vec<Analysis>,
    /// Sampled base points.
    #[serde(default = "default_points")]
    pub points: usize,
    /// Fibre directions per base point.
    #[serde(default = "default_directions")]
    pub directions: usize,
    /// Random loops for transport and rigidity.
    #[serde(default = "default_curves")]
    pub curves: usize,
    #[serde(default = "default_loop_side")]
    pub loop_side: f64,
    #[serde(default = "default_t_grid")]
    pub t_grid: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assert: Option<Assertion>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geodesic: Option<GeodesicSection>,
    #[serde(default)]
    pub holonomy: HolonomySection,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        Self {
            run: default_run(),
            points: default_points(),
            directions: default_directions(),
            curves: default_curves(),
            loop_side: default_loop_side(),
            t_grid: default_t_grid(),
            assert: None,
            geodesic: None,
            holonomy: HolonomySection::default(),
        }
    }
}

fn default_run() -> Vec<Analysis> {
    vec![Analysis::Tensors, Analysis::Connections, Analysis::Classify]
}

fn default_points() -> usize {
    5
}

fn default_directions() -> usize {
    16
}

fn default_curves() -> usize {
    2
}

fn default_loop_side() -> f64 {
    0.5
}

fn default_t_grid() -> Vec<f64> {
    vec![0.0, 0.25, 0.5, 0.75, 1.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericSection {
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// Nodes of the 2D trapezoid rule, or longitudes in 3D.
    #[serde(default = "default_quadrature")]
    pub quadrature_n: usize,
    #[serde(default = "default_rtol")]
    pub ode_rtol: f64,
    #[serde(default = "default_atol")]
    pub ode_atol: f64,
    #[serde(default = "default_indicatrix_samples")]
    pub indicatrix_samples: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

impl Default for NumericSection {
    fn default() -> Self {
        Self {
            tol: default_tol(),
            quadrature_n: default_quadrature(),
            ode_rtol: default_rtol(),
            ode_atol: default_atol(),
            indicatrix_samples: default_indicatrix_samples(),
            seed: default_seed(),
        }
    }
}

fn default_tol() -> f64 {
    1e-6
}

fn default_quadrature() -> usize {
    64
}

fn default_rtol() -> f64 {
    1e-9
}

fn default_atol() -> f64 {
    1e-11
}

fn default_indicatrix_samples() -> usize {
    32
}

fn default_seed() -> u64 {
    42
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    /// Report path; stdout when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<PathBuf>,
    /// CSV of sampled tensors.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_str(text: &str, origin: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| {
            let location = match e.span() {
                Some(span) => {
                    let (line, col) = line_col(text, span.start);
                    format!("{origin}:{line}:{col}")
                }
                None => origin.to_string(),
            };
            ConfigError::new(location, e.message())
        })?;
        cfg.validate(origin)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let origin = path.display().to_string();
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new(origin.clone(), e.to_string()))?;
        Self::from_str(&text, &origin)
    }

    fn validate(&self, origin: &str) -> Result<(), ConfigError> {
        let at = |key: &str| format!("{origin}: [{key}]");
        let c = &self.chart;
        if c.lower.len() != c.upper.len() {
            return Err(ConfigError::new(
                at("chart"),
                "lower and upper have different lengths",
            ));
        }
        if c.lower.iter().zip(&c.upper).any(|(l, u)| !(l < u)) {
            return Err(ConfigError::new(at("chart"), "chart box is empty"));
        }
        if let Some(d) = self.metric.dim {
            if d != c.lower.len() {
                return Err(ConfigError::new(
                    at("metric"),
                    format!("dim = {d} but the chart has {} coordinates", c.lower.len()),
                ));
            }
        }
        let a = &self.analysis;
        if a.points == 0 {
            return Err(ConfigError::new(at("analysis"), "points must be positive"));
        }
        if !(a.loop_side > 0.0) {
            return Err(ConfigError::new(
                at("analysis"),
                "loop_side must be positive",
            ));
        }
        if a.t_grid.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return Err(ConfigError::new(
                at("analysis"),
                "t_grid values must lie in [0, 1]",
            ));
        }
        let n = &self.numeric;
        if !(n.tol > 0.0 && n.ode_rtol > 0.0 && n.ode_atol > 0.0) {
            return Err(ConfigError::new(
                at("numeric"),
                "tolerances must be positive",
            ));
        }
        if n.quadrature_n < 4 {
            return Err(ConfigError::new(
                at("numeric"),
                "quadrature_n must be at least 4",
            ));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.chart.lower.len()
    }

    pub fn chart_center(&self) -> Vec<f64> {
        self.chart
            .lower
            .iter()
            .zip(&self.chart.upper)
            .map(|(l, u)| 0.5 * (l + u))
            .collect()
    }
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before
        .rfind('\n')
        .map_or(before.len(), |p| before.len() - p - 1)
        + 1;
    (line, col)
}
