//! Named metric families that a config can refer to.

use std::collections::BTreeMap;

use finsler::{presets, FinslerError, FinslerStructure, MetricExpression};
use serde::Serialize;

use crate::config::MetricSection;
use crate::error::ConfigError;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamDoc {
    pub key: String,
    pub doc: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FamilyInfo {
    pub name: String,
    pub description: String,
    pub params: Vec<ParamDoc>,
    /// Fixed dimension, if the family has one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
}

impl FamilyInfo {
    pub fn new(name: &str, description: &str) -> Self {
        Self {
            name: name.into(),
            description: description.into(),
            params: Vec::new(),
            dim: None,
        }
    }

    pub fn param(mut self, key: &str, doc: &str) -> Self {
        self.params.push(ParamDoc {
            key: key.into(),
            doc: doc.into(),
        });
        self
    }

    pub fn fixed_dim(mut self, dim: usize) -> Self {
        self.dim = Some(dim);
        self
    }
}

/// Builds a structure from the `[metric]` section. The second argument is
/// the chart dimension, the third the config file name used in errors.
pub type Builder =
    Box<dyn Fn(&MetricSection, usize, &str) -> Result<FinslerStructure, ConfigError> + Send + Sync>;

pub struct MetricRegistry {
    entries: BTreeMap<String, (FamilyInfo, Builder)>,
}

impl Default for MetricRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}

fn key_error(origin: &str, key: &str, e: impl std::fmt::Display) -> ConfigError {
    ConfigError::new(format!("{origin}: [metric].{key}"), e.to_string())
}

fn required<'a, T>(v: &'a Option<T>, origin: &str, key: &str) -> Result<&'a T, ConfigError> {
    v.as_ref()
        .ok_or_else(|| key_error(origin, key, "missing for this family"))
}

/// Parses every entry on its own so errors name the offending entry.
fn check_matrix(m: &[Vec<String>], dim: usize, origin: &str, key: &str) -> Result<(), ConfigError> {
    if m.len() != dim || m.iter().any(|r| r.len() != dim) {
        return Err(key_error(
            origin,
            key,
            format!("expected a {dim}x{dim} matrix"),
        ));
    }
    for (i, row) in m.iter().enumerate() {
        for (j, e) in row.iter().enumerate() {
            let parsed = MetricExpression::parse(e, dim)
                .map_err(|err| key_error(origin, &format!("{key}[{i}][{j}]"), err))?;
            if parsed.depends_on_fiber() {
                return Err(key_error(
                    origin,
                    &format!("{key}[{i}][{j}]"),
                    "entries must not depend on y",
                ));
            }
        }
    }
    Ok(())
}

fn check_vector(v: &[String], dim: usize, origin: &str, key: &str) -> Result<(), ConfigError> {
    if v.len() != dim {
        return Err(key_error(origin, key, format!("expected {dim} entries")));
    }
    for (i, e) in v.iter().enumerate() {
        MetricExpression::parse(e, dim)
            .map_err(|err| key_error(origin, &format!("{key}[{i}]"), err))?;
    }
    Ok(())
}

fn build_error(origin: &str, e: FinslerError) -> ConfigError {
    ConfigError::new(format!("{origin}: [metric]"), e.to_string())
}

impl MetricRegistry {
    pub fn empty() -> Self {
        Self {
            entries: BTreeMap::new(),
        }
    }

    pub fn with_builtins() -> Self {
        let mut r = Self::empty();
        r.register(
            FamilyInfo::new("euclidean", "F = |y| in any dimension"),
            Box::new(|_, dim, origin| {
                FinslerStructure::euclidean(dim).map_err(|e| build_error(origin, e))
            }),
        );
        r.register(
            FamilyInfo::new("riemannian", "F = sqrt(g_ij(x) y^i y^j)")
                .param("matrix", "n x n array of expression strings in x1..xn"),
            Box::new(|m, dim, origin| {
                let matrix = required(&m.matrix, origin, "matrix")?;
                check_matrix(matrix, dim, origin, "matrix")?;
                FinslerStructure::riemannian(matrix).map_err(|e| build_error(origin, e))
            }),
        );
        r.register(
            FamilyInfo::new("randers", "F = sqrt(a_ij(x) y^i y^j) + b_i(x) y^i")
                .param("alpha", "n x n array of expression strings in x1..xn")
                .param("beta", "n expression strings in x1..xn"),
            Box::new(|m, dim, origin| {
                let alpha = required(&m.alpha, origin, "alpha")?;
                let beta = required(&m.beta, origin, "beta")?;
                check_matrix(alpha, dim, origin, "alpha")?;
                check_vector(beta, dim, origin, "beta")?;
                FinslerStructure::randers(alpha, beta).map_err(|e| build_error(origin, e))
            }),
        );
        r.register(
            FamilyInfo::new("custom", "any expression F(x, y) in x1..xn, y1..yn").param(
                "expression",
                "sqrt, sin, cos, exp, log, + - * / and integer powers",
            ),
            Box::new(|m, dim, origin| {
                let src = required(&m.expression, origin, "expression")?;
                FinslerStructure::custom(src, dim).map_err(|e| key_error(origin, "expression", e))
            }),
        );
        r.register(
            FamilyInfo::new("randers-constant", "sqrt(y1^2 + y2^2) + b y1")
                .param(
                    "params.b",
                    "constant one-form coefficient, |b| < 1 for strong convexity",
                )
                .fixed_dim(2),
            Box::new(|m, _, origin| {
                let b = *m
                    .params
                    .get("b")
                    .ok_or_else(|| key_error(origin, "params.b", "missing for this family"))?;
                presets::randers_constant(b).map_err(|e| build_error(origin, e))
            }),
        );
        let docs = [
            ("hyperbolic", "upper half-plane, g = (dx1^2 + dx2^2) / x2^2"),
            ("sphere-patch", "unit sphere in stereographic coordinates"),
            (
                "berwald-randers",
                "flat alpha with beta = 0.5 dx1, locally Minkowski",
            ),
            ("nonberwald-randers", "flat alpha with beta = 0.3 x2 dx1"),
        ];
        for (name, doc) in docs {
            r.register(
                FamilyInfo::new(name, doc).fixed_dim(2),
                Box::new(move |_, _, _| Ok(presets::by_name(name).expect("registered preset"))),
            );
        }
        r
    }

    /// Adds or replaces a family.
    pub fn register(&mut self, info: FamilyInfo, builder: Builder) {
        self.entries.insert(info.name.clone(), (info, builder));
    }

    pub fn families(&self) -> Vec<&FamilyInfo> {
        self.entries.values().map(|(i, _)| i).collect()
    }

    pub fn get(&self, name: &str) -> Option<&FamilyInfo> {
        self.entries.get(name).map(|(i, _)| i)
    }

    pub fn build(
        &self,
        metric: &MetricSection,
        dim: usize,
        origin: &str,
    ) -> Result<FinslerStructure, ConfigError> {
        let (info, builder) = self.entries.get(&metric.family).ok_or_else(|| {
            let known: Vec<&str> = self.entries.keys().map(String::as_str).collect();
            key_error(
                origin,
                "family",
                format!(
                    "unknown family `{}`; known: {}",
                    metric.family,
                    known.join(", ")
                ),
            )
        })?;
        if let Some(d) = info.dim {
            if d != dim {
                return Err(ConfigError::new(
                    format!("{origin}: [chart]"),
                    format!(
                        "family `{}` is {d}-dimensional but the chart has {dim} coordinates",
                        info.name
                    ),
                ));
            }
        }
        let fs = builder(metric, dim, origin)?;
        if fs.dim() != dim {
            return Err(ConfigError::new(
                format!("{origin}: [metric]"),
                format!(
                    "metric is {}-dimensional but the chart has {dim} coordinates",
                    fs.dim()
                ),
            ));
        }
        Ok(match &metric.label {
            Some(l) => fs.with_label(l.clone()),
            None => fs,
        })
    }

    /// Human-readable listing, one family per paragraph.
    pub fn describe(&self) -> String {
        let mut out = String::new();
        for info in self.families() {
            out.push_str(&info.name);
            if let Some(d) = info.dim {
                out.push_str(&format!(" (dim {d})"));
            }
            out.push_str(&format!("\n    {}\n", info.description));
            for p in &info.params {
                out.push_str(&format!("    {}: {}\n", p.key, p.doc));
            }
        }
        out
    }
}
