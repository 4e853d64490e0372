//! Finsler structures: a chart dimension plus the scalar function `F(x, y)`.

use serde::Serialize;

use crate::error::{FinslerError, Result};
use crate::expr::{Expr, Func, MetricExpression};
use crate::scalar::Real;

/// How a structure was specified. Every family compiles to one expression.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum MetricFamily {
    Euclidean,
    /// `F = sqrt(a_ij(x) y^i y^j)`.
    Riemannian {
        matrix: Vec<Vec<String>>,
    },
    /// `F = sqrt(a_ij(x) y^i y^j) + b_i(x) y^i`.
    Randers {
        alpha: Vec<Vec<String>>,
        beta: Vec<String>,
    },
    Custom {
        expression: String,
    },
}

impl MetricFamily {
    pub fn tag(&self) -> &'static str {
        match self {
            MetricFamily::Euclidean => "euclidean",
            MetricFamily::Riemannian { .. } => "riemannian",
            MetricFamily::Randers { .. } => "randers",
            MetricFamily::Custom { .. } => "custom",
        }
    }
}

#[derive(Debug, Clone)]
pub struct FinslerStructure {
    dim: usize,
    label: String,
    family: MetricFamily,
    expr: MetricExpression,
    /// Entries of the quadratic form for the Riemannian family.
    quadratic: Option<Vec<Vec<MetricExpression>>>,
}

impl FinslerStructure {
    pub fn euclidean(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(FinslerError::UnsupportedDimension(dim));
        }
        let q = Expr::sum((0..dim).map(|i| Expr::Pow(Box::new(Expr::Y(i)), 2)));
        let expr = MetricExpression::from_ast(Expr::call(Func::Sqrt, q), dim)?;
        let id: Vec<Vec<String>> = (0..dim)
            .map(|i| {
                (0..dim)
                    .map(|j| if i == j { "1" } else { "0" }.to_string())
                    .collect()
            })
            .collect();
        Ok(Self {
            dim,
            label: "euclidean".into(),
            family: MetricFamily::Euclidean,
            expr,
            quadratic: Some(parse_matrix(&id, dim)?),
        })
    }

    pub fn riemannian(matrix: &[Vec<String>]) -> Result<Self> {
        let dim = matrix.len();
        let entries = parse_matrix(matrix, dim)?;
        let expr =
            MetricExpression::from_ast(Expr::call(Func::Sqrt, quadratic_form(&entries)), dim)?;
        Ok(Self {
            dim,
            label: "riemannian".into(),
            family: MetricFamily::Riemannian {
                matrix: matrix.to_vec(),
            },
            expr,
            quadratic: Some(entries),
        })
    }

    pub fn randers(alpha: &[Vec<String>], beta: &[String]) -> Result<Self> {
        let dim = alpha.len();
        if beta.len() != dim {
            return Err(FinslerError::DimensionMismatch {
                expected: dim,
                found: beta.len(),
            });
        }
        let entries = parse_matrix(alpha, dim)?;
        let mut b = Vec::with_capacity(dim);
        for s in beta {
            let e = MetricExpression::parse(s, dim)?;
            if e.depends_on_fiber() {
                return Err(FinslerError::InvalidArgument(format!(
                    "covector entry `{s}` must not depend on y"
                )));
            }
            b.push(e);
        }
        let linear = Expr::sum(
            b.iter()
                .enumerate()
                .filter(|(_, e)| !is_zero(e.ast()))
                .map(|(i, e)| Expr::mul(e.ast().clone(), Expr::Y(i))),
        );
        let ast = Expr::add(Expr::call(Func::Sqrt, quadratic_form(&entries)), linear);
        Ok(Self {
            dim,
            label: "randers".into(),
            family: MetricFamily::Randers {
                alpha: alpha.to_vec(),
                beta: beta.to_vec(),
            },
            expr: MetricExpression::from_ast(ast, dim)?,
            quadratic: None,
        })
    }

    pub fn custom(source: &str, dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(FinslerError::UnsupportedDimension(dim));
        }
        Ok(Self {
            dim,
            label: "custom".into(),
            family: MetricFamily::Custom {
                expression: source.to_string(),
            },
            expr: MetricExpression::parse(source, dim)?,
            quadratic: None,
        })
    }

    pub fn from_expression(expr: MetricExpression) -> Self {
        Self {
            dim: expr.dim(),
            label: "custom".into(),
            family: MetricFamily::Custom {
                expression: expr.source().to_string(),
            },
            expr,
            quadratic: None,
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn family(&self) -> &MetricFamily {
        &self.family
    }

    pub fn expression(&self) -> &MetricExpression {
        &self.expr
    }

    /// Matrix entries `a_ij(x)` when the structure is Riemannian by construction.
    pub fn quadratic_entries(&self) -> Option<&[Vec<MetricExpression>]> {
        self.quadratic.as_deref()
    }

    pub fn is_riemannian(&self) -> bool {
        self.quadratic.is_some()
    }

    pub fn value<T: Real>(&self, x: &[T], y: &[T]) -> Result<T> {
        self.expr.value(x, y)
    }
}

fn is_zero(e: &Expr) -> bool {
    matches!(e, Expr::Const(c) if *c == 0.0)
}

fn parse_matrix(m: &[Vec<String>], dim: usize) -> Result<Vec<Vec<MetricExpression>>> {
    if dim < 2 {
        return Err(FinslerError::UnsupportedDimension(dim));
    }
    let mut out = Vec::with_capacity(dim);
    for row in m {
        if row.len() != dim {
            return Err(FinslerError::DimensionMismatch {
                expected: dim,
                found: row.len(),
            });
        }
        let mut parsed = Vec::with_capacity(dim);
        for s in row {
            let e = MetricExpression::parse(s, dim)?;
            if e.depends_on_fiber() {
                return Err(FinslerError::InvalidArgument(format!(
                    "matrix entry `{s}` must not depend on y"
                )));
            }
            parsed.push(e);
        }
        out.push(parsed);
    }
    for i in 0..dim {
        for j in 0..i {
            if out[i][j].ast() != out[j][i].ast() {
                return Err(FinslerError::InvalidArgument(format!(
                    "matrix must be symmetric: entries ({}, {}) and ({}, {}) differ",
                    i + 1,
                    j + 1,
                    j + 1,
                    i + 1
                )));
            }
        }
    }
    Ok(out)
}

fn quadratic_form(entries: &[Vec<MetricExpression>]) -> Expr {
    let n = entries.len();
    let mut terms = Vec::new();
    for i in 0..n {
        for j in i..n {
            let a = entries[i][j].ast();
            if is_zero(a) {
                continue;
            }
            let yy = if i == j {
                Expr::Pow(Box::new(Expr::Y(i)), 2)
            } else {
                Expr::mul(Expr::Y(i), Expr::Y(j))
            };
            let coeff = if i == j {
                a.clone()
            } else {
                Expr::mul(Expr::Const(2.0), a.clone())
            };
            terms.push(match coeff {
                Expr::Const(1.0) => yy,
                c => Expr::mul(c, yy),
            });
        }
    }
    Expr::sum(terms)
}
