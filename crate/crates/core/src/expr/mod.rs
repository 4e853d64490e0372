//! Metric expressions: parsing, evaluation and exact derivative jets.

mod ast;
mod parser;

use std::collections::BTreeMap;

use rand::Rng;

pub use ast::{Expr, ExprScalar, Func};

use crate::chart::Chart;
use crate::error::{FinslerError, Result};
use crate::jet::{Jet, JetLayout, MAX_ORDER};
use crate::sampling::{self, DEFAULT_SEED};
use crate::scalar::{to_f64_vec, Real};

/// A parsed scalar function of `(x, y)` over an `n`-dimensional chart.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricExpression {
    source_text: String,
    ast: Expr,
    dim: usize,
}

impl MetricExpression {
    pub fn parse(source: &str, dim: usize) -> Result<Self> {
        if dim < 1 {
            return Err(FinslerError::InvalidArgument(
                "dimension must be positive".into(),
            ));
        }
        let ast = parser::parse(source, dim)?;
        Ok(Self {
            source_text: source.to_string(),
            ast,
            dim,
        })
    }

    pub fn from_ast(ast: Expr, dim: usize) -> Result<Self> {
        let (mx, my) = ast.max_indices();
        if let Some(i) = mx.into_iter().chain(my).max().filter(|&i| i >= dim) {
            return Err(FinslerError::DimensionMismatch {
                expected: dim,
                found: i + 1,
            });
        }
        Ok(Self {
            source_text: ast.to_string(),
            ast,
            dim,
        })
    }

    pub fn source(&self) -> &str {
        &self.source_text
    }

    pub fn ast(&self) -> &Expr {
        &self.ast
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Whether the expression reads any fibre coordinate.
    pub fn depends_on_fiber(&self) -> bool {
        self.ast.max_indices().1.is_some()
    }

    pub fn eval<T: Real, V: ExprScalar<T>>(&self, x: &[V], y: &[V]) -> Result<V> {
        self.check_len(x.len())?;
        self.check_len(y.len())?;
        let v = self.ast.eval(x, y)?;
        if !v.value().is_finite() {
            return Err(FinslerError::non_smooth("non-finite value"));
        }
        Ok(v)
    }

    pub fn value<T: Real>(&self, x: &[T], y: &[T]) -> Result<T> {
        self.eval(x, y)
            .map_err(|e| e.at_point(&to_f64_vec(x), &to_f64_vec(y)))
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.dim {
            return Err(FinslerError::DimensionMismatch {
                expected: self.dim,
                found: len,
            });
        }
        Ok(())
    }

    /// Expands the expression as a jet around `(x, y)` with the given layout,
    /// variables ordered `x1..xn, y1..yn`.
    pub fn jet_with<T: Real>(
        &self,
        layout: &std::sync::Arc<JetLayout>,
        x: &[T],
        y: &[T],
    ) -> Result<Jet<T>> {
        self.check_len(x.len())?;
        self.check_len(y.len())?;
        let n = self.dim;
        let xs: Vec<Jet<T>> = (0..n).map(|i| Jet::variable(layout, i, x[i])).collect();
        let ys: Vec<Jet<T>> = (0..n).map(|i| Jet::variable(layout, n + i, y[i])).collect();
        self.eval(&xs, &ys)
            .map_err(|e| e.at_point(&to_f64_vec(x), &to_f64_vec(y)))
    }

    /// Substitutes linear maps of the coordinates: `x -> mx * x`, `y -> my * y`.
    pub fn linear_substitution(&self, mx: &[Vec<f64>], my: &[Vec<f64>]) -> Result<Self> {
        let n = self.dim;
        let lin = |m: &[Vec<f64>], var: fn(usize) -> Expr| -> Vec<Expr> {
            (0..n)
                .map(|i| {
                    Expr::sum(
                        (0..n)
                            .filter(|&j| m[i][j] != 0.0)
                            .map(|j| Expr::mul(Expr::Const(m[i][j]), var(j))),
                    )
                })
                .collect()
        };
        let xs = lin(mx, Expr::X);
        let ys = lin(my, Expr::Y);
        Self::from_ast(self.ast.substitute(&xs, &ys), n)
    }
}

/// Value and partial derivatives of a function of the `2n` variables
/// `x1..xn, y1..yn` (indices `0..n` and `n..2n`).
#[derive(Debug, Clone, PartialEq)]
pub struct JetValue<T> {
    pub value: T,
    pub order: usize,
    pub partials: BTreeMap<Vec<usize>, T>,
}

impl<T: Real> JetValue<T> {
    /// Partial derivative with respect to the listed variables, in any order.
    pub fn partial(&self, vars: &[usize]) -> Option<T> {
        if vars.is_empty() {
            return Some(self.value);
        }
        let mut key = vars.to_vec();
        key.sort_unstable();
        self.partials.get(&key).copied()
    }
}

/// All partial derivatives of `expr` up to `order` at `(x, y)`.
pub fn eval_jet<T: Real>(
    expr: &MetricExpression,
    x: &[T],
    y: &[T],
    order: usize,
) -> Result<JetValue<T>> {
    if order > MAX_ORDER as usize {
        return Err(FinslerError::InvalidArgument(format!(
            "jet order {order} exceeds {MAX_ORDER}"
        )));
    }
    if y.iter().all(|v| *v == T::zero()) {
        return Err(FinslerError::InvalidArgument(
            "fibre vector must be non-zero".into(),
        ));
    }
    let nvars = 2 * expr.dim();
    let layout = JetLayout::full(nvars, order as u8);
    let jet = expr.jet_with(&layout, x, y)?;
    let mut partials = BTreeMap::new();
    for m in layout.monomials().iter().skip(1) {
        let key: Vec<usize> = m
            .iter()
            .enumerate()
            .flat_map(|(v, &e)| std::iter::repeat_n(v, e as usize))
            .collect();
        partials.insert(key, jet.partial(m));
    }
    Ok(JetValue {
        value: jet.value(),
        order,
        partials,
    })
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct HomogeneityReport {
    pub passed: bool,
    pub max_residual: f64,
    pub worst_lambda: f64,
    pub samples: usize,
    pub seed: u64,
}

/// Samples `(x, y, λ)` in `[-1, 1]^n` with the default seed and checks
/// `|F(x, λy) - λF(x, y)| <= tol (1 + |λF|)`.
pub fn check_homogeneity(
    expr: &MetricExpression,
    samples: usize,
    tol: f64,
) -> Result<HomogeneityReport> {
    check_homogeneity_in(
        expr,
        &Chart::cube(expr.dim(), -1.0, 1.0),
        samples,
        tol,
        DEFAULT_SEED,
    )
}

pub fn check_homogeneity_in(
    expr: &MetricExpression,
    chart: &Chart,
    samples: usize,
    tol: f64,
    seed: u64,
) -> Result<HomogeneityReport> {
    if samples < 1 {
        return Err(FinslerError::InsufficientSamples { needed: 1, got: 0 });
    }
    let mut rng = sampling::rng(seed);
    let mut worst = 0.0f64;
    let mut worst_lambda = 1.0;
    for _ in 0..samples {
        let x = chart.sample_point(&mut rng);
        let y = sampling::random_unit_vector(&mut rng, expr.dim());
        let lambda = 10f64.powf(rng.gen_range(-1.0..1.0));
        let ly: Vec<f64> = y.iter().map(|v| v * lambda).collect();
        let f = expr.value(&x, &y)?;
        let fl = expr.value(&x, &ly)?;
        let r = (fl - lambda * f).abs() / (1.0 + (lambda * f).abs());
        if r > worst || r.is_nan() {
            worst = r;
            worst_lambda = lambda;
        }
    }
    Ok(HomogeneityReport {
        passed: worst <= tol,
        max_residual: worst,
        worst_lambda,
        samples,
        seed,
    })
}
