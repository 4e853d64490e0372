//! Named structures used throughout the examples and tests.

use crate::error::Result;
use crate::structure::FinslerStructure;

fn m(rows: &[&[&str]]) -> Vec<Vec<String>> {
    rows.iter()
        .map(|r| r.iter().map(|e| e.to_string()).collect())
        .collect()
}

pub fn euclidean() -> FinslerStructure {
    FinslerStructure::euclidean(2).expect("static definition")
}

/// Upper half-plane, `g = (dx1² + dx2²) / x2²`.
pub fn hyperbolic() -> FinslerStructure {
    FinslerStructure::riemannian(&m(&[&["1/x2^2", "0"], &["0", "1/x2^2"]]))
        .expect("static definition")
        .with_label("hyperbolic")
}

/// Round sphere in stereographic coordinates, curvature 1.
pub fn sphere_patch() -> FinslerStructure {
    let c = "4/(1 + x1^2 + x2^2)^2";
    FinslerStructure::riemannian(&m(&[&[c, "0"], &["0", c]]))
        .expect("static definition")
        .with_label("sphere-patch")
}

/// Flat `α` with the constant one-form `0.5 dx1`: locally Minkowski.
pub fn berwald_randers() -> FinslerStructure {
    FinslerStructure::randers(&m(&[&["1", "0"], &["0", "1"]]), &["0.5".into(), "0".into()])
        .expect("static definition")
        .with_label("berwald-randers")
}

/// Flat `α` with the non-closed one-form `0.3 x2 dx1`.
pub fn nonberwald_randers() -> FinslerStructure {
    FinslerStructure::randers(
        &m(&[&["1", "0"], &["0", "1"]]),
        &["0.3*x2".into(), "0".into()],
    )
    .expect("static definition")
    .with_label("nonberwald-randers")
}

/// Randers metric `sqrt(|y|²) + b y1` with constant `b`.
pub fn randers_constant(b: f64) -> Result<FinslerStructure> {
    Ok(FinslerStructure::randers(
        &m(&[&["1", "0"], &["0", "1"]]),
        &[format!("{b:?}"), "0".into()],
    )?
    .with_label(format!("randers-{b}")))
}

pub const NAMES: [&str; 4] = [
    "hyperbolic",
    "sphere-patch",
    "berwald-randers",
    "nonberwald-randers",
];

pub fn by_name(name: &str) -> Option<FinslerStructure> {
    match name {
        "hyperbolic" => Some(hyperbolic()),
        "sphere-patch" => Some(sphere_patch()),
        "berwald-randers" => Some(berwald_randers()),
        "nonberwald-randers" => Some(nonberwald_randers()),
        _ => None,
    }
}
