//! Holonomy of the averaged Chern connection around small coordinate loops.

use serde::Serialize;

use super::report::{effective_tolerance, HolonomyClass, Residual};
use crate::averaging::{AveragedConnectionField, QuadratureScheme};
use crate::connections::ConnectionKind;
use crate::error::{FinslerError, Result};
use crate::linalg::Matrix;
use crate::structure::FinslerStructure;
use crate::transport::{transport_matrix, CurveSpec, TransportOptions};

#[derive(Debug, Clone, Serialize)]
pub struct HolonomySample {
    pub x: Vec<f64>,
    pub loops: Vec<CurveSpec>,
    pub matrices: Vec<Matrix<f64>>,
    pub determinants: Vec<f64>,
    /// Real logarithms, absent when a matrix has none.
    pub logs: Vec<Option<Matrix<f64>>>,
    /// Signed enclosed coordinate areas.
    pub areas: Vec<f64>,
    pub invariant_form: Option<Matrix<f64>>,
    pub fit_residual: f64,
}

impl HolonomySample {
    /// Builds a sample from given matrices, e.g. a synthetic fixture.
    pub fn from_matrices(x: Vec<f64>, matrices: Vec<Matrix<f64>>) -> Self {
        let fit = fit_invariant_form(&matrices);
        Self {
            x,
            loops: Vec::new(),
            determinants: matrices.iter().map(Matrix::determinant).collect(),
            logs: matrices.iter().map(matrix_log).collect(),
            areas: Vec::new(),
            invariant_form: fit.as_ref().map(|f| f.form.clone()),
            fit_residual: fit.map_or(f64::INFINITY, |f| f.residual),
            matrices,
        }
    }
}

/// Rectangles at `x` with sides drawn from `loop_sizes`, cycling through
/// aspect ratios 1, 2, 1/2 and the four quadrants.
pub fn holonomy_loops(x: &[f64], loop_sizes: &[f64], loop_count: usize) -> Vec<CurveSpec> {
    const ASPECTS: [f64; 3] = [1.0, 2.0, 0.5];
    const SIGNS: [(f64, f64); 4] = [(1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0)];
    let m = loop_sizes.len().max(1);
    (0..loop_count)
        .map(|i| {
            let size = loop_sizes[i % m];
            let aspect = ASPECTS[(i / m) % 3].sqrt();
            let (sa, sb) = SIGNS[(i / (3 * m)) % 4];
            CurveSpec::LoopRectangle {
                corner: x.to_vec(),
                a: sa * size * aspect,
                b: sb * size / aspect,
                plane: (0, 1),
            }
        })
        .collect()
}

/// Transports the coordinate frame around each loop with the averaged Chern
/// connection.
pub fn holonomy_sample(
    fs: &FinslerStructure,
    x: &[f64],
    loop_sizes: &[f64],
    loop_count: usize,
    scheme: &QuadratureScheme,
    opts: &TransportOptions,
) -> Result<HolonomySample> {
    if fs.dim() != 2 {
        return Err(FinslerError::UnsupportedDimension(fs.dim()));
    }
    if loop_sizes.is_empty() || loop_sizes.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
        return Err(FinslerError::InvalidArgument(format!(
            "loop sizes {loop_sizes:?}"
        )));
    }
    let field = AveragedConnectionField {
        structure: fs.clone(),
        source: ConnectionKind::Chern,
        scheme: *scheme,
    };
    let loops = holonomy_loops(x, loop_sizes, loop_count);
    let mut matrices = Vec::with_capacity(loops.len());
    let mut areas = Vec::with_capacity(loops.len());
    for l in &loops {
        let (p, _) = transport_matrix::<f64, _>(&field, l, opts)?;
        matrices.push(p);
        if let CurveSpec::LoopRectangle { a, b, .. } = l {
            areas.push(a * b);
        }
    }
    let mut s = HolonomySample::from_matrices(x.to_vec(), matrices);
    s.loops = loops;
    s.areas = areas;
    Ok(s)
}

#[derive(Debug, Clone, Serialize)]
pub struct FormFit {
    /// Positive definite, trace one.
    pub form: Matrix<f64>,
    /// `max_H |Hᵀ Q H - Q| / max |Q|`.
    pub residual: f64,
    /// Smallest over largest eigenvalue of the form.
    pub conditioning: f64,
}

/// Least-squares fit of a positive definite `Q` with `Hᵀ Q H = Q` for every
/// 2×2 matrix `H`. Minimises `Σ |Hᵀ Q H - Q|²` over the trace-one positive
/// semidefinite forms; `None` when the minimum sits on the boundary, i.e. no
/// positive definite form does better than a degenerate one.
pub fn fit_invariant_form(matrices: &[Matrix<f64>]) -> Option<FormFit> {
    if matrices.is_empty() || matrices.iter().any(|m| m.rows() != 2 || m.cols() != 2) {
        return None;
    }
    // Q = [[1/2 + a, b], [b, 1/2 - a]], PSD iff a² + b² ≤ 1/4.
    let residual_of = |a: f64, b: f64| -> Vec<f64> {
        let q = Matrix::from_rows(&[vec![0.5 + a, b], vec![b, 0.5 - a]]);
        let mut r = Vec::with_capacity(3 * matrices.len());
        for h in matrices {
            let d = h.transpose().matmul(&q).matmul(h).sub(&q);
            r.extend([d[(0, 0)], std::f64::consts::SQRT_2 * d[(0, 1)], d[(1, 1)]]);
        }
        r
    };
    // The residual is affine in (a, b): r = r0 + a ra + b rb.
    let r0 = residual_of(0.0, 0.0);
    let ra: Vec<f64> = residual_of(1.0, 0.0)
        .iter()
        .zip(&r0)
        .map(|(p, q)| p - q)
        .collect();
    let rb: Vec<f64> = residual_of(0.0, 1.0)
        .iter()
        .zip(&r0)
        .map(|(p, q)| p - q)
        .collect();
    let dot = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
    let normal = Matrix::from_rows(&[
        vec![dot(&ra, &ra), dot(&ra, &rb)],
        vec![dot(&ra, &rb), dot(&rb, &rb)],
    ]);
    let rhs = [-dot(&ra, &r0), -dot(&rb, &r0)];
    let objective = |a: f64, b: f64| {
        r0.iter()
            .zip(&ra)
            .zip(&rb)
            .map(|((r, x), y)| (r + a * x + b * y).powi(2))
            .sum::<f64>()
    };
    let radius = 0.5;
    let unconstrained = normal
        .solve(&rhs)
        .ok()
        .filter(|v| v[0].hypot(v[1]) < radius);
    let (a, b) = match unconstrained {
        Some(v) => (v[0], v[1]),
        None => {
            // Degenerate normal equations or an exterior optimum: the best
            // point of the closed disk. Check the circle and the centre line.
            let (evals, evecs) = normal.symmetric_eigen();
            let mut best = (f64::INFINITY, 0.0, 0.0);
            let mut consider = |a: f64, b: f64| {
                if a.hypot(b) > radius {
                    return;
                }
                let v = objective(a, b);
                if v < best.0 {
                    best = (v, a, b);
                }
            };
            if evals[0] <= 1e-14 * evals[1].abs().max(1e-300) {
                // Flat direction: minimise along the null line through the
                // least-squares point closest to the origin.
                let null = [evecs[(0, 0)], evecs[(1, 0)]];
                let range = [evecs[(0, 1)], evecs[(1, 1)]];
                let c = if evals[1] > 0.0 {
                    dot(&range, &rhs) / evals[1]
                } else {
                    0.0
                };
                // Outward from the centre so ties keep the most definite form.
                for k in 0..=100 {
                    for s in [k as f64, -(k as f64)] {
                        let s = radius * s / 100.0;
                        consider(c * range[0] + s * null[0], c * range[1] + s * null[1]);
                    }
                }
            }
            for k in 0..3600 {
                let t = std::f64::consts::TAU * k as f64 / 3600.0;
                consider(radius * t.cos(), radius * t.sin());
            }
            (best.1, best.2)
        }
    };
    let q = Matrix::from_rows(&[vec![0.5 + a, b], vec![b, 0.5 - a]]);
    let (ev, _) = q.symmetric_eigen();
    let conditioning = if ev[1] > 0.0 { ev[0] / ev[1] } else { 0.0 };
    if !(conditioning > 1e-6) {
        return None;
    }
    let scale = q.max_abs();
    let residual = matrices
        .iter()
        .map(|h| h.transpose().matmul(&q).matmul(h).sub(&q).max_abs() / scale)
        .fold(0.0, f64::max);
    Some(FormFit {
        form: q,
        residual,
        conditioning,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct HolonomyClassification {
    pub class: HolonomyClass,
    pub residuals: Vec<Residual>,
    pub invariant_form: Option<Matrix<f64>>,
    pub notes: Vec<String>,
}

/// Sorts the sampled holonomy into the smallest fitting class. The result
/// describes the semigroup generated by the sampled loops, not a proof about
/// the full holonomy group.
pub fn holonomy_classify(sample: &HolonomySample, tol: f64) -> Result<HolonomyClassification> {
    if sample.matrices.len() < 6 {
        return Err(FinslerError::InsufficientSamples {
            needed: 6,
            got: sample.matrices.len(),
        });
    }
    let n = sample.matrices[0].rows();
    let magnitude = sample
        .matrices
        .iter()
        .map(Matrix::max_abs)
        .fold(0.0, f64::max);
    let tol_eff = effective_tolerance(tol, magnitude);
    let count = sample.matrices.len();
    let res = |name: &str, value: f64| Residual {
        name: name.into(),
        value,
        tolerance: tol_eff,
        samples: count,
        seed: 0,
    };
    let identity_dev = sample
        .matrices
        .iter()
        .map(|m| m.sub(&Matrix::identity(n)).max_abs())
        .fold(0.0, f64::max);
    let det_dev = sample
        .determinants
        .iter()
        .map(|d| (d - 1.0).abs())
        .fold(0.0, f64::max);
    let fit = if n == 2 {
        fit_invariant_form(&sample.matrices)
    } else {
        None
    };
    let fit_residual = fit.as_ref().map_or(f64::INFINITY, |f| f.residual);
    let residuals = vec![
        res("identity_deviation", identity_dev),
        res("invariant_form_fit", fit_residual),
        res("determinant_deviation", det_dev),
    ];
    let class = if identity_dev <= tol_eff {
        HolonomyClass::Trivial
    } else if fit_residual <= tol_eff {
        HolonomyClass::MetricPreserving
    } else if det_dev <= tol_eff {
        HolonomyClass::SpecialLinear
    } else {
        HolonomyClass::GeneralLinear
    };
    let mut notes = vec![format!(
        "class of the semigroup generated by {count} sampled loops; not a proof about the holonomy group"
    )];
    notes.push(match class {
        HolonomyClass::SpecialLinear | HolonomyClass::GeneralLinear => {
            "compatible with a pure Landsberg structure in dimension 2".into()
        }
        _ => "excludes a pure Landsberg structure in dimension 2".into(),
    });
    Ok(HolonomyClassification {
        class,
        residuals,
        invariant_form: fit.filter(|f| f.residual <= tol_eff).map(|f| f.form),
        notes,
    })
}

/// Real matrix logarithm by inverse scaling and squaring; `None` when the
/// iteration does not approach the identity (no real logarithm).
pub fn matrix_log(m: &Matrix<f64>) -> Option<Matrix<f64>> {
    let n = m.rows();
    let id = Matrix::identity(n);
    let mut a = m.clone();
    let mut k = 0u32;
    while a.sub(&id).max_abs() > 0.25 {
        a = sqrtm(&a)?;
        k += 1;
        if k > 40 {
            return None;
        }
    }
    // log(I + X) = X - X²/2 + X³/3 - ...
    let x = a.sub(&id);
    let mut term = x.clone();
    let mut sum = x.clone();
    for j in 2..60 {
        term = term.matmul(&x);
        let sign = if j % 2 == 0 { -1.0 } else { 1.0 };
        let add = term.scale(sign / j as f64);
        sum = sum.add(&add);
        if add.max_abs() < 1e-18 {
            break;
        }
    }
    Some(sum.scale(2f64.powi(k as i32)))
}

/// Principal square root by the Denman-Beavers iteration.
fn sqrtm(m: &Matrix<f64>) -> Option<Matrix<f64>> {
    let n = m.rows();
    let mut y = m.clone();
    let mut z = Matrix::identity(n);
    for _ in 0..100 {
        let yi = y.inverse().ok()?;
        let zi = z.inverse().ok()?;
        let ny = y.add(&zi).scale(0.5);
        let nz = z.add(&yi).scale(0.5);
        let delta = ny.sub(&y).max_abs();
        y = ny;
        z = nz;
        if !y.max_abs().is_finite() {
            return None;
        }
        if delta <= 1e-15 * y.max_abs().max(1.0) {
            let check = y.matmul(&y).sub(m).max_abs();
            return (check <= 1e-8 * m.max_abs().max(1.0)).then_some(y);
        }
    }
    None
}
