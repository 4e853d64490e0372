//! Quadrature over the indicatrix and the averaged connection and metric.

use serde::{Deserialize, Serialize};

use crate::connections::{chern_from_geometry, ConnectionCoefficients, ConnectionKind};
use crate::error::{FinslerError, Result};
use crate::fields::{affine_nonlinear, levi_civita, ConnectionField, MetricField};
use crate::geometry::{Level, LocalGeometry};
use crate::linalg::{Matrix, Tensor3};
use crate::scalar::Real;
use crate::structure::FinslerStructure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "snake_case")]
pub enum QuadratureScheme {
    /// `n` equally spaced angles.
    Trapezoid2d { n: usize },
    /// Gauss-Legendre in `cos θ` times equally spaced longitudes.
    Latlong3d { n_theta: usize, n_phi: usize },
}

impl QuadratureScheme {
    pub fn default_for(dim: usize) -> Result<Self> {
        match dim {
            2 => Ok(QuadratureScheme::Trapezoid2d { n: 64 }),
            3 => Ok(QuadratureScheme::Latlong3d {
                n_theta: 16,
                n_phi: 32,
            }),
            d => Err(FinslerError::UnsupportedDimension(d)),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            QuadratureScheme::Trapezoid2d { .. } => 2,
            QuadratureScheme::Latlong3d { .. } => 3,
        }
    }

    /// Twice as many nodes along every axis.
    pub fn refined(&self) -> Self {
        match *self {
            QuadratureScheme::Trapezoid2d { n } => QuadratureScheme::Trapezoid2d { n: 2 * n },
            QuadratureScheme::Latlong3d { n_theta, n_phi } => QuadratureScheme::Latlong3d {
                n_theta: 2 * n_theta,
                n_phi: 2 * n_phi,
            },
        }
    }

    pub fn node_count(&self) -> usize {
        match *self {
            QuadratureScheme::Trapezoid2d { n } => n,
            QuadratureScheme::Latlong3d { n_theta, n_phi } => n_theta * n_phi,
        }
    }

    fn check(&self, dim: usize) -> Result<()> {
        if !(2..=3).contains(&dim) {
            return Err(FinslerError::UnsupportedDimension(dim));
        }
        if self.dim() != dim {
            return Err(FinslerError::DimensionMismatch {
                expected: dim,
                found: self.dim(),
            });
        }
        let ok = match *self {
            QuadratureScheme::Trapezoid2d { n } => n >= 4,
            QuadratureScheme::Latlong3d { n_theta, n_phi } => n_theta >= 2 && n_phi >= 4,
        };
        if !ok {
            return Err(FinslerError::InsufficientSamples {
                needed: 4,
                got: self.node_count(),
            });
        }
        Ok(())
    }
}

/// Parameter node on the coordinate unit sphere: the point `u`, its
/// parameter derivatives, and the parameter-space weight.
struct SphereNode<T> {
    u: Vec<T>,
    tangents: Vec<Vec<T>>,
    weight: T,
}

fn sphere_nodes<T: Real>(scheme: &QuadratureScheme) -> Vec<SphereNode<T>> {
    match *scheme {
        QuadratureScheme::Trapezoid2d { n } => {
            let dt = T::TAU() / T::from_usize_lossy(n);
            (0..n)
                .map(|k| {
                    let t = dt * T::from_usize_lossy(k);
                    SphereNode {
                        u: vec![t.cos(), t.sin()],
                        tangents: vec![vec![-t.sin(), t.cos()]],
                        weight: dt,
                    }
                })
                .collect()
        }
        QuadratureScheme::Latlong3d { n_theta, n_phi } => {
            let (zs, ws) = gauss_legendre::<T>(n_theta);
            let dphi = T::TAU() / T::from_usize_lossy(n_phi);
            let mut out = Vec::with_capacity(n_theta * n_phi);
            for (z, w) in zs.into_iter().zip(ws) {
                let rho = (T::one() - z * z).sqrt();
                for j in 0..n_phi {
                    let p = dphi * T::from_usize_lossy(j);
                    let (c, s) = (p.cos(), p.sin());
                    out.push(SphereNode {
                        u: vec![rho * c, rho * s, z],
                        tangents: vec![
                            vec![-z / rho * c, -z / rho * s, T::one()],
                            vec![-rho * s, rho * c, T::zero()],
                        ],
                        weight: w * dphi,
                    });
                }
            }
            out
        }
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre<T: Real>(m: usize) -> (Vec<T>, Vec<T>) {
    let mut nodes = vec![T::zero(); m];
    let mut weights = vec![T::zero(); m];
    let mf = T::from_usize_lossy(m);
    for i in 0..m.div_ceil(2) {
        let mut z = (T::PI() * (T::from_usize_lossy(i) + T::lit(0.75)) / (mf + T::lit(0.5))).cos();
        let mut dp = T::one();
        for _ in 0..100 {
            let (mut p0, mut p1) = (T::one(), z);
            for k in 2..=m {
                let kf = T::from_usize_lossy(k);
                let p2 = ((T::lit(2.0) * kf - T::one()) * z * p1 - (kf - T::one()) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pm = if m == 1 { z } else { p1 };
            let pm1 = if m == 1 { T::one() } else { p0 };
            dp = mf * (z * pm - pm1) / (z * z - T::one());
            let dz = pm / dp;
            z -= dz;
            if dz.abs() <= T::unit_roundoff() * T::lit(4.0) {
                break;
            }
        }
        let w = T::lit(2.0) / ((T::one() - z * z) * dp * dp);
        nodes[i] = z;
        nodes[m - 1 - i] = -z;
        weights[i] = w;
        weights[m - 1 - i] = w;
    }
    (nodes, weights)
}

#[derive(Debug, Clone, Serialize)]
pub struct IndicatrixNode<T> {
    /// Point of the indicatrix, `F(x, y) = 1`.
    pub y: Vec<T>,
    pub weight: T,
}

#[derive(Debug, Clone, Serialize)]
pub struct IndicatrixSampling<T> {
    pub x: Vec<T>,
    pub nodes: Vec<IndicatrixNode<T>>,
    pub total_volume: T,
    pub scheme: QuadratureScheme,
}

/// Nodes `y = u / F(x, u)` with weights given by the volume the tangent
/// vectors of the parametrisation span in `g(x, y)`.
pub fn sample_indicatrix<T: Real>(
    fs: &FinslerStructure,
    x: &[T],
    scheme: &QuadratureScheme,
) -> Result<IndicatrixSampling<T>> {
    let n = fs.dim();
    scheme.check(n)?;
    if x.len() != n {
        return Err(FinslerError::DimensionMismatch {
            expected: n,
            found: x.len(),
        });
    }
    let mut nodes = Vec::with_capacity(scheme.node_count());
    let mut total = T::zero();
    for node in sphere_nodes::<T>(scheme) {
        let geo = LocalGeometry::at(fs, x, &node.u, Level::Fiber)?;
        let s = geo.f;
        let y: Vec<T> = node.u.iter().map(|&c| c / s).collect();
        let t: Vec<Vec<T>> = node
            .tangents
            .iter()
            .map(|du| {
                let ds = du
                    .iter()
                    .zip(&geo.f_grad_y)
                    .fold(T::zero(), |a, (&d, &g)| a + d * g);
                du.iter()
                    .zip(&node.u)
                    .map(|(&d, &u)| d / s - u * ds / (s * s))
                    .collect()
            })
            .collect();
        let gram = Matrix::from_fn(t.len(), t.len(), |a, b| geo.g.bilinear(&t[a], &t[b]));
        let w = gram.determinant().max(T::zero()).sqrt() * node.weight;
        total += w;
        nodes.push(IndicatrixNode { y, weight: w });
    }
    Ok(IndicatrixSampling {
        x: x.to_vec(),
        nodes,
        total_volume: total,
        scheme: *scheme,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct AveragedConnection<T> {
    pub coefficients: ConnectionCoefficients<T>,
    pub source_kind: ConnectionKind,
    pub scheme: QuadratureScheme,
    /// `max |<Γ>_N - <Γ>_2N|`.
    pub error_estimate: T,
}

fn source_gamma<T: Real>(
    fs: &FinslerStructure,
    x: &[T],
    y: &[T],
    source: ConnectionKind,
) -> Result<Tensor3<T>> {
    match source {
        ConnectionKind::Chern => {
            let geo = LocalGeometry::at(fs, x, y, Level::Connection)?;
            Ok(geo.chern.expect("Level::Connection"))
        }
        ConnectionKind::Berwald => {
            let geo = LocalGeometry::at(fs, x, y, Level::Full)?;
            Ok(geo.berwald.expect("Level::Full"))
        }
        other => Err(FinslerError::InvalidArgument(format!(
            "cannot average the {} connection over the indicatrix",
            other.name()
        ))),
    }
}

fn average_over<T: Real>(
    fs: &FinslerStructure,
    sampling: &IndicatrixSampling<T>,
    source: ConnectionKind,
) -> Result<Tensor3<T>> {
    let n = fs.dim();
    let mut acc = Tensor3::zeros(n);
    for node in &sampling.nodes {
        acc = acc.add(&source_gamma(fs, &sampling.x, &node.y, source)?.scale(node.weight));
    }
    Ok(acc.scale(T::one() / sampling.total_volume))
}

fn averaged_tensor<T: Real>(
    fs: &FinslerStructure,
    x: &[T],
    source: ConnectionKind,
    scheme: &QuadratureScheme,
) -> Result<Tensor3<T>> {
    let s = sample_indicatrix(fs, x, scheme)?;
    average_over(fs, &s, source)
}

/// `<Γ>(x)`: the source coefficients averaged over the indicatrix at `x`.
pub fn averaged_connection<T: Real>(
    fs: &FinslerStructure,
    x: &[T],
    source: ConnectionKind,
    scheme: &QuadratureScheme,
) -> Result<AveragedConnection<T>> {
    let coarse = averaged_tensor(fs, x, source, scheme)?;
    let fine = averaged_tensor(fs, x, source, &scheme.refined())?;
    let error_estimate = coarse.sub(&fine).max_abs();
    let mut coefficients =
        ConnectionCoefficients::affine(ConnectionKind::AveragedAffine, coarse, x.to_vec());
    coefficients.diagnostics.insert(
        "torsion".into(),
        coefficients.torsion_residual().to_f64_lossy(),
    );
    coefficients
        .diagnostics
        .insert("quadrature_error".into(), error_estimate.to_f64_lossy());
    Ok(AveragedConnection {
        coefficients,
        source_kind: source,
        scheme: *scheme,
        error_estimate,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct AveragedMetric<T> {
    pub h: Matrix<T>,
    pub volume: T,
    pub error_estimate: T,
}

fn metric_average<T: Real>(
    fs: &FinslerStructure,
    x: &[T],
    scheme: &QuadratureScheme,
) -> Result<(Matrix<T>, T)> {
    let s = sample_indicatrix(fs, x, scheme)?;
    let n = fs.dim();
    let mut h = Matrix::zeros(n, n);
    for node in &s.nodes {
        let geo = LocalGeometry::at(fs, x, &node.y, Level::Fiber)?;
        h = h.add(&geo.g.scale(node.weight));
    }
    Ok((
        h.scale(T::one() / s.total_volume).symmetrized(),
        s.total_volume,
    ))
}

/// `h(x) = (1/vol) Σ w g(x, y)` over the indicatrix.
pub fn averaged_metric<T: Real>(
    fs: &FinslerStructure,
    x: &[T],
    scheme: &QuadratureScheme,
) -> Result<AveragedMetric<T>> {
    let (h, volume) = metric_average(fs, x, scheme)?;
    let (fine, _) = metric_average(fs, x, &scheme.refined())?;
    let error_estimate = h.sub(&fine).max_abs();
    if !(h.min_eigenvalue() > T::zero()) {
        return Err(FinslerError::StrongConvexityViolation {
            min_eigenvalue: h.min_eigenvalue().to_f64_lossy(),
            x: crate::scalar::to_f64_vec(x),
            y: Vec::new(),
        });
    }
    Ok(AveragedMetric {
        h,
        volume,
        error_estimate,
    })
}

/// Averaged metric and its first partials in `x`.
///
/// Uses the closed form of the indicatrix volume element,
/// `sqrt(det g(x, u)) / F(x, u)^n` per unit of sphere measure, which can be
/// differentiated in `x` exactly.
pub fn averaged_metric_with_gradient<T: Real>(
    fs: &FinslerStructure,
    x: &[T],
    scheme: &QuadratureScheme,
) -> Result<(Matrix<T>, Vec<Matrix<T>>)> {
    let n = fs.dim();
    scheme.check(n)?;
    let nf = T::from_usize_lossy(n);
    let half = T::lit(0.5);
    let mut wsum = T::zero();
    let mut dwsum = vec![T::zero(); n];
    let mut hs = Matrix::zeros(n, n);
    let mut dhs = vec![Matrix::zeros(n, n); n];
    for node in sphere_nodes::<T>(scheme) {
        let geo = LocalGeometry::at(fs, x, &node.u, Level::Connection)?;
        let dg = geo.dg_dx.as_ref().expect("Level::Connection");
        let fx = geo.f_grad_x.as_ref().expect("Level::Connection");
        let w = geo.g.determinant().sqrt() / geo.f.powi(n as i32) * node.weight;
        wsum += w;
        hs = hs.add(&geo.g.scale(w));
        for k in 0..n {
            let dgk = Matrix::from_fn(n, n, |i, j| dg[(i, j, k)]);
            let tr = geo.g_inv.matmul(&dgk).trace();
            let dw = w * (half * tr - nf * fx[k] / geo.f);
            dwsum[k] += dw;
            dhs[k] = dhs[k].add(&geo.g.scale(dw)).add(&dgk.scale(w));
        }
    }
    let h = hs.scale(T::one() / wsum).symmetrized();
    let dh = (0..n)
        .map(|k| {
            dhs[k]
                .scale(T::one() / wsum)
                .sub(&h.scale(dwsum[k] / wsum))
                .symmetrized()
        })
        .collect();
    Ok((h, dh))
}

/// Coefficientwise convex combination of connections at one point.
pub fn convexity_of_average<T: Real>(
    items: &[(ConnectionCoefficients<T>, T)],
    x: &[T],
) -> Result<ConnectionCoefficients<T>> {
    let Some((first, _)) = items.first() else {
        return Err(FinslerError::BadWeights("no connections to combine".into()));
    };
    let n = first.dim();
    let mut total = T::zero();
    for (c, w) in items {
        if c.dim() != n {
            return Err(FinslerError::DimensionMismatch {
                expected: n,
                found: c.dim(),
            });
        }
        if !(*w >= T::zero()) {
            return Err(FinslerError::BadWeights(format!("negative weight {w}")));
        }
        total += *w;
    }
    if (total - T::one()).abs() > T::lit(1e-12) {
        return Err(FinslerError::BadWeights(format!("weights sum to {total}")));
    }
    let mut acc = Tensor3::zeros(n);
    for (c, w) in items {
        acc = acc.add(&c.gamma.scale(*w));
    }
    let inputs_torsion = items
        .iter()
        .map(|(c, _)| c.torsion_residual().to_f64_lossy())
        .fold(0.0, f64::max);
    let mut out = ConnectionCoefficients::affine(ConnectionKind::AveragedAffine, acc, x.to_vec());
    out.diagnostics
        .insert("torsion".into(), out.torsion_residual().to_f64_lossy());
    out.diagnostics
        .insert("inputs_torsion".into(), inputs_torsion);
    Ok(out)
}

/// Averaged connection as a field over the chart. Evaluations skip the
/// refined error estimate.
#[derive(Debug, Clone)]
pub struct AveragedConnectionField {
    pub structure: FinslerStructure,
    pub source: ConnectionKind,
    pub scheme: QuadratureScheme,
}

impl<T: Real> ConnectionField<T> for AveragedConnectionField {
    fn dim(&self) -> usize {
        self.structure.dim()
    }

    fn kind(&self) -> ConnectionKind {
        ConnectionKind::AveragedAffine
    }

    fn is_affine(&self) -> bool {
        true
    }

    fn evaluate(&self, x: &[T], y: &[T]) -> Result<(Tensor3<T>, Matrix<T>)> {
        let g = averaged_tensor(&self.structure, x, self.source, &self.scheme)?;
        let nl = affine_nonlinear(&g, y);
        Ok((g, nl))
    }
}

/// The averaged metric as a field over the chart.
#[derive(Debug, Clone)]
pub struct AveragedMetricField {
    pub structure: FinslerStructure,
    pub scheme: QuadratureScheme,
}

impl<T: Real> MetricField<T> for AveragedMetricField {
    fn dim(&self) -> usize {
        self.structure.dim()
    }

    fn metric_with_gradient(&self, x: &[T]) -> Result<(Matrix<T>, Vec<Matrix<T>>)> {
        averaged_metric_with_gradient(&self.structure, x, &self.scheme)
    }
}

/// Levi-Civita connection of the averaged metric at `x`.
pub fn averaged_levi_civita<T: Real>(
    fs: &FinslerStructure,
    x: &[T],
    scheme: &QuadratureScheme,
) -> Result<ConnectionCoefficients<T>> {
    let (h, dh) = averaged_metric_with_gradient(fs, x, scheme)?;
    Ok(ConnectionCoefficients::affine(
        ConnectionKind::LeviCivita,
        levi_civita(&h, &dh)?,
        x.to_vec(),
    ))
}

/// Chern coefficients at every node of a sampling, with their weights
/// normalised to sum to one.
pub fn weighted_chern_family<T: Real>(
    fs: &FinslerStructure,
    sampling: &IndicatrixSampling<T>,
) -> Result<Vec<(ConnectionCoefficients<T>, T)>> {
    sampling
        .nodes
        .iter()
        .map(|node| {
            let geo = LocalGeometry::at(fs, &sampling.x, &node.y, Level::Connection)?;
            Ok((
                chern_from_geometry(&geo),
                node.weight / sampling.total_volume,
            ))
        })
        .collect()
}
