//! Connections and Riemannian metrics as fields over the chart, the form the
//! transport integrators consume.

use crate::connections::ConnectionKind;
use crate::error::{FinslerError, Result};
use crate::geometry::{Level, LocalGeometry};
use crate::linalg::{Matrix, Tensor3};
use crate::scalar::Real;
use crate::structure::FinslerStructure;

pub trait ConnectionField<T: Real>: Send + Sync {
    fn dim(&self) -> usize;

    fn kind(&self) -> ConnectionKind;

    /// True when the coefficients never depend on the fibre direction.
    fn is_affine(&self) -> bool;

    /// `Γ^i_jk(x, y)` and the nonlinear connection `N^i_j(x, y)` used to lift
    /// curves horizontally. Affine fields return `N^i_k = Γ^i_jk y^j`.
    fn evaluate(&self, x: &[T], y: &[T]) -> Result<(Tensor3<T>, Matrix<T>)>;

    fn gamma(&self, x: &[T], y: &[T]) -> Result<Tensor3<T>> {
        Ok(self.evaluate(x, y)?.0)
    }
}

/// `N^i_k = Γ^i_jk y^j`.
pub fn affine_nonlinear<T: Real>(gamma: &Tensor3<T>, y: &[T]) -> Matrix<T> {
    let n = gamma.dim();
    Matrix::from_fn(n, n, |i, k| {
        (0..n).fold(T::zero(), |acc, j| acc + gamma[(i, j, k)] * y[j])
    })
}

#[derive(Debug, Clone)]
pub struct ChernField {
    pub structure: FinslerStructure,
}

impl<T: Real> ConnectionField<T> for ChernField {
    fn dim(&self) -> usize {
        self.structure.dim()
    }

    fn kind(&self) -> ConnectionKind {
        ConnectionKind::Chern
    }

    fn is_affine(&self) -> bool {
        false
    }

    fn evaluate(&self, x: &[T], y: &[T]) -> Result<(Tensor3<T>, Matrix<T>)> {
        let geo = LocalGeometry::at(&self.structure, x, y, Level::Connection)?;
        Ok((
            geo.chern.expect("Level::Connection"),
            geo.nonlinear.expect("Level::Connection"),
        ))
    }
}

#[derive(Debug, Clone)]
pub struct BerwaldField {
    pub structure: FinslerStructure,
}

impl<T: Real> ConnectionField<T> for BerwaldField {
    fn dim(&self) -> usize {
        self.structure.dim()
    }

    fn kind(&self) -> ConnectionKind {
        ConnectionKind::Berwald
    }

    fn is_affine(&self) -> bool {
        false
    }

    fn evaluate(&self, x: &[T], y: &[T]) -> Result<(Tensor3<T>, Matrix<T>)> {
        let geo = LocalGeometry::at(&self.structure, x, y, Level::Full)?;
        Ok((
            geo.berwald.expect("Level::Full"),
            geo.nonlinear_spray.expect("Level::Full"),
        ))
    }
}

/// The same coefficients at every point.
#[derive(Debug, Clone)]
pub struct ConstantField<T> {
    pub gamma: Tensor3<T>,
}

impl<T: Real> ConnectionField<T> for ConstantField<T> {
    fn dim(&self) -> usize {
        self.gamma.dim()
    }

    fn kind(&self) -> ConnectionKind {
        ConnectionKind::PullbackAffine
    }

    fn is_affine(&self) -> bool {
        true
    }

    fn evaluate(&self, _x: &[T], y: &[T]) -> Result<(Tensor3<T>, Matrix<T>)> {
        Ok((self.gamma.clone(), affine_nonlinear(&self.gamma, y)))
    }
}

/// A Riemannian metric `h(x)` on the chart together with its first partials.
pub trait MetricField<T: Real>: Send + Sync {
    fn dim(&self) -> usize;

    /// `h(x)` and `∂h/∂x^k` for each `k`.
    fn metric_with_gradient(&self, x: &[T]) -> Result<(Matrix<T>, Vec<Matrix<T>>)>;

    fn metric(&self, x: &[T]) -> Result<Matrix<T>> {
        Ok(self.metric_with_gradient(x)?.0)
    }
}

/// The fundamental tensor of a Riemannian structure, read at a fixed fibre
/// direction.
#[derive(Debug, Clone)]
pub struct StructureMetric {
    structure: FinslerStructure,
}

impl StructureMetric {
    pub fn new(structure: FinslerStructure) -> Result<Self> {
        if !structure.is_riemannian() {
            return Err(FinslerError::InvalidArgument(format!(
                "{} is not a Riemannian structure",
                structure.label()
            )));
        }
        Ok(Self { structure })
    }
}

impl<T: Real> MetricField<T> for StructureMetric {
    fn dim(&self) -> usize {
        self.structure.dim()
    }

    fn metric_with_gradient(&self, x: &[T]) -> Result<(Matrix<T>, Vec<Matrix<T>>)> {
        let n = self.structure.dim();
        let mut e = vec![T::zero(); n];
        e[0] = T::one();
        let geo = LocalGeometry::at(&self.structure, x, &e, Level::Connection)?;
        let dg = geo.dg_dx.expect("Level::Connection");
        let grad = (0..n)
            .map(|k| Matrix::from_fn(n, n, |i, j| dg[(i, j, k)]))
            .collect();
        Ok((geo.g, grad))
    }
}

/// `Γ^i_jk = ½ h^is (∂_k h_sj + ∂_j h_sk - ∂_s h_jk)`.
pub fn levi_civita<T: Real>(h: &Matrix<T>, dh: &[Matrix<T>]) -> Result<Tensor3<T>> {
    let n = h.rows();
    if dh.len() != n {
        return Err(FinslerError::DimensionMismatch {
            expected: n,
            found: dh.len(),
        });
    }
    let hinv = h.inverse()?;
    let half = T::lit(0.5);
    Ok(Tensor3::from_fn(n, |i, j, k| {
        (0..n).fold(T::zero(), |acc, s| {
            acc + hinv[(i, s)] * (dh[k][(s, j)] + dh[j][(s, k)] - dh[s][(j, k)])
        }) * half
    }))
}

impl<T: Real, M: MetricField<T> + ?Sized> MetricField<T> for &M {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn metric_with_gradient(&self, x: &[T]) -> Result<(Matrix<T>, Vec<Matrix<T>>)> {
        (**self).metric_with_gradient(x)
    }
}

#[derive(Debug, Clone)]
pub struct LeviCivitaField<M> {
    pub metric: M,
}

impl<T: Real, M: MetricField<T>> ConnectionField<T> for LeviCivitaField<M> {
    fn dim(&self) -> usize {
        self.metric.dim()
    }

    fn kind(&self) -> ConnectionKind {
        ConnectionKind::LeviCivita
    }

    fn is_affine(&self) -> bool {
        true
    }

    fn evaluate(&self, x: &[T], y: &[T]) -> Result<(Tensor3<T>, Matrix<T>)> {
        let (h, dh) = self.metric.metric_with_gradient(x)?;
        let gamma = levi_civita(&h, &dh)?;
        let nl = affine_nonlinear(&gamma, y);
        Ok((gamma, nl))
    }
}

impl<T: Real, C: ConnectionField<T> + ?Sized> ConnectionField<T> for &C {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn kind(&self) -> ConnectionKind {
        (**self).kind()
    }

    fn is_affine(&self) -> bool {
        (**self).is_affine()
    }

    fn evaluate(&self, x: &[T], y: &[T]) -> Result<(Tensor3<T>, Matrix<T>)> {
        (**self).evaluate(x, y)
    }
}
