//! Connection coefficients built from a Finsler structure, and comparisons
//! between connections.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{FinslerError, Result};
use crate::geometry::{Level, LocalGeometry};
use crate::linalg::{Matrix, Tensor3};
use crate::scalar::Real;
use crate::structure::FinslerStructure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConnectionKind {
    Chern,
    Berwald,
    PullbackAffine,
    AveragedAffine,
    LeviCivita,
}

impl ConnectionKind {
    pub fn name(self) -> &'static str {
        match self {
            ConnectionKind::Chern => "chern",
            ConnectionKind::Berwald => "berwald",
            ConnectionKind::PullbackAffine => "pullback_affine",
            ConnectionKind::AveragedAffine => "averaged_affine",
            ConnectionKind::LeviCivita => "levi_civita",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseDependence {
    XAndY,
    XOnly,
}

/// `Γ^i_jk` at one point, stored at `[(i, j, k)]`. The last index is the
/// direction of differentiation: `∇_{∂k} ∂j = Γ^i_jk ∂i`.
#[derive(Debug, Clone, Serialize)]
pub struct ConnectionCoefficients<T> {
    pub kind: ConnectionKind,
    pub gamma: Tensor3<T>,
    pub base_dependence: BaseDependence,
    pub x: Vec<T>,
    pub y: Option<Vec<T>>,
    /// Named residuals computed alongside the coefficients.
    pub diagnostics: BTreeMap<String, f64>,
}

impl<T: Real> ConnectionCoefficients<T> {
    pub fn affine(kind: ConnectionKind, gamma: Tensor3<T>, x: Vec<T>) -> Self {
        Self {
            kind,
            gamma,
            base_dependence: BaseDependence::XOnly,
            x,
            y: None,
            diagnostics: BTreeMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.gamma.dim()
    }

    /// `T^i_jk = Γ^i_jk - Γ^i_kj` on coordinate fields.
    pub fn torsion(&self) -> Tensor3<T> {
        self.gamma.torsion()
    }

    pub fn torsion_residual(&self) -> T {
        self.torsion().max_abs()
    }

    /// Covariant derivative of a section along `v`: `Γ^i_jk s^j v^k`.
    pub fn apply(&self, s: &[T], v: &[T]) -> Vec<T> {
        self.gamma.contract(s, v)
    }

    pub fn cast<U: Real>(&self) -> ConnectionCoefficients<U> {
        let cv = |v: &[T]| {
            v.iter()
                .map(|a| U::lit(a.to_f64_lossy()))
                .collect::<Vec<U>>()
        };
        let data: Vec<U> = cv(self.gamma.as_slice());
        ConnectionCoefficients {
            kind: self.kind,
            gamma: Tensor3::from_slice(self.dim(), &data),
            base_dependence: self.base_dependence,
            x: cv(&self.x),
            y: self.y.as_deref().map(cv),
            diagnostics: self.diagnostics.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SprayData<T> {
    pub x: Vec<T>,
    pub y: Vec<T>,
    pub gamma: Tensor3<T>,
    /// `G^i = γ^i_jk y^j y^k`.
    pub spray: Vec<T>,
}

impl<T: Real> SprayData<T> {
    pub fn symmetry_defect(&self) -> T {
        self.gamma.torsion().max_abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NonlinearVariant {
    /// `N^i_j = γ^i_jk y^k - A^i_jk γ^k_rs y^r y^s / F`.
    CartanCorrected,
    /// `N^i_j = ½ ∂G^i/∂y^j`.
    SprayDerivative,
}

#[derive(Debug, Clone, Serialize)]
pub struct NonlinearConnection<T> {
    pub x: Vec<T>,
    pub y: Vec<T>,
    pub n: Matrix<T>,
    pub variant: NonlinearVariant,
}

#[derive(Debug, Clone, Serialize)]
pub struct DifferenceTensor<T> {
    pub x: Vec<T>,
    pub y: Option<Vec<T>>,
    pub b: Tensor3<T>,
    /// Symmetric in the lower slots.
    pub s: Tensor3<T>,
    /// Antisymmetric in the lower slots.
    pub a_anti: Tensor3<T>,
    /// `max |2 A - (Tor_1 - Tor_2)|`.
    pub torsion_identity_residual: T,
}

pub fn formal_christoffel<T: Real>(
    fs: &FinslerStructure,
    x: &[T],
    y: &[T],
) -> Result<SprayData<T>> {
    let geo = LocalGeometry::at(fs, x, y, Level::Connection)?;
    Ok(SprayData {
        gamma: geo.gamma.expect("Level::Connection"),
        spray: geo.spray.expect("Level::Connection"),
        x: geo.x,
        y: geo.y,
    })
}

/// Spray coefficients only; needs one order of differentiation fewer than
/// [`formal_christoffel`].
pub fn spray<T: Real>(fs: &FinslerStructure, x: &[T], y: &[T]) -> Result<Vec<T>> {
    Ok(LocalGeometry::at(fs, x, y, Level::Spray)?
        .spray
        .expect("Level::Spray"))
}

pub fn nonlinear_connection<T: Real>(
    fs: &FinslerStructure,
    x: &[T],
    y: &[T],
    variant: NonlinearVariant,
) -> Result<NonlinearConnection<T>> {
    let n = match variant {
        NonlinearVariant::CartanCorrected => LocalGeometry::at(fs, x, y, Level::Connection)?
            .nonlinear
            .expect("Level::Connection"),
        NonlinearVariant::SprayDerivative => LocalGeometry::at(fs, x, y, Level::Full)?
            .nonlinear_spray
            .expect("Level::Full"),
    };
    Ok(NonlinearConnection {
        x: x.to_vec(),
        y: y.to_vec(),
        n,
        variant,
    })
}

/// Chern coefficients with the structure-equation residuals
/// `symmetry`, `horizontal_compatibility` and `vertical_compatibility`.
pub fn chern_coefficients<T: Real>(
    fs: &FinslerStructure,
    x: &[T],
    y: &[T],
) -> Result<ConnectionCoefficients<T>> {
    let geo = LocalGeometry::at(fs, x, y, Level::Connection)?;
    Ok(chern_from_geometry(&geo))
}

pub(crate) fn chern_from_geometry<T: Real>(geo: &LocalGeometry<T>) -> ConnectionCoefficients<T> {
    let gamma = geo.expect_chern().clone();
    let mut diagnostics = BTreeMap::new();
    diagnostics.insert("symmetry".into(), gamma.torsion().max_abs().to_f64_lossy());
    diagnostics.insert(
        "horizontal_compatibility".into(),
        compatibility_defect(geo, &gamma).max_abs().to_f64_lossy(),
    );
    let dg_dy = geo.dg_dy.as_ref().expect("Level::Connection");
    let vertical = dg_dy
        .scale(geo.f)
        .sub(&geo.expect_cartan().scale(T::lit(2.0)));
    diagnostics.insert(
        "vertical_compatibility".into(),
        vertical.max_abs().to_f64_lossy(),
    );
    ConnectionCoefficients {
        kind: ConnectionKind::Chern,
        gamma,
        base_dependence: BaseDependence::XAndY,
        x: geo.x.clone(),
        y: Some(geo.y.clone()),
        diagnostics,
    }
}

/// `δ_k g_ij - g_mj Γ^m_ik - g_im Γ^m_jk`, stored at `[(i, j, k)]`.
pub fn compatibility_defect<T: Real>(geo: &LocalGeometry<T>, gamma: &Tensor3<T>) -> Tensor3<T> {
    let n = geo.n;
    let dg = geo.delta_g();
    let g = &geo.g;
    Tensor3::from_fn(n, |i, j, k| {
        let mut v = dg[(i, j, k)];
        for m in 0..n {
            v -= g[(m, j)] * gamma[(m, i, k)] + g[(i, m)] * gamma[(m, j, k)];
        }
        v
    })
}

/// Berwald coefficients `½ ∂²G^i/∂y^j∂y^k`, with the maximum of
/// [`berwald_defect`] recorded as the `h_compatibility` diagnostic.
pub fn berwald_coefficients<T: Real>(
    fs: &FinslerStructure,
    x: &[T],
    y: &[T],
) -> Result<ConnectionCoefficients<T>> {
    let geo = LocalGeometry::at(fs, x, y, Level::Full)?;
    let gamma = geo.expect_berwald().clone();
    let mut diagnostics = BTreeMap::new();
    diagnostics.insert("symmetry".into(), gamma.torsion().max_abs().to_f64_lossy());
    diagnostics.insert(
        "h_compatibility".into(),
        berwald_defect_from_geometry(&geo).max_abs().to_f64_lossy(),
    );
    Ok(ConnectionCoefficients {
        kind: ConnectionKind::Berwald,
        gamma,
        base_dependence: BaseDependence::XAndY,
        x: geo.x,
        y: Some(geo.y),
        diagnostics,
    })
}

/// `∇^b_H g + 2 ∇^b_l A` for the Berwald connection, stored at `[(i, j, k)]`
/// with `k` the horizontal direction.
pub fn berwald_defect<T: Real>(fs: &FinslerStructure, x: &[T], y: &[T]) -> Result<Tensor3<T>> {
    let geo = LocalGeometry::at(fs, x, y, Level::Full)?;
    Ok(berwald_defect_from_geometry(&geo))
}

fn berwald_defect_from_geometry<T: Real>(geo: &LocalGeometry<T>) -> Tensor3<T> {
    let gb = geo.expect_berwald();
    let h = compatibility_defect(geo, gb);
    let la = geo.cartan_along_l(gb);
    h.add(&la.scale(T::lit(2.0)))
}

/// `Ȧ_ijk = l^s A_ijk|s` with the Chern horizontal covariant derivative.
pub fn landsberg_tensor<T: Real>(fs: &FinslerStructure, x: &[T], y: &[T]) -> Result<Tensor3<T>> {
    let geo = LocalGeometry::at(fs, x, y, Level::Full)?;
    Ok(geo.cartan_along_l(geo.expect_chern()))
}

/// Re-tags a base connection as a connection on the pulled-back bundle; the
/// coefficients are unchanged and ignore the fibre direction.
pub fn pullback_connection<T: Real>(
    affine: &ConnectionCoefficients<T>,
) -> Result<ConnectionCoefficients<T>> {
    if affine.base_dependence != BaseDependence::XOnly {
        return Err(FinslerError::InvalidArgument(format!(
            "{} connection depends on the fibre direction",
            affine.kind.name()
        )));
    }
    Ok(ConnectionCoefficients {
        kind: ConnectionKind::PullbackAffine,
        gamma: affine.gamma.clone(),
        base_dependence: BaseDependence::XOnly,
        x: affine.x.clone(),
        y: None,
        diagnostics: affine.diagnostics.clone(),
    })
}

pub fn difference_tensor<T: Real>(
    c1: &ConnectionCoefficients<T>,
    c2: &ConnectionCoefficients<T>,
) -> Result<DifferenceTensor<T>> {
    if c1.dim() != c2.dim() {
        return Err(FinslerError::DimensionMismatch {
            expected: c1.dim(),
            found: c2.dim(),
        });
    }
    let b = c1.gamma.sub(&c2.gamma);
    let s = b.symmetric_part();
    let a_anti = b.antisymmetric_part();
    let tor = c1.torsion().sub(&c2.torsion());
    let torsion_identity_residual = a_anti.scale(T::lit(2.0)).sub(&tor).max_abs();
    Ok(DifferenceTensor {
        x: c1.x.clone(),
        y: c1.y.clone().or_else(|| c2.y.clone()),
        b,
        s,
        a_anti,
        torsion_identity_residual,
    })
}
