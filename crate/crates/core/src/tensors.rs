//! Pointwise tensors of a Finsler structure.

use serde::Serialize;

use crate::error::{FinslerError, Result};
use crate::geometry::{fiber_hessian, Level, LocalGeometry, CONVEXITY_EPS};
use crate::linalg::{Matrix, Tensor3};
use crate::sampling::sphere_directions;
use crate::scalar::Real;
use crate::structure::FinslerStructure;

#[derive(Debug, Clone, Serialize)]
pub struct FundamentalTensor<T> {
    pub x: Vec<T>,
    pub y: Vec<T>,
    pub g: Matrix<T>,
    pub g_inv: Matrix<T>,
}

impl<T: Real> FundamentalTensor<T> {
    /// `max |g g^{-1} - I|`.
    pub fn inverse_residual(&self) -> T {
        let n = self.g.rows();
        self.g
            .matmul(&self.g_inv)
            .sub(&Matrix::identity(n))
            .max_abs()
    }

    /// `g_ij y^i y^j`, which equals `F²` by Euler's theorem.
    pub fn norm_squared(&self) -> T {
        self.g.bilinear(&self.y, &self.y)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CartanTensor<T> {
    pub x: Vec<T>,
    pub y: Vec<T>,
    pub a: Tensor3<T>,
    /// `A^i_jk`, first index raised.
    pub a_raised: Tensor3<T>,
}

impl<T: Real> CartanTensor<T> {
    pub fn symmetry_defect(&self) -> T {
        self.a.total_symmetry_defect()
    }

    /// `max |A_ijk y^k|`.
    pub fn euler_residual(&self) -> T {
        self.a.contract_last(&self.y).max_abs()
    }
}

pub fn fundamental_tensor<T: Real>(
    fs: &FinslerStructure,
    x: &[T],
    y: &[T],
) -> Result<FundamentalTensor<T>> {
    let geo = LocalGeometry::at(fs, x, y, Level::Fiber)?;
    Ok(FundamentalTensor {
        x: geo.x,
        y: geo.y,
        g: geo.g,
        g_inv: geo.g_inv,
    })
}

pub fn cartan_tensor<T: Real>(fs: &FinslerStructure, x: &[T], y: &[T]) -> Result<CartanTensor<T>> {
    let geo = LocalGeometry::at(fs, x, y, Level::Cartan)?;
    let a = geo.cartan.expect("Level::Cartan");
    let a_raised = a.raise_first(&geo.g_inv);
    Ok(CartanTensor {
        x: geo.x,
        y: geo.y,
        a,
        a_raised,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvexityScan {
    pub min_eigenvalue: f64,
    pub worst_direction: Vec<f64>,
    pub samples: usize,
}

/// Smallest eigenvalue of `g(x, u)` over `samples` directions `u` spread over
/// the coordinate unit sphere.
pub fn convexity_scan(fs: &FinslerStructure, x: &[f64], samples: usize) -> Result<ConvexityScan> {
    if samples < 4 {
        return Err(FinslerError::InsufficientSamples {
            needed: 4,
            got: samples,
        });
    }
    if x.len() != fs.dim() {
        return Err(FinslerError::DimensionMismatch {
            expected: fs.dim(),
            found: x.len(),
        });
    }
    let mut worst = (f64::INFINITY, Vec::new());
    for u in sphere_directions::<f64>(fs.dim(), samples) {
        let (_, g) = fiber_hessian(fs, x, &u)?;
        let ev = g.min_eigenvalue();
        if ev < worst.0 || ev.is_nan() {
            worst = (ev, u);
        }
    }
    if !(worst.0 > CONVEXITY_EPS) {
        return Err(FinslerError::StrongConvexityViolation {
            min_eigenvalue: worst.0,
            x: x.to_vec(),
            y: worst.1,
        });
    }
    Ok(ConvexityScan {
        min_eigenvalue: worst.0,
        worst_direction: worst.1,
        samples,
    })
}
