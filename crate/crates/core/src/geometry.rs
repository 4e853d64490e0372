//! Pointwise evaluation of every tensor and connection coefficient at a
//! point `(x, y)` of the slit tangent bundle.
//!
//! One jet expansion of `F` around `(x, y)` feeds all quantities. The
//! [`Level`] selects how many derivatives are expanded; everything a level
//! promises is filled in, anything above it is `None`.

use std::sync::Arc;

use crate::error::{FinslerError, Result};
use crate::jet::{Jet, JetLayout};
use crate::linalg::{Matrix, Tensor3};
use crate::scalar::{to_f64_vec, Real};
use crate::structure::FinslerStructure;

/// Smallest admissible eigenvalue of the fundamental tensor.
pub const CONVEXITY_EPS: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Level {
    /// `F`, `∂F/∂y`, `g`, `g^{-1}`.
    Fiber,
    /// Adds the Cartan tensor.
    Cartan,
    /// `Fiber` plus the spray coefficients.
    Spray,
    /// Adds `∂g/∂x`, formal Christoffel symbols, the nonlinear connection
    /// and the Chern coefficients.
    Connection,
    /// Adds the spray-derived nonlinear connection, Berwald coefficients and
    /// first derivatives of the Cartan tensor.
    Full,
}

impl Level {
    fn jet_order(self) -> (u8, u8) {
        match self {
            Level::Fiber => (2, 0),
            Level::Cartan => (3, 0),
            Level::Spray => (2, 1),
            Level::Connection => (3, 1),
            Level::Full => (4, 1),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LocalGeometry<T> {
    pub n: usize,
    pub x: Vec<T>,
    pub y: Vec<T>,
    pub level: Level,
    pub f: T,
    pub f_grad_y: Vec<T>,
    pub f_grad_x: Option<Vec<T>>,
    pub g: Matrix<T>,
    pub g_inv: Matrix<T>,
    pub min_eigenvalue: T,
    /// `∂g_ij/∂y^k` stored at `[(i, j, k)]`.
    pub dg_dy: Option<Tensor3<T>>,
    /// `A_ijk = (F/2) ∂g_ij/∂y^k`.
    pub cartan: Option<Tensor3<T>>,
    /// `∂g_ij/∂x^k` stored at `[(i, j, k)]`.
    pub dg_dx: Option<Tensor3<T>>,
    /// Formal Christoffel symbols `γ^i_jk`.
    pub gamma: Option<Tensor3<T>>,
    /// Spray coefficients `G^i = γ^i_jk y^j y^k`.
    pub spray: Option<Vec<T>>,
    /// Nonlinear connection with the Cartan-tensor correction.
    pub nonlinear: Option<Matrix<T>>,
    /// Nonlinear connection `½ ∂G^i/∂y^j`.
    pub nonlinear_spray: Option<Matrix<T>>,
    pub chern: Option<Tensor3<T>>,
    pub berwald: Option<Tensor3<T>>,
    /// `∂A_ijk/∂x^s`, indexed by `s`.
    pub dcartan_dx: Option<Vec<Tensor3<T>>>,
    /// `∂A_ijk/∂y^s`, indexed by `s`.
    pub dcartan_dy: Option<Vec<Tensor3<T>>>,
}

fn unit(nvars: usize, vars: &[usize]) -> Vec<u8> {
    let mut m = vec![0u8; nvars];
    for &v in vars {
        m[v] += 1;
    }
    m
}

impl<T: Real> LocalGeometry<T> {
    pub fn at(fs: &FinslerStructure, x: &[T], y: &[T], level: Level) -> Result<Self> {
        let n = fs.dim();
        if x.len() != n || y.len() != n {
            return Err(FinslerError::DimensionMismatch {
                expected: n,
                found: if x.len() != n { x.len() } else { y.len() },
            });
        }
        if y.iter().all(|v| *v == T::zero()) {
            return Err(FinslerError::InvalidArgument(
                "fibre vector must be non-zero".into(),
            ));
        }
        let (px, py) = (to_f64_vec(x), to_f64_vec(y));
        Self::compute(fs, x, y, level).map_err(|e| e.at_point(&px, &py))
    }

    fn compute(fs: &FinslerStructure, x: &[T], y: &[T], level: Level) -> Result<Self> {
        let n = fs.dim();
        let nv = 2 * n;
        let (order, cap) = level.jet_order();
        let layout = JetLayout::shared(nv, order, n, cap);
        let fj = fs.expression().jet_with(&layout, x, y)?;
        let f = fj.value();
        if !(f > T::zero()) {
            return Err(FinslerError::NonPositive {
                value: f.to_f64_lossy(),
                x: to_f64_vec(x),
                y: to_f64_vec(y),
            });
        }
        let f_grad_y: Vec<T> = (0..n).map(|k| fj.partial(&unit(nv, &[n + k]))).collect();
        let f2 = fj.mul(&fj);
        let half = T::lit(0.5);
        let df2_dy: Vec<Jet<T>> = (0..n).map(|i| f2.derivative(n + i)).collect();
        let mut gj: Vec<Vec<Jet<T>>> = Vec::with_capacity(n);
        for i in 0..n {
            let mut row = Vec::with_capacity(n);
            for j in 0..n {
                if j < i {
                    row.push(gj[j][i].clone());
                } else {
                    row.push(df2_dy[i].derivative(n + j).scale(half));
                }
            }
            gj.push(row);
        }
        let g = Matrix::from_fn(n, n, |i, j| gj[i][j].value());
        let min_eigenvalue = g.min_eigenvalue();
        if !(min_eigenvalue > T::lit(CONVEXITY_EPS)) {
            return Err(FinslerError::StrongConvexityViolation {
                min_eigenvalue: min_eigenvalue.to_f64_lossy(),
                x: Vec::new(),
                y: Vec::new(),
            });
        }
        let g_inv = g.inverse()?;

        let mut geo = LocalGeometry {
            n,
            x: x.to_vec(),
            y: y.to_vec(),
            level,
            f,
            f_grad_y,
            f_grad_x: (cap >= 1).then(|| (0..n).map(|k| fj.partial(&unit(nv, &[k]))).collect()),
            g,
            g_inv,
            min_eigenvalue,
            dg_dy: None,
            cartan: None,
            dg_dx: None,
            gamma: None,
            spray: None,
            nonlinear: None,
            nonlinear_spray: None,
            chern: None,
            berwald: None,
            dcartan_dx: None,
            dcartan_dy: None,
        };

        if order >= 3 {
            let dg_dy = Tensor3::from_fn(n, |i, j, k| gj[i][j].partial(&unit(nv, &[n + k])));
            geo.cartan = Some(dg_dy.scale(half * f));
            geo.dg_dy = Some(dg_dy);
        }

        if cap >= 1 && order == 2 {
            // G^i = ½ g^{il} (∂²F²/∂x^k∂y^l y^k - ∂F²/∂x^l)
            let rhs: Vec<T> = (0..n)
                .map(|l| {
                    let mixed = (0..n).fold(T::zero(), |acc, k| {
                        acc + f2.partial(&unit(nv, &[k, n + l])) * y[k]
                    });
                    mixed - f2.partial(&unit(nv, &[l]))
                })
                .collect();
            geo.spray = Some(
                geo.g_inv
                    .mul_vec(&rhs)
                    .into_iter()
                    .map(|v| v * half)
                    .collect(),
            );
        }

        if cap >= 1 && order >= 3 {
            let dg_dx = Tensor3::from_fn(n, |i, j, k| gj[i][j].partial(&unit(nv, &[k])));
            let ginv = &geo.g_inv;
            let gamma = Tensor3::from_fn(n, |i, j, k| {
                (0..n).fold(T::zero(), |acc, s| {
                    acc + ginv[(i, s)] * (dg_dx[(s, j, k)] - dg_dx[(j, k, s)] + dg_dx[(s, k, j)])
                }) * half
            });
            let spray: Vec<T> = gamma.contract(y, y);
            let cartan = geo.cartan.as_ref().expect("order >= 3");
            let a_up = cartan.raise_first(ginv);
            let mut nl = gamma.contract_last(y);
            for i in 0..n {
                for j in 0..n {
                    let corr = (0..n).fold(T::zero(), |acc, k| acc + a_up[(i, j, k)] * spray[k]);
                    nl[(i, j)] -= corr / f;
                }
            }
            let dg_dy = geo.dg_dy.as_ref().expect("order >= 3");
            // δ_j g_sk = ∂g_sk/∂x^j - N^r_j ∂g_sk/∂y^r, stored at (s, k, j)
            let delta_g = Tensor3::from_fn(n, |s, k, j| {
                dg_dx[(s, k, j)]
                    - (0..n).fold(T::zero(), |acc, r| acc + nl[(r, j)] * dg_dy[(s, k, r)])
            });
            let chern = Tensor3::from_fn(n, |l, j, k| {
                (0..n).fold(T::zero(), |acc, s| {
                    acc + ginv[(l, s)]
                        * (delta_g[(s, k, j)] + delta_g[(s, j, k)] - delta_g[(j, k, s)])
                }) * half
            });
            geo.spray = Some(spray);
            geo.gamma = Some(gamma);
            geo.nonlinear = Some(nl);
            geo.chern = Some(chern);
            geo.dg_dx = Some(dg_dx);
        }

        if order >= 4 {
            let ginv_j = invert_jet_matrix(&gj)?;
            let yj: Vec<Jet<T>> = (0..n)
                .map(|k| Jet::variable(&layout, n + k, y[k]))
                .collect();
            let quarter = T::lit(0.25);
            // G_std^i = ¼ g^{il} (∂²F²/∂x^k∂y^l y^k - ∂F²/∂x^l); the paper-style
            // spray is twice this.
            let dxf2: Vec<Jet<T>> = (0..n).map(|l| f2.derivative(l)).collect();
            let rhs: Vec<Jet<T>> = (0..n)
                .map(|l| {
                    let mut acc = dxf2[l].neg();
                    for k in 0..n {
                        acc = acc.add(&df2_dy[l].derivative(k).mul(&yj[k]));
                    }
                    acc
                })
                .collect();
            let g_std: Vec<Jet<T>> = (0..n)
                .map(|i| {
                    let mut acc = ginv_j[i][0].mul(&rhs[0]);
                    for l in 1..n {
                        acc = acc.add(&ginv_j[i][l].mul(&rhs[l]));
                    }
                    acc.scale(quarter)
                })
                .collect();
            geo.nonlinear_spray = Some(Matrix::from_fn(n, n, |i, j| {
                g_std[i].partial(&unit(nv, &[n + j]))
            }));
            geo.berwald = Some(Tensor3::from_fn(n, |i, j, k| {
                g_std[i].partial(&unit(nv, &[n + j, n + k]))
            }));
            let aj: Vec<Jet<T>> = {
                let mut v = Vec::with_capacity(n * n * n);
                for i in 0..n {
                    for j in 0..n {
                        for k in 0..n {
                            v.push(gj[i][j].derivative(n + k).mul(&fj).scale(half));
                        }
                    }
                }
                v
            };
            let at = |s: usize| {
                Tensor3::from_fn(n, |i, j, k| {
                    aj[(i * n + j) * n + k].partial(&unit(nv, &[s]))
                })
            };
            geo.dcartan_dx = Some((0..n).map(at).collect());
            geo.dcartan_dy = Some((0..n).map(|s| at(n + s)).collect());
        }

        Ok(geo)
    }

    pub fn expect_chern(&self) -> &Tensor3<T> {
        self.chern
            .as_ref()
            .expect("Chern coefficients need Level::Connection")
    }

    pub fn expect_berwald(&self) -> &Tensor3<T> {
        self.berwald
            .as_ref()
            .expect("Berwald coefficients need Level::Full")
    }

    pub fn expect_nonlinear(&self) -> &Matrix<T> {
        self.nonlinear
            .as_ref()
            .expect("nonlinear connection needs Level::Connection")
    }

    pub fn expect_cartan(&self) -> &Tensor3<T> {
        self.cartan
            .as_ref()
            .expect("Cartan tensor needs Level::Cartan")
    }

    /// Horizontal derivative `δ_s A_ijk = ∂A/∂x^s - N^r_s ∂A/∂y^r` at index `s`.
    pub fn delta_cartan(&self, s: usize) -> Tensor3<T> {
        let dx = self.dcartan_dx.as_ref().expect("Level::Full");
        let dy = self.dcartan_dy.as_ref().expect("Level::Full");
        let nl = self.expect_nonlinear();
        let n = self.n;
        Tensor3::from_fn(n, |i, j, k| {
            dx[s][(i, j, k)] - (0..n).fold(T::zero(), |acc, r| acc + nl[(r, s)] * dy[r][(i, j, k)])
        })
    }

    /// Horizontal derivative `δ_k g_ij` stored at `[(i, j, k)]`.
    pub fn delta_g(&self) -> Tensor3<T> {
        let dx = self.dg_dx.as_ref().expect("Level::Connection");
        let dy = self.dg_dy.as_ref().expect("Level::Connection");
        let nl = self.expect_nonlinear();
        let n = self.n;
        Tensor3::from_fn(n, |i, j, k| {
            dx[(i, j, k)] - (0..n).fold(T::zero(), |acc, r| acc + nl[(r, k)] * dy[(i, j, r)])
        })
    }

    /// `l^s ∇_s A_ijk` for a horizontal covariant derivative with the given
    /// coefficients, `l = y/F`.
    pub fn cartan_along_l(&self, gamma: &Tensor3<T>) -> Tensor3<T> {
        let n = self.n;
        let a = self.expect_cartan();
        let l: Vec<T> = self.y.iter().map(|&v| v / self.f).collect();
        let mut out = Tensor3::zeros(n);
        for s in 0..n {
            if l[s] == T::zero() {
                continue;
            }
            let da = self.delta_cartan(s);
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let mut v = da[(i, j, k)];
                        for m in 0..n {
                            v -= gamma[(m, i, s)] * a[(m, j, k)]
                                + gamma[(m, j, s)] * a[(i, m, k)]
                                + gamma[(m, k, s)] * a[(i, j, m)];
                        }
                        out[(i, j, k)] += l[s] * v;
                    }
                }
            }
        }
        out
    }
}

/// Gauss-Jordan inversion of a matrix of jets, pivoting on values.
fn invert_jet_matrix<T: Real>(m: &[Vec<Jet<T>>]) -> Result<Vec<Vec<Jet<T>>>> {
    let n = m.len();
    let layout: Arc<JetLayout> = m[0][0].layout().clone();
    let mut a: Vec<Vec<Jet<T>>> = m.to_vec();
    let mut inv: Vec<Vec<Jet<T>>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| Jet::constant(&layout, if i == j { T::one() } else { T::zero() }))
                .collect()
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&p, &q| {
                a[p][col]
                    .value()
                    .abs()
                    .partial_cmp(&a[q][col].value().abs())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .expect("non-empty");
        if a[pivot][col].value() == T::zero() {
            return Err(FinslerError::InvalidArgument(
                "singular fundamental tensor".into(),
            ));
        }
        a.swap(col, pivot);
        inv.swap(col, pivot);
        let r = a[col][col].recip();
        for j in 0..n {
            a[col][j] = a[col][j].mul(&r);
            inv[col][j] = inv[col][j].mul(&r);
        }
        for row in 0..n {
            if row == col {
                continue;
            }
            let factor = a[row][col].clone();
            for j in 0..n {
                a[row][j] = a[row][j].sub(&factor.mul(&a[col][j]));
                inv[row][j] = inv[row][j].sub(&factor.mul(&inv[col][j]));
            }
        }
    }
    Ok(inv)
}

/// `F` and `½ ∂²F²/∂y∂y` at `(x, y)` without any convexity or positivity
/// checks.
pub fn fiber_hessian<T: Real>(fs: &FinslerStructure, x: &[T], y: &[T]) -> Result<(T, Matrix<T>)> {
    let n = fs.dim();
    let nv = 2 * n;
    let layout = JetLayout::shared(nv, 2, n, 0);
    let fj = fs
        .expression()
        .jet_with(&layout, x, y)
        .map_err(|e| e.at_point(&to_f64_vec(x), &to_f64_vec(y)))?;
    let f2 = fj.mul(&fj);
    let g = Matrix::from_fn(n, n, |i, j| {
        f2.partial(&unit(nv, &[n + i, n + j])) * T::lit(0.5)
    });
    Ok((fj.value(), g.symmetrized()))
}
