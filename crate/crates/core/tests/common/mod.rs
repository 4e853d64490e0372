//! Independent oracles shared by the integration tests and the acceptance
//! runner. Nothing here calls the jet machinery: derivatives come from
//! finite differences in double-double precision, averages from Monte-Carlo
//! sums, transports from a fixed-step integrator written out below.
#![allow(dead_code, clippy::excessive_precision, clippy::type_complexity)]

pub mod derived;

use std::collections::BTreeMap;

use finsler::fields::ConnectionField;
use finsler::{Chart, FinslerStructure};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use twofloat::TwoFloat;

pub type Dd = TwoFloat;

pub fn dd(v: f64) -> Dd {
    Dd::from(v)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Central stencil for an `m`-th derivative: offsets in units of `h` and
/// coefficients before division by `h^m`.
fn stencil(m: usize) -> (&'static [f64], &'static [f64]) {
    match m {
        1 => (&[-1.0, 1.0], &[-0.5, 0.5]),
        2 => (&[-1.0, 0.0, 1.0], &[1.0, -2.0, 1.0]),
        3 => (&[-2.0, -1.0, 1.0, 2.0], &[-0.5, 1.0, -1.0, 0.5]),
        4 => (&[-2.0, -1.0, 0.0, 1.0, 2.0], &[1.0, -4.0, 6.0, -4.0, 1.0]),
        _ => panic!("no stencil for order {m}"),
    }
}

fn product_stencil(f: &dyn Fn(&[Dd]) -> Dd, z: &[f64], vars: &[usize], h: f64) -> Dd {
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for &v in vars {
        *counts.entry(v).or_default() += 1;
    }
    let axes: Vec<(usize, &[f64], &[f64])> = counts
        .iter()
        .map(|(&v, &m)| {
            let (o, c) = stencil(m);
            (v, o, c)
        })
        .collect();
    let hd = dd(h);
    let mut total = dd(0.0);
    let mut idx = vec![0usize; axes.len()];
    loop {
        let mut p: Vec<Dd> = z.iter().map(|&c| dd(c)).collect();
        let mut coef = dd(1.0);
        for (a, &(v, o, c)) in axes.iter().enumerate() {
            p[v] += hd * o[idx[a]];
            coef *= c[idx[a]];
        }
        total += coef * f(&p);
        let mut a = 0;
        loop {
            if a == axes.len() {
                let mut scale = dd(1.0);
                for _ in 0..vars.len() {
                    scale *= hd;
                }
                return total / scale;
            }
            idx[a] += 1;
            if idx[a] < axes[a].1.len() {
                break;
            }
            idx[a] = 0;
            a += 1;
        }
    }
}

/// Mixed partial derivative of `f` at `z` with respect to the multiset
/// `vars`, by product central stencils with one Richardson step.
pub fn fd_partial(f: &dyn Fn(&[Dd]) -> Dd, z: &[f64], vars: &[usize], h: f64) -> f64 {
    if vars.is_empty() {
        let p: Vec<Dd> = z.iter().map(|&c| dd(c)).collect();
        return f(&p).into();
    }
    let coarse = product_stencil(f, z, vars, h);
    let fine = product_stencil(f, z, vars, h / 2.0);
    ((fine * 4.0 - coarse) / 3.0).into()
}

pub const FD_STEP: f64 = 1e-4;

/// `F` as a function of the stacked variables `(x, y)`.
pub fn f_of(fs: &FinslerStructure) -> impl Fn(&[Dd]) -> Dd + '_ {
    let n = fs.dim();
    move |z: &[Dd]| fs.value::<Dd>(&z[..n], &z[n..]).expect("oracle evaluation")
}

pub fn f2_of(fs: &FinslerStructure) -> impl Fn(&[Dd]) -> Dd + '_ {
    let f = f_of(fs);
    move |z: &[Dd]| {
        let v = f(z);
        v * v
    }
}

pub fn stack(x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().chain(y).copied().collect()
}

/// Memoised finite-difference partials of `F²` at one point.
pub struct F2Partials<'a> {
    f2: Box<dyn Fn(&[Dd]) -> Dd + 'a>,
    z: Vec<f64>,
    n: usize,
    cache: BTreeMap<Vec<usize>, f64>,
}

impl<'a> F2Partials<'a> {
    pub fn new(fs: &'a FinslerStructure, x: &[f64], y: &[f64]) -> Self {
        Self {
            f2: Box::new(f2_of(fs)),
            z: stack(x, y),
            n: fs.dim(),
            cache: BTreeMap::new(),
        }
    }

    /// Partial in the stacked variables, `0..n` for `x` and `n..2n` for `y`.
    pub fn d(&mut self, vars: &[usize]) -> f64 {
        let mut key = vars.to_vec();
        key.sort_unstable();
        if let Some(v) = self.cache.get(&key) {
            return *v;
        }
        let v = fd_partial(&*self.f2, &self.z, &key, FD_STEP);
        self.cache.insert(key, v);
        v
    }

    pub fn y(&self, i: usize) -> usize {
        self.n + i
    }

    pub fn g(&mut self) -> DMatrix<f64> {
        let n = self.n;
        DMatrix::from_fn(n, n, |i, j| 0.5 * self.d(&[n + i, n + j]))
    }

    /// `∂g_ij/∂y^k`, flattened `(i n + j) n + k`.
    pub fn dg_dy(&mut self) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n * n * n];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    out[(i * n + j) * n + k] = 0.5 * self.d(&[n + i, n + j, n + k]);
                }
            }
        }
        out
    }

    /// `∂g_ij/∂x^k`, flattened `(i n + j) n + k`.
    pub fn dg_dx(&mut self) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n * n * n];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    out[(i * n + j) * n + k] = 0.5 * self.d(&[n + i, n + j, k]);
                }
            }
        }
        out
    }

    /// Nonlinear connection `∂G^i/∂y^j` of the geodesic spray
    /// `x'' + 2G(x, x') = 0`, from
    /// `G^i = ¼ g^il (∂²F²/∂x^k∂y^l y^k - ∂F²/∂x^l)`.
    pub fn nonlinear(&mut self) -> DMatrix<f64> {
        let n = self.n;
        let y: Vec<f64> = self.z[n..].to_vec();
        let g = self.g();
        let ginv = g.clone().try_inverse().expect("invertible oracle metric");
        let dgy = self.dg_dy();
        let m: Vec<f64> = (0..n)
            .map(|l| (0..n).map(|k| self.d(&[k, n + l]) * y[k]).sum::<f64>() - self.d(&[l]))
            .collect();
        let mut out = DMatrix::zeros(n, n);
        for j in 0..n {
            let dgj = DMatrix::from_fn(n, n, |a, b| dgy[(a * n + b) * n + j]);
            let dginv = -&ginv * dgj * &ginv;
            for i in 0..n {
                let mut acc = 0.0;
                for l in 0..n {
                    let dm = (0..n)
                        .map(|k| self.d(&[k, n + l, n + j]) * y[k])
                        .sum::<f64>()
                        + self.d(&[j, n + l])
                        - self.d(&[l, n + j]);
                    acc += dginv[(i, l)] * m[l] + ginv[(i, l)] * dm;
                }
                out[(i, j)] = 0.25 * acc;
            }
        }
        out
    }
}

/// `½ ∂²F²/∂y∂y` by finite differences.
pub fn fd_fundamental(fs: &FinslerStructure, x: &[f64], y: &[f64]) -> DMatrix<f64> {
    F2Partials::new(fs, x, y).g()
}

/// `A_ijk = (F/4) ∂³F²/∂y^i∂y^j∂y^k`, flattened `(i n + j) n + k`.
pub fn fd_cartan(fs: &FinslerStructure, x: &[f64], y: &[f64]) -> Vec<f64> {
    let f = fs.value(x, y).unwrap();
    let mut p = F2Partials::new(fs, x, y);
    p.dg_dy().into_iter().map(|v| 0.5 * f * v).collect()
}

/// Levi-Civita symbols `Γ^i_jk` of a Riemannian metric given entrywise, from
/// Richardson-extrapolated central differences. Flattened `(i n + j) n + k`.
pub fn fd_levi_civita(metric: &dyn Fn(&[f64]) -> DMatrix<f64>, x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let h = 1e-3;
    let diff = |k: usize, h: f64| {
        let mut p = x.to_vec();
        let mut m = x.to_vec();
        p[k] += h;
        m[k] -= h;
        (metric(&p) - metric(&m)) / (2.0 * h)
    };
    let dg: Vec<DMatrix<f64>> = (0..n)
        .map(|k| (diff(k, h / 2.0) * 4.0 - diff(k, h)) / 3.0)
        .collect();
    let ginv = metric(x).try_inverse().expect("invertible metric");
    let mut out = vec![0.0; n * n * n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                out[(i * n + j) * n + k] = 0.5
                    * (0..n)
                        .map(|s| ginv[(i, s)] * (dg[k][(s, j)] + dg[j][(s, k)] - dg[s][(j, k)]))
                        .sum::<f64>();
            }
        }
    }
    out
}

pub fn hyperbolic_metric(x: &[f64]) -> DMatrix<f64> {
    DMatrix::from_diagonal_element(2, 2, 1.0 / (x[1] * x[1]))
}

pub fn sphere_metric(x: &[f64]) -> DMatrix<f64> {
    let c = 4.0 / (1.0 + x[0] * x[0] + x[1] * x[1]).powi(2);
    DMatrix::from_diagonal_element(2, 2, c)
}

/// Structure-equation residuals of candidate Chern coefficients
/// `gamma[(i n + j) n + k] = Γ^i_jk` at `(x, y)`:
/// horizontal `δ_k g_ij - Γ^s_ik g_sj - Γ^s_jk g_is` and vertical
/// `F ∂g_ij/∂y^k - 2 A_ijk` against the supplied Cartan tensor.
pub fn chern_structure_residuals(
    fs: &FinslerStructure,
    x: &[f64],
    y: &[f64],
    gamma: &[f64],
    cartan: &[f64],
) -> (f64, f64) {
    let n = fs.dim();
    let f = fs.value(x, y).unwrap();
    let mut p = F2Partials::new(fs, x, y);
    let g = p.g();
    let dgy = p.dg_dy();
    let dgx = p.dg_dx();
    let nl = p.nonlinear();
    let t = |i: usize, j: usize, k: usize| (i * n + j) * n + k;
    let mut horizontal = 0.0f64;
    let mut vertical = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let delta =
                    dgx[t(i, j, k)] - (0..n).map(|s| nl[(s, k)] * dgy[t(i, j, s)]).sum::<f64>();
                let conn: f64 = (0..n)
                    .map(|s| gamma[t(s, i, k)] * g[(s, j)] + gamma[t(s, j, k)] * g[(i, s)])
                    .sum();
                horizontal = horizontal.max((delta - conn).abs());
                vertical = vertical.max((f * dgy[t(i, j, k)] - 2.0 * cartan[t(i, j, k)]).abs());
            }
        }
    }
    (horizontal, vertical)
}

/// Hessian of `F²/2` in `y` by plain central differences in `f64`, cheap
/// enough for Monte-Carlo loops.
pub fn quick_fundamental(fs: &FinslerStructure, x: &[f64], u: &[f64]) -> DMatrix<f64> {
    let n = u.len();
    let h = 2e-4;
    let f2 = |y: &[f64]| {
        let v = fs.value(x, y).unwrap();
        0.5 * v * v
    };
    let shifted = |a: usize, sa: f64, b: usize, sb: f64| {
        let mut y = u.to_vec();
        y[a] += sa;
        y[b] += sb;
        f2(&y)
    };
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            (shifted(i, h, i, 0.0) - 2.0 * f2(u) + shifted(i, -h, i, 0.0)) / (h * h)
        } else {
            (shifted(i, h, j, h) - shifted(i, h, j, -h) - shifted(i, -h, j, h)
                + shifted(i, -h, j, -h))
                / (4.0 * h * h)
        }
    })
}

/// Jittered stratified Monte-Carlo average over the indicatrix at `x` in
/// dimension 2. The induced volume element in the angle `θ` of `u` on the
/// Euclidean circle is `sqrt(det g(x, u)) / F(x, u)²`. Returns the total
/// volume and the weighted mean of `integrand(y)` with `F(x, y) = 1`.
pub fn mc_indicatrix_average(
    fs: &FinslerStructure,
    x: &[f64],
    samples: usize,
    seed: u64,
    mut integrand: impl FnMut(&[f64]) -> Vec<f64>,
) -> (f64, Vec<f64>) {
    let mut r = rng(seed);
    let cell = std::f64::consts::TAU / samples as f64;
    let mut volume = 0.0;
    let mut acc: Vec<f64> = Vec::new();
    for k in 0..samples {
        let theta = (k as f64 + r.gen::<f64>()) * cell;
        let u = [theta.cos(), theta.sin()];
        let f = fs.value(x, &u).unwrap();
        let w = quick_fundamental(fs, x, &u).determinant().sqrt() / (f * f) * cell;
        let y = [u[0] / f, u[1] / f];
        let v = integrand(&y);
        if acc.is_empty() {
            acc = vec![0.0; v.len()];
        }
        for (a, b) in acc.iter_mut().zip(&v) {
            *a += w * b;
        }
        volume += w;
    }
    (volume, acc.into_iter().map(|a| a / volume).collect())
}

/// Monte-Carlo length of the curve `θ ↦ p(θ)`, `θ ∈ [0, 2π)`, measured with
/// the constant metric `g`.
pub fn mc_loop_length(
    g: &DMatrix<f64>,
    velocity: impl Fn(f64) -> [f64; 2],
    samples: usize,
    seed: u64,
) -> f64 {
    let mut r = rng(seed);
    let cell = std::f64::consts::TAU / samples as f64;
    (0..samples)
        .map(|k| {
            let v = velocity((k as f64 + r.gen::<f64>()) * cell);
            let vv = nalgebra::Vector2::new(v[0], v[1]);
            (vv.transpose() * g * vv)[(0, 0)].sqrt() * cell
        })
        .sum()
}

/// Corners of a coordinate rectangle in the traversal order used by
/// `CurveSpec::LoopRectangle`.
pub fn rectangle_path(corner: &[f64], a: f64, b: f64, plane: (usize, usize)) -> Vec<Vec<f64>> {
    let mut p1 = corner.to_vec();
    p1[plane.0] += a;
    let mut p2 = p1.clone();
    p2[plane.1] += b;
    let mut p3 = corner.to_vec();
    p3[plane.1] += b;
    vec![corner.to_vec(), p1, p2, p3, corner.to_vec()]
}

/// Fixed-step classical Runge-Kutta transport along a polygon: the lifted
/// direction follows `y' = -N x'`, each section `S' = -Γ(S, x')`.
pub fn rk4_polygon_transport<C: ConnectionField<f64>>(
    field: &C,
    vertices: &[Vec<f64>],
    y0: Option<&[f64]>,
    sections: &[Vec<f64>],
    steps_per_edge: usize,
) -> (Option<Vec<f64>>, Vec<Vec<f64>>) {
    let n = field.dim();
    let lifted = y0.is_some();
    let mut state: Vec<f64> = y0.map(|y| y.to_vec()).unwrap_or_default();
    for s in sections {
        state.extend_from_slice(s);
    }
    for w in vertices.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let v: Vec<f64> = a.iter().zip(b).map(|(p, q)| q - p).collect();
        let rhs = |t: f64, u: &[f64]| -> Vec<f64> {
            let x: Vec<f64> = a.iter().zip(&v).map(|(p, d)| p + t * d).collect();
            let y: Vec<f64> = if lifted { u[..n].to_vec() } else { v.clone() };
            let (gamma, nl) = field.evaluate(&x, &y).expect("oracle field evaluation");
            let mut out = vec![0.0; u.len()];
            let mut off = 0;
            if lifted {
                for i in 0..n {
                    out[i] = -(0..n).map(|k| nl[(i, k)] * v[k]).sum::<f64>();
                }
                off = n;
            }
            while off < u.len() {
                for i in 0..n {
                    let mut acc = 0.0;
                    for j in 0..n {
                        for k in 0..n {
                            acc += gamma[(i, j, k)] * u[off + j] * v[k];
                        }
                    }
                    out[off + i] = -acc;
                }
                off += n;
            }
            out
        };
        let h = 1.0 / steps_per_edge as f64;
        for step in 0..steps_per_edge {
            let t = step as f64 * h;
            let axpy = |u: &[f64], k: &[f64], c: f64| {
                u.iter().zip(k).map(|(a, b)| a + c * b).collect::<Vec<_>>()
            };
            let k1 = rhs(t, &state);
            let k2 = rhs(t + h / 2.0, &axpy(&state, &k1, h / 2.0));
            let k3 = rhs(t + h / 2.0, &axpy(&state, &k2, h / 2.0));
            let k4 = rhs(t + h, &axpy(&state, &k3, h));
            for i in 0..state.len() {
                state[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
    }
    let (dir, rest) = if lifted {
        (Some(state[..n].to_vec()), &state[n..])
    } else {
        (None, &state[..])
    };
    (dir, rest.chunks(n).map(|c| c.to_vec()).collect())
}

/// Smallest relative residual `max_H |Hᵀ Q H - Q| / max |Q|` over a grid of
/// positive definite forms `Q = [[p, q], [q, r]]` with entries in
/// `[-1, 1]`.
pub fn grid_min_form_residual(matrices: &[[[f64; 2]; 2]], steps: usize) -> f64 {
    let grid: Vec<f64> = (0..=steps)
        .map(|k| -1.0 + 2.0 * k as f64 / steps as f64)
        .collect();
    let mut best = f64::INFINITY;
    for &p in &grid {
        for &q in &grid {
            for &r in &grid {
                if !(p > 0.0 && p * r - q * q > 0.0) {
                    continue;
                }
                let scale = p.abs().max(q.abs()).max(r.abs());
                let mut worst = 0.0f64;
                for h in matrices {
                    let qm = [[p, q], [q, r]];
                    for i in 0..2 {
                        for j in 0..2 {
                            let mut v = 0.0;
                            for a in 0..2 {
                                for b in 0..2 {
                                    v += h[a][i] * qm[a][b] * h[b][j];
                                }
                            }
                            worst = worst.max((v - qm[i][j]).abs());
                        }
                    }
                }
                best = best.min(worst / scale);
            }
        }
    }
    best
}

/// Area of the coordinate rectangle `[x0, x0 + a] × [y0, y0 + b]` under the
/// density `sqrt(det g)`, by a 2D Gauss-Legendre product rule.
pub fn metric_area(metric: &dyn Fn(&[f64]) -> DMatrix<f64>, corner: &[f64], a: f64, b: f64) -> f64 {
    // 8-point Gauss-Legendre on [-1, 1].
    const T: [f64; 8] = [
        -0.960_289_856_497_536_2,
        -0.796_666_477_413_626_7,
        -0.525_532_409_916_329_0,
        -0.183_434_642_495_649_8,
        0.183_434_642_495_649_8,
        0.525_532_409_916_329_0,
        0.796_666_477_413_626_7,
        0.960_289_856_497_536_2,
    ];
    const W: [f64; 8] = [
        0.101_228_536_290_376_3,
        0.222_381_034_453_374_5,
        0.313_706_645_877_887_3,
        0.362_683_783_378_362_0,
        0.362_683_783_378_362_0,
        0.313_706_645_877_887_3,
        0.222_381_034_453_374_5,
        0.101_228_536_290_376_3,
    ];
    let mut total = 0.0;
    for (ti, wi) in T.iter().zip(W) {
        for (tj, wj) in T.iter().zip(W) {
            let p = [
                corner[0] + a * (ti + 1.0) / 2.0,
                corner[1] + b * (tj + 1.0) / 2.0,
            ];
            total += wi * wj * metric(&p).determinant().sqrt();
        }
    }
    total * a * b / 4.0
}

/// Charts used for random sampling on each named test metric.
pub fn chart_for(name: &str) -> Chart {
    match name {
        "euclidean" => Chart::cube(2, -1.0, 1.0),
        "hyperbolic" => Chart::new(vec![-1.0, 0.5], vec![1.0, 2.0]).unwrap(),
        "sphere-patch" => Chart::cube(2, -1.0, 1.0),
        "berwald-randers" => Chart::cube(2, -1.0, 1.0),
        "nonberwald-randers" => Chart::new(vec![-1.0, 0.5], vec![1.0, 1.5]).unwrap(),
        other => panic!("no chart for {other}"),
    }
}

pub fn structure_for(name: &str) -> FinslerStructure {
    match name {
        "euclidean" => finsler::presets::euclidean(),
        other => {
            finsler::presets::by_name(other).unwrap_or_else(|| panic!("unknown preset {other}"))
        }
    }
}

pub fn random_point(r: &mut ChaCha8Rng, chart: &Chart) -> Vec<f64> {
    chart
        .lower
        .iter()
        .zip(&chart.upper)
        .map(|(l, u)| l + (u - l) * r.gen::<f64>())
        .collect()
}

pub fn random_direction(r: &mut ChaCha8Rng) -> Vec<f64> {
    let t = std::f64::consts::TAU * r.gen::<f64>();
    vec![t.cos(), t.sin()]
}

/// Random piecewise-cubic paths through three or four waypoints inside the
/// chart, kept clear of its boundary.
pub fn random_paths(chart: &Chart, count: usize, seed: u64) -> Vec<finsler::transport::CurveSpec> {
    let inner = chart.inset(0.2).unwrap();
    let mut r = rng(seed);
    (0..count)
        .map(|k| finsler::transport::CurveSpec::CoordinatePath {
            waypoints: (0..3 + k % 2)
                .map(|_| random_point(&mut r, &inner))
                .collect(),
            interpolation: if k % 2 == 0 {
                finsler::transport::Interpolation::Linear
            } else {
                finsler::transport::Interpolation::Cubic
            },
        })
        .collect()
}
