//! Geodesics and parallel transport along curves in a chart.

use serde::{Deserialize, Serialize};

use crate::chart::Chart;
use crate::error::{FinslerError, Result};
use crate::fields::{BerwaldField, ChernField, ConnectionField};
use crate::geometry::{Level, LocalGeometry};
use crate::linalg::{norm, Matrix};
use crate::ode::{dopri5, OdeOptions, OdeStats};
use crate::sampling::sphere_directions;
use crate::scalar::{to_f64_vec, Real};
use crate::structure::FinslerStructure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    #[default]
    Linear,
    /// Natural cubic spline through the waypoints, uniform parameter.
    Cubic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CurveSpec {
    /// Geodesic of the transporting connection with initial velocity `y0`,
    /// followed for parameter time `length`.
    Geodesic {
        x0: Vec<f64>,
        y0: Vec<f64>,
        length: f64,
    },
    CoordinatePath {
        waypoints: Vec<Vec<f64>>,
        #[serde(default)]
        interpolation: Interpolation,
    },
    /// Closed rectangle starting at `corner`: side `a` along coordinate
    /// `plane.0`, then side `b` along `plane.1`, then back.
    LoopRectangle {
        corner: Vec<f64>,
        a: f64,
        b: f64,
        plane: (usize, usize),
    },
}

/// One smooth piece of a prescribed curve, parametrised by `[0, 1]`.
#[derive(Debug, Clone)]
pub enum Segment {
    Line {
        from: Vec<f64>,
        to: Vec<f64>,
    },
    /// Per coordinate `c0 + c1 t + c2 t² + c3 t³`.
    Cubic {
        coeffs: Vec<[f64; 4]>,
    },
}

impl Segment {
    pub fn position(&self, t: f64) -> Vec<f64> {
        match self {
            Segment::Line { from, to } => {
                from.iter().zip(to).map(|(a, b)| a + t * (b - a)).collect()
            }
            Segment::Cubic { coeffs } => coeffs
                .iter()
                .map(|c| c[0] + t * (c[1] + t * (c[2] + t * c[3])))
                .collect(),
        }
    }

    pub fn velocity(&self, t: f64) -> Vec<f64> {
        match self {
            Segment::Line { from, to } => from.iter().zip(to).map(|(a, b)| b - a).collect(),
            Segment::Cubic { coeffs } => coeffs
                .iter()
                .map(|c| c[1] + t * (2.0 * c[2] + 3.0 * t * c[3]))
                .collect(),
        }
    }
}

impl CurveSpec {
    pub fn start(&self) -> Vec<f64> {
        match self {
            CurveSpec::Geodesic { x0, .. } => x0.clone(),
            CurveSpec::CoordinatePath { waypoints, .. } => waypoints[0].clone(),
            CurveSpec::LoopRectangle { corner, .. } => corner.clone(),
        }
    }

    pub fn is_closed(&self) -> bool {
        matches!(self, CurveSpec::LoopRectangle { .. })
    }

    pub fn validate(&self, dim: usize, chart: Option<&Chart>) -> Result<()> {
        let check_point = |p: &[f64]| -> Result<()> {
            if p.len() != dim {
                return Err(FinslerError::DimensionMismatch {
                    expected: dim,
                    found: p.len(),
                });
            }
            if let Some(c) = chart {
                if !c.contains(p) {
                    return Err(FinslerError::LeftChart { x: p.to_vec() });
                }
            }
            Ok(())
        };
        match self {
            CurveSpec::Geodesic { x0, y0, length } => {
                check_point(x0)?;
                if y0.len() != dim {
                    return Err(FinslerError::DimensionMismatch {
                        expected: dim,
                        found: y0.len(),
                    });
                }
                if !(length.is_finite() && *length >= 0.0) {
                    return Err(FinslerError::InvalidArgument(format!(
                        "geodesic length {length}"
                    )));
                }
            }
            CurveSpec::CoordinatePath { waypoints, .. } => {
                if waypoints.len() < 2 {
                    return Err(FinslerError::InsufficientSamples {
                        needed: 2,
                        got: waypoints.len(),
                    });
                }
                for w in waypoints {
                    check_point(w)?;
                }
            }
            CurveSpec::LoopRectangle {
                corner,
                a,
                b,
                plane,
            } => {
                if plane.0 == plane.1 || plane.0 >= dim || plane.1 >= dim {
                    return Err(FinslerError::InvalidArgument(format!(
                        "coordinate plane {plane:?}"
                    )));
                }
                if !(a.is_finite() && b.is_finite()) {
                    return Err(FinslerError::InvalidArgument("non-finite loop side".into()));
                }
                for w in rectangle_vertices(corner, *a, *b, *plane) {
                    check_point(&w)?;
                }
            }
        }
        Ok(())
    }

    /// The smooth pieces of a prescribed curve; empty for geodesics.
    pub fn segments(&self) -> Vec<Segment> {
        match self {
            CurveSpec::Geodesic { .. } => Vec::new(),
            CurveSpec::CoordinatePath {
                waypoints,
                interpolation,
            } => match interpolation {
                Interpolation::Linear => lines(waypoints),
                Interpolation::Cubic => natural_spline(waypoints),
            },
            CurveSpec::LoopRectangle {
                corner,
                a,
                b,
                plane,
            } => {
                let mut v = rectangle_vertices(corner, *a, *b, *plane);
                v.push(corner.clone());
                lines(&v)
            }
        }
    }

    /// The same curve traversed backwards. Geodesics reverse by flipping the
    /// initial velocity at the end point, which is not known in advance, so
    /// they are rejected.
    pub fn reversed(&self) -> Result<CurveSpec> {
        match self {
            CurveSpec::Geodesic { .. } => Err(FinslerError::InvalidArgument(
                "reverse a geodesic by integrating from its end point".into(),
            )),
            CurveSpec::CoordinatePath {
                waypoints,
                interpolation,
            } => Ok(CurveSpec::CoordinatePath {
                waypoints: waypoints.iter().rev().cloned().collect(),
                interpolation: *interpolation,
            }),
            CurveSpec::LoopRectangle {
                corner,
                a,
                b,
                plane,
            } => Ok(CurveSpec::LoopRectangle {
                corner: corner.clone(),
                a: *b,
                b: *a,
                plane: (plane.1, plane.0),
            }),
        }
    }
}

fn rectangle_vertices(corner: &[f64], a: f64, b: f64, plane: (usize, usize)) -> Vec<Vec<f64>> {
    let mut p1 = corner.to_vec();
    p1[plane.0] += a;
    let mut p2 = p1.clone();
    p2[plane.1] += b;
    let mut p3 = corner.to_vec();
    p3[plane.1] += b;
    vec![corner.to_vec(), p1, p2, p3]
}

fn lines(points: &[Vec<f64>]) -> Vec<Segment> {
    points
        .windows(2)
        .map(|w| Segment::Line {
            from: w[0].clone(),
            to: w[1].clone(),
        })
        .collect()
}

fn natural_spline(points: &[Vec<f64>]) -> Vec<Segment> {
    let m = points.len();
    if m < 3 {
        return lines(points);
    }
    let dim = points[0].len();
    // Second derivatives at the knots, one tridiagonal solve per coordinate.
    let mut second = vec![vec![0.0; dim]; m];
    for d in 0..dim {
        let rhs: Vec<f64> = (1..m - 1)
            .map(|i| 6.0 * (points[i + 1][d] - 2.0 * points[i][d] + points[i - 1][d]))
            .collect();
        let k = rhs.len();
        let mut c = vec![0.0; k];
        let mut r = vec![0.0; k];
        for i in 0..k {
            let denom = 4.0 - if i > 0 { c[i - 1] } else { 0.0 };
            c[i] = 1.0 / denom;
            r[i] = (rhs[i] - if i > 0 { r[i - 1] } else { 0.0 }) / denom;
        }
        for i in (0..k).rev() {
            let next = if i + 1 < k { second[i + 2][d] } else { 0.0 };
            second[i + 1][d] = r[i] - c[i] * next;
        }
    }
    (0..m - 1)
        .map(|i| Segment::Cubic {
            coeffs: (0..dim)
                .map(|d| {
                    let (p0, p1) = (points[i][d], points[i + 1][d]);
                    let (s0, s1) = (second[i][d], second[i + 1][d]);
                    [
                        p0,
                        p1 - p0 - (2.0 * s0 + s1) / 6.0,
                        s0 / 2.0,
                        (s1 - s0) / 6.0,
                    ]
                })
                .collect(),
        })
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct TransportOptions {
    pub ode: OdeOptions,
    pub chart: Option<Chart>,
}

impl TransportOptions {
    pub fn with_tolerance(rtol: f64) -> Self {
        Self {
            ode: OdeOptions {
                rtol,
                atol: rtol * 1e-2,
                ..OdeOptions::default()
            },
            chart: None,
        }
    }

    pub fn in_chart(mut self, chart: Chart) -> Self {
        self.chart = Some(chart);
        self
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TransportResult<T> {
    pub end_point: Vec<T>,
    /// The transported fibre direction, when one was lifted.
    pub direction: Option<Vec<T>>,
    /// Transported sections, one per column.
    pub vectors: Matrix<T>,
    /// `max |F(x(t), y(t)) - F(x(0), y(0))|` over accepted steps.
    pub f_drift: T,
    pub ode_stats: OdeStats,
}

#[derive(Debug, Clone, Serialize)]
pub struct GeodesicSample<T> {
    pub s: T,
    pub x: Vec<T>,
    pub v: Vec<T>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GeodesicSolution<T> {
    pub samples: Vec<GeodesicSample<T>>,
    /// `direction` holds the final velocity; `f_drift` is `max |F(x, x') - 1|`.
    pub result: TransportResult<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransportKind {
    Chern,
    Berwald,
}

fn lit_vec<T: Real>(v: &[f64]) -> Vec<T> {
    v.iter().map(|&a| T::lit(a)).collect()
}

fn check_chart<T: Real>(chart: Option<&Chart>, x: &[T]) -> Result<()> {
    match chart {
        Some(c) if !c.contains(x) => Err(FinslerError::LeftChart { x: to_f64_vec(x) }),
        _ => Ok(()),
    }
}

/// Unit-speed geodesic `x'' + γ(x, x')(x', x') = 0` from `x0` in direction
/// `y0`, for arc length `length`.
pub fn integrate_geodesic<T: Real>(
    fs: &FinslerStructure,
    x0: &[T],
    y0: &[T],
    length: T,
    opts: &TransportOptions,
) -> Result<GeodesicSolution<T>> {
    let n = fs.dim();
    check_chart(opts.chart.as_ref(), x0)?;
    let f0 = fs.value(x0, y0)?;
    if !(f0 > T::zero()) {
        return Err(FinslerError::InvalidArgument(
            "initial direction has F <= 0".into(),
        ));
    }
    let mut u0: Vec<T> = x0.to_vec();
    u0.extend(y0.iter().map(|&v| v / f0));
    let chart = opts.chart.as_ref();
    let rhs = |_s: T, u: &[T], du: &mut [T]| -> Result<()> {
        let (x, v) = u.split_at(n);
        check_chart(chart, x)?;
        let g = LocalGeometry::at(fs, x, v, Level::Spray)?
            .spray
            .expect("Level::Spray");
        for i in 0..n {
            du[i] = v[i];
            du[n + i] = -g[i];
        }
        Ok(())
    };
    let mut samples = Vec::new();
    let mut drift = T::zero();
    let observe = |s: T, u: &[T]| -> Result<()> {
        let (x, v) = u.split_at(n);
        let dev = (fs.value(x, v)? - T::one()).abs();
        drift = drift.max(dev);
        samples.push(GeodesicSample {
            s,
            x: x.to_vec(),
            v: v.to_vec(),
        });
        Ok(())
    };
    let (u, stats) = dopri5(rhs, T::zero(), length, &u0, &opts.ode, observe)?;
    Ok(GeodesicSolution {
        samples,
        result: TransportResult {
            end_point: u[..n].to_vec(),
            direction: Some(u[n..].to_vec()),
            vectors: Matrix::zeros(n, 0),
            f_drift: drift,
            ode_stats: stats,
        },
    })
}

/// Geodesic `x'' + Γ(x, x')(x', x') = 0` of a connection field, with the
/// given initial velocity.
pub fn integrate_connection_geodesic<T: Real, C: ConnectionField<T>>(
    field: &C,
    x0: &[T],
    v0: &[T],
    length: T,
    opts: &TransportOptions,
) -> Result<GeodesicSolution<T>> {
    let n = field.dim();
    check_chart(opts.chart.as_ref(), x0)?;
    let mut u0 = x0.to_vec();
    u0.extend_from_slice(v0);
    let chart = opts.chart.as_ref();
    let rhs = |_s: T, u: &[T], du: &mut [T]| -> Result<()> {
        let (x, v) = u.split_at(n);
        check_chart(chart, x)?;
        let gamma = field.gamma(x, v)?;
        let acc = gamma.contract(v, v);
        for i in 0..n {
            du[i] = v[i];
            du[n + i] = -acc[i];
        }
        Ok(())
    };
    let mut samples = Vec::new();
    let observe = |s: T, u: &[T]| -> Result<()> {
        samples.push(GeodesicSample {
            s,
            x: u[..n].to_vec(),
            v: u[n..].to_vec(),
        });
        Ok(())
    };
    let (u, stats) = dopri5(rhs, T::zero(), length, &u0, &opts.ode, observe)?;
    Ok(GeodesicSolution {
        samples,
        result: TransportResult {
            end_point: u[..n].to_vec(),
            direction: Some(u[n..].to_vec()),
            vectors: Matrix::zeros(n, 0),
            f_drift: T::zero(),
            ode_stats: stats,
        },
    })
}

/// Parallel transport along `curve`.
///
/// The fibre direction `y_start`, if given, is lifted horizontally by
/// `y' = -N(x, y) x'`; each of `sections` follows `S' = -Γ(x, y)(S, x')`. When
/// `measure` is given, `f_drift` tracks `F` of the lifted direction (or of the
/// first section when no direction is lifted).
pub fn transport<T: Real, C: ConnectionField<T>>(
    field: &C,
    curve: &CurveSpec,
    y_start: Option<&[T]>,
    sections: &[Vec<T>],
    measure: Option<&FinslerStructure>,
    opts: &TransportOptions,
) -> Result<TransportResult<T>> {
    let n = field.dim();
    curve.validate(n, opts.chart.as_ref())?;
    if y_start.is_none() && !field.is_affine() {
        return Err(FinslerError::InvalidArgument(
            "a direction-dependent connection needs a fibre direction to lift".into(),
        ));
    }
    if let Some(y) = y_start {
        if y.len() != n {
            return Err(FinslerError::DimensionMismatch {
                expected: n,
                found: y.len(),
            });
        }
    }
    for s in sections {
        if s.len() != n {
            return Err(FinslerError::DimensionMismatch {
                expected: n,
                found: s.len(),
            });
        }
    }
    let has_dir = y_start.is_some();
    let geodesic = matches!(curve, CurveSpec::Geodesic { .. });
    let base = if geodesic { 2 * n } else { 0 };
    let dir_off = base;
    let sec_off = base + if has_dir { n } else { 0 };
    let len = sec_off + n * sections.len();

    let mut x = lit_vec::<T>(&curve.start());
    let mut state = vec![T::zero(); len];
    if let CurveSpec::Geodesic { x0, y0, .. } = curve {
        state[..n].copy_from_slice(&lit_vec::<T>(x0));
        state[n..2 * n].copy_from_slice(&lit_vec::<T>(y0));
    }
    if let Some(y) = y_start {
        state[dir_off..dir_off + n].copy_from_slice(y);
    }
    for (c, s) in sections.iter().enumerate() {
        state[sec_off + c * n..sec_off + (c + 1) * n].copy_from_slice(s);
    }
    let measured = |st: &[T]| -> Option<Vec<T>> {
        if has_dir {
            Some(st[dir_off..dir_off + n].to_vec())
        } else if !sections.is_empty() {
            Some(st[sec_off..sec_off + n].to_vec())
        } else {
            None
        }
    };
    let y_norm0 = y_start.map(norm).unwrap_or(T::one());
    let f0 = match (measure, measured(&state)) {
        (Some(fs), Some(v)) => Some(fs.value(&x, &v)?),
        _ => None,
    };
    let mut drift = T::zero();
    let mut stats = OdeStats::default();
    let chart = opts.chart.as_ref();
    let mut dummy = vec![T::zero(); n];
    dummy[0] = T::one();

    let eval_rhs = |xp: &[T], xv: &[T], u: &[T], du: &mut [T]| -> Result<()> {
        check_chart(chart, xp)?;
        let y = if has_dir {
            &u[dir_off..dir_off + n]
        } else {
            &dummy[..]
        };
        if has_dir && norm(y) <= T::lit(1e-12) * y_norm0 {
            return Err(FinslerError::DegenerateDirection { t: f64::NAN });
        }
        let (gamma, nl) = field.evaluate(xp, y)?;
        if has_dir {
            let dy = nl.mul_vec(xv);
            for i in 0..n {
                du[dir_off + i] = -dy[i];
            }
        }
        for c in 0..sections.len() {
            let s = &u[sec_off + c * n..sec_off + (c + 1) * n];
            let ds = gamma.contract(s, xv);
            for i in 0..n {
                du[sec_off + c * n + i] = -ds[i];
            }
        }
        Ok(())
    };

    let degenerate_time = |e: FinslerError, t: T| match e {
        FinslerError::DegenerateDirection { .. } => FinslerError::DegenerateDirection {
            t: t.to_f64_lossy(),
        },
        other => other,
    };

    if let CurveSpec::Geodesic { length, .. } = curve {
        let rhs = |t: T, u: &[T], du: &mut [T]| -> Result<()> {
            let (xp, xv) = (u[..n].to_vec(), u[n..2 * n].to_vec());
            eval_rhs(&xp, &xv, u, du).map_err(|e| degenerate_time(e, t))?;
            let gamma = field.gamma(&xp, &xv)?;
            let acc = gamma.contract(&xv, &xv);
            for i in 0..n {
                du[i] = xv[i];
                du[n + i] = -acc[i];
            }
            Ok(())
        };
        let observe = |_t: T, u: &[T]| -> Result<()> {
            if let (Some(fs), Some(f0), Some(v)) = (measure, f0, measured(u)) {
                drift = drift.max((fs.value(&u[..n], &v)? - f0).abs());
            }
            Ok(())
        };
        let (u, st) = dopri5(rhs, T::zero(), T::lit(*length), &state, &opts.ode, observe)?;
        stats.merge(&st);
        state = u;
        x = state[..n].to_vec();
    } else {
        let segments = curve.segments();
        let count = segments.len();
        for (k, seg) in segments.iter().enumerate() {
            let rhs = |t: T, u: &[T], du: &mut [T]| -> Result<()> {
                let tf = t.to_f64_lossy();
                let xp = lit_vec::<T>(&seg.position(tf));
                let xv = lit_vec::<T>(&seg.velocity(tf));
                eval_rhs(&xp, &xv, u, du).map_err(|e| degenerate_time(e, T::lit(k as f64) + t))
            };
            let observe = |t: T, u: &[T]| -> Result<()> {
                if let (Some(fs), Some(f0), Some(v)) = (measure, f0, measured(u)) {
                    let xp = lit_vec::<T>(&seg.position(t.to_f64_lossy()));
                    drift = drift.max((fs.value(&xp, &v)? - f0).abs());
                }
                Ok(())
            };
            let (u, st) = dopri5(rhs, T::zero(), T::one(), &state, &opts.ode, observe)?;
            stats.merge(&st);
            state = u;
            if k + 1 == count {
                x = lit_vec::<T>(&seg.position(1.0));
            }
        }
    }

    let vectors = Matrix::from_fn(n, sections.len(), |i, c| state[sec_off + c * n + i]);
    Ok(TransportResult {
        end_point: x,
        direction: has_dir.then(|| state[dir_off..dir_off + n].to_vec()),
        vectors,
        f_drift: drift,
        ode_stats: stats,
    })
}

/// Horizontal transport with the Chern or Berwald connection of `fs`.
pub fn horizontal_transport<T: Real>(
    fs: &FinslerStructure,
    kind: TransportKind,
    curve: &CurveSpec,
    y_start: &[T],
    sections: &[Vec<T>],
    opts: &TransportOptions,
) -> Result<TransportResult<T>> {
    let structure = fs.clone();
    match kind {
        TransportKind::Chern => transport(
            &ChernField { structure },
            curve,
            Some(y_start),
            sections,
            Some(fs),
            opts,
        ),
        TransportKind::Berwald => transport(
            &BerwaldField { structure },
            curve,
            Some(y_start),
            sections,
            Some(fs),
            opts,
        ),
    }
}

/// Transport matrix of an affine connection: column `j` is the transport of
/// the `j`-th coordinate vector.
pub fn transport_matrix<T: Real, C: ConnectionField<T>>(
    field: &C,
    curve: &CurveSpec,
    opts: &TransportOptions,
) -> Result<(Matrix<T>, TransportResult<T>)> {
    if !field.is_affine() {
        return Err(FinslerError::InvalidArgument(
            "transport matrices need a direction-independent connection".into(),
        ));
    }
    let n = field.dim();
    let basis: Vec<Vec<T>> = (0..n)
        .map(|j| {
            (0..n)
                .map(|i| if i == j { T::one() } else { T::zero() })
                .collect()
        })
        .collect();
    let res = transport(field, curve, None, &basis, None, opts)?;
    Ok((res.vectors.clone(), res))
}

#[derive(Debug, Clone, Serialize)]
pub struct IndicatrixDrift {
    pub max: f64,
    pub mean: f64,
    pub samples: usize,
    pub end_point: Vec<f64>,
}

/// Transports `sample_count` points of the indicatrix at the start of the
/// curve with an affine connection and measures `|F(x_end, S_end) - 1|`.
pub fn transport_indicatrix_sample<T: Real, C: ConnectionField<T>>(
    fs: &FinslerStructure,
    field: &C,
    curve: &CurveSpec,
    sample_count: usize,
    opts: &TransportOptions,
) -> Result<IndicatrixDrift> {
    if sample_count < 8 {
        return Err(FinslerError::InsufficientSamples {
            needed: 8,
            got: sample_count,
        });
    }
    let (p, res) = transport_matrix(field, curve, opts)?;
    indicatrix_drift_of(
        fs,
        &lit_vec::<T>(&curve.start()),
        &res.end_point,
        &p,
        sample_count,
    )
}

/// Drift of the indicatrix at `x0` mapped by `p` into the fibre at `x1`.
pub fn indicatrix_drift_of<T: Real>(
    fs: &FinslerStructure,
    x0: &[T],
    x1: &[T],
    p: &Matrix<T>,
    sample_count: usize,
) -> Result<IndicatrixDrift> {
    let mut max = 0.0f64;
    let mut sum = 0.0f64;
    for u in sphere_directions::<T>(fs.dim(), sample_count) {
        let f = fs.value(x0, &u)?;
        let y: Vec<T> = u.iter().map(|&c| c / f).collect();
        let d = (fs.value(x1, &p.mul_vec(&y))? - T::one())
            .abs()
            .to_f64_lossy();
        max = max.max(d);
        sum += d;
    }
    Ok(IndicatrixDrift {
        max,
        mean: sum / sample_count as f64,
        samples: sample_count,
        end_point: to_f64_vec(x1),
    })
}
