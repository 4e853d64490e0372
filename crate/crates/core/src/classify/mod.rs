//! Executable classification criteria: Berwald, Landsberg, indicatrix
//! rigidity under a Riemannian transport, the interpolated-indicatrix test and
//! holonomy of the averaged connection.
//!
//! These routines work in `f64`.

mod holonomy;
mod report;

use std::collections::BTreeMap;

use serde::Serialize;

pub use holonomy::{
    fit_invariant_form, holonomy_classify, holonomy_loops, holonomy_sample, matrix_log, FormFit,
    HolonomyClassification, HolonomySample,
};
pub use report::{
    effective_tolerance, ClassificationReport, HolonomyClass, Residual, SamplingMeta, TestOutcome,
    Verdict, VerdictValue,
};

use crate::averaging::{averaged_connection, AveragedMetricField, QuadratureScheme};
use crate::chart::Chart;
use crate::connections::ConnectionKind;
use crate::error::{FinslerError, Result};
use crate::expr::{Expr, Func, MetricExpression};
use crate::fields::{LeviCivitaField, MetricField};
use crate::geometry::{Level, LocalGeometry};
use crate::linalg::{Matrix, Tensor3};
use crate::sampling::{rng, sphere_directions};
use crate::structure::FinslerStructure;
use crate::tensors::convexity_scan;
use crate::transport::{indicatrix_drift_of, transport_matrix, CurveSpec, TransportOptions};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sampling {
    pub points: Vec<Vec<f64>>,
    pub directions: usize,
    pub seed: u64,
}

impl Sampling {
    /// `count` points drawn uniformly from `chart`.
    pub fn random(chart: &Chart, count: usize, directions: usize, seed: u64) -> Self {
        let mut g = rng(seed);
        Self {
            points: (0..count).map(|_| chart.sample_point(&mut g)).collect(),
            directions,
            seed,
        }
    }

    fn check(&self) -> Result<()> {
        if self.points.len() < 3 {
            return Err(FinslerError::InsufficientSamples {
                needed: 3,
                got: self.points.len(),
            });
        }
        if self.directions < 8 {
            return Err(FinslerError::InsufficientSamples {
                needed: 8,
                got: self.directions,
            });
        }
        Ok(())
    }
}

fn residual(name: &str, value: f64, tolerance: f64, samples: usize, seed: u64) -> Residual {
    Residual {
        name: name.into(),
        value,
        tolerance,
        samples,
        seed,
    }
}

/// Compares Chern coefficients across directions at each point, directly and
/// against their indicatrix average.
pub fn berwald_test(
    fs: &FinslerStructure,
    sampling: &Sampling,
    tol: f64,
    scheme: &QuadratureScheme,
) -> Result<TestOutcome> {
    sampling.check()?;
    let n = fs.dim();
    let dirs = sphere_directions::<f64>(n, sampling.directions);
    let mut direct = 0.0f64;
    let mut averaged = 0.0f64;
    let mut quad_err = 0.0f64;
    let mut magnitude = 0.0f64;
    for x in &sampling.points {
        let gammas: Vec<Tensor3<f64>> = dirs
            .iter()
            .map(|y| {
                Ok(LocalGeometry::at(fs, x, y, Level::Connection)?
                    .chern
                    .expect("Level::Connection"))
            })
            .collect::<Result<_>>()?;
        let avg = averaged_connection::<f64>(fs, x, ConnectionKind::Chern, scheme)?;
        quad_err = quad_err.max(avg.error_estimate);
        for (a, ga) in gammas.iter().enumerate() {
            magnitude = magnitude.max(ga.max_abs());
            averaged = averaged.max(ga.sub(&avg.coefficients.gamma).max_abs());
            for gb in &gammas[a + 1..] {
                direct = direct.max(ga.sub(gb).max_abs());
            }
        }
    }
    let tol_eff = effective_tolerance(tol, magnitude);
    let samples = sampling.points.len() * sampling.directions;
    let verdict = Verdict::from_residual(direct, tol_eff)
        .and(Verdict::from_residual(averaged, tol_eff + quad_err));
    Ok(TestOutcome {
        verdict,
        residuals: vec![
            residual("berwald_direct", direct, tol_eff, samples, sampling.seed),
            residual(
                "berwald_averaged",
                averaged,
                tol_eff + quad_err,
                samples,
                sampling.seed,
            ),
        ],
        notes: Vec::new(),
    })
}

/// `max |Ȧ|` over the sampled points and directions.
pub fn landsberg_test(fs: &FinslerStructure, sampling: &Sampling, tol: f64) -> Result<TestOutcome> {
    sampling.check()?;
    let dirs = sphere_directions::<f64>(fs.dim(), sampling.directions);
    let mut worst = 0.0f64;
    let mut magnitude = 0.0f64;
    for x in &sampling.points {
        for y in &dirs {
            let geo = LocalGeometry::at(fs, x, y, Level::Full)?;
            magnitude = magnitude.max(geo.expect_cartan().max_abs());
            worst = worst.max(geo.cartan_along_l(geo.expect_chern()).max_abs());
        }
    }
    let tol_eff = effective_tolerance(tol, magnitude);
    Ok(TestOutcome {
        verdict: Verdict::from_residual(worst, tol_eff),
        residuals: vec![residual(
            "landsberg",
            worst,
            tol_eff,
            sampling.points.len() * sampling.directions,
            sampling.seed,
        )],
        notes: Vec::new(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CurveDrift {
    pub curve: CurveSpec,
    pub max: f64,
    pub mean: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RigidityOutcome {
    pub outcome: TestOutcome,
    pub per_curve: Vec<CurveDrift>,
}

/// Transports indicatrix samples with the Levi-Civita connection of `h`
/// along every curve and compares `F` before and after.
pub fn rigidity_test<M: MetricField<f64>>(
    fs: &FinslerStructure,
    h: &M,
    curves: &[CurveSpec],
    samples: usize,
    tol: f64,
    opts: &TransportOptions,
) -> Result<RigidityOutcome> {
    if curves.is_empty() {
        return Err(FinslerError::InsufficientSamples { needed: 1, got: 0 });
    }
    let field = LeviCivitaField { metric: h };
    let mut per_curve = Vec::with_capacity(curves.len());
    for c in curves {
        let (p, res) = transport_matrix::<f64, _>(&field, c, opts)?;
        let d = indicatrix_drift_of(fs, &c.start(), &res.end_point, &p, samples)?;
        per_curve.push(CurveDrift {
            curve: c.clone(),
            max: d.max,
            mean: d.mean,
        });
    }
    let worst = per_curve.iter().map(|d| d.max).fold(0.0, f64::max);
    let mean = per_curve.iter().map(|d| d.mean).sum::<f64>() / per_curve.len() as f64;
    let count = curves.len() * samples;
    Ok(RigidityOutcome {
        outcome: TestOutcome {
            verdict: Verdict::from_residual(worst, tol),
            residuals: vec![
                residual("rigidity_max_drift", worst, tol, count, 0),
                residual("rigidity_mean_drift", mean, tol, count, 0),
            ],
            notes: vec![
                "Berwald with an h preserved by the Berwald connection implies small drift".into(),
                "small drift for the averaged metric indicates Berwald".into(),
            ],
        },
        per_curve,
    })
}

/// Averaged metric with a quadrature scheme, the default `h`.
pub fn averaged_metric_field(
    fs: &FinslerStructure,
    scheme: &QuadratureScheme,
) -> AveragedMetricField {
    AveragedMetricField {
        structure: fs.clone(),
        scheme: *scheme,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct InterpolationRow {
    pub t: f64,
    pub max_drift: f64,
    pub verdict: Verdict,
    pub min_eigenvalue: Option<f64>,
    /// Set when `F_t` is not strongly convex at a sampled point.
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct NonIntersection {
    /// Every sampled ray meets the indicatrices in strictly monotone radii.
    pub holds: bool,
    /// Smallest `|r_{t_k+1} - r_{t_k}|` over sampled rays.
    pub min_gap: f64,
    pub rays: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct InterpolationTable {
    pub rows: Vec<InterpolationRow>,
    pub non_intersection: NonIntersection,
}

/// `F_t = (1 - t) F + t sqrt(h(x) y y)` with `h` frozen at `x`, as a
/// structure usable for pointwise checks at `x`.
pub fn frozen_interpolant(
    fs: &FinslerStructure,
    h: &Matrix<f64>,
    t: f64,
) -> Result<FinslerStructure> {
    let n = fs.dim();
    let mut terms = Vec::new();
    for i in 0..n {
        for j in 0..n {
            terms.push(Expr::mul(
                Expr::mul(Expr::Const(h[(i, j)]), Expr::Y(i)),
                Expr::Y(j),
            ));
        }
    }
    let riem = Expr::call(Func::Sqrt, Expr::sum(terms));
    let ast = Expr::add(
        Expr::mul(Expr::Const(1.0 - t), fs.expression().ast().clone()),
        Expr::mul(Expr::Const(t), riem),
    );
    Ok(
        FinslerStructure::from_expression(MetricExpression::from_ast(ast, n)?)
            .with_label(format!("F_{t}")),
    )
}

/// For each `t`, the drift of the `F_t` indicatrix under Levi-Civita
/// transport of `h`, plus a check that the indicatrices are nested.
pub fn interpolated_indicatrix_test<M: MetricField<f64>>(
    fs: &FinslerStructure,
    h: &M,
    t_grid: &[f64],
    curves: &[CurveSpec],
    samples: usize,
    tol: f64,
    opts: &TransportOptions,
) -> Result<InterpolationTable> {
    if t_grid.iter().any(|t| !(0.0..=1.0).contains(t)) {
        return Err(FinslerError::InvalidArgument(format!(
            "t grid {t_grid:?} leaves [0, 1]"
        )));
    }
    if curves.is_empty() {
        return Err(FinslerError::InsufficientSamples { needed: 1, got: 0 });
    }
    let field = LeviCivitaField { metric: h };
    let mut transports = Vec::with_capacity(curves.len());
    for c in curves {
        let start = c.start();
        let (p, res) = transport_matrix::<f64, _>(&field, c, opts)?;
        let h0 = h.metric(&start)?;
        let h1 = h.metric(&res.end_point)?;
        transports.push((start, res.end_point, p, h0, h1));
    }
    let dirs = sphere_directions::<f64>(fs.dim(), samples);
    let ft = |t: f64, x: &[f64], hx: &Matrix<f64>, y: &[f64]| -> Result<f64> {
        Ok((1.0 - t) * fs.value(x, y)? + t * hx.bilinear(y, y).sqrt())
    };
    let mut rows = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let mut min_ev = f64::INFINITY;
        let mut failure = None;
        for (x0, _, _, h0, _) in &transports {
            match frozen_interpolant(fs, h0, t)
                .and_then(|s| convexity_scan(&s, x0, samples.max(16)))
            {
                Ok(scan) => min_ev = min_ev.min(scan.min_eigenvalue),
                Err(e) => {
                    failure = Some(e.to_string());
                    break;
                }
            }
        }
        if let Some(e) = failure {
            rows.push(InterpolationRow {
                t,
                max_drift: f64::NAN,
                verdict: Verdict::Inconclusive,
                min_eigenvalue: None,
                error: Some(e),
            });
            continue;
        }
        let mut worst = 0.0f64;
        for (x0, x1, p, h0, h1) in &transports {
            for u in &dirs {
                let s = ft(t, x0, h0, u)?;
                let y: Vec<f64> = u.iter().map(|c| c / s).collect();
                worst = worst.max((ft(t, x1, h1, &p.mul_vec(&y))? - 1.0).abs());
            }
        }
        rows.push(InterpolationRow {
            t,
            max_drift: worst,
            verdict: Verdict::from_residual(worst, tol),
            min_eigenvalue: Some(min_ev),
            error: None,
        });
    }

    let mut sorted: Vec<f64> = t_grid.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let mut holds = true;
    let mut min_gap = f64::INFINITY;
    let mut rays = 0;
    for (x0, _, _, h0, _) in &transports {
        for u in &dirs {
            rays += 1;
            let radii: Vec<f64> = sorted
                .iter()
                .map(|&t| ft(t, x0, h0, u).map(|v| 1.0 / v))
                .collect::<Result<_>>()?;
            let diffs: Vec<f64> = radii.windows(2).map(|w| w[1] - w[0]).collect();
            for d in &diffs {
                min_gap = min_gap.min(d.abs());
            }
            let increasing = diffs.iter().all(|d| *d > 0.0);
            let decreasing = diffs.iter().all(|d| *d < 0.0);
            holds &= increasing || decreasing;
        }
    }
    Ok(InterpolationTable {
        rows,
        non_intersection: NonIntersection {
            holds: holds && sorted.len() > 1,
            min_gap: if min_gap.is_finite() { min_gap } else { 0.0 },
            rays,
        },
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct HolonomyOptions {
    pub x: Vec<f64>,
    pub loop_sizes: Vec<f64>,
    pub loop_count: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassifyOptions {
    pub sampling: Sampling,
    pub tol: f64,
    pub scheme: QuadratureScheme,
    pub curves: Vec<CurveSpec>,
    pub indicatrix_samples: usize,
    pub transport: TransportOptions,
    pub holonomy: Option<HolonomyOptions>,
}

/// Runs every criterion and merges the verdicts.
pub fn classify_structure(
    fs: &FinslerStructure,
    opts: &ClassifyOptions,
) -> Result<ClassificationReport> {
    let seed = opts.sampling.seed;
    let mut verdicts = BTreeMap::new();
    let mut residuals = Vec::new();
    let mut notes = Vec::new();

    let berwald = berwald_test(fs, &opts.sampling, opts.tol, &opts.scheme)?;
    let landsberg = landsberg_test(fs, &opts.sampling, opts.tol)?;
    verdicts.insert(
        "is_berwald".to_string(),
        VerdictValue::Verdict(berwald.verdict),
    );
    verdicts.insert(
        "is_landsberg".to_string(),
        VerdictValue::Verdict(landsberg.verdict),
    );
    residuals.extend(berwald.residuals.iter().cloned());
    residuals.extend(landsberg.residuals.iter().cloned());

    if berwald.verdict == Verdict::Yes && landsberg.verdict != Verdict::Yes {
        notes.push("inconsistent: Berwald but not Landsberg at the sampled points".into());
    }
    if berwald.verdict == Verdict::Yes {
        let mut flat = 0.0f64;
        let dirs = sphere_directions::<f64>(fs.dim(), opts.sampling.directions);
        for x in &opts.sampling.points {
            for y in &dirs {
                let g = LocalGeometry::at(fs, x, y, Level::Connection)?;
                flat = flat.max(g.gamma.expect("Level::Connection").max_abs());
            }
        }
        if flat <= opts.tol {
            notes.push(
                "formal Christoffel symbols vanish in this chart: locally Minkowski here".into(),
            );
        }
    }

    if !opts.curves.is_empty() {
        let h = averaged_metric_field(fs, &opts.scheme);
        let mut rig = rigidity_test(
            fs,
            &h,
            &opts.curves,
            opts.indicatrix_samples,
            opts.tol,
            &opts.transport,
        )?;
        for r in &mut rig.outcome.residuals {
            r.seed = seed;
        }
        verdicts.insert(
            "rigidity_holds".to_string(),
            VerdictValue::Verdict(rig.outcome.verdict),
        );
        residuals.extend(rig.outcome.residuals.iter().cloned());
        match (berwald.verdict, rig.outcome.verdict) {
            (Verdict::Yes, Verdict::No) => notes
                .push("Berwald but the averaged metric does not preserve the indicatrix".into()),
            (Verdict::No, Verdict::Yes) => notes
                .push("indicatrix preserved although the sampled structure is not Berwald".into()),
            _ => {}
        }
    }

    let mut curves = opts.curves.len();
    if let Some(hol) = &opts.holonomy {
        let sample = holonomy_sample(
            fs,
            &hol.x,
            &hol.loop_sizes,
            hol.loop_count,
            &opts.scheme,
            &opts.transport,
        )?;
        let class = holonomy_classify(&sample, opts.tol)?;
        curves += sample.loops.len();
        verdicts.insert(
            "holonomy_class".to_string(),
            VerdictValue::Class(class.class),
        );
        residuals.extend(class.residuals.into_iter().map(|mut r| {
            r.seed = seed;
            r
        }));
        notes.extend(class.notes);
    }

    residuals.sort_by(|a, b| a.name.cmp(&b.name));
    Ok(ClassificationReport {
        metric: fs.label().to_string(),
        verdicts,
        residuals,
        sampling: SamplingMeta {
            points: opts.sampling.points.len(),
            directions: opts.sampling.directions,
            curves,
            seed,
        },
        notes,
    })
}

/// Loop rectangles of side `side` with corners drawn from `chart` so that the
/// whole loop stays inside.
pub fn random_loops(chart: &Chart, count: usize, side: f64, seed: u64) -> Result<Vec<CurveSpec>> {
    if chart.dim() < 2 {
        return Err(FinslerError::UnsupportedDimension(chart.dim()));
    }
    let inner = Chart::new(
        chart.lower.clone(),
        chart.upper.iter().map(|u| u - side).collect(),
    )?;
    let mut g = rng(seed);
    Ok((0..count)
        .map(|k| {
            let n = chart.dim();
            let p = k % n;
            let q = (p + 1 + (k / n) % (n - 1)) % n;
            CurveSpec::LoopRectangle {
                corner: inner.sample_point(&mut g),
                a: side,
                b: side,
                plane: (p, q),
            }
        })
        .collect())
}
