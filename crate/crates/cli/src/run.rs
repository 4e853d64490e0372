//! Executes the analyses requested by a config and assembles the report.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use finsler::averaging::{averaged_connection, averaged_metric, QuadratureScheme};
use finsler::classify::{
    averaged_metric_field, classify_structure, effective_tolerance, holonomy_classify,
    holonomy_sample, interpolated_indicatrix_test, random_loops, ClassifyOptions, HolonomyClass,
    Residual, Sampling, VerdictValue,
};
use finsler::ode::OdeOptions;
use finsler::sampling::sphere_directions;
use finsler::transport::{
    horizontal_transport, integrate_geodesic, CurveSpec, TransportKind, TransportOptions,
};
use finsler::{
    berwald_coefficients, cartan_tensor, chern_coefficients, convexity_scan, fundamental_tensor,
    landsberg_tensor, nonlinear_connection, spray, Chart, FinslerError, FinslerStructure,
    NonlinearVariant,
};
use serde_json::{json, Value};

use crate::config::{Analysis, Assertion, RunConfig};
use crate::error::ConfigError;
use crate::registry::MetricRegistry;
use crate::report::{
    ErrorEntry, MetricSummary, Report, Samples, Timings, VerdictEntry, SCHEMA_VERSION,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Analyze,
    Classify,
    Holonomy,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Analyze => "analyze",
            Command::Classify => "classify",
            Command::Holonomy => "holonomy",
        }
    }
}

/// Command-line settings that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub assert: Option<Assertion>,
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_ASSERTION: i32 = 2;

#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: Report,
    /// CSV of sampled tensors, when tensors or connections ran.
    pub csv: Option<String>,
    pub exit_code: i32,
    /// Human-readable reason for a nonzero exit code.
    pub message: Option<String>,
}

/// Applies the command and overrides to a parsed config.
pub fn resolve(mut config: RunConfig, command: Command, overrides: &Overrides) -> RunConfig {
    if let Some(seed) = overrides.seed {
        config.numeric.seed = seed;
    }
    if let Some(out) = &overrides.out {
        config.output.report = Some(out.clone());
    }
    if overrides.assert.is_some() {
        config.analysis.assert = overrides.assert;
    }
    match command {
        Command::Analyze => {}
        Command::Classify => config.analysis.run = vec![Analysis::Classify],
        Command::Holonomy => config.analysis.run = vec![Analysis::Holonomy],
    }
    if config.analysis.assert.is_some() && !config.analysis.run.contains(&Analysis::Classify) {
        config.analysis.run.push(Analysis::Classify);
    }
    config.analysis.run.sort();
    config.analysis.run.dedup();
    config
}

/// Loads, runs and writes outputs. Config problems are returned as errors;
/// numeric failures end up in the report with exit code 1.
pub fn run(
    path: &Path,
    command: Command,
    overrides: &Overrides,
    registry: &MetricRegistry,
) -> Result<Outcome, ConfigError> {
    let config = RunConfig::load(path)?;
    let origin = path.display().to_string();
    let outcome = execute(
        resolve(config, command, overrides),
        command,
        registry,
        &origin,
    )?;
    write_outputs(&outcome, &origin)?;
    Ok(outcome)
}

fn write_outputs(outcome: &Outcome, origin: &str) -> Result<(), ConfigError> {
    let out = &outcome.report.config.output;
    let write = |p: &PathBuf, text: &str, key: &str| {
        std::fs::write(p, text).map_err(|e| {
            ConfigError::new(
                format!("{origin}: [output].{key}"),
                format!("{}: {e}", p.display()),
            )
        })
    };
    if let Some(p) = &out.report {
        write(p, &outcome.report.to_json(), "report")?;
    }
    if let (Some(p), Some(csv)) = (&out.csv, &outcome.csv) {
        write(p, csv, "csv")?;
    }
    Ok(())
}

/// Runs a resolved config. `origin` names the config in error locations.
pub fn execute(
    config: RunConfig,
    command: Command,
    registry: &MetricRegistry,
    origin: &str,
) -> Result<Outcome, ConfigError> {
    let dim = config.dim();
    let fs = registry.build(&config.metric, dim, origin)?;
    let chart = Chart::new(config.chart.lower.clone(), config.chart.upper.clone())
        .map_err(|e| ConfigError::new(format!("{origin}: [chart]"), e.to_string()))?;
    let a = &config.analysis;
    if a.assert == Some(Assertion::Rigidity) && a.curves == 0 {
        return Err(ConfigError::new(
            format!("{origin}: [analysis].curves"),
            "the rigidity assertion needs curves > 0",
        ));
    }
    let needs_curves = a
        .run
        .iter()
        .any(|r| matches!(r, Analysis::Transport | Analysis::Classify));
    let curves = if needs_curves && a.curves > 0 {
        random_loops(&chart, a.curves, a.loop_side, config.numeric.seed).map_err(|e| {
            ConfigError::new(format!("{origin}: [analysis].loop_side"), e.to_string())
        })?
    } else {
        Vec::new()
    };
    let sampling = Sampling::random(&chart, a.points, a.directions, config.numeric.seed);
    let directions = sphere_directions::<f64>(dim, a.directions);

    let mut ctx = Context {
        fs: &fs,
        config: &config,
        chart,
        sampling,
        directions,
        curves,
        verdicts: BTreeMap::new(),
        residuals: Vec::new(),
        notes: Vec::new(),
        timings: Timings::default(),
        csv: None,
    };
    let mut analyses = BTreeMap::new();
    let mut error = None;
    for &which in &config.analysis.run {
        let result = match which {
            Analysis::Tensors => ctx.tensors(),
            Analysis::Connections => ctx.connections(),
            Analysis::Geodesic => ctx.geodesic(),
            Analysis::Transport => ctx.transport(),
            Analysis::Average => ctx.average(),
            Analysis::Classify => ctx.classify(),
            Analysis::Holonomy => ctx.holonomy(),
        };
        match result {
            Ok(v) => {
                analyses.insert(which.name().to_string(), v);
            }
            Err(e) => {
                error = Some(ErrorEntry::from_numeric(which.name(), &e));
                break;
            }
        }
    }

    let (exit_code, message) = match (&error, config.analysis.assert) {
        (Some(e), _) => (
            EXIT_ERROR,
            Some(format!("{} failed: {}", e.analysis, e.message)),
        ),
        (None, Some(assertion)) => {
            let (key, expected) = assertion.expectation();
            match ctx.verdicts.get(key) {
                Some(v) if v.label() == expected => (EXIT_OK, None),
                Some(v) => (
                    EXIT_ASSERTION,
                    Some(format!(
                        "assertion failed: {key} = {} (expected {expected})",
                        v.label()
                    )),
                ),
                None => (
                    EXIT_ASSERTION,
                    Some(format!("assertion failed: no {key} verdict")),
                ),
            }
        }
        (None, None) => (EXIT_OK, None),
    };

    let samples = Samples {
        seed: config.numeric.seed,
        points: ctx.sampling.points.clone(),
        directions: ctx.directions.clone(),
        curves: ctx.curves.clone(),
    };
    let csv = ctx
        .csv
        .take()
        .map(|w| String::from_utf8(w.into_inner().expect("in-memory CSV")).expect("CSV is UTF-8"));
    let Context {
        verdicts,
        mut residuals,
        notes,
        timings,
        ..
    } = ctx;
    residuals.sort_by(|a, b| a.name.cmp(&b.name));
    let report = Report {
        schema_version: SCHEMA_VERSION,
        command: command.name().into(),
        metric: MetricSummary {
            label: fs.label().into(),
            family: fs.family().tag().into(),
            dim,
            expression: fs.expression().source().into(),
        },
        config,
        verdicts,
        residuals,
        samples,
        analyses,
        notes,
        timings,
        error,
    };
    Ok(Outcome {
        report,
        csv,
        exit_code,
        message,
    })
}

type NumResult<T> = Result<T, FinslerError>;

struct Context<'a> {
    fs: &'a FinslerStructure,
    config: &'a RunConfig,
    chart: Chart,
    sampling: Sampling,
    directions: Vec<Vec<f64>>,
    curves: Vec<CurveSpec>,
    verdicts: BTreeMap<String, VerdictEntry>,
    residuals: Vec<Residual>,
    notes: Vec<String>,
    timings: Timings,
    csv: Option<csv::Writer<Vec<u8>>>,
}

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

impl Context<'_> {
    fn seed(&self) -> u64 {
        self.config.numeric.seed
    }

    fn pairs(&self) -> usize {
        self.sampling.points.len() * self.directions.len()
    }

    fn residual(&mut self, name: &str, value: f64, tolerance: f64, samples: usize) {
        self.residuals.push(Residual {
            name: name.into(),
            value,
            tolerance,
            samples,
            seed: self.seed(),
        });
    }

    fn transport_options(&self) -> TransportOptions {
        TransportOptions {
            ode: OdeOptions {
                rtol: self.config.numeric.ode_rtol,
                atol: self.config.numeric.ode_atol,
                ..OdeOptions::default()
            },
            chart: Some(self.chart.clone()),
        }
    }

    fn scheme(&self) -> NumResult<QuadratureScheme> {
        let n = self.config.numeric.quadrature_n;
        match self.fs.dim() {
            2 => Ok(QuadratureScheme::Trapezoid2d { n }),
            3 => Ok(QuadratureScheme::Latlong3d {
                n_theta: (n / 4).max(4),
                n_phi: n / 2,
            }),
            d => Err(FinslerError::UnsupportedDimension(d)),
        }
    }

    fn csv_writer(&mut self) -> &mut csv::Writer<Vec<u8>> {
        let n = self.fs.dim();
        self.csv.get_or_insert_with(|| {
            let mut w = csv::Writer::from_writer(Vec::new());
            let mut header = vec!["point".to_string(), "direction".to_string()];
            header.extend((1..=n).map(|i| format!("x{i}")));
            header.extend((1..=n).map(|i| format!("y{i}")));
            header.extend(["tensor", "i", "j", "k", "value"].map(String::from));
            w.write_record(&header).expect("in-memory CSV");
            w
        })
    }

    fn csv_rows(
        &mut self,
        (p, d): (usize, usize),
        x: &[f64],
        y: &[f64],
        tensor: &str,
        rank: usize,
        values: &[f64],
    ) {
        let n = x.len();
        let w = self.csv_writer();
        for (flat, v) in values.iter().enumerate() {
            let mut rec = vec![p.to_string(), d.to_string()];
            rec.extend(x.iter().chain(y).map(|c| fmt(*c)));
            rec.push(tensor.into());
            let idx = if rank == 2 {
                [
                    (flat / n).to_string(),
                    (flat % n).to_string(),
                    String::new(),
                ]
            } else {
                [
                    (flat / (n * n)).to_string(),
                    ((flat / n) % n).to_string(),
                    (flat % n).to_string(),
                ]
            };
            rec.extend(idx);
            rec.push(fmt(*v));
            w.write_record(&rec).expect("in-memory CSV");
        }
    }

    fn tensors(&mut self) -> NumResult<Value> {
        let fs = self.fs;
        let mut per_point = Vec::new();
        let (mut inv, mut euler, mut sym, mut a_euler) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
        let (mut cond, mut a_mag) = (0.0f64, 0.0f64);
        let points = self.sampling.points.clone();
        let dirs = self.directions.clone();
        for (p, x) in points.iter().enumerate() {
            let scan = convexity_scan(fs, x, dirs.len().max(4))?;
            for (d, y) in dirs.iter().enumerate() {
                let g = fundamental_tensor::<f64>(fs, x, y)?;
                let c = cartan_tensor::<f64>(fs, x, y)?;
                let f = fs.value(x, y)?;
                inv = inv.max(g.inverse_residual());
                cond = cond.max(g.g.max_abs() * g.g_inv.max_abs());
                euler = euler.max((g.norm_squared() - f * f).abs() / (f * f).max(1.0));
                sym = sym.max(c.symmetry_defect());
                a_euler = a_euler.max(c.euler_residual());
                a_mag = a_mag.max(c.a.max_abs());
                self.csv_rows((p, d), x, y, "g", 2, g.g.as_slice());
                self.csv_rows((p, d), x, y, "g_inv", 2, g.g_inv.as_slice());
                self.csv_rows((p, d), x, y, "cartan", 3, c.a.as_slice());
            }
            per_point.push(json!({
                "x": x,
                "min_eigenvalue": scan.min_eigenvalue,
                "worst_direction": scan.worst_direction,
            }));
        }
        let hom = finsler::expr::check_homogeneity_in(
            fs.expression(),
            &self.chart,
            16,
            1e-9,
            self.seed(),
        )?;
        let pairs = self.pairs();
        self.timings.fiber_evaluations += pairs;
        self.residual(
            "fundamental_inverse",
            inv,
            effective_tolerance(1e-10, cond),
            pairs,
        );
        self.residual("euler_identity", euler, 1e-9, pairs);
        self.residual(
            "cartan_symmetry",
            sym,
            effective_tolerance(1e-10, a_mag),
            pairs,
        );
        self.residual(
            "cartan_euler",
            a_euler,
            effective_tolerance(1e-9, a_mag),
            pairs,
        );
        self.residual("homogeneity", hom.max_residual, 1e-9, hom.samples);
        Ok(json!({
            "points": per_point,
            "homogeneity": hom,
            "max_inverse_residual": inv,
            "max_euler_residual": euler,
            "max_cartan_symmetry_defect": sym,
            "max_cartan_euler_residual": a_euler,
        }))
    }

    fn connections(&mut self) -> NumResult<Value> {
        let fs = self.fs;
        let points = self.sampling.points.clone();
        let dirs = self.directions.clone();
        let (mut torsion, mut gap, mut landsberg, mut difference) =
            (0.0f64, 0.0f64, 0.0f64, 0.0f64);
        let (mut chern_mag, mut n_mag) = (0.0f64, 0.0f64);
        let mut compat = BTreeMap::<String, f64>::new();
        let mut first = Value::Null;
        for (p, x) in points.iter().enumerate() {
            for (d, y) in dirs.iter().enumerate() {
                let chern = chern_coefficients::<f64>(fs, x, y)?;
                let berwald = berwald_coefficients::<f64>(fs, x, y)?;
                let nc = nonlinear_connection::<f64>(fs, x, y, NonlinearVariant::CartanCorrected)?;
                let ns = nonlinear_connection::<f64>(fs, x, y, NonlinearVariant::SprayDerivative)?;
                torsion = torsion.max(chern.torsion_residual());
                chern_mag = chern_mag.max(chern.gamma.max_abs());
                n_mag = n_mag.max(nc.n.max_abs());
                gap = gap.max(nc.n.sub(&ns.n).max_abs());
                difference = difference.max(berwald.gamma.sub(&chern.gamma).max_abs());
                landsberg = landsberg.max(landsberg_tensor::<f64>(fs, x, y)?.max_abs());
                for (k, v) in &chern.diagnostics {
                    let e = compat.entry(k.clone()).or_insert(0.0);
                    *e = e.max(*v);
                }
                self.csv_rows((p, d), x, y, "chern", 3, chern.gamma.as_slice());
                self.csv_rows((p, d), x, y, "berwald", 3, berwald.gamma.as_slice());
                if first.is_null() {
                    first = json!({
                        "x": x,
                        "y": y,
                        "spray": spray::<f64>(fs, x, y)?,
                        "nonlinear": nc.n.to_rows(),
                        "chern": chern.gamma.to_nested(),
                        "berwald": berwald.gamma.to_nested(),
                    });
                }
            }
        }
        let pairs = self.pairs();
        self.timings.fiber_evaluations += pairs;
        self.residual(
            "chern_torsion",
            torsion,
            effective_tolerance(1e-10, chern_mag),
            pairs,
        );
        self.residual(
            "nonlinear_variant_gap",
            gap,
            effective_tolerance(1e-7, n_mag),
            pairs,
        );
        Ok(json!({
            "first_sample": first,
            "max_chern": chern_mag,
            "max_berwald_minus_chern": difference,
            "max_landsberg": landsberg,
            "chern_diagnostics": compat,
        }))
    }

    fn geodesic(&mut self) -> NumResult<Value> {
        let (x0, y0, length) = match &self.config.analysis.geodesic {
            Some(g) => (g.x0.clone(), g.y0.clone(), g.length),
            None => {
                let width = self
                    .chart
                    .lower
                    .iter()
                    .zip(&self.chart.upper)
                    .map(|(l, u)| u - l)
                    .fold(f64::INFINITY, f64::min);
                let mut e1 = vec![0.0; self.fs.dim()];
                e1[0] = 1.0;
                (self.config.chart_center(), e1, 0.25 * width)
            }
        };
        let opts = self.transport_options();
        let sol = integrate_geodesic::<f64>(self.fs, &x0, &y0, length, &opts)?;
        let steps = sol.result.ode_stats.steps;
        self.timings.ode_steps += steps;
        self.timings.curves_transported += 1;
        self.residual(
            "geodesic_f_drift",
            sol.result.f_drift,
            10.0 * opts.ode.rtol,
            sol.samples.len(),
        );
        Ok(json!({
            "x0": x0,
            "y0": y0,
            "length": length,
            "end_point": sol.result.end_point,
            "end_velocity": sol.result.direction,
            "f_drift": sol.result.f_drift,
            "ode": sol.result.ode_stats,
            "samples": sol.samples,
        }))
    }

    fn transport(&mut self) -> NumResult<Value> {
        let fs = self.fs;
        let n = fs.dim();
        let opts = self.transport_options();
        let basis: Vec<Vec<f64>> = (0..n)
            .map(|j| (0..n).map(|i| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        let mut per_curve = Vec::new();
        let mut worst = 0.0f64;
        for (k, curve) in self.curves.clone().iter().enumerate() {
            let x0 = curve.start();
            let u = &self.directions[k % self.directions.len().max(1)];
            let f = fs.value(&x0, u)?;
            let y0: Vec<f64> = u.iter().map(|c| c / f).collect();
            let res =
                horizontal_transport::<f64>(fs, TransportKind::Chern, curve, &y0, &basis, &opts)?;
            self.timings.ode_steps += res.ode_stats.steps;
            self.timings.curves_transported += 1;
            worst = worst.max(res.f_drift);
            per_curve.push(json!({
                "y0": y0,
                "end_direction": res.direction,
                "matrix": res.vectors.to_rows(),
                "f_drift": res.f_drift,
                "ode": res.ode_stats,
            }));
        }
        self.residual(
            "transport_f_drift",
            worst,
            10.0 * opts.ode.rtol,
            self.curves.len(),
        );
        Ok(json!({ "connection": "chern", "curves": per_curve }))
    }

    fn average(&mut self) -> NumResult<Value> {
        let scheme = self.scheme()?;
        let fs = self.fs;
        let mut per_point = Vec::new();
        let (mut torsion, mut quad, mut mag) = (0.0f64, 0.0f64, 0.0f64);
        for x in self.sampling.points.clone() {
            let h = averaged_metric::<f64>(fs, &x, &scheme)?;
            let c = averaged_connection::<f64>(fs, &x, finsler::ConnectionKind::Chern, &scheme)?;
            self.timings.quadrature_nodes +=
                2 * (scheme.node_count() + scheme.refined().node_count());
            let t = c.coefficients.torsion_residual();
            torsion = torsion.max(t);
            quad = quad.max(c.error_estimate);
            mag = mag.max(c.coefficients.gamma.max_abs());
            per_point.push(json!({
                "x": x,
                "h": h.h.to_rows(),
                "h_min_eigenvalue": h.h.min_eigenvalue(),
                "volume": h.volume,
                "h_error_estimate": h.error_estimate,
                "connection": c.coefficients.gamma.to_nested(),
                "torsion": t,
                "quadrature_error": c.error_estimate,
            }));
        }
        let pts = self.sampling.points.len();
        self.residual(
            "average_torsion",
            torsion,
            effective_tolerance(1e-10, mag),
            pts,
        );
        self.residual(
            "average_quadrature_error",
            quad,
            effective_tolerance(self.config.numeric.tol, mag),
            pts,
        );
        Ok(json!({ "scheme": scheme, "points": per_point }))
    }

    fn classify(&mut self) -> NumResult<Value> {
        let scheme = self.scheme()?;
        let cfg = self.config;
        let opts = ClassifyOptions {
            sampling: self.sampling.clone(),
            tol: cfg.numeric.tol,
            scheme,
            curves: self.curves.clone(),
            indicatrix_samples: cfg.numeric.indicatrix_samples,
            transport: self.transport_options(),
            holonomy: None,
        };
        let report = classify_structure(self.fs, &opts)?;
        self.timings.fiber_evaluations += self.pairs();
        self.timings.quadrature_nodes +=
            self.sampling.points.len() * (scheme.node_count() + scheme.refined().node_count());
        self.timings.curves_transported += self.curves.len();
        for (key, value) in &report.verdicts {
            let decisive = decisive_residual(key, *value, &report.residuals);
            if let Some(r) = decisive {
                self.verdicts
                    .insert(key.clone(), VerdictEntry::new(*value, r));
            }
        }
        self.residuals.extend(report.residuals.iter().cloned());
        self.notes.extend(report.notes.iter().cloned());

        let mut out = json!({ "sampling": report.sampling });
        if !self.curves.is_empty() && !cfg.analysis.t_grid.is_empty() {
            let h = averaged_metric_field(self.fs, &scheme);
            let table = interpolated_indicatrix_test(
                self.fs,
                &h,
                &cfg.analysis.t_grid,
                &self.curves,
                cfg.numeric.indicatrix_samples,
                cfg.numeric.tol,
                &opts.transport,
            )?;
            self.timings.curves_transported += self.curves.len();
            out["interpolation"] = serde_json::to_value(&table).expect("table serializes");
        }
        Ok(out)
    }

    fn holonomy(&mut self) -> NumResult<Value> {
        let scheme = self.scheme()?;
        let cfg = &self.config.analysis.holonomy;
        let x = cfg.x.clone().unwrap_or_else(|| self.config.chart_center());
        let sample = holonomy_sample(
            self.fs,
            &x,
            &cfg.loop_sizes,
            cfg.loop_count,
            &scheme,
            &self.transport_options(),
        )?;
        let class = holonomy_classify(&sample, self.config.numeric.tol)?;
        self.timings.curves_transported += sample.loops.len();
        let seed = self.seed();
        let residuals: Vec<Residual> = class
            .residuals
            .iter()
            .cloned()
            .map(|mut r| {
                r.seed = seed;
                r
            })
            .collect();
        let value = VerdictValue::Class(class.class);
        if let Some(r) = decisive_residual("holonomy_class", value, &residuals) {
            self.verdicts
                .insert("holonomy_class".into(), VerdictEntry::new(value, r));
        }
        self.residuals.extend(residuals);
        self.notes.extend(class.notes.iter().cloned());
        Ok(json!({
            "x": x,
            "class": class.class,
            "loops": sample.loops,
            "matrices": sample.matrices.iter().map(|m| m.to_rows()).collect::<Vec<_>>(),
            "determinants": sample.determinants,
            "areas": sample.areas,
            "invariant_form": class.invariant_form.map(|m| m.to_rows()),
        }))
    }
}

/// The residual a verdict rests on: the one closest to its tolerance band
/// for yes/no tests, the defining residual of the chosen holonomy class.
fn decisive_residual<'r>(
    key: &str,
    value: VerdictValue,
    residuals: &'r [Residual],
) -> Option<&'r Residual> {
    let find = |name: &str| residuals.iter().find(|r| r.name == name);
    match (key, value) {
        ("is_berwald", _) => residuals
            .iter()
            .filter(|r| r.name.starts_with("berwald_"))
            .max_by(|a, b| (a.value / a.tolerance).total_cmp(&(b.value / b.tolerance))),
        ("is_landsberg", _) => find("landsberg"),
        ("rigidity_holds", _) => find("rigidity_max_drift"),
        ("holonomy_class", VerdictValue::Class(c)) => find(match c {
            HolonomyClass::Trivial => "identity_deviation",
            HolonomyClass::MetricPreserving => "invariant_form_fit",
            HolonomyClass::SpecialLinear | HolonomyClass::GeneralLinear => "determinant_deviation",
        }),
        _ => None,
    }
}
