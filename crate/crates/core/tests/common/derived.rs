//! Worked examples whose expected values come from an oracle rather than a
//! closed form. Each function recomputes the value with the library and with
//! its oracle and returns the comparisons as [`Check`]s, so the per-module
//! tests and the acceptance runner share one definition.

use finsler::averaging::{
    averaged_connection, averaged_metric, sample_indicatrix, AveragedConnectionField,
    QuadratureScheme,
};
use finsler::classify::{
    averaged_metric_field, berwald_test, holonomy_classify, holonomy_sample,
    interpolated_indicatrix_test, landsberg_test, rigidity_test, HolonomyClass, HolonomySample,
    Sampling, Verdict,
};
use finsler::fields::ChernField;
use finsler::linalg::Matrix;
use finsler::presets;
use finsler::transport::{
    horizontal_transport, integrate_geodesic, transport, transport_indicatrix_sample,
    transport_matrix, CurveSpec, TransportKind, TransportOptions,
};
use finsler::{
    berwald_coefficients, cartan_tensor, check_homogeneity, chern_coefficients, convexity_scan,
    difference_tensor, eval_jet, formal_christoffel, fundamental_tensor, nonlinear_connection,
    FinslerStructure, NonlinearVariant,
};
use nalgebra::DMatrix;
use serde_json::Value;

use super::*;

#[derive(Debug, Clone)]
pub struct Check {
    pub id: &'static str,
    pub detail: String,
    pub value: f64,
    pub limit: f64,
    /// The value must exceed `limit` instead of staying at or below it.
    pub above: bool,
}

impl Check {
    pub fn at_most(id: &'static str, detail: impl Into<String>, value: f64, limit: f64) -> Self {
        Self {
            id,
            detail: detail.into(),
            value,
            limit,
            above: false,
        }
    }

    pub fn exceeds(id: &'static str, detail: impl Into<String>, value: f64, limit: f64) -> Self {
        Self {
            id,
            detail: detail.into(),
            value,
            limit,
            above: true,
        }
    }

    pub fn holds(id: &'static str, detail: impl Into<String>, ok: bool) -> Self {
        Self::at_most(id, detail, if ok { 0.0 } else { 1.0 }, 0.5)
    }

    pub fn pass(&self) -> bool {
        if self.above {
            self.value > self.limit
        } else {
            self.value <= self.limit
        }
    }

    pub fn line(&self) -> String {
        format!(
            "{} {}: {} = {:.3e} ({} {:.1e})",
            if self.pass() { "ok  " } else { "FAIL" },
            self.id,
            self.detail,
            self.value,
            if self.above { ">" } else { "<=" },
            self.limit
        )
    }
}

pub fn assert_all(checks: &[Check]) {
    let failed: Vec<String> = checks
        .iter()
        .filter(|c| !c.pass())
        .map(Check::line)
        .collect();
    assert!(failed.is_empty(), "{}", failed.join("\n"));
}

fn fixture() -> Value {
    serde_json::from_str(include_str!("../fixtures/nonberwald.json")).expect("fixture parses")
}

fn fixture_f64(key: &str) -> f64 {
    fixture()[key]
        .as_f64()
        .unwrap_or_else(|| panic!("fixture key {key}"))
}

fn relative(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

fn randers_half() -> FinslerStructure {
    presets::randers_constant(0.5).unwrap()
}

fn flat(t: &finsler::Tensor64) -> Vec<f64> {
    t.as_slice().to_vec()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(u, v)| (u - v).abs())
        .fold(0.0, f64::max)
}

fn dmat(m: &Matrix<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(m.rows(), m.cols(), |i, j| m[(i, j)])
}

fn opts() -> TransportOptions {
    TransportOptions::default()
}

pub fn default_scheme() -> QuadratureScheme {
    QuadratureScheme::default_for(2).unwrap()
}

/// Every partial of the Randers jet against finite differences of `F`.
pub fn expr_jet_vs_fd() -> Vec<Check> {
    let fs = randers_half();
    let jet = eval_jet::<f64>(fs.expression(), &[0.0, 0.0], &[1.0, 0.0], 4).unwrap();
    let f = f_of(&fs);
    let z = [0.0, 0.0, 1.0, 0.0];
    let worst = jet
        .partials
        .iter()
        .map(|(k, v)| (v - fd_partial(&f, &z, k, FD_STEP)).abs())
        .fold(0.0, f64::max);
    vec![Check::at_most(
        "expr.jet_fd",
        format!(
            "Randers b=0.5 4-jet, {} partials vs finite differences",
            jet.partials.len()
        ),
        worst,
        1e-6,
    )]
}

pub fn expr_homogeneity() -> Vec<Check> {
    let fs = randers_half();
    let report = check_homogeneity(fs.expression(), 200, 1e-12).unwrap();
    let mut r = rng(7);
    let mut direct = 0.0f64;
    for _ in 0..200 {
        let x = [r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)];
        let y = random_direction(&mut r);
        let l = 10f64.powf(r.gen_range(-1.0..1.0));
        let f = fs.value(&x, &y).unwrap();
        let fl = fs.value(&x, &[l * y[0], l * y[1]]).unwrap();
        direct = direct.max((fl - l * f).abs() / (1.0 + (l * f).abs()));
    }
    vec![
        Check::at_most(
            "expr.homogeneity",
            "Randers b=0.5 homogeneity residual",
            report.max_residual,
            1e-12,
        ),
        Check::at_most(
            "expr.homogeneity_direct",
            "direct evaluation residual",
            direct,
            1e-12,
        ),
    ]
}

pub fn core_fundamental_vs_fd() -> Vec<Check> {
    let fs = randers_half();
    let (x, y) = ([0.0, 0.0], [1.0, 0.0]);
    let g = fundamental_tensor::<f64>(&fs, &x, &y).unwrap().g;
    let oracle = fd_fundamental(&fs, &x, &y);
    vec![Check::at_most(
        "core.fundamental_fd",
        "Randers b=0.5 g at y=(1,0) vs Hessian of F²",
        (dmat(&g) - oracle).amax(),
        1e-6,
    )]
}

pub fn core_cartan_vs_fd() -> Vec<Check> {
    let fs = randers_half();
    let (x, y) = ([0.0, 0.0], [0.6, 0.8]);
    let a = cartan_tensor::<f64>(&fs, &x, &y).unwrap();
    vec![Check::at_most(
        "core.cartan_fd",
        "Randers b=0.5 A at y=(0.6,0.8) vs third differences of F²",
        max_diff(&flat(&a.a), &fd_cartan(&fs, &x, &y)),
        1e-5,
    )]
}

/// Near-degenerate Randers metric: the scan's minimum eigenvalue against a
/// dense sweep of finite-difference Hessians.
pub fn core_convexity_sweep() -> Vec<Check> {
    let fs = presets::randers_constant(0.999).unwrap();
    let x = [0.0, 0.0];
    let scan = convexity_scan(&fs, &x, 720).unwrap();
    let sweep = (0..3600)
        .map(|k| {
            let t = std::f64::consts::TAU * k as f64 / 3600.0;
            let g = quick_fundamental(&fs, &x, &[t.cos(), t.sin()]);
            g.symmetric_eigen().eigenvalues.min()
        })
        .fold(f64::INFINITY, f64::min);
    vec![
        Check::exceeds(
            "core.convexity_positive",
            "b=0.999 scan minimum eigenvalue",
            scan.min_eigenvalue,
            0.0,
        ),
        Check::at_most(
            "core.convexity_small",
            "b=0.999 scan minimum eigenvalue",
            scan.min_eigenvalue,
            0.1,
        ),
        Check::at_most(
            "core.convexity_sweep",
            "sweep oracle minimum eigenvalue",
            sweep,
            0.1,
        ),
        Check::at_most(
            "core.convexity_agree",
            "relative gap between scan and sweep minima",
            relative(scan.min_eigenvalue, sweep),
            1e-2,
        ),
    ]
}

pub fn connections_christoffel_vs_fd() -> Vec<Check> {
    let fs = presets::hyperbolic();
    let chart = chart_for("hyperbolic");
    let mut r = rng(11);
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let x = random_point(&mut r, &chart);
        let y = random_direction(&mut r);
        let s = formal_christoffel::<f64>(&fs, &x, &y).unwrap();
        worst = worst.max(max_diff(
            &flat(&s.gamma),
            &fd_levi_civita(&hyperbolic_metric, &x),
        ));
    }
    vec![Check::at_most(
        "connections.christoffel_fd",
        "hyperbolic γ vs finite-difference Christoffel symbols, 10 points",
        worst,
        1e-6,
    )]
}

pub fn connections_nonlinear_variants() -> Vec<Check> {
    let fs = presets::nonberwald_randers();
    let (x, y) = ([0.0, 1.0], [1.0, 0.0]);
    let a = nonlinear_connection::<f64>(&fs, &x, &y, NonlinearVariant::CartanCorrected).unwrap();
    let b = nonlinear_connection::<f64>(&fs, &x, &y, NonlinearVariant::SprayDerivative).unwrap();
    let oracle = F2Partials::new(&fs, &x, &y).nonlinear();
    vec![
        Check::at_most(
            "connections.nonlinear_agree",
            "Cartan-corrected vs spray-derivative N at x=(0,1), y=(1,0)",
            a.n.sub(&b.n).max_abs(),
            1e-7,
        ),
        Check::at_most(
            "connections.nonlinear_fd",
            "N vs finite-difference spray derivative",
            (dmat(&a.n) - oracle).amax(),
            1e-6,
        ),
    ]
}

pub fn connections_chern_structure() -> Vec<Check> {
    let fs = presets::nonberwald_randers();
    let chart = chart_for("nonberwald-randers");
    let mut r = rng(13);
    let (mut h, mut v, mut sym) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..20 {
        let x = random_point(&mut r, &chart);
        let y = random_direction(&mut r);
        let c = chern_coefficients::<f64>(&fs, &x, &y).unwrap();
        let a = cartan_tensor::<f64>(&fs, &x, &y).unwrap();
        let (rh, rv) = chern_structure_residuals(&fs, &x, &y, &flat(&c.gamma), &flat(&a.a));
        h = h.max(rh);
        v = v.max(rv);
        sym = sym.max(c.torsion_residual());
    }
    vec![
        Check::at_most(
            "connections.chern_torsion",
            "non-Berwald Randers Chern torsion, 20 points",
            sym,
            1e-10,
        ),
        Check::at_most(
            "connections.chern_horizontal",
            "horizontal compatibility residual",
            h,
            1e-6,
        ),
        Check::at_most(
            "connections.chern_vertical",
            "vertical compatibility residual",
            v,
            1e-6,
        ),
    ]
}

pub fn connections_berwald_sweep() -> Vec<Check> {
    let fs = presets::nonberwald_randers();
    let x = [0.0, 1.0];
    let gammas: Vec<Vec<f64>> = (0..16)
        .map(|k| {
            let t = std::f64::consts::TAU * k as f64 / 16.0;
            flat(
                &berwald_coefficients::<f64>(&fs, &x, &[t.cos(), t.sin()])
                    .unwrap()
                    .gamma,
            )
        })
        .collect();
    let mut spread = 0.0f64;
    for a in &gammas {
        for b in &gammas {
            spread = spread.max(max_diff(a, b));
        }
    }
    vec![Check::exceeds(
        "connections.berwald_sweep",
        "non-Berwald Randers Berwald Γ spread over 16 directions at x=(0,1)",
        spread,
        1e-3,
    )]
}

pub fn connections_difference_symmetrization() -> Vec<Check> {
    let fs = presets::nonberwald_randers();
    let (x, y) = ([0.2, 0.9], [0.6, 0.8]);
    let c = chern_coefficients::<f64>(&fs, &x, &y).unwrap();
    let b = berwald_coefficients::<f64>(&fs, &x, &y).unwrap();
    let d = difference_tensor(&c, &b).unwrap();
    let raw: Vec<f64> = flat(&c.gamma)
        .iter()
        .zip(flat(&b.gamma))
        .map(|(p, q)| p - q)
        .collect();
    let mut s = vec![0.0; 8];
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                s[(i * 2 + j) * 2 + k] =
                    0.5 * (raw[(i * 2 + j) * 2 + k] + raw[(i * 2 + k) * 2 + j]);
            }
        }
    }
    vec![
        Check::at_most(
            "connections.difference_symmetric",
            "S vs elementwise symmetrisation",
            max_diff(&flat(&d.s), &s),
            1e-14,
        ),
        Check::exceeds(
            "connections.difference_nonzero",
            "max |S| Chern vs Berwald",
            d.s.max_abs(),
            1e-6,
        ),
    ]
}

pub fn transport_hyperbolic_semicircle() -> Vec<Check> {
    let fs = presets::hyperbolic();
    let sol = integrate_geodesic::<f64>(&fs, &[0.0, 1.0], &[1.0, 0.0], 2.0, &opts()).unwrap();
    let worst = sol
        .samples
        .iter()
        .map(|s| (s.x[0] * s.x[0] + s.x[1] * s.x[1] - 1.0).abs())
        .fold(0.0, f64::max);
    vec![
        Check::at_most(
            "transport.semicircle",
            "hyperbolic geodesic |x|² - 1",
            worst,
            1e-6,
        ),
        Check::at_most(
            "transport.geodesic_speed",
            "unit-speed drift",
            sol.result.f_drift,
            1e-8,
        ),
    ]
}

fn fine_steps(stats_steps: usize, edges: usize) -> usize {
    (10 * stats_steps).div_ceil(edges).max(50)
}

pub fn transport_hyperbolic_loop() -> Vec<Check> {
    let fs = presets::hyperbolic();
    let curve = CurveSpec::LoopRectangle {
        corner: vec![0.0, 1.0],
        a: 0.5,
        b: 0.5,
        plane: (0, 1),
    };
    let y0 = [1.0, 0.0];
    let sections = vec![vec![1.0, 0.0], vec![0.3, 0.7]];
    let res =
        horizontal_transport::<f64>(&fs, TransportKind::Chern, &curve, &y0, &sections, &opts())
            .unwrap();
    let g = hyperbolic_metric(&[0.0, 1.0]);
    let mut norm_dev = 0.0f64;
    for (c, s) in sections.iter().enumerate() {
        let e = res.vectors.column(c);
        let n0 = g[(0, 0)] * s[0] * s[0] + g[(1, 1)] * s[1] * s[1];
        let n1 = g[(0, 0)] * e[0] * e[0] + g[(1, 1)] * e[1] * e[1];
        norm_dev = norm_dev.max((n1 - n0).abs());
    }
    let rotation = (res.vectors.column(0)[1]).abs();
    let field = ChernField {
        structure: fs.clone(),
    };
    let steps = fine_steps(res.ode_stats.steps, 4);
    let (_, fine) = rk4_polygon_transport(
        &field,
        &rectangle_path(&[0.0, 1.0], 0.5, 0.5, (0, 1)),
        Some(&y0),
        &sections,
        steps,
    );
    let rk_dev = (0..2)
        .map(|c| max_diff(&res.vectors.column(c), &fine[c]))
        .fold(0.0, f64::max);
    vec![
        Check::at_most(
            "transport.loop_gnorm",
            "hyperbolic loop g-norm change",
            norm_dev,
            1e-7,
        ),
        Check::exceeds(
            "transport.loop_rotation",
            "hyperbolic loop rotation component",
            rotation,
            1e-3,
        ),
        Check::at_most(
            "transport.loop_rk4",
            "adaptive vs fine fixed-step transport",
            rk_dev,
            1e-7,
        ),
    ]
}

pub fn transport_nonberwald_chern() -> Vec<Check> {
    let fs = presets::nonberwald_randers();
    let curves = [
        CurveSpec::LoopRectangle {
            corner: vec![0.0, 1.0],
            a: 0.5,
            b: -0.4,
            plane: (0, 1),
        },
        CurveSpec::CoordinatePath {
            waypoints: vec![vec![-0.5, 0.8], vec![0.1, 1.2], vec![0.6, 0.9]],
            interpolation: finsler::transport::Interpolation::Cubic,
        },
    ];
    let mut drift = 0.0f64;
    let mut rk_dev = 0.0f64;
    for (k, c) in curves.iter().enumerate() {
        let u = [0.6, -0.8];
        let f = fs.value(&c.start(), &u).unwrap();
        let y0 = [u[0] / f, u[1] / f];
        let res =
            horizontal_transport::<f64>(&fs, TransportKind::Chern, c, &y0, &[], &opts()).unwrap();
        drift = drift.max(res.f_drift);
        if k == 0 {
            let CurveSpec::LoopRectangle {
                corner,
                a,
                b,
                plane,
            } = c
            else {
                unreachable!()
            };
            let field = ChernField {
                structure: fs.clone(),
            };
            let steps = fine_steps(res.ode_stats.steps, 4);
            let (dir, _) = rk4_polygon_transport(
                &field,
                &rectangle_path(corner, *a, *b, *plane),
                Some(&y0),
                &[],
                steps,
            );
            rk_dev = max_diff(res.direction.as_ref().unwrap(), &dir.unwrap());
        }
    }
    vec![
        Check::at_most(
            "transport.chern_invariance",
            "non-Berwald Chern transport F drift",
            drift,
            1e-6,
        ),
        Check::at_most(
            "transport.chern_rk4",
            "adaptive vs fine fixed-step lift",
            rk_dev,
            1e-7,
        ),
    ]
}

pub fn transport_averaged_indicatrix() -> Vec<Check> {
    let scheme = default_scheme();
    let loop_at = |corner: Vec<f64>, b: f64| CurveSpec::LoopRectangle {
        corner,
        a: 0.5,
        b,
        plane: (0, 1),
    };
    let berwald = presets::berwald_randers();
    let field = AveragedConnectionField {
        structure: berwald.clone(),
        source: finsler::ConnectionKind::Chern,
        scheme,
    };
    let d_b = transport_indicatrix_sample::<f64, _>(
        &berwald,
        &field,
        &loop_at(vec![0.0, 0.0], 0.5),
        32,
        &opts(),
    )
    .unwrap();

    let nb = presets::nonberwald_randers();
    let field = AveragedConnectionField {
        structure: nb.clone(),
        source: finsler::ConnectionKind::Chern,
        scheme,
    };
    let curve = loop_at(vec![0.0, 1.0], -0.5);
    let d_n = transport_indicatrix_sample::<f64, _>(&nb, &field, &curve, 32, &opts()).unwrap();
    let (p, res) = transport_matrix::<f64, _>(&field, &curve, &opts()).unwrap();
    let CurveSpec::LoopRectangle {
        corner,
        a,
        b,
        plane,
    } = &curve
    else {
        unreachable!()
    };
    let (_, fine) = rk4_polygon_transport(
        &field,
        &rectangle_path(corner, *a, *b, *plane),
        None,
        &[vec![1.0, 0.0], vec![0.0, 1.0]],
        fine_steps(res.ode_stats.steps, 8),
    );
    let rk_dev = (0..2)
        .map(|c| max_diff(&p.column(c), &fine[c]))
        .fold(0.0, f64::max);
    vec![
        Check::at_most(
            "transport.averaged_berwald",
            "Berwald Randers averaged-connection drift",
            d_b.max,
            1e-6,
        ),
        Check::exceeds(
            "transport.averaged_nonberwald",
            "non-Berwald averaged-connection drift, side 0.5",
            d_n.max,
            1e-3,
        ),
        Check::at_most(
            "transport.averaged_fixture",
            "relative change from recorded drift",
            relative(d_n.max, fixture_f64("indicatrix_drift_loop")),
            1e-6,
        ),
        Check::at_most(
            "transport.averaged_rk4",
            "adaptive vs fine fixed-step frame transport",
            rk_dev,
            1e-7,
        ),
    ]
}

pub fn averaging_ellipse_volume() -> Vec<Check> {
    let fs =
        FinslerStructure::riemannian(&[vec!["4".into(), "0".into()], vec!["0".into(), "1".into()]])
            .unwrap();
    let s = sample_indicatrix::<f64>(&fs, &[0.0, 0.0], &default_scheme()).unwrap();
    let g = DMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 1.0]);
    let mc = mc_loop_length(&g, |t| [-t.sin() / 2.0, t.cos()], 1_000_000, 17);
    vec![Check::at_most(
        "averaging.ellipse_volume",
        "indicatrix volume of diag(4,1) vs Monte-Carlo arc length",
        (s.total_volume - mc).abs(),
        1e-3,
    )]
}

pub fn averaging_connection_mc() -> Vec<Check> {
    let fs = presets::nonberwald_randers();
    let x = [0.0, 1.0];
    let avg =
        averaged_connection::<f64>(&fs, &x, finsler::ConnectionKind::Chern, &default_scheme())
            .unwrap();
    let (_, mc) = mc_indicatrix_average(&fs, &x, 100_000, 19, |y| {
        flat(&chern_coefficients::<f64>(&fs, &x, y).unwrap().gamma)
    });
    vec![Check::at_most(
        "averaging.connection_mc",
        "non-Berwald averaged Chern connection at (0,1) vs 1e5-sample Monte-Carlo",
        max_diff(&flat(&avg.coefficients.gamma), &mc),
        1e-3,
    )]
}

pub fn averaging_metric_mc() -> Vec<Check> {
    let fs = randers_half();
    let x = [0.3, -0.2];
    let h = averaged_metric::<f64>(&fs, &x, &default_scheme()).unwrap();
    let (_, mc) = mc_indicatrix_average(&fs, &x, 100_000, 23, |y| {
        quick_fundamental(&fs, &x, y).as_slice().to_vec()
    });
    let hm = dmat(&h.h);
    vec![
        Check::exceeds(
            "averaging.metric_pd",
            "averaged metric smallest eigenvalue",
            hm.clone().symmetric_eigen().eigenvalues.min(),
            0.0,
        ),
        Check::at_most(
            "averaging.metric_mc",
            "Randers b=0.5 averaged metric vs Monte-Carlo",
            (hm - DMatrix::from_column_slice(2, 2, &mc)).amax(),
            1e-3,
        ),
    ]
}

pub fn sampling_for(name: &str, points: usize) -> Sampling {
    Sampling::random(&chart_for(name), points, 16, 42)
}

pub fn classify_nonberwald_tests() -> Vec<Check> {
    let fs = presets::nonberwald_randers();
    let s = sampling_for("nonberwald-randers", 5);
    let b = berwald_test(&fs, &s, 1e-6, &default_scheme()).unwrap();
    let l = landsberg_test(&fs, &s, 1e-6).unwrap();
    let direct = b.residual("berwald_direct").unwrap().value;
    let lands = l.residual("landsberg").unwrap().value;
    vec![
        Check::holds(
            "classify.berwald_no",
            "non-Berwald Randers berwald_test = no",
            b.verdict == Verdict::No,
        ),
        Check::at_most(
            "classify.berwald_fixture",
            "relative change from recorded Berwald residual",
            relative(direct, fixture_f64("berwald_direct")),
            1e-6,
        ),
        Check::holds(
            "classify.landsberg_no",
            "non-Berwald Randers landsberg_test = no",
            l.verdict == Verdict::No,
        ),
        Check::at_most(
            "classify.landsberg_fixture",
            "relative change from recorded Landsberg residual",
            relative(lands, fixture_f64("landsberg")),
            1e-6,
        ),
    ]
}

/// `Ȧ` at `(x, y)` with `F(x, y) = 1` as the rate of change of
/// `A(E_a, E_b, E_c)` for a Chern-parallel frame along the geodesic with
/// initial velocity `y`, by a one-sided fourth-order difference.
pub fn landsberg_along_geodesic() -> Vec<Check> {
    let fs = presets::nonberwald_randers();
    let x = [0.1, 1.0];
    let u = [0.6, 0.8];
    let f = fs.value(&x, &u).unwrap();
    let y = [u[0] / f, u[1] / f];
    let lib = finsler::landsberg_tensor::<f64>(&fs, &x, &y).unwrap();
    let tight = TransportOptions::with_tolerance(1e-13);
    let h = 1e-2;
    let frame = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
    let field = ChernField {
        structure: fs.clone(),
    };
    let contracted: Vec<Vec<f64>> = (0..5)
        .map(|k| {
            if k == 0 {
                return flat(&cartan_tensor::<f64>(&fs, &x, &y).unwrap().a);
            }
            let curve = CurveSpec::Geodesic {
                x0: x.to_vec(),
                y0: y.to_vec(),
                length: h * k as f64,
            };
            let res = transport(&field, &curve, Some(&y), &frame, None, &tight).unwrap();
            let a = flat(
                &cartan_tensor::<f64>(&fs, &res.end_point, res.direction.as_ref().unwrap())
                    .unwrap()
                    .a,
            );
            let e = |c: usize| res.vectors.column(c);
            let mut out = vec![0.0; 8];
            for p in 0..2 {
                for q in 0..2 {
                    for r in 0..2 {
                        let (ep, eq, er) = (e(p), e(q), e(r));
                        let mut acc = 0.0;
                        for i in 0..2 {
                            for j in 0..2 {
                                for l in 0..2 {
                                    acc += a[(i * 2 + j) * 2 + l] * ep[i] * eq[j] * er[l];
                                }
                            }
                        }
                        out[(p * 2 + q) * 2 + r] = acc;
                    }
                }
            }
            out
        })
        .collect();
    let oracle: Vec<f64> = (0..8)
        .map(|m| {
            let v: Vec<f64> = contracted.iter().map(|c| c[m]).collect();
            (-25.0 * v[0] + 48.0 * v[1] - 36.0 * v[2] + 16.0 * v[3] - 3.0 * v[4]) / (12.0 * h)
        })
        .collect();
    vec![
        Check::at_most(
            "classify.landsberg_transport",
            "Ȧ vs derivative along a Chern-parallel frame",
            max_diff(&flat(&lib), &oracle),
            1e-6,
        ),
        Check::exceeds(
            "classify.landsberg_nonzero",
            "max |Ȧ| on the non-Berwald metric",
            lib.max_abs(),
            1e-4,
        ),
    ]
}

pub fn nonberwald_rigidity_loops() -> Vec<CurveSpec> {
    [vec![0.0, 1.0], vec![-0.3, 0.8]]
        .into_iter()
        .map(|corner| CurveSpec::LoopRectangle {
            corner,
            a: 0.5,
            b: -0.5,
            plane: (0, 1),
        })
        .collect()
}

pub fn berwald_rigidity_loops() -> Vec<CurveSpec> {
    [vec![0.0, 0.0], vec![-0.5, 0.3]]
        .into_iter()
        .map(|corner| CurveSpec::LoopRectangle {
            corner,
            a: 0.5,
            b: 0.5,
            plane: (0, 1),
        })
        .collect()
}

pub fn classify_rigidity() -> Vec<Check> {
    let scheme = default_scheme();
    let b = presets::berwald_randers();
    let rb = rigidity_test(
        &b,
        &averaged_metric_field(&b, &scheme),
        &berwald_rigidity_loops(),
        32,
        1e-6,
        &opts(),
    )
    .unwrap();
    let nb = presets::nonberwald_randers();
    let rn = rigidity_test(
        &nb,
        &averaged_metric_field(&nb, &scheme),
        &nonberwald_rigidity_loops(),
        32,
        1e-6,
        &opts(),
    )
    .unwrap();
    let worst_b = rb.outcome.residual("rigidity_max_drift").unwrap().value;
    let worst_n = rn.outcome.residual("rigidity_max_drift").unwrap().value;
    vec![
        Check::at_most(
            "classify.rigidity_berwald",
            "Berwald Randers drift with averaged h",
            worst_b,
            1e-6,
        ),
        Check::holds(
            "classify.rigidity_berwald_yes",
            "Berwald Randers rigidity = yes",
            rb.outcome.verdict == Verdict::Yes,
        ),
        Check::exceeds(
            "classify.rigidity_nonberwald",
            "non-Berwald drift, side 0.5 loops",
            worst_n,
            1e-3,
        ),
        Check::holds(
            "classify.rigidity_nonberwald_no",
            "non-Berwald rigidity = no",
            rn.outcome.verdict == Verdict::No,
        ),
        Check::at_most(
            "classify.rigidity_fixture",
            "relative change from recorded drift",
            relative(worst_n, fixture_f64("rigidity_max_drift")),
            1e-6,
        ),
    ]
}

pub const T_GRID: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

pub fn classify_interpolation() -> Vec<Check> {
    let scheme = default_scheme();
    let b = presets::berwald_randers();
    let tb = interpolated_indicatrix_test(
        &b,
        &averaged_metric_field(&b, &scheme),
        &T_GRID,
        &berwald_rigidity_loops(),
        32,
        1e-6,
        &opts(),
    )
    .unwrap();
    let nb = presets::nonberwald_randers();
    let tn = interpolated_indicatrix_test(
        &nb,
        &averaged_metric_field(&nb, &scheme),
        &T_GRID,
        &nonberwald_rigidity_loops(),
        32,
        1e-6,
        &opts(),
    )
    .unwrap();
    let worst_b = tb.rows.iter().map(|r| r.max_drift).fold(0.0, f64::max);
    vec![
        Check::at_most(
            "classify.interpolation_berwald",
            "Berwald Randers drift, all t",
            worst_b,
            1e-6,
        ),
        Check::exceeds(
            "classify.interpolation_t0",
            "non-Berwald drift at t = 0",
            tn.rows[0].max_drift,
            1e-6,
        ),
        Check::at_most(
            "classify.interpolation_t1",
            "non-Berwald drift at t = 1",
            tn.rows[4].max_drift,
            1e-6,
        ),
    ]
}

/// Rotation angle of a conformal-metric holonomy matrix.
fn rotation_angle(m: &Matrix<f64>) -> f64 {
    m[(1, 0)].atan2(m[(0, 0)])
}

pub fn classify_holonomy_sphere() -> Vec<Check> {
    let fs = presets::sphere_patch();
    let x = [0.2, 0.1];
    let s = holonomy_sample(&fs, &x, &[0.1, 0.2], 6, &default_scheme(), &opts()).unwrap();
    let c = holonomy_classify(&s, 1e-6).unwrap();
    let det = s
        .determinants
        .iter()
        .map(|d| (d - 1.0).abs())
        .fold(0.0, f64::max);
    let mut gb = 0.0f64;
    for (m, l) in s.matrices.iter().zip(&s.loops) {
        let CurveSpec::LoopRectangle { corner, a, b, .. } = l else {
            unreachable!()
        };
        let lo = [corner[0].min(corner[0] + a), corner[1].min(corner[1] + b)];
        let area = metric_area(&sphere_metric, &lo, a.abs(), b.abs());
        gb = gb.max((rotation_angle(m).abs() - area).abs());
    }
    vec![
        Check::holds(
            "classify.holonomy_sphere_class",
            "sphere patch class = metric_preserving",
            c.class == HolonomyClass::MetricPreserving,
        ),
        Check::at_most(
            "classify.holonomy_sphere_fit",
            "invariant form fit residual",
            s.fit_residual,
            1e-6,
        ),
        Check::at_most("classify.holonomy_sphere_det", "max |det H - 1|", det, 1e-7),
        Check::at_most(
            "classify.holonomy_gauss_bonnet",
            "|rotation angle| vs enclosed area",
            gb,
            1e-6,
        ),
    ]
}

pub fn classify_holonomy_nonberwald() -> Vec<Check> {
    let fs = presets::nonberwald_randers();
    let s = holonomy_sample(&fs, &[0.0, 1.0], &[0.1, 0.2], 6, &default_scheme(), &opts()).unwrap();
    let c = holonomy_classify(&s, 1e-6).unwrap();
    let recorded: Vec<Vec<f64>> =
        serde_json::from_value(fixture()["holonomy_matrices"].clone()).unwrap();
    let dev = s
        .matrices
        .iter()
        .zip(&recorded)
        .map(|(m, r)| max_diff(m.as_slice(), r))
        .fold(0.0, f64::max);
    vec![
        Check::holds(
            "classify.holonomy_nonberwald_class",
            format!(
                "non-Berwald class {} matches recorded special_linear",
                c.class.name()
            ),
            c.class == HolonomyClass::SpecialLinear,
        ),
        Check::at_most(
            "classify.holonomy_fixture",
            "matrices vs recorded",
            dev,
            1e-9,
        ),
    ]
}

pub fn sl2_fixture() -> Vec<Matrix<f64>> {
    let sl = [
        Matrix::diagonal(&[2.0, 0.5]),
        Matrix::from_rows(&[vec![1.0, 0.3], vec![0.0, 1.0]]),
    ];
    sl.iter().cycle().take(6).cloned().collect()
}

pub fn classify_sl2_grid() -> Vec<Check> {
    let ms = sl2_fixture();
    let c = holonomy_classify(
        &HolonomySample::from_matrices(vec![0.0, 0.0], ms.clone()),
        1e-6,
    )
    .unwrap();
    let arr: Vec<[[f64; 2]; 2]> = ms
        .iter()
        .map(|m| [[m[(0, 0)], m[(0, 1)]], [m[(1, 0)], m[(1, 1)]]])
        .collect();
    vec![
        Check::holds(
            "classify.sl2_class",
            "synthetic SL(2) fixture = special_linear",
            c.class == HolonomyClass::SpecialLinear,
        ),
        Check::exceeds(
            "classify.sl2_grid",
            "grid-search minimum invariant-form residual",
            grid_min_form_residual(&arr, 200),
            1e-2,
        ),
    ]
}

pub type CheckFn = fn() -> Vec<Check>;

/// Every oracle-backed example in the library crates.
pub const ALL: [(&str, CheckFn); 25] = [
    ("expr jet", expr_jet_vs_fd),
    ("expr homogeneity", expr_homogeneity),
    ("core fundamental", core_fundamental_vs_fd),
    ("core cartan", core_cartan_vs_fd),
    ("core convexity", core_convexity_sweep),
    ("connections christoffel", connections_christoffel_vs_fd),
    ("connections nonlinear", connections_nonlinear_variants),
    ("connections chern", connections_chern_structure),
    ("connections berwald", connections_berwald_sweep),
    (
        "connections difference",
        connections_difference_symmetrization,
    ),
    ("transport semicircle", transport_hyperbolic_semicircle),
    ("transport hyperbolic loop", transport_hyperbolic_loop),
    ("transport chern", transport_nonberwald_chern),
    ("transport averaged", transport_averaged_indicatrix),
    ("averaging ellipse", averaging_ellipse_volume),
    ("averaging connection", averaging_connection_mc),
    ("averaging metric", averaging_metric_mc),
    ("classify berwald/landsberg", classify_nonberwald_tests),
    ("classify landsberg transport", landsberg_along_geodesic),
    ("classify rigidity", classify_rigidity),
    ("classify interpolation", classify_interpolation),
    ("classify holonomy sphere", classify_holonomy_sphere),
    (
        "classify holonomy non-Berwald",
        classify_holonomy_nonberwald,
    ),
    ("classify sl2", classify_sl2_grid),
    ("classify fixture", fixture_sanity),
];

fn fixture_sanity() -> Vec<Check> {
    let f = fixture();
    vec![Check::holds(
        "classify.fixture_present",
        "fixture records every observed value",
        [
            "berwald_direct",
            "landsberg",
            "indicatrix_drift_loop",
            "rigidity_max_drift",
            "holonomy_matrices",
        ]
        .iter()
        .all(|k| !f[*k].is_null()),
    )]
}
