mod common;

use common::derived::{self, assert_all};
use finsler::{
    cartan_tensor, convexity_scan, fundamental_tensor, presets, FinslerError, FinslerStructure,
    Matrix,
};
use proptest::prelude::*;
use twofloat::TwoFloat;

fn s(v: &[&[&str]]) -> Vec<Vec<String>> {
    v.iter()
        .map(|r| r.iter().map(|e| e.to_string()).collect())
        .collect()
}

fn warped() -> FinslerStructure {
    FinslerStructure::riemannian(&s(&[&["1 + x1^2", "0.3*x2"], &["0.3*x2", "2 + sin(x1)"]]))
        .unwrap()
}

/// A non-Randers Finsler metric: a quartic norm bent by position.
fn quartic() -> FinslerStructure {
    FinslerStructure::custom(
        "sqrt(sqrt(y1^4 + y2^4 + (1 + 0.5*x1^2)*y1^2*y2^2)) + 0.2*x2*y1",
        2,
    )
    .unwrap()
}

#[test]
fn euclidean_metric_is_identity() {
    let fs = presets::euclidean();
    let t = fundamental_tensor::<f64>(&fs, &[0.4, -2.0], &[0.3, 7.0]).unwrap();
    assert!(t.g.sub(&Matrix::identity(2)).max_abs() < 1e-14);
    assert!(t.inverse_residual() < 1e-14);
}

#[test]
fn riemannian_metric_reproduces_input() {
    let fs = warped();
    let x = [0.7, -0.4];
    let expect = Matrix::from_rows(&[vec![1.49, -0.12], vec![-0.12, 2.0 + 0.7f64.sin()]]);
    for y in [[1.0, 0.0], [0.2, -3.0], [-1.0, 1.0]] {
        let t = fundamental_tensor::<f64>(&fs, &x, &y).unwrap();
        assert!(t.g.sub(&expect).max_abs() < 1e-13);
        assert!(cartan_tensor::<f64>(&fs, &x, &y).unwrap().a.max_abs() < 1e-12);
    }
}

#[test]
fn randers_fundamental_and_cartan_match_oracles() {
    assert_all(&derived::core_fundamental_vs_fd());
    assert_all(&derived::core_cartan_vs_fd());
    let c = cartan_tensor::<f64>(
        &presets::randers_constant(0.5).unwrap(),
        &[0.0, 0.0],
        &[1.0, 0.0],
    )
    .unwrap();
    assert!(c.euler_residual() < 1e-10);
}

#[test]
fn convexity() {
    let scan = convexity_scan(&presets::euclidean(), &[0.0, 0.0], 16).unwrap();
    assert!((scan.min_eigenvalue - 1.0).abs() < 1e-14);
    assert_all(&derived::core_convexity_sweep());
    let bad = presets::randers_constant(1.5).unwrap();
    assert!(matches!(
        convexity_scan(&bad, &[0.0, 0.0], 16),
        Err(FinslerError::StrongConvexityViolation { .. })
    ));
    assert!(matches!(
        convexity_scan(&presets::euclidean(), &[0.0, 0.0], 3),
        Err(FinslerError::InsufficientSamples { .. })
    ));
}

#[test]
fn scalar_types_agree() {
    let fs = quartic();
    let (x, y) = ([0.3, 0.8], [0.6, -0.8]);
    let a64 = cartan_tensor::<f64>(&fs, &x, &y).unwrap();
    let a32 = cartan_tensor::<f32>(&fs, &[0.3, 0.8], &[0.6, -0.8]).unwrap();
    let xd: Vec<TwoFloat> = x.iter().map(|&v| TwoFloat::from(v)).collect();
    let yd: Vec<TwoFloat> = y.iter().map(|&v| TwoFloat::from(v)).collect();
    let add = cartan_tensor::<TwoFloat>(&fs, &xd, &yd).unwrap();
    for ((p, q), r) in a64
        .a
        .as_slice()
        .iter()
        .zip(a32.a.as_slice())
        .zip(add.a.as_slice())
    {
        assert!((p - *q as f64).abs() < 1e-4);
        assert!((p - f64::from(*r)).abs() < 1e-13);
    }
}

#[test]
fn nonpositive_value_reports_point() {
    let bad = presets::randers_constant(1.5).unwrap();
    let err = fundamental_tensor::<f64>(&bad, &[0.0, 0.0], &[-1.0, 0.3]).unwrap_err();
    match err {
        FinslerError::NonPositive { x, y, .. } => {
            assert_eq!(x, vec![0.0, 0.0]);
            assert_eq!(y, vec![-1.0, 0.3]);
        }
        other => panic!("unexpected error {other}"),
    }
}

fn structures() -> Vec<FinslerStructure> {
    vec![
        presets::hyperbolic(),
        presets::nonberwald_randers(),
        quartic(),
        warped(),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn fundamental_tensor_invariants(which in 0usize..4, x1 in -0.8..0.8f64, x2 in 0.5..1.5f64, t in 0.0..std::f64::consts::TAU) {
        let fs = &structures()[which];
        let (x, y) = ([x1, x2], [t.cos(), t.sin()]);
        let base = fundamental_tensor::<f64>(fs, &x, &y).unwrap();
        prop_assert!(base.g.symmetry_defect() == 0.0);
        prop_assert!(base.g.min_eigenvalue() > 0.0);
        prop_assert!(base.inverse_residual() < 1e-10);
        let f = fs.value(&x, &y).unwrap();
        prop_assert!((base.norm_squared().sqrt() - f).abs() < 1e-9);
        for l in [0.5, 2.0, 10.0] {
            let scaled = fundamental_tensor::<f64>(fs, &x, &[l * y[0], l * y[1]]).unwrap();
            prop_assert!(scaled.g.sub(&base.g).max_abs() < 1e-10);
        }
    }

    #[test]
    fn cartan_invariants(which in 0usize..4, x1 in -0.8..0.8f64, x2 in 0.5..1.5f64, t in 0.0..std::f64::consts::TAU) {
        let fs = &structures()[which];
        let c = cartan_tensor::<f64>(fs, &[x1, x2], &[t.cos(), t.sin()]).unwrap();
        prop_assert!(c.symmetry_defect() < 1e-10);
        prop_assert!(c.euler_residual() < 1e-9);
        if fs.is_riemannian() {
            prop_assert!(c.a.max_abs() < 1e-10);
        }
    }
}
