mod common;

use num_complex::Complex64 as C64;
use std::f64::consts::PI;

use common::{catalog, synthetic_model, CAP};
use qbnf::birkhoff::{run_normal_form, verify_normal_form, NormalFormConfig};
use qbnf::catalog::Geometry;
use qbnf::error::Error;
use qbnf::floquet::{BlockData, FloquetClassification};
use qbnf::laplacian::JetScope;
use qbnf::pipeline::{self, PipelineConfig};
use qbnf::weyl::{Op, SymbolPolynomial, Trig};

fn cfg(k_max: usize) -> PipelineConfig {
    let mut c = PipelineConfig::default();
    c.normal_form.k_max = k_max;
    c
}

/// Second-order energy shift of `x^3` on oscillator level `q`, summed over a
/// truncated Fock basis with `x = (a + a^*) / sqrt 2`.
fn fock_cubic_shift(q: usize, size: usize) -> f64 {
    let mut x = vec![vec![0.0; size]; size];
    for i in 0..size - 1 {
        let v = ((i + 1) as f64 / 2.0).sqrt();
        x[i][i + 1] = v;
        x[i + 1][i] = v;
    }
    let mul = |a: &Vec<Vec<f64>>, b: &Vec<Vec<f64>>| {
        let mut c = vec![vec![0.0; size]; size];
        for i in 0..size {
            for k in 0..size {
                for j in 0..size {
                    c[i][j] += a[i][k] * b[k][j];
                }
            }
        }
        c
    };
    let x3 = mul(&mul(&x, &x), &x);
    (0..size - 4).filter(|p| *p != q).map(|p| x3[p][q].powi(2) / (q as f64 - p as f64)).sum()
}

#[test]
fn cubic_perturbation_matches_rayleigh_schroedinger() {
    let (alpha, l, c) = (0.83, 1.4, 0.37);
    let f = FloquetClassification::from_blocks(vec![BlockData::Elliptic { alpha, krein: 1 }]);
    let cubic = SymbolPolynomial::monomial(1, CAP, &[3, 0], Trig::real(c));
    let model = synthetic_model(&f, l, 4, &[(3, Op::from_symbol(cubic))]);
    let nf = run_normal_form(&model, &f, NormalFormConfig { k_max: 0, ..Default::default() }).unwrap();
    let f0 = &nf.f[0].poly;
    let scale = l * l * c * c / (2.0 * alpha);
    assert!((f0.coeff(&[2]).re + 3.75 * scale).abs() < 1e-10);
    assert!(f0.coeff(&[1]).norm() < 1e-10);
    assert!((f0.coeff(&[0]).re + 7.0 / 16.0 * scale).abs() < 1e-10);
    for q in 0..4 {
        let want = scale * fock_cubic_shift(q, 48);
        let got = f0.eval(&[C64::new(q as f64 + 0.5, 0.0)]);
        assert!((got.re - want).abs() < 1e-9 * want.abs().max(1.0), "q = {q}: {got} vs {want}");
    }
}

#[test]
fn constant_curvature_closed_form() {
    let (l, k) = (1.2, 1.7);
    let out = pipeline::run(&Geometry::ConstantCurvature { l, k }.into(), &cfg(2)).unwrap();
    let nf = &out.normal_form;
    assert!((nf.f[0].poly.coeff(&[0]).re + k / 4.0).abs() < 1e-9);
    for j in 0..3 {
        let rest = if j == 0 { nf.f[0].poly.sub(&qbnf::weyl::CPoly::constant(1, nf.f[0].poly.coeff(&[0]))) } else { nf.f[j].poly.clone() };
        assert!(rest.max_abs() < 1e-9, "f{j} = {rest:?}");
    }
    let pt1 = &nf.p_tilde[0].poly;
    assert!((pt1.coeff(&[0]).re + k * l / 8.0).abs() < 1e-9);
    assert!(pt1.sub(&qbnf::weyl::CPoly::constant(1, pt1.coeff(&[0]))).max_abs() < 1e-9);
    // p~_2 = (kL/8) H with H = alpha I
    let alpha = l * k.sqrt();
    let pt2 = &nf.p_tilde[1].poly;
    assert!((pt2.coeff(&[1]).re - k * l / 8.0 * alpha).abs() < 1e-8, "{pt2:?}");
}

#[test]
fn linearized_quadratic_model_has_zero_corrections() {
    let g = Geometry::QuadraticModel { l: 1.0, k: vec![vec![1.5, 0.2], vec![0.2, 0.7]] };
    let out = pipeline::run(&g.into(), &cfg(2)).unwrap();
    assert_eq!(out.model.scope, JetScope::Linearized);
    let nf = out.normal_form;
    assert_eq!(nf.f.len(), 3);
    for (j, f) in nf.f.iter().enumerate() {
        assert!(f.max_abs() < 1e-12, "f{j} = {f:?}");
    }
}

#[test]
fn scaling_covariance() {
    let g = Geometry::HillLoop { l: 1.0, a: 4.0, b: 1.0 };
    let base = pipeline::run(&g.clone().into(), &cfg(1)).unwrap().normal_form;
    for eps in [0.5, 2.0] {
        let s = pipeline::run(&g.scaled(eps).into(), &cfg(1)).unwrap().normal_form;
        for (j, (a, b)) in base.f.iter().zip(&s.f).enumerate() {
            let want = a.poly.scale(C64::new(eps.powi(-2), 0.0));
            let err = want.sub(&b.poly).max_abs() / a.max_abs().max(1e-300);
            assert!(err < 1e-7, "eps {eps} f{j}: {err}");
        }
        for (k, (a, b)) in base.p.iter().zip(&s.p).enumerate() {
            let want = a.poly.scale(C64::new(1.0 / eps, 0.0));
            let err = want.sub(&b.poly).max_abs() / a.max_abs().max(1e-300);
            assert!(err < 1e-7, "eps {eps} p{}: {err}", k + 1);
        }
    }
}

#[test]
fn quarter_turn_is_resonant_at_order_four() {
    let g = Geometry::ConstantCurvature { l: 1.0, k: (PI / 2.0).powi(2) };
    match pipeline::run(&g.into(), &cfg(1)) {
        Err(Error::ResonantDivisor { order, .. }) => assert_eq!(order, 4),
        other => panic!("expected a resonance, got {other:?}"),
    }
}

#[test]
fn catalog_runs_verify_and_are_deterministic() {
    for g in catalog() {
        let src = g.clone().into();
        let out = pipeline::run(&src, &cfg(1)).unwrap_or_else(|e| panic!("{}: {e}", g.name()));
        assert!(out.normal_form.max_step_residual() < 1e-9, "{}", g.name());
        let v = verify_normal_form(&out.normal_form, &out.model).unwrap();
        assert!(v.conjugation_residual < 1e-8 && v.normal_form_residual < 1e-8, "{}: {v:?}", g.name());
        let again = pipeline::run(&src, &cfg(1)).unwrap();
        assert_eq!(out.normal_form.to_text(), again.normal_form.to_text());
    }
}
