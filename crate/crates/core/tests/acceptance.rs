//! The ten acceptance criteria. Run with `--nocapture` to see one line per
//! criterion.

mod common;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::time::{Duration, Instant};

use common::{catalog, direct_sum, random_action_poly, random_symbol, random_symplectic};
use qbnf::birkhoff::verify_normal_form;
use qbnf::catalog::Geometry;
use qbnf::error::Error;
use qbnf::floquet::{
    character, classify_poincare, resonance_margin, BlockData, FloquetClassification, SymplecticMatrix, TOL_EIG,
    TOL_SYMP,
};
use qbnf::inverse::{recover_normal_form, synthesize_samples, InverseConfig};
use qbnf::pipeline::{self, PipelineConfig, PipelineOutput};
use qbnf::wave::{apply_derivatives, fd_step, finite_difference, CharacterData, Convention, DerivativePolynomial};
use qbnf::weyl::symbol::mono_pack;
use qbnf::weyl::CPoly;

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn cfg(k_max: usize) -> PipelineConfig {
    let mut c = PipelineConfig::default();
    c.normal_form.k_max = k_max;
    c
}

fn all_metrics() -> Vec<Geometry> {
    let mut v = catalog();
    v.push(Geometry::QuadraticModel { l: 1.0, k: vec![vec![1.5, 0.2], vec![0.2, 0.7]] });
    v
}

fn runs(k_max: usize) -> Vec<(Geometry, PipelineOutput, Duration)> {
    all_metrics()
        .into_iter()
        .map(|g| {
            let t = Instant::now();
            let out = pipeline::run(&g.clone().into(), &cfg(k_max)).unwrap_or_else(|e| panic!("{}: {e}", g.name()));
            (g, out, t.elapsed())
        })
        .collect()
}

fn c1_frame() -> Outcome {
    let t = Instant::now();
    let (mut symp, mut law) = (0.0f64, 0.0f64);
    for g in all_metrics() {
        let (_, frame, _) = pipeline::model_expansion(&g.into(), &cfg(2)).unwrap();
        symp = symp.max(frame.symplectic_residual);
        law = law.max(frame.monodromy_residual);
    }
    let el = t.elapsed();
    check(
        symp < 1e-9 && law < 1e-8 && el < Duration::from_secs(10),
        format!("symplectic {symp:.1e}, monodromy law {law:.1e}, {:.2}s", el.as_secs_f64()),
    )
}

fn c2_character() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for i in 0..200 {
        let n = 1 + i % 4;
        let blocks = common::random_blocks(&mut rng, n, true);
        let b = random_symplectic(&mut rng, n);
        let m = &b * direct_sum(&blocks) * b.clone().try_inverse().unwrap();
        let det = (DMatrix::<f64>::identity(2 * n, 2 * n) - &m).determinant().abs();
        let f = classify_poincare(&SymplecticMatrix::new(m, TOL_SYMP).unwrap(), TOL_EIG).unwrap();
        let want = det.powf(-0.5);
        worst = worst.max((character(&f).value.norm() - want).abs() / want.max(1.0));
    }
    let el = t.elapsed();
    check(worst < 1e-10 && el < Duration::from_secs(5), format!("max error {worst:.1e}, {:.2}s", el.as_secs_f64()))
}

fn c3_moyal() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for i in 0..60 {
        let n = 1 + i % 3;
        let a = random_symbol(&mut rng, n, 4, false);
        let b = random_symbol(&mut rng, n, 4, false);
        let c = random_symbol(&mut rng, n, 4, false);
        let s3 = (a.max_abs() * b.max_abs() * c.max_abs()).max(1.0);
        let s2 = (a.max_abs() * b.max_abs()).max(1.0);
        let assoc = a.moyal(&b).unwrap().moyal(&c).unwrap().sub(&a.moyal(&b.moyal(&c).unwrap()).unwrap());
        let ab = a.bracket(&b).unwrap();
        let anti = ab.add(&b.bracket(&a).unwrap());
        let jac = a
            .bracket(&b.bracket(&c).unwrap())
            .unwrap()
            .add(&b.bracket(&c.bracket(&a).unwrap()).unwrap())
            .add(&c.bracket(&ab).unwrap());
        let da = rng.gen_range(1..=4);
        let db = rng.gen_range(1..=4);
        let ha = random_symbol(&mut rng, n, da, true);
        let hb = random_symbol(&mut rng, n, db, true);
        let lead = ha.bracket(&hb).unwrap().sub(&ha.poisson(&hb).unwrap()).homogeneous_part(da + db - 2);
        let sh = (ha.max_abs() * hb.max_abs()).max(1.0);
        worst = worst.max(assoc.max_abs() / s3).max(anti.max_abs() / s2).max(jac.max_abs() / s3).max(lead.max_abs() / sh);
    }
    let el = t.elapsed();
    check(worst < 1e-11 && el < Duration::from_secs(10), format!("max error {worst:.1e}, {:.2}s", el.as_secs_f64()))
}

fn c4_steps(rs: &[(Geometry, PipelineOutput, Duration)]) -> Outcome {
    let worst = rs.iter().map(|(_, o, _)| o.normal_form.max_step_residual()).fold(0.0, f64::max);
    check(worst < 1e-9, format!("max step residual {worst:.1e} over {} runs", rs.len()))
}

fn c5_verify(rs: &[(Geometry, PipelineOutput, Duration)]) -> Outcome {
    let mut worst = 0.0f64;
    let mut slowest = Duration::ZERO;
    for (_, o, d) in rs {
        let t = Instant::now();
        let v = verify_normal_form(&o.normal_form, &o.model).unwrap();
        slowest = slowest.max(*d + t.elapsed());
        worst = worst.max(v.conjugation_residual).max(v.normal_form_residual);
    }
    check(
        worst < 1e-8 && slowest < Duration::from_secs(60),
        format!("max residual {worst:.1e}, slowest metric {:.2}s", slowest.as_secs_f64()),
    )
}

fn c6_quadratic(rs: &[(Geometry, PipelineOutput, Duration)]) -> Outcome {
    let (_, o, _) = rs.iter().find(|(g, _, _)| matches!(g, Geometry::QuadraticModel { .. })).unwrap();
    let worst = o.normal_form.f.iter().map(|f| f.max_abs()).fold(0.0, f64::max);
    check(worst < 1e-12, format!("max |f_j| {worst:.1e} (linearized scope)"))
}

/// Errors are relative to the largest coefficient of the `f` (or `p`)
/// family, so roundoff-level members do not count as relative failures.
fn c7_scaling(rs: &[(Geometry, PipelineOutput, Duration)]) -> Outcome {
    let family = |v: &[qbnf::weyl::ActionPolynomial]| v.iter().map(|a| a.max_abs()).fold(0.0, f64::max);
    let mut worst = 0.0f64;
    for (g, o, _) in rs {
        let nf = &o.normal_form;
        for eps in [0.5, 2.0] {
            let s = pipeline::run(&g.scaled(eps).into(), &cfg(2)).unwrap().normal_form;
            for (base, scaled, w) in [(&nf.f, &s.f, eps.powi(-2)), (&nf.p, &s.p, 1.0 / eps)] {
                let scale = w * family(base);
                if scale == 0.0 {
                    continue;
                }
                for (a, b) in base.iter().zip(scaled) {
                    worst = worst.max(a.poly.scale(C64::new(w, 0.0)).sub(&b.poly).max_abs() / scale);
                }
            }
        }
    }
    check(worst < 1e-7, format!("max relative error {worst:.1e}"))
}

fn c8_fd() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst = 0.0f64;
    for i in 0..100 {
        let f = FloquetClassification::from_blocks(common::random_blocks(&mut rng, 1 + i % 2, false));
        let data = CharacterData::new(&f);
        let nv = data.n();
        let mut poly = CPoly::zero(nv);
        let mut scale = 0.0;
        for _ in 0..4 {
            let mut e = vec![0u8; nv];
            for _ in 0..rng.gen_range(0..=3) {
                e[rng.gen_range(0..nv)] += 1;
            }
            let c = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let mut one = CPoly::zero(nv);
            one.add_term(mono_pack(&e), c);
            scale += apply_derivatives(&DerivativePolynomial { k: 0, poly: one }, &data, false).norm();
            poly.add_term(mono_pack(&e), c);
        }
        let fp = DerivativePolynomial { k: 0, poly };
        let exact = apply_derivatives(&fp, &data, false);
        let fd = finite_difference(&fp, &data, fd_step(fp.degree()));
        worst = worst.max((fd - exact).norm() / scale);
    }
    check(worst < 1e-5, format!("max relative error {worst:.1e}"))
}

/// Per-instance `k_max` keeps the fit within double-precision reach.
fn instance(rng: &mut ChaCha8Rng, i: usize) -> (Vec<BlockData>, usize) {
    let e = |rng: &mut ChaCha8Rng| BlockData::Elliptic { alpha: rng.gen_range(0.3..PI - 0.3), krein: if rng.gen_bool(0.8) { 1 } else { -1 } };
    let h = |rng: &mut ChaCha8Rng| BlockData::Hyperbolic { lambda: rng.gen_range(0.2..0.9), negative: false };
    let x = |rng: &mut ChaCha8Rng| BlockData::Loxodromic { mu: rng.gen_range(0.15..0.6), nu: rng.gen_range(0.4..PI - 0.4) };
    match i {
        0 => (vec![h(rng)], 2),
        1 => (vec![x(rng)], 2),
        _ => match rng.gen_range(0..7) {
            0 => (vec![e(rng)], 2),
            1 => (vec![h(rng)], 2),
            2 => (vec![x(rng)], 2),
            3 => (vec![e(rng), e(rng)], 2),
            4 => (vec![e(rng), h(rng)], 2),
            5 => (vec![h(rng), h(rng)], 0),
            _ => (vec![e(rng), e(rng), e(rng)], 0),
        },
    }
}

fn c9_round_trip() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let icfg = InverseConfig::default();
    let mut worst = 0.0f64;
    let mut failures = Vec::new();
    let mut done = 0;
    while done < 50 {
        let (blocks, k_max) = instance(&mut rng, done);
        let f = FloquetClassification::from_blocks(blocks.clone());
        if resonance_margin(&f, 2 * k_max + 4).margin <= 0.05 {
            continue;
        }
        let l = rng.gen_range(0.5..2.0);
        let p: Vec<_> = (1..=k_max + 1).map(|v| random_action_poly(&mut rng, &f, v + 1)).collect();
        let conv = if rng.gen_bool(0.5) { Convention::UniformD } else { Convention::Paper };
        let rec = synthesize_samples(&p, &f, l, k_max, conv, &icfg).and_then(|s| recover_normal_form(&s, &f, l, k_max, conv, &icfg));
        match rec {
            Ok(r) => {
                for (a, b) in r.p_tilde.iter().zip(&p) {
                    worst = worst.max(a.poly.sub(&b.poly).max_abs() / b.max_abs());
                }
            }
            Err(e) => failures.push(format!("{blocks:?}: {e}")),
        }
        done += 1;
    }
    let el = t.elapsed();
    check(
        failures.is_empty() && worst < 1e-6 && el < Duration::from_secs(120),
        format!("50 instances, max relative error {worst:.1e}, {} failed {:?}, {:.2}s", failures.len(), failures, el.as_secs_f64()),
    )
}

fn c10_resonance() -> Outcome {
    let g = Geometry::ConstantCurvature { l: 1.0, k: (PI / 2.0).powi(2) };
    match pipeline::run(&g.into(), &cfg(1)) {
        Err(Error::ResonantDivisor { order, multi_index, step, .. }) => {
            check(order == 4, format!("ResonantDivisor order {order}, monomial {multi_index:?}, step {step}"))
        }
        Err(e) => check(false, format!("unexpected error {e}")),
        Ok(_) => check(false, "no resonance reported".into()),
    }
}

#[test]
fn acceptance() {
    let rs = runs(2);
    let outcomes = vec![
        c1_frame(),
        c2_character(),
        c3_moyal(),
        c4_steps(&rs),
        c5_verify(&rs),
        c6_quadratic(&rs),
        c7_scaling(&rs),
        c8_fd(),
        c9_round_trip(),
        c10_resonance(),
    ];
    for (i, o) in outcomes.iter().enumerate() {
        println!("criterion {:2}: {} {}", i + 1, if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    let failed: Vec<usize> = outcomes.iter().enumerate().filter(|(_, o)| !o.pass).map(|(i, _)| i + 1).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
