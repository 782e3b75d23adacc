mod common;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{direct_sum, random_blocks, random_symbol, random_symplectic};
use qbnf::floquet::{character, classify_poincare, FloquetClassification, SymplecticMatrix, TOL_EIG, TOL_SYMP};
use qbnf::wave::{
    actions_to_derivatives, apply_derivatives, derivatives_to_actions, fd_step, finite_difference, CharacterData,
    Convention, DerivativePolynomial,
};
use qbnf::weyl::symbol::mono_pack;
use qbnf::weyl::{CPoly, SymbolPolynomial};

fn scale3(a: &SymbolPolynomial, b: &SymbolPolynomial, c: &SymbolPolynomial) -> f64 {
    (a.max_abs() * b.max_abs() * c.max_abs()).max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn moyal_is_associative(seed in any::<u64>(), n in 1usize..=3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_symbol(&mut rng, n, 4, false);
        let b = random_symbol(&mut rng, n, 4, false);
        let c = random_symbol(&mut rng, n, 4, false);
        let l = a.moyal(&b).unwrap().moyal(&c).unwrap();
        let r = a.moyal(&b.moyal(&c).unwrap()).unwrap();
        prop_assert!(l.sub(&r).max_abs() < 1e-11 * scale3(&a, &b, &c));
    }

    #[test]
    fn bracket_is_antisymmetric_and_jacobi(seed in any::<u64>(), n in 1usize..=3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_symbol(&mut rng, n, 4, false);
        let b = random_symbol(&mut rng, n, 4, false);
        let c = random_symbol(&mut rng, n, 3, false);
        let ab = a.bracket(&b).unwrap();
        prop_assert!(ab.add(&b.bracket(&a).unwrap()).max_abs() < 1e-11 * (a.max_abs() * b.max_abs()).max(1.0));
        let j = a.bracket(&b.bracket(&c).unwrap()).unwrap()
            .add(&b.bracket(&c.bracket(&a).unwrap()).unwrap())
            .add(&c.bracket(&a.bracket(&b).unwrap()).unwrap());
        prop_assert!(j.max_abs() < 1e-11 * scale3(&a, &b, &c));
    }

    #[test]
    fn bracket_leads_with_poisson(seed in any::<u64>(), n in 1usize..=3, da in 1usize..=4, db in 1usize..=4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_symbol(&mut rng, n, da, true);
        let b = random_symbol(&mut rng, n, db, true);
        let diff = a.bracket(&b).unwrap().sub(&a.poisson(&b).unwrap());
        let top = (da + db).saturating_sub(2);
        let s = (a.max_abs() * b.max_abs()).max(1.0);
        prop_assert!(diff.homogeneous_part(top).max_abs() < 1e-11 * s);
        if da.min(db) <= 2 {
            prop_assert!(diff.max_abs() < 1e-11 * s);
        }
    }

    #[test]
    fn character_matches_determinant(seed in any::<u64>(), n in 1usize..=4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let blocks = random_blocks(&mut rng, n, true);
        let b = random_symplectic(&mut rng, n);
        let m = &b * direct_sum(&blocks) * b.clone().try_inverse().unwrap();
        let det = (DMatrix::<f64>::identity(2 * n, 2 * n) - &m).determinant().abs();
        let f = classify_poincare(&SymplecticMatrix::new(m, TOL_SYMP).unwrap(), TOL_EIG).unwrap();
        let got = character(&f).value.norm();
        let want = det.powf(-0.5);
        prop_assert!((got - want).abs() < 1e-10 * want.max(1.0), "{got} vs {want}");
    }

    #[test]
    fn finite_differences_agree(seed in any::<u64>(), n in 1usize..=2, deg in 0usize..=3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = FloquetClassification::from_blocks(random_blocks(&mut rng, n, false));
        let data = CharacterData::new(&f);
        let nv = data.n();
        let mut terms = Vec::new();
        for _ in 0..4 {
            let mut e = vec![0u8; nv];
            for _ in 0..rng.gen_range(0..=deg) {
                e[rng.gen_range(0..nv)] += 1;
            }
            terms.push((mono_pack(&e), C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))));
        }
        let mut poly = CPoly::zero(nv);
        let mut scale = 0.0;
        for (m, c) in &terms {
            let mut one = CPoly::zero(nv);
            one.add_term(*m, *c);
            scale += apply_derivatives(&DerivativePolynomial { k: 0, poly: one }, &data, false).norm();
            poly.add_term(*m, *c);
        }
        let fp = DerivativePolynomial { k: 0, poly };
        let exact = apply_derivatives(&fp, &data, false);
        let fd = finite_difference(&fp, &data, fd_step(fp.degree()));
        prop_assert!((fd - exact).norm() < 1e-5 * scale, "{fd} vs {exact}");
    }

    #[test]
    fn action_substitution_round_trips(seed in any::<u64>(), n in 1usize..=3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = FloquetClassification::from_blocks(random_blocks(&mut rng, n, false));
        let kinds = f.layout().action_kinds();
        let p = common::random_action_poly(&mut rng, &f, 3).poly;
        for conv in [Convention::UniformD, Convention::Paper] {
            let back = derivatives_to_actions(&actions_to_derivatives(&p, &kinds, conv), &kinds, conv);
            prop_assert!(back.sub(&p).max_abs() < 1e-12 * p.max_abs().max(1.0));
        }
    }
}
