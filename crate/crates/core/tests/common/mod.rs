#![allow(dead_code)]

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::Rng;
use std::f64::consts::PI;

use qbnf::catalog::Geometry;
use qbnf::floquet::{j_matrix, BlockData, FloquetClassification};
use qbnf::laplacian::{quadratic_symbol, JetScope, SemiclassicalExpansion};
use qbnf::weyl::{ActionPolynomial, CPoly, Op, SymbolPolynomial, Trig};

pub const CAP: usize = 32;

/// Representative parameterizations of every catalog entry.
pub fn catalog() -> Vec<Geometry> {
    vec![
        Geometry::ConstantCurvature { l: 1.0, k: 1.3 },
        Geometry::ConstantCurvature { l: 1.0, k: -1.0 },
        Geometry::HillLoop { l: 1.0, a: 4.0, b: 1.0 },
        Geometry::BlockDiagonal { l: 1.0, k1: 2.0, k2: -1.0 },
        Geometry::Revolution { l: 1.0, profile: vec![1.0, 0.0, -0.6, 0.2, 0.1] },
    ]
}

pub fn rel(a: f64, scale: f64) -> f64 {
    a / scale.max(f64::MIN_POSITIVE)
}

/// Already conjugated model `L^-2 + (2/L) R h^{-1} + sum extra` for the given
/// Floquet data, with empty terms up to `order`.
pub fn synthetic_model(f: &FloquetClassification, l: f64, order: usize, extra: &[(usize, Op)]) -> SemiclassicalExpansion {
    let n = f.n();
    let one = |v: f64| SymbolPolynomial::constant(n, CAP, C64::new(v, 0.0));
    let mut terms = vec![Op::zero(n, CAP); order + 1];
    terms[0] = Op::from_symbol(one(l.powi(-2)));
    terms[2] = Op::term(one(2.0 / l), 1);
    for (m, op) in extra {
        terms[*m] = terms[*m].add(op);
    }
    let s_model = -j_matrix(n) * f.hamilton_matrix().unwrap();
    SemiclassicalExpansion {
        n,
        l,
        terms,
        hhat: quadratic_symbol(n, CAP, &s_model).scale_real(1.0 / l),
        conjugated: true,
        scope: JetScope::Full,
    }
}

/// Rotation, boost or loxodromic block in `(x, xi)` ordering, built directly.
pub fn block_matrix(b: &BlockData) -> DMatrix<f64> {
    match *b {
        BlockData::Elliptic { alpha, .. } => {
            let (c, s) = (alpha.cos(), alpha.sin());
            DMatrix::from_row_slice(2, 2, &[c, s, -s, c])
        }
        BlockData::Hyperbolic { lambda, negative } => {
            let sg = if negative { -1.0 } else { 1.0 };
            DMatrix::from_row_slice(2, 2, &[sg * lambda.exp(), 0.0, 0.0, sg * (-lambda).exp()])
        }
        BlockData::Loxodromic { mu, nu } => {
            let a = DMatrix::from_row_slice(2, 2, &[nu.cos(), -nu.sin(), nu.sin(), nu.cos()]) * mu.exp();
            let at = a.clone().try_inverse().unwrap().transpose();
            let mut m = DMatrix::zeros(4, 4);
            m.view_mut((0, 0), (2, 2)).copy_from(&a);
            m.view_mut((2, 2), (2, 2)).copy_from(&at);
            m
        }
    }
}

/// Direct sum in the global `(x_1..x_n, xi_1..xi_n)` ordering.
pub fn direct_sum(blocks: &[BlockData]) -> DMatrix<f64> {
    let n: usize = blocks.iter().map(|b| if matches!(b, BlockData::Loxodromic { .. }) { 2 } else { 1 }).sum();
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    let mut off = 0;
    for b in blocks {
        let w = if matches!(b, BlockData::Loxodromic { .. }) { 2 } else { 1 };
        let bm = block_matrix(b);
        for i in 0..2 * w {
            for j in 0..2 * w {
                let gi = if i < w { off + i } else { n + off + i - w };
                let gj = if j < w { off + j } else { n + off + j - w };
                m[(gi, gj)] = bm[(i, j)];
            }
        }
        off += w;
    }
    m
}

/// Random symplectic matrix from shears and a linear block.
pub fn random_symplectic<R: Rng>(rng: &mut R, n: usize) -> DMatrix<f64> {
    let sym = |rng: &mut R| {
        let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-0.6..0.6));
        (&a + a.transpose()) * 0.5
    };
    let mut upper = DMatrix::identity(2 * n, 2 * n);
    upper.view_mut((0, n), (n, n)).copy_from(&sym(rng));
    let mut lower = DMatrix::identity(2 * n, 2 * n);
    lower.view_mut((n, 0), (n, n)).copy_from(&sym(rng));
    let a = DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 } + rng.gen_range(-0.3..0.3));
    let mut lin = DMatrix::zeros(2 * n, 2 * n);
    lin.view_mut((0, 0), (n, n)).copy_from(&a);
    lin.view_mut((n, n), (n, n)).copy_from(&a.clone().try_inverse().unwrap().transpose());
    upper * lin * lower
}

/// Random nondegenerate blocks with total width `n`, keeping the
/// multiplicative margin away from resonance.
pub fn random_blocks<R: Rng>(rng: &mut R, n: usize, allow_negative: bool) -> Vec<BlockData> {
    let mut out = Vec::new();
    let mut left = n;
    while left > 0 {
        let pick = rng.gen_range(0..if left >= 2 { 3 } else { 2 });
        let b = match pick {
            0 => BlockData::Elliptic { alpha: rng.gen_range(0.3..PI - 0.3), krein: 1 },
            1 => BlockData::Hyperbolic { lambda: rng.gen_range(0.2..0.9), negative: allow_negative && rng.gen_bool(0.3) },
            _ => BlockData::Loxodromic { mu: rng.gen_range(0.15..0.6), nu: rng.gen_range(0.4..PI - 0.4) },
        };
        left -= if matches!(b, BlockData::Loxodromic { .. }) { 2 } else { 1 };
        out.push(b);
    }
    out
}

/// Random real action polynomial of degree `<= deg`.
pub fn random_action_poly<R: Rng>(rng: &mut R, f: &FloquetClassification, deg: usize) -> ActionPolynomial {
    let kinds = f.layout().action_kinds();
    let nv = kinds.len();
    let mut p = CPoly::zero(nv);
    let mut exps = vec![vec![]];
    for _ in 0..nv {
        exps = exps
            .into_iter()
            .flat_map(|e: Vec<u8>| {
                (0..=deg as u8).map(move |d| {
                    let mut e = e.clone();
                    e.push(d);
                    e
                })
            })
            .collect();
    }
    for e in exps {
        if e.iter().map(|v| *v as usize).sum::<usize>() <= deg {
            p.add_term(qbnf::weyl::symbol::mono_pack(&e), C64::new(rng.gen_range(-1.0..1.0), 0.0));
        }
    }
    ActionPolynomial::from_poly(kinds, p)
}

pub const SCAP: usize = 6;

/// Sparse symbol with a few monomials of degree `<= deg` and low s-modes.
pub fn random_symbol<R: Rng>(rng: &mut R, n: usize, deg: usize, homogeneous: bool) -> SymbolPolynomial {
    let mut p = SymbolPolynomial::zero(n, SCAP);
    for _ in 0..rng.gen_range(1..=4) {
        let d = if homogeneous { deg } else { rng.gen_range(0..=deg) };
        let mut e = vec![0u8; 2 * n];
        for _ in 0..d {
            e[rng.gen_range(0..2 * n)] += 1;
        }
        let t = Trig::from_coeffs(vec![
            C64::new(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)),
            C64::new(rng.gen_range(-1.0..1.0), 0.0),
            C64::new(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)),
        ]);
        p = p.add(&SymbolPolynomial::monomial(n, SCAP, &e, t));
    }
    p
}
