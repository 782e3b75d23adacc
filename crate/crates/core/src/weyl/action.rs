//! Action variables, eigen-coordinates and the Weyl ordering of action
//! monomials.
//!
//! Block layout: elliptic and hyperbolic blocks take one transverse slot,
//! a loxodromic block takes two adjacent slots. Eigen-coordinates sit in
//! the same slots as the real coordinates they replace:
//!
//! | block       | slot `i`      | slot `n+i`    | slot `i+1`      | slot `n+i+1`    |
//! |-------------|---------------|---------------|-----------------|-----------------|
//! | elliptic    | z = x + i xi  | zbar          |                 |                 |
//! | hyperbolic  | y = x         | eta = xi      |                 |                 |
//! | loxodromic  | w = x1 + i x2 | om = xi1 - i xi2 | wbar         | ombar           |
//!
//! A monomial in eigen-coordinates is diagonal iff its exponents agree on
//! slots `j` and `n+j` for every `j`.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::cpoly::CPoly;
use super::symbol::{mono_get, mono_set, SymbolPolynomial};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Block {
    Elliptic,
    Hyperbolic { negative: bool },
    Loxodromic,
}

impl Block {
    pub fn width(&self) -> usize {
        match self {
            Block::Loxodromic => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ActionKind {
    Elliptic,
    Hyperbolic,
    LoxRe,
    LoxIm,
}

impl ActionKind {
    pub fn label(&self) -> &'static str {
        match self {
            ActionKind::Elliptic => "Ie",
            ActionKind::Hyperbolic => "Ih",
            ActionKind::LoxRe => "IchRe",
            ActionKind::LoxIm => "IchIm",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockLayout {
    pub blocks: Vec<Block>,
}

impl BlockLayout {
    pub fn new(blocks: Vec<Block>) -> Self {
        BlockLayout { blocks }
    }

    pub fn n(&self) -> usize {
        self.blocks.iter().map(|b| b.width()).sum()
    }

    /// `(block, first slot)` pairs.
    pub fn slots(&self) -> Vec<(Block, usize)> {
        let mut out = Vec::new();
        let mut at = 0;
        for b in &self.blocks {
            out.push((*b, at));
            at += b.width();
        }
        out
    }

    pub fn action_kinds(&self) -> Vec<ActionKind> {
        let mut out = Vec::new();
        for b in &self.blocks {
            match b {
                Block::Elliptic => out.push(ActionKind::Elliptic),
                Block::Hyperbolic { .. } => out.push(ActionKind::Hyperbolic),
                Block::Loxodromic => {
                    out.push(ActionKind::LoxRe);
                    out.push(ActionKind::LoxIm);
                }
            }
        }
        out
    }
}

/// Polynomial in the action operators, tagged by kind.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionPolynomial {
    pub kinds: Vec<ActionKind>,
    pub poly: CPoly,
}

impl ActionPolynomial {
    pub fn zero(kinds: Vec<ActionKind>) -> Self {
        let n = kinds.len();
        ActionPolynomial { kinds, poly: CPoly::zero(n) }
    }

    pub fn from_poly(kinds: Vec<ActionKind>, poly: CPoly) -> Self {
        assert_eq!(kinds.len(), poly.nvars());
        ActionPolynomial { kinds, poly }
    }

    pub fn is_zero(&self) -> bool {
        self.poly.is_zero()
    }

    pub fn degree(&self) -> Option<usize> {
        self.poly.degree()
    }

    pub fn max_abs(&self) -> f64 {
        self.poly.max_abs()
    }

    pub fn max_imag(&self) -> f64 {
        self.poly.max_imag()
    }
}

/// Weyl symbols of the action operators, one per action slot.
pub fn action_symbols(layout: &BlockLayout, cap: usize) -> Vec<SymbolPolynomial> {
    let n = layout.n();
    let mono = |pairs: &[(usize, u8)], v: f64| {
        let mut m = 0u64;
        for &(s, e) in pairs {
            m = mono_set(m, s, e);
        }
        let mut p = SymbolPolynomial::zero(n, cap);
        p.add_term(m, super::trig::Trig::real(v));
        p
    };
    let mut out = Vec::new();
    for (b, i) in layout.slots() {
        match b {
            Block::Elliptic => out.push(mono(&[(i, 2)], 0.5).add(&mono(&[(n + i, 2)], 0.5))),
            Block::Hyperbolic { .. } => out.push(mono(&[(i, 1), (n + i, 1)], 1.0)),
            Block::Loxodromic => {
                let j = i + 1;
                out.push(mono(&[(i, 1), (n + i, 1)], 1.0).add(&mono(&[(j, 1), (n + j, 1)], 1.0)));
                out.push(mono(&[(i, 1), (n + j, 1)], 1.0).sub(&mono(&[(j, 1), (n + i, 1)], 1.0)));
            }
        }
    }
    out
}

/// Linear change to eigen-coordinates: `zeta = to_eigen * (x, xi)`.
#[derive(Debug, Clone)]
pub struct EigenCoordinateMap {
    pub to_eigen: DMatrix<C64>,
    pub from_eigen: DMatrix<C64>,
}

impl EigenCoordinateMap {
    pub fn new(layout: &BlockLayout) -> Self {
        let n = layout.n();
        let d = 2 * n;
        let one = C64::new(1.0, 0.0);
        let i1 = C64::new(0.0, 1.0);
        let mut c = DMatrix::<C64>::zeros(d, d);
        for (b, i) in layout.slots() {
            match b {
                Block::Elliptic => {
                    c[(i, i)] = one;
                    c[(i, n + i)] = i1;
                    c[(n + i, i)] = one;
                    c[(n + i, n + i)] = -i1;
                }
                Block::Hyperbolic { .. } => {
                    c[(i, i)] = one;
                    c[(n + i, n + i)] = one;
                }
                Block::Loxodromic => {
                    let j = i + 1;
                    c[(i, i)] = one;
                    c[(i, j)] = i1;
                    c[(j, i)] = one;
                    c[(j, j)] = -i1;
                    c[(n + i, n + i)] = one;
                    c[(n + i, n + j)] = -i1;
                    c[(n + j, n + i)] = one;
                    c[(n + j, n + j)] = i1;
                }
            }
        }
        let inv = c.clone().try_inverse().expect("eigen-coordinate map is invertible");
        EigenCoordinateMap { to_eigen: c, from_eigen: inv }
    }

    /// Rewrites a symbol in `(x, xi)` as a polynomial in eigen-coordinates.
    pub fn to_eigen(&self, a: &SymbolPolynomial) -> Result<SymbolPolynomial> {
        a.substitute_linear(&self.from_eigen)
    }

    /// Rewrites a polynomial in eigen-coordinates back in `(x, xi)`.
    pub fn from_eigen(&self, a: &SymbolPolynomial) -> Result<SymbolPolynomial> {
        a.substitute_linear(&self.to_eigen)
    }
}

pub fn is_diagonal(n: usize, m: u64) -> bool {
    (0..n).all(|j| mono_get(m, j) == mono_get(m, n + j))
}

/// Sum of the per-slot Poisson eigenvalues, `{zeta^m, H} = theta(m) zeta^m`.
pub fn monomial_exponent(n: usize, m: u64, slot_eigs: &[C64]) -> C64 {
    (0..2 * n).map(|s| slot_eigs[s] * mono_get(m, s) as f64).sum()
}

/// Classical action polynomial of a diagonal eigen-monomial.
pub fn diagonal_to_actions(layout: &BlockLayout, m: u64) -> Result<CPoly> {
    let n = layout.n();
    if !is_diagonal(n, m) {
        return Err(Error::NonActionDiagonal { multi_index: super::symbol::mono_unpack(m, 2 * n) });
    }
    let one = C64::new(1.0, 0.0);
    let i1 = C64::new(0.0, 1.0);
    let mut out = CPoly::constant(n, one);
    for (b, i) in layout.slots() {
        let a = mono_get(m, i) as usize;
        match b {
            Block::Elliptic => out = out.mul(&CPoly::var(n, i).scale(C64::new(2.0, 0.0)).pow(a)),
            Block::Hyperbolic { .. } => out = out.mul(&CPoly::var(n, i).pow(a)),
            Block::Loxodromic => {
                let b2 = mono_get(m, i + 1) as usize;
                let re = CPoly::var(n, i);
                let im = CPoly::var(n, i + 1);
                let wo = re.add(&im.scale(-i1));
                let wo_bar = re.add(&im.scale(i1));
                out = out.mul(&wo.pow(a)).mul(&wo_bar.pow(b2));
            }
        }
    }
    Ok(out)
}

/// Classical action polynomial of an s-independent diagonal symbol in
/// `(x, xi)`.
pub fn symbol_to_classical_actions(
    layout: &BlockLayout,
    ecm: &EigenCoordinateMap,
    a: &SymbolPolynomial,
    tol: f64,
) -> Result<CPoly> {
    let n = layout.n();
    let z = ecm.to_eigen(a)?;
    let mut out = CPoly::zero(n);
    for (m, t) in z.raw_terms() {
        let v = t.average();
        if v.norm() <= tol {
            continue;
        }
        out.add_assign_scaled(&diagonal_to_actions(layout, m)?, v);
    }
    Ok(out)
}

/// Weyl symbol of an operator action polynomial (products are Moyal).
pub fn operator_symbol(layout: &BlockLayout, ap: &ActionPolynomial, cap: usize) -> Result<SymbolPolynomial> {
    let n = layout.n();
    let syms = action_symbols(layout, cap);
    let mut out = SymbolPolynomial::zero(n, cap);
    for (m, v) in ap.poly.raw_terms() {
        let mut p = SymbolPolynomial::constant(n, cap, C64::new(1.0, 0.0));
        for (j, s) in syms.iter().enumerate() {
            for _ in 0..mono_get(m, j) {
                p = p.moyal(s)?;
            }
        }
        out.add_assign_scaled(&p, v);
    }
    Ok(out)
}

/// Inverts the Weyl ordering: finds the operator polynomial whose symbol is
/// the given classical action polynomial.
pub fn classical_to_operator(
    layout: &BlockLayout,
    ecm: &EigenCoordinateMap,
    classical: &CPoly,
    tol: f64,
) -> Result<ActionPolynomial> {
    let kinds = layout.action_kinds();
    let n = layout.n();
    let mut rest = classical.clone();
    let mut op = CPoly::zero(n);
    let mut guard = 0;
    while let Some(d) = rest.degree() {
        let top = rest.homogeneous_part(d);
        for (m, v) in top.raw_terms() {
            op.add_term(m, v);
            let mut single = CPoly::zero(n);
            single.add_term(m, C64::new(1.0, 0.0));
            let sym = operator_symbol(layout, &ActionPolynomial::from_poly(kinds.clone(), single), 0)?;
            let cl = symbol_to_classical_actions(layout, ecm, &sym, 0.0)?;
            rest.add_assign_scaled(&cl, -v);
        }
        rest.prune(tol);
        guard += 1;
        if guard > 64 {
            return Err(Error::TruncationExceeded { reason: "ordering inversion did not terminate".into() });
        }
    }
    Ok(ActionPolynomial::from_poly(kinds, op))
}

/// Classical expansions of `W(I^beta)` for all operator monomials up to
/// total degree `dmax`, as `(beta, classical polynomial)`.
pub fn ordering_table(layout: &BlockLayout, dmax: usize) -> Result<Vec<(Vec<u8>, CPoly)>> {
    let kinds = layout.action_kinds();
    let n = layout.n();
    let ecm = EigenCoordinateMap::new(layout);
    let mut out = Vec::new();
    let mut stack = vec![0u64];
    let mut seen = std::collections::BTreeSet::new();
    while let Some(m) = stack.pop() {
        if !seen.insert(m) {
            continue;
        }
        let mut single = CPoly::zero(n);
        single.add_term(m, C64::new(1.0, 0.0));
        let sym = operator_symbol(layout, &ActionPolynomial::from_poly(kinds.clone(), single), 0)?;
        let mut cl = symbol_to_classical_actions(layout, &ecm, &sym, 0.0)?;
        cl.prune(1e-14);
        out.push((super::symbol::mono_unpack(m, n), cl));
        if super::symbol::mono_degree(m) < dmax {
            for j in 0..n {
                stack.push(mono_set(m, j, mono_get(m, j) + 1));
            }
        }
    }
    out.sort_by(|a, b| a.0.iter().sum::<u8>().cmp(&b.0.iter().sum::<u8>()).then(a.0.cmp(&b.0)));
    Ok(out)
}
