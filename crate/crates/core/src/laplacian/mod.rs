//! Semiclassical expansion of the rescaled Laplacian near the geodesic and
//! its conjugation to the model.
//!
//! Term `m` of the expansion multiplies `h^{-2 + m/2}`. Terms are operators
//! polynomial in the longitudinal generator with weightless symbol
//! coefficients in `(x, xi)`, `x = y / L`. Before conjugation the generator
//! is `D_s`, afterwards `R = D_s + H_model / L`.

pub mod jet;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

pub use jet::{half_density_reduce, JetScope, MetricJet};

use crate::error::{Error, Result};
use crate::floquet::{self, FloquetClassification};
use crate::jacobi::WronskianFrame;
use crate::weyl::symbol::{mono_get, mono_set};
use crate::weyl::{Op, OpAlgebra, SymbolPolynomial, Trig};

pub const FRAME_TOL: f64 = 1e-7;

#[derive(Debug, Clone)]
pub struct SemiclassicalExpansion {
    pub n: usize,
    pub l: f64,
    /// `terms[m]` is the coefficient of `h^{-2 + m/2}`.
    pub terms: Vec<Op>,
    /// Quadratic part of the generator: zero before conjugation.
    pub hhat: SymbolPolynomial,
    pub conjugated: bool,
    pub scope: JetScope,
}

impl SemiclassicalExpansion {
    pub fn order(&self) -> usize {
        self.terms.len() - 1
    }

    pub fn algebra(&self) -> OpAlgebra {
        OpAlgebra::new(self.l, self.hhat.clone())
    }

    /// Exponent of `h` carried by term `m`.
    pub fn h_exponent(m: usize) -> f64 {
        -2.0 + m as f64 / 2.0
    }

    /// Metric-scaling weight shared by every term.
    pub fn weight() -> i32 {
        -2
    }

    pub fn cap(&self) -> usize {
        self.terms[0].cap()
    }
}

/// `sum_d L^{d + shift} p_d` over homogeneous parts.
fn weightless(p: &SymbolPolynomial, l: f64, shift: i32) -> Vec<(usize, SymbolPolynomial)> {
    let mut by_degree: Vec<(usize, SymbolPolynomial)> = Vec::new();
    let top = p.degree().unwrap_or(0);
    for d in 0..=top {
        let h = p.homogeneous_part(d);
        if !h.is_zero() {
            by_degree.push((d, h.scale_real(l.powi(d as i32 + shift))));
        }
    }
    by_degree
}

fn push(terms: &mut [Op], m: usize, r: usize, a: &SymbolPolynomial, s: C64) {
    if m < terms.len() && !a.is_zero() {
        terms[m].add_assign_scaled(&Op::term(a.clone(), r), s);
    }
}

/// Expands the unit-density jets to order `m_max`.
pub fn rescale_expand(jets: &MetricJet, m_max: usize) -> Result<SemiclassicalExpansion> {
    let (n, l) = (jets.n, jets.l);
    let cap = jets.goo.cap();
    if jets.scope == JetScope::Full && jets.order < m_max {
        return Err(Error::InsufficientJetOrder { have: jets.order, need: m_max });
    }
    if !jets.is_unit_density() {
        return Err(Error::Invalid("expansion expects half-density reduced jets".into()));
    }
    let one = C64::new(1.0, 0.0);
    let i = C64::new(0.0, 1.0);
    let mut terms = vec![Op::zero(n, cap); m_max + 1];
    for (d, g) in weightless(&jets.goo, l, 0) {
        push(&mut terms, d, 0, &g, C64::new(l.powi(-2), 0.0));
        push(&mut terms, d + 2, 1, &g, C64::new(2.0 / l, 0.0));
        push(&mut terms, d + 4, 2, &g, one);
    }
    for (d, g) in weightless(&jets.gamma_o, l, 0) {
        push(&mut terms, d + 2, 0, &g, -i / l);
        push(&mut terms, d + 4, 1, &g, -i);
    }
    for a in 0..n {
        for b in 0..n {
            let xi2 = SymbolPolynomial::var(n, cap, n + a).mul(&SymbolPolynomial::var(n, cap, n + b));
            for (d, g) in weightless(&jets.gij[a][b], l, -2) {
                push(&mut terms, d + 2, 0, &g.moyal(&xi2)?, one);
            }
        }
        let xi = SymbolPolynomial::var(n, cap, n + a);
        for (d, g) in weightless(&jets.gamma_i[a], l, -1) {
            push(&mut terms, d + 3, 0, &g.moyal(&xi)?, -i);
        }
    }
    for (d, g) in weightless(&jets.sigma, l, 0) {
        push(&mut terms, d + 4, 0, &g, -one);
    }
    if jets.scope == JetScope::Linearized {
        for t in terms.iter_mut().skip(3) {
            *t = Op::zero(n, cap);
        }
    }
    for t in terms.iter_mut() {
        t.prune(0.0);
    }
    Ok(SemiclassicalExpansion {
        n,
        l,
        terms,
        hhat: SymbolPolynomial::zero(n, cap),
        conjugated: false,
        scope: jets.scope,
    })
}

/// `z^T S z / 2` for a symmetric real matrix.
pub fn quadratic_symbol(n: usize, cap: usize, s: &DMatrix<f64>) -> SymbolPolynomial {
    let mut out = SymbolPolynomial::zero(n, cap);
    for a in 0..2 * n {
        for b in 0..2 * n {
            if s[(a, b)] != 0.0 {
                let m = mono_set(mono_set(0, a, 1), b, mono_get(mono_set(0, a, 1), b) + 1);
                out.add_term(m, Trig::real(0.5 * s[(a, b)]));
            }
        }
    }
    out
}

/// Hessian of the quadratic part, entrywise periodic.
pub fn hessian(q: &SymbolPolynomial) -> Vec<Vec<Trig>> {
    let n = q.n();
    let d = 2 * n;
    let mut s = vec![vec![Trig::zero(); d]; d];
    for (m, t) in q.homogeneous_part(2).raw_terms() {
        let slots: Vec<usize> = (0..d).flat_map(|k| std::iter::repeat(k).take(mono_get(m, k) as usize)).collect();
        let (a, b) = (slots[0], slots[1]);
        if a == b {
            s[a][a] = t.scale(C64::new(2.0, 0.0));
        } else {
            s[a][b] = t.clone();
            s[b][a] = t.clone();
        }
    }
    s
}

fn eval_matrix(m: &[Vec<Trig>], s: f64, l: f64) -> DMatrix<f64> {
    let d = m.len();
    DMatrix::from_fn(d, d, |a, b| m[a][b].eval(s, l).re)
}

/// Residual of the frame identity `W^T S_loc W + J W^{-1} W' = S_model / L`.
pub fn frame_residual(h_loc: &SymbolPolynomial, frame: &WronskianFrame, s_model: &DMatrix<f64>, samples: usize) -> f64 {
    let n = frame.n;
    let l = frame.l;
    let j = floquet::j_matrix(n);
    let s_loc = hessian(h_loc);
    let w_hat = &frame.w_hat;
    let w_der: Vec<Vec<Trig>> = w_hat.iter().map(|r| r.iter().map(|t| t.deriv(l)).collect()).collect();
    let target = s_model / l;
    let mut worst = 0.0f64;
    for g in 0..samples {
        let s = l * g as f64 / samples as f64;
        let w = eval_matrix(w_hat, s, l);
        let wd = eval_matrix(&w_der, s, l);
        let winv = -&j * w.transpose() * &j;
        let r = w.transpose() * eval_matrix(&s_loc, s, l) * &w + &j * winv * wd - &target;
        worst = worst.max(r.amax());
    }
    worst
}

/// Conjugates by the metaplectic lift of the periodic frame and untwists
/// the mapping cylinder, producing the expansion in the model generator.
pub fn conjugate_to_model(
    exp: &SemiclassicalExpansion,
    frame: &WronskianFrame,
    f: &FloquetClassification,
) -> Result<SemiclassicalExpansion> {
    let (n, l) = (exp.n, exp.l);
    let cap = exp.cap();
    if exp.conjugated {
        return Err(Error::Invalid("expansion is already conjugated".into()));
    }
    if frame.n != n || f.n() != n {
        return Err(Error::DimensionMismatch { left: n, right: frame.n.min(f.n()) });
    }
    if exp.terms.len() < 3 {
        return Err(Error::InsufficientJetOrder { have: exp.terms.len().saturating_sub(1), need: 2 });
    }
    let t2 = &exp.terms[2];
    let gen = t2.coeff(1).sub(&SymbolPolynomial::constant(n, cap, C64::new(2.0 / l, 0.0)));
    if gen.max_abs() > 1e-12 || t2.r_degree() > 1 {
        return Err(Error::Invalid("principal transverse term is not of linearized form".into()));
    }
    let h_loc = t2.coeff(0).scale_real(l / 2.0);
    if h_loc.imag_defect() > 1e-12 || h_loc.sub(&h_loc.homogeneous_part(2)).max_abs() > 1e-12 {
        return Err(Error::Invalid("linearized term is not a real quadratic".into()));
    }
    let s_model = -floquet::j_matrix(n) * f.hamilton_matrix()?;
    let residual = frame_residual(&h_loc, frame, &s_model, frame.grid.len().max(16));
    if !(residual < FRAME_TOL) {
        return Err(Error::InconsistentFrame { residual });
    }
    let hhat = quadratic_symbol(n, cap, &s_model).scale_real(1.0 / l);
    let alg = OpAlgebra::new(l, hhat.clone());
    let w_hat: Vec<Vec<Trig>> = frame.w_hat.clone();
    // D_s -> R + p
    let p = h_loc.substitute_linear_periodic(&w_hat).scale_real(-1.0);
    let shifted = Op { coeffs: vec![p, SymbolPolynomial::constant(n, cap, C64::new(1.0, 0.0))] };
    let mut powers = vec![Op::from_symbol(SymbolPolynomial::constant(n, cap, C64::new(1.0, 0.0)))];
    let mut terms = Vec::with_capacity(exp.terms.len());
    for (m, t) in exp.terms.iter().enumerate() {
        let out = match m {
            0 | 1 => t.clone(),
            2 => Op::term(SymbolPolynomial::constant(n, cap, C64::new(2.0 / l, 0.0)), 1),
            _ => {
                let mut acc = Op::zero(n, cap);
                for (r, c) in t.coeffs.iter().enumerate() {
                    if c.is_zero() {
                        continue;
                    }
                    while powers.len() <= r {
                        let next = alg.mul(powers.last().unwrap(), &shifted)?;
                        powers.push(next);
                    }
                    let cw = Op::from_symbol(c.substitute_linear_periodic(&w_hat));
                    acc = acc.add(&alg.mul(&cw, &powers[r])?);
                }
                acc.prune(1e-15 * (1.0 + acc.max_abs()));
                acc
            }
        };
        terms.push(out);
    }
    Ok(SemiclassicalExpansion { n, l, terms, hhat, conjugated: true, scope: exp.scope })
}
