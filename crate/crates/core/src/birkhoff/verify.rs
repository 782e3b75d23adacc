//! Independent check of a normal form: builds the full intertwiner
//! `V = prod_k exp(i h^{k/2} Q_k)` as an `h`-series of operator products
//! and compares `P V` with `V P'` order by order.

use num_complex::Complex64 as C64;

use super::NormalFormResult;
use crate::error::Result;
use crate::laplacian::SemiclassicalExpansion;
use crate::weyl::action::operator_symbol;
use crate::weyl::{Op, OpAlgebra, SymbolPolynomial};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerificationReport {
    /// `max_t |(P V - V P')_t| / max(1, |(P V)_t|)`.
    pub conjugation_residual: f64,
    /// Largest deviation of an `R^0` part of `P'` from `W(f_j)` (or zero).
    pub normal_form_residual: f64,
}

fn series_mul(alg: &OpAlgebra, a: &[Op], b: &[Op], top: usize) -> Result<Vec<Op>> {
    let (n, cap) = (a[0].n(), a[0].cap());
    let mut out = vec![Op::zero(n, cap); top + 1];
    for (i, ai) in a.iter().enumerate() {
        if ai.is_zero() {
            continue;
        }
        for (j, bj) in b.iter().enumerate() {
            if i + j > top || bj.is_zero() {
                continue;
            }
            let p = alg.mul(ai, bj)?;
            out[i + j] = out[i + j].add(&p);
        }
    }
    Ok(out)
}

/// `exp(i h^{k/2} Q)` truncated at half-order `top`.
fn exp_series(alg: &OpAlgebra, q: &SymbolPolynomial, k: usize, top: usize) -> Result<Vec<Op>> {
    let (n, cap) = (q.n(), q.cap());
    let mut out = vec![Op::zero(n, cap); top + 1];
    out[0] = Op::from_symbol(SymbolPolynomial::constant(n, cap, C64::new(1.0, 0.0)));
    let qop = Op::from_symbol(q.clone());
    let mut pw = out[0].clone();
    let mut coef = C64::new(1.0, 0.0);
    let mut j = 1;
    while j * k <= top {
        pw = alg.mul(&pw, &qop)?;
        coef *= C64::new(0.0, 1.0) / j as f64;
        out[j * k] = pw.scale(coef);
        j += 1;
    }
    Ok(out)
}

pub fn verify_normal_form(nf: &NormalFormResult, model: &SemiclassicalExpansion) -> Result<VerificationReport> {
    let alg = model.algebra();
    let top = nf.order;
    let (n, cap) = (model.n, model.cap());
    // V_b with b <= top - 2 suffices: P_0 is a constant and P_1 vanishes.
    let vtop = top - 2;
    let mut v = vec![Op::zero(n, cap); vtop + 1];
    v[0] = Op::from_symbol(SymbolPolynomial::constant(n, cap, C64::new(1.0, 0.0)));
    for step in &nf.steps {
        if step.q.is_zero() || step.k > vtop {
            continue;
        }
        let e = exp_series(&alg, &step.q, step.k, vtop)?;
        v = series_mul(&alg, &v, &e, vtop)?;
    }
    let p = &model.terms[..=top];
    let pp = &nf.normalized[..=top];
    let mut conj = 0.0f64;
    for t in 2..=top {
        let mut lhs = Op::zero(n, cap);
        let mut rhs = Op::zero(n, cap);
        for m in 2..=t {
            let b = t - m;
            if b > vtop {
                continue;
            }
            if !p[m].is_zero() && !v[b].is_zero() {
                lhs = lhs.add(&alg.mul(&p[m], &v[b])?);
            }
            if !pp[m].is_zero() && !v[b].is_zero() {
                rhs = rhs.add(&alg.mul(&v[b], &pp[m])?);
            }
        }
        let r = lhs.sub(&rhs).max_abs() / lhs.max_abs().max(1.0);
        conj = conj.max(r);
    }
    let layout = nf.floquet.layout();
    let mut nfres = 0.0f64;
    for m in 3..=top {
        let target = if m % 2 == 0 {
            operator_symbol(&layout, &nf.f[(m - 4) / 2], cap)?
        } else {
            SymbolPolynomial::zero(n, cap)
        };
        let d = pp[m].r0();
        nfres = nfres.max(d.sub(&target).max_abs() / d.max_abs().max(1.0));
    }
    Ok(VerificationReport { conjugation_residual: conj, normal_form_residual: nfres })
}
