//! Regrouping of the `f_j` into the square-root coefficients `p_k` and the
//! shifted coefficients `p~_k`.
//!
//! `p_k = L^{-1} [t^{k+1}] sum_{r >= 1} C(1/2, r) (L^2 sum_j f_j t^{j+2})^r`
//! and `p~_v = sum_{k + r = v} C(-k, r) p_k H^r` with `H` the model
//! Hamiltonian in the actions.

use num_complex::Complex64 as C64;

use super::NormalFormResult;
use crate::floquet::quadratic_hamiltonian;
use crate::weyl::{ActionPolynomial, CPoly};

pub fn gen_binom(a: f64, r: usize) -> f64 {
    (0..r).fold(1.0, |acc, i| acc * (a - i as f64) / (i + 1) as f64)
}

/// Truncated product of `t`-series with polynomial coefficients.
fn series_mul(a: &[CPoly], b: &[CPoly], top: usize) -> Vec<CPoly> {
    let nv = a[0].nvars();
    let mut out = vec![CPoly::zero(nv); top + 1];
    for (i, ai) in a.iter().enumerate() {
        if ai.is_zero() {
            continue;
        }
        for (j, bj) in b.iter().enumerate() {
            if i + j > top || bj.is_zero() {
                continue;
            }
            out[i + j] = out[i + j].add(&ai.mul(bj));
        }
    }
    out
}

/// `p_1 .. p_{kmax+1}` from `f_0 .. f_kmax`.
pub fn square_root_coefficients(f: &[CPoly], l: f64, nvars: usize) -> Vec<CPoly> {
    let kmax = f.len().saturating_sub(1);
    let top = kmax + 2;
    let mut base = vec![CPoly::zero(nvars); top + 1];
    for (j, fj) in f.iter().enumerate() {
        if j + 2 <= top {
            base[j + 2] = fj.scale(C64::new(l * l, 0.0));
        }
    }
    let mut acc = vec![CPoly::zero(nvars); top + 1];
    let mut pw = base.clone();
    let mut r = 1;
    while 2 * r <= top {
        let c = C64::new(gen_binom(0.5, r), 0.0);
        for (t, p) in pw.iter().enumerate() {
            acc[t] = acc[t].add(&p.scale(c));
        }
        pw = series_mul(&pw, &base, top);
        r += 1;
    }
    (1..=kmax + 1).map(|k| acc[k + 1].scale(C64::new(1.0 / l, 0.0))).collect()
}

/// `p~_v`, `v = 1..=p.len()`.
pub fn shifted_coefficients(p: &[CPoly], h: &CPoly) -> Vec<CPoly> {
    let nv = h.nvars();
    let mut hp = vec![CPoly::constant(nv, C64::new(1.0, 0.0))];
    for r in 1..p.len() {
        let next = hp[r - 1].mul(h);
        hp.push(next);
    }
    (1..=p.len())
        .map(|v| {
            let mut acc = CPoly::zero(nv);
            for k in 1..=v {
                let r = v - k;
                let c = gen_binom(-(k as f64), r);
                acc = acc.add(&p[k - 1].mul(&hp[r]).scale(C64::new(c, 0.0)));
            }
            acc
        })
        .collect()
}

pub fn regroup_homogeneous(nf: &mut NormalFormResult) {
    let layout = nf.floquet.layout();
    let kinds = layout.action_kinds();
    let nv = kinds.len();
    let fpolys: Vec<CPoly> = nf.f.iter().map(|a| a.poly.clone()).collect();
    let mut p = square_root_coefficients(&fpolys, nf.l, nv);
    for q in p.iter_mut() {
        q.prune(1e-15 * q.max_abs().max(1.0));
    }
    let h = quadratic_hamiltonian(&nf.floquet).poly;
    let pt = shifted_coefficients(&p, &h);
    nf.p = p.into_iter().map(|q| ActionPolynomial::from_poly(kinds.clone(), q)).collect();
    nf.p_tilde = pt.into_iter().map(|q| ActionPolynomial::from_poly(kinds.clone(), q)).collect();
}

/// Splits an action polynomial into homogeneous parts of degree `0..=d`.
pub fn homogeneous_parts(a: &ActionPolynomial) -> Vec<ActionPolynomial> {
    let d = a.degree().unwrap_or(0);
    (0..=d).map(|j| ActionPolynomial::from_poly(a.kinds.clone(), a.poly.homogeneous_part(j))).collect()
}
