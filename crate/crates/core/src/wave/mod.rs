//! Wave invariants from the regrouped normal form.
//!
//! The character factorizes over action slots as
//! `T = prod_j e^{phi_j / 2} u_j`, `u_j = (1 - e^{theta_j})^{-1}`, with
//! `theta` the slot exponent (`i alpha`, `lambda`, `mu +- i nu`). Derivative
//! polynomials are written in `d/d theta_j`; on the u-calculus
//! `d u = u^2 - u` and `d e^{phi/2} = e^{phi/2} / 2`.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::birkhoff::NormalFormResult;
use crate::error::{Error, Result};
use crate::floquet::{quadratic_hamiltonian, FloquetClassification};
use crate::weyl::symbol::mono_get;
use crate::weyl::{ActionKind, ActionPolynomial, CPoly};

/// How action operators become derivatives in the exponents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Convention {
    /// `D = -i d` for every exponent (`D_alpha`, `D_lambda`, `D_mu`, `D_nu`).
    #[default]
    UniformD,
    /// `D_alpha`, `D_nu` but plain `d_lambda`, `d_mu`.
    Paper,
}

impl Convention {
    /// Factor `c` in `I^h -> c d_theta` and `I^R -> c (d_+ + d_-)`.
    fn real_rate_factor(&self) -> C64 {
        match self {
            Convention::UniformD => C64::new(0.0, -1.0),
            Convention::Paper => C64::new(1.0, 0.0),
        }
    }

    /// Linear forms in the slot derivatives, one per action kind.
    pub fn action_forms(&self, kinds: &[ActionKind]) -> Vec<CPoly> {
        let n = kinds.len();
        let c = self.real_rate_factor();
        kinds
            .iter()
            .enumerate()
            .map(|(j, k)| match k {
                ActionKind::Elliptic => CPoly::var(n, j),
                ActionKind::Hyperbolic => CPoly::var(n, j).scale(c),
                ActionKind::LoxRe => CPoly::var(n, j).add(&CPoly::var(n, j + 1)).scale(c),
                ActionKind::LoxIm => CPoly::var(n, j - 1).sub(&CPoly::var(n, j)),
            })
            .collect()
    }

    /// Inverse forms: slot derivative as a linear form in the actions.
    pub fn derivative_forms(&self, kinds: &[ActionKind]) -> Vec<CPoly> {
        let n = kinds.len();
        let c = self.real_rate_factor();
        let half = C64::new(0.5, 0.0);
        kinds
            .iter()
            .enumerate()
            .map(|(j, k)| match k {
                ActionKind::Elliptic => CPoly::var(n, j),
                ActionKind::Hyperbolic => CPoly::var(n, j).scale(1.0 / c),
                // d_+ = (I^R / c + I^I) / 2, d_- = (I^R / c - I^I) / 2
                ActionKind::LoxRe => CPoly::var(n, j).scale(1.0 / c).add(&CPoly::var(n, j + 1)).scale(half),
                ActionKind::LoxIm => CPoly::var(n, j - 1).scale(1.0 / c).sub(&CPoly::var(n, j)).scale(half),
            })
            .collect()
    }
}

/// Constant-coefficient polynomial in the slot derivatives `d/d theta_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativePolynomial {
    pub k: usize,
    pub poly: CPoly,
}

impl DerivativePolynomial {
    pub fn degree(&self) -> usize {
        self.poly.degree().unwrap_or(0)
    }

    /// Substitutes `d -> d + 1/2` in every slot.
    pub fn shifted(&self, by: f64) -> DerivativePolynomial {
        let n = self.poly.nvars();
        let forms: Vec<CPoly> =
            (0..n).map(|j| CPoly::var(n, j).add(&CPoly::constant(n, C64::new(by, 0.0)))).collect();
        DerivativePolynomial { k: self.k, poly: self.poly.substitute(&forms) }
    }
}

/// Exponents entering the character, one pair per action slot.
#[derive(Debug, Clone, PartialEq)]
pub struct CharacterData {
    pub theta: Vec<C64>,
    pub phi: Vec<C64>,
}

impl CharacterData {
    pub fn new(f: &FloquetClassification) -> Self {
        let (theta, phi) = f.theta_vars().into_iter().unzip();
        CharacterData { theta, phi }
    }

    pub fn n(&self) -> usize {
        self.theta.len()
    }

    /// Data of the `N`-th iterate.
    pub fn iterate(&self, n: i64) -> Self {
        let s = n as f64;
        CharacterData { theta: self.theta.iter().map(|t| t * s).collect(), phi: self.phi.iter().map(|p| p * s).collect() }
    }

    pub fn u(&self) -> Vec<C64> {
        self.theta
            .iter()
            .map(|t| {
                if t.re > 0.0 {
                    let e = (-t).exp();
                    -e / (1.0 - e)
                } else {
                    1.0 / (1.0 - t.exp())
                }
            })
            .collect()
    }

    pub fn prefactor(&self) -> C64 {
        (self.phi.iter().sum::<C64>() * 0.5).exp()
    }

    /// `prod_j e^{phi_j/2} / (1 - e^{theta_j})`.
    pub fn value(&self) -> C64 {
        self.prefactor() * self.u().iter().product::<C64>()
    }

    pub fn min_divisor(&self) -> f64 {
        self.theta.iter().map(|t| (1.0 - t.exp()).norm()).fold(f64::INFINITY, f64::min)
    }
}

/// Coefficients of `d^a u` as a polynomial in `u` (index = power).
pub fn u_derivative(a: usize) -> Vec<f64> {
    let mut p = vec![0.0, 1.0];
    for _ in 0..a {
        let mut next = vec![0.0; p.len() + 1];
        for (m, c) in p.iter().enumerate() {
            if m == 0 || *c == 0.0 {
                continue;
            }
            // d u^m = m (u^{m+1} - u^m)
            next[m + 1] += m as f64 * c;
            next[m] -= m as f64 * c;
        }
        p = next;
    }
    p
}

fn eval_real_poly(c: &[f64], u: C64) -> C64 {
    c.iter().rev().fold(C64::new(0.0, 0.0), |acc, v| acc * u + v)
}

/// `F(d) T`, or with `shift` the u-part `F(d + 1/2) prod u_j` without the
/// exponential prefactor.
pub fn apply_derivatives(fp: &DerivativePolynomial, data: &CharacterData, shift: bool) -> C64 {
    let u = data.u();
    let n = data.n();
    let poly = fp.shifted(0.5).poly;
    let mut cache: Vec<Vec<Vec<f64>>> = vec![Vec::new(); n];
    let mut acc = C64::new(0.0, 0.0);
    for (m, c) in poly.raw_terms() {
        let mut term = c;
        for j in 0..n {
            let a = mono_get(m, j) as usize;
            while cache[j].len() <= a {
                let next = u_derivative(cache[j].len());
                cache[j].push(next);
            }
            term *= eval_real_poly(&cache[j][a], u[j]);
        }
        acc += term;
    }
    if shift {
        acc
    } else {
        acc * data.prefactor()
    }
}

fn series_mul(a: &[CPoly], b: &[CPoly], top: usize) -> Vec<CPoly> {
    let nv = a[0].nvars();
    let mut out = vec![CPoly::zero(nv); top + 1];
    for (i, ai) in a.iter().enumerate() {
        if ai.is_zero() {
            continue;
        }
        for (j, bj) in b.iter().enumerate() {
            if i + j <= top && !bj.is_zero() {
                out[i + j] = out[i + j].add(&ai.mul(bj));
            }
        }
    }
    out
}

/// `F_{k,-1}` in the action variables:
/// `(2 pi / L)^k [x^{k+1}] (1 + H x / 2pi + (L / 2pi) x P)^k exp(i L P)`,
/// `P = sum_{v <= k+1} p~_v (x / 2pi)^v`.
pub fn build_f_actions(k: usize, p_tilde: &[CPoly], h: &CPoly, l: f64) -> Result<CPoly> {
    if p_tilde.len() < k + 1 {
        return Err(Error::MissingNormalForm { needed: p_tilde.len() + 1 });
    }
    let nv = h.nvars();
    let top = k + 1;
    let tau = 2.0 * PI;
    let mut big_p = vec![CPoly::zero(nv); top + 1];
    for v in 1..=top {
        big_p[v] = p_tilde[v - 1].scale(C64::new(tau.powi(-(v as i32)), 0.0));
    }
    let mut base = vec![CPoly::zero(nv); top + 1];
    base[0] = CPoly::constant(nv, C64::new(1.0, 0.0));
    base[1] = h.scale(C64::new(1.0 / tau, 0.0));
    for v in 1..top {
        base[v + 1] = base[v + 1].add(&big_p[v].scale(C64::new(l / tau, 0.0)));
    }
    let mut pw = vec![CPoly::zero(nv); top + 1];
    pw[0] = CPoly::constant(nv, C64::new(1.0, 0.0));
    for _ in 0..k {
        pw = series_mul(&pw, &base, top);
    }
    // exp(i L P), P = O(x)
    let ilp: Vec<CPoly> = big_p.iter().map(|p| p.scale(C64::new(0.0, l))).collect();
    let mut ex = vec![CPoly::zero(nv); top + 1];
    ex[0] = CPoly::constant(nv, C64::new(1.0, 0.0));
    let mut term = ex.clone();
    for r in 1..=top {
        term = series_mul(&term, &ilp, top);
        for (t, c) in term.iter().enumerate() {
            ex[t] = ex[t].add(&c.scale(C64::new(1.0 / (1..=r).product::<usize>() as f64, 0.0)));
        }
    }
    let full = series_mul(&pw, &ex, top);
    Ok(full[top].scale(C64::new((tau / l).powi(k as i32), 0.0)))
}

/// Coefficient with which `p~_{k+1}` enters `F_{k,-1}`.
pub fn leading_factor(k: usize, l: f64) -> C64 {
    C64::new(0.0, l.powi(1 - k as i32) / (2.0 * PI))
}

/// Substitutes derivative forms for the actions.
pub fn actions_to_derivatives(a: &CPoly, kinds: &[ActionKind], conv: Convention) -> CPoly {
    a.substitute(&conv.action_forms(kinds))
}

pub fn derivatives_to_actions(d: &CPoly, kinds: &[ActionKind], conv: Convention) -> CPoly {
    d.substitute(&conv.derivative_forms(kinds))
}

/// `F_{k,-1}` from explicit `p~` data.
pub fn build_f_from(
    k: usize,
    p_tilde: &[ActionPolynomial],
    f: &FloquetClassification,
    l: f64,
    conv: Convention,
) -> Result<DerivativePolynomial> {
    let kinds = f.layout().action_kinds();
    let h = quadratic_hamiltonian(f).poly;
    let pt: Vec<CPoly> = p_tilde.iter().map(|p| p.poly.clone()).collect();
    let fa = build_f_actions(k, &pt, &h, l)?;
    let mut poly = actions_to_derivatives(&fa, &kinds, conv);
    poly.prune(1e-300);
    Ok(DerivativePolynomial { k, poly })
}

pub fn build_f(k: usize, nf: &NormalFormResult, conv: Convention) -> Result<DerivativePolynomial> {
    if nf.p_tilde.len() < k + 1 {
        return Err(Error::MissingNormalForm { needed: k + 1 });
    }
    build_f_from(k, &nf.p_tilde, &nf.floquet, nf.l, conv)
}

/// Step balancing roundoff against the `h^4` Richardson error for a
/// derivative polynomial of the given degree.
pub fn fd_step(degree: usize) -> f64 {
    f64::EPSILON.powf(1.0 / (degree as f64 + 4.0))
}

/// `F(d) T` by tensor central differences in the exponents with one
/// Richardson step; `phi` moves with `theta`.
pub fn finite_difference(fp: &DerivativePolynomial, data: &CharacterData, h: f64) -> C64 {
    let stencil = |step: f64| -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for (m, c) in fp.poly.raw_terms() {
            let orders: Vec<usize> = (0..data.n()).map(|j| mono_get(m, j) as usize).collect();
            let mut idx = vec![0usize; data.n()];
            loop {
                let mut w = 1.0;
                let mut d = data.clone();
                for (j, (&a, &i)) in orders.iter().zip(&idx).enumerate() {
                    let binom = (0..i).fold(1.0, |b, t| b * (a - t) as f64 / (t + 1) as f64);
                    w *= binom * if i % 2 == 0 { 1.0 } else { -1.0 } / step.powi(a as i32);
                    let shift = (a as f64 / 2.0 - i as f64) * step;
                    d.theta[j] += shift;
                    d.phi[j] += shift;
                }
                acc += c * w * d.value();
                let mut j = 0;
                while j < idx.len() {
                    idx[j] += 1;
                    if idx[j] <= orders[j] {
                        break;
                    }
                    idx[j] = 0;
                    j += 1;
                }
                if j == idx.len() {
                    break;
                }
            }
        }
        acc
    };
    let coarse = stencil(h);
    let fine = stencil(h / 2.0);
    (4.0 * fine - coarse) / 3.0
}

/// A wave invariant; the phase is defined modulo quarter turns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WaveInvariant {
    pub k: usize,
    pub value: C64,
    pub phase_modulo_quarter_turn: bool,
}

pub fn wave_invariant(k: usize, nf: &NormalFormResult, conv: Convention) -> Result<WaveInvariant> {
    let fp = build_f(k, nf, conv)?;
    let data = CharacterData::new(&nf.floquet);
    Ok(WaveInvariant { k, value: apply_derivatives(&fp, &data, false), phase_modulo_quarter_turn: true })
}

/// `F(d) T` at the iterates `N` (negative `N` allowed, zero rejected).
pub fn iterate_values_from(fp: &DerivativePolynomial, data: &CharacterData, ns: &[i64], div_tol: f64) -> Result<Vec<C64>> {
    ns.iter()
        .map(|&n| {
            if n == 0 {
                return Err(Error::Invalid("iterate index must be nonzero".into()));
            }
            let d = data.iterate(n);
            let div = d.min_divisor();
            if div < div_tol {
                return Err(Error::ResonantIterate { n, divisor: div });
            }
            Ok(apply_derivatives(fp, &d, false))
        })
        .collect()
}

pub fn iterate_values(k: usize, nf: &NormalFormResult, ns: &[i64], conv: Convention, div_tol: f64) -> Result<Vec<C64>> {
    let fp = build_f(k, nf, conv)?;
    iterate_values_from(&fp, &CharacterData::new(&nf.floquet), ns, div_tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::floquet::{character, BlockData};

    fn elliptic(alpha: f64) -> FloquetClassification {
        FloquetClassification::from_blocks(vec![BlockData::Elliptic { alpha, krein: 1 }])
    }

    #[test]
    fn u_calculus_identity() {
        assert_eq!(u_derivative(1), vec![0.0, -1.0, 1.0]);
        // d^2 u = 2u^3 - 3u^2 + u
        assert_eq!(u_derivative(2), vec![0.0, 1.0, -3.0, 2.0]);
    }

    #[test]
    fn constant_polynomial_gives_character() {
        for f in [
            elliptic(1.1),
            FloquetClassification::from_blocks(vec![BlockData::Hyperbolic { lambda: 0.7, negative: false }]),
            FloquetClassification::from_blocks(vec![BlockData::Loxodromic { mu: 0.3, nu: 0.9 }]),
        ] {
            let data = CharacterData::new(&f);
            let fp = DerivativePolynomial { k: 0, poly: CPoly::constant(data.n(), C64::new(2.0, 0.0)) };
            let v = apply_derivatives(&fp, &data, false);
            assert!((v.norm() - 2.0 * character(&f).value.norm()).abs() < 1e-12);
        }
    }

    #[test]
    fn first_derivative_matches_difference_quotient() {
        let alpha: f64 = 1.1;
        let t = |a: f64| C64::new(0.0, a / 2.0).exp() / (1.0 - C64::new(0.0, a).exp());
        let h = 1e-5;
        // d/d(i alpha) = -i d/d alpha
        let fd = (t(alpha + h) - t(alpha - h)) / (2.0 * h) * C64::new(0.0, -1.0);
        let fp = DerivativePolynomial { k: 0, poly: CPoly::var(1, 0) };
        let v = apply_derivatives(&fp, &CharacterData::new(&elliptic(alpha)), false);
        assert!((v - fd).norm() < 1e-8 * fd.norm());
    }

    #[test]
    fn order_zero_is_scaled_first_coefficient() {
        let f = elliptic(0.8);
        let kinds = f.layout().action_kinds();
        let p1 = CPoly::var(1, 0).mul(&CPoly::var(1, 0)).scale(C64::new(0.3, 0.0));
        let fp = build_f_from(0, &[ActionPolynomial::from_poly(kinds, p1.clone())], &f, 1.7, Convention::UniformD).unwrap();
        assert!(fp.poly.sub(&p1.scale(leading_factor(0, 1.7))).max_abs() < 1e-15);
    }

    #[test]
    fn highest_coefficient_enters_linearly() {
        let f = FloquetClassification::from_blocks(vec![BlockData::Hyperbolic { lambda: 0.6, negative: false }]);
        let h = quadratic_hamiltonian(&f).poly;
        let l = 1.3;
        let p1 = CPoly::var(1, 0).mul(&CPoly::var(1, 0));
        let p2 = CPoly::var(1, 0).pow(3).scale(C64::new(0.5, 0.0));
        let with = build_f_actions(1, &[p1.clone(), p2.clone()], &h, l).unwrap();
        let without = build_f_actions(1, &[p1, CPoly::zero(1)], &h, l).unwrap();
        assert!(with.sub(&without).sub(&p2.scale(leading_factor(1, l))).max_abs() < 1e-14);
    }

    #[test]
    fn coefficient_extraction_matches_contour_integral() {
        // Scalar stand-ins for commuting actions; [x^{k+1}] by the trapezoid rule on |x| = r.
        let (l, h) = (1.3f64, 0.4f64);
        let pt = [0.7f64, -0.2, 0.35];
        let tau = 2.0 * PI;
        for k in 0..3usize {
            let g = |x: C64| -> C64 {
                let p: C64 = (0..=k).map(|v| pt[v] * (x / tau).powi(v as i32 + 1)).sum();
                (1.0 + h * x / tau + l / tau * x * p).powi(k as i32) * (C64::new(0.0, l) * p).exp()
            };
            let (m, r) = (512, 0.8);
            let mut acc = C64::new(0.0, 0.0);
            for j in 0..m {
                let x = C64::from_polar(r, tau * j as f64 / m as f64);
                acc += g(x) / x.powi(k as i32 + 1) / m as f64;
            }
            let expect = acc * (tau / l).powi(k as i32);
            let p: Vec<CPoly> = pt.iter().map(|v| CPoly::constant(1, C64::new(*v, 0.0))).collect();
            let got = build_f_actions(k, &p, &CPoly::constant(1, C64::new(h, 0.0)), l).unwrap().coeff(&[0]);
            assert!((got - expect).norm() < 1e-12 * expect.norm().max(1.0), "k={k}: {got} vs {expect}");
        }
    }

    #[test]
    fn finite_differences_agree_on_mixed_monomial() {
        let f = FloquetClassification::from_blocks(vec![
            BlockData::Elliptic { alpha: 0.9, krein: 1 },
            BlockData::Hyperbolic { lambda: 0.5, negative: true },
        ]);
        let data = CharacterData::new(&f);
        let poly = CPoly::var(2, 0).pow(2).mul(&CPoly::var(2, 1)).add(&CPoly::var(2, 1).scale(C64::new(0.0, 2.0)));
        let fp = DerivativePolynomial { k: 0, poly };
        let exact = apply_derivatives(&fp, &data, false);
        let fd = finite_difference(&fp, &data, 1e-2);
        assert!((exact - fd).norm() < 1e-6 * exact.norm(), "{exact} vs {fd}");
    }

    #[test]
    fn iterates_scale_exponents() {
        let f = elliptic(1.0);
        let data = CharacterData::new(&f);
        let fp = DerivativePolynomial { k: 0, poly: CPoly::var(1, 0) };
        let vals = iterate_values_from(&fp, &data, &[1, 2, 3, 4], 1e-8).unwrap();
        for (i, v) in vals.iter().enumerate() {
            let direct = apply_derivatives(&fp, &CharacterData::new(&elliptic(1.0 * (i + 1) as f64)), false);
            assert!((v - direct).norm() < 1e-12);
        }
        let res = iterate_values_from(&fp, &CharacterData::new(&elliptic(PI / 2.0)), &[4], 1e-8);
        assert!(matches!(res, Err(Error::ResonantIterate { n: 4, .. })));
    }

    #[test]
    fn conventions_are_mutually_inverse() {
        let kinds = vec![ActionKind::Elliptic, ActionKind::Hyperbolic, ActionKind::LoxRe, ActionKind::LoxIm];
        for conv in [Convention::UniformD, Convention::Paper] {
            let a = CPoly::var(4, 0).mul(&CPoly::var(4, 2)).add(&CPoly::var(4, 1).mul(&CPoly::var(4, 3)).mul(&CPoly::var(4, 3)));
            let back = derivatives_to_actions(&actions_to_derivatives(&a, &kinds, conv), &kinds, conv);
            assert!(back.sub(&a).max_abs() < 1e-15);
        }
    }
}
