//! Operators polynomial in a first-order generator `R`, with symbol
//! coefficients written on the left: `sum_r a_r R^r`.
//!
//! The generator is `R = D_s + Hhat` with `D_s = -i d/ds` and `Hhat` a
//! quadratic symbol (zero gives plain `D_s`). Commuting `R` past a symbol
//! uses `R b = b R + delta(b)` with `delta(b) = -i b' + (Hhat * b - b * Hhat)`.

use num_complex::Complex64 as C64;

use super::symbol::SymbolPolynomial;
use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct Op {
    pub coeffs: Vec<SymbolPolynomial>,
}

impl Op {
    pub fn zero(n: usize, cap: usize) -> Self {
        Op { coeffs: vec![SymbolPolynomial::zero(n, cap)] }
    }

    pub fn from_symbol(a: SymbolPolynomial) -> Self {
        Op { coeffs: vec![a] }
    }

    /// `a R^r`.
    pub fn term(a: SymbolPolynomial, r: usize) -> Self {
        let (n, cap) = (a.n(), a.cap());
        let mut coeffs = vec![SymbolPolynomial::zero(n, cap); r + 1];
        coeffs[r] = a;
        Op { coeffs }
    }

    pub fn n(&self) -> usize {
        self.coeffs[0].n()
    }

    pub fn cap(&self) -> usize {
        self.coeffs[0].cap()
    }

    /// Coefficient of `R^r` (zero if absent).
    pub fn coeff(&self, r: usize) -> SymbolPolynomial {
        self.coeffs
            .get(r)
            .cloned()
            .unwrap_or_else(|| SymbolPolynomial::zero(self.n(), self.cap()))
    }

    pub fn r0(&self) -> &SymbolPolynomial {
        &self.coeffs[0]
    }

    pub fn r_degree(&self) -> usize {
        self.coeffs.iter().rposition(|c| !c.is_zero()).unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero())
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.max_abs()))
    }

    fn ensure(&mut self, r: usize) {
        let (n, cap) = (self.n(), self.cap());
        while self.coeffs.len() <= r {
            self.coeffs.push(SymbolPolynomial::zero(n, cap));
        }
    }

    fn normalize(&mut self) {
        while self.coeffs.len() > 1 && self.coeffs.last().map(|c| c.is_zero()).unwrap_or(false) {
            self.coeffs.pop();
        }
    }

    pub fn add_assign_scaled(&mut self, o: &Op, s: C64) {
        self.ensure(o.coeffs.len() - 1);
        for (r, c) in o.coeffs.iter().enumerate() {
            self.coeffs[r].add_assign_scaled(c, s);
        }
        self.normalize();
    }

    pub fn add(&self, o: &Op) -> Op {
        let mut out = self.clone();
        out.add_assign_scaled(o, C64::new(1.0, 0.0));
        out
    }

    pub fn sub(&self, o: &Op) -> Op {
        let mut out = self.clone();
        out.add_assign_scaled(o, C64::new(-1.0, 0.0));
        out
    }

    pub fn scale(&self, s: C64) -> Op {
        let mut out = Op { coeffs: self.coeffs.iter().map(|c| c.scale(s)).collect() };
        out.normalize();
        out
    }

    pub fn prune(&mut self, tol: f64) {
        for c in self.coeffs.iter_mut() {
            c.prune(tol);
        }
        self.normalize();
    }
}

/// Multiplication context for operators in `R`.
#[derive(Debug, Clone)]
pub struct OpAlgebra {
    pub l: f64,
    pub hhat: SymbolPolynomial,
}

fn binom(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

impl OpAlgebra {
    pub fn new(l: f64, hhat: SymbolPolynomial) -> Self {
        OpAlgebra { l, hhat }
    }

    /// `delta(b) = R b - b R`.
    pub fn delta(&self, b: &SymbolPolynomial) -> Result<SymbolPolynomial> {
        let mut out = b.ds(self.l).scale(C64::new(0.0, -1.0));
        if !self.hhat.is_zero() {
            out = out.add(&self.hhat.moyal(b)?).sub(&b.moyal(&self.hhat)?);
        }
        Ok(out)
    }

    pub fn mul(&self, a: &Op, b: &Op) -> Result<Op> {
        let (n, cap) = (a.n(), a.cap().max(b.cap()));
        let rmax = a.coeffs.len() - 1;
        let mut out = Op::zero(n, cap);
        for (t, bt) in b.coeffs.iter().enumerate() {
            if bt.is_zero() {
                continue;
            }
            // delta^k(b_t) for k <= rmax
            let mut dk = vec![bt.clone()];
            for k in 1..=rmax {
                let next = self.delta(&dk[k - 1])?;
                dk.push(next);
            }
            for (r, ar) in a.coeffs.iter().enumerate() {
                if ar.is_zero() {
                    continue;
                }
                for (k, dkb) in dk.iter().enumerate().take(r + 1) {
                    if dkb.is_zero() {
                        continue;
                    }
                    let prod = ar.moyal(dkb)?;
                    let p = r + t - k;
                    out.ensure(p);
                    out.coeffs[p].add_assign_scaled(&prod, C64::new(binom(r, k), 0.0));
                }
            }
        }
        out.normalize();
        Ok(out)
    }

    /// `X Q - Q X`.
    pub fn ad(&self, q: &Op, x: &Op) -> Result<Op> {
        Ok(self.mul(x, q)?.sub(&self.mul(q, x)?))
    }
}
