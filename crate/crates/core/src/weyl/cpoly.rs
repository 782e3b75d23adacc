//! Sparse polynomials with constant complex coefficients.

use num_complex::Complex64 as C64;
use std::collections::BTreeMap;

use super::symbol::{mono_degree, mono_get, mono_pack, mono_set, mono_unpack};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CPoly {
    nvars: usize,
    terms: BTreeMap<u64, C64>,
}

impl CPoly {
    pub fn zero(nvars: usize) -> Self {
        assert!(nvars <= 8);
        CPoly { nvars, terms: BTreeMap::new() }
    }

    pub fn constant(nvars: usize, v: C64) -> Self {
        let mut p = Self::zero(nvars);
        p.add_term(0, v);
        p
    }

    pub fn var(nvars: usize, i: usize) -> Self {
        let mut p = Self::zero(nvars);
        p.add_term(mono_set(0, i, 1), C64::new(1.0, 0.0));
        p
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add_term(&mut self, m: u64, v: C64) {
        if v.re == 0.0 && v.im == 0.0 {
            return;
        }
        let e = self.terms.entry(m).or_insert(C64::new(0.0, 0.0));
        *e += v;
        if e.re == 0.0 && e.im == 0.0 {
            self.terms.remove(&m);
        }
    }

    pub fn raw_terms(&self) -> impl Iterator<Item = (u64, C64)> + '_ {
        self.terms.iter().map(|(m, v)| (*m, *v))
    }

    /// Iterates `(exponents, coefficient)` in a stable order.
    pub fn terms(&self) -> impl Iterator<Item = (Vec<u8>, C64)> + '_ {
        self.terms.iter().map(move |(m, v)| (mono_unpack(*m, self.nvars), *v))
    }

    pub fn coeff(&self, exps: &[u8]) -> C64 {
        self.terms.get(&mono_pack(exps)).copied().unwrap_or(C64::new(0.0, 0.0))
    }

    pub fn degree(&self) -> Option<usize> {
        self.terms.keys().map(|m| mono_degree(*m)).max()
    }

    pub fn homogeneous_part(&self, d: usize) -> Self {
        let mut out = Self::zero(self.nvars);
        for (m, v) in &self.terms {
            if mono_degree(*m) == d {
                out.terms.insert(*m, *v);
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.terms.values().fold(0.0, |m, v| m.max(v.norm()))
    }

    pub fn max_imag(&self) -> f64 {
        self.terms.values().fold(0.0, |m, v| m.max(v.im.abs()))
    }

    pub fn prune(&mut self, tol: f64) {
        self.terms.retain(|_, v| v.norm() > tol);
    }

    pub fn add(&self, o: &Self) -> Self {
        let mut out = self.clone();
        out.add_assign_scaled(o, C64::new(1.0, 0.0));
        out
    }

    pub fn sub(&self, o: &Self) -> Self {
        let mut out = self.clone();
        out.add_assign_scaled(o, C64::new(-1.0, 0.0));
        out
    }

    pub fn add_assign_scaled(&mut self, o: &Self, s: C64) {
        assert_eq!(self.nvars, o.nvars);
        for (m, v) in &o.terms {
            self.add_term(*m, v * s);
        }
    }

    pub fn scale(&self, s: C64) -> Self {
        let mut out = Self::zero(self.nvars);
        for (m, v) in &self.terms {
            out.add_term(*m, v * s);
        }
        out
    }

    pub fn mul(&self, o: &Self) -> Self {
        assert_eq!(self.nvars, o.nvars);
        let mut out = Self::zero(self.nvars);
        for (ma, va) in &self.terms {
            for (mb, vb) in &o.terms {
                out.add_term(ma + mb, va * vb);
            }
        }
        out
    }

    pub fn pow(&self, e: usize) -> Self {
        let mut out = Self::constant(self.nvars, C64::new(1.0, 0.0));
        for _ in 0..e {
            out = out.mul(self);
        }
        out
    }

    pub fn eval(&self, z: &[C64]) -> C64 {
        self.terms
            .iter()
            .map(|(m, v)| {
                let mut t = *v;
                for (i, zi) in z.iter().enumerate() {
                    t *= zi.powi(mono_get(*m, i) as i32);
                }
                t
            })
            .sum()
    }

    /// Replaces variable `i` by `forms[i]`.
    pub fn substitute(&self, forms: &[CPoly]) -> CPoly {
        assert_eq!(forms.len(), self.nvars);
        let nout = forms.first().map(|f| f.nvars).unwrap_or(self.nvars);
        let mut out = CPoly::zero(nout);
        for (m, v) in &self.terms {
            let mut t = CPoly::constant(nout, *v);
            for (i, f) in forms.iter().enumerate() {
                let e = mono_get(*m, i) as usize;
                if e > 0 {
                    t = t.mul(&f.pow(e));
                }
            }
            out = out.add(&t);
        }
        out
    }
}
