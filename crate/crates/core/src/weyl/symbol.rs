//! Sparse polynomial symbols in `2n` transverse variables with periodic
//! coefficients.
//!
//! Slot `i < n` is `x_i`, slot `n + i` is `xi_i`. Monomials are packed into
//! a `u64`, eight bits per slot, so `n <= 4` and exponents stay below 256.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use super::trig::Trig;
use crate::error::{Error, Result};

pub const MAX_N: usize = 4;

#[inline]
pub fn mono_get(m: u64, slot: usize) -> u8 {
    ((m >> (8 * slot)) & 0xff) as u8
}

#[inline]
pub fn mono_set(m: u64, slot: usize, e: u8) -> u64 {
    (m & !(0xffu64 << (8 * slot))) | ((e as u64) << (8 * slot))
}

pub fn mono_pack(exps: &[u8]) -> u64 {
    exps.iter().enumerate().fold(0u64, |m, (i, &e)| mono_set(m, i, e))
}

pub fn mono_unpack(m: u64, slots: usize) -> Vec<u8> {
    (0..slots).map(|i| mono_get(m, i)).collect()
}

pub fn mono_degree(m: u64) -> usize {
    (0..8).map(|i| mono_get(m, i) as usize).sum()
}

fn falling(a: u8, p: u8) -> f64 {
    if p > a {
        return 0.0;
    }
    ((a - p + 1)..=a).fold(1.0, |acc, v| acc * v as f64)
}

fn binom(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Terms `(j, c_j)` of the one-pair product `x^a xi^b * x^c xi^d`; every
/// term of order `j` is a multiple of `x^{a+c-j} xi^{b+d-j}`.
fn moyal_1d(a: u8, b: u8, c: u8, d: u8) -> Vec<(u8, C64)> {
    let jmax = (a + b).min(c + d);
    let mut out = Vec::new();
    let mut pref = C64::new(1.0, 0.0);
    for j in 0..=jmax {
        if j > 0 {
            pref *= C64::new(0.0, 0.5) / j as f64;
        }
        let mut s = 0.0;
        for l in 0..=j {
            let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
            s += sign
                * binom(j as usize, l as usize)
                * falling(a, j - l)
                * falling(b, l)
                * falling(d, j - l)
                * falling(c, l);
        }
        if s != 0.0 {
            out.push((j, pref * s));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymbolPolynomial {
    n: usize,
    cap: usize,
    terms: BTreeMap<u64, Trig>,
}

impl SymbolPolynomial {
    /// Empty symbol; `cap` bounds the retained s-frequencies.
    pub fn zero(n: usize, cap: usize) -> Self {
        assert!(n <= MAX_N, "at most {MAX_N} transverse dimensions");
        SymbolPolynomial { n, cap, terms: BTreeMap::new() }
    }

    pub fn constant(n: usize, cap: usize, v: C64) -> Self {
        let mut p = Self::zero(n, cap);
        p.add_term(0, Trig::constant(v));
        p
    }

    pub fn var(n: usize, cap: usize, slot: usize) -> Self {
        let mut p = Self::zero(n, cap);
        p.add_term(mono_set(0, slot, 1), Trig::real(1.0));
        p
    }

    pub fn monomial(n: usize, cap: usize, exps: &[u8], coef: Trig) -> Self {
        assert_eq!(exps.len(), 2 * n);
        let mut p = Self::zero(n, cap);
        p.add_term(mono_pack(exps), coef);
        p
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    pub fn with_cap(mut self, cap: usize) -> Self {
        self.cap = cap;
        self
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn raw_terms(&self) -> impl Iterator<Item = (u64, &Trig)> {
        self.terms.iter().map(|(k, v)| (*k, v))
    }

    /// Iterates `(multi-index, s-frequency, coefficient)`.
    pub fn terms(&self) -> impl Iterator<Item = (Vec<u8>, i64, C64)> + '_ {
        let slots = 2 * self.n;
        self.terms
            .iter()
            .flat_map(move |(m, t)| t.modes().map(move |(k, v)| (mono_unpack(*m, slots), k, v)))
    }

    pub fn coeff(&self, exps: &[u8]) -> Trig {
        self.terms.get(&mono_pack(exps)).cloned().unwrap_or_default()
    }

    pub fn coeff_packed(&self, m: u64) -> Option<&Trig> {
        self.terms.get(&m)
    }

    pub fn add_term(&mut self, m: u64, t: Trig) {
        self.add_term_scaled(m, &t, C64::new(1.0, 0.0));
    }

    pub fn add_term_scaled(&mut self, m: u64, t: &Trig, s: C64) {
        if t.is_zero() {
            return;
        }
        match self.terms.get_mut(&m) {
            Some(e) => {
                e.add_scaled(t, s);
                if e.is_zero() {
                    self.terms.remove(&m);
                }
            }
            None => {
                self.terms.insert(m, t.scale(s));
            }
        }
    }

    fn check(&self, o: &Self) -> Result<()> {
        if self.n != o.n {
            return Err(Error::DimensionMismatch { left: self.n, right: o.n });
        }
        Ok(())
    }

    pub fn degree(&self) -> Option<usize> {
        self.terms.keys().map(|m| mono_degree(*m)).max()
    }

    pub fn homogeneous_part(&self, d: usize) -> Self {
        let mut out = Self::zero(self.n, self.cap);
        for (m, t) in &self.terms {
            if mono_degree(*m) == d {
                out.terms.insert(*m, t.clone());
            }
        }
        out
    }

    pub fn truncate_degree(&self, dmax: usize) -> Self {
        let mut out = Self::zero(self.n, self.cap);
        for (m, t) in &self.terms {
            if mono_degree(*m) <= dmax {
                out.terms.insert(*m, t.clone());
            }
        }
        out
    }

    /// True if every monomial has degree of the given parity (0 even, 1 odd).
    pub fn has_parity(&self, parity: usize) -> bool {
        self.terms.keys().all(|m| mono_degree(*m) % 2 == parity % 2)
    }

    pub fn max_abs(&self) -> f64 {
        self.terms.values().fold(0.0, |m, t| m.max(t.max_abs()))
    }

    /// Zeroes coefficients below `tol` and removes empty monomials.
    pub fn prune(&mut self, tol: f64) {
        self.terms.retain(|_, t| {
            t.trim(tol);
            !t.is_zero()
        });
    }

    pub fn pruned(mut self, tol: f64) -> Self {
        self.prune(tol);
        self
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
        assert_eq!(self.n, o.n, "dimension mismatch");
        self.cap = self.cap.max(o.cap);
        for (m, t) in &o.terms {
            self.add_term_scaled(*m, t, s);
        }
    }

    pub fn scale(&self, s: C64) -> Self {
        let mut out = Self::zero(self.n, self.cap);
        if s.re == 0.0 && s.im == 0.0 {
            return out;
        }
        for (m, t) in &self.terms {
            out.terms.insert(*m, t.scale(s));
        }
        out
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    /// Multiplies every coefficient by the periodic function `f`.
    pub fn mul_trig(&self, f: &Trig) -> Self {
        let mut out = Self::zero(self.n, self.cap);
        for (m, t) in &self.terms {
            out.add_term(*m, t.mul(f, self.cap));
        }
        out
    }

    /// Commutative (pointwise) product.
    pub fn mul(&self, o: &Self) -> Self {
        assert_eq!(self.n, o.n, "dimension mismatch");
        let cap = self.cap.max(o.cap);
        let mut out = Self::zero(self.n, cap);
        for (ma, ta) in &self.terms {
            for (mb, tb) in &o.terms {
                out.add_term(ma + mb, ta.mul(tb, cap));
            }
        }
        out
    }

    pub fn pow(&self, e: usize) -> Self {
        let mut out = Self::constant(self.n, self.cap, C64::new(1.0, 0.0));
        for _ in 0..e {
            out = out.mul(self);
        }
        out
    }

    /// Weyl-ordered composition `self * o` (hbar = 1).
    pub fn moyal(&self, o: &Self) -> Result<Self> {
        self.check(o)?;
        let n = self.n;
        let cap = self.cap.max(o.cap);
        let mut out = Self::zero(n, cap);
        let mut cache: HashMap<(u8, u8, u8, u8), Vec<(u8, C64)>> = HashMap::new();
        let mut lists: Vec<Vec<(u8, C64)>> = vec![Vec::new(); n];
        for (ma, ta) in &self.terms {
            for (mb, tb) in &o.terms {
                let prod = ta.mul(tb, cap);
                if prod.is_zero() {
                    continue;
                }
                for (i, list) in lists.iter_mut().enumerate() {
                    let key = (mono_get(*ma, i), mono_get(*ma, n + i), mono_get(*mb, i), mono_get(*mb, n + i));
                    *list = cache.entry(key).or_insert_with(|| moyal_1d(key.0, key.1, key.2, key.3)).clone();
                }
                let base = ma + mb;
                // Cartesian product over the per-pair expansion orders.
                let mut idx = vec![0usize; n];
                loop {
                    let mut coef = C64::new(1.0, 0.0);
                    let mut m = base;
                    for i in 0..n {
                        let (j, c) = lists[i][idx[i]];
                        coef *= c;
                        m -= ((j as u64) << (8 * i)) + ((j as u64) << (8 * (n + i)));
                    }
                    out.add_term_scaled(m, &prod, coef);
                    let mut d = 0;
                    loop {
                        if d == n {
                            break;
                        }
                        idx[d] += 1;
                        if idx[d] < lists[d].len() {
                            break;
                        }
                        idx[d] = 0;
                        d += 1;
                    }
                    if d == n {
                        break;
                    }
                }
            }
        }
        Ok(out)
    }

    /// Moyal bracket `(a*b - b*a)/i`.
    pub fn bracket(&self, o: &Self) -> Result<Self> {
        let ab = self.moyal(o)?;
        let ba = o.moyal(self)?;
        Ok(ab.sub(&ba).scale(C64::new(0.0, -1.0)))
    }

    /// Partial derivative in one slot.
    pub fn deriv_slot(&self, slot: usize) -> Self {
        let mut out = Self::zero(self.n, self.cap);
        for (m, t) in &self.terms {
            let e = mono_get(*m, slot);
            if e == 0 {
                continue;
            }
            out.add_term(mono_set(*m, slot, e - 1), t.scale(C64::new(e as f64, 0.0)));
        }
        out
    }

    /// Classical Poisson bracket `sum_i d_x a d_xi b - d_xi a d_x b`.
    pub fn poisson(&self, o: &Self) -> Result<Self> {
        self.check(o)?;
        let n = self.n;
        let mut out = Self::zero(n, self.cap.max(o.cap));
        for i in 0..n {
            out = out.add(&self.deriv_slot(i).mul(&o.deriv_slot(n + i)));
            out = out.sub(&self.deriv_slot(n + i).mul(&o.deriv_slot(i)));
        }
        Ok(out)
    }

    /// Derivative in `s` for period `l`.
    pub fn ds(&self, l: f64) -> Self {
        let mut out = Self::zero(self.n, self.cap);
        for (m, t) in &self.terms {
            out.add_term(*m, t.deriv(l));
        }
        out
    }

    /// Zero-frequency part.
    pub fn s_average(&self) -> Self {
        let mut out = Self::zero(self.n, self.cap);
        for (m, t) in &self.terms {
            out.add_term(*m, Trig::constant(t.average()));
        }
        out
    }

    /// `q0 + L int_0^s A du`, termwise; fails on a nonzero average.
    pub fn s_primitive(&self, l: f64, q0: &Self) -> Result<Self> {
        let mut out = q0.clone();
        for (m, t) in &self.terms {
            out.add_term(*m, t.integral(l)?.scale(C64::new(l, 0.0)));
        }
        Ok(out)
    }

    /// Pointwise complex conjugate.
    pub fn conj(&self) -> Self {
        let mut out = Self::zero(self.n, self.cap);
        for (m, t) in &self.terms {
            out.terms.insert(*m, t.conj());
        }
        out
    }

    /// Largest coefficient of the imaginary part `(a - conj a)/2i`.
    pub fn imag_defect(&self) -> f64 {
        self.sub(&self.conj()).max_abs() / 2.0
    }

    /// `a(C eta)`: old slot `i` becomes `sum_j C[i][j] eta_j`.
    pub fn substitute_linear(&self, c: &DMatrix<C64>) -> Result<Self> {
        let d = 2 * self.n;
        if c.nrows() != d || c.ncols() != d {
            return Err(Error::DimensionMismatch { left: d, right: c.nrows() });
        }
        let det = c.clone().determinant();
        let scale = c.iter().fold(0.0f64, |m, v| m.max(v.norm())).max(1e-300);
        if det.norm() <= 1e-13 * scale.powi(d as i32) {
            return Err(Error::SingularMap);
        }
        let forms: Vec<Self> = (0..d)
            .map(|i| {
                let mut f = Self::zero(self.n, self.cap);
                for j in 0..d {
                    f.add_term(mono_set(0, j, 1), Trig::constant(c[(i, j)]));
                }
                f
            })
            .collect();
        Ok(self.substitute_forms(&forms))
    }

    /// `a(C(s) eta)` with periodic matrix entries `c[i][j]`.
    pub fn substitute_linear_periodic(&self, c: &[Vec<Trig>]) -> Self {
        let d = 2 * self.n;
        assert_eq!(c.len(), d);
        let forms: Vec<Self> = (0..d)
            .map(|i| {
                let mut f = Self::zero(self.n, self.cap);
                for j in 0..d {
                    f.add_term(mono_set(0, j, 1), c[i][j].clone());
                }
                f
            })
            .collect();
        self.substitute_forms(&forms)
    }

    /// Replaces slot `i` by the polynomial `forms[i]`.
    pub fn substitute_forms(&self, forms: &[Self]) -> Self {
        let d = 2 * self.n;
        let n_out = forms.first().map(|f| f.n).unwrap_or(self.n);
        let mut powers: Vec<Vec<Self>> = (0..d)
            .map(|_| vec![Self::constant(n_out, self.cap, C64::new(1.0, 0.0))])
            .collect();
        let mut out = Self::zero(n_out, self.cap);
        for (m, t) in &self.terms {
            let mut prod = Self::constant(n_out, self.cap, C64::new(1.0, 0.0));
            for (i, pw) in powers.iter_mut().enumerate() {
                let e = mono_get(*m, i) as usize;
                while pw.len() <= e {
                    let next = pw.last().unwrap().mul(&forms[i]);
                    pw.push(next);
                }
                if e > 0 {
                    prod = prod.mul(&pw[e]);
                }
            }
            out.add_assign_scaled(&prod.mul_trig(t), C64::new(1.0, 0.0));
        }
        out
    }

    /// Value at arclength `s` and transverse point `z`.
    pub fn eval(&self, s: f64, l: f64, z: &[C64]) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for (m, t) in &self.terms {
            let mut v = t.eval(s, l);
            for (i, zi) in z.iter().enumerate() {
                v *= zi.powi(mono_get(*m, i) as i32);
            }
            acc += v;
        }
        acc
    }

    /// Text dump, one `(multiindex | s-frequency | re | im)` line per term.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        for (exps, k, v) in self.terms() {
            let idx: Vec<String> = exps.iter().map(|e| e.to_string()).collect();
            let _ = writeln!(s, "({}) | {} | {:+.15e} | {:+.15e}", idx.join(","), k, v.re, v.im);
        }
        s
    }

    /// Inverse of [`dump`](Self::dump).
    pub fn parse_dump(n: usize, cap: usize, text: &str) -> Result<Self> {
        let bad = |line: &str| Error::Invalid(format!("malformed symbol line `{line}`"));
        let mut out = Self::zero(n, cap);
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            let parts: Vec<&str> = line.split('|').map(str::trim).collect();
            if parts.len() != 4 {
                return Err(bad(line));
            }
            let exps: Vec<u8> = parts[0]
                .trim_start_matches('(')
                .trim_end_matches(')')
                .split(',')
                .map(|e| e.trim().parse::<u8>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| bad(line))?;
            if exps.len() != 2 * n {
                return Err(bad(line));
            }
            let k: i64 = parts[1].parse().map_err(|_| bad(line))?;
            let re: f64 = parts[2].parse().map_err(|_| bad(line))?;
            let im: f64 = parts[3].parse().map_err(|_| bad(line))?;
            out.add_term(mono_pack(&exps), Trig::mode(k, C64::new(re, im)));
        }
        Ok(out)
    }
}
