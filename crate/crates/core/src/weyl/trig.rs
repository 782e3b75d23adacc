//! Truncated trigonometric series in the arclength variable.
//!
//! A `Trig` stores the coefficients of `exp(2 pi i k s / L)` for
//! `|k| <= K` densely. The period `L` is not stored; operations that need
//! it take it as an argument.

use num_complex::Complex64 as C64;
use rustfft::FftPlanner;
use std::f64::consts::PI;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Trig {
    c: Vec<C64>,
}

impl Default for Trig {
    fn default() -> Self {
        Trig::zero()
    }
}

impl Trig {
    pub fn zero() -> Self {
        Trig { c: vec![C64::new(0.0, 0.0)] }
    }

    pub fn constant(v: C64) -> Self {
        Trig { c: vec![v] }
    }

    pub fn real(v: f64) -> Self {
        Trig::constant(C64::new(v, 0.0))
    }

    /// Builds a series from coefficients ordered `-K..=K`.
    pub fn from_coeffs(c: Vec<C64>) -> Self {
        assert!(c.len() % 2 == 1, "coefficient vector must have odd length");
        let mut t = Trig { c };
        t.shrink_exact();
        t
    }

    /// Single mode `v * exp(2 pi i k s / L)`.
    pub fn mode(k: i64, v: C64) -> Self {
        let kk = k.unsigned_abs() as usize;
        let mut c = vec![C64::new(0.0, 0.0); 2 * kk + 1];
        c[(kk as i64 + k) as usize] = v;
        Trig { c }
    }

    pub fn half_width(&self) -> usize {
        self.c.len() / 2
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.c
    }

    pub fn get(&self, k: i64) -> C64 {
        let kk = self.half_width() as i64;
        if k.abs() > kk {
            C64::new(0.0, 0.0)
        } else {
            self.c[(k + kk) as usize]
        }
    }

    /// Iterates over `(frequency, coefficient)` for nonzero coefficients.
    pub fn modes(&self) -> impl Iterator<Item = (i64, C64)> + '_ {
        let kk = self.half_width() as i64;
        self.c
            .iter()
            .enumerate()
            .filter(|(_, v)| v.re != 0.0 || v.im != 0.0)
            .map(move |(i, v)| (i as i64 - kk, *v))
    }

    pub fn is_constant(&self) -> bool {
        self.c.len() == 1
    }

    pub fn is_zero(&self) -> bool {
        self.c.iter().all(|v| v.re == 0.0 && v.im == 0.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.c.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    pub fn average(&self) -> C64 {
        self.c[self.half_width()]
    }

    fn widened(&self, k: usize) -> Vec<C64> {
        let h = self.half_width();
        if k <= h {
            return self.c.clone();
        }
        let mut out = vec![C64::new(0.0, 0.0); 2 * k + 1];
        out[k - h..k + h + 1].copy_from_slice(&self.c);
        out
    }

    /// Drops outer modes that are exactly zero.
    fn shrink_exact(&mut self) {
        let mut h = self.half_width();
        while h > 0 {
            let lo = self.c[0];
            let hi = self.c[2 * h];
            if lo.re == 0.0 && lo.im == 0.0 && hi.re == 0.0 && hi.im == 0.0 {
                self.c.remove(2 * h);
                self.c.remove(0);
                h -= 1;
            } else {
                break;
            }
        }
    }

    /// Zeroes coefficients below `tol` in modulus and shrinks the width.
    pub fn trim(&mut self, tol: f64) {
        for v in self.c.iter_mut() {
            if v.norm() <= tol {
                *v = C64::new(0.0, 0.0);
            }
        }
        self.shrink_exact();
    }

    pub fn add(&self, o: &Trig) -> Trig {
        let k = self.half_width().max(o.half_width());
        let mut a = self.widened(k);
        let off = k - o.half_width();
        for (i, v) in o.c.iter().enumerate() {
            a[off + i] += v;
        }
        let mut t = Trig { c: a };
        t.shrink_exact();
        t
    }

    pub fn add_scaled(&mut self, o: &Trig, s: C64) {
        let k = self.half_width().max(o.half_width());
        if k > self.half_width() {
            self.c = self.widened(k);
        }
        let off = k - o.half_width();
        for (i, v) in o.c.iter().enumerate() {
            self.c[off + i] += v * s;
        }
    }

    pub fn sub(&self, o: &Trig) -> Trig {
        let mut t = self.clone();
        t.add_scaled(o, C64::new(-1.0, 0.0));
        t.shrink_exact();
        t
    }

    pub fn scale(&self, s: C64) -> Trig {
        Trig { c: self.c.iter().map(|v| v * s).collect() }
    }

    /// Product of two series, truncated to `|k| <= cap`.
    pub fn mul(&self, o: &Trig, cap: usize) -> Trig {
        if self.is_constant() {
            return o.scale(self.c[0]);
        }
        if o.is_constant() {
            return self.scale(o.c[0]);
        }
        let (ha, hb) = (self.half_width() as i64, o.half_width() as i64);
        let h = (ha + hb).min(cap as i64);
        let mut out = vec![C64::new(0.0, 0.0); (2 * h + 1) as usize];
        for (i, a) in self.c.iter().enumerate() {
            if a.re == 0.0 && a.im == 0.0 {
                continue;
            }
            let ka = i as i64 - ha;
            for (j, b) in o.c.iter().enumerate() {
                let k = ka + j as i64 - hb;
                if k.abs() <= h {
                    out[(k + h) as usize] += a * b;
                }
            }
        }
        let mut t = Trig { c: out };
        t.shrink_exact();
        t
    }

    /// Derivative in `s` for period `l`.
    pub fn deriv(&self, l: f64) -> Trig {
        let h = self.half_width() as i64;
        let w = 2.0 * PI / l;
        let c = self
            .c
            .iter()
            .enumerate()
            .map(|(i, v)| v * C64::new(0.0, w * (i as i64 - h) as f64))
            .collect();
        let mut t = Trig { c };
        t.shrink_exact();
        t
    }

    /// `int_0^s f(u) du` for period `l`; requires zero average.
    pub fn integral(&self, l: f64) -> Result<Trig> {
        if self.average().norm() > 0.0 {
            return Err(Error::NonPeriodicPrimitive);
        }
        let h = self.half_width() as i64;
        let w = 2.0 * PI / l;
        let mut c = vec![C64::new(0.0, 0.0); self.c.len()];
        let mut constant = C64::new(0.0, 0.0);
        for (i, v) in self.c.iter().enumerate() {
            let k = i as i64 - h;
            if k == 0 {
                continue;
            }
            let q = v / C64::new(0.0, w * k as f64);
            c[i] = q;
            constant -= q;
        }
        c[h as usize] = constant;
        let mut t = Trig { c };
        t.shrink_exact();
        Ok(t)
    }

    /// Coefficients of `conj(f(s))`.
    pub fn conj(&self) -> Trig {
        Trig { c: self.c.iter().rev().map(|v| v.conj()).collect() }
    }

    pub fn eval(&self, s: f64, l: f64) -> C64 {
        let h = self.half_width() as i64;
        let w = 2.0 * PI * s / l;
        self.c
            .iter()
            .enumerate()
            .map(|(i, v)| v * C64::from_polar(1.0, w * (i as i64 - h) as f64))
            .sum()
    }

    /// Interpolating series from `N` uniform samples on `[0, L)`.
    /// Keeps `|k| < N/2`; the Nyquist mode is dropped.
    pub fn from_samples(samples: &[C64]) -> Trig {
        let n = samples.len();
        assert!(n > 0);
        let mut buf = samples.to_vec();
        let fft = FftPlanner::<f64>::new().plan_fft_forward(n);
        fft.process(&mut buf);
        let h = (n - 1) / 2;
        let mut c = vec![C64::new(0.0, 0.0); 2 * h + 1];
        for k in -(h as i64)..=(h as i64) {
            let idx = k.rem_euclid(n as i64) as usize;
            c[(k + h as i64) as usize] = buf[idx] / n as f64;
        }
        Trig::from_coeffs(c)
    }

    /// Values on the uniform grid `s_j = j L / N`.
    pub fn samples(&self, n: usize) -> Vec<C64> {
        let mut buf = vec![C64::new(0.0, 0.0); n];
        let h = self.half_width() as i64;
        for (i, v) in self.c.iter().enumerate() {
            let k = i as i64 - h;
            buf[k.rem_euclid(n as i64) as usize] += v;
        }
        let fft = FftPlanner::<f64>::new().plan_fft_inverse(n);
        fft.process(&mut buf);
        buf
    }
}
