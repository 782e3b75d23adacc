//! Recovery of the regrouped coefficients from iterate samples.
//!
//! At iterate `N` the `k`-th invariant equals
//! `e^{N phi/2} G(u(N))`, where `G(u) = F(d + 1/2) prod u_j` is a polynomial
//! in `u_j = (1 - e^{N theta_j})^{-1}` of total excess degree
//! `sum (m_j - 1) <= deg F`. Stage `k` first subtracts the part of `F`
//! fixed by `p~_1..p~_k`, leaving degree `<= k + 2`. Clearing `(1 - e^{N theta_j})^C` turns it into an
//! exponential polynomial on the lattice `phi/2 + beta . theta`,
//! `beta in {0..C-1}^n`. Fitting runs in the `u` monomials (same span, far
//! fewer unknowns); the lattice form is kept for diagnostics and as a second
//! route in tests. Peeling goes top-down: `d^a u` has leading term `a! u^{a+1}`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::f64::consts::PI;
use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::floquet::FloquetClassification;
use crate::wave::{
    build_f_from, derivatives_to_actions, iterate_values_from, leading_factor, u_derivative, CharacterData, Convention,
    DerivativePolynomial,
};
use crate::weyl::symbol::mono_pack;
use crate::weyl::{ActionPolynomial, CPoly};

pub const COND_MAX: f64 = 1e10;
pub const GAP_TOL: f64 = 1e-6;
pub const RESID_TOL: f64 = 1e-6;
/// Smallest divisor an iterate may have to enter the default window.
pub const WINDOW_MARGIN: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InverseConfig {
    pub cond_max: f64,
    pub gap_tol: f64,
    pub resid_tol: f64,
    pub div_tol: f64,
    /// Samples beyond the number of unknowns in the default window.
    pub extra_samples: usize,
    /// Near-resonant iterates below this divisor are left out of the window.
    pub window_margin: f64,
}

impl Default for InverseConfig {
    fn default() -> Self {
        InverseConfig { cond_max: COND_MAX, gap_tol: GAP_TOL, resid_tol: RESID_TOL, div_tol: 1e-8, extra_samples: 16, window_margin: WINDOW_MARGIN }
    }
}

/// One iterate sample; CSV columns `k,n,re,im`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub k: usize,
    pub n: i64,
    pub re: f64,
    pub im: f64,
}

impl Sample {
    pub fn new(k: usize, n: i64, v: C64) -> Self {
        Sample { k, n, re: v.re, im: v.im }
    }

    pub fn value(&self) -> C64 {
        C64::new(self.re, self.im)
    }
}

pub fn read_samples<R: Read>(r: R) -> Result<Vec<Sample>> {
    let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    rd.deserialize().map(|s| s.map_err(|e| Error::Invalid(format!("samples: {e}")))).collect()
}

pub fn write_samples<W: Write>(w: W, samples: &[Sample]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for s in samples {
        wr.serialize(s).map_err(|e| Error::Invalid(format!("samples: {e}")))?;
    }
    wr.flush().map_err(|e| Error::Invalid(format!("samples: {e}")))
}

/// `sum_w c_w e^{N w}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentialPolynomial {
    pub frequencies: Vec<C64>,
    pub coefficients: Vec<C64>,
}

impl ExponentialPolynomial {
    pub fn eval(&self, n: i64) -> C64 {
        let s = n as f64;
        self.frequencies.iter().zip(&self.coefficients).map(|(w, c)| c * (w * s).exp()).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyLattice {
    pub k: usize,
    pub clearing_power: usize,
    pub max_degree: usize,
    /// `u` exponents (all `>= 1`), by decreasing total degree.
    pub monomials: Vec<Vec<usize>>,
    pub betas: Vec<Vec<usize>>,
    pub frequencies: Vec<C64>,
    /// Smallest `|e^{w_a} - e^{w_b}|` over the lattice.
    pub min_gap: f64,
}

fn box_points(n: usize, side: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|p| {
                (0..side).map(move |b| {
                    let mut q = p.clone();
                    q.push(b);
                    q
                })
            })
            .collect();
    }
    out
}

/// Lattice for a derivative polynomial of degree at most `max_degree`.
pub fn clear_denominators(k: usize, data: &CharacterData, max_degree: usize, gap_tol: f64) -> Result<FrequencyLattice> {
    let n = data.n();
    let c = max_degree + 1;
    let mut monomials: Vec<Vec<usize>> = box_points(n, c)
        .into_iter()
        .filter(|e| e.iter().sum::<usize>() <= max_degree)
        .map(|e| e.iter().map(|v| v + 1).collect())
        .collect();
    monomials.sort_by_key(|m| std::cmp::Reverse(m.iter().sum::<usize>()));
    let betas = box_points(n, c);
    let half_phi: C64 = data.phi.iter().sum::<C64>() * 0.5;
    let frequencies: Vec<C64> =
        betas.iter().map(|b| half_phi + b.iter().zip(&data.theta).map(|(bj, t)| t * *bj as f64).sum::<C64>()).collect();
    let nodes: Vec<C64> = frequencies.iter().map(|w| (w - half_phi).exp()).collect();
    let mut min_gap = f64::INFINITY;
    let mut collisions = 0;
    for a in 0..nodes.len() {
        for b in a + 1..nodes.len() {
            let g = (nodes[a] - nodes[b]).norm() / nodes[a].norm().max(nodes[b].norm()).max(1.0);
            min_gap = min_gap.min(g);
            if g < gap_tol {
                collisions += 1;
            }
        }
    }
    if collisions > 0 {
        return Err(Error::RankDeficient { null_dim: collisions, reason: format!("lattice frequencies collide (gap {min_gap:.3e})") });
    }
    Ok(FrequencyLattice { k, clearing_power: c, max_degree, monomials, betas, frequencies, min_gap })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitDiagnostics {
    pub samples: usize,
    pub unknowns: usize,
    pub cond: f64,
    pub residual: f64,
}

/// Least squares with unit-norm column scaling and an SVD condition check.
pub fn lstsq(a: &DMatrix<C64>, b: &DVector<C64>, cond_max: f64) -> Result<(DVector<C64>, FitDiagnostics)> {
    let (rows, cols) = a.shape();
    if rows < cols {
        return Err(Error::RankDeficient { null_dim: cols - rows, reason: "fewer samples than unknowns".into() });
    }
    let scale: Vec<f64> = (0..cols).map(|j| a.column(j).norm()).collect();
    if let Some(j) = scale.iter().position(|s| !(*s > 0.0 && s.is_finite())) {
        return Err(Error::RankDeficient { null_dim: 1, reason: format!("column {j} vanishes or overflows") });
    }
    let mut a_s = a.clone();
    for (j, s) in scale.iter().enumerate() {
        a_s.column_mut(j).scale_mut(1.0 / s);
    }
    let svd = a_s.clone().svd(true, true);
    let sv = &svd.singular_values;
    let smax = sv.max();
    let smin = sv.min();
    let null_dim = sv.iter().filter(|s| **s <= smax * f64::EPSILON * cols as f64).count();
    if null_dim > 0 {
        return Err(Error::RankDeficient { null_dim, reason: "singular fit matrix".into() });
    }
    let cond = smax / smin;
    if cond > cond_max {
        return Err(Error::IllConditioned { cond });
    }
    let y = svd.solve(b, 0.0).map_err(|e| Error::Invalid(e.to_string()))?;
    let residual = (&a_s * &y - b).norm() / b.norm().max(f64::MIN_POSITIVE);
    let x = DVector::from_iterator(cols, y.iter().zip(&scale).map(|(v, s)| v / s));
    Ok((x, FitDiagnostics { samples: rows, unknowns: cols, cond, residual }))
}

/// Generic fit of `sum_w c_w e^{N w}` at the given frequencies.
pub fn fit_exponential_polynomial(
    ns: &[i64],
    values: &[C64],
    frequencies: &[C64],
    cond_max: f64,
) -> Result<(ExponentialPolynomial, FitDiagnostics)> {
    let a = DMatrix::from_fn(ns.len(), frequencies.len(), |i, j| (frequencies[j] * ns[i] as f64).exp());
    let (x, d) = lstsq(&a, &DVector::from_column_slice(values), cond_max)?;
    Ok((ExponentialPolynomial { frequencies: frequencies.to_vec(), coefficients: x.iter().copied().collect() }, d))
}

/// Clearing factor `prod_j (1 - e^{N theta_j})^C`.
pub fn clearing_factor(lat: &FrequencyLattice, data: &CharacterData, n: i64) -> C64 {
    data.iterate(n).theta.iter().map(|t| (1.0 - t.exp()).powi(lat.clearing_power as i32)).product()
}

/// Fit of `G` in the `u` monomials of the lattice.
pub fn fit_reciprocal(
    lat: &FrequencyLattice,
    data: &CharacterData,
    ns: &[i64],
    values: &[C64],
    cond_max: f64,
) -> Result<(Vec<C64>, FitDiagnostics)> {
    let rows: Vec<(Vec<C64>, C64)> = ns
        .iter()
        .zip(values)
        .map(|(&n, v)| {
            let d = data.iterate(n);
            (d.u(), v / d.prefactor())
        })
        .collect();
    // Centered basis prod_j u_j (u_j - 1/2)^{m_j - 1}: odd in N for both slot
    // types on a symmetric window, far better conditioned than raw powers.
    let a = DMatrix::from_fn(rows.len(), lat.monomials.len(), |i, j| {
        lat.monomials[j].iter().zip(&rows[i].0).map(|(m, u)| u * (u - 0.5).powi(*m as i32 - 1)).product()
    });
    let b = DVector::from_iterator(rows.len(), rows.iter().map(|r| r.1));
    let (h, d) = lstsq(&a, &b, cond_max)?;
    let index: HashMap<&Vec<usize>, usize> = lat.monomials.iter().enumerate().map(|(i, m)| (m, i)).collect();
    let mut g = vec![C64::new(0.0, 0.0); lat.monomials.len()];
    for (m, hm) in lat.monomials.iter().zip(h.iter()) {
        let e: Vec<usize> = m.iter().map(|v| v - 1).collect();
        for i in box_points(e.len(), e.iter().max().map_or(1, |v| v + 1)) {
            if i.iter().zip(&e).any(|(ij, ej)| ij > ej) {
                continue;
            }
            let w: f64 = i.iter().zip(&e).map(|(ij, ej)| binom(*ej, *ij) * (-0.5f64).powi((ej - ij) as i32)).product();
            let target: Vec<usize> = i.iter().map(|v| v + 1).collect();
            g[index[&target]] += hm * w;
        }
    }
    Ok((g, d))
}

fn binom(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Lattice coefficients of the cleared function from `u`-monomial data:
/// `c_beta = sum_m g_m prod_j C(C - m_j, beta_j) (-1)^{beta_j}`.
pub fn to_exponential(lat: &FrequencyLattice, g: &[C64]) -> ExponentialPolynomial {
    let c = lat.clearing_power;
    let coefficients = lat
        .betas
        .iter()
        .map(|beta| {
            lat.monomials
                .iter()
                .zip(g)
                .map(|(m, gm)| {
                    let w: f64 = m
                        .iter()
                        .zip(beta)
                        .map(|(mj, bj)| binom(c - mj, *bj) * if bj % 2 == 0 { 1.0 } else { -1.0 })
                        .product();
                    gm * w
                })
                .sum()
        })
        .collect();
    ExponentialPolynomial { frequencies: lat.frequencies.clone(), coefficients }
}

/// `F` from the `u`-monomial coefficients of `G`.
pub fn peel_coefficients(lat: &FrequencyLattice, g: &[C64]) -> DerivativePolynomial {
    let n = lat.monomials.first().map(|m| m.len()).unwrap_or(0);
    let table: Vec<Vec<f64>> = (0..=lat.max_degree).map(u_derivative).collect();
    let mut done: Vec<(Vec<usize>, C64)> = Vec::new();
    for (m, gm) in lat.monomials.iter().zip(g) {
        let a: Vec<usize> = m.iter().map(|v| v - 1).collect();
        let mut num = *gm;
        for (b, cb) in &done {
            if b.iter().zip(&a).all(|(bj, aj)| bj >= aj) {
                let w: f64 = b.iter().zip(m).map(|(bj, mj)| table[*bj][*mj]).product();
                num -= cb * w;
            }
        }
        let lead: f64 = a.iter().map(|aj| table[*aj][aj + 1]).product();
        done.push((a, num / lead));
    }
    let mut shifted = CPoly::zero(n);
    for (a, c) in done {
        let e: Vec<u8> = a.iter().map(|v| *v as u8).collect();
        shifted.add_term(mono_pack(&e), c);
    }
    DerivativePolynomial { k: lat.k, poly: shifted }.shifted(-0.5)
}

/// `p~_{k+1}` from `F_{k,-1}` and the already known `p~_1..p~_k`.
pub fn invert_build_f(
    fp: &DerivativePolynomial,
    known: &[ActionPolynomial],
    f: &FloquetClassification,
    l: f64,
    conv: Convention,
    resid_tol: f64,
) -> Result<ActionPolynomial> {
    let k = fp.k;
    if known.len() != k {
        return Err(Error::MissingNormalForm { needed: k });
    }
    let kinds = f.layout().action_kinds();
    let mut with_zero = known.to_vec();
    with_zero.push(ActionPolynomial::zero(kinds.clone()));
    let lower = build_f_from(k, &with_zero, f, l, conv)?;
    let diff = fp.poly.sub(&lower.poly);
    let mut a = derivatives_to_actions(&diff, &kinds, conv).scale(1.0 / leading_factor(k, l));
    let scale = a.max_abs().max(1.0);
    let excess = a.terms().filter(|(e, _)| e.iter().map(|v| *v as usize).sum::<usize>() > k + 2).map(|(_, c)| c.norm()).fold(0.0, f64::max);
    if excess > resid_tol * scale {
        return Err(Error::InconsistentResidual { residual: excess / scale });
    }
    let mut kept = CPoly::zero(kinds.len());
    for (e, c) in a.terms() {
        if e.iter().map(|v| *v as usize).sum::<usize>() <= k + 2 {
            kept.add_term(mono_pack(&e), c);
        }
    }
    a = kept;
    a.prune(1e-14 * scale);
    Ok(ActionPolynomial::from_poly(kinds, a))
}

/// Nonresonant iterates `+-1, +-2, ...` until `count` are collected.
pub fn default_window(data: &CharacterData, count: usize, div_tol: f64) -> Vec<i64> {
    let mut out = Vec::with_capacity(count);
    let mut n = 1i64;
    while out.len() < count {
        for s in [n, -n] {
            if out.len() < count && data.iterate(s).min_divisor() >= div_tol {
                out.push(s);
            }
        }
        n += 1;
        if n > 100_000 {
            break;
        }
    }
    out
}

/// Degree of the part of `F_{k,-1}` that is new at stage `k`: once the
/// contribution of `p~_1..p~_k` is subtracted only `p~_{k+1}` is left.
pub fn max_degree(k: usize) -> usize {
    k + 2
}

/// Unknowns in the fit for the `k`-th invariant with `n` slots.
pub fn unknowns(k: usize, n: usize) -> usize {
    let d = max_degree(k);
    // C(n + d, n)
    (1..=n).fold(1usize, |acc, i| acc * (d + i) / i)
}

/// Default window length: the unknowns plus `extra_samples`, plus two
/// periods of the slowest slot so that `N theta` spreads over the circle.
/// Slots near `1` or `-1` (in `e^theta`) are slow.
pub fn window_len(k: usize, data: &CharacterData, cfg: &InverseConfig) -> usize {
    let rate = data
        .theta
        .iter()
        .map(|t| {
            let flip = C64::new(t.re, t.im - PI.copysign(t.im));
            if t.im == 0.0 { t.norm() } else { t.norm().min(flip.norm()) }
        })
        .fold(f64::INFINITY, f64::min);
    let periods = if rate.is_finite() && rate > 0.0 { (2.0 * PI / rate).ceil() as usize } else { 0 };
    unknowns(k, data.n()) + cfg.extra_samples + 2 * periods.min(500)
}

/// Samples `F_k(d) T` at the default window, for `k = 0..=k_max`.
pub fn synthesize_samples(
    p_tilde: &[ActionPolynomial],
    f: &FloquetClassification,
    l: f64,
    k_max: usize,
    conv: Convention,
    cfg: &InverseConfig,
) -> Result<Vec<Sample>> {
    let data = CharacterData::new(f);
    let mut out = Vec::new();
    for k in 0..=k_max {
        let fp = build_f_from(k, p_tilde, f, l, conv)?;
        let ns = default_window(&data, window_len(k, &data, cfg), cfg.window_margin.max(cfg.div_tol));
        let vals = iterate_values_from(&fp, &data, &ns, cfg.div_tol)?;
        out.extend(ns.iter().zip(vals).map(|(n, v)| Sample::new(k, *n, v)));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryStep {
    pub k: usize,
    pub lattice_size: usize,
    pub fit: FitDiagnostics,
    pub min_gap: f64,
    pub f: DerivativePolynomial,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Recovery {
    pub p_tilde: Vec<ActionPolynomial>,
    pub steps: Vec<RecoveryStep>,
}

impl Recovery {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for st in &self.steps {
            s.push_str(&format!(
                "k={} lattice={} unknowns={} samples={} cond={:.3e} residual={:.3e} gap={:.3e}\n",
                st.k, st.lattice_size, st.fit.unknowns, st.fit.samples, st.fit.cond, st.fit.residual, st.min_gap
            ));
        }
        for (i, p) in self.p_tilde.iter().enumerate() {
            s.push_str(&format!("p~_{}:\n", i + 1));
            for (e, c) in p.poly.terms() {
                s.push_str(&format!("  {:?} {:+.12e} {:+.12e}i\n", e, c.re, c.im));
            }
        }
        s
    }
}

/// Recovers `p~_1..p~_{k_max+1}` from samples of the first `k_max + 1`
/// invariants at iterates.
pub fn recover_normal_form(
    samples: &[Sample],
    f: &FloquetClassification,
    l: f64,
    k_max: usize,
    conv: Convention,
    cfg: &InverseConfig,
) -> Result<Recovery> {
    let data = CharacterData::new(f);
    let kinds = f.layout().action_kinds();
    let mut by_k: HashMap<usize, Vec<&Sample>> = HashMap::new();
    for s in samples {
        by_k.entry(s.k).or_default().push(s);
    }
    let mut p_tilde = Vec::new();
    let mut steps = Vec::new();
    for k in 0..=k_max {
        let rows = by_k.get(&k).cloned().unwrap_or_default();
        let lat = clear_denominators(k, &data, max_degree(k), cfg.gap_tol)?;
        let mut ns = Vec::new();
        let mut vals = Vec::new();
        for s in &rows {
            let div = data.iterate(s.n).min_divisor();
            if s.n == 0 || div < cfg.div_tol {
                return Err(Error::ResonantIterate { n: s.n, divisor: div });
            }
            ns.push(s.n);
            vals.push(s.value());
        }
        let mut with_zero = p_tilde.clone();
        with_zero.push(ActionPolynomial::zero(kinds.clone()));
        let lower = build_f_from(k, &with_zero, f, l, conv)?;
        let known = iterate_values_from(&lower, &data, &ns, cfg.div_tol)?;
        let resid: Vec<C64> = vals.iter().zip(&known).map(|(v, w)| v - w).collect();
        let total = vals.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
        let rnorm = resid.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        let (g, mut fit) = fit_reciprocal(&lat, &data, &ns, &resid, cfg.cond_max)?;
        fit.residual *= rnorm / total;
        if fit.residual > cfg.resid_tol {
            return Err(Error::InconsistentResidual { residual: fit.residual });
        }
        let new_part = peel_coefficients(&lat, &g);
        let mut a = derivatives_to_actions(&new_part.poly, &kinds, conv).scale(1.0 / leading_factor(k, l));
        a.prune(1e-14 * a.max_abs());
        p_tilde.push(ActionPolynomial::from_poly(kinds.clone(), a));
        let fp = DerivativePolynomial { k, poly: lower.poly.add(&new_part.poly) };
        steps.push(RecoveryStep { k, lattice_size: lat.betas.len(), fit, min_gap: lat.min_gap, f: fp });
    }
    Ok(Recovery { p_tilde, steps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::floquet::BlockData;
    use crate::wave::apply_derivatives;

    fn elliptic(alpha: f64) -> FloquetClassification {
        FloquetClassification::from_blocks(vec![BlockData::Elliptic { alpha, krein: 1 }])
    }

    #[test]
    fn single_term_is_recovered() {
        let ns: Vec<i64> = (1..=6).collect();
        let w = C64::new(-0.3, 0.9);
        let vals: Vec<C64> = ns.iter().map(|n| 2.5 * (w * *n as f64).exp()).collect();
        let (e, d) = fit_exponential_polynomial(&ns, &vals, &[w], COND_MAX).unwrap();
        assert!((e.coefficients[0] - 2.5).norm() < 1e-13);
        assert!(d.residual < 1e-14);
    }

    #[test]
    fn too_few_samples_is_rank_deficient() {
        let r = fit_exponential_polynomial(&[1], &[C64::new(1.0, 0.0)], &[C64::new(0.0, 1.0), C64::new(0.0, 2.0)], COND_MAX);
        assert!(matches!(r, Err(Error::RankDeficient { null_dim: 1, .. })));
    }

    #[test]
    fn colliding_frequencies_are_rejected() {
        let f = FloquetClassification::from_blocks(vec![
            BlockData::Elliptic { alpha: 0.6, krein: 1 },
            BlockData::Elliptic { alpha: 1.2, krein: 1 },
        ]);
        let r = clear_denominators(0, &CharacterData::new(&f), 2, GAP_TOL);
        assert!(matches!(r, Err(Error::RankDeficient { .. })));
    }

    #[test]
    fn noisy_samples_fit_within_noise() {
        let ns: Vec<i64> = (1..=20).collect();
        let ws = [C64::new(0.0, 0.7), C64::new(0.0, 1.9)];
        let noise = |n: i64| C64::new((n as f64 * 12.9898).sin(), (n as f64 * 78.233).cos()) * 1e-9;
        let vals: Vec<C64> = ns.iter().map(|n| (ws[0] * *n as f64).exp() - 0.5 * (ws[1] * *n as f64).exp() + noise(*n)).collect();
        let (e, _) = fit_exponential_polynomial(&ns, &vals, &ws, COND_MAX).unwrap();
        assert!((e.coefficients[0] - 1.0).norm() < 1e-8);
        assert!((e.coefficients[1] + 0.5).norm() < 1e-8);
    }

    #[test]
    fn both_fitting_routes_agree() {
        let f = elliptic(0.9);
        let data = CharacterData::new(&f);
        let fp = DerivativePolynomial {
            k: 0,
            poly: CPoly::var(1, 0).pow(2).scale(C64::new(0.4, 0.1)).add(&CPoly::constant(1, C64::new(-0.2, 0.0))),
        };
        let lat = clear_denominators(0, &data, 2, GAP_TOL).unwrap();
        let ns: Vec<i64> = (1..=10).collect();
        let vals = iterate_values_from(&fp, &data, &ns, 1e-8).unwrap();
        let (g, _) = fit_reciprocal(&lat, &data, &ns, &vals, COND_MAX).unwrap();
        let via_u = to_exponential(&lat, &g);
        let cleared: Vec<C64> = ns.iter().zip(&vals).map(|(n, v)| v * clearing_factor(&lat, &data, *n)).collect();
        let (direct, _) = fit_exponential_polynomial(&ns, &cleared, &lat.frequencies, COND_MAX).unwrap();
        for (a, b) in via_u.coefficients.iter().zip(&direct.coefficients) {
            assert!((a - b).norm() < 1e-9, "{a} vs {b}");
        }
        // and the peeled polynomial reproduces the input
        assert!(peel_coefficients(&lat, &g).poly.sub(&fp.poly).max_abs() < 1e-10);
    }

    #[test]
    fn peeling_inverts_the_u_calculus_in_two_slots() {
        let f = FloquetClassification::from_blocks(vec![
            BlockData::Elliptic { alpha: 0.9, krein: 1 },
            BlockData::Hyperbolic { lambda: 0.4, negative: false },
        ]);
        let data = CharacterData::new(&f);
        let mut poly = CPoly::zero(2);
        for (e, c) in [([0u8, 0u8], 0.3), ([1, 0], -1.0), ([1, 1], 0.25), ([0, 3], 0.1), ([2, 2], -0.05)] {
            poly.add_term(mono_pack(&e), C64::new(c, 0.2 * c));
        }
        let fp = DerivativePolynomial { k: 1, poly };
        let lat = clear_denominators(1, &data, 4, GAP_TOL).unwrap();
        let ns = default_window(&data, lat.monomials.len() + 4, 1e-8);
        let vals: Vec<C64> = ns.iter().map(|n| apply_derivatives(&fp, &data.iterate(*n), false)).collect();
        let (g, d) = fit_reciprocal(&lat, &data, &ns, &vals, COND_MAX).unwrap();
        assert!(d.residual < 1e-12);
        assert!(peel_coefficients(&lat, &g).poly.sub(&fp.poly).max_abs() < 1e-8);
    }

    #[test]
    fn round_trip_single_elliptic() {
        let f = elliptic(1.3);
        let kinds = f.layout().action_kinds();
        let i = CPoly::var(1, 0);
        let pt = vec![
            ActionPolynomial::from_poly(kinds.clone(), i.pow(2).scale(C64::new(0.3, 0.0)).add(&CPoly::constant(1, C64::new(-0.1, 0.0)))),
            ActionPolynomial::from_poly(kinds.clone(), i.pow(3).scale(C64::new(-0.2, 0.0)).add(&i.scale(C64::new(0.05, 0.0)))),
        ];
        let cfg = InverseConfig::default();
        let samples = synthesize_samples(&pt, &f, 1.7, 1, Convention::UniformD, &cfg).unwrap();
        let rec = recover_normal_form(&samples, &f, 1.7, 1, Convention::UniformD, &cfg).unwrap();
        for (a, b) in rec.p_tilde.iter().zip(&pt) {
            assert!(a.poly.sub(&b.poly).max_abs() < 1e-8, "{:?}", rec.to_text());
        }
    }

    #[test]
    fn samples_csv_round_trip() {
        let s = vec![Sample::new(0, 1, C64::new(0.5, -1.25)), Sample::new(1, -3, C64::new(1e-20, 3.0))];
        let mut buf = Vec::new();
        write_samples(&mut buf, &s).unwrap();
        assert!(String::from_utf8(buf.clone()).unwrap().starts_with("k,n,re,im"));
        assert_eq!(read_samples(&buf[..]).unwrap(), s);
    }

    #[test]
    fn window_skips_resonant_iterates() {
        let data = CharacterData::new(&elliptic(std::f64::consts::PI / 2.0));
        let w = default_window(&data, 6, 1e-8);
        assert!(w.iter().all(|n| n % 4 != 0));
        assert_eq!(w.len(), 6);
    }

    #[test]
    fn window_grows_for_slow_slots() {
        let cfg = InverseConfig::default();
        let fast = CharacterData::new(&elliptic(PI / 2.0 - 0.1));
        let slow = CharacterData::new(&elliptic(0.1));
        let near_minus_one = CharacterData::new(&elliptic(PI - 0.1));
        assert!(window_len(1, &slow, &cfg) > window_len(1, &fast, &cfg) + 80);
        assert_eq!(window_len(1, &slow, &cfg), window_len(1, &near_minus_one, &cfg));
        let w = default_window(&slow, window_len(1, &slow, &cfg), cfg.window_margin);
        assert!(w.iter().all(|n| slow.iterate(*n).min_divisor() >= cfg.window_margin));
    }
}
