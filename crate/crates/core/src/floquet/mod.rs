//! Symplectic classification of Poincare maps.
//!
//! Coordinates are ordered `(x_1..x_n, xi_1..xi_n)` with
//! `omega(u, v) = u^T J v`, `J = [[0, I], [-I, 0]]`.
//!
//! `classify_poincare` returns a real symplectic basis `B` with
//! `B^{-1} M B = N`, where `N` is the time-one flow of the model
//! Hamiltonian `sum alpha_s Ie + lambda Ih + mu IchRe + nu IchIm`
//! (negative hyperbolic blocks carry an extra sign).

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::weyl::{ActionPolynomial, Block, BlockLayout, CPoly};
use crate::weyl::symbol::mono_set;

pub const TOL_EIG: f64 = 1e-9;
pub const TOL_SYMP: f64 = 1e-10;
/// Distance from the unit circle below which an eigenvalue counts as elliptic.
const UNIT_CIRCLE_TOL: f64 = 1e-6;

pub fn j_matrix(n: usize) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        j[(i, n + i)] = 1.0;
        j[(n + i, i)] = -1.0;
    }
    j
}

/// `max |M^T J M - J|`.
pub fn symplectic_residual(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows() / 2;
    let j = j_matrix(n);
    (m.transpose() * &j * m - j).amax()
}

pub fn omega_c(u: &DVector<C64>, v: &DVector<C64>) -> C64 {
    let n = u.len() / 2;
    (0..n).map(|i| u[i] * v[n + i] - u[n + i] * v[i]).sum()
}

fn omega_r(u: &DVector<f64>, v: &DVector<f64>) -> f64 {
    let n = u.len() / 2;
    (0..n).map(|i| u[i] * v[n + i] - u[n + i] * v[i]).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymplecticMatrix {
    m: DMatrix<f64>,
}

impl SymplecticMatrix {
    /// Validates `M^T J M = J` relative to `|M|^2`.
    pub fn new(m: DMatrix<f64>, tol_symp: f64) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() % 2 != 0 || m.nrows() == 0 {
            return Err(Error::Invalid(format!("{}x{} is not an even square matrix", m.nrows(), m.ncols())));
        }
        let res = symplectic_residual(&m);
        let scale = m.amax().max(1.0).powi(2);
        if res > tol_symp * scale {
            return Err(Error::NotSymplectic { residual: res });
        }
        Ok(SymplecticMatrix { m })
    }

    pub fn n(&self) -> usize {
        self.m.nrows() / 2
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BlockData {
    /// `alpha` in `(0, pi)`; `krein = -1` means the model angle is `-alpha`.
    Elliptic { alpha: f64, krein: i8 },
    Hyperbolic { lambda: f64, negative: bool },
    Loxodromic { mu: f64, nu: f64 },
}

impl BlockData {
    fn block(&self) -> Block {
        match self {
            BlockData::Elliptic { .. } => Block::Elliptic,
            BlockData::Hyperbolic { negative, .. } => Block::Hyperbolic { negative: *negative },
            BlockData::Loxodromic { .. } => Block::Loxodromic,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FloquetClassification {
    pub blocks: Vec<BlockData>,
    /// Real symplectic basis `B` with `B^{-1} M B = N`.
    pub basis: DMatrix<f64>,
    /// Normalized complex eigenvectors, one or two per block.
    pub eigenbasis: Vec<DVector<C64>>,
}

impl FloquetClassification {
    /// Classification with identity basis, for synthetic normal-form data.
    pub fn from_blocks(blocks: Vec<BlockData>) -> Self {
        let n: usize = blocks.iter().map(|b| b.block().width()).sum();
        FloquetClassification { blocks, basis: DMatrix::identity(2 * n, 2 * n), eigenbasis: Vec::new() }
    }

    pub fn layout(&self) -> BlockLayout {
        BlockLayout::new(self.blocks.iter().map(|b| b.block()).collect())
    }

    pub fn n(&self) -> usize {
        self.layout().n()
    }

    /// `(p, q, c)`.
    pub fn pqc(&self) -> (usize, usize, usize) {
        let mut t = (0, 0, 0);
        for b in &self.blocks {
            match b {
                BlockData::Elliptic { .. } => t.0 += 1,
                BlockData::Hyperbolic { .. } => t.1 += 1,
                BlockData::Loxodromic { .. } => t.2 += 1,
            }
        }
        t
    }

    pub fn alpha(&self) -> Vec<f64> {
        self.blocks
            .iter()
            .filter_map(|b| if let BlockData::Elliptic { alpha, .. } = b { Some(*alpha) } else { None })
            .collect()
    }

    pub fn lambda(&self) -> Vec<f64> {
        self.blocks
            .iter()
            .filter_map(|b| if let BlockData::Hyperbolic { lambda, .. } = b { Some(*lambda) } else { None })
            .collect()
    }

    pub fn neg_flags(&self) -> Vec<bool> {
        self.blocks
            .iter()
            .filter_map(|b| if let BlockData::Hyperbolic { negative, .. } = b { Some(*negative) } else { None })
            .collect()
    }

    pub fn mu_nu(&self) -> Vec<(f64, f64)> {
        self.blocks
            .iter()
            .filter_map(|b| if let BlockData::Loxodromic { mu, nu } = b { Some((*mu, *nu)) } else { None })
            .collect()
    }

    pub fn has_negative_hyperbolic(&self) -> bool {
        self.neg_flags().iter().any(|f| *f)
    }

    /// Multiplicative generators, one per action slot:
    /// `e^{i alpha_s}`, `+-e^{lambda}`, `e^{mu + i nu}`, `e^{mu - i nu}`.
    pub fn generators(&self) -> Vec<C64> {
        let mut out = Vec::new();
        for b in &self.blocks {
            match *b {
                BlockData::Elliptic { alpha, krein } => out.push(C64::from_polar(1.0, alpha * krein as f64)),
                BlockData::Hyperbolic { lambda, negative } => {
                    out.push(C64::new(if negative { -lambda.exp() } else { lambda.exp() }, 0.0))
                }
                BlockData::Loxodromic { mu, nu } => {
                    out.push(C64::from_polar(mu.exp(), nu));
                    out.push(C64::from_polar(mu.exp(), -nu));
                }
            }
        }
        out
    }

    /// Exponent variables `(theta, phi)` per action slot, with
    /// `rho = e^theta` and character prefactor `e^{phi/2}`.
    pub fn theta_vars(&self) -> Vec<(C64, C64)> {
        let mut out = Vec::new();
        for b in &self.blocks {
            match *b {
                BlockData::Elliptic { alpha, krein } => {
                    let t = C64::new(0.0, alpha * krein as f64);
                    out.push((t, t));
                }
                BlockData::Hyperbolic { lambda, negative } => {
                    let phi = C64::new(lambda, 0.0);
                    let t = if negative { C64::new(lambda, PI) } else { phi };
                    out.push((t, phi));
                }
                BlockData::Loxodromic { mu, nu } => {
                    out.push((C64::new(mu, nu), C64::new(mu, nu)));
                    out.push((C64::new(mu, -nu), C64::new(mu, -nu)));
                }
            }
        }
        out
    }

    /// Poisson eigenvalues of the eigen-coordinates under the model
    /// Hamiltonian, indexed by symbol slot (`2n` entries).
    pub fn slot_eigenvalues(&self) -> Vec<C64> {
        let n = self.n();
        let mut out = vec![C64::new(0.0, 0.0); 2 * n];
        for (b, (_, i)) in self.blocks.iter().zip(self.layout().slots()) {
            match *b {
                BlockData::Elliptic { alpha, krein } => {
                    let a = alpha * krein as f64;
                    out[i] = C64::new(0.0, -a);
                    out[n + i] = C64::new(0.0, a);
                }
                BlockData::Hyperbolic { lambda, .. } => {
                    out[i] = C64::new(lambda, 0.0);
                    out[n + i] = C64::new(-lambda, 0.0);
                }
                BlockData::Loxodromic { mu, nu } => {
                    out[i] = C64::new(mu, nu);
                    out[i + 1] = C64::new(mu, -nu);
                    out[n + i] = C64::new(-mu, -nu);
                    out[n + i + 1] = C64::new(-mu, nu);
                }
            }
        }
        out
    }

    /// Hamilton matrix `A` of the model Hamiltonian (`exp(A) = N`).
    /// Negative hyperbolic blocks have no real logarithm.
    pub fn hamilton_matrix(&self) -> Result<DMatrix<f64>> {
        if self.has_negative_hyperbolic() {
            return Err(Error::Invalid("negative hyperbolic block has no real Hamiltonian".into()));
        }
        let n = self.n();
        let mut a = DMatrix::zeros(2 * n, 2 * n);
        for (b, (_, i)) in self.blocks.iter().zip(self.layout().slots()) {
            match *b {
                BlockData::Elliptic { alpha, krein } => {
                    let s = alpha * krein as f64;
                    a[(i, n + i)] = s;
                    a[(n + i, i)] = -s;
                }
                BlockData::Hyperbolic { lambda, .. } => {
                    a[(i, i)] = lambda;
                    a[(n + i, n + i)] = -lambda;
                }
                BlockData::Loxodromic { mu, nu } => {
                    let j = i + 1;
                    a[(i, i)] = mu;
                    a[(i, j)] = -nu;
                    a[(j, i)] = nu;
                    a[(j, j)] = mu;
                    a[(n + i, n + i)] = -mu;
                    a[(n + i, n + j)] = -nu;
                    a[(n + j, n + i)] = nu;
                    a[(n + j, n + j)] = -mu;
                }
            }
        }
        Ok(a)
    }

    /// `exp(t A)` in closed form; at `t = 1` negative hyperbolic blocks get
    /// their sign, other `t` ignore it.
    pub fn model_flow(&self, t: f64) -> DMatrix<f64> {
        let n = self.n();
        let mut m = DMatrix::zeros(2 * n, 2 * n);
        for (b, (_, i)) in self.blocks.iter().zip(self.layout().slots()) {
            match *b {
                BlockData::Elliptic { alpha, krein } => {
                    let s = t * alpha * krein as f64;
                    m[(i, i)] = s.cos();
                    m[(i, n + i)] = s.sin();
                    m[(n + i, i)] = -s.sin();
                    m[(n + i, n + i)] = s.cos();
                }
                BlockData::Hyperbolic { lambda, negative } => {
                    let sg = if negative && t == 1.0 { -1.0 } else { 1.0 };
                    m[(i, i)] = sg * (t * lambda).exp();
                    m[(n + i, n + i)] = sg * (-t * lambda).exp();
                }
                BlockData::Loxodromic { mu, nu } => {
                    let j = i + 1;
                    let (c, s) = ((t * nu).cos(), (t * nu).sin());
                    let (ep, em) = ((t * mu).exp(), (-t * mu).exp());
                    m[(i, i)] = ep * c;
                    m[(i, j)] = -ep * s;
                    m[(j, i)] = ep * s;
                    m[(j, j)] = ep * c;
                    m[(n + i, n + i)] = em * c;
                    m[(n + i, n + j)] = -em * s;
                    m[(n + j, n + i)] = em * s;
                    m[(n + j, n + j)] = em * c;
                }
            }
        }
        m
    }

    /// Block normal form `N`.
    pub fn model_matrix(&self) -> DMatrix<f64> {
        self.model_flow(1.0)
    }

    /// `B N B^{-1}`.
    pub fn reassemble(&self) -> DMatrix<f64> {
        let inv = self.basis.clone().try_inverse().expect("basis is invertible");
        &self.basis * self.model_matrix() * inv
    }
}

/// Model Hamiltonian `sum alpha_s Ie + lambda Ih + mu IchRe + nu IchIm`.
pub fn quadratic_hamiltonian(f: &FloquetClassification) -> ActionPolynomial {
    let layout = f.layout();
    let kinds = layout.action_kinds();
    let mut poly = CPoly::zero(kinds.len());
    let mut slot = 0;
    for b in &f.blocks {
        match *b {
            BlockData::Elliptic { alpha, krein } => {
                poly.add_term(mono_set(0, slot, 1), C64::new(alpha * krein as f64, 0.0));
                slot += 1;
            }
            BlockData::Hyperbolic { lambda, .. } => {
                poly.add_term(mono_set(0, slot, 1), C64::new(lambda, 0.0));
                slot += 1;
            }
            BlockData::Loxodromic { mu, nu } => {
                poly.add_term(mono_set(0, slot, 1), C64::new(mu, 0.0));
                poly.add_term(mono_set(0, slot + 1, 1), C64::new(nu, 0.0));
                slot += 2;
            }
        }
    }
    ActionPolynomial::from_poly(kinds, poly)
}

fn null_vector(m: &DMatrix<f64>, rho: C64) -> DVector<C64> {
    let d = m.nrows();
    let a = DMatrix::<C64>::from_fn(d, d, |i, j| C64::new(m[(i, j)], 0.0) - if i == j { rho } else { C64::new(0.0, 0.0) });
    let svd = a.svd(false, true);
    let vt = svd.v_t.expect("right singular vectors requested");
    let (k, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, s)| if *s < acc.1 { (i, *s) } else { acc });
    let v = DVector::from_fn(d, |i, _| vt[(k, i)].conj());
    normalize_phase(v)
}

/// Unit norm, first significant component real positive.
fn normalize_phase(v: DVector<C64>) -> DVector<C64> {
    let nrm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let v = v / C64::new(nrm, 0.0);
    let lead = v.iter().find(|z| z.norm() > 1e-8).copied().unwrap_or(C64::new(1.0, 0.0));
    let ph = lead.conj() / lead.norm();
    v * ph
}

fn re(v: &DVector<C64>) -> DVector<f64> {
    v.map(|z| z.re)
}

fn im(v: &DVector<C64>) -> DVector<f64> {
    v.map(|z| z.im)
}

/// Classifies a symplectic matrix into elliptic, hyperbolic and loxodromic
/// blocks and builds the normalizing symplectic basis.
pub fn classify_poincare(sm: &SymplecticMatrix, tol_eig: f64) -> Result<FloquetClassification> {
    let m = sm.matrix();
    let n = sm.n();
    let eig: Vec<C64> = m.clone().complex_eigenvalues().iter().copied().collect();
    for (i, r) in eig.iter().enumerate() {
        for s in [1.0, -1.0] {
            if (r - s).norm() <= tol_eig * r.norm().max(1.0) {
                return Err(Error::DegenerateSpectrum { reason: format!("eigenvalue {r} is within tolerance of {s}") });
            }
        }
        for r2 in eig.iter().skip(i + 1) {
            if (r - r2).norm() <= tol_eig * r.norm().max(1.0) {
                return Err(Error::DegenerateSpectrum { reason: format!("repeated eigenvalue {r}") });
            }
        }
    }
    let mut ell = Vec::new();
    let mut hyp = Vec::new();
    let mut lox = Vec::new();
    for r in &eig {
        let on_circle = (r.norm() - 1.0).abs() <= UNIT_CIRCLE_TOL;
        let real = r.im.abs() <= 1e-12 * r.norm().max(1.0);
        if on_circle && !real {
            if r.im > 0.0 {
                ell.push(*r);
            }
        } else if real {
            if r.norm() > 1.0 {
                hyp.push(*r);
            }
        } else if r.norm() > 1.0 && r.im > 0.0 {
            lox.push(*r);
        }
    }
    if ell.len() + hyp.len() + 2 * lox.len() != n {
        return Err(Error::DegenerateSpectrum {
            reason: format!("eigenvalues do not pair symplectically: {eig:?}"),
        });
    }
    ell.sort_by(|a, b| a.arg().total_cmp(&b.arg()));
    hyp.sort_by(|a, b| a.norm().total_cmp(&b.norm()));
    lox.sort_by(|a, b| a.norm().total_cmp(&b.norm()).then(a.arg().total_cmp(&b.arg())));

    let mut blocks = Vec::new();
    let mut basis = DMatrix::<f64>::zeros(2 * n, 2 * n);
    let mut eigenbasis = Vec::new();
    let mut slot = 0;
    for r in ell {
        let v = null_vector(m, r);
        let (a, b) = (re(&v), im(&v));
        let kappa = omega_r(&a, &b);
        if kappa.abs() < 1e-12 {
            return Err(Error::DegenerateSpectrum { reason: "elliptic eigenvector is isotropic".into() });
        }
        let s = 1.0 / kappa.abs().sqrt();
        let krein: i8 = if kappa > 0.0 { 1 } else { -1 };
        basis.set_column(slot, &(&a * s));
        basis.set_column(n + slot, &(&b * (s * krein as f64)));
        blocks.push(BlockData::Elliptic { alpha: r.arg(), krein });
        eigenbasis.push(v.scale_c(s));
        slot += 1;
    }
    for r in hyp {
        let vp = re(&null_vector(m, r));
        let vm = re(&null_vector(m, 1.0 / r));
        let w = omega_r(&vp, &vm);
        if w.abs() < 1e-12 {
            return Err(Error::DegenerateSpectrum { reason: "hyperbolic pair is isotropic".into() });
        }
        let s = 1.0 / w.abs().sqrt();
        basis.set_column(slot, &(&vp * s));
        basis.set_column(n + slot, &(&vm * (s * w.signum())));
        blocks.push(BlockData::Hyperbolic { lambda: r.norm().ln(), negative: r.re < 0.0 });
        eigenbasis.push(vp.map(|x| C64::new(x * s, 0.0)));
        eigenbasis.push(vm.map(|x| C64::new(x * s * w.signum(), 0.0)));
        slot += 1;
    }
    for r in lox {
        let v1 = null_vector(m, r);
        let r2 = C64::from_polar(1.0 / r.norm(), r.arg());
        let v2 = null_vector(m, r2);
        let w = omega_c(&v1, &v2.map(|z| z.conj()));
        if w.norm() < 1e-12 {
            return Err(Error::DegenerateSpectrum { reason: "loxodromic quadruple is isotropic".into() });
        }
        let c2 = (C64::new(2.0, 0.0) / w).conj();
        let v2 = v2 * c2;
        let (i, j) = (slot, slot + 1);
        basis.set_column(i, &re(&v1));
        basis.set_column(j, &(-im(&v1)));
        basis.set_column(n + i, &re(&v2));
        basis.set_column(n + j, &(-im(&v2)));
        blocks.push(BlockData::Loxodromic { mu: r.norm().ln(), nu: r.arg() });
        eigenbasis.push(v1);
        eigenbasis.push(v2);
        slot += 2;
    }
    let fc = FloquetClassification { blocks, basis, eigenbasis };
    let res = symplectic_residual(&fc.basis);
    if res > 1e-6 {
        return Err(Error::DegenerateSpectrum { reason: format!("normalized basis not symplectic ({res:.2e})") });
    }
    Ok(fc)
}

trait ScaleC {
    fn scale_c(&self, s: f64) -> Self;
}

impl ScaleC for DVector<C64> {
    fn scale_c(&self, s: f64) -> Self {
        self.map(|z| z * s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResonanceReport {
    pub order_checked: usize,
    pub margin: f64,
    /// Net exponent of each generator (signed).
    pub worst_multiindex: Vec<i64>,
}

/// Minimum of `|1 - prod g_j^{k_j}|` over nonzero integer `k` with
/// `|k|_1 <= m_max`, where `g_j` are the multiplicative generators.
pub fn resonance_margin(f: &FloquetClassification, m_max: usize) -> ResonanceReport {
    let g = f.generators();
    let d = g.len();
    let mut best = (f64::INFINITY, vec![0i64; d]);
    let mut k = vec![0i64; d];
    fn rec(j: usize, budget: i64, k: &mut Vec<i64>, g: &[C64], best: &mut (f64, Vec<i64>)) {
        if j == g.len() {
            if k.iter().all(|v| *v == 0) {
                return;
            }
            let mut p = C64::new(1.0, 0.0);
            for (gi, ki) in g.iter().zip(k.iter()) {
                p *= gi.powi(*ki as i32);
            }
            let v = (C64::new(1.0, 0.0) - p).norm();
            if v < best.0 {
                *best = (v, k.clone());
            }
            return;
        }
        for e in -budget..=budget {
            k[j] = e;
            rec(j + 1, budget - e.abs(), k, g, best);
        }
        k[j] = 0;
    }
    rec(0, m_max as i64, &mut k, &g, &mut best);
    if best.0 < 1e-12 {
        best.0 = 0.0;
    }
    ResonanceReport { order_checked: m_max, margin: best.0, worst_multiindex: best.1 }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CharacterValue {
    pub value: C64,
    /// The overall phase is only defined modulo quarter turns.
    pub phase_modulo_quarter_turn: bool,
}

/// Product formula `prod e^{theta/2} / (1 - e^theta)` over the
/// representative eigenvalues.
pub fn character(f: &FloquetClassification) -> CharacterValue {
    let mut v = C64::new(1.0, 0.0);
    for b in &f.blocks {
        let factors: Vec<(C64, C64)> = match *b {
            BlockData::Elliptic { alpha, .. } => vec![(C64::from_polar(1.0, alpha), C64::new(0.0, alpha))],
            BlockData::Hyperbolic { lambda, negative } => {
                let rho = if negative { -lambda.exp() } else { lambda.exp() };
                vec![(C64::new(rho, 0.0), C64::new(lambda, 0.0))]
            }
            BlockData::Loxodromic { mu, nu } => vec![
                (C64::new(mu, nu).exp(), C64::new(mu, nu)),
                (C64::new(mu, -nu).exp(), C64::new(mu, -nu)),
            ],
        };
        for (rho, phi) in factors {
            v *= (phi / 2.0).exp() / (C64::new(1.0, 0.0) - rho);
        }
    }
    CharacterValue { value: v, phase_modulo_quarter_turn: true }
}

/// `|det(I - M)|^{-1/2}`.
pub fn character_direct(sm: &SymplecticMatrix) -> Result<f64> {
    let m = sm.matrix();
    let d = m.nrows();
    let det = (DMatrix::<f64>::identity(d, d) - m).determinant();
    if det.abs() <= 1e-14 * m.amax().max(1.0).powi(d as i32) {
        return Err(Error::SingularIMinusP);
    }
    Ok(det.abs().powf(-0.5))
}
