//! Quantum Birkhoff normal form of the model expansion.
//!
//! Step `k` conjugates by `exp(i h^{k/2} Q_k)` and normalizes term
//! `m = k + 2`. The defining equation for the symbol `Q_k` is
//!
//! `2i L^{-1} delta(Q_k) + D_k = W(f)`,
//!
//! with `D_k` the `R^0` coefficient of term `m` and `W(f)` its
//! diagonal, s-averaged part. In eigen-coordinates the equation is
//! diagonal: a monomial with Poisson exponent `theta` and Fourier mode `k`
//! gets `q = -(L^2/2) d / (2 pi i k + theta)`.

pub mod regroup;
pub mod verify;

use num_complex::Complex64 as C64;
use std::f64::consts::PI;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::floquet::FloquetClassification;
use crate::laplacian::SemiclassicalExpansion;
use crate::weyl::action::{classical_to_operator, diagonal_to_actions, is_diagonal, monomial_exponent};
use crate::weyl::symbol::{mono_degree, mono_unpack};
use crate::weyl::{ActionPolynomial, CPoly, EigenCoordinateMap, Op, OpAlgebra, SymbolPolynomial, Trig};

pub use regroup::regroup_homogeneous;
pub use verify::{verify_normal_form, VerificationReport};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalFormConfig {
    pub k_max: usize,
    pub div_tol: f64,
    pub tol_homo: f64,
    pub tol_real: f64,
}

impl Default for NormalFormConfig {
    fn default() -> Self {
        NormalFormConfig { k_max: 2, div_tol: 1e-8, tol_homo: 1e-9, tol_real: 1e-8 }
    }
}

impl NormalFormConfig {
    /// Highest expansion term consumed.
    pub fn order(&self) -> usize {
        2 * self.k_max + 4
    }
}

/// One small divisor used by a step.
#[derive(Debug, Clone, PartialEq)]
pub struct DivisorRecord {
    pub multi_index: Vec<u8>,
    /// `|1 - exp(theta)|`.
    pub divisor: f64,
}

#[derive(Debug, Clone)]
pub struct HomologicalStep {
    pub k: usize,
    /// Expansion term normalized by this step.
    pub order: usize,
    /// Generator symbol in the model coordinates.
    pub q: SymbolPolynomial,
    /// Action polynomial extracted at even orders.
    pub f: Option<ActionPolynomial>,
    /// Relative residual of the defining equation.
    pub residual: f64,
    pub divisors: Vec<DivisorRecord>,
}

#[derive(Debug, Clone)]
pub struct NormalFormResult {
    pub floquet: FloquetClassification,
    pub l: f64,
    pub k_max: usize,
    pub order: usize,
    pub steps: Vec<HomologicalStep>,
    /// `f_j`, `j = 0..=k_max`, in the action operators.
    pub f: Vec<ActionPolynomial>,
    /// `p_k`, `k = 1..=k_max + 1` (index `k - 1`).
    pub p: Vec<ActionPolynomial>,
    /// `p~_k`, `k = 1..=k_max + 1` (index `k - 1`).
    pub p_tilde: Vec<ActionPolynomial>,
    /// Conjugated expansion, all terms.
    pub normalized: Vec<Op>,
    /// Largest imaginary coefficient among the `f_j`.
    pub max_imag_f: f64,
}

impl NormalFormResult {
    pub fn max_step_residual(&self) -> f64 {
        self.steps.iter().fold(0.0, |m, s| m.max(s.residual))
    }

    /// `p~_k` for `k >= 1`.
    pub fn p_tilde(&self, k: usize) -> Result<&ActionPolynomial> {
        if k == 0 {
            return Err(Error::Invalid("p-tilde is indexed from 1".into()));
        }
        self.p_tilde.get(k - 1).ok_or(Error::MissingNormalForm { needed: k })
    }

    /// Stable text form: one `name | exponents | re | im` line per coefficient.
    pub fn to_text(&self) -> String {
        let kinds: Vec<&str> = self.floquet.layout().action_kinds().iter().map(|k| k.label()).collect();
        let mut s = format!("# actions: {}\n", kinds.join(","));
        let mut block = |name: String, ap: &ActionPolynomial| {
            for (e, v) in ap.poly.terms() {
                let idx: Vec<String> = e.iter().map(|x| x.to_string()).collect();
                let _ = writeln!(s, "{name} | ({}) | {:+.15e} | {:+.15e}", idx.join(","), v.re, v.im);
            }
        };
        for (j, f) in self.f.iter().enumerate() {
            block(format!("f{j}"), f);
        }
        for (k, p) in self.p.iter().enumerate() {
            block(format!("p{}", k + 1), p);
        }
        for (k, p) in self.p_tilde.iter().enumerate() {
            block(format!("pt{}", k + 1), p);
        }
        s
    }
}

struct Solver<'a> {
    f: &'a FloquetClassification,
    l: f64,
    cfg: NormalFormConfig,
    ecm: EigenCoordinateMap,
    slot_eigs: Vec<C64>,
}

#[derive(Debug)]
struct StepSolution {
    q: SymbolPolynomial,
    diag: SymbolPolynomial,
    classical: CPoly,
    divisors: Vec<DivisorRecord>,
}

impl<'a> Solver<'a> {
    fn new(f: &'a FloquetClassification, l: f64, cfg: NormalFormConfig) -> Self {
        let layout = f.layout();
        Solver { f, l, cfg, ecm: EigenCoordinateMap::new(&layout), slot_eigs: f.slot_eigenvalues() }
    }

    fn solve(&self, step: usize, d: &SymbolPolynomial) -> Result<StepSolution> {
        let n = d.n();
        let cap = d.cap();
        let layout = self.f.layout();
        let mut z = self.ecm.to_eigen(d)?;
        z.prune(1e-13 * d.max_abs().max(1.0));
        let mut q = SymbolPolynomial::zero(n, cap);
        let mut diag = SymbolPolynomial::zero(n, cap);
        let mut classical = CPoly::zero(n);
        let mut divisors = Vec::new();
        let pref = C64::new(-self.l * self.l / 2.0, 0.0);
        for (m, t) in z.raw_terms() {
            let theta = if is_diagonal(n, m) {
                let avg = t.average();
                if avg.norm() > 0.0 {
                    diag.add_term(m, Trig::constant(avg));
                    classical.add_assign_scaled(&diagonal_to_actions(&layout, m)?, avg);
                }
                C64::new(0.0, 0.0)
            } else {
                let theta = monomial_exponent(n, m, &self.slot_eigs);
                let div = (C64::new(1.0, 0.0) - theta.exp()).norm();
                if div < self.cfg.div_tol {
                    return Err(Error::ResonantDivisor {
                        step,
                        multi_index: mono_unpack(m, 2 * n),
                        order: mono_degree(m),
                        divisor: div,
                    });
                }
                divisors.push(DivisorRecord { multi_index: mono_unpack(m, 2 * n), divisor: div });
                theta
            };
            let mut coef = vec![C64::new(0.0, 0.0); t.coeffs().len()];
            let hw = t.half_width() as i64;
            for (kk, c) in t.modes() {
                let den = C64::new(0.0, 2.0 * PI * kk as f64) + theta;
                if den.norm() == 0.0 {
                    continue;
                }
                coef[(kk + hw) as usize] = pref * c / den;
            }
            q.add_term(m, Trig::from_coeffs(coef));
        }
        Ok(StepSolution { q: self.ecm.from_eigen(&q)?, diag: self.ecm.from_eigen(&diag)?, classical, divisors })
    }
}

/// `sum_{j >= 1} (i^j / j!) ad(Q)^j X` placed at orders `m + j k`.
fn propagate(alg: &OpAlgebra, terms: &mut [Op], q: &Op, k: usize) -> Result<()> {
    let top = terms.len() - 1;
    let old: Vec<Op> = terms.to_vec();
    for (m, x) in old.iter().enumerate() {
        if x.is_zero() || m + k > top {
            continue;
        }
        let mut cur = x.clone();
        let mut coef = C64::new(1.0, 0.0);
        let mut j = 1;
        while m + j * k <= top {
            cur = alg.ad(q, &cur)?;
            if cur.is_zero() {
                break;
            }
            coef *= C64::new(0.0, 1.0) / j as f64;
            terms[m + j * k].add_assign_scaled(&cur, coef);
            j += 1;
        }
    }
    for t in terms.iter_mut() {
        let tol = 1e-16 * t.max_abs().max(1.0);
        t.prune(tol);
    }
    Ok(())
}

/// Runs the odd and even steps up to `2 k_max + 4`, then regroups.
pub fn run_normal_form(
    model: &SemiclassicalExpansion,
    f: &FloquetClassification,
    cfg: NormalFormConfig,
) -> Result<NormalFormResult> {
    let order = cfg.order();
    if !model.conjugated {
        return Err(Error::Invalid("normal form needs the conjugated expansion".into()));
    }
    if model.order() < order {
        return Err(Error::TruncationExceeded {
            reason: format!("expansion has {} terms, normal form needs {}", model.order() + 1, order + 1),
        });
    }
    if f.has_negative_hyperbolic() {
        return Err(Error::Invalid("negative hyperbolic blocks are not supported".into()));
    }
    let l = model.l;
    let layout = f.layout();
    let alg = model.algebra();
    let solver = Solver::new(f, l, cfg);
    let mut terms: Vec<Op> = model.terms[..=order].to_vec();
    let mut steps = Vec::new();
    let mut fs = Vec::new();
    let mut max_imag_f = 0.0f64;
    for k in 1..=order - 2 {
        let m = k + 2;
        let d = terms[m].r0().clone();
        let sol = solver.solve(k, &d)?;
        let delta = alg.delta(&sol.q)?;
        let res = delta.scale(C64::new(0.0, 2.0 / l)).add(&d).sub(&sol.diag);
        let residual = res.max_abs() / d.max_abs().max(1.0);
        let fop = if m % 2 == 0 {
            let tol = 1e-14 * sol.classical.max_abs().max(1.0);
            let ap = classical_to_operator(&layout, &solver.ecm, &sol.classical, tol)?;
            max_imag_f = max_imag_f.max(ap.max_imag() / ap.max_abs().max(1.0));
            fs.push(ap.clone());
            Some(ap)
        } else {
            if !sol.diag.is_zero() {
                return Err(Error::NonActionDiagonal { multi_index: vec![] });
            }
            None
        };
        if !sol.q.is_zero() {
            propagate(&alg, &mut terms, &Op::from_symbol(sol.q.clone()), k)?;
        }
        steps.push(HomologicalStep { k, order: m, q: sol.q, f: fop, residual, divisors: sol.divisors });
    }
    let mut out = NormalFormResult {
        floquet: f.clone(),
        l,
        k_max: cfg.k_max,
        order,
        steps,
        f: fs,
        p: Vec::new(),
        p_tilde: Vec::new(),
        normalized: terms,
        max_imag_f,
    };
    regroup_homogeneous(&mut out);
    Ok(out)
}
