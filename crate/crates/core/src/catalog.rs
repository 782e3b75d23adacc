//! Geometries with closed-form Fermi jets.
//!
//! Warped metrics `|dy|^2 + f(s, y)^2 ds^2` along `y = 0` give
//! `g^oo = f^{-2}`, `g^ij = delta`, `J = f`, and curvature
//! `K_ij = -d_i d_j f`.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::jacobi::CurvatureLoop;
use crate::laplacian::jet::series_pow;
use crate::laplacian::MetricJet;
use crate::weyl::{SymbolPolynomial, Trig};

pub const DEFAULT_CAP: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Geometry {
    /// Surface of constant curvature `k` around a geodesic of length `l`.
    ConstantCurvature { l: f64, k: f64 },
    /// `f = 1 - K(s) y^2 / 2` with `K = a + b cos(2 pi s / l)`.
    HillLoop { l: f64, a: f64, b: f64 },
    /// `f = c(sqrt(k1) y1) c(sqrt(k2) y2)`, `c` the cosine or hyperbolic cosine by sign.
    BlockDiagonal { l: f64, k1: f64, k2: f64 },
    /// Equator of a surface of revolution with profile `1 + sum_{d >= 2} c_d y^d`.
    Revolution { l: f64, profile: Vec<f64> },
    /// Only `g^oo = 1 + K_ij y_i y_j` with constant `K`; higher jets vanish.
    QuadraticModel { l: f64, k: Vec<Vec<f64>> },
}

/// Taylor coefficients of `cos(sqrt(k) y)` (or `cosh` for `k < 0`).
fn cos_series(k: f64, order: usize) -> Vec<f64> {
    let mut c = vec![0.0; order + 1];
    let mut term = 1.0;
    for j in 0..=order / 2 {
        c[2 * j] = term;
        term *= -k / ((2 * j + 1) * (2 * j + 2)) as f64;
    }
    c
}

fn univariate(n: usize, slot: usize, c: &[Trig], cap: usize) -> SymbolPolynomial {
    let mut p = SymbolPolynomial::zero(n, cap);
    for (d, v) in c.iter().enumerate() {
        let mut e = vec![0u8; 2 * n];
        e[slot] = d as u8;
        p = p.add(&SymbolPolynomial::monomial(n, cap, &e, v.clone()));
    }
    p
}

fn reals(c: &[f64]) -> Vec<Trig> {
    c.iter().map(|v| Trig::real(*v)).collect()
}

impl Geometry {
    pub fn n(&self) -> usize {
        match self {
            Geometry::BlockDiagonal { .. } => 2,
            Geometry::QuadraticModel { k, .. } => k.len(),
            _ => 1,
        }
    }

    pub fn length(&self) -> f64 {
        match self {
            Geometry::ConstantCurvature { l, .. }
            | Geometry::HillLoop { l, .. }
            | Geometry::BlockDiagonal { l, .. }
            | Geometry::Revolution { l, .. }
            | Geometry::QuadraticModel { l, .. } => *l,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Geometry::ConstantCurvature { .. } => "constant-curvature",
            Geometry::HillLoop { .. } => "hill-loop",
            Geometry::BlockDiagonal { .. } => "block-diagonal",
            Geometry::Revolution { .. } => "revolution",
            Geometry::QuadraticModel { .. } => "quadratic-model",
        }
    }

    /// Same geometry under `g -> eps^2 g`.
    pub fn scaled(&self, eps: f64) -> Geometry {
        let e2 = eps * eps;
        match self.clone() {
            Geometry::ConstantCurvature { l, k } => Geometry::ConstantCurvature { l: eps * l, k: k / e2 },
            Geometry::HillLoop { l, a, b } => Geometry::HillLoop { l: eps * l, a: a / e2, b: b / e2 },
            Geometry::BlockDiagonal { l, k1, k2 } => Geometry::BlockDiagonal { l: eps * l, k1: k1 / e2, k2: k2 / e2 },
            Geometry::Revolution { l, profile } => Geometry::Revolution {
                l: eps * l,
                profile: profile.iter().enumerate().map(|(d, c)| c * eps.powi(-(d as i32))).collect(),
            },
            Geometry::QuadraticModel { l, k } => Geometry::QuadraticModel {
                l: eps * l,
                k: k.iter().map(|r| r.iter().map(|v| v / e2).collect()).collect(),
            },
        }
    }

    fn validate(&self) -> Result<()> {
        let l = self.length();
        if !(l > 0.0 && l.is_finite()) {
            return Err(Error::Invalid("geodesic length must be positive".into()));
        }
        match self {
            Geometry::Revolution { profile, .. } => {
                if profile.len() < 3 || profile[0] != 1.0 || profile[1] != 0.0 {
                    return Err(Error::Invalid("profile needs f(0) = 1, f'(0) = 0 and a quadratic term".into()));
                }
            }
            Geometry::QuadraticModel { k, .. } => {
                let n = k.len();
                if n == 0 || n > 4 || k.iter().any(|r| r.len() != n) {
                    return Err(Error::Invalid("curvature matrix must be square, 1 <= n <= 4".into()));
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Warping profile `f` as a jet of the given order.
    fn profile(&self, order: usize, cap: usize) -> SymbolPolynomial {
        match self {
            Geometry::ConstantCurvature { k, .. } => univariate(1, 0, &reals(&cos_series(*k, order)), cap),
            Geometry::HillLoop { a, b, .. } => {
                let kk = Trig::from_coeffs(vec![C64::new(b / 2.0, 0.0), C64::new(*a, 0.0), C64::new(b / 2.0, 0.0)]);
                univariate(1, 0, &[Trig::real(1.0), Trig::zero(), kk.scale(C64::new(-0.5, 0.0))], cap)
            }
            Geometry::BlockDiagonal { k1, k2, .. } => {
                let f1 = univariate(2, 0, &reals(&cos_series(*k1, order)), cap);
                let f2 = univariate(2, 1, &reals(&cos_series(*k2, order)), cap);
                f1.mul(&f2).truncate_degree(order)
            }
            Geometry::Revolution { profile, .. } => {
                let c: Vec<f64> = profile.iter().take(order + 1).copied().collect();
                univariate(1, 0, &reals(&c), cap)
            }
            Geometry::QuadraticModel { .. } => unreachable!("quadratic model has no warping profile"),
        }
    }

    /// Raw jets of the Laplace-Beltrami operator to the given order.
    pub fn jets(&self, order: usize, cap: usize) -> Result<MetricJet> {
        self.validate()?;
        let n = self.n();
        let l = self.length();
        if let Geometry::QuadraticModel { k, .. } = self {
            let kt: Vec<Vec<Trig>> = k.iter().map(|r| r.iter().map(|v| Trig::real(*v)).collect()).collect();
            return MetricJet::linearized(l, &kt, cap);
        }
        let f = self.profile(order, cap);
        let goo = series_pow(&f, -2.0, order)?;
        let gij = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        if i == j {
                            SymbolPolynomial::constant(n, cap, C64::new(1.0, 0.0))
                        } else {
                            SymbolPolynomial::zero(n, cap)
                        }
                    })
                    .collect()
            })
            .collect();
        MetricJet::from_inverse_metric(l, order, goo, gij)
    }

    /// Curvature along the geodesic.
    pub fn curvature_loop(&self) -> Result<CurvatureLoop> {
        let jets = self.jets(2, DEFAULT_CAP)?;
        CurvatureLoop::new(self.length(), jets.curvature())
    }

    /// Closed-form curvature matrix at `s` (independent of the jets).
    pub fn curvature_at(&self, s: f64) -> DMatrix<f64> {
        match self {
            Geometry::ConstantCurvature { k, .. } => DMatrix::from_element(1, 1, *k),
            Geometry::HillLoop { l, a, b } => DMatrix::from_element(1, 1, a + b * (2.0 * PI * s / l).cos()),
            Geometry::BlockDiagonal { k1, k2, .. } => DMatrix::from_row_slice(2, 2, &[*k1, 0.0, 0.0, *k2]),
            Geometry::Revolution { profile, .. } => DMatrix::from_element(1, 1, -2.0 * profile[2]),
            Geometry::QuadraticModel { k, .. } => {
                let n = k.len();
                DMatrix::from_fn(n, n, |i, j| k[i][j])
            }
        }
    }
}
