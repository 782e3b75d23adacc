//! Jacobi fields along the closed geodesic: monodromy and Wronskian frame.
//!
//! Jacobi data `(Y, Y')` solve `Y'' + K(s) Y = 0`. The weightless
//! variables are `x = L^{-1/2} Y`, `xi = L^{1/2} Y'`, in which the local
//! Hamiltonian is `H_loc = (L^{-1} |xi|^2 + L x.K x) / 2`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::floquet::{self, FloquetClassification, SymplecticMatrix};
use crate::weyl::Trig;

pub const INT_TOL: f64 = 1e-11;
pub const N_S: usize = 256;

#[derive(Debug, Clone)]
pub struct CurvatureLoop {
    pub n: usize,
    pub l: f64,
    /// `k[i][j]` is the periodic entry `K_ij(s)`.
    pub k: Vec<Vec<Trig>>,
    /// Holonomy of the parallel normal frame.
    pub holonomy: DMatrix<f64>,
}

impl CurvatureLoop {
    pub fn new(l: f64, k: Vec<Vec<Trig>>) -> Result<Self> {
        let n = k.len();
        Self::with_holonomy(l, k, DMatrix::identity(n, n))
    }

    pub fn with_holonomy(l: f64, k: Vec<Vec<Trig>>, holonomy: DMatrix<f64>) -> Result<Self> {
        let n = k.len();
        if n == 0 || k.iter().any(|r| r.len() != n) {
            return Err(Error::Invalid("curvature matrix must be square and nonempty".into()));
        }
        if !(l > 0.0) {
            return Err(Error::Invalid("geodesic length must be positive".into()));
        }
        for i in 0..n {
            for j in 0..n {
                let d = k[i][j].sub(&k[j][i]).max_abs();
                if d > 1e-12 * (1.0 + k[i][j].max_abs()) {
                    return Err(Error::Invalid(format!("K is not symmetric at ({i},{j})")));
                }
            }
        }
        if holonomy.nrows() != n || (holonomy.transpose() * &holonomy - DMatrix::identity(n, n)).amax() > 1e-10 {
            return Err(Error::Invalid("holonomy must be an orthogonal n x n matrix".into()));
        }
        Ok(CurvatureLoop { n, l, k, holonomy })
    }

    /// Constant curvature matrix.
    pub fn constant(l: f64, k: &DMatrix<f64>) -> Result<Self> {
        let n = k.nrows();
        let rows = (0..n).map(|i| (0..n).map(|j| Trig::real(k[(i, j)])).collect()).collect();
        Self::new(l, rows)
    }

    pub fn k_at(&self, s: f64) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.k[i][j].eval(s, self.l).re)
    }

    /// `diag(L^{-1/2}, L^{1/2})`.
    pub fn weightless_scaling(&self) -> DMatrix<f64> {
        let n = self.n;
        DMatrix::from_fn(2 * n, 2 * n, |i, j| {
            if i != j {
                0.0
            } else if i < n {
                self.l.powf(-0.5)
            } else {
                self.l.sqrt()
            }
        })
    }

    fn rhs(&self, s: f64, y: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.n;
        let k = self.k_at(s);
        let mut out = DMatrix::zeros(y.nrows(), y.ncols());
        out.rows_mut(0, n).copy_from(&y.rows(n, n));
        let acc = -(k * y.rows(0, n));
        out.rows_mut(n, n).copy_from(&acc);
        out
    }
}

/// Dormand-Prince 5(4) with adaptive steps for `y' = f(s, y)`.
pub fn integrate_dp45<F>(f: F, y0: &DMatrix<f64>, s0: f64, s1: f64, rtol: f64) -> Result<DMatrix<f64>>
where
    F: Fn(f64, &DMatrix<f64>) -> DMatrix<f64>,
{
    const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
    const A: [[f64; 6]; 7] = [
        [0.0; 6],
        [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
        [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
        [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ];
    const B: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
    const BS: [f64; 7] = [
        5179.0 / 57600.0,
        0.0,
        7571.0 / 16695.0,
        393.0 / 640.0,
        -92097.0 / 339200.0,
        187.0 / 2100.0,
        1.0 / 40.0,
    ];
    let mut y = y0.clone();
    if s1 <= s0 {
        return Ok(y);
    }
    let atol = rtol * 1e-2;
    let mut s = s0;
    let mut h = ((s1 - s0) / 16.0).min(0.01);
    let hmin = 1e-14 * (s1 - s0).abs().max(1.0);
    let mut k: Vec<DMatrix<f64>> = Vec::with_capacity(7);
    while s < s1 {
        if s + h > s1 {
            h = s1 - s;
        }
        k.clear();
        for st in 0..7 {
            let mut yi = y.clone();
            for (j, kj) in k.iter().enumerate() {
                if A[st][j] != 0.0 {
                    yi += kj * (h * A[st][j]);
                }
            }
            k.push(f(s + C[st] * h, &yi));
        }
        let mut ynew = y.clone();
        let mut err = DMatrix::zeros(y.nrows(), y.ncols());
        for st in 0..7 {
            if B[st] != 0.0 {
                ynew += &k[st] * (h * B[st]);
            }
            err += &k[st] * (h * (B[st] - BS[st]));
        }
        let mut en = 0.0f64;
        for i in 0..y.len() {
            let sc = atol + rtol * y[i].abs().max(ynew[i].abs());
            en = en.max(err[i].abs() / sc);
        }
        if en <= 1.0 {
            s += h;
            y = ynew;
        }
        let fac = if en == 0.0 { 5.0 } else { (0.9 * en.powf(-0.2)).clamp(0.2, 5.0) };
        h *= fac;
        if h < hmin && s < s1 {
            return Err(Error::IntegratorFailure { s });
        }
    }
    Ok(y)
}

/// `(Y(s1), Y'(s1))` from data `y0` at `s0`.
pub fn integrate_jacobi(lp: &CurvatureLoop, y0: &DVector<f64>, s0: f64, s1: f64, int_tol: f64) -> Result<DVector<f64>> {
    if y0.len() != 2 * lp.n {
        return Err(Error::DimensionMismatch { left: 2 * lp.n, right: y0.len() });
    }
    let m = DMatrix::from_column_slice(y0.len(), 1, y0.as_slice());
    let out = integrate_dp45(|s, y| lp.rhs(s, y), &m, s0, s1, int_tol)?;
    Ok(DVector::from_column_slice(out.as_slice()))
}

/// Fundamental matrix in `(Y, Y')` from `s0` to `s1`.
pub fn fundamental(lp: &CurvatureLoop, s0: f64, s1: f64, int_tol: f64) -> Result<DMatrix<f64>> {
    let d = 2 * lp.n;
    integrate_dp45(|s, y| lp.rhs(s, y), &DMatrix::identity(d, d), s0, s1, int_tol)
}

fn holonomy_block(lp: &CurvatureLoop) -> DMatrix<f64> {
    let n = lp.n;
    let mut t = DMatrix::zeros(2 * n, 2 * n);
    t.view_mut((0, 0), (n, n)).copy_from(&lp.holonomy);
    t.view_mut((n, n), (n, n)).copy_from(&lp.holonomy);
    t
}

/// Period map in `(Y, Y')`, composed on the left with the holonomy.
pub fn monodromy(lp: &CurvatureLoop, int_tol: f64) -> Result<SymplecticMatrix> {
    let phi = fundamental(lp, 0.0, lp.l, int_tol)?;
    SymplecticMatrix::new(holonomy_block(lp) * phi, 1e-8)
}

/// Period map in weightless coordinates.
pub fn monodromy_weightless(lp: &CurvatureLoop, int_tol: f64) -> Result<SymplecticMatrix> {
    let p = monodromy(lp, int_tol)?;
    let s = lp.weightless_scaling();
    let sinv = s.clone().try_inverse().expect("diagonal scaling");
    SymplecticMatrix::new(&s * p.matrix() * sinv, 1e-8)
}

#[derive(Debug, Clone)]
pub struct WronskianFrame {
    pub n: usize,
    pub l: f64,
    /// Uniform grid on `[0, L)`.
    pub grid: Vec<f64>,
    /// Weightless `W(s) = Phi(s) B` on the grid.
    pub w: Vec<DMatrix<f64>>,
    /// Periodic frame `W(s) exp(-s A / L)` as trigonometric series.
    pub w_hat: Vec<Vec<Trig>>,
    pub symplectic_residual: f64,
    pub monodromy_residual: f64,
    pub det_residual: f64,
}

impl WronskianFrame {
    /// Periodic frame evaluated at `s`.
    pub fn w_hat_at(&self, s: f64) -> DMatrix<f64> {
        let d = 2 * self.n;
        DMatrix::from_fn(d, d, |i, j| self.w_hat[i][j].eval(s, self.l).re)
    }

    /// Derivative of the periodic frame at `s`.
    pub fn w_hat_deriv_at(&self, s: f64) -> DMatrix<f64> {
        let d = 2 * self.n;
        DMatrix::from_fn(d, d, |i, j| self.w_hat[i][j].deriv(self.l).eval(s, self.l).re)
    }
}

/// Integrates the normalized eigenfields over two periods and assembles
/// the weightless Wronskian frame and its periodic part.
pub fn build_wronskian(lp: &CurvatureLoop, f: &FloquetClassification, n_s: usize, int_tol: f64) -> Result<WronskianFrame> {
    let n = lp.n;
    if f.n() != n {
        return Err(Error::DimensionMismatch { left: n, right: f.n() });
    }
    if (lp.holonomy.clone() - DMatrix::identity(n, n)).amax() > 0.0 {
        return Err(Error::Invalid("Wronskian frame requires trivial holonomy".into()));
    }
    if f.has_negative_hyperbolic() {
        return Err(Error::ResonantSpectrum { reason: "negative hyperbolic block has no periodic frame".into() });
    }
    let sc = lp.weightless_scaling();
    let sc_inv = sc.clone().try_inverse().expect("diagonal scaling");
    let h = lp.l / n_s as f64;
    let mut phi = DMatrix::identity(2 * n, 2 * n);
    let mut ws = Vec::with_capacity(2 * n_s + 1);
    let mut grid = Vec::with_capacity(n_s);
    for g in 0..=2 * n_s {
        let s = g as f64 * h;
        if g > 0 {
            phi = integrate_dp45(|t, y| lp.rhs(t, y), &phi, s - h, s, int_tol)?;
        }
        ws.push(&sc * &phi * &sc_inv * &f.basis);
        if g < n_s {
            grid.push(s);
        }
    }
    let j = floquet::j_matrix(n);
    let nm = f.model_matrix();
    let mut symp = 0.0f64;
    let mut law = 0.0f64;
    let mut det = 0.0f64;
    for g in 0..=2 * n_s {
        let w = &ws[g];
        symp = symp.max((w.transpose() * &j * w - &j).amax());
        det = det.max((w.determinant() - 1.0).abs());
        if g <= n_s {
            let r = (&ws[g + n_s] - w * &nm).amax() / ws[g + n_s].amax().max(1.0);
            law = law.max(r);
        }
    }
    let d = 2 * n;
    let mut samples = vec![vec![Vec::with_capacity(n_s); d]; d];
    for (g, s) in grid.iter().enumerate() {
        let what = &ws[g] * f.model_flow(-s / lp.l);
        for a in 0..d {
            for b in 0..d {
                samples[a][b].push(C64::new(what[(a, b)], 0.0));
            }
        }
    }
    let w_hat: Vec<Vec<Trig>> = samples
        .into_iter()
        .map(|row| {
            row.into_iter()
                .map(|col| {
                    let mut t = Trig::from_samples(&col);
                    let tol = 1e-15 * t.max_abs().max(1.0);
                    t.trim(tol);
                    t
                })
                .collect()
        })
        .collect();
    Ok(WronskianFrame {
        n,
        l: lp.l,
        grid,
        w: ws.into_iter().take(n_s).collect(),
        w_hat,
        symplectic_residual: symp,
        monodromy_residual: law,
        det_residual: det,
    })
}
