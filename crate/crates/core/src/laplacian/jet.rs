//! Fermi-coordinate Taylor jets of the Laplacian coefficients.
//!
//! Jets are `SymbolPolynomial`s that only use the position slots; the
//! variable there is the unscaled transverse coordinate `y`.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::weyl::symbol::{mono_degree, mono_get};
use crate::weyl::{SymbolPolynomial, Trig};

pub const JET_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JetScope {
    /// Every term of the expansion.
    Full,
    /// Only the terms through the quadratic (linearized) level.
    Linearized,
}

/// Coefficients of `g^oo d_s^2 + Gamma^o d_s + g^ij d_i d_j + Gamma^i d_i + sigma`
/// (the negative Laplacian) and the volume factor `J`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricJet {
    pub n: usize,
    pub l: f64,
    pub order: usize,
    pub goo: SymbolPolynomial,
    pub gij: Vec<Vec<SymbolPolynomial>>,
    pub gamma_o: SymbolPolynomial,
    pub gamma_i: Vec<SymbolPolynomial>,
    pub sigma: SymbolPolynomial,
    pub j: SymbolPolynomial,
    pub scope: JetScope,
}

fn one(n: usize, cap: usize) -> SymbolPolynomial {
    SymbolPolynomial::constant(n, cap, C64::new(1.0, 0.0))
}

fn binom_real(p: f64, r: usize) -> f64 {
    (0..r).fold(1.0, |acc, i| acc * (p - i as f64) / (i + 1) as f64)
}

fn check_positions_only(p: &SymbolPolynomial, what: &str) -> Result<()> {
    let n = p.n();
    for (m, _) in p.raw_terms() {
        if (n..2 * n).any(|s| mono_get(m, s) != 0) {
            return Err(Error::Invalid(format!("{what}: jets depend on positions only")));
        }
    }
    Ok(())
}

/// `a^p` for `a = 1 + u` with `u(s, 0) = 0`, truncated at `order`.
pub fn series_pow(a: &SymbolPolynomial, p: f64, order: usize) -> Result<SymbolPolynomial> {
    let c0 = a.coeff_packed(0).cloned().unwrap_or_else(Trig::zero);
    if c0.sub(&Trig::real(1.0)).max_abs() > 1e-12 {
        return Err(Error::Invalid("series power needs unit value on the geodesic".into()));
    }
    let mut u = a.clone();
    u.add_term(0, Trig::real(-1.0));
    u.prune(0.0);
    let mut out = one(a.n(), a.cap());
    let mut pw = one(a.n(), a.cap());
    for r in 1..=order {
        pw = pw.mul(&u).truncate_degree(order);
        if pw.is_zero() {
            break;
        }
        out.add_assign_scaled(&pw, C64::new(binom_real(p, r), 0.0));
    }
    Ok(out.truncate_degree(order))
}

/// Determinant by cofactor expansion, truncated at `order`.
pub fn series_det(m: &[Vec<SymbolPolynomial>], order: usize) -> SymbolPolynomial {
    let k = m.len();
    if k == 1 {
        return m[0][0].truncate_degree(order);
    }
    let mut out = SymbolPolynomial::zero(m[0][0].n(), m[0][0].cap());
    for col in 0..k {
        if m[0][col].is_zero() {
            continue;
        }
        let minor: Vec<Vec<SymbolPolynomial>> = m[1..]
            .iter()
            .map(|row| row.iter().enumerate().filter(|(j, _)| *j != col).map(|(_, v)| v.clone()).collect())
            .collect();
        let term = m[0][col].mul(&series_det(&minor, order)).truncate_degree(order);
        let sign = if col % 2 == 0 { 1.0 } else { -1.0 };
        out.add_assign_scaled(&term, C64::new(sign, 0.0));
    }
    out
}

impl MetricJet {
    /// Jets of the Laplace-Beltrami operator from the inverse metric in
    /// Fermi coordinates: `J = (g^oo det g^ij)^{-1/2}`, `sigma = 0`.
    pub fn from_inverse_metric(
        l: f64,
        order: usize,
        goo: SymbolPolynomial,
        gij: Vec<Vec<SymbolPolynomial>>,
    ) -> Result<Self> {
        let n = goo.n();
        let cap = goo.cap();
        if gij.len() != n || gij.iter().any(|r| r.len() != n) {
            return Err(Error::DimensionMismatch { left: n, right: gij.len() });
        }
        check_positions_only(&goo, "g^oo")?;
        for row in &gij {
            for g in row {
                check_positions_only(g, "g^ij")?;
            }
        }
        let goo = goo.truncate_degree(order);
        let gij: Vec<Vec<_>> = gij.iter().map(|r| r.iter().map(|g| g.truncate_degree(order)).collect()).collect();
        Self::check_fermi(&goo, &gij)?;
        let det = series_det(&gij, order).mul(&goo).truncate_degree(order);
        let jac = series_pow(&det, -0.5, order)?;
        let jinv = series_pow(&jac, -1.0, order)?;
        let gamma_o = jinv.mul(&jac.mul(&goo).truncate_degree(order).ds(l)).truncate_degree(order);
        let mut gamma_i = Vec::with_capacity(n);
        for i in 0..n {
            let mut acc = SymbolPolynomial::zero(n, cap);
            for (jx, g) in gij[i].iter().enumerate() {
                acc = acc.add(&jac.mul(g).truncate_degree(order).deriv_slot(jx));
            }
            gamma_i.push(jinv.mul(&acc).truncate_degree(order));
        }
        Ok(MetricJet {
            n,
            l,
            order,
            goo,
            gij,
            gamma_o,
            gamma_i,
            sigma: SymbolPolynomial::zero(n, cap),
            j: jac,
            scope: JetScope::Full,
        })
    }

    /// Jets of `g^oo = 1 + K_ij y_i y_j`, flat transverse part, `J = 1`.
    pub fn linearized(l: f64, k: &[Vec<Trig>], cap: usize) -> Result<Self> {
        let n = k.len();
        let mut goo = one(n, cap);
        for i in 0..n {
            for j in 0..n {
                let mut e = vec![0u8; 2 * n];
                e[i] += 1;
                e[j] += 1;
                goo = goo.add(&SymbolPolynomial::monomial(n, cap, &e, k[i][j].clone()));
            }
        }
        let gij = (0..n)
            .map(|i| (0..n).map(|j| if i == j { one(n, cap) } else { SymbolPolynomial::zero(n, cap) }).collect())
            .collect();
        Ok(MetricJet {
            n,
            l,
            order: 2,
            goo,
            gij,
            gamma_o: SymbolPolynomial::zero(n, cap),
            gamma_i: vec![SymbolPolynomial::zero(n, cap); n],
            sigma: SymbolPolynomial::zero(n, cap),
            j: one(n, cap),
            scope: JetScope::Linearized,
        })
    }

    fn check_fermi(goo: &SymbolPolynomial, gij: &[Vec<SymbolPolynomial>]) -> Result<()> {
        let n = gij.len();
        let unit = |p: &SymbolPolynomial, v: f64| -> bool {
            p.homogeneous_part(0).sub(&SymbolPolynomial::constant(p.n(), p.cap(), C64::new(v, 0.0))).max_abs() < 1e-12
                && p.homogeneous_part(1).max_abs() < 1e-12
        };
        if !unit(goo, 1.0) {
            return Err(Error::Invalid("g^oo is not Fermi normalized on the geodesic".into()));
        }
        for i in 0..n {
            for j in 0..n {
                if !unit(&gij[i][j], if i == j { 1.0 } else { 0.0 }) {
                    return Err(Error::Invalid(format!("g^{i}{j} is not Fermi normalized on the geodesic")));
                }
                if gij[i][j].sub(&gij[j][i]).max_abs() > 1e-12 {
                    return Err(Error::Invalid("g^ij is not symmetric".into()));
                }
            }
        }
        Ok(())
    }

    /// Curvature read off the quadratic part of `g^oo`.
    pub fn curvature(&self) -> Vec<Vec<Trig>> {
        let n = self.n;
        let mut k = vec![vec![Trig::zero(); n]; n];
        for (m, t) in self.goo.homogeneous_part(2).raw_terms() {
            let idx: Vec<usize> = (0..n).flat_map(|i| std::iter::repeat(i).take(mono_get(m, i) as usize)).collect();
            if idx[0] == idx[1] {
                k[idx[0]][idx[0]] = t.clone();
            } else {
                let h = t.scale(C64::new(0.5, 0.0));
                k[idx[0]][idx[1]] = h.clone();
                k[idx[1]][idx[0]] = h;
            }
        }
        k
    }

    pub fn is_unit_density(&self) -> bool {
        self.j.sub(&one(self.n, self.j.cap())).max_abs() < 1e-14
    }

    /// Text form: a version header, scalars, then one dump block per field.
    pub fn to_text(&self) -> String {
        let mut s = format!("qbnf-jet {JET_FORMAT_VERSION}\n");
        s += &format!("n {}\nl {:.17e}\norder {}\n", self.n, self.l, self.order);
        s += &format!("scope {}\n", if self.scope == JetScope::Full { "full" } else { "linearized" });
        let mut field = |name: String, p: &SymbolPolynomial| {
            s += &format!("field {name}\n");
            s += &p.dump();
            s += "end\n";
        };
        field("goo".into(), &self.goo);
        for i in 0..self.n {
            for j in 0..self.n {
                field(format!("g {i} {j}"), &self.gij[i][j]);
            }
        }
        field("gamma_o".into(), &self.gamma_o);
        for i in 0..self.n {
            field(format!("gamma {i}"), &self.gamma_i[i]);
        }
        field("sigma".into(), &self.sigma);
        field("j".into(), &self.j);
        s
    }

    pub fn from_text(text: &str, cap: usize) -> Result<Self> {
        let bad = |m: &str| Error::Invalid(format!("jet file: {m}"));
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let header = lines.next().ok_or_else(|| bad("empty"))?;
        if header != format!("qbnf-jet {JET_FORMAT_VERSION}") {
            return Err(bad("unsupported version header"));
        }
        let mut scalar = |key: &str| -> Result<String> {
            let line = lines.next().ok_or_else(|| bad("truncated"))?;
            line.strip_prefix(key)
                .map(|v| v.trim().to_string())
                .ok_or_else(|| bad(&format!("expected `{key}`")))
        };
        let n: usize = scalar("n")?.parse().map_err(|_| bad("n"))?;
        let l: f64 = scalar("l")?.parse().map_err(|_| bad("l"))?;
        let order: usize = scalar("order")?.parse().map_err(|_| bad("order"))?;
        let scope = match scalar("scope")?.as_str() {
            "full" => JetScope::Full,
            "linearized" => JetScope::Linearized,
            _ => return Err(bad("scope")),
        };
        if n == 0 || n > 4 {
            return Err(bad("n out of range"));
        }
        let zero = SymbolPolynomial::zero(n, cap);
        let mut jet = MetricJet {
            n,
            l,
            order,
            goo: zero.clone(),
            gij: vec![vec![zero.clone(); n]; n],
            gamma_o: zero.clone(),
            gamma_i: vec![zero.clone(); n],
            sigma: zero.clone(),
            j: zero,
            scope,
        };
        let rest: Vec<&str> = lines.collect();
        let mut idx = 0;
        while idx < rest.len() {
            let name = rest[idx].strip_prefix("field ").ok_or_else(|| bad("expected `field`"))?;
            idx += 1;
            let mut body = String::new();
            while idx < rest.len() && rest[idx] != "end" {
                body += rest[idx];
                body.push('\n');
                idx += 1;
            }
            idx += 1;
            let p = SymbolPolynomial::parse_dump(n, cap, &body)?;
            let parts: Vec<&str> = name.split_whitespace().collect();
            let ix = |k: usize| -> Result<usize> {
                parts.get(k).and_then(|v| v.parse().ok()).filter(|v| *v < n).ok_or_else(|| bad("index"))
            };
            match parts[0] {
                "goo" => jet.goo = p,
                "g" => jet.gij[ix(1)?][ix(2)?] = p,
                "gamma_o" => jet.gamma_o = p,
                "gamma" => jet.gamma_i[ix(1)?] = p,
                "sigma" => jet.sigma = p,
                "j" => jet.j = p,
                _ => return Err(bad("unknown field")),
            }
        }
        Ok(jet)
    }
}

/// Largest total degree present, ignoring zero terms.
pub fn jet_degree(p: &SymbolPolynomial) -> usize {
    p.raw_terms().map(|(m, _)| mono_degree(m)).max().unwrap_or(0)
}

/// `J^{1/2} (-Delta) J^{-1/2}`: conjugation by `phi = J^{-1/2}`; the result
/// has unit density.
pub fn half_density_reduce(raw: &MetricJet) -> Result<MetricJet> {
    if raw.is_unit_density() {
        return Ok(raw.clone());
    }
    let (n, l, order) = (raw.n, raw.l, raw.order);
    let tr = |p: SymbolPolynomial| p.truncate_degree(order);
    let phi = series_pow(&raw.j, -0.5, order)?;
    let phi_inv = series_pow(&raw.j, 0.5, order)?;
    let ds_phi = tr(phi.ds(l).mul(&phi_inv));
    let dss_phi = tr(phi.ds(l).ds(l).mul(&phi_inv));
    let dj_phi: Vec<_> = (0..n).map(|j| tr(phi.deriv_slot(j).mul(&phi_inv))).collect();
    let mut gamma_o = raw.gamma_o.add(&tr(raw.goo.mul(&ds_phi)).scale_real(2.0));
    gamma_o = tr(gamma_o);
    let mut gamma_i = Vec::with_capacity(n);
    for i in 0..n {
        let mut g = raw.gamma_i[i].clone();
        for j in 0..n {
            g = g.add(&tr(raw.gij[i][j].mul(&dj_phi[j])).scale_real(2.0));
        }
        gamma_i.push(g);
    }
    let mut sigma = raw.sigma.add(&tr(raw.goo.mul(&dss_phi))).add(&tr(raw.gamma_o.mul(&ds_phi)));
    for i in 0..n {
        sigma = sigma.add(&tr(raw.gamma_i[i].mul(&dj_phi[i])));
        let di_phi = phi.deriv_slot(i);
        for j in 0..n {
            let dij = tr(di_phi.deriv_slot(j).mul(&phi_inv));
            sigma = sigma.add(&tr(raw.gij[i][j].mul(&dij)));
        }
    }
    Ok(MetricJet {
        n,
        l,
        order,
        goo: raw.goo.clone(),
        gij: raw.gij.clone(),
        gamma_o,
        gamma_i,
        sigma,
        j: one(n, raw.j.cap()),
        scope: raw.scope,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const CAP: usize = 16;

    fn y(n: usize, i: usize) -> SymbolPolynomial {
        SymbolPolynomial::var(n, CAP, i)
    }

    fn scalar_series(c: &[f64]) -> SymbolPolynomial {
        let mut p = SymbolPolynomial::zero(1, CAP);
        for (d, v) in c.iter().enumerate() {
            if *v != 0.0 {
                p = p.add(&SymbolPolynomial::monomial(1, CAP, &[d as u8, 0], Trig::real(*v)));
            }
        }
        p
    }

    #[test]
    fn unit_density_is_fixed_point() {
        let k = vec![vec![Trig::real(2.0)]];
        let jet = MetricJet::linearized(1.0, &k, CAP).unwrap();
        assert_eq!(half_density_reduce(&jet).unwrap(), jet);
    }

    #[test]
    fn series_pow_matches_binomial() {
        // (1 + y^2)^{-1/2} = 1 - y^2/2 + 3 y^4/8 - ...
        let a = scalar_series(&[1.0, 0.0, 1.0]);
        let p = series_pow(&a, -0.5, 6).unwrap();
        let expect = scalar_series(&[1.0, 0.0, -0.5, 0.0, 0.375, 0.0, -0.3125]);
        assert!(p.sub(&expect).max_abs() < 1e-15);
    }

    #[test]
    fn density_correction_from_quadratic_volume() {
        // J = 1 + c y^2 gives sigma = -c on the geodesic.
        let c = 0.7;
        let mut jet = MetricJet::linearized(1.0, &[vec![Trig::zero()]], CAP).unwrap();
        jet.order = 4;
        jet.scope = JetScope::Full;
        jet.j = scalar_series(&[1.0, 0.0, c]);
        let red = half_density_reduce(&jet).unwrap();
        let s0 = red.sigma.homogeneous_part(0).coeff(&[0, 0]).get(0);
        assert!((s0.re + c).abs() < 1e-14);
        assert!(red.is_unit_density());
    }

    #[test]
    fn constant_curvature_surface_closed_form() {
        // dy^2 + cos^2(sqrt(k) y) ds^2: sigma = k/2 + (k/4) tan^2(sqrt(k) y),
        // transverse first-order term removed.
        let k: f64 = 0.8;
        let order = 6;
        // cos^{-2}(t) = 1 + t^2 + 2t^4/3 + 17t^6/45
        let goo = scalar_series(&[1.0, 0.0, k, 0.0, 2.0 * k * k / 3.0, 0.0, 17.0 * k.powi(3) / 45.0]);
        let gij = vec![vec![scalar_series(&[1.0])]];
        let raw = MetricJet::from_inverse_metric(1.0, order, goo, gij).unwrap();
        // J = cos(sqrt(k) y)
        let j_expect = scalar_series(&[1.0, 0.0, -k / 2.0, 0.0, k * k / 24.0, 0.0, -k.powi(3) / 720.0]);
        assert!(raw.j.sub(&j_expect).max_abs() < 1e-14);
        let red = half_density_reduce(&raw).unwrap();
        assert!(red.gamma_i[0].truncate_degree(order - 1).max_abs() < 1e-14);
        // tan^2 t = t^2 + 2t^4/3 + ...
        let sigma_expect = scalar_series(&[k / 2.0, 0.0, k * k / 4.0, 0.0, k.powi(3) / 6.0]);
        assert!(red.sigma.truncate_degree(order - 2).sub(&sigma_expect).max_abs() < 1e-13);
    }

    #[test]
    fn two_dimensional_determinant() {
        let n = 2;
        let a = one(n, CAP).add(&y(n, 0).mul(&y(n, 0)));
        let b = y(n, 0).mul(&y(n, 1));
        let d = series_det(&[vec![a.clone(), b.clone()], vec![b.clone(), a.clone()]], 4);
        let expect = a.mul(&a).sub(&b.mul(&b));
        assert!(d.sub(&expect).max_abs() < 1e-15);
    }

    #[test]
    fn text_round_trip() {
        let k = vec![vec![Trig::from_coeffs(vec![C64::new(0.5, 0.0), C64::new(4.0, 0.0), C64::new(0.5, 0.0)])]];
        let jet = MetricJet::linearized(1.5, &k, CAP).unwrap();
        let back = MetricJet::from_text(&jet.to_text(), CAP).unwrap();
        assert!(back.goo.sub(&jet.goo).max_abs() < 1e-15);
        assert_eq!(back.scope, JetScope::Linearized);
        assert!(MetricJet::from_text("qbnf-jet 9\n", CAP).is_err());
    }

    #[test]
    fn curvature_readback() {
        let k = vec![vec![Trig::real(1.0), Trig::real(0.25)], vec![Trig::real(0.25), Trig::real(-2.0)]];
        let jet = MetricJet::linearized(1.0, &k, CAP).unwrap();
        let back = jet.curvature();
        for i in 0..2 {
            for j in 0..2 {
                assert!(back[i][j].sub(&k[i][j]).max_abs() < 1e-15);
            }
        }
    }
}
