//! Report emission: text for people, CSV and JSON for tools.
//!
//! Coefficient tables share one line format, `name | (e1,..,en) | re | im`,
//! so forward and recovered tables diff directly. Nothing time-dependent is
//! written, keeping reruns byte-identical.

use num_complex::Complex64 as C64;
use serde::Serialize;
use serde_json::{json, Value};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::birkhoff::VerificationReport;
use crate::error::{Error, Result};
use crate::floquet::{character, resonance_margin, BlockData};
use crate::inverse::{write_samples, Recovery, Sample};
use crate::pipeline::{Classified, PipelineOutput};
use crate::weyl::ActionPolynomial;

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub name: String,
    pub text: String,
    pub csv: String,
    pub json: Value,
    /// Extra files (name, contents).
    pub attachments: Vec<(String, String)>,
}

impl Report {
    /// Writes `<name>.txt`, `<name>.csv`, `<name>.json` and attachments.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir).map_err(|e| Error::Invalid(format!("{}: {e}", dir.display())))?;
        let json = serde_json::to_string_pretty(&self.json).map_err(|e| Error::Invalid(e.to_string()))? + "\n";
        let mut files = vec![
            (format!("{}.txt", self.name), self.text.clone()),
            (format!("{}.csv", self.name), self.csv.clone()),
            (format!("{}.json", self.name), json),
        ];
        files.extend(self.attachments.iter().cloned());
        let mut out = Vec::new();
        for (name, body) in files {
            let p = dir.join(name);
            std::fs::write(&p, body).map_err(|e| Error::Invalid(format!("{}: {e}", p.display())))?;
            out.push(p);
        }
        Ok(out)
    }
}

fn num(v: f64) -> String {
    format!("{v:+.15e}")
}

fn cjson(v: C64) -> Value {
    json!([v.re, v.im])
}

/// Coefficient rows `(table, exponents, value)`.
pub fn coefficient_rows(name: &str, ap: &ActionPolynomial) -> Vec<(String, Vec<u8>, C64)> {
    ap.poly.terms().map(|(e, v)| (name.to_string(), e, v)).collect()
}

fn table_line(name: &str, e: &[u8], v: C64) -> String {
    let idx: Vec<String> = e.iter().map(|x| x.to_string()).collect();
    format!("{name} | ({}) | {} | {}", idx.join(","), num(v.re), num(v.im))
}

/// `pt1`, `pt2`, ... in the shared line format.
pub fn p_tilde_table(p_tilde: &[ActionPolynomial]) -> String {
    let mut s = String::new();
    for (k, p) in p_tilde.iter().enumerate() {
        for (name, e, v) in coefficient_rows(&format!("pt{}", k + 1), p) {
            let _ = writeln!(s, "{}", table_line(&name, &e, v));
        }
    }
    s
}

/// Parses lines of the shared format; other lines are skipped.
pub fn parse_coefficient_table(text: &str) -> Result<BTreeMap<(String, Vec<u8>), C64>> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let parts: Vec<&str> = line.split('|').map(str::trim).collect();
        if parts.len() != 4 || !parts[1].starts_with('(') {
            continue;
        }
        let bad = || Error::Invalid(format!("coefficient table line {}: {line}", i + 1));
        let inner = parts[1].trim_start_matches('(').trim_end_matches(')');
        let e: Vec<u8> = if inner.is_empty() {
            vec![]
        } else {
            inner.split(',').map(|x| x.trim().parse().map_err(|_| bad())).collect::<Result<_>>()?
        };
        let re: f64 = parts[2].parse().map_err(|_| bad())?;
        let im: f64 = parts[3].parse().map_err(|_| bad())?;
        out.insert((parts[0].to_string(), e), C64::new(re, im));
    }
    Ok(out)
}

/// Largest coefficient difference over tables present in `a`, relative to
/// the largest coefficient of `b` (at least 1).
pub fn table_difference(a: &BTreeMap<(String, Vec<u8>), C64>, b: &BTreeMap<(String, Vec<u8>), C64>) -> f64 {
    let names: std::collections::BTreeSet<&String> = a.keys().map(|k| &k.0).collect();
    let keys: std::collections::BTreeSet<&(String, Vec<u8>)> =
        a.keys().chain(b.keys().filter(|k| names.contains(&k.0))).collect();
    let zero = C64::new(0.0, 0.0);
    let scale = b.iter().filter(|(k, _)| names.contains(&k.0)).map(|(_, v)| v.norm()).fold(1.0, f64::max);
    keys.iter().map(|k| (a.get(*k).unwrap_or(&zero) - b.get(*k).unwrap_or(&zero)).norm()).fold(0.0, f64::max) / scale
}

#[derive(Serialize)]
struct BlockRow {
    index: usize,
    kind: &'static str,
    a: f64,
    b: f64,
}

fn block_rows(blocks: &[BlockData]) -> Vec<BlockRow> {
    blocks
        .iter()
        .enumerate()
        .map(|(index, b)| match *b {
            BlockData::Elliptic { alpha, krein } => BlockRow { index, kind: "elliptic", a: alpha, b: krein as f64 },
            BlockData::Hyperbolic { lambda, negative } => {
                BlockRow { index, kind: if negative { "hyperbolic-negative" } else { "hyperbolic" }, a: lambda, b: 0.0 }
            }
            BlockData::Loxodromic { mu, nu } => BlockRow { index, kind: "loxodromic", a: mu, b: nu },
        })
        .collect()
}

pub fn classify_report(c: &Classified, l: f64, m_max: usize) -> Report {
    let (p, q, cc) = c.floquet.pqc();
    let margin = resonance_margin(&c.floquet, m_max);
    let ch = character(&c.floquet);
    let rows = block_rows(&c.floquet.blocks);
    let mut text = format!("length {}\n(p,q,c) = ({p},{q},{cc})\n", num(l));
    for r in &rows {
        let _ = writeln!(text, "block {} {} {} {}", r.index, r.kind, num(r.a), num(r.b));
    }
    let _ = writeln!(text, "resonance margin {} at {:?} (|m| <= {m_max})", num(margin.margin), margin.worst_multiindex);
    let _ = writeln!(text, "|character| {}", num(ch.value.norm()));
    let mut csv = String::from("index,kind,a,b\n");
    for r in &rows {
        let _ = writeln!(csv, "{},{},{},{}", r.index, r.kind, num(r.a), num(r.b));
    }
    let json = json!({
        "length": l,
        "pqc": [p, q, cc],
        "blocks": c.floquet.blocks,
        "resonance": margin,
        "character_modulus": ch.value.norm(),
        "monodromy": c.monodromy.matrix().row_iter().map(|r| r.iter().copied().collect::<Vec<f64>>()).collect::<Vec<_>>(),
    });
    Report { name: "classify".into(), text, csv, json, attachments: vec![] }
}

fn nf_rows(out: &PipelineOutput) -> Vec<(String, Vec<u8>, C64)> {
    let nf = &out.normal_form;
    let mut rows = Vec::new();
    for (j, f) in nf.f.iter().enumerate() {
        rows.extend(coefficient_rows(&format!("f{j}"), f));
    }
    for (k, p) in nf.p.iter().enumerate() {
        rows.extend(coefficient_rows(&format!("p{}", k + 1), p));
    }
    for (k, p) in nf.p_tilde.iter().enumerate() {
        rows.extend(coefficient_rows(&format!("pt{}", k + 1), p));
    }
    rows
}

fn rows_csv(rows: &[(String, Vec<u8>, C64)]) -> String {
    let mut csv = String::from("table,exponents,re,im\n");
    for (name, e, v) in rows {
        let idx: Vec<String> = e.iter().map(|x| x.to_string()).collect();
        let _ = writeln!(csv, "{name},{},{},{}", idx.join(" "), num(v.re), num(v.im));
    }
    csv
}

fn rows_json(rows: &[(String, Vec<u8>, C64)]) -> Value {
    Value::Array(rows.iter().map(|(n, e, v)| json!({"table": n, "exponents": e, "value": cjson(*v)})).collect())
}

pub fn normal_form_report(out: &PipelineOutput, verify: &VerificationReport) -> Report {
    let nf = &out.normal_form;
    let kinds: Vec<&str> = nf.floquet.layout().action_kinds().iter().map(|k| k.label()).collect();
    let rows = nf_rows(out);
    let mut text = format!("# actions: {}\n# k_max {} order {}\n", kinds.join(","), nf.k_max, nf.order);
    for (n, e, v) in &rows {
        let _ = writeln!(text, "{}", table_line(n, e, *v));
    }
    let _ = writeln!(text, "# frame symplectic residual {}", num(out.frame.symplectic_residual));
    let _ = writeln!(text, "# frame monodromy residual {}", num(out.frame.monodromy_residual));
    let _ = writeln!(text, "# max homological residual {}", num(nf.max_step_residual()));
    let _ = writeln!(text, "# conjugation residual {}", num(verify.conjugation_residual));
    let _ = writeln!(text, "# normal form residual {}", num(verify.normal_form_residual));
    let _ = writeln!(text, "# max imaginary part of f {}", num(nf.max_imag_f));
    let min_div = nf.steps.iter().flat_map(|s| s.divisors.iter().map(|d| d.divisor)).fold(f64::INFINITY, f64::min);
    if min_div.is_finite() {
        let _ = writeln!(text, "# smallest divisor {}", num(min_div));
    }
    let steps: Vec<Value> =
        nf.steps.iter().map(|s| json!({"k": s.k, "order": s.order, "residual": s.residual, "divisors": s.divisors.len()})).collect();
    let json = json!({
        "actions": kinds,
        "k_max": nf.k_max,
        "order": nf.order,
        "coefficients": rows_json(&rows),
        "diagnostics": {
            "frame_symplectic_residual": out.frame.symplectic_residual,
            "frame_monodromy_residual": out.frame.monodromy_residual,
            "max_step_residual": nf.max_step_residual(),
            "conjugation_residual": verify.conjugation_residual,
            "normal_form_residual": verify.normal_form_residual,
            "max_imag_f": nf.max_imag_f,
            "steps": steps,
        },
    });
    Report { name: "normal-form".into(), text, csv: rows_csv(&rows), json, attachments: vec![] }
}

/// One reported invariant.
#[derive(Debug, Clone, PartialEq)]
pub struct InvariantRow {
    pub k: usize,
    pub value: C64,
    pub fd_relative_error: Option<f64>,
}

/// Iterate value, or the reason it is missing.
#[derive(Debug, Clone, PartialEq)]
pub struct IterateRow {
    pub k: usize,
    pub n: i64,
    pub value: std::result::Result<C64, String>,
}

pub fn wave_report(
    out: &PipelineOutput,
    convention: &str,
    invariants: &[InvariantRow],
    iterates: &[IterateRow],
    recovery_samples: &[Sample],
) -> Result<Report> {
    let mut text = format!("# convention {convention}\n# phase defined modulo quarter turns\n");
    text.push_str(&p_tilde_table(&out.normal_form.p_tilde));
    for r in invariants {
        let _ = write!(text, "a{} | {} | {}", r.k, num(r.value.re), num(r.value.im));
        if let Some(e) = r.fd_relative_error {
            let _ = write!(text, " | fd {}", num(e));
        }
        text.push('\n');
    }
    let mut csv = String::from("k,n,re,im\n");
    for r in iterates {
        match &r.value {
            Ok(v) => {
                let _ = writeln!(text, "iterate k={} N={} | {} | {}", r.k, r.n, num(v.re), num(v.im));
                let _ = writeln!(csv, "{},{},{},{}", r.k, r.n, num(v.re), num(v.im));
            }
            Err(e) => {
                let _ = writeln!(text, "iterate k={} N={} | skipped: {e}", r.k, r.n);
            }
        }
    }
    let json = json!({
        "convention": convention,
        "invariants": invariants.iter().map(|r| json!({"k": r.k, "value": cjson(r.value), "fd_relative_error": r.fd_relative_error})).collect::<Vec<_>>(),
        "iterates": iterates.iter().map(|r| match &r.value {
            Ok(v) => json!({"k": r.k, "n": r.n, "value": cjson(*v)}),
            Err(e) => json!({"k": r.k, "n": r.n, "skipped": e}),
        }).collect::<Vec<_>>(),
    });
    let mut buf = Vec::new();
    write_samples(&mut buf, recovery_samples)?;
    let samples = String::from_utf8(buf).map_err(|e| Error::Invalid(e.to_string()))?;
    Ok(Report { name: "wave-invariants".into(), text, csv, json, attachments: vec![("samples.csv".into(), samples)] })
}

pub fn recover_report(rec: &Recovery, difference: Option<f64>) -> Report {
    let mut text = String::from("# recovered\n");
    text.push_str(&p_tilde_table(&rec.p_tilde));
    for st in &rec.steps {
        let _ = writeln!(
            text,
            "# k={} lattice {} unknowns {} samples {} cond {} residual {} gap {}",
            st.k,
            st.lattice_size,
            st.fit.unknowns,
            st.fit.samples,
            num(st.fit.cond),
            num(st.fit.residual),
            num(st.min_gap)
        );
    }
    if let Some(d) = difference {
        let _ = writeln!(text, "# max relative difference to forward table {}", num(d));
    }
    let mut rows = Vec::new();
    for (k, p) in rec.p_tilde.iter().enumerate() {
        rows.extend(coefficient_rows(&format!("pt{}", k + 1), p));
    }
    let json = json!({
        "coefficients": rows_json(&rows),
        "steps": rec.steps.iter().map(|s| json!({"k": s.k, "lattice": s.lattice_size, "fit": s.fit, "min_gap": s.min_gap})).collect::<Vec<_>>(),
        "difference": difference,
    });
    Report { name: "recover".into(), text, csv: rows_csv(&rows), json, attachments: vec![] }
}

/// Machine-readable failure record.
pub fn error_record(e: &anyhow::Error, code: i32) -> Value {
    let kind = match e.downcast_ref::<Error>() {
        Some(err) => format!("{err:?}").split([' ', '(', '{']).next().unwrap_or("Error").to_string(),
        None => "Error".into(),
    };
    json!({"error": kind, "message": format!("{e:#}"), "exit_code": code})
}
