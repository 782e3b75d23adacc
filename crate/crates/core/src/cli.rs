//! Command-line front end. Exit codes: 0 ok, 1 user error, 2 numerical failure.

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::birkhoff::verify_normal_form;
use crate::config::RunConfig;
use crate::error::Error;
use crate::inverse::{read_samples, recover_normal_form, synthesize_samples};
use crate::pipeline;
use crate::report::{
    classify_report, error_record, normal_form_report, parse_coefficient_table, recover_report, table_difference,
    wave_report, InvariantRow, IterateRow, Report,
};
use crate::wave::{apply_derivatives, build_f, fd_step, finite_difference, iterate_values_from, CharacterData, Convention};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USER: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;

const DEFAULT_OUT: &str = "qbnf-out";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ConventionArg {
    Paper,
    UniformD,
}

#[derive(Debug, Parser)]
#[command(name = "qbnf", version, about = "Normal forms, wave invariants and their inversion at a closed geodesic")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for reports.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long = "k-max", global = true)]
    k_max: Option<usize>,
    /// Largest iterate N reported by wave-invariants.
    #[arg(long, global = true)]
    iterates: Option<usize>,
    /// Iterate samples (CSV k,n,re,im) for recover.
    #[arg(long, global = true)]
    samples: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    convention: Option<ConventionArg>,
    /// Forward coefficient table to diff the recovered one against.
    #[arg(long, global = true)]
    compare: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
enum Command {
    /// Monodromy and Floquet classification.
    Classify,
    /// Full normal form with diagnostics.
    NormalForm,
    /// Wave invariants and iterate values.
    WaveInvariants,
    /// Normal form coefficients from iterate samples.
    Recover,
}

fn exit_code(e: &anyhow::Error) -> i32 {
    match e.downcast_ref::<Error>() {
        Some(err) if err.is_numerical() => EXIT_NUMERICAL,
        _ => EXIT_USER,
    }
}

fn load_config<F: Fn(&str) -> Option<String>>(cli: &Cli, env: F) -> anyhow::Result<RunConfig> {
    let path = cli.config.as_ref().ok_or_else(|| Error::Invalid("--config is required".into()))?;
    let mut cfg = RunConfig::load(path)?;
    cfg.apply_env(env)?;
    if let Some(k) = cli.k_max {
        cfg.normal_form.k_max = k;
    }
    if let Some(n) = cli.iterates {
        cfg.wave.iterates = n;
    }
    if let Some(c) = cli.convention {
        cfg.wave.convention = match c {
            ConventionArg::Paper => Convention::Paper,
            ConventionArg::UniformD => Convention::UniformD,
        };
    }
    if let Some(o) = &cli.out {
        cfg.out = Some(o.clone());
    }
    Ok(cfg)
}

fn convention_name(c: Convention) -> &'static str {
    match c {
        Convention::Paper => "paper",
        Convention::UniformD => "uniform-d",
    }
}

fn execute(cli: &Cli, cfg: &RunConfig) -> anyhow::Result<Report> {
    let src = cfg.source()?;
    let pc = cfg.pipeline();
    let conv = cfg.wave.convention;
    match cli.command {
        Command::Classify => {
            let c = pipeline::classify(&src, &pc)?;
            Ok(classify_report(&c, src.length(), pc.normal_form.order()))
        }
        Command::NormalForm => {
            let out = pipeline::run(&src, &pc)?;
            let v = verify_normal_form(&out.normal_form, &out.model)?;
            Ok(normal_form_report(&out, &v))
        }
        Command::WaveInvariants => {
            let out = pipeline::run(&src, &pc)?;
            let nf = &out.normal_form;
            let data = CharacterData::new(&nf.floquet);
            let mut invariants = Vec::new();
            let mut iterates = Vec::new();
            for k in 0..=nf.k_max {
                let fp = build_f(k, nf, conv)?;
                let value = apply_derivatives(&fp, &data, false);
                let fd_relative_error = cfg
                    .wave
                    .fd_check
                    .then(|| (finite_difference(&fp, &data, fd_step(fp.degree())) - value).norm() / value.norm().max(f64::MIN_POSITIVE));
                invariants.push(InvariantRow { k, value, fd_relative_error });
                for n in 1..=cfg.wave.iterates as i64 {
                    let value = match iterate_values_from(&fp, &data, &[n], pc.normal_form.div_tol) {
                        Ok(v) => Ok(v[0]),
                        Err(e @ Error::ResonantIterate { .. }) => Err(e.to_string()),
                        Err(e) => return Err(e.into()),
                    };
                    iterates.push(IterateRow { k, n, value });
                }
            }
            let samples = synthesize_samples(&nf.p_tilde, &nf.floquet, nf.l, nf.k_max, conv, &cfg.inverse())?;
            Ok(wave_report(&out, convention_name(conv), &invariants, &iterates, &samples)?)
        }
        Command::Recover => {
            let path = cli.samples.as_ref().ok_or_else(|| Error::Invalid("recover needs --samples".into()))?;
            let file = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
            let samples = read_samples(file)?;
            for k in 0..=pc.normal_form.k_max {
                if !samples.iter().any(|s| s.k == k) {
                    return Err(Error::Invalid(format!("no samples for k = {k}")).into());
                }
            }
            let c = pipeline::classify(&src, &pc)?;
            let rec = recover_normal_form(&samples, &c.floquet, src.length(), pc.normal_form.k_max, conv, &cfg.inverse())?;
            let difference = match &cli.compare {
                None => None,
                Some(p) => {
                    let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                    let forward = parse_coefficient_table(&text)?;
                    let ours = parse_coefficient_table(&crate::report::p_tilde_table(&rec.p_tilde))?;
                    Some(table_difference(&ours, &forward))
                }
            };
            Ok(recover_report(&rec, difference))
        }
    }
}

fn write_error(dir: Option<&Path>, record: &serde_json::Value) {
    if let Some(d) = dir {
        if std::fs::create_dir_all(d).is_ok() {
            let _ = std::fs::write(d.join("error.json"), format!("{record:#}\n"));
        }
    }
}

/// Runs the CLI on `args` (including the program name) and returns the
/// exit code. `env` supplies tolerance overrides.
pub fn run<I, T, F>(args: I, env: F) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
    F: Fn(&str) -> Option<String>,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USER } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let cfg = match load_config(&cli, env) {
        Ok(c) => c,
        Err(e) => {
            let code = exit_code(&e);
            eprintln!("{}", error_record(&e, code));
            write_error(cli.out.as_deref(), &error_record(&e, code));
            return code;
        }
    };
    let dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    let result = execute(&cli, &cfg).and_then(|r| {
        let files = r.write(&dir)?;
        Ok((r, files))
    });
    match result {
        Ok((r, files)) => {
            // A closed stdout (e.g. piped into `head`) is not a failure.
            let mut out = std::io::stdout().lock();
            let _ = out.write_all(r.text.as_bytes());
            for f in files {
                let _ = writeln!(out, "wrote {}", f.display());
            }
            EXIT_OK
        }
        Err(e) => {
            let code = exit_code(&e);
            let rec = error_record(&e, code);
            eprintln!("{rec}");
            write_error(Some(&dir), &rec);
            code
        }
    }
}
