//! Versioned TOML run configuration.
//!
//! ```toml
//! version = 1
//! out = "out"
//!
//! [metric]
//! kind = "hill-loop"
//! l = 1.0
//! a = 4.0
//! b = 1.0
//!
//! [normal_form]
//! k_max = 2
//!
//! [wave]
//! convention = "uniform-d"
//! iterates = 8
//! ```
//!
//! Exactly one of `[metric]` and `jet_file` is required. Unknown keys are
//! rejected. `QBNF_DIV_TOL`, `QBNF_TOL_HOMO` and `QBNF_INT_TOL` override the
//! matching tolerances.

use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use crate::birkhoff::NormalFormConfig;
use crate::catalog::{Geometry, DEFAULT_CAP};
use crate::error::{Error, Result};
use crate::floquet::TOL_EIG;
use crate::inverse::InverseConfig;
use crate::jacobi::{INT_TOL, N_S};
use crate::laplacian::MetricJet;
use crate::pipeline::{MetricSource, PipelineConfig};
use crate::wave::Convention;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NormalFormSection {
    pub k_max: usize,
    pub div_tol: f64,
    pub tol_homo: f64,
    pub tol_real: f64,
}

impl Default for NormalFormSection {
    fn default() -> Self {
        let d = NormalFormConfig::default();
        NormalFormSection { k_max: d.k_max, div_tol: d.div_tol, tol_homo: d.tol_homo, tol_real: d.tol_real }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NumericsSection {
    pub int_tol: f64,
    pub tol_eig: f64,
    /// Grid points along the geodesic for the frame.
    pub s_modes: usize,
    /// Fourier cap for periodic coefficients.
    pub fourier_cap: usize,
}

impl Default for NumericsSection {
    fn default() -> Self {
        NumericsSection { int_tol: INT_TOL, tol_eig: TOL_EIG, s_modes: N_S, fourier_cap: DEFAULT_CAP }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WaveSection {
    pub convention: Convention,
    /// Largest iterate reported.
    pub iterates: usize,
    /// Cross-check every invariant against finite differences.
    pub fd_check: bool,
}

impl Default for WaveSection {
    fn default() -> Self {
        WaveSection { convention: Convention::default(), iterates: 8, fd_check: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InverseSection {
    pub cond_max: f64,
    pub gap_tol: f64,
    pub resid_tol: f64,
    pub extra_samples: usize,
    pub window_margin: f64,
}

impl Default for InverseSection {
    fn default() -> Self {
        let d = InverseConfig::default();
        InverseSection {
            cond_max: d.cond_max,
            gap_tol: d.gap_tol,
            resid_tol: d.resid_tol,
            extra_samples: d.extra_samples,
            window_margin: d.window_margin,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric: Option<Geometry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jet_file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub normal_form: NormalFormSection,
    #[serde(default)]
    pub numerics: NumericsSection,
    #[serde(default)]
    pub wave: WaveSection,
    #[serde(default)]
    pub inverse: InverseSection,
}

impl RunConfig {
    pub fn for_geometry(g: Geometry) -> Self {
        RunConfig {
            version: CONFIG_VERSION,
            metric: Some(g),
            jet_file: None,
            out: None,
            normal_form: NormalFormSection::default(),
            numerics: NumericsSection::default(),
            wave: WaveSection::default(),
            inverse: InverseSection::default(),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Invalid(format!("config: {}", e.message())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads the file; a relative `jet_file` resolves against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        if let (Some(j), Some(dir)) = (cfg.jet_file.as_mut(), path.parent()) {
            if j.is_relative() {
                *j = dir.join(&*j);
            }
        }
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::Invalid(format!("config version {} unsupported (expected {CONFIG_VERSION})", self.version)));
        }
        if self.metric.is_some() == self.jet_file.is_some() {
            return Err(Error::Invalid("exactly one of [metric] and jet_file is required".into()));
        }
        let positive = [
            ("normal_form.div_tol", self.normal_form.div_tol),
            ("normal_form.tol_homo", self.normal_form.tol_homo),
            ("normal_form.tol_real", self.normal_form.tol_real),
            ("numerics.int_tol", self.numerics.int_tol),
            ("numerics.tol_eig", self.numerics.tol_eig),
            ("inverse.cond_max", self.inverse.cond_max),
            ("inverse.gap_tol", self.inverse.gap_tol),
            ("inverse.resid_tol", self.inverse.resid_tol),
            ("inverse.window_margin", self.inverse.window_margin),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::Invalid(format!("{name} must be positive")));
        }
        if self.numerics.s_modes < 8 || self.numerics.fourier_cap == 0 {
            return Err(Error::Invalid("numerics.s_modes >= 8 and numerics.fourier_cap >= 1 required".into()));
        }
        Ok(())
    }

    /// Applies tolerance overrides from a variable lookup (the process
    /// environment in the CLI).
    pub fn apply_env<F: Fn(&str) -> Option<String>>(&mut self, get: F) -> Result<()> {
        let read = |name: &str| -> Result<Option<f64>> {
            match get(name) {
                None => Ok(None),
                Some(v) => v
                    .trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|x| *x > 0.0 && x.is_finite())
                    .map(Some)
                    .ok_or_else(|| Error::Invalid(format!("{name}={v} is not a positive number"))),
            }
        };
        if let Some(v) = read("QBNF_DIV_TOL")? {
            self.normal_form.div_tol = v;
        }
        if let Some(v) = read("QBNF_TOL_HOMO")? {
            self.normal_form.tol_homo = v;
        }
        if let Some(v) = read("QBNF_INT_TOL")? {
            self.numerics.int_tol = v;
        }
        Ok(())
    }

    pub fn source(&self) -> Result<MetricSource> {
        match (&self.metric, &self.jet_file) {
            (Some(g), None) => Ok(MetricSource::Catalog(g.clone())),
            (None, Some(p)) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::Invalid(format!("{}: {e}", p.display())))?;
                Ok(MetricSource::Jets(MetricJet::from_text(&text, self.numerics.fourier_cap)?))
            }
            _ => Err(Error::Invalid("exactly one of [metric] and jet_file is required".into())),
        }
    }

    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            normal_form: NormalFormConfig {
                k_max: self.normal_form.k_max,
                div_tol: self.normal_form.div_tol,
                tol_homo: self.normal_form.tol_homo,
                tol_real: self.normal_form.tol_real,
            },
            int_tol: self.numerics.int_tol,
            tol_eig: self.numerics.tol_eig,
            samples: self.numerics.s_modes,
            cap: self.numerics.fourier_cap,
        }
    }

    pub fn inverse(&self) -> InverseConfig {
        InverseConfig {
            cond_max: self.inverse.cond_max,
            gap_tol: self.inverse.gap_tol,
            resid_tol: self.inverse.resid_tol,
            div_tol: self.normal_form.div_tol,
            extra_samples: self.inverse.extra_samples,
            window_margin: self.inverse.window_margin,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const HILL: &str = "version = 1\n[metric]\nkind = \"hill-loop\"\nl = 1.0\na = 4.0\nb = 1.0\n";

    #[test]
    fn minimal_config_uses_defaults() {
        let c = RunConfig::parse(HILL).unwrap();
        assert_eq!(c.normal_form, NormalFormSection::default());
        assert_eq!(c.wave.convention, Convention::UniformD);
        assert_eq!(c.pipeline(), PipelineConfig::default());
    }

    #[test]
    fn rejects_unknown_keys_and_versions() {
        assert!(RunConfig::parse(&format!("{HILL}[wave]\nconvension = \"paper\"\n")).is_err());
        assert!(RunConfig::parse(&HILL.replace("version = 1", "version = 2")).is_err());
        assert!(RunConfig::parse("version = 1\n").is_err());
        assert!(RunConfig::parse(&format!("{HILL}[normal_form]\ndiv_tol = -1.0\n")).is_err());
    }

    #[test]
    fn env_overrides_tolerances() {
        let mut c = RunConfig::parse(HILL).unwrap();
        c.apply_env(|k| (k == "QBNF_TOL_HOMO").then(|| "1e-7".to_string())).unwrap();
        assert_eq!(c.normal_form.tol_homo, 1e-7);
        assert_eq!(c.normal_form.div_tol, NormalFormSection::default().div_tol);
        assert!(c.apply_env(|k| (k == "QBNF_INT_TOL").then(|| "abc".to_string())).is_err());
    }

    #[test]
    fn serialization_round_trips() {
        let mut c = RunConfig::for_geometry(Geometry::ConstantCurvature { l: 2.0, k: -1.0 });
        c.wave.convention = Convention::Paper;
        let text = toml::to_string(&c).unwrap();
        assert_eq!(RunConfig::parse(&text).unwrap(), c);
    }
}
