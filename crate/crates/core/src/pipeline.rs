//! End-to-end driver: geometry to normal form.

use crate::birkhoff::{run_normal_form, NormalFormConfig, NormalFormResult};
use crate::catalog::{Geometry, DEFAULT_CAP};

use crate::error::Result;
use crate::floquet::{classify_poincare, FloquetClassification, SymplecticMatrix, TOL_EIG};
use crate::jacobi::{build_wronskian, monodromy_weightless, CurvatureLoop, WronskianFrame, INT_TOL, N_S};
use crate::laplacian::{conjugate_to_model, half_density_reduce, rescale_expand, MetricJet, SemiclassicalExpansion};

/// Where the metric jets come from.
#[derive(Debug, Clone, PartialEq)]
pub enum MetricSource {
    Catalog(Geometry),
    /// Precomputed jets; their order bounds the reachable `k_max`.
    Jets(MetricJet),
}

impl MetricSource {
    pub fn length(&self) -> f64 {
        match self {
            MetricSource::Catalog(g) => g.length(),
            MetricSource::Jets(j) => j.l,
        }
    }

    pub fn jets(&self, order: usize, cap: usize) -> Result<MetricJet> {
        match self {
            MetricSource::Catalog(g) => g.jets(order, cap),
            MetricSource::Jets(j) => Ok(j.clone()),
        }
    }

    pub fn curvature_loop(&self) -> Result<CurvatureLoop> {
        match self {
            MetricSource::Catalog(g) => g.curvature_loop(),
            MetricSource::Jets(j) => CurvatureLoop::new(j.l, j.curvature()),
        }
    }
}

impl From<Geometry> for MetricSource {
    fn from(g: Geometry) -> Self {
        MetricSource::Catalog(g)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineConfig {
    pub normal_form: NormalFormConfig,
    pub int_tol: f64,
    pub tol_eig: f64,
    pub samples: usize,
    pub cap: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            normal_form: NormalFormConfig::default(),
            int_tol: INT_TOL,
            tol_eig: TOL_EIG,
            samples: N_S,
            cap: DEFAULT_CAP,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Classified {
    pub monodromy: SymplecticMatrix,
    pub floquet: FloquetClassification,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub classified: Classified,
    pub frame: WronskianFrame,
    pub model: SemiclassicalExpansion,
    pub normal_form: NormalFormResult,
}

pub fn classify(geom: &MetricSource, cfg: &PipelineConfig) -> Result<Classified> {
    let lp = geom.curvature_loop()?;
    let monodromy = monodromy_weightless(&lp, cfg.int_tol)?;
    let floquet = classify_poincare(&monodromy, cfg.tol_eig)?;
    Ok(Classified { monodromy, floquet })
}

/// Jets, expansion, frame and conjugated model.
pub fn model_expansion(geom: &MetricSource, cfg: &PipelineConfig) -> Result<(Classified, WronskianFrame, SemiclassicalExpansion)> {
    let classified = classify(geom, cfg)?;
    let order = cfg.normal_form.order();
    let lp = geom.curvature_loop()?;
    let frame = build_wronskian(&lp, &classified.floquet, cfg.samples, cfg.int_tol)?;
    let jets = half_density_reduce(&geom.jets(order, cfg.cap)?)?;
    let exp = rescale_expand(&jets, order)?;
    let model = conjugate_to_model(&exp, &frame, &classified.floquet)?;
    Ok((classified, frame, model))
}

pub fn run(geom: &MetricSource, cfg: &PipelineConfig) -> Result<PipelineOutput> {
    let (classified, frame, model) = model_expansion(geom, cfg)?;
    let normal_form = run_normal_form(&model, &classified.floquet, cfg.normal_form)?;
    Ok(PipelineOutput { classified, frame, model, normal_form })
}
