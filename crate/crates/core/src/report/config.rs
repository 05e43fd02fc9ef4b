use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::Expr;
use crate::geometry::{Domain, Foliation, Surface};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("invalid config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("cannot write output: {0}")]
    Write(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Analyze,
    Portrait,
    Sweep,
    Cycles,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "lowercase")]
pub enum SurfaceKindTag {
    Monge,
    Parametric,
}

/// Surface given by expressions in `u`, `v` and optionally `lambda`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct SurfaceSpec {
    pub kind: SurfaceKindTag,
    /// Height function, for `monge`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<String>,
    /// Coordinate functions, for `parametric`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z: Option<String>,
    /// `[u_min, u_max, v_min, v_max]` in chart units.
    pub domain: [f64; 4],
}

impl SurfaceSpec {
    pub fn monge(h: &str, domain: [f64; 4]) -> Self {
        SurfaceSpec { kind: SurfaceKindTag::Monge, h: Some(h.to_string()), x: None, y: None, z: None, domain }
    }

    pub fn build(&self) -> Result<Surface, ConfigError> {
        let [u0, u1, v0, v1] = self.domain;
        if !(u0 < u1 && v0 < v1) {
            return Err(ConfigError::Invalid(format!("empty domain {:?}", self.domain)));
        }
        let dom = Domain::new(u0, u1, v0, v1);
        let need = |e: &Option<String>, name: &str| {
            e.clone().ok_or_else(|| ConfigError::Invalid(format!("surface.{name} is required for this kind")))
        };
        let bad = |e: crate::expr::ExprError| ConfigError::Invalid(e.to_string());
        match self.kind {
            SurfaceKindTag::Monge => Surface::monge(&need(&self.h, "h")?, dom).map_err(bad),
            SurfaceKindTag::Parametric => {
                Surface::parametric(&need(&self.x, "x")?, &need(&self.y, "y")?, &need(&self.z, "z")?, dom).map_err(bad)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct LambdaRange {
    pub start: f64,
    pub end: f64,
    /// Number of samples, endpoints included.
    pub steps: usize,
}

impl LambdaRange {
    pub fn samples(&self) -> Vec<f64> {
        let n = self.steps.max(2);
        (0..n).map(|k| self.start + (self.end - self.start) * k as f64 / (n - 1) as f64).collect()
    }
}

impl std::str::FromStr for LambdaRange {
    type Err = String;

    /// `a:b:n`
    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let [a, b, n] = parts[..] else {
            return Err(format!("expected a:b:n, got {s:?}"));
        };
        let f = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("{x:?}: {e}"));
        Ok(LambdaRange { start: f(a)?, end: f(b)?, steps: n.trim().parse().map_err(|e| format!("{n:?}: {e}"))? })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct PortraitConfig {
    /// Seed lines per side of the grid, per foliation.
    pub lines: usize,
    /// Length of each line in each sense, in surface arclength.
    pub max_len: f64,
    pub step: f64,
    /// Length of traced separatrices.
    pub separatrix_len: f64,
}

impl Default for PortraitConfig {
    fn default() -> Self {
        PortraitConfig { lines: 6, max_len: 1.5, step: 0.02, separatrix_len: 3.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    /// Branch seeds `(lambda, u, v)`; found by umbilic search at the range
    /// samples when empty.
    pub seeds: Vec<[f64; 3]>,
    /// Continuation step.
    pub ds: f64,
    /// Offsets from each event at which principal cycles are searched; no
    /// cycle-birth search when empty.
    pub probe_offsets: Vec<f64>,
    /// One portrait per range sample.
    pub portraits: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig { seeds: Vec::new(), ds: 0.01, probe_offsets: Vec::new(), portraits: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct CyclesConfig {
    pub foliations: Vec<Foliation>,
    /// Longest curve followed while looking for a return.
    pub max_len: f64,
}

impl Default for CyclesConfig {
    fn default() -> Self {
        CyclesConfig { foliations: vec![Foliation::Min, Foliation::Max], max_len: 20.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    /// Output directory; nothing is written when absent.
    pub dir: Option<String>,
    pub report: String,
    pub svg: bool,
    /// Record wall-clock timings. Off by default since they break
    /// byte-identical reports.
    pub timings: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: None, report: "report.json".into(), svg: true, timings: false }
    }
}

fn default_grid() -> usize {
    40
}

fn default_tol() -> f64 {
    crate::umbilic::CLASSIFY_TOL
}

fn default_seed_grid() -> usize {
    3
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    pub surface: SurfaceSpec,
    pub mode: Mode,
    /// Parameter value outside sweep mode.
    #[serde(default)]
    pub lambda: f64,
    #[serde(default)]
    pub lambda_range: Option<LambdaRange>,
    /// Cells per side of the umbilic search grid.
    #[serde(default = "default_grid")]
    pub grid: usize,
    /// Classification tolerance on the normal-form functionals.
    #[serde(default = "default_tol")]
    pub tol_umbilic: f64,
    /// Seeds per side of the cycle search grid.
    #[serde(default = "default_seed_grid")]
    pub seed_grid: usize,
    #[serde(default)]
    pub portrait: PortraitConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub cycles: CyclesConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

impl AnalysisConfig {
    pub fn new(surface: SurfaceSpec, mode: Mode) -> Self {
        AnalysisConfig {
            surface,
            mode,
            lambda: 0.0,
            lambda_range: None,
            grid: default_grid(),
            tol_umbilic: default_tol(),
            seed_grid: default_seed_grid(),
            portrait: PortraitConfig::default(),
            sweep: SweepConfig::default(),
            cycles: CyclesConfig::default(),
            output: OutputConfig::default(),
        }
    }

    /// Parse only; [`AnalysisConfig::validate`] runs when the analysis starts
    /// so that command-line overrides are taken into account.
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &str) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.into(), source })?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        self.surface.build()?;
        for (name, v) in [
            ("tol_umbilic", self.tol_umbilic),
            ("sweep.ds", self.sweep.ds),
            ("portrait.max_len", self.portrait.max_len),
            ("portrait.step", self.portrait.step),
            ("portrait.separatrix_len", self.portrait.separatrix_len),
            ("cycles.max_len", self.cycles.max_len),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if self.grid < 2 {
            return bad(format!("grid must be at least 2, got {}", self.grid));
        }
        if self.seed_grid == 0 {
            return bad("seed_grid must be at least 1".into());
        }
        if !self.lambda.is_finite() {
            return bad("lambda must be finite".into());
        }
        if self.mode == Mode::Sweep {
            match &self.lambda_range {
                None => return bad("sweep mode needs lambda_range".into()),
                Some(r) if !(r.start < r.end) || r.steps < 2 => {
                    return bad(format!("empty lambda range {}:{}:{}", r.start, r.end, r.steps))
                }
                _ => {}
            }
            if !self.surface_uses_lambda() {
                log::warn!("sweep over a surface that does not depend on lambda");
            }
        }
        Ok(())
    }

    fn surface_uses_lambda(&self) -> bool {
        [&self.surface.h, &self.surface.x, &self.surface.y, &self.surface.z]
            .into_iter()
            .flatten()
            .any(|e| Expr::parse(e).map(|x| x.uses_lambda()).unwrap_or(false))
    }
}
