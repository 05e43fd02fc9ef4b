//! Configuration, orchestration of the analyses and the JSON/SVG outputs.
//!
//! Units: chart coordinates and the continuation parameter are
//! dimensionless; lengths are surface arclength in the chart unit and
//! curvatures are in inverse chart units.

pub mod config;
pub mod svg;

use std::path::Path;
use std::time::Instant;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

pub use config::{AnalysisConfig, ConfigError, LambdaRange, Mode, SurfaceSpec};

use crate::foliation::{
    find_cycles, integrate_line, CycleOptions, CycleRecord, LineOptions, PrincipalCurve, Termination,
};
use crate::geometry::{Foliation, Surface};
use crate::lift::{trace_separatrices, SeparatrixRole, TraceOptions};
use crate::sweep::{
    continue_branch, detect_cycle_birth, detect_events, BifurcationEvent, ContinuationOptions, CycleBirthOptions,
    EventKind, UmbilicBranch,
};
use crate::umbilic::{analyze_umbilic, find_umbilics, UmbilicRecord};

pub const SCHEMA_VERSION: &str = "1.0.0";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct UmbilicReport {
    /// Parameter value at which the umbilic was found.
    pub lambda: f64,
    pub record: UmbilicRecord,
    /// Traced separatrices per foliation, `[min, max]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub separatrices: Option<[usize; 2]>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum CurveKind {
    Line,
    Separatrix,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct CurveReport {
    pub lambda: f64,
    pub foliation: Foliation,
    pub kind: CurveKind,
    /// Index into `umbilics` for separatrices.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub umbilic: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub role: Option<SeparatrixRole>,
    pub termination: Termination,
    /// Surface arclength, chart units.
    pub length: f64,
    /// Polyline in chart coordinates.
    pub points: Vec<[f64; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct CycleReport {
    pub lambda: f64,
    /// Index into `events` when the cycle was found by a cycle-birth probe.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub event: Option<usize>,
    pub record: CycleRecord,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct EventReport {
    /// Index into `branches`.
    pub branch: usize,
    pub event: BifurcationEvent,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ErrorEntry {
    pub stage: String,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct Timing {
    pub stage: String,
    /// Wall-clock seconds.
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ReportDocument {
    /// Semantic version of this document layout.
    pub schema_version: String,
    pub tool: String,
    pub version: String,
    pub config: AnalysisConfig,
    pub umbilics: Vec<UmbilicReport>,
    pub curves: Vec<CurveReport>,
    pub cycles: Vec<CycleReport>,
    pub branches: Vec<UmbilicBranch>,
    pub events: Vec<EventReport>,
    pub errors: Vec<ErrorEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timings: Option<Vec<Timing>>,
}

impl ReportDocument {
    fn new(config: &AnalysisConfig) -> Self {
        ReportDocument {
            schema_version: SCHEMA_VERSION.into(),
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config: config.clone(),
            umbilics: Vec::new(),
            curves: Vec::new(),
            cycles: Vec::new(),
            branches: Vec::new(),
            events: Vec::new(),
            errors: Vec::new(),
            timings: None,
        }
    }

    /// JSON with sorted keys and a trailing newline.
    pub fn to_json(&self) -> String {
        // Value maps are ordered by key
        let v = serde_json::to_value(self).expect("report serializes");
        let mut s = serde_json::to_string_pretty(&v).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn has_errors(&self) -> bool {
        !self.errors.is_empty()
    }

    fn error(&mut self, stage: &str, e: impl std::fmt::Display) {
        self.errors.push(ErrorEntry { stage: stage.into(), message: e.to_string() });
    }
}

/// JSON schema of [`ReportDocument`].
pub fn report_schema() -> String {
    let mut s = serde_json::to_string_pretty(&schemars::schema_for!(ReportDocument)).expect("schema serializes");
    s.push('\n');
    s
}

/// JSON schema of [`AnalysisConfig`].
pub fn config_schema() -> String {
    let mut s = serde_json::to_string_pretty(&schemars::schema_for!(AnalysisConfig)).expect("schema serializes");
    s.push('\n');
    s
}

pub struct RunOutput {
    pub document: ReportDocument,
    /// `(file name, contents)`
    pub svgs: Vec<(String, String)>,
}

impl RunOutput {
    /// Write the report, its schema and the portraits into `dir`.
    pub fn write(&self, dir: &Path) -> Result<(), ConfigError> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(&self.document.config.output.report), self.document.to_json())?;
        std::fs::write(dir.join("report.schema.json"), report_schema())?;
        for (name, body) in &self.svgs {
            std::fs::write(dir.join(name), body)?;
        }
        Ok(())
    }
}

struct Timer {
    on: bool,
    out: Vec<Timing>,
}

impl Timer {
    fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let r = f();
        if self.on {
            self.out.push(Timing { stage: stage.into(), seconds: t.elapsed().as_secs_f64() });
        }
        r
    }
}

/// Run the analysis described by `config`. Configuration problems are
/// errors; computation problems are recorded in the report.
pub fn run(config: &AnalysisConfig) -> Result<RunOutput, ConfigError> {
    config.validate()?;
    let family = config.surface.build()?;
    let mut doc = ReportDocument::new(config);
    let mut svgs = Vec::new();
    let mut timer = Timer { on: config.output.timings, out: Vec::new() };
    match config.mode {
        Mode::Analyze => {
            let s = family.with_lambda(config.lambda);
            timer.time("analyze", || analyze_at(&s, config, config.lambda, &mut doc, false));
        }
        Mode::Portrait => {
            let s = family.with_lambda(config.lambda);
            timer.time("portrait", || analyze_at(&s, config, config.lambda, &mut doc, true));
            if config.output.svg {
                svgs.push(("portrait.svg".to_string(), portrait_svg(&s, &doc, config.lambda)));
            }
        }
        Mode::Cycles => {
            let s = family.with_lambda(config.lambda);
            timer.time("analyze", || analyze_at(&s, config, config.lambda, &mut doc, false));
            timer.time("cycles", || cycles_at(&s, config, config.lambda, &mut doc));
        }
        Mode::Sweep => {
            timer.time("sweep", || sweep(&family, config, &mut doc, &mut svgs));
        }
    }
    if config.output.timings {
        doc.timings = Some(timer.out);
    }
    Ok(RunOutput { document: doc, svgs })
}

fn umbilics_of(s: &Surface, config: &AnalysisConfig, doc: &mut ReportDocument) -> Vec<[f64; 2]> {
    match find_umbilics(s, config.grid) {
        Ok(u) => u,
        Err(e) => {
            doc.error("umbilics", e);
            Vec::new()
        }
    }
}

fn analyze_at(s: &Surface, config: &AnalysisConfig, lambda: f64, doc: &mut ReportDocument, curves: bool) {
    let ups = umbilics_of(s, config, doc);
    let pc = &config.portrait;
    for (k, &p) in ups.iter().enumerate() {
        let record = match analyze_umbilic(s, p, config.tol_umbilic) {
            Ok(r) => r,
            Err(e) => {
                doc.error("classify", format!("umbilic at ({}, {}): {e}", p[0], p[1]));
                continue;
            }
        };
        let others: Vec<[f64; 2]> = ups.iter().enumerate().filter(|(i, _)| *i != k).map(|(_, q)| *q).collect();
        let topts = TraceOptions {
            max_len: pc.separatrix_len,
            step: pc.step,
            stop_points: others,
            stop_radius: 1e-4,
            ..TraceOptions::default()
        };
        let index = doc.umbilics.len();
        let seps = match trace_separatrices(s, p[0], p[1], &topts) {
            Ok(v) => Some(v),
            Err(e) => {
                doc.error("separatrices", format!("umbilic at ({}, {}): {e}", p[0], p[1]));
                None
            }
        };
        let counts = seps.as_ref().map(|v| {
            let n = |f: Foliation| v.iter().filter(|x| x.curve.foliation == f).count();
            [n(Foliation::Min), n(Foliation::Max)]
        });
        doc.umbilics.push(UmbilicReport { lambda, record, separatrices: counts });
        if curves {
            for sp in seps.into_iter().flatten() {
                doc.curves.push(curve_report(lambda, sp.curve, CurveKind::Separatrix, Some(index), Some(sp.role)));
            }
        }
    }
    if curves {
        grid_lines(s, pc, &ups, lambda, doc);
    }
}

fn curve_report(
    lambda: f64,
    c: PrincipalCurve,
    kind: CurveKind,
    umbilic: Option<usize>,
    role: Option<SeparatrixRole>,
) -> CurveReport {
    CurveReport {
        lambda,
        foliation: c.foliation,
        kind,
        umbilic,
        role,
        termination: c.termination,
        length: c.length(),
        points: c.points,
    }
}

fn grid_lines(s: &Surface, pc: &config::PortraitConfig, ups: &[[f64; 2]], lambda: f64, doc: &mut ReportDocument) {
    let n = pc.lines.max(1);
    let dom = s.domain;
    let lo = LineOptions { step: pc.step, max_len: pc.max_len, umbilics: ups.to_vec(), ..LineOptions::default() };
    for f in [Foliation::Min, Foliation::Max] {
        for i in 0..n {
            for j in 0..n {
                let x = [
                    dom.u[0] + dom.width() * (i as f64 + 0.5) / n as f64,
                    dom.v[0] + dom.height() * (j as f64 + 0.5) / n as f64,
                ];
                if ups.iter().any(|c| (x[0] - c[0]).hypot(x[1] - c[1]) < 1e-3) {
                    continue;
                }
                let fwd = integrate_line(s, x, f, 1.0, &lo);
                let bwd = integrate_line(s, x, f, -1.0, &lo);
                match (fwd, bwd) {
                    (Ok(a), Ok(b)) => {
                        let mut pts: Vec<[f64; 2]> = b.points.iter().rev().copied().collect();
                        pts.extend(a.points.iter().skip(1));
                        let length = a.length() + b.length();
                        doc.curves.push(CurveReport {
                            lambda,
                            foliation: f,
                            kind: CurveKind::Line,
                            umbilic: None,
                            role: None,
                            termination: a.termination,
                            length,
                            points: pts,
                        });
                    }
                    (Err(e), _) | (_, Err(e)) => doc.error("lines", format!("seed ({}, {}): {e}", x[0], x[1])),
                }
            }
        }
    }
}

fn portrait_svg(s: &Surface, doc: &ReportDocument, lambda: f64) -> String {
    let strokes: Vec<svg::Stroke> = doc
        .curves
        .iter()
        .filter(|c| c.lambda == lambda)
        .map(|c| svg::Stroke { foliation: c.foliation, points: &c.points, separatrix: c.kind == CurveKind::Separatrix })
        .collect();
    let glyphs: Vec<svg::Glyph> = doc
        .umbilics
        .iter()
        .filter(|u| u.lambda == lambda)
        .map(|u| svg::Glyph { position: u.record.position, class: u.record.classification.class })
        .collect();
    svg::render_portrait(&s.domain, &strokes, &glyphs, &svg::Style::default())
}

fn cycles_at(s: &Surface, config: &AnalysisConfig, lambda: f64, doc: &mut ReportDocument) {
    let ups: Vec<[f64; 2]> = doc.umbilics.iter().filter(|u| u.lambda == lambda).map(|u| u.record.position).collect();
    let opts = CycleOptions {
        seed_grid: config.seed_grid,
        max_len: config.cycles.max_len,
        umbilics: ups,
        ..CycleOptions::default()
    };
    for &f in &config.cycles.foliations {
        for c in find_cycles(s, s.domain, f, &opts) {
            doc.cycles.push(CycleReport { lambda, event: None, record: c });
        }
    }
}

/// Whether `p` at `lambda` lies on a branch already followed.
fn on_branch(b: &UmbilicBranch, lambda: f64, p: [f64; 2]) -> bool {
    b.samples.windows(2).any(|w| {
        let (a, c) = (&w[0], &w[1]);
        let (lo, hi) = (a.lambda.min(c.lambda), a.lambda.max(c.lambda));
        if lambda < lo - 1e-12 || lambda > hi + 1e-12 {
            return false;
        }
        let t = if hi > lo { (lambda - a.lambda) / (c.lambda - a.lambda) } else { 0.0 };
        let q = [a.position[0] + t * (c.position[0] - a.position[0]), a.position[1] + t * (c.position[1] - a.position[1])];
        (q[0] - p[0]).hypot(q[1] - p[1]) < 1e-3
    })
}

fn sweep(family: &Surface, config: &AnalysisConfig, doc: &mut ReportDocument, svgs: &mut Vec<(String, String)>) {
    let Some(range) = config.lambda_range.clone() else { return };
    let bounds = [range.start, range.end];
    let copts = ContinuationOptions { ds: config.sweep.ds, ..ContinuationOptions::default() };
    let mut seeds: Vec<[f64; 3]> = config.sweep.seeds.clone();
    let auto = seeds.is_empty();
    let samples = range.samples();
    if auto {
        for &l in &samples {
            let s = family.with_lambda(l);
            for p in umbilics_of(&s, config, doc) {
                seeds.push([l, p[0], p[1]]);
            }
        }
    }
    for seed in seeds {
        if doc.branches.iter().any(|b| on_branch(b, seed[0], [seed[1], seed[2]])) {
            continue;
        }
        match continue_branch(family, seed, bounds, &copts) {
            Ok(b) => {
                if b.lost {
                    doc.error("continuation", format!("branch from {seed:?} lost before leaving the range"));
                }
                doc.branches.push(b);
            }
            Err(e) => doc.error("continuation", format!("seed {seed:?}: {e}")),
        }
    }
    let mut events = Vec::new();
    for (k, b) in doc.branches.iter().enumerate() {
        if b.samples.len() < 2 {
            continue;
        }
        for e in detect_events(b, family, bounds) {
            // a fold is seen by every branch through it
            let dup = events.iter().any(|r: &EventReport| {
                r.event.kind == e.kind
                    && (r.event.lambda_star - e.lambda_star).abs() < 1e-6
                    && (r.event.location[0] - e.location[0]).hypot(r.event.location[1] - e.location[1]) < 1e-6
            });
            if !dup {
                events.push(EventReport { branch: k, event: e });
            }
        }
    }
    doc.events = events;
    if !config.sweep.probe_offsets.is_empty() {
        let n = doc.events.len();
        for i in 0..n {
            let er = doc.events[i].clone();
            if !matches!(er.event.kind, EventKind::D12Transition { .. } | EventKind::D123Fold { .. }) {
                continue;
            }
            let opts = CycleBirthOptions {
                cycle: CycleOptions { seed_grid: config.seed_grid, max_len: config.cycles.max_len, ..CycleOptions::default() },
                ..CycleBirthOptions::default()
            };
            match detect_cycle_birth(family, &er.event, &config.sweep.probe_offsets, &opts) {
                Ok(cb) => {
                    if cb.flagged {
                        doc.error(
                            "cycle_birth",
                            format!("loop at lambda = {} without a one-sided cycle", er.event.lambda_star),
                        );
                    }
                    let idx = doc.events.len();
                    if let Some(ev) = cb.event {
                        doc.events.push(EventReport { branch: er.branch, event: ev });
                    }
                    for p in cb.probes {
                        for c in p.cycles {
                            let event = (idx < doc.events.len()).then_some(idx);
                            doc.cycles.push(CycleReport { lambda: p.lambda, event, record: c });
                        }
                    }
                }
                Err(e) => doc.error("cycle_birth", e),
            }
        }
    }
    if config.sweep.portraits {
        for (k, &l) in samples.iter().enumerate() {
            let s = family.with_lambda(l);
            analyze_at(&s, config, l, doc, true);
            if config.output.svg {
                svgs.push((format!("portrait_{k:03}.svg"), portrait_svg(&s, doc, l)));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cubic(a: f64, b: f64, c: f64) -> SurfaceSpec {
        SurfaceSpec::monge(&format!("(u^2 + v^2)/2 + {a}*u^3/6 + {b}*u*v^2/2 + {c}*v^3/6"), [-0.3, 0.3, -0.3, 0.3])
    }

    #[test]
    fn analyze_reports_one_lemon() {
        let out = run(&AnalysisConfig::new(cubic(3.0, 1.0, 0.0), Mode::Analyze)).unwrap();
        let d = &out.document;
        assert_eq!(d.umbilics.len(), 1);
        let c = &d.umbilics[0].record.classification;
        assert_eq!(c.class.name(), "D1");
        assert!((c.delta - 1.0).abs() < 1e-10);
        assert_eq!(d.umbilics[0].separatrices, Some([1, 1]));
        assert!(d.errors.is_empty());
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let text = r#"{"surface": {"kind": "monge", "h": "u^2", "domain": [-1, 1, -1, 1]}, "mode": "analyze", "colour": 1}"#;
        assert!(matches!(AnalysisConfig::from_json(text), Err(ConfigError::Parse(_))));
    }

    #[test]
    fn sweep_needs_a_range() {
        let mut c = AnalysisConfig::new(cubic(3.0, 1.0, 0.0), Mode::Sweep);
        assert!(matches!(c.validate(), Err(ConfigError::Invalid(_))));
        c.lambda_range = Some(LambdaRange { start: 1.0, end: 1.0, steps: 3 });
        assert!(matches!(c.validate(), Err(ConfigError::Invalid(_))));
    }

    #[test]
    fn keys_are_sorted() {
        let out = run(&AnalysisConfig::new(cubic(3.0, 1.0, 0.0), Mode::Analyze)).unwrap();
        let json = out.document.to_json();
        let b = json.find("\"branches\"").unwrap();
        let c = json.find("\"config\"").unwrap();
        let u = json.find("\"umbilics\"").unwrap();
        assert!(b < c && c < u);
    }

    #[test]
    fn lambda_range_parses() {
        let r: LambdaRange = "2.5:3.5:11".parse().unwrap();
        assert_eq!(r, LambdaRange { start: 2.5, end: 3.5, steps: 11 });
        assert_eq!(r.samples().len(), 11);
        assert!("2.5:3.5".parse::<LambdaRange>().is_err());
    }
}
