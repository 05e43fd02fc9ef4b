use curvlines::report::{report_schema, run, AnalysisConfig, LambdaRange, Mode, SurfaceSpec};
use curvlines::umbilic::UmbilicClass;

fn validator() -> jsonschema::Validator {
    let schema: serde_json::Value = serde_json::from_str(&report_schema()).unwrap();
    jsonschema::validator_for(&schema).expect("schema compiles")
}

fn family() -> SurfaceSpec {
    SurfaceSpec::monge("(u^2 + v^2)/2 + lambda*u^3/6 + u*v^2/2 + v^3/3", [-0.3, 0.3, -0.3, 0.3])
}

#[test]
fn reports_validate_against_the_schema() {
    let v = validator();
    let mut portrait = AnalysisConfig::new(family(), Mode::Portrait);
    portrait.lambda = 1.5;
    portrait.portrait.lines = 2;
    let mut sweep = AnalysisConfig::new(family(), Mode::Sweep);
    sweep.lambda_range = Some(LambdaRange { start: 2.5, end: 3.5, steps: 3 });
    sweep.output.timings = true;
    let mut cycles = AnalysisConfig::new(
        SurfaceSpec {
            kind: curvlines::report::config::SurfaceKindTag::Parametric,
            h: None,
            x: Some("sin(u)*cos(v)".into()),
            y: Some("1.3*cos(u)".into()),
            z: Some("1.7*sin(u)*sin(v)".into()),
            domain: [0.35, 2.79, -2.6, 2.6],
        },
        Mode::Cycles,
    );
    cycles.seed_grid = 2;
    for cfg in [portrait, sweep, cycles] {
        let out = run(&cfg).unwrap();
        let doc: serde_json::Value = serde_json::from_str(&out.document.to_json()).unwrap();
        let errs: Vec<String> = v.iter_errors(&doc).map(|e| format!("{} at {}", e, e.instance_path())).collect();
        assert!(errs.is_empty(), "{:?}: {errs:?}", cfg.mode);
    }
}

#[test]
fn unknown_report_fields_are_rejected() {
    let out = run(&AnalysisConfig::new(family(), Mode::Analyze)).unwrap();
    let mut doc: serde_json::Value = serde_json::from_str(&out.document.to_json()).unwrap();
    doc["extra"] = serde_json::json!(1);
    assert!(!validator().is_valid(&doc));
    assert!(serde_json::from_value::<curvlines::report::ReportDocument>(doc).is_err());
}

#[test]
fn report_round_trips() {
    let mut cfg = AnalysisConfig::new(family(), Mode::Sweep);
    cfg.lambda_range = Some(LambdaRange { start: 2.5, end: 3.5, steps: 3 });
    let out = run(&cfg).unwrap();
    let text = out.document.to_json();
    let back: curvlines::report::ReportDocument = serde_json::from_str(&text).unwrap();
    assert_eq!(back.to_json(), text);
}

#[test]
fn sweep_finds_the_transition_and_labels_both_sides() {
    let mut cfg = AnalysisConfig::new(family(), Mode::Sweep);
    cfg.lambda_range = Some(LambdaRange { start: 2.5, end: 3.5, steps: 3 });
    cfg.sweep.seeds = vec![[2.5, 0.0, 0.0]];
    cfg.sweep.portraits = true;
    cfg.portrait.lines = 2;
    let out = run(&cfg).unwrap();
    let d = &out.document;
    assert!(d.errors.is_empty(), "{:?}", d.errors);
    assert_eq!(d.branches.len(), 1);
    assert_eq!(d.events.len(), 1);
    assert!((d.events[0].event.lambda_star - 3.0).abs() < 1e-8);
    let names: Vec<&str> = out.svgs.iter().map(|s| s.0.as_str()).collect();
    assert_eq!(names, ["portrait_000.svg", "portrait_001.svg", "portrait_002.svg"]);
    let at = |l: f64| d.umbilics.iter().find(|u| u.lambda == l && u.record.position[0].abs() < 1e-9).unwrap();
    assert_eq!(at(2.5).record.classification.class, UmbilicClass::D2);
    assert_eq!(at(3.5).record.classification.class, UmbilicClass::D1);
}

#[test]
fn d3_portrait_has_three_separatrices_per_foliation() {
    let mut cfg = AnalysisConfig::new(
        SurfaceSpec::monge("(u^2 + v^2)/2 - u^3/6 + u*v^2/2", [-0.3, 0.3, -0.3, 0.3]),
        Mode::Portrait,
    );
    cfg.portrait.lines = 2;
    let out = run(&cfg).unwrap();
    let d = &out.document;
    assert_eq!(d.umbilics.len(), 1);
    assert_eq!(d.umbilics[0].separatrices, Some([3, 3]));
    let svg = &out.svgs[0].1;
    assert_eq!(svg.matches("class=\"min separatrix\"").count(), 3);
    assert_eq!(svg.matches("class=\"max separatrix\"").count(), 3);
    // every separatrix starts at the glyph
    for c in d.curves.iter().filter(|c| c.umbilic == Some(0)) {
        let p = c.points[0];
        assert!(p[0].hypot(p[1]) < 1e-3, "{p:?}");
    }
}
