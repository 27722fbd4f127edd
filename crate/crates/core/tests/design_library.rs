use std::time::Instant;

use immortal_core::dag::{is_d_separated, open_paths, BiasKind, PathClass};
use immortal_core::design_library::{
    all_valid_specs, build_design_dag, expected_structure, verify_claims, DesignSpec, FigureId,
    ImmortalCause,
};

fn scenario(f: FigureId) -> immortal_core::design_library::CausalScenario {
    build_design_dag(&f.spec()).unwrap()
}

#[test]
fn every_valid_spec_classifies_as_expected() {
    let specs = all_valid_specs();
    assert!(specs.len() >= 9);
    for spec in specs {
        let s = build_design_dag(&spec).unwrap();
        let kind = s.classify().unwrap().kind;
        assert_eq!(kind, expected_structure(&spec).unwrap(), "{spec:?}");
    }
}

#[test]
fn canonical_claims_pass() {
    let start = Instant::now();
    for f in FigureId::ALL {
        let report = verify_claims(&f.spec()).unwrap();
        assert_eq!(report.figure_id, f);
        assert!(!report.claims.is_empty());
        assert!(report.all_pass(), "{report:?}");
    }
    assert!(start.elapsed().as_secs_f64() < 1.0);
}

#[test]
fn figure_classifications() {
    let expected = [
        (FigureId::Fig1b, BiasKind::Confounding),
        (FigureId::Fig1d, BiasKind::Selection),
        (FigureId::Fig2b, BiasKind::Composite),
        (FigureId::Fig2d, BiasKind::Selection),
        (FigureId::Fig3b, BiasKind::Confounding),
        (FigureId::Fig3d, BiasKind::Selection),
        (FigureId::FigS1, BiasKind::None),
        (FigureId::FigS2, BiasKind::None),
        (FigureId::FigS3, BiasKind::Selection),
    ];
    for (f, kind) in expected {
        assert_eq!(scenario(f).classify().unwrap().kind, kind, "{}", f.as_str());
    }
}

#[test]
fn survival_gate_survives_the_null() {
    let null = build_design_dag(&DesignSpec::new(ImmortalCause::ExposureDefinition).with_null_effect()).unwrap();
    assert!(!is_d_separated(&null.dag, &["E1"], &["D1+"], &[] as &[&str]).unwrap());
    let s1 = scenario(FigureId::FigS1);
    assert!(is_d_separated(&s1.dag, &["E0", "E1"], &["D1+"], &["D0+"]).unwrap());
}

#[test]
fn excluding_immortal_time_opens_a_second_path() {
    let d = scenario(FigureId::Fig2b).dag;
    assert!(!is_d_separated(&d, &["E0"], &["D0+"], &["S"]).unwrap());
    assert!(!is_d_separated(&d, &["E1"], &["D1+"], &["S"]).unwrap());
}

#[test]
fn competing_risk_paths() {
    let d = scenario(FigureId::Fig3b).dag;
    let paths = open_paths(&d, "E1", "D1+", &[] as &[&str]).unwrap();
    let p = paths
        .iter()
        .find(|p| p.matches(&["E1", "CR0+", "U0", "U1", "D1+"]))
        .expect("path exists");
    assert!(p.is_open());

    let d = scenario(FigureId::Fig3d).dag;
    let opened: Vec<_> = open_paths(&d, "E0", "U0", &["D0+", "CR0+"])
        .unwrap()
        .into_iter()
        .filter(|p| p.is_open() && p.classification == PathClass::ColliderOpened)
        .collect();
    assert_eq!(opened.len(), 2, "{opened:?}");
}

#[test]
fn eligibility_path_claims() {
    let d = scenario(FigureId::Fig1d).dag;
    let paths = open_paths(&d, "E0", "D1+", &["D0+"]).unwrap();
    let p = paths
        .iter()
        .find(|p| p.matches(&["E0", "D0+", "U0", "U1", "D1+"]))
        .unwrap();
    assert!(p.is_open());
    assert_eq!(p.classification, PathClass::ColliderOpened);

    let d = scenario(FigureId::Fig1b).dag;
    let paths = open_paths(&d, "E1", "D1+", &[] as &[&str]).unwrap();
    let p = paths.iter().find(|p| p.matches(&["E1", "D0+", "D1+"])).unwrap();
    assert!(p.is_open());
    assert_eq!(p.classification, PathClass::ConfoundingPath);
}
