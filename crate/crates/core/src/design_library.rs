//! Canonical time-varying DAGs for each study-design descriptor and the path
//! claims each figure is expected to satisfy.
//!
//! Every graph shares a two-time-point skeleton:
//!
//! ```text
//! E0 -> E1    E0 -> D0+   E1 -> D1+   D0+ -> D1+   D0+ -> E1
//! U0 -> U1    U0 -> D0+   U1 -> D1+
//! ```
//!
//! `D0+ -> E1` is the survival gate: a subject must be alive through the
//! first interval to be exposed at time 1. Competing-risk designs add a
//! `CR` chain sharing the cause `U`, and designs that drop immortal time add
//! an excluded-time node `S`.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::dag::{
    classify_bias, exposure_paths, is_d_separated, open_paths, BiasKind, BiasStructure, Dag,
    DagError, PathClass, PathStatus,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DesignError {
    #[error("unsupported design combination: {0}")]
    Unsupported(&'static str),
    #[error("unknown figure id `{0}`")]
    UnknownFigure(String),
    #[error(transparent)]
    Dag(#[from] DagError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ImmortalCause {
    /// Exposure is defined with information from after time zero.
    ExposureDefinition,
    /// Eligibility is defined with information from after time zero.
    EligibilityDefinition,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Matching {
    #[default]
    None,
    PrescriptionTimeDistribution,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DesignSpec {
    pub immortal_cause: ImmortalCause,
    pub exclude_immortal: bool,
    pub competing_risk: bool,
    pub null_effect: bool,
    pub matching: Matching,
}

impl DesignSpec {
    pub fn new(immortal_cause: ImmortalCause) -> Self {
        Self {
            immortal_cause,
            exclude_immortal: false,
            competing_risk: false,
            null_effect: false,
            matching: Matching::None,
        }
    }

    pub fn excluding_immortal(mut self) -> Self {
        self.exclude_immortal = true;
        self
    }

    pub fn with_competing_risk(mut self) -> Self {
        self.competing_risk = true;
        self
    }

    pub fn with_null_effect(mut self) -> Self {
        self.null_effect = true;
        self
    }

    pub fn with_ptdm(mut self) -> Self {
        self.matching = Matching::PrescriptionTimeDistribution;
        self
    }

    pub fn validate(&self) -> Result<(), DesignError> {
        if self.exclude_immortal && self.competing_risk {
            return Err(DesignError::Unsupported(
                "excluding immortal time together with a competing risk",
            ));
        }
        if self.matching == Matching::PrescriptionTimeDistribution {
            if self.immortal_cause != ImmortalCause::ExposureDefinition {
                return Err(DesignError::Unsupported(
                    "prescription time-distribution matching needs an exposure-defined design",
                ));
            }
            if self.exclude_immortal || self.competing_risk {
                return Err(DesignError::Unsupported(
                    "prescription time-distribution matching is only modelled without exclusion or competing risks",
                ));
            }
        }
        Ok(())
    }

    pub fn figure(&self) -> Result<FigureId, DesignError> {
        self.validate()?;
        use ImmortalCause::*;
        if self.matching == Matching::PrescriptionTimeDistribution {
            return Ok(FigureId::FigS3);
        }
        Ok(
            match (self.immortal_cause, self.exclude_immortal, self.competing_risk) {
                (ExposureDefinition, false, false) => FigureId::Fig1b,
                (EligibilityDefinition, false, false) if self.null_effect => FigureId::FigS1,
                (EligibilityDefinition, false, false) => FigureId::Fig1d,
                (ExposureDefinition, true, false) => FigureId::Fig2b,
                (EligibilityDefinition, true, false) => FigureId::Fig2d,
                (ExposureDefinition, false, true) => FigureId::Fig3b,
                (EligibilityDefinition, false, true) if self.null_effect => FigureId::FigS2,
                (EligibilityDefinition, false, true) => FigureId::Fig3d,
                (_, true, true) => unreachable!("rejected by validate"),
            },
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FigureId {
    Fig1b,
    Fig1d,
    Fig2b,
    Fig2d,
    Fig3b,
    Fig3d,
    FigS1,
    FigS2,
    FigS3,
}

impl FigureId {
    pub const ALL: [FigureId; 9] = [
        FigureId::Fig1b,
        FigureId::Fig1d,
        FigureId::Fig2b,
        FigureId::Fig2d,
        FigureId::Fig3b,
        FigureId::Fig3d,
        FigureId::FigS1,
        FigureId::FigS2,
        FigureId::FigS3,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FigureId::Fig1b => "fig1b",
            FigureId::Fig1d => "fig1d",
            FigureId::Fig2b => "fig2b",
            FigureId::Fig2d => "fig2d",
            FigureId::Fig3b => "fig3b",
            FigureId::Fig3d => "fig3d",
            FigureId::FigS1 => "figS1",
            FigureId::FigS2 => "figS2",
            FigureId::FigS3 => "figS3",
        }
    }

    /// The design descriptor the figure depicts.
    pub fn spec(self) -> DesignSpec {
        use ImmortalCause::*;
        match self {
            FigureId::Fig1b => DesignSpec::new(ExposureDefinition),
            FigureId::Fig1d => DesignSpec::new(EligibilityDefinition),
            FigureId::Fig2b => DesignSpec::new(ExposureDefinition).excluding_immortal(),
            FigureId::Fig2d => DesignSpec::new(EligibilityDefinition).excluding_immortal(),
            FigureId::Fig3b => DesignSpec::new(ExposureDefinition).with_competing_risk(),
            FigureId::Fig3d => DesignSpec::new(EligibilityDefinition).with_competing_risk(),
            FigureId::FigS1 => DesignSpec::new(EligibilityDefinition).with_null_effect(),
            FigureId::FigS2 => DesignSpec::new(EligibilityDefinition)
                .with_competing_risk()
                .with_null_effect(),
            FigureId::FigS3 => DesignSpec::new(ExposureDefinition).with_ptdm(),
        }
    }
}

impl fmt::Display for FigureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FigureId {
    type Err = DesignError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FigureId::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| DesignError::UnknownFigure(s.to_string()))
    }
}

/// A built DAG together with the exposure and outcome nodes to query.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CausalScenario {
    pub dag: Dag,
    pub exposures: Vec<String>,
    pub outcome: String,
    pub figure_id: FigureId,
}

impl CausalScenario {
    pub fn classify(&self) -> Result<BiasStructure, DagError> {
        classify_bias(&self.dag, &self.exposures, &self.outcome, None)
    }
}

const BASE_EDGES: [(&str, &str); 8] = [
    ("E0", "E1"),
    ("E0", "D0+"),
    ("E1", "D1+"),
    ("D0+", "D1+"),
    ("D0+", "E1"),
    ("U0", "U1"),
    ("U0", "D0+"),
    ("U1", "D1+"),
];

const COMPETING_EDGES: [(&str, &str); 6] = [
    ("E0", "CR0+"),
    ("E1", "CR1+"),
    ("U0", "CR0+"),
    ("U1", "CR1+"),
    ("CR0+", "CR1+"),
    ("CR0+", "E1"),
];

fn is_effect_edge(from: &str, to: &str) -> bool {
    from.starts_with('E') && (to.starts_with('D') || to.starts_with("CR"))
}

pub fn build_design_dag(spec: &DesignSpec) -> Result<CausalScenario, DesignError> {
    let figure_id = spec.figure()?;
    let mut edges: Vec<(&str, &str)> = BASE_EDGES.to_vec();
    let mut boxed: Vec<&str> = Vec::new();

    if spec.competing_risk {
        edges.extend(COMPETING_EDGES);
    }
    if spec.immortal_cause == ImmortalCause::EligibilityDefinition {
        boxed.push("D0+");
        if spec.competing_risk {
            boxed.push("CR0+");
        }
    }
    match (spec.immortal_cause, spec.exclude_immortal, spec.matching) {
        (ImmortalCause::ExposureDefinition, true, _) => {
            edges.extend([("E0", "S"), ("E1", "S"), ("D0+", "S")]);
            boxed.push("S");
        }
        (ImmortalCause::EligibilityDefinition, true, _) => {
            edges.push(("D0+", "S"));
            boxed.push("S");
        }
        (_, false, Matching::PrescriptionTimeDistribution) => {
            edges.extend([("E0", "S"), ("E1", "S"), ("D0+", "S")]);
            boxed.extend(["D0+", "S"]);
        }
        _ => {}
    }
    if spec.null_effect {
        edges.retain(|(from, to)| !is_effect_edge(from, to));
    }

    Ok(CausalScenario {
        dag: Dag::from_labels(&edges, &boxed)?,
        exposures: vec!["E0".into(), "E1".into()],
        outcome: "D1+".into(),
        figure_id,
    })
}

/// The bias structure each design is expected to produce.
pub fn expected_structure(spec: &DesignSpec) -> Result<BiasKind, DesignError> {
    spec.validate()?;
    let selecting = spec.immortal_cause == ImmortalCause::EligibilityDefinition
        || spec.matching == Matching::PrescriptionTimeDistribution;
    Ok(match (selecting, spec.exclude_immortal) {
        (true, _) if spec.null_effect => BiasKind::None,
        (true, _) => BiasKind::Selection,
        (false, false) => BiasKind::Confounding,
        (false, true) => BiasKind::Composite,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClaimValue {
    Open,
    Blocked,
    /// A queried path does not exist in the graph.
    Absent,
    Class(PathClass),
    Kind(BiasKind),
    Count(usize),
}

impl fmt::Display for ClaimValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClaimValue::Open => f.write_str("Open"),
            ClaimValue::Blocked => f.write_str("Blocked"),
            ClaimValue::Absent => f.write_str("Absent"),
            ClaimValue::Class(c) => write!(f, "{c:?}"),
            ClaimValue::Kind(k) => write!(f, "{k}"),
            ClaimValue::Count(n) => write!(f, "{n}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Claim {
    pub description: String,
    pub expected: ClaimValue,
    pub observed: ClaimValue,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClaimReport {
    pub figure_id: FigureId,
    pub claims: Vec<Claim>,
}

impl ClaimReport {
    pub fn all_pass(&self) -> bool {
        self.claims.iter().all(|c| c.pass)
    }
}

/// Conditioning set for a check: the figure's boxes or an explicit list.
#[derive(Debug, Clone, Copy)]
enum Given {
    Boxed,
    Nodes(&'static [&'static str]),
}

#[derive(Debug, Clone, Copy)]
enum Check {
    /// Status of one specific path.
    Path(&'static [&'static str], Given),
    /// Structural class of one specific path.
    PathClass(&'static [&'static str]),
    /// Whether two node sets are d-connected (`Open`) or separated (`Blocked`).
    Connection(&'static [&'static str], &'static [&'static str], Given),
    /// Number of open paths of a class between two nodes.
    OpenOfClass(&'static str, &'static str, PathClass, Given),
    /// Exposure-outcome paths that are open only because `S` is conditioned.
    NewOpenViaS,
    Kind,
}

struct ClaimSpec {
    description: &'static str,
    check: Check,
    expected: ClaimValue,
}

const fn claim(description: &'static str, check: Check, expected: ClaimValue) -> ClaimSpec {
    ClaimSpec {
        description,
        check,
        expected,
    }
}

const NOTHING: Given = Given::Nodes(&[]);

fn claim_table(figure: FigureId) -> Vec<ClaimSpec> {
    use ClaimValue::*;
    match figure {
        FigureId::Fig1b => vec![
            claim(
                "D0+ is a common cause of E1 and D1+: [E1, D0+, D1+] is open",
                Check::Path(&["E1", "D0+", "D1+"], Given::Boxed),
                Open,
            ),
            claim(
                "[E1, D0+, D1+] is a confounding path",
                Check::PathClass(&["E1", "D0+", "D1+"]),
                Class(PathClass::ConfoundingPath),
            ),
            claim(
                "E1 and D1+ are d-connected",
                Check::Connection(&["E1"], &["D1+"], Given::Boxed),
                Open,
            ),
            claim(
                "structure is confounding by survival until exposure allocation",
                Check::Kind,
                Kind(BiasKind::Confounding),
            ),
        ],
        FigureId::Fig1d => vec![
            claim(
                "conditioning on D0+ closes [E1, D0+, D1+]",
                Check::Path(&["E1", "D0+", "D1+"], Given::Boxed),
                Blocked,
            ),
            claim(
                "conditioning on D0+ opens [E0, D0+, U0]",
                Check::Path(&["E0", "D0+", "U0"], Given::Boxed),
                Open,
            ),
            claim(
                "E0 and U0 are d-separated before conditioning",
                Check::Connection(&["E0"], &["U0"], NOTHING),
                Blocked,
            ),
            claim(
                "[E0, D0+, U0, U1, D1+] is open",
                Check::Path(&["E0", "D0+", "U0", "U1", "D1+"], Given::Boxed),
                Open,
            ),
            claim(
                "[E0, D0+, U0, U1, D1+] is opened by a collider",
                Check::PathClass(&["E0", "D0+", "U0", "U1", "D1+"]),
                Class(PathClass::ColliderOpened),
            ),
            claim(
                "structure is selection bias from selecting on survival until eligibility",
                Check::Kind,
                Kind(BiasKind::Selection),
            ),
        ],
        FigureId::Fig2b => vec![
            claim(
                "excluding immortal time leaves [E1, D0+, D1+] open",
                Check::Path(&["E1", "D0+", "D1+"], Given::Boxed),
                Open,
            ),
            claim(
                "conditioning on S opens [E0, S, D0+]",
                Check::Path(&["E0", "S", "D0+"], Given::Boxed),
                Open,
            ),
            claim(
                "[E0, S, D0+] is blocked when S is not conditioned",
                Check::Path(&["E0", "S", "D0+"], NOTHING),
                Blocked,
            ),
            claim(
                "structure is a composite of confounding and selection bias",
                Check::Kind,
                Kind(BiasKind::Composite),
            ),
        ],
        FigureId::Fig2d => vec![
            claim(
                "conditioning on D0+ closes [E1, D0+, D1+]",
                Check::Path(&["E1", "D0+", "D1+"], Given::Boxed),
                Blocked,
            ),
            claim(
                "conditioning on D0+ opens [E0, D0+, U0]",
                Check::Path(&["E0", "D0+", "U0"], Given::Boxed),
                Open,
            ),
            claim(
                "conditioning on S opens no new exposure-outcome path",
                Check::NewOpenViaS,
                Count(0),
            ),
            claim(
                "structure is selection bias from selecting on survival until eligibility",
                Check::Kind,
                Kind(BiasKind::Selection),
            ),
        ],
        FigureId::Fig3b => vec![
            claim(
                "[E1, D0+, D1+] is open",
                Check::Path(&["E1", "D0+", "D1+"], Given::Boxed),
                Open,
            ),
            claim(
                "[E1, CR0+, CR1+] is open",
                Check::Path(&["E1", "CR0+", "CR1+"], Given::Boxed),
                Open,
            ),
            claim(
                "U1 opens [D1+, U1, CR1+]",
                Check::Path(&["D1+", "U1", "CR1+"], Given::Boxed),
                Open,
            ),
            claim(
                "additional path [E1, CR0+, U0, U1, D1+] is open",
                Check::Path(&["E1", "CR0+", "U0", "U1", "D1+"], Given::Boxed),
                Open,
            ),
            claim(
                "structure is confounding by survival without the outcome until exposure allocation",
                Check::Kind,
                Kind(BiasKind::Confounding),
            ),
        ],
        FigureId::Fig3d => vec![
            claim(
                "boxes close [E1, D0+, D1+]",
                Check::Path(&["E1", "D0+", "D1+"], Given::Boxed),
                Blocked,
            ),
            claim(
                "boxes close [E1, CR0+, CR1+]",
                Check::Path(&["E1", "CR0+", "CR1+"], Given::Boxed),
                Blocked,
            ),
            claim(
                "[E0, D0+, U0] is open",
                Check::Path(&["E0", "D0+", "U0"], Given::Boxed),
                Open,
            ),
            claim(
                "[E0, CR0+, U0] is open",
                Check::Path(&["E0", "CR0+", "U0"], Given::Boxed),
                Open,
            ),
            claim(
                "exactly two collider-opened paths connect E0 and U0",
                Check::OpenOfClass("E0", "U0", PathClass::ColliderOpened, Given::Boxed),
                Count(2),
            ),
            claim(
                "structure is selection bias from selecting on survival without the outcome",
                Check::Kind,
                Kind(BiasKind::Selection),
            ),
        ],
        FigureId::FigS1 => vec![
            claim(
                "{E0, E1} are d-separated from D1+ given D0+",
                Check::Connection(&["E0", "E1"], &["D1+"], Given::Boxed),
                Blocked,
            ),
            claim(
                "D0+ is not a collider: E0 and U0 stay d-separated",
                Check::Connection(&["E0"], &["U0"], Given::Boxed),
                Blocked,
            ),
            claim("no bias structure", Check::Kind, Kind(BiasKind::None)),
        ],
        FigureId::FigS2 => vec![
            claim(
                "{E0, E1} are d-separated from D1+ given D0+ and CR0+",
                Check::Connection(&["E0", "E1"], &["D1+"], Given::Boxed),
                Blocked,
            ),
            claim(
                "neither D0+ nor CR0+ is a collider: E0 and U0 stay d-separated",
                Check::Connection(&["E0"], &["U0"], Given::Boxed),
                Blocked,
            ),
            claim("no bias structure", Check::Kind, Kind(BiasKind::None)),
        ],
        FigureId::FigS3 => vec![
            claim(
                "[E0, D0+, U0, U1, D1+] is open as in fig1d",
                Check::Path(&["E0", "D0+", "U0", "U1", "D1+"], Given::Boxed),
                Open,
            ),
            claim(
                "[E1, S, D0+, D1+] is blocked at D0+",
                Check::Path(&["E1", "S", "D0+", "D1+"], Given::Boxed),
                Blocked,
            ),
            claim(
                "conditioning on S opens no new exposure-outcome path",
                Check::NewOpenViaS,
                Count(0),
            ),
            claim(
                "structure is selection bias as in fig1d",
                Check::Kind,
                Kind(BiasKind::Selection),
            ),
        ],
    }
}

fn given_labels(scenario: &CausalScenario, given: Given) -> Vec<String> {
    match given {
        Given::Boxed => scenario.dag.conditioned().map(|v| v.label()).collect(),
        Given::Nodes(ns) => ns.iter().map(|s| s.to_string()).collect(),
    }
}

fn observe(scenario: &CausalScenario, check: Check) -> Result<ClaimValue, DagError> {
    let dag = &scenario.dag;
    let boxed = given_labels(scenario, Given::Boxed);
    Ok(match check {
        Check::Path(nodes, _) | Check::PathClass(nodes)
            if nodes.iter().any(|n| dag.find(n).is_none()) =>
        {
            ClaimValue::Absent
        }
        Check::Path(nodes, given) => {
            let zs = given_labels(scenario, given);
            let paths = open_paths(dag, nodes[0], nodes[nodes.len() - 1], &zs)?;
            match paths.iter().find(|p| p.matches(nodes)) {
                Some(p) if p.status == PathStatus::Open => ClaimValue::Open,
                Some(_) => ClaimValue::Blocked,
                None => ClaimValue::Absent,
            }
        }
        Check::PathClass(nodes) => {
            let paths = open_paths(dag, nodes[0], nodes[nodes.len() - 1], &boxed)?;
            match paths.iter().find(|p| p.matches(nodes)) {
                Some(p) => ClaimValue::Class(p.classification),
                None => ClaimValue::Absent,
            }
        }
        Check::Connection(xs, ys, given) => {
            let zs = given_labels(scenario, given);
            if is_d_separated(dag, &to_owned(xs), &to_owned(ys), &zs)? {
                ClaimValue::Blocked
            } else {
                ClaimValue::Open
            }
        }
        Check::OpenOfClass(x, y, class, given) => {
            let zs = given_labels(scenario, given);
            let n = open_paths(dag, x, y, &zs)?
                .iter()
                .filter(|p| p.is_open() && p.classification == class)
                .count();
            ClaimValue::Count(n)
        }
        Check::NewOpenViaS => {
            let without: Vec<String> = boxed.iter().filter(|l| *l != "S").cloned().collect();
            let with_s = exposure_paths(dag, &scenario.exposures, &scenario.outcome, &boxed)?;
            let without_s =
                exposure_paths(dag, &scenario.exposures, &scenario.outcome, &without)?;
            let n = with_s
                .iter()
                .zip(&without_s)
                .filter(|(a, b)| a.is_open() && !b.is_open())
                .count();
            ClaimValue::Count(n)
        }
        Check::Kind => ClaimValue::Kind(scenario.classify()?.kind),
    })
}

fn to_owned(labels: &[&str]) -> Vec<String> {
    labels.iter().map(|s| s.to_string()).collect()
}

/// Checks every recorded path claim for the figure a spec maps to. Failures
/// are reported in the result rather than returned as errors.
pub fn verify_claims(spec: &DesignSpec) -> Result<ClaimReport, DesignError> {
    let scenario = build_design_dag(spec)?;
    let claims = claim_table(scenario.figure_id)
        .into_iter()
        .map(|c| {
            let observed = observe(&scenario, c.check).unwrap_or(ClaimValue::Absent);
            Claim {
                description: c.description.to_string(),
                expected: c.expected,
                observed,
                pass: observed == c.expected,
            }
        })
        .collect();
    Ok(ClaimReport {
        figure_id: scenario.figure_id,
        claims,
    })
}

/// Every descriptor the library accepts.
pub fn all_valid_specs() -> Vec<DesignSpec> {
    let mut out = Vec::new();
    for cause in [
        ImmortalCause::ExposureDefinition,
        ImmortalCause::EligibilityDefinition,
    ] {
        for bits in 0..16u8 {
            let spec = DesignSpec {
                immortal_cause: cause,
                exclude_immortal: bits & 1 != 0,
                competing_risk: bits & 2 != 0,
                null_effect: bits & 4 != 0,
                matching: if bits & 8 != 0 {
                    Matching::PrescriptionTimeDistribution
                } else {
                    Matching::None
                },
            };
            if spec.validate().is_ok() {
                out.push(spec);
            }
        }
    }
    out
}
