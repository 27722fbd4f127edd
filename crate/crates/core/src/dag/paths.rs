use std::collections::BTreeSet;
use std::fmt;

use super::dsep::check_disjoint;
use super::{Dag, DagError, NodeIx, VariableId};

/// Upper bound on the number of simple paths [`open_paths`] will enumerate.
pub const MAX_SIMPLE_PATHS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PathStatus {
    Open,
    Blocked,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BlockReason {
    NonColliderConditioned,
    ColliderUnconditioned,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Blocker {
    pub node: VariableId,
    pub reason: BlockReason,
}

/// Structural shape of a path, independent of whether it is open.
///
/// * `Causal`: every edge points toward the terminal node.
/// * `ConfoundingPath`: non-causal and collider-free, so it leaves the start
///   node against an edge (a back-door path through a common cause).
/// * `ColliderOpened`: leaves the start node along an edge and contains at
///   least one collider.
/// * `Mixed`: a back-door path that also runs through a collider.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PathClass {
    Causal,
    ConfoundingPath,
    ColliderOpened,
    Mixed,
}

impl PathClass {
    fn confounding_like(self) -> bool {
        matches!(self, PathClass::ConfoundingPath | PathClass::Mixed)
    }

    fn selection_like(self) -> bool {
        matches!(self, PathClass::ColliderOpened | PathClass::Mixed)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotatedPath {
    pub nodes: Vec<VariableId>,
    pub status: PathStatus,
    pub blockers: Vec<Blocker>,
    pub classification: PathClass,
}

impl AnnotatedPath {
    pub fn is_open(&self) -> bool {
        self.status == PathStatus::Open
    }

    pub fn labels(&self) -> Vec<String> {
        self.nodes.iter().map(VariableId::label).collect()
    }

    /// True if the node labels equal `labels` in order.
    pub fn matches(&self, labels: &[&str]) -> bool {
        self.nodes.len() == labels.len()
            && self.nodes.iter().zip(labels).all(|(v, l)| v.label() == *l)
    }
}

impl fmt::Display for AnnotatedPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}]", self.labels().join(", "))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BiasKind {
    None,
    Confounding,
    Selection,
    Composite,
}

impl fmt::Display for BiasKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BiasKind::None => "None",
            BiasKind::Confounding => "Confounding",
            BiasKind::Selection => "Selection",
            BiasKind::Composite => "Composite",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BiasStructure {
    pub kind: BiasKind,
    pub witness_paths: Vec<AnnotatedPath>,
}

/// Every simple path between `x` and `y`, annotated against `zs`.
///
/// Sorted shortest first, then lexicographically by node labels.
pub fn open_paths<S: AsRef<str>>(
    dag: &Dag,
    x: &str,
    y: &str,
    zs: &[S],
) -> Result<Vec<AnnotatedPath>, DagError> {
    let x = dag.index_of(x)?;
    let y = dag.index_of(y)?;
    let zs = dag.indices_of(zs)?;
    check_disjoint(dag, &BTreeSet::from([x]), &BTreeSet::from([y]), &zs)?;
    let raw = simple_paths(dag, x, y, &BTreeSet::new())?;
    Ok(annotate_sorted(dag, raw, &zs))
}

/// Structure of bias between a set of exposure nodes and an outcome.
///
/// Only paths that touch the exposure set at their first node are considered,
/// so a path from `E1` that detours through `E0` is attributed to `E0`.
/// `zs` defaults to the DAG's conditioned set.
pub fn classify_bias<S: AsRef<str>>(
    dag: &Dag,
    exposures: &[S],
    outcome: &str,
    zs: Option<&[S]>,
) -> Result<BiasStructure, DagError> {
    let xs = dag.indices_of(exposures)?;
    let y = dag.index_of(outcome)?;
    let zs = match zs {
        Some(zs) => dag.indices_of(zs)?,
        None => dag.conditioned_indices().clone(),
    };
    let paths = exposure_paths_ix(dag, &xs, y, &zs)?;

    let open_non_causal = || {
        paths
            .iter()
            .filter(|p| p.is_open() && p.classification != PathClass::Causal)
    };
    let confounding = open_non_causal().find(|p| p.classification.confounding_like());
    let selection = open_non_causal().find(|p| p.classification.selection_like());

    let kind = match (confounding.is_some(), selection.is_some()) {
        (false, false) => BiasKind::None,
        (true, false) => BiasKind::Confounding,
        (false, true) => BiasKind::Selection,
        (true, true) => BiasKind::Composite,
    };
    let mut witness_paths: Vec<AnnotatedPath> = Vec::new();
    for p in [confounding, selection].into_iter().flatten() {
        if !witness_paths.contains(p) {
            witness_paths.push(p.clone());
        }
    }
    Ok(BiasStructure {
        kind,
        witness_paths,
    })
}

/// Annotated paths from any exposure to `outcome` that meet the exposure set
/// only at their first node, sorted as in [`open_paths`].
pub fn exposure_paths<S: AsRef<str>>(
    dag: &Dag,
    exposures: &[S],
    outcome: &str,
    zs: &[S],
) -> Result<Vec<AnnotatedPath>, DagError> {
    let xs = dag.indices_of(exposures)?;
    let y = dag.index_of(outcome)?;
    let zs = dag.indices_of(zs)?;
    exposure_paths_ix(dag, &xs, y, &zs)
}

fn exposure_paths_ix(
    dag: &Dag,
    xs: &BTreeSet<NodeIx>,
    y: NodeIx,
    zs: &BTreeSet<NodeIx>,
) -> Result<Vec<AnnotatedPath>, DagError> {
    check_disjoint(dag, xs, &BTreeSet::from([y]), zs)?;
    let mut raw = Vec::new();
    for &x in xs {
        let others: BTreeSet<NodeIx> = xs.iter().copied().filter(|&o| o != x).collect();
        raw.extend(simple_paths(dag, x, y, &others)?);
        if raw.len() > MAX_SIMPLE_PATHS {
            return Err(DagError::PathLimit(MAX_SIMPLE_PATHS));
        }
    }
    Ok(annotate_sorted(dag, raw, zs))
}

fn simple_paths(
    dag: &Dag,
    x: NodeIx,
    y: NodeIx,
    forbidden: &BTreeSet<NodeIx>,
) -> Result<Vec<Vec<NodeIx>>, DagError> {
    let neighbours: Vec<Vec<NodeIx>> = (0..dag.len())
        .map(|n| {
            let mut v: Vec<NodeIx> = dag
                .parents(n)
                .iter()
                .chain(dag.children(n))
                .copied()
                .filter(|m| !forbidden.contains(m))
                .collect();
            v.sort_unstable();
            v.dedup();
            v
        })
        .collect();

    let mut found = Vec::new();
    let mut on_path = vec![false; dag.len()];
    let mut path = vec![x];
    on_path[x] = true;
    // (node, index of next neighbour to try)
    let mut frames = vec![(x, 0usize)];
    while let Some(&mut (node, ref mut next)) = frames.last_mut() {
        let Some(&nb) = neighbours[node].get(*next) else {
            frames.pop();
            on_path[node] = false;
            path.pop();
            continue;
        };
        *next += 1;
        if on_path[nb] {
            continue;
        }
        if nb == y {
            let mut p = path.clone();
            p.push(y);
            found.push(p);
            if found.len() > MAX_SIMPLE_PATHS {
                return Err(DagError::PathLimit(MAX_SIMPLE_PATHS));
            }
            continue;
        }
        on_path[nb] = true;
        path.push(nb);
        frames.push((nb, 0));
    }
    Ok(found)
}

fn annotate_sorted(dag: &Dag, raw: Vec<Vec<NodeIx>>, zs: &BTreeSet<NodeIx>) -> Vec<AnnotatedPath> {
    let mut paths: Vec<AnnotatedPath> = raw.iter().map(|p| annotate(dag, p, zs)).collect();
    paths.sort_by(|a, b| {
        a.nodes
            .len()
            .cmp(&b.nodes.len())
            .then_with(|| a.labels().cmp(&b.labels()))
    });
    paths
}

fn points(dag: &Dag, from: NodeIx, to: NodeIx) -> bool {
    dag.children(from).contains(&to)
}

fn annotate(dag: &Dag, path: &[NodeIx], zs: &BTreeSet<NodeIx>) -> AnnotatedPath {
    let mut blockers = Vec::new();
    let mut has_collider = false;
    for w in path.windows(3) {
        let (prev, mid, next) = (w[0], w[1], w[2]);
        let collider = points(dag, prev, mid) && points(dag, next, mid);
        if collider {
            has_collider = true;
            let opened = dag
                .descendants_inclusive(mid)
                .iter()
                .any(|d| zs.contains(d));
            if !opened {
                blockers.push(Blocker {
                    node: dag.node(mid).clone(),
                    reason: BlockReason::ColliderUnconditioned,
                });
            }
        } else if zs.contains(&mid) {
            blockers.push(Blocker {
                node: dag.node(mid).clone(),
                reason: BlockReason::NonColliderConditioned,
            });
        }
    }

    let forward = path.windows(2).all(|w| points(dag, w[0], w[1]));
    let leaves_along_edge = points(dag, path[0], path[1]);
    let classification = if forward {
        PathClass::Causal
    } else if !has_collider {
        PathClass::ConfoundingPath
    } else if leaves_along_edge {
        PathClass::ColliderOpened
    } else {
        PathClass::Mixed
    };

    AnnotatedPath {
        nodes: path.iter().map(|&i| dag.node(i).clone()).collect(),
        status: if blockers.is_empty() {
            PathStatus::Open
        } else {
            PathStatus::Blocked
        },
        blockers,
        classification,
    }
}
