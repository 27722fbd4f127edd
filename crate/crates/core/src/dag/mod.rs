//! Time-varying causal DAGs with a conditioning ("boxed") set.
//!
//! Nodes are [`VariableId`]s such as `E0`, `D0+` or `S`. The conditioned set
//! holds the variables a study design restricts on. [`is_d_separated`] decides
//! path blocking with a reachability sweep; [`open_paths`] enumerates and
//! annotates every simple path between two nodes.

mod dot;
mod dsep;
mod paths;
mod text;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

pub use dot::to_dot;
pub use dsep::is_d_separated;
pub use paths::{
    classify_bias, exposure_paths, open_paths, AnnotatedPath, BiasKind, BiasStructure, BlockReason, Blocker,
    PathClass, PathStatus, MAX_SIMPLE_PATHS,
};
pub use text::{parse_dag, render_dag};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DagError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("duplicate node `{0}`")]
    DuplicateNode(String),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("cycle detected: {}", .0.join(" -> "))]
    Cycle(Vec<String>),
    #[error("path enumeration aborted after {0} simple paths")]
    PathLimit(usize),
    #[error("node `{0}` appears in more than one of the query sets")]
    Overlap(String),
    #[error("invalid node label `{0}`")]
    InvalidLabel(String),
}

/// A variable at a point in time: a symbol plus a time suffix.
///
/// Renders as the name immediately followed by the tag (`D` + `0+` = `D0+`).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct VariableId {
    name: String,
    time_tag: String,
}

impl VariableId {
    pub fn new(name: impl Into<String>, time_tag: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            time_tag: time_tag.into(),
        }
    }

    /// Splits a label into its leading alphabetic symbol and the remaining tag.
    pub fn parse(label: &str) -> Result<Self, DagError> {
        if !is_valid_label(label) {
            return Err(DagError::InvalidLabel(label.to_string()));
        }
        let split = label
            .find(|c: char| !c.is_ascii_alphabetic())
            .unwrap_or(label.len());
        Ok(Self::new(&label[..split], &label[split..]))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn time_tag(&self) -> &str {
        &self.time_tag
    }

    pub fn label(&self) -> String {
        format!("{}{}", self.name, self.time_tag)
    }
}

impl fmt::Display for VariableId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.name, self.time_tag)
    }
}

impl Ord for VariableId {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        let lhs = self.name.chars().chain(self.time_tag.chars());
        let rhs = other.name.chars().chain(other.time_tag.chars());
        lhs.cmp(rhs).then_with(|| self.name.cmp(&other.name))
    }
}

impl PartialOrd for VariableId {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

pub(crate) fn is_valid_label(label: &str) -> bool {
    let mut chars = label.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '+')
}

/// Node index into a [`Dag`]. Indices follow label order.
pub type NodeIx = usize;

/// An acyclic directed graph over [`VariableId`]s with a conditioned subset.
///
/// Nodes are stored in label order so that two DAGs with the same node, edge
/// and conditioned sets compare equal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dag {
    nodes: Vec<VariableId>,
    index: BTreeMap<VariableId, NodeIx>,
    parents: Vec<Vec<NodeIx>>,
    children: Vec<Vec<NodeIx>>,
    conditioned: BTreeSet<NodeIx>,
}

impl Dag {
    /// Validates and builds a DAG. Edge endpoints and conditioned nodes must be
    /// declared in `nodes`.
    pub fn new<N, E, C>(nodes: N, edges: E, conditioned: C) -> Result<Self, DagError>
    where
        N: IntoIterator<Item = VariableId>,
        E: IntoIterator<Item = (VariableId, VariableId)>,
        C: IntoIterator<Item = VariableId>,
    {
        let mut node_set = BTreeSet::new();
        for node in nodes {
            let label = node.label();
            if !node_set.insert(node) {
                return Err(DagError::DuplicateNode(label));
            }
        }
        let nodes: Vec<VariableId> = node_set.into_iter().collect();
        let index: BTreeMap<VariableId, NodeIx> = nodes
            .iter()
            .enumerate()
            .map(|(i, v)| (v.clone(), i))
            .collect();
        let lookup = |v: &VariableId| {
            index
                .get(v)
                .copied()
                .ok_or_else(|| DagError::UnknownNode(v.label()))
        };

        let mut edge_set = BTreeSet::new();
        for (from, to) in edges {
            edge_set.insert((lookup(&from)?, lookup(&to)?));
        }
        let mut parents = vec![Vec::new(); nodes.len()];
        let mut children = vec![Vec::new(); nodes.len()];
        for &(from, to) in &edge_set {
            children[from].push(to);
            parents[to].push(from);
        }
        let conditioned = conditioned
            .into_iter()
            .map(|v| lookup(&v))
            .collect::<Result<BTreeSet<_>, _>>()?;

        let dag = Self {
            nodes,
            index,
            parents,
            children,
            conditioned,
        };
        if let Some(cycle) = dag.find_cycle() {
            return Err(DagError::Cycle(
                cycle.iter().map(|&i| dag.nodes[i].label()).collect(),
            ));
        }
        Ok(dag)
    }

    /// Builds a DAG from edge labels, declaring every endpoint implicitly.
    pub fn from_labels(edges: &[(&str, &str)], conditioned: &[&str]) -> Result<Self, DagError> {
        let mut nodes = BTreeSet::new();
        let mut parsed = Vec::with_capacity(edges.len());
        for (from, to) in edges {
            let from = VariableId::parse(from)?;
            let to = VariableId::parse(to)?;
            nodes.insert(from.clone());
            nodes.insert(to.clone());
            parsed.push((from, to));
        }
        let conditioned = conditioned
            .iter()
            .map(|l| VariableId::parse(l))
            .collect::<Result<Vec<_>, _>>()?;
        nodes.extend(conditioned.iter().cloned());
        Self::new(nodes, parsed, conditioned)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[VariableId] {
        &self.nodes
    }

    pub fn node(&self, ix: NodeIx) -> &VariableId {
        &self.nodes[ix]
    }

    /// Edges as index pairs, sorted.
    pub fn edge_indices(&self) -> impl Iterator<Item = (NodeIx, NodeIx)> + '_ {
        self.children
            .iter()
            .enumerate()
            .flat_map(|(from, cs)| cs.iter().map(move |&to| (from, to)))
    }

    pub fn edges(&self) -> impl Iterator<Item = (&VariableId, &VariableId)> + '_ {
        self.edge_indices()
            .map(|(from, to)| (&self.nodes[from], &self.nodes[to]))
    }

    pub fn edge_count(&self) -> usize {
        self.children.iter().map(Vec::len).sum()
    }

    pub fn has_edge(&self, from: &str, to: &str) -> bool {
        match (self.find(from), self.find(to)) {
            (Some(f), Some(t)) => self.children[f].contains(&t),
            _ => false,
        }
    }

    pub fn conditioned(&self) -> impl Iterator<Item = &VariableId> + '_ {
        self.conditioned.iter().map(|&i| &self.nodes[i])
    }

    pub fn conditioned_indices(&self) -> &BTreeSet<NodeIx> {
        &self.conditioned
    }

    pub fn parents(&self, ix: NodeIx) -> &[NodeIx] {
        &self.parents[ix]
    }

    pub fn children(&self, ix: NodeIx) -> &[NodeIx] {
        &self.children[ix]
    }

    /// Looks a node up by its rendered label.
    pub fn find(&self, label: &str) -> Option<NodeIx> {
        VariableId::parse(label)
            .ok()
            .and_then(|v| self.index.get(&v).copied())
    }

    pub fn index_of(&self, label: &str) -> Result<NodeIx, DagError> {
        self.find(label)
            .ok_or_else(|| DagError::UnknownNode(label.to_string()))
    }

    pub fn indices_of<S: AsRef<str>>(&self, labels: &[S]) -> Result<BTreeSet<NodeIx>, DagError> {
        labels.iter().map(|l| self.index_of(l.as_ref())).collect()
    }

    /// Returns a copy with a different conditioned set.
    pub fn with_conditioned(&self, conditioned: BTreeSet<NodeIx>) -> Self {
        Self {
            conditioned,
            ..self.clone()
        }
    }

    /// `ix` together with all of its descendants.
    pub fn descendants_inclusive(&self, ix: NodeIx) -> BTreeSet<NodeIx> {
        let mut seen = BTreeSet::from([ix]);
        let mut stack = vec![ix];
        while let Some(n) = stack.pop() {
            for &c in &self.children[n] {
                if seen.insert(c) {
                    stack.push(c);
                }
            }
        }
        seen
    }

    /// Every node in `set` together with all of their ancestors.
    pub fn ancestors_inclusive(&self, set: &BTreeSet<NodeIx>) -> BTreeSet<NodeIx> {
        let mut seen = set.clone();
        let mut stack: Vec<NodeIx> = set.iter().copied().collect();
        while let Some(n) = stack.pop() {
            for &p in &self.parents[n] {
                if seen.insert(p) {
                    stack.push(p);
                }
            }
        }
        seen
    }

    fn find_cycle(&self) -> Option<Vec<NodeIx>> {
        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            New,
            Active,
            Done,
        }
        let n = self.nodes.len();
        let mut mark = vec![Mark::New; n];
        let mut stack: Vec<NodeIx> = Vec::new();

        for root in 0..n {
            if mark[root] != Mark::New {
                continue;
            }
            // (node, next child position)
            let mut frames = vec![(root, 0usize)];
            mark[root] = Mark::Active;
            stack.push(root);
            while let Some(&mut (node, ref mut pos)) = frames.last_mut() {
                if let Some(&child) = self.children[node].get(*pos) {
                    *pos += 1;
                    match mark[child] {
                        Mark::Active => {
                            let start = stack.iter().position(|&s| s == child).unwrap();
                            let mut cycle = stack[start..].to_vec();
                            cycle.push(child);
                            return Some(cycle);
                        }
                        Mark::New => {
                            mark[child] = Mark::Active;
                            stack.push(child);
                            frames.push((child, 0));
                        }
                        Mark::Done => {}
                    }
                } else {
                    mark[node] = Mark::Done;
                    stack.pop();
                    frames.pop();
                }
            }
        }
        None
    }
}
