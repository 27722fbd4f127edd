use std::collections::BTreeSet;

use super::{Dag, DagError, NodeIx};

#[derive(Clone, Copy, PartialEq, Eq)]
enum Dir {
    /// Arrived from a child (travelling against an edge).
    Up,
    /// Arrived from a parent (travelling along an edge).
    Down,
}

/// Decides whether every path between `xs` and `ys` is blocked given `zs`.
///
/// Runs in time linear in the graph size: a ball is passed from `xs` along
/// active trail segments, and the sets are separated iff it never reaches
/// `ys`. A collider passes the ball when it or any descendant is in `zs`.
///
/// The three sets must be pairwise disjoint.
pub fn is_d_separated<S: AsRef<str>>(
    dag: &Dag,
    xs: &[S],
    ys: &[S],
    zs: &[S],
) -> Result<bool, DagError> {
    let xs = dag.indices_of(xs)?;
    let ys = dag.indices_of(ys)?;
    let zs = dag.indices_of(zs)?;
    d_separated_ix(dag, &xs, &ys, &zs)
}

pub(crate) fn check_disjoint(
    dag: &Dag,
    xs: &BTreeSet<NodeIx>,
    ys: &BTreeSet<NodeIx>,
    zs: &BTreeSet<NodeIx>,
) -> Result<(), DagError> {
    let clash = xs
        .intersection(ys)
        .chain(xs.intersection(zs))
        .chain(ys.intersection(zs))
        .next();
    match clash {
        Some(&ix) => Err(DagError::Overlap(dag.node(ix).label())),
        None => Ok(()),
    }
}

pub(crate) fn d_separated_ix(
    dag: &Dag,
    xs: &BTreeSet<NodeIx>,
    ys: &BTreeSet<NodeIx>,
    zs: &BTreeSet<NodeIx>,
) -> Result<bool, DagError> {
    check_disjoint(dag, xs, ys, zs)?;
    let reachable = reachable_from(dag, xs, zs);
    Ok(ys.iter().all(|y| !reachable.contains(y)))
}

/// Nodes connected to some member of `xs` by an active trail given `zs`.
fn reachable_from(dag: &Dag, xs: &BTreeSet<NodeIx>, zs: &BTreeSet<NodeIx>) -> BTreeSet<NodeIx> {
    let opens_colliders = dag.ancestors_inclusive(zs);
    let n = dag.len();
    let mut visited_up = vec![false; n];
    let mut visited_down = vec![false; n];
    let mut reached = BTreeSet::new();
    let mut queue: Vec<(NodeIx, Dir)> = xs.iter().map(|&x| (x, Dir::Up)).collect();

    while let Some((node, dir)) = queue.pop() {
        let seen = match dir {
            Dir::Up => &mut visited_up[node],
            Dir::Down => &mut visited_down[node],
        };
        if *seen {
            continue;
        }
        *seen = true;

        let conditioned = zs.contains(&node);
        if !conditioned {
            reached.insert(node);
        }
        match dir {
            Dir::Up if !conditioned => {
                queue.extend(dag.parents(node).iter().map(|&p| (p, Dir::Up)));
                queue.extend(dag.children(node).iter().map(|&c| (c, Dir::Down)));
            }
            Dir::Up => {}
            Dir::Down => {
                if !conditioned {
                    queue.extend(dag.children(node).iter().map(|&c| (c, Dir::Down)));
                }
                if opens_colliders.contains(&node) {
                    queue.extend(dag.parents(node).iter().map(|&p| (p, Dir::Up)));
                }
            }
        }
    }
    reached
}
