use super::Dag;

/// Graphviz DOT rendering. Nodes in label order, conditioned nodes boxed,
/// then edges in label order.
pub fn to_dot(dag: &Dag) -> String {
    let mut out = String::from("digraph G {\n");
    for (ix, v) in dag.nodes().iter().enumerate() {
        if dag.conditioned_indices().contains(&ix) {
            out.push_str(&format!("  \"{v}\" [shape=box];\n"));
        } else {
            out.push_str(&format!("  \"{v}\";\n"));
        }
    }
    for (from, to) in dag.edges() {
        out.push_str(&format!("  \"{from}\" -> \"{to}\";\n"));
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dag::parse_dag;

    #[test]
    fn empty_graph() {
        assert_eq!(to_dot(&parse_dag("").unwrap()), "digraph G {\n}\n");
    }

    #[test]
    fn edges_and_boxes() {
        let dot = to_dot(&parse_dag("[D0+]\nE0 -> E1\nE0 -> D0+").unwrap());
        assert!(dot.contains("\"E0\" -> \"E1\";"));
        assert!(dot.contains("\"D0+\" [shape=box];"));
        let d0 = dot.find("\"D0+\" [").unwrap();
        let e0 = dot.find("\"E0\";").unwrap();
        assert!(d0 < e0);
    }
}
