//! Line-oriented DAG source format.
//!
//! ```text
//! # comment
//! [D0+]          boxed (conditioned) node
//! E0 -> E1       edge; endpoints are declared implicitly
//! U0             isolated node
//! ```

use std::collections::BTreeSet;

use super::{is_valid_label, Dag, DagError, VariableId};

pub fn parse_dag(text: &str) -> Result<Dag, DagError> {
    let mut declared: BTreeSet<VariableId> = BTreeSet::new();
    let mut boxed: BTreeSet<VariableId> = BTreeSet::new();
    let mut nodes: BTreeSet<VariableId> = BTreeSet::new();
    let mut edges = Vec::new();

    for (line_no, raw) in text.lines().enumerate() {
        let mut cursor = Cursor::new(raw, line_no + 1);
        cursor.skip_ws();
        if cursor.at_end() || cursor.peek() == Some('#') {
            continue;
        }
        match cursor.line_kind()? {
            Line::Boxed(v) => {
                if !boxed.insert(v.clone()) {
                    return Err(DagError::DuplicateNode(v.label()));
                }
                nodes.insert(v);
            }
            Line::Bare(v) => {
                if !declared.insert(v.clone()) {
                    return Err(DagError::DuplicateNode(v.label()));
                }
                nodes.insert(v);
            }
            Line::Edge(from, to) => {
                nodes.insert(from.clone());
                nodes.insert(to.clone());
                edges.push((from, to));
            }
        }
    }
    Dag::new(nodes, edges, boxed)
}

/// Emits source text that [`parse_dag`] maps back to an equal DAG.
pub fn render_dag(dag: &Dag) -> String {
    let mut out = String::new();
    for v in dag.conditioned() {
        out.push_str(&format!("[{v}]\n"));
    }
    for (ix, v) in dag.nodes().iter().enumerate() {
        let isolated = dag.parents(ix).is_empty() && dag.children(ix).is_empty();
        if isolated && !dag.conditioned_indices().contains(&ix) {
            out.push_str(&format!("{v}\n"));
        }
    }
    for (from, to) in dag.edges() {
        out.push_str(&format!("{from} -> {to}\n"));
    }
    out
}

enum Line {
    Boxed(VariableId),
    Bare(VariableId),
    Edge(VariableId, VariableId),
}

struct Cursor {
    chars: Vec<char>,
    pos: usize,
    line: usize,
}

impl Cursor {
    fn new(src: &str, line: usize) -> Self {
        Self {
            chars: src.chars().collect(),
            pos: 0,
            line,
        }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn at_end(&self) -> bool {
        self.pos >= self.chars.len()
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(char::is_whitespace) {
            self.pos += 1;
        }
    }

    fn error(&self, message: impl Into<String>) -> DagError {
        DagError::Syntax {
            line: self.line,
            column: self.pos + 1,
            message: message.into(),
        }
    }

    fn expect(&mut self, c: char) -> Result<(), DagError> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(format!("expected `{c}`")))
        }
    }

    fn label(&mut self) -> Result<VariableId, DagError> {
        let start = self.pos;
        while self
            .peek()
            .is_some_and(|c| c.is_ascii_alphanumeric() || c == '+')
        {
            self.pos += 1;
        }
        let label: String = self.chars[start..self.pos].iter().collect();
        if !is_valid_label(&label) {
            self.pos = start;
            return Err(self.error("expected a node label"));
        }
        VariableId::parse(&label)
    }

    fn finish(&mut self) -> Result<(), DagError> {
        self.skip_ws();
        if self.at_end() {
            Ok(())
        } else {
            Err(self.error("unexpected trailing input"))
        }
    }

    fn line_kind(&mut self) -> Result<Line, DagError> {
        if self.peek() == Some('[') {
            self.pos += 1;
            self.skip_ws();
            let v = self.label()?;
            self.skip_ws();
            self.expect(']')?;
            self.finish()?;
            return Ok(Line::Boxed(v));
        }
        let from = self.label()?;
        self.skip_ws();
        if self.at_end() {
            return Ok(Line::Bare(from));
        }
        self.expect('-')?;
        self.expect('>')?;
        self.skip_ws();
        let to = self.label()?;
        self.finish()?;
        Ok(Line::Edge(from, to))
    }
}
