//! Line-delimited graph text format:
//!
//! ```text
//! N<TAB>id<TAB>label<TAB>{attrs}
//! E<TAB>idA<TAB>idB<TAB>label<TAB>weight<TAB>{attrs}
//! ```
//!
//! Attributes are JSON objects with sorted keys. Empty lines are ignored.

use std::io::{self, BufRead, Write};

use super::{Attributes, Edge, GraphError, Node, NodeId, PropertyGraph};

pub fn write_graph<W: Write>(graph: &PropertyGraph, out: &mut W) -> io::Result<()> {
    for node in graph.nodes() {
        write_node_line(node, out)?;
    }
    for edge in graph.edges() {
        write_edge_line(edge, out)?;
    }
    Ok(())
}

pub(crate) fn write_node_line<W: Write>(node: &Node, out: &mut W) -> io::Result<()> {
    writeln!(
        out,
        "N\t{}\t{}\t{}",
        node.id,
        node.label,
        attrs_json(&node.attributes)
    )
}

pub(crate) fn write_edge_line<W: Write>(edge: &Edge, out: &mut W) -> io::Result<()> {
    writeln!(
        out,
        "E\t{}\t{}\t{}\t{}\t{}",
        edge.a,
        edge.b,
        edge.label,
        edge.weight,
        attrs_json(&edge.attributes)
    )
}

fn attrs_json(attrs: &Attributes) -> String {
    serde_json::to_string(attrs).expect("attribute maps serialize")
}

pub(crate) enum Record {
    Node(Node),
    Edge(Edge),
}

pub(crate) fn parse_record(line: &str, line_no: usize) -> Result<Record, GraphError> {
    let err = |message: String| GraphError::Format {
        line: line_no,
        message,
    };
    let fields: Vec<&str> = line.split('\t').collect();
    let attrs = |text: &str| -> Result<Attributes, GraphError> {
        serde_json::from_str(text).map_err(|e| err(format!("bad attributes: {e}")))
    };
    let id = |text: &str| -> Result<NodeId, GraphError> {
        text.parse()
            .map_err(|_| err(format!("bad node id {text:?}")))
    };
    match fields.as_slice() {
        ["N", nid, label, a] => Ok(Record::Node(Node {
            id: id(nid)?,
            label: label.to_string(),
            attributes: attrs(a)?,
        })),
        ["E", x, y, label, w, a] => {
            let weight: f64 = w.parse().map_err(|_| err(format!("bad weight {w:?}")))?;
            let mut edge = Edge::new(id(x)?, id(y)?, *label, weight);
            edge.attributes = attrs(a)?;
            Ok(Record::Edge(edge))
        }
        _ => Err(err(format!(
            "expected N (4 fields) or E (6 fields) record, got {} fields",
            fields.len()
        ))),
    }
}

/// Assembles a graph from records; edges are added after all nodes.
pub(crate) fn assemble(
    records: impl IntoIterator<Item = (usize, Record)>,
) -> Result<PropertyGraph, GraphError> {
    let mut graph = PropertyGraph::new();
    let mut edges = Vec::new();
    for (line, record) in records {
        match record {
            Record::Node(n) => graph.add_node(n).map_err(|e| GraphError::Format {
                line,
                message: e.to_string(),
            })?,
            Record::Edge(e) => edges.push((line, e)),
        }
    }
    for (line, edge) in edges {
        graph.add_edge(edge).map_err(|e| GraphError::Format {
            line,
            message: e.to_string(),
        })?;
    }
    Ok(graph)
}

pub fn read_graph<R: BufRead>(input: R) -> Result<PropertyGraph, GraphError> {
    let mut records = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| GraphError::Format {
            line: i + 1,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        records.push((i + 1, parse_record(&line, i + 1)?));
    }
    assemble(records)
}
