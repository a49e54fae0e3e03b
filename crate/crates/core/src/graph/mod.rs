//! Attributed, weighted, undirected multigraph of building components.

pub(crate) mod io;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use io::{read_graph, write_graph};

pub const LABEL_CELL: &str = "CELL";
pub const LABEL_SENSOR: &str = "SENSOR";
pub const LABEL_OCCUPANT: &str = "OCCUPANT";

pub const EDGE_ADJACENT: &str = "ADJACENT";
pub const EDGE_AT: &str = "AT";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("duplicate node {0}")]
    DuplicateNode(NodeId),
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("self-loop on {0} is not allowed")]
    SelfLoop(NodeId),
    #[error("edge weight must be positive and finite, got {0}")]
    InvalidWeight(f64),
    #[error("invalid label {0:?}")]
    InvalidLabel(String),
    #[error("invalid node id {0:?}")]
    InvalidNodeId(String),
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
}

/// Stable node identity. IFC-derived nodes carry their entity id, synthetic
/// nodes carry a namespace and local key. Ordering is by namespace
/// (IFC, cell, sensor, occupant) and then numerically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NodeId {
    Ifc(u64),
    Cell { space: u64, row: u32, col: u32 },
    Sensor(u64),
    Occupant(u64),
}

impl NodeId {
    /// Category label implied by the namespace, for synthetic nodes.
    pub fn synthetic_label(&self) -> Option<&'static str> {
        match self {
            NodeId::Ifc(_) => None,
            NodeId::Cell { .. } => Some(LABEL_CELL),
            NodeId::Sensor(_) => Some(LABEL_SENSOR),
            NodeId::Occupant(_) => Some(LABEL_OCCUPANT),
        }
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeId::Ifc(id) => write!(f, "ifc:{id}"),
            NodeId::Cell { space, row, col } => write!(f, "cell:{space}:{row}:{col}"),
            NodeId::Sensor(id) => write!(f, "sensor:{id}"),
            NodeId::Occupant(id) => write!(f, "occupant:{id}"),
        }
    }
}

impl FromStr for NodeId {
    type Err = GraphError;

    /// Accepts the `Display` form; a bare integer is read as an IFC entity id.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || GraphError::InvalidNodeId(s.to_string());
        let s = s.trim();
        if let Ok(id) = s.parse::<u64>() {
            return Ok(NodeId::Ifc(id));
        }
        let mut parts = s.split(':');
        let ns = parts.next().ok_or_else(bad)?;
        let nums: Vec<u64> = parts
            .map(|p| p.parse::<u64>().map_err(|_| bad()))
            .collect::<Result<_, _>>()?;
        let small = |v: u64| u32::try_from(v).map_err(|_| bad());
        match (ns, nums.as_slice()) {
            ("ifc", [id]) => Ok(NodeId::Ifc(*id)),
            ("cell", [space, row, col]) => Ok(NodeId::Cell {
                space: *space,
                row: small(*row)?,
                col: small(*col)?,
            }),
            ("sensor", [id]) => Ok(NodeId::Sensor(*id)),
            ("occupant", [id]) => Ok(NodeId::Occupant(*id)),
            _ => Err(bad()),
        }
    }
}

/// Attribute value on a node or edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AttrValue {
    Bool(bool),
    Int(i64),
    Real(f64),
    Text(String),
    Vector(Vec<f64>),
}

impl From<bool> for AttrValue {
    fn from(v: bool) -> Self {
        AttrValue::Bool(v)
    }
}

impl From<i64> for AttrValue {
    fn from(v: i64) -> Self {
        AttrValue::Int(v)
    }
}

impl From<f64> for AttrValue {
    fn from(v: f64) -> Self {
        AttrValue::Real(v)
    }
}

impl From<&str> for AttrValue {
    fn from(v: &str) -> Self {
        AttrValue::Text(v.to_string())
    }
}

impl From<String> for AttrValue {
    fn from(v: String) -> Self {
        AttrValue::Text(v)
    }
}

pub type Attributes = BTreeMap<String, AttrValue>;

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: NodeId,
    pub label: String,
    pub attributes: Attributes,
}

impl Node {
    pub fn new(id: NodeId, label: impl Into<String>) -> Self {
        Node {
            id,
            label: label.into(),
            attributes: Attributes::new(),
        }
    }

    pub fn with_attr(mut self, key: impl Into<String>, value: impl Into<AttrValue>) -> Self {
        self.attributes.insert(key.into(), value.into());
        self
    }
}

/// Undirected edge; endpoints are stored with `a < b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub a: NodeId,
    pub b: NodeId,
    pub label: String,
    pub weight: f64,
    pub attributes: Attributes,
}

impl Edge {
    pub fn new(x: NodeId, y: NodeId, label: impl Into<String>, weight: f64) -> Self {
        let (a, b) = if x <= y { (x, y) } else { (y, x) };
        Edge {
            a,
            b,
            label: label.into(),
            weight,
            attributes: Attributes::new(),
        }
    }

    pub fn other(&self, id: NodeId) -> NodeId {
        if self.a == id {
            self.b
        } else {
            self.a
        }
    }

    /// Identity ignoring weight and attributes.
    pub fn key(&self) -> (NodeId, NodeId, &str) {
        (self.a, self.b, self.label.as_str())
    }
}

fn valid_label(label: &str) -> bool {
    !label.is_empty() && !label.chars().any(|c| c.is_whitespace() || c.is_control())
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PropertyGraph {
    nodes: BTreeMap<NodeId, Node>,
    edges: Vec<Edge>,
    incidence: BTreeMap<NodeId, Vec<usize>>,
}

impl PropertyGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_node(&mut self, node: Node) -> Result<(), GraphError> {
        if !valid_label(&node.label) {
            return Err(GraphError::InvalidLabel(node.label));
        }
        if self.nodes.contains_key(&node.id) {
            return Err(GraphError::DuplicateNode(node.id));
        }
        self.incidence.insert(node.id, Vec::new());
        self.nodes.insert(node.id, node);
        Ok(())
    }

    pub fn add_edge(&mut self, edge: Edge) -> Result<usize, GraphError> {
        if edge.a == edge.b {
            return Err(GraphError::SelfLoop(edge.a));
        }
        if !(edge.weight.is_finite() && edge.weight > 0.0) {
            return Err(GraphError::InvalidWeight(edge.weight));
        }
        if !valid_label(&edge.label) {
            return Err(GraphError::InvalidLabel(edge.label));
        }
        for end in [edge.a, edge.b] {
            if !self.nodes.contains_key(&end) {
                return Err(GraphError::UnknownNode(end));
            }
        }
        let idx = self.edges.len();
        self.incidence.get_mut(&edge.a).unwrap().push(idx);
        self.incidence.get_mut(&edge.b).unwrap().push(idx);
        self.edges.push(edge);
        Ok(idx)
    }

    /// Adds an unattributed edge.
    pub fn connect(
        &mut self,
        x: NodeId,
        y: NodeId,
        label: &str,
        weight: f64,
    ) -> Result<usize, GraphError> {
        self.add_edge(Edge::new(x, y, label, weight))
    }

    pub fn node(&self, id: &NodeId) -> Option<&Node> {
        self.nodes.get(id)
    }

    pub fn node_mut(&mut self, id: &NodeId) -> Option<&mut Node> {
        self.nodes.get_mut(id)
    }

    pub fn contains_node(&self, id: &NodeId) -> bool {
        self.nodes.contains_key(id)
    }

    /// Nodes in ascending id order.
    pub fn nodes(&self) -> impl Iterator<Item = &Node> {
        self.nodes.values()
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes.keys().copied()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn incident_edges(&self, id: &NodeId) -> &[usize] {
        self.incidence.get(id).map_or(&[], Vec::as_slice)
    }

    pub fn has_edge(&self, x: NodeId, y: NodeId, label: &str) -> bool {
        let (a, b) = if x <= y { (x, y) } else { (y, x) };
        self.incident_edges(&a)
            .iter()
            .any(|&i| self.edges[i].key() == (a, b, label))
    }

    /// Distinct neighbors in ascending id order; parallel edges contribute
    /// the sum of their weights.
    pub fn neighbors(&self, id: &NodeId) -> Vec<(NodeId, f64)> {
        let mut merged: BTreeMap<NodeId, f64> = BTreeMap::new();
        for &i in self.incident_edges(id) {
            let e = &self.edges[i];
            *merged.entry(e.other(*id)).or_insert(0.0) += e.weight;
        }
        merged.into_iter().collect()
    }

    pub fn labels(&self) -> BTreeSet<&str> {
        self.nodes.values().map(|n| n.label.as_str()).collect()
    }

    /// Induced subgraph on nodes whose label is in `labels`.
    pub fn subgraph<S: AsRef<str>>(&self, labels: &[S]) -> PropertyGraph {
        let keep: BTreeSet<&str> = labels.iter().map(AsRef::as_ref).collect();
        let mut out = PropertyGraph::new();
        for node in self
            .nodes
            .values()
            .filter(|n| keep.contains(n.label.as_str()))
        {
            out.add_node(node.clone()).expect("unique ids");
        }
        for edge in &self.edges {
            if out.contains_node(&edge.a) && out.contains_node(&edge.b) {
                out.add_edge(edge.clone()).expect("valid edge");
            }
        }
        out
    }

    /// Rebuilds the incidence index from the edge list and compares.
    pub fn check_incidence(&self) -> bool {
        let mut rebuilt: BTreeMap<NodeId, Vec<usize>> =
            self.nodes.keys().map(|&k| (k, Vec::new())).collect();
        for (i, e) in self.edges.iter().enumerate() {
            match (rebuilt.get_mut(&e.a), e.a != e.b) {
                (Some(list), true) => list.push(i),
                _ => return false,
            }
            match rebuilt.get_mut(&e.b) {
                Some(list) => list.push(i),
                None => return false,
            }
        }
        rebuilt == self.incidence
    }

    /// Serialized text with edges in canonical sorted order, for comparing
    /// graphs independently of edge insertion order.
    pub fn canonical_text(&self) -> String {
        let mut sorted = self.clone();
        sorted
            .edges
            .sort_by(|x, y| x.key().cmp(&y.key()).then(x.weight.total_cmp(&y.weight)));
        let mut out = Vec::new();
        write_graph(&sorted, &mut out).expect("in-memory write");
        String::from_utf8(out).expect("utf-8")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triangle() -> PropertyGraph {
        let mut g = PropertyGraph::new();
        g.add_node(Node::new(NodeId::Ifc(1), "A")).unwrap();
        g.add_node(Node::new(NodeId::Ifc(2), "A")).unwrap();
        g.add_node(Node::new(NodeId::Ifc(3), "B")).unwrap();
        g.connect(NodeId::Ifc(1), NodeId::Ifc(2), "R", 1.0).unwrap();
        g.connect(NodeId::Ifc(2), NodeId::Ifc(3), "R", 1.0).unwrap();
        g.connect(NodeId::Ifc(3), NodeId::Ifc(1), "R", 1.0).unwrap();
        g
    }

    #[test]
    fn node_id_text_round_trip() {
        for id in [
            NodeId::Ifc(6),
            NodeId::Cell {
                space: 5,
                row: 0,
                col: 2,
            },
            NodeId::Sensor(3),
            NodeId::Occupant(9),
        ] {
            assert_eq!(id.to_string().parse::<NodeId>().unwrap(), id);
        }
        assert_eq!("42".parse::<NodeId>().unwrap(), NodeId::Ifc(42));
        assert!("cell:1:2".parse::<NodeId>().is_err());
        assert!("foo:1".parse::<NodeId>().is_err());
    }

    #[test]
    fn node_ids_order_by_namespace_then_number() {
        let mut ids = vec![
            NodeId::Occupant(1),
            NodeId::Cell {
                space: 2,
                row: 0,
                col: 1,
            },
            NodeId::Ifc(10),
            NodeId::Sensor(0),
            NodeId::Ifc(2),
            NodeId::Cell {
                space: 2,
                row: 0,
                col: 0,
            },
        ];
        ids.sort();
        assert_eq!(ids[0], NodeId::Ifc(2));
        assert_eq!(
            ids[2],
            NodeId::Cell {
                space: 2,
                row: 0,
                col: 0
            }
        );
        assert_eq!(ids[5], NodeId::Occupant(1));
    }

    #[test]
    fn edge_validation() {
        let mut g = triangle();
        let a = NodeId::Ifc(1);
        assert_eq!(g.connect(a, a, "R", 1.0), Err(GraphError::SelfLoop(a)));
        assert!(matches!(
            g.connect(a, NodeId::Ifc(2), "R", 0.0),
            Err(GraphError::InvalidWeight(_))
        ));
        assert_eq!(
            g.connect(a, NodeId::Ifc(99), "R", 1.0),
            Err(GraphError::UnknownNode(NodeId::Ifc(99)))
        );
        assert!(g.add_node(Node::new(a, "A")).is_err());
        assert!(g.check_incidence());
    }

    #[test]
    fn parallel_edges_merge_in_neighbors() {
        let mut g = triangle();
        g.connect(NodeId::Ifc(2), NodeId::Ifc(1), "S", 2.5).unwrap();
        assert_eq!(
            g.neighbors(&NodeId::Ifc(1)),
            vec![(NodeId::Ifc(2), 3.5), (NodeId::Ifc(3), 1.0)]
        );
        assert!(g.has_edge(NodeId::Ifc(2), NodeId::Ifc(1), "S"));
        assert!(!g.has_edge(NodeId::Ifc(3), NodeId::Ifc(1), "S"));
    }

    #[test]
    fn subgraph_filters_by_label() {
        let g = triangle();
        let sub = g.subgraph(&["A"]);
        assert_eq!(sub.node_count(), 2);
        assert_eq!(sub.edge_count(), 1);
        assert_eq!(sub.edges()[0].key(), (NodeId::Ifc(1), NodeId::Ifc(2), "R"));
        assert!(sub.check_incidence());

        let all: Vec<&str> = g.labels().into_iter().collect();
        assert_eq!(g.subgraph(&all), g);
        assert_eq!(g.subgraph(&["B"]).edge_count(), 0);
    }

    #[test]
    fn incidence_detects_corruption() {
        let mut g = triangle();
        g.incidence.get_mut(&NodeId::Ifc(1)).unwrap().pop();
        assert!(!g.check_incidence());
    }
}
