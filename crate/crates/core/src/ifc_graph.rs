//! Conversion of a parsed IFC model into a [`PropertyGraph`].
//!
//! Objectified relationships (`IFCREL*`) are expanded into one undirected
//! edge per (relating, related) pair; the relationship entities themselves
//! never become nodes. Property sets attached through
//! `IFCRELDEFINESBYPROPERTIES` become node attributes.

use std::fmt;

use log::warn;
use thiserror::Error;

use crate::graph::{AttrValue, Edge, Node, NodeId, PropertyGraph};
use crate::step::{EntityId, StepEntity, StepModel, StepValue};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IfcGraphError {
    #[error("relationship #{relationship} references missing entity #{missing}")]
    DanglingReference {
        relationship: EntityId,
        missing: EntityId,
    },
    #[error("invalid relation rule {0:?}")]
    InvalidRule(String),
}

/// Non-fatal problems found while building the graph.
#[derive(Debug, Clone, PartialEq)]
pub enum Diagnostic {
    DanglingReference {
        relationship: EntityId,
        missing: EntityId,
    },
    /// Relationship endpoint exists but its type is not in the object whitelist.
    NonObjectEndpoint {
        relationship: EntityId,
        entity: EntityId,
    },
    MalformedRelationship {
        relationship: EntityId,
        reason: String,
    },
    SkippedPropertyDefinition {
        relationship: EntityId,
        reason: String,
    },
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::DanglingReference {
                relationship,
                missing,
            } => write!(
                f,
                "#{relationship}: dangling reference to #{missing}, edge skipped"
            ),
            Diagnostic::NonObjectEndpoint {
                relationship,
                entity,
            } => write!(
                f,
                "#{relationship}: endpoint #{entity} is not a graph object"
            ),
            Diagnostic::MalformedRelationship {
                relationship,
                reason,
            } => write!(f, "#{relationship}: malformed relationship: {reason}"),
            Diagnostic::SkippedPropertyDefinition {
                relationship,
                reason,
            } => write!(f, "#{relationship}: property definition skipped: {reason}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Strictness {
    #[default]
    Lenient,
    Strict,
}

/// How one relationship entity type expands into edges.
#[derive(Debug, Clone, PartialEq)]
pub struct RelationRule {
    pub type_name: String,
    pub label: String,
    /// Attribute index holding the single relating reference.
    pub relating: usize,
    /// Attribute index holding the related reference or aggregate of references.
    pub related: usize,
}

impl RelationRule {
    pub fn new(type_name: &str, label: &str, relating: usize, related: usize) -> Self {
        RelationRule {
            type_name: type_name.to_ascii_uppercase(),
            label: label.to_string(),
            relating,
            related,
        }
    }

    /// Attribute positions of the relationship types the default table knows.
    fn known_positions(type_name: &str) -> Option<(usize, usize)> {
        Some(match type_name {
            "IFCRELAGGREGATES" | "IFCRELNESTS" => (4, 5),
            "IFCRELCONTAINEDINSPATIALSTRUCTURE" | "IFCRELREFERENCEDINSPATIALSTRUCTURE" => (5, 4),
            "IFCRELFILLSELEMENT" | "IFCRELVOIDSELEMENT" | "IFCRELSPACEBOUNDARY" => (4, 5),
            "IFCRELCONNECTSELEMENTS" | "IFCRELCONNECTSPATHELEMENTS" => (5, 6),
            "IFCRELSERVICESBUILDINGS" => (4, 5),
            _ => return None,
        })
    }
}

impl fmt::Display for RelationRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}:{}:{}:{}",
            self.type_name, self.label, self.relating, self.related
        )
    }
}

impl std::str::FromStr for RelationRule {
    type Err = IfcGraphError;

    /// `TYPE:LABEL[:relating:related]`; positions may be omitted for known types.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || IfcGraphError::InvalidRule(s.to_string());
        let parts: Vec<&str> = s.trim().split(':').collect();
        match parts.as_slice() {
            [ty, label] if !label.is_empty() => {
                let ty = ty.to_ascii_uppercase();
                let (relating, related) = RelationRule::known_positions(&ty).ok_or_else(bad)?;
                Ok(RelationRule::new(&ty, label, relating, related))
            }
            [ty, label, relating, related] if !label.is_empty() => Ok(RelationRule::new(
                ty,
                label,
                relating.parse().map_err(|_| bad())?,
                related.parse().map_err(|_| bad())?,
            )),
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelationMapping {
    pub rules: Vec<RelationRule>,
    /// Entity types whose name starts with one of these become nodes...
    pub object_prefixes: Vec<String>,
    /// ...unless the name ends with one of these (type objects, styles).
    pub excluded_suffixes: Vec<String>,
    pub default_weight: f64,
}

impl Default for RelationMapping {
    fn default() -> Self {
        let rules = [
            ("IFCRELAGGREGATES", "AGGREGATES"),
            ("IFCRELCONTAINEDINSPATIALSTRUCTURE", "CONTAINS"),
            ("IFCRELFILLSELEMENT", "FILLS"),
            ("IFCRELVOIDSELEMENT", "VOIDS"),
            ("IFCRELSPACEBOUNDARY", "BOUNDED_BY"),
            ("IFCRELCONNECTSELEMENTS", "CONNECTS"),
        ]
        .into_iter()
        .map(|(ty, label)| {
            let (relating, related) = RelationRule::known_positions(ty).unwrap();
            RelationRule::new(ty, label, relating, related)
        })
        .collect();
        let object_prefixes = [
            "IFCSITE",
            "IFCBUILDING",
            "IFCSPACE",
            "IFCWALL",
            "IFCDOOR",
            "IFCWINDOW",
            "IFCSLAB",
            "IFCCOVERING",
            "IFCROOF",
            "IFCCOLUMN",
            "IFCBEAM",
            "IFCSTAIR",
            "IFCRAMP",
            "IFCRAILING",
            "IFCPLATE",
            "IFCMEMBER",
            "IFCCURTAINWALL",
            "IFCOPENINGELEMENT",
            "IFCFURNISHINGELEMENT",
            "IFCFLOW",
            "IFCDISTRIBUTION",
            "IFCSENSOR",
        ]
        .map(String::from)
        .to_vec();
        RelationMapping {
            rules,
            object_prefixes,
            excluded_suffixes: ["TYPE", "STYLE", "PROPERTIES"].map(String::from).to_vec(),
            default_weight: 1.0,
        }
    }
}

impl RelationMapping {
    pub fn is_object(&self, type_name: &str) -> bool {
        self.object_prefixes
            .iter()
            .any(|p| type_name.starts_with(p.as_str()))
            && !self
                .excluded_suffixes
                .iter()
                .any(|s| type_name.ends_with(s.as_str()))
    }

    pub fn rule_for(&self, type_name: &str) -> Option<&RelationRule> {
        self.rules.iter().find(|r| r.type_name == type_name)
    }
}

pub fn node_for_entity(entity: &StepEntity) -> Node {
    let mut node = Node::new(NodeId::Ifc(entity.id), entity.type_name.clone());
    if let Some(gid) = entity.attr(0).and_then(StepValue::as_str) {
        node.attributes.insert("GlobalId".into(), gid.into());
    }
    if let Some(name) = entity.attr(2).and_then(StepValue::as_str) {
        node.attributes.insert("Name".into(), name.into());
    }
    node
}

/// Builds the object graph. Returns the graph and the diagnostics collected in
/// lenient mode; in strict mode the first dangling reference is an error.
pub fn build_graph(
    model: &StepModel,
    mapping: &RelationMapping,
    strictness: Strictness,
) -> Result<(PropertyGraph, Vec<Diagnostic>), IfcGraphError> {
    let mut graph = PropertyGraph::new();
    let mut diagnostics = Vec::new();

    for entity in model.entities().filter(|e| mapping.is_object(&e.type_name)) {
        graph
            .add_node(node_for_entity(entity))
            .expect("entity ids are unique");
    }

    for rel in model.entities() {
        let Some(rule) = mapping.rule_for(&rel.type_name) else {
            continue;
        };
        let relating = rel.attr_refs(rule.relating);
        let [relating] = relating.as_slice() else {
            diagnostics.push(Diagnostic::MalformedRelationship {
                relationship: rel.id,
                reason: format!(
                    "attribute {} must hold exactly one reference",
                    rule.relating
                ),
            });
            continue;
        };
        for related in rel.attr_refs(rule.related) {
            let missing = [*relating, related]
                .into_iter()
                .find(|id| !model.contains(*id));
            if let Some(missing) = missing {
                if strictness == Strictness::Strict {
                    return Err(IfcGraphError::DanglingReference {
                        relationship: rel.id,
                        missing,
                    });
                }
                diagnostics.push(Diagnostic::DanglingReference {
                    relationship: rel.id,
                    missing,
                });
                continue;
            }
            let (x, y) = (NodeId::Ifc(*relating), NodeId::Ifc(related));
            let non_object = [x, y].into_iter().find(|id| !graph.contains_node(id));
            if let Some(NodeId::Ifc(entity)) = non_object {
                diagnostics.push(Diagnostic::NonObjectEndpoint {
                    relationship: rel.id,
                    entity,
                });
                continue;
            }
            if x == y {
                diagnostics.push(Diagnostic::MalformedRelationship {
                    relationship: rel.id,
                    reason: "relates an entity to itself".into(),
                });
                continue;
            }
            let mut edge = Edge::new(x, y, rule.label.as_str(), mapping.default_weight);
            edge.attributes
                .insert("relationship".into(), AttrValue::Int(rel.id as i64));
            graph.add_edge(edge).expect("endpoints exist");
        }
    }
    for d in &diagnostics {
        warn!("{d}");
    }
    Ok((graph, diagnostics))
}

/// Converts a property's nominal value; `None` for nulls and unsupported shapes.
fn property_value(value: &StepValue) -> Option<AttrValue> {
    match value {
        StepValue::Typed(_, inner) => property_value(inner),
        StepValue::Integer(i) => Some(AttrValue::Int(*i)),
        StepValue::Real(r) => Some(AttrValue::Real(*r)),
        StepValue::String(s) => Some(AttrValue::Text(s.clone())),
        StepValue::Enum(e) => Some(match e.as_str() {
            "T" | "TRUE" => AttrValue::Bool(true),
            "F" | "FALSE" => AttrValue::Bool(false),
            "U" => AttrValue::Text("UNKNOWN".into()),
            other => AttrValue::Text(other.to_string()),
        }),
        StepValue::List(items) => items
            .iter()
            .map(|v| match property_value(v) {
                Some(AttrValue::Real(r)) => Some(r),
                Some(AttrValue::Int(i)) => Some(i as f64),
                _ => None,
            })
            .collect::<Option<Vec<f64>>>()
            .map(AttrValue::Vector),
        StepValue::Ref(_) | StepValue::Null | StepValue::Derived => None,
    }
}

/// Single-value properties of one property set, in declaration order.
fn property_set_values(
    model: &StepModel,
    pset: &StepEntity,
) -> Result<Vec<(String, AttrValue)>, String> {
    if pset.type_name != "IFCPROPERTYSET" {
        return Err(format!("{} is not a property set", pset.type_name));
    }
    let props = pset
        .attr(4)
        .and_then(StepValue::as_list)
        .ok_or("HasProperties is not an aggregate")?;
    let mut out = Vec::new();
    for prop_id in props.iter().filter_map(StepValue::as_ref_id) {
        let Some(prop) = model.get(prop_id) else {
            return Err(format!("property #{prop_id} is missing"));
        };
        if prop.type_name != "IFCPROPERTYSINGLEVALUE" {
            continue;
        }
        let Some(name) = prop.attr(0).and_then(StepValue::as_str) else {
            return Err(format!("property #{prop_id} has no name"));
        };
        if let Some(value) = prop.attr(2).and_then(property_value) {
            out.push((name.to_string(), value));
        }
    }
    Ok(out)
}

/// Copies single-value properties onto related object nodes, processing
/// `IFCRELDEFINESBYPROPERTIES` in ascending id order so later relationships
/// overwrite earlier ones.
pub fn attach_properties(graph: &mut PropertyGraph, model: &StepModel) -> Vec<Diagnostic> {
    let mut diagnostics = Vec::new();
    for rel in model.entities_of_type("IFCRELDEFINESBYPROPERTIES") {
        let skip = |reason: String| Diagnostic::SkippedPropertyDefinition {
            relationship: rel.id,
            reason,
        };
        let Some(def) = rel.attr(5).and_then(StepValue::as_ref_id) else {
            diagnostics.push(skip("RelatingPropertyDefinition is not a reference".into()));
            continue;
        };
        let Some(pset) = model.get(def) else {
            diagnostics.push(skip(format!("definition #{def} is missing")));
            continue;
        };
        let values = match property_set_values(model, pset) {
            Ok(v) => v,
            Err(reason) => {
                diagnostics.push(skip(reason));
                continue;
            }
        };
        for object in rel.attr_refs(4) {
            if let Some(node) = graph.node_mut(&NodeId::Ifc(object)) {
                for (k, v) in &values {
                    node.attributes.insert(k.clone(), v.clone());
                }
            }
        }
    }
    for d in &diagnostics {
        warn!("{d}");
    }
    diagnostics
}
