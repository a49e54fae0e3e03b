//! ISO 10303-21 (STEP physical file) reading and writing.
//!
//! The parser accepts the full clear-text value grammar but performs no
//! EXPRESS schema validation: any entity type token is accepted and stored
//! upper-cased.

mod lexer;
mod parser;
mod writer;

use std::collections::BTreeMap;

use thiserror::Error;

pub use parser::parse_step;
pub use writer::write_step;

/// Entity instance identifier (`#123`).
pub type EntityId = u64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StepError {
    #[error("malformed STEP file: {0}")]
    MalformedFile(String),
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("duplicate entity id #{id} at line {line}, column {column}")]
    DuplicateId {
        id: EntityId,
        line: usize,
        column: usize,
    },
}

/// A single attribute value.
#[derive(Debug, Clone, PartialEq)]
pub enum StepValue {
    Integer(i64),
    Real(f64),
    /// Decoded string: `''` collapsed to `'`, `\X\`-style escapes kept verbatim.
    String(String),
    /// Enumeration token without the surrounding dots (`.T.` -> `T`).
    Enum(String),
    Ref(EntityId),
    /// Typed parameter such as `IFCLABEL('x')`.
    Typed(String, Box<StepValue>),
    List(Vec<StepValue>),
    /// `$`
    Null,
    /// `*`
    Derived,
}

impl StepValue {
    pub fn as_ref_id(&self) -> Option<EntityId> {
        match self {
            StepValue::Ref(id) => Some(*id),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            StepValue::String(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_list(&self) -> Option<&[StepValue]> {
        match self {
            StepValue::List(items) => Some(items),
            _ => None,
        }
    }

    /// Every entity reference contained in this value, in document order.
    pub fn refs(&self) -> Vec<EntityId> {
        let mut out = Vec::new();
        self.collect_refs(&mut out);
        out
    }

    fn collect_refs(&self, out: &mut Vec<EntityId>) {
        match self {
            StepValue::Ref(id) => out.push(*id),
            StepValue::Typed(_, inner) => inner.collect_refs(out),
            StepValue::List(items) => items.iter().for_each(|v| v.collect_refs(out)),
            _ => {}
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepEntity {
    pub id: EntityId,
    pub type_name: String,
    pub attributes: Vec<StepValue>,
}

impl StepEntity {
    pub fn attr(&self, index: usize) -> Option<&StepValue> {
        self.attributes.get(index)
    }

    /// References held by the attribute at `index`, whether it is a single
    /// reference or an aggregate of them.
    pub fn attr_refs(&self, index: usize) -> Vec<EntityId> {
        self.attr(index).map(StepValue::refs).unwrap_or_default()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeaderRecord {
    pub name: String,
    pub params: Vec<StepValue>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepModel {
    pub header: Vec<HeaderRecord>,
    entities: BTreeMap<EntityId, StepEntity>,
}

impl StepModel {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts an entity, returning the one previously stored under the same id.
    pub fn insert(&mut self, entity: StepEntity) -> Option<StepEntity> {
        self.entities.insert(entity.id, entity)
    }

    pub fn get(&self, id: EntityId) -> Option<&StepEntity> {
        self.entities.get(&id)
    }

    pub fn contains(&self, id: EntityId) -> bool {
        self.entities.contains_key(&id)
    }

    pub fn len(&self) -> usize {
        self.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }

    /// Entities in ascending id order.
    pub fn entities(&self) -> impl Iterator<Item = &StepEntity> {
        self.entities.values()
    }

    pub fn header_record(&self, name: &str) -> Option<&HeaderRecord> {
        self.header
            .iter()
            .find(|h| h.name.eq_ignore_ascii_case(name))
    }

    /// All entities whose type matches `type_name` (case-insensitive), ascending id.
    pub fn entities_of_type(&self, type_name: &str) -> Vec<&StepEntity> {
        let wanted = type_name.to_ascii_uppercase();
        self.entities
            .values()
            .filter(|e| e.type_name == wanted)
            .collect()
    }

    /// Every `(referencing id, missing id)` pair, ordered by referencing id
    /// then missing id. Repeated references from one entity are reported once.
    pub fn validate_references(&self) -> Vec<(EntityId, EntityId)> {
        let mut dangling = Vec::new();
        for entity in self.entities.values() {
            let mut missing: Vec<EntityId> = entity
                .attributes
                .iter()
                .flat_map(StepValue::refs)
                .filter(|id| !self.entities.contains_key(id))
                .collect();
            missing.sort_unstable();
            missing.dedup();
            dangling.extend(missing.into_iter().map(|m| (entity.id, m)));
        }
        dangling
    }
}

pub fn entities_of_type<'a>(model: &'a StepModel, type_name: &str) -> Vec<&'a StepEntity> {
    model.entities_of_type(type_name)
}

pub fn validate_references(model: &StepModel) -> Vec<(EntityId, EntityId)> {
    model.validate_references()
}
