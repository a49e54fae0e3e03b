//! Building graph embeddings: IFC (ISO 10303-21) parsing, labeled property
//! graphs, spatial discretization, spatio-temporal snapshots, node2vec walks
//! and skip-gram training.

pub mod alias;
pub mod embedding_store;
pub mod graph;
pub mod ifc_graph;
pub mod node2vec;
pub mod sgns;
pub mod space_grid;
pub mod step;
pub mod temporal;

pub use graph::{AttrValue, Edge, GraphError, Node, NodeId, PropertyGraph};
pub use step::{parse_step, StepEntity, StepError, StepModel, StepValue};
