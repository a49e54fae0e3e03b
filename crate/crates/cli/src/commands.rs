//! The pipeline stages behind each subcommand.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use build2vec_core::embedding_store::{
    self, knn, predict_comfort, read_labels, NeighborList, METADATA_FILE, VECTORS_FILE,
};
use build2vec_core::graph::{
    read_graph, write_graph, AttrValue, Node, NodeId, PropertyGraph, LABEL_SENSOR,
};
use build2vec_core::ifc_graph::{attach_properties, build_graph};
use build2vec_core::node2vec::generate_walks;
use build2vec_core::sgns::{train_with_report, EmbeddingMatrix, TrainError};
use build2vec_core::space_grid::{
    attach_fixed_node, discretize, merge_into, read_footprints, read_sensor_manifest,
    DiscretizedSpace, FootprintRecord, GridError, SensorPlacement,
};
use build2vec_core::step::{parse_step, write_step, StepModel, StepValue};
use build2vec_core::temporal::{
    adjacency_tensor, build_snapshots, flatten, read_fixes, read_readings, read_temporal,
    write_temporal, Feedback,
};

use crate::config::RunConfig;
use crate::error::CliError;

/// Replaces `path` with `bytes` via a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let io = |e: std::io::Error| CliError::output(path, e);
    fs::create_dir_all(&dir).map_err(io)?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

fn read_file(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn open(path: &Path) -> Result<BufReader<fs::File>, CliError> {
    fs::File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn in_file<E: std::fmt::Display>(path: &Path) -> impl Fn(E) -> CliError + '_ {
    move |e| CliError::input(format!("{}: {e}", path.display()))
}

pub fn load_model(path: &Path) -> Result<StepModel, CliError> {
    parse_step(&read_file(path)?).map_err(in_file(path))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParseSummary {
    pub schema: Option<String>,
    pub entity_count: usize,
    pub type_counts: BTreeMap<String, usize>,
    /// (referencing entity, missing id)
    pub dangling: Vec<(u64, u64)>,
}

impl ParseSummary {
    pub fn render(&self) -> String {
        let mut s = format!(
            "schema\t{}\nentities\t{}\n",
            self.schema.as_deref().unwrap_or("-"),
            self.entity_count
        );
        for (ty, n) in &self.type_counts {
            s += &format!("type\t{ty}\t{n}\n");
        }
        for (from, to) in &self.dangling {
            s += &format!("dangling\t#{from}\t#{to}\n");
        }
        s
    }
}

pub fn cmd_parse(ifc: &Path, dump: Option<&Path>) -> Result<ParseSummary, CliError> {
    let model = load_model(ifc)?;
    let schema = model.header_record("FILE_SCHEMA").map(|h| {
        h.params
            .iter()
            .flat_map(strings)
            .collect::<Vec<_>>()
            .join(",")
    });
    let mut type_counts = BTreeMap::new();
    for e in model.entities() {
        *type_counts.entry(e.type_name.clone()).or_insert(0) += 1;
    }
    if let Some(path) = dump {
        write_atomic(path, write_step(&model).as_bytes())?;
    }
    Ok(ParseSummary {
        schema,
        entity_count: model.len(),
        type_counts,
        dangling: model.validate_references(),
    })
}

fn strings(value: &StepValue) -> Vec<String> {
    match value {
        StepValue::String(s) => vec![s.clone()],
        StepValue::List(items) => items.iter().flat_map(strings).collect(),
        _ => Vec::new(),
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GraphSummary {
    pub nodes: usize,
    pub edges: usize,
    pub ifc_objects: usize,
    pub cells: usize,
    pub sensors: usize,
    pub warnings: Vec<String>,
}

impl GraphSummary {
    fn of(graph: &PropertyGraph, warnings: Vec<String>) -> Self {
        let mut s = GraphSummary {
            nodes: graph.node_count(),
            edges: graph.edge_count(),
            warnings,
            ..GraphSummary::default()
        };
        for id in graph.node_ids() {
            match id {
                NodeId::Ifc(_) => s.ifc_objects += 1,
                NodeId::Cell { .. } => s.cells += 1,
                NodeId::Sensor(_) => s.sensors += 1,
                NodeId::Occupant(_) => {}
            }
        }
        s
    }

    pub fn render(&self) -> String {
        format!(
            "nodes\t{}\nedges\t{}\nifc_objects\t{}\ncells\t{}\nsensors\t{}\nwarnings\t{}\n",
            self.nodes,
            self.edges,
            self.ifc_objects,
            self.cells,
            self.sensors,
            self.warnings.len()
        )
    }
}

pub fn discretize_all(
    records: &[FootprintRecord],
    cfg: &RunConfig,
) -> Result<Vec<DiscretizedSpace>, CliError> {
    records
        .iter()
        .map(|r| {
            let fp = r
                .footprint()
                .map_err(|e| CliError::input(format!("space #{}: {e}", r.space_id)))?;
            discretize(&fp, cfg.cell_size, cfg.neighborhood).map_err(|e| match e {
                GridError::InvalidCellSize(_) => CliError::usage(e.to_string()),
                other => CliError::input(format!("space #{}: {other}", r.space_id)),
            })
        })
        .collect()
}

/// IFC object graph plus discretized spaces, anchored elements and sensors.
/// Returns the graph, the spaces and the lenient-mode warnings.
pub fn assemble_building(
    model: &StepModel,
    footprints: &[FootprintRecord],
    sensors: &[SensorPlacement],
    cfg: &RunConfig,
) -> Result<(PropertyGraph, Vec<DiscretizedSpace>, Vec<String>), CliError> {
    let (mut graph, diagnostics) = build_graph(model, &cfg.mapping(), cfg.strictness())
        .map_err(|e| CliError::input(e.to_string()))?;
    let mut warnings: Vec<String> = diagnostics.iter().map(ToString::to_string).collect();
    warnings.extend(
        attach_properties(&mut graph, model)
            .iter()
            .map(ToString::to_string),
    );

    let spaces = discretize_all(footprints, cfg)?;
    let soft = |e: String, warnings: &mut Vec<String>| -> Result<(), CliError> {
        if cfg.strict {
            Err(CliError::input(e))
        } else {
            log::warn!("{e}");
            warnings.push(e);
            Ok(())
        }
    };
    for (record, space) in footprints.iter().zip(&spaces) {
        if space.degenerate {
            soft(
                format!("space #{} is smaller than one cell", record.space_id),
                &mut warnings,
            )?;
        }
        merge_into(&mut graph, space, cfg.link_space)
            .map_err(|e| CliError::input(format!("space #{}: {e}", record.space_id)))?;
        for anchor in &record.anchors {
            let node = NodeId::Ifc(anchor.element_id);
            let radius = anchor.radius.or(cfg.anchor_radius).unwrap_or(cfg.cell_size);
            let position = (anchor.position[0], anchor.position[1]);
            if let Err(e) = attach_fixed_node(&mut graph, space, node, position, radius) {
                soft(
                    format!("anchor in space #{}: {e}", record.space_id),
                    &mut warnings,
                )?;
            }
        }
    }
    let by_space: BTreeMap<u64, &DiscretizedSpace> =
        spaces.iter().map(|s| (s.footprint.space_id, s)).collect();
    for placement in sensors {
        let id = NodeId::Sensor(placement.sensor_id);
        let space = by_space.get(&placement.space_id).ok_or_else(|| {
            CliError::input(format!(
                "sensor {}: space #{} has no footprint",
                placement.sensor_id, placement.space_id
            ))
        })?;
        let mut node = Node::new(id, LABEL_SENSOR)
            .with_attr("space", AttrValue::Int(placement.space_id as i64));
        if !placement.channels.is_empty() {
            node = node.with_attr("channels", placement.channels.join(","));
        }
        graph
            .add_node(node)
            .map_err(|e| CliError::input(e.to_string()))?;
        let radius = placement
            .radius
            .or(cfg.sensor_radius)
            .unwrap_or(cfg.cell_size);
        let position = (placement.position[0], placement.position[1]);
        if let Err(e) = attach_fixed_node(&mut graph, space, id, position, radius) {
            soft(e.to_string(), &mut warnings)?;
        }
    }
    Ok((graph, spaces, warnings))
}

pub fn load_footprints(path: Option<&Path>) -> Result<Vec<FootprintRecord>, CliError> {
    match path {
        None => Ok(Vec::new()),
        Some(p) => read_footprints(open(p)?).map_err(in_file(p)),
    }
}

pub fn cmd_graph(
    ifc: &Path,
    footprints: Option<&Path>,
    sensors: Option<&Path>,
    out: &Path,
    cfg: &RunConfig,
) -> Result<GraphSummary, CliError> {
    let model = load_model(ifc)?;
    let footprints = load_footprints(footprints)?;
    let sensors = match sensors {
        None => Vec::new(),
        Some(p) => read_sensor_manifest(open(p)?).map_err(in_file(p))?,
    };
    let (graph, _, warnings) = assemble_building(&model, &footprints, &sensors, cfg)?;
    let mut buf = Vec::new();
    write_graph(&graph, &mut buf).map_err(|e| CliError::internal(e.to_string()))?;
    write_atomic(out, &buf)?;
    Ok(GraphSummary::of(&graph, warnings))
}

pub fn load_graph(path: &Path) -> Result<PropertyGraph, CliError> {
    read_graph(open(path)?).map_err(in_file(path))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotSummary {
    pub snapshots: usize,
    pub nodes: usize,
    pub tensor_records: usize,
}

pub const TENSOR_FILE: &str = "tensor.csv";
pub const TENSOR_MANIFEST_FILE: &str = "tensor_manifest.json";

pub struct SnapshotInputs<'a> {
    pub graph: &'a Path,
    pub footprints: &'a Path,
    pub readings: Option<&'a Path>,
    pub fixes: Option<&'a Path>,
}

pub fn cmd_snapshot(
    inputs: &SnapshotInputs<'_>,
    out: &Path,
    tensor_dir: Option<&Path>,
    cfg: &RunConfig,
) -> Result<SnapshotSummary, CliError> {
    let base = load_graph(inputs.graph)?;
    let spaces = discretize_all(&load_footprints(Some(inputs.footprints))?, cfg)?;
    for space in &spaces {
        if let Some(missing) = space.cells.iter().find(|c| !base.contains_node(&c.id)) {
            return Err(CliError::input(format!(
                "cell {} is not in the graph; was it built with cell_size={} and the same footprints?",
                missing.id, cfg.cell_size
            )));
        }
    }
    let readings = match inputs.readings {
        None => Vec::new(),
        Some(p) => read_readings(open(p)?).map_err(in_file(p))?,
    };
    let fixes = match inputs.fixes {
        None => Vec::new(),
        Some(p) => read_fixes(open(p)?).map_err(in_file(p))?,
    };
    let tg = build_snapshots(&base, &spaces, &readings, &fixes, &cfg.snapshot_config())
        .map_err(|e| CliError::input(e.to_string()))?;
    let mut buf = Vec::new();
    write_temporal(&tg, &mut buf).map_err(|e| CliError::internal(e.to_string()))?;
    write_atomic(out, &buf)?;
    let tensor = adjacency_tensor(&tg);
    if let Some(dir) = tensor_dir {
        let mut records = Vec::new();
        tensor
            .write_records(&mut records)
            .map_err(|e| CliError::internal(e.to_string()))?;
        write_atomic(&dir.join(TENSOR_FILE), &records)?;
        let mut manifest = Vec::new();
        tensor
            .write_manifest(&mut manifest)
            .map_err(|e| CliError::internal(e.to_string()))?;
        write_atomic(&dir.join(TENSOR_MANIFEST_FILE), &manifest)?;
    }
    Ok(SnapshotSummary {
        snapshots: tg.len(),
        nodes: tg.node_index().len(),
        tensor_records: tensor.records.len(),
    })
}

pub enum EmbedSource<'a> {
    Graph(&'a Path),
    Temporal(&'a Path),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbedSummary {
    pub vocabulary: usize,
    pub walks: usize,
    pub epoch_loss: Vec<f64>,
}

pub struct EmbedOutputs<'a> {
    pub checkpoint: &'a Path,
    pub export_dir: Option<&'a Path>,
    pub walks: Option<&'a Path>,
}

pub fn cmd_embed(
    source: EmbedSource<'_>,
    outputs: &EmbedOutputs<'_>,
    cfg: &RunConfig,
) -> Result<EmbedSummary, CliError> {
    cfg.walk
        .validate()
        .map_err(|e| CliError::usage(e.to_string()))?;
    cfg.train
        .validate()
        .map_err(|e| CliError::usage(e.to_string()))?;
    let graph = match source {
        EmbedSource::Graph(p) => load_graph(p)?,
        EmbedSource::Temporal(p) => {
            let tg = read_temporal(open(p)?).map_err(in_file(p))?;
            flatten(&tg, cfg.flatten).map_err(|e| CliError::input(e.to_string()))?
        }
    };
    let corpus = generate_walks(&graph, &cfg.walk).map_err(|e| CliError::input(e.to_string()))?;
    if let Some(path) = outputs.walks {
        let mut buf = Vec::new();
        corpus
            .write(&mut buf)
            .map_err(|e| CliError::internal(e.to_string()))?;
        write_atomic(path, &buf)?;
    }
    let (mut matrix, report) = train_with_report(&corpus, &cfg.train).map_err(|e| match e {
        TrainError::InvalidConfig(m) => CliError::usage(m),
        TrainError::EmptyCorpus | TrainError::AllZeroCounts => CliError::input(e.to_string()),
        TrainError::NonFinite(_) => CliError::internal(e.to_string()),
    })?;
    matrix.label_from(&graph);
    let mut buf = Vec::new();
    matrix
        .write_checkpoint(&mut buf)
        .map_err(|e| CliError::internal(e.to_string()))?;
    write_atomic(outputs.checkpoint, &buf)?;
    if let Some(dir) = outputs.export_dir {
        let mut vectors = Vec::new();
        embedding_store::write_vectors(&matrix, &mut vectors)
            .map_err(|e| CliError::internal(e.to_string()))?;
        let mut metadata = Vec::new();
        embedding_store::write_metadata(&matrix, Some(&graph), &mut metadata)
            .map_err(|e| CliError::internal(e.to_string()))?;
        write_atomic(&dir.join(VECTORS_FILE), &vectors)?;
        write_atomic(&dir.join(METADATA_FILE), &metadata)?;
    }
    Ok(EmbedSummary {
        vocabulary: matrix.len(),
        walks: corpus.walks.len(),
        epoch_loss: report.epoch_loss,
    })
}

pub fn load_checkpoint(path: &Path) -> Result<EmbeddingMatrix, CliError> {
    EmbeddingMatrix::read_checkpoint(&mut open(path)?).map_err(in_file(path))
}

fn store_error(e: embedding_store::StoreError) -> CliError {
    match e {
        embedding_store::StoreError::InvalidK => CliError::usage(e.to_string()),
        other => CliError::input(other.to_string()),
    }
}

pub fn parse_node(text: &str) -> Result<NodeId, CliError> {
    text.parse().map_err(|e| CliError::usage(format!("{e}")))
}

pub fn cmd_query(
    checkpoint: &Path,
    node: &NodeId,
    k: usize,
    filter: &[String],
) -> Result<NeighborList, CliError> {
    let matrix = load_checkpoint(checkpoint)?;
    let filter: Option<BTreeSet<String>> = if filter.is_empty() {
        None
    } else {
        Some(
            filter
                .iter()
                .map(|f| f.trim().to_ascii_uppercase())
                .collect(),
        )
    };
    knn(&matrix, node, k, filter.as_ref()).map_err(store_error)
}

pub fn render_neighbors(list: &NeighborList) -> String {
    list.neighbors
        .iter()
        .enumerate()
        .map(|(i, (id, s))| format!("{}\t{id}\t{s:.6}\n", i + 1))
        .collect()
}

pub fn cmd_predict(
    checkpoint: &Path,
    labels: &Path,
    node: &NodeId,
    k: usize,
) -> Result<Feedback, CliError> {
    let matrix = load_checkpoint(checkpoint)?;
    let labeled = read_labels(open(labels)?).map_err(in_file(labels))?;
    predict_comfort(&matrix, &labeled, node, k).map_err(store_error)
}

pub fn render_prediction(f: Feedback) -> String {
    let v = f.one_hot();
    format!("[{},{},{}]\t{f}\n", v[0], v[1], v[2])
}
