//! Per-time-step snapshots of the building graph.
//!
//! Occupants are movable nodes tied to the cells around their latest
//! location with `AT` edges; sensor readings become node attributes. The
//! snapshot stack can be exported as a T x N x N adjacency tensor in
//! coordinate form, or flattened back into one static graph for walks.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::{self, BufRead, Read, Write};
use std::str::FromStr;

use log::warn;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::io::{assemble, parse_record, write_edge_line, write_node_line};
use crate::graph::{
    AttrValue, Edge, GraphError, Node, NodeId, PropertyGraph, EDGE_AT, LABEL_OCCUPANT,
};
use crate::space_grid::{DiscretizedSpace, Point};

#[derive(Debug, Error)]
pub enum TemporalError {
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("no readings and no occupant fixes")]
    EmptyTimeline,
    #[error("step must be positive")]
    InvalidStep,
    #[error("space {0} has no discretized footprint")]
    NoFootprint(NodeId),
    #[error("slice {index} out of range for {len} snapshot(s)")]
    SliceOutOfRange { index: usize, len: usize },
    #[error("snapshot timestamps must be strictly increasing")]
    NonMonotonic,
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("{0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Occupant comfort feedback, one-hot encoded in declaration order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Feedback {
    Comfortable,
    Uncomfortable,
    Neutral,
}

impl Feedback {
    pub const ALL: [Feedback; 3] = [
        Feedback::Comfortable,
        Feedback::Uncomfortable,
        Feedback::Neutral,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn one_hot(self) -> [f64; 3] {
        let mut v = [0.0; 3];
        v[self.index()] = 1.0;
        v
    }

    /// Inverse of [`Feedback::one_hot`]; `None` unless exactly one component is 1.
    pub fn from_one_hot(v: &[f64]) -> Option<Feedback> {
        if v.len() != 3 || v.iter().any(|&x| x != 0.0 && x != 1.0) {
            return None;
        }
        let mut hot = v.iter().enumerate().filter(|(_, &x)| x == 1.0);
        match (hot.next(), hot.next()) {
            (Some((i, _)), None) => Some(Feedback::ALL[i]),
            _ => None,
        }
    }
}

impl fmt::Display for Feedback {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Feedback::Comfortable => "comfortable",
            Feedback::Uncomfortable => "uncomfortable",
            Feedback::Neutral => "neutral",
        })
    }
}

impl FromStr for Feedback {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "comfortable" => Ok(Feedback::Comfortable),
            "uncomfortable" => Ok(Feedback::Uncomfortable),
            "neutral" => Ok(Feedback::Neutral),
            other => Err(format!("unknown feedback {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensorReading {
    pub sensor_node: NodeId,
    pub timestamp: u64,
    pub channel: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OccupantFix {
    pub occupant_node: NodeId,
    pub timestamp: u64,
    pub space_node: NodeId,
    pub position: Point,
    pub feedback: Option<Feedback>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotConfig {
    /// Window length in seconds.
    pub step: u64,
    /// Occupant-to-cell attachment radius; defaults to the space's cell size.
    pub occupant_radius: Option<f64>,
    /// Windows an occupant keeps its last cell without a new fix.
    pub max_gap: u64,
}

impl Default for SnapshotConfig {
    fn default() -> Self {
        SnapshotConfig {
            step: 300,
            occupant_radius: None,
            max_gap: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub timestamp: u64,
    pub graph: PropertyGraph,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TemporalGraph {
    pub base: PropertyGraph,
    snapshots: Vec<Snapshot>,
    node_index: BTreeMap<NodeId, usize>,
}

impl TemporalGraph {
    pub fn new(base: PropertyGraph, snapshots: Vec<Snapshot>) -> Result<Self, TemporalError> {
        if snapshots
            .windows(2)
            .any(|w| w[0].timestamp >= w[1].timestamp)
        {
            return Err(TemporalError::NonMonotonic);
        }
        let ids: BTreeSet<NodeId> = base
            .node_ids()
            .chain(snapshots.iter().flat_map(|s| s.graph.node_ids()))
            .collect();
        let node_index = ids.into_iter().enumerate().map(|(i, id)| (id, i)).collect();
        Ok(TemporalGraph {
            base,
            snapshots,
            node_index,
        })
    }

    pub fn snapshots(&self) -> &[Snapshot] {
        &self.snapshots
    }

    /// Canonical dense index shared by all snapshots (ascending `NodeId`).
    pub fn node_index(&self) -> &BTreeMap<NodeId, usize> {
        &self.node_index
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }
}

pub fn build_snapshots(
    base: &PropertyGraph,
    spaces: &[DiscretizedSpace],
    readings: &[SensorReading],
    fixes: &[OccupantFix],
    cfg: &SnapshotConfig,
) -> Result<TemporalGraph, TemporalError> {
    if cfg.step == 0 {
        return Err(TemporalError::InvalidStep);
    }
    if readings.is_empty() && fixes.is_empty() {
        return Err(TemporalError::EmptyTimeline);
    }
    let by_space: HashMap<NodeId, &DiscretizedSpace> =
        spaces.iter().map(|s| (s.space_node(), s)).collect();
    for r in readings {
        if !base.contains_node(&r.sensor_node) {
            return Err(TemporalError::UnknownNode(r.sensor_node));
        }
    }
    for f in fixes {
        if !base.contains_node(&f.space_node) {
            return Err(TemporalError::UnknownNode(f.space_node));
        }
        if !by_space.contains_key(&f.space_node) {
            return Err(TemporalError::NoFootprint(f.space_node));
        }
    }

    let mut readings: Vec<&SensorReading> = readings.iter().collect();
    readings.sort_by(|a, b| {
        (a.timestamp, a.sensor_node, &a.channel)
            .cmp(&(b.timestamp, b.sensor_node, &b.channel))
            .then(a.value.total_cmp(&b.value))
    });
    let mut fixes: Vec<&OccupantFix> = fixes.iter().collect();
    fixes.sort_by(|a, b| {
        (a.timestamp, a.occupant_node, a.space_node)
            .cmp(&(b.timestamp, b.occupant_node, b.space_node))
            .then(a.position.0.total_cmp(&b.position.0))
            .then(a.position.1.total_cmp(&b.position.1))
            .then(a.feedback.cmp(&b.feedback))
    });

    let t0 = readings
        .iter()
        .map(|r| r.timestamp)
        .chain(fixes.iter().map(|f| f.timestamp))
        .min()
        .expect("non-empty timeline");
    let window = |t: u64| ((t - t0) / cfg.step) as usize;
    let windows = readings
        .iter()
        .map(|r| window(r.timestamp))
        .chain(fixes.iter().map(|f| window(f.timestamp)))
        .max()
        .unwrap()
        + 1;

    // Latest value per (sensor, channel) and latest fix per occupant, per window.
    let mut values: Vec<BTreeMap<(NodeId, &str), f64>> = vec![BTreeMap::new(); windows];
    for r in &readings {
        values[window(r.timestamp)].insert((r.sensor_node, r.channel.as_str()), r.value);
    }
    let mut latest_fix: Vec<BTreeMap<NodeId, &OccupantFix>> = vec![BTreeMap::new(); windows];
    for f in &fixes {
        latest_fix[window(f.timestamp)].insert(f.occupant_node, f);
    }

    let mut snapshots = Vec::with_capacity(windows);
    let mut carried: BTreeMap<NodeId, (usize, &OccupantFix)> = BTreeMap::new();
    for w in 0..windows {
        let mut graph = base.clone();
        for (&(sensor, channel), &value) in &values[w] {
            graph
                .node_mut(&sensor)
                .expect("checked above")
                .attributes
                .insert(channel.to_string(), AttrValue::Real(value));
        }
        for (&occupant, &fix) in &latest_fix[w] {
            carried.insert(occupant, (w, fix));
        }
        carried.retain(|_, (seen, _)| (w - *seen) as u64 <= cfg.max_gap);

        for (&occupant, &(seen, fix)) in &carried {
            let space = by_space[&fix.space_node];
            let radius = cfg.occupant_radius.unwrap_or(space.cell_size);
            let cells = space.attachment_cells(fix.position, radius);
            if cells.is_empty() {
                warn!(
                    "{occupant} at ({}, {}) in {} has no cell in range; absent at t={}",
                    fix.position.0,
                    fix.position.1,
                    fix.space_node,
                    t0 + w as u64 * cfg.step
                );
                continue;
            }
            if !graph.contains_node(&occupant) {
                graph.add_node(Node::new(occupant, LABEL_OCCUPANT))?;
            }
            if let (Some(fb), true) = (fix.feedback, seen == w) {
                graph
                    .node_mut(&occupant)
                    .unwrap()
                    .attributes
                    .insert("feedback".into(), AttrValue::Vector(fb.one_hot().to_vec()));
            }
            for cell in cells {
                graph.connect(occupant, cell, EDGE_AT, 1.0)?;
            }
        }
        snapshots.push(Snapshot {
            timestamp: t0 + w as u64 * cfg.step,
            graph,
        });
    }
    TemporalGraph::new(base.clone(), snapshots)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TensorRecord {
    pub t: usize,
    pub i: usize,
    pub j: usize,
    pub w: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub index: usize,
    pub node_id: String,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorManifest {
    #[serde(rename = "T")]
    pub t: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub timestamps: Vec<u64>,
    pub node_index: Vec<IndexEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdjacencyTensor {
    pub manifest: TensorManifest,
    /// Upper-triangle entries (i < j), ordered by (t, i, j).
    pub records: Vec<TensorRecord>,
}

impl AdjacencyTensor {
    pub fn write_records<W: Write>(&self, out: &mut W) -> io::Result<()> {
        writeln!(out, "t,i,j,w")?;
        for r in &self.records {
            writeln!(out, "{},{},{},{}", r.t, r.i, r.j, r.w)?;
        }
        Ok(())
    }

    pub fn write_manifest<W: Write>(&self, out: &mut W) -> io::Result<()> {
        serde_json::to_writer_pretty(&mut *out, &self.manifest)?;
        writeln!(out)
    }

    /// Dense T x N x N form, for small graphs and tests.
    pub fn to_dense(&self) -> Vec<Vec<Vec<f64>>> {
        let n = self.manifest.n;
        let mut dense = vec![vec![vec![0.0; n]; n]; self.manifest.t];
        for r in &self.records {
            dense[r.t][r.i][r.j] = r.w;
            dense[r.t][r.j][r.i] = r.w;
        }
        dense
    }
}

pub fn adjacency_tensor(tg: &TemporalGraph) -> AdjacencyTensor {
    let index = tg.node_index();
    let mut labels: BTreeMap<NodeId, &str> = BTreeMap::new();
    for g in std::iter::once(&tg.base).chain(tg.snapshots.iter().map(|s| &s.graph)) {
        for node in g.nodes() {
            labels.entry(node.id).or_insert(node.label.as_str());
        }
    }
    let mut records = Vec::new();
    for (t, snap) in tg.snapshots.iter().enumerate() {
        let mut cells: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for e in snap.graph.edges() {
            let (i, j) = (index[&e.a], index[&e.b]);
            *cells.entry((i.min(j), i.max(j))).or_insert(0.0) += e.weight;
        }
        records.extend(
            cells
                .into_iter()
                .map(|((i, j), w)| TensorRecord { t, i, j, w }),
        );
    }
    let manifest = TensorManifest {
        t: tg.snapshots.len(),
        n: index.len(),
        timestamps: tg.snapshots.iter().map(|s| s.timestamp).collect(),
        node_index: index
            .iter()
            .map(|(id, &i)| IndexEntry {
                index: i,
                node_id: id.to_string(),
                label: labels.get(id).copied().unwrap_or_default().to_string(),
            })
            .collect(),
    };
    AdjacencyTensor { manifest, records }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlattenMode {
    /// Base graph plus every dynamic edge, weighted by the fraction of
    /// snapshots containing it.
    Union,
    Slice(usize),
}

impl FromStr for FlattenMode {
    type Err = String;

    /// `union` or `slice:<t>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "union" => Ok(FlattenMode::Union),
            other => other
                .strip_prefix("slice:")
                .and_then(|t| t.parse().ok())
                .map(FlattenMode::Slice)
                .ok_or_else(|| format!("invalid flatten mode {other:?} (union|slice:<t>)")),
        }
    }
}

impl fmt::Display for FlattenMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FlattenMode::Union => f.write_str("union"),
            FlattenMode::Slice(t) => write!(f, "slice:{t}"),
        }
    }
}

pub fn flatten(tg: &TemporalGraph, mode: FlattenMode) -> Result<PropertyGraph, TemporalError> {
    match mode {
        FlattenMode::Slice(index) => {
            tg.snapshots
                .get(index)
                .map(|s| s.graph.clone())
                .ok_or(TemporalError::SliceOutOfRange {
                    index,
                    len: tg.snapshots.len(),
                })
        }
        FlattenMode::Union => {
            if tg.snapshots.is_empty() {
                return Err(TemporalError::SliceOutOfRange { index: 0, len: 0 });
            }
            let base_keys: BTreeSet<(NodeId, NodeId, &str)> =
                tg.base.edges().iter().map(Edge::key).collect();
            let mut graph = tg.base.clone();

            // Latest observed attributes win.
            for snap in &tg.snapshots {
                for node in snap.graph.nodes() {
                    match graph.node_mut(&node.id) {
                        Some(existing) => existing
                            .attributes
                            .extend(node.attributes.iter().map(|(k, v)| (k.clone(), v.clone()))),
                        None => graph.add_node(node.clone())?,
                    }
                }
            }

            let mut order: Vec<&Edge> = Vec::new();
            let mut counts: HashMap<(NodeId, NodeId, &str), usize> = HashMap::new();
            for snap in &tg.snapshots {
                let mut seen = BTreeSet::new();
                for e in snap.graph.edges() {
                    let key = e.key();
                    if base_keys.contains(&key) || !seen.insert(key) {
                        continue;
                    }
                    let count = counts.entry(key).or_insert(0);
                    if *count == 0 {
                        order.push(e);
                    }
                    *count += 1;
                }
            }
            let total = tg.snapshots.len() as f64;
            for e in order {
                let mut edge = e.clone();
                edge.weight = counts[&e.key()] as f64 / total;
                graph.add_edge(edge)?;
            }
            Ok(graph)
        }
    }
}

/// Writes the temporal store: a `G<TAB>base` section followed by one
/// `G<TAB>snapshot<TAB>timestamp` section per snapshot, each holding graph
/// text records.
pub fn write_temporal<W: Write>(tg: &TemporalGraph, out: &mut W) -> io::Result<()> {
    let mut section = |header: String, g: &PropertyGraph| -> io::Result<()> {
        writeln!(out, "{header}")?;
        for n in g.nodes() {
            write_node_line(n, out)?;
        }
        for e in g.edges() {
            write_edge_line(e, out)?;
        }
        Ok(())
    };
    section("G\tbase".into(), &tg.base)?;
    for s in &tg.snapshots {
        section(format!("G\tsnapshot\t{}", s.timestamp), &s.graph)?;
    }
    Ok(())
}

type Section = (Option<u64>, Vec<(usize, crate::graph::io::Record)>);

pub fn read_temporal<R: BufRead>(input: R) -> Result<TemporalGraph, TemporalError> {
    let mut sections: Vec<Section> = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("G\t") {
            let header = if rest == "base" {
                None
            } else {
                let ts = rest
                    .strip_prefix("snapshot\t")
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| {
                        TemporalError::Format(format!("line {line_no}: bad section header"))
                    })?;
                Some(ts)
            };
            if header.is_none() && !sections.is_empty() {
                return Err(TemporalError::Format(format!(
                    "line {line_no}: base section must come first"
                )));
            }
            sections.push((header, Vec::new()));
            continue;
        }
        let Some((_, records)) = sections.last_mut() else {
            return Err(TemporalError::Format(format!(
                "line {line_no}: record before any section header"
            )));
        };
        records.push((line_no, parse_record(&line, line_no)?));
    }
    let mut iter = sections.into_iter();
    let base = match iter.next() {
        Some((None, records)) => assemble(records)?,
        _ => return Err(TemporalError::Format("missing base section".into())),
    };
    let snapshots = iter
        .map(|(ts, records)| {
            Ok(Snapshot {
                timestamp: ts.expect("only the first section is base"),
                graph: assemble(records)?,
            })
        })
        .collect::<Result<Vec<_>, TemporalError>>()?;
    TemporalGraph::new(base, snapshots)
}

fn node_or_bare(text: &str, bare: fn(u64) -> NodeId) -> Result<NodeId, String> {
    let text = text.trim();
    match text.parse::<u64>() {
        Ok(n) => Ok(bare(n)),
        Err(_) => text.parse().map_err(|e: GraphError| e.to_string()),
    }
}

#[derive(Deserialize)]
struct ReadingRow {
    timestamp: u64,
    sensor_id: String,
    channel: String,
    value: f64,
}

#[derive(Deserialize)]
struct FixRow {
    timestamp: u64,
    occupant_id: String,
    space_id: String,
    x: f64,
    y: f64,
    #[serde(default)]
    feedback: Option<String>,
}

/// Reads `timestamp,sensor_id,channel,value` rows. Bare integer ids are
/// sensor ids.
pub fn read_readings<R: Read>(input: R) -> Result<Vec<SensorReading>, TemporalError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut out = Vec::new();
    for (i, row) in rdr.deserialize::<ReadingRow>().enumerate() {
        let fail = |m: String| TemporalError::Format(format!("readings row {}: {m}", i + 1));
        let row = row.map_err(|e| fail(e.to_string()))?;
        if row.channel.is_empty() {
            return Err(fail("empty channel".into()));
        }
        if !row.value.is_finite() {
            return Err(fail("non-finite value".into()));
        }
        out.push(SensorReading {
            sensor_node: node_or_bare(&row.sensor_id, NodeId::Sensor).map_err(fail)?,
            timestamp: row.timestamp,
            channel: row.channel,
            value: row.value,
        });
    }
    Ok(out)
}

/// Reads `timestamp,occupant_id,space_id,x,y,feedback` rows; the feedback
/// column may be empty or absent.
pub fn read_fixes<R: Read>(input: R) -> Result<Vec<OccupantFix>, TemporalError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(input);
    let mut out = Vec::new();
    for (i, row) in rdr.deserialize::<FixRow>().enumerate() {
        let fail = |m: String| TemporalError::Format(format!("fixes row {}: {m}", i + 1));
        let row = row.map_err(|e| fail(e.to_string()))?;
        let feedback = match row.feedback.as_deref().map(str::trim) {
            None | Some("") => None,
            Some(text) => Some(text.parse().map_err(fail)?),
        };
        out.push(OccupantFix {
            occupant_node: node_or_bare(&row.occupant_id, NodeId::Occupant).map_err(fail)?,
            timestamp: row.timestamp,
            space_node: node_or_bare(&row.space_id, NodeId::Ifc).map_err(fail)?,
            position: (row.x, row.y),
            feedback,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space_grid::{discretize, merge_into, Footprint, Neighborhood};

    const SPACE: NodeId = NodeId::Ifc(5);
    const OCC: NodeId = NodeId::Occupant(1);
    const SENSOR: NodeId = NodeId::Sensor(1);

    fn cell(row: u32, col: u32) -> NodeId {
        NodeId::Cell { space: 5, row, col }
    }

    fn setup() -> (PropertyGraph, DiscretizedSpace) {
        let fp =
            Footprint::new(5, vec![(0.0, 0.0), (4.0, 0.0), (4.0, 4.0), (0.0, 4.0)], 0.0).unwrap();
        let space = discretize(&fp, 1.0, Neighborhood::Rook).unwrap();
        let mut g = PropertyGraph::new();
        g.add_node(Node::new(SPACE, "IFCSPACE")).unwrap();
        g.add_node(Node::new(SENSOR, "SENSOR")).unwrap();
        merge_into(&mut g, &space, true).unwrap();
        crate::space_grid::attach_fixed_node(&mut g, &space, SENSOR, (0.5, 0.5), 0.0).unwrap();
        (g, space)
    }

    fn fix(t: u64, x: f64, y: f64, feedback: Option<Feedback>) -> OccupantFix {
        OccupantFix {
            occupant_node: OCC,
            timestamp: t,
            space_node: SPACE,
            position: (x, y),
            feedback,
        }
    }

    fn cfg(step: u64) -> SnapshotConfig {
        SnapshotConfig {
            step,
            occupant_radius: Some(0.0),
            max_gap: 10,
        }
    }

    #[test]
    fn one_hot_encoding() {
        assert_eq!(Feedback::Comfortable.one_hot(), [1.0, 0.0, 0.0]);
        assert_eq!(Feedback::Uncomfortable.one_hot(), [0.0, 1.0, 0.0]);
        assert_eq!(Feedback::Neutral.one_hot(), [0.0, 0.0, 1.0]);
        for fb in Feedback::ALL {
            assert_eq!(Feedback::from_one_hot(&fb.one_hot()), Some(fb));
        }
        assert_eq!(Feedback::from_one_hot(&[1.0, 1.0, 0.0]), None);
    }

    #[test]
    fn occupant_moves_between_snapshots() {
        let (g, space) = setup();
        let fixes = [fix(0, 0.5, 0.5, None), fix(60, 3.5, 3.5, None)];
        let tg = build_snapshots(&g, &[space], &[], &fixes, &cfg(60)).unwrap();
        assert_eq!(tg.len(), 2);
        let s0 = &tg.snapshots()[0].graph;
        let s1 = &tg.snapshots()[1].graph;
        assert!(s0.has_edge(OCC, cell(0, 0), EDGE_AT));
        assert!(!s0.has_edge(OCC, cell(3, 3), EDGE_AT));
        assert!(s1.has_edge(OCC, cell(3, 3), EDGE_AT));
        assert!(!s1.has_edge(OCC, cell(0, 0), EDGE_AT));
        assert_eq!(tg.snapshots()[1].timestamp, 60);
    }

    #[test]
    fn sensor_only_timeline() {
        let (g, space) = setup();
        let readings = [SensorReading {
            sensor_node: SENSOR,
            timestamp: 100,
            channel: "temperature".into(),
            value: 24.5,
        }];
        let tg = build_snapshots(&g, &[space], &readings, &[], &cfg(300)).unwrap();
        assert_eq!(tg.len(), 1);
        let s = &tg.snapshots()[0].graph;
        assert_eq!(
            s.node(&SENSOR).unwrap().attributes["temperature"],
            AttrValue::Real(24.5)
        );
        assert_eq!(s.edges(), g.edges());
    }

    #[test]
    fn feedback_attribute_is_one_hot() {
        let (g, space) = setup();
        let fixes = [fix(0, 1.5, 1.5, Some(Feedback::Uncomfortable))];
        let tg = build_snapshots(&g, &[space], &[], &fixes, &cfg(60)).unwrap();
        assert_eq!(
            tg.snapshots()[0].graph.node(&OCC).unwrap().attributes["feedback"],
            AttrValue::Vector(vec![0.0, 1.0, 0.0])
        );
    }

    #[test]
    fn carry_forward_is_capped() {
        let (g, space) = setup();
        let fixes = [fix(0, 0.5, 0.5, Some(Feedback::Neutral))];
        let readings = [SensorReading {
            sensor_node: SENSOR,
            timestamp: 400,
            channel: "co2".into(),
            value: 500.0,
        }];
        let config = SnapshotConfig {
            max_gap: 2,
            ..cfg(100)
        };
        let tg = build_snapshots(&g, &[space], &readings, &fixes, &config).unwrap();
        assert_eq!(tg.len(), 5);
        let present: Vec<bool> = tg
            .snapshots()
            .iter()
            .map(|s| s.graph.has_edge(OCC, cell(0, 0), EDGE_AT))
            .collect();
        assert_eq!(present, vec![true, true, true, false, false]);
        // Feedback is an event, not carried.
        assert!(tg.snapshots()[1]
            .graph
            .node(&OCC)
            .unwrap()
            .attributes
            .is_empty());
    }

    #[test]
    fn latest_fix_in_window_wins_regardless_of_input_order() {
        let (g, space) = setup();
        let a = [fix(10, 3.5, 3.5, None), fix(5, 0.5, 0.5, None)];
        let b = [fix(5, 0.5, 0.5, None), fix(10, 3.5, 3.5, None)];
        let ta = build_snapshots(&g, &[space.clone()], &[], &a, &cfg(60)).unwrap();
        let tb = build_snapshots(&g, &[space], &[], &b, &cfg(60)).unwrap();
        assert_eq!(ta, tb);
        assert!(ta.snapshots()[0].graph.has_edge(OCC, cell(3, 3), EDGE_AT));
        assert!(!ta.snapshots()[0].graph.has_edge(OCC, cell(0, 0), EDGE_AT));
    }

    #[test]
    fn errors() {
        let (g, space) = setup();
        let spaces = [space];
        assert!(matches!(
            build_snapshots(&g, &spaces, &[], &[], &cfg(60)),
            Err(TemporalError::EmptyTimeline)
        ));
        let bad = [SensorReading {
            sensor_node: NodeId::Sensor(99),
            timestamp: 0,
            channel: "co2".into(),
            value: 1.0,
        }];
        assert!(matches!(
            build_snapshots(&g, &spaces, &bad, &[], &cfg(60)),
            Err(TemporalError::UnknownNode(NodeId::Sensor(99)))
        ));
        assert!(matches!(
            build_snapshots(&g, &spaces, &[], &[fix(0, 1.0, 1.0, None)], &cfg(0)),
            Err(TemporalError::InvalidStep)
        ));
    }

    #[test]
    fn tensor_and_flatten() {
        let (g, space) = setup();
        let fixes = [fix(0, 0.5, 0.5, None), fix(60, 3.5, 3.5, None)];
        let tg = build_snapshots(&g, &[space], &[], &fixes, &cfg(60)).unwrap();
        let tensor = adjacency_tensor(&tg);
        assert_eq!(tensor.manifest.t, 2);
        assert_eq!(tensor.manifest.n, g.node_count() + 1);
        let occ = tg.node_index()[&OCC];
        let a = tg.node_index()[&cell(0, 0)];
        let b = tg.node_index()[&cell(3, 3)];
        let occ_records: Vec<_> = tensor
            .records
            .iter()
            .filter(|r| r.i == occ || r.j == occ)
            .map(|r| (r.t, r.i.min(r.j), r.i.max(r.j), r.w))
            .collect();
        assert_eq!(
            occ_records,
            vec![
                (0, a.min(occ), a.max(occ), 1.0),
                (1, b.min(occ), b.max(occ), 1.0)
            ]
        );
        for slice in tensor.to_dense() {
            for i in 0..slice.len() {
                assert_eq!(slice[i][i], 0.0);
                for j in 0..slice.len() {
                    assert_eq!(slice[i][j], slice[j][i]);
                }
            }
        }

        let union = flatten(&tg, FlattenMode::Union).unwrap();
        let at = |c| {
            union
                .edges()
                .iter()
                .find(|e| e.key() == (c, OCC, EDGE_AT))
                .map(|e| e.weight)
        };
        assert_eq!(at(cell(0, 0)), Some(0.5));
        assert_eq!(at(cell(3, 3)), Some(0.5));
        assert!(matches!(
            flatten(&tg, FlattenMode::Slice(5)),
            Err(TemporalError::SliceOutOfRange { index: 5, len: 2 })
        ));
        assert_eq!(
            flatten(&tg, FlattenMode::Slice(1)).unwrap(),
            tg.snapshots()[1].graph
        );
    }

    #[test]
    fn union_of_single_snapshot_is_that_snapshot() {
        let (g, space) = setup();
        let readings = [SensorReading {
            sensor_node: SENSOR,
            timestamp: 0,
            channel: "temperature".into(),
            value: 22.0,
        }];
        let fixes = [fix(0, 2.0, 2.0, Some(Feedback::Comfortable))];
        let tg = build_snapshots(&g, &[space], &readings, &fixes, &cfg(60)).unwrap();
        let union = flatten(&tg, FlattenMode::Union).unwrap();
        assert_eq!(
            union.canonical_text(),
            tg.snapshots()[0].graph.canonical_text()
        );
    }

    #[test]
    fn store_round_trip() {
        let (g, space) = setup();
        let fixes = [
            fix(0, 0.5, 0.5, Some(Feedback::Neutral)),
            fix(60, 3.5, 3.5, None),
        ];
        let tg = build_snapshots(&g, &[space], &[], &fixes, &cfg(60)).unwrap();
        let mut buf = Vec::new();
        write_temporal(&tg, &mut buf).unwrap();
        assert_eq!(read_temporal(buf.as_slice()).unwrap(), tg);
    }

    #[test]
    fn csv_readers() {
        let readings = read_readings(
            "timestamp,sensor_id,channel,value\n0,1,temperature,24.5\n60,sensor:2,co2,410\n"
                .as_bytes(),
        )
        .unwrap();
        assert_eq!(readings[0].sensor_node, NodeId::Sensor(1));
        assert_eq!(readings[1].sensor_node, NodeId::Sensor(2));
        let fixes = read_fixes(
            "timestamp,occupant_id,space_id,x,y,feedback\n0,1,5,0.5,0.5,\n60,1,5,1.5,1.5,uncomfortable\n"
                .as_bytes(),
        )
        .unwrap();
        assert_eq!(fixes[0].feedback, None);
        assert_eq!(fixes[1].feedback, Some(Feedback::Uncomfortable));
        assert_eq!(fixes[1].space_node, NodeId::Ifc(5));
        assert!(read_fixes(
            "timestamp,occupant_id,space_id,x,y,feedback\n0,1,5,0,0,hot\n".as_bytes()
        )
        .is_err());
    }

    #[test]
    fn flatten_mode_text() {
        assert_eq!("union".parse::<FlattenMode>().unwrap(), FlattenMode::Union);
        assert_eq!(
            "slice:3".parse::<FlattenMode>().unwrap(),
            FlattenMode::Slice(3)
        );
        assert_eq!(FlattenMode::Slice(3).to_string(), "slice:3");
        assert!("slice:x".parse::<FlattenMode>().is_err());
    }
}
