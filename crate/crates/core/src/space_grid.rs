//! Structured 2D cell grids over space footprints.
//!
//! A footprint is covered by an axis-aligned grid anchored at its bounding
//! box minimum; a cell is kept iff its center lies inside the polygon
//! (boundary inclusive). Kept cells become `CELL` nodes joined by
//! `ADJACENT` edges, and fixed objects (sensors, doors, windows) are tied to
//! nearby cells with `AT` edges.

use std::collections::HashMap;
use std::io::Read;

use log::warn;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{
    AttrValue, GraphError, Node, NodeId, PropertyGraph, EDGE_ADJACENT, EDGE_AT, LABEL_CELL,
};

pub type Point = (f64, f64);

/// Edge label tying a space node to each of its cells.
pub const EDGE_HAS_CELL: &str = "HAS_CELL";

const EPS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("invalid polygon: {0}")]
    InvalidPolygon(String),
    #[error("cell size must be positive and finite, got {0}")]
    InvalidCellSize(f64),
    #[error("no cell within {radius} m of ({}, {}) for {node}", .position.0, .position.1)]
    NoCellInRange {
        node: NodeId,
        position: Point,
        radius: f64,
    },
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("footprint file: {0}")]
    Format(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Footprint {
    pub space_id: u64,
    polygon: Vec<Point>,
    pub elevation: f64,
}

fn signed_area(poly: &[Point]) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| {
            let (x0, y0) = poly[i];
            let (x1, y1) = poly[(i + 1) % n];
            x0 * y1 - x1 * y0
        })
        .sum::<f64>()
        / 2.0
}

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

fn on_segment(p: Point, a: Point, b: Point) -> bool {
    let len = ((b.0 - a.0).powi(2) + (b.1 - a.1).powi(2)).sqrt();
    cross(a, b, p).abs() <= EPS * len.max(1.0)
        && p.0 >= a.0.min(b.0) - EPS
        && p.0 <= a.0.max(b.0) + EPS
        && p.1 >= a.1.min(b.1) - EPS
        && p.1 <= a.1.max(b.1) + EPS
}

fn segments_touch(a: Point, b: Point, c: Point, d: Point) -> bool {
    let d1 = cross(c, d, a);
    let d2 = cross(c, d, b);
    let d3 = cross(a, b, c);
    let d4 = cross(a, b, d);
    if ((d1 > EPS && d2 < -EPS) || (d1 < -EPS && d2 > EPS))
        && ((d3 > EPS && d4 < -EPS) || (d3 < -EPS && d4 > EPS))
    {
        return true;
    }
    on_segment(a, c, d) || on_segment(b, c, d) || on_segment(c, a, b) || on_segment(d, a, b)
}

/// Boundary-inclusive point-in-polygon test (crossing number plus an
/// explicit on-edge check).
pub fn point_in_polygon(p: Point, poly: &[Point]) -> bool {
    let n = poly.len();
    let mut inside = false;
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        if on_segment(p, a, b) {
            return true;
        }
        if (a.1 > p.1) != (b.1 > p.1) {
            let x = a.0 + (p.1 - a.1) * (b.0 - a.0) / (b.1 - a.1);
            if p.0 < x {
                inside = !inside;
            }
        }
    }
    inside
}

impl Footprint {
    /// Validates a simple, counter-clockwise polygon with at least three
    /// vertices. A closing vertex equal to the first is dropped.
    pub fn new(space_id: u64, mut polygon: Vec<Point>, elevation: f64) -> Result<Self, GridError> {
        if polygon.len() > 1 && polygon.first() == polygon.last() {
            polygon.pop();
        }
        if polygon.len() < 3 {
            return Err(GridError::InvalidPolygon(format!(
                "space {space_id}: need at least 3 vertices, got {}",
                polygon.len()
            )));
        }
        if polygon
            .iter()
            .any(|(x, y)| !x.is_finite() || !y.is_finite())
        {
            return Err(GridError::InvalidPolygon(format!(
                "space {space_id}: non-finite coordinate"
            )));
        }
        if let Some((i, j)) = first_self_intersection(&polygon) {
            return Err(GridError::InvalidPolygon(format!(
                "space {space_id}: edges {i} and {j} intersect"
            )));
        }
        let area = signed_area(&polygon);
        if area <= 0.0 {
            return Err(GridError::InvalidPolygon(format!(
                "space {space_id}: signed area {area} is not positive (vertices must be counter-clockwise)"
            )));
        }
        Ok(Footprint {
            space_id,
            polygon,
            elevation,
        })
    }

    pub fn polygon(&self) -> &[Point] {
        &self.polygon
    }

    pub fn space_node(&self) -> NodeId {
        NodeId::Ifc(self.space_id)
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.polygon)
    }

    fn bounds(&self) -> (Point, Point) {
        let mut lo = (f64::INFINITY, f64::INFINITY);
        let mut hi = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for &(x, y) in &self.polygon {
            lo = (lo.0.min(x), lo.1.min(y));
            hi = (hi.0.max(x), hi.1.max(y));
        }
        (lo, hi)
    }
}

/// Indices of the first pair of edges that intersect improperly.
fn first_self_intersection(poly: &[Point]) -> Option<(usize, usize)> {
    let n = poly.len();
    let seg = |i: usize| (poly[i], poly[(i + 1) % n]);
    for i in 0..n {
        let (a, b) = seg(i);
        if a == b {
            return Some((i, i));
        }
        for j in i + 1..n {
            let (c, d) = seg(j);
            let adjacent_next = j == i + 1;
            let adjacent_wrap = i == 0 && j == n - 1;
            if adjacent_next {
                // Shared vertex b == c; overlap if either far end lies on the other edge.
                if on_segment(d, a, b) || on_segment(a, c, d) {
                    return Some((i, j));
                }
            } else if adjacent_wrap {
                // Shared vertex a == d.
                if on_segment(c, a, b) || on_segment(b, c, d) {
                    return Some((i, j));
                }
            } else if segments_touch(a, b, c, d) {
                return Some((i, j));
            }
        }
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Neighborhood {
    /// 4-neighbour adjacency.
    #[default]
    Rook,
    /// 8-neighbour adjacency.
    Queen,
}

impl std::str::FromStr for Neighborhood {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rook" => Ok(Neighborhood::Rook),
            "queen" => Ok(Neighborhood::Queen),
            other => Err(format!("unknown neighborhood {other:?} (rook|queen)")),
        }
    }
}

impl std::fmt::Display for Neighborhood {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Neighborhood::Rook => "rook",
            Neighborhood::Queen => "queen",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridCell {
    pub id: NodeId,
    pub space_node: NodeId,
    pub row: u32,
    pub col: u32,
    pub center: Point,
}

#[derive(Debug, Clone)]
pub struct DiscretizedSpace {
    pub footprint: Footprint,
    pub cell_size: f64,
    origin: Point,
    rows: u32,
    cols: u32,
    /// Kept cells in (row, col) order.
    pub cells: Vec<GridCell>,
    pub adjacency: Vec<(NodeId, NodeId)>,
    /// Footprint area is smaller than one cell.
    pub degenerate: bool,
    index: HashMap<(u32, u32), usize>,
}

pub fn discretize(
    footprint: &Footprint,
    cell_size: f64,
    neighborhood: Neighborhood,
) -> Result<DiscretizedSpace, GridError> {
    if !(cell_size.is_finite() && cell_size > 0.0) {
        return Err(GridError::InvalidCellSize(cell_size));
    }
    let (lo, hi) = footprint.bounds();
    let span = |extent: f64| ((extent / cell_size) - EPS).ceil().max(1.0) as u32;
    let cols = span(hi.0 - lo.0);
    let rows = span(hi.1 - lo.1);

    let space_id = footprint.space_id;
    let mut cells = Vec::new();
    let mut index = HashMap::new();
    for row in 0..rows {
        for col in 0..cols {
            let center = (
                lo.0 + (col as f64 + 0.5) * cell_size,
                lo.1 + (row as f64 + 0.5) * cell_size,
            );
            if point_in_polygon(center, footprint.polygon()) {
                index.insert((row, col), cells.len());
                cells.push(GridCell {
                    id: NodeId::Cell {
                        space: space_id,
                        row,
                        col,
                    },
                    space_node: footprint.space_node(),
                    row,
                    col,
                    center,
                });
            }
        }
    }

    let offsets: &[(i64, i64)] = match neighborhood {
        Neighborhood::Rook => &[(0, 1), (1, 0)],
        Neighborhood::Queen => &[(0, 1), (1, -1), (1, 0), (1, 1)],
    };
    let mut adjacency = Vec::new();
    for cell in &cells {
        for &(dr, dc) in offsets {
            let (r, c) = (cell.row as i64 + dr, cell.col as i64 + dc);
            if r < 0 || c < 0 {
                continue;
            }
            if let Some(&j) = index.get(&(r as u32, c as u32)) {
                adjacency.push((cell.id, cells[j].id));
            }
        }
    }

    let degenerate = footprint.area() < cell_size * cell_size;
    if degenerate {
        warn!(
            "space {space_id}: footprint area {} is below one cell ({cell_size} m); {} cell(s) kept",
            footprint.area(),
            cells.len()
        );
    }
    Ok(DiscretizedSpace {
        footprint: footprint.clone(),
        cell_size,
        origin: lo,
        rows,
        cols,
        cells,
        adjacency,
        degenerate,
        index,
    })
}

impl DiscretizedSpace {
    pub fn space_node(&self) -> NodeId {
        self.footprint.space_node()
    }

    pub fn cell(&self, row: u32, col: u32) -> Option<&GridCell> {
        self.index.get(&(row, col)).map(|&i| &self.cells[i])
    }

    /// Candidate grid indices along one axis; on an interior border both
    /// neighbours are candidates, lower first.
    fn axis_candidates(offset: f64, cell_size: f64, count: u32) -> Vec<u32> {
        let f = offset / cell_size;
        let nearest = f.round();
        let raw: Vec<i64> = if (f - nearest).abs() <= EPS {
            vec![nearest as i64 - 1, nearest as i64]
        } else {
            vec![f.floor() as i64]
        };
        raw.into_iter()
            .filter(|&i| i >= 0 && i < count as i64)
            .map(|i| i as u32)
            .collect()
    }

    /// The kept cell whose square contains `point`; border points resolve to
    /// the lowest (row, col) among the kept cells touching them.
    pub fn locate_cell(&self, point: Point) -> Option<&GridCell> {
        let rows = Self::axis_candidates(point.1 - self.origin.1, self.cell_size, self.rows);
        let cols = Self::axis_candidates(point.0 - self.origin.0, self.cell_size, self.cols);
        rows.iter()
            .flat_map(|&r| cols.iter().map(move |&c| (r, c)))
            .find_map(|(r, c)| self.cell(r, c))
    }

    /// Kept cells whose center lies within `radius` of `point`.
    pub fn cells_within(&self, point: Point, radius: f64) -> Vec<&GridCell> {
        self.cells
            .iter()
            .filter(|c| {
                let d = ((c.center.0 - point.0).powi(2) + (c.center.1 - point.1).powi(2)).sqrt();
                d <= radius + EPS
            })
            .collect()
    }

    /// Cells an object at `position` attaches to: those within `radius` plus
    /// the containing cell, ascending by id.
    pub fn attachment_cells(&self, position: Point, radius: f64) -> Vec<NodeId> {
        let mut ids: Vec<NodeId> = self
            .cells_within(position, radius)
            .into_iter()
            .chain(self.locate_cell(position))
            .map(|c| c.id)
            .collect();
        ids.sort();
        ids.dedup();
        ids
    }
}

pub fn locate_cell(space: &DiscretizedSpace, point: Point) -> Option<&GridCell> {
    space.locate_cell(point)
}

/// Adds the space's cells as `CELL` nodes and its adjacency as `ADJACENT`
/// edges. With `link_space`, the space node gets a `HAS_CELL` edge to every
/// cell.
pub fn merge_into(
    graph: &mut PropertyGraph,
    space: &DiscretizedSpace,
    link_space: bool,
) -> Result<(), GridError> {
    let space_node = space.space_node();
    if link_space && !graph.contains_node(&space_node) {
        return Err(GridError::UnknownNode(space_node));
    }
    for cell in &space.cells {
        graph.add_node(
            Node::new(cell.id, LABEL_CELL)
                .with_attr("space", AttrValue::Int(space.footprint.space_id as i64))
                .with_attr("row", AttrValue::Int(cell.row as i64))
                .with_attr("col", AttrValue::Int(cell.col as i64))
                .with_attr("x", cell.center.0)
                .with_attr("y", cell.center.1),
        )?;
        if link_space {
            graph.connect(space_node, cell.id, EDGE_HAS_CELL, 1.0)?;
        }
    }
    for &(a, b) in &space.adjacency {
        graph.connect(a, b, EDGE_ADJACENT, 1.0)?;
    }
    Ok(())
}

/// Connects `node` to the cells around `position` with `AT` edges of weight
/// 1.0 and returns the cells it was attached to.
pub fn attach_fixed_node(
    graph: &mut PropertyGraph,
    space: &DiscretizedSpace,
    node: NodeId,
    position: Point,
    radius: f64,
) -> Result<Vec<NodeId>, GridError> {
    if !graph.contains_node(&node) {
        return Err(GridError::UnknownNode(node));
    }
    let cells = space.attachment_cells(position, radius);
    if cells.is_empty() {
        return Err(GridError::NoCellInRange {
            node,
            position,
            radius,
        });
    }
    for &cell in &cells {
        if !graph.has_edge(node, cell, EDGE_AT) {
            graph.connect(node, cell, EDGE_AT, 1.0)?;
        }
    }
    Ok(cells)
}

/// An element (door, window, wall) pinned to a position inside a space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Anchor {
    pub element_id: u64,
    pub position: [f64; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
}

/// One entry of the footprint sidecar file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FootprintRecord {
    pub space_id: u64,
    pub polygon: Vec<[f64; 2]>,
    #[serde(default)]
    pub elevation: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub anchors: Vec<Anchor>,
}

impl FootprintRecord {
    /// Validated footprint; clockwise rings are reversed.
    pub fn footprint(&self) -> Result<Footprint, GridError> {
        let mut poly: Vec<Point> = self.polygon.iter().map(|p| (p[0], p[1])).collect();
        if poly.len() >= 3 && signed_area(&poly) < 0.0 {
            poly.reverse();
        }
        Footprint::new(self.space_id, poly, self.elevation)
    }
}

pub fn read_footprints<R: Read>(input: R) -> Result<Vec<FootprintRecord>, GridError> {
    serde_json::from_reader(input).map_err(|e| GridError::Format(e.to_string()))
}

/// One entry of the sensor manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorPlacement {
    pub sensor_id: u64,
    pub space_id: u64,
    pub position: [f64; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub channels: Vec<String>,
}

pub fn read_sensor_manifest<R: Read>(input: R) -> Result<Vec<SensorPlacement>, GridError> {
    serde_json::from_reader(input).map_err(|e| GridError::Format(e.to_string()))
}
