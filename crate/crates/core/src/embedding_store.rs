//! Similarity queries, comfort-label prediction and projector export.

use std::collections::BTreeSet;
use std::fs;
use std::io::{self, BufRead, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::graph::{NodeId, PropertyGraph};
use crate::sgns::EmbeddingMatrix;
use crate::temporal::Feedback;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("cosine similarity of a zero vector")]
    ZeroVector,
    #[error("vector lengths differ: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("node {0} is not in the embedding vocabulary")]
    UnknownNode(NodeId),
    #[error("no labeled examples")]
    NoLabeledExamples,
    #[error("k must be at least 1")]
    InvalidK,
    #[error("{0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub fn cosine<T: Copy + Into<f64>>(a: &[T], b: &[T]) -> Result<f64, StoreError> {
    if a.len() != b.len() {
        return Err(StoreError::DimensionMismatch(a.len(), b.len()));
    }
    let (mut ab, mut aa, mut bb) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        let (x, y): (f64, f64) = (x.into(), y.into());
        ab += x * y;
        aa += x * x;
        bb += y * y;
    }
    if aa == 0.0 || bb == 0.0 {
        return Err(StoreError::ZeroVector);
    }
    Ok((ab / (aa.sqrt() * bb.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeighborList {
    pub query: NodeId,
    /// Descending similarity, ties by ascending id.
    pub neighbors: Vec<(NodeId, f64)>,
}

fn rank(mut scored: Vec<(NodeId, f64)>) -> Vec<(NodeId, f64)> {
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored
}

fn query_row(emb: &EmbeddingMatrix, query: &NodeId) -> Result<usize, StoreError> {
    emb.row_of(query).ok_or(StoreError::UnknownNode(*query))
}

/// Top `k` rows by cosine similarity to `query`, excluding the query itself.
/// With a filter, only rows whose label is in the set are considered. Rows
/// holding a zero vector are skipped.
pub fn knn(
    emb: &EmbeddingMatrix,
    query: &NodeId,
    k: usize,
    filter: Option<&BTreeSet<String>>,
) -> Result<NeighborList, StoreError> {
    if k == 0 {
        return Err(StoreError::InvalidK);
    }
    let q = query_row(emb, query)?;
    let qv = emb.vector(q);
    let mut scored = Vec::new();
    for (row, id) in emb.vocabulary.iter().enumerate() {
        if row == q || filter.is_some_and(|f| !f.contains(&emb.labels[row])) {
            continue;
        }
        match cosine(qv, emb.vector(row)) {
            Ok(s) => scored.push((*id, s)),
            Err(StoreError::ZeroVector) if emb.vector(row).iter().all(|&x| x == 0.0) => {}
            Err(e) => return Err(e),
        }
    }
    let mut neighbors = rank(scored);
    neighbors.truncate(k);
    Ok(NeighborList {
        query: *query,
        neighbors,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LabeledExample {
    pub node: NodeId,
    pub feedback: Feedback,
}

/// Majority vote over the `k` labeled nodes most similar to `query`. Ties go
/// to the larger summed similarity, then to the earlier class. A labeled
/// query node takes part in its own vote.
pub fn predict_comfort(
    emb: &EmbeddingMatrix,
    labeled: &[LabeledExample],
    query: &NodeId,
    k: usize,
) -> Result<Feedback, StoreError> {
    if k == 0 {
        return Err(StoreError::InvalidK);
    }
    if labeled.is_empty() {
        return Err(StoreError::NoLabeledExamples);
    }
    let qv = emb.vector(query_row(emb, query)?);
    let mut scored = Vec::new();
    for ex in labeled {
        let Some(row) = emb.row_of(&ex.node) else {
            log::warn!("labeled node {} is not in the vocabulary; ignored", ex.node);
            continue;
        };
        match cosine(qv, emb.vector(row)) {
            Ok(s) => scored.push((ex.node, s, ex.feedback)),
            Err(StoreError::ZeroVector) if emb.vector(row).iter().all(|&x| x == 0.0) => {}
            Err(e) => return Err(e),
        }
    }
    if scored.is_empty() {
        return Err(StoreError::NoLabeledExamples);
    }
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut votes = [0usize; 3];
    let mut weight = [0f64; 3];
    for (_, s, f) in scored.iter().take(k) {
        votes[f.index()] += 1;
        weight[f.index()] += s;
    }
    let best = (0..3)
        .filter(|&i| votes[i] > 0)
        .fold(None::<usize>, |best, i| match best {
            Some(b) if (votes[b], weight[b]) >= (votes[i], weight[i]) => Some(b),
            _ => Some(i),
        })
        .expect("at least one vote");
    Ok(Feedback::ALL[best])
}

/// Reads `node_id,label` rows, label one of comfortable / uncomfortable /
/// neutral.
pub fn read_labels<R: Read>(input: R) -> Result<Vec<LabeledExample>, StoreError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut out = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let fail = |m: String| StoreError::Format(format!("labels row {}: {m}", i + 1));
        let row = row.map_err(|e| fail(e.to_string()))?;
        if row.len() != 2 {
            return Err(fail(format!("expected 2 fields, found {}", row.len())));
        }
        out.push(LabeledExample {
            node: row[0].parse().map_err(|e| fail(format!("{e}")))?,
            feedback: row[1].parse().map_err(fail)?,
        });
    }
    Ok(out)
}

pub const VECTORS_FILE: &str = "vectors.tsv";
pub const METADATA_FILE: &str = "metadata.tsv";

pub fn write_vectors<W: Write>(emb: &EmbeddingMatrix, out: &mut W) -> io::Result<()> {
    for row in 0..emb.len() {
        let fields: Vec<String> = emb.vector(row).iter().map(|x| x.to_string()).collect();
        writeln!(out, "{}", fields.join("\t"))?;
    }
    Ok(())
}

/// `node_id`, category label and IFC type (empty for synthetic nodes) per row.
pub fn write_metadata<W: Write>(
    emb: &EmbeddingMatrix,
    graph: Option<&PropertyGraph>,
    out: &mut W,
) -> io::Result<()> {
    writeln!(out, "node_id\tlabel\tifc_type")?;
    for (id, stored) in emb.vocabulary.iter().zip(&emb.labels) {
        let label = graph
            .and_then(|g| g.node(id))
            .map_or(stored.as_str(), |n| n.label.as_str());
        let ifc_type = if matches!(id, NodeId::Ifc(_)) {
            label
        } else {
            ""
        };
        writeln!(out, "{id}\t{label}\t{ifc_type}")?;
    }
    Ok(())
}

/// Writes `vectors.tsv` and `metadata.tsv` into `out_dir`.
pub fn export_projector(
    emb: &EmbeddingMatrix,
    graph: Option<&PropertyGraph>,
    out_dir: &Path,
) -> Result<(), StoreError> {
    fs::create_dir_all(out_dir)?;
    let mut vectors = Vec::new();
    write_vectors(emb, &mut vectors)?;
    let mut metadata = Vec::new();
    write_metadata(emb, graph, &mut metadata)?;
    fs::write(out_dir.join(VECTORS_FILE), vectors)?;
    fs::write(out_dir.join(METADATA_FILE), metadata)?;
    Ok(())
}

/// Parses a `vectors.tsv` body into rows.
pub fn read_vectors<R: BufRead>(input: R) -> Result<Vec<Vec<f32>>, StoreError> {
    let mut rows = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let row = line
            .split('\t')
            .map(|f| f.parse::<f32>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| StoreError::Format(format!("vectors line {}: {e}", i + 1)))?;
        if rows
            .first()
            .is_some_and(|r: &Vec<f32>| r.len() != row.len())
        {
            return Err(StoreError::Format(format!(
                "vectors line {}: ragged row",
                i + 1
            )));
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Rebuilds a matrix (input vectors only) from projector files.
pub fn import_projector(dir: &Path) -> Result<EmbeddingMatrix, StoreError> {
    let rows = read_vectors(io::BufReader::new(fs::File::open(dir.join(VECTORS_FILE))?))?;
    let meta = fs::read_to_string(dir.join(METADATA_FILE))?;
    let mut vocabulary = Vec::new();
    let mut labels = Vec::new();
    for (i, line) in meta.lines().skip(1).enumerate() {
        let mut fields = line.split('\t');
        let id = fields.next().unwrap_or_default();
        vocabulary.push(
            id.parse()
                .map_err(|e| StoreError::Format(format!("metadata line {}: {e}", i + 2)))?,
        );
        labels.push(fields.next().unwrap_or_default().to_string());
    }
    if vocabulary.len() != rows.len() {
        return Err(StoreError::Format(format!(
            "{} metadata rows but {} vectors",
            vocabulary.len(),
            rows.len()
        )));
    }
    if vocabulary.windows(2).any(|w: &[NodeId]| w[0] >= w[1]) {
        return Err(StoreError::Format(
            "metadata ids are not strictly ascending".into(),
        ));
    }
    let dimension = rows.first().map_or(0, Vec::len);
    let input: Vec<f32> = rows.into_iter().flatten().collect();
    Ok(EmbeddingMatrix {
        dimension,
        vocabulary,
        labels,
        output: vec![0.0; input.len()],
        input,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(rows: &[(NodeId, &str, [f32; 2])]) -> EmbeddingMatrix {
        EmbeddingMatrix {
            dimension: 2,
            vocabulary: rows.iter().map(|r| r.0).collect(),
            labels: rows.iter().map(|r| r.1.to_string()).collect(),
            input: rows.iter().flat_map(|r| r.2).collect(),
            output: vec![0.0; rows.len() * 2],
        }
    }

    fn ifc(i: u64) -> NodeId {
        NodeId::Ifc(i)
    }

    #[test]
    fn cosine_examples() {
        assert!((cosine(&[3.0f64, -4.0], &[3.0, -4.0]).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(cosine(&[1.0f64, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert!((cosine(&[1.0f64, 0.0], &[1.0, 1.0]).unwrap() - 0.5f64.sqrt()).abs() < 1e-9);
        assert!(matches!(
            cosine(&[0.0f64, 0.0], &[1.0, 0.0]),
            Err(StoreError::ZeroVector)
        ));
    }

    #[test]
    fn knn_examples() {
        let m = matrix(&[
            (ifc(1), "A", [1.0, 0.0]),
            (ifc(2), "A", [0.9, 0.1]),
            (ifc(3), "A", [0.0, 1.0]),
        ]);
        let r = knn(&m, &ifc(1), 1, None).unwrap();
        assert_eq!(r.neighbors.len(), 1);
        assert_eq!(r.neighbors[0].0, ifc(2));
        let all = knn(&m, &ifc(1), 10, None).unwrap();
        assert_eq!(
            all.neighbors.iter().map(|n| n.0).collect::<Vec<_>>(),
            vec![ifc(2), ifc(3)]
        );
        assert!(matches!(
            knn(&m, &ifc(9), 1, None),
            Err(StoreError::UnknownNode(_))
        ));
    }

    #[test]
    fn knn_filter_and_ties() {
        let c = |col| NodeId::Cell {
            space: 1,
            row: 0,
            col,
        };
        let m = matrix(&[
            (ifc(1), "IFCSPACE", [1.0, 0.0]),
            (ifc(2), "IFCWALL", [1.0, 0.0]),
            (c(0), "CELL", [1.0, 1.0]),
            (c(1), "CELL", [2.0, 2.0]),
        ]);
        let filter: BTreeSet<String> = ["CELL".to_string()].into();
        let r = knn(&m, &ifc(1), 5, Some(&filter)).unwrap();
        assert_eq!(
            r.neighbors.iter().map(|n| n.0).collect::<Vec<_>>(),
            vec![c(0), c(1)]
        );
        let r = knn(&m, &c(0), 1, None).unwrap();
        assert_eq!(r.neighbors[0].0, c(1));
    }

    #[test]
    fn majority_vote() {
        let m = matrix(&[
            (ifc(1), "", [1.0, 0.0]),
            (ifc(2), "", [1.0, 0.1]),
            (ifc(3), "", [1.0, 0.2]),
            (ifc(4), "", [1.0, 0.3]),
            (ifc(5), "", [-1.0, 0.0]),
        ]);
        let labeled = [
            LabeledExample {
                node: ifc(2),
                feedback: Feedback::Comfortable,
            },
            LabeledExample {
                node: ifc(3),
                feedback: Feedback::Comfortable,
            },
            LabeledExample {
                node: ifc(4),
                feedback: Feedback::Neutral,
            },
            LabeledExample {
                node: ifc(5),
                feedback: Feedback::Uncomfortable,
            },
        ];
        let p = predict_comfort(&m, &labeled, &ifc(1), 3).unwrap();
        assert_eq!(p.one_hot(), [1.0, 0.0, 0.0]);
        let single = &labeled[3..];
        assert_eq!(
            predict_comfort(&m, single, &ifc(1), 3).unwrap(),
            Feedback::Uncomfortable
        );
        assert!(matches!(
            predict_comfort(&m, &[], &ifc(1), 3),
            Err(StoreError::NoLabeledExamples)
        ));
    }

    #[test]
    fn vote_tie_goes_to_higher_similarity() {
        // cosines to the query: 0.9 and 0.2
        let far = [0.2f32, (1.0f32 - 0.04).sqrt()];
        let near = [0.9f32, (1.0f32 - 0.81).sqrt()];
        let m = matrix(&[
            (ifc(1), "", [1.0, 0.0]),
            (ifc(2), "", far),
            (ifc(3), "", near),
        ]);
        let labeled = [
            LabeledExample {
                node: ifc(2),
                feedback: Feedback::Comfortable,
            },
            LabeledExample {
                node: ifc(3),
                feedback: Feedback::Neutral,
            },
        ];
        assert_eq!(
            predict_comfort(&m, &labeled, &ifc(1), 2).unwrap(),
            Feedback::Neutral
        );
    }

    #[test]
    fn labels_csv() {
        let text = "node_id,label\nifc:4,comfortable\n7,Neutral\n";
        let l = read_labels(text.as_bytes()).unwrap();
        assert_eq!(
            l[1],
            LabeledExample {
                node: ifc(7),
                feedback: Feedback::Neutral
            }
        );
        assert!(read_labels("node_id,label\n1,hot\n".as_bytes()).is_err());
    }

    #[test]
    fn projector_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let m = matrix(&[
            (ifc(1), "IFCDOOR", [0.25, -1.5]),
            (NodeId::Sensor(2), "SENSOR", [1.0e-7, 3.0]),
        ]);
        export_projector(&m, None, dir.path()).unwrap();
        let vectors = fs::read_to_string(dir.path().join(VECTORS_FILE)).unwrap();
        assert_eq!(vectors.lines().count(), 2);
        assert!(vectors.lines().all(|l| l.split('\t').count() == 2));
        let meta = fs::read_to_string(dir.path().join(METADATA_FILE)).unwrap();
        assert_eq!(
            meta,
            "node_id\tlabel\tifc_type\nifc:1\tIFCDOOR\tIFCDOOR\nsensor:2\tSENSOR\t\n"
        );
        let back = import_projector(dir.path()).unwrap();
        assert_eq!(back.input, m.input);
        assert_eq!(back.vocabulary, m.vocabulary);
    }
}
