//! Skip-gram with negative sampling over walk corpora.
//!
//! For each center `c` and context `o` inside the window the loss is
//! `-ln σ(u_o·v_c) - Σ_k ln σ(-u_k·v_c)` with `v` the input (embedding)
//! vectors, `u` the output vectors and `k` negatives drawn from the
//! unigram distribution raised to 0.75.

use std::io::{self, Read, Write};
use std::sync::atomic::{AtomicU32, AtomicU64, Ordering};

use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::alias::AliasTable;
use crate::graph::{NodeId, PropertyGraph};
use crate::node2vec::{substream_seed, WalkCorpus};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("walk corpus is empty")]
    EmptyCorpus,
    #[error("all unigram counts are zero")]
    AllZeroCounts,
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("non-finite value in embeddings after epoch {0}")]
    NonFinite(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub dimension: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub initial_lr: f64,
    pub min_lr: f64,
    pub seed: u64,
    /// Single worker, bit-reproducible. Otherwise `workers` threads update
    /// shared vectors without locks.
    pub deterministic: bool,
    pub workers: usize,
    /// Draw the effective window uniformly from `1..=window` per center.
    pub shrink_window: bool,
    /// Frequent-node subsampling threshold; `None` keeps every occurrence.
    pub subsample: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            dimension: 128,
            window: 10,
            negatives: 5,
            epochs: 5,
            initial_lr: 0.025,
            min_lr: 0.0001,
            seed: 42,
            deterministic: true,
            workers: 1,
            shrink_window: true,
            subsample: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::InvalidConfig(m.to_string()));
        if self.dimension < 1 {
            return bad("dimension must be at least 1");
        }
        if self.window < 1 {
            return bad("window must be at least 1");
        }
        if self.negatives < 1 {
            return bad("negatives must be at least 1");
        }
        if self.epochs < 1 {
            return bad("epochs must be at least 1");
        }
        if !(self.initial_lr.is_finite() && self.initial_lr > 0.0) {
            return bad("initial_lr must be positive");
        }
        if !(self.min_lr.is_finite() && self.min_lr >= 0.0 && self.min_lr <= self.initial_lr) {
            return bad("min_lr must lie in [0, initial_lr]");
        }
        if self.workers < 1 {
            return bad("workers must be at least 1");
        }
        if let Some(t) = self.subsample {
            if !(t.is_finite() && t > 0.0) {
                return bad("subsample threshold must be positive");
            }
        }
        Ok(())
    }
}

pub fn sigmoid<F: Float>(x: F) -> F {
    if x >= F::zero() {
        F::one() / (F::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (F::one() + e)
    }
}

/// `ln σ(x)`, stable for large `|x|`.
pub fn log_sigmoid<F: Float>(x: F) -> F {
    if x >= F::zero() {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

fn dot<F: Float>(a: &[F], b: &[F]) -> F {
    a.iter().zip(b).fold(F::zero(), |acc, (&x, &y)| acc + x * y)
}

/// One logistic update of `target` towards `label` given `center`.
/// Accumulates the center's step into `center_step` (applied by the caller)
/// and returns this term's loss.
pub fn logistic_update<F: Float>(
    center: &[F],
    target: &mut [F],
    label: bool,
    lr: F,
    center_step: &mut [F],
) -> F {
    let score = dot(center, target);
    let (y, loss) = if label {
        (F::one(), -log_sigmoid(score))
    } else {
        (F::zero(), -log_sigmoid(-score))
    };
    let g = (y - sigmoid(score)) * lr;
    for ((s, t), &c) in center_step.iter_mut().zip(target.iter_mut()).zip(center) {
        *s = *s + g * *t;
        *t = *t + g * c;
    }
    loss
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub center: Vec<f64>,
    pub context: Vec<f64>,
    pub negatives: Vec<Vec<f64>>,
}

pub fn sgns_loss(center: &[f64], context: &[f64], negatives: &[Vec<f64>]) -> f64 {
    -log_sigmoid(dot(context, center))
        - negatives
            .iter()
            .map(|u| log_sigmoid(-dot(u, center)))
            .sum::<f64>()
}

/// Analytic gradient of [`sgns_loss`], computed through the same update
/// routine the trainer uses (a unit-rate step is the negative gradient).
pub fn sgns_gradients(center: &[f64], context: &[f64], negatives: &[Vec<f64>]) -> Gradients {
    let mut step = vec![0.0; center.len()];
    let mut u = context.to_vec();
    logistic_update(center, &mut u, true, 1.0, &mut step);
    let ctx: Vec<f64> = u.iter().zip(context).map(|(a, b)| b - a).collect();
    let negs = negatives
        .iter()
        .map(|n| {
            let mut u = n.clone();
            logistic_update(center, &mut u, false, 1.0, &mut step);
            u.iter().zip(n).map(|(a, b)| b - a).collect()
        })
        .collect();
    Gradients {
        center: step.iter().map(|s| -s).collect(),
        context: ctx,
        negatives: negs,
    }
}

/// Draws dense indices with probability proportional to `count^0.75`.
#[derive(Debug, Clone)]
pub struct NegativeSampler {
    table: AliasTable,
}

impl NegativeSampler {
    pub fn new(counts: &[u64]) -> Result<Self, TrainError> {
        let weights: Vec<f64> = counts.iter().map(|&c| (c as f64).powf(0.75)).collect();
        AliasTable::new(&weights)
            .map(|table| NegativeSampler { table })
            .map_err(|_| TrainError::AllZeroCounts)
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.table.probabilities()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        self.table.sample(rng) as u32
    }
}

/// Learned vectors, row-major, in vocabulary order.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    pub dimension: usize,
    pub vocabulary: Vec<NodeId>,
    /// Category label per row (IFC type for IFC nodes).
    pub labels: Vec<String>,
    pub input: Vec<f32>,
    pub output: Vec<f32>,
}

const MAGIC: &[u8; 8] = b"B2VEMBED";
const VERSION: u32 = 1;

impl EmbeddingMatrix {
    pub fn len(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocabulary.is_empty()
    }

    pub fn vector(&self, row: usize) -> &[f32] {
        &self.input[row * self.dimension..(row + 1) * self.dimension]
    }

    pub fn row_of(&self, id: &NodeId) -> Option<usize> {
        self.vocabulary.binary_search(id).ok()
    }

    /// Takes row labels from the graph's node labels.
    pub fn label_from(&mut self, graph: &PropertyGraph) {
        for (label, id) in self.labels.iter_mut().zip(&self.vocabulary) {
            if let Some(node) = graph.node(id) {
                label.clone_from(&node.label);
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.input.iter().chain(&self.output).all(|x| x.is_finite())
    }

    pub fn write_checkpoint<W: Write>(&self, out: &mut W) -> io::Result<()> {
        out.write_all(MAGIC)?;
        out.write_all(&VERSION.to_le_bytes())?;
        out.write_all(&(self.dimension as u32).to_le_bytes())?;
        out.write_all(&(self.len() as u64).to_le_bytes())?;
        for x in self.input.iter().chain(&self.output) {
            out.write_all(&x.to_le_bytes())?;
        }
        for (id, label) in self.vocabulary.iter().zip(&self.labels) {
            write_str(out, &id.to_string())?;
            write_str(out, label)?;
        }
        Ok(())
    }

    pub fn read_checkpoint<R: Read>(input: &mut R) -> io::Result<Self> {
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(invalid("not an embedding checkpoint"));
        }
        let version = read_u32(input)?;
        if version != VERSION {
            return Err(invalid(&format!(
                "unsupported checkpoint version {version}"
            )));
        }
        let dimension = read_u32(input)? as usize;
        let mut len = [0u8; 8];
        input.read_exact(&mut len)?;
        let len = u64::from_le_bytes(len) as usize;
        let cells = len
            .checked_mul(dimension)
            .ok_or_else(|| invalid("checkpoint size overflow"))?;
        let mut read_rows = || -> io::Result<Vec<f32>> {
            let mut buf = vec![0u8; cells * 4];
            input.read_exact(&mut buf)?;
            Ok(buf
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                .collect())
        };
        let inp = read_rows()?;
        let outp = read_rows()?;
        let mut vocabulary = Vec::with_capacity(len);
        let mut labels = Vec::with_capacity(len);
        for _ in 0..len {
            let id = read_str(input)?;
            vocabulary.push(id.parse().map_err(|e| invalid(&format!("{e}")))?);
            labels.push(read_str(input)?);
        }
        if vocabulary.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("vocabulary is not strictly ascending"));
        }
        Ok(EmbeddingMatrix {
            dimension,
            vocabulary,
            labels,
            input: inp,
            output: outp,
        })
    }
}

fn invalid(msg: &str) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg.to_string())
}

fn write_str<W: Write>(out: &mut W, s: &str) -> io::Result<()> {
    out.write_all(&(s.len() as u32).to_le_bytes())?;
    out.write_all(s.as_bytes())
}

fn read_u32<R: Read>(input: &mut R) -> io::Result<u32> {
    let mut b = [0u8; 4];
    input.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_str<R: Read>(input: &mut R) -> io::Result<String> {
    let len = read_u32(input)? as usize;
    let mut buf = vec![0u8; len];
    input.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|_| invalid("label is not UTF-8"))
}

/// Rows shared between workers. Relaxed atomics make concurrent
/// read-modify-write races benign (updates may be lost, never torn).
struct SharedRows {
    dim: usize,
    data: Vec<AtomicU32>,
}

impl SharedRows {
    fn new(values: Vec<f32>, dim: usize) -> Self {
        SharedRows {
            dim,
            data: values
                .into_iter()
                .map(|x| AtomicU32::new(x.to_bits()))
                .collect(),
        }
    }

    fn load(&self, row: u32, buf: &mut [f32]) {
        let start = row as usize * self.dim;
        for (b, a) in buf.iter_mut().zip(&self.data[start..start + self.dim]) {
            *b = f32::from_bits(a.load(Ordering::Relaxed));
        }
    }

    fn store(&self, row: u32, buf: &[f32]) {
        let start = row as usize * self.dim;
        for (b, a) in buf.iter().zip(&self.data[start..start + self.dim]) {
            a.store(b.to_bits(), Ordering::Relaxed);
        }
    }

    fn into_vec(self) -> Vec<f32> {
        self.data
            .into_iter()
            .map(|a| f32::from_bits(a.into_inner()))
            .collect()
    }
}

struct Trainer<'a> {
    cfg: &'a TrainConfig,
    sampler: &'a NegativeSampler,
    input: SharedRows,
    output: SharedRows,
    keep: Option<Vec<f64>>,
    processed: AtomicU64,
    total: u64,
}

impl Trainer<'_> {
    fn lr(&self) -> f32 {
        let done = self.processed.load(Ordering::Relaxed) as f64 / self.total.max(1) as f64;
        let lr = self.cfg.initial_lr - (self.cfg.initial_lr - self.cfg.min_lr) * done;
        lr.max(self.cfg.min_lr) as f32
    }

    /// Trains on `walks`; returns (summed loss, pair count).
    fn run(&self, walks: &[Vec<u32>], rng: &mut ChaCha8Rng) -> (f64, u64) {
        let dim = self.cfg.dimension;
        let mut center = vec![0f32; dim];
        let mut target = vec![0f32; dim];
        let mut step = vec![0f32; dim];
        let mut kept = Vec::new();
        let (mut loss, mut pairs) = (0f64, 0u64);
        for walk in walks {
            kept.clear();
            match &self.keep {
                None => kept.extend_from_slice(walk),
                Some(keep) => kept.extend(
                    walk.iter()
                        .filter(|&&n| rng.gen::<f64>() < keep[n as usize]),
                ),
            }
            for pos in 0..kept.len() {
                let lr = self.lr();
                self.processed.fetch_add(1, Ordering::Relaxed);
                let b = if self.cfg.shrink_window {
                    rng.gen_range(1..=self.cfg.window)
                } else {
                    self.cfg.window
                };
                let c = kept[pos];
                let lo = pos.saturating_sub(b);
                let hi = (pos + b).min(kept.len() - 1);
                for (ctx_pos, &o) in kept.iter().enumerate().take(hi + 1).skip(lo) {
                    if ctx_pos == pos {
                        continue;
                    }
                    self.input.load(c, &mut center);
                    step.iter_mut().for_each(|s| *s = 0.0);
                    self.output.load(o, &mut target);
                    let mut l = logistic_update(&center, &mut target, true, lr, &mut step) as f64;
                    self.output.store(o, &target);
                    for _ in 0..self.cfg.negatives {
                        let k = self.sampler.sample(rng);
                        if k == o {
                            continue;
                        }
                        self.output.load(k, &mut target);
                        l += logistic_update(&center, &mut target, false, lr, &mut step) as f64;
                        self.output.store(k, &target);
                    }
                    for (v, s) in center.iter_mut().zip(&step) {
                        *v += s;
                    }
                    self.input.store(c, &center);
                    loss += l;
                    pairs += 1;
                }
            }
        }
        (loss, pairs)
    }
}

/// Per-epoch mean loss per center-context pair.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub epoch_loss: Vec<f64>,
}

pub fn train(corpus: &WalkCorpus, cfg: &TrainConfig) -> Result<EmbeddingMatrix, TrainError> {
    train_with_report(corpus, cfg).map(|(m, _)| m)
}

pub fn train_with_report(
    corpus: &WalkCorpus,
    cfg: &TrainConfig,
) -> Result<(EmbeddingMatrix, TrainReport), TrainError> {
    cfg.validate()?;
    if corpus.is_empty() || corpus.vocabulary.is_empty() {
        return Err(TrainError::EmptyCorpus);
    }
    let sampler = NegativeSampler::new(&corpus.counts)?;
    let vocab = corpus.vocabulary.len();
    let dim = cfg.dimension;

    let mut init_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let half = 0.5 / dim as f32;
    let input: Vec<f32> = (0..vocab * dim)
        .map(|_| init_rng.gen_range(-half..half))
        .collect();

    let keep = cfg.subsample.map(|t| {
        let total: u64 = corpus.counts.iter().sum();
        corpus
            .counts
            .iter()
            .map(|&c| {
                let f = c as f64 / total as f64;
                if f == 0.0 {
                    1.0
                } else {
                    ((f / t).sqrt() + 1.0) * t / f
                }
            })
            .collect()
    });
    let centers: u64 = corpus.walks.iter().map(|w| w.len() as u64).sum();
    let trainer = Trainer {
        cfg,
        sampler: &sampler,
        input: SharedRows::new(input, dim),
        output: SharedRows::new(vec![0.0; vocab * dim], dim),
        keep,
        processed: AtomicU64::new(0),
        total: centers * cfg.epochs as u64,
    };

    let workers = if cfg.deterministic { 1 } else { cfg.workers };
    let mut epoch_loss = Vec::with_capacity(cfg.epochs);
    let mut check = vec![0f32; dim];
    for epoch in 0..cfg.epochs {
        let chunk = corpus.walks.len().div_ceil(workers);
        let (loss, pairs) = if workers == 1 {
            let mut rng = ChaCha8Rng::seed_from_u64(substream_seed(cfg.seed, epoch as u64, 0));
            trainer.run(&corpus.walks, &mut rng)
        } else {
            std::thread::scope(|s| {
                let handles: Vec<_> = corpus
                    .walks
                    .chunks(chunk)
                    .enumerate()
                    .map(|(w, walks)| {
                        let trainer = &trainer;
                        s.spawn(move || {
                            let seed = substream_seed(cfg.seed, epoch as u64, w as u64);
                            trainer.run(walks, &mut ChaCha8Rng::seed_from_u64(seed))
                        })
                    })
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("training worker panicked"))
                    .fold((0.0, 0), |a, b| (a.0 + b.0, a.1 + b.1))
            })
        };
        let mean = if pairs == 0 { 0.0 } else { loss / pairs as f64 };
        log::debug!("epoch {epoch}: mean loss {mean:.6} over {pairs} pairs");
        epoch_loss.push(mean);
        for rows in [&trainer.input, &trainer.output] {
            for r in 0..vocab as u32 {
                rows.load(r, &mut check);
                if !check.iter().all(|x| x.is_finite()) {
                    return Err(TrainError::NonFinite(epoch));
                }
            }
        }
    }

    let labels = corpus
        .vocabulary
        .iter()
        .map(|id| id.synthetic_label().unwrap_or_default().to_string())
        .collect();
    Ok((
        EmbeddingMatrix {
            dimension: dim,
            vocabulary: corpus.vocabulary.clone(),
            labels,
            input: trainer.input.into_vec(),
            output: trainer.output.into_vec(),
        },
        TrainReport { epoch_loss },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let h = 1e-4;
        for _ in 0..100 {
            let v = random_vec(&mut rng, 8);
            let u = random_vec(&mut rng, 8);
            let negs: Vec<Vec<f64>> = (0..3).map(|_| random_vec(&mut rng, 8)).collect();
            let g = sgns_gradients(&v, &u, &negs);
            for i in 0..8 {
                let bump = |x: &[f64], d: f64| {
                    let mut y = x.to_vec();
                    y[i] += d;
                    y
                };
                let fd_v = (sgns_loss(&bump(&v, h), &u, &negs)
                    - sgns_loss(&bump(&v, -h), &u, &negs))
                    / (2.0 * h);
                assert!(
                    rel_err(g.center[i], fd_v) < 1e-4,
                    "{} vs {}",
                    g.center[i],
                    fd_v
                );
                let fd_u = (sgns_loss(&v, &bump(&u, h), &negs)
                    - sgns_loss(&v, &bump(&u, -h), &negs))
                    / (2.0 * h);
                assert!(rel_err(g.context[i], fd_u) < 1e-4);
                let mut plus = negs.clone();
                plus[1][i] += h;
                let mut minus = negs.clone();
                minus[1][i] -= h;
                let fd_n = (sgns_loss(&v, &u, &plus) - sgns_loss(&v, &u, &minus)) / (2.0 * h);
                assert!(rel_err(g.negatives[1][i], fd_n) < 1e-4);
            }
        }
    }

    #[test]
    fn log_sigmoid_is_stable() {
        assert!((log_sigmoid(0.0f64) - 0.5f64.ln()).abs() < 1e-15);
        assert!(log_sigmoid(-800.0f64).is_finite());
        assert_eq!(log_sigmoid(800.0f64), 0.0);
        assert!((sigmoid(-800.0f64)).abs() < 1e-300);
    }

    #[test]
    fn negative_sampler_powers() {
        let s = NegativeSampler::new(&[1, 16]).unwrap();
        let p = s.probabilities();
        assert!((p[0] - 1.0 / 9.0).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 100_000;
        let zeros = (0..n).filter(|_| s.sample(&mut rng) == 0).count();
        assert!((zeros as f64 / n as f64 - 1.0 / 9.0).abs() < 0.01);

        let s = NegativeSampler::new(&[0, 3]).unwrap();
        assert!((0..10_000).all(|_| s.sample(&mut rng) == 1));
        assert!(matches!(
            NegativeSampler::new(&[0, 0]),
            Err(TrainError::AllZeroCounts)
        ));
    }

    #[test]
    fn single_point_corpus_keeps_initialization() {
        let corpus = WalkCorpus::from_walks(vec![NodeId::Ifc(1)], vec![vec![0]]);
        let cfg = TrainConfig {
            dimension: 4,
            ..TrainConfig::default()
        };
        let (m, report) = train_with_report(&corpus, &cfg).unwrap();
        assert_eq!(report.epoch_loss, vec![0.0; 5]);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let expected: Vec<f32> = (0..4).map(|_| rng.gen_range(-0.125f32..0.125)).collect();
        assert_eq!(m.input, expected);
        assert_eq!(m.output, vec![0.0; 4]);
    }

    #[test]
    fn empty_corpus_is_rejected() {
        let corpus = WalkCorpus::from_walks(vec![], vec![]);
        assert!(matches!(
            train(&corpus, &TrainConfig::default()),
            Err(TrainError::EmptyCorpus)
        ));
    }

    #[test]
    fn config_validation() {
        let cfg = TrainConfig {
            min_lr: 1.0,
            ..TrainConfig::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = TrainConfig {
            dimension: 0,
            ..TrainConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn checkpoint_round_trip() {
        let m = EmbeddingMatrix {
            dimension: 2,
            vocabulary: vec![
                NodeId::Ifc(3),
                NodeId::Cell {
                    space: 3,
                    row: 0,
                    col: 1,
                },
            ],
            labels: vec!["IFCSPACE".into(), "CELL".into()],
            input: vec![0.5, -1.25, 3.0, f32::MIN_POSITIVE],
            output: vec![0.0, 1.0, 2.0, 3.0],
        };
        let mut buf = Vec::new();
        m.write_checkpoint(&mut buf).unwrap();
        assert_eq!(&buf[..8], MAGIC);
        assert_eq!(
            EmbeddingMatrix::read_checkpoint(&mut buf.as_slice()).unwrap(),
            m
        );
        buf[0] = b'X';
        assert!(EmbeddingMatrix::read_checkpoint(&mut buf.as_slice()).is_err());
    }
}
