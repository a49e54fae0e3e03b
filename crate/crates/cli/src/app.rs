//! Command-line surface: argument parsing, config resolution and dispatch.

use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::commands::{self, EmbedOutputs, EmbedSource, SnapshotInputs};
use crate::config::RunConfig;
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "build2vec",
    version,
    about = "Building graphs and node embeddings from IFC models"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse a STEP/IFC file and print a summary.
    Parse(ParseArgs),
    /// Build the building graph from an IFC file, footprints and sensors.
    Graph(GraphArgs),
    /// Build time-windowed snapshots and the adjacency tensor.
    Snapshot(SnapshotArgs),
    /// Generate walks, train embeddings and write a checkpoint.
    Embed(EmbedArgs),
    /// List the nearest neighbours of a node.
    Query(QueryArgs),
    /// Predict a comfort label for a node from labeled neighbours.
    Predict(PredictArgs),
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// Config file of key=value lines; flags override its values.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ParseArgs {
    /// STEP (ISO 10303-21) file.
    pub ifc: PathBuf,
    /// Write the re-serialized entity table here.
    #[arg(long, value_name = "FILE")]
    pub dump: Option<PathBuf>,
}

#[derive(Debug, Args, Default)]
pub struct IfcOpts {
    /// Fail on dangling references and unplaceable anchors/sensors.
    #[arg(long, value_name = "BOOL")]
    pub strict: Option<bool>,
    /// Relationship rules, comma-separated TYPE:LABEL[:RELATING:RELATED].
    #[arg(long, value_name = "RULES")]
    pub relations: Option<String>,
    /// Entity type prefixes that become graph nodes, comma-separated.
    #[arg(long, value_name = "PREFIXES")]
    pub object_prefixes: Option<String>,
    /// Weight of IFC relationship edges.
    #[arg(long, value_name = "W")]
    pub edge_weight: Option<f64>,
}

#[derive(Debug, Args, Default)]
pub struct GridOpts {
    /// Cell edge length in meters.
    #[arg(long, value_name = "M")]
    pub cell_size: Option<f64>,
    /// Cell adjacency: rook or queen.
    #[arg(long, value_name = "KIND")]
    pub neighborhood: Option<String>,
}

#[derive(Debug, Args)]
pub struct GraphArgs {
    /// IFC model in STEP form.
    pub ifc: PathBuf,
    /// Footprint sidecar (JSON).
    #[arg(long, value_name = "FILE")]
    pub footprints: Option<PathBuf>,
    /// Sensor manifest (JSON).
    #[arg(long, value_name = "FILE")]
    pub sensors: Option<PathBuf>,
    /// Output graph file.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    #[command(flatten)]
    pub ifc_opts: IfcOpts,
    #[command(flatten)]
    pub grid: GridOpts,
    /// Sensor attachment radius in meters (default: one cell).
    #[arg(long, value_name = "M")]
    pub sensor_radius: Option<f64>,
    /// Door/window anchor radius in meters (default: one cell).
    #[arg(long, value_name = "M")]
    pub anchor_radius: Option<f64>,
    /// Link each space to its cells.
    #[arg(long, value_name = "BOOL")]
    pub link_space: Option<bool>,
    #[command(flatten)]
    pub config: ConfigArgs,
}

#[derive(Debug, Args)]
pub struct SnapshotArgs {
    /// Graph file written by `graph`.
    #[arg(long, value_name = "FILE")]
    pub graph: PathBuf,
    /// Footprint sidecar used to build the graph.
    #[arg(long, value_name = "FILE")]
    pub footprints: PathBuf,
    /// Sensor readings CSV.
    #[arg(long, value_name = "FILE")]
    pub readings: Option<PathBuf>,
    /// Occupant fixes CSV.
    #[arg(long, value_name = "FILE")]
    pub fixes: Option<PathBuf>,
    /// Output temporal store.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    /// Directory for the adjacency tensor export.
    #[arg(long, value_name = "DIR")]
    pub tensor_dir: Option<PathBuf>,
    #[command(flatten)]
    pub grid: GridOpts,
    /// Window length in seconds.
    #[arg(long, value_name = "SECS")]
    pub step: Option<u64>,
    /// Occupant attachment radius in meters (default: one cell).
    #[arg(long, value_name = "M")]
    pub occupant_radius: Option<f64>,
    /// Windows an occupant keeps its last cell without a new fix.
    #[arg(long, value_name = "N")]
    pub max_gap: Option<u64>,
    #[command(flatten)]
    pub config: ConfigArgs,
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    /// Static graph file.
    #[arg(
        long,
        value_name = "FILE",
        conflicts_with = "temporal",
        required_unless_present = "temporal"
    )]
    pub graph: Option<PathBuf>,
    /// Temporal store; flattened before walking.
    #[arg(long, value_name = "FILE")]
    pub temporal: Option<PathBuf>,
    /// Flatten mode: union or slice:<t>.
    #[arg(long, value_name = "MODE")]
    pub flatten: Option<String>,
    /// Output checkpoint.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    /// Directory for vectors.tsv and metadata.tsv.
    #[arg(long, value_name = "DIR")]
    pub export_dir: Option<PathBuf>,
    /// Write the walk corpus here.
    #[arg(long, value_name = "FILE")]
    pub walks_out: Option<PathBuf>,
    /// Return parameter.
    #[arg(long, value_name = "P")]
    pub p: Option<f64>,
    /// In-out parameter.
    #[arg(long, value_name = "Q")]
    pub q: Option<f64>,
    /// Nodes per walk.
    #[arg(long, value_name = "N")]
    pub walk_length: Option<usize>,
    /// Walks started from each node.
    #[arg(long, value_name = "N")]
    pub walks_per_node: Option<usize>,
    /// Largest second-order alias table size before falling back to scanning.
    #[arg(long, value_name = "N")]
    pub alias_cap: Option<usize>,
    /// Seed for walks and training.
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
    /// Threads for walk generation (and training when not deterministic).
    #[arg(long, value_name = "N")]
    pub workers: Option<usize>,
    /// Embedding dimension.
    #[arg(long, value_name = "N")]
    pub dimension: Option<usize>,
    /// Context window.
    #[arg(long, value_name = "N")]
    pub window: Option<usize>,
    /// Negative samples per pair.
    #[arg(long, value_name = "N")]
    pub negatives: Option<usize>,
    /// Training passes over the corpus.
    #[arg(long, value_name = "N")]
    pub epochs: Option<usize>,
    /// Starting learning rate.
    #[arg(long, value_name = "LR")]
    pub initial_lr: Option<f64>,
    /// Final learning rate.
    #[arg(long, value_name = "LR")]
    pub min_lr: Option<f64>,
    /// Single-threaded, bit-reproducible training.
    #[arg(long, value_name = "BOOL")]
    pub deterministic: Option<bool>,
    /// Sample the effective window per center.
    #[arg(long, value_name = "BOOL")]
    pub shrink_window: Option<bool>,
    /// Frequent-node subsampling threshold.
    #[arg(long, value_name = "T")]
    pub subsample: Option<f64>,
    #[command(flatten)]
    pub config: ConfigArgs,
}

#[derive(Debug, Args)]
pub struct QueryArgs {
    /// Checkpoint written by `embed`.
    #[arg(long, value_name = "FILE")]
    pub checkpoint: PathBuf,
    /// Node id, e.g. ifc:20 or cell:20:0:1.
    #[arg(long, value_name = "ID")]
    pub node: String,
    /// Number of neighbours.
    #[arg(long, value_name = "K")]
    pub k: Option<usize>,
    /// Only list nodes with these labels (comma-separated).
    #[arg(long, value_name = "LABELS", value_delimiter = ',')]
    pub filter: Vec<String>,
    #[command(flatten)]
    pub config: ConfigArgs,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Checkpoint written by `embed`.
    #[arg(long, value_name = "FILE")]
    pub checkpoint: PathBuf,
    /// Labels CSV (node_id,label).
    #[arg(long, value_name = "FILE")]
    pub labels: PathBuf,
    /// Node to classify.
    #[arg(long, value_name = "ID")]
    pub node: String,
    /// Number of voting neighbours.
    #[arg(long, value_name = "K")]
    pub k: Option<usize>,
    #[command(flatten)]
    pub config: ConfigArgs,
}

fn load_config(args: &ConfigArgs) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &args.config {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
        cfg.apply_text(&text)
            .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    }
    Ok(cfg)
}

/// Applies the flags that were given on the command line.
fn override_with(cfg: &mut RunConfig, flags: &[(&str, Option<String>)]) -> Result<(), CliError> {
    for (key, value) in flags {
        if let Some(v) = value {
            cfg.set(key, v)
                .map_err(|e| CliError::usage(e.to_string()))?;
        }
    }
    Ok(())
}

fn s<T: ToString>(v: &Option<T>) -> Option<String> {
    v.as_ref().map(ToString::to_string)
}

fn grid_flags(g: &GridOpts) -> Vec<(&'static str, Option<String>)> {
    vec![
        ("cell_size", s(&g.cell_size)),
        ("neighborhood", g.neighborhood.clone()),
    ]
}

fn echo(cfg: &RunConfig) {
    for (k, v) in cfg.entries() {
        log::info!("config {k}={v}");
    }
}

/// Resolves config, runs the command and returns its stdout text.
pub fn execute(command: &Command) -> Result<String, CliError> {
    match command {
        Command::Parse(a) => commands::cmd_parse(&a.ifc, a.dump.as_deref()).map(|s| s.render()),
        Command::Graph(a) => {
            let mut cfg = load_config(&a.config)?;
            let mut flags = vec![
                ("strict", s(&a.ifc_opts.strict)),
                ("relations", a.ifc_opts.relations.clone()),
                ("object_prefixes", a.ifc_opts.object_prefixes.clone()),
                ("edge_weight", s(&a.ifc_opts.edge_weight)),
                ("sensor_radius", s(&a.sensor_radius)),
                ("anchor_radius", s(&a.anchor_radius)),
                ("link_space", s(&a.link_space)),
            ];
            flags.extend(grid_flags(&a.grid));
            override_with(&mut cfg, &flags)?;
            echo(&cfg);
            commands::cmd_graph(
                &a.ifc,
                a.footprints.as_deref(),
                a.sensors.as_deref(),
                &a.out,
                &cfg,
            )
            .map(|s| s.render())
        }
        Command::Snapshot(a) => {
            let mut cfg = load_config(&a.config)?;
            let mut flags = vec![
                ("step", s(&a.step)),
                ("occupant_radius", s(&a.occupant_radius)),
                ("max_gap", s(&a.max_gap)),
            ];
            flags.extend(grid_flags(&a.grid));
            override_with(&mut cfg, &flags)?;
            echo(&cfg);
            let inputs = SnapshotInputs {
                graph: &a.graph,
                footprints: &a.footprints,
                readings: a.readings.as_deref(),
                fixes: a.fixes.as_deref(),
            };
            commands::cmd_snapshot(&inputs, &a.out, a.tensor_dir.as_deref(), &cfg).map(|s| {
                format!(
                    "snapshots\t{}\nnodes\t{}\ntensor_records\t{}\n",
                    s.snapshots, s.nodes, s.tensor_records
                )
            })
        }
        Command::Embed(a) => {
            let mut cfg = load_config(&a.config)?;
            override_with(
                &mut cfg,
                &[
                    ("flatten", a.flatten.clone()),
                    ("p", s(&a.p)),
                    ("q", s(&a.q)),
                    ("walk_length", s(&a.walk_length)),
                    ("walks_per_node", s(&a.walks_per_node)),
                    ("alias_cap", s(&a.alias_cap)),
                    ("seed", s(&a.seed)),
                    ("workers", s(&a.workers)),
                    ("dimension", s(&a.dimension)),
                    ("window", s(&a.window)),
                    ("negatives", s(&a.negatives)),
                    ("epochs", s(&a.epochs)),
                    ("initial_lr", s(&a.initial_lr)),
                    ("min_lr", s(&a.min_lr)),
                    ("deterministic", s(&a.deterministic)),
                    ("shrink_window", s(&a.shrink_window)),
                    ("subsample", s(&a.subsample)),
                ],
            )?;
            echo(&cfg);
            let source = match (&a.graph, &a.temporal) {
                (Some(g), None) => EmbedSource::Graph(g),
                (None, Some(t)) => EmbedSource::Temporal(t),
                _ => return Err(CliError::usage("pass exactly one of --graph or --temporal")),
            };
            let outputs = EmbedOutputs {
                checkpoint: &a.out,
                export_dir: a.export_dir.as_deref(),
                walks: a.walks_out.as_deref(),
            };
            commands::cmd_embed(source, &outputs, &cfg).map(|s| {
                let losses: Vec<String> = s.epoch_loss.iter().map(|l| format!("{l:.6}")).collect();
                format!(
                    "vocabulary\t{}\nwalks\t{}\nepoch_loss\t{}\n",
                    s.vocabulary,
                    s.walks,
                    losses.join(",")
                )
            })
        }
        Command::Query(a) => {
            let mut cfg = load_config(&a.config)?;
            override_with(&mut cfg, &[("k", s(&a.k))])?;
            echo(&cfg);
            let node = commands::parse_node(&a.node)?;
            commands::cmd_query(&a.checkpoint, &node, cfg.k, &a.filter)
                .map(|l| commands::render_neighbors(&l))
        }
        Command::Predict(a) => {
            let mut cfg = load_config(&a.config)?;
            override_with(&mut cfg, &[("k", s(&a.k))])?;
            echo(&cfg);
            let node = commands::parse_node(&a.node)?;
            commands::cmd_predict(&a.checkpoint, &a.labels, &node, cfg.k)
                .map(commands::render_prediction)
        }
    }
}

pub fn init_logging() {
    let env = env_logger::Env::new().filter_or("BUILD2VEC_LOG", "info");
    let _ = env_logger::Builder::from_env(env)
        .format_timestamp(None)
        .try_init();
}

/// Full entry point; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    init_logging();
    match execute(&cli.command) {
        Ok(out) => {
            print!("{out}");
            0
        }
        Err(e) => {
            eprintln!("build2vec: {e}");
            e.exit_code()
        }
    }
}
