use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use build2vec_cli::commands::{
    cmd_embed, cmd_graph, cmd_parse, cmd_query, EmbedOutputs, EmbedSource,
};
use build2vec_cli::{ErrorKind, RunConfig};
use build2vec_core::graph::NodeId;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_build2vec"));
    c.env("BUILD2VEC_LOG", "error");
    c
}

fn small() -> RunConfig {
    RunConfig::from_text("walk_length=20\nwalks_per_node=4\ndimension=8\nepochs=2\n").unwrap()
}

fn build_graph(dir: &Path) -> PathBuf {
    let out = dir.join("graph.txt");
    cmd_graph(
        &fixture("two_space.ifc"),
        Some(&fixture("two_space.footprints.json")),
        Some(&fixture("two_space.sensors.json")),
        &out,
        &RunConfig::default(),
    )
    .unwrap();
    out
}

#[test]
fn graph_counts_match_fixture_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("graph.txt");
    let summary = cmd_graph(
        &fixture("two_space.ifc"),
        Some(&fixture("two_space.footprints.json")),
        Some(&fixture("two_space.sensors.json")),
        &out,
        &RunConfig::default(),
    )
    .unwrap();
    let manifest = fs::read_to_string(fixture("two_space.manifest.json")).unwrap();
    let count = |key: &str| -> usize {
        let line = manifest.lines().find(|l| l.contains(key)).unwrap();
        line.split(':')
            .nth(1)
            .unwrap()
            .trim()
            .trim_end_matches(',')
            .parse()
            .unwrap()
    };
    assert_eq!(summary.ifc_objects, count("ifc_objects"));
    assert_eq!(summary.cells, count("cells"));
    assert_eq!(summary.sensors, count("sensors"));
    assert_eq!(
        summary.nodes,
        count("ifc_objects") + count("cells") + count("sensors")
    );
}

#[test]
fn graph_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let a = fs::read(build_graph(dir.path())).unwrap();
    let b = fs::read(build_graph(dir.path())).unwrap();
    assert_eq!(a, b);
}

#[test]
fn strict_mode_rejects_dangling_references() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::default();
    cfg.strict = true;
    let err = cmd_graph(
        &fixture("dangling.ifc"),
        None,
        None,
        &dir.path().join("g"),
        &cfg,
    )
    .unwrap_err();
    assert_eq!(err.kind, ErrorKind::Input);
    let lenient = cmd_graph(
        &fixture("dangling.ifc"),
        None,
        None,
        &dir.path().join("g"),
        &RunConfig::default(),
    );
    assert!(lenient.is_ok());
}

#[test]
fn parse_reports_dangling_pairs() {
    let summary = cmd_parse(&fixture("dangling.ifc"), None).unwrap();
    assert_eq!(
        summary.dangling,
        vec![(2, 90), (3, 91), (3, 92), (4, 91), (4, 93)]
    );
}

#[test]
fn embed_is_reproducible_and_filter_holds() {
    let dir = tempfile::tempdir().unwrap();
    let graph = build_graph(dir.path());
    let mut cfg = small();
    let run = |name: &str, cfg: &RunConfig| {
        let out = dir.path().join(name);
        cmd_embed(
            EmbedSource::Graph(&graph),
            &EmbedOutputs {
                checkpoint: &out,
                export_dir: None,
                walks: None,
            },
            cfg,
        )
        .unwrap();
        fs::read(out).unwrap()
    };
    let first = run("a.bin", &cfg);
    assert_eq!(first, run("b.bin", &cfg));
    cfg.set("workers", "3").unwrap();
    assert_eq!(first, run("c.bin", &cfg));

    let cell = NodeId::Cell {
        space: 20,
        row: 1,
        col: 1,
    };
    let list = cmd_query(&dir.path().join("a.bin"), &cell, 100, &["CELL".into()]).unwrap();
    assert_eq!(list.neighbors.len(), 23);
    assert!(list
        .neighbors
        .iter()
        .all(|(id, _)| matches!(id, NodeId::Cell { .. })));
}

#[test]
fn binary_pipeline_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let status = bin()
        .args(["graph"])
        .arg(fixture("two_space.ifc"))
        .arg("--footprints")
        .arg(fixture("two_space.footprints.json"))
        .arg("--sensors")
        .arg(fixture("two_space.sensors.json"))
        .arg("--out")
        .arg(d.join("g.txt"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));

    let out = bin()
        .args(["snapshot", "--graph"])
        .arg(d.join("g.txt"))
        .arg("--footprints")
        .arg(fixture("two_space.footprints.json"))
        .arg("--readings")
        .arg(fixture("two_space.readings.csv"))
        .arg("--fixes")
        .arg(fixture("two_space.fixes.csv"))
        .arg("--out")
        .arg(d.join("t.txt"))
        .arg("--tensor-dir")
        .arg(d.join("tensor"))
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8_lossy(&out.stdout).contains("snapshots\t2"));
    assert!(d.join("tensor/tensor.csv").exists());

    // Config file plus an overriding flag.
    fs::write(
        d.join("run.cfg"),
        "dimension=4\nwalk_length=10\nwalks_per_node=2\nepochs=1\n",
    )
    .unwrap();
    let status = bin()
        .args(["embed", "--temporal"])
        .arg(d.join("t.txt"))
        .arg("--out")
        .arg(d.join("c.bin"))
        .arg("--export-dir")
        .arg(d.join("proj"))
        .arg("--config")
        .arg(d.join("run.cfg"))
        .args(["--dimension", "6"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let vectors = fs::read_to_string(d.join("proj/vectors.tsv")).unwrap();
    assert_eq!(vectors.lines().next().unwrap().split('\t').count(), 6);
    let metadata = fs::read_to_string(d.join("proj/metadata.tsv")).unwrap();
    assert_eq!(metadata.lines().count(), vectors.lines().count() + 1);

    let out = bin()
        .args(["query", "--checkpoint"])
        .arg(d.join("c.bin"))
        .args(["--node", "cell:21:1:1", "--k", "3", "--filter", "CELL"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("1\tcell:"));

    let out = bin()
        .args(["predict", "--checkpoint"])
        .arg(d.join("c.bin"))
        .arg("--labels")
        .arg(fixture("two_space.labels.csv"))
        .args(["--node", "cell:20:1:2", "--k", "3"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(["[1,0,0]", "[0,1,0]", "[0,0,1]"]
        .iter()
        .any(|v| text.starts_with(v)));

    // Usage errors exit 2, bad input data 3.
    fs::write(d.join("bad.cfg"), "colour=blue\n").unwrap();
    let code = |args: &[&std::ffi::OsStr]| bin().args(args).output().unwrap().status.code();
    let bad_cfg = d.join("bad.cfg");
    let ckpt = d.join("c.bin");
    assert_eq!(
        code(&[
            "query".as_ref(),
            "--checkpoint".as_ref(),
            ckpt.as_os_str(),
            "--node".as_ref(),
            "ifc:20".as_ref(),
            "--config".as_ref(),
            bad_cfg.as_os_str()
        ]),
        Some(2)
    );
    assert_eq!(code(&["embed".as_ref()]), Some(2));
    assert_eq!(
        code(&[
            "query".as_ref(),
            "--checkpoint".as_ref(),
            ckpt.as_os_str(),
            "--node".as_ref(),
            "ifc:999".as_ref()
        ]),
        Some(3)
    );
    assert_eq!(
        code(&["parse".as_ref(), d.join("missing.ifc").as_os_str()]),
        Some(3)
    );
    assert_eq!(
        code(&[
            "query".as_ref(),
            "--checkpoint".as_ref(),
            ckpt.as_os_str(),
            "--node".as_ref(),
            "ifc:20".as_ref(),
            "--k".as_ref(),
            "0".as_ref()
        ]),
        Some(2)
    );
}

#[test]
fn help_documents_every_command() {
    for cmd in ["parse", "graph", "snapshot", "embed", "query", "predict"] {
        let out = bin().args([cmd, "--help"]).output().unwrap();
        assert_eq!(out.status.code(), Some(0));
        assert!(String::from_utf8(out.stdout).unwrap().contains("Usage"));
    }
}
