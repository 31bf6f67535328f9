use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use mgnn::exp::{clique_communities, PlantedSpec};
use mgnn::mlg::{save_mlg, MlgDocument};

fn mgnn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mgnn")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn spectral_on_k2_plus_empty_layer() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("k2.mlg");
    fs::write(&file, "nodes 2\nlayers 2\ne 0 0 0 1\n").unwrap();
    let out = mgnn(&["spectral", p(&file)]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("layer 0 l0 lambda2 2\n"), "{text}");
    assert!(text.contains("layer 1 l1 lambda2 0\n"), "{text}");
    assert!(text.contains("supra lambda2 0.585786438\n"), "{text}");
    assert!(text.contains("superdiffusive false\n"), "{text}");
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(mgnn(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(mgnn(&["spectral"]).status.code(), Some(2));
    let file = dir.path().join("k2.mlg");
    fs::write(&file, "nodes 2\nlayers 2\ne 0 0 0 1\n").unwrap();
    assert_eq!(mgnn(&["spectral", p(&file), "--coupling", "-1"]).status.code(), Some(2));
    let out = dir.path().join("o");
    assert_eq!(mgnn(&["gen-superdiff", "--step", "0.3", "--out", p(&out)]).status.code(), Some(2));
    assert!(!out.exists(), "validation must precede any output");

    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "task = \"node-clf\"\nlearnin_rate = 0.1\n").unwrap();
    let o = mgnn(&["train", "node-clf", "--config", p(&cfg), "--data", p(&file), "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("learnin_rate"));

    assert_eq!(mgnn(&["spectral", p(&dir.path().join("missing.mlg"))]).status.code(), Some(1));
    fs::write(&file, "nodes 3\nlayers 1\ne 0 5 0 1\n").unwrap();
    let o = mgnn(&["spectral", p(&file)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn help_lists_defaults() {
    let text = stdout(&mgnn(&["gen-superdiff", "--help"]));
    for flag in ["--step", "--train-per", "--test-per", "--coupling", "--seed", "--jobs", "--nodes", "--out"] {
        assert!(text.contains(flag), "{flag} missing from help");
    }
    assert!(text.contains("[default: 0.01]"));
    assert!(stdout(&mgnn(&["spectral", "--help"])).contains("[default: 1]"));
}

#[test]
fn graph_clf_round_trip_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let ds = dir.path().join("ds");
    let gen = mgnn(&["gen-superdiff", "--step", "0.25", "--train-per", "3", "--test-per", "2", "--nodes", "12", "--seed", "5", "--jobs", "2", "--out", p(&ds)]);
    assert!(gen.status.success(), "{}", String::from_utf8_lossy(&gen.stderr));
    let manifest = fs::read_to_string(ds.join("manifest.jsonl")).unwrap();
    assert_eq!(manifest.lines().count(), 6 * (3 + 2));

    let cfg = dir.path().join("g.toml");
    fs::write(&cfg, "task = \"graph-clf\"\nsupra_layers = 2\nhead_dim = 4\nheads = 2\nmax_epochs = 15\npatience = 15\n").unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = mgnn(&["train", "graph-clf", "--config", p(&cfg), "--data", p(&ds), "--out", p(out), "--seed", "3"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["metrics.jsonl", "history.jsonl", "model.ckpt", "model.toml", "summary.txt"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f} differs");
    }

    let ev = dir.path().join("ev");
    let o = mgnn(&["eval", "--checkpoint", p(&a.join("model.ckpt")), "--data", p(&ds), "--out", p(&ev)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let test_lines: Vec<String> =
        fs::read_to_string(a.join("metrics.jsonl")).unwrap().lines().filter(|l| l.contains("\"split\":\"test\"")).map(String::from).collect();
    let eval_lines: Vec<String> = fs::read_to_string(ev.join("metrics.jsonl")).unwrap().lines().map(String::from).collect();
    assert_eq!(eval_lines, test_lines);

    // refuses to clobber a finished run
    let o = mgnn(&["train", "graph-clf", "--config", p(&cfg), "--data", p(&ds), "--out", p(&a)]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn node_and_link_tasks_from_mlg() {
    let dir = tempfile::tempdir().unwrap();
    let (net, labels) = clique_communities(&[10, 8], 2).unwrap();
    let mut doc = MlgDocument::new(net);
    for (i, y) in labels.into_iter().enumerate() {
        doc.labels.insert(i, ["red", "blue"][y].to_string());
    }
    let nodes = dir.path().join("cliques.mlg");
    save_mlg(&doc, &nodes).unwrap();
    let cfg = dir.path().join("n.toml");
    fs::write(&cfg, "task = \"node-clf\"\nsupra_layers = 2\nhead_dim = 4\nheads = 2\nmax_epochs = 30\npatience = 30\nlearning_rate = 0.01\ndropout = 0.0\n").unwrap();
    let run = dir.path().join("n");
    let o = mgnn(&["train", "node-clf", "--config", p(&cfg), "--data", p(&nodes), "--out", p(&run)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("test.accuracy"));
    let o = mgnn(&["eval", "--checkpoint", p(&run.join("model.ckpt")), "--data", p(&nodes)]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), fs::read_to_string(run.join("metrics.jsonl")).unwrap());

    let net = PlantedSpec { n_nodes: 30, n_layers: 2, p_a: 0.6, p_b: 0.4, p_out: 0.05, seed: 2 }.generate().unwrap();
    let links = dir.path().join("planted.mlg");
    save_mlg(&MlgDocument::new(net), &links).unwrap();
    let run = dir.path().join("l");
    let cfg = dir.path().join("l.toml");
    fs::write(&cfg, "task = \"link-pred\"\nsupra_layers = 1\nhead_dim = 4\nheads = 2\nmax_epochs = 10\npatience = 10\n").unwrap();
    let o = mgnn(&["train", "link-pred", "--config", p(&cfg), "--data", p(&links), "--out", p(&run), "--seed", "1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = mgnn(&["eval", "--checkpoint", p(&run.join("model.ckpt")), "--data", p(&links)]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), fs::read_to_string(run.join("metrics.jsonl")).unwrap());
    // a link-pred config cannot drive a node-clf run
    let o = mgnn(&["train", "node-clf", "--config", p(&cfg), "--data", p(&nodes), "--out", p(&dir.path().join("x"))]);
    assert_eq!(o.status.code(), Some(2));
}
