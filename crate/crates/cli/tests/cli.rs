use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use msi_gnn::graph::Graph;
use msi_gnn::hop::compute_hop_adjacency;
use msi_gnn::igr::{select_columns, LabelStats};
use msi_gnn::split::make_splits;
use ndarray::Array2;
use tempfile::TempDir;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_msi-gnn"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// 30 nodes in two classes: a chain through every node plus a hub (node 0)
/// adjacent to exactly the class-1 nodes. Features one-hot the class plus a
/// node-parity bit.
fn write_dataset(dir: &Path) -> Graph {
    let n = 30;
    let labels: Vec<usize> = (0..n).map(|v| usize::from(v >= 15)).collect();
    let mut edges: Vec<(usize, usize)> = (1..n - 1).map(|v| (v, v + 1)).collect();
    edges.extend((15..n).map(|v| (0, v)));
    let mut x = Array2::zeros((n, 4));
    for v in 0..n {
        x[[v, labels[v]]] = 1.0;
        x[[v, 2 + v % 2]] = 1.0;
    }
    let graph = Graph::new(n, edges, x, labels, 2).unwrap();
    graph.save_canonical(dir).unwrap();
    graph
}

struct Fixture {
    _tmp: TempDir,
    data: PathBuf,
    root: PathBuf,
    graph: Graph,
}

fn fixture() -> Fixture {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("toy");
    let graph = write_dataset(&data);
    Fixture {
        root: tmp.path().to_path_buf(),
        _tmp: tmp,
        data,
        graph,
    }
}

fn write_params(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

const GCN: &str = "model = \"gcn\"\nhidden = 8\nweight_decay = 5e-4\ndropout = 0.5\n";

fn train(fx: &Fixture, out: &Path, seed: &str) -> Output {
    let params = write_params(&fx.root, "gcn.toml", GCN);
    run(&[
        "train",
        "--dataset",
        p(&fx.data),
        "--params-file",
        p(&params),
        "--splits",
        "3",
        "--seed",
        seed,
        "--epochs",
        "60",
        "--patience",
        "20",
        "--out",
        p(out),
    ])
}

#[test]
fn train_writes_one_result_per_split() {
    let fx = fixture();
    let out = fx.root.join("run");
    let o = train(&fx, &out, "0");
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("results.json")).unwrap()).unwrap();
    let splits = json["result"]["splits"].as_array().unwrap();
    assert_eq!(splits.len(), 3);
    assert!(splits.iter().all(|s| s["test_accuracy"].as_f64().is_some()));
    for k in 0..3 {
        assert!(out
            .join("checkpoints")
            .join(format!("split_{k}.ckpt"))
            .is_file());
    }
    let csv = fs::read_to_string(out.join("results.csv")).unwrap();
    assert!(csv.starts_with("dataset,model,mean_acc,std\ntoy,gcn,"));
    assert_eq!(
        fs::read_to_string(out.join("timings.csv"))
            .unwrap()
            .lines()
            .count(),
        4
    );
    assert!(fs::read_to_string(out.join("config.toml"))
        .unwrap()
        .contains("model = \"gcn\""));
}

#[test]
fn same_seed_reproduces_results_exactly() {
    let fx = fixture();
    let (a, b) = (fx.root.join("a"), fx.root.join("b"));
    assert!(train(&fx, &a, "7").status.success());
    assert!(train(&fx, &b, "7").status.success());
    assert_eq!(
        fs::read(a.join("results.json")).unwrap(),
        fs::read(b.join("results.json")).unwrap()
    );
}

#[test]
fn missing_dataset_exits_2_without_output() {
    let fx = fixture();
    let params = write_params(&fx.root, "gcn.toml", GCN);
    let out = fx.root.join("never");
    let o = run(&[
        "train",
        "--dataset",
        p(&fx.root.join("absent")),
        "--params-file",
        p(&params),
        "--out",
        p(&out),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(run(&["train"]).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn failed_runs_exit_3_after_writing_results() {
    let fx = fixture();
    // n above every column's occurrence empties the structural layer
    let params = write_params(
        &fx.root,
        "empty.toml",
        "model = \"msi-gcn\"\nweight_decay = 5e-4\ndropout = 0.5\ndiscount = 0.5\nt = 5\nn = 1000\nc_x = 0\nc_a1 = 1\n",
    );
    let out = fx.root.join("fail");
    let o = run(&[
        "train",
        "--dataset",
        p(&fx.data),
        "--params-file",
        p(&params),
        "--splits",
        "2",
        "--epochs",
        "5",
        "--patience",
        "2",
        "--out",
        p(&out),
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(out.join("results.json").is_file());
}

fn rank(fx: &Fixture, extra: &[&str]) -> Output {
    let mut args = vec!["rank", "--dataset", p(&fx.data)];
    args.extend_from_slice(extra);
    run(&args)
}

#[test]
fn rank_puts_the_separating_column_first() {
    let fx = fixture();
    let o = rank(&fx, &["--all-labeled", "--t", "5"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("node_id,score,occurrence"));
    assert_eq!(lines.next(), Some("0,1,15"));
    assert_eq!(lines.count(), 4);
}

#[test]
fn rank_matches_library_selection() {
    let fx = fixture();
    let out = fx.root.join("rank.csv");
    let o = rank(
        &fx,
        &[
            "--hop",
            "2",
            "--t",
            "8",
            "--split",
            "1",
            "--seed",
            "3",
            "--out",
            p(&out),
        ],
    );
    assert!(o.status.success());
    let cli: Vec<usize> = fs::read_to_string(&out)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap().parse().unwrap())
        .collect();

    let g = &fx.graph;
    let labeled = &make_splits(g, 2, 3).unwrap()[1].train;
    let stats = LabelStats::new(g.labels(), labeled, g.num_classes()).unwrap();
    let hop = compute_hop_adjacency(g, 2).pop().unwrap();
    let lib = select_columns(&hop, g.labels(), &stats, 8, 1).unwrap();
    let lib: Vec<usize> = lib.columns.iter().map(|s| s.column_node).collect();
    assert_eq!(cli, lib);
}

#[test]
fn rank_warns_when_everything_is_filtered() {
    let fx = fixture();
    let o = rank(&fx, &["--n", "1000"]);
    assert!(o.status.success());
    assert_eq!(
        String::from_utf8(o.stdout).unwrap(),
        "node_id,score,occurrence\n"
    );
    assert!(String::from_utf8(o.stderr).unwrap().contains("warning"));
}

fn read_matrix(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines
        .map(|l| l.split(',').skip(2).map(|v| v.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

#[test]
fn identity_export_equals_the_features() {
    let fx = fixture();
    let params = write_params(
        &fx.root,
        "id.toml",
        "model = \"msi-gcn\"\nweight_decay = 5e-4\ndropout = 0.5\ndiscount = 0.5\nt = 5\nc_x = 1\nc_a1 = 0\n",
    );
    let out = fx.root.join("export");
    let o = run(&[
        "export-embeddings",
        "--dataset",
        p(&fx.data),
        "--params-file",
        p(&params),
        "--out",
        p(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = read_matrix(&out.join("msi_layer.csv"));
    assert_eq!(header, ["node_id", "label", "d0", "d1", "d2", "d3"]);
    let want: Vec<Vec<f64>> = fx
        .graph
        .features()
        .rows()
        .into_iter()
        .map(|r| r.to_vec())
        .collect();
    assert_eq!(rows, want);
    assert!(!out.join("logits.csv").exists());
}

#[test]
fn export_width_follows_combined_numbers() {
    let fx = fixture();
    let params = write_params(
        &fx.root,
        "wide.toml",
        "model = \"msi-gcn\"\nweight_decay = 5e-4\ndropout = 0.5\ndiscount = 0.5\nt = 3\nn = 0\nc_x = 2\nc_a1 = 1\nc_a2 = 4\n",
    );
    let out = fx.root.join("export");
    let o = run(&[
        "export-embeddings",
        "--dataset",
        p(&fx.data),
        "--params-file",
        p(&params),
        "--out",
        p(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (header, _) = read_matrix(&out.join("msi_layer.csv"));
    // both hops have far more than 3 qualifying columns
    assert_eq!(header.len() - 2, 2 * 4 + 3 + 4 * 3);
}

#[test]
fn export_with_checkpoint_writes_logits() {
    let fx = fixture();
    let run_dir = fx.root.join("run");
    assert!(train(&fx, &run_dir, "0").status.success());
    let out = fx.root.join("export");
    let params = fx.root.join("gcn.toml");
    let ckpt = run_dir.join("checkpoints/split_0.ckpt");
    let o = run(&[
        "export-embeddings",
        "--dataset",
        p(&fx.data),
        "--params-file",
        p(&params),
        "--checkpoint",
        p(&ckpt),
        "--out",
        p(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = read_matrix(&out.join("logits.csv"));
    assert_eq!(header, ["node_id", "label", "class0", "class1"]);
    assert_eq!(rows.len(), 30);

    let o = run(&[
        "export-embeddings",
        "--dataset",
        p(&fx.data),
        "--params-file",
        p(&params),
        "--checkpoint",
        p(&fx.root.join("missing.ckpt")),
        "--out",
        p(&fx.root.join("x")),
    ]);
    assert_eq!(o.status.code(), Some(2));

    // a GCNII file cannot use a GCN checkpoint
    let gcnii = write_params(
        &fx.root,
        "gcnii.toml",
        "model = \"gcnii\"\nhidden = 8\nweight_decay = 5e-4\ndropout = 0.5\nlayers = 2\nalpha = 0.1\nbeta = 0.5\n",
    );
    let o = run(&[
        "export-embeddings",
        "--dataset",
        p(&fx.data),
        "--params-file",
        p(&gcnii),
        "--checkpoint",
        p(&ckpt),
        "--out",
        p(&fx.root.join("y")),
    ]);
    assert!(!o.status.success());
}

#[test]
fn convert_round_trips_geomgcn_text() {
    let fx = fixture();
    let geom = fx.root.join("geom");
    fs::create_dir_all(&geom).unwrap();
    fs::write(
        geom.join("out1_node_feature_label.txt"),
        "node_id\tfeature\tlabel\n0\t1,0\t0\n1\t0,1\t1\n2\t1,1\t1\n",
    )
    .unwrap();
    fs::write(
        geom.join("out1_graph_edges.txt"),
        "node_id\tnode_id\n0\t1\n1\t2\n",
    )
    .unwrap();
    let out = fx.root.join("canon");
    let o = run(&["convert", "--dataset", p(&geom), "--out", p(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let g = Graph::load_auto(&out).unwrap();
    assert_eq!(g.labels(), &[0, 1, 1]);
    assert_eq!(g.num_edges(), 2);
}
