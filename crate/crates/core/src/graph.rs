//! Undirected simple graphs with node features and labels, plus dataset
//! readers and writers.
//!
//! Two on-disk layouts are supported:
//!
//! * canonical: `meta.json` (`num_nodes`, `num_classes`, `feature_dim`),
//!   `edges.tsv` (`u\tv`, 0-based), `features.csv` (one comma-separated row per
//!   node) and `labels.txt` (one class id per line);
//! * geomgcn-text: `out1_graph_edges.txt` (header line, then `u\tv`) and
//!   `out1_node_feature_label.txt` (header line, then `id\tf1,f2,...\tlabel`).

use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetFormat {
    Canonical,
    GeomgcnText,
}

impl DatasetFormat {
    /// Guesses the layout from the files present in `dir`.
    pub fn detect(dir: &Path) -> Option<DatasetFormat> {
        if dir.join("meta.json").is_file() {
            Some(DatasetFormat::Canonical)
        } else if dir.join(GEOM_EDGES).is_file() {
            Some(DatasetFormat::GeomgcnText)
        } else {
            None
        }
    }
}

impl FromStr for DatasetFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "canonical" => Ok(DatasetFormat::Canonical),
            "geomgcn-text" | "geomgcn" => Ok(DatasetFormat::GeomgcnText),
            other => Err(Error::Config(format!("unknown dataset format {other:?}"))),
        }
    }
}

impl fmt::Display for DatasetFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DatasetFormat::Canonical => "canonical",
            DatasetFormat::GeomgcnText => "geomgcn-text",
        })
    }
}

const GEOM_EDGES: &str = "out1_graph_edges.txt";
const GEOM_NODES: &str = "out1_node_feature_label.txt";

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
struct Meta {
    num_nodes: usize,
    num_classes: usize,
    feature_dim: usize,
}

/// Undirected graph in CSR form. Symmetric, no self-loops, no duplicate edges.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    indptr: Vec<usize>,
    indices: Vec<usize>,
    features: Array2<f64>,
    labels: Vec<usize>,
    num_classes: usize,
}

impl Graph {
    /// Builds a graph from an arbitrary edge list. Edges are symmetrized,
    /// deduplicated and self-loops are dropped.
    pub fn new(
        num_nodes: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
        features: Array2<f64>,
        labels: Vec<usize>,
        num_classes: usize,
    ) -> Result<Graph> {
        if features.nrows() != num_nodes {
            return Err(Error::Inconsistent(format!(
                "{} feature rows for {} nodes",
                features.nrows(),
                num_nodes
            )));
        }
        if labels.len() != num_nodes {
            return Err(Error::Inconsistent(format!(
                "{} labels for {} nodes",
                labels.len(),
                num_nodes
            )));
        }
        if let Some((v, &y)) = labels.iter().enumerate().find(|(_, &y)| y >= num_classes) {
            return Err(Error::InvalidGraph(format!(
                "node {v} has label {y} but num_classes is {num_classes}"
            )));
        }
        if let Some(v) = features.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidGraph(format!(
                "non-finite feature at flat index {v}"
            )));
        }

        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); num_nodes];
        for (u, v) in edges {
            if u >= num_nodes || v >= num_nodes {
                return Err(Error::Inconsistent(format!(
                    "edge ({u}, {v}) references a node outside 0..{num_nodes}"
                )));
            }
            if u != v {
                adj[u].push(v);
                adj[v].push(u);
            }
        }
        let mut indptr = Vec::with_capacity(num_nodes + 1);
        let mut indices = Vec::new();
        indptr.push(0);
        for mut nbrs in adj {
            nbrs.sort_unstable();
            nbrs.dedup();
            indices.extend(nbrs);
            indptr.push(indices.len());
        }
        Ok(Graph {
            indptr,
            indices,
            features,
            labels,
            num_classes,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.labels.len()
    }

    /// Number of undirected edges.
    pub fn num_edges(&self) -> usize {
        self.indices.len() / 2
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn feature_dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.indices[self.indptr[v]..self.indptr[v + 1]]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.indptr[v + 1] - self.indptr[v]
    }

    pub fn degrees(&self) -> Vec<usize> {
        (0..self.num_nodes()).map(|v| self.degree(v)).collect()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.indptr
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.indices
    }

    /// Each undirected edge once, as `(u, v)` with `u < v`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.num_nodes())
            .flat_map(move |u| self.neighbors(u).iter().map(move |&v| (u, v)))
            .filter(|(u, v)| u < v)
    }

    pub fn adjacency(&self) -> SparseMatrix {
        let n = self.num_nodes();
        SparseMatrix::pattern(n, n, self.indptr.clone(), self.indices.clone())
    }

    /// Members of each class, in ascending node order.
    pub fn class_members(&self) -> Vec<Vec<usize>> {
        let mut members = vec![Vec::new(); self.num_classes];
        for (v, &y) in self.labels.iter().enumerate() {
            members[y].push(v);
        }
        members
    }

    pub fn load(dir: &Path, format: DatasetFormat) -> Result<Graph> {
        if !dir.is_dir() {
            return Err(Error::MissingFile(dir.to_path_buf()));
        }
        match format {
            DatasetFormat::Canonical => load_canonical(dir),
            DatasetFormat::GeomgcnText => load_geomgcn(dir),
        }
    }

    /// Loads `dir`, detecting the layout from the files present.
    pub fn load_auto(dir: &Path) -> Result<Graph> {
        let format = DatasetFormat::detect(dir).ok_or_else(|| {
            if dir.is_dir() {
                Error::MissingFile(dir.join("meta.json"))
            } else {
                Error::MissingFile(dir.to_path_buf())
            }
        })?;
        Graph::load(dir, format)
    }

    /// Writes the canonical layout into `dir`, creating it if needed.
    pub fn save_canonical(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let meta = Meta {
            num_nodes: self.num_nodes(),
            num_classes: self.num_classes,
            feature_dim: self.feature_dim(),
        };
        let meta_path = dir.join("meta.json");
        let text = serde_json::to_string_pretty(&meta).expect("meta serializes");
        fs::write(&meta_path, text + "\n").map_err(|e| Error::io(&meta_path, e))?;

        write_lines(&dir.join("edges.tsv"), |w| {
            for (u, v) in self.edges() {
                writeln!(w, "{u}\t{v}")?;
            }
            Ok(())
        })?;
        write_lines(&dir.join("features.csv"), |w| {
            for row in self.features.rows() {
                write_csv_row(w, row.iter())?;
            }
            Ok(())
        })?;
        write_lines(&dir.join("labels.txt"), |w| {
            for y in &self.labels {
                writeln!(w, "{y}")?;
            }
            Ok(())
        })
    }
}

pub(crate) fn write_csv_row<'a>(
    w: &mut impl Write,
    values: impl Iterator<Item = &'a f64>,
) -> std::io::Result<()> {
    let mut first = true;
    for v in values {
        if !first {
            w.write_all(b",")?;
        }
        first = false;
        write!(w, "{v}")?;
    }
    w.write_all(b"\n")
}

pub(crate) fn write_lines(
    path: &Path,
    body: impl FnOnce(&mut BufWriter<fs::File>) -> std::io::Result<()>,
) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    body(&mut w)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

fn open_lines(path: &Path) -> Result<impl Iterator<Item = (usize, Result<String>)>> {
    if !path.is_file() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let owned: PathBuf = path.to_path_buf();
    Ok(BufReader::new(file)
        .lines()
        .enumerate()
        .map(move |(i, l)| (i + 1, l.map_err(|e| Error::io(&owned, e)))))
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn parse_field<T: FromStr>(raw: &str, file: &str, line: usize, what: &str) -> Result<T> {
    raw.trim()
        .parse()
        .map_err(|_| Error::parse(file, line, format!("invalid {what} {raw:?}")))
}

fn parse_edge(line: &str, file: &str, lineno: usize) -> Result<(usize, usize)> {
    let mut parts = line.split_whitespace();
    match (parts.next(), parts.next()) {
        (Some(u), Some(v)) => Ok((
            parse_field(u, file, lineno, "node id")?,
            parse_field(v, file, lineno, "node id")?,
        )),
        _ => Err(Error::parse(file, lineno, "expected two node ids")),
    }
}

fn load_canonical(dir: &Path) -> Result<Graph> {
    let meta_path = dir.join("meta.json");
    if !meta_path.is_file() {
        return Err(Error::MissingFile(meta_path));
    }
    let meta_text = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let meta: Meta = serde_json::from_str(&meta_text)
        .map_err(|e| Error::parse("meta.json", e.line(), e.to_string()))?;

    let edges_path = dir.join("edges.tsv");
    let mut edges = Vec::new();
    for (lineno, line) in open_lines(&edges_path)? {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        edges.push(parse_edge(&line, "edges.tsv", lineno)?);
    }

    let features_path = dir.join("features.csv");
    let mut features = Array2::zeros((meta.num_nodes, meta.feature_dim));
    let mut rows = 0;
    for (lineno, line) in open_lines(&features_path)? {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if rows >= meta.num_nodes {
            return Err(Error::Inconsistent(format!(
                "features.csv has more than {} rows",
                meta.num_nodes
            )));
        }
        let mut cols = 0;
        for raw in line.split(',') {
            if cols >= meta.feature_dim {
                return Err(Error::Inconsistent(format!(
                    "features.csv line {lineno} has more than {} values",
                    meta.feature_dim
                )));
            }
            features[[rows, cols]] = parse_field(raw, "features.csv", lineno, "feature value")?;
            cols += 1;
        }
        if cols != meta.feature_dim {
            return Err(Error::Inconsistent(format!(
                "features.csv line {lineno} has {cols} values, expected {}",
                meta.feature_dim
            )));
        }
        rows += 1;
    }
    if rows != meta.num_nodes {
        return Err(Error::Inconsistent(format!(
            "features.csv has {rows} rows, meta.json declares {} nodes",
            meta.num_nodes
        )));
    }

    let labels_path = dir.join("labels.txt");
    let mut labels = Vec::with_capacity(meta.num_nodes);
    for (lineno, line) in open_lines(&labels_path)? {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        labels.push(parse_field(&line, "labels.txt", lineno, "label")?);
    }
    if labels.len() != meta.num_nodes {
        return Err(Error::Inconsistent(format!(
            "labels.txt has {} entries, meta.json declares {} nodes",
            labels.len(),
            meta.num_nodes
        )));
    }

    Graph::new(meta.num_nodes, edges, features, labels, meta.num_classes)
}

fn load_geomgcn(dir: &Path) -> Result<Graph> {
    let nodes_path = dir.join(GEOM_NODES);
    let mut rows: Vec<(usize, Vec<f64>, usize)> = Vec::new();
    for (lineno, line) in open_lines(&nodes_path)?.skip(1) {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(Error::parse(
                GEOM_NODES,
                lineno,
                "expected id<TAB>features<TAB>label",
            ));
        }
        let id = parse_field(fields[0], GEOM_NODES, lineno, "node id")?;
        let feats = fields[1]
            .split(',')
            .map(|f| parse_field(f, GEOM_NODES, lineno, "feature value"))
            .collect::<Result<Vec<f64>>>()?;
        let label = parse_field(fields[2], GEOM_NODES, lineno, "label")?;
        rows.push((id, feats, label));
    }
    let num_nodes = rows.len();
    let feature_dim = rows.first().map_or(0, |r| r.1.len());
    let mut features = Array2::zeros((num_nodes, feature_dim));
    let mut labels = vec![usize::MAX; num_nodes];
    for (id, feats, label) in rows {
        if id >= num_nodes {
            return Err(Error::Inconsistent(format!(
                "node id {id} out of range for {num_nodes} nodes"
            )));
        }
        if labels[id] != usize::MAX {
            return Err(Error::Inconsistent(format!("node id {id} listed twice")));
        }
        if feats.len() != feature_dim {
            return Err(Error::Inconsistent(format!(
                "node {id} has {} features, expected {feature_dim}",
                feats.len()
            )));
        }
        features.row_mut(id).assign(&ndarray::Array1::from(feats));
        labels[id] = label;
    }
    let num_classes = labels.iter().max().map_or(0, |&m| m + 1);

    let edges_path = dir.join(GEOM_EDGES);
    let mut edges = Vec::new();
    for (lineno, line) in open_lines(&edges_path)?.skip(1) {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        edges.push(parse_edge(&line, &file_name(&edges_path), lineno)?);
    }
    Graph::new(num_nodes, edges, features, labels, num_classes)
}
