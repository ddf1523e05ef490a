//! Plain-text matrix formats: tab-separated edge lists, comma-separated
//! series and label files.

use std::fs;
use std::io::Write;
use std::path::Path;

use latent_gfl_core::graph::{Graph, NodeSeries};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{CliError, Result};

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let mut f = fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    f.write_all(bytes).map_err(|e| CliError::io(path, e))
}

/// Edge list, one `source<TAB>target` pair per line. Blank lines and lines
/// starting with `#` are skipped, as is the first line when `header` is set.
pub fn read_edges(path: &Path, header: bool) -> Result<Vec<(usize, usize)>> {
    let text = read_text(path)?;
    let mut edges = Vec::new();
    for (no, line) in text.lines().enumerate().skip(usize::from(header)) {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split('\t').map(str::trim);
        let (Some(a), Some(b), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(CliError::parse(path, format!("line {}: expected two tab-separated node ids", no + 1)));
        };
        let parse = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| CliError::parse(path, format!("line {}: `{s}` is not a node id", no + 1)))
        };
        edges.push((parse(a)?, parse(b)?));
    }
    Ok(edges)
}

pub fn write_edges(path: &Path, graph: &Graph) -> Result<()> {
    let mut out = String::from("source\ttarget\n");
    for (a, b) in graph.edges() {
        out.push_str(&format!("{a}\t{b}\n"));
    }
    write_bytes(path, out.as_bytes())
}

pub fn load_graph(path: &Path, header: bool, n_nodes: usize) -> Result<Graph> {
    let edges = read_edges(path, header)?;
    Graph::from_edges(n_nodes, &edges).map_err(|e| CliError::parse(path, e))
}

/// Real-valued matrix, one row per line.
pub fn read_matrix(path: &Path, header: bool) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(header)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::parse(path, e))?;
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| CliError::parse(path, e))?;
        let row = rec
            .iter()
            .map(|v| v.parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|e| CliError::parse(path, format!("row {}: {e}", i + 1)))?;
        rows.push(row);
    }
    Ok(rows)
}

/// Node series, one node per line and one time point per column.
pub fn read_series(path: &Path, header: bool) -> Result<NodeSeries> {
    let rows = read_matrix(path, header)?;
    NodeSeries::from_rows(&rows).map_err(|e| CliError::parse(path, e))
}

pub fn write_matrix<'a>(path: &Path, header: Option<Vec<String>>, rows: impl Iterator<Item = &'a [f64]>) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| CliError::parse(path, e);
    if let Some(h) = header {
        w.write_record(&h).map_err(err)?;
    }
    for row in rows {
        w.write_record(row.iter().map(|v| v.to_string())).map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::parse(path, e))?;
    write_bytes(path, &bytes)
}

pub fn write_series(path: &Path, series: &NodeSeries) -> Result<()> {
    let header = (0..series.len()).map(|t| format!("t{t}")).collect();
    write_matrix(path, Some(header), series.rows())
}

/// `node,label` pairs.
pub fn write_labels(path: &Path, labels: &[usize]) -> Result<()> {
    let mut out = String::from("node,label\n");
    for (i, l) in labels.iter().enumerate() {
        out.push_str(&format!("{i},{l}\n"));
    }
    write_bytes(path, out.as_bytes())
}

/// Reads a `node,label` file (header required) and returns labels ordered
/// by node id. Node ids must be exactly `0..N`.
pub fn read_labels(path: &Path) -> Result<Vec<usize>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::parse(path, e))?;
    let mut pairs = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| CliError::parse(path, e))?;
        if rec.len() != 2 {
            return Err(CliError::parse(path, "expected two columns: node,label"));
        }
        let node = rec[0].parse::<usize>().map_err(|e| CliError::parse(path, e))?;
        let label = rec[1].parse::<usize>().map_err(|e| CliError::parse(path, e))?;
        pairs.push((node, label));
    }
    pairs.sort_unstable();
    if pairs.iter().enumerate().any(|(i, (node, _))| *node != i) {
        return Err(CliError::parse(path, "node ids must be 0..N without gaps or repeats"));
    }
    Ok(pairs.into_iter().map(|(_, l)| l).collect())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| CliError::parse(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| CliError::parse(path, e))?;
    bytes.push(b'\n');
    write_bytes(path, &bytes)
}
