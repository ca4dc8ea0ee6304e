//! File formats: Matrix Market graphs and kernels, and the CSV tables used
//! for labels, signals, sampling sets and per-node vectors.
//!
//! All text is UTF-8 with LF line endings. Floating-point values are written
//! with Rust's shortest round-trip representation, so reading a file back
//! reproduces the values bit for bit.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use crate::dpp::{SamplerKind, SamplingSet};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::spectral::Signal;

const MM_COORD_HEADER: &str = "%%MatrixMarket matrix coordinate real symmetric";
const MM_ARRAY_HEADER: &str = "%%MatrixMarket matrix array real general";

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Non-comment, non-blank lines with their 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('%'))
}

fn parse_field<T: std::str::FromStr>(path: &Path, line: usize, field: &str, what: &str) -> Result<T> {
    field
        .trim()
        .parse()
        .map_err(|_| parse_err(path, line, format!("cannot parse {what} from '{field}'")))
}

/// Adjacency in symmetric coordinate format: one `row col weight` line per
/// edge, 1-based, lower triangle (`row > col`).
pub fn graph_to_matrix_market(g: &Graph) -> String {
    let mut out = String::new();
    out.push_str(MM_COORD_HEADER);
    out.push('\n');
    let n = g.num_nodes();
    out.push_str(&format!("{n} {n} {}\n", g.num_edges()));
    for &(i, j, w) in g.edges() {
        out.push_str(&format!("{} {} {}\n", j + 1, i + 1, w));
    }
    out
}

pub fn graph_from_matrix_market(text: &str, path: &Path) -> Result<Graph> {
    let header = text.lines().next().unwrap_or("");
    if !header.starts_with("%%MatrixMarket") {
        return Err(parse_err(path, 1, "missing %%MatrixMarket header"));
    }
    let lower = header.to_ascii_lowercase();
    if !(lower.contains("coordinate") && lower.contains("symmetric")) {
        return Err(parse_err(path, 1, "expected a symmetric coordinate matrix"));
    }
    let mut lines = content_lines(text);
    let (size_line, size) = lines
        .next()
        .ok_or_else(|| parse_err(path, 1, "missing size line"))?;
    let dims: Vec<&str> = size.split_whitespace().collect();
    if dims.len() != 3 {
        return Err(parse_err(path, size_line, "size line must be 'rows cols nnz'"));
    }
    let rows: usize = parse_field(path, size_line, dims[0], "row count")?;
    let cols: usize = parse_field(path, size_line, dims[1], "column count")?;
    let nnz: usize = parse_field(path, size_line, dims[2], "entry count")?;
    if rows != cols {
        return Err(parse_err(path, size_line, "adjacency matrix must be square"));
    }
    let mut edges = Vec::with_capacity(nnz);
    for (ln, line) in lines {
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 3 {
            return Err(parse_err(path, ln, "entry must be 'row col weight'"));
        }
        let i: usize = parse_field(path, ln, f[0], "row index")?;
        let j: usize = parse_field(path, ln, f[1], "column index")?;
        let w: f64 = parse_field(path, ln, f[2], "weight")?;
        if i == 0 || j == 0 || i > rows || j > rows {
            return Err(parse_err(path, ln, format!("index ({i}, {j}) outside 1..={rows}")));
        }
        edges.push((i - 1, j - 1, w));
    }
    if edges.len() != nnz {
        return Err(parse_err(
            path,
            size_line,
            format!("header announces {nnz} entries, found {}", edges.len()),
        ));
    }
    Graph::from_edges(rows, edges).map_err(|e| parse_err(path, size_line, e.to_string()))
}

pub fn write_graph(g: &Graph, path: &Path) -> Result<()> {
    fs::write(path, graph_to_matrix_market(g))?;
    Ok(())
}

/// Reads a graph and, when `labels` is given, its `node,community` sidecar.
pub fn read_graph(path: &Path, labels: Option<&Path>) -> Result<Graph> {
    let g = graph_from_matrix_market(&fs::read_to_string(path)?, path)?;
    match labels {
        Some(lp) => {
            let l = read_labels(lp, g.num_nodes())?;
            g.with_communities(l)
        }
        None => Ok(g),
    }
}

pub fn labels_to_csv(labels: &[usize]) -> String {
    let mut out = String::from("node,community\n");
    for (i, c) in labels.iter().enumerate() {
        out.push_str(&format!("{i},{c}\n"));
    }
    out
}

/// Parses a CSV with the exact `header` and returns each data row's fields.
fn csv_rows<'a>(text: &'a str, header: &str, path: &Path) -> Result<Vec<(usize, Vec<&'a str>)>> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    match lines.next() {
        Some((_, h)) if h.trim() == header => {}
        Some((ln, h)) => return Err(parse_err(path, ln, format!("expected header '{header}', got '{h}'"))),
        None => return Err(parse_err(path, 1, format!("empty file, expected header '{header}'"))),
    }
    let width = header.split(',').count();
    let mut rows = Vec::new();
    for (ln, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != width {
            return Err(parse_err(path, ln, format!("expected {width} fields, got {}", fields.len())));
        }
        rows.push((ln, fields));
    }
    Ok(rows)
}

pub fn read_labels(path: &Path, n: usize) -> Result<Vec<usize>> {
    let text = fs::read_to_string(path)?;
    let mut labels = vec![usize::MAX; n];
    for (ln, f) in csv_rows(&text, "node,community", path)? {
        let i: usize = parse_field(path, ln, f[0], "node")?;
        let c: usize = parse_field(path, ln, f[1], "community")?;
        if i >= n {
            return Err(parse_err(path, ln, format!("node {i} outside 0..{n}")));
        }
        labels[i] = c;
    }
    if let Some(i) = labels.iter().position(|&c| c == usize::MAX) {
        return Err(parse_err(path, 1, format!("node {i} has no community label")));
    }
    Ok(labels)
}

pub fn signal_to_csv(x: &[f64]) -> String {
    let mut out = String::from("value\n");
    for v in x {
        out.push_str(&format!("{v}\n"));
    }
    out
}

pub fn signal_from_csv(text: &str, path: &Path) -> Result<Signal> {
    let values = csv_rows(text, "value", path)?
        .into_iter()
        .map(|(ln, f)| parse_field(path, ln, f[0], "value"))
        .collect::<Result<Vec<f64>>>()?;
    Signal::new(values)
}

pub fn read_signal(path: &Path) -> Result<Signal> {
    signal_from_csv(&fs::read_to_string(path)?, path)
}

/// `node,weight` rows; the weight column is empty when the sampler did not
/// produce reweighting values.
pub fn sampling_to_csv(s: &SamplingSet) -> String {
    let mut out = format!("# method={}\nnode,weight\n", s.method);
    for (idx, &i) in s.nodes.iter().enumerate() {
        match &s.weights {
            Some(w) => out.push_str(&format!("{i},{}\n", w[idx])),
            None => out.push_str(&format!("{i},\n")),
        }
    }
    out
}

pub fn sampling_from_csv(text: &str, path: &Path) -> Result<SamplingSet> {
    let mut method = SamplerKind::Iid;
    let mut body = text;
    if let Some(first) = text.lines().next() {
        if let Some(tag) = first.strip_prefix("# method=") {
            method = tag.trim().parse().map_err(|e: Error| parse_err(path, 1, e.to_string()))?;
            body = text[first.len()..].trim_start_matches(['\r', '\n']);
        }
    }
    let offset = if body.len() == text.len() { 0 } else { 1 };
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    let mut missing = 0usize;
    for (ln, f) in csv_rows(body, "node,weight", path)? {
        nodes.push(parse_field::<usize>(path, ln + offset, f[0], "node")?);
        if f[1].trim().is_empty() {
            missing += 1;
        } else {
            weights.push(parse_field::<f64>(path, ln + offset, f[1], "weight")?);
        }
    }
    let weights = match (missing, weights.len()) {
        (0, _) => Some(weights),
        (_, 0) => None,
        _ => return Err(parse_err(path, 1, "weights must be given for all samples or none")),
    };
    SamplingSet::new(nodes, weights, method).map_err(|e| parse_err(path, 1, e.to_string()))
}

pub fn read_sampling(path: &Path) -> Result<SamplingSet> {
    sampling_from_csv(&fs::read_to_string(path)?, path)
}

/// `node,value` rows, one per entry.
pub fn node_values_to_csv(nodes: &[usize], values: &[f64]) -> String {
    let mut out = String::from("node,value\n");
    for (i, v) in nodes.iter().zip(values) {
        out.push_str(&format!("{i},{v}\n"));
    }
    out
}

pub fn vector_to_csv(values: &[f64]) -> String {
    let nodes: Vec<usize> = (0..values.len()).collect();
    node_values_to_csv(&nodes, values)
}

pub fn node_values_from_csv(text: &str, path: &Path) -> Result<(Vec<usize>, Vec<f64>)> {
    let mut nodes = Vec::new();
    let mut values = Vec::new();
    for (ln, f) in csv_rows(text, "node,value", path)? {
        nodes.push(parse_field(path, ln, f[0], "node")?);
        values.push(parse_field(path, ln, f[1], "value")?);
    }
    Ok((nodes, values))
}

pub fn read_node_values(path: &Path) -> Result<(Vec<usize>, Vec<f64>)> {
    node_values_from_csv(&fs::read_to_string(path)?, path)
}

/// Dense column-major Matrix Market array.
pub fn dense_to_matrix_market(m: &DMatrix<f64>) -> String {
    let mut out = format!("{MM_ARRAY_HEADER}\n{} {}\n", m.nrows(), m.ncols());
    for v in m.iter() {
        out.push_str(&format!("{v}\n"));
    }
    out
}

pub fn dense_from_matrix_market(text: &str, path: &Path) -> Result<DMatrix<f64>> {
    if !text.starts_with(MM_ARRAY_HEADER) {
        return Err(parse_err(path, 1, "expected a dense real array"));
    }
    let mut lines = content_lines(text);
    let (ln, size) = lines.next().ok_or_else(|| parse_err(path, 1, "missing size line"))?;
    let dims: Vec<&str> = size.split_whitespace().collect();
    if dims.len() != 2 {
        return Err(parse_err(path, ln, "size line must be 'rows cols'"));
    }
    let rows: usize = parse_field(path, ln, dims[0], "rows")?;
    let cols: usize = parse_field(path, ln, dims[1], "cols")?;
    let values = lines
        .map(|(ln, l)| parse_field(path, ln, l, "value"))
        .collect::<Result<Vec<f64>>>()?;
    if values.len() != rows * cols {
        return Err(parse_err(path, ln, format!("expected {} values, got {}", rows * cols, values.len())));
    }
    Ok(DMatrix::from_column_slice(rows, cols, &values))
}

/// Writes `text` to `path`, or to standard output when `path` is `-`.
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if path.as_os_str() == "-" {
        print!("{text}");
        Ok(())
    } else {
        fs::write(path, text).map_err(Error::from)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> &'static Path {
        Path::new("test.csv")
    }

    #[test]
    fn graph_round_trip_is_bit_exact() {
        let g = Graph::from_edges(4, [(0, 1, 0.1), (1, 3, 1.0 / 3.0), (2, 0, 7e-300)]).unwrap();
        let text = graph_to_matrix_market(&g);
        let back = graph_from_matrix_market(&text, p()).unwrap();
        assert_eq!(back, g);
        for (a, b) in back.edges().iter().zip(g.edges()) {
            assert_eq!(a.2.to_bits(), b.2.to_bits());
        }
    }

    #[test]
    fn matrix_market_errors_carry_line() {
        let text = "%%MatrixMarket matrix coordinate real symmetric\n3 3 1\n4 1 1.0\n";
        match graph_from_matrix_market(text, p()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let short = "%%MatrixMarket matrix coordinate real symmetric\n3 3 2\n2 1 1.0\n";
        assert!(graph_from_matrix_market(short, p()).is_err());
        assert!(graph_from_matrix_market("1 1 0\n", p()).is_err());
    }

    #[test]
    fn sampling_csv_with_and_without_weights() {
        let s = SamplingSet::new(vec![3, 1, 3], Some(vec![0.25, 1.5, 0.25]), SamplerKind::Iid).unwrap();
        assert_eq!(sampling_from_csv(&sampling_to_csv(&s), p()).unwrap(), s);
        let w = SamplingSet::new(vec![4, 0], None, SamplerKind::Wilson).unwrap();
        let text = sampling_to_csv(&w);
        assert!(text.contains("node,weight\n4,\n0,\n"));
        assert_eq!(sampling_from_csv(&text, p()).unwrap(), w);
    }

    #[test]
    fn signal_and_vector_csv() {
        let x = vec![0.1, -2.5e-17, 3.0];
        let back = signal_from_csv(&signal_to_csv(&x), p()).unwrap();
        assert_eq!(back.values(), &x[..]);
        let (nodes, values) = node_values_from_csv(&vector_to_csv(&x), p()).unwrap();
        assert_eq!(nodes, vec![0, 1, 2]);
        assert_eq!(values, x);
        assert!(signal_from_csv("val\n1\n", p()).is_err());
    }

    #[test]
    fn dense_round_trip() {
        let m = DMatrix::from_row_slice(2, 3, &[1.0, 2.5, -0.1, 4.0, 1e-9, 6.0]);
        assert_eq!(dense_from_matrix_market(&dense_to_matrix_market(&m), p()).unwrap(), m);
    }

    #[test]
    fn labels_csv() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("labels.csv");
        fs::write(&path, labels_to_csv(&[0, 0, 1])).unwrap();
        assert_eq!(read_labels(&path, 3).unwrap(), vec![0, 0, 1]);
        assert!(read_labels(&path, 4).is_err());
    }
}
