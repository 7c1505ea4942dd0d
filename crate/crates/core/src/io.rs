//! Text formats: TOML parameter documents, edge lists and label files.
//!
//! Parameters:
//!
//! ```toml
//! k = 2
//! p = [0.5, 0.5]
//! q = [[9.0, 1.0], [1.0, 9.0]]
//! regime = "logarithmic"   # or "constant"
//! ```
//!
//! Graphs are a header line `n <count>` followed by one `u v` line per edge
//! (0-based, `u < v`). Labels are one `v label` line per vertex. Lines starting
//! with `#` are ignored in both.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SbmError};
use crate::model::{build_params, Graph, ModelParams, Regime};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsDocument {
    pub k: usize,
    pub p: Vec<f64>,
    pub q: Vec<Vec<f64>>,
    pub regime: Regime,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl ParamsDocument {
    pub fn from_params(params: &ModelParams) -> Self {
        ParamsDocument {
            k: params.k(),
            p: params.prior().to_vec(),
            q: params.kernel_rows(),
            regime: params.regime(),
            seed: None,
        }
    }

    pub fn to_params(&self) -> Result<ModelParams> {
        build_params(self.k, self.p.clone(), self.q.clone(), self.regime)
    }
}

pub fn parse_params(text: &str) -> Result<ParamsDocument> {
    toml::from_str(text).map_err(|e| SbmError::Parse(e.to_string()))
}

pub fn read_params(path: &Path) -> Result<ParamsDocument> {
    parse_params(&fs::read_to_string(path)?)
}

pub fn format_params(doc: &ParamsDocument) -> Result<String> {
    toml::to_string(doc).map_err(|e| SbmError::Parse(e.to_string()))
}

pub fn format_graph(graph: &Graph) -> String {
    let mut out = String::with_capacity(16 * graph.edge_count() + 16);
    let _ = writeln!(out, "n {}", graph.n());
    for (u, v) in graph.edges() {
        let _ = writeln!(out, "{u} {v}");
    }
    out
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_pair(line_no: usize, line: &str) -> Result<(usize, usize)> {
    let mut it = line.split_whitespace();
    let mut next = || -> Result<usize> {
        it.next()
            .ok_or_else(|| SbmError::Parse(format!("line {line_no}: expected two integers")))?
            .parse()
            .map_err(|e| SbmError::Parse(format!("line {line_no}: {e}")))
    };
    let a = next()?;
    let b = next()?;
    if it.next().is_some() {
        return Err(SbmError::Parse(format!("line {line_no}: trailing tokens")));
    }
    Ok((a, b))
}

pub fn parse_graph(text: &str) -> Result<Graph> {
    let mut lines = content_lines(text);
    let (line_no, header) = lines.next().ok_or_else(|| SbmError::Parse("empty graph file".into()))?;
    let n: usize = header
        .strip_prefix("n ")
        .ok_or_else(|| SbmError::Parse(format!("line {line_no}: expected header `n <count>`")))?
        .trim()
        .parse()
        .map_err(|e| SbmError::Parse(format!("line {line_no}: {e}")))?;
    let mut edges = Vec::new();
    for (line_no, line) in lines {
        let (u, v) = parse_pair(line_no, line)?;
        if u >= n || v >= n {
            return Err(SbmError::IndexOutOfRange { index: u.max(v), len: n });
        }
        edges.push((u, v));
    }
    Graph::from_edges(n, &edges)
}

pub fn read_graph(path: &Path) -> Result<Graph> {
    parse_graph(&fs::read_to_string(path)?)
}

pub fn write_graph(path: &Path, graph: &Graph) -> Result<()> {
    fs::write(path, format_graph(graph))?;
    Ok(())
}

pub fn format_labels(labels: &[usize]) -> String {
    let mut out = String::with_capacity(8 * labels.len());
    for (v, l) in labels.iter().enumerate() {
        let _ = writeln!(out, "{v} {l}");
    }
    out
}

/// Labels must cover vertices `0..n` exactly once, in any order.
pub fn parse_labels(text: &str) -> Result<Vec<usize>> {
    let mut pairs = Vec::new();
    for (line_no, line) in content_lines(text) {
        pairs.push(parse_pair(line_no, line)?);
    }
    let n = pairs.len();
    let mut labels = vec![usize::MAX; n];
    for (v, l) in pairs {
        if v >= n {
            return Err(SbmError::IndexOutOfRange { index: v, len: n });
        }
        if labels[v] != usize::MAX {
            return Err(SbmError::Parse(format!("vertex {v} labeled twice")));
        }
        labels[v] = l;
    }
    Ok(labels)
}

pub fn read_labels(path: &Path) -> Result<Vec<usize>> {
    parse_labels(&fs::read_to_string(path)?)
}

pub fn write_labels(path: &Path, labels: &[usize]) -> Result<()> {
    fs::write(path, format_labels(labels))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params_round_trip() {
        let text = "k = 2\np = [0.5, 0.5]\nq = [[9.0, 1.0], [1.0, 9.0]]\nregime = \"logarithmic\"\nseed = 4\n";
        let doc = parse_params(text).unwrap();
        assert_eq!(doc.seed, Some(4));
        let params = doc.to_params().unwrap();
        assert_eq!(params.q(0, 1), 1.0);
        let again = parse_params(&format_params(&doc).unwrap()).unwrap();
        assert_eq!(again, doc);
    }

    #[test]
    fn params_reject_unknown_keys() {
        assert!(matches!(parse_params("k = 1\np = [1.0]\nq = [[1.0]]\nregime = \"constant\"\nz = 1\n"), Err(SbmError::Parse(_))));
    }

    #[test]
    fn graph_round_trip() {
        let g = Graph::from_edges(5, &[(0, 3), (1, 2), (2, 4)]).unwrap();
        let text = format_graph(&g);
        assert_eq!(text, "n 5\n0 3\n1 2\n2 4\n");
        assert_eq!(parse_graph(&text).unwrap(), g);
    }

    #[test]
    fn graph_errors() {
        assert!(matches!(parse_graph(""), Err(SbmError::Parse(_))));
        assert!(matches!(parse_graph("n 2\n0 5\n"), Err(SbmError::IndexOutOfRange { .. })));
        assert!(matches!(parse_graph("n 2\n0 x\n"), Err(SbmError::Parse(_))));
    }

    #[test]
    fn labels_round_trip_any_order() {
        assert_eq!(parse_labels("# header\n1 0\n0 2\n").unwrap(), vec![2, 0]);
        let labels = vec![1, 0, 1];
        assert_eq!(parse_labels(&format_labels(&labels)).unwrap(), labels);
        assert!(parse_labels("0 1\n0 1\n").is_err());
    }
}
