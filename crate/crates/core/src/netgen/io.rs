//! Line-oriented graph text format with a JSON sidecar.
//!
//! ```text
//! nodes 4
//! node 0 A
//! node 1 B
//! ...
//! edge 0 1
//! edge 1 2
//! ```
//!
//! Edges are written with `u < v` in ascending order. The sidecar carries the
//! generating config and the fallback edges.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AttributedGraph, Edge, Group, NetworkConfig, NetworkError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphSidecar {
    pub config: NetworkConfig,
    pub fallback_edge_count: usize,
    pub fallback_edges: Vec<Edge>,
}

impl AttributedGraph {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "nodes {}", self.node_count()).unwrap();
        for (i, g) in self.labels().iter().enumerate() {
            writeln!(out, "node {i} {}", g.as_str()).unwrap();
        }
        for &(u, v) in self.edges() {
            writeln!(out, "edge {u} {v}").unwrap();
        }
        out
    }

    pub fn sidecar(&self) -> GraphSidecar {
        GraphSidecar {
            config: *self.config(),
            fallback_edge_count: self.fallback_edge_count(),
            fallback_edges: self.fallback_edges().to_vec(),
        }
    }

    pub fn from_text(text: &str, sidecar: &GraphSidecar) -> Result<Self, NetworkError> {
        let err = |line: usize, reason: String| NetworkError::Parse { line, reason };
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let (_, header) = lines.next().ok_or_else(|| err(1, "empty file".into()))?;
        let n: usize = header
            .strip_prefix("nodes ")
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| err(1, format!("expected `nodes <n>`, got `{header}`")))?;
        let mut labels = Vec::with_capacity(n);
        let mut edges = Vec::new();
        for (line, content) in lines {
            let fields: Vec<&str> = content.split(' ').collect();
            match fields.as_slice() {
                ["node", id, label] => {
                    let id: usize = id.parse().map_err(|_| err(line, format!("bad node id `{id}`")))?;
                    if id != labels.len() {
                        return Err(err(line, format!("node {id} out of order")));
                    }
                    let group = match *label {
                        "A" => Group::A,
                        "B" => Group::B,
                        other => return Err(err(line, format!("unknown group `{other}`"))),
                    };
                    labels.push(group);
                }
                ["edge", u, v] => {
                    let u: usize = u.parse().map_err(|_| err(line, format!("bad endpoint `{u}`")))?;
                    let v: usize = v.parse().map_err(|_| err(line, format!("bad endpoint `{v}`")))?;
                    if u >= v {
                        return Err(err(line, format!("edge {u} {v} is not written with u < v")));
                    }
                    if edges.last().is_some_and(|&last| last >= (u, v)) {
                        return Err(err(line, "edges out of order".into()));
                    }
                    edges.push((u, v));
                }
                _ => return Err(err(line, format!("unrecognized line `{content}`"))),
            }
        }
        if labels.len() != n {
            return Err(err(0, format!("header declares {n} nodes, found {}", labels.len())));
        }
        if sidecar.fallback_edge_count != sidecar.fallback_edges.len() {
            return Err(NetworkError::InvalidGraph(
                "sidecar fallback count disagrees with its edge list".into(),
            ));
        }
        AttributedGraph::from_parts(sidecar.config, labels, edges, sidecar.fallback_edges.iter().copied())
    }
}

/// Writes `<stem>.txt` and `<stem>.json` into `dir`, returning both paths.
pub fn write_graph(g: &AttributedGraph, dir: &Path, stem: &str) -> io::Result<(std::path::PathBuf, std::path::PathBuf)> {
    let text_path = dir.join(format!("{stem}.txt"));
    let json_path = dir.join(format!("{stem}.json"));
    fs::write(&text_path, g.to_text())?;
    let mut json = serde_json::to_string_pretty(&g.sidecar()).map_err(io::Error::other)?;
    json.push('\n');
    fs::write(&json_path, json)?;
    Ok((text_path, json_path))
}

pub fn read_graph(text_path: &Path, json_path: &Path) -> Result<AttributedGraph, Box<dyn std::error::Error + Send + Sync>> {
    let text = fs::read_to_string(text_path)?;
    let sidecar: GraphSidecar = serde_json::from_str(&fs::read_to_string(json_path)?)?;
    Ok(AttributedGraph::from_text(&text, &sidecar)?)
}
