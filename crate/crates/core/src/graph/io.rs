use super::Graph;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FileFormat {
    /// Whitespace separated `u v` per line, `#` comments. `save` writes a `# nodes: n` header
    /// so isolated trailing nodes survive a round trip.
    EdgeList,
    /// `{"n": int, "edges": [[u, v], ...]}`
    Json,
}

impl FileFormat {
    /// `.json` means JSON, anything else is an edge list.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("json") => FileFormat::Json,
            _ => FileFormat::EdgeList,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct GraphJson {
    n: usize,
    edges: Vec<[usize; 2]>,
}

pub fn load(path: &Path, format: FileFormat) -> Result<Graph> {
    let text = std::fs::read_to_string(path)?;
    match format {
        FileFormat::EdgeList => parse_edge_list(&text),
        FileFormat::Json => parse_json(&text),
    }
}

pub fn save(g: &Graph, path: &Path, format: FileFormat) -> Result<()> {
    let text = match format {
        FileFormat::EdgeList => to_edge_list(g),
        FileFormat::Json => to_json(g)?,
    };
    std::fs::write(path, text)?;
    Ok(())
}

pub fn to_edge_list(g: &Graph) -> String {
    let mut out = format!("# nodes: {}\n", g.n());
    for &(a, b) in g.edges() {
        out.push_str(&format!("{a} {b}\n"));
    }
    out
}

pub fn to_json(g: &Graph) -> Result<String> {
    let doc = GraphJson {
        n: g.n(),
        edges: g.edges().iter().map(|&(a, b)| [a, b]).collect(),
    };
    Ok(serde_json::to_string(&doc)? + "\n")
}

fn parse_json(text: &str) -> Result<Graph> {
    let doc: GraphJson = serde_json::from_str(text)?;
    let edges: Vec<_> = doc.edges.iter().map(|e| (e[0], e[1])).collect();
    Graph::from_edges(doc.n, &edges)
}

/// Parses the edge-list format, attaching line numbers to every error.
pub fn parse_edge_list(text: &str) -> Result<Graph> {
    let mut declared_n = None;
    let mut edges = Vec::new();
    let mut seen: HashMap<(usize, usize), usize> = HashMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let (content, comment) = match raw.find('#') {
            Some(pos) => (&raw[..pos], Some(&raw[pos + 1..])),
            None => (raw, None),
        };
        if let Some(n) = comment.and_then(parse_nodes_header) {
            declared_n = Some(n);
        }
        let tokens: Vec<&str> = content.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        if tokens.len() != 2 {
            return Err(Error::Parse {
                line,
                message: format!("expected `u v`, found {} fields", tokens.len()),
            });
        }
        let parse = |t: &str| {
            t.parse::<usize>().map_err(|_| Error::Parse {
                line,
                message: format!("`{t}` is not a node index"),
            })
        };
        let (a, b) = (parse(tokens[0])?, parse(tokens[1])?);
        if a == b {
            return Err(Error::SelfLoop {
                node: a,
                line: Some(line),
            });
        }
        let key = (a.min(b), a.max(b));
        if seen.insert(key, line).is_some() {
            return Err(Error::DuplicateEdge {
                u: key.0,
                v: key.1,
                line: Some(line),
            });
        }
        edges.push((a, b));
    }
    let implied = edges.iter().map(|&(a, b)| a.max(b) + 1).max().unwrap_or(0);
    let n = match declared_n {
        Some(n) if n < implied => {
            return Err(Error::Parse {
                line: 1,
                message: format!(
                    "header declares {n} nodes but index {} appears",
                    implied - 1
                ),
            })
        }
        Some(n) => n,
        None => implied,
    };
    Graph::from_edges(n, &edges)
}

fn parse_nodes_header(comment: &str) -> Option<usize> {
    let rest = comment.trim().strip_prefix("nodes:")?;
    rest.trim().parse().ok()
}
