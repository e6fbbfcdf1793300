//! Plain-text instance format.
//!
//! First non-comment line is `k n`; every following line is one edge as `k`
//! space-separated local indices in class order. Lines starting with `#` are
//! comments. Writing emits edges in ascending tuple order, so read/write
//! round-trips are byte-stable and bit-exact on the edge set.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::hypergraph::PartiteHypergraph;

#[derive(Error, Debug)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub fn parse_instance(text: &str) -> Result<PartiteHypergraph, FormatError> {
    let mut header: Option<(usize, usize)> = None;
    let mut graph: Option<PartiteHypergraph> = None;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Result<Vec<usize>, _> = line.split_whitespace().map(str::parse).collect();
        let fields = fields.map_err(|e| FormatError::Parse {
            line: lineno + 1,
            msg: format!("expected integers: {e}"),
        })?;
        match header {
            None => {
                if fields.len() != 2 {
                    return Err(FormatError::Parse {
                        line: lineno + 1,
                        msg: format!("header must be `k n`, got {} fields", fields.len()),
                    });
                }
                let (k, n) = (fields[0], fields[1]);
                graph = Some(
                    PartiteHypergraph::new(k, n).map_err(|e| FormatError::Parse {
                        line: lineno + 1,
                        msg: e.to_string(),
                    })?,
                );
                header = Some((k, n));
            }
            Some((k, _)) => {
                if fields.len() != k {
                    return Err(FormatError::Parse {
                        line: lineno + 1,
                        msg: format!("edge needs {k} indices, got {}", fields.len()),
                    });
                }
                graph
                    .as_mut()
                    .unwrap()
                    .add_edge(&fields)
                    .map_err(|e| FormatError::Parse {
                        line: lineno + 1,
                        msg: e.to_string(),
                    })?;
            }
        }
    }
    graph.ok_or(FormatError::Parse {
        line: 0,
        msg: "missing `k n` header".into(),
    })
}

pub fn render_instance(h: &PartiteHypergraph) -> String {
    let mut out = String::new();
    out.push_str(&format!("{} {}\n", h.k(), h.n()));
    for edge in h.edge_list() {
        let fields: Vec<String> = edge.iter().map(usize::to_string).collect();
        out.push_str(&fields.join(" "));
        out.push('\n');
    }
    out
}

pub fn read_instance(path: &Path) -> Result<PartiteHypergraph, FormatError> {
    let text = fs::read_to_string(path).map_err(|source| FormatError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_instance(&text)
}

pub fn write_instance(path: &Path, h: &PartiteHypergraph) -> Result<(), FormatError> {
    let mut file = fs::File::create(path).map_err(|source| FormatError::Io {
        path: path.display().to_string(),
        source,
    })?;
    file.write_all(render_instance(h).as_bytes())
        .map_err(|source| FormatError::Io {
            path: path.display().to_string(),
            source,
        })
}
