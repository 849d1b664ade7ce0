use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{LoadSummary, PopulationGraph};
use crate::error::{Error, Result};

/// Field separator of an edge-list file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum EdgeListFormat {
    /// Two ids per line separated by whitespace and/or commas.
    #[default]
    Text,
    /// Strictly comma-separated, so ids may contain spaces. There is no
    /// header row; comment it out with `#` if present.
    Csv,
}

impl EdgeListFormat {
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => EdgeListFormat::Csv,
            _ => EdgeListFormat::Text,
        }
    }
}

/// Reads an edge list from `path`.
pub fn load_edge_list(path: &Path, format: EdgeListFormat) -> Result<(PopulationGraph, LoadSummary)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_edge_list(file, format, &path.display().to_string())
}

/// Parses an edge list from any reader. `source` names the input in error
/// messages.
pub fn parse_edge_list<R: Read>(
    reader: R,
    format: EdgeListFormat,
    source: &str,
) -> Result<(PopulationGraph, LoadSummary)> {
    let mut edges: Vec<(String, String)> = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io(source, e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = match format {
            EdgeListFormat::Text => trimmed
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|f| !f.is_empty())
                .collect(),
            EdgeListFormat::Csv => trimmed.split(',').map(str::trim).collect(),
        };
        if fields.len() != 2 || fields.iter().any(|f| f.is_empty()) {
            return Err(Error::Parse {
                path: source.to_string(),
                line: line_no,
                message: format!("expected two node ids, found `{trimmed}`"),
            });
        }
        if fields[0] == fields[1] {
            return Err(Error::SelfLoop {
                path: source.to_string(),
                line: line_no,
                node: fields[0].to_string(),
            });
        }
        edges.push((fields[0].to_string(), fields[1].to_string()));
    }
    let (graph, duplicates) = PopulationGraph::from_edges(&edges);
    let summary = graph.summary(duplicates);
    Ok((graph, summary))
}

/// Writes the `index,id` mapping of a graph as CSV.
pub fn write_node_map<W: Write>(graph: &PopulationGraph, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["index", "id"])?;
    for (i, id) in graph.node_ids().iter().enumerate() {
        w.write_record([i.to_string().as_str(), id])?;
    }
    w.flush().map_err(|e| Error::io("node map", e))?;
    Ok(())
}
