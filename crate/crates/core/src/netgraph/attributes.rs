use std::collections::HashMap;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use super::PopulationGraph;
use crate::error::{Error, Result};

/// Binary node attributes, stored column-major and aligned to node indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttributeTable {
    column_names: Vec<String>,
    columns: Vec<Vec<u8>>,
}

impl AttributeTable {
    pub fn new(column_names: Vec<String>, columns: Vec<Vec<u8>>) -> Result<Self> {
        if column_names.len() != columns.len() {
            return Err(Error::InvalidData(format!(
                "{} column names for {} columns",
                column_names.len(),
                columns.len()
            )));
        }
        if let Some(first) = columns.first() {
            if columns.iter().any(|c| c.len() != first.len()) {
                return Err(Error::InvalidData("attribute columns differ in length".into()));
            }
        }
        for (name, col) in column_names.iter().zip(&columns) {
            if let Some(row) = col.iter().position(|&v| v > 1) {
                return Err(Error::InvalidAttributeValue {
                    row: row + 1,
                    column: name.clone(),
                    value: col[row].to_string(),
                });
            }
        }
        Ok(Self {
            column_names,
            columns,
        })
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn n_columns(&self) -> usize {
        self.columns.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.column_names
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))
    }

    pub fn column(&self, name: &str) -> Result<&[u8]> {
        Ok(&self.columns[self.column_index(name)?])
    }

    pub fn column_at(&self, index: usize) -> &[u8] {
        &self.columns[index]
    }

    /// Keeps only the named columns, in the given order.
    pub fn select(&self, names: &[String]) -> Result<AttributeTable> {
        let columns = names
            .iter()
            .map(|n| self.column(n).map(<[u8]>::to_vec))
            .collect::<Result<Vec<_>>>()?;
        Ok(AttributeTable {
            column_names: names.to_vec(),
            columns,
        })
    }
}

/// Loads an attribute CSV aligned to the nodes of `g`.
pub fn load_attributes(path: &Path, g: &PopulationGraph) -> Result<AttributeTable> {
    load_attributes_for_ids(path, g.node_ids())
}

/// Loads an attribute CSV (header row, first column `id`, remaining columns
/// 0/1) and aligns it to `ids`. Rows for ids outside `ids` are ignored.
pub fn load_attributes_for_ids(path: &Path, ids: &[String]) -> Result<AttributeTable> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_attributes(file, ids)
}

pub(crate) fn read_attributes<R: Read>(reader: R, ids: &[String]) -> Result<AttributeTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.get(0) != Some("id") {
        return Err(Error::InvalidData(
            "attribute CSV must start with an `id` column".into(),
        ));
    }
    if header.len() < 2 {
        return Err(Error::InvalidData(
            "attribute CSV needs at least one attribute column".into(),
        ));
    }
    let names: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let position: HashMap<&str, usize> = ids
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();

    const UNSET: u8 = u8::MAX;
    let mut columns = vec![vec![UNSET; ids.len()]; names.len()];
    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        let row = r + 1;
        let Some(&node) = record.get(0).and_then(|id| position.get(id)) else {
            continue;
        };
        if columns[0][node] != UNSET {
            return Err(Error::InvalidData(format!(
                "duplicate attribute row for node `{}`",
                ids[node]
            )));
        }
        for (c, name) in names.iter().enumerate() {
            let raw = record.get(c + 1).unwrap_or("");
            columns[c][node] = match raw {
                "0" => 0,
                "1" => 1,
                _ => {
                    return Err(Error::InvalidAttributeValue {
                        row,
                        column: name.clone(),
                        value: raw.to_string(),
                    })
                }
            };
        }
    }

    let missing: Vec<String> = columns[0]
        .iter()
        .enumerate()
        .filter(|(_, &v)| v == UNSET)
        .map(|(i, _)| ids[i].clone())
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingAttributes { ids: missing });
    }
    AttributeTable::new(names, columns)
}
