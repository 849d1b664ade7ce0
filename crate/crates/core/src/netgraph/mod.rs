//! Population network: an undirected simple graph with opaque string node
//! identifiers mapped onto dense indices.
//!
//! Indices follow a canonical identifier order (numeric identifiers
//! numerically, everything else lexicographically after them), so the same
//! edge set always yields the same graph no matter how the rows were
//! arranged in the input file.

mod attributes;
mod generate;
mod io;

use std::cmp::Ordering;
use std::collections::{HashMap, VecDeque};

use serde::Serialize;

pub use attributes::{load_attributes, load_attributes_for_ids, AttributeTable};
pub use generate::{
    generate_configuration_graph, is_graphical, plant_attributes, DegreeLaw, PlantedAttribute,
    PlantingRule,
};
pub use io::{load_edge_list, parse_edge_list, write_node_map, EdgeListFormat};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PopulationGraph {
    node_ids: Vec<String>,
    adjacency: Vec<Vec<usize>>,
    index: HashMap<String, usize>,
}

/// Summary emitted when an edge list is ingested.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LoadSummary {
    pub nodes: usize,
    pub edges: usize,
    pub duplicates_collapsed: usize,
    /// Component sizes, largest first.
    pub component_sizes: Vec<usize>,
}

/// Canonical identifier order.
pub(crate) fn compare_ids(a: &str, b: &str) -> Ordering {
    match (a.parse::<u64>(), b.parse::<u64>()) {
        (Ok(x), Ok(y)) => x.cmp(&y).then_with(|| a.cmp(b)),
        (Ok(_), Err(_)) => Ordering::Less,
        (Err(_), Ok(_)) => Ordering::Greater,
        (Err(_), Err(_)) => a.cmp(b),
    }
}

impl PopulationGraph {
    /// Builds a graph from undirected edges. Duplicate edges and reversed
    /// orientations collapse; the number of collapsed rows is returned.
    /// Self-loops must be filtered out by the caller.
    pub(crate) fn from_edges<S: AsRef<str>>(edges: &[(S, S)]) -> (Self, usize) {
        let mut ids: Vec<&str> = edges
            .iter()
            .flat_map(|(a, b)| [a.as_ref(), b.as_ref()])
            .collect();
        ids.sort_by(|a, b| compare_ids(a, b));
        ids.dedup();
        let index: HashMap<String, usize> = ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.to_string(), i))
            .collect();

        let mut adjacency = vec![Vec::new(); ids.len()];
        for (a, b) in edges {
            let (i, j) = (index[a.as_ref()], index[b.as_ref()]);
            debug_assert_ne!(i, j);
            adjacency[i].push(j);
            adjacency[j].push(i);
        }
        let mut half_edges = 0;
        for list in &mut adjacency {
            list.sort_unstable();
            list.dedup();
            half_edges += list.len();
        }
        let duplicates = edges.len() - half_edges / 2;
        let node_ids = ids.into_iter().map(str::to_string).collect();
        (
            Self {
                node_ids,
                adjacency,
                index,
            },
            duplicates,
        )
    }

    /// Builds a graph on nodes `0..n` (identifiers are the decimal indices)
    /// from already-deduplicated adjacency lists.
    pub(crate) fn from_adjacency(mut adjacency: Vec<Vec<usize>>) -> Self {
        for list in &mut adjacency {
            list.sort_unstable();
        }
        let node_ids: Vec<String> = (0..adjacency.len()).map(|i| i.to_string()).collect();
        let index = node_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), i))
            .collect();
        Self {
            node_ids,
            adjacency,
            index,
        }
    }

    pub fn empty() -> Self {
        Self::from_adjacency(Vec::new())
    }

    pub fn node_count(&self) -> usize {
        self.node_ids.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn is_empty(&self) -> bool {
        self.node_ids.is_empty()
    }

    pub fn node_ids(&self) -> &[String] {
        &self.node_ids
    }

    pub fn node_id(&self, node: usize) -> &str {
        &self.node_ids[node]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    /// Sorted neighbour indices of `node`.
    pub fn neighbours(&self, node: usize) -> &[usize] {
        &self.adjacency[node]
    }

    pub fn degree(&self, node: usize) -> usize {
        self.adjacency[node].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.adjacency.iter().map(Vec::len).collect()
    }

    pub fn total_degree(&self) -> u64 {
        self.adjacency.iter().map(|a| a.len() as u64).sum()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adjacency[a].binary_search(&b).is_ok()
    }

    /// Connected components in order of their smallest node index; each
    /// component lists its nodes in ascending index order.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.node_count();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        let mut queue = VecDeque::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            queue.push_back(start);
            let mut members = Vec::new();
            while let Some(u) = queue.pop_front() {
                members.push(u);
                for &v in &self.adjacency[u] {
                    if !seen[v] {
                        seen[v] = true;
                        queue.push_back(v);
                    }
                }
            }
            members.sort_unstable();
            out.push(members);
        }
        out
    }

    pub fn component_sizes(&self) -> Vec<usize> {
        let mut sizes: Vec<usize> = self.components().iter().map(Vec::len).collect();
        sizes.sort_unstable_by(|a, b| b.cmp(a));
        sizes
    }

    pub fn is_connected(&self) -> bool {
        self.components().len() <= 1
    }

    /// Subgraph induced by `nodes` (any order, no duplicates); identifiers
    /// are preserved and the canonical order is kept.
    pub fn induced_subgraph(&self, nodes: &[usize]) -> PopulationGraph {
        let mut keep: Vec<usize> = nodes.to_vec();
        keep.sort_unstable();
        keep.dedup();
        let mut remap = vec![usize::MAX; self.node_count()];
        for (new, &old) in keep.iter().enumerate() {
            remap[old] = new;
        }
        let adjacency = keep
            .iter()
            .map(|&old| {
                self.adjacency[old]
                    .iter()
                    .filter_map(|&v| (remap[v] != usize::MAX).then_some(remap[v]))
                    .collect()
            })
            .collect();
        let node_ids: Vec<String> = keep.iter().map(|&i| self.node_ids[i].clone()).collect();
        let index = node_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), i))
            .collect();
        PopulationGraph {
            node_ids,
            adjacency,
            index,
        }
    }

    pub fn summary(&self, duplicates_collapsed: usize) -> LoadSummary {
        LoadSummary {
            nodes: self.node_count(),
            edges: self.edge_count(),
            duplicates_collapsed,
            component_sizes: self.component_sizes(),
        }
    }
}

/// Induced subgraph on the largest connected component. Ties go to the
/// component containing the smallest node identifier.
pub fn largest_connected_component(g: &PopulationGraph) -> PopulationGraph {
    let mut best: Option<Vec<usize>> = None;
    // components() is ordered by smallest member, so strict `>` keeps the
    // earliest (smallest-id) component on ties.
    for comp in g.components() {
        if best.as_ref().is_none_or(|b| comp.len() > b.len()) {
            best = Some(comp);
        }
    }
    match best {
        Some(nodes) if nodes.len() == g.node_count() => g.clone(),
        Some(nodes) => g.induced_subgraph(&nodes),
        None => PopulationGraph::empty(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(edges: &[(&str, &str)]) -> PopulationGraph {
        PopulationGraph::from_edges(edges).0
    }

    #[test]
    fn id_order_is_numeric_first() {
        let mut ids = vec!["b", "10", "2", "a", "1"];
        ids.sort_by(|a, b| compare_ids(a, b));
        assert_eq!(ids, ["1", "2", "10", "a", "b"]);
    }

    #[test]
    fn symmetric_dedup() {
        let (g, dups) = PopulationGraph::from_edges(&[("a", "b"), ("b", "a"), ("b", "c")]);
        assert_eq!(g.node_count(), 3);
        assert_eq!(g.edge_count(), 2);
        assert_eq!(dups, 1);
        let deg: Vec<_> = ["a", "b", "c"]
            .iter()
            .map(|id| g.degree(g.index_of(id).unwrap()))
            .collect();
        assert_eq!(deg, [1, 2, 1]);
    }

    #[test]
    fn lcc_picks_largest() {
        let g = graph(&[("1", "2"), ("2", "3"), ("4", "5")]);
        let lcc = largest_connected_component(&g);
        assert_eq!(lcc.node_ids(), ["1", "2", "3"]);
        assert_eq!(lcc.edge_count(), 2);
    }

    #[test]
    fn lcc_tie_breaks_on_smallest_id() {
        let g = graph(&[("9", "8"), ("3", "7")]);
        let lcc = largest_connected_component(&g);
        assert_eq!(lcc.node_ids(), ["3", "7"]);
    }

    #[test]
    fn lcc_of_connected_is_identity() {
        let g = graph(&[("a", "b"), ("b", "c"), ("c", "a")]);
        assert_eq!(largest_connected_component(&g), g);
    }

    #[test]
    fn lcc_of_empty_is_empty() {
        let lcc = largest_connected_component(&PopulationGraph::empty());
        assert_eq!(lcc.node_count(), 0);
        assert_eq!(lcc.edge_count(), 0);
    }

    #[test]
    fn induced_subgraph_keeps_ids() {
        let g = graph(&[("1", "2"), ("2", "3"), ("3", "4")]);
        let sub = g.induced_subgraph(&[3, 1, 2]);
        assert_eq!(sub.node_ids(), ["2", "3", "4"]);
        assert_eq!(sub.edge_count(), 2);
        assert!(sub.is_connected());
    }
}
