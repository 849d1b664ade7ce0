//! Load an edge list and attribute table, keep the largest component.
//!
//! cargo run --example load_graph [edges] [attributes]

use std::path::PathBuf;

use rdsvar::netgraph::{largest_connected_component, load_attributes, load_edge_list, EdgeListFormat};

fn main() -> rdsvar::Result<()> {
    let data = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data");
    let mut args = std::env::args().skip(1);
    let edges = args.next().map(PathBuf::from).unwrap_or(data.join("toy_edges.txt"));
    let attrs = args.next().map(PathBuf::from).unwrap_or(data.join("toy_attributes.csv"));

    let (g, summary) = load_edge_list(&edges, EdgeListFormat::from_path(&edges))?;
    println!(
        "{} nodes, {} edges, {} duplicate edges collapsed",
        summary.nodes, summary.edges, summary.duplicates_collapsed
    );
    println!("component sizes: {:?}", summary.component_sizes);

    let lcc = largest_connected_component(&g);
    let degrees = lcc.degrees();
    println!(
        "largest component: {} nodes, degrees {}..={}, mean {:.2}",
        lcc.node_count(),
        degrees.iter().min().unwrap(),
        degrees.iter().max().unwrap(),
        lcc.total_degree() as f64 / lcc.node_count() as f64
    );

    let table = load_attributes(&attrs, &lcc)?;
    for name in table.column_names() {
        let z = table.column(name)?;
        let ones = z.iter().filter(|&&v| v == 1).count();
        println!("{name}: {ones}/{} positive", z.len());
    }
    Ok(())
}
