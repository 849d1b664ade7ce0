//! Simulate one RDS sample and write its recruitment forest as CSV.

use std::path::PathBuf;

use rdsvar::netgraph::{largest_connected_component, load_edge_list, EdgeListFormat};
use rdsvar::rds::{simulate_rds, write_forest_csv, RdsDesign};
use rdsvar::rng::RngStream;

fn main() -> rdsvar::Result<()> {
    let edges = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/toy_edges.txt");
    let (g, _) = load_edge_list(&edges, EdgeListFormat::Text)?;
    let g = largest_connected_component(&g);

    // 5 seeds, up to 3 coupons, target 40 participants
    let design = RdsDesign {
        n_seeds: 5,
        ..RdsDesign::three_coupon(40)
    };
    let forest = simulate_rds(&g, &design, &mut RngStream::new(42).rng())?;

    println!(
        "{} participants from {} seeds, {} recruiters, deepest wave {}, {} reseeds, {} recruits cut at the target",
        forest.len(),
        forest.seeds().len(),
        forest.n_recruiters(),
        forest.max_wave(),
        forest.reseeds(),
        forest.truncated()
    );
    for &s in forest.seeds() {
        let e = forest.entry(s);
        let kids: Vec<&str> = forest.children(s).iter().map(|&c| forest.entry(c).id.as_str()).collect();
        println!("seed {} (degree {}) recruited {:?}", e.id, e.degree, kids);
    }

    let mut csv = Vec::new();
    write_forest_csv(&forest, &mut csv)?;
    let text = String::from_utf8(csv).expect("csv is utf-8");
    println!("\nfirst rows of forest.csv:");
    for line in text.lines().take(8) {
        println!("  {line}");
    }
    Ok(())
}
