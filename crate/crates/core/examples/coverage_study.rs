//! Small Monte Carlo study: coverage, width and relative bias of both
//! bootstrap methods. Build with --release for larger settings.
//!
//! cargo run --release --example coverage_study [R] [B]

use rdsvar::experiment::{run_experiment, write_report_csv, ExperimentConfig, Population, SyntheticPopulation};
use rdsvar::rds::RdsDesign;

fn main() -> rdsvar::Result<()> {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<usize>().expect("integer argument"));
    let r = args.next().unwrap_or(40);
    let b = args.next().unwrap_or(100);

    let pop = Population::synthetic(&SyntheticPopulation::power_law(1500, 5))?;
    let attrs = pop.attributes.column_names().to_vec();
    let mut cfg = ExperimentConfig::new(RdsDesign::three_coupon(200), attrs, r, b, 17);
    cfg.n_width_reference = 200;
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    let report = run_experiment(&pop, &cfg, workers)?;

    for t in &report.truth {
        println!("{}: mu = {:.4}", t.attribute, t.mu);
    }
    println!();
    write_report_csv(&report, std::io::stdout())?;
    let d = &report.diagnostics;
    println!(
        "\n{} of {} replications used, {} reseeds in total",
        d.replications_used, d.replications_requested, d.total_reseeds
    );
    Ok(())
}
