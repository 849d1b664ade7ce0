//! Neighbourhood and tree bootstrap on the same forest: variance and
//! percentile intervals.

use rdsvar::estimators::Estimator;
use rdsvar::experiment::{Population, SyntheticPopulation};
use rdsvar::rds::{simulate_rds, RdsDesign};
use rdsvar::resample::{bootstrap_distribution, BootstrapConfig, Method};
use rdsvar::rng::RngStream;

fn main() -> rdsvar::Result<()> {
    let pop = Population::synthetic(&SyntheticPopulation::power_law(2000, 3))?;
    let forest = simulate_rds(&pop.graph, &RdsDesign::three_coupon(300), &mut RngStream::new(11).rng())?;
    println!("{} participants, {} recruiters\n", forest.len(), forest.n_recruiters());

    let stream = RngStream::new(99);
    println!("{:<18} {:<14} {:>8} {:>8} {:>18}", "attribute", "method", "vh", "se", "95% interval");
    for name in ["independent", "hub_linked", "clustered"] {
        let z = forest.values_for(pop.attributes.column(name)?);
        for method in [Method::Neighbourhood, Method::Tree] {
            let cfg = BootstrapConfig::new(method, 1000, Estimator::Vh);
            let dist = bootstrap_distribution(&forest, &cfg, &z, None, &stream)?;
            let (lo, hi) = dist.percentile_ci(0.95)?;
            println!(
                "{:<18} {:<14} {:>8.4} {:>8.4}   [{:.4}, {:.4}]",
                name,
                method.name(),
                dist.estimator_on_original,
                dist.variance()?.sqrt(),
                lo,
                hi
            );
        }
    }
    Ok(())
}
