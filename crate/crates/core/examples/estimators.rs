//! Sample mean, VH and IPW on a simulated sample, plus the VH degree-scale
//! invariance.

use rdsvar::estimators::{ipw_estimate, sample_mean, vh_estimate, WeightedSample};
use rdsvar::experiment::{true_proportion, Population, SyntheticPopulation};
use rdsvar::rds::{simulate_rds, RdsDesign};
use rdsvar::rng::RngStream;

fn main() -> rdsvar::Result<()> {
    let pop = Population::synthetic(&SyntheticPopulation::power_law(2000, 1))?;
    let totals = pop.totals()?;
    let forest = simulate_rds(&pop.graph, &RdsDesign::three_coupon(300), &mut RngStream::new(7).rng())?;
    let degrees = forest.degrees();

    println!("{:<18} {:>8} {:>8} {:>8} {:>8}", "attribute", "truth", "mean", "vh", "ipw");
    for name in pop.attributes.column_names() {
        let z = forest.values_for(pop.attributes.column(name)?);
        let ws = WeightedSample::from_pairs(&z, &degrees)?;
        println!(
            "{:<18} {:>8.4} {:>8.4} {:>8.4} {:>8.4}",
            name,
            true_proportion(&pop, name)?,
            sample_mean(&ws)?,
            vh_estimate(&ws)?,
            ipw_estimate(&ws, &totals)?
        );
    }

    let z = forest.values_for(pop.attributes.column("hub_linked")?);
    let base = vh_estimate(&WeightedSample::from_pairs(&z, &degrees)?)?;
    for k in [2, 10, 1000] {
        let scaled: Vec<u32> = degrees.iter().map(|d| d * k).collect();
        let v = vh_estimate(&WeightedSample::from_pairs(&z, &scaled)?)?;
        println!("degrees x{k:<4}: vh = {v} (identical: {})", v == base);
    }
    Ok(())
}
