//! With-replacement random-walk regime: repeated samples, mean VH and IPW
//! against the population proportion.

use rdsvar::estimators::{Estimator, WeightedSample};
use rdsvar::experiment::{true_proportion, Population, SyntheticPopulation};
use rdsvar::rds::{simulate_rds, RdsDesign, Regime};
use rdsvar::rng::RngStream;

fn main() -> rdsvar::Result<()> {
    let pop = Population::synthetic(&SyntheticPopulation::power_law(200, 44))?;
    let totals = pop.totals()?;
    let design = RdsDesign {
        n_seeds: 5,
        regime: Regime::WithReplacementWalk,
        ..RdsDesign::three_coupon(200)
    };
    let reps = 2000;
    let stream = RngStream::new(8);
    let name = "hub_linked";
    let column = pop.attributes.column(name)?;
    let (mut vh, mut ipw, mut mean) = (0.0, 0.0, 0.0);
    let mut visits = vec![0u64; pop.graph.node_count()];
    for r in 0..reps {
        let forest = simulate_rds(&pop.graph, &design, &mut stream.derive(r).rng())?;
        for e in forest.entries() {
            visits[e.node] += 1;
        }
        let ws = WeightedSample::from_pairs(&forest.values_for(column), &forest.degrees())?;
        vh += Estimator::Vh.estimate(&ws, None)?;
        ipw += Estimator::Ipw.estimate(&ws, Some(&totals))?;
        mean += Estimator::SampleMean.estimate(&ws, None)?;
    }
    let r = reps as f64;
    println!("{name}: mu {:.4}", true_proportion(&pop, name)?);
    println!("  average vh {:.4}, ipw {:.4}, sample mean {:.4}", vh / r, ipw / r, mean / r);

    // visit frequency tracks degree
    let total: u64 = visits.iter().sum();
    let mut by_degree: Vec<(usize, f64)> = (0..pop.graph.node_count())
        .map(|v| (pop.graph.degree(v), visits[v] as f64 / total as f64))
        .collect();
    by_degree.sort_by_key(|&(d, _)| d);
    let expected = |d: usize| d as f64 / pop.graph.total_degree() as f64;
    for &(d, f) in [by_degree[0], by_degree[by_degree.len() / 2], by_degree[by_degree.len() - 1]].iter() {
        println!("  degree {d:>3}: visit share {f:.5}, stationary {:.5}", expected(d));
    }
    Ok(())
}
