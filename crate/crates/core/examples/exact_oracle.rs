//! Exact bootstrap laws of a tiny forest, and the balanced-forest moment
//! comparison.

use rdsvar::estimators::Estimator;
use rdsvar::oracle::{check_moment_identity, enumerate_neighbourhood, enumerate_tree, ExactDistribution};
use rdsvar::rds::{ForestRecord, RecruitmentForest};
use rdsvar::resample::{SeedMode, SelectionPool};

fn record(id: &str, recruiter: Option<&str>, degree: u32) -> ForestRecord {
    ForestRecord {
        id: id.into(),
        recruiter_id: recruiter.map(Into::into),
        degree,
        wave: None,
    }
}

fn show(label: &str, d: &ExactDistribution) {
    println!("{label}: mean {:.6}, variance {:.6}", d.mean, d.variance);
    for o in &d.outcomes {
        let p = o.fraction.map_or(format!("{:.6}", o.probability), |f| f.to_string());
        println!("  {:.6} with probability {p}", o.estimate);
    }
}

fn main() -> rdsvar::Result<()> {
    // M recruits N and O; N recruits P
    let forest = RecruitmentForest::from_records(vec![
        record("M", None, 3),
        record("N", Some("M"), 2),
        record("O", Some("M"), 1),
        record("P", Some("N"), 2),
    ])?;
    let z = [0, 1, 0, 0];
    show(
        "neighbourhood, sample mean",
        &enumerate_neighbourhood(&forest, &z, SelectionPool::RecruitersOnly, Estimator::SampleMean, None)?,
    );
    show(
        "tree, sample mean",
        &enumerate_tree(&forest, &z, SeedMode::WithReplacement, Estimator::SampleMean, None)?,
    );
    show(
        "tree, vh",
        &enumerate_tree(&forest, &z, SeedMode::WithReplacement, Estimator::Vh, None)?,
    );

    let balanced = RecruitmentForest::balanced(2, 2, 2);
    let z: Vec<u8> = (0..balanced.len()).map(|i| (i % 3 == 0) as u8).collect();
    let m = check_moment_identity(&balanced, &z)?;
    println!(
        "\nbalanced forest s=2 c=2 h=2: E*[mean] = {:.12}, non-seed mean = {:.12}, full mean = {:.12}",
        m.pooled.mean, m.non_seed_mean, m.full_mean
    );
    println!(
        "n Var*: pooled {:.6}, per tree {:.6}, closed form {:.6}",
        m.pooled_n_variance, m.per_tree_n_variance, m.closed_form.total
    );
    Ok(())
}
