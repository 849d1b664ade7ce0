//! Acceptance criteria 1-8. Runs without the libtest harness so that each
//! criterion's `criterion N: PASS|FAIL` line is always printed; the process
//! exits nonzero if any criterion fails.

use std::sync::OnceLock;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rdsvar::estimators::{Estimator, PopulationTotals, WeightedSample};
use rdsvar::experiment::{
    run_experiment, true_proportion, write_report_csv, ExperimentConfig, ExperimentReport, Population,
    SyntheticPopulation,
};
use rdsvar::netgraph::{parse_edge_list, EdgeListFormat, PopulationGraph};
use rdsvar::oracle::{check_moment_identity, enumerate_neighbourhood, enumerate_tree, ExactDistribution};
use rdsvar::rds::{simulate_rds, ForestRecord, RdsDesign, RecruitmentForest, Regime};
use rdsvar::resample::{bootstrap_distribution, BootstrapConfig, Method, SeedMode, SelectionPool};
use rdsvar::rng::RngStream;

fn verdict(criterion: u32, pass: bool, detail: &str) {
    println!("criterion {criterion}: {} ({detail})", if pass { "PASS" } else { "FAIL" });
}

// ---------------------------------------------------------------- 1

/// Random forest with at most six recruiters, each with at most two recruits.
fn random_forest(rng: &mut ChaCha8Rng) -> (RecruitmentForest, Vec<u8>) {
    let n_seeds = rng.gen_range(1..=3);
    let mut records: Vec<ForestRecord> = Vec::new();
    let mut frontier: Vec<usize> = Vec::new();
    for _ in 0..n_seeds {
        frontier.push(records.len());
        records.push(ForestRecord {
            id: format!("n{}", records.len()),
            recruiter_id: None,
            degree: rng.gen_range(1..=8),
            wave: None,
        });
    }
    let target_recruiters = rng.gen_range(1..=6);
    let mut recruiters = 0;
    let mut cursor = 0;
    while recruiters < target_recruiters && cursor < frontier.len() {
        let parent = frontier[cursor];
        cursor += 1;
        if cursor > 1 && rng.gen_bool(0.25) {
            continue;
        }
        recruiters += 1;
        for _ in 0..rng.gen_range(1..=2) {
            frontier.push(records.len());
            records.push(ForestRecord {
                id: format!("n{}", records.len()),
                recruiter_id: Some(records[parent].id.clone()),
                degree: rng.gen_range(1..=8),
                wave: None,
            });
        }
    }
    let z = (0..records.len()).map(|_| rng.gen_range(0..=1)).collect();
    (RecruitmentForest::from_records(records).unwrap(), z)
}

/// Raw moments `E[X^k]`, k = 1..=4, of an exact distribution.
fn exact_moments(d: &ExactDistribution) -> [f64; 4] {
    let mut m = [0.0; 4];
    for o in &d.outcomes {
        for (k, slot) in m.iter_mut().enumerate() {
            *slot += o.probability * o.estimate.powi(k as i32 + 1);
        }
    }
    m
}

fn criterion_1_monte_carlo_matches_oracle() -> bool {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_601);
    let b = 100_000;
    let n_forests = 24;
    let mut checks = 0;
    let mut worst = 0.0f64;
    let mut failures = Vec::new();
    for f in 0..n_forests {
        let (forest, z) = random_forest(&mut rng);
        assert!(forest.n_recruiters() <= 6);
        assert!(forest.recruiters().iter().all(|&r| forest.children(r).len() <= 2));
        for method in [Method::Neighbourhood, Method::Tree] {
            for estimator in [Estimator::SampleMean, Estimator::Vh] {
                let exact = match method {
                    Method::Neighbourhood => {
                        enumerate_neighbourhood(&forest, &z, SelectionPool::RecruitersOnly, estimator, None)
                    }
                    Method::Tree => enumerate_tree(&forest, &z, SeedMode::WithReplacement, estimator, None),
                }
                .unwrap();
                let cfg = BootstrapConfig::new(method, b, estimator);
                let stream = RngStream::new(1000 + f as u64);
                let mc = bootstrap_distribution(&forest, &cfg, &z, None, &stream).unwrap();
                let bf = b as f64;
                let mean = mc.estimates.iter().sum::<f64>() / bf;
                let var = mc.estimates.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (bf - 1.0);

                let [m1, m2, m3, m4] = exact_moments(&exact);
                let sigma2 = exact.variance;
                let mu4 = m4 - 4.0 * m1 * m3 + 6.0 * m1 * m1 * m2 - 3.0 * m1.powi(4);
                let se_mean = (sigma2 / bf).sqrt();
                let se_var = ((mu4 - sigma2 * sigma2).max(0.0) / bf).sqrt();
                for (what, got, want, se) in [("mean", mean, exact.mean, se_mean), ("variance", var, sigma2, se_var)] {
                    checks += 1;
                    let diff = (got - want).abs();
                    let z_score = if se > 0.0 { diff / se } else if diff < 1e-12 { 0.0 } else { f64::INFINITY };
                    worst = worst.max(z_score);
                    if z_score > 3.0 {
                        failures.push(format!("forest {f} {method:?} {estimator:?} {what}: {z_score:.2} SE"));
                    }
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = failures.is_empty() && secs < 120.0;
    verdict(
        1,
        pass,
        &format!("{n_forests} forests, {checks} moment checks, worst {worst:.2} SE, {secs:.1}s; {failures:?}"),
    );
    pass
}

// ---------------------------------------------------------------- 2

fn criterion_2_balanced_forest_expectation() -> bool {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    let mut cases = 0;
    for s in [1, 2] {
        for h in [1, 2] {
            let forest = RecruitmentForest::balanced(s, 2, h);
            for _ in 0..8 {
                let z: Vec<u8> = (0..forest.len()).map(|_| rng.gen_range(0..=1)).collect();
                let m = check_moment_identity(&forest, &z).unwrap();
                worst = worst.max(m.pooled_mean_minus_non_seed_mean);
                cases += 1;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = worst < 1e-12 && secs < 1.0;
    verdict(2, pass, &format!("{cases} forest/z cases, max |E* - non-seed mean| = {worst:e}, {secs:.3}s"));
    pass
}

// ---------------------------------------------------------------- 3

/// Circulant graph: node i joined to i +- 1..=k/2, so every degree is k.
fn circulant(n: usize, k: usize) -> PopulationGraph {
    let mut text = String::new();
    for i in 0..n {
        for j in 1..=k / 2 {
            text.push_str(&format!("{i} {}\n", (i + j) % n));
        }
    }
    parse_edge_list(text.as_bytes(), EdgeListFormat::Text, "circulant").unwrap().0
}

fn criterion_3_estimator_sanity() -> bool {
    let g = circulant(300, 6);
    assert!((0..g.node_count()).all(|v| g.degree(v) == 6));
    let totals = PopulationTotals::from_graph(&g).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let z_pop: Vec<u8> = (0..g.node_count()).map(|_| rng.gen_range(0..=1)).collect();
    let design = RdsDesign::three_coupon(80);
    let mut regular_ok = 0;
    let n_forests = 100;
    for t in 0..n_forests {
        let forest = simulate_rds(&g, &design, &mut RngStream::new(t).rng()).unwrap();
        let ws = WeightedSample::from_pairs(&forest.values_for(&z_pop), &forest.degrees()).unwrap();
        let mean = Estimator::SampleMean.estimate(&ws, None).unwrap();
        let vh = Estimator::Vh.estimate(&ws, None).unwrap();
        let ipw = Estimator::Ipw.estimate(&ws, Some(&totals)).unwrap();
        if vh.to_bits() == mean.to_bits() && ipw.to_bits() == mean.to_bits() {
            regular_ok += 1;
        }
    }

    // degree scaling on an irregular population
    let pop = Population::synthetic(&SyntheticPopulation::power_law(600, 11)).unwrap();
    let z_pop = pop.attributes.column("hub_linked").unwrap();
    let mut scale_ok = 0;
    let mut scale_checks = 0;
    for t in 0..n_forests {
        let forest = simulate_rds(&pop.graph, &design, &mut RngStream::new(t).rng()).unwrap();
        let z = forest.values_for(z_pop);
        let degrees = forest.degrees();
        let base = Estimator::Vh.estimate(&WeightedSample::from_pairs(&z, &degrees).unwrap(), None).unwrap();
        for k in [2u32, 10, 1000] {
            let scaled: Vec<u32> = degrees.iter().map(|d| d * k).collect();
            let v = Estimator::Vh.estimate(&WeightedSample::from_pairs(&z, &scaled).unwrap(), None).unwrap();
            scale_checks += 1;
            if v.to_bits() == base.to_bits() {
                scale_ok += 1;
            }
        }
    }
    let pass = regular_ok == n_forests && scale_ok == scale_checks;
    verdict(
        3,
        pass,
        &format!(
            "VH = IPW = mean bit-for-bit on {regular_ok}/{n_forests} regular-graph forests; \
             VH scale invariance {scale_ok}/{scale_checks}"
        ),
    );
    pass
}

// ---------------------------------------------------------------- 4

fn criterion_4_walk_regime_unbiased() -> bool {
    let start = Instant::now();
    let pop = Population::synthetic(&SyntheticPopulation::power_law(200, 44)).unwrap();
    let totals = pop.totals().unwrap();
    // VH is a ratio estimator with O(1/n) bias; at n = 1000 it sits well
    // below the Monte Carlo resolution of 10^4 replications
    let n = 1000;
    let design = RdsDesign {
        n_seeds: 5,
        regime: Regime::WithReplacementWalk,
        ..RdsDesign::three_coupon(n)
    };
    let reps = 10_000;
    let stream = RngStream::new(4);
    let columns = ["independent", "hub_linked"];
    let estimators = [(Estimator::Vh, "vh"), (Estimator::Ipw, "ipw")];
    let mut estimates = vec![Vec::with_capacity(reps); columns.len() * estimators.len()];
    for r in 0..reps {
        let forest = simulate_rds(&pop.graph, &design, &mut stream.derive(r as u64).rng()).unwrap();
        let degrees = forest.degrees();
        for (c, name) in columns.iter().enumerate() {
            let z = forest.values_for(pop.attributes.column(name).unwrap());
            let ws = WeightedSample::from_pairs(&z, &degrees).unwrap();
            for (e, (est, _)) in estimators.iter().enumerate() {
                estimates[c * estimators.len() + e].push(est.estimate(&ws, Some(&totals)).unwrap());
            }
        }
    }
    let mut pass = true;
    let mut detail = Vec::new();
    for (c, name) in columns.iter().enumerate() {
        let mu = true_proportion(&pop, name).unwrap();
        for (e, (est, label)) in estimators.iter().enumerate() {
            let xs = &estimates[c * estimators.len() + e];
            let r = reps as f64;
            let mean = xs.iter().sum::<f64>() / r;
            let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (r - 1.0)).sqrt();
            let z = (mean - mu).abs() / (sd / r.sqrt());
            if *est == Estimator::Vh {
                pass &= z < 3.0;
            }
            detail.push(format!("{name} {label}: {mean:.5} vs mu {mu:.5}, {z:.2} SE"));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    pass &= secs < 60.0;
    verdict(
        4,
        pass,
        &format!("{} nodes, {reps} walks of {n}; {}; {secs:.1}s", pop.graph.node_count(), detail.join("; ")),
    );
    pass
}

// ---------------------------------------------------------------- 5-8

const POPULATION_SEED: u64 = 90;
const MASTER_SEED: u64 = 2024;

fn population() -> &'static Population {
    static POP: OnceLock<Population> = OnceLock::new();
    POP.get_or_init(|| Population::synthetic(&SyntheticPopulation::power_law(4000, POPULATION_SEED)).unwrap())
}

fn attributes() -> Vec<String> {
    population().attributes.column_names().to_vec()
}

fn config_n500() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(RdsDesign::three_coupon(500), attributes(), 200, 200, MASTER_SEED);
    cfg.n_width_reference = 1000;
    cfg.ci_levels = vec![0.95];
    cfg
}

fn config_n1000() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(RdsDesign::three_coupon(1000), attributes(), 300, 500, MASTER_SEED);
    cfg.n_width_reference = 0;
    cfg.ci_levels = vec![0.95];
    cfg
}

fn timed_run(cfg: &ExperimentConfig, workers: usize) -> (ExperimentReport, f64) {
    let start = Instant::now();
    let report = run_experiment(population(), cfg, workers).unwrap();
    (report, start.elapsed().as_secs_f64())
}

fn run_n500() -> &'static (ExperimentReport, f64) {
    static RUN: OnceLock<(ExperimentReport, f64)> = OnceLock::new();
    RUN.get_or_init(|| timed_run(&config_n500(), 1))
}

fn run_n1000() -> &'static (ExperimentReport, f64) {
    static RUN: OnceLock<(ExperimentReport, f64)> = OnceLock::new();
    RUN.get_or_init(|| timed_run(&config_n1000(), 1))
}

fn csv_bytes(report: &ExperimentReport) -> Vec<u8> {
    let mut out = Vec::new();
    write_report_csv(report, &mut out).unwrap();
    out
}

fn criterion_5_relative_bias_direction() -> bool {
    let (report, secs) = run_n500();
    let attrs = attributes();
    let mut tree_positive = 0;
    let mut nb_smaller = 0;
    let mut detail = Vec::new();
    for a in &attrs {
        let tree = report.row(a, Method::Tree, 0.95).unwrap().rel_bias.unwrap_or(f64::NAN);
        let nb = report.row(a, Method::Neighbourhood, 0.95).unwrap().rel_bias.unwrap_or(f64::NAN);
        tree_positive += (tree > 0.0) as usize;
        nb_smaller += (nb.abs() < tree) as usize;
        detail.push(format!("{a} tree {tree:.2} nb {nb:.2}"));
    }
    let pass = tree_positive == attrs.len() && nb_smaller >= 4 && *secs < 1800.0;
    verdict(5, pass, &format!(
        "tree RB > 0 for {tree_positive}/{n}, |nb RB| < tree RB for {nb_smaller}/{n}; {}; {secs:.1}s",
        detail.join(", "),
        n = attrs.len()
    ));
    pass
}

fn criterion_6_width_ordering() -> bool {
    let (report, _) = run_n500();
    let attrs = attributes();
    let mut tree_wider = 0;
    let mut nb_closer = 0;
    let mut detail = Vec::new();
    for a in &attrs {
        let tree = report.row(a, Method::Tree, 0.95).unwrap();
        let nb = report.row(a, Method::Neighbourhood, 0.95).unwrap();
        let expected = nb.expected_width.unwrap();
        tree_wider += (tree.mean_width > nb.mean_width) as usize;
        nb_closer += ((nb.mean_width - expected).abs() < (tree.mean_width - expected).abs()) as usize;
        detail.push(format!("{a} expected {expected:.4} nb {:.4} tree {:.4}", nb.mean_width, tree.mean_width));
    }
    // the criterion's threshold is 10 of 12 attributes; scaled to five
    let needed = (attrs.len() * 10).div_ceil(12);
    let pass = tree_wider == attrs.len() && nb_closer >= needed;
    verdict(
        6,
        pass,
        &format!(
            "tree wider for {tree_wider}/{n}, nb closer to expected for {nb_closer}/{n} (need {needed}); {}",
            detail.join(", "),
            n = attrs.len()
        ),
    );
    pass
}

fn criterion_7_coverage() -> bool {
    let (report, secs) = run_n1000();
    let attrs = attributes();
    let mut nb_in_band = 0;
    let mut nb_closer = 0;
    let mut detail = Vec::new();
    for a in &attrs {
        let nb = report.row(a, Method::Neighbourhood, 0.95).unwrap().coverage;
        let tree = report.row(a, Method::Tree, 0.95).unwrap().coverage;
        nb_in_band += (0.90..=0.98).contains(&nb) as usize;
        nb_closer += ((nb - 0.95).abs() <= (tree - 0.95).abs()) as usize;
        detail.push(format!("{a} nb {nb:.3} tree {tree:.3}"));
    }
    let pass = nb_in_band == attrs.len() && 2 * nb_closer > attrs.len() && *secs < 3600.0;
    verdict(
        7,
        pass,
        &format!(
            "nb coverage in [0.90, 0.98] for {nb_in_band}/{n}, nb at least as close to 0.95 for {nb_closer}/{n}; {}; {secs:.1}s",
            detail.join(", "),
            n = attrs.len()
        ),
    );
    pass
}

fn criterion_8_worker_independence() -> bool {
    let (a500, _) = run_n500();
    let (b500, _) = timed_run(&config_n500(), 2);
    let (a1000, _) = run_n1000();
    let (b1000, _) = timed_run(&config_n1000(), 3);
    let same500 = csv_bytes(a500) == csv_bytes(&b500);
    let same1000 = csv_bytes(a1000) == csv_bytes(&b1000);
    let pass = same500 && same1000;
    verdict(
        8,
        pass,
        &format!("n=500 report identical with 1 and 2 workers: {same500}; n=1000 with 1 and 3 workers: {same1000}"),
    );
    pass
}

fn main() {
    let criteria: [fn() -> bool; 8] = [
        criterion_1_monte_carlo_matches_oracle,
        criterion_2_balanced_forest_expectation,
        criterion_3_estimator_sanity,
        criterion_4_walk_regime_unbiased,
        criterion_5_relative_bias_direction,
        criterion_6_width_ordering,
        criterion_7_coverage,
        criterion_8_worker_independence,
    ];
    let failed = criteria.iter().filter(|c| !c()).count();
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
