use std::collections::VecDeque;

use rand::seq::index;
use rand::Rng;

use super::design::{RdsDesign, Regime};
use super::forest::RecruitmentForest;
use crate::error::{Error, Result};
use crate::netgraph::PopulationGraph;

/// Draws `s` distinct seeds, each draw proportional to degree among the
/// nodes not yet chosen.
pub fn draw_seeds_pps<R: Rng>(g: &PopulationGraph, s: usize, rng: &mut R) -> Result<Vec<usize>> {
    let eligible = (0..g.node_count()).filter(|&v| g.degree(v) > 0).count();
    if s > eligible {
        return Err(Error::TooManySeeds {
            requested: s,
            available: eligible,
        });
    }
    let mut taken = vec![false; g.node_count()];
    let mut remaining = g.total_degree();
    let mut seeds = Vec::with_capacity(s);
    for _ in 0..s {
        let v = pps_excluding(g, &taken, remaining, rng).expect("eligible nodes remain");
        taken[v] = true;
        remaining -= g.degree(v) as u64;
        seeds.push(v);
    }
    Ok(seeds)
}

/// One degree-proportional draw over nodes with `taken[v] == false`, whose
/// degrees sum to `weight`.
fn pps_excluding<R: Rng>(g: &PopulationGraph, taken: &[bool], weight: u64, rng: &mut R) -> Option<usize> {
    if weight == 0 {
        return None;
    }
    let mut target = rng.gen_range(0..weight);
    for (v, _) in taken.iter().enumerate().filter(|(_, &t)| !t) {
        let d = g.degree(v) as u64;
        if target < d {
            return Some(v);
        }
        target -= d;
    }
    None
}

/// Degree-proportional draws with replacement.
struct PpsTable {
    cumulative: Vec<u64>,
}

impl PpsTable {
    fn new(g: &PopulationGraph) -> Self {
        let mut acc = 0;
        let cumulative = (0..g.node_count())
            .map(|v| {
                acc += g.degree(v) as u64;
                acc
            })
            .collect();
        Self { cumulative }
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> Option<usize> {
        let total = *self.cumulative.last()?;
        if total == 0 {
            return None;
        }
        let t = rng.gen_range(0..total);
        Some(self.cumulative.partition_point(|&c| c <= t))
    }
}

/// Simulates one RDS sample of `design.target_n` participants from `g`.
///
/// Recruiters are processed first-in first-out. When every chain has died
/// before the target is reached, a fresh seed is drawn (if
/// `reseed_on_death`) or [`Error::SampleStarved`] is returned.
pub fn simulate_rds<R: Rng>(g: &PopulationGraph, design: &RdsDesign, rng: &mut R) -> Result<RecruitmentForest> {
    design.validate(g.node_count())?;
    match design.regime {
        Regime::WithoutReplacement => simulate_coupons(g, design, rng),
        Regime::WithReplacementWalk => simulate_walk(g, design, rng),
    }
}

fn simulate_coupons<R: Rng>(g: &PopulationGraph, design: &RdsDesign, rng: &mut R) -> Result<RecruitmentForest> {
    let target = design.target_n;
    let mut forest = RecruitmentForest::default();
    let mut sampled = vec![false; g.node_count()];
    let mut unsampled_weight = g.total_degree();
    let mut queue = VecDeque::new();

    for v in draw_seeds_pps(g, design.n_seeds, rng)? {
        sampled[v] = true;
        unsampled_weight -= g.degree(v) as u64;
        queue.push_back(forest.push_seed(v, g.node_id(v).to_string(), g.degree(v) as u32));
    }

    let mut available = Vec::new();
    while forest.len() < target {
        let Some(e) = queue.pop_front() else {
            let starved = Error::SampleStarved {
                collected: forest.len(),
                target,
            };
            if !design.reseed_on_death {
                return Err(starved);
            }
            let v = pps_excluding(g, &sampled, unsampled_weight, rng).ok_or(starved)?;
            sampled[v] = true;
            unsampled_weight -= g.degree(v) as u64;
            forest.note_reseed();
            queue.push_back(forest.push_seed(v, g.node_id(v).to_string(), g.degree(v) as u32));
            continue;
        };
        let k = design.draw_recruit_count(rng);
        if k == 0 {
            continue;
        }
        let u = forest.entry(e).node;
        available.clear();
        available.extend(g.neighbours(u).iter().copied().filter(|&v| !sampled[v]));
        let take = k.min(available.len());
        if take == 0 {
            continue;
        }
        for j in index::sample(rng, available.len(), take).iter() {
            if forest.len() == target {
                forest.note_truncated();
                continue;
            }
            let v = available[j];
            sampled[v] = true;
            unsampled_weight -= g.degree(v) as u64;
            queue.push_back(forest.push_recruit(e, v, g.node_id(v).to_string(), g.degree(v) as u32));
        }
    }
    Ok(forest)
}

fn simulate_walk<R: Rng>(g: &PopulationGraph, design: &RdsDesign, rng: &mut R) -> Result<RecruitmentForest> {
    let target = design.target_n;
    let table = PpsTable::new(g);
    let mut forest = RecruitmentForest::default();
    let mut queue = VecDeque::new();
    let seed = |forest: &mut RecruitmentForest, rng: &mut R| {
        table.draw(rng).map(|v| forest.push_seed(v, g.node_id(v).to_string(), g.degree(v) as u32))
    };

    for _ in 0..design.n_seeds {
        let e = seed(&mut forest, rng).ok_or(Error::TooManySeeds {
            requested: design.n_seeds,
            available: 0,
        })?;
        queue.push_back(e);
    }

    while forest.len() < target {
        let Some(e) = queue.pop_front() else {
            if !design.reseed_on_death {
                return Err(Error::SampleStarved {
                    collected: forest.len(),
                    target,
                });
            }
            let e = seed(&mut forest, rng).expect("positive total degree");
            forest.note_reseed();
            queue.push_back(e);
            continue;
        };
        let k = design.draw_recruit_count(rng);
        let u = forest.entry(e).node;
        let nbrs = g.neighbours(u);
        for _ in 0..k {
            if forest.len() == target {
                forest.note_truncated();
                continue;
            }
            let v = nbrs[rng.gen_range(0..nbrs.len())];
            queue.push_back(forest.push_recruit(e, v, g.node_id(v).to_string(), g.degree(v) as u32));
        }
    }
    Ok(forest)
}
