//! Exact bootstrap distributions for small forests by exhaustive enumeration.
//!
//! Draw counts are enumerated as compositions weighted by multinomial
//! coefficients rather than as ordered tuples, since the resampled multiset
//! depends only on how often each individual was drawn. Probabilities are
//! kept as exact fractions while they fit in 128-bit integers.

use std::collections::HashMap;

use num_rational::Ratio;
use num_traits::{CheckedAdd, CheckedMul, ToPrimitive};
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::estimators::{Estimator, PopulationTotals};
use crate::rds::RecruitmentForest;
use crate::resample::{DegreeClasses, Resample, SeedMode, SelectionPool};

/// Largest number of raw draw sequences (neighbourhood) or enumerated
/// branch outcomes (tree) the oracle will visit.
pub const ENUMERATION_BUDGET: f64 = 1e7;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Outcome {
    pub estimate: f64,
    pub probability: f64,
    /// Exact probability, when every factor fitted in 128-bit arithmetic.
    #[serde(serialize_with = "fraction_string")]
    pub fraction: Option<Ratio<u128>>,
}

fn fraction_string<S: Serializer>(f: &Option<Ratio<u128>>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match f {
        Some(r) => s.serialize_str(&format!("{}/{}", r.numer(), r.denom())),
        None => s.serialize_none(),
    }
}

/// Exact law of a bootstrap statistic: distinct values in ascending order
/// with their probabilities.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExactDistribution {
    pub outcomes: Vec<Outcome>,
    pub mean: f64,
    pub variance: f64,
    pub total_probability: f64,
    pub exact: bool,
}

impl ExactDistribution {
    fn from_weights(weights: HashMap<u64, Weight>) -> Self {
        let exact = weights.values().all(|w| w.exact.is_some());
        let total_exact: Option<Ratio<u128>> = if exact {
            weights
                .values()
                .try_fold(Ratio::from_integer(0u128), |acc, w| acc.checked_add(w.exact.as_ref()?))
        } else {
            None
        };
        let total_approx: f64 = weights.values().map(|w| w.approx).sum();
        let mut outcomes: Vec<Outcome> = weights
            .into_iter()
            .map(|(bits, w)| {
                let fraction = match (&total_exact, w.exact) {
                    (Some(t), Some(e)) => Some(e / *t),
                    _ => None,
                };
                let probability = match &fraction {
                    Some(f) => ratio_to_f64(f),
                    None => w.approx / total_approx,
                };
                Outcome {
                    estimate: f64::from_bits(bits),
                    probability,
                    fraction,
                }
            })
            .collect();
        outcomes.sort_by(|a, b| a.estimate.total_cmp(&b.estimate));
        let mean: f64 = outcomes.iter().map(|o| o.probability * o.estimate).sum();
        let variance: f64 = outcomes
            .iter()
            .map(|o| o.probability * (o.estimate - mean).powi(2))
            .sum();
        let total_probability = outcomes.iter().map(|o| o.probability).sum();
        ExactDistribution {
            outcomes,
            mean,
            variance,
            total_probability,
            exact: total_exact.is_some(),
        }
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }
}

fn ratio_to_f64(r: &Ratio<u128>) -> f64 {
    // both parts fit in f64's range; precision loss is in the last bit only
    r.numer().to_f64().unwrap_or(f64::NAN) / r.denom().to_f64().unwrap_or(f64::NAN)
}

/// Unnormalised probability mass with an exact companion while it fits.
#[derive(Debug, Clone, Copy)]
struct Weight {
    exact: Option<Ratio<u128>>,
    approx: f64,
}

impl Weight {
    fn one() -> Self {
        Self {
            exact: Some(Ratio::from_integer(1)),
            approx: 1.0,
        }
    }

    /// Multiplies by the probability that `sum(counts)` uniform draws over
    /// `counts.len()` categories produce exactly `counts`.
    fn times_multinomial(self, counts: &[u32]) -> Self {
        let total: u32 = counts.iter().sum();
        let k = counts.len() as u128;
        let exact = self.exact.and_then(|e| {
            let num = multinomial(counts)?;
            let den = k.checked_pow(total)?;
            e.checked_mul(&Ratio::new(num, den))
        });
        let approx = self.approx * multinomial_f64(counts) / (k as f64).powi(total as i32);
        Self { exact, approx }
    }

    fn add(&mut self, other: Weight) {
        self.exact = match (self.exact, other.exact) {
            (Some(a), Some(b)) => a.checked_add(&b),
            _ => None,
        };
        self.approx += other.approx;
    }
}

fn multinomial(counts: &[u32]) -> Option<u128> {
    let mut acc: u128 = 1;
    let mut n: u128 = 0;
    for &c in counts {
        for i in 1..=c as u128 {
            n += 1;
            // acc * n / i stays integral at every step
            acc = acc.checked_mul(n)? / i;
        }
    }
    Some(acc)
}

fn multinomial_f64(counts: &[u32]) -> f64 {
    let mut acc = 1.0;
    let mut n = 0.0;
    for &c in counts {
        for i in 1..=c {
            n += 1.0;
            acc = acc * n / i as f64;
        }
    }
    acc
}

/// Calls `f` with every composition of `total` into `parts` non-negative
/// parts, starting from `[total, 0, ..., 0]`.
fn for_each_composition(total: u32, parts: usize, f: &mut dyn FnMut(&[u32]) -> Result<()>) -> Result<()> {
    if parts == 0 {
        return if total == 0 { f(&[]) } else { Ok(()) };
    }
    let last = parts - 1;
    let mut c = vec![0u32; parts];
    c[0] = total;
    loop {
        f(&c)?;
        let tail = std::mem::take(&mut c[last]);
        let Some(i) = (0..last).rev().find(|&i| c[i] > 0) else {
            return Ok(());
        };
        c[i] -= 1;
        c[i + 1] = tail + 1;
    }
}

fn budget_check(outcomes: f64) -> Result<()> {
    if outcomes > ENUMERATION_BUDGET {
        Err(Error::BudgetExceeded {
            outcomes,
            budget: ENUMERATION_BUDGET,
        })
    } else {
        Ok(())
    }
}

fn pool_members(forest: &RecruitmentForest, pool: SelectionPool) -> Result<Vec<usize>> {
    let recruiters = forest.recruiters();
    if recruiters.is_empty() {
        return Err(Error::DegenerateForest("no participant recruited anyone".into()));
    }
    Ok(match pool {
        SelectionPool::RecruitersOnly => recruiters,
        SelectionPool::AllParticipants => (0..forest.len()).collect(),
    })
}

/// Exact law of `reduce` over neighbourhood resamples: `n_r` draws with
/// replacement from `pool`. Draws yielding an empty resample are excluded
/// and the rest renormalised, matching the Monte Carlo redraw rule.
pub fn enumerate_neighbourhood_with(
    forest: &RecruitmentForest,
    pool: SelectionPool,
    reduce: &dyn Fn(&Resample) -> Result<f64>,
) -> Result<ExactDistribution> {
    let members = pool_members(forest, pool)?;
    let n_draws = forest.n_recruiters() as u32;
    budget_check((members.len() as f64).powi(n_draws as i32))?;
    let mut weights: HashMap<u64, Weight> = HashMap::new();
    let mut mult = vec![0u32; forest.len()];
    for_each_composition(n_draws, members.len(), &mut |counts| {
        mult.iter_mut().for_each(|m| *m = 0);
        for (&p, &c) in members.iter().zip(counts) {
            for &child in forest.children(p) {
                mult[child] += c;
            }
        }
        let r = Resample::from_dense(&mult);
        if r.is_empty() {
            return Ok(());
        }
        let value = reduce(&r)?;
        weights
            .entry(value.to_bits())
            .or_insert(Weight { exact: Some(Ratio::from_integer(0)), approx: 0.0 })
            .add(Weight::one().times_multinomial(counts));
        Ok(())
    })?;
    Ok(ExactDistribution::from_weights(weights))
}

/// Exact law of `estimator` (applied to values `z`) over neighbourhood
/// resamples.
pub fn enumerate_neighbourhood(
    forest: &RecruitmentForest,
    z: &[u8],
    pool: SelectionPool,
    estimator: Estimator,
    totals: Option<&PopulationTotals>,
) -> Result<ExactDistribution> {
    let classes = DegreeClasses::new(forest);
    enumerate_neighbourhood_with(forest, pool, &|r| estimator.apply(&classes.tally(r, z), totals))
}

/// Exact law of `reduce` over tree resamples.
pub fn enumerate_tree_with(
    forest: &RecruitmentForest,
    seed_mode: SeedMode,
    reduce: &dyn Fn(&Resample) -> Result<f64>,
) -> Result<ExactDistribution> {
    let seeds = forest.seeds();
    if seeds.is_empty() {
        return Err(Error::DegenerateForest("forest has no seeds".into()));
    }
    let mut state = TreeWalk {
        forest,
        reduce,
        mult: vec![0u32; forest.len()],
        pending: Vec::new(),
        weights: HashMap::new(),
        visited: 0,
    };
    match seed_mode {
        SeedMode::WithReplacement => {
            for_each_composition(seeds.len() as u32, seeds.len(), &mut |counts| {
                let base = state.pending.len();
                for (&s, &c) in seeds.iter().zip(counts).rev() {
                    if c > 0 {
                        state.pending.push((s, c));
                    }
                }
                let w = Weight::one().times_multinomial(counts);
                state.descend(w)?;
                state.pending.truncate(base);
                Ok(())
            })?;
        }
        SeedMode::WithoutReplacement => {
            state.pending.extend(seeds.iter().rev().map(|&s| (s, 1)));
            state.descend(Weight::one())?;
        }
    }
    Ok(ExactDistribution::from_weights(state.weights))
}

struct TreeWalk<'a> {
    forest: &'a RecruitmentForest,
    reduce: &'a dyn Fn(&Resample) -> Result<f64>,
    mult: Vec<u32>,
    pending: Vec<(usize, u32)>,
    weights: HashMap<u64, Weight>,
    visited: u64,
}

impl TreeWalk<'_> {
    fn descend(&mut self, w: Weight) -> Result<()> {
        let Some((e, occ)) = self.pending.pop() else {
            self.visited += 1;
            budget_check(self.visited as f64)?;
            let value = (self.reduce)(&Resample::from_dense(&self.mult))?;
            self.weights
                .entry(value.to_bits())
                .or_insert(Weight { exact: Some(Ratio::from_integer(0)), approx: 0.0 })
                .add(w);
            return Ok(());
        };
        self.mult[e] += occ;
        let children: Vec<usize> = self.forest.children(e).to_vec();
        if children.is_empty() {
            self.descend(w)?;
        } else {
            let total = occ * children.len() as u32;
            for_each_composition(total, children.len(), &mut |counts| {
                let base = self.pending.len();
                for (&c, &k) in children.iter().zip(counts).rev() {
                    if k > 0 {
                        self.pending.push((c, k));
                    }
                }
                self.descend(w.times_multinomial(counts))?;
                self.pending.truncate(base);
                Ok(())
            })?;
        }
        self.mult[e] -= occ;
        self.pending.push((e, occ));
        Ok(())
    }
}

/// Exact law of `estimator` (applied to values `z`) over tree resamples.
pub fn enumerate_tree(
    forest: &RecruitmentForest,
    z: &[u8],
    seed_mode: SeedMode,
    estimator: Estimator,
    totals: Option<&PopulationTotals>,
) -> Result<ExactDistribution> {
    let classes = DegreeClasses::new(forest);
    enumerate_tree_with(forest, seed_mode, &|r| estimator.apply(&classes.tally(r, z), totals))
}

/// Exact law of the sample mean when each seed's tree resamples its own
/// recruiters: tree `j` with `l_j` recruiters makes `l_j` draws from them.
pub fn enumerate_neighbourhood_per_tree(forest: &RecruitmentForest, z: &[u8]) -> Result<ExactDistribution> {
    let recruiters = forest.recruiters();
    if recruiters.is_empty() {
        return Err(Error::DegenerateForest("no participant recruited anyone".into()));
    }
    let mut trees: Vec<Vec<usize>> = vec![Vec::new(); forest.seeds().len()];
    for r in recruiters {
        trees[forest.entry(r).seed_index].push(r);
    }
    trees.retain(|t| !t.is_empty());
    let raw: f64 = trees.iter().map(|t| (t.len() as f64).powi(t.len() as i32)).product();
    budget_check(raw)?;

    let classes = DegreeClasses::new(forest);
    let mut weights = HashMap::new();
    let mut mult = vec![0u32; forest.len()];
    per_tree_step(forest, &trees, 0, &mut mult, Weight::one(), &mut weights, &|r| {
        Estimator::SampleMean.apply(&classes.tally(r, z), None)
    })?;
    Ok(ExactDistribution::from_weights(weights))
}

fn per_tree_step(
    forest: &RecruitmentForest,
    trees: &[Vec<usize>],
    t: usize,
    mult: &mut Vec<u32>,
    w: Weight,
    weights: &mut HashMap<u64, Weight>,
    reduce: &dyn Fn(&Resample) -> Result<f64>,
) -> Result<()> {
    let Some(members) = trees.get(t) else {
        let value = reduce(&Resample::from_dense(mult))?;
        weights
            .entry(value.to_bits())
            .or_insert(Weight { exact: Some(Ratio::from_integer(0)), approx: 0.0 })
            .add(w);
        return Ok(());
    };
    for_each_composition(members.len() as u32, members.len(), &mut |counts| {
        for (&p, &c) in members.iter().zip(counts) {
            for &child in forest.children(p) {
                mult[child] += c;
            }
        }
        per_tree_step(forest, trees, t + 1, mult, w.times_multinomial(counts), weights, reduce)?;
        for (&p, &c) in members.iter().zip(counts) {
            for &child in forest.children(p) {
                mult[child] -= c;
            }
        }
        Ok(())
    })
}

/// Closed-form terms of `n Var(mean)` for a balanced forest, evaluated on
/// all `n` participants: `(1/n) sum (Z - Zbar)^2`, `(n-1)/n^3 sum Z^2` and
/// `(n-1)/n^3` times the sum of `Z_u Z_v` over ordered sibling pairs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClosedFormTerms {
    pub n: usize,
    pub centred_sum_of_squares: f64,
    pub sum_of_squares: f64,
    pub sibling_cross_products: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentReport {
    pub seeds: usize,
    pub coupons: usize,
    pub height: u32,
    pub pooled: ExactDistribution,
    pub per_tree: ExactDistribution,
    /// Mean of `z` over participants other than seeds.
    pub non_seed_mean: f64,
    /// Mean of `z` over every participant.
    pub full_mean: f64,
    pub pooled_mean_minus_non_seed_mean: f64,
    pub per_tree_mean_minus_non_seed_mean: f64,
    pub pooled_mean_minus_full_mean: f64,
    pub closed_form: ClosedFormTerms,
    /// `n` times the enumerated variance, comparable with `closed_form.total`.
    pub pooled_n_variance: f64,
    pub per_tree_n_variance: f64,
    pub pooled_n_variance_minus_closed_form: f64,
    pub per_tree_n_variance_minus_closed_form: f64,
}

/// Enumerates the neighbourhood bootstrap law of the sample mean for a
/// balanced forest, both pooled and per tree, and sets its moments beside
/// the non-seed mean and the closed-form variance terms. Differences are
/// reported, not asserted.
pub fn check_moment_identity(forest: &RecruitmentForest, z: &[u8]) -> Result<MomentReport> {
    let (c, h) = forest.balanced_shape().ok_or_else(|| {
        Error::Unbalanced("every recruiter must have the same number of recruits and all leaves the same wave".into())
    })?;
    let pooled = enumerate_neighbourhood(forest, z, SelectionPool::RecruitersOnly, Estimator::SampleMean, None)?;
    let per_tree = enumerate_neighbourhood_per_tree(forest, z)?;

    let n = forest.len();
    let nf = n as f64;
    let non_seed: Vec<f64> = forest
        .entries()
        .iter()
        .enumerate()
        .filter(|(_, e)| e.recruiter.is_some())
        .map(|(i, _)| z[i] as f64)
        .collect();
    let non_seed_mean = non_seed.iter().sum::<f64>() / non_seed.len() as f64;
    let full_mean = z.iter().map(|&v| v as f64).sum::<f64>() / nf;

    let centred: f64 = z.iter().map(|&v| (v as f64 - full_mean).powi(2)).sum();
    let squares: f64 = z.iter().map(|&v| (v as f64).powi(2)).sum();
    let mut cross = 0.0;
    for r in forest.recruiters() {
        let kids = forest.children(r);
        for &u in kids {
            for &v in kids {
                if u != v {
                    cross += z[u] as f64 * z[v] as f64;
                }
            }
        }
    }
    let factor = (nf - 1.0) / nf.powi(3);
    let t1 = centred / nf;
    let t2 = factor * squares;
    let t3 = factor * cross;
    let closed_form = ClosedFormTerms {
        n,
        centred_sum_of_squares: t1,
        sum_of_squares: t2,
        sibling_cross_products: t3,
        total: t1 + t2 + t3,
    };

    Ok(MomentReport {
        seeds: forest.seeds().len(),
        coupons: c,
        height: h,
        non_seed_mean,
        full_mean,
        pooled_mean_minus_non_seed_mean: (pooled.mean - non_seed_mean).abs(),
        per_tree_mean_minus_non_seed_mean: (per_tree.mean - non_seed_mean).abs(),
        pooled_mean_minus_full_mean: (pooled.mean - full_mean).abs(),
        pooled_n_variance: nf * pooled.variance,
        per_tree_n_variance: nf * per_tree.variance,
        pooled_n_variance_minus_closed_form: (nf * pooled.variance - closed_form.total).abs(),
        per_tree_n_variance_minus_closed_form: (nf * per_tree.variance - closed_form.total).abs(),
        closed_form,
        pooled,
        per_tree,
    })
}
