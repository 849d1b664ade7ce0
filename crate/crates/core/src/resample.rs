//! Neighbourhood and tree bootstrap over a recruitment forest.
//!
//! A resample is a multiset of forest entries. It carries no attribute
//! values, so a single resample can be reduced against any number of
//! attribute columns.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{DegreeTally, Estimator, Observation, PopulationTotals, WeightedSample};
use crate::rds::RecruitmentForest;
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Neighbourhood,
    Tree,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Neighbourhood => "neighbourhood",
            Method::Tree => "tree",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "neighbourhood" | "neighborhood" | "nb" => Ok(Method::Neighbourhood),
            "tree" => Ok(Method::Tree),
            other => Err(Error::Usage(format!(
                "unknown bootstrap method `{other}` (expected neighbourhood or tree)"
            ))),
        }
    }
}

/// Individuals eligible for selection in the neighbourhood bootstrap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionPool {
    #[default]
    RecruitersOnly,
    AllParticipants,
}

impl std::str::FromStr for SelectionPool {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "recruiters_only" | "recruiters" => Ok(SelectionPool::RecruitersOnly),
            "all_participants" | "all" => Ok(SelectionPool::AllParticipants),
            other => Err(Error::Usage(format!("unknown selection pool `{other}`"))),
        }
    }
}

/// How the tree bootstrap picks its roots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedMode {
    /// `s` draws with replacement from the `s` seeds.
    #[default]
    WithReplacement,
    /// Every seed exactly once.
    WithoutReplacement,
}

impl std::str::FromStr for SeedMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "with_replacement" => Ok(SeedMode::WithReplacement),
            "without_replacement" => Ok(SeedMode::WithoutReplacement),
            other => Err(Error::Usage(format!("unknown tree seed mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub method: Method,
    pub n_replicates: usize,
    #[serde(default)]
    pub selection_pool: SelectionPool,
    #[serde(default)]
    pub tree_seed_mode: SeedMode,
    #[serde(default)]
    pub estimator: Estimator,
}

impl BootstrapConfig {
    pub fn new(method: Method, n_replicates: usize, estimator: Estimator) -> Self {
        Self {
            method,
            n_replicates,
            selection_pool: SelectionPool::default(),
            tree_seed_mode: SeedMode::default(),
            estimator,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_replicates < 2 {
            return Err(Error::TooFewReplicates(self.n_replicates));
        }
        Ok(())
    }
}

/// Multiset of forest entries, as `(entry index, multiplicity)` pairs in
/// ascending entry order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Resample {
    entries: Vec<(usize, u32)>,
}

impl Resample {
    pub(crate) fn from_dense(mult: &[u32]) -> Self {
        Self {
            entries: mult
                .iter()
                .enumerate()
                .filter(|(_, &m)| m > 0)
                .map(|(e, &m)| (e, m))
                .collect(),
        }
    }

    pub fn entries(&self) -> &[(usize, u32)] {
        &self.entries
    }

    pub fn multiplicity(&self, entry: usize) -> u32 {
        self.entries
            .binary_search_by_key(&entry, |&(e, _)| e)
            .map_or(0, |i| self.entries[i].1)
    }

    /// Total number of observations, counting multiplicity.
    pub fn size(&self) -> u64 {
        self.entries.iter().map(|&(_, m)| m as u64).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Attaches per-entry attribute values `z` and the entries' degrees.
    pub fn to_weighted_sample(&self, forest: &RecruitmentForest, z: &[u8]) -> Result<WeightedSample> {
        WeightedSample::new(
            self.entries
                .iter()
                .map(|&(e, m)| Observation::new(z[e], forest.entry(e).degree, m))
                .collect(),
        )
    }
}

/// Maps forest entries to their distinct-degree class so that resamples
/// reduce to a [`DegreeTally`] without sorting.
#[derive(Debug, Clone)]
pub struct DegreeClasses {
    degrees: Vec<u32>,
    class_of: Vec<usize>,
}

impl DegreeClasses {
    pub fn new(forest: &RecruitmentForest) -> Self {
        let mut degrees = forest.degrees();
        degrees.sort_unstable();
        degrees.dedup();
        let class_of = forest
            .entries()
            .iter()
            .map(|e| degrees.binary_search(&e.degree).expect("degree present"))
            .collect();
        Self { degrees, class_of }
    }

    pub fn tally(&self, resample: &Resample, z: &[u8]) -> DegreeTally {
        let mut counts = vec![0u64; self.degrees.len()];
        let mut positives = vec![0u64; self.degrees.len()];
        for &(e, m) in resample.entries() {
            let c = self.class_of[e];
            counts[c] += m as u64;
            positives[c] += z[e] as u64 * m as u64;
        }
        DegreeTally::from_classes(self.degrees.clone(), counts, positives)
    }

    /// Tally of the observed sample, every entry once.
    pub fn tally_all(&self, z: &[u8]) -> DegreeTally {
        let mut counts = vec![0u64; self.degrees.len()];
        let mut positives = vec![0u64; self.degrees.len()];
        for (e, &c) in self.class_of.iter().enumerate() {
            counts[c] += 1;
            positives[c] += z[e] as u64;
        }
        DegreeTally::from_classes(self.degrees.clone(), counts, positives)
    }
}

fn selection_pool(forest: &RecruitmentForest, pool: SelectionPool) -> Result<Vec<usize>> {
    let recruiters = forest.recruiters();
    if recruiters.is_empty() {
        return Err(Error::DegenerateForest(
            "no participant recruited anyone; the neighbourhood bootstrap needs at least one recruiter"
                .into(),
        ));
    }
    Ok(match pool {
        SelectionPool::RecruitersOnly => recruiters,
        SelectionPool::AllParticipants => (0..forest.len()).collect(),
    })
}

/// Draws `n_r` individuals with replacement from the pool and returns the
/// recruits of every draw. With the all-participants pool, draws that
/// select only non-recruiters are repeated until the resample is non-empty.
pub fn neighbourhood_resample<R: Rng>(
    forest: &RecruitmentForest,
    pool: SelectionPool,
    rng: &mut R,
) -> Result<Resample> {
    let pool = selection_pool(forest, pool)?;
    Ok(neighbourhood_from_pool(forest, &pool, forest.n_recruiters(), rng))
}

fn neighbourhood_from_pool<R: Rng>(
    forest: &RecruitmentForest,
    pool: &[usize],
    n_draws: usize,
    rng: &mut R,
) -> Resample {
    let mut mult = vec![0u32; forest.len()];
    loop {
        for _ in 0..n_draws {
            let p = pool[rng.gen_range(0..pool.len())];
            for &child in forest.children(p) {
                mult[child] += 1;
            }
        }
        if mult.iter().any(|&m| m > 0) {
            return Resample::from_dense(&mult);
        }
    }
}

/// Resamples seeds, then for every drawn occurrence of a participant with
/// `k` recruits draws `k` of them with replacement, recursively. The
/// returned multiset includes the drawn seeds.
pub fn tree_resample<R: Rng>(
    forest: &RecruitmentForest,
    seed_mode: SeedMode,
    rng: &mut R,
) -> Result<Resample> {
    let seeds = forest.seeds();
    if seeds.is_empty() {
        return Err(Error::DegenerateForest("forest has no seeds".into()));
    }
    let mut mult = vec![0u32; forest.len()];
    let mut stack: Vec<(usize, u32)> = Vec::new();
    match seed_mode {
        SeedMode::WithReplacement => {
            let mut draws = vec![0u32; seeds.len()];
            for _ in 0..seeds.len() {
                draws[rng.gen_range(0..seeds.len())] += 1;
            }
            stack.extend(seeds.iter().zip(&draws).filter(|(_, &c)| c > 0).map(|(&s, &c)| (s, c)));
        }
        SeedMode::WithoutReplacement => stack.extend(seeds.iter().map(|&s| (s, 1))),
    }
    stack.reverse();

    let mut draws = Vec::new();
    while let Some((e, occurrences)) = stack.pop() {
        mult[e] += occurrences;
        let children = forest.children(e);
        let k = children.len();
        if k == 0 {
            continue;
        }
        // each occurrence draws k times independently; only the pooled
        // counts matter for the multiset
        draws.clear();
        draws.resize(k, 0u32);
        for _ in 0..occurrences as usize * k {
            draws[rng.gen_range(0..k)] += 1;
        }
        for (i, &c) in draws.iter().enumerate().rev() {
            if c > 0 {
                stack.push((children[i], c));
            }
        }
    }
    Ok(Resample::from_dense(&mult))
}

/// Precomputed state for repeated resampling of one forest.
#[derive(Debug, Clone)]
pub struct Resampler<'a> {
    forest: &'a RecruitmentForest,
    method: Method,
    seed_mode: SeedMode,
    pool: Vec<usize>,
    n_draws: usize,
}

impl<'a> Resampler<'a> {
    pub fn new(forest: &'a RecruitmentForest, cfg: &BootstrapConfig) -> Result<Self> {
        let (pool, n_draws) = match cfg.method {
            Method::Neighbourhood => (selection_pool(forest, cfg.selection_pool)?, forest.n_recruiters()),
            Method::Tree => {
                if forest.seeds().is_empty() {
                    return Err(Error::DegenerateForest("forest has no seeds".into()));
                }
                (Vec::new(), 0)
            }
        };
        Ok(Self {
            forest,
            method: cfg.method,
            seed_mode: cfg.tree_seed_mode,
            pool,
            n_draws,
        })
    }

    pub fn draw<R: Rng>(&self, rng: &mut R) -> Resample {
        match self.method {
            Method::Neighbourhood => neighbourhood_from_pool(self.forest, &self.pool, self.n_draws, rng),
            Method::Tree => tree_resample(self.forest, self.seed_mode, rng).expect("seeds checked"),
        }
    }

    /// Replicate `b` drawn from its own substream of `stream`.
    pub fn replicate(&self, stream: &RngStream, b: usize) -> Resample {
        self.draw(&mut stream.derive(b as u64).rng())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BootstrapDistribution {
    pub estimates: Vec<f64>,
    pub estimator_on_original: f64,
}

impl BootstrapDistribution {
    pub fn variance(&self) -> Result<f64> {
        bootstrap_variance(&self.estimates)
    }

    pub fn percentile_ci(&self, level: f64) -> Result<(f64, f64)> {
        percentile_ci(&self.estimates, level)
    }
}

/// Runs `cfg.n_replicates` resamples of `forest`, replicate `b` using
/// substream `stream.derive(b)`, and reduces each with `cfg.estimator`
/// against the per-entry values `z`.
pub fn bootstrap_distribution(
    forest: &RecruitmentForest,
    cfg: &BootstrapConfig,
    z: &[u8],
    totals: Option<&PopulationTotals>,
    stream: &RngStream,
) -> Result<BootstrapDistribution> {
    cfg.validate()?;
    if z.len() != forest.len() {
        return Err(Error::InvalidData(format!(
            "{} attribute values for {} participants",
            z.len(),
            forest.len()
        )));
    }
    if cfg.estimator == Estimator::Ipw && totals.is_none() {
        return Err(Error::MissingTotals);
    }
    let classes = DegreeClasses::new(forest);
    let resampler = Resampler::new(forest, cfg)?;
    let estimator_on_original = cfg.estimator.apply(&classes.tally_all(z), totals)?;
    let estimates = (0..cfg.n_replicates)
        .map(|b| {
            let r = resampler.replicate(stream, b);
            cfg.estimator.apply(&classes.tally(&r, z), totals)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BootstrapDistribution {
        estimates,
        estimator_on_original,
    })
}

/// Unbiased sample variance (divisor `B - 1`).
pub fn bootstrap_variance(estimates: &[f64]) -> Result<f64> {
    let b = estimates.len();
    if b < 2 {
        return Err(Error::TooFewReplicates(b));
    }
    let mean = estimates.iter().sum::<f64>() / b as f64;
    let ss: f64 = estimates.iter().map(|x| (x - mean) * (x - mean)).sum();
    Ok(ss / (b - 1) as f64)
}

/// Nearest-rank quantile of ascending `sorted`: the element of rank
/// `ceil(q * B)` clamped to `[1, B]`. A product within `1e-9 * B` of an
/// integer is treated as that integer, so binary rounding of `q` cannot
/// push the rank up by one.
pub fn nearest_rank_quantile(sorted: &[f64], q: f64) -> f64 {
    let b = sorted.len();
    assert!(b > 0, "quantile of an empty set");
    let x = q * b as f64;
    let nearest = x.round();
    let rank = if (x - nearest).abs() <= 1e-9 * b as f64 {
        nearest
    } else {
        x.ceil()
    };
    let rank = (rank.max(1.0) as usize).min(b);
    sorted[rank - 1]
}

pub fn validate_level(level: f64) -> Result<()> {
    if level.is_finite() && level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidLevel(level))
    }
}

/// Percentile interval at `level`: nearest-rank quantiles at `a/2` and
/// `1 - a/2` with `a = 1 - level`.
pub fn percentile_ci(estimates: &[f64], level: f64) -> Result<(f64, f64)> {
    validate_level(level)?;
    if estimates.len() < 2 {
        return Err(Error::TooFewReplicates(estimates.len()));
    }
    let mut sorted = estimates.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(percentile_ci_sorted(&sorted, level))
}

pub(crate) fn percentile_ci_sorted(sorted: &[f64], level: f64) -> (f64, f64) {
    let alpha = 1.0 - level;
    (
        nearest_rank_quantile(sorted, alpha / 2.0),
        nearest_rank_quantile(sorted, 1.0 - alpha / 2.0),
    )
}
