//! Design-weighted prevalence estimators: the sample mean, the
//! inverse-probability-weighted (RDS-II, Horvitz–Thompson) estimator with
//! stationary inclusion probabilities `π_u = d_u / Σ d_i`, and the
//! Volz–Heckathorn ratio estimator.
//!
//! All three reduce a sample to a [`DegreeTally`]: per distinct degree,
//! the integer number of observations and the integer number of positives.
//! The integer stage is exact, so results do not depend on observation
//! order or on whether repeated observations are stored once with a
//! multiplicity or several times. The floating-point stage then sums over
//! distinct degrees in ascending order.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netgraph::PopulationGraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Observation {
    pub z: u8,
    pub degree: u32,
    pub multiplicity: u32,
}

impl Observation {
    pub fn new(z: u8, degree: u32, multiplicity: u32) -> Self {
        Self {
            z,
            degree,
            multiplicity,
        }
    }
}

/// Multiset of `(z, degree)` observations.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct WeightedSample {
    observations: Vec<Observation>,
}

impl WeightedSample {
    pub fn new(observations: Vec<Observation>) -> Result<Self> {
        for o in &observations {
            if o.degree == 0 {
                return Err(Error::ZeroDegree);
            }
            if o.multiplicity == 0 {
                return Err(Error::ZeroMultiplicity);
            }
            if o.z > 1 {
                return Err(Error::InvalidData(format!("z = {} is not binary", o.z)));
            }
        }
        Ok(Self { observations })
    }

    /// Unit-multiplicity sample from parallel `z` and degree slices.
    pub fn from_pairs(z: &[u8], degrees: &[u32]) -> Result<Self> {
        assert_eq!(z.len(), degrees.len());
        Self::new(
            z.iter()
                .zip(degrees)
                .map(|(&z, &d)| Observation::new(z, d, 1))
                .collect(),
        )
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    /// Total multiplicity `n`.
    pub fn size(&self) -> u64 {
        self.observations.iter().map(|o| o.multiplicity as u64).sum()
    }

    /// Same sample with every observation of multiplicity `m` replaced by
    /// `m` unit copies.
    pub fn expanded(&self) -> WeightedSample {
        WeightedSample {
            observations: self
                .observations
                .iter()
                .flat_map(|o| {
                    std::iter::repeat_n(Observation::new(o.z, o.degree, 1), o.multiplicity as usize)
                })
                .collect(),
        }
    }
}

/// Population size `N` and total degree `Σ d_i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PopulationTotals {
    pub n_population: u64,
    pub total_degree: u64,
}

impl PopulationTotals {
    pub fn new(n_population: u64, total_degree: u64) -> Result<Self> {
        if n_population == 0 {
            return Err(Error::InvalidTotals("population size is zero".into()));
        }
        if total_degree < n_population {
            return Err(Error::InvalidTotals(format!(
                "total degree {total_degree} below population size {n_population}"
            )));
        }
        Ok(Self {
            n_population,
            total_degree,
        })
    }

    pub fn from_graph(g: &PopulationGraph) -> Result<Self> {
        Self::new(g.node_count() as u64, g.total_degree())
    }
}

/// Per-degree integer counts of a sample, ascending by degree.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DegreeTally {
    degrees: Vec<u32>,
    counts: Vec<u64>,
    positives: Vec<u64>,
}

impl DegreeTally {
    pub fn from_sample(ws: &WeightedSample) -> Self {
        let mut rows: Vec<(u32, u64, u64)> = ws
            .observations
            .iter()
            .map(|o| (o.degree, o.multiplicity as u64, o.z as u64 * o.multiplicity as u64))
            .collect();
        rows.sort_unstable_by_key(|r| r.0);
        let mut tally = DegreeTally::default();
        for (d, m, p) in rows {
            if tally.degrees.last() == Some(&d) {
                *tally.counts.last_mut().unwrap() += m;
                *tally.positives.last_mut().unwrap() += p;
            } else {
                tally.degrees.push(d);
                tally.counts.push(m);
                tally.positives.push(p);
            }
        }
        tally
    }

    /// Builds a tally from per-class counts over a fixed ascending list of
    /// distinct degrees. Classes with zero count are allowed.
    pub fn from_classes(degrees: Vec<u32>, counts: Vec<u64>, positives: Vec<u64>) -> Self {
        debug_assert!(degrees.windows(2).all(|w| w[0] < w[1]));
        debug_assert!(degrees.iter().all(|&d| d > 0));
        debug_assert_eq!(degrees.len(), counts.len());
        debug_assert_eq!(degrees.len(), positives.len());
        Self {
            degrees,
            counts,
            positives,
        }
    }

    pub fn size(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn positives(&self) -> u64 {
        self.positives.iter().sum()
    }

    fn rows(&self) -> impl Iterator<Item = (u32, u64, u64)> + '_ {
        self.degrees
            .iter()
            .zip(&self.counts)
            .zip(&self.positives)
            .filter(|((_, &c), _)| c > 0)
            .map(|((&d, &c), &p)| (d, c, p))
    }

    pub fn sample_mean(&self) -> Result<f64> {
        let n = self.size();
        if n == 0 {
            return Err(Error::EmptySample);
        }
        Ok(self.positives() as f64 / n as f64)
    }

    /// `(Σ m z / d) / (Σ m / d)`. Degrees are first divided by their
    /// greatest common divisor, so rescaling all degrees by an integer
    /// factor leaves the result bit-identical.
    pub fn vh(&self) -> Result<f64> {
        if self.size() == 0 {
            return Err(Error::EmptySample);
        }
        let g = self.rows().fold(0u32, |g, (d, _, _)| gcd(g, d));
        let (mut num, mut den) = (0.0f64, 0.0f64);
        for (d, c, p) in self.rows() {
            let d = (d / g) as f64;
            num += p as f64 / d;
            den += c as f64 / d;
        }
        Ok(num / den)
    }

    /// `(1 / (n N)) Σ m z / π_u` with `π_u = d_u / Σ_i d_i`.
    pub fn ipw(&self, totals: &PopulationTotals) -> Result<f64> {
        let n = self.size();
        if n == 0 {
            return Err(Error::EmptySample);
        }
        let total_degree = totals.total_degree as f64;
        let mut acc = 0.0f64;
        for (d, _, p) in self.rows() {
            acc += p as f64 * (total_degree / d as f64);
        }
        Ok(acc / (n as f64 * totals.n_population as f64))
    }
}

fn gcd(mut a: u32, mut b: u32) -> u32 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Point estimator applied to samples and bootstrap resamples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    SampleMean,
    #[default]
    Vh,
    Ipw,
}

impl Estimator {
    pub fn name(&self) -> &'static str {
        match self {
            Estimator::SampleMean => "sample_mean",
            Estimator::Vh => "vh",
            Estimator::Ipw => "ipw",
        }
    }

    pub fn apply(&self, tally: &DegreeTally, totals: Option<&PopulationTotals>) -> Result<f64> {
        match self {
            Estimator::SampleMean => tally.sample_mean(),
            Estimator::Vh => tally.vh(),
            Estimator::Ipw => tally.ipw(totals.ok_or(Error::MissingTotals)?),
        }
    }

    pub fn estimate(&self, ws: &WeightedSample, totals: Option<&PopulationTotals>) -> Result<f64> {
        self.apply(&DegreeTally::from_sample(ws), totals)
    }
}

impl std::str::FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sample_mean" | "mean" => Ok(Estimator::SampleMean),
            "vh" => Ok(Estimator::Vh),
            "ipw" => Ok(Estimator::Ipw),
            other => Err(Error::Usage(format!(
                "unknown estimator `{other}` (expected sample_mean, vh or ipw)"
            ))),
        }
    }
}

pub fn sample_mean(ws: &WeightedSample) -> Result<f64> {
    DegreeTally::from_sample(ws).sample_mean()
}

pub fn ipw_estimate(ws: &WeightedSample, totals: &PopulationTotals) -> Result<f64> {
    DegreeTally::from_sample(ws).ipw(totals)
}

pub fn vh_estimate(ws: &WeightedSample) -> Result<f64> {
    DegreeTally::from_sample(ws).vh()
}
