use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Recruitment regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Coupon process: recruits are drawn uniformly without replacement
    /// from the recruiter's never-sampled neighbours.
    #[default]
    WithoutReplacement,
    /// Idealised random walk: each recruit is a uniform neighbour of the
    /// recruiter, repeats allowed; seeds are drawn with replacement.
    WithReplacementWalk,
}

impl std::str::FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "without_replacement" => Ok(Regime::WithoutReplacement),
            "with_replacement_walk" | "walk" => Ok(Regime::WithReplacementWalk),
            other => Err(Error::Usage(format!("unknown regime `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RdsDesign {
    pub n_seeds: usize,
    pub max_coupons: usize,
    /// Probability of drawing 0, 1, ..., `max_coupons` recruits.
    pub recruit_count_pmf: Vec<f64>,
    pub target_n: usize,
    pub regime: Regime,
    pub reseed_on_death: bool,
}

impl RdsDesign {
    /// Ten PPS seeds, three coupons with recruit-count probabilities
    /// (1/3, 1/6, 1/6, 1/3), coupon regime, reseeding on chain death.
    pub fn three_coupon(target_n: usize) -> Self {
        Self {
            n_seeds: 10,
            max_coupons: 3,
            recruit_count_pmf: vec![1.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0, 1.0 / 3.0],
            target_n,
            regime: Regime::WithoutReplacement,
            reseed_on_death: true,
        }
    }

    /// Checks the design against a population of `population` nodes.
    pub fn validate(&self, population: usize) -> Result<()> {
        if self.n_seeds == 0 {
            return Err(Error::InvalidDesign("need at least one seed".into()));
        }
        if self.n_seeds > self.target_n {
            return Err(Error::InvalidDesign(format!(
                "{} seeds exceed target sample size {}",
                self.n_seeds, self.target_n
            )));
        }
        if self.regime == Regime::WithoutReplacement && self.target_n > population {
            return Err(Error::InvalidDesign(format!(
                "target sample size {} exceeds population {population}",
                self.target_n
            )));
        }
        if population == 0 {
            return Err(Error::InvalidDesign("empty population".into()));
        }
        if self.recruit_count_pmf.len() != self.max_coupons + 1 {
            return Err(Error::InvalidDesign(format!(
                "recruit-count pmf has {} entries, expected max_coupons + 1 = {}",
                self.recruit_count_pmf.len(),
                self.max_coupons + 1
            )));
        }
        if self
            .recruit_count_pmf
            .iter()
            .any(|&p| !p.is_finite() || p < 0.0)
        {
            return Err(Error::InvalidDesign(
                "recruit-count pmf has a negative or non-finite entry".into(),
            ));
        }
        let total: f64 = self.recruit_count_pmf.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidDesign(format!(
                "recruit-count pmf sums to {total}, not 1"
            )));
        }
        Ok(())
    }

    pub(crate) fn draw_recruit_count<R: Rng>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for (k, &p) in self.recruit_count_pmf.iter().enumerate() {
            acc += p;
            if u < acc {
                return k;
            }
        }
        // rounding left u above the final partial sum
        self.recruit_count_pmf
            .iter()
            .rposition(|&p| p > 0.0)
            .unwrap_or(0)
    }
}

/// Parses a comma-separated pmf whose entries are decimals or fractions
/// such as `1/3,1/6,1/6,1/3`.
pub fn parse_pmf(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|raw| {
            let t = raw.trim();
            let value = match t.split_once('/') {
                Some((a, b)) => {
                    let num: f64 = a.trim().parse().map_err(|_| bad_pmf(t))?;
                    let den: f64 = b.trim().parse().map_err(|_| bad_pmf(t))?;
                    if den == 0.0 {
                        return Err(bad_pmf(t));
                    }
                    num / den
                }
                None => t.parse().map_err(|_| bad_pmf(t))?,
            };
            Ok(value)
        })
        .collect()
}

fn bad_pmf(token: &str) -> Error {
    Error::Usage(format!("bad pmf entry `{token}`"))
}
