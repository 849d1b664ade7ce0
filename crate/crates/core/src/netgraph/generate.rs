//! Synthetic populations: configuration-model graphs and planted binary
//! attributes.

use std::collections::{HashSet, VecDeque};

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{AttributeTable, PopulationGraph};
use crate::error::{Error, Result};

const MAX_RESTARTS: usize = 1000;
const PARTNER_TRIES: usize = 100;

/// Degree distribution for [`generate_configuration_graph`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "law")]
pub enum DegreeLaw {
    /// Every node has degree `k`.
    Fixed { k: u32 },
    /// i.i.d. degrees with `P(d) ∝ d^-alpha` on `d_min..=d_max`.
    PowerLaw { alpha: f64, d_min: u32, d_max: u32 },
}

impl DegreeLaw {
    fn validate(&self, n_nodes: usize) -> Result<()> {
        match *self {
            DegreeLaw::Fixed { k } => {
                if k == 0 || k as usize >= n_nodes {
                    return Err(Error::InfeasibleDegrees(format!(
                        "fixed degree {k} needs 1 <= k < n_nodes = {n_nodes}"
                    )));
                }
                if (k as usize * n_nodes) % 2 == 1 {
                    return Err(Error::InfeasibleDegrees(format!(
                        "odd degree sum {k} x {n_nodes}"
                    )));
                }
            }
            DegreeLaw::PowerLaw {
                alpha,
                d_min,
                d_max,
            } => {
                if !alpha.is_finite() || d_min == 0 || d_min > d_max || d_min as usize >= n_nodes
                {
                    return Err(Error::InfeasibleDegrees(format!(
                        "power law alpha={alpha} d_min={d_min} d_max={d_max} on {n_nodes} nodes"
                    )));
                }
            }
        }
        Ok(())
    }

    fn sample_degrees<R: Rng>(&self, n_nodes: usize, rng: &mut R) -> Result<Vec<usize>> {
        match *self {
            DegreeLaw::Fixed { k } => Ok(vec![k as usize; n_nodes]),
            DegreeLaw::PowerLaw {
                alpha,
                d_min,
                d_max,
            } => {
                let d_max = (d_max as usize).min(n_nodes - 1);
                let support: Vec<usize> = (d_min as usize..=d_max).collect();
                let mut cumulative = Vec::with_capacity(support.len());
                let mut acc = 0.0;
                for &d in &support {
                    acc += (d as f64).powf(-alpha);
                    cumulative.push(acc);
                }
                let draw = |rng: &mut R| {
                    let u = rng.gen::<f64>() * acc;
                    let i = cumulative.partition_point(|&c| c <= u);
                    support[i.min(support.len() - 1)]
                };
                let mut degrees: Vec<usize> = (0..n_nodes).map(|_| draw(rng)).collect();
                // Fix parity by redrawing single degrees.
                let mut tries = 0;
                while degrees.iter().sum::<usize>() % 2 == 1 {
                    if support.len() == 1 || tries > 10_000 {
                        return Err(Error::InfeasibleDegrees("cannot reach an even degree sum".into()));
                    }
                    let i = rng.gen_range(0..n_nodes);
                    degrees[i] = draw(rng);
                    tries += 1;
                }
                Ok(degrees)
            }
        }
    }
}

/// Erdős–Gallai test: can `degrees` be realised by a simple graph?
pub fn is_graphical(degrees: &[usize]) -> bool {
    let n = degrees.len();
    let mut d = degrees.to_vec();
    d.sort_unstable_by(|a, b| b.cmp(a));
    let total: usize = d.iter().sum();
    if total % 2 == 1 || d.first().is_some_and(|&m| m >= n) {
        return false;
    }
    // suffix[i] = d[i] + ... + d[n-1]
    let mut suffix = vec![0usize; n + 1];
    for i in (0..n).rev() {
        suffix[i] = suffix[i + 1] + d[i];
    }
    let mut prefix = 0usize;
    for k in 1..=n {
        prefix += d[k - 1];
        // nodes after position k with degree >= k contribute k, others d_i
        let big = d.partition_point(|&x| x >= k).max(k);
        let rhs = k * (k - 1) + (big - k) * k + suffix[big];
        if prefix > rhs {
            return false;
        }
    }
    true
}

/// Random simple graph with an i.i.d. degree sequence from `law`, built by
/// configuration-model stub pairing that rejects self-loops and multi-edges
/// (a pairing that gets stuck is restarted from scratch).
///
/// Node ids are `"0"..="n-1"` and coincide with node indices.
pub fn generate_configuration_graph<R: Rng>(
    n_nodes: usize,
    law: DegreeLaw,
    rng: &mut R,
) -> Result<PopulationGraph> {
    if n_nodes < 2 {
        return Err(Error::InfeasibleDegrees(format!(
            "need at least 2 nodes, got {n_nodes}"
        )));
    }
    law.validate(n_nodes)?;
    let degrees = law.sample_degrees(n_nodes, rng)?;
    if !is_graphical(&degrees) {
        return Err(Error::InfeasibleDegrees(
            "degree sequence is not graphical".into(),
        ));
    }
    for _ in 0..MAX_RESTARTS {
        if let Some(adjacency) = pair_stubs(&degrees, rng) {
            return Ok(PopulationGraph::from_adjacency(adjacency));
        }
    }
    Err(Error::InfeasibleDegrees(format!(
        "stub pairing failed {MAX_RESTARTS} times"
    )))
}

fn pair_stubs<R: Rng>(degrees: &[usize], rng: &mut R) -> Option<Vec<Vec<usize>>> {
    let mut stubs: Vec<usize> = degrees
        .iter()
        .enumerate()
        .flat_map(|(node, &d)| std::iter::repeat_n(node, d))
        .collect();
    let mut neighbours: Vec<HashSet<usize>> = vec![HashSet::new(); degrees.len()];
    while let Some(u) = stubs.pop() {
        if stubs.is_empty() {
            return None;
        }
        let mut paired = false;
        for _ in 0..PARTNER_TRIES {
            let j = rng.gen_range(0..stubs.len());
            let v = stubs[j];
            if v != u && !neighbours[u].contains(&v) {
                stubs.swap_remove(j);
                neighbours[u].insert(v);
                neighbours[v].insert(u);
                paired = true;
                break;
            }
        }
        if !paired {
            return None;
        }
    }
    Some(
        neighbours
            .into_iter()
            .map(|s| s.into_iter().collect())
            .collect(),
    )
}

/// How the positive nodes of a planted attribute are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule")]
pub enum PlantingRule {
    /// Uniformly at random.
    Independent,
    /// Weighted by `degree^exponent` (positive: hubs, negative: periphery).
    DegreeLinked { exponent: f64 },
    /// `share` of the positives are grown as breadth-first patches of
    /// `patch_size` nodes around random centres; the rest are uniform.
    Clustered { share: f64, patch_size: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedAttribute {
    pub name: String,
    pub prevalence: f64,
    #[serde(flatten)]
    pub rule: PlantingRule,
}

impl PlantedAttribute {
    pub fn new(name: &str, prevalence: f64, rule: PlantingRule) -> Self {
        Self {
            name: name.to_string(),
            prevalence,
            rule,
        }
    }

    /// Five attributes covering independent, degree-linked and clustered
    /// mechanisms, with mild effect sizes. Used for synthetic populations in
    /// the CLI and tests.
    pub fn default_panel() -> Vec<PlantedAttribute> {
        Self::panel(0.4, 0.3, 10)
    }

    /// The same five mechanisms with strong effects: prevalence linear in
    /// degree and half of the positives in large patches. Under coupon
    /// sampling of a large share of the population these attributes show
    /// visible estimator bias.
    pub fn strong_panel() -> Vec<PlantedAttribute> {
        Self::panel(1.0, 0.5, 25)
    }

    fn panel(exponent: f64, share: f64, patch_size: usize) -> Vec<PlantedAttribute> {
        vec![
            Self::new("independent", 0.30, PlantingRule::Independent),
            Self::new("hub_linked", 0.20, PlantingRule::DegreeLinked { exponent }),
            Self::new(
                "periphery_linked",
                0.40,
                PlantingRule::DegreeLinked { exponent: -exponent },
            ),
            Self::new("clustered", 0.25, PlantingRule::Clustered { share, patch_size }),
            Self::new(
                "clustered_rare",
                0.10,
                PlantingRule::Clustered {
                    share,
                    patch_size: patch_size / 2,
                },
            ),
        ]
    }
}

/// Plants binary attributes on `g`. Each column has exactly
/// `round(prevalence * N)` positives.
pub fn plant_attributes<R: Rng>(
    g: &PopulationGraph,
    specs: &[PlantedAttribute],
    rng: &mut R,
) -> Result<AttributeTable> {
    let n = g.node_count();
    let mut names = Vec::with_capacity(specs.len());
    let mut columns = Vec::with_capacity(specs.len());
    for spec in specs {
        if !(0.0..=1.0).contains(&spec.prevalence) {
            return Err(Error::InvalidConfig(format!(
                "prevalence {} of `{}` outside [0, 1]",
                spec.prevalence, spec.name
            )));
        }
        let target = (spec.prevalence * n as f64).round() as usize;
        let mut col = vec![0u8; n];
        match spec.rule {
            PlantingRule::Independent => {
                for i in index::sample(rng, n, target) {
                    col[i] = 1;
                }
            }
            PlantingRule::DegreeLinked { exponent } => {
                // Efraimidis–Spirakis weighted sampling without replacement.
                let mut keys: Vec<(f64, usize)> = (0..n)
                    .map(|i| {
                        let w = (g.degree(i).max(1) as f64).powf(exponent);
                        (rng.gen::<f64>().ln() / w, i)
                    })
                    .collect();
                keys.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
                for &(_, i) in keys.iter().take(target) {
                    col[i] = 1;
                }
            }
            PlantingRule::Clustered { share, patch_size } => {
                let clustered = ((share.clamp(0.0, 1.0) * target as f64).round() as usize).min(target);
                grow_patches(g, &mut col, clustered, patch_size.max(1), rng);
                let placed = col.iter().filter(|&&v| v == 1).count();
                let free: Vec<usize> = (0..n).filter(|&i| col[i] == 0).collect();
                let rest = target.saturating_sub(placed).min(free.len());
                for j in index::sample(rng, free.len(), rest) {
                    col[free[j]] = 1;
                }
            }
        }
        names.push(spec.name.clone());
        columns.push(col);
    }
    AttributeTable::new(names, columns)
}

fn grow_patches<R: Rng>(
    g: &PopulationGraph,
    col: &mut [u8],
    mut remaining: usize,
    patch_size: usize,
    rng: &mut R,
) {
    let n = g.node_count();
    let mut queue = VecDeque::new();
    let mut stalls = 0;
    while remaining > 0 && stalls < 10 * n {
        let centre = rng.gen_range(0..n);
        if col[centre] == 1 {
            stalls += 1;
            continue;
        }
        queue.clear();
        queue.push_back(centre);
        let mut grown = 0;
        while let Some(u) = queue.pop_front() {
            if col[u] == 1 {
                continue;
            }
            col[u] = 1;
            grown += 1;
            remaining -= 1;
            if remaining == 0 || grown == patch_size {
                break;
            }
            for &v in g.neighbours(u) {
                if col[v] == 0 {
                    queue.push_back(v);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    #[test]
    fn four_nodes_degree_three_is_k4() {
        let g = generate_configuration_graph(4, DegreeLaw::Fixed { k: 3 }, &mut RngStream::new(1).rng())
            .unwrap();
        assert_eq!(g.edge_count(), 6);
        for i in 0..4 {
            assert_eq!(g.degree(i), 3);
        }
    }

    #[test]
    fn two_nodes_degree_one_is_single_edge() {
        let g = generate_configuration_graph(2, DegreeLaw::Fixed { k: 1 }, &mut RngStream::new(5).rng())
            .unwrap();
        assert_eq!(g.edge_count(), 1);
        assert!(g.has_edge(0, 1));
    }

    #[test]
    fn infeasible_sequences_error() {
        let mut rng = RngStream::new(0).rng();
        assert!(generate_configuration_graph(3, DegreeLaw::Fixed { k: 3 }, &mut rng).is_err());
        assert!(generate_configuration_graph(5, DegreeLaw::Fixed { k: 3 }, &mut rng).is_err());
        assert!(generate_configuration_graph(1, DegreeLaw::Fixed { k: 1 }, &mut rng).is_err());
    }

    #[test]
    fn erdos_gallai() {
        assert!(is_graphical(&[3, 3, 3, 3]));
        assert!(is_graphical(&[1, 1]));
        assert!(is_graphical(&[2, 2, 2]));
        assert!(!is_graphical(&[3, 3, 1, 1]));
        assert!(!is_graphical(&[2, 1]));
        assert!(is_graphical(&[4, 1, 1, 1, 1, 0]));
        assert!(!is_graphical(&[4, 1, 1, 1, 0]));
        assert!(is_graphical(&[]));
    }

    #[test]
    fn power_law_degrees_respect_bounds() {
        let law = DegreeLaw::PowerLaw {
            alpha: 2.5,
            d_min: 2,
            d_max: 50,
        };
        let g = generate_configuration_graph(1000, law, &mut RngStream::new(9).rng()).unwrap();
        let degrees = g.degrees();
        assert!(degrees.iter().all(|&d| (2..=50).contains(&d)));
        assert_eq!(degrees.iter().sum::<usize>(), 2 * g.edge_count());
        // histogram must be heavy at d_min
        let at_min = degrees.iter().filter(|&&d| d == 2).count();
        assert!(at_min > 300, "{at_min}");
    }

    #[test]
    fn generation_is_deterministic() {
        let law = DegreeLaw::PowerLaw {
            alpha: 2.2,
            d_min: 1,
            d_max: 30,
        };
        let a = generate_configuration_graph(300, law, &mut RngStream::new(3).rng()).unwrap();
        let b = generate_configuration_graph(300, law, &mut RngStream::new(3).rng()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn planted_prevalence_is_exact() {
        let law = DegreeLaw::Fixed { k: 4 };
        let mut rng = RngStream::new(2).rng();
        let g = generate_configuration_graph(200, law, &mut rng).unwrap();
        let t = plant_attributes(&g, &PlantedAttribute::default_panel(), &mut rng).unwrap();
        assert_eq!(t.n_columns(), 5);
        for (i, spec) in PlantedAttribute::default_panel().iter().enumerate() {
            let ones = t.column_at(i).iter().filter(|&&v| v == 1).count();
            assert_eq!(ones, (spec.prevalence * 200.0).round() as usize, "{}", spec.name);
        }
    }
}
