//! Monte Carlo harness: interval coverage, interval width against the
//! sampling distribution, and relative bias of the bootstrap variance.
//!
//! Replication `r` draws everything from `master.derive(1).derive(r)`:
//! substream 0 simulates the forest and substream `1 + method id` drives
//! that method's bootstrap, replicate `b` using a further `derive(b)`.
//! Reference forests for the expected widths use `master.derive(2)`.
//! Reductions run in replication order, so reports do not depend on the
//! number of worker threads.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{Estimator, PopulationTotals};
use crate::netgraph::{
    generate_configuration_graph, largest_connected_component, load_attributes, load_edge_list,
    plant_attributes, AttributeTable, DegreeLaw, EdgeListFormat, LoadSummary, PlantedAttribute,
    PopulationGraph,
};
use crate::rds::{simulate_rds, RdsDesign, RecruitmentForest};
use crate::resample::{
    percentile_ci_sorted, validate_level, BootstrapConfig, DegreeClasses, Method, Resampler, SeedMode,
    SelectionPool,
};
use crate::rng::RngStream;

const REPLICATION_DOMAIN: u64 = 1;
const WIDTH_DOMAIN: u64 = 2;
const FOREST_STREAM: u64 = 0;

fn method_stream(m: Method) -> u64 {
    match m {
        Method::Neighbourhood => 1,
        Method::Tree => 2,
    }
}

/// A population graph with node-aligned binary attributes.
#[derive(Debug, Clone)]
pub struct Population {
    pub graph: PopulationGraph,
    pub attributes: AttributeTable,
}

impl Population {
    pub fn new(graph: PopulationGraph, attributes: AttributeTable) -> Result<Self> {
        if attributes.n_nodes() != graph.node_count() {
            return Err(Error::InvalidData(format!(
                "{} attribute rows for {} nodes",
                attributes.n_nodes(),
                graph.node_count()
            )));
        }
        Ok(Self { graph, attributes })
    }

    /// Loads an edge list, optionally keeps only its largest connected
    /// component, and aligns the attribute CSV to the remaining nodes.
    pub fn from_files(
        edges: &Path,
        format: EdgeListFormat,
        attributes: &Path,
        lcc_only: bool,
    ) -> Result<(Self, LoadSummary)> {
        let (mut graph, summary) = load_edge_list(edges, format)?;
        if lcc_only {
            graph = largest_connected_component(&graph);
        }
        let attributes = load_attributes(attributes, &graph)?;
        Ok((Self::new(graph, attributes)?, summary))
    }

    pub fn synthetic(spec: &SyntheticPopulation) -> Result<Self> {
        let stream = RngStream::new(spec.seed);
        let g = generate_configuration_graph(spec.n_nodes, spec.degree_law, &mut stream.derive(0).rng())?;
        let graph = largest_connected_component(&g);
        let attributes = plant_attributes(&graph, &spec.attributes, &mut stream.derive(1).rng())?;
        Self::new(graph, attributes)
    }

    pub fn totals(&self) -> Result<PopulationTotals> {
        PopulationTotals::from_graph(&self.graph)
    }
}

/// Recipe for a configuration-model population with planted attributes;
/// the largest connected component is kept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticPopulation {
    pub n_nodes: usize,
    pub degree_law: DegreeLaw,
    pub attributes: Vec<PlantedAttribute>,
    pub seed: u64,
}

impl SyntheticPopulation {
    /// Power-law degrees (exponent 2.2 on 3..=100, mean degree about 8) with
    /// the five-attribute planted panel.
    pub fn power_law(n_nodes: usize, seed: u64) -> Self {
        Self {
            n_nodes,
            degree_law: DegreeLaw::PowerLaw {
                alpha: 2.2,
                d_min: 3,
                d_max: 100,
            },
            attributes: PlantedAttribute::default_panel(),
            seed,
        }
    }
}

/// Population proportion of `column`.
pub fn true_proportion(pop: &Population, column: &str) -> Result<f64> {
    let z = pop.attributes.column(column)?;
    if z.is_empty() {
        return Err(Error::EmptySample);
    }
    Ok(z.iter().map(|&v| v as u64).sum::<u64>() as f64 / z.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub design: RdsDesign,
    pub attributes: Vec<String>,
    pub methods: Vec<Method>,
    pub n_replications: usize,
    pub n_bootstrap: usize,
    pub ci_levels: Vec<f64>,
    /// Forests simulated for the expected widths; 0 skips them.
    pub n_width_reference: usize,
    pub master_seed: u64,
    pub estimator: Estimator,
    pub selection_pool: SelectionPool,
    pub tree_seed_mode: SeedMode,
}

impl ExperimentConfig {
    /// Both methods, VH estimator, 95% and 80% intervals, 5000 reference
    /// forests.
    pub fn new(
        design: RdsDesign,
        attributes: Vec<String>,
        n_replications: usize,
        n_bootstrap: usize,
        master_seed: u64,
    ) -> Self {
        Self {
            design,
            attributes,
            methods: vec![Method::Neighbourhood, Method::Tree],
            n_replications,
            n_bootstrap,
            ci_levels: vec![0.95, 0.80],
            n_width_reference: 5000,
            master_seed,
            estimator: Estimator::Vh,
            selection_pool: SelectionPool::RecruitersOnly,
            tree_seed_mode: SeedMode::WithReplacement,
        }
    }

    pub fn validate(&self, pop: &Population) -> Result<()> {
        if self.n_replications < 2 {
            return Err(Error::InvalidConfig(format!(
                "need at least 2 replications, got {}",
                self.n_replications
            )));
        }
        if self.n_bootstrap < 2 {
            return Err(Error::TooFewReplicates(self.n_bootstrap));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidConfig("no bootstrap method selected".into()));
        }
        for (i, m) in self.methods.iter().enumerate() {
            if self.methods[..i].contains(m) {
                return Err(Error::InvalidConfig(format!("method `{}` listed twice", m.name())));
            }
        }
        if self.ci_levels.is_empty() {
            return Err(Error::InvalidConfig("no confidence level given".into()));
        }
        for &l in &self.ci_levels {
            validate_level(l)?;
        }
        if self.n_width_reference != 0 && self.n_width_reference < 100 {
            return Err(Error::InvalidConfig(format!(
                "width reference needs at least 100 forests (or 0 to skip), got {}",
                self.n_width_reference
            )));
        }
        if self.attributes.is_empty() {
            return Err(Error::InvalidConfig("no attribute selected".into()));
        }
        for a in &self.attributes {
            pop.attributes.column_index(a)?;
        }
        self.design.validate(pop.graph.node_count())
    }

    fn bootstrap_config(&self, method: Method) -> BootstrapConfig {
        BootstrapConfig {
            method,
            n_replicates: self.n_bootstrap,
            selection_pool: self.selection_pool,
            tree_seed_mode: self.tree_seed_mode,
            estimator: self.estimator,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub attribute: String,
    pub method: Method,
    pub level: f64,
    pub coverage: f64,
    pub mean_width: f64,
    pub expected_width: Option<f64>,
    pub mean_boot_var: f64,
    pub mse: f64,
    /// `None` when the MSE is zero.
    pub rel_bias: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Truth {
    pub attribute: String,
    pub mu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics {
    pub replications_requested: usize,
    pub replications_used: usize,
    pub replications_starved: usize,
    pub replications_with_reseeds: usize,
    pub total_reseeds: usize,
    pub total_truncated_recruits: usize,
    pub mean_recruiters: f64,
    pub mean_point_estimate: Vec<f64>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub population_nodes: usize,
    pub population_edges: usize,
    pub truth: Vec<Truth>,
    pub rows: Vec<ReportRow>,
    pub diagnostics: Diagnostics,
}

impl ExperimentReport {
    pub fn row(&self, attribute: &str, method: Method, level: f64) -> Option<&ReportRow> {
        self.rows
            .iter()
            .find(|r| r.attribute == attribute && r.method == method && r.level == level)
    }
}

/// Relative bias `(mean variance - MSE) / MSE`; `None` when `mse == 0`.
pub fn relative_bias(mean_variance: f64, mse: f64) -> Option<f64> {
    (mse > 0.0).then(|| (mean_variance - mse) / mse)
}

/// Width of the nearest-rank central interval at `level` of a set of
/// point estimates.
pub fn sampling_distribution_width(estimates: &[f64], level: f64) -> Result<f64> {
    validate_level(level)?;
    if estimates.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut sorted = estimates.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (lo, hi) = percentile_ci_sorted(&sorted, level);
    Ok(hi - lo)
}

struct Replication {
    forest_stats: Option<(usize, usize, usize)>,
    point: Vec<f64>,
    /// `[method][attribute]`
    variance: Vec<Vec<f64>>,
    /// `[method][attribute][level]`
    intervals: Vec<Vec<Vec<(f64, f64)>>>,
}

fn simulate_or_starve(
    pop: &Population,
    design: &RdsDesign,
    stream: &RngStream,
) -> Result<Option<RecruitmentForest>> {
    match simulate_rds(&pop.graph, design, &mut stream.rng()) {
        Ok(f) => Ok(Some(f)),
        Err(Error::SampleStarved { .. }) if !design.reseed_on_death => Ok(None),
        Err(e) => Err(e),
    }
}

fn run_replication(
    pop: &Population,
    cfg: &ExperimentConfig,
    columns: &[&[u8]],
    totals: &PopulationTotals,
    r: usize,
) -> Result<Replication> {
    let stream = RngStream::new(cfg.master_seed)
        .derive(REPLICATION_DOMAIN)
        .derive(r as u64);
    let Some(forest) = simulate_or_starve(pop, &cfg.design, &stream.derive(FOREST_STREAM))? else {
        return Ok(Replication {
            forest_stats: None,
            point: Vec::new(),
            variance: Vec::new(),
            intervals: Vec::new(),
        });
    };
    let classes = DegreeClasses::new(&forest);
    let z: Vec<Vec<u8>> = columns.iter().map(|c| forest.values_for(c)).collect();
    let point = z
        .iter()
        .map(|z| cfg.estimator.apply(&classes.tally_all(z), Some(totals)))
        .collect::<Result<Vec<_>>>()?;

    let mut variance = Vec::with_capacity(cfg.methods.len());
    let mut intervals = Vec::with_capacity(cfg.methods.len());
    for &method in &cfg.methods {
        let boot = cfg.bootstrap_config(method);
        let resampler = Resampler::new(&forest, &boot)?;
        let method_stream = stream.derive(method_stream(method));
        let mut estimates = vec![Vec::with_capacity(cfg.n_bootstrap); z.len()];
        for b in 0..cfg.n_bootstrap {
            // one resample serves every attribute
            let resample = resampler.replicate(&method_stream, b);
            for (a, za) in z.iter().enumerate() {
                estimates[a].push(cfg.estimator.apply(&classes.tally(&resample, za), Some(totals))?);
            }
        }
        let mut var_m = Vec::with_capacity(z.len());
        let mut int_m = Vec::with_capacity(z.len());
        for mut est in estimates {
            var_m.push(crate::resample::bootstrap_variance(&est)?);
            est.sort_by(f64::total_cmp);
            int_m.push(
                cfg.ci_levels
                    .iter()
                    .map(|&l| percentile_ci_sorted(&est, l))
                    .collect(),
            );
        }
        variance.push(var_m);
        intervals.push(int_m);
    }
    Ok(Replication {
        forest_stats: Some((forest.reseeds(), forest.truncated(), forest.n_recruiters())),
        point,
        variance,
        intervals,
    })
}

fn thread_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot start {workers} workers: {e}")))
}

fn columns<'a>(pop: &'a Population, names: &[String]) -> Result<Vec<&'a [u8]>> {
    names.iter().map(|a| pop.attributes.column(a)).collect()
}

/// Expected interval widths from the sampling distribution of the point
/// estimator over `cfg.n_width_reference` independent forests, indexed
/// `[attribute][level]`.
pub fn expected_widths(pop: &Population, cfg: &ExperimentConfig, workers: usize) -> Result<Vec<Vec<f64>>> {
    if cfg.n_width_reference == 0 {
        return Err(Error::InvalidConfig("width reference disabled".into()));
    }
    let cols = columns(pop, &cfg.attributes)?;
    let totals = pop.totals()?;
    let stream = RngStream::new(cfg.master_seed).derive(WIDTH_DOMAIN);
    let per_forest: Vec<Option<Vec<f64>>> = thread_pool(workers)?.install(|| {
        (0..cfg.n_width_reference)
            .into_par_iter()
            .map(|i| {
                let Some(forest) = simulate_or_starve(pop, &cfg.design, &stream.derive(i as u64))? else {
                    return Ok(None);
                };
                let classes = DegreeClasses::new(&forest);
                cols.iter()
                    .map(|c| cfg.estimator.apply(&classes.tally_all(&forest.values_for(c)), Some(&totals)))
                    .collect::<Result<Vec<_>>>()
                    .map(Some)
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let completed: Vec<Vec<f64>> = per_forest.into_iter().flatten().collect();
    if completed.is_empty() {
        return Err(Error::SampleStarved {
            collected: 0,
            target: cfg.design.target_n,
        });
    }
    (0..cols.len())
        .map(|a| {
            let est: Vec<f64> = completed.iter().map(|p| p[a]).collect();
            cfg.ci_levels
                .iter()
                .map(|&l| sampling_distribution_width(&est, l))
                .collect()
        })
        .collect()
}

/// Expected width for a single attribute and level.
pub fn expected_width(pop: &Population, cfg: &ExperimentConfig, column: &str, level: f64) -> Result<f64> {
    let mut single = cfg.clone();
    single.attributes = vec![column.to_string()];
    single.ci_levels = vec![level];
    Ok(expected_widths(pop, &single, 1)?[0][0])
}

/// Runs the full experiment: `R` simulated samples, each bootstrapped
/// `B` times by every configured method, then reduced to coverage, mean
/// width, mean bootstrap variance, MSE and relative bias per attribute,
/// method and level.
pub fn run_experiment(pop: &Population, cfg: &ExperimentConfig, workers: usize) -> Result<ExperimentReport> {
    cfg.validate(pop)?;
    let cols = columns(pop, &cfg.attributes)?;
    let totals = pop.totals()?;
    let truth: Vec<Truth> = cfg
        .attributes
        .iter()
        .map(|a| {
            Ok(Truth {
                attribute: a.clone(),
                mu: true_proportion(pop, a)?,
            })
        })
        .collect::<Result<_>>()?;

    let replications: Vec<Replication> = thread_pool(workers)?.install(|| {
        (0..cfg.n_replications)
            .into_par_iter()
            .map(|r| run_replication(pop, cfg, &cols, &totals, r))
            .collect::<Result<Vec<_>>>()
    })?;
    let widths = if cfg.n_width_reference > 0 {
        Some(expected_widths(pop, cfg, workers)?)
    } else {
        None
    };

    let used: Vec<&Replication> = replications.iter().filter(|r| r.forest_stats.is_some()).collect();
    let n_used = used.len();
    if n_used == 0 {
        return Err(Error::SampleStarved {
            collected: 0,
            target: cfg.design.target_n,
        });
    }
    let nf = n_used as f64;
    let mut warnings = Vec::new();
    let starved = cfg.n_replications - n_used;
    if starved > 0 {
        warnings.push(format!(
            "{starved} of {} replications starved and were excluded",
            cfg.n_replications
        ));
    }

    let mut rows = Vec::new();
    for (a, t) in truth.iter().enumerate() {
        let mse = used.iter().map(|r| (r.point[a] - t.mu).powi(2)).sum::<f64>() / nf;
        for (m, &method) in cfg.methods.iter().enumerate() {
            let mean_boot_var = used.iter().map(|r| r.variance[m][a]).sum::<f64>() / nf;
            for (l, &level) in cfg.ci_levels.iter().enumerate() {
                let mut covered = 0usize;
                let mut width = 0.0;
                for r in &used {
                    let (lo, hi) = r.intervals[m][a][l];
                    covered += (lo <= t.mu && t.mu <= hi) as usize;
                    width += hi - lo;
                }
                rows.push(ReportRow {
                    attribute: t.attribute.clone(),
                    method,
                    level,
                    coverage: covered as f64 / nf,
                    mean_width: width / nf,
                    expected_width: widths.as_ref().map(|w| w[a][l]),
                    mean_boot_var,
                    mse,
                    rel_bias: relative_bias(mean_boot_var, mse),
                });
            }
        }
    }

    let stats: Vec<(usize, usize, usize)> = used.iter().filter_map(|r| r.forest_stats).collect();
    let diagnostics = Diagnostics {
        replications_requested: cfg.n_replications,
        replications_used: n_used,
        replications_starved: starved,
        replications_with_reseeds: stats.iter().filter(|s| s.0 > 0).count(),
        total_reseeds: stats.iter().map(|s| s.0).sum(),
        total_truncated_recruits: stats.iter().map(|s| s.1).sum(),
        mean_recruiters: stats.iter().map(|s| s.2 as f64).sum::<f64>() / nf,
        mean_point_estimate: (0..truth.len())
            .map(|a| used.iter().map(|r| r.point[a]).sum::<f64>() / nf)
            .collect(),
        warnings,
    };
    Ok(ExperimentReport {
        config: cfg.clone(),
        population_nodes: pop.graph.node_count(),
        population_edges: pop.graph.edge_count(),
        truth,
        rows,
        diagnostics,
    })
}

/// Column order of the report CSV.
pub const REPORT_COLUMNS: [&str; 9] = [
    "attribute",
    "method",
    "level",
    "coverage",
    "mean_width",
    "expected_width",
    "mean_boot_var",
    "mse",
    "rel_bias",
];

fn na(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

/// One row per attribute, method and level; undefined values are `NA`.
pub fn write_report_csv<W: Write>(report: &ExperimentReport, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(REPORT_COLUMNS)?;
    for r in &report.rows {
        w.write_record([
            r.attribute.clone(),
            r.method.name().to_string(),
            r.level.to_string(),
            r.coverage.to_string(),
            r.mean_width.to_string(),
            na(r.expected_width),
            r.mean_boot_var.to_string(),
            r.mse.to_string(),
            na(r.rel_bias),
        ])?;
    }
    w.flush().map_err(|e| Error::io("report csv", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_population(seed: u64) -> Population {
        let spec = SyntheticPopulation {
            n_nodes: 120,
            degree_law: DegreeLaw::PowerLaw {
                alpha: 2.2,
                d_min: 3,
                d_max: 20,
            },
            attributes: vec![
                PlantedAttribute::new("a", 0.3, crate::netgraph::PlantingRule::Independent),
                PlantedAttribute::new("ones", 1.0, crate::netgraph::PlantingRule::Independent),
            ],
            seed,
        };
        Population::synthetic(&spec).unwrap()
    }

    fn small_config() -> ExperimentConfig {
        let mut design = RdsDesign::three_coupon(40);
        design.n_seeds = 3;
        let mut cfg = ExperimentConfig::new(design, vec!["a".into(), "ones".into()], 6, 30, 17);
        cfg.n_width_reference = 100;
        cfg
    }

    #[test]
    fn relative_bias_formula() {
        assert_eq!(relative_bias(2.0, 1.0), Some(1.0));
        assert_eq!(relative_bias(0.25, 0.25), Some(0.0));
        assert_eq!(relative_bias(0.0, 0.0), None);
    }

    #[test]
    fn two_point_sampling_distribution() {
        let mut est = vec![0.4; 2500];
        est.extend(vec![0.6; 2500]);
        let w = sampling_distribution_width(&est, 0.95).unwrap();
        assert!((w - 0.2).abs() < 1e-15);
        assert_eq!(sampling_distribution_width(&[0.3; 200], 0.8).unwrap(), 0.0);
    }

    #[test]
    fn constant_attribute_is_always_covered() {
        let pop = small_population(3);
        let report = run_experiment(&pop, &small_config(), 1).unwrap();
        assert_eq!(report.rows.len(), 2 * 2 * 2);
        for r in report.rows.iter().filter(|r| r.attribute == "ones") {
            assert_eq!(r.coverage, 1.0);
            assert_eq!(r.mean_width, 0.0);
            assert_eq!(r.expected_width, Some(0.0));
            assert_eq!(r.rel_bias, None);
        }
        for r in &report.rows {
            assert!((0.0..=1.0).contains(&r.coverage));
            assert!(r.mean_width >= 0.0 && r.mse >= 0.0);
        }
    }

    #[test]
    fn worker_count_does_not_change_report() {
        let pop = small_population(5);
        let cfg = small_config();
        let a = run_experiment(&pop, &cfg, 1).unwrap();
        let b = run_experiment(&pop, &cfg, 3).unwrap();
        let (mut ca, mut cb) = (Vec::new(), Vec::new());
        write_report_csv(&a, &mut ca).unwrap();
        write_report_csv(&b, &mut cb).unwrap();
        assert_eq!(ca, cb);
        assert!(String::from_utf8(ca)
            .unwrap()
            .starts_with("attribute,method,level,coverage,mean_width,expected_width,mean_boot_var,mse,rel_bias\n"));
    }

    #[test]
    fn config_validation() {
        let pop = small_population(1);
        let mut cfg = small_config();
        cfg.n_replications = 1;
        assert!(cfg.validate(&pop).is_err());
        let mut cfg = small_config();
        cfg.ci_levels = vec![1.2];
        assert!(matches!(cfg.validate(&pop), Err(Error::InvalidLevel(_))));
        let mut cfg = small_config();
        cfg.attributes = vec!["missing".into()];
        assert!(matches!(cfg.validate(&pop), Err(Error::UnknownColumn(_))));
        let mut cfg = small_config();
        cfg.n_width_reference = 50;
        assert!(cfg.validate(&pop).is_err());
    }
}
