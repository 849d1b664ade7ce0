//! Command-line front end.
//!
//! Options come from flags, then from an optional `--config` TOML file whose
//! keys are the long flag names with underscores (`synthetic_nodes = 4000`,
//! `B = 200`). Flags win; keys that the command does not accept are errors.
//! Every JSON artifact carries the library version and the merged options.

mod args;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::Parser;
use serde::Serialize;
use serde_json::{json, Value};

pub use args::{
    BootstrapArgs, Cli, Command, ExperimentArgs, IngestArgs, OracleArgs, Pmf, SimulateArgs,
};
use args::Merge;

use crate::error::{Error, Result};
use crate::estimators::{Estimator, PopulationTotals};
use crate::experiment::{run_experiment, write_report_csv, ExperimentConfig, Population, SyntheticPopulation};
use crate::netgraph::{
    largest_connected_component, load_attributes, load_attributes_for_ids, load_edge_list, AttributeTable,
    EdgeListFormat, PlantedAttribute, PopulationGraph,
};
use crate::oracle::{check_moment_identity, enumerate_neighbourhood, enumerate_tree};
use crate::rds::{read_forest_csv, simulate_rds, write_forest_csv, RdsDesign, RecruitmentForest, Regime};
use crate::resample::{bootstrap_distribution, validate_level, BootstrapConfig, Method};
use crate::rng::RngStream;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Fully merged and checked options of one invocation.
#[derive(Debug, Clone)]
pub enum RunConfig {
    Ingest(IngestArgs),
    Simulate(SimulateArgs),
    Bootstrap(BootstrapArgs),
    Experiment(ExperimentArgs),
    Oracle(OracleArgs),
}

impl RunConfig {
    pub fn command_name(&self) -> &'static str {
        match self {
            RunConfig::Ingest(_) => "ingest",
            RunConfig::Simulate(_) => "simulate",
            RunConfig::Bootstrap(_) => "bootstrap",
            RunConfig::Experiment(_) => "experiment",
            RunConfig::Oracle(_) => "oracle",
        }
    }
}

/// Parses `argv` (including the program name) and any `--config` file
/// into a validated [`RunConfig`].
pub fn parse_config<I, T>(argv: I) -> Result<RunConfig>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv).map_err(|e| Error::Usage(e.to_string().trim_end().to_string()))?;
    from_cli(cli)
}

fn merged<T: Merge + serde::de::DeserializeOwned>(mut cli: T, config: Option<&PathBuf>) -> Result<T> {
    if let Some(path) = config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Usage(format!("cannot read config file {}: {e}", path.display())))?;
        let file: T = toml::from_str(&text)
            .map_err(|e| Error::Usage(format!("config file {}: {}", path.display(), e.message())))?;
        cli.merge_from(file);
    }
    Ok(cli)
}

fn require<'a, T>(value: &'a Option<T>, flag: &str, command: &str) -> Result<&'a T> {
    value
        .as_ref()
        .ok_or_else(|| Error::Usage(format!("`{command}` needs --{flag}")))
}

fn must_exist(path: &Option<PathBuf>, flag: &str) -> Result<()> {
    match path {
        Some(p) if !p.exists() => Err(Error::Usage(format!("--{flag}: no such file {}", p.display()))),
        _ => Ok(()),
    }
}

fn from_cli(cli: Cli) -> Result<RunConfig> {
    Ok(match cli.command {
        Command::Ingest(a) => {
            let a = merged(a.clone(), a.config.as_ref())?;
            require(&a.edges, "edges", "ingest")?;
            must_exist(&a.edges, "edges")?;
            must_exist(&a.attributes, "attributes")?;
            RunConfig::Ingest(a)
        }
        Command::Simulate(a) => {
            let a = merged(a.clone(), a.config.as_ref())?;
            check_population_source(&a.edges, &a.synthetic_nodes, "simulate")?;
            must_exist(&a.edges, "edges")?;
            must_exist(&a.attributes, "attributes")?;
            design_from(a.seeds, a.coupons, &a.pmf, a.n, a.regime, a.reseed)?.validate(usize::MAX)?;
            RunConfig::Simulate(a)
        }
        Command::Bootstrap(a) => {
            let a = merged(a.clone(), a.config.as_ref())?;
            require(&a.forest, "forest", "bootstrap")?;
            require(&a.attributes, "attributes", "bootstrap")?;
            must_exist(&a.forest, "forest")?;
            must_exist(&a.attributes, "attributes")?;
            bootstrap_config(&a)?.validate()?;
            validate_level(a.level.unwrap_or(0.95))?;
            totals_from(a.population_size, a.total_degree)?;
            RunConfig::Bootstrap(a)
        }
        Command::Experiment(a) => {
            let a = merged(a.clone(), a.config.as_ref())?;
            check_population_source(&a.edges, &a.synthetic_nodes, "experiment")?;
            if a.edges.is_some() {
                require(&a.attributes, "attributes", "experiment")?;
            }
            must_exist(&a.edges, "edges")?;
            must_exist(&a.attributes, "attributes")?;
            require(&a.seed, "seed", "experiment")?;
            design_from(a.seeds, a.coupons, &a.pmf, a.n, a.regime, a.reseed)?.validate(usize::MAX)?;
            if a.workers == Some(0) {
                return Err(Error::Usage("--workers must be at least 1".into()));
            }
            for &l in a.levels.iter().flatten() {
                validate_level(l)?;
            }
            RunConfig::Experiment(a)
        }
        Command::Oracle(a) => {
            let a = merged(a.clone(), a.config.as_ref())?;
            require(&a.forest, "forest", "oracle")?;
            require(&a.attributes, "attributes", "oracle")?;
            must_exist(&a.forest, "forest")?;
            must_exist(&a.attributes, "attributes")?;
            totals_from(a.population_size, a.total_degree)?;
            RunConfig::Oracle(a)
        }
    })
}

fn check_population_source(edges: &Option<PathBuf>, synthetic: &Option<usize>, command: &str) -> Result<()> {
    match (edges, synthetic) {
        (None, None) => Err(Error::Usage(format!(
            "`{command}` needs --edges (or --synthetic-nodes for a generated population)"
        ))),
        (Some(_), Some(_)) => Err(Error::Usage(
            "--edges and --synthetic-nodes are mutually exclusive".into(),
        )),
        _ => Ok(()),
    }
}

fn design_from(
    seeds: Option<usize>,
    coupons: Option<usize>,
    pmf: &Option<Pmf>,
    n: Option<usize>,
    regime: Option<Regime>,
    reseed: Option<bool>,
) -> Result<RdsDesign> {
    let mut design = RdsDesign::three_coupon(n.unwrap_or(500));
    if let Some(s) = seeds {
        design.n_seeds = s;
    }
    if let Some(c) = coupons {
        design.max_coupons = c;
        if c != 3 {
            design.recruit_count_pmf = vec![1.0 / (c + 1) as f64; c + 1];
        }
    }
    if let Some(p) = pmf {
        design.recruit_count_pmf = p.0.clone();
    }
    design.regime = regime.unwrap_or_default();
    design.reseed_on_death = reseed.unwrap_or(true);
    Ok(design)
}

fn totals_from(population_size: Option<u64>, total_degree: Option<u64>) -> Result<Option<PopulationTotals>> {
    match (population_size, total_degree) {
        (None, None) => Ok(None),
        (Some(n), Some(t)) => PopulationTotals::new(n, t).map(Some),
        _ => Err(Error::Usage(
            "--population-size and --total-degree must be given together".into(),
        )),
    }
}

fn bootstrap_config(a: &BootstrapArgs) -> Result<BootstrapConfig> {
    Ok(BootstrapConfig {
        method: a.method.unwrap_or(Method::Neighbourhood),
        n_replicates: a.b.unwrap_or(1000),
        selection_pool: a.pool.unwrap_or_default(),
        tree_seed_mode: a.tree_seeds.unwrap_or_default(),
        estimator: a.estimator.unwrap_or_default(),
    })
}

/// Result of a successful run: the main JSON document and the files written.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub json: Value,
    pub files: Vec<PathBuf>,
}

/// Writes `bytes` to `path` through a temporary file in the same directory
/// and a rename, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

struct Outputs {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Outputs {
    fn new(out: &Option<PathBuf>) -> Self {
        Self {
            dir: out.clone().unwrap_or_else(|| PathBuf::from(".")),
            files: Vec::new(),
        }
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        write_atomic(&path, bytes)?;
        self.files.push(path);
        Ok(())
    }

    fn write_json(&mut self, name: &str, value: &Value) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    fn file_names(&self) -> Vec<String> {
        self.files.iter().map(|p| p.display().to_string()).collect()
    }
}

fn envelope<C: Serialize>(command: &str, config: &C, result: Value) -> Result<Value> {
    Ok(json!({
        "version": VERSION,
        "command": command,
        "config": serde_json::to_value(config)?,
        "result": result,
    }))
}

/// Executes a parsed configuration and writes its artifacts.
pub fn run(cfg: &RunConfig) -> Result<RunOutput> {
    match cfg {
        RunConfig::Ingest(a) => run_ingest(a),
        RunConfig::Simulate(a) => run_simulate(a),
        RunConfig::Bootstrap(a) => run_bootstrap(a),
        RunConfig::Experiment(a) => run_experiment_command(a),
        RunConfig::Oracle(a) => run_oracle(a),
    }
}

fn edge_format(path: &Path, format: Option<EdgeListFormat>) -> EdgeListFormat {
    format.unwrap_or_else(|| EdgeListFormat::from_path(path))
}

fn prevalences(attrs: &AttributeTable) -> Vec<Value> {
    attrs
        .column_names()
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let col = attrs.column_at(i);
            let ones = col.iter().filter(|&&v| v == 1).count();
            json!({ "name": name, "positives": ones, "prevalence": ones as f64 / col.len().max(1) as f64 })
        })
        .collect()
}

fn run_ingest(a: &IngestArgs) -> Result<RunOutput> {
    let edges = a.edges.as_ref().expect("checked at parse time");
    let (g, summary) = load_edge_list(edges, edge_format(edges, a.format))?;
    let lcc = a.lcc.unwrap_or(false);
    let kept = if lcc { largest_connected_component(&g) } else { g };
    let attributes = match &a.attributes {
        Some(p) => Some(prevalences(&load_attributes(p, &kept)?)),
        None => None,
    };
    let result = json!({
        "summary": summary,
        "lcc_only": lcc,
        "retained_nodes": kept.node_count(),
        "retained_edges": kept.edge_count(),
        "total_degree": kept.total_degree(),
        "attributes": attributes,
    });
    let mut out = Outputs::new(&a.out);
    let doc = envelope("ingest", a, result)?;
    out.write_json("ingest.json", &doc)?;
    Ok(RunOutput { json: doc, files: out.files })
}

struct PopulationInput<'a> {
    edges: &'a Option<PathBuf>,
    format: Option<EdgeListFormat>,
    attributes: &'a Option<PathBuf>,
    lcc: Option<bool>,
    synthetic_nodes: Option<usize>,
    synthetic_seed: Option<u64>,
    strong_panel: Option<bool>,
}

impl PopulationInput<'_> {
    fn load(&self) -> Result<(PopulationGraph, Option<AttributeTable>)> {
        if let Some(n) = self.synthetic_nodes {
            let mut spec = SyntheticPopulation::power_law(n, self.synthetic_seed.unwrap_or(0));
            if self.strong_panel.unwrap_or(false) {
                spec.attributes = PlantedAttribute::strong_panel();
            }
            let pop = Population::synthetic(&spec)?;
            return Ok((pop.graph, Some(pop.attributes)));
        }
        let edges = self.edges.as_ref().expect("checked at parse time");
        let (mut g, _) = load_edge_list(edges, edge_format(edges, self.format))?;
        if self.lcc.unwrap_or(false) {
            g = largest_connected_component(&g);
        }
        let attrs = match self.attributes {
            Some(p) => Some(load_attributes(p, &g)?),
            None => None,
        };
        Ok((g, attrs))
    }
}

fn participant_attributes_csv(forest: &RecruitmentForest, attrs: &AttributeTable) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["id".to_string()];
    header.extend(attrs.column_names().iter().cloned());
    w.write_record(&header)?;
    for e in forest.entries() {
        let mut row = vec![e.id.clone()];
        row.extend((0..attrs.n_columns()).map(|c| attrs.column_at(c)[e.node].to_string()));
        w.write_record(&row)?;
    }
    w.into_inner()
        .map_err(|e| Error::io("participants csv", e.into_error()))
}

fn run_simulate(a: &SimulateArgs) -> Result<RunOutput> {
    let (g, attrs) = PopulationInput {
        edges: &a.edges,
        format: a.format,
        attributes: &a.attributes,
        lcc: a.lcc,
        synthetic_nodes: a.synthetic_nodes,
        synthetic_seed: a.synthetic_seed,
        strong_panel: a.strong_panel,
    }
    .load()?;
    let design = design_from(a.seeds, a.coupons, &a.pmf, a.n, a.regime, a.reseed)?;
    let forest = simulate_rds(&g, &design, &mut RngStream::new(a.seed.unwrap_or(0)).rng())?;

    let mut out = Outputs::new(&a.out);
    let mut csv = Vec::new();
    write_forest_csv(&forest, &mut csv)?;
    out.write("forest.csv", &csv)?;
    if let Some(attrs) = &attrs {
        out.write("participants.csv", &participant_attributes_csv(&forest, attrs)?)?;
    }
    let result = json!({
        "design": design,
        "population_nodes": g.node_count(),
        "population_total_degree": g.total_degree(),
        "participants": forest.len(),
        "seeds": forest.seeds().len(),
        "reseeds": forest.reseeds(),
        "truncated_recruits": forest.truncated(),
        "recruiters": forest.n_recruiters(),
        "max_wave": forest.max_wave(),
        "files": out.file_names(),
    });
    let doc = envelope("simulate", a, result)?;
    out.write_json("simulate.json", &doc)?;
    Ok(RunOutput { json: doc, files: out.files })
}

fn selected_columns(attrs: &AttributeTable, wanted: &Option<Vec<String>>) -> Result<Vec<String>> {
    match wanted {
        Some(names) => {
            for n in names {
                attrs.column_index(n)?;
            }
            Ok(names.clone())
        }
        None => Ok(attrs.column_names().to_vec()),
    }
}

fn load_forest_and_attributes(forest: &Path, attributes: &Path) -> Result<(RecruitmentForest, AttributeTable)> {
    let file = std::fs::File::open(forest).map_err(|e| Error::io(forest, e))?;
    let forest = read_forest_csv(file)?;
    let attrs = load_attributes_for_ids(attributes, &forest.ids())?;
    Ok((forest, attrs))
}

fn run_bootstrap(a: &BootstrapArgs) -> Result<RunOutput> {
    let (forest, attrs) = load_forest_and_attributes(
        a.forest.as_ref().expect("checked"),
        a.attributes.as_ref().expect("checked"),
    )?;
    let cfg = bootstrap_config(a)?;
    let level = a.level.unwrap_or(0.95);
    let totals = totals_from(a.population_size, a.total_degree)?;
    let stream = RngStream::new(a.seed.unwrap_or(0));
    let columns = selected_columns(&attrs, &a.attribute)?;

    let mut results = Vec::new();
    let mut estimates_csv = csv::Writer::from_writer(Vec::new());
    estimates_csv.write_record(["attribute", "replicate", "estimate"])?;
    for name in &columns {
        let z = attrs.column(name)?;
        let dist = bootstrap_distribution(&forest, &cfg, z, totals.as_ref(), &stream)?;
        let variance = dist.variance()?;
        let (lo, hi) = dist.percentile_ci(level)?;
        results.push(json!({
            "attribute": name,
            "method": cfg.method,
            "B": cfg.n_replicates,
            "estimator": cfg.estimator,
            "point_estimate": dist.estimator_on_original,
            "variance": variance,
            "se": variance.sqrt(),
            "ci": { "level": level, "lo": lo, "hi": hi },
        }));
        for (b, x) in dist.estimates.iter().enumerate() {
            estimates_csv.write_record([name.clone(), b.to_string(), x.to_string()])?;
        }
    }

    let mut out = Outputs::new(&a.out);
    if a.write_estimates.unwrap_or(false) {
        let bytes = estimates_csv
            .into_inner()
            .map_err(|e| Error::io("estimates csv", e.into_error()))?;
        out.write("bootstrap_estimates.csv", &bytes)?;
    }
    let result = json!({
        "participants": forest.len(),
        "seeds": forest.seeds().len(),
        "recruiters": forest.n_recruiters(),
        "selection_pool": cfg.selection_pool,
        "tree_seed_mode": cfg.tree_seed_mode,
        "estimates": results,
    });
    let doc = envelope("bootstrap", a, result)?;
    out.write_json("bootstrap.json", &doc)?;
    Ok(RunOutput { json: doc, files: out.files })
}

/// Worker count: flag or config value, then `RDSVAR_WORKERS`, then the
/// number of available cores.
fn resolve_workers(flag: Option<usize>) -> Result<usize> {
    if let Some(w) = flag {
        return Ok(w);
    }
    if let Ok(v) = std::env::var("RDSVAR_WORKERS") {
        return match v.trim().parse::<usize>() {
            Ok(w) if w > 0 => Ok(w),
            _ => Err(Error::Usage(format!("RDSVAR_WORKERS=`{v}` is not a positive integer"))),
        };
    }
    Ok(std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn run_experiment_command(a: &ExperimentArgs) -> Result<RunOutput> {
    let (graph, attrs) = PopulationInput {
        edges: &a.edges,
        format: a.format,
        attributes: &a.attributes,
        lcc: a.lcc,
        synthetic_nodes: a.synthetic_nodes,
        synthetic_seed: a.synthetic_seed,
        strong_panel: a.strong_panel,
    }
    .load()?;
    let attrs = attrs.ok_or_else(|| Error::Usage("`experiment` needs --attributes".into()))?;
    let pop = Population::new(graph, attrs)?;
    let design = design_from(a.seeds, a.coupons, &a.pmf, a.n, a.regime, a.reseed)?;
    let columns = selected_columns(&pop.attributes, &a.attribute)?;
    let mut cfg = ExperimentConfig::new(
        design,
        columns,
        a.r.unwrap_or(1000),
        a.b.unwrap_or(1000),
        a.seed.expect("checked at parse time"),
    );
    if let Some(m) = &a.methods {
        cfg.methods = m.clone();
    }
    if let Some(l) = &a.levels {
        cfg.ci_levels = l.clone();
    }
    if let Some(w) = a.width_reference {
        cfg.n_width_reference = w;
    }
    cfg.estimator = a.estimator.unwrap_or(Estimator::Vh);
    cfg.selection_pool = a.pool.unwrap_or_default();
    cfg.tree_seed_mode = a.tree_seeds.unwrap_or_default();
    let workers = resolve_workers(a.workers)?;

    let report = run_experiment(&pop, &cfg, workers)?;
    let mut out = Outputs::new(&a.out);
    let mut csv = Vec::new();
    write_report_csv(&report, &mut csv)?;
    out.write("report.csv", &csv)?;
    let mut result = serde_json::to_value(&report)?;
    result["workers"] = json!(workers);
    let doc = envelope("experiment", a, result)?;
    out.write_json("report.json", &doc)?;
    Ok(RunOutput { json: doc, files: out.files })
}

fn run_oracle(a: &OracleArgs) -> Result<RunOutput> {
    let (forest, attrs) = load_forest_and_attributes(
        a.forest.as_ref().expect("checked"),
        a.attributes.as_ref().expect("checked"),
    )?;
    let method = a.method.unwrap_or(Method::Neighbourhood);
    let estimator = a.estimator.unwrap_or_default();
    let totals = totals_from(a.population_size, a.total_degree)?;
    let columns = selected_columns(&attrs, &a.attribute)?;
    let mut results = Vec::new();
    for name in &columns {
        let z = attrs.column(name)?;
        let dist = match method {
            Method::Neighbourhood => {
                enumerate_neighbourhood(&forest, z, a.pool.unwrap_or_default(), estimator, totals.as_ref())?
            }
            Method::Tree => enumerate_tree(&forest, z, a.tree_seeds.unwrap_or_default(), estimator, totals.as_ref())?,
        };
        let moments = if a.moments.unwrap_or(false) {
            Some(serde_json::to_value(check_moment_identity(&forest, z)?)?)
        } else {
            None
        };
        results.push(json!({
            "attribute": name,
            "method": method,
            "estimator": estimator,
            "distribution": dist,
            "moments": moments,
        }));
    }
    let result = json!({
        "participants": forest.len(),
        "seeds": forest.seeds().len(),
        "recruiters": forest.n_recruiters(),
        "results": results,
    });
    let mut out = Outputs::new(&a.out);
    let doc = envelope("oracle", a, result)?;
    out.write_json("oracle.json", &doc)?;
    Ok(RunOutput { json: doc, files: out.files })
}

/// Machine-readable error document.
pub fn error_json(err: &Error) -> Value {
    json!({
        "version": VERSION,
        "error": {
            "kind": err.kind(),
            "message": err.to_string(),
            "exit_code": err.exit_code(),
        }
    })
}

/// Entry point used by the binary. Returns the process exit status.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(std::io::stdout().lock(), "{e}");
                return 0;
            }
            return report_error(&Error::Usage(e.to_string().trim_end().to_string()));
        }
    };
    let outcome = from_cli(cli).and_then(|cfg| run(&cfg));
    match outcome {
        Ok(output) => {
            let text = serde_json::to_string_pretty(&output.json).unwrap_or_default();
            // a closed pipe on stdout is not a failure; the artifacts are on disk
            let _ = writeln!(std::io::stdout().lock(), "{text}");
            0
        }
        Err(e) => report_error(&e),
    }
}

fn report_error(err: &Error) -> i32 {
    let text = serde_json::to_string_pretty(&error_json(err)).unwrap_or_default();
    let _ = writeln!(std::io::stderr().lock(), "{text}");
    err.exit_code()
}
