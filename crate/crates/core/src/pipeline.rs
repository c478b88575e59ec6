//! End-to-end runs: load a manifest, mine, and write report files.
//!
//! Each command computes all of its outputs in memory, then writes them into
//! the output directory through temporary files. If any write fails, the files
//! already written by that command are removed again.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::complexity::{ecg_cx, ComplexityReport, Weighting};
use crate::evolution::{
    aggregate_cgers, build_lattice, build_transitivity_graph, count_summary, filter_stable, lattice_to_dot,
    transitivity_to_dot, CountSummary, EvolutionRule, Lattice, MinStability, StableRuleSet, TransitivityGraph,
};
use crate::graphlets::{
    catalog, detect_motifs, frequency_series, FrequencyReport, MotifCriterion, MotifReport, SamplingPolicy,
};
use crate::ingest::{load_series, Manifest, ParseOptions};
use crate::model::VersionSeries;
use crate::report;
use crate::rules::{mine_version, CallGraphRule, RuleThresholds};
use crate::Error;

pub const DEFAULT_SEED: u64 = 0x00C0_FFEE;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub manifest: PathBuf,
    pub out_dir: PathBuf,
    /// Worker threads; `None` uses the global pool.
    pub jobs: Option<usize>,
    pub seed: u64,
    pub lenient: bool,
    pub rules: RuleThresholds,
    pub min_stab: MinStability,
    pub sizes: Vec<usize>,
    pub motif: MotifCriterion,
    pub sampling: SamplingPolicy,
    pub weighting: Weighting,
}

impl RunConfig {
    pub fn new(manifest: impl Into<PathBuf>, out_dir: impl Into<PathBuf>) -> Self {
        RunConfig {
            manifest: manifest.into(),
            out_dir: out_dir.into(),
            jobs: None,
            seed: DEFAULT_SEED,
            lenient: false,
            rules: RuleThresholds::default(),
            min_stab: MinStability::Fraction(0.5),
            sizes: vec![3, 4],
            motif: MotifCriterion::default(),
            sampling: SamplingPolicy::exact(),
            weighting: Weighting::Relative,
        }
    }
}

/// Files written plus human-readable warnings.
#[derive(Debug, Clone, Default)]
pub struct RunOutcome {
    pub files: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

/// Run `f` on a pool of `jobs` threads, or inline on the global pool.
pub fn with_jobs<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, Error> {
    match jobs {
        None => Ok(f()),
        Some(0) => Err(Error::Config("--jobs must be at least 1".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Internal(e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

fn load(config: &RunConfig, warnings: &mut Vec<String>) -> Result<VersionSeries, Error> {
    let manifest = Manifest::from_path(&config.manifest)?;
    let loaded = load_series(
        &manifest,
        ParseOptions {
            lenient: config.lenient,
        },
    )?;
    for (version, dropped) in &loaded.dropped {
        if dropped.total() > 0 {
            warnings.push(format!(
                "version {version}: dropped {} malformed line(s), {} edge(s) with unknown endpoints, {} conflicting declaration(s)",
                dropped.malformed_lines, dropped.unknown_endpoint_edges, dropped.conflicting_declarations
            ));
        }
    }
    Ok(loaded.series)
}

/// Everything derived from rule mining over one series.
#[derive(Debug, Clone)]
pub struct RuleRun {
    pub per_version: Vec<(String, Vec<CallGraphRule>)>,
    pub cgers: Vec<EvolutionRule>,
    pub stable: StableRuleSet,
    pub summary: CountSummary,
    pub transitivity: TransitivityGraph,
    pub lattice: Lattice,
    pub empty_versions: Vec<String>,
}

pub fn mine_rules(
    series: &VersionSeries,
    thresholds: &RuleThresholds,
    min_stab: MinStability,
) -> Result<RuleRun, Error> {
    min_stab.resolve(series.len())?;
    let per_version: Vec<(String, Vec<CallGraphRule>)> = series
        .graphs()
        .par_iter()
        .map(|g| mine_version(g, thresholds).map(|r| (g.version_label().to_string(), r)))
        .collect::<Result<_, _>>()?;
    let empty_versions = series
        .graphs()
        .iter()
        .filter(|g| g.edge_count() == 0)
        .map(|g| g.version_label().to_string())
        .collect();
    let cgers = aggregate_cgers(&per_version);
    let mut stable = filter_stable(&cgers, min_stab, series.len())?;
    stable.thresholds = Some(*thresholds);
    let summary = count_summary(&per_version, &cgers, &stable);
    let o = &summary.overall;
    if !(o.stable <= o.cger_distinct && o.cger_distinct <= o.cgr_total) {
        return Err(Error::Internal(format!("count ordering violated: {o:?}")));
    }
    let transitivity = build_transitivity_graph(&stable);
    let lattice = build_lattice(&stable);
    Ok(RuleRun {
        per_version,
        cgers,
        stable,
        summary,
        transitivity,
        lattice,
        empty_versions,
    })
}

pub fn rule_artifacts(run: &RuleRun) -> Vec<(&'static str, String)> {
    let t = run.stable.thresholds.unwrap_or_default();
    let comments = vec![
        format!(
            "scheme={} min_sup={} min_conf={} max_itemset={} min_stab={:?} resolved_min_stab={}",
            t.scheme, t.min_sup, t.min_conf, t.max_itemset, run.stable.min_stability, run.stable.resolved_min_stability
        ),
        "cgr_total counts interesting rules; cger_distinct distinct rule keys; stable those meeting min_stab".into(),
    ];
    vec![
        ("stable_rules.csv", report::rules_csv(&run.stable.rules)),
        ("evolution_rules.csv", report::rules_csv(&run.cgers)),
        ("rule_counts.csv", report::counts_csv(&run.summary, &comments)),
        ("transitivity.dot", transitivity_to_dot(&run.transitivity)),
        ("lattice.dot", lattice_to_dot(&run.lattice)),
    ]
}

#[derive(Debug, Clone)]
pub struct SubgraphRun {
    pub frequencies: FrequencyReport,
    pub motifs: MotifReport,
}

pub fn mine_subgraphs(
    series: &VersionSeries,
    sizes: &[usize],
    sampling: &SamplingPolicy,
    criterion: &MotifCriterion,
    seed: u64,
) -> Result<SubgraphRun, Error> {
    criterion.validate()?;
    let policy = SamplingPolicy { seed, ..*sampling };
    let frequencies = frequency_series(series, sizes, &policy)?;
    let motifs = detect_motifs(&frequencies, criterion, series, seed)?;
    Ok(SubgraphRun { frequencies, motifs })
}

pub fn subgraph_artifacts(run: &SubgraphRun) -> Result<Vec<(&'static str, String)>, Error> {
    let mut classes = Vec::new();
    for &k in &run.frequencies.sizes {
        classes.extend(catalog(k)?.classes.iter());
    }
    Ok(vec![
        ("graphlet_frequencies.csv", report::frequency_csv(&run.frequencies)),
        ("graphlet_catalog.csv", report::catalog_csv(classes)),
        ("motifs.csv", report::motif_csv(&run.motifs)),
    ])
}

pub fn complexity(
    series: &VersionSeries,
    sizes: &[usize],
    sampling: &SamplingPolicy,
    weighting: Weighting,
    seed: u64,
) -> Result<ComplexityReport, Error> {
    let policy = SamplingPolicy { seed, ..*sampling };
    let freqs = frequency_series(series, sizes, &policy)?;
    Ok(ecg_cx(&freqs, weighting))
}

/// Write `(file name, contents)` pairs atomically into `dir`.
pub fn write_artifacts(dir: &Path, artifacts: &[(&str, String)]) -> Result<Vec<PathBuf>, Error> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| Error::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io(dir))?;
    let mut written: Vec<PathBuf> = Vec::new();
    for (name, contents) in artifacts {
        let path = dir.join(name);
        let tmp = dir.join(format!(".{name}.tmp"));
        let result = fs::write(&tmp, contents)
            .and_then(|_| fs::rename(&tmp, &path))
            .map_err(io(&path));
        if let Err(e) = result {
            let _ = fs::remove_file(&tmp);
            for p in &written {
                let _ = fs::remove_file(p);
            }
            return Err(e);
        }
        written.push(path);
    }
    Ok(written)
}

pub fn cmd_mine_rules(config: &RunConfig) -> Result<RunOutcome, Error> {
    with_jobs(config.jobs, || {
        let mut warnings = Vec::new();
        let series = load(config, &mut warnings)?;
        let run = mine_rules(&series, &config.rules, config.min_stab)?;
        for v in &run.empty_versions {
            warnings.push(format!("version {v}: no call pairs, empty transaction database"));
        }
        let files = write_artifacts(&config.out_dir, &rule_artifacts(&run))?;
        Ok(RunOutcome { files, warnings })
    })?
}

pub fn cmd_mine_subgraphs(config: &RunConfig) -> Result<RunOutcome, Error> {
    with_jobs(config.jobs, || {
        let mut warnings = Vec::new();
        let series = load(config, &mut warnings)?;
        let run = mine_subgraphs(&series, &config.sizes, &config.sampling, &config.motif, config.seed)?;
        for (v, k) in &run.frequencies.degenerate {
            warnings.push(format!("version {v}: no connected {k}-node subgraphs"));
        }
        let files = write_artifacts(&config.out_dir, &subgraph_artifacts(&run)?)?;
        Ok(RunOutcome { files, warnings })
    })?
}

pub fn cmd_complexity(config: &RunConfig) -> Result<RunOutcome, Error> {
    with_jobs(config.jobs, || {
        let mut warnings = Vec::new();
        let series = load(config, &mut warnings)?;
        let report = complexity(&series, &config.sizes, &config.sampling, config.weighting, config.seed)?;
        for (v, c) in report.versions.iter().zip(&report.per_version) {
            if c.degenerate {
                warnings.push(format!(
                    "version {v}: no graphlet occurrences, complexity recorded as 0"
                ));
            }
        }
        let files = write_artifacts(&config.out_dir, &[("complexity.csv", report::complexity_csv(&report))])?;
        Ok(RunOutcome { files, warnings })
    })?
}

/// Write the graphlet catalog for `sizes`.
pub fn cmd_catalog(sizes: &[usize], out_dir: &Path) -> Result<RunOutcome, Error> {
    let mut sizes = sizes.to_vec();
    sizes.sort_unstable();
    sizes.dedup();
    let mut classes = Vec::new();
    for &k in &sizes {
        classes.extend(catalog(k)?.classes.iter());
    }
    let files = write_artifacts(out_dir, &[("graphlet_catalog.csv", report::catalog_csv(classes))])?;
    Ok(RunOutcome {
        files,
        warnings: Vec::new(),
    })
}
