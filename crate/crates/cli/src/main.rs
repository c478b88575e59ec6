use std::path::PathBuf;
use std::process::ExitCode;

use cgevo::complexity::Weighting;
use cgevo::evolution::MinStability;
use cgevo::graphlets::{MotifCriterion, SamplingPolicy};
use cgevo::pipeline::{self, RunConfig, RunOutcome, DEFAULT_SEED};
use cgevo::rules::{RuleThresholds, TransactionScheme};
use cgevo::synth::{self, SynthParams};
use cgevo::{graph_stats, Error};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "cgevo",
    version,
    about = "Call graph evolution analytics over a version series"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Mine stable call graph evolution rules.
    MineRules {
        #[command(flatten)]
        shared: Shared,
        #[command(flatten)]
        rules: RuleArgs,
    },
    /// Census graphlets per version and select motifs.
    MineSubgraphs {
        #[command(flatten)]
        shared: Shared,
        #[command(flatten)]
        graphlets: GraphletArgs,
        #[command(flatten)]
        motifs: MotifArgs,
    },
    /// Per-version graphlet complexity and its series aggregate.
    Complexity {
        #[command(flatten)]
        shared: Shared,
        #[command(flatten)]
        graphlets: GraphletArgs,
        /// Weight cyclomatic numbers by relative frequency or by raw count.
        #[arg(long, value_enum, default_value_t = WeightArg::Relative)]
        weights: WeightArg,
    },
    /// Generate a synthetic version series.
    Synth {
        #[arg(long, default_value_t = 600)]
        nodes: usize,
        #[arg(long, default_value_t = 9)]
        versions: usize,
        /// Fraction of edges edited between versions, in [0, 1).
        #[arg(long, default_value_t = 0.05)]
        churn: f64,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Dump the graphlet class catalog.
    Catalog {
        #[arg(long, value_delimiter = ',', default_value = "2,3,4")]
        sizes: Vec<usize>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct Shared {
    /// JSON manifest listing the versions in chronological order.
    #[arg(long)]
    manifest: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Worker threads (default: logical CPU count).
    #[arg(long, env = "CGE_JOBS")]
    jobs: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Drop malformed lines and dangling edges instead of failing.
    #[arg(long)]
    lenient: bool,
}

#[derive(Args)]
struct RuleArgs {
    #[arg(long, default_value_t = 0.4)]
    min_sup: f64,
    #[arg(long, default_value_t = 0.8)]
    min_conf: f64,
    /// Minimum number of versions a rule must be interesting in.
    #[arg(long, conflicts_with = "min_stab_frac")]
    min_stab_count: Option<usize>,
    /// Minimum fraction of versions a rule must be interesting in (default 0.5).
    #[arg(long)]
    min_stab_frac: Option<f64>,
    #[arg(long, value_enum, default_value_t = SchemeArg::Caller)]
    scheme: SchemeArg,
    #[arg(long, default_value_t = 4)]
    max_itemset: usize,
}

#[derive(Args)]
struct GraphletArgs {
    /// Graphlet sizes, from 2 to 4.
    #[arg(long, value_delimiter = ',', default_value = "3,4")]
    sizes: Vec<usize>,
    /// Sample graphs with more edges than this instead of a full census.
    #[arg(long)]
    sample_above_edges: Option<usize>,
    /// Per-level keep probability when sampling.
    #[arg(long, default_value_t = 0.5)]
    sample_probability: f64,
}

#[derive(Args)]
struct MotifArgs {
    /// Minimum mean relative frequency in percent.
    #[arg(long, default_value_t = 10.0)]
    motif_threshold: f64,
    /// Also require this z-score against a degree-preserving null model.
    #[arg(long)]
    z_min: Option<f64>,
    #[arg(long, default_value_t = 100)]
    null_samples: usize,
    #[arg(long, default_value_t = 3)]
    swaps_per_edge: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Caller,
    Module,
}

#[derive(Clone, Copy, ValueEnum)]
enum WeightArg {
    Relative,
    Absolute,
}

fn base_config(shared: Shared) -> RunConfig {
    let mut c = RunConfig::new(shared.manifest, shared.out);
    c.jobs = shared.jobs;
    c.seed = shared.seed;
    c.lenient = shared.lenient;
    c
}

fn sampling(args: &GraphletArgs) -> SamplingPolicy {
    SamplingPolicy {
        max_exact_edges: args.sample_above_edges,
        keep_probability: args.sample_probability,
        seed: 0,
    }
}

fn report(outcome: RunOutcome) {
    for w in &outcome.warnings {
        eprintln!("warning: {w}");
    }
    for f in &outcome.files {
        println!("{}", f.display());
    }
}

fn run(command: Command) -> Result<(), Error> {
    match command {
        Command::MineRules { shared, rules } => {
            let mut c = base_config(shared);
            c.rules = RuleThresholds {
                min_sup: rules.min_sup,
                min_conf: rules.min_conf,
                max_itemset: rules.max_itemset,
                scheme: match rules.scheme {
                    SchemeArg::Caller => TransactionScheme::CallerNeighborhood,
                    SchemeArg::Module => TransactionScheme::ModuleScoped,
                },
            };
            c.min_stab = match (rules.min_stab_count, rules.min_stab_frac) {
                (Some(n), _) => MinStability::Count(n),
                (None, Some(f)) => MinStability::Fraction(f),
                (None, None) => MinStability::Fraction(0.5),
            };
            report(pipeline::cmd_mine_rules(&c)?);
        }
        Command::MineSubgraphs {
            shared,
            graphlets,
            motifs,
        } => {
            let mut c = base_config(shared);
            c.sizes = graphlets.sizes.clone();
            c.sampling = sampling(&graphlets);
            c.motif = MotifCriterion {
                min_mean_freq_percent: motifs.motif_threshold,
                z_min: motifs.z_min,
                null_samples: motifs.null_samples,
                swaps_per_edge: motifs.swaps_per_edge,
            };
            report(pipeline::cmd_mine_subgraphs(&c)?);
        }
        Command::Complexity {
            shared,
            graphlets,
            weights,
        } => {
            let mut c = base_config(shared);
            c.sizes = graphlets.sizes.clone();
            c.sampling = sampling(&graphlets);
            c.weighting = match weights {
                WeightArg::Relative => Weighting::Relative,
                WeightArg::Absolute => Weighting::AbsoluteCount,
            };
            report(pipeline::cmd_complexity(&c)?);
        }
        Command::Synth {
            nodes,
            versions,
            churn,
            seed,
            out,
        } => {
            let series = synth::generate(&SynthParams {
                nodes,
                versions,
                churn,
                seed,
            })?;
            let manifest = synth::write_series(&series, &out)?;
            for g in series.graphs() {
                let s = graph_stats(g);
                eprintln!(
                    "{}: {} procedures, {} call pairs, {:.3} average neighbours",
                    g.version_label(),
                    s.procedure_count,
                    s.edge_count,
                    s.avg_neighbours
                );
            }
            println!("{}", manifest.display());
        }
        Command::Catalog { sizes, out } => report(pipeline::cmd_catalog(&sizes, &out)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match std::panic::catch_unwind(|| run(cli.command)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            let code = e.exit_code() as u8;
            let e = anyhow::Error::new(e).context("cgevo failed");
            eprintln!("error: {e:#}");
            ExitCode::from(code)
        }
        Err(_) => ExitCode::from(2),
    }
}
