use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use trajsan_core::datagen::{generate, SynthConfig};
use trajsan_core::dp::{PrivacyParams, RandomSource};
use trajsan_core::inference::check_consistency;
use trajsan_core::release::{release_stats, sanitize_with, Variant};
use trajsan_core::tree::TreeBuilder;
use trajsan_core::utility::{
    evaluate_workload, fsp_metrics, generate_workload, mine_top_k, sanity_bound, CountIndex, DEFAULT_SANITY_FRACTION,
};
use trajsan_core::{LocationUniverse, TrajectoryDb};

use crate::error::{CliError, Result};
use crate::io::{load_db, load_db_derived, load_db_into, load_universe, write_db, write_universe, UnknownTokens};
use crate::report::{emit, CountRow, FspRow, LengthRow};

pub const SEED_ENV: &str = "TRAJSAN_SEED";

#[derive(Debug, Parser)]
#[command(name = "trajsan", version, about = "Differentially private release of trajectory data")]
pub struct Cli {
    /// Worker threads for tree building and query evaluation. Output does
    /// not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a noisy prefix tree and write a sanitized release.
    Sanitize(SanitizeArgs),
    /// Average relative error of random count queries, raw vs sanitized.
    EvalCount(EvalCountArgs),
    /// Overlap of top-k sequential patterns, raw vs sanitized.
    EvalFsp(EvalFspArgs),
    /// Generate a synthetic corpus.
    Gen(GenArgs),
    /// Length histogram of a trajectory file.
    Stats(StatsArgs),
}

#[derive(Debug, Args)]
pub struct SanitizeArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// Total privacy budget ε.
    #[arg(long, allow_negative_numbers = true)]
    pub epsilon: f64,
    /// Tree height h; longer trajectories are truncated.
    #[arg(long, default_value_t = 12)]
    pub height: u32,
    #[arg(long, env = SEED_ENV, default_value_t = 0)]
    pub seed: u64,
    /// Public location universe, one token per line.
    #[arg(long)]
    pub universe: Option<PathBuf>,
    #[arg(long, default_value = "full")]
    pub variant: Variant,
    /// θ = theta_mult·√2/ε̄.
    #[arg(long = "theta-mult", default_value_t = 2.0, allow_negative_numbers = true)]
    pub theta_mult: f64,
    /// Also expand nodes created from empty candidates.
    #[arg(long)]
    pub expand_empty: bool,
    /// Write the noisy tree as an indented outline.
    #[arg(long)]
    pub dump_tree: Option<PathBuf>,
}

/// Tags copied into report rows so that sweeps can share one CSV.
#[derive(Debug, Args)]
pub struct ReportTags {
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub variant: Option<Variant>,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Append rows to an existing output file.
    #[arg(long)]
    pub append: bool,
}

#[derive(Debug, Args)]
pub struct EvalCountArgs {
    #[arg(long)]
    pub raw: PathBuf,
    #[arg(long)]
    pub sanitized: PathBuf,
    #[arg(long)]
    pub universe: Option<PathBuf>,
    /// Height used for sanitization; sets the query length bounds.
    #[arg(long)]
    pub height: u32,
    #[arg(long, default_value_t = 10_000)]
    pub queries_per_subset: usize,
    /// Sanity bound as a fraction of the raw |D|.
    #[arg(long, default_value_t = DEFAULT_SANITY_FRACTION)]
    pub sanity_fraction: f64,
    #[arg(long, env = SEED_ENV, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub tags: ReportTags,
}

#[derive(Debug, Args)]
pub struct EvalFspArgs {
    #[arg(long)]
    pub raw: PathBuf,
    #[arg(long)]
    pub sanitized: PathBuf,
    #[arg(long)]
    pub universe: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "50,100,150,200,250")]
    pub topk: Vec<usize>,
    /// Longest pattern to mine; unbounded by default.
    #[arg(long)]
    pub max_pattern_len: Option<usize>,
    #[arg(long)]
    pub height: Option<u32>,
    #[command(flatten)]
    pub tags: ReportTags,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long)]
    pub output: PathBuf,
    /// Also write the universe L1..Ln here.
    #[arg(long)]
    pub universe_out: Option<PathBuf>,
    /// TOML file with any of the fields below; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub universe_size: Option<usize>,
    #[arg(long)]
    pub records: Option<usize>,
    #[arg(long)]
    pub avg_len: Option<f64>,
    #[arg(long)]
    pub max_len: Option<usize>,
    #[arg(long)]
    pub planted_routes: Option<usize>,
    #[arg(long)]
    pub route_len: Option<usize>,
    #[arg(long)]
    pub planted_fraction: Option<f64>,
    #[arg(long)]
    pub route_skew: Option<f64>,
    #[arg(long)]
    pub zipf_skew: Option<f64>,
    #[arg(long, env = SEED_ENV)]
    pub seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenFile {
    pub universe_size: Option<usize>,
    pub records: Option<usize>,
    pub avg_len: Option<f64>,
    pub max_len: Option<usize>,
    pub planted_routes: Option<usize>,
    pub route_len: Option<usize>,
    pub planted_fraction: Option<f64>,
    pub route_skew: Option<f64>,
    pub zipf_skew: Option<f64>,
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub universe: Option<PathBuf>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.threads {
        None => dispatch(cli.command),
        Some(0) => Err(CliError::Param("--threads must be at least 1".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Param(format!("thread pool: {e}")))?;
            pool.install(|| dispatch(cli.command))
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    let stdout = std::io::stdout();
    let out = &mut stdout.lock();
    match command {
        Command::Sanitize(a) => sanitize(&a, out),
        Command::EvalCount(a) => eval_count(&a),
        Command::EvalFsp(a) => eval_fsp(&a),
        Command::Gen(a) => gen(&a, out),
        Command::Stats(a) => stats(&a, out),
    }
}

fn stdout_err(e: std::io::Error) -> CliError {
    CliError::io("<stdout>", e)
}

pub fn sanitize<W: Write>(args: &SanitizeArgs, out: &mut W) -> Result<()> {
    let started = Instant::now();
    let params = PrivacyParams::with_theta_multiplier(args.epsilon, args.height, args.theta_mult)?;
    let (db, universe) = load_db(&args.input, args.universe.as_deref())?;
    let loaded = Instant::now();

    let builder = TreeBuilder::new(params).expand_empty(args.expand_empty);
    let sanitized = sanitize_with(&builder, &db, universe.len(), &RandomSource::new(args.seed));
    let release = sanitized.release(args.variant);
    let built = Instant::now();

    let consistency = check_consistency(&sanitized.tree);
    if !consistency.sum_constraint_holds(1e-9) {
        log::warn!(
            "children exceed their parent by up to {:.3e} after inference",
            consistency.max_children_excess
        );
    }

    write_db(&release, &universe, &args.output)?;
    if let Some(path) = &args.dump_tree {
        let mut outline = String::new();
        sanitized
            .tree
            .write_outline(&universe, &mut outline)
            .expect("writing to a String");
        std::fs::write(path, outline).map_err(|e| CliError::io(path, e))?;
    }

    let tree = sanitized.tree.stats();
    let ledger = sanitized.tree.ledger().expect("noisy trees carry a ledger");
    let m = &mut *out;
    (|| -> std::io::Result<()> {
        writeln!(m, "input: {}", args.input.display())?;
        writeln!(m, "output: {}", args.output.display())?;
        writeln!(m, "variant: {}", args.variant.name())?;
        writeln!(m, "epsilon: {}", params.epsilon())?;
        writeln!(m, "height: {}", params.height())?;
        writeln!(m, "per_level_epsilon: {}", params.per_level())?;
        writeln!(m, "theta: {}", params.threshold())?;
        writeln!(m, "seed: {}", args.seed)?;
        writeln!(
            m,
            "universe: {} ({})",
            universe.len(),
            if args.universe.is_some() { "file" } else { "derived from input" }
        )?;
        writeln!(m, "records_in: {}", db.len())?;
        writeln!(m, "records_out: {}", release.len())?;
        writeln!(m, "tree_nodes: {}", tree.nodes)?;
        writeln!(m, "tree_leaves: {}", tree.leaves)?;
        writeln!(m, "empty_born_nodes: {}", tree.empty_born)?;
        writeln!(m, "expand_empty: {}", args.expand_empty)?;
        writeln!(m, "load_seconds: {:.3}", (loaded - started).as_secs_f64())?;
        writeln!(m, "sanitize_seconds: {:.3}", (built - loaded).as_secs_f64())?;
        writeln!(m, "total_seconds: {:.3}", started.elapsed().as_secs_f64())?;
        for c in ledger.charges() {
            writeln!(m, "budget level {}: epsilon {} over {} partitions", c.level, c.epsilon, c.partitions)?;
        }
        writeln!(m, "budget_spent: {} of {}", ledger.spent(), ledger.total())?;
        Ok(())
    })()
    .map_err(stdout_err)
}

/// Raw and sanitized databases over one universe. A given universe file is
/// strict for both; otherwise it comes from the raw file and grows with any
/// tokens that only the sanitized file uses.
fn load_pair(raw: &Path, sanitized: &Path, universe: Option<&Path>) -> Result<(TrajectoryDb, TrajectoryDb, usize)> {
    let (mut u, mode) = match universe {
        Some(p) => (load_universe(p)?, UnknownTokens::Reject),
        None => (LocationUniverse::new(), UnknownTokens::Extend),
    };
    let raw = load_db_into(raw, &mut u, mode)?;
    let universe_size = u.len();
    let sanitized = load_db_into(sanitized, &mut u, mode)?;
    Ok((raw, sanitized, universe_size))
}

pub fn eval_count(args: &EvalCountArgs) -> Result<()> {
    if !(args.sanity_fraction >= 0.0 && args.sanity_fraction.is_finite()) {
        return Err(CliError::Param("--sanity-fraction must be finite and ≥ 0".into()));
    }
    let (raw, sanitized, universe_size) = load_pair(&args.raw, &args.sanitized, args.universe.as_deref())?;
    let workload = generate_workload(universe_size, args.height, args.queries_per_subset, args.seed)?;
    let sanity = sanity_bound(raw.len(), args.sanity_fraction);
    let errors = evaluate_workload(&CountIndex::new(&raw), &CountIndex::new(&sanitized), &workload, sanity);
    let rows: Vec<CountRow> = errors
        .into_iter()
        .map(|s| CountRow {
            subset: s.subset,
            max_len: s.max_len,
            queries: s.queries,
            epsilon: args.tags.epsilon,
            height: args.height,
            variant: args.tags.variant.map(|v| v.name().to_string()),
            sanity,
            avg_relative_error: s.avg_relative_error,
        })
        .collect();
    emit(&rows, args.tags.output.as_deref(), args.tags.append)
}

pub fn eval_fsp(args: &EvalFspArgs) -> Result<()> {
    let Some(&kmax) = args.topk.iter().max() else {
        return Err(CliError::Param("--topk needs at least one value".into()));
    };
    if args.topk.contains(&0) {
        return Err(CliError::Param("--topk values must be at least 1".into()));
    }
    let (raw, sanitized, _) = load_pair(&args.raw, &args.sanitized, args.universe.as_deref())?;
    // rankings are total, so every smaller k is a prefix of the kmax list
    let truth = mine_top_k(&raw, kmax, args.max_pattern_len)?;
    let mined = mine_top_k(&sanitized, kmax, args.max_pattern_len)?;
    let rows: Vec<FspRow> = args
        .topk
        .iter()
        .map(|&k| {
            let t = &truth.patterns[..k.min(truth.patterns.len())];
            let s = &mined.patterns[..k.min(mined.patterns.len())];
            let m = fsp_metrics(t, s, k);
            FspRow {
                k,
                epsilon: args.tags.epsilon,
                height: args.height,
                variant: args.tags.variant.map(|v| v.name().to_string()),
                true_positives: m.true_positives,
                false_positives: m.false_positives,
                false_drops: m.false_drops,
                short: t.len() < k || s.len() < k,
            }
        })
        .collect();
    if rows.iter().any(|r| r.short) {
        log::warn!("fewer than k distinct patterns exist for some k; those rows are marked short");
    }
    emit(&rows, args.tags.output.as_deref(), args.tags.append)
}

fn read_gen_file(path: &Path) -> Result<GenFile> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    toml::from_str(&text).map_err(|e| CliError::Format {
        path: path.to_path_buf(),
        line: 0,
        reason: e.to_string(),
    })
}

pub fn gen_config(args: &GenArgs) -> Result<SynthConfig> {
    let file = match &args.config {
        Some(p) => read_gen_file(p)?,
        None => GenFile::default(),
    };
    let d = SynthConfig::default();
    Ok(SynthConfig {
        universe_size: args.universe_size.or(file.universe_size).unwrap_or(d.universe_size),
        records: args.records.or(file.records).unwrap_or(d.records),
        avg_len: args.avg_len.or(file.avg_len).unwrap_or(d.avg_len),
        max_len: args.max_len.or(file.max_len).unwrap_or(d.max_len),
        planted_routes: args.planted_routes.or(file.planted_routes).unwrap_or(d.planted_routes),
        route_len: args.route_len.or(file.route_len).unwrap_or(d.route_len),
        planted_fraction: args.planted_fraction.or(file.planted_fraction).unwrap_or(d.planted_fraction),
        route_skew: args.route_skew.or(file.route_skew).unwrap_or(d.route_skew),
        zipf_skew: args.zipf_skew.or(file.zipf_skew).unwrap_or(d.zipf_skew),
        seed: args.seed.or(file.seed).unwrap_or(d.seed),
    })
}

pub fn gen<W: Write>(args: &GenArgs, out: &mut W) -> Result<()> {
    let config = gen_config(args)?;
    let corpus = generate(&config)?;
    let universe = LocationUniverse::numbered(config.universe_size);
    write_db(&corpus.db, &universe, &args.output)?;
    if let Some(p) = &args.universe_out {
        write_universe(&universe, p)?;
    }
    (|| -> std::io::Result<()> {
        writeln!(out, "records: {}", corpus.db.len())?;
        writeln!(out, "universe: {}", universe.len())?;
        writeln!(out, "seed: {}", config.seed)?;
        for route in &corpus.routes {
            let tokens: Vec<&str> = route.iter().filter_map(|l| universe.token(*l)).collect();
            writeln!(out, "route: {}", tokens.join(" "))?;
        }
        Ok(())
    })()
    .map_err(stdout_err)
}

pub fn stats<W: Write>(args: &StatsArgs, out: &mut W) -> Result<()> {
    let (db, _) = match &args.universe {
        Some(u) => load_db(&args.input, Some(u))?,
        None => load_db_derived(&args.input)?,
    };
    let stats = release_stats(&db);
    let rows: Vec<LengthRow> = stats
        .lengths
        .iter()
        .map(|(&length, &records)| LengthRow { length, records })
        .collect();
    emit(&rows, args.output.as_deref(), false)?;
    if args.output.is_some() {
        writeln!(out, "records: {}", stats.records).map_err(stdout_err)?;
        writeln!(out, "distinct_locations: {}", stats.distinct_locations).map_err(stdout_err)?;
    }
    Ok(())
}
