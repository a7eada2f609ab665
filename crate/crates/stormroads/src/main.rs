//! Command-line surface for the stormroads pipeline.
//!
//! Every stage is a subcommand; `run` executes them all (optionally
//! resuming with `--from`). Exit codes: 0 success, 1 fatal data error,
//! 2 config error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use stormroads::pipeline::{run_pipeline, write_grid, PipelineConfig, Stage};
use stormroads::testkit::scenario::{gen_scenario, write_bundle, ScenarioParams};
use stormroads::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "stormroads", version)]
#[command(about = "Geotagged-post sentiment mapped onto road-network centrality")]
struct Cli {
    /// Configuration file (flat `key = value`); flags below override it
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Directory for stage outputs and the run manifest
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    out_dir: PathBuf,

    /// RNG seed (alias for the rng_seed config key)
    #[arg(long, global = true, value_name = "INT")]
    seed: Option<u64>,

    /// Verbose logging (debug level)
    #[arg(long, global = true)]
    verbose: bool,

    #[command(flatten)]
    overrides: Overrides,

    #[command(subcommand)]
    command: Command,
}

/// One flag per config key. Values are parsed by the config layer so a
/// bad value reports the same way whether it came from file or flag.
#[derive(Args, Debug)]
struct Overrides {
    /// Posts file (.ndjson or .csv)
    #[arg(long, global = true, value_name = "PATH")]
    posts: Option<String>,
    /// Study region polygon (GeoJSON)
    #[arg(long, global = true, value_name = "PATH")]
    region: Option<String>,
    /// Road nodes CSV
    #[arg(long, global = true, value_name = "PATH")]
    nodes: Option<String>,
    /// Road edges file (.geojson or WKT .csv)
    #[arg(long, global = true, value_name = "PATH")]
    edges: Option<String>,
    /// Stopword list (one word per line; bundled list if unset)
    #[arg(long, global = true, value_name = "PATH")]
    stopwords: Option<String>,
    /// Lemma table (surface<TAB>lemma; bundled table if unset)
    #[arg(long, global = true, value_name = "PATH")]
    lemmas: Option<String>,
    /// Relevance keyword list (bundled list if unset)
    #[arg(long, global = true, value_name = "PATH")]
    relevance_lexicon: Option<String>,
    /// Token valence TSV (bundled lexicon if unset)
    #[arg(long, global = true, value_name = "PATH")]
    sentiment_lexicon: Option<String>,
    /// Booster/dampener TSV (bundled list if unset)
    #[arg(long, global = true, value_name = "PATH")]
    boosters: Option<String>,
    /// Negator word list (bundled list if unset)
    #[arg(long, global = true, value_name = "PATH")]
    negators: Option<String>,
    /// Coverage-circle radius in miles
    #[arg(long, global = true, value_name = "MILES")]
    radius_miles: Option<String>,
    /// Coverage-grid spacing in miles
    #[arg(long, global = true, value_name = "MILES")]
    spacing_miles: Option<String>,
    /// Natural-breaks class count
    #[arg(long, global = true, value_name = "K")]
    jenks_k: Option<String>,
    /// Words kept in the frequency table
    #[arg(long, global = true, value_name = "N")]
    topk_words: Option<String>,
    /// Edges compared in the centrality rank shift
    #[arg(long, global = true, value_name = "N")]
    topk_edges: Option<String>,
    /// Positive floor added to edge traversal costs
    #[arg(long, global = true, value_name = "EPS")]
    bc_epsilon: Option<String>,
    /// Edge sentiment rule: length or midpoint
    #[arg(long, global = true, value_name = "RULE")]
    join_rule: Option<String>,
    /// Study window start (inclusive, RFC 3339 UTC)
    #[arg(long, global = true, value_name = "TS")]
    window_start: Option<String>,
    /// Study window end (exclusive, RFC 3339 UTC)
    #[arg(long, global = true, value_name = "TS")]
    window_end: Option<String>,
    /// RNG seed config key
    #[arg(long, global = true, value_name = "INT")]
    rng_seed: Option<String>,
    /// Divide centrality scores by n(n-1)/2
    #[arg(long, global = true, value_name = "BOOL")]
    normalize_bc: Option<String>,
}

impl Overrides {
    fn pairs(&self) -> Vec<(String, String)> {
        let fields: [(&str, &Option<String>); 21] = [
            ("posts", &self.posts),
            ("region", &self.region),
            ("nodes", &self.nodes),
            ("edges", &self.edges),
            ("stopwords", &self.stopwords),
            ("lemmas", &self.lemmas),
            ("relevance_lexicon", &self.relevance_lexicon),
            ("sentiment_lexicon", &self.sentiment_lexicon),
            ("boosters", &self.boosters),
            ("negators", &self.negators),
            ("radius_miles", &self.radius_miles),
            ("spacing_miles", &self.spacing_miles),
            ("jenks_k", &self.jenks_k),
            ("topk_words", &self.topk_words),
            ("topk_edges", &self.topk_edges),
            ("bc_epsilon", &self.bc_epsilon),
            ("join_rule", &self.join_rule),
            ("window_start", &self.window_start),
            ("window_end", &self.window_end),
            ("rng_seed", &self.rng_seed),
            ("normalize_bc", &self.normalize_bc),
        ];
        fields
            .into_iter()
            .filter_map(|(k, v)| v.as_ref().map(|v| (k.to_string(), v.clone())))
            .collect()
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write the minimum-circle coverage grid for the study region
    PlanGrid,
    /// Read, filter, deduplicate, and window the raw posts
    Ingest,
    /// Tokenize posts and keep the crisis-relevant ones
    Relevance,
    /// Score relevant posts with the rule-based sentiment model
    Sentiment,
    /// Build sentiment-tagged proximity polygons over the region
    Tessellate,
    /// Transfer polygon sentiment onto road edges
    Join,
    /// Classify edge sentiments into natural-breaks classes
    Classify,
    /// Edge betweenness centrality, unweighted and sentiment-weighted
    Centrality,
    /// Export the per-edge metrics layer
    Report,
    /// Run every stage in order
    Run {
        /// First stage to execute; earlier artifacts are reused
        #[arg(long, value_name = "STAGE")]
        from: Option<String>,
    },
    /// Check the configuration and report problems without running
    Validate,
    /// Generate a synthetic input bundle usable directly by `run`
    Simulate(SimulateArgs),
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Number of posts to generate
    #[arg(long, value_name = "N", default_value_t = 2000)]
    n_posts: usize,
    /// Standard deviation of the score noise
    #[arg(long, value_name = "SD", default_value_t = 0.05)]
    noise_sd: f64,
    /// Peak hazard intensity at the field center
    #[arg(long, value_name = "I", default_value_t = 1.0)]
    peak: f64,
    /// Hazard decay length in meters
    #[arg(long, value_name = "M", default_value_t = 2000.0)]
    decay_m: f64,
    /// Field center longitude
    #[arg(long, value_name = "LON", default_value_t = -97.5)]
    center_lon: f64,
    /// Field center latitude
    #[arg(long, value_name = "LAT", default_value_t = 35.47)]
    center_lat: f64,
    /// Grid nodes per side (min 8)
    #[arg(long, value_name = "N", default_value_t = 16)]
    grid_n: usize,
    /// Grid spacing in meters
    #[arg(long, value_name = "M", default_value_t = 700.0)]
    spacing_m: f64,
    /// Share of posts clustered near the field center
    #[arg(long, value_name = "SHARE", default_value_t = 0.4)]
    cluster_share: f64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(
        env_logger::Env::default().default_filter_or(if cli.verbose { "debug" } else { "info" }),
    )
    .format_timestamp(None)
    .init();

    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::from_file(path)?,
        None => PipelineConfig::default(),
    };
    cfg.apply_overrides(&cli.overrides.pairs())?;
    if let Some(seed) = cli.seed {
        cfg.rng_seed = seed;
    }
    Ok(cfg)
}

fn dispatch(cli: &Cli) -> Result<()> {
    let single = |stage: Stage| -> Result<()> {
        let cfg = load_config(cli)?;
        run_pipeline(&cfg, &cli.out_dir, stage, stage)?;
        Ok(())
    };
    match &cli.command {
        Command::PlanGrid => {
            let cfg = load_config(cli)?;
            let region = cfg
                .region
                .as_deref()
                .ok_or_else(|| Error::config("plan-grid needs a region file"))?;
            let grid = write_grid(region, cfg.radius_miles, cfg.spacing_miles, &cli.out_dir)?;
            println!(
                "{} centers at {} mi spacing, {} mi radius",
                grid.centers.len(),
                grid.spacing_miles,
                grid.radius_miles
            );
            Ok(())
        }
        Command::Ingest => single(Stage::Ingest),
        Command::Relevance => single(Stage::Relevance),
        Command::Sentiment => single(Stage::Sentiment),
        Command::Tessellate => single(Stage::Tessellate),
        Command::Join => single(Stage::Join),
        Command::Classify => single(Stage::Classify),
        Command::Centrality => single(Stage::Centrality),
        Command::Report => single(Stage::Report),
        Command::Run { from } => {
            let cfg = load_config(cli)?;
            let from = match from {
                Some(s) => {
                    Stage::parse(s).ok_or_else(|| Error::config(format!("unknown stage {s:?}")))?
                }
                None => Stage::Ingest,
            };
            let manifest = run_pipeline(&cfg, &cli.out_dir, from, Stage::Report)?;
            println!(
                "{}: {} stage(s) in {}",
                manifest.status,
                manifest.stages.len(),
                cli.out_dir.display()
            );
            Ok(())
        }
        Command::Validate => {
            let cfg = load_config(cli)?;
            let problems = cfg.validate();
            if problems.is_empty() {
                println!("config ok");
                Ok(())
            } else {
                for p in &problems {
                    println!("{p}");
                }
                Err(Error::config(format!("{} problem(s)", problems.len())))
            }
        }
        Command::Simulate(args) => {
            let params = ScenarioParams {
                n_posts: args.n_posts,
                noise_sd: args.noise_sd,
                peak: args.peak,
                decay_m: args.decay_m,
                center_lon: args.center_lon,
                center_lat: args.center_lat,
                grid_n: args.grid_n,
                spacing_m: args.spacing_m,
                cluster_share: args.cluster_share,
                ..ScenarioParams::default()
            };
            let scenario = gen_scenario(cli.seed.unwrap_or(0), &params)?;
            write_bundle(&scenario, &cli.out_dir)?;
            println!(
                "bundle with {} posts, {} nodes, {} edges in {}",
                scenario.posts.len(),
                scenario.nodes.len(),
                scenario.edges.len(),
                cli.out_dir.display()
            );
            Ok(())
        }
    }
}
