//! Configuration, stage orchestration, run manifests, and file exports.
//!
//! A run is a fixed sequence of stages (ingest → relevance → sentiment →
//! tessellate → join → classify → centrality → report), each of which
//! writes its products as plain files in the output directory before the
//! next begins. Any stage can be rerun with `--from`: stages before the
//! start point are not re-executed and their files are left untouched;
//! whatever in-memory state a later stage needs is reloaded from the
//! nearest persisted artifact (cheap derived structures, like the
//! tessellation, are recomputed deterministically from it).
//!
//! Identical config + inputs produce byte-identical artifacts. The one
//! exception is `manifest.json`, which records wall-clock timings.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::centrality::{
    dense_ranks_desc, edge_bc_unweighted, edge_bc_with_costs, node_strength, normalize_bc,
    rank_shift, weights_to_costs, Graph, RankShift,
};
use crate::data;
use crate::geom::{LocalFrame, Point2};
use crate::ingest::{
    dedup, filter_region, plan_grid, read_posts, CoverageGrid, GeoPost, PostFormat, StudyRegion,
};
use crate::num::{fmt_sig9, round_sig9};
use crate::roadnet::{
    classify_edges, load_network, scale_weights, spatial_join, EdgeSentiment, JoinRule, RoadNetwork,
};
use crate::sentiment::{score_posts, ScoredPost, SentimentLexicon};
use crate::tessellate::{
    classify, jenks_breaks, merge_coincident, tessellate, ThiessenDiagram, MERGE_DISTANCE_M,
};
use crate::textproc::{
    frequency_matrix, is_relevant, parse_lemma_table, parse_word_list, tokenize, RelevanceLexicon,
    TokenizedPost,
};
use crate::{Error, Result};

/// Pipeline stages in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Ingest,
    Relevance,
    Sentiment,
    Tessellate,
    Join,
    Classify,
    Centrality,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 8] = [
        Stage::Ingest,
        Stage::Relevance,
        Stage::Sentiment,
        Stage::Tessellate,
        Stage::Join,
        Stage::Classify,
        Stage::Centrality,
        Stage::Report,
    ];

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_lowercase().as_str() {
            "ingest" => Some(Self::Ingest),
            "relevance" => Some(Self::Relevance),
            "sentiment" => Some(Self::Sentiment),
            "tessellate" => Some(Self::Tessellate),
            "join" => Some(Self::Join),
            "classify" => Some(Self::Classify),
            "centrality" => Some(Self::Centrality),
            "report" => Some(Self::Report),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Ingest => "ingest",
            Self::Relevance => "relevance",
            Self::Sentiment => "sentiment",
            Self::Tessellate => "tessellate",
            Self::Join => "join",
            Self::Classify => "classify",
            Self::Centrality => "centrality",
            Self::Report => "report",
        }
    }
}

/// Full run configuration: input paths, stage parameters, and the seed.
/// Lexicon paths left unset fall back to the bundled data files.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub posts: Option<PathBuf>,
    pub region: Option<PathBuf>,
    pub nodes: Option<PathBuf>,
    pub edges: Option<PathBuf>,
    pub stopwords: Option<PathBuf>,
    pub lemmas: Option<PathBuf>,
    pub relevance_lexicon: Option<PathBuf>,
    pub sentiment_lexicon: Option<PathBuf>,
    pub boosters: Option<PathBuf>,
    pub negators: Option<PathBuf>,
    pub radius_miles: f64,
    pub spacing_miles: f64,
    pub jenks_k: usize,
    pub topk_words: usize,
    pub topk_edges: usize,
    pub bc_epsilon: f64,
    pub join_rule: JoinRule,
    pub window_start: DateTime<Utc>,
    pub window_end: DateTime<Utc>,
    pub rng_seed: u64,
    pub normalize_bc: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            posts: None,
            region: None,
            nodes: None,
            edges: None,
            stopwords: None,
            lemmas: None,
            relevance_lexicon: None,
            sentiment_lexicon: None,
            boosters: None,
            negators: None,
            radius_miles: 25.0,
            spacing_miles: 25.0,
            jenks_k: 10,
            topk_words: 50,
            topk_edges: 20,
            bc_epsilon: 1e-6,
            join_rule: JoinRule::Length,
            window_start: utc(2020, 10, 19),
            window_end: utc(2020, 11, 20),
            rng_seed: 0,
            normalize_bc: false,
        }
    }
}

fn utc(y: i32, m: u32, d: u32) -> DateTime<Utc> {
    use chrono::TimeZone;
    Utc.with_ymd_and_hms(y, m, d, 0, 0, 0).unwrap()
}

impl PipelineConfig {
    /// Reads a flat `key = value` config file (`#` comments). Relative
    /// paths are resolved against the config file's directory.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text =
            fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let base = path.parent().map(Path::to_path_buf);
        let mut cfg = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::config(format!(
                    "{} line {}: expected key = value",
                    path.display(),
                    lineno + 1
                ))
            })?;
            cfg.set(key.trim(), value.trim(), base.as_deref())?;
        }
        Ok(cfg)
    }

    /// Applies CLI-style overrides (already split into key/value pairs,
    /// keys in either kebab or snake case). Paths resolve against the
    /// working directory.
    pub fn apply_overrides(&mut self, pairs: &[(String, String)]) -> Result<()> {
        for (k, v) in pairs {
            self.set(k, v, None)?;
        }
        Ok(())
    }

    fn set(&mut self, key: &str, value: &str, base: Option<&Path>) -> Result<()> {
        let key = key.replace('-', "_");
        let path = |v: &str| -> PathBuf {
            let p = PathBuf::from(v);
            match (p.is_relative(), base) {
                (true, Some(b)) => b.join(p),
                _ => p,
            }
        };
        let bad = |what: &str| Error::config(format!("{key}: expected {what}, got {value:?}"));
        match key.as_str() {
            "posts" => self.posts = Some(path(value)),
            "region" => self.region = Some(path(value)),
            "nodes" => self.nodes = Some(path(value)),
            "edges" => self.edges = Some(path(value)),
            "stopwords" => self.stopwords = Some(path(value)),
            "lemmas" => self.lemmas = Some(path(value)),
            "relevance_lexicon" => self.relevance_lexicon = Some(path(value)),
            "sentiment_lexicon" => self.sentiment_lexicon = Some(path(value)),
            "boosters" => self.boosters = Some(path(value)),
            "negators" => self.negators = Some(path(value)),
            "radius_miles" => self.radius_miles = value.parse().map_err(|_| bad("a number"))?,
            "spacing_miles" => self.spacing_miles = value.parse().map_err(|_| bad("a number"))?,
            "jenks_k" => self.jenks_k = value.parse().map_err(|_| bad("a positive integer"))?,
            "topk_words" => {
                self.topk_words = value.parse().map_err(|_| bad("a positive integer"))?
            }
            "topk_edges" => {
                self.topk_edges = value.parse().map_err(|_| bad("a positive integer"))?
            }
            "bc_epsilon" => self.bc_epsilon = value.parse().map_err(|_| bad("a number"))?,
            "join_rule" => {
                self.join_rule = JoinRule::parse(value).ok_or_else(|| bad("length or midpoint"))?
            }
            "window_start" => {
                self.window_start =
                    parse_utc(value).ok_or_else(|| bad("an ISO-8601 UTC timestamp"))?
            }
            "window_end" => {
                self.window_end =
                    parse_utc(value).ok_or_else(|| bad("an ISO-8601 UTC timestamp"))?
            }
            "rng_seed" => self.rng_seed = value.parse().map_err(|_| bad("an unsigned integer"))?,
            "normalize_bc" => {
                self.normalize_bc = value.parse().map_err(|_| bad("true or false"))?
            }
            _ => return Err(Error::config(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    /// Checks paths, parameter ranges, and the time window. An empty
    /// list means the config is runnable.
    pub fn validate(&self) -> Vec<String> {
        let mut problems = Vec::new();
        let mut need = |key: &str, p: &Option<PathBuf>| match p {
            None => problems.push(format!("{key}: no file configured")),
            Some(p) if !p.exists() => {
                problems.push(format!("{key}: {} does not exist", p.display()))
            }
            _ => {}
        };
        need("posts", &self.posts);
        need("region", &self.region);
        need("nodes", &self.nodes);
        need("edges", &self.edges);
        for (key, p) in [
            ("stopwords", &self.stopwords),
            ("lemmas", &self.lemmas),
            ("relevance_lexicon", &self.relevance_lexicon),
            ("sentiment_lexicon", &self.sentiment_lexicon),
            ("boosters", &self.boosters),
            ("negators", &self.negators),
        ] {
            if let Some(p) = p {
                if !p.exists() {
                    problems.push(format!("{key}: {} does not exist", p.display()));
                }
            }
        }
        if self.jenks_k < 1 {
            problems.push("jenks_k: must be at least 1".to_string());
        }
        if self.topk_words < 1 {
            problems.push("topk_words: must be at least 1".to_string());
        }
        if self.topk_edges < 1 {
            problems.push("topk_edges: must be at least 1".to_string());
        }
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if !positive(self.radius_miles) {
            problems.push("radius_miles: must be positive".to_string());
        }
        if !positive(self.spacing_miles)
            || self.spacing_miles > self.radius_miles * std::f64::consts::SQRT_2 * (1.0 + 1e-12)
        {
            problems.push(
                "spacing_miles: must be positive and at most radius_miles * sqrt(2) for full coverage"
                    .to_string(),
            );
        }
        if !positive(self.bc_epsilon) {
            problems.push("bc_epsilon: must be positive".to_string());
        }
        if self.window_start >= self.window_end {
            problems.push("window_start: must precede window_end".to_string());
        }
        problems
    }

    /// Parameter echo for the manifest, stable key order.
    fn parameter_echo(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        let path = |p: &Option<PathBuf>| {
            p.as_ref()
                .map_or_else(|| "(bundled)".to_string(), |p| p.display().to_string())
        };
        m.insert("posts".into(), path(&self.posts));
        m.insert("region".into(), path(&self.region));
        m.insert("nodes".into(), path(&self.nodes));
        m.insert("edges".into(), path(&self.edges));
        m.insert("stopwords".into(), path(&self.stopwords));
        m.insert("lemmas".into(), path(&self.lemmas));
        m.insert("relevance_lexicon".into(), path(&self.relevance_lexicon));
        m.insert("sentiment_lexicon".into(), path(&self.sentiment_lexicon));
        m.insert("boosters".into(), path(&self.boosters));
        m.insert("negators".into(), path(&self.negators));
        m.insert("radius_miles".into(), fmt_sig9(self.radius_miles));
        m.insert("spacing_miles".into(), fmt_sig9(self.spacing_miles));
        m.insert("jenks_k".into(), self.jenks_k.to_string());
        m.insert("topk_words".into(), self.topk_words.to_string());
        m.insert("topk_edges".into(), self.topk_edges.to_string());
        m.insert("bc_epsilon".into(), fmt_sig9(self.bc_epsilon));
        m.insert("join_rule".into(), self.join_rule.as_str().to_string());
        m.insert("window_start".into(), rfc3339(&self.window_start));
        m.insert("window_end".into(), rfc3339(&self.window_end));
        m.insert("rng_seed".into(), self.rng_seed.to_string());
        m.insert("normalize_bc".into(), self.normalize_bc.to_string());
        m
    }
}

fn parse_utc(s: &str) -> Option<DateTime<Utc>> {
    DateTime::parse_from_rfc3339(s)
        .ok()
        .map(|d| d.with_timezone(&Utc))
}

fn rfc3339(ts: &DateTime<Utc>) -> String {
    ts.to_rfc3339_opts(SecondsFormat::Secs, true)
}

/// The text resources a run scores with, either from configured files or
/// the bundled defaults.
pub struct Lexicons {
    pub stopwords: std::collections::HashSet<String>,
    pub lemmas: std::collections::HashMap<String, String>,
    pub relevance: RelevanceLexicon,
    pub sentiment: SentimentLexicon,
}

impl Lexicons {
    pub fn load(config: &PipelineConfig) -> Result<Self> {
        let read = |p: &Option<PathBuf>, bundled: &str| -> Result<String> {
            match p {
                Some(p) => fs::read_to_string(p).map_err(|e| Error::io(p.display().to_string(), e)),
                None => Ok(bundled.to_string()),
            }
        };
        Ok(Self {
            stopwords: parse_word_list(&read(&config.stopwords, data::STOPWORDS)?),
            lemmas: parse_lemma_table(&read(&config.lemmas, data::LEMMAS)?)?,
            relevance: RelevanceLexicon::parse(&read(&config.relevance_lexicon, data::RELEVANCE)?)?,
            sentiment: SentimentLexicon::parse(
                &read(&config.sentiment_lexicon, data::SENTIMENT_LEXICON)?,
                &read(&config.boosters, data::BOOSTERS)?,
                &read(&config.negators, data::NEGATORS)?,
            )?,
        })
    }
}

/// One executed stage's bookkeeping.
#[derive(Debug, Clone, Serialize)]
pub struct StageRecord {
    pub stage: String,
    pub input_records: u64,
    pub output_records: u64,
    pub dropped: u64,
    pub flagged: u64,
    pub wall_ms: u64,
    pub notes: Vec<String>,
}

/// The run's reproducibility record: parameters, input hashes, and
/// per-stage counts. `created_utc` and `wall_ms` vary between runs; all
/// other artifacts are byte-stable.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub created_utc: String,
    pub status: String,
    pub from_stage: String,
    pub parameters: BTreeMap<String, String>,
    pub input_hashes: BTreeMap<String, String>,
    pub stages: Vec<StageRecord>,
}

fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        let _ = write!(out, "{b:02x}");
    }
    Ok(out)
}

/// JSON string literal with escaping.
fn json_str(s: &str) -> String {
    serde_json::Value::from(s).to_string()
}

// Output file names, in stage order.
pub const FILE_POSTS_CLEAN: &str = "01_posts_clean.ndjson";
pub const FILE_TOKENS: &str = "02_tokens.ndjson";
pub const FILE_WORD_FREQUENCY: &str = "02_word_frequency.csv";
pub const FILE_SCORED: &str = "03_scored.csv";
pub const FILE_THIESSEN: &str = "04_thiessen.geojson";
pub const FILE_EDGE_SENTIMENT: &str = "05_edge_sentiment.csv";
pub const FILE_EDGE_CLASSES: &str = "05_edge_classes.csv";
pub const FILE_CLASS_BREAKS: &str = "05_class_breaks.json";
pub const FILE_BC: &str = "06_bc.csv";
pub const FILE_RANK_SHIFT: &str = "06_rank_shift.json";
pub const FILE_EDGE_METRICS: &str = "07_edges_metrics.geojson";
pub const FILE_MANIFEST: &str = "manifest.json";
pub const FILE_GRID: &str = "grid_centers.csv";

/// In-memory state threaded through the stages. Fields are filled either
/// by running the producing stage or by reloading its artifact.
struct RunState {
    region: Option<StudyRegion>,
    frame: Option<LocalFrame<f64>>,
    posts_clean: Option<Vec<GeoPost>>,
    relevant_posts: Option<Vec<GeoPost>>,
    tokens: Option<Vec<TokenizedPost>>,
    scored: Option<Vec<ScoredPost>>,
    diagram: Option<ThiessenDiagram<f64>>,
    network: Option<RoadNetwork>,
    edge_sentiment: Option<Vec<EdgeSentiment>>,
    weights: Option<Vec<f64>>,
    edge_classes: Option<Vec<usize>>,
    bc: Option<BcResults>,
}

struct BcResults {
    unweighted: Vec<f64>,
    weighted: Vec<f64>,
    ranks_unweighted: Vec<usize>,
    ranks_weighted: Vec<usize>,
}

impl RunState {
    fn new() -> Self {
        Self {
            region: None,
            frame: None,
            posts_clean: None,
            relevant_posts: None,
            tokens: None,
            scored: None,
            diagram: None,
            network: None,
            edge_sentiment: None,
            weights: None,
            edge_classes: None,
            bc: None,
        }
    }
}

/// Executes stages `from..=until`, writing artifacts into `out_dir` and
/// finishing with `manifest.json`. On a stage failure the partial
/// manifest (status naming the stage) is still written.
pub fn run_pipeline(
    config: &PipelineConfig,
    out_dir: &Path,
    from: Stage,
    until: Stage,
) -> Result<RunManifest> {
    if from > until {
        return Err(Error::config(format!(
            "--from {} is after the last requested stage {}",
            from.as_str(),
            until.as_str()
        )));
    }
    let problems = config.validate();
    if !problems.is_empty() {
        return Err(Error::config(format!(
            "config is not runnable: {}",
            problems.join("; ")
        )));
    }
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir.display().to_string(), e))?;

    let mut input_hashes = BTreeMap::new();
    for (key, p) in [
        ("posts", &config.posts),
        ("region", &config.region),
        ("nodes", &config.nodes),
        ("edges", &config.edges),
        ("stopwords", &config.stopwords),
        ("lemmas", &config.lemmas),
        ("relevance_lexicon", &config.relevance_lexicon),
        ("sentiment_lexicon", &config.sentiment_lexicon),
        ("boosters", &config.boosters),
        ("negators", &config.negators),
    ] {
        if let Some(p) = p {
            input_hashes.insert(key.to_string(), sha256_file(p)?);
        }
    }

    let mut manifest = RunManifest {
        created_utc: rfc3339(&Utc::now()),
        status: "complete".to_string(),
        from_stage: from.as_str().to_string(),
        parameters: config.parameter_echo(),
        input_hashes,
        stages: Vec::new(),
    };

    let lexicons = Lexicons::load(config)?;
    let mut state = RunState::new();
    for stage in Stage::ALL {
        if stage < from || stage > until {
            continue;
        }
        let t0 = Instant::now();
        let result = match stage {
            Stage::Ingest => stage_ingest(config, out_dir, &mut state),
            Stage::Relevance => stage_relevance(config, out_dir, &mut state, &lexicons),
            Stage::Sentiment => stage_sentiment(config, out_dir, &mut state, &lexicons),
            Stage::Tessellate => stage_tessellate(config, out_dir, &mut state),
            Stage::Join => stage_join(config, out_dir, &mut state),
            Stage::Classify => stage_classify(config, out_dir, &mut state),
            Stage::Centrality => stage_centrality(config, out_dir, &mut state),
            Stage::Report => stage_report(config, out_dir, &mut state),
        };
        match result {
            Ok(mut record) => {
                record.wall_ms = t0.elapsed().as_millis() as u64;
                log::info!(
                    "{}: {} in, {} out, {} dropped, {} flagged ({} ms)",
                    record.stage,
                    record.input_records,
                    record.output_records,
                    record.dropped,
                    record.flagged,
                    record.wall_ms
                );
                manifest.stages.push(record);
            }
            Err(e) => {
                manifest.status = format!("failed at {}: {}", stage.as_str(), e);
                write_manifest(out_dir, &manifest)?;
                return Err(e);
            }
        }
    }
    write_manifest(out_dir, &manifest)?;
    Ok(manifest)
}

fn write_manifest(out_dir: &Path, manifest: &RunManifest) -> Result<()> {
    let path = out_dir.join(FILE_MANIFEST);
    let mut text = serde_json::to_string_pretty(manifest).map_err(|e| Error::Json {
        path: FILE_MANIFEST.to_string(),
        source: e,
    })?;
    text.push('\n');
    fs::write(&path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

fn write_out(out_dir: &Path, name: &str, content: &str) -> Result<()> {
    let path = out_dir.join(name);
    fs::write(&path, content).map_err(|e| Error::io(path.display().to_string(), e))
}

fn record(stage: Stage) -> StageRecord {
    StageRecord {
        stage: stage.as_str().to_string(),
        input_records: 0,
        output_records: 0,
        dropped: 0,
        flagged: 0,
        wall_ms: 0,
        notes: Vec::new(),
    }
}

fn require<'a, T>(value: &'a Option<T>, what: &str) -> Result<&'a T> {
    value
        .as_ref()
        .ok_or_else(|| Error::data(format!("internal: {what} not available")))
}

// ---- lazy state loading -------------------------------------------------

fn ensure_region(config: &PipelineConfig, state: &mut RunState) -> Result<()> {
    if state.region.is_none() {
        let path = require(&config.region, "region path")?;
        let region = StudyRegion::from_geojson_file(path)?;
        state.frame = Some(region.frame());
        state.region = Some(region);
    }
    Ok(())
}

fn ensure_network(config: &PipelineConfig, state: &mut RunState) -> Result<Vec<String>> {
    if state.network.is_some() {
        return Ok(Vec::new());
    }
    ensure_region(config, state)?;
    let nodes = require(&config.nodes, "nodes path")?;
    let edges = require(&config.edges, "edges path")?;
    let report = load_network(nodes, edges, state.frame.as_ref().unwrap())?;
    let mut notes = Vec::new();
    if !report.skipped_self_loops.is_empty() {
        notes.push(format!(
            "skipped {} self-loop edge(s)",
            report.skipped_self_loops.len()
        ));
    }
    if !report.skipped_parallel.is_empty() {
        notes.push(format!(
            "skipped {} parallel edge(s)",
            report.skipped_parallel.len()
        ));
    }
    if !report.unknown_fclass.is_empty() {
        notes.push(format!(
            "{} edge(s) with unknown fclass treated as local",
            report.unknown_fclass.len()
        ));
    }
    state.network = Some(report.network);
    Ok(notes)
}

fn artifact(out_dir: &Path, name: &str) -> Result<PathBuf> {
    let p = out_dir.join(name);
    if !p.exists() {
        return Err(Error::data(format!(
            "{name} not found in the output directory; run the earlier stages first"
        )));
    }
    Ok(p)
}

fn ensure_posts_clean(out_dir: &Path, state: &mut RunState) -> Result<()> {
    if state.posts_clean.is_none() {
        let p = artifact(out_dir, FILE_POSTS_CLEAN)?;
        state.posts_clean = Some(read_posts(&p, PostFormat::Ndjson)?.posts);
    }
    Ok(())
}

fn ensure_tokens(out_dir: &Path, state: &mut RunState) -> Result<()> {
    if state.tokens.is_some() {
        return Ok(());
    }
    ensure_posts_clean(out_dir, state)?;
    let p = artifact(out_dir, FILE_TOKENS)?;
    let text = fs::read_to_string(&p).map_err(|e| Error::io(p.display().to_string(), e))?;
    let mut tokens = Vec::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let t: TokenizedPost = serde_json::from_str(line).map_err(|e| Error::Json {
            path: p.display().to_string(),
            source: e,
        })?;
        tokens.push(t);
    }
    let by_id: std::collections::HashMap<&str, &GeoPost> = state
        .posts_clean
        .as_ref()
        .unwrap()
        .iter()
        .map(|p| (p.id.as_str(), p))
        .collect();
    let mut relevant = Vec::with_capacity(tokens.len());
    for t in &tokens {
        let post = by_id.get(t.post_id.as_str()).ok_or_else(|| {
            Error::data(format!(
                "{FILE_TOKENS} references unknown post {}",
                t.post_id
            ))
        })?;
        relevant.push((*post).clone());
    }
    state.relevant_posts = Some(relevant);
    state.tokens = Some(tokens);
    Ok(())
}

fn ensure_scored(out_dir: &Path, state: &mut RunState) -> Result<()> {
    if state.scored.is_some() {
        return Ok(());
    }
    let p = artifact(out_dir, FILE_SCORED)?;
    let mut rdr = csv::Reader::from_path(&p).map_err(|e| Error::Csv {
        path: p.display().to_string(),
        source: e,
    })?;
    let mut scored = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Csv {
            path: p.display().to_string(),
            source: e,
        })?;
        let field = |i: usize| rec.get(i).unwrap_or("");
        let ts = parse_utc(field(1))
            .ok_or_else(|| Error::data(format!("{FILE_SCORED}: bad timestamp {:?}", field(1))))?;
        let num = |i: usize| -> Result<f64> {
            field(i)
                .parse()
                .map_err(|_| Error::data(format!("{FILE_SCORED}: bad number {:?}", field(i))))
        };
        scored.push(ScoredPost {
            post_id: field(0).to_string(),
            ts,
            lon: num(2)?,
            lat: num(3)?,
            compound: num(4)?,
        });
    }
    state.scored = Some(scored);
    Ok(())
}

fn ensure_diagram(config: &PipelineConfig, out_dir: &Path, state: &mut RunState) -> Result<usize> {
    if state.diagram.is_some() || state.scored.as_ref().is_some_and(Vec::is_empty) {
        return Ok(0);
    }
    ensure_region(config, state)?;
    if state.scored.is_none() {
        ensure_scored(out_dir, state)?;
    }
    let scored = state.scored.as_ref().unwrap();
    if scored.is_empty() {
        return Ok(0);
    }
    let frame = state.frame.as_ref().unwrap();
    let points: Vec<(String, Point2<f64>, f64)> = scored
        .iter()
        .map(|s| (s.post_id.clone(), frame.project(s.lon, s.lat), s.compound))
        .collect();
    let mut sites = merge_coincident(points, MERGE_DISTANCE_M);
    let planar = state.region.as_ref().unwrap().project(frame);
    // Guard against posts accepted on the geographic boundary landing a
    // hair outside the projected region.
    let before = sites.len();
    sites.retain(|s| planar.contains(s.xy));
    let dropped = before - sites.len();
    state.diagram = Some(tessellate(&sites, &planar)?);
    Ok(dropped)
}

fn ensure_edge_sentiment(
    config: &PipelineConfig,
    out_dir: &Path,
    state: &mut RunState,
) -> Result<()> {
    if state.edge_sentiment.is_some() {
        return Ok(());
    }
    ensure_network(config, state)?;
    let p = artifact(out_dir, FILE_EDGE_SENTIMENT)?;
    let mut rdr = csv::Reader::from_path(&p).map_err(|e| Error::Csv {
        path: p.display().to_string(),
        source: e,
    })?;
    let network = state.network.as_ref().unwrap();
    let index: std::collections::HashMap<&str, usize> = network
        .edges
        .iter()
        .enumerate()
        .map(|(i, e)| (e.edge_id.as_str(), i))
        .collect();
    let mut per_edge = vec![None; network.edges.len()];
    let mut weights = vec![0.0; network.edges.len()];
    let mut rows = 0usize;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Csv {
            path: p.display().to_string(),
            source: e,
        })?;
        let field = |i: usize| rec.get(i).unwrap_or("");
        let &i = index.get(field(0)).ok_or_else(|| {
            Error::data(format!(
                "{FILE_EDGE_SENTIMENT}: unknown edge {:?}",
                field(0)
            ))
        })?;
        let num = |j: usize| -> Result<f64> {
            field(j).parse().map_err(|_| {
                Error::data(format!("{FILE_EDGE_SENTIMENT}: bad number {:?}", field(j)))
            })
        };
        per_edge[i] = Some(EdgeSentiment {
            sentiment: num(1)?,
            covered_m: num(3)?,
            length_m: num(4)?,
            fallback: field(5) == "true",
        });
        weights[i] = num(2)?;
        rows += 1;
    }
    if rows == 0 {
        state.edge_sentiment = Some(Vec::new());
        state.weights = Some(Vec::new());
        return Ok(());
    }
    let per_edge: Option<Vec<EdgeSentiment>> = per_edge.into_iter().collect();
    let per_edge = per_edge.ok_or_else(|| {
        Error::data(format!(
            "{FILE_EDGE_SENTIMENT} does not cover every network edge"
        ))
    })?;
    state.edge_sentiment = Some(per_edge);
    state.weights = Some(weights);
    Ok(())
}

fn ensure_edge_classes(out_dir: &Path, state: &mut RunState) -> Result<()> {
    if state.edge_classes.is_some() {
        return Ok(());
    }
    let network = require(&state.network, "network")?;
    let p = artifact(out_dir, FILE_EDGE_CLASSES)?;
    let mut rdr = csv::Reader::from_path(&p).map_err(|e| Error::Csv {
        path: p.display().to_string(),
        source: e,
    })?;
    let index: std::collections::HashMap<&str, usize> = network
        .edges
        .iter()
        .enumerate()
        .map(|(i, e)| (e.edge_id.as_str(), i))
        .collect();
    let mut classes = vec![0usize; network.edges.len()];
    let mut rows = 0usize;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Csv {
            path: p.display().to_string(),
            source: e,
        })?;
        let id = rec.get(0).unwrap_or("");
        let &i = index
            .get(id)
            .ok_or_else(|| Error::data(format!("{FILE_EDGE_CLASSES}: unknown edge {id:?}")))?;
        classes[i] = rec
            .get(1)
            .unwrap_or("")
            .parse()
            .map_err(|_| Error::data(format!("{FILE_EDGE_CLASSES}: bad class for {id}")))?;
        rows += 1;
    }
    state.edge_classes = Some(if rows == 0 { Vec::new() } else { classes });
    Ok(())
}

fn ensure_bc(out_dir: &Path, state: &mut RunState) -> Result<()> {
    if state.bc.is_some() {
        return Ok(());
    }
    let network = require(&state.network, "network")?;
    let p = artifact(out_dir, FILE_BC)?;
    let mut rdr = csv::Reader::from_path(&p).map_err(|e| Error::Csv {
        path: p.display().to_string(),
        source: e,
    })?;
    let index: std::collections::HashMap<&str, usize> = network
        .edges
        .iter()
        .enumerate()
        .map(|(i, e)| (e.edge_id.as_str(), i))
        .collect();
    let m = network.edges.len();
    let mut bc = BcResults {
        unweighted: vec![0.0; m],
        weighted: vec![0.0; m],
        ranks_unweighted: vec![0; m],
        ranks_weighted: vec![0; m],
    };
    let mut rows = 0usize;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Csv {
            path: p.display().to_string(),
            source: e,
        })?;
        let field = |i: usize| rec.get(i).unwrap_or("");
        let &i = index
            .get(field(0))
            .ok_or_else(|| Error::data(format!("{FILE_BC}: unknown edge {:?}", field(0))))?;
        let num = |j: usize| -> Result<f64> {
            field(j)
                .parse()
                .map_err(|_| Error::data(format!("{FILE_BC}: bad number {:?}", field(j))))
        };
        bc.unweighted[i] = num(1)?;
        bc.weighted[i] = num(2)?;
        bc.ranks_unweighted[i] = num(5)? as usize;
        bc.ranks_weighted[i] = num(6)? as usize;
        rows += 1;
    }
    if rows == 0 {
        bc.unweighted.clear();
        bc.weighted.clear();
        bc.ranks_unweighted.clear();
        bc.ranks_weighted.clear();
    }
    state.bc = Some(bc);
    Ok(())
}

// ---- stages --------------------------------------------------------------

fn stage_ingest(
    config: &PipelineConfig,
    out_dir: &Path,
    state: &mut RunState,
) -> Result<StageRecord> {
    let mut rec = record(Stage::Ingest);
    ensure_region(config, state)?;
    let posts_path = require(&config.posts, "posts path")?;
    let report = read_posts(posts_path, PostFormat::from_path(posts_path))?;
    rec.input_records = (report.posts.len() + report.skipped) as u64;
    if report.skipped > 0 {
        rec.notes
            .push(format!("{} malformed record(s) skipped", report.skipped));
    }

    let after_read = report.posts.len();
    let english: Vec<GeoPost> = report
        .posts
        .into_iter()
        .filter(|p| {
            p.lang
                .as_deref()
                .is_none_or(|l| l.eq_ignore_ascii_case("en"))
        })
        .collect();
    let lang_dropped = after_read - english.len();

    let deduped = dedup(&english);
    let dup_dropped = english.len() - deduped.len();

    let windowed: Vec<GeoPost> = deduped
        .into_iter()
        .filter(|p| p.ts >= config.window_start && p.ts < config.window_end)
        .collect();
    let window_dropped = after_read - lang_dropped - dup_dropped - windowed.len();

    let inside = filter_region(&windowed, state.region.as_ref().unwrap());
    let region_dropped = windowed.len() - inside.len();

    rec.notes.push(format!(
        "dropped: {lang_dropped} non-English, {dup_dropped} duplicate(s), \
         {window_dropped} outside the time window, {region_dropped} outside the region"
    ));
    rec.dropped =
        (report.skipped + lang_dropped + dup_dropped + window_dropped + region_dropped) as u64;
    rec.output_records = inside.len() as u64;

    let mut ndjson = String::new();
    for p in &inside {
        let line = serde_json::to_string(p).map_err(|e| Error::Json {
            path: FILE_POSTS_CLEAN.to_string(),
            source: e,
        })?;
        ndjson.push_str(&line);
        ndjson.push('\n');
    }
    write_out(out_dir, FILE_POSTS_CLEAN, &ndjson)?;
    state.posts_clean = Some(inside);
    Ok(rec)
}

fn stage_relevance(
    config: &PipelineConfig,
    out_dir: &Path,
    state: &mut RunState,
    lexicons: &Lexicons,
) -> Result<StageRecord> {
    let mut rec = record(Stage::Relevance);
    ensure_posts_clean(out_dir, state)?;
    let posts = state.posts_clean.as_ref().unwrap();
    rec.input_records = posts.len() as u64;

    let mut tokens = Vec::new();
    let mut relevant = Vec::new();
    for p in posts {
        let toks = tokenize(&p.text, &lexicons.stopwords, &lexicons.lemmas);
        if is_relevant(&toks, &lexicons.relevance) {
            tokens.push(TokenizedPost {
                post_id: p.id.clone(),
                tokens: toks,
            });
            relevant.push(p.clone());
        }
    }
    rec.output_records = tokens.len() as u64;
    rec.dropped = rec.input_records - rec.output_records;

    let mut ndjson = String::new();
    for t in &tokens {
        let line = serde_json::to_string(t).map_err(|e| Error::Json {
            path: FILE_TOKENS.to_string(),
            source: e,
        })?;
        ndjson.push_str(&line);
        ndjson.push('\n');
    }
    write_out(out_dir, FILE_TOKENS, &ndjson)?;

    let matrix = frequency_matrix(
        relevant
            .iter()
            .zip(&tokens)
            .map(|(p, t)| (p.ts, t.tokens.as_slice())),
        config.topk_words,
    )?;
    if matrix.k_exceeds_vocab {
        rec.notes.push(format!(
            "topk_words {} exceeds the {}-word vocabulary; emitted all of it",
            config.topk_words,
            matrix.words.len()
        ));
    }
    rec.notes.push(format!(
        "top words cover {} of token occurrences",
        fmt_sig9(matrix.coverage_share)
    ));
    let mut csv_bytes = Vec::new();
    matrix
        .write_csv(&mut csv_bytes)
        .map_err(|e| Error::io(FILE_WORD_FREQUENCY.to_string(), e))?;
    write_out(
        out_dir,
        FILE_WORD_FREQUENCY,
        std::str::from_utf8(&csv_bytes).unwrap(),
    )?;

    state.tokens = Some(tokens);
    state.relevant_posts = Some(relevant);
    Ok(rec)
}

fn stage_sentiment(
    _config: &PipelineConfig,
    out_dir: &Path,
    state: &mut RunState,
    lexicons: &Lexicons,
) -> Result<StageRecord> {
    let mut rec = record(Stage::Sentiment);
    ensure_tokens(out_dir, state)?;
    let posts = state.relevant_posts.as_ref().unwrap();
    let tokens = state.tokens.as_ref().unwrap();
    rec.input_records = posts.len() as u64;

    // Artifact precision is the contract: a stage resumed from the file
    // must see the same numbers the in-process run saw, or weighted
    // shortest-path ties downstream resolve differently.
    let scored: Vec<ScoredPost> = score_posts(&lexicons.sentiment, posts, tokens)?
        .into_iter()
        .map(|mut s| {
            s.lon = round_sig9(s.lon);
            s.lat = round_sig9(s.lat);
            s.compound = round_sig9(s.compound);
            s
        })
        .collect();
    rec.output_records = scored.len() as u64;

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["post_id", "ts", "lon", "lat", "compound"])
        .map_err(|e| Error::Csv {
            path: FILE_SCORED.to_string(),
            source: e,
        })?;
    for s in &scored {
        w.write_record([
            s.post_id.as_str(),
            &rfc3339(&s.ts),
            &fmt_sig9(s.lon),
            &fmt_sig9(s.lat),
            &fmt_sig9(s.compound),
        ])
        .map_err(|e| Error::Csv {
            path: FILE_SCORED.to_string(),
            source: e,
        })?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::data(format!("{FILE_SCORED}: {e}")))?;
    write_out(out_dir, FILE_SCORED, std::str::from_utf8(&bytes).unwrap())?;

    state.scored = Some(scored);
    Ok(rec)
}

/// Unprojects a planar polygon part back to a closed lon/lat GeoJSON
/// ring array.
fn ring_json(frame: &LocalFrame<f64>, ring: &crate::geom::Ring<f64>) -> String {
    let mut s = String::from("[");
    let mut first = true;
    for &p in ring.0.iter().chain(ring.0.first()) {
        if !first {
            s.push(',');
        }
        first = false;
        let (lon, lat) = frame.unproject(p);
        let _ = write!(s, "[{},{}]", fmt_sig9(lon), fmt_sig9(lat));
    }
    s.push(']');
    s
}

fn stage_tessellate(
    config: &PipelineConfig,
    out_dir: &Path,
    state: &mut RunState,
) -> Result<StageRecord> {
    let mut rec = record(Stage::Tessellate);
    if state.scored.is_none() {
        ensure_scored(out_dir, state)?;
    }
    rec.input_records = state.scored.as_ref().unwrap().len() as u64;
    let boundary_dropped = ensure_diagram(config, out_dir, state)?;
    if boundary_dropped > 0 {
        rec.dropped = boundary_dropped as u64;
        rec.notes.push(format!(
            "{boundary_dropped} site(s) on the region boundary fell outside the projected region"
        ));
    }

    let Some(diagram) = state.diagram.as_ref() else {
        write_out(
            out_dir,
            FILE_THIESSEN,
            "{\"type\":\"FeatureCollection\",\"features\":[]}\n",
        )?;
        rec.notes
            .push("no scored posts; wrote an empty layer".to_string());
        return Ok(rec);
    };
    let frame = state.frame.as_ref().unwrap();

    // Natural-breaks classes over cell sentiments, k clamped to the
    // number of distinct values.
    let sentiments: Vec<f64> = diagram.cells.iter().map(|c| c.sentiment).collect();
    let mut distinct = sentiments.clone();
    distinct.sort_by(|a, b| a.partial_cmp(b).unwrap());
    distinct.dedup();
    let k_eff = config.jenks_k.min(distinct.len()).max(1);
    if k_eff < config.jenks_k {
        rec.notes.push(format!(
            "jenks_k {} clamped to {} distinct cell sentiment value(s)",
            config.jenks_k, k_eff
        ));
    }
    let breaks = jenks_breaks(&sentiments, k_eff)?;
    let (classes, _) = classify(&sentiments, &breaks);

    let merged = diagram.cells.iter().filter(|c| c.multiplicity > 1).count();
    if merged > 0 {
        rec.notes
            .push(format!("{merged} site(s) merged from coincident posts"));
    }

    let mut features = String::new();
    for (cell, class) in diagram.cells.iter().zip(&classes) {
        if !features.is_empty() {
            features.push(',');
        }
        let mut polys = String::new();
        for part in &cell.parts {
            if !polys.is_empty() {
                polys.push(',');
            }
            let mut rings = ring_json(frame, &part.outer);
            for hole in &part.holes {
                rings.push(',');
                rings.push_str(&ring_json(frame, hole));
            }
            let _ = write!(polys, "[{rings}]");
        }
        let _ = write!(
            features,
            concat!(
                "{{\"type\":\"Feature\",\"properties\":{{\"site_id\":{},\"sentiment\":{},",
                "\"area_m2\":{},\"class\":{}}},",
                "\"geometry\":{{\"type\":\"MultiPolygon\",\"coordinates\":[{}]}}}}"
            ),
            json_str(&cell.site_id),
            fmt_sig9(cell.sentiment),
            fmt_sig9(cell.area),
            class,
            polys
        );
    }
    write_out(
        out_dir,
        FILE_THIESSEN,
        &format!("{{\"type\":\"FeatureCollection\",\"features\":[{features}]}}\n"),
    )?;
    rec.output_records = diagram.cells.len() as u64;
    Ok(rec)
}

fn stage_join(
    config: &PipelineConfig,
    out_dir: &Path,
    state: &mut RunState,
) -> Result<StageRecord> {
    let mut rec = record(Stage::Join);
    rec.notes.extend(ensure_network(config, state)?);
    ensure_diagram(config, out_dir, state)?;
    let network = state.network.as_ref().unwrap();
    rec.input_records = network.edges.len() as u64;

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "edge_id",
        "sentiment",
        "weight",
        "covered_m",
        "length_m",
        "flagged",
    ])
    .map_err(|e| Error::Csv {
        path: FILE_EDGE_SENTIMENT.to_string(),
        source: e,
    })?;

    let Some(diagram) = state.diagram.as_ref() else {
        let bytes = w
            .into_inner()
            .map_err(|e| Error::data(format!("{FILE_EDGE_SENTIMENT}: {e}")))?;
        write_out(
            out_dir,
            FILE_EDGE_SENTIMENT,
            std::str::from_utf8(&bytes).unwrap(),
        )?;
        rec.notes
            .push("no scored posts; wrote an empty layer".to_string());
        state.edge_sentiment = Some(Vec::new());
        state.weights = Some(Vec::new());
        return Ok(rec);
    };

    let planar = state
        .region
        .as_ref()
        .unwrap()
        .project(state.frame.as_ref().unwrap());
    let mut join = spatial_join(network, diagram, &planar, config.join_rule);
    // As in the sentiment stage: pin values to the precision the CSV
    // carries so resumed runs reproduce in-process runs exactly.
    for e in &mut join.per_edge {
        e.sentiment = round_sig9(e.sentiment);
        e.covered_m = round_sig9(e.covered_m);
        e.length_m = round_sig9(e.length_m);
    }
    let sentiments: Vec<f64> = join.per_edge.iter().map(|e| e.sentiment).collect();
    let (weights, degenerate) = scale_weights(&sentiments)?;
    let weights: Vec<f64> = weights.into_iter().map(round_sig9).collect();
    if degenerate {
        rec.notes.push(
            "all edge sentiments equal; weights degenerate to 0.5 across the board".to_string(),
        );
    }
    rec.flagged = join.per_edge.iter().filter(|e| e.fallback).count() as u64;
    if rec.flagged > 0 {
        rec.notes.push(format!(
            "{} edge(s) had no covered length and took the regional mean",
            rec.flagged
        ));
    }
    rec.notes
        .push(format!("uncovered length {} m", fmt_sig9(join.uncovered_m)));
    rec.notes
        .push(format!("join rule: {}", config.join_rule.as_str()));

    for (edge, (es, weight)) in network.edges.iter().zip(join.per_edge.iter().zip(&weights)) {
        w.write_record([
            edge.edge_id.as_str(),
            &fmt_sig9(es.sentiment),
            &fmt_sig9(*weight),
            &fmt_sig9(es.covered_m),
            &fmt_sig9(es.length_m),
            if es.fallback { "true" } else { "false" },
        ])
        .map_err(|e| Error::Csv {
            path: FILE_EDGE_SENTIMENT.to_string(),
            source: e,
        })?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::data(format!("{FILE_EDGE_SENTIMENT}: {e}")))?;
    write_out(
        out_dir,
        FILE_EDGE_SENTIMENT,
        std::str::from_utf8(&bytes).unwrap(),
    )?;

    rec.output_records = join.per_edge.len() as u64;
    state.edge_sentiment = Some(join.per_edge);
    state.weights = Some(weights);
    Ok(rec)
}

fn stage_classify(
    config: &PipelineConfig,
    out_dir: &Path,
    state: &mut RunState,
) -> Result<StageRecord> {
    let mut rec = record(Stage::Classify);
    ensure_edge_sentiment(config, out_dir, state)?;
    let network = state.network.as_ref().unwrap();
    let edge_sent = state.edge_sentiment.as_ref().unwrap();
    rec.input_records = edge_sent.len() as u64;

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["edge_id", "class"])
        .map_err(|e| Error::Csv {
            path: FILE_EDGE_CLASSES.to_string(),
            source: e,
        })?;

    if edge_sent.is_empty() {
        let bytes = w
            .into_inner()
            .map_err(|e| Error::data(format!("{FILE_EDGE_CLASSES}: {e}")))?;
        write_out(
            out_dir,
            FILE_EDGE_CLASSES,
            std::str::from_utf8(&bytes).unwrap(),
        )?;
        write_out(
            out_dir,
            FILE_CLASS_BREAKS,
            "{\"k\":0,\"upper_bounds\":[],\"gvf\":null}\n",
        )?;
        rec.notes
            .push("no scored edges; wrote empty layers".to_string());
        state.edge_classes = Some(Vec::new());
        return Ok(rec);
    }

    let sentiments: Vec<f64> = edge_sent.iter().map(|e| e.sentiment).collect();
    let result = classify_edges(&sentiments, config.jenks_k)?;
    if result.k_effective < config.jenks_k {
        rec.notes.push(format!(
            "jenks_k {} clamped to {} distinct edge sentiment value(s)",
            config.jenks_k, result.k_effective
        ));
    }
    for (edge, class) in network.edges.iter().zip(&result.classes) {
        w.write_record([edge.edge_id.as_str(), &class.to_string()])
            .map_err(|e| Error::Csv {
                path: FILE_EDGE_CLASSES.to_string(),
                source: e,
            })?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::data(format!("{FILE_EDGE_CLASSES}: {e}")))?;
    write_out(
        out_dir,
        FILE_EDGE_CLASSES,
        std::str::from_utf8(&bytes).unwrap(),
    )?;

    let bounds = result
        .breaks
        .upper_bounds
        .iter()
        .map(|b| fmt_sig9(*b))
        .collect::<Vec<_>>()
        .join(",");
    write_out(
        out_dir,
        FILE_CLASS_BREAKS,
        &format!(
            "{{\"k\":{},\"upper_bounds\":[{}],\"gvf\":{}}}\n",
            result.breaks.k,
            bounds,
            fmt_sig9(result.breaks.gvf)
        ),
    )?;

    rec.output_records = result.classes.len() as u64;
    state.edge_classes = Some(result.classes);
    Ok(rec)
}

fn stage_centrality(
    config: &PipelineConfig,
    out_dir: &Path,
    state: &mut RunState,
) -> Result<StageRecord> {
    let mut rec = record(Stage::Centrality);
    ensure_edge_sentiment(config, out_dir, state)?;
    let network = state.network.as_ref().unwrap();
    let weights = state.weights.as_ref().unwrap();
    rec.input_records = weights.len() as u64;

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "edge_id",
        "bc_unweighted",
        "bc_weighted",
        "strength_u",
        "strength_v",
        "rank_unweighted",
        "rank_weighted",
        "fclass",
    ])
    .map_err(|e| Error::Csv {
        path: FILE_BC.to_string(),
        source: e,
    })?;

    if weights.is_empty() {
        let bytes = w
            .into_inner()
            .map_err(|e| Error::data(format!("{FILE_BC}: {e}")))?;
        write_out(out_dir, FILE_BC, std::str::from_utf8(&bytes).unwrap())?;
        write_out(
            out_dir,
            FILE_RANK_SHIFT,
            "{\"kendall_tau\":null,\"topk_jaccard\":null,\"k_requested\":0,\
             \"topk_size_unweighted\":0,\"topk_size_weighted\":0,\
             \"class_counts_unweighted\":{},\"class_counts_weighted\":{}}\n",
        )?;
        rec.notes
            .push("no scored edges; wrote empty layers".to_string());
        state.bc = Some(BcResults {
            unweighted: Vec::new(),
            weighted: Vec::new(),
            ranks_unweighted: Vec::new(),
            ranks_weighted: Vec::new(),
        });
        return Ok(rec);
    }

    let graph = Graph::new(
        network.nodes.len(),
        network.edges.iter().map(|e| (e.u, e.v)).collect(),
    )?;
    let mut bc_u: Vec<f64> = edge_bc_unweighted(&graph);
    let costs = weights_to_costs(weights, config.bc_epsilon)?;
    let mut bc_w: Vec<f64> = edge_bc_with_costs(&graph, &costs)?;
    if config.normalize_bc {
        normalize_bc(&mut bc_u, graph.node_count());
        normalize_bc(&mut bc_w, graph.node_count());
        rec.notes.push("scores normalized by n(n-1)/2".to_string());
    }
    let strength = node_strength(&graph, weights)?;
    let ranks_u = dense_ranks_desc(&bc_u);
    let ranks_w = dense_ranks_desc(&bc_w);

    for (i, edge) in network.edges.iter().enumerate() {
        w.write_record([
            edge.edge_id.as_str(),
            &fmt_sig9(bc_u[i]),
            &fmt_sig9(bc_w[i]),
            &fmt_sig9(strength[edge.u]),
            &fmt_sig9(strength[edge.v]),
            &ranks_u[i].to_string(),
            &ranks_w[i].to_string(),
            edge.fclass.as_str(),
        ])
        .map_err(|e| Error::Csv {
            path: FILE_BC.to_string(),
            source: e,
        })?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::data(format!("{FILE_BC}: {e}")))?;
    write_out(out_dir, FILE_BC, std::str::from_utf8(&bytes).unwrap())?;

    let fclass: Vec<String> = network
        .edges
        .iter()
        .map(|e| e.fclass.as_str().to_string())
        .collect();
    let shift = rank_shift(&bc_u, &bc_w, &fclass, config.topk_edges)?;
    write_out(out_dir, FILE_RANK_SHIFT, &rank_shift_json(&shift))?;
    rec.notes.push(format!(
        "kendall tau {} between unweighted and weighted rankings",
        fmt_sig9(shift.kendall_tau)
    ));

    rec.output_records = bc_u.len() as u64;
    state.bc = Some(BcResults {
        unweighted: bc_u,
        weighted: bc_w,
        ranks_unweighted: ranks_u,
        ranks_weighted: ranks_w,
    });
    Ok(rec)
}

fn rank_shift_json(shift: &RankShift) -> String {
    let counts = |m: &BTreeMap<String, usize>| {
        let body = m
            .iter()
            .map(|(k, v)| format!("{}:{}", json_str(k), v))
            .collect::<Vec<_>>()
            .join(",");
        format!("{{{body}}}")
    };
    format!(
        "{{\"kendall_tau\":{},\"topk_jaccard\":{},\"k_requested\":{},\
         \"topk_size_unweighted\":{},\"topk_size_weighted\":{},\
         \"class_counts_unweighted\":{},\"class_counts_weighted\":{}}}\n",
        fmt_sig9(shift.kendall_tau),
        fmt_sig9(shift.topk_jaccard),
        shift.k_requested,
        shift.topk_size_a,
        shift.topk_size_b,
        counts(&shift.class_counts_a),
        counts(&shift.class_counts_b),
    )
}

fn stage_report(
    config: &PipelineConfig,
    out_dir: &Path,
    state: &mut RunState,
) -> Result<StageRecord> {
    let mut rec = record(Stage::Report);
    ensure_edge_sentiment(config, out_dir, state)?;
    ensure_edge_classes(out_dir, state)?;
    ensure_bc(out_dir, state)?;
    let network = state.network.as_ref().unwrap();
    let edge_sent = state.edge_sentiment.as_ref().unwrap();
    let weights = state.weights.as_ref().unwrap();
    let classes = state.edge_classes.as_ref().unwrap();
    let bc = state.bc.as_ref().unwrap();
    rec.input_records = edge_sent.len() as u64;

    if edge_sent.is_empty() {
        write_out(
            out_dir,
            FILE_EDGE_METRICS,
            "{\"type\":\"FeatureCollection\",\"features\":[]}\n",
        )?;
        rec.notes
            .push("no scored edges; wrote an empty layer".to_string());
        return Ok(rec);
    }
    if classes.len() != edge_sent.len() || bc.unweighted.len() != edge_sent.len() {
        return Err(Error::data(
            "classify/centrality artifacts do not match the edge set; rerun those stages",
        ));
    }

    let mut features = String::new();
    for (i, edge) in network.edges.iter().enumerate() {
        if !features.is_empty() {
            features.push(',');
        }
        let mut coords = String::new();
        for &(lon, lat) in &edge.geometry_geo {
            if !coords.is_empty() {
                coords.push(',');
            }
            let _ = write!(coords, "[{},{}]", fmt_sig9(lon), fmt_sig9(lat));
        }
        let _ = write!(
            features,
            concat!(
                "{{\"type\":\"Feature\",\"properties\":{{\"edge_id\":{},\"fclass\":\"{}\",",
                "\"sentiment\":{},\"weight\":{},\"class\":{},\"bc_unweighted\":{},",
                "\"bc_weighted\":{},\"rank_unweighted\":{},\"rank_weighted\":{}}},",
                "\"geometry\":{{\"type\":\"LineString\",\"coordinates\":[{}]}}}}"
            ),
            json_str(&edge.edge_id),
            edge.fclass.as_str(),
            fmt_sig9(edge_sent[i].sentiment),
            fmt_sig9(weights[i]),
            classes[i],
            fmt_sig9(bc.unweighted[i]),
            fmt_sig9(bc.weighted[i]),
            bc.ranks_unweighted[i],
            bc.ranks_weighted[i],
            coords
        );
    }
    write_out(
        out_dir,
        FILE_EDGE_METRICS,
        &format!("{{\"type\":\"FeatureCollection\",\"features\":[{features}]}}\n"),
    )?;
    rec.output_records = network.edges.len() as u64;
    Ok(rec)
}

/// Plans the coverage grid for a region file and writes
/// `grid_centers.csv` (`center_id,lon,lat`, row-major from the bounding
/// box minimum). Returns the grid for the caller to summarize.
pub fn write_grid(
    region_path: &Path,
    radius_miles: f64,
    spacing_miles: f64,
    out_dir: &Path,
) -> Result<CoverageGrid> {
    let region = StudyRegion::from_geojson_file(region_path)?;
    let grid = plan_grid(&region, radius_miles, spacing_miles)?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir.display().to_string(), e))?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["center_id", "lon", "lat"])
        .map_err(|e| Error::Csv {
            path: FILE_GRID.to_string(),
            source: e,
        })?;
    for (i, (lon, lat)) in grid.centers.iter().enumerate() {
        w.write_record([&format!("c{i:04}"), &fmt_sig9(*lon), &fmt_sig9(*lat)])
            .map_err(|e| Error::Csv {
                path: FILE_GRID.to_string(),
                source: e,
            })?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::data(format!("{FILE_GRID}: {e}")))?;
    write_out(out_dir, FILE_GRID, std::str::from_utf8(&bytes).unwrap())?;
    Ok(grid)
}
