//! Synthetic crisis scenarios: a radial hazard field over a rectangular
//! study area, a grid road network with faster through routes, and a
//! seeded post stream whose planted sentiment drops where the field is
//! strong. `write_bundle` lays a scenario out as a ready-to-run input
//! directory for the pipeline.
//!
//! Everything is driven by one ChaCha8 stream seeded from a u64, and the
//! stream is consumed in a fixed order, so a (seed, params) pair
//! regenerates the scenario bit for bit. That guarantee is part of the
//! interface; the generator algorithm is frozen.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use chrono::{Duration, TimeZone, Utc};

use crate::data;
use crate::geom::{haversine_m, LocalFrame, Point2};
use crate::ingest::GeoPost;
use crate::num::{fmt_sig9, round_sig9};
use crate::roadnet::FunctionalClass;
use crate::{Error, Result};

use super::{seeded_rng, unit_f64};

/// Radial hazard intensity: `peak * exp(-d^2 / (2 decay^2))` with `d`
/// the great-circle distance to the center.
#[derive(Debug, Clone)]
pub struct HazardField {
    pub center_lon: f64,
    pub center_lat: f64,
    pub peak: f64,
    pub decay_m: f64,
}

impl HazardField {
    pub fn intensity(&self, lon: f64, lat: f64) -> f64 {
        let d = haversine_m(lon, lat, self.center_lon, self.center_lat);
        self.peak * (-0.5 * (d / self.decay_m).powi(2)).exp()
    }
}

/// Generator knobs. The defaults are the `simulate` defaults.
#[derive(Debug, Clone)]
pub struct ScenarioParams {
    pub n_posts: usize,
    /// Gaussian noise added to the field value before it picks a pool.
    pub noise_sd: f64,
    pub peak: f64,
    pub decay_m: f64,
    /// Center of both the study area and the road grid.
    pub center_lon: f64,
    pub center_lat: f64,
    /// Nodes per grid side.
    pub grid_n: usize,
    /// Grid spacing in meters.
    pub spacing_m: f64,
    /// Margin between the outermost grid line and the region boundary.
    pub margin_m: f64,
    /// Hazard center offset from the grid center, meters east/north.
    pub hazard_offset_m: (f64, f64),
    /// Share of posts clustered around the hazard center (the rest are
    /// uniform over the study area).
    pub cluster_share: f64,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        Self {
            n_posts: 2_000,
            noise_sd: 0.05,
            peak: 1.0,
            decay_m: 2_000.0,
            center_lon: -97.5,
            center_lat: 35.47,
            grid_n: 16,
            spacing_m: 700.0,
            margin_m: 1_000.0,
            hazard_offset_m: (210.0, -140.0),
            cluster_share: 0.4,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioNode {
    pub node_id: String,
    pub lon: f64,
    pub lat: f64,
}

#[derive(Debug, Clone)]
pub struct ScenarioEdge {
    pub edge_id: String,
    pub u: String,
    pub v: String,
    pub fclass: FunctionalClass,
    pub polyline: Vec<(f64, f64)>,
}

/// A generated scenario: field, posts, network, and the rectangular
/// study region (one counterclockwise lon/lat ring, unclosed).
#[derive(Debug, Clone)]
pub struct HazardScenario {
    pub field: HazardField,
    pub posts: Vec<GeoPost>,
    pub nodes: Vec<ScenarioNode>,
    pub edges: Vec<ScenarioEdge>,
    pub region_ring: Vec<(f64, f64)>,
    pub seed: u64,
}

/// Pool thresholds on the noisy field value z. Strong negativity above
/// `STRONG_Z`, mild negativity above `MILD_Z`, a thin positive-leaning
/// band well below that (relief chatter far from the hazard), neutral
/// otherwise. z = 0 always lands in the neutral pool, so a zero field
/// with zero noise produces an all-neutral stream.
const STRONG_Z: f64 = 0.55;
const MILD_Z: f64 = 0.22;
const POSITIVE_LO_Z: f64 = 0.01;
const POSITIVE_HI_Z: f64 = 0.12;
const POSITIVE_PEAK_P: f64 = 0.5;

/// Standard normal via Box-Muller on two uniform draws. Hand-rolled so
/// the stream layout stays frozen no matter what the rand crates do.
fn standard_normal(rng: &mut rand_chacha::ChaCha8Rng) -> f64 {
    let u1 = unit_f64(rng);
    let u2 = unit_f64(rng);
    (-2.0 * (1.0 - u1).ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

fn pick<'a>(rng: &mut rand_chacha::ChaCha8Rng, pool: &[&'a str]) -> &'a str {
    let i = ((unit_f64(rng) * pool.len() as f64) as usize).min(pool.len() - 1);
    pool[i]
}

fn parse_pool(raw: &str) -> Vec<&str> {
    raw.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .collect()
}

/// Generates a scenario. Posts are a uniform-over-region / clustered-at-
/// center mixture; each post's text comes from the pool its local noisy
/// field value selects, so planted sentiment falls off with distance
/// from the hazard center.
pub fn gen_scenario(seed: u64, params: &ScenarioParams) -> Result<HazardScenario> {
    if params.n_posts == 0 {
        return Err(Error::config("scenario needs at least one post"));
    }
    if params.grid_n < 8 {
        return Err(Error::config(
            "scenario grid needs at least 8 nodes per side",
        ));
    }
    if !(params.spacing_m > 0.0 && params.margin_m >= 0.0 && params.decay_m > 0.0) {
        return Err(Error::config("scenario lengths must be positive"));
    }
    if !(0.0..=1.0).contains(&params.cluster_share) {
        return Err(Error::config("cluster share must lie in [0, 1]"));
    }

    let frame = LocalFrame::new(params.center_lon, params.center_lat);
    let n = params.grid_n;
    let half = (n - 1) as f64 / 2.0 * params.spacing_m;
    let geo = |x: f64, y: f64| -> (f64, f64) {
        let (lon, lat) = frame.unproject(Point2::new(x, y));
        (round_sig9(lon), round_sig9(lat))
    };

    let (cx, cy) = params.hazard_offset_m;
    let (center_lon, center_lat) = geo(cx, cy);
    let field = HazardField {
        center_lon,
        center_lat,
        peak: params.peak,
        decay_m: params.decay_m,
    };

    // Region: the grid rectangle plus margin, counterclockwise.
    let ext = half + params.margin_m;
    let region_ring = vec![
        geo(-ext, -ext),
        geo(ext, -ext),
        geo(ext, ext),
        geo(-ext, ext),
    ];

    // Road grid: unit local edges everywhere, skip-3 arterial lines a
    // quarter of the way in from each side, and a skip-3 interstate ring
    // around the perimeter. The center block between the arterials stays
    // purely local, which is where the hazard sits.
    let node_xy = |i: usize, j: usize| -> (f64, f64) {
        (
            i as f64 * params.spacing_m - half,
            j as f64 * params.spacing_m - half,
        )
    };
    let node_id = |i: usize, j: usize| format!("n{i}_{j}");
    let mut nodes = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            let (x, y) = node_xy(i, j);
            let (lon, lat) = geo(x, y);
            nodes.push(ScenarioNode {
                node_id: node_id(i, j),
                lon,
                lat,
            });
        }
    }

    let mut edges = Vec::new();
    let line = |edges: &mut Vec<ScenarioEdge>,
                a: (usize, usize),
                b: (usize, usize),
                id: String,
                fclass| {
        let (xa, ya) = node_xy(a.0, a.1);
        let (xb, yb) = node_xy(b.0, b.1);
        edges.push(ScenarioEdge {
            edge_id: id,
            u: node_id(a.0, a.1),
            v: node_id(b.0, b.1),
            fclass,
            polyline: vec![geo(xa, ya), geo(xb, yb)],
        });
    };
    for j in 0..n {
        for i in 0..n - 1 {
            line(
                &mut edges,
                (i, j),
                (i + 1, j),
                format!("h{i}_{j}"),
                FunctionalClass::Local,
            );
        }
    }
    for j in 0..n - 1 {
        for i in 0..n {
            line(
                &mut edges,
                (i, j),
                (i, j + 1),
                format!("v{i}_{j}"),
                FunctionalClass::Local,
            );
        }
    }
    // Through routes: every third node along a line, so a skip edge
    // replaces three local hops.
    let skip = 3;
    let skip_row = |edges: &mut Vec<ScenarioEdge>, j: usize, tag: &str, fclass| {
        let mut i = 0;
        while i + skip < n {
            line(
                edges,
                (i, j),
                (i + skip, j),
                format!("{tag}r{j}_{i}"),
                fclass,
            );
            i += skip;
        }
    };
    let skip_col = |edges: &mut Vec<ScenarioEdge>, i: usize, tag: &str, fclass| {
        let mut j = 0;
        while j + skip < n {
            line(
                edges,
                (i, j),
                (i, j + skip),
                format!("{tag}c{i}_{j}"),
                fclass,
            );
            j += skip;
        }
    };
    let art_a = n / 4;
    let art_b = 3 * n / 4;
    for &j in &[art_a, art_b] {
        skip_row(&mut edges, j, "a", FunctionalClass::Arterial);
    }
    for &i in &[art_a, art_b] {
        skip_col(&mut edges, i, "a", FunctionalClass::Arterial);
    }
    for &j in &[0, n - 1] {
        skip_row(&mut edges, j, "i", FunctionalClass::Interstate);
    }
    for &i in &[0, n - 1] {
        skip_col(&mut edges, i, "i", FunctionalClass::Interstate);
    }

    // Posts. One rng stream, consumed in a fixed per-post order:
    // placement draws, the band-noise draw, then the pool pick.
    let neutral = parse_pool(data::POOL_NEUTRAL);
    let positive = parse_pool(data::POOL_POSITIVE);
    let mild = parse_pool(data::POOL_NEGATIVE_MILD);
    let strong = parse_pool(data::POOL_NEGATIVE_STRONG);
    let mut rng = seeded_rng(seed);
    let window_start = Utc.with_ymd_and_hms(2020, 10, 20, 0, 0, 0).unwrap();
    let mut posts = Vec::with_capacity(params.n_posts);
    for i in 0..params.n_posts {
        let clustered = unit_f64(&mut rng) < params.cluster_share;
        let (x, y) = if clustered {
            let sigma = 1.25 * params.decay_m;
            loop {
                let px = cx + sigma * standard_normal(&mut rng);
                let py = cy + sigma * standard_normal(&mut rng);
                if px.abs() < ext && py.abs() < ext {
                    break (px, py);
                }
            }
        } else {
            (
                (unit_f64(&mut rng) * 2.0 - 1.0) * ext,
                (unit_f64(&mut rng) * 2.0 - 1.0) * ext,
            )
        };
        let (lon, lat) = geo(x, y);
        let z = (field.intensity(lon, lat) + params.noise_sd * standard_normal(&mut rng))
            .clamp(0.0, 1.0);
        let band_draw = unit_f64(&mut rng);
        let pool = if z > STRONG_Z {
            &strong
        } else if z > MILD_Z {
            &mild
        } else if z > POSITIVE_LO_Z && z <= POSITIVE_HI_Z {
            // Thin relief-chatter band: a triangular bump peaking midway,
            // zero at both ends so a zero field stays all-neutral.
            let mid = (POSITIVE_LO_Z + POSITIVE_HI_Z) / 2.0;
            let half_w = (POSITIVE_HI_Z - POSITIVE_LO_Z) / 2.0;
            let p = POSITIVE_PEAK_P * (1.0 - (z - mid).abs() / half_w);
            if band_draw < p {
                &positive
            } else {
                &neutral
            }
        } else {
            &neutral
        };
        let text = pick(&mut rng, pool).to_string();
        let ts = window_start
            + Duration::days((i % 28) as i64)
            + Duration::seconds(((i as i64) * 37) % 86_400);
        posts.push(GeoPost {
            id: format!("p{i:05}"),
            author_id: format!("a{:03}", i % 300),
            ts,
            lon,
            lat,
            text,
            lang: Some("en".to_string()),
        });
    }

    Ok(HazardScenario {
        field,
        posts,
        nodes,
        edges,
        region_ring,
        seed,
    })
}

/// Writes a scenario as a pipeline input bundle: `posts.ndjson`,
/// `region.geojson`, `nodes.csv`, `edges.geojson`, and a `config.conf`
/// wired to those files.
pub fn write_bundle(scenario: &HazardScenario, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    let write = |name: &str, content: String| -> Result<()> {
        let path = dir.join(name);
        fs::write(&path, content).map_err(|e| Error::io(path.display().to_string(), e))
    };

    let mut ndjson = String::new();
    for p in &scenario.posts {
        let line = serde_json::to_string(p).map_err(|e| Error::Json {
            path: "posts.ndjson".to_string(),
            source: e,
        })?;
        ndjson.push_str(&line);
        ndjson.push('\n');
    }
    write("posts.ndjson", ndjson)?;

    let mut ring = String::new();
    for &(lon, lat) in scenario
        .region_ring
        .iter()
        .chain(scenario.region_ring.first())
    {
        if !ring.is_empty() {
            ring.push(',');
        }
        let _ = write!(ring, "[{},{}]", fmt_sig9(lon), fmt_sig9(lat));
    }
    write(
        "region.geojson",
        format!(
            concat!(
                "{{\"type\":\"FeatureCollection\",\"features\":[{{\"type\":\"Feature\",",
                "\"properties\":{{\"name\":\"synthetic study area\"}},",
                "\"geometry\":{{\"type\":\"Polygon\",\"coordinates\":[[{}]]}}}}]}}\n"
            ),
            ring
        ),
    )?;

    let mut nodes_csv = String::from("node_id,lon,lat\n");
    for n in &scenario.nodes {
        let _ = writeln!(
            nodes_csv,
            "{},{},{}",
            n.node_id,
            fmt_sig9(n.lon),
            fmt_sig9(n.lat)
        );
    }
    write("nodes.csv", nodes_csv)?;

    let mut features = String::new();
    for e in &scenario.edges {
        if !features.is_empty() {
            features.push(',');
        }
        let mut coords = String::new();
        for &(lon, lat) in &e.polyline {
            if !coords.is_empty() {
                coords.push(',');
            }
            let _ = write!(coords, "[{},{}]", fmt_sig9(lon), fmt_sig9(lat));
        }
        let _ = write!(
            features,
            concat!(
                "{{\"type\":\"Feature\",\"properties\":{{\"edge_id\":\"{}\",\"u\":\"{}\",",
                "\"v\":\"{}\",\"fclass\":\"{}\"}},",
                "\"geometry\":{{\"type\":\"LineString\",\"coordinates\":[{}]}}}}"
            ),
            e.edge_id,
            e.u,
            e.v,
            e.fclass.as_str(),
            coords
        );
    }
    write(
        "edges.geojson",
        format!(
            "{{\"type\":\"FeatureCollection\",\"features\":[{}]}}\n",
            features
        ),
    )?;

    write(
        "config.conf",
        format!(
            "# generated scenario bundle\n\
             posts = posts.ndjson\n\
             region = region.geojson\n\
             nodes = nodes.csv\n\
             edges = edges.geojson\n\
             window_start = 2020-10-19T00:00:00Z\n\
             window_end = 2020-11-20T00:00:00Z\n\
             rng_seed = {}\n",
            scenario.seed
        ),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sentiment::SentimentLexicon;
    use crate::testkit::pearson;
    use crate::textproc::tokenize;

    #[test]
    fn regeneration_is_bit_identical() {
        let params = ScenarioParams {
            n_posts: 300,
            ..ScenarioParams::default()
        };
        let a = gen_scenario(7, &params).unwrap();
        let b = gen_scenario(7, &params).unwrap();
        assert_eq!(a.posts, b.posts);
        assert_eq!(a.nodes.len(), b.nodes.len());
        for (x, y) in a.nodes.iter().zip(&b.nodes) {
            assert_eq!(
                (x.node_id.as_str(), x.lon, x.lat),
                (y.node_id.as_str(), y.lon, y.lat)
            );
        }
        let c = gen_scenario(8, &params).unwrap();
        assert_ne!(a.posts, c.posts);
    }

    #[test]
    fn zero_field_zero_noise_is_all_neutral() {
        let params = ScenarioParams {
            n_posts: 400,
            noise_sd: 0.0,
            peak: 0.0,
            ..ScenarioParams::default()
        };
        let scenario = gen_scenario(3, &params).unwrap();
        let neutral = parse_pool(data::POOL_NEUTRAL);
        assert!(scenario
            .posts
            .iter()
            .all(|p| neutral.contains(&p.text.as_str())));
        let lex = SentimentLexicon::parse(data::SENTIMENT_LEXICON, data::BOOSTERS, data::NEGATORS)
            .unwrap();
        let stop = crate::textproc::parse_word_list(data::STOPWORDS);
        let lemmas = crate::textproc::parse_lemma_table(data::LEMMAS).unwrap();
        let mean: f64 = scenario
            .posts
            .iter()
            .map(|p| lex.score_tokens(&tokenize(&p.text, &stop, &lemmas)))
            .sum::<f64>()
            / scenario.posts.len() as f64;
        assert!(mean.abs() < 1e-9, "neutral pool mean {mean}");
    }

    #[test]
    fn planted_correlation_is_strongly_negative() {
        let params = ScenarioParams::default();
        let scenario = gen_scenario(42, &params).unwrap();
        assert_eq!(scenario.posts.len(), 2_000);
        let lex = SentimentLexicon::parse(data::SENTIMENT_LEXICON, data::BOOSTERS, data::NEGATORS)
            .unwrap();
        let stop = crate::textproc::parse_word_list(data::STOPWORDS);
        let lemmas = crate::textproc::parse_lemma_table(data::LEMMAS).unwrap();
        let (xs, ys): (Vec<f64>, Vec<f64>) = scenario
            .posts
            .iter()
            .map(|p| {
                (
                    scenario.field.intensity(p.lon, p.lat),
                    lex.score_tokens(&tokenize(&p.text, &stop, &lemmas)),
                )
            })
            .unzip();
        let r = pearson(&xs, &ys);
        assert!(r <= -0.5, "sample correlation {r}");
    }

    #[test]
    fn grid_structure_has_expected_shape() {
        let params = ScenarioParams {
            n_posts: 1,
            ..ScenarioParams::default()
        };
        let s = gen_scenario(1, &params).unwrap();
        assert_eq!(s.nodes.len(), 256);
        // 2 * 16 * 15 locals, 4 arterial lines and 4 ring lines of 5 skip
        // edges each.
        assert_eq!(s.edges.len(), 480 + 40);
        let locals = s
            .edges
            .iter()
            .filter(|e| e.fclass == FunctionalClass::Local)
            .count();
        assert_eq!(locals, 480);
        let ring = s
            .edges
            .iter()
            .filter(|e| e.fclass == FunctionalClass::Interstate)
            .count();
        assert_eq!(ring, 20);
        // All node ids referenced by edges exist.
        let ids: std::collections::HashSet<&str> =
            s.nodes.iter().map(|n| n.node_id.as_str()).collect();
        assert!(s
            .edges
            .iter()
            .all(|e| ids.contains(e.u.as_str()) && ids.contains(e.v.as_str())));
        // Hazard sits inside the region and the field peaks there.
        let i0 = s.field.intensity(s.field.center_lon, s.field.center_lat);
        assert!((i0 - 1.0).abs() < 1e-12);
        assert!(i0 > s.field.intensity(s.nodes[0].lon, s.nodes[0].lat));
    }

    #[test]
    fn bundle_loads_back_through_the_ingest_paths() {
        let params = ScenarioParams {
            n_posts: 50,
            ..ScenarioParams::default()
        };
        let scenario = gen_scenario(11, &params).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_bundle(&scenario, dir.path()).unwrap();

        let report = crate::ingest::read_posts(
            &dir.path().join("posts.ndjson"),
            crate::ingest::PostFormat::Ndjson,
        )
        .unwrap();
        assert_eq!(report.posts.len(), 50);
        assert_eq!(report.skipped, 0);

        let region =
            crate::ingest::StudyRegion::from_geojson_file(&dir.path().join("region.geojson"))
                .unwrap();
        assert!(report.posts.iter().all(|p| region.contains(p.lon, p.lat)));

        let frame = region.frame();
        let load = crate::roadnet::load_network(
            &dir.path().join("nodes.csv"),
            &dir.path().join("edges.geojson"),
            &frame,
        )
        .unwrap();
        assert_eq!(load.network.nodes.len(), 256);
        assert_eq!(load.network.edges.len(), 520);
        assert!(load.skipped_self_loops.is_empty());
        assert!(load.skipped_parallel.is_empty());
        assert!(load.unknown_fclass.is_empty());
        // Every edge endpoint agrees with its polyline ends.
        for e in &load.network.edges {
            let u = &load.network.nodes[e.u];
            let first = e.geometry_geo[0];
            assert!((u.lon - first.0).abs() < 1e-9 && (u.lat - first.1).abs() < 1e-9);
        }
    }
}
