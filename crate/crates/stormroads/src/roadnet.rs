//! Road network loading, the polygon→segment sentiment join, sentiment
//! classification of edges, and the sentiment→weight scaling.
//!
//! The join is length-weighted by default: an edge's sentiment is the
//! mean of the cell sentiments along its polyline, weighted by how much
//! of the polyline lies in each cell. Along any straight segment the
//! nearest-site regions are intervals (cells are convex), so the per-cell
//! portions come from a linear walk over bisector crossings rather than
//! polygon clipping.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufReader, Read as _};
use std::path::Path;

use serde::Deserialize;
use serde_json::Value;

use crate::geom::{polyline_length, segment_ring_crossings, LocalFrame, MultiPolygon, Point2};
use crate::tessellate::{classify, jenks_breaks, ClassBreaks, ThiessenDiagram};
use crate::{Error, Result};

/// Road hierarchy label carried through from the input data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FunctionalClass {
    Interstate,
    StateHighway,
    Arterial,
    Collector,
    Local,
}

impl FunctionalClass {
    /// Parses a class label; `None` for unknown strings (the caller maps
    /// those to `Local` with a warning).
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_lowercase().as_str() {
            "interstate" => Some(Self::Interstate),
            "state_highway" => Some(Self::StateHighway),
            "arterial" => Some(Self::Arterial),
            "collector" => Some(Self::Collector),
            "local" => Some(Self::Local),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Interstate => "interstate",
            Self::StateHighway => "state_highway",
            Self::Arterial => "arterial",
            Self::Collector => "collector",
            Self::Local => "local",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RoadNode {
    pub node_id: String,
    pub lon: f64,
    pub lat: f64,
    /// Projected meters in the shared local frame.
    pub xy: Point2<f64>,
}

#[derive(Debug, Clone)]
pub struct RoadEdge {
    pub edge_id: String,
    /// Endpoint indices into `RoadNetwork::nodes`.
    pub u: usize,
    pub v: usize,
    pub fclass: FunctionalClass,
    /// Polyline in lon/lat, as read.
    pub geometry_geo: Vec<(f64, f64)>,
    /// Polyline projected into the shared local frame.
    pub geometry: Vec<Point2<f64>>,
    /// Projected polyline length in meters.
    pub length: f64,
}

#[derive(Debug, Clone)]
pub struct RoadNetwork {
    pub nodes: Vec<RoadNode>,
    pub edges: Vec<RoadEdge>,
}

impl RoadNetwork {
    pub fn node_index(&self, node_id: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.node_id == node_id)
    }
}

/// Outcome of loading: the cleaned network plus the records that were
/// rejected (by edge id) and the edges whose class label was unknown.
#[derive(Debug)]
pub struct LoadReport {
    pub network: RoadNetwork,
    pub skipped_self_loops: Vec<String>,
    pub skipped_parallel: Vec<String>,
    pub unknown_fclass: Vec<String>,
}

#[derive(Debug, Deserialize)]
struct NodeRow {
    node_id: String,
    lon: f64,
    lat: f64,
}

/// One edge as read from either input format, before graph validation.
struct RawEdge {
    edge_id: String,
    u: String,
    v: String,
    fclass_raw: String,
    geometry_geo: Vec<(f64, f64)>,
}

/// Loads the road network from a nodes CSV (`node_id,lon,lat`) and an
/// edges file: GeoJSON LineString features with `edge_id,u,v,fclass`
/// properties, or CSV `edge_id,u,v,fclass,wkt_linestring`. Self-loops
/// and parallel edges are skipped with warnings; an edge referencing a
/// missing node is fatal.
pub fn load_network(
    nodes_path: &Path,
    edges_path: &Path,
    frame: &LocalFrame<f64>,
) -> Result<LoadReport> {
    let file =
        File::open(nodes_path).map_err(|e| Error::io(nodes_path.display().to_string(), e))?;
    let mut rdr = csv::Reader::from_reader(BufReader::new(file));
    let mut nodes = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    for rec in rdr.deserialize::<NodeRow>() {
        let row = rec.map_err(|e| Error::Csv {
            path: nodes_path.display().to_string(),
            source: e,
        })?;
        if !row.lon.is_finite() || !row.lat.is_finite() {
            return Err(Error::data(format!(
                "node {}: non-finite coordinates",
                row.node_id
            )));
        }
        if index.contains_key(&row.node_id) {
            return Err(Error::data(format!("duplicate node id {}", row.node_id)));
        }
        let xy = frame.project(row.lon, row.lat);
        index.insert(row.node_id.clone(), nodes.len());
        nodes.push(RoadNode {
            node_id: row.node_id,
            lon: row.lon,
            lat: row.lat,
            xy,
        });
    }

    let is_csv = edges_path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let raw_edges = if is_csv {
        read_edges_csv(edges_path)?
    } else {
        read_edges_geojson(edges_path)?
    };

    let mut edges = Vec::new();
    let mut seen_pairs: HashSet<(usize, usize)> = HashSet::new();
    let mut report = LoadReport {
        network: RoadNetwork {
            nodes: Vec::new(),
            edges: Vec::new(),
        },
        skipped_self_loops: Vec::new(),
        skipped_parallel: Vec::new(),
        unknown_fclass: Vec::new(),
    };
    for raw in raw_edges {
        let u = *index
            .get(&raw.u)
            .ok_or_else(|| Error::data(format!("edge {}: unknown node {}", raw.edge_id, raw.u)))?;
        let v = *index
            .get(&raw.v)
            .ok_or_else(|| Error::data(format!("edge {}: unknown node {}", raw.edge_id, raw.v)))?;
        if raw.geometry_geo.len() < 2 {
            return Err(Error::data(format!(
                "edge {}: polyline needs at least 2 points",
                raw.edge_id
            )));
        }
        if u == v {
            log::warn!("edge {}: self-loop, skipped", raw.edge_id);
            report.skipped_self_loops.push(raw.edge_id);
            continue;
        }
        let pair = (u.min(v), u.max(v));
        if !seen_pairs.insert(pair) {
            log::warn!("edge {}: parallel to an earlier edge, skipped", raw.edge_id);
            report.skipped_parallel.push(raw.edge_id);
            continue;
        }
        let fclass = match FunctionalClass::parse(&raw.fclass_raw) {
            Some(c) => c,
            None => {
                log::warn!(
                    "edge {}: unknown fclass {:?}, treating as local",
                    raw.edge_id,
                    raw.fclass_raw
                );
                report.unknown_fclass.push(raw.edge_id.clone());
                FunctionalClass::Local
            }
        };
        let geometry: Vec<Point2<f64>> = raw
            .geometry_geo
            .iter()
            .map(|&(lon, lat)| frame.project(lon, lat))
            .collect();
        let length = polyline_length(&geometry);
        edges.push(RoadEdge {
            edge_id: raw.edge_id,
            u,
            v,
            fclass,
            geometry_geo: raw.geometry_geo,
            geometry,
            length,
        });
    }
    report.network = RoadNetwork { nodes, edges };
    Ok(report)
}

fn read_edges_geojson(path: &Path) -> Result<Vec<RawEdge>> {
    let mut s = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut s))
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    let root: Value = serde_json::from_str(&s).map_err(|e| Error::Json {
        path: path.display().to_string(),
        source: e,
    })?;
    let features = root
        .get("features")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::data(format!("{}: expected a FeatureCollection", path.display())))?;
    let mut out = Vec::with_capacity(features.len());
    for (i, feat) in features.iter().enumerate() {
        let ctx = || format!("{} feature {}", path.display(), i);
        let props = feat.get("properties").and_then(Value::as_object);
        let prop = |k: &str| -> Result<String> {
            props
                .and_then(|p| p.get(k))
                .map(|v| match v {
                    Value::String(s) => s.clone(),
                    other => other.to_string(),
                })
                .ok_or_else(|| Error::data(format!("{}: missing property {k}", ctx())))
        };
        let geom = feat
            .get("geometry")
            .filter(|g| g.get("type").and_then(Value::as_str) == Some("LineString"))
            .ok_or_else(|| Error::data(format!("{}: expected LineString geometry", ctx())))?;
        let coords = geom
            .get("coordinates")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::data(format!("{}: LineString has no coordinates", ctx())))?;
        let mut geometry_geo = Vec::with_capacity(coords.len());
        for pos in coords {
            let pair = pos.as_array().filter(|a| a.len() >= 2);
            let (lon, lat) = pair
                .and_then(|a| Some((a[0].as_f64()?, a[1].as_f64()?)))
                .ok_or_else(|| Error::data(format!("{}: bad coordinate", ctx())))?;
            geometry_geo.push((lon, lat));
        }
        out.push(RawEdge {
            edge_id: prop("edge_id")?,
            u: prop("u")?,
            v: prop("v")?,
            fclass_raw: prop("fclass")?,
            geometry_geo,
        });
    }
    Ok(out)
}

#[derive(Debug, Deserialize)]
struct EdgeCsvRow {
    edge_id: String,
    u: String,
    v: String,
    fclass: String,
    wkt_linestring: String,
}

fn read_edges_csv(path: &Path) -> Result<Vec<RawEdge>> {
    let file = File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut rdr = csv::Reader::from_reader(BufReader::new(file));
    let mut out = Vec::new();
    for rec in rdr.deserialize::<EdgeCsvRow>() {
        let row = rec.map_err(|e| Error::Csv {
            path: path.display().to_string(),
            source: e,
        })?;
        let geometry_geo = parse_wkt_linestring(&row.wkt_linestring).ok_or_else(|| {
            Error::data(format!(
                "edge {}: bad WKT {:?}",
                row.edge_id, row.wkt_linestring
            ))
        })?;
        out.push(RawEdge {
            edge_id: row.edge_id,
            u: row.u,
            v: row.v,
            fclass_raw: row.fclass,
            geometry_geo,
        });
    }
    Ok(out)
}

/// Parses `LINESTRING (lon lat, lon lat, ...)`.
fn parse_wkt_linestring(s: &str) -> Option<Vec<(f64, f64)>> {
    let t = s.trim();
    if !t[..10.min(t.len())].eq_ignore_ascii_case("linestring") {
        return None;
    }
    let body = t[10..].trim().strip_prefix('(')?.strip_suffix(')')?;
    let mut pts = Vec::new();
    for pair in body.split(',') {
        let mut it = pair.split_whitespace();
        let lon: f64 = it.next()?.parse().ok()?;
        let lat: f64 = it.next()?.parse().ok()?;
        if it.next().is_some() {
            return None;
        }
        pts.push((lon, lat));
    }
    Some(pts)
}

/// How polygon sentiment is transferred onto an edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JoinRule {
    /// Length-weighted mean of cell sentiments along the polyline.
    Length,
    /// The sentiment of the cell containing the polyline's midpoint.
    Midpoint,
}

impl JoinRule {
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_lowercase().as_str() {
            "length" => Some(Self::Length),
            "midpoint" => Some(Self::Midpoint),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Length => "length",
            Self::Midpoint => "midpoint",
        }
    }
}

/// Per-edge join result.
#[derive(Debug, Clone)]
pub struct EdgeSentiment {
    pub sentiment: f64,
    /// Meters of the polyline that fell inside the tessellated region.
    pub covered_m: f64,
    pub length_m: f64,
    /// Set when nothing was covered and the regional mean was substituted.
    pub fallback: bool,
}

#[derive(Debug)]
pub struct JoinReport {
    pub per_edge: Vec<EdgeSentiment>,
    /// Total polyline length outside the region, across all edges.
    pub uncovered_m: f64,
}

/// Splits segment `a`→`b` into the sub-intervals of [0, 1] where each
/// site is nearest. Squared distance to a site is quadratic in t with a
/// common leading term, so pairwise comparisons are affine and each site
/// owns at most one interval.
fn nearest_site_intervals(
    a: Point2<f64>,
    b: Point2<f64>,
    sites: &[Point2<f64>],
) -> Vec<(f64, f64, usize)> {
    let d = b - a;
    let dist2_at = |i: usize, t: f64| -> f64 {
        let p = Point2::new(a.x + d.x * t, a.y + d.y * t);
        p.dist(sites[i]).powi(2)
    };
    let argmin_at = |t: f64| -> usize {
        let mut best = 0;
        let mut best_d = dist2_at(0, t);
        for i in 1..sites.len() {
            let di = dist2_at(i, t);
            if di < best_d {
                best = i;
                best_d = di;
            }
        }
        best
    };
    let mut out = Vec::new();
    let mut t = 0.0;
    let mut cur = argmin_at(0.0);
    // Each site owns at most one interval along the line; the bound is a
    // guard against degenerate tie cycling.
    for _ in 0..=sites.len() {
        let mut next_t = 1.0;
        let mut next_site = None;
        let base = dist2_at(cur, 0.0);
        for j in 0..sites.len() {
            if j == cur {
                continue;
            }
            // g(t) = dist2_j(t) - dist2_cur(t) = c + m t; j overtakes when
            // g turns negative, at t* = -c/m with m < 0.
            let c = dist2_at(j, 0.0) - base;
            let m = 2.0 * (d.x * (sites[cur].x - sites[j].x) + d.y * (sites[cur].y - sites[j].y));
            if m < 0.0 {
                let star = -c / m;
                if star > t + 1e-12 && star < next_t - 1e-15 {
                    next_t = star;
                    next_site = Some(j);
                }
            }
        }
        match next_site {
            Some(j) if next_t < 1.0 => {
                out.push((t, next_t, cur));
                t = next_t;
                cur = j;
            }
            _ => {
                out.push((t, 1.0, cur));
                return out;
            }
        }
    }
    out.push((t, 1.0, cur));
    out
}

/// Sub-intervals of [0, 1] along `a`→`b` that lie inside the region
/// (even-odd over all rings, holes excluded).
fn region_inside_intervals(
    a: Point2<f64>,
    b: Point2<f64>,
    region: &MultiPolygon<f64>,
) -> Vec<(f64, f64)> {
    let mut cuts = vec![0.0, 1.0];
    for ring in region.rings() {
        segment_ring_crossings(a, b, ring, &mut cuts);
    }
    cuts.retain(|t| (0.0..=1.0).contains(t));
    cuts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    cuts.dedup_by(|x, y| (*x - *y).abs() < 1e-12);
    let d = b - a;
    let mut out = Vec::new();
    for w in cuts.windows(2) {
        let (t0, t1) = (w[0], w[1]);
        if t1 - t0 < 1e-12 {
            continue;
        }
        let mid = 0.5 * (t0 + t1);
        if region.contains(Point2::new(a.x + d.x * mid, a.y + d.y * mid)) {
            out.push((t0, t1));
        }
    }
    out
}

/// Transfers cell sentiment onto every edge. Edges with no covered
/// length get the diagram's regional mean and are flagged.
pub fn spatial_join(
    network: &RoadNetwork,
    diagram: &ThiessenDiagram<f64>,
    region: &MultiPolygon<f64>,
    rule: JoinRule,
) -> JoinReport {
    let sites: Vec<Point2<f64>> = diagram.cells.iter().map(|c| c.site_xy).collect();
    let fallback_value = crate::tessellate::regional_mean(diagram);
    let mut per_edge = Vec::with_capacity(network.edges.len());
    let mut uncovered_m = 0.0;
    for edge in &network.edges {
        let result = match rule {
            JoinRule::Length => join_edge_by_length(edge, diagram, &sites, region, fallback_value),
            JoinRule::Midpoint => join_edge_by_midpoint(edge, diagram, fallback_value),
        };
        uncovered_m += result.length_m - result.covered_m;
        per_edge.push(result);
    }
    JoinReport {
        per_edge,
        uncovered_m,
    }
}

fn join_edge_by_length(
    edge: &RoadEdge,
    diagram: &ThiessenDiagram<f64>,
    sites: &[Point2<f64>],
    region: &MultiPolygon<f64>,
    fallback_value: f64,
) -> EdgeSentiment {
    let mut covered = 0.0;
    let mut weighted_sum = 0.0;
    for seg in edge.geometry.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        let seg_len = a.dist(b);
        if seg_len == 0.0 {
            continue;
        }
        let inside = region_inside_intervals(a, b, region);
        if inside.is_empty() {
            continue;
        }
        let pieces = nearest_site_intervals(a, b, sites);
        for &(i0, i1) in &inside {
            for &(p0, p1, site) in &pieces {
                let lo = i0.max(p0);
                let hi = i1.min(p1);
                if hi > lo {
                    let len = (hi - lo) * seg_len;
                    covered += len;
                    weighted_sum += len * diagram.cells[site].sentiment;
                }
            }
        }
    }
    if covered > 1e-9 {
        EdgeSentiment {
            sentiment: weighted_sum / covered,
            covered_m: covered,
            length_m: edge.length,
            fallback: false,
        }
    } else {
        EdgeSentiment {
            sentiment: fallback_value,
            covered_m: 0.0,
            length_m: edge.length,
            fallback: true,
        }
    }
}

/// The point at half the polyline's length.
fn polyline_midpoint(pts: &[Point2<f64>]) -> Point2<f64> {
    let total = polyline_length(pts);
    if total == 0.0 {
        return pts[0];
    }
    let mut remaining = total / 2.0;
    for seg in pts.windows(2) {
        let len = seg[0].dist(seg[1]);
        if len >= remaining && len > 0.0 {
            let f = remaining / len;
            return Point2::new(
                seg[0].x + (seg[1].x - seg[0].x) * f,
                seg[0].y + (seg[1].y - seg[0].y) * f,
            );
        }
        remaining -= len;
    }
    *pts.last().unwrap()
}

fn join_edge_by_midpoint(
    edge: &RoadEdge,
    diagram: &ThiessenDiagram<f64>,
    fallback_value: f64,
) -> EdgeSentiment {
    let mid = polyline_midpoint(&edge.geometry);
    match diagram.cell_containing(mid) {
        Some(i) => EdgeSentiment {
            sentiment: diagram.cells[i].sentiment,
            covered_m: edge.length,
            length_m: edge.length,
            fallback: false,
        },
        None => EdgeSentiment {
            sentiment: fallback_value,
            covered_m: 0.0,
            length_m: edge.length,
            fallback: true,
        },
    }
}

/// Maps edge sentiments to weights in [0, 1], most negative sentiment to
/// weight 1. Returns the weights and whether the degenerate all-equal
/// rule (all 0.5) fired.
pub fn scale_weights(sentiments: &[f64]) -> Result<(Vec<f64>, bool)> {
    if sentiments.is_empty() {
        return Err(Error::data("cannot scale weights of an empty edge set"));
    }
    if sentiments.iter().any(|s| !s.is_finite()) {
        return Err(Error::data("non-finite edge sentiment"));
    }
    let s_min = sentiments.iter().cloned().fold(f64::INFINITY, f64::min);
    let s_max = sentiments.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if s_min == s_max {
        return Ok((vec![0.5; sentiments.len()], true));
    }
    let span = s_max - s_min;
    Ok((
        sentiments.iter().map(|s| (s_max - s) / span).collect(),
        false,
    ))
}

/// Jenks classification of edge sentiments. `k` is clamped to the number
/// of distinct values; the effective k is reported alongside.
#[derive(Debug, Clone)]
pub struct EdgeClasses {
    pub classes: Vec<usize>,
    pub breaks: ClassBreaks<f64>,
    pub k_effective: usize,
    /// Values above the last bound that were clamped into class k.
    pub clamped: usize,
}

pub fn classify_edges(sentiments: &[f64], k: usize) -> Result<EdgeClasses> {
    if k == 0 {
        return Err(Error::config("class count must be at least 1"));
    }
    let mut distinct: Vec<f64> = sentiments.to_vec();
    distinct.sort_by(|a, b| a.partial_cmp(b).unwrap());
    distinct.dedup();
    let k_effective = k.min(distinct.len()).max(1);
    let breaks = jenks_breaks(sentiments, k_effective)?;
    let (classes, clamped) = classify(sentiments, &breaks);
    Ok(EdgeClasses {
        classes,
        breaks,
        k_effective,
        clamped,
    })
}
