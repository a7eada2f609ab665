//! Post ingestion: reading geotagged posts from NDJSON or CSV,
//! de-duplication, study-region filtering, and coverage-grid planning.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, Read as _};
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::geom::{Bbox, LocalFrame, MultiPolygon, Point2, Polygon, Ring};
use crate::num::METERS_PER_MILE;
use crate::{Error, Result};

/// One geotagged post. `ts` is always UTC; serialization uses RFC 3339
/// (`2020-10-27T14:00:00Z`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeoPost {
    pub id: String,
    pub author_id: String,
    pub ts: DateTime<Utc>,
    pub lon: f64,
    pub lat: f64,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lang: Option<String>,
}

impl GeoPost {
    /// Schema-level validity: coordinates in range and a non-empty id.
    fn is_valid(&self) -> bool {
        !self.id.is_empty()
            && self.lon.is_finite()
            && self.lat.is_finite()
            && (-180.0..=180.0).contains(&self.lon)
            && (-90.0..=90.0).contains(&self.lat)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PostFormat {
    Ndjson,
    Csv,
}

impl PostFormat {
    /// Pick a format from a file extension; `.csv` is CSV, anything else
    /// is treated as NDJSON.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => PostFormat::Csv,
            _ => PostFormat::Ndjson,
        }
    }
}

/// Result of reading a post file: valid posts in input order plus the
/// number of malformed records that were skipped.
#[derive(Debug)]
pub struct ReadReport {
    pub posts: Vec<GeoPost>,
    pub skipped: usize,
}

/// Reads posts from `path`. Malformed records are counted and skipped
/// with a warning; an unreadable file is fatal.
pub fn read_posts(path: &Path, format: PostFormat) -> Result<ReadReport> {
    match format {
        PostFormat::Ndjson => read_posts_ndjson(path),
        PostFormat::Csv => read_posts_csv(path),
    }
}

fn read_posts_ndjson(path: &Path) -> Result<ReadReport> {
    let file = File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let reader = BufReader::new(file);
    let mut posts = Vec::new();
    let mut skipped = 0usize;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path.display().to_string(), e))?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<GeoPost>(&line) {
            Ok(p) if p.is_valid() => posts.push(p),
            Ok(_) => {
                log::warn!(
                    "{}:{}: field out of range, record skipped",
                    path.display(),
                    lineno + 1
                );
                skipped += 1;
            }
            Err(e) => {
                log::warn!("{}:{}: {}, record skipped", path.display(), lineno + 1, e);
                skipped += 1;
            }
        }
    }
    Ok(ReadReport { posts, skipped })
}

/// CSV row shape; `ts` is parsed separately so a bad timestamp skips only
/// that row instead of aborting the read.
#[derive(Debug, Deserialize)]
struct CsvPostRow {
    id: String,
    author_id: String,
    ts: String,
    lon: f64,
    lat: f64,
    text: String,
    #[serde(default)]
    lang: Option<String>,
}

fn read_posts_csv(path: &Path) -> Result<ReadReport> {
    let file = File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut rdr = csv::Reader::from_reader(BufReader::new(file));
    let mut posts = Vec::new();
    let mut skipped = 0usize;
    for (recno, rec) in rdr.deserialize::<CsvPostRow>().enumerate() {
        let row = match rec {
            Ok(r) => r,
            Err(e) => {
                log::warn!("{} record {}: {}, skipped", path.display(), recno + 1, e);
                skipped += 1;
                continue;
            }
        };
        let ts = match DateTime::parse_from_rfc3339(&row.ts) {
            Ok(t) => t.with_timezone(&Utc),
            Err(e) => {
                log::warn!(
                    "{} record {}: bad ts {:?}: {}, skipped",
                    path.display(),
                    recno + 1,
                    row.ts,
                    e
                );
                skipped += 1;
                continue;
            }
        };
        let post = GeoPost {
            id: row.id,
            author_id: row.author_id,
            ts,
            lon: row.lon,
            lat: row.lat,
            text: row.text,
            lang: row.lang.filter(|l| !l.is_empty()),
        };
        if post.is_valid() {
            posts.push(post);
        } else {
            log::warn!(
                "{} record {}: field out of range, skipped",
                path.display(),
                recno + 1
            );
            skipped += 1;
        }
    }
    Ok(ReadReport { posts, skipped })
}

/// Dedup key normalization: lowercase, whitespace collapsed to single
/// spaces.
fn normalize_dedup_text(text: &str) -> String {
    text.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

/// Removes duplicate posts, keeping the first occurrence. A post is a
/// duplicate when its id was already seen, or when another post by the
/// same author with the same normalized text and timestamp was.
pub fn dedup(posts: &[GeoPost]) -> Vec<GeoPost> {
    let mut seen_ids: HashSet<&str> = HashSet::new();
    let mut seen_keys: HashSet<(&str, String, DateTime<Utc>)> = HashSet::new();
    let mut out = Vec::new();
    for p in posts {
        let id_dup = !seen_ids.insert(&p.id);
        let key_dup = !seen_keys.insert((&p.author_id, normalize_dedup_text(&p.text), p.ts));
        if !(id_dup || key_dup) {
            out.push(p.clone());
        }
    }
    out
}

/// Study region boundary in lon/lat degrees. Within each polygon the
/// first ring is the outer boundary and the rest are holes.
#[derive(Debug, Clone)]
pub struct StudyRegion {
    pub boundary: MultiPolygon<f64>,
}

impl StudyRegion {
    pub fn from_geojson_file(path: &Path) -> Result<Self> {
        let mut s = String::new();
        File::open(path)
            .and_then(|mut f| f.read_to_string(&mut s))
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::from_geojson_str(&s, &path.display().to_string())
    }

    /// Accepts a FeatureCollection, a Feature, or a bare geometry; the
    /// geometry must be a Polygon or MultiPolygon.
    pub fn from_geojson_str(s: &str, origin: &str) -> Result<Self> {
        let root: Value = serde_json::from_str(s).map_err(|e| Error::Json {
            path: origin.to_string(),
            source: e,
        })?;
        let geometry = find_area_geometry(&root).ok_or_else(|| {
            Error::data(format!("{origin}: no Polygon/MultiPolygon geometry found"))
        })?;
        let boundary = parse_area_geometry(geometry, origin)?;
        if boundary.area() <= 0.0 {
            return Err(Error::data(format!("{origin}: region has zero area")));
        }
        Ok(StudyRegion { boundary })
    }

    /// Boundary-inclusive even-odd containment in lon/lat space.
    pub fn contains(&self, lon: f64, lat: f64) -> bool {
        self.boundary.contains(Point2::new(lon, lat))
    }

    pub fn bbox(&self) -> Bbox<f64> {
        self.boundary.bbox().expect("region rings are non-empty")
    }

    /// Area-weighted centroid; the anchor for the local planar frame used
    /// by grid planning, tessellation, and the road join.
    pub fn centroid(&self) -> Point2<f64> {
        self.boundary
            .centroid()
            .expect("region rings are non-empty")
    }

    pub fn frame(&self) -> LocalFrame<f64> {
        let c = self.centroid();
        LocalFrame::new(c.x, c.y)
    }

    /// The boundary projected into `frame`, for planar work.
    pub fn project(&self, frame: &LocalFrame<f64>) -> MultiPolygon<f64> {
        let project_ring =
            |r: &Ring<f64>| Ring::new(r.0.iter().map(|p| frame.project(p.x, p.y)).collect());
        MultiPolygon(
            self.boundary
                .0
                .iter()
                .map(|poly| {
                    Polygon::new(
                        project_ring(&poly.outer),
                        poly.holes.iter().map(project_ring).collect(),
                    )
                })
                .collect(),
        )
    }
}

/// Finds the first Polygon/MultiPolygon geometry in a GeoJSON document.
fn find_area_geometry(v: &Value) -> Option<&Value> {
    match v.get("type").and_then(Value::as_str) {
        Some("FeatureCollection") => v
            .get("features")?
            .as_array()?
            .iter()
            .find_map(find_area_geometry),
        Some("Feature") => find_area_geometry(v.get("geometry")?),
        Some("Polygon") | Some("MultiPolygon") => Some(v),
        _ => None,
    }
}

fn parse_ring(coords: &Value, origin: &str) -> Result<Ring<f64>> {
    let arr = coords
        .as_array()
        .ok_or_else(|| Error::data(format!("{origin}: ring is not an array")))?;
    let mut pts = Vec::with_capacity(arr.len());
    for pos in arr {
        let pair = pos
            .as_array()
            .filter(|a| a.len() >= 2)
            .ok_or_else(|| Error::data(format!("{origin}: position is not [lon, lat]")))?;
        let lon = pair[0].as_f64();
        let lat = pair[1].as_f64();
        match (lon, lat) {
            (Some(lon), Some(lat)) if lon.is_finite() && lat.is_finite() => {
                pts.push(Point2::new(lon, lat));
            }
            _ => return Err(Error::data(format!("{origin}: non-numeric coordinate"))),
        }
    }
    // GeoJSON rings repeat the first point at the end; ring storage is open.
    if pts.len() >= 2 && pts.first() == pts.last() {
        pts.pop();
    }
    if pts.len() < 3 {
        return Err(Error::data(format!(
            "{origin}: ring with fewer than 3 distinct points"
        )));
    }
    Ok(Ring::new(pts))
}

fn parse_polygon_rings(rings: &Value, origin: &str) -> Result<Polygon<f64>> {
    let arr = rings
        .as_array()
        .ok_or_else(|| Error::data(format!("{origin}: polygon coordinates are not an array")))?;
    if arr.is_empty() {
        return Err(Error::data(format!("{origin}: polygon with no rings")));
    }
    let outer = parse_ring(&arr[0], origin)?;
    let holes = arr[1..]
        .iter()
        .map(|r| parse_ring(r, origin))
        .collect::<Result<Vec<_>>>()?;
    Ok(Polygon::new(outer, holes))
}

fn parse_area_geometry(geom: &Value, origin: &str) -> Result<MultiPolygon<f64>> {
    let coords = geom
        .get("coordinates")
        .ok_or_else(|| Error::data(format!("{origin}: geometry has no coordinates")))?;
    match geom.get("type").and_then(Value::as_str) {
        Some("Polygon") => Ok(MultiPolygon(vec![parse_polygon_rings(coords, origin)?])),
        Some("MultiPolygon") => {
            let arr = coords.as_array().ok_or_else(|| {
                Error::data(format!(
                    "{origin}: MultiPolygon coordinates are not an array"
                ))
            })?;
            let polys = arr
                .iter()
                .map(|p| parse_polygon_rings(p, origin))
                .collect::<Result<Vec<_>>>()?;
            if polys.is_empty() {
                return Err(Error::data(format!(
                    "{origin}: MultiPolygon with no polygons"
                )));
            }
            Ok(MultiPolygon(polys))
        }
        other => Err(Error::data(format!(
            "{origin}: unsupported geometry type {other:?}"
        ))),
    }
}

/// Keeps exactly the posts whose location is inside or on the region
/// boundary.
pub fn filter_region(posts: &[GeoPost], region: &StudyRegion) -> Vec<GeoPost> {
    posts
        .iter()
        .filter(|p| region.contains(p.lon, p.lat))
        .cloned()
        .collect()
}

/// Square lattice of query centers jointly covering a region with
/// fixed-radius circles.
#[derive(Debug, Clone)]
pub struct CoverageGrid {
    /// Centers as (lon, lat), row-major from the bounding box minimum.
    pub centers: Vec<(f64, f64)>,
    pub radius_miles: f64,
    pub spacing_miles: f64,
}

/// Plans a square lattice of circle centers covering the region's
/// bounding box: lattice anchored at the box minimum, spanning one row
/// and column past the maximum. Requires spacing ≤ radius·√2, the
/// condition under which a square lattice of circles leaves no gaps.
pub fn plan_grid(
    region: &StudyRegion,
    radius_miles: f64,
    spacing_miles: f64,
) -> Result<CoverageGrid> {
    let positive = |x: f64| x.is_finite() && x > 0.0;
    if !positive(radius_miles) || !positive(spacing_miles) {
        return Err(Error::config(
            "radius_miles and spacing_miles must be positive",
        ));
    }
    if spacing_miles > radius_miles * std::f64::consts::SQRT_2 * (1.0 + 1e-12) {
        return Err(Error::config(format!(
            "spacing {spacing_miles} mi exceeds radius*sqrt(2) = {:.6} mi; circles would leave gaps",
            radius_miles * std::f64::consts::SQRT_2
        )));
    }
    let frame = region.frame();
    let bbox = region.bbox();
    let lo = frame.project(bbox.min.x, bbox.min.y);
    let hi = frame.project(bbox.max.x, bbox.max.y);
    let spacing_m = spacing_miles * METERS_PER_MILE;
    // Snap near-integer extents down so a region exactly n cells wide
    // gets n+1 lattice columns, not n+2 from projection round-off.
    let steps = |extent: f64| ((extent / spacing_m - 1e-9).ceil().max(1.0)) as usize;
    let nx = steps(hi.x - lo.x);
    let ny = steps(hi.y - lo.y);
    let mut centers = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            let p = Point2::new(lo.x + spacing_m * i as f64, lo.y + spacing_m * j as f64);
            centers.push(frame.unproject(p));
        }
    }
    Ok(CoverageGrid {
        centers,
        radius_miles,
        spacing_miles,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::haversine_m;
    use crate::testkit;
    use std::io::Write;

    fn post(id: &str, author: &str, ts: &str, lon: f64, lat: f64, text: &str) -> GeoPost {
        GeoPost {
            id: id.to_string(),
            author_id: author.to_string(),
            ts: DateTime::parse_from_rfc3339(ts)
                .unwrap()
                .with_timezone(&Utc),
            lon,
            lat,
            text: text.to_string(),
            lang: None,
        }
    }

    fn write_temp(content: &str, ext: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::Builder::new().suffix(ext).tempfile().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn ndjson_round_trip_is_bit_equal() {
        let lines = [
            r#"{"id":"a","author_id":"u1","ts":"2020-10-27T14:00:00Z","lon":-97.5,"lat":35.4,"text":"ice storm"}"#,
            r#"{"id":"b","author_id":"u2","ts":"2020-10-27T15:30:00Z","lon":-97.25,"lat":35.5,"text":"cold out","lang":"en"}"#,
            r#"{"id":"c","author_id":"u3","ts":"2020-11-01T09:00:00Z","lon":-98.0,"lat":36.0,"text":"power is back"}"#,
        ];
        let f = write_temp(&lines.join("\n"), ".ndjson");
        let rep = read_posts(f.path(), PostFormat::Ndjson).unwrap();
        assert_eq!(rep.skipped, 0);
        assert_eq!(rep.posts.len(), 3);
        for (line, p) in lines.iter().zip(&rep.posts) {
            assert_eq!(*line, serde_json::to_string(p).unwrap());
        }
    }

    #[test]
    fn ndjson_skips_malformed_records() {
        let content = concat!(
            r#"{"id":"a","author_id":"u1","ts":"2020-10-27T14:00:00Z","lon":-97.5,"lat":35.4,"text":"ok"}"#,
            "\n",
            r#"{"id":"b","author_id":"u2","ts":"2020-10-27T14:00:00Z","lon":-97.5,"text":"missing lat"}"#,
            "\n",
            r#"{"id":"c","author_id":"u3","ts":"2020-10-27T14:00:00Z","lon":-997.5,"lat":35.4,"text":"lon out of range"}"#,
        );
        let f = write_temp(content, ".ndjson");
        let rep = read_posts(f.path(), PostFormat::Ndjson).unwrap();
        assert_eq!(rep.posts.len(), 1);
        assert_eq!(rep.skipped, 2);
        assert_eq!(rep.posts[0].id, "a");
    }

    #[test]
    fn empty_file_reads_empty() {
        let f = write_temp("", ".ndjson");
        let rep = read_posts(f.path(), PostFormat::Ndjson).unwrap();
        assert!(rep.posts.is_empty());
        assert_eq!(rep.skipped, 0);
    }

    #[test]
    fn csv_reads_quoted_fields_and_skips_bad_ts() {
        let content = "id,author_id,ts,lon,lat,text,lang\n\
                       a,u1,2020-10-27T14:00:00Z,-97.5,35.4,\"hello, world\",en\n\
                       b,u2,not-a-time,-97.5,35.4,oops,\n\
                       c,u3,2020-10-28T00:00:00Z,-97.6,35.5,fine,\n";
        let f = write_temp(content, ".csv");
        let rep = read_posts(f.path(), PostFormat::Csv).unwrap();
        assert_eq!(rep.posts.len(), 2);
        assert_eq!(rep.skipped, 1);
        assert_eq!(rep.posts[0].text, "hello, world");
        assert_eq!(rep.posts[0].lang.as_deref(), Some("en"));
        assert_eq!(rep.posts[1].lang, None);
    }

    #[test]
    fn dedup_drops_same_id() {
        let posts = vec![
            post("a", "u1", "2020-10-27T14:00:00Z", -97.5, 35.4, "first"),
            post(
                "a",
                "u2",
                "2020-10-27T15:00:00Z",
                -97.5,
                35.4,
                "second body",
            ),
        ];
        let out = dedup(&posts);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].text, "first");
    }

    #[test]
    fn dedup_drops_same_author_text_ts() {
        let posts = vec![
            post(
                "a",
                "u1",
                "2020-10-27T14:00:00Z",
                -97.5,
                35.4,
                "Ice  Storm tonight",
            ),
            post(
                "b",
                "u1",
                "2020-10-27T14:00:00Z",
                -97.6,
                35.5,
                "ice storm TONIGHT",
            ),
            post(
                "c",
                "u1",
                "2020-10-27T14:00:01Z",
                -97.6,
                35.5,
                "ice storm tonight",
            ),
        ];
        let out = dedup(&posts);
        assert_eq!(
            out.iter().map(|p| p.id.as_str()).collect::<Vec<_>>(),
            ["a", "c"]
        );
    }

    #[test]
    fn dedup_is_idempotent_and_order_stable() {
        let mut rng = testkit::seeded_rng(31);
        let mut posts = Vec::new();
        for i in 0..100 {
            let id = format!("id{}", (testkit::unit_f64(&mut rng) * 40.0) as u32);
            let author = format!("u{}", (testkit::unit_f64(&mut rng) * 5.0) as u32);
            let text = format!("text {}", (testkit::unit_f64(&mut rng) * 8.0) as u32);
            let _ = i;
            posts.push(post(
                &id,
                &author,
                "2020-10-27T14:00:00Z",
                -97.5,
                35.4,
                &text,
            ));
        }
        let once = dedup(&posts);
        let twice = dedup(&once);
        assert_eq!(once, twice);
        // Order stability: kept posts appear in the same relative order as input.
        let mut idx = 0;
        for p in &posts {
            if idx < once.len() && *p == once[idx] {
                idx += 1;
            }
        }
        assert_eq!(idx, once.len());
    }

    fn oklahoma_region() -> StudyRegion {
        StudyRegion::from_geojson_str(include_str!("../data/oklahoma.geojson"), "oklahoma").unwrap()
    }

    #[test]
    fn region_parses_feature_collection_polygon() {
        let region = oklahoma_region();
        assert_eq!(region.boundary.0.len(), 1);
        let c = region.centroid();
        assert!(region.contains(c.x, c.y));
    }

    #[test]
    fn region_parses_bare_multipolygon_with_hole() {
        let s = r#"{"type":"MultiPolygon","coordinates":[[
            [[0.0,0.0],[10.0,0.0],[10.0,10.0],[0.0,10.0],[0.0,0.0]],
            [[4.0,4.0],[6.0,4.0],[6.0,6.0],[4.0,6.0],[4.0,4.0]]
        ]]}"#;
        let region = StudyRegion::from_geojson_str(s, "test").unwrap();
        assert!(region.contains(1.0, 1.0));
        assert!(!region.contains(5.0, 5.0), "hole interior is outside");
        assert!(region.contains(5.0, 4.0), "hole boundary counts as inside");
        assert!(!region.contains(11.0, 5.0));
    }

    #[test]
    fn filter_region_matches_point_in_polygon_oracle() {
        let region = oklahoma_region();
        let rings: Vec<Vec<(f64, f64)>> = region
            .boundary
            .rings()
            .map(|r| r.0.iter().map(|p| (p.x, p.y)).collect())
            .collect();
        let bbox = region.bbox();
        let mut rng = testkit::seeded_rng(77);
        let mut posts = Vec::new();
        for i in 0..1000 {
            let lon = testkit::uniform(&mut rng, bbox.min.x - 0.5, bbox.max.x + 0.5);
            let lat = testkit::uniform(&mut rng, bbox.min.y - 0.5, bbox.max.y + 0.5);
            posts.push(post(
                &format!("p{i}"),
                "u",
                "2020-10-27T14:00:00Z",
                lon,
                lat,
                "x",
            ));
        }
        let inside = filter_region(&posts, &region);
        let kept: HashSet<&str> = inside.iter().map(|p| p.id.as_str()).collect();
        for p in &posts {
            let oracle = testkit::oracle_point_in_rings(&rings, (p.lon, p.lat));
            assert_eq!(
                kept.contains(p.id.as_str()),
                oracle,
                "disagreement at ({}, {})",
                p.lon,
                p.lat
            );
        }
    }

    /// A square region measuring `side_m` per edge in the local frame.
    fn square_region(side_m: f64) -> StudyRegion {
        let frame = LocalFrame::new(-97.5, 35.4);
        let h = side_m / 2.0;
        let corners = [(-h, -h), (h, -h), (h, h), (-h, h)];
        let mut coords: Vec<Vec<f64>> = corners
            .iter()
            .map(|&(x, y)| {
                let (lon, lat) = frame.unproject(Point2::new(x, y));
                vec![lon, lat]
            })
            .collect();
        coords.push(coords[0].clone());
        let json = serde_json::json!({ "type": "Polygon", "coordinates": [coords] });
        StudyRegion::from_geojson_str(&json.to_string(), "square").unwrap()
    }

    #[test]
    fn plan_grid_50_mile_square_gives_3_by_3() {
        let region = square_region(50.0 * METERS_PER_MILE);
        let grid = plan_grid(&region, 25.0, 25.0).unwrap();
        assert_eq!(grid.centers.len(), 9);
    }

    #[test]
    fn plan_grid_degenerate_region_gives_4_corners() {
        let region = square_region(0.5 * METERS_PER_MILE);
        let grid = plan_grid(&region, 25.0, 25.0).unwrap();
        assert_eq!(grid.centers.len(), 4);
    }

    #[test]
    fn plan_grid_rejects_gappy_spacing() {
        let region = square_region(50.0 * METERS_PER_MILE);
        let err = plan_grid(&region, 25.0, 40.0).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn grid_covers_sampled_region_points() {
        let region = oklahoma_region();
        let grid = plan_grid(&region, 25.0, 25.0).unwrap();
        let bbox = region.bbox();
        let mut rng = testkit::seeded_rng(5150);
        let radius_m = grid.radius_miles * METERS_PER_MILE;
        let mut checked = 0;
        while checked < 2000 {
            let lon = testkit::uniform(&mut rng, bbox.min.x, bbox.max.x);
            let lat = testkit::uniform(&mut rng, bbox.min.y, bbox.max.y);
            if !region.contains(lon, lat) {
                continue;
            }
            checked += 1;
            let min_d = grid
                .centers
                .iter()
                .map(|&(clon, clat)| haversine_m(lon, lat, clon, clat))
                .fold(f64::INFINITY, f64::min);
            assert!(
                min_d <= radius_m * (1.0 + 1e-9),
                "point ({lon}, {lat}) is {min_d} m from the nearest center"
            );
        }
    }

    #[test]
    fn oklahoma_grid_center_count_near_213() {
        let region = oklahoma_region();
        let grid = plan_grid(&region, 25.0, 25.0).unwrap();
        let n = grid.centers.len() as f64;
        assert!(
            (n - 213.0).abs() <= 213.0 * 0.15,
            "center count {n} outside 213 +/- 15%"
        );
    }

    #[test]
    fn haversine_symmetry_and_triangle_inequality() {
        let mut rng = testkit::seeded_rng(99);
        for _ in 0..200 {
            let pts: Vec<(f64, f64)> = (0..3)
                .map(|_| {
                    (
                        testkit::uniform(&mut rng, -103.0, -94.0),
                        testkit::uniform(&mut rng, 33.0, 37.0),
                    )
                })
                .collect();
            let d01 = haversine_m(pts[0].0, pts[0].1, pts[1].0, pts[1].1);
            let d10 = haversine_m(pts[1].0, pts[1].1, pts[0].0, pts[0].1);
            let d12 = haversine_m(pts[1].0, pts[1].1, pts[2].0, pts[2].1);
            let d02 = haversine_m(pts[0].0, pts[0].1, pts[2].0, pts[2].1);
            assert!((d01 - d10).abs() <= 1e-9 * d01.max(1.0));
            assert!(d02 <= d01 + d12 + 1e-9 * (d01 + d12).max(1.0));
            assert_eq!(haversine_m(pts[0].0, pts[0].1, pts[0].0, pts[0].1), 0.0);
        }
    }
}
