//! Thiessen (Voronoi) tessellation of scored sites clipped to the study
//! region, the area-weighted regional sentiment mean, and natural-breaks
//! classification of the resulting values.
//!
//! Construction is per site: intersect bisector half-planes (nearest
//! neighbors first, with an early exit once no further site can cut the
//! cell), then clip the region's rings against the convex cell. Area
//! bookkeeping is outer pieces minus hole pieces, so cell areas sum to
//! the region area.

pub mod jenks;

pub use jenks::{classify, jenks_breaks, ClassBreaks};

use crate::geom::{clip_halfplane, clip_ring_convex, MultiPolygon, Point2, Polygon, Ring};
use crate::num::Real;
use crate::{Error, Result};

/// Default merge radius for coincident posts, meters.
pub const MERGE_DISTANCE_M: f64 = 1.0;

/// One tessellation site: a (possibly merged) scored post in the planar
/// frame.
#[derive(Clone, Debug)]
pub struct Site<T> {
    pub site_id: String,
    pub xy: Point2<T>,
    /// Mean sentiment of the merged posts.
    pub sentiment: T,
    /// Number of posts merged into this site.
    pub multiplicity: usize,
}

/// A site's influence polygon clipped to the region.
#[derive(Clone, Debug)]
pub struct ThiessenCell<T> {
    pub site_id: String,
    pub site_xy: Point2<T>,
    pub sentiment: T,
    pub multiplicity: usize,
    pub area: T,
    /// Clipped geometry; multiple parts when the region's shape cuts the
    /// cell into disjoint pieces.
    pub parts: Vec<Polygon<T>>,
}

/// The full clipped diagram.
#[derive(Clone, Debug)]
pub struct ThiessenDiagram<T> {
    pub cells: Vec<ThiessenCell<T>>,
    /// Region area (the Eq-denominator A), independent of the per-cell
    /// sum so the partition-of-area invariant is a real check.
    pub total_area: T,
}

/// Merges points closer than `tol` into single sites (first point is the
/// anchor; sentiment is the running arithmetic mean). Merge compares each
/// point against existing anchors, earliest anchor wins.
pub fn merge_coincident<T: Real>(points: Vec<(String, Point2<T>, T)>, tol: T) -> Vec<Site<T>> {
    struct Acc<T> {
        site_id: String,
        anchor: Point2<T>,
        sum: T,
        count: usize,
    }
    let mut sites: Vec<Acc<T>> = Vec::new();
    // Spatial hash on tol-sized cells; 3x3 neighborhood covers every
    // candidate within tol of the anchor.
    let mut grid: std::collections::BTreeMap<(i64, i64), Vec<usize>> =
        std::collections::BTreeMap::new();
    let key = |p: Point2<T>| -> (i64, i64) {
        (
            (p.x / tol).floor().to_i64().unwrap_or(0),
            (p.y / tol).floor().to_i64().unwrap_or(0),
        )
    };
    for (id, p, s) in points {
        let (kx, ky) = key(p);
        let mut hit: Option<usize> = None;
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(bucket) = grid.get(&(kx + dx, ky + dy)) {
                    for &i in bucket {
                        if sites[i].anchor.dist(p) < tol {
                            hit = Some(hit.map_or(i, |h| h.min(i)));
                        }
                    }
                }
            }
        }
        match hit {
            Some(i) => {
                sites[i].sum += s;
                sites[i].count += 1;
            }
            None => {
                let i = sites.len();
                sites.push(Acc {
                    site_id: id,
                    anchor: p,
                    sum: s,
                    count: 1,
                });
                grid.entry((kx, ky)).or_default().push(i);
            }
        }
    }
    sites
        .into_iter()
        .map(|a| Site {
            site_id: a.site_id,
            xy: a.anchor,
            sentiment: a.sum / T::from_usize(a.count).unwrap(),
            multiplicity: a.count,
        })
        .collect()
}

/// Builds the clipped Voronoi diagram of `sites` over `region` (planar
/// meters). Every point of the region lands in the cell of its nearest
/// site; cell areas sum to the region area.
pub fn tessellate<T: Real>(
    sites: &[Site<T>],
    region: &MultiPolygon<T>,
) -> Result<ThiessenDiagram<T>> {
    if sites.is_empty() {
        return Err(Error::data("tessellation requires at least one site"));
    }
    let mut coords = std::collections::BTreeSet::new();
    for s in sites {
        if !s.xy.x.is_finite() || !s.xy.y.is_finite() {
            return Err(Error::data(format!(
                "site {} has non-finite coordinates",
                s.site_id
            )));
        }
        if !coords.insert((
            s.xy.x.to_f64().unwrap().to_bits(),
            s.xy.y.to_f64().unwrap().to_bits(),
        )) {
            return Err(Error::data(format!(
                "site {} duplicates another site's coordinates; merge first",
                s.site_id
            )));
        }
        if !region.contains(s.xy) {
            return Err(Error::data(format!(
                "site {} lies outside the region",
                s.site_id
            )));
        }
    }
    let bbox = region
        .bbox()
        .ok_or_else(|| Error::data("region has no geometry"))?;
    let pad = (bbox.width() + bbox.height()) * T::of(0.05) + T::one();
    let outer_rect = bbox.expanded(pad).corners();

    // Neighbor order per site: ascending squared distance, site index as
    // the deterministic tiebreak.
    let two = T::of(2.0);
    let four = T::of(4.0);
    let mut diagram_cells = Vec::with_capacity(sites.len());
    let mut order: Vec<usize> = Vec::new();
    for (i, si) in sites.iter().enumerate() {
        order.clear();
        order.extend((0..sites.len()).filter(|&j| j != i));
        let d2 = |j: usize| (sites[j].xy - si.xy).dot(sites[j].xy - si.xy);
        order.sort_by(|&a, &b| d2(a).partial_cmp(&d2(b)).unwrap().then(a.cmp(&b)));

        let mut cell = outer_rect.clone();
        let mut max_r2 = cell
            .iter()
            .map(|&v| (v - si.xy).dot(v - si.xy))
            .fold(T::zero(), T::max);
        for &j in &order {
            // A site farther than twice the cell radius cannot cut it,
            // and neither can anything after it in the sorted order.
            if d2(j) > four * max_r2 {
                break;
            }
            let n = sites[j].xy - si.xy;
            let c = n.dot((si.xy + sites[j].xy).scale(T::one() / two));
            cell = clip_halfplane(&cell, n, c);
            if cell.is_empty() {
                break;
            }
            max_r2 = cell
                .iter()
                .map(|&v| (v - si.xy).dot(v - si.xy))
                .fold(T::zero(), T::max);
        }

        // Clip the region against the convex cell; holes subtract.
        let mut parts = Vec::new();
        let mut area = T::zero();
        for poly in &region.0 {
            let outer = clip_ring_convex(&poly.outer.0, &cell);
            if outer.len() < 3 {
                continue;
            }
            let outer = Ring::new(outer);
            let outer_area = outer.area();
            let mut holes = Vec::new();
            let mut hole_area = T::zero();
            for h in &poly.holes {
                let piece = clip_ring_convex(&h.0, &cell);
                if piece.len() < 3 {
                    continue;
                }
                let piece = Ring::new(piece);
                hole_area += piece.area();
                holes.push(piece);
            }
            area += outer_area - hole_area;
            parts.push(Polygon::new(outer, holes));
        }
        diagram_cells.push(ThiessenCell {
            site_id: si.site_id.clone(),
            site_xy: si.xy,
            sentiment: si.sentiment,
            multiplicity: si.multiplicity,
            area,
            parts,
        });
    }
    Ok(ThiessenDiagram {
        cells: diagram_cells,
        total_area: region.area(),
    })
}

impl<T: Real> ThiessenDiagram<T> {
    /// Index of the first cell whose geometry contains `p`, if any.
    pub fn cell_containing(&self, p: Point2<T>) -> Option<usize> {
        self.cells
            .iter()
            .position(|c| c.parts.iter().any(|part| part.contains(p)))
    }
}

/// Area-weighted regional mean sentiment over the diagram:
/// sum of (A_i / A) * T_i.
pub fn regional_mean<T: Real>(diagram: &ThiessenDiagram<T>) -> T {
    let a = diagram.total_area;
    if a <= T::zero() {
        return T::zero();
    }
    diagram
        .cells
        .iter()
        .map(|c| c.area / a * c.sentiment)
        .fold(T::zero(), |acc, x| acc + x)
}
