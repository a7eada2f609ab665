//! Planar geometry kernel: points, rings, polygons with holes, convex
//! clipping, and the equidistant-cylindrical local frame used to project
//! geographic coordinates into meters.
//!
//! Conventions:
//! - rings are stored open (no repeated closing vertex) and treated as
//!   implicitly closed;
//! - polygon containment is even-odd and boundary-inclusive;
//! - areas are in the square of the input unit (m² after projection).

use std::ops::{Add, Mul, Neg, Sub};

use crate::num::{Real, EARTH_RADIUS_M};

/// A point or vector in the plane.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Point2<T> {
    pub x: T,
    pub y: T,
}

impl<T: Real> Point2<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    pub fn dot(self, o: Self) -> T {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the cross product `self × o`.
    pub fn cross(self, o: Self) -> T {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> T {
        self.dot(self).sqrt()
    }

    pub fn dist(self, o: Self) -> T {
        (self - o).norm()
    }

    pub fn scale(self, k: T) -> Self {
        Self::new(self.x * k, self.y * k)
    }

    pub fn mid(self, o: Self) -> Self {
        Self::new((self.x + o.x) / T::of(2.0), (self.y + o.y) / T::of(2.0))
    }
}

impl<T: Real> Add for Point2<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y)
    }
}

impl<T: Real> Sub for Point2<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y)
    }
}

impl<T: Real> Neg for Point2<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y)
    }
}

impl<T: Real> Mul<T> for Point2<T> {
    type Output = Self;
    fn mul(self, k: T) -> Self {
        self.scale(k)
    }
}

/// Axis-aligned bounding box.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bbox<T> {
    pub min: Point2<T>,
    pub max: Point2<T>,
}

impl<T: Real> Bbox<T> {
    pub fn of_points<I: IntoIterator<Item = Point2<T>>>(pts: I) -> Option<Self> {
        let mut it = pts.into_iter();
        let first = it.next()?;
        let mut bb = Bbox {
            min: first,
            max: first,
        };
        for p in it {
            bb.include(p);
        }
        Some(bb)
    }

    pub fn include(&mut self, p: Point2<T>) {
        self.min.x = self.min.x.min(p.x);
        self.min.y = self.min.y.min(p.y);
        self.max.x = self.max.x.max(p.x);
        self.max.y = self.max.y.max(p.y);
    }

    pub fn width(&self) -> T {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> T {
        self.max.y - self.min.y
    }

    /// Corners as a CCW rectangle ring.
    pub fn corners(&self) -> Vec<Point2<T>> {
        vec![
            self.min,
            Point2::new(self.max.x, self.min.y),
            self.max,
            Point2::new(self.min.x, self.max.y),
        ]
    }

    pub fn expanded(&self, pad: T) -> Self {
        let d = Point2::new(pad, pad);
        Bbox {
            min: self.min - d,
            max: self.max + d,
        }
    }
}

/// Closed ring stored without the repeated closing vertex.
#[derive(Clone, Debug, PartialEq)]
pub struct Ring<T>(pub Vec<Point2<T>>);

impl<T: Real> Ring<T> {
    /// Builds a ring, dropping a duplicated closing vertex if present.
    pub fn new(mut pts: Vec<Point2<T>>) -> Self {
        if pts.len() > 1 && pts.first() == pts.last() {
            pts.pop();
        }
        Ring(pts)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Edges as (start, end) pairs, wrapping around.
    pub fn edges(&self) -> impl Iterator<Item = (Point2<T>, Point2<T>)> + '_ {
        let n = self.0.len();
        (0..n).map(move |i| (self.0[i], self.0[(i + 1) % n]))
    }

    /// Shoelace area, positive for counter-clockwise orientation.
    pub fn signed_area(&self) -> T {
        let mut acc = T::zero();
        for (a, b) in self.edges() {
            acc += a.cross(b);
        }
        acc / T::of(2.0)
    }

    pub fn area(&self) -> T {
        self.signed_area().abs()
    }

    pub fn is_ccw(&self) -> bool {
        self.signed_area() > T::zero()
    }

    /// Area centroid; falls back to the vertex mean for degenerate rings.
    pub fn centroid(&self) -> Point2<T> {
        let a = self.signed_area();
        if a.abs() <= T::epsilon() {
            let n = T::from_usize(self.0.len().max(1)).unwrap();
            let mut s = Point2::new(T::zero(), T::zero());
            for &p in &self.0 {
                s = s + p;
            }
            return s.scale(T::one() / n);
        }
        let mut cx = T::zero();
        let mut cy = T::zero();
        for (p, q) in self.edges() {
            let w = p.cross(q);
            cx += (p.x + q.x) * w;
            cy += (p.y + q.y) * w;
        }
        let k = T::one() / (T::of(6.0) * a);
        Point2::new(cx * k, cy * k)
    }

    /// Even-odd containment, boundary-inclusive.
    pub fn contains(&self, p: Point2<T>) -> bool {
        if self.on_boundary(p) {
            return true;
        }
        self.winds_odd(p)
    }

    /// Pure even-odd crossing test; boundary points are unspecified.
    pub fn winds_odd(&self, p: Point2<T>) -> bool {
        let mut inside = false;
        for (a, b) in self.edges() {
            if (a.y > p.y) != (b.y > p.y) {
                let x_cross = a.x + (b.x - a.x) * (p.y - a.y) / (b.y - a.y);
                if p.x < x_cross {
                    inside = !inside;
                }
            }
        }
        inside
    }

    /// True when `p` lies on an edge, within a tolerance scaled to the
    /// ring's extent.
    pub fn on_boundary(&self, p: Point2<T>) -> bool {
        let scale = self
            .0
            .iter()
            .map(|q| q.x.abs().max(q.y.abs()))
            .fold(T::one(), T::max);
        let tol = T::of(1e-12) * scale;
        self.edges().any(|(a, b)| point_on_segment(p, a, b, tol))
    }
}

/// True when `p` lies on segment `ab` within `tol`.
pub fn point_on_segment<T: Real>(p: Point2<T>, a: Point2<T>, b: Point2<T>, tol: T) -> bool {
    let ab = b - a;
    let ap = p - a;
    if ab.cross(ap).abs() > tol * ab.norm().max(T::one()) {
        return false;
    }
    let t = ap.dot(ab);
    t >= -tol && t <= ab.dot(ab) + tol
}

/// Polygon with an outer ring and zero or more hole rings.
#[derive(Clone, Debug, PartialEq)]
pub struct Polygon<T> {
    pub outer: Ring<T>,
    pub holes: Vec<Ring<T>>,
}

impl<T: Real> Polygon<T> {
    pub fn new(outer: Ring<T>, holes: Vec<Ring<T>>) -> Self {
        Self { outer, holes }
    }

    /// Net area: outer minus holes.
    pub fn area(&self) -> T {
        let holes: T = self.holes.iter().map(|h| h.area()).sum();
        self.outer.area() - holes
    }

    /// Boundary-inclusive containment: on any ring counts as inside.
    pub fn contains(&self, p: Point2<T>) -> bool {
        if self.outer.on_boundary(p) || self.holes.iter().any(|h| h.on_boundary(p)) {
            return true;
        }
        self.outer.winds_odd(p) && !self.holes.iter().any(|h| h.winds_odd(p))
    }
}

/// Region of interest: one or more disjoint polygons.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiPolygon<T>(pub Vec<Polygon<T>>);

impl<T: Real> MultiPolygon<T> {
    pub fn area(&self) -> T {
        self.0.iter().map(|p| p.area()).sum()
    }

    pub fn contains(&self, p: Point2<T>) -> bool {
        self.0.iter().any(|poly| poly.contains(p))
    }

    /// All rings, outer and holes alike.
    pub fn rings(&self) -> impl Iterator<Item = &Ring<T>> {
        self.0
            .iter()
            .flat_map(|p| std::iter::once(&p.outer).chain(p.holes.iter()))
    }

    pub fn bbox(&self) -> Option<Bbox<T>> {
        Bbox::of_points(self.rings().flat_map(|r| r.0.iter().copied()))
    }

    /// Area-weighted centroid across parts (holes subtract).
    pub fn centroid(&self) -> Option<Point2<T>> {
        let mut num = Point2::new(T::zero(), T::zero());
        let mut den = T::zero();
        for poly in &self.0 {
            let a = poly.outer.signed_area().abs();
            num = num + poly.outer.centroid().scale(a);
            den += a;
            for h in &poly.holes {
                let ah = h.signed_area().abs();
                num = num - h.centroid().scale(ah);
                den -= ah;
            }
        }
        if den <= T::zero() {
            return None;
        }
        Some(num.scale(T::one() / den))
    }
}

/// Clips a convex polygon by the half-plane `{ p : n·p <= c }`.
/// Returns the empty vector when nothing survives.
pub fn clip_halfplane<T: Real>(poly: &[Point2<T>], n: Point2<T>, c: T) -> Vec<Point2<T>> {
    let mut out = Vec::with_capacity(poly.len() + 1);
    let len = poly.len();
    for i in 0..len {
        let cur = poly[i];
        let nxt = poly[(i + 1) % len];
        let d_cur = n.dot(cur) - c;
        let d_nxt = n.dot(nxt) - c;
        let cur_in = d_cur <= T::zero();
        let nxt_in = d_nxt <= T::zero();
        if cur_in {
            out.push(cur);
        }
        if cur_in != nxt_in {
            let t = d_cur / (d_cur - d_nxt);
            out.push(cur + (nxt - cur).scale(t));
        }
    }
    out
}

/// Sutherland-Hodgman clip of an arbitrary subject ring against a convex
/// CCW polygon. The result is a single ring (possibly degenerate) because
/// the clip window is convex.
pub fn clip_ring_convex<T: Real>(
    subject: &[Point2<T>],
    convex_ccw: &[Point2<T>],
) -> Vec<Point2<T>> {
    let mut cur: Vec<Point2<T>> = subject.to_vec();
    let m = convex_ccw.len();
    for i in 0..m {
        if cur.is_empty() {
            break;
        }
        let a = convex_ccw[i];
        let b = convex_ccw[(i + 1) % m];
        let e = b - a;
        // Inside = left of the directed clip edge.
        let mut next = Vec::with_capacity(cur.len() + 2);
        let n = cur.len();
        for j in 0..n {
            let p = cur[j];
            let q = cur[(j + 1) % n];
            let dp = e.cross(p - a);
            let dq = e.cross(q - a);
            let p_in = dp >= T::zero();
            let q_in = dq >= T::zero();
            if p_in {
                next.push(p);
            }
            if p_in != q_in {
                let t = dp / (dp - dq);
                next.push(p + (q - p).scale(t));
            }
        }
        cur = next;
    }
    cur
}

/// Intersection parameters `t` on segment `ab` where it crosses ring
/// edges. Ring edges are treated half-open so a crossing through a shared
/// ring vertex is reported once.
pub fn segment_ring_crossings<T: Real>(
    a: Point2<T>,
    b: Point2<T>,
    ring: &Ring<T>,
    out: &mut Vec<T>,
) {
    let d = b - a;
    for (c, e) in ring.edges() {
        let f = e - c;
        let denom = d.cross(f);
        if denom == T::zero() {
            continue;
        }
        let t = (c - a).cross(f) / denom;
        let u = (c - a).cross(d) / denom;
        if t >= T::zero() && t <= T::one() && u >= T::zero() && u < T::one() {
            out.push(t);
        }
    }
}

/// Total length of an open polyline.
pub fn polyline_length<T: Real>(pts: &[Point2<T>]) -> T {
    pts.windows(2).map(|w| w[0].dist(w[1])).sum()
}

/// Equidistant-cylindrical projection about a reference geographic point.
/// Distances are honest along meridians and along the reference parallel,
/// which is accurate enough at the scale of a single state or metro area.
#[derive(Clone, Copy, Debug)]
pub struct LocalFrame<T> {
    pub lon0: T,
    pub lat0: T,
    cos_lat0: T,
}

impl<T: Real> LocalFrame<T> {
    pub fn new(lon0: T, lat0: T) -> Self {
        Self {
            lon0,
            lat0,
            cos_lat0: lat0.to_radians().cos(),
        }
    }

    /// (lon, lat) degrees -> meters in the local plane.
    pub fn project(&self, lon: T, lat: T) -> Point2<T> {
        let r = T::of(EARTH_RADIUS_M);
        Point2::new(
            r * (lon - self.lon0).to_radians() * self.cos_lat0,
            r * (lat - self.lat0).to_radians(),
        )
    }

    /// Meters in the local plane -> (lon, lat) degrees.
    pub fn unproject(&self, p: Point2<T>) -> (T, T) {
        let r = T::of(EARTH_RADIUS_M);
        let lon = self.lon0 + (p.x / (r * self.cos_lat0)).to_degrees();
        let lat = self.lat0 + (p.y / r).to_degrees();
        (lon, lat)
    }
}

/// Great-circle distance in meters between two (lon, lat) points.
pub fn haversine_m<T: Real>(lon1: T, lat1: T, lon2: T, lat2: T) -> T {
    let two = T::of(2.0);
    let phi1 = lat1.to_radians();
    let phi2 = lat2.to_radians();
    let dphi = (lat2 - lat1).to_radians();
    let dlam = (lon2 - lon1).to_radians();
    let sp = (dphi / two).sin();
    let sl = (dlam / two).sin();
    let h = sp * sp + phi1.cos() * phi2.cos() * sl * sl;
    T::of(EARTH_RADIUS_M) * two * h.sqrt().asin()
}

#[cfg(test)]
mod tests {
    use super::*;

    type P = Point2<f64>;

    fn unit_square() -> Ring<f64> {
        Ring::new(vec![
            P::new(0.0, 0.0),
            P::new(1.0, 0.0),
            P::new(1.0, 1.0),
            P::new(0.0, 1.0),
        ])
    }

    #[test]
    fn ring_area_and_orientation() {
        let sq = unit_square();
        assert_eq!(sq.signed_area(), 1.0);
        assert!(sq.is_ccw());
        let mut rev = sq.0.clone();
        rev.reverse();
        assert_eq!(Ring::new(rev).signed_area(), -1.0);
    }

    #[test]
    fn ring_drops_closing_vertex() {
        let r = Ring::new(vec![
            P::new(0.0, 0.0),
            P::new(1.0, 0.0),
            P::new(0.0, 1.0),
            P::new(0.0, 0.0),
        ]);
        assert_eq!(r.len(), 3);
    }

    #[test]
    fn centroid_of_square() {
        let c = unit_square().centroid();
        assert!((c.x - 0.5).abs() < 1e-12 && (c.y - 0.5).abs() < 1e-12);
    }

    #[test]
    fn containment_is_boundary_inclusive() {
        let sq = unit_square();
        assert!(sq.contains(P::new(0.5, 0.5)));
        assert!(sq.contains(P::new(0.0, 0.5)));
        assert!(sq.contains(P::new(1.0, 1.0)));
        assert!(!sq.contains(P::new(1.5, 0.5)));
        assert!(!sq.contains(P::new(-1e-9, 0.5)));
    }

    #[test]
    fn polygon_hole_excludes_interior_point() {
        let hole = Ring::new(vec![
            P::new(0.25, 0.25),
            P::new(0.75, 0.25),
            P::new(0.75, 0.75),
            P::new(0.25, 0.75),
        ]);
        let poly = Polygon::new(unit_square(), vec![hole]);
        assert!((poly.area() - 0.75).abs() < 1e-12);
        assert!(!poly.contains(P::new(0.5, 0.5)));
        assert!(poly.contains(P::new(0.1, 0.1)));
        // Hole boundary is region boundary, still inside.
        assert!(poly.contains(P::new(0.25, 0.5)));
    }

    #[test]
    fn halfplane_clip_cuts_square() {
        // Keep x <= 0.5.
        let cut = clip_halfplane(&unit_square().0, P::new(1.0, 0.0), 0.5);
        let r = Ring::new(cut);
        assert!((r.area() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn convex_clip_triangle_by_square() {
        let tri = vec![P::new(-1.0, 0.25), P::new(2.0, 0.25), P::new(0.5, 0.75)];
        let clipped = clip_ring_convex(&tri, &unit_square().0);
        let r = Ring::new(clipped);
        assert!(r.area() > 0.0);
        for &p in &r.0 {
            assert!(p.x >= -1e-12 && p.x <= 1.0 + 1e-12);
            assert!(p.y >= -1e-12 && p.y <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn crossing_params_for_segment_through_square() {
        let mut ts = Vec::new();
        segment_ring_crossings(P::new(-0.5, 0.5), P::new(1.5, 0.5), &unit_square(), &mut ts);
        ts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(ts.len(), 2);
        assert!((ts[0] - 0.25).abs() < 1e-12);
        assert!((ts[1] - 0.75).abs() < 1e-12);
    }

    #[test]
    fn local_frame_round_trips() {
        let f = LocalFrame::<f64>::new(-97.5, 35.5);
        let p = f.project(-97.1, 35.9);
        let (lon, lat) = f.unproject(p);
        assert!((lon + 97.1).abs() < 1e-9);
        assert!((lat - 35.9).abs() < 1e-9);
    }

    #[test]
    fn frame_matches_haversine_near_origin() {
        let f = LocalFrame::<f64>::new(-97.5, 35.5);
        let p = f.project(-97.45, 35.52);
        let planar = p.norm();
        let sphere = haversine_m(-97.5, 35.5, -97.45, 35.52);
        assert!((planar - sphere).abs() / sphere < 2e-3);
    }

    #[test]
    fn haversine_known_distance() {
        // One degree of latitude along a meridian.
        let d = haversine_m(0.0, 0.0, 0.0, 1.0);
        let expect = EARTH_RADIUS_M * std::f64::consts::PI / 180.0;
        assert!((d - expect).abs() < 1e-6);
    }
}
