//! Brute-force oracles and reference statistics used by the test suite.
//!
//! Everything here is deliberately independent of the main kernels: the
//! betweenness oracle enumerates shortest paths over Floyd-Warshall
//! distances instead of running Brandes, the class-break oracle tries
//! every contiguous partition, point-in-polygon uses a winding-number
//! formulation, and the regional-mean oracle is Monte-Carlo. Slow on
//! purpose; guarded by small-input preconditions.

pub mod scenario;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

/// Relative tolerance for treating two path costs as tied.
const TIE_REL_TOL: f64 = 1e-12;

fn costs_tied(a: f64, b: f64) -> bool {
    (a - b).abs() <= TIE_REL_TOL * a.abs().max(b.abs()).max(1.0)
}

/// Edge betweenness by exhaustive shortest-path enumeration.
///
/// `edges` are undirected `(u, v)` pairs over nodes `0..n`; `costs`
/// defaults to 1 per edge (hop metric). Each unordered pair is counted
/// once; disconnected pairs contribute nothing. Refuses graphs with more
/// than 40 nodes, and bails out if a single pair has more than a million
/// tied shortest paths.
pub fn oracle_edge_bc(
    n: usize,
    edges: &[(usize, usize)],
    costs: Option<&[f64]>,
) -> Result<Vec<f64>> {
    if n > 40 {
        return Err(Error::config(format!(
            "oracle_edge_bc limited to 40 nodes, got {n}"
        )));
    }
    if let Some(c) = costs {
        if c.len() != edges.len() {
            return Err(Error::config("cost list length differs from edge list"));
        }
        if c.iter().any(|&x| !x.is_finite() || x <= 0.0) {
            return Err(Error::config("edge costs must be finite and positive"));
        }
    }
    let cost = |e: usize| costs.map_or(1.0, |c| c[e]);

    // Floyd-Warshall all-pairs distances.
    let inf = f64::INFINITY;
    let mut dist = vec![vec![inf; n]; n];
    for (i, row) in dist.iter_mut().enumerate() {
        row[i] = 0.0;
    }
    for (e, &(u, v)) in edges.iter().enumerate() {
        let c = cost(e);
        if c < dist[u][v] {
            dist[u][v] = c;
            dist[v][u] = c;
        }
    }
    for k in 0..n {
        for i in 0..n {
            if dist[i][k] == inf {
                continue;
            }
            for j in 0..n {
                let via = dist[i][k] + dist[k][j];
                if via < dist[i][j] {
                    dist[i][j] = via;
                }
            }
        }
    }

    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for (e, &(u, v)) in edges.iter().enumerate() {
        adj[u].push((v, e));
        adj[v].push((u, e));
    }

    let mut bc = vec![0.0; edges.len()];
    let mut edge_paths = vec![0u64; edges.len()];
    #[allow(clippy::needless_range_loop)]
    for s in 0..n {
        for t in (s + 1)..n {
            if dist[s][t] == inf {
                continue;
            }
            for c in edge_paths.iter_mut() {
                *c = 0;
            }
            let mut total: u64 = 0;
            // DFS from t back toward s over the shortest-path DAG.
            let mut stack: Vec<(usize, Vec<usize>)> = vec![(t, Vec::new())];
            while let Some((v, path)) = stack.pop() {
                if v == s {
                    total += 1;
                    if total > 1_000_000 {
                        return Err(Error::data("oracle_edge_bc: too many tied shortest paths"));
                    }
                    for &e in &path {
                        edge_paths[e] += 1;
                    }
                    continue;
                }
                for &(u, e) in &adj[v] {
                    if costs_tied(dist[s][u] + cost(e), dist[s][v]) && dist[s][u] < dist[s][v] {
                        let mut next = path.clone();
                        next.push(e);
                        stack.push((u, next));
                    }
                }
            }
            debug_assert!(total > 0);
            for (e, &cnt) in edge_paths.iter().enumerate() {
                if cnt > 0 {
                    bc[e] += cnt as f64 / total as f64;
                }
            }
        }
    }
    Ok(bc)
}

/// Minimum-SSE contiguous partition by full enumeration.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleBreaks {
    /// Upper bound (class max) per class, ascending.
    pub bounds: Vec<f64>,
    pub sse: f64,
}

/// Enumerates every contiguous k-partition of the sorted values and keeps
/// the one with the smallest within-class sum of squared deviations; ties
/// go to the lexicographically smallest cut positions. Guards: n <= 12,
/// k <= 4.
pub fn oracle_jenks(values: &[f64], k: usize) -> Result<OracleBreaks> {
    let n = values.len();
    if n > 12 || k > 4 {
        return Err(Error::config("oracle_jenks limited to n <= 12, k <= 4"));
    }
    if k == 0 || k > n {
        return Err(Error::config("oracle_jenks needs 1 <= k <= n"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let sse_of = |lo: usize, hi: usize| -> f64 {
        // Inclusive range; sum/sum-of-squares identity, clamped at zero.
        let m = (hi - lo + 1) as f64;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for &v in &sorted[lo..=hi] {
            sum += v;
            sumsq += v * v;
        }
        (sumsq - sum * sum / m).max(0.0)
    };

    // Cut positions: k-1 indices 1 <= c1 < c2 < ... < c_{k-1} <= n-1,
    // class i = sorted[c_{i-1}..c_i]. Generated in lexicographic order so
    // the first minimum wins ties.
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut cuts = vec![0usize; k - 1];
    fn walk(
        cuts: &mut Vec<usize>,
        depth: usize,
        start: usize,
        n: usize,
        k: usize,
        sse_of: &dyn Fn(usize, usize) -> f64,
        best: &mut Option<(f64, Vec<usize>)>,
    ) {
        if depth == k - 1 {
            let mut sse = 0.0;
            let mut lo = 0usize;
            for &c in cuts.iter() {
                sse += sse_of(lo, c - 1);
                lo = c;
            }
            sse += sse_of(lo, n - 1);
            let better = match best {
                None => true,
                Some((b, _)) => sse < *b,
            };
            if better {
                *best = Some((sse, cuts.clone()));
            }
            return;
        }
        // Leave room for the remaining cuts.
        let remaining = (k - 1) - depth - 1;
        for c in start..=(n - 1 - remaining) {
            cuts[depth] = c;
            walk(cuts, depth + 1, c + 1, n, k, sse_of, best);
        }
    }
    if k == 1 {
        best = Some((sse_of(0, n - 1), Vec::new()));
    } else {
        walk(&mut cuts, 0, 1, n, k, &sse_of, &mut best);
    }
    let (sse, cuts) = best.expect("at least one partition");
    let mut bounds: Vec<f64> = cuts.iter().map(|&c| sorted[c - 1]).collect();
    bounds.push(sorted[n - 1]);
    Ok(OracleBreaks { bounds, sse })
}

/// Winding-number point-in-polygon over raw rings, boundary-inclusive.
/// Even-odd across rings: a point inside an odd number of rings is inside
/// the region (outer + holes convention).
pub fn oracle_point_in_rings(rings: &[Vec<(f64, f64)>], p: (f64, f64)) -> bool {
    let mut inside_count = 0usize;
    for ring in rings {
        if on_ring_boundary(ring, p) {
            return true;
        }
        if winding_number(ring, p) != 0 {
            inside_count += 1;
        }
    }
    inside_count % 2 == 1
}

fn is_left(a: (f64, f64), b: (f64, f64), p: (f64, f64)) -> f64 {
    (b.0 - a.0) * (p.1 - a.1) - (p.0 - a.0) * (b.1 - a.1)
}

fn winding_number(ring: &[(f64, f64)], p: (f64, f64)) -> i32 {
    let n = ring.len();
    let mut wn = 0i32;
    for i in 0..n {
        let a = ring[i];
        let b = ring[(i + 1) % n];
        if a.1 <= p.1 {
            if b.1 > p.1 && is_left(a, b, p) > 0.0 {
                wn += 1;
            }
        } else if b.1 <= p.1 && is_left(a, b, p) < 0.0 {
            wn -= 1;
        }
    }
    wn
}

fn on_ring_boundary(ring: &[(f64, f64)], p: (f64, f64)) -> bool {
    let n = ring.len();
    let scale = ring
        .iter()
        .map(|q| q.0.abs().max(q.1.abs()))
        .fold(1.0f64, f64::max);
    let tol = 1e-12 * scale;
    for i in 0..n {
        let a = ring[i];
        let b = ring[(i + 1) % n];
        let cross = is_left(a, b, p);
        let len = ((b.0 - a.0).powi(2) + (b.1 - a.1).powi(2)).sqrt();
        if cross.abs() > tol * len.max(1.0) {
            continue;
        }
        let dot = (p.0 - a.0) * (b.0 - a.0) + (p.1 - a.1) * (b.1 - a.1);
        if dot >= -tol && dot <= len * len + tol {
            return true;
        }
    }
    false
}

/// Deterministic generator for all seeded test data.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform f64 in [0, 1) from the raw stream; pinned construction so the
/// value sequence never depends on distribution-crate internals.
pub fn unit_f64(rng: &mut impl RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform f64 in [lo, hi).
pub fn uniform(rng: &mut impl RngCore, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * unit_f64(rng)
}

/// Monte-Carlo estimate of the area-weighted mean of nearest-site values
/// over a region given as raw rings. Returns (mean, standard error).
/// `samples` counts accepted in-region points; rejection sampling from the
/// ring bounding box.
pub fn oracle_regional_mean(
    rings: &[Vec<(f64, f64)>],
    sites: &[((f64, f64), f64)],
    samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if samples < 100_000 {
        return Err(Error::config(
            "oracle_regional_mean needs at least 1e5 samples",
        ));
    }
    if sites.is_empty() || rings.is_empty() {
        return Err(Error::config(
            "oracle_regional_mean needs sites and a region",
        ));
    }
    let (mut xmin, mut ymin) = (f64::INFINITY, f64::INFINITY);
    let (mut xmax, mut ymax) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for r in rings {
        for &(x, y) in r {
            xmin = xmin.min(x);
            ymin = ymin.min(y);
            xmax = xmax.max(x);
            ymax = ymax.max(y);
        }
    }
    let mut rng = seeded_rng(seed);
    let mut sum = 0.0f64;
    let mut sumsq = 0.0f64;
    let mut accepted = 0usize;
    let mut attempts = 0u64;
    let max_attempts = (samples as u64) * 1000;
    while accepted < samples {
        attempts += 1;
        if attempts > max_attempts {
            return Err(Error::data("oracle_regional_mean: rejection rate too high"));
        }
        let p = (uniform(&mut rng, xmin, xmax), uniform(&mut rng, ymin, ymax));
        if !oracle_point_in_rings(rings, p) {
            continue;
        }
        let mut best = f64::INFINITY;
        let mut val = 0.0;
        for &((sx, sy), t) in sites {
            let d2 = (p.0 - sx).powi(2) + (p.1 - sy).powi(2);
            if d2 < best {
                best = d2;
                val = t;
            }
        }
        sum += val;
        sumsq += val * val;
        accepted += 1;
    }
    let n = samples as f64;
    let mean = sum / n;
    let var = (sumsq / n - mean * mean).max(0.0);
    let se = (var / n).sqrt();
    Ok((mean, se))
}

/// Random connected simple graph over nodes `0..n`: a random attachment
/// tree plus up to `extra` additional edges, no self-loops or parallels.
pub fn gen_connected_graph(rng: &mut impl RngCore, n: usize, extra: usize) -> Vec<(usize, usize)> {
    assert!(n >= 2);
    let mut edges = Vec::with_capacity(n - 1 + extra);
    let mut seen = std::collections::BTreeSet::new();
    for v in 1..n {
        let u = (unit_f64(rng) * v as f64) as usize;
        edges.push((u, v));
        seen.insert((u, v));
    }
    let mut added = 0usize;
    let mut attempts = 0usize;
    while added < extra && attempts < 20 * (extra + 1) {
        attempts += 1;
        let a = (unit_f64(rng) * n as f64) as usize;
        let b = (unit_f64(rng) * n as f64) as usize;
        if a == b {
            continue;
        }
        let key = (a.min(b), a.max(b));
        if seen.insert(key) {
            edges.push(key);
            added += 1;
        }
    }
    edges
}

/// Pearson correlation coefficient.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    sxy / (sxx * syy).sqrt()
}

/// Average ranks (1-based), ties share the mean rank.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| x[a].partial_cmp(&x[b]).unwrap());
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &id in &idx[i..=j] {
            ranks[id] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation (Pearson over average ranks).
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    pearson(&average_ranks(x), &average_ranks(y))
}

/// Kendall tau-b by brute-force pair counting, O(n^2).
pub fn oracle_kendall_tau_b(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let n = x.len();
    let (mut concordant, mut discordant) = (0i64, 0i64);
    let (mut ties_x, mut ties_y) = (0i64, 0i64);
    for i in 0..n {
        for j in (i + 1)..n {
            let dx = x[i] - x[j];
            let dy = y[i] - y[j];
            if dx == 0.0 {
                ties_x += 1;
            }
            if dy == 0.0 {
                ties_y += 1;
            }
            if dx != 0.0 && dy != 0.0 {
                if dx * dy > 0.0 {
                    concordant += 1;
                } else {
                    discordant += 1;
                }
            }
        }
    }
    let n0 = (n * (n - 1) / 2) as f64;
    let denom = ((n0 - ties_x as f64) * (n0 - ties_y as f64)).sqrt();
    if denom == 0.0 {
        return 0.0;
    }
    (concordant - discordant) as f64 / denom
}

/// Five representative crisis posts used as a cross-module fixture: raw
/// text, the token list the reference analysis produced for each, and
/// the compound score the bundled lexicon must reproduce within ±0.02.
pub const REFERENCE_TEXTS: [&str; 5] = [
    "This is such an Oklahoman sunset! The OU flag in front of the debris from the ice storm \
     at sunset last night. #okwx #BoomerSooner",
    "Good morning Oklahoma! @cityofokc starts the ice storm debris removal today.",
    "Please help feed hungry Oklahomans. I hear from people daily who struggle to eat because \
     of unemployment... and recently, our devastating ice storm spoiled a lot of stored food. \
     @reba Text FOOD to 501-501 to donate $10",
    "With the pandemic and the recent catastrophic ice storm, this year has been extremely \
     challenging for all Oklahomans. Join us in donating to United Way of Central Oklahoma. \
     #supportlocal #community #leadership #downtownokc #okc #oklahoma #newmark",
    "OKC beginning massive debris pickup effort after last week's historic ice storm. Right \
     now, 7+ days later, about 450 people in the city still have not had power restored \
     https://t.co/e48ZPenIB",
];

pub const REFERENCE_TOKENS: [&[&str]; 5] = [
    &[
        "oklahoman",
        "sunset",
        "flag",
        "debris",
        "ice",
        "storm",
        "night",
        "okwx",
        "boomersooner",
    ],
    &[
        "good", "morning", "oklahoma", "start", "ice", "storm", "debris", "removal", "today",
    ],
    &[
        "help",
        "feed",
        "hungry",
        "oklahoman",
        "hear",
        "people",
        "daily",
        "struggle",
        "eat",
        "unemployment",
        "recently",
        "devastating",
        "ice",
        "storm",
        "spoiled",
        "lot",
        "stored",
        "food",
        "text",
        "food",
        "donate",
    ],
    &[
        "pandemic",
        "recent",
        "catastrophic",
        "ice",
        "storm",
        "year",
        "extremely",
        "challenging",
        "oklahoman",
        "join",
        "donating",
        "united",
        "way",
        "central",
        "oklahoma",
        "supportlocal",
        "community",
        "leadership",
        "downtownokc",
        "okc",
        "oklahoma",
        "newmark",
    ],
    &[
        "okc",
        "beginning",
        "massive",
        "debris",
        "pickup",
        "effort",
        "week",
        "historic",
        "ice",
        "storm",
        "right",
        "day",
        "later",
        "people",
        "city",
        "power",
        "restored",
    ],
];

pub const REFERENCE_SCORES: [f64; 5] = [0.0, 0.6696, -0.6705, 0.4005, -0.2584];

pub const REFERENCE_SCORE_TOL: f64 = 0.02;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bc_oracle_path_graph() {
        // 1-2-3-4 as 0-1-2-3.
        let edges = [(0, 1), (1, 2), (2, 3)];
        let bc = oracle_edge_bc(4, &edges, None).unwrap();
        assert_eq!(bc, vec![3.0, 4.0, 3.0]);
    }

    #[test]
    fn bc_oracle_triangle() {
        let edges = [(0, 1), (1, 2), (2, 0)];
        let bc = oracle_edge_bc(3, &edges, None).unwrap();
        assert_eq!(bc, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn bc_oracle_star_three_leaves() {
        let edges = [(0, 1), (0, 2), (0, 3)];
        let bc = oracle_edge_bc(4, &edges, None).unwrap();
        assert_eq!(bc, vec![3.0, 3.0, 3.0]);
    }

    #[test]
    fn bc_oracle_square_with_shortcut_cost() {
        // 4-cycle, unit costs: every edge 2.0. Cheapening edge (0,1) to
        // 0.5 routes pairs (0,1), (0,2), (1,3) through it: BC 3.0.
        let edges = [(0, 1), (1, 2), (2, 3), (3, 0)];
        let bc = oracle_edge_bc(4, &edges, None).unwrap();
        assert_eq!(bc, vec![2.0, 2.0, 2.0, 2.0]);
        let costs = [0.5, 1.0, 1.0, 1.0];
        let bc = oracle_edge_bc(4, &edges, Some(&costs)).unwrap();
        assert_eq!(bc[0], 3.0);
    }

    #[test]
    fn bc_oracle_splits_tied_paths() {
        // Diamond 0-1-3, 0-2-3: pairs (0,3) and (1,2) each have two tied
        // paths, so every edge gets 1 + 0.5 + 0.5.
        let edges = [(0, 1), (0, 2), (1, 3), (2, 3)];
        let bc = oracle_edge_bc(4, &edges, None).unwrap();
        for &v in &bc {
            assert!((v - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn bc_oracle_refuses_large_graphs() {
        assert!(oracle_edge_bc(41, &[], None).is_err());
    }

    #[test]
    fn jenks_oracle_reference_partition() {
        let b = oracle_jenks(&[1.0, 2.0, 4.0, 5.0, 7.0, 9.0], 3).unwrap();
        assert_eq!(b.bounds, vec![2.0, 5.0, 9.0]);
        assert_eq!(b.sse, 3.0);
    }

    #[test]
    fn jenks_oracle_separable_and_exhaustive() {
        let b = oracle_jenks(&[1.0, 1.0, 1.0, 9.0, 9.0, 9.0], 2).unwrap();
        assert_eq!(b.sse, 0.0);
        let b = oracle_jenks(&[3.0, 1.0, 2.0, 5.0], 4).unwrap();
        assert_eq!(b.sse, 0.0);
        assert_eq!(b.bounds, vec![1.0, 2.0, 3.0, 5.0]);
    }

    #[test]
    fn winding_oracle_square_and_hole() {
        let outer = vec![(0.0, 0.0), (4.0, 0.0), (4.0, 4.0), (0.0, 4.0)];
        let hole = vec![(1.0, 1.0), (3.0, 1.0), (3.0, 3.0), (1.0, 3.0)];
        let rings = vec![outer, hole];
        assert!(oracle_point_in_rings(&rings, (0.5, 0.5)));
        assert!(!oracle_point_in_rings(&rings, (2.0, 2.0)));
        assert!(oracle_point_in_rings(&rings, (4.0, 4.0)));
        assert!(oracle_point_in_rings(&rings, (2.0, 1.0)));
        assert!(!oracle_point_in_rings(&rings, (5.0, 2.0)));
    }

    #[test]
    fn regional_mean_oracle_single_site() {
        let rings = vec![vec![(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]];
        let sites = vec![((0.5, 0.5), 0.3)];
        let (mean, se) = oracle_regional_mean(&rings, &sites, 100_000, 7).unwrap();
        assert!((mean - 0.3).abs() < 1e-9);
        assert!(se < 1e-6);
    }

    #[test]
    fn regional_mean_oracle_symmetric_pair() {
        let rings = vec![vec![(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]];
        let sites = vec![((0.25, 0.5), -1.0), ((0.75, 0.5), 1.0)];
        let (mean, se) = oracle_regional_mean(&rings, &sites, 200_000, 11).unwrap();
        assert!(mean.abs() <= 3.0 * se, "mean {mean} se {se}");
    }

    #[test]
    fn rank_stats_basics() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [2.0, 4.0, 6.0, 8.0];
        assert!((pearson(&x, &y) - 1.0).abs() < 1e-12);
        assert!((spearman(&x, &y) - 1.0).abs() < 1e-12);
        assert!((oracle_kendall_tau_b(&x, &y) - 1.0).abs() < 1e-12);
        let rev = [8.0, 6.0, 4.0, 2.0];
        assert!((oracle_kendall_tau_b(&x, &rev) + 1.0).abs() < 1e-12);
        assert_eq!(
            average_ranks(&[10.0, 20.0, 20.0, 30.0]),
            vec![1.0, 2.5, 2.5, 4.0]
        );
    }
}
