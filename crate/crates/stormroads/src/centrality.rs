//! Edge betweenness centrality over the road graph, unweighted (hop
//! metric) and cost-weighted, plus node strength and the machinery for
//! comparing the two rankings.
//!
//! Conventions: each unordered node pair is counted once, disconnected
//! pairs contribute nothing, and scores are raw (no normalization) unless
//! explicitly divided by n(n-1)/2.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::collections::VecDeque;

use crate::num::Real;
use crate::{Error, Result};

/// Relative tolerance under which two path costs count as tied.
pub const COST_TIE_REL_TOL: f64 = 1e-12;

/// Simple undirected graph with indexed edges.
#[derive(Clone, Debug)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
    adj: Vec<Vec<(usize, usize)>>,
}

impl Graph {
    /// Builds a simple graph; rejects out-of-range endpoints, self-loops,
    /// and parallel edges.
    pub fn new(n: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        let mut seen = std::collections::BTreeSet::new();
        for &(u, v) in &edges {
            if u >= n || v >= n {
                return Err(Error::data(format!(
                    "edge ({u}, {v}) references a node >= {n}"
                )));
            }
            if u == v {
                return Err(Error::data(format!("self-loop at node {u}")));
            }
            if !seen.insert((u.min(v), u.max(v))) {
                return Err(Error::data(format!("parallel edge ({u}, {v})")));
            }
        }
        let mut adj = vec![Vec::new(); n];
        for (e, &(u, v)) in edges.iter().enumerate() {
            adj[u].push((v, e));
            adj[v].push((u, e));
        }
        Ok(Self { n, edges, adj })
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, v: usize) -> &[(usize, usize)] {
        &self.adj[v]
    }
}

/// Unweighted edge betweenness: breadth-first shortest paths per source,
/// Brandes dependency accumulation, halved at the end because every
/// unordered pair is seen from both endpoints.
pub fn edge_bc_unweighted<T: Real>(g: &Graph) -> Vec<T> {
    let n = g.n;
    let m = g.edges.len();
    let mut bc = vec![T::zero(); m];
    let mut dist = vec![usize::MAX; n];
    let mut sigma = vec![T::zero(); n];
    let mut preds: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    let mut delta = vec![T::zero(); n];
    let mut order = Vec::with_capacity(n);
    let mut queue = VecDeque::new();

    for s in 0..n {
        for v in 0..n {
            dist[v] = usize::MAX;
            sigma[v] = T::zero();
            preds[v].clear();
            delta[v] = T::zero();
        }
        order.clear();
        dist[s] = 0;
        sigma[s] = T::one();
        queue.push_back(s);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            for &(w, e) in &g.adj[v] {
                if dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
                if dist[w] == dist[v] + 1 {
                    let sv = sigma[v];
                    sigma[w] += sv;
                    preds[w].push((v, e));
                }
            }
        }
        for &w in order.iter().rev() {
            for &(v, e) in &preds[w] {
                let c = sigma[v] / sigma[w] * (T::one() + delta[w]);
                bc[e] += c;
                delta[v] += c;
            }
        }
    }
    let half = T::of(0.5);
    for b in bc.iter_mut() {
        *b *= half;
    }
    bc
}

/// Maps sentiment-derived weights in [0, 1] to strictly positive traversal
/// costs: c = (1 - w) + epsilon. High weight (bad sentiment) means cheap,
/// path-attracting edges.
pub fn weights_to_costs<T: Real>(weights: &[T], epsilon: T) -> Result<Vec<T>> {
    if epsilon <= T::zero() {
        return Err(Error::config("epsilon must be positive"));
    }
    weights
        .iter()
        .map(|&w| {
            if !w.is_finite() || w < T::zero() || w > T::one() {
                return Err(Error::data(format!("edge weight {w} outside [0, 1]")));
            }
            Ok(T::one() - w + epsilon)
        })
        .collect()
}

#[derive(PartialEq)]
struct HeapEntry<T> {
    d: T,
    v: usize,
}

impl<T: Real> Eq for HeapEntry<T> {}

impl<T: Real> Ord for HeapEntry<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        // Min-heap on (d, v); costs are finite so the unwrap is safe.
        other
            .d
            .partial_cmp(&self.d)
            .unwrap()
            .then_with(|| other.v.cmp(&self.v))
    }
}

impl<T: Real> PartialOrd for HeapEntry<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Edge betweenness over cost-shortest paths (Dijkstra per source).
/// Path costs within `COST_TIE_REL_TOL` relative of each other count as
/// tied and split the pair's contribution.
pub fn edge_bc_with_costs<T: Real>(g: &Graph, costs: &[T]) -> Result<Vec<T>> {
    if costs.len() != g.edges.len() {
        return Err(Error::data("cost list length differs from edge count"));
    }
    if costs.iter().any(|c| !c.is_finite() || *c <= T::zero()) {
        return Err(Error::data("edge costs must be finite and positive"));
    }
    let n = g.n;
    // Scaled by the candidate distance, which is always finite; the
    // stored distance may still be infinity on first contact.
    let tie_tol = |nd: T| -> T { T::of(COST_TIE_REL_TOL) * nd.max(T::one()) };

    let mut bc = vec![T::zero(); costs.len()];
    let mut dist = vec![T::infinity(); n];
    let mut sigma = vec![T::zero(); n];
    let mut preds: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    let mut delta = vec![T::zero(); n];
    let mut settled = vec![false; n];
    let mut order = Vec::with_capacity(n);

    for s in 0..n {
        for v in 0..n {
            dist[v] = T::infinity();
            sigma[v] = T::zero();
            preds[v].clear();
            delta[v] = T::zero();
            settled[v] = false;
        }
        order.clear();
        dist[s] = T::zero();
        sigma[s] = T::one();
        let mut heap = std::collections::BinaryHeap::new();
        heap.push(HeapEntry { d: T::zero(), v: s });
        while let Some(HeapEntry { v, .. }) = heap.pop() {
            if settled[v] {
                continue;
            }
            settled[v] = true;
            order.push(v);
            for &(w, e) in &g.adj[v] {
                if settled[w] {
                    continue;
                }
                let nd = dist[v] + costs[e];
                let tol = tie_tol(nd);
                if nd < dist[w] - tol {
                    dist[w] = nd;
                    sigma[w] = sigma[v];
                    preds[w].clear();
                    preds[w].push((v, e));
                    heap.push(HeapEntry { d: nd, v: w });
                } else if (nd - dist[w]).abs() <= tol {
                    let sv = sigma[v];
                    sigma[w] += sv;
                    preds[w].push((v, e));
                }
            }
        }
        for &w in order.iter().rev() {
            for &(v, e) in &preds[w] {
                let c = sigma[v] / sigma[w] * (T::one() + delta[w]);
                bc[e] += c;
                delta[v] += c;
            }
        }
    }
    let half = T::of(0.5);
    for b in bc.iter_mut() {
        *b *= half;
    }
    Ok(bc)
}

/// Sentiment-weighted edge betweenness: weights are transformed to costs
/// via `weights_to_costs` and paths are measured by total cost.
pub fn edge_bc_weighted<T: Real>(g: &Graph, weights: &[T], epsilon: T) -> Result<Vec<T>> {
    let costs = weights_to_costs(weights, epsilon)?;
    edge_bc_with_costs(g, &costs)
}

/// Divides raw scores by the pair count n(n-1)/2.
pub fn normalize_bc<T: Real>(scores: &mut [T], n: usize) {
    if n < 2 {
        return;
    }
    let pairs = T::from_usize(n * (n - 1) / 2).unwrap();
    for s in scores.iter_mut() {
        *s /= pairs;
    }
}

/// Node strength: sum of incident edge weights.
pub fn node_strength<T: Real>(g: &Graph, weights: &[T]) -> Result<Vec<T>> {
    if weights.len() != g.edges.len() {
        return Err(Error::data("weight list length differs from edge count"));
    }
    let mut strength = vec![T::zero(); g.n];
    for (e, &(u, v)) in g.edges.iter().enumerate() {
        strength[u] += weights[e];
        strength[v] += weights[e];
    }
    Ok(strength)
}

/// Dense descending ranks: the highest score gets rank 1; exactly equal
/// scores share a rank and the next distinct score gets the next integer.
pub fn dense_ranks_desc<T: Real>(scores: &[T]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap().then(a.cmp(&b)));
    let mut ranks = vec![0usize; scores.len()];
    let mut rank = 0usize;
    let mut prev: Option<T> = None;
    for &i in &idx {
        if prev != Some(scores[i]) {
            rank += 1;
            prev = Some(scores[i]);
        }
        ranks[i] = rank;
    }
    ranks
}

/// Kendall tau-b via the merge-sort inversion count, O(n log n).
pub fn kendall_tau_b(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::data("kendall tau: length mismatch"));
    }
    let n = x.len();
    if n < 2 {
        return Ok(0.0);
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| {
        x[a].partial_cmp(&x[b])
            .unwrap()
            .then(y[a].partial_cmp(&y[b]).unwrap())
    });

    let pairs_in_runs = |key: &dyn Fn(usize, usize) -> bool, order: &[usize]| -> u64 {
        let mut total = 0u64;
        let mut i = 0;
        while i < order.len() {
            let mut j = i;
            while j + 1 < order.len() && key(order[j + 1], order[i]) {
                j += 1;
            }
            let t = (j - i + 1) as u64;
            total += t * (t - 1) / 2;
            i = j + 1;
        }
        total
    };

    let n0 = (n as u64 * (n as u64 - 1)) / 2;
    let tie_x = pairs_in_runs(&|a, b| x[a] == x[b], &idx);
    let tie_xy = pairs_in_runs(&|a, b| x[a] == x[b] && y[a] == y[b], &idx);
    let mut y_order: Vec<usize> = idx.clone();
    y_order.sort_by(|&a, &b| y[a].partial_cmp(&y[b]).unwrap());
    let tie_y = pairs_in_runs(&|a, b| y[a] == y[b], &y_order);

    // Discordant pairs = strict inversions of y in x-then-y order.
    let mut ys: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
    let inversions = count_inversions(&mut ys);

    let num = n0 as f64 - tie_x as f64 - tie_y as f64 + tie_xy as f64 - 2.0 * inversions as f64;
    let denom = ((n0 - tie_x) as f64 * (n0 - tie_y) as f64).sqrt();
    if denom == 0.0 {
        return Ok(0.0);
    }
    Ok(num / denom)
}

/// Counts strict inversions (a[i] > a[j], i < j) by merge sort.
fn count_inversions(a: &mut [f64]) -> u64 {
    let n = a.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let (left, right) = a.split_at_mut(mid);
    let mut inv = count_inversions(left) + count_inversions(right);
    let mut merged = Vec::with_capacity(n);
    let (mut i, mut j) = (0usize, 0usize);
    while i < left.len() && j < right.len() {
        if left[i] <= right[j] {
            merged.push(left[i]);
            i += 1;
        } else {
            inv += (left.len() - i) as u64;
            merged.push(right[j]);
            j += 1;
        }
    }
    merged.extend_from_slice(&left[i..]);
    merged.extend_from_slice(&right[j..]);
    a.copy_from_slice(&merged);
    inv
}

/// Comparison of two centrality rankings over the same edge set.
#[derive(Clone, Debug)]
pub struct RankShift {
    pub kendall_tau: f64,
    pub topk_jaccard: f64,
    pub k_requested: usize,
    /// Top-k set sizes after including boundary ties.
    pub topk_size_a: usize,
    pub topk_size_b: usize,
    /// Functional-class counts inside each top-k set.
    pub class_counts_a: BTreeMap<String, usize>,
    pub class_counts_b: BTreeMap<String, usize>,
}

/// Indices of the top-k scores, descending, with every edge tied to the
/// k-th score included.
pub fn top_k_with_ties(scores: &[f64], k: usize) -> Vec<usize> {
    if scores.is_empty() || k == 0 {
        return Vec::new();
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap().then(a.cmp(&b)));
    if idx.len() <= k {
        return idx;
    }
    let threshold = scores[idx[k - 1]];
    idx.into_iter()
        .filter(|&i| scores[i] >= threshold)
        .collect()
}

/// Compares two BC score vectors: full-ranking Kendall tau-b, Jaccard of
/// the (tie-inclusive) top-k sets, and functional-class composition of
/// each top-k.
pub fn rank_shift(bc_a: &[f64], bc_b: &[f64], fclass: &[String], k: usize) -> Result<RankShift> {
    if bc_a.len() != bc_b.len() || bc_a.len() != fclass.len() {
        return Err(Error::data("rank_shift: edge sets differ in size"));
    }
    let top_a = top_k_with_ties(bc_a, k);
    let top_b = top_k_with_ties(bc_b, k);
    let set_a: std::collections::BTreeSet<usize> = top_a.iter().copied().collect();
    let set_b: std::collections::BTreeSet<usize> = top_b.iter().copied().collect();
    let inter = set_a.intersection(&set_b).count();
    let union = set_a.union(&set_b).count();
    let jaccard = if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    };

    let count_classes = |set: &[usize]| {
        let mut m = BTreeMap::new();
        for &i in set {
            *m.entry(fclass[i].clone()).or_insert(0usize) += 1;
        }
        m
    };

    Ok(RankShift {
        kendall_tau: kendall_tau_b(bc_a, bc_b)?,
        topk_jaccard: jaccard,
        k_requested: k,
        topk_size_a: top_a.len(),
        topk_size_b: top_b.len(),
        class_counts_a: count_classes(&top_a),
        class_counts_b: count_classes(&top_b),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testkit::{
        gen_connected_graph, oracle_edge_bc, oracle_kendall_tau_b, seeded_rng, uniform, unit_f64,
    };

    fn path4() -> Graph {
        Graph::new(4, vec![(0, 1), (1, 2), (2, 3)]).unwrap()
    }

    #[test]
    fn graph_rejects_bad_edges() {
        assert!(Graph::new(2, vec![(0, 2)]).is_err());
        assert!(Graph::new(2, vec![(1, 1)]).is_err());
        assert!(Graph::new(3, vec![(0, 1), (1, 0)]).is_err());
    }

    #[test]
    fn unweighted_path_and_triangle() {
        let bc: Vec<f64> = edge_bc_unweighted(&path4());
        assert_eq!(bc, vec![3.0, 4.0, 3.0]);
        let tri = Graph::new(3, vec![(0, 1), (1, 2), (2, 0)]).unwrap();
        let bc: Vec<f64> = edge_bc_unweighted(&tri);
        assert_eq!(bc, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn unweighted_splits_tied_paths() {
        // Diamond: pairs (0,3) and (1,2) each split over two tied paths,
        // so every edge gets 1 (direct pair) + 0.5 + 0.5.
        let diamond = Graph::new(4, vec![(0, 1), (0, 2), (1, 3), (2, 3)]).unwrap();
        let bc: Vec<f64> = edge_bc_unweighted(&diamond);
        for &v in &bc {
            assert!((v - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn disconnected_pairs_contribute_nothing() {
        let g = Graph::new(4, vec![(0, 1), (2, 3)]).unwrap();
        let bc: Vec<f64> = edge_bc_unweighted(&g);
        assert_eq!(bc, vec![1.0, 1.0]);
    }

    #[test]
    fn weighted_four_cycle_shortcut() {
        let g = Graph::new(4, vec![(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap();
        let unit = edge_bc_with_costs(&g, &[1.0f64, 1.0, 1.0, 1.0]).unwrap();
        for &v in &unit {
            assert!((v - 2.0).abs() < 1e-12);
        }
        let bc = edge_bc_with_costs(&g, &[0.5f64, 1.0, 1.0, 1.0]).unwrap();
        assert!((bc[0] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn uniform_weights_reproduce_hop_ranking() {
        let mut rng = seeded_rng(3);
        let edges = gen_connected_graph(&mut rng, 15, 8);
        let g = Graph::new(15, edges).unwrap();
        let unw: Vec<f64> = edge_bc_unweighted(&g);
        let w = vec![0.4; g.edge_count()];
        let wtd = edge_bc_weighted(&g, &w, 1e-6).unwrap();
        assert_eq!(dense_ranks_desc(&unw), dense_ranks_desc(&wtd));
    }

    #[test]
    fn weighted_scores_scale_invariant() {
        let mut rng = seeded_rng(5);
        let edges = gen_connected_graph(&mut rng, 12, 6);
        let g = Graph::new(12, edges).unwrap();
        let costs: Vec<f64> = (0..g.edge_count())
            .map(|_| uniform(&mut rng, 0.1, 2.0))
            .collect();
        let a = edge_bc_with_costs(&g, &costs).unwrap();
        let scaled: Vec<f64> = costs.iter().map(|c| c * 7.5).collect();
        let b = edge_bc_with_costs(&g, &scaled).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn matches_enumeration_oracle_on_random_graphs() {
        let mut rng = seeded_rng(11);
        for trial in 0..15 {
            let n = 5 + (unit_f64(&mut rng) * 20.0) as usize;
            let edges = gen_connected_graph(&mut rng, n, n / 2);
            let g = Graph::new(n, edges.clone()).unwrap();
            let mine: Vec<f64> = edge_bc_unweighted(&g);
            let oracle = oracle_edge_bc(n, &edges, None).unwrap();
            for (e, (a, b)) in mine.iter().zip(&oracle).enumerate() {
                assert!((a - b).abs() < 1e-9, "trial {trial} edge {e}: {a} vs {b}");
            }
            let costs: Vec<f64> = (0..edges.len())
                .map(|_| uniform(&mut rng, 0.05, 1.0))
                .collect();
            let mine = edge_bc_with_costs(&g, &costs).unwrap();
            let oracle = oracle_edge_bc(n, &edges, Some(&costs)).unwrap();
            for (e, (a, b)) in mine.iter().zip(&oracle).enumerate() {
                assert!(
                    (a - b).abs() < 1e-9,
                    "trial {trial} weighted edge {e}: {a} vs {b}"
                );
            }
        }
    }

    #[test]
    fn strength_sums_incident_weights() {
        let g = Graph::new(4, vec![(0, 1), (0, 2), (1, 2)]).unwrap();
        let s = node_strength(&g, &[0.2f64, 0.3, 1.0]).unwrap();
        assert!((s[0] - 0.5).abs() < 1e-12);
        assert!((s[1] - 1.2).abs() < 1e-12);
        assert!((s[2] - 1.3).abs() < 1e-12);
        assert_eq!(s[3], 0.0);
        // All weights 1 reduces to degree.
        let d = node_strength(&g, &[1.0f64, 1.0, 1.0]).unwrap();
        assert_eq!(d, vec![2.0, 2.0, 2.0, 0.0]);
    }

    #[test]
    fn dense_ranks_handle_ties() {
        let ranks = dense_ranks_desc(&[5.0, 1.0, 5.0, 3.0]);
        assert_eq!(ranks, vec![1, 3, 1, 2]);
    }

    #[test]
    fn kendall_matches_pairwise_oracle() {
        let mut rng = seeded_rng(23);
        for _ in 0..30 {
            let n = 2 + (unit_f64(&mut rng) * 60.0) as usize;
            // Coarse rounding forces plenty of ties.
            let x: Vec<f64> = (0..n).map(|_| (unit_f64(&mut rng) * 8.0).round()).collect();
            let y: Vec<f64> = (0..n).map(|_| (unit_f64(&mut rng) * 8.0).round()).collect();
            let fast = kendall_tau_b(&x, &y).unwrap();
            let slow = oracle_kendall_tau_b(&x, &y);
            assert!((fast - slow).abs() < 1e-12, "{x:?} {y:?}");
        }
    }

    #[test]
    fn rank_shift_identity_and_reversal() {
        let a = vec![4.0, 3.0, 2.0, 1.0];
        let classes: Vec<String> = ["local", "local", "arterial", "interstate"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let same = rank_shift(&a, &a, &classes, 2).unwrap();
        assert_eq!(same.kendall_tau, 1.0);
        assert_eq!(same.topk_jaccard, 1.0);
        let rev = vec![1.0, 2.0, 3.0, 4.0];
        let shift = rank_shift(&a, &rev, &classes, 2).unwrap();
        assert_eq!(shift.kendall_tau, -1.0);
        assert_eq!(shift.topk_jaccard, 0.0);
        assert_eq!(shift.class_counts_a.get("local"), Some(&2));
        assert_eq!(shift.class_counts_b.get("arterial"), Some(&1));
        assert_eq!(shift.class_counts_b.get("interstate"), Some(&1));
    }

    #[test]
    fn top_k_includes_boundary_ties() {
        let scores = [5.0, 4.0, 4.0, 1.0];
        let top = top_k_with_ties(&scores, 2);
        assert_eq!(top.len(), 3);
        assert!(top.contains(&1) && top.contains(&2));
    }
}
