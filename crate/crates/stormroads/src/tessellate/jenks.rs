//! Natural-breaks classification: exact minimum-SSE contiguous partition
//! of sorted values (Fisher's optimal partition, O(k·n²) dynamic program,
//! not the common heuristic).

use crate::num::Real;
use crate::{Error, Result};

/// Result of a natural-breaks partition.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassBreaks<T> {
    /// Number of classes actually produced.
    pub k: usize,
    /// Class maxima, strictly ascending; last = max(values).
    pub upper_bounds: Vec<T>,
    /// Goodness of variance fit, 1 - SSE_within/SSE_total; 1 when the
    /// input has zero variance.
    pub gvf: T,
    /// Within-class sum of squared deviations at the optimum.
    pub sse: T,
}

/// Optimal k-class natural breaks over `values`.
///
/// Requires `1 <= k <=` number of distinct values, with one carve-out:
/// an all-equal input collapses to a single class (k = 1, one bound)
/// regardless of the k requested, since no meaningful partition exists.
pub fn jenks_breaks<T: Real>(values: &[T], k: usize) -> Result<ClassBreaks<T>> {
    if values.is_empty() {
        return Err(Error::data("natural breaks: empty input"));
    }
    if k == 0 {
        return Err(Error::config("natural breaks: k must be >= 1"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::data("natural breaks: non-finite value"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();

    let mut distinct = 1usize;
    for w in sorted.windows(2) {
        if w[0] != w[1] {
            distinct += 1;
        }
    }
    if distinct == 1 {
        return Ok(ClassBreaks {
            k: 1,
            upper_bounds: vec![sorted[n - 1]],
            gvf: T::one(),
            sse: T::zero(),
        });
    }
    if k > distinct {
        return Err(Error::config(format!(
            "natural breaks: k = {k} exceeds {distinct} distinct values"
        )));
    }

    // Prefix sums; exact for integer-valued input.
    let mut psum = Vec::with_capacity(n + 1);
    let mut psumsq = Vec::with_capacity(n + 1);
    psum.push(T::zero());
    psumsq.push(T::zero());
    for &v in &sorted {
        psum.push(*psum.last().unwrap() + v);
        psumsq.push(*psumsq.last().unwrap() + v * v);
    }
    // SSE of sorted[lo..hi] (half-open).
    let sse_range = |lo: usize, hi: usize| -> T {
        let m = T::from_usize(hi - lo).unwrap();
        let sum = psum[hi] - psum[lo];
        let sumsq = psumsq[hi] - psumsq[lo];
        (sumsq - sum * sum / m).max(T::zero())
    };

    // Valid cut positions sit between distinct values; cutting inside a
    // run of equal values never beats the boundary cut, and boundary cuts
    // keep the class maxima strictly ascending.
    let cuttable: Vec<bool> = (0..=n)
        .map(|m| m == 0 || m == n || sorted[m - 1] != sorted[m])
        .collect();

    // cost[i] = optimal SSE of the first i values with the current class
    // count; splits[j][i] = start index of the last class at that optimum.
    let mut cost: Vec<T> = (0..=n)
        .map(|i| if i == 0 { T::zero() } else { sse_range(0, i) })
        .collect();
    let mut splits = vec![vec![0usize; n + 1]; k + 1];
    #[allow(clippy::needless_range_loop)]
    for j in 2..=k {
        let mut next = vec![T::infinity(); n + 1];
        // First i values need at least j members, one per class.
        for i in j..=n {
            let mut best = T::infinity();
            let mut best_m = 0usize;
            for m in (j - 1)..i {
                if !cuttable[m] {
                    continue;
                }
                let c = cost[m] + sse_range(m, i);
                if c < best {
                    best = c;
                    best_m = m;
                }
            }
            next[i] = best;
            splits[j][i] = best_m;
        }
        cost = next;
    }

    let sse = cost[n];
    // Walk the split table back to recover class boundaries.
    let mut bounds_rev = Vec::with_capacity(k);
    let mut i = n;
    for j in (1..=k).rev() {
        bounds_rev.push(sorted[i - 1]);
        if j > 1 {
            i = splits[j][i];
        }
    }
    let upper_bounds: Vec<T> = bounds_rev.into_iter().rev().collect();
    debug_assert!(upper_bounds.windows(2).all(|w| w[0] < w[1]));

    let sse_total = sse_range(0, n);
    let gvf = if sse_total > T::zero() {
        T::one() - sse / sse_total
    } else {
        T::one()
    };
    Ok(ClassBreaks {
        k,
        upper_bounds,
        gvf,
        sse,
    })
}

/// Assigns each value the smallest class index `i` (1-based) with
/// `value <= upper_bounds[i]`. Values above the last bound clamp to class
/// k; the second return value counts how many were clamped.
pub fn classify<T: Real>(values: &[T], breaks: &ClassBreaks<T>) -> (Vec<usize>, usize) {
    let mut clamped = 0usize;
    let classes = values
        .iter()
        .map(|&v| {
            let idx = breaks.upper_bounds.partition_point(|&b| b < v);
            if idx >= breaks.k {
                // Above the last bound: clamp.
                clamped += 1;
                breaks.k
            } else {
                idx + 1
            }
        })
        .collect();
    (classes, clamped)
}
