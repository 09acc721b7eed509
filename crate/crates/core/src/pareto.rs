//! Pareto domination, non-dominated sorting and crowding distance.
//!
//! Every routine assumes minimization. Population members are identified by
//! their position in the input slice.

use crate::error::{Error, Result};

/// `v` dominates `w`: no component worse and at least one strictly better.
pub fn dominates(v: &[f64], w: &[f64]) -> Result<bool> {
    if v.len() != w.len() {
        return Err(Error::validation(
            "scores",
            format!("length mismatch: {} vs {}", v.len(), w.len()),
        ));
    }
    Ok(dominates_unchecked(v, w))
}

#[inline]
pub(crate) fn dominates_unchecked(v: &[f64], w: &[f64]) -> bool {
    let mut strict = false;
    for (a, b) in v.iter().zip(w) {
        if a > b {
            return false;
        }
        if a < b {
            strict = true;
        }
    }
    strict
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrontPartition {
    /// Fronts `F_1, F_2, ...` as lists of member ids.
    pub fronts: Vec<Vec<usize>>,
    /// 0-based front index per member.
    pub rank: Vec<usize>,
    /// Crowding distance per member, computed within its own front.
    pub crowding: Vec<f64>,
}

/// Fast non-dominated sorting with domination counts and dominated sets.
pub fn fast_nondominated_sort<S: AsRef<[f64]>>(pop: &[S]) -> FrontPartition {
    let n = pop.len();
    let mut dominated_by: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut counts = vec![0usize; n];
    let mut rank = vec![usize::MAX; n];
    let mut first = Vec::new();

    for p in 0..n {
        for q in 0..n {
            if dominates_unchecked(pop[p].as_ref(), pop[q].as_ref()) {
                dominated_by[p].push(q);
            } else if dominates_unchecked(pop[q].as_ref(), pop[p].as_ref()) {
                counts[p] += 1;
            }
        }
        if counts[p] == 0 {
            rank[p] = 0;
            first.push(p);
        }
    }

    let mut fronts = Vec::new();
    let mut current = first;
    while !current.is_empty() {
        let mut next = Vec::new();
        for &p in &current {
            for &q in &dominated_by[p] {
                counts[q] -= 1;
                if counts[q] == 0 {
                    rank[q] = fronts.len() + 1;
                    next.push(q);
                }
            }
        }
        next.sort_unstable();
        fronts.push(current);
        current = next;
    }

    let mut crowding = vec![0.0; n];
    for front in &fronts {
        let scores: Vec<&[f64]> = front.iter().map(|&i| pop[i].as_ref()).collect();
        for (&id, d) in front.iter().zip(crowding_distance(&scores)) {
            crowding[id] = d;
        }
    }

    FrontPartition {
        fronts,
        rank,
        crowding,
    }
}

/// Crowding distance of each member of one front.
pub fn crowding_distance<S: AsRef<[f64]>>(front: &[S]) -> Vec<f64> {
    let n = front.len();
    if n <= 2 {
        return vec![f64::INFINITY; n];
    }
    let k = front[0].as_ref().len();
    let mut dist = vec![0.0; n];
    let mut order: Vec<usize> = (0..n).collect();
    for m in 0..k {
        let val = |i: usize| front[i].as_ref()[m];
        order.sort_by(|&a, &b| val(a).total_cmp(&val(b)).then(a.cmp(&b)));
        let lo = val(order[0]);
        let hi = val(order[n - 1]);
        dist[order[0]] = f64::INFINITY;
        dist[order[n - 1]] = f64::INFINITY;
        if hi == lo {
            continue;
        }
        for w in 1..n - 1 {
            let i = order[w];
            if dist[i].is_finite() {
                dist[i] += (val(order[w + 1]) - val(order[w - 1])) / (hi - lo);
            }
        }
    }
    dist
}

/// Ids of members not dominated by any other member, in ascending order.
pub fn pareto_front<S: AsRef<[f64]>>(pop: &[S]) -> Vec<usize> {
    if pop.first().is_some_and(|p| p.as_ref().len() == 2) {
        return pareto_front_2d(pop);
    }
    (0..pop.len())
        .filter(|&i| {
            !pop.iter()
                .any(|q| dominates_unchecked(q.as_ref(), pop[i].as_ref()))
        })
        .collect()
}

// Sort-and-sweep specialization for two objectives, O(N log N).
fn pareto_front_2d<S: AsRef<[f64]>>(pop: &[S]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..pop.len()).collect();
    let key = |i: usize| (pop[i].as_ref()[0], pop[i].as_ref()[1]);
    order.sort_by(|&a, &b| {
        let (a0, a1) = key(a);
        let (b0, b1) = key(b);
        a0.total_cmp(&b0).then(a1.total_cmp(&b1))
    });
    let mut keep = Vec::new();
    let mut best_prev = f64::INFINITY;
    let mut g = 0;
    while g < order.len() {
        let q0 = key(order[g]).0;
        let mut end = g;
        while end < order.len() && key(order[end]).0 == q0 {
            end += 1;
        }
        // group sorted by q1, so its first member holds the minimum
        let group_min = key(order[g]).1;
        if group_min < best_prev {
            for &i in &order[g..end] {
                if key(i).1 == group_min {
                    keep.push(i);
                }
            }
            best_prev = group_min;
        }
        g = end;
    }
    keep.sort_unstable();
    keep
}

/// Mean Euclidean distance from each point of `front` to its nearest point
/// in `reference`.
pub fn generational_distance<A: AsRef<[f64]>, B: AsRef<[f64]>>(
    front: &[A],
    reference: &[B],
) -> f64 {
    if front.is_empty() || reference.is_empty() {
        return f64::INFINITY;
    }
    let total: f64 = front
        .iter()
        .map(|p| {
            reference
                .iter()
                .map(|r| crate::space::euclidean(p.as_ref(), r.as_ref()))
                .fold(f64::INFINITY, f64::min)
        })
        .sum();
    total / front.len() as f64
}

/// Length of the diagonal of the bounding box of `points`.
pub fn bounding_diagonal<S: AsRef<[f64]>>(points: &[S]) -> f64 {
    let Some(first) = points.first() else {
        return 0.0;
    };
    let k = first.as_ref().len();
    (0..k)
        .map(|m| {
            let (lo, hi) = points
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                    (lo.min(p.as_ref()[m]), hi.max(p.as_ref()[m]))
                });
            (hi - lo).powi(2)
        })
        .sum::<f64>()
        .sqrt()
}
