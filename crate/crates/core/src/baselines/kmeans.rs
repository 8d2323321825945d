use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rng::RngHandle;

pub const DEFAULT_RESTARTS: usize = 10;
pub const DEFAULT_MAX_ITER: usize = 300;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansResult {
    pub centers: Vec<Vec<f64>>,
    /// Index of the nearest center for each point, ties to the lowest index.
    pub assignments: Vec<usize>,
    /// Weighted sum of squared distances to the assigned centers.
    pub inertia: f64,
    pub iterations_run: usize,
}

/// One Lloyd run together with the inertia after every assignment step.
#[derive(Debug, Clone, PartialEq)]
pub struct LloydRun {
    pub result: KMeansResult,
    pub inertia_trace: Vec<f64>,
}

/// Best of `restarts` Lloyd runs from k-means++ seedings. Restart `r` draws
/// from `rng.split(r)`; the lowest inertia wins, ties to the earliest
/// restart.
pub fn kmeans(d: &Dataset, k: usize, restarts: usize, max_iter: usize, rng: RngHandle) -> Result<KMeansResult> {
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    if restarts == 0 {
        return Err(Error::invalid("restarts must be at least 1"));
    }
    let distinct = count_distinct(d);
    if k > distinct {
        return Err(Error::TooFewDistinctPoints { k, distinct });
    }
    let runs: Vec<KMeansResult> = (0..restarts as u64)
        .into_par_iter()
        .map(|r| {
            let seeds = plus_plus_seeds(d, k, rng.split(r));
            lloyd(d, seeds, max_iter).result
        })
        .collect();
    Ok(runs
        .into_iter()
        .reduce(|best, r| if r.inertia < best.inertia { r } else { best })
        .expect("restarts >= 1"))
}

/// Points with positive weight, counted by exact coordinate equality.
fn count_distinct(d: &Dataset) -> usize {
    d.rows()
        .enumerate()
        .filter(|(i, _)| d.weight(*i) > 0.0)
        // adding 0.0 maps -0.0 to +0.0 so both hash alike
        .map(|(_, r)| r.iter().map(|x| (x + 0.0).to_bits()).collect::<Vec<u64>>())
        .collect::<HashSet<_>>()
        .len()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// D²-weighted seeding; every point is also weighted by its dataset weight.
fn plus_plus_seeds(d: &Dataset, k: usize, rng: RngHandle) -> Vec<Vec<f64>> {
    let mut rng = rng.rng();
    let n = d.len();
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(k);
    let first = pick(d.weights(), &mut rng).expect("positive total weight");
    centers.push(d.point(first).to_vec());
    let mut dist: Vec<f64> = (0..n).map(|i| sq_dist(d.point(i), &centers[0])).collect();
    while centers.len() < k {
        let scores: Vec<f64> = (0..n).map(|i| dist[i] * d.weight(i)).collect();
        // all remaining mass sits on existing centers only if k exceeds the
        // distinct points, which the caller rules out
        let next = pick(&scores, &mut rng).expect("k does not exceed the distinct points");
        let c = d.point(next).to_vec();
        for (i, di) in dist.iter_mut().enumerate() {
            *di = di.min(sq_dist(d.point(i), &c));
        }
        centers.push(c);
    }
    centers
}

/// Index drawn with probability proportional to `scores`.
fn pick(scores: &[f64], rng: &mut impl rand::Rng) -> Option<usize> {
    let total: f64 = scores.iter().sum();
    if !(total > 0.0) {
        return None;
    }
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last = None;
    for (i, s) in scores.iter().enumerate() {
        if *s > 0.0 {
            acc += s;
            last = Some(i);
            if acc > target {
                return Some(i);
            }
        }
    }
    last
}

fn nearest(x: &[f64], centers: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centers.iter().enumerate() {
        let dd = sq_dist(x, c);
        if dd < best.1 {
            best = (j, dd);
        }
    }
    best
}

/// Lloyd iterations from the given centers until the assignments stop
/// changing or `max_iter` update steps have run. A center that loses all of
/// its points is moved onto the point farthest from its current center.
pub fn lloyd(d: &Dataset, mut centers: Vec<Vec<f64>>, max_iter: usize) -> LloydRun {
    let dim = d.dim();
    let k = centers.len();
    let mut assignments = vec![usize::MAX; d.len()];
    let mut trace = Vec::new();
    let mut iterations = 0;
    loop {
        let mut changed = false;
        let mut inertia = 0.0;
        let mut point_cost = vec![0.0; d.len()];
        for (i, x) in d.rows().enumerate() {
            let (j, dd) = nearest(x, &centers);
            if assignments[i] != j {
                assignments[i] = j;
                changed = true;
            }
            point_cost[i] = dd * d.weight(i);
            inertia += point_cost[i];
        }
        trace.push(inertia);
        if !changed || iterations >= max_iter {
            return LloydRun {
                result: KMeansResult {
                    centers,
                    assignments,
                    inertia,
                    iterations_run: iterations,
                },
                inertia_trace: trace,
            };
        }
        iterations += 1;

        let mut sums = vec![vec![0.0; dim]; k];
        let mut mass = vec![0.0; k];
        for (i, x) in d.rows().enumerate() {
            let j = assignments[i];
            let w = d.weight(i);
            mass[j] += w;
            for (s, xi) in sums[j].iter_mut().zip(x) {
                *s += w * xi;
            }
        }
        let mut taken = vec![false; d.len()];
        for j in 0..k {
            if mass[j] > 0.0 {
                centers[j] = sums[j].iter().map(|s| s / mass[j]).collect();
            } else {
                // reseed at the costliest point not already used for a reseed
                let far = (0..d.len())
                    .filter(|&i| !taken[i])
                    .max_by(|&a, &b| point_cost[a].total_cmp(&point_cost[b]).then(b.cmp(&a)));
                if let Some(i) = far {
                    taken[i] = true;
                    centers[j] = d.point(i).to_vec();
                    point_cost[i] = 0.0;
                }
            }
        }
    }
}
