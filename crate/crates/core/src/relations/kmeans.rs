//! Lloyd's algorithm with k-means++ seeding on dense vectors.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::SparseVector;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_for};

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel {
    pub k: usize,
    pub centroids: Vec<Vec<f64>>,
    /// Cluster index per input point, in input order.
    pub assignments: Vec<usize>,
    /// Sum of squared distances of every point to its assigned centroid.
    pub inertia: f64,
    /// Inertia after each assignment step; non-increasing.
    pub inertia_history: Vec<f64>,
    pub iterations: usize,
    pub seed: Option<u64>,
}

impl ClusterModel {
    pub fn members(&self, cluster: usize) -> impl Iterator<Item = usize> + '_ {
        self.assignments
            .iter()
            .enumerate()
            .filter(move |(_, &c)| c == cluster)
            .map(|(i, _)| i)
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &a in &self.assignments {
            sizes[a] += 1;
        }
        sizes
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn check_points(points: &[Vec<f64>]) -> Result<usize> {
    let dim = points.first().map(Vec::len).unwrap_or(0);
    for (i, p) in points.iter().enumerate() {
        if p.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: p.len(),
            });
        }
        if p.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!("k-means input point {i}")));
        }
    }
    Ok(dim)
}

fn distinct_count(points: &[Vec<f64>]) -> usize {
    let mut keys: Vec<Vec<u64>> = points
        .iter()
        .map(|p| p.iter().map(|x| (x + 0.0).to_bits()).collect())
        .collect();
    keys.sort_unstable();
    keys.dedup();
    keys.len()
}

/// k-means++ seeding: first centre uniform, then proportional to the squared
/// distance to the nearest chosen centre.
pub fn kmeans_plus_plus(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut centroids = Vec::with_capacity(k);
    centroids.push(points[rng.random_range(0..n)].clone());
    let mut nearest: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = None;
            for (i, d) in nearest.iter().enumerate() {
                acc += d;
                if *d > 0.0 && acc > target {
                    chosen = Some(i);
                    break;
                }
            }
            // rounding can leave `acc` a hair below `target`
            chosen.unwrap_or_else(|| nearest.iter().rposition(|d| *d > 0.0).unwrap())
        } else {
            rng.random_range(0..n)
        };
        let c = points[pick].clone();
        for (d, p) in nearest.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, &c));
        }
        centroids.push(c);
    }
    centroids
}

fn assign(points: &[Vec<f64>], centroids: &[Vec<f64>], out: &mut [usize]) {
    for (slot, p) in out.iter_mut().zip(points) {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (c, centroid) in centroids.iter().enumerate() {
            let d = sq_dist(p, centroid);
            if d < best_d {
                best_d = d;
                best = c;
            }
        }
        *slot = best;
    }
}

/// Moves the point farthest from its centroid into each empty cluster.
fn reseed_empty(points: &[Vec<f64>], centroids: &mut [Vec<f64>], assignments: &mut [usize]) {
    let k = centroids.len();
    loop {
        let mut sizes = vec![0usize; k];
        for &a in assignments.iter() {
            sizes[a] += 1;
        }
        let Some(empty) = sizes.iter().position(|&s| s == 0) else {
            return;
        };
        let (far, _) = points
            .iter()
            .enumerate()
            .filter(|(i, _)| sizes[assignments[*i]] > 1)
            .map(|(i, p)| (i, sq_dist(p, &centroids[assignments[i]])))
            .fold((usize::MAX, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if far == usize::MAX {
            return;
        }
        centroids[empty] = points[far].clone();
        assignments[far] = empty;
    }
}

fn inertia(points: &[Vec<f64>], centroids: &[Vec<f64>], assignments: &[usize]) -> f64 {
    points
        .iter()
        .zip(assignments)
        .map(|(p, &a)| sq_dist(p, &centroids[a]))
        .sum()
}

fn update(points: &[Vec<f64>], assignments: &[usize], k: usize, dim: usize, prev: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (p, &a) in points.iter().zip(assignments) {
        counts[a] += 1;
        for (s, x) in sums[a].iter_mut().zip(p) {
            *s += x;
        }
    }
    sums.into_iter()
        .zip(counts)
        .enumerate()
        .map(|(c, (s, n))| {
            if n == 0 {
                prev[c].clone()
            } else {
                s.into_iter().map(|x| x / n as f64).collect()
            }
        })
        .collect()
}

/// Lloyd iterations from explicit initial centroids. Stops when the largest
/// centroid displacement falls below `tol` or after `max_iters` updates.
pub fn kmeans_fit_from(
    points: &[Vec<f64>],
    initial: Vec<Vec<f64>>,
    max_iters: usize,
    tol: f64,
) -> Result<ClusterModel> {
    let dim = check_points(points)?;
    let k = initial.len();
    if k == 0 || k > points.len() {
        return Err(Error::invalid(format!(
            "k = {k} must be in 1..={}",
            points.len()
        )));
    }
    if max_iters == 0 || tol.is_nan() || tol < 0.0 {
        return Err(Error::invalid("max_iters must be >= 1 and tol >= 0"));
    }
    check_points(&initial)?;
    if initial.iter().any(|c| c.len() != dim) {
        return Err(Error::invalid("initial centroid dimension mismatch"));
    }

    let mut centroids = initial;
    let mut assignments = vec![0usize; points.len()];
    let mut history = Vec::new();
    let mut iterations = 0;
    for _ in 0..max_iters {
        assign(points, &centroids, &mut assignments);
        reseed_empty(points, &mut centroids, &mut assignments);
        history.push(inertia(points, &centroids, &assignments));
        let next = update(points, &assignments, k, dim, &centroids);
        let shift = centroids
            .iter()
            .zip(&next)
            .map(|(a, b)| sq_dist(a, b).sqrt())
            .fold(0.0, f64::max);
        centroids = next;
        iterations += 1;
        if shift < tol || shift == 0.0 {
            break;
        }
    }
    assign(points, &centroids, &mut assignments);
    reseed_empty(points, &mut centroids, &mut assignments);
    let final_inertia = inertia(points, &centroids, &assignments);
    history.push(final_inertia);
    Ok(ClusterModel {
        k,
        centroids,
        assignments,
        inertia: final_inertia,
        inertia_history: history,
        iterations,
        seed: None,
    })
}

/// Seeded k-means++ followed by Lloyd iterations.
pub fn kmeans_fit(
    points: &[Vec<f64>],
    k: usize,
    seed: u64,
    max_iters: usize,
    tol: f64,
) -> Result<ClusterModel> {
    check_points(points)?;
    if k == 0 {
        return Err(Error::invalid("k must be >= 1"));
    }
    let distinct = distinct_count(points);
    if k > distinct {
        return Err(Error::invalid(format!(
            "k = {k} exceeds the {distinct} distinct point(s)"
        )));
    }
    let mut rng = rng_for(seed, &[0x6b6d]);
    let init = kmeans_plus_plus(points, k, &mut rng);
    let mut model = kmeans_fit_from(points, init, max_iters, tol)?;
    model.seed = Some(seed);
    Ok(model)
}

/// Best of `restarts` seeded runs by final inertia; the earliest run wins
/// ties. Run `r` is seeded with `derive_seed(seed, &[r])`.
pub fn kmeans_fit_restarts(
    points: &[Vec<f64>],
    k: usize,
    seed: u64,
    restarts: usize,
    max_iters: usize,
    tol: f64,
) -> Result<ClusterModel> {
    let mut best: Option<ClusterModel> = None;
    for r in 0..restarts.max(1) {
        let model = kmeans_fit(points, k, derive_seed(seed, &[r as u64]), max_iters, tol)?;
        if best.as_ref().is_none_or(|b| model.inertia < b.inertia) {
            best = Some(model);
        }
    }
    Ok(best.expect("at least one run"))
}

pub fn kmeans_fit_sparse(
    vectors: &[SparseVector],
    k: usize,
    seed: u64,
    restarts: usize,
    max_iters: usize,
    tol: f64,
) -> Result<ClusterModel> {
    let dense: Vec<Vec<f64>> = vectors.iter().map(SparseVector::to_dense).collect();
    kmeans_fit_restarts(&dense, k, seed, restarts, max_iters, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::{prop_assert, prop_assert_eq, proptest};

    fn grid_points() -> Vec<Vec<f64>> {
        vec![
            vec![0.0, 0.0],
            vec![0.1, 0.0],
            vec![5.0, 5.0],
            vec![5.1, 5.0],
            vec![-4.0, 3.0],
        ]
    }

    #[test]
    fn restarts_never_worse_than_first_run() {
        let pts = grid_points();
        let single = kmeans_fit(&pts, 3, derive_seed(4, &[0]), 300, 1e-6).unwrap();
        let best = kmeans_fit_restarts(&pts, 3, 4, 10, 300, 1e-6).unwrap();
        assert!(best.inertia <= single.inertia);
        assert_eq!(best, kmeans_fit_restarts(&pts, 3, 4, 10, 300, 1e-6).unwrap());
    }

    #[test]
    fn k_equals_n_gives_zero_inertia() {
        let pts = grid_points();
        let m = kmeans_fit(&pts, pts.len(), 3, 300, 1e-6).unwrap();
        assert_eq!(m.inertia, 0.0);
        let mut a = m.assignments.clone();
        a.sort();
        a.dedup();
        assert_eq!(a.len(), pts.len());
    }

    #[test]
    fn identical_points() {
        let pts = vec![vec![1.0, 2.0]; 6];
        let m = kmeans_fit(&pts, 1, 0, 300, 1e-6).unwrap();
        assert_eq!(m.inertia, 0.0);
        assert!(kmeans_fit(&pts, 3, 0, 300, 1e-6).is_err());
    }

    #[test]
    fn rejects_non_finite() {
        let pts = vec![vec![0.0], vec![f64::NAN]];
        assert!(matches!(kmeans_fit(&pts, 1, 0, 10, 0.0), Err(Error::NonFinite(_))));
    }

    #[test]
    fn reseeds_empty_cluster() {
        let pts = vec![vec![0.0], vec![1.0], vec![10.0]];
        // the second centroid starts far from everything and would stay empty
        let m = kmeans_fit_from(&pts, vec![vec![0.5], vec![100.0]], 50, 0.0).unwrap();
        assert_eq!(m.cluster_sizes().iter().filter(|&&s| s == 0).count(), 0);
        assert!(m.inertia_history.windows(2).all(|w| w[1] <= w[0]));
    }

    proptest! {
        #[test]
        fn inertia_never_increases(seed in 0u64..500, k in 1usize..5, n in 5usize..40) {
            let mut rng = rng_for(seed, &[1]);
            let pts: Vec<Vec<f64>> = (0..n)
                .map(|_| vec![rng.random::<f64>() * 10.0, rng.random::<f64>() * 10.0])
                .collect();
            let m = kmeans_fit(&pts, k, seed, 300, 1e-6).unwrap();
            prop_assert!(m.inertia_history.windows(2).all(|w| w[1] <= w[0]));
            prop_assert!(m.assignments.iter().all(|&a| a < k));
            prop_assert!(m.inertia >= 0.0);
            let again = kmeans_fit(&pts, k, seed, 300, 1e-6).unwrap();
            prop_assert_eq!(m, again);
        }
    }
}
