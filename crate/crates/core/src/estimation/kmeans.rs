use rand::Rng;

use crate::error::{Error, Result};
use crate::matrix::{squared_distance, Matrix};

pub const MAX_ITERATIONS: usize = 300;

/// Result of one K-Means run.
#[derive(Debug, Clone)]
pub struct ClusterAssignment {
    pub assignments: Vec<usize>,
    pub centroids: Matrix,
    pub inertia: f64,
    /// Inertia after the initial assignment and after every Lloyd iteration.
    pub inertia_history: Vec<f64>,
    /// Clusters with no members at termination.
    pub empty_clusters: Vec<usize>,
    pub iterations: usize,
}

impl ClusterAssignment {
    pub fn n_clusters(&self) -> usize {
        self.centroids.rows()
    }
}

fn nearest(point: &[f64], centroids: &Matrix) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for c in 0..centroids.rows() {
        let d = squared_distance(point, centroids.row(c));
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn sample_by_weight<R: Rng + ?Sized>(weights: &[f64], total: f64, rng: &mut R) -> usize {
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        acc += w;
        if acc > target {
            return i;
        }
    }
    weights.len() - 1
}

/// Greedy k-means++: each step draws `2 + ln C` candidates by D² weighting and
/// keeps the one that lowers the potential most.
fn kmeans_plus_plus<R: Rng + ?Sized>(data: &Matrix, n_clusters: usize, rng: &mut R) -> Matrix {
    let n = data.rows();
    let trials = 2 + (n_clusters as f64).ln() as usize;
    let mut centroids = Matrix::zeros(n_clusters, data.cols());
    let first = rng.random_range(0..n);
    centroids.row_mut(0).copy_from_slice(data.row(first));
    let mut d2: Vec<f64> = (0..n)
        .map(|i| squared_distance(data.row(i), centroids.row(0)))
        .collect();
    let mut candidate_d2 = vec![0.0; n];
    for c in 1..n_clusters {
        let total: f64 = d2.iter().sum();
        if total <= 0.0 {
            // every point already coincides with a centroid
            let pick = rng.random_range(0..n);
            centroids.row_mut(c).copy_from_slice(data.row(pick));
            continue;
        }
        let mut best: Option<(usize, f64, Vec<f64>)> = None;
        for _ in 0..trials {
            let pick = sample_by_weight(&d2, total, rng);
            let mut potential = 0.0;
            for (i, (cd, &d)) in candidate_d2.iter_mut().zip(&d2).enumerate() {
                *cd = d.min(squared_distance(data.row(i), data.row(pick)));
                potential += *cd;
            }
            if best.as_ref().is_none_or(|b| potential < b.1) {
                best = Some((pick, potential, candidate_d2.clone()));
            }
        }
        let (pick, _, next) = best.expect("at least two trials");
        centroids.row_mut(c).copy_from_slice(data.row(pick));
        d2 = next;
    }
    centroids
}

/// Lloyd's algorithm from a k-means++ start. Stops at an assignment fixpoint
/// or after [`MAX_ITERATIONS`]. An empty cluster is reseeded with the point
/// farthest from its own centroid (taken from a cluster with at least two
/// members).
pub fn kmeans<R: Rng + ?Sized>(
    data: &Matrix,
    n_clusters: usize,
    rng: &mut R,
) -> Result<ClusterAssignment> {
    let n = data.rows();
    if n_clusters == 0 {
        return Err(Error::invalid("cluster count", "must be >= 1"));
    }
    if n_clusters > n {
        return Err(Error::TooManyClusters {
            clusters: n_clusters,
            samples: n,
        });
    }
    let dim = data.cols();
    let mut centroids = kmeans_plus_plus(data, n_clusters, rng);

    let mut assignments = vec![0usize; n];
    let mut dist = vec![0.0f64; n];
    for i in 0..n {
        let (c, d) = nearest(data.row(i), &centroids);
        assignments[i] = c;
        dist[i] = d;
    }
    let mut history = vec![dist.iter().sum::<f64>()];
    let mut iterations = 0;

    while iterations < MAX_ITERATIONS {
        iterations += 1;

        let mut counts = vec![0usize; n_clusters];
        let mut sums = Matrix::zeros(n_clusters, dim);
        for i in 0..n {
            let c = assignments[i];
            counts[c] += 1;
            for (s, x) in sums.row_mut(c).iter_mut().zip(data.row(i)) {
                *s += x;
            }
        }
        for c in 0..n_clusters {
            if counts[c] > 0 {
                let inv = 1.0 / counts[c] as f64;
                for (dst, s) in centroids.row_mut(c).iter_mut().zip(sums.row(c)) {
                    *dst = s * inv;
                }
            }
        }
        for i in 0..n {
            dist[i] = squared_distance(data.row(i), centroids.row(assignments[i]));
        }

        let mut reseeded = false;
        for c in 0..n_clusters {
            if counts[c] > 0 {
                continue;
            }
            let donor = (0..n).filter(|&i| counts[assignments[i]] > 1).fold(
                None,
                |best: Option<usize>, i| match best {
                    Some(b) if dist[b] >= dist[i] => Some(b),
                    _ => Some(i),
                },
            );
            if let Some(p) = donor {
                counts[assignments[p]] -= 1;
                counts[c] = 1;
                assignments[p] = c;
                dist[p] = 0.0;
                centroids.row_mut(c).copy_from_slice(data.row(p));
                reseeded = true;
            }
        }

        let mut changed = false;
        for i in 0..n {
            let (c, d) = nearest(data.row(i), &centroids);
            // keep the current cluster on exact ties so the fixpoint is stable
            if c != assignments[i] && d < dist[i] {
                assignments[i] = c;
                changed = true;
            }
            dist[i] = d.min(dist[i]);
        }
        history.push(dist.iter().sum());
        if !changed && !reseeded {
            break;
        }
    }

    let mut counts = vec![0usize; n_clusters];
    for &c in &assignments {
        counts[c] += 1;
    }
    let empty_clusters = (0..n_clusters).filter(|&c| counts[c] == 0).collect();
    Ok(ClusterAssignment {
        assignments,
        centroids,
        inertia: *history.last().unwrap(),
        inertia_history: history,
        empty_clusters,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand_distr::{Distribution, Normal};

    fn seeded(s: u64) -> rng::StreamRng {
        rng::stream(s, 0, rng::tag::KMEANS)
    }

    #[test]
    fn separated_pairs() {
        let data = Matrix::from_rows(&[[0.0], [0.1], [10.0], [10.1]]);
        for s in 0..10 {
            let r = kmeans(&data, 2, &mut seeded(s)).unwrap();
            assert_eq!(r.assignments[0], r.assignments[1]);
            assert_eq!(r.assignments[2], r.assignments[3]);
            assert_ne!(r.assignments[0], r.assignments[2]);
        }
    }

    #[test]
    fn single_cluster_is_mean() {
        let data = Matrix::from_rows(&[[1.0, 2.0], [3.0, -2.0], [5.0, 6.0]]);
        let r = kmeans(&data, 1, &mut seeded(3)).unwrap();
        assert!((r.centroids.get(0, 0) - 3.0).abs() < 1e-12);
        assert!((r.centroids.get(0, 1) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn too_many_clusters() {
        let data = Matrix::from_rows(&[[1.0], [2.0]]);
        assert!(matches!(
            kmeans(&data, 3, &mut seeded(0)),
            Err(Error::TooManyClusters {
                clusters: 3,
                samples: 2
            })
        ));
    }

    #[test]
    fn three_far_gaussians_are_pure() {
        let centers = [[0.0, 0.0], [20.0, 0.0], [10.0, 17.320508]];
        for s in 0..10u64 {
            let mut g = rng::stream(s, 0, rng::tag::SYNTHETIC);
            let noise = Normal::new(0.0, 1.0).unwrap();
            let mut rows = Vec::new();
            let mut truth = Vec::new();
            for (c, ctr) in centers.iter().enumerate() {
                for _ in 0..50 {
                    rows.push([ctr[0] + noise.sample(&mut g), ctr[1] + noise.sample(&mut g)]);
                    truth.push(c);
                }
            }
            let r = kmeans(&Matrix::from_rows(&rows), 3, &mut seeded(s)).unwrap();
            for c in 0..3 {
                let ids: Vec<_> = (0..truth.len())
                    .filter(|&i| truth[i] == c)
                    .map(|i| r.assignments[i])
                    .collect();
                assert!(
                    ids.iter().all(|&a| a == ids[0]),
                    "seed {s}: class {c} split"
                );
            }
        }
    }

    #[test]
    fn inertia_non_increasing_and_duplicates_handled() {
        let mut g = rng::stream(11, 0, rng::tag::SYNTHETIC);
        let mut rows: Vec<[f64; 3]> = (0..200)
            .map(|_| [g.random::<f64>(), g.random::<f64>(), g.random::<f64>()])
            .collect();
        rows.extend(std::iter::repeat_n([0.5, 0.5, 0.5], 30));
        let data = Matrix::from_rows(&rows);
        for c in [2, 7, 25, 60] {
            let r = kmeans(&data, c, &mut seeded(c as u64)).unwrap();
            for w in r.inertia_history.windows(2) {
                assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-12, "{w:?}");
            }
            assert!(r.inertia >= 0.0);
            assert!(r.assignments.iter().all(|&a| a < c));
        }
    }
}
