//! Seeded k-means++ with Lloyd iterations.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::DiversityError;

#[derive(Debug, Clone)]
pub struct KMeansResult {
    /// Cluster index per point.
    pub assignments: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    /// Within-cluster sum of squares after each assignment step.
    pub wcss_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn assign(points: &[Vec<f64>], centroids: &[Vec<f64>]) -> Vec<usize> {
    points
        .iter()
        .map(|point| {
            let mut best = 0;
            let mut best_distance = f64::INFINITY;
            for (index, centroid) in centroids.iter().enumerate() {
                let distance = squared_distance(point, centroid);
                if distance < best_distance {
                    best_distance = distance;
                    best = index;
                }
            }
            best
        })
        .collect()
}

fn wcss(points: &[Vec<f64>], centroids: &[Vec<f64>], assignments: &[usize]) -> f64 {
    points
        .iter()
        .zip(assignments)
        .map(|(point, &cluster)| squared_distance(point, &centroids[cluster]))
        .sum()
}

/// k-means++ seeding: the first center uniform, each further center sampled
/// with probability proportional to its squared distance from the nearest
/// chosen center. Falls back to the lowest unchosen index when every
/// remaining point coincides with a center.
fn plus_plus_init<R: Rng>(points: &[Vec<f64>], k: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut chosen: Vec<usize> = Vec::with_capacity(k);
    let first = rng.random_range(0..points.len());
    chosen.push(first);
    centers.push(points[first].clone());

    let mut nearest: Vec<f64> = points
        .iter()
        .map(|p| squared_distance(p, &centers[0]))
        .collect();
    while centers.len() < k {
        let total: f64 = nearest.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random_range(0.0..total);
            let mut picked = points.len() - 1;
            for (index, &weight) in nearest.iter().enumerate() {
                if target < weight {
                    picked = index;
                    break;
                }
                target -= weight;
            }
            picked
        } else {
            (0..points.len())
                .find(|i| !chosen.contains(i))
                .unwrap_or(0)
        };
        chosen.push(next);
        centers.push(points[next].clone());
        for (index, point) in points.iter().enumerate() {
            let distance = squared_distance(point, centers.last().expect("just pushed"));
            if distance < nearest[index] {
                nearest[index] = distance;
            }
        }
    }
    centers
}

/// Lloyd iterations from a seeded k-means++ start.
///
/// Stops at convergence (no reassignment) or `max_iter`. An emptied cluster
/// is re-seeded to the point farthest from its assigned centroid. The WCSS
/// trace is non-increasing.
pub fn cluster_topics(
    points: &[Vec<f64>],
    k: usize,
    seed: u64,
    max_iter: usize,
) -> Result<KMeansResult, DiversityError> {
    if points.is_empty() {
        return Err(DiversityError::EmptyCorpus);
    }
    if k == 0 || k > points.len() {
        return Err(DiversityError::KOutOfRange {
            k,
            n_docs: points.len(),
        });
    }
    let dim = points[0].len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = plus_plus_init(points, k, &mut rng);
    let mut assignments = assign(points, &centroids);
    let mut wcss_trace = vec![wcss(points, &centroids, &assignments)];
    let mut converged = false;
    let mut iterations = 0;

    for _ in 0..max_iter {
        iterations += 1;
        // Means of the current assignment.
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (point, &cluster) in points.iter().zip(&assignments) {
            counts[cluster] += 1;
            for (acc, &value) in sums[cluster].iter_mut().zip(point) {
                *acc += value;
            }
        }
        for (cluster, count) in counts.iter().enumerate() {
            if *count > 0 {
                for value in sums[cluster].iter_mut() {
                    *value /= *count as f64;
                }
                centroids[cluster] = sums[cluster].clone();
            }
        }
        // Re-seed emptied clusters to the farthest point from its assigned
        // centroid; each reseed this round takes a distinct point.
        let mut taken: Vec<usize> = Vec::new();
        for cluster in 0..k {
            if counts[cluster] == 0 {
                let farthest = points
                    .iter()
                    .enumerate()
                    .filter(|(index, _)| !taken.contains(index))
                    .map(|(index, point)| {
                        (index, squared_distance(point, &centroids[assignments[index]]))
                    })
                    .max_by(|(ia, da), (ib, db)| da.total_cmp(db).then(ib.cmp(ia)))
                    .map(|(index, _)| index);
                if let Some(index) = farthest {
                    centroids[cluster] = points[index].clone();
                    taken.push(index);
                }
            }
        }

        let next = assign(points, &centroids);
        wcss_trace.push(wcss(points, &centroids, &next));
        if next == assignments {
            converged = true;
            break;
        }
        assignments = next;
    }

    Ok(KMeansResult {
        assignments,
        centroids,
        wcss_trace,
        iterations,
        converged,
    })
}
