//! Spectral clustering, k-means, classical MDS and the adjusted Rand index.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::DistanceMatrix;
use crate::error::{Error, Result};

pub const KMEANS_RESTARTS: usize = 20;
pub const KMEANS_SEED: u64 = 0x5eed;
const KMEANS_MAX_ITER: usize = 300;

/// Eigenpairs sorted by decreasing eigenvalue; ties keep nalgebra's order.
fn sorted_eigen(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = DMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    (values, vectors)
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Relabels so that labels appear in order of first occurrence.
pub fn canonical_labels(labels: &[usize]) -> Vec<usize> {
    let mut map: Vec<(usize, usize)> = Vec::new();
    labels
        .iter()
        .map(|l| match map.iter().find(|(k, _)| k == l) {
            Some(&(_, v)) => v,
            None => {
                let v = map.len();
                map.push((*l, v));
                v
            }
        })
        .collect()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

fn lloyd(points: &[Vec<f64>], mut centers: Vec<Vec<f64>>) -> (Vec<usize>, f64) {
    let k = centers.len();
    let dim = points[0].len();
    let mut labels = vec![usize::MAX; points.len()];
    for _ in 0..KMEANS_MAX_ITER {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let best = (0..k)
                .min_by(|&a, &b| sq_dist(p, &centers[a]).total_cmp(&sq_dist(p, &centers[b])))
                .unwrap();
            if labels[i] != best {
                labels[i] = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &l) in points.iter().zip(&labels) {
            counts[l] += 1;
            for (s, v) in sums[l].iter_mut().zip(p) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                centers[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            } else {
                // reseed an empty cluster at the worst-served point
                let far = (0..points.len())
                    .max_by(|&a, &b| {
                        sq_dist(&points[a], &centers[labels[a]]).total_cmp(&sq_dist(&points[b], &centers[labels[b]]))
                    })
                    .unwrap();
                centers[c] = points[far].clone();
            }
        }
    }
    let inertia = points
        .iter()
        .zip(&labels)
        .map(|(p, &l)| sq_dist(p, &centers[l]))
        .sum();
    (labels, inertia)
}

fn kmeans_pp(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut centers = vec![points[rng.random_range(0..n)].clone()];
    while centers.len() < k {
        let d2: Vec<f64> = points
            .iter()
            .map(|p| centers.iter().map(|c| sq_dist(p, c)).fold(f64::INFINITY, f64::min))
            .collect();
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut u = rng.random_range(0.0..total);
            let mut idx = n - 1;
            for (i, d) in d2.iter().enumerate() {
                if u < *d {
                    idx = i;
                    break;
                }
                u -= d;
            }
            idx
        } else {
            rng.random_range(0..n)
        };
        centers.push(points[pick].clone());
    }
    centers
}

/// Farthest-point seeding started at the point farthest from the mean; does
/// not depend on the input order except through exact ties.
fn farthest_point(points: &[Vec<f64>], k: usize) -> Vec<Vec<f64>> {
    let dim = points[0].len();
    let mean: Vec<f64> = (0..dim)
        .map(|j| points.iter().map(|p| p[j]).sum::<f64>() / points.len() as f64)
        .collect();
    let first = (0..points.len())
        .max_by(|&a, &b| sq_dist(&points[a], &mean).total_cmp(&sq_dist(&points[b], &mean)))
        .unwrap();
    let mut centers = vec![points[first].clone()];
    while centers.len() < k {
        let next = (0..points.len())
            .max_by(|&a, &b| {
                let da = centers.iter().map(|c| sq_dist(&points[a], c)).fold(f64::INFINITY, f64::min);
                let db = centers.iter().map(|c| sq_dist(&points[b], c)).fold(f64::INFINITY, f64::min);
                da.total_cmp(&db)
            })
            .unwrap();
        centers.push(points[next].clone());
    }
    centers
}

/// Best-of-restarts k-means; labels in first-occurrence order.
pub fn kmeans(points: &[Vec<f64>], k: usize) -> Result<Vec<usize>> {
    if k == 0 || k > points.len() {
        return Err(Error::invalid(format!("k = {k} with {} points", points.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(KMEANS_SEED);
    let mut best = lloyd(points, farthest_point(points, k));
    for _ in 0..KMEANS_RESTARTS {
        let run = lloyd(points, kmeans_pp(points, k, &mut rng));
        if run.1 < best.1 - 1e-12 * (1.0 + best.1) {
            best = run;
        }
    }
    Ok(canonical_labels(&best.0))
}

/// Normalized spectral clustering of a distance matrix into `k` groups.
pub fn spectral_cluster(dm: &DistanceMatrix, k: usize) -> Result<Vec<usize>> {
    let n = dm.len();
    if k < 2 || k > n {
        return Err(Error::invalid(format!("spectral clustering needs 2 <= K <= n, got K = {k}, n = {n}")));
    }
    let off: Vec<f64> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .map(|(i, j)| dm.values[(i, j)])
        .collect();
    let tau = median(off);
    if !(tau > 0.0) && dm.values.iter().all(|v| *v == 0.0) {
        log::warn!("all distances are zero; returning a single cluster");
        return Ok(vec![0; n]);
    }
    let tau = if tau > 0.0 {
        tau
    } else {
        dm.values.iter().copied().filter(|v| *v > 0.0).fold(f64::INFINITY, f64::min)
    };
    let w = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            0.0
        } else {
            (-dm.values[(i, j)].powi(2) / (2.0 * tau * tau)).exp()
        }
    });
    let inv_sqrt: Vec<f64> = (0..n)
        .map(|i| {
            let deg = w.row(i).sum();
            if deg > 0.0 {
                1.0 / deg.sqrt()
            } else {
                0.0
            }
        })
        .collect();
    let m = DMatrix::from_fn(n, n, |i, j| w[(i, j)] * inv_sqrt[i] * inv_sqrt[j]);
    let (_, vectors) = sorted_eigen(m);
    let points: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let row: Vec<f64> = (0..k).map(|j| vectors[(i, j)]).collect();
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                row.iter().map(|v| v / norm).collect()
            } else {
                row
            }
        })
        .collect();
    kmeans(&points, k)
}

/// Classical (Torgerson) MDS; rows are points.
pub fn classical_mds(dm: &DistanceMatrix, dim: usize) -> Result<DMatrix<f64>> {
    let n = dm.len();
    if n == 0 || dim > n.saturating_sub(1).max(1) {
        return Err(Error::invalid(format!("MDS dimension {dim} with {n} points")));
    }
    let d2 = dm.values.map(|v| v * v);
    let row_mean: Vec<f64> = (0..n).map(|i| d2.row(i).mean()).collect();
    let total = d2.mean();
    let b = DMatrix::from_fn(n, n, |i, j| -0.5 * (d2[(i, j)] - row_mean[i] - row_mean[j] + total));
    let (values, vectors) = sorted_eigen(b);
    let mut out = DMatrix::zeros(n, dim);
    for j in 0..dim {
        let s = values[j].max(0.0).sqrt();
        // fix the sign so the largest-magnitude entry is positive
        let col = vectors.column(j);
        let pivot = (0..n).max_by(|&a, &b| col[a].abs().total_cmp(&col[b].abs())).unwrap();
        let sign = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            out[(i, j)] = sign * s * col[i];
        }
    }
    Ok(out)
}

fn choose2(x: usize) -> f64 {
    (x * x.saturating_sub(1)) as f64 / 2.0
}

/// Adjusted Rand index of two labelings.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len();
    let ka = a.iter().max().map_or(0, |m| m + 1);
    let kb = b.iter().max().map_or(0, |m| m + 1);
    let mut table = vec![vec![0usize; kb]; ka];
    for (&x, &y) in a.iter().zip(b) {
        table[x][y] += 1;
    }
    let index: f64 = table.iter().flatten().map(|&c| choose2(c)).sum();
    let sa: f64 = table.iter().map(|r| choose2(r.iter().sum())).sum();
    let sb: f64 = (0..kb).map(|j| choose2(table.iter().map(|r| r[j]).sum())).sum();
    let total = choose2(n);
    if total == 0.0 {
        return 1.0;
    }
    let expected = sa * sb / total;
    let max = 0.5 * (sa + sb);
    if max == expected {
        return 1.0;
    }
    (index - expected) / (max - expected)
}
