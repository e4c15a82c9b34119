//! Seeded KMeans: ++-style init, Lloyd iterations, farthest-point
//! re-seeding of empty clusters.

use crate::error::{Error, Result};
use crate::rng;
use rand::Rng;

pub struct KmeansResult {
    pub centroids: Vec<Vec<f32>>,
    /// Within-cluster sum of squares after every Lloyd iteration.
    pub wcss_history: Vec<f64>,
}

fn sq_dist(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| {
            let d = *x as f64 - *y as f64;
            d * d
        })
        .sum()
}

pub fn fit_kmeans(data: &[Vec<f32>], k: usize, seed: u64) -> Result<KmeansResult> {
    if k == 0 {
        return Err(Error::invalid("k", "need at least one cluster"));
    }
    if data.len() < k {
        return Err(Error::invalid(
            "data",
            format!("need at least k={k} rows, got {}", data.len()),
        ));
    }
    let dim = data[0].len();
    for (i, row) in data.iter().enumerate() {
        if row.len() != dim {
            return Err(Error::ShapeMismatch {
                expected: format!("row dim {dim}"),
                got: format!("row {i} has dim {}", row.len()),
            });
        }
    }

    let mut r = rng::seeded(seed);

    // ++-style seeding: next centroid drawn proportional to squared
    // distance from the chosen set
    let mut centroids: Vec<Vec<f32>> = Vec::with_capacity(k);
    centroids.push(data[r.gen_range(0..data.len())].clone());
    let mut d2: Vec<f64> = data.iter().map(|x| sq_dist(x, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total <= 0.0 {
            r.gen_range(0..data.len())
        } else {
            let target = r.gen::<f64>() * total;
            let mut acc = 0.0;
            let mut idx = data.len() - 1;
            for (i, &w) in d2.iter().enumerate() {
                acc += w;
                if acc >= target {
                    idx = i;
                    break;
                }
            }
            idx
        };
        centroids.push(data[pick].clone());
        let last = centroids.last().unwrap();
        for (slot, x) in d2.iter_mut().zip(data.iter()) {
            *slot = slot.min(sq_dist(x, last));
        }
    }

    let max_iters = 100;
    let mut assignment = vec![0usize; data.len()];
    let mut wcss_history = Vec::new();
    let mut prev_wcss = f64::INFINITY;
    for _ in 0..max_iters {
        // assign
        let mut wcss = 0.0;
        for (i, x) in data.iter().enumerate() {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (c, centroid) in centroids.iter().enumerate() {
                let d = sq_dist(x, centroid);
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            assignment[i] = best;
            wcss += best_d;
        }
        wcss_history.push(wcss);

        // update
        let mut sums = vec![vec![0.0f64; dim]; k];
        let mut counts = vec![0usize; k];
        for (x, &a) in data.iter().zip(assignment.iter()) {
            counts[a] += 1;
            for (s, &v) in sums[a].iter_mut().zip(x.iter()) {
                *s += v as f64;
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                // re-seed from the point farthest from its centroid
                let far = (0..data.len())
                    .max_by(|&i, &j| {
                        sq_dist(&data[i], &centroids[assignment[i]])
                            .partial_cmp(&sq_dist(&data[j], &centroids[assignment[j]]))
                            .unwrap()
                    })
                    .unwrap();
                centroids[c] = data[far].clone();
            } else {
                for (slot, s) in centroids[c].iter_mut().zip(sums[c].iter()) {
                    *slot = (s / counts[c] as f64) as f32;
                }
            }
        }

        if prev_wcss.is_finite() && (prev_wcss - wcss).abs() <= 1e-10 * prev_wcss.max(1.0) {
            break;
        }
        prev_wcss = wcss;
    }

    Ok(KmeansResult {
        centroids,
        wcss_history,
    })
}
