//! Diagonal-covariance Gaussian mixture fitting by EM, initialized from
//! KMeans.

use super::{fit_kmeans, GmmModel};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct GmmTrainOpts {
    pub max_iters: usize,
    /// Relative log-likelihood improvement below which EM stops.
    pub tol: f64,
    /// Variance floor as a fraction of the global data variance.
    pub var_floor_fraction: f64,
}

impl Default for GmmTrainOpts {
    fn default() -> Self {
        GmmTrainOpts {
            max_iters: 100,
            tol: 1e-7,
            var_floor_fraction: 1e-4,
        }
    }
}

fn log_sum_exp(vals: &[f64]) -> f64 {
    let m = vals.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    if m.is_infinite() {
        return m;
    }
    m + vals.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// Log density of one sample under one diagonal Gaussian.
fn log_gauss(x: &[f32], mean: &[f64], var: &[f64]) -> f64 {
    let mut acc = 0.0;
    for ((&xv, &mu), &v) in x.iter().zip(mean.iter()).zip(var.iter()) {
        let d = xv as f64 - mu;
        acc += -0.5 * ((std::f64::consts::TAU * v).ln() + d * d / v);
    }
    acc
}

/// Per-sample posteriors over components, in place; returns the sample's
/// log-likelihood.
pub(crate) fn posteriors(model: &GmmModel, x: &[f32], out: &mut [f64]) -> f64 {
    for (k, slot) in out.iter_mut().enumerate() {
        *slot = model.weights[k].max(f64::MIN_POSITIVE).ln()
            + log_gauss(x, &model.means[k], &model.variances[k]);
    }
    let lse = log_sum_exp(out);
    for slot in out.iter_mut() {
        *slot = (*slot - lse).exp();
    }
    lse
}

pub fn fit_gmm(data: &[Vec<f32>], k: usize, seed: u64, opts: &GmmTrainOpts) -> Result<GmmModel> {
    if data.len() < k {
        return Err(Error::invalid(
            "data",
            format!("need at least k={k} rows, got {}", data.len()),
        ));
    }
    let n = data.len();
    let dim = data[0].len();

    // global variance sets the floor
    let mut mean = vec![0.0f64; dim];
    for x in data {
        for (m, &v) in mean.iter_mut().zip(x.iter()) {
            *m += v as f64;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let mut global_var = 0.0f64;
    for x in data {
        for (m, &v) in mean.iter().zip(x.iter()) {
            let d = v as f64 - m;
            global_var += d * d;
        }
    }
    global_var /= (n * dim) as f64;
    let var_floor = (opts.var_floor_fraction * global_var).max(1e-12);

    // init from kmeans
    let km = fit_kmeans(data, k, seed)?;
    let mut counts = vec![0usize; k];
    let mut sums = vec![vec![0.0f64; dim]; k];
    let mut sq_sums = vec![vec![0.0f64; dim]; k];
    for x in data {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (c, centroid) in km.centroids.iter().enumerate() {
            let d: f64 = x
                .iter()
                .zip(centroid.iter())
                .map(|(a, b)| {
                    let d = *a as f64 - *b as f64;
                    d * d
                })
                .sum();
            if d < best_d {
                best_d = d;
                best = c;
            }
        }
        counts[best] += 1;
        for j in 0..dim {
            sums[best][j] += x[j] as f64;
            sq_sums[best][j] += (x[j] as f64) * (x[j] as f64);
        }
    }
    let mut model = GmmModel {
        weights: counts.iter().map(|&c| (c.max(1)) as f64).collect(),
        means: Vec::with_capacity(k),
        variances: Vec::with_capacity(k),
        var_floor,
        log_likelihood_history: Vec::new(),
    };
    let wsum: f64 = model.weights.iter().sum();
    for w in &mut model.weights {
        *w /= wsum;
    }
    for c in 0..k {
        let cnt = counts[c].max(1) as f64;
        let m: Vec<f64> = sums[c].iter().map(|s| s / cnt).collect();
        let v: Vec<f64> = sq_sums[c]
            .iter()
            .zip(m.iter())
            .map(|(sq, mu)| (sq / cnt - mu * mu).max(var_floor))
            .collect();
        model.means.push(m);
        model.variances.push(v);
    }

    // EM
    let mut post = vec![0.0f64; k];
    for _iter in 0..opts.max_iters {
        let mut ll = 0.0f64;
        let mut nk = vec![0.0f64; k];
        let mut mean_acc = vec![vec![0.0f64; dim]; k];
        let mut var_acc = vec![vec![0.0f64; dim]; k];
        for x in data {
            ll += posteriors(&model, x, &mut post);
            for c in 0..k {
                let g = post[c];
                if g == 0.0 {
                    continue;
                }
                nk[c] += g;
                for j in 0..dim {
                    let v = x[j] as f64;
                    mean_acc[c][j] += g * v;
                    var_acc[c][j] += g * v * v;
                }
            }
        }
        ll /= n as f64;
        model.log_likelihood_history.push(ll);

        for c in 0..k {
            let denom = nk[c].max(1e-12);
            model.weights[c] = nk[c] / n as f64;
            for j in 0..dim {
                let mu = mean_acc[c][j] / denom;
                model.means[c][j] = mu;
                model.variances[c][j] = (var_acc[c][j] / denom - mu * mu).max(var_floor);
            }
        }
        // keep weights exactly on the simplex
        let wsum: f64 = model.weights.iter().sum();
        if wsum > 0.0 {
            for w in &mut model.weights {
                *w /= wsum;
            }
        }

        let h = &model.log_likelihood_history;
        if h.len() >= 2 {
            let prev = h[h.len() - 2];
            if (ll - prev).abs() <= opts.tol * prev.abs().max(1.0) {
                break;
            }
        }
    }

    model.validate()?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn two_clusters(seed: u64, n_each: usize) -> Vec<Vec<f32>> {
        let mut r = rng::seeded(seed);
        let mut data = Vec::new();
        for _ in 0..n_each {
            data.push(vec![
                -4.0 + rng::normal_f32(&mut r),
                rng::normal_f32(&mut r),
            ]);
        }
        for _ in 0..n_each {
            data.push(vec![4.0 + rng::normal_f32(&mut r), rng::normal_f32(&mut r)]);
        }
        data
    }

    #[test]
    fn recovers_two_separated_clusters() {
        let data = two_clusters(5, 400);
        let model = fit_gmm(&data, 2, 3, &GmmTrainOpts::default()).unwrap();
        let mut mx: Vec<f64> = model.means.iter().map(|m| m[0]).collect();
        mx.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((mx[0] + 4.0).abs() < 0.1, "means {mx:?}");
        assert!((mx[1] - 4.0).abs() < 0.1, "means {mx:?}");
        for w in &model.weights {
            assert!((w - 0.5).abs() < 0.05, "weights {:?}", model.weights);
        }
    }

    #[test]
    fn single_component_matches_sample_moments() {
        let data = two_clusters(7, 300);
        let model = fit_gmm(&data, 1, 1, &GmmTrainOpts::default()).unwrap();
        let n = data.len() as f64;
        for j in 0..2 {
            let mean: f64 = data.iter().map(|x| x[j] as f64).sum::<f64>() / n;
            let var: f64 = data
                .iter()
                .map(|x| (x[j] as f64 - mean) * (x[j] as f64 - mean))
                .sum::<f64>()
                / n;
            assert!((model.means[0][j] - mean).abs() < 1e-6);
            assert!((model.variances[0][j] - var).abs() < 1e-6 * var.max(1.0));
        }
        assert!((model.weights[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn log_likelihood_is_monotone() {
        let data = two_clusters(9, 150);
        let model = fit_gmm(&data, 3, 11, &GmmTrainOpts::default()).unwrap();
        let h = &model.log_likelihood_history;
        assert!(h.len() >= 2);
        for pair in h.windows(2) {
            assert!(
                pair[1] >= pair[0] - 1e-9 * pair[0].abs().max(1.0),
                "log-likelihood decreased: {pair:?}"
            );
        }
    }

    #[test]
    fn variances_respect_floor() {
        // collinear data would degenerate without the floor
        let data: Vec<Vec<f32>> = (0..100).map(|i| vec![i as f32 * 0.1, 0.0]).collect();
        let model = fit_gmm(&data, 2, 0, &GmmTrainOpts::default()).unwrap();
        for vs in &model.variances {
            for &v in vs {
                assert!(v >= model.var_floor);
            }
        }
    }

    #[test]
    fn too_few_rows_rejected() {
        let data = vec![vec![0.0f32; 2]];
        assert!(fit_gmm(&data, 2, 0, &GmmTrainOpts::default()).is_err());
    }
}
