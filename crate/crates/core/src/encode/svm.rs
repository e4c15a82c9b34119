//! One-vs-all linear SVM trained by dual coordinate descent on the L1
//! hinge loss, plus prediction and the mean-accuracy metric.

use super::SvmModel;
use crate::error::{Error, Result};
use crate::rng;
use rand::Rng;

#[derive(Debug, Clone, Copy)]
pub struct SvmTrainOpts {
    pub max_epochs: usize,
    /// Stop when the largest projected-gradient violation over an epoch
    /// falls below this.
    pub tol: f64,
    /// Value of the appended bias feature.
    pub bias_scale: f64,
}

impl Default for SvmTrainOpts {
    fn default() -> Self {
        SvmTrainOpts {
            max_epochs: 1000,
            tol: 1e-5,
            bias_scale: 1.0,
        }
    }
}

/// Dual coordinate descent for one binary problem; returns the augmented
/// weight vector (bias last) and the primal objective per epoch.
///
/// The dual objective decreases with every coordinate step, but the primal
/// can wobble at epoch granularity, so the best-primal iterate seen at an
/// epoch boundary is kept and returned; at convergence it coincides with
/// the final iterate.
fn train_binary(
    x: &[Vec<f32>],
    labels: &[f64],
    c: f64,
    bias_scale: f64,
    opts: &SvmTrainOpts,
    rng: &mut rng::SeededRng,
) -> (Vec<f64>, Vec<f64>) {
    let n = x.len();
    let dim = x[0].len();
    let aug = dim + 1;

    // Q_ii over augmented features
    let qii: Vec<f64> = x
        .iter()
        .map(|row| {
            row.iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>() + bias_scale * bias_scale
        })
        .collect();

    let mut alpha = vec![0.0f64; n];
    let mut w = vec![0.0f64; aug];
    let mut order: Vec<usize> = (0..n).collect();
    let mut history = Vec::new();

    let dot_aug = |w: &[f64], row: &[f32]| -> f64 {
        let mut acc = 0.0;
        for (a, &b) in w[..dim].iter().zip(row.iter()) {
            acc += a * b as f64;
        }
        acc + w[dim] * bias_scale
    };

    let primal = |w: &[f64]| -> f64 {
        let reg: f64 = 0.5 * w.iter().map(|v| v * v).sum::<f64>();
        let hinge: f64 = x
            .iter()
            .zip(labels.iter())
            .map(|(row, &y)| (1.0 - y * dot_aug(w, row)).max(0.0))
            .sum();
        reg + c * hinge
    };

    let mut best_w = w.clone();
    let mut best_primal = primal(&w);
    for _epoch in 0..opts.max_epochs {
        // seeded shuffle keeps epochs deterministic
        for i in (1..n).rev() {
            let j = rng.gen_range(0..=i);
            order.swap(i, j);
        }
        let mut max_violation = 0.0f64;
        for &i in &order {
            let row = &x[i];
            let y = labels[i];
            let g = y * dot_aug(&w, row) - 1.0;
            let pg = if alpha[i] <= 0.0 {
                g.min(0.0)
            } else if alpha[i] >= c {
                g.max(0.0)
            } else {
                g
            };
            max_violation = max_violation.max(pg.abs());
            if pg.abs() > 1e-12 {
                let old = alpha[i];
                let next = (old - g / qii[i]).clamp(0.0, c);
                let delta = next - old;
                if delta != 0.0 {
                    alpha[i] = next;
                    for (slot, &v) in w[..dim].iter_mut().zip(row.iter()) {
                        *slot += delta * y * v as f64;
                    }
                    w[dim] += delta * y * bias_scale;
                }
            }
        }
        let p = primal(&w);
        if p < best_primal {
            best_primal = p;
            best_w.copy_from_slice(&w);
        }
        history.push(best_primal);
        if max_violation < opts.tol {
            break;
        }
    }
    (best_w, history)
}

/// Trains one binary separator per class (one-vs-all), deterministically
/// per seed.
pub fn train_svm(
    x: &[Vec<f32>],
    y: &[u32],
    c: f64,
    seed: u64,
    opts: &SvmTrainOpts,
) -> Result<SvmModel> {
    if x.len() != y.len() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} labels", x.len()),
            got: format!("{}", y.len()),
        });
    }
    if x.is_empty() {
        return Err(Error::invalid("data", "no training samples"));
    }
    if c <= 0.0 {
        return Err(Error::invalid("C", "regularization constant must be positive"));
    }
    let dim = x[0].len();
    for (i, row) in x.iter().enumerate() {
        if row.len() != dim {
            return Err(Error::ShapeMismatch {
                expected: format!("feature dim {dim}"),
                got: format!("sample {i} has dim {}", row.len()),
            });
        }
    }
    let mut classes: Vec<u32> = y.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::invalid(
            "labels",
            "one-vs-all needs at least two classes",
        ));
    }

    let mut weights = Vec::with_capacity(classes.len());
    let mut biases = Vec::with_capacity(classes.len());
    let mut objective_history = Vec::with_capacity(classes.len());
    for (ci, &class) in classes.iter().enumerate() {
        let labels: Vec<f64> = y
            .iter()
            .map(|&l| if l == class { 1.0 } else { -1.0 })
            .collect();
        let mut class_rng = rng::derive(seed, ci as u64 + 1);
        let (w_aug, history) = train_binary(x, &labels, c, opts.bias_scale, opts, &mut class_rng);
        biases.push(w_aug[dim] * opts.bias_scale);
        weights.push(w_aug[..dim].to_vec());
        objective_history.push(history);
    }

    Ok(SvmModel {
        classes,
        weights,
        biases,
        c,
        bias_scale: opts.bias_scale,
        objective_history,
    })
}

/// Per-class decision values for one sample.
pub fn decision_values(model: &SvmModel, x: &[f32]) -> Result<Vec<f64>> {
    if x.len() != model.dim() {
        return Err(Error::ShapeMismatch {
            expected: format!("feature dim {}", model.dim()),
            got: format!("{}", x.len()),
        });
    }
    Ok(model
        .weights
        .iter()
        .zip(model.biases.iter())
        .map(|(w, b)| {
            w.iter()
                .zip(x.iter())
                .map(|(wv, &xv)| wv * xv as f64)
                .sum::<f64>()
                + b
        })
        .collect())
}

/// Argmax of the decision values; ties break toward the lowest class id.
pub fn predict(model: &SvmModel, x: &[f32]) -> Result<u32> {
    let scores = decision_values(model, x)?;
    let mut best = 0usize;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    Ok(model.classes[best])
}

/// Mean over classes of per-class recall. Every class present in `truth`
/// must be non-empty (guaranteed by construction); empty input is an error.
pub fn mean_accuracy(pred: &[u32], truth: &[u32]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} predictions", truth.len()),
            got: format!("{}", pred.len()),
        });
    }
    if truth.is_empty() {
        return Err(Error::invalid("truth", "no samples"));
    }
    let mut classes: Vec<u32> = truth.to_vec();
    classes.sort_unstable();
    classes.dedup();
    let mut total = 0.0f64;
    for &class in &classes {
        let mut n = 0usize;
        let mut hit = 0usize;
        for (&p, &t) in pred.iter().zip(truth.iter()) {
            if t == class {
                n += 1;
                if p == class {
                    hit += 1;
                }
            }
        }
        total += hit as f64 / n as f64;
    }
    Ok(total / classes.len() as f64)
}
