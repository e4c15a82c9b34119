//! ISA activations, the group-sparse training objective, its analytic
//! gradient, and projected gradient descent under `W W^T = I`.

use super::linalg::{sym_eigen_desc, Mat};
use super::{fit_pca, Grouping, IsaModel, IsaTrainConfig, PcaModel};
use crate::error::{Error, Result};
use crate::rng;
use rayon::prelude::*;

/// Samples per parallel block; fixed so the reduction tree does not depend
/// on thread count and seeded runs stay bit-identical.
const BLOCK: usize = 512;

/// Activation of each output unit: the eps-smoothed l2 norm of its group of
/// projected coordinates, `p_i = sqrt(sum_{k in G_i} (W x)_k^2 + eps)`.
pub fn isa_activation(model: &IsaModel, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != model.input_dim() {
        return Err(Error::ShapeMismatch {
            expected: format!("input dim {}", model.input_dim()),
            got: format!("{}", x.len()),
        });
    }
    let a = model.w.matvec(x);
    Ok(group_activations(&a, &model.grouping, model.eps))
}

fn group_activations(a: &[f64], grouping: &Grouping, eps: f64) -> Vec<f64> {
    grouping
        .groups()
        .iter()
        .map(|group| {
            let s: f64 = group.iter().map(|&j| a[j] * a[j]).sum();
            (s + eps).sqrt()
        })
        .collect()
}

/// Group l1-norm: sum over groups of the l2 norm of each group's
/// coordinates.
pub fn group_l1_norm(a: &[f64], grouping: &Grouping) -> Result<f64> {
    if a.len() != grouping.latent_dim() {
        return Err(Error::ShapeMismatch {
            expected: format!("vector of length {}", grouping.latent_dim()),
            got: format!("{}", a.len()),
        });
    }
    Ok(group_activations(a, grouping, 0.0).iter().sum())
}

/// Training loss: summed group activations over all instances. Rows of
/// `data` must already be whitened by the model's PCA.
pub fn isa_objective(data: &Mat, model: &IsaModel) -> Result<f64> {
    objective_for(data, &model.w, &model.grouping, model.eps)
}

fn objective_for(data: &Mat, w: &Mat, grouping: &Grouping, eps: f64) -> Result<f64> {
    if data.cols() != w.cols() {
        return Err(Error::ShapeMismatch {
            expected: format!("data with {} columns", w.cols()),
            got: format!("{}", data.cols()),
        });
    }
    let t = data.rows();
    let n_blocks = t.div_ceil(BLOCK);
    let partials: Vec<f64> = (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            let lo = b * BLOCK;
            let hi = ((b + 1) * BLOCK).min(t);
            let mut acc = 0.0;
            for r in lo..hi {
                let a = w.matvec(data.row(r));
                acc += group_activations(&a, grouping, eps).iter().sum::<f64>();
            }
            acc
        })
        .collect();
    Ok(partials.iter().sum())
}

/// Analytic gradient of the smoothed objective with respect to `W`:
/// `d/dW_kj = sum_t (W x_t)_k x_{t,j} / p_{g(k)}(x_t)`.
pub fn isa_gradient(data: &Mat, model: &IsaModel) -> Result<Mat> {
    if model.eps <= 0.0 {
        return Err(Error::invalid("eps", "gradient requires eps > 0"));
    }
    gradient_for(data, &model.w, &model.grouping, model.eps).map(|(g, _)| g)
}

/// Gradient plus the objective from the same pass over the data.
fn gradient_for(data: &Mat, w: &Mat, grouping: &Grouping, eps: f64) -> Result<(Mat, f64)> {
    if data.cols() != w.cols() {
        return Err(Error::ShapeMismatch {
            expected: format!("data with {} columns", w.cols()),
            got: format!("{}", data.cols()),
        });
    }
    let (m, n) = (w.rows(), w.cols());
    let group_of = grouping.group_of();
    let t = data.rows();
    let n_blocks = t.div_ceil(BLOCK);
    let partials: Vec<(Mat, f64)> = (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            let lo = b * BLOCK;
            let hi = ((b + 1) * BLOCK).min(t);
            let mut grad = Mat::zeros(m, n);
            let mut obj = 0.0;
            let mut scaled = vec![0.0f64; m];
            for r in lo..hi {
                let x = data.row(r);
                let a = w.matvec(x);
                let p = group_activations(&a, grouping, eps);
                obj += p.iter().sum::<f64>();
                for ((s, &ak), &g) in scaled.iter_mut().zip(a.iter()).zip(group_of.iter()) {
                    *s = ak / p[g];
                }
                for (k, &s) in scaled.iter().enumerate() {
                    if s == 0.0 {
                        continue;
                    }
                    let row = grad.row_mut(k);
                    for (g, &xv) in row.iter_mut().zip(x.iter()) {
                        *g += s * xv;
                    }
                }
            }
            (grad, obj)
        })
        .collect();

    let mut grad = Mat::zeros(m, n);
    let mut obj = 0.0;
    for (g, o) in partials {
        for (dst, src) in grad.data_mut().iter_mut().zip(g.data().iter()) {
            *dst += src;
        }
        obj += o;
    }
    Ok((grad, obj))
}

/// Symmetric orthogonalization: `(W W^T)^{-1/2} W`. Fixed point for
/// already-orthonormal `W`; errors on rank deficiency.
pub fn orthonormalize(w: &Mat) -> Result<Mat> {
    let gram = w.matmul_transpose(w);
    let (values, vectors) = sym_eigen_desc(&gram)?;
    let lambda_max = values[0];
    if lambda_max <= 0.0 || values[w.rows() - 1] <= 1e-12 * lambda_max {
        return Err(Error::Numerical(format!(
            "rank-deficient matrix in orthonormalization (eigenvalues {:.3e}..{:.3e})",
            values[w.rows() - 1],
            lambda_max
        )));
    }
    // U diag(1/sqrt(lambda)) U^T W, with vectors holding U^T as rows
    let m = w.rows();
    let mut scaled = Mat::zeros(m, m);
    for (r, &value) in values.iter().enumerate() {
        let s = 1.0 / value.sqrt();
        for c in 0..m {
            scaled.set(r, c, vectors.get(r, c) * s);
        }
    }
    // (U^T)^T * scaled = sum_r u_r (u_r / sqrt(lambda_r))^T
    let inv_sqrt = vectors.transpose().matmul(&scaled);
    Ok(inv_sqrt.matmul(w))
}

/// Projects raw rows through a PCA model into a dense matrix.
pub fn whiten_rows(pca: &PcaModel, rows: &[Vec<f32>]) -> Result<Mat> {
    let n = pca.output_dim();
    let mut out = Mat::zeros(rows.len(), n);
    for (r, row) in rows.iter().enumerate() {
        let y = pca.project(row)?;
        out.row_mut(r).copy_from_slice(&y);
    }
    Ok(out)
}

/// Trains an ISA model: PCA whitening, seeded random orthonormal init, then
/// gradient steps re-projected onto `W W^T = I` after every update.
///
/// Full-batch training (batch_size 0) backtracks by halving the learning
/// rate whenever a step would increase the objective, so the recorded
/// objective history is non-increasing. Mini-batch training records the
/// full objective once per epoch and aborts if it exceeds ten times the
/// initial value.
pub fn train_isa(rows: &[Vec<f32>], cfg: &IsaTrainConfig) -> Result<IsaModel> {
    cfg.validate()?;
    let m = cfg.latent_dim();
    let n = cfg.pca_dim.unwrap_or(m);
    if rows.len() < m {
        return Err(Error::invalid(
            "data",
            format!("need at least latent_dim={m} samples, got {}", rows.len()),
        ));
    }

    let pca = fit_pca(rows, n, true)?;
    let data = whiten_rows(&pca, rows)?;
    let grouping = Grouping::contiguous(cfg.out_dim, cfg.group_size);

    let mut r = rng::seeded(cfg.seed);
    let mut w0 = Mat::zeros(m, n);
    for v in w0.data_mut() {
        *v = rng::normal(&mut r);
    }
    let mut w = orthonormalize(&w0)?;

    let full_batch = cfg.batch_size == 0 || cfg.batch_size >= data.rows();
    let mut history = Vec::with_capacity(cfg.epochs + 1);
    let initial = objective_for(&data, &w, &grouping, cfg.eps)?;
    history.push(initial);

    let lr0 = cfg.learning_rate;
    let mut lr = lr0;
    // normalize step size by the per-sample scale so lr is data-size free
    let step_scale = 1.0 / data.rows() as f64;

    if full_batch {
        let mut current = initial;
        for _epoch in 0..cfg.epochs {
            let (grad, _) = gradient_for(&data, &w, &grouping, cfg.eps)?;
            let mut improved = false;
            while lr > 1e-14 {
                let candidate = orthonormalize(&w.sub_scaled(&grad, lr * step_scale))?;
                let obj = objective_for(&data, &candidate, &grouping, cfg.eps)?;
                if obj <= current {
                    w = candidate;
                    current = obj;
                    improved = true;
                    break;
                }
                lr *= 0.5;
            }
            history.push(current);
            if !improved {
                break;
            }
            lr = (lr * 1.2).min(lr0);
        }
    } else {
        let batch = cfg.batch_size;
        let t = data.rows();
        let mut order: Vec<usize> = (0..t).collect();
        for _epoch in 0..cfg.epochs {
            // seeded in-place Fisher-Yates over sample order
            for i in (1..t).rev() {
                let j = rand::Rng::gen_range(&mut r, 0..=i);
                order.swap(i, j);
            }
            for chunk in order.chunks(batch) {
                let mut sub = Mat::zeros(chunk.len(), n);
                for (dst, &src) in chunk.iter().enumerate() {
                    sub.row_mut(dst).copy_from_slice(data.row(src));
                }
                let (grad, _) = gradient_for(&sub, &w, &grouping, cfg.eps)?;
                w = orthonormalize(&w.sub_scaled(&grad, lr / chunk.len() as f64))?;
            }
            let obj = objective_for(&data, &w, &grouping, cfg.eps)?;
            history.push(obj);
            if obj > 10.0 * initial {
                return Err(Error::Numerical(format!(
                    "ISA training diverged: objective {obj:.4e} exceeds 10x initial {initial:.4e}"
                )));
            }
        }
    }

    Ok(IsaModel {
        w,
        grouping,
        pca,
        eps: cfg.eps,
        objective_history: history,
    })
}

/// ISA+ feature: top-d whitened PCA coefficients concatenated with the ISA
/// activations of the same projected sample, length `2d`.
pub fn isa_plus_extract(model: &IsaModel, x: &[f32]) -> Result<Vec<f32>> {
    let y = model.pca.project(x)?;
    let d = model.output_dim();
    let p = isa_activation(model, &y)?;
    let mut out = Vec::with_capacity(2 * d);
    out.extend(y[..d].iter().map(|&v| v as f32));
    out.extend(p.iter().map(|&v| v as f32));
    Ok(out)
}

/// Reconstruction through the pseudo-inverse, which is `W^T` because the
/// rows of `W` are orthonormal.
pub fn reconstruct(model: &IsaModel, alpha: &[f64]) -> Result<Vec<f64>> {
    if alpha.len() != model.latent_dim() {
        return Err(Error::ShapeMismatch {
            expected: format!("latent dim {}", model.latent_dim()),
            got: format!("{}", alpha.len()),
        });
    }
    Ok(model.w.transpose_matvec(alpha))
}

#[cfg(test)]
pub(crate) fn model_for_test(w: Mat, grouping: Grouping, eps: f64) -> IsaModel {
    let n = w.cols();
    IsaModel {
        w,
        grouping,
        pca: PcaModel {
            mean: vec![0.0; n],
            components: {
                let mut c = Mat::zeros(n, n);
                for i in 0..n {
                    c.set(i, i, 1.0);
                }
                c
            },
            eigenvalues: vec![1.0; n],
            whiten: false,
            eps_whiten: 0.0,
            rank_deficient: false,
        },
        eps,
        objective_history: Vec::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_mat(r: &mut impl Rng, rows: usize, cols: usize) -> Mat {
        let mut m = Mat::zeros(rows, cols);
        for v in m.data_mut() {
            *v = rng::normal(r);
        }
        m
    }

    fn identity(n: usize) -> Mat {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    /// Naive double-loop objective used as the independent oracle.
    fn naive_objective(data: &Mat, w: &Mat, grouping: &Grouping, eps: f64) -> f64 {
        let mut total = 0.0;
        for t in 0..data.rows() {
            for group in grouping.groups() {
                let mut s = 0.0;
                for &k in group {
                    let mut a = 0.0;
                    for j in 0..w.cols() {
                        a += w.get(k, j) * data.get(t, j);
                    }
                    s += a * a;
                }
                total += (s + eps).sqrt();
            }
        }
        total
    }

    #[test]
    fn activation_pythagorean() {
        let model = model_for_test(identity(2), Grouping::contiguous(1, 2), 0.0);
        let p = isa_activation(&model, &[3.0, 4.0]).unwrap();
        assert_eq!(p, vec![5.0]);
    }

    #[test]
    fn singleton_groups_give_absolute_values() {
        let mut r = rng::seeded(2);
        let w = random_mat(&mut r, 3, 5);
        let model = model_for_test(w.clone(), Grouping::contiguous(3, 1), 0.0);
        let x: Vec<f64> = (0..5).map(|_| rng::normal(&mut r)).collect();
        let p = isa_activation(&model, &x).unwrap();
        let a = w.matvec(&x);
        for (pi, ai) in p.iter().zip(a.iter()) {
            assert!((pi - ai.abs()).abs() < 1e-12);
        }
    }

    #[test]
    fn activation_sum_equals_group_l1_of_projection() {
        let mut r = rng::seeded(5);
        for _ in 0..200 {
            let w = random_mat(&mut r, 6, 9);
            let grouping = Grouping::contiguous(3, 2);
            let model = model_for_test(w.clone(), grouping.clone(), 0.0);
            let x: Vec<f64> = (0..9).map(|_| rng::normal(&mut r)).collect();
            let total: f64 = isa_activation(&model, &x).unwrap().iter().sum();
            let norm = group_l1_norm(&w.matvec(&x), &grouping).unwrap();
            assert!((total - norm).abs() <= 1e-12 * norm.abs().max(1.0));
        }
    }

    #[test]
    fn activation_positively_homogeneous() {
        let mut r = rng::seeded(6);
        let w = random_mat(&mut r, 4, 6);
        let model = model_for_test(w, Grouping::contiguous(2, 2), 0.0);
        let x: Vec<f64> = (0..6).map(|_| rng::normal(&mut r)).collect();
        let scaled: Vec<f64> = x.iter().map(|v| v * 3.7).collect();
        let p = isa_activation(&model, &x).unwrap();
        let ps = isa_activation(&model, &scaled).unwrap();
        for (a, b) in p.iter().zip(ps.iter()) {
            assert!((b - 3.7 * a).abs() < 1e-6 * b.abs().max(1e-12));
        }
    }

    #[test]
    fn group_l1_norm_cases() {
        let one = Grouping::contiguous(1, 2);
        assert!((group_l1_norm(&[3.0, 4.0], &one).unwrap() - 5.0).abs() < 1e-12);

        let singles = Grouping::contiguous(3, 1);
        assert!((group_l1_norm(&[1.0, -2.0, 2.0], &singles).unwrap() - 5.0).abs() < 1e-12);

        let pairs = Grouping::contiguous(2, 2);
        let expected = 2.0 * 2f64.sqrt();
        assert!((group_l1_norm(&[1.0, 1.0, 1.0, 1.0], &pairs).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn objective_zero_data_hits_eps_floor() {
        let eps = 1e-8;
        let model = model_for_test(identity(4), Grouping::contiguous(2, 2), eps);
        let data = Mat::zeros(7, 4);
        let obj = isa_objective(&data, &model).unwrap();
        assert!((obj - 7.0 * 2.0 * eps.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn objective_single_group_is_l2_norm() {
        let model = model_for_test(identity(3), Grouping::contiguous(1, 3), 0.0);
        let data = Mat::from_vec(1, 3, vec![1.0, 2.0, 2.0]).unwrap();
        assert!((isa_objective(&data, &model).unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn objective_matches_naive_loop() {
        let mut r = rng::seeded(8);
        let w = random_mat(&mut r, 6, 8);
        let grouping = Grouping::contiguous(2, 3);
        let model = model_for_test(w.clone(), grouping.clone(), 1e-8);
        let data = random_mat(&mut r, 5, 8);
        let fast = isa_objective(&data, &model).unwrap();
        let slow = naive_objective(&data, &w, &grouping, 1e-8);
        assert!((fast - slow).abs() < 1e-9 * slow.abs());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut r = rng::seeded(13);
        for _ in 0..5 {
            let w = random_mat(&mut r, 4, 6);
            let grouping = Grouping::contiguous(2, 2);
            let eps = 1e-6;
            let model = model_for_test(w.clone(), grouping.clone(), eps);
            let data = random_mat(&mut r, 4, 6);
            let grad = isa_gradient(&data, &model).unwrap();
            let h = 1e-4;
            for k in 0..4 {
                for j in 0..6 {
                    let mut wp = w.clone();
                    wp.set(k, j, w.get(k, j) + h);
                    let mut wm = w.clone();
                    wm.set(k, j, w.get(k, j) - h);
                    let fd = (naive_objective(&data, &wp, &grouping, eps)
                        - naive_objective(&data, &wm, &grouping, eps))
                        / (2.0 * h);
                    let g = grad.get(k, j);
                    let denom = fd.abs().max(g.abs()).max(1e-6);
                    assert!(
                        (fd - g).abs() / denom < 1e-3,
                        "grad[{k}][{j}] analytic {g} vs fd {fd}"
                    );
                }
            }
        }
    }

    #[test]
    fn gradient_of_zero_data_is_zero() {
        let model = model_for_test(identity(4), Grouping::contiguous(2, 2), 1e-8);
        let data = Mat::zeros(6, 4);
        let grad = isa_gradient(&data, &model).unwrap();
        assert!(grad.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gradient_update_is_scale_covariant() {
        let mut r = rng::seeded(21);
        let w = orthonormalize(&random_mat(&mut r, 3, 5)).unwrap();
        let grouping = Grouping::contiguous(3, 1);
        let model = model_for_test(w.clone(), grouping.clone(), 1e-8);
        let data = random_mat(&mut r, 6, 5);
        // the smoothing constant scales with the squared data scale, which
        // keeps the activation exactly homogeneous and the identity exact
        let c = 2.5;
        let mut scaled_data = data.clone();
        scaled_data.scale(c);
        let scaled_model = model_for_test(w.clone(), grouping, 1e-8 * c * c);

        let eta = 0.1;
        let g = isa_gradient(&data, &model).unwrap();
        let gs = isa_gradient(&scaled_data, &scaled_model).unwrap();
        let step = orthonormalize(&w.sub_scaled(&g, eta)).unwrap();
        let step_scaled = orthonormalize(&w.sub_scaled(&gs, eta / c)).unwrap();
        for (a, b) in step.data().iter().zip(step_scaled.data().iter()) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn orthonormalize_produces_orthonormal_rows() {
        let mut r = rng::seeded(31);
        let w = random_mat(&mut r, 4, 8);
        let q = orthonormalize(&w).unwrap();
        let gram = q.matmul_transpose(&q);
        assert!(gram.max_abs_diff_from_identity() < 1e-10);
    }

    #[test]
    fn orthonormalize_is_fixed_point() {
        let mut r = rng::seeded(32);
        let q = orthonormalize(&random_mat(&mut r, 3, 6)).unwrap();
        let q2 = orthonormalize(&q).unwrap();
        for (a, b) in q.data().iter().zip(q2.data().iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn orthonormalize_strips_row_scaling() {
        let mut r = rng::seeded(33);
        let q = orthonormalize(&random_mat(&mut r, 2, 5)).unwrap();
        let mut scaled = q.clone();
        for v in scaled.row_mut(0) {
            *v *= 2.0;
        }
        for v in scaled.row_mut(1) {
            *v *= 3.0;
        }
        let back = orthonormalize(&scaled).unwrap();
        for (a, b) in q.data().iter().zip(back.data().iter()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn orthonormalize_rejects_rank_deficient() {
        let mut w = Mat::zeros(2, 4);
        for j in 0..4 {
            w.set(0, j, 1.0);
            w.set(1, j, 2.0); // second row is a multiple of the first
        }
        assert!(orthonormalize(&w).is_err());
    }

    fn small_training_rows(seed: u64, t: usize, n: usize) -> Vec<Vec<f32>> {
        let mut r = rng::seeded(seed);
        (0..t)
            .map(|_| (0..n).map(|_| rng::normal_f32(&mut r)).collect())
            .collect()
    }

    #[test]
    fn training_history_is_monotone_and_orthogonal() {
        let rows = small_training_rows(41, 400, 12);
        let cfg = IsaTrainConfig {
            group_size: 2,
            out_dim: 3,
            pca_dim: Some(8),
            learning_rate: 0.5,
            epochs: 60,
            batch_size: 0,
            eps: 1e-8,
            seed: 7,
        };
        let model = train_isa(&rows, &cfg).unwrap();
        let gram = model.w.matmul_transpose(&model.w);
        assert!(gram.max_abs_diff_from_identity() < 1e-6);
        let h = &model.objective_history;
        let tol = 1e-6 * h[0];
        for pair in h.windows(2) {
            assert!(pair[1] <= pair[0] + tol, "objective increased: {pair:?}");
        }
    }

    #[test]
    fn training_is_bit_reproducible() {
        let rows = small_training_rows(43, 300, 10);
        let cfg = IsaTrainConfig {
            group_size: 2,
            out_dim: 2,
            pca_dim: Some(6),
            learning_rate: 0.5,
            epochs: 25,
            batch_size: 0,
            eps: 1e-8,
            seed: 11,
        };
        let a = train_isa(&rows, &cfg).unwrap();
        let b = train_isa(&rows, &cfg).unwrap();
        assert_eq!(a.w.data(), b.w.data());
        assert_eq!(a.objective_history, b.objective_history);
    }

    #[test]
    fn minibatch_training_stays_orthogonal() {
        let rows = small_training_rows(47, 300, 10);
        let cfg = IsaTrainConfig {
            group_size: 2,
            out_dim: 2,
            pca_dim: Some(6),
            learning_rate: 0.1,
            epochs: 10,
            batch_size: 64,
            eps: 1e-8,
            seed: 3,
        };
        let model = train_isa(&rows, &cfg).unwrap();
        let gram = model.w.matmul_transpose(&model.w);
        assert!(gram.max_abs_diff_from_identity() < 1e-6);
    }

    #[test]
    fn reconstruct_square_orthogonal_roundtrip() {
        let mut r = rng::seeded(51);
        let w = orthonormalize(&random_mat(&mut r, 5, 5)).unwrap();
        let model = model_for_test(w.clone(), Grouping::contiguous(5, 1), 0.0);
        let x: Vec<f64> = (0..5).map(|_| rng::normal(&mut r)).collect();
        let alpha = w.matvec(&x);
        let back = reconstruct(&model, &alpha).unwrap();
        for (a, b) in x.iter().zip(back.iter()) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn reconstruct_projects_onto_row_space() {
        let mut r = rng::seeded(52);
        let w = orthonormalize(&random_mat(&mut r, 3, 7)).unwrap();
        let model = model_for_test(w.clone(), Grouping::contiguous(3, 1), 0.0);
        let x: Vec<f64> = (0..7).map(|_| rng::normal(&mut r)).collect();
        let back = reconstruct(&model, &w.matvec(&x)).unwrap();
        let residual: Vec<f64> = x.iter().zip(back.iter()).map(|(a, b)| a - b).collect();
        for k in 0..3 {
            let dot: f64 = w.row(k).iter().zip(residual.iter()).map(|(a, b)| a * b).sum();
            assert!(dot.abs() < 1e-6, "residual not orthogonal to row {k}: {dot}");
        }
    }

    #[test]
    fn reconstruct_zero_is_zero() {
        let model = model_for_test(identity(3), Grouping::contiguous(3, 1), 0.0);
        let back = reconstruct(&model, &[0.0, 0.0, 0.0]).unwrap();
        assert!(back.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn isa_plus_layout_and_centered_input() {
        let rows = small_training_rows(61, 300, 10);
        let cfg = IsaTrainConfig {
            group_size: 2,
            out_dim: 2,
            pca_dim: Some(6),
            learning_rate: 0.5,
            epochs: 10,
            batch_size: 0,
            eps: 1e-8,
            seed: 5,
        };
        let model = train_isa(&rows, &cfg).unwrap();
        let d = model.output_dim();

        let x = vec![0.5f32; 10];
        let out = isa_plus_extract(&model, &x).unwrap();
        assert_eq!(out.len(), 2 * d);
        let y = model.pca.project(&x).unwrap();
        for i in 0..d {
            assert!((out[i] as f64 - y[i]).abs() < 1e-6);
        }

        // input equal to the model mean: PCA half zero, ISA half sqrt(eps) each
        let mean_input: Vec<f32> = model.pca.mean.iter().map(|&v| v as f32).collect();
        let out = isa_plus_extract(&model, &mean_input).unwrap();
        for i in 0..d {
            assert!(out[i].abs() < 1e-5);
        }
        let floor = (model.eps).sqrt() as f32;
        for i in d..2 * d {
            assert!((out[i] - floor).abs() < 1e-6);
        }
    }
}
