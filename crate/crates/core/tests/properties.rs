//! Property tests over the tensor primitives, the ISA algebra, and the
//! interchange formats.

use convisa::binio::Reader;
use convisa::encode::{l2_normalize, power_normalize};
use convisa::isa::linalg::Mat;
use convisa::isa::{group_l1_norm, isa_activation, Grouping, IsaModel, PcaModel};
use convisa::tensor::{
    apply_nonlinearity, cascade_eval, conv3d, global_sum_pool, local_pool, read_cvol, write_cvol,
    CascadeSpec, FilterBank, Layer, LocalPoolKind, Nonlinearity, Padding, Volume,
};
use proptest::prelude::*;

fn small_volume() -> impl Strategy<Value = Volume> {
    (1usize..=6, 1usize..=6, 1usize..=3, 1usize..=3).prop_flat_map(|(nx, ny, nt, nc)| {
        proptest::collection::vec(-10.0f32..10.0, nx * ny * nt * nc)
            .prop_map(move |data| Volume::from_vec([nx, ny, nt, nc], data).unwrap())
    })
}

fn volume_pair_same_dims() -> impl Strategy<Value = (Volume, Volume)> {
    (1usize..=6, 1usize..=6, 1usize..=3, 1usize..=2).prop_flat_map(|(nx, ny, nt, nc)| {
        let len = nx * ny * nt * nc;
        (
            proptest::collection::vec(-10.0f32..10.0, len),
            proptest::collection::vec(-10.0f32..10.0, len),
        )
            .prop_map(move |(a, b)| {
                (
                    Volume::from_vec([nx, ny, nt, nc], a).unwrap(),
                    Volume::from_vec([nx, ny, nt, nc], b).unwrap(),
                )
            })
    })
}

fn bank_for(nc: usize) -> impl Strategy<Value = FilterBank> {
    (1usize..=2, 1usize..=2, 1usize..=1, 1usize..=3).prop_flat_map(move |(kx, ky, kt, k)| {
        proptest::collection::vec(
            proptest::collection::vec(-2.0f32..2.0, kx * ky * kt * nc),
            k,
        )
        .prop_map(move |rows| FilterBank::from_rows([kx, ky, kt, nc], &rows).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn conv3d_is_linear((x, y) in volume_pair_same_dims(), a in -3.0f32..3.0, b in -3.0f32..3.0) {
        let nc = x.nc();
        let bank = {
            let mut kernel = Volume::zeros([2.min(x.nx()), 2.min(x.ny()), 1, nc]);
            for (i, v) in kernel.data_mut().iter_mut().enumerate() {
                *v = ((i as f32) * 0.37).sin();
            }
            FilterBank::new(vec![kernel]).unwrap()
        };
        let mixed = Volume::from_fn(x.dims(), |xx, yy, tt, cc| {
            a * x.get(xx, yy, tt, cc) + b * y.get(xx, yy, tt, cc)
        });
        let lhs = conv3d(&mixed, &bank, Padding::Valid).unwrap();
        let cx = conv3d(&x, &bank, Padding::Valid).unwrap();
        let cy = conv3d(&y, &bank, Padding::Valid).unwrap();
        for i in 0..lhs.len() {
            let rhs = a * cx.data()[i] + b * cy.data()[i];
            prop_assert!((lhs.data()[i] - rhs).abs() <= 1e-6 * rhs.abs().max(100.0));
        }
    }

    #[test]
    fn softmax_sites_sum_to_one_and_shift_invariant(v in small_volume(), shift in -5.0f32..5.0) {
        let soft = apply_nonlinearity(&v, Nonlinearity::Softmax).unwrap();
        let [nx, ny, nt, nc] = v.dims();
        for t in 0..nt {
            for y in 0..ny {
                for x in 0..nx {
                    let mut sum = 0.0f64;
                    for c in 0..nc {
                        let s = soft.get(x, y, t, c);
                        prop_assert!(s > 0.0);
                        sum += s as f64;
                    }
                    prop_assert!((sum - 1.0).abs() < 1e-6);
                }
            }
        }
        // adding a per-site constant across channels changes nothing
        let shifted = Volume::from_fn(v.dims(), |x, y, t, c| v.get(x, y, t, c) + shift);
        let soft2 = apply_nonlinearity(&shifted, Nonlinearity::Softmax).unwrap();
        for (a, b) in soft.data().iter().zip(soft2.data().iter()) {
            prop_assert!((a - b).abs() < 1e-5);
        }
    }

    #[test]
    fn local_sum_then_global_sum_is_global_sum(
        v in small_volume(),
        dx in 1usize..=3,
        dy in 1usize..=3,
        dt in 1usize..=2,
    ) {
        let pooled = local_pool(&v, LocalPoolKind::Sum, (dx, dy, dt)).unwrap();
        let a = global_sum_pool(&pooled);
        let b = global_sum_pool(&v);
        // sums can cancel, so the error budget scales with the absolute mass
        let mass: f32 = v.data().iter().map(|x| x.abs()).sum();
        for (x, y) in a.iter().zip(b.iter()) {
            prop_assert!((x - y).abs() <= 1e-6 * mass.max(1.0), "{x} vs {y} (mass {mass})");
        }
    }

    #[test]
    fn cascade_eval_is_deterministic(v in small_volume()) {
        let spec = CascadeSpec::new(vec![
            Layer::Pool { kind: LocalPoolKind::Max, size: (2, 2, 1) },
            Layer::GlobalSumPool,
        ]).unwrap();
        let a = cascade_eval(&spec, &v).unwrap();
        let b = cascade_eval(&spec, &v).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn multi_kernel_conv_matches_per_kernel_calls(
        (v, bank) in small_volume()
            .prop_filter("room for kernels", |v| v.nx() >= 2 && v.ny() >= 2)
            .prop_flat_map(|v| {
                let nc = v.nc();
                (Just(v), bank_for(nc))
            })
    ) {
        let whole = conv3d(&v, &bank, Padding::Same).unwrap();
        for (k, kernel) in bank.kernels().iter().enumerate() {
            let single = FilterBank::new(vec![kernel.clone()]).unwrap();
            let one = conv3d(&v, &single, Padding::Same).unwrap();
            for t in 0..one.nt() {
                for y in 0..one.ny() {
                    for x in 0..one.nx() {
                        prop_assert_eq!(one.get(x, y, t, 0), whole.get(x, y, t, k));
                    }
                }
            }
        }
    }

    #[test]
    fn cvol_round_trip_is_bit_exact(v in small_volume()) {
        let mut buf = Vec::new();
        write_cvol(&mut buf, &v).unwrap();
        let mut reader = Reader::new(std::path::Path::new("mem"), &buf);
        let back = read_cvol(&mut reader).unwrap();
        prop_assert_eq!(v, back);
    }

    #[test]
    fn activation_homogeneity_and_group_identity(
        coeffs in proptest::collection::vec(-3.0f64..3.0, 12),
        x in proptest::collection::vec(-3.0f64..3.0, 4),
        c in 0.01f64..10.0,
    ) {
        let w = Mat::from_vec(3, 4, coeffs).unwrap();
        let grouping = Grouping::contiguous(3, 1);
        let n = w.cols();
        let mut comp = Mat::zeros(n, n);
        for i in 0..n {
            comp.set(i, i, 1.0);
        }
        let model = IsaModel {
            w: w.clone(),
            grouping: grouping.clone(),
            pca: PcaModel {
                mean: vec![0.0; n],
                components: comp,
                eigenvalues: vec![1.0; n],
                whiten: false,
                eps_whiten: 0.0,
                rank_deficient: false,
            },
            eps: 0.0,
            objective_history: Vec::new(),
        };
        let p = isa_activation(&model, &x).unwrap();
        // sum of activations equals the group l1 norm of the projection
        let total: f64 = p.iter().sum();
        let norm = group_l1_norm(&w.matvec(&x), &grouping).unwrap();
        prop_assert!((total - norm).abs() <= 1e-9 * norm.max(1.0));
        // positive homogeneity
        let scaled: Vec<f64> = x.iter().map(|v| v * c).collect();
        let ps = isa_activation(&model, &scaled).unwrap();
        for (a, b) in p.iter().zip(ps.iter()) {
            prop_assert!((b - c * a).abs() <= 1e-6 * b.abs().max(1e-9));
        }
    }

    #[test]
    fn normalization_chain_ends_unit_or_zero(v in proptest::collection::vec(-5.0f32..5.0, 1..64)) {
        let out = l2_normalize(&power_normalize(&v, 0.5));
        let norm: f64 = out.iter().map(|&x| (x as f64) * (x as f64)).sum::<f64>().sqrt();
        let all_zero = v.iter().all(|&x| x == 0.0);
        if all_zero {
            prop_assert!(out.iter().all(|&x| x == 0.0));
        } else {
            prop_assert!((norm - 1.0).abs() < 1e-6);
        }
    }
}
