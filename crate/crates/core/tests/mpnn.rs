use approx::assert_abs_diff_eq;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use squashscope::bounds::{
    build_message_matrix, jacobian_bound_matrix, node_hessian_bounds, MatrixKind, MixingConstants,
};
use squashscope::graph::{generate, GraphKind};
use squashscope::mpnn::{
    certify_constants, empirical_max_mixing, fd_jacobian, fd_mixing, fd_node_hessian_norms,
    forward, mixing_fd, mixing_fd_with_step, operator_norm, verify_bound, verify_bound_with,
    Activation, InputBox, Layer, MessageFamily, MessageFunction, ModelConfig, MpnnModel, Readout,
};
use squashscope::spectral::eigendecompose;
use squashscope::{Error, Graph, Matrix, NodePair};

fn scalar(x: f64) -> Matrix {
    Matrix::from_rows(&[vec![x]])
}

/// `h_v = σ(x_v + Σ_u 𝖠_vu x_u)` on a one-channel graph.
fn scalar_model(activation: Activation, readout: Readout, depth: usize) -> MpnnModel {
    let layer = Layer {
        omega: scalar(1.0),
        w: scalar(1.0),
        message: MessageFunction::Linear {
            c1: scalar(0.0),
            c2: scalar(1.0),
        },
    };
    MpnnModel::new(
        vec![layer; depth],
        activation,
        readout,
        vec![1.0],
        MatrixKind::Raw,
    )
    .unwrap()
}

fn random_graph(rng: &mut ChaCha8Rng) -> Graph {
    let n = rng.gen_range(3..=12);
    match rng.gen_range(0..4) {
        0 => generate(&GraphKind::ErdosRenyi { n, p: 0.35 }, rng.gen()).unwrap(),
        1 => generate(
            &GraphKind::MoleculeLike {
                n: n.max(4),
                extra_cycles: 1,
            },
            rng.gen(),
        )
        .unwrap(),
        2 => generate(&GraphKind::Cycle { n }, 0).unwrap(),
        _ => generate(&GraphKind::Path { n }, 0).unwrap(),
    }
}

fn random_model(rng: &mut ChaCha8Rng, smooth_readout_only: bool) -> MpnnModel {
    let family = if rng.gen_bool(0.5) {
        MessageFamily::Linear
    } else {
        MessageFamily::Gated
    };
    let activation = match (family, rng.gen_range(0..3)) {
        (MessageFamily::Linear, 0) => Activation::Gelu,
        (MessageFamily::Linear, 1) => Activation::Identity,
        _ => Activation::Tanh,
    };
    let readouts: &[Readout] = if smooth_readout_only {
        &[Readout::Sum, Readout::Mean]
    } else {
        &[Readout::Sum, Readout::Mean, Readout::Max]
    };
    ModelConfig {
        width: rng.gen_range(1..=3),
        depth: rng.gen_range(1..=4),
        family,
        activation,
        readout: readouts[rng.gen_range(0..readouts.len())],
        matrix_kind: MatrixKind::ALL[rng.gen_range(0..3)],
        weight_scale: rng.gen_range(0.2..1.0),
        seed: rng.gen(),
    }
    .build()
    .unwrap()
}

fn random_features(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Matrix {
    Matrix::from_fn(n, d, |_, _| rng.gen_range(0.0..1.0))
}

#[test]
fn zero_weights_give_zero_output() {
    let model = ModelConfig {
        width: 3,
        depth: 2,
        family: MessageFamily::Linear,
        activation: Activation::Identity,
        readout: Readout::Sum,
        matrix_kind: MatrixKind::Sym,
        weight_scale: 0.0,
        seed: 1,
    }
    .build()
    .unwrap();
    let g = generate(&GraphKind::Cycle { n: 5 }, 0).unwrap();
    let x = Matrix::from_fn(5, 3, |i, j| (i + j) as f64);
    assert_eq!(forward(&model, &g, &x).unwrap().graph_output, 0.0);
}

#[test]
fn two_node_hand_computation() {
    // h_0 = 2 x_0 + 3 (0.5 x_0 + 4 x_1), h_1 = 2 x_1 + 3 (0.5 x_1 + 4 x_0), y = -(h_0 + h_1)
    let layer = Layer {
        omega: scalar(2.0),
        w: scalar(3.0),
        message: MessageFunction::Linear {
            c1: scalar(0.5),
            c2: scalar(4.0),
        },
    };
    let model = MpnnModel::new(
        vec![layer],
        Activation::Identity,
        Readout::Sum,
        vec![-1.0],
        MatrixKind::Raw,
    )
    .unwrap();
    let g = generate(&GraphKind::Path { n: 2 }, 0).unwrap();
    let x = Matrix::from_rows(&[vec![1.0], vec![2.0]]);
    let out = forward(&model, &g, &x).unwrap();
    assert_eq!(out.node_states.as_slice(), &[27.5, 19.0]);
    assert_eq!(out.graph_output, -46.5);
}

#[test]
fn model_validation() {
    let layer = Layer {
        omega: scalar(1.0),
        w: scalar(1.0),
        message: MessageFunction::Linear {
            c1: scalar(0.0),
            c2: scalar(1.0),
        },
    };
    assert!(MpnnModel::new(
        vec![layer.clone()],
        Activation::Tanh,
        Readout::Sum,
        vec![0.9],
        MatrixKind::Sym
    )
    .is_err());
    let wide = Layer {
        omega: Matrix::identity(2),
        ..layer
    };
    assert!(matches!(
        MpnnModel::new(
            vec![wide],
            Activation::Tanh,
            Readout::Sum,
            vec![1.0],
            MatrixKind::Sym
        ),
        Err(Error::DimensionMismatch(_))
    ));
    let model = scalar_model(Activation::Tanh, Readout::Sum, 1);
    let g = generate(&GraphKind::Path { n: 3 }, 0).unwrap();
    assert!(matches!(
        forward(&model, &g, &Matrix::zeros(2, 1)),
        Err(Error::DimensionMismatch(_))
    ));
}

#[test]
fn permutation_invariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..20 {
        let g = random_graph(&mut rng);
        let model = random_model(&mut rng, false);
        let n = g.n();
        let x = random_features(&mut rng, n, model.width());
        let mut perm: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            perm.swap(i, rng.gen_range(0..=i));
        }
        let h = g.relabel(&perm).unwrap();
        let px = Matrix::from_fn(n, model.width(), |i, j| {
            x[(perm.iter().position(|&p| p == i).unwrap(), j)]
        });
        let a = forward(&model, &g, &x).unwrap();
        let b = forward(&model, &h, &px).unwrap();
        assert_abs_diff_eq!(
            a.graph_output,
            b.graph_output,
            epsilon = 1e-12 * (1.0 + a.graph_output.abs())
        );
        for i in 0..n {
            for c in 0..model.width() {
                assert_abs_diff_eq!(
                    a.node_states[(i, c)],
                    b.node_states[(perm[i], c)],
                    epsilon = 1e-12
                );
            }
        }
    }
}

#[test]
fn certify_examples() {
    let layer = Layer {
        omega: Matrix::zeros(2, 2),
        w: Matrix::from_diag(&[3.0, 0.5]),
        message: MessageFunction::Linear {
            c1: Matrix::zeros(2, 2),
            c2: Matrix::identity(2),
        },
    };
    let theta = vec![0.6, 0.8];
    let model = MpnnModel::new(
        vec![layer],
        Activation::Tanh,
        Readout::Sum,
        theta,
        MatrixKind::Sym,
    )
    .unwrap();
    let c = certify_constants(&model, None).unwrap().constants;
    assert_eq!(c.c1, 0.0);
    assert_abs_diff_eq!(c.c2, 1.0, epsilon = 1e-8);
    assert!(c.c2 >= 1.0);
    assert_eq!(c.c2nd, 0.0);
    assert_abs_diff_eq!(c.w, 3.0, epsilon = 1e-8);
    assert!(c.w >= 3.0);
    assert_eq!(c.c_sigma, 1.0);

    let gated = ModelConfig {
        width: 3,
        depth: 2,
        family: MessageFamily::Gated,
        activation: Activation::Tanh,
        readout: Readout::Sum,
        matrix_kind: MatrixKind::Sym,
        weight_scale: 0.5,
        seed: 3,
    }
    .build()
    .unwrap();
    assert!(certify_constants(&gated, None).is_err());
    let c = certify_constants(&gated, Some(&InputBox::default())).unwrap();
    assert!(c.constants.c2nd > 0.0);
    assert_eq!(c.layers.len(), 2);
    let gelu_gated = MpnnModel {
        activation: Activation::Gelu,
        ..gated
    };
    assert!(certify_constants(&gelu_gated, Some(&InputBox::default())).is_err());
    let exp = scalar_model(Activation::Exp, Readout::Sum, 1);
    assert!(certify_constants(&exp, None).is_err());
}

#[test]
fn power_iteration_matches_jacobi() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let w = Matrix::from_fn(4, 4, |_, _| rng.gen_range(-1.0..1.0));
        let gram = w.transpose().matmul(&w);
        let top = *eigendecompose(&gram).unwrap().eigenvalues.last().unwrap();
        assert_abs_diff_eq!(operator_norm(&w), top.sqrt(), epsilon = 1e-8);
    }
}

#[test]
fn activation_constants() {
    for x in (-400..=400).map(|i| i as f64 / 40.0) {
        assert!(Activation::Tanh.derivative(x).abs() <= 1.0);
        assert!(Activation::Tanh.second_derivative(x).abs() <= 0.7699);
        assert!(Activation::Gelu.derivative(x).abs() <= 1.13);
        assert!(Activation::Gelu.second_derivative(x).abs() <= 1.13);
        for act in [Activation::Tanh, Activation::Gelu, Activation::Exp] {
            let h = 1e-5;
            let fd = (act.eval(x + h) - act.eval(x - h)) / (2.0 * h);
            assert_abs_diff_eq!(fd, act.derivative(x), epsilon = 1e-6 * (1.0 + fd.abs()));
            let fd2 = (act.derivative(x + h) - act.derivative(x - h)) / (2.0 * h);
            assert_abs_diff_eq!(
                fd2,
                act.second_derivative(x),
                epsilon = 1e-6 * (1.0 + fd2.abs())
            );
        }
    }
    assert!(Activation::Gelu.derivative(2f64.sqrt()).abs() > 1.1289);
    assert_eq!(Activation::Exp.c_sigma(), None);
}

#[test]
fn zero_layer_jacobian_is_identity() {
    let model = MpnnModel::new(
        vec![],
        Activation::Tanh,
        Readout::Sum,
        vec![0.6, 0.8],
        MatrixKind::Sym,
    )
    .unwrap();
    let g = generate(&GraphKind::Cycle { n: 5 }, 0).unwrap();
    let x = Matrix::from_fn(5, 2, |i, j| 0.1 * (i * 2 + j) as f64);
    let blocks = fd_jacobian(&model, &g, &x, 2).unwrap();
    for (v, b) in blocks.iter().enumerate() {
        let expected = if v == 2 {
            Matrix::identity(2)
        } else {
            Matrix::zeros(2, 2)
        };
        assert!(b.block.sub(&expected).max_abs() < 1e-9);
    }
}

/// Exact Jacobians `∂h_v/∂x_u` of a linear model with identity activation.
fn exact_linear_jacobian(model: &MpnnModel, g: &Graph, u: usize) -> Vec<Matrix> {
    let a = build_message_matrix(g, model.matrix_kind).unwrap().values;
    let d = model.width();
    let rows = a.row_sums();
    let mut j: Vec<Matrix> = (0..g.n())
        .map(|v| {
            if v == u {
                Matrix::identity(d)
            } else {
                Matrix::zeros(d, d)
            }
        })
        .collect();
    for layer in &model.layers {
        let MessageFunction::Linear { c1, c2 } = &layer.message else {
            panic!("linear only")
        };
        j = (0..g.n())
            .map(|v| {
                let mut out = layer
                    .omega
                    .matmul(&j[v])
                    .add(&layer.w.matmul(c1).matmul(&j[v]).scale(rows[v]));
                for &x in g.neighbors(v) {
                    out = out.add(&layer.w.matmul(c2).matmul(&j[x]).scale(a[(v, x)]));
                }
                out
            })
            .collect();
    }
    j
}

#[test]
fn linear_model_jacobian_is_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let g = random_graph(&mut rng);
        let model = ModelConfig {
            width: rng.gen_range(1..=3),
            depth: rng.gen_range(1..=3),
            family: MessageFamily::Linear,
            activation: Activation::Identity,
            readout: Readout::Sum,
            matrix_kind: MatrixKind::ALL[rng.gen_range(0..3)],
            weight_scale: 0.7,
            seed: rng.gen(),
        }
        .build()
        .unwrap();
        let x = random_features(&mut rng, g.n(), model.width());
        let u = rng.gen_range(0..g.n());
        let fd = fd_jacobian(&model, &g, &x, u).unwrap();
        let exact = exact_linear_jacobian(&model, &g, u);
        for v in 0..g.n() {
            assert!(fd[v].block.sub(&exact[v]).max_abs() < 1e-6);
        }
    }
}

#[test]
fn jacobian_bound_holds() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..200 {
        let g = random_graph(&mut rng);
        let model = random_model(&mut rng, true);
        let constants = certify_constants(&model, Some(&InputBox::default()))
            .unwrap()
            .constants;
        let a = build_message_matrix(&g, model.matrix_kind).unwrap();
        let bound = jacobian_bound_matrix(&a, &constants, model.depth()).unwrap();
        let x = random_features(&mut rng, g.n(), model.width());
        let u = rng.gen_range(0..g.n());
        for (v, b) in fd_jacobian(&model, &g, &x, u).unwrap().iter().enumerate() {
            assert!(
                b.norm <= bound[(v, u)] * (1.0 + 1e-6) + 1e-8,
                "{} > {}",
                b.norm,
                bound[(v, u)]
            );
        }
    }
}

#[test]
fn node_hessian_bound_holds() {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    for _ in 0..80 {
        let g = random_graph(&mut rng);
        let model = random_model(&mut rng, true);
        let constants = certify_constants(&model, Some(&InputBox::default()))
            .unwrap()
            .constants;
        let a = build_message_matrix(&g, model.matrix_kind).unwrap();
        let x = random_features(&mut rng, g.n(), model.width());
        let v = rng.gen_range(0..g.n());
        let u = (v + 1 + rng.gen_range(0..g.n() - 1)) % g.n();
        let pair = NodePair::new(v, u);
        let bounds = node_hessian_bounds(&g, &a, &constants, model.depth(), pair).unwrap();
        let fd = fd_node_hessian_norms(&model, &g, &x, pair).unwrap();
        for i in 0..g.n() {
            assert!(
                fd[i] <= bounds[i] + 1e-4 * bounds[i].max(1.0),
                "node {i}: {} > {}",
                fd[i],
                bounds[i]
            );
        }
    }
}

#[test]
fn mixing_bound_holds_on_random_models() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut checked = 0;
    for _ in 0..300 {
        let g = random_graph(&mut rng);
        let model = random_model(&mut rng, false);
        let v = rng.gen_range(0..g.n());
        let u = (v + 1 + rng.gen_range(0..g.n() - 1)) % g.n();
        let out = verify_bound(
            &model,
            &g,
            NodePair::new(v, u),
            &InputBox::default(),
            4,
            rng.gen(),
        )
        .unwrap();
        assert!(out.satisfied, "{out:?} {model:?}");
        assert_eq!(out.slack, out.theoretical - out.empirical);
        checked += 1;
    }
    assert_eq!(checked, 300);
}

#[test]
fn under_reaching_verifies_trivially() {
    let g = generate(&GraphKind::Path { n: 6 }, 0).unwrap();
    let model = ModelConfig {
        width: 2,
        depth: 2,
        family: MessageFamily::Gated,
        activation: Activation::Tanh,
        readout: Readout::Sum,
        matrix_kind: MatrixKind::Sym,
        weight_scale: 0.8,
        seed: 4,
    }
    .build()
    .unwrap();
    let out = verify_bound(&model, &g, NodePair::new(0, 5), &InputBox::default(), 3, 0).unwrap();
    assert_eq!(out.theoretical, 0.0);
    // Only summation-order rounding survives the cross difference.
    assert!(out.empirical < 1e-8);
    assert!(out.satisfied);
    let x = InputBox::default().sample(6, 2, 0, 2);
    assert!(
        fd_mixing(&model, &g, &x, NodePair::new(0, 5))
            .unwrap()
            .max_abs
            < 1e-8
    );
}

#[test]
fn scaling_w_raises_the_bound() {
    let g = generate(&GraphKind::Cycle { n: 5 }, 0).unwrap();
    let model = ModelConfig {
        width: 2,
        depth: 2,
        family: MessageFamily::Linear,
        activation: Activation::Tanh,
        readout: Readout::Sum,
        matrix_kind: MatrixKind::Sym,
        weight_scale: 0.5,
        seed: 8,
    }
    .build()
    .unwrap();
    let mut doubled = model.clone();
    doubled.layers.iter_mut().for_each(|l| l.w = l.w.scale(2.0));
    let pair = NodePair::new(0, 2);
    let a = verify_bound(&model, &g, pair, &InputBox::default(), 6, 1).unwrap();
    let b = verify_bound(&doubled, &g, pair, &InputBox::default(), 6, 1).unwrap();
    assert!(b.theoretical > a.theoretical);
    assert!(a.satisfied && b.satisfied);
}

#[test]
fn understated_constants_are_reported_not_raised() {
    let g = generate(&GraphKind::Complete { n: 3 }, 0).unwrap();
    let model = scalar_model(Activation::Tanh, Readout::Sum, 1);
    let tiny = MixingConstants {
        omega: 0.0,
        w: 0.01,
        c1: 0.0,
        c2: 0.01,
        c2nd: 0.0,
        c_sigma: 1.0,
    };
    let out = verify_bound_with(
        &model,
        &g,
        NodePair::new(0, 1),
        &InputBox::default(),
        4,
        0,
        &tiny,
    )
    .unwrap();
    assert!(!out.satisfied && out.slack < 0.0);
}

#[test]
fn no_message_passing_means_no_mixing() {
    let model = ModelConfig {
        width: 2,
        depth: 2,
        family: MessageFamily::Gated,
        activation: Activation::Tanh,
        readout: Readout::Sum,
        matrix_kind: MatrixKind::Sym,
        weight_scale: 0.8,
        seed: 2,
    }
    .build()
    .unwrap();
    let mut separable = model.clone();
    separable
        .layers
        .iter_mut()
        .for_each(|l| l.w = Matrix::zeros(2, 2));
    let g = generate(&GraphKind::Complete { n: 4 }, 0).unwrap();
    let x = InputBox::default().sample(4, 2, 3, 2);
    assert!(
        fd_mixing(&separable, &g, &x, NodePair::new(0, 1))
            .unwrap()
            .max_abs
            < 1e-6
    );
    assert!(
        fd_mixing(&model, &g, &x, NodePair::new(0, 1))
            .unwrap()
            .max_abs
            > 1e-4
    );
}

#[test]
fn tanh_toy_matches_analytic_mixing() {
    let model = scalar_model(Activation::Tanh, Readout::Mean, 1);
    let g = generate(&GraphKind::Path { n: 2 }, 0).unwrap();
    for (xv, xu) in [(0.1, 0.2), (0.5, 0.3), (-0.4, 1.1), (0.9, 0.8)] {
        let s: f64 = xv + xu;
        let analytic = (2.0 * s.tanh() / s.cosh().powi(2)).abs();
        let x = Matrix::from_rows(&[vec![xv], vec![xu]]);
        let fd = fd_mixing(&model, &g, &x, NodePair::new(0, 1)).unwrap();
        assert_abs_diff_eq!(fd.max_abs, analytic, epsilon = 1e-5);
    }
}

#[test]
fn table_one_emulators() {
    let g = generate(&GraphKind::Path { n: 2 }, 0).unwrap();
    let pair = NodePair::new(0, 1);
    let tanh = scalar_model(Activation::Tanh, Readout::Mean, 1);
    let m =
        empirical_max_mixing(&tanh.bind(&g).unwrap(), pair, &InputBox::default(), 400, 0).unwrap();
    assert!((m - 0.77).abs() < 0.01, "{m}");
    let exp = scalar_model(Activation::Exp, Readout::Mean, 1);
    let m =
        empirical_max_mixing(&exp.bind(&g).unwrap(), pair, &InputBox::default(), 20, 0).unwrap();
    assert!((m - 7.4).abs() < 0.05, "{m}");
}

#[test]
fn empirical_mixing_is_nested_and_degenerate_box_is_pointwise() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let g = random_graph(&mut rng);
    let model = random_model(&mut rng, true);
    let bound = model.bind(&g).unwrap();
    let pair = NodePair::new(0, g.n() - 1);
    let mut prev = 0.0;
    for s in 1..12 {
        let m = empirical_max_mixing(&bound, pair, &InputBox::default(), s, 5).unwrap();
        assert!(m >= prev);
        prev = m;
    }
    let point = InputBox::new(0.3, 0.3).unwrap();
    let x = Matrix::from_fn(g.n(), model.width(), |_, _| 0.3);
    let m = empirical_max_mixing(&bound, pair, &point, 5, 0).unwrap();
    assert_eq!(m, mixing_fd(&bound, &x, pair).unwrap().max_abs);
    assert!(empirical_max_mixing(&bound, pair, &point, 0, 0).is_err());
}

#[test]
fn max_readout_ties_are_detected() {
    let g = generate(&GraphKind::Cycle { n: 5 }, 0).unwrap();
    let model = scalar_model(Activation::Tanh, Readout::Max, 2);
    let x = Matrix::from_fn(5, 1, |_, _| 0.5);
    assert!(matches!(
        fd_mixing(&model, &g, &x, NodePair::new(0, 2)),
        Err(Error::ReadoutTie { .. })
    ));
    let bound = model.bind(&g).unwrap();
    let point = InputBox::new(0.5, 0.5).unwrap();
    assert!(matches!(
        empirical_max_mixing(&bound, NodePair::new(0, 2), &point, 3, 0),
        Err(Error::ReadoutTie { .. })
    ));
    assert!(empirical_max_mixing(&bound, NodePair::new(0, 2), &InputBox::default(), 3, 0).is_ok());
}

#[test]
fn second_differences_converge() {
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    for _ in 0..20 {
        let g = random_graph(&mut rng);
        let model = random_model(&mut rng, true);
        let bound = model.bind(&g).unwrap();
        let x = random_features(&mut rng, g.n(), model.width());
        let pair = NodePair::new(0, 1);
        let at = |h: f64| mixing_fd_with_step(&bound, &x, pair, h).unwrap().block;
        let (f1, f2, f3) = (at(4e-3), at(2e-3), at(1e-3));
        let first = f1.sub(&f2).max_abs();
        let second = f2.sub(&f3).max_abs();
        assert!(second <= 0.5 * first + 1e-8, "{first} then {second}");
    }
}
