mod common;

use approx::assert_abs_diff_eq;
use common::naive;
use squashscope::bounds::{
    build_message_matrix, build_qk, build_s, jacobian_bound_matrix, min_depth_bound,
    min_weight_bound, mixing_bound, mixing_bound_matrix, node_hessian_bounds, node_osq_first_order,
    node_osq_second_order, osq_relative, osq_tilde, score_rewiring, spectral_mixing_bound,
    MatrixKind, MixingConstants,
};
use squashscope::graph::{generate, GraphKind};
use squashscope::spectral::{commute_time_spectral, gamma};
use squashscope::{Error, Extended, Graph, Matrix, NodePair, SignedExtended};

fn small_graphs() -> Vec<Graph> {
    let mut out = vec![
        generate(&GraphKind::Path { n: 3 }, 0).unwrap(),
        generate(&GraphKind::Path { n: 5 }, 0).unwrap(),
        generate(&GraphKind::Cycle { n: 5 }, 0).unwrap(),
        generate(&GraphKind::Complete { n: 4 }, 0).unwrap(),
        generate(&GraphKind::Tree { arity: 2, depth: 2 }, 0).unwrap(),
        generate(
            &GraphKind::Grid {
                width: 2,
                height: 3,
            },
            0,
        )
        .unwrap(),
    ];
    for seed in 0..3 {
        out.push(generate(&GraphKind::ErdosRenyi { n: 7, p: 0.4 }, seed).unwrap());
        out.push(
            generate(
                &GraphKind::MoleculeLike {
                    n: 8,
                    extra_cycles: 1,
                },
                seed,
            )
            .unwrap(),
        );
    }
    out
}

fn constant_sets() -> Vec<MixingConstants> {
    vec![
        MixingConstants::default(),
        MixingConstants {
            omega: 0.3,
            w: 0.8,
            c1: 0.2,
            c2: 0.6,
            c2nd: 0.0,
            c_sigma: 1.0,
        },
        MixingConstants {
            omega: 0.5,
            w: 1.3,
            c1: 0.1,
            c2: 0.9,
            c2nd: 0.4,
            c_sigma: 0.7,
        },
        MixingConstants {
            omega: 0.0,
            w: 2.0,
            c1: 0.7,
            c2: 1.5,
            c2nd: 1.1,
            c_sigma: 1.13,
        },
    ]
}

fn dense(m: &Matrix) -> naive::Dense {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

fn consts(c: &MixingConstants) -> naive::Consts {
    naive::Consts {
        omega: c.omega,
        w: c.w,
        c1: c.c1,
        c2: c.c2,
        c2nd: c.c2nd,
        c_sigma: c.c_sigma,
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-10 * (1.0 + a.abs().max(b.abs()))
}

/// Constants with `ω/w + c1 γ + c2 ≤ 1`, `w ≤ 1`, `c_σ ≤ 1`.
fn admissible(g: &Graph, c2nd: f64) -> MixingConstants {
    let c1 = 0.1 / gamma(g);
    MixingConstants {
        omega: 0.2,
        w: 1.0,
        c1,
        c2: 0.7,
        c2nd,
        c_sigma: 1.0,
    }
}

#[test]
fn message_matrix_examples() {
    let k3 = generate(&GraphKind::Complete { n: 3 }, 0).unwrap();
    let a = build_message_matrix(&k3, MatrixKind::Sym).unwrap();
    for v in 0..3 {
        for u in 0..3 {
            assert_abs_diff_eq!(
                a.values[(v, u)],
                if v == u { 0.0 } else { 0.5 },
                epsilon = 1e-15
            );
        }
    }
    let p3 = generate(&GraphKind::Path { n: 3 }, 0).unwrap();
    let rw = build_message_matrix(&p3, MatrixKind::Rw).unwrap();
    assert_eq!(rw.values.row(1), &[0.5, 0.0, 0.5]);
    for g in small_graphs() {
        assert_eq!(
            build_message_matrix(&g, MatrixKind::Raw).unwrap().values,
            g.adjacency_matrix()
        );
        let rw = build_message_matrix(&g, MatrixKind::Rw).unwrap();
        assert!(rw.values.row_sums().iter().all(|s| (s - 1.0).abs() < 1e-12));
        let sym = build_message_matrix(&g, MatrixKind::Sym).unwrap();
        assert_eq!(sym.values.max_asymmetry(), Some(0.0));
    }
}

#[test]
fn s_examples() {
    let p3 = generate(&GraphKind::Path { n: 3 }, 0).unwrap();
    let a = build_message_matrix(&p3, MatrixKind::Sym).unwrap();
    assert_eq!(build_s(&a, &MixingConstants::default()).unwrap(), a.values);
    let k3 = generate(&GraphKind::Complete { n: 3 }, 0).unwrap();
    let raw = build_message_matrix(&k3, MatrixKind::Raw).unwrap();
    let c = MixingConstants {
        omega: 1.0,
        w: 1.0,
        c1: 1.0,
        c2: 1.0,
        c2nd: 0.0,
        c_sigma: 1.0,
    };
    let expected = Matrix::identity(3).scale(3.0).add(&raw.values);
    assert_eq!(build_s(&raw, &c).unwrap(), expected);
    let zero = MixingConstants {
        w: 0.0,
        ..MixingConstants::default()
    };
    assert!(matches!(
        build_s(&raw, &zero),
        Err(Error::DegenerateCapacity)
    ));
    for g in small_graphs() {
        let c = admissible(&g, 0.0);
        let sym = build_message_matrix(&g, MatrixKind::Sym).unwrap();
        let s = build_s(&sym, &c).unwrap();
        for (i, row) in s.row_sums().iter().enumerate() {
            assert!(*row <= gamma(&g) + 1e-12, "row {i}: {row}");
        }
        let naive_s = naive::s_matrix(&dense(&sym.values), &consts(&c));
        for i in 0..g.n() {
            for j in 0..g.n() {
                assert!(close(s[(i, j)], naive_s[i][j]));
            }
        }
    }
}

#[test]
fn qk_matches_naive_and_is_symmetric() {
    for g in small_graphs() {
        for kind in MatrixKind::ALL {
            let a = build_message_matrix(&g, kind).unwrap();
            for c in constant_sets() {
                for m in 1..=3 {
                    for k in 0..m {
                        let q = build_qk(&a, &c, m, k).unwrap();
                        assert_eq!(q.max_asymmetry(), Some(0.0));
                        let oracle = naive::q_matrix(&dense(&a.values), &consts(&c), m, k);
                        for v in 0..g.n() {
                            for u in 0..g.n() {
                                assert!(q[(v, u)] >= 0.0);
                                assert!(
                                    close(q[(v, u)], oracle[v][u]),
                                    "{kind:?} m={m} k={k} ({v},{u})"
                                );
                            }
                        }
                    }
                    assert!(build_qk(&a, &c, m, m).is_err());
                }
            }
        }
    }
}

#[test]
fn q0_at_depth_one() {
    let g = generate(
        &GraphKind::MoleculeLike {
            n: 7,
            extra_cycles: 1,
        },
        3,
    )
    .unwrap();
    let a = build_message_matrix(&g, MatrixKind::Rw).unwrap();
    let q = build_qk(&a, &MixingConstants::default(), 1, 0).unwrap();
    let rows = a.values.row_sums();
    let cols = Matrix::from_diag(&rows).add(&a.values).col_sums();
    let expected = a
        .values
        .add(&a.values.transpose())
        .add(&Matrix::from_diag(&cols));
    assert!(q.sub(&expected).max_abs() < 1e-14);
}

#[test]
fn mixing_bound_matches_naive() {
    for g in small_graphs() {
        for kind in MatrixKind::ALL {
            let a = build_message_matrix(&g, kind).unwrap();
            for c in constant_sets() {
                for m in 1..=3 {
                    let all = mixing_bound_matrix(&a, &c, m).unwrap();
                    for v in 0..g.n() {
                        for u in 0..g.n() {
                            let expected =
                                naive::mixing_total(&dense(&a.values), &consts(&c), m, v, u);
                            let report = mixing_bound(&g, &a, &c, m, NodePair::new(v, u)).unwrap();
                            assert!(
                                close(report.total_bound, expected),
                                "{kind:?} m={m} ({v},{u})"
                            );
                            assert!(close(all[(v, u)], expected));
                            assert_eq!(report.per_k_terms.len(), m);
                            assert!(report.per_k_terms.iter().all(|t| *t >= 0.0));
                            assert!(close(report.per_k_terms.iter().sum(), report.total_bound));
                        }
                    }
                }
            }
        }
    }
}

#[test]
fn mixing_bound_examples() {
    let p3 = generate(&GraphKind::Path { n: 3 }, 0).unwrap();
    let a = build_message_matrix(&p3, MatrixKind::Sym).unwrap();
    let c = MixingConstants::default();
    let r = mixing_bound(&p3, &a, &c, 1, NodePair::new(0, 2)).unwrap();
    assert_abs_diff_eq!(r.total_bound, 0.5, epsilon = 1e-15);
    match r.osq_tilde {
        Extended::Finite(x) => assert_abs_diff_eq!(x, 2.0, epsilon = 1e-14),
        Extended::Infinite => panic!("finite expected"),
    }
    let p5 = generate(&GraphKind::Path { n: 5 }, 0).unwrap();
    let a5 = build_message_matrix(&p5, MatrixKind::Sym).unwrap();
    let r = mixing_bound(&p5, &a5, &c, 1, NodePair::new(0, 4)).unwrap();
    assert_eq!(r.total_bound, 0.0);
    assert_eq!(r.osq_tilde, Extended::Infinite);
    assert!(
        mixing_bound(&p5, &a5, &c, 2, NodePair::new(0, 4))
            .unwrap()
            .total_bound
            > 0.0
    );
    let zero = MixingConstants { w: 0.0, ..c };
    assert_eq!(
        osq_tilde(&p3, &a, &zero, 2, NodePair::new(0, 2)).unwrap(),
        Extended::Infinite
    );
    let rw = build_message_matrix(&p3, MatrixKind::Rw).unwrap();
    assert!(!mixing_bound(&p3, &rw, &c, 1, NodePair::new(0, 2))
        .unwrap()
        .notes
        .is_empty());
    assert!(mixing_bound(&p3, &a, &c, 1, NodePair::new(0, 2))
        .unwrap()
        .notes
        .is_empty());
}

#[test]
fn under_reaching_gives_infinite_osq() {
    for g in small_graphs() {
        let d = g.distance_matrix().unwrap();
        let a = build_message_matrix(&g, MatrixKind::Sym).unwrap();
        for m in 1..=3 {
            let all = mixing_bound_matrix(&a, &constant_sets()[2], m).unwrap();
            for v in 0..g.n() {
                for u in 0..g.n() {
                    assert_eq!(all[(v, u)] == 0.0, 2 * m < d[v][u], "m={m} ({v},{u})");
                }
            }
        }
    }
}

#[test]
fn bound_is_monotone_in_every_constant() {
    let g = generate(
        &GraphKind::MoleculeLike {
            n: 9,
            extra_cycles: 2,
        },
        4,
    )
    .unwrap();
    let a = build_message_matrix(&g, MatrixKind::Sym).unwrap();
    let base = MixingConstants {
        omega: 0.2,
        w: 0.9,
        c1: 0.1,
        c2: 0.5,
        c2nd: 0.3,
        c_sigma: 0.8,
    };
    let b0 = mixing_bound_matrix(&a, &base, 3).unwrap();
    let bumps = [
        MixingConstants { omega: 0.4, ..base },
        MixingConstants { w: 1.1, ..base },
        MixingConstants { c1: 0.3, ..base },
        MixingConstants { c2: 0.7, ..base },
        MixingConstants { c2nd: 0.6, ..base },
        MixingConstants {
            c_sigma: 1.0,
            ..base
        },
    ];
    for c in bumps {
        let b1 = mixing_bound_matrix(&a, &c, 3).unwrap();
        for v in 0..g.n() {
            for u in 0..g.n() {
                assert!(b1[(v, u)] >= b0[(v, u)] * (1.0 - 1e-12), "{c:?} ({v},{u})");
            }
        }
    }
}

/// Holds on the farthest pair of each graph; near pairs can see small increases at large `m`.
#[test]
fn osq_tilde_non_increasing_in_depth() {
    for g in small_graphs().into_iter().filter(Graph::is_validated) {
        let d = g.distance_matrix().unwrap();
        let r = g.diameter().unwrap();
        let (v, u) = (0..g.n())
            .flat_map(|v| (0..g.n()).map(move |u| (v, u)))
            .find(|&(v, u)| d[v][u] == r)
            .unwrap();
        for c2nd in [0.0, 0.5] {
            let c = admissible(&g, c2nd);
            let a = build_message_matrix(&g, MatrixKind::Sym).unwrap();
            let osq: Vec<f64> = (1..=8)
                .map(|m| {
                    osq_tilde(&g, &a, &c, m, NodePair::new(v, u))
                        .unwrap()
                        .to_f64()
                })
                .collect();
            for w in osq.windows(2) {
                assert!(w[1] <= w[0] * (1.0 + 1e-12), "({v},{u}) {osq:?}");
            }
        }
    }
}

#[test]
fn osq_relative_examples() {
    let p4 = generate(&GraphKind::Path { n: 4 }, 0).unwrap();
    let a = build_message_matrix(&p4, MatrixKind::Sym).unwrap();
    let c = MixingConstants::default();
    let all = mixing_bound_matrix(&a, &c, 2).unwrap();
    let mut best = (0, 0);
    for v in 0..4 {
        for u in 0..4 {
            if all[(v, u)] > all[best] {
                best = (v, u);
            }
        }
    }
    assert_eq!(
        osq_relative(&p4, &a, &c, 2, NodePair::new(best.0, best.1)).unwrap(),
        Extended::Finite(1.0)
    );
    let pairs: Vec<NodePair> = (0..4)
        .flat_map(|v| (0..4).map(move |u| NodePair::new(v, u)))
        .collect();
    for &p in &pairs {
        for &q in &pairs {
            let rel = |x| osq_relative(&p4, &a, &c, 2, x).unwrap().to_f64();
            let abs = |x| osq_tilde(&p4, &a, &c, 2, x).unwrap().to_f64();
            assert_eq!(rel(p) < rel(q), abs(p) < abs(q));
            assert!(rel(p) >= 1.0);
        }
    }
    let p5 = generate(&GraphKind::Path { n: 5 }, 0).unwrap();
    let a5 = build_message_matrix(&p5, MatrixKind::Sym).unwrap();
    assert_eq!(
        osq_relative(&p5, &a5, &c, 1, NodePair::new(0, 4)).unwrap(),
        Extended::Infinite
    );
    let zero = MixingConstants { w: 0.0, ..c };
    assert!(matches!(
        osq_relative(&p5, &a5, &zero, 1, NodePair::new(0, 4)),
        Err(Error::AllPairsZero)
    ));
}

#[test]
fn tree_closed_forms() {
    for arity in 1..=4 {
        for depth in 1..=3 {
            let g = generate(&GraphKind::Tree { arity, depth }, 0).unwrap();
            let leaf = g.n() - 1;
            let pair = NodePair::new(0, leaf);
            let r = g.shortest_distance(pair).unwrap();
            assert_eq!(r, depth);
            let d = arity as f64;
            let rf = r as f64;
            for mix in [0.01, 0.3, 2.0] {
                let b = min_weight_bound(&g, pair, 1.0, mix, MatrixKind::Sym).unwrap();
                let displayed = (d + 1.0) * (mix / (d + 1.0)).powf(1.0 / rf);
                let exact = (mix * d.sqrt() * (d + 1.0).powf(rf - 1.0)).powf(1.0 / rf);
                assert_abs_diff_eq!(b.exact, exact, epsilon = 1e-12 * exact);
                assert!(b.exact >= displayed * (1.0 - 1e-12));
                if arity == 1 {
                    assert_abs_diff_eq!(b.exact, displayed, epsilon = 1e-12 * displayed);
                }
            }
            if r % 2 == 0 {
                let a = build_message_matrix(&g, MatrixKind::Sym).unwrap();
                for w in [0.5, 1.0, 1.7] {
                    let c = MixingConstants {
                        w,
                        ..MixingConstants::default()
                    };
                    let osq = osq_tilde(&g, &a, &c, r / 2, pair).unwrap().to_f64();
                    let expected = w.powf(-rf) * (d + 1.0).powf(rf - 1.0) * d.sqrt();
                    assert_abs_diff_eq!(osq, expected, epsilon = 1e-10 * expected);
                }
            }
        }
    }
}

#[test]
fn complete_graph_closed_forms() {
    for n in 3..=8 {
        let g = generate(&GraphKind::Complete { n }, 0).unwrap();
        let pair = NodePair::new(0, n - 1);
        let nf = n as f64;
        for mix in [0.1, 1.0, 3.0] {
            let b = min_weight_bound(&g, pair, 1.0, mix, MatrixKind::Sym).unwrap();
            assert_abs_diff_eq!(b.exact, (nf - 1.0) * mix, epsilon = 1e-12 * nf * mix);
            assert_abs_diff_eq!(
                b.degree_based.unwrap(),
                (nf - 1.0) * mix,
                epsilon = 1e-12 * nf * mix
            );
        }
        let a = build_message_matrix(&g, MatrixKind::Sym).unwrap();
        for w in [0.25, 0.5, 1.0] {
            let c = MixingConstants {
                w,
                ..MixingConstants::default()
            };
            let osq = osq_tilde(&g, &a, &c, 1, pair).unwrap().to_f64();
            assert_abs_diff_eq!(
                osq,
                (nf - 1.0).powi(2) / ((nf - 2.0) * w * w),
                epsilon = 1e-10 * osq
            );
            assert!(osq >= (nf - 1.0) / w);
        }
    }
    let k5 = generate(&GraphKind::Complete { n: 5 }, 0).unwrap();
    let b = min_weight_bound(&k5, NodePair::new(1, 3), 1.0, 1.0, MatrixKind::Sym).unwrap();
    assert_abs_diff_eq!(b.degree_based.unwrap(), 4.0, epsilon = 1e-12);
}

#[test]
fn min_weight_properties() {
    for g in small_graphs() {
        for kind in [MatrixKind::Sym, MatrixKind::Rw] {
            for v in 0..g.n() {
                for u in 0..g.n() {
                    if v == u {
                        continue;
                    }
                    let b = min_weight_bound(&g, NodePair::new(v, u), 0.8, 0.7, kind).unwrap();
                    assert!(
                        b.degree_based.unwrap() <= b.exact * (1.0 + 1e-12),
                        "{kind:?} ({v},{u}) {b:?}"
                    );
                    assert_eq!(b.depth, b.distance.div_ceil(2));
                }
            }
        }
        let b = min_weight_bound(&g, NodePair::new(0, 1), 1.0, 1e-300, MatrixKind::Raw).unwrap();
        assert!(b.degree_based.is_none() && b.exact < 1e-10);
    }
    let p3 = generate(&GraphKind::Path { n: 3 }, 0).unwrap();
    assert!(min_weight_bound(&p3, NodePair::new(0, 0), 1.0, 1.0, MatrixKind::Sym).is_err());
    assert!(min_weight_bound(&p3, NodePair::new(0, 2), 1.0, 0.0, MatrixKind::Sym).is_err());
}

#[test]
fn min_depth_decomposition() {
    for g in small_graphs().into_iter().filter(Graph::is_validated) {
        let tau = commute_time_spectral(&g).unwrap();
        for c2nd in [0.0, 0.4] {
            let c = admissible(&g, c2nd);
            for mix in [0.0, 0.5, 5.0] {
                let b = min_depth_bound(&g, NodePair::new(0, g.n() - 1), &c, mix).unwrap();
                assert_abs_diff_eq!(b.tau, tau.tau[(0, g.n() - 1)], epsilon = 1e-12);
                assert_abs_diff_eq!(b.commute_term, b.tau / (4.0 * c.c2), epsilon = 1e-12);
                assert_eq!(b.bound, b.commute_term + b.correction);
                if c2nd == 0.0 {
                    assert_eq!(b.mu, 1.0);
                }
            }
            let lo = min_depth_bound(&g, NodePair::new(0, 1), &c, 0.1).unwrap();
            let hi = min_depth_bound(&g, NodePair::new(0, 1), &c, 1e6).unwrap();
            assert!(hi.bound > lo.bound && hi.bound >= hi.commute_term);
        }
    }
}

#[test]
fn min_depth_on_cut_edge() {
    // Two triangles joined by the bridge (2, 3).
    let g =
        Graph::from_edges(6, &[(0, 1), (1, 2), (0, 2), (2, 3), (3, 4), (4, 5), (3, 5)]).unwrap();
    let c = MixingConstants {
        omega: 0.0,
        w: 1.0,
        c1: 0.0,
        c2: 1.0,
        c2nd: 0.0,
        c_sigma: 1.0,
    };
    let b = min_depth_bound(&g, NodePair::new(2, 3), &c, 100.0).unwrap();
    assert_abs_diff_eq!(b.commute_term, g.edge_count() as f64 / 2.0, epsilon = 1e-9);
    assert!(b.bound >= g.edge_count() as f64 / 2.0, "{b:?}");
}

#[test]
fn premise_violations_are_named() {
    let g = generate(&GraphKind::Complete { n: 4 }, 0).unwrap();
    let pair = NodePair::new(0, 1);
    let cases = [
        (
            MixingConstants {
                w: 1.5,
                ..MixingConstants::default()
            },
            "w <= 1",
        ),
        (
            MixingConstants {
                omega: 0.5,
                ..MixingConstants::default()
            },
            "omega/w + c1*gamma + c2 <= 1",
        ),
        (
            MixingConstants {
                c_sigma: 1.13,
                ..MixingConstants::default()
            },
            "c_sigma <= 1",
        ),
    ];
    for (c, needle) in cases {
        let err = min_depth_bound(&g, pair, &c, 1.0).unwrap_err();
        assert!(
            matches!(err, Error::PremiseViolation(_)) && err.to_string().contains(needle),
            "{err}"
        );
        assert!(spectral_mixing_bound(&g, &c, 2, pair, MatrixKind::Sym).is_err());
    }
    let c4 = generate(&GraphKind::Cycle { n: 4 }, 0).unwrap();
    assert!(matches!(
        min_depth_bound(&c4, pair, &MixingConstants::default(), 1.0),
        Err(Error::Bipartite)
    ));
}

#[test]
fn spectral_bound_dominates_exact_bound() {
    for g in small_graphs().into_iter().filter(Graph::is_validated) {
        for kind in [MatrixKind::Sym, MatrixKind::Rw] {
            let a = build_message_matrix(&g, kind).unwrap();
            for c2nd in [0.0, 0.3] {
                for w in [0.6, 1.0] {
                    let c = MixingConstants {
                        w,
                        omega: 0.1 * w,
                        ..admissible(&g, c2nd)
                    };
                    for m in 1..=6 {
                        let exact = mixing_bound_matrix(&a, &c, m).unwrap();
                        for v in 0..g.n() {
                            for u in 0..g.n() {
                                let s = spectral_mixing_bound(&g, &c, m, NodePair::new(v, u), kind)
                                    .unwrap();
                                assert_eq!(s.total, s.diffusion_term + s.nonlinear_term);
                                assert!(
                                    s.total >= exact[(v, u)] - 1e-10,
                                    "{kind:?} m={m} ({v},{u}): {} < {}",
                                    s.total,
                                    exact[(v, u)]
                                );
                                if c2nd == 0.0 {
                                    assert_eq!(s.nonlinear_term, 0.0);
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    let k3 = generate(&GraphKind::Complete { n: 3 }, 0).unwrap();
    let raw = MatrixKind::Raw;
    assert!(spectral_mixing_bound(
        &k3,
        &MixingConstants::default(),
        2,
        NodePair::new(0, 1),
        raw
    )
    .is_err());
}

#[test]
fn spectral_bound_grows_linearly_in_depth() {
    let g = generate(&GraphKind::Cycle { n: 7 }, 0).unwrap();
    let c = MixingConstants {
        c2: 0.5,
        ..MixingConstants::default()
    };
    let pair = NodePair::new(0, 3);
    let at = |m| {
        spectral_mixing_bound(&g, &c, m, pair, MatrixKind::Sym)
            .unwrap()
            .total
    };
    let slope = 2.0 / (2.0 * 7.0);
    assert_abs_diff_eq!(at(401) - at(400), slope, epsilon = 1e-9);
}

#[test]
fn node_first_order_examples() {
    let p5 = generate(&GraphKind::Path { n: 5 }, 0).unwrap();
    let a = build_message_matrix(&p5, MatrixKind::Raw).unwrap();
    for w in [0.5, 2.0] {
        let c = MixingConstants {
            w,
            ..MixingConstants::default()
        };
        for r in 1..=4 {
            let pair = NodePair::new(0, r);
            assert_eq!(
                node_osq_first_order(&p5, &a, &c, r - 1, pair).unwrap(),
                Extended::Infinite
            );
            let x = node_osq_first_order(&p5, &a, &c, r, pair).unwrap().to_f64();
            assert_abs_diff_eq!(x, w.powi(-(r as i32)), epsilon = 1e-12 * x);
        }
    }
    let zero = MixingConstants {
        w: 0.0,
        ..MixingConstants::default()
    };
    assert_eq!(
        node_osq_first_order(&p5, &a, &zero, 2, NodePair::new(0, 1)).unwrap(),
        Extended::Infinite
    );
    let j = jacobian_bound_matrix(
        &a,
        &MixingConstants {
            c_sigma: 0.5,
            ..MixingConstants::default()
        },
        2,
    )
    .unwrap();
    assert_abs_diff_eq!(j[(0, 2)], 0.25, epsilon = 1e-15);
}

#[test]
fn node_second_order_matches_naive_and_sums_to_total() {
    for g in small_graphs() {
        for kind in MatrixKind::ALL {
            let a = build_message_matrix(&g, kind).unwrap();
            for c in constant_sets() {
                for m in 1..=3 {
                    for (v, u) in [(0, g.n() - 1), (1, 1), (0, 2)] {
                        let pair = NodePair::new(v, u);
                        let d = node_hessian_bounds(&g, &a, &c, m, pair).unwrap();
                        for (i, di) in d.iter().enumerate() {
                            let oracle =
                                naive::node_denominator(&dense(&a.values), &consts(&c), m, i, v, u);
                            assert!(
                                close(*di, oracle),
                                "{kind:?} m={m} i={i} ({v},{u}): {di} vs {oracle}"
                            );
                        }
                        let swapped = node_hessian_bounds(&g, &a, &c, m, pair.swapped()).unwrap();
                        for i in 0..g.n() {
                            assert!(close(d[i], swapped[i]));
                        }
                        let total = mixing_bound(&g, &a, &c, m, pair).unwrap().total_bound;
                        assert!(close(d.iter().sum(), total), "{kind:?} m={m}");
                    }
                }
            }
        }
    }
}

#[test]
fn node_second_order_examples() {
    let p3 = generate(&GraphKind::Path { n: 3 }, 0).unwrap();
    let a = build_message_matrix(&p3, MatrixKind::Sym).unwrap();
    let w = 0.7;
    let c = MixingConstants {
        w,
        ..MixingConstants::default()
    };
    let s = build_s(&a, &c).unwrap();
    let pair = NodePair::new(0, 2);
    let x = node_osq_second_order(&p3, &a, &c, 1, 1, pair)
        .unwrap()
        .to_f64();
    assert_abs_diff_eq!(1.0 / x, w * w * s[(1, 0)] * s[(1, 2)], epsilon = 1e-14);
    let p7 = generate(&GraphKind::Path { n: 7 }, 0).unwrap();
    let a7 = build_message_matrix(&p7, MatrixKind::Sym).unwrap();
    let c = MixingConstants {
        c2nd: 0.5,
        ..MixingConstants::default()
    };
    assert_eq!(
        node_osq_second_order(&p7, &a7, &c, 1, 6, NodePair::new(0, 1)).unwrap(),
        Extended::Infinite
    );
    assert!(node_osq_second_order(&p7, &a7, &c, 1, 7, NodePair::new(0, 1)).is_err());
}

#[test]
fn rewiring_examples() {
    let p4 = generate(&GraphKind::Path { n: 4 }, 0).unwrap();
    let chord = p4.with_edges_added(&[(0, 3)]).unwrap();
    // A positive self-weight lets the one-hop chord register at m = 1 on the bipartite C_4.
    let c = MixingConstants {
        omega: 0.5,
        ..MixingConstants::default()
    };
    let ends = NodePair::new(0, 3);
    for kind in MatrixKind::ALL {
        for m in 1..=3 {
            let s = &score_rewiring(&p4, &chord, &c, m, &[ends], kind).unwrap()[0];
            assert!(s.after < s.before, "{kind:?} m={m}: {s:?}");
            let back = &score_rewiring(&chord, &p4, &c, m, &[ends], kind).unwrap()[0];
            assert!(back.after > back.before);
        }
        let pairs: Vec<NodePair> = (0..4)
            .flat_map(|v| (0..4).map(move |u| NodePair::new(v, u)))
            .collect();
        for s in score_rewiring(&p4, &p4, &c, 2, &pairs, kind).unwrap() {
            assert_eq!(s.delta, SignedExtended::Finite(0.0));
        }
    }
    let p5 = generate(&GraphKind::Path { n: 5 }, 0).unwrap();
    assert!(matches!(
        score_rewiring(&p4, &p5, &c, 2, &[ends], MatrixKind::Sym),
        Err(Error::DimensionMismatch(_))
    ));
}
