use mqc::cartan::{cartan_decompose, cartan_volume, l1_phases};
use mqc::circuit_ir::{circuit_unitary, deserialize, generate_layered_circuit, serialize_compiled, HaarSampler, QvcDocument};
use mqc::linalg::{canonical_gate, euler_decompose, kron2, ry, Axis};
use mqc::mqlayer::{nuclear_norm, participation, MQLayer};
use mqc::optimizer::{compile, CompileMode, CompileOptions};
use mqc::phase_distance;
use mqc::pullback::{pullback_phases, split_lh, y_pullback};
use proptest::prelude::*;
use std::f64::consts::{FRAC_2_PI, FRAC_PI_4, PI};

fn axis() -> impl Strategy<Value = Axis> {
    prop_oneof![Just(Axis::X), Just(Axis::Y), Just(Axis::Z)]
}

/// Equal up to the sign flip allowed at the folding boundary `+-pi/4`.
fn same_folded(a: f64, b: f64) -> bool {
    (a - b).abs() < 1e-9 || ((a.abs() - FRAC_PI_4).abs() < 1e-7 && (a + b).abs() < 1e-7)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cartan_recovers_canonical_phases(a in -0.78f64..0.78, b in -0.78f64..0.78, c in -0.78f64..0.78, seed in any::<u64>()) {
        let mut h = HaarSampler::new(seed);
        let u = kron2(&h.su2(), &h.su2()) * canonical_gate(a, b, c) * kron2(&h.su2(), &h.su2());
        let f = cartan_decompose(&u).unwrap();
        prop_assert!(phase_distance(&f.reconstruct(), &u) < 1e-9);
        let mut want = [a.abs(), b.abs(), c.abs()];
        want.sort_by(|x, y| y.partial_cmp(x).unwrap());
        let got = [f.theta_xx.abs(), f.theta_yy.abs(), f.theta_zz.abs()];
        for (g, w) in got.iter().zip(&want) {
            prop_assert!((g - w).abs() < 1e-8, "{got:?} vs {want:?}");
        }
        prop_assert!((l1_phases(&f) - want.iter().sum::<f64>()).abs() < 1e-8);
        prop_assert!((cartan_volume(&u) - f.volume()).abs() < 1e-10);
    }

    #[test]
    fn euler_reconstructs_all_orders(seed in any::<u64>(), a0 in axis(), a1 in axis(), a2 in axis()) {
        prop_assume!(a0 != a1 && a1 != a2);
        let g = HaarSampler::new(seed).su2();
        let e = euler_decompose(&g, [a0, a1, a2]);
        prop_assert!(phase_distance(&e.reconstruct(), &g) < 1e-9);
    }

    #[test]
    fn pullback_phases_match_factors(seed in any::<u64>(), t1 in -PI..PI, t2 in -PI..PI) {
        let u = HaarSampler::new(seed).su4();
        let (_, bare) = split_lh(&u, (0, 1)).unwrap();
        let f = y_pullback(&bare, t1, t2).unwrap();
        prop_assert!(phase_distance(&f.reconstruct(), &(kron2(&ry(t1), &ry(t2)) * bare.reconstruct())) < 1e-9);
        let (bt, gt) = pullback_phases(bare.gamma, bare.beta, t1, t2);
        prop_assert!(same_folded(bt, f.beta_tilde), "beta {bt} vs {}", f.beta_tilde);
        prop_assert!(same_folded(gt, f.gamma_tilde), "gamma {gt} vs {}", f.gamma_tilde);
    }

    #[test]
    fn disjoint_layer_nuc_is_scaled_l1(thetas in prop::collection::vec(-1.5f64..1.5, 1..6), scale in -3.0f64..3.0) {
        let n = 2 * thetas.len();
        let l = MQLayer::from_couplings(n, thetas.iter().enumerate().map(|(k, &t)| (2 * k, 2 * k + 1, t))).unwrap();
        let l1: f64 = thetas.iter().map(|t| t.abs()).sum();
        prop_assert!((nuclear_norm(&l) - FRAC_2_PI * l1).abs() < 1e-12);
        let scaled = MQLayer::from_couplings(n, l.couplings().iter().map(|&(a, b, t)| (a, b, scale * t))).unwrap();
        prop_assert!((nuclear_norm(&scaled) - scale.abs() * nuclear_norm(&l)).abs() < 1e-10);
    }

    #[test]
    fn participation_is_a_distribution(edges in prop::collection::vec((0usize..7, 0usize..7, -1.0f64..1.0), 1..12)) {
        let mut l = MQLayer::new(7);
        for (a, b, t) in edges {
            if a != b {
                l.add(a, b, t).unwrap();
            }
        }
        prop_assume!(!l.is_zero());
        let alpha = participation(&l).unwrap();
        prop_assert!((alpha.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(alpha.iter().all(|&x| (0.0..=0.5 + 1e-12).contains(&x)));
        prop_assert!(nuclear_norm(&l) >= 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn compiled_circuits_round_trip(n in 2usize..6, layers in 1usize..4, seed in any::<u64>(), m in 0usize..3) {
        let mode = [CompileMode::Naive3L, CompileMode::Fused, CompileMode::FusedOptimized][m];
        let c = generate_layered_circuit(n, layers, seed).unwrap();
        let (out, report) = compile(&c, &CompileOptions::with_mode(mode)).unwrap();
        prop_assert!(phase_distance(&circuit_unitary(&out).unwrap(), &circuit_unitary(&c).unwrap()) < 1e-8);
        prop_assert!(report.ratio <= 1.0 + 1e-9 || mode != CompileMode::FusedOptimized);
        let text = serialize_compiled(&out);
        let QvcDocument::Compiled(back) = deserialize(&text).unwrap() else { panic!("kind changed") };
        prop_assert_eq!(serialize_compiled(&back), text);
    }
}
