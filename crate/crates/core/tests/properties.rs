use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;

use atomboson::exactsim::{build_decay_diagonal, Propagator, SimState};
use atomboson::fock::{FockBasis, FockState};
use atomboson::hom::{hom_analytic, HomParams};
use atomboson::interferometer::{
    clements_decompose, composite_pulse, coupling_matrix, haar_random_unitary, reconstruct,
    CircuitPlan, LocalCoupling, ModeUnitary,
};
use atomboson::lossmodel::{
    p_step_background, p_step_twobody_table, p_survival_with, r_classical, r_ideal, r_nisq,
    r_photonic, ClassicalScenario, LossScenario, PairTrioTable, PhotonicScenario, TwoBodyModel,
};
use atomboson::permanent::{output_distribution, permanent_glynn, permanent_naive};
use atomboson::seed;

fn complex_matrix(n: usize) -> impl Strategy<Value = DMatrix<Complex64>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n * n).prop_map(move |v| {
        DMatrix::from_iterator(n, n, v.into_iter().map(|(re, im)| Complex64::new(re, im)))
    })
}

fn occupation(m: usize, max: u32) -> impl Strategy<Value = Vec<u32>> {
    prop::collection::vec(0..=max, m)
}

fn scenario() -> impl Strategy<Value = LossScenario> {
    (
        1e-6f64..1e-3,
        1.0f64..1000.0,
        0.01f64..10.0,
        0.0f64..1.0,
        0.0f64..1.0,
        0.5f64..=1.0,
        0.5f64..=1.0,
    )
        .prop_map(
            |(t_step, tau_bg, tau_tb, t_init, t_det, eta_init, eta_det)| LossScenario {
                t_step,
                tau_bg,
                tau_tb,
                t_init,
                t_det,
                eta_init,
                eta_det,
                mode_ratio_c: 1.0,
            },
        )
}

fn random_plan(m: usize, seed: u64) -> CircuitPlan {
    let mut rng = seed::rng(seed);
    let layers = (0..m)
        .map(|l| {
            (l % 2..m.saturating_sub(1))
                .step_by(2)
                .map(|mode| {
                    use rand::Rng;
                    LocalCoupling::new(
                        mode,
                        rng.random_range(0.0..std::f64::consts::PI),
                        rng.random_range(0.0..std::f64::consts::TAU),
                    )
                })
                .collect()
        })
        .collect();
    CircuitPlan {
        m,
        layers,
        output_phases: vec![0.0; m],
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rank_inverts_unrank(occ in occupation(9, 3)) {
        let state = FockState::new(occ.clone()).unwrap();
        let basis = FockBasis::new(state.total(), 9).unwrap();
        let i = basis.rank(&state).unwrap();
        let back = basis.unrank(i).unwrap();
        prop_assert_eq!(back.occupations(), &occ[..]);
    }

    #[test]
    fn fock_state_json_round_trips(occ in occupation(6, 5)) {
        let state = FockState::new(occ).unwrap();
        let text = serde_json::to_string(&state).unwrap();
        prop_assert_eq!(FockState::from_json(&text).unwrap(), state);
    }

    #[test]
    fn composite_pulse_reproduces_coupling(theta in -10.0f64..10.0, phi in -10.0f64..10.0) {
        let d = composite_pulse(theta, phi).matrix() - coupling_matrix(theta, phi);
        prop_assert!(d.iter().all(|z| z.norm() < 1e-12));
    }

    #[test]
    fn coupling_determinant_is_a_phase(theta in -10.0f64..10.0, phi in -10.0f64..10.0) {
        let det = coupling_matrix(theta, phi).determinant();
        prop_assert!((det - Complex64::from_polar(1.0, -phi)).norm() < 1e-12);
    }

    #[test]
    fn decomposition_round_trips(m in 1usize..=12, s in any::<u64>()) {
        let u = haar_random_unitary(m, s);
        let plan = clements_decompose(&u).unwrap();
        prop_assert!(plan.coupling_count() <= m * (m - 1) / 2);
        prop_assert!(plan.depth() <= m.max(1));
        let back = reconstruct(&plan).unwrap();
        prop_assert!((back.matrix() - u.matrix()).norm() < 1e-10);
        prop_assert!(back.unitarity_deviation() < 1e-12);
        for (_, c) in plan.couplings() {
            prop_assert!((0.0..=std::f64::consts::PI).contains(&c.theta));
            prop_assert!((0.0..std::f64::consts::TAU).contains(&c.phi));
        }
        let reparsed = CircuitPlan::from_json(&plan.to_json()).unwrap();
        prop_assert_eq!(reparsed, plan);
    }

    #[test]
    fn unitary_json_round_trips(m in 1usize..=6, s in any::<u64>()) {
        let u = haar_random_unitary(m, s);
        prop_assert_eq!(ModeUnitary::from_json(&u.to_json()).unwrap(), u);
    }

    #[test]
    fn glynn_matches_naive(a in (1usize..=6).prop_flat_map(complex_matrix)) {
        let g = permanent_glynn(&a).unwrap();
        let r = permanent_naive(&a).unwrap();
        prop_assert!((g - r).norm() <= 1e-10 * r.norm().max(1e-300) || (g - r).norm() < 1e-13);
    }

    #[test]
    fn permanent_ignores_row_and_column_order(
        a in (2usize..=7).prop_flat_map(complex_matrix),
        s in any::<u64>(),
    ) {
        use rand::seq::SliceRandom;
        let n = a.nrows();
        let mut rng = seed::rng(s);
        let mut rows: Vec<usize> = (0..n).collect();
        let mut cols: Vec<usize> = (0..n).collect();
        rows.shuffle(&mut rng);
        cols.shuffle(&mut rng);
        let b = DMatrix::from_fn(n, n, |i, j| a[(rows[i], cols[j])]);
        let (pa, pb) = (permanent_glynn(&a).unwrap(), permanent_glynn(&b).unwrap());
        prop_assert!((pa - pb).norm() < 1e-10 * pa.norm().max(1.0));
    }

    #[test]
    fn permanent_is_linear_in_each_row(
        a in (1usize..=6).prop_flat_map(complex_matrix),
        re in -3.0f64..3.0,
        im in -3.0f64..3.0,
        r in 0usize..6,
    ) {
        let c = Complex64::new(re, im);
        let r = r % a.nrows();
        let mut b = a.clone();
        b.row_mut(r).iter_mut().for_each(|z| *z *= c);
        let (pa, pb) = (permanent_glynn(&a).unwrap(), permanent_glynn(&b).unwrap());
        prop_assert!((pb - c * pa).norm() < 1e-10 * (c * pa).norm().max(1.0));
    }

    #[test]
    fn full_distribution_is_normalized(m in 2usize..=8, n in 1usize..=4, s in any::<u64>()) {
        let u = haar_random_unitary(m, s);
        let mut occ = vec![0u32; m];
        for i in 0..n {
            occ[i % m] += 1;
        }
        let dist = output_distribution(&u, &FockState::new(occ).unwrap(), false).unwrap();
        let sum: f64 = dist.outcomes.iter().map(|(_, p)| p).sum();
        prop_assert!((sum - 1.0).abs() < 1e-10);
        prop_assert!((dist.total_mass - sum).abs() < 1e-12);
    }

    #[test]
    fn rates_are_positive_and_bounded(sc in scenario(), n in 1usize..=60) {
        let ideal = r_ideal(&sc, n);
        let nisq = r_nisq(&sc, n).unwrap();
        prop_assert!(nisq > 0.0 && ideal > 0.0);
        prop_assert!(nisq <= ideal);
        let ph = PhotonicScenario { r0: 1e7, eta_f: 0.5, eta_c: 0.999 };
        prop_assert!(r_photonic(&ph, n) > 0.0);
        prop_assert!(r_classical(&ClassicalScenario::tianhe2(), n) > 0.0);
    }

    #[test]
    fn survival_is_the_step_product_power(sc in scenario(), n in 1usize..=60) {
        for model in [TwoBodyModel::ClosedForm, TwoBodyModel::Exact] {
            let p = p_survival_with(&sc, n, model).unwrap();
            let bg = p_step_background(n, sc.t_step, sc.tau_bg);
            let tb = match model {
                TwoBodyModel::Exact => {
                    let table = PairTrioTable::new(n, sc.modes(n)).unwrap();
                    p_step_twobody_table(&table, sc.t_step, sc.tau_tb)
                }
                _ => atomboson::lossmodel::p_step_twobody_closed(1.0, sc.t_step, sc.tau_tb),
            };
            prop_assert_eq!(p, (bg * tb).powf(sc.steps(n)));
        }
    }

    #[test]
    fn step_survival_is_monotone_and_bounded(
        n in 2usize..=20,
        t1 in 0.0f64..5.0,
        dt in 0.0f64..5.0,
    ) {
        let table = PairTrioTable::new(n, 2 * n * n).unwrap();
        let a = p_step_twobody_table(&table, t1, 1.0);
        let b = p_step_twobody_table(&table, t1 + dt, 1.0);
        prop_assert!(b <= a + 1e-15);
        prop_assert!(b >= table.get(0, 0) - 1e-15);
        prop_assert!(a <= 1.0 + 1e-15);
    }

    #[test]
    fn lossless_layers_preserve_norm(m in 2usize..=12, n in 1usize..=4, s in any::<u64>()) {
        prop_assume!(atomboson::fock::multiset_dimension(n, m).unwrap() <= 2000);
        let basis = Arc::new(FockBasis::new(n, m).unwrap());
        let prop = Propagator::new(basis.clone());
        let mut state = SimState::uniform_random_phases(basis, s);
        let plan = random_plan(m, s);
        for layer in &plan.layers {
            prop.apply_layer(&mut state, layer).unwrap();
        }
        prop_assert!((state.norm_sqr().sqrt() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lossy_norm_never_grows(n in 1usize..=3, s in any::<u64>(), tau in 0.1f64..10.0) {
        let m = 6;
        let basis = Arc::new(FockBasis::new(n, m).unwrap());
        let prop = Propagator::new(basis.clone());
        let diag = build_decay_diagonal(&basis, 50.0, tau).unwrap();
        let mut state = SimState::uniform(basis);
        let trace = prop.run(&mut state, &random_plan(m, s), 0.3, &diag).unwrap();
        let product: f64 = trace.p_j.iter().product();
        prop_assert!(trace.p_j.iter().all(|&p| p > 0.0 && p <= 1.0 + 1e-12));
        prop_assert!((product - trace.p_total).abs() < 1e-10);
    }

    #[test]
    fn pair_sector_decay_law(
        k in 0usize..=2,
        t in 0.0f64..3.0,
        tau_bg in 1.0f64..100.0,
        tau_tb in 0.1f64..10.0,
    ) {
        let n = 2 * k + 1;
        let m = 8;
        let mut occ = vec![0u32; m];
        for s in 0..k {
            occ[2 * s] = 1;
            occ[2 * s + 1] = 1;
        }
        occ[m - 1] = 1;
        let basis = Arc::new(FockBasis::new(n, m).unwrap());
        let diag = build_decay_diagonal(&basis, tau_bg, tau_tb).unwrap();
        let state = SimState::basis_state(basis, &FockState::new(occ).unwrap()).unwrap();
        let p = atomboson::exactsim::apply_decay(&state, &diag, t).norm_sqr();
        let want = (-(n as f64) * t / tau_bg).exp() * (-(k as f64) * t / tau_tb).exp();
        prop_assert!((p - want).abs() < 1e-14);
    }

    #[test]
    fn hom_outcomes_sum_to_one(s in 0.0f64..=1.0, pb in 0.5f64..=1.0, l in 0.0f64..=1.0) {
        let o = hom_analytic(&HomParams::with_bunching(s, pb, l)).unwrap();
        prop_assert!((o.p0 + o.p1 + o.p2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_atom_signal_falls_with_purity(
        s in 0.05f64..=1.0,
        g1 in 0.0f64..1.0,
        dg in 0.001f64..1.0,
        l in 0.0f64..=1.0,
    ) {
        let g2 = (g1 + dg).min(1.0);
        prop_assume!(g2 > g1);
        let mk = |gamma| HomParams { survival_s: s, p_lic0: l, gamma, p_addr: 1.0, p_rec: 1.0 };
        let a = hom_analytic(&mk(g1)).unwrap().p2;
        let b = hom_analytic(&mk(g2)).unwrap().p2;
        prop_assert!(b < a);
    }
}
