//! Checks against independent brute-force references.

use std::collections::HashMap;
use std::sync::Arc;

use itertools::Itertools;
use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use atomboson::exactsim::{run_circuit, SimState};
use atomboson::fock::{enumerate_basis, multiset_dimension, FockBasis, FockState, SiteOccupancy};
use atomboson::interferometer::{clements_decompose, haar_random_unitary, ModeUnitary};
use atomboson::lossmodel::{
    p_pairs_trios_exact, p_step_twobody_closed, p_step_twobody_with, p_survival_with, r_ideal,
    r_nisq, PairTrioTable, RateScenario, TwoBodyModel,
};
use atomboson::permanent::{draw_samples, outcome_probability, output_distribution};
use atomboson::seed;

fn binom(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    (0..k).fold(1u64, |acc, i| acc * (n - i) / (i + 1))
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// `⟨out|U|in⟩` by expanding every creation operator of the input over all
/// output modes and collecting words whose multiset equals `out`.
fn amplitude_by_expansion(u: &DMatrix<Complex64>, input: &[u32], output: &[u32]) -> Complex64 {
    let m = input.len();
    let sources: Vec<usize> = input
        .iter()
        .enumerate()
        .flat_map(|(i, &k)| std::iter::repeat_n(i, k as usize))
        .collect();
    let n = sources.len();
    let mut sum = Complex64::new(0.0, 0.0);
    for word in (0..n).map(|_| 0..m).multi_cartesian_product() {
        let mut occ = vec![0u32; m];
        for &j in &word {
            occ[j] += 1;
        }
        if occ != output {
            continue;
        }
        sum += word
            .iter()
            .zip(&sources)
            .map(|(&j, &i)| u[(j, i)])
            .product::<Complex64>();
    }
    let norm_out: f64 = output.iter().map(|&k| factorial(k)).product();
    let norm_in: f64 = input.iter().map(|&k| factorial(k)).product();
    sum * (norm_out / norm_in).sqrt()
}

#[test]
fn multiset_dimension_matches_enumeration() {
    for n in 0..=5usize {
        for m in 1..=8usize {
            let count = (0..m).combinations_with_replacement(n).count() as u64;
            assert_eq!(multiset_dimension(n, m).unwrap(), count, "N={n} M={m}");
        }
    }
}

#[test]
fn rank_unrank_is_a_bijection() {
    for n in 0..=6usize {
        for m in 1..=16usize {
            if multiset_dimension(n, m).unwrap() > 60_000 {
                continue;
            }
            let basis = FockBasis::new(n, m).unwrap();
            for i in 0..basis.len() {
                let s = basis.unrank(i).unwrap();
                assert_eq!(basis.rank(&s).unwrap(), i);
                assert_eq!(s.total(), n);
            }
        }
    }
}

#[test]
fn collision_free_count_is_binomial() {
    for n in 0..=5usize {
        for m in 1..=16usize {
            if multiset_dimension(n, m).unwrap() > 60_000 {
                continue;
            }
            let free = enumerate_basis(n, m)
                .unwrap()
                .iter()
                .filter(|s| s.is_collision_free())
                .count() as u64;
            assert_eq!(free, binom(m as u64, n as u64), "N={n} M={m}");
        }
    }
}

#[test]
fn site_counts_sum_to_n() {
    for occ in FockBasis::new(4, 8).unwrap().iter() {
        let s = SiteOccupancy::of(occ).unwrap();
        assert_eq!(s.site_counts.iter().sum::<u32>(), 4);
    }
}

#[test]
fn outcome_probabilities_match_index_expansion() {
    for (k, (n, m)) in [(1usize, 3usize), (2, 3), (2, 4), (3, 4), (3, 6), (2, 6)]
        .into_iter()
        .enumerate()
    {
        let u = haar_random_unitary(m, seed::derive(5, k as u64));
        let basis = FockBasis::new(n, m).unwrap();
        for input in basis.iter().step_by(3) {
            let input_state = FockState::new(input.to_vec()).unwrap();
            for output in basis.iter() {
                let want = amplitude_by_expansion(u.matrix(), input, output).norm_sqr();
                let got = outcome_probability(
                    &u,
                    &input_state,
                    &FockState::new(output.to_vec()).unwrap(),
                )
                .unwrap();
                assert!((got - want).abs() < 1e-10, "{input:?} -> {output:?}");
            }
        }
    }
}

#[test]
fn samples_follow_the_exact_distribution() {
    let u = haar_random_unitary(4, 123);
    let input = FockState::new(vec![1, 1, 0, 0]).unwrap();
    let dist = output_distribution(&u, &input, false).unwrap();
    let shots = 10_000;
    let samples = draw_samples(&dist, shots, 456).unwrap();
    let mut seen: HashMap<Vec<u32>, usize> = HashMap::new();
    for s in &samples {
        *seen.entry(s.occupations().to_vec()).or_default() += 1;
    }
    let mut chi2 = 0.0;
    for (state, p) in &dist.outcomes {
        let expected = p * shots as f64;
        let observed = *seen.get(state.occupations()).unwrap_or(&0) as f64;
        chi2 += (observed - expected).powi(2) / expected;
    }
    let dof = dist.outcomes.len() as f64 - 1.0;
    let p_value = 1.0 - ChiSquared::new(dof).unwrap().cdf(chi2);
    assert!(p_value > 0.01, "chi2 = {chi2}, p = {p_value}");
}

#[test]
fn pair_trio_probabilities_match_enumeration() {
    for m in [4usize, 8, 12] {
        for n in 0..=6usize {
            let basis = FockBasis::new(n, m).unwrap();
            let total = BigInt::from(basis.len());
            let mut tally: HashMap<(usize, usize), i64> = HashMap::new();
            for occ in basis.iter() {
                let s = SiteOccupancy::of(occ).unwrap();
                if s.max_occ <= 3 {
                    *tally.entry((s.k2, s.k3)).or_default() += 1;
                }
            }
            for k3 in 0..=n / 3 {
                for k2 in 0..=(n - 3 * k3) / 2 {
                    let want = BigRational::new(
                        BigInt::from(*tally.get(&(k2, k3)).unwrap_or(&0)),
                        total.clone(),
                    );
                    assert_eq!(p_pairs_trios_exact(n, m, k2, k3).unwrap(), want);
                }
            }
        }
    }
}

#[test]
fn step_survival_equals_uniform_state_average() {
    // Without quartets, the first-step survival of the uniform state is
    // exactly the finite-N model.
    let (n, m, t, tau) = (3usize, 8usize, 0.3, 1.1);
    let basis = FockBasis::new(n, m).unwrap();
    let avg = basis
        .iter()
        .map(|occ| {
            let s = SiteOccupancy::of(occ).unwrap();
            (-((s.k2 + 3 * s.k3) as f64) * t / tau).exp()
        })
        .sum::<f64>()
        / basis.len() as f64;
    let model = p_step_twobody_with(n, m, t, tau, TwoBodyModel::Exact).unwrap();
    assert_eq!(model.excluded_mass, 0.0);
    assert!((model.p - avg).abs() < 1e-14);
}

#[test]
fn exact_and_closed_step_models_agree_at_large_n() {
    for n in [100usize, 120] {
        let table = PairTrioTable::new(n, n * n).unwrap();
        for x in [0.001, 0.01, 0.05, 0.1] {
            let exact = atomboson::lossmodel::p_step_twobody_table(&table, x, 1.0);
            let closed = p_step_twobody_closed(1.0, x, 1.0);
            assert!(((exact - closed) / closed).abs() < 0.01, "N={n} x={x}");
        }
    }
}

#[test]
fn conservative_rate_by_direct_evaluation() {
    let sc = RateScenario::conservative().atomic;
    let n = 10usize;
    let nf = n as f64;
    let m = n * n;
    let total = binom((m + n - 1) as u64, n as u64) as f64;
    let x = sc.t_step / sc.tau_tb;
    let mut num = 0.0;
    let mut mass = 0.0;
    for k3 in 0..=n / 3 {
        for k2 in 0..=(n - 3 * k3) / 2 {
            let r = n - 2 * k2 - 3 * k3;
            let s = (m / 2) as u64;
            let count = 4f64.powi(k3 as i32)
                * binom(s, k3 as u64) as f64
                * 3f64.powi(k2 as i32)
                * binom(s - k3 as u64, k2 as u64) as f64
                * 2f64.powi(r as i32)
                * binom(s - (k2 + k3) as u64, r as u64) as f64;
            let p = count / total;
            mass += p;
            num += p * (-((k2 + 3 * k3) as f64) * x).exp();
        }
    }
    let p_tb = num / mass;
    let p_bg = (-nf * sc.t_step / sc.tau_bg).exp();
    let survival = (p_bg * p_tb).powf(nf * nf);
    let ideal = 1.0 / (std::f64::consts::E * (nf * nf * sc.t_step + sc.t_init + sc.t_det));
    let want = (sc.eta_init * sc.eta_det).powi(n as i32) * survival * ideal;
    let got = r_nisq(&sc, n).unwrap();
    assert!(((got - want) / want).abs() < 1e-10, "{got} vs {want}");
    assert!((r_ideal(&sc, n) - ideal).abs() < 1e-15);
}

#[test]
fn survival_model_matches_exact_simulation_at_small_n() {
    let sc = RateScenario::conservative().atomic;
    let (n, m) = (2usize, 4usize);
    let model = p_survival_with(&sc, n, TwoBodyModel::Exact).unwrap();
    let basis = Arc::new(FockBasis::new(n, m).unwrap());
    let mut sims = Vec::new();
    for r in 0..10 {
        let plan = clements_decompose(&haar_random_unitary(m, seed::derive(31, r))).unwrap();
        let (_, trace) = run_circuit(
            &SimState::uniform(basis.clone()),
            &plan,
            sc.t_step,
            sc.tau_bg,
            sc.tau_tb,
        )
        .unwrap();
        sims.push(trace.p_total);
    }
    let mean = sims.iter().sum::<f64>() / sims.len() as f64;
    assert!(mean >= model - 1e-9, "{mean} < {model}");
    assert!((mean - model).abs() < 1e-3, "{mean} vs {model}");
}

#[test]
fn exactsim_matches_permanents_for_random_circuits() {
    for k in 0..20u64 {
        let m = 2 + (k as usize % 5);
        let n = 1 + (k as usize % 3);
        let u = haar_random_unitary(m, seed::derive(77, k));
        let plan = clements_decompose(&u).unwrap();
        let basis = Arc::new(FockBasis::new(n, m).unwrap());
        let input = basis.state((k as usize * 7) % basis.len());
        let (out, trace) = run_circuit(
            &SimState::basis_state(basis.clone(), &input).unwrap(),
            &plan,
            1.0,
            f64::INFINITY,
            f64::INFINITY,
        )
        .unwrap();
        assert!((trace.p_total - 1.0).abs() < 1e-12);
        for (i, p) in out.probabilities().iter().enumerate() {
            let q = outcome_probability(&u, &input, &basis.state(i)).unwrap();
            assert!((p - q).abs() < 1e-10);
        }
    }
}

#[test]
fn global_phase_leaves_probabilities_unchanged() {
    let u = haar_random_unitary(5, 8);
    let phase = Complex64::from_polar(1.0, 0.77);
    let v = ModeUnitary::new(u.matrix() * phase).unwrap();
    let input = FockState::new(vec![1, 0, 2, 0, 0]).unwrap();
    for out in FockBasis::new(3, 5).unwrap().iter() {
        let out = FockState::new(out.to_vec()).unwrap();
        let a = outcome_probability(&u, &input, &out).unwrap();
        let b = outcome_probability(&v, &input, &out).unwrap();
        assert!((a - b).abs() < 1e-12);
    }
}
