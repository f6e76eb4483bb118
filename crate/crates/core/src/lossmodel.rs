//! Closed-form sampling-rate and survival models.
//!
//! Under a uniform mixture over all `N`-boson configurations of `M` modes
//! (`M/2` sites), the probability of `k2` doubly and `k3` triply occupied sites
//! is
//!
//! ```text
//! P(k2, k3) = 4^k3 C(S, k3) · 3^k2 C(S−k3, k2) · 2^r C(S−k2−k3, r) / C(M+N−1, N)
//! ```
//!
//! with `S = M/2` and `r = N − 2k2 − 3k3` singly occupied sites. A pair
//! survives a step of length `t` with `e^{−t/τ_TB}`, a trio with `e^{−3t/τ_TB}`.
//! For large `N` the pair count is Poisson with mean `3/(2c)`, `c = M/N²`, and
//! the per-step survival tends to `exp[(3/(2c))(e^{−t/τ_TB} − 1)]`.
//!
//! Rates: `R_ideal = e⁻¹ / (c N² t_step + t_init + t_det)`,
//! `R_NISQ = (η_init η_det)^N P_surv R_ideal` with
//! `P_surv = (P_step^BG P_step^TB)^{cN²}`, the photonic rate
//! `e⁻¹ (R₀/N) (η_f η_c^{N²})^N` and the classical rate `2^{−N} / (100 ã N²)`.

use std::f64::consts::E;
use std::ops::RangeInclusive;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Error, Result};
use crate::fock::{binomial_big, multiset_dimension_big};

/// Particle number up to which the finite-`N` pair/trio model is used by
/// default; the large-`N` closed form takes over beyond it.
pub const DEFAULT_EXACT_MAX_N: usize = 40;

/// Crossover search window.
pub const CROSSOVER_RANGE: RangeInclusive<usize> = 2..=200;

fn lifetime<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
}

fn unit_ratio() -> f64 {
    1.0
}

/// Physical parameters of the atomic machine. Lifetimes given as `null` in
/// JSON are infinite (no loss from that channel).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossScenario {
    pub t_step: f64,
    #[serde(deserialize_with = "lifetime")]
    pub tau_bg: f64,
    #[serde(deserialize_with = "lifetime")]
    pub tau_tb: f64,
    pub t_init: f64,
    pub t_det: f64,
    pub eta_init: f64,
    pub eta_det: f64,
    /// `c = M / N²`.
    #[serde(default = "unit_ratio")]
    pub mode_ratio_c: f64,
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && !v.is_nan() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be > 0, got {v}")))
    }
}

fn check_non_negative(name: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "{name} must be finite and >= 0, got {v}"
        )))
    }
}

fn check_probability(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v <= 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "{name} must lie in (0, 1], got {v}"
        )))
    }
}

impl LossScenario {
    pub fn validate(&self) -> Result<()> {
        check_positive("t_step", self.t_step)?;
        if !self.t_step.is_finite() {
            return Err(Error::invalid("t_step must be finite"));
        }
        check_positive("tau_bg", self.tau_bg)?;
        check_positive("tau_tb", self.tau_tb)?;
        check_non_negative("t_init", self.t_init)?;
        check_non_negative("t_det", self.t_det)?;
        check_probability("eta_init", self.eta_init)?;
        check_probability("eta_det", self.eta_det)?;
        check_positive("mode_ratio_c", self.mode_ratio_c)?;
        if !self.mode_ratio_c.is_finite() {
            return Err(Error::invalid("mode_ratio_c must be finite"));
        }
        Ok(())
    }

    /// Circuit steps for `N` bosons, `c N²`.
    pub fn steps(&self, n: usize) -> f64 {
        self.mode_ratio_c * (n * n) as f64
    }

    /// Even mode count used for the site-resolved model at `N` bosons.
    pub fn modes(&self, n: usize) -> usize {
        even_modes(n, self.mode_ratio_c)
    }
}

/// Single-photon source machine.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhotonicScenario {
    /// Source repetition rate (Hz).
    pub r0: f64,
    /// Fixed preparation and detection efficiency.
    pub eta_f: f64,
    /// Transmission per circuit element.
    pub eta_c: f64,
}

impl PhotonicScenario {
    pub fn validate(&self) -> Result<()> {
        check_positive("r0", self.r0)?;
        check_probability("eta_f", self.eta_f)?;
        check_probability("eta_c", self.eta_c)
    }
}

/// Classical simulation by Metropolised independence sampling.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassicalScenario {
    /// Time per elementary operation (s).
    pub a_tilde: f64,
}

impl ClassicalScenario {
    pub fn tianhe2() -> Self {
        Self { a_tilde: 3e-15 }
    }

    pub fn laptop() -> Self {
        Self { a_tilde: 3e-9 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.a_tilde > 0.0 && self.a_tilde.is_finite() {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "a_tilde must be finite and > 0, got {}",
                self.a_tilde
            )))
        }
    }
}

/// The three machines compared in a rate sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateScenario {
    pub atomic: LossScenario,
    pub photonic: PhotonicScenario,
    pub classical: ClassicalScenario,
}

const PRESET_CONSERVATIVE: &str = include_str!("../scenarios/conservative.json");
const PRESET_STATE_OF_THE_ART: &str = include_str!("../scenarios/state_of_the_art.json");
const PRESET_LOSSLESS: &str = include_str!("../scenarios/lossless.json");

/// Names accepted by [`RateScenario::preset`].
pub const PRESET_NAMES: [&str; 3] = ["conservative", "state-of-the-art", "lossless"];

impl RateScenario {
    pub fn from_json(s: &str) -> Result<Self> {
        let sc: Self = serde_json::from_str(s)?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn validate(&self) -> Result<()> {
        self.atomic.validate()?;
        self.photonic.validate()?;
        self.classical.validate()
    }

    pub fn preset(name: &str) -> Option<Self> {
        let text = match name {
            "conservative" => PRESET_CONSERVATIVE,
            "state-of-the-art" => PRESET_STATE_OF_THE_ART,
            "lossless" => PRESET_LOSSLESS,
            _ => return None,
        };
        Some(Self::from_json(text).expect("shipped preset parses"))
    }

    pub fn conservative() -> Self {
        Self::preset("conservative").unwrap()
    }

    pub fn state_of_the_art() -> Self {
        Self::preset("state-of-the-art").unwrap()
    }

    pub fn lossless() -> Self {
        Self::preset("lossless").unwrap()
    }
}

/// `c N²` rounded to the nearest integer and bumped to the next even value.
pub fn even_modes(n: usize, c: f64) -> usize {
    let m = (c * (n * n) as f64).round().max(2.0) as usize;
    m + m % 2
}

fn require_even(m: usize) -> Result<()> {
    if m.is_multiple_of(2) {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "site-resolved model needs an even mode count, got M = {m}"
        )))
    }
}

/// Number of `N`-boson configurations over `M` modes with exactly `k2`
/// doubly and `k3` triply occupied sites and no higher occupancy.
pub fn pair_trio_count(n: usize, m: usize, k2: usize, k3: usize) -> Result<BigUint> {
    require_even(m)?;
    let sites = m / 2;
    let used = 2 * k2 + 3 * k3;
    if used > n || k2 + k3 > sites {
        return Ok(BigUint::zero());
    }
    let singles = n - used;
    let free = sites - k2 - k3;
    if singles > free {
        return Ok(BigUint::zero());
    }
    let count = BigUint::from(4u32).pow(k3 as u32)
        * binomial_big(sites as u64, k3 as u64)
        * BigUint::from(3u32).pow(k2 as u32)
        * binomial_big((sites - k3) as u64, k2 as u64)
        * (BigUint::from(1u32) << singles)
        * binomial_big(free as u64, singles as u64);
    Ok(count)
}

/// `P(k2, k3)` as an exact rational.
pub fn p_pairs_trios_exact(n: usize, m: usize, k2: usize, k3: usize) -> Result<BigRational> {
    let num = pair_trio_count(n, m, k2, k3)?;
    let den = multiset_dimension_big(n, m);
    Ok(BigRational::new(BigInt::from(num), BigInt::from(den)))
}

pub fn p_pairs_trios(n: usize, m: usize, k2: usize, k3: usize) -> Result<f64> {
    Ok(ratio_to_f64(&p_pairs_trios_exact(n, m, k2, k3)?))
}

fn ratio_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// All nonzero `P(k2, k3)` for one `(N, M)`, with the mass left to
/// quartets and higher occupancies.
#[derive(Clone, Debug)]
pub struct PairTrioTable {
    pub n: usize,
    pub m: usize,
    /// `(k2, k3, P(k2, k3))`
    pub entries: Vec<(usize, usize, f64)>,
    /// `Σ P(k2, k3)`, computed exactly before rounding.
    pub included_mass: f64,
    /// `1 − included_mass`, computed exactly before rounding.
    pub excluded_mass: f64,
}

impl PairTrioTable {
    pub fn new(n: usize, m: usize) -> Result<Self> {
        require_even(m)?;
        let den = BigInt::from(multiset_dimension_big(n, m));
        let mut entries = Vec::new();
        let mut total = BigUint::zero();
        for k3 in 0..=n / 3 {
            for k2 in 0..=(n - 3 * k3) / 2 {
                let cnt = pair_trio_count(n, m, k2, k3)?;
                if cnt.is_zero() {
                    continue;
                }
                total += &cnt;
                let p = ratio_to_f64(&BigRational::new(BigInt::from(cnt), den.clone()));
                entries.push((k2, k3, p));
            }
        }
        let included = BigRational::new(BigInt::from(total), den.clone());
        let excluded = BigRational::from_integer(BigInt::from(1)) - &included;
        Ok(Self {
            n,
            m,
            entries,
            included_mass: ratio_to_f64(&included),
            excluded_mass: ratio_to_f64(&excluded),
        })
    }

    pub fn get(&self, k2: usize, k3: usize) -> f64 {
        self.entries
            .iter()
            .find(|e| e.0 == k2 && e.1 == k3)
            .map_or(0.0, |e| e.2)
    }
}

/// Large-`N` limit of `P(k2, ·)`: Poisson with mean `3/(2c)`.
pub fn poisson_pair_limit(c: f64, k2: usize) -> f64 {
    let lambda = 1.5 / c;
    let log_p = k2 as f64 * lambda.ln() - lambda - ln_factorial(k2);
    log_p.exp()
}

fn ln_factorial(k: usize) -> f64 {
    (2..=k).map(|i| (i as f64).ln()).sum()
}

/// Which two-body step model to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TwoBodyModel {
    /// Finite-`N` pair/trio sum.
    Exact,
    /// Large-`N` closed form.
    ClosedForm,
    /// Exact up to and including `max_exact_n`, closed form beyond.
    Auto { max_exact_n: usize },
}

impl Default for TwoBodyModel {
    fn default() -> Self {
        TwoBodyModel::Auto {
            max_exact_n: DEFAULT_EXACT_MAX_N,
        }
    }
}

impl TwoBodyModel {
    fn uses_exact(self, n: usize) -> bool {
        match self {
            TwoBodyModel::Exact => true,
            TwoBodyModel::ClosedForm => false,
            TwoBodyModel::Auto { max_exact_n } => n <= max_exact_n,
        }
    }
}

/// Per-step two-body survival together with the occupancy mass the model
/// leaves out (zero for the closed form, which has no such notion).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepSurvival {
    pub p: f64,
    pub excluded_mass: f64,
    pub exact: bool,
}

/// `exp[(3/(2c))(e^{−t/τ} − 1)]`.
pub fn p_step_twobody_closed(c: f64, t: f64, tau_tb: f64) -> f64 {
    let x = if tau_tb.is_infinite() {
        0.0
    } else {
        t / tau_tb
    };
    (1.5 / c * (-x).exp_m1()).exp()
}

/// Finite-`N` step survival from a precomputed table, normalized by the
/// included mass.
pub fn p_step_twobody_table(table: &PairTrioTable, t: f64, tau_tb: f64) -> f64 {
    let x = if tau_tb.is_infinite() {
        0.0
    } else {
        t / tau_tb
    };
    let lost: f64 = table
        .entries
        .iter()
        .map(|&(k2, k3, p)| p * (-((k2 + 3 * k3) as f64) * x).exp_m1())
        .sum();
    1.0 + lost / table.included_mass
}

pub fn p_step_twobody_with(
    n: usize,
    m: usize,
    t: f64,
    tau_tb: f64,
    model: TwoBodyModel,
) -> Result<StepSurvival> {
    if model.uses_exact(n) {
        let table = PairTrioTable::new(n, m)?;
        Ok(StepSurvival {
            p: p_step_twobody_table(&table, t, tau_tb),
            excluded_mass: table.excluded_mass,
            exact: true,
        })
    } else {
        let c = m as f64 / (n * n).max(1) as f64;
        Ok(StepSurvival {
            p: p_step_twobody_closed(c, t, tau_tb),
            excluded_mass: 0.0,
            exact: false,
        })
    }
}

/// Per-step two-body survival with the default model switch.
pub fn p_step_twobody(n: usize, m: usize, t: f64, tau_tb: f64) -> Result<f64> {
    Ok(p_step_twobody_with(n, m, t, tau_tb, TwoBodyModel::default())?.p)
}

/// `exp(−N t / τ_BG)`.
pub fn p_step_background(n: usize, t: f64, tau_bg: f64) -> f64 {
    if tau_bg.is_infinite() {
        return 1.0;
    }
    (-(n as f64) * t / tau_bg).exp()
}

fn step_twobody_for(scenario: &LossScenario, n: usize, model: TwoBodyModel) -> Result<f64> {
    if model.uses_exact(n) {
        Ok(p_step_twobody_with(
            n,
            scenario.modes(n),
            scenario.t_step,
            scenario.tau_tb,
            model,
        )?
        .p)
    } else {
        Ok(p_step_twobody_closed(
            scenario.mode_ratio_c,
            scenario.t_step,
            scenario.tau_tb,
        ))
    }
}

/// `(P_step^BG · P_step^TB)^{cN²}`.
pub fn p_survival_with(scenario: &LossScenario, n: usize, model: TwoBodyModel) -> Result<f64> {
    let bg = p_step_background(n, scenario.t_step, scenario.tau_bg);
    let tb = step_twobody_for(scenario, n, model)?;
    Ok((bg * tb).powf(scenario.steps(n)))
}

pub fn p_survival(scenario: &LossScenario, n: usize) -> Result<f64> {
    p_survival_with(scenario, n, TwoBodyModel::default())
}

/// Particle number below which two-body loss dominates background loss.
pub fn n_threshold(scenario: &LossScenario) -> f64 {
    3.0 * scenario.tau_bg / (2.0 * scenario.tau_tb)
}

pub fn r_ideal(scenario: &LossScenario, n: usize) -> f64 {
    let t_exec = scenario.steps(n) * scenario.t_step;
    1.0 / (E * (t_exec + scenario.t_init + scenario.t_det))
}

pub fn r_nisq_with(scenario: &LossScenario, n: usize, model: TwoBodyModel) -> Result<f64> {
    let eff = (scenario.eta_init * scenario.eta_det).powi(n as i32);
    Ok(eff * p_survival_with(scenario, n, model)? * r_ideal(scenario, n))
}

pub fn r_nisq(scenario: &LossScenario, n: usize) -> Result<f64> {
    r_nisq_with(scenario, n, TwoBodyModel::default())
}

/// Photonic rate for a circuit of `depth` elements per photon path.
pub fn r_photonic_with_depth(ph: &PhotonicScenario, n: usize, depth: f64) -> f64 {
    let eta = ph.eta_f * ph.eta_c.powf(depth);
    ph.r0 / (E * n as f64) * eta.powi(n as i32)
}

/// Photonic rate for the square `M = N²` circuit.
pub fn r_photonic(ph: &PhotonicScenario, n: usize) -> f64 {
    r_photonic_with_depth(ph, n, (n * n) as f64)
}

pub fn r_classical(cl: &ClassicalScenario, n: usize) -> f64 {
    let n_f = n as f64;
    (-n_f).exp2() / (100.0 * cl.a_tilde * n_f * n_f)
}

/// Result of a quantum-advantage search.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Crossover {
    /// Smallest `N` at which the atomic rate exceeds the classical one.
    At(usize),
    /// No crossing in the searched window.
    NotInRange { max_n: usize },
}

impl Crossover {
    pub fn n(self) -> Option<usize> {
        match self {
            Crossover::At(n) => Some(n),
            Crossover::NotInRange { .. } => None,
        }
    }

    /// True if `self` crosses strictly later than `other`; a missing
    /// crossing counts as later than any found one.
    pub fn is_later_than(self, other: Crossover) -> bool {
        match (self, other) {
            (Crossover::At(a), Crossover::At(b)) => a > b,
            (Crossover::NotInRange { .. }, Crossover::At(_)) => true,
            _ => false,
        }
    }
}

pub fn crossover_with(
    scenario: &LossScenario,
    classical: &ClassicalScenario,
    range: RangeInclusive<usize>,
    model: TwoBodyModel,
) -> Result<Crossover> {
    let max_n = *range.end();
    for n in range {
        if r_nisq_with(scenario, n, model)? > r_classical(classical, n) {
            return Ok(Crossover::At(n));
        }
    }
    Ok(Crossover::NotInRange { max_n })
}

pub fn crossover(scenario: &LossScenario, classical: &ClassicalScenario) -> Result<Crossover> {
    crossover_with(
        scenario,
        classical,
        CROSSOVER_RANGE,
        TwoBodyModel::default(),
    )
}

/// One row of a rate sweep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateRow {
    pub n: usize,
    pub r_atomic: f64,
    pub r_photonic: f64,
    pub r_classical: f64,
}

/// Rates for every `N` in `range`, in ascending `N`.
pub fn rate_curve(
    sc: &RateScenario,
    range: RangeInclusive<usize>,
    model: TwoBodyModel,
) -> Result<Vec<RateRow>> {
    range
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|n| {
            Ok(RateRow {
                n,
                r_atomic: r_nisq_with(&sc.atomic, n, model)?,
                r_photonic: r_photonic(&sc.photonic, n),
                r_classical: r_classical(&sc.classical, n),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn pair_probabilities_small() {
        assert_eq!(p_pairs_trios(2, 2, 1, 0).unwrap(), 1.0);
        assert!((p_pairs_trios(2, 4, 1, 0).unwrap() - 0.6).abs() < 1e-15);
        assert!((p_pairs_trios(2, 4, 0, 0).unwrap() - 0.4).abs() < 1e-15);
        assert_eq!(p_pairs_trios(2, 4, 2, 0).unwrap(), 0.0);
        assert!(p_pairs_trios(2, 3, 0, 0).is_err());
    }

    #[test]
    fn poisson_limit() {
        assert!((poisson_pair_limit(1.0, 0) - (-1.5f64).exp()).abs() < 1e-15);
        assert!((poisson_pair_limit(1.0, 0) - 0.22313).abs() < 1e-5);
        let total: f64 = (0..60).map(|k| poisson_pair_limit(0.7, k)).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn twobody_step_limits() {
        assert_eq!(p_step_twobody(10, 100, 0.0, 0.4).unwrap(), 1.0);
        assert_eq!(p_step_twobody_closed(1.0, 0.0, 0.4), 1.0);
        let far = p_step_twobody_closed(1.0, 1e9, 1.0);
        assert!((far - (-1.5f64).exp()).abs() < 1e-15);
        let small = p_step_twobody_closed(1.0, 1e-3, 1.0);
        assert!(rel(small, (-1.5e-3f64).exp()) < 1e-3);
        assert_eq!(p_step_twobody_closed(1.0, 1.0, f64::INFINITY), 1.0);
    }

    #[test]
    fn background_step() {
        assert_eq!(p_step_background(5, 0.0, 1.0), 1.0);
        assert!((p_step_background(1, 2.0, 2.0) - (-1.0f64).exp()).abs() < 1e-15);
        let v = p_step_background(37, 33e-6, 360.0);
        assert!(rel(v, (-3.3916666666666666e-6f64).exp()) < 1e-15);
    }

    #[test]
    fn thresholds() {
        let mut sc = RateScenario::state_of_the_art().atomic;
        assert!((n_threshold(&sc) - 1350.0).abs() < 1e-9);
        sc.tau_tb = 0.04;
        assert!((n_threshold(&sc) - 13500.0).abs() < 1e-8);
        let before = n_threshold(&sc);
        sc.tau_bg *= 2.0;
        assert!((n_threshold(&sc) - 2.0 * before).abs() < 1e-8);
    }

    #[test]
    fn ideal_rate() {
        let mut sc = RateScenario::state_of_the_art().atomic;
        assert!(rel(r_ideal(&sc, 37), 0.570) < 2e-3);
        sc.t_init = 0.0;
        sc.t_det = 0.0;
        assert!(rel(r_ideal(&sc, 1), 1.0 / (E * sc.t_step)) < 1e-15);
        assert!((2..100).all(|n| r_ideal(&sc, n + 1) < r_ideal(&sc, n)));
    }

    #[test]
    fn nisq_rate_examples() {
        let sota = RateScenario::state_of_the_art().atomic;
        let r = r_nisq(&sota, 37).unwrap();
        assert!((r - 0.23).abs() < 0.005, "r_nisq(37) = {r}");
        let lossless = RateScenario::lossless().atomic;
        for n in [1, 5, 30] {
            assert!(rel(r_nisq(&lossless, n).unwrap(), r_ideal(&lossless, n)) < 1e-15);
        }
    }

    #[test]
    fn survival_first_factor() {
        let sota = RateScenario::state_of_the_art().atomic;
        let n = 37.0f64;
        let bg = (-n.powi(3) * sota.t_step / sota.tau_bg).exp();
        assert!((bg - 0.9954).abs() < 5e-5);
    }

    #[test]
    fn survival_closed_form_identity() {
        let sota = RateScenario::state_of_the_art().atomic;
        for n in [10usize, 37, 100] {
            let nf = n as f64;
            let p = p_survival_with(&sota, n, TwoBodyModel::ClosedForm).unwrap();
            let direct = (-nf.powi(3) * sota.t_step / sota.tau_bg
                + nf * nf * 1.5 * ((-sota.t_step / sota.tau_tb).exp() - 1.0))
                .exp();
            assert!(rel(p, direct) < 1e-12);
        }
        let mut lossless = sota.clone();
        lossless.tau_bg = f64::INFINITY;
        lossless.tau_tb = f64::INFINITY;
        assert_eq!(p_survival(&lossless, 20).unwrap(), 1.0);
    }

    #[test]
    fn classical_rates() {
        let r = r_classical(&ClassicalScenario::tianhe2(), 37);
        assert!(rel(r, 0.0177) < 2e-3, "{r}");
        let r = r_classical(&ClassicalScenario::laptop(), 20);
        assert!(rel(r, 7.95e-3) < 1e-3, "{r}");
        let cl = ClassicalScenario::tianhe2();
        let ratio = r_classical(&cl, 11) / r_classical(&cl, 10);
        assert!((ratio - 0.5 * 100.0 / 121.0).abs() < 1e-12);
    }

    #[test]
    fn photonic_rates() {
        let ph = PhotonicScenario {
            r0: 1e6,
            eta_f: 1.0,
            eta_c: 1.0,
        };
        assert!(rel(r_photonic(&ph, 4), 1e6 / (E * 4.0)) < 1e-15);
        let cons = RateScenario::conservative().photonic;
        let sota = RateScenario::state_of_the_art().photonic;
        assert!((1..60).all(|n| r_photonic(&sota, n) > r_photonic(&cons, n)));
    }

    #[test]
    fn crossover_edges() {
        let sota = RateScenario::state_of_the_art().atomic;
        let never = ClassicalScenario { a_tilde: 1e-300 };
        assert_eq!(
            crossover(&sota, &never).unwrap(),
            Crossover::NotInRange { max_n: 200 }
        );
        let lossless = RateScenario::lossless().atomic;
        let a = crossover(&lossless, &ClassicalScenario::tianhe2()).unwrap();
        let b = crossover(&sota, &ClassicalScenario::tianhe2()).unwrap();
        assert!(b.is_later_than(a));
    }

    #[test]
    fn even_mode_rounding() {
        assert_eq!(even_modes(27, 1.0), 730);
        assert_eq!(even_modes(4, 1.0), 16);
        assert_eq!(even_modes(1, 1.0), 2);
    }

    #[test]
    fn scenario_parsing() {
        let sc = RateScenario::lossless();
        assert!(sc.atomic.tau_bg.is_infinite());
        let text = serde_json::to_string(&sc).unwrap();
        assert!(text.contains("\"tau_bg\":null"));
        assert_eq!(RateScenario::from_json(&text).unwrap(), sc);
        let bad = text.replace("\"eta_det\":1.0", "\"eta_det\":1.5");
        let err = RateScenario::from_json(&bad).unwrap_err().to_string();
        assert!(err.contains("eta_det"), "{err}");
        let err = RateScenario::from_json("{\"atomic\": {}}")
            .unwrap_err()
            .to_string();
        assert!(err.contains("t_step") && err.contains("line"), "{err}");
    }
}
