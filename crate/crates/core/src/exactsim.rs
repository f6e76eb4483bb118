//! Exact state-vector propagation of the stepped, lossy circuit.
//!
//! The state lives in the canonical `N`-particle Fock basis. Each step first
//! applies the non-unitary decay `V(t) = exp(−H t)` with
//! `H = N/(2τ_BG) + Σ_s n_s(n_s − 1)/(4τ_TB)` (sum over sites, `n_s` the site
//! occupancy), then the layer's couplings. The norm lost in step `j`, as a
//! ratio to the norm before it, is the per-step survival `p_j`.
//!
//! A coupling on modes `(a, a+1)` only mixes basis states that agree outside
//! that pair and share `k = n_a + n_{a+1}`. These fibers are cached per pair,
//! and the coupling acts on each fiber through its `(k+1)`-dimensional
//! symmetric-power representation.

use std::sync::Arc;

use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fock::{FockBasis, FockState, SiteOccupancy, DEFAULT_BASIS_CAP};
use crate::interferometer::validate_layer;
use crate::interferometer::{clements_decompose, haar_random_unitary, CircuitPlan, LocalCoupling};
use crate::lossmodel::{p_step_twobody_with, TwoBodyModel};
use crate::seed;

/// Amplitude vector over a shared Fock basis.
#[derive(Clone, Debug)]
pub struct SimState {
    basis: Arc<FockBasis>,
    amplitudes: Vec<Complex64>,
}

impl SimState {
    pub fn zero(basis: Arc<FockBasis>) -> Self {
        let amplitudes = vec![Complex64::new(0.0, 0.0); basis.len()];
        Self { basis, amplitudes }
    }

    pub fn basis_state(basis: Arc<FockBasis>, state: &FockState) -> Result<Self> {
        let idx = basis.rank(state)?;
        let mut s = Self::zero(basis);
        s.amplitudes[idx] = Complex64::new(1.0, 0.0);
        Ok(s)
    }

    /// Equal real amplitudes over the whole basis.
    pub fn uniform(basis: Arc<FockBasis>) -> Self {
        let a = 1.0 / (basis.len() as f64).sqrt();
        let amplitudes = vec![Complex64::new(a, 0.0); basis.len()];
        Self { basis, amplitudes }
    }

    /// Equal moduli with independent uniform phases.
    pub fn uniform_random_phases(basis: Arc<FockBasis>, seed: u64) -> Self {
        let a = 1.0 / (basis.len() as f64).sqrt();
        let mut rng = seed::rng(seed);
        let amplitudes = (0..basis.len())
            .map(|_| Complex64::from_polar(a, rng.random_range(0.0..std::f64::consts::TAU)))
            .collect();
        Self { basis, amplitudes }
    }

    pub fn from_amplitudes(basis: Arc<FockBasis>, amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != basis.len() {
            return Err(Error::invalid(format!(
                "{} amplitudes for a basis of dimension {}",
                amplitudes.len(),
                basis.len()
            )));
        }
        Ok(Self { basis, amplitudes })
    }

    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }

    pub fn n(&self) -> usize {
        self.basis.particles()
    }

    pub fn m(&self) -> usize {
        self.basis.modes()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// `|amplitude|²` per basis state.
    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }
}

/// Per-basis-state amplitude decay rate.
#[derive(Clone, Debug, PartialEq)]
pub struct DecayDiagonal {
    pub rates: Vec<f64>,
}

fn inverse(tau: f64) -> f64 {
    if tau.is_infinite() {
        0.0
    } else {
        1.0 / tau
    }
}

/// Decay rates over `basis`. Without two-body loss the rates do not depend
/// on the site map, so any mode count is accepted.
pub fn build_decay_diagonal(basis: &FockBasis, tau_bg: f64, tau_tb: f64) -> Result<DecayDiagonal> {
    let background = basis.particles() as f64 * inverse(tau_bg) / 2.0;
    if tau_tb.is_infinite() {
        return Ok(DecayDiagonal {
            rates: vec![background; basis.len()],
        });
    }
    if !basis.modes().is_multiple_of(2) {
        return Err(Error::invalid(format!(
            "decay model needs an even mode count, got M = {}",
            basis.modes()
        )));
    }
    let pair = inverse(tau_tb) / 4.0;
    let rates = basis
        .iter()
        .map(|occ| {
            let sites = SiteOccupancy::of(occ)?;
            let collisions: u64 = sites
                .site_counts
                .iter()
                .map(|&c| c as u64 * (c as u64).saturating_sub(1))
                .sum();
            Ok(background + pair * collisions as f64)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DecayDiagonal { rates })
}

/// Builds the basis within the default cap and its decay diagonal.
pub fn decay_diagonal(n: usize, m: usize, tau_bg: f64, tau_tb: f64) -> Result<DecayDiagonal> {
    build_decay_diagonal(&FockBasis::new(n, m)?, tau_bg, tau_tb)
}

pub fn apply_decay_in_place(state: &mut SimState, diag: &DecayDiagonal, t: f64) {
    for (a, &r) in state.amplitudes.iter_mut().zip(&diag.rates) {
        *a *= (-r * t).exp();
    }
}

pub fn apply_decay(state: &SimState, diag: &DecayDiagonal, t: f64) -> SimState {
    let mut out = state.clone();
    apply_decay_in_place(&mut out, diag, t);
    out
}

fn factorials(n: usize) -> Vec<f64> {
    let mut f = vec![1.0; n + 1];
    for i in 1..=n {
        f[i] = f[i - 1] * i as f64;
    }
    f
}

/// Action of a 2×2 mode unitary on the `k`-particle states
/// `|p, k−p⟩`, `p = 0..=k`. Column `p` is the image of `|p, k−p⟩`.
pub fn fock_block(u: &Matrix2<Complex64>, k: usize) -> DMatrix<Complex64> {
    let f = factorials(k);
    let binom = |n: usize, r: usize| f[n] / (f[r] * f[n - r]);
    let (u00, u01, u10, u11) = (u[(0, 0)], u[(0, 1)], u[(1, 0)], u[(1, 1)]);
    DMatrix::from_fn(k + 1, k + 1, |r, p| {
        let q = k - p;
        let lo = r.saturating_sub(q);
        let hi = p.min(r);
        let mut sum = Complex64::new(0.0, 0.0);
        for i in lo..=hi {
            let j = r - i;
            sum += u00.powu(i as u32)
                * u10.powu((p - i) as u32)
                * u01.powu(j as u32)
                * u11.powu((q - j) as u32)
                * (binom(p, i) * binom(q, j));
        }
        sum * (f[r] * f[k - r] / (f[p] * f[q])).sqrt()
    })
}

#[derive(Clone, Debug)]
struct Fiber {
    /// Basis index of `|p, k−p⟩` on the pair, for `p = 0..=k`.
    members: Vec<usize>,
}

/// Cached pair fibers for one basis.
#[derive(Clone, Debug)]
pub struct Propagator {
    basis: Arc<FockBasis>,
    fibers: Vec<Vec<Fiber>>,
}

impl Propagator {
    pub fn new(basis: Arc<FockBasis>) -> Self {
        let m = basis.modes();
        let fibers = (0..m.saturating_sub(1))
            .map(|a| {
                let mut out = Vec::new();
                let mut scratch = Vec::with_capacity(m);
                for occ in basis.iter() {
                    if occ[a + 1] != 0 || occ[a] == 0 {
                        continue;
                    }
                    let k = occ[a] as usize;
                    scratch.clear();
                    scratch.extend_from_slice(occ);
                    let members = (0..=k)
                        .map(|p| {
                            scratch[a] = p as u32;
                            scratch[a + 1] = (k - p) as u32;
                            basis
                                .rank_occupations(&scratch)
                                .expect("fiber member lies in the basis")
                        })
                        .collect();
                    out.push(Fiber { members });
                }
                out
            })
            .collect();
        Self { basis, fibers }
    }

    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }

    fn check_state(&self, state: &SimState) -> Result<()> {
        if !Arc::ptr_eq(&self.basis, &state.basis)
            && (self.basis.particles() != state.n() || self.basis.modes() != state.m())
        {
            return Err(Error::invalid(format!(
                "state has N = {}, M = {} but the propagator was built for N = {}, M = {}",
                state.n(),
                state.m(),
                self.basis.particles(),
                self.basis.modes()
            )));
        }
        Ok(())
    }

    pub fn apply_coupling(&self, state: &mut SimState, c: &LocalCoupling) -> Result<()> {
        self.check_state(state)?;
        let m = self.basis.modes();
        if c.mode + 1 >= m {
            return Err(Error::invalid(format!(
                "coupling on modes ({}, {}) outside M = {m}",
                c.mode,
                c.mode + 1
            )));
        }
        let u = c.matrix();
        let blocks: Vec<DMatrix<Complex64>> = (0..=self.basis.particles())
            .map(|k| fock_block(&u, k))
            .collect();
        let mut buf = Vec::new();
        for fiber in &self.fibers[c.mode] {
            let block = &blocks[fiber.members.len() - 1];
            buf.clear();
            buf.extend(fiber.members.iter().map(|&i| state.amplitudes[i]));
            for (r, &dst) in fiber.members.iter().enumerate() {
                let mut acc = Complex64::new(0.0, 0.0);
                for (p, &v) in buf.iter().enumerate() {
                    acc += block[(r, p)] * v;
                }
                state.amplitudes[dst] = acc;
            }
        }
        Ok(())
    }

    pub fn apply_layer(&self, state: &mut SimState, layer: &[LocalCoupling]) -> Result<()> {
        validate_layer(self.basis.modes(), layer)?;
        for c in layer {
            self.apply_coupling(state, c)?;
        }
        Ok(())
    }

    /// Multiplies each mode creation operator by `e^{i φ_mode}`.
    pub fn apply_phases(&self, state: &mut SimState, phases: &[f64]) -> Result<()> {
        self.check_state(state)?;
        if phases.len() != self.basis.modes() {
            return Err(Error::invalid(format!(
                "{} phases for M = {}",
                phases.len(),
                self.basis.modes()
            )));
        }
        for (i, occ) in self.basis.iter().enumerate() {
            let angle: f64 = occ.iter().zip(phases).map(|(&n, &p)| n as f64 * p).sum();
            state.amplitudes[i] *= Complex64::from_polar(1.0, angle);
        }
        Ok(())
    }

    /// Runs every layer of `plan` with decay before each, then the output
    /// phases.
    pub fn run(
        &self,
        state: &mut SimState,
        plan: &CircuitPlan,
        t_step: f64,
        diag: &DecayDiagonal,
    ) -> Result<SurvivalTrace> {
        self.check_state(state)?;
        if plan.m != state.m() {
            return Err(Error::invalid(format!(
                "plan has M = {} but the state has M = {}",
                plan.m,
                state.m()
            )));
        }
        if diag.rates.len() != state.amplitudes.len() {
            return Err(Error::invalid("decay diagonal does not match the basis"));
        }
        let start = state.norm_sqr();
        let mut before = start;
        let mut p_j = Vec::with_capacity(plan.layers.len());
        for layer in &plan.layers {
            apply_decay_in_place(state, diag, t_step);
            self.apply_layer(state, layer)?;
            let after = state.norm_sqr();
            p_j.push(if before > 0.0 { after / before } else { 0.0 });
            before = after;
        }
        self.apply_phases(state, &plan.output_phases)?;
        Ok(SurvivalTrace {
            steps: p_j.len(),
            p_j,
            p_total: if start > 0.0 { before / start } else { 0.0 },
        })
    }
}

pub fn apply_layer(state: &SimState, layer: &[LocalCoupling]) -> Result<SimState> {
    let prop = Propagator::new(state.basis.clone());
    let mut out = state.clone();
    prop.apply_layer(&mut out, layer)?;
    Ok(out)
}

/// Per-step survival ratios of one run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SurvivalTrace {
    pub p_j: Vec<f64>,
    pub p_total: f64,
    pub steps: usize,
}

pub fn run_circuit(
    initial: &SimState,
    plan: &CircuitPlan,
    t_step: f64,
    tau_bg: f64,
    tau_tb: f64,
) -> Result<(SimState, SurvivalTrace)> {
    if plan.m != initial.m() {
        return Err(Error::invalid(format!(
            "plan has M = {} but the state has M = {}",
            plan.m,
            initial.m()
        )));
    }
    plan.validate()?;
    let prop = Propagator::new(initial.basis.clone());
    let diag = build_decay_diagonal(&initial.basis, tau_bg, tau_tb)?;
    let mut state = initial.clone();
    let trace = prop.run(&mut state, plan, t_step, &diag)?;
    Ok((state, trace))
}

/// Phases carried by the uniform initial state.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum InitialPhases {
    #[default]
    Zero,
    Random,
}

#[derive(Clone, Debug)]
pub struct BenchmarkConfig {
    pub n: usize,
    pub m: usize,
    /// `τ_TB / t_exec`, with `t_exec = M · t_step`.
    pub tau_tb_over_texec: f64,
    pub realizations: usize,
    pub seed: u64,
    pub phases: InitialPhases,
    pub basis_cap: u64,
}

impl BenchmarkConfig {
    pub fn new(n: usize, m: usize, tau_tb_over_texec: f64, realizations: usize, seed: u64) -> Self {
        Self {
            n,
            m,
            tau_tb_over_texec,
            realizations,
            seed,
            phases: InitialPhases::Zero,
            basis_cap: DEFAULT_BASIS_CAP,
        }
    }
}

/// Simulated survival next to the finite-`N` model prediction.
#[derive(Clone, Debug, PartialEq)]
pub struct Benchmark {
    pub n: usize,
    pub m: usize,
    pub t_step: f64,
    pub tau_tb: f64,
    pub traces: Vec<SurvivalTrace>,
    pub mean_p_j: Vec<f64>,
    pub mean_p_total: f64,
    /// Standard error of `mean_p_total` across realizations.
    pub sem_p_total: f64,
    pub model_p_step: f64,
    pub model_p_step_pow_m: f64,
}

#[derive(Serialize)]
struct BenchmarkSummary {
    mean_p_total: f64,
    model_p_step: f64,
    #[serde(rename = "model_p_step_pow_M")]
    model_p_step_pow_m: f64,
}

impl Benchmark {
    /// `realization,step,p_j` rows, steps counted from 1.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("realization,step,p_j\n");
        for (r, t) in self.traces.iter().enumerate() {
            for (j, p) in t.p_j.iter().enumerate() {
                out.push_str(&format!("{r},{},{p:?}\n", j + 1));
            }
        }
        out
    }

    pub fn summary_json(&self) -> String {
        serde_json::to_string_pretty(&BenchmarkSummary {
            mean_p_total: self.mean_p_total,
            model_p_step: self.model_p_step,
            model_p_step_pow_m: self.model_p_step_pow_m,
        })
        .expect("summary serializes")
    }
}

/// Runs `realizations` Haar-random circuits from the uniform initial state
/// with `t_step = 1`, `τ_BG = ∞` and `τ_TB = ratio · M`. Realization `r`
/// draws its unitary from `seed::derive(seed, r)` and, with random phases,
/// its initial phases from `seed::derive(seed::derive(seed, r), 0)`.
pub fn benchmark_vs_model(cfg: &BenchmarkConfig) -> Result<Benchmark> {
    if cfg.realizations == 0 {
        return Err(Error::invalid("realizations must be >= 1"));
    }
    if !(cfg.tau_tb_over_texec > 0.0) {
        return Err(Error::invalid("tau_tb / t_exec must be > 0"));
    }
    let basis = Arc::new(FockBasis::with_cap(cfg.n, cfg.m, cfg.basis_cap)?);
    let t_step = 1.0;
    let tau_tb = cfg.tau_tb_over_texec * cfg.m as f64 * t_step;
    let diag = build_decay_diagonal(&basis, f64::INFINITY, tau_tb)?;
    let prop = Propagator::new(basis.clone());

    let traces = (0..cfg.realizations)
        .into_par_iter()
        .map(|r| {
            let sub = seed::derive(cfg.seed, r as u64);
            let u = haar_random_unitary(cfg.m, sub);
            let plan = clements_decompose(&u)?;
            let mut state = match cfg.phases {
                InitialPhases::Zero => SimState::uniform(basis.clone()),
                InitialPhases::Random => {
                    SimState::uniform_random_phases(basis.clone(), seed::derive(sub, 0))
                }
            };
            prop.run(&mut state, &plan, t_step, &diag)
        })
        .collect::<Result<Vec<_>>>()?;

    let k = traces.len() as f64;
    let steps = traces[0].steps;
    let mean_p_j = (0..steps)
        .map(|j| traces.iter().map(|t| t.p_j[j]).sum::<f64>() / k)
        .collect();
    let mean_p_total = traces.iter().map(|t| t.p_total).sum::<f64>() / k;
    let sem_p_total = if traces.len() > 1 {
        let var = traces
            .iter()
            .map(|t| (t.p_total - mean_p_total).powi(2))
            .sum::<f64>()
            / (k - 1.0);
        (var / k).sqrt()
    } else {
        0.0
    };
    let model_p_step = if cfg.m.is_multiple_of(2) {
        p_step_twobody_with(cfg.n, cfg.m, t_step, tau_tb, TwoBodyModel::Exact)?.p
    } else {
        return Err(Error::invalid("benchmark needs an even mode count"));
    };
    Ok(Benchmark {
        n: cfg.n,
        m: cfg.m,
        t_step,
        tau_tb,
        mean_p_j,
        mean_p_total,
        sem_p_total,
        model_p_step,
        model_p_step_pow_m: model_p_step.powi(steps as i32),
        traces,
    })
}
