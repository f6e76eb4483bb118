//! Two-atom Hong-Ou-Mandel experiment: analytic outcome model, forward Monte
//! Carlo and extraction of the bunching probability from outcome counts.
//!
//! Each trial addresses two atoms, loses each one independently with
//! probability `1 − S`, lets two survivors bunch with `P_bunch` and removes a
//! bunched pair by light-induced collisions, leaving zero atoms with
//! `P_LIC0` and one otherwise. Unbunched pairs are detected as two atoms.
//! Trials failing addressing or position reconstruction are dropped.

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

/// Trials per independently seeded Monte Carlo chunk.
pub const MC_CHUNK: u64 = 1 << 16;
pub const BOOTSTRAP_RESAMPLES: usize = 200;
pub const FIT_TOLERANCE: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HomParams {
    pub survival_s: f64,
    pub p_lic0: f64,
    /// Probability that the two atoms are indistinguishable.
    pub gamma: f64,
    pub p_addr: f64,
    pub p_rec: f64,
}

impl HomParams {
    /// Perfect addressing and reconstruction, `γ = 2 P_bunch − 1`.
    pub fn with_bunching(survival_s: f64, p_bunch: f64, p_lic0: f64) -> Self {
        Self {
            survival_s,
            p_lic0,
            gamma: 2.0 * p_bunch - 1.0,
            p_addr: 1.0,
            p_rec: 1.0,
        }
    }

    pub fn p_bunch(&self) -> f64 {
        self.gamma + (1.0 - self.gamma) / 2.0
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("survival_s", self.survival_s),
            ("p_lic0", self.p_lic0),
            ("gamma", self.gamma),
            ("p_addr", self.p_addr),
            ("p_rec", self.p_rec),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(format!(
                    "{name} must lie in [0, 1], got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Zero/one/two-atom outcome statistics over kept trials.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HomOutcomes {
    pub trials_kept: u64,
    pub p0: f64,
    pub p1: f64,
    pub p2: f64,
    pub counts: [u64; 3],
}

impl HomOutcomes {
    pub fn from_counts(counts: [u64; 3]) -> Result<Self> {
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Err(Error::NoKeptTrials);
        }
        let t = total as f64;
        Ok(Self {
            trials_kept: total,
            p0: counts[0] as f64 / t,
            p1: counts[1] as f64 / t,
            p2: counts[2] as f64 / t,
            counts,
        })
    }

    pub fn probabilities(&self) -> [f64; 3] {
        [self.p0, self.p1, self.p2]
    }
}

/// Raw measured counts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasuredCounts {
    pub n0: u64,
    pub n1: u64,
    pub n2: u64,
}

impl MeasuredCounts {
    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn counts(&self) -> [u64; 3] {
        [self.n0, self.n1, self.n2]
    }

    pub fn outcomes(&self) -> Result<HomOutcomes> {
        HomOutcomes::from_counts(self.counts())
    }
}

/// Counts matching `P₂ = 19 %` over 200 trials.
pub const SAMPLE_DATA: &str = include_str!("../scenarios/hom_sample.json");

pub fn hom_analytic(params: &HomParams) -> Result<HomOutcomes> {
    params.validate()?;
    let s = params.survival_s;
    let pb = params.p_bunch();
    let l = params.p_lic0;
    Ok(HomOutcomes {
        trials_kept: 0,
        p0: s * s * pb * l + (1.0 - s) * (1.0 - s),
        p1: s * s * pb * (1.0 - l) + 2.0 * s * (1.0 - s),
        p2: s * s * (1.0 - pb),
        counts: [0; 3],
    })
}

/// What a failed position reconstruction does to a trial.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ReconstructionFailure {
    /// The trial is dropped.
    #[default]
    Discard,
    /// Two atoms are read as one; other outcomes are unaffected.
    Misclassify,
}

fn trial<R: Rng>(
    rng: &mut R,
    p: &HomParams,
    pb: f64,
    mode: ReconstructionFailure,
) -> Option<usize> {
    let addressed = rng.random::<f64>() < p.p_addr;
    let a = rng.random::<f64>() < p.survival_s;
    let b = rng.random::<f64>() < p.survival_s;
    let bunch = rng.random::<f64>() < pb;
    let lic0 = rng.random::<f64>() < p.p_lic0;
    let rec = rng.random::<f64>() < p.p_rec;
    if !addressed {
        return None;
    }
    let detected = match (a, b) {
        (true, true) if bunch => usize::from(!lic0),
        (true, true) => 2,
        (true, false) | (false, true) => 1,
        (false, false) => 0,
    };
    match (rec, mode) {
        (true, _) => Some(detected),
        (false, ReconstructionFailure::Discard) => None,
        (false, ReconstructionFailure::Misclassify) => Some(detected.min(1)),
    }
}

/// Forward Monte Carlo. Trials are split into chunks of [`MC_CHUNK`];
/// chunk `c` draws from `seed::derive(seed, c)`.
pub fn hom_monte_carlo_with(
    params: &HomParams,
    trials: u64,
    seed: u64,
    mode: ReconstructionFailure,
) -> Result<HomOutcomes> {
    params.validate()?;
    if trials == 0 {
        return Err(Error::invalid("trials must be >= 1"));
    }
    let pb = params.p_bunch();
    let chunks = trials.div_ceil(MC_CHUNK);
    let counts = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let len = MC_CHUNK.min(trials - c * MC_CHUNK);
            let mut rng = seed::rng(seed::derive(seed, c));
            let mut counts = [0u64; 3];
            for _ in 0..len {
                if let Some(k) = trial(&mut rng, params, pb, mode) {
                    counts[k] += 1;
                }
            }
            counts
        })
        .reduce(|| [0; 3], |a, b| [a[0] + b[0], a[1] + b[1], a[2] + b[2]]);
    HomOutcomes::from_counts(counts)
}

pub fn hom_monte_carlo(params: &HomParams, trials: u64, seed: u64) -> Result<HomOutcomes> {
    hom_monte_carlo_with(params, trials, seed, ReconstructionFailure::Discard)
}

/// Monte Carlo events drawn once and replayed for any `P_bunch`: the
/// bunching draws of two-survivor trials are kept sorted, so the outcome
/// counts at a given `P_bunch` follow from a binary search.
#[derive(Clone, Debug)]
pub struct EventSet {
    zero: u64,
    one: u64,
    /// Sorted bunching draws of trials where both atoms survived.
    pair_draws: Vec<f64>,
    /// `lic_prefix[i]`: pairs among the first `i` that leave zero atoms.
    lic_prefix: Vec<u64>,
}

/// Zero-survivor count, one-survivor count and `(bunching draw, LIC0)` pairs.
type ChunkEvents = (u64, u64, Vec<(f64, bool)>);

impl EventSet {
    pub fn generate(survival_s: f64, p_lic0: f64, trials: u64, seed: u64) -> Result<Self> {
        if trials == 0 {
            return Err(Error::invalid("trials must be >= 1"));
        }
        let chunks = trials.div_ceil(MC_CHUNK);
        let parts: Vec<ChunkEvents> = (0..chunks)
            .into_par_iter()
            .map(|c| {
                let len = MC_CHUNK.min(trials - c * MC_CHUNK);
                let mut rng = seed::rng(seed::derive(seed, c));
                let (mut zero, mut one, mut pairs) = (0, 0, Vec::new());
                for _ in 0..len {
                    let a = rng.random::<f64>() < survival_s;
                    let b = rng.random::<f64>() < survival_s;
                    let u = rng.random::<f64>();
                    let lic0 = rng.random::<f64>() < p_lic0;
                    match (a, b) {
                        (true, true) => pairs.push((u, lic0)),
                        (false, false) => zero += 1,
                        _ => one += 1,
                    }
                }
                (zero, one, pairs)
            })
            .collect();
        let mut zero = 0;
        let mut one = 0;
        let mut pairs = Vec::new();
        for (z, o, p) in parts {
            zero += z;
            one += o;
            pairs.extend(p);
        }
        pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut lic_prefix = Vec::with_capacity(pairs.len() + 1);
        lic_prefix.push(0);
        let mut acc = 0;
        for &(_, lic) in &pairs {
            acc += u64::from(lic);
            lic_prefix.push(acc);
        }
        Ok(Self {
            zero,
            one,
            pair_draws: pairs.into_iter().map(|p| p.0).collect(),
            lic_prefix,
        })
    }

    pub fn trials(&self) -> u64 {
        self.zero + self.one + self.pair_draws.len() as u64
    }

    pub fn counts(&self, p_bunch: f64) -> [u64; 3] {
        let bunched = self.pair_draws.partition_point(|&u| u < p_bunch);
        let lic = self.lic_prefix[bunched];
        [
            self.zero + lic,
            self.one + (bunched as u64 - lic),
            (self.pair_draws.len() - bunched) as u64,
        ]
    }

    pub fn probabilities(&self, p_bunch: f64) -> [f64; 3] {
        let t = self.trials() as f64;
        self.counts(p_bunch).map(|c| c as f64 / t)
    }
}

fn golden_section(lo: f64, hi: f64, tol: f64, f: impl Fn(f64) -> f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let mid = 0.5 * (a + b);
    [(mid, f(mid)), (lo, f(lo)), (hi, f(hi))]
        .into_iter()
        .min_by(|x, y| x.1.total_cmp(&y.1))
        .map(|x| x.0)
        .unwrap()
}

fn fit_to(events: &EventSet, target: [f64; 3]) -> f64 {
    golden_section(0.5, 1.0, FIT_TOLERANCE, |pb| {
        events
            .probabilities(pb)
            .iter()
            .zip(target)
            .map(|(m, t)| (m - t).powi(2))
            .sum()
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BunchingFit {
    pub p_bunch: f64,
    /// Bootstrap standard deviation.
    pub sigma: f64,
    pub gamma: f64,
    /// Monte Carlo trials behind the model probabilities.
    pub trials_kept: u64,
}

impl BunchingFit {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("fit report serializes")
    }
}

/// Least-squares fit of `P_bunch ∈ [1/2, 1]` to measured outcome
/// frequencies, with `S` and `P_LIC0` fixed. The event set is drawn from
/// `seed::derive(seed, 0)`, the bootstrap resamples from
/// `seed::derive(seed, 1)`.
pub fn fit_bunching(
    measured: &HomOutcomes,
    survival_s: f64,
    p_lic0: f64,
    trials: u64,
    seed: u64,
) -> Result<BunchingFit> {
    let n: u64 = measured.counts.iter().sum();
    if n == 0 {
        return Err(Error::Fit("all measured counts are zero".into()));
    }
    for (name, v) in [("survival_s", survival_s), ("p_lic0", p_lic0)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::invalid(format!(
                "{name} must lie in [0, 1], got {v}"
            )));
        }
    }
    if survival_s == 0.0 {
        return Err(Error::Fit("P_bunch is not identifiable at S = 0".into()));
    }
    let events = EventSet::generate(survival_s, p_lic0, trials, seed::derive(seed, 0))?;
    let freq = measured.counts.map(|c| c as f64 / n as f64);
    let p_bunch = fit_to(&events, freq);

    let mut rng = seed::rng(seed::derive(seed, 1));
    let resamples: Vec<[f64; 3]> = (0..BOOTSTRAP_RESAMPLES)
        .map(|_| {
            let c = multinomial3(&mut rng, n, freq);
            c.map(|x| x as f64 / n as f64)
        })
        .collect();
    let estimates: Vec<f64> = resamples.par_iter().map(|f| fit_to(&events, *f)).collect();
    let mean = estimates.iter().sum::<f64>() / estimates.len() as f64;
    let var =
        estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (estimates.len() - 1) as f64;
    Ok(BunchingFit {
        p_bunch,
        sigma: var.sqrt(),
        gamma: 2.0 * p_bunch - 1.0,
        trials_kept: events.trials(),
    })
}

fn multinomial3<R: Rng>(rng: &mut R, n: u64, p: [f64; 3]) -> [u64; 3] {
    let draw = |rng: &mut R, n: u64, q: f64| -> u64 {
        if n == 0 || q <= 0.0 {
            0
        } else if q >= 1.0 {
            n
        } else {
            Binomial::new(n, q).expect("valid binomial").sample(rng)
        }
    };
    let c0 = draw(rng, n, p[0]);
    let rest = 1.0 - p[0];
    let c1 = if rest > 0.0 {
        draw(rng, n - c0, p[1] / rest)
    } else {
        0
    };
    [c0, c1, n - c0 - c1]
}

/// `1 − P₂ / S²`.
pub fn bunching_from_p2(p2: f64, s: f64) -> Result<f64> {
    if !(s > 0.0 && s <= 1.0) {
        return Err(Error::invalid(format!(
            "survival must lie in (0, 1], got {s}"
        )));
    }
    if !(0.0..=1.0).contains(&p2) {
        return Err(Error::invalid(format!("P2 must lie in [0, 1], got {p2}")));
    }
    if p2 > s * s {
        return Err(Error::Infeasible(format!(
            "P2 = {p2} exceeds S^2 = {}",
            s * s
        )));
    }
    Ok(1.0 - p2 / (s * s))
}

/// `γ = 2 P_bunch − 1`.
pub fn purity_from_bunching(p_bunch: f64) -> Result<f64> {
    if !(0.5..=1.0).contains(&p_bunch) {
        return Err(Error::Infeasible(format!(
            "P_bunch = {p_bunch} lies outside [1/2, 1]"
        )));
    }
    Ok(2.0 * p_bunch - 1.0)
}

/// `γ ≈ P_3D²`.
pub fn expected_purity(p3d: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p3d) {
        return Err(Error::invalid(format!(
            "P_3D must lie in [0, 1], got {p3d}"
        )));
    }
    Ok(p3d * p3d)
}
