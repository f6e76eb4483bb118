//! Matrix permanents and the boson-sampling output distribution.
//!
//! For `N` bosons entering in `input` and leaving in `output`,
//! `P(output) = |perm(U_{output,input})|² / (∏ output_j! ∏ input_i!)` where
//! the submatrix repeats row `j` `output_j` times and column `i` `input_i`
//! times.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fock::{binomial_u64, FockBasis, FockState, DEFAULT_BASIS_CAP};
use crate::interferometer::ModeUnitary;
use crate::seed;

/// Largest matrix order the Glynn kernel accepts by default.
pub const DEFAULT_PERMANENT_CAP: usize = 28;
/// Largest matrix order for the factorial-time reference.
pub const NAIVE_PERMANENT_CAP: usize = 9;

// Gray-code steps per chunk: 2^14. Chunking depends only on n, so the sum is
// formed in the same order whatever the thread count.
const CHUNK_BITS: u32 = 14;

fn check_square(a: &DMatrix<Complex64>) -> Result<usize> {
    if a.nrows() != a.ncols() {
        return Err(Error::Shape {
            rows: a.nrows(),
            cols: a.ncols(),
            reason: "permanent needs a square matrix",
        });
    }
    if a.nrows() == 0 {
        return Err(Error::Shape {
            rows: 0,
            cols: 0,
            reason: "permanent needs at least one row",
        });
    }
    Ok(a.nrows())
}

/// Permanent by Glynn's formula with Gray-code updates, `O(2^{n−1} n)`.
pub fn permanent_glynn(a: &DMatrix<Complex64>) -> Result<Complex64> {
    permanent_glynn_capped(a, DEFAULT_PERMANENT_CAP)
}

pub fn permanent_glynn_capped(a: &DMatrix<Complex64>, cap: usize) -> Result<Complex64> {
    let n = check_square(a)?;
    if n > cap {
        return Err(Error::size_cap("permanent order", n as u128, cap as u128));
    }
    let walk: u64 = 1 << (n - 1);
    let chunk: u64 = 1 << CHUNK_BITS;
    let sum = if walk <= chunk {
        glynn_segment(a, 0, walk)
    } else {
        let parts: Vec<Complex64> = (0..walk / chunk)
            .into_par_iter()
            .map(|c| glynn_segment(a, c * chunk, (c + 1) * chunk))
            .collect();
        parts.into_iter().sum()
    };
    Ok(sum / walk as f64)
}

/// Sum of the Glynn terms for Gray-code indices `start..end`.
///
/// Bit `b` of the Gray code `g(k) = k ^ (k >> 1)` set means row `b + 1`
/// carries sign −1; row 0 is always +1.
fn glynn_segment(a: &DMatrix<Complex64>, start: u64, end: u64) -> Complex64 {
    let n = a.nrows();
    let mut gray = start ^ (start >> 1);
    let mut col_sums: Vec<Complex64> = (0..n)
        .map(|j| {
            (0..n)
                .map(|i| {
                    if i > 0 && gray >> (i - 1) & 1 == 1 {
                        -a[(i, j)]
                    } else {
                        a[(i, j)]
                    }
                })
                .sum()
        })
        .collect();
    let mut sign = if gray.count_ones().is_multiple_of(2) {
        1.0
    } else {
        -1.0
    };
    let mut acc = Complex64::ZERO;
    let mut k = start;
    loop {
        let prod: Complex64 = col_sums.iter().product();
        acc += prod * sign;
        k += 1;
        if k == end {
            break;
        }
        let bit = k.trailing_zeros();
        let row = bit as usize + 1;
        let was_negative = gray >> bit & 1 == 1;
        gray ^= 1 << bit;
        let factor = if was_negative { 2.0 } else { -2.0 };
        for (j, s) in col_sums.iter_mut().enumerate() {
            *s += a[(row, j)] * factor;
        }
        sign = -sign;
    }
    acc
}

/// Permanent as an explicit sum over all `n!` permutations.
pub fn permanent_naive(a: &DMatrix<Complex64>) -> Result<Complex64> {
    let n = check_square(a)?;
    if n > NAIVE_PERMANENT_CAP {
        return Err(Error::size_cap(
            "naive permanent order",
            n as u128,
            NAIVE_PERMANENT_CAP as u128,
        ));
    }
    fn walk(a: &DMatrix<Complex64>, row: usize, used: u32, partial: Complex64) -> Complex64 {
        let n = a.nrows();
        if row == n {
            return partial;
        }
        (0..n)
            .filter(|&j| used >> j & 1 == 0)
            .map(|j| walk(a, row + 1, used | 1 << j, partial * a[(row, j)]))
            .sum()
    }
    Ok(walk(a, 0, 0, Complex64::ONE))
}

fn check_pair(u: &ModeUnitary, input: &FockState, output: &FockState) -> Result<()> {
    let m = u.modes();
    if input.modes() != m || output.modes() != m {
        return Err(Error::invalid(format!(
            "states have {} and {} modes, unitary has {m}",
            input.modes(),
            output.modes()
        )));
    }
    if input.total() != output.total() {
        return Err(Error::invalid(format!(
            "particle number mismatch: input N = {}, output N = {}",
            input.total(),
            output.total()
        )));
    }
    Ok(())
}

fn repeated_indices(state: &FockState) -> Vec<usize> {
    state
        .occupations()
        .iter()
        .enumerate()
        .flat_map(|(k, &n)| std::iter::repeat_n(k, n as usize))
        .collect()
}

/// The `N × N` matrix whose permanent is the transition amplitude
/// (up to the factorial normalization).
pub fn sampling_submatrix(
    u: &ModeUnitary,
    input: &FockState,
    output: &FockState,
) -> Result<DMatrix<Complex64>> {
    check_pair(u, input, output)?;
    let rows = repeated_indices(output);
    let cols = repeated_indices(input);
    let m = u.matrix();
    Ok(DMatrix::from_fn(rows.len(), cols.len(), |r, c| {
        m[(rows[r], cols[c])]
    }))
}

/// `⟨output| Û |input⟩` including the `1/√(∏n!)` normalization.
pub fn transition_amplitude(
    u: &ModeUnitary,
    input: &FockState,
    output: &FockState,
) -> Result<Complex64> {
    let sub = sampling_submatrix(u, input, output)?;
    if sub.nrows() == 0 {
        return Ok(Complex64::ONE);
    }
    let perm = permanent_glynn(&sub)?;
    Ok(perm / (input.factorial_product() * output.factorial_product()).sqrt())
}

pub fn outcome_probability(u: &ModeUnitary, input: &FockState, output: &FockState) -> Result<f64> {
    Ok(transition_amplitude(u, input, output)?.norm_sqr())
}

/// Exact output distribution over the canonical basis (or its collision-free
/// part), with the input state it was computed for.
#[derive(Clone, Debug, PartialEq)]
pub struct OutputDistribution {
    pub input: FockState,
    pub outcomes: Vec<(FockState, f64)>,
    pub collision_free_only: bool,
    pub total_mass: f64,
}

#[derive(Serialize)]
struct OutcomeJson<'a> {
    state: &'a FockState,
    probability: f64,
}

impl OutputDistribution {
    /// JSON array of `{state, probability}` in canonical order.
    pub fn to_json(&self) -> String {
        let rows: Vec<OutcomeJson<'_>> = self
            .outcomes
            .iter()
            .map(|(state, probability)| OutcomeJson {
                state,
                probability: *probability,
            })
            .collect();
        serde_json::to_string(&rows).expect("distribution serializes")
    }

    pub fn probability_of(&self, state: &FockState) -> Option<f64> {
        self.outcomes
            .iter()
            .find(|(s, _)| s == state)
            .map(|(_, p)| *p)
    }
}

/// Collision-free states in canonical (reverse-lexicographic) order, i.e.
/// occupied-mode sets in lexicographic order.
fn collision_free_states(n: usize, m: usize) -> Vec<FockState> {
    let mut out = Vec::new();
    if n > m {
        return out;
    }
    let mut idx: Vec<usize> = (0..n).collect();
    loop {
        out.push(FockState::from_modes(m, &idx).expect("indices in range"));
        let Some(i) = (0..n).rev().find(|&i| idx[i] < m - n + i) else {
            break;
        };
        idx[i] += 1;
        for k in i + 1..n {
            idx[k] = idx[k - 1] + 1;
        }
    }
    out
}

pub fn output_distribution(
    u: &ModeUnitary,
    input: &FockState,
    collision_free_only: bool,
) -> Result<OutputDistribution> {
    output_distribution_capped(u, input, collision_free_only, DEFAULT_BASIS_CAP)
}

pub fn output_distribution_capped(
    u: &ModeUnitary,
    input: &FockState,
    collision_free_only: bool,
    cap: u64,
) -> Result<OutputDistribution> {
    let (n, m) = (input.total(), u.modes());
    if input.modes() != m {
        return Err(Error::invalid(format!(
            "input has {} modes, unitary has {m}",
            input.modes()
        )));
    }
    let states = if collision_free_only {
        let count = binomial_u64(m as u64, n as u64).unwrap_or(u64::MAX);
        if count > cap {
            return Err(Error::size_cap(
                format!("collision-free outcome count for N = {n}, M = {m}"),
                count as u128,
                cap as u128,
            ));
        }
        collision_free_states(n, m)
    } else {
        let basis = FockBasis::with_cap(n, m, cap)?;
        (0..basis.len()).map(|i| basis.state(i)).collect()
    };
    let probs: Vec<f64> = states
        .par_iter()
        .map(|out| outcome_probability(u, input, out))
        .collect::<Result<_>>()?;
    let total_mass = probs.iter().sum();
    Ok(OutputDistribution {
        input: input.clone(),
        outcomes: states.into_iter().zip(probs).collect(),
        collision_free_only,
        total_mass,
    })
}

/// I.i.d. draws from `dist`, renormalized by its total mass, by inverse CDF.
pub fn draw_samples(dist: &OutputDistribution, shots: usize, seed: u64) -> Result<Vec<FockState>> {
    if !(dist.total_mass > 0.0) || dist.outcomes.is_empty() {
        return Err(Error::EmptyDistribution);
    }
    let mut cumulative = Vec::with_capacity(dist.outcomes.len());
    let mut acc = 0.0;
    for (_, p) in &dist.outcomes {
        acc += p;
        cumulative.push(acc);
    }
    let last_positive = dist
        .outcomes
        .iter()
        .rposition(|(_, p)| *p > 0.0)
        .ok_or(Error::EmptyDistribution)?;
    let mut rng = seed::rng(seed);
    Ok((0..shots)
        .map(|_| {
            let x = rng.random::<f64>() * acc;
            let i = cumulative.partition_point(|&c| c <= x).min(last_positive);
            dist.outcomes[i].0.clone()
        })
        .collect())
}

/// Probability that a uniformly random `N`-boson configuration over `M` modes
/// is collision-free: `C(M, N) / C(M+N−1, N) = ∏_{i<N} (M−i)/(M+i)`.
pub fn collision_free_mass(n: usize, m: usize) -> f64 {
    (0..n)
        .map(|i| (m as f64 - i as f64) / (m as f64 + i as f64))
        .product::<f64>()
        .max(0.0)
}
