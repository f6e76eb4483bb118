//! Bosonic Fock states over `M` modes and their canonical enumeration.
//!
//! Modes are grouped into lattice sites: mode `m = 2s + σ` is internal state
//! `σ ∈ {0, 1}` (|+⟩, |−⟩) of site `s`. Site-level quantities such as the
//! number of doubly occupied sites are derived from that pairing.
//!
//! The canonical basis order is reverse-lexicographic on occupation vectors,
//! so for `N = 2, M = 2` the basis is `(2,0), (1,1), (0,2)`. Ranks are
//! computed with combinadic arithmetic in `O(M)`.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest basis the crate will materialize unless told otherwise.
pub const DEFAULT_BASIS_CAP: u64 = 10_000_000;

/// Occupation numbers of `M` bosonic modes.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<u32>", into = "Vec<u32>")]
pub struct FockState {
    occupations: Vec<u32>,
    total: usize,
}

impl FockState {
    pub fn new(occupations: Vec<u32>) -> Result<Self> {
        if occupations.is_empty() {
            return Err(Error::invalid("a Fock state needs at least one mode"));
        }
        let total = occupations
            .iter()
            .try_fold(0usize, |acc, &n| acc.checked_add(n as usize))
            .ok_or_else(|| Error::Overflow {
                what: "particle number".into(),
            })?;
        Ok(Self { occupations, total })
    }

    /// The state with one particle in each listed mode.
    pub fn from_modes(m: usize, modes: &[usize]) -> Result<Self> {
        let mut occ = vec![0u32; m];
        for &k in modes {
            if k >= m {
                return Err(Error::invalid(format!("mode {k} out of range for M = {m}")));
            }
            occ[k] += 1;
        }
        Self::new(occ)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("occupations serialize")
    }

    pub fn occupations(&self) -> &[u32] {
        &self.occupations
    }

    /// Particle number `N`.
    pub fn total(&self) -> usize {
        self.total
    }

    /// Mode count `M`.
    pub fn modes(&self) -> usize {
        self.occupations.len()
    }

    /// True iff no mode holds more than one particle.
    pub fn is_collision_free(&self) -> bool {
        self.occupations.iter().all(|&n| n <= 1)
    }

    pub fn site_occupancy(&self) -> Result<SiteOccupancy> {
        SiteOccupancy::of(&self.occupations)
    }

    /// `∏ n_i!` as a float.
    pub fn factorial_product(&self) -> f64 {
        self.occupations
            .iter()
            .map(|&n| (2..=n).map(f64::from).product::<f64>())
            .product()
    }
}

impl TryFrom<Vec<u32>> for FockState {
    type Error = Error;

    fn try_from(v: Vec<u32>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<FockState> for Vec<u32> {
    fn from(s: FockState) -> Self {
        s.occupations
    }
}

pub fn is_collision_free(state: &FockState) -> bool {
    state.is_collision_free()
}

/// Per-site atom counts of a state, with the pair and trio tallies used by the
/// two-body loss model.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SiteOccupancy {
    pub site_counts: Vec<u32>,
    /// Sites holding exactly two atoms.
    pub k2: usize,
    /// Sites holding exactly three atoms.
    pub k3: usize,
    pub max_occ: u32,
}

impl SiteOccupancy {
    pub fn of(occupations: &[u32]) -> Result<Self> {
        if !occupations.len().is_multiple_of(2) {
            return Err(Error::invalid(format!(
                "site occupancy needs an even mode count, got M = {}",
                occupations.len()
            )));
        }
        let site_counts: Vec<u32> = occupations.chunks_exact(2).map(|p| p[0] + p[1]).collect();
        let k2 = site_counts.iter().filter(|&&c| c == 2).count();
        let k3 = site_counts.iter().filter(|&&c| c == 3).count();
        let max_occ = site_counts.iter().copied().max().unwrap_or(0);
        Ok(Self {
            site_counts,
            k2,
            k3,
            max_occ,
        })
    }
}

pub fn site_occupancy(state: &FockState) -> Result<SiteOccupancy> {
    state.site_occupancy()
}

/// Exact binomial coefficient.
pub fn binomial_big(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

/// Binomial coefficient, or `None` if it does not fit in a `u64`.
pub fn binomial_u64(n: u64, k: u64) -> Option<u64> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc = C(n - k + i, i) at loop entry; every partial value is an integer.
        acc = acc.checked_mul(u128::from(n - k + i + 1))? / u128::from(i + 1);
        if acc > u128::from(u64::MAX) {
            return None;
        }
    }
    Some(acc as u64)
}

/// Dimension of the `N`-particle bosonic space over `M` modes, `C(M+N-1, N)`.
pub fn multiset_dimension(n: usize, m: usize) -> Result<u64> {
    if m == 0 {
        return Err(Error::invalid("mode count must be at least 1"));
    }
    if n == 0 {
        return Ok(1);
    }
    binomial_u64((m + n - 1) as u64, n as u64).ok_or_else(|| Error::Overflow {
        what: format!("multiset dimension (N = {n}, M = {m})"),
    })
}

/// Exact multiset dimension for sizes beyond `u64`.
pub fn multiset_dimension_big(n: usize, m: usize) -> BigUint {
    if n == 0 {
        return BigUint::one();
    }
    binomial_big((m + n - 1) as u64, n as u64)
}

/// The canonical `N`-particle basis over `M` modes.
///
/// Occupations are stored flat (`dim × M`); `rank` and `unrank` use a Pascal
/// table sized to the basis.
#[derive(Clone, Debug)]
pub struct FockBasis {
    n: usize,
    m: usize,
    dim: usize,
    occ: Vec<u32>,
    // pascal[a][b] = C(a, b), saturating; a ≤ N + M, b ≤ M
    pascal: Vec<Vec<u64>>,
}

impl FockBasis {
    pub fn new(n: usize, m: usize) -> Result<Self> {
        Self::with_cap(n, m, DEFAULT_BASIS_CAP)
    }

    pub fn with_cap(n: usize, m: usize, cap: u64) -> Result<Self> {
        let dim = match multiset_dimension(n, m) {
            Ok(d) => d,
            Err(Error::Overflow { .. }) => {
                let big = multiset_dimension_big(n, m);
                return Err(Error::size_cap(
                    format!("basis dimension for N = {n}, M = {m}"),
                    big.to_u128().unwrap_or(u128::MAX),
                    u128::from(cap),
                ));
            }
            Err(e) => return Err(e),
        };
        if dim > cap {
            return Err(Error::size_cap(
                format!("basis dimension for N = {n}, M = {m}"),
                u128::from(dim),
                u128::from(cap),
            ));
        }
        let dim = dim as usize;
        let pascal = pascal_table(n + m, m);

        let mut occ = Vec::with_capacity(dim * m);
        let mut cur = vec![0u32; m];
        cur[0] = n as u32;
        occ.extend_from_slice(&cur);
        for _ in 1..dim {
            next_reverse_lex(&mut cur);
            occ.extend_from_slice(&cur);
        }
        Ok(Self {
            n,
            m,
            dim,
            occ,
            pascal,
        })
    }

    pub fn particles(&self) -> usize {
        self.n
    }

    pub fn modes(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.dim == 0
    }

    pub fn occupations(&self, index: usize) -> &[u32] {
        &self.occ[index * self.m..(index + 1) * self.m]
    }

    pub fn state(&self, index: usize) -> FockState {
        FockState {
            occupations: self.occupations(index).to_vec(),
            total: self.n,
        }
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[u32]> + '_ {
        self.occ.chunks_exact(self.m.max(1)).take(self.dim)
    }

    fn choose(&self, a: usize, b: usize) -> u64 {
        if b > a {
            0
        } else {
            self.pascal[a][b]
        }
    }

    /// Number of ways to place `r` particles in `k` modes.
    fn fill_count(&self, r: usize, k: usize) -> u64 {
        match k {
            0 => u64::from(r == 0),
            _ => self.choose(r + k - 1, k - 1),
        }
    }

    /// Index of an occupation vector in the canonical order.
    pub fn rank_occupations(&self, occ: &[u32]) -> Result<usize> {
        if occ.len() != self.m {
            return Err(Error::invalid(format!(
                "state has {} modes, basis has {}",
                occ.len(),
                self.m
            )));
        }
        let mut remaining = self.n;
        let mut rank = 0u64;
        for (i, &ni) in occ.iter().enumerate() {
            let ni = ni as usize;
            if ni > remaining {
                return Err(Error::invalid(format!(
                    "state holds more than N = {} particles",
                    self.n
                )));
            }
            let k = self.m - i - 1;
            // states that agree on modes < i and carry more than ni in mode i
            if remaining > ni && k > 0 {
                rank += self.choose(remaining - ni - 1 + k, k);
            }
            remaining -= ni;
        }
        if remaining != 0 {
            return Err(Error::invalid(format!(
                "state holds fewer than N = {} particles",
                self.n
            )));
        }
        Ok(rank as usize)
    }

    pub fn rank(&self, state: &FockState) -> Result<usize> {
        self.rank_occupations(&state.occupations)
    }

    pub fn unrank(&self, index: usize) -> Result<FockState> {
        if index >= self.dim {
            return Err(Error::invalid(format!(
                "index {index} outside basis of dimension {}",
                self.dim
            )));
        }
        let mut idx = index as u64;
        let mut remaining = self.n;
        let mut occ = vec![0u32; self.m];
        for (i, slot) in occ.iter_mut().enumerate() {
            let k = self.m - i - 1;
            if k == 0 {
                *slot = remaining as u32;
                break;
            }
            let mut v = remaining;
            loop {
                let block = self.fill_count(remaining - v, k);
                if idx < block {
                    break;
                }
                idx -= block;
                v -= 1;
            }
            *slot = v as u32;
            remaining -= v;
        }
        FockState::new(occ)
    }
}

fn pascal_table(rows: usize, cols: usize) -> Vec<Vec<u64>> {
    let mut t = vec![vec![0u64; cols + 1]; rows + 1];
    for a in 0..=rows {
        t[a][0] = 1;
        for b in 1..=cols.min(a) {
            t[a][b] = t[a - 1][b - 1].saturating_add(if b < a { t[a - 1][b] } else { 0 });
        }
    }
    t
}

/// Advance to the next state in reverse-lexicographic order.
fn next_reverse_lex(occ: &mut [u32]) {
    let m = occ.len();
    let j = (0..m - 1)
        .rev()
        .find(|&j| occ[j] > 0)
        .expect("last state has no successor");
    let tail: u32 = occ[j + 1..].iter().sum();
    occ[j] -= 1;
    occ[j + 1] = tail + 1;
    for x in &mut occ[j + 2..] {
        *x = 0;
    }
}

/// All states of the `N`-particle basis in canonical order.
pub fn enumerate_basis(n: usize, m: usize) -> Result<Vec<FockState>> {
    enumerate_basis_capped(n, m, DEFAULT_BASIS_CAP)
}

pub fn enumerate_basis_capped(n: usize, m: usize, cap: u64) -> Result<Vec<FockState>> {
    let basis = FockBasis::with_cap(n, m, cap)?;
    Ok((0..basis.len()).map(|i| basis.state(i)).collect())
}

/// Position of `state` in [`enumerate_basis`] for its own `N` and `M`.
pub fn state_rank(state: &FockState) -> Result<usize> {
    let (n, m) = (state.total(), state.modes());
    let mut remaining = n;
    let mut rank = 0u64;
    for (i, &ni) in state.occupations.iter().enumerate() {
        let ni = ni as usize;
        let k = (m - i - 1) as u64;
        if remaining > ni && k > 0 {
            let term = binomial_u64((remaining - ni - 1) as u64 + k, k).ok_or_else(|| {
                Error::Overflow {
                    what: "state rank".into(),
                }
            })?;
            rank = rank.checked_add(term).ok_or_else(|| Error::Overflow {
                what: "state rank".into(),
            })?;
        }
        remaining -= ni;
    }
    usize::try_from(rank).map_err(|_| Error::Overflow {
        what: "state rank".into(),
    })
}
