//! Mode unitaries and their decomposition into a rectangular mesh of
//! site-local couplings.
//!
//! A mode unitary `U` maps creation operators as `a_i† → Σ_j U_ji a_j†`. The
//! basic coupling acting on adjacent modes `(m, m+1)` is
//!
//! ```text
//! T(θ, φ) = [ e^{-iφ} cos(θ/2)   -sin(θ/2) ]
//!           [ e^{-iφ} sin(θ/2)    cos(θ/2) ]
//! ```
//!
//! and any `M × M` unitary factors into `M(M−1)/2` such couplings arranged in
//! `M` alternating layers (even pairs `(0,1),(2,3),…`, then odd pairs
//! `(1,2),(3,4),…`) followed by a diagonal of output phases. On hardware each
//! coupling is the composite pulse `e^{-iφ/2} H† A(θ) H A(φ)` with a global
//! microwave Hadamard `H = exp(-iσ_x π/4)` and a local phase imprint
//! `A(ϕ) = exp(-iσ_z ϕ/2)`.

use std::f64::consts::{FRAC_1_SQRT_2, PI, TAU};

use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

/// Unitarity tolerance accepted on input (parsing, decomposition).
pub const UNITARY_INPUT_TOL: f64 = 1e-10;

// Elements below this magnitude are treated as already nulled, which keeps
// exactly sparse inputs (identity, diagonal phases) on canonical angles.
const NULL_TOL: f64 = 1e-14;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Wrap an angle into `[0, 2π)`.
pub fn wrap_angle(x: f64) -> f64 {
    let w = x.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Largest entry of `|U†U − I|`.
pub fn unitarity_deviation(u: &DMatrix<Complex64>) -> f64 {
    let g = u.adjoint() * u;
    let mut dev = 0.0f64;
    for i in 0..g.nrows() {
        for j in 0..g.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            dev = dev.max((g[(i, j)] - c(target, 0.0)).norm());
        }
    }
    dev
}

/// An `M × M` interferometer matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeUnitary {
    matrix: DMatrix<Complex64>,
}

impl ModeUnitary {
    /// Wraps `matrix` after checking it is square and unitary to
    /// [`UNITARY_INPUT_TOL`].
    pub fn new(matrix: DMatrix<Complex64>) -> Result<Self> {
        let u = Self::from_matrix_unchecked(matrix)?;
        let deviation = u.unitarity_deviation();
        if !(deviation <= UNITARY_INPUT_TOL) {
            return Err(Error::NotUnitary {
                deviation,
                tolerance: UNITARY_INPUT_TOL,
            });
        }
        Ok(u)
    }

    /// Wraps a square matrix without the unitarity check.
    pub fn from_matrix_unchecked(matrix: DMatrix<Complex64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() || matrix.nrows() == 0 {
            return Err(Error::Shape {
                rows: matrix.nrows(),
                cols: matrix.ncols(),
                reason: "mode unitary must be square and non-empty",
            });
        }
        Ok(Self { matrix })
    }

    pub fn identity(m: usize) -> Self {
        Self {
            matrix: DMatrix::identity(m, m),
        }
    }

    pub fn diagonal(phases: &[f64]) -> Self {
        let m = phases.len();
        Self {
            matrix: DMatrix::from_fn(m, m, |i, j| {
                if i == j {
                    Complex64::from_polar(1.0, phases[i])
                } else {
                    Complex64::ZERO
                }
            }),
        }
    }

    pub fn modes(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.matrix
    }

    pub fn unitarity_deviation(&self) -> f64 {
        unitarity_deviation(&self.matrix)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let raw: UnitaryJson = serde_json::from_str(s)?;
        Self::try_from(raw)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&UnitaryJson::from(self)).expect("unitary serializes")
    }
}

/// Wire format: `{"m": M, "re": [[..]], "im": [[..]]}`, row-major.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct UnitaryJson {
    m: usize,
    re: Vec<Vec<f64>>,
    im: Vec<Vec<f64>>,
}

impl From<&ModeUnitary> for UnitaryJson {
    fn from(u: &ModeUnitary) -> Self {
        let m = u.modes();
        let row =
            |i: usize, f: fn(&Complex64) -> f64| (0..m).map(|j| f(&u.matrix[(i, j)])).collect();
        Self {
            m,
            re: (0..m).map(|i| row(i, |z| z.re)).collect(),
            im: (0..m).map(|i| row(i, |z| z.im)).collect(),
        }
    }
}

impl TryFrom<UnitaryJson> for ModeUnitary {
    type Error = Error;

    fn try_from(raw: UnitaryJson) -> Result<Self> {
        let m = raw.m;
        let shape_ok = |rows: &Vec<Vec<f64>>| rows.len() == m && rows.iter().all(|r| r.len() == m);
        if m == 0 || !shape_ok(&raw.re) || !shape_ok(&raw.im) {
            return Err(Error::invalid(format!(
                "unitary arrays must both be {m}x{m} with m >= 1"
            )));
        }
        if raw
            .re
            .iter()
            .chain(&raw.im)
            .flatten()
            .any(|x| !x.is_finite())
        {
            return Err(Error::invalid("unitary entries must be finite"));
        }
        Self::new(DMatrix::from_fn(m, m, |i, j| c(raw.re[i][j], raw.im[i][j])))
    }
}

impl Serialize for ModeUnitary {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        UnitaryJson::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for ModeUnitary {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = UnitaryJson::deserialize(d)?;
        ModeUnitary::try_from(raw).map_err(serde::de::Error::custom)
    }
}

/// The 2×2 site-local coupling `T(θ, φ)`.
pub fn coupling_matrix(theta: f64, phi: f64) -> Matrix2<Complex64> {
    let (s, co) = (theta / 2.0).sin_cos();
    let e = Complex64::from_polar(1.0, -phi);
    Matrix2::new(e * co, c(-s, 0.0), e * s, c(co, 0.0))
}

/// Global microwave Hadamard `exp(-iσ_x π/4)`.
pub fn hadamard() -> Matrix2<Complex64> {
    let h = FRAC_1_SQRT_2;
    Matrix2::new(c(h, 0.0), c(0.0, -h), c(0.0, -h), c(h, 0.0))
}

/// Local differential phase imprint `exp(-iσ_z ϕ/2)`.
pub fn phase_imprint(angle: f64) -> Matrix2<Complex64> {
    Matrix2::new(
        Complex64::from_polar(1.0, -angle / 2.0),
        Complex64::ZERO,
        Complex64::ZERO,
        Complex64::from_polar(1.0, angle / 2.0),
    )
}

/// One elementary hardware operation of a composite pulse.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Pulse {
    PhaseImprint(f64),
    Hadamard,
    HadamardDagger,
}

impl Pulse {
    pub fn matrix(&self) -> Matrix2<Complex64> {
        match *self {
            Pulse::PhaseImprint(a) => phase_imprint(a),
            Pulse::Hadamard => hadamard(),
            Pulse::HadamardDagger => hadamard().adjoint(),
        }
    }
}

/// `T(θ, φ) = e^{-iφ/2} H† A(θ) H A(φ)`, stored as its pulse schedule.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PulseSequence {
    pub phi_imprint: f64,
    pub theta_imprint: f64,
    /// Common-mode phase `−φ/2`, not applied by any pulse.
    pub global_phase: f64,
}

impl PulseSequence {
    /// Pulses in the order they act on the atoms.
    pub fn pulses(&self) -> [Pulse; 4] {
        [
            Pulse::PhaseImprint(self.phi_imprint),
            Pulse::Hadamard,
            Pulse::PhaseImprint(self.theta_imprint),
            Pulse::HadamardDagger,
        ]
    }

    /// Product of the pulses times the global phase.
    pub fn matrix(&self) -> Matrix2<Complex64> {
        let mut acc = Matrix2::identity();
        for p in self.pulses() {
            acc = p.matrix() * acc;
        }
        acc * Complex64::from_polar(1.0, self.global_phase)
    }
}

pub fn composite_pulse(theta: f64, phi: f64) -> PulseSequence {
    PulseSequence {
        phi_imprint: phi,
        theta_imprint: theta,
        global_phase: -phi / 2.0,
    }
}

/// Haar-distributed `M × M` unitary, deterministic in `seed`.
///
/// QR-factorizes a matrix of i.i.d. standard complex Gaussians and rescales
/// the columns of `Q` so that `R` has a positive real diagonal.
pub fn haar_random_unitary(m: usize, seed: u64) -> ModeUnitary {
    assert!(m >= 1, "mode count must be at least 1");
    let mut rng = seed::rng(seed);
    let scale = FRAC_1_SQRT_2;
    let z = DMatrix::from_fn(m, m, |_, _| {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        c(re * scale, im * scale)
    });
    let qr = z.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..m {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 {
            d / d.norm()
        } else {
            Complex64::ONE
        };
        q.column_mut(j).iter_mut().for_each(|x| *x *= phase);
    }
    ModeUnitary { matrix: q }
}

/// A coupling between modes `mode` and `mode + 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LocalCoupling {
    pub mode: usize,
    /// Mixing angle in `[0, π]`.
    pub theta: f64,
    /// Phase in `[0, 2π)`.
    pub phi: f64,
}

impl LocalCoupling {
    pub fn new(mode: usize, theta: f64, phi: f64) -> Self {
        Self { mode, theta, phi }
    }

    pub fn pair(&self) -> (usize, usize) {
        (self.mode, self.mode + 1)
    }

    pub fn matrix(&self) -> Matrix2<Complex64> {
        coupling_matrix(self.theta, self.phi)
    }

    pub fn pulse_sequence(&self) -> PulseSequence {
        composite_pulse(self.theta, self.phi)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CouplingJson {
    pair: [usize; 2],
    theta: f64,
    phi: f64,
}

impl Serialize for LocalCoupling {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        CouplingJson {
            pair: [self.mode, self.mode + 1],
            theta: self.theta,
            phi: self.phi,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for LocalCoupling {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = CouplingJson::deserialize(d)?;
        if raw.pair[0].checked_add(1) != Some(raw.pair[1]) {
            return Err(serde::de::Error::custom(format!(
                "coupled modes must be adjacent, got {:?}",
                raw.pair
            )));
        }
        if !raw.theta.is_finite() || !raw.phi.is_finite() {
            return Err(serde::de::Error::custom("coupling angles must be finite"));
        }
        Ok(LocalCoupling::new(raw.pair[0], raw.theta, raw.phi))
    }
}

/// A layered mesh of couplings followed by output phases.
///
/// Layer `l` acts before layer `l + 1`; the whole circuit is
/// `diag(e^{iα}) · L_{last} ⋯ L_0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitPlan {
    pub m: usize,
    pub layers: Vec<Vec<LocalCoupling>>,
    pub output_phases: Vec<f64>,
}

impl CircuitPlan {
    /// `M` empty layers and zero output phases.
    pub fn empty(m: usize) -> Self {
        Self {
            m,
            layers: vec![Vec::new(); m],
            output_phases: vec![0.0; m],
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let plan: Self = serde_json::from_str(s)?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("plan serializes")
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn coupling_count(&self) -> usize {
        self.layers.iter().map(Vec::len).sum()
    }

    /// `(layer, coupling)` in execution order.
    pub fn couplings(&self) -> impl Iterator<Item = (usize, &LocalCoupling)> + '_ {
        self.layers
            .iter()
            .enumerate()
            .flat_map(|(l, layer)| layer.iter().map(move |c| (l, c)))
    }

    /// Checks mode bounds, disjointness within each layer, the even/odd layer
    /// alternation, the depth bound and the phase vector length.
    pub fn validate(&self) -> Result<()> {
        let m = self.m;
        if m == 0 {
            return Err(Error::InvalidPlan("mode count must be at least 1".into()));
        }
        if self.output_phases.len() != m {
            return Err(Error::InvalidPlan(format!(
                "{} output phases for {m} modes",
                self.output_phases.len()
            )));
        }
        if self.output_phases.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidPlan("output phases must be finite".into()));
        }
        if self.layers.len() > m {
            return Err(Error::InvalidPlan(format!(
                "depth {} exceeds M = {m}",
                self.layers.len()
            )));
        }
        for (l, layer) in self.layers.iter().enumerate() {
            validate_layer(m, layer).map_err(|e| match e {
                Error::InvalidPlan(msg) => Error::InvalidPlan(format!("layer {l}: {msg}")),
                other => other,
            })?;
            if let Some(cpl) = layer.iter().find(|cpl| cpl.mode % 2 != l % 2) {
                return Err(Error::InvalidPlan(format!(
                    "layer {l} holds pair {:?} of the wrong parity",
                    cpl.pair()
                )));
            }
        }
        Ok(())
    }
}

/// Checks that a set of couplings acts on in-range, pairwise disjoint mode
/// pairs with finite angles.
pub fn validate_layer(m: usize, layer: &[LocalCoupling]) -> Result<()> {
    let mut used = vec![false; m];
    for cpl in layer {
        if cpl.mode + 1 >= m {
            return Err(Error::InvalidPlan(format!(
                "pair {:?} outside {m} modes",
                cpl.pair()
            )));
        }
        if !cpl.theta.is_finite() || !cpl.phi.is_finite() {
            return Err(Error::InvalidPlan("coupling angles must be finite".into()));
        }
        if used[cpl.mode] || used[cpl.mode + 1] {
            return Err(Error::InvalidPlan(format!(
                "pair {:?} overlaps another coupling in the same layer",
                cpl.pair()
            )));
        }
        used[cpl.mode] = true;
        used[cpl.mode + 1] = true;
    }
    Ok(())
}

/// Left-multiply rows `(r, r+1)` of `u` by a 2×2 block.
fn apply_rows(u: &mut DMatrix<Complex64>, r: usize, t: &Matrix2<Complex64>) {
    for j in 0..u.ncols() {
        let (x, y) = (u[(r, j)], u[(r + 1, j)]);
        u[(r, j)] = t[(0, 0)] * x + t[(0, 1)] * y;
        u[(r + 1, j)] = t[(1, 0)] * x + t[(1, 1)] * y;
    }
}

/// Right-multiply columns `(col, col+1)` of `u` by a 2×2 block.
fn apply_cols(u: &mut DMatrix<Complex64>, col: usize, t: &Matrix2<Complex64>) {
    for i in 0..u.nrows() {
        let (x, y) = (u[(i, col)], u[(i, col + 1)]);
        u[(i, col)] = x * t[(0, 0)] + y * t[(1, 0)];
        u[(i, col + 1)] = x * t[(0, 1)] + y * t[(1, 1)];
    }
}

/// Multiply the circuit described by `plan` out into a mode unitary.
pub fn reconstruct(plan: &CircuitPlan) -> Result<ModeUnitary> {
    plan.validate()?;
    let mut u = DMatrix::<Complex64>::identity(plan.m, plan.m);
    for (_, cpl) in plan.couplings() {
        apply_rows(&mut u, cpl.mode, &cpl.matrix());
    }
    for (i, &alpha) in plan.output_phases.iter().enumerate() {
        let ph = Complex64::from_polar(1.0, alpha);
        u.row_mut(i).iter_mut().for_each(|z| *z *= ph);
    }
    Ok(ModeUnitary { matrix: u })
}

/// Angles of `T⁻¹` applied from the right that zero `a` against `b`, where
/// `a`, `b` sit in columns `(c, c+1)` of the same row.
fn null_from_right(a: Complex64, b: Complex64) -> (f64, f64) {
    if a.norm() < NULL_TOL {
        (0.0, 0.0)
    } else if b.norm() < NULL_TOL {
        (PI, 0.0)
    } else {
        (
            2.0 * a.norm().atan2(b.norm()),
            wrap_angle(b.arg() - a.arg()),
        )
    }
}

/// Angles of `T` applied from the left that zero `b` (row `r`) against `a`
/// (row `r − 1`) in the same column.
fn null_from_left(a: Complex64, b: Complex64) -> (f64, f64) {
    if b.norm() < NULL_TOL {
        (0.0, 0.0)
    } else if a.norm() < NULL_TOL {
        (PI, 0.0)
    } else {
        (
            2.0 * b.norm().atan2(a.norm()),
            wrap_angle(a.arg() - b.arg() + PI),
        )
    }
}

/// Factor `U` into the rectangular mesh: `M(M−1)/2` couplings in `M`
/// alternating layers and a final diagonal of output phases.
pub fn clements_decompose(u: &ModeUnitary) -> Result<CircuitPlan> {
    let deviation = u.unitarity_deviation();
    if !(deviation <= UNITARY_INPUT_TOL) {
        return Err(Error::NotUnitary {
            deviation,
            tolerance: UNITARY_INPUT_TOL,
        });
    }
    let n = u.modes();
    let mut w = u.matrix.clone();
    let mut right: Vec<LocalCoupling> = Vec::new();
    let mut left: Vec<LocalCoupling> = Vec::new();

    for i in 0..n.saturating_sub(1) {
        if i % 2 == 0 {
            for j in 0..=i {
                let (row, col) = (n - 1 - j, i - j);
                let (theta, phi) = null_from_right(w[(row, col)], w[(row, col + 1)]);
                apply_cols(&mut w, col, &coupling_matrix(theta, phi).adjoint());
                right.push(LocalCoupling::new(col, theta, phi));
            }
        } else {
            for j in 1..=i + 1 {
                let (row, col) = (n + j - i - 2, j - 1);
                let (theta, phi) = null_from_left(w[(row - 1, col)], w[(row, col)]);
                apply_rows(&mut w, row - 1, &coupling_matrix(theta, phi));
                left.push(LocalCoupling::new(row - 1, theta, phi));
            }
        }
    }

    // w is now diagonal: U = L_1⁻¹ ⋯ L_p⁻¹ D R_q ⋯ R_1. Push each L⁻¹ through D,
    // using T⁻¹(θ,φ) diag(d1,d2) = diag(−e^{iφ} d2, d2) T(θ, arg d2 − arg d1 + π).
    let mut d: Vec<Complex64> = (0..n).map(|k| w[(k, k)]).collect();
    let mut moved = Vec::with_capacity(left.len());
    for cpl in left.iter().rev() {
        let k = cpl.mode;
        if cpl.theta == 0.0 {
            // canonical null coupling is the identity
            d[k] *= Complex64::from_polar(1.0, cpl.phi);
            moved.push(LocalCoupling::new(k, 0.0, 0.0));
            continue;
        }
        let (d1, d2) = (d[k], d[k + 1]);
        let phi = wrap_angle(d2.arg() - d1.arg() + PI);
        d[k] = -Complex64::from_polar(1.0, cpl.phi) * d2;
        moved.push(LocalCoupling::new(k, cpl.theta, phi));
    }

    // Execution order: right couplings as recorded, then the moved left ones
    // in the order they were pushed through D.
    let sequence = right.into_iter().chain(moved);
    let mut layers: Vec<Vec<LocalCoupling>> = Vec::new();
    let mut next_free = vec![0usize; n];
    for cpl in sequence {
        let k = cpl.mode;
        let mut l = next_free[k].max(next_free[k + 1]);
        if l % 2 != k % 2 {
            l += 1;
        }
        if layers.len() <= l {
            layers.resize_with(l + 1, Vec::new);
        }
        layers[l].push(cpl);
        next_free[k] = l + 1;
        next_free[k + 1] = l + 1;
    }
    if layers.len() > n.max(1) {
        return Err(Error::InvalidPlan(format!(
            "mesh scheduling produced depth {} for M = {n}",
            layers.len()
        )));
    }
    layers.resize_with(n, Vec::new);
    for layer in &mut layers {
        layer.sort_by_key(|c| c.mode);
    }

    Ok(CircuitPlan {
        m: n,
        layers,
        output_phases: d.iter().map(|z| z.arg()).collect(),
    })
}
