//! Operators in the computational basis and the interpolating schedules.
//!
//! Basis index `z` packs qubit `q_n` into bit `n - 1`, matching the
//! assignment convention of [`crate::sat`]. The guess and clause-penalty
//! Hamiltonians are diagonal and stored as vectors; the transverse driver is
//! kept implicit (element rule) and only densified by [`assemble`].

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sat::{Assignment, Clause, CnfInstance};

/// Largest register handled by dense assembly.
pub const MAX_QUBITS: usize = 14;

fn check_qubits(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::input("operators need at least one qubit"));
    }
    if n > MAX_QUBITS {
        return Err(Error::Capacity { what: "qubit count", value: n, limit: MAX_QUBITS });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagonalOperator {
    n_qubits: usize,
    diag: Vec<f64>,
}

impl DiagonalOperator {
    pub fn new(n_qubits: usize, diag: Vec<f64>) -> Result<Self> {
        check_qubits(n_qubits)?;
        if diag.len() != 1 << n_qubits {
            return Err(Error::input(format!("diagonal of length {} for {n_qubits} qubits", diag.len())));
        }
        if diag.iter().any(|d| !d.is_finite()) {
            return Err(Error::input("diagonal entries must be finite"));
        }
        Ok(DiagonalOperator { n_qubits, diag })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    /// Indices attaining the minimum entry.
    pub fn argmin_set(&self) -> Vec<usize> {
        let min = self.diag.iter().copied().fold(f64::INFINITY, f64::min);
        (0..self.diag.len()).filter(|&z| self.diag[z] == min).collect()
    }
}

/// Guess-encoding Hamiltonian: every basis state sits at its Hamming
/// distance from the guess, which is the unique zero-energy state.
pub fn initial_hamiltonian(guess: &Assignment) -> Result<DiagonalOperator> {
    let n = guess.len();
    check_qubits(n)?;
    let g = guess.bits();
    let diag = (0..1u64 << n).map(|z| (z ^ g).count_ones() as f64).collect();
    Ok(DiagonalOperator { n_qubits: n, diag })
}

/// Clause-penalty Hamiltonian: each basis state's energy is the number of
/// clauses it violates.
pub fn final_hamiltonian(inst: &CnfInstance) -> Result<DiagonalOperator> {
    let n = inst.n();
    check_qubits(n)?;
    let diag = (0..1u64 << n).map(|z| inst.violations(z) as f64).collect();
    Ok(DiagonalOperator { n_qubits: n, diag })
}

/// Multilinear polynomial with integer coefficients over binary variables.
/// Monomials are keyed by the bitmask of their variables (bit `j-1` for `x_j`).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MultilinearPolynomial {
    terms: BTreeMap<u64, i64>,
}

impl MultilinearPolynomial {
    pub fn constant(c: i64) -> Self {
        let mut p = Self::default();
        p.add_term(0, c);
        p
    }

    fn add_term(&mut self, mask: u64, coeff: i64) {
        let entry = self.terms.entry(mask).or_insert(0);
        *entry += coeff;
        if *entry == 0 {
            self.terms.remove(&mask);
        }
    }

    /// `c0 + c1·x_j`.
    pub fn linear(variable: u32, c0: i64, c1: i64) -> Self {
        let mut p = Self::constant(c0);
        p.add_term(1 << (variable - 1), c1);
        p
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::default();
        for (&ma, &ca) in &self.terms {
            for (&mb, &cb) in &other.terms {
                // x² = x for binary variables.
                out.add_term(ma | mb, ca * cb);
            }
        }
        out
    }

    pub fn terms(&self) -> impl Iterator<Item = (u64, i64)> + '_ {
        self.terms.iter().map(|(&m, &c)| (m, c))
    }

    pub fn coefficient(&self, mask: u64) -> i64 {
        self.terms.get(&mask).copied().unwrap_or(0)
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|m| m.count_ones()).max().unwrap_or(0)
    }

    pub fn evaluate(&self, z: u64) -> i64 {
        self.terms.iter().filter(|(&m, _)| z & m == m).map(|(_, &c)| c).sum()
    }
}

/// Penalty `(1 − a_α)(1 − a_β)(1 − a_γ)` with `x̄ = 1 − x` substituted.
pub fn clause_penalty_polynomial(clause: &Clause) -> MultilinearPolynomial {
    clause.literals().iter().fold(MultilinearPolynomial::constant(1), |acc, lit| {
        // 1 − x for a positive literal, 1 − (1 − x) = x for a negated one.
        let factor = if lit.negated {
            MultilinearPolynomial::linear(lit.variable, 0, 1)
        } else {
            MultilinearPolynomial::linear(lit.variable, 1, -1)
        };
        acc.mul(&factor)
    })
}

/// Transverse driver `δ Σ_n ½(I − σ^x_n)`, held implicitly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriverOperator {
    n_qubits: usize,
    delta: f64,
}

impl DriverOperator {
    pub fn new(n_qubits: usize, delta: f64) -> Result<Self> {
        check_qubits(n_qubits)?;
        if !(delta.is_finite() && delta > 0.0) {
            return Err(Error::input(format!("transverse intensity must be positive, got {delta}")));
        }
        Ok(DriverOperator { n_qubits, delta })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn diagonal_value(&self) -> f64 {
        self.delta * (self.n_qubits as f64 * 0.5)
    }

    pub fn hop_value(&self) -> f64 {
        self.delta * -0.5
    }

    pub fn element(&self, z: usize, z2: usize) -> f64 {
        driver_matrix_element(self.n_qubits, self.delta, z, z2)
    }

    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        let d = self.diagonal_value();
        let h = self.hop_value();
        for (z, o) in out.iter_mut().enumerate() {
            let mut acc = d * x[z];
            for k in 0..self.n_qubits {
                acc += h * x[z ^ (1 << k)];
            }
            *o = acc;
        }
    }

    pub fn to_dense(&self) -> DenseSymmetricMatrix {
        let dim = 1 << self.n_qubits;
        let mut m = DMatrix::zeros(dim, dim);
        add_driver(&mut m, self.n_qubits, 1.0, self.delta);
        DenseSymmetricMatrix(m)
    }
}

pub fn driver_matrix_element(n_qubits: usize, delta: f64, z: usize, z2: usize) -> f64 {
    match (z ^ z2).count_ones() {
        0 => delta * (n_qubits as f64 * 0.5),
        1 => delta * -0.5,
        _ => 0.0,
    }
}

/// Adds `weight · Driver(δ)` into `m`. The off-diagonal value is computed once
/// so both triangles receive the identical number.
fn add_driver(m: &mut DMatrix<f64>, n_qubits: usize, weight: f64, delta: f64) {
    let diag = weight * (delta * (n_qubits as f64 * 0.5));
    let hop = weight * (delta * -0.5);
    for z in 0..1usize << n_qubits {
        m[(z, z)] += diag;
        for k in 0..n_qubits {
            m[(z, z ^ (1 << k))] += hop;
        }
    }
}

/// Time profile of the driver in the guess-seeded schedule. Vanishes at both
/// ends of the path.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum HatFunction {
    /// `3s(1 − s)`; same mean as the linear ramp `1 − s`.
    #[default]
    ThreeSOneMinusS,
    SinSqPiS,
    SOneMinusS,
    /// Piecewise-linear table on increasing knots from 0 to 1.
    Tabulated {
        knots: Vec<f64>,
        values: Vec<f64>,
        derivatives: Option<Vec<f64>>,
    },
}

impl HatFunction {
    pub fn tabulated(knots: Vec<f64>, values: Vec<f64>, derivatives: Option<Vec<f64>>) -> Result<Self> {
        if knots.len() < 2 || knots.len() != values.len() {
            return Err(Error::input("tabulated hat needs at least two knots with one value each"));
        }
        if derivatives.as_ref().is_some_and(|d| d.len() != knots.len()) {
            return Err(Error::input("derivative table length differs from knot count"));
        }
        if knots[0] != 0.0 || knots[knots.len() - 1] != 1.0 || knots.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::input("knots must increase strictly from 0 to 1"));
        }
        if values[0] != 0.0 || values[values.len() - 1] != 0.0 {
            return Err(Error::input("hat must vanish at s = 0 and s = 1"));
        }
        if values.iter().chain(derivatives.iter().flatten()).any(|v| !v.is_finite()) {
            return Err(Error::input("tabulated hat entries must be finite"));
        }
        Ok(HatFunction::Tabulated { knots, values, derivatives })
    }

    pub fn value(&self, s: f64) -> f64 {
        match self {
            HatFunction::ThreeSOneMinusS => 3.0 * s * (1.0 - s),
            HatFunction::SinSqPiS => {
                if s == 0.0 || s == 1.0 {
                    0.0
                } else {
                    (PI * s).sin().powi(2)
                }
            }
            HatFunction::SOneMinusS => s * (1.0 - s),
            HatFunction::Tabulated { knots, values, .. } => interpolate(knots, values, s),
        }
    }

    pub fn derivative(&self, s: f64) -> Result<f64> {
        Ok(match self {
            HatFunction::ThreeSOneMinusS => 3.0 - 6.0 * s,
            HatFunction::SinSqPiS => PI * (2.0 * PI * s).sin(),
            HatFunction::SOneMinusS => 1.0 - 2.0 * s,
            HatFunction::Tabulated { knots, derivatives, .. } => match derivatives {
                Some(d) => interpolate(knots, d, s),
                None => return Err(Error::Unsupported("tabulated hat has no derivative table".into())),
            },
        })
    }
}

fn interpolate(knots: &[f64], values: &[f64], s: f64) -> f64 {
    let i = knots.partition_point(|&k| k <= s).clamp(1, knots.len() - 1);
    let (s0, s1) = (knots[i - 1], knots[i]);
    let t = (s - s0) / (s1 - s0);
    values[i - 1] + t * (values[i] - values[i - 1])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Linear sweep from the transverse driver to the clause penalty.
    Caqc,
    /// Guess-seeded sweep with the driver switched on only mid-path.
    Saqc,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Caqc => "caqc",
            Mode::Saqc => "saqc",
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "caqc" => Ok(Mode::Caqc),
            "saqc" => Ok(Mode::Saqc),
            other => Err(Error::input(format!("unknown mode '{other}' (expected caqc or saqc)"))),
        }
    }
}

/// A complete interpolation rule `H(s)` for one configuration.
#[derive(Debug, Clone)]
pub struct ScheduleSpec {
    mode: Mode,
    driver: DriverOperator,
    hat: HatFunction,
    guess: Option<Assignment>,
    initial: Option<DiagonalOperator>,
    final_h: Arc<DiagonalOperator>,
}

impl ScheduleSpec {
    pub fn caqc(final_h: Arc<DiagonalOperator>, delta: f64) -> Result<Self> {
        let driver = DriverOperator::new(final_h.n_qubits(), delta)?;
        Ok(ScheduleSpec { mode: Mode::Caqc, driver, hat: HatFunction::default(), guess: None, initial: None, final_h })
    }

    pub fn saqc(final_h: Arc<DiagonalOperator>, guess: Assignment, delta: f64, hat: HatFunction) -> Result<Self> {
        if guess.len() != final_h.n_qubits() {
            return Err(Error::input(format!(
                "guess has {} bits, final Hamiltonian acts on {} qubits",
                guess.len(),
                final_h.n_qubits()
            )));
        }
        let driver = DriverOperator::new(final_h.n_qubits(), delta)?;
        let initial = initial_hamiltonian(&guess)?;
        Ok(ScheduleSpec { mode: Mode::Saqc, driver, hat, guess: Some(guess), initial: Some(initial), final_h })
    }

    pub fn for_instance(inst: &CnfInstance, mode: Mode, guess: Option<Assignment>, delta: f64) -> Result<Self> {
        let final_h = Arc::new(final_hamiltonian(inst)?);
        match mode {
            Mode::Caqc => Self::caqc(final_h, delta),
            Mode::Saqc => {
                let guess = guess.ok_or_else(|| Error::input("SAQC schedules need a guess"))?;
                Self::saqc(final_h, guess, delta, HatFunction::default())
            }
        }
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn n_qubits(&self) -> usize {
        self.driver.n_qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.driver.n_qubits
    }

    pub fn delta(&self) -> f64 {
        self.driver.delta
    }

    pub fn driver(&self) -> &DriverOperator {
        &self.driver
    }

    pub fn hat(&self) -> &HatFunction {
        &self.hat
    }

    pub fn guess(&self) -> Option<Assignment> {
        self.guess
    }

    pub fn initial(&self) -> Option<&DiagonalOperator> {
        self.initial.as_ref()
    }

    pub fn final_hamiltonian(&self) -> &DiagonalOperator {
        &self.final_h
    }

    /// Weight of the driver term at `s`.
    pub fn driver_weight(&self, s: f64) -> f64 {
        match self.mode {
            Mode::Caqc => 1.0 - s,
            Mode::Saqc => self.hat.value(s),
        }
    }

    /// Diagonal of `H(s)` in the computational basis.
    pub fn diagonal_at(&self, s: f64) -> Vec<f64> {
        let hf = self.final_h.diag();
        match (&self.mode, &self.initial) {
            (Mode::Saqc, Some(hi)) => {
                let drive = self.hat.value(s) * self.driver.diagonal_value();
                hi.diag().iter().zip(hf).map(|(&i, &f)| (1.0 - s) * i + drive + s * f).collect()
            }
            _ => {
                let drive = (1.0 - s) * self.driver.diagonal_value();
                hf.iter().map(|&f| drive + s * f).collect()
            }
        }
    }
}

/// Dense real symmetric matrix, built symmetric entry by entry.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseSymmetricMatrix(DMatrix<f64>);

impl DenseSymmetricMatrix {
    /// Wraps `m` after checking exact symmetry.
    pub fn from_matrix(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::input("matrix is not square"));
        }
        let n = m.nrows();
        for i in 0..n {
            for j in 0..i {
                if m[(i, j)] != m[(j, i)] && !(m[(i, j)].is_nan() && m[(j, i)].is_nan()) {
                    return Err(Error::input(format!("matrix is not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(DenseSymmetricMatrix(m))
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        DenseSymmetricMatrix(DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(diag)))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn is_symmetric(&self) -> bool {
        let n = self.dim();
        (0..n).all(|i| (0..i).all(|j| self.0[(i, j)] == self.0[(j, i)]))
    }

    pub fn is_diagonal(&self) -> bool {
        let n = self.dim();
        (0..n).all(|i| (0..n).all(|j| i == j || self.0[(i, j)] == 0.0))
    }

    pub fn scaled(&self, c: f64) -> Self {
        DenseSymmetricMatrix(&self.0 * c)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (&self.0 - &other.0).amax()
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.0.row_iter().map(|r| r.iter().copied().collect()).collect()
    }
}

fn check_s(s: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::input(format!("schedule point s = {s} outside [0, 1]")));
    }
    Ok(())
}

/// `H(s)`: CAQC `(1−s)·Driver + s·H_f`; SAQC `(1−s)·H_i + hat(s)·Driver + s·H_f`.
pub fn assemble(schedule: &ScheduleSpec, s: f64) -> Result<DenseSymmetricMatrix> {
    check_s(s)?;
    let dim = schedule.dim();
    let diag = schedule.diagonal_at(s);
    let hop = schedule.driver_weight(s) * schedule.driver.hop_value();
    let n = schedule.n_qubits();
    let mut m = DMatrix::zeros(dim, dim);
    for z in 0..dim {
        m[(z, z)] = diag[z];
        for k in 0..n {
            m[(z, z ^ (1 << k))] = hop;
        }
    }
    Ok(DenseSymmetricMatrix(m))
}

/// `dH/ds`: CAQC `H_f − Driver`; SAQC `H_f − H_i + hat'(s)·Driver`.
pub fn derivative(schedule: &ScheduleSpec, s: f64) -> Result<DenseSymmetricMatrix> {
    check_s(s)?;
    let weight = match schedule.mode {
        Mode::Caqc => -1.0,
        Mode::Saqc => schedule.hat.derivative(s)?,
    };
    let hf = schedule.final_h.diag();
    let mut m = DMatrix::zeros(schedule.dim(), schedule.dim());
    for (z, &f) in hf.iter().enumerate() {
        let i = schedule.initial.as_ref().map_or(0.0, |hi| hi.diag()[z]);
        m[(z, z)] = f - i;
    }
    add_driver(&mut m, schedule.n_qubits(), weight, schedule.delta());
    Ok(DenseSymmetricMatrix(m))
}

/// Plain export of an assembled matrix or a diagonal operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorExport {
    pub n_qubits: usize,
    pub s: Option<f64>,
    pub mode: Option<Mode>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub entries: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub diag: Option<Vec<f64>>,
}

impl OperatorExport {
    pub fn assembled(schedule: &ScheduleSpec, s: f64) -> Result<Self> {
        let m = assemble(schedule, s)?;
        Ok(OperatorExport {
            n_qubits: schedule.n_qubits(),
            s: Some(s),
            mode: Some(schedule.mode()),
            entries: Some(m.rows()),
            diag: None,
        })
    }

    pub fn diagonal(op: &DiagonalOperator) -> Self {
        OperatorExport { n_qubits: op.n_qubits(), s: None, mode: None, entries: None, diag: Some(op.diag().to_vec()) }
    }
}
