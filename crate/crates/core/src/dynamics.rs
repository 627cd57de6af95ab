//! Time-dependent Schrödinger propagation under a schedule, measurement, and
//! the serial restart protocol.
//!
//! The equation is integrated in the schedule variable, `dψ/ds = −iτ H(s) ψ`,
//! with a fourth-order commutator-free Magnus scheme. Every stage is an exact
//! exponential of a real symmetric matrix, so the state is never renormalized
//! and the norm drift is a genuine accuracy diagnostic. Local error is
//! controlled by step doubling.

use std::io::Write;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::{assemble, final_hamiltonian, DiagonalOperator, HatFunction, Mode, ScheduleSpec};
use crate::sat::{unsatisfied_count, Assignment, CnfInstance};

pub const DEFAULT_STEP_TOLERANCE: f64 = 1e-8;
pub const DEFAULT_NORM_TOLERANCE: f64 = 1e-6;
const MAX_STEPS: usize = 5_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct WaveState {
    amplitudes: Vec<Complex64>,
}

impl WaveState {
    pub fn new(amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() < 2 || !amplitudes.len().is_power_of_two() {
            return Err(Error::input(format!("state dimension {} is not a power of two ≥ 2", amplitudes.len())));
        }
        Ok(WaveState { amplitudes })
    }

    pub fn basis(n_qubits: usize, index: u64) -> Result<Self> {
        let dim = 1usize << n_qubits;
        if index as usize >= dim {
            return Err(Error::input(format!("basis index {index} outside dimension {dim}")));
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); dim];
        amplitudes[index as usize] = Complex64::new(1.0, 0.0);
        WaveState::new(amplitudes)
    }

    pub fn uniform(n_qubits: usize) -> Result<Self> {
        let dim = 1usize << n_qubits;
        let a = 1.0 / (dim as f64).sqrt();
        WaveState::new(vec![Complex64::new(a, 0.0); dim])
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn n_qubits(&self) -> usize {
        self.amplitudes.len().trailing_zeros() as usize
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn probability(&self, index: u64) -> f64 {
        self.amplitudes[index as usize].norm_sqr()
    }

    pub fn max_abs_diff(&self, other: &WaveState) -> f64 {
        self.amplitudes.iter().zip(&other.amplitudes).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }
}

/// Ground state of the schedule at `s = 0`: the guess basis state for SAQC,
/// the uniform superposition for CAQC.
pub fn default_initial_state(schedule: &ScheduleSpec) -> Result<WaveState> {
    match (schedule.mode(), schedule.guess()) {
        (Mode::Saqc, Some(g)) => WaveState::basis(schedule.n_qubits(), g.bits()),
        _ => WaveState::uniform(schedule.n_qubits()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropagationConfig {
    /// Total evolution time (ħ = 1).
    pub tau: f64,
    /// Maximum local error per step, measured as the largest amplitude change.
    pub tolerance: f64,
    /// Fixed uniform step count instead of error control.
    pub fixed_steps: Option<usize>,
    pub record_overlaps: bool,
    /// Allowed drift of the final norm from 1.
    pub norm_tolerance: f64,
}

impl PropagationConfig {
    pub fn new(tau: f64) -> Self {
        PropagationConfig {
            tau,
            tolerance: DEFAULT_STEP_TOLERANCE,
            fixed_steps: None,
            record_overlaps: false,
            norm_tolerance: DEFAULT_NORM_TOLERANCE,
        }
    }

    pub fn fixed(tau: f64, steps: usize) -> Self {
        PropagationConfig { fixed_steps: Some(steps), ..Self::new(tau) }
    }

    fn validate(&self) -> Result<()> {
        if !(self.tau.is_finite() && self.tau >= 0.0) {
            return Err(Error::input(format!("evolution time τ = {} must be finite and ≥ 0", self.tau)));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::input("step tolerance must be positive"));
        }
        if self.fixed_steps == Some(0) {
            return Err(Error::input("fixed step count must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub s: f64,
    pub success_probability: Option<f64>,
    pub norm: f64,
}

#[derive(Debug, Clone)]
pub struct Propagation {
    pub state: WaveState,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    /// Largest `|‖ψ‖ − 1|` over accepted steps.
    pub max_norm_drift: f64,
    pub trajectory: Vec<TrajectoryPoint>,
}

impl Propagation {
    /// CSV with columns `s,success_probability,norm`.
    pub fn write_trajectory_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["s", "success_probability", "norm"])?;
        for p in &self.trajectory {
            let prob = p.success_probability.map(|x| x.to_string()).unwrap_or_default();
            wtr.write_record([p.s.to_string(), prob, p.norm.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

const SQRT3: f64 = 1.732_050_807_568_877_2;

/// Applies `exp(−iθA)` for real symmetric `A`.
fn apply_exponential(a: DMatrix<f64>, theta: f64, psi: &mut [Complex64]) {
    let eig = SymmetricEigen::new(a);
    let v = &eig.eigenvectors;
    let dim = psi.len();
    let mut coeffs = vec![Complex64::new(0.0, 0.0); dim];
    for (k, c) in coeffs.iter_mut().enumerate() {
        let col = v.column(k);
        let mut acc = Complex64::new(0.0, 0.0);
        for (z, p) in psi.iter().enumerate() {
            acc += p * col[z];
        }
        let phase = Complex64::from_polar(1.0, -theta * eig.eigenvalues[k]);
        *c = acc * phase;
    }
    for (z, p) in psi.iter_mut().enumerate() {
        let mut acc = Complex64::new(0.0, 0.0);
        for (k, c) in coeffs.iter().enumerate() {
            acc += c * v[(z, k)];
        }
        *p = acc;
    }
}

/// One fourth-order commutator-free Magnus step from `s` to `s + h`.
fn magnus_step(schedule: &ScheduleSpec, tau: f64, s: f64, h: f64, psi: &mut [Complex64]) -> Result<()> {
    let c1 = 0.5 - SQRT3 / 6.0;
    let c2 = 0.5 + SQRT3 / 6.0;
    let w1 = (3.0 - 2.0 * SQRT3) / 12.0;
    let w2 = (3.0 + 2.0 * SQRT3) / 12.0;
    let h1 = assemble(schedule, (s + c1 * h).clamp(0.0, 1.0))?.into_matrix();
    let h2 = assemble(schedule, (s + c2 * h).clamp(0.0, 1.0))?.into_matrix();
    apply_exponential(&h1 * w2 + &h2 * w1, tau * h, psi);
    apply_exponential(&h1 * w1 + &h2 * w2, tau * h, psi);
    Ok(())
}

fn max_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn norm_of(psi: &[Complex64]) -> f64 {
    psi.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
}

pub fn propagate(schedule: &ScheduleSpec, config: &PropagationConfig, psi0: &WaveState) -> Result<WaveState> {
    propagate_detailed(schedule, config, psi0, None).map(|p| p.state)
}

/// Propagation with step statistics. When `solution` is given and overlaps are
/// recorded, each trajectory point carries the solution probability.
pub fn propagate_detailed(
    schedule: &ScheduleSpec,
    config: &PropagationConfig,
    psi0: &WaveState,
    solution: Option<Assignment>,
) -> Result<Propagation> {
    config.validate()?;
    if psi0.dim() != schedule.dim() {
        return Err(Error::input(format!("state dimension {} differs from Hamiltonian dimension {}", psi0.dim(), schedule.dim())));
    }
    let n0 = psi0.norm();
    if (n0 - 1.0).abs() > 1e-10 {
        return Err(Error::input(format!("initial state is not normalized (‖ψ‖ = {n0})")));
    }

    let mut psi = psi0.amplitudes.clone();
    let mut out = Propagation {
        state: psi0.clone(),
        accepted_steps: 0,
        rejected_steps: 0,
        max_norm_drift: (n0 - 1.0).abs(),
        trajectory: Vec::new(),
    };
    let record = |s: f64, psi: &[Complex64], out: &mut Propagation| {
        let norm = norm_of(psi);
        out.max_norm_drift = out.max_norm_drift.max((norm - 1.0).abs());
        if config.record_overlaps {
            let success_probability = solution.map(|sol| psi[sol.bits() as usize].norm_sqr());
            out.trajectory.push(TrajectoryPoint { s, success_probability, norm });
        }
    };
    record(0.0, &psi, &mut out);
    if config.tau == 0.0 {
        return Ok(out);
    }

    let mut s = 0.0;
    if let Some(k) = config.fixed_steps {
        let h = 1.0 / k as f64;
        for i in 0..k {
            magnus_step(schedule, config.tau, s, h, &mut psi)?;
            s = if i + 1 == k { 1.0 } else { (i + 1) as f64 * h };
            out.accepted_steps += 1;
            record(s, &psi, &mut out);
        }
    } else {
        let spread = {
            let d0 = schedule.diagonal_at(0.0);
            let d1 = schedule.diagonal_at(1.0);
            let span = |d: &[f64]| d.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            span(&d0).max(span(&d1)) + schedule.delta() * schedule.n_qubits() as f64
        };
        let mut h = (0.1 / (config.tau * spread.max(1.0))).min(1.0);
        let mut big = vec![Complex64::new(0.0, 0.0); psi.len()];
        let mut half = big.clone();
        while s < 1.0 {
            if out.accepted_steps + out.rejected_steps >= MAX_STEPS {
                return Err(Error::Accuracy(format!("step budget exhausted at s = {s}")));
            }
            h = h.min(1.0 - s);
            big.copy_from_slice(&psi);
            magnus_step(schedule, config.tau, s, h, &mut big)?;
            half.copy_from_slice(&psi);
            magnus_step(schedule, config.tau, s, 0.5 * h, &mut half)?;
            magnus_step(schedule, config.tau, s + 0.5 * h, 0.5 * h, &mut half)?;
            // Richardson estimate for a fourth-order method.
            let err = max_diff(&big, &half) / 15.0;
            let factor = if err == 0.0 { 4.0 } else { (0.9 * (config.tolerance / err).powf(0.2)).clamp(0.2, 4.0) };
            if err <= config.tolerance {
                psi.copy_from_slice(&half);
                s = if 1.0 - (s + h) < 1e-14 { 1.0 } else { s + h };
                out.accepted_steps += 1;
                record(s, &psi, &mut out);
            } else {
                out.rejected_steps += 1;
            }
            h *= factor;
        }
    }

    let final_drift = (norm_of(&psi) - 1.0).abs();
    if final_drift > config.norm_tolerance {
        return Err(Error::Accuracy(format!(
            "norm drifted by {final_drift:.3e} (limit {:.1e}) after {} accepted and {} rejected steps; max drift {:.3e}",
            config.norm_tolerance, out.accepted_steps, out.rejected_steps, out.max_norm_drift
        )));
    }
    out.state = WaveState { amplitudes: psi };
    Ok(out)
}

/// Probability of the unique solution in `psi`.
pub fn success_probability(psi: &WaveState, inst: &CnfInstance) -> Result<f64> {
    let sol = inst
        .unique_solution()
        .ok_or_else(|| Error::State("instance carries no unique solution".into()))?;
    if psi.dim() != 1 << inst.n() {
        return Err(Error::input("state dimension does not match the instance"));
    }
    Ok(psi.probability(sol.bits()))
}

/// `Σ_z |ψ_z|² D_z` for a diagonal operator.
pub fn energy_expectation(psi: &WaveState, op: &DiagonalOperator) -> f64 {
    psi.amplitudes.iter().zip(op.diag()).map(|(a, d)| a.norm_sqr() * d).sum()
}

/// Projective computational-basis measurement.
pub fn sample_measurement<R: Rng + ?Sized>(psi: &WaveState, rng: &mut R) -> Result<Assignment> {
    let dist = WeightedIndex::new(psi.probabilities()).map_err(|e| Error::input(format!("cannot sample state: {e}")))?;
    Assignment::new(dist.sample(rng) as u64, psi.n_qubits())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GuessPolicy {
    /// Restart from the measured bitstring.
    Refine,
    /// Restart from a fresh uniformly random bitstring.
    Random,
}

impl std::str::FromStr for GuessPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "refine" => Ok(GuessPolicy::Refine),
            "random" => Ok(GuessPolicy::Random),
            other => Err(Error::input(format!("unknown restart mode '{other}' (expected refine or random)"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RestartSettings {
    pub delta: f64,
    pub hat: HatFunction,
    pub propagation: PropagationConfig,
    pub max_rounds: usize,
    pub policy: GuessPolicy,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RestartRound {
    pub guess: String,
    pub measured: String,
    pub success: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RestartRecord {
    pub rounds: Vec<RestartRound>,
    pub total_rounds: usize,
    pub succeeded: bool,
}

impl RestartRecord {
    /// 1-based round of the first success.
    pub fn success_round(&self) -> Option<usize> {
        self.succeeded.then_some(self.total_rounds)
    }
}

/// Guess-seeded runs in series: propagate, measure, check classically, and
/// restart from the measured or a random bitstring until a solution is read
/// out or `max_rounds` is reached.
pub fn run_restart_protocol<R: Rng + ?Sized>(
    inst: &CnfInstance,
    initial_guess: Assignment,
    settings: &RestartSettings,
    rng: &mut R,
) -> Result<RestartRecord> {
    if settings.max_rounds == 0 {
        return Err(Error::input("restart protocol needs at least one round"));
    }
    if initial_guess.len() != inst.n() {
        return Err(Error::input("guess length differs from instance variable count"));
    }
    let hf = Arc::new(final_hamiltonian(inst)?);
    run_restart_with_penalty(inst, hf, initial_guess, settings, rng)
}

fn single_run<R: Rng + ?Sized>(
    hf: &Arc<DiagonalOperator>,
    guess: Assignment,
    settings: &RestartSettings,
    rng: &mut R,
) -> Result<Assignment> {
    let sched = ScheduleSpec::saqc(hf.clone(), guess, settings.delta, settings.hat.clone())?;
    let psi0 = WaveState::basis(guess.len(), guess.bits())?;
    let psi = propagate(&sched, &settings.propagation, &psi0)?;
    sample_measurement(&psi, rng)
}

pub fn run_restart_with_penalty<R: Rng + ?Sized>(
    inst: &CnfInstance,
    hf: Arc<DiagonalOperator>,
    initial_guess: Assignment,
    settings: &RestartSettings,
    rng: &mut R,
) -> Result<RestartRecord> {
    let n = inst.n();
    let mut guess = initial_guess;
    let mut record = RestartRecord { rounds: Vec::new(), total_rounds: 0, succeeded: false };
    for round in 1..=settings.max_rounds {
        let measured = match single_run(&hf, guess, settings, rng) {
            Ok(m) => m,
            Err(Error::Accuracy(msg)) => return Err(Error::Accuracy(format!("restart round {round}: {msg}"))),
            Err(e) => return Err(e),
        };
        let success = unsatisfied_count(inst, &measured)? == 0;
        record.rounds.push(RestartRound { guess: guess.to_string(), measured: measured.to_string(), success });
        record.total_rounds = round;
        if success {
            record.succeeded = true;
            break;
        }
        guess = match settings.policy {
            GuessPolicy::Refine => measured,
            GuessPolicy::Random => Assignment::new(rng.gen_range(0..1u64 << n), n)?,
        };
    }
    Ok(record)
}
