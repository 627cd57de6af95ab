//! Low-lying spectrum along a schedule: the two lowest levels, the minimum
//! gap and its location, and the matrix element `E = max |⟨E₁|dH/ds|E₀⟩|`.

use std::io::Write;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::{assemble, derivative, DenseSymmetricMatrix, Mode, ScheduleSpec};
use crate::search::golden_section;

pub const DEFAULT_GRID_POINTS: usize = 201;
pub const DEFAULT_S_TOLERANCE: f64 = 1e-6;
/// Dimensions above this use the Lanczos path.
pub const DENSE_LIMIT: usize = 1 << 10;

/// Two lowest eigenvalues, `e0 ≤ e1`, with optional eigenvectors.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair2 {
    pub e0: f64,
    pub e1: f64,
    pub v0: Option<Vec<f64>>,
    pub v1: Option<Vec<f64>>,
}

impl EigenPair2 {
    pub fn gap(&self) -> f64 {
        self.e1 - self.e0
    }
}

#[derive(Debug, Clone, Copy)]
pub struct EigenSolver {
    pub dense_limit: usize,
    pub lanczos_max_iter: usize,
    /// Residual target for Lanczos Ritz pairs, relative to `‖H‖∞`.
    pub lanczos_tol: f64,
}

impl Default for EigenSolver {
    fn default() -> Self {
        EigenSolver { dense_limit: DENSE_LIMIT, lanczos_max_iter: 500, lanczos_tol: 1e-10 }
    }
}

fn validate(m: &DenseSymmetricMatrix) -> Result<()> {
    if m.dim() < 2 {
        return Err(Error::input("need a matrix of dimension ≥ 2 for two eigenvalues"));
    }
    if m.as_matrix().iter().any(|x| !x.is_finite()) {
        return Err(Error::input("matrix has non-finite entries"));
    }
    Ok(())
}

fn two_smallest(values: impl Iterator<Item = f64>) -> (usize, usize) {
    let mut best = (usize::MAX, f64::INFINITY);
    let mut second = (usize::MAX, f64::INFINITY);
    for (i, v) in values.enumerate() {
        if v < best.1 {
            second = best;
            best = (i, v);
        } else if v < second.1 {
            second = (i, v);
        }
    }
    (best.0, second.0)
}

fn unit(dim: usize, i: usize) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    v[i] = 1.0;
    v
}

impl EigenSolver {
    pub fn lowest_two(&self, m: &DenseSymmetricMatrix, with_vectors: bool) -> Result<EigenPair2> {
        validate(m)?;
        let dim = m.dim();
        if m.is_diagonal() {
            let d = m.as_matrix().diagonal();
            let (i0, i1) = two_smallest(d.iter().copied());
            return Ok(EigenPair2 {
                e0: d[i0],
                e1: d[i1],
                v0: with_vectors.then(|| unit(dim, i0)),
                v1: with_vectors.then(|| unit(dim, i1)),
            });
        }
        if dim > self.dense_limit {
            return self.lanczos(m.as_matrix());
        }
        let mut buf = m.as_matrix().as_slice().to_vec();
        let (e0, e1, vectors) = crate::tridiagonal::lowest_two(&mut buf, dim, with_vectors);
        let (v0, v1) = vectors.unzip();
        Ok(EigenPair2 { e0, e1, v0, v1 })
    }

    /// Lanczos with full reorthogonalization from a fixed pseudo-random start.
    /// A degenerate lowest level yields only one vector of its eigenspace, so
    /// exact degeneracies are reported with the next distinct level as `e1`.
    fn lanczos(&self, a: &DMatrix<f64>) -> Result<EigenPair2> {
        let dim = a.nrows();
        let norm = a.row_iter().map(|r| r.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max);
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        let mut q = DVector::from_fn(dim, |_, _| rng.gen::<f64>() - 0.5);
        q /= q.norm();

        let max_iter = self.lanczos_max_iter.min(dim);
        let mut basis: Vec<DVector<f64>> = Vec::with_capacity(max_iter);
        let mut alpha = Vec::with_capacity(max_iter);
        let mut beta: Vec<f64> = Vec::with_capacity(max_iter);

        for j in 0..max_iter {
            let mut w = a * &q;
            let aj = q.dot(&w);
            basis.push(q.clone());
            alpha.push(aj);
            for _ in 0..2 {
                for b in &basis {
                    let c = b.dot(&w);
                    w.axpy(-c, b, 1.0);
                }
            }
            let bj = w.norm();
            let k = alpha.len();
            let exhausted = bj <= 1e-13 * norm.max(1.0) || k == max_iter;
            if k >= 2 && (exhausted || j % 5 == 4) {
                let t = tridiagonal(&alpha, &beta);
                let eig = SymmetricEigen::new(t);
                let (i0, i1) = two_smallest(eig.eigenvalues.iter().copied());
                let res = |i: usize| bj * eig.eigenvectors[(k - 1, i)].abs();
                let converged = res(i0).max(res(i1)) <= self.lanczos_tol * norm.max(1.0);
                if converged || exhausted {
                    if !converged && bj > 1e-13 * norm.max(1.0) {
                        return Err(Error::Accuracy(format!(
                            "Lanczos did not converge in {max_iter} iterations (residual {:.3e})",
                            res(i0).max(res(i1))
                        )));
                    }
                    let ritz = |i: usize| -> Vec<f64> {
                        let mut v = DVector::zeros(dim);
                        for (b, &y) in basis.iter().zip(eig.eigenvectors.column(i).iter()) {
                            v.axpy(y, b, 1.0);
                        }
                        let n = v.norm();
                        (v / n).iter().copied().collect()
                    };
                    return Ok(EigenPair2 {
                        e0: eig.eigenvalues[i0],
                        e1: eig.eigenvalues[i1],
                        v0: Some(ritz(i0)),
                        v1: Some(ritz(i1)),
                    });
                }
            }
            if exhausted {
                break;
            }
            beta.push(bj);
            q = w / bj;
        }
        Err(Error::Accuracy("Lanczos basis exhausted before two Ritz values were available".into()))
    }
}

fn tridiagonal(alpha: &[f64], beta: &[f64]) -> DMatrix<f64> {
    let k = alpha.len();
    let mut t = DMatrix::zeros(k, k);
    for i in 0..k {
        t[(i, i)] = alpha[i];
        if i + 1 < k {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    t
}

/// Two lowest eigenpairs with the default solver.
pub fn lowest_two(m: &DenseSymmetricMatrix) -> Result<EigenPair2> {
    EigenSolver::default().lowest_two(m, true)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapSample {
    pub s: f64,
    pub e0: f64,
    pub e1: f64,
}

impl GapSample {
    pub fn gap(&self) -> f64 {
        self.e1 - self.e0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapScanResult {
    pub samples: Vec<GapSample>,
    pub g_min: f64,
    pub s_star: f64,
    /// Whether golden-section refinement improved on the best grid sample.
    pub refined: bool,
}

impl GapScanResult {
    /// Whether the minimum lies strictly inside `(0, 1)`.
    pub fn interior(&self) -> bool {
        self.s_star > 0.0 && self.s_star < 1.0
    }

    /// CSV with columns `s,e0,e1,gap`.
    pub fn write_curve_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["s", "e0", "e1", "gap"])?;
        for p in &self.samples {
            wtr.write_record([p.s.to_string(), p.e0.to_string(), p.e1.to_string(), p.gap().to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsilonReport {
    pub value: f64,
    pub s_at_max: f64,
    /// Grid points where the two lowest levels coincide.
    pub degenerate_points: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct ScanOptions {
    pub grid_points: usize,
    pub s_tolerance: f64,
    pub solver: EigenSolver,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions { grid_points: DEFAULT_GRID_POINTS, s_tolerance: DEFAULT_S_TOLERANCE, solver: EigenSolver::default() }
    }
}

impl ScanOptions {
    pub fn with_grid(grid_points: usize) -> Self {
        ScanOptions { grid_points, ..Default::default() }
    }

    fn grid(&self) -> Result<Vec<f64>> {
        if self.grid_points < 3 {
            return Err(Error::input(format!("gap scan needs at least 3 grid points, got {}", self.grid_points)));
        }
        let last = (self.grid_points - 1) as f64;
        Ok((0..self.grid_points).map(|i| if i + 1 == self.grid_points { 1.0 } else { i as f64 / last }).collect())
    }
}

/// Relative threshold under which the two lowest levels count as degenerate.
const DEGENERACY_TOL: f64 = 1e-12;

fn transition_element(d: &DenseSymmetricMatrix, pair: &EigenPair2) -> Result<(f64, bool)> {
    let (v0, v1) = match (&pair.v0, &pair.v1) {
        (Some(a), Some(b)) => (DVector::from_column_slice(a), DVector::from_column_slice(b)),
        _ => return Err(Error::State("eigenvectors were not computed".into())),
    };
    let dm = d.as_matrix();
    let dv0 = dm * &v0;
    let scale = pair.e0.abs().max(pair.e1.abs()).max(1.0);
    if pair.gap() <= DEGENERACY_TOL * scale {
        // Maximize |⟨u1|D|u0⟩| over orthonormal pairs of span{v0, v1}: the
        // restriction [[p, q], [q, r]] gives sqrt(((r − p)/2)² + q²).
        let p = v0.dot(&dv0);
        let q = v1.dot(&dv0);
        let r = v1.dot(&(dm * &v1));
        return Ok((((r - p) / 2.0).hypot(q), true));
    }
    Ok((v1.dot(&dv0).abs(), false))
}

/// Uniform-grid scan of `E₁ − E₀`, optionally accumulating the transition
/// matrix element on the same grid, then golden-section refinement of the
/// gap around the best grid point.
pub fn scan_profile(
    schedule: &ScheduleSpec,
    opts: &ScanOptions,
    with_epsilon: bool,
) -> Result<(GapScanResult, Option<EpsilonReport>)> {
    let grid = opts.grid()?;
    let mut samples = Vec::with_capacity(grid.len());
    let mut eps = EpsilonReport { value: 0.0, s_at_max: 0.0, degenerate_points: Vec::new() };
    for &s in &grid {
        let h = assemble(schedule, s)?;
        let pair = opts.solver.lowest_two(&h, with_epsilon)?;
        if with_epsilon {
            let d = derivative(schedule, s)?;
            let (value, degenerate) = transition_element(&d, &pair)?;
            if degenerate {
                eps.degenerate_points.push(s);
            }
            if value > eps.value {
                eps.value = value;
                eps.s_at_max = s;
            }
        }
        samples.push(GapSample { s, e0: pair.e0, e1: pair.e1 });
    }

    let (best, _) = samples
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, p)| if p.gap() < acc.1 { (i, p.gap()) } else { acc });
    let lo = grid[best.saturating_sub(1)];
    let hi = grid[(best + 1).min(grid.len() - 1)];
    let refined = golden_section(
        |s| opts.solver.lowest_two(&assemble(schedule, s)?, false).map(|p| p.gap()),
        lo,
        hi,
        opts.s_tolerance,
    )?;
    let grid_best = samples[best];
    let scan = if refined.value < grid_best.gap() {
        GapScanResult { samples, g_min: refined.value, s_star: refined.x, refined: true }
    } else {
        GapScanResult { g_min: grid_best.gap(), s_star: grid_best.s, samples, refined: false }
    };
    Ok((scan, with_epsilon.then_some(eps)))
}

pub fn scan_gap(schedule: &ScheduleSpec, grid_points: usize) -> Result<GapScanResult> {
    scan_profile(schedule, &ScanOptions::with_grid(grid_points), false).map(|(scan, _)| scan)
}

/// `max_s |⟨E₁(s)| dH/ds |E₀(s)⟩|` over the uniform grid.
pub fn epsilon_measured(schedule: &ScheduleSpec, grid_points: usize) -> Result<EpsilonReport> {
    let grid = ScanOptions::with_grid(grid_points).grid()?;
    let solver = EigenSolver::default();
    let mut eps = EpsilonReport { value: 0.0, s_at_max: 0.0, degenerate_points: Vec::new() };
    for s in grid {
        let pair = solver.lowest_two(&assemble(schedule, s)?, true)?;
        let (value, degenerate) = transition_element(&derivative(schedule, s)?, &pair)?;
        if degenerate {
            eps.degenerate_points.push(s);
        }
        if value > eps.value {
            eps.value = value;
            eps.s_at_max = s;
        }
    }
    Ok(eps)
}

/// Triangle/Cauchy–Schwarz bound `N(α + 1 + 9|δ|)` for the guess-seeded
/// schedule with the default hat.
pub fn epsilon_upper_bound(n: usize, alpha: f64, delta: f64) -> f64 {
    n as f64 * (alpha + 1.0 + 9.0 * delta.abs())
}

/// Same bound for the linear schedule, whose derivative `H_f − Driver` is
/// bounded by `M + |δ|N = N(α + |δ|)`.
pub fn epsilon_upper_bound_linear(n: usize, alpha: f64, delta: f64) -> f64 {
    n as f64 * (alpha + delta.abs())
}

pub fn epsilon_bound_for(mode: Mode, n: usize, alpha: f64, delta: f64) -> f64 {
    match mode {
        Mode::Saqc => epsilon_upper_bound(n, alpha, delta),
        Mode::Caqc => epsilon_upper_bound_linear(n, alpha, delta),
    }
}

/// `E / g_min²`: the scale the adiabatic runtime must exceed. An indicator,
/// not a guarantee.
pub fn runtime_estimate(e_measured: f64, g_min: f64) -> Result<f64> {
    if !(g_min > 0.0) {
        return Err(Error::DegenerateGap(format!("minimum gap {g_min} gives no finite runtime scale")));
    }
    Ok(e_measured / (g_min * g_min))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EBound {
    pub e_measured: f64,
    pub e_upper: f64,
    pub tau_lower_estimate: f64,
}

impl EBound {
    pub fn new(e_measured: f64, e_upper: f64, g_min: f64) -> Result<Self> {
        Ok(EBound { e_measured, e_upper, tau_lower_estimate: runtime_estimate(e_measured, g_min)? })
    }
}
