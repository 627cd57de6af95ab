//! Brute-force reference implementations shared by the integration tests.
//! Nothing here calls into the crate's numerical code.

#![allow(dead_code)]

use num_complex::Complex64;
use saqc_core::sat::CnfInstance;

pub type Dense = Vec<Vec<f64>>;

pub fn zeros(n: usize) -> Dense {
    vec![vec![0.0; n]; n]
}

pub fn kron(a: &Dense, b: &Dense) -> Dense {
    let (ra, rb) = (a.len(), b.len());
    let mut out = zeros(ra * rb);
    for i in 0..ra {
        for j in 0..ra {
            for k in 0..rb {
                for l in 0..rb {
                    out[i * rb + k][j * rb + l] = a[i][j] * b[k][l];
                }
            }
        }
    }
    out
}

pub fn add_scaled(acc: &mut Dense, m: &Dense, c: f64) {
    for (ra, rm) in acc.iter_mut().zip(m) {
        for (x, y) in ra.iter_mut().zip(rm) {
            *x += c * y;
        }
    }
}

fn identity2() -> Dense {
    vec![vec![1.0, 0.0], vec![0.0, 1.0]]
}

/// Single-qubit operator `op` on qubit `q` (qubit 0 is the least significant
/// bit of the basis index) of an `n`-qubit register.
pub fn on_qubit(op: &Dense, q: usize, n: usize) -> Dense {
    let mut out = vec![vec![1.0]];
    for k in (0..n).rev() {
        let factor = if k == q { op.clone() } else { identity2() };
        out = kron(&out, &factor);
    }
    out
}

/// Projector onto the single-qubit value `b`.
pub fn projector(b: bool) -> Dense {
    if b {
        vec![vec![0.0, 0.0], vec![0.0, 1.0]]
    } else {
        vec![vec![1.0, 0.0], vec![0.0, 0.0]]
    }
}

/// `δ Σ_q ½(I − σˣ_q)` from explicit Kronecker products.
pub fn driver(n: usize, delta: f64) -> Dense {
    let q = vec![vec![0.5, -0.5], vec![-0.5, 0.5]];
    let mut out = zeros(1 << n);
    for k in 0..n {
        add_scaled(&mut out, &on_qubit(&q, k, n), delta);
    }
    out
}

/// `Σ_q |1 − g_q⟩⟨1 − g_q|`: one unit of energy per bit differing from `guess`.
pub fn guess_penalty(n: usize, guess: u64) -> Dense {
    let mut out = zeros(1 << n);
    for k in 0..n {
        let flipped = (guess >> k) & 1 == 0;
        add_scaled(&mut out, &on_qubit(&projector(flipped), k, n), 1.0);
    }
    out
}

/// Sum over clauses of the tensor product of projectors onto the values that
/// falsify each literal.
pub fn clause_penalty(inst: &CnfInstance) -> Dense {
    let n = inst.n();
    let mut out = zeros(1 << n);
    for clause in inst.clauses() {
        let mut term = vec![vec![1.0]];
        for k in (0..n).rev() {
            let lit = clause.literals().iter().find(|l| l.variable as usize == k + 1);
            let factor = match lit {
                // A positive literal is false when the variable is 0.
                Some(l) => projector(l.negated),
                None => identity2(),
            };
            term = kron(&term, &factor);
        }
        add_scaled(&mut out, &term, 1.0);
    }
    out
}

/// Literal-by-literal clause evaluation on a basis index.
pub fn violated_clauses(inst: &CnfInstance, z: u64) -> u32 {
    inst.clauses()
        .iter()
        .filter(|c| {
            c.literals().iter().all(|l| {
                let value = (z >> (l.variable - 1)) & 1 == 1;
                value == l.negated
            })
        })
        .count() as u32
}

pub fn hat(s: f64) -> f64 {
    3.0 * s * (1.0 - s)
}

/// Guess-seeded schedule `(1−s)H_i + 3s(1−s)D + sH_f` built from scratch.
pub fn saqc_matrix(inst: &CnfInstance, guess: u64, delta: f64, s: f64) -> Dense {
    let n = inst.n();
    let mut h = zeros(1 << n);
    add_scaled(&mut h, &guess_penalty(n, guess), 1.0 - s);
    add_scaled(&mut h, &driver(n, delta), hat(s));
    add_scaled(&mut h, &clause_penalty(inst), s);
    h
}

/// Linear schedule `(1−s)D + sH_f`.
pub fn caqc_matrix(inst: &CnfInstance, delta: f64, s: f64) -> Dense {
    let n = inst.n();
    let mut h = zeros(1 << n);
    add_scaled(&mut h, &driver(n, delta), 1.0 - s);
    add_scaled(&mut h, &clause_penalty(inst), s);
    h
}

/// Cyclic Jacobi eigen-decomposition. Returns ascending eigenvalues and the
/// matching eigenvectors as columns of `v` (`v[row][col]`).
pub fn jacobi_eigen(a: &Dense) -> (Vec<f64>, Dense) {
    let n = a.len();
    let mut a = a.clone();
    let mut v = zeros(n);
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j] * a[i][j]).sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i][i].total_cmp(&a[j][j]));
    let values = order.iter().map(|&i| a[i][i]).collect();
    let vectors = (0..n).map(|r| order.iter().map(|&c| v[r][c]).collect()).collect();
    (values, vectors)
}

/// Piecewise-constant propagation: on each of `steps` equal slices `H` is
/// frozen at the slice midpoint and applied exactly through its Jacobi
/// eigen-decomposition.
pub fn piecewise_propagate(h_of_s: impl Fn(f64) -> Dense, tau: f64, steps: usize, psi0: &[Complex64]) -> Vec<Complex64> {
    let n = psi0.len();
    let dt = 1.0 / steps as f64;
    let mut psi = psi0.to_vec();
    for k in 0..steps {
        let (vals, vecs) = jacobi_eigen(&h_of_s((k as f64 + 0.5) * dt));
        let mut coeff = vec![Complex64::new(0.0, 0.0); n];
        for (j, c) in coeff.iter_mut().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for (z, p) in psi.iter().enumerate() {
                acc += p * vecs[z][j];
            }
            *c = acc * Complex64::from_polar(1.0, -tau * dt * vals[j]);
        }
        for (z, p) in psi.iter_mut().enumerate() {
            *p = coeff.iter().enumerate().map(|(j, c)| c * vecs[z][j]).sum();
        }
    }
    psi
}

pub fn max_abs_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

pub fn binomial(n: usize, k: usize) -> usize {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}
