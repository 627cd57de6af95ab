//! Lowest two eigenpairs of a dense symmetric matrix: Householder reduction
//! to tridiagonal form, Sturm-count bisection for the eigenvalues and inverse
//! iteration for the vectors. Only the two wanted pairs are computed.

/// Dot product with independent partial sums, so the additions pipeline.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for j in 0..8 {
            acc[j] += x[j] * y[j];
        }
    }
    acc.iter().sum::<f64>() + tail
}

/// Householder reduction of a symmetric matrix held in a flat `n × n` buffer.
/// Only the lower triangle is used, and it is overwritten.
pub(crate) struct Tridiagonal {
    pub d: Vec<f64>,
    /// Off-diagonal, `e[i] = T[i, i+1]`.
    pub e: Vec<f64>,
    /// Unit reflector for step `k`, acting on indices `k+1..n`; empty when
    /// the column was already reduced.
    reflectors: Vec<Vec<f64>>,
}

impl Tridiagonal {
    pub fn reduce(a: &mut [f64], n: usize) -> Self {
        debug_assert_eq!(a.len(), n * n);
        let mut d = vec![0.0; n];
        let mut e = vec![0.0; n.saturating_sub(1)];
        let mut reflectors = Vec::with_capacity(n.saturating_sub(2));
        let mut p = vec![0.0; n];
        for k in 0..n.saturating_sub(2) {
            d[k] = a[k * n + k];
            let m = n - k - 1;
            let x0 = a[(k + 1) * n + k];
            let sigma: f64 = (k + 2..n).map(|i| a[i * n + k] * a[i * n + k]).sum();
            if sigma == 0.0 {
                e[k] = x0;
                reflectors.push(Vec::new());
                continue;
            }
            let norm = (x0 * x0 + sigma).sqrt();
            let alpha = if x0 > 0.0 { -norm } else { norm };
            let mut v: Vec<f64> = (k + 1..n).map(|i| a[i * n + k]).collect();
            v[0] = x0 - alpha;
            let vn = (v[0] * v[0] + sigma).sqrt();
            v.iter_mut().for_each(|x| *x /= vn);
            e[k] = alpha;

            // p = 2 A22 v, w = p − (vᵀp) v, A22 ← A22 − v wᵀ − w vᵀ. Only the
            // lower triangle of A22 is read or written.
            let p = &mut p[..m];
            p.iter_mut().for_each(|x| *x = 0.0);
            for r in 0..m {
                let row = &a[(k + 1 + r) * n + k + 1..(k + 1 + r) * n + k + 1 + r];
                let diag = a[(k + 1 + r) * n + k + 1 + r];
                let vr = v[r];
                let (head, rest) = p.split_at_mut(r);
                rest[0] += dot(row, &v[..r]) + diag * vr;
                for (pc, x) in head.iter_mut().zip(row) {
                    *pc += x * vr;
                }
            }
            p.iter_mut().for_each(|x| *x *= 2.0);
            let kk = dot(p, &v);
            p.iter_mut().zip(&v).for_each(|(pi, vi)| *pi -= kk * vi);
            for r in 0..m {
                let (vr, wr) = (v[r], p[r]);
                let start = (k + 1 + r) * n + k + 1;
                let row = &mut a[start..=start + r];
                for ((x, vc), wc) in row.iter_mut().zip(&v[..=r]).zip(&p[..=r]) {
                    *x -= vr * wc + wr * vc;
                }
            }
            reflectors.push(v);
        }
        if n >= 2 {
            d[n - 2] = a[(n - 2) * n + n - 2];
            e[n - 2] = a[(n - 1) * n + n - 2];
        }
        if n >= 1 {
            d[n - 1] = a[(n - 1) * n + n - 1];
        }
        Tridiagonal { d, e, reflectors }
    }

    fn n(&self) -> usize {
        self.d.len()
    }

    /// `max_i |d_i| + |e_{i−1}| + |e_i|`, the ∞-norm of `T`.
    pub fn norm(&self) -> f64 {
        (0..self.n()).map(|i| self.d[i].abs() + self.off(i)).fold(0.0, f64::max)
    }

    fn off(&self, i: usize) -> f64 {
        let left = if i > 0 { self.e[i - 1].abs() } else { 0.0 };
        let right = if i < self.e.len() { self.e[i].abs() } else { 0.0 };
        left + right
    }

    fn pivmin(&self) -> f64 {
        f64::MIN_POSITIVE * self.e.iter().map(|x| x * x).fold(1.0, f64::max)
    }

    /// Number of eigenvalues strictly below each shift. The recurrences for
    /// the shifts are interleaved so their division chains overlap.
    fn counts_below<const K: usize>(&self, xs: [f64; K], pivmin: f64) -> [usize; K] {
        let mut count = [0; K];
        let mut q = [0.0; K];
        for i in 0..self.n() {
            let e2 = if i > 0 { self.e[i - 1] * self.e[i - 1] } else { 0.0 };
            for j in 0..K {
                let mut qj = if i > 0 { self.d[i] - xs[j] - e2 / q[j] } else { self.d[0] - xs[j] };
                if qj.abs() < pivmin {
                    qj = -pivmin;
                }
                count[j] += (qj < 0.0) as usize;
                q[j] = qj;
            }
        }
        count
    }

    /// The two smallest eigenvalues by simultaneous multisection.
    pub fn lowest_eigenvalues(&self) -> (f64, f64) {
        let pivmin = self.pivmin();
        let mut lo = (0..self.n()).map(|i| self.d[i] - self.off(i)).fold(f64::INFINITY, f64::min);
        let mut hi = (0..self.n()).map(|i| self.d[i] + self.off(i)).fold(f64::NEG_INFINITY, f64::max);
        let scale = lo.abs().max(hi.abs());
        lo -= 2.0 * f64::EPSILON * scale + pivmin;
        hi += 2.0 * f64::EPSILON * scale + pivmin;
        // Invariant for bracket k: count(lo) ≤ k < count(hi).
        let mut br = [(lo, hi), (lo, hi)];
        let done = |(a, b): (f64, f64)| {
            let mid = 0.5 * (a + b);
            mid <= a || mid >= b || b - a <= 2.0 * f64::EPSILON * a.abs().max(b.abs()) + pivmin
        };
        for _ in 0..200 {
            let open: Vec<usize> = (0..2).filter(|&k| !done(br[k])).collect();
            let xs: [f64; 4] = match open.as_slice() {
                [] => break,
                [k] => {
                    let (a, b) = br[*k];
                    [1.0, 2.0, 3.0, 4.0].map(|j| a + (b - a) * j / 5.0)
                }
                _ => {
                    let ((a0, b0), (a1, b1)) = (br[0], br[1]);
                    [a0 + (b0 - a0) / 3.0, a0 + (b0 - a0) * 2.0 / 3.0, a1 + (b1 - a1) / 3.0, a1 + (b1 - a1) * 2.0 / 3.0]
                }
            };
            let counts = self.counts_below(xs, pivmin);
            for (x, c) in xs.into_iter().zip(counts) {
                for (k, (a, b)) in br.iter_mut().enumerate() {
                    if x > *a && x < *b {
                        if c > k {
                            *b = x;
                        } else {
                            *a = x;
                        }
                    }
                }
            }
        }
        (0.5 * (br[0].0 + br[0].1), 0.5 * (br[1].0 + br[1].1))
    }

    /// Eigenvector of `T` for the (accurate) eigenvalue `lambda` by inverse
    /// iteration, kept orthogonal to `against`.
    pub fn inverse_iteration(&self, lambda: f64, start: Vec<f64>, against: Option<&[f64]>) -> Vec<f64> {
        let n = self.n();
        let tiny = f64::EPSILON * self.norm().max(f64::MIN_POSITIVE);
        let lu = ShiftedLu::new(&self.d, &self.e, lambda, tiny);
        let mut x = start;
        for _ in 0..3 {
            lu.solve(&mut x);
            if let Some(u) = against {
                let c: f64 = x.iter().zip(u).map(|(a, b)| a * b).sum();
                x.iter_mut().zip(u).for_each(|(a, b)| *a -= c * b);
            }
            let norm = x.iter().map(|a| a * a).sum::<f64>().sqrt();
            if norm == 0.0 || !norm.is_finite() {
                // Only reachable through overflow; restart from a fresh vector.
                x = (0..n).map(|i| 1.0 + i as f64 * 1e-3).collect();
                continue;
            }
            x.iter_mut().for_each(|a| *a /= norm);
        }
        x
    }

    /// Maps a vector of `T` back to the original basis.
    pub fn back_transform(&self, y: &mut [f64]) {
        for (k, v) in self.reflectors.iter().enumerate().rev() {
            if v.is_empty() {
                continue;
            }
            let tail = &mut y[k + 1..];
            let c = 2.0 * tail.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
            tail.iter_mut().zip(v).for_each(|(a, b)| *a -= c * b);
        }
    }
}

/// LU factors of `T − λI` with partial pivoting; `U` has two superdiagonals.
struct ShiftedLu {
    u0: Vec<f64>,
    u1: Vec<f64>,
    u2: Vec<f64>,
    mult: Vec<f64>,
    swapped: Vec<bool>,
}

impl ShiftedLu {
    fn new(d: &[f64], e: &[f64], lambda: f64, tiny: f64) -> Self {
        let n = d.len();
        let guard = |x: f64| if x.abs() < tiny { if x < 0.0 { -tiny } else { tiny } } else { x };
        let mut lu = ShiftedLu {
            u0: vec![0.0; n],
            u1: vec![0.0; n],
            u2: vec![0.0; n],
            mult: vec![0.0; n],
            swapped: vec![false; n],
        };
        let mut c0 = d[0] - lambda;
        let mut c1 = if n > 1 { e[0] } else { 0.0 };
        for i in 0..n.saturating_sub(1) {
            let n0 = e[i];
            let n1 = d[i + 1] - lambda;
            let n2 = if i + 2 < n { e[i + 1] } else { 0.0 };
            if c0.abs() >= n0.abs() {
                let p = guard(c0);
                let m = n0 / p;
                lu.u0[i] = p;
                lu.u1[i] = c1;
                lu.mult[i] = m;
                c0 = n1 - m * c1;
                c1 = n2;
            } else {
                let m = c0 / n0;
                lu.u0[i] = n0;
                lu.u1[i] = n1;
                lu.u2[i] = n2;
                lu.mult[i] = m;
                lu.swapped[i] = true;
                c0 = c1 - m * n1;
                c1 = -m * n2;
            }
        }
        lu.u0[n - 1] = guard(c0);
        lu
    }

    fn solve(&self, b: &mut [f64]) {
        let n = b.len();
        for i in 0..n.saturating_sub(1) {
            if self.swapped[i] {
                b.swap(i, i + 1);
            }
            b[i + 1] -= self.mult[i] * b[i];
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            if i + 1 < n {
                s -= self.u1[i] * b[i + 1];
            }
            if i + 2 < n {
                s -= self.u2[i] * b[i + 2];
            }
            b[i] = s / self.u0[i];
        }
    }
}

/// `(e0, e1, vectors)` for the symmetric matrix in `a` (flat, full storage).
pub(crate) type VectorPair = (Vec<f64>, Vec<f64>);

pub(crate) fn lowest_two(a: &mut [f64], n: usize, with_vectors: bool) -> (f64, f64, Option<VectorPair>) {
    let t = Tridiagonal::reduce(a, n);
    let (e0, e1) = t.lowest_eigenvalues();
    if !with_vectors {
        return (e0, e1, None);
    }
    let ones = vec![1.0; n];
    let mut v0 = t.inverse_iteration(e0, ones, None);
    // A start vector unrelated to the first keeps a degenerate pair apart.
    let start: Vec<f64> = (0..n).map(|i| ((i as f64 + 1.0) * 0.618_033_988_749_895).fract() - 0.5).collect();
    let mut v1 = t.inverse_iteration(e1, start, Some(&v0));
    t.back_transform(&mut v0);
    t.back_transform(&mut v1);
    (e0, e1, Some((v0, v1)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, SymmetricEigen};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_symmetric(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let m = DMatrix::from_fn(n, n, |_, _| rng.gen::<f64>() - 0.5);
        (&m + m.transpose()) * 0.5
    }

    fn check(a: &DMatrix<f64>) {
        let n = a.nrows();
        let mut buf = a.as_slice().to_vec();
        let (e0, e1, vecs) = lowest_two(&mut buf, n, true);
        let mut ev: Vec<f64> = SymmetricEigen::new(a.clone()).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        let scale = a.amax().max(1.0);
        assert!((e0 - ev[0]).abs() < 1e-12 * scale * n as f64, "{e0} vs {}", ev[0]);
        assert!((e1 - ev[1]).abs() < 1e-12 * scale * n as f64, "{e1} vs {}", ev[1]);
        let (v0, v1) = vecs.unwrap();
        for (v, e) in [(&v0, e0), (&v1, e1)] {
            let x = nalgebra::DVector::from_column_slice(v);
            assert!((x.norm() - 1.0).abs() < 1e-12);
            let r = (a * &x - &x * e).amax();
            assert!(r < 1e-10 * scale, "residual {r}");
        }
        let dot: f64 = v0.iter().zip(&v1).map(|(a, b)| a * b).sum();
        assert!(dot.abs() < 1e-10);
    }

    #[test]
    fn matches_full_decomposition_on_random_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in [2, 3, 4, 5, 8, 16, 33, 64] {
            for _ in 0..10 {
                check(&random_symmetric(n, &mut rng));
            }
        }
    }

    #[test]
    fn handles_degenerate_and_split_matrices() {
        check(&DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![3.0, 1.0, 1.0, 2.0])));
        check(&DMatrix::identity(6, 6));
        // Hypercube adjacency on 3 qubits: lowest level −3 is simple, −1 is
        // threefold.
        let mut h = DMatrix::zeros(8, 8);
        for z in 0..8 {
            for k in 0..3 {
                h[(z, z ^ (1 << k))] = 1.0;
            }
        }
        check(&(-h.clone()));
        check(&h);
        let mut block = DMatrix::zeros(4, 4);
        block[(0, 1)] = 1.0;
        block[(1, 0)] = 1.0;
        block[(2, 3)] = 1.0;
        block[(3, 2)] = 1.0;
        check(&block);
    }

    #[test]
    fn nearly_degenerate_pair() {
        let mut a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![0.0, 1e-9, 1.0, 2.0, 3.0]));
        a[(0, 4)] = 1e-3;
        a[(4, 0)] = 1e-3;
        a[(1, 3)] = 1e-3;
        a[(3, 1)] = 1e-3;
        check(&a);
    }
}
