//! Small linear-algebra layer shared by the spin, phonon and Fock-space models:
//! a complex CSR matrix, Lanczos ground states and Krylov propagation.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("Lanczos did not converge: residual {residual:.3e} after {iterations} iterations")]
    NoConvergence { residual: f64, iterations: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
}

/// Square complex matrix in compressed sparse row form.
#[derive(Debug, Clone)]
pub struct Csr {
    n: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<C64>,
}

impl Csr {
    /// Build from (row, col, value) triplets; duplicates are summed, exact zeros dropped.
    pub fn from_triplets(n: usize, mut t: Vec<(usize, usize, C64)>) -> Self {
        t.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut indptr = vec![0usize; n + 1];
        let mut indices = Vec::with_capacity(t.len());
        let mut values: Vec<C64> = Vec::with_capacity(t.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in t {
            assert!(r < n && c < n, "triplet ({r},{c}) outside {n}x{n}");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                values.push(v);
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..n {
            indptr[i + 1] += indptr[i];
        }
        let mut m = Csr { n, indptr, indices, values };
        m.prune();
        m
    }

    fn prune(&mut self) {
        let mut indptr = vec![0usize; self.n + 1];
        let mut indices = Vec::with_capacity(self.indices.len());
        let mut values = Vec::with_capacity(self.values.len());
        for r in 0..self.n {
            for k in self.indptr[r]..self.indptr[r + 1] {
                if self.values[k] != C64::new(0.0, 0.0) {
                    indices.push(self.indices[k]);
                    values.push(self.values[k]);
                }
            }
            indptr[r + 1] = indices.len();
        }
        self.indptr = indptr;
        self.indices = indices;
        self.values = values;
    }

    pub fn from_dense(m: &DMatrix<C64>) -> Self {
        let mut t = Vec::new();
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                if m[(r, c)] != C64::new(0.0, 0.0) {
                    t.push((r, c, m[(r, c)]));
                }
            }
        }
        Csr::from_triplets(m.nrows(), t)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        let row = &self.indices[self.indptr[r]..self.indptr[r + 1]];
        match row.binary_search(&c) {
            Ok(k) => self.values[self.indptr[r] + k],
            Err(_) => C64::new(0.0, 0.0),
        }
    }

    /// Iterate over stored entries of one row.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        (self.indptr[r]..self.indptr[r + 1]).map(move |k| (self.indices[k], self.values[k]))
    }

    pub fn matvec(&self, x: &[C64], y: &mut [C64]) {
        for r in 0..self.n {
            let mut acc = C64::new(0.0, 0.0);
            for k in self.indptr[r]..self.indptr[r + 1] {
                acc += self.values[k] * x[self.indices[k]];
            }
            y[r] = acc;
        }
    }

    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![C64::new(0.0, 0.0); self.n];
        self.matvec(x, &mut y);
        y
    }

    /// ⟨x|A|x⟩.
    pub fn expectation(&self, x: &[C64]) -> C64 {
        dot(x, &self.apply(x))
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for r in 0..self.n {
            for (c, v) in self.row(r) {
                m[(r, c)] = v;
            }
        }
        m
    }

    /// a·self + b·other.
    pub fn combine(&self, a: C64, other: &Csr, b: C64) -> Csr {
        assert_eq!(self.n, other.n);
        let mut t = Vec::with_capacity(self.nnz() + other.nnz());
        for r in 0..self.n {
            t.extend(self.row(r).map(|(c, v)| (r, c, a * v)));
            t.extend(other.row(r).map(|(c, v)| (r, c, b * v)));
        }
        Csr::from_triplets(self.n, t)
    }

    pub fn scale(&self, a: f64) -> Csr {
        let mut m = self.clone();
        m.values.iter_mut().for_each(|v| *v *= a);
        m
    }

    /// Largest |A_ij − conj(A_ji)|.
    pub fn hermiticity_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for r in 0..self.n {
            for (c, v) in self.row(r) {
                worst = worst.max((v - self.get(c, r).conj()).norm());
            }
        }
        worst
    }

    /// Gershgorin bound on the spectral radius.
    pub fn norm_bound(&self) -> f64 {
        (0..self.n)
            .map(|r| self.row(r).map(|(_, v)| v.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

pub fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

pub fn normalize(a: &mut [C64]) -> f64 {
    let n = norm(a);
    if n > 0.0 {
        a.iter_mut().for_each(|x| *x /= n);
    }
    n
}

/// Eigen-decomposition of a Hermitian matrix with eigenvalues ascending.
pub struct Spectrum {
    pub values: Vec<f64>,
    pub vectors: DMatrix<C64>,
}

pub fn eigh(h: &DMatrix<C64>) -> Spectrum {
    let eig = SymmetricEigen::new(h.clone());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(h.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    Spectrum { values, vectors }
}

/// Real symmetric eigen-decomposition, ascending.
pub fn eigh_real(h: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(h.clone());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(h.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

impl Spectrum {
    /// exp(−i H t) ψ using the stored decomposition.
    pub fn propagate(&self, psi: &[C64], t: f64) -> Vec<C64> {
        let v = &self.vectors;
        let coeffs: Vec<C64> = (0..v.ncols())
            .map(|k| {
                let c: C64 = (0..v.nrows()).map(|r| v[(r, k)].conj() * psi[r]).sum();
                c * C64::from_polar(1.0, -self.values[k] * t)
            })
            .collect();
        (0..v.nrows())
            .map(|r| (0..v.ncols()).map(|k| v[(r, k)] * coeffs[k]).sum())
            .collect()
    }

    pub fn vector(&self, k: usize) -> Vec<C64> {
        self.vectors.column(k).iter().copied().collect()
    }
}

/// Deterministic pseudo-random start vector.
fn start_vector(n: usize) -> Vec<C64> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_1a2c);
    let mut v: Vec<C64> = (0..n).map(|_| C64::new(rng.gen::<f64>() - 0.5, 0.0)).collect();
    normalize(&mut v);
    v
}

pub struct GroundState {
    pub energy: f64,
    pub vector: Vec<C64>,
    pub residual: f64,
}

/// Lowest eigenpair of a Hermitian operator by Lanczos with full reorthogonalization.
/// Small problems fall through to dense diagonalization.
pub fn ground_state(h: &Csr, tol: f64, max_iter: usize) -> Result<GroundState, LinalgError> {
    let n = h.dim();
    if n <= 400 {
        let s = eigh(&h.to_dense());
        let vector = s.vector(0);
        return Ok(GroundState { energy: s.values[0], residual: residual(h, s.values[0], &vector), vector });
    }
    let mut basis: Vec<Vec<C64>> = vec![start_vector(n)];
    let mut alpha = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut w = vec![C64::new(0.0, 0.0); n];
    let mut last_res = f64::INFINITY;
    for it in 0..max_iter.min(n) {
        h.matvec(&basis[it], &mut w);
        let a = dot(&basis[it], &w).re;
        alpha.push(a);
        for b in &basis {
            let c = dot(b, &w);
            w.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
        }
        for b in &basis {
            let c = dot(b, &w);
            w.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
        }
        let bnext = norm(&w);
        let m = alpha.len();
        let last = it + 1 == max_iter.min(n);
        if m % 8 != 0 && bnext >= 1e-14 && !last {
            beta.push(bnext);
            basis.push(w.iter().map(|x| x / bnext).collect());
            continue;
        }
        let (e0, y) = tridiag_lowest(&alpha, &beta);
        let res = bnext * y[m - 1].abs();
        last_res = res;
        if res < tol || bnext < 1e-14 || last {
            let mut vector = vec![C64::new(0.0, 0.0); n];
            for (k, b) in basis.iter().enumerate() {
                let c = y[k];
                vector.iter_mut().zip(b).for_each(|(x, y)| *x += c * y);
            }
            normalize(&mut vector);
            let r = residual(h, e0, &vector);
            if res < tol || bnext < 1e-14 || r < tol {
                return Ok(GroundState { energy: e0, vector, residual: r });
            }
            break;
        }
        beta.push(bnext);
        basis.push(w.iter().map(|x| x / bnext).collect());
    }
    Err(LinalgError::NoConvergence { residual: last_res, iterations: alpha.len() })
}

fn residual(h: &Csr, e: f64, v: &[C64]) -> f64 {
    let hv = h.apply(v);
    norm(&hv.iter().zip(v).map(|(a, b)| a - e * b).collect::<Vec<_>>())
}

/// Lowest eigenpair of a symmetric tridiagonal matrix: Sturm bisection, then inverse iteration.
fn tridiag_lowest(alpha: &[f64], beta: &[f64]) -> (f64, Vec<f64>) {
    let m = alpha.len();
    if m == 1 {
        return (alpha[0], vec![1.0]);
    }
    let count_below = |x: f64| -> usize {
        let mut c = 0;
        let mut q = alpha[0] - x;
        if q < 0.0 {
            c += 1;
        }
        for i in 1..m {
            let denom = if q == 0.0 { 1e-300 } else { q };
            q = alpha[i] - x - beta[i - 1] * beta[i - 1] / denom;
            if q < 0.0 {
                c += 1;
            }
        }
        c
    };
    let radius = (0..m)
        .map(|i| {
            let l = if i > 0 { beta[i - 1].abs() } else { 0.0 };
            let r = if i + 1 < m { beta[i].abs() } else { 0.0 };
            alpha[i].abs() + l + r
        })
        .fold(0.0, f64::max);
    let (mut lo, mut hi) = (-radius - 1.0, radius + 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if count_below(mid) >= 1 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let lambda = 0.5 * (lo + hi);
    let shift = lambda - 1e-10 * (1.0 + lambda.abs());
    let mut x = vec![1.0; m];
    for _ in 0..4 {
        // Thomas algorithm on (T - shift) y = x
        let mut c = vec![0.0; m];
        let mut d = vec![0.0; m];
        let mut b0 = alpha[0] - shift;
        c[0] = beta[0] / b0;
        d[0] = x[0] / b0;
        for i in 1..m {
            b0 = alpha[i] - shift - beta[i - 1] * c[i - 1];
            if i + 1 < m {
                c[i] = beta[i] / b0;
            }
            d[i] = (x[i] - beta[i - 1] * d[i - 1]) / b0;
        }
        for i in (0..m - 1).rev() {
            d[i] -= c[i] * d[i + 1];
        }
        let nrm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
        x = d.iter().map(|v| v / nrm).collect();
    }
    (lambda, x)
}

fn tridiag_eig(alpha: &[f64], beta: &[f64]) -> (Vec<f64>, DMatrix<f64>) {
    let m = alpha.len();
    let t = DMatrix::from_fn(m, m, |i, j| {
        if i == j {
            alpha[i]
        } else if i + 1 == j {
            beta[i]
        } else if j + 1 == i {
            beta[j]
        } else {
            0.0
        }
    });
    eigh_real(&t)
}

/// exp(−i H t) ψ by Lanczos projection, subdividing t until the Krylov error estimate
/// falls below `tol` per unit norm.
pub fn expm_multiply(h: &Csr, psi: &[C64], t: f64, tol: f64) -> Vec<C64> {
    const M: usize = 30;
    let mut state = psi.to_vec();
    let mut remaining = t;
    let scale = h.norm_bound().max(1e-300);
    let cap = t.abs().min(20.0 / scale);
    let mut dt = cap;
    while remaining.abs() > 0.0 {
        let step = t.signum() * dt.min(remaining.abs());
        match krylov_step(h, &state, step, M, tol) {
            Some(next) => {
                state = next;
                remaining -= step;
                dt = (dt * 1.5).min(cap);
            }
            None => dt *= 0.5,
        }
    }
    state
}

fn krylov_step(h: &Csr, psi: &[C64], dt: f64, m: usize, tol: f64) -> Option<Vec<C64>> {
    let n = h.dim();
    let nrm = norm(psi);
    if nrm == 0.0 {
        return Some(psi.to_vec());
    }
    let mut basis: Vec<Vec<C64>> = vec![psi.iter().map(|x| x / nrm).collect()];
    let mut alpha = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut w = vec![C64::new(0.0, 0.0); n];
    let mut tail = 0.0;
    for j in 0..m.min(n) {
        h.matvec(&basis[j], &mut w);
        alpha.push(dot(&basis[j], &w).re);
        for _ in 0..2 {
            for b in &basis {
                let c = dot(b, &w);
                w.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
        let bn = norm(&w);
        if bn < 1e-13 || j + 1 == m.min(n) {
            tail = if bn < 1e-13 { 0.0 } else { bn };
            break;
        }
        beta.push(bn);
        basis.push(w.iter().map(|x| x / bn).collect());
    }
    let (vals, vecs) = tridiag_eig(&alpha, &beta);
    let k = alpha.len();
    // coefficients c = V exp(-i Λ dt) Vᵀ e1
    let coeff: Vec<C64> = (0..k)
        .map(|r| {
            (0..k)
                .map(|q| vecs[(r, q)] * vecs[(0, q)] * C64::from_polar(1.0, -vals[q] * dt))
                .sum()
        })
        .collect();
    if tail * dt.abs() * coeff[k - 1].norm() > tol {
        return None;
    }
    let mut out = vec![C64::new(0.0, 0.0); n];
    for (c, b) in coeff.iter().zip(&basis) {
        out.iter_mut().zip(b).for_each(|(x, y)| *x += c * y * nrm);
    }
    Some(out)
}

/// Dense complex vector helper.
pub fn to_dvector(v: &[C64]) -> DVector<C64> {
    DVector::from_column_slice(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_hermitian(n: usize, seed: u64) -> DMatrix<C64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = DMatrix::from_fn(n, n, |_, _| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5));
        (&a + a.adjoint()) * C64::new(0.5, 0.0)
    }

    #[test]
    fn csr_roundtrip_and_matvec() {
        let h = random_hermitian(12, 1);
        let s = Csr::from_dense(&h);
        assert!((s.to_dense() - &h).norm() < 1e-14);
        let x: Vec<C64> = (0..12).map(|i| C64::new(i as f64, 1.0)).collect();
        let y = s.apply(&x);
        let yd = &h * to_dvector(&x);
        for i in 0..12 {
            assert!((y[i] - yd[i]).norm() < 1e-12);
        }
        assert!(s.hermiticity_defect() < 1e-15);
    }

    #[test]
    fn lanczos_matches_dense() {
        // 1D tight-binding ring plus a potential, large enough to use Lanczos
        let n = 500;
        let mut t = Vec::new();
        for i in 0..n {
            let j = (i + 1) % n;
            t.push((i, j, C64::new(-1.0, 0.0)));
            t.push((j, i, C64::new(-1.0, 0.0)));
            t.push((i, i, C64::new(0.3 * ((i as f64) * 0.37).sin(), 0.0)));
        }
        let h = Csr::from_triplets(n, t);
        let g = ground_state(&h, 1e-9, 500).unwrap();
        let dense = eigh(&h.to_dense());
        assert!((g.energy - dense.values[0]).abs() < 1e-9);
        assert!(g.residual < 1e-8);
    }

    #[test]
    fn krylov_matches_spectral() {
        let h = random_hermitian(40, 7);
        let s = Csr::from_dense(&h);
        let spec = eigh(&h);
        let mut psi: Vec<C64> = (0..40).map(|i| C64::new((i as f64).cos(), 0.0)).collect();
        normalize(&mut psi);
        let a = expm_multiply(&s, &psi, 3.7, 1e-13);
        let b = spec.propagate(&psi, 3.7);
        let err: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
        assert!(err < 1e-10, "{err}");
        assert!((norm(&a) - 1.0).abs() < 1e-12);
    }
}
