//! Sparse five-point operators on the `(r, x3)` mesh and the iterative solvers
//! used by the time stepper.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Five-point stencil matrix in the mesh's flat ordering `j * n_r + i`.
///
/// Row `c` reads `diag[c]·x[c] + west[c]·x[c−1] + east[c]·x[c+1]
/// + south[c]·x[c−n_r] + north[c]·x[c+n_r]`; coefficients pointing outside
/// the mesh are ignored and kept at zero.
#[derive(Clone, Debug, PartialEq)]
pub struct StencilMatrix {
    pub n_r: usize,
    pub n_z: usize,
    pub diag: Vec<f64>,
    pub west: Vec<f64>,
    pub east: Vec<f64>,
    pub south: Vec<f64>,
    pub north: Vec<f64>,
}

impl StencilMatrix {
    pub fn zeros(n_r: usize, n_z: usize) -> Self {
        let n = n_r * n_z;
        Self {
            n_r,
            n_z,
            diag: vec![0.0; n],
            west: vec![0.0; n],
            east: vec![0.0; n],
            south: vec![0.0; n],
            north: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        let n_r = self.n_r;
        let n = self.len();
        for c in 0..n {
            let i = c % n_r;
            let mut s = self.diag[c] * x[c];
            if i > 0 {
                s += self.west[c] * x[c - 1];
            }
            if i + 1 < n_r {
                s += self.east[c] * x[c + 1];
            }
            if c >= n_r {
                s += self.south[c] * x[c - n_r];
            }
            if c + n_r < n {
                s += self.north[c] * x[c + n_r];
            }
            y[c] = s;
        }
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; x.len()];
        self.apply(x, &mut y);
        y
    }

    /// `self ← a·self + diag(d)`.
    pub fn scale_add_diag(&mut self, a: f64, d: &[f64]) {
        for v in [&mut self.west, &mut self.east, &mut self.south, &mut self.north] {
            v.iter_mut().for_each(|x| *x *= a);
        }
        for (x, dv) in self.diag.iter_mut().zip(d) {
            *x = a * *x + dv;
        }
    }

    /// Dense copy, for tests and tiny problems.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.len();
        let mut m = vec![vec![0.0; n]; n];
        let mut e = vec![0.0; n];
        let mut col = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            self.apply(&e, &mut col);
            for i in 0..n {
                m[i][j] = col[i];
            }
            e[j] = 0.0;
        }
        m
    }
}

/// Block-Jacobi preconditioner whose blocks are the axial (z) lines of the
/// mesh, each a tridiagonal system solved by the Thomas algorithm.
#[derive(Clone, Debug)]
pub struct LinePreconditioner {
    n_r: usize,
    n_z: usize,
    // Per line, forward-eliminated super-diagonal and pivot inverses.
    c_prime: Vec<f64>,
    inv_pivot: Vec<f64>,
    sub: Vec<f64>,
}

impl LinePreconditioner {
    pub fn new(a: &StencilMatrix) -> Result<Self> {
        let (n_r, n_z) = (a.n_r, a.n_z);
        let n = a.len();
        let mut c_prime = vec![0.0; n];
        let mut inv_pivot = vec![0.0; n];
        for i in 0..n_r {
            let mut prev_c = 0.0;
            for j in 0..n_z {
                let c = j * n_r + i;
                let sub = if j > 0 { a.south[c] } else { 0.0 };
                let pivot = a.diag[c] - sub * prev_c;
                if pivot.abs() < f64::MIN_POSITIVE || !pivot.is_finite() {
                    return Err(Error::NonFinite {
                        field: "line preconditioner pivot".into(),
                    });
                }
                inv_pivot[c] = 1.0 / pivot;
                prev_c = if j + 1 < n_z { a.north[c] / pivot } else { 0.0 };
                c_prime[c] = prev_c;
            }
        }
        Ok(Self {
            n_r,
            n_z,
            c_prime,
            inv_pivot,
            sub: a.south.clone(),
        })
    }

    pub fn apply(&self, r: &[f64], z: &mut [f64]) {
        let (n_r, n_z) = (self.n_r, self.n_z);
        for i in 0..n_r {
            let mut prev = 0.0;
            for j in 0..n_z {
                let c = j * n_r + i;
                let sub = if j > 0 { self.sub[c] } else { 0.0 };
                prev = (r[c] - sub * prev) * self.inv_pivot[c];
                z[c] = prev;
            }
            for j in (0..n_z.saturating_sub(1)).rev() {
                let c = j * n_r + i;
                z[c] -= self.c_prime[c] * z[c + n_r];
            }
        }
    }
}

/// Which Krylov method to use for a system.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    /// Preconditioned conjugate gradient; the operator must be symmetric positive definite.
    Pcg,
    /// Preconditioned BiCGStab for general nonsymmetric operators.
    Bicgstab,
    /// Banded LU factorization; exact up to round-off.
    Direct,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            max_iter: 5000,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    pub residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Solves `a·x = b` in place, starting from the incoming `x` (warm start).
pub fn solve(a: &StencilMatrix, b: &[f64], x: &mut [f64], kind: SolverKind, opts: SolverOptions) -> Result<SolveStats> {
    match kind {
        SolverKind::Pcg => pcg(a, b, x, opts),
        SolverKind::Bicgstab => bicgstab(a, b, x, opts),
        SolverKind::Direct => {
            let lu = BandedLu::factor(a)?;
            x.copy_from_slice(&lu.solve(b));
            Ok(SolveStats::default())
        }
    }
}

pub fn pcg(a: &StencilMatrix, b: &[f64], x: &mut [f64], opts: SolverOptions) -> Result<SolveStats> {
    let n = b.len();
    let b_norm = norm(b);
    if b_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(SolveStats::default());
    }
    let m = LinePreconditioner::new(a)?;
    let mut r = vec![0.0; n];
    a.apply(x, &mut r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let mut res = norm(&r) / b_norm;
    if res <= opts.rel_tol {
        return Ok(SolveStats {
            iterations: 0,
            residual: res,
        });
    }
    let mut z = vec![0.0; n];
    m.apply(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for it in 1..=opts.max_iter {
        a.apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 || !pap.is_finite() {
            return Err(Error::SolverDiverged {
                iterations: it,
                residual: res,
            });
        }
        let alpha = rz / pap;
        for k in 0..n {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        res = norm(&r) / b_norm;
        if res <= opts.rel_tol {
            return Ok(SolveStats {
                iterations: it,
                residual: res,
            });
        }
        m.apply(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..n {
            p[k] = z[k] + beta * p[k];
        }
    }
    Err(Error::SolverDiverged {
        iterations: opts.max_iter,
        residual: res,
    })
}

pub fn bicgstab(a: &StencilMatrix, b: &[f64], x: &mut [f64], opts: SolverOptions) -> Result<SolveStats> {
    let n = b.len();
    let b_norm = norm(b);
    if b_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(SolveStats::default());
    }
    let m = LinePreconditioner::new(a)?;
    let mut r = vec![0.0; n];
    a.apply(x, &mut r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let mut res = norm(&r) / b_norm;
    if res <= opts.rel_tol {
        return Ok(SolveStats {
            iterations: 0,
            residual: res,
        });
    }
    let mut r_hat = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut zz = vec![0.0; n];
    let mut t = vec![0.0; n];
    for it in 1..=opts.max_iter {
        let rho_new = dot(&r_hat, &r);
        if rho_new == 0.0 || omega == 0.0 {
            // Breakdown: restart the shadow residual.
            r_hat.copy_from_slice(&r);
            rho = 1.0;
            alpha = 1.0;
            omega = 1.0;
            v.iter_mut().for_each(|e| *e = 0.0);
            p.iter_mut().for_each(|e| *e = 0.0);
            continue;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for k in 0..n {
            p[k] = r[k] + beta * (p[k] - omega * v[k]);
        }
        m.apply(&p, &mut y);
        a.apply(&y, &mut v);
        let rv = dot(&r_hat, &v);
        if rv == 0.0 || !rv.is_finite() {
            return Err(Error::SolverDiverged {
                iterations: it,
                residual: res,
            });
        }
        alpha = rho / rv;
        for k in 0..n {
            s[k] = r[k] - alpha * v[k];
        }
        if norm(&s) / b_norm <= opts.rel_tol {
            for k in 0..n {
                x[k] += alpha * y[k];
            }
            return Ok(SolveStats {
                iterations: it,
                residual: norm(&s) / b_norm,
            });
        }
        m.apply(&s, &mut zz);
        a.apply(&zz, &mut t);
        let tt = dot(&t, &t);
        omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
        for k in 0..n {
            x[k] += alpha * y[k] + omega * zz[k];
            r[k] = s[k] - omega * t[k];
        }
        res = norm(&r) / b_norm;
        if !res.is_finite() {
            return Err(Error::SolverDiverged {
                iterations: it,
                residual: res,
            });
        }
        if res <= opts.rel_tol {
            return Ok(SolveStats {
                iterations: it,
                residual: res,
            });
        }
    }
    Err(Error::SolverDiverged {
        iterations: opts.max_iter,
        residual: res,
    })
}

/// LU factorization without pivoting of a stencil matrix viewed as a band
/// matrix of half-bandwidth `n_r`. Intended for diagonally dominant systems.
#[derive(Clone, Debug)]
pub struct BandedLu {
    n: usize,
    bw: usize,
    // Row-major band storage: entry (i, j) with |i − j| ≤ bw at i·(2bw+1) + (j − i + bw).
    band: Vec<f64>,
}

impl BandedLu {
    pub fn factor(a: &StencilMatrix) -> Result<Self> {
        let n = a.len();
        let bw = a.n_r;
        let w = 2 * bw + 1;
        let mut band = vec![0.0; n * w];
        let n_r = a.n_r;
        for c in 0..n {
            let i = c % n_r;
            band[c * w + bw] = a.diag[c];
            if i > 0 {
                band[c * w + bw - 1] = a.west[c];
            }
            if i + 1 < n_r {
                band[c * w + bw + 1] = a.east[c];
            }
            if c >= n_r {
                band[c * w] = a.south[c];
            }
            if c + n_r < n {
                band[c * w + 2 * bw] = a.north[c];
            }
        }
        for k in 0..n {
            let pivot = band[k * w + bw];
            if pivot.abs() < f64::MIN_POSITIVE || !pivot.is_finite() {
                return Err(Error::NonFinite {
                    field: "banded LU pivot".into(),
                });
            }
            let last = (k + bw).min(n - 1);
            for i in k + 1..=last {
                let lik = band[i * w + (k + bw - i)] / pivot;
                band[i * w + (k + bw - i)] = lik;
                if lik == 0.0 {
                    continue;
                }
                for j in k + 1..=last {
                    let ukj = band[k * w + (j + bw - k)];
                    band[i * w + (j + bw - i)] -= lik * ukj;
                }
            }
        }
        Ok(Self { n, bw, band })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let (n, bw) = (self.n, self.bw);
        let w = 2 * bw + 1;
        let mut x = b.to_vec();
        for i in 0..n {
            let first = i.saturating_sub(bw);
            let mut s = x[i];
            for j in first..i {
                s -= self.band[i * w + (j + bw - i)] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let last = (i + bw).min(n - 1);
            let mut s = x[i];
            for j in i + 1..=last {
                s -= self.band[i * w + (j + bw - i)] * x[j];
            }
            x[i] = s / self.band[i * w + bw];
        }
        x
    }
}
