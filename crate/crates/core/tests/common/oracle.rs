//! Independent reference implementations used by the tests.

use brewsolve::augment::{Composition, SelectionPlan};
use brewsolve::nn::{self, Mode, Network, Objective};
use brewsolve::rng::Rng;
use nalgebra::{DMatrix, DVector};
use ndarray::Array2;
use rand::{Rng as _, SeedableRng};

/// Argmin-with-removal by exhaustive scan; first index wins ties.
pub fn selection(pool: &[Composition], plan: &SelectionPlan) -> Vec<usize> {
    let mut taken = vec![false; pool.len()];
    let mut out = Vec::new();
    for k in 0..plan.per_axis() {
        for i in 0..4 {
            let t = plan.levels[i][k];
            let mut best: Option<(f64, usize)> = None;
            for (j, c) in pool.iter().enumerate() {
                if taken[j] {
                    continue;
                }
                let d = (c[i] - t).abs();
                if best.map_or(true, |(bd, _)| d < bd) {
                    best = Some((d, j));
                }
            }
            let j = best.unwrap().1;
            taken[j] = true;
            out.push(j);
        }
    }
    out
}

/// Natural spline through the slope formulation: solve for knot slopes with a
/// dense system, then evaluate the cubic Hermite form.
pub fn hermite_spline(x: &[f64], y: &[f64], t: f64) -> f64 {
    let n = x.len();
    let h: Vec<f64> = (0..n - 1).map(|i| x[i + 1] - x[i]).collect();
    let d: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
    let mut a = DMatrix::<f64>::zeros(n, n);
    let mut b = DVector::<f64>::zeros(n);
    a[(0, 0)] = 2.0;
    a[(0, 1)] = 1.0;
    b[0] = 3.0 * d[0];
    a[(n - 1, n - 2)] = 1.0;
    a[(n - 1, n - 1)] = 2.0;
    b[n - 1] = 3.0 * d[n - 2];
    for i in 1..n - 1 {
        a[(i, i - 1)] = h[i];
        a[(i, i)] = 2.0 * (h[i - 1] + h[i]);
        a[(i, i + 1)] = h[i - 1];
        b[i] = 3.0 * (h[i] * d[i - 1] + h[i - 1] * d[i]);
    }
    let s = a.lu().solve(&b).unwrap();
    let i = (0..n - 1).find(|&i| t <= x[i + 1]).unwrap_or(n - 2);
    let u = (t - x[i]) / h[i];
    let h00 = 2.0 * u * u * u - 3.0 * u * u + 1.0;
    let h10 = u * u * u - 2.0 * u * u + u;
    let h01 = -2.0 * u * u * u + 3.0 * u * u;
    let h11 = u * u * u - u * u;
    h00 * y[i] + h10 * h[i] * s[i] + h01 * y[i + 1] + h11 * h[i] * s[i + 1]
}

/// Cyclic Jacobi eigenvalues of a symmetric matrix, ascending.
pub fn jacobi_eigenvalues(a: &Array2<f64>) -> Vec<f64> {
    let n = a.nrows();
    let mut m = a.clone();
    for _ in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    off += m[[i, j]] * m[[i, j]];
                }
            }
        }
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[[p, q]].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[[q, q]] - m[[p, p]]) / (2.0 * m[[p, q]]);
                let t = if theta == 0.0 {
                    1.0
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[[k, p]], m[[k, q]]);
                    m[[k, p]] = c * mkp - s * mkq;
                    m[[k, q]] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[[p, k]], m[[q, k]]);
                    m[[p, k]] = c * mpk - s * mqk;
                    m[[q, k]] = s * mpk + c * mqk;
                }
            }
        }
    }
    let mut e: Vec<f64> = (0..n).map(|i| m[[i, i]]).collect();
    e.sort_by(f64::total_cmp);
    e
}

fn rng(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

pub fn random_matrix(r: usize, c: usize, seed: u64) -> Array2<f64> {
    let mut g = rng(seed);
    Array2::from_shape_fn((r, c), |_| g.random_range(-1.5..1.5))
}

pub fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-4 * a.abs().max(b.abs()) + 1e-8
}

const FD_STEP: f64 = 1e-6;

/// Loss `Σ out ⊙ R` so that `dL/dout = R`.
fn probe_loss(net: &Network, x: &Array2<f64>, r: &Array2<f64>, mode: Mode, seed: u64) -> f64 {
    let (y, _) = net.forward(x, mode, &mut rng(seed)).unwrap();
    (&y * r).sum()
}

fn perturbed(net: &Network, base: &[f64], i: usize, delta: f64) -> Network {
    let mut p = base.to_vec();
    p[i] += delta;
    let mut out = net.clone();
    out.set_params_flat(&p).unwrap();
    out
}

/// Central-difference check of every parameter gradient (train mode) and a
/// few input gradients.
pub fn check_network_gradients(net: &Network, x: &Array2<f64>, mode: Mode) -> Result<(), String> {
    let seed = 99;
    let (y, cache) = net.forward(x, mode, &mut rng(seed)).unwrap();
    let r = random_matrix(y.nrows(), y.ncols(), 5);
    let (grads, dx) = net.backward(&cache, &r, mode == Mode::Train).unwrap();
    if let Some(g) = grads {
        let base = net.params_flat();
        for i in 0..base.len() {
            let plus = probe_loss(&perturbed(net, &base, i, FD_STEP), x, &r, mode, seed);
            let minus = probe_loss(&perturbed(net, &base, i, -FD_STEP), x, &r, mode, seed);
            let fd = (plus - minus) / (2.0 * FD_STEP);
            if !close(g[i], fd) {
                return Err(format!("param {i}: backprop {} vs fd {fd}", g[i]));
            }
        }
    }
    for idx in [(0, 0), (1, 2.min(x.ncols() - 1)), (x.nrows() - 1, x.ncols() - 1)] {
        let mut xp = x.clone();
        xp[idx] += FD_STEP;
        let mut xm = x.clone();
        xm[idx] -= FD_STEP;
        let fd = (probe_loss(net, &xp, &r, mode, seed) - probe_loss(net, &xm, &r, mode, seed)) / (2.0 * FD_STEP);
        if !close(dx[idx], fd) {
            return Err(format!("input {idx:?}: backprop {} vs fd {fd}", dx[idx]));
        }
    }
    Ok(())
}

/// Central-difference check of an objective's parameter gradient.
pub fn check_objective_gradient(net: &Network, x: &Array2<f64>, t: &Array2<f64>, obj: &dyn Objective) -> Result<(), String> {
    let loss = |n: &Network| obj.loss(&n.forward(x, Mode::Train, &mut rng(0)).unwrap().0, t, x).unwrap();
    let (_, grads, _) = nn::train::batch_gradient(net, x, t, obj, Mode::Train, &mut rng(0)).unwrap();
    let base = net.params_flat();
    for i in 0..base.len() {
        let fd = (loss(&perturbed(net, &base, i, FD_STEP)) - loss(&perturbed(net, &base, i, -FD_STEP))) / (2.0 * FD_STEP);
        if !close(grads[i], fd) {
            return Err(format!("param {i}: backprop {} vs fd {fd}", grads[i]));
        }
    }
    Ok(())
}
