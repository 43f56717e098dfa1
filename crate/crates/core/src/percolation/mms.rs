//! Manufactured-solution checks of the spatial and temporal discretization.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::percolation::assemble::{self, FaceFlows, HeadCoeffs, HeatCoeffs, TransportCoeffs};
use crate::percolation::linalg::{self, SolverKind, SolverOptions};
use crate::percolation::mesh::{Mesh, PodGeometry};
use crate::percolation::{solid_ratio, theta_solve, Linear, RunStats};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MmsProblem {
    /// Constant head and temperature with matching boundary data.
    Constant,
    /// Head affine in `x3` with a matched outlet law.
    LinearHead,
    /// Steady head `h0 + A x3 + cos(πr/R) sin(k(H − x3))` with a source.
    TrigHead,
    /// Steady temperature `T0 + cos(πr/R) cos(k x3)` with a source.
    TrigHeat,
    /// Single-species dissolution in a closed bed: `eps C' = alpha eps_s C_s`,
    /// `C_s' = −alpha C_s`, integrated with the production CN rules.
    ReactionOde,
}

impl MmsProblem {
    pub const ALL: [MmsProblem; 5] = [
        MmsProblem::Constant,
        MmsProblem::LinearHead,
        MmsProblem::TrigHead,
        MmsProblem::TrigHeat,
        MmsProblem::ReactionOde,
    ];
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MmsReport {
    pub problem: MmsProblem,
    /// Mesh sizes `(n_r, n_z)` or, for the ODE, step counts `(n, 0)`.
    pub levels: Vec<(usize, usize)>,
    /// Relative L2 error (volume weighted) per level.
    pub errors: Vec<f64>,
    /// Observed order from the two finest spatial levels.
    pub space_order: Option<f64>,
    /// Observed order from the two smallest time steps.
    pub time_order: Option<f64>,
}

const RADIUS: f64 = 0.029;
const HEIGHT: f64 = 0.012;
const LADDER: [(usize, usize); 3] = [(8, 16), (16, 32), (32, 64)];

fn tight() -> SolverOptions {
    SolverOptions {
        rel_tol: 1e-13,
        max_iter: 20_000,
    }
}

fn mesh(n_r: usize, n_z: usize) -> Mesh {
    Mesh::new(PodGeometry {
        radius: RADIUS,
        height: HEIGHT,
        n_r,
        n_z,
    })
    .expect("ladder meshes are valid")
}

/// Cell averages of `f(r, z)·2πr` by 3×3 Gauss–Legendre quadrature.
fn integrate_cells(m: &Mesh, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    let nodes = [-(0.6f64).sqrt(), 0.0, (0.6f64).sqrt()];
    let weights = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];
    let mut out = vec![0.0; m.n_cells()];
    for j in 0..m.n_z() {
        for i in 0..m.n_r() {
            let (r0, z0) = (m.r_face[i], j as f64 * m.dz);
            let mut s = 0.0;
            for (a, wa) in nodes.iter().zip(&weights) {
                let r = r0 + 0.5 * m.dr * (1.0 + a);
                for (b, wb) in nodes.iter().zip(&weights) {
                    let z = z0 + 0.5 * m.dz * (1.0 + b);
                    s += wa * wb * f(r, z) * 2.0 * PI * r;
                }
            }
            out[m.index(i, j)] = s * 0.25 * m.dr * m.dz;
        }
    }
    out
}

fn relative_l2(m: &Mesh, u: &[f64], exact: impl Fn(f64, f64) -> f64) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for j in 0..m.n_z() {
        for i in 0..m.n_r() {
            let c = m.index(i, j);
            let e = exact(m.r_center[i], m.z_center[j]);
            let v = m.volume(c);
            num += v * (u[c] - e).powi(2);
            den += v * e * e;
        }
    }
    (num / den).sqrt()
}

fn steady_head(m: &Mesh, k: f64, h_top: f64, phi: f64, h_c: f64, source: &[f64]) -> Vec<f64> {
    let kk = vec![k; m.n_cells()];
    let active = vec![true; m.n_r()];
    let co = HeadCoeffs {
        k_r: &kk,
        k_z: &kk,
        chi: 0.0,
        h_top,
        phi_h: phi,
        h_c,
        outlet_active: &active,
    };
    let op = assemble::head_operator(m, &co);
    let rhs: Vec<f64> = op.b.iter().zip(source).map(|(b, s)| b + s).collect();
    let mut x = vec![h_top; m.n_cells()];
    linalg::solve(&op.l, &rhs, &mut x, SolverKind::Pcg, tight()).expect("steady head converges");
    x
}

fn steady_heat(m: &Mesh, lambda: f64, t_top: f64, source: &[f64]) -> Vec<f64> {
    let co = HeatCoeffs {
        lambda_r: lambda,
        lambda_z: lambda,
        rho_c: 4.18e6,
        t_top,
    };
    let op = assemble::heat_operator(m, &co, &FaceFlows::zeros(m));
    let rhs: Vec<f64> = op.b.iter().zip(source).map(|(b, s)| b + s).collect();
    let mut x = vec![t_top; m.n_cells()];
    linalg::solve(&op.l, &rhs, &mut x, SolverKind::Bicgstab, tight()).expect("steady heat converges");
    x
}

fn order(errors: &[f64], ratio: f64) -> Option<f64> {
    let n = errors.len();
    if n < 2 || errors[n - 1] <= 0.0 || errors[n - 2] <= 0.0 {
        return None;
    }
    Some((errors[n - 2] / errors[n - 1]).ln() / ratio.ln())
}

// -(1/r) d/dr (r d/dr cos(πr/R)), i.e. the radial part of −∇² applied to cos(πr/R).
fn radial_laplacian_term(r: f64) -> f64 {
    let w = PI / RADIUS;
    let sin_over_r = if r > 0.0 { (w * r).sin() / r } else { w };
    w * (sin_over_r + w * (w * r).cos())
}

fn constant() -> MmsReport {
    let m = mesh(8, 16);
    let zero = vec![0.0; m.n_cells()];
    let c = 93.5;
    let h = steady_head(&m, 2e-8, c, 3e-5, c, &zero);
    let t = steady_heat(&m, 0.4, c, &zero);
    let err = h.iter().chain(&t).map(|v| (v - c).abs() / c).fold(0.0, f64::max);
    MmsReport {
        problem: MmsProblem::Constant,
        levels: vec![(8, 16)],
        errors: vec![err],
        space_order: None,
        time_order: None,
    }
}

fn linear_head() -> MmsReport {
    let (a, b, k, phi) = (50.0, 900.0, 2e-8, 3e-5);
    let h_c = a - k * b / phi;
    let exact = |_r: f64, z: f64| a + b * z;
    let mut levels = Vec::new();
    let mut errors = Vec::new();
    for (n_r, n_z) in [(8, 16), (16, 32)] {
        let m = mesh(n_r, n_z);
        let h = steady_head(&m, k, exact(0.0, HEIGHT), phi, h_c, &vec![0.0; m.n_cells()]);
        levels.push((n_r, n_z));
        errors.push(relative_l2(&m, &h, exact));
    }
    MmsReport {
        problem: MmsProblem::LinearHead,
        levels,
        errors,
        space_order: None,
        time_order: None,
    }
}

fn trig_head() -> MmsReport {
    let k_cond = 1.0;
    let kz = 0.75 * PI / HEIGHT;
    let phi = k_cond * kz;
    let (h_c, h0) = (10.0, 12.0);
    let a = phi * (h0 - h_c) / k_cond;
    let exact = move |r: f64, z: f64| h0 + a * z + (PI * r / RADIUS).cos() * (kz * (HEIGHT - z)).sin();
    let source = move |r: f64, z: f64| {
        let w = (kz * (HEIGHT - z)).sin();
        k_cond * w * (radial_laplacian_term(r) + kz * kz * (PI * r / RADIUS).cos())
    };
    let mut levels = Vec::new();
    let mut errors = Vec::new();
    for (n_r, n_z) in LADDER {
        let m = mesh(n_r, n_z);
        let s = integrate_cells(&m, source);
        let h = steady_head(&m, k_cond, exact(0.0, HEIGHT), phi, h_c, &s);
        levels.push((n_r, n_z));
        let shifted: Vec<f64> = h.iter().map(|v| v - h0).collect();
        errors.push(relative_l2(&m, &shifted, |r, z| exact(r, z) - h0));
    }
    let space_order = order(&errors, 2.0);
    MmsReport {
        problem: MmsProblem::TrigHead,
        levels,
        errors,
        space_order,
        time_order: None,
    }
}

fn trig_heat() -> MmsReport {
    let lambda = 0.4;
    let kz = 0.5 * PI / HEIGHT;
    let t0 = 90.0;
    let exact = move |r: f64, z: f64| t0 + (PI * r / RADIUS).cos() * (kz * z).cos();
    let source = move |r: f64, z: f64| {
        let w = (kz * z).cos();
        lambda * w * (radial_laplacian_term(r) + kz * kz * (PI * r / RADIUS).cos())
    };
    let mut levels = Vec::new();
    let mut errors = Vec::new();
    for (n_r, n_z) in LADDER {
        let m = mesh(n_r, n_z);
        let s = integrate_cells(&m, source);
        let t = steady_heat(&m, lambda, t0, &s);
        levels.push((n_r, n_z));
        let shifted: Vec<f64> = t.iter().map(|v| v - t0).collect();
        errors.push(relative_l2(&m, &shifted, |r, z| exact(r, z) - t0));
    }
    let space_order = order(&errors, 2.0);
    MmsReport {
        problem: MmsProblem::TrigHeat,
        levels,
        errors,
        space_order,
        time_order: None,
    }
}

fn reaction_ode() -> MmsReport {
    let m = mesh(4, 4);
    let n = m.n_cells();
    let (alpha, eps, cs0, t_end): (f64, f64, f64, f64) = (0.05, 0.4, 12.0, 30.0);
    let eps_s = 1.0 - eps;
    let volumes = m.volumes();
    let pore: Vec<f64> = volumes.iter().map(|v| v * eps).collect();
    let co = TransportCoeffs {
        d_r: 1e-7,
        d_z: 1e-7,
        phi: 1e-5,
        c_ref: 0.0,
    };
    let closed = vec![false; m.n_r()];
    let op = assemble::transport_operator(&m, &co, &FaceFlows::zeros(&m), &closed);
    let exact = eps_s / eps * cs0 * (1.0 - (-alpha * t_end).exp());
    let mut levels = Vec::new();
    let mut errors = Vec::new();
    for steps in [10usize, 20, 40] {
        let dt = t_end / steps as f64;
        let mut stats = RunStats::default();
        let mut lin = Linear {
            kind: SolverKind::Bicgstab,
            opts: tight(),
            stats: &mut stats,
        };
        let mut c = vec![0.0; n];
        let mut cs = cs0;
        for _ in 0..steps {
            let next = cs * solid_ratio(0.5, alpha, dt);
            let src: Vec<f64> = volumes
                .iter()
                .map(|v| alpha * eps_s * v * 0.5 * (cs + next))
                .collect();
            c = theta_solve(&pore, dt, 0.5, &op, &op, &c, Some(&src), &mut lin).expect("closed bed step");
            cs = next;
        }
        let mean = c.iter().sum::<f64>() / n as f64;
        levels.push((steps, 0));
        errors.push((mean - exact).abs() / exact);
    }
    let time_order = order(&errors, 2.0);
    MmsReport {
        problem: MmsProblem::ReactionOde,
        levels,
        errors,
        space_order: None,
        time_order,
    }
}

/// Runs one manufactured problem and reports its errors and observed orders.
pub fn manufactured_solution_check(problem: MmsProblem) -> MmsReport {
    match problem {
        MmsProblem::Constant => constant(),
        MmsProblem::LinearHead => linear_head(),
        MmsProblem::TrigHead => trig_head(),
        MmsProblem::TrigHeat => trig_heat(),
        MmsProblem::ReactionOde => reaction_ode(),
    }
}
