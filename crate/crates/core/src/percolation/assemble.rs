//! Finite-volume assembly of the head, heat and transport operators.
//!
//! Each semi-discrete equation is written `M du/dt = −L u + b`, with `M` a
//! diagonal capacity and `(L, b)` an [`Operator`]. Fluxes are volumetric
//! (m³/s) and signed along `+r` and `+x3`.

use crate::percolation::linalg::StencilMatrix;
use crate::percolation::mesh::Mesh;

/// `L` and `b` of a semi-discrete equation.
#[derive(Clone, Debug)]
pub struct Operator {
    pub l: StencilMatrix,
    pub b: Vec<f64>,
}

impl Operator {
    fn new(mesh: &Mesh) -> Self {
        Self {
            l: StencilMatrix::zeros(mesh.n_r(), mesh.n_z()),
            b: vec![0.0; mesh.n_cells()],
        }
    }

    /// `−L u + b`.
    pub fn rate(&self, u: &[f64]) -> Vec<f64> {
        let mut r = self.l.mul(u);
        for (ri, bi) in r.iter_mut().zip(&self.b) {
            *ri = bi - *ri;
        }
        r
    }

    // Symmetric exchange between neighbours c and d with conductance g.
    fn couple(&mut self, c: usize, d: usize, g: f64, n_r: usize) {
        self.l.diag[c] += g;
        self.l.diag[d] += g;
        if d == c + 1 {
            self.l.east[c] -= g;
            self.l.west[d] -= g;
        } else {
            debug_assert_eq!(d, c + n_r);
            self.l.north[c] -= g;
            self.l.south[d] -= g;
        }
    }

    // Adds `g` to the coefficient of unknown `d` in row `c`.
    fn add_offdiag(&mut self, c: usize, d: usize, g: f64, n_r: usize) {
        if d == c + 1 {
            self.l.east[c] += g;
        } else if d + 1 == c {
            self.l.west[c] += g;
        } else if d == c + n_r {
            self.l.north[c] += g;
        } else {
            debug_assert_eq!(d + n_r, c);
            self.l.south[c] += g;
        }
    }
}

/// Volumetric fluxes through every face.
///
/// `radial[j * (n_r + 1) + i]` crosses the radial face at `r_i` in layer `j`
/// (positive outward); `axial[j * n_r + i]` crosses the axial face at the
/// bottom of layer `j` in ring `i` (positive upward), so `j = 0` is the outlet
/// and `j = n_z` the inlet.
#[derive(Clone, Debug, PartialEq)]
pub struct FaceFlows {
    pub radial: Vec<f64>,
    pub axial: Vec<f64>,
}

impl FaceFlows {
    pub fn zeros(mesh: &Mesh) -> Self {
        Self {
            radial: vec![0.0; (mesh.n_r() + 1) * mesh.n_z()],
            axial: vec![0.0; mesh.n_r() * (mesh.n_z() + 1)],
        }
    }

    /// Total volumetric outflow through the bottom surface, m³/s.
    pub fn outflow(&self, mesh: &Mesh) -> f64 {
        -self.axial[..mesh.n_r()].iter().sum::<f64>()
    }

    /// Total volumetric inflow through the top surface, m³/s.
    pub fn inflow(&self, mesh: &Mesh) -> f64 {
        let n_r = mesh.n_r();
        let top = mesh.n_z() * n_r;
        -self.axial[top..top + n_r].iter().sum::<f64>()
    }

    /// Darcy velocity (m/s) at each cell centre, averaged from the face fluxes.
    pub fn darcy_velocity(&self, mesh: &Mesh) -> Vec<[f64; 2]> {
        let (n_r, n_z) = (mesh.n_r(), mesh.n_z());
        let mut out = Vec::with_capacity(n_r * n_z);
        for j in 0..n_z {
            for i in 0..n_r {
                let qr_in = self.radial[j * (n_r + 1) + i];
                let qr_out = self.radial[j * (n_r + 1) + i + 1];
                let ar_in = mesh.area_r[i];
                let ar_out = mesh.area_r[i + 1];
                let vr_out = qr_out / ar_out;
                let vr = if ar_in > 0.0 { 0.5 * (qr_in / ar_in + vr_out) } else { vr_out * 0.5 };
                let qz = 0.5 * (self.axial[j * n_r + i] + self.axial[(j + 1) * n_r + i]);
                out.push([vr, qz / mesh.area_z[i]]);
            }
        }
        out
    }
}

/// Head-equation coefficients. `k_r`, `k_z` are the per-cell conductivities
/// `K f_mu(T)`.
pub struct HeadCoeffs<'a> {
    pub k_r: &'a [f64],
    pub k_z: &'a [f64],
    pub chi: f64,
    pub h_top: f64,
    pub phi_h: f64,
    pub h_c: f64,
    /// Bottom exchange switch per ring, fixed for the step.
    pub outlet_active: &'a [bool],
}

fn harmonic(a: f64, b: f64) -> f64 {
    if a + b > 0.0 {
        2.0 * a * b / (a + b)
    } else {
        0.0
    }
}

/// Conductance and gravity/offset contribution of the bottom Robin face of ring `i`:
/// outflow `= a (h_P − h_C) + c`.
fn outlet_coefficients(mesh: &Mesh, co: &HeadCoeffs, i: usize) -> (f64, f64) {
    let area = mesh.area_z[i];
    let k = co.k_z[i];
    let g = k / (0.5 * mesh.dz);
    let denom = g + co.phi_h;
    (area * co.phi_h * g / denom, area * co.phi_h * k * co.chi / denom)
}

/// Head operator: `S0 V dh/dt = −L h + b`.
pub fn head_operator(mesh: &Mesh, co: &HeadCoeffs) -> Operator {
    let (n_r, n_z) = (mesh.n_r(), mesh.n_z());
    let mut op = Operator::new(mesh);
    for j in 0..n_z {
        for i in 0..n_r {
            let c = mesh.index(i, j);
            if i + 1 < n_r {
                let g = mesh.area_r[i + 1] * harmonic(co.k_r[c], co.k_r[c + 1]) / mesh.dr;
                op.couple(c, c + 1, g, n_r);
            }
            if j + 1 < n_z {
                let d = c + n_r;
                let kf = harmonic(co.k_z[c], co.k_z[d]);
                let g = mesh.area_z[i] * kf / mesh.dz;
                op.couple(c, d, g, n_r);
                let gravity = mesh.area_z[i] * kf * co.chi;
                op.b[c] += gravity;
                op.b[d] -= gravity;
            }
        }
    }
    for i in 0..n_r {
        let top = mesh.index(i, n_z - 1);
        let k = co.k_z[top];
        let g = mesh.area_z[i] * k / (0.5 * mesh.dz);
        op.l.diag[top] += g;
        op.b[top] += g * co.h_top + mesh.area_z[i] * k * co.chi;
        if co.outlet_active[i] {
            let bottom = mesh.index(i, 0);
            let (a, c) = outlet_coefficients(mesh, co, i);
            op.l.diag[bottom] += a;
            op.b[bottom] += a * co.h_c - c;
        }
    }
    op
}

/// Whether the outlet law is active on each bottom ring for head `h`:
/// the reconstructed face head exceeds `h_C`.
pub fn outlet_switch(mesh: &Mesh, co: &HeadCoeffs, h: &[f64]) -> Vec<bool> {
    (0..mesh.n_r())
        .map(|i| {
            let c = mesh.index(i, 0);
            let k = co.k_z[c];
            let g = k / (0.5 * mesh.dz);
            // Face head with the outlet law active; flux continuity gives
            // g (h_P − h_b) + k chi = phi (h_b − h_C).
            let hb = (g * h[c] + k * co.chi + co.phi_h * co.h_c) / (g + co.phi_h);
            hb > co.h_c
        })
        .collect()
}

/// Face fluxes of a head field, consistent with [`head_operator`].
pub fn head_flows(mesh: &Mesh, co: &HeadCoeffs, h: &[f64]) -> FaceFlows {
    let (n_r, n_z) = (mesh.n_r(), mesh.n_z());
    let mut f = FaceFlows::zeros(mesh);
    for j in 0..n_z {
        for i in 0..n_r {
            let c = mesh.index(i, j);
            if i + 1 < n_r {
                let g = mesh.area_r[i + 1] * harmonic(co.k_r[c], co.k_r[c + 1]) / mesh.dr;
                f.radial[j * (n_r + 1) + i + 1] = -g * (h[c + 1] - h[c]);
            }
            if j + 1 < n_z {
                let d = c + n_r;
                let kf = harmonic(co.k_z[c], co.k_z[d]);
                let g = mesh.area_z[i] * kf / mesh.dz;
                f.axial[(j + 1) * n_r + i] = -(g * (h[d] - h[c]) + mesh.area_z[i] * kf * co.chi);
            }
        }
    }
    for i in 0..n_r {
        let top = mesh.index(i, n_z - 1);
        let k = co.k_z[top];
        let g = mesh.area_z[i] * k / (0.5 * mesh.dz);
        f.axial[n_z * n_r + i] = -(g * (co.h_top - h[top]) + mesh.area_z[i] * k * co.chi);
        if co.outlet_active[i] {
            let bottom = mesh.index(i, 0);
            let (a, c) = outlet_coefficients(mesh, co, i);
            f.axial[i] = -(a * (h[bottom] - co.h_c) + c);
        }
    }
    f
}

/// Heat-equation coefficients.
pub struct HeatCoeffs {
    pub lambda_r: f64,
    pub lambda_z: f64,
    pub rho_c: f64,
    pub t_top: f64,
}

/// Heat operator: `(eps rho c + eps_s rho_s c_s) V dT/dt = −L T + b`, with
/// non-conservative upwind advection `rho c q·∇T`.
pub fn heat_operator(mesh: &Mesh, co: &HeatCoeffs, flows: &FaceFlows) -> Operator {
    let (n_r, n_z) = (mesh.n_r(), mesh.n_z());
    let mut op = Operator::new(mesh);
    for j in 0..n_z {
        for i in 0..n_r {
            let c = mesh.index(i, j);
            if i + 1 < n_r {
                let d = c + 1;
                op.couple(c, d, co.lambda_r * mesh.area_r[i + 1] / mesh.dr, n_r);
                let q = flows.radial[j * (n_r + 1) + i + 1];
                upwind_heat(&mut op, c, d, q, co.rho_c, n_r);
            }
            if j + 1 < n_z {
                let d = c + n_r;
                op.couple(c, d, co.lambda_z * mesh.area_z[i] / mesh.dz, n_r);
                let q = flows.axial[(j + 1) * n_r + i];
                upwind_heat(&mut op, c, d, q, co.rho_c, n_r);
            }
        }
    }
    for i in 0..n_r {
        let top = mesh.index(i, n_z - 1);
        let g = co.lambda_z * mesh.area_z[i] / (0.5 * mesh.dz);
        op.l.diag[top] += g;
        op.b[top] += g * co.t_top;
        let inflow = -flows.axial[n_z * n_r + i];
        if inflow > 0.0 {
            op.l.diag[top] += co.rho_c * inflow;
            op.b[top] += co.rho_c * inflow * co.t_top;
        }
    }
    op
}

// Flux q from c to d (negative: from d to c). The receiving cell sees
// rho c |q| (T_upwind − T_self).
fn upwind_heat(op: &mut Operator, c: usize, d: usize, q: f64, rho_c: f64, n_r: usize) {
    if q > 0.0 {
        op.l.diag[d] += rho_c * q;
        op.add_offdiag(d, c, -rho_c * q, n_r);
    } else if q < 0.0 {
        op.l.diag[c] -= rho_c * q;
        op.add_offdiag(c, d, rho_c * q, n_r);
    }
}

/// Transport coefficients of one species.
pub struct TransportCoeffs {
    pub d_r: f64,
    pub d_z: f64,
    pub phi: f64,
    pub c_ref: f64,
}

fn transport_outlet_conductance(mesh: &Mesh, co: &TransportCoeffs, i: usize) -> f64 {
    let g = co.d_z / (0.5 * mesh.dz);
    mesh.area_z[i] * co.phi * g / (g + co.phi)
}

/// Transport operator: `eps V dC/dt = −L C + b + sources`, conservative
/// upwind advection, clean inflow at the top, advective plus exchange
/// outflow at the bottom.
pub fn transport_operator(mesh: &Mesh, co: &TransportCoeffs, flows: &FaceFlows, exchange: &[bool]) -> Operator {
    let (n_r, n_z) = (mesh.n_r(), mesh.n_z());
    let mut op = Operator::new(mesh);
    for j in 0..n_z {
        for i in 0..n_r {
            let c = mesh.index(i, j);
            if i + 1 < n_r {
                let d = c + 1;
                op.couple(c, d, co.d_r * mesh.area_r[i + 1] / mesh.dr, n_r);
                upwind_mass(&mut op, c, d, flows.radial[j * (n_r + 1) + i + 1], n_r);
            }
            if j + 1 < n_z {
                let d = c + n_r;
                op.couple(c, d, co.d_z * mesh.area_z[i] / mesh.dz, n_r);
                upwind_mass(&mut op, c, d, flows.axial[(j + 1) * n_r + i], n_r);
            }
        }
    }
    for i in 0..n_r {
        let top = mesh.index(i, n_z - 1);
        let out_top = flows.axial[n_z * n_r + i];
        if out_top > 0.0 {
            op.l.diag[top] += out_top;
        }
        let bottom = mesh.index(i, 0);
        let out_bottom = -flows.axial[i];
        if out_bottom > 0.0 {
            op.l.diag[bottom] += out_bottom;
        }
        if exchange[i] {
            let a = transport_outlet_conductance(mesh, co, i);
            op.l.diag[bottom] += a;
            op.b[bottom] += a * co.c_ref;
        }
    }
    op
}

// Conservative upwind: flux q from c to d carries the donor's concentration.
fn upwind_mass(op: &mut Operator, c: usize, d: usize, q: f64, n_r: usize) {
    if q > 0.0 {
        op.l.diag[c] += q;
        op.add_offdiag(d, c, -q, n_r);
    } else if q < 0.0 {
        op.l.diag[d] -= q;
        op.add_offdiag(c, d, q, n_r);
    }
}

/// Whether the solute exchange law is active on each bottom ring.
pub fn exchange_switch(mesh: &Mesh, co: &TransportCoeffs, conc: &[f64]) -> Vec<bool> {
    (0..mesh.n_r()).map(|i| conc[mesh.index(i, 0)] >= co.c_ref).collect()
}

/// Solute mass flux leaving through the bottom (kg/s), consistent with
/// [`transport_operator`].
pub fn outlet_mass_rate(mesh: &Mesh, co: &TransportCoeffs, flows: &FaceFlows, exchange: &[bool], conc: &[f64]) -> f64 {
    let mut rate = 0.0;
    for i in 0..mesh.n_r() {
        let c = mesh.index(i, 0);
        let out = -flows.axial[i];
        if out > 0.0 {
            rate += out * conc[c];
        }
        if exchange[i] {
            rate += transport_outlet_conductance(mesh, co, i) * (conc[c] - co.c_ref);
        }
    }
    rate
}

/// Solute mass flux entering through the top by backflow (kg/s); zero for
/// downward percolation.
pub fn inlet_backflow_rate(mesh: &Mesh, flows: &FaceFlows, conc: &[f64]) -> f64 {
    let (n_r, n_z) = (mesh.n_r(), mesh.n_z());
    (0..n_r)
        .map(|i| {
            let q = flows.axial[n_z * n_r + i];
            if q > 0.0 {
                q * conc[mesh.index(i, n_z - 1)]
            } else {
                0.0
            }
        })
        .sum()
}
