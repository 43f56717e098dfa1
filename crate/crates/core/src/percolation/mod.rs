//! Axisymmetric percolation simulator: saturated Darcy flow, heat transport,
//! solute transport with first-order dissolution from the solid matrix.
//!
//! Time stepping follows an Adams–Bashforth predictor for the temperature
//! that drives the viscosity correction, then Crank–Nicolson correctors for
//! head, temperature and each species, in that order.

pub mod assemble;
pub mod linalg;
pub mod mesh;
pub mod mms;
pub mod params;

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{Chemistry, Recipe, N_FRACTIONS, N_SPECIES, SPECIES_TAGS};
use assemble::{FaceFlows, HeadCoeffs, HeatCoeffs, Operator, TransportCoeffs};
use linalg::{SolveStats, SolverOptions, StencilMatrix};
pub use linalg::SolverKind;
pub use mesh::{Boundary, Mesh, PodGeometry};
pub use params::{
    eval_rate_polynomial, Inventory, Numerics, PhysicalParams, RatePolynomial, ReactionCoeffs, ReactionRow,
    ResolvedParams, SimConfig,
};

/// kg → mg and m³ → mL.
const MG_PER_KG: f64 = 1e6;
const ML_PER_M3: f64 = 1e6;

/// Discrete fields at one time level.
#[derive(Clone, Debug)]
pub struct SimState {
    pub t: f64,
    pub step: usize,
    /// Hydraulic head, m.
    pub h: Vec<f64>,
    /// Temperature, °C.
    pub temperature: Vec<f64>,
    /// Liquid concentrations `[species][cell]`, kg/m³.
    pub conc: Vec<Vec<f64>>,
    /// Solid concentrations `[variety · N_SPECIES + species][cell]`, kg/m³ of solid.
    pub solid: Vec<Vec<f64>>,
    /// Face fluxes at this level, m³/s.
    pub flows: FaceFlows,
    /// Solute mass that has left through the outlet, kg.
    pub effluent_accum: [f64; N_SPECIES],
    /// Water volume that has left through the outlet, m³.
    pub effluent_volume: f64,
    /// Outlet solute mass rate at this level, kg/s.
    pub outlet_rate: [f64; N_SPECIES],
    /// Conductivity multiplier `f_mu` per cell used for this level's fluxes.
    viscosity: Vec<f64>,
    heat_rate_prev: Option<Vec<f64>>,
    /// Number of negative concentrations set to zero so far, and their mass (kg).
    pub clamped: usize,
    pub clamped_mass: f64,
}

impl SimState {
    /// Pressure head `psi = h − x3`.
    pub fn psi(&self, mesh: &Mesh) -> Vec<f64> {
        self.h
            .iter()
            .enumerate()
            .map(|(c, h)| h - mesh.z_center[c / mesh.n_r()])
            .collect()
    }

    /// Cell-centred Darcy flux `(q_r, q_z)`, m/s.
    pub fn darcy_flux(&self, mesh: &Mesh) -> Vec<[f64; 2]> {
        self.flows.darcy_velocity(mesh)
    }

    /// Solid concentration of one species summed over varieties.
    pub fn solid_total(&self, species: usize) -> Vec<f64> {
        let n = self.h.len();
        let mut out = vec![0.0; n];
        for v in 0..N_FRACTIONS {
            for (o, s) in out.iter_mut().zip(&self.solid[v * N_SPECIES + species]) {
                *o += s;
            }
        }
        out
    }

    fn check_finite(&self) -> Result<()> {
        let fields: [(&str, &[f64]); 2] = [("h", &self.h), ("T", &self.temperature)];
        for (name, f) in fields {
            if f.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { field: name.into() });
            }
        }
        for (k, c) in self.conc.iter().enumerate() {
            if c.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    field: format!("C_{}", SPECIES_TAGS[k]),
                });
            }
        }
        for (i, c) in self.solid.iter().enumerate() {
            if c.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    field: format!("C_{}_s", SPECIES_TAGS[i % N_SPECIES]),
                });
            }
        }
        if self.flows.axial.iter().chain(&self.flows.radial).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { field: "q".into() });
        }
        Ok(())
    }
}

/// Per-species mass balance in kg.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MassAudit {
    pub initial_solid: [f64; N_SPECIES],
    pub dissolved: [f64; N_SPECIES],
    pub remaining_solid: [f64; N_SPECIES],
    pub effluent: [f64; N_SPECIES],
    /// `|dissolved + solid + effluent − initial| / initial` (0 when the inventory is empty).
    pub relative_error: [f64; N_SPECIES],
}

impl MassAudit {
    pub fn max_relative_error(&self) -> f64 {
        self.relative_error.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub steps: usize,
    pub linear_iterations: usize,
    pub max_residual: f64,
}

/// Result of integrating a recipe from `t = 0` to `tau`.
#[derive(Clone, Debug)]
pub struct RunOutput {
    /// Sample times, s, starting at 0.
    pub times: Vec<f64>,
    /// Accumulated effluent per species, mg.
    pub cumulative: Vec<[f64; N_SPECIES]>,
    /// Outlet mass rate per species, mg/s.
    pub rates: Vec<[f64; N_SPECIES]>,
    /// Accumulated effluent volume, mL.
    pub volume: Vec<f64>,
    pub final_state: SimState,
    pub audit: MassAudit,
    pub stats: RunStats,
    /// Whether the integration reached `tau`.
    pub complete: bool,
}

impl RunOutput {
    pub fn final_cumulative(&self) -> [f64; N_SPECIES] {
        *self.cumulative.last().expect("run output holds at least the initial sample")
    }

    pub fn final_volume(&self) -> f64 {
        *self.volume.last().expect("run output holds at least the initial sample")
    }

    /// Writes a series as TSV with header `t_s` plus the canonical solute tags.
    fn write_series(path: &Path, times: &[f64], rows: &[[f64; N_SPECIES]]) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        let io = |e| Error::io(path, e);
        write!(w, "t_s").map_err(io)?;
        for tag in SPECIES_TAGS {
            write!(w, "\t{tag}").map_err(io)?;
        }
        writeln!(w).map_err(io)?;
        for (t, row) in times.iter().zip(rows) {
            write!(w, "{}", crate::tsv::format_float(*t)).map_err(io)?;
            for v in row {
                write!(w, "\t{}", crate::tsv::format_float(*v)).map_err(io)?;
            }
            writeln!(w).map_err(io)?;
        }
        w.flush().map_err(io)
    }

    /// Accumulated effluent series (mg); its last row is the effluent-total projection.
    pub fn write_cumulative_tsv(&self, path: &Path) -> Result<()> {
        Self::write_series(path, &self.times, &self.cumulative)
    }

    /// Outlet mass-rate series (mg/s).
    pub fn write_rate_tsv(&self, path: &Path) -> Result<()> {
        Self::write_series(path, &self.times, &self.rates)
    }
}

/// A simulator bound to one resolved parameter set.
#[derive(Clone, Debug)]
pub struct Simulator {
    pub mesh: Mesh,
    pub params: ResolvedParams,
    volumes: Vec<f64>,
}

pub(crate) struct Linear<'a> {
    pub(crate) kind: SolverKind,
    pub(crate) opts: SolverOptions,
    pub(crate) stats: &'a mut RunStats,
}


impl Linear<'_> {
    pub(crate) fn solve(&mut self, a: &StencilMatrix, b: &[f64], x: &mut [f64]) -> Result<()> {
        let s: SolveStats = linalg::solve(a, b, x, self.kind, self.opts)?;
        self.stats.linear_iterations += s.iterations;
        self.stats.max_residual = self.stats.max_residual.max(s.residual);
        Ok(())
    }
}

/// One theta-step of `M du/dt = −L u + b + s`:
/// `(M/dt + θ L¹) u¹ = M/dt u⁰ + (1−θ)(−L⁰ u⁰ + b⁰) + θ b¹ + s`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn theta_solve(
    mass: &[f64],
    dt: f64,
    theta: f64,
    old: &Operator,
    new: &Operator,
    u: &[f64],
    source: Option<&[f64]>,
    lin: &mut Linear,
) -> Result<Vec<f64>> {
    let m_dt: Vec<f64> = mass.iter().map(|m| m / dt).collect();
    let mut rhs = old.rate(u);
    for c in 0..u.len() {
        rhs[c] = m_dt[c] * u[c] + (1.0 - theta) * rhs[c] + theta * new.b[c];
        if let Some(s) = source {
            rhs[c] += s[c];
        }
    }
    let mut a = new.l.clone();
    a.scale_add_diag(theta, &m_dt);
    let mut x = u.to_vec();
    lin.solve(&a, &rhs, &mut x)?;
    Ok(x)
}

/// Growth factor of one theta-step of `dC_s/dt = −alpha C_s`.
pub(crate) fn solid_ratio(theta: f64, alpha: f64, dt: f64) -> f64 {
    (1.0 - (1.0 - theta) * alpha * dt) / (1.0 + theta * alpha * dt)
}

impl Simulator {
    pub fn new(params: ResolvedParams) -> Result<Self> {
        let mesh = Mesh::new(params.geometry)?;
        let volumes = mesh.volumes();
        Ok(Self { mesh, params, volumes })
    }

    pub fn from_config(cfg: &SimConfig, recipe: &Recipe) -> Result<Self> {
        Self::new(ResolvedParams::new(cfg, recipe)?)
    }

    fn head_coeffs<'a>(&self, kr: &'a [f64], kz: &'a [f64], active: &'a [bool]) -> HeadCoeffs<'a> {
        let ph = &self.params.physics;
        HeadCoeffs {
            k_r: kr,
            k_z: kz,
            chi: self.params.chi,
            h_top: self.params.inlet_head,
            phi_h: ph.phi_h,
            h_c: ph.h_c,
            outlet_active: active,
        }
    }

    fn conductivities(&self, viscosity: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let [kr, kz] = self.params.conductivity;
        (
            viscosity.iter().map(|f| kr * f).collect(),
            viscosity.iter().map(|f| kz * f).collect(),
        )
    }

    fn viscosity(&self, temperature: &[f64]) -> Vec<f64> {
        temperature.iter().map(|t| self.params.physics.f_mu(*t)).collect()
    }

    fn heat_coeffs(&self) -> HeatCoeffs {
        let ph = &self.params.physics;
        HeatCoeffs {
            lambda_r: ph.thermal_conductivity[0],
            lambda_z: ph.thermal_conductivity[1],
            rho_c: ph.fluid_heat_capacity,
            t_top: self.params.inlet_temperature,
        }
    }

    fn transport_coeffs(&self, k: usize) -> TransportCoeffs {
        let ph = &self.params.physics;
        TransportCoeffs {
            d_r: self.params.dispersion[k],
            d_z: self.params.dispersion[k],
            phi: ph.phi_k[k],
            c_ref: ph.c_kc[k],
        }
    }

    fn flows_for(&self, h: &[f64], viscosity: &[f64]) -> FaceFlows {
        let (kr, kz) = self.conductivities(viscosity);
        let probe = vec![true; self.mesh.n_r()];
        let co = self.head_coeffs(&kr, &kz, &probe);
        let active = assemble::outlet_switch(&self.mesh, &co, h);
        let co = self.head_coeffs(&kr, &kz, &active);
        assemble::head_flows(&self.mesh, &co, h)
    }

    /// State at `t = 0`: head from the linear initial pressure profile,
    /// uniform bed temperature `T0`, clean pore water, full solid inventory.
    pub fn initial_state(&self) -> SimState {
        let mesh = &self.mesh;
        let p = &self.params;
        let n = mesh.n_cells();
        let height = mesh.geometry.height;
        let h: Vec<f64> = (0..n)
            .map(|c| {
                let z = mesh.z_center[c / mesh.n_r()];
                p.physics.pressure_head(p.inlet_pressure * z / height) + z
            })
            .collect();
        let temperature = vec![p.physics.initial_temperature; n];
        let viscosity = self.viscosity(&temperature);
        let flows = self.flows_for(&h, &viscosity);
        let mut solid = Vec::with_capacity(N_FRACTIONS * N_SPECIES);
        for v in 0..N_FRACTIONS {
            for k in 0..N_SPECIES {
                solid.push(vec![p.solid0[v][k]; n]);
            }
        }
        SimState {
            t: 0.0,
            step: 0,
            h,
            temperature,
            conc: vec![vec![0.0; n]; N_SPECIES],
            solid,
            flows,
            effluent_accum: [0.0; N_SPECIES],
            effluent_volume: 0.0,
            outlet_rate: [0.0; N_SPECIES],
            viscosity,
            heat_rate_prev: None,
            clamped: 0,
            clamped_mass: 0.0,
        }
    }

    /// Advances one step of length `dt`.
    pub fn step(&self, state: &SimState, dt: f64) -> Result<SimState> {
        let mut stats = RunStats::default();
        self.step_with_stats(state, dt, &mut stats)
    }

    fn step_with_stats(&self, state: &SimState, dt: f64, stats: &mut RunStats) -> Result<SimState> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::invalid("dt", format!("time step must be positive, got {dt}")));
        }
        let wrap = |e: Error| Error::StepFailed {
            time: state.t,
            source: Box::new(e),
        };
        self.advance(state, dt, stats).map_err(wrap)
    }

    fn advance(&self, s: &SimState, dt: f64, stats: &mut RunStats) -> Result<SimState> {
        let mesh = &self.mesh;
        let p = &self.params;
        let ph = &p.physics;
        let n = mesh.n_cells();
        // Backward Euler for the head during start-up damps the stiff
        // transient of the initial pressure profile; everything else is CN.
        let theta_head = if s.step < p.numerics.startup_steps { 1.0 } else { 0.5 };
        let theta = 0.5;
        let opts = p.numerics.solver;

        // Temperature predictor.
        let heat_co = self.heat_coeffs();
        let heat_cap: Vec<f64> = self.volumes.iter().map(|v| v * ph.bed_heat_capacity()).collect();
        let heat_old = assemble::heat_operator(mesh, &heat_co, &s.flows);
        let heat_rate: Vec<f64> = heat_old
            .rate(&s.temperature)
            .iter()
            .zip(&heat_cap)
            .map(|(r, m)| r / m)
            .collect();
        let t_pred: Vec<f64> = match &s.heat_rate_prev {
            Some(prev) => (0..n)
                .map(|c| s.temperature[c] + dt * (1.5 * heat_rate[c] - 0.5 * prev[c]))
                .collect(),
            None => (0..n).map(|c| s.temperature[c] + dt * heat_rate[c]).collect(),
        };

        // Head corrector.
        let visc_new = self.viscosity(&t_pred);
        let (kr_old, kz_old) = self.conductivities(&s.viscosity);
        let (kr_new, kz_new) = self.conductivities(&visc_new);
        let probe = vec![true; mesh.n_r()];
        let active = assemble::outlet_switch(mesh, &self.head_coeffs(&kr_old, &kz_old, &probe), &s.h);
        let head_old_co = self.head_coeffs(&kr_old, &kz_old, &active);
        let head_new_co = self.head_coeffs(&kr_new, &kz_new, &active);
        let head_old = assemble::head_operator(mesh, &head_old_co);
        let head_new = assemble::head_operator(mesh, &head_new_co);
        let storage: Vec<f64> = self.volumes.iter().map(|v| v * ph.specific_storage).collect();
        let mut lin = Linear {
            kind: SolverKind::Pcg,
            opts,
            stats,
        };
        let h = theta_solve(&storage, dt, theta_head, &head_old, &head_new, &s.h, None, &mut lin)?;
        let flows = assemble::head_flows(mesh, &head_new_co, &h);

        // Heat corrector.
        let heat_new = assemble::heat_operator(mesh, &heat_co, &flows);
        lin.kind = SolverKind::Bicgstab;
        let temperature = theta_solve(&heat_cap, dt, theta, &heat_old, &heat_new, &s.temperature, None, &mut lin)?;

        // Solid depletion, exact for the theta rule applied to dC_s/dt = −alpha C_s.
        let eps = ph.porosity;
        let eps_s = ph.solid_fraction();
        let mut solid = Vec::with_capacity(s.solid.len());
        for v in 0..N_FRACTIONS {
            for k in 0..N_SPECIES {
                let a = p.alpha[v][k];
                let ratio = solid_ratio(theta, a, dt);
                solid.push(s.solid[v * N_SPECIES + k].iter().map(|c| c * ratio).collect::<Vec<f64>>());
            }
        }

        // Transport corrector per species.
        lin.kind = p.numerics.transport_solver;
        let pore: Vec<f64> = self.volumes.iter().map(|v| v * eps).collect();
        let mut conc = Vec::with_capacity(N_SPECIES);
        let mut accum = s.effluent_accum;
        let mut outlet_rate = [0.0; N_SPECIES];
        let mut clamped = s.clamped;
        let mut clamped_mass = s.clamped_mass;
        for k in 0..N_SPECIES {
            let co = self.transport_coeffs(k);
            let exchange = assemble::exchange_switch(mesh, &co, &s.conc[k]);
            let old = assemble::transport_operator(mesh, &co, &s.flows, &exchange);
            let new = assemble::transport_operator(mesh, &co, &flows, &exchange);
            let mut source = vec![0.0; n];
            for v in 0..N_FRACTIONS {
                let a = p.alpha[v][k];
                if a == 0.0 {
                    continue;
                }
                let before = &s.solid[v * N_SPECIES + k];
                let after = &solid[v * N_SPECIES + k];
                for c in 0..n {
                    source[c] +=
                        a * eps_s * self.volumes[c] * ((1.0 - theta) * before[c] + theta * after[c]);
                }
            }
            let mut ck = theta_solve(&pore, dt, theta, &old, &new, &s.conc[k], Some(&source), &mut lin)?;
            let rate_old = assemble::outlet_mass_rate(mesh, &co, &s.flows, &exchange, &s.conc[k]);
            let rate_new = assemble::outlet_mass_rate(mesh, &co, &flows, &exchange, &ck);
            let back_old = assemble::inlet_backflow_rate(mesh, &s.flows, &s.conc[k]);
            let back_new = assemble::inlet_backflow_rate(mesh, &flows, &ck);
            // Backflow through the inlet is counted as effluent so the audit closes.
            accum[k] += dt * ((1.0 - theta) * (rate_old + back_old) + theta * (rate_new + back_new));
            outlet_rate[k] = rate_new + back_new;
            for (c, v) in ck.iter_mut().enumerate() {
                if *v < 0.0 {
                    clamped += 1;
                    clamped_mass += -*v * pore[c];
                    *v = 0.0;
                }
            }
            conc.push(ck);
        }
        let volume = s.effluent_volume
            + dt * ((1.0 - theta) * s.flows.outflow(mesh) + theta * flows.outflow(mesh));

        let next = SimState {
            t: s.t + dt,
            step: s.step + 1,
            h,
            temperature,
            conc,
            solid,
            flows,
            effluent_accum: accum,
            effluent_volume: volume,
            outlet_rate,
            viscosity: visc_new,
            heat_rate_prev: Some(heat_rate),
            clamped,
            clamped_mass,
        };
        next.check_finite()?;
        Ok(next)
    }

    /// Mass balance of a state against the initial inventory.
    pub fn audit(&self, state: &SimState) -> MassAudit {
        let ph = &self.params.physics;
        let eps_s = ph.solid_fraction();
        let total_volume: f64 = self.volumes.iter().sum();
        let mut a = MassAudit {
            initial_solid: [0.0; N_SPECIES],
            dissolved: [0.0; N_SPECIES],
            remaining_solid: [0.0; N_SPECIES],
            effluent: state.effluent_accum,
            relative_error: [0.0; N_SPECIES],
        };
        for k in 0..N_SPECIES {
            a.initial_solid[k] = eps_s * total_volume * self.params.solid0_total(k);
            a.dissolved[k] = ph.porosity * self.mesh.integrate(&state.conc[k]);
            a.remaining_solid[k] = eps_s * self.mesh.integrate(&state.solid_total(k));
            let closing = a.dissolved[k] + a.remaining_solid[k] + a.effluent[k];
            a.relative_error[k] = if a.initial_solid[k] > 0.0 {
                (closing - a.initial_solid[k]).abs() / a.initial_solid[k]
            } else {
                closing.abs()
            };
        }
        a
    }

    /// Number of steps and uniform step length covering `[0, tau]`.
    pub fn schedule(&self) -> (usize, f64) {
        let tau = self.params.physics.tau;
        let steps = ((tau / self.params.numerics.dt) - 1e-9).ceil().max(1.0) as usize;
        (steps, tau / steps as f64)
    }

    /// Integrates from `t = 0` to `tau`.
    pub fn run(&self) -> Result<RunOutput> {
        let (steps, dt) = self.schedule();
        let mut state = self.initial_state();
        let mut stats = RunStats::default();
        let cap = steps + 1;
        let mut times = Vec::with_capacity(cap);
        let mut cumulative = Vec::with_capacity(cap);
        let mut rates = Vec::with_capacity(cap);
        let mut volume = Vec::with_capacity(cap);
        let record = |st: &SimState, times: &mut Vec<f64>, cum: &mut Vec<[f64; N_SPECIES]>, r: &mut Vec<_>, v: &mut Vec<f64>| {
            times.push(st.t);
            cum.push(st.effluent_accum.map(|m| m * MG_PER_KG));
            r.push(st.outlet_rate.map(|m| m * MG_PER_KG));
            v.push(st.effluent_volume * ML_PER_M3);
        };
        record(&state, &mut times, &mut cumulative, &mut rates, &mut volume);
        for i in 0..steps {
            state = self.step_with_stats(&state, dt, &mut stats)?;
            if i + 1 == steps {
                // Pin the final time to tau exactly.
                state.t = self.params.physics.tau;
            }
            record(&state, &mut times, &mut cumulative, &mut rates, &mut volume);
        }
        stats.steps = steps;
        let audit = self.audit(&state);
        Ok(RunOutput {
            times,
            cumulative,
            rates,
            volume,
            final_state: state,
            audit,
            stats,
            complete: true,
        })
    }
}

/// Runs one recipe under a configuration.
pub fn run(cfg: &SimConfig, recipe: &Recipe) -> Result<RunOutput> {
    Simulator::from_config(cfg, recipe)?.run()
}

/// Final effluent chemistry of a completed run in mg.
pub fn final_chemistry(out: &RunOutput) -> Result<Chemistry> {
    Chemistry::new(out.final_cumulative())
}
