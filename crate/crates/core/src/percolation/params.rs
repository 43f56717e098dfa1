//! Simulator configuration: geometry, physical constants, reaction tables.
//!
//! Every default below is synthetic. The values produce plausible espresso
//! extraction curves (tens of millilitres in 30 s, a few hundred milligrams of
//! solutes) but are not calibrated against any measurement.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::ProjectionMode;
use crate::percolation::linalg::{SolverKind, SolverOptions};
use crate::percolation::mesh::PodGeometry;
use crate::types::{
    AdmissibleBox, Granulometry, ParticleScales, Recipe, Species, FRACTION_TAGS, N_FRACTIONS, N_SPECIES, SPECIES,
    SPECIES_TAGS,
};

pub const SCHEMA_VERSION: u32 = 1;

/// Physical constants of the percolation model, SI units throughout
/// (temperatures in °C, pressures in bar, concentrations in kg/m³).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalParams {
    /// `S0`, 1/m.
    pub specific_storage: f64,
    /// Radial and axial hydraulic conductivity at 20 °C for the reference
    /// particle scale, m/s. Scales with the square of the particle scale.
    pub conductivity: [f64; 2],
    /// `f_mu(T) = exp(viscosity_slope · (T − 20))`.
    pub viscosity_slope: f64,
    /// `chi(p) = chi0 + chi1 · p`.
    pub chi0: f64,
    pub chi1: f64,
    pub porosity: f64,
    /// `rho c`, J/(m³ K).
    pub fluid_heat_capacity: f64,
    /// `rho_s c_s`, J/(m³ K).
    pub solid_heat_capacity: f64,
    /// Radial and axial thermal conductivity, W/(m K).
    pub thermal_conductivity: [f64; 2],
    /// Molecular diffusivity per species, m²/s.
    pub molecular_diffusion: [f64; N_SPECIES],
    /// Mechanical dispersion at the reference particle scale, m²/s; scales
    /// linearly with the particle scale.
    pub mechanical_dispersion: f64,
    /// Bottom exchange coefficient for the head, 1/s.
    pub phi_h: f64,
    /// Reference head below the outlet, m.
    pub h_c: f64,
    /// Bottom exchange coefficients per species, m/s.
    pub phi_k: [f64; N_SPECIES],
    pub c_kc: [f64; N_SPECIES],
    /// `T0`, initial bed temperature, °C.
    pub initial_temperature: f64,
    /// Percolation time, s.
    pub tau: f64,
    pub water_density: f64,
    pub gravity: f64,
    /// Particle scale (µm) at which `conductivity` and `mechanical_dispersion` apply.
    pub reference_particle_scale: f64,
}

impl Default for PhysicalParams {
    fn default() -> Self {
        Self {
            specific_storage: 1e-4,
            conductivity: [2.4e-8, 2.4e-8],
            viscosity_slope: 0.0164,
            chi0: 0.0,
            chi1: 4.6e-5,
            porosity: 0.4,
            fluid_heat_capacity: 4.18e6,
            solid_heat_capacity: 1.5e6,
            thermal_conductivity: [0.4, 0.4],
            molecular_diffusion: [6.0e-10, 4.0e-10, 6.5e-10, 5.0e-10, 7.0e-10, 6.0e-10, 1.2e-9, 1.0e-10],
            mechanical_dispersion: 1.0e-7,
            phi_h: 3.5e-5,
            h_c: 0.0,
            phi_k: [1.0e-5; N_SPECIES],
            c_kc: [0.0; N_SPECIES],
            initial_temperature: 80.0,
            tau: 30.0,
            water_density: 1000.0,
            gravity: 9.81,
            reference_particle_scale: 250.0,
        }
    }
}

impl PhysicalParams {
    pub fn f_mu(&self, temperature: f64) -> f64 {
        (self.viscosity_slope * (temperature - 20.0)).exp()
    }

    pub fn chi(&self, pressure: f64) -> f64 {
        self.chi0 + self.chi1 * pressure
    }

    pub fn solid_fraction(&self) -> f64 {
        1.0 - self.porosity
    }

    /// Bed volumetric heat capacity `eps·rho c + eps_s·rho_s c_s`.
    pub fn bed_heat_capacity(&self) -> f64 {
        self.porosity * self.fluid_heat_capacity + self.solid_fraction() * self.solid_heat_capacity
    }

    /// Head equivalent of a pressure in bar.
    pub fn pressure_head(&self, bar: f64) -> f64 {
        bar * 1e5 / (self.water_density * self.gravity)
    }

    pub fn validate(&self, domain: &AdmissibleBox) -> Result<()> {
        let positive = [
            ("specific_storage", self.specific_storage),
            ("conductivity[0]", self.conductivity[0]),
            ("conductivity[1]", self.conductivity[1]),
            ("fluid_heat_capacity", self.fluid_heat_capacity),
            ("solid_heat_capacity", self.solid_heat_capacity),
            ("thermal_conductivity[0]", self.thermal_conductivity[0]),
            ("thermal_conductivity[1]", self.thermal_conductivity[1]),
            ("phi_h", self.phi_h),
            ("tau", self.tau),
            ("water_density", self.water_density),
            ("gravity", self.gravity),
            ("reference_particle_scale", self.reference_particle_scale),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("physics.{name} must be positive, got {v}")));
            }
        }
        if !(self.porosity > 0.0 && self.porosity < 1.0) {
            return Err(Error::Config(format!("physics.porosity must lie in (0, 1), got {}", self.porosity)));
        }
        for k in 0..N_SPECIES {
            if !(self.molecular_diffusion[k] >= 0.0 && self.phi_k[k] > 0.0 && self.c_kc[k] >= 0.0) {
                return Err(Error::Config(format!(
                    "physics: species `{}` needs D_mol ≥ 0, phi_k > 0, c_kc ≥ 0",
                    SPECIES_TAGS[k]
                )));
            }
        }
        if !(self.mechanical_dispersion >= 0.0 && self.mechanical_dispersion + self.molecular_diffusion[0] > 0.0) {
            return Err(Error::Config("physics.mechanical_dispersion must be non-negative".into()));
        }
        for t in [domain.t_min, domain.t_max, self.initial_temperature] {
            let f = self.f_mu(t);
            if !(f.is_finite() && f > 0.0) {
                return Err(Error::Config(format!("f_mu({t}) = {f} is not finite and positive")));
            }
        }
        let chi = self.chi(domain.pressure);
        if !(chi.is_finite() && chi > 0.0) {
            return Err(Error::Config(format!("chi({}) = {chi} is not finite and positive", domain.pressure)));
        }
        Ok(())
    }
}

/// Coefficients `(A0, a, b, c, d, f, l, m)` of the rate polynomial
/// `A0 + a T + b p + c T² + d p² + f T p + l T² p + m T p²`.
pub type RatePolynomial = [f64; 8];

pub fn eval_rate_polynomial(c: &RatePolynomial, t: f64, p: f64) -> f64 {
    let [a0, a, b, cc, d, f, l, m] = *c;
    a0 + t * (a + cc * t + f * p + l * t * p + m * p * p) + p * (b + d * p)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReactionRow {
    /// Fraction tag the table belongs to: `fA`, `fR`, `fL` or `fE`.
    pub variety: String,
    pub gran: Granulometry,
    pub species: String,
    pub coeffs: RatePolynomial,
}

/// Rate-polynomial tables indexed by coffee variety, granulometry and species.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReactionCoeffs {
    pub rows: Vec<ReactionRow>,
}

fn variety_index(tag: &str) -> Option<usize> {
    FRACTION_TAGS.iter().position(|t| *t == tag)
}

fn species_index(tag: &str) -> Option<usize> {
    SPECIES_TAGS.iter().position(|t| *t == tag)
}

/// Dense lookup table `[variety][gran][species]`.
pub type RateTable = [[[RatePolynomial; N_SPECIES]; 3]; N_FRACTIONS];

impl ReactionCoeffs {
    /// Validates coverage and builds the dense lookup table.
    pub fn table(&self) -> Result<RateTable> {
        let mut table = [[[[0.0; 8]; N_SPECIES]; 3]; N_FRACTIONS];
        let mut seen = [[[false; N_SPECIES]; 3]; N_FRACTIONS];
        for row in &self.rows {
            let v = variety_index(&row.variety)
                .ok_or_else(|| Error::Config(format!("reaction row: unknown variety `{}`", row.variety)))?;
            let s = species_index(&row.species)
                .ok_or_else(|| Error::Config(format!("reaction row: unknown species `{}`", row.species)))?;
            let g = row.gran.code();
            if seen[v][g][s] {
                return Err(Error::Config(format!(
                    "duplicate reaction row for ({}, {}, {})",
                    row.variety, row.gran, row.species
                )));
            }
            if row.coeffs.iter().any(|c| !c.is_finite()) {
                return Err(Error::Config(format!(
                    "non-finite coefficient in reaction row ({}, {}, {})",
                    row.variety, row.gran, row.species
                )));
            }
            seen[v][g][s] = true;
            table[v][g][s] = row.coeffs;
        }
        for v in 0..N_FRACTIONS {
            for g in Granulometry::ALL {
                for s in 0..N_SPECIES {
                    if !seen[v][g.code()][s] {
                        return Err(Error::Config(format!(
                            "missing reaction row for ({}, {}, {})",
                            FRACTION_TAGS[v], g, SPECIES_TAGS[s]
                        )));
                    }
                }
            }
        }
        Ok(table)
    }

    /// `alpha_k` for one variety, granulometry and species.
    pub fn alpha(&self, variety: usize, species: Species, gran: Granulometry, t: f64, p: f64) -> Result<f64> {
        let tag = FRACTION_TAGS
            .get(variety)
            .ok_or_else(|| Error::Config(format!("variety index {variety} out of range")))?;
        self.rows
            .iter()
            .find(|r| r.variety == *tag && r.gran == gran && r.species == species.tag())
            .map(|r| eval_rate_polynomial(&r.coeffs, t, p))
            .ok_or_else(|| Error::Config(format!("missing reaction row for ({tag}, {gran}, {})", species.tag())))
    }

    /// Checks `alpha ≥ 0` on a fine temperature sweep of the admissible box.
    pub fn check_nonnegative(&self, domain: &AdmissibleBox) -> Result<()> {
        let table = self.table()?;
        let n = 40;
        for (v, by_gran) in table.iter().enumerate() {
            for (g, by_species) in by_gran.iter().enumerate() {
                for (s, coeffs) in by_species.iter().enumerate() {
                    for i in 0..=n {
                        let t = domain.t_min + (domain.t_max - domain.t_min) * i as f64 / n as f64;
                        let a = eval_rate_polynomial(coeffs, t, domain.pressure);
                        if !(a >= 0.0) {
                            return Err(Error::Config(format!(
                                "alpha for ({}, {}, {}) is {a} < 0 at T = {t}, p = {}",
                                FRACTION_TAGS[v],
                                Granulometry::ALL[g],
                                SPECIES_TAGS[s],
                                domain.pressure
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Synthetic default table.
    ///
    /// Each rate is `beta · (1 + s u + q u²) · (1 + pi v)` with
    /// `u = (T − 93)/10`, `v = (p − 9)/9`, expanded into the polynomial basis.
    /// `beta` combines a per-species base rate, a per-variety multiplier and a
    /// power law in the particle scale.
    pub fn synthetic(scales: &ParticleScales, reference_scale: f64) -> Self {
        const BASE: [f64; N_SPECIES] = [0.035, 0.025, 0.030, 0.012, 0.028, 0.040, 0.050, 0.008];
        const SLOPE: [f64; N_SPECIES] = [0.4, 0.9, 0.3, 1.2, 0.6, 0.2, 0.1, 1.5];
        const CURVE: [f64; N_SPECIES] = [0.05, 0.1, 0.0, 0.15, 0.05, 0.0, 0.0, 0.2];
        const GRIND_EXP: [f64; N_SPECIES] = [1.0, 1.2, 0.8, 1.5, 1.0, 0.9, 0.6, 2.0];
        const PRESSURE: f64 = 0.05;
        const VARIETY: [[f64; N_SPECIES]; N_FRACTIONS] = [
            [1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0],
            [1.15, 0.85, 1.1, 0.9, 1.2, 0.8, 1.0, 1.3],
            [0.9, 1.2, 0.85, 1.25, 0.9, 1.15, 1.3, 0.8],
            [1.05, 0.95, 1.25, 0.8, 1.1, 1.3, 0.75, 1.1],
        ];
        let (t0, dt, p0, dp) = (93.0, 10.0, 9.0, 9.0);
        let mut rows = Vec::with_capacity(N_FRACTIONS * 3 * N_SPECIES);
        for (v, mult) in VARIETY.iter().enumerate() {
            for g in Granulometry::ALL {
                let grind = reference_scale / scales.get(g);
                for s in SPECIES {
                    let k = s.index();
                    let beta = BASE[k] * mult[k] * grind.powf(GRIND_EXP[k]);
                    let (sl, q) = (SLOPE[k], CURVE[k]);
                    let a2 = q / (dt * dt);
                    let a1 = sl / dt - 2.0 * q * t0 / (dt * dt);
                    let a0 = 1.0 - sl * t0 / dt + q * t0 * t0 / (dt * dt);
                    let b1 = PRESSURE / dp;
                    let b0 = 1.0 - PRESSURE * p0 / dp;
                    rows.push(ReactionRow {
                        variety: FRACTION_TAGS[v].to_string(),
                        gran: g,
                        species: s.tag().to_string(),
                        coeffs: [
                            beta * a0 * b0,
                            beta * a1 * b0,
                            beta * a0 * b1,
                            beta * a2 * b0,
                            0.0,
                            beta * a1 * b1,
                            beta * a2 * b1,
                            0.0,
                        ],
                    });
                }
            }
        }
        Self { rows }
    }
}

/// Initial solid concentrations (kg per m³ of solid) of each pure variety.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Inventory {
    #[serde(rename = "fA")]
    pub a: [f64; N_SPECIES],
    #[serde(rename = "fR")]
    pub r: [f64; N_SPECIES],
    #[serde(rename = "fL")]
    pub l: [f64; N_SPECIES],
    #[serde(rename = "fE")]
    pub e: [f64; N_SPECIES],
}

impl Default for Inventory {
    fn default() -> Self {
        Self {
            a: [12.0, 45.0, 10.0, 1.0, 2.5, 9.0, 4.0, 16.0],
            r: [22.0, 60.0, 6.0, 1.8, 1.2, 5.0, 3.0, 9.0],
            l: [14.0, 35.0, 12.0, 0.7, 3.5, 12.0, 6.0, 12.0],
            e: [10.0, 50.0, 8.0, 1.4, 2.0, 7.0, 8.0, 20.0],
        }
    }
}

impl Inventory {
    pub fn rows(&self) -> [[f64; N_SPECIES]; N_FRACTIONS] {
        [self.a, self.r, self.l, self.e]
    }
}

/// Time stepping and linear-solver settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Numerics {
    pub dt: f64,
    /// Leading steps in which the head is advanced with backward Euler to
    /// damp the start-up transient before switching to Crank–Nicolson.
    pub startup_steps: usize,
    pub solver: SolverOptions,
    pub transport_solver: SolverKind,
}

impl Default for Numerics {
    fn default() -> Self {
        Self {
            dt: 0.05,
            startup_steps: 2,
            solver: SolverOptions::default(),
            transport_solver: SolverKind::Bicgstab,
        }
    }
}

/// Complete simulator configuration as stored in TOML.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub schema_version: u32,
    pub geometry: PodGeometry,
    pub numerics: Numerics,
    pub domain: AdmissibleBox,
    pub particle_scales: ParticleScales,
    pub physics: PhysicalParams,
    pub inventory: Inventory,
    pub reactions: ReactionCoeffs,
    /// How a finished run is reduced to cup chemistry.
    #[serde(default)]
    pub projection: ProjectionMode,
}

impl Default for SimConfig {
    fn default() -> Self {
        let physics = PhysicalParams::default();
        let particle_scales = ParticleScales::default();
        let reactions = ReactionCoeffs::synthetic(&particle_scales, physics.reference_particle_scale);
        Self {
            schema_version: SCHEMA_VERSION,
            geometry: PodGeometry::default(),
            numerics: Numerics::default(),
            domain: AdmissibleBox::default(),
            particle_scales,
            physics,
            inventory: Inventory::default(),
            reactions,
            projection: ProjectionMode::default(),
        }
    }
}

impl SimConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: SimConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serde(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        self.geometry.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.particle_scales.validate().map_err(|e| Error::Config(e.to_string()))?;
        if !(self.domain.t_min < self.domain.t_max && self.domain.pressure > 0.0) {
            return Err(Error::Config("domain: need t_min < t_max and positive pressure".into()));
        }
        let n = &self.numerics;
        if !(n.dt > 0.0 && n.dt <= self.physics.tau) {
            return Err(Error::Config(format!("numerics.dt must lie in (0, tau], got {}", n.dt)));
        }
        if !(n.solver.rel_tol > 0.0 && n.solver.max_iter >= 1) {
            return Err(Error::Config("numerics.solver needs rel_tol > 0 and max_iter ≥ 1".into()));
        }
        if n.transport_solver == SolverKind::Pcg {
            return Err(Error::Config("transport operators are nonsymmetric; PCG is not allowed".into()));
        }
        self.physics.validate(&self.domain)?;
        for (v, row) in self.inventory.rows().iter().enumerate() {
            if row.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
                return Err(Error::Config(format!(
                    "inventory.{} has a negative or non-finite entry",
                    FRACTION_TAGS[v]
                )));
            }
        }
        self.reactions.check_nonnegative(&self.domain)
    }
}

/// Fully resolved parameters of one simulation: the configuration with the
/// recipe's controllable entries substituted.
#[derive(Clone, Debug, PartialEq)]
pub struct ResolvedParams {
    pub geometry: PodGeometry,
    pub numerics: Numerics,
    pub physics: PhysicalParams,
    /// `T_z0`, °C.
    pub inlet_temperature: f64,
    /// `p_z0`, bar.
    pub inlet_pressure: f64,
    /// `h_z0`, m.
    pub inlet_head: f64,
    pub chi: f64,
    /// Radial and axial conductivity at 20 °C for this granulometry, m/s.
    pub conductivity: [f64; 2],
    /// Isotropic dispersion per species, m²/s.
    pub dispersion: [f64; N_SPECIES],
    /// Rate constants `[variety][species]`, 1/s.
    pub alpha: [[f64; N_SPECIES]; N_FRACTIONS],
    /// Initial solid concentration contributed by each variety, `[variety][species]`.
    pub solid0: [[f64; N_SPECIES]; N_FRACTIONS],
}

impl ResolvedParams {
    pub fn new(cfg: &SimConfig, recipe: &Recipe) -> Result<Self> {
        cfg.domain.check(recipe)?;
        let physics = cfg.physics.clone();
        let table = cfg.reactions.table()?;
        let scale = cfg.particle_scales.get(recipe.granulometry) / physics.reference_particle_scale;
        let conductivity = physics.conductivity.map(|k| k * scale * scale);
        let dispersion = physics
            .molecular_diffusion
            .map(|d| d + physics.mechanical_dispersion * scale);
        let g = recipe.granulometry.code();
        let mut alpha = [[0.0; N_SPECIES]; N_FRACTIONS];
        let mut solid0 = [[0.0; N_SPECIES]; N_FRACTIONS];
        let inventory = cfg.inventory.rows();
        for v in 0..N_FRACTIONS {
            for k in 0..N_SPECIES {
                alpha[v][k] = eval_rate_polynomial(&table[v][g][k], recipe.temperature, recipe.pressure);
                solid0[v][k] = recipe.fractions[v] * inventory[v][k];
            }
        }
        let inlet_head = physics.pressure_head(recipe.pressure) + cfg.geometry.height;
        Ok(Self {
            geometry: cfg.geometry,
            numerics: cfg.numerics.clone(),
            inlet_temperature: recipe.temperature,
            inlet_pressure: recipe.pressure,
            inlet_head,
            chi: physics.chi(recipe.pressure),
            conductivity,
            dispersion,
            alpha,
            solid0,
            physics,
        })
    }

    /// Initial solid concentration of one species summed over varieties.
    pub fn solid0_total(&self, species: usize) -> f64 {
        (0..N_FRACTIONS).map(|v| self.solid0[v][species]).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn oracle(c: &RatePolynomial, t: f64, p: f64) -> f64 {
        c[0] + c[1] * t + c[2] * p + c[3] * t * t + c[4] * p * p + c[5] * t * p + c[6] * t * t * p + c[7] * t * p * p
    }

    #[test]
    fn polynomial_single_terms() {
        let mut c = [0.0; 8];
        c[0] = 2.0;
        assert_eq!(eval_rate_polynomial(&c, 90.0, 9.0), 2.0);
        let mut c = [0.0; 8];
        c[1] = 1.0;
        assert_eq!(eval_rate_polynomial(&c, 90.0, 9.0), 90.0);
    }

    #[test]
    fn default_table_matches_term_by_term_oracle() {
        let cfg = SimConfig::default();
        for row in &cfg.reactions.rows {
            let a = eval_rate_polynomial(&row.coeffs, 93.0, 9.0);
            let b = oracle(&row.coeffs, 93.0, 9.0);
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1e-12), "{a} vs {b}");
            assert!(a > 0.0);
        }
    }

    #[test]
    fn synthetic_expansion_reproduces_factored_form() {
        let scales = ParticleScales::default();
        let coeffs = ReactionCoeffs::synthetic(&scales, 250.0);
        // Caffeine, variety A, granulometry O: beta = 0.035, s = 0.4, q = 0.05, pi = 0.05.
        let a = coeffs.alpha(0, Species::Caffeine, Granulometry::O, 95.5, 9.0).unwrap();
        let u: f64 = 0.25;
        let expected = 0.035 * (1.0 + 0.4 * u + 0.05 * u * u);
        assert!((a - expected).abs() < 1e-14, "{a} vs {expected}");
    }

    #[test]
    fn missing_row_is_config_error() {
        let mut cfg = SimConfig::default();
        cfg.reactions.rows.pop();
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn negative_rate_rejected_at_load() {
        let mut cfg = SimConfig::default();
        cfg.reactions.rows[5].coeffs = [-1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let err = cfg.validate().unwrap_err().to_string();
        assert!(err.contains("< 0"), "{err}");
    }

    #[test]
    fn toml_round_trip() {
        let cfg = SimConfig::default();
        let text = cfg.to_toml_string().unwrap();
        assert!(text.contains("schema_version = 1"));
        let back = SimConfig::from_toml_str(&text).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn wrong_schema_version_rejected() {
        let text = SimConfig::default().to_toml_string().unwrap().replace("schema_version = 1", "schema_version = 7");
        assert!(SimConfig::from_toml_str(&text).is_err());
    }

    #[test]
    fn embedding_assigns_recipe_entries() {
        let cfg = SimConfig::default();
        let recipe = Recipe::new(93.0, 9.0, Granulometry::O, [1.0, 0.0, 0.0, 0.0]).unwrap();
        let p = ResolvedParams::new(&cfg, &recipe).unwrap();
        assert_eq!(p.inlet_temperature, 93.0);
        assert_eq!(p.solid0[0], cfg.inventory.a);
        assert!(p.solid0[1].iter().all(|v| *v == 0.0));
        let half = Recipe::new(93.0, 9.0, Granulometry::O, [0.5, 0.5, 0.0, 0.0]).unwrap();
        let p = ResolvedParams::new(&cfg, &half).unwrap();
        for k in 0..N_SPECIES {
            let mean = 0.5 * (cfg.inventory.a[k] + cfg.inventory.r[k]);
            assert!((p.solid0_total(k) - mean).abs() < 1e-12);
        }
    }

    #[test]
    fn out_of_box_recipe_is_domain_error() {
        let cfg = SimConfig::default();
        let recipe = Recipe::new(99.5, 9.0, Granulometry::O, [1.0, 0.0, 0.0, 0.0]).unwrap();
        assert!(matches!(ResolvedParams::new(&cfg, &recipe), Err(Error::Domain(_))));
    }
}
