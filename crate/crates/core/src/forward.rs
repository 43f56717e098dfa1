//! The reduced forward operator: recipe in, cup chemistry out.
//!
//! `f = project ∘ run ∘ embed`. Everything the recipe does not control comes
//! from the simulator configuration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::percolation::{ResolvedParams, RunOutput, SimConfig, Simulator};
use crate::types::{Chemistry, Recipe, N_SPECIES};

/// Simulator configuration plus projection mode; `t_end` is `physics.tau`.
pub type ForwardConfig = SimConfig;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjectionMode {
    /// Accumulated solute mass in the cup, mg.
    #[default]
    EffluentTotal,
    /// Accumulated mass over accumulated volume, mg/mL.
    EffluentConcentration,
}

/// Substitutes the recipe into the configuration.
pub fn embed(cfg: &ForwardConfig, recipe: &Recipe) -> Result<ResolvedParams> {
    ResolvedParams::new(cfg, recipe)
}

/// Reduces a finished run to the chemistry vector.
pub fn project(out: &RunOutput, mode: ProjectionMode) -> Result<Chemistry> {
    if !out.complete || out.times.is_empty() {
        return Err(Error::Contract("cannot project an incomplete run".into()));
    }
    let total = out.final_cumulative();
    match mode {
        ProjectionMode::EffluentTotal => Chemistry::new(total),
        ProjectionMode::EffluentConcentration => {
            let volume = out.final_volume();
            if volume <= 0.0 {
                if total.iter().all(|m| *m == 0.0) {
                    return Ok(Chemistry::zero());
                }
                return Err(Error::Undefined("effluent concentration with zero volume".into()));
            }
            let mut c = [0.0; N_SPECIES];
            for k in 0..N_SPECIES {
                c[k] = total[k] / volume;
            }
            Chemistry::new(c)
        }
    }
}

/// Simulates one recipe and returns both the run and its projection.
pub fn simulate(cfg: &ForwardConfig, recipe: &Recipe) -> Result<(RunOutput, Chemistry)> {
    let out = Simulator::new(embed(cfg, recipe)?)?.run()?;
    let chem = project(&out, cfg.projection)?;
    Ok((out, chem))
}

/// `f(x)`.
pub fn f(cfg: &ForwardConfig, recipe: &Recipe) -> Result<Chemistry> {
    simulate(cfg, recipe).map(|(_, c)| c)
}
