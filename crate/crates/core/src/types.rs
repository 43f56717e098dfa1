//! Domain types shared by every stage of the pipeline.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of chemical species tracked in the cup.
pub const N_SPECIES: usize = 8;
/// Number of blend components (coffee varieties).
pub const N_FRACTIONS: usize = 4;
/// Width of the recipe feature vector: T, p, granulometry code, 4 fractions.
pub const N_RECIPE_FEATURES: usize = 3 + N_FRACTIONS;

/// Canonical solute order. Every file, scaler and network head uses it.
pub const SPECIES: [Species; N_SPECIES] = [
    Species::Caffeine,
    Species::ChlorogenicAcids,
    Species::Trigonelline,
    Species::FerulicAcid,
    Species::TartaricAcid,
    Species::CitricAcid,
    Species::AceticAcid,
    Species::Lipids,
];

/// Column tags of the species in dataset files, in canonical order.
pub const SPECIES_TAGS: [&str; N_SPECIES] = ["caf", "chl", "tri", "fer", "tar", "cit", "ace", "lip"];

/// Column tags of the blend fractions in dataset files.
pub const FRACTION_TAGS: [&str; N_FRACTIONS] = ["fA", "fR", "fL", "fE"];

/// Tolerance on the sum of blend fractions.
pub const SIMPLEX_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Species {
    Caffeine,
    ChlorogenicAcids,
    Trigonelline,
    FerulicAcid,
    TartaricAcid,
    CitricAcid,
    AceticAcid,
    Lipids,
}

impl Species {
    pub fn index(self) -> usize {
        SPECIES.iter().position(|&s| s == self).unwrap()
    }

    pub fn tag(self) -> &'static str {
        SPECIES_TAGS[self.index()]
    }

    pub fn name(self) -> &'static str {
        match self {
            Species::Caffeine => "caffeine",
            Species::ChlorogenicAcids => "chlorogenic acids",
            Species::Trigonelline => "trigonelline",
            Species::FerulicAcid => "ferulic acid",
            Species::TartaricAcid => "tartaric acid",
            Species::CitricAcid => "citric acid",
            Species::AceticAcid => "acetic acid",
            Species::Lipids => "lipids",
        }
    }
}

/// Grind-size class of the powder.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Granulometry {
    /// Coarse.
    G,
    /// Optimal.
    O,
    /// Fine.
    F,
}

impl Granulometry {
    pub const ALL: [Granulometry; 3] = [Granulometry::G, Granulometry::O, Granulometry::F];

    /// Integer encoding: G → 0, O → 1, F → 2.
    pub fn code(self) -> usize {
        match self {
            Granulometry::G => 0,
            Granulometry::O => 1,
            Granulometry::F => 2,
        }
    }

    pub fn from_code(code: usize) -> Result<Self> {
        Self::ALL
            .get(code)
            .copied()
            .ok_or_else(|| Error::Parse(format!("granulometry code {code} is not one of 0, 1, 2")))
    }

    pub fn letter(self) -> char {
        match self {
            Granulometry::G => 'G',
            Granulometry::O => 'O',
            Granulometry::F => 'F',
        }
    }
}

impl fmt::Display for Granulometry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

impl FromStr for Granulometry {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "G" => Ok(Granulometry::G),
            "O" => Ok(Granulometry::O),
            "F" => Ok(Granulometry::F),
            other => Err(Error::Parse(format!("unknown granulometry `{other}` (expected G, O or F)"))),
        }
    }
}

/// Encodes a granulometry letter as its integer code.
pub fn encode_granulometry(label: &str) -> Result<usize> {
    label.parse::<Granulometry>().map(Granulometry::code)
}

/// Mean particle diameter (µm) of each grind class as seen by the simulator.
///
/// The defaults are invented values; only their ordering matters to the model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParticleScales {
    pub coarse: f64,
    pub optimal: f64,
    pub fine: f64,
}

impl Default for ParticleScales {
    fn default() -> Self {
        Self {
            coarse: 350.0,
            optimal: 250.0,
            fine: 150.0,
        }
    }
}

impl ParticleScales {
    pub fn get(&self, g: Granulometry) -> f64 {
        match g {
            Granulometry::G => self.coarse,
            Granulometry::O => self.optimal,
            Granulometry::F => self.fine,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fine > 0.0 && self.optimal > self.fine && self.coarse > self.optimal) {
            return Err(Error::invalid(
                "particle_scale",
                "must be positive and strictly decreasing from G to F",
            ));
        }
        Ok(())
    }
}

/// Admissible recipe box. Pressure is pinned; temperature ranges over an interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdmissibleBox {
    pub t_min: f64,
    pub t_max: f64,
    pub pressure: f64,
}

impl Default for AdmissibleBox {
    fn default() -> Self {
        Self {
            t_min: 88.0,
            t_max: 98.0,
            pressure: 9.0,
        }
    }
}

impl AdmissibleBox {
    pub fn check(&self, recipe: &Recipe) -> Result<()> {
        let eps = 1e-9;
        if recipe.temperature < self.t_min - eps || recipe.temperature > self.t_max + eps {
            return Err(Error::Domain(format!(
                "temperature {} °C outside [{}, {}]",
                recipe.temperature, self.t_min, self.t_max
            )));
        }
        if (recipe.pressure - self.pressure).abs() > eps {
            return Err(Error::Domain(format!(
                "pressure {} bar differs from the pinned {} bar",
                recipe.pressure, self.pressure
            )));
        }
        Ok(())
    }
}

/// The controllable brewing vector.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Recipe {
    /// Inlet water temperature, °C.
    pub temperature: f64,
    /// Inlet pressure, bar.
    pub pressure: f64,
    pub granulometry: Granulometry,
    /// Mass fractions of the four varieties A, R, L, E.
    pub fractions: [f64; N_FRACTIONS],
}

impl Recipe {
    pub fn new(
        temperature: f64,
        pressure: f64,
        granulometry: Granulometry,
        fractions: [f64; N_FRACTIONS],
    ) -> Result<Self> {
        if !temperature.is_finite() {
            return Err(Error::invalid("x_T", "temperature must be finite"));
        }
        if !(pressure.is_finite() && pressure > 0.0) {
            return Err(Error::invalid("x_p", "pressure must be positive"));
        }
        check_simplex(&fractions, SIMPLEX_TOL)?;
        Ok(Self {
            temperature,
            pressure,
            granulometry,
            fractions,
        })
    }

    /// Builds a recipe from fractions read back from text, where rounding may
    /// leave the sum a few ulps of the printed precision away from one.
    pub fn with_rounded_fractions(
        temperature: f64,
        pressure: f64,
        granulometry: Granulometry,
        fractions: [f64; N_FRACTIONS],
        tol: f64,
    ) -> Result<Self> {
        check_simplex(&fractions, tol)?;
        let sum: f64 = fractions.iter().sum();
        let normalized = fractions.map(|f| f / sum);
        Self::new(temperature, pressure, granulometry, normalized)
    }

    /// Feature vector in canonical order `(T, p, gran code, fA, fR, fL, fE)`.
    pub fn features(&self) -> [f64; N_RECIPE_FEATURES] {
        let [a, r, l, e] = self.fractions;
        [
            self.temperature,
            self.pressure,
            self.granulometry.code() as f64,
            a,
            r,
            l,
            e,
        ]
    }
}

fn check_simplex(fractions: &[f64; N_FRACTIONS], tol: f64) -> Result<()> {
    for (tag, &f) in FRACTION_TAGS.iter().zip(fractions) {
        if !(f.is_finite() && (-tol..=1.0 + tol).contains(&f)) {
            return Err(Error::invalid(*tag, format!("fraction {f} outside [0, 1]")));
        }
    }
    let sum: f64 = fractions.iter().sum();
    if (sum - 1.0).abs() > tol {
        return Err(Error::invalid(
            "x_distr",
            format!("fractions sum to {sum}, not 1 (simplex violation)"),
        ));
    }
    Ok(())
}

/// Cup chemistry in canonical species order.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Chemistry(pub [f64; N_SPECIES]);

/// Round-off negatives smaller than this are clamped to zero.
pub const NEGATIVE_ROUNDOFF: f64 = 1e-14;

impl Chemistry {
    pub fn new(values: [f64; N_SPECIES]) -> Result<Self> {
        let mut out = values;
        for (i, v) in out.iter_mut().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    field: SPECIES_TAGS[i].to_string(),
                });
            }
            if *v < 0.0 {
                if *v >= -NEGATIVE_ROUNDOFF {
                    *v = 0.0;
                } else {
                    return Err(Error::invalid(SPECIES_TAGS[i], format!("negative concentration {v}")));
                }
            }
        }
        Ok(Self(out))
    }

    pub fn zero() -> Self {
        Self([0.0; N_SPECIES])
    }

    pub fn values(&self) -> &[f64; N_SPECIES] {
        &self.0
    }

    pub fn get(&self, s: Species) -> f64 {
        self.0[s.index()]
    }
}

/// Origin of a dataset row.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Provenance {
    Grid,
    Offgrid,
    MixAug,
    TempAug,
}

impl Provenance {
    pub fn tag(self) -> &'static str {
        match self {
            Provenance::Grid => "grid",
            Provenance::Offgrid => "offgrid",
            Provenance::MixAug => "mix_aug",
            Provenance::TempAug => "temp_aug",
        }
    }
}

impl FromStr for Provenance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "grid" => Ok(Provenance::Grid),
            "offgrid" => Ok(Provenance::Offgrid),
            "mix_aug" => Ok(Provenance::MixAug),
            "temp_aug" => Ok(Provenance::TempAug),
            other => Err(Error::Parse(format!("unknown provenance `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Split {
    Train,
    Val,
    Test,
    None,
}

impl Split {
    pub fn tag(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
            Split::None => "none",
        }
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            "none" => Ok(Split::None),
            other => Err(Error::Parse(format!("unknown split `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub recipe: Recipe,
    pub chemistry: Chemistry,
    pub provenance: Provenance,
    pub split: Split,
}

impl LabeledSample {
    pub fn new(recipe: Recipe, chemistry: Chemistry, provenance: Provenance) -> Self {
        Self {
            recipe,
            chemistry,
            provenance,
            split: Split::None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn granulometry_encoding_is_fixed() {
        assert_eq!(encode_granulometry("G").unwrap(), 0);
        assert_eq!(encode_granulometry("O").unwrap(), 1);
        assert_eq!(encode_granulometry("F").unwrap(), 2);
        for g in Granulometry::ALL {
            assert_eq!(Granulometry::from_code(g.code()).unwrap(), g);
        }
    }

    #[test]
    fn unknown_granulometry_names_token() {
        let err = encode_granulometry("X").unwrap_err().to_string();
        assert!(err.contains("`X`"), "{err}");
    }

    #[test]
    fn particle_scales_decrease_to_fine() {
        let s = ParticleScales::default();
        s.validate().unwrap();
        assert!(s.get(Granulometry::G) > s.get(Granulometry::O));
        let bad = ParticleScales {
            coarse: 100.0,
            ..s
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn simplex_violation_rejected() {
        let err = Recipe::new(93.0, 9.0, Granulometry::O, [0.3, 0.3, 0.3, 0.0]).unwrap_err();
        assert!(err.to_string().contains("simplex"));
        assert!(Recipe::new(93.0, 9.0, Granulometry::O, [1.2, -0.2, 0.0, 0.0]).is_err());
    }

    #[test]
    fn chemistry_clamps_roundoff_only() {
        let mut v = [1.0; N_SPECIES];
        v[3] = -1e-15;
        assert_eq!(Chemistry::new(v).unwrap().0[3], 0.0);
        v[3] = -1e-6;
        assert!(Chemistry::new(v).is_err());
    }

    #[test]
    fn species_order_matches_tags() {
        for (i, s) in SPECIES.iter().enumerate() {
            assert_eq!(s.index(), i);
            assert_eq!(s.tag(), SPECIES_TAGS[i]);
        }
    }

    proptest! {
        #[test]
        fn constructed_recipes_lie_on_simplex(raw in prop::array::uniform4(0.0f64..1.0)) {
            let total: f64 = raw.iter().sum::<f64>() + 1e-9;
            let fr = raw.map(|v| (v + 1e-9 / 4.0) / total);
            let recipe = Recipe::with_rounded_fractions(93.0, 9.0, Granulometry::F, fr, 1e-9).unwrap();
            let sum: f64 = recipe.fractions.iter().sum();
            prop_assert!((sum - 1.0).abs() <= SIMPLEX_TOL);
        }
    }
}
