//! Simulation campaigns over the recipe space and the dataset text format.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::{self, ForwardConfig};
use crate::rng::stage_rng;
use crate::tsv::format_float;
use crate::types::{
    Chemistry, Granulometry, LabeledSample, Provenance, Recipe, Split, FRACTION_TAGS, N_FRACTIONS, N_SPECIES,
    SPECIES_TAGS,
};

/// Fixed leading columns of every dataset file.
pub const BASE_COLUMNS: [&str; 15] = [
    "T_C", "p_bar", "gran", "fA", "fR", "fL", "fE", "caf", "chl", "tri", "fer", "tar", "cit", "ace", "lip",
];

/// Slack accepted on the fraction sum of rows read back from text.
pub const READ_SIMPLEX_TOL: f64 = 1e-9;

/// All 4-tuples of multiples of `step` summing to one, in lexicographic order.
pub fn enumerate_simplex(step: f64) -> Result<Vec<[f64; N_FRACTIONS]>> {
    let parts = (1.0 / step).round();
    if !(step > 0.0 && step <= 1.0) || (parts * step - 1.0).abs() > 1e-9 {
        return Err(Error::invalid("step", format!("{step} does not divide 1 into equal parts")));
    }
    let n = parts as usize;
    let mut out = Vec::new();
    for a in 0..=n {
        for b in 0..=n - a {
            for c in 0..=n - a - b {
                let d = n - a - b - c;
                out.push([a, b, c, d].map(|k| k as f64 / n as f64));
            }
        }
    }
    Ok(out)
}

/// The structured main grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub temperatures: Vec<f64>,
    pub pressure: f64,
    pub granulometries: Vec<Granulometry>,
    pub step: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            temperatures: vec![88.0, 89.7, 91.3, 93.0, 94.7, 96.3, 98.0],
            pressure: 9.0,
            granulometries: Granulometry::ALL.to_vec(),
            step: 1.0 / 6.0,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.temperatures.is_empty() || self.temperatures.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("temperatures", "must be non-empty and strictly increasing"));
        }
        if self.granulometries.is_empty() {
            return Err(Error::invalid("granulometries", "must be non-empty"));
        }
        enumerate_simplex(self.step).map(|_| ())
    }

    /// Recipes in enumeration order: temperature, then granulometry, then composition.
    pub fn recipes(&self) -> Result<Vec<Recipe>> {
        self.validate()?;
        let comps = enumerate_simplex(self.step)?;
        let mut out = Vec::with_capacity(self.temperatures.len() * self.granulometries.len() * comps.len());
        for &t in &self.temperatures {
            for &g in &self.granulometries {
                for c in &comps {
                    out.push(Recipe::new(t, self.pressure, g, *c)?);
                }
            }
        }
        Ok(out)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let spec: Self = toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        spec.validate()?;
        Ok(spec)
    }
}

/// The off-grid validation set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OffGridSpec {
    pub temperatures: Vec<f64>,
    pub pressure: f64,
    pub granulometries: Vec<Granulometry>,
}

impl Default for OffGridSpec {
    fn default() -> Self {
        Self {
            temperatures: vec![89.0, 92.5, 95.0],
            pressure: 9.0,
            granulometries: Granulometry::ALL.to_vec(),
        }
    }
}

impl OffGridSpec {
    /// Pure fractions, ordered 75/25 binaries, then the uniform blend.
    pub fn compositions() -> Vec<[f64; N_FRACTIONS]> {
        let mut out = Vec::with_capacity(17);
        for i in 0..N_FRACTIONS {
            let mut c = [0.0; N_FRACTIONS];
            c[i] = 1.0;
            out.push(c);
        }
        for i in 0..N_FRACTIONS {
            for j in 0..N_FRACTIONS {
                if i != j {
                    let mut c = [0.0; N_FRACTIONS];
                    c[i] = 0.75;
                    c[j] = 0.25;
                    out.push(c);
                }
            }
        }
        out.push([0.25; N_FRACTIONS]);
        out
    }

    pub fn recipes(&self) -> Result<Vec<Recipe>> {
        if self.temperatures.is_empty() || self.granulometries.is_empty() {
            return Err(Error::invalid("offgrid", "temperatures and granulometries must be non-empty"));
        }
        let comps = Self::compositions();
        let mut out = Vec::new();
        for &t in &self.temperatures {
            for &g in &self.granulometries {
                for c in &comps {
                    out.push(Recipe::new(t, self.pressure, g, *c)?);
                }
            }
        }
        Ok(out)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    pub samples: Vec<LabeledSample>,
}

impl Dataset {
    pub fn new(samples: Vec<LabeledSample>) -> Self {
        Self { samples }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn with_provenance(&self, p: Provenance) -> impl Iterator<Item = &LabeledSample> {
        self.samples.iter().filter(move |s| s.provenance == p)
    }

    pub fn in_split(&self, split: Split) -> Vec<LabeledSample> {
        self.samples.iter().filter(|s| s.split == split).copied().collect()
    }

    pub fn extend(&mut self, other: impl IntoIterator<Item = LabeledSample>) {
        self.samples.extend(other);
    }

    pub fn to_tsv(&self) -> String {
        let with_split = self.samples.iter().any(|s| s.split != Split::None);
        let mut out = BASE_COLUMNS.join("\t");
        out.push_str("\tprovenance");
        if with_split {
            out.push_str("\tsplit");
        }
        out.push('\n');
        for s in &self.samples {
            let r = &s.recipe;
            let mut fields = vec![format_float(r.temperature), format_float(r.pressure), r.granulometry.letter().to_string()];
            fields.extend(r.fractions.iter().map(|f| format_float(*f)));
            fields.extend(s.chemistry.0.iter().map(|c| format_float(*c)));
            fields.push(s.provenance.tag().to_string());
            if with_split {
                fields.push(s.split.tag().to_string());
            }
            let _ = writeln!(out, "{}", fields.join("\t"));
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_tsv()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    /// Parses dataset text; `path` only labels error messages.
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let bad = |line: usize, column: &str, message: String| Error::Malformed {
            path: path.to_path_buf(),
            line,
            column: column.to_string(),
            message,
        };
        let mut lines = text.lines().enumerate();
        let header: Vec<&str> = match lines.next() {
            Some((_, h)) => h.split('\t').collect(),
            None => return Err(bad(1, "header", "empty file".into())),
        };
        if header.len() < BASE_COLUMNS.len() || header[..BASE_COLUMNS.len()] != BASE_COLUMNS {
            return Err(bad(1, "header", format!("expected leading columns {}", BASE_COLUMNS.join(" "))));
        }
        let extra = &header[BASE_COLUMNS.len()..];
        let prov_col = extra.iter().position(|c| *c == "provenance").map(|i| i + BASE_COLUMNS.len());
        let split_col = extra.iter().position(|c| *c == "split").map(|i| i + BASE_COLUMNS.len());
        if let Some(u) = extra.iter().find(|c| **c != "provenance" && **c != "split") {
            return Err(bad(1, u, "unknown column".into()));
        }
        let mut samples = Vec::new();
        for (i, line) in lines {
            let lineno = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != header.len() {
                return Err(bad(lineno, "row", format!("expected {} fields, found {}", header.len(), f.len())));
            }
            let num = |j: usize| -> Result<f64> {
                f[j].parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| bad(lineno, header[j], format!("not a finite number: `{}`", f[j])))
            };
            let t = num(0)?;
            let p = num(1)?;
            let g: Granulometry = f[2].parse().map_err(|e: Error| bad(lineno, "gran", e.to_string()))?;
            let mut fr = [0.0; N_FRACTIONS];
            for (v, x) in fr.iter_mut().enumerate() {
                *x = num(3 + v)?;
            }
            let recipe = Recipe::with_rounded_fractions(t, p, g, fr, READ_SIMPLEX_TOL)
                .map_err(|e| bad(lineno, &FRACTION_TAGS.join("+"), e.to_string()))?;
            let mut y = [0.0; N_SPECIES];
            for (k, x) in y.iter_mut().enumerate() {
                *x = num(7 + k)?;
            }
            let chemistry = Chemistry::new(y).map_err(|e| bad(lineno, SPECIES_TAGS[0], e.to_string()))?;
            let provenance = match prov_col {
                Some(j) => f[j].parse().map_err(|e: Error| bad(lineno, "provenance", e.to_string()))?,
                None => Provenance::Grid,
            };
            let split = match split_col {
                Some(j) => f[j].parse().map_err(|e: Error| bad(lineno, "split", e.to_string()))?,
                None => Split::None,
            };
            samples.push(LabeledSample {
                recipe,
                chemistry,
                provenance,
                split,
            });
        }
        Ok(Self { samples })
    }
}

/// One recipe the campaign could not simulate.
#[derive(Clone, Debug)]
pub struct Skip {
    pub index: usize,
    pub recipe: Recipe,
    pub reason: String,
}

#[derive(Clone, Debug)]
pub struct CampaignReport {
    pub provenance: Provenance,
    pub requested: usize,
    pub generated: usize,
    pub skipped: Vec<Skip>,
    pub seconds: f64,
}

impl CampaignReport {
    pub fn log_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "campaign {}: requested {}, generated {}, skipped {}, wall {:.2} s",
            self.provenance.tag(),
            self.requested,
            self.generated,
            self.skipped.len(),
            self.seconds
        );
        for k in &self.skipped {
            let r = &k.recipe;
            let _ = writeln!(
                s,
                "skip #{}: T={} p={} gran={} f={:?}: {}",
                k.index,
                r.temperature,
                r.pressure,
                r.granulometry,
                r.fractions,
                k.reason
            );
        }
        s
    }
}

/// Simulates every recipe; rows keep the input order whatever the scheduling.
pub fn run_campaign(
    cfg: &ForwardConfig,
    recipes: &[Recipe],
    provenance: Provenance,
    jobs: usize,
) -> Result<(Dataset, CampaignReport)> {
    let start = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let results: Vec<Result<Chemistry>> = pool.install(|| recipes.par_iter().map(|r| forward::f(cfg, r)).collect());
    let mut samples = Vec::with_capacity(recipes.len());
    let mut skipped = Vec::new();
    for (index, (r, res)) in recipes.iter().zip(results).enumerate() {
        match res {
            Ok(c) => samples.push(LabeledSample::new(*r, c, provenance)),
            Err(e) => skipped.push(Skip {
                index,
                recipe: *r,
                reason: e.to_string(),
            }),
        }
    }
    let report = CampaignReport {
        provenance,
        requested: recipes.len(),
        generated: samples.len(),
        skipped,
        seconds: start.elapsed().as_secs_f64(),
    };
    Ok((Dataset::new(samples), report))
}

pub fn generate_grid(spec: &GridSpec, cfg: &ForwardConfig, jobs: usize) -> Result<(Dataset, CampaignReport)> {
    run_campaign(cfg, &spec.recipes()?, Provenance::Grid, jobs)
}

pub fn generate_offgrid(spec: &OffGridSpec, cfg: &ForwardConfig, jobs: usize) -> Result<(Dataset, CampaignReport)> {
    run_campaign(cfg, &spec.recipes()?, Provenance::Offgrid, jobs)
}

/// Sizes of the (train, val, test) parts: val is floored, test is rounded up
/// and train takes the rest.
pub fn split_sizes(n: usize, ratios: [f64; 3]) -> Result<[usize; 3]> {
    if ratios.iter().any(|r| !(*r >= 0.0)) || (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::invalid("ratios", format!("{ratios:?} must be non-negative and sum to 1")));
    }
    let val = (ratios[1] * n as f64 + 1e-9).floor() as usize;
    let test = ((ratios[2] * n as f64 - 1e-9).ceil().max(0.0) as usize).min(n - val);
    Ok([n - val - test, val, test])
}

/// Assigns split labels through a seeded permutation.
pub fn split_dataset(ds: &Dataset, ratios: [f64; 3], seed: u64) -> Result<Dataset> {
    if ds.is_empty() {
        return Err(Error::Empty("cannot split an empty dataset".into()));
    }
    let [train, val, _] = split_sizes(ds.len(), ratios)?;
    let mut order: Vec<usize> = (0..ds.len()).collect();
    order.shuffle(&mut stage_rng(seed, "split"));
    let mut out = ds.clone();
    for (rank, &i) in order.iter().enumerate() {
        out.samples[i].split = if rank < train {
            Split::Train
        } else if rank < train + val {
            Split::Val
        } else {
            Split::Test
        };
    }
    Ok(out)
}
