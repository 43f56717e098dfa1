//! Dataset augmentation: convex mixtures of pure-variety profiles chosen for
//! even simplex coverage, and spline interpolation along temperature.

use std::collections::{BTreeMap, HashMap, HashSet};

use rand::Rng as _;
use rand_distr::{Dirichlet, Distribution};
use serde::{Deserialize, Serialize};

use crate::datagen::Dataset;
use crate::error::{Error, Result};
use crate::rng::stage_rng;
use crate::types::{Chemistry, Granulometry, LabeledSample, Provenance, Recipe, N_FRACTIONS, N_SPECIES};

pub type Composition = [f64; N_FRACTIONS];

#[derive(Clone, Debug, PartialEq)]
pub struct DirichletPool {
    pub samples: Vec<Composition>,
    pub seed: u64,
}

/// Draws `pool_size` i.i.d. points uniformly on the simplex (Dirichlet(1,1,1,1)).
pub fn sample_dirichlet_pool(pool_size: usize, seed: u64) -> DirichletPool {
    let dist = Dirichlet::new([1.0; N_FRACTIONS]).expect("unit concentrations are valid");
    let mut rng = stage_rng(seed, "dirichlet-pool");
    let samples = (0..pool_size).map(|_| dist.sample(&mut rng)).collect();
    DirichletPool { samples, seed }
}

/// Per-axis target levels, consumed in ascending order.
#[derive(Clone, Debug, PartialEq)]
pub struct SelectionPlan {
    pub levels: [Vec<f64>; N_FRACTIONS],
}

impl SelectionPlan {
    /// `m / 4` equispaced levels on `[0, 1]` for every axis.
    pub fn new(m: usize) -> Result<Self> {
        if m % N_FRACTIONS != 0 || m < 2 * N_FRACTIONS {
            return Err(Error::invalid("M", format!("{m} must be a multiple of 4 and at least 8")));
        }
        let k = m / N_FRACTIONS;
        let levels: Vec<f64> = (0..k).map(|j| j as f64 / (k - 1) as f64).collect();
        Ok(Self {
            levels: std::array::from_fn(|_| levels.clone()),
        })
    }

    /// The same explicit level list on every axis (sorted ascending).
    pub fn with_levels(levels: &[f64]) -> Result<Self> {
        if levels.is_empty() || levels.iter().any(|l| !(0.0..=1.0).contains(l)) {
            return Err(Error::invalid("levels", "need at least one level inside [0, 1]"));
        }
        let mut l = levels.to_vec();
        l.sort_by(f64::total_cmp);
        Ok(Self {
            levels: std::array::from_fn(|_| l.clone()),
        })
    }

    pub fn per_axis(&self) -> usize {
        self.levels[0].len()
    }

    pub fn total(&self) -> usize {
        self.per_axis() * N_FRACTIONS
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Selection {
    pub mixtures: Vec<Composition>,
    /// Pool index of each selected element.
    pub indices: Vec<usize>,
    /// Axis whose level was targeted when the element was taken.
    pub axes: Vec<usize>,
}

/// Nearest alive element to `target` along one sorted axis; ties (equal
/// distance) go to the smallest pool index.
fn nearest_alive(sorted: &[(f64, usize)], alive: &[bool], target: f64) -> Option<usize> {
    let p = sorted.partition_point(|(v, _)| *v < target);
    let left = (0..p).rev().find(|&q| alive[sorted[q].1]);
    let right = (p..sorted.len()).find(|&q| alive[sorted[q].1]);
    let d = |q: usize| (sorted[q].0 - target).abs();
    let best = match (left, right) {
        (None, None) => return None,
        (Some(l), None) => d(l),
        (None, Some(r)) => d(r),
        (Some(l), Some(r)) => d(l).min(d(r)),
    };
    let mut winner = usize::MAX;
    if let Some(l) = left {
        for q in (0..=l).rev() {
            if !alive[sorted[q].1] {
                continue;
            }
            if d(q) != best {
                break;
            }
            winner = winner.min(sorted[q].1);
        }
    }
    if let Some(r) = right {
        for q in r..sorted.len() {
            if !alive[sorted[q].1] {
                continue;
            }
            if d(q) != best {
                break;
            }
            winner = winner.min(sorted[q].1);
        }
    }
    Some(winner)
}

/// Cyclic selection: for level index k = 0, 1, … and axis i = 1..4 in turn,
/// take the remaining pool element whose i-th component is closest to
/// `levels[i][k]` and remove it from the pool.
pub fn select_cyclic(pool: &DirichletPool, plan: &SelectionPlan) -> Result<Selection> {
    let need = plan.total();
    if pool.samples.len() < need {
        return Err(Error::invalid(
            "pool_size",
            format!("pool of {} cannot supply {need} selections", pool.samples.len()),
        ));
    }
    let sorted: [Vec<(f64, usize)>; N_FRACTIONS] = std::array::from_fn(|i| {
        let mut v: Vec<(f64, usize)> = pool.samples.iter().enumerate().map(|(j, c)| (c[i], j)).collect();
        v.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        v
    });
    let mut alive = vec![true; pool.samples.len()];
    let mut sel = Selection {
        mixtures: Vec::with_capacity(need),
        indices: Vec::with_capacity(need),
        axes: Vec::with_capacity(need),
    };
    for k in 0..plan.per_axis() {
        for i in 0..N_FRACTIONS {
            let j = nearest_alive(&sorted[i], &alive, plan.levels[i][k])
                .ok_or_else(|| Error::Empty("Dirichlet pool exhausted".into()))?;
            alive[j] = false;
            sel.mixtures.push(pool.samples[j]);
            sel.indices.push(j);
            sel.axes.push(i);
        }
    }
    Ok(sel)
}

/// Sup-norm gap, per axis, between the sorted axis-i components of the
/// axis-i selections and the target levels.
pub fn coverage_deviation(sel: &Selection, plan: &SelectionPlan) -> [f64; N_FRACTIONS] {
    std::array::from_fn(|i| {
        let mut got: Vec<f64> = sel
            .mixtures
            .iter()
            .zip(&sel.axes)
            .filter(|(_, a)| **a == i)
            .map(|(c, _)| c[i])
            .collect();
        got.sort_by(f64::total_cmp);
        got.iter()
            .zip(&plan.levels[i])
            .map(|(g, l)| (g - l).abs())
            .fold(0.0, f64::max)
    })
}

/// Hashable identity of a (T, p, gran) cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct ThermalKey(u64, u64, Granulometry);

impl ThermalKey {
    fn of(r: &Recipe) -> Self {
        ThermalKey(ordered_bits(r.temperature), ordered_bits(r.pressure), r.granulometry)
    }
}

/// Bit pattern that sorts like the (finite) float.
fn ordered_bits(x: f64) -> u64 {
    let b = x.to_bits();
    if b >> 63 == 1 {
        !b
    } else {
        b | (1 << 63)
    }
}

fn pure_index(c: &Composition) -> Option<usize> {
    let ones: Vec<usize> = (0..N_FRACTIONS).filter(|&i| c[i] == 1.0).collect();
    (ones.len() == 1 && c.iter().filter(|v| **v == 0.0).count() == N_FRACTIONS - 1).then(|| ones[0])
}

/// Pure-variety chemistry of every (T, p, gran) cell of the grid rows, in cell order.
pub fn pure_profiles(ds: &Dataset) -> Result<Vec<(Recipe, [Chemistry; N_FRACTIONS])>> {
    let mut cells: BTreeMap<ThermalKey, (Recipe, [Option<Chemistry>; N_FRACTIONS])> = BTreeMap::new();
    for s in ds.with_provenance(Provenance::Grid) {
        let entry = cells.entry(ThermalKey::of(&s.recipe)).or_insert((s.recipe, [None; N_FRACTIONS]));
        if let Some(v) = pure_index(&s.recipe.fractions) {
            entry.1[v] = Some(s.chemistry);
        }
    }
    if cells.is_empty() {
        return Err(Error::Empty("no grid rows to take pure profiles from".into()));
    }
    cells
        .into_values()
        .map(|(r, p)| {
            let mut out = [Chemistry::zero(); N_FRACTIONS];
            for v in 0..N_FRACTIONS {
                out[v] = p[v].ok_or_else(|| {
                    Error::Empty(format!(
                        "no pure-fraction row {v} for cell T={} p={} gran={}",
                        r.temperature, r.pressure, r.granulometry
                    ))
                })?;
            }
            Ok((r, out))
        })
        .collect()
}

/// `Σ c_i y_i`.
pub fn convex_chemistry(c: &Composition, pure: &[Chemistry; N_FRACTIONS]) -> Chemistry {
    let mut y = [0.0; N_SPECIES];
    for v in 0..N_FRACTIONS {
        for k in 0..N_SPECIES {
            y[k] += c[v] * pure[v].0[k];
        }
    }
    Chemistry(y)
}

/// `m` mixture rows: cyclic selection from a pool of `pool_factor · m`
/// Dirichlet draws, assigned to grid cells round-robin.
pub fn mix_augment(ds: &Dataset, m: usize, pool_factor: usize, seed: u64) -> Result<Vec<LabeledSample>> {
    let cells = pure_profiles(ds)?;
    let plan = SelectionPlan::new(m)?;
    let pool = sample_dirichlet_pool(pool_factor * m, seed);
    let sel = select_cyclic(&pool, &plan)?;
    sel.mixtures
        .iter()
        .enumerate()
        .map(|(j, c)| {
            let (base, pure) = &cells[j % cells.len()];
            let recipe = Recipe::new(base.temperature, base.pressure, base.granulometry, *c)?;
            Ok(LabeledSample::new(recipe, convex_chemistry(c, pure), Provenance::MixAug))
        })
        .collect()
}

/// Natural cubic spline (zero second derivative at both ends); linear
/// continuation outside the knots.
#[derive(Clone, Debug, PartialEq)]
pub struct NaturalSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    m: Vec<f64>,
}

impl NaturalSpline {
    pub fn fit(x: &[f64], y: &[f64]) -> Result<Self> {
        let n = x.len();
        if n != y.len() {
            return Err(Error::invalid("y", "knot and value counts differ"));
        }
        if n < 4 {
            return Err(Error::invalid("knots", format!("need at least 4 distinct knots, got {n}")));
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("knots", "must be strictly increasing"));
        }
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        // Thomas sweep on the interior second derivatives.
        let k = n - 2;
        let mut diag = vec![0.0; k];
        let mut rhs = vec![0.0; k];
        for i in 0..k {
            diag[i] = 2.0 * (h[i] + h[i + 1]);
            rhs[i] = 6.0 * ((y[i + 2] - y[i + 1]) / h[i + 1] - (y[i + 1] - y[i]) / h[i]);
        }
        for i in 1..k {
            let w = h[i] / diag[i - 1];
            diag[i] -= w * h[i];
            rhs[i] -= w * rhs[i - 1];
        }
        let mut m = vec![0.0; n];
        for i in (0..k).rev() {
            let upper = if i + 1 < k { h[i + 1] * m[i + 2] } else { 0.0 };
            m[i + 1] = (rhs[i] - upper) / diag[i];
        }
        Ok(Self {
            x: x.to_vec(),
            y: y.to_vec(),
            m,
        })
    }

    pub fn knots(&self) -> &[f64] {
        &self.x
    }

    pub fn eval(&self, t: f64) -> f64 {
        let n = self.x.len();
        if t <= self.x[0] {
            return self.y[0] + self.slope(0, true) * (t - self.x[0]);
        }
        if t >= self.x[n - 1] {
            return self.y[n - 1] + self.slope(n - 2, false) * (t - self.x[n - 1]);
        }
        let i = self.x.partition_point(|v| *v <= t).min(n - 1) - 1;
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - t) / h;
        let b = (t - self.x[i]) / h;
        a * self.y[i]
            + b * self.y[i + 1]
            + ((a * a * a - a) * self.m[i] + (b * b * b - b) * self.m[i + 1]) * h * h / 6.0
    }

    /// First derivative at the left (`start`) or right end of interval `i`.
    fn slope(&self, i: usize, start: bool) -> f64 {
        let h = self.x[i + 1] - self.x[i];
        let secant = (self.y[i + 1] - self.y[i]) / h;
        if start {
            secant - h * (2.0 * self.m[i] + self.m[i + 1]) / 6.0
        } else {
            secant + h * (self.m[i] + 2.0 * self.m[i + 1]) / 6.0
        }
    }
}

/// Identity of a (p, gran, composition) cell along which temperature varies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CompositionCell {
    pressure: u64,
    pub granulometry: Granulometry,
    fractions: [u64; N_FRACTIONS],
}

impl CompositionCell {
    pub fn of(r: &Recipe) -> Self {
        Self {
            pressure: ordered_bits(r.pressure),
            granulometry: r.granulometry,
            fractions: r.fractions.map(ordered_bits),
        }
    }
}

fn cell_rows(ds: &Dataset) -> BTreeMap<CompositionCell, Vec<&LabeledSample>> {
    let mut cells: BTreeMap<CompositionCell, Vec<&LabeledSample>> = BTreeMap::new();
    for s in ds.with_provenance(Provenance::Grid) {
        cells.entry(CompositionCell::of(&s.recipe)).or_default().push(s);
    }
    cells
}

fn fit_rows(rows: &[&LabeledSample]) -> Result<[NaturalSpline; N_SPECIES]> {
    let mut rows = rows.to_vec();
    rows.sort_by(|a, b| a.recipe.temperature.total_cmp(&b.recipe.temperature));
    let x: Vec<f64> = rows.iter().map(|s| s.recipe.temperature).collect();
    let fitted: Result<Vec<NaturalSpline>> = (0..N_SPECIES)
        .map(|k| {
            let y: Vec<f64> = rows.iter().map(|s| s.chemistry.0[k]).collect();
            NaturalSpline::fit(&x, &y)
        })
        .collect();
    Ok(fitted?.try_into().expect("one spline per species"))
}

/// Eight temperature splines through the simulated rows of one cell.
pub fn fit_temperature_splines(ds: &Dataset, cell: &CompositionCell) -> Result<[NaturalSpline; N_SPECIES]> {
    let cells = cell_rows(ds);
    let rows = cells
        .get(cell)
        .ok_or_else(|| Error::Empty("no simulated rows in the requested cell".into()))?;
    fit_rows(rows)
}

/// Temperature-augmented rows and the number of clamped negative spline values.
pub fn temp_augment(
    ds: &Dataset,
    count: usize,
    t_range: (f64, f64),
    seed: u64,
) -> Result<(Vec<LabeledSample>, usize)> {
    let cells: Vec<(Recipe, [NaturalSpline; N_SPECIES])> = cell_rows(ds)
        .into_values()
        .map(|rows| Ok((rows[0].recipe, fit_rows(&rows)?)))
        .collect::<Result<_>>()?;
    if cells.is_empty() && count > 0 {
        return Err(Error::Empty("no grid rows to fit temperature splines on".into()));
    }
    let mut rng = stage_rng(seed, "temp-augment");
    let mut clamps = 0;
    let mut out = Vec::with_capacity(count);
    for j in 0..count {
        let (base, splines) = &cells[j % cells.len()];
        let t = rng.random_range(t_range.0..=t_range.1);
        let mut y = [0.0; N_SPECIES];
        for k in 0..N_SPECIES {
            y[k] = splines[k].eval(t);
            if y[k] < 0.0 {
                y[k] = 0.0;
                clamps += 1;
            }
        }
        let recipe = Recipe::new(t, base.pressure, base.granulometry, base.fractions)?;
        out.push(LabeledSample::new(recipe, Chemistry(y), Provenance::TempAug));
    }
    Ok((out, clamps))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AugmentConfig {
    pub mix: usize,
    pub temp: usize,
    /// Pool size as a multiple of `mix`.
    pub pool_factor: usize,
    pub t_min: f64,
    pub t_max: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            mix: 3000,
            temp: 3000,
            pool_factor: 50,
            t_min: 88.0,
            t_max: 98.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AugmentReport {
    pub original: usize,
    pub mix: usize,
    pub temp: usize,
    pub total: usize,
    pub spline_clamps: usize,
    /// Rows whose recipe key already occurred earlier in the union.
    pub duplicate_keys: usize,
}

impl AugmentReport {
    pub fn log_line(&self) -> String {
        format!(
            "original: {}, mix: {}, temp: {}, total: {}, spline clamps: {}, duplicate recipes: {}",
            self.original, self.mix, self.temp, self.total, self.spline_clamps, self.duplicate_keys
        )
    }
}

/// Original rows followed by mixture rows and temperature rows.
pub fn augment(ds: &Dataset, cfg: &AugmentConfig, seed: u64) -> Result<(Dataset, AugmentReport)> {
    let mixed = if cfg.mix > 0 {
        mix_augment(ds, cfg.mix, cfg.pool_factor, seed)?
    } else {
        Vec::new()
    };
    let (temps, clamps) = temp_augment(ds, cfg.temp, (cfg.t_min, cfg.t_max), seed)?;
    let mut out = ds.clone();
    let (n_mix, n_temp) = (mixed.len(), temps.len());
    out.extend(mixed);
    out.extend(temps);
    let mut seen = HashSet::new();
    let mut dups = 0;
    for s in &out.samples {
        let key = (ordered_bits(s.recipe.temperature), CompositionCell::of(&s.recipe));
        if !seen.insert(key) {
            dups += 1;
        }
    }
    let report = AugmentReport {
        original: ds.len(),
        mix: n_mix,
        temp: n_temp,
        total: out.len(),
        spline_clamps: clamps,
        duplicate_keys: dups,
    };
    Ok((out, report))
}

/// Number of rows per provenance.
pub fn provenance_counts(ds: &Dataset) -> HashMap<Provenance, usize> {
    let mut m = HashMap::new();
    for s in &ds.samples {
        *m.entry(s.provenance).or_insert(0) += 1;
    }
    m
}
