use std::fmt;
use std::path::{Path, PathBuf};

use brewsolve::augment::{augment, AugmentConfig};
use brewsolve::datagen::{generate_grid, generate_offgrid, split_dataset, CampaignReport, Dataset, GridSpec, OffGridSpec};
use brewsolve::diagnostics::{self, DEFAULT_FD_STEP, DEFAULT_LPCA_THRESHOLD, DEFAULT_RANK_THRESHOLD};
use brewsolve::forward::{self, ForwardConfig};
use brewsolve::inverse::{self, InverseSpec};
use brewsolve::nn::{Network, TrainPolicy};
use brewsolve::rng::stage_rng;
use brewsolve::surrogate::{self, SurrogateSpec};
use brewsolve::tsv::format_float;
use brewsolve::{
    encode_granulometry, Chemistry, Error, Granulometry, LabeledSample, Recipe, Split, FRACTION_TAGS, N_FRACTIONS,
    N_SPECIES, SPECIES_TAGS,
};
use serde::Deserialize;

use crate::manifest::RunManifest;
use crate::{Campaign, Cli, Command, Evaluation, Training};

pub enum CliError {
    Usage(String),
    Core(Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Core(e) if e.is_numerical() => 3,
            CliError::Core(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

type Result<T> = std::result::Result<T, CliError>;

pub const CONFIG_DIR_VAR: &str = "BREWSOLVE_CONFIG_DIR";

/// Finds a config file as given, then relative to `$BREWSOLVE_CONFIG_DIR`.
fn locate(path: &Path) -> Result<PathBuf> {
    if path.exists() {
        return Ok(path.to_path_buf());
    }
    if path.is_relative() {
        if let Some(dir) = std::env::var_os(CONFIG_DIR_VAR) {
            let alt = Path::new(&dir).join(path);
            if alt.exists() {
                return Ok(alt);
            }
        }
    }
    Err(Error::Config(format!("{}: file not found (also searched ${CONFIG_DIR_VAR})", path.display())).into())
}

fn load_config(path: Option<&Path>) -> Result<(ForwardConfig, Option<PathBuf>)> {
    match path {
        None => Ok((ForwardConfig::default(), None)),
        Some(p) => {
            let found = locate(p)?;
            Ok((ForwardConfig::load(&found)?, Some(found)))
        }
    }
}

fn read_text(path: &Path) -> Result<String> {
    Ok(std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
}

fn out_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))?;
    Ok(())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RecipeFile {
    temperature: f64,
    #[serde(default = "default_pressure")]
    pressure: f64,
    granulometry: String,
    fractions: [f64; N_FRACTIONS],
}

fn default_pressure() -> f64 {
    9.0
}

fn load_recipe(path: &Path) -> Result<Recipe> {
    let text = read_text(path)?;
    let r: RecipeFile = toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let gran = Granulometry::from_code(encode_granulometry(&r.granulometry)?)?;
    Ok(Recipe::new(r.temperature, r.pressure, gran, r.fractions)?)
}

#[derive(Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct HyperParams {
    policy: TrainPolicy,
    surrogate: SurrogateSpec,
    inverse: InverseSpec,
}

fn load_hparams(t: &Training, seed: u64, m: &mut RunManifest) -> Result<HyperParams> {
    let mut h = match &t.hparams {
        None => HyperParams::default(),
        Some(p) => {
            let found = locate(p)?;
            m.config("hparams", Some(&found));
            toml::from_str(&read_text(&found)?).map_err(|e| Error::Config(format!("{}: {e}", found.display())))?
        }
    };
    h.policy.seed = seed;
    if let Some(e) = t.epochs {
        h.policy.max_epochs = e;
    }
    Ok(h)
}

fn parse_split(s: &str) -> Result<Option<Split>> {
    if s == "all" {
        return Ok(None);
    }
    s.parse::<Split>()
        .map(Some)
        .map_err(|_| CliError::Usage(format!("--split: expected train, val, test or all, got `{s}`")))
}

fn select(ds: &Dataset, split: Option<Split>) -> Vec<LabeledSample> {
    match split {
        Some(s) => ds.in_split(s),
        None => ds.samples.clone(),
    }
}

fn parse_list(s: &str, flag: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|_| CliError::Usage(format!("{flag}: `{v}` is not a number"))))
        .collect()
}

pub fn run(cli: Cli) -> Result<()> {
    let (seed, jobs) = (cli.seed, cli.jobs.max(1));
    match cli.command {
        Command::Simulate { config, recipe, out } => simulate(config.as_deref(), &recipe, &out, seed, jobs),
        Command::Grid(c) => campaign("grid", &c, seed, jobs),
        Command::Offgrid(c) => campaign("offgrid", &c, seed, jobs),
        Command::Augment {
            input,
            mix,
            temp,
            pool_factor,
            out,
        } => run_augment(&input, mix, temp, pool_factor, &out, seed, jobs),
        Command::Split { input, ratios, out } => run_split(&input, &ratios, &out, seed, jobs),
        Command::TrainForward(t) => train_forward(&t, seed, jobs),
        Command::TrainInverse { training, surrogate } => train_inverse(&training, &surrogate, seed, jobs),
        Command::EvalForward(e) => eval_forward(&e, seed, jobs),
        Command::EvalInverse { eval, surrogate } => eval_inverse(&eval, surrogate.as_deref(), seed, jobs),
        Command::Invert { model, target, surrogate } => invert(&model, &target, surrogate.as_deref()),
        Command::Diagnose {
            surrogate,
            probes,
            cloud,
            neighbors,
            out,
        } => diagnose(&surrogate, probes, cloud, neighbors, &out, seed, jobs),
    }
}

fn simulate(config: Option<&Path>, recipe_path: &Path, out: &Path, seed: u64, jobs: usize) -> Result<()> {
    let mut m = RunManifest::start("simulate", seed, jobs);
    let (cfg, cfg_path) = load_config(config)?;
    m.config("simulator", cfg_path.as_deref());
    m.input("recipe", recipe_path);
    let recipe = load_recipe(recipe_path)?;
    let (run, chem) = forward::simulate(&cfg, &recipe)?;
    out_dir(out)?;
    let cumulative = out.join("cumulative.tsv");
    run.write_cumulative_tsv(&cumulative)?;
    m.record(cumulative);
    let rate = out.join("rate.tsv");
    run.write_rate_tsv(&rate)?;
    m.record(rate);
    let header = SPECIES_TAGS.join("\t");
    let values: Vec<String> = chem.0.iter().map(|v| format_float(*v)).collect();
    let text = format!("{header}\n{}\n", values.join("\t"));
    m.write(out, "chemistry.tsv", &text)?;
    print!("{text}");
    eprintln!("mass audit: max relative error {:.3e}", run.audit.max_relative_error());
    m.finish(out)?;
    Ok(())
}

fn campaign(kind: &str, c: &Campaign, seed: u64, jobs: usize) -> Result<()> {
    let mut m = RunManifest::start(kind, seed, jobs);
    let (cfg, cfg_path) = load_config(c.config.as_deref())?;
    m.config("simulator", cfg_path.as_deref());
    let spec_path = c.spec.as_deref().map(locate).transpose()?;
    m.config("campaign", spec_path.as_deref());
    let (ds, report): (Dataset, CampaignReport) = if kind == "grid" {
        let spec = spec_path.as_deref().map(GridSpec::load).transpose()?.unwrap_or_default();
        generate_grid(&spec, &cfg, jobs)?
    } else {
        let spec = spec_path.as_deref().map(OffGridSpec::load).transpose()?.unwrap_or_default();
        generate_offgrid(&spec, &cfg, jobs)?
    };
    out_dir(&c.out)?;
    m.write(&c.out, &format!("{kind}.tsv"), &ds.to_tsv())?;
    m.write(&c.out, &format!("{kind}.log"), &report.log_text())?;
    eprint!("{}", report.log_text());
    m.finish(&c.out)?;
    Ok(())
}

fn run_augment(input: &Path, mix: usize, temp: usize, pool_factor: usize, out: &Path, seed: u64, jobs: usize) -> Result<()> {
    let mut m = RunManifest::start("augment", seed, jobs);
    m.input("dataset", input);
    let ds = Dataset::read(input)?;
    let cfg = AugmentConfig {
        mix,
        temp,
        pool_factor,
        ..AugmentConfig::default()
    };
    let (aug, report) = augment(&ds, &cfg, seed)?;
    out_dir(out)?;
    m.write(out, "augmented.tsv", &aug.to_tsv())?;
    m.write(out, "augment.log", &format!("{}\n", report.log_line()))?;
    eprintln!("{}", report.log_line());
    m.finish(out)?;
    Ok(())
}

fn run_split(input: &Path, ratios: &str, out: &Path, seed: u64, jobs: usize) -> Result<()> {
    let r = parse_list(ratios, "--ratios")?;
    let r: [f64; 3] = r
        .try_into()
        .map_err(|v: Vec<f64>| CliError::Usage(format!("--ratios: expected 3 values, got {}", v.len())))?;
    let mut m = RunManifest::start("split", seed, jobs);
    m.input("dataset", input);
    let ds = split_dataset(&Dataset::read(input)?, r, seed)?;
    let stem = input.file_stem().and_then(|s| s.to_str()).unwrap_or("dataset");
    out_dir(out)?;
    m.write(out, &format!("{stem}_split.tsv"), &ds.to_tsv())?;
    for s in [Split::Train, Split::Val, Split::Test] {
        eprintln!("{}: {}", s.tag(), ds.in_split(s).len());
    }
    m.finish(out)?;
    Ok(())
}

fn train_forward(t: &Training, seed: u64, jobs: usize) -> Result<()> {
    let mut m = RunManifest::start("train-forward", seed, jobs);
    let h = load_hparams(t, seed, &mut m)?;
    m.input("dataset", &t.data);
    let ds = Dataset::read(&t.data)?;
    let (net, history) = surrogate::train_surrogate(&ds, &h.surrogate, &h.policy)?;
    out_dir(&t.out)?;
    let model = t.out.join("surrogate.json");
    net.save(&model)?;
    m.record(model);
    m.write(&t.out, "surrogate_history.tsv", &history.to_tsv())?;
    let test = ds.in_split(Split::Test);
    if !test.is_empty() {
        let report = surrogate::eval_surrogate(&net, &test)?;
        m.write(&t.out, "surrogate_test_metrics.tsv", &report.metrics_tsv())?;
        eprintln!("test min R2 {:.5}", report.min_r2());
    }
    eprintln!("best epoch {} val loss {:.4e}", history.best_epoch, history.best_val_loss);
    m.finish(&t.out)?;
    Ok(())
}

fn train_inverse(t: &Training, surrogate_path: &Path, seed: u64, jobs: usize) -> Result<()> {
    let mut m = RunManifest::start("train-inverse", seed, jobs);
    let h = load_hparams(t, seed, &mut m)?;
    m.input("dataset", &t.data);
    m.input("surrogate", surrogate_path);
    let ds = Dataset::read(&t.data)?;
    let sur = Network::load(surrogate_path)?;
    let (net, history) = inverse::train_inverse(&ds, &h.inverse, &h.policy, &sur)?;
    out_dir(&t.out)?;
    let model = t.out.join("inverse.json");
    net.save(&model)?;
    m.record(model);
    m.write(&t.out, "inverse_history.tsv", &history.to_tsv())?;
    let test = ds.in_split(Split::Test);
    if !test.is_empty() {
        let report = inverse::eval_inverse(&net, Some(&sur), &test)?;
        m.write(&t.out, "inverse_test_summary.tsv", &report.summary_tsv())?;
    }
    eprintln!("best epoch {} val loss {:.4e}", history.best_epoch, history.best_val_loss);
    m.finish(&t.out)?;
    Ok(())
}

fn eval_forward(e: &Evaluation, seed: u64, jobs: usize) -> Result<()> {
    let split = parse_split(&e.split)?;
    let mut m = RunManifest::start("eval-forward", seed, jobs);
    m.input("model", &e.model);
    m.input("dataset", &e.data);
    let net = Network::load(&e.model)?;
    let samples = select(&Dataset::read(&e.data)?, split);
    let report = surrogate::eval_surrogate(&net, &samples)?;
    out_dir(&e.out)?;
    m.write(&e.out, "forward_metrics.tsv", &report.metrics_tsv())?;
    m.write(&e.out, "forward_pairs.tsv", &report.pairs_tsv())?;
    print!("{}", report.metrics_tsv());
    m.finish(&e.out)?;
    Ok(())
}

fn eval_inverse(e: &Evaluation, surrogate_path: Option<&Path>, seed: u64, jobs: usize) -> Result<()> {
    let split = parse_split(&e.split)?;
    let mut m = RunManifest::start("eval-inverse", seed, jobs);
    m.input("model", &e.model);
    m.input("dataset", &e.data);
    let net = Network::load(&e.model)?;
    let sur = match surrogate_path {
        Some(p) => {
            m.input("surrogate", p);
            Some(Network::load(p)?)
        }
        None => None,
    };
    let samples = select(&Dataset::read(&e.data)?, split);
    let report = inverse::eval_inverse(&net, sur.as_ref(), &samples)?;
    out_dir(&e.out)?;
    m.write(&e.out, "inverse_summary.tsv", &report.summary_tsv())?;
    m.write(&e.out, "temperature.tsv", &report.temperature_tsv())?;
    for (k, tag) in FRACTION_TAGS.iter().enumerate() {
        m.write(&e.out, &format!("fraction_{tag}.tsv"), &report.fraction_tsv(k))?;
    }
    m.write(&e.out, "confusion.tsv", &report.confusion_tsv())?;

    // PCA of the chemistry the model sees, labelled by true granulometry.
    let cloud: Vec<Vec<f64>> = samples.iter().map(|s| s.chemistry.0.to_vec()).collect();
    let cloud = match net.input_scaler.as_ref() {
        Some(sc) => cloud.iter().map(|c| sc.transform(c)).collect(),
        None => cloud,
    };
    let labels: Vec<usize> = samples.iter().map(|s| s.recipe.granulometry.code()).collect();
    if let Ok(pca) = diagnostics::pca3_export(&cloud, &labels) {
        let sep = diagnostics::separability(&pca.coords, &labels, 3.0)?;
        m.write(&e.out, "pca3.tsv", &pca.to_tsv(&gran_names()))?;
        m.write(&e.out, "separability.tsv", &sep.to_tsv())?;
        for w in &pca.warnings {
            eprintln!("warning: {w}");
        }
    }
    print!("{}", report.summary_tsv());
    m.finish(&e.out)?;
    Ok(())
}

fn gran_names() -> [&'static str; 3] {
    ["G", "O", "F"]
}

fn invert(model: &Path, target: &str, surrogate_path: Option<&Path>) -> Result<()> {
    let values = parse_list(target, "--target")?;
    let values: [f64; N_SPECIES] = values.try_into().map_err(|v: Vec<f64>| {
        Error::invalid("target", format!("expected {N_SPECIES} comma-separated values, got {}", v.len()))
    })?;
    let chem = Chemistry::new(values)?;
    let net = Network::load(model)?;
    let sur = surrogate_path.map(Network::load).transpose()?;
    let inv = inverse::invert(&net, sur.as_ref(), &[chem])?.remove(0);
    let r = &inv.recipe;
    println!("temperature\t{}", format_float(r.temperature));
    println!("pressure\t{}", format_float(r.pressure));
    println!("granulometry\t{}", r.granulometry.letter());
    for (tag, f) in FRACTION_TAGS.iter().zip(r.fractions) {
        println!("{tag}\t{}", format_float(f));
    }
    let probs: Vec<String> = inv.granulometry_probs.iter().map(|p| format_float(*p)).collect();
    println!("granulometry_probs\t{}", probs.join(","));
    if let Some(res) = inv.residual {
        println!("residual\t{}", format_float(res));
    }
    for k in &inv.out_of_range {
        eprintln!("warning: {} lies outside the fitted chemistry range", SPECIES_TAGS[*k]);
    }
    Ok(())
}

fn random_recipe(g: &mut impl rand::Rng, pressure: f64) -> Result<Recipe> {
    let e: [f64; N_FRACTIONS] = std::array::from_fn(|_| -(1.0 - g.random::<f64>()).ln());
    let s: f64 = e.iter().sum();
    let gran = Granulometry::from_code(g.random_range(0..3))?;
    Ok(Recipe::new(g.random_range(88.0..=98.0), pressure, gran, e.map(|v| v / s))?)
}

fn diagnose(path: &Path, probes: usize, cloud: usize, neighbors: usize, out: &Path, seed: u64, jobs: usize) -> Result<()> {
    if probes == 0 || cloud < probes {
        return Err(CliError::Usage("--probes must be positive and no larger than --cloud".into()));
    }
    let mut m = RunManifest::start("diagnose", seed, jobs);
    m.input("surrogate", path);
    let net = Network::load(path)?;
    let pressure = net.input_scaler.as_ref().map_or(9.0, |s| s.min[1]);
    let mut g = stage_rng(seed, "diagnose-probes");
    let recipes: Vec<Recipe> = (0..cloud).map(|_| random_recipe(&mut g, pressure)).collect::<Result<_>>()?;

    let points: Vec<Vec<f64>> = recipes[..probes]
        .iter()
        .map(|r| surrogate::scale_recipe(&net, r).map(|x| x.to_vec()))
        .collect::<brewsolve::Result<_>>()?;
    let rank = diagnostics::rank_scan(
        &diagnostics::network_map(&net),
        &points,
        DEFAULT_FD_STEP,
        DEFAULT_RANK_THRESHOLD,
        Some((0.0, 1.0)),
    )?;

    let so = net
        .output_scaler
        .as_ref()
        .ok_or_else(|| Error::Contract("surrogate has no output scaler".into()))?;
    let predicted: Vec<Vec<f64>> = surrogate::predict(&net, &recipes)?.iter().map(|c| so.transform(c)).collect();
    let lpca = diagnostics::lpca_scan(&predicted, &predicted[..probes], neighbors, DEFAULT_LPCA_THRESHOLD)?;
    let labels: Vec<usize> = recipes.iter().map(|r| r.granulometry.code()).collect();
    let pca = diagnostics::pca3_export(&predicted, &labels)?;

    out_dir(out)?;
    m.write(out, "rank.tsv", &rank.to_tsv())?;
    m.write(out, "lpca.tsv", &lpca.to_tsv())?;
    m.write(out, "pca3.tsv", &pca.to_tsv(&gran_names()))?;
    println!(
        "jacobian rank: modal {} ({:.1}% of probes), constant {}",
        rank.modal_rank,
        100.0 * rank.agreement,
        rank.constant_rank.map_or("no".to_string(), |r| r.to_string())
    );
    println!("lpca dimension: modal {} ({:.1}% of queries)", lpca.modal_dimension, 100.0 * lpca.agreement);
    let explained: Vec<String> = pca.explained.iter().map(|e| format!("{e:.4}")).collect();
    println!("pca3 explained variance: {}", explained.join(", "));
    m.finish(out)?;
    Ok(())
}
