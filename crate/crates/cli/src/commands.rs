use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use tracing::info;

use robmaint::evaluation::{compare_policies, percentile_indices, EvalConfig, QmdpPlanner};
use robmaint::fractal::{sliding_fractal, LevelSignal};
use robmaint::inference::{run_mcmc, McmcConfig};
use robmaint::mdp::{mean_parameter_policy, EnsembleQ, DEFAULT_TOL};
use robmaint::pomdp::run_qmdp_episode;
use robmaint::prob::IntervalKind;
use robmaint::rng::{seeded, stream};
use robmaint::simulator::{generate_dataset, Behavior};
use robmaint::{CostTable, Dataset, Horizon, ModelSample, PomdpModel, PosteriorEnsemble, PriorConfig};

use crate::config::{invalid, resolve, write_manifest};

/// Flags shared by every subcommand.
#[derive(Args, Serialize, Debug, Clone, Default)]
pub struct Common {
    /// TOML configuration file; a run manifest works too
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Master seed
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Directory for outputs and the run manifest
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_gamma() -> f64 {
    PomdpModel::railway().gamma
}

fn railway(gamma: f64) -> anyhow::Result<PomdpModel> {
    Ok(PomdpModel::new(CostTable::railway(), gamma, Horizon::Infinite)?)
}

fn required<'a>(path: &'a Option<PathBuf>, flag: &str) -> anyhow::Result<&'a Path> {
    path.as_deref().ok_or_else(|| invalid(format!("--{flag} is required")))
}

fn load_ensemble(path: &Path) -> anyhow::Result<PosteriorEnsemble> {
    PosteriorEnsemble::load(path).with_context(|| format!("reading ensemble {}", path.display()))
}

/// Where a file would land, resolved against the current directory.
fn absolute(p: &Path) -> PathBuf {
    let joined = if p.is_absolute() {
        p.to_path_buf()
    } else {
        std::env::current_dir().unwrap_or_default().join(p)
    };
    match (joined.parent().and_then(|d| d.canonicalize().ok()), joined.file_name()) {
        (Some(dir), Some(name)) => dir.join(name),
        _ => joined,
    }
}

/// Creates the output directory and refuses to write over an input.
fn prepare(out_dir: &Path, inputs: &[PathBuf], outputs: &[PathBuf]) -> anyhow::Result<()> {
    if let Some(missing) = inputs.iter().find(|i| !i.is_file()) {
        return Err(invalid(format!("input {} does not exist", missing.display())));
    }
    std::fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    for o in outputs {
        if inputs.iter().any(|i| absolute(i) == absolute(o)) {
            return Err(invalid(format!("output {} would overwrite an input", o.display())));
        }
    }
    Ok(())
}

fn csv_writer(path: &Path) -> anyhow::Result<csv::Writer<BufWriter<File>>> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(csv::Writer::from_writer(BufWriter::new(f)))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    serde_json::to_writer_pretty(BufWriter::new(f), value)?;
    Ok(())
}

// ---------------------------------------------------------------- fractal

#[derive(Args, Serialize, Debug, Clone)]
pub struct FractalArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    /// Level CSV with columns position_m, level_mm
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
}

#[derive(Serialize, Deserialize, Debug, Clone)]
#[serde(default, deny_unknown_fields)]
pub struct FractalConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
}

impl Default for FractalConfig {
    fn default() -> Self {
        FractalConfig {
            seed: 0,
            out_dir: default_out_dir(),
            input: None,
        }
    }
}

#[derive(Deserialize)]
struct LevelRow {
    position_m: f64,
    level_mm: f64,
}

fn read_level(path: &Path) -> anyhow::Result<LevelSignal> {
    let mut reader = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let rows: Vec<LevelRow> = reader
        .deserialize()
        .collect::<Result<_, _>>()
        .map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    if rows.len() < 2 {
        return Err(invalid(format!("{}: need at least two rows", path.display())));
    }
    let spacing = rows[1].position_m - rows[0].position_m;
    for (k, w) in rows.windows(2).enumerate() {
        let d = w[1].position_m - w[0].position_m;
        if !(spacing > 0.0) || (d - spacing).abs() > 1e-6 * spacing.max(1.0) {
            return Err(invalid(format!(
                "{}: positions must be evenly spaced and increasing (row {})",
                path.display(),
                k + 2
            )));
        }
    }
    Ok(LevelSignal::new(rows.iter().map(|r| r.level_mm).collect(), spacing)?)
}

pub fn fractal(args: &FractalArgs, env: Vec<(String, String)>) -> anyhow::Result<()> {
    let cfg: FractalConfig = resolve("fractal", args.common.config.as_deref(), env, args)?;
    let input = required(&cfg.input, "input")?.to_path_buf();
    let out = cfg.out_dir.join("fractal.csv");
    prepare(&cfg.out_dir, std::slice::from_ref(&input), std::slice::from_ref(&out))?;

    let signal = read_level(&input)?;
    info!(
        samples = signal.samples().len(),
        spacing_m = signal.spacing(),
        "level signal loaded"
    );
    let triples = sliding_fractal(&signal)?;
    let mut w = csv_writer(&out)?;
    w.write_record(["window_start_m", "fv_short", "fv_mid", "fv_long"])?;
    for t in &triples {
        w.write_record([t.window_start, t.short, t.mid, t.long].map(|x| x.to_string()))?;
    }
    w.flush()?;
    info!(windows = triples.len(), "fractal values written");
    write_manifest(&cfg.out_dir, "fractal", cfg.seed, &cfg, &[input], &[out])?;
    Ok(())
}

// --------------------------------------------------------------- simulate

#[derive(ValueEnum, Serialize, Deserialize, Debug, Clone, Copy, PartialEq, Eq, Default)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    /// Built-in reference parameters
    #[default]
    Truth,
    /// A draw from the default prior
    Prior,
    /// One sample of an ensemble file
    Ensemble,
    /// A JSON parameter file
    File,
}

#[derive(Args, Serialize, Debug, Clone)]
pub struct SimulateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_series: Option<usize>,
    /// Observations per series
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub length: Option<usize>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source: Option<Source>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ensemble: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sample_index: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub params: Option<PathBuf>,
}

#[derive(Serialize, Deserialize, Debug, Clone)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub n_series: usize,
    pub length: usize,
    pub source: Source,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ensemble: Option<PathBuf>,
    pub sample_index: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub params: Option<PathBuf>,
    /// Maintenance behaviour of the simulated operator.
    pub behavior: Behavior,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig {
            seed: 0,
            out_dir: default_out_dir(),
            n_series: 62,
            length: 20,
            source: Source::Truth,
            ensemble: None,
            sample_index: 0,
            params: None,
            behavior: Behavior::default_for(4, 3),
        }
    }
}

pub fn simulate(args: &SimulateArgs, env: Vec<(String, String)>) -> anyhow::Result<()> {
    let cfg: SimulateConfig = resolve("simulate", args.common.config.as_deref(), env, args)?;
    let model = PomdpModel::railway();
    let mut inputs = Vec::new();
    let params: ModelSample = match cfg.source {
        Source::Truth => robmaint::presets::railway_truth(),
        Source::Prior => {
            PriorConfig::default_for(model.n_states, model.n_actions).sample_model(&mut stream(cfg.seed, &[1]))
        }
        Source::Ensemble => {
            let path = required(&cfg.ensemble, "ensemble")?;
            inputs.push(path.to_path_buf());
            let e = load_ensemble(path)?;
            e.get(cfg.sample_index).cloned().ok_or_else(|| {
                invalid(format!(
                    "sample index {} outside ensemble of {}",
                    cfg.sample_index,
                    e.len()
                ))
            })?
        }
        Source::File => {
            let path = required(&cfg.params, "params")?;
            inputs.push(path.to_path_buf());
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))?
        }
    };
    let violations = robmaint::model::validate(&params, &model);
    if !violations.is_empty() {
        return Err(invalid(format!("invalid parameters: {violations:?}")));
    }

    let data_path = cfg.out_dir.join("dataset.csv");
    let params_path = cfg.out_dir.join("params.json");
    let outputs = vec![data_path.clone(), params_path.clone()];
    prepare(&cfg.out_dir, &inputs, &outputs)?;
    let data = generate_dataset(
        &params,
        &model,
        cfg.n_series,
        cfg.length,
        &cfg.behavior,
        &mut stream(cfg.seed, &[0]),
    )?;
    data.save(&data_path)?;
    write_json(&params_path, &params)?;
    info!(series = cfg.n_series, length = cfg.length, source = ?cfg.source, "dataset written");
    write_manifest(&cfg.out_dir, "simulate", cfg.seed, &cfg, &inputs, &outputs)?;
    Ok(())
}

// ------------------------------------------------------------------ infer

#[derive(Args, Serialize, Debug, Clone)]
pub struct InferArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    /// Dataset CSV
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dataset: Option<PathBuf>,
    /// Prior file, TOML or JSON; built-in defaults otherwise
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub priors: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_states: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chains: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub burnin: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pilots: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pilot_sweeps: Option<usize>,
}

#[derive(Serialize, Deserialize, Debug, Clone)]
#[serde(default, deny_unknown_fields)]
pub struct InferConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dataset: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub priors: Option<PathBuf>,
    pub n_states: usize,
    pub chains: usize,
    pub burnin: usize,
    pub samples: usize,
    pub pilots: usize,
    pub pilot_sweeps: usize,
    pub adapt_every: usize,
}

impl Default for InferConfig {
    fn default() -> Self {
        let m = McmcConfig::default();
        InferConfig {
            seed: m.seed,
            out_dir: default_out_dir(),
            dataset: None,
            priors: None,
            n_states: 4,
            chains: m.n_chains,
            burnin: m.n_burnin,
            samples: m.n_samples,
            pilots: m.n_pilots,
            pilot_sweeps: m.pilot_sweeps,
            adapt_every: m.adapt_every,
        }
    }
}

fn read_priors(path: &Path) -> anyhow::Result<PriorConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let parsed = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).map_err(|e| e.to_string())
    } else {
        toml::from_str(&text).map_err(|e| e.to_string())
    };
    let priors: PriorConfig = parsed.map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    priors.validate()?;
    Ok(priors)
}

pub fn infer(args: &InferArgs, env: Vec<(String, String)>) -> anyhow::Result<()> {
    let cfg: InferConfig = resolve("infer", args.common.config.as_deref(), env, args)?;
    let dataset_path = required(&cfg.dataset, "dataset")?.to_path_buf();
    let n_actions = PomdpModel::railway().n_actions;
    // costs play no part in inference, so other state counts get zero costs
    let model = if cfg.n_states == 4 {
        PomdpModel::railway()
    } else {
        PomdpModel::new(
            CostTable::zeros(n_actions, cfg.n_states),
            default_gamma(),
            Horizon::Infinite,
        )?
    };
    let mut inputs = vec![dataset_path.clone()];
    let priors = match &cfg.priors {
        Some(p) => {
            inputs.push(p.clone());
            read_priors(p)?
        }
        None => PriorConfig::default_for(model.n_states, model.n_actions),
    };
    let ensemble_path = cfg.out_dir.join("ensemble.bin");
    let diag_path = cfg.out_dir.join("diagnostics.json");
    let outputs = vec![ensemble_path.clone(), diag_path.clone()];
    prepare(&cfg.out_dir, &inputs, &outputs)?;

    let data =
        Dataset::load(&dataset_path, n_actions).with_context(|| format!("reading {}", dataset_path.display()))?;
    info!(series = data.series.len(), "dataset loaded");
    let mcmc = McmcConfig {
        n_chains: cfg.chains,
        n_burnin: cfg.burnin,
        n_samples: cfg.samples,
        seed: cfg.seed,
        proposal_scales: None,
        adapt_every: cfg.adapt_every,
        n_pilots: cfg.pilots,
        pilot_sweeps: cfg.pilot_sweeps,
    };
    let (ensemble, diag) = run_mcmc(&data, &model, &priors, &mcmc)?;
    ensemble.save(&ensemble_path)?;
    write_json(&diag_path, &diag)?;
    info!(
        samples = ensemble.len(),
        max_rhat = diag.max_rhat(),
        "posterior written"
    );
    write_manifest(&cfg.out_dir, "infer", cfg.seed, &cfg, &inputs, &outputs)?;
    Ok(())
}

// ------------------------------------------------------------------ solve

#[derive(Args, Serialize, Debug, Clone)]
pub struct SolveArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ensemble: Option<PathBuf>,
    /// Finite planning horizon; infinite when absent
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
}

#[derive(Serialize, Deserialize, Debug, Clone)]
#[serde(default, deny_unknown_fields)]
pub struct SolveConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ensemble: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
    pub gamma: f64,
    pub tol: f64,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            seed: 0,
            out_dir: default_out_dir(),
            ensemble: None,
            horizon: None,
            gamma: default_gamma(),
            tol: DEFAULT_TOL,
        }
    }
}

#[derive(Serialize)]
struct PolicyReport {
    horizon: Horizon,
    gamma: f64,
    n_samples: usize,
    /// `[t][state]`; one row for an infinite horizon.
    robust: Vec<Vec<usize>>,
    mean_parameter: Vec<Vec<usize>>,
}

pub fn solve(args: &SolveArgs, env: Vec<(String, String)>) -> anyhow::Result<()> {
    let cfg: SolveConfig = resolve("solve", args.common.config.as_deref(), env, args)?;
    let ensemble_path = required(&cfg.ensemble, "ensemble")?.to_path_buf();
    let horizon = cfg.horizon.map_or(Horizon::Infinite, Horizon::Finite);
    let model = railway(cfg.gamma)?.with_horizon(horizon)?;
    let policy_path = cfg.out_dir.join("policy.json");
    let q_path = cfg.out_dir.join("q_stats.csv");
    let counts_path = cfg.out_dir.join("optimality_counts.csv");
    let outputs = vec![policy_path.clone(), q_path.clone(), counts_path.clone()];
    prepare(&cfg.out_dir, std::slice::from_ref(&ensemble_path), &outputs)?;

    let ensemble = load_ensemble(&ensemble_path)?;
    let q = EnsembleQ::solve(&ensemble, &model, cfg.tol)?;
    let steps = cfg.horizon.unwrap_or(1);
    let n = q.len() as f64;

    let mut w = csv_writer(&q_path)?;
    w.write_record(["t", "state", "action", "mean", "sd", "min", "max", "robust"])?;
    for t in 0..steps {
        let robust = q.robust_policy(t);
        for s in 0..model.n_states {
            for a in 0..model.n_actions {
                let v: Vec<f64> = (0..q.len()).map(|i| q.table(i, t).q(s, a)).collect();
                let mean = v.iter().sum::<f64>() / n;
                let sd = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0)).sqrt();
                let (lo, hi) = v
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &x| (l.min(x), h.max(x)));
                w.write_record([
                    t.to_string(),
                    s.to_string(),
                    a.to_string(),
                    mean.to_string(),
                    sd.to_string(),
                    lo.to_string(),
                    hi.to_string(),
                    (robust[s] == a).to_string(),
                ])?;
            }
        }
    }
    w.flush()?;

    let mut w = csv_writer(&counts_path)?;
    w.write_record(["t", "state", "action", "count"])?;
    for t in 0..steps {
        for (s, row) in q.optimality_counts(t).iter().enumerate() {
            for (a, c) in row.iter().enumerate() {
                w.write_record([t, s, a, *c].map(|x| x.to_string()))?;
            }
        }
    }
    w.flush()?;

    let report = PolicyReport {
        horizon,
        gamma: cfg.gamma,
        n_samples: q.len(),
        robust: q.robust_schedule(),
        mean_parameter: mean_parameter_policy(&ensemble, &model, cfg.tol)?,
    };
    write_json(&policy_path, &report)?;
    info!(samples = q.len(), robust = ?report.robust[0], mean_parameter = ?report.mean_parameter[0], "policies written");
    write_manifest(&cfg.out_dir, "solve", cfg.seed, &cfg, &[ensemble_path], &outputs)?;
    Ok(())
}

// ------------------------------------------------------------------- plan

#[derive(Args, Serialize, Debug, Clone)]
pub struct PlanArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ensemble: Option<PathBuf>,
    /// True environment: this ensemble sample
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truth_index: Option<usize>,
    /// True environment: the sample at this log-posterior percentile, in [0, 1]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truth_percentile: Option<f64>,
    /// True environment: a prior draw with this seed
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truth_prior_seed: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replicates: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub planning_samples: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
}

#[derive(Serialize, Deserialize, Debug, Clone)]
#[serde(default, deny_unknown_fields)]
pub struct PlanConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ensemble: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truth_index: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truth_percentile: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truth_prior_seed: Option<u64>,
    pub horizon: usize,
    pub replicates: usize,
    pub planning_samples: usize,
    pub gamma: f64,
}

impl Default for PlanConfig {
    fn default() -> Self {
        PlanConfig {
            seed: 0,
            out_dir: default_out_dir(),
            ensemble: None,
            truth_index: None,
            truth_percentile: None,
            truth_prior_seed: None,
            horizon: 50,
            replicates: 1,
            planning_samples: 500,
            gamma: default_gamma(),
        }
    }
}

fn pick_truth(cfg: &PlanConfig, ensemble: &PosteriorEnsemble, model: &PomdpModel) -> anyhow::Result<ModelSample> {
    let chosen = [
        cfg.truth_index.is_some(),
        cfg.truth_percentile.is_some(),
        cfg.truth_prior_seed.is_some(),
    ];
    if chosen.iter().filter(|&&c| c).count() > 1 {
        return Err(invalid(
            "choose at most one of truth_index, truth_percentile, truth_prior_seed",
        ));
    }
    if let Some(i) = cfg.truth_index {
        return ensemble
            .get(i)
            .cloned()
            .ok_or_else(|| invalid(format!("truth index {i} outside ensemble of {}", ensemble.len())));
    }
    if let Some(seed) = cfg.truth_prior_seed {
        return Ok(PriorConfig::default_for(model.n_states, model.n_actions).sample_model(&mut seeded(seed)));
    }
    let p = cfg.truth_percentile.unwrap_or(0.5);
    let i = percentile_indices(ensemble, &[p])?[0];
    Ok(ensemble.samples()[i].clone())
}

pub fn plan(args: &PlanArgs, env: Vec<(String, String)>) -> anyhow::Result<()> {
    let cfg: PlanConfig = resolve("plan", args.common.config.as_deref(), env, args)?;
    let ensemble_path = required(&cfg.ensemble, "ensemble")?.to_path_buf();
    if cfg.replicates == 0 || cfg.horizon == 0 {
        return Err(invalid("plan needs replicates >= 1 and horizon >= 1"));
    }
    let model = railway(cfg.gamma)?;
    let trace_path = cfg.out_dir.join("trace.csv");
    prepare(
        &cfg.out_dir,
        std::slice::from_ref(&ensemble_path),
        std::slice::from_ref(&trace_path),
    )?;

    let ensemble = load_ensemble(&ensemble_path)?;
    let truth = pick_truth(&cfg, &ensemble, &model)?;
    let planner = QmdpPlanner::new(
        ensemble.thinned(cfg.planning_samples).samples().to_vec(),
        &model,
        cfg.horizon,
    )?;
    let mut w = csv_writer(&trace_path)?;
    let mut header: Vec<String> = ["replicate", "t", "z", "state", "action"].map(String::from).to_vec();
    header.extend((0..model.n_states).map(|s| format!("b{s}")));
    w.write_record(&header)?;
    let mut floored = 0;
    for r in 0..cfg.replicates {
        let ep = run_qmdp_episode(
            &truth,
            planner.samples(),
            planner.q(),
            &model,
            cfg.horizon,
            &mut stream(cfg.seed, &[r as u64]),
        )?;
        floored += ep.floored_steps;
        let tr = &ep.trajectory;
        for t in 0..=cfg.horizon {
            let mut row = vec![
                r.to_string(),
                t.to_string(),
                tr.observations[t].to_string(),
                tr.states[t].to_string(),
                tr.actions.get(t).map(ToString::to_string).unwrap_or_default(),
            ];
            row.extend(ep.beliefs[t].iter().map(ToString::to_string));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    info!(
        replicates = cfg.replicates,
        horizon = cfg.horizon,
        floored_steps = floored,
        "belief trace written"
    );
    write_manifest(&cfg.out_dir, "plan", cfg.seed, &cfg, &[ensemble_path], &[trace_path])?;
    Ok(())
}

// --------------------------------------------------------------- evaluate

#[derive(Args, Serialize, Debug, Clone)]
pub struct EvaluateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ensemble: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_sims: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub planning_samples: Option<usize>,
    /// Interval mass
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mass: Option<f64>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub interval: Option<Interval>,
    /// Score discounted returns
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub discounted: Option<bool>,
    /// Add the robust MDP policy that sees the true state
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub full_observability: Option<bool>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
}

#[derive(ValueEnum, Serialize, Deserialize, Debug, Clone, Copy, PartialEq, Eq, Default)]
#[serde(rename_all = "snake_case")]
pub enum Interval {
    #[default]
    Hdi,
    EqualTailed,
}

#[derive(Serialize, Deserialize, Debug, Clone)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ensemble: Option<PathBuf>,
    pub n_sims: usize,
    pub horizon: usize,
    pub planning_samples: usize,
    pub mass: f64,
    pub interval: Interval,
    pub discounted: bool,
    pub full_observability: bool,
    pub gamma: f64,
}

impl Default for EvaluateConfig {
    fn default() -> Self {
        let e = EvalConfig::default();
        EvaluateConfig {
            seed: e.seed,
            out_dir: default_out_dir(),
            ensemble: None,
            n_sims: e.n_sims,
            horizon: e.horizon,
            planning_samples: e.planning_samples,
            mass: e.mass,
            interval: Interval::Hdi,
            discounted: e.discounted,
            full_observability: e.full_observability,
            gamma: default_gamma(),
        }
    }
}

pub fn evaluate(args: &EvaluateArgs, env: Vec<(String, String)>) -> anyhow::Result<()> {
    let cfg: EvaluateConfig = resolve("evaluate", args.common.config.as_deref(), env, args)?;
    let ensemble_path = required(&cfg.ensemble, "ensemble")?.to_path_buf();
    let model = railway(cfg.gamma)?;
    let csv_path = cfg.out_dir.join("evaluation.csv");
    let json_path = cfg.out_dir.join("evaluation.json");
    let outputs = vec![csv_path.clone(), json_path.clone()];
    prepare(&cfg.out_dir, std::slice::from_ref(&ensemble_path), &outputs)?;

    let ensemble = load_ensemble(&ensemble_path)?;
    let eval = EvalConfig {
        n_sims: cfg.n_sims,
        horizon: cfg.horizon,
        seed: cfg.seed,
        mass: cfg.mass,
        interval: match cfg.interval {
            Interval::Hdi => IntervalKind::Hdi,
            Interval::EqualTailed => IntervalKind::EqualTailed,
        },
        discounted: cfg.discounted,
        planning_samples: cfg.planning_samples,
        full_observability: cfg.full_observability,
    };
    let report = compare_policies(&ensemble, &model, &eval)?;
    report.write_csv(BufWriter::new(File::create(&csv_path)?))?;
    std::fs::write(&json_path, report.to_json()?)?;
    for row in &report.rows {
        info!(policy = %row.policy, mean = row.stats.mean, se = row.stats.se, "policy evaluated");
    }
    write_manifest(&cfg.out_dir, "evaluate", cfg.seed, &cfg, &[ensemble_path], &outputs)?;
    Ok(())
}
