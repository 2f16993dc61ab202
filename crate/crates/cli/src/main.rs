//! Command-line driver for the experiment pipelines.
//!
//! Settings come from built-in defaults, then an optional `key = value`
//! config file, then command-line flags. Exit codes: 0 success, 2 invalid
//! configuration, 3 numerical failure, 1 anything else (I/O).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use triplet_uq::embedding::{LossKind, OptimizerConfig};
use triplet_uq::ensemble::{EnsembleMethod, PriorSpec};
use triplet_uq::experiments::{
    self, ActiveLoopConfig, CalibrationConfig, DimensionConfig, PredictionConfig, Sweep,
};
use triplet_uq::io::{self, Table};
use triplet_uq::psychophysics::{run_psycho_experiment, PsychoConfig};
use triplet_uq::{rng, Error};

#[derive(Parser, Debug)]
#[command(
    name = "triplet-uq",
    version,
    about = "Uncertainty estimates for ordinal embeddings"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Embedding error and uncertainty across noise levels.
    CalibrateNoise(Common),
    /// Embedding error and uncertainty across triplet fractions.
    CalibrateTriplets(Common),
    /// Prediction error and abstention over thresholds and triplet fractions.
    PredictGrid(Common),
    /// Uncertainty-based choice of the embedding dimension.
    Dimscan(Common),
    /// Simulated perception study over GP lengthscales.
    Psycho(Common),
    /// Uncertainty-driven versus random triplet queries.
    Active(Common),
}

#[derive(Args, Debug, Default)]
struct Common {
    /// `key = value` settings file; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Ensemble method: bootstrap or bayes.
    #[arg(long)]
    method: Option<String>,
    /// Loss: ste, tste, ck or gnmds.
    #[arg(long)]
    loss: Option<String>,
    /// Bootstrap replicas.
    #[arg(long)]
    b: Option<usize>,
    /// Bootstrap subsample fraction.
    #[arg(long)]
    r: Option<f64>,
    /// Posterior samples.
    #[arg(long)]
    samples: Option<usize>,
    /// Prior variance per coordinate.
    #[arg(long = "prior-scale")]
    prior_scale: Option<f64>,
    /// Answer noise level.
    #[arg(long)]
    sigma: Option<f64>,
    /// Embedding dimension (true dimension for dimscan).
    #[arg(long)]
    dim: Option<usize>,
    /// Master seed; every random stream derives from it.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Repetitions (paired seeds for active).
    #[arg(long)]
    reps: Option<usize>,
    /// Comma-separated sweep values: sigmas, fractions, thresholds,
    /// dimensions or lengthscales depending on the command.
    #[arg(long)]
    grid: Option<String>,
    /// Number of points.
    #[arg(long)]
    n: Option<usize>,
}

/// Fully resolved settings.
#[derive(Debug, Clone, PartialEq)]
struct Settings {
    method: String,
    loss: String,
    b: Option<usize>,
    r: Option<f64>,
    samples: usize,
    prior_scale: f64,
    sigma: Option<f64>,
    dim: Option<usize>,
    seed: u64,
    out: PathBuf,
    reps: usize,
    grid: Option<String>,
    n: Option<usize>,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            method: "bootstrap".into(),
            loss: "ste".into(),
            b: None,
            r: None,
            samples: 500,
            prior_scale: PriorSpec::DEFAULT_SCALE,
            sigma: None,
            dim: None,
            seed: 0,
            out: PathBuf::from("out"),
            reps: 5,
            grid: None,
            n: None,
        }
    }
}

fn config_error(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> triplet_uq::Result<T> {
    value
        .parse()
        .map_err(|_| config_error(format!("invalid value '{value}' for '{key}'")))
}

impl Settings {
    fn set(&mut self, key: &str, value: &str) -> triplet_uq::Result<()> {
        match key.replace('_', "-").as_str() {
            "method" => self.method = value.to_string(),
            "loss" => self.loss = value.to_string(),
            "b" => self.b = Some(parse_value(key, value)?),
            "r" => self.r = Some(parse_value(key, value)?),
            "samples" => self.samples = parse_value(key, value)?,
            "prior-scale" => self.prior_scale = parse_value(key, value)?,
            "sigma" => self.sigma = Some(parse_value(key, value)?),
            "dim" => self.dim = Some(parse_value(key, value)?),
            "seed" => self.seed = parse_value(key, value)?,
            "out" => self.out = PathBuf::from(value),
            "reps" => self.reps = parse_value(key, value)?,
            "grid" => self.grid = Some(value.to_string()),
            "n" => self.n = Some(parse_value(key, value)?),
            other => return Err(config_error(format!("unknown setting '{other}'"))),
        }
        Ok(())
    }

    fn apply_file(&mut self, text: &str) -> triplet_uq::Result<()> {
        for (k, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: k + 1,
                message: format!("expected 'key = value', got '{line}'"),
            })?;
            self.set(key.trim(), value.trim())
                .map_err(|e| Error::Parse {
                    line: k + 1,
                    message: e.to_string(),
                })?;
        }
        Ok(())
    }

    fn apply_flags(&mut self, c: &Common) {
        if let Some(v) = &c.method {
            self.method = v.clone();
        }
        if let Some(v) = &c.loss {
            self.loss = v.clone();
        }
        if c.b.is_some() {
            self.b = c.b;
        }
        if c.r.is_some() {
            self.r = c.r;
        }
        if let Some(v) = c.samples {
            self.samples = v;
        }
        if let Some(v) = c.prior_scale {
            self.prior_scale = v;
        }
        if c.sigma.is_some() {
            self.sigma = c.sigma;
        }
        if c.dim.is_some() {
            self.dim = c.dim;
        }
        if let Some(v) = c.seed {
            self.seed = v;
        }
        if let Some(v) = &c.out {
            self.out = v.clone();
        }
        if let Some(v) = c.reps {
            self.reps = v;
        }
        if c.grid.is_some() {
            self.grid = c.grid.clone();
        }
        if c.n.is_some() {
            self.n = c.n;
        }
    }

    fn resolve(c: &Common) -> triplet_uq::Result<Self> {
        let mut s = Settings::default();
        if let Some(path) = &c.config {
            let text = fs::read_to_string(path)
                .map_err(|e| config_error(format!("cannot read config {}: {e}", path.display())))?;
            s.apply_file(&text)?;
        }
        s.apply_flags(c);
        if s.reps == 0 {
            return Err(config_error("reps must be >= 1"));
        }
        s.ensemble()?;
        Ok(s)
    }

    fn loss_kind(&self) -> triplet_uq::Result<LossKind> {
        self.loss.parse()
    }

    fn ensemble(&self) -> triplet_uq::Result<EnsembleMethod> {
        let loss = self.loss_kind()?;
        match self.method.as_str() {
            "bootstrap" => Ok(EnsembleMethod::Bootstrap {
                loss,
                b: self.b.unwrap_or(20),
                r: self.r.unwrap_or(0.4),
            }),
            "bayes" | "bayesian" => Ok(EnsembleMethod::Bayesian {
                loss,
                prior: PriorSpec::new(self.prior_scale)?,
                n_samples: self.samples,
                thinning: 1,
            }),
            other => Err(config_error(format!("unknown method '{other}'"))),
        }
    }

    fn grid<T: std::str::FromStr>(&self) -> triplet_uq::Result<Option<Vec<T>>> {
        self.grid
            .as_deref()
            .map(|g| {
                g.split(',')
                    .map(|v| parse_value::<T>("grid", v.trim()))
                    .collect::<triplet_uq::Result<Vec<T>>>()
            })
            .transpose()
    }

    fn describe(&self) -> serde_json::Value {
        json!({
            "method": self.method,
            "loss": self.loss,
            "b": self.b,
            "r": self.r,
            "samples": self.samples,
            "prior_scale": self.prior_scale,
            "sigma": self.sigma,
            "dim": self.dim,
            "seed": self.seed,
            "reps": self.reps,
            "grid": self.grid,
            "n": self.n,
        })
    }
}

fn write_outputs(
    dir: &Path,
    stem: &str,
    table: &Table,
    settings: &Settings,
    result: serde_json::Value,
) -> triplet_uq::Result<()> {
    fs::create_dir_all(dir).map_err(|source| Error::File {
        path: dir.to_path_buf(),
        source,
    })?;
    table.write(dir.join(format!("{stem}.csv")))?;
    io::write_json(
        dir.join(format!("{stem}.json")),
        &json!({
            "experiment": stem,
            "settings": settings.describe(),
            "optimizer": OptimizerConfig::default(),
            "result": result,
        }),
    )
}

fn calibrate(s: &Settings, noise: bool) -> triplet_uq::Result<()> {
    let sweep = if noise {
        match s.grid()? {
            Some(sigmas) => Sweep::Noise {
                fraction: 0.01,
                sigmas,
            },
            None => Sweep::noise_default(),
        }
    } else {
        Sweep::Triplets {
            sigma: s.sigma.unwrap_or(0.0),
            fractions: s.grid()?.unwrap_or_else(|| vec![0.005, 0.02, 0.05, 0.15]),
        }
    };
    let mut cfg = CalibrationConfig::new(s.ensemble()?, sweep, s.seed);
    cfg.loss = s.loss_kind()?;
    cfg.reps = s.reps;
    cfg.d = s.dim.unwrap_or(cfg.d);
    cfg.n = s.n.unwrap_or(cfg.n);
    let res = experiments::run_calibration_sweep(&cfg)?;
    let stem = if noise {
        "calibration_noise"
    } else {
        "calibration_triplets"
    };
    write_outputs(
        &s.out,
        stem,
        &res.to_table(),
        s,
        serde_json::to_value(&res)?,
    )
}

fn predict_grid(s: &Settings) -> triplet_uq::Result<()> {
    let mut cfg = PredictionConfig::new(s.ensemble()?, s.seed);
    cfg.reps = s.reps;
    cfg.sigma = s.sigma.unwrap_or(cfg.sigma);
    cfg.d = s.dim.unwrap_or(cfg.d);
    cfg.n = s.n.unwrap_or(cfg.n);
    if let Some(t) = s.grid()? {
        cfg.thresholds = t;
    }
    let res = experiments::run_prediction_grid(&cfg)?;
    write_outputs(
        &s.out,
        "prediction_grid",
        &res.to_table(),
        s,
        serde_json::to_value(&res)?,
    )
}

fn dimscan(s: &Settings) -> triplet_uq::Result<()> {
    let mut results = Vec::with_capacity(s.reps);
    let mut table = Table::new(&[
        "seed",
        "dim",
        "training_loss",
        "uncertainty",
        "mean_sigma",
        "best",
    ]);
    for k in 0..s.reps as u64 {
        let mut cfg = DimensionConfig::new(s.seed + k);
        cfg.method = s.ensemble()?;
        cfg.sigma = s.sigma.unwrap_or(cfg.sigma);
        cfg.d_true = s.dim.unwrap_or(cfg.d_true);
        cfg.n = s.n.unwrap_or(cfg.n);
        if let Some(dims) = s.grid()? {
            cfg.dims = dims;
        }
        let res = experiments::run_dimension_experiment(&cfg)?;
        for row in res.to_table().rows {
            let mut full = vec![cfg.seed.to_string()];
            full.extend(row);
            table.push(full);
        }
        results.push(res);
    }
    write_outputs(
        &s.out,
        "dimscan",
        &table,
        s,
        serde_json::to_value(&results)?,
    )
}

fn psycho(s: &Settings) -> triplet_uq::Result<()> {
    if !matches!(s.ensemble()?, EnsembleMethod::Bootstrap { .. }) {
        return Err(config_error("psycho supports only the bootstrap method"));
    }
    let lengthscales = s.grid()?.unwrap_or_else(|| vec![2.0, 0.88, 0.54]);
    let mut results = Vec::with_capacity(lengthscales.len());
    for &l in &lengthscales {
        let mut cfg = PsychoConfig::new(l)?;
        cfg.b = s.b.unwrap_or(cfg.b);
        cfg.r = s.r.unwrap_or(cfg.r);
        cfg.loss = s.loss_kind()?.spec_for(1);
        results.push(run_psycho_experiment(
            &cfg,
            &OptimizerConfig::default(),
            &mut rng::from_seed(s.seed),
        )?);
    }
    write_outputs(
        &s.out,
        "psycho",
        &io::psycho_table(&results, s.seed),
        s,
        serde_json::to_value(&results)?,
    )
}

fn active(s: &Settings) -> triplet_uq::Result<()> {
    let mut cfg = ActiveLoopConfig {
        method: s.ensemble()?,
        loss: s.loss_kind()?,
        ..ActiveLoopConfig::default()
    };
    cfg.sigma = s.sigma.unwrap_or(cfg.sigma);
    cfg.d = s.dim.unwrap_or(cfg.d);
    cfg.n = s.n.unwrap_or(cfg.n);
    let mut traces = Vec::with_capacity(s.reps);
    for k in 0..s.reps as u64 {
        let seed = s.seed + k;
        let (u, r) = experiments::run_active_comparison(&cfg, seed)?;
        traces.push((seed, u, r));
    }
    let flat: Vec<(u64, &experiments::ActiveTrace)> = traces
        .iter()
        .flat_map(|(seed, u, r)| [(*seed, u), (*seed, r)])
        .collect();
    let result = json!(traces
        .iter()
        .map(|(seed, u, r)| json!({"seed": seed, "uncertainty": u, "random": r}))
        .collect::<Vec<_>>());
    write_outputs(
        &s.out,
        "active",
        &experiments::active_table(&flat),
        s,
        result,
    )
}

fn run(cli: Cli) -> triplet_uq::Result<()> {
    match cli.command {
        Command::CalibrateNoise(c) => calibrate(&Settings::resolve(&c)?, true),
        Command::CalibrateTriplets(c) => calibrate(&Settings::resolve(&c)?, false),
        Command::PredictGrid(c) => predict_grid(&Settings::resolve(&c)?),
        Command::Dimscan(c) => dimscan(&Settings::resolve(&c)?),
        Command::Psycho(c) => psycho(&Settings::resolve(&c)?),
        Command::Active(c) => active(&Settings::resolve(&c)?),
    }
}

fn exit_code(e: &Error) -> u8 {
    if e.is_numerical() {
        return 3;
    }
    match e {
        Error::File { .. } | Error::Io(_) => 1,
        Error::Replica { source, .. } => exit_code(source),
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
