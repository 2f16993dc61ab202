//! End-to-end experiment pipelines.
//!
//! Every run is a pure function of its configuration and master seed: each
//! stochastic stage draws from its own stream `derive(seed, path)`, so
//! reruns are bit-identical and paired runs can share streams on purpose.
//! Repetitions keep the point set fixed and redraw only the triplets.

use serde::{Deserialize, Serialize};

use crate::datasets::{
    calibration_mixture, gaussian_features, pca_project, sample_mixture, separated_clusters,
    PointSet,
};
use crate::embedding::{self, LossKind, LossSpec, OptimizerConfig};
use crate::ensemble::EnsembleMethod;
use crate::error::{Error, Result};
use crate::eval::{self, PredictionOutcome, SpectralConfig};
use crate::geometry::Embedding;
use crate::io::Table;
use crate::rng;
use crate::stats;
use crate::triplets::{
    answer_comparisons, random_comparison, sample_noisy_from_distances, NoiseModel, TripletDraw,
    TripletSet,
};
use crate::uncertainty::{self, dimension_scan, select_uncertain_batch, DimensionScan};

// Stream labels for `rng::derive`.
const POINTS: u64 = 1;
const TRIPLETS: u64 = 2;
const FIT: u64 = 3;
const ENSEMBLE: u64 = 4;
const SELECT: u64 = 5;
const ORACLE: u64 = 6;
const EVAL: u64 = 7;
const SCAN: u64 = 8;

fn check_reps(reps: usize) -> Result<()> {
    if reps == 0 {
        return Err(Error::invalid("repetition count must be >= 1"));
    }
    Ok(())
}

fn check_grid<T>(name: &str, grid: &[T]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::invalid(format!("{name} grid is empty")));
    }
    Ok(())
}

/// Points for the calibration and prediction experiments.
pub fn calibration_points(n: usize, seed: u64) -> Result<PointSet> {
    sample_mixture(&calibration_mixture(), n, &mut rng::derive(seed, &[POINTS]))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "sweep", rename_all = "snake_case")]
pub enum Sweep {
    /// Vary σ at a fixed triplet fraction.
    Noise { fraction: f64, sigmas: Vec<f64> },
    /// Vary the triplet fraction at a fixed σ.
    Triplets { sigma: f64, fractions: Vec<f64> },
}

impl Sweep {
    pub fn noise_default() -> Self {
        Sweep::Noise {
            fraction: 0.01,
            sigmas: vec![0.0, 0.15, 0.3, 0.6, 1.2],
        }
    }

    pub fn triplets_default() -> Self {
        Sweep::Triplets {
            sigma: 0.0,
            fractions: vec![0.005, 0.02, 0.05, 0.15],
        }
    }

    fn points(&self) -> Vec<(f64, f64, f64)> {
        // (sweep value, fraction, sigma)
        match self {
            Sweep::Noise { fraction, sigmas } => {
                sigmas.iter().map(|&s| (s, *fraction, s)).collect()
            }
            Sweep::Triplets { sigma, fractions } => {
                fractions.iter().map(|&f| (f, f, *sigma)).collect()
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationConfig {
    pub n: usize,
    pub d: usize,
    /// Loss of the point estimate compared against the ground truth.
    pub loss: LossKind,
    pub method: EnsembleMethod,
    pub sweep: Sweep,
    pub reps: usize,
    pub seed: u64,
    pub opt: OptimizerConfig,
}

impl CalibrationConfig {
    pub fn new(method: EnsembleMethod, sweep: Sweep, seed: u64) -> Self {
        Self {
            n: 50,
            d: 2,
            loss: LossKind::Ste,
            method,
            sweep,
            reps: 5,
            seed,
            opt: OptimizerConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRow {
    pub value: f64,
    pub n_triplets: usize,
    /// Per repetition, scale-normalized Procrustes distance to the truth.
    pub procrustes: Vec<f64>,
    /// Per repetition, folded true-triplet uncertainty (0 certain, ½ chance).
    pub uncertainty: Vec<f64>,
    pub procrustes_mean: f64,
    pub procrustes_std: f64,
    pub uncertainty_mean: f64,
    pub uncertainty_std: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationTable {
    pub method: String,
    pub rows: Vec<CalibrationRow>,
}

impl CalibrationTable {
    pub fn to_table(&self) -> Table {
        let mut t = Table::new(&[
            "value",
            "method",
            "n_triplets",
            "procrustes_mean",
            "procrustes_std",
            "uncertainty_mean",
            "uncertainty_std",
        ]);
        for r in &self.rows {
            t.push(vec![
                r.value.to_string(),
                self.method.clone(),
                r.n_triplets.to_string(),
                r.procrustes_mean.to_string(),
                r.procrustes_std.to_string(),
                r.uncertainty_mean.to_string(),
                r.uncertainty_std.to_string(),
            ]);
        }
        t
    }
}

pub fn run_calibration_sweep(cfg: &CalibrationConfig) -> Result<CalibrationTable> {
    check_reps(cfg.reps)?;
    let grid = cfg.sweep.points();
    check_grid("sweep", &grid)?;
    let points = calibration_points(cfg.n, cfg.seed)?;
    let truth = points.points.distance_matrix();
    let spec = cfg.loss.spec_for(cfg.d);
    let mut rows = Vec::with_capacity(grid.len());
    for (gi, &(value, fraction, sigma)) in grid.iter().enumerate() {
        let noise = NoiseModel::new(sigma)?;
        let mut procrustes = Vec::with_capacity(cfg.reps);
        let mut uncert = Vec::with_capacity(cfg.reps);
        let mut n_triplets = 0;
        for rep in 0..cfg.reps {
            let path = [gi as u64, rep as u64];
            let set = sample_noisy_from_distances(
                &truth,
                TripletDraw::Fraction(fraction),
                noise,
                &mut rng::derive(cfg.seed, &[TRIPLETS, path[0], path[1]]),
            )?;
            n_triplets = set.len();
            let fit = embedding::embed(
                &set,
                cfg.d,
                &spec,
                &cfg.opt,
                &mut rng::derive(cfg.seed, &[FIT, path[0], path[1]]),
            )?;
            procrustes.push(eval::normalized_procrustes_distance(
                &fit.embedding,
                &points.points,
            )?);
            let ens = cfg.method.build(
                &set,
                cfg.d,
                &cfg.opt,
                &mut rng::derive(cfg.seed, &[ENSEMBLE, path[0], path[1]]),
            )?;
            let st = uncertainty::distance_stats(&ens)?;
            uncert.push(1.0 - uncertainty::true_average_from_distances(&st, &truth)?);
        }
        rows.push(CalibrationRow {
            value,
            n_triplets,
            procrustes_mean: stats::mean(&procrustes),
            procrustes_std: stats::sample_std(&procrustes),
            uncertainty_mean: stats::mean(&uncert),
            uncertainty_std: stats::sample_std(&uncert),
            procrustes,
            uncertainty: uncert,
        });
    }
    Ok(CalibrationTable {
        method: cfg.method.name().to_string(),
        rows,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionConfig {
    pub n: usize,
    pub d: usize,
    pub sigma: f64,
    pub method: EnsembleMethod,
    pub fractions: Vec<f64>,
    pub thresholds: Vec<f64>,
    pub reps: usize,
    pub seed: u64,
    pub opt: OptimizerConfig,
}

impl PredictionConfig {
    pub fn new(method: EnsembleMethod, seed: u64) -> Self {
        Self {
            n: 50,
            d: 2,
            sigma: 0.0,
            method,
            fractions: vec![0.01, 0.05, 0.15],
            thresholds: vec![0.55, 0.65, 0.75, 0.85, 0.95],
            reps: 5,
            seed,
            opt: OptimizerConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionGrid {
    pub fractions: Vec<f64>,
    pub thresholds: Vec<f64>,
    /// `outcomes[rep][fraction][threshold]`.
    pub outcomes: Vec<Vec<Vec<PredictionOutcome>>>,
}

impl PredictionGrid {
    pub fn to_table(&self) -> Table {
        let mut t = Table::new(&["rep", "fraction", "threshold", "error", "abstention"]);
        for (rep, by_frac) in self.outcomes.iter().enumerate() {
            for (f, by_t) in self.fractions.iter().zip(by_frac) {
                for o in by_t {
                    t.push(vec![
                        rep.to_string(),
                        f.to_string(),
                        o.threshold.to_string(),
                        o.error.to_string(),
                        o.abstention.to_string(),
                    ]);
                }
            }
        }
        t
    }
}

pub fn run_prediction_grid(cfg: &PredictionConfig) -> Result<PredictionGrid> {
    check_reps(cfg.reps)?;
    check_grid("fraction", &cfg.fractions)?;
    check_grid("threshold", &cfg.thresholds)?;
    for &t in &cfg.thresholds {
        uncertainty::check_threshold(t)?;
    }
    let points = calibration_points(cfg.n, cfg.seed)?;
    let truth = points.points.distance_matrix();
    let noise = NoiseModel::new(cfg.sigma)?;
    let mut outcomes = Vec::with_capacity(cfg.reps);
    for rep in 0..cfg.reps {
        let mut by_frac = Vec::with_capacity(cfg.fractions.len());
        for (fi, &fraction) in cfg.fractions.iter().enumerate() {
            let path = [fi as u64, rep as u64];
            let set = sample_noisy_from_distances(
                &truth,
                TripletDraw::Fraction(fraction),
                noise,
                &mut rng::derive(cfg.seed, &[TRIPLETS, path[0], path[1]]),
            )?;
            let ens = cfg.method.build(
                &set,
                cfg.d,
                &cfg.opt,
                &mut rng::derive(cfg.seed, &[ENSEMBLE, path[0], path[1]]),
            )?;
            let st = uncertainty::distance_stats(&ens)?;
            by_frac.push(eval::evaluate_predictions(&st, &truth, &cfg.thresholds)?);
        }
        outcomes.push(by_frac);
    }
    Ok(PredictionGrid {
        fractions: cfg.fractions.clone(),
        thresholds: cfg.thresholds.clone(),
        outcomes,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimensionConfig {
    /// Rows and columns of the synthetic feature matrix.
    pub features: (usize, usize),
    pub n: usize,
    pub d_true: usize,
    pub fraction: f64,
    pub sigma: f64,
    pub dims: Vec<usize>,
    pub method: EnsembleMethod,
    pub seed: u64,
    pub opt: OptimizerConfig,
}

impl DimensionConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            features: (500, 10),
            n: 50,
            d_true: 3,
            fraction: 0.2,
            sigma: 0.1,
            dims: (1..=6).collect(),
            method: EnsembleMethod::bootstrap(LossKind::Ste),
            seed,
            opt: OptimizerConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimensionResult {
    pub d_true: usize,
    pub n_triplets: usize,
    /// STE training loss per entry of `scan.dims`.
    pub training_loss: Vec<f64>,
    pub scan: DimensionScan,
}

impl DimensionResult {
    pub fn to_table(&self) -> Table {
        let mut t = Table::new(&["dim", "training_loss", "uncertainty", "mean_sigma", "best"]);
        for (k, &d) in self.scan.dims.iter().enumerate() {
            t.push(vec![
                d.to_string(),
                self.training_loss[k].to_string(),
                self.scan.uncertainty[k].to_string(),
                self.scan.mean_sigma[k].to_string(),
                (d == self.scan.best).to_string(),
            ]);
        }
        t
    }
}

/// STE training loss per dimension. Each dimension takes the better of the
/// random restarts and a warm start from the previous (smaller) dimension's
/// solution padded with a zero column, so the loss cannot increase along
/// ascending dimensions.
pub fn training_loss_by_dim(
    set: &TripletSet,
    dims: &[usize],
    opt: &OptimizerConfig,
    seed: u64,
) -> Result<Vec<f64>> {
    let mut order: Vec<usize> = (0..dims.len()).collect();
    order.sort_by_key(|&k| dims[k]);
    let mut out = vec![0.0; dims.len()];
    let mut prev: Option<Embedding> = None;
    for k in order {
        let d = dims[k];
        let mut best = embedding::embed(
            set,
            d,
            &LossSpec::Ste,
            opt,
            &mut rng::derive(seed, &[FIT, d as u64]),
        )?;
        if let Some(p) = prev.take() {
            let warm = embedding::descend(set, &LossSpec::Ste, opt, p.padded(d - p.dim()))?;
            if warm.loss < best.loss {
                best = warm;
            }
        }
        out[k] = best.loss;
        prev = Some(best.embedding);
    }
    Ok(out)
}

pub fn dimension_points(cfg: &DimensionConfig) -> Result<PointSet> {
    let mut r = rng::derive(cfg.seed, &[POINTS]);
    let feats = gaussian_features(cfg.features.0, cfg.features.1, &mut r);
    pca_project(&feats, cfg.d_true)?.sample(cfg.n, &mut r)
}

pub fn run_dimension_experiment(cfg: &DimensionConfig) -> Result<DimensionResult> {
    let points = dimension_points(cfg)?;
    let set = sample_noisy_from_distances(
        &points.points.distance_matrix(),
        TripletDraw::Fraction(cfg.fraction),
        NoiseModel::new(cfg.sigma)?,
        &mut rng::derive(cfg.seed, &[TRIPLETS]),
    )?;
    let training_loss = training_loss_by_dim(&set, &cfg.dims, &cfg.opt, cfg.seed)?;
    let scan = dimension_scan(
        &set,
        &cfg.dims,
        &cfg.method,
        &cfg.opt,
        &mut rng::derive(cfg.seed, &[SCAN]),
    )?;
    Ok(DimensionResult {
        d_true: cfg.d_true,
        n_triplets: set.len(),
        training_loss,
        scan,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    Uncertainty,
    Random,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActiveLoopConfig {
    pub n: usize,
    pub d: usize,
    pub clusters: usize,
    pub separation: f64,
    pub sigma: f64,
    pub seed_triplets: usize,
    pub batch: usize,
    pub budget: usize,
    /// Ensemble used to score candidate comparisons.
    pub method: EnsembleMethod,
    /// Loss of the embedding evaluated after each round.
    pub loss: LossKind,
    pub knn_k: usize,
    pub spectral: SpectralConfig,
    /// Optimizer for ensemble members.
    pub ensemble_opt: OptimizerConfig,
    /// Optimizer for the evaluated embedding.
    pub opt: OptimizerConfig,
}

impl Default for ActiveLoopConfig {
    fn default() -> Self {
        Self {
            n: 200,
            d: 5,
            clusters: 6,
            separation: 6.0,
            sigma: 0.1,
            seed_triplets: 2000,
            batch: 1000,
            budget: 10_000,
            method: EnsembleMethod::bootstrap(LossKind::Ste),
            loss: LossKind::Ste,
            knn_k: 5,
            spectral: SpectralConfig::default(),
            ensemble_opt: OptimizerConfig {
                restarts: 1,
                ..OptimizerConfig::default()
            },
            opt: OptimizerConfig::default(),
        }
    }
}

impl ActiveLoopConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch == 0 {
            return Err(Error::invalid("batch must be >= 1"));
        }
        if self.seed_triplets == 0 || self.seed_triplets > self.budget {
            return Err(Error::invalid(format!(
                "seed set of {} must be in [1, budget = {}]",
                self.seed_triplets, self.budget
            )));
        }
        Ok(())
    }

    pub fn rounds(&self) -> usize {
        (self.budget - self.seed_triplets).div_ceil(self.batch)
    }
}

/// Labeled stand-in data: well separated Gaussian clusters.
pub fn active_dataset(cfg: &ActiveLoopConfig, seed: u64) -> Result<PointSet> {
    separated_clusters(
        cfg.n,
        cfg.clusters,
        cfg.d,
        cfg.separation,
        &mut rng::derive(seed, &[POINTS]),
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActiveRound {
    pub round: usize,
    pub n_triplets: usize,
    pub triplet_error: f64,
    pub knn_error: f64,
    pub ari: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActiveTrace {
    pub policy: Policy,
    /// Round 0 is the seed set; then one entry per queried batch.
    pub rounds: Vec<ActiveRound>,
}

impl ActiveTrace {
    pub fn final_round(&self) -> &ActiveRound {
        self.rounds.last().expect("round 0 is always recorded")
    }
}

fn evaluate_round(
    cfg: &ActiveLoopConfig,
    data: &PointSet,
    labels: &[usize],
    set: &TripletSet,
    round: usize,
    seed: u64,
) -> Result<ActiveRound> {
    let spec = cfg.loss.spec_for(cfg.d);
    let mut r = rng::derive(seed, &[EVAL, round as u64]);
    let fit = embedding::embed(set, cfg.d, &spec, &cfg.opt, &mut r)?;
    let x = &fit.embedding;
    let truth = data.points.distance_matrix();
    let clusters = eval::spectral_clustering(x, cfg.clusters, &cfg.spectral, &mut r)?;
    Ok(ActiveRound {
        round,
        n_triplets: set.len(),
        triplet_error: eval::triplet_error_against(x, &truth)?,
        knn_error: eval::knn_error(x, labels, cfg.knn_k)?,
        ari: eval::adjusted_rand_index(&clusters, labels)?,
    })
}

/// Runs one policy from the shared seed set until the budget is reached.
/// Both policies draw the seed set, oracle noise and evaluation streams from
/// the same seeds, so their traces differ only through the queries asked.
pub fn run_active_loop(
    cfg: &ActiveLoopConfig,
    data: &PointSet,
    policy: Policy,
    seed: u64,
) -> Result<ActiveTrace> {
    cfg.validate()?;
    let labels = data
        .labels
        .as_deref()
        .ok_or_else(|| Error::invalid("active loop needs labeled data"))?;
    let n = data.n();
    let truth = data.points.distance_matrix();
    let noise = NoiseModel::new(cfg.sigma)?;
    let mut set = sample_noisy_from_distances(
        &truth,
        TripletDraw::Count(cfg.seed_triplets),
        noise,
        &mut rng::derive(seed, &[TRIPLETS]),
    )?;
    let mut rounds = vec![evaluate_round(cfg, data, labels, &set, 0, seed)?];
    for round in 1..=cfg.rounds() {
        let k = cfg.batch.min(cfg.budget - set.len());
        let queries = match policy {
            Policy::Uncertainty => {
                let ens = cfg.method.build(
                    &set,
                    cfg.d,
                    &cfg.ensemble_opt,
                    &mut rng::derive(seed, &[ENSEMBLE, round as u64]),
                )?;
                select_uncertain_batch(&uncertainty::distance_stats(&ens)?, k)?
            }
            Policy::Random => {
                let mut r = rng::derive(seed, &[SELECT, round as u64]);
                (0..k).map(|_| random_comparison(n, &mut r)).collect()
            }
        };
        let answers = answer_comparisons(
            &truth,
            &queries,
            noise,
            &mut rng::derive(seed, &[ORACLE, round as u64]),
        )?;
        set.extend_from(&answers)?;
        rounds.push(evaluate_round(cfg, data, labels, &set, round, seed)?);
    }
    Ok(ActiveTrace { policy, rounds })
}

/// Paired uncertainty and random traces on the same data and seeds.
pub fn run_active_comparison(
    cfg: &ActiveLoopConfig,
    seed: u64,
) -> Result<(ActiveTrace, ActiveTrace)> {
    let data = active_dataset(cfg, seed)?;
    Ok((
        run_active_loop(cfg, &data, Policy::Uncertainty, seed)?,
        run_active_loop(cfg, &data, Policy::Random, seed)?,
    ))
}

pub fn active_table(traces: &[(u64, &ActiveTrace)]) -> Table {
    let mut t = Table::new(&[
        "seed",
        "policy",
        "round",
        "n_triplets",
        "triplet_error",
        "knn_error",
        "ari",
    ]);
    for (seed, trace) in traces {
        let policy = match trace.policy {
            Policy::Uncertainty => "uncertainty",
            Policy::Random => "random",
        };
        for r in &trace.rounds {
            t.push(vec![
                seed.to_string(),
                policy.to_string(),
                r.round.to_string(),
                r.n_triplets.to_string(),
                r.triplet_error.to_string(),
                r.knn_error.to_string(),
                r.ari.to_string(),
            ]);
        }
    }
    t
}
