//! Simulated perception study.
//!
//! Each observer perceives a stimulus `s ∈ [0, 1]` as `f(s)`, where `f` is a
//! draw from a Gaussian process with logistic mean and squared-exponential
//! kernel, conditioned to pass through `(0, 0)` and `(1, 1)`. Observers
//! answer triplets noiselessly from their own `f`; the pooled answers are
//! embedded in one dimension and the spread of a bootstrap ensemble shows
//! how much the observers disagree.

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::embedding::{LossSpec, OptimizerConfig};
use crate::ensemble::bootstrap_replicas;
use crate::error::{Error, Result};
use crate::rng::{self, Rng};
use crate::stats;
use crate::triplets::{random_comparison, Orientation, TripletSet};

const JITTER_START: f64 = 1e-10;
const JITTER_MAX: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GpSpec {
    pub lengthscale: f64,
}

impl GpSpec {
    pub fn new(lengthscale: f64) -> Result<Self> {
        if !(lengthscale > 0.0 && lengthscale.is_finite()) {
            return Err(Error::invalid(format!(
                "lengthscale must be > 0, got {lengthscale}"
            )));
        }
        Ok(Self { lengthscale })
    }

    /// Logistic prior mean, steepness 25, centered at ½.
    pub fn mean(&self, x: f64) -> f64 {
        1.0 / (1.0 + (-25.0 * (x - 0.5)).exp())
    }

    pub fn kernel(&self, x: f64, y: f64) -> f64 {
        let l = self.lengthscale;
        (-(x - y).powi(2) / (2.0 * l * l)).exp()
    }
}

const COND_X: [f64; 2] = [0.0, 1.0];
const COND_Y: [f64; 2] = [0.0, 1.0];

/// `n` equally spaced stimuli from 0 to 1 inclusive.
pub fn stimulus_grid(n: usize) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::invalid(format!("need at least 2 stimuli, got {n}")));
    }
    let step = 1.0 / (n - 1) as f64;
    let mut g: Vec<f64> = (0..n).map(|i| i as f64 * step).collect();
    g[n - 1] = 1.0;
    Ok(g)
}

fn cond_gram(spec: &GpSpec) -> Result<DMatrix<f64>> {
    let k = DMatrix::from_fn(2, 2, |a, b| spec.kernel(COND_X[a], COND_X[b]));
    k.try_inverse()
        .ok_or_else(|| Error::Numerical("conditioning kernel matrix is singular".into()))
}

/// Posterior mean after conditioning on the two endpoints.
pub fn posterior_mean(spec: &GpSpec, grid: &[f64]) -> Result<Vec<f64>> {
    let kinv = cond_gram(spec)?;
    let resid = DVector::from_fn(2, |a, _| COND_Y[a] - spec.mean(COND_X[a]));
    let w = kinv * resid;
    Ok(grid
        .iter()
        .map(|&g| {
            spec.mean(g) + spec.kernel(g, COND_X[0]) * w[0] + spec.kernel(g, COND_X[1]) * w[1]
        })
        .collect())
}

/// `k(g, g') − k(g, x) K(x, x)⁻¹ k(x, g')` on the grid.
pub fn posterior_cov(spec: &GpSpec, grid: &[f64]) -> Result<DMatrix<f64>> {
    let kinv = cond_gram(spec)?;
    let n = grid.len();
    let kgx = DMatrix::from_fn(n, 2, |i, a| spec.kernel(grid[i], COND_X[a]));
    let kgg = DMatrix::from_fn(n, n, |i, j| spec.kernel(grid[i], grid[j]));
    let post = kgg - &kgx * kinv * kgx.transpose();
    Ok((&post + post.transpose()) * 0.5)
}

/// Perceived values on the stimulus grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerceptionFunction {
    pub values: Vec<f64>,
}

/// Independent draws from the conditioned process. Grid points at exactly
/// 0 or 1 take their conditioned value; the rest are sampled jointly with
/// jitter raised tenfold from 1e-10 up to 1e-6 until the covariance
/// factors.
pub fn sample_perception_functions(
    spec: &GpSpec,
    grid: &[f64],
    n_observers: usize,
    rng: &mut Rng,
) -> Result<Vec<PerceptionFunction>> {
    if grid.len() < 2 {
        return Err(Error::invalid("grid needs at least 2 stimuli"));
    }
    if n_observers == 0 {
        return Err(Error::invalid("need at least one observer"));
    }
    let pinned = |g: f64| COND_X.iter().position(|&x| x == g);
    let free: Vec<usize> = (0..grid.len())
        .filter(|&i| pinned(grid[i]).is_none())
        .collect();
    let free_grid: Vec<f64> = free.iter().map(|&i| grid[i]).collect();
    let mean = posterior_mean(spec, &free_grid)?;
    let cov = posterior_cov(spec, &free_grid)?;
    let m = free.len();
    let mut jitter = JITTER_START;
    let chol = loop {
        let jittered = &cov + DMatrix::<f64>::identity(m, m) * jitter;
        if let Some(c) = jittered.cholesky() {
            break c;
        }
        jitter *= 10.0;
        if jitter > JITTER_MAX * (1.0 + 1e-9) {
            return Err(Error::Cholesky(format!(
                "posterior covariance not positive definite with jitter up to {JITTER_MAX:e}"
            )));
        }
    };
    let l = chol.l();
    let mut out = Vec::with_capacity(n_observers);
    for _ in 0..n_observers {
        let z = DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal));
        let draw = &l * z;
        let mut values = vec![0.0; grid.len()];
        for (i, &g) in grid.iter().enumerate() {
            if let Some(k) = pinned(g) {
                values[i] = COND_Y[k];
            }
        }
        for (k, &i) in free.iter().enumerate() {
            values[i] = mean[k] + draw[k];
        }
        out.push(PerceptionFunction { values });
    }
    Ok(out)
}

/// `count` uniformly drawn comparisons over stimulus indices, answered from
/// `f`. Exact ties in perceived distance are redrawn.
pub fn observer_triplets(
    f: &PerceptionFunction,
    count: usize,
    rng: &mut Rng,
) -> Result<TripletSet> {
    let n = f.values.len();
    if n < 3 {
        return Err(Error::invalid(format!("need at least 3 stimuli, got {n}")));
    }
    if count == 0 {
        return Err(Error::invalid("count must be >= 1"));
    }
    let max_draws = count.saturating_mul(1000);
    let mut set = TripletSet::new(n);
    let mut draws = 0;
    while set.len() < count {
        if draws == max_draws {
            return Err(Error::Degenerate(
                "perceived distances are tied for almost every comparison".into(),
            ));
        }
        draws += 1;
        let c = random_comparison(n, rng);
        let v = &f.values;
        let dj = (v[c.anchor] - v[c.first]).abs();
        let dl = (v[c.anchor] - v[c.second]).abs();
        let o = if dj < dl {
            Orientation::FirstCloser
        } else if dl < dj {
            Orientation::SecondCloser
        } else {
            continue;
        };
        set.push(c.oriented(o))?;
    }
    Ok(set)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsychoConfig {
    pub gp: GpSpec,
    pub n_stimuli: usize,
    pub n_observers: usize,
    pub triplets_per_observer: usize,
    pub b: usize,
    pub r: f64,
    pub loss: LossSpec,
    /// All observers share one perception function.
    pub shared_function: bool,
}

impl PsychoConfig {
    pub fn new(lengthscale: f64) -> Result<Self> {
        Ok(Self {
            gp: GpSpec::new(lengthscale)?,
            n_stimuli: 20,
            n_observers: 50,
            triplets_per_observer: 100,
            b: 50,
            r: 0.1,
            loss: LossSpec::Ste,
            shared_function: false,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsychoResult {
    pub lengthscale: f64,
    pub stimuli: Vec<f64>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub n_triplets: usize,
}

impl PsychoResult {
    /// Mean standard deviation over stimuli other than the two endpoints.
    pub fn interior_std(&self) -> f64 {
        let n = self.std.len();
        if n <= 2 {
            return 0.0;
        }
        stats::mean(&self.std[1..n - 1])
    }
}

/// Affine map sending `values[0]` to 0 and `values[last]` to 1.
pub fn normalize_endpoints(values: &mut [f64]) -> Result<()> {
    let (v0, v1) = match (values.first(), values.last()) {
        (Some(&a), Some(&b)) => (a, b),
        _ => return Err(Error::invalid("nothing to normalize")),
    };
    let span = v1 - v0;
    if span == 0.0 {
        return Err(Error::Degenerate(
            "endpoint stimuli embedded at the same location".into(),
        ));
    }
    values.iter_mut().for_each(|v| *v = (*v - v0) / span);
    // Exact endpoints; also avoids a negative zero when `span < 0`.
    let last = values.len() - 1;
    values[0] = 0.0;
    values[last] = 1.0;
    Ok(())
}

pub fn run_psycho_experiment(
    cfg: &PsychoConfig,
    opt: &OptimizerConfig,
    rng: &mut Rng,
) -> Result<PsychoResult> {
    if cfg.n_observers == 0 || cfg.triplets_per_observer == 0 {
        return Err(Error::invalid(
            "observer and triplet counts must be positive",
        ));
    }
    let grid = stimulus_grid(cfg.n_stimuli)?;
    let fn_seed: u64 = rng.random();
    let n_fns = if cfg.shared_function {
        1
    } else {
        cfg.n_observers
    };
    let functions =
        sample_perception_functions(&cfg.gp, &grid, n_fns, &mut rng::from_seed(fn_seed))?;
    let mut pooled = TripletSet::new(cfg.n_stimuli);
    for k in 0..cfg.n_observers {
        let seed: u64 = rng.random();
        let f = &functions[k % n_fns];
        pooled.extend_from(&observer_triplets(
            f,
            cfg.triplets_per_observer,
            &mut rng::from_seed(seed),
        )?)?;
    }
    let (fits, _) = bootstrap_replicas(&pooled, 1, &cfg.loss, cfg.b, cfg.r, opt, rng)?;
    let mut members = Vec::with_capacity(fits.len());
    for (k, fit) in fits.into_iter().enumerate() {
        let mut v = fit.embedding.into_vec();
        normalize_endpoints(&mut v).map_err(|e| Error::Replica {
            index: k,
            source: Box::new(e),
        })?;
        members.push(v);
    }
    let mut mean = Vec::with_capacity(cfg.n_stimuli);
    let mut std = Vec::with_capacity(cfg.n_stimuli);
    for s in 0..cfg.n_stimuli {
        let col: Vec<f64> = members.iter().map(|m| m[s]).collect();
        mean.push(stats::mean(&col));
        std.push(stats::sample_std(&col));
    }
    Ok(PsychoResult {
        lengthscale: cfg.gp.lengthscale,
        stimuli: grid,
        mean,
        std,
        n_triplets: pooled.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_examples() {
        assert_eq!(stimulus_grid(2).unwrap(), vec![0.0, 1.0]);
        let g = stimulus_grid(20).unwrap();
        assert_eq!((g[0], g[19]), (0.0, 1.0));
        assert!((g[1] - 1.0 / 19.0).abs() < 1e-15);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        assert!(stimulus_grid(1).is_err());
    }

    #[test]
    fn mean_function_is_symmetric_logistic() {
        let gp = GpSpec::new(1.0).unwrap();
        assert_eq!(gp.mean(0.5), 0.5);
        assert!((gp.mean(0.3) + gp.mean(0.7) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn posterior_vanishes_at_conditioning_points() {
        let gp = GpSpec::new(0.54).unwrap();
        let g = stimulus_grid(20).unwrap();
        let cov = posterior_cov(&gp, &g).unwrap();
        assert!(cov[(0, 0)].max(0.0).sqrt() <= 1e-3);
        assert!(cov[(19, 19)].max(0.0).sqrt() <= 1e-3);
        let mean = posterior_mean(&gp, &g).unwrap();
        assert!(mean[0].abs() < 1e-12 && (mean[19] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn posterior_cov_is_symmetric_psd() {
        for l in [2.0, 0.88, 0.54, 0.1] {
            let gp = GpSpec::new(l).unwrap();
            let cov = posterior_cov(&gp, &stimulus_grid(20).unwrap()).unwrap();
            assert_eq!(cov, cov.transpose());
            let eig = (&cov + DMatrix::<f64>::identity(20, 20) * 1e-10).symmetric_eigenvalues();
            assert!(eig.iter().all(|&e| e > -1e-12), "l = {l}: {eig:?}");
        }
    }

    #[test]
    fn endpoints_are_pinned() {
        let gp = GpSpec::new(0.54).unwrap();
        let g = stimulus_grid(20).unwrap();
        for f in sample_perception_functions(&gp, &g, 30, &mut rng::from_seed(1)).unwrap() {
            assert!(f.values.iter().all(|v| v.is_finite()));
            assert!(f.values[0].abs() <= 1e-6);
            assert!((f.values[19] - 1.0).abs() <= 1e-6);
        }
    }

    #[test]
    fn long_lengthscale_hugs_the_mean() {
        let gp = GpSpec::new(100.0).unwrap();
        let g = stimulus_grid(20).unwrap();
        let eig = posterior_cov(&gp, &g).unwrap().symmetric_eigenvalues();
        assert!(eig.iter().all(|&e| e.abs() < 1e-6));
        for f in sample_perception_functions(&gp, &g, 50, &mut rng::from_seed(2)).unwrap() {
            for (v, &x) in f.values.iter().zip(&g) {
                assert!((v - gp.mean(x)).abs() < 0.01);
            }
        }
    }

    #[test]
    fn midpoint_mean_matches_monte_carlo() {
        let gp = GpSpec::new(0.54).unwrap();
        let g = stimulus_grid(21).unwrap();
        let fs = sample_perception_functions(&gp, &g, 10_000, &mut rng::from_seed(3)).unwrap();
        let mid: Vec<f64> = fs.iter().map(|f| f.values[10]).collect();
        let se = stats::sample_std(&mid) / (mid.len() as f64).sqrt();
        assert!((stats::mean(&mid) - 0.5).abs() < 3.0 * se);
    }

    #[test]
    fn identity_observer_answers_by_stimulus_distance() {
        let g = stimulus_grid(9).unwrap();
        let f = PerceptionFunction { values: g.clone() };
        let set = observer_triplets(&f, 100, &mut rng::from_seed(4)).unwrap();
        assert_eq!(set.len(), 100);
        for t in &set {
            assert!((g[t.anchor] - g[t.near]).abs() < (g[t.anchor] - g[t.far]).abs());
        }
    }

    #[test]
    fn answers_depend_only_on_perceived_values() {
        let f = PerceptionFunction {
            values: vec![0.0, 0.05, 0.5, 0.9, 1.0],
        };
        let set_a = observer_triplets(&f, 50, &mut rng::from_seed(5)).unwrap();
        // same perceived values, different physical grid is irrelevant
        let set_b = observer_triplets(&f.clone(), 50, &mut rng::from_seed(5)).unwrap();
        assert_eq!(set_a, set_b);
        let constant = PerceptionFunction {
            values: vec![0.3; 5],
        };
        assert!(matches!(
            observer_triplets(&constant, 2, &mut rng::from_seed(6)),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn normalization_is_idempotent() {
        let mut v = vec![3.0, 2.0, -1.0, 5.0];
        normalize_endpoints(&mut v).unwrap();
        assert_eq!((v[0], v[3]), (0.0, 1.0));
        let once = v.clone();
        normalize_endpoints(&mut v).unwrap();
        assert_eq!(v, once);
        assert!(normalize_endpoints(&mut [1.0, 2.0, 1.0]).is_err());
    }

    fn small(l: f64, shared: bool) -> PsychoConfig {
        PsychoConfig {
            n_stimuli: 8,
            n_observers: 10,
            triplets_per_observer: 60,
            b: 8,
            r: 0.3,
            shared_function: shared,
            ..PsychoConfig::new(l).unwrap()
        }
    }

    #[test]
    fn experiment_endpoints_are_exact() {
        let opt = OptimizerConfig {
            restarts: 1,
            ..OptimizerConfig::default()
        };
        let res = run_psycho_experiment(&small(0.54, false), &opt, &mut rng::from_seed(7)).unwrap();
        assert_eq!(res.n_triplets, 600);
        assert_eq!((res.mean[0], res.mean[7]), (0.0, 1.0));
        assert_eq!((res.std[0], res.std[7]), (0.0, 0.0));
        assert!(res.mean[0].is_sign_positive() && res.std[0].is_sign_positive());
    }
}
