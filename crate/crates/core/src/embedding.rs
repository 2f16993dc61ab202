//! Triplet likelihoods, their negative log-likelihood losses with analytic
//! gradients, and a full-batch gradient-descent embedder.
//!
//! Every loss is a sum over answers `(i, j, l)` of a function of the two
//! squared distances `a = |x_i - x_j|^2` and `b = |x_i - x_l|^2`:
//!
//! | kind         | per-answer loss                                    |
//! |--------------|----------------------------------------------------|
//! | STE          | `log(1 + exp(a - b))`                              |
//! | t-STE        | `log(1 + (k(b) / k(a)))`, `k(s) = (1 + s/α)^(-(α+1)/2)` |
//! | Crowd Kernel | `-log((b + μ) / (a + b + 2μ))`                     |
//! | GNMDS hinge  | `max(0, 1 + a - b)`, plus `λ |X|_F^2` once          |
//!
//! so the gradient only needs `∂/∂a` and `∂/∂b` per answer.

use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Embedding;
use crate::rng::{self, Rng};
use crate::triplets::{Triplet, TripletSet};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LossSpec {
    Ste,
    Tste { alpha: f64 },
    CrowdKernel { mu: f64 },
    GnmdsHinge { lambda: f64 },
}

impl LossSpec {
    pub const DEFAULT_CK_MU: f64 = 0.05;

    /// t-STE with `α = d - 1` degrees of freedom (at least 1).
    pub fn tste_for_dim(d: usize) -> Self {
        LossSpec::Tste {
            alpha: (d.saturating_sub(1)).max(1) as f64,
        }
    }

    pub fn crowd_kernel() -> Self {
        LossSpec::CrowdKernel {
            mu: Self::DEFAULT_CK_MU,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            LossSpec::Ste => Ok(()),
            LossSpec::Tste { alpha } if alpha > 0.0 && alpha.is_finite() => Ok(()),
            LossSpec::CrowdKernel { mu } if mu >= 0.0 && mu.is_finite() => Ok(()),
            LossSpec::GnmdsHinge { lambda } if lambda >= 0.0 && lambda.is_finite() => Ok(()),
            other => Err(Error::invalid(format!("invalid loss parameters {other:?}"))),
        }
    }

    pub fn is_probabilistic(&self) -> bool {
        !matches!(self, LossSpec::GnmdsHinge { .. })
    }

    pub fn name(&self) -> &'static str {
        match self {
            LossSpec::Ste => "ste",
            LossSpec::Tste { .. } => "tste",
            LossSpec::CrowdKernel { .. } => "ck",
            LossSpec::GnmdsHinge { .. } => "gnmds",
        }
    }
}

/// A loss choice whose parameters may depend on the embedding dimension.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LossKind {
    Ste,
    /// `alpha: None` means `α = max(d - 1, 1)`.
    Tste {
        alpha: Option<f64>,
    },
    CrowdKernel {
        mu: f64,
    },
    GnmdsHinge {
        lambda: f64,
    },
}

impl LossKind {
    pub fn spec_for(&self, d: usize) -> LossSpec {
        match *self {
            LossKind::Ste => LossSpec::Ste,
            LossKind::Tste { alpha: Some(alpha) } => LossSpec::Tste { alpha },
            LossKind::Tste { alpha: None } => LossSpec::tste_for_dim(d),
            LossKind::CrowdKernel { mu } => LossSpec::CrowdKernel { mu },
            LossKind::GnmdsHinge { lambda } => LossSpec::GnmdsHinge { lambda },
        }
    }

    pub fn name(&self) -> &'static str {
        self.spec_for(2).name()
    }
}

impl std::str::FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ste" => Ok(LossKind::Ste),
            "tste" | "t-ste" => Ok(LossKind::Tste { alpha: None }),
            "ck" | "crowd_kernel" | "crowd-kernel" => Ok(LossKind::CrowdKernel {
                mu: LossSpec::DEFAULT_CK_MU,
            }),
            "gnmds" | "hinge" => Ok(LossKind::GnmdsHinge { lambda: 0.0 }),
            other => Err(Error::invalid(format!("unknown loss '{other}'"))),
        }
    }
}

/// `log(1 + exp(z))` without overflow.
#[inline]
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Per-answer loss and its partial derivatives with respect to the squared
/// distances `a` (to the closer candidate) and `b` (to the farther one).
trait TermLoss: Sync {
    fn value(&self, a: f64, b: f64) -> f64;
    fn value_and_partials(&self, a: f64, b: f64) -> (f64, f64, f64);
}

struct Ste;
struct Tste {
    alpha: f64,
    half: f64,
}
struct CrowdKernel {
    mu: f64,
}
struct Hinge;

impl TermLoss for Ste {
    #[inline]
    fn value(&self, a: f64, b: f64) -> f64 {
        softplus(a - b)
    }
    #[inline]
    fn value_and_partials(&self, a: f64, b: f64) -> (f64, f64, f64) {
        let s = sigmoid(a - b);
        (softplus(a - b), s, -s)
    }
}

impl Tste {
    fn new(alpha: f64) -> Self {
        Self {
            alpha,
            half: 0.5 * (alpha + 1.0),
        }
    }
    /// log of the unnormalized Student-t kernel.
    #[inline]
    fn log_kernel(&self, s: f64) -> f64 {
        -self.half * (s / self.alpha).ln_1p()
    }
}

impl TermLoss for Tste {
    #[inline]
    fn value(&self, a: f64, b: f64) -> f64 {
        softplus(self.log_kernel(b) - self.log_kernel(a))
    }
    #[inline]
    fn value_and_partials(&self, a: f64, b: f64) -> (f64, f64, f64) {
        let z = self.log_kernel(b) - self.log_kernel(a);
        let s = sigmoid(z);
        (
            softplus(z),
            s * self.half / (self.alpha + a),
            -s * self.half / (self.alpha + b),
        )
    }
}

impl TermLoss for CrowdKernel {
    #[inline]
    fn value(&self, a: f64, b: f64) -> f64 {
        (a + b + 2.0 * self.mu).ln() - (b + self.mu).ln()
    }
    #[inline]
    fn value_and_partials(&self, a: f64, b: f64) -> (f64, f64, f64) {
        let total = a + b + 2.0 * self.mu;
        let inv = 1.0 / total;
        (
            total.ln() - (b + self.mu).ln(),
            inv,
            inv - 1.0 / (b + self.mu),
        )
    }
}

impl TermLoss for Hinge {
    #[inline]
    fn value(&self, a: f64, b: f64) -> f64 {
        (1.0 + a - b).max(0.0)
    }
    #[inline]
    fn value_and_partials(&self, a: f64, b: f64) -> (f64, f64, f64) {
        let h = 1.0 + a - b;
        if h > 0.0 {
            (h, 1.0, -1.0)
        } else {
            (0.0, 0.0, 0.0)
        }
    }
}

fn check_fits(x: &Embedding, set: &TripletSet) -> Result<()> {
    if set.n() != x.n() {
        return Err(Error::Shape(format!(
            "triplets over {} points, embedding has {}",
            set.n(),
            x.n()
        )));
    }
    Ok(())
}

fn sum_loss<L: TermLoss>(term: &L, x: &Embedding, answers: &[Triplet]) -> f64 {
    answers
        .iter()
        .map(|t| term.value(x.sq_dist(t.anchor, t.near), x.sq_dist(t.anchor, t.far)))
        .sum()
}

fn sum_loss_grad<L: TermLoss>(
    term: &L,
    x: &Embedding,
    answers: &[Triplet],
    grad: &mut Embedding,
) -> f64 {
    let d = x.dim();
    let xs = x.as_slice();
    let g = grad.as_mut_slice();
    let mut total = 0.0;
    for t in answers {
        let (i, j, l) = (t.anchor * d, t.near * d, t.far * d);
        let a = crate::geometry::sq_dist(&xs[i..i + d], &xs[j..j + d]);
        let b = crate::geometry::sq_dist(&xs[i..i + d], &xs[l..l + d]);
        let (v, da, db) = term.value_and_partials(a, b);
        total += v;
        let (ca, cb) = (2.0 * da, 2.0 * db);
        for k in 0..d {
            let dij = xs[i + k] - xs[j + k];
            let dil = xs[i + k] - xs[l + k];
            g[i + k] += ca * dij + cb * dil;
            g[j + k] -= ca * dij;
            g[l + k] -= cb * dil;
        }
    }
    total
}

// Keeps monomorphized inner loops while matching on the loss kind once per call.
macro_rules! with_term {
    ($spec:expr, $term:ident => $body:expr) => {
        match *$spec {
            LossSpec::Ste => {
                let $term = Ste;
                $body
            }
            LossSpec::Tste { alpha } => {
                let $term = Tste::new(alpha);
                $body
            }
            LossSpec::CrowdKernel { mu } => {
                let $term = CrowdKernel { mu };
                $body
            }
            LossSpec::GnmdsHinge { .. } => {
                let $term = Hinge;
                $body
            }
        }
    };
}

fn regularization(spec: &LossSpec) -> f64 {
    match *spec {
        LossSpec::GnmdsHinge { lambda } => lambda,
        _ => 0.0,
    }
}

/// Total loss over `set`.
pub fn loss(spec: &LossSpec, x: &Embedding, set: &TripletSet) -> Result<f64> {
    check_fits(x, set)?;
    let lambda = regularization(spec);
    let mut v = with_term!(spec, term => sum_loss(&term, x, set.answers()));
    if lambda > 0.0 {
        v += lambda * x.frobenius_sq();
    }
    if !v.is_finite() {
        return Err(Error::Numerical(format!("{} loss is {v}", spec.name())));
    }
    Ok(v)
}

/// Total loss over `set` and its exact gradient with respect to the
/// coordinates.
pub fn loss_and_gradient(
    spec: &LossSpec,
    x: &Embedding,
    set: &TripletSet,
) -> Result<(f64, Embedding)> {
    check_fits(x, set)?;
    let mut grad = Embedding::zeros(x.n(), x.dim());
    let mut v = with_term!(spec, term => sum_loss_grad(&term, x, set.answers(), &mut grad));
    let lambda = regularization(spec);
    if lambda > 0.0 {
        v += lambda * x.frobenius_sq();
        for (g, xv) in grad.as_mut_slice().iter_mut().zip(x.as_slice()) {
            *g += 2.0 * lambda * xv;
        }
    }
    if !v.is_finite() || !grad.is_finite() {
        return Err(Error::Numerical(format!(
            "{} loss or gradient is not finite",
            spec.name()
        )));
    }
    Ok((v, grad))
}

/// Model probability that answer `t` is observed under `x`.
pub fn triplet_probability(spec: &LossSpec, x: &Embedding, t: Triplet) -> Result<f64> {
    t.check(x.n())?;
    let a = x.sq_dist(t.anchor, t.near);
    let b = x.sq_dist(t.anchor, t.far);
    let p = match *spec {
        LossSpec::Ste => sigmoid(b - a),
        LossSpec::Tste { alpha } => {
            let k = Tste::new(alpha);
            sigmoid(k.log_kernel(a) - k.log_kernel(b))
        }
        LossSpec::CrowdKernel { mu } => {
            let den = a + b + 2.0 * mu;
            if den == 0.0 {
                return Err(Error::Numerical(
                    "Crowd Kernel probability undefined for coincident points with mu = 0".into(),
                ));
            }
            (b + mu) / den
        }
        LossSpec::GnmdsHinge { .. } => {
            return Err(Error::Unsupported(
                "the GNMDS hinge loss has no probabilistic model",
            ))
        }
    };
    if !p.is_finite() {
        return Err(Error::Numerical(format!("probability is {p}")));
    }
    Ok(p)
}

/// Log-likelihood `sum log p` of `set` under a probabilistic loss.
pub fn log_likelihood(spec: &LossSpec, x: &Embedding, set: &TripletSet) -> Result<f64> {
    if !spec.is_probabilistic() {
        return Err(Error::Unsupported("the GNMDS hinge loss has no likelihood"));
    }
    Ok(-loss(spec, x, set)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub max_iters: usize,
    /// Initial trial step of the line search.
    pub step_size: f64,
    /// Step multiplier applied on each failed Armijo test.
    pub backtrack: f64,
    /// Stop when the relative loss change falls below this.
    pub tolerance: f64,
    pub restarts: usize,
    /// Standard deviation of the random initialization.
    pub init_scale: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            max_iters: 2000,
            step_size: 1.0,
            backtrack: 0.5,
            tolerance: 1e-7,
            restarts: 3,
            init_scale: 0.1,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.max_iters > 0
            && self.step_size > 0.0
            && self.backtrack > 0.0
            && self.backtrack < 1.0
            && self.tolerance > 0.0
            && self.tolerance < 1.0
            && self.restarts > 0
            && self.init_scale > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("invalid optimizer config {self:?}")))
        }
    }
}

const ARMIJO_C: f64 = 1e-4;
const STEP_GROWTH: f64 = 1.25;
const MIN_STEP: f64 = 1e-30;
const MAX_STEP: f64 = 1e6;

/// Outcome of a descent, kept as reproducibility metadata.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbedResult {
    pub embedding: Embedding,
    pub loss: f64,
    pub iterations: usize,
    pub grad_norm: f64,
    pub converged: bool,
    /// Which restart produced the result.
    pub restart: usize,
    pub seed: u64,
}

/// Gradient descent with Armijo backtracking from `init`.
pub fn descend(
    set: &TripletSet,
    spec: &LossSpec,
    cfg: &OptimizerConfig,
    init: Embedding,
) -> Result<EmbedResult> {
    spec.validate()?;
    cfg.validate()?;
    check_fits(&init, set)?;
    let mut x = init;
    let (mut f, mut g) = loss_and_gradient(spec, &x, set)?;
    let mut step = cfg.step_size;
    let mut iterations = 0;
    let mut converged = false;
    let mut trial = x.clone();
    while iterations < cfg.max_iters {
        let gsq = g.frobenius_sq();
        if gsq.sqrt() <= 1e-3 * f.max(1.0) {
            converged = true;
            break;
        }
        let f_new = loop {
            for ((t, xv), gv) in trial
                .as_mut_slice()
                .iter_mut()
                .zip(x.as_slice())
                .zip(g.as_slice())
            {
                *t = xv - step * gv;
            }
            let ft = loss(spec, &trial, set).unwrap_or(f64::INFINITY);
            if ft <= f - ARMIJO_C * step * gsq {
                break Some(ft);
            }
            step *= cfg.backtrack;
            if step < MIN_STEP {
                break None;
            }
        };
        iterations += 1;
        let Some(f_new) = f_new else {
            // no descent possible along the gradient at machine precision
            converged = true;
            break;
        };
        std::mem::swap(&mut x, &mut trial);
        let rel = (f - f_new).abs() / f.abs().max(f64::MIN_POSITIVE);
        let (fn_, gn) = loss_and_gradient(spec, &x, set)?;
        // Barzilai-Borwein trial step from s = x_new - x_old, y = g_new - g_old
        let (mut ss, mut sy) = (0.0, 0.0);
        for (((xn, xo), gn), go) in x
            .as_slice()
            .iter()
            .zip(trial.as_slice())
            .zip(gn.as_slice())
            .zip(g.as_slice())
        {
            let (sv, yv) = (xn - xo, gn - go);
            ss += sv * sv;
            sy += sv * yv;
        }
        f = fn_;
        g = gn;
        debug_assert!((f - f_new).abs() <= 1e-9 * f.abs().max(1.0));
        if rel < cfg.tolerance {
            converged = true;
            break;
        }
        step = if sy > 0.0 && (ss / sy).is_finite() {
            (ss / sy).min(MAX_STEP)
        } else {
            step * STEP_GROWTH
        };
    }
    Ok(EmbedResult {
        grad_norm: g.frobenius_norm(),
        embedding: x,
        loss: f,
        iterations,
        converged,
        restart: 0,
        seed: 0,
    })
}

/// `N(0, scale^2)` random coordinates.
pub fn random_init(n: usize, d: usize, scale: f64, rng: &mut Rng) -> Embedding {
    let coords = (0..n * d)
        .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
        .collect();
    Embedding::from_vec(n, d, coords).expect("finite init")
}

/// Best of `cfg.restarts` descents from independent random initializations.
/// Ties in the final loss go to the earliest restart.
pub fn embed(
    set: &TripletSet,
    d: usize,
    spec: &LossSpec,
    cfg: &OptimizerConfig,
    rng: &mut Rng,
) -> Result<EmbedResult> {
    if set.is_empty() {
        return Err(Error::EmptyTriplets);
    }
    if d == 0 {
        return Err(Error::invalid("embedding dimension must be >= 1"));
    }
    cfg.validate()?;
    let seeds: Vec<u64> = (0..cfg.restarts).map(|_| rng.random()).collect();
    let runs: Vec<Result<EmbedResult>> = seeds
        .par_iter()
        .enumerate()
        .map(|(k, &seed)| {
            let mut r = rng::from_seed(seed);
            let init = random_init(set.n(), d, cfg.init_scale, &mut r);
            descend(set, spec, cfg, init).map(|mut res| {
                res.restart = k;
                res.seed = seed;
                res
            })
        })
        .collect();
    let mut best: Option<EmbedResult> = None;
    for run in runs {
        let run = run?;
        if best.as_ref().is_none_or(|b| run.loss < b.loss) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}
