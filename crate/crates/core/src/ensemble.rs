//! Sets of comparable embeddings.
//!
//! Two sources are supported:
//!
//! * **Bootstrap**: `b` embeddings, each fit on an independent
//!   without-replacement subsample of `floor(r |S|)` answers, then rotated and
//!   scaled onto a randomly chosen reference member by Procrustes analysis.
//! * **Bayesian**: a chain of elliptical slice sampling steps under the
//!   posterior `N(0, scale I) * likelihood(S | X)`, started at a maximum
//!   likelihood embedding. Members share the prior's frame, so no alignment
//!   is applied unless requested.

use std::f64::consts::PI;

use nalgebra::SVD;
use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embedding::{self, EmbedResult, LossKind, LossSpec, OptimizerConfig};
use crate::error::{Error, Result};
use crate::geometry::Embedding;
use crate::rng::{self, Rng};
use crate::triplets::TripletSet;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum EnsembleSource {
    Bootstrap { r: f64 },
    Bayesian { prior_scale: f64 },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnsembleInfo {
    /// Index of the bootstrap reference member.
    pub reference: Option<usize>,
    /// Procrustes scale factor applied to each member (1 when unaligned).
    pub scales: Vec<f64>,
    /// Per-replica seeds (bootstrap) or the chain seed (Bayesian).
    pub seeds: Vec<u64>,
    /// Training loss of each bootstrap replica, or of the chain's initializer.
    pub losses: Vec<f64>,
    pub converged: Vec<bool>,
    /// Total slice shrinkage steps over the chain.
    pub shrinks: usize,
    pub centered: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingEnsemble {
    members: Vec<Embedding>,
    pub source: EnsembleSource,
    pub aligned: bool,
    pub info: EnsembleInfo,
}

impl EmbeddingEnsemble {
    pub fn new(members: Vec<Embedding>, source: EnsembleSource, aligned: bool) -> Result<Self> {
        let first = members
            .first()
            .ok_or_else(|| Error::invalid("an ensemble needs at least one member"))?;
        let (n, d) = (first.n(), first.dim());
        if let Some(k) = members.iter().position(|m| m.n() != n || m.dim() != d) {
            return Err(Error::Shape(format!(
                "member {k} does not have shape {n}x{d}"
            )));
        }
        let scales = vec![1.0; members.len()];
        Ok(Self {
            members,
            source,
            aligned,
            info: EnsembleInfo {
                scales,
                ..EnsembleInfo::default()
            },
        })
    }

    pub fn members(&self) -> &[Embedding] {
        &self.members
    }

    pub fn members_mut(&mut self) -> &mut [Embedding] {
        &mut self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn n(&self) -> usize {
        self.members[0].n()
    }

    pub fn dim(&self) -> usize {
        self.members[0].dim()
    }
}

/// Isotropic Gaussian prior `N(0, scale * I)` over the stacked coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    /// Per-coordinate variance.
    pub scale: f64,
}

impl PriorSpec {
    pub const DEFAULT_SCALE: f64 = 15.0;

    pub fn new(scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::invalid(format!(
                "prior scale must be > 0, got {scale}"
            )));
        }
        Ok(Self { scale })
    }
}

impl Default for PriorSpec {
    fn default() -> Self {
        Self {
            scale: Self::DEFAULT_SCALE,
        }
    }
}

/// Result of a similarity Procrustes fit `s * X * R + t`.
#[derive(Clone, Debug, PartialEq)]
pub struct Alignment {
    pub embedding: Embedding,
    pub scale: f64,
    /// `d x d` orthogonal map applied to the centered input (row-major).
    pub rotation: Vec<f64>,
}

/// Rotates (or reflects) and scales `x` to best match `reference` in
/// Frobenius norm. Both are centered first; the result is placed at the
/// reference centroid.
pub fn procrustes_align(x: &Embedding, reference: &Embedding) -> Result<Alignment> {
    if x.n() != reference.n() || x.dim() != reference.dim() {
        return Err(Error::Shape(format!(
            "cannot align {}x{} onto {}x{}",
            x.n(),
            x.dim(),
            reference.n(),
            reference.dim()
        )));
    }
    let a = x.centered().to_matrix();
    let target_center = reference.centroid();
    let b = reference.centered().to_matrix();
    let norm_a = a.norm_squared();
    if norm_a == 0.0 {
        return Err(Error::Degenerate(
            "embedding to align has zero spread".into(),
        ));
    }
    if b.norm_squared() == 0.0 {
        return Err(Error::Degenerate(
            "reference embedding has zero spread".into(),
        ));
    }
    let m = a.transpose() * &b;
    let svd = SVD::new(m, true, true);
    let (u, vt) = match (svd.u, svd.v_t) {
        (Some(u), Some(vt)) => (u, vt),
        _ => {
            return Err(Error::Numerical(
                "SVD failed in Procrustes alignment".into(),
            ))
        }
    };
    let rot = u * vt;
    let scale = svd.singular_values.sum() / norm_a;
    let mut out = Embedding::from_matrix(&(a * &rot * scale));
    out.translate(&target_center);
    let d = rot.nrows();
    let rotation = (0..d * d).map(|k| rot[(k / d, k % d)]).collect();
    Ok(Alignment {
        embedding: out,
        scale,
        rotation,
    })
}

/// The `b` unaligned bootstrap replicas, each fit on `floor(r |S|)` answers
/// drawn without replacement.
pub fn bootstrap_replicas(
    set: &TripletSet,
    d: usize,
    spec: &LossSpec,
    b: usize,
    r: f64,
    cfg: &OptimizerConfig,
    rng: &mut Rng,
) -> Result<(Vec<EmbedResult>, Vec<u64>)> {
    if b < 2 {
        return Err(Error::invalid(format!("bootstrap needs b >= 2, got {b}")));
    }
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::invalid(format!(
            "subsample fraction must be in (0, 1), got {r}"
        )));
    }
    let m = (r * set.len() as f64).floor() as usize;
    if m == 0 {
        return Err(Error::invalid(format!(
            "fraction {r} of {} answers leaves an empty subsample",
            set.len()
        )));
    }
    let seeds: Vec<u64> = (0..b).map(|_| rng.random()).collect();
    let fits: Vec<Result<EmbedResult>> = seeds
        .par_iter()
        .enumerate()
        .map(|(k, &seed)| {
            let mut r = rng::from_seed(seed);
            let idx = rand::seq::index::sample(&mut r, set.len(), m);
            let sub = set.select(idx);
            embedding::embed(&sub, d, spec, cfg, &mut r).map_err(|e| Error::Replica {
                index: k,
                source: Box::new(e),
            })
        })
        .collect();
    let fits = fits.into_iter().collect::<Result<Vec<_>>>()?;
    Ok((fits, seeds))
}

/// Bootstrap ensemble with all members Procrustes-aligned to a randomly
/// selected reference member.
pub fn bootstrap_ensemble(
    set: &TripletSet,
    d: usize,
    spec: &LossSpec,
    b: usize,
    r: f64,
    cfg: &OptimizerConfig,
    rng: &mut Rng,
) -> Result<EmbeddingEnsemble> {
    let (fits, seeds) = bootstrap_replicas(set, d, spec, b, r, cfg, rng)?;
    let reference = rng.random_range(0..b);
    let target = fits[reference].embedding.clone();
    let mut members = Vec::with_capacity(b);
    let mut scales = Vec::with_capacity(b);
    for (k, fit) in fits.iter().enumerate() {
        if k == reference {
            members.push(target.clone());
            scales.push(1.0);
        } else {
            let al = procrustes_align(&fit.embedding, &target).map_err(|e| Error::Replica {
                index: k,
                source: Box::new(e),
            })?;
            members.push(al.embedding);
            scales.push(al.scale);
        }
    }
    let mut ens = EmbeddingEnsemble::new(members, EnsembleSource::Bootstrap { r }, true)?;
    ens.info = EnsembleInfo {
        reference: Some(reference),
        scales,
        seeds,
        losses: fits.iter().map(|f| f.loss).collect(),
        converged: fits.iter().map(|f| f.converged).collect(),
        shrinks: 0,
        centered: false,
    };
    Ok(ens)
}

/// One accepted elliptical slice sampling move.
#[derive(Clone, Debug, PartialEq)]
pub struct EssSample {
    pub state: Vec<f64>,
    pub log_lik: f64,
    /// The slice level `log L(x) + log u` the new state exceeds.
    pub threshold: f64,
    pub shrinks: usize,
    /// Final angle on the ellipse `x cos θ + ν sin θ`.
    pub angle: f64,
    /// The auxiliary prior draw defining the ellipse.
    pub auxiliary: Vec<f64>,
}

pub const ESS_MAX_SHRINKS: usize = 1000;

/// One elliptical slice sampling transition from `x` (with known
/// log-likelihood `x_log_lik`) under the prior `N(0, prior.scale I)`.
pub fn ess_step<F>(
    x: &[f64],
    x_log_lik: f64,
    mut log_lik: F,
    prior: &PriorSpec,
    rng: &mut Rng,
) -> Result<EssSample>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    if !x_log_lik.is_finite() {
        return Err(Error::Numerical(format!(
            "current log-likelihood is {x_log_lik}"
        )));
    }
    let sd = prior.scale.sqrt();
    let nu: Vec<f64> = (0..x.len())
        .map(|_| sd * rng.sample::<f64, _>(StandardNormal))
        .collect();
    // u in (0, 1]
    let u: f64 = 1.0 - rng.random::<f64>();
    let threshold = x_log_lik + u.ln();
    let mut theta = rng.random::<f64>() * 2.0 * PI;
    let (mut lo, mut hi) = (theta - 2.0 * PI, theta);
    let mut proposal = vec![0.0; x.len()];
    for shrinks in 0..ESS_MAX_SHRINKS {
        let (s, c) = theta.sin_cos();
        for ((p, xv), nv) in proposal.iter_mut().zip(x).zip(&nu) {
            *p = xv * c + nv * s;
        }
        let ll = log_lik(&proposal)?;
        if ll > threshold {
            return Ok(EssSample {
                state: proposal,
                log_lik: ll,
                threshold,
                shrinks,
                angle: theta,
                auxiliary: nu,
            });
        }
        if theta < 0.0 {
            lo = theta;
        } else {
            hi = theta;
        }
        theta = lo + rng.random::<f64>() * (hi - lo);
    }
    Err(Error::NonTermination(ESS_MAX_SHRINKS))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BayesOptions {
    /// Keep every `thinning`-th chain state.
    pub thinning: usize,
    /// Re-center the state after each step.
    pub center: bool,
    /// Procrustes-align all members to the first one.
    pub align: bool,
}

impl Default for BayesOptions {
    fn default() -> Self {
        Self {
            thinning: 1,
            center: true,
            align: false,
        }
    }
}

/// Runs an elliptical slice sampling chain from `init` and returns
/// `n_samples` states; the first is `init` itself (centered if
/// `opts.center`). No burn-in is discarded.
pub fn bayesian_chain(
    set: &TripletSet,
    spec: &LossSpec,
    prior: &PriorSpec,
    init: Embedding,
    n_samples: usize,
    opts: &BayesOptions,
    rng: &mut Rng,
) -> Result<EmbeddingEnsemble> {
    if n_samples < 2 {
        return Err(Error::invalid(format!(
            "need at least 2 samples, got {n_samples}"
        )));
    }
    if opts.thinning == 0 {
        return Err(Error::invalid("thinning must be >= 1"));
    }
    if !spec.is_probabilistic() {
        return Err(Error::Unsupported(
            "posterior sampling needs a probabilistic likelihood",
        ));
    }
    let (n, d) = (init.n(), init.dim());
    let mut state = init;
    if opts.center {
        state.center();
    }
    let mut ll = embedding::log_likelihood(spec, &state, set)?;
    let mut members = Vec::with_capacity(n_samples);
    members.push(state.clone());
    let mut shrinks = 0;
    let log_lik = |v: &[f64]| -> Result<f64> {
        let x = Embedding::from_vec(n, d, v.to_vec())?;
        embedding::log_likelihood(spec, &x, set)
    };
    while members.len() < n_samples {
        for _ in 0..opts.thinning {
            let step = ess_step(state.as_slice(), ll, log_lik, prior, rng)?;
            shrinks += step.shrinks;
            state = Embedding::from_vec(n, d, step.state)?;
            ll = step.log_lik;
            if opts.center {
                // translation leaves the likelihood unchanged
                state.center();
            }
        }
        members.push(state.clone());
    }
    let mut scales = vec![1.0; members.len()];
    if opts.align {
        let target = members[0].clone();
        for (m, s) in members.iter_mut().zip(scales.iter_mut()).skip(1) {
            let al = procrustes_align(m, &target)?;
            *m = al.embedding;
            *s = al.scale;
        }
    }
    let mut ens = EmbeddingEnsemble::new(
        members,
        EnsembleSource::Bayesian {
            prior_scale: prior.scale,
        },
        opts.align,
    )?;
    ens.info.scales = scales;
    ens.info.shrinks = shrinks;
    ens.info.centered = opts.center;
    Ok(ens)
}

/// Posterior ensemble started at the maximum likelihood embedding.
#[allow(clippy::too_many_arguments)]
pub fn bayesian_ensemble(
    set: &TripletSet,
    d: usize,
    spec: &LossSpec,
    prior: &PriorSpec,
    n_samples: usize,
    opts: &BayesOptions,
    cfg: &OptimizerConfig,
    rng: &mut Rng,
) -> Result<EmbeddingEnsemble> {
    if !spec.is_probabilistic() {
        return Err(Error::Unsupported(
            "posterior sampling needs a probabilistic likelihood",
        ));
    }
    let init = embedding::embed(set, d, spec, cfg, rng)?;
    let chain_seed: u64 = rng.random();
    let mut ens = bayesian_chain(
        set,
        spec,
        prior,
        init.embedding,
        n_samples,
        opts,
        &mut rng::from_seed(chain_seed),
    )?;
    ens.info.seeds = vec![init.seed, chain_seed];
    ens.info.losses = vec![init.loss];
    ens.info.converged = vec![init.converged];
    Ok(ens)
}

/// How to build an ensemble, as configured for an experiment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum EnsembleMethod {
    Bootstrap {
        loss: LossKind,
        b: usize,
        r: f64,
    },
    Bayesian {
        loss: LossKind,
        prior: PriorSpec,
        n_samples: usize,
        thinning: usize,
    },
}

impl EnsembleMethod {
    /// Bootstrap with `b = 20` replicas on 40% subsamples.
    pub fn bootstrap(loss: LossKind) -> Self {
        EnsembleMethod::Bootstrap {
            loss,
            b: 20,
            r: 0.4,
        }
    }

    /// 500 posterior samples under a `15 I` prior.
    pub fn bayesian(loss: LossKind) -> Self {
        EnsembleMethod::Bayesian {
            loss,
            prior: PriorSpec::default(),
            n_samples: 500,
            thinning: 1,
        }
    }

    pub fn loss(&self) -> LossKind {
        match *self {
            EnsembleMethod::Bootstrap { loss, .. } | EnsembleMethod::Bayesian { loss, .. } => loss,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            EnsembleMethod::Bootstrap { .. } => "bootstrap",
            EnsembleMethod::Bayesian { .. } => "bayes",
        }
    }

    pub fn build(
        &self,
        set: &TripletSet,
        d: usize,
        cfg: &OptimizerConfig,
        rng: &mut Rng,
    ) -> Result<EmbeddingEnsemble> {
        match *self {
            EnsembleMethod::Bootstrap { loss, b, r } => {
                bootstrap_ensemble(set, d, &loss.spec_for(d), b, r, cfg, rng)
            }
            EnsembleMethod::Bayesian {
                loss,
                prior,
                n_samples,
                thinning,
            } => bayesian_ensemble(
                set,
                d,
                &loss.spec_for(d),
                &prior,
                n_samples,
                &BayesOptions {
                    thinning,
                    ..BayesOptions::default()
                },
                cfg,
                rng,
            ),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::random_init;
    use crate::stats;
    use crate::triplets::{sample_noisy_triplets, NoiseModel, TripletDraw};

    fn rotation_2d(theta: f64) -> [[f64; 2]; 2] {
        let (s, c) = theta.sin_cos();
        [[c, -s], [s, c]]
    }

    fn apply(x: &Embedding, m: [[f64; 2]; 2], scale: f64, shift: [f64; 2]) -> Embedding {
        let rows: Vec<[f64; 2]> = x
            .rows()
            .map(|r| {
                [
                    scale * (r[0] * m[0][0] + r[1] * m[1][0]) + shift[0],
                    scale * (r[0] * m[0][1] + r[1] * m[1][1]) + shift[1],
                ]
            })
            .collect();
        Embedding::from_rows(&rows).unwrap()
    }

    fn max_abs_diff(a: &Embedding, b: &Embedding) -> f64 {
        a.as_slice()
            .iter()
            .zip(b.as_slice())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn self_alignment_is_identity() {
        let x = random_init(12, 3, 1.0, &mut rng::from_seed(1));
        let al = procrustes_align(&x, &x).unwrap();
        assert!(max_abs_diff(&al.embedding, &x) < 1e-12);
        assert!((al.scale - 1.0).abs() < 1e-12);
    }

    #[test]
    fn recovers_rotated_scaled_shifted_copy() {
        let reference = random_init(15, 2, 1.0, &mut rng::from_seed(2));
        let x = apply(&reference, rotation_2d(1.1), 3.0, [4.0, -2.0]);
        let al = procrustes_align(&x, &reference).unwrap();
        assert!(max_abs_diff(&al.embedding, &reference) < 1e-8);
        assert!((al.scale - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn reflections_are_allowed() {
        let reference = random_init(10, 2, 1.0, &mut rng::from_seed(3));
        let x = apply(&reference, [[1.0, 0.0], [0.0, -1.0]], 1.0, [0.0, 0.0]);
        let al = procrustes_align(&x, &reference).unwrap();
        assert!(max_abs_diff(&al.embedding, &reference) < 1e-10);
    }

    #[test]
    fn zero_spread_is_degenerate() {
        let reference = random_init(5, 2, 1.0, &mut rng::from_seed(4));
        let x = Embedding::from_vec(5, 2, vec![1.0; 10]).unwrap();
        assert!(matches!(
            procrustes_align(&x, &reference),
            Err(Error::Degenerate(_))
        ));
    }

    fn toy_set(seed: u64, n: usize, count: usize) -> (Embedding, TripletSet) {
        let mut r = rng::from_seed(seed);
        let pts = random_init(n, 2, 1.0, &mut r);
        let s = sample_noisy_triplets(
            &pts,
            TripletDraw::Count(count),
            NoiseModel::noiseless(),
            &mut r,
        )
        .unwrap();
        (pts, s)
    }

    fn quick_cfg() -> OptimizerConfig {
        OptimizerConfig {
            max_iters: 300,
            restarts: 1,
            ..OptimizerConfig::default()
        }
    }

    #[test]
    fn bootstrap_members_are_aligned_and_reproducible() {
        let (_, s) = toy_set(5, 12, 300);
        let cfg = quick_cfg();
        let e1 = bootstrap_ensemble(&s, 2, &LossSpec::Ste, 6, 0.4, &cfg, &mut rng::from_seed(9))
            .unwrap();
        let e2 = bootstrap_ensemble(&s, 2, &LossSpec::Ste, 6, 0.4, &cfg, &mut rng::from_seed(9))
            .unwrap();
        assert_eq!(e1, e2);
        assert_eq!(e1.len(), 6);
        assert!(e1.aligned);
        let reference = &e1.members()[e1.info.reference.unwrap()];
        for m in e1.members() {
            let again = procrustes_align(m, reference).unwrap();
            assert!(max_abs_diff(&again.embedding, m) < 1e-10);
        }
        // distinct replicas differ
        assert_ne!(e1.members()[0], e1.members()[1]);
    }

    #[test]
    fn alignment_only_rescales_distances() {
        let (_, s) = toy_set(6, 10, 200);
        let cfg = quick_cfg();
        let mut r = rng::from_seed(10);
        let (fits, _) = bootstrap_replicas(&s, 2, &LossSpec::Ste, 3, 0.5, &cfg, &mut r).unwrap();
        let al = procrustes_align(&fits[1].embedding, &fits[0].embedding).unwrap();
        let (before, after) = (
            fits[1].embedding.distance_matrix(),
            al.embedding.distance_matrix(),
        );
        for (u, v) in before.as_slice().iter().zip(after.as_slice()) {
            assert!((u * al.scale - v).abs() < 1e-9 * (1.0 + v.abs()));
        }
    }

    #[test]
    fn subsample_size_is_floor() {
        let (_, s) = toy_set(7, 8, 11);
        assert!(bootstrap_replicas(
            &s,
            2,
            &LossSpec::Ste,
            2,
            0.05,
            &quick_cfg(),
            &mut rng::from_seed(0)
        )
        .is_err());
        assert!(bootstrap_replicas(
            &s,
            2,
            &LossSpec::Ste,
            1,
            0.5,
            &quick_cfg(),
            &mut rng::from_seed(0)
        )
        .is_err());
        assert!(bootstrap_replicas(
            &s,
            2,
            &LossSpec::Ste,
            2,
            1.0,
            &quick_cfg(),
            &mut rng::from_seed(0)
        )
        .is_err());
    }

    #[test]
    fn ess_proposals_lie_on_the_ellipse_and_exceed_threshold() {
        let prior = PriorSpec::new(2.0).unwrap();
        let mut r = rng::from_seed(11);
        let ll =
            |v: &[f64]| -> Result<f64> { Ok(-v.iter().map(|x| (x - 1.0).powi(2)).sum::<f64>()) };
        let mut x = vec![0.3, -0.2, 0.9];
        let mut lx = ll(&x).unwrap();
        for _ in 0..500 {
            let step = ess_step(&x, lx, ll, &prior, &mut r).unwrap();
            assert!(step.log_lik > step.threshold);
            let (s, c) = step.angle.sin_cos();
            for ((new, old), aux) in step.state.iter().zip(&x).zip(&step.auxiliary) {
                assert!((new - (old * c + aux * s)).abs() < 1e-12);
            }
            x = step.state;
            lx = step.log_lik;
        }
    }

    #[test]
    fn ess_with_flat_likelihood_samples_the_prior() {
        let prior = PriorSpec::new(15.0).unwrap();
        let mut r = rng::from_seed(12);
        let flat = |_: &[f64]| -> Result<f64> { Ok(0.0) };
        let mut x = vec![0.0; 4];
        let mut samples = vec![Vec::new(); 4];
        for _ in 0..20_000 {
            let step = ess_step(&x, 0.0, flat, &prior, &mut r).unwrap();
            x = step.state;
            for k in 0..4 {
                samples[k].push(x[k]);
            }
        }
        for s in &samples {
            let v = stats::sample_std(s).powi(2);
            assert!((v - 15.0).abs() < 0.05 * 15.0, "{v}");
        }
    }

    #[test]
    fn ess_rejects_broken_likelihood() {
        let prior = PriorSpec::default();
        let mut r = rng::from_seed(13);
        // nothing beats the current state's level
        let mut first = true;
        let ll = |_: &[f64]| -> Result<f64> {
            if first {
                first = false;
            }
            Ok(f64::NEG_INFINITY)
        };
        assert!(matches!(
            ess_step(&[0.0, 1.0], 0.0, ll, &prior, &mut r),
            Err(Error::NonTermination(_))
        ));
    }

    #[test]
    fn chain_starts_at_initializer() {
        let (pts, s) = toy_set(14, 8, 120);
        let mut init = pts.clone();
        init.center();
        let ens = bayesian_chain(
            &s,
            &LossSpec::Ste,
            &PriorSpec::default(),
            init.clone(),
            20,
            &BayesOptions::default(),
            &mut rng::from_seed(1),
        )
        .unwrap();
        assert_eq!(ens.len(), 20);
        let first = ens.members()[0].as_slice();
        assert!(first
            .iter()
            .zip(init.as_slice())
            .all(|(a, b)| (a - b).abs() < 1e-14));
        assert!(!ens.aligned);
        assert!(
            matches!(ens.source, EnsembleSource::Bayesian { prior_scale } if prior_scale == 15.0)
        );
    }

    #[test]
    fn thinning_keeps_requested_count() {
        let (pts, s) = toy_set(15, 6, 50);
        let opts = BayesOptions {
            thinning: 3,
            ..BayesOptions::default()
        };
        let ens = bayesian_chain(
            &s,
            &LossSpec::Ste,
            &PriorSpec::default(),
            pts,
            7,
            &opts,
            &mut rng::from_seed(2),
        )
        .unwrap();
        assert_eq!(ens.len(), 7);
    }

    #[test]
    fn hinge_has_no_posterior() {
        let (pts, s) = toy_set(16, 6, 50);
        let r = bayesian_chain(
            &s,
            &LossSpec::GnmdsHinge { lambda: 0.0 },
            &PriorSpec::default(),
            pts,
            5,
            &BayesOptions::default(),
            &mut rng::from_seed(3),
        );
        assert!(matches!(r, Err(Error::Unsupported(_))));
    }
}
