//! Acceptance suite: one line per criterion, non-zero exit on any failure.
//!
//! Set `ACCEPTANCE_ONLY=3,5` to run a subset.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::Rng as _;

use triplet_uq::embedding::{loss_and_gradient, random_init, LossKind, LossSpec, OptimizerConfig};
use triplet_uq::ensemble::{
    ess_step, procrustes_align, EmbeddingEnsemble, EnsembleMethod, EnsembleSource, PriorSpec,
};
use triplet_uq::eval::procrustes_distance;
use triplet_uq::experiments::{
    self, ActiveLoopConfig, CalibrationConfig, DimensionConfig, PredictionConfig, Sweep,
};
use triplet_uq::psychophysics::{run_psycho_experiment, PsychoConfig};
use triplet_uq::rng;
use triplet_uq::stats;
use triplet_uq::triplets::{comparisons, Triplet, TripletSet};
use triplet_uq::uncertainty::{distance_stats, triplet_uncertainty, DistanceStats};
use triplet_uq::{Embedding, Result};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Result<Outcome> {
    Ok(Outcome {
        pass,
        detail: detail.into(),
    })
}

const SEED: u64 = 20_240_601;

fn random_set(n: usize, m: usize, r: &mut rng::Rng) -> TripletSet {
    let mut s = TripletSet::new(n);
    while s.len() < m {
        let (a, b, c) = (
            r.random_range(0..n),
            r.random_range(0..n),
            r.random_range(0..n),
        );
        if let Ok(t) = Triplet::new(a, b, c) {
            s.push(t).unwrap();
        }
    }
    s
}

fn gradients() -> Result<Outcome> {
    let specs = [
        LossSpec::Ste,
        LossSpec::tste_for_dim(2),
        LossSpec::crowd_kernel(),
        LossSpec::GnmdsHinge { lambda: 0.01 },
    ];
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    let mut r = rng::derive(SEED, &[1]);
    for spec in &specs {
        for _ in 0..20 {
            let x = random_init(6, 2, 1.0, &mut r);
            let set = random_set(6, 25, &mut r);
            let (_, g) = loss_and_gradient(spec, &x, &set)?;
            let mut fd = vec![0.0; 12];
            for (k, v) in fd.iter_mut().enumerate() {
                let mut xp = x.clone();
                xp.as_mut_slice()[k] += h;
                let mut xm = x.clone();
                xm.as_mut_slice()[k] -= h;
                *v = (loss_and_gradient(spec, &xp, &set)?.0
                    - loss_and_gradient(spec, &xm, &set)?.0)
                    / (2.0 * h);
            }
            let diff = g
                .as_slice()
                .iter()
                .zip(&fd)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            let norm = fd.iter().map(|b| b * b).sum::<f64>().sqrt().max(1e-12);
            worst = worst.max(diff / norm);
        }
    }
    outcome(
        worst < 1e-5,
        format!("max relative error {worst:.2e} over 80 instances"),
    )
}

fn uncertainty_algebra() -> Result<Outcome> {
    let mut r = rng::derive(SEED, &[2]);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let members = (0..3).map(|_| random_init(6, 2, 1.0, &mut r)).collect();
        let st = distance_stats(&EmbeddingEnsemble::new(
            members,
            EnsembleSource::Bootstrap { r: 0.5 },
            true,
        )?)?;
        for c in comparisons(6) {
            let p = triplet_uncertainty(&st, c.anchor, c.first, c.second);
            let q = triplet_uncertainty(&st, c.anchor, c.second, c.first);
            worst = worst.max((p + q - 1.0).abs());
        }
    }
    let mut degenerate_ok = true;
    for _ in 0..100 {
        let n = 5;
        let mut rho = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                // coarse values so exact ties occur
                let v = r.random_range(1..4) as f64;
                rho[i * n + j] = v;
                rho[j * n + i] = v;
            }
        }
        let st = DistanceStats::from_parts(n, rho, vec![0.0; n * n])?;
        for c in comparisons(n) {
            let (dj, dl) = (st.rho(c.anchor, c.first), st.rho(c.anchor, c.second));
            let want = if dl > dj {
                1.0
            } else if dl < dj {
                0.0
            } else {
                0.5
            };
            degenerate_ok &= triplet_uncertainty(&st, c.anchor, c.first, c.second) == want;
        }
    }
    outcome(
        worst <= 1e-12 && degenerate_ok,
        format!(
            "max |π_ijl + π_ilj − 1| = {worst:.1e}, degenerate rule {}",
            if degenerate_ok { "exact" } else { "violated" }
        ),
    )
}

fn ess() -> Result<Outcome> {
    let prior = PriorSpec::new(15.0)?;
    let m = [3.0, -4.0, 5.0];
    let s2 = 2.0;
    let ll = |x: &[f64]| -> Result<f64> {
        Ok(-x.iter().zip(&m).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / (2.0 * s2))
    };
    let mut r = rng::derive(SEED, &[3]);
    let mut x = vec![0.0; 3];
    let mut lx = ll(&x)?;
    let mut samples: Vec<Vec<f64>> = (0..3).map(|_| Vec::with_capacity(20_000)).collect();
    let mut above = true;
    for _ in 0..20_000 {
        let step = ess_step(&x, lx, ll, &prior, &mut r)?;
        above &= step.log_lik > step.threshold;
        x = step.state;
        lx = step.log_lik;
        for k in 0..3 {
            samples[k].push(x[k]);
        }
    }
    let lam = prior.scale;
    let var_post = lam * s2 / (lam + s2);
    let mut worst: f64 = 0.0;
    for k in 0..3 {
        let mean_post = lam * m[k] / (lam + s2);
        let mean = stats::mean(&samples[k]);
        let var = stats::sample_std(&samples[k]).powi(2);
        worst = worst.max(((mean - mean_post) / mean_post).abs());
        worst = worst.max(((var - var_post) / var_post).abs());
    }
    outcome(
        worst < 0.05 && above,
        format!(
            "max relative moment error {:.2}%, all states above threshold: {above}",
            worst * 100.0
        ),
    )
}

fn procrustes() -> Result<Outcome> {
    let mut r = rng::derive(SEED, &[4]);
    let x = random_init(20, 3, 1.0, &mut r);
    let mut worst: f64 = 0.0;
    for reflect in [false, true] {
        let q = random_orthogonal(3, reflect, &mut r);
        let y = Embedding::from_matrix(&(x.to_matrix() * q));
        worst = worst.max(procrustes_distance(&y, &x)?);
        let al = procrustes_align(&y, &x)?;
        let d: f64 = al
            .embedding
            .as_slice()
            .iter()
            .zip(x.as_slice())
            .map(|(a, b)| (a - b).powi(2))
            .sum();
        worst = worst.max(d);
    }
    let mut unit = x.centered();
    unit.scale(1.0 / unit.frobenius_norm());
    let mut double = unit.clone();
    double.scale(2.0);
    let scaled = procrustes_distance(&double, &unit)?;
    outcome(
        worst < 1e-10 && (scaled - 1.0).abs() <= 1e-8,
        format!("rotated/reflected {worst:.1e}, scaled copy {scaled:.12}"),
    )
}

fn random_orthogonal(d: usize, reflect: bool, r: &mut rng::Rng) -> nalgebra::DMatrix<f64> {
    let a = nalgebra::DMatrix::from_fn(d, d, |_, _| r.random::<f64>() - 0.5);
    let mut q = a.qr().q();
    if (q.determinant() < 0.0) != reflect {
        q.column_mut(0).neg_mut();
    }
    q
}

fn noise_calibration() -> Result<Outcome> {
    let mut ok = true;
    let mut detail = Vec::new();
    for method in [
        EnsembleMethod::bootstrap(LossKind::Ste),
        EnsembleMethod::bayesian(LossKind::Ste),
    ] {
        let table = experiments::run_calibration_sweep(&CalibrationConfig::new(
            method,
            Sweep::noise_default(),
            SEED,
        ))?;
        let means: Vec<f64> = table.rows.iter().map(|r| r.uncertainty_mean).collect();
        let inversions = means.windows(2).filter(|w| w[1] < w[0]).count();
        let last = *means.last().unwrap();
        ok &= inversions <= 1 && (last - 0.5).abs() <= 0.1;
        detail.push(format!(
            "{}: [{}] inversions {inversions}",
            table.method,
            means
                .iter()
                .map(|v| format!("{v:.3}"))
                .collect::<Vec<_>>()
                .join(", ")
        ));
    }
    outcome(ok, detail.join("; "))
}

fn triplet_calibration() -> Result<Outcome> {
    let cfg = CalibrationConfig::new(
        EnsembleMethod::bootstrap(LossKind::Ste),
        Sweep::triplets_default(),
        SEED,
    );
    let table = experiments::run_calibration_sweep(&cfg)?;
    let (lo, hi) = (&table.rows[0], table.rows.last().unwrap());
    let wins = (0..cfg.reps)
        .filter(|&k| hi.procrustes[k] < lo.procrustes[k] && hi.uncertainty[k] < lo.uncertainty[k])
        .count();
    outcome(
        wins >= 4,
        format!(
            "15% beats 0.5% in {wins}/5 reps (procrustes {:.3} vs {:.3}, uncertainty {:.3} vs {:.3})",
            hi.procrustes_mean, lo.procrustes_mean, hi.uncertainty_mean, lo.uncertainty_mean
        ),
    )
}

fn prediction_tradeoff() -> Result<Outcome> {
    let cfg = PredictionConfig::new(EnsembleMethod::bootstrap(LossKind::Ste), SEED);
    let grid = experiments::run_prediction_grid(&cfg)?;
    let t75 = cfg.thresholds.iter().position(|&t| t == 0.75).unwrap();
    let mut monotone_t = true;
    let (mut count_ok, mut error_ok) = (0, 0);
    for by_frac in &grid.outcomes {
        for by_t in by_frac {
            monotone_t &= by_t.windows(2).all(|w| w[0].abstention <= w[1].abstention);
            if by_t.last().unwrap().error <= by_t[0].error {
                error_ok += 1;
            }
        }
        if by_frac
            .windows(2)
            .all(|w| w[1][t75].abstention <= w[0][t75].abstention)
        {
            count_ok += 1;
        }
    }
    let cells = cfg.reps * cfg.fractions.len();
    // error half counted per repetition: every fraction must satisfy it
    let per_rep_error = grid
        .outcomes
        .iter()
        .filter(|by_frac| {
            by_frac
                .iter()
                .all(|by_t| by_t.last().unwrap().error <= by_t[0].error)
        })
        .count();
    outcome(
        monotone_t && count_ok >= 4 && per_rep_error >= 4,
        format!(
            "abstention monotone in t: {monotone_t}; non-increasing in count {count_ok}/5; error(0.95) <= error(0.55) in {per_rep_error}/5 reps ({error_ok}/{cells} cells)"
        ),
    )
}

fn dimension_scan() -> Result<Outcome> {
    let (mut loss_ok, mut argmin_ok, mut below_ok) = (true, 0, 0);
    let mut bests = Vec::new();
    for k in 0..5u64 {
        let res = experiments::run_dimension_experiment(&DimensionConfig::new(SEED + k))?;
        loss_ok &= res.training_loss.windows(2).all(|w| w[1] <= w[0]);
        if (2..=4).contains(&res.scan.best) {
            argmin_ok += 1;
        }
        let at =
            |d: usize| res.scan.uncertainty[res.scan.dims.iter().position(|&x| x == d).unwrap()];
        if at(res.d_true) < at(1) {
            below_ok += 1;
        }
        bests.push(res.scan.best);
    }
    outcome(
        loss_ok && argmin_ok >= 4 && below_ok == 5,
        format!("loss non-increasing: {loss_ok}; argmin {bests:?} in [2,4] for {argmin_ok}/5; u(3) < u(1) in {below_ok}/5"),
    )
}

fn psychophysics() -> Result<Outcome> {
    let opt = OptimizerConfig::default();
    let mut interior = Vec::new();
    let mut endpoints = true;
    for l in [2.0, 0.88, 0.54] {
        let res =
            run_psycho_experiment(&PsychoConfig::new(l)?, &opt, &mut rng::derive(SEED, &[9]))?;
        let last = res.mean.len() - 1;
        endpoints &= res.mean[0] == 0.0
            && res.mean[last] == 1.0
            && res.std[0] == 0.0
            && res.std[last] == 0.0;
        interior.push(res.interior_std());
    }
    let increasing = interior.windows(2).all(|w| w[1] > w[0]);
    outcome(
        increasing && endpoints,
        format!(
            "interior std for l = 2, 0.88, 0.54: [{}]; endpoints exact: {endpoints}",
            interior
                .iter()
                .map(|v| format!("{v:.4}"))
                .collect::<Vec<_>>()
                .join(", ")
        ),
    )
}

fn active_loop() -> Result<Outcome> {
    let cfg = ActiveLoopConfig::default();
    let (mut u_err, mut r_err) = (Vec::new(), Vec::new());
    let mut rounds_ok = true;
    for k in 0..5u64 {
        let (u, r) = experiments::run_active_comparison(&cfg, SEED + k)?;
        rounds_ok &= u.rounds.len() == 9 && r.rounds.len() == 9;
        rounds_ok &=
            u.final_round().n_triplets == cfg.budget && r.final_round().n_triplets == cfg.budget;
        u_err.push(u.final_round().triplet_error);
        r_err.push(r.final_round().triplet_error);
    }
    let (u, r) = (stats::mean(&u_err), stats::mean(&r_err));
    outcome(
        rounds_ok && u <= r + 0.05,
        format!(
            "8 rounds each: {rounds_ok}; final triplet error uncertainty {u:.4} vs random {r:.4}"
        ),
    )
}

fn determinism() -> Result<Outcome> {
    let opt = OptimizerConfig {
        max_iters: 300,
        restarts: 2,
        ..OptimizerConfig::default()
    };
    let boot = EnsembleMethod::Bootstrap {
        loss: LossKind::Ste,
        b: 4,
        r: 0.5,
    };
    let bayes = EnsembleMethod::Bayesian {
        loss: LossKind::Ste,
        prior: PriorSpec::default(),
        n_samples: 30,
        thinning: 1,
    };
    let run = || -> Result<Vec<String>> {
        let mut out = Vec::new();
        for method in [boot, bayes] {
            let mut c = CalibrationConfig::new(method, Sweep::noise_default(), 77);
            c.n = 20;
            c.reps = 2;
            c.opt = opt;
            out.push(serde_json::to_string(&experiments::run_calibration_sweep(
                &c,
            )?)?);
        }
        let mut p = PredictionConfig::new(boot, 78);
        p.n = 20;
        p.reps = 2;
        p.opt = opt;
        out.push(serde_json::to_string(&experiments::run_prediction_grid(
            &p,
        )?)?);
        let mut d = DimensionConfig::new(79);
        d.n = 20;
        d.dims = vec![1, 2, 3];
        d.method = boot;
        d.opt = opt;
        out.push(serde_json::to_string(
            &experiments::run_dimension_experiment(&d)?,
        )?);
        let mut ps = PsychoConfig::new(0.54)?;
        ps.n_observers = 10;
        ps.b = 5;
        out.push(serde_json::to_string(&run_psycho_experiment(
            &ps,
            &opt,
            &mut rng::from_seed(80),
        )?)?);
        let a = ActiveLoopConfig {
            n: 30,
            d: 2,
            clusters: 3,
            seed_triplets: 200,
            batch: 100,
            budget: 400,
            method: boot,
            ensemble_opt: opt,
            opt,
            ..ActiveLoopConfig::default()
        };
        let (u, r) = experiments::run_active_comparison(&a, 81)?;
        out.push(serde_json::to_string(&(u, r))?);
        Ok(out)
    };
    let (first, second) = (run()?, run()?);
    let same = first.iter().zip(&second).filter(|(a, b)| a == b).count();
    outcome(
        same == first.len(),
        format!(
            "{same}/{} experiment outputs bit-identical on rerun",
            first.len()
        ),
    )
}

type Criterion = (u32, &'static str, fn() -> Result<Outcome>, Duration);

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        (
            1,
            "gradient correctness",
            gradients,
            Duration::from_secs(10),
        ),
        (
            2,
            "uncertainty algebra",
            uncertainty_algebra,
            Duration::from_secs(1),
        ),
        (3, "elliptical slice sampling", ess, Duration::from_secs(60)),
        (4, "procrustes", procrustes, Duration::from_secs(60)),
        (
            5,
            "noise calibration",
            noise_calibration,
            Duration::from_secs(15 * 60),
        ),
        (
            6,
            "triplet-count calibration",
            triplet_calibration,
            Duration::from_secs(15 * 60),
        ),
        (
            7,
            "prediction trade-off",
            prediction_tradeoff,
            Duration::from_secs(15 * 60),
        ),
        (
            8,
            "dimension scan",
            dimension_scan,
            Duration::from_secs(20 * 60),
        ),
        (
            9,
            "psychophysics",
            psychophysics,
            Duration::from_secs(10 * 60),
        ),
        (10, "active loop", active_loop, Duration::from_secs(45 * 60)),
        (11, "determinism", determinism, Duration::from_secs(15 * 60)),
    ];
    let only: Option<Vec<u32>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let mut failed = 0;
    for (id, name, run, budget) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let start = Instant::now();
        let res = run();
        let took = start.elapsed();
        let (pass, detail) = match res {
            Ok(o) => (o.pass && took <= budget, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "[{}] {id:>2} {name}: {detail} ({:.1}s, budget {}s)",
            if pass { "PASS" } else { "FAIL" },
            took.as_secs_f64(),
            budget.as_secs()
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    }
}
