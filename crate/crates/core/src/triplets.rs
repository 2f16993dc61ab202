//! Triplet answers, the log-normal noise model that generates them from
//! ground-truth points, and the line-oriented triplet file format.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{DistanceMatrix, Embedding};
use crate::rng::Rng;
use crate::stats::normal_cdf;

/// The answer "`anchor` is closer to `near` than to `far`".
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triplet {
    pub anchor: usize,
    pub near: usize,
    pub far: usize,
}

impl Triplet {
    pub fn new(anchor: usize, near: usize, far: usize) -> Result<Self> {
        if anchor == near || anchor == far || near == far {
            return Err(Error::InvalidTriplet { anchor, near, far });
        }
        Ok(Self { anchor, near, far })
    }

    /// The opposite answer to the same comparison.
    pub fn reversed(self) -> Self {
        Self {
            anchor: self.anchor,
            near: self.far,
            far: self.near,
        }
    }

    pub fn comparison(self) -> Comparison {
        Comparison::new(self.anchor, self.near, self.far)
    }

    pub fn check(self, n: usize) -> Result<()> {
        Self::new(self.anchor, self.near, self.far)?;
        for index in [self.anchor, self.near, self.far] {
            if index >= n {
                return Err(Error::Index { index, n });
            }
        }
        Ok(())
    }
}

/// An unanswered question `{anchor, (first, second)}` with `first < second`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Comparison {
    pub anchor: usize,
    pub first: usize,
    pub second: usize,
}

/// Which of the two candidates of a comparison is closer to the anchor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Orientation {
    FirstCloser,
    SecondCloser,
}

impl Comparison {
    pub fn new(anchor: usize, a: usize, b: usize) -> Self {
        Self {
            anchor,
            first: a.min(b),
            second: a.max(b),
        }
    }

    pub fn oriented(self, o: Orientation) -> Triplet {
        match o {
            Orientation::FirstCloser => Triplet {
                anchor: self.anchor,
                near: self.first,
                far: self.second,
            },
            Orientation::SecondCloser => Triplet {
                anchor: self.anchor,
                near: self.second,
                far: self.first,
            },
        }
    }
}

/// Number of distinct comparisons over `n` points, `n(n-1)(n-2)/2`.
pub fn comparison_count(n: usize) -> usize {
    if n < 3 {
        0
    } else {
        n * (n - 1) * (n - 2) / 2
    }
}

/// All comparisons in lexicographic `(anchor, first, second)` order.
pub fn comparisons(n: usize) -> impl Iterator<Item = Comparison> {
    (0..n).flat_map(move |anchor| {
        (0..n).filter(move |&a| a != anchor).flat_map(move |first| {
            ((first + 1)..n)
                .filter(move |&s| s != anchor)
                .map(move |second| Comparison {
                    anchor,
                    first,
                    second,
                })
        })
    })
}

/// A comparison drawn uniformly from all comparisons over `n >= 3` points.
pub fn random_comparison(n: usize, rng: &mut Rng) -> Comparison {
    let anchor = rng.random_range(0..n);
    let mut first = rng.random_range(0..n - 1);
    if first >= anchor {
        first += 1;
    }
    let (lo, hi) = (anchor.min(first), anchor.max(first));
    let mut second = rng.random_range(0..n - 2);
    if second >= lo {
        second += 1;
    }
    if second >= hi {
        second += 1;
    }
    Comparison::new(anchor, first, second)
}

/// Ordered multiset of triplet answers over `n` points.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TripletSet {
    n: usize,
    answers: Vec<Triplet>,
}

impl TripletSet {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            answers: Vec::new(),
        }
    }

    pub fn from_answers(n: usize, answers: Vec<Triplet>) -> Result<Self> {
        for t in &answers {
            t.check(n)?;
        }
        Ok(Self { n, answers })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.answers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.answers.is_empty()
    }

    pub fn answers(&self) -> &[Triplet] {
        &self.answers
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Triplet> {
        self.answers.iter()
    }

    pub fn push(&mut self, t: Triplet) -> Result<()> {
        t.check(self.n)?;
        self.answers.push(t);
        Ok(())
    }

    pub fn extend_from(&mut self, other: &TripletSet) -> Result<()> {
        if other.n != self.n {
            return Err(Error::Shape(format!(
                "cannot merge triplets over {} and {} points",
                self.n, other.n
            )));
        }
        self.answers.extend_from_slice(&other.answers);
        Ok(())
    }

    /// The answers at `indices`, in that order.
    pub fn select(&self, indices: impl IntoIterator<Item = usize>) -> Self {
        Self {
            n: self.n,
            answers: indices.into_iter().map(|k| self.answers[k]).collect(),
        }
    }

    pub fn reversed(&self) -> Self {
        Self {
            n: self.n,
            answers: self.answers.iter().map(|t| t.reversed()).collect(),
        }
    }
}

impl<'a> IntoIterator for &'a TripletSet {
    type Item = &'a Triplet;
    type IntoIter = std::slice::Iter<'a, Triplet>;
    fn into_iter(self) -> Self::IntoIter {
        self.answers.iter()
    }
}

/// Log-normal distance noise: each compared distance is perturbed as
/// `log z = log delta + sigma * eps` before the two are compared.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    sigma: f64,
}

impl NoiseModel {
    pub fn new(sigma: f64) -> Result<Self> {
        if !sigma.is_finite() || sigma < 0.0 {
            return Err(Error::invalid(format!(
                "noise sigma must be >= 0, got {sigma}"
            )));
        }
        Ok(Self { sigma })
    }

    pub fn noiseless() -> Self {
        Self { sigma: 0.0 }
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Closed-form probability that the first distance is reported as the
    /// smaller one: `Phi((log d_second - log d_first) / (sigma * sqrt 2))`.
    pub fn prob_first_closer(&self, d_first: f64, d_second: f64) -> f64 {
        if self.sigma == 0.0 {
            return match d_first.partial_cmp(&d_second) {
                Some(std::cmp::Ordering::Less) => 1.0,
                Some(std::cmp::Ordering::Greater) => 0.0,
                _ => 0.5,
            };
        }
        normal_cdf((d_second.ln() - d_first.ln()) / (self.sigma * std::f64::consts::SQRT_2))
    }
}

/// Noisy answer to a single comparison with true distances `d_first` and
/// `d_second` from the anchor.
pub fn answer_comparison(
    d_first: f64,
    d_second: f64,
    noise: NoiseModel,
    rng: &mut Rng,
) -> Result<Orientation> {
    if noise.sigma == 0.0 {
        if !(d_first >= 0.0 && d_second >= 0.0) {
            return Err(Error::Domain(format!(
                "distances must be non-negative, got {d_first} and {d_second}"
            )));
        }
        return if d_first < d_second {
            Ok(Orientation::FirstCloser)
        } else if d_second < d_first {
            Ok(Orientation::SecondCloser)
        } else {
            Err(Error::Domain(format!(
                "noiseless comparison of equal distances {d_first}"
            )))
        };
    }
    if !(d_first > 0.0 && d_second > 0.0) {
        return Err(Error::Domain(format!(
            "log-normal noise needs positive distances, got {d_first} and {d_second}"
        )));
    }
    let e1: f64 = rng.sample(StandardNormal);
    let e2: f64 = rng.sample(StandardNormal);
    let z1 = d_first.ln() + noise.sigma * e1;
    let z2 = d_second.ln() + noise.sigma * e2;
    Ok(if z1 < z2 {
        Orientation::FirstCloser
    } else {
        Orientation::SecondCloser
    })
}

fn answer_with_ties(
    c: Comparison,
    dist: &DistanceMatrix,
    noise: NoiseModel,
    rng: &mut Rng,
) -> Result<Triplet> {
    let (a, b) = (dist.get(c.anchor, c.first), dist.get(c.anchor, c.second));
    if noise.sigma == 0.0 && a == b {
        return Err(Error::Tie {
            anchor: c.anchor,
            first: c.first,
            second: c.second,
        });
    }
    Ok(c.oriented(answer_comparison(a, b, noise, rng)?))
}

/// Every comparison over the points, answered truthfully.
pub fn all_true_triplets(points: &Embedding) -> Result<TripletSet> {
    let n = points.n();
    if n < 3 {
        return Err(Error::invalid(format!("need at least 3 points, got {n}")));
    }
    let dist = points.distance_matrix();
    true_triplets_from_distances(&dist)
}

pub fn true_triplets_from_distances(dist: &DistanceMatrix) -> Result<TripletSet> {
    let n = dist.n();
    let mut answers = Vec::with_capacity(comparison_count(n));
    let mut unused = crate::rng::from_seed(0);
    for c in comparisons(n) {
        answers.push(answer_with_ties(
            c,
            dist,
            NoiseModel::noiseless(),
            &mut unused,
        )?);
    }
    Ok(TripletSet { n, answers })
}

/// How many comparisons to draw.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum TripletDraw {
    Count(usize),
    /// Fraction of all `n(n-1)(n-2)/2` comparisons, rounded down.
    Fraction(f64),
}

impl TripletDraw {
    pub fn resolve(self, n: usize) -> Result<usize> {
        match self {
            TripletDraw::Count(0) => Err(Error::invalid("triplet count must be >= 1")),
            TripletDraw::Count(c) => Ok(c),
            TripletDraw::Fraction(f) if f > 0.0 && f <= 1.0 => {
                let c = (f * comparison_count(n) as f64).floor() as usize;
                if c == 0 {
                    Err(Error::invalid(format!(
                        "fraction {f} of {n} points selects no comparison"
                    )))
                } else {
                    Ok(c)
                }
            }
            TripletDraw::Fraction(f) => Err(Error::invalid(format!(
                "triplet fraction must be in (0, 1], got {f}"
            ))),
        }
    }
}

/// Draws comparisons uniformly with replacement and answers each through the
/// noise model.
pub fn sample_noisy_triplets(
    points: &Embedding,
    draw: TripletDraw,
    noise: NoiseModel,
    rng: &mut Rng,
) -> Result<TripletSet> {
    sample_noisy_from_distances(&points.distance_matrix(), draw, noise, rng)
}

pub fn sample_noisy_from_distances(
    dist: &DistanceMatrix,
    draw: TripletDraw,
    noise: NoiseModel,
    rng: &mut Rng,
) -> Result<TripletSet> {
    let n = dist.n();
    if n < 3 {
        return Err(Error::invalid(format!("need at least 3 points, got {n}")));
    }
    let count = draw.resolve(n)?;
    let mut answers = Vec::with_capacity(count);
    for _ in 0..count {
        let c = random_comparison(n, rng);
        answers.push(answer_with_ties(c, dist, noise, rng)?);
    }
    Ok(TripletSet { n, answers })
}

/// Answers the given comparisons through the noise model, in order.
pub fn answer_comparisons(
    dist: &DistanceMatrix,
    queries: &[Comparison],
    noise: NoiseModel,
    rng: &mut Rng,
) -> Result<TripletSet> {
    let mut answers = Vec::with_capacity(queries.len());
    for &c in queries {
        answers.push(answer_with_ties(c, dist, noise, rng)?);
    }
    Ok(TripletSet {
        n: dist.n(),
        answers,
    })
}

/// Fraction of answers `(i, j, l)` with `D_ij < D_il`; ties count as
/// violations. An empty set is vacuously fully satisfied.
pub fn agreement_fraction(set: &TripletSet, dist: &DistanceMatrix) -> f64 {
    if set.is_empty() {
        return 1.0;
    }
    let ok = set
        .iter()
        .filter(|t| dist.get(t.anchor, t.near) < dist.get(t.anchor, t.far))
        .count();
    ok as f64 / set.len() as f64
}

pub fn format_triplets(set: &TripletSet) -> String {
    let mut out = String::with_capacity(16 * (set.len() + 1));
    let _ = write!(out, "n={}", set.n);
    for t in set {
        let _ = write!(out, "\n{},{},{}", t.anchor, t.near, t.far);
    }
    out.push('\n');
    out
}

pub fn parse_triplets(text: &str) -> Result<TripletSet> {
    let mut lines = text.lines().enumerate();
    let n = match lines.next() {
        Some((_, header)) => header
            .strip_prefix("n=")
            .and_then(|v| v.parse::<usize>().ok())
            .ok_or_else(|| Error::Parse {
                line: 1,
                message: format!("expected header \"n=<int>\", got {header:?}"),
            })?,
        None => {
            return Err(Error::Parse {
                line: 1,
                message: "missing header".into(),
            })
        }
    };
    let mut answers = Vec::new();
    for (k, line) in lines {
        let line_no = k + 1;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected 3 comma-separated indices, got {line:?}"),
            });
        }
        let mut idx = [0usize; 3];
        for (slot, f) in idx.iter_mut().zip(&fields) {
            *slot = f.parse().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("not a point index: {f:?}"),
            })?;
        }
        let t = Triplet::new(idx[0], idx[1], idx[2]).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if let Some(&index) = idx.iter().find(|&&i| i >= n) {
            return Err(Error::Index { index, n });
        }
        answers.push(t);
    }
    Ok(TripletSet { n, answers })
}

pub fn write_triplets(set: &TripletSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_triplets(set)).map_err(|source| Error::File {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_triplets(path: impl AsRef<Path>) -> Result<TripletSet> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::File {
        path: path.to_path_buf(),
        source,
    })?;
    parse_triplets(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand_distr::{Distribution, Uniform};

    fn line(xs: &[f64]) -> Embedding {
        Embedding::from_vec(xs.len(), 1, xs.to_vec()).unwrap()
    }

    fn random_points(n: usize, d: usize, seed: u64) -> Embedding {
        let mut r = rng::from_seed(seed);
        let u = Uniform::new(0.0, 1.0).unwrap();
        Embedding::from_vec(n, d, (0..n * d).map(|_| u.sample(&mut r)).collect()).unwrap()
    }

    #[test]
    fn collinear_points_force_orientations() {
        let s = all_true_triplets(&line(&[0.0, 1.0, 3.0])).unwrap();
        let expected = [
            Triplet::new(0, 1, 2).unwrap(),
            Triplet::new(1, 0, 2).unwrap(),
            Triplet::new(2, 1, 0).unwrap(),
        ];
        assert_eq!(s.answers(), &expected[..]);
    }

    #[test]
    fn true_triplet_count() {
        for n in 3..8 {
            let x = random_points(n, 2, n as u64);
            assert_eq!(
                all_true_triplets(&x).unwrap().len(),
                n * (n - 1) * (n - 2) / 2
            );
        }
    }

    #[test]
    fn true_triplets_recheck_against_brute_force_distances() {
        let x = random_points(10, 2, 11);
        for t in &all_true_triplets(&x).unwrap() {
            let dij = ((x.row(t.anchor)[0] - x.row(t.near)[0]).powi(2)
                + (x.row(t.anchor)[1] - x.row(t.near)[1]).powi(2))
            .sqrt();
            let dil = ((x.row(t.anchor)[0] - x.row(t.far)[0]).powi(2)
                + (x.row(t.anchor)[1] - x.row(t.far)[1]).powi(2))
            .sqrt();
            assert!(dij < dil);
        }
    }

    #[test]
    fn ties_are_rejected() {
        let err = all_true_triplets(&line(&[0.0, -1.0, 1.0])).unwrap_err();
        assert!(matches!(err, Error::Tie { anchor: 0, .. }));
    }

    #[test]
    fn noiseless_answer_is_truth() {
        let mut r = rng::from_seed(1);
        for _ in 0..10 {
            assert_eq!(
                answer_comparison(1.0, 2.0, NoiseModel::noiseless(), &mut r).unwrap(),
                Orientation::FirstCloser
            );
        }
    }

    #[test]
    fn zero_distance_with_noise_is_domain_error() {
        let mut r = rng::from_seed(1);
        let noise = NoiseModel::new(0.3).unwrap();
        assert!(matches!(
            answer_comparison(0.0, 1.0, noise, &mut r),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn equal_distances_flip_a_fair_coin() {
        let mut r = rng::from_seed(2);
        let noise = NoiseModel::new(0.5).unwrap();
        let trials = 200_000;
        let first = (0..trials)
            .filter(|_| {
                answer_comparison(1.3, 1.3, noise, &mut r).unwrap() == Orientation::FirstCloser
            })
            .count();
        let p = first as f64 / trials as f64;
        // 3 sigma of a Bernoulli(0.5) mean
        assert!((p - 0.5).abs() < 3.0 * (0.25 / trials as f64).sqrt(), "{p}");
    }

    #[test]
    fn flip_probability_matches_monte_carlo() {
        // log z1 - log z2 ~ N(-1, 2); P(z1 < z2) = Phi(1 / sqrt 2)
        let noise = NoiseModel::new(1.0).unwrap();
        let analytic = noise.prob_first_closer(1.0, std::f64::consts::E);
        assert!((analytic - 0.760_249).abs() < 1e-5, "{analytic}");
        let mut r = rng::from_seed(3);
        let trials = 1_000_000;
        let first = (0..trials)
            .filter(|_| {
                answer_comparison(1.0, std::f64::consts::E, noise, &mut r).unwrap()
                    == Orientation::FirstCloser
            })
            .count();
        let p = first as f64 / trials as f64;
        assert!((p - analytic).abs() < 0.002, "{p} vs {analytic}");
    }

    #[test]
    fn flip_probability_depends_only_on_ratio() {
        let noise = NoiseModel::new(0.4).unwrap();
        let a = noise.prob_first_closer(1.0, 1.5);
        let b = noise.prob_first_closer(100.0, 150.0);
        assert!((a - b).abs() < 1e-14);
        assert!((noise.prob_first_closer(1.5, 1.0) + a - 1.0).abs() < 1e-14);
    }

    #[test]
    fn full_noiseless_draw_agrees_with_truth() {
        let x = random_points(8, 2, 5);
        let truth: std::collections::HashSet<Triplet> =
            all_true_triplets(&x).unwrap().iter().copied().collect();
        let mut r = rng::from_seed(9);
        let s = sample_noisy_triplets(
            &x,
            TripletDraw::Fraction(1.0),
            NoiseModel::noiseless(),
            &mut r,
        )
        .unwrap();
        assert_eq!(s.len(), comparison_count(8));
        assert!(s.iter().all(|t| truth.contains(t)));
    }

    #[test]
    fn count_draw_is_with_replacement() {
        let x = random_points(20, 2, 6);
        let mut r = rng::from_seed(10);
        let s = sample_noisy_triplets(
            &x,
            TripletDraw::Count(5000),
            NoiseModel::noiseless(),
            &mut r,
        )
        .unwrap();
        assert_eq!(s.len(), 5000);
        let distinct: std::collections::HashSet<_> = s.iter().collect();
        assert!(distinct.len() < 5000);
    }

    #[test]
    fn random_comparisons_cover_all_uniformly() {
        let n = 5;
        let total = comparison_count(n);
        let mut counts = std::collections::HashMap::new();
        let mut r = rng::from_seed(4);
        let draws = 60_000;
        for _ in 0..draws {
            *counts.entry(random_comparison(n, &mut r)).or_insert(0usize) += 1;
        }
        assert_eq!(counts.len(), total);
        let expect = draws as f64 / total as f64;
        for &c in counts.values() {
            assert!((c as f64 - expect).abs() < 5.0 * expect.sqrt());
        }
    }

    #[test]
    fn noisy_error_rate_matches_analytic_average() {
        let x = random_points(50, 2, 12);
        let dist = x.distance_matrix();
        let noise = NoiseModel::new(0.1).unwrap();
        let mut r = rng::from_seed(13);
        let s = sample_noisy_triplets(&x, TripletDraw::Count(40_000), noise, &mut r).unwrap();
        let mut expected_errors = 0.0;
        let mut var = 0.0;
        let mut errors = 0usize;
        for t in &s {
            let c = t.comparison();
            let (a, b) = (dist.get(c.anchor, c.first), dist.get(c.anchor, c.second));
            let p_first = noise.prob_first_closer(a, b);
            let p_wrong = if a < b { 1.0 - p_first } else { p_first };
            expected_errors += p_wrong;
            var += p_wrong * (1.0 - p_wrong);
            if dist.get(t.anchor, t.near) > dist.get(t.anchor, t.far) {
                errors += 1;
            }
        }
        assert!(
            (errors as f64 - expected_errors).abs() < 3.0 * var.sqrt(),
            "{errors} vs {expected_errors}"
        );
    }

    #[test]
    fn agreement_of_truth_and_its_reverse() {
        let x = random_points(9, 3, 7);
        let d = x.distance_matrix();
        let s = all_true_triplets(&x).unwrap();
        assert_eq!(agreement_fraction(&s, &d), 1.0);
        assert_eq!(agreement_fraction(&s.reversed(), &d), 0.0);
    }

    #[test]
    fn agreement_matches_recount() {
        let x = random_points(7, 2, 8);
        let y = random_points(7, 2, 9);
        let s = all_true_triplets(&x).unwrap();
        let dy = y.distance_matrix();
        let mut ok = 0;
        for t in &s {
            if y.sq_dist(t.anchor, t.near) < y.sq_dist(t.anchor, t.far) {
                ok += 1;
            }
        }
        assert!((agreement_fraction(&s, &dy) - ok as f64 / s.len() as f64).abs() < 1e-15);
    }

    #[test]
    fn file_format_round_trip_and_errors() {
        let empty = TripletSet::new(4);
        assert_eq!(format_triplets(&empty), "n=4\n");
        assert_eq!(parse_triplets(&format_triplets(&empty)).unwrap(), empty);

        let s = TripletSet::from_answers(
            6,
            vec![
                Triplet::new(0, 1, 2).unwrap(),
                Triplet::new(0, 1, 2).unwrap(),
                Triplet::new(5, 3, 4).unwrap(),
            ],
        )
        .unwrap();
        let text = format_triplets(&s);
        assert_eq!(text.lines().count(), 4);
        assert_eq!(parse_triplets(&text).unwrap(), s);

        match parse_triplets("n=6\n0,1,2\n2,2,5\n") {
            Err(Error::Parse { line: 3, .. }) => {}
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse_triplets("n=3\n0,1,3\n"),
            Err(Error::Index { index: 3, n: 3 })
        ));
        assert!(matches!(
            parse_triplets("0,1,2\n"),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn file_io_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.txt");
        let s = TripletSet::from_answers(3, vec![Triplet::new(2, 0, 1).unwrap()]).unwrap();
        write_triplets(&s, &path).unwrap();
        assert_eq!(read_triplets(&path).unwrap(), s);
    }

    proptest::proptest! {
        #[test]
        fn format_parse_identity(n in 3usize..30, raw in proptest::collection::vec((0usize..1000, 0usize..1000, 0usize..1000), 0..40)) {
            let answers: Vec<Triplet> = raw
                .into_iter()
                .filter_map(|(a, b, c)| Triplet::new(a % n, b % n, c % n).ok())
                .collect();
            let s = TripletSet::from_answers(n, answers).unwrap();
            proptest::prop_assert_eq!(parse_triplets(&format_triplets(&s)).unwrap(), s);
        }

        #[test]
        fn complementary_answer_probabilities(a in 0.01f64..50.0, b in 0.01f64..50.0, sigma in 0.01f64..3.0) {
            let noise = NoiseModel::new(sigma).unwrap();
            let s = noise.prob_first_closer(a, b) + noise.prob_first_closer(b, a);
            proptest::prop_assert!((s - 1.0).abs() < 1e-14);
        }
    }
}
