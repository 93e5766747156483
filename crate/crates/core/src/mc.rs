//! The Monte Carlo rater-subset experiment.
//!
//! One team of `k` raters is fixed (given, or drawn from the root stream).
//! Each of `m` repetitions shuffles the team into a random order and records
//! the agreement of every prefix of length `2..=k`. Repetition `run_id` draws
//! from its own child stream of the seed, so the result does not depend on
//! execution order or on how many threads run the repetitions.

use std::collections::HashSet;

use rand::seq::{index, SliceRandom};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::agreement::{fleiss_kappa_subset, CategoryCounts};
use crate::corpus::AnnotationMatrix;
use crate::error::{Error, Result};
use crate::rng::{child_stream, root_stream};
use crate::stats::Summary;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TeamSelection {
    /// The team, by rater identifier.
    Fixed(Vec<String>),
    /// `k` raters drawn uniformly without replacement.
    Sample,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExperimentConfig {
    pub k: usize,
    pub m: usize,
    pub seed: u64,
    pub team_selection: TeamSelection,
}

impl ExperimentConfig {
    pub fn sampled(k: usize, m: usize, seed: u64) -> Self {
        ExperimentConfig {
            k,
            m,
            seed,
            team_selection: TeamSelection::Sample,
        }
    }

    fn validate(&self, matrix: &AnnotationMatrix) -> Result<()> {
        check_team_size(matrix, self.k)?;
        if self.m < 1 {
            return Err(Error::out_of_range("m", self.m, "at least 1"));
        }
        if let TeamSelection::Fixed(ids) = &self.team_selection {
            if ids.len() != self.k {
                return Err(Error::out_of_range(
                    "team size",
                    ids.len(),
                    format!("fixed team must have exactly k = {} members", self.k),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub run_id: usize,
    /// Rater indices into the matrix, in draw order.
    pub ordering: Vec<usize>,
    /// `kappas[n - 2]` is the agreement of the first `n` raters of `ordering`.
    pub kappas: Vec<f64>,
}

impl RunRecord {
    pub fn kappa_at(&self, n: usize) -> f64 {
        self.kappas[n - 2]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSet {
    pub config: ExperimentConfig,
    /// Rater indices of the team, ascending.
    pub team: Vec<usize>,
    pub team_ids: Vec<String>,
    pub kappa_hat: f64,
    pub runs: Vec<RunRecord>,
}

impl RunSet {
    pub fn k(&self) -> usize {
        self.team.len()
    }

    /// The `m` values of kappa_n, in run order.
    pub fn column(&self, n: usize) -> Vec<f64> {
        self.runs.iter().map(|r| r.kappa_at(n)).collect()
    }

    /// Keep only the first `m` runs.
    pub fn truncated(&self, m: usize) -> RunSet {
        let mut out = self.clone();
        out.runs.truncate(m);
        out.config.m = out.runs.len();
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SubsetRow {
    pub n: usize,
    #[serde(flatten)]
    pub summary: Summary,
}

/// Per-subset-size summaries of a run set, rows for `n = 2..=k`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubsetStats {
    pub k: usize,
    pub rows: Vec<SubsetRow>,
}

impl SubsetStats {
    pub fn row(&self, n: usize) -> Option<&SubsetRow> {
        self.rows.iter().find(|r| r.n == n)
    }
}

fn check_team_size(matrix: &AnnotationMatrix, k: usize) -> Result<()> {
    if k < 3 || k > matrix.n_raters() {
        return Err(Error::out_of_range(
            "k",
            k,
            format!("team size must lie in 3..={}", matrix.n_raters()),
        ));
    }
    Ok(())
}

/// Draw `k` distinct raters uniformly; returned ascending.
pub fn sample_team<R: Rng + ?Sized>(
    matrix: &AnnotationMatrix,
    k: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    check_team_size(matrix, k)?;
    let mut team = index::sample(rng, matrix.n_raters(), k).into_vec();
    team.sort_unstable();
    Ok(team)
}

/// Agreement of every prefix of `ordering` of length `2..=k`.
pub fn prefix_kappas(matrix: &AnnotationMatrix, team: &[usize], ordering: &[usize]) -> Result<Vec<f64>> {
    if ordering.len() != team.len() {
        return Err(Error::NotAPermutation);
    }
    let members: HashSet<usize> = team.iter().copied().collect();
    let mut seen = HashSet::with_capacity(ordering.len());
    if members.len() != team.len() || !ordering.iter().all(|r| members.contains(r) && seen.insert(*r)) {
        return Err(Error::NotAPermutation);
    }
    if team.len() < 2 {
        return Err(Error::out_of_range("team size", team.len(), "at least 2"));
    }
    if let Some(&bad) = team.iter().find(|&&r| r >= matrix.n_raters()) {
        return Err(Error::UnknownRater(format!("#{bad}")));
    }
    Ok(prefix_kappas_unchecked(matrix, ordering))
}

fn prefix_kappas_unchecked(matrix: &AnnotationMatrix, ordering: &[usize]) -> Vec<f64> {
    let mut counts = CategoryCounts::new(matrix.n_items(), matrix.n_categories());
    let mut out = Vec::with_capacity(ordering.len().saturating_sub(1));
    for (pos, &r) in ordering.iter().enumerate() {
        counts.add_rater(matrix.rater_labels(r));
        if pos >= 1 {
            out.push(counts.kappa().kappa);
        }
    }
    out
}

fn resolve_team(matrix: &AnnotationMatrix, config: &ExperimentConfig) -> Result<Vec<usize>> {
    match &config.team_selection {
        TeamSelection::Sample => sample_team(matrix, config.k, &mut root_stream(config.seed)),
        TeamSelection::Fixed(ids) => {
            let mut team = ids
                .iter()
                .map(|id| matrix.rater_index(id).ok_or_else(|| Error::UnknownRater(id.clone())))
                .collect::<Result<Vec<_>>>()?;
            team.sort_unstable();
            team.dedup();
            if team.len() != ids.len() {
                return Err(Error::InvalidMatrix("fixed team lists a rater twice".into()));
            }
            Ok(team)
        }
    }
}

pub fn run_experiment(matrix: &AnnotationMatrix, config: &ExperimentConfig) -> Result<RunSet> {
    config.validate(matrix)?;
    let team = resolve_team(matrix, config)?;
    let kappa_hat = fleiss_kappa_subset(matrix, &team).kappa;
    let runs: Vec<RunRecord> = (1..=config.m)
        .into_par_iter()
        .map(|run_id| {
            let mut rng = child_stream(config.seed, run_id as u64);
            let mut ordering = team.clone();
            ordering.shuffle(&mut rng);
            let kappas = prefix_kappas_unchecked(matrix, &ordering);
            RunRecord {
                run_id,
                ordering,
                kappas,
            }
        })
        .collect();
    let team_ids = team.iter().map(|&r| matrix.raters()[r].clone()).collect();
    Ok(RunSet {
        config: config.clone(),
        team,
        team_ids,
        kappa_hat,
        runs,
    })
}

pub fn summarize(runs: &RunSet) -> Result<SubsetStats> {
    if runs.runs.is_empty() {
        return Err(Error::Empty("run set has no runs"));
    }
    let k = runs.k();
    let rows = (2..=k)
        .map(|n| SubsetRow {
            n,
            summary: Summary::of(&runs.column(n)).expect("non-empty column"),
        })
        .collect();
    Ok(SubsetStats { k, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{generate_synthetic, Label};

    fn ids(prefix: &str, n: usize) -> Vec<String> {
        (1..=n).map(|i| format!("{prefix}{i}")).collect()
    }

    #[test]
    fn full_team_is_forced() {
        let m = generate_synthetic(6, 20, 3, 0.5, 1).unwrap();
        for seed in 0..5 {
            assert_eq!(sample_team(&m, 6, &mut root_stream(seed)).unwrap(), vec![0, 1, 2, 3, 4, 5]);
        }
    }

    #[test]
    fn team_size_guards() {
        let m = generate_synthetic(6, 20, 3, 0.5, 1).unwrap();
        assert!(sample_team(&m, 2, &mut root_stream(0)).is_err());
        assert!(sample_team(&m, 7, &mut root_stream(0)).is_err());
    }

    #[test]
    fn sampled_team_is_deterministic() {
        let m = generate_synthetic(45, 10, 3, 0.5, 1).unwrap();
        let a = sample_team(&m, 7, &mut root_stream(1)).unwrap();
        let b = sample_team(&m, 7, &mut root_stream(1)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 7);
        assert!(a.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn sampled_team_inclusion_is_uniform() {
        let m = generate_synthetic(45, 2, 3, 0.5, 1).unwrap();
        let mut hits = [0u32; 45];
        let seeds = 10_000;
        for seed in 0..seeds {
            for r in sample_team(&m, 7, &mut root_stream(seed)).unwrap() {
                hits[r] += 1;
            }
        }
        let expected = 7.0 / 45.0;
        for (r, &h) in hits.iter().enumerate() {
            let freq = f64::from(h) / seeds as f64;
            assert!((freq - expected).abs() <= 0.02, "rater {r}: {freq}");
        }
    }

    #[test]
    fn unanimous_team() {
        let m = AnnotationMatrix::from_tokens(
            ids("p", 3),
            ids("s", 3),
            &vec![vec!["positive", "neutral", "negative"]; 3],
        )
        .unwrap();
        assert_eq!(prefix_kappas(&m, &[0, 1, 2], &[2, 0, 1]).unwrap(), vec![1.0, 1.0]);
    }

    #[test]
    fn prefix_depends_on_who_comes_first() {
        // raters 0 and 1 agree everywhere, rater 2 is uniform noise
        let noise = generate_synthetic(2, 60, 3, 1.0, 11).unwrap();
        let base = generate_synthetic(2, 60, 3, 0.0, 12).unwrap();
        let rows = vec![
            base.rater_labels(0).to_vec(),
            base.rater_labels(0).to_vec(),
            noise.rater_labels(0).to_vec(),
        ];
        let m = AnnotationMatrix::new(ids("p", 3), base.items().to_vec(), base.categories().to_vec(), rows).unwrap();
        let team = [0, 1, 2];
        let agreeing = prefix_kappas(&m, &team, &[0, 1, 2]).unwrap();
        let noisy_first = prefix_kappas(&m, &team, &[2, 0, 1]).unwrap();
        let noisy_first2 = prefix_kappas(&m, &team, &[2, 1, 0]).unwrap();
        assert_eq!(agreeing[0], 1.0);
        assert!(noisy_first[0] < 1.0);
        assert!(noisy_first2[0] < 1.0);
        assert_eq!(agreeing[1], noisy_first[1]);
        assert_eq!(agreeing[1], noisy_first2[1]);
    }

    #[test]
    fn ordering_must_permute_team() {
        let m = generate_synthetic(5, 10, 3, 0.5, 1).unwrap();
        assert!(matches!(prefix_kappas(&m, &[0, 1, 2], &[0, 1, 3]), Err(Error::NotAPermutation)));
        assert!(matches!(prefix_kappas(&m, &[0, 1, 2], &[0, 1]), Err(Error::NotAPermutation)));
        assert!(matches!(prefix_kappas(&m, &[0, 1, 2], &[0, 1, 1]), Err(Error::NotAPermutation)));
    }

    #[test]
    fn single_run() {
        let m = generate_synthetic(8, 30, 3, 0.5, 1).unwrap();
        let rs = run_experiment(&m, &ExperimentConfig::sampled(5, 1, 3)).unwrap();
        assert_eq!(rs.runs.len(), 1);
        assert_eq!(rs.runs[0].kappas.len(), 4);
        assert_eq!(rs.runs[0].run_id, 1);
    }

    #[test]
    fn constant_tail_and_determinism() {
        let m = generate_synthetic(12, 40, 3, 0.5, 2).unwrap();
        let cfg = ExperimentConfig::sampled(12, 200, 42);
        let a = run_experiment(&m, &cfg).unwrap();
        let b = run_experiment(&m, &cfg).unwrap();
        assert_eq!(a, b);
        for r in &a.runs {
            assert_eq!(r.kappa_at(12).to_bits(), a.kappa_hat.to_bits());
        }
        let stats = summarize(&a).unwrap();
        let last = stats.row(12).unwrap().summary;
        assert_eq!((last.min, last.max, last.mean, last.std), (a.kappa_hat, a.kappa_hat, a.kappa_hat, 0.0));
        assert_eq!(stats.rows.len(), 11);
    }

    #[test]
    fn fixed_team() {
        let m = generate_synthetic(10, 30, 3, 0.5, 2).unwrap();
        let cfg = ExperimentConfig {
            k: 3,
            m: 10,
            seed: 1,
            team_selection: TeamSelection::Fixed(vec!["r09".into(), "r02".into(), "r05".into()]),
        };
        let rs = run_experiment(&m, &cfg).unwrap();
        assert_eq!(rs.team, vec![1, 4, 8]);
        assert_eq!(rs.team_ids, vec!["r02", "r05", "r09"]);
        let bad = ExperimentConfig {
            team_selection: TeamSelection::Fixed(vec!["r09".into(), "nobody".into(), "r05".into()]),
            ..cfg.clone()
        };
        assert!(matches!(run_experiment(&m, &bad), Err(Error::UnknownRater(_))));
        let wrong_size = ExperimentConfig { k: 4, ..cfg };
        assert!(run_experiment(&m, &wrong_size).is_err());
    }

    #[test]
    fn prefix_locality() {
        let m = generate_synthetic(8, 30, 3, 0.5, 2).unwrap();
        let team: Vec<usize> = (0..8).collect();
        let ordering = [3, 6, 0, 7, 1, 5, 2, 4];
        let before = prefix_kappas(&m, &team, &ordering).unwrap();
        // mutate the rater at 1-based position p = 4
        let p = 4;
        let flipped: Vec<Label> = m
            .rater_labels(ordering[p - 1])
            .iter()
            .map(|l| Label((l.0 + 1) % 3))
            .collect();
        let m2 = m.with_rater_labels(ordering[p - 1], &flipped).unwrap();
        let after = prefix_kappas(&m2, &team, &ordering).unwrap();
        for n in 2..p {
            assert_eq!(before[n - 2], after[n - 2]);
        }
        assert!((p..=8).any(|n| before[n - 2] != after[n - 2]));
    }

    #[test]
    fn min_is_monotone_in_m() {
        let m = generate_synthetic(10, 30, 3, 0.5, 2).unwrap();
        let big = run_experiment(&m, &ExperimentConfig::sampled(10, 400, 9)).unwrap();
        let small = run_experiment(&m, &ExperimentConfig::sampled(10, 100, 9)).unwrap();
        assert_eq!(big.truncated(100), small);
        let s_big = summarize(&big).unwrap();
        let s_small = summarize(&small).unwrap();
        for (a, b) in s_big.rows.iter().zip(&s_small.rows) {
            assert!(a.summary.min <= b.summary.min);
        }
    }

    #[test]
    fn summarize_three_runs() {
        let m = generate_synthetic(3, 10, 3, 0.5, 2).unwrap();
        let mut rs = run_experiment(&m, &ExperimentConfig::sampled(3, 3, 1)).unwrap();
        for (r, v) in rs.runs.iter_mut().zip([0.1, 0.2, 0.6]) {
            r.kappas[0] = v;
        }
        let s = summarize(&rs).unwrap();
        let row = s.row(2).unwrap().summary;
        assert_eq!(row.median, 0.2);
        assert!((row.mean - 0.3).abs() < 1e-15);
        rs.runs.clear();
        assert!(summarize(&rs).is_err());
    }
}
