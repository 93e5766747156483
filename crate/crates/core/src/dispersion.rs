//! Coefficient of variation of kappa_n across random teams.
//!
//! For each of `j` teams a fresh team of `k` raters is drawn and the Monte
//! Carlo experiment is run with `m` repetitions. Per subset size `n` the
//! team's mean and sample standard deviation of kappa_n are folded into
//! running means over teams:
//!
//! ```text
//! mu_bar    <- ((t - 1) mu_bar    + mu_t)    / t
//! sigma_bar <- ((t - 1) sigma_bar + sigma_t) / t
//! cv_n       = sigma_bar / mu_bar
//! ```
//!
//! `sigma_bar` is the arithmetic mean of per-team standard deviations, not a
//! pooled standard deviation.

use rayon::prelude::*;
use serde::Serialize;

use crate::agreement::fleiss_kappa;
use crate::corpus::AnnotationMatrix;
use crate::error::{Error, Result};
use crate::mc::{run_experiment, summarize, ExperimentConfig};
use crate::rng::derive_seed;

/// `|mu_bar|` at or below this leaves cv undefined.
pub const MU_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VariationConfig {
    pub k: usize,
    pub m: usize,
    pub j: usize,
    pub seed: u64,
}

impl Default for VariationConfig {
    fn default() -> Self {
        VariationConfig {
            k: 7,
            m: 100,
            j: 100,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VariationRow {
    pub n: usize,
    pub mu_bar: f64,
    pub sigma_bar: f64,
    /// `None` when `mu_bar` is within [`MU_EPS`] of zero.
    pub cv: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariationTable {
    pub k: usize,
    pub rows: Vec<VariationRow>,
    /// kappa_hat of each sampled team, in team order.
    pub team_kappas: Vec<f64>,
    pub mean_team_kappa: f64,
    /// kappa of the whole matrix.
    pub full_kappa: f64,
}

impl VariationTable {
    pub fn row(&self, n: usize) -> Option<&VariationRow> {
        self.rows.iter().find(|r| r.n == n)
    }

    pub fn cv(&self, n: usize) -> Option<f64> {
        self.row(n).and_then(|r| r.cv)
    }
}

/// Per-team moments: `(kappa_hat, [(mu_n, sigma_n); n = 2..=k])`.
fn team_moments(matrix: &AnnotationMatrix, config: &VariationConfig, team: usize) -> Result<(f64, Vec<(f64, f64)>)> {
    let exp = ExperimentConfig::sampled(config.k, config.m, derive_seed(config.seed, team as u64));
    let runs = run_experiment(matrix, &exp)?;
    let stats = summarize(&runs)?;
    Ok((
        runs.kappa_hat,
        stats.rows.iter().map(|r| (r.summary.mean, r.summary.std)).collect(),
    ))
}

pub fn run_variation(matrix: &AnnotationMatrix, config: &VariationConfig) -> Result<VariationTable> {
    if config.k < 3 || config.k > matrix.n_raters() {
        return Err(Error::out_of_range(
            "k",
            config.k,
            format!("team size must lie in 3..={}", matrix.n_raters()),
        ));
    }
    if config.m < 1 {
        return Err(Error::out_of_range("m", config.m, "at least 1"));
    }
    if config.j < 1 {
        return Err(Error::out_of_range("j", config.j, "at least 1"));
    }
    let per_team = (1..=config.j)
        .into_par_iter()
        .map(|t| team_moments(matrix, config, t))
        .collect::<Result<Vec<_>>>()?;

    let sizes = config.k - 1;
    let mut mu_bar = vec![0.0; sizes];
    let mut sigma_bar = vec![0.0; sizes];
    for (t, (_, moments)) in per_team.iter().enumerate() {
        let t = (t + 1) as f64;
        for (i, &(mu, sigma)) in moments.iter().enumerate() {
            mu_bar[i] = ((t - 1.0) * mu_bar[i] + mu) / t;
            sigma_bar[i] = ((t - 1.0) * sigma_bar[i] + sigma) / t;
        }
    }
    let rows = (0..sizes)
        .map(|i| VariationRow {
            n: i + 2,
            mu_bar: mu_bar[i],
            sigma_bar: sigma_bar[i],
            cv: (mu_bar[i].abs() > MU_EPS).then(|| sigma_bar[i] / mu_bar[i]),
        })
        .collect();
    let team_kappas: Vec<f64> = per_team.iter().map(|(kh, _)| *kh).collect();
    let mean_team_kappa = team_kappas.iter().sum::<f64>() / team_kappas.len() as f64;
    Ok(VariationTable {
        k: config.k,
        rows,
        team_kappas,
        mean_team_kappa,
        full_kappa: fleiss_kappa(matrix).kappa,
    })
}

/// Empirical-rule coverage level for `z` standard deviations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Level {
    OneSigma,
    TwoSigma,
    ThreeSigma,
}

impl Level {
    pub fn from_z(z: u8) -> Result<Level> {
        match z {
            1 => Ok(Level::OneSigma),
            2 => Ok(Level::TwoSigma),
            3 => Ok(Level::ThreeSigma),
            _ => Err(Error::out_of_range("z", z, "must be 1, 2 or 3")),
        }
    }

    pub fn z(self) -> u8 {
        match self {
            Level::OneSigma => 1,
            Level::TwoSigma => 2,
            Level::ThreeSigma => 3,
        }
    }

    /// Approximate coverage in percent.
    pub fn percent(self) -> f64 {
        match self {
            Level::OneSigma => 68.27,
            Level::TwoSigma => 95.45,
            Level::ThreeSigma => 99.73,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Level::OneSigma => "68.27%",
            Level::TwoSigma => "95.45%",
            Level::ThreeSigma => "99.73%",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntervalEstimate {
    pub level: Level,
    pub lower: f64,
    pub upper: f64,
}

/// `kappa_hat * (1 -/+ z cv)`, unclamped.
pub fn interval_estimate(kappa_hat: f64, cv: f64, z: u8) -> Result<IntervalEstimate> {
    let level = Level::from_z(z)?;
    if !(cv >= 0.0) {
        return Err(Error::out_of_range("cv", cv, "must be non-negative"));
    }
    let half = f64::from(z) * cv * kappa_hat;
    Ok(IntervalEstimate {
        level,
        lower: kappa_hat - half,
        upper: kappa_hat + half,
    })
}

/// `cv * 100` rounded to two decimals.
pub fn cv_percent(cv: f64) -> f64 {
    (cv * 100.0 * 100.0).round() / 100.0
}
