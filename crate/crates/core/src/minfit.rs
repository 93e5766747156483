//! Minimum-agreement model.
//!
//! The per-subset-size minimum of kappa_n is modelled by the rational family
//!
//! ```text
//! f(n) = a (n - d) / (b + n - d) + c
//! ```
//!
//! fitted in stages that progressively pin regressors: `S4` leaves all four
//! free, `S3` fixes `d = 2`, `S2` also ties `c = kappa_hat - a`, `S1` also
//! fixes `a = 2 kappa_hat`, and `S0` also fixes `b = k / 10`, which is the
//! closed form
//!
//! ```text
//! min kappa_n ~ 2 kappa_hat (n - 2) / (k/10 + n - 2) - kappa_hat
//! ```
//!
//! Note that `f = (a + c) - a b / (n + b - d)`, so in `S4` the four regressors
//! are not separately identifiable: only `a + c`, `a b` and `b - d` are.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mc::SubsetStats;

const POLE_EPS: f64 = 1e-12;
const MAX_ITERATIONS: usize = 200;
const REL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Stage {
    S4,
    S3,
    S2,
    S1,
    S0,
}

impl Stage {
    pub const ALL: [Stage; 5] = [Stage::S4, Stage::S3, Stage::S2, Stage::S1, Stage::S0];

    /// Which of `a, b, c, d` the stage leaves free.
    pub fn free(self) -> [bool; 4] {
        match self {
            Stage::S4 => [true, true, true, true],
            Stage::S3 => [true, true, true, false],
            Stage::S2 => [true, true, false, false],
            Stage::S1 => [false, true, false, false],
            Stage::S0 => [false, false, false, false],
        }
    }

    pub fn free_count(self) -> usize {
        self.free().iter().filter(|&&f| f).count()
    }

    /// Overwrite the stage-fixed regressors with their mandated values.
    pub fn resolve(self, params: Regressors, kappa_hat: f64, k: usize) -> Regressors {
        let mut p = params;
        if self != Stage::S4 {
            p.d = 2.0;
        }
        if matches!(self, Stage::S1 | Stage::S0) {
            p.a = 2.0 * kappa_hat;
        }
        if self == Stage::S0 {
            p.b = k as f64 / 10.0;
        }
        if matches!(self, Stage::S2 | Stage::S1 | Stage::S0) {
            p.c = kappa_hat - p.a;
        }
        p
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::S4 => "S4",
            Stage::S3 => "S3",
            Stage::S2 => "S2",
            Stage::S1 => "S1",
            Stage::S0 => "S0",
        };
        f.write_str(s)
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "S4" => Ok(Stage::S4),
            "S3" => Ok(Stage::S3),
            "S2" => Ok(Stage::S2),
            "S1" => Ok(Stage::S1),
            "S0" => Ok(Stage::S0),
            other => Err(Error::UnknownStage(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Regressors {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Regressors {
    fn to_array(self) -> [f64; 4] {
        [self.a, self.b, self.c, self.d]
    }

    fn from_array(v: [f64; 4]) -> Self {
        Regressors {
            a: v[0],
            b: v[1],
            c: v[2],
            d: v[3],
        }
    }

    /// `a (n - d) / (b + n - d) + c`.
    pub fn eval(&self, n: f64) -> Result<f64> {
        let den = self.b + n - self.d;
        if den.abs() < POLE_EPS {
            return Err(Error::Pole(n));
        }
        Ok(self.a * (n - self.d) / den + self.c)
    }

    /// True when the denominator keeps one sign (and stays clear of zero)
    /// over the whole interval `[lo, hi]`.
    fn pole_free_on(&self, lo: f64, hi: f64) -> bool {
        let at_lo = self.b + lo - self.d;
        let at_hi = self.b + hi - self.d;
        at_lo.is_finite()
            && at_hi.is_finite()
            && at_lo.signum() == at_hi.signum()
            && at_lo.abs() >= POLE_EPS
            && at_hi.abs() >= POLE_EPS
    }
}

/// Closed-form predicted minimum agreement of `n` out of `k` raters.
pub fn eval_min_model(n: usize, k: usize, kappa_hat: f64) -> Result<f64> {
    if k < 3 {
        return Err(Error::out_of_range("k", k, "at least 3"));
    }
    if n < 2 || n > k {
        return Err(Error::out_of_range("n", n, format!("must lie in 2..={k}")));
    }
    let n = n as f64;
    Ok(2.0 * kappa_hat * (n - 2.0) / (k as f64 / 10.0 + n - 2.0) - kappa_hat)
}

/// Evaluate the stage's model at `n`; fixed regressors in `params` are
/// replaced by their stage values first.
pub fn stage_model(
    stage: Stage,
    n: f64,
    params: Regressors,
    kappa_hat: f64,
    k: usize,
) -> Result<f64> {
    stage.resolve(params, kappa_hat, k).eval(n)
}

/// Coefficient of determination `1 - SS_res / SS_tot`.
pub fn r_squared(observed: &[f64], predicted: &[f64]) -> Result<f64> {
    if observed.len() != predicted.len() {
        return Err(Error::LengthMismatch(observed.len(), predicted.len()));
    }
    if observed.is_empty() {
        return Err(Error::Empty("no observations"));
    }
    let mean = observed.iter().sum::<f64>() / observed.len() as f64;
    let ss_tot: f64 = observed.iter().map(|y| (y - mean) * (y - mean)).sum();
    if ss_tot == 0.0 {
        return Err(Error::ZeroVariance);
    }
    let ss_res: f64 = observed
        .iter()
        .zip(predicted)
        .map(|(y, f)| (y - f) * (y - f))
        .sum();
    Ok(1.0 - ss_res / ss_tot)
}

/// `(n, min kappa_n)` pairs for one team.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinPoints {
    points: Vec<(usize, f64)>,
    pub k: usize,
    pub kappa_hat: f64,
}

impl MinPoints {
    pub fn new(points: Vec<(usize, f64)>, k: usize, kappa_hat: f64) -> Result<MinPoints> {
        if points.is_empty() {
            return Err(Error::Empty("no minimum points"));
        }
        if k < 3 {
            return Err(Error::out_of_range("k", k, "at least 3"));
        }
        if let Some(&(n, _)) = points.iter().find(|(n, _)| *n < 2 || *n > k) {
            return Err(Error::out_of_range("n", n, format!("must lie in 2..={k}")));
        }
        if points.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::DegeneratePoints("n values must be strictly increasing".into()));
        }
        Ok(MinPoints {
            points,
            k,
            kappa_hat,
        })
    }

    /// Points sampled from the closed-form model at every `n` in `2..=k`.
    pub fn from_model(k: usize, kappa_hat: f64) -> Result<MinPoints> {
        let points = (2..=k)
            .map(|n| eval_min_model(n, k, kappa_hat).map(|y| (n, y)))
            .collect::<Result<Vec<_>>>()?;
        MinPoints::new(points, k, kappa_hat)
    }

    pub fn points(&self) -> &[(usize, f64)] {
        &self.points
    }

    /// The same points without `n = k`.
    pub fn without_last(&self) -> MinPoints {
        MinPoints {
            points: self.points.iter().copied().filter(|&(n, _)| n != self.k).collect(),
            ..self.clone()
        }
    }

    fn y_at(&self, n: usize) -> Option<f64> {
        self.points.iter().find(|p| p.0 == n).map(|p| p.1)
    }

    /// Data-driven starting point: `d = 2`, `c = y(2)`, `a = y(k) - c`,
    /// `b = k / 10`, falling back to the first/last point when `n = 2` or
    /// `n = k` is absent.
    pub fn default_guess(&self) -> Regressors {
        let first = self.y_at(2).unwrap_or(self.points[0].1);
        let last = self.y_at(self.k).unwrap_or(self.points[self.points.len() - 1].1);
        Regressors {
            a: last - first,
            b: self.k as f64 / 10.0,
            c: first,
            d: 2.0,
        }
    }
}

/// Per-`n` minima from run statistics, with `n = k` pinned to `kappa_hat`.
pub fn extract_minima(stats: &SubsetStats, kappa_hat: f64, k: usize) -> Result<MinPoints> {
    let points = (2..=k)
        .map(|n| {
            if n == k {
                return Ok((n, kappa_hat));
            }
            stats
                .row(n)
                .map(|r| (n, r.summary.min))
                .ok_or_else(|| Error::out_of_range("n", n, "missing from stats"))
        })
        .collect::<Result<Vec<_>>>()?;
    MinPoints::new(points, k, kappa_hat)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Regressor {
    pub value: f64,
    pub free: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelFit {
    pub stage: Stage,
    pub a: Regressor,
    pub b: Regressor,
    pub c: Regressor,
    pub d: Regressor,
    pub r2: f64,
    pub sse: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl ModelFit {
    pub fn regressors(&self) -> Regressors {
        Regressors {
            a: self.a.value,
            b: self.b.value,
            c: self.c.value,
            d: self.d.value,
        }
    }

    pub fn predict(&self, n: f64) -> Result<f64> {
        self.regressors().eval(n)
    }
}

struct Problem<'a> {
    points: &'a MinPoints,
    stage: Stage,
    base: Regressors,
    free: Vec<usize>,
}

impl Problem<'_> {
    fn params(&self, theta: &[f64]) -> Regressors {
        let mut all = self.base.to_array();
        for (&slot, &v) in self.free.iter().zip(theta) {
            all[slot] = v;
        }
        self.stage
            .resolve(Regressors::from_array(all), self.points.kappa_hat, self.points.k)
    }

    /// Model values at every point, or `None` if a pole lies in `[2, k]`.
    fn predict(&self, theta: &[f64]) -> Option<Vec<f64>> {
        let p = self.params(theta);
        if !p.pole_free_on(2.0, self.points.k as f64) {
            return None;
        }
        self.points
            .points()
            .iter()
            .map(|&(n, _)| p.eval(n as f64).ok().filter(|v| v.is_finite()))
            .collect()
    }

    fn sse(&self, theta: &[f64]) -> Option<f64> {
        let pred = self.predict(theta)?;
        Some(
            self.points
                .points()
                .iter()
                .zip(pred)
                .map(|(&(_, y), f)| (y - f) * (y - f))
                .sum(),
        )
    }

    /// Forward-difference Jacobian of the model (rows: points).
    fn jacobian(&self, theta: &[f64], at: &[f64]) -> Vec<Vec<f64>> {
        let npts = at.len();
        let mut jac = vec![vec![0.0; theta.len()]; npts];
        for j in 0..theta.len() {
            let h = 1e-6 * theta[j].abs().max(1.0);
            let mut shifted = theta.to_vec();
            shifted[j] += h;
            let (col, step) = match self.predict(&shifted) {
                Some(v) => (v, h),
                None => {
                    shifted[j] = theta[j] - h;
                    match self.predict(&shifted) {
                        Some(v) => (v, -h),
                        None => continue,
                    }
                }
            };
            for i in 0..npts {
                jac[i][j] = (col[i] - at[i]) / step;
            }
        }
        jac
    }
}

/// Least-squares fit of the stage's free regressors to `points`.
///
/// Levenberg–Marquardt with a forward-difference Jacobian, multiplicative
/// damping (÷10 on success, ×10 on rejection) and Marquardt diagonal
/// scaling. Steps that put a pole of the model inside `[2, k]` are rejected.
/// Stops when the relative SSE decrease falls below 1e-12 or after 200
/// iterations; in the latter case the best fit so far is returned with
/// `converged = false`.
pub fn fit(points: &MinPoints, stage: Stage, initial: Option<Regressors>) -> Result<ModelFit> {
    let npts = points.points().len();
    if points.points().iter().all(|p| p.0 == points.points()[0].0) && npts > 1 {
        return Err(Error::DegeneratePoints("all n equal".into()));
    }
    if npts < stage.free_count() + 1 {
        return Err(Error::DegeneratePoints(format!(
            "{npts} points for {} free regressors",
            stage.free_count()
        )));
    }
    let guess = stage.resolve(
        initial.unwrap_or_else(|| points.default_guess()),
        points.kappa_hat,
        points.k,
    );
    let free: Vec<usize> = stage
        .free()
        .iter()
        .enumerate()
        .filter_map(|(i, &f)| f.then_some(i))
        .collect();
    let problem = Problem {
        points,
        stage,
        base: guess,
        free,
    };
    let mut theta: Vec<f64> = problem.free.iter().map(|&i| guess.to_array()[i]).collect();
    let mut sse = problem.sse(&theta).ok_or_else(|| {
        Error::Pole(if guess.pole_free_on(2.0, points.k as f64) { f64::NAN } else { 2.0 - guess.b + guess.d })
    })?;

    let mut converged = theta.is_empty() || sse == 0.0;
    let mut iterations = 0;
    let mut lambda = 1e-3;
    while !converged && iterations < MAX_ITERATIONS {
        iterations += 1;
        let at = problem.predict(&theta).expect("current iterate is pole-free");
        let jac = problem.jacobian(&theta, &at);
        let p = theta.len();
        let mut jtj = vec![vec![0.0; p]; p];
        let mut jtr = vec![0.0; p];
        for (i, row) in jac.iter().enumerate() {
            let resid = points.points()[i].1 - at[i];
            for a in 0..p {
                jtr[a] += row[a] * resid;
                for b in 0..p {
                    jtj[a][b] += row[a] * row[b];
                }
            }
        }
        let diag_floor = jtj
            .iter()
            .enumerate()
            .map(|(i, r)| r[i])
            .fold(0.0_f64, f64::max)
            .max(1e-300)
            * 1e-12;

        let mut accepted = false;
        while lambda <= 1e16 {
            let mut lhs = jtj.clone();
            for i in 0..p {
                lhs[i][i] += lambda * jtj[i][i].max(diag_floor);
            }
            if let Some(delta) = solve(lhs, jtr.clone()) {
                let trial: Vec<f64> = theta.iter().zip(&delta).map(|(t, d)| t + d).collect();
                if let Some(trial_sse) = problem.sse(&trial) {
                    if trial_sse < sse {
                        let rel = (sse - trial_sse) / sse;
                        theta = trial;
                        sse = trial_sse;
                        lambda = (lambda / 10.0).max(1e-12);
                        accepted = true;
                        if rel < REL_TOL || sse == 0.0 {
                            converged = true;
                        }
                        break;
                    }
                }
            }
            lambda *= 10.0;
        }
        if !accepted {
            // no damped step improves on the current point: stationary
            converged = true;
        }
    }

    let params = problem.params(&theta);
    let predicted = problem.predict(&theta).expect("final iterate is pole-free");
    let observed: Vec<f64> = points.points().iter().map(|p| p.1).collect();
    let r2 = r_squared(&observed, &predicted)?;
    let mask = stage.free();
    let reg = |value: f64, i: usize| Regressor {
        value,
        free: mask[i],
    };
    Ok(ModelFit {
        stage,
        a: reg(params.a, 0),
        b: reg(params.b, 1),
        c: reg(params.c, 2),
        d: reg(params.d, 3),
        r2,
        sse,
        converged,
        iterations,
    })
}

/// Gaussian elimination with partial pivoting; `None` if singular.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-300 || !a[pivot][col].is_finite() {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for c in col..n {
                a[row][c] -= f * a[col][c];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|c| a[row][c] * x[c]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}
