//! Derivative-free maximisers: simulated annealing with per-coordinate step adaptation
//! (Corana et al., as popularised by Goffe, Ferrier and Rogers) and a Nelder–Mead polish.
//!
//! Objectives return `None` where they are undefined; such points are always rejected.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnnealOptions {
    /// Initial temperature; chosen from the objective's spread around the start if `None`.
    pub initial_temperature: Option<f64>,
    /// Temperature multiplier per stage.
    pub cooling: f64,
    /// Trials per coordinate between step adjustments (one adjustment per stage).
    pub cycles: usize,
    /// Stop once the stage optimum moved less than `tolerance` for `patience` stages.
    pub tolerance: f64,
    pub patience: usize,
    pub max_stages: usize,
    /// Initial step length per coordinate.
    pub initial_step: f64,
    /// Half-width of the search box around the start.
    pub bound: f64,
    pub restarts: usize,
    pub seed: u64,
    /// Nelder–Mead polish of the best point.
    pub polish: bool,
    pub polish_max_evals: usize,
}

impl Default for AnnealOptions {
    fn default() -> Self {
        Self {
            initial_temperature: None,
            cooling: 0.85,
            cycles: 20,
            tolerance: 1e-3,
            patience: 4,
            max_stages: 120,
            initial_step: 0.5,
            bound: 8.0,
            restarts: 3,
            seed: 1,
            polish: true,
            polish_max_evals: 4000,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RestartOutcome {
    pub start: Vec<f64>,
    pub best: Vec<f64>,
    pub value: f64,
    pub stages: usize,
    pub evaluations: usize,
    pub accepted: usize,
    pub rejected: usize,
    pub failed: usize,
    pub initial_temperature: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnnealResult {
    pub best: Vec<f64>,
    pub value: f64,
    pub best_restart: usize,
    pub restarts: Vec<RestartOutcome>,
    pub polish_gain: f64,
    pub polish_evaluations: usize,
}

impl AnnealResult {
    pub fn evaluations(&self) -> usize {
        self.restarts.iter().map(|r| r.evaluations).sum::<usize>() + self.polish_evaluations
    }
}

/// Maximises `f` from `x0`. Restart 0 starts at `x0`; further restarts start from a
/// uniform draw within `initial_step` of it. Restarts run in parallel; the best value
/// wins, ties going to the lowest restart index.
pub fn anneal<F>(f: F, x0: &[f64], opts: &AnnealOptions) -> Result<AnnealResult>
where
    F: Fn(&[f64]) -> Option<f64> + Sync,
{
    if x0.is_empty() {
        return Err(Error::Config("nothing to optimise".into()));
    }
    if !(opts.cooling > 0.0 && opts.cooling < 1.0) || opts.cycles == 0 || opts.restarts == 0 {
        return Err(Error::Config("cooling must lie in (0,1); cycles and restarts >= 1".into()));
    }
    let outcomes: Vec<RestartOutcome> = (0..opts.restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha20Rng::seed_from_u64(opts.seed);
            rng.set_stream(r as u64);
            let start: Vec<f64> = if r == 0 {
                x0.to_vec()
            } else {
                x0.iter()
                    .map(|x| x + opts.initial_step * (2.0 * rng.gen::<f64>() - 1.0))
                    .collect()
            };
            run_chain(&f, x0, start, opts, &mut rng)
        })
        .collect();
    let mut best_restart = None;
    for (i, o) in outcomes.iter().enumerate() {
        if o.value.is_finite() && best_restart.map_or(true, |b: usize| o.value > outcomes[b].value) {
            best_restart = Some(i);
        }
    }
    let Some(b) = best_restart else {
        return Err(Error::NonConvergence("objective undefined at every visited point".into()));
    };
    if outcomes.iter().all(|o| o.accepted == 0) {
        return Err(Error::NonConvergence("no annealing restart accepted a move".into()));
    }
    let mut best = outcomes[b].best.clone();
    let mut value = outcomes[b].value;
    let (mut gain, mut evals) = (0.0, 0);
    if opts.polish {
        let nm = nelder_mead(&f, &best, 0.05, 1e-10, opts.polish_max_evals);
        evals = nm.evaluations;
        if nm.value > value {
            gain = nm.value - value;
            best = nm.best;
            value = nm.value;
        }
    }
    Ok(AnnealResult {
        best,
        value,
        best_restart: b,
        restarts: outcomes,
        polish_gain: gain,
        polish_evaluations: evals,
    })
}

fn run_chain<F>(f: &F, centre: &[f64], start: Vec<f64>, opts: &AnnealOptions, rng: &mut ChaCha20Rng) -> RestartOutcome
where
    F: Fn(&[f64]) -> Option<f64>,
{
    let n = start.len();
    let lo: Vec<f64> = centre.iter().map(|c| c - opts.bound).collect();
    let hi: Vec<f64> = centre.iter().map(|c| c + opts.bound).collect();
    let mut evaluations = 0usize;
    let mut failed = 0usize;
    let eval = |x: &[f64], evaluations: &mut usize, failed: &mut usize| {
        *evaluations += 1;
        match f(x) {
            Some(v) if v.is_finite() => Some(v),
            _ => {
                *failed += 1;
                None
            }
        }
    };
    let mut x = start.clone();
    let mut fx = eval(&x, &mut evaluations, &mut failed).unwrap_or(f64::NEG_INFINITY);
    let mut step = vec![opts.initial_step; n];
    let temperature0 = match opts.initial_temperature {
        Some(t) => t,
        None => {
            let mut diffs = Vec::new();
            for _ in 0..(2 * n).max(10) {
                let y: Vec<f64> = x
                    .iter()
                    .map(|xi| xi + opts.initial_step * (2.0 * rng.gen::<f64>() - 1.0))
                    .collect();
                if let (Some(v), true) = (eval(&y, &mut evaluations, &mut failed), fx.is_finite()) {
                    diffs.push((v - fx).abs());
                }
            }
            let m = diffs.iter().sum::<f64>() / diffs.len().max(1) as f64;
            if m.is_finite() && m > 0.0 { m } else { 1.0 }
        }
    };
    let mut temp = temperature0;
    let (mut xbest, mut fbest) = (x.clone(), fx);
    let mut history: Vec<f64> = Vec::new();
    let (mut accepted, mut rejected) = (0usize, 0usize);
    let mut stages = 0;
    for _ in 0..opts.max_stages {
        stages += 1;
        let mut acc = vec![0usize; n];
        for _ in 0..opts.cycles {
            for h in 0..n {
                let mut y = x.clone();
                y[h] = x[h] + step[h] * (2.0 * rng.gen::<f64>() - 1.0);
                if y[h] < lo[h] || y[h] > hi[h] {
                    y[h] = lo[h] + (hi[h] - lo[h]) * rng.gen::<f64>();
                }
                let u: f64 = rng.gen();
                let Some(fy) = eval(&y, &mut evaluations, &mut failed) else {
                    rejected += 1;
                    continue;
                };
                let take = fy >= fx || u < ((fy - fx) / temp).exp();
                if take {
                    x = y;
                    fx = fy;
                    acc[h] += 1;
                    accepted += 1;
                    if fx > fbest {
                        xbest = x.clone();
                        fbest = fx;
                    }
                } else {
                    rejected += 1;
                }
            }
        }
        for h in 0..n {
            let ratio = acc[h] as f64 / opts.cycles as f64;
            if ratio > 0.6 {
                step[h] *= 1.0 + 2.0 * (ratio - 0.6) / 0.4;
            } else if ratio < 0.4 {
                step[h] /= 1.0 + 2.0 * (0.4 - ratio) / 0.4;
            }
            step[h] = step[h].min(hi[h] - lo[h]);
        }
        history.push(fx);
        let settled = history.len() > opts.patience
            && history[history.len() - 1 - opts.patience..]
                .iter()
                .all(|v| (v - fx).abs() <= opts.tolerance)
            && fbest - fx <= opts.tolerance;
        if settled {
            break;
        }
        temp *= opts.cooling;
        x = xbest.clone();
        fx = fbest;
    }
    RestartOutcome {
        start,
        best: xbest,
        value: fbest,
        stages,
        evaluations,
        accepted,
        rejected,
        failed,
        initial_temperature: temperature0,
    }
}

#[derive(Debug, Clone)]
pub struct NelderMeadResult {
    pub best: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
}

/// Nelder–Mead maximisation with standard coefficients.
pub fn nelder_mead<F>(f: &F, x0: &[f64], scale: f64, ftol: f64, max_evals: usize) -> NelderMeadResult
where
    F: Fn(&[f64]) -> Option<f64>,
{
    let n = x0.len();
    let val = |x: &[f64]| f(x).filter(|v| v.is_finite()).map(|v| -v).unwrap_or(f64::INFINITY);
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), val(x0)));
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += scale;
        let v = val(&x);
        simplex.push((x, v));
    }
    let mut evals = n + 1;
    while evals < max_evals {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (best, worst) = (simplex[0].1, simplex[n].1);
        if (worst - best).abs() <= ftol * (1.0 + best.abs()) {
            break;
        }
        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|p| p.0[j]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            centroid.iter().zip(&simplex[n].0).map(|(c, w)| c + t * (w - c)).collect()
        };
        let xr = along(-1.0);
        let fr = val(&xr);
        evals += 1;
        if fr < simplex[0].1 {
            let xe = along(-2.0);
            let fe = val(&xe);
            evals += 1;
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let xc = if fr < worst { along(-0.5) } else { along(0.5) };
            let fc = val(&xc);
            evals += 1;
            if fc < worst.min(fr) {
                simplex[n] = (xc, fc);
            } else {
                let x0 = simplex[0].0.clone();
                for p in simplex.iter_mut().skip(1) {
                    let x: Vec<f64> = x0.iter().zip(&p.0).map(|(a, b)| a + 0.5 * (b - a)).collect();
                    let v = val(&x);
                    *p = (x, v);
                }
                evals += n;
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (best, v) = simplex.swap_remove(0);
    NelderMeadResult {
        best,
        value: -v,
        evaluations: evals,
    }
}
