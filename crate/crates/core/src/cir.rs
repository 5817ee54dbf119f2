//! Monte Carlo simulation of the seasonal CIR variance and the futures curve it drives.
//!
//! Euler scheme with full truncation: v⁺ = max(v, 0) enters both drift and diffusion.
//! Every path owns its own ChaCha20 stream (stream id = path index), so results do not
//! depend on how paths are spread over worker threads.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::params::FactorParams;
use crate::seasonality::Pattern;

/// Seed splitting rule, recorded in run reports.
pub const SPLIT_RULE: &str = "chacha20(seed), stream = path index, factors drawn in index order";

/// Per-step tolerance for the path-wise comparison of two variance processes.
pub const COMPARISON_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Measure {
    RiskNeutral,
    Physical,
}

/// One simulated path.
#[derive(Debug, Clone)]
pub struct SimPath {
    pub path_id: usize,
    pub times: Vec<f64>,
    /// `v[step][factor]`, truncated at zero.
    pub v: Vec<Vec<f64>>,
    /// `log_f[step][contract]`.
    pub log_f: Vec<Vec<f64>>,
    pub measure: Measure,
}

/// Simulation grid and sampling settings.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub horizon: f64,
    pub steps: usize,
    pub n_paths: usize,
    pub measure: Measure,
    pub seed: u64,
}

/// Time grid on [0, horizon] with `steps` uniform steps, refined so that every jump of a
/// sawtooth level falls on a grid point.
pub fn time_grid(params: &[FactorParams], horizon: f64, steps: usize) -> Vec<f64> {
    let mut grid: Vec<f64> = (0..=steps)
        .map(|k| horizon * k as f64 / steps as f64)
        .collect();
    for f in params {
        if f.season.pattern == Pattern::Sawtooth {
            grid.extend(f.season.kinks(0.0, horizon));
        }
    }
    grid.sort_by(|a, b| a.total_cmp(b));
    grid.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
    grid
}

fn path_rng(seed: u64, path_id: usize) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(path_id as u64);
    rng
}

fn check_inputs(params: &[FactorParams], maturities: &[f64], cfg: &SimConfig) -> Result<()> {
    if params.is_empty() {
        return Err(Error::Constraint("simulation needs at least one factor".into()));
    }
    for p in params {
        p.validate()?;
    }
    if cfg.steps == 0 {
        return Err(Error::Domain("steps must be >= 1".into()));
    }
    if !(cfg.horizon > 0.0) {
        return Err(Error::Domain(format!("horizon must be > 0, got {}", cfg.horizon)));
    }
    if let Some(m) = maturities.iter().find(|&&m| m < cfg.horizon) {
        return Err(Error::Domain(format!(
            "horizon {} exceeds contract maturity {m}",
            cfg.horizon
        )));
    }
    Ok(())
}

/// State carried along one path.
struct PathState {
    v: Vec<f64>,
    log_ret: Vec<f64>,
}

/// Advances one path over the grid, calling `visit(step, time, &state)` after each step
/// (and once at step 0).
fn run_path<F>(
    params: &[FactorParams],
    maturities: &[f64],
    grid: &[f64],
    measure: Measure,
    rng: &mut ChaCha20Rng,
    mut visit: F,
) where
    F: FnMut(usize, f64, &PathState),
{
    let mut state = PathState {
        v: params.iter().map(|p| p.v0).collect(),
        log_ret: vec![0.0; maturities.len()],
    };
    visit(0, grid[0], &state);
    for (step, w) in grid.windows(2).enumerate() {
        let (t, dt) = (w[0], w[1] - w[0]);
        let sqdt = dt.sqrt();
        for (j, p) in params.iter().enumerate() {
            let z1: f64 = StandardNormal.sample(rng);
            let z2: f64 = StandardNormal.sample(rng);
            let dw_f = sqdt * z1;
            let dw_v = sqdt * (p.rho * z1 + (1.0 - p.rho * p.rho).sqrt() * z2);
            let vp = state.v[j].max(0.0);
            let sv = vp.sqrt();
            for (m, &tm) in maturities.iter().enumerate() {
                let damp = (-p.lambda * (tm - t)).exp();
                let mut dx = damp * sv * dw_f - 0.5 * damp * damp * vp * dt;
                if measure == Measure::Physical {
                    dx += p.pi_f * damp * vp * dt;
                }
                state.log_ret[m] += dx;
            }
            let mut drift = p.kappa * (p.season.theta(t) - vp);
            if measure == Measure::Physical {
                drift += p.sigma * p.pi_v * vp;
            }
            state.v[j] += drift * dt + p.sigma * sv * dw_v;
        }
        visit(step + 1, w[1], &state);
    }
}

/// Simulates full paths of variance and log futures prices.
///
/// `initial_log_f` gives ln F(0, T_m) per contract; pass zeros to obtain log-returns.
pub fn simulate(
    params: &[FactorParams],
    maturities: &[f64],
    initial_log_f: &[f64],
    cfg: &SimConfig,
) -> Result<Vec<SimPath>> {
    check_inputs(params, maturities, cfg)?;
    if initial_log_f.len() != maturities.len() {
        return Err(Error::Domain("one initial log price per maturity is required".into()));
    }
    let grid = time_grid(params, cfg.horizon, cfg.steps);
    let paths = (0..cfg.n_paths)
        .into_par_iter()
        .map(|id| {
            let mut rng = path_rng(cfg.seed, id);
            let mut v = Vec::with_capacity(grid.len());
            let mut log_f = Vec::with_capacity(grid.len());
            run_path(params, maturities, &grid, cfg.measure, &mut rng, |_, _, s| {
                v.push(s.v.iter().map(|x| x.max(0.0)).collect());
                log_f.push(
                    s.log_ret
                        .iter()
                        .zip(initial_log_f)
                        .map(|(r, f0)| r + f0)
                        .collect(),
                );
            });
            SimPath {
                path_id: id,
                times: grid.clone(),
                v,
                log_f,
                measure: cfg.measure,
            }
        })
        .collect();
    Ok(paths)
}

/// Terminal quantities of one path.
#[derive(Debug, Clone)]
pub struct TerminalSample {
    /// X_m(T) = ln F(T,T_m) − ln F(0,T_m) per contract.
    pub log_returns: Vec<f64>,
    /// Time average of v⁺ per factor over the grid (left-point rule).
    pub mean_variance: Vec<f64>,
    /// Smallest pre-truncation variance seen on the path, per factor.
    pub min_variance: Vec<f64>,
}

/// Memory-light simulation that keeps only terminal log-returns and variance statistics.
pub fn simulate_terminal(
    params: &[FactorParams],
    maturities: &[f64],
    cfg: &SimConfig,
) -> Result<Vec<TerminalSample>> {
    check_inputs(params, maturities, cfg)?;
    let grid = time_grid(params, cfg.horizon, cfg.steps);
    let n = params.len();
    Ok((0..cfg.n_paths)
        .into_par_iter()
        .map(|id| {
            let mut rng = path_rng(cfg.seed, id);
            let mut integral = vec![0.0; n];
            let mut min_v = vec![f64::INFINITY; n];
            let mut last_t = 0.0;
            let mut last_v: Vec<f64> = params.iter().map(|p| p.v0).collect();
            let mut out = Vec::new();
            run_path(params, maturities, &grid, cfg.measure, &mut rng, |step, t, s| {
                if step > 0 {
                    for j in 0..n {
                        integral[j] += last_v[j].max(0.0) * (t - last_t);
                    }
                }
                for j in 0..n {
                    min_v[j] = min_v[j].min(s.v[j]);
                }
                last_t = t;
                last_v.copy_from_slice(&s.v);
                out.clone_from(&s.log_ret);
            });
            TerminalSample {
                log_returns: out,
                mean_variance: integral.iter().map(|x| x / cfg.horizon).collect(),
                min_variance: min_v,
            }
        })
        .collect())
}

/// Outcome of the path-wise comparison between a seasonal variance and its constant-level
/// lower bound driven by the same noise.
#[derive(Debug, Clone)]
pub struct ComparisonReport {
    pub holds: bool,
    pub n_paths: usize,
    pub steps: usize,
    /// Path-steps where ṽ − v exceeded the tolerance.
    pub violations: usize,
    pub violating_paths: usize,
    /// Largest ṽ − v observed (≤ 0 when the ordering is strict everywhere).
    pub worst_gap: f64,
    pub min_seasonal: f64,
    pub min_lower: f64,
}

/// Simulates v (seasonal level) and ṽ (level fixed at `theta_min`, start `lower_v0`) with
/// shared Brownian increments and checks ṽ ≤ v at every grid point.
#[allow(clippy::too_many_arguments)]
pub fn comparison_check(
    seasonal: &FactorParams,
    theta_min: f64,
    lower_v0: f64,
    horizon: f64,
    steps: usize,
    n_paths: usize,
    seed: u64,
) -> Result<ComparisonReport> {
    seasonal.validate()?;
    if lower_v0 > seasonal.v0 {
        return Err(Error::Contract(format!(
            "lower process must start below the seasonal one: {lower_v0} > {}",
            seasonal.v0
        )));
    }
    if !(lower_v0 > 0.0) || !(theta_min > 0.0) {
        return Err(Error::Contract("lower process needs positive start and level".into()));
    }
    if theta_min > seasonal.season.theta_min() + 1e-15 {
        return Err(Error::Contract(format!(
            "theta_min {theta_min} exceeds the seasonal minimum {}",
            seasonal.season.theta_min()
        )));
    }
    if steps == 0 || !(horizon > 0.0) {
        return Err(Error::Domain("need steps >= 1 and horizon > 0".into()));
    }
    let grid = time_grid(std::slice::from_ref(seasonal), horizon, steps);
    let p = *seasonal;
    let per_path: Vec<(usize, f64, f64, f64)> = (0..n_paths)
        .into_par_iter()
        .map(|id| {
            let mut rng = path_rng(seed, id);
            let (mut v, mut w) = (p.v0, lower_v0);
            let (mut bad, mut worst) = (0usize, w - v);
            let (mut min_v, mut min_w) = (v, w);
            for win in grid.windows(2) {
                let (t, dt) = (win[0], win[1] - win[0]);
                let z: f64 = StandardNormal.sample(&mut rng);
                let db = dt.sqrt() * z;
                let vp = v.max(0.0);
                let wp = w.max(0.0);
                v += p.kappa * (p.season.theta(t) - vp) * dt + p.sigma * vp.sqrt() * db;
                w += p.kappa * (theta_min - wp) * dt + p.sigma * wp.sqrt() * db;
                let gap = w - v;
                worst = worst.max(gap);
                if gap > COMPARISON_TOLERANCE {
                    bad += 1;
                }
                min_v = min_v.min(v);
                min_w = min_w.min(w);
            }
            (bad, worst, min_v, min_w)
        })
        .collect();
    let violations: usize = per_path.iter().map(|r| r.0).sum();
    Ok(ComparisonReport {
        holds: violations == 0,
        n_paths,
        steps: grid.len() - 1,
        violations,
        violating_paths: per_path.iter().filter(|r| r.0 > 0).count(),
        worst_gap: per_path.iter().map(|r| r.1).fold(f64::NEG_INFINITY, f64::max),
        min_seasonal: per_path.iter().map(|r| r.2).fold(f64::INFINITY, f64::min),
        min_lower: per_path.iter().map(|r| r.3).fold(f64::INFINITY, f64::min),
    })
}

/// Writes paths as CSV rows `time,path_id,factor,v,contract,logF`.
pub fn write_paths_csv<W: Write>(out: W, paths: &[SimPath]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["time", "path_id", "factor", "v", "contract", "logF"])?;
    for path in paths {
        for (step, &t) in path.times.iter().enumerate() {
            for (j, v) in path.v[step].iter().enumerate() {
                for (m, lf) in path.log_f[step].iter().enumerate() {
                    w.write_record([
                        format!("{t:.10}"),
                        path.path_id.to_string(),
                        j.to_string(),
                        format!("{v:.12e}"),
                        m.to_string(),
                        format!("{lf:.12e}"),
                    ])?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}
