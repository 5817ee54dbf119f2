//! Kalman filter and fixed-interval smoother.
//!
//! The model's state noise loads on √s₃, so the model filter rebuilds the system each step
//! with the previous filtered variance as plug-in (floored). Conditional on that plug-in
//! the recursion is the ordinary linear-Gaussian one, implemented once in [`LinearFilter`].

use std::io::Write;

use nalgebra::{DMatrix, DVector};

use crate::data::ObservationSeries;
use crate::error::{Error, Result};
use crate::params::ModelParams;
use crate::statespace::{build_system, SystemMatrices, STATES_PER_FACTOR};

const LN_2PI: f64 = 1.837_877_066_409_345_3;

#[derive(Debug, Clone)]
pub struct FilterOptions {
    /// Diagonal of the initial state covariance, per factor (s₁, s₂, s₃).
    pub initial_cov: [f64; 3],
    /// Added to the innovation covariance diagonal before factorisation.
    pub jitter: f64,
    /// Floor applied to the filtered variance state.
    pub variance_floor: f64,
    /// Keep per-step records (needed for smoothing and state export).
    pub keep_history: bool,
}

impl Default for FilterOptions {
    fn default() -> Self {
        Self {
            initial_cov: [1e-4; 3],
            jitter: 1e-12,
            variance_floor: 1e-10,
            keep_history: true,
        }
    }
}

/// One filter step.
#[derive(Debug, Clone)]
pub struct StepRecord {
    /// Indices of the observed series on this step.
    pub observed: Vec<usize>,
    pub innovation: DVector<f64>,
    pub innovation_cov: DMatrix<f64>,
    pub predicted_mean: DVector<f64>,
    pub predicted_cov: DMatrix<f64>,
    pub filtered_mean: DVector<f64>,
    pub filtered_cov: DMatrix<f64>,
    pub transition: DMatrix<f64>,
    /// Whether the variance state hit the floor on this step.
    pub floored: bool,
}

#[derive(Debug, Clone)]
pub struct FilterOutput {
    pub loglik: f64,
    /// Total number of scalar observations used.
    pub n_obs: usize,
    pub steps: Vec<StepRecord>,
    pub floored_steps: usize,
    pub initial_mean: DVector<f64>,
    pub initial_cov: DMatrix<f64>,
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in 0..i {
            let a = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = a;
            m[(j, i)] = a;
        }
    }
}

/// Linear-Gaussian filter state with an explicit (mean, covariance) pair.
#[derive(Debug, Clone)]
pub struct LinearFilter {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub jitter: f64,
}

/// Result of one predict/update.
pub struct StepResult {
    pub loglik: f64,
    pub record: StepRecord,
}

impl LinearFilter {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>, jitter: f64) -> Self {
        Self { mean, cov, jitter }
    }

    /// Predicts through `sys` and updates on the observed entries of `y`
    /// (`None` = missing). `step` is used in error messages.
    pub fn step(&mut self, sys: &SystemMatrices, y: &[Option<f64>], step: usize) -> Result<StepResult> {
        let pred_mean = &sys.d + &sys.t * &self.mean;
        let mut pred_cov = &sys.t * &self.cov * sys.t.transpose() + sys.state_noise();
        symmetrize(&mut pred_cov);
        let observed: Vec<usize> = (0..y.len()).filter(|&i| y[i].is_some()).collect();
        let m = observed.len();
        if m == 0 {
            self.mean = pred_mean.clone();
            self.cov = pred_cov.clone();
            return Ok(StepResult {
                loglik: 0.0,
                record: StepRecord {
                    observed,
                    innovation: DVector::zeros(0),
                    innovation_cov: DMatrix::zeros(0, 0),
                    predicted_mean: pred_mean,
                    predicted_cov: pred_cov,
                    filtered_mean: self.mean.clone(),
                    filtered_cov: self.cov.clone(),
                    transition: sys.t.clone(),
                    floored: false,
                },
            });
        }
        let z = sys.z.select_rows(&observed);
        let c = sys.c.select_rows(&observed);
        let h = sys.h.select_rows(&observed).select_columns(&observed);
        let yv = DVector::from_iterator(m, observed.iter().map(|&i| y[i].unwrap()));
        let innovation = &yv - &c - &z * &pred_mean;
        let pz = &pred_cov * z.transpose();
        let mut v = &z * &pz + h;
        symmetrize(&mut v);
        for i in 0..m {
            v[(i, i)] += self.jitter;
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::numerical(step, "non-finite innovation covariance"));
        }
        let chol = v
            .clone()
            .cholesky()
            .ok_or_else(|| Error::numerical(step, "innovation covariance not positive definite"))?;
        let logdet = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        let vinv_e = chol.solve(&innovation);
        let quad = innovation.dot(&vinv_e);
        let loglik = -0.5 * (m as f64 * LN_2PI + logdet + quad);
        // K = P Zᵀ V⁻¹
        let gain_t = chol.solve(&pz.transpose());
        self.mean = &pred_mean + gain_t.transpose() * &innovation;
        let mut cov = &pred_cov - &pz * &gain_t;
        symmetrize(&mut cov);
        self.cov = cov;
        Ok(StepResult {
            loglik,
            record: StepRecord {
                observed,
                innovation,
                innovation_cov: v,
                predicted_mean: pred_mean,
                predicted_cov: pred_cov,
                filtered_mean: self.mean.clone(),
                filtered_cov: self.cov.clone(),
                transition: sys.t.clone(),
                floored: false,
            },
        })
    }
}

/// Filters a sequence of fixed systems (no state-dependent loading).
pub fn filter_linear(
    mean0: DVector<f64>,
    cov0: DMatrix<f64>,
    systems: &[SystemMatrices],
    obs: &[Vec<Option<f64>>],
    jitter: f64,
) -> Result<FilterOutput> {
    if systems.len() != obs.len() {
        return Err(Error::Contract(format!("{} systems for {} observation dates", systems.len(), obs.len())));
    }
    let mut f = LinearFilter::new(mean0.clone(), cov0.clone(), jitter);
    let mut out = FilterOutput {
        loglik: 0.0,
        n_obs: 0,
        steps: Vec::with_capacity(obs.len()),
        floored_steps: 0,
        initial_mean: mean0,
        initial_cov: cov0,
    };
    for (i, (sys, y)) in systems.iter().zip(obs).enumerate() {
        let r = f.step(sys, y, i)?;
        out.loglik += r.loglik;
        out.n_obs += r.record.observed.len();
        out.steps.push(r.record);
    }
    Ok(out)
}

/// Initial state mean (0, 0, v₀ per factor) and diagonal covariance.
pub fn initial_state(params: &ModelParams, opts: &FilterOptions) -> (DVector<f64>, DMatrix<f64>) {
    let n = params.n_factors();
    let ns = STATES_PER_FACTOR * n;
    let mut mean = DVector::zeros(ns);
    let mut cov = DMatrix::zeros(ns, ns);
    for (j, f) in params.factors.iter().enumerate() {
        let o = STATES_PER_FACTOR * j;
        mean[o + 2] = f.v0;
        for k in 0..3 {
            cov[(o + k, o + k)] = opts.initial_cov[k];
        }
    }
    (mean, cov)
}

/// Runs the model filter over an observation series and returns the Gaussian
/// log-likelihood −(Σk_t/2)ln2π − ½Σln|V_t| − ½Σv_tᵀV_t⁻¹v_t.
pub fn filter(series: &ObservationSeries, params: &ModelParams, opts: &FilterOptions) -> Result<FilterOutput> {
    params.validate()?;
    let k = series.n_series();
    if params.h.len() != k {
        return Err(Error::Config(format!(
            "{} measurement std devs for a panel of {k} series",
            params.h.len()
        )));
    }
    let (mean0, cov0) = initial_state(params, opts);
    let mut f = LinearFilter::new(mean0.clone(), cov0.clone(), opts.jitter);
    let mut out = FilterOutput {
        loglik: 0.0,
        n_obs: 0,
        steps: Vec::with_capacity(if opts.keep_history { series.len() } else { 0 }),
        floored_steps: 0,
        initial_mean: mean0,
        initial_cov: cov0,
    };
    let mode = series.measurement_mode();
    let n = params.n_factors();
    let mut prev_t = series.origin_time;
    for i in 0..series.len() {
        let t = series.times[i];
        let dt = t - prev_t;
        prev_t = t;
        let live: Vec<usize> = (0..k).filter(|&s| series.valid[i][s]).collect();
        let mats: Vec<f64> = live.iter().map(|&s| series.maturities[i][s]).collect();
        let offs: Vec<f64> = live.iter().map(|&s| series.offsets[i][s]).collect();
        let s3: Vec<f64> = (0..n)
            .map(|j| f.mean[STATES_PER_FACTOR * j + 2].max(opts.variance_floor))
            .collect();
        let sub = ModelParams {
            factors: params.factors.clone(),
            h: live.iter().map(|&s| params.h[s]).collect(),
        };
        let sys = build_system(&sub, t, dt, &mats, mode, &s3, Some(&offs)).map_err(|e| match e {
            Error::Domain(msg) => Error::numerical(i, msg),
            other => other,
        })?;
        let y: Vec<Option<f64>> = live.iter().map(|&s| Some(series.values[i][s])).collect();
        let mut r = f.step(&sys, &y, i)?;
        let mut floored = false;
        for j in 0..n {
            let idx = STATES_PER_FACTOR * j + 2;
            if f.mean[idx] < opts.variance_floor {
                f.mean[idx] = opts.variance_floor;
                floored = true;
            }
        }
        if floored {
            out.floored_steps += 1;
            r.record.filtered_mean = f.mean.clone();
            r.record.floored = true;
        }
        r.record.observed = live.clone();
        if !r.loglik.is_finite() {
            return Err(Error::numerical(i, "non-finite log-likelihood contribution"));
        }
        out.loglik += r.loglik;
        out.n_obs += live.len();
        if opts.keep_history {
            out.steps.push(r.record);
        }
    }
    Ok(out)
}

/// Log-likelihood only (no history). One-factor models take an allocation-free path
/// that performs the same recursion as [`filter`].
pub fn loglik(series: &ObservationSeries, params: &ModelParams, opts: &FilterOptions) -> Result<f64> {
    if params.n_factors() == 1 {
        return loglik_one_factor(series, params, opts);
    }
    let o = FilterOptions {
        keep_history: false,
        ..opts.clone()
    };
    Ok(filter(series, params, &o)?.loglik)
}

fn loglik_one_factor(series: &ObservationSeries, params: &ModelParams, opts: &FilterOptions) -> Result<f64> {
    use nalgebra::{Matrix3, Vector3};
    params.validate()?;
    let k = series.n_series();
    if params.h.len() != k {
        return Err(Error::Config(format!(
            "{} measurement std devs for a panel of {k} series",
            params.h.len()
        )));
    }
    let p = &params.factors[0];
    let level = match series.measurement_mode() {
        crate::statespace::MeasurementMode::LogPrices => 1.0,
        crate::statespace::MeasurementMode::LogReturns => 0.0,
    };
    let mut x = Vector3::new(0.0, 0.0, p.v0);
    let mut cov = Matrix3::from_diagonal(&Vector3::from(opts.initial_cov));
    let mut z = vec![[0.0f64; 2]; k];
    let mut e = vec![0.0f64; k];
    let mut pz = vec![Vector3::zeros(); k];
    let mut v = vec![0.0f64; k * k];
    let mut ll = 0.0;
    let mut prev_t = series.origin_time;
    for i in 0..series.len() {
        let t = series.times[i];
        let dt = t - prev_t;
        prev_t = t;
        if !(dt > 0.0) {
            return Err(Error::numerical(i, format!("time step must be > 0, got {dt}")));
        }
        let s3 = x[2].max(opts.variance_floor);
        let tm = Matrix3::new(
            level - p.lambda * dt, 0.0, p.pi_f * dt,
            0.0, level - 2.0 * p.lambda * dt, dt,
            0.0, 0.0, 1.0 - (p.kappa - p.sigma * p.pi_v) * dt,
        );
        let cross = s3 * p.sigma * p.rho * dt;
        let w = Matrix3::new(s3 * dt, 0.0, cross, 0.0, 0.0, 0.0, cross, 0.0, s3 * p.sigma * p.sigma * dt);
        let xp = Vector3::new(0.0, 0.0, p.kappa * p.season.theta(t - dt) * dt) + tm * x;
        let mut pp = tm * cov * tm.transpose() + w;
        pp = 0.5 * (pp + pp.transpose());
        let mut m = 0;
        for s in 0..k {
            if !series.valid[i][s] {
                continue;
            }
            let tau = series.maturities[i][s] - t;
            if tau < -1e-12 {
                return Err(Error::numerical(i, format!("contract maturity precedes time {t}")));
            }
            let d = (-p.lambda * tau.max(0.0)).exp();
            z[m] = [d, -0.5 * d * d];
            e[m] = series.values[i][s] - series.offsets[i][s] - (d * xp[0] - 0.5 * d * d * xp[1]);
            pz[m] = pp.column(0) * z[m][0] + pp.column(1) * z[m][1];
            m += 1;
        }
        if m == 0 {
            x = xp;
            cov = pp;
            continue;
        }
        for col in 0..m {
            for r in 0..m {
                v[r * m + col] = z[r][0] * pz[col][0] + z[r][1] * pz[col][1];
            }
        }
        let mut hrow = 0;
        for s in 0..k {
            if series.valid[i][s] {
                v[hrow * m + hrow] += params.h[s] * params.h[s] + opts.jitter;
                hrow += 1;
            }
        }
        for r in 0..m {
            for c in 0..r {
                let a = 0.5 * (v[r * m + c] + v[c * m + r]);
                v[r * m + c] = a;
                v[c * m + r] = a;
            }
        }
        // in-place Cholesky, lower triangle
        for c in 0..m {
            let mut d = v[c * m + c];
            for q in 0..c {
                d -= v[c * m + q] * v[c * m + q];
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::numerical(i, "innovation covariance not positive definite"));
            }
            let d = d.sqrt();
            v[c * m + c] = d;
            for r in c + 1..m {
                let mut a = v[r * m + c];
                for q in 0..c {
                    a -= v[r * m + q] * v[c * m + q];
                }
                v[r * m + c] = a / d;
            }
        }
        let solve = |b: &mut [f64]| {
            for r in 0..m {
                let mut a = b[r];
                for q in 0..r {
                    a -= v[r * m + q] * b[q];
                }
                b[r] = a / v[r * m + r];
            }
            for r in (0..m).rev() {
                let mut a = b[r];
                for q in r + 1..m {
                    a -= v[q * m + r] * b[q];
                }
                b[r] = a / v[r * m + r];
            }
        };
        let logdet: f64 = (0..m).map(|r| 2.0 * v[r * m + r].ln()).sum();
        let mut ve = e[..m].to_vec();
        solve(&mut ve);
        let quad: f64 = (0..m).map(|r| e[r] * ve[r]).sum();
        ll += -0.5 * (m as f64 * LN_2PI + logdet + quad);
        let mut gain_cols = [vec![0.0; m], vec![0.0; m], vec![0.0; m]];
        for (a, g) in gain_cols.iter_mut().enumerate() {
            for r in 0..m {
                g[r] = pz[r][a];
            }
            solve(g);
        }
        let mut xn = xp;
        for a in 0..3 {
            for r in 0..m {
                xn[a] += pz[r][a] * ve[r];
            }
        }
        let mut cn = pp;
        for a in 0..3 {
            for b in 0..3 {
                let mut acc = 0.0;
                for r in 0..m {
                    acc += pz[r][a] * gain_cols[b][r];
                }
                cn[(a, b)] -= acc;
            }
        }
        cov = 0.5 * (cn + cn.transpose());
        x = xn;
        if x[2] < opts.variance_floor {
            x[2] = opts.variance_floor;
        }
    }
    if !ll.is_finite() {
        return Err(Error::numerical(series.len(), "non-finite log-likelihood"));
    }
    Ok(ll)
}

fn pseudo_inverse(m: &DMatrix<f64>) -> DMatrix<f64> {
    match m.clone().cholesky() {
        Some(c) => c.inverse(),
        None => m
            .clone()
            .pseudo_inverse(1e-14 * m.amax().max(f64::MIN_POSITIVE))
            .unwrap_or_else(|_| DMatrix::zeros(m.nrows(), m.ncols())),
    }
}

/// Smoothed state means and covariances.
#[derive(Debug, Clone)]
pub struct Smoothed {
    pub means: Vec<DVector<f64>>,
    pub covs: Vec<DMatrix<f64>>,
}

/// Rauch–Tung–Striebel fixed-interval smoother over a filter run with history.
pub fn smooth(out: &FilterOutput) -> Result<Smoothed> {
    let n = out.steps.len();
    if n == 0 {
        return Ok(Smoothed {
            means: Vec::new(),
            covs: Vec::new(),
        });
    }
    let mut means = vec![DVector::zeros(0); n];
    let mut covs = vec![DMatrix::zeros(0, 0); n];
    means[n - 1] = out.steps[n - 1].filtered_mean.clone();
    covs[n - 1] = out.steps[n - 1].filtered_cov.clone();
    for t in (0..n - 1).rev() {
        let cur = &out.steps[t];
        let next = &out.steps[t + 1];
        let gain = &cur.filtered_cov * next.transition.transpose() * pseudo_inverse(&next.predicted_cov);
        means[t] = &cur.filtered_mean + &gain * (&means[t + 1] - &next.predicted_mean);
        let mut c = &cur.filtered_cov + &gain * (&covs[t + 1] - &next.predicted_cov) * gain.transpose();
        symmetrize(&mut c);
        covs[t] = c;
    }
    Ok(Smoothed { means, covs })
}

/// Writes `date,s1,s2,s3,theta_t` for factor `factor` from either smoothed or filtered means.
pub fn write_states_csv<W: Write>(
    out: W,
    series: &ObservationSeries,
    params: &ModelParams,
    means: &[DVector<f64>],
    factor: usize,
) -> Result<()> {
    let f = params
        .factors
        .get(factor)
        .ok_or_else(|| Error::Contract(format!("no factor {factor}")))?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["date", "s1", "s2", "s3", "theta_t"])?;
    let o = STATES_PER_FACTOR * factor;
    for (i, m) in means.iter().enumerate() {
        w.write_record([
            series.dates[i].to_string(),
            format!("{}", m[o]),
            format!("{}", m[o + 1]),
            format!("{}", m[o + 2]),
            format!("{}", f.season.theta(series.times[i])),
        ])?;
    }
    w.flush()?;
    Ok(())
}
