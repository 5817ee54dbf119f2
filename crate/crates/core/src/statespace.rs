//! Discrete-time state-space form of the model.
//!
//! Each factor contributes three states: a damped diffusion accumulator s₁, a damped
//! variance integral s₂ and the instantaneous variance s₃ = v. The transition is the
//! Euler step of their dynamics over Δt; the loading of futures maturity T_m on factor j at
//! time t is (e^{−λ(T_m−t)}, −½e^{−2λ(T_m−t)}, 0).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::params::ModelParams;

/// Number of states per factor.
pub const STATES_PER_FACTOR: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeasurementMode {
    /// y_t = ln F(t, T_m); offsets c_t carry the initial curve.
    LogPrices,
    /// y_t = ln F(t, T_m) − ln F(t−Δt, T_m); the level terms drop out of the first two
    /// transition rows and c_t = 0.
    LogReturns,
}

/// System matrices for one step: s_t = d + T s_{t−1} + R ε, ε ~ N(0, Q);
/// y_t = c + Z s_t + e, e ~ N(0, H).
#[derive(Debug, Clone)]
pub struct SystemMatrices {
    pub d: DVector<f64>,
    pub t: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub z: DMatrix<f64>,
    pub c: DVector<f64>,
    pub h: DMatrix<f64>,
}

impl SystemMatrices {
    /// State innovation covariance R Q Rᵀ.
    pub fn state_noise(&self) -> DMatrix<f64> {
        &self.r * &self.q * self.r.transpose()
    }

    pub fn n_states(&self) -> usize {
        self.d.len()
    }

    pub fn n_obs(&self) -> usize {
        self.c.len()
    }
}

/// Measurement loading row of one contract on one factor.
pub fn loading(lambda: f64, time_to_maturity: f64) -> [f64; 3] {
    let e = (-lambda * time_to_maturity).exp();
    [e, -0.5 * e * e, 0.0]
}

/// Builds the system for the step ending at observation time `t` (length `dt`).
///
/// `maturities` are absolute contract maturities in force at `t`, one per measurement row;
/// `s3` is the plug-in variance per factor used in the state-dependent loading R;
/// `offsets` are the c_t entries in log-price mode (ignored for returns).
pub fn build_system(
    params: &ModelParams,
    t: f64,
    dt: f64,
    maturities: &[f64],
    mode: MeasurementMode,
    s3: &[f64],
    offsets: Option<&[f64]>,
) -> Result<SystemMatrices> {
    let n = params.n_factors();
    let k = maturities.len();
    if !(dt > 0.0) {
        return Err(Error::Domain(format!("time step must be > 0, got {dt}")));
    }
    if s3.len() != n {
        return Err(Error::Contract(format!("{} variance plug-ins for {n} factors", s3.len())));
    }
    if params.h.len() < k {
        return Err(Error::Config(format!(
            "{} measurement std devs for {k} contracts",
            params.h.len()
        )));
    }
    if let Some(bad) = params.h[..k].iter().find(|h| !(**h > 0.0)) {
        return Err(Error::Config(format!("measurement std dev must be > 0, got {bad}")));
    }
    if let Some(m) = maturities.iter().find(|&&m| m < t - 1e-12) {
        return Err(Error::Domain(format!("contract maturity {m} precedes time {t}")));
    }
    let ns = STATES_PER_FACTOR * n;
    let mut d = DVector::zeros(ns);
    let mut tm = DMatrix::zeros(ns, ns);
    let mut r = DMatrix::zeros(ns, 2 * n);
    let mut q = DMatrix::zeros(2 * n, 2 * n);
    let mut z = DMatrix::zeros(k, ns);
    let level = match mode {
        MeasurementMode::LogPrices => 1.0,
        MeasurementMode::LogReturns => 0.0,
    };
    for (j, p) in params.factors.iter().enumerate() {
        let o = STATES_PER_FACTOR * j;
        d[o + 2] = p.kappa * p.season.theta(t - dt) * dt;
        tm[(o, o)] = level - p.lambda * dt;
        tm[(o, o + 2)] = p.pi_f * dt;
        tm[(o + 1, o + 1)] = level - 2.0 * p.lambda * dt;
        tm[(o + 1, o + 2)] = dt;
        tm[(o + 2, o + 2)] = 1.0 - (p.kappa - p.sigma * p.pi_v) * dt;
        let sv = s3[j].max(0.0).sqrt();
        r[(o, 2 * j)] = sv;
        r[(o + 2, 2 * j + 1)] = sv * p.sigma;
        q[(2 * j, 2 * j)] = dt;
        q[(2 * j + 1, 2 * j + 1)] = dt;
        q[(2 * j, 2 * j + 1)] = p.rho * dt;
        q[(2 * j + 1, 2 * j)] = p.rho * dt;
        for (row, &m) in maturities.iter().enumerate() {
            let l = loading(p.lambda, (m - t).max(0.0));
            z[(row, o)] = l[0];
            z[(row, o + 1)] = l[1];
        }
    }
    let c = match (mode, offsets) {
        (MeasurementMode::LogPrices, Some(off)) => {
            if off.len() != k {
                return Err(Error::Contract(format!("{} offsets for {k} contracts", off.len())));
            }
            DVector::from_column_slice(off)
        }
        _ => DVector::zeros(k),
    };
    let h = DMatrix::from_diagonal(&DVector::from_iterator(k, params.h[..k].iter().map(|h| h * h)));
    Ok(SystemMatrices {
        d,
        t: tm,
        r,
        q,
        z,
        c,
        h,
    })
}
