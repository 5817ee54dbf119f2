//! Model parameters: one [`FactorParams`] per variance factor plus measurement-error
//! standard deviations for the state-space form.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seasonality::SeasonalitySpec;

/// Parameters of one volatility factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FactorParams {
    /// Samuelson damping rate (1/year).
    pub lambda: f64,
    /// Variance mean-reversion speed (1/year).
    pub kappa: f64,
    /// Volatility of variance.
    pub sigma: f64,
    /// Correlation between the futures and variance shocks.
    pub rho: f64,
    /// Initial variance.
    pub v0: f64,
    #[serde(rename = "seasonality")]
    pub season: SeasonalitySpec,
    /// Market price of futures-price risk.
    #[serde(default)]
    pub pi_f: f64,
    /// Market price of volatility risk.
    #[serde(default)]
    pub pi_v: f64,
}

impl FactorParams {
    pub fn new(
        lambda: f64,
        kappa: f64,
        sigma: f64,
        rho: f64,
        v0: f64,
        season: SeasonalitySpec,
    ) -> Result<Self> {
        let p = Self {
            lambda,
            kappa,
            sigma,
            rho,
            v0,
            season,
            pi_f: 0.0,
            pi_v: 0.0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_risk_premia(mut self, pi_f: f64, pi_v: f64) -> Self {
        self.pi_f = pi_f;
        self.pi_v = pi_v;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, x: f64| {
            if x.is_finite() && x > 0.0 {
                Ok(())
            } else {
                Err(Error::Constraint(format!("{name} must be > 0, got {x}")))
            }
        };
        positive("kappa", self.kappa)?;
        positive("sigma", self.sigma)?;
        positive("v0", self.v0)?;
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::Constraint(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if !(self.rho > -1.0 && self.rho < 1.0) {
            return Err(Error::Constraint(format!("rho must lie in (-1,1), got {}", self.rho)));
        }
        if !self.pi_f.is_finite() || !self.pi_v.is_finite() {
            return Err(Error::Constraint("market prices of risk must be finite".into()));
        }
        self.season.validate()
    }

    /// σ² < 2κ·θ_min: the variance stays strictly positive.
    pub fn feller_ok(&self) -> bool {
        self.sigma * self.sigma < 2.0 * self.kappa * self.season.theta_min()
    }
}

/// Full parameter set of the state-space model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    #[serde(rename = "factor")]
    pub factors: Vec<FactorParams>,
    /// Measurement-error standard deviation per contract slot; H = diag(h²).
    #[serde(default)]
    pub h: Vec<f64>,
}

impl ModelParams {
    pub fn one_factor(factor: FactorParams, h: Vec<f64>) -> Self {
        Self {
            factors: vec![factor],
            h,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.factors.is_empty() {
            return Err(Error::Constraint("at least one factor is required".into()));
        }
        for f in &self.factors {
            f.validate()?;
        }
        if let Some(bad) = self.h.iter().find(|h| !(h.is_finite() && **h > 0.0)) {
            return Err(Error::Config(format!("measurement std dev must be > 0, got {bad}")));
        }
        Ok(())
    }

    pub fn n_factors(&self) -> usize {
        self.factors.len()
    }
}
