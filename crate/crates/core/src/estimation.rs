//! Quasi-maximum-likelihood estimation of the one-factor model on a futures panel.
//!
//! The optimiser works on an unconstrained vector: logs for positive quantities,
//! ρ = (2/π)·atan(x), t₀ = ½ + atan(x)/π and, for the sinusoidal pattern where b ≤ a,
//! b = a·(½ + atan(x)/π). The market price of futures risk is unrestricted; the market
//! price of volatility risk is held at zero, and λ can be frozen at zero for the
//! no-Samuelson test.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::data::ObservationSeries;
use crate::error::{Error, Result};
use crate::kalman::{loglik, FilterOptions};
use crate::optim::{anneal, AnnealOptions};
use crate::params::{FactorParams, ModelParams};
use crate::seasonality::{Pattern, SeasonalitySpec};

/// Which parameters are free in a fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub pattern: Pattern,
    pub n_series: usize,
    /// Hold λ at zero (no Samuelson effect).
    #[serde(default)]
    pub freeze_lambda: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slot {
    Lambda,
    Kappa,
    Sigma,
    Rho,
    V0,
    A,
    B,
    T0,
    PiF,
    H(usize),
}

impl Slot {
    fn name(self) -> String {
        match self {
            Slot::Lambda => "lambda".into(),
            Slot::Kappa => "kappa".into(),
            Slot::Sigma => "sigma".into(),
            Slot::Rho => "rho".into(),
            Slot::V0 => "v0".into(),
            Slot::A => "a".into(),
            Slot::B => "b".into(),
            Slot::T0 => "t0".into(),
            Slot::PiF => "pi_f".into(),
            Slot::H(i) => format!("h{}", i + 1),
        }
    }
}

fn atan_unit(x: f64) -> f64 {
    0.5 + x.atan() / PI
}

fn atan_unit_inv(u: f64) -> f64 {
    (PI * (u - 0.5)).tan()
}

impl ModelSpec {
    pub fn new(pattern: Pattern, n_series: usize) -> Self {
        Self {
            pattern,
            n_series,
            freeze_lambda: false,
        }
    }

    pub fn without_lambda(mut self) -> Self {
        self.freeze_lambda = true;
        self
    }

    fn slots(&self) -> Vec<Slot> {
        let mut s = Vec::new();
        if !self.freeze_lambda {
            s.push(Slot::Lambda);
        }
        s.extend([Slot::Kappa, Slot::Sigma, Slot::Rho, Slot::V0, Slot::A]);
        if self.pattern.is_seasonal() {
            s.extend([Slot::B, Slot::T0]);
        }
        s.push(Slot::PiF);
        s.extend((0..self.n_series).map(Slot::H));
        s
    }

    pub fn names(&self) -> Vec<String> {
        self.slots().into_iter().map(Slot::name).collect()
    }

    pub fn n_free(&self) -> usize {
        self.slots().len()
    }

    /// Short label, e.g. "sinusoidal" or "sinusoidal (lambda=0)".
    pub fn label(&self) -> String {
        if self.freeze_lambda {
            format!("{} (lambda=0)", self.pattern.name())
        } else {
            self.pattern.name().to_string()
        }
    }

    /// Maps natural parameters to the unconstrained vector.
    pub fn to_unconstrained(&self, p: &ModelParams) -> Result<Vec<f64>> {
        p.validate()?;
        let f = self.factor(p)?;
        let s = f.season;
        let log = |name: &str, x: f64| {
            if x > 0.0 {
                Ok(x.ln())
            } else {
                Err(Error::Domain(format!("{name} must be > 0 to transform, got {x}")))
            }
        };
        self.slots()
            .into_iter()
            .map(|slot| match slot {
                Slot::Lambda => log("lambda", f.lambda),
                Slot::Kappa => Ok(f.kappa.ln()),
                Slot::Sigma => Ok(f.sigma.ln()),
                Slot::Rho => Ok((0.5 * PI * f.rho).tan()),
                Slot::V0 => Ok(f.v0.ln()),
                Slot::A => Ok(s.a.ln()),
                Slot::B if self.pattern == Pattern::Sinusoidal => {
                    let r = s.b / s.a;
                    if r > 0.0 && r < 1.0 {
                        Ok(atan_unit_inv(r))
                    } else {
                        Err(Error::Domain(format!("sinusoidal b/a must lie in (0,1), got {r}")))
                    }
                }
                Slot::B => log("b", s.b),
                Slot::T0 => {
                    if s.t0 > 0.0 {
                        Ok(atan_unit_inv(s.t0))
                    } else {
                        Err(Error::Domain("t0 must lie in (0,1) to transform".into()))
                    }
                }
                Slot::PiF => Ok(f.pi_f),
                Slot::H(i) => Ok(p.h[i].ln()),
            })
            .collect()
    }

    /// Inverse of [`ModelSpec::to_unconstrained`].
    pub fn from_unconstrained(&self, x: &[f64]) -> Result<ModelParams> {
        let slots = self.slots();
        if x.len() != slots.len() {
            return Err(Error::Contract(format!("{} values for {} free parameters", x.len(), slots.len())));
        }
        let mut lambda = 0.0;
        let (mut kappa, mut sigma, mut rho, mut v0, mut a) = (0.0, 0.0, 0.0, 0.0, 0.0);
        let (mut b_raw, mut t0, mut pi_f) = (None, 0.0, 0.0);
        let mut h = vec![0.0; self.n_series];
        for (slot, &v) in slots.iter().zip(x) {
            match slot {
                Slot::Lambda => lambda = v.exp(),
                Slot::Kappa => kappa = v.exp(),
                Slot::Sigma => sigma = v.exp(),
                Slot::Rho => rho = 2.0 / PI * v.atan(),
                Slot::V0 => v0 = v.exp(),
                Slot::A => a = v.exp(),
                Slot::B => b_raw = Some(v),
                Slot::T0 => t0 = atan_unit(v),
                Slot::PiF => pi_f = v,
                Slot::H(i) => h[*i] = v.exp(),
            }
        }
        let b = match (self.pattern, b_raw) {
            (Pattern::Sinusoidal, Some(v)) => a * atan_unit(v),
            (_, Some(v)) => v.exp(),
            (_, None) => 0.0,
        };
        let season = SeasonalitySpec::new(self.pattern, a, b, if self.pattern.is_seasonal() { t0 } else { 0.0 })?;
        let f = FactorParams::new(lambda, kappa, sigma, rho, v0, season)?.with_risk_premia(pi_f, 0.0);
        let m = ModelParams::one_factor(f, h);
        m.validate()?;
        Ok(m)
    }

    /// Natural-space values of the free parameters, in [`ModelSpec::names`] order.
    pub fn natural_values(&self, p: &ModelParams) -> Vec<f64> {
        let f = &p.factors[0];
        self.slots()
            .into_iter()
            .map(|slot| match slot {
                Slot::Lambda => f.lambda,
                Slot::Kappa => f.kappa,
                Slot::Sigma => f.sigma,
                Slot::Rho => f.rho,
                Slot::V0 => f.v0,
                Slot::A => f.season.a,
                Slot::B => f.season.b,
                Slot::T0 => f.season.t0,
                Slot::PiF => f.pi_f,
                Slot::H(i) => p.h[i],
            })
            .collect()
    }

    fn factor<'a>(&self, p: &'a ModelParams) -> Result<&'a FactorParams> {
        if p.factors.len() != 1 {
            return Err(Error::Contract("estimation handles one-factor models only".into()));
        }
        if p.h.len() != self.n_series {
            return Err(Error::Contract(format!(
                "{} measurement std devs for {} series",
                p.h.len(),
                self.n_series
            )));
        }
        let f = &p.factors[0];
        if f.season.pattern != self.pattern {
            return Err(Error::Contract(format!(
                "parameters carry pattern {}, spec expects {}",
                f.season.pattern, self.pattern
            )));
        }
        if self.freeze_lambda && f.lambda != 0.0 {
            return Err(Error::Contract("lambda is frozen at 0".into()));
        }
        Ok(f)
    }

    /// Converts `p` (possibly of another pattern) into a valid starting point for this spec.
    pub fn coerce(&self, p: &ModelParams) -> Result<ModelParams> {
        let f = p
            .factors
            .first()
            .ok_or_else(|| Error::Contract("no factor to start from".into()))?;
        let s = f.season;
        let a = s.a;
        let (b, t0) = if !self.pattern.is_seasonal() {
            (0.0, 0.0)
        } else if s.pattern.is_seasonal() && s.b > 0.0 {
            let b = if self.pattern == Pattern::Sinusoidal { s.b.min(0.9 * a) } else { s.b };
            (b, if s.t0 > 0.0 { s.t0 } else { 0.5 })
        } else {
            (0.5 * a, 0.5)
        };
        let lambda = if self.freeze_lambda { 0.0 } else if f.lambda > 0.0 { f.lambda } else { 0.5 };
        let season = SeasonalitySpec::new(self.pattern, a, b, t0)?;
        let nf = FactorParams::new(lambda, f.kappa, f.sigma, f.rho, f.v0, season)?.with_risk_premia(f.pi_f, 0.0);
        let mut h = p.h.clone();
        h.resize(self.n_series, h.last().copied().unwrap_or(1e-3));
        Ok(ModelParams::one_factor(nf, h))
    }
}

/// Transforms natural parameters to the optimiser's space.
pub fn transform_params(spec: &ModelSpec, p: &ModelParams) -> Result<Vec<f64>> {
    spec.to_unconstrained(p)
}

pub fn inverse_transform(spec: &ModelSpec, x: &[f64]) -> Result<ModelParams> {
    spec.from_unconstrained(x)
}

/// Data-driven starting point: variance level from the first series' sample variance,
/// measurement noise from each series' spread.
pub fn default_start(spec: &ModelSpec, series: &ObservationSeries) -> Result<ModelParams> {
    let k = series.n_series();
    let per_series: Vec<(f64, f64)> = (0..k)
        .map(|s| {
            let mut n = 0.0;
            let mut ss = 0.0;
            let mut dt = 0.0;
            let mut prev = series.origin_time;
            for i in 0..series.len() {
                let step = series.times[i] - prev;
                prev = series.times[i];
                if series.valid[i][s] && !series.entered[i][s] {
                    n += 1.0;
                    ss += series.values[i][s].powi(2);
                    dt += step;
                }
            }
            if n > 0.0 && dt > 0.0 {
                (ss / dt, (ss / n).sqrt())
            } else {
                (0.05, 1e-3)
            }
        })
        .collect();
    let var = per_series.first().map_or(0.05, |x| x.0).clamp(1e-3, 4.0);
    let season = if spec.pattern.is_seasonal() {
        SeasonalitySpec::new(spec.pattern, var, 0.5 * var, 0.5)?
    } else {
        SeasonalitySpec::new(spec.pattern, var, 0.0, 0.0)?
    };
    let lambda = if spec.freeze_lambda { 0.0 } else { 0.5 };
    let f = FactorParams::new(lambda, 2.0, 0.3 * var.sqrt(), 0.0, var, season)?;
    let h = per_series.iter().map(|x| (0.3 * x.1).max(1e-5)).collect();
    Ok(ModelParams::one_factor(f, h))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitOptions {
    pub anneal: AnnealOptions,
    #[serde(skip)]
    pub filter: FilterOptions,
    /// Starting point; a data-driven guess when absent.
    #[serde(skip)]
    pub start: Option<ModelParams>,
    /// Relative central-difference step for the Hessian.
    pub hessian_step: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            anneal: AnnealOptions::default(),
            filter: FilterOptions::default(),
            start: None,
            hessian_step: 1e-4,
        }
    }
}

/// One row of the parameter table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParamEstimate {
    pub name: String,
    pub value: f64,
    pub transformed: f64,
    /// Standard error in the transformed space.
    pub std_error: f64,
    /// Delta-method standard error in natural space.
    pub natural_std_error: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub seed: u64,
    pub evaluations: usize,
    pub stages: Vec<usize>,
    pub accepted: usize,
    pub rejected: usize,
    pub failed: usize,
    pub restart_logliks: Vec<f64>,
    pub best_restart: usize,
    pub polish_gain: f64,
    /// False when the negative Hessian was not positive definite.
    pub hessian_ok: bool,
}

/// Result of one fit; also constructible from reported summary numbers.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitReport {
    pub model: String,
    pub pattern: Pattern,
    pub lambda_frozen: bool,
    pub loglik: f64,
    pub n_free: usize,
    pub n_dates: usize,
    pub aic: f64,
    pub bic: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub estimates: Vec<ParamEstimate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<ModelParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<FitDiagnostics>,
}

pub fn aic(loglik: f64, n_free: usize) -> f64 {
    2.0 * n_free as f64 - 2.0 * loglik
}

pub fn bic(loglik: f64, n_free: usize, n_dates: usize) -> f64 {
    n_free as f64 * (n_dates as f64).ln() - 2.0 * loglik
}

impl FitReport {
    /// Report carrying only summary statistics (no parameter values).
    pub fn from_summary(model: &str, pattern: Pattern, lambda_frozen: bool, loglik: f64, n_free: usize, n_dates: usize) -> Self {
        Self {
            model: model.to_string(),
            pattern,
            lambda_frozen,
            loglik,
            n_free,
            n_dates,
            aic: aic(loglik, n_free),
            bic: bic(loglik, n_free, n_dates),
            estimates: Vec::new(),
            params: None,
            diagnostics: None,
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("cannot serialise report: {e}")))
    }

    pub fn from_toml(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(format!("bad report: {e}")))
    }

    /// `name,value,transformed,std_error,natural_std_error`
    pub fn write_estimates_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["name", "value", "transformed", "std_error", "natural_std_error"])?;
        for e in &self.estimates {
            w.write_record([
                e.name.clone(),
                format!("{:.6}", e.value),
                format!("{:.6}", e.transformed),
                format!("{:.6}", e.std_error),
                format!("{:.6}", e.natural_std_error),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn estimate(&self, name: &str) -> Option<&ParamEstimate> {
        self.estimates.iter().find(|e| e.name == name)
    }
}

/// Log-likelihood of `series` at unconstrained point `x`, or `None` where undefined.
pub fn objective(spec: &ModelSpec, series: &ObservationSeries, filter: &FilterOptions, x: &[f64]) -> Option<f64> {
    let p = spec.from_unconstrained(x).ok()?;
    loglik(series, &p, filter).ok().filter(|v| v.is_finite())
}

/// Central-difference Hessian of `f` at `x` with steps `h_i = rel·max(|x_i|, 1)`.
pub fn hessian<F>(f: &F, x: &[f64], rel: f64) -> Option<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Option<f64> + Sync,
{
    let n = x.len();
    let steps: Vec<f64> = x.iter().map(|v| rel * v.abs().max(1.0)).collect();
    let f0 = f(x)?;
    let shifted = |moves: &[(usize, f64)]| {
        let mut y = x.to_vec();
        for &(i, s) in moves {
            y[i] += s * steps[i];
        }
        f(&y)
    };
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..=i).map(move |j| (i, j))).collect();
    let entries: Vec<Option<f64>> = pairs
        .par_iter()
        .map(|&(i, j)| {
            if i == j {
                let up = shifted(&[(i, 1.0)])?;
                let dn = shifted(&[(i, -1.0)])?;
                Some((up - 2.0 * f0 + dn) / (steps[i] * steps[i]))
            } else {
                let pp = shifted(&[(i, 1.0), (j, 1.0)])?;
                let pm = shifted(&[(i, 1.0), (j, -1.0)])?;
                let mp = shifted(&[(i, -1.0), (j, 1.0)])?;
                let mm = shifted(&[(i, -1.0), (j, -1.0)])?;
                Some((pp - pm - mp + mm) / (4.0 * steps[i] * steps[j]))
            }
        })
        .collect();
    let mut h = DMatrix::zeros(n, n);
    for (&(i, j), e) in pairs.iter().zip(entries) {
        let v = e?;
        h[(i, j)] = v;
        h[(j, i)] = v;
    }
    Some(h)
}

/// Standard errors sqrt(diag((−H)⁻¹)); NaN where the inverse has a non-positive diagonal.
/// The flag reports whether −H was positive definite.
pub fn standard_errors(h: &DMatrix<f64>) -> (Vec<f64>, bool) {
    let neg = -h;
    let n = neg.nrows();
    match neg.clone().cholesky() {
        Some(c) => {
            let inv = c.inverse();
            ((0..n).map(|i| inv[(i, i)].sqrt()).collect(), true)
        }
        None => {
            let inv = neg.pseudo_inverse(1e-12).unwrap_or_else(|_| DMatrix::from_element(n, n, f64::NAN));
            (
                (0..n)
                    .map(|i| if inv[(i, i)] > 0.0 { inv[(i, i)].sqrt() } else { f64::NAN })
                    .collect(),
                false,
            )
        }
    }
}

fn natural_derivatives(spec: &ModelSpec, x: &[f64]) -> Vec<f64> {
    let base = spec.from_unconstrained(x).map(|p| spec.natural_values(&p));
    let Ok(base) = base else { return vec![f64::NAN; x.len()] };
    (0..x.len())
        .map(|i| {
            let e = 1e-6 * x[i].abs().max(1.0);
            let mut up = x.to_vec();
            let mut dn = x.to_vec();
            up[i] += e;
            dn[i] -= e;
            match (spec.from_unconstrained(&up), spec.from_unconstrained(&dn)) {
                (Ok(a), Ok(b)) => (spec.natural_values(&a)[i] - spec.natural_values(&b)[i]) / (2.0 * e),
                _ => f64::NAN,
            }
        })
        .zip(&base)
        .map(|(d, _)| d)
        .collect()
}

/// Fits `spec` to `series` by annealing (plus optional polish) and reports standard errors.
pub fn fit(series: &ObservationSeries, spec: &ModelSpec, opts: &FitOptions) -> Result<FitReport> {
    if series.n_series() != spec.n_series {
        return Err(Error::Contract(format!(
            "spec expects {} series, panel has {}",
            spec.n_series,
            series.n_series()
        )));
    }
    if series.is_empty() {
        return Err(Error::Domain("cannot fit an empty panel".into()));
    }
    let start = match &opts.start {
        Some(p) => spec.coerce(p)?,
        None => default_start(spec, series)?,
    };
    let x0 = spec.to_unconstrained(&start)?;
    let f = |x: &[f64]| objective(spec, series, &opts.filter, x);
    if f(&x0).is_none() {
        return Err(Error::NonConvergence("log-likelihood undefined at the starting point".into()));
    }
    let res = anneal(f, &x0, &opts.anneal)?;
    let params = spec.from_unconstrained(&res.best)?;
    let (se, hessian_ok) = match hessian(&f, &res.best, opts.hessian_step) {
        Some(h) => standard_errors(&h),
        None => (vec![f64::NAN; x0.len()], false),
    };
    let deriv = natural_derivatives(spec, &res.best);
    let natural = spec.natural_values(&params);
    let estimates = spec
        .names()
        .into_iter()
        .enumerate()
        .map(|(i, name)| ParamEstimate {
            name,
            value: natural[i],
            transformed: res.best[i],
            std_error: se[i],
            natural_std_error: (deriv[i] * se[i]).abs(),
        })
        .collect();
    let n_free = spec.n_free();
    let diagnostics = FitDiagnostics {
        seed: opts.anneal.seed,
        evaluations: res.evaluations(),
        stages: res.restarts.iter().map(|r| r.stages).collect(),
        accepted: res.restarts.iter().map(|r| r.accepted).sum(),
        rejected: res.restarts.iter().map(|r| r.rejected).sum(),
        failed: res.restarts.iter().map(|r| r.failed).sum(),
        restart_logliks: res.restarts.iter().map(|r| r.value).collect(),
        best_restart: res.best_restart,
        polish_gain: res.polish_gain,
        hessian_ok,
    };
    Ok(FitReport {
        model: spec.label(),
        pattern: spec.pattern,
        lambda_frozen: spec.freeze_lambda,
        loglik: res.value,
        n_free,
        n_dates: series.len(),
        aic: aic(res.value, n_free),
        bic: bic(res.value, n_free, series.len()),
        estimates,
        params: Some(params),
        diagnostics: Some(diagnostics),
    })
}

/// p-values below this are reported as zero.
pub const P_VALUE_FLOOR: f64 = 1e-16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrTest {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
}

/// Likelihood-ratio test of `restricted` nested in `full` with `df` restrictions.
pub fn lr_test(full: &FitReport, restricted: &FitReport, df: usize) -> Result<LrTest> {
    if df == 0 {
        return Err(Error::Contract("a likelihood-ratio test needs df >= 1".into()));
    }
    if full.n_dates != restricted.n_dates {
        return Err(Error::Contract(format!(
            "fits use different panels ({} vs {} dates)",
            full.n_dates, restricted.n_dates
        )));
    }
    if restricted.n_free > full.n_free {
        return Err(Error::Contract(format!(
            "'{}' has more free parameters than '{}'",
            restricted.model, full.model
        )));
    }
    let d = 2.0 * (full.loglik - restricted.loglik);
    let chi = ChiSquared::new(df as f64).map_err(|e| Error::Contract(e.to_string()))?;
    let mut p = chi.sf(d.max(0.0));
    if p < P_VALUE_FLOOR {
        p = 0.0;
    }
    Ok(LrTest {
        statistic: d,
        df,
        p_value: p,
    })
}

/// Seasonality test (against the constant level, 2 restrictions) and Samuelson test
/// (against λ = 0, 1 restriction).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrTable {
    pub seasonality: LrTest,
    pub samuelson: LrTest,
}

pub fn lr_tests(seasonal: &FitReport, nonseasonal: &FitReport, nolambda: &FitReport) -> Result<LrTable> {
    if !seasonal.pattern.is_seasonal() || seasonal.lambda_frozen {
        return Err(Error::Contract("first report must be a seasonal fit with free lambda".into()));
    }
    if nonseasonal.pattern.is_seasonal() || nonseasonal.lambda_frozen {
        return Err(Error::Contract("second report must be a constant-level fit with free lambda".into()));
    }
    if !nolambda.lambda_frozen || nolambda.pattern != seasonal.pattern {
        return Err(Error::Contract("third report must be the same pattern with lambda frozen".into()));
    }
    if seasonal.n_free != nonseasonal.n_free + 2 || seasonal.n_free != nolambda.n_free + 1 {
        return Err(Error::Contract("free-parameter counts are not nested".into()));
    }
    Ok(LrTable {
        seasonality: lr_test(seasonal, nonseasonal, 2)?,
        samuelson: lr_test(seasonal, nolambda, 1)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankRow {
    pub rank: usize,
    pub model: String,
    pub loglik: f64,
    pub aic: f64,
    pub bic: f64,
    pub delta_aic: f64,
    pub weight: f64,
}

/// Sorts by AIC and attaches Δ_aic and Akaike weights exp(−Δ/2)/Σexp(−Δ/2).
pub fn rank_models(reports: &[FitReport]) -> Vec<RankRow> {
    let mut idx: Vec<usize> = (0..reports.len()).collect();
    idx.sort_by(|&a, &b| reports[a].aic.total_cmp(&reports[b].aic).then(a.cmp(&b)));
    let Some(&first) = idx.first() else { return Vec::new() };
    let best = reports[first].aic;
    let raw: Vec<f64> = idx.iter().map(|&i| (-(reports[i].aic - best) / 2.0).exp()).collect();
    let total: f64 = raw.iter().sum();
    idx.iter()
        .zip(raw)
        .enumerate()
        .map(|(r, (&i, w))| RankRow {
            rank: r + 1,
            model: reports[i].model.clone(),
            loglik: reports[i].loglik,
            aic: reports[i].aic,
            bic: reports[i].bic,
            delta_aic: reports[i].aic - best,
            weight: w / total,
        })
        .collect()
}

/// `rank,delta_aic,model,loglik,aic,bic,weight`
pub fn write_ranking_csv<W: Write>(out: W, rows: &[RankRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["rank", "delta_aic", "model", "loglik", "aic", "bic", "weight"])?;
    for r in rows {
        w.write_record([
            r.rank.to_string(),
            format!("{:.2}", r.delta_aic),
            r.model.clone(),
            format!("{:.2}", r.loglik),
            format!("{:.2}", r.aic),
            format!("{:.2}", r.bic),
            format!("{:.4}", r.weight),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One column of the model-comparison summary: LL, AIC, BIC, D1 and p, Δ_aic, weight,
/// LL without λ, D2 and p.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SummaryColumn {
    pub model: String,
    pub loglik: f64,
    pub aic: f64,
    pub bic: f64,
    pub d1: Option<LrTest>,
    pub delta_aic: f64,
    pub weight: f64,
    pub loglik_without_lambda: Option<f64>,
    pub d2: Option<LrTest>,
}

/// Builds the summary columns for a set of families fitted on one panel. `fits` holds
/// (free-λ fit, λ-frozen fit) per family; exactly one family must be non-seasonal.
pub fn summary_table(fits: &[(FitReport, Option<FitReport>)]) -> Result<Vec<SummaryColumn>> {
    let base = fits
        .iter()
        .find(|(f, _)| !f.pattern.is_seasonal())
        .map(|(f, _)| f.clone())
        .ok_or_else(|| Error::Contract("summary needs a constant-level fit".into()))?;
    let reports: Vec<FitReport> = fits.iter().map(|(f, _)| f.clone()).collect();
    let ranks = rank_models(&reports);
    fits.iter()
        .map(|(f, nl)| {
            let row = ranks.iter().find(|r| r.model == f.model).expect("ranked");
            let d1 = if f.pattern.is_seasonal() { Some(lr_test(f, &base, 2)?) } else { None };
            let d2 = match nl {
                Some(n) => Some(lr_test(f, n, 1)?),
                None => None,
            };
            Ok(SummaryColumn {
                model: f.model.clone(),
                loglik: f.loglik,
                aic: f.aic,
                bic: f.bic,
                d1,
                delta_aic: row.delta_aic,
                weight: row.weight,
                loglik_without_lambda: nl.as_ref().map(|n| n.loglik),
                d2,
            })
        })
        .collect()
}

/// Writes the summary with one row per statistic and one column per model.
pub fn write_summary_csv<W: Write>(out: W, cols: &[SummaryColumn]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["statistic".to_string()];
    header.extend(cols.iter().map(|c| c.model.clone()));
    w.write_record(&header)?;
    let dash = || "-".to_string();
    let rows: Vec<(&str, Box<dyn Fn(&SummaryColumn) -> String>)> = vec![
        ("LL", Box::new(|c| format!("{:.2}", c.loglik))),
        ("AIC", Box::new(|c| format!("{:.2}", c.aic))),
        ("BIC", Box::new(|c| format!("{:.2}", c.bic))),
        ("D1", Box::new(move |c| c.d1.map_or_else(dash, |t| format!("{:.2}", t.statistic)))),
        ("p-value (D1)", Box::new(move |c| c.d1.map_or_else(dash, |t| format!("{:.4}", t.p_value)))),
        ("delta_aic", Box::new(|c| format!("{:.2}", c.delta_aic))),
        ("weight", Box::new(|c| format!("{:.4}", c.weight))),
        ("LL w/o lambda", Box::new(move |c| c.loglik_without_lambda.map_or_else(dash, |v| format!("{v:.2}")))),
        ("D2", Box::new(move |c| c.d2.map_or_else(dash, |t| format!("{:.2}", t.statistic)))),
        ("p-value (D2)", Box::new(move |c| c.d2.map_or_else(dash, |t| format!("{:.4}", t.p_value)))),
    ];
    for (name, cell) in rows {
        let mut rec = vec![name.to_string()];
        rec.extend(cols.iter().map(|c| cell(c)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
