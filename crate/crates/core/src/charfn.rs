//! Joint characteristic function of two futures log-returns.
//!
//! For each factor the Riccati equation
//!     ∂A/∂t = κA − ½σ²A² − q(u,t),   A(T) = i(ρ/σ) f₁(u,T)
//! is integrated backwards with fixed-step RK4 on a uniform grid that depends only on
//! (κ, σ, ρ, λ, T), never on θ. The θ-dependent part B(0,T) = ∫₀ᵀ κθ(t)A(t) dt is a
//! linear functional of the grid values of A and A′ (cubic Hermite interpolation
//! integrated by Gauss–Legendre on kink-aligned sub-panels); its weights are computed
//! once per request.

use std::collections::HashMap;
use std::sync::{OnceLock, RwLock};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::params::FactorParams;
use crate::quadrature::GaussLegendre;
use crate::seasonality::SeasonalitySpec;

pub const DEFAULT_ODE_STEPS: usize = 2048;

const I: Complex64 = Complex64::new(0.0, 1.0);
const MODULUS_SLACK: f64 = 1e-8;
const SIDE_OFFSET: f64 = 1e-13;

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            steps: DEFAULT_ODE_STEPS,
        }
    }
}

type TransformKey = (u8, u64, u64, u64, u64, u64);

fn transform_cache() -> &'static RwLock<HashMap<TransformKey, f64>> {
    static CACHE: OnceLock<RwLock<HashMap<TransformKey, f64>>> = OnceLock::new();
    CACHE.get_or_init(|| RwLock::new(HashMap::new()))
}

/// θ̂_T(λ), memoised on the exact bit patterns of (spec, T, λ).
pub fn cached_transform(spec: &SeasonalitySpec, horizon: f64, lambda: f64) -> Result<f64> {
    let key = (
        spec.pattern as u8,
        spec.a.to_bits(),
        spec.b.to_bits(),
        spec.t0.to_bits(),
        horizon.to_bits(),
        lambda.to_bits(),
    );
    if let Some(v) = transform_cache().read().ok().and_then(|m| m.get(&key).copied()) {
        return Ok(v);
    }
    let value = spec.transform(horizon, lambda)?;
    if let Ok(mut map) = transform_cache().write() {
        if map.len() > 200_000 {
            map.clear();
        }
        map.insert(key, value);
    }
    Ok(value)
}

/// Request for a single evaluation of the joint characteristic function.
#[derive(Debug, Clone)]
pub struct CfRequest {
    pub u: [Complex64; 2],
    /// Evaluation time T.
    pub horizon: f64,
    /// Contract maturities T₁, T₂ ≥ T.
    pub maturities: [f64; 2],
    pub params: Vec<FactorParams>,
    /// F(0,T₁), F(0,T₂); only needed for the log-price transform.
    pub initial_prices: Option<[f64; 2]>,
}

/// φ(u; T, T₁, T₂) = E[exp(i(u₁X₁(T) + u₂X₂(T)))].
pub fn joint_cf(req: &CfRequest) -> Result<Complex64> {
    JointCf::new(&req.params, req.horizon, req.maturities, OdeOptions::default())?.eval(req.u)
}

/// Φ(u) = exp(i Σ u_k ln F(0,T_k)) · φ(u).
pub fn log_price_cf(req: &CfRequest) -> Result<Complex64> {
    let prices = req
        .initial_prices
        .ok_or_else(|| Error::Domain("log-price transform needs the initial curve".into()))?;
    if prices.iter().any(|p| !(*p > 0.0)) {
        return Err(Error::Domain("initial futures prices must be > 0".into()));
    }
    let shift = req.u[0] * prices[0].ln() + req.u[1] * prices[1].ln();
    Ok((I * shift).exp() * joint_cf(req)?)
}

/// Single-contract transform: φ₁(u₁), or Φ₁(u₁) = e^{iu₁ ln F(0,T₁)}φ₁(u₁) with a price.
pub fn single_cf(
    u1: Complex64,
    horizon: f64,
    maturity: f64,
    params: &[FactorParams],
    price: Option<f64>,
) -> Result<Complex64> {
    let engine = JointCf::new(params, horizon, [maturity, maturity], OdeOptions::default())?;
    let phi = engine.eval([u1, Complex64::new(0.0, 0.0)])?;
    match price {
        None => Ok(phi),
        Some(p) if p > 0.0 => Ok((I * u1 * p.ln()).exp() * phi),
        Some(p) => Err(Error::Domain(format!("futures price must be > 0, got {p}"))),
    }
}

/// Per-factor data that does not depend on u.
#[derive(Debug, Clone)]
struct FactorPlan {
    p: FactorParams,
    theta_hat: f64,
    /// e^{λt} on the half-step grid t = k·h/2.
    growth: Vec<f64>,
    /// e^{−λT₁}, e^{−λT₂}.
    damp: [f64; 2],
    /// B(0,T) = Σ_k w_val[k]·A_k + w_der[k]·A′_k.
    w_val: Vec<f64>,
    w_der: Vec<f64>,
}

/// Reusable characteristic-function engine for fixed (params, T, T₁, T₂).
#[derive(Debug, Clone)]
pub struct JointCf {
    plans: Vec<FactorPlan>,
    horizon: f64,
    maturities: [f64; 2],
    steps: usize,
}

/// Numerical solution of the ODE pair for one factor at one u.
#[derive(Debug, Clone)]
pub struct OdeSolution {
    pub times: Vec<f64>,
    pub a: Vec<Complex64>,
    /// ∂A/∂t from the right-hand side at each grid point.
    pub a_prime: Vec<Complex64>,
    /// B(0,T) by Gauss–Legendre quadrature of κθA.
    pub b_quadrature: Complex64,
    pub theta_hat: f64,
    pub f1_0: Complex64,
    pub f2_0: Complex64,
}

impl JointCf {
    pub fn new(
        params: &[FactorParams],
        horizon: f64,
        maturities: [f64; 2],
        options: OdeOptions,
    ) -> Result<Self> {
        if params.is_empty() {
            return Err(Error::Constraint("characteristic function needs a factor".into()));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::Domain(format!("evaluation time must be > 0, got {horizon}")));
        }
        if maturities.iter().any(|&m| m < horizon) {
            return Err(Error::Domain(format!(
                "evaluation time {horizon} exceeds a maturity {maturities:?}"
            )));
        }
        if options.steps < 4 {
            return Err(Error::Domain("ODE grid needs at least 4 steps".into()));
        }
        let n = options.steps;
        let h = horizon / n as f64;
        let gl = GaussLegendre::new(4);
        let plans = params
            .iter()
            .map(|p| {
                p.validate()?;
                let theta_hat = cached_transform(&p.season, horizon, p.lambda)?;
                let growth = (0..=2 * n)
                    .map(|k| (p.lambda * k as f64 * h / 2.0).exp())
                    .collect();
                let damp = [(-p.lambda * maturities[0]).exp(), (-p.lambda * maturities[1]).exp()];
                let (w_val, w_der) = hermite_weights(p, horizon, n, &gl);
                Ok(FactorPlan {
                    p: *p,
                    theta_hat,
                    growth,
                    damp,
                    w_val,
                    w_der,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            plans,
            horizon,
            maturities,
            steps: n,
        })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn maturities(&self) -> [f64; 2] {
        self.maturities
    }

    pub fn n_factors(&self) -> usize {
        self.plans.len()
    }

    /// φ(u).
    pub fn eval(&self, u: [Complex64; 2]) -> Result<Complex64> {
        let mut exponent = Complex64::new(0.0, 0.0);
        for plan in &self.plans {
            let sol = self.solve_plan(plan, u)?;
            let p = &plan.p;
            exponent += -I * (p.rho / p.sigma) * sol.f1_0 * (p.v0 + p.kappa * plan.theta_hat)
                + sol.a[0] * p.v0
                + sol.b_quadrature;
        }
        let phi = exponent.exp();
        if !phi.is_finite() {
            return Err(Error::numerical(0, format!("characteristic function overflow at u={u:?}")));
        }
        let real_u = u.iter().all(|x| x.im == 0.0);
        if real_u && phi.norm() > 1.0 + MODULUS_SLACK {
            return Err(Error::numerical(
                0,
                format!("|phi| = {} exceeds 1 at real u={u:?}", phi.norm()),
            ));
        }
        Ok(phi)
    }

    /// Full ODE solution of factor `j` for diagnostics.
    pub fn solve_factor(&self, j: usize, u: [Complex64; 2]) -> Result<OdeSolution> {
        let plan = self
            .plans
            .get(j)
            .ok_or_else(|| Error::Domain(format!("factor index {j} out of range")))?;
        self.solve_plan(plan, u)
    }

    fn solve_plan(&self, plan: &FactorPlan, u: [Complex64; 2]) -> Result<OdeSolution> {
        let p = &plan.p;
        let n = self.steps;
        let h = self.horizon / n as f64;
        let f1_0 = u[0] * plan.damp[0] + u[1] * plan.damp[1];
        let f2_0 = u[0] * plan.damp[0] * plan.damp[0] + u[1] * plan.damp[1] * plan.damp[1];
        let c1 = I * p.rho * (p.kappa - p.lambda) / p.sigma;
        let c2 = 0.5 * (1.0 - p.rho * p.rho);
        let half_sig2 = 0.5 * p.sigma * p.sigma;
        let q = |k: usize| {
            let g = plan.growth[k];
            let f1 = f1_0 * g;
            c1 * f1 - c2 * f1 * f1 - 0.5 * I * f2_0 * g * g
        };
        let rhs = |a: Complex64, qv: Complex64| p.kappa * a - half_sig2 * a * a - qv;

        let mut a = vec![Complex64::new(0.0, 0.0); n + 1];
        a[n] = I * (p.rho / p.sigma) * f1_0 * plan.growth[2 * n];
        for k in (0..n).rev() {
            let y = a[k + 1];
            let q_hi = q(2 * k + 2);
            let q_mid = q(2 * k + 1);
            let q_lo = q(2 * k);
            let k1 = rhs(y, q_hi);
            let k2 = rhs(y - 0.5 * h * k1, q_mid);
            let k3 = rhs(y - 0.5 * h * k2, q_mid);
            let k4 = rhs(y - h * k3, q_lo);
            let next = y - h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            if !next.is_finite() {
                return Err(Error::numerical(
                    k,
                    format!("Riccati solution blew up at t={} for u={u:?}", k as f64 * h),
                ));
            }
            a[k] = next;
        }
        let a_prime: Vec<Complex64> = (0..=n).map(|k| rhs(a[k], q(2 * k))).collect();
        let b_quadrature = a
            .iter()
            .zip(&a_prime)
            .zip(plan.w_val.iter().zip(&plan.w_der))
            .map(|((ak, dk), (wv, wd))| ak * *wv + dk * *wd)
            .sum();
        Ok(OdeSolution {
            times: (0..=n).map(|k| k as f64 * h).collect(),
            a,
            a_prime,
            b_quadrature,
            theta_hat: plan.theta_hat,
            f1_0,
            f2_0,
        })
    }

    /// B(0,T) by co-integrating (A, B) with RK4 on a grid whose panels end on the kinks of
    /// θ. Independent of the Hermite-quadrature route used by [`eval`](Self::eval).
    pub fn b_by_cointegration(&self, j: usize, u: [Complex64; 2]) -> Result<Complex64> {
        let plan = self
            .plans
            .get(j)
            .ok_or_else(|| Error::Domain(format!("factor index {j} out of range")))?;
        let p = plan.p;
        let target_h = self.horizon / self.steps as f64;
        let f1_0 = u[0] * plan.damp[0] + u[1] * plan.damp[1];
        let f2_0 = u[0] * plan.damp[0] * plan.damp[0] + u[1] * plan.damp[1] * plan.damp[1];
        let q = |t: f64| {
            let g = (p.lambda * t).exp();
            let f1 = f1_0 * g;
            I * p.rho * (p.kappa - p.lambda) / p.sigma * f1
                - 0.5 * (1.0 - p.rho * p.rho) * f1 * f1
                - 0.5 * I * f2_0 * g * g
        };
        let mut edges = vec![0.0];
        edges.extend(p.season.kinks(0.0, self.horizon));
        edges.push(self.horizon);

        let mut a = I * (p.rho / p.sigma) * f1_0 * (p.lambda * self.horizon).exp();
        let mut b = Complex64::new(0.0, 0.0);
        for seg in edges.windows(2).rev() {
            let (lo, hi) = (seg[0], seg[1]);
            let theta = |t: f64| p.season.theta(t.clamp(lo + SIDE_OFFSET, hi - SIDE_OFFSET));
            let f = |t: f64, a: Complex64| {
                (
                    p.kappa * a - 0.5 * p.sigma * p.sigma * a * a - q(t),
                    -p.kappa * theta(t) * a,
                )
            };
            let m = ((hi - lo) / target_h).ceil().max(1.0) as usize;
            let h = (hi - lo) / m as f64;
            for k in (0..m).rev() {
                let t1 = lo + (k + 1) as f64 * h;
                let tm = t1 - 0.5 * h;
                let t0 = if k == 0 { lo } else { t1 - h };
                let (ka1, kb1) = f(t1, a);
                let (ka2, kb2) = f(tm, a - 0.5 * h * ka1);
                let (ka3, kb3) = f(tm, a - 0.5 * h * ka2);
                let (ka4, kb4) = f(t0, a - h * ka3);
                a -= h / 6.0 * (ka1 + 2.0 * ka2 + 2.0 * ka3 + ka4);
                b -= h / 6.0 * (kb1 + 2.0 * kb2 + 2.0 * kb3 + kb4);
            }
        }
        if !b.is_finite() {
            return Err(Error::numerical(0, "co-integrated B is not finite"));
        }
        Ok(b)
    }
}

/// Max over the grid of |∂A/∂t − κA + ½σ²A² + q|, with ∂A/∂t from five-point finite
/// differences of the numerical A.
pub fn riccati_residual(sol: &OdeSolution, params: &FactorParams) -> f64 {
    let n = sol.a.len() - 1;
    let h = sol.times[1] - sol.times[0];
    let a = &sol.a;
    let p = params;
    let mut worst: f64 = 0.0;
    for k in 0..=n {
        let d = if k >= 2 && k + 2 <= n {
            (a[k - 2] - 8.0 * a[k - 1] + 8.0 * a[k + 1] - a[k + 2]) / (12.0 * h)
        } else if k < 2 {
            (-25.0 * a[k] + 48.0 * a[k + 1] - 36.0 * a[k + 2] + 16.0 * a[k + 3] - 3.0 * a[k + 4])
                / (12.0 * h)
        } else {
            (25.0 * a[k] - 48.0 * a[k - 1] + 36.0 * a[k - 2] - 16.0 * a[k - 3] + 3.0 * a[k - 4])
                / (12.0 * h)
        };
        let t = sol.times[k];
        let g = (p.lambda * t).exp();
        let f1 = sol.f1_0 * g;
        let q = I * p.rho * (p.kappa - p.lambda) / p.sigma * f1
            - 0.5 * (1.0 - p.rho * p.rho) * f1 * f1
            - 0.5 * I * sol.f2_0 * g * g;
        let r = d - p.kappa * a[k] + 0.5 * p.sigma * p.sigma * a[k] * a[k] + q;
        worst = worst.max(r.norm());
    }
    worst
}

/// Weights turning grid values (A_k, A′_k) into ∫₀ᵀ κθ(t)A(t) dt.
fn hermite_weights(
    p: &FactorParams,
    horizon: f64,
    n: usize,
    gl: &GaussLegendre,
) -> (Vec<f64>, Vec<f64>) {
    let h = horizon / n as f64;
    let mut w_val = vec![0.0; n + 1];
    let mut w_der = vec![0.0; n + 1];
    let kinks = p.season.kinks(0.0, horizon);
    let mut next_kink = 0;
    for k in 0..n {
        let lo = k as f64 * h;
        let hi = if k + 1 == n { horizon } else { (k + 1) as f64 * h };
        let mut cuts = vec![lo];
        while next_kink < kinks.len() && kinks[next_kink] < hi {
            if kinks[next_kink] > lo {
                cuts.push(kinks[next_kink]);
            }
            next_kink += 1;
        }
        cuts.push(hi);
        for sub in cuts.windows(2) {
            for (t, w) in gl.mapped(sub[0], sub[1]) {
                let s = (t - lo) / h;
                let g = w * p.kappa * p.season.theta(t);
                let s2 = s * s;
                let s3 = s2 * s;
                w_val[k] += g * (2.0 * s3 - 3.0 * s2 + 1.0);
                w_der[k] += g * h * (s3 - 2.0 * s2 + s);
                w_val[k + 1] += g * (-2.0 * s3 + 3.0 * s2);
                w_der[k + 1] += g * h * (s3 - s2);
            }
        }
    }
    (w_val, w_der)
}
