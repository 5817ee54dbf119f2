//! European and calendar-spread options on futures priced by Fourier inversion of the
//! model characteristic function.
//!
//! Vanilla calls use the damped (Carr–Madan) transform in log-moneyness. Calendar spreads
//! use the exercise-region lower bound: for a region {X₁ − βX₂ ≥ c} the three pieces
//! E[F₁1{·}], E[F₂1{·}] and K·P{·} are one-dimensional inversions of the joint
//! characteristic function, and (β, c) are chosen to maximise the bound.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::charfn::{JointCf, OdeOptions};
use crate::cir::{simulate_terminal, Measure, SimConfig};
use crate::error::{Error, Result};
use crate::params::FactorParams;
use crate::quadrature::GaussLegendre;

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptionKind {
    Call,
    Put,
}

#[derive(Debug, Clone, Copy)]
pub struct VanillaSpec {
    pub strike: f64,
    /// Option expiry T.
    pub expiry: f64,
    /// Futures maturity T_m ≥ T.
    pub maturity: f64,
    pub rate: f64,
    pub kind: OptionKind,
}

#[derive(Debug, Clone, Copy)]
pub struct SpreadSpec {
    /// May be zero or negative.
    pub strike: f64,
    pub expiry: f64,
    pub maturities: [f64; 2],
    pub rate: f64,
}

#[derive(Debug, Clone)]
pub struct PricingOptions {
    /// Damping exponent of the vanilla transform.
    pub damping: f64,
    /// Damping of the exercise-probability transforms used for spreads.
    pub spread_damping: f64,
    /// Integration stops once the transform modulus falls below this fraction of its
    /// value at the origin.
    pub truncation: f64,
    pub panel_width: f64,
    /// Panel width for the spread transforms, which are smooth on a coarser scale.
    pub spread_panel_width: f64,
    pub max_frequency: f64,
    pub ode: OdeOptions,
    /// ODE grid for the spread transforms.
    pub spread_ode: OdeOptions,
    /// Monte Carlo fallback for spreads when the bound optimisation fails.
    pub fallback_paths: usize,
    pub fallback_steps: usize,
    pub fallback_seed: u64,
}

impl Default for PricingOptions {
    fn default() -> Self {
        Self {
            damping: 1.25,
            spread_damping: 0.5,
            truncation: 1e-12,
            panel_width: 1.0,
            spread_panel_width: 4.0,
            max_frequency: 5000.0,
            ode: OdeOptions::default(),
            spread_ode: OdeOptions { steps: 512 },
            fallback_paths: 200_000,
            fallback_steps: 200,
            fallback_seed: 0x5eed,
        }
    }
}

fn check_vanilla(spec: &VanillaSpec, f0: f64) -> Result<()> {
    if !(spec.strike > 0.0) || !(spec.expiry > 0.0) {
        return Err(Error::Domain("strike and expiry must be > 0".into()));
    }
    if spec.maturity < spec.expiry {
        return Err(Error::Domain("futures maturity precedes option expiry".into()));
    }
    if !(f0 > 0.0) {
        return Err(Error::Domain(format!("futures price must be > 0, got {f0}")));
    }
    Ok(())
}

/// Integrates `values(node)` over [0, ∞) panel by panel, stopping when `envelope` at the end
/// of a panel drops below `tol · envelope(0)`. Returns (node, weight, value) triples so that
/// several payoffs can share the transform evaluations.
fn fourier_nodes<T, F>(opts: &PricingOptions, panel_width: f64, mut eval: F) -> Result<Vec<(f64, f64, T)>>
where
    T: Send,
    F: FnMut(f64) -> Result<(T, f64)>,
{
    let gl = GaussLegendre::new(16);
    let (_, env0) = eval(0.0)?;
    let scale = env0.max(f64::MIN_POSITIVE);
    let mut out = Vec::new();
    let mut lo = 0.0;
    while lo < opts.max_frequency {
        let hi = lo + panel_width;
        for (x, w) in gl.mapped(lo, hi) {
            let (v, _) = eval(x)?;
            out.push((x, w, v));
        }
        let (_, env) = eval(hi)?;
        if env < opts.truncation * scale {
            return Ok(out);
        }
        lo = hi;
    }
    Err(Error::numerical(
        out.len(),
        format!(
            "Fourier integrand still above truncation level at frequency {}",
            opts.max_frequency
        ),
    ))
}

/// Price of a European call or put on F(·,T_m).
pub fn price_european(spec: &VanillaSpec, params: &[FactorParams], f0: f64) -> Result<f64> {
    price_european_with(spec, params, f0, &PricingOptions::default())
}

pub fn price_european_with(
    spec: &VanillaSpec,
    params: &[FactorParams],
    f0: f64,
    opts: &PricingOptions,
) -> Result<f64> {
    Ok(price_strikes(spec, &[spec.strike], params, f0, opts)?[0])
}

/// Prices one option per strike, sharing the characteristic-function evaluations.
pub fn price_strikes(
    spec: &VanillaSpec,
    strikes: &[f64],
    params: &[FactorParams],
    f0: f64,
    opts: &PricingOptions,
) -> Result<Vec<f64>> {
    for &k in strikes {
        check_vanilla(&VanillaSpec { strike: k, ..*spec }, f0)?;
    }
    let alpha = opts.damping;
    let cf = JointCf::new(params, spec.expiry, [spec.maturity, spec.maturity], opts.ode)?;
    let zero = Complex64::new(0.0, 0.0);
    let nodes = fourier_nodes(opts, opts.panel_width, |u| {
        let phi = cf.eval([Complex64::new(u, -(alpha + 1.0)), zero])?;
        let denom = Complex64::new(alpha * alpha + alpha - u * u, (2.0 * alpha + 1.0) * u);
        Ok((phi / denom, phi.norm()))
    })?;
    let disc = (-spec.rate * spec.expiry).exp();
    strikes
        .par_iter()
        .map(|&k| {
            let m = (f0 / k).ln();
            let integral: f64 = nodes
                .iter()
                .map(|(u, w, psi)| w * ((I * u * m).exp() * psi).re)
                .sum();
            let call = disc * f0 * (alpha * m).exp() / std::f64::consts::PI * integral;
            if !call.is_finite() {
                return Err(Error::numerical(0, format!("non-finite call price at strike {k}")));
            }
            Ok(match spec.kind {
                OptionKind::Call => call,
                OptionKind::Put => put_from_call(call, f0, k, spec.rate, spec.expiry),
            })
        })
        .collect()
}

/// Put-call parity C − P = e^{−rT}(F₀ − K).
pub fn put_from_call(call: f64, f0: f64, strike: f64, rate: f64, expiry: f64) -> f64 {
    call - (-rate * expiry).exp() * (f0 - strike)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpreadMethod {
    /// Optimised exercise-region lower bound.
    Fourier,
    /// Exercise is (numerically) certain; price equals the discounted forward payoff.
    AlwaysExercise,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy)]
pub struct SpreadPrice {
    pub price: f64,
    pub method: SpreadMethod,
    /// Exercise region {X₁ − βX₂ ≥ cut} used by the Fourier bound.
    pub beta: f64,
    pub cut: f64,
    /// Standard error when priced by simulation.
    pub std_error: Option<f64>,
}

pub fn price_calendar_spread(
    spec: &SpreadSpec,
    params: &[FactorParams],
    f0_1: f64,
    f0_2: f64,
) -> Result<SpreadPrice> {
    price_calendar_spread_with(spec, params, f0_1, f0_2, &PricingOptions::default())
}

pub fn price_calendar_spread_with(
    spec: &SpreadSpec,
    params: &[FactorParams],
    f0_1: f64,
    f0_2: f64,
    opts: &PricingOptions,
) -> Result<SpreadPrice> {
    if !(spec.expiry > 0.0) || spec.maturities.iter().any(|&m| m < spec.expiry) {
        return Err(Error::Domain("spread expiry must be > 0 and precede both maturities".into()));
    }
    if !(f0_1 > 0.0 && f0_2 > 0.0) {
        return Err(Error::Domain("futures prices must be > 0".into()));
    }
    let disc = (-spec.rate * spec.expiry).exp();
    let forward = disc * (f0_1 - f0_2 - spec.strike);
    let k = spec.strike;
    if f0_2 + k <= 0.0 {
        return Ok(SpreadPrice {
            price: forward.max(0.0),
            method: SpreadMethod::AlwaysExercise,
            beta: 0.0,
            cut: f64::NEG_INFINITY,
            std_error: None,
        });
    }
    let beta0 = f0_2 / (f0_2 + k);
    let cut0 = ((f0_2 + k) / f0_1).ln();
    let cf = JointCf::new(params, spec.expiry, spec.maturities, opts.spread_ode)?;
    let bound = SpreadBound {
        cf: &cf,
        f1: f0_1,
        f2: f0_2,
        strike: k,
        disc,
        delta: opts.spread_damping,
        opts,
    };
    match bound.optimise(beta0, cut0) {
        Ok((price, beta, cut)) if price.is_finite() => {
            let (price, method) = if forward > price {
                (forward, SpreadMethod::AlwaysExercise)
            } else {
                (price.max(0.0), SpreadMethod::Fourier)
            };
            Ok(SpreadPrice {
                price,
                method,
                beta,
                cut,
                std_error: None,
            })
        }
        _ => {
            let (price, se) = spread_monte_carlo(spec, params, f0_1, f0_2, opts)?;
            Ok(SpreadPrice {
                price,
                method: SpreadMethod::MonteCarlo,
                beta: beta0,
                cut: cut0,
                std_error: Some(se),
            })
        }
    }
}

struct SpreadBound<'a> {
    cf: &'a JointCf,
    f1: f64,
    f2: f64,
    strike: f64,
    disc: f64,
    delta: f64,
    opts: &'a PricingOptions,
}

/// Transform values for a fixed β: (γ, weight, N(γ)/(iγ+δ)).
type BoundNodes = Vec<(f64, f64, Complex64)>;

impl SpreadBound<'_> {
    fn nodes(&self, beta: f64) -> Result<BoundNodes> {
        let delta = self.delta;
        let one = Complex64::new(0.0, 1.0);
        fourier_nodes(self.opts, self.opts.spread_panel_width, |g| {
            let w = Complex64::new(g, -delta);
            let m1 = self.cf.eval([w - one, -beta * w])?;
            let m2 = self.cf.eval([w, -beta * w - one])?;
            let m0 = self.cf.eval([w, -beta * w])?;
            let n = self.f1 * m1 - self.f2 * m2 - self.strike * m0;
            let env = m0.norm().max(m1.norm()).max(m2.norm());
            Ok((n / Complex64::new(delta, g), env))
        })
    }

    fn value(&self, nodes: &BoundNodes, cut: f64) -> f64 {
        let s: f64 = nodes
            .iter()
            .map(|(g, w, v)| w * ((-I * g * cut).exp() * v).re)
            .sum();
        self.disc * (-self.delta * cut).exp() / std::f64::consts::PI * s
    }

    /// Best cut for fixed β (golden section; the transform values are reused).
    fn best_cut(&self, nodes: &BoundNodes, cut0: f64) -> (f64, f64) {
        let (c, v) = golden_max(|c| self.value(nodes, c), cut0 - 0.5, cut0 + 0.5, 1e-9, 80);
        (v, c)
    }

    fn optimise(&self, beta0: f64, cut0: f64) -> Result<(f64, f64, f64)> {
        let eval_beta = |beta: f64| -> Result<(f64, f64)> {
            let nodes = self.nodes(beta)?;
            Ok(self.best_cut(&nodes, cut0))
        };
        let (v0, c0) = eval_beta(beta0)?;
        let mut best = (v0, beta0, c0);
        let span = 0.25 * beta0.abs().max(0.2);
        let mut failed = false;
        let (b_opt, _) = golden_max(
            |b| match eval_beta(b) {
                Ok((v, c)) => {
                    if v > best.0 {
                        best = (v, b, c);
                    }
                    v
                }
                Err(_) => {
                    failed = true;
                    f64::NEG_INFINITY
                }
            },
            beta0 - span,
            beta0 + span,
            1e-4 * span,
            30,
        );
        if failed && !best.0.is_finite() {
            return Err(Error::NonConvergence("spread bound optimisation stalled".into()));
        }
        let _ = b_opt;
        Ok(best)
    }
}

/// Golden-section search for a maximum on [lo, hi]. Returns (argmax, max).
fn golden_max<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, tol: f64, max_iter: usize) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (lo, hi);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..max_iter {
        if (b - a).abs() < tol {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Monte Carlo price and standard error of the calendar spread.
pub fn spread_monte_carlo(
    spec: &SpreadSpec,
    params: &[FactorParams],
    f0_1: f64,
    f0_2: f64,
    opts: &PricingOptions,
) -> Result<(f64, f64)> {
    let samples = simulate_terminal(
        params,
        &spec.maturities,
        &SimConfig {
            horizon: spec.expiry,
            steps: opts.fallback_steps,
            n_paths: opts.fallback_paths,
            measure: Measure::RiskNeutral,
            seed: opts.fallback_seed,
        },
    )?;
    let disc = (-spec.rate * spec.expiry).exp();
    let payoffs: Vec<f64> = samples
        .iter()
        .map(|s| {
            let a = f0_1 * s.log_returns[0].exp();
            let b = f0_2 * s.log_returns[1].exp();
            disc * (a - b - spec.strike).max(0.0)
        })
        .collect();
    Ok(mean_and_se(&payoffs))
}

pub(crate) fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
