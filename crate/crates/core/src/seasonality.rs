//! Seasonal mean-reversion levels θ(t) and their exponential transforms
//! θ̂_T(λ) = ∫₀ᵀ θ(t) e^{λt} dt.
//!
//! All patterns are periodic with period one year. Sinusoidal and constant levels have
//! closed-form transforms; sawtooth and triangle are piecewise linear, so their transforms
//! are sums of exact segment integrals; exp-sinusoidal and spiked have no closed form and
//! are integrated with composite Gauss–Legendre on kink-aligned panels.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;

/// Below this |λ| the constant-level transform uses its Taylor expansion.
pub const SMALL_LAMBDA: f64 = 1e-8;

const QUAD_ORDER: usize = 16;
const QUAD_PANEL: f64 = 1.0 / 16.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pattern {
    Sinusoidal,
    ExpSinusoidal,
    Sawtooth,
    Triangle,
    Spiked,
    /// θ(t) ≡ a: the non-seasonal model.
    Constant,
}

impl Pattern {
    pub const ALL: [Pattern; 6] = [
        Pattern::Sinusoidal,
        Pattern::ExpSinusoidal,
        Pattern::Triangle,
        Pattern::Sawtooth,
        Pattern::Spiked,
        Pattern::Constant,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Pattern::Sinusoidal => "sinusoidal",
            Pattern::ExpSinusoidal => "exp-sinusoidal",
            Pattern::Sawtooth => "sawtooth",
            Pattern::Triangle => "triangle",
            Pattern::Spiked => "spiked",
            Pattern::Constant => "constant",
        }
    }

    pub fn is_seasonal(self) -> bool {
        self != Pattern::Constant
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Pattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('_', "-");
        match norm.as_str() {
            "sinusoidal" | "sin" => Ok(Pattern::Sinusoidal),
            "exp-sinusoidal" | "expsinusoidal" | "exp-sin" => Ok(Pattern::ExpSinusoidal),
            "sawtooth" => Ok(Pattern::Sawtooth),
            "triangle" => Ok(Pattern::Triangle),
            "spiked" => Ok(Pattern::Spiked),
            "constant" | "non-seasonal" | "nonseasonal" => Ok(Pattern::Constant),
            _ => Err(Error::Config(format!("unknown seasonality pattern '{s}'"))),
        }
    }
}

/// A seasonality pattern with level `a`, magnitude `b` and peak phase `t0` (year fraction).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeasonalitySpec {
    pub pattern: Pattern,
    pub a: f64,
    #[serde(default)]
    pub b: f64,
    #[serde(default)]
    pub t0: f64,
}

impl SeasonalitySpec {
    pub fn new(pattern: Pattern, a: f64, b: f64, t0: f64) -> Result<Self> {
        let spec = Self { pattern, a, b, t0 };
        spec.validate()?;
        Ok(spec)
    }

    pub fn constant(a: f64) -> Result<Self> {
        Self::new(Pattern::Constant, a, 0.0, 0.0)
    }

    /// Checks the admissible region. `b = 0` is accepted for every seasonal pattern and
    /// reduces it to the constant level (the nesting used by the seasonality test).
    pub fn validate(&self) -> Result<()> {
        let Self { pattern, a, b, t0 } = *self;
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::Constraint(format!("{pattern}: a must be > 0, got {a}")));
        }
        if pattern == Pattern::Constant {
            return Ok(());
        }
        if !(b.is_finite() && b >= 0.0) {
            return Err(Error::Constraint(format!("{pattern}: b must be >= 0, got {b}")));
        }
        if !(0.0..1.0).contains(&t0) {
            return Err(Error::Constraint(format!("{pattern}: t0 must lie in [0,1), got {t0}")));
        }
        if pattern == Pattern::Sinusoidal && b > a {
            return Err(Error::Constraint(format!(
                "sinusoidal requires a >= b, got a={a}, b={b}"
            )));
        }
        Ok(())
    }

    /// θ(t).
    pub fn theta(&self, t: f64) -> f64 {
        let Self { pattern, a, b, t0 } = *self;
        match pattern {
            Pattern::Constant => a,
            Pattern::Sinusoidal => a + b * (2.0 * PI * (t - t0)).cos(),
            Pattern::ExpSinusoidal => a * (b * (2.0 * PI * (t - t0)).cos()).exp(),
            Pattern::Sawtooth => a + b * phase(t - t0),
            Pattern::Triangle => a + b * (0.5 - phase(t - t0)).abs(),
            Pattern::Spiked => {
                let s = (PI * (t - t0)).sin().abs();
                let inner = 2.0 / (1.0 + s) - 1.0;
                a + b * inner * inner
            }
        }
    }

    /// Validating wrapper around [`theta`](Self::theta).
    pub fn eval_theta(&self, t: f64) -> Result<f64> {
        self.validate()?;
        if !(t >= 0.0) {
            return Err(Error::Domain(format!("theta evaluated at negative time {t}")));
        }
        Ok(self.theta(t))
    }

    /// Infimum of θ over a period.
    pub fn theta_min(&self) -> f64 {
        let Self { pattern, a, b, .. } = *self;
        match pattern {
            Pattern::Sinusoidal => a - b,
            Pattern::ExpSinusoidal => a * (-b).exp(),
            _ => a,
        }
    }

    /// Supremum of θ over a period.
    pub fn theta_max(&self) -> f64 {
        let Self { pattern, a, b, .. } = *self;
        match pattern {
            Pattern::Constant => a,
            Pattern::Sinusoidal => a + b,
            Pattern::ExpSinusoidal => a * b.exp(),
            Pattern::Sawtooth | Pattern::Spiked => a + b,
            Pattern::Triangle => a + 0.5 * b,
        }
    }

    /// Points in the open interval (lo, hi) where θ is not smooth.
    pub fn kinks(&self, lo: f64, hi: f64) -> Vec<f64> {
        let offsets: &[f64] = match self.pattern {
            Pattern::Sawtooth => &[0.0],
            Pattern::Triangle | Pattern::Spiked => &[0.0, 0.5],
            _ => return Vec::new(),
        };
        let mut out = Vec::new();
        let first = (lo - self.t0).floor() as i64 - 1;
        let last = (hi - self.t0).ceil() as i64 + 1;
        for k in first..=last {
            for off in offsets {
                let x = self.t0 + k as f64 + off;
                if x > lo && x < hi {
                    out.push(x);
                }
            }
        }
        out.sort_by(|x, y| x.total_cmp(y));
        out
    }

    /// θ̂_T(λ) = ∫₀ᵀ θ(t) e^{λt} dt.
    pub fn transform(&self, horizon: f64, lambda: f64) -> Result<f64> {
        self.validate()?;
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::Domain(format!("transform horizon must be > 0, got {horizon}")));
        }
        if !lambda.is_finite() {
            return Err(Error::Domain("transform rate must be finite".into()));
        }
        Ok(self.transform_unchecked(horizon, lambda))
    }

    pub(crate) fn transform_unchecked(&self, horizon: f64, lambda: f64) -> f64 {
        let Self { pattern, a, b, t0 } = *self;
        match pattern {
            Pattern::Constant => a * exp_integral(lambda, horizon),
            Pattern::Sinusoidal => {
                let w = 2.0 * PI;
                let denom = lambda * lambda + w * w;
                let end = w * (horizon - t0);
                let start = w * t0;
                b * (lambda * horizon).exp() / denom * (w * end.sin() + lambda * end.cos())
                    + b / denom * (w * start.sin() - lambda * start.cos())
                    + a * exp_integral(lambda, horizon)
            }
            Pattern::Sawtooth | Pattern::Triangle => self.piecewise_linear_transform(horizon, lambda),
            Pattern::ExpSinusoidal | Pattern::Spiked => {
                let kinks = self.kinks(0.0, horizon);
                gl_rule().integrate_piecewise(0.0, horizon, &kinks, QUAD_PANEL, |t| {
                    self.theta(t) * (lambda * t).exp()
                })
            }
        }
    }

    /// Exact transform for patterns that are linear between kinks.
    fn piecewise_linear_transform(&self, horizon: f64, lambda: f64) -> f64 {
        let mut edges = vec![0.0];
        edges.extend(self.kinks(0.0, horizon));
        edges.push(horizon);
        edges
            .windows(2)
            .map(|w| {
                let (lo, hi) = (w[0], w[1]);
                let mid = 0.5 * (lo + hi);
                // θ restricted to (lo, hi) is value + slope·(t − lo); read both off the midpoint
                // so that the jump at lo is attributed to the correct side.
                let slope = self.segment_slope(mid);
                let value_at_lo = self.theta(mid) - slope * (mid - lo);
                linear_exp_integral(value_at_lo, slope, lo, hi - lo, lambda)
            })
            .sum()
    }

    fn segment_slope(&self, t: f64) -> f64 {
        match self.pattern {
            Pattern::Sawtooth => self.b,
            Pattern::Triangle => {
                if phase(t - self.t0) < 0.5 {
                    -self.b
                } else {
                    self.b
                }
            }
            _ => 0.0,
        }
    }
}

/// Fractional part x − ⌊x⌋ in [0, 1).
fn phase(x: f64) -> f64 {
    let f = x - x.floor();
    if f >= 1.0 {
        0.0
    } else {
        f
    }
}

/// (e^{λT} − 1)/λ with its limit T as λ → 0.
pub fn exp_integral(lambda: f64, horizon: f64) -> f64 {
    if lambda.abs() < SMALL_LAMBDA {
        horizon * (1.0 + lambda * horizon / 2.0 + lambda * lambda * horizon * horizon / 6.0)
    } else {
        (lambda * horizon).exp_m1() / lambda
    }
}

/// ∫_{start}^{start+len} (value + slope·(t − start)) e^{λt} dt.
fn linear_exp_integral(value: f64, slope: f64, start: f64, len: f64, lambda: f64) -> f64 {
    let x = lambda * len;
    let (e1, e2) = if x.abs() < 0.5 {
        // ∫₀¹ e^{xs} ds and ∫₀¹ s e^{xs} ds as power series.
        let mut term = 1.0;
        let mut s1 = 0.0;
        let mut s2 = 0.0;
        for n in 0..30 {
            let nf = n as f64;
            s1 += term / (nf + 1.0);
            s2 += term / (nf + 2.0);
            term *= x / (nf + 1.0);
        }
        (s1, s2)
    } else {
        let em1 = x.exp_m1();
        (em1 / x, (x.exp() * (x - 1.0) + 1.0) / (x * x))
    };
    (lambda * start).exp() * (value * len * e1 + slope * len * len * e2)
}

fn gl_rule() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(QUAD_ORDER))
}
