//! European options across strikes and calendar spreads, with Monte Carlo checks.
//!
//! cargo run --release --example price_options

use seasonvol::pricing::{
    price_calendar_spread, price_strikes, spread_monte_carlo, OptionKind, PricingOptions, SpreadSpec, VanillaSpec,
};
use seasonvol::{FactorParams, Pattern, SeasonalitySpec};

fn main() -> seasonvol::Result<()> {
    let season = SeasonalitySpec::new(Pattern::Sinusoidal, 0.08, 0.05, 0.4)?;
    let f = FactorParams::new(0.6, 2.0, 0.35, -0.4, 0.07, season)?;
    let opts = PricingOptions::default();

    let spec = VanillaSpec { strike: 100.0, expiry: 0.5, maturity: 0.75, rate: 0.02, kind: OptionKind::Call };
    let strikes = [80.0, 90.0, 100.0, 110.0, 120.0];
    let calls = price_strikes(&spec, &strikes, &[f], 100.0, &opts)?;
    let puts = price_strikes(&VanillaSpec { kind: OptionKind::Put, ..spec }, &strikes, &[f], 100.0, &opts)?;
    println!("{:>8} {:>12} {:>12}", "strike", "call", "put");
    for ((k, c), p) in strikes.iter().zip(&calls).zip(&puts) {
        println!("{k:>8} {c:>12.6} {p:>12.6}");
    }

    println!("\ncalendar spread on F(·,0.75) − F(·,1.0), F₀ = 100 / 97");
    println!("{:>8} {:>12} {:>10} {:>20}", "strike", "price", "method", "simulation ± se");
    let mc_opts = PricingOptions { fallback_paths: 100_000, fallback_steps: 100, ..Default::default() };
    for k in [-2.0, 0.0, 3.0, 6.0] {
        let s = SpreadSpec { strike: k, expiry: 0.5, maturities: [0.75, 1.0], rate: 0.02 };
        let p = price_calendar_spread(&s, &[f], 100.0, 97.0)?;
        let (mc, se) = spread_monte_carlo(&s, &[f], 100.0, 97.0, &mc_opts)?;
        println!("{k:>8} {:>12.6} {:>10} {:>12.6} ± {se:.4}", p.price, format!("{:?}", p.method), mc);
    }
    Ok(())
}
